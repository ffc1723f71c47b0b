//! Finite-key analysis with Hoeffding concentration.
//!
//! A run of `N` pulses is split over the intensity settings and polarizations,
//! post-selection discards part of the stronger key-basis cell, and every
//! observed count is promoted to a two-sided Hoeffding interval. The decoy
//! estimators are then evaluated at the worst-case interval endpoints, giving
//! a lower bound on the kept single-photon events and an upper bound on the
//! phase error, from which the extractable key length follows.
//!
//! The same estimators run on expected counts (deterministic forecasts) and on
//! sampled counts from [`crate::montecarlo`], so the simulation validates the
//! exact code path used for prediction.

use crate::keyrate::{h2, single_photon_min_term};
use crate::model::{
    forward_observables, ChannelGeometry, IntensitySetting, Polarization, SourceModel,
    SystemParams,
};
use crate::{Error, Result};

/// Run-size and protocol probabilities of a finite-key session.
#[derive(Clone, Copy, Debug)]
pub struct FiniteKeyParams {
    /// Total number of emitted pulses.
    pub n_pulses: u64,
    /// Probability of the signal setting.
    pub p_signal: f64,
    /// Probability of the weak decoy setting.
    pub p_decoy: f64,
    /// Probability of the vacuum setting.
    pub p_vacuum: f64,
    /// Probability of the key basis; the analysis is run symmetric at 1/2.
    pub p_basis: f64,
    /// Probability of the attenuated state within a basis; symmetric at 1/2.
    pub p_pol: f64,
    /// Post-selection probability applied to the stronger key-basis state.
    pub p_select: f64,
    /// Correctness failure bound.
    pub eps_cor: f64,
    /// Secrecy failure bound; also used for the concentration intervals.
    pub eps_sec: f64,
}

impl FiniteKeyParams {
    /// Symmetric-basis parameters with the vacuum probability filled in.
    pub fn new(
        n_pulses: u64,
        p_signal: f64,
        p_decoy: f64,
        p_select: f64,
        eps_cor: f64,
        eps_sec: f64,
    ) -> Result<Self> {
        let fk = FiniteKeyParams {
            n_pulses,
            p_signal,
            p_decoy,
            p_vacuum: 1.0 - p_signal - p_decoy,
            p_basis: 0.5,
            p_pol: 0.5,
            p_select,
            eps_cor,
            eps_sec,
        };
        fk.validate()?;
        Ok(fk)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(Error::InvalidParameter("n_pulses must be positive".into()));
        }
        let open_unit = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
            Ok(())
        };
        open_unit("p_signal", self.p_signal)?;
        open_unit("p_decoy", self.p_decoy)?;
        open_unit("p_vacuum", self.p_vacuum)?;
        open_unit("p_basis", self.p_basis)?;
        open_unit("p_pol", self.p_pol)?;
        open_unit("eps_cor", self.eps_cor)?;
        open_unit("eps_sec", self.eps_sec)?;
        if (self.p_signal + self.p_decoy + self.p_vacuum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "setting probabilities must sum to 1, got {}",
                self.p_signal + self.p_decoy + self.p_vacuum
            )));
        }
        if !(self.p_select > 0.0 && self.p_select <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p_select must lie in (0, 1], got {}",
                self.p_select
            )));
        }
        Ok(())
    }
}

/// Integer pulse budget per (setting, polarization) cell.
#[derive(Clone, Debug)]
pub struct CountAllocation {
    /// Emitted pulses per cell, indexed `[setting][polarization]`.
    pub pulses: [[u64; 4]; 3],
    /// Post-selected share of the signal-setting `V` cell.
    pub post_selected_sv: u64,
}

impl CountAllocation {
    /// Pulses contributing to observed statistics: the raw budget, except the
    /// signal `V` cell where only the post-selected share is kept.
    pub fn effective(&self, setting: IntensitySetting, pol: Polarization) -> u64 {
        if setting == IntensitySetting::Signal && pol == Polarization::V {
            self.post_selected_sv
        } else {
            self.pulses[setting.index()][pol.index()]
        }
    }
}

/// Two-sided Hoeffding deviation for a count-valued observation `x` at failure
/// probability `eps`.
pub fn hoeffding_delta(x: f64, eps: f64) -> f64 {
    debug_assert!(eps > 0.0 && eps < 1.0, "failure probability must lie in (0, 1)");
    if x <= 0.0 {
        return 0.0;
    }
    (x / 2.0 * (1.0 / eps).ln()).sqrt()
}

/// Confidence interval around an observed count, clamped to `[0, pulses]`.
pub fn expected_interval(detections: f64, pulses: f64, eps: f64) -> (f64, f64) {
    let delta = hoeffding_delta(detections, eps);
    ((detections - delta).max(0.0), (detections + delta).min(pulses))
}

/// Splits the pulse budget over the 12 cells.
///
/// Setting totals are rounded from the setting probabilities; within a
/// setting each cell receives the floor of its share and the remainder goes
/// to the `H` cell. The post-selected share of the signal `V` cell is floored
/// separately. Any empty cell is rejected because every estimator needs at
/// least one pulse per cell.
pub fn allocate_pulses(fk: &FiniteKeyParams) -> Result<CountAllocation> {
    fk.validate()?;
    let n = fk.n_pulses as f64;
    let totals = [
        (fk.p_signal * n).round() as u64,
        (fk.p_decoy * n).round() as u64,
        (fk.p_vacuum * n).round() as u64,
    ];
    let shares = [
        fk.p_basis * fk.p_pol,
        fk.p_basis * (1.0 - fk.p_pol),
        (1.0 - fk.p_basis) * fk.p_pol,
        (1.0 - fk.p_basis) * (1.0 - fk.p_pol),
    ];
    let mut pulses = [[0u64; 4]; 3];
    for (s, &total) in totals.iter().enumerate() {
        let mut assigned = 0u64;
        for (p, &share) in shares.iter().enumerate() {
            pulses[s][p] = (share * total as f64).floor() as u64;
            assigned += pulses[s][p];
        }
        pulses[s][Polarization::H.index()] += total - assigned;
    }
    let sv_share = fk.p_basis * (1.0 - fk.p_pol);
    let post_selected_sv = (fk.p_select * sv_share * totals[0] as f64).floor() as u64;
    let alloc = CountAllocation { pulses, post_selected_sv };
    for setting in IntensitySetting::ALL {
        for pol in Polarization::ALL {
            if alloc.effective(setting, pol) == 0 {
                return Err(Error::InvalidParameter(format!(
                    "pulse allocation leaves the ({}, {}) cell empty",
                    setting.label(),
                    pol.label()
                )));
            }
        }
    }
    Ok(alloc)
}

/// Pulses, detections, and errors observed in one cell. Counts are stored as
/// floats so expected (fractional) and sampled (integer) tables share one
/// representation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CellCounts {
    pub pulses: f64,
    pub detections: f64,
    pub errors: f64,
}

/// Counts for all 12 cells. The signal `V` cell always refers to the
/// post-selected (kept) pulses.
#[derive(Clone, Debug, Default)]
pub struct CountTable {
    cells: [[CellCounts; 4]; 3],
}

impl CountTable {
    pub fn get(&self, setting: IntensitySetting, pol: Polarization) -> CellCounts {
        self.cells[setting.index()][pol.index()]
    }

    pub fn set(&mut self, setting: IntensitySetting, pol: Polarization, counts: CellCounts) {
        self.cells[setting.index()][pol.index()] = counts;
    }

    /// Expected counts for a scenario: every cell holds its effective pulse
    /// budget and the model's mean detections and errors.
    pub fn expected(
        params: &SystemParams,
        source: &SourceModel,
        geometry: &ChannelGeometry,
        alloc: &CountAllocation,
    ) -> Result<CountTable> {
        let obs = forward_observables(params, source, geometry)?;
        let mut table = CountTable::default();
        for setting in IntensitySetting::ALL {
            for pol in Polarization::ALL {
                let pulses = alloc.effective(setting, pol) as f64;
                let cell = obs.get(setting, pol);
                let detections = cell.gain * pulses;
                table.set(
                    setting,
                    pol,
                    CellCounts { pulses, detections, errors: cell.qber * detections },
                );
            }
        }
        Ok(table)
    }
}

/// Worst-case single-photon yield lower bound for one polarization: the decoy
/// formula is evaluated at every endpoint combination of the signal, decoy,
/// and vacuum detection intervals and the minimum is kept.
pub(crate) fn y1_lower_worst(
    counts: &CountTable,
    source: &SourceModel,
    pol: Polarization,
    eps: f64,
) -> Result<f64> {
    let mu_s = source.intensity(IntensitySetting::Signal, pol);
    let mu_v = source.intensity(IntensitySetting::Decoy, pol);
    let cs = counts.get(IntensitySetting::Signal, pol);
    let cv = counts.get(IntensitySetting::Decoy, pol);
    let cw = counts.get(IntensitySetting::Vacuum, pol);
    let s_ends = expected_interval(cs.detections, cs.pulses, eps);
    let v_ends = expected_interval(cv.detections, cv.pulses, eps);
    let w_ends = expected_interval(cw.detections, cw.pulses, eps);
    let mut worst = f64::INFINITY;
    for q_s in [s_ends.0, s_ends.1] {
        for q_v in [v_ends.0, v_ends.1] {
            for y0 in [w_ends.0, w_ends.1] {
                let value =
                    crate::decoy::y1_lower(q_s / cs.pulses, q_v / cv.pulses, y0 / cw.pulses, mu_s, mu_v)?;
                worst = worst.min(value);
            }
        }
    }
    Ok(worst)
}

/// Worst-case single-photon error-gain upper bound for one polarization: the
/// decoy error gain is taken at the top of its interval and the background
/// yield at the bottom.
fn e1y1_upper_worst(
    counts: &CountTable,
    source: &SourceModel,
    pol: Polarization,
    e0: f64,
    eps: f64,
) -> Result<f64> {
    let mu_v = source.intensity(IntensitySetting::Decoy, pol);
    let cv = counts.get(IntensitySetting::Decoy, pol);
    let cw = counts.get(IntensitySetting::Vacuum, pol);
    let eq_hi = expected_interval(cv.errors, cv.pulses, eps).1 / cv.pulses;
    let y0_lo = expected_interval(cw.detections, cw.pulses, eps).0 / cw.pulses;
    // The observed error gain enters the bound as the product E_v * Q_v.
    crate::decoy::e1y1_upper(eq_hi, 1.0, y0_lo, e0, mu_v)
}

/// Lower bound on the single-photon events surviving sifting and
/// post-selection in the key basis.
///
/// Both key-basis cells are bounded with their own worst-case decoy estimate;
/// the post-selected `V` cell is reweighted by `1/P` so that the shared
/// emission weight of the minimum term applies to both cells.
pub fn single_photon_events_lower(
    counts: &CountTable,
    source: &SourceModel,
    fk: &FiniteKeyParams,
) -> Result<f64> {
    let mu_h = source.intensity(IntensitySetting::Signal, Polarization::H);
    let mu_v = source.intensity(IntensitySetting::Signal, Polarization::V);
    let m = single_photon_min_term(mu_h, mu_v, fk.p_select);
    let y1_h = y1_lower_worst(counts, source, Polarization::H, fk.eps_sec)?;
    let y1_v = y1_lower_worst(counts, source, Polarization::V, fk.eps_sec)?;
    let n_h = counts.get(IntensitySetting::Signal, Polarization::H).pulses;
    let n_v_kept = counts.get(IntensitySetting::Signal, Polarization::V).pulses;
    Ok(m * y1_h * n_h + (m / fk.p_select) * y1_v * n_v_kept)
}

/// Upper bound on the phase-basis single-photon error rate, clamped to
/// `[0, 1/2]`. Returns `None` when both phase-basis yield bounds vanish.
pub fn phase_error_upper(
    counts: &CountTable,
    source: &SourceModel,
    params: &SystemParams,
    fk: &FiniteKeyParams,
) -> Result<Option<f64>> {
    let y1_d = y1_lower_worst(counts, source, Polarization::D, fk.eps_sec)?;
    let y1_a = y1_lower_worst(counts, source, Polarization::A, fk.eps_sec)?;
    if y1_d + y1_a <= 0.0 {
        return Ok(None);
    }
    let eg_d = e1y1_upper_worst(counts, source, Polarization::D, params.background_error, fk.eps_sec)?;
    let eg_a = e1y1_upper_worst(counts, source, Polarization::A, params.background_error, fk.eps_sec)?;
    Ok(Some(((eg_d + eg_a) / (y1_d + y1_a)).clamp(0.0, 0.5)))
}

/// Extractable key length from the single-photon floor `s1_low`, the phase
/// error ceiling `e1_up`, and the error-correction leakage, floored at zero.
pub fn key_length(s1_low: f64, e1_up: f64, lambda_ec: f64, eps_cor: f64, eps_sec: f64) -> f64 {
    let raw = s1_low * (1.0 - h2(e1_up.clamp(0.0, 0.5)))
        - lambda_ec
        - 6.0 * (21.0 / eps_sec).log2()
        - (2.0 / eps_cor).log2();
    raw.floor().max(0.0)
}

/// Finite-key outcome and its intermediate bounds.
#[derive(Clone, Copy, Debug)]
pub struct FiniteKeyResult {
    /// Secret bits per emitted pulse.
    pub rate: f64,
    /// Extractable secret key length in bits.
    pub key_length: f64,
    /// Lower bound on kept key-basis single-photon events.
    pub s1_lower: f64,
    /// Phase-error upper bound; `None` when unbounded.
    pub e1_upper: Option<f64>,
    /// Error-correction leakage in bits.
    pub lambda_ec: f64,
    /// Kept key-basis detections.
    pub n_z: f64,
    /// Error rate of the kept key-basis detections.
    pub e_z: f64,
}

/// Runs the full finite-key estimate on an observed (or expected) count table.
pub fn finite_key_from_counts(
    counts: &CountTable,
    params: &SystemParams,
    source: &SourceModel,
    fk: &FiniteKeyParams,
    ec_inefficiency: f64,
) -> Result<FiniteKeyResult> {
    fk.validate()?;
    let s1_lower = single_photon_events_lower(counts, source, fk)?;
    let e1_upper = phase_error_upper(counts, source, params, fk)?;
    let key_h = counts.get(IntensitySetting::Signal, Polarization::H);
    let key_v = counts.get(IntensitySetting::Signal, Polarization::V);
    let n_z = key_h.detections + key_v.detections;
    let e_z = if n_z > 0.0 { (key_h.errors + key_v.errors) / n_z } else { 0.0 };
    let lambda_ec = ec_inefficiency * n_z * h2(e_z.clamp(0.0, 1.0));
    let length = match e1_upper {
        Some(e1) if n_z > 0.0 => key_length(s1_lower, e1, lambda_ec, fk.eps_cor, fk.eps_sec),
        _ => 0.0,
    };
    Ok(FiniteKeyResult {
        rate: length / fk.n_pulses as f64,
        key_length: length,
        s1_lower,
        e1_upper,
        lambda_ec,
        n_z,
        e_z,
    })
}

/// Deterministic finite-key rate: allocates the pulse budget, forecasts the
/// expected counts, and runs the estimators on them. Concentration intervals
/// use `eps_sec`; the rate normalizes the key length by all emitted pulses.
pub fn finite_key_rate(
    params: &SystemParams,
    source: &SourceModel,
    geometry: &ChannelGeometry,
    fk: &FiniteKeyParams,
    ec_inefficiency: f64,
) -> Result<FiniteKeyResult> {
    let alloc = allocate_pulses(fk)?;
    let counts = CountTable::expected(params, source, geometry, &alloc)?;
    finite_key_from_counts(&counts, params, source, fk, ec_inefficiency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::heuristic_p_optimal;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_fk() -> FiniteKeyParams {
        let p = heuristic_p_optimal(1.3, 0.1).unwrap();
        FiniteKeyParams::new(1_000_000_000_000, 0.8, 0.15, p, 1e-10, 1e-10).unwrap()
    }

    #[test]
    fn hoeffding_matches_reference_values() {
        assert_relative_eq!(hoeffding_delta(5000.0, 1e-10), 239.92629560940406, max_relative = 1e-6);
        assert_eq!(hoeffding_delta(0.0, 1e-10), 0.0);
        assert_relative_eq!(
            hoeffding_delta(20000.0, 1e-10),
            2.0 * hoeffding_delta(5000.0, 1e-10),
            max_relative = 1e-9
        );
    }

    #[test]
    fn interval_matches_reference_values() {
        let (lo, hi) = expected_interval(5000.0, 1e6, 1e-10);
        assert_relative_eq!(lo, 4760.073704390596, max_relative = 1e-6);
        assert_relative_eq!(hi, 5239.926295609404, max_relative = 1e-6);
        let (lo, hi) = expected_interval(10.0, 12.0, 1e-10);
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 12.0);
    }

    #[test]
    fn allocation_matches_reference_values() {
        let fk = FiniteKeyParams::new(10_000_000_000, 0.8, 0.15, 0.5, 1e-10, 1e-10).unwrap();
        let alloc = allocate_pulses(&fk).unwrap();
        assert_eq!(alloc.pulses[0][Polarization::H.index()], 2_000_000_000);
        assert_eq!(alloc.pulses[0][Polarization::V.index()], 2_000_000_000);
        assert_eq!(alloc.pulses[1][Polarization::D.index()], 375_000_000);
        assert_eq!(alloc.pulses[2][Polarization::A.index()], 125_000_000);
        assert_eq!(alloc.post_selected_sv, 1_000_000_000);
        assert_eq!(alloc.effective(IntensitySetting::Signal, Polarization::V), 1_000_000_000);
        assert_eq!(alloc.effective(IntensitySetting::Signal, Polarization::H), 2_000_000_000);
    }

    #[test]
    fn allocation_routes_remainder_to_h() {
        let fk = FiniteKeyParams::new(103, 0.8, 0.15, 1.0, 1e-10, 1e-10).unwrap();
        let alloc = allocate_pulses(&fk).unwrap();
        let row = alloc.pulses[0];
        assert_eq!(row, [22, 20, 20, 20]);
        assert_eq!(row.iter().sum::<u64>(), 82);
    }

    #[test]
    fn allocation_rejects_empty_cells() {
        let fk = FiniteKeyParams::new(12, 0.5, 0.25, 1.0, 1e-10, 1e-10).unwrap();
        assert!(matches!(allocate_pulses(&fk), Err(crate::Error::InvalidParameter(_))));
    }

    #[test]
    fn key_length_matches_reference_value() {
        assert_eq!(key_length(1e6, 0.02, 328141.0, 1e-10, 1e-10), 530158.0);
        assert_eq!(key_length(100.0, 0.02, 328141.0, 1e-10, 1e-10), 0.0);
        let overhead = 6.0 * (21.0f64 / 1e-10).log2() + (2.0f64 / 1e-10).log2();
        assert_relative_eq!(overhead, 259.88887117878795, max_relative = 1e-9);
    }

    #[test]
    fn finite_rate_matches_reference_values() {
        let params = SystemParams::default();
        let source = SourceModel::symmetric_pdl(1.3, 0.08, 10.0).unwrap();
        let geometry = ChannelGeometry { distance_km: 50.0 };
        let result = finite_key_rate(&params, &source, &geometry, &reference_fk(), 1.16).unwrap();
        assert_relative_eq!(result.s1_lower, 874035341.0870032, max_relative = 1e-6);
        assert_relative_eq!(result.e1_upper.unwrap(), 0.017397366813508276, max_relative = 1e-6);
        assert_relative_eq!(result.rate, 0.000461683836, max_relative = 1e-9);
    }

    #[test]
    fn finite_rate_grows_with_block_size() {
        let params = SystemParams::default();
        let source = SourceModel::symmetric_pdl(1.3, 0.08, 10.0).unwrap();
        let geometry = ChannelGeometry { distance_km: 50.0 };
        let p = heuristic_p_optimal(1.3, 0.1).unwrap();
        let small = FiniteKeyParams::new(10_000_000_000, 0.8, 0.15, p, 1e-10, 1e-10).unwrap();
        let large = reference_fk();
        let r_small = finite_key_rate(&params, &source, &geometry, &small, 1.16).unwrap();
        let r_large = finite_key_rate(&params, &source, &geometry, &large, 1.16).unwrap();
        assert!(r_large.rate > r_small.rate);
    }

    proptest! {
        #[test]
        fn key_length_is_monotone(
            s1 in 1e4f64..1e8,
            e1 in 0.0f64..0.4,
            bump in 1.0f64..1e4,
        ) {
            let base = key_length(s1, e1, 1000.0, 1e-10, 1e-10);
            prop_assert!(key_length(s1 + bump, e1, 1000.0, 1e-10, 1e-10) >= base);
            prop_assert!(key_length(s1, e1 + 0.05, 1000.0, 1e-10, 1e-10) <= base);
            prop_assert!(key_length(s1, e1, 1000.0 + bump, 1e-10, 1e-10) <= base);
        }

        #[test]
        fn interval_brackets_the_observation(x in 0.0f64..1e9, extra in 1.0f64..1e6) {
            let pulses = x + extra;
            let (lo, hi) = expected_interval(x, pulses, 1e-10);
            prop_assert!(lo <= x && x <= hi);
            prop_assert!(lo >= 0.0 && hi <= pulses);
        }
    }
}
