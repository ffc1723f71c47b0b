//! Seeded Monte-Carlo sampling of detection counts.
//!
//! Two fidelities are supported. Cell-level sampling draws each cell's
//! detections and errors from the closed-form gain and QBER, which checks the
//! statistical plumbing. Photon-resolved sampling splits every cell's pulses
//! into photon-number classes and detects each class with its own yield, so
//! the simulation knows the true single-photon events and can test whether the
//! decoy and finite-key estimators actually bound them.
//!
//! Every cell draws from its own deterministic RNG substream, so results are
//! reproducible for a given seed regardless of evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Binomial;

use crate::finite::{
    allocate_pulses, expected_interval, finite_key_from_counts, phase_error_upper,
    single_photon_events_lower, y1_lower_worst, CellCounts, CountTable, FiniteKeyParams,
    FiniteKeyResult,
};
use crate::keyrate::single_photon_min_term;
use crate::model::{
    error_n, forward_observables, poisson_photon_pmf, system_transmittance, yield_n,
    ChannelGeometry, IntensitySetting, Polarization, SourceModel, SystemParams,
};
use crate::Result;

/// Sampling fidelity of a simulation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fidelity {
    /// Draw detections and errors per cell from the closed-form observables.
    CellLevel,
    /// Split pulses into photon-number classes and detect each class with its
    /// own yield, tagging single-photon events as ground truth.
    PhotonResolved,
}

/// Ground-truth single-photon detections and errors per cell, available from
/// photon-resolved runs.
#[derive(Clone, Debug, Default)]
pub struct SinglePhotonTruth {
    pub detections: [[f64; 4]; 3],
    pub errors: [[f64; 4]; 3],
}

impl SinglePhotonTruth {
    pub fn detections_at(&self, setting: IntensitySetting, pol: Polarization) -> f64 {
        self.detections[setting.index()][pol.index()]
    }

    pub fn errors_at(&self, setting: IntensitySetting, pol: Polarization) -> f64 {
        self.errors[setting.index()][pol.index()]
    }
}

/// One simulated session.
#[derive(Clone, Debug)]
pub struct SimulationRun {
    pub seed: u64,
    pub fidelity: Fidelity,
    pub counts: CountTable,
    /// Single-photon ground truth; present for photon-resolved runs.
    pub truth: Option<SinglePhotonTruth>,
}

/// Per-cell empirical rates computed from counts.
#[derive(Clone, Copy, Debug, Default)]
pub struct EmpiricalCell {
    /// Observed detections per pulse.
    pub gain: f64,
    /// Observed error fraction; `None` when the cell saw no detections.
    pub qber: Option<f64>,
}

/// Empirical gains and error rates for all 12 cells.
#[derive(Clone, Debug, Default)]
pub struct EmpiricalRates {
    cells: [[EmpiricalCell; 4]; 3],
}

impl EmpiricalRates {
    pub fn get(&self, setting: IntensitySetting, pol: Polarization) -> EmpiricalCell {
        self.cells[setting.index()][pol.index()]
    }
}

fn draw_binomial(rng: &mut ChaCha12Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    rng.sample(Binomial::new(n, p).expect("probability was range-checked"))
}

/// Simulates the counts of one session.
///
/// The pulse budget comes from [`allocate_pulses`], so the signal `V` cell
/// already holds only its post-selected share. Cell `(setting, pol)` draws
/// from substream `4 * setting + pol` of the seeded generator.
pub fn simulate_counts(
    params: &SystemParams,
    source: &SourceModel,
    geometry: &ChannelGeometry,
    fk: &FiniteKeyParams,
    seed: u64,
    fidelity: Fidelity,
) -> Result<SimulationRun> {
    let alloc = allocate_pulses(fk)?;
    let obs = forward_observables(params, source, geometry)?;
    let eta = system_transmittance(params, geometry);
    let mut counts = CountTable::default();
    let mut truth = SinglePhotonTruth::default();
    for setting in IntensitySetting::ALL {
        for pol in Polarization::ALL {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream((4 * setting.index() + pol.index()) as u64);
            let pulses = alloc.effective(setting, pol);
            let cell = match fidelity {
                Fidelity::CellLevel => {
                    let o = obs.get(setting, pol);
                    let detections = draw_binomial(&mut rng, pulses, o.gain);
                    let errors = draw_binomial(&mut rng, detections, o.qber);
                    CellCounts {
                        pulses: pulses as f64,
                        detections: detections as f64,
                        errors: errors as f64,
                    }
                }
                Fidelity::PhotonResolved => {
                    let mu = source.intensity(setting, pol);
                    let mut remaining = pulses;
                    let mut cum_prev = 0.0;
                    let (mut det, mut err) = (0u64, 0u64);
                    let mut i = 0u32;
                    while remaining > 0 {
                        let p_i = poisson_photon_pmf(mu, i);
                        let tail = 1.0 - cum_prev;
                        let k = if tail <= 1e-15 || i >= 500 {
                            remaining
                        } else {
                            draw_binomial(&mut rng, remaining, (p_i / tail).min(1.0))
                        };
                        if k > 0 {
                            let y = yield_n(params.background_yield, eta, i);
                            let d = draw_binomial(&mut rng, k, y);
                            let m = if d > 0 {
                                let e_i = error_n(
                                    params.background_yield,
                                    y,
                                    params.misalignment,
                                    params.background_error,
                                )?;
                                draw_binomial(&mut rng, d, e_i)
                            } else {
                                0
                            };
                            det += d;
                            err += m;
                            if i == 1 {
                                truth.detections[setting.index()][pol.index()] = d as f64;
                                truth.errors[setting.index()][pol.index()] = m as f64;
                            }
                        }
                        remaining -= k;
                        cum_prev += p_i;
                        i += 1;
                    }
                    CellCounts {
                        pulses: pulses as f64,
                        detections: det as f64,
                        errors: err as f64,
                    }
                }
            };
            counts.set(setting, pol, cell);
        }
    }
    Ok(SimulationRun {
        seed,
        fidelity,
        counts,
        truth: (fidelity == Fidelity::PhotonResolved).then_some(truth),
    })
}

/// Per-cell empirical gain and error fraction, flagging cells without
/// detections instead of dividing by zero.
pub fn empirical_rates(counts: &CountTable) -> EmpiricalRates {
    let mut rates = EmpiricalRates::default();
    for setting in IntensitySetting::ALL {
        for pol in Polarization::ALL {
            let cell = counts.get(setting, pol);
            rates.cells[setting.index()][pol.index()] = EmpiricalCell {
                gain: if cell.pulses > 0.0 { cell.detections / cell.pulses } else { 0.0 },
                qber: (cell.detections > 0.0).then(|| cell.errors / cell.detections),
            };
        }
    }
    rates
}

/// Outcome of checking the finite-key estimators against one photon-resolved
/// run.
#[derive(Clone, Debug)]
pub struct BoundCheck {
    pub seed: u64,
    /// Estimated lower bound on kept key-basis single-photon events.
    pub s1_lower: f64,
    /// True kept key-basis single-photon detections.
    pub s1_truth: f64,
    /// Estimated phase-error upper bound.
    pub e1_upper: Option<f64>,
    /// True phase-basis single-photon error rate, when defined.
    pub e1_truth: Option<f64>,
    /// Every dominance relation held: total and per-cell single-photon floors
    /// below truth, phase-error ceiling above truth.
    pub dominance_ok: bool,
    /// Concentration indicators satisfied (detections and errors per cell).
    pub covered: u32,
    /// Total concentration indicators checked.
    pub indicators: u32,
    /// Full finite-key result computed from the sampled counts.
    pub result: FiniteKeyResult,
}

/// Runs one photon-resolved session and checks that the estimators bound the
/// sampled truth: the single-photon floor (in total and per key-basis cell)
/// must not exceed the true single-photon detections, the phase-error ceiling
/// must not undercut the true single-photon error rate, and each cell's
/// Hoeffding interval around the observed counts should cover the expectation.
pub fn check_bounds(
    params: &SystemParams,
    source: &SourceModel,
    geometry: &ChannelGeometry,
    fk: &FiniteKeyParams,
    ec_inefficiency: f64,
    seed: u64,
) -> Result<BoundCheck> {
    let run = simulate_counts(params, source, geometry, fk, seed, Fidelity::PhotonResolved)?;
    let truth = run.truth.as_ref().expect("photon-resolved run carries truth");
    let counts = &run.counts;
    let result = finite_key_from_counts(counts, params, source, fk, ec_inefficiency)?;
    let s1_lower = single_photon_events_lower(counts, source, fk)?;
    let e1_upper = phase_error_upper(counts, source, params, fk)?;

    let sig = IntensitySetting::Signal;
    let s1_truth = truth.detections_at(sig, Polarization::H) + truth.detections_at(sig, Polarization::V);
    let mu_h = source.intensity(sig, Polarization::H);
    let mu_v = source.intensity(sig, Polarization::V);
    let m = single_photon_min_term(mu_h, mu_v, fk.p_select);
    let est_h = m
        * y1_lower_worst(counts, source, Polarization::H, fk.eps_sec)?
        * counts.get(sig, Polarization::H).pulses;
    let est_v = (m / fk.p_select)
        * y1_lower_worst(counts, source, Polarization::V, fk.eps_sec)?
        * counts.get(sig, Polarization::V).pulses;
    let per_cell_ok = est_h <= truth.detections_at(sig, Polarization::H)
        && est_v <= truth.detections_at(sig, Polarization::V);

    let phase_det =
        truth.detections_at(sig, Polarization::D) + truth.detections_at(sig, Polarization::A);
    let phase_err = truth.errors_at(sig, Polarization::D) + truth.errors_at(sig, Polarization::A);
    let e1_truth = (phase_det > 0.0).then(|| phase_err / phase_det);
    let phase_ok = match (e1_upper, e1_truth) {
        (Some(up), Some(truth_rate)) => up >= truth_rate,
        _ => true,
    };
    let dominance_ok = s1_lower <= s1_truth && per_cell_ok && phase_ok;

    let alloc = allocate_pulses(fk)?;
    let expected = CountTable::expected(params, source, geometry, &alloc)?;
    let (mut covered, mut indicators) = (0u32, 0u32);
    for setting in IntensitySetting::ALL {
        for pol in Polarization::ALL {
            let observed = counts.get(setting, pol);
            let mean = expected.get(setting, pol);
            let det_iv = expected_interval(observed.detections, observed.pulses, fk.eps_sec);
            indicators += 1;
            if det_iv.0 <= mean.detections && mean.detections <= det_iv.1 {
                covered += 1;
            }
            let err_iv = expected_interval(observed.errors, observed.pulses, fk.eps_sec);
            indicators += 1;
            if err_iv.0 <= mean.errors && mean.errors <= err_iv.1 {
                covered += 1;
            }
        }
    }

    Ok(BoundCheck {
        seed,
        s1_lower,
        s1_truth,
        e1_upper,
        e1_truth,
        dominance_ok,
        covered,
        indicators,
        result,
    })
}
