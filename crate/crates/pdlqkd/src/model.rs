//! Forward detection model for a decoy-state BB84 link.
//!
//! The transmitter is described by a per-polarization intensity for each
//! intensity setting, the channel by its length and attenuation, and the
//! receiver by a lumped transmittance, a background yield, and a misalignment
//! error. Everything downstream (key rates, decoy bounds, finite-key
//! estimators, simulation) consumes the gains and error rates produced here.

use crate::{Error, Result};

/// Number of photon-number terms summed when cross-checking series identities.
const SERIES_TERMS: u32 = 200;

/// BB84 polarization states. `H`/`V` span the key basis, `D`/`A` the phase
/// basis. In a transmitter with polarization-dependent loss, `H` and `D` are
/// the attenuated states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
    D,
    A,
}

impl Polarization {
    pub const ALL: [Polarization; 4] = [
        Polarization::H,
        Polarization::V,
        Polarization::D,
        Polarization::A,
    ];

    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
            Polarization::D => 2,
            Polarization::A => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Polarization::H => "H",
            Polarization::V => "V",
            Polarization::D => "D",
            Polarization::A => "A",
        }
    }
}

/// Intensity settings of the two-decoy protocol: signal, weak decoy, vacuum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntensitySetting {
    Signal,
    Decoy,
    Vacuum,
}

impl IntensitySetting {
    pub const ALL: [IntensitySetting; 3] = [
        IntensitySetting::Signal,
        IntensitySetting::Decoy,
        IntensitySetting::Vacuum,
    ];

    pub fn index(self) -> usize {
        match self {
            IntensitySetting::Signal => 0,
            IntensitySetting::Decoy => 1,
            IntensitySetting::Vacuum => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            IntensitySetting::Signal => "signal",
            IntensitySetting::Decoy => "decoy",
            IntensitySetting::Vacuum => "vacuum",
        }
    }
}

/// Receiver and channel parameters.
#[derive(Clone, Copy, Debug)]
pub struct SystemParams {
    /// Misalignment error probability for a detected signal photon.
    pub misalignment: f64,
    /// Background (dark count) yield per pulse.
    pub background_yield: f64,
    /// Receiver transmittance including detector efficiency.
    pub receiver_efficiency: f64,
    /// Fiber attenuation in dB/km.
    pub attenuation_db_per_km: f64,
    /// Error rate of a background event.
    pub background_error: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            misalignment: 0.015,
            background_yield: 2e-5,
            receiver_efficiency: 0.2,
            attenuation_db_per_km: 0.2,
            background_error: 0.5,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |name: &str, v: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")));
            }
            Ok(())
        };
        in_unit("misalignment", self.misalignment)?;
        in_unit("background_yield", self.background_yield)?;
        in_unit("receiver_efficiency", self.receiver_efficiency)?;
        in_unit("background_error", self.background_error)?;
        if !self.attenuation_db_per_km.is_finite() || self.attenuation_db_per_km < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "attenuation_db_per_km must be nonnegative, got {}",
                self.attenuation_db_per_km
            )));
        }
        Ok(())
    }
}

/// Channel geometry: only the fiber length matters for this model.
#[derive(Clone, Copy, Debug)]
pub struct ChannelGeometry {
    pub distance_km: f64,
}

impl ChannelGeometry {
    pub fn validate(&self) -> Result<()> {
        if !self.distance_km.is_finite() || self.distance_km < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "distance_km must be nonnegative, got {}",
                self.distance_km
            )));
        }
        Ok(())
    }
}

/// Mean photon number emitted for every (intensity setting, polarization) pair.
///
/// The general map allows arbitrary per-state intensities; the common case of
/// a fixed polarization-dependent loss is built by [`SourceModel::symmetric_pdl`],
/// which attenuates `H` and `D` by the loss factor while `V` and `A` keep the
/// nominal intensities.
#[derive(Clone, Debug)]
pub struct SourceModel {
    cells: [[f64; 4]; 3],
}

impl SourceModel {
    /// Builds a source from an explicit intensity map indexed as
    /// `[setting][polarization]` in the order of [`IntensitySetting::ALL`] and
    /// [`Polarization::ALL`].
    pub fn from_map(cells: [[f64; 4]; 3]) -> Result<Self> {
        for (s, row) in cells.iter().enumerate() {
            for (p, &mu) in row.iter().enumerate() {
                if !mu.is_finite() || mu < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "intensity for ({}, {}) must be nonnegative, got {mu}",
                        IntensitySetting::ALL[s].label(),
                        Polarization::ALL[p].label()
                    )));
                }
            }
        }
        Ok(SourceModel { cells })
    }

    /// Source with a polarization-dependent loss of `pdl_db` decibels applied
    /// to the `H` and `D` states of both the signal and decoy settings; the
    /// vacuum setting emits nothing.
    pub fn symmetric_pdl(mu_signal: f64, mu_decoy: f64, pdl_db: f64) -> Result<Self> {
        if !mu_signal.is_finite() || mu_signal < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mu_signal must be nonnegative, got {mu_signal}"
            )));
        }
        if !mu_decoy.is_finite() || mu_decoy < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mu_decoy must be nonnegative, got {mu_decoy}"
            )));
        }
        if !pdl_db.is_finite() || pdl_db < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "pdl_db must be nonnegative, got {pdl_db}"
            )));
        }
        let loss = pdl_loss_factor(pdl_db);
        let row = |mu: f64| [loss * mu, mu, loss * mu, mu];
        SourceModel::from_map([row(mu_signal), row(mu_decoy), [0.0; 4]])
    }

    pub fn intensity(&self, setting: IntensitySetting, pol: Polarization) -> f64 {
        self.cells[setting.index()][pol.index()]
    }

    /// Nominal (unattenuated) signal intensity, read from the `V` state.
    pub fn signal_intensity(&self) -> f64 {
        self.intensity(IntensitySetting::Signal, Polarization::V)
    }

    /// Nominal (unattenuated) decoy intensity, read from the `V` state.
    pub fn decoy_intensity(&self) -> f64 {
        self.intensity(IntensitySetting::Decoy, Polarization::V)
    }

    /// Linear loss ratio between the attenuated and nominal signal states.
    pub fn loss_ratio(&self) -> Result<f64> {
        let nominal = self.signal_intensity();
        if nominal <= 0.0 {
            return Err(Error::Undefined(
                "loss ratio needs a positive nominal signal intensity".into(),
            ));
        }
        Ok(self.intensity(IntensitySetting::Signal, Polarization::H) / nominal)
    }

    /// Polarization-dependent loss in decibels implied by the signal row.
    pub fn pdl_db(&self) -> Result<f64> {
        let loss = self.loss_ratio()?;
        if loss <= 0.0 {
            return Err(Error::Undefined("loss ratio must be positive".into()));
        }
        Ok(-10.0 * loss.log10())
    }
}

/// Gain and error rate observed for one (setting, polarization) cell.
#[derive(Clone, Copy, Debug, Default)]
pub struct Observable {
    /// Detection probability per pulse.
    pub gain: f64,
    /// Error rate among detections.
    pub qber: f64,
}

/// The 3-by-4 table of observables, one cell per intensity setting and
/// polarization.
#[derive(Clone, Debug, Default)]
pub struct ObservableTable {
    cells: [[Observable; 4]; 3],
}

impl ObservableTable {
    pub fn get(&self, setting: IntensitySetting, pol: Polarization) -> Observable {
        self.cells[setting.index()][pol.index()]
    }

    pub fn set(&mut self, setting: IntensitySetting, pol: Polarization, obs: Observable) {
        self.cells[setting.index()][pol.index()] = obs;
    }
}

/// Refractive index and absorption shift of a silicon waveguide under carrier
/// injection. Returns `(delta_n, delta_alpha_per_cm)` for electron and hole
/// density changes in cm^-3; both densities must be nonnegative.
pub fn plasma_dispersion_shift(delta_n_e: f64, delta_n_h: f64) -> Result<(f64, f64)> {
    if !delta_n_e.is_finite() || delta_n_e < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "electron density change must be nonnegative, got {delta_n_e}"
        )));
    }
    if !delta_n_h.is_finite() || delta_n_h < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "hole density change must be nonnegative, got {delta_n_h}"
        )));
    }
    let delta_n = -(8.8e-22 * delta_n_e + 8.5e-18 * delta_n_h.powf(0.8));
    let delta_alpha = 8.5e-18 * delta_n_e + 6.0e-18 * delta_n_h;
    Ok((delta_n, delta_alpha))
}

/// Probability that a phase-randomized coherent pulse of mean photon number
/// `mu >= 0` contains exactly `i` photons.
pub fn poisson_photon_pmf(mu: f64, i: u32) -> f64 {
    debug_assert!(mu >= 0.0, "mean photon number must be nonnegative");
    if mu == 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    let mut p = (-mu).exp();
    for k in 1..=i {
        p *= mu / f64::from(k);
    }
    p
}

/// Linear transmission factor of a polarization-dependent loss of `pdl_db >= 0`
/// decibels.
pub fn pdl_loss_factor(pdl_db: f64) -> f64 {
    debug_assert!(pdl_db >= 0.0, "loss must be nonnegative in dB");
    10f64.powf(-pdl_db / 10.0)
}

/// Overall transmittance from source to detection: receiver efficiency times
/// fiber transmission.
pub fn system_transmittance(params: &SystemParams, geometry: &ChannelGeometry) -> f64 {
    params.receiver_efficiency
        * 10f64.powf(-params.attenuation_db_per_km * geometry.distance_km / 10.0)
}

/// Yield of an `n`-photon pulse: the probability that at least one of the
/// photons or the background triggers a detection.
pub fn yield_n(y0: f64, eta: f64, n: u32) -> f64 {
    1.0 - (1.0 - y0) * (1.0 - eta).powi(n as i32)
}

/// Overall gain of a pulse with mean photon number `mu`.
pub fn gain(mu: f64, y0: f64, eta: f64) -> f64 {
    1.0 - (1.0 - y0) * (-mu * eta).exp()
}

/// Error rate of an `n`-photon detection with yield `y_n`, combining the
/// background contribution with misalignment.
pub fn error_n(y0: f64, y_n: f64, e_d: f64, e0: f64) -> Result<f64> {
    if y_n <= 0.0 {
        return Err(Error::Undefined(format!(
            "error rate needs a positive yield, got {y_n}"
        )));
    }
    Ok((y0 * e0 + (y_n - y0) * e_d) / y_n)
}

/// Error rate among all detections of a pulse with mean photon number `mu`.
pub fn qber(mu: f64, y0: f64, eta: f64, e_d: f64, e0: f64) -> Result<f64> {
    let q = gain(mu, y0, eta);
    if q <= 0.0 {
        return Err(Error::Undefined(format!(
            "QBER needs a positive gain, got {q}"
        )));
    }
    Ok((y0 * (e0 - e_d) + e_d * (1.0 - (1.0 - y0) * (-mu * eta).exp())) / q)
}

/// Expected gain and QBER for every (setting, polarization) cell of `source`
/// over the given channel.
pub fn forward_observables(
    params: &SystemParams,
    source: &SourceModel,
    geometry: &ChannelGeometry,
) -> Result<ObservableTable> {
    params.validate()?;
    geometry.validate()?;
    let eta = system_transmittance(params, geometry);
    let mut table = ObservableTable::default();
    for setting in IntensitySetting::ALL {
        for pol in Polarization::ALL {
            let mu = source.intensity(setting, pol);
            let g = gain(mu, params.background_yield, eta);
            let e = qber(
                mu,
                params.background_yield,
                eta,
                params.misalignment,
                params.background_error,
            )?;
            table.set(setting, pol, Observable { gain: g, qber: e });
        }
    }
    Ok(table)
}

/// Checks the closure identity `Q(mu) * E(mu) == sum_i pmf(mu, i) Y_i e_i` by
/// direct summation, returning the absolute difference. Terms with
/// `pmf < 1e-18` are truncated.
pub fn gain_error_series_gap(mu: f64, params: &SystemParams, eta: f64) -> Result<f64> {
    let y0 = params.background_yield;
    let mut series = 0.0;
    for i in 0..SERIES_TERMS {
        let p = poisson_photon_pmf(mu, i);
        if p < 1e-18 && f64::from(i) > mu {
            break;
        }
        let y_i = yield_n(y0, eta, i);
        if y_i > 0.0 {
            series += p * y_i * error_n(y0, y_i, params.misalignment, params.background_error)?;
        }
    }
    let closed = gain(mu, y0, eta) * qber(mu, y0, eta, params.misalignment, params.background_error)?;
    Ok((closed - series).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn eta_80() -> f64 {
        system_transmittance(&SystemParams::default(), &ChannelGeometry { distance_km: 80.0 })
    }

    #[test]
    fn plasma_shift_matches_reference_values() {
        let (dn, da) = plasma_dispersion_shift(5e17, 0.0).unwrap();
        assert_relative_eq!(dn, -4.4e-4, max_relative = 1e-6);
        assert_relative_eq!(da, 4.25, max_relative = 1e-6);
        let (dn, da) = plasma_dispersion_shift(0.0, 5e17).unwrap();
        assert_relative_eq!(dn, -1.2262949200211337e-3, max_relative = 1e-6);
        assert_relative_eq!(da, 3.0, max_relative = 1e-6);
        assert_eq!(plasma_dispersion_shift(0.0, 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn plasma_shift_rejects_negative_densities() {
        assert!(plasma_dispersion_shift(-1.0, 0.0).is_err());
        assert!(plasma_dispersion_shift(0.0, -1.0).is_err());
    }

    #[test]
    fn photon_pmf_matches_reference_values() {
        assert_eq!(poisson_photon_pmf(0.0, 0), 1.0);
        assert_eq!(poisson_photon_pmf(0.0, 3), 0.0);
        assert_relative_eq!(poisson_photon_pmf(0.5, 1), 0.3032653298563167, max_relative = 1e-6);
    }

    #[test]
    fn loss_factor_matches_reference_values() {
        assert_eq!(pdl_loss_factor(0.0), 1.0);
        assert_relative_eq!(pdl_loss_factor(10.0), 0.1, max_relative = 1e-12);
        assert_relative_eq!(pdl_loss_factor(1.6), 0.6918309709189365, max_relative = 1e-6);
    }

    #[test]
    fn transmittance_matches_reference_values() {
        let params = SystemParams { receiver_efficiency: 1.0, ..SystemParams::default() };
        let eta = system_transmittance(&params, &ChannelGeometry { distance_km: 50.0 });
        assert_relative_eq!(eta, 0.1, max_relative = 1e-12);
        assert_relative_eq!(eta_80(), 0.005023772863019159, max_relative = 1e-6);
        let zero = system_transmittance(&SystemParams::default(), &ChannelGeometry { distance_km: 0.0 });
        assert_eq!(zero, 0.2);
    }

    #[test]
    fn yields_gains_and_errors_match_reference_values() {
        let eta = eta_80();
        let p = SystemParams::default();
        assert_relative_eq!(yield_n(p.background_yield, eta, 1), 0.0050436723875618705, max_relative = 1e-6);
        assert_relative_eq!(yield_n(p.background_yield, eta, 0), p.background_yield, epsilon = 1e-16);
        let y1 = yield_n(p.background_yield, eta, 1);
        let e1 = error_n(p.background_yield, y1, p.misalignment, p.background_error).unwrap();
        assert_relative_eq!(e1, 0.016923201836804673, max_relative = 1e-6);
        assert_relative_eq!(gain(0.5, p.background_yield, eta), 0.0025286841099321222, max_relative = 1e-6);
        assert_relative_eq!(
            qber(0.5, p.background_yield, eta, p.misalignment, p.background_error).unwrap(),
            0.018835987248031694,
            max_relative = 1e-6
        );
        assert_relative_eq!(gain(0.05, p.background_yield, eta), 0.00027115207478300984, max_relative = 1e-6);
    }

    #[test]
    fn degenerate_rates_reduce_to_background() {
        let eta = eta_80();
        let p = SystemParams::default();
        assert_relative_eq!(gain(0.0, p.background_yield, eta), p.background_yield, epsilon = 1e-16);
        assert_relative_eq!(
            qber(0.0, p.background_yield, eta, p.misalignment, p.background_error).unwrap(),
            p.background_error,
            max_relative = 1e-12
        );
        let e = error_n(p.background_yield, p.background_yield, p.misalignment, p.background_error).unwrap();
        assert_relative_eq!(e, p.background_error, max_relative = 1e-12);
        assert!(error_n(0.0, 0.0, 0.015, 0.5).is_err());
        assert!(qber(0.0, 0.0, 0.0, 0.015, 0.5).is_err());
    }

    #[test]
    fn series_identity_holds() {
        let p = SystemParams::default();
        for mu in [0.1, 0.5, 1.0, 2.0] {
            let gap = gain_error_series_gap(mu, &p, eta_80()).unwrap();
            assert!(gap < 1e-12, "series gap {gap} at mu={mu}");
        }
    }

    #[test]
    fn symmetric_source_scales_attenuated_states() {
        let source = SourceModel::symmetric_pdl(0.7, 0.1, 10.0).unwrap();
        assert_relative_eq!(source.intensity(IntensitySetting::Signal, Polarization::H), 0.07, max_relative = 1e-12);
        assert_eq!(source.intensity(IntensitySetting::Signal, Polarization::V), 0.7);
        assert_relative_eq!(source.intensity(IntensitySetting::Decoy, Polarization::D), 0.01, max_relative = 1e-12);
        assert_eq!(source.intensity(IntensitySetting::Vacuum, Polarization::A), 0.0);
        assert_relative_eq!(source.loss_ratio().unwrap(), 0.1, max_relative = 1e-12);
        assert_relative_eq!(source.pdl_db().unwrap(), 10.0, max_relative = 1e-12);
        assert!(SourceModel::symmetric_pdl(-0.1, 0.0, 0.0).is_err());
        assert!(SourceModel::symmetric_pdl(0.7, 0.1, -1.0).is_err());
    }

    #[test]
    fn forward_table_is_polarization_independent_without_pdl() {
        let source = SourceModel::symmetric_pdl(0.7, 0.1, 0.0).unwrap();
        let table = forward_observables(
            &SystemParams::default(),
            &source,
            &ChannelGeometry { distance_km: 80.0 },
        )
        .unwrap();
        for setting in IntensitySetting::ALL {
            let first = table.get(setting, Polarization::H);
            for pol in Polarization::ALL {
                let cell = table.get(setting, pol);
                assert_eq!(cell.gain, first.gain);
                assert_eq!(cell.qber, first.qber);
            }
        }
    }

    #[test]
    fn forward_table_attenuated_cell_matches_reference_value() {
        let source = SourceModel::symmetric_pdl(0.5, 0.1, 10.0).unwrap();
        let table = forward_observables(
            &SystemParams::default(),
            &source,
            &ChannelGeometry { distance_km: 80.0 },
        )
        .unwrap();
        let cell = table.get(IntensitySetting::Signal, Polarization::H);
        assert_relative_eq!(cell.gain, 0.00027115207478300984, max_relative = 1e-6);
        let vacuum = table.get(IntensitySetting::Vacuum, Polarization::V);
        assert_relative_eq!(vacuum.gain, 2e-5, max_relative = 1e-10);
        assert_relative_eq!(vacuum.qber, 0.5, max_relative = 1e-10);
    }

    proptest! {
        #[test]
        fn pmf_sums_to_one(mu in 0.0f64..10.0) {
            let total: f64 = (0..200).map(|i| poisson_photon_pmf(mu, i)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn gain_increases_with_intensity(mu in 0.0f64..3.0, d in 0.0f64..150.0) {
            let p = SystemParams::default();
            let eta = system_transmittance(&p, &ChannelGeometry { distance_km: d });
            prop_assert!(gain(mu + 0.1, p.background_yield, eta) >= gain(mu, p.background_yield, eta));
        }

        #[test]
        fn qber_lies_between_misalignment_and_background(mu in 0.0f64..3.0, d in 0.0f64..150.0) {
            let p = SystemParams::default();
            let eta = system_transmittance(&p, &ChannelGeometry { distance_km: d });
            let e = qber(mu, p.background_yield, eta, p.misalignment, p.background_error).unwrap();
            prop_assert!(e >= p.misalignment - 1e-12 && e <= p.background_error + 1e-12);
        }

        #[test]
        fn yield_increases_with_photon_number(n in 0u32..20, d in 0.0f64..150.0) {
            let p = SystemParams::default();
            let eta = system_transmittance(&p, &ChannelGeometry { distance_km: d });
            prop_assert!(yield_n(p.background_yield, eta, n + 1) >= yield_n(p.background_yield, eta, n));
        }
    }
}
