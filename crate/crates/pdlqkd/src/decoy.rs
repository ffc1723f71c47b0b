//! Two-decoy single-photon bounds evaluated per polarization.
//!
//! With polarization-dependent loss every polarization runs its own decoy
//! protocol: the attenuated states emit weaker signal and decoy pulses, so
//! their bounds must be derived from their own intensities and observables.
//! The per-polarization bounds are then combined into the averaged key-basis
//! yield and the worst-case phase error that enter the post-selected rate.

use crate::keyrate::{key_rate, KeyRateResult, RateInputs};
use crate::model::{
    forward_observables, ChannelGeometry, IntensitySetting,
    ObservableTable, Polarization, SourceModel, SystemParams,
};
use crate::{Error, Result};

/// Single-photon bounds for one polarization.
#[derive(Clone, Copy, Debug)]
pub struct PolarizationBounds {
    /// Lower bound on the background yield.
    pub y0_low: f64,
    /// Lower bound on the single-photon yield.
    pub y1_low: f64,
    /// Upper bound on the single-photon error gain `e1 * Y1`.
    pub e1y1_up: f64,
}

/// Combined decoy bounds feeding the key-rate formula.
#[derive(Clone, Debug)]
pub struct DecoyBounds {
    /// Per-polarization bounds indexed by [`Polarization::index`].
    pub per_polarization: [PolarizationBounds; 4],
    /// Averaged key-basis single-photon yield lower bound.
    pub y1_combined: f64,
    /// Phase-basis single-photon error upper bound; `None` when both
    /// phase-basis yield bounds vanish and the error is unbounded.
    pub e1_phase_up: Option<f64>,
}

/// Background-yield lower bound read off the vacuum setting of `pol`.
pub fn y0_lower(obs: &ObservableTable, pol: Polarization) -> f64 {
    obs.get(IntensitySetting::Vacuum, pol).gain
}

/// Single-photon yield lower bound from the signal gain `q_s`, decoy gain
/// `q_v`, and background bound `y0_low`, clamped to `[0, 1]`. Requires
/// `0 < mu_v < mu_s`.
pub fn y1_lower(q_s: f64, q_v: f64, y0_low: f64, mu_s: f64, mu_v: f64) -> Result<f64> {
    if !(mu_v > 0.0 && mu_v < mu_s) {
        return Err(Error::InvalidParameter(format!(
            "decoy intensity must satisfy 0 < mu_v < mu_s, got mu_v={mu_v}, mu_s={mu_s}"
        )));
    }
    let value = (mu_s / (mu_s * mu_v - mu_v * mu_v))
        * (q_v * mu_v.exp()
            - q_s * mu_s.exp() * (mu_v * mu_v) / (mu_s * mu_s)
            - ((mu_s * mu_s - mu_v * mu_v) / (mu_s * mu_s)) * y0_low);
    Ok(value.clamp(0.0, 1.0))
}

/// Upper bound on the single-photon error gain from the decoy error gain,
/// clamped to `[0, 1]`. Requires `mu_v > 0`.
pub fn e1y1_upper(q_v: f64, e_v: f64, y0_low: f64, e0: f64, mu_v: f64) -> Result<f64> {
    if !(mu_v > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "decoy intensity must be positive, got {mu_v}"
        )));
    }
    Ok(((e_v * q_v * mu_v.exp() - e0 * y0_low) / mu_v).clamp(0.0, 1.0))
}

/// Decoy bounds for one polarization, using that polarization's own signal and
/// decoy intensities.
pub fn polarization_bounds(
    params: &SystemParams,
    source: &SourceModel,
    obs: &ObservableTable,
    pol: Polarization,
) -> Result<PolarizationBounds> {
    let mu_s = source.intensity(IntensitySetting::Signal, pol);
    let mu_v = source.intensity(IntensitySetting::Decoy, pol);
    let y0_low = y0_lower(obs, pol);
    let q_s = obs.get(IntensitySetting::Signal, pol).gain;
    let decoy = obs.get(IntensitySetting::Decoy, pol);
    Ok(PolarizationBounds {
        y0_low,
        y1_low: y1_lower(q_s, decoy.gain, y0_low, mu_s, mu_v)?,
        e1y1_up: e1y1_upper(decoy.gain, decoy.qber, y0_low, params.background_error, mu_v)?,
    })
}

/// Combines per-polarization bounds into the averaged key-basis yield and the
/// phase-error upper bound.
pub fn combine_bounds(per_polarization: [PolarizationBounds; 4]) -> DecoyBounds {
    let (h, v, d, a) = (
        Polarization::H.index(),
        Polarization::V.index(),
        Polarization::D.index(),
        Polarization::A.index(),
    );
    let y1_combined = 0.5 * (per_polarization[h].y1_low + per_polarization[v].y1_low);
    let phase_yield = per_polarization[d].y1_low + per_polarization[a].y1_low;
    let e1_phase_up = if phase_yield > 0.0 {
        Some((per_polarization[d].e1y1_up + per_polarization[a].e1y1_up) / phase_yield)
    } else {
        None
    };
    DecoyBounds { per_polarization, y1_combined, e1_phase_up }
}

/// Full decoy-bound pipeline for a scenario.
pub fn decoy_bounds(
    params: &SystemParams,
    source: &SourceModel,
    geometry: &ChannelGeometry,
) -> Result<DecoyBounds> {
    let obs = forward_observables(params, source, geometry)?;
    let mut per = [PolarizationBounds { y0_low: 0.0, y1_low: 0.0, e1y1_up: 0.0 }; 4];
    for pol in Polarization::ALL {
        per[pol.index()] = polarization_bounds(params, source, &obs, pol)?;
    }
    Ok(combine_bounds(per))
}

/// Relative deviation of a yield lower bound from the exact yield.
pub fn deviation_beta(y1_true: f64, y1_low: f64) -> f64 {
    debug_assert!(y1_true > 0.0, "exact yield must be positive");
    (y1_true - y1_low) / y1_true
}

/// Post-selected key rate with decoy-bounded single-photon statistics.
///
/// The rate uses the combined yield lower bound and phase-error upper bound in
/// place of the exact values. An unbounded phase error yields rate zero with
/// the trivial error rate of one half reported.
pub fn key_rate_two_decoy(
    params: &SystemParams,
    source: &SourceModel,
    geometry: &ChannelGeometry,
    inputs: &RateInputs,
    p_select: f64,
) -> Result<KeyRateResult> {
    inputs.validate()?;
    if !(p_select > 0.0 && p_select <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "p_select must lie in (0, 1], got {p_select}"
        )));
    }
    let obs = forward_observables(params, source, geometry)?;
    let bounds = decoy_bounds(params, source, geometry)?;
    let mu_h = source.intensity(IntensitySetting::Signal, Polarization::H);
    let mu_v = source.intensity(IntensitySetting::Signal, Polarization::V);
    let q1 = crate::keyrate::single_photon_min_term(mu_h, mu_v, p_select) * bounds.y1_combined;
    let sig_h = obs.get(IntensitySetting::Signal, Polarization::H);
    let sig_v = obs.get(IntensitySetting::Signal, Polarization::V);
    let qs = 0.5 * sig_h.gain + 0.5 * p_select * sig_v.gain;
    let qs_es = 0.5 * sig_h.gain * sig_h.qber + 0.5 * p_select * sig_v.gain * sig_v.qber;
    let subst = crate::keyrate::SubstitutedQuantities {
        q1,
        y1: bounds.y1_combined,
        e1_phase: bounds.e1_phase_up.map_or(0.5, |e| e.min(0.5)),
        qs,
        qs_es,
        applied_p: p_select,
    };
    let mut result = key_rate(inputs, &subst);
    if bounds.e1_phase_up.is_none() {
        result.rate = 0.0;
    }
    Ok(result)
}
