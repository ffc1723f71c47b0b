//! Asymptotic secret key rates with the post-selection countermeasure.
//!
//! With polarization-dependent loss the attenuated basis states arrive less
//! often, which both skews the sifted statistics and leaks basis information.
//! Post-selection discards a fraction of the detections on the stronger
//! polarization so that the kept statistics look balanced again: the receiver
//! keeps a `V` (or `A`) detection only with probability `P`. All quantities
//! entering the rate formula are rewritten in terms of the kept events.

use crate::model::{
    forward_observables, system_transmittance, yield_n, ChannelGeometry, IntensitySetting,
    Observable, ObservableTable, Polarization, SourceModel, SystemParams,
};
use crate::{Error, Result};

/// Default sifting efficiency: half the detections survive basis reconciliation.
pub const DEFAULT_PROTOCOL_EFFICIENCY: f64 = 0.5;

/// Default error-correction inefficiency relative to the Shannon limit.
pub const DEFAULT_EC_INEFFICIENCY: f64 = 1.16;

/// Bisection bracket and tolerance for the optimal-intensity solver.
const MU_BRACKET: (f64, f64) = (1e-6, 5.0);
const MU_INTERVAL_TOL: f64 = 1e-12;

/// Protocol-level inputs of the rate formula.
#[derive(Clone, Copy, Debug)]
pub struct RateInputs {
    /// Sifting efficiency `q`: fraction of detections kept after basis
    /// reconciliation.
    pub protocol_efficiency: f64,
    /// Error-correction inefficiency `f >= 1`.
    pub ec_inefficiency: f64,
}

impl Default for RateInputs {
    fn default() -> Self {
        RateInputs {
            protocol_efficiency: DEFAULT_PROTOCOL_EFFICIENCY,
            ec_inefficiency: DEFAULT_EC_INEFFICIENCY,
        }
    }
}

impl RateInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.protocol_efficiency > 0.0 && self.protocol_efficiency <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "protocol_efficiency must lie in (0, 1], got {}",
                self.protocol_efficiency
            )));
        }
        if !(self.ec_inefficiency >= 1.0 && self.ec_inefficiency.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ec_inefficiency must be at least 1, got {}",
                self.ec_inefficiency
            )));
        }
        Ok(())
    }
}

/// Post-selected quantities entering the rate formula.
#[derive(Clone, Copy, Debug)]
pub struct SubstitutedQuantities {
    /// Post-selected single-photon gain.
    pub q1: f64,
    /// Averaged key-basis single-photon yield.
    pub y1: f64,
    /// Phase-basis single-photon error rate.
    pub e1_phase: f64,
    /// Post-selected signal gain.
    pub qs: f64,
    /// Post-selected signal error gain.
    pub qs_es: f64,
    /// Post-selection probability the quantities were built with.
    pub applied_p: f64,
}

/// Secret key rate and the intermediate quantities it was computed from.
#[derive(Clone, Copy, Debug)]
pub struct KeyRateResult {
    /// Secret bits per emitted pulse.
    pub rate: f64,
    pub q1: f64,
    pub qs: f64,
    /// Error rate of the post-selected signal detections.
    pub es: f64,
    pub e1_phase: f64,
    pub y1: f64,
    pub applied_p: f64,
}

/// Binary Shannon entropy; `x` must lie in `[0, 1]`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!(
            "binary entropy argument must lie in [0, 1], got {x}"
        )));
    }
    Ok(h2(x))
}

pub(crate) fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Builds the post-selected quantities from the forward observables, the
/// per-polarization single-photon yields and error rates, and the
/// post-selection probability `P` applied to the stronger (`V`, `A`) states.
///
/// Yields and errors are indexed by [`Polarization::index`]. Fails when both
/// phase-basis yields vanish, which leaves the phase error undefined.
pub fn substituted_quantities(
    source: &SourceModel,
    obs: &ObservableTable,
    y1: [f64; 4],
    e1: [f64; 4],
    p_select: f64,
) -> Result<SubstitutedQuantities> {
    if !(p_select > 0.0 && p_select <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "p_select must lie in (0, 1], got {p_select}"
        )));
    }
    let (h, v, d, a) = (
        Polarization::H.index(),
        Polarization::V.index(),
        Polarization::D.index(),
        Polarization::A.index(),
    );
    let phase_yield = y1[d] + y1[a];
    if phase_yield <= 0.0 {
        return Err(Error::Undefined(
            "phase error rate needs a positive combined phase-basis yield".into(),
        ));
    }
    let e1_phase = (y1[d] * e1[d] + y1[a] * e1[a]) / phase_yield;
    let mu_h = source.intensity(IntensitySetting::Signal, Polarization::H);
    let mu_v = source.intensity(IntensitySetting::Signal, Polarization::V);
    let y1_key = 0.5 * (y1[h] + y1[v]);
    let q1 = single_photon_min_term(mu_h, mu_v, p_select) * y1_key;
    let Observable { gain: q_h, qber: e_h } = obs.get(IntensitySetting::Signal, Polarization::H);
    let Observable { gain: q_v, qber: e_v } = obs.get(IntensitySetting::Signal, Polarization::V);
    let qs = 0.5 * q_h + 0.5 * p_select * q_v;
    let qs_es = 0.5 * q_h * e_h + 0.5 * p_select * q_v * e_v;
    Ok(SubstitutedQuantities { q1, y1: y1_key, e1_phase, qs, qs_es, applied_p: p_select })
}

/// Single-photon emission weight surviving post-selection: the smaller of the
/// attenuated-state emission probability and the kept fraction of the nominal
/// state's.
pub fn single_photon_min_term(mu_h: f64, mu_v: f64, p_select: f64) -> f64 {
    (mu_h * (-mu_h).exp()).min(p_select * mu_v * (-mu_v).exp())
}

/// Secret key rate from post-selected quantities. Nonnegative by construction;
/// a phase error above one half yields zero.
pub fn key_rate(inputs: &RateInputs, subst: &SubstitutedQuantities) -> KeyRateResult {
    let es = if subst.qs > 0.0 { subst.qs_es / subst.qs } else { 0.0 };
    let rate = if subst.qs > 0.0 {
        let phase = subst.e1_phase.clamp(0.0, 0.5);
        inputs.protocol_efficiency
            * (subst.q1 * (1.0 - h2(phase)) - subst.qs * inputs.ec_inefficiency * h2(es))
    } else {
        0.0
    };
    KeyRateResult {
        rate: rate.max(0.0),
        q1: subst.q1,
        qs: subst.qs,
        es,
        e1_phase: subst.e1_phase,
        y1: subst.y1,
        applied_p: subst.applied_p,
    }
}

/// Asymptotic key rate with exact single-photon statistics.
///
/// The channel acts identically on all polarizations, so the exact
/// single-photon yield and error rate are shared by the four states; loss
/// asymmetry enters only through the source intensities. When `p_select` is
/// `None` the heuristic post-selection probability for the source's loss
/// ratio is applied.
pub fn asymptotic_key_rate(
    params: &SystemParams,
    source: &SourceModel,
    geometry: &ChannelGeometry,
    inputs: &RateInputs,
    p_select: Option<f64>,
) -> Result<KeyRateResult> {
    inputs.validate()?;
    let obs = forward_observables(params, source, geometry)?;
    let eta = system_transmittance(params, geometry);
    let y1 = yield_n(params.background_yield, eta, 1);
    let e1 = crate::model::error_n(params.background_yield, y1, params.misalignment, params.background_error)?;
    let p = match p_select {
        Some(p) => p,
        None => heuristic_p_optimal(source.signal_intensity(), source.loss_ratio()?)?,
    };
    let subst = substituted_quantities(source, &obs, [y1; 4], [e1; 4], p)?;
    Ok(key_rate(inputs, &subst))
}

/// Closed-form near-optimal post-selection probability for nominal signal
/// intensity `mu_sv` and linear loss ratio `loss`, clamped to `(0, 1]`. It
/// equalizes the two arguments of the single-photon minimum whenever the
/// unclamped value is feasible.
pub fn heuristic_p_optimal(mu_sv: f64, loss: f64) -> Result<f64> {
    if !(loss > 0.0 && loss <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "loss ratio must lie in (0, 1], got {loss}"
        )));
    }
    if !(mu_sv >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mu_sv must be nonnegative, got {mu_sv}"
        )));
    }
    Ok((loss * ((1.0 - loss) * mu_sv).exp()).min(1.0))
}

/// Leading-order approximation of the post-selected key rate, linear in the
/// system transmittance. Useful for reasoning about the optimal intensity.
pub fn approx_key_rate(
    mu_s: f64,
    loss: f64,
    p_select: f64,
    eta_sys: f64,
    e_d: f64,
    f: f64,
) -> f64 {
    eta_sys * loss * mu_s * (-loss * mu_s).exp() * (1.0 - h2(e_d))
        - (0.5 * p_select * eta_sys * mu_s + 0.5 * eta_sys * loss * mu_s) * f * h2(e_d)
}

/// Stationarity residual of the approximate rate at signal intensity `mu_s`
/// when the heuristic post-selection probability is substituted. The optimal
/// intensity is the root of this function.
pub fn optimal_mu_residual(mu_s: f64, loss: f64, e_d: f64, f: f64) -> f64 {
    let hh = h2(e_d);
    let decay = (-loss * mu_s).exp();
    let grow = ((1.0 - loss) * mu_s).exp();
    (1.0 - hh) * (loss * decay - loss * loss * mu_s * decay)
        - 0.5 * f * hh * (loss + loss * grow + loss * mu_s * grow * (1.0 - loss))
}

/// Solves for the signal intensity maximizing the approximate post-selected
/// rate by bisection over `(1e-6, 5]`. Fails when the residual does not change
/// sign over the bracket.
pub fn solve_optimal_mu(loss: f64, e_d: f64, f: f64) -> Result<f64> {
    let (mut lo, mut hi) = MU_BRACKET;
    let mut f_lo = optimal_mu_residual(lo, loss, e_d, f);
    let f_hi = optimal_mu_residual(hi, loss, e_d, f);
    if f_lo * f_hi > 0.0 {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > MU_INTERVAL_TOL {
        let mid = 0.5 * (lo + hi);
        let f_mid = optimal_mu_residual(mid, loss, e_d, f);
        if f_lo * f_mid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
