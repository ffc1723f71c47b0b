//! Deterministic optimization of source parameters.
//!
//! A coarse grid scan is followed by halving refinement around the incumbent:
//! at each level the step shrinks by half and all offset combinations within
//! two steps per dimension are tried, clamped to the axis bounds. Ties are
//! broken toward smaller parameter values in the fixed dimension order, so the
//! result does not depend on evaluation order or thread count, and the coarse
//! scan can safely run in parallel.

use rayon::prelude::*;

use crate::decoy::key_rate_two_decoy;
use crate::finite::{finite_key_rate, FiniteKeyParams, FiniteKeyResult};
use crate::keyrate::{asymptotic_key_rate, heuristic_p_optimal, KeyRateResult, RateInputs};
use crate::model::{ChannelGeometry, SourceModel, SystemParams};
use crate::{Error, Result};

/// Inclusive arithmetic grid over one search dimension.
#[derive(Clone, Copy, Debug)]
pub struct GridAxis {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridAxis {
    fn count(&self) -> usize {
        ((self.stop - self.start) / self.step).round() as usize + 1
    }

    fn point(&self, index: usize) -> f64 {
        self.start + self.step * index as f64
    }
}

/// Which rate model the search optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizeMode {
    /// Exact single-photon statistics; free parameters `(mu_s, P)`.
    Asymptotic,
    /// Two-decoy bounded statistics; free parameters `(mu_s, mu_v)` with the
    /// heuristic post-selection probability.
    TwoDecoy,
    /// Finite-key analysis; free parameters `(mu_s, mu_v, p_signal, p_decoy)`
    /// with the heuristic post-selection probability.
    Finite,
}

/// Search configuration.
#[derive(Clone, Copy, Debug)]
pub struct SearchSpec {
    pub mode: OptimizeMode,
    /// Fixes the post-selection probability instead of searching or applying
    /// the heuristic; `Some(1.0)` disables post-selection.
    pub force_p: Option<f64>,
    /// Number of halving refinement levels after the coarse scan.
    pub refine_levels: u32,
}

impl SearchSpec {
    pub fn new(mode: OptimizeMode) -> Self {
        SearchSpec { mode, force_p: None, refine_levels: 6 }
    }

    pub fn without_post_selection(mode: OptimizeMode) -> Self {
        SearchSpec { mode, force_p: Some(1.0), refine_levels: 6 }
    }
}

/// Best parameters found by a search.
#[derive(Clone, Copy, Debug)]
pub struct OptimalParams {
    pub mu_signal: f64,
    pub mu_decoy: Option<f64>,
    pub p_select: f64,
    pub p_signal: Option<f64>,
    pub p_decoy: Option<f64>,
}

/// Mode-specific rate details at the optimum.
#[derive(Clone, Debug)]
pub enum RateDetail {
    Asymptotic(KeyRateResult),
    TwoDecoy(KeyRateResult),
    Finite(FiniteKeyResult),
}

/// Result of an optimization.
#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub params: OptimalParams,
    pub rate: f64,
    pub detail: RateDetail,
    /// True when the objective was zero over the entire scan; the reported
    /// parameters then sit at the smallest scanned values.
    pub exhausted: bool,
}

fn lex_smaller(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x < y;
        }
    }
    false
}

fn better(candidate: &(Vec<f64>, f64), incumbent: &(Vec<f64>, f64)) -> bool {
    if candidate.1 != incumbent.1 {
        return candidate.1 > incumbent.1;
    }
    lex_smaller(&candidate.0, &incumbent.0)
}

/// Coarse scan plus halving refinement. The objective returns the rate, or a
/// negative value for infeasible points.
fn grid_refine(
    dims: &[GridAxis],
    levels: u32,
    objective: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> (Vec<f64>, f64) {
    let counts: Vec<usize> = dims.iter().map(GridAxis::count).collect();
    let total: usize = counts.iter().product();
    let decode = |mut index: usize| -> Vec<f64> {
        let mut point = Vec::with_capacity(dims.len());
        for (dim, &count) in dims.iter().zip(&counts) {
            point.push(dim.point(index % count));
            index /= count;
        }
        point
    };
    let mut best = (0..total)
        .into_par_iter()
        .map(|index| {
            let point = decode(index);
            let rate = objective(&point);
            (point, rate)
        })
        .reduce(
            || (Vec::new(), f64::NEG_INFINITY),
            |a, b| if better(&b, &a) { b } else { a },
        );

    let mut steps: Vec<f64> = dims.iter().map(|d| d.step).collect();
    let offsets_per_dim = 5usize;
    for _ in 0..levels {
        for step in &mut steps {
            *step *= 0.5;
        }
        let combos = offsets_per_dim.pow(dims.len() as u32);
        for combo in 0..combos {
            let mut point = best.0.clone();
            let mut rest = combo;
            for (d, dim) in dims.iter().enumerate() {
                let offset = (rest % offsets_per_dim) as f64 - 2.0;
                rest /= offsets_per_dim;
                point[d] = (point[d] + offset * steps[d]).clamp(dim.start, dim.stop);
            }
            let rate = objective(&point);
            let candidate = (point, rate);
            if better(&candidate, &best) {
                best = candidate;
            }
        }
    }
    best
}

const MU_SIGNAL_AXIS: GridAxis = GridAxis { start: 0.05, stop: 2.5, step: 0.05 };
const MU_DECOY_AXIS: GridAxis = GridAxis { start: 0.01, stop: 0.3, step: 0.01 };
const P_SELECT_AXIS: GridAxis = GridAxis { start: 0.02, stop: 1.0, step: 0.02 };
const P_SETTING_AXIS: GridAxis = GridAxis { start: 0.05, stop: 0.95, step: 0.05 };

/// Optimizes source parameters for the scenario under the chosen mode.
///
/// The polarization-dependent loss is read from the source template's signal
/// row; candidate sources are rebuilt with the same loss. Finite mode
/// requires finite-key parameters, whose block size, basis probabilities, and
/// failure bounds are kept while the setting probabilities are searched.
pub fn optimize(
    spec: &SearchSpec,
    params: &SystemParams,
    source: &SourceModel,
    geometry: &ChannelGeometry,
    inputs: &RateInputs,
    fk: Option<&FiniteKeyParams>,
) -> Result<OptimizeOutcome> {
    inputs.validate()?;
    params.validate()?;
    geometry.validate()?;
    if let Some(p) = spec.force_p {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "forced p_select must lie in (0, 1], got {p}"
            )));
        }
    }
    let pdl_db = source.pdl_db()?;
    let loss = source.loss_ratio()?;

    match spec.mode {
        OptimizeMode::Asymptotic => {
            let eval_at = |mu: f64, p: f64| -> f64 {
                SourceModel::symmetric_pdl(mu, 0.0, pdl_db)
                    .and_then(|s| asymptotic_key_rate(params, &s, geometry, inputs, Some(p)))
                    .map_or(-1.0, |r| r.rate)
            };
            let (point, rate) = match spec.force_p {
                Some(p) => {
                    let (point, rate) =
                        grid_refine(&[MU_SIGNAL_AXIS], spec.refine_levels, &|x| eval_at(x[0], p));
                    (vec![point[0], p], rate)
                }
                None => grid_refine(&[MU_SIGNAL_AXIS, P_SELECT_AXIS], spec.refine_levels, &|x| {
                    eval_at(x[0], x[1])
                }),
            };
            let best_source = SourceModel::symmetric_pdl(point[0], 0.0, pdl_db)?;
            let detail =
                asymptotic_key_rate(params, &best_source, geometry, inputs, Some(point[1]))?;
            Ok(OptimizeOutcome {
                params: OptimalParams {
                    mu_signal: point[0],
                    mu_decoy: None,
                    p_select: point[1],
                    p_signal: None,
                    p_decoy: None,
                },
                rate: detail.rate,
                exhausted: rate <= 0.0,
                detail: RateDetail::Asymptotic(detail),
            })
        }
        OptimizeMode::TwoDecoy => {
            let p_at = |mu: f64| match spec.force_p {
                Some(p) => Ok(p),
                None => heuristic_p_optimal(mu, loss),
            };
            let objective = |x: &[f64]| -> f64 {
                let (mu_s, mu_v) = (x[0], x[1]);
                if mu_v >= mu_s {
                    return -1.0;
                }
                p_at(mu_s)
                    .and_then(|p| {
                        let s = SourceModel::symmetric_pdl(mu_s, mu_v, pdl_db)?;
                        key_rate_two_decoy(params, &s, geometry, inputs, p)
                    })
                    .map_or(-1.0, |r| r.rate)
            };
            let (point, rate) =
                grid_refine(&[MU_SIGNAL_AXIS, MU_DECOY_AXIS], spec.refine_levels, &objective);
            let p = p_at(point[0])?;
            let best_source = SourceModel::symmetric_pdl(point[0], point[1], pdl_db)?;
            let detail = key_rate_two_decoy(params, &best_source, geometry, inputs, p)?;
            Ok(OptimizeOutcome {
                params: OptimalParams {
                    mu_signal: point[0],
                    mu_decoy: Some(point[1]),
                    p_select: p,
                    p_signal: None,
                    p_decoy: None,
                },
                rate: detail.rate,
                exhausted: rate <= 0.0,
                detail: RateDetail::TwoDecoy(detail),
            })
        }
        OptimizeMode::Finite => {
            let template = fk.ok_or_else(|| {
                Error::InvalidParameter("finite optimization needs finite-key parameters".into())
            })?;
            let fk_at = |mu_s: f64, p_signal: f64, p_decoy: f64| -> Result<FiniteKeyParams> {
                let p = match spec.force_p {
                    Some(p) => p,
                    None => heuristic_p_optimal(mu_s, loss)?,
                };
                let fk = FiniteKeyParams {
                    p_signal,
                    p_decoy,
                    p_vacuum: 1.0 - p_signal - p_decoy,
                    p_select: p,
                    ..*template
                };
                fk.validate()?;
                Ok(fk)
            };
            let objective = |x: &[f64]| -> f64 {
                let (mu_s, mu_v, p_signal, p_decoy) = (x[0], x[1], x[2], x[3]);
                if mu_v >= mu_s || p_signal + p_decoy >= 1.0 - 1e-4 {
                    return -1.0;
                }
                fk_at(mu_s, p_signal, p_decoy)
                    .and_then(|fk| {
                        let s = SourceModel::symmetric_pdl(mu_s, mu_v, pdl_db)?;
                        finite_key_rate(params, &s, geometry, &fk, inputs.ec_inefficiency)
                    })
                    .map_or(-1.0, |r| r.rate)
            };
            let (point, rate) = grid_refine(
                &[MU_SIGNAL_AXIS, MU_DECOY_AXIS, P_SETTING_AXIS, P_SETTING_AXIS],
                spec.refine_levels,
                &objective,
            );
            let best_fk = fk_at(point[0], point[2], point[3])?;
            let best_source = SourceModel::symmetric_pdl(point[0], point[1], pdl_db)?;
            let detail =
                finite_key_rate(params, &best_source, geometry, &best_fk, inputs.ec_inefficiency)?;
            Ok(OptimizeOutcome {
                params: OptimalParams {
                    mu_signal: point[0],
                    mu_decoy: Some(point[1]),
                    p_select: best_fk.p_select,
                    p_signal: Some(point[2]),
                    p_decoy: Some(point[3]),
                },
                rate: detail.rate,
                exhausted: rate <= 0.0,
                detail: RateDetail::Finite(detail),
            })
        }
    }
}

/// Scenario quantity varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    DistanceKm,
    PdlDb,
    Pulses,
}

/// One optimized point of a sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: OptimizeOutcome,
}

/// Optimizes the scenario at every value of the swept axis, in input order.
pub fn sweep(
    spec: &SearchSpec,
    params: &SystemParams,
    source: &SourceModel,
    geometry: &ChannelGeometry,
    inputs: &RateInputs,
    fk: Option<&FiniteKeyParams>,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one value".into()));
    }
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let mut geometry = *geometry;
        let mut source = source.clone();
        let mut fk = fk.copied();
        match axis {
            SweepAxis::DistanceKm => geometry.distance_km = value,
            SweepAxis::PdlDb => {
                source = SourceModel::symmetric_pdl(
                    source.signal_intensity(),
                    source.decoy_intensity(),
                    value,
                )?;
            }
            SweepAxis::Pulses => {
                let template = fk.ok_or_else(|| {
                    Error::InvalidParameter("pulse sweep needs finite-key parameters".into())
                })?;
                if !(value >= 1.0 && value.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "pulse count must be at least 1, got {value}"
                    )));
                }
                fk = Some(FiniteKeyParams { n_pulses: value as u64, ..template });
            }
        }
        let outcome = optimize(spec, params, &source, &geometry, inputs, fk.as_ref())?;
        points.push(SweepPoint { value, outcome });
    }
    Ok(points)
}
