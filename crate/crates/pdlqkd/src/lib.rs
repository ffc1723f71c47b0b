//! Decoy-state BB84 key rates for transmitters with polarization-dependent loss.
//!
//! Integrated photonic transmitters often attenuate one polarization more than
//! the other, so the four BB84 states leave the source with unequal intensities.
//! This crate models the consequences end to end:
//!
//! - [`model`]: carrier-dispersion source shifts, Poisson photon statistics,
//!   and the forward detection model mapping per-polarization intensities to
//!   gains and error rates.
//! - [`keyrate`]: asymptotic secret key rates with the post-selection
//!   countermeasure, the heuristic post-selection probability, and the
//!   loss-dependent optimal signal intensity.
//! - [`decoy`]: two-decoy single-photon bounds evaluated per polarization and
//!   combined into a secure rate.
//! - [`finite`]: finite-key analysis with Hoeffding concentration and
//!   worst-case interval propagation through the decoy estimators.
//! - [`montecarlo`]: seeded count sampling at cell and photon-number
//!   resolution, used to validate every bound against simulated experiments.
//! - [`optimizer`]: deterministic grid-plus-refinement search over source
//!   parameters, and sweeps along distance, loss, or pulse count.
//! - [`config`]: TOML run configuration shared by the CLI and examples.
//!
//! ```
//! use pdlqkd::model::{ChannelGeometry, SourceModel, SystemParams};
//! use pdlqkd::keyrate::{asymptotic_key_rate, RateInputs};
//!
//! let system = SystemParams::default();
//! let source = SourceModel::symmetric_pdl(0.7, 0.1, 10.0).unwrap();
//! let geometry = ChannelGeometry { distance_km: 50.0 };
//! let result = asymptotic_key_rate(&system, &source, &geometry, &RateInputs::default(), None).unwrap();
//! assert!(result.rate > 0.0);
//! ```

pub mod cli;
pub mod config;
pub mod decoy;
pub mod finite;
pub mod keyrate;
pub mod model;
pub mod montecarlo;
pub mod optimizer;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration field is outside its allowed range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A quantity has no defined value for the given inputs.
    #[error("undefined quantity: {0}")]
    Undefined(String),
    /// Root bracketing failed while solving for the optimal intensity.
    #[error("no sign change in ({lo}, {hi}]: optimal intensity is not bracketed")]
    NoSignChange { lo: f64, hi: f64 },
    /// A run configuration could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
