//! TOML run configuration shared by the CLI and the examples.
//!
//! A config file describes one scenario: receiver and channel parameters, the
//! source intensities and loss, protocol inputs, and the finite-key session.
//! Every field has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected to catch typos.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::finite::FiniteKeyParams;
use crate::keyrate::{heuristic_p_optimal, RateInputs};
use crate::model::{ChannelGeometry, SourceModel, SystemParams};
use crate::{Error, Result};

/// Which analysis the run uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Asymptotic,
    TwoDecoy,
    Finite,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Asymptotic => "asymptotic",
            Mode::TwoDecoy => "two-decoy",
            Mode::Finite => "finite",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymptotic" => Ok(Mode::Asymptotic),
            "two-decoy" => Ok(Mode::TwoDecoy),
            "finite" => Ok(Mode::Finite),
            other => Err(Error::Config(format!(
                "unknown mode '{other}', expected asymptotic, two-decoy, or finite"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub misalignment: f64,
    pub background_yield: f64,
    pub receiver_efficiency: f64,
    pub attenuation_db_per_km: f64,
    pub background_error: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let p = SystemParams::default();
        SystemSection {
            misalignment: p.misalignment,
            background_yield: p.background_yield,
            receiver_efficiency: p.receiver_efficiency,
            attenuation_db_per_km: p.attenuation_db_per_km,
            background_error: p.background_error,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub mu_signal: f64,
    pub mu_decoy: f64,
    pub pdl_db: f64,
    /// Post-selection probability; omitted means the heuristic value.
    pub p_select: Option<f64>,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection { mu_signal: 0.7, mu_decoy: 0.1, pdl_db: 0.0, p_select: None }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub distance_km: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection { distance_km: 50.0 }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSection {
    pub protocol_efficiency: f64,
    pub ec_inefficiency: f64,
}

impl Default for RateSection {
    fn default() -> Self {
        let inputs = RateInputs::default();
        RateSection {
            protocol_efficiency: inputs.protocol_efficiency,
            ec_inefficiency: inputs.ec_inefficiency,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteSection {
    /// Total pulses; accepts float notation such as `1e10`.
    pub n_pulses: f64,
    pub p_signal: f64,
    pub p_decoy: f64,
    pub eps_cor: f64,
    pub eps_sec: f64,
}

impl Default for FiniteSection {
    fn default() -> Self {
        FiniteSection { n_pulses: 1e10, p_signal: 0.8, p_decoy: 0.15, eps_cor: 1e-10, eps_sec: 1e-10 }
    }
}

/// One complete run configuration.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub system: SystemSection,
    pub source: SourceSection,
    pub channel: ChannelSection,
    pub rate: RateSection,
    pub finite: FiniteSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn system_params(&self) -> SystemParams {
        SystemParams {
            misalignment: self.system.misalignment,
            background_yield: self.system.background_yield,
            receiver_efficiency: self.system.receiver_efficiency,
            attenuation_db_per_km: self.system.attenuation_db_per_km,
            background_error: self.system.background_error,
        }
    }

    pub fn source_model(&self) -> Result<SourceModel> {
        SourceModel::symmetric_pdl(self.source.mu_signal, self.source.mu_decoy, self.source.pdl_db)
    }

    pub fn geometry(&self) -> ChannelGeometry {
        ChannelGeometry { distance_km: self.channel.distance_km }
    }

    pub fn rate_inputs(&self) -> RateInputs {
        RateInputs {
            protocol_efficiency: self.rate.protocol_efficiency,
            ec_inefficiency: self.rate.ec_inefficiency,
        }
    }

    /// Post-selection probability: the configured value, or the heuristic for
    /// the configured signal intensity and loss.
    pub fn p_select(&self) -> Result<f64> {
        match self.source.p_select {
            Some(p) => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::Config(format!(
                        "source.p_select must lie in (0, 1], got {p}"
                    )));
                }
                Ok(p)
            }
            None => {
                let loss = crate::model::pdl_loss_factor(self.source.pdl_db);
                heuristic_p_optimal(self.source.mu_signal, loss)
            }
        }
    }

    pub fn finite_params(&self) -> Result<FiniteKeyParams> {
        let n = self.finite.n_pulses;
        if !(n >= 1.0 && n.is_finite() && n <= 9.0e15) {
            return Err(Error::Config(format!(
                "finite.n_pulses must lie in [1, 9e15], got {n}"
            )));
        }
        FiniteKeyParams::new(
            n.round() as u64,
            self.finite.p_signal,
            self.finite.p_decoy,
            self.p_select()?,
            self.finite.eps_cor,
            self.finite.eps_sec,
        )
    }

    /// Validates every section against the chosen mode.
    pub fn validate(&self) -> Result<()> {
        self.system_params().validate()?;
        self.geometry().validate()?;
        self.rate_inputs().validate()?;
        let source = self.source_model()?;
        self.p_select()?;
        if self.source.mu_signal <= 0.0 {
            return Err(Error::Config(format!(
                "source.mu_signal must be positive, got {}",
                self.source.mu_signal
            )));
        }
        let needs_decoy = matches!(self.mode, Mode::TwoDecoy | Mode::Finite);
        if needs_decoy && !(self.source.mu_decoy > 0.0 && self.source.mu_decoy < self.source.mu_signal)
        {
            return Err(Error::Config(format!(
                "source.mu_decoy must satisfy 0 < mu_decoy < mu_signal in {} mode, got {}",
                self.mode, self.source.mu_decoy
            )));
        }
        if self.mode == Mode::Finite {
            self.finite_params()?;
        }
        drop(source);
        Ok(())
    }
}
