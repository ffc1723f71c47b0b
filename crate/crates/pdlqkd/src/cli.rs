//! Command-line interface: scenario I/O, subcommands, and report rendering.
//!
//! Exit codes: `0` on success, `1` for validation or I/O errors, `2` when
//! `validate` finds a dominance or consistency failure. Output is
//! deterministic for a given configuration, seed, and format, independent of
//! the thread count.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Mode, RunConfig};
use crate::decoy::{decoy_bounds, deviation_beta, key_rate_two_decoy};
use crate::finite::finite_key_rate;
use crate::keyrate::{asymptotic_key_rate, solve_optimal_mu, KeyRateResult};
use crate::model::{
    system_transmittance, yield_n, IntensitySetting, Polarization, SourceModel,
};
use crate::montecarlo::{check_bounds, simulate_counts, Fidelity};
use crate::optimizer::{
    optimize, sweep, OptimizeMode, OptimizeOutcome, SearchSpec, SweepAxis,
};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "pdlqkd",
    version,
    about = "Decoy-state BB84 key rates under polarization-dependent source loss"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Global flags layered over the configuration file.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Analysis mode: asymptotic, two-decoy, or finite.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, global = true)]
    pub distance_km: Option<f64>,
    #[arg(long, global = true)]
    pub pdl_db: Option<f64>,
    /// Total pulses of the finite-key session; accepts forms like 1e10.
    #[arg(long, global = true)]
    pub n_pulses: Option<f64>,
    #[arg(long, global = true)]
    pub eps_sec: Option<f64>,
    #[arg(long, global = true)]
    pub eps_cor: Option<f64>,
    /// Sifting efficiency q.
    #[arg(long, global = true)]
    pub q: Option<f64>,
    /// Error-correction inefficiency f.
    #[arg(long, global = true)]
    pub f: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap the worker-thread pool; takes effect once per process.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the report to a file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report format; table commands default to csv, scalar commands to human.
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long, global = true)]
    pub mu_signal: Option<f64>,
    #[arg(long, global = true)]
    pub mu_decoy: Option<f64>,
    /// Post-selection probability; overrides the heuristic.
    #[arg(long, global = true)]
    pub p_select: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Human,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepAxisArg {
    /// Channel length in km.
    Distance,
    /// Polarization-dependent loss in dB.
    Pdl,
    /// Finite-key block size.
    Pulses,
    /// Decoy intensity, reporting yield-bound deviations instead of rates.
    DecoyIntensity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FidelityArg {
    Cell,
    Photon,
}

impl From<FidelityArg> for Fidelity {
    fn from(arg: FidelityArg) -> Self {
        match arg {
            FidelityArg::Cell => Fidelity::CellLevel,
            FidelityArg::Photon => Fidelity::PhotonResolved,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Key rate of the configured scenario at fixed parameters.
    Keyrate,
    /// Optimize at every point of a scenario axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: SweepAxisArg,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long)]
        step: f64,
    },
    /// Optimize source parameters for the configured scenario.
    Optimize {
        /// Halving refinement levels after the coarse scan.
        #[arg(long, default_value_t = 6)]
        refine_levels: u32,
        /// Force the post-selection probability to 1.
        #[arg(long)]
        no_post_selection: bool,
    },
    /// Check the finite-key estimators against photon-resolved simulation.
    Validate {
        #[arg(long, default_value_t = 100)]
        runs: u64,
    },
    /// Sample one simulated session and report its counts.
    Simulate {
        #[arg(long, value_enum, default_value_t = FidelityArg::Cell)]
        fidelity: FidelityArg,
    },
}

fn apply_overrides(cfg: &mut RunConfig, ov: &Overrides) {
    if let Some(mode) = ov.mode {
        cfg.mode = mode;
    }
    if let Some(v) = ov.distance_km {
        cfg.channel.distance_km = v;
    }
    if let Some(v) = ov.pdl_db {
        cfg.source.pdl_db = v;
    }
    if let Some(v) = ov.n_pulses {
        cfg.finite.n_pulses = v;
    }
    if let Some(v) = ov.eps_sec {
        cfg.finite.eps_sec = v;
    }
    if let Some(v) = ov.eps_cor {
        cfg.finite.eps_cor = v;
    }
    if let Some(v) = ov.q {
        cfg.rate.protocol_efficiency = v;
    }
    if let Some(v) = ov.f {
        cfg.rate.ec_inefficiency = v;
    }
    if let Some(v) = ov.seed {
        cfg.seed = v;
    }
    if let Some(v) = ov.mu_signal {
        cfg.source.mu_signal = v;
    }
    if let Some(v) = ov.mu_decoy {
        cfg.source.mu_decoy = v;
    }
    if let Some(v) = ov.p_select {
        cfg.source.p_select = Some(v);
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn log10_str(rate: f64) -> String {
    fmt(rate.log10())
}

fn human_block(pairs: &[(&str, String)]) -> String {
    let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0) + 2;
    let mut out = String::new();
    for (key, value) in pairs {
        out.push_str(&format!("{key:<width$}{value}\n"));
    }
    out
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn human_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let render = |cells: Vec<String>, widths: &[usize]| -> String {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(&format!("{cell:<w$}", w = widths[i]));
        }
        line.trim_end().to_string()
    };
    out.push_str(&render(header.iter().map(|s| s.to_string()).collect(), &widths));
    out.push('\n');
    for row in rows {
        out.push_str(&render(row.clone(), &widths));
        out.push('\n');
    }
    out
}

fn render(format: OutputFormat, header: &[&str], rows: &[Vec<String>]) -> String {
    match format {
        OutputFormat::Csv => csv_table(header, rows),
        OutputFormat::Human => human_table(header, rows),
    }
}

fn scenario_pairs(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    vec![
        ("mode", cfg.mode.to_string()),
        ("distance_km", fmt(cfg.channel.distance_km)),
        ("pdl_db", fmt(cfg.source.pdl_db)),
    ]
}

fn rate_pairs(result: &KeyRateResult) -> Vec<(&'static str, String)> {
    vec![
        ("p_select", fmt(result.applied_p)),
        ("q1", fmt(result.q1)),
        ("qs", fmt(result.qs)),
        ("es", fmt(result.es)),
        ("e1_phase", fmt(result.e1_phase)),
        ("y1", fmt(result.y1)),
        ("rate", fmt(result.rate)),
        ("log10_rate", log10_str(result.rate)),
    ]
}

fn cmd_keyrate(cfg: &RunConfig, format: OutputFormat) -> Result<String> {
    let params = cfg.system_params();
    let source = cfg.source_model()?;
    let geometry = cfg.geometry();
    let inputs = cfg.rate_inputs();
    let mut pairs = scenario_pairs(cfg);
    pairs.push(("mu_signal", fmt(cfg.source.mu_signal)));
    match cfg.mode {
        Mode::Asymptotic => {
            let result =
                asymptotic_key_rate(&params, &source, &geometry, &inputs, Some(cfg.p_select()?))?;
            pairs.extend(rate_pairs(&result));
        }
        Mode::TwoDecoy => {
            let result = key_rate_two_decoy(&params, &source, &geometry, &inputs, cfg.p_select()?)?;
            pairs.push(("mu_decoy", fmt(cfg.source.mu_decoy)));
            pairs.extend(rate_pairs(&result));
        }
        Mode::Finite => {
            let fk = cfg.finite_params()?;
            let result = finite_key_rate(&params, &source, &geometry, &fk, inputs.ec_inefficiency)?;
            pairs.push(("mu_decoy", fmt(cfg.source.mu_decoy)));
            pairs.push(("p_select", fmt(fk.p_select)));
            pairs.push(("n_pulses", fmt(fk.n_pulses as f64)));
            pairs.push(("s1_lower", fmt(result.s1_lower)));
            pairs.push((
                "e1_upper",
                result.e1_upper.map(fmt).unwrap_or_else(|| "unbounded".into()),
            ));
            pairs.push(("lambda_ec", fmt(result.lambda_ec)));
            pairs.push(("n_z", fmt(result.n_z)));
            pairs.push(("e_z", fmt(result.e_z)));
            pairs.push(("key_length", fmt(result.key_length)));
            pairs.push(("rate", fmt(result.rate)));
            pairs.push(("log10_rate", log10_str(result.rate)));
        }
    }
    Ok(match format {
        OutputFormat::Human => human_block(&pairs),
        OutputFormat::Csv => {
            let header: Vec<&str> = pairs.iter().map(|(k, _)| *k).collect();
            let row: Vec<String> = pairs.iter().map(|(_, v)| v.clone()).collect();
            csv_table(&header, &[row])
        }
    })
}

fn outcome_cells(outcome: &OptimizeOutcome) -> Vec<String> {
    vec![
        fmt(outcome.params.mu_signal),
        fmt_opt(outcome.params.mu_decoy),
        fmt(outcome.params.p_select),
        fmt_opt(outcome.params.p_signal),
        fmt_opt(outcome.params.p_decoy),
        fmt(outcome.rate),
        log10_str(outcome.rate),
        outcome.exhausted.to_string(),
    ]
}

const OUTCOME_HEADER: [&str; 8] =
    ["mu_signal", "mu_decoy", "p_select", "p_signal", "p_decoy", "rate", "log10_rate", "exhausted"];

fn search_spec(cfg: &RunConfig, refine_levels: u32, no_post_selection: bool) -> Result<SearchSpec> {
    let mode = match cfg.mode {
        Mode::Asymptotic => OptimizeMode::Asymptotic,
        Mode::TwoDecoy => OptimizeMode::TwoDecoy,
        Mode::Finite => OptimizeMode::Finite,
    };
    let force_p = if no_post_selection { Some(1.0) } else { cfg.source.p_select };
    Ok(SearchSpec { mode, force_p, refine_levels })
}

fn cmd_optimize(
    cfg: &RunConfig,
    format: OutputFormat,
    refine_levels: u32,
    no_post_selection: bool,
) -> Result<String> {
    let spec = search_spec(cfg, refine_levels, no_post_selection)?;
    let fk = matches!(cfg.mode, Mode::Finite).then(|| cfg.finite_params()).transpose()?;
    let outcome = optimize(
        &spec,
        &cfg.system_params(),
        &cfg.source_model()?,
        &cfg.geometry(),
        &cfg.rate_inputs(),
        fk.as_ref(),
    )?;
    match format {
        OutputFormat::Human => {
            let mut pairs = scenario_pairs(cfg);
            for (key, value) in OUTCOME_HEADER.iter().zip(outcome_cells(&outcome)) {
                pairs.push((key, value));
            }
            let mut out = human_block(&pairs);
            if outcome.exhausted {
                out.push_str("note: objective was zero over the whole scan; parameters sit at the scan floor\n");
            }
            Ok(out)
        }
        OutputFormat::Csv => Ok(csv_table(&OUTCOME_HEADER, &[outcome_cells(&outcome)])),
    }
}

fn range_values(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    if !(stop >= start) {
        return Err(Error::InvalidParameter(format!(
            "stop must be at least start, got start={start}, stop={stop}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + step * k as f64).collect())
}

fn cmd_sweep(
    cfg: &RunConfig,
    format: OutputFormat,
    axis: SweepAxisArg,
    start: f64,
    stop: f64,
    step: f64,
) -> Result<String> {
    let values = range_values(start, stop, step)?;
    if axis == SweepAxisArg::DecoyIntensity {
        return decoy_intensity_sweep(cfg, format, &values);
    }
    let sweep_axis = match axis {
        SweepAxisArg::Distance => SweepAxis::DistanceKm,
        SweepAxisArg::Pdl => SweepAxis::PdlDb,
        SweepAxisArg::Pulses => SweepAxis::Pulses,
        SweepAxisArg::DecoyIntensity => unreachable!(),
    };
    if sweep_axis == SweepAxis::Pulses && cfg.mode != Mode::Finite {
        return Err(Error::Config("a pulses sweep requires mode = finite".into()));
    }
    let spec = search_spec(cfg, 6, false)?;
    let fk = matches!(cfg.mode, Mode::Finite).then(|| cfg.finite_params()).transpose()?;
    let points = sweep(
        &spec,
        &cfg.system_params(),
        &cfg.source_model()?,
        &cfg.geometry(),
        &cfg.rate_inputs(),
        fk.as_ref(),
        sweep_axis,
        &values,
    )?;
    let header: Vec<&str> = std::iter::once("value").chain(OUTCOME_HEADER).collect();
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            std::iter::once(fmt(p.value)).chain(outcome_cells(&p.outcome)).collect::<Vec<_>>()
        })
        .collect();
    Ok(render(format, &header, &rows))
}

/// Yield-bound deviation versus decoy intensity, with the signal intensity at
/// its loss-dependent optimum.
fn decoy_intensity_sweep(
    cfg: &RunConfig,
    format: OutputFormat,
    values: &[f64],
) -> Result<String> {
    let params = cfg.system_params();
    let geometry = cfg.geometry();
    let loss = crate::model::pdl_loss_factor(cfg.source.pdl_db);
    let mu_s = solve_optimal_mu(loss, params.misalignment, cfg.rate.ec_inefficiency)?;
    let eta = system_transmittance(&params, &geometry);
    let y1_true = yield_n(params.background_yield, eta, 1);
    let header = ["mu_decoy", "mu_signal", "y1_lower", "y1_true", "beta", "e1_phase_upper"];
    let mut rows = Vec::with_capacity(values.len());
    for &mu_v in values {
        if !(mu_v > 0.0 && mu_v < mu_s) {
            return Err(Error::InvalidParameter(format!(
                "decoy intensity {mu_v} must lie in (0, {mu_s}) for the optimal signal intensity"
            )));
        }
        let source = SourceModel::symmetric_pdl(mu_s, mu_v, cfg.source.pdl_db)?;
        let bounds = decoy_bounds(&params, &source, &geometry)?;
        rows.push(vec![
            fmt(mu_v),
            fmt(mu_s),
            fmt(bounds.y1_combined),
            fmt(y1_true),
            fmt(deviation_beta(y1_true, bounds.y1_combined)),
            fmt_opt(bounds.e1_phase_up),
        ]);
    }
    Ok(render(format, &header, &rows))
}

/// Coverage floor below which a validation run counts as a consistency
/// failure; see the Monte-Carlo module for the expected per-cell coverage.
const COVERAGE_FLOOR: f64 = 0.99;

fn cmd_validate(cfg: &RunConfig, format: OutputFormat, runs: u64) -> Result<(String, u8)> {
    if runs == 0 {
        return Err(Error::InvalidParameter("validate needs at least one run".into()));
    }
    if cfg.mode != Mode::Finite {
        return Err(Error::Config(
            "validate requires mode = finite: the checks exercise the interval-widened estimators"
                .into(),
        ));
    }
    let params = cfg.system_params();
    let source = cfg.source_model()?;
    let geometry = cfg.geometry();
    let fk = cfg.finite_params()?;
    let f = cfg.rate.ec_inefficiency;
    let checks = (0..runs)
        .map(|i| check_bounds(&params, &source, &geometry, &fk, f, cfg.seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    let violations = checks.iter().filter(|c| !c.dominance_ok).count();
    let covered: u32 = checks.iter().map(|c| c.covered).sum();
    let indicators: u32 = checks.iter().map(|c| c.indicators).sum();
    let unbounded = checks.iter().filter(|c| c.e1_upper.is_none()).count();
    let coverage = f64::from(covered) / f64::from(indicators);
    let ok = violations == 0 && coverage >= COVERAGE_FLOOR;
    let output = match format {
        OutputFormat::Human => human_block(&[
            ("runs", runs.to_string()),
            ("fidelity", "photon-resolved".into()),
            ("seed_base", cfg.seed.to_string()),
            ("dominance_violations", violations.to_string()),
            ("unbounded_e1", unbounded.to_string()),
            ("coverage", format!("{covered}/{indicators} ({})", fmt(coverage))),
            ("verdict", if ok { "PASS".into() } else { "FAIL".into() }),
        ]),
        OutputFormat::Csv => {
            let header = [
                "seed",
                "s1_lower",
                "s1_truth",
                "e1_upper",
                "e1_truth",
                "dominance_ok",
                "covered",
                "indicators",
                "rate",
            ];
            let rows: Vec<Vec<String>> = checks
                .iter()
                .map(|c| {
                    vec![
                        c.seed.to_string(),
                        fmt(c.s1_lower),
                        fmt(c.s1_truth),
                        fmt_opt(c.e1_upper),
                        fmt_opt(c.e1_truth),
                        c.dominance_ok.to_string(),
                        c.covered.to_string(),
                        c.indicators.to_string(),
                        fmt(c.result.rate),
                    ]
                })
                .collect();
            csv_table(&header, &rows)
        }
    };
    Ok((output, if ok { 0 } else { 2 }))
}

fn cmd_simulate(cfg: &RunConfig, format: OutputFormat, fidelity: Fidelity) -> Result<String> {
    let params = cfg.system_params();
    let source = cfg.source_model()?;
    let geometry = cfg.geometry();
    let fk = cfg.finite_params()?;
    let run = simulate_counts(&params, &source, &geometry, &fk, cfg.seed, fidelity)?;
    let header = [
        "seed",
        "fidelity",
        "setting",
        "polarization",
        "pulses",
        "detections",
        "errors",
        "single_photon_detections",
        "single_photon_errors",
    ];
    let fidelity_label = match fidelity {
        Fidelity::CellLevel => "cell",
        Fidelity::PhotonResolved => "photon",
    };
    let mut rows = Vec::with_capacity(12);
    for setting in IntensitySetting::ALL {
        for pol in Polarization::ALL {
            let cell = run.counts.get(setting, pol);
            let (sp_det, sp_err) = match &run.truth {
                Some(truth) => (
                    fmt(truth.detections_at(setting, pol)),
                    fmt(truth.errors_at(setting, pol)),
                ),
                None => (String::new(), String::new()),
            };
            rows.push(vec![
                run.seed.to_string(),
                fidelity_label.to_string(),
                setting.label().to_string(),
                pol.label().to_string(),
                fmt(cell.pulses),
                fmt(cell.detections),
                fmt(cell.errors),
                sp_det,
                sp_err,
            ]);
        }
    }
    Ok(render(format, &header, &rows))
}

/// Executes a parsed invocation and returns the process exit code.
pub fn run(cli: Cli) -> Result<u8> {
    let mut cfg = match &cli.overrides.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, &cli.overrides);
    if let Some(threads) = cli.overrides.threads {
        if threads == 0 {
            return Err(Error::InvalidParameter("threads must be positive".into()));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    cfg.validate()?;
    let default_format = match cli.command {
        Command::Keyrate | Command::Optimize { .. } | Command::Validate { .. } => {
            OutputFormat::Human
        }
        Command::Sweep { .. } | Command::Simulate { .. } => OutputFormat::Csv,
    };
    let format = cli.overrides.format.unwrap_or(default_format);
    let (output, code) = match cli.command {
        Command::Keyrate => (cmd_keyrate(&cfg, format)?, 0),
        Command::Optimize { refine_levels, no_post_selection } => {
            (cmd_optimize(&cfg, format, refine_levels, no_post_selection)?, 0)
        }
        Command::Sweep { axis, start, stop, step } => {
            (cmd_sweep(&cfg, format, axis, start, stop, step)?, 0)
        }
        Command::Validate { runs } => cmd_validate(&cfg, format, runs)?,
        Command::Simulate { fidelity } => (cmd_simulate(&cfg, format, fidelity.into())?, 0),
    };
    match &cli.overrides.out {
        Some(path) => std::fs::write(path, output)?,
        None => print!("{output}"),
    }
    Ok(code)
}
