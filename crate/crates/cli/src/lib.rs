//! Experiment runner: parses a TOML config, dispatches one subcommand and
//! persists its records, report and manifest.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub mod commands;
pub mod output;
pub mod plot;

pub use plot::{emit_plot_data, PlotData, TailSeries};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] replab_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("potential conditions failed on the grid ({0}); rerun with --skip-audit to proceed")]
    AuditFailed(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for a failed check, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::AuditFailed(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "replab", version, about = "Numerical laboratory for repulsive Schrödinger operators")]
pub struct Cli {
    /// TOML run configuration; the built-in reference instance if omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Skip the potential-condition audit that precedes every run.
    #[arg(long, global = true)]
    pub skip_audit: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Export geometry fields and check the weight bounds and identities.
    Geometry,
    /// Integrate a classical orbit and classify its growth.
    Classical(ClassicalArgs),
    /// Sweep Γ and record the Besov-norm bound ratio.
    ResolventSweep(SweepArgs),
    /// Outgoing and incoming radiation residuals along a Γ sweep.
    Radiation(RadiationArgs),
    /// Γ → 0 extrapolation of the resolvent, optionally with a Hölder fit.
    Lap(LapArgs),
    /// Solve with transparent ends and test the radiation conditions.
    Sommerfeld(SommerfeldArgs),
    /// Brute-force vs analytic commutator refinement and positivity probes.
    Commutator(CommutatorArgs),
    /// Search for decaying solutions of `(H − λ)φ = 0`.
    RellichProbe(RellichArgs),
    /// Check the potential conditions on the grid.
    Audit,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Geometry => "geometry",
            Command::Classical(_) => "classical",
            Command::ResolventSweep(_) => "resolvent-sweep",
            Command::Radiation(_) => "radiation",
            Command::Lap(_) => "lap",
            Command::Sommerfeld(_) => "sommerfeld",
            Command::Commutator(_) => "commutator",
            Command::RellichProbe(_) => "rellich-probe",
            Command::Audit => "audit",
        }
    }

    fn needs_audit(&self) -> bool {
        !matches!(self, Command::Classical(_) | Command::Audit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignArg {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaArg {
    Mourre,
    Weighted,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassicalArgs {
    /// Defaults to `model.epsilon`.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub x0: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.3")]
    pub p0: Vec<f64>,
    /// Final time; negative integrates backward.
    #[arg(long = "T", default_value_t = 100.0, allow_negative_numbers = true)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Extra copy of the orbit CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    /// `gaussian`, `ring` or `all`; defaults to `sweep.psi`.
    #[arg(long)]
    pub psi: Option<String>,
    #[arg(long, value_enum, default_value_t = SignArg::Upper)]
    pub sign: SignArg,
    /// Extra copy of the SweepRecord CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RadiationArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, default_value = "gaussian")]
    pub psi: String,
    /// Use `sweep.betas` (default `{0, β_c/4, β_c/2, 3β_c/4, 3β_c/2}`).
    #[arg(long, conflicts_with = "beta")]
    pub beta_sweep: bool,
    /// Single weight exponent; defaults to `β_c/2`.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LapArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value = "gaussian")]
    pub psi: String,
    /// Halving schedule; defaults to 1.5625e-3 down to 1.953125e-4.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = SignArg::Upper)]
    pub sign: SignArg,
    /// Also fit the Hölder exponent over `sweep.holder_shifts`.
    #[arg(long)]
    pub holder: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SommerfeldArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value = "gaussian")]
    pub psi: String,
    /// Weight exponent of the radiation conditions; defaults to `β_c/4`.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Compare against the Γ-extrapolated resolvent on the absorbing grid.
    #[arg(long)]
    pub compare_extrapolation: bool,
    /// Use the first-order one-sided boundary row instead of the discrete
    /// transparent condition.
    #[arg(long)]
    pub one_sided: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommutatorArgs {
    /// Defaults to `probe.nu`.
    #[arg(long)]
    pub nu: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of random interior bumps.
    #[arg(long, default_value_t = 16)]
    pub bumps: usize,
    /// Also run the positivity probe for this lemma.
    #[arg(long, value_enum)]
    pub probe: Option<LemmaArg>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// `Im z` of the probe.
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RellichArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub angles: usize,
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    pub run_dir: PathBuf,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            2
        }
    }
}

pub fn load_config(cli: &Cli) -> CliResult<replab_core::Config> {
    Ok(match &cli.config {
        Some(p) => replab_core::Config::from_path(p)?,
        None => replab_core::Config::reference(),
    })
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let config = load_config(cli)?;
    if cli.command.needs_audit() && !cli.skip_audit {
        let rep = commands::audit_report(&config)?;
        if !rep.all_passed() {
            let failed: Vec<&str> = rep.passed.iter().filter(|(_, ok)| !**ok).map(|(k, _)| k.as_str()).collect();
            return Err(CliError::AuditFailed(failed.join(", ")));
        }
    }
    let name = cli.command.name();
    let args = serde_json::to_value(&cli.command).map_err(std::io::Error::other)?;
    let hash = output::config_hash(&config, name, &args);
    let manifest = output::RunManifest::new(&config, name, args, hash.clone());
    let mut dir = output::RunDir::create(&output::output_root(&config), name, &hash)?;
    match commands::dispatch(&cli.command, &config, &mut dir) {
        Ok(done) => {
            dir.write_json("report.json", &done.report)?;
            dir.finish(manifest, done.passed)?;
            Ok(Outcome {
                passed: done.passed,
                summary: done.summary,
                run_dir: dir.path.clone(),
            })
        }
        Err(e) => {
            dir.mark_failed(&e.to_string());
            Err(e)
        }
    }
}
