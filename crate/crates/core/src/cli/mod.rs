//! The `evpeak` command line: dispatch tables, hour-of-day profiles, peak studies and data
//! generation, each output accompanied by a [`RunManifest`].

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context as _;
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use crate::aggregate::AggregateError;
use crate::dispatch::DispatchError;
use crate::io::{DataError, ResultFormat};
use crate::model::ModelError;

pub use manifest::{sha256_file, sha256_hex, InputDigest, OutputDigest, RunManifest};

#[derive(Debug, Clone, Parser)]
#[command(name = "evpeak", version, about = "EV charging dispatch and fleet peak analytics")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Per-step schedule of one session under each scenario.
    DispatchSession(DispatchSessionArgs),
    /// Per-session energy and network cost under each scenario.
    SessionCosts(ScenarioArgs),
    /// Hour-of-day quantiles of per-CP fleet load for each scenario.
    QuantileProfile(QuantileArgs),
    /// Annual peak per CP and diversity factor over sampled fleets of increasing size.
    PeakStudy(PeakStudyArgs),
    /// Writes a synthetic session log.
    Generate(GenerateArgs),
    /// Writes a synthetic hourly price series.
    GeneratePrices(GeneratePricesArgs),
    /// Replays the run recorded in a manifest and checks the output is identical.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ResultFormat::Csv)]
    pub format: ResultFormat,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario file or preset alias; repeatable. Defaults to all presets.
    #[arg(long = "scenario")]
    pub scenarios: Vec<String>,
    /// Session CSV overriding the scenario's session source.
    #[arg(long)]
    pub sessions: Option<PathBuf>,
    /// Price CSV overriding the scenario's price source.
    #[arg(long)]
    pub prices: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DispatchSessionArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub session_id: String,
}

#[derive(Debug, Clone, Args)]
pub struct QuantileArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated quantile levels, overriding the scenario.
    #[arg(long, value_delimiter = ',')]
    pub quantiles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct PeakStudyArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated fleet sizes.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// TOML file with generator parameters; defaults to the reference fleet.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_cps: Option<usize>,
    #[arg(long)]
    pub sessions_per_cp: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GeneratePricesArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "2022-01-01T00:00:00Z")]
    pub start: DateTime<Utc>,
    #[arg(long, default_value_t = 8760)]
    pub hours: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the replayed outputs; defaults to the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::DispatchSession(_) => "dispatch-session",
            Self::SessionCosts(_) => "session-costs",
            Self::QuantileProfile(_) => "quantile-profile",
            Self::PeakStudy(_) => "peak-study",
            Self::Generate(_) => "generate",
            Self::GeneratePrices(_) => "generate-prices",
            Self::Rerun(_) => "rerun",
        }
    }

    fn out_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Self::DispatchSession(a) => Some(&mut a.scenario.output.out),
            Self::SessionCosts(a) => Some(&mut a.output.out),
            Self::QuantileProfile(a) => Some(&mut a.scenario.output.out),
            Self::PeakStudy(a) => Some(&mut a.scenario.output.out),
            Self::Generate(a) => Some(&mut a.out),
            Self::GeneratePrices(a) => Some(&mut a.out),
            Self::Rerun(_) => None,
        }
    }
}

/// Files written by one invocation.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub(crate) struct RunContext {
    pub args: Vec<String>,
    pub command: &'static str,
    pub started: Instant,
    pub threads: usize,
    pub report: RunReport,
}

impl RunContext {
    pub fn warn(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.report.warnings.push(msg);
    }
}

/// Runs a parsed command line. `args` are the raw arguments after the program name,
/// recorded in manifests for replay.
pub fn run(cli: Cli, args: Vec<String>) -> anyhow::Result<RunReport> {
    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    let mut ctx = RunContext {
        args,
        command: cli.command.name(),
        started: Instant::now(),
        threads,
        report: RunReport::default(),
    };
    pool.install(|| match &cli.command {
        Command::DispatchSession(a) => commands::dispatch_session(&mut ctx, a),
        Command::SessionCosts(a) => commands::session_costs(&mut ctx, a),
        Command::QuantileProfile(a) => commands::quantile_profile(&mut ctx, a),
        Command::PeakStudy(a) => commands::peak_study(&mut ctx, a),
        Command::Generate(a) => commands::generate(&mut ctx, a),
        Command::GeneratePrices(a) => commands::generate_prices(&mut ctx, a),
        Command::Rerun(a) => rerun(&mut ctx, a),
    })?;
    Ok(ctx.report)
}

fn rerun(ctx: &mut RunContext, a: &RerunArgs) -> anyhow::Result<()> {
    let manifest = RunManifest::read(&a.manifest)?;
    for input in manifest.inputs.iter().filter(|i| i.is_file) {
        let now = sha256_file(std::path::Path::new(&input.source))?;
        if now != input.sha256 {
            anyhow::bail!("input {} changed since the recorded run", input.source);
        }
    }
    let argv = std::iter::once("evpeak".to_string()).chain(manifest.args.iter().cloned());
    let mut cli = Cli::try_parse_from(argv).context("recorded arguments no longer parse")?;
    if matches!(cli.command, Command::Rerun(_)) {
        anyhow::bail!("manifest records a rerun");
    }
    let recorded_dir = a
        .manifest
        .parent()
        .map(PathBuf::from)
        .unwrap_or_default();
    let out_dir = a.out.clone().unwrap_or(recorded_dir);
    if let Some(out) = cli.command.out_mut() {
        *out = out_dir.clone();
    }
    cli.threads = cli.threads.or(Some(ctx.threads));
    let report = run(cli, manifest.args.clone())?;
    let replayed = out_dir.join(&manifest.output.file);
    let digest = sha256_file(&replayed)?;
    if digest != manifest.output.sha256 {
        anyhow::bail!("replayed {} differs from the recorded output", replayed.display());
    }
    ctx.report.outputs.extend(report.outputs);
    ctx.report.warnings.extend(report.warnings);
    Ok(())
}

/// Error category for the machine-readable error line.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<DataError>() {
            return match e {
                DataError::Io { .. } => "io",
                DataError::Scenario(_) => "scenario",
                DataError::Model(_) => "model",
                _ => "data",
            };
        }
        if cause.downcast_ref::<DispatchError>().is_some() {
            return "dispatch";
        }
        if cause.downcast_ref::<AggregateError>().is_some() {
            return "aggregate";
        }
        if cause.downcast_ref::<ModelError>().is_some() {
            return "model";
        }
    }
    "runtime"
}

/// Single-line JSON error record written to stderr on failure.
pub fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message.replace('\n', " ") }).to_string()
}

/// Entry point used by the binary. Returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!("{}", error_line("usage", first));
            return 2;
        }
    };
    let args = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, args) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{}", error_line(error_kind(&e), &format!("{e:#}")));
            1
        }
    }
}
