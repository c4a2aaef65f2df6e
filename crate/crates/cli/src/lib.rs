//! `snspd-lab`: simulation, analysis, planning and reporting from the shell.
//!
//! Every command that writes an output set also writes a [`RunManifest`];
//! `snspd-lab replay <manifest>` re-runs it with the recorded seed.

mod analyze;
mod args;
mod manifest;
mod plan;
mod report;
mod simulate;

use std::ffi::OsString;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use clap::Parser;
use snspd_core::model::{parse_config, ConfigError, ReceiverConfig};

pub use args::{AnalyzeCommand, Cli, Command};
pub use manifest::RunManifest;

pub const SEED_ENV: &str = "SNSPD_LAB_SEED";

/// Bad flags, unreadable or invalid configuration: exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 1 for usage and configuration errors, 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err
        .chain()
        .any(|c| c.is::<UsageError>() || c.is::<ConfigError>() || c.is::<clap::Error>());
    if config {
        1
    } else {
        2
    }
}

/// Invocation context shared by the commands.
#[derive(Debug, Clone)]
pub struct Context {
    /// Arguments after the program name, as recorded in manifests.
    pub argv: Vec<String>,
    /// Seed that takes precedence over `--seed`.
    pub seed_override: Option<u64>,
}

impl Context {
    pub fn seed(&self, flag: Option<u64>) -> Option<u64> {
        self.seed_override.or(flag)
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| usage(format!("{SEED_ENV}='{v}': {e}"))),
        _ => Ok(None),
    }
}

/// Parses and runs one invocation (arguments exclude the program name).
pub fn run<I, T>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<String> = argv
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let cli = Cli::try_parse_from(std::iter::once("snspd-lab".to_string()).chain(argv.iter().cloned()))?;
    let ctx = Context {
        argv,
        seed_override: env_seed()?,
    };
    execute(&cli, &ctx)
}

pub fn execute(cli: &Cli, ctx: &Context) -> Result<()> {
    let work = || match &cli.command {
        Command::Simulate(a) => simulate::run(a, ctx),
        Command::Analyze(a) => analyze::run(a, ctx),
        Command::Plan(a) => plan::run(a, ctx),
        Command::Survey(a) => plan::run_survey(a, ctx),
        Command::Report(a) => report::run(a, ctx),
        Command::Replay(a) => manifest::replay(a),
    };
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")?
            .install(work),
        None => work(),
    }
}

/// Reads a configuration file; failures are usage errors.
pub fn load_config(path: &Path) -> Result<ReceiverConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).with_context(|| format!("config {}", path.display()))
}

pub(crate) fn config_path(positional: &Option<PathBuf>, flag: &Option<PathBuf>) -> Result<PathBuf> {
    match (positional, flag) {
        (Some(p), None) | (None, Some(p)) => Ok(p.clone()),
        (Some(_), Some(_)) => Err(usage("give the config either positionally or with --config, not both")),
        (None, None) => Err(usage("a config file is required (positional or --config)")),
    }
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes to `path`, or to stdout when none is given.
pub(crate) fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => stdout(contents),
    }
}

/// Prints to stdout; a reader that has gone away (`| head`) is not an error.
pub(crate) fn stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.context("writing to stdout"),
    }
}
