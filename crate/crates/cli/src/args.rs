use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "snspd-lab", version, about = "Multi-channel SNSPD receiver simulation and metrology")]
pub struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the receiver and write timetags, a per-channel report and a manifest.
    Simulate(SimulateArgs),
    /// Turn timetags or configurations into plot-ready CSV series.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Select nanowires from a survey and assign them to fiber ports.
    Plan(PlanArgs),
    /// Generate a synthetic nanowire survey.
    Survey(SurveyArgs),
    /// Compare a metrics run against the reference anchor values.
    Report(ReportArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Receiver configuration (TOML).
    #[arg(value_name = "CONFIG")]
    pub config_pos: Option<PathBuf>,
    #[arg(long = "config", value_name = "CONFIG")]
    pub config_flag: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run length in seconds (overrides the config).
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value = "sim_out")]
    pub out: PathBuf,
    /// Bias batch START:STOP:STEP applied to every channel; writes a light and
    /// a dark run per bias.
    #[arg(long, value_name = "START:STOP:STEP")]
    pub bias_sweep: Option<String>,
    /// Dark-run length of a bias batch, seconds (default: the light duration).
    #[arg(long)]
    pub dark_duration: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// SDE, DCR and NEP against normalized bias from a bias batch directory.
    Sde(SdeArgs),
    /// Sync-delay histogram FWHM per channel from a pulsed run.
    Jitter(JitterArgs),
    /// Start-multi-stop interarrival histogram of one channel.
    Iat(IatArgs),
    /// Output rate and latching against input flux for one channel.
    Rate(RateArgs),
    /// Crosstalk onto dark victim channels with every other channel lit.
    Crosstalk(CrosstalkArgs),
    /// Full per-channel characterization.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct SdeArgs {
    /// Directory written by `simulate --bias-sweep`.
    pub batch: PathBuf,
    #[arg(long, default_value_t = 1550.0)]
    pub wavelength_nm: f64,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct JitterArgs {
    pub timetags: PathBuf,
    #[arg(long)]
    pub sync_period_ps: u64,
    /// Histogram bin width; default picks about 25 bins per FWHM.
    #[arg(long)]
    pub bin_ps: Option<u64>,
    #[arg(long, default_value = "linear")]
    pub method: String,
    /// Restrict to these channels (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub channel: Vec<usize>,
    /// Also write the histogram of the (single) selected channel.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IatArgs {
    pub timetags: PathBuf,
    #[arg(long)]
    pub channel: usize,
    #[arg(long, default_value_t = 1000)]
    pub bin_ps: u64,
    #[arg(long, default_value_t = 200_000)]
    pub max_lag_ps: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub channel: usize,
    /// Input fluxes, photons/s.
    #[arg(long, value_delimiter = ',', default_values_t = [1e6, 1e7, 1e8, 1e9])]
    pub fluxes: Vec<f64>,
    /// Run length per flux, seconds.
    #[arg(long, default_value_t = 2e-4)]
    pub duration: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrosstalkArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Victim channels (default: all).
    #[arg(long, value_delimiter = ',')]
    pub victims: Vec<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Channels to characterize (default: all).
    #[arg(long, value_delimiter = ',')]
    pub channels: Vec<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "linear")]
    pub fwhm_method: String,
    /// Also measure crosstalk onto these victims into crosstalk.csv.
    #[arg(long, value_delimiter = ',')]
    pub crosstalk_victims: Vec<usize>,
    #[arg(long, default_value = "metrics_out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Survey CSV (`id,edge,slot,r_ohm,ic_ua`).
    pub survey: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    #[arg(long, default_value = "8x8", value_parser = parse_grid)]
    pub grid: (usize, usize),
    #[arg(long, default_value_t = 0.2)]
    pub lambda: f64,
    /// Solve once per λ and check that routing cost does not increase.
    #[arg(long, value_delimiter = ',')]
    pub lambda_sweep: Vec<f64>,
    #[arg(long, default_value = "hungarian")]
    pub solver: String,
    /// Forbidden nanowire/port pairs as ID:PORT (port index is row-major).
    #[arg(long, value_delimiter = ',', value_parser = parse_exclusion)]
    pub exclude: Vec<(u32, usize)>,
    #[arg(long, default_value = "plan_out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SurveyArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 44)]
    pub per_edge: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding metrics.csv and optionally crosstalk.csv.
    pub dir: PathBuf,
    /// Output directory for anchors.csv (default: DIR/report).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this location instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected RxC, got '{s}'"))?;
    let r: usize = r.trim().parse().map_err(|e| format!("rows: {e}"))?;
    let c: usize = c.trim().parse().map_err(|e| format!("cols: {e}"))?;
    if r == 0 || c == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((r, c))
}

fn parse_exclusion(s: &str) -> Result<(u32, usize), String> {
    let (id, port) = s.split_once(':').ok_or_else(|| format!("expected ID:PORT, got '{s}'"))?;
    Ok((
        id.trim().parse().map_err(|e| format!("id: {e}"))?,
        port.trim().parse().map_err(|e| format!("port: {e}"))?,
    ))
}

/// Expands START:STOP:STEP into an inclusive grid.
pub fn parse_bias_sweep(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("expected START:STOP:STEP, got '{s}'"));
    };
    if !(step > 0.0) || !(stop >= start) || !(start > 0.0) {
        return Err("need 0 < START <= STOP and STEP > 0".into());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_sweep_inclusive() {
        let v = parse_bias_sweep("0.7:1.04:0.02").unwrap();
        assert_eq!(v.len(), 18);
        assert_eq!(v[17], 1.04);
        assert!(parse_bias_sweep("1:0.5:0.1").is_err());
        assert!(parse_bias_sweep("1:2").is_err());
    }

    #[test]
    fn grid_and_exclusion() {
        assert_eq!(parse_grid("8x8"), Ok((8, 8)));
        assert!(parse_grid("0x8").is_err());
        assert_eq!(parse_exclusion("12:40"), Ok((12, 40)));
    }
}
