use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context as _, Result};
use snspd_core::analysis::{
    characterize, fwhm_registry, jitter_histogram, max_sustained_rate, measure_crosstalk, nep, normalize_bias,
    recovery_corrected_sde, BiasPoint, BiasSweep, CampaignSettings, CharacterizationResult, CrosstalkEstimate,
    SweepRow,
};
use snspd_core::dynamics::effective_dead_time;
use snspd_core::model::ValidatedConfig;
use snspd_core::tcspc::{decode_timetags, interarrival_histogram, Binning, ReadMode, TimetagFile};

use crate::args::{AnalyzeCommand, ConfigArg, CrosstalkArgs, IatArgs, JitterArgs, MetricsArgs, RateArgs, SdeArgs};
use crate::simulate::{BATCH_HEADER, BATCH_INDEX, CONFIG_FILE};
use crate::{config_path, emit, load_config, stdout, usage, write_file, Context, RunManifest};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CROSSTALK_FILE: &str = "crosstalk.csv";

pub fn run(cmd: &AnalyzeCommand, ctx: &Context) -> Result<()> {
    match cmd {
        AnalyzeCommand::Sde(a) => sde(a, ctx),
        AnalyzeCommand::Jitter(a) => jitter(a, ctx),
        AnalyzeCommand::Iat(a) => iat(a, ctx),
        AnalyzeCommand::Rate(a) => rate(a, ctx),
        AnalyzeCommand::Crosstalk(a) => crosstalk(a, ctx),
        AnalyzeCommand::Metrics(a) => metrics(a, ctx),
    }
}

fn read_tags(path: &Path) -> Result<TimetagFile> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_timetags(&bytes, ReadMode::Strict).with_context(|| format!("timetag file {}", path.display()))
}

/// Event times per channel, in file order.
fn per_channel(file: &TimetagFile) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new(); file.channel_count as usize];
    for t in &file.tags {
        out[t.channel as usize].push(t.time_ps);
    }
    out
}

fn check_channel(c: usize, n: usize) -> Result<()> {
    if c >= n {
        return Err(usage(format!("unknown channel id {c} (stream has {n} channels)")));
    }
    Ok(())
}

fn finish(name: &str, out: Option<&Path>, contents: &str, ctx: &Context, config: Option<&Path>, seed: Option<u64>, started: Instant) -> Result<()> {
    emit(out, contents)?;
    if let Some(p) = out {
        RunManifest::new(name, ctx, config, seed, p, started).write(false)?;
    }
    Ok(())
}

fn load_validated(arg: &ConfigArg, seed: Option<u64>, duration: Option<f64>) -> Result<(PathBuf, ValidatedConfig)> {
    let path = config_path(&arg.config_pos, &arg.config_flag)?;
    let mut cfg = load_config(&path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = duration {
        cfg.duration = d;
    }
    Ok((path, cfg.validate()?))
}

struct BatchRow {
    bias: f64,
    dark: bool,
    duration: f64,
    file: PathBuf,
}

fn read_batch(dir: &Path) -> Result<Vec<BatchRow>> {
    let index = dir.join(BATCH_INDEX);
    let text = std::fs::read_to_string(&index).with_context(|| format!("reading {}", index.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some(BATCH_HEADER) {
        bail!("{}: expected header '{BATCH_HEADER}'", index.display());
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || anyhow!("{} line {}: malformed row '{l}'", index.display(), k + 2);
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(BatchRow {
                bias: f[0].parse().map_err(|_| bad())?,
                dark: match f[1] {
                    "light" => false,
                    "dark" => true,
                    _ => return Err(bad()),
                },
                duration: f[2].parse().map_err(|_| bad())?,
                file: dir.join(f[3]),
            })
        })
        .collect()
}

fn counts(file: &TimetagFile) -> Vec<u64> {
    let mut c = vec![0u64; file.channel_count as usize];
    for t in &file.tags {
        c[t.channel as usize] += 1;
    }
    c
}

fn sde(a: &SdeArgs, ctx: &Context) -> Result<()> {
    let started = Instant::now();
    let cfg_path = a.batch.join(CONFIG_FILE);
    let cfg = load_config(&cfg_path)?.validate()?;
    let rows = read_batch(&a.batch)?;
    let n = cfg.channel_count();

    // bias -> (light rates, dark rates)
    let mut by_bias: BTreeMap<u64, (f64, Option<Vec<f64>>, Option<Vec<f64>>)> = BTreeMap::new();
    for r in &rows {
        let file = read_tags(&r.file)?;
        if file.channel_count as usize != n {
            bail!("{}: {} channels, config has {n}", r.file.display(), file.channel_count);
        }
        let rates: Vec<f64> = counts(&file).iter().map(|&c| c as f64 / r.duration).collect();
        let e = by_bias.entry(r.bias.to_bits()).or_insert((r.bias, None, None));
        if r.dark {
            e.2 = Some(rates);
        } else {
            e.1 = Some(rates);
        }
    }
    let points: Vec<(f64, Vec<f64>, Vec<f64>)> = by_bias
        .into_values()
        .map(|(b, l, d)| match (l, d) {
            (Some(l), Some(d)) => Ok((b, l, d)),
            _ => Err(anyhow!("bias {b}: needs both a light and a dark run")),
        })
        .collect::<Result<_>>()?;
    let mut points = points;
    points.sort_by(|x, y| x.0.total_cmp(&y.0));
    if points.is_empty() {
        bail!("empty bias batch");
    }

    let wavelength = a.wavelength_nm * 1e-9;
    let mut result = CharacterizationResult::default();
    for (ch, vc) in cfg.channels().iter().enumerate() {
        let flux = vc.config.input_flux;
        let dead = effective_dead_time(&vc.config.detector);
        let sweep = BiasSweep::new(
            points
                .iter()
                .map(|(b, l, d)| BiasPoint {
                    bias: *b,
                    count_rate: l[ch],
                    dark_rate: d[ch],
                })
                .collect(),
        );
        let reference = sweep.ok().and_then(|s| normalize_bias(&s).ok());
        for (b, l, d) in &points {
            let sde = if flux > 0.0 { recovery_corrected_sde(l[ch], d[ch], flux, dead) } else { 0.0 };
            result.sweep.push(SweepRow {
                channel: ch,
                bias: *b,
                normalized_bias: reference.map(|r| b / r),
                count_rate: l[ch],
                dark_rate: d[ch],
                sde,
                nep: (d[ch] > 0.0 && sde > 0.0).then(|| nep(sde, d[ch], wavelength).ok()).flatten(),
            });
        }
    }
    finish("analyze sde", a.out.as_deref(), &result.sweep_csv(), ctx, Some(&cfg_path), None, started)
}

fn jitter(a: &JitterArgs, ctx: &Context) -> Result<()> {
    let started = Instant::now();
    if a.sync_period_ps == 0 {
        return Err(usage("--sync-period-ps must be positive"));
    }
    let estimator = fwhm_registry().get(&a.method).map_err(|e| usage(e.to_string()))?;
    let file = read_tags(&a.timetags)?;
    let events = per_channel(&file);
    let selected: Vec<usize> = if a.channel.is_empty() { (0..events.len()).collect() } else { a.channel.clone() };
    for &c in &selected {
        check_channel(c, events.len())?;
    }
    if a.histogram.is_some() && selected.len() != 1 {
        return Err(usage("--histogram needs exactly one --channel"));
    }
    let mut csv = String::from("channel,events,bin_ps,fwhm_ps\n");
    let mut seen = 0usize;
    for &c in &selected {
        let ev = &events[c];
        if ev.is_empty() {
            if !a.channel.is_empty() {
                bail!("channel {c}: empty stream");
            }
            csv.push_str(&format!("{c},0,,\n"));
            continue;
        }
        seen += 1;
        let h = jitter_histogram(ev, a.sync_period_ps, a.bin_ps).map_err(|e| anyhow!("channel {c}: {e}"))?;
        let w = estimator.fwhm(&h).map(|f| format!("{:.3}", f * 1e12)).unwrap_or_default();
        csv.push_str(&format!("{c},{},{},{w}\n", ev.len(), h.bin_width_ps));
        if let Some(p) = &a.histogram {
            write_file(p, h.to_csv())?;
        }
    }
    if seen == 0 {
        bail!("empty stream: no events in the selected channels");
    }
    finish("analyze jitter", a.out.as_deref(), &csv, ctx, None, None, started)
}

fn iat(a: &IatArgs, ctx: &Context) -> Result<()> {
    let started = Instant::now();
    if a.bin_ps == 0 || a.max_lag_ps == 0 {
        return Err(usage("--bin-ps and --max-lag-ps must be positive"));
    }
    let file = read_tags(&a.timetags)?;
    check_channel(a.channel, file.channel_count as usize)?;
    let ev = per_channel(&file).swap_remove(a.channel);
    if ev.is_empty() {
        bail!("channel {}: empty stream", a.channel);
    }
    let h = interarrival_histogram(&ev, Binning::covering(a.bin_ps, a.max_lag_ps), a.max_lag_ps);
    finish("analyze iat", a.out.as_deref(), &h.to_csv(), ctx, None, None, started)
}

fn rate(a: &RateArgs, ctx: &Context) -> Result<()> {
    let started = Instant::now();
    let (path, cfg) = load_validated(&a.config, ctx.seed(a.seed), None)?;
    check_channel(a.channel, cfg.channel_count())?;
    if a.fluxes.is_empty() {
        return Err(usage("--fluxes is empty"));
    }
    let scan = max_sustained_rate(&cfg.channels()[a.channel].config, &a.fluxes, a.duration, cfg.seed())?;
    finish("analyze rate", a.out.as_deref(), &scan.to_csv(), ctx, Some(&path), Some(cfg.seed()), started)
}

fn crosstalk_csv(est: &[CrosstalkEstimate]) -> String {
    let mut s = format!("{}\n", CrosstalkEstimate::csv_header());
    for e in est {
        s.push_str(&e.csv_row());
        s.push('\n');
    }
    s
}

fn crosstalk(a: &CrosstalkArgs, ctx: &Context) -> Result<()> {
    let started = Instant::now();
    let (path, cfg) = load_validated(&a.config, ctx.seed(a.seed), a.duration)?;
    let victims: Vec<usize> = if a.victims.is_empty() { (0..cfg.channel_count()).collect() } else { a.victims.clone() };
    let est = measure_crosstalk(&cfg, &victims)?;
    finish("analyze crosstalk", a.out.as_deref(), &crosstalk_csv(&est), ctx, Some(&path), Some(cfg.seed()), started)
}

fn metrics(a: &MetricsArgs, ctx: &Context) -> Result<()> {
    let started = Instant::now();
    let (path, cfg) = load_validated(&a.config, ctx.seed(a.seed), None)?;
    let channels: Vec<usize> = if a.channels.is_empty() { (0..cfg.channel_count()).collect() } else { a.channels.clone() };
    let settings = CampaignSettings {
        fwhm_method: a.fwhm_method.clone(),
        ..CampaignSettings::default()
    };
    let res = characterize(&cfg, &channels, &settings)?;
    let out = &a.out;
    write_file(&out.join(METRICS_FILE), res.metrics.to_csv())?;
    write_file(&out.join("sweep.csv"), res.sweep_csv())?;
    write_file(&out.join("jitter.csv"), res.jitter_csv())?;
    write_file(&out.join("rate.csv"), res.rate_csv())?;
    if !a.crosstalk_victims.is_empty() {
        let est = measure_crosstalk(&cfg, &a.crosstalk_victims)?;
        write_file(&out.join(CROSSTALK_FILE), crosstalk_csv(&est))?;
    }
    write_file(&out.join(CONFIG_FILE), cfg.config().to_toml())?;
    stdout(&res.metrics.to_table())?;
    RunManifest::new("analyze metrics", ctx, Some(&path), Some(cfg.seed()), out, started).write(true)
}
