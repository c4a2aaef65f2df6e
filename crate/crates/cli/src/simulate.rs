use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context as _, Result};
use snspd_core::model::{ReceiverConfig, ValidatedConfig};
use snspd_core::sim::simulate_receiver;
use snspd_core::tcspc::write_timetags;

use crate::args::{parse_bias_sweep, SimulateArgs};
use crate::{config_path, load_config, usage, write_file, Context, RunManifest};

pub const TIMETAG_FILE: &str = "timetags.sntt";
pub const REPORT_FILE: &str = "sim_report.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const BATCH_INDEX: &str = "sweep.csv";
pub const BATCH_HEADER: &str = "bias,kind,duration_s,file";

fn write_tags(path: &Path, cfg: &ValidatedConfig, tags: &[snspd_core::model::TimeTag]) -> Result<()> {
    let n = u16::try_from(cfg.channel_count()).map_err(|_| usage("more than 65535 channels"))?;
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_timetags(BufWriter::new(f), n, tags).with_context(|| format!("writing {}", path.display()))
}

fn simulate_once(cfg: &ValidatedConfig, dir: &Path, tag_file: &str, report_file: Option<&str>) -> Result<usize> {
    let out = simulate_receiver(cfg);
    write_tags(&dir.join(tag_file), cfg, &out.tags)?;
    if let Some(r) = report_file {
        write_file(&dir.join(r), out.report.to_csv())?;
    }
    Ok(out.tags.len())
}

fn at_bias(cfg: &ReceiverConfig, bias: f64, dark: bool, duration: f64, seed: u64) -> ReceiverConfig {
    let mut c = cfg.clone();
    for ch in &mut c.channels {
        ch.i_set = bias;
        if dark {
            ch.input_flux = 0.0;
        }
    }
    c.duration = duration;
    c.seed = seed;
    c
}

pub fn run(a: &SimulateArgs, ctx: &Context) -> Result<()> {
    let started = Instant::now();
    let path = config_path(&a.config.config_pos, &a.config.config_flag)?;
    let mut cfg = load_config(&path)?;
    if let Some(d) = a.duration {
        cfg.duration = d;
    }
    if let Some(s) = ctx.seed(a.seed) {
        cfg.seed = s;
    }
    let validated = cfg.clone().validate()?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    match &a.bias_sweep {
        None => {
            let n = simulate_once(&validated, &a.out, TIMETAG_FILE, Some(REPORT_FILE))?;
            eprintln!("{n} timetags from {} channels -> {}", validated.channel_count(), a.out.display());
        }
        Some(spec) => {
            let biases = parse_bias_sweep(spec).map_err(usage)?;
            let dark_duration = a.dark_duration.unwrap_or(cfg.duration);
            let mut index = format!("{BATCH_HEADER}\n");
            for (k, &b) in biases.iter().enumerate() {
                let k = k as u64;
                for (dark, duration, offset) in [(false, cfg.duration, 2 * k), (true, dark_duration, 2 * k + 1)] {
                    let run = at_bias(&cfg, b, dark, duration, cfg.seed.wrapping_add(offset)).validate()?;
                    let kind = if dark { "dark" } else { "light" };
                    let file = format!("{kind}_{b:.4}.sntt");
                    simulate_once(&run, &a.out, &file, None)?;
                    index.push_str(&format!("{b},{kind},{duration},{file}\n"));
                }
            }
            write_file(&a.out.join(BATCH_INDEX), index)?;
            eprintln!("{} bias points -> {}", biases.len(), a.out.display());
        }
    }
    write_file(&a.out.join(CONFIG_FILE), validated.config().to_toml())?;
    RunManifest::new("simulate", ctx, Some(&path), Some(validated.seed()), &a.out, started).write(true)
}
