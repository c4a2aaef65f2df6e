use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context as _, Result};
use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::args::{Cli, ReplayArgs};
use crate::{execute, usage, write_file, Context};

/// Provenance of one output set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name.
    pub args: Vec<String>,
    pub config_path: Option<PathBuf>,
    /// Seed actually used, after environment and config fallbacks.
    pub seed: Option<u64>,
    pub output: PathBuf,
    pub tool_version: String,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, ctx: &Context, config_path: Option<&Path>, seed: Option<u64>, output: &Path, started: Instant) -> Self {
        RunManifest {
            command: command.to_string(),
            args: ctx.argv.clone(),
            config_path: config_path.map(Path::to_path_buf),
            seed,
            output: output.to_path_buf(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: started.elapsed().as_secs_f64(),
        }
    }

    /// `DIR/manifest.json` for a directory output, `FILE.manifest.json` otherwise.
    pub fn location(output: &Path, is_dir: bool) -> PathBuf {
        if is_dir {
            output.join("manifest.json")
        } else {
            let mut s = output.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
    }

    pub fn write(&self, is_dir: bool) -> Result<()> {
        let json = serde_json::to_string_pretty(self).context("serializing manifest")?;
        write_file(&Self::location(&self.output, is_dir), json + "\n")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("manifest {}: {e}", path.display())))
    }
}

/// Replaces (or appends) the `--out` value of an argument list.
fn with_out(args: &[String], out: &Path) -> Vec<String> {
    let out = out.to_string_lossy().into_owned();
    let mut res = Vec::with_capacity(args.len() + 2);
    let mut replaced = false;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
            res.extend(["--out".to_string(), out.clone()]);
            replaced = true;
        } else if a.starts_with("--out=") {
            res.push(format!("--out={out}"));
            replaced = true;
        } else {
            res.push(a.clone());
        }
    }
    if !replaced {
        res.extend(["--out".to_string(), out]);
    }
    res
}

pub fn replay(args: &ReplayArgs) -> Result<()> {
    let m = RunManifest::read(&args.manifest)?;
    if m.args.first().map(String::as_str) == Some("replay") {
        return Err(usage("manifest records a replay"));
    }
    let argv = match &args.out {
        Some(out) => with_out(&m.args, out),
        None => m.args.clone(),
    };
    let cli = Cli::try_parse_from(std::iter::once("snspd-lab".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| usage(format!("manifest arguments no longer parse: {e}")))?;
    let ctx = Context {
        argv,
        seed_override: m.seed,
    };
    execute(&cli, &ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn out_replaced_or_appended() {
        let p = Path::new("/tmp/x");
        assert_eq!(with_out(&s(&["simulate", "--out", "a", "c.toml"]), p), s(&["simulate", "--out", "/tmp/x", "c.toml"]));
        assert_eq!(with_out(&s(&["plan", "--out=a"]), p), s(&["plan", "--out=/tmp/x"]));
        assert_eq!(with_out(&s(&["report", "d"]), p), s(&["report", "d", "--out", "/tmp/x"]));
    }

    #[test]
    fn manifest_location() {
        assert_eq!(RunManifest::location(Path::new("o"), true), Path::new("o/manifest.json"));
        assert_eq!(RunManifest::location(Path::new("o/a.csv"), false), Path::new("o/a.csv.manifest.json"));
    }
}
