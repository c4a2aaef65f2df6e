use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context as _, Result};
use snspd_core::analysis::{CrosstalkEstimate, MetricReport};
use snspd_core::report::evaluate_anchors;

use crate::analyze::{CROSSTALK_FILE, METRICS_FILE};
use crate::args::ReportArgs;
use crate::{stdout, write_file, Context, RunManifest};

fn read_optional(path: &Path) -> Result<Option<String>> {
    match std::fs::read_to_string(path) {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e).with_context(|| format!("reading {}", path.display())),
    }
}

pub fn run(a: &ReportArgs, ctx: &Context) -> Result<()> {
    let started = Instant::now();
    let metrics_path = a.dir.join(METRICS_FILE);
    let Some(text) = read_optional(&metrics_path)? else {
        return Err(anyhow!(
            "missing inputs in {}: expected {METRICS_FILE} (required) and {CROSSTALK_FILE} (optional), \
             as written by `analyze metrics`",
            a.dir.display()
        ));
    };
    let metrics = MetricReport::from_csv(&text).map_err(|e| anyhow!("{}: {e}", metrics_path.display()))?;
    let crosstalk_path = a.dir.join(CROSSTALK_FILE);
    let crosstalk: Option<Vec<(usize, f64)>> = match read_optional(&crosstalk_path)? {
        Some(t) => Some(
            CrosstalkEstimate::from_csv(&t)
                .map_err(|e| anyhow!("{}: {e}", crosstalk_path.display()))?
                .iter()
                .filter_map(|e| e.cumulative_db.map(|db| (e.victim, db)))
                .collect(),
        ),
        None => None,
    };
    let report = evaluate_anchors(&metrics, crosstalk.as_deref());
    let out = a.out.clone().unwrap_or_else(|| a.dir.join("report"));
    write_file(&out.join("anchors.csv"), report.to_csv())?;
    let verdict = if report.all_pass() { "PASS" } else { "FAIL" };
    stdout(&format!("{}overall: {verdict}\n", report.to_table()))?;
    RunManifest::new("report", ctx, None, None, &out, started).write(true)
}
