//! Comparison of measured metrics against the reference anchor values.

use std::fmt::Write as _;

use crate::analysis::{ChannelMetrics, MetricReport};

pub const SDE_REGULAR: (f64, f64) = (0.30, 0.60);
pub const SDE_ALIGNMENT: (f64, f64) = (0.20, 0.30);
pub const NEP_BOUND: f64 = 5e-17;
pub const H_BOUND: f64 = 1e7;
/// Packaged-system jitter at 90 % of the reference bias, seconds, and tolerance.
pub const PACKAGED_JITTER: (f64, f64) = (110e-12, 20e-12);
pub const CUMULATIVE_CROSSTALK_BOUND_DB: f64 = -40.0;
pub const MAX_RATE_BOUND: f64 = 2e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// No data to evaluate.
    Skipped,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorCheck {
    pub anchor: &'static str,
    pub target: String,
    pub achieved: String,
    pub status: Status,
    /// Channels that violate the anchor.
    pub offenders: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnchorReport {
    pub checks: Vec<AnchorCheck>,
}

impl AnchorReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("anchor,target,achieved,status,offending_channels\n");
        for c in &self.checks {
            let off = c.offenders.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(" ");
            let _ = writeln!(s, "{},{},{},{},{}", c.anchor, c.target, c.achieved, c.status.label(), off);
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<28} {:<22} {:<34} {}\n", "anchor", "target", "achieved", "status");
        for c in &self.checks {
            let _ = writeln!(s, "{:<28} {:<22} {:<34} {}", c.anchor, c.target, c.achieved, c.status.label());
            if !c.offenders.is_empty() {
                let _ = writeln!(s, "{:<28} offending channels: {:?}", "", c.offenders);
            }
        }
        s
    }
}

fn range_check<F>(
    anchor: &'static str,
    target: String,
    rows: &[&ChannelMetrics],
    value: F,
    ok: impl Fn(f64) -> bool,
    fmt: impl Fn(f64) -> String,
) -> AnchorCheck
where
    F: Fn(&ChannelMetrics) -> Option<f64>,
{
    let vals: Vec<(usize, f64)> = rows.iter().filter_map(|r| value(r).map(|v| (r.channel, v))).collect();
    if vals.is_empty() {
        return AnchorCheck {
            anchor,
            target,
            achieved: "no data".into(),
            status: Status::Skipped,
            offenders: Vec::new(),
        };
    }
    let lo = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let hi = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let offenders: Vec<usize> = vals.iter().filter(|v| !ok(v.1)).map(|v| v.0).collect();
    AnchorCheck {
        anchor,
        target,
        achieved: format!("{}..{} over {} ch", fmt(lo), fmt(hi), vals.len()),
        status: if offenders.is_empty() { Status::Pass } else { Status::Fail },
        offenders,
    }
}

/// Evaluates every anchor. `crosstalk_cumulative_db` holds one extrapolated
/// cumulative crosstalk value per measured victim, if a crosstalk run exists.
pub fn evaluate_anchors(metrics: &MetricReport, crosstalk_cumulative_db: Option<&[(usize, f64)]>) -> AnchorReport {
    let regular: Vec<&ChannelMetrics> = metrics.rows.iter().filter(|r| !r.alignment).collect();
    let alignment: Vec<&ChannelMetrics> = metrics.rows.iter().filter(|r| r.alignment).collect();
    let all: Vec<&ChannelMetrics> = metrics.rows.iter().collect();
    let pct = |v: f64| format!("{:.1}%", v * 100.0);
    let sci = |v: f64| format!("{v:.2e}");

    let mut checks = vec![
        range_check(
            "sde_regular",
            format!("{}..{}", pct(SDE_REGULAR.0), pct(SDE_REGULAR.1)),
            &regular,
            |r| Some(r.sde),
            |v| (SDE_REGULAR.0..=SDE_REGULAR.1).contains(&v),
            pct,
        ),
        range_check(
            "sde_alignment",
            format!("{}..{}", pct(SDE_ALIGNMENT.0), pct(SDE_ALIGNMENT.1)),
            &alignment,
            |r| Some(r.sde),
            |v| (SDE_ALIGNMENT.0..=SDE_ALIGNMENT.1).contains(&v),
            pct,
        ),
        range_check(
            "nep_min",
            format!("< {NEP_BOUND:.0e} W/rtHz"),
            &all,
            |r| r.nep,
            |v| v < NEP_BOUND,
            sci,
        ),
        range_check(
            "figure_of_merit_h",
            format!("> {H_BOUND:.0e}"),
            &all,
            |r| r.h,
            |v| v > H_BOUND,
            sci,
        ),
        range_check(
            "jitter_at_90pct_bias",
            format!("{:.0} ± {:.0} ps", PACKAGED_JITTER.0 * 1e12, PACKAGED_JITTER.1 * 1e12),
            &all,
            |r| r.jitter_fwhm,
            |v| (v - PACKAGED_JITTER.0).abs() <= PACKAGED_JITTER.1,
            |v| format!("{:.1} ps", v * 1e12),
        ),
        range_check(
            "max_count_rate",
            format!("> {MAX_RATE_BOUND:.0e} /s"),
            &all,
            |r| r.max_count_rate,
            |v| v > MAX_RATE_BOUND,
            sci,
        ),
    ];

    checks.push(match crosstalk_cumulative_db {
        Some(vals) if !vals.is_empty() => {
            let worst = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
            let offenders: Vec<usize> =
                vals.iter().filter(|v| v.1 >= CUMULATIVE_CROSSTALK_BOUND_DB).map(|v| v.0).collect();
            AnchorCheck {
                anchor: "cumulative_crosstalk",
                target: format!("< {CUMULATIVE_CROSSTALK_BOUND_DB} dB"),
                achieved: format!("worst {worst:.1} dB over {} victims", vals.len()),
                status: if offenders.is_empty() { Status::Pass } else { Status::Fail },
                offenders,
            }
        }
        _ => AnchorCheck {
            anchor: "cumulative_crosstalk",
            target: format!("< {CUMULATIVE_CROSSTALK_BOUND_DB} dB"),
            achieved: "not measured".into(),
            status: Status::Skipped,
            offenders: Vec::new(),
        },
    });
    AnchorReport { checks }
}
