use itertools::Itertools;
use rand::Rng;
use rayon::prelude::*;

use super::channel::{simulate_channel, ChannelReport, EventStream};
use super::source::{poisson_arrivals, source_registry};
use crate::dynamics::{dark_rate, jitter_sigma};
use crate::model::{seconds_to_ps, substream_rng, StreamKind, TimeTag, ValidatedConfig};
use crate::tcspc::{add_gaussian_jitter, apply_tcspc};

/// Total crosstalk candidate rate into `target`: Σ_k flux_k · 10^(X[target][k]/10).
pub fn crosstalk_rate(config: &ValidatedConfig, target: usize) -> f64 {
    config
        .channels()
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != target)
        .map(|(k, ch)| ch.delivered_flux * config.crosstalk_linear(target, k))
        .sum()
}

/// Crosstalk candidates into `target`, as the superposition of one Poisson
/// process per source channel (itself a Poisson process at the summed rate).
pub fn crosstalk_arrivals<R: Rng + ?Sized>(config: &ValidatedConfig, target: usize, rng: &mut R) -> Vec<f64> {
    poisson_arrivals(crosstalk_rate(config, target), config.duration(), rng)
}

/// Everything produced for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRun {
    pub stream: EventStream,
    pub report: ChannelReport,
    /// Recorded timestamps after detector jitter and the time-tagger, ps, sorted.
    pub tags_ps: Vec<u64>,
}

/// Simulates one channel of a validated configuration end to end.
///
/// Every random draw comes from a substream keyed by (seed, channel, kind), so
/// the result does not depend on which other channels run or in what order.
pub fn run_channel(config: &ValidatedConfig, index: usize) -> ChannelRun {
    let ch = &config.channels()[index];
    let cfg = &ch.config;
    let seed = config.seed();
    let duration = config.duration();
    let source = source_registry()
        .get(&config.source().kind)
        .expect("validated source kind");

    let transmission = if cfg.input_flux > 0.0 { ch.delivered_flux / cfg.input_flux } else { 0.0 };
    let photons = source.arrivals(
        cfg.input_flux,
        transmission,
        duration,
        config.source(),
        &mut substream_rng(seed, index, StreamKind::Photon),
    );
    let darks = poisson_arrivals(
        dark_rate(&cfg.detector, cfg.i_set),
        duration,
        &mut substream_rng(seed, index, StreamKind::Dark),
    );
    let crosstalk = crosstalk_arrivals(config, index, &mut substream_rng(seed, index, StreamKind::Crosstalk));
    let (stream, mut report) = simulate_channel(
        cfg,
        &photons,
        &darks,
        &crosstalk,
        &mut substream_rng(seed, index, StreamKind::Detection),
    );

    // zero bias leaves only the intrinsic term
    let sigma = jitter_sigma(&cfg.detector, &cfg.readout, cfg.i_set).unwrap_or(cfg.detector.sigma_intrinsic);
    let mut jittered = stream.times.clone();
    add_gaussian_jitter(&mut jittered, sigma, &mut substream_rng(seed, index, StreamKind::Jitter));
    jittered.sort_by(f64::total_cmp);
    let recorded = apply_tcspc(&jittered, &cfg.readout, &mut substream_rng(seed, index, StreamKind::Tcspc));
    let tags_ps: Vec<u64> = recorded.into_iter().filter_map(seconds_to_ps).collect();
    report.recorded_counts = tags_ps.len() as u64;

    ChannelRun {
        stream,
        report,
        tags_ps,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverOutput {
    /// All channels, globally sorted by (time, channel).
    pub tags: Vec<TimeTag>,
    pub report: SimReport,
}

/// Simulates every channel (in parallel on the current rayon pool) and merges
/// the recorded streams. Output is bit-identical for a fixed configuration,
/// whatever the thread count.
pub fn simulate_receiver(config: &ValidatedConfig) -> ReceiverOutput {
    let runs: Vec<ChannelRun> = (0..config.channel_count())
        .into_par_iter()
        .map(|i| run_channel(config, i))
        .collect();
    let rows = runs.iter().map(|r| r.report.clone()).collect();
    let tags = runs
        .iter()
        .map(|r| {
            let ch = r.report.channel as u16;
            r.tags_ps.iter().map(move |&t| TimeTag::new(ch, t))
        })
        .kmerge()
        .collect();
    ReceiverOutput {
        tags,
        report: SimReport { rows },
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimReport {
    pub rows: Vec<ChannelReport>,
}

pub const SIM_REPORT_HEADER: &str = "channel,photon_counts,dark_counts,crosstalk_counts,latched,latch_time_ps,recorded_counts,configured_flux_hz,delivered_flux_hz";

#[derive(Debug, thiserror::Error)]
#[error("sim report line {line}: {message}")]
pub struct ReportParseError {
    pub line: usize,
    pub message: String,
}

impl SimReport {
    pub fn total_recorded(&self) -> u64 {
        self.rows.iter().map(|r| r.recorded_counts).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(SIM_REPORT_HEADER);
        s.push('\n');
        for r in &self.rows {
            let latch = r
                .latch_time
                .and_then(seconds_to_ps)
                .map(|p| p.to_string())
                .unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{:e},{:e}\n",
                r.channel,
                r.photon_counts,
                r.dark_counts,
                r.crosstalk_counts,
                r.latched,
                latch,
                r.recorded_counts,
                r.configured_flux,
                r.delivered_flux
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<SimReport, ReportParseError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = rdr
            .headers()
            .map_err(|e| ReportParseError { line: 1, message: e.to_string() })?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != SIM_REPORT_HEADER {
            return Err(ReportParseError {
                line: 1,
                message: format!("unexpected header '{header}'"),
            });
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let err = |m: String| ReportParseError { line, message: m };
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let int = |i: usize| field(i).parse::<u64>().map_err(|e| err(format!("column {i}: {e}")));
            let float = |i: usize| field(i).parse::<f64>().map_err(|e| err(format!("column {i}: {e}")));
            let latch_time = match field(5) {
                "" => None,
                v => Some(v.parse::<u64>().map_err(|e| err(format!("latch_time_ps: {e}")))? as f64 * 1e-12),
            };
            rows.push(ChannelReport {
                channel: int(0)? as usize,
                photon_counts: int(1)?,
                dark_counts: int(2)?,
                crosstalk_counts: int(3)?,
                latched: field(4).parse::<bool>().map_err(|e| err(format!("latched: {e}")))?,
                latch_time,
                recorded_counts: int(6)?,
                configured_flux: float(7)?,
                delivered_flux: float(8)?,
            });
        }
        Ok(SimReport { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ReceiverConfig;

    #[test]
    fn crosstalk_rate_sums_sources() {
        let mut cfg = ReceiverConfig::uniform(64);
        for ch in &mut cfg.channels {
            ch.input_flux = 1e6;
        }
        let v = cfg.validate().unwrap();
        assert!((crosstalk_rate(&v, 5) - 63.0).abs() < 1e-9);

        let mut two = ReceiverConfig::uniform(2);
        two.channels[0].input_flux = 0.0;
        two.channels[1].input_flux = 1e6;
        let v = two.validate().unwrap();
        assert!((crosstalk_rate(&v, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_csv_round_trip() {
        let mut cfg = ReceiverConfig::uniform(3);
        cfg.duration = 1e-3;
        cfg.channels[2].i_set = 1.1; // latches
        let out = simulate_receiver(&cfg.validate().unwrap());
        assert!(out.report.rows[2].latched);
        let csv = out.report.to_csv();
        assert!(csv.starts_with(SIM_REPORT_HEADER));
        let back = SimReport::from_csv(&csv).unwrap();
        assert_eq!(back.rows.len(), 3);
        for (a, b) in back.rows.iter().zip(&out.report.rows) {
            assert_eq!(a.photon_counts, b.photon_counts);
            assert_eq!(a.recorded_counts, b.recorded_counts);
            assert_eq!(a.latched, b.latched);
            assert_eq!(a.latch_time.and_then(seconds_to_ps), b.latch_time.and_then(seconds_to_ps));
        }
    }

    #[test]
    fn merged_tags_sorted_and_counted() {
        let mut cfg = ReceiverConfig::uniform(8);
        cfg.duration = 2e-3;
        let out = simulate_receiver(&cfg.validate().unwrap());
        assert!(out.tags.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(out.tags.len() as u64, out.report.total_recorded());
        for r in &out.report.rows {
            assert!(r.recorded_counts <= r.detected());
        }
    }
}
