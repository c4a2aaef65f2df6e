use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::{
    bias::{min_nep_index, normalize_bias, BiasPoint, BiasSweep},
    dead_time_corrected_rate, efficiency_uncertainty, figure_of_merit,
    fwhm::{fwhm_registry, jitter_histogram},
    nep,
    rate::{max_sustained_rate, RateScan},
    CALIBRATION_U_AL, CALIBRATION_U_LS, CALIBRATION_U_PM, TELECOM_WAVELENGTH,
};
use crate::dynamics::effective_dead_time;
use crate::model::{
    substream_seed, uniform_crosstalk, ChannelConfig, ConfigError, ReceiverConfig, SourceSpec, StreamKind,
    ValidatedConfig, DEFAULT_CROSSTALK_DB, REFERENCE_FLUX,
};
use crate::sim::run_channel;

/// Knobs of a characterization run. Defaults trade statistics for run time.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSettings {
    /// Bias set-points of the count-rate sweep, strictly increasing.
    pub bias_grid: Vec<f64>,
    pub flux: f64,
    pub light_duration: f64,
    pub dark_duration: f64,
    /// Operating point as a fraction of the reference bias.
    pub operating_fraction: f64,
    /// Fractions of the reference bias for the jitter-vs-bias series.
    pub jitter_fractions: Vec<f64>,
    /// Pulse rate of the jitter runs; 1e12/rate must be an integer number of ps.
    pub jitter_pulse_rate: f64,
    pub jitter_duration: f64,
    pub fwhm_method: String,
    pub rate_fluxes: Vec<f64>,
    pub rate_duration: f64,
    pub wavelength: f64,
}

impl Default for CampaignSettings {
    fn default() -> Self {
        CampaignSettings {
            bias_grid: (0..=17).map(|k| (70 + 2 * k) as f64 / 100.0).collect(),
            flux: REFERENCE_FLUX,
            light_duration: 0.05,
            dark_duration: 1.0,
            operating_fraction: 0.9,
            jitter_fractions: vec![0.8, 0.9, 1.0],
            jitter_pulse_rate: 1e6,
            jitter_duration: 0.25,
            fwhm_method: "linear".into(),
            rate_fluxes: vec![1e6, 1e7, 1e8, 1e9],
            rate_duration: 2e-4,
            wavelength: TELECOM_WAVELENGTH,
        }
    }
}

/// One channel's summary, the row of a [`MetricReport`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelMetrics {
    pub channel: usize,
    pub alignment: bool,
    /// Bias where dark counts are 10 % of the count rate; `None` if not bracketed.
    pub reference_bias: Option<f64>,
    /// SDE at the reference bias (plateau).
    pub sde: f64,
    pub sde_uncertainty: f64,
    pub min_nep_bias: Option<f64>,
    pub sde_at_min_nep: Option<f64>,
    pub dcr_at_min_nep: Option<f64>,
    pub nep: Option<f64>,
    pub operating_bias: f64,
    pub sde_operating: f64,
    pub dcr_operating: f64,
    pub jitter_fwhm: Option<f64>,
    pub h: Option<f64>,
    pub max_count_rate: Option<f64>,
    pub latch_flux: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub rows: Vec<ChannelMetrics>,
}

const METRIC_COLUMNS: [&str; 16] = [
    "channel",
    "alignment",
    "reference_bias",
    "sde",
    "sde_uncertainty",
    "min_nep_bias",
    "sde_at_min_nep",
    "dcr_at_min_nep_hz",
    "nep_w_per_rthz",
    "operating_bias",
    "sde_operating",
    "dcr_operating_hz",
    "jitter_fwhm_ps",
    "h",
    "max_count_rate_hz",
    "latch_flux_hz",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let mut s = METRIC_COLUMNS.join(",");
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:e},{:e},{},{},{},{},{:e},{:e},{:e},{},{},{},{}",
                r.channel,
                r.alignment,
                opt(r.reference_bias),
                r.sde,
                r.sde_uncertainty,
                opt(r.min_nep_bias),
                opt(r.sde_at_min_nep),
                opt(r.dcr_at_min_nep),
                opt(r.nep),
                r.operating_bias,
                r.sde_operating,
                r.dcr_operating,
                opt(r.jitter_fwhm.map(|j| j * 1e12)),
                opt(r.h),
                opt(r.max_count_rate),
                opt(r.latch_flux),
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<MetricReport, String> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
        let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
        for c in METRIC_COLUMNS {
            if !index.contains_key(c) {
                return Err(format!("missing column '{c}'"));
            }
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| format!("line {line}: {e}"))?;
            let get = |c: &str| rec.get(index[c]).unwrap_or("").trim();
            let num = |c: &str| -> Result<f64, String> {
                get(c).parse::<f64>().map_err(|e| format!("line {line}, column {c}: {e}"))
            };
            let maybe = |c: &str| -> Result<Option<f64>, String> {
                match get(c) {
                    "" => Ok(None),
                    v => v.parse::<f64>().map(Some).map_err(|e| format!("line {line}, column {c}: {e}")),
                }
            };
            rows.push(ChannelMetrics {
                channel: get("channel").parse().map_err(|e| format!("line {line}, column channel: {e}"))?,
                alignment: get("alignment").parse().map_err(|e| format!("line {line}, column alignment: {e}"))?,
                reference_bias: maybe("reference_bias")?,
                sde: num("sde")?,
                sde_uncertainty: num("sde_uncertainty")?,
                min_nep_bias: maybe("min_nep_bias")?,
                sde_at_min_nep: maybe("sde_at_min_nep")?,
                dcr_at_min_nep: maybe("dcr_at_min_nep_hz")?,
                nep: maybe("nep_w_per_rthz")?,
                operating_bias: num("operating_bias")?,
                sde_operating: num("sde_operating")?,
                dcr_operating: num("dcr_operating_hz")?,
                jitter_fwhm: maybe("jitter_fwhm_ps")?.map(|p| p * 1e-12),
                h: maybe("h")?,
                max_count_rate: maybe("max_count_rate_hz")?,
                latch_flux: maybe("latch_flux_hz")?,
            });
        }
        Ok(MetricReport { rows })
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let f = |v: Option<f64>, scale: f64, prec: usize| match v {
            Some(x) => format!("{:.*}", prec, x * scale),
            None => "-".into(),
        };
        let e = |v: Option<f64>| v.map(|x| format!("{x:.2e}")).unwrap_or_else(|| "-".into());
        let mut s = format!(
            "{:>4} {:>5} {:>7} {:>14} {:>10} {:>10} {:>9} {:>10} {:>11}\n",
            "ch", "align", "SDE", "±", "DCR(op)Hz", "NEP W/rtHz", "jitter ps", "H", "max rate/s"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>4} {:>5} {:>7.4} {:>14.4} {:>10.1} {:>10} {:>9} {:>10} {:>11}",
                r.channel,
                if r.alignment { "yes" } else { "" },
                r.sde,
                r.sde_uncertainty,
                r.dcr_operating,
                e(r.nep),
                f(r.jitter_fwhm, 1e12, 1),
                e(r.h),
                e(r.max_count_rate),
            );
        }
        s.push_str("NEP = (h·c/λ)/η · sqrt(2·DCR), evaluated at the minimal-NEP bias of each sweep.\n");
        s
    }
}

/// One sample of a channel's bias sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub channel: usize,
    pub bias: f64,
    pub normalized_bias: Option<f64>,
    pub count_rate: f64,
    pub dark_rate: f64,
    pub sde: f64,
    pub nep: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CharacterizationResult {
    pub metrics: MetricReport,
    pub sweep: Vec<SweepRow>,
    /// (channel, bias, normalized bias, FWHM seconds)
    pub jitter: Vec<(usize, f64, f64, Option<f64>)>,
    pub rates: Vec<(usize, RateScan)>,
}

impl CharacterizationResult {
    pub fn sweep_csv(&self) -> String {
        let mut s = String::from("channel,bias,normalized_bias,count_rate_hz,dark_rate_hz,sde,nep_w_per_rthz\n");
        for r in &self.sweep {
            let _ = writeln!(
                s,
                "{},{},{},{:e},{:e},{:e},{}",
                r.channel,
                r.bias,
                opt(r.normalized_bias),
                r.count_rate,
                r.dark_rate,
                r.sde,
                opt(r.nep)
            );
        }
        s
    }

    pub fn jitter_csv(&self) -> String {
        let mut s = String::from("channel,bias,normalized_bias,jitter_fwhm_ps\n");
        for (ch, bias, norm, j) in &self.jitter {
            let _ = writeln!(s, "{ch},{bias},{norm},{}", opt(j.map(|v| v * 1e12)));
        }
        s
    }

    pub fn rate_csv(&self) -> String {
        let mut s = String::from("channel,flux_hz,rate_hz,latched\n");
        for (ch, scan) in &self.rates {
            for p in &scan.points {
                let _ = writeln!(s, "{ch},{:e},{:e},{}", p.flux, p.rate, p.latched);
            }
        }
        s
    }
}

fn run_seed(master: u64, channel: usize, tag: u64) -> u64 {
    substream_seed(master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15), channel, StreamKind::Photon)
}

fn solo(
    ch: &ChannelConfig,
    i_set: f64,
    flux: f64,
    duration: f64,
    seed: u64,
    source: SourceSpec,
) -> Result<ValidatedConfig, ConfigError> {
    let mut c = *ch;
    c.channel_id = 0;
    c.i_set = i_set;
    c.input_flux = flux;
    ReceiverConfig {
        channels: vec![c],
        crosstalk_db: uniform_crosstalk(1, DEFAULT_CROSSTALK_DB),
        duration,
        seed,
        source,
    }
    .validate()
}

fn recorded_rate(cfg: &ValidatedConfig) -> (f64, u64) {
    let run = run_channel(cfg, 0);
    (run.report.recorded_counts as f64 / cfg.duration(), run.report.recorded_counts)
}

/// SDE from light and dark rates after undoing the detector's recovery losses.
pub fn recovery_corrected_sde(cr: f64, dcr: f64, flux: f64, dead: f64) -> f64 {
    let l = dead_time_corrected_rate(cr, dead).unwrap_or(f64::INFINITY);
    let d = dead_time_corrected_rate(dcr, dead).unwrap_or(f64::INFINITY);
    match super::system_detection_efficiency(l, d, flux) {
        Ok(v) if v.is_finite() => v.clamp(0.0, 1.0),
        _ => 0.0,
    }
}

/// Jitter FWHM from a pulsed run at bias `i`; the alignment tap is bypassed
/// so the pulse period stays exact.
fn measure_jitter(
    ch: &ChannelConfig,
    i: f64,
    settings: &CampaignSettings,
    seed: u64,
) -> Result<Option<f64>, ConfigError> {
    let mut c = *ch;
    c.is_alignment_device = false;
    let source = SourceSpec {
        kind: "pulsed".into(),
        ..SourceSpec::default()
    };
    let cfg = solo(&c, i, settings.jitter_pulse_rate, settings.jitter_duration, seed, source)?;
    let run = run_channel(&cfg, 0);
    let period_ps = (1e12 / settings.jitter_pulse_rate).round() as u64;
    let estimator = fwhm_registry()
        .get(&settings.fwhm_method)
        .map_err(|e| ConfigError::Receiver {
            field: "fwhm_method",
            reason: e.to_string(),
        })?;
    Ok(jitter_histogram(&run.tags_ps, period_ps, None)
        .and_then(|h| estimator.fwhm(&h))
        .ok())
}

struct ChannelOutcome {
    metrics: ChannelMetrics,
    sweep: Vec<SweepRow>,
    jitter: Vec<(usize, f64, f64, Option<f64>)>,
    rates: RateScan,
}

fn characterize_channel(
    ch: &ChannelConfig,
    settings: &CampaignSettings,
    master: u64,
) -> Result<ChannelOutcome, ConfigError> {
    let id = ch.channel_id;
    let dead = effective_dead_time(&ch.detector);
    let flux = settings.flux;

    let mut samples = Vec::with_capacity(settings.bias_grid.len());
    for (k, &i) in settings.bias_grid.iter().enumerate() {
        let light = solo(ch, i, flux, settings.light_duration, run_seed(master, id, 2 * k as u64), SourceSpec::default())?;
        let dark = solo(ch, i, 0.0, settings.dark_duration, run_seed(master, id, 2 * k as u64 + 1), SourceSpec::default())?;
        let (cr, n_light) = recorded_rate(&light);
        let (dcr, n_dark) = recorded_rate(&dark);
        let sde = recovery_corrected_sde(cr, dcr, flux, dead);
        let nep_v = (n_dark > 0 && sde > 0.0)
            .then(|| nep(sde, dcr, settings.wavelength).ok())
            .flatten();
        samples.push((i, cr, dcr, sde, nep_v, n_light));
    }

    let sweep = BiasSweep::new(
        samples
            .iter()
            .map(|&(bias, count_rate, dark_rate, ..)| BiasPoint {
                bias,
                count_rate,
                dark_rate,
            })
            .collect(),
    );
    let reference = sweep.ok().and_then(|s| normalize_bias(&s).ok());
    let neps: Vec<Option<f64>> = samples.iter().map(|s| s.4).collect();
    let min_k = min_nep_index(&neps);

    // plateau value: sample nearest the reference bias
    let ref_bias = reference.unwrap_or(ch.i_set);
    let plateau = samples
        .iter()
        .min_by(|a, b| (a.0 - ref_bias).abs().total_cmp(&(b.0 - ref_bias).abs()))
        .copied();
    let (sde, sde_unc) = match plateau {
        Some((_, _, _, sde, _, n)) if n > 0 => {
            let u_cr = 1.0 / (n as f64).sqrt();
            (sde, sde * efficiency_uncertainty(u_cr, CALIBRATION_U_LS, CALIBRATION_U_PM, CALIBRATION_U_AL))
        }
        _ => (0.0, 0.0),
    };

    let i_op = settings.operating_fraction * ref_bias;
    let base = 2 * settings.bias_grid.len() as u64;
    let light = solo(ch, i_op, flux, settings.light_duration, run_seed(master, id, base), SourceSpec::default())?;
    let dark = solo(ch, i_op, 0.0, settings.dark_duration, run_seed(master, id, base + 1), SourceSpec::default())?;
    let (cr_op, _) = recorded_rate(&light);
    let (dcr_op, _) = recorded_rate(&dark);
    let sde_op = recovery_corrected_sde(cr_op, dcr_op, flux, dead);
    let jitter_op = measure_jitter(ch, i_op, settings, run_seed(master, id, base + 2))?;
    let h = jitter_op.and_then(|j| figure_of_merit(sde_op, dcr_op, j).ok());

    let mut jitter = Vec::with_capacity(settings.jitter_fractions.len());
    for (k, &f) in settings.jitter_fractions.iter().enumerate() {
        let i = f * ref_bias;
        let j = measure_jitter(ch, i, settings, run_seed(master, id, base + 3 + k as u64))?;
        jitter.push((id, i, f, j));
    }

    let mut at_op = *ch;
    at_op.i_set = i_op;
    let rates = max_sustained_rate(&at_op, &settings.rate_fluxes, settings.rate_duration, run_seed(master, id, base + 100))?;

    let sweep_rows = samples
        .iter()
        .map(|&(bias, count_rate, dark_rate, sde, nep, _)| SweepRow {
            channel: id,
            bias,
            normalized_bias: reference.map(|r| bias / r),
            count_rate,
            dark_rate,
            sde,
            nep,
        })
        .collect();

    Ok(ChannelOutcome {
        metrics: ChannelMetrics {
            channel: id,
            alignment: ch.is_alignment_device,
            reference_bias: reference,
            sde,
            sde_uncertainty: sde_unc,
            min_nep_bias: min_k.map(|k| samples[k].0),
            sde_at_min_nep: min_k.map(|k| samples[k].3),
            dcr_at_min_nep: min_k.map(|k| samples[k].2),
            nep: min_k.and_then(|k| samples[k].4),
            operating_bias: i_op,
            sde_operating: sde_op,
            dcr_operating: dcr_op,
            jitter_fwhm: jitter_op,
            h,
            max_count_rate: rates.peak_rate(),
            latch_flux: rates.latch_flux(),
        },
        sweep: sweep_rows,
        jitter,
        rates,
    })
}

/// Full per-channel characterization: light and dark bias sweeps, bias
/// normalization, minimal-NEP point, operating point at a fraction of the
/// reference bias (SDE, DCR, jitter, H) and a count-rate scan.
///
/// Every run is an independent single-channel simulation seeded from the
/// configuration seed, the channel id and the run's position in the campaign.
pub fn characterize(
    config: &ValidatedConfig,
    channels: &[usize],
    settings: &CampaignSettings,
) -> Result<CharacterizationResult, ConfigError> {
    fwhm_registry()
        .get(&settings.fwhm_method)
        .map_err(|e| ConfigError::Receiver {
            field: "fwhm_method",
            reason: e.to_string(),
        })?;
    for &c in channels {
        if c >= config.channel_count() {
            return Err(ConfigError::Receiver {
                field: "channels",
                reason: format!("unknown channel id {c}"),
            });
        }
    }
    let outcomes = channels
        .par_iter()
        .map(|&c| characterize_channel(&config.channels()[c].config, settings, config.seed()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = CharacterizationResult::default();
    for o in outcomes {
        out.rates.push((o.metrics.channel, o.rates));
        out.sweep.extend(o.sweep);
        out.jitter.extend(o.jitter);
        out.metrics.rows.push(o.metrics);
    }
    Ok(out)
}

/// Crosstalk seen by one dark victim channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrosstalkEstimate {
    pub victim: usize,
    /// Victim rate with the other channels illuminated, events/s.
    pub rate: f64,
    /// Victim rate with every channel dark, events/s.
    pub dark_rate: f64,
    /// Summed flux delivered to the illuminated channels, photons/s.
    pub source_flux: f64,
    pub sources: usize,
    /// Mean per-source coupling, dB; `None` if no excess counts were seen.
    pub per_channel_db: Option<f64>,
    /// Per-source coupling extrapolated to all other channels of the receiver.
    pub cumulative_db: Option<f64>,
}

impl CrosstalkEstimate {
    pub fn csv_header() -> &'static str {
        "victim,rate_hz,dark_rate_hz,source_flux_hz,sources,per_channel_db,cumulative_db"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{},{},{}",
            self.victim,
            self.rate,
            self.dark_rate,
            self.source_flux,
            self.sources,
            self.per_channel_db.map(|v| format!("{v:.3}")).unwrap_or_default(),
            self.cumulative_db.map(|v| format!("{v:.3}")).unwrap_or_default()
        )
    }

    /// Parses the output of [`Self::csv_header`] plus rows.
    pub fn from_csv(text: &str) -> Result<Vec<CrosstalkEstimate>, String> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| e.to_string())?;
        if header.iter().collect::<Vec<_>>().join(",") != Self::csv_header() {
            return Err(format!("expected header '{}'", Self::csv_header()));
        }
        let mut out = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            let line = k + 2;
            let num = |i: usize| -> Result<f64, String> {
                rec[i].parse::<f64>().map_err(|e| format!("line {line}: column {i}: {e}"))
            };
            let opt = |i: usize| -> Result<Option<f64>, String> {
                if rec[i].is_empty() {
                    Ok(None)
                } else {
                    num(i).map(Some)
                }
            };
            out.push(CrosstalkEstimate {
                victim: rec[0].parse().map_err(|e| format!("line {line}: victim: {e}"))?,
                rate: num(1)?,
                dark_rate: num(2)?,
                source_flux: num(3)?,
                sources: rec[4].parse().map_err(|e| format!("line {line}: sources: {e}"))?,
                per_channel_db: opt(5)?,
                cumulative_db: opt(6)?,
            });
        }
        Ok(out)
    }
}

/// Crosstalk onto each victim: victims are darkened, every other channel
/// keeps its configured flux, and the victim's count excess over an all-dark
/// run is referred to the summed source flux. Only the victim channels are
/// simulated; the sources enter through their delivered flux.
pub fn measure_crosstalk(config: &ValidatedConfig, victims: &[usize]) -> Result<Vec<CrosstalkEstimate>, ConfigError> {
    let n = config.channel_count();
    if let Some(&v) = victims.iter().find(|&&v| v >= n) {
        return Err(ConfigError::Receiver {
            field: "victims",
            reason: format!("unknown channel id {v}"),
        });
    }
    let mut lit = config.config().clone();
    let mut dark = config.config().clone();
    for &v in victims {
        lit.channels[v].input_flux = 0.0;
    }
    for ch in &mut dark.channels {
        ch.input_flux = 0.0;
    }
    let lit = lit.validate()?;
    let dark = dark.validate()?;
    let t = config.duration();
    Ok(victims
        .par_iter()
        .map(|&v| {
            let rate = run_channel(&lit, v).report.recorded_counts as f64 / t;
            let dark_rate = run_channel(&dark, v).report.recorded_counts as f64 / t;
            let sources: Vec<usize> = (0..n).filter(|&k| k != v && lit.channels()[k].delivered_flux > 0.0).collect();
            let source_flux: f64 = sources.iter().map(|&k| lit.channels()[k].delivered_flux).sum();
            let excess = rate - dark_rate;
            let per = (excess > 0.0 && source_flux > 0.0).then(|| 10.0 * (excess / source_flux).log10());
            CrosstalkEstimate {
                victim: v,
                rate,
                dark_rate,
                source_flux,
                sources: sources.len(),
                per_channel_db: per,
                cumulative_db: per.map(|p| p + 10.0 * ((n - 1) as f64).log10()),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_csv_round_trip() {
        let report = MetricReport {
            rows: vec![ChannelMetrics {
                channel: 3,
                alignment: true,
                reference_bias: Some(1.0),
                sde: 0.25,
                sde_uncertainty: 0.016,
                nep: Some(3e-18),
                jitter_fwhm: Some(110e-12),
                h: Some(1.2e7),
                ..ChannelMetrics::default()
            }],
        };
        let back = MetricReport::from_csv(&report.to_csv()).unwrap();
        assert_eq!(back.rows.len(), 1);
        let r = &back.rows[0];
        assert_eq!(r.channel, 3);
        assert!(r.alignment);
        assert!((r.jitter_fwhm.unwrap() - 110e-12).abs() < 1e-18);
        assert_eq!(r.min_nep_bias, None);
        assert!(report.to_table().contains("NEP ="));
    }

    #[test]
    fn corrected_sde_undoes_dead_time() {
        let dead = 25e-9;
        let m = |r: f64| r / (1.0 + r * dead);
        let sde = recovery_corrected_sde(m(4e5 + 100.0), m(100.0), 1e6, dead);
        assert!((sde - 0.4).abs() < 1e-9);
    }

    #[test]
    fn crosstalk_of_uniform_receiver() {
        let mut cfg = ReceiverConfig::uniform(64);
        cfg.duration = 20.0;
        let v = cfg.validate().unwrap();
        let est = measure_crosstalk(&v, &[0]).unwrap();
        let e = est[0];
        assert_eq!(e.sources, 63);
        let db = e.per_channel_db.unwrap();
        // ~1260 excess counts: ±3σ is about ±0.37 dB
        assert!((db + 60.0).abs() < 0.4, "{db}");
    }
}
