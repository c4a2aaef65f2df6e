//! Domain types shared by the simulator, the TCSPC model and the analysis code.
//!
//! Bias currents are normalized: `1.0` is the bias at which dark counts make up
//! 10 % of the total count rate under 10^6 photons/s input. Times are seconds
//! unless a field name says otherwise.

mod config;
pub mod presets;
mod seed;

pub use config::{parse_config, ConfigError, ValidatedChannel, ValidatedConfig};
pub use presets::{readout_preset, readout_registry, ReadoutChain, TCSPC_DEAD_TIME, TCSPC_SIGMA};
pub use seed::{substream_rng, substream_seed, StreamKind};

use serde::{Deserialize, Serialize};

/// Photon flux used by the bias-normalization convention.
pub const REFERENCE_FLUX: f64 = 1.0e6;

/// Fraction of the total count rate that dark counts reach at the reference bias.
pub const REFERENCE_DARK_FRACTION: f64 = 0.10;

/// Flux transmission of the 3 dB MMI tap on alignment devices.
pub fn alignment_tap_transmission() -> f64 {
    10f64.powf(-3.0 / 10.0)
}

/// Physical parameters of one nanowire detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Plateau of the system detection probability.
    pub eta_internal: f64,
    /// Bias at which the detection probability reaches half its plateau.
    pub i_mid: f64,
    /// Logistic width of the bias response.
    pub i_width: f64,
    /// Dark-count rate at unit normalized bias, events/s.
    pub dcr_amp: f64,
    /// Exponential slope of the dark-count law per unit normalized bias.
    pub dcr_slope: f64,
    pub t_dead: f64,
    /// Time after a detection at which efficiency is back to one half.
    pub t_half: f64,
    pub tau_recovery: f64,
    pub sigma_intrinsic: f64,
    /// Detector-side contribution to the slew-limited jitter term, seconds at unit bias.
    pub jitter_coeff: f64,
    pub i_latch: f64,
}

impl DetectorModel {
    /// Dark-count amplitude that puts the bias-normalization crossing exactly
    /// at unit bias for this detector: DCR(1) = 0.1 · (η·p(1)·Φ + DCR(1)).
    pub fn normalized_dark_amplitude(&self, flux: f64) -> f64 {
        let signal = crate::dynamics::detection_probability(self, 1.0) * flux;
        signal * REFERENCE_DARK_FRACTION / (1.0 - REFERENCE_DARK_FRACTION)
    }

    /// Returns a copy with `dcr_amp` reset by [`Self::normalized_dark_amplitude`]
    /// at the reference flux.
    pub fn with_normalized_darks(mut self) -> Self {
        self.dcr_amp = self.normalized_dark_amplitude(REFERENCE_FLUX);
        self
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            eta_internal: 0.40,
            i_mid: 0.8,
            i_width: 0.05,
            dcr_amp: 0.0,
            dcr_slope: 23.0,
            t_dead: 10e-9,
            t_half: 25e-9,
            tau_recovery: 6e-9,
            sigma_intrinsic: 7e-12,
            jitter_coeff: 0.0,
            i_latch: 1.05,
        }
        .with_normalized_darks()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Bias tee with a coupling capacitor; high count rates over-bias the wire.
    AcCoupled,
    /// Inductor-resistor shunt to ground; bias is rate independent.
    LrPathToGround,
}

/// Amplifier chain plus time-tagging electronics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub coupling: Coupling,
    pub overbias_coeff: f64,
    pub tau_rc: f64,
    pub sigma_electrical_at_unit_bias: f64,
    pub tcspc_dead_time: f64,
    pub tcspc_sigma: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        presets::readout_preset("cta").expect("cta preset is always registered")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub channel_id: usize,
    pub detector: DetectorModel,
    pub readout: ReadoutModel,
    pub i_set: f64,
    /// Photon flux launched into the channel fiber, photons/s.
    pub input_flux: f64,
    pub is_alignment_device: bool,
}

impl ChannelConfig {
    pub fn new(channel_id: usize) -> Self {
        ChannelConfig {
            channel_id,
            detector: DetectorModel::default(),
            readout: ReadoutModel::default(),
            i_set: 0.9,
            input_flux: REFERENCE_FLUX,
            is_alignment_device: false,
        }
    }

    /// Sets `dcr_amp` so that unit bias is this channel's normalization
    /// reference at the reference input flux (after the alignment tap, if any).
    pub fn normalize_darks(&mut self) {
        let flux = if self.is_alignment_device {
            REFERENCE_FLUX * alignment_tap_transmission()
        } else {
            REFERENCE_FLUX
        };
        self.detector.dcr_amp = self.detector.normalized_dark_amplitude(flux);
    }

    /// Flux that actually reaches the nanowire.
    pub fn delivered_flux(&self) -> f64 {
        if self.is_alignment_device {
            self.input_flux * alignment_tap_transmission()
        } else {
            self.input_flux
        }
    }
}

/// Photon source driving every illuminated channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    /// Registered source name, see [`crate::sim::source_registry`].
    pub kind: String,
    /// Arrival phase of the first pulse for periodic sources, seconds.
    pub pulse_offset: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            kind: "cw".into(),
            pulse_offset: 0.5e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverConfig {
    pub channels: Vec<ChannelConfig>,
    /// Row = victim, column = source. Diagonal entries are ignored.
    pub crosstalk_db: Vec<Vec<f64>>,
    pub duration: f64,
    pub seed: u64,
    pub source: SourceSpec,
}

impl ReceiverConfig {
    /// `n` identical default channels with uniform −60 dB crosstalk.
    pub fn uniform(n: usize) -> Self {
        ReceiverConfig {
            channels: (0..n).map(ChannelConfig::new).collect(),
            crosstalk_db: uniform_crosstalk(n, DEFAULT_CROSSTALK_DB),
            duration: 1.0,
            seed: 42,
            source: SourceSpec::default(),
        }
    }

    /// The 64-channel packaged receiver used as the CLI default: four corner
    /// alignment devices, a spread of plateau efficiencies across regular
    /// channels and the packaged-system readout chain.
    pub fn packaged_default() -> Self {
        let mut cfg = Self::uniform(64);
        let readout = presets::readout_preset("cta-packaged").expect("registered");
        for ch in &mut cfg.channels {
            let id = ch.channel_id;
            let alignment = matches!(id, 0 | 7 | 56 | 63);
            // deterministic spread of plateau efficiencies in [0.32, 0.52]
            let phase = (id as f64 * 0.618_033_988_75).fract();
            let eta = if alignment { 0.50 } else { 0.32 + 0.20 * phase };
            ch.detector = DetectorModel {
                eta_internal: eta,
                i_width: 0.03,
                dcr_slope: 50.0,
                ..DetectorModel::default()
            };
            ch.readout = readout;
            ch.is_alignment_device = alignment;
            ch.i_set = 0.9;
            ch.normalize_darks();
        }
        cfg
    }
}

pub const DEFAULT_CROSSTALK_DB: f64 = -60.0;

pub fn uniform_crosstalk(n: usize, db: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { db }).collect())
        .collect()
}

/// One registered detection: channel and timestamp in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeTag {
    pub channel: u16,
    pub time_ps: u64,
}

impl TimeTag {
    pub fn new(channel: u16, time_ps: u64) -> Self {
        TimeTag { channel, time_ps }
    }
}

impl Ord for TimeTag {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time_ps, self.channel).cmp(&(other.time_ps, other.channel))
    }
}

impl PartialOrd for TimeTag {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Seconds to the nearest picosecond; `None` for times before zero.
pub fn seconds_to_ps(t: f64) -> Option<u64> {
    let ps = (t * 1e12).round();
    (ps >= 0.0).then_some(ps as u64)
}

pub fn ps_to_seconds(ps: u64) -> f64 {
    ps as f64 * 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_detector_is_normalized() {
        let d = DetectorModel::default();
        let signal = crate::dynamics::detection_probability(&d, 1.0) * REFERENCE_FLUX;
        let dark = crate::dynamics::dark_rate(&d, 1.0);
        assert!((dark / (signal + dark) - 0.10).abs() < 1e-12);
    }

    #[test]
    fn packaged_default_shape() {
        let cfg = ReceiverConfig::packaged_default();
        assert_eq!(cfg.channels.len(), 64);
        let n_align = cfg.channels.iter().filter(|c| c.is_alignment_device).count();
        assert_eq!(n_align, 4);
        for ch in cfg.channels.iter().filter(|c| !c.is_alignment_device) {
            assert!((0.32..=0.52).contains(&ch.detector.eta_internal));
        }
    }

    #[test]
    fn timetag_order_is_time_then_channel() {
        let mut tags = vec![TimeTag::new(3, 10), TimeTag::new(1, 10), TimeTag::new(0, 20)];
        tags.sort();
        assert_eq!(tags, vec![TimeTag::new(1, 10), TimeTag::new(3, 10), TimeTag::new(0, 20)]);
    }

    #[test]
    fn quantization_rounds_to_nearest() {
        assert_eq!(seconds_to_ps(1.4e-12), Some(1));
        assert_eq!(seconds_to_ps(1.6e-12), Some(2));
        assert_eq!(seconds_to_ps(-2e-12), None);
    }
}
