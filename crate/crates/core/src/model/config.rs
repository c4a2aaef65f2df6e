//! Configuration file ingestion and validation.
//!
//! The file is TOML. Top-level keys set run parameters and defaults, the
//! `[detector]` and `[readout]` tables override model defaults for every
//! channel, and `[[channels]]` sections override individual channels. Keys are
//! the field names of [`DetectorModel`], [`ReadoutModel`] and
//! [`ChannelConfig`].
//!
//! ```toml
//! duration = 1.0
//! seed = 42
//! channel_count = 4
//! input_flux = 1e6
//! alignment_channels = [0]
//!
//! [readout]
//! preset = "cta"
//!
//! [[channels]]
//! channel_id = 2
//! i_set = 0.95
//! [channels.detector]
//! eta_internal = 0.55
//! ```
//!
//! When `dcr_amp` is not given for a channel it is derived from the bias
//! normalization rule, so the channel's unit bias is its reference bias.

use serde::{Deserialize, Serialize};

use super::{
    presets, uniform_crosstalk, ChannelConfig, Coupling, DetectorModel, ReadoutModel,
    ReceiverConfig, SourceSpec, DEFAULT_CROSSTALK_DB,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("channel {channel}: {field} {reason}")]
    Channel {
        channel: usize,
        field: &'static str,
        reason: String,
    },
    #[error("{field} {reason}")]
    Receiver { field: &'static str, reason: String },
}

fn ch_err(channel: usize, field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Channel {
        channel,
        field,
        reason: reason.into(),
    }
}

fn rx_err(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Receiver {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_internal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    i_mid: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    i_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dcr_amp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dcr_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_dead: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_half: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_recovery: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_intrinsic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jitter_coeff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    i_latch: Option<f64>,
}

impl RawDetector {
    fn from_model(d: &DetectorModel) -> Self {
        RawDetector {
            eta_internal: Some(d.eta_internal),
            i_mid: Some(d.i_mid),
            i_width: Some(d.i_width),
            dcr_amp: Some(d.dcr_amp),
            dcr_slope: Some(d.dcr_slope),
            t_dead: Some(d.t_dead),
            t_half: Some(d.t_half),
            tau_recovery: Some(d.tau_recovery),
            sigma_intrinsic: Some(d.sigma_intrinsic),
            jitter_coeff: Some(d.jitter_coeff),
            i_latch: Some(d.i_latch),
        }
    }

    /// Applies overrides; returns whether `dcr_amp` was set explicitly.
    fn apply(&self, d: &mut DetectorModel) -> bool {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { d.$f = v; } )* };
        }
        set!(eta_internal, i_mid, i_width, dcr_amp, dcr_slope, t_dead, t_half, tau_recovery, sigma_intrinsic, jitter_coeff, i_latch);
        self.dcr_amp.is_some()
    }
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReadout {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coupling: Option<Coupling>,
    #[serde(skip_serializing_if = "Option::is_none")]
    overbias_coeff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_rc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_electrical_at_unit_bias: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tcspc_dead_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tcspc_sigma: Option<f64>,
}

impl RawReadout {
    fn from_model(r: &ReadoutModel) -> Self {
        RawReadout {
            preset: None,
            coupling: Some(r.coupling),
            overbias_coeff: Some(r.overbias_coeff),
            tau_rc: Some(r.tau_rc),
            sigma_electrical_at_unit_bias: Some(r.sigma_electrical_at_unit_bias),
            tcspc_dead_time: Some(r.tcspc_dead_time),
            tcspc_sigma: Some(r.tcspc_sigma),
        }
    }

    fn apply(&self, r: &mut ReadoutModel) -> Result<(), String> {
        if let Some(name) = &self.preset {
            *r = presets::readout_preset(name).map_err(|e| e.to_string())?;
        }
        if let Some(c) = self.coupling {
            r.coupling = c;
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { r.$f = v; } )* };
        }
        set!(overbias_coeff, tau_rc, sigma_electrical_at_unit_bias, tcspc_dead_time, tcspc_sigma);
        Ok(())
    }
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    channel_id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    i_set: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_flux: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    is_alignment_device: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detector: Option<RawDetector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    readout: Option<RawReadout>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pulse_offset: Option<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    /// "uniform" (default) or "packaged".
    #[serde(skip_serializing_if = "Option::is_none")]
    base: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    i_set: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_flux: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alignment_channels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crosstalk_default_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crosstalk_db: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<RawSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detector: Option<RawDetector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    readout: Option<RawReadout>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    channels: Vec<RawChannel>,
}

/// Parses a configuration file into an unvalidated [`ReceiverConfig`].
pub fn parse_config(text: &str) -> Result<ReceiverConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;

    let mut cfg = match raw.base.as_deref().unwrap_or("uniform") {
        "uniform" => ReceiverConfig::uniform(raw.channel_count.unwrap_or(64)),
        "packaged" => ReceiverConfig::packaged_default(),
        other => return Err(rx_err("base", format!("unknown base '{other}'"))),
    };
    if let Some(n) = raw.channel_count {
        if n != cfg.channels.len() {
            cfg.channels = (0..n).map(ChannelConfig::new).collect();
        }
    }
    let listed_max = raw.channels.iter().map(|c| c.channel_id + 1).max().unwrap_or(0);
    if raw.channel_count.is_none() && listed_max > cfg.channels.len() {
        let n0 = cfg.channels.len();
        cfg.channels.extend((n0..listed_max).map(ChannelConfig::new));
    }
    let n = cfg.channels.len();

    if let Some(d) = raw.duration {
        cfg.duration = d;
    }
    if let Some(s) = raw.seed {
        cfg.seed = s;
    }
    if let Some(src) = &raw.source {
        if let Some(k) = &src.kind {
            cfg.source.kind = k.clone();
        }
        if let Some(o) = src.pulse_offset {
            cfg.source.pulse_offset = o;
        }
    }

    // explicit dcr_amp flags, per channel
    let mut explicit_dark = vec![false; n];
    for (idx, ch) in cfg.channels.iter_mut().enumerate() {
        if let Some(i) = raw.i_set {
            ch.i_set = i;
        }
        if let Some(f) = raw.input_flux {
            ch.input_flux = f;
        }
        if let Some(d) = &raw.detector {
            explicit_dark[idx] |= d.apply(&mut ch.detector);
        }
        if let Some(r) = &raw.readout {
            r.apply(&mut ch.readout).map_err(|e| ch_err(idx, "readout.preset", e))?;
        }
    }
    if let Some(align) = &raw.alignment_channels {
        for ch in cfg.channels.iter_mut() {
            ch.is_alignment_device = false;
        }
        for &a in align {
            let ch = cfg
                .channels
                .get_mut(a)
                .ok_or_else(|| rx_err("alignment_channels", format!("names channel {a} but only {n} exist")))?;
            ch.is_alignment_device = true;
        }
    }
    for rc in &raw.channels {
        let id = rc.channel_id;
        let ch = cfg
            .channels
            .get_mut(id)
            .ok_or_else(|| ch_err(id, "channel_id", format!("out of range for {n} channels")))?;
        if let Some(i) = rc.i_set {
            ch.i_set = i;
        }
        if let Some(f) = rc.input_flux {
            ch.input_flux = f;
        }
        if let Some(a) = rc.is_alignment_device {
            ch.is_alignment_device = a;
        }
        if let Some(d) = &rc.detector {
            explicit_dark[id] |= d.apply(&mut ch.detector);
        }
        if let Some(r) = &rc.readout {
            r.apply(&mut ch.readout).map_err(|e| ch_err(id, "readout.preset", e))?;
        }
    }
    for (ch, explicit) in cfg.channels.iter_mut().zip(&explicit_dark) {
        if !explicit {
            ch.normalize_darks();
        }
    }

    cfg.crosstalk_db = match &raw.crosstalk_db {
        Some(m) => m.clone(),
        None => uniform_crosstalk(n, raw.crosstalk_default_db.unwrap_or(DEFAULT_CROSSTALK_DB)),
    };
    Ok(cfg)
}

impl ReceiverConfig {
    /// Fully expanded TOML; parsing it yields this exact configuration.
    pub fn to_toml(&self) -> String {
        let raw = RawConfig {
            base: None,
            duration: Some(self.duration),
            seed: Some(self.seed),
            channel_count: Some(self.channels.len()),
            i_set: None,
            input_flux: None,
            alignment_channels: None,
            crosstalk_default_db: None,
            crosstalk_db: Some(self.crosstalk_db.clone()),
            source: Some(RawSource {
                kind: Some(self.source.kind.clone()),
                pulse_offset: Some(self.source.pulse_offset),
            }),
            detector: None,
            readout: None,
            channels: self
                .channels
                .iter()
                .map(|c| RawChannel {
                    channel_id: c.channel_id,
                    i_set: Some(c.i_set),
                    input_flux: Some(c.input_flux),
                    is_alignment_device: Some(c.is_alignment_device),
                    detector: Some(RawDetector::from_model(&c.detector)),
                    readout: Some(RawReadout::from_model(&c.readout)),
                })
                .collect(),
        };
        toml::to_string(&raw).expect("config serializes")
    }

    /// Checks every invariant, reporting the first violation.
    pub fn validate(self) -> Result<ValidatedConfig, ConfigError> {
        let n = self.channels.len();
        if n == 0 {
            return Err(rx_err("channels", "must not be empty"));
        }
        if n > u16::MAX as usize {
            return Err(rx_err("channels", format!("{n} exceeds the 16-bit channel field")));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(rx_err("duration", format!("must be > 0 s, got {}", self.duration)));
        }
        crate::sim::source_registry()
            .get(&self.source.kind)
            .map_err(|e| rx_err("source.kind", e.to_string()))?;
        if !(self.source.pulse_offset.is_finite() && self.source.pulse_offset >= 0.0) {
            return Err(rx_err("source.pulse_offset", "must be >= 0"));
        }
        if self.crosstalk_db.len() != n || self.crosstalk_db.iter().any(|r| r.len() != n) {
            return Err(rx_err("crosstalk_db", format!("must be a {n}x{n} matrix")));
        }
        for (i, row) in self.crosstalk_db.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if i != j && !(x.is_finite() && x <= -20.0) {
                    return Err(rx_err(
                        "crosstalk_db",
                        format!("entry [{i}][{j}] = {x} dB exceeds the -20 dB limit"),
                    ));
                }
            }
        }
        for (idx, ch) in self.channels.iter().enumerate() {
            validate_channel(idx, ch)?;
        }
        let channels = self
            .channels
            .iter()
            .map(|c| ValidatedChannel {
                config: *c,
                delivered_flux: c.delivered_flux(),
            })
            .collect();
        Ok(ValidatedConfig {
            config: self,
            channels,
        })
    }
}

fn validate_channel(idx: usize, ch: &ChannelConfig) -> Result<(), ConfigError> {
    if ch.channel_id != idx {
        return Err(ch_err(idx, "channel_id", format!("is {} but sits at position {idx}", ch.channel_id)));
    }
    let d = &ch.detector;
    let unit = |name: &'static str, v: f64| -> Result<(), ConfigError> {
        if (0.0..=1.0).contains(&v) {
            Ok(())
        } else {
            Err(ch_err(idx, name, format!("must lie in [0, 1], got {v}")))
        }
    };
    let positive = |name: &'static str, v: f64| -> Result<(), ConfigError> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(ch_err(idx, name, format!("must be > 0, got {v}")))
        }
    };
    let non_negative = |name: &'static str, v: f64| -> Result<(), ConfigError> {
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(ch_err(idx, name, format!("must be >= 0, got {v}")))
        }
    };

    unit("detector.eta_internal", d.eta_internal)?;
    if !(d.i_mid.is_finite() && d.i_mid < 1.0) {
        return Err(ch_err(idx, "detector.i_mid", format!("must be < 1, got {}", d.i_mid)));
    }
    positive("detector.i_width", d.i_width)?;
    non_negative("detector.dcr_amp", d.dcr_amp)?;
    non_negative("detector.dcr_slope", d.dcr_slope)?;
    positive("detector.t_dead", d.t_dead)?;
    positive("detector.t_half", d.t_half)?;
    positive("detector.tau_recovery", d.tau_recovery)?;
    non_negative("detector.sigma_intrinsic", d.sigma_intrinsic)?;
    non_negative("detector.jitter_coeff", d.jitter_coeff)?;
    positive("detector.i_latch", d.i_latch)?;
    if d.t_half <= d.t_dead {
        return Err(ch_err(idx, "detector.t_half", format!("must exceed t_dead ({} <= {})", d.t_half, d.t_dead)));
    }

    let r = &ch.readout;
    non_negative("readout.overbias_coeff", r.overbias_coeff)?;
    positive("readout.tau_rc", r.tau_rc)?;
    non_negative("readout.sigma_electrical_at_unit_bias", r.sigma_electrical_at_unit_bias)?;
    non_negative("readout.tcspc_dead_time", r.tcspc_dead_time)?;
    non_negative("readout.tcspc_sigma", r.tcspc_sigma)?;

    if !(0.0..=1.2).contains(&ch.i_set) {
        return Err(ch_err(idx, "i_set", format!("must lie in [0, 1.2], got {}", ch.i_set)));
    }
    non_negative("input_flux", ch.input_flux)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedChannel {
    pub config: ChannelConfig,
    /// Flux at the nanowire after the alignment tap, photons/s.
    pub delivered_flux: f64,
}

/// A configuration whose invariants have been checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    config: ReceiverConfig,
    channels: Vec<ValidatedChannel>,
}

impl ValidatedConfig {
    pub fn config(&self) -> &ReceiverConfig {
        &self.config
    }

    pub fn channels(&self) -> &[ValidatedChannel] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn duration(&self) -> f64 {
        self.config.duration
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn source(&self) -> &SourceSpec {
        &self.config.source
    }

    /// Linear crosstalk coupling from `source` into `victim`; zero on the diagonal.
    pub fn crosstalk_linear(&self, victim: usize, source: usize) -> f64 {
        if victim == source {
            0.0
        } else {
            10f64.powf(self.config.crosstalk_db[victim][source] / 10.0)
        }
    }

    /// Same configuration with a different seed and/or duration.
    pub fn with_run(&self, seed: u64, duration: f64) -> Result<ValidatedConfig, ConfigError> {
        let mut c = self.config.clone();
        c.seed = seed;
        c.duration = duration;
        c.validate()
    }
}
