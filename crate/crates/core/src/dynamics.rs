//! Instantaneous detector response: efficiency vs bias, dark counts, recovery
//! after a detection, readout over-biasing, latching and timing jitter.

use crate::model::{Coupling, DetectorModel, ReadoutModel};

/// FWHM of a Gaussian in units of its standard deviation, 2·sqrt(2·ln 2).
pub const GAUSSIAN_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

pub fn fwhm_from_sigma(sigma: f64) -> f64 {
    sigma * GAUSSIAN_FWHM_PER_SIGMA
}

pub fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / GAUSSIAN_FWHM_PER_SIGMA
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Probability that a photon reaching the nanowire is detected at bias `i`.
pub fn detection_probability(model: &DetectorModel, i: f64) -> f64 {
    model.eta_internal * logistic((i - model.i_mid) / model.i_width)
}

/// Dark-count rate at bias `i`, events/s. Equals `dcr_amp` at unit bias.
pub fn dark_rate(model: &DetectorModel, i: f64) -> f64 {
    model.dcr_amp * (model.dcr_slope * (i - 1.0)).exp()
}

/// Relative efficiency `dt` seconds after the previous detection.
pub fn recovery_factor(model: &DetectorModel, dt: f64) -> f64 {
    if dt < model.t_dead {
        0.0
    } else {
        logistic((dt - model.t_half) / model.tau_recovery)
    }
}

/// Time integral of `1 - recovery_factor`: the dead time of a non-paralyzable
/// counter that loses the same fraction of events at low rates.
pub fn effective_dead_time(model: &DetectorModel) -> f64 {
    // ∫_{t_dead}^∞ (1 - logistic((u - t_half)/τ)) du = τ·ln(1 + e^{(t_half - t_dead)/τ})
    let x = (model.t_half - model.t_dead) / model.tau_recovery;
    let softplus = if x > 30.0 { x } else { x.exp().ln_1p() };
    model.t_dead + model.tau_recovery * softplus
}

/// Bias seen by the nanowire. AC-coupled readouts add a rate-proportional
/// over-bias from charging of the coupling capacitor.
pub fn effective_bias(readout: &ReadoutModel, i_set: f64, recent_rate: f64) -> f64 {
    match readout.coupling {
        Coupling::LrPathToGround => i_set,
        Coupling::AcCoupled => i_set * (1.0 + readout.overbias_coeff * recent_rate * readout.tau_rc),
    }
}

/// True when the effective bias reaches the latching threshold (inclusive).
pub fn latch_check(model: &DetectorModel, i_eff: f64) -> bool {
    i_eff >= model.i_latch
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("timing jitter is undefined at bias {0} (slew rate vanishes)")]
pub struct ZeroBias(pub f64);

/// Gaussian timing-jitter standard deviation at bias `i`, seconds.
///
/// The slew-limited electrical term scales as `1/i`; the detector's own
/// `jitter_coeff` adds to the readout constant before scaling.
pub fn jitter_sigma(model: &DetectorModel, readout: &ReadoutModel, i: f64) -> Result<f64, ZeroBias> {
    if !(i > 0.0) {
        return Err(ZeroBias(i));
    }
    let electrical = (readout.sigma_electrical_at_unit_bias + model.jitter_coeff) / i;
    Ok(model.sigma_intrinsic.hypot(electrical))
}

/// Mutable per-channel detector state, owned by one simulated channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorState {
    pub last_fire_time: Option<f64>,
    pub latched: bool,
    pub effective_bias: f64,
    /// Exponentially filtered detection rate at `last_fire_time`, events/s.
    rate_estimate: f64,
}

impl DetectorState {
    pub fn new(i_set: f64) -> Self {
        DetectorState {
            last_fire_time: None,
            latched: false,
            effective_bias: i_set,
            rate_estimate: 0.0,
        }
    }

    /// Rate estimate decayed to time `t` (time constant `tau`).
    pub fn rate_at(&self, t: f64, tau: f64) -> f64 {
        match self.last_fire_time {
            None => 0.0,
            Some(t0) => self.rate_estimate * (-(t - t0) / tau).exp(),
        }
    }

    /// Records a detection at `t`; returns true if the detector latched.
    ///
    /// The rate estimate is the spike train filtered with an exponential kernel
    /// of time constant `tau_rc`, so its mean under a steady rate r equals r.
    pub fn fire(&mut self, t: f64, model: &DetectorModel, readout: &ReadoutModel, i_set: f64) -> bool {
        let tau = readout.tau_rc;
        self.rate_estimate = self.rate_at(t, tau) + 1.0 / tau;
        self.last_fire_time = Some(t);
        self.effective_bias = effective_bias(readout, i_set, self.rate_estimate);
        if latch_check(model, self.effective_bias) {
            self.latched = true;
        }
        self.latched
    }
}
