use rayon::prelude::*;

use crate::model::{uniform_crosstalk, ChannelConfig, ConfigError, ReceiverConfig, SourceSpec, DEFAULT_CROSSTALK_DB};
use crate::sim::run_channel;

/// Non-paralyzable prediction r/(1 + r·τ) with r = flux·η.
pub fn expected_rate(flux: f64, eta: f64, tau_dead: f64) -> f64 {
    expected_rate_with_dark(flux, eta, 0.0, tau_dead)
}

/// As [`expected_rate`] with r = flux·η + DCR.
pub fn expected_rate_with_dark(flux: f64, eta: f64, dcr: f64, tau_dead: f64) -> f64 {
    let r = flux * eta + dcr;
    if r == 0.0 {
        return 0.0;
    }
    // 1/(1/r + τ) stays finite as r → ∞
    1.0 / (1.0 / r + tau_dead)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub flux: f64,
    /// Recorded events per second of run time.
    pub rate: f64,
    pub latched: bool,
    pub latch_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateScan {
    pub points: Vec<RatePoint>,
}

impl RateScan {
    /// Highest rate among points that did not latch.
    pub fn peak_rate(&self) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| !p.latched)
            .map(|p| p.rate)
            .max_by(f64::total_cmp)
    }

    /// Lowest flux at which the channel latched.
    pub fn latch_flux(&self) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.latched)
            .map(|p| p.flux)
            .min_by(f64::total_cmp)
    }

    /// Plot-ready CSV: `flux_hz,rate_hz,latched`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("flux_hz,rate_hz,latched\n");
        for p in &self.points {
            s.push_str(&format!("{:e},{:e},{}\n", p.flux, p.rate, p.latched));
        }
        s
    }
}

/// Runs a single channel at every flux of the grid (continuous-wave light,
/// fresh detector each time) and records its output rate and latch status.
pub fn max_sustained_rate(
    channel: &ChannelConfig,
    fluxes: &[f64],
    duration: f64,
    seed: u64,
) -> Result<RateScan, ConfigError> {
    let configs = fluxes
        .iter()
        .map(|&flux| {
            let mut ch = *channel;
            ch.channel_id = 0;
            ch.input_flux = flux;
            ReceiverConfig {
                channels: vec![ch],
                crosstalk_db: uniform_crosstalk(1, DEFAULT_CROSSTALK_DB),
                duration,
                seed,
                source: SourceSpec::default(),
            }
            .validate()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let points = configs
        .par_iter()
        .zip(fluxes)
        .map(|(cfg, &flux)| {
            let run = run_channel(cfg, 0);
            RatePoint {
                flux,
                rate: run.report.recorded_counts as f64 / duration,
                latched: run.report.latched,
                latch_time: run.report.latch_time,
            }
        })
        .collect();
    Ok(RateScan { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::readout_preset;
    use proptest::prelude::*;

    #[test]
    fn expected_rate_examples() {
        assert!((expected_rate(1e6, 0.4, 20e-9) - 4e5 / 1.008).abs() < 1e-6);
        assert!((expected_rate(1e30, 0.4, 20e-9) - 5e7).abs() < 1.0);
        let lin = |r: f64| 1.0 - expected_rate(r, 1.0, 20e-9) / r;
        assert!(lin(4e5) < 0.01);
        assert!(lin(2e7) > 0.2);
    }

    #[test]
    fn zero_overbias_ac_matches_lr() {
        let mut lr = ChannelConfig::new(0);
        lr.readout = readout_preset("cta").unwrap();
        let mut ac = lr;
        ac.readout.coupling = crate::model::Coupling::AcCoupled;
        ac.readout.overbias_coeff = 0.0;
        ac.readout.tau_rc = 1e-6;
        let grid = [1e6, 1e8];
        let a = max_sustained_rate(&lr, &grid, 2e-4, 5).unwrap();
        let b = max_sustained_rate(&ac, &grid, 2e-4, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ac_latches_where_lr_does_not() {
        let mut lr = ChannelConfig::new(0);
        lr.i_set = 0.95;
        let mut ac = lr;
        ac.readout = readout_preset("zfl").unwrap();
        let grid = [1e5, 1e7, 1e8];
        let lr_scan = max_sustained_rate(&lr, &grid, 1e-3, 1).unwrap();
        let ac_scan = max_sustained_rate(&ac, &grid, 1e-3, 1).unwrap();
        assert!(lr_scan.points.iter().all(|p| !p.latched));
        assert!(ac_scan.latch_flux().is_some());
    }

    proptest! {
        #[test]
        fn bounded_by_input_and_saturation(flux in 0.0f64..1e10, eta in 0.0f64..1.0, dcr in 0.0f64..1e5, tau in 1e-10f64..1e-7) {
            let r = expected_rate_with_dark(flux, eta, dcr, tau);
            prop_assert!(r <= (flux * eta + dcr).min(1.0 / tau) * (1.0 + 1e-12));
        }
    }
}
