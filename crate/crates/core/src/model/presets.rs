//! Named amplifier-chain presets.
//!
//! Electrical jitter constants are back-computed from the FWHM each chain
//! reaches at maximal (unit) bias, assuming a 7 ps intrinsic detector term
//! added in quadrature.

use std::sync::OnceLock;

use super::{Coupling, ReadoutModel};
use crate::registry::{Named, Registry, UnknownStrategy};

pub const TCSPC_SIGMA: f64 = 35.8e-12;
pub const TCSPC_DEAD_TIME: f64 = 650e-12;

pub trait ReadoutChain: Named + Send + Sync {
    fn description(&self) -> &'static str;
    fn model(&self) -> ReadoutModel;
}

struct Preset {
    name: &'static str,
    description: &'static str,
    model: ReadoutModel,
}

impl Named for Preset {
    fn name(&self) -> &'static str {
        self.name
    }
}

impl ReadoutChain for Preset {
    fn description(&self) -> &'static str {
        self.description
    }
    fn model(&self) -> ReadoutModel {
        self.model
    }
}

fn lr(sigma_el: f64) -> ReadoutModel {
    ReadoutModel {
        coupling: Coupling::LrPathToGround,
        overbias_coeff: 0.0,
        tau_rc: 1e-6,
        sigma_electrical_at_unit_bias: sigma_el,
        tcspc_dead_time: TCSPC_DEAD_TIME,
        tcspc_sigma: TCSPC_SIGMA,
    }
}

fn ac(sigma_el: f64, overbias_coeff: f64, tau_rc: f64) -> ReadoutModel {
    ReadoutModel {
        coupling: Coupling::AcCoupled,
        overbias_coeff,
        tau_rc,
        sigma_electrical_at_unit_bias: sigma_el,
        tcspc_dead_time: TCSPC_DEAD_TIME,
        tcspc_sigma: TCSPC_SIGMA,
    }
}

pub fn readout_registry() -> &'static Registry<dyn ReadoutChain> {
    static REGISTRY: OnceLock<Registry<dyn ReadoutChain>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let presets = [
            Preset {
                name: "cta",
                description: "single-stage cryogenic amplifier, L-R path to ground (26.0 ps at unit bias)",
                model: lr(8.5e-12),
            },
            Preset {
                name: "cta2",
                description: "dual-stage cryogenic amplifier, L-R path to ground (24.4 ps at unit bias)",
                model: lr(7.64e-12),
            },
            Preset {
                name: "zfl",
                description: "room-temperature low-noise amplifiers behind an AC bias tee (44.9 ps)",
                model: ac(17.74e-12, 0.02, 1.59e-6),
            },
            Preset {
                name: "citlf3-50k",
                description: "commercial cryogenic amplifier on the 50 K stage, AC coupled (22.0 ps)",
                model: ac(6.19e-12, 0.01, 16e-9),
            },
            Preset {
                name: "citlf3-3k",
                description: "commercial cryogenic amplifier on the 3 K stage, AC coupled (18.9 ps)",
                model: ac(3.93e-12, 0.01, 16e-9),
            },
            Preset {
                name: "cta-packaged",
                description: "single-stage amplifier in the packaged 3.6 K receiver (~110 ps system jitter at 0.9 bias)",
                model: lr(26.3e-12),
            },
        ];
        let mut reg: Registry<dyn ReadoutChain> = Registry::new("readout preset");
        for p in presets {
            reg.register(Box::new(p));
        }
        reg
    })
}

pub fn readout_preset(name: &str) -> Result<ReadoutModel, UnknownStrategy> {
    readout_registry().get(name).map(|p| p.model())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{fwhm_from_sigma, jitter_sigma};
    use crate::model::DetectorModel;

    fn unit_bias_fwhm_ps(name: &str) -> f64 {
        let r = readout_preset(name).unwrap();
        fwhm_from_sigma(jitter_sigma(&DetectorModel::default(), &r, 1.0).unwrap()) * 1e12
    }

    #[test]
    fn presets_reproduce_chain_jitter() {
        for (name, fwhm) in [
            ("cta", 26.0),
            ("cta2", 24.4),
            ("zfl", 44.9),
            ("citlf3-50k", 22.0),
            ("citlf3-3k", 18.9),
        ] {
            let got = unit_bias_fwhm_ps(name);
            assert!((got - fwhm).abs() < 0.15, "{name}: {got}");
        }
    }

    #[test]
    fn packaged_chain_system_jitter_near_110ps() {
        let r = readout_preset("cta-packaged").unwrap();
        let s = jitter_sigma(&DetectorModel::default(), &r, 0.9).unwrap();
        let total = (s * s + r.tcspc_sigma * r.tcspc_sigma).sqrt();
        let fwhm = fwhm_from_sigma(total) * 1e12;
        assert!((fwhm - 110.0).abs() < 1.0, "{fwhm}");
    }

    #[test]
    fn unknown_preset() {
        assert!(readout_preset("nope").is_err());
        assert_eq!(readout_registry().len(), 6);
    }
}
