//! Characterization metrics over timetag data or scalar inputs.

mod bias;
mod campaign;
mod fwhm;
mod rate;

pub use bias::{min_nep_index, normalize_bias, BiasPoint, BiasSweep};
pub use campaign::{
    characterize, measure_crosstalk, recovery_corrected_sde, CampaignSettings, CharacterizationResult, ChannelMetrics, CrosstalkEstimate,
    MetricReport, SweepRow,
};
pub use fwhm::{
    auto_bin_width_ps, fwhm, fwhm_registry, jitter_histogram, FwhmEstimator, GaussianFit, LinearInterpolation,
};
pub use rate::{expected_rate, expected_rate_with_dark, max_sustained_rate, RatePoint, RateScan};

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Telecom C-band operating wavelength, m.
pub const TELECOM_WAVELENGTH: f64 = 1550e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("count rate {cr} /s below dark count rate {dcr} /s")]
    Unphysical { cr: f64, dcr: f64 },
    #[error("photon flux must be positive")]
    ZeroFlux,
    #[error("efficiency must be positive")]
    ZeroEfficiency,
    #[error("zero denominator: dcr and jitter must both be positive")]
    ZeroDenominator,
    #[error("measured rate {rate} /s saturates dead time {dead_time} s")]
    Saturated { rate: f64, dead_time: f64 },
    #[error("bias sweep is empty")]
    EmptySweep,
    #[error("bias values must be strictly increasing (sample {index})")]
    NonIncreasingBias { index: usize },
    #[error("no crossing: dark rate never reaches 10 % of the count rate in the sweep range")]
    NoCrossing,
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("peak touches the histogram edge; widen the window")]
    PeakAtEdge,
    #[error("ambiguous peak: {} half-maximum crossings at {crossings_ps:?} ps", crossings_ps.len())]
    Multimodal { crossings_ps: Vec<f64> },
    #[error("too few bins above half maximum for a fit")]
    TooFewBins,
}

/// η = (CR − DCR)/Φ.
pub fn system_detection_efficiency(cr: f64, dcr: f64, flux: f64) -> Result<f64, AnalysisError> {
    if !(flux > 0.0) {
        return Err(AnalysisError::ZeroFlux);
    }
    if cr < dcr {
        return Err(AnalysisError::Unphysical { cr, dcr });
    }
    Ok((cr - dcr) / flux)
}

/// Undoes a non-paralyzable dead time: λ = m/(1 − m·τ).
pub fn dead_time_corrected_rate(measured: f64, dead_time: f64) -> Result<f64, AnalysisError> {
    let lost = measured * dead_time;
    if lost >= 1.0 {
        return Err(AnalysisError::Saturated {
            rate: measured,
            dead_time,
        });
    }
    Ok(measured / (1.0 - lost))
}

pub fn photon_energy(wavelength: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength
}

/// NEP = (h·c/λ)/η · √(2·DCR), W/√Hz.
pub fn nep(eta: f64, dcr: f64, wavelength: f64) -> Result<f64, AnalysisError> {
    if !(eta > 0.0) {
        return Err(AnalysisError::ZeroEfficiency);
    }
    Ok(photon_energy(wavelength) / eta * (2.0 * dcr).sqrt())
}

/// H = η/(DCR·Δt).
pub fn figure_of_merit(eta: f64, dcr: f64, jitter_fwhm: f64) -> Result<f64, AnalysisError> {
    let den = dcr * jitter_fwhm;
    if !(den > 0.0) {
        return Err(AnalysisError::ZeroDenominator);
    }
    Ok(eta / den)
}

/// 10·log10(Σ 10^(x/10)).
pub fn cumulative_crosstalk(per_channel_db: &[f64]) -> f64 {
    let linear: f64 = per_channel_db.iter().map(|x| 10f64.powf(x / 10.0)).sum();
    10.0 * linear.log10()
}

/// Relative efficiency uncertainty: the count-rate term adds linearly to the
/// quadrature sum of light-source, power-meter and attenuator terms.
pub fn efficiency_uncertainty(u_cr_rel: f64, u_ls_rel: f64, u_pm_rel: f64, u_al_rel: f64) -> f64 {
    u_cr_rel + (u_ls_rel.powi(2) + u_pm_rel.powi(2) + u_al_rel.powi(2)).sqrt()
}

/// Expected relative spread of detection efficiencies from coupler, fiber
/// array and fiber core offset contributions.
pub fn de_variation(delta_c: f64, delta_fac: f64, delta_fco: f64) -> f64 {
    (delta_c.powi(2) + delta_fac.powi(2) + delta_fco.powi(2)).sqrt()
}

/// Calibration terms of the efficiency setup (light source, power meter,
/// attenuators), relative.
pub const CALIBRATION_U_LS: f64 = 0.003;
pub const CALIBRATION_U_PM: f64 = 0.05;
pub const CALIBRATION_U_AL: f64 = 0.031;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sde_examples() {
        assert!((system_detection_efficiency(4.002e5, 200.0, 1e6).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(system_detection_efficiency(300.0, 300.0, 1e6).unwrap(), 0.0);
        assert!(matches!(system_detection_efficiency(100.0, 200.0, 1e6), Err(AnalysisError::Unphysical { .. })));
        assert_eq!(system_detection_efficiency(1.0, 0.0, 0.0), Err(AnalysisError::ZeroFlux));
    }

    #[test]
    fn nep_examples() {
        let e = photon_energy(1550e-9);
        assert!((e - 1.2816e-19).abs() < 1e-22);
        let v = nep(0.40, 200.0, 1550e-9).unwrap();
        // independent: hν/η · 20
        assert!((v - 1.2816e-19 / 0.4 * 20.0).abs() / v < 1e-3);
        assert!((v - 6.4e-18).abs() < 0.05e-18);
        assert!(v < 5e-17);
        assert_eq!(nep(0.4, 0.0, 1550e-9).unwrap(), 0.0);
        assert_eq!(nep(0.0, 1.0, 1550e-9), Err(AnalysisError::ZeroEfficiency));
    }

    #[test]
    fn figure_of_merit_examples() {
        assert_eq!(figure_of_merit(1.0, 1.0, 1.0).unwrap(), 1.0);
        let h = figure_of_merit(0.4, 200.0, 110e-12).unwrap();
        assert!((h - 1.818_18e7).abs() / h < 1e-4);
        assert!(h > 1e7);
        assert_eq!(figure_of_merit(0.4, 0.0, 1e-10), Err(AnalysisError::ZeroDenominator));
    }

    #[test]
    fn crosstalk_examples() {
        assert!((cumulative_crosstalk(&[-60.0]) + 60.0).abs() < 1e-12);
        let c = cumulative_crosstalk(&[-60.0; 63]);
        assert!((c + 42.007).abs() < 1e-3);
        assert!(c < -40.0);
    }

    #[test]
    fn uncertainty_examples() {
        assert!((efficiency_uncertainty(0.007, 0.003, 0.05, 0.031) - 0.066).abs() < 5e-4);
        assert_eq!(efficiency_uncertainty(0.0, 0.0, 0.0, 0.0), 0.0);
        assert!(((0.004f64.powi(2) + 0.031f64.powi(2)).sqrt() - 0.031).abs() < 5e-4);
        let calc = de_variation(0.17, 0.024, 0.094);
        assert!((calc - 0.196).abs() < 1e-3);
        assert_eq!(de_variation(0.0, 0.0, 0.0), 0.0);
        // measured spread is ~15 % above the calculated one
        assert!(((0.23 - calc) / 0.23 - 0.15).abs() < 0.02);
    }

    #[test]
    fn dead_time_correction_inverts_formula() {
        let r = 4e5;
        let tau = 25e-9;
        let m = r / (1.0 + r * tau);
        assert!((dead_time_corrected_rate(m, tau).unwrap() - r).abs() < 1e-6);
        assert!(dead_time_corrected_rate(1e8, 20e-9).is_err());
    }

    proptest! {
        #[test]
        fn sde_scale_invariant(cr in 0.0f64..1e7, frac in 0.0f64..1.0, flux in 1.0f64..1e9, a in 1e-3f64..1e3) {
            let dcr = cr * frac;
            let x = system_detection_efficiency(cr, dcr, flux).unwrap();
            let y = system_detection_efficiency(a * cr, a * dcr, a * flux).unwrap();
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-12));
        }

        #[test]
        fn crosstalk_grows_with_terms(xs in proptest::collection::vec(-90.0f64..-20.0, 1..64), extra in -120.0f64..-20.0) {
            let base = cumulative_crosstalk(&xs);
            let mut more = xs.clone();
            more.push(extra);
            prop_assert!(cumulative_crosstalk(&more) > base);
            prop_assert!((cumulative_crosstalk(&xs[..1]) - xs[0]).abs() < 1e-9);
        }

        #[test]
        fn uncertainty_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..1.0, bump in 0.0f64..1.0, which in 0usize..4) {
            let mut v = [a, b, c, d];
            let before = efficiency_uncertainty(v[0], v[1], v[2], v[3]);
            v[which] += bump;
            prop_assert!(efficiency_uncertainty(v[0], v[1], v[2], v[3]) >= before);
            let w = [a, b, c];
            let mut w2 = w;
            w2[which % 3] += bump;
            prop_assert!(de_variation(w2[0], w2[1], w2[2]) >= de_variation(w[0], w[1], w[2]));
        }
    }
}
