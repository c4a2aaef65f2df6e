use std::sync::OnceLock;

use super::AnalysisError;
use crate::dynamics::GAUSSIAN_FWHM_PER_SIGMA;
use crate::registry::{Named, Registry};
use crate::tcspc::{sync_delay_histogram_in, Binning, Histogram};

/// Peak-width extraction from a timing histogram; results in seconds.
pub trait FwhmEstimator: Named + Send + Sync {
    fn fwhm(&self, hist: &Histogram) -> Result<f64, AnalysisError>;
}

/// Half-maximum crossings by linear interpolation between bin centers.
pub struct LinearInterpolation;

impl Named for LinearInterpolation {
    fn name(&self) -> &'static str {
        "linear"
    }
}

impl FwhmEstimator for LinearInterpolation {
    fn fwhm(&self, hist: &Histogram) -> Result<f64, AnalysisError> {
        let c = &hist.counts;
        let max = *c.iter().max().ok_or(AnalysisError::EmptyHistogram)?;
        if max == 0 {
            return Err(AnalysisError::EmptyHistogram);
        }
        let half = max as f64 / 2.0;
        if c[0] as f64 >= half || c[c.len() - 1] as f64 >= half {
            return Err(AnalysisError::PeakAtEdge);
        }
        let w = hist.bin_width_ps as f64;
        let mut crossings = Vec::new();
        for k in 0..c.len() - 1 {
            let (a, b) = (c[k] as f64, c[k + 1] as f64);
            let x0 = hist.bin_center_ps(k);
            if a < half && b >= half {
                crossings.push(x0 + (half - a) / (b - a) * w);
            } else if a >= half && b < half {
                crossings.push(x0 + (a - half) / (a - b) * w);
            }
        }
        if crossings.len() != 2 {
            return Err(AnalysisError::Multimodal {
                crossings_ps: crossings,
            });
        }
        Ok((crossings[1] - crossings[0]) * 1e-12)
    }
}

/// Weighted least-squares parabola through the log counts of the contiguous
/// bins above half maximum around the peak.
pub struct GaussianFit;

impl Named for GaussianFit {
    fn name(&self) -> &'static str {
        "gaussian"
    }
}

impl FwhmEstimator for GaussianFit {
    fn fwhm(&self, hist: &Histogram) -> Result<f64, AnalysisError> {
        let c = &hist.counts;
        let (peak, &max) = c
            .iter()
            .enumerate()
            .max_by_key(|&(k, v)| (*v, std::cmp::Reverse(k)))
            .ok_or(AnalysisError::EmptyHistogram)?;
        if max == 0 {
            return Err(AnalysisError::EmptyHistogram);
        }
        let half = max as f64 / 2.0;
        let mut lo = peak;
        while lo > 0 && c[lo - 1] as f64 >= half {
            lo -= 1;
        }
        let mut hi = peak;
        while hi + 1 < c.len() && c[hi + 1] as f64 >= half {
            hi += 1;
        }
        if hi - lo < 2 {
            return Err(AnalysisError::TooFewBins);
        }
        let x0 = hist.bin_center_ps(peak);
        // normal equations for y = p0 + p1·x + p2·x², weights = counts
        let mut m = [[0.0f64; 4]; 3];
        for k in lo..=hi {
            let x = hist.bin_center_ps(k) - x0;
            let y = (c[k] as f64).ln();
            let wt = c[k] as f64;
            let basis = [1.0, x, x * x];
            for r in 0..3 {
                for col in 0..3 {
                    m[r][col] += wt * basis[r] * basis[col];
                }
                m[r][3] += wt * basis[r] * y;
            }
        }
        let p2 = solve3(m).ok_or(AnalysisError::TooFewBins)?[2];
        if !(p2 < 0.0) {
            return Err(AnalysisError::TooFewBins);
        }
        let sigma = (-1.0 / (2.0 * p2)).sqrt();
        Ok(GAUSSIAN_FWHM_PER_SIGMA * sigma * 1e-12)
    }
}

fn solve3(mut m: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..4 {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

pub fn fwhm_registry() -> &'static Registry<dyn FwhmEstimator> {
    static REGISTRY: OnceLock<Registry<dyn FwhmEstimator>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        Registry::<dyn FwhmEstimator>::new("fwhm estimator")
            .with(Box::new(LinearInterpolation))
            .with(Box::new(GaussianFit))
    })
}

/// FWHM with the default linear-interpolation estimator, seconds.
pub fn fwhm(hist: &Histogram) -> Result<f64, AnalysisError> {
    LinearInterpolation.fwhm(hist)
}

/// Bin width giving about 25 bins across a peak of the given FWHM.
pub fn auto_bin_width_ps(fwhm_estimate_ps: f64) -> u64 {
    ((fwhm_estimate_ps / 25.0).round() as u64).max(1)
}

/// Sync-delay histogram windowed around the peak.
///
/// The window is centered on the median folded delay and spans ±8 FWHM of a
/// Gaussian with the interquartile-range width; the peak must not straddle the
/// period boundary. Without an explicit bin width one is picked by
/// [`auto_bin_width_ps`].
pub fn jitter_histogram(
    events_ps: &[u64],
    sync_period_ps: u64,
    bin_width_ps: Option<u64>,
) -> Result<Histogram, AnalysisError> {
    if events_ps.is_empty() || sync_period_ps == 0 {
        return Err(AnalysisError::EmptyHistogram);
    }
    let mut folded: Vec<u64> = events_ps.iter().map(|t| t % sync_period_ps).collect();
    folded.sort_unstable();
    let q = |f: f64| folded[((folded.len() - 1) as f64 * f).round() as usize] as f64;
    let median = q(0.5);
    let fwhm_est = GAUSSIAN_FWHM_PER_SIGMA * (q(0.75) - q(0.25)) / 1.349;
    let w = bin_width_ps.unwrap_or_else(|| auto_bin_width_ps(fwhm_est));
    let half_window = (8.0 * fwhm_est).max(20.0 * w as f64);
    let bins = (2.0 * half_window / w as f64).ceil() as usize + 1;
    let origin = (median - half_window).round() as i64;
    Ok(sync_delay_histogram_in(
        events_ps,
        sync_period_ps,
        Binning {
            origin_ps: origin,
            bin_width_ps: w,
            bins,
        },
    ))
}
