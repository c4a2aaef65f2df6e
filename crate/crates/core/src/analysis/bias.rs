use super::AnalysisError;
use crate::model::REFERENCE_DARK_FRACTION;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPoint {
    pub bias: f64,
    /// Total count rate under illumination, events/s.
    pub count_rate: f64,
    /// Count rate without illumination, events/s.
    pub dark_rate: f64,
}

/// Count-rate curves against bias, with strictly increasing bias.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasSweep {
    points: Vec<BiasPoint>,
}

impl BiasSweep {
    pub fn new(points: Vec<BiasPoint>) -> Result<Self, AnalysisError> {
        if points.is_empty() {
            return Err(AnalysisError::EmptySweep);
        }
        if let Some(k) = points.windows(2).position(|w| !(w[1].bias > w[0].bias)) {
            return Err(AnalysisError::NonIncreasingBias { index: k + 1 });
        }
        Ok(BiasSweep { points })
    }

    pub fn points(&self) -> &[BiasPoint] {
        &self.points
    }
}

/// Signed distance from the 10 % rule as log(DCR / signal) − log(f / (1 − f)),
/// where signal = CR − DCR; defined while both rates are positive.
fn log_excess(p: &BiasPoint) -> Option<f64> {
    let signal = p.count_rate - p.dark_rate;
    let odds = REFERENCE_DARK_FRACTION / (1.0 - REFERENCE_DARK_FRACTION);
    (p.dark_rate > 0.0 && signal > 0.0).then(|| (p.dark_rate / signal).ln() - odds.ln())
}

fn linear_excess(p: &BiasPoint) -> f64 {
    p.dark_rate - REFERENCE_DARK_FRACTION * p.count_rate
}

/// Bias at which the dark rate first reaches 10 % of the total count rate.
///
/// Brackets the first upward crossing between adjacent samples and
/// interpolates linearly in log(DCR / (CR − DCR)); with an exponential dark
/// rate over a flat signal plateau this is exact. Falls back to the linear
/// excess when a rate in the bracket is zero.
pub fn normalize_bias(sweep: &BiasSweep) -> Result<f64, AnalysisError> {
    let pts = sweep.points();
    if linear_excess(&pts[0]) >= 0.0 {
        return if linear_excess(&pts[0]) == 0.0 {
            Ok(pts[0].bias)
        } else {
            Err(AnalysisError::NoCrossing)
        };
    }
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if linear_excess(b) < 0.0 {
            continue;
        }
        let (fa, fb) = match (log_excess(a), log_excess(b)) {
            (Some(fa), Some(fb)) => (fa, fb),
            _ => (linear_excess(a), linear_excess(b)),
        };
        let t = if fb == fa { 1.0 } else { -fa / (fb - fa) };
        return Ok(a.bias + t.clamp(0.0, 1.0) * (b.bias - a.bias));
    }
    Err(AnalysisError::NoCrossing)
}

/// Index of the minimal NEP; equal values resolve to the lowest bias.
/// `None` entries (unresolved NEP) are skipped.
pub fn min_nep_index(neps: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in neps.iter().enumerate() {
        if let Some(v) = *v {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((k, v));
            }
        }
    }
    best.map(|(k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(amp: f64, slope: f64, signal: f64, lo: f64, hi: f64, step: f64) -> BiasSweep {
        let n = ((hi - lo) / step).round() as usize;
        BiasSweep::new(
            (0..=n)
                .map(|k| {
                    let i = lo + k as f64 * step;
                    let d = amp * (slope * (i - 1.0)).exp();
                    BiasPoint {
                        bias: i,
                        count_rate: signal + d,
                        dark_rate: d,
                    }
                })
                .collect(),
        )
        .unwrap()
    }

    fn dense_scan(amp: f64, slope: f64, signal: f64, lo: f64, hi: f64) -> f64 {
        let mut i = lo;
        while i <= hi {
            let d = amp * (slope * (i - 1.0)).exp();
            if d >= 0.1 * (signal + d) {
                return i;
            }
            i += 1e-5;
        }
        panic!("no crossing in oracle scan");
    }

    #[test]
    fn matches_dense_scan() {
        let s = synthetic(1e5, 23.0, 4e5, 0.6, 1.1, 0.01);
        let got = normalize_bias(&s).unwrap();
        let want = dense_scan(1e5, 23.0, 4e5, 0.6, 1.1);
        assert!((got - want).abs() < 2e-4, "{got} vs {want}");
    }

    #[test]
    fn no_crossing_is_an_error() {
        let s = synthetic(1e2, 23.0, 4e5, 0.6, 1.1, 0.01);
        assert_eq!(normalize_bias(&s), Err(AnalysisError::NoCrossing));
    }

    #[test]
    fn sweep_must_increase() {
        let p = BiasPoint {
            bias: 1.0,
            count_rate: 1.0,
            dark_rate: 0.0,
        };
        assert_eq!(BiasSweep::new(vec![p, p]), Err(AnalysisError::NonIncreasingBias { index: 1 }));
        assert_eq!(BiasSweep::new(vec![]), Err(AnalysisError::EmptySweep));
    }

    #[test]
    fn zero_dark_samples_fall_back_to_linear() {
        let s = BiasSweep::new(vec![
            BiasPoint { bias: 0.9, count_rate: 100.0, dark_rate: 0.0 },
            BiasPoint { bias: 1.0, count_rate: 100.0, dark_rate: 20.0 },
        ])
        .unwrap();
        // excess −10 → +10
        assert!((normalize_bias(&s).unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn min_nep_ties_go_low() {
        assert_eq!(min_nep_index(&[Some(2.0), Some(1.0), Some(1.0)]), Some(1));
        assert_eq!(min_nep_index(&[None, Some(3.0)]), Some(1));
        assert_eq!(min_nep_index(&[None]), None);
    }

    proptest! {
        #[test]
        fn monotone_sweeps_have_one_crossing(amp in 1e4f64..1e6, slope in 10.0f64..40.0, signal in 1e5f64..8e5) {
            let s = synthetic(amp, slope, signal, 0.3, 1.3, 0.005);
            if let Ok(i) = normalize_bias(&s) {
                let want = dense_scan(amp, slope, signal, 0.3, 1.3);
                prop_assert!((i - want).abs() < 2e-4);
                // unique: excess is negative everywhere below and non-negative above
                for p in s.points().iter().filter(|p| (p.bias - i).abs() > 1e-3) {
                    prop_assert_eq!(p.bias < i, linear_excess(p) < 0.0);
                }
            }
        }
    }
}
