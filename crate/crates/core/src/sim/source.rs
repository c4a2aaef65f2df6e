//! Photon sources. `cw` is a coherent continuous-wave laser (Poissonian
//! arrivals); `pulsed` delivers one photon candidate per period at a fixed
//! phase, for timing-jitter measurements against a sync reference.

use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::model::SourceSpec;
use crate::registry::{Named, Registry};

pub trait PhotonSource: Named + Send + Sync {
    /// Sorted arrival times in `[0, duration)` of a source emitting `rate`
    /// photons/s, seen through a loss of `transmission` (e.g. an alignment tap).
    fn arrivals(&self, rate: f64, transmission: f64, duration: f64, spec: &SourceSpec, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

pub struct ContinuousWave;

impl Named for ContinuousWave {
    fn name(&self) -> &'static str {
        "cw"
    }
}

impl PhotonSource for ContinuousWave {
    fn arrivals(&self, rate: f64, transmission: f64, duration: f64, _spec: &SourceSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
        poisson_arrivals(rate * transmission, duration, rng)
    }
}

pub struct Pulsed;

impl Named for Pulsed {
    fn name(&self) -> &'static str {
        "pulsed"
    }
}

impl PhotonSource for Pulsed {
    fn arrivals(&self, rate: f64, transmission: f64, duration: f64, spec: &SourceSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if !(rate > 0.0) {
            return Vec::new();
        }
        // the loss thins pulses; the repetition rate is unchanged
        let period = 1.0 / rate;
        let n = ((duration - spec.pulse_offset) / period).ceil().max(0.0) as usize;
        (0..n)
            .map(|k| spec.pulse_offset + k as f64 * period)
            .filter(|&t| t < duration)
            .filter(|_| transmission >= 1.0 || rng.random::<f64>() < transmission)
            .collect()
    }
}

pub fn source_registry() -> &'static Registry<dyn PhotonSource> {
    static REGISTRY: OnceLock<Registry<dyn PhotonSource>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        Registry::<dyn PhotonSource>::new("photon source")
            .with(Box::new(ContinuousWave))
            .with(Box::new(Pulsed))
    })
}

/// Homogeneous Poisson process on `[0, duration)` from exponential gaps.
pub fn poisson_arrivals<R: Rng + ?Sized>(rate: f64, duration: f64, rng: &mut R) -> Vec<f64> {
    if !(rate > 0.0) || !(duration > 0.0) {
        return Vec::new();
    }
    let exp = Exp::new(rate).expect("positive rate");
    let expected = rate * duration;
    let mut out = Vec::with_capacity((expected + 4.0 * expected.sqrt() + 8.0) as usize);
    let mut t = exp.sample(rng);
    while t < duration {
        out.push(t);
        t += exp.sample(rng);
    }
    out
}

/// Seeded convenience wrapper around [`poisson_arrivals`].
pub fn generate_poisson_arrivals(rate: f64, duration: f64, seed: u64) -> Vec<f64> {
    use rand::SeedableRng;
    poisson_arrivals(rate, duration, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_empty() {
        assert!(generate_poisson_arrivals(0.0, 1.0, 1).is_empty());
    }

    #[test]
    fn sorted_and_in_range() {
        let t = generate_poisson_arrivals(1e4, 0.5, 3);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert!(t.iter().all(|&x| (0.0..0.5).contains(&x)));
    }

    #[test]
    fn pulsed_is_periodic() {
        let spec = SourceSpec {
            kind: "pulsed".into(),
            pulse_offset: 500e-12,
        };
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let t = Pulsed.arrivals(1e7, 1.0, 1e-6, &spec, &mut rng);
        assert_eq!(t.len(), 10);
        for (k, &x) in t.iter().enumerate() {
            assert!((x - (500e-12 + k as f64 * 1e-7)).abs() < 1e-18);
        }
    }

    #[test]
    fn loss_thins_pulses_at_fixed_period() {
        let spec = SourceSpec::default();
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let t = Pulsed.arrivals(1e6, 0.5, 0.1, &spec, &mut rng);
        assert!((t.len() as f64 - 5e4).abs() < 4.0 * 5e4f64.sqrt(), "{}", t.len());
        for x in t {
            let phase = (x - spec.pulse_offset) * 1e6;
            assert!((phase - phase.round()).abs() < 1e-6);
        }
    }

    #[test]
    fn registry_has_both_sources() {
        assert_eq!(source_registry().names(), vec!["cw", "pulsed"]);
    }
}
