//! Time-tagging electronics: channel jitter and non-paralyzable dead time,
//! the binary timetag format and the histogramming kernels.

mod format;
mod histogram;

pub use format::{
    decode_timetags, encode_timetags, read_timetags, write_timetags, FormatError, ReadMode, TimetagFile,
    TimetagReader, HEADER_LEN, MAGIC, RECORD_LEN, VERSION,
};
pub use histogram::{interarrival_histogram, sync_delay_histogram, sync_delay_histogram_in, Binning, Histogram};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::model::ReadoutModel;

/// Adds Gaussian channel jitter, re-sorts, then applies the dead time.
pub fn apply_tcspc<R: Rng + ?Sized>(events: &[f64], readout: &ReadoutModel, rng: &mut R) -> Vec<f64> {
    let mut jittered = events.to_vec();
    add_gaussian_jitter(&mut jittered, readout.tcspc_sigma, rng);
    jittered.sort_by(f64::total_cmp);
    dead_time_filter(&jittered, readout.tcspc_dead_time)
}

/// In-place Gaussian displacement of every time; no-op for `sigma == 0`.
pub fn add_gaussian_jitter<R: Rng + ?Sized>(times: &mut [f64], sigma: f64, rng: &mut R) {
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        for t in times.iter_mut() {
            *t += normal.sample(rng);
        }
    }
}

/// Non-paralyzable dead time: keep an event iff it is at least `dead_time`
/// after the previously kept event. Discarded events do not extend it.
pub fn dead_time_filter(sorted: &[f64], dead_time: f64) -> Vec<f64> {
    let mut kept = Vec::with_capacity(sorted.len());
    let mut last = f64::NEG_INFINITY;
    for &t in sorted {
        if t - last >= dead_time {
            kept.push(t);
            last = t;
        }
    }
    kept
}
