use rayon::prelude::*;

/// Uniform bins `[origin + k·w, origin + (k+1)·w)`, `k < bins`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Binning {
    pub origin_ps: i64,
    pub bin_width_ps: u64,
    pub bins: usize,
}

impl Binning {
    /// Bins of width `bin_width_ps` from zero up to and including `max_ps`.
    pub fn covering(bin_width_ps: u64, max_ps: u64) -> Self {
        assert!(bin_width_ps > 0, "bin width must be positive");
        Binning {
            origin_ps: 0,
            bin_width_ps,
            bins: (max_ps / bin_width_ps) as usize + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub origin_ps: i64,
    pub bin_width_ps: u64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(binning: Binning) -> Self {
        assert!(binning.bin_width_ps > 0, "bin width must be positive");
        Histogram {
            origin_ps: binning.origin_ps,
            bin_width_ps: binning.bin_width_ps,
            counts: vec![0; binning.bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn binning(&self) -> Binning {
        Binning {
            origin_ps: self.origin_ps,
            bin_width_ps: self.bin_width_ps,
            bins: self.counts.len(),
        }
    }

    /// Builds a histogram from already-binned counts.
    pub fn from_counts(origin_ps: i64, bin_width_ps: u64, counts: Vec<u64>) -> Self {
        Histogram {
            origin_ps,
            bin_width_ps,
            counts,
            underflow: 0,
            overflow: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, value_ps: i64) {
        let rel = value_ps as i128 - self.origin_ps as i128;
        if rel < 0 {
            self.underflow += 1;
            return;
        }
        let k = rel / self.bin_width_ps as i128;
        if k < self.counts.len() as i128 {
            self.counts[k as usize] += 1;
        } else {
            self.overflow += 1;
        }
    }

    /// Associative, commutative merge of two histograms with equal binning.
    pub fn merge(mut self, other: &Histogram) -> Histogram {
        assert_eq!(self.binning(), other.binning(), "merging histograms with different binning");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self
    }

    /// Counts inside the bins (excludes under/overflow).
    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.in_range() + self.underflow + self.overflow
    }

    pub fn bin_start_ps(&self, k: usize) -> i64 {
        self.origin_ps + (k as u64 * self.bin_width_ps) as i64
    }

    pub fn bin_center_ps(&self, k: usize) -> f64 {
        self.bin_start_ps(k) as f64 + 0.5 * self.bin_width_ps as f64
    }

    /// Index of the bin containing `value_ps`, if any.
    pub fn bin_of(&self, value_ps: i64) -> Option<usize> {
        let rel = value_ps - self.origin_ps;
        if rel < 0 {
            return None;
        }
        let k = (rel as u64 / self.bin_width_ps) as usize;
        (k < self.counts.len()).then_some(k)
    }

    /// Plot-ready CSV: `bin_start_ps,count`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_start_ps,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{},{}\n", self.bin_start_ps(k), c));
        }
        s
    }
}

const CHUNK: usize = 1 << 14;

/// Start-multi-stop histogram of one channel's events (sorted, ps): every
/// event is a start and every later event within `max_lag_ps` is a stop.
pub fn interarrival_histogram(events_ps: &[u64], binning: Binning, max_lag_ps: u64) -> Histogram {
    let n = events_ps.len();
    (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut h = Histogram::new(binning);
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(n);
            for i in lo..hi {
                let start = events_ps[i];
                for &stop in &events_ps[i + 1..] {
                    let lag = stop - start;
                    if lag > max_lag_ps {
                        break;
                    }
                    if lag > 0 {
                        h.add(lag as i64);
                    }
                }
            }
            h
        })
        .reduce(|| Histogram::new(binning), |a, b| a.merge(&b))
}

/// Delay of every event relative to the preceding sync pulse, folded modulo
/// `sync_period_ps`, in bins of `bin_width_ps` covering one period.
pub fn sync_delay_histogram(events_ps: &[u64], sync_period_ps: u64, bin_width_ps: u64) -> Histogram {
    assert!(sync_period_ps > 0, "sync period must be positive");
    let binning = Binning {
        origin_ps: 0,
        bin_width_ps,
        bins: sync_period_ps.div_ceil(bin_width_ps) as usize,
    };
    sync_delay_histogram_in(events_ps, sync_period_ps, binning)
}

/// [`sync_delay_histogram`] with explicit binning, e.g. a window around the peak.
pub fn sync_delay_histogram_in(events_ps: &[u64], sync_period_ps: u64, binning: Binning) -> Histogram {
    assert!(sync_period_ps > 0, "sync period must be positive");
    events_ps
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut h = Histogram::new(binning);
            for &t in chunk {
                h.add((t % sync_period_ps) as i64);
            }
            h
        })
        .reduce(|| Histogram::new(binning), |a, b| a.merge(&b))
}
