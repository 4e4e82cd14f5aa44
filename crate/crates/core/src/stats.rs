//! Sample statistics and the deterministic parallel Monte Carlo driver.
//!
//! Every sample `m` draws from its own ChaCha stream `(seed, m)`, samples are
//! grouped in fixed-size chunks, and chunk statistics are merged with a
//! fixed-shape pairwise tree. Results are therefore bit-identical for any
//! number of rayon workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Random stream type handed to per-sample closures.
pub type SampleRng = ChaCha8Rng;

/// Samples per work unit of the parallel driver.
pub const CHUNK_SIZE: usize = 512;

/// The independent stream for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Fills `out` with i.i.d. standard normals.
pub fn fill_normals(rng: &mut SampleRng, out: &mut [f64]) {
    for z in out.iter_mut() {
        *z = StandardNormal.sample(rng);
    }
}

/// Running count, mean, centred second moment and extremes (Welford / Chan).
///
/// A constant input stream yields a mean equal to that constant and a second
/// moment of exactly zero, also after merging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Default for Moments {
    fn default() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        Self {
            count,
            mean: self.mean + d * nb / count as f64,
            m2: self.m2 + other.m2 + d * d * na * nb / count as f64,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance of the pushed values.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// Standard error of the mean, `SD/√M`.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// An estimator value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    pub value: f64,
    /// Standard deviation of the estimator (sample SD divided by `√M`).
    pub std_dev: f64,
    pub samples: usize,
    pub seed: u64,
}

impl McResult {
    pub fn from_moments(moments: &Moments, seed: u64) -> Self {
        Self {
            value: moments.mean(),
            std_dev: moments.std_error(),
            samples: moments.count() as usize,
            seed,
        }
    }

    /// Scales value and standard deviation (unit conversion).
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            std_dev: self.std_dev * factor.abs(),
            ..self
        }
    }

    /// `√(σ₁² + σ₂²)`.
    pub fn combined_sd(&self, other: &Self) -> f64 {
        self.std_dev.hypot(other.std_dev)
    }
}

/// Runs `sample(scratch, rng, m)` for `m ∈ 0..samples` and returns per-column
/// moments. `init` builds per-chunk scratch space.
pub fn run_samples<const K: usize, S, I, F>(samples: usize, seed: u64, init: I, sample: F) -> [Moments; K]
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut SampleRng, u64) -> [f64; K] + Sync,
{
    let chunks = samples.div_ceil(CHUNK_SIZE);
    let partial: Vec<[Moments; K]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut scratch = init();
            let mut acc = [Moments::default(); K];
            let end = ((c + 1) * CHUNK_SIZE).min(samples);
            for m in c * CHUNK_SIZE..end {
                let mut rng = sample_rng(seed, m as u64);
                let values = sample(&mut scratch, &mut rng, m as u64);
                for (a, v) in acc.iter_mut().zip(values) {
                    a.push(v);
                }
            }
            acc
        })
        .collect();
    tree_reduce(&partial)
}

fn tree_reduce<const K: usize>(parts: &[[Moments; K]]) -> [Moments; K] {
    match parts.len() {
        0 => [Moments::default(); K],
        1 => parts[0],
        len => {
            let (left, right) = parts.split_at(len / 2);
            let (l, r) = (tree_reduce(left), tree_reduce(right));
            std::array::from_fn(|k| l[k].merge(&r[k]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn constant_stream_has_zero_variance() {
        let out = run_samples::<1, _, _, _>(5000, 1, || (), |_, _, _| [0.1]);
        assert_eq!(out[0].mean(), 0.1);
        assert_eq!(out[0].variance(), 0.0);
        assert_eq!(out[0].count(), 5000);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: f64 = sample_rng(7, 3).random();
        let b: f64 = sample_rng(7, 3).random();
        let c: f64 = sample_rng(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let work = || {
            run_samples::<2, _, _, _>(
                4000,
                11,
                || vec![0.0; 3],
                |buf, rng, _| {
                    fill_normals(rng, buf);
                    [buf[0], buf[1] * buf[2]]
                },
            )
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(work);
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(work);
        assert_eq!(one, four);
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(xs in prop::collection::vec(-1e3f64..1e3, 1..200), split in 0usize..200) {
            let split = split.min(xs.len());
            let mut all = Moments::default();
            xs.iter().for_each(|&x| all.push(x));
            let (mut a, mut b) = (Moments::default(), Moments::default());
            xs[..split].iter().for_each(|&x| a.push(x));
            xs[split..].iter().for_each(|&x| b.push(x));
            let merged = a.merge(&b);
            prop_assert_eq!(merged.count(), all.count());
            prop_assert!((merged.mean() - all.mean()).abs() <= 1e-9 * (1.0 + all.mean().abs()));
            prop_assert!((merged.variance() - all.variance()).abs() <= 1e-7 * (1.0 + all.variance()));
        }
    }
}
