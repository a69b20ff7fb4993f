//! Keyed random streams and Monte-Carlo plumbing.
//!
//! Every random draw in the lab comes from a ChaCha8 stream whose seed is a
//! pure function of a [`Key`]: the user seed folded with experiment tags and
//! integer coordinates (λ, pair index, replicate, chunk). Work is split into
//! fixed-size chunks, one stream per chunk, and chunk results are merged in
//! chunk order, so estimates do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::vecmath::Vec3;

/// Samples per independent stream.
pub const CHUNK: usize = 1 << 14;

pub type Rng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derivation path for a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Key(u64);

impl Key {
    pub fn new(seed: u64) -> Self {
        Key(splitmix64(seed))
    }

    pub fn with(self, tag: &str) -> Self {
        self.with_u64(fnv1a(tag))
    }

    pub fn with_u64(self, x: u64) -> Self {
        Key(splitmix64(self.0 ^ splitmix64(x.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    /// Folds a float coordinate (e.g. λ) in by its bit pattern.
    pub fn with_f64(self, x: f64) -> Self {
        self.with_u64(x.to_bits())
    }

    pub fn rng(self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    /// Scaled Bernoulli mean: `scale * hits / n`.
    pub fn from_hits(hits: u64, samples: usize, scale: f64) -> Self {
        let n = samples as f64;
        let p = hits as f64 / n;
        Estimate {
            value: scale * p,
            stderr: scale * (p * (1.0 - p) / n).sqrt(),
            samples,
        }
    }

    /// Number of standard errors separating the estimate from `target`.
    /// A zero stderr with an exact match counts as 0.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.value - target).abs();
        if diff == 0.0 {
            0.0
        } else if self.stderr == 0.0 {
            f64::INFINITY
        } else {
            diff / self.stderr
        }
    }
}

/// Runs `f` over `samples` draws split into [`CHUNK`]-sized pieces, each with
/// its own stream `key.with_u64(chunk)`. Results come back in chunk order.
pub fn chunked<T, F>(key: Key, samples: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng, usize) -> T + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK.min(samples - c * CHUNK);
            let mut rng = key.with_u64(c as u64).rng();
            f(&mut rng, n)
        })
        .collect()
}

/// Counts draws for which `trial` returns true.
pub fn count_hits<F>(key: Key, samples: usize, trial: F) -> u64
where
    F: Fn(&mut Rng) -> bool + Sync,
{
    chunked(key, samples, |rng, n| (0..n).filter(|_| trial(rng)).count() as u64)
        .into_iter()
        .sum()
}

pub fn unit_vector(rng: &mut Rng) -> Vec3 {
    UnitSphere.sample(rng)
}

/// Uniform point in the unit ball of ℝ³.
pub fn ball_point(rng: &mut Rng) -> Vec3 {
    UnitBall.sample(rng)
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    use rand::Rng as _;
    lo + (hi - lo) * rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn keys_are_reproducible_and_distinct() {
        let a = Key::new(7).with("tube").with_u64(3);
        let b = Key::new(7).with("tube").with_u64(3);
        assert_eq!(a, b);
        assert_ne!(a, Key::new(7).with("tube").with_u64(4));
        assert_ne!(a, Key::new(8).with("tube").with_u64(3));
        assert_ne!(Key::new(7).with("a"), Key::new(7).with("b"));
        let x: u64 = a.rng().random();
        let y: u64 = b.rng().random();
        assert_eq!(x, y);
    }

    #[test]
    fn chunked_results_ignore_thread_count() {
        let key = Key::new(1).with("chunk-test");
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| count_hits(key, 100_003, |rng| rng.random::<f64>() < 0.3))
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn bernoulli_estimate_is_calibrated() {
        let key = Key::new(11);
        let hits = count_hits(key, 200_000, |rng| rng.random::<f64>() < 0.25);
        let est = Estimate::from_hits(hits, 200_000, 1.0);
        assert!(est.z_score(0.25) < 4.0, "{est:?}");
    }

    #[test]
    fn ball_points_stay_inside() {
        let mut rng = Key::new(3).rng();
        for _ in 0..1000 {
            let p = ball_point(&mut rng);
            assert!(crate::vecmath::norm(&p) <= 1.0);
            let u = unit_vector(&mut rng);
            assert!((crate::vecmath::norm(&u) - 1.0).abs() < 1e-12);
        }
    }
}
