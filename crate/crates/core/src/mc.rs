//! Shared Monte Carlo plumbing: deterministic substreams and estimates with
//! standard errors.
//!
//! Every estimator in the crate takes an explicit seed and derives
//! independent substreams with [`derive_seed`], so identical seeds give
//! bit-identical results regardless of worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A Monte Carlo estimate together with its standard error and sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

impl McEstimate {
    /// Sample mean and standard error of the mean.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as u64;
        if n == 0 {
            return McEstimate { mean: f64::NAN, std_error: f64::NAN, n: 0 };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return McEstimate { mean, std_error: f64::INFINITY, n };
        }
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
        McEstimate { mean, std_error: (var / n as f64).sqrt(), n }
    }

    /// `|mean - target| <= k` standard errors.
    pub fn within_se(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// splitmix64 step; decorrelates seed/stream pairs.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic substream seed for worker/stream `stream` of a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut s = master ^ 0x6a09_e667_f3bc_c908u64.wrapping_mul(stream.wrapping_add(1));
    let a = splitmix64(&mut s);
    let mut s2 = a ^ stream;
    splitmix64(&mut s2)
}

/// The crate-wide RNG. ChaCha keeps streams reproducible across platforms.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs `per_sample` for `n` samples split into deterministic chunks and
/// collects all outputs in sample order. With the `parallel` feature the
/// chunks run on a thread pool; the output is identical either way because
/// each chunk owns an independently seeded stream and results are reassembled
/// in chunk order.
pub fn sample_map<T, F>(n: u64, seed: u64, per_sample: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng) -> T + Sync,
{
    const CHUNK: u64 = 4096;
    let n_chunks = n.div_ceil(CHUNK);
    let chunk_sizes: Vec<(u64, u64)> =
        (0..n_chunks).map(|c| (c, CHUNK.min(n - c * CHUNK))).collect();

    let run_chunk = |&(c, size): &(u64, u64)| -> Vec<T> {
        let mut rng = rng_from_seed(derive_seed(seed, c));
        (0..size).map(|_| per_sample(&mut rng)).collect()
    };

    #[cfg(feature = "parallel")]
    let chunks: Vec<Vec<T>> = {
        use rayon::prelude::*;
        chunk_sizes.par_iter().map(run_chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Vec<T>> = chunk_sizes.iter().map(run_chunk).collect();

    chunks.into_iter().flatten().collect()
}

/// Mean/SE over `n` evaluations of a scalar statistic.
pub fn estimate<F>(n: u64, seed: u64, stat: F) -> McEstimate
where
    F: Fn(&mut Rng) -> f64 + Sync,
{
    let samples = sample_map(n, seed, stat);
    McEstimate::from_samples(&samples)
}
