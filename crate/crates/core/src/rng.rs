//! Counter-style substreams for reproducible Monte Carlo.
//!
//! Trials are grouped in blocks of [`BLOCK_TRIALS`]. Block `b` draws from a
//! ChaCha8 generator seeded with the run seed and switched to stream `b`, so
//! any trial's noise depends only on `(seed, trial index)` and never on how
//! blocks are scheduled across threads. Gaussian deviates come from the
//! ziggurat sampler of `rand_distr::StandardNormal`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const BLOCK_TRIALS: usize = 1024;

pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

pub fn fill_standard_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out {
        *v = StandardNormal.sample(rng);
    }
}

pub fn block_count(trials: usize) -> usize {
    trials.div_ceil(BLOCK_TRIALS)
}

/// Trials `[start, end)` of block `b`.
pub fn block_range(trials: usize, b: usize) -> (usize, usize) {
    let start = b * BLOCK_TRIALS;
    (start, (start + BLOCK_TRIALS).min(trials))
}

/// Pre-drawn standard normal noise, `trials x dim`, laid out trial by trial.
///
/// Reusing one bank across parameter points gives common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBank {
    dim: usize,
    trials: usize,
    seed: u64,
    data: Vec<f64>,
}

impl NoiseBank {
    pub fn new(dim: usize, trials: usize, seed: u64) -> Self {
        let mut data = vec![0.0; dim * trials];
        for b in 0..block_count(trials) {
            let (start, end) = block_range(trials, b);
            let mut rng = block_rng(seed, b as u64);
            fill_standard_normal(&mut rng, &mut data[start * dim..end * dim]);
        }
        Self {
            dim,
            trials,
            seed,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }
}
