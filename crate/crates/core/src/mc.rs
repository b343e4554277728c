//! Seeded, thread-count independent Monte Carlo.
//!
//! Trials are split into fixed chunks. Chunk `k` owns ChaCha8 stream `k`
//! of the run seed, accumulates its trials sequentially, and the chunk
//! partial sums are combined by a fixed-shape pairwise tree. Results are
//! therefore bit-identical for any rayon pool size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type McRng = ChaCha8Rng;

pub const CHUNK: usize = 256;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { mean: value, std_err: 0.0, n: 0 }
    }

    /// `|self − other| ≤ k` combined standard errors (plus `abs_tol`).
    pub fn agrees_with(&self, other: f64, k: f64, abs_tol: f64) -> bool {
        (self.mean - other).abs() <= k * self.std_err + abs_tol
    }
}

/// RNG for stream `stream` of run `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> McRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub trials: usize,
    pub seed: u64,
}

impl MonteCarlo {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self { trials, seed }
    }

    /// Runs `f` once per trial and returns the estimate of each of its `K`
    /// outputs.
    pub fn run<const K: usize, F>(&self, f: F) -> [Estimate; K]
    where
        F: Fn(&mut McRng) -> [f64; K] + Sync,
    {
        let n = self.trials;
        let chunks = n.div_ceil(CHUNK);
        let partials: Vec<[(f64, f64); K]> = (0..chunks)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream_rng(self.seed, k as u64);
                let len = CHUNK.min(n - k * CHUNK);
                let mut acc = [(0.0, 0.0); K];
                for _ in 0..len {
                    let v = f(&mut rng);
                    for (a, x) in acc.iter_mut().zip(v) {
                        a.0 += x;
                        a.1 += x * x;
                    }
                }
                acc
            })
            .collect();
        let total = pairwise(&partials);
        total.map(|(s, s2)| finish(s, s2, n))
    }

    /// Collects one value per trial, in trial order.
    pub fn samples<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut McRng) -> T + Sync,
    {
        let n = self.trials;
        let chunks = n.div_ceil(CHUNK);
        let parts: Vec<Vec<T>> = (0..chunks)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream_rng(self.seed, k as u64);
                let len = CHUNK.min(n - k * CHUNK);
                (0..len).map(|_| f(&mut rng)).collect()
            })
            .collect();
        parts.into_iter().flatten().collect()
    }
}

fn pairwise<const K: usize>(parts: &[[(f64, f64); K]]) -> [(f64, f64); K] {
    match parts.len() {
        0 => [(0.0, 0.0); K],
        1 => parts[0],
        len => {
            let (l, r) = parts.split_at(len / 2);
            let (a, b) = (pairwise(l), pairwise(r));
            let mut out = a;
            for (o, x) in out.iter_mut().zip(b) {
                o.0 += x.0;
                o.1 += x.1;
            }
            out
        }
    }
}

fn finish(sum: f64, sum_sq: f64, n: usize) -> Estimate {
    if n == 0 {
        return Estimate { mean: f64::NAN, std_err: f64::NAN, n };
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Estimate { mean, std_err: (var / nf).sqrt(), n }
}

/// Mean and standard error of a finished sample.
pub fn summarize(values: &[f64]) -> Estimate {
    let s: f64 = values.iter().sum();
    let s2: f64 = values.iter().map(|x| x * x).sum();
    finish(s, s2, values.len())
}
