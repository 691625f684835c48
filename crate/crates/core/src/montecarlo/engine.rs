//! Chunked, seeded simulation driver.
//!
//! Work is cut into chunks of `chunk_size` paths. Chunk `c` draws from the
//! ChaCha8 stream `c` of the master seed, so the random numbers a path sees
//! depend only on `(seed, chunk, position)` and never on the worker count.
//! Per-chunk results are reduced in chunk order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::heavy_tails::ParetoLaw;
use crate::marked::MarkedPattern;
use crate::point_processes::BaseProcessModel;

pub const DEFAULT_CHUNK_SIZE: u64 = 1 << 16;

/// Sample budget and reproducibility knobs of one Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub samples: u64,
    pub seed: u64,
    pub chunk_size: u64,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 0,
            chunk_size: DEFAULT_CHUNK_SIZE,
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            ..Self::default()
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_samples(mut self, samples: u64) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("samples", "must be at least 1"));
        }
        if self.chunk_size == 0 {
            return Err(invalid("chunk_size", "must be at least 1"));
        }
        Ok(())
    }

    pub fn chunks(&self) -> u64 {
        self.samples.div_ceil(self.chunk_size)
    }
}

/// Position of a chunk inside a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chunk {
    pub index: u64,
    /// Global index of the first path in the chunk.
    pub start: u64,
    pub len: u64,
}

/// Random stream for chunk `chunk` of master seed `seed`.
pub fn substream(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `work` on every chunk and returns the per-chunk results in chunk
/// order. The first failing chunk (in chunk order) determines the error.
pub fn run_chunks<T, F>(run: &RunConfig, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Chunk, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    run.validate()?;
    let chunks = run.chunks();
    let job = || -> Vec<Result<T>> {
        (0..chunks)
            .into_par_iter()
            .map(|index| {
                let start = index * run.chunk_size;
                let chunk = Chunk {
                    index,
                    start,
                    len: run.chunk_size.min(run.samples - start),
                };
                let mut rng = substream(run.seed, index);
                work(chunk, &mut rng)
            })
            .collect()
    };
    let results = if run.workers == 0 {
        job()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(run.workers)
            .build()
            .map_err(|e| Error::WorkerPool(e.to_string()))?
            .install(job)
    };
    results.into_iter().collect()
}

/// Simulates `run.samples` independent marked patterns and folds each chunk
/// into an accumulator created by `init`. `step` receives the global path
/// index; an `Err` from it aborts the run with the path's replay key.
pub fn fold_patterns<A, I, F>(
    model: &BaseProcessModel<f64>,
    law: &ParetoLaw<f64>,
    run: &RunConfig,
    init: I,
    step: F,
) -> Result<Vec<A>>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &MarkedPattern<f64>, u64) -> std::result::Result<(), String> + Sync,
{
    model.validate()?;
    let seed = run.seed;
    run_chunks(run, |chunk, rng| {
        let mut acc = init();
        let mut times = Vec::new();
        let mut pattern = MarkedPattern::new(model.horizon, Vec::new())?;
        for offset in 0..chunk.len {
            model.sample_into(rng, &mut times);
            pattern.remark(model.horizon, &times, law, rng);
            step(&mut acc, &pattern, chunk.start + offset).map_err(|message| Error::EventFailed {
                seed,
                chunk: chunk.index,
                path: chunk.start + offset,
                message,
            })?;
        }
        Ok(acc)
    })
}
