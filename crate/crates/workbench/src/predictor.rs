//! Multi-threaded evaluation. Rows are split into fixed chunks, predicted on
//! a rayon pool and concatenated in row order, so the output does not depend
//! on the thread count.

use mfh_core::data::Dataset;
use mfh_core::engine::{predict_rows, ModelParams, Predictor};
use mfh_core::lattice::LatticeGraph;
use rayon::prelude::*;

/// Caps evaluation threads when set to a positive integer.
pub const THREADS_ENV: &str = "MFH_THREADS";

pub fn thread_limit() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

pub struct RayonPredictor {
    pool: rayon::ThreadPool,
    chunk: usize,
}

impl RayonPredictor {
    pub fn new(threads: Option<usize>, chunk: usize) -> Self {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        Self {
            pool: builder.build().expect("thread pool"),
            chunk: chunk.max(1),
        }
    }

    pub fn from_env() -> Self {
        Self::new(thread_limit(), 2048)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Predictor for RayonPredictor {
    fn logits(&self, graph: &LatticeGraph, params: &ModelParams, data: &Dataset) -> mfh_core::Result<Vec<Vec<f64>>> {
        let rows: Vec<usize> = (0..data.len()).collect();
        let parts = self.pool.install(|| {
            rows.par_chunks(self.chunk)
                .map(|idx| predict_rows(graph, params, data, idx))
                .collect::<mfh_core::Result<Vec<_>>>()
        })?;
        let mut out = vec![Vec::with_capacity(data.len()); graph.tasks.len()];
        for part in parts {
            for (col, p) in out.iter_mut().zip(part) {
                col.extend(p);
            }
        }
        Ok(out)
    }
}
