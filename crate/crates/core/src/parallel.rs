//! Worker-pool sizing shared by featurization, training and scoring.

use crate::error::{KwsError, Result};

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "KWS_NUM_WORKERS";

/// Worker count from `KWS_NUM_WORKERS`, defaulting to the available cores.
pub fn num_workers() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(KwsError::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// A pool sized by [`num_workers`]. Results never depend on its size.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(num_workers()?)
        .build()
        .map_err(|e| KwsError::Config(format!("cannot start worker pool: {e}")))
}
