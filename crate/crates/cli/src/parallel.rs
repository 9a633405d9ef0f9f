//! Multi-threaded driver for Monte Carlo estimators.
//!
//! Worker `w` of `W` runs chunks `w, w + W, ...`; since every chunk owns its
//! random stream and partial sums are exact, the merged result does not
//! depend on `W`.

use std::thread;

use ballsbins_core::mc::{merge_partials, Estimator, Partial};

use ballsbins_core::Result;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "BALLSBINS_WORKERS";

/// Worker count when neither `--workers` nor the environment sets one.
pub fn default_workers() -> usize {
    thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub fn run_parallel(est: &Estimator, workers: usize) -> Result<Partial> {
    let chunks = est.num_chunks();
    let workers = (workers.max(1) as u64).min(chunks.max(1));
    if workers == 1 {
        return Ok(est.run());
    }
    let parts: Vec<Partial> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| s.spawn(move || est.run_chunks((w..chunks).step_by(workers as usize))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    merge_partials(&parts)
}
