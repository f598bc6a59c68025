//! Simulation studies: the placement-rate comparison against serial
//! dictatorship, replica convergence, and price stability under perturbed
//! arrival rates.

pub mod convergence;
pub mod perturbation;
pub mod report;
pub mod stats;
pub mod table1;

pub use sem_core::{Error, Result};

/// Runs `f` over `items` on `workers` threads and returns results in input
/// order, so output never depends on scheduling.
pub fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
    pool.install(|| items.par_iter().map(f).collect())
}
