use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// How independent trials are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon worker pool; `jobs = None` uses the global pool. Without the
    /// `parallel` feature this runs sequentially.
    #[default]
    Parallel,
    ParallelJobs(usize),
}

impl Execution {
    pub fn with_jobs(jobs: Option<usize>) -> Self {
        match jobs {
            Some(1) => Execution::Sequential,
            Some(n) if n > 1 => Execution::ParallelJobs(n),
            _ => Execution::Parallel,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for trial `trial` of experiment cell `cell` under `master`.
///
/// The cell picks the key and the trial picks the ChaCha stream, so every
/// trial has its own sequence no matter which thread runs it.
pub fn trial_rng(master: u64, cell: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(master ^ splitmix(cell)));
    rng.set_stream(trial);
    rng
}

/// Runs `f(0..n)` and returns the results in trial order.
pub fn run_trials<T, F>(execution: Execution, n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    match execution {
        Execution::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => parallel(n, &f),
        #[cfg(feature = "parallel")]
        Execution::ParallelJobs(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| parallel(n, &f))
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::ParallelJobs(_) => (0..n).map(f).collect(),
    }
}

#[cfg(feature = "parallel")]
fn parallel<T, F>(n: u64, f: &F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    // indexed collect keeps trial order
    (0..n).into_par_iter().map(f).collect()
}
