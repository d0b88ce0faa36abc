//! Execution policy for the data-parallel loops.
//!
//! Every parallel loop in the crate is an indexed map whose items are
//! independent pure functions of their index, collected back in index order.
//! That is what makes output independent of the worker count.

use std::num::NonZeroUsize;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "RAYCHANNEL_THREADS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    /// Rayon's global pool, all cores.
    #[default]
    Auto,
    /// Dedicated pool with exactly this many workers.
    Threads(NonZeroUsize),
}

impl Parallelism {
    /// Reads `RAYCHANNEL_THREADS`: unset or empty means [`Parallelism::Auto`],
    /// `1` means sequential.
    pub fn from_env() -> Result<Self, String> {
        match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => Self::from_count(v.trim()),
            _ => Ok(Parallelism::Auto),
        }
    }

    fn from_count(v: &str) -> Result<Self, String> {
        let n: usize = v
            .parse()
            .map_err(|_| format!("{THREADS_ENV}={v} is not a positive integer"))?;
        match NonZeroUsize::new(n) {
            None => Err(format!("{THREADS_ENV} must be at least 1")),
            Some(n) if n.get() == 1 => Ok(Parallelism::Sequential),
            Some(n) => Ok(Parallelism::Threads(n)),
        }
    }

    pub fn threads(n: usize) -> Self {
        match NonZeroUsize::new(n) {
            Some(n) if n.get() > 1 => Parallelism::Threads(n),
            _ => Parallelism::Sequential,
        }
    }
}

/// `(0..n).map(f).collect()`, possibly spread over worker threads.
pub fn map_indexed<R, F>(par: Parallelism, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    imp::map_indexed(par, n, f)
}

#[cfg(feature = "parallel")]
mod imp {
    use super::Parallelism;
    use rayon::prelude::*;

    pub fn map_indexed<R, F>(par: Parallelism, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match par {
            Parallelism::Sequential => (0..n).map(f).collect(),
            Parallelism::Auto => (0..n).into_par_iter().map(f).collect(),
            Parallelism::Threads(k) => match rayon::ThreadPoolBuilder::new().num_threads(k.get()).build() {
                Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                // Pool creation only fails on resource exhaustion; the
                // sequential result is identical.
                Err(_) => (0..n).map(f).collect(),
            },
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    use super::Parallelism;

    pub fn map_indexed<R, F>(_par: Parallelism, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
