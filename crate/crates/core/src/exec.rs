//! Data-parallel or sequential evaluation of indexed work items.
//!
//! Both paths return results in index order, and callers reduce them
//! sequentially, so the thread count never changes a floating-point result.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon pool; `threads: None` uses the ambient/global pool. Falls back
    /// to sequential when the `parallel` feature is disabled.
    #[default]
    Parallel,
    ParallelWith { threads: usize },
}

impl Execution {
    pub fn from_threads(threads: Option<usize>) -> Self {
        match threads {
            None => Execution::Parallel,
            Some(0) => Execution::Parallel,
            Some(1) => Execution::Sequential,
            Some(t) => Execution::ParallelWith { threads: t },
        }
    }

    /// Evaluates `f(0..count)` and returns the results in index order.
    pub fn map_indexed<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..count).map(f).collect(),
            Execution::Parallel => par_map(count, f),
            Execution::ParallelWith { threads } => {
                self.install(*threads, || par_map(count, f))
            }
        }
    }

    /// Runs `op` inside a pool of the configured size (no-op for the
    /// sequential and ambient variants).
    pub fn scope<R: Send>(&self, op: impl FnOnce() -> R + Send) -> R {
        match self {
            Execution::ParallelWith { threads } => self.install(*threads, op),
            _ => op(),
        }
    }

    #[cfg(feature = "parallel")]
    fn install<R: Send>(&self, threads: usize, op: impl FnOnce() -> R + Send) -> R {
        match build_pool(threads) {
            Ok(pool) => pool.install(op),
            Err(_) => op(),
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn install<R: Send>(&self, _threads: usize, op: impl FnOnce() -> R + Send) -> R {
        op()
    }
}

#[cfg(feature = "parallel")]
fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

#[cfg(not(feature = "parallel"))]
#[allow(dead_code)]
fn build_pool(_threads: usize) -> Result<()> {
    Err(Error::InvalidInput("built without the `parallel` feature".into()))
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let expected: Vec<u64> = (0..1000).map(|i| i * i).collect();
        for exec in [
            Execution::Sequential,
            Execution::Parallel,
            Execution::ParallelWith { threads: 3 },
        ] {
            assert_eq!(exec.map_indexed(1000, |i| i * i), expected);
        }
    }

    #[test]
    fn thread_flag_mapping() {
        assert_eq!(Execution::from_threads(Some(1)), Execution::Sequential);
        assert_eq!(Execution::from_threads(None), Execution::Parallel);
        assert_eq!(Execution::from_threads(Some(8)), Execution::ParallelWith { threads: 8 });
    }
}
