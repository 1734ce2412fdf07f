//! Per-sample parallelism.
//!
//! With the `parallel` feature, an [`Executor`] with more than one thread runs
//! per-sample work on a private rayon pool. Results always come back in input
//! order and every reduction downstream is done sequentially in that order, so
//! the thread count never changes a result bit. Without the feature, or with
//! one thread, everything runs on the calling thread.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub struct Executor {
    threads: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("threads", &self.threads).finish()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}

impl Executor {
    pub fn sequential() -> Self {
        Self {
            threads: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// `threads == 0` means one thread per available core.
    pub fn with_threads(threads: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let threads = if threads == 0 {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            } else {
                threads
            };
            if threads <= 1 {
                return Self::sequential();
            }
            match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => Self {
                    threads,
                    pool: Some(pool),
                },
                Err(e) => {
                    log::warn!("could not start {threads} worker threads ({e}); running sequentially");
                    Self::sequential()
                }
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            if threads != 1 {
                log::warn!("built without the `parallel` feature; ignoring --threads {threads}");
            }
            Self::sequential()
        }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// `items.map(f)`, order preserved.
    pub fn map<I, O, F>(&self, items: &[I], f: F) -> Vec<O>
    where
        I: Sync,
        O: Send,
        F: Fn(&I) -> O + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| items.par_iter().map(&f).collect());
        }
        items.iter().map(f).collect()
    }

    /// Like [`Executor::map`] but stops at the first error.
    pub fn try_map<I, O, E, F>(&self, items: &[I], f: F) -> Result<Vec<O>, E>
    where
        I: Sync,
        O: Send,
        E: Send,
        F: Fn(&I) -> Result<O, E> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| items.par_iter().map(&f).collect());
        }
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Executor::sequential().map(&items, |v| v * v);
        let par = Executor::with_threads(4).map(&items, |v| v * v);
        assert_eq!(seq, par);
    }

    #[test]
    fn try_map_reports_error() {
        let items: Vec<i32> = (0..100).collect();
        let r: Result<Vec<i32>, String> = Executor::with_threads(3).try_map(&items, |&v| {
            if v == 50 {
                Err("boom".to_string())
            } else {
                Ok(v)
            }
        });
        assert_eq!(r.unwrap_err(), "boom");
    }
}
