//! Data-parallel batch runner. Workers take contiguous index ranges and
//! results are reassembled in job order, so outputs are identical to the
//! serial runner regardless of thread count.

use hyperscore_core::train::BatchRunner;

pub struct ThreadedRunner {
    threads: usize,
}

impl ThreadedRunner {
    /// `HS_THREADS` caps the worker count; `config_threads` applies when
    /// the variable is unset. Defaults to single-threaded.
    pub fn from_env(config_threads: Option<usize>) -> Self {
        let threads = std::env::var("HS_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .or(config_threads)
            .unwrap_or(1)
            .max(1);
        Self { threads }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }
}

impl BatchRunner for ThreadedRunner {
    fn run<O: Send>(&self, jobs: usize, f: &(dyn Fn(usize) -> O + Sync)) -> Vec<O> {
        let workers = self.threads.min(jobs);
        if workers <= 1 {
            return (0..jobs).map(f).collect();
        }
        let mut slots: Vec<Option<O>> = (0..jobs).map(|_| None).collect();
        let chunk = jobs.div_ceil(workers);
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (w, slice) in slots.chunks_mut(chunk).enumerate() {
                let start = w * chunk;
                handles.push(scope.spawn(move || {
                    for (offset, slot) in slice.iter_mut().enumerate() {
                        *slot = Some(f(start + offset));
                    }
                }));
            }
            for h in handles {
                h.join().expect("worker panicked");
            }
        });
        slots.into_iter().map(|s| s.expect("job filled")).collect()
    }
}
