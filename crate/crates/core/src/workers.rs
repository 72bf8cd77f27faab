//! Bounded worker pools for the data-parallel backends.

/// Runs `f` on a dedicated pool of `workers` threads. Zero uses rayon's
/// global pool, sized to the available cores.
pub fn run<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not start {workers} workers ({e}); using the global pool");
            f()
        }
    }
}

/// Default worker count: the number of available cores.
pub fn available() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
