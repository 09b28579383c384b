//! Data-parallel helpers. With the `parallel` feature, [`Exec::Parallel`]
//! maps run on the rayon pool; without it every map runs sequentially in
//! index order. Each output element is computed independently, so results do
//! not depend on the backend or the number of workers.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Exec {
    Parallel,
    Sequential,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Maps `f` over `0..n` with per-worker scratch state created by `init`.
pub fn map_init<S, T, I, F>(exec: Exec, n: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map_init(&init, |s, i| f(s, i)).collect();
    }
    let _ = exec;
    let mut s = init();
    (0..n).map(|i| f(&mut s, i)).collect()
}

/// Maps `f` over `0..n`.
pub fn map<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_init(exec, n, || (), |_, i| f(i))
}

/// Runs `f` inside a pool of `workers` threads when the parallel feature is
/// enabled; otherwise calls it directly.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    if let Some(w) = workers.filter(|&w| w > 0) {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            return pool.install(f);
        }
    }
    let _ = workers;
    f()
}
