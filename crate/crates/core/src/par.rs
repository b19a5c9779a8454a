//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) the `*_par` paths run on rayon's
//! global pool; without it they fall back to plain iterators. Results are
//! always returned in index order, so outputs are identical either way.

/// How a batch of independent work items is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

/// Map `f` over `0..n` sequentially.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Map `f` over `0..n`, in parallel when the feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_indexed_par<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed_par<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    map_indexed_seq(n, f)
}

pub fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    match mode {
        ExecMode::Sequential => map_indexed_seq(n, f),
        ExecMode::Parallel => map_indexed_par(n, f),
    }
}

/// Like [`map_indexed`] but stops at the first error (lowest index wins).
pub fn try_map_indexed<T, E, F>(mode: ExecMode, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Send + Sync,
{
    map_indexed(mode, n, f).into_iter().collect()
}

/// Apply `f` to every element of `items`.
#[cfg(feature = "parallel")]
pub fn for_each_mut<T, F>(mode: ExecMode, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Send + Sync,
{
    use rayon::prelude::*;
    match mode {
        ExecMode::Sequential => items.iter_mut().enumerate().for_each(|(i, x)| f(i, x)),
        ExecMode::Parallel => items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x)),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_mut<T, F>(_mode: ExecMode, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Send + Sync,
{
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x))
}

/// Like [`for_each_mut`] for fallible work. Every item runs; the error of
/// the lowest failing index is returned.
pub fn try_for_each_mut<T, E, F>(mode: ExecMode, items: &mut [T], f: F) -> Result<(), E>
where
    T: Send,
    E: Send,
    F: Fn(usize, &mut T) -> Result<(), E> + Send + Sync,
{
    let mut slots: Vec<(&mut T, Option<E>)> = items.iter_mut().map(|x| (x, None)).collect();
    for_each_mut(mode, &mut slots, |i, (x, err)| *err = f(i, x).err());
    match slots.into_iter().find_map(|(_, e)| e) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Number of worker threads the parallel path will use.
pub fn worker_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Size the global pool. Only the first call has any effect.
pub fn init_workers(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}
