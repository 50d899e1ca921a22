//! Execution policy for data-parallel loops.
//!
//! With the `parallel` feature, [`Execution::Parallel`] dispatches to rayon;
//! without it every loop runs sequentially. Both schedules produce identical
//! results: work items never share accumulators and outputs are collected in
//! index order.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `f(i)` for every `i` in `range`, collected in order.
    pub fn map_range<T, F>(self, range: Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                range.into_par_iter().map(f).collect()
            }
            _ => range.map(f).collect(),
        }
    }

    /// `f(i, &mut item)` for every item of `items`.
    pub fn for_each_mut<T, F>(self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
            }
            _ => items.iter_mut().enumerate().for_each(|(i, t)| f(i, t)),
        }
    }

    /// `f(chunk_index, chunk)` over consecutive chunks of `chunk` elements.
    pub fn for_each_chunk_mut<T, F>(self, items: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items
                    .par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(i, c)| f(i, c));
            }
            _ => items
                .chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c)),
        }
    }
}

/// Caps the global worker pool. Has no effect without the `parallel` feature
/// or once the pool has been initialized.
pub fn init_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}
