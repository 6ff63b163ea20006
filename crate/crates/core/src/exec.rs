//! Execution-mode switch for batch work.
//!
//! Batch stages (scenario sweeps, per-segment model fits, per-RV sensing and
//! planning) are pure functions of their inputs, so they can run on a rayon
//! pool or a plain iterator interchangeably. Outputs are collected in input
//! order either way, which keeps results bit-identical across modes.
//!
//! With the `parallel` feature disabled, [`ExecMode::Parallel`] silently
//! degrades to sequential execution.

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum ExecMode {
    #[default]
    Parallel,
    Sequential,
}

/// Map `f` over `items`, preserving order.
pub fn map_slice<T, U, F>(mode: ExecMode, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(&f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Run `f` for each index in `0..n`, collecting results in index order.
pub fn map_indices<U, F>(mode: ExecMode, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync,
{
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(&f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}
