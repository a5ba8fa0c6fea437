//! Batch execution: rayon data-parallel map with a sequential fallback.
//!
//! Outputs are collected in input order and all reductions downstream happen
//! on the collected vector, so parallel and sequential execution produce
//! bit-identical results. Without the `parallel` feature the parallel mode
//! degrades to the sequential path.

/// How batch-level work is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl ExecMode {
    /// Parallel when the feature is compiled in, sequential otherwise.
    pub fn auto() -> ExecMode {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Order-preserving map over an index range.
pub fn map_indexed<T, F>(mode: ExecMode, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode == ExecMode::Parallel {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    let _ = mode;
    (0..len).map(f).collect()
}

/// Order-preserving map over a slice.
pub fn map_slice<'a, T, U, F>(mode: ExecMode, items: &'a [T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&'a T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode == ExecMode::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    let _ = mode;
    items.iter().map(f).collect()
}
