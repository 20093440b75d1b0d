//! Index-parallel maps that fall back to serial loops without the `parallel` feature.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`, in parallel when available. Each entry depends
/// only on its index, so the output does not depend on scheduling.
pub(crate) fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if n >= 4096 {
            return (0..n).into_par_iter().with_min_len(1024).map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Maps over a slice, in parallel when available.
pub(crate) fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        return items.par_iter().map(f).collect();
    }
    #[allow(unreachable_code)]
    items.iter().map(f).collect()
}
