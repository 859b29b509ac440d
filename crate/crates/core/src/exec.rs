//! Per-sample work distribution.
//!
//! The core only ships a sequential executor; a threaded one lives with the
//! `std` front end. Every job writes to its own item, so results never
//! depend on the worker count.

/// Runs independent per-item jobs, each with exclusive access to one
/// worker scratch value.
pub trait Executor: Sync {
    fn workers(&self) -> usize;

    /// Calls `f(scratch, index, item)` once per item. `scratch` has at least
    /// [`workers`](Self::workers) entries.
    fn for_each<T, S, F>(&self, scratch: &mut [S], items: &mut [T], f: F)
    where
        T: Send,
        S: Send,
        F: Fn(&mut S, usize, &mut T) + Sync;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn workers(&self) -> usize {
        1
    }

    fn for_each<T, S, F>(&self, scratch: &mut [S], items: &mut [T], f: F)
    where
        T: Send,
        S: Send,
        F: Fn(&mut S, usize, &mut T) + Sync,
    {
        let s = &mut scratch[0];
        for (i, item) in items.iter_mut().enumerate() {
            f(s, i, item);
        }
    }
}
