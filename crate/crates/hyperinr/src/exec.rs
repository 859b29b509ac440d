//! Scoped-thread executor.

use hyperinr_core::Executor;

/// Splits items into contiguous runs, one per worker thread. Results match
/// [`Sequential`](hyperinr_core::Sequential) bit for bit because every job
/// only touches its own item.
#[derive(Debug, Clone, Copy)]
pub struct Threads {
    workers: usize,
}

impl Threads {
    pub fn new(workers: usize) -> Self {
        Self {
            workers: workers.max(1),
        }
    }
}

impl Executor for Threads {
    fn workers(&self) -> usize {
        self.workers
    }

    fn for_each<T, S, F>(&self, scratch: &mut [S], items: &mut [T], f: F)
    where
        T: Send,
        S: Send,
        F: Fn(&mut S, usize, &mut T) + Sync,
    {
        let n = items.len();
        let workers = self.workers.min(scratch.len()).min(n).max(1);
        if workers == 1 {
            let s = &mut scratch[0];
            for (i, item) in items.iter_mut().enumerate() {
                f(s, i, item);
            }
            return;
        }
        let per = n.div_ceil(workers);
        let f = &f;
        std::thread::scope(|scope| {
            for ((k, chunk), s) in items.chunks_mut(per).enumerate().zip(scratch.iter_mut()) {
                scope.spawn(move || {
                    for (i, item) in chunk.iter_mut().enumerate() {
                        f(s, k * per + i, item);
                    }
                });
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_cover_every_item_once() {
        let mut items = vec![0usize; 37];
        let mut scratch = vec![0usize; 4];
        Threads::new(4).for_each(&mut scratch, &mut items, |s, i, x| {
            *s += 1;
            *x = i;
        });
        assert_eq!(items, (0..37).collect::<Vec<_>>());
        assert_eq!(scratch.iter().sum::<usize>(), 37);
    }
}
