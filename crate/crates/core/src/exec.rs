//! Deterministic execution helpers. Work is split into contiguous chunks that
//! are merged in chunk order, and all arithmetic is exact, so results are
//! byte-identical no matter how many workers run.

use std::ops::Range;

use crate::error::{Error, Result};

/// Default ceiling on exhaustive enumeration sizes.
pub const DEFAULT_ENUM_BOUND: u128 = 1 << 24;

/// Enumeration bound plus worker count, threaded through every exhaustive
/// operation in the crate.
#[derive(Clone, Copy, Debug)]
pub struct ExecCfg {
    pub bound: u128,
    pub workers: usize,
}

impl Default for ExecCfg {
    fn default() -> Self {
        ExecCfg {
            bound: DEFAULT_ENUM_BOUND,
            workers: 1,
        }
    }
}

impl ExecCfg {
    pub fn with_workers(workers: usize) -> Self {
        ExecCfg {
            workers,
            ..ExecCfg::default()
        }
    }

    pub fn check(&self, needed: u128) -> Result<()> {
        if needed > self.bound {
            Err(Error::BoundExceeded {
                needed,
                bound: self.bound,
            })
        } else {
            Ok(())
        }
    }
}

/// Maps `f` over `0..total` split into at most `workers` contiguous chunks,
/// one thread per chunk, and returns the per-chunk results in chunk order.
pub fn map_chunks<T, F>(total: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
{
    let workers = workers.max(1).min(total.max(1) as usize);
    if workers == 1 {
        return vec![f(0..total)];
    }
    let per = total.div_ceil(workers as u64);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers as u64)
            .map(|w| {
                let lo = w * per;
                let hi = ((w + 1) * per).min(total);
                let f = &f;
                scope.spawn(move || f(lo..hi))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}
