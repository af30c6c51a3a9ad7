//! Thread-local reuse of large `f64` buffers.
//!
//! Tape nodes are rebuilt for every batch; recycling their storage avoids
//! handing big allocations back to the OS and faulting them in again.

use std::cell::RefCell;

/// Smaller buffers go straight to the allocator.
const MIN_POOLED: usize = 8 * 1024;
const MAX_BUFFERS: usize = 512;

thread_local! {
    static POOL: RefCell<Vec<Vec<f64>>> = const { RefCell::new(Vec::new()) };
}

/// Empty vector with at least `n` capacity.
pub(crate) fn with_capacity(n: usize) -> Vec<f64> {
    if n < MIN_POOLED {
        return Vec::with_capacity(n);
    }
    POOL.with(|p| {
        let mut p = p.borrow_mut();
        let best = p
            .iter()
            .enumerate()
            .filter(|(_, v)| v.capacity() >= n)
            .min_by_key(|(_, v)| v.capacity())
            .map(|(i, _)| i);
        match best {
            Some(i) => {
                let mut v = p.swap_remove(i);
                v.clear();
                v
            }
            None => Vec::with_capacity(n),
        }
    })
}

pub(crate) fn zeros(n: usize) -> Vec<f64> {
    let mut v = with_capacity(n);
    v.resize(n, 0.0);
    v
}

pub(crate) fn copy(src: &[f64]) -> Vec<f64> {
    let mut v = with_capacity(src.len());
    v.extend_from_slice(src);
    v
}

pub(crate) fn give(v: Vec<f64>) {
    if v.capacity() < MIN_POOLED {
        return;
    }
    POOL.with(|p| {
        let mut p = p.borrow_mut();
        if p.len() < MAX_BUFFERS {
            p.push(v);
        }
    });
}
