//! Execution policy for the embarrassingly parallel loops (quadrature grids,
//! mode sums, parameter sweeps).
//!
//! Every parallel map preserves input order and all reductions happen
//! afterwards on the collected vector, so results are bit-identical between
//! the two policies. Without the `parallel` feature `Parallel` silently
//! degrades to `Sequential`.

use std::sync::atomic::{AtomicU8, Ordering};

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

static DEFAULT: AtomicU8 = AtomicU8::new(1);

impl Execution {
    /// Policy used by library routines that do not take one explicitly.
    pub fn current() -> Self {
        match DEFAULT.load(Ordering::Relaxed) {
            0 => Execution::Sequential,
            _ => Execution::Parallel,
        }
    }

    pub fn set_current(policy: Execution) {
        let raw = match policy {
            Execution::Sequential => 0,
            Execution::Parallel => 1,
        };
        DEFAULT.store(raw, Ordering::Relaxed);
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}

/// Pairwise (cascade) summation with a fixed association order.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => values[0],
        n if n <= 8 => values.iter().fold(Complex64::new(0.0, 0.0), |acc, v| acc + v),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

pub fn pairwise_sum_real(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        n if n <= 8 => values.iter().sum(),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum_real(lo) + pairwise_sum_real(hi)
        }
    }
}
