//! Element-loop execution policy.
//!
//! With the `parallel` feature, element-local work is spread over the rayon
//! pool. Without it, every policy runs serially. Reductions over elements
//! always happen afterwards in element order, so results are bitwise
//! identical under both policies.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Serial,
    #[default]
    Parallel,
}

impl Exec {
    /// Fill `buf` in chunks of `chunk` values, one chunk per element.
    pub fn for_each_chunk<F>(self, buf: &mut [f64], chunk: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        if chunk == 0 {
            return;
        }
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => buf.par_chunks_mut(chunk).enumerate().for_each(|(e, c)| f(e, c)),
            _ => buf.chunks_mut(chunk).enumerate().for_each(|(e, c)| f(e, c)),
        }
    }

    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }
}

/// Configure the global worker pool size (no-op without the `parallel` feature).
pub fn init_workers(n: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}
