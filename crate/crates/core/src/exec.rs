//! Row-level execution strategy. Rows are independent, so per-batch work can
//! fan out across threads; results are always collected in input order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Sequential,
    /// Uses rayon when built with the `parallel` feature, otherwise runs
    /// sequentially.
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Order-preserving map over a slice.
pub fn map_rows<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            // small batches, or a one-thread pool, are not worth the fork/join
            if items.len() >= 256 && rayon::current_num_threads() > 1 {
                return items.par_iter().with_min_len(64).map(f).collect();
            }
            items.iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}
