//! Data-parallel helpers.
//!
//! Every parallel reduction in the crate goes through [`map_rows`]: each row
//! (particle) is evaluated independently and the per-row results are combined
//! sequentially in index order afterwards. The combined value is therefore
//! bitwise identical for any thread count, and identical to the sequential
//! path. With the `parallel` feature disabled everything runs sequentially.

/// How a row-wise map is executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    /// Parallel when the row count reaches [`PAR_MIN_ROWS`], sequential otherwise.
    #[default]
    Auto,
    Sequential,
    Parallel,
}

/// Below this many rows the rayon scheduling overhead outweighs the work.
pub const PAR_MIN_ROWS: usize = 64;

impl Execution {
    #[cfg_attr(not(feature = "parallel"), allow(dead_code))]
    fn parallel_for(self, rows: usize) -> bool {
        match self {
            Execution::Sequential => false,
            Execution::Parallel => cfg!(feature = "parallel"),
            Execution::Auto => cfg!(feature = "parallel") && rows >= PAR_MIN_ROWS,
        }
    }
}

/// Evaluate `f(i)` for `i in 0..rows`, returning results in index order.
pub fn map_rows<T, F>(rows: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.parallel_for(rows) {
        use rayon::prelude::*;
        return (0..rows).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..rows).map(f).collect()
}

/// Row-wise map followed by an in-order sum.
pub fn sum_rows<F>(rows: usize, exec: Execution, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_rows(rows, exec, f).into_iter().fold(0.0, |a, b| a + b)
}

/// Hand row `i` of `buf` (rows of `width` values) to `f(i, row)` and sum the
/// returned scalars in index order.
pub fn fill_rows<F>(buf: &mut [f64], width: usize, exec: Execution, f: F) -> f64
where
    F: Fn(usize, &mut [f64]) -> f64 + Sync + Send,
{
    let rows = buf.len() / width;
    #[cfg(feature = "parallel")]
    if exec.parallel_for(rows) {
        use rayon::prelude::*;
        let parts: Vec<f64> = buf
            .par_chunks_mut(width)
            .enumerate()
            .map(|(i, r)| f(i, r))
            .collect();
        return parts.into_iter().fold(0.0, |a, b| a + b);
    }
    let _ = (exec, rows);
    let mut total = 0.0;
    for (i, r) in buf.chunks_exact_mut(width).enumerate() {
        total += f(i, r);
    }
    total
}

/// Run `op` on a dedicated pool of `threads` workers (or inline without the
/// `parallel` feature).
pub fn with_threads<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
        {
            Ok(pool) => pool.install(op),
            Err(_) => op(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        op()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_sums_agree_bitwise() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let a = sum_rows(1000, Execution::Sequential, f);
        let b = sum_rows(1000, Execution::Parallel, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn map_rows_preserves_order() {
        let v = map_rows(200, Execution::Parallel, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
