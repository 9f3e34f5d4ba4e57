//! Data-parallel helpers. With the `parallel` feature (default) these fan out
//! over the rayon pool; without it they run sequentially with identical
//! results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `out[i] = f(i)` for every index.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    #[cfg(not(feature = "parallel"))]
    out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
}

/// Collect `f(i)` for `i in 0..n`, preserving order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}

/// Map over a slice of independent jobs, preserving order.
pub fn map_jobs<I, T, F>(jobs: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return jobs.par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return jobs.iter().map(f).collect();
}

/// Deterministic dot product: chunked partial sums reduced in a fixed order,
/// so the result does not depend on the thread count.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    const CHUNK: usize = 4096;
    let nchunks = a.len().div_ceil(CHUNK);
    let partial = map_range(nchunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(a.len());
        a[lo..hi].iter().zip(&b[lo..hi]).map(|(x, y)| x * y).sum::<f64>()
    });
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    #[cfg(feature = "parallel")]
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += alpha * xi);
    #[cfg(not(feature = "parallel"))]
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// `y = x + beta * y`
pub fn xpby(x: &[f64], beta: f64, y: &mut [f64]) {
    #[cfg(feature = "parallel")]
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi = xi + beta * *yi);
    #[cfg(not(feature = "parallel"))]
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi = xi + beta * *yi);
}
