//! Comparison methods: diagonal thresholding and a dense power-method oracle.

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::sampling::SampleSource;
use crate::support::{top_k_indices, SupportEstimate, SupportParams};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 100_000;

/// Σ̂ᵢᵢ = (1/n)·Σₜ Xₜ(i)² over the remaining samples, in O(d) space.
pub fn diagonal_variances<S: SampleSource>(stream: &mut S) -> Result<Vec<f64>> {
    let d = stream.dim();
    let n = stream.remaining();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut acc = vec![0.0; d];
    let mut x = vec![0.0; d];
    while stream.remaining() > 0 {
        stream.next_into(&mut x)?;
        acc.iter_mut().zip(&x).for_each(|(a, xi)| *a += xi * xi);
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Ok(acc)
}

/// Ŝ = indices of the `s` largest empirical variances.
pub fn diagonal_thresholding<S: SampleSource>(stream: &mut S, s: usize) -> Result<SupportEstimate> {
    let d = stream.dim();
    if s == 0 || s > d {
        return Err(Error::InvalidK { k: s, d });
    }
    let diag = diagonal_variances(stream)?;
    Ok(SupportEstimate { indices: top_k_indices(&diag, s), params: SupportParams::Diagonal { s }, scores: diag })
}

/// Top eigenvector of a symmetric PSD matrix by power iteration.
///
/// Stops when ‖Av − (vᵀAv)v‖ ≤ tol·|vᵀAv|. The start vector is a
/// seeded Gaussian draw, so the result is deterministic.
pub fn power_method(a: &DMatrix<f64>, seed: u64, tol: f64, max_iters: usize) -> Result<DVector<f64>> {
    let d = a.nrows();
    if d == 0 || a.ncols() != d {
        return Err(Error::InvalidDims(format!("need a square nonempty matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    let scale = a.amax();
    if scale == 0.0 {
        let mut v = DVector::zeros(d);
        v[0] = 1.0;
        return Ok(v);
    }
    let mut rng = rng_from_seed(seed);
    let mut v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    v /= v.norm();
    for _ in 0..max_iters {
        let w = a * &v;
        let rq = v.dot(&w);
        let resid = (&w - &v * rq).norm();
        if resid <= tol * rq.abs() {
            return Ok(v);
        }
        let nw = w.norm();
        if nw == 0.0 {
            return Ok(v);
        }
        v = w / nw;
    }
    Err(Error::NoConvergence(max_iters))
}

/// Top eigenvector of (1/n)·Σ XᵢXᵢᵀ for an explicit sample matrix (rows are samples).
///
/// Test-tier oracle; never used in streaming paths.
pub fn offline_top_eigvec(samples: &[Vec<f64>], seed: u64) -> Result<Vec<f64>> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let d = samples[0].len();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for x in samples {
        if x.len() != d {
            return Err(Error::InvalidDims("ragged sample matrix".into()));
        }
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                cov[(i, j)] += x[i] * x[j];
            }
        }
    }
    cov /= n as f64;
    Ok(power_method(&cov, seed, POWER_TOL, POWER_MAX_ITERS)?.iter().copied().collect())
}
