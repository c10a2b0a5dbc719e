//! Two-phase sparse PCA pipelines over a single pass of the data.
//!
//! The stream is split into a first half of ⌈n/2⌉ samples, used for support
//! estimation, and a disjoint second half used for the final estimate.

use crate::baselines::{diagonal_thresholding, power_method, POWER_MAX_ITERS, POWER_TOL};
use crate::cov_models::CovModel;
use crate::error::{Error, Result};
use crate::oja::{optimal_oja, run_oja, OptimalSchedule};
use crate::rng::{sub_seed, tag};
use crate::sampling::{gaussian_unit_init, Restricted, SampleSource};
use crate::support::{top_k_support, SupportEstimate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    TruncVec,
    TruncData,
    PlainOja,
    DiagThresh,
}

impl Pipeline {
    pub const ALL: [Pipeline; 4] = [Pipeline::PlainOja, Pipeline::DiagThresh, Pipeline::TruncVec, Pipeline::TruncData];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::TruncVec => "trunc_vec",
            Pipeline::TruncData => "trunc_data",
            Pipeline::PlainOja => "plain_oja",
            Pipeline::DiagThresh => "diag_thresh",
        }
    }
}

/// Output of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsePcaResult {
    pub pipeline: Pipeline,
    pub sin2: f64,
    pub support: SupportEstimate,
    #[serde(rename = "n")]
    pub n_used: usize,
    pub seed: u64,
    pub eta: f64,
    /// Filled only by callers that opt into timing.
    pub wall_time_ms: Option<f64>,
    #[serde(skip)]
    pub v_hat: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero `v` outside `support` and renormalize.
pub fn truncate_renormalize(v: &[f64], support: &[usize]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; v.len()];
    for &i in support {
        if i >= v.len() {
            return Err(Error::InvalidDims(format!("support index {i} out of range {}", v.len())));
        }
        out[i] = v[i];
    }
    let r = dot(&out, &out).sqrt();
    if r == 0.0 {
        return Err(Error::ZeroAfterTruncation);
    }
    out.iter_mut().for_each(|x| *x /= r);
    Ok(out)
}

/// 1 − (uᵀv)², clamped to [0, 1]. Both inputs must be unit to 1e-9.
pub fn sin2(u: &[f64], v: &[f64]) -> Result<f64> {
    for w in [u, v] {
        let r = dot(w, w).sqrt();
        if (r - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnit(r));
        }
    }
    if u.len() != v.len() {
        return Err(Error::InvalidDims(format!("lengths {} and {}", u.len(), v.len())));
    }
    let c = dot(u, v);
    Ok((1.0 - c * c).clamp(0.0, 1.0))
}

fn first_half(n: usize) -> usize {
    n.div_ceil(2)
}

fn check_split<S: SampleSource>(data: &S, model: &CovModel) -> Result<usize> {
    if data.dim() != model.dim() {
        return Err(Error::InvalidDims(format!("stream dim {} differs from model dim {}", data.dim(), model.dim())));
    }
    let n = data.remaining();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, have: n });
    }
    Ok(n)
}

/// Top-k support from an Oja run over the first half.
fn oja_support<S: SampleSource>(data: &mut S, k: usize, eta: f64, seed: u64) -> Result<SupportEstimate> {
    let d = data.dim();
    if k == 0 || k > d {
        return Err(Error::InvalidK { k, d });
    }
    let n1 = first_half(data.remaining());
    let y0 = gaussian_unit_init(d, sub_seed(seed, tag::INIT));
    let mut half = data.take(n1)?;
    let st = run_oja(&mut half, &y0, eta)?;
    debug_assert_eq!(half.remaining(), 0);
    top_k_support(&st, k)
}

/// Oja on the first half for Ŝ, independent Oja on the second half, then truncate to Ŝ.
pub fn pipeline_trunc_vec<S: SampleSource>(
    data: &mut S,
    model: &CovModel,
    k: usize,
    eta: f64,
    seed: u64,
) -> Result<SparsePcaResult> {
    let n = check_split(data, model)?;
    let support = oja_support(data, k, eta, seed)?;
    let w0 = gaussian_unit_init(data.dim(), sub_seed(seed, tag::INIT_SECOND));
    let st = run_oja(data, &w0, eta)?;
    let v_hat = truncate_renormalize(st.u(), &support.indices)?;
    finish(Pipeline::TruncVec, v_hat, support, model, n, seed, eta)
}

/// Oja on the first half for Ŝ, then the decreasing-rate Oja on second-half samples restricted to Ŝ.
pub fn pipeline_trunc_data<S: SampleSource>(
    data: &mut S,
    model: &CovModel,
    k: usize,
    eta: f64,
    schedule: OptimalSchedule,
    seed: u64,
) -> Result<SparsePcaResult> {
    let n = check_split(data, model)?;
    let support = oja_support(data, k, eta, seed)?;
    let w0 = gaussian_unit_init(k, sub_seed(seed, tag::INIT_SECOND));
    let mut restricted = Restricted::new(data, &support.indices);
    let st = optimal_oja(&mut restricted, &w0, model.gap(), schedule)?;
    let mut v_hat = vec![0.0; model.dim()];
    for (&i, x) in support.indices.iter().zip(st.u()) {
        v_hat[i] = *x;
    }
    finish(Pipeline::TruncData, v_hat, support, model, n, seed, eta)
}

/// Constant-rate Oja over all n samples with no truncation.
pub fn plain_oja<S: SampleSource>(data: &mut S, model: &CovModel, eta: f64, seed: u64) -> Result<SparsePcaResult> {
    let n = check_split(data, model)?;
    let d = data.dim();
    let u0 = gaussian_unit_init(d, sub_seed(seed, tag::INIT));
    let st = run_oja(data, &u0, eta)?;
    let support = top_k_support(&st, d)?;
    finish(Pipeline::PlainOja, st.into_u(), support, model, n, seed, eta)
}

/// Diagonal thresholding on the first half, then the top eigenvector of the
/// streamed k×k covariance on Ŝ over the second half.
pub fn pipeline_diag_thresh<S: SampleSource>(
    data: &mut S,
    model: &CovModel,
    k: usize,
    seed: u64,
) -> Result<SparsePcaResult> {
    let n = check_split(data, model)?;
    let n1 = first_half(n);
    let support = diagonal_thresholding(&mut data.take(n1)?, k)?;
    let n2 = data.remaining();
    let mut restricted = Restricted::new(data, &support.indices);
    let mut cov = DMatrix::<f64>::zeros(k, k);
    let mut x = vec![0.0; k];
    while restricted.remaining() > 0 {
        restricted.next_into(&mut x)?;
        for a in 0..k {
            for b in 0..k {
                cov[(a, b)] += x[a] * x[b];
            }
        }
    }
    cov /= n2 as f64;
    let w = power_method(&cov, sub_seed(seed, tag::AUX), POWER_TOL, POWER_MAX_ITERS)?;
    let mut v_hat = vec![0.0; model.dim()];
    for (&i, x) in support.indices.iter().zip(w.iter()) {
        v_hat[i] = *x;
    }
    finish(Pipeline::DiagThresh, v_hat, support, model, n, seed, f64::NAN)
}

fn finish(
    pipeline: Pipeline,
    mut v_hat: Vec<f64>,
    support: SupportEstimate,
    model: &CovModel,
    n: usize,
    seed: u64,
    eta: f64,
) -> Result<SparsePcaResult> {
    // Re-normalize to clear rounding drift from the restricted runs.
    let r = dot(&v_hat, &v_hat).sqrt();
    v_hat.iter_mut().for_each(|x| *x /= r);
    let sin2 = sin2(&v_hat, model.v1())?;
    Ok(SparsePcaResult { pipeline, sin2, support, n_used: n, seed, eta, wall_time_ms: None, v_hat })
}

/// Per-pipeline knobs shared by experiment drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k: usize,
    pub eta: f64,
    pub schedule: OptimalSchedule,
}

/// Dispatch on `pipeline`.
pub fn run_pipeline<S: SampleSource>(
    pipeline: Pipeline,
    data: &mut S,
    model: &CovModel,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<SparsePcaResult> {
    match pipeline {
        Pipeline::TruncVec => pipeline_trunc_vec(data, model, cfg.k, cfg.eta, seed),
        Pipeline::TruncData => pipeline_trunc_data(data, model, cfg.k, cfg.eta, cfg.schedule, seed),
        Pipeline::PlainOja => plain_oja(data, model, cfg.eta, seed),
        Pipeline::DiagThresh => pipeline_diag_thresh(data, model, cfg.k, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cov_models::make_single_spike;
    use crate::oja::default_learning_rate;
    use crate::sampling::{Family, SampleStream};

    #[test]
    fn truncation_examples() {
        assert_eq!(truncate_renormalize(&[0.6, 0.8, 0.0], &[0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let v = [0.6, 0.8, 0.0];
        assert_eq!(truncate_renormalize(&v, &[0, 1, 2]).unwrap(), v.to_vec());
        assert_eq!(truncate_renormalize(&[0.0, 1.0, 0.0], &[0]), Err(Error::ZeroAfterTruncation));
    }

    #[test]
    fn sin2_examples() {
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(sin2(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(sin2(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((sin2(&[1.0, 0.0], &[h, h]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(sin2(&[2.0, 0.0], &[1.0, 0.0]), Err(Error::NotUnit(_))));
    }

    #[test]
    fn halves_are_disjoint() {
        let m = make_single_spike(10, 2, 2.0, None).unwrap();
        let mut s = SampleStream::new(&m, 101, 9, Family::Gaussian);
        let eta = default_learning_rate(101.0, m.gap()).unwrap();
        let r = pipeline_trunc_vec(&mut s, &m, 2, eta, 9).unwrap();
        assert_eq!(s.cursor(), 101);
        assert_eq!(r.n_used, 101);
        assert_eq!(r.support.len(), 2);
    }

    #[test]
    fn one_sparse_output() {
        let m = make_single_spike(6, 2, 3.0, None).unwrap();
        let mut s = SampleStream::new(&m, 400, 4, Family::Gaussian);
        let r = pipeline_trunc_data(&mut s, &m, 1, 0.01, OptimalSchedule::default(), 4).unwrap();
        let j = r.support.indices[0];
        assert_eq!(r.v_hat[j].abs(), 1.0);
        assert!((r.sin2 - (1.0 - m.v1()[j].powi(2))).abs() < 1e-12);
    }
}
