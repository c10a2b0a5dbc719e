//! Support estimation from an Oja state: top-k by magnitude, or a log-scale threshold.

use crate::error::{Error, Result};
use crate::oja::OjaState;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// How an index set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SupportParams {
    TopK {
        k: usize,
    },
    Threshold {
        log_gamma: f64,
    },
    /// Top-s of empirical diagonal variances.
    Diagonal {
        s: usize,
    },
}

/// Estimated support Ŝ (sorted, 0-based) with the per-index scores behind it.
///
/// For Oja-based methods the scores are log|eᵢᵀBₙu₀|; for the diagonal
/// method they are the empirical variances.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    pub indices: Vec<usize>,
    pub params: SupportParams,
    pub scores: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SupportJson {
    method: String,
    indices: Vec<usize>,
    params: SupportParams,
    index_base: u8,
}

impl Serialize for SupportEstimate {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SupportJson {
            method: self.method().to_string(),
            indices: self.indices.clone(),
            params: self.params,
            index_base: 0,
        }
        .serialize(ser)
    }
}

impl SupportEstimate {
    pub fn method(&self) -> &'static str {
        match self.params {
            SupportParams::TopK { .. } => "top_k",
            SupportParams::Threshold { .. } => "threshold",
            SupportParams::Diagonal { .. } => "diagonal",
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

/// Indices of the `k` largest `values`, ties to the lowest index, returned sorted.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp = |a: &usize, b: &usize| values[*b].partial_cmp(&values[*a]).unwrap_or(Ordering::Equal).then(a.cmp(b));
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, cmp);
    }
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Ŝ = indices of the k largest |u(i)|.
pub fn top_k_support(state: &OjaState, k: usize) -> Result<SupportEstimate> {
    let d = state.dim();
    if k == 0 || k > d {
        return Err(Error::InvalidK { k, d });
    }
    let mags: Vec<f64> = state.u().iter().map(|x| x.abs()).collect();
    Ok(SupportEstimate { indices: top_k_indices(&mags, k), params: SupportParams::TopK { k }, scores: state.scores() })
}

/// Ŝ = {i : log|eᵢᵀBₙu₀| ≥ log_gamma}. A NaN threshold selects nothing.
pub fn threshold_support(state: &OjaState, log_gamma: f64) -> SupportEstimate {
    let scores = state.scores();
    let indices = scores.iter().enumerate().filter(|(_, s)| **s >= log_gamma).map(|(i, _)| i).collect();
    SupportEstimate { indices, params: SupportParams::Threshold { log_gamma }, scores }
}

/// Default δ of the thresholded variant.
pub const DEFAULT_DELTA: f64 = 0.75;

/// log γₙ = log(δ/√(2e)) + log(min_v1_hi) + n·log(1 + ηλ₁), kept in log space.
pub fn log_threshold(n: usize, eta: f64, lambda1: f64, min_v1_hi: f64, delta: f64) -> Result<f64> {
    if !(min_v1_hi > 0.0) {
        return Err(Error::InvalidMinEntry(min_v1_hi));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let base = (delta / (2.0 * std::f64::consts::E).sqrt()).ln() + min_v1_hi.ln();
    Ok(base + n as f64 * (eta * lambda1).ln_1p())
}

/// Set-level agreement between Ŝ and the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportMetrics {
    pub contains_s: bool,
    pub contains_s_hi: bool,
    /// |Ŝ ∩ S| / |Ŝ|, 0 when Ŝ is empty.
    pub precision: f64,
    /// |Ŝ ∩ S| / |S|, 1 when S is empty.
    pub recall: f64,
    pub size: usize,
    pub intersection: usize,
}

pub fn support_metrics(est: &SupportEstimate, truth: &[usize], s_hi: &[usize]) -> SupportMetrics {
    let inter = truth.iter().filter(|&&i| est.contains(i)).count();
    let size = est.len();
    SupportMetrics {
        contains_s: inter == truth.len(),
        contains_s_hi: s_hi.iter().all(|&i| est.contains(i)),
        precision: if size == 0 { 0.0 } else { inter as f64 / size as f64 },
        recall: if truth.is_empty() { 1.0 } else { inter as f64 / truth.len() as f64 },
        size,
        intersection: inter,
    }
}
