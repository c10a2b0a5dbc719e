//! Synthetic population covariances with known eigenstructure.
//!
//! Spiked models keep only the spike directions plus an isotropic floor `c`
//! on their orthogonal complement, so matvecs and sampling stay O(d·r).
//! General models carry a full orthonormal basis and a zero floor.
//!
//! Indices are 0-based in code and in serialized output.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

const ORTHO_TOL: f64 = 1e-10;
const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SingleSpike,
    MultiSpike,
    Counterexample,
    General,
}

/// Population covariance Σ = Σᵢ (λᵢ − c) vᵢvᵢᵀ + c·I over the stored pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CovModel {
    kind: ModelKind,
    d: usize,
    eigvals: Vec<f64>,
    eigvecs: Vec<Vec<f64>>,
    floor: f64,
    support: Vec<usize>,
}

/// One spike of a multi-spike model: strength `nu` on `indices`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeSpec {
    pub nu: f64,
    pub indices: Vec<usize>,
    /// Entries on `indices`; uniform `1/√len` when absent.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

/// JSON/TOML model descriptor consumed by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDescriptor {
    SingleSpike {
        d: usize,
        s: usize,
        nu: f64,
        #[serde(default)]
        support_values: Option<Vec<f64>>,
    },
    MultiSpike {
        d: usize,
        spikes: Vec<SpikeSpec>,
    },
    Counterexample {
        d: usize,
        s: usize,
    },
    General {
        eigvals: Vec<f64>,
        /// Eigenvectors as rows, one per eigenvalue.
        eigvecs: Vec<Vec<f64>>,
    },
}

impl ModelDescriptor {
    pub fn build(&self) -> Result<CovModel> {
        match self {
            ModelDescriptor::SingleSpike { d, s, nu, support_values } => {
                make_single_spike(*d, *s, *nu, support_values.as_deref())
            }
            ModelDescriptor::MultiSpike { d, spikes } => make_multi_spike(*d, spikes),
            ModelDescriptor::Counterexample { d, s } => make_counterexample(*s, *d),
            ModelDescriptor::General { eigvals, eigvecs } => make_general(eigvals.clone(), eigvecs.clone()),
        }
    }
}

/// Summary statistics of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub eff_rank: f64,
    pub gap: f64,
    pub ratio: f64,
    pub tr_lambda2: f64,
    pub min_support_entry: f64,
}

/// Evaluation of the two regularity inequalities for a given `(n, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub n: usize,
    pub c: f64,
    /// max{1, λ₂/gap}·Tr(Λ₂)/gap
    pub trace_lhs: f64,
    /// c·n/ln n
    pub trace_rhs: f64,
    pub trace_holds: bool,
    /// λ₁/gap
    pub ratio_lhs: f64,
    /// c·√n/ln n
    pub ratio_rhs: f64,
    pub ratio_holds: bool,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.trace_holds && self.ratio_holds
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_ortho_deviation(vecs: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..vecs.len() {
        for j in i..vecs.len() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(&vecs[i], &vecs[j]) - target).abs());
        }
    }
    worst
}

fn support_of(v: &[f64]) -> Vec<usize> {
    v.iter().enumerate().filter(|(_, x)| x.abs() > SUPPORT_TOL).map(|(i, _)| i).collect()
}

/// Σ = ν·v₁v₁ᵀ + I with v₁ on the first `s` coordinates.
pub fn make_single_spike(d: usize, s: usize, nu: f64, support_values: Option<&[f64]>) -> Result<CovModel> {
    if s == 0 || s > d {
        return Err(Error::InvalidDims(format!("need 1 <= s <= d, got s={s}, d={d}")));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidSpike(nu));
    }
    let mut v1 = vec![0.0; d];
    match support_values {
        Some(vals) => {
            if vals.len() != s {
                return Err(Error::InvalidDims(format!("support_values has length {}, expected {s}", vals.len())));
            }
            let norm = dot(vals, vals).sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::NotUnit(norm));
            }
            if vals.iter().any(|x| x.abs() <= SUPPORT_TOL) {
                return Err(Error::InvalidParameter("support_values must be nonzero on every support index".into()));
            }
            for (i, x) in vals.iter().enumerate() {
                v1[i] = x / norm;
            }
        }
        None => {
            let e = 1.0 / (s as f64).sqrt();
            v1[..s].iter_mut().for_each(|x| *x = e);
        }
    }
    Ok(CovModel {
        kind: ModelKind::SingleSpike,
        d,
        eigvals: vec![nu + 1.0],
        eigvecs: vec![v1],
        floor: 1.0,
        support: (0..s).collect(),
    })
}

/// Σ = Σᵢ νᵢvᵢvᵢᵀ + I for orthonormal spike directions with ν₁ > ν₂ ≥ ….
pub fn make_multi_spike(d: usize, spikes: &[SpikeSpec]) -> Result<CovModel> {
    if spikes.is_empty() || spikes.len() > d {
        return Err(Error::InvalidDims(format!("need 1 <= #spikes <= d, got {} spikes in d={d}", spikes.len())));
    }
    let mut vecs = Vec::with_capacity(spikes.len());
    for sp in spikes {
        if !(sp.nu > 0.0) || !sp.nu.is_finite() {
            return Err(Error::InvalidSpike(sp.nu));
        }
        if sp.indices.is_empty() || sp.indices.iter().any(|&i| i >= d) {
            return Err(Error::InvalidDims("spike indices must be nonempty and < d".into()));
        }
        let vals = match &sp.values {
            Some(v) if v.len() == sp.indices.len() => v.clone(),
            Some(_) => return Err(Error::InvalidDims("spike values and indices differ in length".into())),
            None => vec![1.0 / (sp.indices.len() as f64).sqrt(); sp.indices.len()],
        };
        let mut v = vec![0.0; d];
        for (&i, x) in sp.indices.iter().zip(&vals) {
            v[i] = *x;
        }
        let norm = dot(&v, &v).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnit(norm));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        vecs.push(v);
    }
    let dev = max_ortho_deviation(&vecs);
    if dev > ORTHO_TOL {
        return Err(Error::NotOrthonormal(dev));
    }
    let eigvals: Vec<f64> = spikes.iter().map(|sp| sp.nu + 1.0).collect();
    check_descending(&eigvals, if spikes.len() < d { Some(1.0) } else { None })?;
    let support = support_of(&vecs[0]);
    Ok(CovModel { kind: ModelKind::MultiSpike, d, eigvals, eigvecs: vecs, floor: 1.0, support })
}

/// Multi-spike construction on which diagonal thresholding picks the wrong block.
///
/// v₁ is uniform on the first `s` coordinates; v₂, v₃, v₄ are uniform on three
/// consecutive blocks of size s/3 covering the next `s` coordinates.
/// Spike strengths are β₁ = 1/2, β₂ = β₁/2, β₃ = β₁/2.1, β₄ = β₁/2.2 over a
/// floor of 1/2, so λ₁ = 1.
pub fn make_counterexample(s: usize, d: usize) -> Result<CovModel> {
    if s == 0 || s % 3 != 0 {
        return Err(Error::InvalidDims(format!("s must be a positive multiple of 3, got {s}")));
    }
    if d <= 2 * s {
        return Err(Error::InvalidDims(format!("need d > 2s, got d={d}, s={s}")));
    }
    let beta1 = 0.5;
    let betas = [beta1, beta1 / 2.0, beta1 / 2.1, beta1 / 2.2];
    let mut vecs = Vec::with_capacity(4);
    let mut v1 = vec![0.0; d];
    v1[..s].iter_mut().for_each(|x| *x = 1.0 / (s as f64).sqrt());
    vecs.push(v1);
    let block = s / 3;
    let e = (3.0 / s as f64).sqrt();
    for b in 0..3 {
        let mut v = vec![0.0; d];
        let start = s + b * block;
        v[start..start + block].iter_mut().for_each(|x| *x = e);
        vecs.push(v);
    }
    Ok(CovModel {
        kind: ModelKind::Counterexample,
        d,
        eigvals: betas.iter().map(|b| b + 0.5).collect(),
        eigvecs: vecs,
        floor: 0.5,
        support: (0..s).collect(),
    })
}

/// Wrap an explicit eigendecomposition. `eigvecs[i]` pairs with `eigvals[i]`.
pub fn make_general(eigvals: Vec<f64>, eigvecs: Vec<Vec<f64>>) -> Result<CovModel> {
    let d = eigvals.len();
    if d < 2 || eigvecs.len() != d || eigvecs.iter().any(|v| v.len() != d) {
        return Err(Error::InvalidDims(format!("need d >= 2 eigenvalues and a d x d basis, got {d} eigenvalues")));
    }
    if eigvals.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidParameter("eigenvalues must be finite and >= 0".into()));
    }
    check_descending(&eigvals, None)?;
    let dev = max_ortho_deviation(&eigvecs);
    if dev > ORTHO_TOL {
        return Err(Error::NotOrthonormal(dev));
    }
    let support = support_of(&eigvecs[0]);
    Ok(CovModel { kind: ModelKind::General, d, eigvals, eigvecs, floor: 0.0, support })
}

fn check_descending(eigvals: &[f64], floor: Option<f64>) -> Result<()> {
    let mut all = eigvals.to_vec();
    all.extend(floor);
    if all.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::NotDescending);
    }
    if all.len() >= 2 && !(all[0] > all[1]) {
        return Err(Error::NotDescending);
    }
    Ok(())
}

impl CovModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of explicitly stored eigenpairs.
    pub fn rank_explicit(&self) -> usize {
        self.eigvals.len()
    }

    /// Eigenvalue of the implicit complement (0 for general models).
    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn explicit_eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn explicit_eigvecs(&self) -> &[Vec<f64>] {
        &self.eigvecs
    }

    /// All d eigenvalues in descending order.
    pub fn eigvals(&self) -> Vec<f64> {
        let mut out = self.eigvals.clone();
        out.resize(self.d, self.floor);
        out
    }

    pub fn lambda1(&self) -> f64 {
        self.eigvals[0]
    }

    pub fn lambda2(&self) -> f64 {
        self.eigvals.get(1).copied().unwrap_or(self.floor)
    }

    pub fn gap(&self) -> f64 {
        self.lambda1() - self.lambda2()
    }

    pub fn trace(&self) -> f64 {
        self.eigvals.iter().sum::<f64>() + (self.d - self.eigvals.len()) as f64 * self.floor
    }

    pub fn v1(&self) -> &[f64] {
        &self.eigvecs[0]
    }

    /// Sorted 0-based support of v₁.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn s(&self) -> usize {
        self.support.len()
    }

    /// Σx in O(d·r) without forming Σ.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().map(|xi| self.floor * xi).collect();
        for (lam, v) in self.eigvals.iter().zip(&self.eigvecs) {
            let w = (lam - self.floor) * dot(v, x);
            out.iter_mut().zip(v).for_each(|(o, vi)| *o += w * vi);
        }
        out
    }

    /// Σᵢᵢ.
    pub fn diag(&self, i: usize) -> f64 {
        self.floor
            + self.eigvals.iter().zip(&self.eigvecs).map(|(lam, v)| (lam - self.floor) * v[i] * v[i]).sum::<f64>()
    }

    /// Dense Σ. Intended for small d (tests, dense oracles).
    pub fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::identity(self.d, self.d) * self.floor;
        for (lam, v) in self.eigvals.iter().zip(&self.eigvecs) {
            let w = lam - self.floor;
            for i in 0..self.d {
                if v[i] == 0.0 {
                    continue;
                }
                for j in 0..self.d {
                    m[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        m
    }

    /// Σ restricted to the coordinates in `idx`, as a dense |idx|×|idx| matrix.
    pub fn restricted_dense(&self, idx: &[usize]) -> DMatrix<f64> {
        let k = idx.len();
        let mut m = DMatrix::<f64>::zeros(k, k);
        for a in 0..k {
            m[(a, a)] = self.floor;
        }
        for (lam, v) in self.eigvals.iter().zip(&self.eigvecs) {
            let w = lam - self.floor;
            for a in 0..k {
                for b in 0..k {
                    m[(a, b)] += w * v[idx[a]] * v[idx[b]];
                }
            }
        }
        m
    }

    pub fn stats(&self) -> ModelStats {
        let tr = self.trace();
        let l1 = self.lambda1();
        let min_entry = self.support.iter().map(|&i| self.v1()[i].abs()).fold(f64::INFINITY, f64::min);
        ModelStats {
            eff_rank: tr / l1,
            gap: self.gap(),
            ratio: l1 / self.lambda2(),
            tr_lambda2: tr - l1,
            min_support_entry: min_entry,
        }
    }

    /// Check the trace and eigen-ratio regularity inequalities at `(n, c)`.
    pub fn assumption_report(&self, n: usize, c: f64) -> AssumptionReport {
        let st = self.stats();
        let ln_n = (n as f64).ln();
        let trace_lhs = (self.lambda2() / st.gap).max(1.0) * st.tr_lambda2 / st.gap;
        let trace_rhs = c * n as f64 / ln_n;
        let ratio_lhs = self.lambda1() / st.gap;
        let ratio_rhs = c * (n as f64).sqrt() / ln_n;
        AssumptionReport {
            n,
            c,
            trace_lhs,
            trace_rhs,
            trace_holds: trace_lhs <= trace_rhs,
            ratio_lhs,
            ratio_rhs,
            ratio_holds: ratio_lhs <= ratio_rhs,
        }
    }

    /// S_hi = {i ∈ S : |v₁(i)| ≥ √(ln d / n)}.
    pub fn s_hi(&self, n: usize) -> Vec<usize> {
        let cut = ((self.d as f64).ln() / n as f64).sqrt();
        self.support.iter().copied().filter(|&i| self.v1()[i].abs() >= cut).collect()
    }
}
