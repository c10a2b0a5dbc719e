//! Closed-form moment and tail envelopes for products of rank-one perturbations,
//! plus the exact and Monte Carlo references they are checked against.
//!
//! Everything that grows like (1 + ηλ₁)ⁿ is evaluated in log scale.

use crate::cov_models::CovModel;
use crate::error::{Error, Result};
use crate::oja::{OjaState, StepSize};
use crate::rng::{sub_seed, tag, trial_seed};
use crate::sampling::{gaussian_unit_init, Family, SampleSource, SampleStream};
pub use nalgebra::DMatrix;
use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use std::ops::Mul;

// ---------------------------------------------------------------------------
// 2×2 powers

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// max|A − B| / max|B|.
    pub fn rel_err(&self, reference: &Mat2) -> f64 {
        let mut diff = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                diff = diff.max((self.0[i][j] - reference.0[i][j]).abs());
            }
        }
        diff / reference.max_abs()
    }

    fn lin(&self, a: f64, b: f64) -> Mat2 {
        let m = &self.0;
        Mat2([[a * m[0][0] - b, a * m[0][1]], [a * m[1][0], a * m[1][1] - b]])
    }

    /// Real eigenvalues (larger first), if the discriminant is positive.
    pub fn eigenvalues(&self) -> Option<(f64, f64)> {
        let t = self.trace();
        let disc = t * t / 4.0 - self.det();
        (disc > 0.0).then(|| (t / 2.0 + disc.sqrt(), t / 2.0 - disc.sqrt()))
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

/// Pⁿ = aₙP − bₙI with aₙ = (l₁ⁿ − l₂ⁿ)/(l₁ − l₂) and bₙ = l₁l₂·aₙ₋₁.
///
/// Requires T²/4 − D > 1e-14·T². Close eigenvalues switch aₙ to the
/// geometric sum Σ l₁ʲl₂ⁿ⁻¹⁻ʲ, which avoids the cancellation.
pub fn two_by_two_power(p: &Mat2, n: u32) -> Result<Mat2> {
    let t = p.trace();
    let disc = t * t / 4.0 - p.det();
    if !(disc > 1e-14 * t * t && disc > 0.0) {
        return Err(Error::NearDegenerateEigenvalues);
    }
    let r = disc.sqrt();
    let (l1, l2) = (t / 2.0 + r, t / 2.0 - r);
    let a = |k: u32| -> f64 {
        if k == 0 {
            return 0.0;
        }
        let close = (l1 - l2).abs() < 0.5 * l1.abs().max(l2.abs());
        if close && k <= 10_000 {
            (0..k).map(|j| l1.powi(j as i32) * l2.powi((k - 1 - j) as i32)).sum()
        } else {
            (l1.powi(k as i32) - l2.powi(k as i32)) / (l1 - l2)
        }
    };
    let an = a(n);
    let bn = if n == 0 { -1.0 } else { l1 * l2 * a(n - 1) };
    Ok(p.lin(an, bn))
}

/// Pⁿ by repeated squaring. Works for any P.
pub fn matrix_power_fallback(p: &Mat2, mut n: u32) -> Mat2 {
    let mut acc = Mat2::IDENTITY;
    let mut base = *p;
    while n > 0 {
        if n & 1 == 1 {
            acc = acc * base;
        }
        base = base * base;
        n >>= 1;
    }
    acc
}

// ---------------------------------------------------------------------------
// Generic recursion system

/// αₙ ≤ (1 + c₁ηλ₁ + c₂η²λ₁²)αₙ₋₁ + c₃η²λ₁λ₂βₙ₋₁,
/// βₙ ≤ (1 + c₁ηλ₂ + c₄η²λ₂TrΣ)βₙ₋₁ + c₅η²λ₁TrΣ·αₙ₋₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionSystem {
    pub c: [f64; 5],
    pub eta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub trace_sigma: f64,
    /// Solves c₁(1−θ)gap + c₂ηλ₁² = c₄ηλ₂TrΣ.
    pub theta: f64,
}

/// Solve the linear θ-equation; error unless θ ∈ (0.5, 1).
pub fn solve_theta(c1: f64, c2: f64, c4: f64, eta: f64, l1: f64, l2: f64, tr: f64) -> Result<f64> {
    let gap = l1 - l2;
    if !(gap > 0.0) {
        return Err(Error::InvalidGap(gap));
    }
    let theta = 1.0 - (c4 * eta * l2 * tr - c2 * eta * l1 * l1) / (c1 * gap);
    if theta > 0.5 && theta < 1.0 {
        Ok(theta)
    } else {
        Err(Error::NoValidTheta(theta))
    }
}

impl RecursionSystem {
    pub fn new(c: [f64; 5], eta: f64, lambda1: f64, lambda2: f64, trace_sigma: f64) -> Result<Self> {
        if c.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidParameter("recursion constants must be positive".into()));
        }
        let theta = solve_theta(c[0], c[1], c[3], eta, lambda1, lambda2, trace_sigma)?;
        Ok(RecursionSystem { c, eta, lambda1, lambda2, trace_sigma, theta })
    }

    fn gap(&self) -> f64 {
        self.lambda1 - self.lambda2
    }

    /// The one-step transition matrix P.
    pub fn matrix(&self) -> Mat2 {
        let [c1, c2, c3, c4, c5] = self.c;
        let (e, l1, l2, tr) = (self.eta, self.lambda1, self.lambda2, self.trace_sigma);
        Mat2::new(
            1.0 + c1 * e * l1 + c2 * e * e * l1 * l1,
            c3 * e * e * l1 * l2,
            c5 * e * e * l1 * tr,
            1.0 + c1 * e * l2 + c4 * e * e * l2 * tr,
        )
    }

    /// Residual of the θ-equation, relative to its right side.
    pub fn theta_residual(&self) -> f64 {
        let [c1, c2, _, c4, _] = self.c;
        let lhs = c1 * (1.0 - self.theta) * self.gap() + c2 * self.eta * self.lambda1 * self.lambda1;
        let rhs = c4 * self.eta * self.lambda2 * self.trace_sigma;
        (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE)
    }

    /// The two side conditions as (value, limit) pairs.
    pub fn side_conditions(&self) -> [(f64, f64); 2] {
        let [c1, c2, c3, _, c5] = self.c;
        let (e, l1, l2, tr, th) = (self.eta, self.lambda1, self.lambda2, self.trace_sigma, self.theta);
        let g = self.gap();
        let first = 4.0 * c3 * c5 / (c1 * c1) * e * e * l2 * tr * (l1 / (th * g)).powi(2);
        let second = 4.0 * e * l1 * (c2 * l1 / (c1 * g));
        [(first, 1.0), (second, 1.0 - th)]
    }

    pub fn side_conditions_hold(&self) -> bool {
        self.side_conditions().iter().all(|(v, lim)| v <= lim)
    }

    /// Upper bounds on λ₁(P) and λ₂(P).
    pub fn eigen_bounds(&self) -> (f64, f64) {
        let [c1, c2, c3, c4, c5] = self.c;
        let (e, l1, l2, tr, th) = (self.eta, self.lambda1, self.lambda2, self.trace_sigma, self.theta);
        let slack = c3 * c5 / c4 * e * e * l1 * l1 * (1.0 - th) / th;
        (1.0 + c1 * e * l1 + c2 * e * e * l1 * l1 + slack, 1.0 + c1 * e * l2 + c4 * e * e * l2 * tr + slack)
    }

    /// Log-scale bounds on (αₙ, βₙ) from (α₀, β₀).
    pub fn bound_log(&self, alpha0: f64, beta0: f64, n: u64) -> (f64, f64) {
        let [c1, _, c3, c4, c5] = self.c;
        let (e, l1, tr, th) = (self.eta, self.lambda1, self.trace_sigma, self.theta);
        let g = self.gap();
        let (p1, p2) = self.eigen_bounds();
        let r = (1.0 - th) / th;
        let a_br = alpha0 + e * l1 * (2.0 * c3 * l1 / (c1 * th * g)) * (beta0 + alpha0 * c5 / c4 * r);
        let k = e * l1 * (2.0 * c5 * l1 / (c1 * th * g)) * (alpha0 * tr / l1 + beta0 * c3 / c4 * r);
        let nf = n as f64;
        (nf * p1.ln() + a_br.ln(), log_add_exp(beta0.ln() + nf * p2.ln(), k.ln() + nf * p1.ln()))
    }
}

// ---------------------------------------------------------------------------
// Envelopes

/// Initial projection UUᵀ, summarized by α₀ = v₁ᵀUUᵀv₁ and β₀ = Tr(V⊥ᵀUUᵀV⊥).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum USpec {
    Coordinate(usize),
    SupportSet(Vec<usize>),
    Custom { alpha0: f64, beta0: f64 },
}

impl USpec {
    pub fn alpha_beta(&self, m: &CovModel) -> Result<(f64, f64)> {
        let v1 = m.v1();
        match self {
            USpec::Coordinate(i) => {
                let a = *v1.get(*i).ok_or_else(|| Error::InvalidDims(format!("index {i} >= d")))?;
                Ok((a * a, 1.0 - a * a))
            }
            USpec::SupportSet(idx) => {
                if idx.iter().any(|&i| i >= m.dim()) {
                    return Err(Error::InvalidDims("support index >= d".into()));
                }
                let a: f64 = idx.iter().map(|&i| v1[i] * v1[i]).sum();
                Ok((a, idx.len() as f64 - a))
            }
            USpec::Custom { alpha0, beta0 } => Ok((*alpha0, *beta0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    SecondMoment,
    FourthMoment,
}

/// Closed-form envelope (γ₁, γ₂ or μ₁, μ₂ family) for a fixed U.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEnvelope {
    pub kind: EnvelopeKind,
    /// Per-step growth of the v₁ component.
    pub gamma1: f64,
    /// Per-step growth of the orthogonal component.
    pub gamma2: f64,
    pub theta: f64,
    pub alpha0: f64,
    pub beta0: f64,
    /// Bracket multiplying γ₁ⁿ in the α bound.
    pub alpha_coef: f64,
    /// Coefficient of γ₁ⁿ in the β bound.
    pub beta_cross: f64,
    /// The recursion's side conditions, reported rather than enforced.
    pub side_conditions_hold: bool,
}

impl BoundEnvelope {
    /// log of the bound on E[v₁ᵀBₙUUᵀBₙᵀv₁] (or its square for the fourth moment).
    pub fn alpha_log(&self, n: u64) -> f64 {
        let a = n as f64 * self.gamma1.ln() + self.alpha_coef.ln();
        match self.kind {
            EnvelopeKind::SecondMoment => a,
            EnvelopeKind::FourthMoment => 2.0 * a,
        }
    }

    /// log of the bound on E[Tr(V⊥ᵀBₙUUᵀBₙᵀV⊥)] (or its square).
    pub fn beta_log(&self, n: u64) -> f64 {
        let nf = n as f64;
        let b = log_add_exp(self.beta0.ln() + nf * self.gamma2.ln(), self.beta_cross.ln() + nf * self.gamma1.ln());
        match self.kind {
            EnvelopeKind::SecondMoment => b,
            EnvelopeKind::FourthMoment => 2.0 * b,
        }
    }
}

fn envelope_coefs(eta: f64, l1: f64, gap: f64, tr: f64, theta: f64, a0: f64, b0: f64) -> (f64, f64) {
    let r = (1.0 - theta) / theta;
    let pre = eta * l1 * (2.0 * l1 / (theta * gap));
    (a0 + pre * (b0 + a0 * r), pre * (a0 * tr / l1 + b0 * r))
}

/// η = 0: every product is I, so the bounds are α₀ and β₀ exactly.
fn frozen_envelope(kind: EnvelopeKind, a0: f64, b0: f64) -> BoundEnvelope {
    BoundEnvelope {
        kind,
        gamma1: 1.0,
        gamma2: 1.0,
        theta: 1.0,
        alpha0: a0,
        beta0: b0,
        alpha_coef: a0,
        beta_cross: 0.0,
        side_conditions_hold: true,
    }
}

/// Second-moment envelope with γ₁ = 1 + 2ηλ₁ + 8L⁴σ⁴η²λ₁² and
/// γ₂ = 1 + 2ηλ₂ + 4L⁴σ⁴η²(λ₁² + λ₂TrΣ).
///
/// θ solves (1−θ)gap + 2L⁴σ⁴ηλ₁² = 2L⁴σ⁴ηλ₂TrΣ and must lie in (0.5, 1).
pub fn second_moment_envelope(m: &CovModel, eta: f64, l: f64, sigma: f64, u: &USpec) -> Result<BoundEnvelope> {
    let k4 = (l * sigma).powi(4);
    let (l1, l2, tr, gap) = (m.lambda1(), m.lambda2(), m.trace(), m.gap());
    if eta == 0.0 {
        let (a0, b0) = u.alpha_beta(m)?;
        return Ok(frozen_envelope(EnvelopeKind::SecondMoment, a0, b0));
    }
    let theta = solve_theta(1.0, 2.0 * k4, 2.0 * k4, eta, l1, l2, tr)?;
    let (a0, b0) = u.alpha_beta(m)?;
    let (alpha_coef, beta_cross) = envelope_coefs(eta, l1, gap, tr, theta, a0, b0);
    let c = 4.0 * k4;
    let sys = RecursionSystem { c: [2.0, c, c, c, c], eta, lambda1: l1, lambda2: l2, trace_sigma: tr, theta };
    Ok(BoundEnvelope {
        kind: EnvelopeKind::SecondMoment,
        gamma1: 1.0 + 2.0 * eta * l1 + 8.0 * k4 * eta * eta * l1 * l1,
        gamma2: 1.0 + 2.0 * eta * l2 + 4.0 * k4 * eta * eta * (l1 * l1 + l2 * tr),
        theta,
        alpha0: a0,
        beta0: b0,
        alpha_coef,
        beta_cross,
        side_conditions_hold: sys.side_conditions_hold(),
    })
}

/// Fourth-moment envelope with μ₁ = 1 + 2ηλ₁ + 100L⁴σ⁴η²λ₁² and
/// μ₂ = 1 + 2ηλ₂ + 50L⁴σ⁴η²(λ₁² + λ₂TrΣ); bounds are the squares of the
/// second-moment-shaped expressions.
pub fn fourth_moment_envelope(m: &CovModel, eta: f64, l: f64, sigma: f64, u: &USpec) -> Result<BoundEnvelope> {
    let k2 = (l * sigma).powi(2);
    let k4 = k2 * k2;
    let (l1, l2, tr, gap) = (m.lambda1(), m.lambda2(), m.trace(), m.gap());
    if eta == 0.0 {
        let (a0, b0) = u.alpha_beta(m)?;
        return Ok(frozen_envelope(EnvelopeKind::FourthMoment, a0, b0));
    }
    let theta = solve_theta(2.0, 50.0 * k4, 50.0 * k4, eta, l1, l2, tr)?;
    let (a0, b0) = u.alpha_beta(m)?;
    let (alpha_coef, beta_cross) = envelope_coefs(eta, l1, gap, tr, theta, a0, b0);
    let c3 = 25.0 * k2 * l1 / l2;
    let c5 = 25.0 * k2 * l1 / tr;
    let sys = RecursionSystem {
        c: [2.0, 50.0 * k4, c3, 50.0 * k4, c5],
        eta,
        lambda1: l1,
        lambda2: l2,
        trace_sigma: tr,
        theta,
    };
    Ok(BoundEnvelope {
        kind: EnvelopeKind::FourthMoment,
        gamma1: 1.0 + 2.0 * eta * l1 + 100.0 * k4 * eta * eta * l1 * l1,
        gamma2: 1.0 + 2.0 * eta * l2 + 50.0 * k4 * eta * eta * (l1 * l1 + l2 * tr),
        theta,
        alpha0: a0,
        beta0: b0,
        alpha_coef,
        beta_cross,
        side_conditions_hold: sys.side_conditions_hold(),
    })
}

/// log of exp(2nηλ₁ + nη²𝒱) with 𝒱 = 2L⁴σ⁴λ₁TrΣ + λ₁².
pub fn naive_bound_log(m: &CovModel, eta: f64, l: f64, sigma: f64, n: u64) -> f64 {
    let k4 = (l * sigma).powi(4);
    let v = 2.0 * k4 * m.lambda1() * m.trace() + m.lambda1().powi(2);
    let nf = n as f64;
    2.0 * nf * eta * m.lambda1() + nf * eta * eta * v
}

// ---------------------------------------------------------------------------
// Tail bounds

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBounds {
    /// (i, bound on P(|rᵢ| ≤ τₙ | G)) for i ∈ S.
    pub p_in_support: Vec<(usize, f64)>,
    /// Bound on P(|rᵢ| > τₙ) for any i ∉ S.
    pub p_out_support: f64,
    /// log τₙ = log(δ/√(2e)) + log min_S|v₁(i)| + n·log(1 + ηλ₁).
    pub tau_n_log: f64,
}

/// Evaluate the entrywise tail expressions with absolute constants `c_h`, `c_t`.
pub fn tail_bounds(m: &CovModel, eta: f64, n: usize, delta: f64, c_h: f64, c_t: f64) -> Result<TailBounds> {
    let st = m.stats();
    if !(st.min_support_entry > 0.0) {
        return Err(Error::InvalidMinEntry(st.min_support_entry));
    }
    let (l1, gap) = (m.lambda1(), m.gap());
    let v1 = m.v1();
    let ln_n = (n.max(1) as f64).ln();
    let p_in_support =
        m.support().iter().map(|&i| (i, c_h * (eta * l1 * ln_n + eta * l1 * (l1 / gap) / (v1[i] * v1[i])))).collect();
    let min_hi = m.s_hi(n.max(1)).iter().map(|&i| v1[i] * v1[i]).fold(f64::INFINITY, f64::min);
    let p_out_support = c_t * (eta * l1).powi(2) * (l1 / gap).powi(2) * (1.0 / (delta * delta * min_hi)).powi(2);
    let tau_n_log = crate::support::log_threshold(n, eta, l1, st.min_support_entry, delta)?;
    Ok(TailBounds { p_in_support, p_out_support, tau_n_log })
}

// ---------------------------------------------------------------------------
// Log-scale Monte Carlo helpers

/// log(eᵃ + eᵇ), safe for −∞ inputs.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Mean of exp(logs) in log scale, with the relative standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogMoment {
    pub log_mean: f64,
    /// SE(mean)/mean.
    pub rel_se: f64,
    pub trials: usize,
}

impl LogMoment {
    pub fn from_logs(logs: &[f64]) -> Result<Self> {
        let t = logs.len();
        if t == 0 {
            return Err(Error::EmptyInput);
        }
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Ok(LogMoment { log_mean: m, rel_se: 0.0, trials: t });
        }
        let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let mean = w.iter().sum::<f64>() / t as f64;
        let var = if t > 1 { w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1) as f64 } else { 0.0 };
        Ok(LogMoment { log_mean: m + mean.ln(), rel_se: (var / t as f64).sqrt() / mean, trials: t })
    }

    /// True when mean − z·SE ≤ exp(bound_log).
    pub fn below(&self, bound_log: f64, z: f64) -> bool {
        let shrink = 1.0 - z * self.rel_se;
        if shrink <= 0.0 {
            return true;
        }
        self.log_mean + shrink.ln() <= bound_log
    }
}

/// Per-coordinate Monte Carlo estimates of E[(v₁ᵀBₙeᵢ)²] and E[Tr(V⊥ᵀBₙeᵢeᵢᵀBₙᵀV⊥)].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateMoments {
    pub alpha: Vec<LogMoment>,
    pub beta: Vec<LogMoment>,
    /// Fourth moments: E[(v₁ᵀBₙeᵢ)⁴] and E[Tr(·)²].
    pub alpha4: Vec<LogMoment>,
    pub beta4: Vec<LogMoment>,
}

/// Log-scale per-trial values of (v₁ᵀBₙeᵢ)² and ‖V⊥ᵀBₙeᵢ‖² for every i on one data stream.
pub fn coordinate_log_moments_one(
    m: &CovModel,
    eta: f64,
    n: usize,
    seed: u64,
    family: Family,
) -> Result<Vec<(f64, f64)>> {
    let d = m.dim();
    let step = StepSize::constant(eta)?;
    let mut states: Vec<OjaState> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            OjaState::new(&e, step)
        })
        .collect::<Result<_>>()?;
    let mut stream = SampleStream::new(m, n, sub_seed(seed, tag::DATA), family);
    let mut x = vec![0.0; d];
    while stream.remaining() > 0 {
        stream.next_into(&mut x)?;
        for s in states.iter_mut() {
            s.step(&x)?;
        }
    }
    let v1 = m.v1();
    Ok(states
        .iter()
        .map(|s| {
            let c: f64 = s.u().iter().zip(v1).map(|(a, b)| a * b).sum();
            let lm = 2.0 * s.total_log_magnitude();
            let perp = s.u().iter().zip(v1).map(|(a, b)| (a - c * b).powi(2)).sum::<f64>();
            (lm + (c * c).ln(), lm + perp.ln())
        })
        .collect())
}

/// Monte Carlo second and fourth coordinate moments over `trials` seeded runs.
pub fn coordinate_moments(
    m: &CovModel,
    eta: f64,
    n: usize,
    trials: usize,
    base_seed: u64,
    family: Family,
) -> Result<CoordinateMoments> {
    let per_trial: Vec<Vec<(f64, f64)>> =
        crate::trials::run_trials(trials, base_seed, |_, seed| coordinate_log_moments_one(m, eta, n, seed, family))
            .into_iter()
            .collect::<Result<_>>()?;
    let d = m.dim();
    let col = |i: usize, f: &dyn Fn(&(f64, f64)) -> f64| -> Result<LogMoment> {
        LogMoment::from_logs(&per_trial.iter().map(|t| f(&t[i])).collect::<Vec<_>>())
    };
    let mut out = CoordinateMoments { alpha: vec![], beta: vec![], alpha4: vec![], beta4: vec![] };
    for i in 0..d {
        out.alpha.push(col(i, &|p| p.0)?);
        out.beta.push(col(i, &|p| p.1)?);
        out.alpha4.push(col(i, &|p| 2.0 * p.0)?);
        out.beta4.push(col(i, &|p| 2.0 * p.1)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Exact population recursion and dense products

/// log‖M‖₂ and log v₁ᵀMv₁ at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPoint {
    pub n: usize,
    pub log_norm: f64,
    pub log_v1: f64,
}

fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn quad(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let d = v.len();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += v[i] * m[(i, j)] * v[j];
        }
    }
    acc
}

/// Exact E[BₙUUᵀBₙᵀ] for Gaussian data, started from `m0 = UUᵀ`, for n = 0..=n_max.
///
/// Uses E[(I+ηxxᵀ)M(I+ηxxᵀ)] = M + η(ΣM + MΣ) + η²(Tr(ΣM)Σ + 2ΣMΣ),
/// renormalizing M every step and carrying the scale in log form.
pub fn population_second_moment(m: &CovModel, eta: f64, m0: &DMatrix<f64>, n_max: usize) -> Vec<NormPoint> {
    let sigma = m.dense();
    let v1 = m.v1();
    let mut cur = m0.clone();
    let mut log_scale = 0.0;
    let mut out = Vec::with_capacity(n_max + 1);
    let record = |n: usize, cur: &DMatrix<f64>, log_scale: f64| NormPoint {
        n,
        log_norm: log_scale + spectral_norm_sym(cur).ln(),
        log_v1: log_scale + quad(cur, v1).ln(),
    };
    out.push(record(0, &cur, log_scale));
    for n in 1..=n_max {
        let sm = &sigma * &cur;
        let tr = sm.trace();
        let sms = &sm * &sigma;
        let next = &cur + (&sm + sm.transpose()) * eta + (&sigma * tr + sms * 2.0) * (eta * eta);
        let s = next.amax();
        cur = next / s;
        log_scale += s.ln();
        out.push(record(n, &cur, log_scale));
    }
    out
}

/// Monte Carlo E[BₙBₙᵀ] from dense products, n = 0..=n_max, averaged in log scale.
///
/// Also returns the first trial's sample path of log‖BₙBₙᵀ‖.
pub fn dense_product_moments(
    m: &CovModel,
    eta: f64,
    n_max: usize,
    trials: usize,
    base_seed: u64,
    family: Family,
) -> Result<(Vec<NormPoint>, Vec<NormPoint>)> {
    if trials == 0 {
        return Err(Error::EmptyInput);
    }
    let d = m.dim();
    let v1 = m.v1();
    let mut acc: Vec<(f64, DMatrix<f64>)> = vec![(f64::NEG_INFINITY, DMatrix::zeros(d, d)); n_max + 1];
    let mut sample_path = Vec::with_capacity(n_max + 1);
    for t in 0..trials {
        let seed = trial_seed(base_seed, t as u64);
        let mut stream = SampleStream::new(m, n_max, sub_seed(seed, tag::DATA), family);
        let mut b = DMatrix::<f64>::identity(d, d);
        let mut log_s = 0.0f64;
        let mut x = vec![0.0; d];
        for n in 0..=n_max {
            if n > 0 {
                stream.next_into(&mut x)?;
                let xv = nalgebra::DVector::from_column_slice(&x);
                let xtb = xv.transpose() * &b;
                b += (&xv * xtb) * eta;
                let s = b.amax();
                b /= s;
                log_s += s.ln();
            }
            let bbt = &b * b.transpose();
            let w = 2.0 * log_s;
            if t == 0 {
                sample_path.push(NormPoint {
                    n,
                    log_norm: w + spectral_norm_sym(&bbt).ln(),
                    log_v1: w + quad(&bbt, v1).ln(),
                });
            }
            let slot = &mut acc[n];
            if w > slot.0 {
                slot.1 *= (slot.0 - w).exp();
                slot.1 += &bbt;
                slot.0 = w;
            } else {
                slot.1 += bbt * (w - slot.0).exp();
            }
        }
    }
    let mean = acc
        .iter()
        .enumerate()
        .map(|(n, (ls, sum))| {
            let base = ls - (trials as f64).ln();
            NormPoint { n, log_norm: base + spectral_norm_sym(sum).ln(), log_v1: base + quad(sum, v1).ln() }
        })
        .collect();
    Ok((mean, sample_path))
}

/// log|eᵢᵀBₙu₀| for every i at n = 0, stride, 2·stride, … ≤ n_max on one data stream.
pub fn entrywise_log_path(
    m: &CovModel,
    eta: f64,
    u0: &[f64],
    n_max: usize,
    stride: usize,
    seed: u64,
    family: Family,
) -> Result<Vec<(usize, Vec<f64>)>> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be positive".into()));
    }
    let mut st = OjaState::new(u0, StepSize::constant(eta)?)?;
    let mut stream = SampleStream::new(m, n_max, sub_seed(seed, tag::DATA), family);
    let mut x = vec![0.0; m.dim()];
    let mut out = vec![(0, st.scores())];
    for n in 1..=n_max {
        stream.next_into(&mut x)?;
        st.step(&x)?;
        if n % stride == 0 {
            out.push((n, st.scores()));
        }
    }
    Ok(out)
}

/// log|eᵢᵀE[Bₙ]u₀| = log|eᵢᵀ(I + ηΣ)ⁿu₀| for every i, from the eigenpairs.
pub fn population_entrywise_log(m: &CovModel, eta: f64, u0: &[f64], n: usize) -> Result<Vec<f64>> {
    let d = m.dim();
    if u0.len() != d {
        return Err(Error::InvalidDims(format!("u0 has length {}, model dim {d}", u0.len())));
    }
    let nf = n as f64;
    let top = (eta * m.lambda1()).ln_1p();
    let mut rest = u0.to_vec();
    let mut y = vec![0.0; d];
    for (lam, v) in m.explicit_eigvals().iter().zip(m.explicit_eigvecs()) {
        let c: f64 = v.iter().zip(u0).map(|(a, b)| a * b).sum();
        let w = (nf * ((eta * lam).ln_1p() - top)).exp() * c;
        for i in 0..d {
            y[i] += w * v[i];
            rest[i] -= c * v[i];
        }
    }
    let wf = (nf * ((eta * m.floor()).ln_1p() - top)).exp();
    Ok(y.iter().zip(&rest).map(|(a, r)| (a + wf * r).abs().ln() + nf * top).collect())
}

// ---------------------------------------------------------------------------
// Entrywise tail frequencies

/// Monte Carlo frequencies for the entrywise tail events at step n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFrequencies {
    /// Per i ∉ S: fraction of trials with |rᵢ| > τₙ.
    pub out_support: Vec<(usize, f64)>,
    /// Per i ∈ S: fraction of trials with |rᵢ| ≤ τₙ among trials where G holds.
    pub in_support_given_g: Vec<(usize, f64)>,
    /// Fraction of trials where G = {|v₁ᵀu₀| ≥ δ/√e} holds.
    pub g_rate: f64,
    pub trials: usize,
}

impl TailFrequencies {
    pub fn max_out(&self) -> f64 {
        self.out_support.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

/// Estimate tail frequencies of rᵢ = eᵢᵀBₙu₀ with u₀ ~ N(0, I).
pub fn tail_frequencies(
    m: &CovModel,
    eta: f64,
    n: usize,
    delta: f64,
    trials: usize,
    base_seed: u64,
    family: Family,
) -> Result<TailFrequencies> {
    if trials == 0 {
        return Err(Error::EmptyInput);
    }
    let tb = tail_bounds(m, eta, n, delta, 1.0, 1.0)?;
    let d = m.dim();
    let g_cut = delta / std::f64::consts::E.sqrt();
    let runs: Vec<Result<(bool, Vec<f64>)>> = crate::trials::run_trials(trials, base_seed, |_, seed| {
        let u0 = gaussian_unit_init(d, sub_seed(seed, tag::INIT));
        let g = u0.iter().zip(m.v1()).map(|(a, b)| a * b).sum::<f64>().abs() >= g_cut;
        let mut stream = SampleStream::new(m, n, sub_seed(seed, tag::DATA), family);
        let st = crate::oja::run_oja(&mut stream, &u0, eta)?;
        Ok((g, st.scores()))
    });
    let runs: Vec<(bool, Vec<f64>)> = runs.into_iter().collect::<Result<_>>()?;
    let in_s: Vec<bool> = (0..d).map(|i| m.support().contains(&i)).collect();
    let g_count = runs.iter().filter(|r| r.0).count();
    let mut out_support = Vec::new();
    let mut in_support_given_g = Vec::new();
    for i in 0..d {
        if in_s[i] {
            let low = runs.iter().filter(|r| r.0 && r.1[i] <= tb.tau_n_log).count();
            in_support_given_g.push((i, if g_count == 0 { 0.0 } else { low as f64 / g_count as f64 }));
        } else {
            let high = runs.iter().filter(|r| r.1[i] > tb.tau_n_log).count();
            out_support.push((i, high as f64 / trials as f64));
        }
    }
    Ok(TailFrequencies { out_support, in_support_given_g, g_rate: g_count as f64 / trials as f64, trials })
}
