//! Streaming Oja iteration with log-magnitude tracking.
//!
//! The state keeps the unit direction `u` and the accumulated
//! `b = Σₜ log‖yₜ‖`, never the unnormalized iterate, so
//! `exp(b + log‖u₀‖)·u = Bₜu₀` holds without overflow.

use crate::cov_models::{AssumptionReport, CovModel};
use crate::error::{Error, Result};
use crate::sampling::SampleSource;
use serde::{Deserialize, Serialize};

/// Dimension from which norms use compensated summation.
pub const COMPENSATED_NORM_DIM: usize = 100_000;

/// Step-size schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSize {
    Constant {
        eta: f64,
    },
    /// ηₜ = c0 / (gap·(t + t0)) for the t-th step (1-based).
    Harmonic {
        c0: f64,
        t0: f64,
        gap: f64,
    },
}

impl StepSize {
    pub fn constant(eta: f64) -> Result<Self> {
        let s = StepSize::Constant { eta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSize::Constant { eta } if eta.is_finite() && eta >= 0.0 => Ok(()),
            StepSize::Constant { eta } => {
                Err(Error::InvalidParameter(format!("learning rate must be finite and >= 0, got {eta}")))
            }
            StepSize::Harmonic { c0, t0, gap } => {
                if !(c0 > 0.0 && t0 > 0.0 && c0.is_finite() && t0.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "schedule needs c0 > 0 and t0 > 0, got c0={c0}, t0={t0}"
                    )));
                }
                if !(gap > 0.0) {
                    return Err(Error::InvalidGap(gap));
                }
                Ok(())
            }
        }
    }

    /// Learning rate of step `t` (1-based).
    #[inline]
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            StepSize::Constant { eta } => eta,
            StepSize::Harmonic { c0, t0, gap } => c0 / (gap * (t as f64 + t0)),
        }
    }
}

/// Parameters of the decreasing schedule used by [`optimal_oja`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalSchedule {
    pub c0: f64,
    pub t0: f64,
}

impl Default for OptimalSchedule {
    fn default() -> Self {
        OptimalSchedule { c0: 5.0, t0: 20.0 }
    }
}

/// O(d) streaming state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OjaState {
    u: Vec<f64>,
    log_mag: f64,
    init_log_norm: f64,
    steps: usize,
    schedule: StepSize,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    if v.len() < COMPENSATED_NORM_DIM {
        return dot(v, v).sqrt();
    }
    // Neumaier summation of the squares.
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in v {
        let term = x * x;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    (sum + comp).sqrt()
}

fn check_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFiniteInput(i)),
        None => Ok(()),
    }
}

impl OjaState {
    /// Start from `u0` (any nonzero finite vector).
    pub fn new(u0: &[f64], schedule: StepSize) -> Result<Self> {
        schedule.validate()?;
        if u0.is_empty() {
            return Err(Error::InvalidDims("initial vector is empty".into()));
        }
        check_finite(u0)?;
        let r = norm(u0);
        if r == 0.0 {
            return Err(Error::InvalidParameter("initial vector is zero".into()));
        }
        Ok(OjaState { u: u0.iter().map(|x| x / r).collect(), log_mag: 0.0, init_log_norm: r.ln(), steps: 0, schedule })
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    /// Current unit direction.
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn into_u(self) -> Vec<f64> {
        self.u
    }

    /// b = Σₜ log‖yₜ‖.
    pub fn log_mag(&self) -> f64 {
        self.log_mag
    }

    /// log‖u₀‖ of the raw initial vector.
    pub fn init_log_norm(&self) -> f64 {
        self.init_log_norm
    }

    /// log‖Bₜu₀‖.
    pub fn total_log_magnitude(&self) -> f64 {
        self.log_mag + self.init_log_norm
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn schedule(&self) -> StepSize {
        self.schedule
    }

    /// One update u ← (I + ηxxᵀ)u / ‖·‖.
    pub fn step(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.u.len() {
            return Err(Error::InvalidDims(format!("sample has dim {}, state has {}", x.len(), self.u.len())));
        }
        check_finite(x)?;
        let eta = self.schedule.at(self.steps + 1);
        let w = eta * dot(x, &self.u);
        self.u.iter_mut().zip(x).for_each(|(ui, xi)| *ui += w * xi);
        let r = norm(&self.u);
        self.u.iter_mut().for_each(|ui| *ui /= r);
        self.log_mag += r.ln();
        self.steps += 1;
        Ok(())
    }

    /// log|eᵢᵀBₜu₀| for every coordinate.
    pub fn scores(&self) -> Vec<f64> {
        let total = self.total_log_magnitude();
        self.u.iter().map(|x| x.abs().ln() + total).collect()
    }

    /// exp(b)·u·‖u₀‖ = Bₜu₀. Overflows for long runs; meant for small checks.
    pub fn unnormalized(&self) -> Vec<f64> {
        let s = self.total_log_magnitude().exp();
        self.u.iter().map(|x| s * x).collect()
    }
}

/// Functional form of [`OjaState::step`].
pub fn oja_step(state: &OjaState, x: &[f64]) -> Result<OjaState> {
    let mut next = state.clone();
    next.step(x)?;
    Ok(next)
}

/// Fold Oja updates over every remaining sample of `stream`.
pub fn run_schedule<S: SampleSource>(stream: &mut S, u0: &[f64], schedule: StepSize) -> Result<OjaState> {
    if u0.len() != stream.dim() {
        return Err(Error::InvalidDims(format!("init has dim {}, stream has {}", u0.len(), stream.dim())));
    }
    let mut state = OjaState::new(u0, schedule)?;
    let mut x = vec![0.0; stream.dim()];
    while stream.remaining() > 0 {
        stream.next_into(&mut x)?;
        state.step(&x)?;
    }
    Ok(state)
}

/// Constant-rate Oja over the whole stream.
pub fn run_oja<S: SampleSource>(stream: &mut S, u0: &[f64], eta: f64) -> Result<OjaState> {
    run_schedule(stream, u0, StepSize::constant(eta)?)
}

/// Oja with ηₜ = c0/(gap·(t + t0)).
pub fn optimal_oja<S: SampleSource>(
    stream: &mut S,
    u0: &[f64],
    gap: f64,
    schedule: OptimalSchedule,
) -> Result<OjaState> {
    let s = StepSize::Harmonic { c0: schedule.c0, t0: schedule.t0, gap };
    s.validate()?;
    run_schedule(stream, u0, s)
}

/// η = κ·ln(n)/(n·gap).
pub fn learning_rate(kappa: f64, n: f64, gap: f64) -> Result<f64> {
    if !(gap > 0.0) || !gap.is_finite() {
        return Err(Error::InvalidGap(gap));
    }
    if !(n >= 2.0) {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("need kappa > 0, got {kappa}")));
    }
    Ok(kappa * n.ln() / (n * gap))
}

/// η = 3·ln(n)/(n·gap).
pub fn default_learning_rate(n: f64, gap: f64) -> Result<f64> {
    learning_rate(3.0, n, gap)
}

/// One inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Claim {
    fn new(lhs: f64, rhs: f64) -> Self {
        Claim { lhs, rhs, holds: lhs <= rhs }
    }
}

/// Numeric evaluation of the learning-rate regularity claims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub n: usize,
    pub kappa: f64,
    pub eta: f64,
    /// C = 100(L⁴σ⁴ + L²σ²) + 16.
    pub big_c: f64,
    /// η ≤ gap/(C·λ₂·Tr Λ₂)
    pub claim1: Claim,
    /// C·η ≤ ¼·min{1/λ₁, 1/Tr Λ₂, 1/√(λ₁ Tr Λ₂)}
    pub claim2: Claim,
    /// C·η²·n·λ₁² ≤ ¼
    pub claim3: Claim,
    /// exp(−½·n·η·gap) ≤ η·λ₁
    pub claim4: Claim,
    /// Root of (1−θ)gap + 50L⁴σ⁴ηλ₁² = 50L⁴σ⁴ ln(n) ηλ₂ Tr Σ.
    pub theta_raw: f64,
    /// `theta_raw` when it lies in (0.5, 1).
    pub theta: Option<f64>,
    pub no_theta: bool,
    pub assumption: AssumptionReport,
}

impl RateReport {
    pub fn all_claims_hold(&self) -> bool {
        self.claim1.holds && self.claim2.holds && self.claim3.holds && self.claim4.holds
    }
}

/// Evaluate the four rate claims at η = κ ln(n)/(n·gap).
///
/// `l_sigma` is the product L·σ of the subgaussian constants; `c` feeds the
/// regularity inequalities in the attached [`AssumptionReport`].
pub fn check_rate_conditions(m: &CovModel, n: usize, kappa: f64, c: f64, l_sigma: f64) -> Result<RateReport> {
    let eta = learning_rate(kappa, n as f64, m.gap())?;
    let (l1, l2, gap, tr) = (m.lambda1(), m.lambda2(), m.gap(), m.trace());
    let tr2 = tr - l1;
    let k4 = l_sigma.powi(4);
    let big_c = 100.0 * (k4 + l_sigma.powi(2)) + 16.0;
    let nf = n as f64;
    let claim1 = Claim::new(eta, gap / (big_c * l2 * tr2));
    let claim2 = Claim::new(big_c * eta, 0.25 * (1.0 / l1).min(1.0 / tr2).min(1.0 / (l1 * tr2).sqrt()));
    let claim3 = Claim::new(big_c * eta * eta * nf * l1 * l1, 0.25);
    let claim4 = Claim::new((-0.5 * nf * eta * gap).exp(), eta * l1);
    let theta_raw = 1.0 - 50.0 * k4 * eta * (nf.ln() * l2 * tr - l1 * l1) / gap;
    let ok = theta_raw > 0.5 && theta_raw < 1.0;
    Ok(RateReport {
        n,
        kappa,
        eta,
        big_c,
        claim1,
        claim2,
        claim3,
        claim4,
        theta_raw,
        theta: ok.then_some(theta_raw),
        no_theta: !ok,
        assumption: m.assumption_report(n, c),
    })
}
