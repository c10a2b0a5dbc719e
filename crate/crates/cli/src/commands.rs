//! The four subcommands. Each returns tables for the emitter and leaves
//! exit-code policy to `main`.

use crate::config::{BoostSettings, Check, CompareSettings, ConcentrationSettings, VerifySettings, DENSE_MAX_DIM};
use crate::Failure;
use oja_sparse::boost::{success_boost, BoostConfig, SetIndicator};
use oja_sparse::bounds::{
    coordinate_moments, dense_product_moments, entrywise_log_path, fourth_moment_envelope, log_add_exp,
    naive_bound_log, population_entrywise_log, second_moment_envelope, tail_bounds, tail_frequencies, USpec,
};
use oja_sparse::cov_models::{CovModel, ModelDescriptor};
use oja_sparse::experiment::{compare, CompareConfig};
use oja_sparse::oja::{default_learning_rate, run_oja};
use oja_sparse::report::{aggregate, binomial_se, BoundRow, CompareRow, Series};
use oja_sparse::rng::{sub_seed, tag, trial_seed};
use oja_sparse::sampling::{gaussian_unit_init, SampleStream};
use oja_sparse::support::top_k_support;
use oja_sparse::trials::run_trials;
use oja_sparse::Error;
use serde::Serialize;

fn build(m: &ModelDescriptor) -> Result<CovModel, Failure> {
    m.build().map_err(|e| Failure::Config(anyhow::anyhow!("model: {e}")))
}

fn rate(eta_override: Option<f64>, n: usize, gap: f64) -> Result<f64, Failure> {
    match eta_override {
        Some(e) if e.is_finite() && e >= 0.0 => Ok(e),
        Some(e) => Err(Failure::Config(anyhow::anyhow!("eta_override must be finite and nonnegative, got {e}"))),
        None => Ok(default_learning_rate(n as f64, gap)?),
    }
}

pub struct CompareOutput {
    pub rows: Vec<CompareRow>,
    pub series: Vec<Series>,
}

pub fn cmd_compare(s: &CompareSettings, timing: bool) -> Result<CompareOutput, Failure> {
    let model = build(&s.model)?;
    if let Some(e) = s.eta_override {
        rate(Some(e), 1, model.gap())?;
    }
    let cfg = CompareConfig {
        experiment_id: s.experiment_id.clone(),
        n_grid: s.n_grid.clone(),
        k: s.k,
        trials: s.trials,
        seed: s.seed,
        pipelines: s.pipelines.clone(),
        eta_override: s.eta_override,
        schedule: s.schedule,
        family: s.family,
        timing,
    };
    let rows = compare(&model, &cfg)?;
    let series = s
        .pipelines
        .iter()
        .map(|p| Series {
            name: p.name().into(),
            points: rows.iter().filter(|r| r.pipeline == p.name()).map(|r| (r.n as f64, r.sin2_median)).collect(),
        })
        .collect();
    Ok(CompareOutput { rows, series })
}

/// Entrywise log-magnitude summary at one step.
#[derive(Debug, Clone, Serialize)]
pub struct EntrywiseRow {
    pub n: usize,
    pub in_support_median: f64,
    pub in_support_q10: f64,
    pub out_support_median: f64,
    pub out_support_q90: f64,
    /// Median over S of log|eᵢᵀ(I + ηΣ)ⁿu₀|.
    pub population_in_support_median: f64,
}

pub struct ConcentrationOutput {
    pub entrywise: Vec<EntrywiseRow>,
    pub norm: Vec<BoundRow>,
    pub v1: Vec<BoundRow>,
    pub notes: Vec<String>,
}

pub fn cmd_concentration(s: &ConcentrationSettings) -> Result<ConcentrationOutput, Failure> {
    let dense = build(&s.dense_model)?;
    if dense.dim() > DENSE_MAX_DIM {
        return Err(Failure::Config(anyhow::anyhow!(
            "dim too large: dense products need d ≤ {DENSE_MAX_DIM}, dense_model has d = {}",
            dense.dim()
        )));
    }
    if s.stride == 0 || s.trials == 0 || s.dense_trials == 0 {
        return Err(Failure::Config(anyhow::anyhow!("stride, trials and dense_trials must be positive")));
    }
    let model = build(&s.model)?;
    let mut notes = Vec::new();

    let eta = rate(s.eta_override, s.n_max, model.gap())?;
    let u0 = gaussian_unit_init(model.dim(), s.u0_seed);
    let paths =
        run_trials(s.trials, s.seed, |_, seed| entrywise_log_path(&model, eta, &u0, s.n_max, s.stride, seed, s.family))
            .into_iter()
            .collect::<Result<Vec<_>, Error>>()?;
    let support = model.support();
    let mut entrywise = Vec::with_capacity(paths[0].len());
    for k in 0..paths[0].len() {
        let n = paths[0][k].0;
        let (mut inside, mut outside) = (Vec::new(), Vec::new());
        for p in &paths {
            for (i, v) in p[k].1.iter().enumerate() {
                if support.contains(&i) {
                    inside.push(*v)
                } else {
                    outside.push(*v)
                }
            }
        }
        let pop = population_entrywise_log(&model, eta, &u0, n)?;
        let pop_in: Vec<f64> = support.iter().map(|&i| pop[i]).collect();
        let a = aggregate(&inside)?;
        let b = aggregate(&outside)?;
        entrywise.push(EntrywiseRow {
            n,
            in_support_median: a.median,
            in_support_q10: a.q10,
            out_support_median: b.median,
            out_support_q90: b.q90,
            population_in_support_median: aggregate(&pop_in)?.median,
        });
    }

    let eta_d = rate(s.eta_override, s.dense_n_max, dense.gap())?;
    let sigma = s.family.subgaussian_constant();
    let (mean, _) = dense_product_moments(&dense, eta_d, s.dense_n_max, s.dense_trials, s.seed, s.family)?;
    let d = dense.dim() as f64;
    let env = match second_moment_envelope(&dense, eta_d, 1.0, sigma, &USpec::Custom { alpha0: 1.0, beta0: d - 1.0 }) {
        Ok(e) => Some(e),
        Err(e @ Error::NoValidTheta(_)) => {
            notes.push(format!("envelope columns left empty: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let mut norm = Vec::with_capacity(mean.len());
    let mut v1 = Vec::with_capacity(mean.len());
    for p in &mean {
        let naive = naive_bound_log(&dense, eta_d, 1.0, sigma, p.n as u64);
        let nn = p.n as u64;
        norm.push(BoundRow {
            n: p.n,
            empirical_log_moment: p.log_norm,
            bound_log: env.map(|e| log_add_exp(e.alpha_log(nn), e.beta_log(nn))),
            naive_bound_log: naive,
        });
        v1.push(BoundRow {
            n: p.n,
            empirical_log_moment: p.log_v1,
            bound_log: env.map(|e| e.alpha_log(nn)),
            naive_bound_log: naive,
        });
    }
    Ok(ConcentrationOutput { entrywise, norm, v1, notes })
}

/// One comparison of a Monte Carlo estimate with its bound.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub fixture: String,
    pub check: Check,
    pub quantity: &'static str,
    pub i: usize,
    pub n: usize,
    /// "log" for moments, "probability" for tail frequencies.
    pub scale: &'static str,
    pub empirical: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn cmd_verify_bounds(s: &VerifySettings) -> Result<(Vec<VerifyRow>, Vec<String>), Failure> {
    let mut rows = Vec::new();
    let sigma = s.family.subgaussian_constant();
    for (fi, f) in s.fixtures.iter().enumerate() {
        let m = build(&f.model)?;
        let eta = rate(f.eta, f.n, m.gap())?;
        let seed = trial_seed(s.seed, fi as u64);
        let row = |quantity, i, scale, empirical, bound, holds| VerifyRow {
            fixture: f.name.clone(),
            check: f.check,
            quantity,
            i,
            n: f.n,
            scale,
            empirical,
            bound,
            holds,
        };
        match f.check {
            Check::SecondMoment | Check::FourthMoment => {
                let envs = (0..m.dim())
                    .map(|i| {
                        let u = USpec::Coordinate(i);
                        match f.check {
                            Check::SecondMoment => second_moment_envelope(&m, eta, 1.0, sigma, &u),
                            _ => fourth_moment_envelope(&m, eta, 1.0, sigma, &u),
                        }
                    })
                    .collect::<Result<Vec<_>, Error>>()
                    .map_err(|e| Failure::Config(anyhow::anyhow!("fixture {}: {e}", f.name)))?;
                let mc = coordinate_moments(&m, eta, f.n, f.trials, seed, s.family)?;
                let (alpha, beta) = match f.check {
                    Check::SecondMoment => (&mc.alpha, &mc.beta),
                    _ => (&mc.alpha4, &mc.beta4),
                };
                let n = f.n as u64;
                for (i, env) in envs.iter().enumerate() {
                    let (ba, bb) = (env.alpha_log(n), env.beta_log(n));
                    rows.push(row("alpha", i, "log", alpha[i].log_mean, ba, alpha[i].below(ba, f.z)));
                    rows.push(row("beta", i, "log", beta[i].log_mean, bb, beta[i].below(bb, f.z)));
                }
            }
            Check::Tail => {
                let tb = tail_bounds(&m, eta, f.n, f.delta, f.c_h, f.c_t)?;
                let fr = tail_frequencies(&m, eta, f.n, f.delta, f.trials, seed, s.family)?;
                let g = (fr.g_rate * f.trials as f64).max(1.0);
                let slack = |p: f64, k: f64| 3.0 * binomial_se(p.min(1.0), k as usize);
                for &(i, freq) in &fr.out_support {
                    let p = tb.p_out_support;
                    rows.push(row("p_out", i, "probability", freq, p, freq <= p + slack(p, f.trials as f64)));
                }
                for (&(i, freq), &(_, p)) in fr.in_support_given_g.iter().zip(&tb.p_in_support) {
                    rows.push(row("p_in_given_g", i, "probability", freq, p, freq <= p + slack(p, g)));
                }
            }
        }
    }
    let violations = rows
        .iter()
        .filter(|r| !r.holds)
        .map(|r| format!("{}: {} exceeds its bound at (i={}, n={})", r.fixture, r.quantity, r.i, r.n))
        .collect();
    Ok((rows, violations))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoostRow {
    pub experiment_id: String,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub k: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub buckets: usize,
    pub bucket_size: usize,
    pub eta: f64,
    pub replications: usize,
    pub per_bucket_success: f64,
    pub boosted_failure_rate: f64,
    pub boosted_failure_se: f64,
    pub bottom_rate: f64,
    pub oracle_calls: usize,
}

pub fn cmd_boost_demo(s: &BoostSettings) -> Result<BoostRow, Failure> {
    let model = build(&s.model)?;
    let cfg = BoostConfig::new(s.delta, s.epsilon);
    cfg.validate().map_err(|e| Failure::Config(e.into()))?;
    if s.replications == 0 {
        return Err(Error::EmptyInput.into());
    }
    let buckets = cfg.buckets();
    if s.n < buckets {
        return Err(Error::InsufficientData { needed: buckets, have: s.n }.into());
    }
    let b = cfg.bucket_size(s.n);
    let eta = rate(s.eta_override, b, model.gap())?;
    let d = model.dim();
    let truth = model.support().to_vec();
    let per_rep = run_trials(s.replications, s.seed, |_, seed| -> Result<(usize, usize, bool, bool), Error> {
        let mut data = SampleStream::new(&model, s.n, sub_seed(seed, tag::DATA), s.family);
        let (mut calls, mut good) = (0, 0);
        let out = success_boost(&mut data, &cfg, &SetIndicator, |bucket, t| {
            let u0 = gaussian_unit_init(d, sub_seed(trial_seed(seed, t as u64), tag::INIT));
            let st = run_oja(bucket, &u0, eta)?;
            let est = top_k_support(&st, s.k)?;
            calls += 1;
            good += usize::from(est.indices == truth);
            Ok(est.indices)
        })?;
        Ok((calls, good, out.item() == Some(&truth), out.is_bottom()))
    })
    .into_iter()
    .collect::<Result<Vec<_>, Error>>()?;
    let reps = per_rep.len() as f64;
    let calls: usize = per_rep.iter().map(|r| r.0).sum();
    let good: usize = per_rep.iter().map(|r| r.1).sum();
    let fail = per_rep.iter().filter(|r| !r.2).count() as f64 / reps;
    Ok(BoostRow {
        experiment_id: s.experiment_id.clone(),
        n: s.n,
        d,
        s: model.s(),
        k: s.k,
        delta: s.delta,
        epsilon: s.epsilon,
        buckets,
        bucket_size: b,
        eta,
        replications: s.replications,
        per_bucket_success: good as f64 / calls as f64,
        boosted_failure_rate: fail,
        boosted_failure_se: binomial_se(fail, s.replications),
        bottom_rate: per_rep.iter().filter(|r| r.3).count() as f64 / reps,
        oracle_calls: calls / s.replications,
    })
}
