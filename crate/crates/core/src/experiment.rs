//! Multi-pipeline comparison driver shared by the CLI and the test suites.

use crate::cov_models::CovModel;
use crate::error::{Error, Result};
use crate::oja::{default_learning_rate, OptimalSchedule};
use crate::report::{aggregate, success_rate, CompareRow};
use crate::rng::{sub_seed, tag};
use crate::sampling::{Family, SampleStream};
use crate::sparse_pca::{run_pipeline, Pipeline, PipelineConfig, SparsePcaResult};
use crate::support::top_k_indices;
use crate::trials::run_trials;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub experiment_id: String,
    pub n_grid: Vec<usize>,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub pipelines: Vec<Pipeline>,
    /// Constant rate for every n; otherwise the default rate for each n.
    pub eta_override: Option<f64>,
    pub schedule: OptimalSchedule,
    pub family: Family,
    pub timing: bool,
}

/// Whether S ⊆ Ŝ. Plain Oja keeps every coordinate, so its Ŝ is the top k of |v̂|.
pub fn recovered(r: &SparsePcaResult, model: &CovModel, k: usize) -> bool {
    let est = match r.pipeline {
        Pipeline::PlainOja => top_k_indices(&r.v_hat.iter().map(|x| x.abs()).collect::<Vec<_>>(), k.min(r.v_hat.len())),
        _ => r.support.indices.clone(),
    };
    model.support().iter().all(|i| est.binary_search(i).is_ok())
}

/// Run all pipelines on shared per-trial streams for each n, one row per (pipeline, n).
///
/// Trial t at size n draws its data from `sub_seed(trial_seed(seed, t), DATA)`,
/// so every pipeline sees the same samples.
pub fn compare(model: &CovModel, cfg: &CompareConfig) -> Result<Vec<CompareRow>> {
    if cfg.trials == 0 || cfg.n_grid.is_empty() || cfg.pipelines.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let eta = match cfg.eta_override {
            Some(e) => e,
            None => default_learning_rate(n as f64, model.gap())?,
        };
        let pcfg = PipelineConfig { k: cfg.k, eta, schedule: cfg.schedule };
        let per_trial: Vec<Result<Vec<(SparsePcaResult, f64)>>> = run_trials(cfg.trials, cfg.seed, |_, seed| {
            cfg.pipelines
                .iter()
                .map(|&p| {
                    let mut data = SampleStream::new(model, n, sub_seed(seed, tag::DATA), cfg.family);
                    let t0 = Instant::now();
                    let r = run_pipeline(p, &mut data, model, &pcfg, seed)?;
                    Ok((r, t0.elapsed().as_secs_f64() * 1e3))
                })
                .collect()
        });
        let per_trial: Vec<Vec<(SparsePcaResult, f64)>> = per_trial.into_iter().collect::<Result<_>>()?;
        for (j, &p) in cfg.pipelines.iter().enumerate() {
            let sin2: Vec<f64> = per_trial.iter().map(|t| t[j].0.sin2).collect();
            let rec: Vec<bool> = per_trial.iter().map(|t| recovered(&t[j].0, model, cfg.k)).collect();
            let summary = aggregate(&sin2)?;
            let wall = cfg.timing.then(|| {
                let times: Vec<f64> = per_trial.iter().map(|t| t[j].1).collect();
                aggregate(&times).map(|s| s.median).unwrap_or(f64::NAN)
            });
            rows.push(CompareRow {
                experiment_id: cfg.experiment_id.clone(),
                pipeline: p.name().to_string(),
                n,
                d: model.dim(),
                s: model.s(),
                k: cfg.k,
                seed_base: cfg.seed,
                trials: cfg.trials,
                sin2_median: summary.median,
                sin2_q10: summary.q10,
                sin2_q90: summary.q90,
                support_recovery_rate: success_rate(&rec)?,
                wall_time_ms: wall,
            });
        }
    }
    Ok(rows)
}
