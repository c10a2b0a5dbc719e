//! Config file parsing and per-command resolution of defaults.
//!
//! A config file is TOML or JSON. Shared keys live at the top level; knobs
//! that only one command reads live in its own table. Every command resolves
//! the file into a fully populated struct, which is echoed as the output header.

use anyhow::{bail, Context, Result};
use oja_sparse::cov_models::ModelDescriptor;
use oja_sparse::oja::OptimalSchedule;
use oja_sparse::sampling::Family;
use oja_sparse::sparse_pca::Pipeline;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment_id: Option<String>,
    pub model: Option<ModelDescriptor>,
    pub n: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub k: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub pipelines: Option<Vec<Pipeline>>,
    pub eta_override: Option<f64>,
    pub schedule: Option<OptimalSchedule>,
    pub family: Option<Family>,
    pub concentration: Option<RawConcentration>,
    pub verify: Option<RawVerify>,
    pub boost: Option<RawBoost>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConcentration {
    pub stride: Option<usize>,
    pub u0_seed: Option<u64>,
    pub dense_model: Option<ModelDescriptor>,
    pub dense_n_max: Option<usize>,
    pub dense_trials: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVerify {
    pub fixtures: Option<Vec<Fixture>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBoost {
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub replications: Option<usize>,
}

/// Read a config file. `.json` is parsed as JSON, anything else as TOML.
pub fn load(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))
    } else {
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }
}

fn model_s(m: &ModelDescriptor) -> usize {
    match m {
        ModelDescriptor::SingleSpike { s, .. } | ModelDescriptor::Counterexample { s, .. } => *s,
        ModelDescriptor::MultiSpike { spikes, .. } => spikes.first().map_or(1, |sp| sp.indices.len()),
        ModelDescriptor::General { eigvecs, .. } => {
            eigvecs.first().map_or(1, |v| v.iter().filter(|x| **x != 0.0).count().max(1))
        }
    }
}

fn n_grid(raw: &RawConfig, default: Vec<usize>) -> Result<Vec<usize>> {
    match (raw.n, &raw.n_grid) {
        (Some(_), Some(_)) => bail!("set either `n` or `n_grid`, not both"),
        (Some(n), None) => Ok(vec![n]),
        (None, Some(g)) => Ok(g.clone()),
        (None, None) => Ok(default),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSettings {
    pub experiment_id: String,
    pub model: ModelDescriptor,
    pub n_grid: Vec<usize>,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub pipelines: Vec<Pipeline>,
    pub eta_override: Option<f64>,
    pub schedule: OptimalSchedule,
    pub family: Family,
}

impl CompareSettings {
    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let model = raw.model.clone().unwrap_or(ModelDescriptor::Counterexample { d: 250, s: 3 });
        Ok(CompareSettings {
            experiment_id: raw.experiment_id.clone().unwrap_or_else(|| "compare".into()),
            k: raw.k.unwrap_or_else(|| model_s(&model)),
            model,
            n_grid: n_grid(raw, vec![250])?,
            trials: raw.trials.unwrap_or(100),
            seed: raw.seed.unwrap_or(0),
            pipelines: raw.pipelines.clone().unwrap_or_else(|| Pipeline::ALL.to_vec()),
            eta_override: raw.eta_override,
            schedule: raw.schedule.unwrap_or_default(),
            family: raw.family.unwrap_or_default(),
        })
    }
}

/// Largest dimension the dense-product curves accept.
pub const DENSE_MAX_DIM: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationSettings {
    pub experiment_id: String,
    pub model: ModelDescriptor,
    pub n_max: usize,
    pub stride: usize,
    pub trials: usize,
    pub seed: u64,
    pub u0_seed: u64,
    pub eta_override: Option<f64>,
    pub family: Family,
    pub dense_model: ModelDescriptor,
    pub dense_n_max: usize,
    pub dense_trials: usize,
}

impl ConcentrationSettings {
    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let c = raw.concentration.clone().unwrap_or_default();
        let grid = n_grid(raw, vec![1000])?;
        let &[n_max] = grid.as_slice() else {
            bail!("concentration takes a single `n` (the last step), got {} values", grid.len());
        };
        Ok(ConcentrationSettings {
            experiment_id: raw.experiment_id.clone().unwrap_or_else(|| "concentration".into()),
            model: raw.model.clone().unwrap_or(ModelDescriptor::SingleSpike {
                d: 100,
                s: 5,
                nu: 3.0,
                support_values: None,
            }),
            n_max,
            stride: c.stride.unwrap_or(10),
            trials: raw.trials.unwrap_or(200),
            seed: raw.seed.unwrap_or(0),
            u0_seed: c.u0_seed.unwrap_or(99),
            eta_override: raw.eta_override,
            family: raw.family.unwrap_or_default(),
            dense_model: c.dense_model.unwrap_or(ModelDescriptor::SingleSpike {
                d: 16,
                s: 4,
                nu: 1.0,
                support_values: None,
            }),
            dense_n_max: c.dense_n_max.unwrap_or(300),
            dense_trials: c.dense_trials.unwrap_or(200),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    SecondMoment,
    FourthMoment,
    Tail,
}

/// One Monte Carlo check against a closed-form bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    pub check: Check,
    pub model: ModelDescriptor,
    pub n: usize,
    /// Defaults to the standard rate for n.
    pub eta: Option<f64>,
    #[serde(default = "default_fixture_trials")]
    pub trials: usize,
    /// Standard errors of slack for moment checks.
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_c_h")]
    pub c_h: f64,
    #[serde(default = "default_c_t")]
    pub c_t: f64,
}

fn default_fixture_trials() -> usize {
    2000
}
fn default_z() -> f64 {
    5.0
}
fn default_delta() -> f64 {
    0.5
}
fn default_c_h() -> f64 {
    1.5
}
fn default_c_t() -> f64 {
    1.0
}

fn fixture(name: &str, check: Check, model: ModelDescriptor, n: usize, eta: Option<f64>) -> Fixture {
    Fixture {
        name: name.into(),
        check,
        model,
        n,
        eta,
        trials: default_fixture_trials(),
        z: default_z(),
        delta: default_delta(),
        c_h: default_c_h(),
        c_t: default_c_t(),
    }
}

pub fn default_fixtures() -> Vec<Fixture> {
    let small = ModelDescriptor::SingleSpike { d: 8, s: 2, nu: 0.25, support_values: None };
    vec![
        fixture("second_moment_d8", Check::SecondMoment, small.clone(), 200, Some(0.004)),
        fixture("fourth_moment_d8", Check::FourthMoment, small, 100, Some(5e-4)),
        fixture(
            "tail_d16",
            Check::Tail,
            ModelDescriptor::SingleSpike { d: 16, s: 4, nu: 3.0, support_values: None },
            2000,
            None,
        ),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySettings {
    pub seed: u64,
    pub family: Family,
    pub fixtures: Vec<Fixture>,
}

impl VerifySettings {
    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let fixtures = raw.verify.as_ref().and_then(|v| v.fixtures.clone()).unwrap_or_else(default_fixtures);
        if fixtures.is_empty() {
            bail!("verify.fixtures is empty");
        }
        Ok(VerifySettings { seed: raw.seed.unwrap_or(0), family: raw.family.unwrap_or_default(), fixtures })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoostSettings {
    pub experiment_id: String,
    pub model: ModelDescriptor,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub replications: usize,
    pub seed: u64,
    pub eta_override: Option<f64>,
    pub family: Family,
}

impl BoostSettings {
    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let b = raw.boost.clone().unwrap_or_default();
        let model =
            raw.model.clone().unwrap_or(ModelDescriptor::SingleSpike { d: 50, s: 3, nu: 3.0, support_values: None });
        let grid = n_grid(raw, vec![35_000])?;
        let &[n] = grid.as_slice() else {
            bail!("boost-demo takes a single `n`, got {} values", grid.len());
        };
        Ok(BoostSettings {
            experiment_id: raw.experiment_id.clone().unwrap_or_else(|| "boost_demo".into()),
            k: raw.k.unwrap_or_else(|| model_s(&model)),
            model,
            n,
            delta: b.delta.unwrap_or(0.1),
            epsilon: b.epsilon.unwrap_or(0.0),
            replications: b.replications.or(raw.trials).unwrap_or(300),
            seed: raw.seed.unwrap_or(0),
            eta_override: raw.eta_override,
            family: raw.family.unwrap_or_default(),
        })
    }
}

/// Render resolved settings as `# `-prefixed TOML lines.
pub fn header<T: Serialize>(command: &str, settings: &T) -> String {
    let body = toml::to_string(settings).unwrap_or_else(|e| format!("unrenderable settings: {e}"));
    let mut out = format!("# oja-sparse {command}: resolved configuration\n");
    for line in body.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}
