//! Probability boosting by geometric aggregation.
//!
//! An estimator that is ε-accurate with constant probability is run on S
//! disjoint buckets of the stream. The output is the first bucket estimate
//! whose 2ε-ball holds at least 40% of all estimates.

use crate::error::{Error, Result};
use crate::sampling::{SampleSource, Take};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    SetIndicator,
    ProjectorFrobenius,
    Absolute,
}

/// Distance on the estimator's output space.
pub trait Metric<T: ?Sized> {
    fn kind(&self) -> MetricKind;
    fn distance(&self, a: &T, b: &T) -> f64;
}

/// ρ(A, B) = 1 if A ≠ B as sets, else 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct SetIndicator;

/// ρ(u, v) = ‖uuᵀ − vvᵀ‖_F, from the inner product alone.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProjectorFrobenius;

pub fn set_indicator_distance(a: &[usize], b: &[usize]) -> f64 {
    let norm = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    if norm(a) == norm(b) {
        0.0
    } else {
        1.0
    }
}

/// √(2 − 2(uᵀv)²) = √2·|sin(u, v)| for unit `u`, `v`.
pub fn projector_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    for w in [u, v] {
        let r = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (r - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnit(r));
        }
    }
    Ok(projector_distance_unchecked(u, v))
}

// For unit u, v: 2 − 2(uᵀv)² = 2‖u − (uᵀv)v‖². The residual form keeps
// accuracy when u ≈ ±v.
fn projector_distance_unchecked(u: &[f64], v: &[f64]) -> f64 {
    if u == v {
        return 0.0;
    }
    let c: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let r2: f64 = u.iter().zip(v).map(|(a, b)| (a - c * b).powi(2)).sum();
    (2.0 * r2).sqrt()
}

impl Metric<[usize]> for SetIndicator {
    fn kind(&self) -> MetricKind {
        MetricKind::SetIndicator
    }

    fn distance(&self, a: &[usize], b: &[usize]) -> f64 {
        set_indicator_distance(a, b)
    }
}

impl Metric<Vec<usize>> for SetIndicator {
    fn kind(&self) -> MetricKind {
        MetricKind::SetIndicator
    }

    fn distance(&self, a: &Vec<usize>, b: &Vec<usize>) -> f64 {
        set_indicator_distance(a, b)
    }
}

impl Metric<[f64]> for ProjectorFrobenius {
    fn kind(&self) -> MetricKind {
        MetricKind::ProjectorFrobenius
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        projector_distance_unchecked(a, b)
    }
}

impl Metric<Vec<f64>> for ProjectorFrobenius {
    fn kind(&self) -> MetricKind {
        MetricKind::ProjectorFrobenius
    }

    fn distance(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        projector_distance_unchecked(a, b)
    }
}

/// Scalars under |a − b|. Handy for synthetic oracles.
#[derive(Debug, Clone, Copy, Default)]
pub struct Absolute;

impl Metric<f64> for Absolute {
    fn kind(&self) -> MetricKind {
        MetricKind::Absolute
    }

    fn distance(&self, a: &f64, b: &f64) -> f64 {
        (a - b).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub delta: f64,
    pub epsilon: f64,
    #[serde(default = "default_bucket_constant")]
    pub bucket_constant: f64,
    #[serde(default = "default_cluster_fraction")]
    pub cluster_fraction: f64,
    #[serde(default = "default_radius_mult")]
    pub cluster_radius_mult: f64,
}

fn default_bucket_constant() -> f64 {
    30.0
}
fn default_cluster_fraction() -> f64 {
    0.4
}
fn default_radius_mult() -> f64 {
    2.0
}

impl BoostConfig {
    pub fn new(delta: f64, epsilon: f64) -> Self {
        BoostConfig {
            delta,
            epsilon,
            bucket_constant: default_bucket_constant(),
            cluster_fraction: default_cluster_fraction(),
            cluster_radius_mult: default_radius_mult(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(self.epsilon >= 0.0) || !(self.bucket_constant > 0.0) || !(self.cluster_radius_mult >= 0.0) {
            return Err(Error::InvalidParameter(
                "epsilon, bucket_constant and radius multiplier must be nonnegative".into(),
            ));
        }
        if !(self.cluster_fraction > 0.0 && self.cluster_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cluster_fraction must lie in (0,1], got {}",
                self.cluster_fraction
            )));
        }
        Ok(())
    }

    /// S = ⌈bucket_constant·ln(1/δ)⌉, at least 1.
    pub fn buckets(&self) -> usize {
        ((self.bucket_constant * (1.0 / self.delta).ln()).ceil() as usize).max(1)
    }

    /// B = ⌊n/S⌋.
    pub fn bucket_size(&self, n: usize) -> usize {
        n / self.buckets()
    }
}

/// Result of aggregation. `Bottom` means no estimate gathered a large enough cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoostOutcome<T> {
    Selected { item: T, index: usize, cluster_size: usize },
    Bottom,
}

impl<T> BoostOutcome<T> {
    pub fn item(&self) -> Option<&T> {
        match self {
            BoostOutcome::Selected { item, .. } => Some(item),
            BoostOutcome::Bottom => None,
        }
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, BoostOutcome::Bottom)
    }
}

/// Pick the first item whose radius-2ε cluster holds at least the configured fraction.
pub fn geometric_aggregate<T: Clone, M: Metric<T>>(items: &[T], cfg: &BoostConfig, metric: &M) -> BoostOutcome<T> {
    let s = items.len();
    if s == 0 {
        return BoostOutcome::Bottom;
    }
    let radius = cfg.cluster_radius_mult * cfg.epsilon;
    let mut within = vec![false; s * s];
    for a in 0..s {
        within[a * s + a] = true;
        for b in a + 1..s {
            let close = metric.distance(&items[a], &items[b]) <= radius;
            within[a * s + b] = close;
            within[b * s + a] = close;
        }
    }
    for t in 0..s {
        let size = within[t * s..(t + 1) * s].iter().filter(|&&c| c).count();
        if size as f64 / s as f64 >= cfg.cluster_fraction {
            return BoostOutcome::Selected { item: items[t].clone(), index: t, cluster_size: size };
        }
    }
    BoostOutcome::Bottom
}

/// Run `oracle` on S disjoint consecutive buckets of B samples, then aggregate.
///
/// The oracle gets the bucket view and its index and must consume all B
/// samples. Samples beyond S·B are left in the stream.
pub fn success_boost<S, T, M, F>(data: &mut S, cfg: &BoostConfig, metric: &M, mut oracle: F) -> Result<BoostOutcome<T>>
where
    S: SampleSource,
    T: Clone,
    M: Metric<T>,
    F: FnMut(&mut Take<'_, S>, usize) -> Result<T>,
{
    cfg.validate()?;
    let n = data.remaining();
    let buckets = cfg.buckets();
    if n < buckets {
        return Err(Error::InsufficientData { needed: buckets, have: n });
    }
    let b = cfg.bucket_size(n);
    let mut items = Vec::with_capacity(buckets);
    for t in 0..buckets {
        let mut bucket = data.take(b)?;
        items.push(oracle(&mut bucket, t)?);
        if bucket.remaining() != 0 {
            return Err(Error::InvalidParameter(format!(
                "oracle left {} of {b} bucket samples unread",
                bucket.remaining()
            )));
        }
    }
    Ok(geometric_aggregate(&items, cfg, metric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Replay;

    fn drain<S: SampleSource>(s: &mut S) -> Result<()> {
        let mut x = vec![0.0; s.dim()];
        while s.remaining() > 0 {
            s.next_into(&mut x)?;
        }
        Ok(())
    }

    #[test]
    fn bucket_counts() {
        let cfg = BoostConfig::new(0.05, 0.1);
        assert_eq!(cfg.buckets(), 90);
        assert_eq!(cfg.bucket_size(1000), 11);
        assert_eq!(BoostConfig::new(0.99, 0.0).buckets(), 1);
    }

    #[test]
    fn constant_oracle() {
        let data = vec![vec![0.0]; 200];
        let cfg = BoostConfig::new(0.1, 0.0);
        let out = success_boost(&mut Replay::new(&data), &cfg, &SetIndicator, |b, _| {
            drain(b)?;
            Ok(vec![3usize, 1])
        })
        .unwrap();
        assert_eq!(out, BoostOutcome::Selected { item: vec![3, 1], index: 0, cluster_size: cfg.buckets() });
    }

    #[test]
    fn scattered_is_bottom() {
        let data = vec![vec![0.0]; 200];
        let cfg = BoostConfig::new(0.1, 0.1);
        let out = success_boost(&mut Replay::new(&data), &cfg, &Absolute, |b, t| {
            drain(b)?;
            Ok(t as f64)
        })
        .unwrap();
        assert!(out.is_bottom());
    }

    #[test]
    fn insufficient() {
        let data = vec![vec![0.0]; 10];
        let r = success_boost(&mut Replay::new(&data), &BoostConfig::new(0.1, 0.1), &Absolute, |b, _| {
            drain(b)?;
            Ok(0.0)
        });
        assert!(matches!(r, Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn distances() {
        assert_eq!(set_indicator_distance(&[1, 2], &[2, 1]), 0.0);
        assert_eq!(set_indicator_distance(&[1], &[2]), 1.0);
        assert_eq!(set_indicator_distance(&[], &[]), 0.0);
        let s = 2f64.sqrt();
        assert!((projector_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - s).abs() < 1e-15);
        assert!(projector_distance(&[0.6, 0.8], &[-0.6, -0.8]).unwrap() < 1e-15);
        assert!(projector_distance(&[2.0, 0.0], &[1.0, 0.0]).is_err());
    }
}
