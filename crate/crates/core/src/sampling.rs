//! Seeded single-pass sample streams.
//!
//! A [`SampleStream`] draws X = Σᵢ √(λᵢ − c)·ξᵢ·vᵢ + √c·z over the stored
//! eigenpairs of a [`CovModel`], where ξ and z are i.i.d. standard normal or
//! uniform ±1. Only `next_into` exists: no code path materializes the n×d
//! data matrix.

use crate::cov_models::CovModel;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    Gaussian,
    ScaledRademacher,
}

impl Family {
    /// Subgaussian constant L·σ of the driving variables (both are 1-subgaussian).
    pub fn subgaussian_constant(self) -> f64 {
        1.0
    }

    #[inline]
    fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Family::Gaussian => rng.sample(StandardNormal),
            Family::ScaledRademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// A finite, single-pass source of d-dimensional samples.
pub trait SampleSource {
    fn dim(&self) -> usize;

    fn remaining(&self) -> usize;

    /// Write the next sample into `out` (length `dim()`).
    fn next_into(&mut self, out: &mut [f64]) -> Result<()>;

    fn next_sample(&mut self) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.next_into(&mut out)?;
        Ok(out)
    }

    /// View of the next `n` samples; errors if fewer remain.
    fn take(&mut self, n: usize) -> Result<Take<'_, Self>>
    where
        Self: Sized,
    {
        if n > self.remaining() {
            return Err(Error::InsufficientData { needed: n, have: self.remaining() });
        }
        Ok(Take { inner: self, left: n })
    }
}

/// Seeded i.i.d. stream from a model.
#[derive(Debug, Clone)]
pub struct SampleStream<'a> {
    model: &'a CovModel,
    family: Family,
    seed: u64,
    n: usize,
    cursor: usize,
    rng: ChaCha8Rng,
    floor_scale: f64,
    spike_scales: Vec<f64>,
}

impl<'a> SampleStream<'a> {
    pub fn new(model: &'a CovModel, n: usize, seed: u64, family: Family) -> Self {
        let floor = model.floor();
        let spike_scales = model.explicit_eigvals().iter().map(|l| (l - floor).max(0.0).sqrt()).collect();
        SampleStream {
            model,
            family,
            seed,
            n,
            cursor: 0,
            rng: rng_from_seed(seed),
            floor_scale: floor.sqrt(),
            spike_scales,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of samples emitted so far.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn model(&self) -> &CovModel {
        self.model
    }
}

impl SampleSource for SampleStream<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn remaining(&self) -> usize {
        self.n - self.cursor
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<()> {
        if self.cursor >= self.n {
            return Err(Error::StreamExhausted(self.n));
        }
        debug_assert_eq!(out.len(), self.model.dim());
        if self.floor_scale > 0.0 {
            for o in out.iter_mut() {
                *o = self.floor_scale * self.family.draw(&mut self.rng);
            }
        } else {
            out.iter_mut().for_each(|o| *o = 0.0);
        }
        for (scale, v) in self.spike_scales.iter().zip(self.model.explicit_eigvecs()) {
            let xi = self.family.draw(&mut self.rng);
            let w = scale * xi;
            if w != 0.0 {
                out.iter_mut().zip(v).for_each(|(o, vi)| *o += w * vi);
            }
        }
        self.cursor += 1;
        Ok(())
    }
}

/// The next `left` samples of an underlying source.
#[derive(Debug)]
pub struct Take<'s, S: SampleSource> {
    inner: &'s mut S,
    left: usize,
}

impl<S: SampleSource> SampleSource for Take<'_, S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn remaining(&self) -> usize {
        self.left.min(self.inner.remaining())
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<()> {
        if self.left == 0 {
            return Err(Error::StreamExhausted(0));
        }
        self.inner.next_into(out)?;
        self.left -= 1;
        Ok(())
    }
}

/// Samples of an underlying source restricted to a coordinate subset.
#[derive(Debug)]
pub struct Restricted<'s, S: SampleSource> {
    inner: &'s mut S,
    idx: Vec<usize>,
    buf: Vec<f64>,
}

impl<'s, S: SampleSource> Restricted<'s, S> {
    pub fn new(inner: &'s mut S, idx: &[usize]) -> Self {
        let d = inner.dim();
        Restricted { inner, idx: idx.to_vec(), buf: vec![0.0; d] }
    }
}

impl<S: SampleSource> SampleSource for Restricted<'_, S> {
    fn dim(&self) -> usize {
        self.idx.len()
    }

    fn remaining(&self) -> usize {
        self.inner.remaining()
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<()> {
        self.inner.next_into(&mut self.buf)?;
        for (o, &i) in out.iter_mut().zip(&self.idx) {
            *o = self.buf[i];
        }
        Ok(())
    }
}

/// Replays recorded samples. Used by dense oracles and equivariance checks.
#[derive(Debug, Clone)]
pub struct Replay<'a> {
    data: &'a [Vec<f64>],
    pos: usize,
}

impl<'a> Replay<'a> {
    pub fn new(data: &'a [Vec<f64>]) -> Self {
        Replay { data, pos: 0 }
    }
}

impl SampleSource for Replay<'_> {
    fn dim(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<()> {
        let x = self.data.get(self.pos).ok_or(Error::StreamExhausted(self.data.len()))?;
        out.copy_from_slice(x);
        self.pos += 1;
        Ok(())
    }
}

/// Draw z ~ N(0, I_d), deterministic per seed. Not normalized.
pub fn gaussian_unit_init(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cov_models::{make_general, make_single_spike};

    #[test]
    fn zero_variance_direction() {
        let m = make_general(vec![1.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mut s = SampleStream::new(&m, 100, 3, Family::Gaussian);
        while s.remaining() > 0 {
            assert_eq!(s.next_sample().unwrap()[1], 0.0);
        }
        assert_eq!(s.next_sample(), Err(Error::StreamExhausted(100)));
    }

    #[test]
    fn replay_is_deterministic() {
        let m = make_single_spike(5, 2, 1.0, None).unwrap();
        for fam in [Family::Gaussian, Family::ScaledRademacher] {
            let a = SampleStream::new(&m, 3, 11, fam).next_sample().unwrap();
            let b = SampleStream::new(&m, 3, 11, fam).next_sample().unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(gaussian_unit_init(3, 7), gaussian_unit_init(3, 7));
    }

    #[test]
    fn one_dim_variance() {
        let m = make_general(vec![4.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mut s = SampleStream::new(&m, 100_000, 5, Family::Gaussian);
        let mut acc = 0.0;
        while s.remaining() > 0 {
            let x = s.next_sample().unwrap();
            acc += x[0] * x[0];
        }
        let var = acc / 1e5;
        assert!((3.8..=4.2).contains(&var), "variance {var}");
    }

    #[test]
    fn take_and_restrict() {
        let m = make_single_spike(6, 2, 1.0, None).unwrap();
        let mut s = SampleStream::new(&m, 10, 1, Family::Gaussian);
        let full = SampleStream::new(&m, 10, 1, Family::Gaussian).next_sample().unwrap();
        {
            let mut t = s.take(4).unwrap();
            let mut r = Restricted::new(&mut t, &[1, 4]);
            assert_eq!(r.dim(), 2);
            assert_eq!(r.next_sample().unwrap(), vec![full[1], full[4]]);
        }
        assert_eq!(s.cursor(), 1);
        assert!(s.take(20).is_err());
    }
}
