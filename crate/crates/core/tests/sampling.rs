use oja_sparse::cov_models::make_single_spike;
use oja_sparse::sampling::{gaussian_unit_init, Family, SampleSource, SampleStream};
use oja_sparse::Error;

/// Entrywise check of the sample covariance against Σ, with standard errors
/// estimated from the same draws.
fn covariance_within_5se(family: Family) {
    let m = make_single_spike(8, 3, 2.0, None).unwrap();
    let n = 100_000;
    let sigma = m.dense();
    let mut s = SampleStream::new(&m, n, 21, family);
    let mut sum = vec![0.0; 64];
    let mut sum2 = vec![0.0; 64];
    let mut x = vec![0.0; 8];
    for _ in 0..n {
        s.next_into(&mut x).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let p = x[i] * x[j];
                sum[i * 8 + j] += p;
                sum2[i * 8 + j] += p * p;
            }
        }
    }
    for i in 0..8 {
        for j in 0..8 {
            let mean = sum[i * 8 + j] / n as f64;
            let var = sum2[i * 8 + j] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            assert!((mean - sigma[(i, j)]).abs() <= 5.0 * se, "{family:?} ({i},{j}): {mean} vs {}", sigma[(i, j)]);
        }
    }
}

#[test]
fn gaussian_covariance() {
    covariance_within_5se(Family::Gaussian);
}

#[test]
fn rademacher_covariance() {
    covariance_within_5se(Family::ScaledRademacher);
}

#[test]
fn exhausted_stream_errors() {
    let m = make_single_spike(3, 1, 1.0, None).unwrap();
    let mut s = SampleStream::new(&m, 1, 0, Family::Gaussian);
    s.next_sample().unwrap();
    assert_eq!(s.next_sample(), Err(Error::StreamExhausted(1)));
}

#[test]
fn init_projection_second_moment() {
    let m = make_single_spike(10, 3, 1.0, None).unwrap();
    let t = 10_000;
    let mean: f64 = (0..t)
        .map(|k| {
            let z = gaussian_unit_init(10, k);
            z.iter().zip(m.v1()).map(|(a, b)| a * b).sum::<f64>().powi(2)
        })
        .sum::<f64>()
        / t as f64;
    assert!((mean - 1.0).abs() <= 0.05, "{mean}");
    assert_eq!(gaussian_unit_init(3, 7), gaussian_unit_init(3, 7));
}

#[test]
fn init_anti_concentration() {
    // With A = v₁v₁ᵀ (trace 1): P(zᵀAz ≥ β) ≥ 1 − √(eβ).
    let m = make_single_spike(10, 3, 1.0, None).unwrap();
    let beta = 0.01;
    let t = 10_000;
    let hits = (0..t)
        .filter(|&k| {
            let z = gaussian_unit_init(10, 50_000 + k);
            z.iter().zip(m.v1()).map(|(a, b)| a * b).sum::<f64>().powi(2) >= beta
        })
        .count();
    let frac = hits as f64 / t as f64;
    assert!(frac >= 1.0 - (std::f64::consts::E * beta).sqrt(), "{frac}");
}

#[test]
fn lag_one_autocorrelation() {
    let m = make_single_spike(6, 2, 2.0, None).unwrap();
    let n = 100_000;
    let mut s = SampleStream::new(&m, n, 5, Family::Gaussian);
    let p: Vec<f64> = (0..n).map(|_| s.next_sample().unwrap().iter().zip(m.v1()).map(|(a, b)| a * b).sum()).collect();
    let mean = p.iter().sum::<f64>() / n as f64;
    let var = p.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    let cov = p.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>();
    assert!((cov / var).abs() <= 0.02, "{}", cov / var);
}
