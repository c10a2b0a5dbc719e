use oja_sparse::cov_models::{make_counterexample, make_single_spike, CovModel};
use oja_sparse::oja::{default_learning_rate, run_oja, OjaState, StepSize};
use oja_sparse::rng::{sub_seed, tag};
use oja_sparse::sampling::{gaussian_unit_init, Family, SampleStream};
use oja_sparse::support::*;
use oja_sparse::trials::run_trials;

fn full_oja(m: &CovModel, n: usize, eta: f64, seed: u64) -> OjaState {
    let mut s = SampleStream::new(m, n, sub_seed(seed, tag::DATA), Family::Gaussian);
    run_oja(&mut s, &gaussian_unit_init(m.dim(), sub_seed(seed, tag::INIT)), eta).unwrap()
}

#[test]
fn top_k_recovers_single_spike() {
    let m = make_single_spike(200, 5, 3.0, None).unwrap();
    let n = 5000;
    let eta = default_learning_rate(n as f64, m.gap()).unwrap();
    let hits = run_trials(200, 8, |_, seed| {
        let est = top_k_support(&full_oja(&m, n, eta, seed), 5).unwrap();
        est.indices == m.support()
    });
    let rate = hits.iter().filter(|&&h| h).count() as f64 / 200.0;
    assert!(rate >= 0.9, "{rate}");
}

#[test]
fn threshold_on_counterexample() {
    let (s, d) = (3, 120);
    let m = make_counterexample(s, d).unwrap();
    let n = 40_000;
    let eta = default_learning_rate(n as f64, m.gap()).unwrap();
    let s_hi = m.s_hi(n);
    let min_hi = s_hi.iter().map(|&i| m.v1()[i].abs()).fold(f64::INFINITY, f64::min);
    let lg = log_threshold(n, eta, m.lambda1(), min_hi, DEFAULT_DELTA).unwrap();
    let out = run_trials(200, 12, |_, seed| {
        let est = threshold_support(&full_oja(&m, n, eta, seed), lg);
        let met = support_metrics(&est, m.support(), &s_hi);
        (met.size, met.contains_s_hi)
    });
    let mean_size = out.iter().map(|o| o.0 as f64).sum::<f64>() / out.len() as f64;
    let contained = out.iter().filter(|o| o.1).count() as f64 / out.len() as f64;
    eprintln!("mean |S_hat|/s = {:.3}, S_hi contained in {:.3}", mean_size / s as f64, contained);
    assert!(mean_size <= 4.0 * s as f64, "{mean_size}");
    assert!(contained >= 0.75, "{contained}");
}

#[test]
fn log_threshold_example() {
    let n = 1000;
    let eta = default_learning_rate(n as f64, 1.0).unwrap();
    let lg = log_threshold(n, eta, 1.0, 1.0 / 3f64.sqrt(), 0.75).unwrap();
    let want = (0.75 / (2.0 * std::f64::consts::E).sqrt()).ln() - 0.5 * 3f64.ln() + 1000.0 * (1.0 + eta).ln();
    assert!((lg - want).abs() < 1e-10);
    assert!(log_threshold(n, eta, 1.0, 0.0, 0.75).is_err());
    let a = log_threshold(n, eta, 1.0, 0.3, 0.5).unwrap();
    let b = log_threshold(n + 1, eta, 1.0, 0.3, 0.5).unwrap();
    let c = log_threshold(n, eta, 1.0, 0.3, 0.7).unwrap();
    assert!(b > a && c > a);
}

#[test]
fn threshold_is_scale_invariant_and_monotone() {
    let m = make_single_spike(30, 3, 2.0, None).unwrap();
    let u0 = gaussian_unit_init(30, 4);
    let scaled: Vec<f64> = u0.iter().map(|x| 7.0 * x).collect();
    let mut a = SampleStream::new(&m, 500, 2, Family::Gaussian);
    let mut b = a.clone();
    let sa = run_oja(&mut a, &u0, 0.01).unwrap();
    let sb = run_oja(&mut b, &scaled, 0.01).unwrap();
    // Scores carry log‖u₀‖, so shifting γ by log 7 gives the same set.
    let lg = sa.scores()[0] - 0.5;
    let ea = threshold_support(&sa, lg);
    let eb = threshold_support(&sb, lg + 7f64.ln());
    assert_eq!(ea.indices, eb.indices);
    let mut prev = usize::MAX;
    for k in 0..20 {
        let e = threshold_support(&sa, lg - 3.0 + 0.5 * k as f64);
        assert!(e.len() <= prev);
        prev = e.len();
    }
    assert!(threshold_support(&sa, f64::NAN).is_empty());
}

#[test]
fn top_k_examples() {
    let st = OjaState::new(&[0.1, -0.7, 0.2, 0.68], StepSize::constant(0.1).unwrap()).unwrap();
    assert_eq!(top_k_support(&st, 2).unwrap().indices, vec![1, 3]);
    assert_eq!(top_k_support(&st, 4).unwrap().indices, vec![0, 1, 2, 3]);
    assert!(top_k_support(&st, 0).is_err() && top_k_support(&st, 5).is_err());
    assert_eq!(top_k_indices(&[1.0, 1.0, 1.0], 2), vec![0, 1]);
}

#[test]
fn metrics_on_decoy_set() {
    let m = make_counterexample(3, 30).unwrap();
    let est = SupportEstimate { indices: vec![3, 4, 5], params: SupportParams::Diagonal { s: 3 }, scores: vec![] };
    let met = support_metrics(&est, m.support(), m.support());
    assert_eq!((met.intersection, met.precision, met.recall), (0, 0.0, 0.0));
    assert!(!met.contains_s);
    let json = serde_json::to_value(&est).unwrap();
    assert_eq!(json["method"], "diagonal");
    assert_eq!(json["index_base"], 0);
}
