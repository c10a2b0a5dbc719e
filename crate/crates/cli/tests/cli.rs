use std::collections::HashMap;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oja-sparse"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn oja-sparse")
}

fn config(name: &str, body: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-configs");
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn out_dir(name: &str) -> PathBuf {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&p);
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Rows of a CSV file as header → value maps.
fn read_csv(path: &PathBuf) -> Vec<HashMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| headers.iter().zip(r.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

fn col(rows: &[HashMap<String, String>], key: &str) -> Vec<f64> {
    rows.iter().map(|r| r[key].parse().unwrap()).collect()
}

#[test]
fn zero_trials_is_a_config_error() {
    let cfg = config("zero.toml", "trials = 0\n");
    let o = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("empty input"));
}

#[test]
fn unknown_key_is_reported() {
    let cfg = config("typo.toml", "trails = 10\n");
    let o = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("trails"), "{}", stderr(&o));
}

#[test]
fn compare_is_deterministic() {
    let cfg = config(
        "det.toml",
        "n_grid = [400, 800]\ntrials = 12\nseed = 5\n[model]\nkind = \"single_spike\"\nd = 40\ns = 3\nnu = 2.0\n",
    );
    let c = cfg.to_str().unwrap();
    let a = run(&["compare", "--config", c]);
    let b = run(&["compare", "--config", c, "--threads", "1"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let (da, db) = (out_dir("det-a"), out_dir("det-b"));
    run(&["compare", "--config", c, "--out", da.to_str().unwrap()]);
    run(&["compare", "--config", c, "--out", db.to_str().unwrap()]);
    let fa = std::fs::read(da.join("compare.csv")).unwrap();
    assert_eq!(fa, std::fs::read(db.join("compare.csv")).unwrap());
    let rows = read_csv(&da.join("compare.csv"));
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r["wall_time_ms"].is_empty()));
}

#[test]
fn seed_flag_overrides_config() {
    let cfg = config("seed.toml", "trials = 4\nseed = 1\n[model]\nkind = \"single_spike\"\nd = 20\ns = 2\nnu = 2.0\n");
    let c = cfg.to_str().unwrap();
    let a = run(&["compare", "--config", c, "--seed", "2"]);
    let b = run(&["compare", "--config", c]);
    assert!(String::from_utf8_lossy(&a.stdout).contains("seed = 2"));
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn json_format_and_json_config() {
    let cfg =
        config("c.json", r#"{"trials": 3, "n": 300, "model": {"kind": "single_spike", "d": 12, "s": 2, "nu": 2.0}}"#);
    let o = run(&["compare", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["settings"]["trials"], 3);
    assert_eq!(v["tables"]["compare"].as_array().unwrap().len(), 4);
}

#[test]
fn compare_timing_fills_wall_time() {
    let cfg = config("timing.toml", "trials = 2\nn = 200\n[model]\nkind = \"single_spike\"\nd = 10\ns = 2\nnu = 2.0\n");
    let d = out_dir("timing");
    let o = run(&["compare", "--timing", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap(), "--plot"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = read_csv(&d.join("compare.csv"));
    assert!(rows.iter().all(|r| r["wall_time_ms"].parse::<f64>().unwrap() >= 0.0));
    assert!(d.join("compare.svg").exists() && d.join("resolved_config.toml").exists());
}

#[test]
fn counterexample_ordering_at_desk_scale() {
    let d = out_dir("fig1a");
    let o = run(&["compare", "--out", d.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = read_csv(&d.join("compare.csv"));
    let median = |p: &str| rows.iter().find(|r| r["pipeline"] == p).unwrap()["sin2_median"].parse::<f64>().unwrap();
    let (t, g) = (median("trunc_vec"), median("diag_thresh"));
    assert!(t < g, "trunc_vec median {t} vs diag_thresh median {g}");
}

#[test]
fn zero_rate_curves_are_constant() {
    let cfg = config(
        "eta0.toml",
        "eta_override = 0.0\nn = 200\ntrials = 5\n[concentration]\nstride = 20\ndense_n_max = 50\ndense_trials = 5\n",
    );
    let d = out_dir("eta0");
    let o = run(&["concentration", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let constant = |v: Vec<f64>| v.iter().all(|x| (x - v[0]).abs() < 1e-12);
    let e = read_csv(&d.join("entrywise.csv"));
    for k in ["in_support_median", "out_support_median", "out_support_q90", "population_in_support_median"] {
        assert!(constant(col(&e, k)), "{k}");
    }
    for f in ["dense_norm.csv", "dense_v1.csv"] {
        let t = read_csv(&d.join(f));
        for k in ["empirical_log_moment", "bound_log", "naive_bound_log"] {
            assert!(constant(col(&t, k)), "{f} {k}");
        }
    }
}

#[test]
fn dense_dimension_limit() {
    let cfg =
        config("big.toml", "[concentration]\ndense_model = { kind = \"single_spike\", d = 100, s = 2, nu = 1.0 }\n");
    let o = run(&["concentration", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("dim too large"));
}

#[test]
fn concentration_curves() {
    let d = out_dir("fig2");
    let o = run(&["concentration", "--out", d.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let norm = read_csv(&d.join("dense_norm.csv"));
    assert_eq!(norm.len(), 301);
    for r in &norm {
        let (e, b): (f64, f64) = (r["empirical_log_moment"].parse().unwrap(), r["naive_bound_log"].parse().unwrap());
        assert!(e <= b + 1e-9, "n={}: {e} > {b}", r["n"]);
    }
    // In-support slope against log(1 + ηλ₁) with λ₁ = 4, gap 3, n = 1000.
    let rows: Vec<_> = read_csv(&d.join("entrywise.csv"))
        .into_iter()
        .filter(|r| (500..=1000).contains(&r["n"].parse::<usize>().unwrap()))
        .collect();
    let xs = col(&rows, "n");
    let ys = col(&rows, "in_support_median");
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let eta = 3.0 * 1000f64.ln() / (1000.0 * 3.0);
    let want = (4.0 * eta).ln_1p();
    assert!((slope / want - 1.0).abs() <= 0.15, "{slope} vs {want}");
}

#[test]
fn verify_bounds_defaults_pass() {
    let o = run(&["verify-bounds"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("checks hold"));
}

#[test]
fn verify_bounds_errors() {
    let empty = config("empty.toml", "[verify]\nfixtures = []\n");
    let o = run(&["verify-bounds", "--config", empty.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let fixture = |check: &str, eta: &str, extra: &str| {
        format!(
            "[[verify.fixtures]]\nname = \"f\"\ncheck = \"{check}\"\nn = 100\neta = {eta}\ntrials = 200\n{extra}model = {{ kind = \"single_spike\", d = 8, s = 2, nu = 0.25 }}\n"
        )
    };
    let big = config("bigeta.toml", &fixture("second_moment", "0.5", ""));
    let o = run(&["verify-bounds", "--config", big.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("theta"), "{}", stderr(&o));
    let strict = config("strict.toml", &fixture("tail", "0.05", "c_t = 1e-9\n"));
    let o = run(&["verify-bounds", "--config", strict.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("n=100)"));
}

#[test]
fn boosted_recovery() {
    let d = out_dir("boost");
    let o = run(&["boost-demo", "--out", d.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = &read_csv(&d.join("boost_demo.csv"))[0];
    let per_bucket: f64 = r["per_bucket_success"].parse().unwrap();
    let fail: f64 = r["boosted_failure_rate"].parse().unwrap();
    assert!(per_bucket >= 0.9, "fixture per-bucket success {per_bucket}");
    assert!(fail <= 0.1 + 3.0 * (0.1f64 * 0.9 / 300.0).sqrt(), "{fail}");
}

#[test]
fn boost_single_bucket_and_short_stream() {
    let one = config("one.toml", "n = 600\n[boost]\ndelta = 0.97\nreplications = 5\n");
    let d = out_dir("boost-one");
    let o = run(&["boost-demo", "--config", one.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = &read_csv(&d.join("boost_demo.csv"))[0];
    assert_eq!((r["buckets"].as_str(), r["oracle_calls"].as_str(), r["bucket_size"].as_str()), ("1", "1", "600"));
    let short = config("short.toml", "n = 50\n");
    let o = run(&["boost-demo", "--config", short.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("insufficient data"));
}

#[test]
fn plot_requires_out() {
    let o = run(&["compare", "--plot"]);
    assert_eq!(code(&o), 2);
}
