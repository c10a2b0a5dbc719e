//! Seeded Monte Carlo trial runner.
//!
//! Trial t always gets `trial_seed(base, t)` and results come back ordered by
//! t, so output does not depend on scheduling or thread count. With the
//! `parallel` feature trials run on the current rayon pool.

use crate::rng::trial_seed;

/// Run `f(t, seed_t)` for t in 0..trials and collect in trial order.
#[cfg(feature = "parallel")]
pub fn run_trials<T, F>(trials: usize, base_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..trials).into_par_iter().map(|t| f(t, trial_seed(base_seed, t as u64))).collect()
}

/// Run `f(t, seed_t)` for t in 0..trials and collect in trial order.
#[cfg(not(feature = "parallel"))]
pub fn run_trials<T, F>(trials: usize, base_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    run_trials_sequential(trials, base_seed, f)
}

/// Single-threaded reference with identical seeding.
pub fn run_trials_sequential<T, F>(trials: usize, base_seed: u64, f: F) -> Vec<T>
where
    F: Fn(usize, u64) -> T,
{
    (0..trials).map(|t| f(t, trial_seed(base_seed, t as u64))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_seeds_match() {
        let f = |t: usize, s: u64| (t, s);
        assert_eq!(run_trials(64, 7, f), run_trials_sequential(64, 7, f));
        assert!(run_trials(0, 7, f).is_empty());
    }
}
