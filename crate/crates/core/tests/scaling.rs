//! Finite-size checks of the cost growth: exact non-adaptive cost against
//! `n log2 n` and against the bisection cost.

use l0sense::bounds::exact_min_binary_cost;
use l0sense::matrices::bisection_plan;
use l0sense::sweep::{measurement_budget, min_binary_rows};

fn exact(n: u64, m: u64) -> f64 {
    exact_min_binary_cost(n, m).unwrap().lower_bound
}

const DIMS: [u64; 5] = [1 << 8, 1 << 10, 1 << 12, 1 << 14, 1 << 16];

#[test]
fn boundary_ratio() {
    for n in DIMS {
        let m = min_binary_rows(n);
        let ratio = exact(n, m) / (n as f64 * (n as f64).log2());
        assert!((0.30..=0.60).contains(&ratio), "n={n} ratio={ratio}");
    }
    assert_eq!(exact(256, 9), 842.0);
}

#[test]
fn growth_ratio_bounded_away_from_zero() {
    for t in [1.0, 2.0, 3.0] {
        for k in 8..=16 {
            let n = 1u64 << k;
            let m = measurement_budget(n, t).max(min_binary_rows(n));
            let ratio = exact(n, m) / (n as f64 * k as f64);
            assert!(ratio >= 0.05, "t={t} n={n} ratio={ratio}");
        }
    }
}

#[test]
fn separation_against_bisection() {
    for k in 8..=16u32 {
        let n = 1u64 << k;
        let bisection = bisection_plan(n as usize).unwrap().worst_case_cost();
        assert_eq!(bisection, n - 1);
        let ratio = exact(n, min_binary_rows(n)) / bisection as f64;
        assert!(ratio >= 0.3 * f64::from(k), "n={n} ratio={ratio}");
    }
}

#[test]
fn cost_shrinks_as_measurements_grow() {
    let n = 1u64 << 12;
    let mut prev = f64::INFINITY;
    for m in min_binary_rows(n)..=n {
        let c = exact(n, m);
        assert!(c <= prev);
        prev = c;
    }
    // with m = n the identity is optimal
    assert_eq!(prev, n as f64);
}
