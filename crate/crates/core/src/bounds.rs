//! Lower bounds on the l0 cost of non-adaptive one-sparse recovery,
//! evaluated exactly at finite `(n, m)`.
//!
//! Every bound here has the same shape: columns are sorted into weight
//! classes with a per-class capacity, the cheapest allocation fills the
//! classes in ascending weight, and `r0` is the last class filled completely.

use itertools::Itertools;

use crate::channel::separation_distance;
use crate::matrices::{binary_feasible, grid_capacity};
use crate::numkit::{
    binomial, binomial_prefix_until, log_binomial, q_function, EXACT_BINOMIAL_CAP,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    BinaryNoiseless,
    RealNoisy,
    HigherM,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::BinaryNoiseless => "binary-noiseless",
            Regime::RealNoisy => "real-noisy",
            Regime::HigherM => "higher-m",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub n: u64,
    pub m: u64,
    pub regime: Regime,
    pub r0: u64,
    /// `n` divided by the total capacity of weights `1..=max(r0, 1)`.
    pub c_m: f64,
    pub lower_bound: f64,
    /// The bound as an exact integer, when the formula is integral.
    pub exact_lower_bound: Option<u128>,
    /// `(weight, capacity)` for weights `1..=r0 + 1`.
    pub per_weight_capacity: Vec<(u64, f64)>,
    /// `(weight, columns)` of the cheapest allocation.
    pub per_weight_fill: Vec<(u64, f64)>,
    pub diagnostics: Vec<(String, String)>,
}

impl BoundReport {
    pub fn diagnostic(&self, key: &str) -> Option<&str> {
        self.diagnostics
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn push_diag(&mut self, key: &str, value: impl ToString) {
        self.diagnostics.push((key.to_string(), value.to_string()));
    }
}

fn log2_n(n: u64) -> f64 {
    (n as f64).log2()
}

/// Exact cost of the cheapest binary matrix with `n` distinct nonzero
/// columns of length `m`:
/// `sum_{l<=r0} C(m,l) l + (n - sum_{l<=r0} C(m,l)) (r0 + 1)`.
pub fn exact_min_binary_cost(n: u64, m: u64) -> Result<BoundReport> {
    if n == 0 || m == 0 {
        return Err(Error::domain(format!(
            "need n, m >= 1, got n = {n}, m = {m}"
        )));
    }
    if !binary_feasible(n, m) {
        return Err(Error::Infeasible(format!(
            "n = {n} exceeds 2^m - 1 distinct nonzero binary columns for m = {m}"
        )));
    }
    let target = u128::from(n);
    let sums = binomial_prefix_until(m, target);
    let r0 = sums.iter().take_while(|&&s| s < target).count();
    let filled = if r0 == 0 { 0 } else { sums[r0 - 1] };
    let class_size = |l: usize| {
        if l == 1 {
            sums[0]
        } else {
            sums[l - 1] - sums[l - 2]
        }
    };

    let mut cost: u128 = (1..=r0).map(|l| class_size(l) * l as u128).sum();
    cost += (target - filled) * (r0 as u128 + 1);

    let capacity: Vec<(u64, f64)> = (1..=(r0 + 1).min(sums.len()))
        .map(|l| (l as u64, class_size(l) as f64))
        .collect();
    let mut fill: Vec<(u64, f64)> = (1..=r0).map(|l| (l as u64, class_size(l) as f64)).collect();
    fill.push((r0 as u64 + 1, (target - filled) as f64));

    let mut report = BoundReport {
        n,
        m,
        regime: Regime::BinaryNoiseless,
        r0: r0 as u64,
        c_m: n as f64 / sums[r0.max(1) - 1] as f64,
        lower_bound: cost as f64,
        exact_lower_bound: Some(cost),
        per_weight_capacity: capacity,
        per_weight_fill: fill,
        diagnostics: Vec::new(),
    };
    if n >= 2 {
        report.push_diag("t_factor", m as f64 / log2_n(n));
        report.push_diag("cost_over_nlogn", cost as f64 / (n as f64 * log2_n(n)));
    }
    Ok(report)
}

/// Column-norm cap, target error, amplitude and the separation they imply,
/// `d = 2 Q^{-1}(eps) / mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PackingParams {
    pub tau: f64,
    pub eps: f64,
    pub mu: f64,
    pub d: f64,
}

impl PackingParams {
    pub fn new(tau: f64, eps: f64, mu: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::domain(format!("tau must be positive, got {tau}")));
        }
        let d = separation_distance(eps, mu)?;
        Ok(PackingParams { tau, eps, mu, d })
    }

    /// Parameters for a given separation `d`; the target error becomes
    /// `Q(mu d / 2)`.
    pub fn from_separation(tau: f64, d: f64, mu: f64) -> Result<Self> {
        if !(d.is_finite() && d > 0.0 && mu.is_finite() && mu > 0.0) {
            return Err(Error::domain(format!(
                "need d > 0 and mu > 0, got d = {d}, mu = {mu}"
            )));
        }
        let eps = q_function(mu * d / 2.0);
        if eps <= 0.0 {
            return Err(Error::domain(format!(
                "separation d = {d} at mu = {mu} gives a target error that underflows"
            )));
        }
        let mut p = Self::new(tau, eps, mu)?;
        p.d = d;
        Ok(p)
    }

    /// `2 tau / d`, the per-axis packing ratio.
    pub fn ratio(&self) -> f64 {
        2.0 * self.tau / self.d
    }
}

fn binomial_f64(m: u64, l: u64) -> f64 {
    if m <= EXACT_BINOMIAL_CAP {
        binomial(m, l).map(|b| b as f64).unwrap_or(f64::NAN)
    } else {
        log_binomial(m, l).map(f64::exp2).unwrap_or(f64::NAN)
    }
}

/// Upper bound `C(m, l) (2 tau / d)^l` on the number of weight-`l` columns
/// that fit in the radius-`tau` ball with pairwise separation `d`.
pub fn packing_capacity(m: u64, l: u64, p: &PackingParams) -> Result<f64> {
    if l < 1 || l > m {
        return Err(Error::domain(format!("weight l = {l} outside 1..={m}")));
    }
    Ok(binomial_f64(m, l) * p.ratio().powi(l as i32))
}

/// Lower bound on the cost of any real matrix whose `n` columns have norm at
/// most `tau` and pairwise distance at least `d`, obtained by filling the
/// capacities [`packing_capacity`] in ascending weight.
pub fn noisy_lower_bound(n: u64, m: u64, p: &PackingParams) -> Result<BoundReport> {
    if n == 0 || m == 0 {
        return Err(Error::domain(format!(
            "need n, m >= 1, got n = {n}, m = {m}"
        )));
    }
    let target = n as f64;
    let mut capacities = Vec::new();
    let mut total = 0.0;
    for l in 1..=m {
        let v = packing_capacity(m, l, p)?;
        capacities.push((l, v));
        total += v;
        if total >= target {
            break;
        }
    }
    if total < target {
        return Err(Error::CapacityExceeded {
            requested: n,
            capacity: total.floor(),
        });
    }
    let mut r0 = 0usize;
    let mut filled = 0.0;
    let mut cost = 0.0;
    for &(l, v) in &capacities {
        if filled + v >= target {
            break;
        }
        filled += v;
        cost += v * l as f64;
        r0 += 1;
    }
    let remainder = target - filled;
    cost += remainder * (r0 as f64 + 1.0);

    let mut fill: Vec<(u64, f64)> = capacities[..r0].to_vec();
    fill.push((r0 as u64 + 1, remainder));
    let head: f64 = capacities[..r0.max(1)].iter().map(|c| c.1).sum();

    let mut report = BoundReport {
        n,
        m,
        regime: Regime::RealNoisy,
        r0: r0 as u64,
        c_m: target / head,
        lower_bound: cost,
        exact_lower_bound: None,
        per_weight_capacity: capacities,
        per_weight_fill: fill,
        diagnostics: Vec::new(),
    };
    report.push_diag("ratio_2tau_over_d", p.ratio());
    report.push_diag("tau", p.tau);
    report.push_diag("d", p.d);
    report.push_diag("eps", p.eps);
    report.push_diag("mu", p.mu);
    if n >= 2 {
        report.push_diag("t_factor", m as f64 / log2_n(n));
    }
    if let Ok(grid) = grid_capacity(m as usize, p.tau, p.d) {
        report.push_diag("grid_construction_capacity", grid);
    }
    Ok(report)
}

/// Evaluates `(n / m^{1/(d-1)}) ((ln 2 log2(n / c_m)) / (2d))^{d/(d-1)}`.
pub fn higher_m_kernel(n: u64, m: u64, c_m: f64, d: u32) -> f64 {
    let d = f64::from(d);
    let base = std::f64::consts::LN_2 * (n as f64 / c_m).log2() / (2.0 * d);
    n as f64 / (m as f64).powf(1.0 / (d - 1.0)) * base.powf(d / (d - 1.0))
}

/// Exponents scanned by [`higher_m_bound`].
pub const HIGHER_M_SCAN: std::ops::RangeInclusive<u32> = 2..=64;

/// `scale_c * max_d kernel(d)` over [`HIGHER_M_SCAN`] and the maximizing `d`
/// (smallest on ties).
pub fn higher_m_bound(n: u64, m: u64, c_m: f64, scale_c: f64) -> Result<(f64, u32)> {
    if !(c_m.is_finite() && c_m > 0.0 && n as f64 / c_m > 1.0) {
        return Err(Error::domain(format!(
            "need n / c_m > 1, got n = {n}, c_m = {c_m}"
        )));
    }
    if m < 2 {
        return Err(Error::domain(format!("need m >= 2, got {m}")));
    }
    if !(scale_c.is_finite() && scale_c > 0.0) {
        return Err(Error::domain(format!("need scale_c > 0, got {scale_c}")));
    }
    let (best_d, best) = HIGHER_M_SCAN
        .map(|d| (d, higher_m_kernel(n, m, c_m, d)))
        .fold((0, f64::NEG_INFINITY), |acc, cur| {
            if cur.1 > acc.1 {
                cur
            } else {
                acc
            }
        });
    Ok((scale_c * best, best_d))
}

/// [`higher_m_bound`] packaged as a report; `r0` and `c_m` come from the
/// exact binary profile when `(n, m)` admits one.
pub fn higher_m_report(n: u64, m: u64, c_m: f64, scale_c: f64) -> Result<BoundReport> {
    let (value, argmax_d) = higher_m_bound(n, m, c_m, scale_c)?;
    let exact = exact_min_binary_cost(n, m).ok();
    let mut report = BoundReport {
        n,
        m,
        regime: Regime::HigherM,
        r0: exact.as_ref().map_or(0, |e| e.r0),
        c_m,
        lower_bound: value,
        exact_lower_bound: None,
        per_weight_capacity: Vec::new(),
        per_weight_fill: Vec::new(),
        diagnostics: Vec::new(),
    };
    report.push_diag("argmax_d", argmax_d);
    report.push_diag("scale_c", scale_c);
    if let Some(e) = exact {
        report.push_diag("exact_binary_cost", e.lower_bound);
    }
    Ok(report)
}

/// Lower bound for `k`-sparse recovery: a matrix that cannot separate every
/// one-sparse signal cannot separate every `k`-sparse one either, so the
/// one-sparse exact cost carries over.
pub fn ksparse_lower_bound(n: u64, m: u64, k: u64) -> Result<BoundReport> {
    if k == 0 {
        return Err(Error::domain("sparsity k must be at least 1"));
    }
    let mut report = exact_min_binary_cost(n, m)?;
    report.push_diag("k", k);
    report.push_diag(
        "asymptotic_reading",
        "Theta(n k log2 n) when m = Theta(k log2 n)",
    );
    Ok(report)
}

/// Largest number of subsets [`brute_force_min_cost`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Minimum total weight over every choice of `n` distinct nonzero binary
/// columns of length `m`, by exhaustive enumeration.
pub fn brute_force_min_cost(n: u64, m: u64) -> Result<u64> {
    if !(1..=4).contains(&m) {
        return Err(Error::domain(format!(
            "brute force limited to 1 <= m <= 4, got m = {m}"
        )));
    }
    let universe = (1u64 << m) - 1;
    if n == 0 || n > universe {
        return Err(Error::Infeasible(format!(
            "n = {n} is outside 1..={universe} for m = {m}"
        )));
    }
    let subsets = binomial(universe, n)?;
    if subsets > BRUTE_FORCE_LIMIT {
        return Err(Error::domain(format!(
            "C({universe}, {n}) = {subsets} subsets exceeds the enumeration limit {BRUTE_FORCE_LIMIT}"
        )));
    }
    let weights: Vec<u64> = (1..=universe).map(|c| u64::from(c.count_ones())).collect();
    Ok(weights
        .iter()
        .combinations(n as usize)
        .map(|choice| choice.into_iter().sum::<u64>())
        .min()
        .expect("at least one subset"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(n: u64, m: u64) -> u128 {
        exact_min_binary_cost(n, m)
            .unwrap()
            .exact_lower_bound
            .unwrap()
    }

    #[test]
    fn exact_cost_examples() {
        let r = exact_min_binary_cost(7, 3).unwrap();
        assert_eq!((r.r0, exact(7, 3)), (2, 12));
        let r = exact_min_binary_cost(10, 4).unwrap();
        assert_eq!((r.r0, exact(10, 4)), (1, 16));
        let r = exact_min_binary_cost(256, 9).unwrap();
        assert_eq!((r.r0, exact(256, 9)), (4, 842));
        assert_eq!(r.c_m, 256.0 / 255.0);
        assert_eq!(
            r.per_weight_capacity,
            vec![(1, 9.0), (2, 36.0), (3, 84.0), (4, 126.0), (5, 126.0)]
        );
        assert_eq!(r.per_weight_fill.last(), Some(&(5, 1.0)));
    }

    #[test]
    fn exact_cost_all_weight_one() {
        let r = exact_min_binary_cost(5, 8).unwrap();
        assert_eq!(r.r0, 0);
        assert_eq!(exact(5, 8), 5);
        assert_eq!(r.c_m, 5.0 / 8.0);
        assert_eq!(exact(1, 1), 1);
    }

    #[test]
    fn exact_cost_infeasible() {
        assert!(matches!(
            exact_min_binary_cost(8, 3),
            Err(Error::Infeasible(_))
        ));
        assert!(exact_min_binary_cost(u64::MAX, 64).is_ok());
    }

    #[test]
    fn exact_cost_huge_m() {
        // all columns fit at weight one
        assert_eq!(exact(1000, 1 << 40), 1000);
        let r = exact_min_binary_cost(1 << 30, 1 << 20).unwrap();
        assert_eq!(r.r0, 1);
    }

    #[test]
    fn packing_capacity_examples() {
        let p = PackingParams::from_separation(4.0, 1.0, 1.0).unwrap();
        assert_eq!(p.ratio(), 8.0);
        assert_eq!(packing_capacity(4, 1, &p).unwrap(), 32.0);
        assert_eq!(packing_capacity(4, 2, &p).unwrap(), 384.0);
        let unit = PackingParams::from_separation(0.5, 1.0, 1.0).unwrap();
        for l in 1..=6 {
            assert_eq!(
                packing_capacity(6, l, &unit).unwrap(),
                binomial(6, l).unwrap() as f64
            );
        }
        assert!(packing_capacity(4, 0, &p).is_err());
        assert!(packing_capacity(4, 5, &p).is_err());
    }

    #[test]
    fn packing_params_consistency() {
        let p = PackingParams::new(3.0, 0.01, 2.0).unwrap();
        let d = 2.0 * crate::numkit::q_inverse(0.01).unwrap() / 2.0;
        assert!((p.d - d).abs() < 1e-12);
        let q = PackingParams::from_separation(3.0, 1.7, 1.3).unwrap();
        assert!((2.0 * crate::numkit::q_inverse(q.eps).unwrap() / q.mu - q.d).abs() < 1e-9);
        assert!(PackingParams::new(0.0, 0.01, 1.0).is_err());
        assert!(PackingParams::new(1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn noisy_bound_example() {
        let p = PackingParams::from_separation(4.0, 1.0, 1.0).unwrap();
        let r = noisy_lower_bound(100, 4, &p).unwrap();
        assert_eq!(r.r0, 1);
        assert_eq!(r.lower_bound, 168.0);
        assert_eq!(r.diagnostic("ratio_2tau_over_d"), Some("8"));
        let r = noisy_lower_bound(20, 4, &p).unwrap();
        assert_eq!((r.r0, r.lower_bound), (0, 20.0));
    }

    #[test]
    fn noisy_bound_infeasible() {
        let p = PackingParams::from_separation(0.5, 1.0, 1.0).unwrap();
        match noisy_lower_bound(16, 4, &p) {
            Err(Error::CapacityExceeded { capacity, .. }) => assert_eq!(capacity, 15.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn noisy_bound_degenerates_to_binary() {
        let unit = PackingParams::from_separation(0.5, 1.0, 1.0).unwrap();
        for m in 1..=12u64 {
            for n in 1..(1u64 << m) {
                let noisy = noisy_lower_bound(n, m, &unit).unwrap();
                let binary = exact_min_binary_cost(n, m).unwrap();
                assert_eq!(noisy.lower_bound, binary.lower_bound, "n={n} m={m}");
                assert_eq!(noisy.r0, binary.r0);
            }
        }
    }

    #[test]
    fn higher_m_kernel_at_two() {
        let n = 1u64 << 20;
        // (ln 2 * 20 / 4)^2 evaluated in high precision
        assert!((higher_m_kernel(n, n, 1.0, 2) - 12.011_325_347_955_036).abs() < 1e-9);
    }

    #[test]
    fn higher_m_scan_matches_brute_scan() {
        let n = 1u64 << 16;
        let (value, d) = higher_m_bound(n, n, 1.0, 1.0).unwrap();
        let mut best = (0u32, f64::MIN);
        for k in 2..=64u32 {
            let kd = f64::from(k);
            let v = n as f64 / (n as f64).powf(1.0 / (kd - 1.0))
                * ((n as f64).ln() / (2.0 * kd)).powf(kd / (kd - 1.0));
            if v > best.1 {
                best = (k, v);
            }
        }
        assert_eq!(d, best.0);
        assert!((value - best.1).abs() <= 1e-9 * best.1);
        let (scaled, _) = higher_m_bound(n, n, 1.0, 2.5).unwrap();
        assert!((scaled - 2.5 * value).abs() <= 1e-9 * scaled);
    }

    #[test]
    fn higher_m_small_ratio_positive() {
        for d in HIGHER_M_SCAN {
            let v = higher_m_kernel(64, 16, 32.0, d);
            assert!(v.is_finite() && v > 0.0);
        }
        assert!(higher_m_bound(64, 16, 64.0, 1.0).is_err());
        assert!(higher_m_bound(64, 1, 1.0, 1.0).is_err());
        assert!(higher_m_bound(64, 16, 1.0, 0.0).is_err());
    }

    #[test]
    fn ksparse_delegates() {
        assert_eq!(ksparse_lower_bound(7, 3, 2).unwrap().lower_bound, 12.0);
        assert_eq!(ksparse_lower_bound(256, 9, 3).unwrap().lower_bound, 842.0);
        let one = ksparse_lower_bound(100, 8, 1).unwrap();
        let base = exact_min_binary_cost(100, 8).unwrap();
        assert_eq!(one.lower_bound, base.lower_bound);
        assert_eq!(one.r0, base.r0);
        assert!(ksparse_lower_bound(7, 3, 0).is_err());
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_min_cost(7, 3).unwrap(), 12);
        assert_eq!(brute_force_min_cost(5, 4).unwrap(), 6);
        assert_eq!(brute_force_min_cost(3, 4).unwrap(), 3);
        assert!(brute_force_min_cost(3, 5).is_err());
        assert!(brute_force_min_cost(16, 4).is_err());
    }

    #[test]
    fn brute_force_agrees_with_formula() {
        for m in 1..=4u64 {
            for n in 1..(1u64 << m) {
                assert_eq!(u128::from(brute_force_min_cost(n, m).unwrap()), exact(n, m));
            }
        }
    }

    #[test]
    fn monotone_in_m_and_n() {
        for m in 1..=16u64 {
            let top = ((1u64 << m) - 1).min(2000);
            let mut prev = 0;
            for n in 1..=top {
                let c = exact(n, m);
                assert!(c >= prev);
                prev = c;
                if binary_feasible(n, m + 1) {
                    assert!(exact(n, m + 1) <= c);
                }
            }
        }
    }
}
