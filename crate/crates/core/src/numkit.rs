//! Special functions used by the cost bounds.
//!
//! Binomial coefficients are exact `u128` values up to [`EXACT_BINOMIAL_CAP`];
//! beyond that callers go through [`log_binomial`]. The Gaussian tail `Q` is
//! built on the complementary error function, and its inverse starts from a
//! rational quantile approximation refined by one Newton step.

use std::f64::consts::{LN_2, PI, SQRT_2};

use crate::{Error, Result};

/// Largest `m` for which [`binomial`] is exact. `C(128, 64)` is about
/// `2.4e37`, which still fits in a `u128`.
pub const EXACT_BINOMIAL_CAP: u64 = 128;

/// Result of checking one bracketing inequality `lower <= subject <= upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaVerdict {
    pub lower_value: f64,
    pub subject_value: f64,
    pub upper_value: f64,
    pub holds: bool,
}

impl LemmaVerdict {
    fn new(lower_value: f64, subject_value: f64, upper_value: f64) -> Self {
        LemmaVerdict {
            lower_value,
            subject_value,
            upper_value,
            holds: lower_value <= subject_value && subject_value <= upper_value,
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact binomial coefficient `C(m, l)` for `m <= EXACT_BINOMIAL_CAP`.
pub fn binomial(m: u64, l: u64) -> Result<u128> {
    if l > m {
        return Err(Error::domain(format!("binomial: l = {l} exceeds m = {m}")));
    }
    if m > EXACT_BINOMIAL_CAP {
        return Err(Error::domain(format!(
            "binomial: m = {m} exceeds the exact cap {EXACT_BINOMIAL_CAP}; use log_binomial"
        )));
    }
    let l = l.min(m - l);
    let mut acc: u128 = 1;
    for i in 0..l {
        // acc = C(m, i); the next value is acc * (m - i) / (i + 1). Cancel the
        // common factor first so the intermediate never exceeds C(m, i + 1).
        let num = m - i;
        let den = i + 1;
        let g = gcd(num, den);
        acc = (acc / u128::from(den / g)) * u128::from(num / g);
    }
    Ok(acc)
}

/// Partial sums `S_r = C(m,1) + ... + C(m,r)` for `r = 1, 2, ...`, stopping at
/// the first `r` where `S_r >= limit` (or at `r = m`).
///
/// Works for any `m`: a term that would overflow saturates the sum, which
/// then exceeds any `limit` and ends the iteration.
pub(crate) fn binomial_prefix_until(m: u64, limit: u128) -> Vec<u128> {
    let mut sums = Vec::new();
    let mut term: u128 = 1;
    let mut total: u128 = 0;
    for l in 1..=m {
        // term = C(m, l - 1) here
        let num = m - (l - 1);
        let g = gcd(num, l);
        term = match (term / u128::from(l / g)).checked_mul(u128::from(num / g)) {
            Some(t) => t,
            None => {
                sums.push(u128::MAX);
                break;
            }
        };
        total = total.saturating_add(term);
        sums.push(total);
        if total >= limit {
            break;
        }
    }
    sums
}

/// Base-2 logarithm of `C(m, l)`.
pub fn log_binomial(m: u64, l: u64) -> Result<f64> {
    if l > m {
        return Err(Error::domain(format!(
            "log_binomial: l = {l} exceeds m = {m}"
        )));
    }
    let l = l.min(m - l);
    if l == 0 {
        return Ok(0.0);
    }
    if l <= 256 {
        let sum: f64 = (0..l)
            .map(|i| ((m - i) as f64 / (i + 1) as f64).log2())
            .sum();
        return Ok(sum);
    }
    let lg = |x: u64| libm::lgamma(x as f64 + 1.0);
    Ok((lg(m) - lg(l) - lg(m - l)) / LN_2)
}

/// Binary entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!(
            "binary_entropy: p = {p} outside [0, 1]"
        )));
    }
    let term = |x: f64| if x == 0.0 { 0.0 } else { -x * x.log2() };
    Ok(term(p) + term(1.0 - p))
}

/// Standard normal tail probability `Q(a) = P(Z > a)`.
pub fn q_function(a: f64) -> f64 {
    0.5 * libm::erfc(a / SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Rational approximation of the lower-tail standard normal quantile for
/// `0 < p < 0.5` (relative error about 1.2e-9).
fn acklam_lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Inverse of [`q_function`] on `(0, 0.5)`; the result is positive.
pub fn q_inverse(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::domain(format!(
            "q_inverse: eps = {eps} outside (0, 0.5)"
        )));
    }
    let t = -acklam_lower_quantile(eps);
    // Newton on Q(t) - eps, with Q'(t) = -pdf(t).
    Ok(t + (q_function(t) - eps) / normal_pdf(t))
}

/// `C(m,r) <= sum_{l=1}^{r} C(m,l) <= C(m,r) / (1 - 2r/m)` for `1 <= r < m/2`.
pub fn lemma1_verdict(m: u64, r: u64) -> Result<LemmaVerdict> {
    if r < 1 || 2 * r >= m {
        return Err(Error::domain(format!(
            "partial-sum bracket needs 1 <= r < m/2, got m = {m}, r = {r}"
        )));
    }
    let last = binomial(m, r)?;
    let mut partial: u128 = 0;
    for l in 1..=r {
        partial += binomial(m, l)?;
    }
    let p = r as f64 / m as f64;
    Ok(LemmaVerdict::new(
        last as f64,
        partial as f64,
        last as f64 / (1.0 - 2.0 * p),
    ))
}

/// Entropy bracket on `C(m, r)` with `p = r/m`:
/// `2^{mH(p)} / sqrt(8 m p (1-p)) <= C(m,r) <= 2^{mH(p)} / sqrt(2 pi m p (1-p))`.
pub fn lemma2_verdict(m: u64, r: u64) -> Result<LemmaVerdict> {
    if r < 1 || r >= m {
        return Err(Error::domain(format!(
            "entropy bracket needs 1 <= r <= m - 1, got m = {m}, r = {r}"
        )));
    }
    let subject = binomial(m, r)? as f64;
    let mf = m as f64;
    let p = r as f64 / mf;
    let top = (mf * binary_entropy(p)?).exp2();
    let spread = mf * p * (1.0 - p);
    Ok(LemmaVerdict::new(
        top / (8.0 * spread).sqrt(),
        subject,
        top / (2.0 * PI * spread).sqrt(),
    ))
}

/// `H(p) <= (2d / ln 2) p^{1 - 1/d}` for integer `d >= 2` and `0 < p < 1/2`.
pub fn lemma3_verdict(p: f64, d: u32) -> Result<LemmaVerdict> {
    if d < 2 {
        return Err(Error::domain(format!("power bound needs d >= 2, got {d}")));
    }
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::domain(format!(
            "power bound needs 0 < p < 0.5, got {p}"
        )));
    }
    let df = f64::from(d);
    let upper = 2.0 * df / LN_2 * p.powf(1.0 - 1.0 / df);
    Ok(LemmaVerdict::new(0.0, binary_entropy(p)?, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pascal_row(m: usize) -> Vec<u128> {
        let mut row = vec![1u128];
        for _ in 0..m {
            let mut next = vec![1u128; row.len() + 1];
            for i in 1..row.len() {
                next[i] = row[i - 1] + row[i];
            }
            row = next;
        }
        row
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(3, 2).unwrap(), 3);
        assert_eq!(binomial(10, 3).unwrap(), 120);
        assert_eq!(binomial(20, 5).unwrap(), pascal_row(20)[5]);
        assert_eq!(binomial(20, 5).unwrap(), 15504);
        assert_eq!(binomial(7, 0).unwrap(), 1);
        assert_eq!(binomial(0, 0).unwrap(), 1);
    }

    #[test]
    fn binomial_matches_pascal_up_to_cap() {
        let row = pascal_row(128);
        for (l, expected) in row.iter().enumerate() {
            assert_eq!(binomial(128, l as u64).unwrap(), *expected, "C(128,{l})");
        }
    }

    #[test]
    fn binomial_pascal_rule() {
        for m in 1..=40u64 {
            for l in 1..m {
                assert_eq!(
                    binomial(m, l).unwrap(),
                    binomial(m - 1, l - 1).unwrap() + binomial(m - 1, l).unwrap()
                );
            }
        }
    }

    #[test]
    fn binomial_errors() {
        assert!(matches!(binomial(3, 4), Err(Error::Domain(_))));
        assert!(matches!(binomial(129, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn prefix_sums_stop_at_limit() {
        assert_eq!(binomial_prefix_until(9, 256), vec![9, 45, 129, 255, 381]);
        assert_eq!(binomial_prefix_until(3, u128::MAX), vec![3, 6, 7]);
        let big = binomial_prefix_until(1_000_000, 10);
        assert_eq!(big, vec![1_000_000]);
    }

    #[test]
    fn log_binomial_values() {
        assert!((log_binomial(10, 5).unwrap() - 252f64.log2()).abs() < 1e-12);
        assert_eq!(log_binomial(17, 0).unwrap(), 0.0);
        // Sum-of-logs oracle evaluated in high precision.
        assert!((log_binomial(128, 64).unwrap() - 124.171_434_200_173_78).abs() < 1e-9);
        assert!(log_binomial(3, 4).is_err());
    }

    #[test]
    fn log_binomial_cross_checks_exact() {
        for m in 0..=128u64 {
            for l in 0..=m {
                let exact = (binomial(m, l).unwrap() as f64).log2();
                let approx = log_binomial(m, l).unwrap();
                assert!((exact - approx).abs() <= 1e-9, "m={m} l={l}");
            }
        }
    }

    #[test]
    fn log_binomial_large_branch_is_consistent() {
        // l = 300 goes through lgamma; compare against the summed logs.
        let direct: f64 = (0..300u64)
            .map(|i| ((5000 - i) as f64 / (i + 1) as f64).log2())
            .sum();
        let via = log_binomial(5000, 300).unwrap();
        assert!((direct - via).abs() / direct < 1e-10);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.25).unwrap() - 0.811_278_124_459_132_9).abs() < 1e-12);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
        for i in 1..100 {
            let p = f64::from(i) / 100.0;
            let diff = binary_entropy(p).unwrap() - binary_entropy(1.0 - p).unwrap();
            assert!(diff.abs() < 1e-15);
        }
    }

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!((q_function(2.0) - 0.022_750_131_948_179_21).abs() < 1e-15);
        assert!((q_function(-1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    #[test]
    fn q_function_symmetry_and_monotonicity() {
        for i in -800..=800 {
            let a = f64::from(i) / 100.0;
            assert!((q_function(a) + q_function(-a) - 1.0).abs() < 1e-12);
        }
        // below -5 neighbouring values round to the same double near 1
        let mut prev = f64::INFINITY;
        for i in -500..=3000 {
            let q = q_function(f64::from(i) / 100.0);
            assert!(q < prev, "a = {}", f64::from(i) / 100.0);
            prev = q;
        }
    }

    #[test]
    fn q_inverse_values() {
        assert!((q_inverse(0.022_750_1).unwrap() - 2.000_000_591_732_287).abs() < 1e-9);
        assert!((q_inverse(0.005).unwrap() - 2.575_829_303_548_901).abs() < 1e-9);
        assert!((q_inverse(0.1).unwrap() - 1.281_551_565_544_600_5).abs() < 1e-9);
        let near_half = q_inverse(0.5 - 1e-12).unwrap();
        assert!(near_half > 0.0 && near_half < 1e-10);
    }

    #[test]
    fn q_inverse_round_trip() {
        for eps in [1e-12, 1e-6, 1e-3, 0.01, 0.02425, 0.1, 0.25, 0.4, 0.499] {
            let t = q_inverse(eps).unwrap();
            assert!(t > 0.0);
            assert!(
                (q_function(t) - eps).abs() <= 1e-9 * eps.max(1e-3),
                "eps={eps}"
            );
        }
    }

    #[test]
    fn q_inverse_domain() {
        for bad in [0.0, 0.5, 0.7, -0.1, f64::NAN] {
            assert!(q_inverse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn lemma1_examples() {
        let v = lemma1_verdict(10, 3).unwrap();
        assert_eq!(
            (v.lower_value, v.subject_value, v.upper_value),
            (120.0, 175.0, 300.0)
        );
        assert!(v.holds);
        let v = lemma1_verdict(20, 5).unwrap();
        assert_eq!((v.lower_value, v.subject_value), (15504.0, 21699.0));
        assert!((v.upper_value - 31008.0).abs() < 1e-9);
        assert!(v.holds);
        let v = lemma1_verdict(9, 1).unwrap();
        assert_eq!(v.lower_value, 9.0);
        assert_eq!(v.subject_value, 9.0);
        assert!((v.upper_value - 9.0 / (1.0 - 2.0 / 9.0)).abs() < 1e-12);
        assert!(v.holds);
    }

    #[test]
    fn lemma1_domain() {
        assert!(lemma1_verdict(10, 5).is_err());
        assert!(lemma1_verdict(10, 0).is_err());
        assert!(lemma1_verdict(2, 1).is_err());
    }

    #[test]
    fn lemma2_examples() {
        let v = lemma2_verdict(10, 5).unwrap();
        assert!((v.lower_value - 228.973_360_895_978_46).abs() < 1e-9);
        assert_eq!(v.subject_value, 252.0);
        assert!((v.upper_value - 258.368_770_254_864_4).abs() < 1e-9);
        assert!(v.holds);

        let v = lemma2_verdict(2, 1).unwrap();
        assert_eq!(v.lower_value, 2.0);
        assert_eq!(v.subject_value, 2.0);
        assert!((v.upper_value - 2.256_758_334_191_025).abs() < 1e-12);
        assert!(v.holds);

        let v = lemma2_verdict(30, 15).unwrap();
        assert_eq!(v.subject_value, 155_117_520.0);
        assert!(v.holds);
    }

    #[test]
    fn lemma2_domain() {
        assert!(lemma2_verdict(10, 0).is_err());
        assert!(lemma2_verdict(10, 10).is_err());
    }

    #[test]
    fn lemma3_examples() {
        let v = lemma3_verdict(0.25, 2).unwrap();
        assert!((v.subject_value - 0.811_278_124_459_132_9).abs() < 1e-12);
        assert!((v.upper_value - 2.885_390_081_777_927).abs() < 1e-12);
        assert!(v.holds);
        let v = lemma3_verdict(0.4, 3).unwrap();
        assert!((v.subject_value - 0.970_950_594_454_668_6).abs() < 1e-12);
        assert!((v.upper_value - 4.699_292_201_235_734).abs() < 1e-9);
        assert!(v.holds);
        let v = lemma3_verdict(1e-300, 7).unwrap();
        assert!(v.holds && v.subject_value < 1e-290);
    }

    #[test]
    fn lemma3_domain() {
        assert!(lemma3_verdict(0.25, 1).is_err());
        assert!(lemma3_verdict(0.0, 2).is_err());
        assert!(lemma3_verdict(0.5, 2).is_err());
    }

    #[test]
    fn lemma_sweeps_hold() {
        for m in 1..=64u64 {
            for r in 1..m {
                if 2 * r < m {
                    assert!(lemma1_verdict(m, r).unwrap().holds, "lemma1 m={m} r={r}");
                }
                assert!(lemma2_verdict(m, r).unwrap().holds, "lemma2 m={m} r={r}");
            }
        }
    }
}
