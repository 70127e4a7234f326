//! Measurement model `y = A x + z` with `z ~ N(0, I)`, maximum-likelihood
//! decoding of one-sparse signals, noisy bisection, and Monte Carlo
//! estimation of the support-recovery error rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::matrices::{ceil_log2, AdaptivePlan, SensingMatrix};
use crate::numkit::{q_function, q_inverse};
use crate::{Error, Result};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Signal of dimension `n` whose only nonzero entry is `mu > 0` at `support`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneSparseSignal {
    n: usize,
    support: usize,
    mu: f64,
}

impl OneSparseSignal {
    pub fn new(n: usize, support: usize, mu: f64) -> Result<Self> {
        if support >= n {
            return Err(Error::domain(format!("support {support} outside 0..{n}")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::domain(format!(
                "amplitude must be positive, got {mu}"
            )));
        }
        Ok(OneSparseSignal { n, support, mu })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub values: Vec<f64>,
    pub noise_seed: u64,
    pub noisy: bool,
}

fn check_amplitude(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "amplitude must be positive, got {mu}"
        )))
    }
}

fn acquire(a: &SensingMatrix, support: usize, mu: f64, noisy: bool, seed: u64) -> Vec<f64> {
    let mut y = vec![0.0; a.rows()];
    let col = a.column(support);
    for (&r, &v) in col.rows.iter().zip(col.values) {
        y[r] = mu * v;
    }
    if noisy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for yi in &mut y {
            *yi += rng.sample::<f64, _>(StandardNormal);
        }
    }
    y
}

/// `y = mu A_support`, plus unit-variance Gaussian noise drawn from a ChaCha8
/// stream seeded with `seed` when `noisy` is set.
pub fn measure(
    a: &SensingMatrix,
    x: &OneSparseSignal,
    noisy: bool,
    seed: u64,
) -> Result<MeasurementRecord> {
    if x.n() != a.cols() {
        return Err(Error::domain(format!(
            "signal dimension {} does not match {} matrix columns",
            x.n(),
            a.cols()
        )));
    }
    Ok(MeasurementRecord {
        values: acquire(a, x.support(), x.mu(), noisy, seed),
        noise_seed: seed,
        noisy,
    })
}

/// Nearest-scaled-column decoder. Construction rejects matrices with
/// repeated columns, for which recovery is ill-posed.
#[derive(Debug)]
pub struct MlDecoder<'a> {
    a: &'a SensingMatrix,
    norms_sq: Vec<f64>,
}

impl<'a> MlDecoder<'a> {
    pub fn new(a: &'a SensingMatrix) -> Result<Self> {
        if let Some((i, j)) = a.find_duplicate_columns() {
            return Err(Error::InvalidMatrix(format!(
                "columns {i} and {j} are identical"
            )));
        }
        Ok(MlDecoder {
            a,
            norms_sq: a.columns().map(|c| c.norm_sq()).collect(),
        })
    }

    /// `argmin_i ||y - mu A_i||_2`, smallest index on ties.
    ///
    /// Uses `||y - mu A_i||^2 = ||y||^2 + mu^2 ||A_i||^2 - 2 mu <y, A_i>` and
    /// drops the constant `||y||^2`.
    pub fn decode(&self, y: &[f64], mu: f64) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, col) in self.a.columns().enumerate() {
            let dot: f64 = col
                .rows
                .iter()
                .zip(col.values)
                .map(|(&r, &v)| y[r] * v)
                .sum();
            let score = mu * mu * self.norms_sq[i] - 2.0 * mu * dot;
            if score < best.1 {
                best = (i, score);
            }
        }
        best.0
    }
}

pub fn ml_decode(a: &SensingMatrix, y: &MeasurementRecord, mu: f64) -> Result<usize> {
    check_amplitude(mu)?;
    if y.values.len() != a.rows() {
        return Err(Error::domain(format!(
            "measurement length {} does not match {} matrix rows",
            y.values.len(),
            a.rows()
        )));
    }
    Ok(MlDecoder::new(a)?.decode(&y.values, mu))
}

/// Error of the optimal test between `mu ai` and `mu aj` in unit-variance
/// Gaussian noise with equal priors: `Q(mu ||ai - aj|| / 2)`.
pub fn pairwise_error(ai: &[f64], aj: &[f64], mu: f64) -> Result<f64> {
    if ai.len() != aj.len() {
        return Err(Error::domain(format!(
            "vector lengths differ: {} vs {}",
            ai.len(),
            aj.len()
        )));
    }
    check_amplitude(mu)?;
    let dist = ai
        .iter()
        .zip(aj)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    Ok(q_function(mu * dist / 2.0))
}

/// Column separation `2 Q^{-1}(eps) / mu` needed for pairwise error `eps`.
pub fn separation_distance(eps: f64, mu: f64) -> Result<f64> {
    check_amplitude(mu)?;
    Ok(2.0 * q_inverse(eps)? / mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BisectionOutcome {
    pub decoded: usize,
    pub measurements: usize,
    pub l0_cost: u64,
}

/// Runs the bisection plan against `x`. Each step reads
/// `y_t = mu 1{support in sensed half} (+ N(0,1))` and keeps the sensed half
/// iff `y_t > mu / 2`. Noise comes from a ChaCha8 stream seeded with `seed`.
/// Blocks that shrink to one index end the run early, so paths that leave
/// the sensed half can use fewer than `plan.step_count()` measurements.
pub fn run_bisection(
    plan: &AdaptivePlan,
    x: &OneSparseSignal,
    noisy: bool,
    seed: u64,
) -> Result<BisectionOutcome> {
    if x.n() != plan.n() {
        return Err(Error::domain(format!(
            "signal dimension {} does not match plan dimension {}",
            x.n(),
            plan.n()
        )));
    }
    Ok(bisect(plan.n(), x.support(), x.mu(), noisy, seed))
}

fn bisect(n: usize, support: usize, mu: f64, noisy: bool, seed: u64) -> BisectionOutcome {
    let mut rng = noisy.then(|| ChaCha8Rng::seed_from_u64(seed));
    let mut block = 0..n;
    let mut measurements = 0;
    let mut l0_cost = 0u64;
    while let Some(step) = AdaptivePlan::split(&block) {
        let mut y = if step.sensed.contains(&support) {
            mu
        } else {
            0.0
        };
        if let Some(rng) = rng.as_mut() {
            y += rng.sample::<f64, _>(StandardNormal);
        }
        measurements += 1;
        l0_cost += step.sensed_len() as u64;
        block = if y > mu / 2.0 {
            step.sensed
        } else {
            step.sensed.end..step.block.end
        };
    }
    BisectionOutcome {
        decoded: block.start,
        measurements,
        l0_cost,
    }
}

/// Amplitude `2 Q^{-1}(eps / ceil(log2 n))` at which each bisection step errs
/// with probability `eps / steps`, so the whole run errs with probability at
/// most `eps` by the union bound.
pub fn required_amplitude(n: usize, eps: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("need n >= 2, got {n}")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::domain(format!("eps = {eps} outside (0, 0.5)")));
    }
    let steps = f64::from(ceil_log2(n as u64));
    Ok(2.0 * q_inverse(eps / steps)?)
}

#[derive(Debug, Clone, Copy)]
pub enum Strategy<'a> {
    NonAdaptive(&'a SensingMatrix),
    Bisection(&'a AdaptivePlan),
}

impl Strategy<'_> {
    fn dimension(&self) -> usize {
        match self {
            Strategy::NonAdaptive(a) => a.cols(),
            Strategy::Bisection(p) => p.n(),
        }
    }
}

/// Failure count over `trials` runs with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub trials: u64,
    pub failures: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ErrorEstimate {
    pub fn from_counts(failures: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(failures, trials, Z_95);
        ErrorEstimate {
            trials,
            failures,
            rate: failures as f64 / trials as f64,
            ci_low,
            ci_high,
        }
    }

    /// True unless the whole confidence interval lies above `eps`.
    pub fn consistent_with_target(&self, eps: f64) -> bool {
        self.ci_low <= eps
    }
}

/// Wilson score interval for a binomial proportion, clipped to `[0, 1]` and
/// widened if needed so it always contains `failures / trials`.
pub fn wilson_interval(failures: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index`: `splitmix64(splitmix64(seed) ^ index)`.
///
/// The base seed is mixed before the XOR; with a raw `seed ^ index`, nearby
/// base seeds would reuse almost the same set of trial seeds.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index)
}

/// Estimates the support-recovery error rate of `strategy`.
///
/// Trial `t` seeds a ChaCha8 stream with [`trial_seed`]`(seed, t)`, draws a
/// uniform support and then a noise seed from it. Trials run in parallel;
/// the result depends only on the arguments.
pub fn monte_carlo(
    strategy: Strategy<'_>,
    mu: f64,
    noisy: bool,
    trials: u64,
    seed: u64,
) -> Result<ErrorEstimate> {
    check_amplitude(mu)?;
    if trials == 0 {
        return Err(Error::domain("trials must be at least 1"));
    }
    let n = strategy.dimension();
    let draw = |t: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, t));
        let support = rng.random_range(0..n);
        (support, rng.random::<u64>())
    };
    let failures: u64 = match strategy {
        Strategy::NonAdaptive(a) => {
            let decoder = MlDecoder::new(a)?;
            (0..trials)
                .into_par_iter()
                .map(|t| {
                    let (support, noise_seed) = draw(t);
                    let y = acquire(a, support, mu, noisy, noise_seed);
                    u64::from(decoder.decode(&y, mu) != support)
                })
                .sum()
        }
        Strategy::Bisection(plan) => (0..trials)
            .into_par_iter()
            .map(|t| {
                let (support, noise_seed) = draw(t);
                u64::from(bisect(plan.n(), support, mu, noisy, noise_seed).decoded != support)
            })
            .sum(),
    };
    Ok(ErrorEstimate::from_counts(failures, trials))
}
