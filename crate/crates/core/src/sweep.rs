//! Cost sweeps over the signal dimension.
//!
//! One row per `(n, strategy)`, written as CSV with the fixed header
//! `n,m,strategy,l0_cost,measurements,cost_over_nlogn,lower_bound,status,seed`.
//! Cells that cannot be built are kept with status `infeasible`.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{exact_min_binary_cost, noisy_lower_bound, PackingParams};
use crate::matrices::{
    baseline_matrix, bisection_plan, grid_packing, l0_cost, min_cost_binary, Baseline,
};
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "n,m,strategy,l0_cost,measurements,cost_over_nlogn,lower_bound,status,seed";

/// Variants are declared in name order so sorting by variant sorts by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SweepStrategy {
    Bisection,
    Gaussian,
    GridPacking,
    MinBinary,
}

impl SweepStrategy {
    pub const ALL: [SweepStrategy; 4] = [
        SweepStrategy::Bisection,
        SweepStrategy::Gaussian,
        SweepStrategy::GridPacking,
        SweepStrategy::MinBinary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepStrategy::Bisection => "bisection",
            SweepStrategy::Gaussian => "gaussian",
            SweepStrategy::GridPacking => "grid-packing",
            SweepStrategy::MinBinary => "min-binary",
        }
    }
}

impl fmt::Display for SweepStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub n_values: Vec<u64>,
    /// Measurement budget factor: `m = ceil(t_factor * log2 n)`.
    pub t_factor: f64,
    pub strategies: Vec<SweepStrategy>,
    pub packing: Option<PackingParams>,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

impl SweepConfig {
    /// Powers of two `2^8 ..= 2^16` at `t = 1` with the min-binary and
    /// bisection strategies.
    pub fn separation(seed: u64) -> Self {
        SweepConfig {
            n_values: doubling_grid(1 << 8, 1 << 16),
            t_factor: 1.0,
            strategies: vec![SweepStrategy::MinBinary, SweepStrategy::Bisection],
            packing: None,
            seed,
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::Config("no signal dimensions given".into()));
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("signal dimension {n} is below 2")));
        }
        if !(self.t_factor.is_finite() && self.t_factor >= 1.0) {
            return Err(Error::Config(format!(
                "t factor must be >= 1, got {}",
                self.t_factor
            )));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies given".into()));
        }
        if self.strategies.contains(&SweepStrategy::GridPacking) && self.packing.is_none() {
            return Err(Error::Config("grid-packing needs tau, eps and mu".into()));
        }
        Ok(())
    }
}

/// Powers of two in `lo..=hi`.
pub fn doubling_grid(lo: u64, hi: u64) -> Vec<u64> {
    (0..u64::BITS)
        .map(|k| 1u64 << k)
        .filter(|&n| n >= lo && n <= hi)
        .collect()
}

/// `ceil(t log2 n)`, at least 1.
pub fn measurement_budget(n: u64, t_factor: f64) -> u64 {
    ((t_factor * (n as f64).log2()).ceil() as u64).max(1)
}

/// Smallest `m` with `n <= 2^m - 1`, i.e. `floor(log2 n) + 1`.
pub fn min_binary_rows(n: u64) -> u64 {
    u64::from(u64::BITS - n.leading_zeros())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub m: u64,
    pub strategy: String,
    pub l0_cost: Option<u64>,
    pub measurements: Option<u64>,
    pub cost_over_nlogn: Option<f64>,
    pub lower_bound: Option<f64>,
    pub status: String,
    pub seed: u64,
}

impl SweepRow {
    fn ok(
        n: u64,
        m: u64,
        strategy: SweepStrategy,
        cost: u64,
        measurements: u64,
        seed: u64,
    ) -> Self {
        SweepRow {
            n,
            m,
            strategy: strategy.name().to_string(),
            l0_cost: Some(cost),
            measurements: Some(measurements),
            cost_over_nlogn: Some(cost as f64 / (n as f64 * (n as f64).log2())),
            lower_bound: None,
            status: "ok".into(),
            seed,
        }
    }

    fn infeasible(n: u64, m: u64, strategy: SweepStrategy, seed: u64) -> Self {
        SweepRow {
            n,
            m,
            strategy: strategy.name().to_string(),
            l0_cost: None,
            measurements: None,
            cost_over_nlogn: None,
            lower_bound: None,
            status: "infeasible".into(),
            seed,
        }
    }
}

fn is_infeasible(e: &Error) -> bool {
    matches!(e, Error::Infeasible(_) | Error::CapacityExceeded { .. })
}

fn run_cell(n: u64, strategy: SweepStrategy, cfg: &SweepConfig) -> Result<SweepRow> {
    let seed = cfg.seed;
    let budget = measurement_budget(n, cfg.t_factor);
    let size = n as usize;
    match strategy {
        SweepStrategy::MinBinary => {
            // below floor(log2 n) + 1 rows no binary matrix separates n columns
            let m = budget.max(min_binary_rows(n));
            let a = min_cost_binary(size, m as usize)?;
            let mut row = SweepRow::ok(n, m, strategy, l0_cost(&a), m, seed);
            row.lower_bound = Some(exact_min_binary_cost(n, m)?.lower_bound);
            Ok(row)
        }
        SweepStrategy::Bisection => {
            let plan = bisection_plan(size)?;
            let steps = plan.step_count() as u64;
            Ok(SweepRow::ok(
                n,
                steps,
                strategy,
                plan.worst_case_cost(),
                steps,
                seed,
            ))
        }
        SweepStrategy::Gaussian => {
            let a = baseline_matrix(Baseline::Gaussian, size, budget as usize, seed)?;
            Ok(SweepRow::ok(n, budget, strategy, l0_cost(&a), budget, seed))
        }
        SweepStrategy::GridPacking => {
            let p = cfg
                .packing
                .ok_or_else(|| Error::Config("grid-packing needs tau, eps and mu".into()))?;
            match grid_packing(size, budget as usize, p.tau, p.d) {
                Ok(a) => {
                    let mut row = SweepRow::ok(n, budget, strategy, l0_cost(&a), budget, seed);
                    row.lower_bound = Some(noisy_lower_bound(n, budget, &p)?.lower_bound);
                    Ok(row)
                }
                Err(e) if is_infeasible(&e) => Ok(SweepRow::infeasible(n, budget, strategy, seed)),
                Err(e) => Err(e),
            }
        }
    }
}

/// Runs every `(n, strategy)` cell, sorts rows by `(n, strategy name)` and
/// writes the CSV to `cfg.output_path` when set.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut strategies = cfg.strategies.clone();
    strategies.sort();
    strategies.dedup();
    let cells: Vec<(u64, SweepStrategy)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| strategies.iter().map(move |&s| (n, s)))
        .collect();
    let mut rows = cells
        .into_par_iter()
        .map(|(n, s)| run_cell(n, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| (a.n, &a.strategy).cmp(&(b.n, &b.strategy)));

    if let Some(path) = &cfg.output_path {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        write_csv(&rows, &mut out)?;
        out.flush()?;
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<SweepRow>, _>>()?)
}
