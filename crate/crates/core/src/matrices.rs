//! Sensing matrix constructions and l0 accounting.
//!
//! Matrices are stored column-compressed: the l0 cost is the number of
//! stored entries, and decoding only ever needs whole columns.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::ops::Range;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{bounds, Error, Result};

const MAGIC: &str = "SENSEMAT 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixKind {
    Binary,
    Real,
}

impl MatrixKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::Binary => "binary",
            MatrixKind::Real => "real",
        }
    }
}

/// Sparse `rows x cols` sensing matrix. Only nonzero entries are stored and
/// every stored value of a binary matrix is `1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    rows: usize,
    cols: usize,
    kind: MatrixKind,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Borrowed view of one column.
#[derive(Debug, Clone, Copy)]
pub struct Column<'a> {
    pub rows: &'a [usize],
    pub values: &'a [f64],
}

impl Column<'_> {
    pub fn weight(&self) -> usize {
        self.rows.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

impl SensingMatrix {
    /// Builds a matrix from `(row, col, value)` triplets in any order.
    pub fn from_triplets<I>(rows: usize, cols: usize, kind: MatrixKind, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "dimensions must be positive, got {rows} x {cols}"
            )));
        }
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        entries.sort_by_key(|&(r, c, _)| (c, r));
        for (i, &(r, c, v)) in entries.iter().enumerate() {
            if r >= rows || c >= cols {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({r}, {c}) outside {rows} x {cols}"
                )));
            }
            check_value(kind, v).map_err(Error::InvalidMatrix)?;
            if i > 0 && (entries[i - 1].0, entries[i - 1].1) == (r, c) {
                return Err(Error::InvalidMatrix(format!("duplicate entry ({r}, {c})")));
            }
        }
        Ok(Self::from_sorted(rows, cols, kind, entries))
    }

    /// `entries` must be sorted by `(col, row)` and already validated.
    fn from_sorted(
        rows: usize,
        cols: usize,
        kind: MatrixKind,
        entries: Vec<(usize, usize, f64)>,
    ) -> Self {
        let mut col_ptr = vec![0usize; cols + 1];
        for &(_, c, _) in &entries {
            col_ptr[c + 1] += 1;
        }
        for c in 0..cols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let (row_idx, values) = entries.into_iter().map(|(r, _, v)| (r, v)).unzip();
        SensingMatrix {
            rows,
            cols,
            kind,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Builds from per-column row lists (rows ascending within each column).
    fn from_columns(rows: usize, kind: MatrixKind, columns: Vec<Vec<(usize, f64)>>) -> Self {
        let cols = columns.len();
        let mut col_ptr = Vec::with_capacity(cols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for column in columns {
            for (r, v) in column {
                row_idx.push(r);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        SensingMatrix {
            rows,
            cols,
            kind,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    /// Number of stored nonzero entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, j: usize) -> Column<'_> {
        let span = self.col_ptr[j]..self.col_ptr[j + 1];
        Column {
            rows: &self.row_idx[span.clone()],
            values: &self.values[span],
        }
    }

    pub fn columns(&self) -> impl Iterator<Item = Column<'_>> + '_ {
        (0..self.cols).map(move |j| self.column(j))
    }

    pub fn dense_column(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        let col = self.column(j);
        for (&r, &v) in col.rows.iter().zip(col.values) {
            out[r] = v;
        }
        out
    }

    /// Entries as `(row, col, value)`, sorted by `(col, row)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.cols).flat_map(move |j| {
            let col = self.column(j);
            col.rows
                .iter()
                .zip(col.values)
                .map(move |(&r, &v)| (r, j, v))
        })
    }

    /// Index pair of the first repeated column, if any.
    pub fn find_duplicate_columns(&self) -> Option<(usize, usize)> {
        let mut seen: HashMap<(Vec<usize>, Vec<u64>), usize> = HashMap::with_capacity(self.cols);
        for (j, col) in self.columns().enumerate() {
            let key = (
                col.rows.to_vec(),
                col.values.iter().map(|v| v.to_bits()).collect(),
            );
            if let Some(&i) = seen.get(&key) {
                return Some((i, j));
            }
            seen.insert(key, j);
        }
        None
    }

    /// True when all columns are pairwise distinct and none is zero.
    pub fn has_distinct_nonzero_columns(&self) -> bool {
        self.columns().all(|c| c.weight() > 0) && self.find_duplicate_columns().is_none()
    }
}

fn check_value(kind: MatrixKind, v: f64) -> std::result::Result<(), String> {
    if v == 0.0 {
        return Err("zero value".into());
    }
    if !v.is_finite() {
        return Err(format!("non-finite value {v}"));
    }
    if kind == MatrixKind::Binary && v != 1.0 {
        return Err(format!("binary matrix holds value {v}"));
    }
    Ok(())
}

/// Nonzero count of the matrix, `sum_i ||A_i||_0`.
pub fn l0_cost(a: &SensingMatrix) -> u64 {
    a.nnz() as u64
}

/// l0 cost with its per-column-weight histogram. `r0` and `c_m` describe the
/// cheapest binary matrix of the same shape and are absent when no binary
/// matrix of that shape has distinct nonzero columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub l0_cost: u64,
    pub r0: Option<u64>,
    pub c_m: Option<f64>,
    pub per_weight_counts: Vec<(usize, u64)>,
}

pub fn cost_report(a: &SensingMatrix) -> CostReport {
    let mut hist: BTreeMap<usize, u64> = BTreeMap::new();
    for col in a.columns() {
        *hist.entry(col.weight()).or_default() += 1;
    }
    let shape = bounds::exact_min_binary_cost(a.cols() as u64, a.rows() as u64).ok();
    CostReport {
        l0_cost: l0_cost(a),
        r0: shape.as_ref().map(|r| r.r0),
        c_m: shape.as_ref().map(|r| r.c_m),
        per_weight_counts: hist.into_iter().collect(),
    }
}

/// Whether `n` distinct nonzero binary columns of length `m` exist.
pub fn binary_feasible(n: u64, m: u64) -> bool {
    m >= 64 || n < (1u64 << m)
}

/// Cheapest binary matrix with `n` distinct nonzero columns of length `m`:
/// all weight-1 columns, then weight 2, and so on. Supports within a weight
/// class come in lexicographic order.
pub fn min_cost_binary(n: usize, m: usize) -> Result<SensingMatrix> {
    if n == 0 || m == 0 {
        return Err(Error::domain(format!(
            "min_cost_binary needs n, m >= 1, got n = {n}, m = {m}"
        )));
    }
    if !binary_feasible(n as u64, m as u64) {
        return Err(Error::Infeasible(format!(
            "n = {n} exceeds 2^m - 1 distinct nonzero binary columns for m = {m}"
        )));
    }
    let columns: Vec<Vec<(usize, f64)>> = (1..=m)
        .flat_map(|w| (0..m).combinations(w))
        .take(n)
        .map(|support| support.into_iter().map(|r| (r, 1.0)).collect())
        .collect();
    Ok(SensingMatrix::from_columns(m, MatrixKind::Binary, columns))
}

/// One weight class of the grid packing: `levels` grid values per nonzero
/// coordinate and `columns = C(m, weight) * levels^weight` (saturating).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridClass {
    pub weight: usize,
    pub levels: u64,
    pub columns: u128,
}

/// Largest `k` with `k * d * sqrt(weight) <= tau`.
fn grid_levels(weight: usize, tau: f64, d: f64) -> u64 {
    let w = weight as f64;
    let fits = |k: f64| k * k * w * d * d <= tau * tau;
    let mut k = (tau / (d * w.sqrt())).floor();
    while fits(k + 1.0) {
        k += 1.0;
    }
    while k > 0.0 && !fits(k) {
        k -= 1.0;
    }
    k as u64
}

fn check_packing_args(tau: f64, d: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0 && d.is_finite() && d > 0.0) {
        return Err(Error::domain(format!(
            "grid packing needs finite tau > 0 and d > 0, got tau = {tau}, d = {d}"
        )));
    }
    Ok(())
}

/// Nonempty weight classes of the grid packing in ascending weight.
pub fn grid_classes(m: usize, tau: f64, d: f64) -> Result<Vec<GridClass>> {
    check_packing_args(tau, d)?;
    let mut classes = Vec::new();
    let mut supports: u128 = 1;
    for weight in 1..=m {
        let levels = grid_levels(weight, tau, d);
        if levels == 0 {
            break;
        }
        // C(m, weight) from C(m, weight - 1); saturated values stay saturated
        supports = if supports == u128::MAX {
            u128::MAX
        } else {
            supports
                .checked_mul((m - weight + 1) as u128)
                .map_or(u128::MAX, |x| x / weight as u128)
        };
        let per_support = (levels as u128)
            .checked_pow(weight as u32)
            .unwrap_or(u128::MAX);
        classes.push(GridClass {
            weight,
            levels,
            columns: supports.saturating_mul(per_support),
        });
    }
    Ok(classes)
}

/// Total number of columns the grid packing can supply (saturating).
pub fn grid_capacity(m: usize, tau: f64, d: f64) -> Result<u128> {
    Ok(grid_classes(m, tau, d)?
        .iter()
        .fold(0u128, |acc, c| acc.saturating_add(c.columns)))
}

/// Real matrix of `n` columns with norm at most `tau` and pairwise distance
/// at least `d`, filled in ascending weight order. A weight-`l` column takes
/// values from `{d, 2d, ..., k d}` on its support with `k = floor(tau / (d sqrt l))`;
/// supports and then coordinate tuples are enumerated lexicographically.
pub fn grid_packing(n: usize, m: usize, tau: f64, d: f64) -> Result<SensingMatrix> {
    if n == 0 || m == 0 {
        return Err(Error::domain(format!(
            "grid_packing needs n, m >= 1, got n = {n}, m = {m}"
        )));
    }
    let classes = grid_classes(m, tau, d)?;
    let capacity = classes
        .iter()
        .fold(0u128, |acc, c| acc.saturating_add(c.columns));
    if (n as u128) > capacity {
        return Err(Error::CapacityExceeded {
            requested: n as u64,
            capacity: capacity as f64,
        });
    }
    let columns: Vec<Vec<(usize, f64)>> = classes
        .iter()
        .flat_map(|class| {
            let grid = 1..=class.levels;
            (0..m).combinations(class.weight).flat_map(move |support| {
                std::iter::repeat_n(grid.clone(), class.weight)
                    .multi_cartesian_product()
                    .map(move |coords| {
                        support
                            .iter()
                            .zip(coords)
                            .map(|(&r, c)| (r, c as f64 * d))
                            .collect::<Vec<_>>()
                    })
            })
        })
        .take(n)
        .collect();
    Ok(SensingMatrix::from_columns(m, MatrixKind::Real, columns))
}

/// One measurement of a bisection plan: the active block and the half of it
/// that is sensed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BisectionStep {
    pub block: Range<usize>,
    pub sensed: Range<usize>,
}

impl BisectionStep {
    pub fn sensed_len(&self) -> usize {
        self.sensed.len()
    }
}

/// Adaptive bisection schedule over `0..n`. Each measurement senses the
/// first `ceil(b/2)` indices of the active block of size `b`.
///
/// `steps` lists the path on which the sensed half always survives. That
/// path has the largest blocks, so its cost is the worst case over all
/// supports, and its length is `ceil(log2 n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptivePlan {
    n: usize,
    steps: Vec<BisectionStep>,
}

/// `ceil(log2 n)` for `n >= 1`.
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        u64::BITS - (n - 1).leading_zeros()
    }
}

pub fn bisection_plan(n: usize) -> Result<AdaptivePlan> {
    if n < 2 {
        return Err(Error::domain(format!(
            "bisection plan needs n >= 2, got {n}"
        )));
    }
    let mut steps = Vec::with_capacity(ceil_log2(n as u64) as usize);
    let mut block = 0..n;
    while let Some(step) = AdaptivePlan::split(&block) {
        block = step.sensed.clone();
        steps.push(step);
    }
    Ok(AdaptivePlan { n, steps })
}

impl AdaptivePlan {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> &[BisectionStep] {
        &self.steps
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// The measurement taken on `block`, or `None` once one index remains.
    pub fn split(block: &Range<usize>) -> Option<BisectionStep> {
        let len = block.len();
        if len < 2 {
            return None;
        }
        let mid = block.start + len.div_ceil(2);
        Some(BisectionStep {
            sensed: block.start..mid,
            block: block.clone(),
        })
    }

    /// Largest l0 cost over all realized paths.
    pub fn worst_case_cost(&self) -> u64 {
        self.steps.iter().map(|s| s.sensed_len() as u64).sum()
    }

    /// Steps taken when the nonzero entry sits at `support` and every
    /// measurement is read correctly.
    pub fn path_for(&self, support: usize) -> Vec<BisectionStep> {
        let mut path = Vec::new();
        let mut block = 0..self.n;
        while let Some(step) = Self::split(&block) {
            block = if step.sensed.contains(&support) {
                step.sensed.clone()
            } else {
                step.sensed.end..step.block.end
            };
            path.push(step);
        }
        path
    }

    /// Worst-case path as a binary matrix, one row per step.
    pub fn to_matrix(&self) -> SensingMatrix {
        let entries = self
            .steps
            .iter()
            .enumerate()
            .flat_map(|(t, s)| s.sensed.clone().map(move |c| (t, c, 1.0)))
            .sorted_by_key(|&(r, c, _)| (c, r))
            .collect();
        SensingMatrix::from_sorted(self.steps.len(), self.n, MatrixKind::Binary, entries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Identity,
    Gaussian,
}

/// Reference matrices: the `n x n` identity, or a dense `m x n` matrix of
/// i.i.d. standard normals drawn column by column from a ChaCha8 stream
/// seeded with `seed`. Exact zeros from the generator are not stored.
pub fn baseline_matrix(kind: Baseline, n: usize, m: usize, seed: u64) -> Result<SensingMatrix> {
    if n == 0 || m == 0 {
        return Err(Error::domain(format!(
            "baseline needs n, m >= 1, got n = {n}, m = {m}"
        )));
    }
    match kind {
        Baseline::Identity => {
            if m != n {
                return Err(Error::domain(format!(
                    "identity needs m = n, got n = {n}, m = {m}"
                )));
            }
            let columns = (0..n).map(|j| vec![(j, 1.0)]).collect();
            Ok(SensingMatrix::from_columns(m, MatrixKind::Binary, columns))
        }
        Baseline::Gaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let columns = (0..n)
                .map(|_| {
                    (0..m)
                        .filter_map(|r| {
                            let v: f64 = rng.sample(StandardNormal);
                            (v != 0.0).then_some((r, v))
                        })
                        .collect()
                })
                .collect();
            Ok(SensingMatrix::from_columns(m, MatrixKind::Real, columns))
        }
    }
}

/// Renders the `SENSEMAT 1` text form. Real values use the shortest decimal
/// that parses back to the same double.
pub fn serialize(a: &SensingMatrix) -> String {
    let mut out = String::with_capacity(64 + a.nnz() * 12);
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "kind {}", a.kind().as_str());
    let _ = writeln!(out, "rows {}", a.rows());
    let _ = writeln!(out, "cols {}", a.cols());
    let _ = writeln!(out, "nnz {}", a.nnz());
    for (r, c, v) in a.entries() {
        match a.kind() {
            MatrixKind::Binary => {
                let _ = writeln!(out, "{r} {c} 1");
            }
            MatrixKind::Real => {
                let _ = writeln!(out, "{r} {c} {v}");
            }
        }
    }
    out
}

fn header_field<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<(usize, &'a str)> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::parse(0, format!("missing `{key}` header line")))?;
    match line.split_once(' ') {
        Some((k, v)) if k == key && !v.is_empty() => Ok((no, v)),
        _ => Err(Error::parse(
            no,
            format!("expected `{key} <value>`, found `{line}`"),
        )),
    }
}

fn header_count<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<usize> {
    let (no, v) = header_field(lines, key)?;
    v.parse().map_err(|_| {
        Error::parse(
            no,
            format!("`{key}` must be a nonnegative integer, found `{v}`"),
        )
    })
}

/// Parses the `SENSEMAT 1` text form. Entries must appear sorted by
/// `(col, row)`.
pub fn parse(bytes: &[u8]) -> Result<SensingMatrix> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::parse(0, "input is not UTF-8"))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    match lines.next() {
        Some((_, MAGIC)) => {}
        Some((no, other)) => {
            return Err(Error::parse(
                no,
                format!("expected `{MAGIC}`, found `{other}`"),
            ))
        }
        None => return Err(Error::parse(1, "empty input")),
    }
    let (no, kind) = header_field(&mut lines, "kind")?;
    let kind = match kind {
        "binary" => MatrixKind::Binary,
        "real" => MatrixKind::Real,
        other => return Err(Error::parse(no, format!("unknown kind `{other}`"))),
    };
    let rows = header_count(&mut lines, "rows")?;
    let cols = header_count(&mut lines, "cols")?;
    let nnz = header_count(&mut lines, "nnz")?;
    if rows == 0 || cols == 0 {
        return Err(Error::parse(4, "rows and cols must be positive"));
    }

    let mut entries = Vec::with_capacity(nnz);
    let mut prev: Option<(usize, usize)> = None;
    for _ in 0..nnz {
        let (no, line) = lines.next().ok_or_else(|| {
            Error::parse(
                5 + entries.len() + 1,
                format!("expected {nnz} entries, found {}", entries.len()),
            )
        })?;
        let fields: Vec<&str> = line.split(' ').collect();
        let [r, c, v] = fields[..] else {
            return Err(Error::parse(
                no,
                format!("expected `<row> <col> <value>`, found `{line}`"),
            ));
        };
        let r: usize = r
            .parse()
            .map_err(|_| Error::parse(no, format!("bad row index `{r}`")))?;
        let c: usize = c
            .parse()
            .map_err(|_| Error::parse(no, format!("bad column index `{c}`")))?;
        let value: f64 = v
            .parse()
            .map_err(|_| Error::parse(no, format!("bad value `{v}`")))?;
        if value == 0.0 {
            return Err(Error::parse(no, "zero value"));
        }
        if kind == MatrixKind::Binary && v != "1" {
            return Err(Error::parse(
                no,
                format!("binary value must be `1`, found `{v}`"),
            ));
        }
        check_value(kind, value).map_err(|m| Error::parse(no, m))?;
        if r >= rows || c >= cols {
            return Err(Error::parse(
                no,
                format!("index ({r}, {c}) out of range for {rows} x {cols}"),
            ));
        }
        match prev {
            Some(p) if p == (c, r) => {
                return Err(Error::parse(no, format!("duplicate entry ({r}, {c})")))
            }
            Some(p) if p > (c, r) => {
                return Err(Error::parse(no, "entries not sorted by (col, row)"));
            }
            _ => {}
        }
        prev = Some((c, r));
        entries.push((r, c, value));
    }
    if let Some((no, line)) = lines.next() {
        return Err(Error::parse(
            no,
            format!("unexpected content after {nnz} entries: `{line}`"),
        ));
    }
    Ok(SensingMatrix::from_sorted(rows, cols, kind, entries))
}

/// Column supports as index sets, for inspection and tests.
pub fn column_supports(a: &SensingMatrix) -> Vec<Vec<usize>> {
    a.columns().map(|c| c.rows.to_vec()).collect()
}

/// Checks `||A_i||_2 <= tau + tol` for every column and
/// `||A_i - A_j||_2 >= d - tol` for every pair, by direct comparison.
pub fn verify_packing(a: &SensingMatrix, tau: f64, d: f64, tol: f64) -> bool {
    let dense: Vec<Vec<f64>> = (0..a.cols()).map(|j| a.dense_column(j)).collect();
    let norm_ok = dense
        .iter()
        .all(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt() <= tau + tol);
    norm_ok
        && dense.iter().tuple_combinations().all(|(x, y)| {
            let dist = x
                .iter()
                .zip(y)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            dist >= d - tol
        })
}
