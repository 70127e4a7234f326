//! Command-line front end for `l0sense`.
//!
//! [`run`] takes explicit output and error streams so the binary and the
//! tests drive the same code path.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use l0sense::bounds::{
    exact_min_binary_cost, higher_m_report, ksparse_lower_bound, noisy_lower_bound, BoundReport,
    PackingParams,
};
use l0sense::channel::{
    monte_carlo, required_amplitude, separation_distance, ErrorEstimate, Strategy,
};
use l0sense::matrices::{
    baseline_matrix, bisection_plan, cost_report, grid_packing, min_cost_binary, parse, serialize,
    Baseline, SensingMatrix,
};
use l0sense::numkit::{lemma1_verdict, lemma2_verdict, lemma3_verdict};
use l0sense::sweep::{
    doubling_grid, measurement_budget, min_binary_rows, read_csv, run_sweep, SweepConfig, SweepRow,
    SweepStrategy,
};
use l0sense::Error;

pub const EXIT_OK: i32 = 0;
/// A checked property did not hold (`lemmas`).
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "l0sense",
    version,
    about = "Sensing-cost constructions, bounds and simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a sensing matrix and write it in SENSEMAT form.
    Construct(ConstructArgs),
    /// Report the l0 cost and column-weight histogram of a matrix file.
    Cost {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Evaluate a lower bound on the l0 cost.
    Bounds(BoundsArgs),
    /// Estimate the support-recovery error rate by Monte Carlo.
    Simulate(SimulateArgs),
    /// Sweep signal dimensions and write one CSV row per (n, strategy).
    Sweep(SweepArgs),
    /// Check the binomial and entropy inequalities on a grid.
    Lemmas {
        #[arg(long, default_value_t = 64)]
        m_max: u64,
    },
    /// Draw cost_over_nlogn against log2 n from a sweep CSV as SVG.
    Chart {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    MinBinary,
    GridPacking,
    Identity,
    Gaussian,
    BisectionPlan,
}

#[derive(Debug, Args)]
struct ConstructArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n: usize,
    /// Number of rows; defaults to ceil(t log2 n).
    #[arg(long, conflicts_with = "t")]
    m: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[command(flatten)]
    packing: PackingArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PackingArgs {
    /// Column norm budget.
    #[arg(long)]
    tau: Option<f64>,
    /// Target pairwise error probability.
    #[arg(long)]
    eps: Option<f64>,
    /// Signal amplitude.
    #[arg(long)]
    mu: Option<f64>,
}

impl PackingArgs {
    fn params(&self) -> Result<Option<PackingParams>, CliError> {
        match (self.tau, self.eps, self.mu) {
            (None, None, None) => Ok(None),
            (Some(tau), Some(eps), Some(mu)) => Ok(Some(PackingParams::new(tau, eps, mu)?)),
            _ => Err(CliError::usage(
                "--tau, --eps and --mu must be given together",
            )),
        }
    }

    fn require(&self) -> Result<PackingParams, CliError> {
        self.params()?
            .ok_or_else(|| CliError::usage("this needs --tau, --eps and --mu"))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RegimeArg {
    Binary,
    Noisy,
    HigherM,
    Ksparse,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    regime: RegimeArg,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    m: u64,
    #[command(flatten)]
    packing: PackingArgs,
    /// Sparsity for the k-sparse regime.
    #[arg(long)]
    k: Option<u64>,
    /// Overshoot ratio for the higher-m regime; taken from the binary shape when omitted.
    #[arg(long)]
    c_m: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    scale_c: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimStrategy {
    Nonadaptive,
    Bisection,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    strategy: SimStrategy,
    #[arg(long)]
    n: usize,
    /// Non-adaptive matrix; the cheapest binary matrix is used when omitted.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Rows of the default non-adaptive matrix.
    #[arg(long)]
    m: Option<usize>,
    /// Signal amplitude; derived from --eps for bisection when omitted.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    noisy: bool,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target error rate, reported against the confidence interval.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    n_min: u64,
    #[arg(long)]
    n_max: u64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, value_delimiter = ',', default_value = "min-binary,bisection")]
    strategies: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    packing: PackingArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
    Io(io::Error),
    Check(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Check(_) => EXIT_CHECK_FAILED,
            CliError::Io(_) => EXIT_IO,
            CliError::Core(e) => match e {
                Error::Domain(_) | Error::Config(_) => EXIT_USAGE,
                Error::Infeasible(_) | Error::CapacityExceeded { .. } => EXIT_INFEASIBLE,
                Error::InvalidMatrix(_) | Error::Parse { .. } | Error::Io(_) | Error::Csv(_) => {
                    EXIT_IO
                }
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Check(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult = Result<(), CliError>;

/// Runs the binary with process streams; returns the exit code.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `argv` (without the program name) and dispatches. Data goes to
/// `out`, diagnostics to `err`.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = std::iter::once("l0sense".into()).chain(argv.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Construct(a) => construct(&a, out, err),
        Command::Cost { matrix } => cost(&matrix, out),
        Command::Bounds(a) => bounds(&a, out),
        Command::Simulate(a) => simulate(&a, out),
        Command::Sweep(a) => sweep(&a, err),
        Command::Lemmas { m_max } => lemmas(m_max, out),
        Command::Chart { csv, out: path } => chart(&csv, &path, err),
    };
    match result.and_then(|()| out.flush().map_err(CliError::from)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn construct(a: &ConstructArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let m =
        a.m.unwrap_or_else(|| measurement_budget(a.n as u64, a.t.unwrap_or(1.0)) as usize);
    let matrix = match a.kind {
        Kind::MinBinary => min_cost_binary(a.n, m)?,
        Kind::GridPacking => {
            let p = a.packing.require()?;
            let tau = p.tau;
            grid_packing(a.n, m, tau, separation_distance(p.eps, p.mu)?)?
        }
        Kind::Identity => baseline_matrix(Baseline::Identity, a.n, a.n, a.seed)?,
        Kind::Gaussian => baseline_matrix(Baseline::Gaussian, a.n, m, a.seed)?,
        Kind::BisectionPlan => bisection_plan(a.n)?.to_matrix(),
    };
    let text = serialize(&matrix);
    match &a.out {
        Some(path) => {
            fs::write(path, text)?;
            writeln!(
                err,
                "wrote {} x {} {} matrix, l0 cost {}, to {}",
                matrix.rows(),
                matrix.cols(),
                matrix.kind().as_str(),
                matrix.nnz(),
                path.display()
            )?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_matrix(path: &Path) -> Result<SensingMatrix, CliError> {
    Ok(parse(&fs::read(path)?)?)
}

fn cost(path: &Path, out: &mut dyn Write) -> CliResult {
    let a = load_matrix(path)?;
    let r = cost_report(&a);
    writeln!(out, "rows={}", a.rows())?;
    writeln!(out, "cols={}", a.cols())?;
    writeln!(out, "kind={}", a.kind().as_str())?;
    writeln!(out, "l0_cost={}", r.l0_cost)?;
    if let (Some(r0), Some(c_m)) = (r.r0, r.c_m) {
        writeln!(out, "r0={r0}")?;
        writeln!(out, "c_m={c_m}")?;
    }
    for (w, count) in &r.per_weight_counts {
        writeln!(out, "weight[{w}]={count}")?;
    }
    Ok(())
}

fn bounds(a: &BoundsArgs, out: &mut dyn Write) -> CliResult {
    let report = match a.regime {
        RegimeArg::Binary => exact_min_binary_cost(a.n, a.m)?,
        RegimeArg::Noisy => noisy_lower_bound(a.n, a.m, &a.packing.require()?)?,
        RegimeArg::HigherM => {
            let c_m = match a.c_m {
                Some(c) => c,
                None => exact_min_binary_cost(a.n, a.m)?.c_m,
            };
            higher_m_report(a.n, a.m, c_m, a.scale_c)?
        }
        RegimeArg::Ksparse => {
            let k =
                a.k.ok_or_else(|| CliError::usage("the ksparse regime needs --k"))?;
            ksparse_lower_bound(a.n, a.m, k)?
        }
    };
    write_report(&report, out)
}

fn write_report(r: &BoundReport, out: &mut dyn Write) -> CliResult {
    let mut s = String::new();
    let _ = writeln!(s, "regime={}", r.regime.as_str());
    let _ = writeln!(s, "n={}", r.n);
    let _ = writeln!(s, "m={}", r.m);
    let _ = writeln!(s, "r0={}", r.r0);
    let _ = writeln!(s, "c_m={}", r.c_m);
    let _ = writeln!(s, "lower_bound={}", r.lower_bound);
    if let Some(exact) = r.exact_lower_bound {
        let _ = writeln!(s, "exact_lower_bound={exact}");
    }
    for (l, v) in &r.per_weight_capacity {
        let _ = writeln!(s, "capacity[{l}]={v}");
    }
    for (l, v) in &r.per_weight_fill {
        let _ = writeln!(s, "fill[{l}]={v}");
    }
    for (k, v) in &r.diagnostics {
        let _ = writeln!(s, "{k}={v}");
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> CliResult {
    let mu = match (a.mu, a.eps, a.strategy) {
        (Some(mu), _, _) => mu,
        (None, Some(eps), SimStrategy::Bisection) => required_amplitude(a.n, eps)?,
        _ => {
            return Err(CliError::usage(
                "--mu is required unless --eps is given with the bisection strategy",
            ))
        }
    };
    let (estimate, m): (ErrorEstimate, usize) = match a.strategy {
        SimStrategy::Nonadaptive => {
            let matrix = match &a.matrix {
                Some(path) => load_matrix(path)?,
                None => {
                    let m = a.m.unwrap_or(min_binary_rows(a.n as u64) as usize);
                    min_cost_binary(a.n, m)?
                }
            };
            if matrix.cols() != a.n {
                return Err(CliError::usage(format!(
                    "matrix has {} columns but --n is {}",
                    matrix.cols(),
                    a.n
                )));
            }
            let est = monte_carlo(
                Strategy::NonAdaptive(&matrix),
                mu,
                a.noisy,
                a.trials,
                a.seed,
            )?;
            (est, matrix.rows())
        }
        SimStrategy::Bisection => {
            let plan = bisection_plan(a.n)?;
            let est = monte_carlo(Strategy::Bisection(&plan), mu, a.noisy, a.trials, a.seed)?;
            (est, plan.step_count())
        }
    };
    let mut s = String::new();
    let _ = writeln!(s, "n={}", a.n);
    let _ = writeln!(s, "m={m}");
    let _ = writeln!(s, "mu={mu}");
    let _ = writeln!(s, "noisy={}", a.noisy);
    let _ = writeln!(s, "seed={}", a.seed);
    let _ = writeln!(s, "trials={}", estimate.trials);
    let _ = writeln!(s, "failures={}", estimate.failures);
    let _ = writeln!(s, "rate={}", estimate.rate);
    let _ = writeln!(s, "ci_low={}", estimate.ci_low);
    let _ = writeln!(s, "ci_high={}", estimate.ci_high);
    if let Some(eps) = a.eps {
        let _ = writeln!(s, "eps={eps}");
        let _ = writeln!(
            s,
            "consistent_with_eps={}",
            estimate.consistent_with_target(eps)
        );
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn sweep(a: &SweepArgs, err: &mut dyn Write) -> CliResult {
    if a.n_min > a.n_max {
        return Err(CliError::usage(format!(
            "--n-min {} exceeds --n-max {}",
            a.n_min, a.n_max
        )));
    }
    let strategies = a
        .strategies
        .iter()
        .map(|s| s.trim().parse::<SweepStrategy>())
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = SweepConfig {
        n_values: doubling_grid(a.n_min, a.n_max),
        t_factor: a.t,
        strategies,
        packing: a.packing.params()?,
        seed: a.seed,
        output_path: Some(a.out.clone()),
    };
    let rows = run_sweep(&cfg)?;
    writeln!(err, "wrote {} rows to {}", rows.len(), a.out.display())?;
    Ok(())
}

fn lemmas(m_max: u64, out: &mut dyn Write) -> CliResult {
    if m_max < 2 {
        return Err(CliError::usage("--m-max must be at least 2"));
    }
    let mut failures = Vec::new();
    let (mut n1, mut n2, mut n3) = (0u64, 0u64, 0u64);
    for m in 2..=m_max {
        for r in (1..m).filter(|r| 2 * r < m) {
            n1 += 1;
            if !lemma1_verdict(m, r)?.holds {
                failures.push(format!("lemma1 m={m} r={r}"));
            }
        }
        for r in 1..m {
            n2 += 1;
            if !lemma2_verdict(m, r)?.holds {
                failures.push(format!("lemma2 m={m} r={r}"));
            }
        }
    }
    for i in 0..1000u32 {
        let p = 0.001 + 0.498 * f64::from(i) / 999.0;
        let d = 2 + i % 9;
        n3 += 1;
        if !lemma3_verdict(p, d)?.holds {
            failures.push(format!("lemma3 p={p} d={d}"));
        }
    }
    writeln!(out, "lemma1 checked={n1}")?;
    writeln!(out, "lemma2 checked={n2}")?;
    writeln!(out, "lemma3 checked={n3}")?;
    for f in &failures {
        writeln!(out, "failed {f}")?;
    }
    if failures.is_empty() {
        writeln!(out, "status=pass")?;
        Ok(())
    } else {
        writeln!(out, "status=fail")?;
        Err(CliError::Check(format!(
            "{} inequality checks failed",
            failures.len()
        )))
    }
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn chart(csv_path: &Path, svg_path: &Path, err: &mut dyn Write) -> CliResult {
    let rows = read_csv(fs::File::open(csv_path)?)?;
    let svg = render_svg(&rows);
    fs::write(svg_path, svg)?;
    writeln!(err, "wrote {}", svg_path.display())?;
    Ok(())
}

/// Line chart of `cost_over_nlogn` against `log2 n`, one series per strategy.
pub fn render_svg(rows: &[SweepRow]) -> String {
    let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.status == "ok") {
        if let Some(y) = r.cost_over_nlogn {
            series
                .entry(&r.strategy)
                .or_default()
                .push(((r.n as f64).log2(), y));
        }
    }
    let points = series.values().flatten();
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - y / (y1 * 1.05) * (h - 2.0 * pad);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {top} V{bot} H{right}" stroke="black" fill="none"/>"#,
        top = pad,
        bot = h - pad,
        right = w - pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">log2 n</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})" text-anchor="middle">cost / (n log2 n)</text>"#,
        h / 2.0,
        h / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{x0}</text>"#,
        px(x0),
        h - pad + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{x1}</text>"#,
        px(x1),
        h - pad + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y1:.3}</text>"#,
        pad - 4.0,
        py(y1) + 4.0
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="2"/>"#,
            path.join(" ")
        );
        let ly = pad + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-size="12" fill="{color}">{name}</text>"#,
            w - pad - 90.0
        );
    }
    s.push_str("</svg>\n");
    s
}
