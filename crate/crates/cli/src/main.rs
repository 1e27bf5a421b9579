//! Command-line interface: `fit` for inference on a CSV dataset, `simulate`
//! for grid experiments, `bands` for many-target simultaneous bands, and
//! `score-trace` to dump the score statistic over its search interval.

mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use orthomed::bands::{fit_all_targets, multiplier_bootstrap, simultaneous_bands};
use orthomed::data::{RngStream, Sample};
use orthomed::ortho::{run_algorithm, Algorithm, OrthoConfig};
use orthomed::sim::{
    build_grid, run_grid, table_to_csv, table_to_long_csv, Method, ThetaProfile,
};
use orthomed::Error;

#[derive(Debug, Parser)]
#[command(
    name = "orthomed",
    version,
    about = "Orthogonal post-selection inference for high-dimensional median regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one target coefficient on a CSV dataset (columns y, d, x1..xp).
    Fit(FitArgs),
    /// Monte Carlo grid experiment over (R2y, R2d) designs.
    Simulate(SimulateArgs),
    /// Simultaneous confidence bands for many targets (columns y, d1..dk, u1..um).
    Bands(BandsArgs),
    /// Dump the score statistic trace (alpha, n L_n) as CSV.
    ScoreTrace(FitArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum AlgorithmArg {
    Alg1,
    Alg2,
    Double,
    Onestep,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Alg1 => Algorithm::Alg1,
            AlgorithmArg::Alg2 => Algorithm::Alg2,
            AlgorithmArg::Double => Algorithm::Alg3,
            AlgorithmArg::Onestep => Algorithm::OneStep,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum MethodArg {
    Naive,
    Alg1,
    Alg2,
    Double,
    Score,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Naive => Method::NaivePost,
            MethodArg::Alg1 => Method::OrthoAlg1,
            MethodArg::Alg2 => Method::OrthoAlg2,
            MethodArg::Double => Method::DoubleSel,
            MethodArg::Score => Method::ScoreTest,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum ProfileArg {
    Sparse,
    Polydecay,
}

#[derive(Debug, Args, Serialize)]
struct CommonArgs {
    /// Tail probability for both penalty rules; defaults to 0.1/log n.
    #[arg(long)]
    gamma: Option<f64>,
    /// Slack constant of the pivotal median-regression penalty.
    #[arg(long, default_value_t = 1.1)]
    c0: f64,
    /// Slack constant of the lasso penalty.
    #[arg(long, default_value_t = 1.1)]
    c: f64,
    /// Miscoverage level: intervals target probability 1 - xi.
    #[arg(long, default_value_t = 0.05)]
    xi: f64,
    /// Base seed for all random streams.
    #[arg(long, default_value_t = 20140331)]
    seed: u64,
    /// Worker threads (falls back to ORTHOMED_THREADS, then all cores).
    /// Never affects results, only wall time; echoed under `meta`.
    #[arg(long)]
    #[serde(skip_serializing)]
    threads: Option<usize>,
    /// Exempt an all-ones control column from the penalty.
    #[arg(long)]
    no_penalty_intercept: bool,
    /// Kernel bandwidth scale for the variance plug-ins.
    #[arg(long, default_value_t = 1.0)]
    bandwidth_scale: f64,
    /// Lasso loading-refinement rounds (2 = initial plus one refinement).
    #[arg(long, default_value_t = 2)]
    lasso_rounds: usize,
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    /// Input CSV with header y, d, x1..xp.
    #[arg(long)]
    input: PathBuf,
    /// Output path for the JSON report (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Alg1)]
    algorithm: AlgorithmArg,
    /// Also dump the score trace CSV here.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// Output path for the JSON report (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the wide metrics table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the long (plot-friendly) metrics table as CSV.
    #[arg(long)]
    long_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 250)]
    n: usize,
    #[arg(long, default_value_t = 300)]
    p: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha0: f64,
    /// Replications per design.
    #[arg(long, default_value_t = 200)]
    reps: u64,
    /// Comma-separated R-squared values for both axes of the grid
    /// (default desk grid 0,0.3,0.5,0.7,0.9).
    #[arg(long)]
    grid: Option<String>,
    /// Use the paper-scale 10x10 grid with 500 replications (multi-hour run).
    #[arg(long)]
    full: bool,
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = vec![MethodArg::Naive, MethodArg::Alg1, MethodArg::Score])]
    methods: Vec<MethodArg>,
    #[arg(long, value_enum, default_value_t = ProfileArg::Sparse)]
    profile: ProfileArg,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args, Serialize)]
struct BandsArgs {
    /// Input CSV with header y, d1..dk, u1..um (u columns optional).
    #[arg(long)]
    input: PathBuf,
    /// Output path for the JSON report (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the band table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Bootstrap draws.
    #[arg(long, default_value_t = 2000)]
    bootstrap_draws: usize,
    /// Known true coefficients (comma-separated) to add a covered flag.
    #[arg(long)]
    truth: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

fn validate_common(c: &CommonArgs) -> Result<(), String> {
    let mut problems = Vec::new();
    if !(c.xi > 0.0 && c.xi < 1.0) {
        problems.push(format!("--xi must lie in (0,1), got {}", c.xi));
    }
    if let Some(g) = c.gamma {
        if !(g > 0.0 && g < 1.0) {
            problems.push(format!("--gamma must lie in (0,1), got {g}"));
        }
    }
    if !(c.c0 > 1.0) {
        problems.push(format!("--c0 must exceed 1, got {}", c.c0));
    }
    if !(c.c > 1.0) {
        problems.push(format!("--c must exceed 1, got {}", c.c));
    }
    if c.threads == Some(0) {
        problems.push("--threads must be at least 1".into());
    }
    if !(c.bandwidth_scale > 0.0) {
        problems.push(format!("--bandwidth-scale must be positive, got {}", c.bandwidth_scale));
    }
    if c.lasso_rounds == 0 {
        problems.push("--lasso-rounds must be at least 1".into());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems.join("; "))
    }
}

fn ortho_config(c: &CommonArgs, algorithm: Algorithm) -> OrthoConfig {
    OrthoConfig {
        algorithm,
        gamma: c.gamma,
        c0: c.c0,
        c: c.c,
        xi: c.xi,
        pivotal_sims: 1000,
        lasso_rounds: c.lasso_rounds,
        interval_scale: 10.0,
        bandwidth_scale: c.bandwidth_scale,
        exempt_intercept: c.no_penalty_intercept,
    }
}

fn resolve_threads(cli: Option<usize>) -> Option<usize> {
    cli.or_else(|| std::env::var("ORTHOMED_THREADS").ok().and_then(|v| v.parse().ok()))
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

fn write_output(path: &Option<PathBuf>, contents: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Exit 1 for compute/data problems, 2 for usage problems.
fn fail(msg: &str, code: u8) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Fit(args) => run_fit(args, false),
        Command::ScoreTrace(args) => run_fit(args, true),
        Command::Simulate(args) => run_simulate(args),
        Command::Bands(args) => run_bands(args),
    }
}

fn run_fit(args: FitArgs, trace_mode: bool) -> ExitCode {
    if let Err(msg) = validate_common(&args.common) {
        return fail(&msg, 2);
    }
    let t0 = Instant::now();
    let sample = match Sample::from_csv_path(&args.input) {
        Ok(s) => s,
        Err(e) => return fail(&e.to_string(), 1),
    };
    let config = ortho_config(&args.common, args.algorithm.into());
    let seed = args.common.seed;
    let threads = resolve_threads(args.common.threads);
    let result = with_pool(threads, || {
        run_algorithm(&sample, &config, &mut RngStream::new(seed, 0).rng())
    });
    let result = match result {
        Ok(r) => r,
        Err(e) => return fail(&e.to_string(), 1),
    };

    if trace_mode || args.trace_csv.is_some() {
        let mut csv = String::from("alpha,n_ln\n");
        for (a, v) in &result.score_trace {
            csv.push_str(&format!("{a},{v}\n"));
        }
        let target = if trace_mode { &args.output } else { &args.trace_csv };
        if let Err(e) = write_output(target, &csv) {
            return fail(&e.to_string(), 1);
        }
        if trace_mode {
            return ExitCode::SUCCESS;
        }
    }

    let json = report::render("fit", seed, &args, &result, t0.elapsed().as_millis(), threads);
    match write_output(&args.output, &json) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e.to_string(), 1),
    }
}

#[derive(Debug, Serialize)]
struct DesignProvenance {
    r2y: f64,
    r2d: f64,
    seed: u64,
    reps: u64,
}

fn run_simulate(args: SimulateArgs) -> ExitCode {
    if let Err(msg) = validate_common(&args.common) {
        return fail(&msg, 2);
    }
    if args.full && args.grid.is_some() {
        return fail("--full and --grid are mutually exclusive", 2);
    }
    let t0 = Instant::now();
    let profile = match args.profile {
        ProfileArg::Sparse => ThetaProfile::ExactSparse10,
        ProfileArg::Polydecay => ThetaProfile::PolyDecayAll,
    };
    let config = ortho_config(&args.common, Algorithm::Alg1);
    let methods: Vec<Method> = args.methods.iter().map(|&m| m.into()).collect();
    if methods.is_empty() {
        return fail("--methods must name at least one method", 2);
    }
    let reps = if args.full { 500 } else { args.reps };

    let designs = if let Some(grid) = &args.grid {
        let vals: Result<Vec<f64>, _> = grid.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let vals = match vals {
            Ok(v) if !v.is_empty() => v,
            _ => return fail("--grid must be a comma-separated list of floats", 2),
        };
        if let Some(bad) = vals.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return fail(&format!("--grid values must lie in [0,1), got {bad}"), 2);
        }
        let mut designs = Vec::new();
        let mut idx = 0u64;
        for &r2y in &vals {
            for &r2d in &vals {
                designs.push(orthomed::sim::DesignSpec {
                    n: args.n,
                    p: args.p,
                    rho: args.rho,
                    r2y,
                    r2d,
                    alpha0: args.alpha0,
                    profile,
                    seed: args.common.seed.wrapping_add(idx),
                });
                idx += 1;
            }
        }
        designs
    } else {
        build_grid(args.n, args.p, args.rho, args.alpha0, profile, args.common.seed, args.full)
    };

    let threads = resolve_threads(args.common.threads);
    let run = with_pool(threads, || run_grid(&designs, reps, &methods, &config));
    let (table, _cells) = match run {
        Ok(r) => r,
        Err(e) => return fail(&e.to_string(), 1),
    };

    if let Some(p) = &args.csv {
        if let Err(e) = std::fs::write(p, table_to_csv(&table)) {
            return fail(&e.to_string(), 1);
        }
    }
    if let Some(p) = &args.long_csv {
        if let Err(e) = std::fs::write(p, table_to_long_csv(&table)) {
            return fail(&e.to_string(), 1);
        }
    }

    let provenance: Vec<DesignProvenance> = designs
        .iter()
        .map(|d| DesignProvenance { r2y: d.r2y, r2d: d.r2d, seed: d.seed, reps })
        .collect();
    #[derive(Serialize)]
    struct SimResult<'a> {
        provenance: &'a [DesignProvenance],
        table: &'a orthomed::sim::GridTable,
    }
    let json = report::render(
        "simulate",
        args.common.seed,
        &args,
        SimResult { provenance: &provenance, table: &table },
        t0.elapsed().as_millis(),
        threads,
    );
    match write_output(&args.output, &json) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e.to_string(), 1),
    }
}

/// CSV with header y, d1..dk, u1..um; an all-ones intercept column is always
/// appended to the controls.
fn read_bands_csv(path: &PathBuf) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>), Error> {
    let file = std::fs::File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr.headers().map_err(|e| Error::Csv(format!("reading header: {e}")))?.clone();
    let mut y_col = None;
    let mut d_cols: Vec<(usize, usize)> = Vec::new();
    let mut u_cols: Vec<(usize, usize)> = Vec::new();
    for (idx, name) in headers.iter().enumerate() {
        if name == "y" {
            if y_col.replace(idx).is_some() {
                return Err(Error::Csv("duplicate column y".into()));
            }
        } else if let Some(num) = name.strip_prefix('d').and_then(|s| s.parse::<usize>().ok()) {
            if d_cols.iter().any(|&(k, _)| k == num) {
                return Err(Error::Csv(format!("duplicate column d{num}")));
            }
            d_cols.push((num, idx));
        } else if let Some(num) = name.strip_prefix('u').and_then(|s| s.parse::<usize>().ok()) {
            if u_cols.iter().any(|&(k, _)| k == num) {
                return Err(Error::Csv(format!("duplicate column u{num}")));
            }
            u_cols.push((num, idx));
        } else {
            return Err(Error::Csv(format!("unrecognized column {name:?}")));
        }
    }
    let y_col = y_col.ok_or_else(|| Error::Csv("missing column y".into()))?;
    if d_cols.is_empty() {
        return Err(Error::Csv("need at least one target column d1..dk".into()));
    }
    d_cols.sort_unstable();
    u_cols.sort_unstable();
    for (want, &(got, _)) in (1..).zip(d_cols.iter()) {
        if got != want {
            return Err(Error::Csv(format!("d columns must be consecutive: missing d{want}")));
        }
    }
    for (want, &(got, _)) in (1..).zip(u_cols.iter()) {
        if got != want {
            return Err(Error::Csv(format!("u columns must be consecutive: missing u{want}")));
        }
    }
    let mut y = Vec::new();
    let mut d_data: Vec<Vec<f64>> = vec![Vec::new(); d_cols.len()];
    let mut u_data: Vec<Vec<f64>> = vec![Vec::new(); u_cols.len()];
    for (row_idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(format!("row {}: {e}", row_idx + 1)))?;
        let parse = |field: &str| -> Result<f64, Error> {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Csv(format!("row {}: bad float {field:?}", row_idx + 1)))?;
            if !v.is_finite() {
                return Err(Error::Csv(format!("row {}: non-finite value", row_idx + 1)));
            }
            Ok(v)
        };
        y.push(parse(&rec[y_col])?);
        for (slot, &(_, idx)) in d_data.iter_mut().zip(d_cols.iter()) {
            slot.push(parse(&rec[idx])?);
        }
        for (slot, &(_, idx)) in u_data.iter_mut().zip(u_cols.iter()) {
            slot.push(parse(&rec[idx])?);
        }
    }
    let n = y.len();
    if n < 2 {
        return Err(Error::Csv("need at least 2 data rows".into()));
    }
    let dmat =
        DMatrix::from_columns(&d_data.into_iter().map(DVector::from_vec).collect::<Vec<_>>());
    let mut u_vecs: Vec<DVector<f64>> = u_data.into_iter().map(DVector::from_vec).collect();
    u_vecs.push(DVector::from_element(n, 1.0));
    let umat = DMatrix::from_columns(&u_vecs);
    Ok((DVector::from_vec(y), dmat, umat))
}

fn run_bands(args: BandsArgs) -> ExitCode {
    if let Err(msg) = validate_common(&args.common) {
        return fail(&msg, 2);
    }
    if args.bootstrap_draws < 200 {
        return fail("--bootstrap-draws must be at least 200", 2);
    }
    let truth: Option<Vec<f64>> = match &args.truth {
        None => None,
        Some(t) => {
            let parsed: Result<Vec<f64>, _> =
                t.split(',').map(|s| s.trim().parse::<f64>()).collect();
            match parsed {
                Ok(v) => Some(v),
                Err(_) => return fail("--truth must be a comma-separated list of floats", 2),
            }
        }
    };
    let t0 = Instant::now();
    let (y, dmat, umat) = match read_bands_csv(&args.input) {
        Ok(v) => v,
        Err(e) => return fail(&e.to_string(), 1),
    };
    if let Some(t) = &truth {
        if t.len() != dmat.ncols() {
            return fail(
                &format!("--truth has {} entries but there are {} targets", t.len(), dmat.ncols()),
                2,
            );
        }
    }
    let config = ortho_config(&args.common, Algorithm::Alg1);
    let seed = args.common.seed;
    let threads = resolve_threads(args.common.threads);
    let run = with_pool(threads, || -> Result<_, Error> {
        let stream = RngStream::new(seed, 0);
        let (est, infl) = fit_all_targets(&y, &dmat, &umat, &config, &stream)?;
        let boot_stream = RngStream::new(seed, 1 << 32);
        let (c_hat, _draws) =
            multiplier_bootstrap(&infl, args.bootstrap_draws, 1.0 - args.common.xi, &boot_stream)?;
        Ok((est, c_hat))
    });
    let (est, c_hat) = match run {
        Ok(v) => v,
        Err(e) => return fail(&e.to_string(), 1),
    };
    let bands = simultaneous_bands(&est, c_hat, y.len());

    let mut csv = String::from("target,alpha_hat,sigma_hat,lo,hi");
    if truth.is_some() {
        csv.push_str(",covered");
    }
    csv.push('\n');
    #[derive(Serialize)]
    struct BandRow {
        target: usize,
        alpha_hat: f64,
        sigma_hat: f64,
        lo: Option<f64>,
        hi: Option<f64>,
        covered: Option<bool>,
        error: Option<String>,
    }
    let mut rows = Vec::new();
    for (j, t) in est.targets.iter().enumerate() {
        let band = bands[j];
        let covered = match (&truth, band) {
            (Some(tr), Some((lo, hi))) => Some(lo <= tr[j] && tr[j] <= hi),
            _ => None,
        };
        csv.push_str(&format!(
            "{},{},{},{},{}",
            j + 1,
            t.alpha,
            t.sigma,
            band.map(|b| b.0.to_string()).unwrap_or_default(),
            band.map(|b| b.1.to_string()).unwrap_or_default()
        ));
        if truth.is_some() {
            csv.push_str(&format!(",{}", covered.map(|c| c.to_string()).unwrap_or_default()));
        }
        csv.push('\n');
        rows.push(BandRow {
            target: j + 1,
            alpha_hat: t.alpha,
            sigma_hat: t.sigma,
            lo: band.map(|b| b.0),
            hi: band.map(|b| b.1),
            covered,
            error: t.error.clone(),
        });
    }
    if let Some(p) = &args.csv {
        if let Err(e) = std::fs::write(p, &csv) {
            return fail(&e.to_string(), 1);
        }
    }
    #[derive(Serialize)]
    struct BandsResult {
        c_hat: f64,
        bootstrap_draws: usize,
        bands: Vec<BandRow>,
    }
    let json = report::render(
        "bands",
        seed,
        &args,
        BandsResult { c_hat, bootstrap_draws: args.bootstrap_draws, bands: rows },
        t0.elapsed().as_millis(),
        threads,
    );
    match write_output(&args.output, &json) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e.to_string(), 1),
    }
}
