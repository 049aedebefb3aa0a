use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use regen_uvn::registry::{EstimatorParams, EstimatorRegistry, KernelParams, KernelRegistry};
use regen_uvn::regen::DEFAULT_CAP;
use regen_uvn::report::RunStatus;
use regen_uvn::shuffle::invariant_suite;
use regen_uvn::sweep::{self, PreparedProblem, SweepConfig, SweepError, SweepRow, DEFAULT_REPLICATIONS};
use regen_uvn::testbeds::{self, MatrixMarketError, TestProblem};
use regen_uvn::transition::check_convergence;

const EXIT_CONVERGENCE: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_CAP: u8 = 4;

#[derive(Parser)]
#[command(name = "regen-uvn", version, about = "Monte Carlo matrix inversion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate (I - A)^{-1} with the regenerative estimator.
    Invert(InvertArgs),
    /// Estimate (I - A)^{-1} with truncated walks.
    Classic(ClassicArgs),
    /// Run the replications behind one figure.
    Sweep(SweepArgs),
    /// Katz centrality of a Matrix Market graph.
    Katz(KatzArgs),
    /// Print rho(H) and the convergence verdict.
    Check(MatrixArgs),
    /// Check the binary-matrix / permutation invariants.
    ShuffleTest(ShuffleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Laplacian,
    Covariance,
    /// Katz system `alpha * adj` of a Matrix Market graph.
    Mm,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Grid side for the Laplacian (d = n^2).
    #[arg(long)]
    n: Option<usize>,
    /// Dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Matrix Market file.
    #[arg(long)]
    path: Option<PathBuf>,
    /// Transition kernel: rownorm or blend.
    #[arg(long, default_value = "rownorm")]
    transition: String,
    /// Uniform mixing weight of the blend kernel.
    #[arg(long, default_value_t = regen_uvn::transition::DEFAULT_EPS)]
    eps: f64,
}

#[derive(Args)]
struct InvertArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    /// Regenerations required for every entry.
    #[arg(long = "N")]
    target: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_CAP, value_parser = parse_count)]
    cap: u64,
    /// regen or regen-scaled.
    #[arg(long, default_value = "regen")]
    method: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassicArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    /// Walks per row.
    #[arg(long = "R")]
    replications: u64,
    /// Steps per walk.
    #[arg(long)]
    rk: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// 1, 2 (heatmaps), 3 (errors vs N), 4 (K vs N) or 13 (error vs accesses).
    #[arg(long, value_parser = ["1", "2", "3", "4", "13"])]
    figure: String,
    /// Defaults: 6 for figures 1-2, 128 for 3-4, 64 for 13.
    #[arg(long)]
    d: Option<usize>,
    /// Replications per configuration.
    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    seeds: u64,
    /// Base seed; replication r uses stream r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to covariance for figure 2, laplacian otherwise.
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long, default_value = "regen-scaled")]
    method: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KatzArgs {
    #[arg(long)]
    path: PathBuf,
    #[arg(long = "N")]
    target: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    seeds: u64,
    #[arg(long, default_value = "regen")]
    method: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ShuffleArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 10_000)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Accepts integers and scientific notation such as `1e9`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(v as u64),
        _ => Err(format!("'{s}' is not a nonnegative integer")),
    }
}

#[derive(Debug)]
struct CapReached(u64);

impl std::fmt::Display for CapReached {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "step cap reached after {} transitions; estimates written with flagged entries", self.0)
    }
}

impl std::error::Error for CapReached {}

fn load_problem(m: &MatrixArgs) -> Result<TestProblem> {
    match m.family {
        Family::Laplacian => match (m.n, m.d) {
            (Some(n), _) => Ok(testbeds::laplacian_5pt(n)?),
            (None, Some(d)) => Ok(testbeds::laplacian_for_dim(d)?),
            (None, None) => bail!("laplacian needs --n or --d"),
        },
        Family::Covariance => {
            let d = m.d.or(m.n.map(|n| n * n)).ok_or_else(|| anyhow!("covariance needs --d"))?;
            Ok(testbeds::model_covariance(d)?.0)
        }
        Family::Mm => {
            let path = m.path.as_ref().ok_or_else(|| anyhow!("mm needs --path"))?;
            let adj = testbeds::read_matrix_market(path).with_context(|| path.display().to_string())?;
            let mut problem = testbeds::katz_matrix(&adj)?.problem;
            problem.family = "mm".into();
            Ok(problem)
        }
    }
}

fn prepare(m: &MatrixArgs) -> Result<PreparedProblem> {
    let problem = load_problem(m)?;
    let builder = KernelRegistry::with_defaults().create(&m.transition, &KernelParams { eps: m.eps })?;
    let kernel = builder.build(&problem.a)?;
    Ok(PreparedProblem::with_kernel(problem, kernel)?)
}

/// `out` with its extension replaced by `suffix`.
fn companion(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    sweep::write_csv(BufWriter::new(file), rows)?;
    Ok(())
}

fn write_matrix(path: &Path, values: &[f64], dim: usize) -> Result<()> {
    let grid: Vec<Vec<f64>> = values.chunks(dim).map(<[f64]>::to_vec).collect();
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    sweep::write_grid(BufWriter::new(file), &grid)?;
    Ok(())
}

fn single_run(experiment: &str, prepared: &PreparedProblem, config: SweepConfig, seed: u64, out: &Path) -> Result<()> {
    let outcome = sweep::run_one(experiment, prepared, &config, seed, 0)?;
    write_csv(out, std::slice::from_ref(&outcome.row))?;
    write_matrix(&companion(out, "matrix.csv"), outcome.report.c_hat.values(), prepared.problem.dim())?;
    print_row(&outcome.row);
    if outcome.report.status == RunStatus::CapReached {
        return Err(CapReached(outcome.report.steps).into());
    }
    Ok(())
}

fn print_row(r: &SweepRow) {
    println!(
        "{} {} d={} {}={} rel_frob={:.6} rel_trace={:.6} K={} accesses={} flagged={}",
        r.experiment, r.family, r.d, r.param, r.value, r.rel_frob, r.rel_trace, r.k, r.accesses, r.flagged
    );
}

fn run_invert(args: &InvertArgs) -> Result<()> {
    let prepared = prepare(&args.matrix)?;
    let params = EstimatorParams {
        target: args.target,
        cap: args.cap,
        ..EstimatorParams::default()
    };
    let estimator = EstimatorRegistry::with_defaults().create(&args.method, &params)?;
    let config = SweepConfig {
        param: "N".into(),
        value: args.target.to_string(),
        estimator,
    };
    single_run("invert", &prepared, config, args.seed, &args.out)
}

fn run_classic(args: &ClassicArgs) -> Result<()> {
    let prepared = prepare(&args.matrix)?;
    single_run(
        "classic",
        &prepared,
        SweepConfig::classic(args.replications, args.rk),
        args.seed,
        &args.out,
    )
}

fn family_problem(family: Family, d: usize) -> Result<PreparedProblem> {
    let problem = match family {
        Family::Laplacian => testbeds::laplacian_for_dim(d)?,
        Family::Covariance => testbeds::model_covariance(d)?.0,
        Family::Mm => bail!("sweeps run on the laplacian or covariance family"),
    };
    Ok(PreparedProblem::new(problem)?)
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let figure: u32 = args.figure.parse()?;
    let d = args.d.unwrap_or(match figure {
        1 | 2 => 6,
        3 | 4 => 128,
        _ => 64,
    });
    let family = args.family.unwrap_or(if figure == 2 { Family::Covariance } else { Family::Laplacian });
    let prepared = family_problem(family, d)?;
    let experiment = format!("fig{figure}");
    let outcomes = match figure {
        1 | 2 => {
            let targets = sweep::multiples(d, &[1, 2, 4, 8]);
            let heat = sweep::heatmap_sweep(&experiment, &prepared, &targets, &args.method, args.seed, args.seeds)?;
            for (n, grid) in &heat.grids {
                let path = companion(&args.out, &format!("N{n}.grid.csv"));
                let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                sweep::write_grid(BufWriter::new(file), grid)?;
            }
            heat.outcomes
        }
        3 | 4 => {
            let targets = sweep::multiples(d, &[1, 2, 3, 4, 5, 6]);
            sweep::accuracy_sweep(&experiment, &prepared, &targets, &args.method, args.seed, args.seeds)?
        }
        _ => sweep::error_vs_access_sweep(
            &prepared,
            &sweep::default_classic_grid(d),
            &sweep::multiples(d, &[1, 2, 3, 4, 5, 6]),
            &args.method,
            args.seed,
            args.seeds,
        )?,
    };
    let rows: Vec<SweepRow> = outcomes.into_iter().map(|o| o.row).collect();
    write_csv(&args.out, &rows)?;
    let summary = sweep::summarize(&rows);
    write_csv(&companion(&args.out, "summary.csv"), &summary)?;
    for s in &summary {
        println!(
            "{} {} d={} {}={} rel_frob={:.6}±{:.6} rel_trace={:.6} K={:.1} accesses={:.1}",
            s.experiment,
            s.family,
            s.d,
            s.param,
            s.value,
            s.rel_frob_mean,
            s.rel_frob_se,
            s.rel_trace_mean,
            s.k_mean,
            s.accesses_mean
        );
    }
    Ok(())
}

fn run_katz(args: &KatzArgs) -> Result<()> {
    let adj = testbeds::read_matrix_market(&args.path).with_context(|| args.path.display().to_string())?;
    let katz = testbeds::katz_matrix(&adj)?;
    println!(
        "graph d={} nonzeros={} ||A||_2={:.6} alpha={:.6}",
        adj.dim(),
        adj.nonzeros(),
        katz.adjacency_norm,
        katz.alpha
    );
    let result = sweep::katz_sweep(&katz, &[args.target], &args.method, args.seed, args.seeds)?;
    let rows: Vec<SweepRow> = result.outcomes.iter().map(|o| o.row.clone()).collect();
    write_csv(&args.out, &rows)?;
    write_csv(&companion(&args.out, "katz.csv"), &result.rows)?;
    for r in &result.rows {
        println!(
            "N={} rep={} rel_centrality={:.6} ranked_correct={}/{}",
            r.n,
            r.rep,
            r.rel_centrality,
            r.ranked_correct,
            adj.dim()
        );
    }
    Ok(())
}

fn run_check(m: &MatrixArgs) -> Result<()> {
    let problem = load_problem(m)?;
    let kernel = KernelRegistry::with_defaults()
        .create(&m.transition, &KernelParams { eps: m.eps })?
        .build(&problem.a)?;
    let report = check_convergence(&problem.a, &kernel)?;
    println!(
        "family={} d={} rho_hat={:.10} verdict={:?} power_converged={}",
        problem.family,
        problem.dim(),
        report.rho_hat,
        report.verdict,
        report.power.converged
    );
    if !report.converges() {
        return Err(SweepError::Convergence {
            family: problem.family,
            rho: report.rho_hat,
            verdict: format!("{:?}", report.verdict),
        }
        .into());
    }
    Ok(())
}

fn run_shuffle(args: &ShuffleArgs) -> Result<()> {
    if args.d == 0 {
        bail!("--d must be at least 1");
    }
    let report = invariant_suite(args.d, args.steps, args.seed);
    for c in &report.checks {
        let verdict = if c.violations == 0 { "ok" } else { "VIOLATED" };
        println!("{:<20} cases={:<8} violations={:<6} {verdict}", c.name, c.cases, c.violations);
    }
    if report.violations() > 0 {
        bail!("{} invariant violations", report.violations());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(SweepError::Convergence { .. }) = cause.downcast_ref::<SweepError>() {
            return EXIT_CONVERGENCE;
        }
        if cause.is::<MatrixMarketError>() {
            return EXIT_PARSE;
        }
        if cause.is::<CapReached>() {
            return EXIT_CAP;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_PARSE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Invert(a) => run_invert(a),
        Command::Classic(a) => run_classic(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Katz(a) => run_katz(a),
        Command::Check(m) => run_check(m),
        Command::ShuffleTest(a) => run_shuffle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
