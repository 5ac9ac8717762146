use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use sparseva::curvature::{CurvatureCache, CurvatureEstimate};
use sparseva::dataio::{format_f64, read_data_csv, write_regression_csv, write_signal_csv, DataFile};
use sparseva::experiment::{
    aggregate, run_with_cache, write_figures, write_records_csv, write_summary_csv, ExperimentConfig,
};
use sparseva::sysid::{fir_regression, random_stable_system, sigma_for, synthesize, SignalSpec};
use sparseva::{
    resolve_epsilon, solve_sparseva, sparse_bound, EpsilonRule, Error, InputKind, RegressionProblem, SparseBoundInputs,
    SparsevaConfig,
};

#[derive(Parser)]
#[command(name = "sparseva", version, about = "Sparse estimation with finite-sample error bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate sparse parameters from a data file.
    Estimate(EstimateArgs),
    /// Evaluate the error bound for given problem constants.
    Bound(BoundArgs),
    /// Estimate the curvature constant by Monte Carlo.
    Curvature(CurvatureArgs),
    /// Run a Monte Carlo study and write records, summary and figures.
    Experiment(ExperimentArgs),
    /// Write a synthetic data set.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct EstimateArgs {
    /// CSV with header `u,y` (signal) or `y,phi_1,...,phi_n` (regression).
    #[arg(long)]
    data: PathBuf,
    /// FIR order; required for signal files.
    #[arg(long)]
    fir_order: Option<usize>,
    /// Time index of the first regression row (signal files). Defaults to n - 1.
    #[arg(long)]
    start: Option<usize>,
    /// Spacing between regression rows (signal files).
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// pec, aic, bic or explicit:<value>.
    #[arg(long, default_value = "pec")]
    eps_rule: EpsilonRule,
    /// Relative tolerance on the loss constraint.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    n_eta: u64,
    #[arg(long = "n-samples", short = 'N')]
    n_samples: u64,
    #[arg(long)]
    sigma_e2: f64,
    #[arg(long, default_value_t = 1.0)]
    s_max: f64,
    #[arg(long)]
    kappa_alpha: f64,
    /// Constraint slack; overrides --eps-rule when given.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value = "pec")]
    eps_rule: EpsilonRule,
    #[arg(long, default_value_t = 0.001)]
    beta: f64,
    #[arg(long, default_value_t = 0.02)]
    alpha: f64,
    /// l1 norm of the true parameters outside the n_eta largest entries.
    #[arg(long, default_value_t = 0.0)]
    tail_l1: f64,
}

#[derive(Args)]
struct CurvatureArgs {
    /// `white`, `ar1`, or a headerless CSV file holding the n x n covariance.
    #[arg(long, default_value = "white")]
    sigma: String,
    #[arg(long, default_value_t = 35)]
    n: usize,
    #[arg(long = "n-samples", short = 'N')]
    n_samples: usize,
    #[arg(long, default_value_t = 0.02)]
    alpha: f64,
    #[arg(long, default_value_t = sparseva::curvature::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV cache of earlier estimates, read and updated.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML config; keys left out keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    inputs: Option<Vec<InputKind>>,
    #[arg(long, value_delimiter = ',')]
    snr_db: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n_samples: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    eps_rules: Option<Vec<EpsilonRule>>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    curvature_trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV cache for curvature estimates.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Validate the config and print the grid without running it.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    Signal,
    Regression,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "white")]
    input: InputKind,
    /// FIR order of the truth.
    #[arg(long, default_value_t = 35)]
    n: usize,
    #[arg(long = "n-samples", short = 'N')]
    n_samples: usize,
    /// Signal-to-noise ratio in dB; `inf` for noiseless output.
    #[arg(long, default_value_t = 20.0)]
    snr_db: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    system_seed: u64,
    #[arg(long, value_enum, default_value_t = Layout::Signal)]
    layout: Layout,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the true FIR coefficients here.
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::Parse { .. } | Error::Io(_) | Error::Domain(_) | Error::Dimension(_) => 2,
        Error::Rank(_) | Error::NotPositiveDefinite(_) | Error::UndefinedMultiplier(_) => 3,
        Error::Convergence { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Bound(a) => bound(a),
        Command::Curvature(a) => curvature(a),
        Command::Experiment(a) => experiment(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn open(path: &Path) -> sparseva::Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn print_json<T: Serialize>(value: &T) -> sparseva::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    println!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct EstimateOutput {
    n: usize,
    n_samples: usize,
    eps: f64,
    /// `null` when infinite, i.e. the least-squares fit is exact.
    lambda_eps: f64,
    loss: f64,
    loss_nr: f64,
    constraint_active: bool,
    iterations: usize,
    support: Vec<usize>,
    theta_hat: Vec<f64>,
    theta_nr: Vec<f64>,
}

fn load_problem(args: &EstimateArgs) -> sparseva::Result<RegressionProblem> {
    match read_data_csv(open(&args.data)?)? {
        DataFile::Regression { y, regressors } => RegressionProblem::from_rows(y, &regressors),
        DataFile::Signal { u, y } => {
            let n = args
                .fir_order
                .ok_or_else(|| Error::InvalidConfig("--fir-order is required for u,y data".into()))?;
            let start = args.start.unwrap_or(n.saturating_sub(1));
            fir_regression(&u, &y, n, start, args.stride)
        }
    }
}

fn estimate(args: EstimateArgs) -> sparseva::Result<()> {
    let problem = load_problem(&args)?;
    let config = SparsevaConfig {
        solver_tol: args.tol,
        ..SparsevaConfig::with_rule(args.eps_rule)
    };
    let sol = solve_sparseva(&problem, &config)?;
    match args.format {
        Format::Json => print_json(&EstimateOutput {
            n: problem.n(),
            n_samples: problem.n_samples(),
            eps: sol.eps,
            lambda_eps: sol.lambda_eps,
            loss: sol.loss_at_solution,
            loss_nr: sol.loss_nr,
            constraint_active: sol.constraint_active,
            iterations: sol.iterations,
            support: (0..problem.n()).filter(|&i| sol.theta_hat[i] != 0.0).collect(),
            theta_hat: sol.theta_hat.iter().copied().collect(),
            theta_nr: sol.theta_nr.iter().copied().collect(),
        }),
        Format::Csv => {
            let mut out = csv::Writer::from_writer(io::stdout().lock());
            let csv_err = |e: csv::Error| Error::Io(e.into());
            out.write_record(["index", "theta_hat", "theta_nr"]).map_err(csv_err)?;
            for i in 0..problem.n() {
                out.write_record([(i + 1).to_string(), format_f64(sol.theta_hat[i]), format_f64(sol.theta_nr[i])])
                    .map_err(csv_err)?;
            }
            out.flush()?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct BoundOutput {
    eps: f64,
    a1: f64,
    a2: f64,
    bound_sq: f64,
    bound_l2: f64,
    prob: f64,
    vacuous: bool,
}

fn bound(args: BoundArgs) -> sparseva::Result<()> {
    let eps = match args.eps {
        Some(e) => e,
        None => resolve_epsilon(args.eps_rule, args.n as usize, args.n_samples as usize)?,
    };
    let r = sparse_bound(&SparseBoundInputs {
        n: args.n,
        n_eta: args.n_eta,
        n_samples: args.n_samples,
        sigma_e2: args.sigma_e2,
        s_max: args.s_max,
        kappa_alpha: args.kappa_alpha,
        eps,
        beta: args.beta,
        alpha: args.alpha,
        theta_tail_l1: args.tail_l1,
    })?;
    print_json(&BoundOutput {
        eps,
        a1: r.a1,
        a2: r.a2,
        bound_sq: r.bound,
        bound_l2: r.bound.sqrt(),
        prob: r.prob,
        vacuous: r.vacuous,
    })
}

fn read_sigma(spec: &str, n: usize) -> sparseva::Result<DMatrix<f64>> {
    if let Ok(kind) = spec.parse::<InputKind>() {
        return Ok(sigma_for(kind, n));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(open(Path::new(spec))?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: i as u64 + 1,
                    message: format!("'{f}' is not a number"),
                })
            })
            .collect::<sparseva::Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let dim = rows.len();
    if dim == 0 || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Dimension(format!("{spec}: covariance must be a square matrix")));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

fn curvature(args: CurvatureArgs) -> sparseva::Result<()> {
    let sigma = read_sigma(&args.sigma, args.n)?;
    let mut cache = match &args.cache {
        Some(path) => CurvatureCache::load(path)?,
        None => CurvatureCache::new(),
    };
    let est: CurvatureEstimate = cache.get_or_estimate(&sigma, args.n_samples, args.alpha, args.trials, args.seed)?;
    if let Some(path) = &args.cache {
        cache.save(path)?;
    }
    print_json(&est)
}

fn experiment_config(args: &ExperimentArgs) -> sparseva::Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_toml(
            &fs::read_to_string(path)
                .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?,
        )?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &args.inputs {
        config.input_kinds = v.clone();
    }
    if let Some(v) = &args.snr_db {
        config.snr_db = v.clone();
    }
    if let Some(v) = &args.n_samples {
        config.n_samples = v.clone();
    }
    if let Some(v) = &args.eps_rules {
        config.eps_rules = v.clone();
    }
    if let Some(v) = args.realizations {
        config.realizations = v;
    }
    if let Some(v) = args.curvature_trials {
        config.curvature_trials = v;
    }
    if let Some(v) = args.seed {
        config.root_seed = v;
    }
    config.validate()?;
    Ok(config)
}

fn create(path: &Path) -> sparseva::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn experiment(args: ExperimentArgs) -> sparseva::Result<()> {
    let config = experiment_config(&args)?;
    let cells = config.cells();
    if args.dry_run {
        for cell in &cells {
            println!("{cell}");
        }
        println!(
            "{} cells, {} solves, {} records",
            cells.len(),
            cells.len() * config.realizations,
            cells.len() * config.realizations * config.n_eta.len()
        );
        return Ok(());
    }

    let mut cache = match &args.cache {
        Some(path) => CurvatureCache::load(path)?,
        None => CurvatureCache::new(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let output = pool.install(|| run_with_cache(&config, &mut cache))?;
    if let Some(path) = &args.cache {
        cache.save(path)?;
    }

    fs::create_dir_all(&args.out)?;
    write_records_csv(create(&args.out.join("records.csv"))?, &output.records)?;
    let rows = aggregate(&output.records);
    write_summary_csv(create(&args.out.join("summary.csv"))?, &rows)?;
    let figures = write_figures(&args.out, &rows)?;

    let ok = output.records.iter().filter(|r| r.is_ok()).count();
    let min_coverage = rows.iter().map(|r| r.coverage).fold(f64::INFINITY, f64::min);
    eprintln!(
        "{} records ({ok} solved), {} summary rows, min coverage {min_coverage:.3}, {} figures in {}",
        output.records.len(),
        rows.len(),
        figures.len(),
        args.out.display()
    );
    Ok(())
}

fn synth(args: SynthArgs) -> sparseva::Result<()> {
    let sys = random_stable_system(args.system_seed);
    let spec = SignalSpec {
        input_kind: args.input,
        n_rows: args.n_samples,
        snr_db: args.snr_db,
        seed: args.seed,
    };
    let data = synthesize(&sys, &spec, args.n)?;
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    match args.layout {
        Layout::Signal => write_signal_csv(sink, &data.u, &data.y)?,
        Layout::Regression => write_regression_csv(sink, &data.problem)?,
    }
    if let Some(path) = &args.truth {
        let mut out = create(path)?;
        writeln!(out, "index,theta")?;
        for (i, v) in data.truth.theta_star.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, format_f64(*v))?;
        }
        out.flush()?;
    }
    if matches!(args.layout, Layout::Signal) {
        eprintln!(
            "sigma_e2 {}; estimate with --fir-order {} --start {} --stride {}",
            format_f64(data.truth.sigma_e2),
            args.n,
            data.start,
            data.stride
        );
    }
    Ok(())
}
