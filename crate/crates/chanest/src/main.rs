use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chanest::error::Error;
use chanest::harness::{
    bench_estimators, config, convergence_study, run_sweep, single_trial_trace, ExperimentSpec,
    MetricsRecord,
};
use chanest::vamp::Hyperparams;

#[derive(Parser)]
#[command(name = "chanest", version, about = "Sparse channel estimation testbed for ZP MIMO-OFDM links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and print a per-estimator report.
    Simulate(SimulateArgs),
    /// Monte Carlo sweep over an SNR grid.
    SweepSnr(CommonArgs),
    /// Monte Carlo sweep over pilot counts.
    SweepPilots(CommonArgs),
    /// Hyperparameter-convergence study from several initializations.
    LearnParams(LearnArgs),
    /// Complex-multiply and wall-time table per estimator.
    Bench(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Plain-text key=value experiment spec; flags override file entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma list from: ls,lmmse,omp,sbl,vamp,em-vamp,csi.
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    /// SNR grid in dB: `start:step:stop` or a comma list.
    #[arg(long)]
    snr: Option<String>,
    /// Pilot counts, comma list.
    #[arg(long)]
    pilots: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    /// Record wall-clock per row (makes CSVs non-reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_null: Option<usize>,
    #[arg(long)]
    n_tx: Option<usize>,
    #[arg(long)]
    m_rx: Option<usize>,
    #[arg(long)]
    chan_len: Option<usize>,
    #[arg(long)]
    n_zp: Option<usize>,
    /// Pilot book: orthogonal or random_qpsk.
    #[arg(long)]
    book: Option<String>,
    #[arg(long)]
    lambda_true: Option<f64>,
    #[arg(long)]
    gamma_h_true: Option<f64>,
    /// Replay a saved tap file instead of drawing channels.
    #[arg(long)]
    channel_file: Option<PathBuf>,
    /// Linear SNR guess for the hyperparameter initialization.
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    xi_t: Option<f64>,
    #[arg(long)]
    damping: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also print the EM-VAMP per-iteration trace.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Semicolon-separated `lambda,gamma_h,gamma_w` triples.
    #[arg(long, default_value = "0.95,298.7,86.4;0.75,200,60;0.55,100,20")]
    inits: String,
}

fn build_spec(args: &CommonArgs) -> Result<ExperimentSpec, Error> {
    let mut spec = ExperimentSpec::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        spec = config::apply_config(spec, &text)?;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if args.out.is_some() {
        spec.out = args.out.clone();
    }
    if let Some(v) = &args.estimators {
        spec.estimators = config::parse_estimators(v)?;
    }
    if let Some(v) = args.trials {
        spec.trials = v;
    }
    if let Some(v) = &args.snr {
        spec.snr_db = config::parse_snr_grid(v)?;
    }
    if let Some(v) = &args.pilots {
        spec.pilot_counts = config::parse_usize_list(v)?;
    }
    if let Some(v) = args.threads {
        spec.threads = v;
    }
    if args.timing {
        spec.timing = true;
    }
    if let Some(v) = args.k {
        spec.k = v;
    }
    if let Some(v) = args.n_null {
        spec.n_null = v;
    }
    if let Some(v) = args.n_tx {
        spec.n_tx = v;
    }
    if let Some(v) = args.m_rx {
        spec.m_rx = v;
    }
    if let Some(v) = args.chan_len {
        spec.chan_len = v;
        if spec.n_zp < v {
            spec.n_zp = v;
        }
    }
    if let Some(v) = args.n_zp {
        spec.n_zp = v;
    }
    if let Some(v) = &args.book {
        spec = config::apply_config(spec, &format!("book = {v}"))?;
    }
    if let Some(v) = args.lambda_true {
        spec.lambda_true = v;
    }
    if let Some(v) = args.gamma_h_true {
        spec.gamma_h_true = v;
    }
    if args.channel_file.is_some() {
        spec.channel_file = args.channel_file.clone();
    }
    if let Some(v) = args.zeta {
        spec.zeta = v;
    }
    if let Some(v) = args.k_max {
        spec.k_max = v;
    }
    if let Some(v) = args.xi_t {
        spec.xi_t = v;
    }
    if let Some(v) = args.damping {
        spec.damping = v;
    }
    Ok(spec)
}

fn parse_inits(text: &str) -> Result<Vec<Hyperparams>, Error> {
    text.split(';')
        .map(|triple| {
            let parts: Vec<&str> = triple.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Config(format!(
                    "initialization {triple:?} is not lambda,gamma_h,gamma_w"
                )));
            }
            let mut vals = [0.0f64; 3];
            for (i, p) in parts.iter().enumerate() {
                vals[i] = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad initialization value {p:?}")))?;
            }
            Hyperparams::new(vals[0], vals[1], vals[2])
                .map_err(|e| Error::Config(format!("initialization {triple:?}: {e}")))
        })
        .collect()
}

fn print_records(records: &[MetricsRecord]) {
    println!(
        "{:<8} {:>7} {:>5} {:>6} {:>10} {:>12} {:>10} {:>6} {:>12} {:>8}  {}",
        "estim", "snr_db", "k_p", "trial", "nmse_db", "sym_mse_db", "raw_ber", "iters", "cmul", "wall_ms", "status"
    );
    for r in records {
        println!(
            "{:<8} {:>7} {:>5} {:>6} {:>10.3} {:>12.3} {:>10.6} {:>6} {:>12} {:>8}  {}",
            r.estimator.name(),
            r.snr_db,
            r.k_p,
            r.trial,
            r.nmse_db,
            r.symbol_mse_db,
            r.raw_ber,
            r.iterations,
            r.cmul_count,
            r.wall_ms,
            r.status,
        );
    }
}

fn emit_csv(spec: &ExperimentSpec, csv: &str) {
    match &spec.out {
        Some(path) => eprintln!("wrote {}", path.display()),
        None => print!("{csv}"),
    }
}

fn run_sweep_command(args: &CommonArgs) -> Result<ExitCode, Error> {
    let spec = build_spec(args)?;
    let out = run_sweep(&spec)?;
    emit_csv(&spec, &out.csv);
    if out.all_failed {
        eprintln!("every trial failed numerically");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_simulate(args: &SimulateArgs) -> Result<ExitCode, Error> {
    let mut spec = build_spec(&args.common)?;
    spec.trials = 1;
    spec.timing = true;
    let out = run_sweep(&spec)?;
    print_records(&out.records);
    if args.trace {
        println!();
        println!(
            "{:>4} {:>3} {:>12} {:>12} {:>12} {:>12} {:>10}",
            "m", "it", "lambda", "gamma_h", "gamma_w", "xi", "nmse_db"
        );
        for row in single_trial_trace(&spec)? {
            println!(
                "{:>4} {:>3} {:>12.6} {:>12.4} {:>12.4} {:>12.4e} {:>10.3}",
                row.hydrophone, row.iteration, row.lambda, row.gamma_h, row.gamma_w, row.xi, row.nmse_db
            );
        }
    }
    if out.all_failed {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_learn(args: &LearnArgs) -> Result<ExitCode, Error> {
    let spec = build_spec(&args.common)?;
    let inits = parse_inits(&args.inits)?;
    let out = convergence_study(&spec, &inits)?;
    emit_csv(&spec, &out.csv);
    Ok(ExitCode::SUCCESS)
}

fn run_bench(args: &CommonArgs) -> Result<ExitCode, Error> {
    let spec = build_spec(args)?;
    let bench = bench_estimators(&spec)?;
    println!(
        "{:<8} {:>6} {:>14} {:>14} {:>10}",
        "estim", "iters", "cmul_total", "cmul_per_iter", "wall_us"
    );
    for b in bench {
        println!(
            "{:<8} {:>6} {:>14} {:>14} {:>10}",
            b.estimator.name(),
            b.iterations,
            b.cmul_count,
            if b.iterations > 0 { b.cmul_count / b.iterations as u64 } else { 0 },
            b.wall_us,
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::SweepSnr(a) | Command::SweepPilots(a) => run_sweep_command(a),
        Command::LearnParams(a) => run_learn(a),
        Command::Bench(a) => run_bench(a),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidDimension(_) | Error::TapFile(_) => 2,
                _ => 3,
            };
            ExitCode::from(code)
        }
    }
}
