//! Command-line interface: simulation, time generation, batch and online
//! fitting, Monte Carlo experiments, timing benchmarks and preprocessing.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use iar::batch::{fit_mle, SigmaSpec};
use iar::error::{IarError, Result};
use iar::experiments::{bench_runtime, run_experiment, Method, TableConfig};
use iar::model::{simulate, IarParams, TimeSeries};
use iar::online::{run_online, OnlineHyper, OnlineMethod};
use iar::pipeline::{preprocess, read_csv, write_csv, CsvSchema};
use iar::sampling::{gen_times, TimeGapSpec};

#[derive(Parser)]
#[command(
    name = "iar",
    about = "Irregularly observed AR(1): simulation, batch MLE, online estimation, experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an iAR series and write it as CSV.
    Simulate(SimulateArgs),
    /// Generate observational times from a gap distribution.
    GenTimes(GenTimesArgs),
    /// Batch maximum-likelihood fit; prints the result as JSON.
    FitBatch(FitBatchArgs),
    /// Streaming fit with warm start; prints final estimate and MSE as JSON.
    FitOnline(FitOnlineArgs),
    /// Run a Monte Carlo experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Time batch vs online estimation across series sizes.
    Bench(BenchArgs),
    /// Lowess-detrend and standardize a CSV series.
    Preprocess(PreprocessArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Autocorrelation parameter in (0,1)
    #[arg(long)]
    phi: f64,
    /// Process standard deviation
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Number of observations
    #[arg(long)]
    n: usize,
    /// Gap distribution: regular:g | unif:a,b | gamma:shape,rate | expmix:m1,m2,w1
    #[arg(long)]
    gaps: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenTimesArgs {
    /// Gap distribution: regular:g | unif:a,b | gamma:shape,rate | expmix:m1,m2,w1
    #[arg(long)]
    gaps: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitBatchArgs {
    /// Input CSV with header time,value[,err_sd]
    #[arg(long = "in")]
    input: PathBuf,
    /// Fixed sigma; when omitted, the sample standard deviation is used
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args)]
struct FitOnlineArgs {
    /// Input CSV with header time,value[,err_sd]
    #[arg(long = "in")]
    input: PathBuf,
    /// Estimator: obr | ogd | ons
    #[arg(long)]
    method: String,
    /// Fraction of the series batch-fitted to warm-start the estimator
    #[arg(long, default_value_t = 0.5)]
    warm_fraction: f64,
    /// Learning-rate parameter for ons/ogd (larger eta = smaller steps)
    #[arg(long)]
    eta: Option<f64>,
    /// Initial posterior variance for obr
    #[arg(long)]
    p1: Option<f64>,
    /// Trajectory CSV output (time, value, phi_estimate, prediction)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// Directory for summary.csv and per-gap-spec trajectory CSVs
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Series sizes as start:end:step, e.g. 50:600:50
    #[arg(long)]
    sizes: String,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Gap distribution
    #[arg(long, default_value = "regular:1")]
    gaps: String,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Input CSV with header time,value[,err_sd]
    #[arg(long = "in")]
    input: PathBuf,
    /// Lowess span in (0,1]
    #[arg(long, default_value_t = 2.0 / 3.0)]
    span: f64,
    /// Bisquare robustness iterations
    #[arg(long, default_value_t = 3)]
    robust_iters: usize,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_thread_pool();
    // Flag-level validation first so nothing is written on a usage error.
    match validate(&cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Parallelism override; defaults to the available cores.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("IAR_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        } else {
            eprintln!("warning: ignoring non-numeric IAR_THREADS='{v}'");
        }
    }
}

fn validate(command: &Command) -> Result<()> {
    match command {
        Command::Simulate(a) => {
            TimeGapSpec::parse(&a.gaps)?;
            IarParams::new(a.phi, a.sigma)?;
            if a.phi <= 0.0 || a.phi >= 1.0 {
                return Err(IarError::invalid("--phi must lie in (0,1)"));
            }
            if a.n == 0 {
                return Err(IarError::invalid("--n must be >= 1"));
            }
        }
        Command::GenTimes(a) => {
            TimeGapSpec::parse(&a.gaps)?;
            if a.n == 0 {
                return Err(IarError::invalid("--n must be >= 1"));
            }
        }
        Command::FitBatch(a) => {
            if let Some(s) = a.sigma {
                if s <= 0.0 {
                    return Err(IarError::invalid("--sigma must be > 0"));
                }
            }
        }
        Command::FitOnline(a) => {
            a.method.parse::<OnlineMethod>()?;
            if !(a.warm_fraction > 0.0 && a.warm_fraction < 1.0) {
                return Err(IarError::invalid("--warm-fraction must lie in (0,1)"));
            }
            if a.eta.map_or(false, |e| e <= 0.0) {
                return Err(IarError::invalid("--eta must be > 0"));
            }
            if a.p1.map_or(false, |p| p < 0.0) {
                return Err(IarError::invalid("--p1 must be >= 0"));
            }
        }
        Command::Experiment(_) => {}
        Command::Bench(a) => {
            parse_sizes(&a.sizes)?;
            TimeGapSpec::parse(&a.gaps)?;
            if a.reps == 0 {
                return Err(IarError::invalid("--reps must be >= 1"));
            }
        }
        Command::Preprocess(a) => {
            if !(a.span > 0.0 && a.span <= 1.0) {
                return Err(IarError::invalid("--span must lie in (0,1]"));
            }
        }
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::GenTimes(a) => cmd_gen_times(a),
        Command::FitBatch(a) => cmd_fit_batch(a),
        Command::FitOnline(a) => cmd_fit_online(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Preprocess(a) => cmd_preprocess(a),
    }
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text.split(':').collect();
    let sizes = match parts.as_slice() {
        [single] => vec![single
            .parse::<usize>()
            .map_err(|_| IarError::invalid(format!("bad size '{single}'")))?],
        [start, end, step] => {
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| IarError::invalid(format!("bad size '{s}'")))
            };
            let (start, end, step) = (parse(start)?, parse(end)?, parse(step)?);
            if step == 0 || end < start {
                return Err(IarError::invalid("sizes must be start:end:step with step > 0"));
            }
            (start..=end).step_by(step).collect()
        }
        _ => return Err(IarError::invalid("sizes must be N or start:end:step")),
    };
    if sizes.iter().any(|&n| n < 10) {
        return Err(IarError::invalid("sizes must all be >= 10"));
    }
    Ok(sizes)
}

fn write_series(out: Option<&Path>, series: &TimeSeries) -> Result<()> {
    match out {
        Some(path) => write_csv(path, series.times(), series.values(), None, &[]),
        None => {
            println!("time,value");
            for (t, v) in series.times().iter().zip(series.values()) {
                println!("{t},{v}");
            }
            Ok(())
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let spec = TimeGapSpec::parse(&a.gaps)?;
    let params = IarParams::new(a.phi, a.sigma)?;
    let times = gen_times(spec, a.n, a.seed)?;
    let series = simulate(params, &times, a.seed, None)?;
    write_series(a.out.as_deref(), &series)
}

fn cmd_gen_times(a: GenTimesArgs) -> Result<()> {
    let spec = TimeGapSpec::parse(&a.gaps)?;
    let times = gen_times(spec, a.n, a.seed)?;
    match a.out {
        Some(path) => {
            let body: String =
                std::iter::once("time".to_string())
                    .chain(times.iter().map(|t| t.to_string()))
                    .collect::<Vec<_>>()
                    .join("\n");
            std::fs::write(path, body + "\n")?;
        }
        None => {
            println!("time");
            for t in &times {
                println!("{t}");
            }
        }
    }
    Ok(())
}

fn load_series(path: &Path) -> Result<TimeSeries> {
    let raw = read_csv(path, &CsvSchema::default())?;
    let meas_err_var =
        raw.err_sd.as_ref().map(|sds| sds.iter().map(|s| s * s).collect());
    TimeSeries::new(raw.times, raw.values, meas_err_var)
}

fn cmd_fit_batch(a: FitBatchArgs) -> Result<()> {
    let series = load_series(&a.input)?;
    let sigma = a.sigma.map_or(SigmaSpec::FromSample, SigmaSpec::Fixed);
    let fit = fit_mle(&series, sigma)?;
    println!("{}", serde_json::to_string_pretty(&fit)?);
    Ok(())
}

fn cmd_fit_online(a: FitOnlineArgs) -> Result<()> {
    let method: OnlineMethod = a.method.parse()?;
    let series = load_series(&a.input)?;
    let n = series.len();
    let warm = ((a.warm_fraction * n as f64).round() as usize).clamp(2, n.saturating_sub(1));
    let warm_series = TimeSeries::new(
        series.times()[..warm].to_vec(),
        series.values()[..warm].to_vec(),
        None,
    )?;
    let warm_fit = fit_mle(&warm_series, SigmaSpec::FromSample)?;

    let mut hyper = OnlineHyper::default();
    if let Some(eta) = a.eta {
        hyper.ons_eta = eta;
        hyper.ogd_eta = eta;
    }
    if let Some(p1) = a.p1 {
        hyper.obr_p1 = p1;
    }
    let trajectory = run_online(method, &series, warm_fit.phi_hat, warm, &hyper)?;

    // Fitted-value MSE over the online segment; the fitted value at j uses
    // the estimate held at j (the same metric the experiment tables report).
    let y = series.values();
    let mut fitted = vec![0.0; n];
    let mut sse = 0.0;
    for j in 1..n {
        let phi: f64 = trajectory[j];
        fitted[j] = phi.powf(series.gap(j)) * y[j - 1];
        if j >= warm {
            let e = y[j] - fitted[j];
            sse += e * e;
        }
    }
    let mse = sse / (n - warm) as f64;

    if let Some(out) = &a.out {
        write_csv(
            out,
            series.times(),
            series.values(),
            None,
            &[("phi_estimate", &trajectory), ("prediction", &fitted)],
        )?;
    }
    let report = json!({
        "method": method.to_string(),
        "warm_count": warm,
        "warm_start_phi": warm_fit.phi_hat,
        "final_phi": trajectory[n - 1],
        "online_mse": mse,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config)?;
    let table: TableConfig = serde_json::from_str(&text)?;
    let configs = table.experiments()?;
    std::fs::create_dir_all(&a.out_dir)?;

    let mut summary = csv::Writer::from_path(a.out_dir.join("summary.csv"))?;
    let mut header = vec!["gap_spec".to_string()];
    for m in &table.methods {
        header.push(format!("phi_final_{}", m.name()));
    }
    for m in &table.methods {
        header.push(format!("mse_{}", m.name()));
    }
    for m in &table.methods {
        header.push(format!("seconds_{}", m.name()));
    }
    summary.write_record(&header)?;

    for config in &configs {
        let result = run_experiment(config)?;
        let mut record = vec![config.gap_spec.to_string()];
        for s in &result.methods {
            record.push(format!("{:.6}", s.mean_final_phi));
        }
        for s in &result.methods {
            record.push(format!("{:.6}", s.mean_mse));
        }
        for secs in &result.mean_seconds {
            record.push(format!("{secs:.9}"));
        }
        summary.write_record(&record)?;

        let slug = config.gap_spec.to_string().replace([':', ',', '.'], "_");
        let mut traj = csv::Writer::from_path(a.out_dir.join(format!("trajectory_{slug}.csv")))?;
        let mut theader = vec!["index".to_string()];
        for s in &result.methods {
            let name = s.method.name();
            theader.push(format!("{name}_mean"));
            theader.push(format!("{name}_lo"));
            theader.push(format!("{name}_hi"));
        }
        traj.write_record(&theader)?;
        for j in 0..config.n {
            let mut row = vec![(j + 1).to_string()];
            for s in &result.methods {
                row.push(s.traj_mean[j].to_string());
                row.push(s.traj_lo[j].to_string());
                row.push(s.traj_hi[j].to_string());
            }
            traj.write_record(&row)?;
        }
        traj.flush()?;
        eprintln!("done: {}", config.gap_spec);
    }
    summary.flush()?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let sizes = parse_sizes(&a.sizes)?;
    let spec = TimeGapSpec::parse(&a.gaps)?;
    let rows = bench_runtime(&sizes, a.reps, spec, &Method::ALL, &OnlineHyper::default())?;
    let mut writer = csv::Writer::from_path(&a.out)?;
    writer.write_record(["n", "method", "mean_seconds"])?;
    for row in &rows {
        writer.write_record([
            row.n.to_string(),
            row.method.name().to_string(),
            format!("{:.9}", row.mean_seconds),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn cmd_preprocess(a: PreprocessArgs) -> Result<()> {
    let raw = read_csv(&a.input, &CsvSchema::default())?;
    let series = preprocess(&raw, a.span, a.robust_iters)?;
    let err_sd: Option<Vec<f64>> = if raw.err_sd.is_some() {
        Some(series.meas_err_var().iter().map(|v| v.sqrt()).collect())
    } else {
        None
    };
    write_csv(&a.out, series.times(), series.values(), err_sd.as_deref(), &[])
}
