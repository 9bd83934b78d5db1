use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use temporal_tensor::admm::{EngineConfig, UpdateMode};
use temporal_tensor::baselines::SgdParams;
use temporal_tensor::bench::{
    bench_speedup, boxplot_data, gen_synthetic, run_method, write_boxplot_csv, Method, SyntheticConfig,
};
use temporal_tensor::data::{dataset_summary, load_coo, load_ratings, train_test_split, RatingsConfig, SplitStrategy};
use temporal_tensor::report::write_matrix_file;
use temporal_tensor::{HyperParams, SparseTemporalTensor};

#[derive(Parser)]
#[command(name = "ttf", version, about = "Parallel temporal tensor factorization for ratings data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write its report and factors.
    Train(TrainArgs),
    /// Time the same training run across worker counts.
    BenchSpeedup(SpeedupArgs),
    /// Final test RMSE of every method over several seeds, as CSV.
    Boxplot(BoxplotArgs),
    /// Write a synthetic COO tensor plus its ground-truth factors.
    GenSynthetic(SynthArgs),
    /// Print dataset dimensions, counts and density as JSON.
    Summarize(DataArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Coo,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Random,
    Temporal,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, default_value_t = 0.1)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, value_enum, default_value = "random")]
    split: Split,
    /// Users with fewer ratings are dropped (CSV input only).
    #[arg(long, default_value_t = 20)]
    min_ratings: usize,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "stochastic")]
    mode: UpdateMode,
    #[arg(long, default_value_t = 20, value_parser = positive)]
    rank: usize,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    workers: usize,
    #[arg(long, default_value_t = 0.01)]
    lambda_a: f64,
    #[arg(long, default_value_t = 0.01)]
    lambda_b: f64,
    #[arg(long, default_value_t = 0.01)]
    lambda_c: f64,
    #[arg(long = "lambda-0", default_value_t = 0.01)]
    lambda_0: f64,
    #[arg(long, default_value_t = 0.5)]
    rho_b: f64,
    #[arg(long, default_value_t = 0.5)]
    rho_c: f64,
    #[arg(long, default_value_t = 0.0005)]
    tau0: f64,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[arg(long, default_value_t = 0.0001)]
    alpha: f64,
    #[arg(long, default_value_t = 100, value_parser = positive)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    rmse_threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the random factor initialization.
    #[arg(long, default_value_t = 0.1)]
    init_scale: f64,
    /// Baseline SGD learning rate.
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    #[arg(long, default_value_t = 0.99)]
    eta_decay: f64,
}

impl ModelArgs {
    fn hyper_params(&self) -> HyperParams {
        let mut hp = HyperParams::with_rank(self.rank)
            .lambdas(self.lambda_a, self.lambda_b, self.lambda_c, self.lambda_0)
            .rhos(self.rho_b, self.rho_c)
            .tau_schedule(self.tau0, self.beta, self.alpha);
        hp.rmse_threshold = self.rmse_threshold;
        hp
    }

    fn engine(&self) -> EngineConfig {
        EngineConfig {
            workers: self.workers,
            mode: self.mode,
            max_iter: self.max_iter,
            seed: self.seed,
            init_scale: self.init_scale,
        }
    }

    fn sgd(&self) -> SgdParams {
        SgdParams {
            eta: self.eta,
            eta_decay: self.eta_decay,
            lambda_a: self.lambda_a,
            lambda_b: self.lambda_b,
            lambda_c: self.lambda_c,
            lambda_0: self.lambda_0,
            mu_c: Vec::new(),
            max_iter: self.max_iter,
            seed: self.seed,
            init_scale: self.init_scale,
            rmse_threshold: self.rmse_threshold,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "p2t2f")]
    method: Method,
    #[arg(long, default_value = "ttf-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SpeedupArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated worker counts; must include 1.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4", value_parser = positive)]
    workers_list: Vec<usize>,
    /// Time each run to this train RMSE instead of a fixed epoch count.
    #[arg(long)]
    target_rmse: Option<f64>,
    #[arg(long, default_value = "ttf-out")]
    out: PathBuf,
}

#[derive(Args)]
struct BoxplotArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 12)]
    n_seeds: usize,
    #[arg(long, default_value = "ttf-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    i: usize,
    #[arg(long, default_value_t = 40)]
    j: usize,
    #[arg(long, default_value_t = 12)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    rank_true: usize,
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    time_smoothness: f64,
    #[arg(long, default_value_t = 1.0)]
    factor_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "ttf-out")]
    out: PathBuf,
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

struct Dataset {
    train: SparseTemporalTensor,
    test: SparseTemporalTensor,
}

fn load(args: &DataArgs, out: Option<&Path>) -> AnyResult<Dataset> {
    let cfg = RatingsConfig {
        min_ratings_per_user: args.min_ratings,
        test_fraction: args.test_fraction,
        split_seed: args.split_seed,
        split: match args.split {
            Split::Random => SplitStrategy::Random,
            Split::Temporal => SplitStrategy::Temporal,
        },
        ..RatingsConfig::default()
    };
    let tensor = match args.format {
        Format::Coo => load_coo(&args.input)?,
        Format::Csv => {
            let loaded = load_ratings(&args.input, &cfg)?;
            if let Some(dir) = out {
                loaded.users.write_csv_file(dir.join("users.csv"))?;
                loaded.items.write_csv_file(dir.join("items.csv"))?;
                loaded.months.write_csv_file(dir.join("months.csv"))?;
            }
            loaded.tensor
        }
    };
    let (train, test) = train_test_split(&tensor, &cfg)?;
    Ok(Dataset { train, test })
}

fn cmd_train(args: TrainArgs) -> AnyResult<()> {
    fs::create_dir_all(&args.out)?;
    let data = load(&args.data, Some(&args.out))?;
    let m = &args.model;
    let report = run_method(args.method, &data.train, Some(&data.test), &m.hyper_params(), &m.engine(), &m.sgd())?;
    report.write_json(args.out.join("report.json"))?;
    report.write_factors(&args.out)?;
    println!("method: {}", args.method);
    println!("iterations: {} (converged: {})", report.iterations.len(), report.converged);
    println!("final train RMSE: {:.6}", report.final_train_rmse());
    match report.final_test_rmse() {
        Some(t) => println!("final test RMSE: {t:.6}"),
        None => println!("final test RMSE: n/a"),
    }
    Ok(())
}

fn cmd_speedup(args: SpeedupArgs) -> AnyResult<()> {
    fs::create_dir_all(&args.out)?;
    let data = load(&args.data, None)?;
    let m = &args.model;
    let report = bench_speedup(&data.train, &m.hyper_params(), &m.engine(), &args.workers_list, args.target_rmse)?;
    fs::write(args.out.join("speedup.json"), serde_json::to_string_pretty(&report)?)?;
    if report.target_unreached {
        eprintln!("target RMSE not reached by every run; speedups use median epoch time");
    }
    println!("workers,seconds,median_epoch_seconds,iterations,speedup");
    for r in &report.records {
        println!(
            "{},{:.6},{:.6},{},{:.3}",
            r.workers, r.seconds, r.median_epoch_seconds, r.iterations, r.speedup
        );
    }
    Ok(())
}

fn cmd_boxplot(args: BoxplotArgs) -> AnyResult<()> {
    fs::create_dir_all(&args.out)?;
    let data = load(&args.data, None)?;
    let m = &args.model;
    let rows = boxplot_data(
        &data.train,
        &data.test,
        &m.hyper_params(),
        &m.engine(),
        &m.sgd(),
        args.n_seeds,
        m.seed,
    )?;
    let path = args.out.join("boxplot.csv");
    let mut w = BufWriter::new(fs::File::create(&path)?);
    write_boxplot_csv(&mut w, &rows)?;
    w.flush()?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn cmd_gen_synthetic(args: SynthArgs) -> AnyResult<()> {
    let cfg = SyntheticConfig {
        i: args.i,
        j: args.j,
        k: args.k,
        rank: args.rank_true,
        density: args.density,
        noise_sigma: args.noise_sigma,
        time_smoothness: args.time_smoothness,
        factor_std: args.factor_std,
        seed: args.seed,
    };
    let data = gen_synthetic(&cfg)?;
    fs::create_dir_all(&args.out)?;
    let mut w = BufWriter::new(fs::File::create(args.out.join("tensor.coo"))?);
    data.tensor.write_coo(&mut w)?;
    w.flush()?;
    write_matrix_file(args.out.join("A_true.txt"), &data.a)?;
    write_matrix_file(args.out.join("B_true.txt"), &data.b)?;
    write_matrix_file(args.out.join("C_true.txt"), &data.c)?;
    println!("{} entries over {}", data.tensor.len(), data.tensor.dims());
    Ok(())
}

fn cmd_summarize(args: DataArgs) -> AnyResult<()> {
    let data = load(&args, None)?;
    let summary = dataset_summary(&data.train, &data.test)?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &summary)?;
    writeln!(out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::BenchSpeedup(a) => cmd_speedup(a),
        Command::Boxplot(a) => cmd_boxplot(a),
        Command::GenSynthetic(a) => cmd_gen_synthetic(a),
        Command::Summarize(a) => cmd_summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
