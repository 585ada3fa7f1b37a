use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use hardi_cli::commands::{
    build_dict, evaluate_cmd, gen_phantom, reconstruct_cmd, sweep_cmd, BuildDictArgs, EvaluateArgs, GenPhantomArgs,
    ReconstructArgs,
};
use hardi_cli::config::{ExperimentConfig, Snr};
use hardi_cli::pipeline::{DictChoice, SolverMode};

#[derive(Parser)]
#[command(name = "hardi", version, about = "Sparse ridgelet + TV reconstruction of HARDI phantoms")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory [default: the config's out_dir, else `out`].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a phantom acquisition with Rician noise.
    GenPhantom(GenPhantomCli),
    /// Assemble the sensing matrix of a dictionary.
    BuildDict(BuildDictCli),
    /// Reconstruct a signal field and extract ODFs and fibre modes.
    Reconstruct(ReconstructCli),
    /// Score a reconstruction against ground truth.
    Evaluate(EvaluateCli),
    /// Run a grid of experiments from a TOML/JSON config.
    Sweep(SweepCli),
}

#[derive(Args)]
struct GenPhantomCli {
    #[arg(long, default_value = "phantom1")]
    phantom: String,
    #[arg(long, default_value_t = 3000.0)]
    b: f64,
    /// Number of spiral directions.
    #[arg(long, default_value_t = 16)]
    k: usize,
    /// Target SNR in dB, or `inf` for no noise.
    #[arg(long, default_value = "18")]
    snr: Snr,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep a well-spread subset of this many of the K directions.
    #[arg(long)]
    subset: Option<usize>,
}

#[derive(Args)]
struct BuildDictCli {
    #[arg(long, default_value = "rdg")]
    dict: DictChoice,
    #[arg(long, default_value_t = 3000.0)]
    b: f64,
    /// Directions CSV; defaults to a spiral of K directions.
    #[arg(long)]
    directions: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long)]
    subset: Option<usize>,
    /// Also write the matrix as CSV.
    #[arg(long)]
    csv: bool,
    /// Config file supplying the ridgelet settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructCli {
    #[arg(long)]
    signal: PathBuf,
    #[arg(long)]
    directions: PathBuf,
    #[arg(long, default_value = "rdg")]
    dict: DictChoice,
    /// `cs` (voxel-wise sparse coding) or `tv` (sparse coding with TV).
    #[arg(long, default_value = "tv")]
    mode: SolverMode,
    /// b-value; defaults to the one recorded with the signal.
    #[arg(long)]
    b: Option<f64>,
    /// Config file supplying solver, analysis and ridgelet settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// TV-denoise the data before voxel-wise sparse coding.
    #[arg(long)]
    prefilter_tv: bool,
}

#[derive(Args)]
struct EvaluateCli {
    /// Ground-truth JSON written by gen-phantom.
    #[arg(long)]
    truth: PathBuf,
    /// Directory written by reconstruct.
    #[arg(long)]
    recon: PathBuf,
}

#[derive(Args)]
struct SweepCli {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed list of the config with a single seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    match cli.command {
        Command::GenPhantom(a) => {
            let out = gen_phantom(&GenPhantomArgs {
                phantom: a.phantom,
                b: a.b,
                k: a.k,
                snr: a.snr,
                seed: a.seed,
                subset: a.subset,
                out_dir,
            })?;
            println!("achieved SNR {:.3} dB; wrote {}", out.achieved_snr_db, out.noisy.display());
        }
        Command::BuildDict(a) => {
            let cfg = load_config(a.config.as_ref())?;
            let header = build_dict(&BuildDictArgs {
                dict: a.dict,
                b: a.b,
                directions: a.directions,
                k: a.k,
                subset: a.subset,
                ridgelet: cfg.ridgelet,
                csv: a.csv,
                out_dir,
            })?;
            println!("{}", serde_json::to_string(&header)?);
        }
        Command::Reconstruct(a) => {
            let cfg = load_config(a.config.as_ref())?;
            let mut solver = cfg.solver;
            if let Some(v) = a.lambda {
                solver.lambda = v;
            }
            if let Some(v) = a.mu {
                solver.mu = v;
            }
            if let Some(v) = a.gamma {
                solver.gamma = v;
            }
            solver.validate()?;
            let info = reconstruct_cmd(&ReconstructArgs {
                signal: a.signal,
                directions: a.directions,
                dict: a.dict,
                mode: a.mode,
                b: a.b,
                solver,
                analysis: cfg.analysis,
                ridgelet: cfg.ridgelet,
                prefilter_tv: a.prefilter_tv || cfg.prefilter_tv,
                out_dir: out_dir.clone(),
            })?;
            println!(
                "{}-{}: K={} M={} bregman iterations {}; wrote {}",
                info.dictionary,
                info.mode,
                info.k,
                info.m,
                info.bregman_iterations,
                out_dir.display()
            );
        }
        Command::Evaluate(a) => {
            let row = evaluate_cmd(&EvaluateArgs {
                truth: a.truth,
                recon_dir: a.recon,
                out_dir,
            })?;
            println!(
                "nmse {:.6} angular_error_deg {:.3} false_detection_pct {:.3}",
                row.metrics.nmse, row.metrics.angular_error_deg, row.metrics.false_detection_pct
            );
        }
        Command::Sweep(a) => {
            let mut cfg = ExperimentConfig::load(&a.config)?;
            if let Some(s) = a.seed {
                cfg.seeds = vec![s];
            }
            let out_dir = cli.out_dir.or(cfg.out_dir.clone()).unwrap_or(out_dir);
            let report = sweep_cmd(&cfg, &out_dir)?;
            let failed = report.failures();
            println!(
                "{} cells, {} failed; wrote {}",
                report.results.len(),
                failed,
                out_dir.join("results.csv").display()
            );
            return Ok(failed == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
