use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use delay_sde_net::cli::{self, Manifest, RunConfig};

#[derive(Parser)]
#[command(name = "delay-sde", version, about = "Delay-SDE-net simulation, training and evaluation")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// TOML config file; built-in defaults when absent.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths of the benchmark system.
    Simulate,
    /// Train a model on a path CSV.
    Train {
        #[arg(long)]
        data: PathBuf,
    },
    /// Predict `steps` ahead from the last rows of a history CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        history: PathBuf,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long, default_value_t = 0.95)]
        ci: f64,
        /// Replaces the model's epistemic scale.
        #[arg(long)]
        sigma_e: Option<f64>,
    },
    /// Discretization convergence study.
    Convergence,
    /// Delay-SDE-net vs SDE-net vs VAR on simulated years.
    Compare,
    /// Soft-Brownian-offset windows around a data CSV.
    Ood {
        #[arg(long)]
        data: PathBuf,
    },
    /// Per-horizon evaluation on an ingested series CSV.
    Eval {
        #[arg(long)]
        data: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Train { .. } => "train",
            Command::Predict { .. } => "predict",
            Command::Convergence => "convergence",
            Command::Compare => "compare",
            Command::Ood { .. } => "ood",
            Command::Eval { .. } => "eval",
        }
    }
}

fn run(args: &Args) -> delay_sde_net::Result<PathBuf> {
    let cfg: RunConfig = cli::load_config(args.config.as_deref())?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| delay_sde_net::Error::Config(e.to_string()))?;
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let name = args.command.name();
    let mut m = Manifest::new(name, &cfg, seed)?;
    let dir = cli::create_run_dir(&args.out_dir, name, &m.config_hash)?;
    let result = match &args.command {
        Command::Simulate => cli::cmd_simulate(&cfg, seed, &dir, &mut m),
        Command::Train { data } => cli::cmd_train(&cfg, data, seed, &dir, &mut m),
        Command::Predict { model, history, steps, ci, sigma_e } => {
            cli::cmd_predict(model, history, *steps, *ci, *sigma_e, &dir, &mut m)
        }
        Command::Convergence => cli::cmd_convergence(&cfg, seed, &dir, &mut m),
        Command::Compare => cli::cmd_compare(&cfg, seed, &dir, &mut m),
        Command::Ood { data } => cli::cmd_ood(&cfg, data, seed, &dir, &mut m),
        Command::Eval { data } => cli::cmd_eval(&cfg, data, seed, &dir, &mut m),
    };
    m.write(&dir)?;
    result.map(|_| dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
