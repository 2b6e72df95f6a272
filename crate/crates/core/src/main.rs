use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use decadmm::config::{load_config, Algorithm, Overrides};
use decadmm::runner::{self, default_out_root};
use decadmm::selftest;

#[derive(Parser)]
#[command(name = "decadmm", version = runner::BUILD_ID, about = "Token-passing incremental ADMM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a TOML configuration.
    Run(Box<RunArgs>),
    /// Overlay the median curves of finished runs in one SVG.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Output SVG; defaults to compare.svg under the output root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in property checks.
    Selftest,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run this many consecutive seeds.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    gossip_iters: Option<u64>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    /// Comma-separated, e.g. asi-admm,igd,dgd.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    #[arg(long)]
    stride: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta_bar: Option<f64>,
    /// Feed RSS position estimates to the localization policy.
    #[arg(long)]
    rss_state: bool,
    /// Output directory; defaults to <output root>/<preset or kind>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output root used when --out is absent.
    #[arg(long, env = runner::OUT_ENV)]
    out_root: Option<PathBuf>,
}

fn run(args: RunArgs) -> decadmm::Result<()> {
    let algorithms = args
        .algorithms
        .map(|names| {
            names
                .iter()
                .map(|n| n.parse::<Algorithm>())
                .collect::<decadmm::Result<Vec<_>>>()
        })
        .transpose()?;
    let overrides = Overrides {
        seed: args.seed,
        seed_count: args.seeds,
        iterations: args.iters,
        gossip_iterations: args.gossip_iters,
        n_agents: args.agents,
        omega: args.omega,
        algorithms,
        stride: args.stride,
        batch_size: args.batch_size,
        rho: args.rho,
        tau: args.tau,
        gamma: args.gamma,
        eta_bar: args.eta_bar,
        out_dir: args.out,
        rss_state: args.rss_state,
    };
    let cfg = load_config(args.preset.as_deref(), args.config.as_deref(), &overrides)?;
    let dir = cfg.out_dir.clone().unwrap_or_else(|| {
        let root = args.out_root.unwrap_or_else(default_out_root);
        root.join(cfg.preset.as_deref().unwrap_or(cfg.kind.label()))
    });
    let summary = runner::run_experiment(&cfg, &dir)?;
    println!(
        "wrote {} runs to {} (effective omega {:.4})",
        summary.runs.len(),
        summary.dir.display(),
        summary.info.effective_omega
    );
    for run in &summary.runs {
        if let Some(test) = &run.policy_test {
            println!(
                "{} seed {}: learned profit {:.3}, uniform profit {:.3}",
                run.algorithm, run.seed, test.learned, test.uniform
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(*args),
        Command::Compare { dirs, out } => runner::compare(&dirs).and_then(|svg| {
            let path = out.unwrap_or_else(|| default_out_root().join("compare.svg"));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, svg)?;
            println!("wrote {}", path.display());
            Ok(())
        }),
        Command::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                return ExitCode::FAILURE;
            }
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
