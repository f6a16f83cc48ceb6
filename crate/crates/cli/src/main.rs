use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use gcm::harness::{
    audit_run_dir, count_params, parse_config, resolve_run_dir, run_experiment, serialize_config, summarize,
    write_summary, ExperimentConfig, DEFAULT_HIDDEN_SIZES, OUTPUT_ROOT_ENV,
};

/// Train and compare memory modules on partially observable tasks.
#[derive(Parser)]
#[command(name = "gcm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed (or just one) and write metrics.
    Run {
        config: PathBuf,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root; overrides the GCM_OUTPUT_ROOT variable and the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress per-iteration progress.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Cross-seed mean return with a 90% t-interval per iteration.
    Summarize {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter counts per memory module, heads included.
    CountParams {
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        hidden: Option<Vec<usize>>,
    },
    /// Check a config and print it fully resolved.
    Validate { config: PathBuf },
}

fn load_config(path: &Path) -> Result<ExperimentConfig, gcm::Error> {
    let text = fs::read_to_string(path).map_err(|e| gcm::Error::Config(format!("{}: {}", path.display(), e)))?;
    parse_config(&text)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            quiet,
        } => {
            let cfg = load_config(&config).with_context(|| format!("loading {}", config.display()))?;
            let env_root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
            let run_dir = resolve_run_dir(&cfg, out.as_deref(), env_root.as_deref());
            let seeds = seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
            let mut progress = |seed: u64, m: &gcm::rl::IterationMetrics| {
                if !quiet {
                    eprintln!(
                        "seed {} iter {:>4} steps {:>8} return {:>8.2} kl {:.4} ({:.0}s)",
                        seed, m.iteration, m.env_steps, m.mean_return, m.kl, m.wall_clock_s
                    );
                }
                true
            };
            run_experiment(&cfg, &seeds, &run_dir, &mut progress)
                .with_context(|| format!("running {}", run_dir.display()))?;
            audit_run_dir(&run_dir)?;
            println!("{}", run_dir.display());
        }
        Command::Summarize { csv, out } => {
            let rows = summarize(&csv)?;
            match out {
                Some(path) => {
                    let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_summary(&rows, f)?;
                }
                None => write_summary(&rows, std::io::stdout().lock())?,
            }
            if rows.iter().any(|r| r.degenerate) {
                eprintln!("note: fewer than two seeds contribute to some rows; their intervals are degenerate");
            }
        }
        Command::CountParams { config, hidden } => {
            let cfg = load_config(&config).with_context(|| format!("loading {}", config.display()))?;
            let sizes = hidden.unwrap_or_else(|| DEFAULT_HIDDEN_SIZES.to_vec());
            let rows = count_params(&cfg, &sizes)?;
            let mut out = std::io::stdout().lock();
            writeln!(out, "{:<6} {:>6} {:>8} {:>6} {:>8}", "module", "hidden", "memory", "heads", "total")?;
            for r in rows {
                writeln!(out, "{:<6} {:>6} {:>8} {:>6} {:>8}", r.module, r.hidden, r.memory, r.heads, r.total)?;
            }
        }
        Command::Validate { config } => {
            let cfg = load_config(&config).with_context(|| format!("loading {}", config.display()))?;
            print!("{}", serialize_config(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            let code = e.downcast_ref::<gcm::Error>().map_or(3, gcm::Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
