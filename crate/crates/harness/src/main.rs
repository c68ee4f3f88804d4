use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use corral_core::environments::{dp_switching_comparator, read_losses};
use corral_core::geometry::DomainSpec;
use corral_harness::trace::{aggregate_files, summary_string, write_trace};
use corral_harness::{run, ExperimentConfig, HarnessError, RunOptions};

#[derive(Parser)]
#[command(name = "corral", version, about = "Run switching-regret experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write the CSV trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// One row per round instead of the T/4, T/2, T checkpoints.
        #[arg(long)]
        full_trace: bool,
        /// Overrides the config's output path; stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the optimal switching comparator for a loss file.
    Oracle {
        #[arg(long)]
        losses: PathBuf,
        #[arg(long)]
        switches: usize,
        #[arg(long)]
        p: f64,
    },
    /// Mean, stderr and ratio tables over trace files.
    Aggregate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

fn io(e: std::io::Error) -> HarnessError {
    HarnessError::Io(e.to_string())
}

fn cmd_run(config: PathBuf, jobs: usize, full_trace: bool, out: Option<PathBuf>) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::load(&config)?;
    let output = run(&cfg, RunOptions { jobs, full_trace })?;
    match out.or_else(|| cfg.output.clone()) {
        Some(path) => {
            let f = File::create(&path).map_err(io)?;
            write_trace(output.rows(), BufWriter::new(f))?;
            log::info!("wrote {}", path.display());
        }
        None => write_trace(output.rows(), std::io::stdout().lock())?,
    }
    eprint!("{}", summary_string(&output.summary));
    match output.first_failure() {
        Some(e) => Err(e.clone()),
        None => Ok(()),
    }
}

fn cmd_oracle(losses: PathBuf, switches: usize, p: f64) -> Result<(), HarnessError> {
    let f = File::open(&losses).map_err(|e| HarnessError::Config(format!("{}: {e}", losses.display())))?;
    let (ls, _) = read_losses(BufReader::new(f))?;
    let dom = DomainSpec::lp_ball(p)?;
    let sol = dp_switching_comparator(&ls, switches, &dom)?;
    let mut w = std::io::stdout().lock();
    writeln!(w, "value {:.16e}", sol.value).map_err(io)?;
    let c = &sol.comparator;
    for k in 0..c.num_segments() {
        let r = c.segment(k);
        let anchor: Vec<String> = c.anchors()[k].iter().map(|v| format!("{:.16e}", v + 0.0)).collect();
        writeln!(w, "segment {k} rounds {}..{} anchor {}", r.start, r.end, anchor.join(" ")).map_err(io)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CORRAL_LOG", "warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run {
            config,
            jobs,
            full_trace,
            out,
        } => cmd_run(config, jobs, full_trace, out),
        Command::Oracle { losses, switches, p } => cmd_oracle(losses, switches, p),
        Command::Aggregate { paths } => aggregate_files(&paths).map(|a| print!("{}", a.render())),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
