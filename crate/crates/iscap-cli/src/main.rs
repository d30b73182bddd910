use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use iscap_cli::config::Config;
use iscap_cli::snapshot::{run_snapshot, write_snapshot};
use iscap_cli::sweep::{run_sweep, write_csv};
use iscap_cli::validate::run_validation;
use iscap_cli::CliError;
use log::{error, info};

#[derive(Parser)]
#[command(name = "iscap", version, about = "CP-OFDM input-distribution design for sensing, communication and powering")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Region sweep over the configured constraint grid; writes CSV.
    Sweep,
    /// Closed-form moments against Monte-Carlo simulation.
    Validate {
        /// Corrupt k4 by 10% on the closed-form side; the run must fail.
        #[arg(long)]
        self_test_k4_fault: bool,
    },
    /// Per-subcarrier means and variances of one design; writes CSV.
    Snapshot,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::defaults(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.verb {
        Verb::Sweep => {
            let points = run_sweep(&cfg.sweep)?;
            let mut w = output(&cli.out)?;
            write_csv(&points, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Verb::Validate { self_test_k4_fault } => {
            if self_test_k4_fault {
                info!("self-test: closed-form k4 corrupted by 10%");
            }
            let report = run_validation(&cfg.oracle, &cfg.sweep.rect, self_test_k4_fault)?;
            let mut w = output(&cli.out)?;
            write!(w, "{report}")?;
            w.flush()?;
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Validation(format!(
                    "{:.2}% of cells within the standard-error rule, end-to-end zDC {}",
                    100.0 * report.cell_pass_fraction(),
                    if report.zdc_passed() { "within tolerance" } else { "out of tolerance" }
                )))
            }
        }
        Verb::Snapshot => {
            let result = run_snapshot(&cfg.sweep, &cfg.snapshot)?;
            if !result.feasible {
                info!("snapshot design infeasible; writing header only");
            }
            let mut w = output(&cli.out)?;
            write_snapshot(&result, &mut w)?;
            w.flush()?;
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
