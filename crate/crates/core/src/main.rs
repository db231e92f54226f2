use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vlasov_stokes::config::{load_config, SimConfig};
use vlasov_stokes::harness::{checks_csv, margin_table, run, sweep, verify_suite};
use vlasov_stokes::Result;

#[derive(Parser)]
#[command(name = "vstokes", version, about = "Periodic Vlasov-Stokes simulator and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write snapshots, diagnostics.csv and manifest.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to output.dir from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite; exits nonzero if any check fails.
    Verify {
        /// oracles, conservation, inequalities, contraction or all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Directory for verify_<suite>.csv.
        #[arg(long, default_value = "verify_out")]
        out: PathBuf,
    },
    /// Repeat a run for each value of one config key.
    Sweep {
        /// Config key, e.g. time.t_w.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let summary = run(&cfg, &dir)?;
            let failed: Vec<_> = summary.records.iter().filter(|r| !r.pass).collect();
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for r in &failed {
                eprintln!("check failed: {} at t = {} (lhs {:e}, rhs {:e})", r.name, r.t, r.lhs, r.rhs);
            }
            println!("wrote {} ({} records, {} failed)", dir.display(), summary.records.len(), failed.len());
            Ok(true)
        }
        Command::Verify { suite, out } => {
            let checks = verify_suite(&suite)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join(format!("verify_{suite}.csv")), checks_csv(&checks, 17))?;
            print!("{}", margin_table(&checks));
            let failed = checks.iter().filter(|c| !c.record.pass).count();
            println!("{} checks, {} failed", checks.len(), failed);
            Ok(failed == 0)
        }
        Command::Sweep { param, values, config, out } => {
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => SimConfig::default(),
            };
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir).join("sweep"));
            print!("{}", sweep(&cfg, &param, &values, &dir)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
