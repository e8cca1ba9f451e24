use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use wdro::bench::{read_atoms, run_experiment, validate_experiment, ExperimentConfig};
use wdro::budget::wasserstein_oracle;
use wdro::error::{Error, Result};
use wdro::model::SampleBuffer;
use wdro::reference::discrete_w1;

#[derive(Parser)]
#[command(name = "wdro", version, about = "Online Wasserstein-robust learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write its trace and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `stream.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Solve one worst-case expectation for the samples in an atom file.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        /// Decision as comma-separated coordinates; defaults to the center
        /// of the decision set.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Compare the first oracle calls of a run against exhaustive grid search.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// 1-Wasserstein distance between two atom files.
    W1 {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, seed, out, quiet } => {
            let cfg = ExperimentConfig::load(&config)?;
            let art = run_experiment(&cfg, seed, out.as_deref())?;
            if !quiet {
                let s = &art.summary;
                println!(
                    "{}: {} rounds, x_bar = {:?}, average regret = {}, gap = {}",
                    s.name,
                    s.rounds,
                    s.x_bar,
                    s.average_regret.map_or("n/a".into(), |v| format!("{v:.6}")),
                    s.gap.as_ref().map_or("n/a".into(), |g| format!("{:.6}", g.estimate.gap)),
                );
                for f in &art.files {
                    println!("wrote {}", f.display());
                }
            }
            Ok(())
        }
        Command::Oracle { config, samples, x, out, quiet } => {
            let cfg = ExperimentConfig::load(&config)?;
            let problem = cfg.problem()?;
            let atoms = read_atoms(&samples, Some(problem.loss.sample_dim()))?;
            let buf = SampleBuffer::from_rows(atoms.dim(), atoms.iter().map(|(a, _)| a))?;
            let x = x.unwrap_or_else(|| problem.space.center());
            let at = problem.loss.at(&x)?;
            let res = wasserstein_oracle(&at, &buf, &problem.ambiguity, &problem.tolerance)?;
            let doc = json!({
                "x": x,
                "value": res.value,
                "objective": res.allocation.objective,
                "lambda": res.allocation.lambda,
                "budget_total": res.allocation.total(),
                "transport_cost": res.transport_cost(),
                "atoms": res.distribution.iter().map(|(a, _)| a.to_vec()).collect::<Vec<_>>(),
                "weights": res.distribution.weights(),
            });
            let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Internal(e.to_string()))?;
            match out {
                Some(p) => std::fs::write(p, text + "\n")?,
                None if !quiet => println!("{text}"),
                None => {}
            }
            Ok(())
        }
        Command::Validate { config, seed, out, quiet } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = validate_experiment(&cfg, seed, out.as_deref())?;
            if !quiet {
                for r in &report.rows {
                    println!(
                        "t = {}: oracle {:.6}, grid {:.6}, deviation {:.2e} (bound {:.2e})",
                        r.t, r.oracle_value, r.brute_value, r.deviation, r.bound
                    );
                }
            }
            if !report.all_within_bound {
                return Err(Error::Numeric(format!(
                    "oracle deviates from grid search by {:.3e}, beyond the bound",
                    report.max_deviation
                )));
            }
            Ok(())
        }
        Command::W1 { first, second, quiet } => {
            let p = read_atoms(&first, None)?;
            let q = read_atoms(&second, None)?;
            let d = discrete_w1(&p, &q)?;
            if !quiet {
                println!("{d}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let round = match &e {
                Error::Round { round, .. } => Some(*round),
                _ => None,
            };
            let record = json!({ "error": e.kind(), "message": e.to_string(), "round": round, "exit_code": code });
            eprintln!("{record}");
            ExitCode::from(code as u8)
        }
    }
}
