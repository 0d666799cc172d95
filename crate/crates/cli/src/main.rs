use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ncwwlab::{describe, run_scenario, RunOptions};

#[derive(Parser)]
#[command(name = "ncwwlab", version, about = "Weighted ergodic-average experiments on tracial matrix algebras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write rows.csv and summary.json.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "n-max")]
        n_max: Option<u64>,
        /// Exit nonzero unless every verdict is "decayed".
        #[arg(long)]
        strict: bool,
        #[arg(long, env = "NCWWLAB_THREADS", default_value_t = 1)]
        threads: usize,
    },
    /// Print the resolved plan for a scenario.
    Describe { scenario: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, seed, n_max, strict, threads } => {
            match run_scenario(&scenario, &RunOptions { out, seed, n_max, threads }) {
                Ok(outcome) => {
                    for (exp, w, v) in &outcome.verdicts {
                        println!("{exp}\t{w}\t{v}");
                    }
                    println!("wrote {}", outcome.out_dir.display());
                    if strict && !outcome.all_decayed() {
                        eprintln!("strict mode: some verdicts are not 'decayed'");
                        return ExitCode::from(1);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Describe { scenario } => match describe(&scenario) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
