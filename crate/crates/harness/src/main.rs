use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hyperlab::Execution;
use hyperlab_harness::{config, report, run, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "hyperlab", version, about = "Numerical experiments on hyperboloid-averaged free fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment group, or `all`.
    Run {
        #[arg(value_parser = ["expand", "outfield", "rates", "decay", "cluster", "geom", "lemma", "all"])]
        which: String,
        #[arg(long, default_value = "configs/default.toml")]
        config: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated claim ids to evaluate.
        #[arg(long, value_delimiter = ',')]
        claims: Option<Vec<String>>,
        /// Worker threads; 1 runs everything sequentially.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize verdict files.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { which, config, out, claims, jobs, seed } => {
            let loaded = match config::load(&config) {
                Ok(l) => l,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match jobs {
                Some(0) => {
                    eprintln!("error: --jobs must be at least 1");
                    return ExitCode::from(2);
                }
                Some(1) => Execution::set_current(Execution::Sequential),
                Some(n) => {
                    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                }
                None => {}
            }
            let opts = RunOptions { command: which, out, claims: claims.map(|c| c.into_iter().collect::<BTreeSet<_>>()), seed };
            match run(&loaded, &opts) {
                Ok(vf) => {
                    print!("{}", report::render(std::slice::from_ref(&vf)).0);
                    if vf.all_pass() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e @ RunError::Usage(_)) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
                Err(e @ RunError::Numerical(_)) => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
            }
        }
        Command::Report { files } => match report::report(&files) {
            Ok((table, pass)) => {
                print!("{table}");
                if pass {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
