//! Experiment runner behind the `hyperlab` command: configuration, claim
//! registry, the per-subcommand experiments and verdict reporting.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod claims;
pub mod config;
pub mod experiments;
pub mod output;
pub mod report;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context as _;

use crate::config::LoadedConfig;
use crate::experiments::{Context, NumericalFailure};
use crate::output::VerdictFile;

pub const COMMANDS: [&str; 7] = ["expand", "outfield", "rates", "decay", "cluster", "geom", "lemma"];

/// How a run ended, in decreasing order of precedence for the exit code.
#[derive(Debug)]
pub enum RunError {
    /// Bad configuration, arguments or I/O.
    Usage(anyhow::Error),
    /// A library routine refused to produce a number for a claim.
    Numerical(NumericalFailure),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage(e) => write!(f, "{e:#}"),
            RunError::Numerical(e) => write!(f, "numerical failure in {e}"),
        }
    }
}

impl std::error::Error for RunError {}

pub struct RunOptions {
    pub command: String,
    pub out: Option<PathBuf>,
    pub claims: Option<BTreeSet<String>>,
    pub seed: Option<u64>,
}

/// Runs one subcommand (or `all`), writes CSVs and `verdicts.json` and
/// returns the verdict file.
pub fn run(loaded: &LoadedConfig, opts: &RunOptions) -> Result<VerdictFile, RunError> {
    let commands: Vec<&str> = if opts.command == "all" {
        COMMANDS.to_vec()
    } else if COMMANDS.contains(&opts.command.as_str()) {
        vec![opts.command.as_str()]
    } else {
        return Err(RunError::Usage(anyhow::anyhow!("unknown command {}", opts.command)));
    };
    if let Some(ids) = &opts.claims {
        for id in ids {
            match claims::lookup(id) {
                Some(c) if commands.contains(&c.command) => {}
                Some(c) => return Err(RunError::Usage(anyhow::anyhow!("claim {id} belongs to `{}`", c.command))),
                None => return Err(RunError::Usage(anyhow::anyhow!("unknown claim {id}"))),
            }
        }
    }
    let seed = opts.seed.unwrap_or(loaded.config.seed);
    let mut ctx = Context::new(&loaded.config, seed, opts.claims.clone());
    for cmd in &commands {
        let step = match *cmd {
            "expand" => experiments::expand(&mut ctx),
            "outfield" => experiments::outfield(&mut ctx),
            "rates" => experiments::rates(&mut ctx),
            "decay" => experiments::decay(&mut ctx),
            "cluster" => experiments::cluster(&mut ctx),
            "geom" => experiments::geom(&mut ctx),
            _ => experiments::lemma(&mut ctx),
        };
        step.map_err(RunError::Numerical)?;
    }
    let dir = opts.out.clone().unwrap_or_else(|| loaded.config.output.dir.clone());
    write_outputs(&dir, loaded, &opts.command, seed, ctx).map_err(RunError::Usage)
}

fn write_outputs(dir: &Path, loaded: &LoadedConfig, command: &str, seed: u64, ctx: Context) -> anyhow::Result<VerdictFile> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    for t in &ctx.tables {
        let path = t.write(dir, &loaded.hash)?;
        files.push(path.file_name().expect("file name").to_string_lossy().into_owned());
    }
    let verdicts = VerdictFile {
        command: command.to_string(),
        config: loaded.path.display().to_string(),
        config_hash: loaded.hash.clone(),
        seed,
        files,
        verdicts: ctx.verdicts,
    };
    let path = dir.join("verdicts.json");
    fs::write(&path, serde_json::to_string_pretty(&verdicts)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(verdicts)
}
