//! `effspin`: AKLT closed forms and dimerized-chain window runs from the command line.
//!
//! Exit codes: 0 success, 1 numerical failure (outputs written, manifest flagged),
//! 2 usage error or missing checkpoint.

mod abahc_cmd;
mod aklt_cmd;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::Config;

#[derive(Parser, Debug)]
#[command(name = "effspin", version, about = "Localized effective spins in gapped spin chains")]
struct Cli {
    /// TOML file with `[aklt.<cmd>]`, `[abahc.<cmd>]` and `[defaults]` tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root of all run directories.
    #[arg(long, global = true, env = "EFFSPIN_OUTPUT_ROOT", default_value = "effspin-out")]
    output_root: PathBuf,
    #[command(subcommand)]
    group: Group,
}

#[derive(Subcommand, Debug)]
enum Group {
    /// Exact AKLT impurity results.
    #[command(subcommand)]
    Aklt(aklt_cmd::AkltCmd),
    /// Dimerized Heisenberg chain: uniform state, defects, sweeps.
    #[command(subcommand)]
    Abahc(abahc_cmd::AbahcCmd),
}

/// Bad arguments or missing inputs; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// A run that wrote its outputs but did not meet its convergence target.
#[derive(Debug)]
pub struct NotConverged(pub String);

impl std::fmt::Display for NotConverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NotConverged {}

/// Inclusive `a:b`, or a single value.
pub fn parse_range(s: &str) -> Result<(i64, i64)> {
    let parse = |t: &str| t.trim().parse::<i64>().map_err(|_| usage(format!("bad range `{s}`, expected a:b")));
    let (a, b) = match s.split_once(':') {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if b < a {
        return Err(usage(format!("empty range `{s}`")));
    }
    Ok((a, b))
}

pub fn parse_unsigned_range(s: &str) -> Result<Vec<usize>> {
    let (a, b) = parse_range(s)?;
    if a < 0 {
        return Err(usage(format!("range `{s}` must be non-negative")));
    }
    Ok((a as usize..=b as usize).collect())
}

pub struct Ctx {
    pub config: Config,
    pub root: PathBuf,
}

impl Ctx {
    pub fn run_dir(&self, group: &str, command: &str) -> PathBuf {
        self.root.join(format!("{group}-{command}"))
    }

    pub fn require_file(&self, path: &Path, what: &str) -> Result<()> {
        if !path.is_file() {
            return Err(usage(format!("{what} not found at {}", path.display())));
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| usage(format!("{e:#}")))?,
        None => Config::default(),
    };
    let ctx = Ctx {
        config,
        root: cli.output_root,
    };
    match cli.group {
        Group::Aklt(c) => aklt_cmd::run(&ctx, c),
        Group::Abahc(c) => abahc_cmd::run(&ctx, c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("-10:10").unwrap(), (-10, 10));
        assert_eq!(parse_range("4").unwrap(), (4, 4));
        assert!(parse_range("3:1").is_err());
        assert!(parse_range("a:b").is_err());
        assert_eq!(parse_unsigned_range("6:8").unwrap(), vec![6, 7, 8]);
        assert!(parse_unsigned_range("-1:2").is_err());
    }
}
