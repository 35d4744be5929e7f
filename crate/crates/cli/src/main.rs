//! `benchrep`: profile APKs, mine Stack Overflow, and report how well
//! benchmark suites represent real-world API usage.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use benchrep_core::somine::{default_cutoff, parse_timestamp};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

mod fetch;
mod profile_cmd;
mod report_cmd;

/// An error carrying its own exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub const EXIT_PARTIAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;

pub fn fail(code: u8, message: impl Into<String>) -> anyhow::Error {
    Failure { code, message: message.into() }.into()
}

#[derive(Parser)]
#[command(name = "benchrep", version, about = "Benchmark representativeness via API usage")]
struct Cli {
    /// Worker threads for APK profiling and post matching.
    #[arg(long, global = true, default_value_t = default_workers(), value_parser = clap::value_parser!(u32).range(1..))]
    workers: u32,

    #[command(subcommand)]
    command: Command,
}

fn default_workers() -> u32 {
    std::thread::available_parallelism().map(|n| n.get() as u32).unwrap_or(1)
}

#[derive(Subcommand)]
enum Command {
    /// Profile APK files or directories of APKs into a profile store.
    Profile(profile_cmd::ProfileArgs),
    /// Download APKs by SHA-256 from an AndroZoo-compatible endpoint.
    /// The API key is read from ANDROZOO_API_KEY.
    Fetch(fetch::FetchArgs),
    /// Count Android and Android-security discussions per API in a posts dump.
    Mine(report_cmd::MineArgs),
    /// Write the full report bundle.
    Analyze(report_cmd::AnalyzeArgs),
    /// Print the pairwise filtered-API overlap of suites.
    Compare(report_cmd::CompareArgs),
    /// Print the top security-discussed APIs no suite uses.
    Gap(report_cmd::GapArgs),
    /// Build a framework index from a platform stub jar.
    GenIndex(GenIndexArgs),
}

#[derive(Args)]
struct GenIndexArgs {
    /// android.jar or another stub jar.
    #[arg(long)]
    jar: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// `23:27` as an inclusive target-level range.
pub fn parse_levels(s: &str) -> Result<(u32, u32), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: u32 = lo.trim().parse().map_err(|_| format!("bad level `{lo}`"))?;
    let hi: u32 = hi.trim().parse().map_err(|_| format!("bad level `{hi}`"))?;
    if lo > hi {
        return Err(format!("{lo} is above {hi}"));
    }
    Ok((lo, hi))
}

pub fn parse_cutoff(s: &str) -> Result<DateTime<Utc>, String> {
    parse_timestamp(s).ok_or_else(|| format!("`{s}` is not a date or timestamp"))
}

pub fn cutoff_default() -> String {
    default_cutoff().format("%Y-%m-%d").to_string()
}

fn gen_index(args: GenIndexArgs) -> anyhow::Result<()> {
    let idx = benchrep_core::framework::classfile::index_from_jar(&args.jar)
        .with_context(|| format!("reading {}", args.jar.display()))?;
    std::fs::write(&args.out, idx.to_text()).with_context(|| format!("writing {}", args.out.display()))?;
    let (methods, fields) = idx.member_count();
    println!("classes={} methods={methods} fields={fields} digest={}", idx.classes.len(), idx.digest());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    rayon::ThreadPoolBuilder::new().num_threads(cli.workers as usize).build_global()?;
    match cli.command {
        Command::Profile(a) => profile_cmd::run(a),
        Command::Fetch(a) => fetch::run(a),
        Command::Mine(a) => report_cmd::mine(a),
        Command::Analyze(a) => report_cmd::analyze(a),
        Command::Compare(a) => report_cmd::compare(a),
        Command::Gap(a) => report_cmd::gap(a),
        Command::GenIndex(a) => gen_index(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.downcast_ref::<Failure>().map(|f| f.code).unwrap_or(EXIT_INPUT);
            eprintln!("benchrep: {e:#}");
            ExitCode::from(code)
        }
    }
}
