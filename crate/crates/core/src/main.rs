use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use npsp_core::cli::{self, BenchOptions};
use npsp_core::config::{parse_config, RunConfig};
use npsp_core::{Error, Policy, Ring};

#[derive(Parser)]
#[command(
    name = "npsp",
    version,
    about = "n-party scalar product protocol laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the protocol on a config and report the result.
    Run(RunArgs),
    /// Run both server policies and show what the server reconstructs.
    AttackDemo(RunArgs),
    /// Print the instance census for n parties.
    Count { n: usize },
    /// Census table over a range of n, executing the small ones.
    Bench(BenchArgs),
    /// Evaluate the plaintext scalar product directly.
    Oracle(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "NPSP_CONFIG")]
    config: PathBuf,
    #[arg(long, env = "NPSP_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "NPSP_POLICY")]
    policy: Option<Policy>,
    /// `2^64` (default) or a decimal modulus such as 251.
    #[arg(long, env = "NPSP_MODULUS")]
    modulus: Option<Ring>,
    /// Write the line-delimited transcript here.
    #[arg(long, env = "NPSP_TRANSCRIPT")]
    transcript: Option<PathBuf>,
    /// Compare against the plaintext oracle.
    #[arg(long, env = "NPSP_VERIFY")]
    verify: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 2)]
    min: usize,
    #[arg(long, default_value_t = 10)]
    max: usize,
    #[arg(long, default_value_t = 6, env = "NPSP_EXEC_CAP")]
    exec_cap: usize,
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 8)]
    len: usize,
    #[arg(long, default_value_t = 0, env = "NPSP_SEED")]
    seed: u64,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let text = std::fs::read_to_string(&self.config)
            .map_err(|e| Error::Config(format!("{}: {e}", self.config.display())))?;
        let mut cfg = parse_config(&text)?;
        if let Some(ring) = self.modulus {
            // re-reduce the raw vectors under the overriding modulus
            let parties = cfg
                .parties
                .iter()
                .map(|p| {
                    let raw = p.vector.as_slice().iter().map(|&x| x as i128).collect();
                    (p.name.clone(), raw)
                })
                .collect();
            cfg = RunConfig::build(
                ring,
                cfg.seed,
                cfg.policy,
                cfg.ttp_label,
                parties,
                cfg.transcript,
                cfg.verify,
            )?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(policy) = self.policy {
            cfg.policy = policy;
        }
        if self.transcript.is_some() {
            cfg.transcript = self.transcript.clone();
        }
        cfg.verify |= self.verify;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run(args) => {
            let report = cli::run_command(&args.load()?)?;
            print!("{}", report.render());
            eprintln!("elapsed_ms = {:.3}", report.elapsed.as_secs_f64() * 1e3);
            Ok(report.passed())
        }
        Command::AttackDemo(args) => {
            let report = cli::attack_demo_command(&args.load()?)?;
            if let Some(w) = &report.warning {
                eprintln!("warning: {w}");
            }
            print!("{}", report.render());
            Ok(report.dichotomy_holds())
        }
        Command::Count { n } => {
            print!("{}", cli::render_count(&cli::count_command(n)?));
            Ok(true)
        }
        Command::Bench(b) => {
            let rows = cli::bench_command(&BenchOptions {
                min_n: b.min,
                max_n: b.max,
                exec_cap: b.exec_cap,
                seeds: b.seeds,
                len: b.len,
                seed: b.seed,
            })?;
            print!("{}", cli::render_bench(&rows, true));
            Ok(rows.iter().all(|r| r.consistent()))
        }
        Command::Oracle(args) => {
            println!("oracle = {}", cli::oracle_command(&args.load()?)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
