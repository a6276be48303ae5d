mod manifest;
mod plot;
mod run;

use aim_lake::error::Error;
use aim_lake::scenario::ModelScenario;
use clap::{Parser, Subcommand};
use manifest::RunManifest;
use run::{resolve, Runner};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "aim-lake", version, about = "Batch experiments for the variable-depth lake equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Scenario TOML file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Basis cache directory (default: <out>/basis-cache).
    #[arg(long, global = true)]
    basis_cache: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "AIM_LAKE_WORKERS")]
    workers: Option<usize>,
    /// Literal form of the recursion.
    #[arg(long, global = true)]
    paper_literal: bool,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the scenario's `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Constrained eigenbasis and spectrum.
    Basis,
    /// Trajectory and absorbing-set estimates.
    Simulate,
    /// Recursion existence audit and semidistance sweep.
    Aim,
    /// Energy ledgers and decay envelopes.
    Decay,
    /// Algebra, coercivity, operator and time-stepping checks.
    Audit,
    /// Every stage the scenario configures.
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Basis => "basis",
            Command::Simulate => "simulate",
            Command::Aim => "aim",
            Command::Decay => "decay",
            Command::Audit => "audit",
            Command::All => "all",
        }
    }
}

const EXIT_AUDIT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Config { .. }
            | Error::Format { .. }
            | Error::Expr { .. }
            | Error::InvalidGrid(_)
            | Error::NonPositiveDepth { .. }
            | Error::NonPositiveViscosity { .. }
            | Error::NegativeFriction { .. }
            | Error::UnsupportedMollifier(_),
        ) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn load(c: &Common) -> anyhow::Result<ModelScenario> {
    let path = c.scenario.as_ref().ok_or_else(|| Error::config("--scenario", "required"))?;
    let mut s = ModelScenario::load(path)?;
    if let Some(seed) = c.seed {
        s.seed = seed;
    }
    if c.paper_literal {
        if let Some(a) = s.aim.as_mut() {
            a.paper_literal = true;
        }
    }
    Ok(s)
}

fn execute(cli: &Cli) -> anyhow::Result<bool> {
    let c = &cli.common;
    let scenario = load(c)?;
    let workers = c.workers.unwrap_or(0);
    if workers > 0 {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    let cwd = std::env::current_dir()?;
    let out = resolve(&cwd, c.out.as_ref().unwrap_or(&scenario.output));
    std::fs::create_dir_all(&out)?;
    let cache = c.basis_cache.as_ref().map_or_else(|| out.join("basis-cache"), |p| resolve(&cwd, p));

    let mut versions = BTreeMap::new();
    versions.insert("aim-lake".to_string(), env!("CARGO_PKG_VERSION").to_string());
    let manifest = RunManifest {
        command: cli.command.name().into(),
        scenario: c.scenario.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        scenario_name: scenario.name.clone(),
        scenario_hash: scenario.hash.clone(),
        seed: scenario.seed,
        workers: rayon::current_num_threads(),
        paper_literal: scenario.aim.as_ref().is_some_and(|a| a.paper_literal),
        versions,
        stages: vec![],
        files: vec![],
        audits: vec![],
        pass: true,
    };
    let mut r = Runner::new(scenario, out, cache, manifest);
    let result = match cli.command {
        Command::Basis => r.basis(),
        Command::Simulate => r.simulate(),
        Command::Aim => r.aim(),
        Command::Decay => r.decay(),
        Command::Audit => r.audit(),
        Command::All => r.basis().and_then(|_| r.simulate()).and_then(|_| r.aim()).and_then(|_| r.decay()).and_then(|_| r.audit()),
    };
    // Reports of completed stages are kept even when a later one fails.
    let fin = r.finish();
    result?;
    fin?;
    for a in &r.manifest.audits {
        for v in a.violations() {
            eprintln!("violation [{}]: {} measured {:.4e}, bound {:.4e}", a.title, v.name, v.measured, v.bound);
        }
    }
    println!("{}: {} ({})", r.manifest.scenario_name, if r.manifest.pass { "pass" } else { "fail" }, r.out.display());
    Ok(r.manifest.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_AUDIT),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
