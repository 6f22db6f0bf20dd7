use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use opmeasure::error::Error;
use opmeasure::instance::{generate, GenerateConfig, InstanceFile, InstanceKind};
use opmeasure::scenario::{exit_code, run_trial, RunConfig, Scenario, Tolerances};

/// Directory searched for `--in` paths that do not exist relative to the
/// working directory.
const FIXTURES_VAR: &str = "OPMEASURE_FIXTURES";

#[derive(Parser)]
#[command(name = "opmeasure", version, about = "Validate, build and round-trip operator-valued measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write one JSON report per line.
    Run(RunArgs),
    /// Write a deterministic instance file.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// validate | build-from-family | roundtrip | semivariation | convergence | multiplicativity | full-suite
    scenario: Scenario,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Overrides both the validator and the round-trip tolerance.
    #[arg(long)]
    tol_abs: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    kind: InstanceKind,
    #[arg(long, default_value_t = 2)]
    atoms: usize,
    /// Block sizes of the domain algebra.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    domain: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    codomain_dim: usize,
    /// Per-atom multiplicities for representations.
    #[arg(long, value_delimiter = ',')]
    multiplicities: Option<Vec<usize>>,
    #[arg(long, default_value_t = 2)]
    kraus: usize,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(FIXTURES_VAR) {
            return Path::new(&dir).join(path);
        }
    }
    path.to_path_buf()
}

fn writer(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(args: RunArgs) -> Result<i32, Error> {
    if args.trials == 0 {
        return Err(Error::BadConfig("--trials must be positive".into()));
    }
    let mut cfg = RunConfig::new(args.scenario, args.seed, args.trials);
    if let Some(tol) = args.tol_abs {
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(Error::BadConfig(format!("--tol-abs must be a non-negative number, got {tol}")));
        }
        cfg.tolerances = Tolerances::uniform(tol);
    }
    if let Some(path) = &args.input {
        let path = resolve(path);
        cfg.input = Some(InstanceFile::load(&path)?);
        cfg.input_name = Some(path.display().to_string());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::BadConfig(e.to_string()))?;
    let reports = pool.install(|| {
        (0..cfg.trial_count()).into_par_iter().map(|t| run_trial(&cfg, t)).collect::<Result<Vec<_>, _>>()
    })?;
    let mut w = writer(args.out.as_deref())?;
    for r in &reports {
        serde_json::to_writer(&mut w, r).map_err(io::Error::from)?;
        writeln!(w)?;
    }
    w.flush()?;
    let failed = reports.iter().filter(|r| !r.passed).count();
    eprintln!("{} report(s), {failed} failed", reports.len());
    Ok(exit_code(&reports))
}

fn generate_cmd(args: GenerateArgs) -> Result<i32, Error> {
    let cfg = GenerateConfig {
        kind: args.kind,
        atoms: args.atoms,
        domain: args.domain,
        codomain_dim: args.codomain_dim,
        multiplicities: args.multiplicities,
        kraus: args.kraus,
        variant: args.variant,
        seed: args.seed,
    };
    let file = generate(&cfg)?;
    match &args.out {
        Some(p) => file.save(p)?,
        None => io::stdout().write_all(file.to_json().as_bytes())?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Generate(a) => generate_cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
