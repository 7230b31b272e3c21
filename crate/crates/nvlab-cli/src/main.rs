//! `nvlab`: command-line front end for the numerical laboratory.
//!
//! Exit status: 0 on success, 2 when a run misses a tolerance or does not
//! converge, 1 on usage, configuration or precondition errors.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use commands::*;
use config::{resolve, RunConfig};
use error::CliError;
use output::{unix_now, Manifest, Outputs};

#[derive(Parser, Debug)]
#[command(name = "nvlab", version, about = "Numerical laboratory for the Novikov-Veselov equation")]
struct Cli {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts and the manifest.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Seed for randomized runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dispersion symbol, modulation and multiplier at one frequency.
    Symbol(SymbolFlags),
    /// Stationary-point roots and classification of u.
    Roots(RootsFlags),
    /// Evaluate the oscillatory integral I(t, u; E).
    Oscint(OscintFlags),
    /// Decay probe of I over a time grid.
    Decay(DecayFlags),
    /// Evolve the NV equation; writes snapshots and an invariant CSV.
    Evolve(EvolveFlags),
    /// Conserved quantities of a snapshot or preset datum.
    Invariants(InvariantsFlags),
    /// Bilinear X^{s,b} ratio on random free waves.
    Bilinear(BilinearFlags),
    /// Measure of the resonance region for dyadic shells.
    Resonance(ResonanceFlags),
    /// High-energy ansatz residuals and KP map check.
    Kplimit(KplimitFlags),
    /// Run the acceptance battery.
    Suite(SuiteFlags),
    /// Run the subcommand named in the config file.
    Run,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Symbol(_) => "symbol",
            Command::Roots(_) => "roots",
            Command::Oscint(_) => "oscint",
            Command::Decay(_) => "decay",
            Command::Evolve(_) => "evolve",
            Command::Invariants(_) => "invariants",
            Command::Bilinear(_) => "bilinear",
            Command::Resonance(_) => "resonance",
            Command::Kplimit(_) => "kplimit",
            Command::Suite(_) => "suite",
            Command::Run => "run",
        }
    }
}

struct Resolved {
    subcommand: String,
    params: Value,
    seed: u64,
    output_dir: PathBuf,
}

type Runner = Box<dyn FnOnce(&mut Outputs) -> Result<RunOutcome, CliError>>;

/// Merges config and flags and binds the run. A failure after the output
/// directory is known still yields a `Resolved` so the manifest is written.
fn prepare(cli: Cli) -> Result<(Resolved, Result<Runner, CliError>), CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let name = match (&cli.command, &cfg.subcommand) {
        (Command::Run, Some(s)) => s.clone(),
        (Command::Run, None) => {
            return Err(CliError::Usage("'run' needs a config file with a 'subcommand' key".into()))
        }
        (c, Some(s)) if s != c.name() => {
            return Err(CliError::Usage(format!(
                "config is for subcommand '{s}' but '{}' was invoked",
                c.name()
            )))
        }
        (c, _) => c.name().to_string(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let output_dir = cli.output_dir.or(cfg.output_dir).unwrap_or_else(|| PathBuf::from("nvlab-out"));
    let mut resolved = Resolved { subcommand: name, params: Value::Null, seed, output_dir };
    match bind(cli.command, &resolved.subcommand, &cfg.params, seed) {
        Ok((params, runner)) => {
            resolved.params = params;
            Ok((resolved, Ok(runner)))
        }
        Err(e) => Ok((resolved, Err(e))),
    }
}

fn bind(command: Command, name: &str, fp: &serde_json::Map<String, Value>, seed: u64) -> Result<(Value, Runner), CliError> {
    macro_rules! bind {
        ($params:ty, $flags:expr, $f:expr) => {{
            let p: $params = resolve(name, fp, &$flags)?;
            let v = to_value(&p);
            let f = $f;
            (v, Box::new(move |out: &mut Outputs| f(&p, out)) as Runner)
        }};
    }
    let cmd = match command {
        Command::Run => default_flags(name)?,
        c => c,
    };
    Ok(match cmd {
        Command::Symbol(f) => bind!(SymbolParams, f, symbol),
        Command::Roots(f) => bind!(RootsParams, f, roots),
        Command::Oscint(f) => bind!(OscintParams, f, oscint),
        Command::Decay(f) => bind!(DecayParams, f, decay),
        Command::Evolve(f) => bind!(EvolveParams, f, evolve),
        Command::Invariants(f) => bind!(InvariantsParams, f, invariants_cmd),
        Command::Bilinear(f) => bind!(BilinearParams, f, move |p: &BilinearParams, o: &mut Outputs| bilinear(p, seed, o)),
        Command::Resonance(f) => {
            bind!(ResonanceParams, f, move |p: &ResonanceParams, o: &mut Outputs| resonance(p, seed, o))
        }
        Command::Kplimit(f) => bind!(KplimitParams, f, kplimit),
        Command::Suite(f) => bind!(SuiteParams, f, suite),
        Command::Run => unreachable!("replaced above"),
    })
}

/// Flag-free command for a subcommand named in a config file.
fn default_flags(name: &str) -> Result<Command, CliError> {
    Ok(match name {
        "symbol" => Command::Symbol(Default::default()),
        "roots" => Command::Roots(Default::default()),
        "oscint" => Command::Oscint(Default::default()),
        "decay" => Command::Decay(Default::default()),
        "evolve" => Command::Evolve(Default::default()),
        "invariants" => Command::Invariants(Default::default()),
        "bilinear" => Command::Bilinear(Default::default()),
        "resonance" => Command::Resonance(Default::default()),
        "kplimit" => Command::Kplimit(Default::default()),
        "suite" => Command::Suite(Default::default()),
        other => return Err(CliError::Usage(format!("unknown subcommand '{other}' in config"))),
    })
}

fn execute(r: &Resolved, runner: Result<Runner, CliError>) -> i32 {
    let started = unix_now();
    let mut out = match Outputs::new(&r.output_dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let (code, error) = match runner.and_then(|f| f(&mut out)) {
        Ok(o) => {
            print!("{}", o.stdout);
            match o.tolerance_failure {
                Some(msg) => {
                    eprintln!("error: tolerance failure: {msg}");
                    (2, Some(format!("tolerance failure: {msg}")))
                }
                None => (0, None),
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), Some(e.to_string()))
        }
    };
    let manifest = Manifest {
        tool: "nvlab",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: &r.subcommand,
        params: &r.params,
        seed: r.seed,
        output_dir: r.output_dir.display().to_string(),
        threads_env: std::env::var("RAYON_NUM_THREADS").ok(),
        started_unix: started,
        finished_unix: unix_now(),
        exit_code: code,
        error,
        outputs: &out.files,
    };
    let mp = r.output_dir.join("manifest.json");
    if let Err(e) = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other).and_then(|s| std::fs::write(mp, s + "\n")) {
        eprintln!("error: cannot write manifest: {e}");
        return 1;
    }
    code
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match prepare(cli) {
        Ok((r, runner)) => execute(&r, runner),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
