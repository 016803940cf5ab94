//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage or configuration error,
//! 3 runtime abort.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::data::{make_moons, save_csv};
use crate::error::Error;
use crate::experiment::{aggregate, run_all, SweepConfig};
use crate::gradcheck::{run_gradcheck, Component};
use crate::io::write_atomic;
use crate::observable::{spectrum, Observable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

pub const SEED_ENV: &str = "QMEASURE_SEED";

const TRAIN_ABOUT: &str = "\
Train every (regime x noise x seed) combination and write per-run CSVs plus one
aggregate JSON per (regime, noise).

Config file (JSON, every key optional):
  {
    \"circuit\": {\"n_qubits\": 4, \"n_layers\": 2},
    \"regimes\": [\"fixed_pauli_z\", \"learnable_shared\", \"learnable_separate\"],
    \"noises\": [0.1, 0.2, 0.3],
    \"seeds\": [0, 1, 2, 3, 4],
    \"epochs\": 30, \"batch_size\": 20, \"train_size\": 200, \"test_size\": 100,
    \"observable_init\": \"random\" | \"pauli_z\",
    \"optimizers\": {
      \"learnable_separate\": {\"angles\": {\"kind\": \"rmsprop\", \"lr\": 0.01},
                             \"observables\": {\"kind\": \"adam\", \"lr\": 0.1}},
      ...
    }
  }

Overrides are `key=value` with dotted keys for nested fields
(`circuit.n_layers=3`). Values parse as JSON, falling back to strings. A scalar
given for a list key becomes a one-element list, except `seeds=N`, which
expands to N consecutive seeds starting at $QMEASURE_SEED (default 0).

Outputs: {regime}_{noise}_{seed}.csv with columns
epoch,train_loss,train_acc,test_acc,eig_min_k,eig_max_k and
{regime}_{noise}_aggregate.json.";

#[derive(Debug, Parser)]
#[command(name = "qmeasure", version, about = "Variational circuits with learnable Hermitian observables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the two-moons training sweep.
    #[command(long_about = TRAIN_ABOUT)]
    Train(TrainArgs),
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Print the eigenvalues of an observable stored as JSON.
    Spectrum(SpectrumArgs),
    /// Write a two-moons dataset as CSV (header x1,x2,label).
    GenData(GenDataArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON sweep configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    pub output_dir: PathBuf,
    /// Number of runs to execute concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// `key=value` config overrides.
    #[arg(long, num_args = 1..)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Defaults to $QMEASURE_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Perturb the analytic observable gradient (negative control).
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Observable JSON: {"layout": {...}, "dim": N, "d": [...], "a": [...], "c": [...]}.
    pub path: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub noise: f64,
    /// Defaults to $QMEASURE_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: PathBuf,
}

fn env_seed() -> Result<u64, String> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| format!("{SEED_ENV}='{v}' is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

fn resolve_seed(explicit: Option<u64>) -> Result<u64, String> {
    explicit.map_or_else(env_seed, Ok)
}

fn usage(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

/// Parses `args` (including the program name) and runs the chosen subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Train(a) => run_train(&a),
        Command::Gradcheck(a) => run_gradcheck_cmd(&a),
        Command::Spectrum(a) => run_spectrum(&a),
        Command::GenData(a) => run_gen_data(&a),
    }
}

/// Applies one `key=value` override to a JSON config value.
pub fn apply_override(config: &mut Value, assignment: &str, seed_base: u64) -> Result<(), String> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override '{assignment}' is not key=value"))?;
    let mut slot = &mut *config;
    for part in key.split('.') {
        slot = slot
            .get_mut(part)
            .ok_or_else(|| format!("unknown config key '{key}'"))?;
    }
    let parsed: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    *slot = match (slot.is_array(), parsed) {
        (true, Value::Number(n)) if key == "seeds" => {
            let count = n.as_u64().ok_or_else(|| format!("seeds={raw} is not a count"))?;
            Value::from((seed_base..seed_base + count).collect::<Vec<u64>>())
        }
        (true, Value::Array(items)) => Value::Array(items),
        (true, scalar) => Value::Array(vec![scalar]),
        (false, v) => v,
    };
    Ok(())
}

/// Default or file config with overrides applied.
pub fn load_sweep_config(path: Option<&Path>, overrides: &[String]) -> Result<SweepConfig, String> {
    let seed_base = env_seed()?;
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            let user: Value =
                serde_json::from_str(&text).map_err(|e| format!("invalid JSON in {}: {e}", p.display()))?;
            // Validate the file on its own before layering overrides.
            let cfg: SweepConfig =
                serde_json::from_value(user).map_err(|e| format!("invalid config {}: {e}", p.display()))?;
            serde_json::to_value(cfg).map_err(|e| e.to_string())?
        }
        None => {
            let mut cfg = SweepConfig::default();
            cfg.seeds = (seed_base..seed_base + cfg.seeds.len() as u64).collect();
            serde_json::to_value(cfg).map_err(|e| e.to_string())?
        }
    };
    for o in overrides {
        apply_override(&mut value, o, seed_base)?;
    }
    serde_json::from_value(value).map_err(|e| format!("invalid config after overrides: {e}"))
}

pub fn run_train(args: &TrainArgs) -> i32 {
    let sweep = match load_sweep_config(args.config.as_deref(), &args.overrides) {
        Ok(s) => s,
        Err(msg) => return usage(msg),
    };
    let experiments = match sweep.experiments() {
        Ok(e) => e,
        Err(e) => return usage(e),
    };
    if let Err(e) = std::fs::create_dir_all(&args.output_dir) {
        return usage(format!("cannot create {}: {e}", args.output_dir.display()));
    }
    let total: usize = experiments.iter().map(|e| e.seeds.len()).sum();
    eprintln!(
        "running {total} runs ({} experiments) with {} job(s) into {}",
        experiments.len(),
        args.jobs.max(1),
        args.output_dir.display()
    );

    let grouped = match run_all(&experiments, args.jobs) {
        Ok(g) => g,
        Err(e @ Error::Numerical(_)) => {
            eprintln!("run aborted: {e}");
            return EXIT_ABORT;
        }
        Err(e) => return usage(e),
    };

    println!("regime,noise,test_acc_mean,test_acc_std");
    for runs in &grouped {
        for r in runs {
            let path = args.output_dir.join(format!("{}.csv", r.file_stem()));
            if let Err(e) = write_atomic(&path, r.to_csv().as_bytes()) {
                return usage(format!("cannot write {}: {e}", path.display()));
            }
        }
        let report = match aggregate(runs) {
            Ok(r) => r,
            Err(e) => return usage(e),
        };
        let path = args.output_dir.join(report.file_name());
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        if let Err(e) = write_atomic(&path, json.as_bytes()) {
            return usage(format!("cannot write {}: {e}", path.display()));
        }
        let acc = report.final_epoch().test_accuracy;
        println!("{},{},{:.4},{:.4}", report.regime.name(), report.noise, acc.mean, acc.std);
    }
    EXIT_OK
}

pub fn run_gradcheck_cmd(args: &GradcheckArgs) -> i32 {
    let seed = match resolve_seed(args.seed) {
        Ok(s) => s,
        Err(msg) => return usage(msg),
    };
    let report = match run_gradcheck(args.trials, seed, args.corrupt) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("gradcheck aborted: {e}");
            return EXIT_ABORT;
        }
    };
    println!("trials: {}", report.trials);
    for c in [Component::Observable, Component::Angles, Component::Model] {
        println!("{:<10} max abs error {:.3e} (tolerance {:.0e})", c.name(), report.error(c), c.tolerance());
    }
    let failures = report.failures();
    if failures.is_empty() {
        EXIT_OK
    } else {
        for c in failures {
            eprintln!("FAILED: {} gradient exceeds tolerance", c.name());
        }
        EXIT_CHECK_FAILED
    }
}

pub fn run_spectrum(args: &SpectrumArgs) -> i32 {
    let text = match std::fs::read_to_string(&args.path) {
        Ok(t) => t,
        Err(e) => return usage(format!("cannot read {}: {e}", args.path.display())),
    };
    let obs = match Observable::from_json(&text) {
        Ok(o) => o,
        Err(e) => return usage(format!("invalid observable {}: {e}", args.path.display())),
    };
    match spectrum(&obs.params) {
        Ok(s) => {
            let out = serde_json::json!({ "eigenvalues": s.eigenvalues, "min": s.min(), "max": s.max() });
            println!("{out}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_ABORT
        }
    }
}

pub fn run_gen_data(args: &GenDataArgs) -> i32 {
    let seed = match resolve_seed(args.seed) {
        Ok(s) => s,
        Err(msg) => return usage(msg),
    };
    let data = match make_moons(args.n, args.noise, seed) {
        Ok(d) => d,
        Err(e) => return usage(e),
    };
    match save_csv(&data, &args.output) {
        Ok(()) => {
            eprintln!("wrote {} samples to {}", data.len(), args.output.display());
            EXIT_OK
        }
        Err(e) => usage(format!("cannot write {}: {e}", args.output.display())),
    }
}
