//! Command-line front end for the filter experiments and the verification suite.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for config,
//! input or enumeration-budget errors.

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dynfilter::harness::{
    decode_envelope, encode_dataset, run_bounds, run_fp_experiment, run_verification_suite, run_violation_demo,
    ExperimentConfig, ModelSpec, PiEnvelope, PiSetup,
};
use dynfilter::rational::Fraction;
use dynfilter::{Dataset, Elem, ModelKind};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "dynfilter", version, about = "Dynamic filter experiments and exhaustive lower-bound checks")]
struct Cli {
    /// TOML config file; built-in defaults are used for anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed-space width for the exhaustive commands.
    #[arg(long, global = true)]
    seed_bits: Option<u8>,
    /// Number of Monte-Carlo trials.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo false-positive rate of the fingerprint multiset.
    FpRate,
    /// Run the two canonical violation sequences.
    DemoViolations,
    /// Run the full exhaustive verification suite.
    Verify,
    /// Evaluate the bound formulas only.
    Bounds,
    /// Print the resolved config as TOML.
    ShowConfig,
    /// Encode a dataset as (state, FN-set rank) with the static filter built from a model.
    Encode(EncodeArgs),
    /// Decode a code produced by `encode`.
    Decode {
        /// JSON file with the code; `-` reads standard input.
        code: PathBuf,
    },
}

#[derive(clap::Args)]
struct EncodeArgs {
    #[arg(long, value_enum)]
    model: KindArg,
    #[arg(long)]
    u: u32,
    #[arg(long)]
    n: u32,
    #[arg(long, default_value = "0")]
    eps_plus: Fraction,
    #[arg(long)]
    noise_m: Option<u32>,
    #[arg(long)]
    fingerprint_bits: Option<u32>,
    /// Build the static filter from the witness-based transform of the model.
    #[arg(long)]
    witness: bool,
    #[arg(long, default_value = "2")]
    alpha: Fraction,
    /// False-negative rate for the FN-set threshold; measured when omitted.
    #[arg(long)]
    eps_minus: Option<Fraction>,
    /// The seed r*; the magic seed is searched for when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated elements, e.g. `1,3`.
    #[arg(long, value_delimiter = ',', required = true)]
    dataset: Vec<Elem>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    FingerprintMultiset,
    ExactSet,
    NoisyExact,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::FingerprintMultiset => ModelKind::FingerprintMultiset,
            KindArg::ExactSet => ModelKind::ExactSet,
            KindArg::NoisyExact => ModelKind::NoisyExact,
        }
    }
}

/// A failure that is not a check failure: maps to exit code 2.
struct UsageError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(UsageError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(b) = cli.seed_bits {
        cfg.verify.seed_bits = b;
        cfg.demo.seed_bits = b;
    }
    if let Some(t) = cli.trials {
        cfg.fp_rate.trials = t;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn emit(cfg_out: Option<&PathBuf>, text: &str) -> Result<()> {
    match cfg_out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn json_only(format: Format, command: &str) -> Result<()> {
    if format == Format::Csv {
        bail!("--format csv is only supported by fp-rate, not {command}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, UsageError> {
    let cfg = resolve_config(&cli)?;
    let out = cfg.out.as_ref();
    match &cli.command {
        Command::FpRate => {
            let rep = run_fp_experiment(&cfg)?;
            let text = match cli.format {
                Format::Json => json(&rep),
                Format::Csv => rep.to_csv(),
            };
            emit(out, &text)?;
            Ok(rep.passed)
        }
        Command::DemoViolations => {
            json_only(cli.format, "demo-violations")?;
            let rep = run_violation_demo(&cfg)?;
            emit(out, &json(&rep))?;
            Ok(rep.passed)
        }
        Command::Verify => {
            json_only(cli.format, "verify")?;
            let rep = run_verification_suite(&cfg)?;
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            for c in rep.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAILED {} {}", c.name, c.model.as_deref().unwrap_or(""));
            }
            emit(out, &json(&rep))?;
            Ok(rep.passed)
        }
        Command::Bounds => {
            json_only(cli.format, "bounds")?;
            let rep = run_bounds(&cfg)?;
            emit(out, &json(&rep))?;
            Ok(rep.passed)
        }
        Command::ShowConfig => {
            emit(out, &cfg.to_toml())?;
            Ok(true)
        }
        Command::Encode(a) => {
            json_only(cli.format, "encode")?;
            let setup = PiSetup {
                model: ModelSpec {
                    kind: a.model.into(),
                    eps_plus: a.eps_plus.0,
                    noise_m: a.noise_m,
                    fingerprint_bits: a.fingerprint_bits,
                    collisions: Vec::new(),
                },
                u: a.u,
                n: a.n,
                seed_bits: cli.seed_bits.unwrap_or(cfg.verify.seed_bits),
                witness: a.witness,
                alpha: a.alpha,
                eps_minus: a.eps_minus,
                seed: a.seed,
            };
            let s: Dataset = a.dataset.iter().copied().collect();
            if s.len() != a.dataset.len() {
                return Err(anyhow::anyhow!("dataset lists an element twice").into());
            }
            emit(out, &json(&encode_dataset(&setup, &s)?))?;
            Ok(true)
        }
        Command::Decode { code } => {
            json_only(cli.format, "decode")?;
            let text = if code.as_os_str() == "-" {
                let mut buf = String::new();
                io::stdin().read_to_string(&mut buf)?;
                buf
            } else {
                fs::read_to_string(code).with_context(|| format!("cannot read {}", code.display()))?
            };
            let env: PiEnvelope = serde_json::from_str(&text).context("code is not a valid encoding envelope")?;
            let s = decode_envelope(&env)?;
            emit(out, &json(&serde_json::json!({ "dataset": s })))?;
            Ok(true)
        }
    }
}
