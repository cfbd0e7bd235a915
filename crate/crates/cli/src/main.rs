//! `jscc` — train, sweep, transmit and verify the joint speech enhancement
//! and analog transmission lab from the command line.

mod log;
mod sweep;
mod train_cmd;
mod transmit;

use clap::{Args, Parser, Subcommand};
use jscc_core::error::Error;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "jscc",
    version,
    about = "Low-latency joint speech enhancement and analog transmission over AWGN"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a subsystem (or the joint cascade) on a synthetic or WAV-backed corpus
    Train(TrainArgs),
    /// Run an experiment grid from a spec file; writes CSV and prints a summary table
    Sweep(SweepArgs),
    /// Process a WAV file through the streaming cascade
    Transmit(TransmitArgs),
    /// Run the property suite (gradients, channel statistics, causality, streaming)
    Verify(VerifyArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// separate-enhancer | separate-transnet | joint
    #[arg(long)]
    method: String,
    /// Total system latency in ms: 3, 5 or 9
    #[arg(long, default_value_t = 3)]
    latency_ms: u32,
    /// Bandwidth compression ratio R = k/n: 0.25, 0.5 or 1
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    /// Wireless channel SNR in dB ("inf" for a noiseless channel)
    #[arg(long, default_value = "10")]
    snr_w: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// "synth" or a directory containing clean/ and noise/ WAV folders
    #[arg(long, default_value = "synth")]
    data: String,
    /// Utterances in the corpus
    #[arg(long, default_value_t = 32)]
    count: usize,
    /// Utterance duration in seconds
    #[arg(long, default_value_t = 0.8)]
    duration_s: f64,
    /// Cap on training epochs (early stopping may end sooner)
    #[arg(long, default_value_t = 200)]
    max_epochs: usize,
    /// Learning-rate override (defaults: 0.001 separate-enhancer,
    /// 0.0001 separate-transnet and joint)
    #[arg(long)]
    lr: Option<f64>,
    /// Batch size override (default 8)
    #[arg(long)]
    batch_size: Option<usize>,
    /// Cascade order for joint training
    #[arg(long, default_value = "enhance-transmit")]
    order: String,
    /// Pre-trained enhancer checkpoint to initialize joint training
    /// (trained on demand when omitted)
    #[arg(long)]
    enhancer: Option<PathBuf>,
    /// Pre-trained codec checkpoint to initialize joint training
    /// (random init when omitted)
    #[arg(long)]
    transnet: Option<PathBuf>,
    /// Output directory for checkpoints and the training log
    #[arg(long)]
    out: PathBuf,
    /// Suppress per-epoch stdout lines (the log file is always written)
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Sweep spec file (key = value sections)
    #[arg(long)]
    spec: PathBuf,
    /// Parallel jobs for independent cells
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
pub struct TransmitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    #[arg(long)]
    enhancer: PathBuf,
    #[arg(long)]
    transnet: PathBuf,
    /// Wireless channel SNR in dB ("inf" for noiseless)
    #[arg(long, default_value = "10")]
    snr_w: String,
    #[arg(long, default_value = "enhance-transmit")]
    order: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clean reference WAV; when given, a metric report is printed
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Deliberately break a probe (negative testing): causal-pad
    #[arg(long)]
    inject_fault: Option<String>,
}

/// Parse an SNR flag: a dB value or "inf".
pub fn parse_snr(s: &str) -> Result<f64, Error> {
    match s {
        "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
        other => other
            .parse::<f64>()
            .map_err(|_| Error::usage(format!("invalid SNR '{other}': expected dB value or 'inf'"))),
    }
}

/// Map a bandwidth ratio to the last-layer channel count.
pub fn ratio_to_c_last(ratio: f64) -> Result<usize, Error> {
    if (ratio - 0.25).abs() < 1e-9 {
        Ok(2)
    } else if (ratio - 0.5).abs() < 1e-9 {
        Ok(4)
    } else if (ratio - 1.0).abs() < 1e-9 {
        Ok(8)
    } else {
        Err(Error::usage(format!(
            "invalid ratio {ratio}: allowed ratios are {{0.25, 0.5, 1}}"
        )))
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Usage(_) => 2,
        Error::Divergence(_) => 3,
        _ => 1,
    }
}

fn run_verify(args: &VerifyArgs) -> Result<i32, Error> {
    let fault = match &args.inject_fault {
        Some(name) => Some(jscc_core::verify::Fault::parse(name)?),
        None => None,
    };
    let started = std::time::Instant::now();
    let checks = jscc_core::verify::run_all(args.seed, fault);
    let mut all_passed = true;
    for check in &checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("check {:<24} {status}  {}", check.name, check.detail);
        all_passed &= check.passed;
    }
    println!(
        "verify: {}/{} checks passed in {:.1} s",
        checks.iter().filter(|c| c.passed).count(),
        checks.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(if all_passed { 0 } else { 1 })
}

fn real_main() -> Result<i32, Error> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(args) => train_cmd::run(args),
        Command::Sweep(args) => sweep::run(args),
        Command::Transmit(args) => transmit::run(args),
        Command::Verify(args) => run_verify(args),
    }
}

fn main() {
    let code = match real_main() {
        Ok(code) => code,
        Err(e) => {
            log::error(e.to_string());
            exit_code_for(&e)
        }
    };
    std::process::exit(code);
}
