use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stirap_cli::{run, Command, Preset, RunConfig};

#[derive(Parser)]
#[command(name = "stirap", version, about = "STIRAP between D3/2 and D5/2 in a trapped 40Ca+ ion")]
struct Cli {
    /// TOML config file in lab units (MHz/2π, μs, ms)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: output.dir from the config, else "out"]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed for simulated measurements
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write SVG plots
    #[arg(long, global = true)]
    plot: bool,
    /// Parameter preset applied before the config file
    #[arg(long, global = true, value_parser = ["fig3", "fig4", "width", "train", "experimental"])]
    preset: Option<String>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Single trajectory: populations and D3/2–D5/2 coherence vs time
    Simulate,
    /// Efficiency vs pulse delay Δτ
    ScanDelay,
    /// Efficiency vs two-photon detuning
    ScanDetuning,
    /// Efficiency vs pulse width σ with Δτ = 2σ
    ScanWidth,
    /// Alternating trains of 1..max_pairs pairs
    PulseTrain,
    /// Per-ion delay scans across a Coulomb string
    StringScan,
    /// Nelder–Mead search over (Δτ, σ)
    Optimize,
    /// Monte-Carlo L/S/B counts and the (L−S)/(L−B) estimator
    Detect,
    /// Rabi envelopes and adiabaticity trace
    Envelopes,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::ScanDelay => Command::ScanDelay,
            Sub::ScanDetuning => Command::ScanDetuning,
            Sub::ScanWidth => Command::ScanWidth,
            Sub::PulseTrain => Command::PulseTrain,
            Sub::StringScan => Command::StringScan,
            Sub::Optimize => Command::Optimize,
            Sub::Detect => Command::Detect,
            Sub::Envelopes => Command::Envelopes,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let preset = cli.preset.as_deref().map(Preset::parse).transpose()?;
        let mut cfg = match &cli.config {
            Some(path) => RunConfig::from_file(preset, path)?,
            None => RunConfig::from_sources(preset, "")?,
        };
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        let plot = cli.plot || cfg.output.plot;
        let out = cli.out.clone().or_else(|| cfg.output.dir.clone().map(PathBuf::from)).unwrap_or_else(|| "out".into());
        run(cli.command.into(), &cfg, &out, plot)
    })();
    match result {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
