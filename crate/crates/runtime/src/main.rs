use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pulse_radar::{batch, bench, serve, SystemConfig};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "pulse-radar", version, about = "Pulse-radar displacement and vibration monitor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate pulses offline and write a recording plus derived outputs.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        pulses: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scene's noise seed.
        #[arg(long, env = "RADAR_SEED")]
        seed: Option<u64>,
    },
    /// Run the live pipeline behind a WebSocket endpoint.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "RADAR_ADDR")]
        addr: Option<String>,
        #[arg(long, env = "RADAR_SEED")]
        seed: Option<u64>,
    },
    /// Re-run the processing stored in a recording.
    Replay {
        recording: PathBuf,
        /// Write profiles, traces, spectra and summary here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the range compressor.
    Bench {
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Spread each correlation over all cores.
        #[arg(long)]
        parallel: bool,
    },
}

fn load(path: Option<&Path>, seed: Option<u64>) -> Result<SystemConfig> {
    let mut cfg = match path {
        Some(p) => SystemConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => SystemConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.scene.channel.noise_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Simulate { config, pulses, out, seed } => {
            let mut cfg = load(config.as_deref(), seed)?;
            cfg.realtime = false;
            let summary = batch::run_batch(&cfg, pulses, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Serve { config, addr, seed } => {
            let cfg = load(config.as_deref(), seed)?;
            let addr = addr.unwrap_or_else(|| cfg.serve_addr.clone());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve::run_serve(cfg, &addr))?;
        }
        Command::Replay { recording, out } => {
            let summary = batch::replay(&recording, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Bench { iterations, config, parallel } => {
            let cfg = load(config.as_deref(), None)?;
            let report = bench::bench_xcorr(&cfg, iterations, parallel)?;
            println!("{report}");
            if !report.within_budget {
                bail!("mean correlation time exceeds the PRI");
            }
        }
    }
    Ok(())
}
