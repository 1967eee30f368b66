//! Command-line front end. Each subcommand writes into
//! `$MANIFOLD_ED_OUT/<command>/<name>/` (default root `./out`).
//!
//! On failure a JSON line `{"error": {"category": ..., "message": ...}}` is
//! printed to stderr and the process exits with the category's code.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use manifold_ed::harness::{
    self, cmd_bounds, cmd_oracle, cmd_probe, cmd_repro, cmd_sweep, cmd_train, load_config, Figure, RunManifest,
    Scale,
};
use manifold_ed::{Error, Result};

#[derive(Parser)]
#[command(name = "manifold-ed", version, about = "Entropy-distortion experiments for circular sources")]
struct Cli {
    /// Output directory, overriding `$MANIFOLD_ED_OUT/<command>/<name>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower and upper entropy-distortion curves on a distortion grid.
    Bounds { config: PathBuf },
    /// Entropy and distortion of exact quantizers.
    Oracle { config: PathBuf },
    /// Train one neural compressor.
    Train { config: PathBuf },
    /// Train over a list of λ values and seeds.
    Sweep { config: PathBuf },
    /// Quantized latents or reconstructions over the source parameter.
    Probe { config: PathBuf },
    /// Regenerate the CSVs of one figure.
    Repro {
        /// fig1, fig2a, fig2b, fig3a, fig3b or ramp_rd.
        figure: String,
        /// Escalated budget (more iterations, samples and seeds).
        #[arg(long, conflicts_with = "smoke")]
        full: bool,
        /// Seconds-scale pipeline check.
        #[arg(long)]
        smoke: bool,
    },
    /// Quick internal consistency checks.
    Selftest,
}

fn out_dir(cli_out: &Option<PathBuf>, command: &str, name: &str) -> PathBuf {
    cli_out
        .clone()
        .unwrap_or_else(|| harness::output_root().join(command).join(name))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

fn report(dir: &Path, manifest: &RunManifest) {
    for f in &manifest.files {
        println!("{}  {}", f.sha256, dir.join(&f.path).display());
    }
    for f in &manifest.failures {
        eprintln!("warning: {} failed ({}): {}", f.stage, f.category, f.message);
    }
}

fn run(cli: Cli) -> Result<()> {
    let (dir, manifest) = match &cli.command {
        Command::Bounds { config } => {
            let dir = out_dir(&cli.out, "bounds", &stem(config));
            let m = cmd_bounds(&load_config(config)?, &dir)?;
            (dir, m)
        }
        Command::Oracle { config } => {
            let dir = out_dir(&cli.out, "oracle", &stem(config));
            let m = cmd_oracle(&load_config(config)?, &dir)?;
            (dir, m)
        }
        Command::Train { config } => {
            let dir = out_dir(&cli.out, "train", &stem(config));
            let m = cmd_train(&load_config(config)?, &dir)?;
            (dir, m)
        }
        Command::Sweep { config } => {
            let dir = out_dir(&cli.out, "sweep", &stem(config));
            let m = cmd_sweep(&load_config(config)?, &dir)?;
            (dir, m)
        }
        Command::Probe { config } => {
            let dir = out_dir(&cli.out, "probe", &stem(config));
            let m = cmd_probe(&load_config(config)?, &dir)?;
            (dir, m)
        }
        Command::Repro { figure, full, smoke } => {
            let figure: Figure = figure.parse()?;
            let scale = match (full, smoke) {
                (true, _) => Scale::Full,
                (_, true) => Scale::Smoke,
                _ => Scale::Desk,
            };
            let dir = out_dir(&cli.out, "repro", figure.id());
            let m = cmd_repro(figure, scale, &dir)?;
            (dir, m)
        }
        Command::Selftest => {
            let outcomes = harness::selftest();
            let failed = outcomes.iter().filter(|c| !c.passed).count();
            for c in &outcomes {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                return Err(Error::Check(format!("{failed} of {} checks failed", outcomes.len())));
            }
            return Ok(());
        }
    };
    report(&dir, &manifest);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "error": { "category": e.category(), "message": e.to_string() }
            });
            eprintln!("{line}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
