//! Drives the harness from code: parses a TOML config, runs the oracle
//! command into a temporary directory and verifies the manifest digests.
//!
//! ```text
//! cargo run --release --example experiment_harness
//! ```

use manifold_ed::harness::{cmd_oracle, parse_config, OracleConfig, RunManifest};

const CONFIG: &str = r#"
source = "circle"
scheme = "uniform"
k = [2, 4, 8, 16, 32, 64]
mode = "exact"
"#;

fn main() -> manifold_ed::Result<()> {
    let cfg: OracleConfig = parse_config(CONFIG)?;
    let dir = std::env::temp_dir().join("manifold-ed-example");
    let manifest = cmd_oracle(&cfg, &dir)?;
    print!("{}", std::fs::read_to_string(dir.join("oracle.csv")).map_err(|e| manifold_ed::Error::Io {
        context: dir.clone(),
        source: e,
    })?);
    RunManifest::read(&dir)?.verify(&dir)?;
    for f in &manifest.files {
        println!("{}  {} ({} bytes)", f.sha256, f.path, f.bytes);
    }
    Ok(())
}
