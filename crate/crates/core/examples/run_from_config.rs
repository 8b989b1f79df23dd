//! Drives an experiment from a JSON config and writes the output set.
//!
//! Usage: run_from_config <config.json> [out-dir]

use std::path::PathBuf;

use detangle::config::{load_config, resolve_workers};
use detangle::runner::run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let config = load_config(&PathBuf::from(args.next().ok_or("missing config path")?))?;
    let out = args.next().map(PathBuf::from);
    let outcome = run(&config, out.as_deref(), resolve_workers(None)?)?;
    for f in &outcome.manifest.files {
        println!("{}  {}", f.sha256, f.file);
    }
    println!("content hash {}", outcome.manifest.content_hash);
    Ok(())
}
