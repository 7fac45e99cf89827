//! Shared fixtures for the benchmarks.

use std::path::PathBuf;

use netdiff::{Prepared, RunConfig};

/// Load one of the shipped configurations, with `key=value` overrides.
pub fn prepared(name: &str, overrides: &[&str]) -> Prepared {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name]
        .iter()
        .collect();
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    RunConfig::load(&path, &o)
        .and_then(|c| c.prepare())
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}
