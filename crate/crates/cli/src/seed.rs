//! Master-seed resolution: `--seed` flag, `SIDELINK_SEED` environment
//! variable, default 0. Accepts a decimal u64 or a 64-character hex string.

use anyhow::{Context, Result};
use sidelink_core::SharedSeed;

pub const SEED_ENV: &str = "SIDELINK_SEED";

pub fn parse_seed(text: &str) -> Result<SharedSeed> {
    if text.len() == 64 {
        return SharedSeed::from_hex(text).map_err(Into::into);
    }
    let v: u64 = text
        .parse()
        .with_context(|| format!("seed must be a decimal u64 or 64 hex chars, got {text:?}"))?;
    Ok(SharedSeed::from_u64(v))
}

/// Flag value if present, else the environment variable, else seed 0.
pub fn resolve_seed(flag: Option<&str>) -> Result<SharedSeed> {
    if let Some(text) = flag {
        return parse_seed(text);
    }
    if let Ok(text) = std::env::var(SEED_ENV) {
        return parse_seed(&text);
    }
    Ok(SharedSeed::from_u64(0))
}
