//! Environment ids understood by the CLI and the service.

use realign_core::env::{chore_grid, treasure_grid, MomdpSpec};

use crate::error::{Error, Result};

pub const TREASURE_GRID: &str = "treasure-grid";
pub const CHORE_GRID_PREFIX: &str = "chore-grid-";

/// Environments advertised by default.
pub const DEFAULT_ENVS: [&str; 2] = ["treasure-grid", "chore-grid-0"];

/// `treasure-grid`, or `chore-grid-<seed>` for a seeded household layout.
pub fn resolve(id: &str) -> Option<MomdpSpec> {
    if id == TREASURE_GRID {
        return Some(treasure_grid());
    }
    let seed = id.strip_prefix(CHORE_GRID_PREFIX)?;
    // reject forms such as `chore-grid-+1` or `chore-grid-01` that would
    // alias a canonical id
    if seed.is_empty() || !seed.bytes().all(|b| b.is_ascii_digit()) || (seed.len() > 1 && seed.starts_with('0')) {
        return None;
    }
    seed.parse().ok().map(chore_grid)
}

pub fn resolve_or_config_error(id: &str, path: &str) -> Result<MomdpSpec> {
    resolve(id).ok_or_else(|| Error::config(path, format!("unknown environment `{id}`")))
}
