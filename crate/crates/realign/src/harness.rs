//! Batch runner: every interpreter × selector × seed cell against the
//! configured simulated users.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use realign_core::alignment::{AlignmentSession, InteractionRecord, PopulationPrior, SessionConfig};
use realign_core::env::MomdpSpec;
use realign_core::learner::{build_policy_set, PolicySet};
use realign_core::preference::UtilityFunction;
use realign_core::rng::{derive_seed, hash_str};
use realign_core::selector::SelectorKind;
use realign_core::user::{SimulatedUser, ALIGNED_TOL};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::store::{write_audit, PolicyCache};
use crate::summary::{sort_rows, summarize, MetricsRow, SummaryRow};

const USERS_STREAM: u64 = 0x05E2;
const SESSION_STREAM: u64 = 0x5E55;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const AUDIT_DIR: &str = "audit";

/// Trains the configured policy set, or loads it from the cache directory
/// when one is configured.
pub fn load_policy_set(cfg: &ExperimentConfig) -> Result<(PolicySet, bool)> {
    let spec = cfg.spec()?;
    match &cfg.output.cache_dir {
        Some(dir) => PolicyCache::new(dir).load_or_train(&spec, &cfg.learner),
        None => Ok((build_policy_set(&spec, &cfg.learner)?, false)),
    }
}

/// One interpreter × selector × seed combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub interpreter_index: usize,
    pub interpreter: String,
    pub selector: SelectorKind,
    pub seed: u64,
}

impl Cell {
    pub fn run_id(&self) -> String {
        format!("{}-{}-s{}", self.interpreter.replace('#', "_"), self.selector.name(), self.seed)
    }
}

pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let labels = cfg.interpreter_labels();
    let mut out = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        for &selector in &cfg.selectors {
            for seed in cfg.seeds() {
                out.push(Cell {
                    interpreter_index: i,
                    interpreter: label.clone(),
                    selector,
                    seed,
                });
            }
        }
    }
    out
}

/// Seed of the simulated user at `index` for a given run seed. It does not
/// depend on the cell, so every interpreter and selector faces the same
/// reaction noise and drift for a given seed.
pub fn user_seed(master: u64, seed: u64, index: usize) -> u64 {
    derive_seed(master, &[USERS_STREAM, seed, index as u64])
}

/// Seed of the session's own randomness (exploration), distinct per cell.
pub fn session_seed(master: u64, cell: &Cell) -> u64 {
    derive_seed(
        master,
        &[SESSION_STREAM, hash_str(&cell.interpreter), hash_str(cell.selector.name()), cell.seed],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutput {
    pub cell: Cell,
    pub rows: Vec<MetricsRow>,
    pub audit: Vec<InteractionRecord>,
}

pub fn run_cell(cfg: &ExperimentConfig, spec: &MomdpSpec, set: &Arc<PolicySet>, cell: &Cell) -> Result<CellOutput> {
    let mut users = cfg
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| SimulatedUser::new(u.clone(), user_seed(cfg.master_seed, cell.seed, i)))
        .collect::<realign_core::Result<Vec<_>>>()?;
    let first = cfg.schedule.user_at(0, users.len());
    let session_cfg = SessionConfig {
        interpreter: cfg.interpreters[cell.interpreter_index].clone(),
        selector: cell.selector,
        review_every: cfg.review_every,
        seed: session_seed(cfg.master_seed, cell),
    };
    let mut session = AlignmentSession::new(
        spec.clone(),
        Arc::clone(set),
        session_cfg,
        PopulationPrior::new(spec.num_objectives),
        users[first].user_id(),
    )?;
    let run_id = cell.run_id();
    let front = set.returns();
    let mut rows = Vec::with_capacity(cfg.interactions);
    for t in 0..cfg.interactions {
        let idx = cfg.schedule.user_at(t, users.len());
        if session.current_profile().user_id != users[idx].user_id() {
            session.switch_user(users[idx].user_id())?;
        }
        let record = session.run_interaction(&mut users[idx])?;
        let user = &users[idx];
        let regret = user.true_regret(&record.observed, &front)?;
        let xi_error = match user.true_utility() {
            UtilityFunction::Linear { weights } => Some(record.xi_before.l1_distance(weights)),
            _ => None,
        };
        rows.push(MetricsRow {
            run_id: run_id.clone(),
            seed: cell.seed,
            interaction: record.index,
            interpreter: cell.interpreter.clone(),
            selector: cell.selector.name().into(),
            user_id: record.user_id.clone(),
            true_regret: regret,
            aligned: regret <= ALIGNED_TOL,
            xi_error,
            zeta: record.zeta,
            zeta_hat: record.zeta_hat,
            policy_id: record.policy_id,
        });
        for u in users.iter_mut().filter(|u| u.spec().drift_rate > 0.0) {
            u.drift()?;
        }
    }
    session.close()?;
    Ok(CellOutput {
        cell: cell.clone(),
        rows,
        audit: session.audit_log().to_vec(),
    })
}

/// Everything one experiment produces, in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<MetricsRow>,
    pub summary: Vec<SummaryRow>,
    pub cells: Vec<CellOutput>,
}

/// Runs every cell in parallel. Output does not depend on scheduling: rows
/// are sorted and cells keep their enumeration order.
pub fn run_experiment(cfg: &ExperimentConfig, set: Arc<PolicySet>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    set.validate(&spec)?;
    let cells: Vec<CellOutput> = cells(cfg)
        .par_iter()
        .map(|cell| run_cell(cfg, &spec, &set, cell))
        .collect::<Result<_>>()?;
    let mut rows: Vec<MetricsRow> = cells.iter().flat_map(|c| c.rows.iter().cloned()).collect();
    sort_rows(&mut rows);
    let summary = if rows.is_empty() {
        let mut empty = Vec::new();
        for label in sorted_unique(cfg.interpreter_labels()) {
            for sel in sorted_unique(cfg.selectors.iter().map(|s| s.name().to_string()).collect()) {
                empty.push(SummaryRow::empty(&label, &sel, cfg.seeds().len()));
            }
        }
        empty
    } else {
        summarize(&rows)?
    };
    Ok(ExperimentOutput { rows, summary, cells })
}

fn sorted_unique(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v.dedup();
    v
}

pub fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Header-only CSV for a row type, used when there are no rows.
fn write_header_only(path: &Path, header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    w.write_record(header).map_err(|e| Error::format(path, e))?;
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub const METRICS_HEADER: [&str; 12] = [
    "run_id",
    "seed",
    "interaction",
    "interpreter",
    "selector",
    "user_id",
    "true_regret",
    "aligned",
    "xi_error",
    "zeta",
    "zeta_hat",
    "policy_id",
];

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::format(path, e))).collect()
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::format(path, e))).collect()
}

/// Writes `metrics.csv`, `summary.csv` and, when enabled, one audit file
/// per run under `audit/`. Returns the paths written.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path, audit: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut written = Vec::new();
    let metrics = dir.join(METRICS_FILE);
    if out.rows.is_empty() {
        write_header_only(&metrics, &METRICS_HEADER)?;
    } else {
        write_csv(&metrics, &out.rows)?;
    }
    written.push(metrics);
    let summary = dir.join(SUMMARY_FILE);
    write_csv(&summary, &out.summary)?;
    written.push(summary);
    if audit {
        for cell in &out.cells {
            let path = dir.join(AUDIT_DIR).join(format!("{}.jsonl", cell.cell.run_id()));
            write_audit(&path, &cell.audit)?;
            written.push(path);
        }
    }
    Ok(written)
}
