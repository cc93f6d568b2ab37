//! Per-cell aggregates over metrics rows.
//!
//! Every statistic here is a pure function of the rows, so a summary can be
//! recomputed from a metrics CSV alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row per interaction per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: u64,
    pub interaction: u64,
    pub interpreter: String,
    pub selector: String,
    pub user_id: String,
    pub true_regret: f64,
    /// Whether the executed policy is optimal for the reacting user.
    pub aligned: bool,
    /// L1 distance from the estimate that chose the policy to the user's
    /// true weights; empty for non-linear users.
    pub xi_error: Option<f64>,
    pub zeta: f64,
    pub zeta_hat: f64,
    pub policy_id: usize,
}

impl MetricsRow {
    fn sort_key(&self) -> (&str, &str, u64, &str, u64) {
        (&self.interpreter, &self.selector, self.seed, &self.run_id, self.interaction)
    }
}

/// Canonical row order: interpreter, selector, seed, run, interaction.
pub fn sort_rows(rows: &mut [MetricsRow]) {
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Aggregates for one interpreter × selector cell. Optional fields are empty
/// when there is nothing to aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryRow {
    pub interpreter: String,
    pub selector: String,
    pub runs: usize,
    pub interactions: usize,
    /// Mean true regret over every row of the cell.
    pub mean_regret: Option<f64>,
    /// Quartiles of the per-run mean regret.
    pub run_regret_median: Option<f64>,
    pub run_regret_q1: Option<f64>,
    pub run_regret_q3: Option<f64>,
    /// Regret on each run's last interaction.
    pub terminal_regret_mean: Option<f64>,
    pub terminal_regret_median: Option<f64>,
    pub terminal_regret_q1: Option<f64>,
    pub terminal_regret_q3: Option<f64>,
    /// Fraction of runs executing an optimal policy on their last interaction.
    pub aligned_at_horizon: Option<f64>,
    /// Fraction of all rows that are aligned.
    pub aligned_fraction: Option<f64>,
    /// Interactions before a run becomes aligned and stays aligned to the
    /// horizon; runs never settling are counted as censored instead.
    pub interactions_to_alignment_median: Option<f64>,
    pub interactions_to_alignment_q1: Option<f64>,
    pub interactions_to_alignment_q3: Option<f64>,
    pub censored_runs: usize,
}

impl SummaryRow {
    /// A cell that ran `runs` runs of zero interactions.
    pub fn empty(interpreter: &str, selector: &str, runs: usize) -> Self {
        Self {
            interpreter: interpreter.into(),
            selector: selector.into(),
            runs,
            interactions: 0,
            mean_regret: None,
            run_regret_median: None,
            run_regret_q1: None,
            run_regret_q3: None,
            terminal_regret_mean: None,
            terminal_regret_median: None,
            terminal_regret_q1: None,
            terminal_regret_q3: None,
            aligned_at_horizon: None,
            aligned_fraction: None,
            interactions_to_alignment_median: None,
            interactions_to_alignment_q1: None,
            interactions_to_alignment_q3: None,
            censored_runs: 0,
        }
    }
}

/// Linear-interpolation quantile (the common "type 7" definition) of an
/// unsorted sample.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Sample standard error of the mean; zero for a single value.
pub fn standard_error(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    if values.len() < 2 {
        return Some(0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Some((var / values.len() as f64).sqrt())
}

/// Number of leading interactions before the final aligned streak, or
/// `None` when the run ends misaligned.
pub fn interactions_to_alignment(run: &[&MetricsRow]) -> Option<usize> {
    if !run.last()?.aligned {
        return None;
    }
    Some(run.iter().rposition(|r| !r.aligned).map_or(0, |i| i + 1))
}

fn summarize_cell(interpreter: &str, selector: &str, rows: &[&MetricsRow]) -> SummaryRow {
    let mut runs: BTreeMap<&str, Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        runs.entry(&r.run_id).or_default().push(r);
    }
    for run in runs.values_mut() {
        run.sort_by_key(|r| r.interaction);
    }
    let regrets: Vec<f64> = rows.iter().map(|r| r.true_regret).collect();
    let run_means: Vec<f64> = runs
        .values()
        .map(|run| run.iter().map(|r| r.true_regret).sum::<f64>() / run.len() as f64)
        .collect();
    let terminal: Vec<f64> = runs.values().map(|run| run[run.len() - 1].true_regret).collect();
    let aligned_last = runs.values().filter(|run| run[run.len() - 1].aligned).count();
    let tta: Vec<f64> = runs
        .values()
        .filter_map(|run| interactions_to_alignment(run))
        .map(|n| n as f64)
        .collect();
    SummaryRow {
        interpreter: interpreter.into(),
        selector: selector.into(),
        runs: runs.len(),
        interactions: rows.len(),
        mean_regret: mean(&regrets),
        run_regret_median: quantile(&run_means, 0.5),
        run_regret_q1: quantile(&run_means, 0.25),
        run_regret_q3: quantile(&run_means, 0.75),
        terminal_regret_mean: mean(&terminal),
        terminal_regret_median: quantile(&terminal, 0.5),
        terminal_regret_q1: quantile(&terminal, 0.25),
        terminal_regret_q3: quantile(&terminal, 0.75),
        aligned_at_horizon: Some(aligned_last as f64 / runs.len() as f64),
        aligned_fraction: Some(rows.iter().filter(|r| r.aligned).count() as f64 / rows.len() as f64),
        interactions_to_alignment_median: quantile(&tta, 0.5),
        interactions_to_alignment_q1: quantile(&tta, 0.25),
        interactions_to_alignment_q3: quantile(&tta, 0.75),
        censored_runs: runs.len() - tta.len(),
    }
}

/// Aggregates rows per (interpreter, selector), sorted by that pair.
pub fn summarize(rows: &[MetricsRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::Empty("cannot summarize an empty metrics dataset"));
    }
    let mut cells: BTreeMap<(&str, &str), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((&r.interpreter, &r.selector)).or_default().push(r);
    }
    Ok(cells
        .into_iter()
        .map(|((interp, sel), rows)| summarize_cell(interp, sel, &rows))
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

/// Fixed-width console rendering of a summary.
pub fn render_table(summary: &[SummaryRow]) -> String {
    let header = [
        "interpreter",
        "selector",
        "runs",
        "rows",
        "mean regret",
        "terminal (med)",
        "aligned@H",
        "to-align (med [IQR])",
        "censored",
    ];
    let body: Vec<[String; 9]> = summary
        .iter()
        .map(|s| {
            let iqr = match (s.interactions_to_alignment_q1, s.interactions_to_alignment_q3) {
                (Some(a), Some(b)) => format!("{:.1} [{a:.1}, {b:.1}]", s.interactions_to_alignment_median.unwrap_or(f64::NAN)),
                _ => "-".into(),
            };
            [
                s.interpreter.clone(),
                s.selector.clone(),
                s.runs.to_string(),
                s.interactions.to_string(),
                fmt_opt(s.mean_regret),
                fmt_opt(s.terminal_regret_median),
                fmt_opt(s.aligned_at_horizon),
                iqr,
                s.censored_runs.to_string(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| body.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&rule.iter().map(String::as_str).collect::<Vec<_>>());
    for r in &body {
        line(&r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}
