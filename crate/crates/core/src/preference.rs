//! Preference vectors, utilities over return vectors, Pareto dominance and
//! simplex geometry.
//!
//! All objectives are maximised; costs are encoded as negative returns.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, invalid, Error, Result};

/// Tolerance on the simplex sum constraint.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Per-objective episodic return of an executed policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReturnVector(Vec<f64>);

impl ReturnVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("return vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<ReturnVector> for Vec<f64> {
    fn from(r: ReturnVector) -> Self {
        r.0
    }
}

/// Nonnegative objective weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PreferenceVector(Vec<f64>);

impl PreferenceVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("preference vector"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("preference vector"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(invalid("weights", "weights must be nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(invalid("weights", alloc::format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Adds a delta and projects back onto the simplex.
    pub fn shifted(&self, delta: &PreferenceDelta) -> Result<Self> {
        check_dims(self.len(), delta.len())?;
        let raw: Vec<f64> = self.0.iter().zip(delta.values()).map(|(w, d)| w + d).collect();
        project_to_simplex(&raw)
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    pub(crate) fn from_raw_unchecked(weights: Vec<f64>) -> Self {
        Self(weights)
    }
}

impl TryFrom<Vec<f64>> for PreferenceVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PreferenceVector> for Vec<f64> {
    fn from(p: PreferenceVector) -> Self {
        p.0
    }
}

/// Signed per-objective update to a preference vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreferenceDelta(Vec<f64>);

impl PreferenceDelta {
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if deltas.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("preference delta"));
        }
        Ok(Self(deltas))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&d| d == 0.0)
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }
}

/// Ordering over return vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UtilityFunction {
    Linear { weights: PreferenceVector },
    /// Objectives compared in `priority` order after clipping each at its
    /// threshold; `thresholds[k]` applies to `priority[k]`, and the final
    /// objective in the order is compared unclipped.
    ThresholdedLexicographic {
        priority: Vec<usize>,
        thresholds: Vec<f64>,
    },
}

impl UtilityFunction {
    pub fn linear(weights: PreferenceVector) -> Self {
        Self::Linear { weights }
    }

    pub fn lexicographic(priority: Vec<usize>, thresholds: Vec<f64>) -> Result<Self> {
        let u = Self::ThresholdedLexicographic {
            priority,
            thresholds,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn num_objectives(&self) -> usize {
        match self {
            Self::Linear { weights } => weights.len(),
            Self::ThresholdedLexicographic { priority, .. } => priority.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Linear { .. } => Ok(()),
            Self::ThresholdedLexicographic {
                priority,
                thresholds,
            } => {
                let m = priority.len();
                if m == 0 {
                    return Err(Error::Empty("priority order"));
                }
                let mut seen = vec![false; m];
                for &p in priority {
                    if p >= m || seen[p] {
                        return Err(invalid("priority", "not a permutation of the objectives"));
                    }
                    seen[p] = true;
                }
                if thresholds.len() + 1 != m {
                    return Err(invalid("thresholds", "expected one threshold per non-final objective"));
                }
                if thresholds.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite("thresholds"));
                }
                Ok(())
            }
        }
    }
}

/// Weighted sum of a return vector.
pub fn linear_utility(w: &PreferenceVector, r: &ReturnVector) -> Result<f64> {
    check_dims(w.len(), r.len())?;
    Ok(w.weights().iter().zip(r.values()).map(|(a, b)| a * b).sum())
}

fn cmp_f64(a: f64, b: f64) -> Ordering {
    if a < b {
        Ordering::Less
    } else if a > b {
        Ordering::Greater
    } else {
        Ordering::Equal
    }
}

/// Thresholded lexicographic comparison of two return vectors.
pub fn tlo_compare(u: &UtilityFunction, a: &ReturnVector, b: &ReturnVector) -> Result<Ordering> {
    let UtilityFunction::ThresholdedLexicographic {
        priority,
        thresholds,
    } = u
    else {
        return Err(Error::NotLexicographic);
    };
    check_dims(priority.len(), a.len())?;
    check_dims(priority.len(), b.len())?;
    for (rank, &obj) in priority.iter().enumerate() {
        let (x, y) = match thresholds.get(rank) {
            Some(&c) => (a.values()[obj].min(c), b.values()[obj].min(c)),
            None => (a.values()[obj], b.values()[obj]),
        };
        match cmp_f64(x, y) {
            Ordering::Equal => continue,
            decided => return Ok(decided),
        }
    }
    Ok(Ordering::Equal)
}

/// `a` Pareto-dominates `b`: no worse everywhere, strictly better somewhere.
pub fn dominates(a: &ReturnVector, b: &ReturnVector) -> Result<bool> {
    check_dims(a.len(), b.len())?;
    Ok(dominates_unchecked(a.values(), b.values()))
}

fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

/// Indices (ascending) of the vectors not dominated by any other.
///
/// Candidates are visited in descending lexicographic order. A dominator is
/// always lexicographically greater than what it dominates, so each candidate
/// only needs checking against the non-dominated vectors already kept.
pub fn pareto_filter(set: &[ReturnVector]) -> Result<Vec<usize>> {
    let first = set.first().ok_or(Error::Empty("pareto filter input"))?;
    let m = first.len();
    for r in set {
        check_dims(m, r.len())?;
    }
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (set[i].values(), set[j].values());
        a.iter()
            .zip(b)
            .map(|(x, y)| cmp_f64(*y, *x))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let dominated = kept
            .iter()
            .any(|&k| dominates_unchecked(set[k].values(), set[i].values()));
        if !dominated {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    Ok(kept)
}

/// Euclidean projection onto the probability simplex.
///
/// Sort descending, find the largest `k` with
/// `x_(k) - (sum_{j<=k} x_(j) - 1) / k > 0`, subtract that threshold and clamp
/// negatives to zero.
pub fn project_to_simplex(x: &[f64]) -> Result<PreferenceVector> {
    if x.is_empty() {
        return Err(Error::Empty("simplex projection input"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("simplex projection input"));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    let y = x.iter().map(|&v| (v - theta).max(0.0)).collect();
    Ok(PreferenceVector::from_raw_unchecked(y))
}

/// Index of the best return under `u`; ties go to the lowest index.
pub fn utility_argmax(u: &UtilityFunction, returns: &[ReturnVector]) -> Result<usize> {
    if returns.is_empty() {
        return Err(Error::Empty("utility argmax candidates"));
    }
    let mut best = 0;
    match u {
        UtilityFunction::Linear { weights } => {
            let mut best_value = linear_utility(weights, &returns[0])?;
            for (i, r) in returns.iter().enumerate().skip(1) {
                let v = linear_utility(weights, r)?;
                if v > best_value {
                    best = i;
                    best_value = v;
                }
            }
        }
        UtilityFunction::ThresholdedLexicographic { .. } => {
            for (i, r) in returns.iter().enumerate().skip(1) {
                if tlo_compare(u, r, &returns[best])? == Ordering::Greater {
                    best = i;
                }
            }
        }
    }
    Ok(best)
}
