//! Offline learning of the multi-policy set.
//!
//! One tabular Q-learner is trained per weight on a simplex lattice. The
//! linear sweep optimises `w . r` and recovers the convex coverage set. A
//! second sweep optimises the weighted Chebyshev distance to a reference
//! point just beyond the best observed return on every objective; it is
//! trained over states augmented with the accumulated return and reaches
//! Pareto-optimal returns on concave parts of the front. The union is
//! de-duplicated and Pareto-filtered.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{rollout, step, ActionMap, MomdpSpec, State};
use crate::error::{check_dims, invalid, Error, Result};
use crate::preference::{pareto_filter, PreferenceVector, ReturnVector};
use crate::rng::{self, Stream};

const LINEAR_STREAM: u64 = 0x11;
const CHEBYSHEV_STREAM: u64 = 0x22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scalarization {
    Linear,
    Chebyshev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Lattice points per simplex edge; `None` picks 21 for two objectives
    /// and 11 (step 0.1) otherwise.
    pub weight_grid_resolution: Option<usize>,
    pub episodes: usize,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Discount used inside the linear learner only; episode returns stay
    /// undiscounted. Slightly below one so ties between equal-valued paths go
    /// to the shorter one.
    pub learner_discount: f64,
    pub sweeps: Vec<Scalarization>,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            weight_grid_resolution: None,
            episodes: 5000,
            learning_rate: 0.1,
            epsilon_start: 0.5,
            epsilon_end: 0.01,
            learner_discount: 0.99,
            sweeps: vec![Scalarization::Linear, Scalarization::Chebyshev],
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.weight_grid_resolution {
            if r < 2 {
                return Err(invalid("weight_grid_resolution", "must be at least 2"));
            }
        }
        if self.episodes == 0 {
            return Err(invalid("episodes", "must be positive"));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.learning_rate) || self.learning_rate > 1.0 {
            return Err(invalid("learning_rate", "must lie in (0, 1]"));
        }
        if !positive(self.epsilon_start) || self.epsilon_start > 1.0 {
            return Err(invalid("epsilon_start", "must lie in (0, 1]"));
        }
        if !positive(self.epsilon_end) || self.epsilon_end > 1.0 {
            return Err(invalid("epsilon_end", "must lie in (0, 1]"));
        }
        if !positive(self.learner_discount) || self.learner_discount > 1.0 {
            return Err(invalid("learner_discount", "must lie in (0, 1]"));
        }
        if self.sweeps.is_empty() {
            return Err(invalid("sweeps", "at least one scalarization is required"));
        }
        Ok(())
    }

    pub fn resolution_for(&self, m: usize) -> usize {
        self.weight_grid_resolution
            .unwrap_or(if m == 2 { 21 } else { 11 })
    }

    fn epsilon(&self, episode: usize) -> f64 {
        if self.episodes <= 1 {
            return self.epsilon_start;
        }
        let frac = episode as f64 / (self.episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedPolicy {
    pub id: usize,
    pub anchor_weight: PreferenceVector,
    pub scalarization: Scalarization,
    pub action_map: ActionMap,
    pub return_vector: ReturnVector,
}

/// Pareto-filtered set of learned policies for one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySet {
    pub env_id: String,
    pub policies: Vec<LearnedPolicy>,
    /// Indices into `policies`, ascending by return (objective 1 first).
    pub front_order: Vec<usize>,
}

impl PolicySet {
    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn num_objectives(&self) -> usize {
        self.policies.first().map_or(0, |p| p.return_vector.len())
    }

    pub fn get(&self, id: usize) -> Result<&LearnedPolicy> {
        self.policies
            .iter()
            .find(|p| p.id == id)
            .ok_or(Error::UnknownPolicy(id))
    }

    pub fn index_of(&self, id: usize) -> Result<usize> {
        self.policies
            .iter()
            .position(|p| p.id == id)
            .ok_or(Error::UnknownPolicy(id))
    }

    pub fn returns(&self) -> Vec<ReturnVector> {
        self.policies.iter().map(|p| p.return_vector.clone()).collect()
    }

    /// Position of policy `id` along `front_order`.
    pub fn front_position(&self, id: usize) -> Result<usize> {
        let idx = self.index_of(id)?;
        Ok(self
            .front_order
            .iter()
            .position(|&i| i == idx)
            .expect("front_order is a permutation"))
    }

    /// Checks every stored invariant against the environment.
    pub fn validate(&self, spec: &MomdpSpec) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::Empty("policy set"));
        }
        if self.env_id != spec.id {
            return Err(invalid("env_id", "policy set belongs to another environment"));
        }
        for (i, p) in self.policies.iter().enumerate() {
            check_dims(spec.num_objectives, p.return_vector.len())?;
            if self.policies[..i].iter().any(|q| q.id == p.id) {
                return Err(invalid("policies", "duplicate policy id"));
            }
            if self.policies[..i].iter().any(|q| q.return_vector == p.return_vector) {
                return Err(invalid("policies", "duplicate return vector"));
            }
            if rollout(spec, &p.action_map)?.ret != p.return_vector {
                return Err(invalid("policies", "stored return does not match a rollout"));
            }
        }
        if pareto_filter(&self.returns())?.len() != self.policies.len() {
            return Err(invalid("policies", "returns are not mutually non-dominated"));
        }
        if self.front_order != front_order(&self.returns()) {
            return Err(invalid("front_order", "inconsistent with stored returns"));
        }
        Ok(())
    }
}

/// Evenly spaced lattice on the simplex including every vertex. The first
/// weight increases slowest: for two objectives the result runs from `(0, 1)`
/// to `(1, 0)`.
pub fn weight_grid(m: usize, resolution: usize) -> Result<Vec<PreferenceVector>> {
    if m < 2 {
        return Err(invalid("num_objectives", "need at least two objectives"));
    }
    if resolution < 2 {
        return Err(invalid("weight_grid_resolution", "must be at least 2"));
    }
    let steps = resolution - 1;
    let mut out = Vec::new();
    let mut parts = vec![0usize; m];
    compositions(steps, 0, &mut parts, &mut |p| {
        let w = p.iter().map(|&k| k as f64 / steps as f64).collect();
        out.push(PreferenceVector::from_raw_unchecked(w));
    });
    Ok(out)
}

fn compositions(remaining: usize, pos: usize, parts: &mut [usize], emit: &mut impl FnMut(&[usize])) {
    if pos + 1 == parts.len() {
        parts[pos] = remaining;
        emit(parts);
        return;
    }
    for k in 0..=remaining {
        parts[pos] = k;
        compositions(remaining - k, pos + 1, parts, emit);
    }
}

fn weight_coordinate(w: &PreferenceVector) -> u64 {
    w.weights()
        .iter()
        .fold(0u64, |acc, x| rng::derive_seed(acc, &[x.to_bits()]))
}

/// Epsilon-greedy choice; exact ties among greedy actions are broken at
/// random so early episodes do not fixate on the first action.
fn choose(q: &[f64], eps: f64, rng: &mut Stream) -> usize {
    if rng.random::<f64>() < eps {
        return rng.random_range(0..q.len());
    }
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = q.iter().filter(|&&v| v == best).count();
    let pick = if ties > 1 { rng.random_range(0..ties) } else { 0 };
    q.iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .nth(pick)
        .map(|(i, _)| i)
        .expect("non-empty action set")
}

/// Greedy action with ties going to the lowest index.
fn greedy(q: Option<&Vec<f64>>) -> usize {
    match q {
        None => 0,
        Some(q) => {
            let mut best = 0;
            for (i, &v) in q.iter().enumerate().skip(1) {
                if v > q[best] {
                    best = i;
                }
            }
            best
        }
    }
}

fn max_q(q: Option<&Vec<f64>>) -> f64 {
    q.map_or(0.0, |q| q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn dot(w: &PreferenceVector, r: &ReturnVector) -> f64 {
    w.weights().iter().zip(r.values()).map(|(a, b)| a * b).sum()
}

fn finish(spec: &MomdpSpec, w: &PreferenceVector, scalarization: Scalarization, action_map: ActionMap) -> Result<LearnedPolicy> {
    let return_vector = rollout(spec, &action_map)?.ret;
    Ok(LearnedPolicy {
        id: 0,
        anchor_weight: w.clone(),
        scalarization,
        action_map,
        return_vector,
    })
}

/// Tabular Q-learning on the scalar reward `w . r`.
pub fn train_scalarized(spec: &MomdpSpec, w: &PreferenceVector, cfg: &LearnerConfig) -> Result<LearnedPolicy> {
    cfg.validate()?;
    check_dims(spec.num_objectives, w.len())?;
    let n_actions = spec.actions.len();
    let mut rng = rng::stream(cfg.seed, &[LINEAR_STREAM, weight_coordinate(w)]);
    let mut q: BTreeMap<State, Vec<f64>> = BTreeMap::new();
    let gamma = cfg.learner_discount;

    for episode in 0..cfg.episodes {
        let eps = cfg.epsilon(episode);
        let mut s = spec.initial_state();
        for t in 0..spec.horizon {
            let a = choose(q.entry(s).or_insert_with(|| vec![0.0; n_actions]), eps, &mut rng);
            let out = step(spec, &s, spec.actions[a])?;
            let last = out.terminal || t + 1 == spec.horizon;
            let target = dot(w, &out.reward) + if last { 0.0 } else { gamma * max_q(q.get(&out.next)) };
            let entry = &mut q.get_mut(&s).expect("inserted above")[a];
            *entry += cfg.learning_rate * (target - *entry);
            s = out.next;
            if out.terminal {
                break;
            }
        }
    }

    // Stationary greedy policy along the path it induces from the start state.
    let mut map = ActionMap::new();
    let mut s = spec.initial_state();
    for _ in 0..spec.horizon {
        let action = match map.get(&s) {
            Some(a) => a,
            None => {
                let a = spec.actions[greedy(q.get(&s))];
                map.insert(s, a);
                a
            }
        };
        let out = step(spec, &s, action)?;
        if out.terminal {
            break;
        }
        s = out.next;
    }
    finish(spec, w, Scalarization::Linear, map)
}

type AugmentedKey = (State, Vec<u64>);

fn augmented_key(s: State, acc: &[f64]) -> AugmentedKey {
    (s, acc.iter().map(|v| v.to_bits()).collect())
}

/// Weight of the sum term in the augmented Chebyshev utility.
pub const CHEBYSHEV_AUGMENTATION: f64 = 0.01;

/// Augmented weighted Chebyshev utility of `ret` relative to `reference`:
/// `-max_i w_i (z_i - r_i) - rho * mean_i (z_i - r_i)`. The sum term makes it
/// strictly increasing in every objective, so wasted steps never tie.
pub fn chebyshev_utility(w: &PreferenceVector, reference: &[f64], ret: &[f64]) -> f64 {
    let gaps = reference.iter().zip(ret).map(|(z, r)| z - r);
    let worst = w
        .weights()
        .iter()
        .zip(gaps.clone())
        .map(|(wi, d)| wi * d)
        .fold(f64::NEG_INFINITY, f64::max);
    let mean = gaps.sum::<f64>() / reference.len() as f64;
    -worst - CHEBYSHEV_AUGMENTATION * mean
}

/// Q-learning on the Chebyshev utility of the episode return. The utility is
/// paid once at episode end, so the state is augmented with the return
/// accumulated so far, and learning is undiscounted (a discount would favour
/// postponing a negative terminal payoff). Requires an undiscounted
/// environment.
pub fn train_chebyshev(
    spec: &MomdpSpec,
    w: &PreferenceVector,
    reference: &[f64],
    cfg: &LearnerConfig,
) -> Result<LearnedPolicy> {
    cfg.validate()?;
    check_dims(spec.num_objectives, w.len())?;
    check_dims(spec.num_objectives, reference.len())?;
    if spec.discount != 1.0 {
        return Err(invalid("discount", "chebyshev sweep needs an undiscounted environment"));
    }
    let m = spec.num_objectives;
    let n_actions = spec.actions.len();
    let mut rng = rng::stream(cfg.seed, &[CHEBYSHEV_STREAM, weight_coordinate(w)]);
    let mut q: BTreeMap<AugmentedKey, Vec<f64>> = BTreeMap::new();

    for episode in 0..cfg.episodes {
        let eps = cfg.epsilon(episode);
        let mut s = spec.initial_state();
        let mut acc = vec![0.0; m];
        for t in 0..spec.horizon {
            let key = augmented_key(s, &acc);
            let a = choose(q.entry(key.clone()).or_insert_with(|| vec![0.0; n_actions]), eps, &mut rng);
            let out = step(spec, &s, spec.actions[a])?;
            for (x, r) in acc.iter_mut().zip(out.reward.values()) {
                *x += r;
            }
            let last = out.terminal || t + 1 == spec.horizon;
            let target = if last {
                chebyshev_utility(w, reference, &acc)
            } else {
                max_q(q.get(&augmented_key(out.next, &acc)))
            };
            let entry = &mut q.get_mut(&key).expect("inserted above")[a];
            *entry += cfg.learning_rate * (target - *entry);
            s = out.next;
            if out.terminal {
                break;
            }
        }
    }

    // Walk the augmented greedy path, keeping the first action chosen in each
    // environment state so the result is a stationary state-to-action map.
    let mut map = ActionMap::new();
    let mut s = spec.initial_state();
    let mut acc = vec![0.0; m];
    for _ in 0..spec.horizon {
        let action = match map.get(&s) {
            Some(a) => a,
            None => {
                let a = spec.actions[greedy(q.get(&augmented_key(s, &acc)))];
                map.insert(s, a);
                a
            }
        };
        let out = step(spec, &s, action)?;
        if out.terminal {
            break;
        }
        for (x, r) in acc.iter_mut().zip(out.reward.values()) {
            *x += r;
        }
        s = out.next;
    }
    finish(spec, w, Scalarization::Chebyshev, map)
}

/// Reference point for the Chebyshev sweep: the best return seen on each
/// objective plus a tenth of that objective's observed span (at least 0.1).
pub fn chebyshev_reference(returns: &[ReturnVector]) -> Result<Vec<f64>> {
    let first = returns.first().ok_or(Error::Empty("reference returns"))?;
    let m = first.len();
    let mut hi = first.values().to_vec();
    let mut lo = hi.clone();
    for r in returns {
        check_dims(m, r.len())?;
        for i in 0..m {
            hi[i] = hi[i].max(r.values()[i]);
            lo[i] = lo[i].min(r.values()[i]);
        }
    }
    Ok(hi
        .iter()
        .zip(&lo)
        .map(|(h, l)| h + 0.1 * (h - l).max(1.0))
        .collect())
}

/// Lexicographically ascending order of the returns, objective 1 first.
pub fn front_order(returns: &[ReturnVector]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..returns.len()).collect();
    order.sort_by(|&a, &b| {
        returns[a]
            .values()
            .iter()
            .zip(returns[b].values())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    order
}

/// Collapses duplicate returns (first candidate wins), Pareto-filters, assigns
/// ids in candidate order and computes the front order.
pub fn assemble_policy_set(spec: &MomdpSpec, candidates: Vec<LearnedPolicy>) -> Result<PolicySet> {
    let mut unique: Vec<LearnedPolicy> = Vec::new();
    for c in candidates {
        if !unique.iter().any(|u| u.return_vector == c.return_vector) {
            unique.push(c);
        }
    }
    let returns: Vec<ReturnVector> = unique.iter().map(|p| p.return_vector.clone()).collect();
    let keep = pareto_filter(&returns)?;
    let mut policies: Vec<LearnedPolicy> = Vec::with_capacity(keep.len());
    for (id, idx) in keep.into_iter().enumerate() {
        let mut p = unique[idx].clone();
        p.id = id;
        policies.push(p);
    }
    let front_order = front_order(&policies.iter().map(|p| p.return_vector.clone()).collect::<Vec<_>>());
    Ok(PolicySet {
        env_id: spec.id.clone(),
        policies,
        front_order,
    })
}

/// Vertex weights of the lattice (one per objective).
pub fn vertex_weights(m: usize) -> Vec<PreferenceVector> {
    (0..m)
        .map(|i| {
            let mut w = vec![0.0; m];
            w[i] = 1.0;
            PreferenceVector::from_raw_unchecked(w)
        })
        .collect()
}

/// Full sequential learning phase.
pub fn build_policy_set(spec: &MomdpSpec, cfg: &LearnerConfig) -> Result<PolicySet> {
    cfg.validate()?;
    let grid = weight_grid(spec.num_objectives, cfg.resolution_for(spec.num_objectives))?;
    let linear_weights = if cfg.sweeps.contains(&Scalarization::Linear) {
        grid.clone()
    } else {
        vertex_weights(spec.num_objectives)
    };
    let linear = linear_weights
        .iter()
        .map(|w| train_scalarized(spec, w, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut candidates = Vec::new();
    if cfg.sweeps.contains(&Scalarization::Chebyshev) {
        let reference = chebyshev_reference(&linear.iter().map(|p| p.return_vector.clone()).collect::<Vec<_>>())?;
        for w in &grid {
            candidates.push(train_chebyshev(spec, w, &reference, cfg)?);
        }
    }
    if cfg.sweeps.contains(&Scalarization::Linear) {
        candidates.splice(0..0, linear);
    }
    assemble_policy_set(spec, candidates)
}
