//! Turning scalar reactions into preference updates.
//!
//! A raw reaction is first standardized against a per-user Normal–Inverse-Gamma
//! belief, then mapped to a [`PreferenceDelta`] either by the explicit
//! shortfall rule or by a tabular contextual bandit that learns which nudge
//! to apply.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, invalid, Error, Result};
use crate::learner::PolicySet;
use crate::preference::{linear_utility, PreferenceDelta, PreferenceVector, ReturnVector};
use crate::rng::Stream;

/// Per-objective scaling numerator; divided by the front's span.
pub const DEFAULT_ALPHA_SCALE: f64 = 0.05;

/// Prior pseudo-count on the reaction mean used by default. It pins the
/// location at the neutral reaction 0 while the scale is still learned, so a
/// persistently unhappy user keeps producing negative standardized reactions.
pub const NEUTRAL_ANCHOR_KAPPA: f64 = 1e6;

/// Normal–Inverse-Gamma belief over a user's reaction distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionBelief {
    pub mu: f64,
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub n: u64,
}

impl Default for ReactionBelief {
    fn default() -> Self {
        Self {
            mu: 0.0,
            kappa: 1.0,
            a: 2.0,
            b: 1.0,
            n: 0,
        }
    }
}

impl ReactionBelief {
    /// Location fixed at zero, scale learned from the data.
    pub fn neutral_anchored() -> Self {
        Self {
            kappa: NEUTRAL_ANCHOR_KAPPA,
            ..Self::default()
        }
    }

    pub fn new(mu: f64, kappa: f64, a: f64, b: f64) -> Result<Self> {
        let belief = Self { mu, kappa, a, b, n: 0 };
        belief.validate()?;
        Ok(belief)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(invalid("belief.mu", "must be finite"));
        }
        for (field, v) in [("belief.kappa", self.kappa), ("belief.a", self.a), ("belief.b", self.b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, "must be positive"));
            }
        }
        Ok(())
    }

    /// Scale of the posterior predictive (Student-t) distribution.
    pub fn predictive_scale(&self) -> f64 {
        libm::sqrt(self.b * (self.kappa + 1.0) / (self.a * self.kappa))
    }

    /// Standardizes `zeta` against the current belief, then folds it in.
    pub fn standardize(&self, zeta: f64) -> Result<(f64, ReactionBelief)> {
        if !zeta.is_finite() {
            return Err(Error::NonFinite("reaction"));
        }
        self.validate()?;
        let zhat = (zeta - self.mu) / self.predictive_scale();
        let dev = zeta - self.mu;
        let next = ReactionBelief {
            mu: (self.kappa * self.mu + zeta) / (self.kappa + 1.0),
            kappa: self.kappa + 1.0,
            a: self.a + 0.5,
            b: self.b + self.kappa * dev * dev / (2.0 * (self.kappa + 1.0)),
            n: self.n + 1,
        };
        Ok((zhat, next))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpreterKind {
    #[default]
    ExplicitEq1,
    ContextualBandit,
    RandomBaseline,
}

impl InterpreterKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ExplicitEq1 => "explicit-eq1",
            Self::ContextualBandit => "contextual-bandit",
            Self::RandomBaseline => "random-baseline",
        }
    }
}

/// How the activation threshold enters the shortfall rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauMode {
    /// `delta_i = alpha_i * zhat * (obs_i - ideal_i) - tau_i`.
    #[default]
    Literal,
    /// Soft threshold: components smaller than `tau_i` in magnitude are
    /// zeroed, larger ones shrink towards zero by `tau_i`.
    Deadzone,
}

/// Reference return the observed return is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdealMode {
    /// Component-wise maximum over the front.
    #[default]
    Utopia,
    /// Return of the policy that is best under the current estimate.
    FrontMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditConfig {
    pub epsilon: f64,
    pub step_size: f64,
    pub nudge: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            step_size: 0.1,
            nudge: 0.05,
        }
    }
}

impl BanditConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(invalid("bandit.epsilon", "must lie in [0, 1]"));
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(invalid("bandit.step_size", "must lie in (0, 1]"));
        }
        if !(self.nudge.is_finite() && self.nudge > 0.0) {
            return Err(invalid("bandit.nudge", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpreterConfig {
    pub kind: InterpreterKind,
    /// Per-objective scaling; `None` derives `0.05 / span_i` from the front.
    pub alpha: Option<Vec<f64>>,
    /// Per-objective activation thresholds; `None` means all zero.
    pub tau: Option<Vec<f64>>,
    pub tau_mode: TauMode,
    pub ideal_mode: IdealMode,
    pub prior: ReactionBelief,
    pub bandit: BanditConfig,
}

impl Default for InterpreterConfig {
    fn default() -> Self {
        Self {
            kind: InterpreterKind::default(),
            alpha: None,
            tau: None,
            tau_mode: TauMode::default(),
            ideal_mode: IdealMode::default(),
            prior: ReactionBelief::neutral_anchored(),
            bandit: BanditConfig::default(),
        }
    }
}

impl InterpreterConfig {
    pub fn with_kind(kind: InterpreterKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        for (field, v) in [("alpha", &self.alpha), ("tau", &self.tau)] {
            if let Some(v) = v {
                if v.len() != m {
                    return Err(invalid(field, format!("expected {m} entries, got {}", v.len())));
                }
                if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(invalid(field, "entries must be finite and nonnegative"));
                }
            }
        }
        self.prior.validate()?;
        self.bandit.validate()
    }

    /// Fills in defaults that depend on the front.
    pub fn resolve(&self, set: &PolicySet) -> Result<Eq1Params> {
        if set.is_empty() {
            return Err(Error::Empty("policy set"));
        }
        let m = set.num_objectives();
        self.validate(m)?;
        let alpha = match &self.alpha {
            Some(a) => a.clone(),
            None => front_span(set)
                .into_iter()
                .map(|span| DEFAULT_ALPHA_SCALE / span.max(1e-12))
                .map(|a| if a.is_finite() { a } else { 0.0 })
                .collect(),
        };
        let tau = self.tau.clone().unwrap_or_else(|| vec![0.0; m]);
        Ok(Eq1Params {
            alpha,
            tau,
            tau_mode: self.tau_mode,
        })
    }
}

/// Concrete per-objective parameters of the shortfall rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eq1Params {
    pub alpha: Vec<f64>,
    pub tau: Vec<f64>,
    pub tau_mode: TauMode,
}

impl Eq1Params {
    pub fn new(alpha: Vec<f64>, tau: Vec<f64>) -> Self {
        Self {
            alpha,
            tau,
            tau_mode: TauMode::Literal,
        }
    }
}

/// Per-objective span (max - min) of the front returns.
pub fn front_span(set: &PolicySet) -> Vec<f64> {
    let m = set.num_objectives();
    (0..m)
        .map(|i| {
            let (lo, hi) = set.policies.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let v = p.return_vector.values()[i];
                (lo.min(v), hi.max(v))
            });
            hi - lo
        })
        .collect()
}

/// `delta_i = alpha_i * zhat * (observed_i - ideal_i) - tau_i`, or its
/// deadzone variant.
pub fn eq1_delta(zhat: f64, observed: &ReturnVector, ideal: &ReturnVector, params: &Eq1Params) -> Result<PreferenceDelta> {
    let m = observed.len();
    check_dims(m, ideal.len())?;
    check_dims(m, params.alpha.len())?;
    check_dims(m, params.tau.len())?;
    let delta = (0..m)
        .map(|i| {
            let raw = params.alpha[i] * zhat * (observed.values()[i] - ideal.values()[i]);
            match params.tau_mode {
                TauMode::Literal => raw - params.tau[i],
                TauMode::Deadzone => raw.signum() * (raw.abs() - params.tau[i]).max(0.0),
            }
        })
        .collect();
    PreferenceDelta::new(delta)
}

pub fn ideal_returns(set: &PolicySet, mode: IdealMode, xi: &PreferenceVector) -> Result<ReturnVector> {
    if set.is_empty() {
        return Err(Error::Empty("policy set"));
    }
    match mode {
        IdealMode::Utopia => {
            let m = set.num_objectives();
            let mut best = vec![f64::NEG_INFINITY; m];
            for p in &set.policies {
                for (b, v) in best.iter_mut().zip(p.return_vector.values()) {
                    *b = b.max(*v);
                }
            }
            ReturnVector::new(best)
        }
        IdealMode::FrontMax => {
            let returns = set.returns();
            let mut best = 0;
            let mut best_value = linear_utility(xi, &returns[0])?;
            for (i, r) in returns.iter().enumerate().skip(1) {
                let v = linear_utility(xi, r)?;
                if v > best_value {
                    best = i;
                    best_value = v;
                }
            }
            Ok(returns[best].clone())
        }
    }
}

/// Everything the interpreter may condition on for one interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionContext {
    pub user_id: String,
    pub policy_id: usize,
    pub observed: ReturnVector,
    pub xi: PreferenceVector,
    pub population_mean: PreferenceVector,
    pub history_len: u64,
    pub last_zhat: Option<f64>,
}

/// Nudge actions: index 0 is the no-op; `1 + 2i` raises objective `i`,
/// `2 + 2i` lowers it.
pub fn nudge_delta(action: usize, m: usize, magnitude: f64) -> Result<PreferenceDelta> {
    if action > 2 * m {
        return Err(invalid("bandit action", format!("{action} out of range for {m} objectives")));
    }
    let mut d = vec![0.0; m];
    if action > 0 {
        let i = (action - 1) / 2;
        d[i] = if action % 2 == 1 { magnitude } else { -magnitude };
    }
    PreferenceDelta::new(d)
}

/// Tabular action values keyed by a discretized context.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditState {
    pub values: BTreeMap<String, Vec<f64>>,
    /// Action taken last time and the context it was taken in; credited by
    /// the next reaction.
    pub pending: Option<(String, usize)>,
}

impl BanditState {
    /// Context key: preference bins of width 0.1, sign of the reaction and
    /// the executed policy's position along the front.
    pub fn context_key(xi: &PreferenceVector, zhat: f64, front_position: usize) -> String {
        let mut key = String::new();
        for w in xi.weights() {
            key.push_str(&format!("{}.", libm::round(w * 10.0) as i64));
        }
        let sign = if zhat > 0.0 {
            '+'
        } else if zhat < 0.0 {
            '-'
        } else {
            '0'
        };
        key.push(sign);
        key.push_str(&format!("|{front_position}"));
        key
    }

    fn row(&mut self, key: &str, actions: usize) -> &mut Vec<f64> {
        self.values.entry(key.into()).or_insert_with(|| vec![0.0; actions])
    }

    /// Moves `Q(key, action)` a fraction `step` towards `reward`.
    pub fn credit(&mut self, key: &str, action: usize, reward: f64, step: f64, actions: usize) {
        let q = &mut self.row(key, actions)[action];
        *q += step * (reward - *q);
    }

    /// Epsilon-greedy choice; ties go to the lowest index.
    pub fn choose(&mut self, key: &str, actions: usize, epsilon: f64, rng: &mut Stream) -> usize {
        if rng.random::<f64>() < epsilon {
            return rng.random_range(0..actions);
        }
        let row = self.row(key, actions);
        let mut best = 0;
        for (a, q) in row.iter().enumerate().skip(1) {
            if *q > row[best] {
                best = a;
            }
        }
        best
    }
}

/// Interpreter state owned by a user profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpreterState {
    pub belief: ReactionBelief,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandit: Option<BanditState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_zhat: Option<f64>,
}

impl InterpreterState {
    pub fn new(cfg: &InterpreterConfig) -> Self {
        Self {
            belief: cfg.prior,
            bandit: (cfg.kind == InterpreterKind::ContextualBandit).then(BanditState::default),
            last_zhat: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpretation {
    pub zhat: f64,
    pub delta: PreferenceDelta,
    /// Nudge action index for the bandit and random kinds.
    pub action: Option<usize>,
}

/// Maps one reaction to a preference update and advances `state`.
pub fn interpret(
    cfg: &InterpreterConfig,
    params: &Eq1Params,
    ctx: &InteractionContext,
    zeta: f64,
    state: &mut InterpreterState,
    set: &PolicySet,
    rng: &mut Stream,
) -> Result<Interpretation> {
    let m = set.num_objectives();
    check_dims(m, ctx.observed.len())?;
    check_dims(m, ctx.xi.len())?;
    let (zhat, belief) = state.belief.standardize(zeta)?;
    let actions = 2 * m + 1;
    let (delta, action) = match cfg.kind {
        InterpreterKind::ExplicitEq1 => {
            let ideal = ideal_returns(set, cfg.ideal_mode, &ctx.xi)?;
            (eq1_delta(zhat, &ctx.observed, &ideal, params)?, None)
        }
        InterpreterKind::ContextualBandit => {
            let bandit = state.bandit.get_or_insert_with(BanditState::default);
            if let Some((key, a)) = bandit.pending.take() {
                bandit.credit(&key, a, zhat, cfg.bandit.step_size, actions);
            }
            let key = BanditState::context_key(&ctx.xi, zhat, set.front_position(ctx.policy_id)?);
            let a = bandit.choose(&key, actions, cfg.bandit.epsilon, rng);
            bandit.pending = Some((key, a));
            (nudge_delta(a, m, cfg.bandit.nudge)?, Some(a))
        }
        InterpreterKind::RandomBaseline => {
            let a = rng.random_range(0..actions);
            (nudge_delta(a, m, cfg.bandit.nudge)?, Some(a))
        }
    };
    state.belief = belief;
    state.last_zhat = Some(zhat);
    Ok(Interpretation { zhat, delta, action })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::treasure_grid;
    use crate::learner::{assemble_policy_set, LearnedPolicy, Scalarization};
    use crate::env::ActionMap;
    use crate::rng;

    fn rv(v: &[f64]) -> ReturnVector {
        ReturnVector::new(v.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    fn front_set(returns: &[[f64; 2]]) -> PolicySet {
        let spec = treasure_grid();
        let policies = returns
            .iter()
            .map(|r| LearnedPolicy {
                id: 0,
                anchor_weight: PreferenceVector::uniform(2),
                scalarization: Scalarization::Linear,
                action_map: ActionMap::new(),
                return_vector: rv(r),
            })
            .collect();
        assemble_policy_set(&spec, policies).unwrap()
    }

    fn treasure_front() -> PolicySet {
        front_set(&[[1.0, -1.0], [3.0, -3.0], [6.0, -5.0], [10.0, -7.0]])
    }

    #[test]
    fn standardize_examples() {
        let prior = ReactionBelief::default();
        assert_eq!(prior.standardize(0.0).unwrap().0, 0.0);
        let (zhat, post) = prior.standardize(1.0).unwrap();
        assert!(close(zhat, 1.0));
        assert!(close(post.kappa, 2.0));
        assert!(close(post.mu, 0.5));
        assert!(close(post.a, 2.5));
        assert!(close(post.b, 1.25));
        assert_eq!(post.n, 1);
        assert!(prior.standardize(f64::NAN).is_err());
    }

    #[test]
    fn tight_prior_passes_reactions_through() {
        let tight = ReactionBelief::new(0.0, 1e9, 1e9, 1e9).unwrap();
        for z in [-3.0, -0.5, 0.0, 0.7, 2.5] {
            let (zhat, _) = tight.standardize(z).unwrap();
            assert!((zhat - z).abs() < 1e-6, "{zhat} vs {z}");
        }
    }

    #[test]
    fn anchored_prior_keeps_constant_displeasure_negative() {
        let mut b = ReactionBelief::neutral_anchored();
        for _ in 0..200 {
            let (zhat, next) = b.standardize(-4.0).unwrap();
            assert!(zhat < -0.9, "{zhat}");
            b = next;
        }
        assert!(b.mu.abs() < 1e-3);
    }

    #[test]
    fn repeated_reactions_pull_the_mean_monotonically() {
        let mut b = ReactionBelief::default();
        let mut prev = b.mu;
        for _ in 0..100 {
            b = b.standardize(-2.0).unwrap().1;
            assert!(b.mu < prev);
            assert!(b.mu > -2.0);
            prev = b.mu;
        }
        assert!((b.mu + 2.0).abs() < 0.05);
    }

    #[test]
    fn eq1_examples() {
        let any = rv(&[4.0, -2.0]);
        let d = eq1_delta(0.0, &any, &rv(&[9.0, 1.0]), &Eq1Params::new(vec![1.0, 1.0], vec![0.0, 0.0])).unwrap();
        assert_eq!(d.values(), &[0.0, 0.0]);

        let d = eq1_delta(1.0, &rv(&[5.0, 1.0]), &rv(&[7.0, 0.0]), &Eq1Params::new(vec![0.1, 0.1], vec![0.0, 0.0])).unwrap();
        assert!(close(d.values()[0], -0.2) && close(d.values()[1], 0.1));

        let d = eq1_delta(-2.0, &rv(&[3.0, 3.0]), &rv(&[3.0, 5.0]), &Eq1Params::new(vec![0.5, 0.5], vec![0.1, 0.1])).unwrap();
        assert!(close(d.values()[0], -0.1) && close(d.values()[1], 1.9));

        assert!(eq1_delta(1.0, &rv(&[1.0]), &rv(&[1.0, 2.0]), &Eq1Params::new(vec![1.0], vec![0.0])).is_err());
    }

    #[test]
    fn deadzone_shrinks_towards_zero() {
        let mut p = Eq1Params::new(vec![1.0, 1.0], vec![0.5, 0.5]);
        p.tau_mode = TauMode::Deadzone;
        let d = eq1_delta(1.0, &rv(&[0.2, -3.0]), &rv(&[0.0, 0.0]), &p).unwrap();
        assert_eq!(d.values(), &[0.0, -2.5]);
    }

    #[test]
    fn ideal_examples() {
        let set = treasure_front();
        let uniform = PreferenceVector::uniform(2);
        assert_eq!(ideal_returns(&set, IdealMode::Utopia, &uniform).unwrap().values(), &[10.0, -1.0]);
        let w = PreferenceVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(ideal_returns(&set, IdealMode::FrontMax, &w).unwrap().values(), &[10.0, -7.0]);
        let single = front_set(&[[3.0, -3.0]]);
        for mode in [IdealMode::Utopia, IdealMode::FrontMax] {
            assert_eq!(ideal_returns(&single, mode, &uniform).unwrap().values(), &[3.0, -3.0]);
        }
    }

    #[test]
    fn default_alpha_is_scale_free() {
        let params = InterpreterConfig::default().resolve(&treasure_front()).unwrap();
        assert!(close(params.alpha[0], 0.05 / 9.0));
        assert!(close(params.alpha[1], 0.05 / 6.0));
        assert_eq!(params.tau, vec![0.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = InterpreterConfig {
            alpha: Some(vec![1.0]),
            ..InterpreterConfig::default()
        };
        assert!(cfg.validate(2).is_err());
        cfg.alpha = None;
        cfg.tau = Some(vec![0.1, -0.1]);
        assert!(cfg.validate(2).is_err());
        cfg.tau = None;
        cfg.bandit.epsilon = 1.5;
        assert!(cfg.validate(2).is_err());
        let parsed: core::result::Result<InterpreterConfig, _> = serde_json::from_str(r#"{"kind":"oracle"}"#);
        assert!(parsed.is_err());
    }

    fn ctx(set: &PolicySet, policy_id: usize) -> InteractionContext {
        InteractionContext {
            user_id: "u".into(),
            policy_id,
            observed: set.get(policy_id).unwrap().return_vector.clone(),
            xi: PreferenceVector::uniform(2),
            population_mean: PreferenceVector::uniform(2),
            history_len: 0,
            last_zhat: None,
        }
    }

    #[test]
    fn zero_reaction_is_a_no_op_for_eq1() {
        let set = treasure_front();
        let cfg = InterpreterConfig::default();
        let params = cfg.resolve(&set).unwrap();
        let mut state = InterpreterState::new(&cfg);
        let mut rng = rng::stream(0, &[]);
        let out = interpret(&cfg, &params, &ctx(&set, 1), 0.0, &mut state, &set, &mut rng).unwrap();
        assert!(out.delta.is_zero());
        assert_eq!(state.belief.n, 1);
    }

    #[test]
    fn pure_exploration_covers_every_action() {
        let set = treasure_front();
        let mut cfg = InterpreterConfig::with_kind(InterpreterKind::ContextualBandit);
        cfg.bandit.epsilon = 1.0;
        let params = cfg.resolve(&set).unwrap();
        let draw = |seed| {
            let mut state = InterpreterState::new(&cfg);
            let mut rng = rng::stream(seed, &[]);
            (0..500)
                .map(|_| interpret(&cfg, &params, &ctx(&set, 0), -1.0, &mut state, &set, &mut rng).unwrap().action.unwrap())
                .collect::<Vec<_>>()
        };
        let a = draw(3);
        assert_eq!(a, draw(3));
        let mut counts = [0usize; 5];
        for x in &a {
            counts[*x] += 1;
        }
        assert!(counts.iter().all(|&c| c > 60), "{counts:?}");
    }

    #[test]
    fn nudges() {
        assert!(nudge_delta(0, 2, 0.05).unwrap().is_zero());
        assert_eq!(nudge_delta(1, 2, 0.05).unwrap().values(), &[0.05, 0.0]);
        assert_eq!(nudge_delta(4, 2, 0.05).unwrap().values(), &[0.0, -0.05]);
        assert!(nudge_delta(5, 2, 0.05).is_err());
    }

    #[test]
    fn bandit_values_converge_under_constant_reward() {
        let mut b = BanditState::default();
        for _ in 0..200 {
            b.credit("k", 2, -1.5, 0.1, 5);
        }
        assert!((b.values["k"][2] + 1.5).abs() < 1e-6);
        assert_eq!(b.values["k"][0], 0.0);
    }

    #[test]
    fn bandit_credit_is_delayed_by_one_step() {
        let set = treasure_front();
        let mut cfg = InterpreterConfig::with_kind(InterpreterKind::ContextualBandit);
        cfg.bandit.epsilon = 0.0;
        let params = cfg.resolve(&set).unwrap();
        let mut state = InterpreterState::new(&cfg);
        let mut rng = rng::stream(0, &[]);
        interpret(&cfg, &params, &ctx(&set, 0), -1.0, &mut state, &set, &mut rng).unwrap();
        let bandit = state.bandit.as_ref().unwrap();
        assert!(bandit.values.values().all(|row| row.iter().all(|&q| q == 0.0)));
        let (key, a) = bandit.pending.clone().unwrap();
        interpret(&cfg, &params, &ctx(&set, 0), -1.0, &mut state, &set, &mut rng).unwrap();
        assert!(state.bandit.as_ref().unwrap().values[&key][a] < 0.0);
    }
}
