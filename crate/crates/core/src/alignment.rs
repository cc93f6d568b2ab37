//! The select → execute → react → review loop, with per-user profiles and a
//! population prior.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::{rollout, MomdpSpec, Trajectory};
use crate::error::{check_dims, invalid, Error, Result};
use crate::interpreter::{interpret, Eq1Params, InteractionContext, InterpreterConfig, InterpreterState};
use crate::learner::PolicySet;
use crate::preference::{project_to_simplex, PreferenceDelta, PreferenceVector, ReturnVector};
use crate::rng::{self, Stream};
use crate::selector::{apply_update, explain_selection, initial_select, Explanation, SelectionState, SelectorKind};
use crate::user::SimulatedUser;

const INTERPRETER_STREAM: u64 = 0x1A7E;

/// Everything the agent remembers about one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserProfile {
    pub user_id: String,
    pub xi: PreferenceVector,
    pub preferred_policy: usize,
    pub interpreter: InterpreterState,
    pub interactions: u64,
    /// Interpreted updates not yet applied (batched review).
    pub pending_delta: PreferenceDelta,
    /// Running signed sum of interpreted updates per objective.
    pub delta_total: Vec<f64>,
}

impl UserProfile {
    /// Objective whose cumulative update is largest in magnitude; a
    /// persistent one-sided pull can hint at an objective the front models
    /// poorly.
    pub fn largest_persistent_delta(&self) -> Option<(usize, f64)> {
        self.delta_total
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, d)| *d != 0.0)
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, b)) if b.abs() >= d.abs() => best,
                _ => Some((i, d)),
            })
    }

    pub fn validate(&self, set: &PolicySet) -> Result<()> {
        let m = set.num_objectives();
        check_dims(m, self.xi.len())?;
        check_dims(m, self.pending_delta.len())?;
        check_dims(m, self.delta_total.len())?;
        set.get(self.preferred_policy)?;
        self.interpreter.belief.validate()
    }
}

/// Average of the latest preference estimate contributed by each user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationPrior {
    pub num_objectives: usize,
    pub contributions: BTreeMap<String, PreferenceVector>,
    pub mean: PreferenceVector,
}

impl PopulationPrior {
    pub fn new(num_objectives: usize) -> Self {
        Self {
            num_objectives,
            contributions: BTreeMap::new(),
            mean: PreferenceVector::uniform(num_objectives),
        }
    }

    pub fn count(&self) -> usize {
        self.contributions.len()
    }

    /// Replaces `user_id`'s contribution and recomputes the mean.
    pub fn contribute(&mut self, user_id: &str, xi: &PreferenceVector) -> Result<()> {
        check_dims(self.num_objectives, xi.len())?;
        self.contributions.insert(user_id.into(), xi.clone());
        self.recompute()
    }

    fn recompute(&mut self) -> Result<()> {
        if self.contributions.is_empty() {
            self.mean = PreferenceVector::uniform(self.num_objectives);
            return Ok(());
        }
        let k = self.contributions.len() as f64;
        let mut sum = vec![0.0; self.num_objectives];
        for xi in self.contributions.values() {
            for (s, w) in sum.iter_mut().zip(xi.weights()) {
                *s += w;
            }
        }
        let mean: Vec<f64> = sum.into_iter().map(|s| s / k).collect();
        self.mean = project_to_simplex(&mean)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(self.num_objectives, self.mean.len())?;
        for xi in self.contributions.values() {
            check_dims(self.num_objectives, xi.len())?;
        }
        Ok(())
    }
}

/// Folds `profile` into `prior`. Profiles without interactions carry no
/// information and are ignored.
pub fn update_population_prior(prior: &PopulationPrior, profile: &UserProfile) -> Result<PopulationPrior> {
    let mut next = prior.clone();
    if profile.interactions > 0 {
        next.contribute(&profile.user_id, &profile.xi)?;
    }
    Ok(next)
}

/// One completed loop turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionRecord {
    pub index: u64,
    pub user_id: String,
    pub policy_id: usize,
    pub observed: ReturnVector,
    pub zeta: f64,
    pub zeta_hat: f64,
    pub delta: PreferenceDelta,
    /// Whether the batched update was applied on this interaction.
    pub applied: bool,
    pub xi_before: PreferenceVector,
    pub xi_after: PreferenceVector,
    pub policy_before: usize,
    pub policy_after: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_regret: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpreter_action: Option<usize>,
    pub explanation: Explanation,
    /// Wall-clock milliseconds, set only by interactive front ends and
    /// excluded from determinism checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recorded_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub interpreter: InterpreterConfig,
    pub selector: SelectorKind,
    /// Apply accumulated updates every k-th interaction.
    pub review_every: usize,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            interpreter: InterpreterConfig::default(),
            selector: SelectorKind::default(),
            review_every: 1,
            seed: 0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.review_every == 0 {
            return Err(invalid("review_every", "must be at least 1"));
        }
        self.interpreter.validate(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    AwaitingStep,
    AwaitingReaction,
    Closed,
}

/// An executed episode waiting for the user's reaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub index: u64,
    pub policy_id: usize,
    pub trajectory: Trajectory,
}

/// Live alignment loop for one environment and a fixed policy set.
#[derive(Debug, Clone)]
pub struct AlignmentSession {
    spec: MomdpSpec,
    set: Arc<PolicySet>,
    config: SessionConfig,
    params: Eq1Params,
    population: PopulationPrior,
    profiles: BTreeMap<String, UserProfile>,
    current: UserProfile,
    selection: SelectionState,
    pending: Option<Execution>,
    records: Vec<InteractionRecord>,
    rng: Stream,
    next_index: u64,
    closed: bool,
}

impl AlignmentSession {
    /// Starts a session for `user_id`, initialized from `population`.
    pub fn new(
        spec: MomdpSpec,
        set: Arc<PolicySet>,
        config: SessionConfig,
        population: PopulationPrior,
        user_id: &str,
    ) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::Empty("policy set"));
        }
        let m = set.num_objectives();
        check_dims(spec.num_objectives, m)?;
        config.validate(m)?;
        population.validate()?;
        check_dims(m, population.num_objectives)?;
        let params = config.interpreter.resolve(&set)?;
        let current = fresh_profile(&set, &config, &population, user_id)?;
        let selection = SelectionState {
            policy_id: current.preferred_policy,
            xi: current.xi.clone(),
            kind: config.selector,
        };
        let rng = rng::stream(config.seed, &[INTERPRETER_STREAM]);
        Ok(Self {
            spec,
            set,
            config,
            params,
            population,
            profiles: BTreeMap::new(),
            current,
            selection,
            pending: None,
            records: Vec::new(),
            rng,
            next_index: 0,
            closed: false,
        })
    }

    /// Makes a stored profile known to the session. A profile for the active
    /// user replaces it, provided nothing is in flight.
    pub fn insert_profile(&mut self, profile: UserProfile) -> Result<()> {
        profile.validate(&self.set)?;
        if profile.user_id == self.current.user_id {
            if self.pending.is_some() {
                return Err(Error::PhaseViolation("cannot replace the active profile while awaiting a reaction"));
            }
            self.selection = SelectionState {
                policy_id: profile.preferred_policy,
                xi: profile.xi.clone(),
                kind: self.config.selector,
            };
            self.current = profile;
        } else {
            self.profiles.insert(profile.user_id.clone(), profile);
        }
        Ok(())
    }

    pub fn spec(&self) -> &MomdpSpec {
        &self.spec
    }

    pub fn policy_set(&self) -> &PolicySet {
        &self.set
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn eq1_params(&self) -> &Eq1Params {
        &self.params
    }

    pub fn selection(&self) -> &SelectionState {
        &self.selection
    }

    pub fn current_profile(&self) -> &UserProfile {
        &self.current
    }

    pub fn profile(&self, user_id: &str) -> Option<&UserProfile> {
        if self.current.user_id == user_id {
            Some(&self.current)
        } else {
            self.profiles.get(user_id)
        }
    }

    /// Every profile the session knows, the active one included.
    pub fn profiles(&self) -> impl Iterator<Item = &UserProfile> {
        self.profiles.values().chain(core::iter::once(&self.current))
    }

    pub fn population(&self) -> &PopulationPrior {
        &self.population
    }

    pub fn pending(&self) -> Option<&Execution> {
        self.pending.as_ref()
    }

    pub fn phase(&self) -> Phase {
        if self.closed {
            Phase::Closed
        } else if self.pending.is_some() {
            Phase::AwaitingReaction
        } else {
            Phase::AwaitingStep
        }
    }

    pub fn audit_log(&self) -> &[InteractionRecord] {
        &self.records
    }

    /// Execution phase: rolls out the current policy.
    pub fn execute(&mut self) -> Result<&Execution> {
        match self.phase() {
            Phase::Closed => return Err(Error::PhaseViolation("session is closed")),
            Phase::AwaitingReaction => return Err(Error::PhaseViolation("a reaction is pending")),
            Phase::AwaitingStep => {}
        }
        let policy = self.set.get(self.selection.policy_id)?;
        let trajectory = rollout(&self.spec, &policy.action_map)?;
        Ok(self.pending.insert(Execution {
            index: self.next_index,
            policy_id: policy.id,
            trajectory,
        }))
    }

    /// Review phase: consumes the reaction to the pending execution.
    pub fn review(&mut self, zeta: f64, true_regret: Option<f64>) -> Result<InteractionRecord> {
        self.review_at(zeta, true_regret, None)
    }

    /// Like [`review`](Self::review), stamping the record with a wall-clock
    /// time.
    pub fn review_at(&mut self, zeta: f64, true_regret: Option<f64>, recorded_at: Option<u64>) -> Result<InteractionRecord> {
        if self.closed {
            return Err(Error::PhaseViolation("session is closed"));
        }
        if !zeta.is_finite() {
            return Err(Error::NonFinite("reaction"));
        }
        let exec = self
            .pending
            .take()
            .ok_or(Error::PhaseViolation("no execution is awaiting a reaction"))?;
        let ctx = InteractionContext {
            user_id: self.current.user_id.clone(),
            policy_id: exec.policy_id,
            observed: exec.trajectory.ret.clone(),
            xi: self.selection.xi.clone(),
            population_mean: self.population.mean.clone(),
            history_len: self.current.interactions,
            last_zhat: self.current.interpreter.last_zhat,
        };
        let mut interp_state = self.current.interpreter.clone();
        let out = match interpret(&self.config.interpreter, &self.params, &ctx, zeta, &mut interp_state, &self.set, &mut self.rng) {
            Ok(out) => out,
            Err(e) => {
                self.pending = Some(exec);
                return Err(e);
            }
        };
        let mut pending_delta = self.current.pending_delta.clone();
        pending_delta.add_assign(&out.delta);
        let applied = (self.current.interactions + 1).is_multiple_of(self.config.review_every as u64);
        let m = self.set.num_objectives();
        let step_delta = if applied { pending_delta.clone() } else { PreferenceDelta::zeros(m) };
        let before = self.selection.clone();
        let after = apply_update(&before, &step_delta, &self.set)?;
        let explanation = explain_selection(
            &before,
            &after,
            &step_delta,
            zeta,
            out.zhat,
            exec.index,
            &self.set,
            &self.spec.objective_names,
        )?;
        let record = InteractionRecord {
            index: exec.index,
            user_id: self.current.user_id.clone(),
            policy_id: exec.policy_id,
            observed: exec.trajectory.ret,
            zeta,
            zeta_hat: out.zhat,
            delta: out.delta.clone(),
            applied,
            xi_before: before.xi,
            xi_after: after.xi.clone(),
            policy_before: before.policy_id,
            policy_after: after.policy_id,
            true_regret,
            interpreter_action: out.action,
            explanation,
            recorded_at,
        };

        let profile = &mut self.current;
        profile.interpreter = interp_state;
        profile.pending_delta = if applied { PreferenceDelta::zeros(m) } else { pending_delta };
        for (t, d) in profile.delta_total.iter_mut().zip(out.delta.values()) {
            *t += d;
        }
        profile.interactions += 1;
        profile.xi = after.xi.clone();
        profile.preferred_policy = after.policy_id;
        self.selection = after;
        self.next_index += 1;
        self.records.push(record.clone());
        Ok(record)
    }

    /// One full turn against a simulated user.
    pub fn run_interaction(&mut self, user: &mut SimulatedUser) -> Result<InteractionRecord> {
        let observed = self.execute()?.trajectory.ret.clone();
        let front = self.set.returns();
        let reaction = user.react(&observed, &front)?;
        let regret = user.true_regret(&observed, &front)?;
        self.review(reaction.value, Some(regret))
    }

    /// Stores the active profile and activates `user_id`'s, creating it from
    /// the population prior for unknown users.
    pub fn switch_user(&mut self, user_id: &str) -> Result<&UserProfile> {
        match self.phase() {
            Phase::Closed => return Err(Error::PhaseViolation("session is closed")),
            Phase::AwaitingReaction => return Err(Error::PhaseViolation("a reaction is pending")),
            Phase::AwaitingStep => {}
        }
        if user_id == self.current.user_id {
            return Ok(&self.current);
        }
        self.population = update_population_prior(&self.population, &self.current)?;
        let next = match self.profiles.remove(user_id) {
            Some(p) => p,
            None => fresh_profile(&self.set, &self.config, &self.population, user_id)?,
        };
        let previous = core::mem::replace(&mut self.current, next);
        self.profiles.insert(previous.user_id.clone(), previous);
        self.selection = SelectionState {
            policy_id: self.current.preferred_policy,
            xi: self.current.xi.clone(),
            kind: self.config.selector,
        };
        Ok(&self.current)
    }

    /// Ends the session and contributes the active profile to the
    /// population prior. Idempotent.
    pub fn close(&mut self) -> Result<()> {
        if self.closed {
            return Ok(());
        }
        self.pending = None;
        self.population = update_population_prior(&self.population, &self.current)?;
        self.closed = true;
        Ok(())
    }
}

fn fresh_profile(set: &PolicySet, config: &SessionConfig, population: &PopulationPrior, user_id: &str) -> Result<UserProfile> {
    let m = set.num_objectives();
    let initial = initial_select(set, &population.mean, config.selector)?;
    Ok(UserProfile {
        user_id: user_id.into(),
        xi: initial.xi,
        preferred_policy: initial.policy_id,
        interpreter: InterpreterState::new(&config.interpreter),
        interactions: 0,
        pending_delta: PreferenceDelta::zeros(m),
        delta_total: vec![0.0; m],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{treasure_grid, Action};
    use crate::interpreter::InterpreterKind;
    use crate::learner::{assemble_policy_set, LearnedPolicy, Scalarization};
    use crate::user::UserSpec;

    fn pv(v: &[f64]) -> PreferenceVector {
        PreferenceVector::new(v.to_vec()).unwrap()
    }

    /// The four Pareto-optimal treasure policies, built by hand: go right to
    /// column k, then straight down to its treasure.
    pub(crate) fn treasure_set() -> Arc<PolicySet> {
        let spec = treasure_grid();
        let policies = (0..4u8)
            .map(|col| {
                let mut map = crate::env::ActionMap::new();
                let mut state = spec.initial_state();
                loop {
                    let a = if state.cell.col < col { Action::Right } else { Action::Down };
                    map.insert(state, a);
                    let out = crate::env::step(&spec, &state, a).unwrap();
                    state = out.next;
                    if out.terminal {
                        break;
                    }
                }
                let ret = rollout(&spec, &map).unwrap().ret;
                LearnedPolicy {
                    id: 0,
                    anchor_weight: PreferenceVector::uniform(2),
                    scalarization: Scalarization::Linear,
                    action_map: map,
                    return_vector: ret,
                }
            })
            .collect();
        Arc::new(assemble_policy_set(&spec, policies).unwrap())
    }

    fn session(config: SessionConfig) -> AlignmentSession {
        AlignmentSession::new(treasure_grid(), treasure_set(), config, PopulationPrior::new(2), "alice").unwrap()
    }

    fn noiseless(user_id: &str, w: &[f64]) -> SimulatedUser {
        let mut spec = UserSpec::linear(user_id, pv(w));
        spec.reaction_noise = 0.0;
        SimulatedUser::new(spec, 0).unwrap()
    }

    #[test]
    fn hand_built_front_matches_the_known_returns() {
        let set = treasure_set();
        let returns: Vec<_> = set.returns().iter().map(|r| r.values().to_vec()).collect();
        assert_eq!(returns, vec![vec![1.0, -1.0], vec![3.0, -3.0], vec![6.0, -5.0], vec![10.0, -7.0]]);
    }

    #[test]
    fn new_users_start_from_the_population() {
        let s = session(SessionConfig::default());
        assert_eq!(s.current_profile().xi, PreferenceVector::uniform(2));
        assert_eq!(s.selection().policy_id, 3);
        assert_eq!(s.phase(), Phase::AwaitingStep);
        assert!(s.audit_log().is_empty());
    }

    #[test]
    fn phases_are_enforced() {
        let mut s = session(SessionConfig::default());
        assert!(matches!(s.review(0.0, None), Err(Error::PhaseViolation(_))));
        s.execute().unwrap();
        assert_eq!(s.phase(), Phase::AwaitingReaction);
        assert!(matches!(s.execute(), Err(Error::PhaseViolation(_))));
        assert!(matches!(s.switch_user("bob"), Err(Error::PhaseViolation(_))));
        assert!(s.review(f64::NAN, None).is_err());
        assert_eq!(s.phase(), Phase::AwaitingReaction);
        s.review(-1.0, None).unwrap();
        assert_eq!(s.phase(), Phase::AwaitingStep);
        s.close().unwrap();
        assert!(matches!(s.execute(), Err(Error::PhaseViolation(_))));
    }

    #[test]
    fn records_are_appended_in_order() {
        let mut s = session(SessionConfig::default());
        let mut user = noiseless("alice", &[0.0, 1.0]);
        for i in 0..5 {
            let r = s.run_interaction(&mut user).unwrap();
            assert_eq!(r.index, i);
            assert_eq!(s.audit_log().len() as u64, i + 1);
            assert!(r.true_regret.unwrap() >= 0.0);
        }
    }

    #[test]
    fn uniform_threshold_is_absorbed_at_the_optimum() {
        let mut config = SessionConfig::default();
        config.interpreter.tau = Some(vec![0.02, 0.02]);
        let mut s = session(config);
        // uniform prior selects (10,-7), which is optimal for a treasure-only user
        let mut user = noiseless("alice", &[1.0, 0.0]);
        for _ in 0..5 {
            let r = s.run_interaction(&mut user).unwrap();
            assert_eq!(r.zeta, 0.0);
            assert_eq!(r.policy_after, r.policy_before);
            for (a, b) in r.xi_after.weights().iter().zip(r.xi_before.weights()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn switching_round_trips_profiles() {
        let mut s = session(SessionConfig::default());
        let mut alice = noiseless("alice", &[0.0, 1.0]);
        for _ in 0..3 {
            s.run_interaction(&mut alice).unwrap();
        }
        let saved = s.current_profile().clone();
        let bob = s.switch_user("bob").unwrap().clone();
        // bob is new: the prior now carries alice's estimate
        assert!(bob.xi.l1_distance(&saved.xi) < 1e-12);
        assert_eq!(bob.interactions, 0);
        let mut bob_user = noiseless("bob", &[1.0, 0.0]);
        s.run_interaction(&mut bob_user).unwrap();
        s.switch_user("alice").unwrap();
        assert_eq!(s.current_profile(), &saved);
        assert_eq!(s.selection().xi, saved.xi);
        assert_eq!(s.selection().policy_id, saved.preferred_policy);
    }

    #[test]
    fn switching_without_interactions_keeps_prior_values() {
        let mut s = session(SessionConfig::default());
        s.switch_user("bob").unwrap();
        let alice = s.profile("alice").unwrap();
        assert_eq!(alice.xi, PreferenceVector::uniform(2));
        assert_eq!(alice.interactions, 0);
        assert_eq!(s.population().count(), 0);
    }

    #[test]
    fn population_examples() {
        let mut p = PopulationPrior::new(2);
        assert_eq!(p.mean, PreferenceVector::uniform(2));
        p.contribute("a", &pv(&[0.3, 0.7])).unwrap();
        assert_eq!(p.mean, pv(&[0.3, 0.7]));
        let mut q = PopulationPrior::new(2);
        q.contribute("a", &pv(&[1.0, 0.0])).unwrap();
        q.contribute("b", &pv(&[0.0, 1.0])).unwrap();
        assert_eq!(q.mean, pv(&[0.5, 0.5]));
        q.contribute("a", &pv(&[0.2, 0.8])).unwrap();
        assert!((q.mean.weights()[0] - 0.1).abs() < 1e-12);
        assert_eq!(q.count(), 2);
    }

    #[test]
    fn batched_reviews_apply_every_k() {
        let mut s = session(SessionConfig {
            review_every: 3,
            ..SessionConfig::default()
        });
        let mut user = noiseless("alice", &[0.0, 1.0]);
        let applied: Vec<bool> = (0..6).map(|_| s.run_interaction(&mut user).unwrap().applied).collect();
        assert_eq!(applied, vec![false, false, true, false, false, true]);
        let first = &s.audit_log()[0];
        assert_eq!(first.xi_after, first.xi_before);
    }

    #[test]
    fn identical_sessions_produce_identical_logs() {
        let run = || {
            let mut s = session(SessionConfig {
                interpreter: InterpreterConfig::with_kind(InterpreterKind::ContextualBandit),
                seed: 9,
                ..SessionConfig::default()
            });
            let mut spec = UserSpec::linear("alice", pv(&[0.7, 0.3]));
            spec.drift_rate = 0.01;
            let mut user = SimulatedUser::new(spec, 9).unwrap();
            for _ in 0..30 {
                s.run_interaction(&mut user).unwrap();
                user.drift().unwrap();
            }
            serde_json::to_string(s.audit_log()).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn closing_contributes_to_the_population() {
        let mut s = session(SessionConfig::default());
        let mut user = noiseless("alice", &[0.0, 1.0]);
        s.run_interaction(&mut user).unwrap();
        s.close().unwrap();
        assert_eq!(s.phase(), Phase::Closed);
        assert_eq!(s.population().count(), 1);
        assert!(s.population().mean.l1_distance(&s.current_profile().xi) < 1e-12);
    }

    #[test]
    fn persistent_pull_is_reported() {
        let mut s = session(SessionConfig::default());
        let mut user = noiseless("alice", &[0.0, 1.0]);
        for _ in 0..3 {
            s.run_interaction(&mut user).unwrap();
        }
        let (i, d) = s.current_profile().largest_persistent_delta().unwrap();
        assert_eq!(i, 1);
        assert!(d > 0.0);
    }
}
