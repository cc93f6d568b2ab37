//! Choosing which stored policy to execute.
//!
//! Selection never touches the policies themselves: it only moves the
//! preference estimate and picks a member of the fixed front.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::learner::PolicySet;
use crate::preference::{linear_utility, utility_argmax, PreferenceDelta, PreferenceVector, ReturnVector, UtilityFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorKind {
    /// Jump straight to the best policy under the new estimate.
    #[default]
    Argmax,
    /// Move at most one neighbour along the front per update.
    Steering,
    /// Keep the initial policy forever; the estimate still moves. Used as an
    /// evaluation baseline.
    Frozen,
}

impl SelectorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Argmax => "argmax",
            Self::Steering => "steering",
            Self::Frozen => "frozen",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionState {
    pub policy_id: usize,
    pub xi: PreferenceVector,
    pub kind: SelectorKind,
}

/// Id of the best policy in `set` under linear weights `xi`.
pub fn argmax_policy(set: &PolicySet, xi: &PreferenceVector) -> Result<usize> {
    if set.is_empty() {
        return Err(Error::Empty("policy set"));
    }
    let idx = utility_argmax(&UtilityFunction::linear(xi.clone()), &set.returns())?;
    Ok(set.policies[idx].id)
}

pub fn initial_select(set: &PolicySet, prior: &PreferenceVector, kind: SelectorKind) -> Result<SelectionState> {
    check_dims(set.num_objectives(), prior.len())?;
    Ok(SelectionState {
        policy_id: argmax_policy(set, prior)?,
        xi: prior.clone(),
        kind,
    })
}

fn steer_along_front(set: &PolicySet, current: usize, xi: &PreferenceVector) -> Result<usize> {
    let pos = set.front_position(current)?;
    let utility = |p: usize| linear_utility(xi, &set.policies[set.front_order[p]].return_vector);
    let mut best_pos = pos;
    let mut best = utility(pos)?;
    // Prefer the neighbour with higher objective-1 on exact ties.
    for next in [pos.checked_add(1), pos.checked_sub(1)].into_iter().flatten() {
        if next < set.len() {
            let u = utility(next)?;
            if u > best {
                best = u;
                best_pos = next;
            }
        }
    }
    Ok(set.policies[set.front_order[best_pos]].id)
}

fn steer_by_anchor(set: &PolicySet, current: usize, xi: &PreferenceVector) -> Result<usize> {
    let here = set.get(current)?;
    let mut others: Vec<(f64, usize)> = set
        .policies
        .iter()
        .filter(|p| p.id != current)
        .map(|p| (p.anchor_weight.l1_distance(&here.anchor_weight), p.id))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best = (here.anchor_weight.l1_distance(xi), current);
    for &(_, id) in others.iter().take(2) {
        let d = set.get(id)?.anchor_weight.l1_distance(xi);
        if d < best.0 {
            best = (d, id);
        }
    }
    Ok(best.1)
}

/// Applies `delta` to the estimate and re-selects.
pub fn apply_update(state: &SelectionState, delta: &PreferenceDelta, set: &PolicySet) -> Result<SelectionState> {
    check_dims(state.xi.len(), delta.len())?;
    check_dims(set.num_objectives(), delta.len())?;
    if delta.is_zero() {
        return Ok(state.clone());
    }
    let xi = state.xi.shifted(delta)?;
    let policy_id = match state.kind {
        SelectorKind::Argmax => argmax_policy(set, &xi)?,
        SelectorKind::Steering if set.num_objectives() == 2 => steer_along_front(set, state.policy_id, &xi)?,
        SelectorKind::Steering => steer_by_anchor(set, state.policy_id, &xi)?,
        SelectorKind::Frozen => state.policy_id,
    };
    Ok(SelectionState {
        policy_id,
        xi,
        kind: state.kind,
    })
}

/// Human-readable account of one self-review step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Explanation {
    pub interaction: u64,
    pub reaction: f64,
    pub standardized: f64,
    pub delta: PreferenceDelta,
    pub xi_before: PreferenceVector,
    pub xi_after: PreferenceVector,
    pub policy_before: usize,
    pub policy_after: usize,
    pub return_before: ReturnVector,
    pub return_after: ReturnVector,
    pub selector: SelectorKind,
    pub sentence: String,
}

impl Explanation {
    pub fn is_no_change(&self) -> bool {
        self.xi_before == self.xi_after && self.policy_before == self.policy_after
    }
}

#[allow(clippy::too_many_arguments)]
pub fn explain_selection(
    before: &SelectionState,
    after: &SelectionState,
    delta: &PreferenceDelta,
    reaction: f64,
    standardized: f64,
    interaction: u64,
    set: &PolicySet,
    objective_names: &[String],
) -> Result<Explanation> {
    let return_before = set.get(before.policy_id)?.return_vector.clone();
    let return_after = set.get(after.policy_id)?.return_vector.clone();
    let policy_part = if before.policy_id == after.policy_id {
        format!("policy {} kept", before.policy_id)
    } else {
        format!("policy {} → {}", before.policy_id, after.policy_id)
    };
    let shift = before
        .xi
        .weights()
        .iter()
        .zip(after.xi.weights())
        .map(|(b, a)| a - b)
        .enumerate()
        .fold(None::<(usize, f64)>, |best, (i, d)| match best {
            Some((_, bd)) if bd >= d => best,
            _ => Some((i, d)),
        });
    let sentence = match shift {
        Some((i, d)) if d > 0.0 => {
            let name = objective_names.get(i).cloned().unwrap_or_else(|| format!("objective {i}"));
            format!("reaction {reaction:.2} on interaction {interaction} shifted weight toward '{name}' by {d:.2}; {policy_part}")
        }
        _ if before.policy_id == after.policy_id => {
            format!("reaction {reaction:.2} on interaction {interaction}: no change; {policy_part}")
        }
        _ => format!("reaction {reaction:.2} on interaction {interaction}: {policy_part}"),
    };
    Ok(Explanation {
        interaction,
        reaction,
        standardized,
        delta: delta.clone(),
        xi_before: before.xi.clone(),
        xi_after: after.xi.clone(),
        policy_before: before.policy_id,
        policy_after: after.policy_id,
        return_before,
        return_after,
        selector: before.kind,
        sentence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{treasure_grid, ActionMap};
    use crate::learner::{assemble_policy_set, LearnedPolicy, Scalarization};
    use alloc::vec;

    fn pv(v: &[f64]) -> PreferenceVector {
        PreferenceVector::new(v.to_vec()).unwrap()
    }

    fn set_of(returns: &[Vec<f64>], anchors: &[Vec<f64>]) -> PolicySet {
        let policies = returns
            .iter()
            .zip(anchors)
            .map(|(r, a)| LearnedPolicy {
                id: 0,
                anchor_weight: pv(a),
                scalarization: Scalarization::Linear,
                action_map: ActionMap::new(),
                return_vector: ReturnVector::new(r.clone()).unwrap(),
            })
            .collect();
        assemble_policy_set(&treasure_grid(), policies).unwrap()
    }

    /// Ids follow the listed order: 0 ↔ (1,-1) … 3 ↔ (10,-7).
    fn treasure() -> PolicySet {
        set_of(
            &[vec![1.0, -1.0], vec![3.0, -3.0], vec![6.0, -5.0], vec![10.0, -7.0]],
            &[vec![0.0, 1.0], vec![0.3, 0.7], vec![0.6, 0.4], vec![1.0, 0.0]],
        )
    }

    #[test]
    fn initial_selection() {
        let set = treasure();
        let s = initial_select(&set, &pv(&[0.5, 0.5]), SelectorKind::Argmax).unwrap();
        assert_eq!(s.policy_id, 3);
        let again = initial_select(&set, &s.xi, SelectorKind::Argmax).unwrap();
        assert_eq!(again, s);
        let single = set_of(&[vec![3.0, -3.0]], &[vec![0.5, 0.5]]);
        assert_eq!(initial_select(&single, &pv(&[0.0, 1.0]), SelectorKind::Argmax).unwrap().policy_id, 0);
    }

    #[test]
    fn zero_delta_is_a_fixed_point() {
        let set = treasure();
        for kind in [SelectorKind::Argmax, SelectorKind::Steering, SelectorKind::Frozen] {
            let s = SelectionState {
                policy_id: 1,
                xi: pv(&[0.37, 0.63]),
                kind,
            };
            assert_eq!(apply_update(&s, &PreferenceDelta::zeros(2), &set).unwrap(), s);
        }
    }

    #[test]
    fn argmax_update_example() {
        let set = treasure();
        let s = SelectionState {
            policy_id: 0,
            xi: pv(&[0.0, 1.0]),
            kind: SelectorKind::Argmax,
        };
        let d = PreferenceDelta::new(vec![0.6, -0.6]).unwrap();
        let next = apply_update(&s, &d, &set).unwrap();
        assert!((next.xi.weights()[0] - 0.6).abs() < 1e-12);
        assert_eq!(next.policy_id, 3);
        assert!(apply_update(&s, &PreferenceDelta::zeros(3), &set).is_err());
    }

    #[test]
    fn steering_moves_one_step() {
        let set = treasure();
        let s = SelectionState {
            policy_id: 0,
            xi: pv(&[0.9, 0.1]),
            kind: SelectorKind::Steering,
        };
        // a tiny nudge that keeps the estimate at (0.9, 0.1) up to rounding
        let d = PreferenceDelta::new(vec![1e-3, 1e-3]).unwrap();
        let next = apply_update(&s, &d, &set).unwrap();
        assert_eq!(next.policy_id, 1);
        let next = apply_update(&next, &d, &set).unwrap();
        assert_eq!(next.policy_id, 2);
        let next = apply_update(&next, &d, &set).unwrap();
        assert_eq!(next.policy_id, 3);
        let next = apply_update(&next, &d, &set).unwrap();
        assert_eq!(next.policy_id, 3);
    }

    #[test]
    fn frozen_keeps_the_policy() {
        let set = treasure();
        let s = SelectionState {
            policy_id: 0,
            xi: pv(&[0.0, 1.0]),
            kind: SelectorKind::Frozen,
        };
        let next = apply_update(&s, &PreferenceDelta::new(vec![1.0, -1.0]).unwrap(), &set).unwrap();
        assert_eq!(next.policy_id, 0);
        assert_eq!(next.xi, pv(&[1.0, 0.0]));
    }

    #[test]
    fn anchor_steering_for_three_objectives() {
        let returns = vec![vec![3.0, 0.0, 0.0], vec![2.5, 1.0, 0.0], vec![2.0, 2.0, 0.0], vec![0.0, 3.0, 0.0]];
        let anchors = vec![vec![1.0, 0.0, 0.0], vec![0.75, 0.25, 0.0], vec![0.5, 0.5, 0.0], vec![0.0, 1.0, 0.0]];
        let set = set_of(&returns, &anchors);
        let s = SelectionState {
            policy_id: 0,
            xi: pv(&[1.0, 0.0, 0.0]),
            kind: SelectorKind::Steering,
        };
        // the pure objective-2 anchor is not among the two nearest neighbours
        let d = PreferenceDelta::new(vec![-1.0, 1.0, 0.0]).unwrap();
        let next = apply_update(&s, &d, &set).unwrap();
        assert_eq!(next.policy_id, 2);
    }

    #[test]
    fn explanations() {
        let set = treasure();
        let names = vec!["treasure".into(), "time".into()];
        let s = SelectionState {
            policy_id: 3,
            xi: pv(&[0.5, 0.5]),
            kind: SelectorKind::Argmax,
        };
        let e = explain_selection(&s, &s, &PreferenceDelta::zeros(2), 0.0, 0.0, 4, &set, &names).unwrap();
        assert!(e.is_no_change());
        assert_eq!(e.sentence, "reaction 0.00 on interaction 4: no change; policy 3 kept");

        let d = PreferenceDelta::new(vec![-0.45, 0.45]).unwrap();
        let after = apply_update(&s, &d, &set).unwrap();
        let e = explain_selection(&s, &after, &d, -1.8, -1.2, 12, &set, &names).unwrap();
        assert_eq!(e.policy_after, after.policy_id);
        assert_eq!(e.return_after, set.get(after.policy_id).unwrap().return_vector);
        assert_eq!(e.sentence, format!("reaction -1.80 on interaction 12 shifted weight toward 'time' by 0.45; policy 3 → {}", after.policy_id));
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<Explanation>(&json).unwrap(), e);
    }
}
