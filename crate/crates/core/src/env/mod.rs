//! Deterministic episodic gridworlds with vector rewards.

mod chore;
mod treasure;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preference::ReturnVector;

pub use chore::{chore_grid, CHORE_DIRT_COUNT};
pub use treasure::treasure_grid;

/// Per-step reward, one component per objective.
pub type VectorReward = ReturnVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: u8,
    pub col: u8,
}

impl Cell {
    pub const fn new(row: u8, col: u8) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::Stay => "stay",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Environment state: the agent's cell plus a bitmask of uncleaned dirt
/// (always zero in environments without dirt).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct State {
    pub cell: Cell,
    #[serde(default)]
    pub dirt: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Treasure {
    pub cell: Cell,
    pub value: f64,
}

/// Layout and dynamics of a concrete environment.
///
/// `Treasure`: actions move the agent; entering a treasure cell pays its value
/// and ends the episode. Cells below a treasure are sea floor and block
/// movement.
///
/// `Chore`: the episode ends once every dirt cell is cleaned. The human's cell
/// blocks movement; entering any cell in its 8-neighbourhood is a disruption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Layout {
    Treasure { treasures: Vec<Treasure> },
    Chore { human: Cell, dirt: Vec<Cell> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomdpSpec {
    pub id: String,
    pub num_objectives: usize,
    pub objective_names: Vec<String>,
    pub rows: u8,
    pub cols: u8,
    pub start: Cell,
    pub actions: Vec<Action>,
    pub horizon: usize,
    pub discount: f64,
    pub layout: Layout,
}

impl MomdpSpec {
    pub fn initial_state(&self) -> State {
        let dirt = match &self.layout {
            Layout::Treasure { .. } => 0,
            Layout::Chore { dirt, .. } => dirt
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != self.start)
                .fold(0u32, |mask, (i, _)| mask | (1 << i)),
        };
        State {
            cell: self.start,
            dirt,
        }
    }

    pub fn in_bounds(&self, row: i32, col: i32) -> bool {
        row >= 0 && col >= 0 && row < i32::from(self.rows) && col < i32::from(self.cols)
    }

    fn blocked(&self, cell: Cell) -> bool {
        match &self.layout {
            Layout::Treasure { treasures } => treasures
                .iter()
                .any(|t| t.cell.col == cell.col && cell.row > t.cell.row),
            Layout::Chore { human, .. } => *human == cell,
        }
    }

    fn validate_state(&self, state: &State) -> Result<()> {
        let c = state.cell;
        if !self.in_bounds(i32::from(c.row), i32::from(c.col)) || self.blocked(c) {
            return Err(Error::InvalidState {
                env: self.id.clone(),
            });
        }
        Ok(())
    }

    /// Target cell of a move, clamped at walls and blocked cells.
    fn moved(&self, from: Cell, action: Action) -> Cell {
        let (dr, dc) = match action {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::Stay => (0, 0),
        };
        let (r, c) = (i32::from(from.row) + dr, i32::from(from.col) + dc);
        if !self.in_bounds(r, c) {
            return from;
        }
        let to = Cell::new(r as u8, c as u8);
        if self.blocked(to) {
            from
        } else {
            to
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: State,
    pub reward: VectorReward,
    pub terminal: bool,
}

/// One deterministic transition.
pub fn step(spec: &MomdpSpec, state: &State, action: Action) -> Result<StepOutcome> {
    if !spec.actions.contains(&action) {
        return Err(Error::InvalidAction {
            env: spec.id.clone(),
            action: action.name().to_string(),
        });
    }
    spec.validate_state(state)?;
    let to = spec.moved(state.cell, action);
    match &spec.layout {
        Layout::Treasure { treasures } => Ok(treasure::transition(treasures, to)),
        Layout::Chore { human, dirt } => Ok(chore::transition(*human, dirt, state, to, action)),
    }
}

/// Deterministic state-to-action rule.
pub trait Policy {
    fn action(&self, state: &State) -> Option<Action>;
}

impl<F> Policy for F
where
    F: Fn(&State) -> Option<Action>,
{
    fn action(&self, state: &State) -> Option<Action> {
        self(state)
    }
}

/// Tabular deterministic policy. Serialises as a list of
/// `{state, action}` entries in state order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionMap(BTreeMap<State, Action>);

impl ActionMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, state: State, action: Action) -> Option<Action> {
        self.0.insert(state, action)
    }

    pub fn get(&self, state: &State) -> Option<Action> {
        self.0.get(state).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&State, &Action)> {
        self.0.iter()
    }
}

impl Policy for ActionMap {
    fn action(&self, state: &State) -> Option<Action> {
        self.get(state)
    }
}

impl FromIterator<(State, Action)> for ActionMap {
    fn from_iter<I: IntoIterator<Item = (State, Action)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Serialize, Deserialize)]
struct ActionEntry {
    state: State,
    action: Action,
}

impl Serialize for ActionMap {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter().map(|(s, a)| ActionEntry {
            state: *s,
            action: *a,
        }))
    }
}

impl<'de> Deserialize<'de> for ActionMap {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let entries = Vec::<ActionEntry>::deserialize(deserializer)?;
        Ok(entries.into_iter().map(|e| (e.state, e.action)).collect())
    }
}

/// Record of one executed episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub actions: Vec<Action>,
    pub rewards: Vec<VectorReward>,
    #[serde(rename = "return")]
    pub ret: ReturnVector,
    pub terminated: bool,
}

/// Discounted sum of a reward sequence.
pub fn discounted_return(m: usize, discount: f64, rewards: &[VectorReward]) -> ReturnVector {
    let mut ret = ReturnVector::zeros(m);
    let mut weight = 1.0;
    for r in rewards {
        for (acc, v) in ret.values_mut().iter_mut().zip(r.values()) {
            *acc += weight * v;
        }
        weight *= discount;
    }
    ret
}

/// Runs `policy` from the start state until termination or the horizon.
pub fn rollout(spec: &MomdpSpec, policy: &impl Policy) -> Result<Trajectory> {
    let mut state = spec.initial_state();
    let mut states = Vec::with_capacity(spec.horizon + 1);
    let mut actions = Vec::with_capacity(spec.horizon);
    let mut rewards = Vec::with_capacity(spec.horizon);
    let mut terminated = false;
    states.push(state);
    for t in 0..spec.horizon {
        let action = policy.action(&state).ok_or(Error::PolicyUndefined { step: t })?;
        let out = step(spec, &state, action)?;
        state = out.next;
        states.push(state);
        actions.push(action);
        rewards.push(out.reward);
        if out.terminal {
            terminated = true;
            break;
        }
    }
    let ret = discounted_return(spec.num_objectives, spec.discount, &rewards);
    Ok(Trajectory {
        states,
        actions,
        rewards,
        ret,
        terminated,
    })
}
