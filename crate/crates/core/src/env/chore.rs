use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{Action, Cell, Layout, MomdpSpec, State, StepOutcome};
use crate::preference::ReturnVector;
use crate::rng;

pub const CHORE_DIRT_COUNT: usize = 4;
const SIZE: u8 = 5;
/// Stream coordinate reserved for layout generation.
const LAYOUT_STREAM: u64 = 0xC40E;

/// 5x5 household grid with objectives (cleaned, disruption, energy).
///
/// The human and four dirt cells are placed by a generator seeded with
/// `seed`; the start cell is always the top-left corner.
pub fn chore_grid(seed: u64) -> MomdpSpec {
    let start = Cell::new(0, 0);
    let mut cells: Vec<Cell> = (0..SIZE)
        .flat_map(|r| (0..SIZE).map(move |c| Cell::new(r, c)))
        .filter(|&c| c != start)
        .collect();
    let mut stream = rng::stream(seed, &[LAYOUT_STREAM]);
    cells.shuffle(&mut stream);
    let human = cells[0];
    let mut dirt = cells[1..=CHORE_DIRT_COUNT].to_vec();
    dirt.sort();
    MomdpSpec {
        id: format!("chore-grid-{seed}"),
        num_objectives: 3,
        objective_names: vec!["cleaned".to_string(), "disruption".to_string(), "energy".to_string()],
        rows: SIZE,
        cols: SIZE,
        start,
        actions: vec![Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay],
        horizon: 20,
        discount: 1.0,
        layout: Layout::Chore { human, dirt },
    }
}

fn adjacent(a: Cell, b: Cell) -> bool {
    let dr = (i32::from(a.row) - i32::from(b.row)).abs();
    let dc = (i32::from(a.col) - i32::from(b.col)).abs();
    dr.max(dc) == 1
}

pub(super) fn transition(human: Cell, dirt: &[Cell], state: &State, to: Cell, action: Action) -> StepOutcome {
    let energy = if action == Action::Stay { 0.0 } else { -1.0 };
    let disruption = if to != state.cell && adjacent(to, human) { -1.0 } else { 0.0 };
    let mut remaining = state.dirt;
    let mut cleaned = 0.0;
    if let Some(i) = dirt.iter().position(|&d| d == to) {
        if remaining & (1 << i) != 0 {
            remaining &= !(1 << i);
            cleaned = 1.0;
        }
    }
    StepOutcome {
        next: State {
            cell: to,
            dirt: remaining,
        },
        reward: ReturnVector::new(vec![cleaned, disruption, energy]).expect("finite reward"),
        terminal: remaining == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{rollout, step};

    #[test]
    fn same_seed_same_layout() {
        let a = serde_json::to_vec(&chore_grid(0)).unwrap();
        let b = serde_json::to_vec(&chore_grid(0)).unwrap();
        assert_eq!(a, b);
        assert_ne!(chore_grid(0).layout, chore_grid(1).layout);
    }

    #[test]
    fn layout_is_well_formed() {
        for seed in 0..50 {
            let spec = chore_grid(seed);
            let Layout::Chore { human, dirt } = &spec.layout else { unreachable!() };
            assert_ne!(*human, spec.start);
            assert_eq!(dirt.len(), CHORE_DIRT_COUNT);
            assert!(!dirt.contains(human));
            assert!(!dirt.contains(&spec.start));
            assert_eq!(spec.initial_state().dirt, 0b1111);
        }
    }

    #[test]
    fn moving_next_to_the_human_is_a_disruption() {
        let spec = MomdpSpec {
            layout: Layout::Chore {
                human: Cell::new(2, 2),
                dirt: vec![Cell::new(0, 1), Cell::new(4, 4), Cell::new(4, 0), Cell::new(0, 4)],
            },
            ..chore_grid(0)
        };
        let s = State {
            cell: Cell::new(0, 2),
            dirt: 0b1111,
        };
        let out = step(&spec, &s, Action::Down).unwrap();
        assert_eq!(out.next.cell, Cell::new(1, 2));
        assert_eq!(out.reward.values(), &[0.0, -1.0, -1.0]);
        // the human's own cell blocks movement
        let out2 = step(&spec, &out.next, Action::Down).unwrap();
        assert_eq!(out2.next.cell, Cell::new(1, 2));
        assert_eq!(out2.reward.values(), &[0.0, 0.0, -1.0]);
        // entering a dirt cell cleans it once
        let start = spec.initial_state();
        let out3 = step(&spec, &start, Action::Right).unwrap();
        assert_eq!(out3.reward.values(), &[1.0, 0.0, -1.0]);
        assert_eq!(out3.next.dirt, 0b1110);
        let back = step(&spec, &out3.next, Action::Left).unwrap();
        let again = step(&spec, &back.next, Action::Right).unwrap();
        assert_eq!(again.reward.values()[0], 0.0);
    }

    #[test]
    fn cleaning_everything_terminates() {
        let spec = MomdpSpec {
            layout: Layout::Chore {
                human: Cell::new(4, 4),
                dirt: vec![Cell::new(0, 1), Cell::new(0, 2), Cell::new(0, 3), Cell::new(0, 4)],
            },
            ..chore_grid(0)
        };
        let traj = rollout(&spec, &|_: &State| Some(Action::Right)).unwrap();
        assert!(traj.terminated);
        assert_eq!(traj.ret.values(), &[4.0, 0.0, -4.0]);
    }
}
