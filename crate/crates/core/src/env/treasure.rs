use alloc::string::ToString;
use alloc::vec;

use super::{Action, Cell, Layout, MomdpSpec, State, StepOutcome, Treasure};
use crate::preference::ReturnVector;

const DEPTHS: [u8; 4] = [1, 2, 3, 4];
const VALUES: [f64; 4] = [1.0, 3.0, 6.0, 10.0];

/// Four columns by five rows, start at the top-left. Column `k` holds a
/// treasure at depth `k`; every step costs one unit of time.
/// Objectives are (treasure, time).
pub fn treasure_grid() -> MomdpSpec {
    let treasures = DEPTHS
        .iter()
        .zip(VALUES)
        .enumerate()
        .map(|(col, (&depth, value))| Treasure {
            cell: Cell::new(depth, col as u8),
            value,
        })
        .collect();
    MomdpSpec {
        id: "treasure-grid".to_string(),
        num_objectives: 2,
        objective_names: vec!["treasure".to_string(), "time".to_string()],
        rows: 5,
        cols: 4,
        start: Cell::new(0, 0),
        actions: vec![Action::Down, Action::Right],
        horizon: 12,
        discount: 1.0,
        layout: Layout::Treasure { treasures },
    }
}

pub(super) fn transition(treasures: &[Treasure], to: Cell) -> StepOutcome {
    let found = treasures.iter().find(|t| t.cell == to);
    let value = found.map_or(0.0, |t| t.value);
    StepOutcome {
        next: State { cell: to, dirt: 0 },
        reward: ReturnVector::new(vec![value, -1.0]).expect("finite reward"),
        terminal: found.is_some(),
    }
}
