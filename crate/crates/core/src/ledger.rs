//! Element-movement accounting.

use thiserror::Error;

use crate::key::Key;

/// One label assignment. `from` is `None` for the first placement of a
/// newly inserted element. Labels are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Movement {
    pub key: Key,
    pub from: Option<usize>,
    pub to: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("amortized cost is undefined before the first insert")]
pub struct UndefinedCost;

/// Counts relabels and inserts.
///
/// With `first_placement_excluded` set, the label an element receives when
/// it is inserted is free; every later change of that label costs one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MovementLedger {
    pub total_movements: u64,
    pub total_inserts: u64,
    pub first_placement_excluded: bool,
}

impl Default for MovementLedger {
    fn default() -> Self {
        MovementLedger::new(true)
    }
}

impl MovementLedger {
    pub fn new(first_placement_excluded: bool) -> Self {
        MovementLedger {
            total_movements: 0,
            total_inserts: 0,
            first_placement_excluded,
        }
    }

    /// Charges a batch of label assignments and returns the amount charged.
    /// Entries whose label did not change cost nothing.
    pub fn record_movements(&mut self, moved: &[Movement]) -> u64 {
        let mut charged = 0;
        for m in moved {
            match m.from {
                None if !self.first_placement_excluded => charged += 1,
                Some(old) if old != m.to => charged += 1,
                _ => {}
            }
        }
        self.total_movements += charged;
        charged
    }

    /// Charges `relabels` moves of existing elements plus `placements`
    /// first placements, returning the amount charged.
    #[inline]
    pub fn charge(&mut self, relabels: u64, placements: u64) -> u64 {
        let charged = if self.first_placement_excluded {
            relabels
        } else {
            relabels + placements
        };
        self.total_movements += charged;
        charged
    }

    #[inline]
    pub fn count_insert(&mut self) {
        self.total_inserts += 1;
    }

    pub fn amortized_cost(&self) -> Result<f64, UndefinedCost> {
        if self.total_inserts == 0 {
            return Err(UndefinedCost);
        }
        Ok(self.total_movements as f64 / self.total_inserts as f64)
    }
}
