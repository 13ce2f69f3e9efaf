//! The black-box list-labeling interface.

use thiserror::Error;

use crate::array::LabeledArray;
use crate::key::Key;
use crate::ledger::MovementLedger;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlaError {
    #[error("capacity exceeded: {len} elements in {size} slots")]
    CapacityExceeded { len: usize, size: usize },
    #[error("init requires sorted keys")]
    UnsortedInit,
    #[error("init requires an empty structure")]
    NotEmpty,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A list-labeling array: keeps keys sorted in a fixed number of slots.
///
/// `insert` and `init` return the movements they charged to the structure's
/// own ledger.
pub trait BlackBoxLla: Send {
    /// Maximum number of elements the structure is sized for.
    fn capacity(&self) -> usize;

    /// Number of slots.
    fn size(&self) -> usize {
        self.array().size()
    }

    fn len(&self) -> usize {
        self.array().len()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn density(&self) -> f64 {
        self.array().density()
    }

    fn insert(&mut self, key: Key) -> Result<u64, LlaError>;

    /// Loads `keys` (sorted) into an empty structure.
    fn init(&mut self, keys: &[Key]) -> Result<u64, LlaError>;

    fn array(&self) -> &LabeledArray;

    fn ledger(&self) -> &MovementLedger;

    /// `(key, label)` pairs in slot order, 1-based labels.
    fn labels(&self) -> Vec<(Key, usize)> {
        self.array().labels()
    }

    fn keys(&self) -> Vec<Key> {
        self.array().slots().iter().flatten().copied().collect()
    }
}

/// Builds black-box instances with an exact slot count.
pub type LlaFactory = Box<dyn Fn(usize) -> Box<dyn BlackBoxLla> + Send + Sync>;

/// The black boxes shipped with this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlackBoxKind {
    Pma,
    Apma,
}

impl BlackBoxKind {
    pub fn name(self) -> &'static str {
        match self {
            BlackBoxKind::Pma => "pma",
            BlackBoxKind::Apma => "apma",
        }
    }

    /// Builds one instance with exactly `slots` slots. Movements of new
    /// elements' first placement are not charged.
    pub fn build(self, slots: usize) -> Box<dyn BlackBoxLla> {
        let thresholds = crate::pma::PmaThresholds::default();
        match self {
            BlackBoxKind::Pma => Box::new(crate::pma::Pma::with_exact_slots(slots, thresholds)),
            BlackBoxKind::Apma => Box::new(crate::apma::Apma::with_exact_slots(slots, thresholds)),
        }
    }

    pub fn factory(self) -> LlaFactory {
        Box::new(move |slots| self.build(slots))
    }
}
