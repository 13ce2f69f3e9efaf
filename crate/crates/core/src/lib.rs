//! List-labeling arrays.
//!
//! - [`pma`]: the classic packed-memory array.
//! - [`apma`]: an adaptive variant that leaves more room where inserts land.
//! - [`learned`]: a layout that routes keys by predicted rank into many small
//!   black-box arrays and merges them as they fill.
//! - [`predictors`]: rank predictors built from a training prefix.
//! - [`harness`]: dataset loading and the experiment drivers.

pub mod apma;
pub mod array;
pub mod harness;
pub mod key;
pub mod learned;
pub mod ledger;
pub mod lla;
pub mod pma;
pub mod predictors;

pub use apma::Apma;
pub use array::{verify_sorted, LabeledArray};
pub use key::{parse_fixed_point, Key, ParseKeyError, FIXED_POINT_SCALE, MIN_KEY};
pub use learned::{InsertReport, LearnedLla, NodeId, PredictedInsert, RankTree, Step};
pub use ledger::{Movement, MovementLedger, UndefinedCost};
pub use lla::{BlackBoxKind, BlackBoxLla, LlaError, LlaFactory};
pub use pma::{Pma, PmaThresholds};
pub use predictors::{PredictionVector, PredictorTag, SequenceSlice};
