//! Insert workloads shared by the benchmarks.

use lla_core::harness::{generate, SynthKind, SynthParams};
use lla_core::{BlackBoxKind, BlackBoxLla, Key, LearnedLla, Pma, PmaThresholds, PredictedInsert};

/// Keys plus predicted ranks for one run.
pub struct Workload {
    pub keys: Vec<Key>,
    pub predictions: Vec<usize>,
}

impl Workload {
    /// `n` must be a power of two.
    pub fn new(kind: SynthKind, n: usize, eta: usize) -> Self {
        let s = generate(
            kind,
            n,
            SynthParams {
                eta,
                ..Default::default()
            },
            7,
        )
        .expect("valid workload");
        Workload {
            keys: s.keys,
            predictions: s.predictions,
        }
    }
}

/// Fills a PMA sized for the workload; returns the movement count.
pub fn fill_pma(w: &Workload) -> u64 {
    let mut pma = Pma::new(2 * w.keys.len(), PmaThresholds::default());
    for &k in &w.keys {
        pma.insert(k).expect("room");
    }
    pma.ledger().total_movements
}

/// Fills an APMA sized for the workload; returns the movement count.
pub fn fill_apma(w: &Workload) -> u64 {
    let mut apma = lla_core::Apma::new(2 * w.keys.len(), PmaThresholds::default());
    for &k in &w.keys {
        apma.insert(k).expect("room");
    }
    apma.ledger().total_movements
}

/// Runs the learned layout over the workload; returns the movement count.
pub fn fill_learned(w: &Workload, kind: BlackBoxKind) -> u64 {
    let mut lla = LearnedLla::new(w.keys.len(), kind.factory());
    lla.insert_sentinel().expect("sentinel");
    for (&key, &rank) in w.keys.iter().zip(&w.predictions) {
        lla.insert(PredictedInsert { key, rank }).expect("room");
    }
    lla.ledger().total_movements
}
