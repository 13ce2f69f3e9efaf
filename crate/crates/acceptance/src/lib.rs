//! Reference models for checking `lla-core` from the outside.
//!
//! Nothing here shares code with the structures under test. The models
//! recompute everything from scratch on each call and favour obviousness
//! over speed.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use lla_core::{Key, LearnedLla};

/// A packed-memory array that rescans the whole array on every insert.
///
/// Same policy as the library PMA: `2^d` equal leaves of
/// `max(2, next_pow2(ceil(log2 m)))` slots; an insert goes to the leaf of
/// its predecessor (leaf 0 without one); the window is the lowest
/// ancestor whose pre-insert count is at most `tau_k * size` and below
/// `size`, with `tau_k` interpolated from 0.5 at the root to 0.9 at the
/// leaves; the window is then refilled at `lo + floor(i * size / count)`.
#[derive(Clone, Debug)]
pub struct ReferencePma {
    pub slots: Vec<Option<(i64, u64)>>,
    leaf: usize,
    depth: u32,
}

fn ceil_log2(x: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < x {
        bits += 1;
    }
    bits
}

impl ReferencePma {
    pub fn new(m: usize) -> Self {
        let mut leaf = 1;
        while leaf < ceil_log2(m) {
            leaf *= 2;
        }
        let leaf = leaf.max(2);
        let mut leaves = 1;
        while leaves * leaf < m {
            leaves *= 2;
        }
        ReferencePma {
            slots: vec![None; leaf * leaves],
            leaf,
            depth: leaves.trailing_zeros(),
        }
    }

    fn tau(&self, k: u32) -> f64 {
        if self.depth == 0 {
            0.9
        } else {
            0.5 + (0.9 - 0.5) * f64::from(k) / f64::from(self.depth)
        }
    }

    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Inserts and returns how many existing elements changed slot, or
    /// `None` if no window has room.
    pub fn insert(&mut self, raw: i64, seq: u64) -> Option<u64> {
        let size = self.slots.len();
        if self.len() == size {
            return None;
        }
        let pred = (0..size)
            .rev()
            .find(|&i| self.slots[i].is_some_and(|(r, _)| r <= raw));
        let leaf = pred.map_or(0, |i| i / self.leaf);

        let mut window = None;
        for k in (0..=self.depth).rev() {
            let span = size >> k;
            let lo = (leaf * self.leaf) / span * span;
            let count = self.slots[lo..lo + span].iter().flatten().count();
            if count as f64 <= self.tau(k) * span as f64 && count < span {
                window = Some((lo, span));
                break;
            }
        }
        let (lo, span) = window?;

        let before: Vec<(usize, (i64, u64))> = (lo..lo + span)
            .filter_map(|i| self.slots[i].map(|e| (i, e)))
            .collect();
        let mut elems: Vec<(i64, u64)> = before.iter().map(|&(_, e)| e).collect();
        let at = elems.iter().filter(|(r, _)| *r <= raw).count();
        elems.insert(at, (raw, seq));
        for s in &mut self.slots[lo..lo + span] {
            *s = None;
        }
        let count = elems.len();
        let mut placed = HashMap::new();
        for (i, e) in elems.into_iter().enumerate() {
            let slot = lo + i * span / count;
            self.slots[slot] = Some(e);
            placed.insert(e.1, slot);
        }
        Some(before.iter().filter(|(s, e)| placed[&e.1] != *s).count() as u64)
    }
}

/// Independent movement count for a learned structure: after every
/// primitive step, snapshot all global labels and count the keys that
/// were present before the step and now sit at a different label.
#[derive(Debug, Default)]
pub struct ShadowAudit {
    labels: HashMap<u64, usize>,
    pub counted: u64,
    pub steps: u64,
    pub mismatches: Vec<String>,
}

impl ShadowAudit {
    /// Installs the audit as the structure's observer. Attach before the
    /// first insert.
    pub fn attach(lla: &mut LearnedLla) -> Arc<Mutex<ShadowAudit>> {
        let audit = Arc::new(Mutex::new(ShadowAudit::default()));
        let handle = audit.clone();
        lla.set_observer(move |l, step| {
            let mut a = handle.lock().unwrap();
            let now: HashMap<u64, usize> = l
                .global_labels()
                .into_iter()
                .map(|(k, label)| (k.seq, label))
                .collect();
            let moved = a
                .labels
                .iter()
                .filter(|(seq, old)| now.get(seq) != Some(old))
                .count() as u64;
            a.counted += moved;
            a.steps += 1;
            let charged = l.ledger().total_movements;
            if a.counted != charged {
                let msg = format!("after {step:?}: shadow {} vs ledger {charged}", a.counted);
                a.mismatches.push(msg);
                a.counted = charged;
            }
            a.labels = now;
        });
        audit
    }
}

/// Keys sorted by label must be sorted by value, with strictly
/// increasing labels.
pub fn labels_sorted(labels: &[(Key, usize)]) -> bool {
    labels
        .windows(2)
        .all(|w| w[0].1 < w[1].1 && w[0].0.raw <= w[1].0.raw)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
