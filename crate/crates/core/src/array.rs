//! Fixed-size slot arrays.

use crate::key::Key;

/// A fixed-size array of optional keys. The slot index of a key is its label.
#[derive(Clone, Debug, Default)]
pub struct LabeledArray {
    slots: Vec<Option<Key>>,
    count: usize,
}

impl LabeledArray {
    pub fn new(size: usize) -> Self {
        LabeledArray {
            slots: vec![None; size],
            count: 0,
        }
    }

    /// Builds an array from explicit slot contents.
    pub fn from_slots(slots: Vec<Option<Key>>) -> Self {
        let count = slots.iter().filter(|s| s.is_some()).count();
        LabeledArray { slots, count }
    }

    pub fn size(&self) -> usize {
        self.slots.len()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn density(&self) -> f64 {
        if self.slots.is_empty() {
            0.0
        } else {
            self.count as f64 / self.slots.len() as f64
        }
    }

    #[inline]
    pub fn get(&self, slot: usize) -> Option<Key> {
        self.slots[slot]
    }

    pub fn slots(&self) -> &[Option<Key>] {
        &self.slots
    }

    /// Stores `key` at `slot`, returning the previous occupant.
    #[inline]
    pub fn set(&mut self, slot: usize, key: Option<Key>) -> Option<Key> {
        let old = std::mem::replace(&mut self.slots[slot], key);
        match (old.is_some(), key.is_some()) {
            (false, true) => self.count += 1,
            (true, false) => self.count -= 1,
            _ => {}
        }
        old
    }

    /// Occupied slots in `lo..hi`, left to right.
    pub fn occupied(&self, lo: usize, hi: usize) -> impl Iterator<Item = (usize, Key)> + '_ {
        self.slots[lo..hi]
            .iter()
            .enumerate()
            .filter_map(move |(i, s)| s.map(|k| (lo + i, k)))
    }

    pub fn count_in(&self, lo: usize, hi: usize) -> usize {
        self.slots[lo..hi].iter().filter(|s| s.is_some()).count()
    }

    /// `(key, label)` pairs with 1-based labels.
    pub fn labels(&self) -> Vec<(Key, usize)> {
        self.occupied(0, self.size())
            .map(|(slot, key)| (key, slot + 1))
            .collect()
    }
}

/// True iff the occupied slots read left to right are non-decreasing.
pub fn verify_sorted(arr: &LabeledArray) -> bool {
    let mut prev: Option<Key> = None;
    for key in arr.slots().iter().flatten() {
        if prev.is_some_and(|p| p > *key) {
            return false;
        }
        prev = Some(*key);
    }
    true
}
