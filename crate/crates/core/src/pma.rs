//! Packed-memory array.
//!
//! The slot array is cut into `2^d` leaf ranges that form the leaves of an
//! implicit complete binary tree; every tree node owns the union of its
//! leaves' slots. Depth 0 is the root. A node at depth `k` is within
//! threshold when its density is at most `tau_k`, interpolated linearly
//! between the root and leaf thresholds.
//!
//! An insert finds the leaf of the new key's predecessor, walks up to the
//! lowest node that is within threshold (measured before the insert), and
//! redistributes that node's elements together with the new key. The
//! redistribution is delegated to a [`SpreadPolicy`]; [`Pma`] spreads
//! evenly, [`crate::apma::Apma`] weights leaves by recent insert traffic.

use std::fmt::Debug;
use std::ops::Range;

use crate::array::LabeledArray;
use crate::key::Key;
use crate::ledger::MovementLedger;
use crate::lla::{BlackBoxLla, LlaError};

/// Upper (`tau`) and lower (`rho`) density thresholds at the root and at
/// the leaves. Lower thresholds are carried for configuration fidelity;
/// inserts never consult them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmaThresholds {
    pub root_upper: f64,
    pub leaf_upper: f64,
    pub root_lower: f64,
    pub leaf_lower: f64,
}

impl Default for PmaThresholds {
    fn default() -> Self {
        PmaThresholds {
            root_upper: 0.5,
            leaf_upper: 0.9,
            root_lower: 0.2,
            leaf_lower: 0.1,
        }
    }
}

impl PmaThresholds {
    /// Checks `0 < rho_d < rho_0 < tau_0 < tau_d < 1`.
    pub fn validate(&self) -> Result<(), LlaError> {
        let ok = 0.0 < self.leaf_lower
            && self.leaf_lower < self.root_lower
            && self.root_lower < self.root_upper
            && self.root_upper < self.leaf_upper
            && self.leaf_upper < 1.0;
        if ok {
            Ok(())
        } else {
            Err(LlaError::InvalidArgument(format!(
                "thresholds out of order: {self:?}"
            )))
        }
    }

    /// `tau_k = tau_0 + (tau_d - tau_0) * k / d`. A single-node tree
    /// (`d == 0`) uses the leaf threshold.
    pub fn tau_at_depth(&self, k: u32, d: u32) -> Result<f64, LlaError> {
        if k > d {
            return Err(LlaError::InvalidArgument(format!("depth {k} > {d}")));
        }
        if d == 0 {
            return Ok(self.leaf_upper);
        }
        Ok(self.root_upper + (self.leaf_upper - self.root_upper) * f64::from(k) / f64::from(d))
    }

    /// `rho_k = rho_0 - (rho_0 - rho_d) * k / d`.
    pub fn rho_at_depth(&self, k: u32, d: u32) -> Result<f64, LlaError> {
        if k > d {
            return Err(LlaError::InvalidArgument(format!("depth {k} > {d}")));
        }
        if d == 0 {
            return Ok(self.leaf_lower);
        }
        Ok(self.root_lower - (self.root_lower - self.leaf_lower) * f64::from(k) / f64::from(d))
    }
}

/// A node of the implicit tree: `index` counts from the left at `depth`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TreeNode {
    pub depth: u32,
    pub index: usize,
}

impl TreeNode {
    pub const ROOT: TreeNode = TreeNode { depth: 0, index: 0 };

    pub fn parent(self) -> Option<TreeNode> {
        (self.depth > 0).then(|| TreeNode {
            depth: self.depth - 1,
            index: self.index / 2,
        })
    }
}

/// Slot layout: `slots` slots split into `2^depth` leaves with boundaries
/// at `floor(j * slots / 2^depth)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    slots: usize,
    depth: u32,
}

pub(crate) fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        usize::BITS - (x - 1).leading_zeros()
    }
}

/// Target leaf size for an array of `slots` slots: the smallest power of two
/// that is at least `ceil(log2 slots)`, and never below 2.
pub fn leaf_size_for(slots: usize) -> usize {
    (ceil_log2(slots) as usize).next_power_of_two().max(2)
}

impl Geometry {
    /// Rounds `slot_count` up to `leaf_size * 2^d` with equal leaves.
    pub fn rounded(slot_count: usize) -> Geometry {
        let leaf = leaf_size_for(slot_count);
        let leaves = slot_count.div_ceil(leaf).next_power_of_two();
        Geometry {
            slots: leaf * leaves,
            depth: leaves.trailing_zeros(),
        }
    }

    /// Keeps exactly `slots` slots; leaf ranges are at least the target leaf
    /// size and differ in length by at most one.
    pub fn exact(slots: usize) -> Geometry {
        let leaf = leaf_size_for(slots);
        let fit = (slots / leaf).max(1);
        let leaves = 1usize << (usize::BITS - 1 - fit.leading_zeros());
        Geometry {
            slots,
            depth: leaves.trailing_zeros(),
        }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn leaf_count(&self) -> usize {
        1 << self.depth
    }

    #[inline]
    pub fn leaf_start(&self, leaf: usize) -> usize {
        (leaf * self.slots) >> self.depth
    }

    #[inline]
    pub fn leaf_of(&self, slot: usize) -> usize {
        (((slot + 1) << self.depth) - 1) / self.slots
    }

    pub fn leaves_of(&self, node: TreeNode) -> Range<usize> {
        let span = 1usize << (self.depth - node.depth);
        node.index * span..(node.index + 1) * span
    }

    pub fn slots_of_leaves(&self, leaves: &Range<usize>) -> Range<usize> {
        self.leaf_start(leaves.start)..self.leaf_start(leaves.end)
    }

    pub fn node_range(&self, node: TreeNode) -> Range<usize> {
        self.slots_of_leaves(&self.leaves_of(node))
    }
}

/// Decides where the elements of a window go during a rebalance.
pub trait SpreadPolicy: Clone + Debug + Send {
    fn for_geometry(geometry: &Geometry) -> Self;

    /// Called once per insert with the leaf the key was routed to.
    fn record_insert(&mut self, leaf: usize);

    /// Pushes `count` strictly increasing target slots covering `leaves`.
    fn spread(&self, geometry: &Geometry, leaves: Range<usize>, count: usize, out: &mut Vec<usize>);
}

/// Evenly spaced, left-anchored: element `i` of `c` in a window of `s`
/// slots starting at `lo` goes to `lo + floor(i * s / c)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct EvenSpread;

pub fn even_positions(lo: usize, size: usize, count: usize, out: &mut Vec<usize>) {
    debug_assert!(count <= size);
    out.extend((0..count).map(|i| lo + i * size / count));
}

impl SpreadPolicy for EvenSpread {
    fn for_geometry(_: &Geometry) -> Self {
        EvenSpread
    }

    fn record_insert(&mut self, _: usize) {}

    fn spread(
        &self,
        geometry: &Geometry,
        leaves: Range<usize>,
        count: usize,
        out: &mut Vec<usize>,
    ) {
        let range = geometry.slots_of_leaves(&leaves);
        even_positions(range.start, range.len(), count, out);
    }
}

/// A packed-memory array parameterized by its redistribution policy.
#[derive(Clone, Debug)]
pub struct PackedArray<P: SpreadPolicy> {
    arr: LabeledArray,
    geometry: Geometry,
    leaf_counts: Vec<u32>,
    thresholds: PmaThresholds,
    ledger: MovementLedger,
    pub(crate) policy: P,
    scratch_keys: Vec<(Option<usize>, Key)>,
    scratch_slots: Vec<usize>,
}

/// The classic packed-memory array with even redistribution.
pub type Pma = PackedArray<EvenSpread>;

impl<P: SpreadPolicy> PackedArray<P> {
    /// Rounds `slot_count` up to `leaf_size * 2^d`, where the leaf size is
    /// the smallest power of two at least `ceil(log2 slot_count)`.
    pub fn new(slot_count: usize, thresholds: PmaThresholds) -> Self {
        assert!(
            slot_count >= 2,
            "a packed-memory array needs at least 2 slots"
        );
        Self::with_geometry(Geometry::rounded(slot_count), thresholds)
    }

    /// Uses exactly `slot_count` slots.
    pub fn with_exact_slots(slot_count: usize, thresholds: PmaThresholds) -> Self {
        assert!(
            slot_count >= 1,
            "a packed-memory array needs at least 1 slot"
        );
        Self::with_geometry(Geometry::exact(slot_count), thresholds)
    }

    pub fn with_geometry(geometry: Geometry, thresholds: PmaThresholds) -> Self {
        debug_assert!(thresholds.validate().is_ok());
        PackedArray {
            arr: LabeledArray::new(geometry.slots()),
            leaf_counts: vec![0; geometry.leaf_count()],
            policy: P::for_geometry(&geometry),
            geometry,
            thresholds,
            ledger: MovementLedger::new(true),
            scratch_keys: Vec::new(),
            scratch_slots: Vec::new(),
        }
    }

    /// Charge first placements as movements too.
    pub fn counting_first_placement(mut self) -> Self {
        self.ledger.first_placement_excluded = false;
        self
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn thresholds(&self) -> &PmaThresholds {
        &self.thresholds
    }

    /// Nominal slots per leaf.
    pub fn leaf_size(&self) -> usize {
        self.geometry.slots() >> self.geometry.depth()
    }

    pub fn depth(&self) -> u32 {
        self.geometry.depth()
    }

    pub fn leaf_counts(&self) -> &[u32] {
        &self.leaf_counts
    }

    fn count_leaves(&self, leaves: Range<usize>) -> usize {
        self.leaf_counts[leaves].iter().map(|&c| c as usize).sum()
    }

    pub fn density_of(&self, node: TreeNode) -> f64 {
        let range = self.geometry.node_range(node);
        if range.is_empty() {
            return 0.0;
        }
        self.count_leaves(self.geometry.leaves_of(node)) as f64 / range.len() as f64
    }

    fn tau(&self, depth: u32) -> f64 {
        self.thresholds
            .tau_at_depth(depth, self.geometry.depth())
            .expect("depth within tree")
    }

    /// Nearest occupied slot in `floor..=slot`, scanning leftwards and
    /// skipping empty leaves.
    fn occupied_at_or_before(&self, slot: usize, floor: usize) -> Option<usize> {
        let mut s = slot;
        loop {
            let leaf = self.geometry.leaf_of(s);
            let start = self.geometry.leaf_start(leaf).max(floor);
            if self.leaf_counts[leaf] > 0 {
                if let Some(t) = (start..=s).rev().find(|&t| self.arr.get(t).is_some()) {
                    return Some(t);
                }
            }
            if start == floor {
                return None;
            }
            s = start - 1;
        }
    }

    /// Slot of the last element whose key is `<= key`.
    pub fn predecessor_slot(&self, key: Key) -> Option<usize> {
        let (mut lo, mut hi) = (0, self.arr.size());
        let mut best = None;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            match self.occupied_at_or_before(mid, lo) {
                None => lo = mid + 1,
                Some(s) => {
                    if self.arr.get(s).expect("occupied") <= key {
                        best = Some(s);
                        lo = mid + 1;
                    } else {
                        hi = s;
                    }
                }
            }
        }
        best
    }

    /// Lowest ancestor of `leaf` (inclusive) within threshold before the
    /// insert.
    fn window_for(&self, leaf: usize) -> Result<TreeNode, LlaError> {
        let depth = self.geometry.depth();
        let mut node = TreeNode { depth, index: leaf };
        let mut count = self.leaf_counts[leaf] as usize;
        loop {
            let size = self.geometry.node_range(node).len();
            if count as f64 <= self.tau(node.depth) * size as f64 && count < size {
                return Ok(node);
            }
            let Some(parent) = node.parent() else {
                return Err(LlaError::CapacityExceeded {
                    len: self.arr.len(),
                    size: self.arr.size(),
                });
            };
            let sibling = node.index ^ 1;
            let span = 1usize << (depth - node.depth);
            count += self.count_leaves(sibling * span..(sibling + 1) * span);
            node = parent;
        }
    }

    /// Respreads the window's elements, plus `extra` if given, over
    /// `leaves`. Returns the number of pre-existing elements whose slot
    /// changed.
    fn respread(&mut self, leaves: Range<usize>, extra: Option<Key>) -> u64 {
        let range = self.geometry.slots_of_leaves(&leaves);
        let mut keys = std::mem::take(&mut self.scratch_keys);
        let mut targets = std::mem::take(&mut self.scratch_slots);
        keys.clear();
        targets.clear();
        keys.extend(
            self.arr
                .occupied(range.start, range.end)
                .map(|(s, k)| (Some(s), k)),
        );
        if let Some(x) = extra {
            let at = keys.partition_point(|(_, k)| *k <= x);
            keys.insert(at, (None, x));
        }
        self.policy
            .spread(&self.geometry, leaves.clone(), keys.len(), &mut targets);
        debug_assert_eq!(targets.len(), keys.len());

        for slot in range.clone() {
            self.arr.set(slot, None);
        }
        for c in &mut self.leaf_counts[leaves.clone()] {
            *c = 0;
        }
        let mut moved = 0;
        for (&(old, key), &slot) in keys.iter().zip(&targets) {
            self.arr.set(slot, Some(key));
            self.leaf_counts[self.geometry.leaf_of(slot)] += 1;
            if old.is_some_and(|o| o != slot) {
                moved += 1;
            }
        }
        self.scratch_keys = keys;
        self.scratch_slots = targets;
        moved
    }

    #[cfg(test)]
    pub(crate) fn load(&mut self, slots: Vec<Option<Key>>) {
        assert_eq!(slots.len(), self.geometry.slots());
        self.arr = LabeledArray::from_slots(slots);
        for (j, c) in self.leaf_counts.iter_mut().enumerate() {
            let (lo, hi) = (self.geometry.leaf_start(j), self.geometry.leaf_start(j + 1));
            *c = self.arr.count_in(lo, hi) as u32;
        }
    }

    /// Redistributes the elements of `node` with the array's policy and
    /// charges the movements.
    pub fn rebalance(&mut self, node: TreeNode) -> u64 {
        let moved = self.respread(self.geometry.leaves_of(node), None);
        self.ledger.charge(moved, 0)
    }
}

impl<P: SpreadPolicy> BlackBoxLla for PackedArray<P> {
    fn capacity(&self) -> usize {
        (self.thresholds.root_upper * self.arr.size() as f64) as usize
    }

    fn insert(&mut self, key: Key) -> Result<u64, LlaError> {
        if self.arr.len() >= self.arr.size() {
            return Err(LlaError::CapacityExceeded {
                len: self.arr.len(),
                size: self.arr.size(),
            });
        }
        let leaf = self
            .predecessor_slot(key)
            .map_or(0, |s| self.geometry.leaf_of(s));
        let window = self.window_for(leaf)?;
        self.policy.record_insert(leaf);
        let moved = self.respread(self.geometry.leaves_of(window), Some(key));
        self.ledger.count_insert();
        Ok(self.ledger.charge(moved, 1))
    }

    fn init(&mut self, keys: &[Key]) -> Result<u64, LlaError> {
        if !self.arr.is_empty() {
            return Err(LlaError::NotEmpty);
        }
        if keys.len() > self.arr.size() {
            return Err(LlaError::CapacityExceeded {
                len: keys.len(),
                size: self.arr.size(),
            });
        }
        if keys.windows(2).any(|w| w[0] > w[1]) {
            return Err(LlaError::UnsortedInit);
        }
        let mut targets = Vec::with_capacity(keys.len());
        self.policy.spread(
            &self.geometry,
            0..self.geometry.leaf_count(),
            keys.len(),
            &mut targets,
        );
        for (&key, slot) in keys.iter().zip(targets) {
            self.arr.set(slot, Some(key));
            self.leaf_counts[self.geometry.leaf_of(slot)] += 1;
        }
        self.ledger.total_inserts += keys.len() as u64;
        Ok(self.ledger.charge(0, keys.len() as u64))
    }

    fn array(&self) -> &LabeledArray {
        &self.arr
    }

    fn ledger(&self) -> &MovementLedger {
        &self.ledger
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::verify_sorted;

    fn k(raw: i64) -> Key {
        Key::new(raw, raw as u64)
    }

    #[test]
    fn tau_interpolation() {
        let t = PmaThresholds::default();
        assert_eq!(t.tau_at_depth(0, 4).unwrap(), 0.5);
        assert_eq!(t.tau_at_depth(4, 4).unwrap(), 0.9);
        assert!((t.tau_at_depth(2, 4).unwrap() - 0.7).abs() < 1e-12);
        assert!(t.tau_at_depth(5, 4).is_err());
        assert!((t.rho_at_depth(0, 4).unwrap() - 0.2).abs() < 1e-12);
        assert!((t.rho_at_depth(4, 4).unwrap() - 0.1).abs() < 1e-12);
        assert!(t.rho_at_depth(5, 4).is_err());
    }

    #[test]
    fn threshold_order_validated() {
        assert!(PmaThresholds::default().validate().is_ok());
        let bad = PmaThresholds {
            root_upper: 0.95,
            ..PmaThresholds::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rounded_geometry() {
        let p = Pma::new(64, PmaThresholds::default());
        assert_eq!((p.leaf_size(), p.depth(), p.size()), (8, 3, 64));
        let p = Pma::new(2, PmaThresholds::default());
        assert_eq!((p.leaf_size(), p.depth(), p.size()), (2, 0, 2));
        let p = Pma::new(100, PmaThresholds::default());
        assert_eq!((p.leaf_size(), p.depth(), p.size()), (8, 4, 128));
    }

    #[test]
    fn exact_geometry_tiles() {
        for slots in [1, 2, 6, 12, 24, 48, 96, 6 << 10, 6 << 16] {
            let g = Geometry::exact(slots);
            assert_eq!(g.slots(), slots);
            assert_eq!(g.leaf_start(0), 0);
            assert_eq!(g.leaf_start(g.leaf_count()), slots);
            let target = leaf_size_for(slots);
            for j in 0..g.leaf_count() {
                let len = g.leaf_start(j + 1) - g.leaf_start(j);
                assert!(len >= target.min(slots), "slots={slots} leaf {j} len {len}");
                for s in g.leaf_start(j)..g.leaf_start(j + 1) {
                    assert_eq!(g.leaf_of(s), j);
                }
            }
        }
    }

    #[test]
    fn rebalance_spreads_left_anchored() {
        let mut p = Pma::new(8, PmaThresholds::default());
        assert_eq!(p.depth(), 1);
        p.load((0..8).map(|i| (i < 4).then(|| k(i as i64))).collect());
        let moved = p.rebalance(TreeNode::ROOT);
        let occupied: Vec<_> = p.arr.occupied(0, 8).map(|(s, _)| s).collect();
        assert_eq!(occupied, vec![0, 2, 4, 6]);
        assert_eq!(moved, 3);
        assert_eq!(p.leaf_counts(), &[2, 2]);
    }

    #[test]
    fn rebalance_of_full_range_is_free() {
        let mut p = Pma::new(4, PmaThresholds::default());
        p.load((0..4).map(|i| Some(k(i))).collect());
        assert_eq!(p.rebalance(TreeNode::ROOT), 0);
        let mut leaf = Pma::new(4, PmaThresholds::default());
        leaf.load((0..4).map(|i| Some(k(i))).collect());
        assert_eq!(leaf.rebalance(TreeNode { depth: 1, index: 1 }), 0);
    }

    #[test]
    fn single_element_moves_at_most_once() {
        let mut p = Pma::new(8, PmaThresholds::default());
        p.load((0..8).map(|i| (i == 5).then(|| k(1))).collect());
        assert!(p.rebalance(TreeNode::ROOT) <= 1);
        assert_eq!(p.arr.get(0).map(|k| k.raw), Some(1));
    }

    #[test]
    fn init_spreads_evenly() {
        let mut p = Pma::with_exact_slots(12, PmaThresholds::default());
        let keys: Vec<_> = (0..6).map(k).collect();
        assert_eq!(p.init(&keys).unwrap(), 0);
        let occupied: Vec<_> = p.arr.occupied(0, 12).map(|(s, _)| s).collect();
        assert_eq!(occupied, vec![0, 2, 4, 6, 8, 10]);
    }

    #[test]
    fn init_errors() {
        let mut p = Pma::with_exact_slots(4, PmaThresholds::default());
        assert_eq!(p.init(&[]).unwrap(), 0);
        assert!(p.is_empty());
        assert_eq!(p.init(&[k(2), k(1)]), Err(LlaError::UnsortedInit));
        let five: Vec<_> = (0..5).map(k).collect();
        assert!(matches!(
            p.init(&five),
            Err(LlaError::CapacityExceeded { .. })
        ));
        p.init(&[k(1)]).unwrap();
        assert_eq!(p.init(&[k(1)]), Err(LlaError::NotEmpty));
    }

    #[test]
    fn init_counts_placements_when_asked() {
        let mut p = Pma::with_exact_slots(12, PmaThresholds::default()).counting_first_placement();
        let keys: Vec<_> = (0..6).map(k).collect();
        assert_eq!(p.init(&keys).unwrap(), 6);
    }

    #[test]
    fn first_insert_is_free() {
        let mut p = Pma::new(16, PmaThresholds::default());
        assert_eq!(p.insert(k(10)).unwrap(), 0);
        assert_eq!(p.ledger().total_inserts, 1);
    }

    #[test]
    fn density_of_nodes() {
        let mut p = Pma::new(64, PmaThresholds::default());
        assert_eq!(p.density_of(TreeNode::ROOT), 0.0);
        p.init(&[k(1), k(2), k(3)]).unwrap();
        assert_eq!(p.density_of(TreeNode::ROOT), 3.0 / 64.0);
        let mut q = Pma::new(64, PmaThresholds::default());
        q.load((0..64).map(|i| (i < 3).then(|| k(i as i64))).collect());
        assert_eq!(q.density_of(TreeNode { depth: 3, index: 0 }), 0.375);
        assert_eq!(q.density_of(TreeNode { depth: 3, index: 1 }), 0.0);
    }

    #[test]
    fn fills_to_root_threshold_then_refuses() {
        let mut p = Pma::new(64, PmaThresholds::default());
        let mut inserted = 0;
        let refused = loop {
            match p.insert(k((inserted * 7919) % 64)) {
                Ok(_) => inserted += 1,
                Err(e) => break e,
            }
            assert!(verify_sorted(p.array()));
        };
        assert!(matches!(refused, LlaError::CapacityExceeded { .. }));
        // The root is only consulted once it holds more than half the slots.
        assert!((33..64).contains(&inserted), "{inserted}");
    }

    #[test]
    fn predecessor_lookup() {
        let mut p = Pma::new(64, PmaThresholds::default());
        for raw in [10, 20, 20, 30] {
            p.insert(k(raw)).unwrap();
        }
        let slot = |raw| {
            p.predecessor_slot(k(raw))
                .map(|s| p.arr.get(s).unwrap().raw)
        };
        assert_eq!(slot(5), None);
        assert_eq!(slot(10), Some(10));
        assert_eq!(slot(25), Some(20));
        assert_eq!(slot(99), Some(30));
    }

    #[test]
    fn duplicates_go_after_last_equal() {
        let mut p = Pma::new(32, PmaThresholds::default());
        p.insert(Key::new(5, 0)).unwrap();
        p.insert(Key::new(5, 1)).unwrap();
        p.insert(Key::new(5, 2)).unwrap();
        let seqs: Vec<_> = p.keys().iter().map(|k| k.seq).collect();
        assert_eq!(seqs, vec![0, 1, 2]);
    }
}
