//! Adaptive packed-memory array.
//!
//! Same tree, thresholds and insert path as [`Pma`](crate::pma::Pma), but a
//! rebalance hands out free slots unevenly: each leaf's share of the
//! window's free slots is proportional to `(1 + hits) * leaf_len`, where
//! `hits` counts recent inserts routed to that leaf. Counters are halved
//! every `decay_period` inserts so the histogram tracks recent traffic.
//!
//! With a flat histogram the layout is exactly the even spread.

use std::ops::Range;

use crate::pma::{Geometry, PackedArray, SpreadPolicy, TreeNode};

/// Per-leaf insert counters with periodic halving.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InsertHistogram {
    counters: Vec<u64>,
    decay_period: u64,
    since_decay: u64,
}

impl InsertHistogram {
    pub fn new(leaves: usize, decay_period: u64) -> Self {
        InsertHistogram {
            counters: vec![0; leaves],
            decay_period: decay_period.max(1),
            since_decay: 0,
        }
    }

    pub fn counters(&self) -> &[u64] {
        &self.counters
    }

    pub fn decay_period(&self) -> u64 {
        self.decay_period
    }

    pub fn record(&mut self, leaf: usize) {
        self.counters[leaf] += 1;
        self.since_decay += 1;
        if self.since_decay == self.decay_period {
            self.decay();
            self.since_decay = 0;
        }
    }

    /// Halves every counter, rounding down.
    pub fn decay(&mut self) {
        for c in &mut self.counters {
            *c /= 2;
        }
    }

    pub fn weight(&self, leaf: usize) -> u64 {
        1 + self.counters[leaf]
    }
}

/// Histogram-weighted spread.
#[derive(Clone, Debug)]
pub struct AdaptiveSpread {
    pub histogram: InsertHistogram,
}

impl SpreadPolicy for AdaptiveSpread {
    fn for_geometry(geometry: &Geometry) -> Self {
        let leaf = (geometry.slots() >> geometry.depth()).max(1) as u64;
        AdaptiveSpread {
            histogram: InsertHistogram::new(geometry.leaf_count(), leaf * 4),
        }
    }

    fn record_insert(&mut self, leaf: usize) {
        self.histogram.record(leaf);
    }

    fn spread(
        &self,
        geometry: &Geometry,
        leaves: Range<usize>,
        count: usize,
        out: &mut Vec<usize>,
    ) {
        let bounds: Vec<(usize, usize)> = leaves
            .clone()
            .map(|j| {
                let lo = geometry.leaf_start(j);
                (lo, geometry.leaf_start(j + 1) - lo)
            })
            .collect();
        let weights: Vec<u64> = leaves.map(|j| self.histogram.weight(j)).collect();
        weighted_positions(&bounds, &weights, count, out);
    }
}

/// Places `count` elements over consecutive leaves `(start, len)` so that
/// leaf `j` receives a share of the free slots proportional to
/// `weights[j] * len_j`, capping leaves whose share would exceed their
/// length. Inside a leaf the elements are spaced evenly and left-anchored.
///
/// All arithmetic is exact; equal weights reproduce
/// `lo + floor(i * size / count)` for the whole window.
pub fn weighted_positions(
    bounds: &[(usize, usize)],
    weights: &[u64],
    count: usize,
    out: &mut Vec<usize>,
) {
    assert_eq!(bounds.len(), weights.len());
    if count == 0 {
        return;
    }
    let total: usize = bounds.iter().map(|b| b.1).sum();
    assert!(count <= total, "{count} elements cannot fit {total} slots");
    let omega: Vec<u128> = bounds
        .iter()
        .zip(weights)
        .map(|(&(_, len), &w)| u128::from(w) * len as u128)
        .collect();

    // Water-fill: a leaf whose proportional share of the free slots is at
    // least its length gets no elements; the rest is re-shared.
    let mut capped = vec![false; bounds.len()];
    let (mut free, mut weight_sum) = loop {
        let free: u128 = (total - count) as u128
            - bounds
                .iter()
                .zip(&capped)
                .filter(|(_, &c)| c)
                .map(|(b, _)| b.1 as u128)
                .sum::<u128>();
        let weight_sum: u128 = omega
            .iter()
            .zip(&capped)
            .filter(|(_, &c)| !c)
            .map(|(w, _)| *w)
            .sum();
        let mut changed = false;
        for j in 0..bounds.len() {
            if !capped[j] && free * omega[j] >= bounds[j].1 as u128 * weight_sum {
                capped[j] = true;
                changed = true;
            }
        }
        if !changed {
            break (free, weight_sum);
        }
    };
    if weight_sum == 0 {
        // Only reachable with zero-length leaves everywhere.
        weight_sum = 1;
        free = 0;
    }

    // Element quota of leaf j, scaled by weight_sum.
    let quota: Vec<u128> = (0..bounds.len())
        .map(|j| {
            if capped[j] {
                0
            } else {
                bounds[j].1 as u128 * weight_sum - free * omega[j]
            }
        })
        .collect();
    debug_assert_eq!(quota.iter().sum::<u128>(), count as u128 * weight_sum);

    let mut leaf = 0;
    let mut before: u128 = 0;
    for i in 0..count {
        let t = i as u128 * weight_sum;
        while t >= before + quota[leaf] {
            before += quota[leaf];
            leaf += 1;
        }
        let (start, len) = bounds[leaf];
        let offset = (t - before) * len as u128 / quota[leaf];
        out.push(start + offset as usize);
    }
}

/// Packed-memory array with histogram-weighted rebalancing.
pub type Apma = PackedArray<AdaptiveSpread>;

impl PackedArray<AdaptiveSpread> {
    pub fn histogram(&self) -> &InsertHistogram {
        &self.policy.histogram
    }

    pub fn with_decay_period(mut self, period: u64) -> Self {
        let leaves = self.policy.histogram.counters.len();
        self.policy.histogram = InsertHistogram::new(leaves, period);
        self
    }

    /// Rebalances `node` using the current histogram.
    pub fn weighted_rebalance(&mut self, node: TreeNode) -> u64 {
        self.rebalance(node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::verify_sorted;
    use crate::key::Key;
    use crate::lla::BlackBoxLla;
    use crate::pma::{even_positions, Pma, PmaThresholds};

    #[test]
    fn halving() {
        let mut h = InsertHistogram::new(3, 100);
        h.counters = vec![8, 3, 0];
        h.decay();
        assert_eq!(h.counters(), &[4, 1, 0]);
        let mut z = InsertHistogram::new(3, 100);
        z.decay();
        assert_eq!(z.counters(), &[0, 0, 0]);
        let mut one = InsertHistogram::new(1, 100);
        one.counters = vec![1];
        one.decay();
        assert_eq!(one.counters(), &[0]);
    }

    #[test]
    fn decays_once_per_period() {
        let mut h = InsertHistogram::new(2, 4);
        for _ in 0..3 {
            h.record(0);
        }
        assert_eq!(h.counters(), &[3, 0]);
        h.record(1);
        assert_eq!(h.counters(), &[1, 0]);
    }

    #[test]
    fn histogram_mass_bounded() {
        let mut h = InsertHistogram::new(4, 16);
        for i in 0..10_000 {
            h.record(i % 3);
            assert!(h.counters().iter().sum::<u64>() <= 32);
        }
    }

    #[test]
    fn proportional_free_split() {
        // 8 elements in 16 slots, weights 3:1 -> free 6:2 -> elements 2:6
        let mut out = Vec::new();
        weighted_positions(&[(0, 8), (8, 8)], &[3, 1], 8, &mut out);
        assert_eq!(out.iter().filter(|&&s| s < 8).count(), 2);
        assert_eq!(out.iter().filter(|&&s| s >= 8).count(), 6);
        assert_eq!(out, vec![0, 4, 8, 9, 10, 12, 13, 14]);
    }

    #[test]
    fn heavy_right_leaf_gets_most_room() {
        let mut out = Vec::new();
        let bounds = [(0, 8), (8, 8), (16, 8), (24, 8)];
        weighted_positions(&bounds, &[1, 1, 1, 50], 12, &mut out);
        let per_leaf: Vec<usize> = (0..4)
            .map(|j| out.iter().filter(|&&s| s / 8 == j).count())
            .collect();
        let free: Vec<usize> = per_leaf.iter().map(|c| 8 - c).collect();
        assert!(
            free[3] > free[0] && free[3] > free[1] && free[3] > free[2],
            "{free:?}"
        );
        assert!(out.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn capped_leaf_is_emptied() {
        let mut out = Vec::new();
        weighted_positions(&[(0, 4), (4, 4)], &[1, 1000], 2, &mut out);
        assert_eq!(out, vec![0, 2]);
    }

    #[test]
    fn uniform_weights_match_even_spread() {
        for (lens, count) in [
            (vec![8, 8, 8, 8], 13),
            (vec![6, 6], 7),
            (vec![5, 6, 5, 6], 11),
        ] {
            let mut bounds = Vec::new();
            let mut lo = 3;
            for len in &lens {
                bounds.push((lo, *len));
                lo += len;
            }
            let total: usize = lens.iter().sum();
            for c in 1..=count.min(total) {
                let mut a = Vec::new();
                weighted_positions(&bounds, &vec![7; lens.len()], c, &mut a);
                let mut b = Vec::new();
                even_positions(3, total, c, &mut b);
                assert_eq!(a, b, "lens {lens:?} count {c}");
            }
        }
    }

    #[test]
    fn apma_keeps_order() {
        let mut a = Apma::new(256, PmaThresholds::default());
        for i in 0..120 {
            a.insert(Key::new(i, i as u64)).unwrap();
            assert!(verify_sorted(a.array()));
        }
        assert_eq!(a.len(), 120);
    }

    #[test]
    fn weighted_rebalance_flat_histogram_equals_even() {
        let slots: Vec<_> = (0..64)
            .map(|i| (i % 3 == 0).then(|| Key::new(i as i64, i as u64)))
            .collect();
        let mut a = Apma::new(64, PmaThresholds::default());
        a.load(slots.clone());
        let mut p = Pma::new(64, PmaThresholds::default());
        p.load(slots);
        assert_eq!(
            a.weighted_rebalance(TreeNode::ROOT),
            p.rebalance(TreeNode::ROOT)
        );
        assert_eq!(a.array().slots(), p.array().slots());
    }
}
