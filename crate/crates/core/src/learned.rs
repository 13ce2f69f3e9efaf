//! Prediction-routed list labeling over black-box LLAs.
//!
//! A structure of capacity `n` (a power of two) owns `6n` slots and an
//! implicit complete binary tree over the ranks `1..=n`. Node `(h, i)`
//! (height `h`, `i`-th from the left, counting from 0 here) is assigned the
//! `2^h` ranks starting at `i * 2^h` and the `6 * 2^h` slots starting at
//! `6 * i * 2^h`. The nodes that currently run a black box, the *actuals*,
//! cut every root-to-leaf path exactly once, so their ranks and slots
//! partition the whole range. Initially every leaf is an actual.
//!
//! A key arrives with a predicted rank. It goes to the actual owning that
//! rank unless that would break sorted order, in which case it goes to the
//! actual holding its predecessor (if that lies to the right) or its
//! successor (if that lies to the left). When an actual ends up more than
//! half full, every actual under its parent is gathered and the parent
//! becomes an actual, initialized with the gathered keys. The check repeats
//! upward.
//!
//! Labels are 1-based: the global label of a key is its black-box label
//! plus the first slot (0-based) of its actual.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::Range;

use crate::key::{Key, MIN_KEY};
use crate::ledger::MovementLedger;
use crate::lla::{BlackBoxLla, LlaError, LlaFactory};

/// Slots per assigned rank.
pub const SLOTS_PER_RANK: usize = 6;

/// A node of the rank tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub height: u32,
    pub index: usize,
}

impl NodeId {
    pub fn leaf(index: usize) -> Self {
        NodeId { height: 0, index }
    }

    pub fn parent(self) -> NodeId {
        NodeId {
            height: self.height + 1,
            index: self.index / 2,
        }
    }

    /// Number of assigned ranks, `2^h`.
    pub fn rank_count(self) -> usize {
        1 << self.height
    }

    /// Assigned ranks, 0-based half-open.
    pub fn ranks(self) -> Range<usize> {
        let w = self.rank_count();
        self.index * w..(self.index + 1) * w
    }

    /// Assigned slots, 0-based half-open.
    pub fn slots(self) -> Range<usize> {
        let r = self.ranks();
        r.start * SLOTS_PER_RANK..r.end * SLOTS_PER_RANK
    }
}

/// The static tree: capacity and height.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankTree {
    capacity: usize,
    height: u32,
}

impl RankTree {
    /// Rounds `n` up to a power of two.
    pub fn new(n: usize) -> Self {
        let capacity = n.max(1).next_power_of_two();
        RankTree {
            capacity,
            height: capacity.trailing_zeros(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn slot_count(&self) -> usize {
        self.capacity * SLOTS_PER_RANK
    }

    pub fn root(&self) -> NodeId {
        NodeId {
            height: self.height,
            index: 0,
        }
    }

    /// Assigned ranks of `node` as 1-based inclusive bounds.
    pub fn assigned_ranks(&self, node: NodeId) -> (usize, usize) {
        let r = node.ranks();
        (r.start + 1, r.end)
    }

    /// Assigned slots of `node` as 1-based inclusive bounds.
    pub fn assigned_slots(&self, node: NodeId) -> (usize, usize) {
        let s = node.slots();
        (s.start + 1, s.end)
    }
}

/// A key with its predicted rank (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PredictedInsert {
    pub key: Key,
    pub rank: usize,
}

/// Eq. (1) style routing decision over comparable actual positions.
pub fn choose_actual<T: Ord>(pred: T, succ: T, by_rank: T) -> T {
    if pred > by_rank {
        pred
    } else if succ < by_rank {
        succ
    } else {
        by_rank
    }
}

/// A primitive step, reported to the observer after it completes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Insert { actual: NodeId, key: Key },
    Merge { node: NodeId },
}

/// Result of one insert.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InsertReport {
    pub movements: u64,
    pub merges: Vec<NodeId>,
}

struct Actual {
    node: NodeId,
    lla: Option<Box<dyn BlackBoxLla>>,
    min: Option<Key>,
    max: Option<Key>,
}

impl Actual {
    fn new(node: NodeId) -> Self {
        Actual {
            node,
            lla: None,
            min: None,
            max: None,
        }
    }

    fn len(&self) -> usize {
        self.lla.as_ref().map_or(0, |l| l.len())
    }
}

type Observer = Box<dyn FnMut(&LearnedLla, &Step) + Send>;

pub struct LearnedLla {
    tree: RankTree,
    requested: usize,
    actuals: BTreeMap<usize, Actual>,
    by_min: BTreeSet<(i64, usize)>,
    factory: LlaFactory,
    ledger: MovementLedger,
    len: usize,
    sentinels: usize,
    merges: u64,
    box_movements: u64,
    merge_movements: u64,
    observer: Option<Observer>,
}

impl std::fmt::Debug for LearnedLla {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LearnedLla")
            .field("tree", &self.tree)
            .field("requested", &self.requested)
            .field("actuals", &self.actuals.len())
            .field("len", &self.len)
            .field("ledger", &self.ledger)
            .finish()
    }
}

impl LearnedLla {
    /// A structure for `n` keys. Capacity is `n` rounded up to a power of
    /// two; predicted ranks are clamped to `1..=n`.
    ///
    /// The factory is called with an exact slot count and must return an
    /// empty black box that does not charge first placements.
    pub fn new(n: usize, factory: LlaFactory) -> Self {
        let tree = RankTree::new(n);
        let actuals = (0..tree.capacity())
            .map(|i| (i, Actual::new(NodeId::leaf(i))))
            .collect();
        LearnedLla {
            tree,
            requested: n.max(1),
            actuals,
            by_min: BTreeSet::new(),
            factory,
            ledger: MovementLedger::new(true),
            len: 0,
            sentinels: 0,
            merges: 0,
            box_movements: 0,
            merge_movements: 0,
            observer: None,
        }
    }

    /// Charge first placements as movements too.
    pub fn counting_first_placement(mut self) -> Self {
        self.ledger.first_placement_excluded = false;
        self
    }

    /// Calls `f` after every black-box insert and every merge.
    pub fn set_observer(&mut self, f: impl FnMut(&LearnedLla, &Step) + Send + 'static) {
        self.observer = Some(Box::new(f));
    }

    pub fn tree(&self) -> &RankTree {
        &self.tree
    }

    pub fn ledger(&self) -> &MovementLedger {
        &self.ledger
    }

    /// Keys inserted through [`insert`](Self::insert).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn merges(&self) -> u64 {
        self.merges
    }

    /// Movements charged by black-box inserts.
    pub fn black_box_movements(&self) -> u64 {
        self.box_movements
    }

    /// Movements charged by merges.
    pub fn merge_movements(&self) -> u64 {
        self.merge_movements
    }

    pub fn actual_count(&self) -> usize {
        self.actuals.len()
    }

    pub fn actual_nodes(&self) -> Vec<NodeId> {
        self.actuals.values().map(|a| a.node).collect()
    }

    /// 1-based position of the actual starting at rank `start` (0-based).
    pub fn position_of(&self, start: usize) -> usize {
        self.actuals.range(..start).count() + 1
    }

    pub fn clamp_rank(&self, rank: usize) -> usize {
        rank.clamp(1, self.requested)
    }

    /// First rank (0-based) of the actual whose ranks contain `rank0`.
    fn actual_for_rank(&self, rank0: usize) -> usize {
        *self
            .actuals
            .range(..=rank0)
            .next_back()
            .expect("actuals cover every rank")
            .0
    }

    /// Actuals holding the predecessor and successor of `key`, by first
    /// rank. Without a predecessor the first actual is used; without a
    /// successor the last.
    pub fn find_neighbors(&self, key: Key) -> (usize, usize) {
        let first = *self.actuals.keys().next().expect("nonempty");
        let last = *self.actuals.keys().next_back().expect("nonempty");
        let after = |raw: i64| {
            self.by_min
                .range((raw, usize::MAX)..)
                .next()
                .map_or(last, |e| e.1)
        };
        match self.by_min.range(..=(key.raw, usize::MAX)).next_back() {
            None => (first, self.by_min.iter().next().map_or(last, |e| e.1)),
            Some(&(_, p)) => {
                let holds_successor = self.actuals[&p].max.is_some_and(|m| m > key);
                (p, if holds_successor { p } else { after(key.raw) })
            }
        }
    }

    /// First rank of the actual that receives `x`.
    pub fn route(&self, x: PredictedInsert) -> usize {
        let by_rank = self.actual_for_rank(self.clamp_rank(x.rank) - 1);
        let (pred, succ) = self.find_neighbors(x.key);
        choose_actual(pred, succ, by_rank)
    }

    pub fn insert(&mut self, x: PredictedInsert) -> Result<InsertReport, LlaError> {
        if self.len >= self.tree.capacity() {
            return Err(LlaError::CapacityExceeded {
                len: self.len,
                size: self.tree.capacity(),
            });
        }
        self.ledger.count_insert();
        self.place(x)
    }

    /// Inserts the `-inf` sentinel with predicted rank 1. It is not counted
    /// as an insert and its own placement is free.
    pub fn insert_sentinel(&mut self) -> Result<InsertReport, LlaError> {
        self.sentinels += 1;
        self.place(PredictedInsert {
            key: MIN_KEY,
            rank: 1,
        })
    }

    fn place(&mut self, x: PredictedInsert) -> Result<InsertReport, LlaError> {
        let start = self.route(x);
        let key = x.key;
        let actual = self.actuals.get_mut(&start).expect("routed to an actual");
        let node = actual.node;
        let lla = actual
            .lla
            .get_or_insert_with(|| (self.factory)(node.slots().len()));
        let relabels = lla.insert(key)?;
        if actual.min.is_none_or(|m| key < m) {
            if let Some(m) = actual.min {
                self.by_min.remove(&(m.raw, start));
            }
            self.by_min.insert((key.raw, start));
            actual.min = Some(key);
        }
        if actual.max.is_none_or(|m| key >= m) {
            actual.max = Some(key);
        }
        let len = lla.len();
        if !key.is_sentinel() {
            self.len += 1;
        }

        let mut report = InsertReport::default();
        let placement = u64::from(!key.is_sentinel());
        report.movements += self.ledger.charge(relabels, placement);
        self.box_movements += relabels;
        self.notify(Step::Insert { actual: node, key });

        let mut node = node;
        let mut len = len;
        while 2 * len > node.slots().len() {
            if node.height == self.tree.height() {
                return Err(LlaError::CapacityExceeded {
                    len,
                    size: node.slots().len(),
                });
            }
            let parent = node.parent();
            report.movements += self.merge(parent)?;
            report.merges.push(parent);
            node = parent;
            len = self.actuals[&node.ranks().start].len();
        }
        Ok(report)
    }

    /// Gathers every actual under `parent` into one black box for
    /// `parent`. Every gathered key whose global label changed is charged
    /// one movement; returns the amount charged.
    pub fn merge(&mut self, parent: NodeId) -> Result<u64, LlaError> {
        if parent.height > self.tree.height() {
            return Err(LlaError::CapacityExceeded {
                len: self.len,
                size: self.tree.slot_count(),
            });
        }
        let ranks = parent.ranks();
        if self
            .actuals
            .get(&ranks.start)
            .is_some_and(|a| a.node == parent)
        {
            return Err(LlaError::InvalidArgument(format!(
                "{parent:?} is already an actual"
            )));
        }
        let starts: Vec<usize> = self.actuals.range(ranks).map(|(s, _)| *s).collect();
        let mut keys = Vec::new();
        let mut old_labels = Vec::new();
        for s in starts {
            let child = self.actuals.remove(&s).expect("listed");
            if let Some(m) = child.min {
                self.by_min.remove(&(m.raw, s));
            }
            if let Some(lla) = child.lla {
                let offset = child.node.slots().start;
                for (k, label) in lla.labels() {
                    keys.push(k);
                    old_labels.push(label + offset);
                }
            }
        }

        let mut lla = (self.factory)(parent.slots().len());
        lla.init(&keys)?;
        let offset = parent.slots().start;
        let moved = lla
            .labels()
            .iter()
            .zip(&old_labels)
            .filter(|((_, new), &old)| new + offset != old)
            .count() as u64;

        let start = parent.ranks().start;
        if let Some(m) = keys.first() {
            self.by_min.insert((m.raw, start));
        }
        self.actuals.insert(
            start,
            Actual {
                node: parent,
                min: keys.first().copied(),
                max: keys.last().copied(),
                lla: Some(lla),
            },
        );
        self.merges += 1;
        self.merge_movements += moved;
        let charged = self.ledger.charge(moved, 0);
        self.notify(Step::Merge { node: parent });
        Ok(charged)
    }

    fn notify(&mut self, step: Step) {
        if let Some(mut f) = self.observer.take() {
            f(self, &step);
            self.observer = Some(f);
        }
    }

    /// `(key, label)` for every stored key in sorted order, labels 1-based
    /// in `1..=6n`.
    pub fn global_labels(&self) -> Vec<(Key, usize)> {
        let mut out = Vec::with_capacity(self.len + self.sentinels);
        for a in self.actuals.values() {
            if let Some(lla) = &a.lla {
                let offset = a.node.slots().start;
                out.extend(lla.labels().into_iter().map(|(k, l)| (k, l + offset)));
            }
        }
        out
    }

    /// Keys stored in the actual for `node`, or `None` if `node` is not an
    /// actual.
    pub fn keys_of(&self, node: NodeId) -> Option<Vec<Key>> {
        let a = self.actuals.get(&node.ranks().start)?;
        (a.node == node).then(|| a.lla.as_ref().map_or_else(Vec::new, |l| l.keys()))
    }

    /// Whether the actual for `node` holds a key whose prediction error is
    /// at least half its rank count. `predicted` and `truth` are 1-based
    /// ranks indexed by key sequence number; keys outside both (the
    /// sentinel) are skipped.
    pub fn witness_error_check(&self, node: NodeId, predicted: &[usize], truth: &[usize]) -> bool {
        let Some(keys) = self.keys_of(node) else {
            return false;
        };
        keys.iter().any(|k| {
            let i = k.seq as usize;
            match (predicted.get(i), truth.get(i)) {
                (Some(&p), Some(&r)) => 2 * p.abs_diff(r) >= node.rank_count(),
                _ => false,
            }
        })
    }

    /// Checks every structural invariant; returns the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut next_rank = 0;
        let mut next_slot = 0;
        let mut prev_max: Option<Key> = None;
        let mut stored = 0;
        let mut mins = BTreeSet::new();
        for (&start, a) in &self.actuals {
            let n = a.node;
            if n.ranks().start != start || start % n.rank_count() != 0 {
                return Err(format!("{n:?} misaligned at {start}"));
            }
            if start != next_rank {
                return Err(format!("rank gap before {n:?}"));
            }
            if n.slots().start != next_slot {
                return Err(format!("slot gap before {n:?}"));
            }
            next_rank = n.ranks().end;
            next_slot = n.slots().end;
            let keys = a.lla.as_ref().map_or_else(Vec::new, |l| l.keys());
            if let Some(lla) = &a.lla {
                if lla.size() != n.slots().len() {
                    return Err(format!("{n:?} black box has {} slots", lla.size()));
                }
                if !crate::array::verify_sorted(lla.array()) {
                    return Err(format!("{n:?} unsorted"));
                }
            }
            if 2 * keys.len() > n.slots().len() {
                return Err(format!("{n:?} holds {} keys", keys.len()));
            }
            if a.min.map(|k| k.raw) != keys.first().map(|k| k.raw)
                || a.max.map(|k| k.raw) != keys.last().map(|k| k.raw)
            {
                return Err(format!("{n:?} stale min/max"));
            }
            if let (Some(pm), Some(first)) = (prev_max, keys.first()) {
                if pm > *first {
                    return Err(format!("{n:?} overlaps its left neighbour"));
                }
            }
            if let Some(last) = keys.last() {
                prev_max = Some(*last);
                mins.insert((keys[0].raw, start));
            }
            stored += keys.len();
        }
        if next_rank != self.tree.capacity() || next_slot != self.tree.slot_count() {
            return Err("actuals do not cover the tree".into());
        }
        if stored != self.len + self.sentinels {
            return Err(format!(
                "stored {stored} != inserted {}",
                self.len + self.sentinels
            ));
        }
        if mins != self.by_min {
            return Err("boundary index out of sync".into());
        }

        let nodes: HashSet<NodeId> = self.actuals.values().map(|a| a.node).collect();
        for leaf in 0..self.tree.capacity() {
            let hits = (0..=self.tree.height())
                .filter(|&h| {
                    nodes.contains(&NodeId {
                        height: h,
                        index: leaf >> h,
                    })
                })
                .count();
            if hits != 1 {
                return Err(format!("leaf {leaf} path crosses {hits} actuals"));
            }
        }

        let labels = self.global_labels();
        for w in labels.windows(2) {
            if w[0].1 >= w[1].1 || w[0].0 > w[1].0 {
                return Err(format!("global labels out of order at {:?}", w[1]));
            }
        }
        if labels.last().is_some_and(|l| l.1 > self.tree.slot_count()) {
            return Err("label past the last slot".into());
        }
        Ok(())
    }
}
