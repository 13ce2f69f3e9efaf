//! Rank predictors built from a training prefix.
//!
//! Ranks are 1-based. A key's empirical rank in a training slice is one
//! more than the number of training keys strictly below it.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::key::Key;
use crate::learned::{LearnedLla, PredictedInsert};
use crate::lla::BlackBoxKind;

/// A contiguous run of the input in arrival order.
#[derive(Clone, Copy, Debug)]
pub struct SequenceSlice<'a> {
    pub keys: &'a [Key],
    /// Position of `keys[0]` within the full input.
    pub start_offset: usize,
}

impl<'a> SequenceSlice<'a> {
    pub fn new(keys: &'a [Key], start_offset: usize) -> Self {
        SequenceSlice { keys, start_offset }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Elements `range` of this slice, with the offset adjusted.
    pub fn sub(&self, range: std::ops::Range<usize>) -> SequenceSlice<'a> {
        SequenceSlice {
            keys: &self.keys[range.clone()],
            start_offset: self.start_offset + range.start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictorError {
    #[error("training slice needs at least {need} keys, got {got}")]
    TooShort { need: usize, got: usize },
}

/// Which predictor to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PredictorTag {
    Predictor1,
    Predictor2,
}

/// Predicted ranks aligned with a test slice.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PredictionVector {
    pub ranks: Vec<usize>,
    /// Largest `|predicted - true|`, once true ranks are known.
    pub eta_max: Option<usize>,
}

impl PredictionVector {
    pub fn new(ranks: Vec<usize>) -> Self {
        PredictionVector {
            ranks,
            eta_max: None,
        }
    }

    /// Fills and returns `eta_max` against `truth`.
    pub fn measure(&mut self, truth: &[usize]) -> usize {
        let eta = eta_max(&self.ranks, truth);
        self.eta_max = Some(eta);
        eta
    }
}

pub fn eta_max(predicted: &[usize], truth: &[usize]) -> usize {
    assert_eq!(predicted.len(), truth.len());
    predicted
        .iter()
        .zip(truth)
        .map(|(p, r)| p.abs_diff(*r))
        .max()
        .unwrap_or(0)
}

/// Final 1-based rank of each key among `keys`, equal keys ordered by
/// arrival.
pub fn true_ranks(keys: &[Key]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&i| (keys[i].raw, i));
    let mut ranks = vec![0; keys.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

pub fn empirical_rank(train: &SequenceSlice, x: Key) -> usize {
    train.keys.iter().filter(|k| k.raw < x.raw).count() + 1
}

fn sorted_raws(keys: &[Key]) -> Vec<i64> {
    let mut v: Vec<i64> = keys.iter().map(|k| k.raw).collect();
    v.sort_unstable();
    v
}

/// `round(rank * test / train)` with halves rounded up, clamped to
/// `1..=test`.
fn scale_rank(rank: usize, test: usize, train: usize) -> usize {
    let num = 2 * rank as u128 * test as u128 + train as u128;
    let scaled = (num / (2 * train as u128)) as usize;
    scaled.clamp(1, test.max(1))
}

fn predictor1_sorted(train_sorted: &[i64], test: &[Key]) -> PredictionVector {
    let ranks = test
        .iter()
        .map(|x| {
            let rank = train_sorted.partition_point(|&r| r < x.raw) + 1;
            scale_rank(rank, test.len(), train_sorted.len())
        })
        .collect();
    PredictionVector::new(ranks)
}

/// Empirical rank in `train`, scaled by `|test| / |train|`.
///
/// # Panics
/// If `train` is empty.
pub fn predictor1(train: &SequenceSlice, test: &SequenceSlice) -> PredictionVector {
    assert!(!train.is_empty(), "predictor1 needs training data");
    predictor1_sorted(&sorted_raws(train.keys), test.keys)
}

/// An exact rational `num / den` with `den > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slope {
    pub num: i128,
    pub den: i128,
}

impl Slope {
    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Least-squares slope of `(i, keys[i-1].raw)` for `i = 1..=len`.
pub fn best_fit_slope(train: &SequenceSlice) -> Result<Slope, PredictorError> {
    let n = train.len();
    if n < 2 {
        return Err(PredictorError::TooShort { need: 2, got: n });
    }
    let nn = n as i128;
    let (mut sy, mut sxy) = (0i128, 0i128);
    for (i, k) in train.keys.iter().enumerate() {
        let y = k.raw as i128;
        sy += y;
        sxy += (i as i128 + 1) * y;
    }
    let sx = nn * (nn + 1) / 2;
    let sxx = nn * (nn + 1) * (2 * nn + 1) / 6;
    // sxy * n can exceed i128 for huge inputs; fall back to f64 then.
    let num = sxy.checked_mul(nn).and_then(|a| a.checked_sub(sx * sy));
    let den = nn * sxx - sx * sx;
    match num {
        Some(num) => {
            let g = gcd(num, den).max(1);
            Ok(Slope {
                num: num / g,
                den: den / g,
            })
        }
        None => {
            let mean_x = sx as f64 / n as f64;
            let mean_y = sy as f64 / n as f64;
            let mut cov = 0.0;
            for (i, k) in train.keys.iter().enumerate() {
                cov += (i as f64 + 1.0 - mean_x) * (k.raw as f64 - mean_y);
            }
            let var = den as f64 / (nn * nn) as f64;
            let scale = 1i128 << 40;
            Ok(Slope {
                num: (cov / n as f64 / var * scale as f64).round() as i128,
                den: scale,
            })
        }
    }
}

/// Integer division rounding halves away from zero.
fn div_round(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let q = num / den;
    let r = num % den;
    if 2 * r.abs() >= den {
        q + num.signum()
    } else {
        q
    }
}

/// The shift added to the `i`-th (1-based) training key:
/// `a * (d + i * (test/train - 1))`, rounded to an integer raw value.
fn drift_shift(a: Slope, d: i128, i: i128, test: i128, train: i128) -> i64 {
    let steps = d * train + i * (test - train);
    let exact = a
        .num
        .checked_mul(steps)
        .map(|num| div_round(num, a.den * train));
    let shift = exact.unwrap_or_else(|| (a.as_f64() * steps as f64 / train as f64).round() as i128);
    shift.clamp(i64::MIN as i128 + 1, i64::MAX as i128) as i64
}

/// Shifts each training key along the training trend so the shifted
/// slice lines up with the test window, then applies [`predictor1`].
pub fn predictor2(
    train: &SequenceSlice,
    test: &SequenceSlice,
) -> Result<PredictionVector, PredictorError> {
    let a = best_fit_slope(train)?;
    if a.is_zero() {
        return Ok(predictor1(train, test));
    }
    let d = test.start_offset as i128 - train.start_offset as i128;
    let (t, tr) = (test.len() as i128, train.len() as i128);
    let mut shifted: Vec<i64> = train
        .keys
        .iter()
        .enumerate()
        .map(|(i, k)| {
            k.raw
                .saturating_add(drift_shift(a, d, i as i128 + 1, t, tr))
        })
        .collect();
    shifted.sort_unstable();
    Ok(predictor1_sorted(&shifted, test.keys))
}

pub fn predict(
    tag: PredictorTag,
    train: &SequenceSlice,
    test: &SequenceSlice,
) -> Result<PredictionVector, PredictorError> {
    match tag {
        PredictorTag::Predictor1 => Ok(predictor1(train, test)),
        PredictorTag::Predictor2 => predictor2(train, test),
    }
}

/// Outcome of [`select_predictor`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selection {
    pub tag: PredictorTag,
    /// Total movements of the validation runs, predictor 1 then 2.
    pub movements: [u64; 2],
}

/// Runs a learned structure over `keys` with the given predictions,
/// preceded by the sentinel. Returns the total movements.
pub fn simulate(keys: &[Key], ranks: &[usize], kind: BlackBoxKind) -> u64 {
    let mut lla = LearnedLla::new(keys.len(), kind.factory());
    lla.insert_sentinel().expect("empty structure");
    for (k, &r) in keys.iter().zip(ranks) {
        lla.insert(PredictedInsert { key: *k, rank: r })
            .expect("within capacity");
    }
    lla.ledger().total_movements
}

/// Splits `train` in halves, predicts the second half from the first with
/// each predictor, and keeps the one whose learned run moved fewer
/// elements. Ties, and slices shorter than 4, pick predictor 1.
pub fn select_predictor(train: &SequenceSlice, kind: BlackBoxKind) -> Selection {
    if train.len() < 4 {
        return Selection {
            tag: PredictorTag::Predictor1,
            movements: [0, 0],
        };
    }
    let half = train.len() / 2;
    let (l1, l2) = (train.sub(0..half), train.sub(half..train.len()));
    let p1 = predictor1(&l1, &l2);
    let p2 = predictor2(&l1, &l2).expect("at least 2 keys");
    let m1 = simulate(l2.keys, &p1.ranks, kind);
    let m2 = if p2.ranks == p1.ranks {
        m1
    } else {
        simulate(l2.keys, &p2.ranks, kind)
    };
    Selection {
        tag: if m2 < m1 {
            PredictorTag::Predictor2
        } else {
            PredictorTag::Predictor1
        },
        movements: [m1, m2],
    }
}

/// Replaces `floor(t * n / 100)` predictions, sampled without replacement,
/// with whichever of `1` and `n` is farther from the current value (`n`
/// on ties).
pub fn corrupt(pred: &PredictionVector, t_percent: u32, n: usize, seed: u64) -> PredictionVector {
    assert!(t_percent <= 100, "corruption percentage above 100");
    let len = pred.ranks.len();
    let count = (t_percent as usize * n / 100).min(len);
    let mut ranks = pred.ranks.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in sample(&mut rng, len, count) {
        let r = ranks[i];
        ranks[i] = if r.abs_diff(1) > r.abs_diff(n) { 1 } else { n };
    }
    PredictionVector::new(ranks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(raws: &[i64]) -> Vec<Key> {
        raws.iter()
            .enumerate()
            .map(|(i, &r)| Key::new(r, i as u64))
            .collect()
    }

    #[test]
    fn empirical_rank_counts_strictly_smaller() {
        let k = keys(&[10, 20, 30, 40]);
        let s = SequenceSlice::new(&k, 0);
        assert_eq!(empirical_rank(&s, Key::new(25, 0)), 3);
        assert_eq!(empirical_rank(&s, Key::new(5, 0)), 1);
        assert_eq!(empirical_rank(&s, Key::new(20, 0)), 2);
    }

    #[test]
    fn predictor1_scales_and_clamps() {
        let tr = keys(&[10, 20, 30, 40]);
        let te = keys(&[25, 1, 2, 3, 4, 5, 6, 99]);
        let p = predictor1(&SequenceSlice::new(&tr, 0), &SequenceSlice::new(&te, 4));
        assert_eq!(p.ranks[0], 6);
        // rank 1 * 2 = 2; above everything -> 5 * 2 = 10 clamps to 8
        assert_eq!(p.ranks[1], 2);
        assert_eq!(p.ranks[7], 8);
    }

    #[test]
    fn predictor1_on_itself_is_empirical_rank() {
        let k = keys(&[7, 3, 9, 1, 5]);
        let s = SequenceSlice::new(&k, 0);
        let p = predictor1(&s, &s);
        let expect: Vec<usize> = k.iter().map(|x| empirical_rank(&s, *x)).collect();
        assert_eq!(p.ranks, expect);
    }

    #[test]
    fn halves_round_up() {
        // rank 1 * 3 / 2 = 1.5 -> 2
        assert_eq!(scale_rank(1, 3, 2), 2);
        assert_eq!(scale_rank(1, 5, 4), 1);
        assert_eq!(scale_rank(3, 1, 2), 1);
    }

    #[test]
    fn slopes() {
        let s = |r: &[i64]| best_fit_slope(&SequenceSlice::new(&keys(r), 0)).unwrap();
        assert_eq!(s(&[5, 7, 9, 11]), Slope { num: 2, den: 1 });
        assert_eq!(s(&[4, 4, 4]).num, 0);
        assert_eq!(s(&[1, 2, 4]), Slope { num: 3, den: 2 });
        assert!(best_fit_slope(&SequenceSlice::new(&keys(&[1]), 0)).is_err());
    }

    #[test]
    fn slope_of_large_values() {
        let k: Vec<Key> = (0..300_000)
            .map(|i| Key::new(i64::MAX / 2 - 1_000_000 + i * 7, i as u64))
            .collect();
        let a = best_fit_slope(&SequenceSlice::new(&k, 0)).unwrap();
        assert!((a.as_f64() - 7.0).abs() < 1e-6, "{a:?}");
    }

    #[test]
    fn zero_slope_predictor2_is_predictor1() {
        let tr = keys(&[3, 1, 1, 3]);
        let te = keys(&[0, 2, 4, 1, 3]);
        let (a, b) = (SequenceSlice::new(&tr, 0), SequenceSlice::new(&te, 10));
        assert_eq!(best_fit_slope(&a).unwrap().num, 0);
        assert_eq!(predictor2(&a, &b).unwrap(), predictor1(&a, &b));
    }

    #[test]
    fn unit_drift_shifts_by_offset() {
        // |test| = |train| = d = 4, a = 1: each train key moves up by 4
        assert_eq!(drift_shift(Slope { num: 1, den: 1 }, 4, 1, 4, 4), 4);
        assert_eq!(drift_shift(Slope { num: 1, den: 1 }, 4, 3, 4, 4), 4);
        // a = 3/2, d = 2, i = 2, test 6, train 4: 1.5 * (2 + 2 * 0.5) = 4.5 -> 5
        assert_eq!(drift_shift(Slope { num: 3, den: 2 }, 2, 2, 6, 4), 5);
        assert_eq!(drift_shift(Slope { num: -3, den: 2 }, 2, 2, 6, 4), -5);
    }

    #[test]
    fn drift_compensation_beats_plain_scaling() {
        let all = keys(&(0..200).collect::<Vec<_>>());
        let (tr, te) = (
            SequenceSlice::new(&all[..100], 0),
            SequenceSlice::new(&all[100..], 100),
        );
        let truth = true_ranks(te.keys);
        let e1 = eta_max(&predictor1(&tr, &te).ranks, &truth);
        let e2 = eta_max(&predictor2(&tr, &te).unwrap().ranks, &truth);
        assert!(e2 < e1, "{e2} vs {e1}");
        assert_eq!(e2, 0);
    }

    #[test]
    fn true_ranks_break_ties_by_arrival() {
        assert_eq!(true_ranks(&keys(&[5, 1, 5, 3])), vec![3, 1, 4, 2]);
    }

    #[test]
    fn corruption_endpoints() {
        let p = PredictionVector::new(vec![1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(corrupt(&p, 0, 8, 1), p);
        let all = corrupt(&p, 100, 8, 1);
        assert_eq!(all.ranks, vec![8, 8, 8, 8, 1, 1, 1, 1]);
        // 5 is equidistant from 1 and 9
        let tie = corrupt(&PredictionVector::new(vec![5]), 100, 9, 3);
        assert_eq!(tie.ranks, vec![9]);
    }

    #[test]
    fn corruption_count_and_determinism() {
        let p = PredictionVector::new((1..=100).map(|i| (i % 7) + 40).collect());
        let c = corrupt(&p, 25, 100, 42);
        let changed = p.ranks.iter().zip(&c.ranks).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 25);
        assert_eq!(c, corrupt(&p, 25, 100, 42));
        assert_ne!(c, corrupt(&p, 25, 100, 43));
    }

    #[test]
    fn selection_tie_goes_to_predictor1() {
        let k = keys(&[4, 4, 4, 4, 4, 4]);
        let s = select_predictor(&SequenceSlice::new(&k, 0), BlackBoxKind::Pma);
        assert_eq!(s.tag, PredictorTag::Predictor1);
        assert_eq!(s.movements[0], s.movements[1]);
    }
}
