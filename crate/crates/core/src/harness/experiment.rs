use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::key::Key;
use crate::learned::{LearnedLla, PredictedInsert, Step};
use crate::lla::BlackBoxKind;
use crate::predictors::{
    corrupt, eta_max, predict, select_predictor, true_ranks, PredictionVector, PredictorTag,
    SequenceSlice,
};

use super::{HarnessError, Result};

/// A configuration under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Structure {
    /// Learned layout with every prediction set to 1, PMA black boxes.
    Pma,
    /// Same with APMA black boxes.
    Apma,
    LearnedPma,
    LearnedApma,
}

impl Structure {
    pub const ALL: [Structure; 4] = [
        Structure::Pma,
        Structure::Apma,
        Structure::LearnedPma,
        Structure::LearnedApma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Pma => "pma",
            Structure::Apma => "apma",
            Structure::LearnedPma => "learned-pma",
            Structure::LearnedApma => "learned-apma",
        }
    }

    pub fn parse(s: &str) -> Option<Structure> {
        Structure::ALL.into_iter().find(|x| x.name() == s)
    }

    pub fn kind(self) -> BlackBoxKind {
        match self {
            Structure::Pma | Structure::LearnedPma => BlackBoxKind::Pma,
            Structure::Apma | Structure::LearnedApma => BlackBoxKind::Apma,
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Structure::LearnedPma | Structure::LearnedApma)
    }
}

/// One output row.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub structure: String,
    pub dataset: String,
    pub train: usize,
    pub test: usize,
    pub amortized_cost: f64,
    pub merges: u64,
    pub eta_max: Option<usize>,
    pub seed: Option<u64>,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub wall_time: Duration,
    pub witness_checks: u64,
    pub witness_failures: u64,
}

/// Counters from a single run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOutcome {
    pub movements: u64,
    pub inserts: u64,
    pub merges: u64,
    pub amortized_cost: f64,
    pub black_box_movements: u64,
    pub merge_movements: u64,
    pub witness_checks: u64,
    pub witness_failures: u64,
    pub wall_time: Duration,
}

/// Predicted and true ranks for checking every merge.
#[derive(Clone, Debug)]
pub struct WitnessInput {
    pub predicted: Arc<Vec<usize>>,
    pub truth: Arc<Vec<usize>>,
}

/// Inserts `keys` in order into a learned structure of capacity
/// `keys.len()`, after the sentinel. Baseline structures ignore
/// `predictions` and use rank 1 throughout. Keys are renumbered `0..` so
/// that sequence numbers index `predictions`.
pub fn run_config(
    structure: Structure,
    keys: &[Key],
    predictions: &[usize],
    witness: bool,
) -> Result<RunOutcome> {
    let n = keys.len();
    if n == 0 {
        return Err(HarnessError::Config("no keys to insert".into()));
    }
    let ranks: Vec<usize> = if structure.is_learned() {
        if predictions.len() != n {
            return Err(HarnessError::Config(format!(
                "{} predictions for {n} keys",
                predictions.len()
            )));
        }
        predictions.iter().map(|&r| r.clamp(1, n)).collect()
    } else {
        vec![1; n]
    };

    let start = Instant::now();
    let mut lla = LearnedLla::new(n, structure.kind().factory());
    let checks = Arc::new(AtomicU64::new(0));
    let failures = Arc::new(AtomicU64::new(0));
    if witness {
        let w = WitnessInput {
            predicted: Arc::new(ranks.clone()),
            truth: Arc::new(true_ranks(keys)),
        };
        let (c, f) = (checks.clone(), failures.clone());
        lla.set_observer(move |l: &LearnedLla, step: &Step| {
            if let Step::Merge { node } = *step {
                c.fetch_add(1, Ordering::Relaxed);
                if !l.witness_error_check(node, &w.predicted, &w.truth) {
                    f.fetch_add(1, Ordering::Relaxed);
                }
            }
        });
    }
    lla.insert_sentinel()?;
    for (i, (k, &r)) in keys.iter().zip(&ranks).enumerate() {
        lla.insert(PredictedInsert {
            key: Key::new(k.raw, i as u64),
            rank: r,
        })?;
    }
    let ledger = lla.ledger();
    Ok(RunOutcome {
        movements: ledger.total_movements,
        inserts: ledger.total_inserts,
        merges: lla.merges(),
        amortized_cost: ledger.amortized_cost().unwrap_or(0.0),
        black_box_movements: lla.black_box_movements(),
        merge_movements: lla.merge_movements(),
        witness_checks: checks.load(Ordering::Relaxed),
        witness_failures: failures.load(Ordering::Relaxed),
        wall_time: start.elapsed(),
    })
}

/// Inserts `keys` into a single black box of `slots` slots, after the
/// sentinel. The sentinel is not charged or counted.
pub fn run_standalone(kind: BlackBoxKind, keys: &[Key], slots: usize) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut lla = kind.build(slots);
    lla.insert(crate::key::MIN_KEY)?;
    let before = *lla.ledger();
    for (i, k) in keys.iter().enumerate() {
        lla.insert(Key::new(k.raw, i as u64))?;
    }
    let ledger = lla.ledger();
    let movements = ledger.total_movements - before.total_movements;
    let inserts = ledger.total_inserts - before.total_inserts;
    Ok(RunOutcome {
        movements,
        inserts,
        amortized_cost: if inserts == 0 {
            0.0
        } else {
            movements as f64 / inserts as f64
        },
        black_box_movements: movements,
        wall_time: start.elapsed(),
        ..RunOutcome::default()
    })
}

/// Predictions for `test` from `train` via validation-split selection.
/// Without training data every prediction is 1.
pub fn prepare_predictions(
    train: &SequenceSlice,
    test: &SequenceSlice,
    kind: BlackBoxKind,
) -> PredictionVector {
    if train.is_empty() {
        return PredictionVector::new(vec![1; test.len()]);
    }
    let tag = if train.len() >= 2 {
        select_predictor(train, kind).tag
    } else {
        PredictorTag::Predictor1
    };
    predict(tag, train, test).expect("train has at least 2 keys when predictor 2 is chosen")
}

struct Point<'a> {
    dataset: String,
    train: SequenceSlice<'a>,
    test: SequenceSlice<'a>,
}

fn predictions_by_kind(
    point: &Point,
    structures: &[Structure],
) -> Vec<(BlackBoxKind, PredictionVector)> {
    let mut kinds: Vec<BlackBoxKind> = structures
        .iter()
        .filter(|s| s.is_learned())
        .map(|s| s.kind())
        .collect();
    kinds.dedup();
    let truth = true_ranks(point.test.keys);
    kinds
        .into_par_iter()
        .map(|kind| {
            let mut p = prepare_predictions(&point.train, &point.test, kind);
            p.measure(&truth);
            (kind, p)
        })
        .collect()
}

fn result_row(s: Structure, point: &Point, out: &RunOutcome, eta: usize) -> ExperimentResult {
    ExperimentResult {
        structure: s.name().into(),
        dataset: point.dataset.clone(),
        train: point.train.len(),
        test: point.test.len(),
        amortized_cost: out.amortized_cost,
        merges: out.merges,
        eta_max: Some(eta),
        seed: None,
        mean: None,
        stddev: None,
        wall_time: out.wall_time,
        witness_checks: out.witness_checks,
        witness_failures: out.witness_failures,
    }
}

fn run_point(point: &Point, structures: &[Structure]) -> Result<Vec<ExperimentResult>> {
    let preds = predictions_by_kind(point, structures);
    let ones_eta = point.test.len().saturating_sub(1);
    structures
        .par_iter()
        .map(|&s| {
            let (ranks, eta): (&[usize], usize) = if s.is_learned() {
                let p = &preds
                    .iter()
                    .find(|(k, _)| *k == s.kind())
                    .expect("prepared")
                    .1;
                (&p.ranks, p.eta_max.expect("measured"))
            } else {
                (&[], ones_eta)
            };
            let out = run_config(s, point.test.keys, ranks, false)?;
            Ok(result_row(s, point, &out, eta))
        })
        .collect()
}

fn check_rows(keys: &[Key], need: usize) -> Result<()> {
    if keys.len() < need {
        return Err(HarnessError::Config(format!(
            "dataset has {} rows, {need} needed",
            keys.len()
        )));
    }
    Ok(())
}

fn pow2(k: u32) -> Result<usize> {
    1usize
        .checked_shl(k)
        .filter(|_| k < 40)
        .ok_or_else(|| HarnessError::Config(format!("k = {k} is too large")))
}

/// Train on the first `2^k` keys, test on the next `2^k`.
pub fn run_table(
    keys: &[Key],
    dataset: &str,
    k: u32,
    structures: &[Structure],
) -> Result<Vec<ExperimentResult>> {
    let n = pow2(k)?;
    check_rows(keys, 2 * n)?;
    let point = Point {
        dataset: dataset.into(),
        train: SequenceSlice::new(&keys[..n], 0),
        test: SequenceSlice::new(&keys[n..2 * n], n),
    };
    run_point(&point, structures)
}

/// [`run_table`] for every `k` in `ks`, in order.
pub fn run_scaling(
    keys: &[Key],
    dataset: &str,
    ks: &[u32],
    structures: &[Structure],
) -> Result<Vec<ExperimentResult>> {
    let rows: Result<Vec<Vec<ExperimentResult>>> = ks
        .par_iter()
        .map(|&k| run_table(keys, dataset, k, structures))
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

/// Fixed test slice of `2^test_k` keys; for each percentage `f` the
/// training slice is the `f * 2^test_k / 100` keys right before it. The
/// test slice starts after the largest training slice.
pub fn run_learning_curve(
    keys: &[Key],
    dataset: &str,
    test_k: u32,
    fractions: &[u32],
    structures: &[Structure],
) -> Result<Vec<ExperimentResult>> {
    let n = pow2(test_k)?;
    let sizes: Vec<usize> = fractions.iter().map(|&f| f as usize * n / 100).collect();
    let start = sizes.iter().copied().max().unwrap_or(0);
    check_rows(keys, start + n)?;
    let test = SequenceSlice::new(&keys[start..start + n], start);

    let baselines: Vec<Structure> = structures
        .iter()
        .copied()
        .filter(|s| !s.is_learned())
        .collect();
    let learned: Vec<Structure> = structures
        .iter()
        .copied()
        .filter(|s| s.is_learned())
        .collect();
    let base_point = Point {
        dataset: dataset.into(),
        train: SequenceSlice::new(&keys[start..start], start),
        test,
    };
    let base_rows = run_point(&base_point, &baselines)?;

    let per_fraction: Result<Vec<Vec<ExperimentResult>>> = sizes
        .par_iter()
        .map(|&size| {
            let point = Point {
                dataset: dataset.into(),
                train: SequenceSlice::new(&keys[start - size..start], start - size),
                test,
            };
            let mut rows = run_point(&point, &learned)?;
            for b in &base_rows {
                let mut b = b.clone();
                b.train = size;
                rows.push(b);
            }
            let order =
                |r: &ExperimentResult| structures.iter().position(|s| s.name() == r.structure);
            rows.sort_by_key(order);
            Ok(rows)
        })
        .collect();
    Ok(per_fraction?.into_iter().flatten().collect())
}

fn mean_stddev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Table setup with `t` percent of the predictions corrupted, repeated
/// with seeds `seed..seed + repeats`. Learned rows report the mean and
/// population standard deviation of the amortized cost; baselines run
/// once. The dataset label carries `/t=<t>`.
pub fn run_robustness(
    keys: &[Key],
    dataset: &str,
    k: u32,
    t_values: &[u32],
    repeats: u32,
    seed: u64,
    structures: &[Structure],
) -> Result<Vec<ExperimentResult>> {
    if repeats == 0 {
        return Err(HarnessError::Config("repeats must be positive".into()));
    }
    if let Some(t) = t_values.iter().find(|&&t| t > 100) {
        return Err(HarnessError::Config(format!(
            "corruption {t}% exceeds 100%"
        )));
    }
    let n = pow2(k)?;
    check_rows(keys, 2 * n)?;
    let mut point = Point {
        dataset: dataset.into(),
        train: SequenceSlice::new(&keys[..n], 0),
        test: SequenceSlice::new(&keys[n..2 * n], n),
    };
    let truth = true_ranks(point.test.keys);
    let preds = predictions_by_kind(&point, structures);

    let baselines: Vec<Structure> = structures
        .iter()
        .copied()
        .filter(|s| !s.is_learned())
        .collect();
    let base_rows = run_point(&point, &baselines)?;

    let jobs: Vec<(u32, Structure, u64)> = t_values
        .iter()
        .flat_map(|&t| {
            structures
                .iter()
                .filter(|s| s.is_learned())
                .flat_map(move |&s| (0..repeats as u64).map(move |r| (t, s, seed + r)))
        })
        .collect();
    let outcomes: Result<Vec<(RunOutcome, usize)>> = jobs
        .par_iter()
        .map(|&(t, s, sd)| {
            let base = &preds
                .iter()
                .find(|(k, _)| *k == s.kind())
                .expect("prepared")
                .1;
            let c = corrupt(base, t, n, sd);
            let eta = eta_max(&c.ranks, &truth);
            Ok((run_config(s, point.test.keys, &c.ranks, false)?, eta))
        })
        .collect();
    let outcomes = outcomes?;

    let mut rows = Vec::new();
    for b in base_rows {
        rows.push(ExperimentResult {
            seed: None,
            mean: Some(b.amortized_cost),
            stddev: Some(0.0),
            ..b
        });
    }
    let per_group = repeats as usize;
    for (g, chunk) in outcomes.chunks(per_group).enumerate() {
        let (t, s, _) = jobs[g * per_group];
        let costs: Vec<f64> = chunk.iter().map(|(o, _)| o.amortized_cost).collect();
        let (mean, sd) = mean_stddev(&costs);
        point.dataset = format!("{dataset}/t={t}");
        let mut row = result_row(
            s,
            &point,
            &chunk[0].0,
            chunk.iter().map(|c| c.1).max().unwrap_or(0),
        );
        row.amortized_cost = mean;
        row.merges = chunk.iter().map(|(o, _)| o.merges).sum::<u64>() / per_group as u64;
        row.wall_time = chunk.iter().map(|(o, _)| o.wall_time).sum();
        row.seed = Some(seed);
        row.mean = Some(mean);
        row.stddev = Some(sd);
        rows.push(row);
    }
    Ok(rows)
}
