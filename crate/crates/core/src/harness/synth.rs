use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::key::Key;
use crate::predictors::{eta_max, true_ranks};

use super::experiment::{run_config, ExperimentResult, Structure};
use super::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SynthKind {
    /// Increasing keys.
    Sequential,
    /// Decreasing keys.
    SequentialDesc,
    /// Half random background keys, then each insert just below the
    /// previous one, starting under a fixed background key.
    Hammer,
    /// A random permutation.
    Random,
    /// A random permutation; predictions off by uniform noise in
    /// `[-eta, eta]`.
    NoisyEta,
    /// Increasing keys; prediction errors drawn from `N(mu, s^2)` and
    /// rounded.
    Stochastic,
}

impl SynthKind {
    pub const ALL: [SynthKind; 6] = [
        SynthKind::Sequential,
        SynthKind::SequentialDesc,
        SynthKind::Hammer,
        SynthKind::Random,
        SynthKind::NoisyEta,
        SynthKind::Stochastic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Sequential => "sequential",
            SynthKind::SequentialDesc => "sequential-desc",
            SynthKind::Hammer => "hammer",
            SynthKind::Random => "random",
            SynthKind::NoisyEta => "noisy-eta",
            SynthKind::Stochastic => "stochastic",
        }
    }

    pub fn parse(s: &str) -> Option<SynthKind> {
        SynthKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Prediction noise. `eta` applies to every kind except `Stochastic`,
/// which uses `mu` and `s`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SynthParams {
    pub eta: usize,
    pub mu: f64,
    pub s: f64,
}

/// Keys in arrival order with their true and predicted final ranks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthStream {
    pub keys: Vec<Key>,
    pub truth: Vec<usize>,
    pub predictions: Vec<usize>,
}

fn raw_keys(kind: SynthKind, n: usize, rng: &mut ChaCha8Rng) -> Vec<i64> {
    match kind {
        SynthKind::Sequential | SynthKind::Stochastic => (0..n as i64).collect(),
        SynthKind::SequentialDesc => (0..n as i64).rev().collect(),
        SynthKind::Random | SynthKind::NoisyEta => {
            let mut v: Vec<i64> = (0..n as i64).collect();
            v.shuffle(rng);
            v
        }
        SynthKind::Hammer => {
            let gap = n as i64 + 1;
            let background = n - n / 2;
            let mut v: Vec<i64> = rand::seq::index::sample(rng, 4 * n.max(1), background)
                .into_iter()
                .map(|x| (x as i64 + 1) * gap)
                .collect();
            let mut sorted = v.clone();
            sorted.sort_unstable();
            let target = sorted.get(background / 2).copied().unwrap_or(gap);
            v.extend((1..=(n / 2) as i64).map(|j| target - j));
            v
        }
    }
}

/// Builds a stream of `n` distinct keys. Predictions are clamped to
/// `1..=n`.
pub fn generate(kind: SynthKind, n: usize, params: SynthParams, seed: u64) -> Result<SynthStream> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys: Vec<Key> = raw_keys(kind, n, &mut rng)
        .into_iter()
        .enumerate()
        .map(|(i, r)| Key::new(r, i as u64))
        .collect();
    let truth = true_ranks(&keys);
    let clamp = |r: i64| r.clamp(1, n.max(1) as i64) as usize;
    let predictions = if kind == SynthKind::Stochastic {
        let normal = Normal::new(params.mu, params.s.max(0.0))
            .map_err(|e| HarnessError::Config(format!("bad noise parameters: {e}")))?;
        truth
            .iter()
            .map(|&r| clamp(r as i64 + normal.sample(&mut rng).round() as i64))
            .collect()
    } else {
        let eta = params.eta as i64;
        truth
            .iter()
            .map(|&r| clamp(r as i64 + rng.random_range(-eta..=eta)))
            .collect()
    };
    Ok(SynthStream {
        keys,
        truth,
        predictions,
    })
}

fn label(kind: SynthKind, params: SynthParams) -> String {
    match kind {
        SynthKind::Stochastic => format!("synth-{}/mu={},s={}", kind.name(), params.mu, params.s),
        _ => format!("synth-{}/eta={}", kind.name(), params.eta),
    }
}

/// Runs every structure over one generated stream, checking every merge
/// for a witness key.
pub fn run_synthetic(
    kind: SynthKind,
    n: usize,
    params: SynthParams,
    seed: u64,
    structures: &[Structure],
) -> Result<Vec<ExperimentResult>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(HarnessError::Config(format!(
            "n = {n} is not a power of two"
        )));
    }
    let stream = generate(kind, n, params, seed)?;
    let eta = eta_max(&stream.predictions, &stream.truth);
    let dataset = label(kind, params);
    structures
        .par_iter()
        .map(|&s| {
            let out = run_config(s, &stream.keys, &stream.predictions, true)?;
            Ok(ExperimentResult {
                structure: s.name().into(),
                dataset: dataset.clone(),
                train: 0,
                test: n,
                amortized_cost: out.amortized_cost,
                merges: out.merges,
                eta_max: Some(if s.is_learned() { eta } else { n - 1 }),
                seed: Some(seed),
                mean: None,
                stddev: None,
                wall_time: out.wall_time,
                witness_checks: out.witness_checks,
                witness_failures: out.witness_failures,
            })
        })
        .collect()
}
