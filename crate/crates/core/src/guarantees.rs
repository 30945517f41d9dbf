//! The discriminating margin of a choice model and the error bound it
//! implies for elimination selection.
//!
//! Let `b` be the best item and `j` a rival, both matched against a common
//! set `K`. With `X` (resp. `Y`) the indicator that `b` (resp. `j`) loses,
//! the margin of `(j, K)` is
//!
//! `P(X = 0, Y = 1 | X + Y > 0) − P(X = 1, Y = 0 | X + Y > 0)`
//!
//! and `δ` is its minimum. Two shapes of `K` are admissible: an
//! `(n − 1)`-set disjoint from `{b, j}`, giving two independent matches
//! `{b} ∪ K` and `{j} ∪ K`; and an `n`-set containing both, giving one
//! shared match. Elimination selection with threshold `T` then fails with
//! probability at most `m · exp(−δ² T / 4)`.

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::data::numbered_items;
use crate::error::{Error, Result};
use crate::model::ChoiceModel;
use crate::rng;
use crate::selection::{
    combinations, run_seeds, run_with_oracle, AlgorithmConfig, EliminationConfig, SelectionSession,
};
use crate::stats::{mean_sd, wilson_interval};

/// Largest `m` enumerated exhaustively.
pub const EXACT_LIMIT: usize = 12;
/// Sets sampled per rival and shape above [`EXACT_LIMIT`].
pub const SAMPLED_SETS: usize = 2000;
const SAMPLING_SEED: u64 = 0x5eed_de17a;

#[derive(Debug, Clone, PartialEq)]
pub struct Margin {
    pub rival: usize,
    /// The common set, sorted.
    pub set: Vec<usize>,
    /// One match containing both items, as opposed to two matches.
    pub shared: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEstimate {
    pub best: usize,
    pub delta: f64,
    /// Index into `margins` of the minimizing pair.
    pub witness: usize,
    pub margins: Vec<Margin>,
    /// False when the sets were sampled; `delta` is then an upper estimate.
    pub exact: bool,
    /// Pairs where neither item can ever lose, so the conditional margin is
    /// undefined and imposes nothing.
    pub skipped: usize,
}

impl DeltaEstimate {
    /// `δ ≤ 0`: the bound is vacuous.
    pub fn violated(&self) -> bool {
        self.delta <= 0.0
    }

    pub fn witness(&self) -> &Margin {
        &self.margins[self.witness]
    }
}

fn win_prob(model: &ChoiceModel, slots: &[usize], item: usize) -> Result<f64> {
    let probs = model.oracle_distribution(slots)?;
    Ok(slots
        .iter()
        .zip(&probs)
        .filter(|(&s, _)| s == item)
        .map(|(_, p)| p)
        .sum())
}

fn two_match_margin(
    model: &ChoiceModel,
    best: usize,
    rival: usize,
    set: &[usize],
) -> Result<Option<f64>> {
    let with = |x: usize| {
        let mut v = vec![x];
        v.extend_from_slice(set);
        v
    };
    let pb = win_prob(model, &with(best), best)?;
    let pj = win_prob(model, &with(rival), rival)?;
    let some_loss = 1.0 - pb * pj;
    if some_loss <= 0.0 {
        return Ok(None);
    }
    Ok(Some((pb * (1.0 - pj) - (1.0 - pb) * pj) / some_loss))
}

fn shared_margin(model: &ChoiceModel, best: usize, rival: usize, set: &[usize]) -> Result<f64> {
    Ok(win_prob(model, set, best)? - win_prob(model, set, rival)?)
}

/// Margins for every admissible `(j, K)`, exhaustively for `m ≤ 12` and on
/// sampled sets (fixed seed) beyond that.
pub fn compute_delta(model: &ChoiceModel, n: usize) -> Result<DeltaEstimate> {
    let m = model
        .m()
        .ok_or_else(|| Error::InvalidModel("the margin needs an item-aware model".into()))?;
    if n < 2 || m < n {
        return Err(Error::InvalidConfig(format!("arity {n} for {m} items")));
    }
    let best = model.best_item().ok_or(Error::NoUniqueBest)?;
    let exact = m <= EXACT_LIMIT;
    let per_rival = (0..m)
        .into_par_iter()
        .filter(|&j| j != best)
        .map(|j| -> Result<(Vec<Margin>, usize)> {
            let others: Vec<usize> = (0..m).filter(|&i| i != best && i != j).collect();
            let mut out = Vec::new();
            let mut skipped = 0;
            for set in candidate_sets(&others, n - 1, exact, j as u64 * 2) {
                match two_match_margin(model, best, j, &set)? {
                    Some(margin) => out.push(Margin {
                        rival: j,
                        set,
                        shared: false,
                        margin,
                    }),
                    None => skipped += 1,
                }
            }
            for rest in candidate_sets(&others, n - 2, exact, j as u64 * 2 + 1) {
                let mut set = rest;
                set.push(best);
                set.push(j);
                set.sort_unstable();
                let margin = shared_margin(model, best, j, &set)?;
                out.push(Margin {
                    rival: j,
                    set,
                    shared: true,
                    margin,
                });
            }
            Ok((out, skipped))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut margins = Vec::new();
    let mut skipped = 0;
    for (mut ms, s) in per_rival {
        margins.append(&mut ms);
        skipped += s;
    }
    let witness = margins
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.margin.total_cmp(&b.1.margin))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidConfig("no admissible sets".into()))?;
    Ok(DeltaEstimate {
        best,
        delta: margins[witness].margin,
        witness,
        margins,
        exact,
        skipped,
    })
}

fn candidate_sets(pool: &[usize], size: usize, exact: bool, stream: u64) -> Vec<Vec<usize>> {
    if size > pool.len() {
        return Vec::new();
    }
    if size == 0 {
        return vec![Vec::new()];
    }
    if exact {
        return combinations(pool.len(), size)
            .into_iter()
            .map(|c| c.into_iter().map(|i| pool[i]).collect())
            .collect();
    }
    let mut r = rng::derive(SAMPLING_SEED, &[stream]);
    (0..SAMPLED_SETS)
        .map(|_| {
            let mut s: Vec<usize> = sample(&mut r, pool.len(), size)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            s.sort_unstable();
            s
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBound {
    pub bound: f64,
    /// The bound is 1: `δ ≤ 0` or the raw value reaches 1.
    pub vacuous: bool,
}

/// `min(1, m · exp(−δ² T / 4))`.
pub fn elimination_error_bound(m: usize, t: u32, delta: f64) -> ErrorBound {
    if delta <= 0.0 || !delta.is_finite() {
        return ErrorBound {
            bound: 1.0,
            vacuous: true,
        };
    }
    let raw = m as f64 * (-delta * delta * t as f64 / 4.0).exp();
    ErrorBound {
        bound: raw.min(1.0),
        vacuous: raw >= 1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeReport {
    pub m: usize,
    pub n: usize,
    pub t: u32,
    pub delta: f64,
    pub bound: f64,
    pub vacuous: bool,
    pub empirical_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replications: u64,
    pub failures: u64,
    pub mean_comparisons: f64,
    pub max_comparisons: u64,
    /// `(m / (n − 1) + 2) · T`.
    pub cost_ceiling: f64,
}

impl GuaranteeReport {
    /// The 95% upper band sits at or below a non-vacuous bound.
    pub fn holds(&self) -> bool {
        self.vacuous || self.ci_high <= self.bound
    }
}

/// Runs elimination selection `replications` times per threshold and
/// compares the failure rate with the bound. Run `r` at threshold index `p`
/// uses the seeds `run_seeds(seed, p, r)`.
pub fn verify_bound(
    model: &ChoiceModel,
    n: usize,
    thresholds: &[u32],
    replications: u64,
    seed: u64,
) -> Result<Vec<GuaranteeReport>> {
    if replications == 0 {
        return Err(Error::InvalidConfig(
            "replications must be at least 1".into(),
        ));
    }
    let delta = compute_delta(model, n)?;
    if delta.violated() {
        return Err(Error::InvalidConfig(format!(
            "margin {} is not positive; the bound is vacuous",
            delta.delta
        )));
    }
    let m = model.m().expect("item-aware");
    thresholds
        .iter()
        .enumerate()
        .map(|(p, &t)| {
            let cfg = EliminationConfig::new(numbered_items(m), n, t);
            let cost_ceiling = cfg.cost_ceiling();
            let cfg = AlgorithmConfig::Elimination(cfg);
            cfg.validate()?;
            let runs = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let (s, o) = run_seeds(seed, p, r);
                    run_with_oracle(SelectionSession::new(cfg.clone(), s)?, model, o)
                })
                .collect::<Result<Vec<_>>>()?;
            let failures = runs.iter().filter(|r| r.selected != delta.best).count() as u64;
            let costs: Vec<f64> = runs.iter().map(|r| r.comparisons as f64).collect();
            let (ci_low, ci_high) = wilson_interval(failures, replications);
            let b = elimination_error_bound(m, t, delta.delta);
            Ok(GuaranteeReport {
                m,
                n,
                t,
                delta: delta.delta,
                bound: b.bound,
                vacuous: b.vacuous,
                empirical_rate: failures as f64 / replications as f64,
                ci_low,
                ci_high,
                replications,
                failures,
                mean_comparisons: mean_sd(&costs).0,
                max_comparisons: runs.iter().map(|r| r.comparisons).max().unwrap_or(0),
                cost_ceiling,
            })
        })
        .collect()
}
