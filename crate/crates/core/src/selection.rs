//! Tournament selection, elimination selection and Condorcet voting.
//!
//! Each algorithm is a [`SelectionSession`]: callers ask it for
//! [`ComparisonRequest`]s, put each request to a worker (a person, or a
//! simulated [`ChoiceModel`] via [`run_with_oracle`]), and feed the chosen
//! slot back with [`SelectionSession::submit_outcome`]. Tournament rounds and
//! the Condorcet schedule are issued as whole batches whose answers may
//! arrive in any order; elimination issues one request at a time.
//!
//! Cost laws, checked by the tests on every run:
//!
//! - Condorcet voting makes exactly `k·C(m, n)` comparisons.
//! - Tournament selection makes exactly `P·R` comparisons for `R` rounds.
//! - Elimination selection makes fewer than `(m/(n−1) + 2)·T` comparisons.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::data::ItemId;
use crate::error::{Error, Result};
use crate::model::ChoiceModel;
use crate::rng::{self, Stream};
use crate::stats::{mean_sd, wilson_interval};

pub type RequestId = u64;

pub const DEFAULT_POOL_SIZE: usize = 30;
pub const DEFAULT_MAX_ROUNDS: u32 = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct TournamentConfig {
    pub items: Vec<ItemId>,
    pub arity: usize,
    /// Comparisons per round (`P`).
    pub pool_size: usize,
    /// Stop once one item fills at least this fraction of the pool (`f`).
    pub stop_fraction: f64,
    pub max_rounds: u32,
}

impl TournamentConfig {
    pub fn new(items: Vec<ItemId>, arity: usize, stop_fraction: f64) -> Self {
        TournamentConfig {
            items,
            arity,
            pool_size: DEFAULT_POOL_SIZE,
            stop_fraction,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }

    /// Pool entries the leading item needs: `ceil(f·P)`.
    pub fn stop_count(&self) -> usize {
        // The epsilon keeps 0.9·30 = 27.000000000000004 at 27.
        (self.stop_fraction * self.pool_size as f64 - 1e-9)
            .ceil()
            .max(1.0) as usize
    }

    fn validate(&self) -> Result<()> {
        validate_items(&self.items, self.arity)?;
        if self.pool_size < 1 {
            return Err(Error::InvalidConfig("pool size must be at least 1".into()));
        }
        if !(self.stop_fraction > 0.0 && self.stop_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stop fraction must lie in (0, 1], got {}",
                self.stop_fraction
            )));
        }
        if self.max_rounds < 1 {
            return Err(Error::InvalidConfig("max rounds must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EliminationConfig {
    pub items: Vec<ItemId>,
    pub arity: usize,
    /// Losses that eliminate an item (`T`).
    pub threshold: u32,
}

impl EliminationConfig {
    pub fn new(items: Vec<ItemId>, arity: usize, threshold: u32) -> Self {
        EliminationConfig {
            items,
            arity,
            threshold,
        }
    }

    /// Strict upper bound on comparisons: `(m/(n−1) + 2)·T`.
    pub fn cost_ceiling(&self) -> f64 {
        (self.items.len() as f64 / (self.arity as f64 - 1.0) + 2.0) * self.threshold as f64
    }

    fn validate(&self) -> Result<()> {
        validate_items(&self.items, self.arity)?;
        if self.threshold < 1 {
            return Err(Error::InvalidConfig(
                "loss threshold must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondorcetConfig {
    pub items: Vec<ItemId>,
    pub arity: usize,
    /// Comparisons per subset.
    pub k: u32,
}

impl CondorcetConfig {
    pub fn new(items: Vec<ItemId>, arity: usize, k: u32) -> Self {
        CondorcetConfig { items, arity, k }
    }

    /// `k·C(m, n)`.
    pub fn total_comparisons(&self) -> u64 {
        self.k as u64 * binomial(self.items.len() as u64, self.arity as u64)
    }

    fn validate(&self) -> Result<()> {
        validate_items(&self.items, self.arity)?;
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        Ok(())
    }
}

fn validate_items(items: &[ItemId], arity: usize) -> Result<()> {
    if items.len() < 2 {
        return Err(Error::InvalidConfig("need at least two items".into()));
    }
    if arity < 2 {
        return Err(Error::InvalidConfig("arity must be at least 2".into()));
    }
    if arity > items.len() {
        return Err(Error::InvalidConfig(format!(
            "arity {arity} exceeds the number of items {}",
            items.len()
        )));
    }
    let mut sorted: Vec<&ItemId> = items.iter().collect();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig("duplicate item ids".into()));
    }
    Ok(())
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmConfig {
    Tournament(TournamentConfig),
    Elimination(EliminationConfig),
    Condorcet(CondorcetConfig),
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::Tournament(_) => "tournament",
            AlgorithmConfig::Elimination(_) => "elimination",
            AlgorithmConfig::Condorcet(_) => "condorcet",
        }
    }

    pub fn items(&self) -> &[ItemId] {
        match self {
            AlgorithmConfig::Tournament(c) => &c.items,
            AlgorithmConfig::Elimination(c) => &c.items,
            AlgorithmConfig::Condorcet(c) => &c.items,
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            AlgorithmConfig::Tournament(c) => c.arity,
            AlgorithmConfig::Elimination(c) => c.arity,
            AlgorithmConfig::Condorcet(c) => c.arity,
        }
    }

    /// Name of the swept parameter: `f`, `T` or `k`.
    pub fn param_name(&self) -> &'static str {
        match self {
            AlgorithmConfig::Tournament(_) => "f",
            AlgorithmConfig::Elimination(_) => "T",
            AlgorithmConfig::Condorcet(_) => "k",
        }
    }

    pub fn param_value(&self) -> f64 {
        match self {
            AlgorithmConfig::Tournament(c) => c.stop_fraction,
            AlgorithmConfig::Elimination(c) => c.threshold as f64,
            AlgorithmConfig::Condorcet(c) => c.k as f64,
        }
    }

    /// A copy with the swept parameter set to `value`.
    pub fn with_param(&self, value: f64) -> Result<AlgorithmConfig> {
        let integer = || -> Result<u32> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as u32)
            } else {
                Err(Error::InvalidConfig(format!(
                    "{} must be a non-negative integer, got {value}",
                    self.param_name()
                )))
            }
        };
        let cfg = match self {
            AlgorithmConfig::Tournament(c) => AlgorithmConfig::Tournament(TournamentConfig {
                stop_fraction: value,
                ..c.clone()
            }),
            AlgorithmConfig::Elimination(c) => AlgorithmConfig::Elimination(EliminationConfig {
                threshold: integer()?,
                ..c.clone()
            }),
            AlgorithmConfig::Condorcet(c) => AlgorithmConfig::Condorcet(CondorcetConfig {
                k: integer()?,
                ..c.clone()
            }),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sweep(&self, values: &[f64]) -> Result<Vec<AlgorithmConfig>> {
        values.iter().map(|&v| self.with_param(v)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmConfig::Tournament(c) => c.validate(),
            AlgorithmConfig::Elimination(c) => c.validate(),
            AlgorithmConfig::Condorcet(c) => c.validate(),
        }
    }
}

/// One question for a worker: pick the best of these slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonRequest {
    pub id: RequestId,
    /// Item indices in presentation order. Tournament draws may repeat an
    /// item; the worker then effectively sees only the distinct items.
    pub slots: Vec<usize>,
}

impl ComparisonRequest {
    pub fn distinct_items(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::with_capacity(self.slots.len());
        for &s in &self.slots {
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }

    pub fn has_duplicates(&self) -> bool {
        self.distinct_items().len() != self.slots.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Index of the selected item.
    pub selected: usize,
    pub selected_id: ItemId,
    pub comparisons: u64,
    /// Completed rounds (tournament only).
    pub rounds: Option<u32>,
    /// The final choice was broken uniformly at random among tied items.
    pub tie: bool,
    /// False when the tournament hit its round cap before its stop rule fired.
    pub converged: bool,
}

#[derive(Debug, Clone)]
enum State {
    Tournament {
        pool: Vec<usize>,
        next_pool: Vec<usize>,
        round: u32,
    },
    Elimination {
        losses: Vec<u32>,
        plays: Vec<u32>,
        in_pool: Vec<bool>,
    },
    Condorcet {
        wins: Vec<u64>,
    },
}

/// A resumable run of one selection algorithm.
#[derive(Debug, Clone)]
pub struct SelectionSession {
    config: AlgorithmConfig,
    rng: Stream,
    state: State,
    pending: BTreeMap<RequestId, Vec<usize>>,
    next_id: RequestId,
    comparisons: u64,
    result: Option<RunResult>,
}

impl SelectionSession {
    pub fn new(config: AlgorithmConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let m = config.items().len();
        let state = match &config {
            AlgorithmConfig::Tournament(_) => State::Tournament {
                pool: (0..m).collect(),
                next_pool: Vec::new(),
                round: 0,
            },
            AlgorithmConfig::Elimination(_) => State::Elimination {
                losses: vec![0; m],
                plays: vec![0; m],
                in_pool: vec![true; m],
            },
            AlgorithmConfig::Condorcet(_) => State::Condorcet { wins: vec![0; m] },
        };
        let mut session = SelectionSession {
            config,
            rng: rng::stream(seed),
            state,
            pending: BTreeMap::new(),
            next_id: 0,
            comparisons: 0,
            result: None,
        };
        if let AlgorithmConfig::Condorcet(c) = &session.config {
            let subsets = combinations(m, c.arity);
            for _ in 0..c.k {
                for s in &subsets {
                    let mut slots = s.clone();
                    slots.shuffle(&mut session.rng);
                    session.push_request(slots);
                }
            }
        }
        Ok(session)
    }

    pub fn tournament(cfg: TournamentConfig, seed: u64) -> Result<Self> {
        Self::new(AlgorithmConfig::Tournament(cfg), seed)
    }

    pub fn elimination(cfg: EliminationConfig, seed: u64) -> Result<Self> {
        Self::new(AlgorithmConfig::Elimination(cfg), seed)
    }

    pub fn condorcet(cfg: CondorcetConfig, seed: u64) -> Result<Self> {
        Self::new(AlgorithmConfig::Condorcet(cfg), seed)
    }

    pub fn config(&self) -> &AlgorithmConfig {
        &self.config
    }

    pub fn comparisons_used(&self) -> u64 {
        self.comparisons
    }

    pub fn result(&self) -> Option<&RunResult> {
        self.result.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.result.is_some()
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    /// Current tournament pool (item indices).
    pub fn pool(&self) -> Option<&[usize]> {
        match &self.state {
            State::Tournament { pool, .. } => Some(pool),
            _ => None,
        }
    }

    pub fn rounds(&self) -> Option<u32> {
        match &self.state {
            State::Tournament { round, .. } => Some(*round),
            _ => None,
        }
    }

    /// Per-item loss counts (elimination only).
    pub fn losses(&self) -> Option<&[u32]> {
        match &self.state {
            State::Elimination { losses, .. } => Some(losses),
            _ => None,
        }
    }

    /// Per-item play counts (elimination only).
    pub fn plays(&self) -> Option<&[u32]> {
        match &self.state {
            State::Elimination { plays, .. } => Some(plays),
            _ => None,
        }
    }

    /// Items still in the elimination pool.
    pub fn active_items(&self) -> Option<Vec<usize>> {
        match &self.state {
            State::Elimination { in_pool, .. } => {
                Some((0..in_pool.len()).filter(|&i| in_pool[i]).collect())
            }
            _ => None,
        }
    }

    /// Per-item win counts (Condorcet only).
    pub fn wins(&self) -> Option<&[u64]> {
        match &self.state {
            State::Condorcet { wins } => Some(wins),
            _ => None,
        }
    }

    fn push_request(&mut self, slots: Vec<usize>) {
        self.pending.insert(self.next_id, slots);
        self.next_id += 1;
    }

    fn pending_requests(&self) -> Vec<ComparisonRequest> {
        self.pending
            .iter()
            .map(|(&id, slots)| ComparisonRequest {
                id,
                slots: slots.clone(),
            })
            .collect()
    }

    /// Requests awaiting an answer, issuing new ones when none are pending.
    ///
    /// Tournament: the `P` draws of the current round, each of `n` slots
    /// drawn uniformly with replacement from the pool. Elimination: one
    /// request holding the `n` least-played pool items (ties broken at
    /// random). Condorcet: whatever remains of the schedule.
    pub fn next_requests(&mut self) -> Result<Vec<ComparisonRequest>> {
        if self.result.is_some() {
            return Err(Error::SessionFinished);
        }
        if self.pending.is_empty() {
            let n = self.config.arity();
            match &self.state {
                State::Tournament { pool, .. } => {
                    let p = match &self.config {
                        AlgorithmConfig::Tournament(c) => c.pool_size,
                        _ => unreachable!(),
                    };
                    let pool = pool.clone();
                    for _ in 0..p {
                        let slots = (0..n)
                            .map(|_| pool[self.rng.random_range(0..pool.len())])
                            .collect();
                        self.push_request(slots);
                    }
                }
                State::Elimination { plays, in_pool, .. } => {
                    let mut candidates: Vec<usize> =
                        (0..in_pool.len()).filter(|&i| in_pool[i]).collect();
                    candidates.shuffle(&mut self.rng);
                    candidates.sort_by_key(|&i| plays[i]);
                    let mut slots: Vec<usize> = candidates[..n].to_vec();
                    slots.shuffle(&mut self.rng);
                    self.push_request(slots);
                }
                State::Condorcet { .. } => {}
            }
        }
        Ok(self.pending_requests())
    }

    /// Records the worker's choice (`winner_slot` is 0-based).
    pub fn submit_outcome(&mut self, id: RequestId, winner_slot: usize) -> Result<()> {
        if self.result.is_some() {
            return Err(Error::SessionFinished);
        }
        let arity = match self.pending.get(&id) {
            Some(slots) => slots.len(),
            None => return Err(Error::UnknownRequest(id)),
        };
        if winner_slot >= arity {
            return Err(Error::SlotOutOfRange {
                slot: winner_slot,
                arity,
            });
        }
        let slots = self.pending.remove(&id).expect("checked above");
        self.comparisons += 1;
        let winner = slots[winner_slot];
        let n = self.config.arity();

        match &mut self.state {
            State::Tournament {
                pool,
                next_pool,
                round,
            } => {
                next_pool.push(winner);
                let (p, stop, max_rounds) = match &self.config {
                    AlgorithmConfig::Tournament(c) => (c.pool_size, c.stop_count(), c.max_rounds),
                    _ => unreachable!(),
                };
                if next_pool.len() == p {
                    *pool = std::mem::take(next_pool);
                    *round += 1;
                    let mut counts = vec![0usize; self.config.items().len()];
                    for &i in pool.iter() {
                        counts[i] += 1;
                    }
                    let top = *counts.iter().max().expect("non-empty");
                    if top >= stop || *round >= max_rounds {
                        let converged = top >= stop;
                        let leaders = (0..counts.len()).filter(|&i| counts[i] == top).collect();
                        self.finish(leaders, converged);
                    }
                }
            }
            State::Elimination {
                losses,
                plays,
                in_pool,
            } => {
                let t = match &self.config {
                    AlgorithmConfig::Elimination(c) => c.threshold,
                    _ => unreachable!(),
                };
                for &i in &slots {
                    plays[i] += 1;
                    if i != winner {
                        losses[i] += 1;
                    }
                }
                let mut pool_len = in_pool.iter().filter(|&&b| b).count();
                for &i in &slots {
                    if in_pool[i] && losses[i] >= t && pool_len > n {
                        in_pool[i] = false;
                        pool_len -= 1;
                    }
                }
                if losses.iter().filter(|&&l| l < t).count() <= 1 {
                    let min = *losses.iter().min().expect("non-empty");
                    let leaders = (0..losses.len()).filter(|&i| losses[i] == min).collect();
                    self.finish(leaders, true);
                }
            }
            State::Condorcet { wins } => {
                wins[winner] += 1;
                if self.pending.is_empty() {
                    let max = *wins.iter().max().expect("non-empty");
                    let leaders = (0..wins.len()).filter(|&i| wins[i] == max).collect();
                    self.finish(leaders, true);
                }
            }
        }
        Ok(())
    }

    fn finish(&mut self, leaders: Vec<usize>, converged: bool) {
        let tie = leaders.len() > 1;
        let selected = if tie {
            leaders[self.rng.random_range(0..leaders.len())]
        } else {
            leaders[0]
        };
        self.pending.clear();
        self.result = Some(RunResult {
            selected,
            selected_id: self.config.items()[selected].clone(),
            comparisons: self.comparisons,
            rounds: self.rounds(),
            tie,
            converged,
        });
    }
}

pub(crate) fn check_model(config: &AlgorithmConfig, model: &ChoiceModel) -> Result<()> {
    match model.m() {
        Some(m) if m != config.items().len() => Err(Error::InvalidConfig(format!(
            "model covers {m} items but the algorithm has {}",
            config.items().len()
        ))),
        _ => Ok(()),
    }
}

/// Drives a session to completion against a simulated worker.
pub fn run_with_oracle(
    mut session: SelectionSession,
    model: &ChoiceModel,
    seed: u64,
) -> Result<RunResult> {
    check_model(&session.config, model)?;
    let mut rng = rng::stream(seed);
    while !session.is_finished() {
        for req in session.next_requests()? {
            let slot = model.sample_oracle(&req.slots, &mut rng)?;
            session.submit_outcome(req.id, slot)?;
        }
    }
    Ok(session.result.expect("finished"))
}

/// Seeds for run `index` at sweep point `point`: `(session, oracle)`.
pub fn run_seeds(seed: u64, point: usize, index: u64) -> (u64, u64) {
    (
        rng::derive_seed(seed, &[point as u64, index, 0]),
        rng::derive_seed(seed, &[point as u64, index, 1]),
    )
}

/// Error rate and cost of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCostEstimate {
    pub algorithm: String,
    pub arity: usize,
    pub param_name: String,
    pub param_value: f64,
    pub error_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_comparisons: f64,
    pub sd_comparisons: f64,
    pub runs: u64,
    pub failures: u64,
    pub non_converged: u64,
}

impl ErrorCostEstimate {
    pub(crate) fn from_runs(config: &AlgorithmConfig, runs: &[(bool, RunResult)]) -> Self {
        let failures = runs.iter().filter(|(ok, _)| !ok).count() as u64;
        let n = runs.len() as u64;
        let costs: Vec<f64> = runs.iter().map(|(_, r)| r.comparisons as f64).collect();
        let (mean, sd) = mean_sd(&costs);
        let (lo, hi) = wilson_interval(failures, n);
        ErrorCostEstimate {
            algorithm: config.name().to_string(),
            arity: config.arity(),
            param_name: config.param_name().to_string(),
            param_value: config.param_value(),
            error_rate: if n == 0 {
                f64::NAN
            } else {
                failures as f64 / n as f64
            },
            ci_low: lo,
            ci_high: hi,
            mean_comparisons: mean,
            sd_comparisons: sd,
            runs: n,
            failures,
            non_converged: runs.iter().filter(|(_, r)| !r.converged).count() as u64,
        }
    }
}

/// Error rate versus mean comparisons for each configuration.
///
/// `truth` designates the correct item; by default it is the model's unique
/// best item. Run `r` at sweep point `p` uses the seeds
/// [`run_seeds(seed, p, r)`](run_seeds), so results do not depend on thread
/// scheduling.
pub fn benchmark(
    configs: &[AlgorithmConfig],
    model: &ChoiceModel,
    truth: Option<usize>,
    replications: u64,
    seed: u64,
) -> Result<Vec<ErrorCostEstimate>> {
    if replications < 1 {
        return Err(Error::InvalidConfig(
            "replications must be at least 1".into(),
        ));
    }
    let truth = match truth {
        Some(t) => t,
        None => model.best_item().ok_or(Error::NoUniqueBest)?,
    };
    configs
        .iter()
        .enumerate()
        .map(|(p, cfg)| {
            check_model(cfg, model)?;
            let runs = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let (s, o) = run_seeds(seed, p, r);
                    let res = run_with_oracle(SelectionSession::new(cfg.clone(), s)?, model, o)?;
                    Ok((res.selected == truth, res))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ErrorCostEstimate::from_runs(cfg, &runs))
        })
        .collect()
}
