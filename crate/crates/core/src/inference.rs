//! Maximum-likelihood fits and likelihood-ratio tests.
//!
//! Three model families are fitted per task and arity:
//!
//! - Bradley-Terry merits (`m − 1` free parameters), by
//!   minorization-maximization;
//! - the saturated model, one multinomial per observed unordered subset
//!   (`Σ (|K| − 1)` parameters);
//! - the position multinomial over presentation slots (`n − 1` parameters).
//!
//! [`hypothesis_suite`] compares them with deviance tests. Note that the
//! position model is not nested in Bradley-Terry, so the chi-square
//! reference distribution for that test is a heuristic.

use std::collections::BTreeMap;

use crate::data::{Dataset, ItemId, TaskView, MAX_ARITY, MIN_ARITY};
use crate::error::{Error, Result};
use crate::model::{ChoiceModel, MeritVector, PositionMultinomial, SaturatedModel};
use crate::special::chi_square_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    BradleyTerry,
    Saturated,
    Position,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub kind: ModelKind,
    pub model: ChoiceModel,
    pub items: Vec<ItemId>,
    pub log_likelihood: f64,
    /// Number of free parameters.
    pub dimension: usize,
    pub n_records: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Items whose fitted merit sits on the boundary (never won).
    pub boundary: Vec<usize>,
    /// Log-likelihood after each MM iteration, when requested.
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn summary(&self) -> FitSummary {
        FitSummary {
            log_likelihood: self.log_likelihood,
            dimension: self.dimension,
        }
    }

    pub fn merits(&self) -> Option<&MeritVector> {
        match &self.model {
            ChoiceModel::BradleyTerry(g) => Some(g),
            _ => None,
        }
    }
}

/// What a likelihood-ratio test needs from a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSummary {
    pub log_likelihood: f64,
    pub dimension: usize,
}

impl std::iter::Sum for FitSummary {
    fn sum<I: Iterator<Item = FitSummary>>(iter: I) -> Self {
        iter.fold(
            FitSummary {
                log_likelihood: 0.0,
                dimension: 0,
            },
            |a, b| FitSummary {
                log_likelihood: a.log_likelihood + b.log_likelihood,
                dimension: a.dimension + b.dimension,
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtOptions {
    pub max_iterations: usize,
    /// Stop when the largest relative merit change falls below this.
    pub tolerance: f64,
    /// Added to every item's win count.
    pub pseudo_count: f64,
    pub record_trace: bool,
}

impl Default for BtOptions {
    fn default() -> Self {
        BtOptions {
            max_iterations: 10_000,
            tolerance: 1e-10,
            pseudo_count: 0.0,
            record_trace: false,
        }
    }
}

fn check_scope(view: &TaskView) -> Result<()> {
    if view.records.is_empty() {
        return Err(Error::EmptyScope);
    }
    let mut seen = vec![false; view.m()];
    for r in &view.records {
        for &s in &r.slots {
            seen[s] = true;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::ItemNotCompared(view.items[i].to_string()));
    }
    Ok(())
}

/// Bradley-Terry log-likelihood from grouped counts.
pub(crate) fn bt_log_likelihood(subsets: &[crate::data::SubsetCounts], merits: &[f64]) -> f64 {
    subsets
        .iter()
        .map(|s| {
            let total: f64 = s.members.iter().map(|&i| merits[i]).sum();
            s.members
                .iter()
                .zip(&s.wins)
                .filter(|(_, &w)| w > 0)
                .map(|(&i, &w)| w as f64 * (merits[i] / total).ln())
                .sum::<f64>()
        })
        .sum()
}

pub fn fit_bradley_terry(
    d: &Dataset,
    task: &str,
    arities: &[usize],
    opts: &BtOptions,
) -> Result<FitResult> {
    fit_bradley_terry_view(&d.task_view(task, arities)?, opts)
}

/// Minorization-maximization for the multi-way Bradley-Terry likelihood:
///
/// `γ_i ← W_i / Σ_{K ∋ i} N_K / Σ_{k∈K} γ_k`
///
/// where `W_i` counts wins of `i` and `N_K` comparisons of subset `K`. Each
/// step cannot decrease the likelihood. Merits are kept normalized to sum
/// to one.
pub fn fit_bradley_terry_view(view: &TaskView, opts: &BtOptions) -> Result<FitResult> {
    check_scope(view)?;
    let components = view.components();
    if components > 1 {
        return Err(Error::Disconnected { components });
    }
    let m = view.m();
    let subsets = view.subset_counts();
    let mut wins = vec![opts.pseudo_count; m];
    for s in &subsets {
        for (&i, &w) in s.members.iter().zip(&s.wins) {
            wins[i] += w as f64;
        }
    }

    let mut merits = vec![1.0 / m as f64; m];
    let mut ll = bt_log_likelihood(&subsets, &merits);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut denom = vec![0.0; m];
    while iterations < opts.max_iterations {
        iterations += 1;
        denom.iter_mut().for_each(|x| *x = 0.0);
        for s in &subsets {
            let total: f64 = s.members.iter().map(|&i| merits[i]).sum();
            for &i in &s.members {
                denom[i] += s.total as f64 / total;
            }
        }
        let mut next: Vec<f64> = wins.iter().zip(&denom).map(|(w, d)| w / d).collect();
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|g| *g /= sum);

        let change = merits
            .iter()
            .zip(&next)
            .filter(|(old, _)| **old > 0.0)
            .map(|(old, new)| ((new - old) / old).abs())
            .fold(0.0, f64::max);
        merits = next;
        let new_ll = bt_log_likelihood(&subsets, &merits);
        debug_assert!(
            opts.pseudo_count > 0.0 || new_ll >= ll - 1e-9 * ll.abs().max(1.0),
            "MM step decreased the log-likelihood: {ll} -> {new_ll}"
        );
        ll = new_ll;
        if opts.record_trace {
            trace.push(ll);
        }
        if change < opts.tolerance {
            converged = true;
            break;
        }
    }
    let boundary = (0..m).filter(|&i| merits[i] == 0.0).collect();
    Ok(FitResult {
        kind: ModelKind::BradleyTerry,
        model: ChoiceModel::BradleyTerry(MeritVector::new(merits)?),
        items: view.items.clone(),
        log_likelihood: ll,
        dimension: m - 1,
        n_records: view.records.len(),
        iterations,
        converged,
        boundary,
        trace,
    })
}

fn xlogx_ratio(count: u64, total: u64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * (count as f64 / total as f64).ln()
    }
}

pub fn fit_saturated(d: &Dataset, task: &str, arity: usize) -> Result<FitResult> {
    fit_saturated_view(&d.task_view(task, &[arity])?)
}

/// Per observed subset, the empirical win frequencies.
pub fn fit_saturated_view(view: &TaskView) -> Result<FitResult> {
    if view.records.is_empty() {
        return Err(Error::EmptyScope);
    }
    let subsets = view.subset_counts();
    let mut table = BTreeMap::new();
    let mut ll = 0.0;
    let mut dimension = 0;
    for s in &subsets {
        let probs: Vec<f64> = s.wins.iter().map(|&w| w as f64 / s.total as f64).collect();
        ll += s.wins.iter().map(|&w| xlogx_ratio(w, s.total)).sum::<f64>();
        dimension += s.members.len() - 1;
        table.insert(s.members.clone(), renormalize(probs));
    }
    Ok(FitResult {
        kind: ModelKind::Saturated,
        model: ChoiceModel::Saturated(SaturatedModel::new(view.m(), table)?),
        items: view.items.clone(),
        log_likelihood: ll,
        dimension,
        n_records: view.records.len(),
        iterations: 0,
        converged: true,
        boundary: Vec::new(),
        trace: Vec::new(),
    })
}

/// Division leaves sums a few ulps off one; push the residue into the
/// largest entry.
pub(crate) fn renormalize(mut probs: Vec<f64>) -> Vec<f64> {
    let total: f64 = probs.iter().sum();
    if let Some(max) = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
    {
        probs[max] += 1.0 - total;
    }
    probs
}

pub fn fit_position_multinomial(d: &Dataset, task: &str, arity: usize) -> Result<FitResult> {
    fit_position_view(&d.task_view(task, &[arity])?, arity)
}

/// Empirical winner-slot frequencies.
pub fn fit_position_view(view: &TaskView, arity: usize) -> Result<FitResult> {
    if view.records.is_empty() {
        return Err(Error::EmptyScope);
    }
    let mut counts = vec![0u64; arity];
    for r in &view.records {
        if r.slots.len() != arity {
            return Err(Error::OutsideDomain(format!(
                "{}-way record in a {arity}-way position fit",
                r.slots.len()
            )));
        }
        counts[r.winner_slot] += 1;
    }
    let n: u64 = counts.iter().sum();
    let probs = renormalize(counts.iter().map(|&c| c as f64 / n as f64).collect());
    Ok(FitResult {
        kind: ModelKind::Position,
        model: ChoiceModel::Position(PositionMultinomial::new(probs)?),
        items: view.items.clone(),
        log_likelihood: counts.iter().map(|&c| xlogx_ratio(c, n)).sum(),
        dimension: arity - 1,
        n_records: view.records.len(),
        iterations: 0,
        converged: true,
        boundary: Vec::new(),
        trace: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub task: String,
    /// `BT_vs_MN`, `SAT_vs_BT` or `JOINT_vs_BT`.
    pub test: String,
    /// `None` for the joint test across arities.
    pub arity: Option<usize>,
    pub n: usize,
    pub deviance: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Deviance `D = −2(L_simple − L_complex)`, referred to chi-square with
/// `dim(complex) − dim(simple)` degrees of freedom.
pub fn likelihood_ratio_test(
    simple: FitSummary,
    complex: FitSummary,
    n: usize,
) -> Result<TestResult> {
    if complex.dimension <= simple.dimension {
        return Err(Error::InvalidTest(format!(
            "complex model dimension {} must exceed simple model dimension {}",
            complex.dimension, simple.dimension
        )));
    }
    if !simple.log_likelihood.is_finite() || !complex.log_likelihood.is_finite() {
        return Err(Error::InvalidTest("log-likelihoods must be finite".into()));
    }
    let raw = -2.0 * (simple.log_likelihood - complex.log_likelihood);
    if raw < -1e-6 {
        return Err(Error::InvalidTest(format!(
            "negative deviance {raw}: the complex fit is worse than the simple one"
        )));
    }
    let deviance = raw.max(0.0);
    let df = complex.dimension - simple.dimension;
    Ok(TestResult {
        task: String::new(),
        test: String::new(),
        arity: None,
        n,
        deviance,
        df,
        p_value: chi_square_sf(deviance, df as u32)?,
    })
}

/// Per present arity: position multinomial against Bradley-Terry and
/// Bradley-Terry against saturated. Across arities: one pooled
/// Bradley-Terry model against independent per-arity models.
pub fn hypothesis_suite(d: &Dataset, task: &str) -> Result<Vec<TestResult>> {
    let opts = BtOptions::default();
    let mut rows = Vec::new();
    let mut per_arity_bt = Vec::new();
    let mut present = Vec::new();
    for arity in MIN_ARITY..=MAX_ARITY {
        let view = d.task_view(task, &[arity])?;
        if view.records.is_empty() {
            continue;
        }
        present.push(arity);
        let bt = fit_bradley_terry_view(&view, &opts)?;
        let mn = fit_position_view(&view, arity)?;
        let sat = fit_saturated_view(&view)?;
        let n = view.records.len();
        for (name, simple, complex) in [
            ("BT_vs_MN", mn.summary(), bt.summary()),
            ("SAT_vs_BT", bt.summary(), sat.summary()),
        ] {
            let mut t = likelihood_ratio_test(simple, complex, n)?;
            t.task = task.to_string();
            t.test = name.to_string();
            t.arity = Some(arity);
            rows.push(t);
        }
        per_arity_bt.push(bt.summary());
    }
    if present.len() >= 2 {
        let pooled = fit_bradley_terry(d, task, &present, &opts)?;
        let separate: FitSummary = per_arity_bt.into_iter().sum();
        let mut t = likelihood_ratio_test(pooled.summary(), separate, pooled.n_records)?;
        t.task = task.to_string();
        t.test = "JOINT_vs_BT".to_string();
        rows.push(t);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Competing {
    pub known_best: usize,
    pub known_best_merit: f64,
    pub competing: usize,
    pub competing_merit: f64,
}

/// The runner-up when the known best item leads, otherwise the leader. In
/// both cases this is the largest-merit item other than the known best.
pub fn competing_item(fit: &FitResult, known_best: &ItemId) -> Result<Competing> {
    let merits = fit
        .merits()
        .ok_or_else(|| Error::InvalidModel("competing item needs a Bradley-Terry fit".into()))?
        .normalized();
    let best = fit
        .items
        .iter()
        .position(|id| id == known_best)
        .ok_or_else(|| Error::UnknownItem {
            task: String::new(),
            item: known_best.to_string(),
        })?;
    let g = merits.values();
    let competing = (0..g.len())
        .filter(|&i| i != best)
        .fold(None, |acc: Option<usize>, i| match acc {
            Some(j) if g[j] >= g[i] => Some(j),
            _ => Some(i),
        })
        .ok_or_else(|| Error::InvalidModel("need at least two items".into()))?;
    Ok(Competing {
        known_best: best,
        known_best_merit: g[best],
        competing,
        competing_merit: g[competing],
    })
}

/// Renders suite rows as fixed-width text: one line per
/// task and arity with both per-arity tests, then the joint tests.
pub fn format_paper_tables(rows: &[TestResult]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<20} {:>5} | {:>7} {:>6} | {:>7} {:>6}\n",
        "task", "N", "BTvMN D", "p", "SATvBT D", "p"
    ));
    let mut keys: Vec<(&str, usize)> = Vec::new();
    for r in rows {
        if let Some(a) = r.arity {
            if !keys.contains(&(r.task.as_str(), a)) {
                keys.push((r.task.as_str(), a));
            }
        }
    }
    for (task, arity) in keys {
        let find = |name: &str| {
            rows.iter()
                .find(|r| r.task == task && r.arity == Some(arity) && r.test == name)
        };
        let (Some(mn), Some(sat)) = (find("BT_vs_MN"), find("SAT_vs_BT")) else {
            continue;
        };
        out.push_str(&format!(
            "{:<20} {:>5} | {:>7.1} {:>6.2} | {:>8.1} {:>6.3}\n",
            format!("{task} {arity}-way"),
            mn.n,
            mn.deviance,
            mn.p_value,
            sat.deviance,
            sat.p_value
        ));
    }
    let joint: Vec<&TestResult> = rows.iter().filter(|r| r.test == "JOINT_vs_BT").collect();
    if !joint.is_empty() {
        out.push('\n');
        out.push_str(&format!(
            "{:<20} {:>5} | {:>7} {:>6}\n",
            "task", "N", "JOINT D", "p"
        ));
        for r in joint {
            out.push_str(&format!(
                "{:<20} {:>5} | {:>7.1} {:>6.2}\n",
                r.task, r.n, r.deviance, r.p_value
            ));
        }
    }
    out
}
