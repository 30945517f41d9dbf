//! Choice models: which presented item does a worker pick?
//!
//! Models are indexed by item position (`0..m`); a presented set is a slice
//! of item indices in presentation order. Sets drawn with replacement (as in
//! tournament selection) may repeat an item: the set then behaves as an
//! n'-way comparison among its distinct items, and each copy of an item gets
//! an equal share of that item's probability.

use std::collections::BTreeMap;

use rand::Rng;

use crate::data::{ComparisonRecord, ComparisonSet, Dataset, ItemEntry, ItemId, TaskView};
use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// Bradley-Terry merits: item `i` beats the rest of a set `K` with
/// probability `γ_i / Σ_{k∈K} γ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeritVector {
    merits: Vec<f64>,
}

impl MeritVector {
    pub fn new(merits: Vec<f64>) -> Result<Self> {
        if merits.is_empty() {
            return Err(Error::InvalidModel("no merits".into()));
        }
        if merits.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidModel(
                "merits must be finite and non-negative".into(),
            ));
        }
        if merits.iter().all(|g| *g == 0.0) {
            return Err(Error::InvalidModel(
                "at least one merit must be positive".into(),
            ));
        }
        Ok(MeritVector { merits })
    }

    pub fn uniform(m: usize) -> Self {
        MeritVector {
            merits: vec![1.0 / m as f64; m],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.merits
    }

    pub fn len(&self) -> usize {
        self.merits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merits.is_empty()
    }

    /// Rescaled so the merits sum to one.
    pub fn normalized(&self) -> MeritVector {
        let total: f64 = self.merits.iter().sum();
        MeritVector {
            merits: self.merits.iter().map(|g| g / total).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<MeritVector> {
        MeritVector::new(self.merits.iter().map(|g| g * factor).collect())
    }

    /// Index of the strictly largest merit, if unique.
    pub fn argmax(&self) -> Option<usize> {
        unique_argmax(&self.merits)
    }
}

/// One multinomial per unordered subset. Keys are sorted item indices and
/// each probability vector is aligned with its key.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturatedModel {
    m: usize,
    table: BTreeMap<Vec<usize>, Vec<f64>>,
}

impl SaturatedModel {
    pub fn new(m: usize, table: BTreeMap<Vec<usize>, Vec<f64>>) -> Result<Self> {
        for (key, probs) in &table {
            if key.len() < 2 || key.windows(2).any(|w| w[0] >= w[1]) || key[key.len() - 1] >= m {
                return Err(Error::InvalidModel(format!("bad subset key {key:?}")));
            }
            check_simplex(probs, key.len())?;
        }
        Ok(SaturatedModel { m, table })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn table(&self) -> &BTreeMap<Vec<usize>, Vec<f64>> {
        &self.table
    }

    pub fn get(&self, subset: &[usize]) -> Option<&[f64]> {
        self.table.get(subset).map(Vec::as_slice)
    }

    /// Mean win probability of each item over the largest-arity subsets
    /// containing it.
    pub fn mean_win_probabilities(&self) -> Vec<f64> {
        let top = self.table.keys().map(Vec::len).max().unwrap_or(0);
        let mut sum = vec![0.0; self.m];
        let mut count = vec![0usize; self.m];
        for (key, probs) in self.table.iter().filter(|(k, _)| k.len() == top) {
            for (&i, &p) in key.iter().zip(probs) {
                sum[i] += p;
                count[i] += 1;
            }
        }
        sum.iter()
            .zip(&count)
            .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }
}

/// "Random clicking": the chosen slot follows a fixed law regardless of
/// which items occupy the slots.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionMultinomial {
    probs: Vec<f64>,
}

impl PositionMultinomial {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs, probs.len())?;
        if probs.len() < 2 {
            return Err(Error::InvalidModel("need at least two slots".into()));
        }
        Ok(PositionMultinomial { probs })
    }

    pub fn arity(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

fn check_simplex(probs: &[f64], len: usize) -> Result<()> {
    if probs.len() != len {
        return Err(Error::InvalidModel(
            "probability vector has the wrong length".into(),
        ));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidModel(
            "probabilities must be non-negative".into(),
        ));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidModel(format!("probabilities sum to {total}")));
    }
    Ok(())
}

fn unique_argmax(values: &[f64]) -> Option<usize> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut it = values.iter().enumerate().filter(|(_, v)| **v == max);
    let first = it.next()?.0;
    it.next().is_none().then_some(first)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChoiceModel {
    BradleyTerry(MeritVector),
    Saturated(SaturatedModel),
    Position(PositionMultinomial),
}

/// Distinct items of a set in first-appearance order, with multiplicities.
fn distinct(slots: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(slots.len());
    for &s in slots {
        match out.iter_mut().find(|(i, _)| *i == s) {
            Some(e) => e.1 += 1,
            None => out.push((s, 1)),
        }
    }
    out
}

impl ChoiceModel {
    /// Number of items, when the model is item-aware.
    pub fn m(&self) -> Option<usize> {
        match self {
            ChoiceModel::BradleyTerry(g) => Some(g.len()),
            ChoiceModel::Saturated(s) => Some(s.m()),
            ChoiceModel::Position(_) => None,
        }
    }

    /// Probability that each slot is selected.
    pub fn win_distribution(&self, slots: &[usize]) -> Result<Vec<f64>> {
        self.distribution(slots, false)
    }

    /// As [`win_distribution`](Self::win_distribution), except that a
    /// Bradley-Terry set whose presented merits are all zero is treated as
    /// the limit of equal vanishing merits (uniform over distinct items).
    /// This is what simulated workers use.
    pub fn oracle_distribution(&self, slots: &[usize]) -> Result<Vec<f64>> {
        self.distribution(slots, true)
    }

    fn distribution(&self, slots: &[usize], lenient: bool) -> Result<Vec<f64>> {
        if slots.is_empty() {
            return Err(Error::OutsideDomain("empty set".into()));
        }
        if let Some(m) = self.m() {
            if let Some(&bad) = slots.iter().find(|&&s| s >= m) {
                return Err(Error::OutsideDomain(format!("item index {bad} >= {m}")));
            }
        }
        match self {
            ChoiceModel::Position(p) => {
                if slots.len() != p.arity() {
                    return Err(Error::OutsideDomain(format!(
                        "{}-slot set for a {}-slot position model",
                        slots.len(),
                        p.arity()
                    )));
                }
                Ok(p.probs.clone())
            }
            ChoiceModel::BradleyTerry(g) => {
                let groups = distinct(slots);
                let total: f64 = groups.iter().map(|&(i, _)| g.merits[i]).sum();
                let item_prob = |i: usize| -> Result<f64> {
                    if total > 0.0 {
                        Ok(g.merits[i] / total)
                    } else if lenient {
                        Ok(1.0 / groups.len() as f64)
                    } else {
                        Err(Error::ZeroMerit)
                    }
                };
                slots
                    .iter()
                    .map(|&s| {
                        let mult = groups.iter().find(|(i, _)| *i == s).unwrap().1;
                        Ok(item_prob(s)? / mult as f64)
                    })
                    .collect()
            }
            ChoiceModel::Saturated(sat) => {
                let groups = distinct(slots);
                if groups.len() == 1 {
                    return Ok(vec![1.0 / slots.len() as f64; slots.len()]);
                }
                let mut key: Vec<usize> = groups.iter().map(|&(i, _)| i).collect();
                key.sort_unstable();
                let probs = sat.get(&key).ok_or_else(|| {
                    Error::OutsideDomain(format!("subset {key:?} not in saturated model"))
                })?;
                Ok(slots
                    .iter()
                    .map(|s| {
                        let mult = groups.iter().find(|(i, _)| i == s).unwrap().1;
                        probs[key.binary_search(s).unwrap()] / mult as f64
                    })
                    .collect())
            }
        }
    }

    /// Draws a winning slot (0-based).
    pub fn sample_winner<R: Rng + ?Sized>(&self, slots: &[usize], rng: &mut R) -> Result<usize> {
        Ok(sample_index(&self.win_distribution(slots)?, rng))
    }

    /// Draws a winning slot using [`oracle_distribution`](Self::oracle_distribution).
    pub fn sample_oracle<R: Rng + ?Sized>(&self, slots: &[usize], rng: &mut R) -> Result<usize> {
        Ok(sample_index(&self.oracle_distribution(slots)?, rng))
    }

    /// The item this model prefers, if it is unique. Bradley-Terry: the
    /// largest merit. Saturated: the largest mean win probability over the
    /// largest-arity subsets. Position models have no preferred item.
    pub fn best_item(&self) -> Option<usize> {
        match self {
            ChoiceModel::BradleyTerry(g) => g.argmax(),
            ChoiceModel::Saturated(s) => unique_argmax(&s.mean_win_probabilities()),
            ChoiceModel::Position(_) => None,
        }
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` above the running total; take the last positive slot.
    probs
        .iter()
        .rposition(|p| *p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Log-likelihood of a set of records. `log_likelihood` is `-inf` exactly
/// when `zero_probability_records > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub log_likelihood: f64,
    pub zero_probability_records: usize,
}

impl Score {
    pub fn is_finite(&self) -> bool {
        self.zero_probability_records == 0
    }
}

pub fn log_likelihood(
    model: &ChoiceModel,
    d: &Dataset,
    task: &str,
    arities: &[usize],
) -> Result<Score> {
    log_likelihood_view(model, &d.task_view(task, arities)?)
}

pub fn log_likelihood_view(model: &ChoiceModel, view: &TaskView) -> Result<Score> {
    let mut ll = 0.0;
    let mut zeros = 0;
    for r in &view.records {
        let p = model.win_distribution(&r.slots)?[r.winner_slot];
        if p > 0.0 {
            ll += p.ln();
        } else {
            zeros += 1;
        }
    }
    Ok(Score {
        log_likelihood: if zeros > 0 { f64::NEG_INFINITY } else { ll },
        zero_probability_records: zeros,
    })
}

fn subset_label(items: &[ItemId], key: &[usize]) -> Vec<ItemId> {
    let mut ids: Vec<ItemId> = key.iter().map(|&i| items[i].clone()).collect();
    ids.sort();
    ids
}

fn join(ids: &[ItemId]) -> String {
    ids.iter().map(ItemId::as_str).collect::<Vec<_>>().join("|")
}

/// `item_id,merit` rows.
pub fn write_merits(items: &[ItemId], merits: &MeritVector) -> String {
    let mut out = String::from("item_id,merit\n");
    for (id, g) in items.iter().zip(merits.values()) {
        out.push_str(&format!("{id},{g}\n"));
    }
    out
}

pub fn read_merits(text: &str) -> Result<(Vec<ItemId>, MeritVector)> {
    let mut lines = text.lines();
    if lines.next() != Some("item_id,merit") {
        return Err(Error::Parse {
            row: 1,
            message: "expected header item_id,merit".into(),
        });
    }
    let mut items = Vec::new();
    let mut merits = Vec::new();
    for (i, line) in lines.enumerate() {
        let fail = |message: String| Error::Parse {
            row: i + 2,
            message,
        };
        let (id, g) = line
            .split_once(',')
            .ok_or_else(|| fail("expected two fields".into()))?;
        items.push(ItemId::new(id).map_err(|e| fail(e.to_string()))?);
        merits.push(g.parse::<f64>().map_err(|e| fail(e.to_string()))?);
    }
    Ok((items, MeritVector::new(merits)?))
}

/// `subset,member,probability` rows; subsets are written as sorted
/// `id1|id2|...`.
pub fn write_saturated(items: &[ItemId], model: &SaturatedModel) -> String {
    let mut rows: Vec<(Vec<ItemId>, ItemId, f64)> = Vec::new();
    for (key, probs) in model.table() {
        let label = subset_label(items, key);
        for (&i, &p) in key.iter().zip(probs) {
            rows.push((label.clone(), items[i].clone(), p));
        }
    }
    rows.sort_by(|a, b| (a.0.len(), &a.0, &a.1).cmp(&(b.0.len(), &b.0, &b.1)));
    let mut out = String::from("subset,member,probability\n");
    for (subset, member, p) in rows {
        out.push_str(&format!("{},{member},{p}\n", join(&subset)));
    }
    out
}

pub fn read_saturated(text: &str, items: &[ItemId]) -> Result<SaturatedModel> {
    let index = |id: &str| items.iter().position(|x| x.as_str() == id);
    let mut lines = text.lines();
    if lines.next() != Some("subset,member,probability") {
        return Err(Error::Parse {
            row: 1,
            message: "expected header subset,member,probability".into(),
        });
    }
    let mut table: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let fail = |message: String| Error::Parse {
            row: i + 2,
            message,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(fail("expected three fields".into()));
        }
        let mut key = f[0]
            .split('|')
            .map(|id| index(id).ok_or_else(|| fail(format!("unknown item {id:?}"))))
            .collect::<Result<Vec<_>>>()?;
        key.sort_unstable();
        let member = index(f[1]).ok_or_else(|| fail(format!("unknown item {:?}", f[1])))?;
        let pos = key
            .binary_search(&member)
            .map_err(|_| fail("member not in subset".into()))?;
        let p: f64 = f[2]
            .parse()
            .map_err(|e: std::num::ParseFloatError| fail(e.to_string()))?;
        let n = key.len();
        table.entry(key).or_insert_with(|| vec![f64::NAN; n])[pos] = p;
    }
    SaturatedModel::new(items.len(), table)
}

/// Synthesizes a single-task dataset. Each record presents `arity` distinct
/// items drawn uniformly in random order; the winner follows `model`. The
/// model's best item, if unique, is marked as known best.
pub fn generate_dataset(
    model: &ChoiceModel,
    task: &str,
    items: &[ItemId],
    counts: &[(usize, usize)],
    seed: u64,
) -> Result<Dataset> {
    if let Some(m) = model.m() {
        if m != items.len() {
            return Err(Error::InvalidModel(format!(
                "model covers {m} items but {} were given",
                items.len()
            )));
        }
    }
    let best = model.best_item();
    let entries = items
        .iter()
        .enumerate()
        .map(|(i, id)| ItemEntry {
            task: task.to_string(),
            id: id.clone(),
            label: None,
            is_known_best: best == Some(i),
        })
        .collect();
    let mut rng = crate::rng::stream(seed);
    let mut records = Vec::new();
    for &(arity, count) in counts {
        if !(crate::data::MIN_ARITY..=crate::data::MAX_ARITY).contains(&arity)
            || arity > items.len()
        {
            return Err(Error::InvalidConfig(format!(
                "arity {arity} for {} items",
                items.len()
            )));
        }
        for _ in 0..count {
            let mut slots: Vec<usize> =
                rand::seq::index::sample(&mut rng, items.len(), arity).into_vec();
            rand::seq::SliceRandom::shuffle(slots.as_mut_slice(), &mut rng);
            let winner = model.sample_oracle(&slots, &mut rng)?;
            let set = ComparisonSet::new(slots.iter().map(|&i| items[i].clone()).collect())?;
            records.push(ComparisonRecord::new(task, set, winner)?);
        }
    }
    Dataset::new(entries, records)
}
