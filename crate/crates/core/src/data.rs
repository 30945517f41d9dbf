//! Comparison logs and item registries.
//!
//! Two CSV files describe a dataset:
//!
//! ```text
//! comparisons.csv   task,arity,slot_1,slot_2,slot_3,slot_4,winner_slot
//! items.csv         task,item_id,label,is_known_best
//! ```
//!
//! Slots keep presentation order and unused slot columns are left empty.
//! `winner_slot` is 1-based in the file; in memory it is a 0-based index
//! into [`ComparisonSet::slots`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_ARITY: usize = 2;
pub const MAX_ARITY: usize = 4;

pub const COMPARISONS_HEADER: [&str; 7] = [
    "task",
    "arity",
    "slot_1",
    "slot_2",
    "slot_3",
    "slot_4",
    "winner_slot",
];
pub const ITEMS_HEADER: [&str; 4] = ["task", "item_id", "label", "is_known_best"];

/// Characters reserved by the file formats (`|` separates subset members).
const RESERVED: &[char] = &[',', '|', '"', '\n', '\r'];

/// Opaque item identifier, unique within a task. Compared byte-wise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ItemId(String);

impl ItemId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.contains(RESERVED) {
            return Err(Error::InvalidItemId(id));
        }
        Ok(ItemId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ItemId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        ItemId::new(s)
    }
}

impl From<ItemId> for String {
    fn from(id: ItemId) -> String {
        id.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Generates ids `"1"`, `"2"`, ..., `"m"`.
pub fn numbered_items(m: usize) -> Vec<ItemId> {
    (1..=m).map(|i| ItemId(i.to_string())).collect()
}

/// The items shown to one worker, in presentation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonSet {
    slots: Vec<ItemId>,
}

impl ComparisonSet {
    /// An observational set: 2 to 4 distinct items.
    pub fn new(slots: Vec<ItemId>) -> Result<Self> {
        check_arity(slots.len())?;
        let distinct: HashSet<&ItemId> = slots.iter().collect();
        if distinct.len() != slots.len() {
            return Err(Error::Domain("duplicate items in a comparison".into()));
        }
        Ok(ComparisonSet { slots })
    }

    pub fn slots(&self) -> &[ItemId] {
        &self.slots
    }

    pub fn arity(&self) -> usize {
        self.slots.len()
    }

    /// Members sorted byte-wise; the key of the unordered subset.
    pub fn sorted_members(&self) -> Vec<ItemId> {
        let mut v = self.slots.clone();
        v.sort();
        v
    }
}

fn check_arity(n: usize) -> Result<()> {
    if (MIN_ARITY..=MAX_ARITY).contains(&n) {
        Ok(())
    } else {
        Err(Error::Domain(format!("unknown arity {n}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonRecord {
    pub task: String,
    pub set: ComparisonSet,
    /// 0-based index into `set.slots()`.
    pub winner_slot: usize,
}

impl ComparisonRecord {
    pub fn new(task: impl Into<String>, set: ComparisonSet, winner_slot: usize) -> Result<Self> {
        let task = task.into();
        check_task(&task)?;
        if winner_slot >= set.arity() {
            return Err(Error::SlotOutOfRange {
                slot: winner_slot + 1,
                arity: set.arity(),
            });
        }
        Ok(ComparisonRecord {
            task,
            set,
            winner_slot,
        })
    }

    pub fn arity(&self) -> usize {
        self.set.arity()
    }

    pub fn winner(&self) -> &ItemId {
        &self.set.slots[self.winner_slot]
    }
}

fn check_task(task: &str) -> Result<()> {
    if task.is_empty() || task.contains(['\n', '\r']) {
        Err(Error::Domain(format!("invalid task name {task:?}")))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemEntry {
    pub task: String,
    pub id: ItemId,
    pub label: Option<String>,
    pub is_known_best: bool,
}

/// A validated comparison log together with its item registry.
///
/// Immutable once built; every record references a registered item and
/// each task has at most one known-best item.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    items: Vec<ItemEntry>,
    records: Vec<ComparisonRecord>,
}

impl Dataset {
    pub fn new(items: Vec<ItemEntry>, records: Vec<ComparisonRecord>) -> Result<Self> {
        let registry = build_registry(&items)?;
        for (i, r) in records.iter().enumerate() {
            check_registered(&registry, r).map_err(|e| Error::Parse {
                row: i + 2,
                message: e.to_string(),
            })?;
        }
        Ok(Dataset { items, records })
    }

    pub fn items(&self) -> &[ItemEntry] {
        &self.items
    }

    pub fn records(&self) -> &[ComparisonRecord] {
        &self.records
    }

    /// Tasks in order of first registration.
    pub fn tasks(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.items
            .iter()
            .filter(|e| seen.insert(e.task.as_str()))
            .map(|e| e.task.as_str())
            .collect()
    }

    pub fn has_task(&self, task: &str) -> bool {
        self.items.iter().any(|e| e.task == task)
    }

    /// Registered items of a task, in registry order.
    pub fn task_items(&self, task: &str) -> Result<Vec<&ItemEntry>> {
        let v: Vec<_> = self.items.iter().filter(|e| e.task == task).collect();
        if v.is_empty() {
            return Err(Error::UnknownTask(task.to_string()));
        }
        Ok(v)
    }

    pub fn known_best(&self, task: &str) -> Option<&ItemId> {
        self.items
            .iter()
            .find(|e| e.task == task && e.is_known_best)
            .map(|e| &e.id)
    }

    fn matching<'a>(
        &'a self,
        task: &'a str,
        arity: usize,
    ) -> impl Iterator<Item = &'a ComparisonRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.task == task && r.arity() == arity)
    }

    /// Index-based view of a task restricted to the given arities.
    pub fn task_view(&self, task: &str, arities: &[usize]) -> Result<TaskView> {
        let entries = self.task_items(task)?;
        let items: Vec<ItemId> = entries.iter().map(|e| e.id.clone()).collect();
        let index: HashMap<&ItemId, usize> =
            items.iter().enumerate().map(|(i, id)| (id, i)).collect();
        let known_best = entries.iter().position(|e| e.is_known_best);
        let records = self
            .records
            .iter()
            .filter(|r| r.task == task && arities.contains(&r.arity()))
            .map(|r| IndexedRecord {
                slots: r.set.slots().iter().map(|id| index[id]).collect(),
                winner_slot: r.winner_slot,
            })
            .collect();
        Ok(TaskView {
            task: task.to_string(),
            items,
            known_best,
            records,
        })
    }
}

fn build_registry(items: &[ItemEntry]) -> Result<HashSet<(&str, &ItemId)>> {
    let mut registry = HashSet::new();
    let mut best_tasks = HashSet::new();
    for (i, e) in items.iter().enumerate() {
        let fail = |message: String| Error::Parse {
            row: i + 2,
            message,
        };
        check_task(&e.task).map_err(|err| fail(err.to_string()))?;
        if matches!(&e.label, Some(l) if l.is_empty()) {
            return Err(fail("empty label must be written as no label".into()));
        }
        if !registry.insert((e.task.as_str(), &e.id)) {
            return Err(fail(format!(
                "duplicate item {:?} in task {:?}",
                e.id.0, e.task
            )));
        }
        if e.is_known_best && !best_tasks.insert(e.task.as_str()) {
            return Err(fail(format!(
                "task {:?} has more than one known-best item",
                e.task
            )));
        }
    }
    Ok(registry)
}

fn check_registered(registry: &HashSet<(&str, &ItemId)>, r: &ComparisonRecord) -> Result<()> {
    for id in r.set.slots() {
        if !registry.contains(&(r.task.as_str(), id)) {
            return Err(Error::UnknownItem {
                task: r.task.clone(),
                item: id.0.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedRecord {
    pub slots: Vec<usize>,
    pub winner_slot: usize,
}

impl IndexedRecord {
    pub fn winner(&self) -> usize {
        self.slots[self.winner_slot]
    }
}

/// Records of one task with items replaced by registry indices.
#[derive(Debug, Clone)]
pub struct TaskView {
    pub task: String,
    pub items: Vec<ItemId>,
    pub known_best: Option<usize>,
    pub records: Vec<IndexedRecord>,
}

impl TaskView {
    pub fn m(&self) -> usize {
        self.items.len()
    }

    /// Groups records by unordered subset.
    pub fn subset_counts(&self) -> Vec<SubsetCounts> {
        let mut map: BTreeMap<Vec<usize>, Vec<u64>> = BTreeMap::new();
        for r in &self.records {
            let mut key = r.slots.clone();
            key.sort_unstable();
            let wins = map.entry(key.clone()).or_insert_with(|| vec![0; key.len()]);
            let pos = key.binary_search(&r.winner()).expect("winner is a member");
            wins[pos] += 1;
        }
        map.into_iter()
            .map(|(members, wins)| SubsetCounts {
                total: wins.iter().sum(),
                members,
                wins,
            })
            .collect()
    }

    /// Union-find components of the graph linking items compared together.
    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.m()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for r in &self.records {
            for w in r.slots.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        (0..self.m()).filter(|&x| find(&mut parent, x) == x).count()
    }
}

/// Win counts for one unordered subset, members sorted by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetCounts {
    pub members: Vec<usize>,
    pub wins: Vec<u64>,
    pub total: u64,
}

/// Per-subset win counts for one task and arity.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WinTally {
    pub subsets: BTreeMap<Vec<ItemId>, Vec<u64>>,
}

impl WinTally {
    pub fn total(&self) -> u64 {
        self.subsets.values().flatten().sum()
    }

    pub fn wins(&self, subset: &[ItemId], item: &ItemId) -> Option<u64> {
        let mut key = subset.to_vec();
        key.sort();
        let pos = key.binary_search(item).ok()?;
        self.subsets.get(&key).map(|w| w[pos])
    }
}

pub fn tally(d: &Dataset, task: &str, arity: usize) -> Result<WinTally> {
    d.task_items(task)?;
    let mut t = WinTally::default();
    for r in d.matching(task, arity) {
        let key = r.set.sorted_members();
        let pos = key.binary_search(r.winner()).expect("winner is a member");
        let n = key.len();
        t.subsets.entry(key).or_insert_with(|| vec![0; n])[pos] += 1;
    }
    Ok(t)
}

/// Winner-slot counts for one task and arity.
pub fn position_counts(d: &Dataset, task: &str, arity: usize) -> Result<Vec<u64>> {
    d.task_items(task)?;
    let mut counts = vec![0; arity];
    for r in d.matching(task, arity) {
        counts[r.winner_slot] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Deserialize, Serialize)]
struct ComparisonRow {
    task: String,
    arity: String,
    slot_1: String,
    slot_2: String,
    slot_3: String,
    slot_4: String,
    winner_slot: String,
}

#[derive(Debug, Deserialize, Serialize)]
struct ItemRow {
    task: String,
    item_id: String,
    label: String,
    is_known_best: String,
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| Error::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            row: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    Ok(())
}

fn row_of(e: &csv::Error) -> usize {
    e.position().map(|p| p.line() as usize).unwrap_or(0)
}

pub fn parse_items(text: &str) -> Result<Vec<ItemEntry>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &ITEMS_HEADER)?;
    let mut items = Vec::new();
    for (i, row) in rdr.deserialize::<ItemRow>().enumerate() {
        let line = i + 2;
        let fail = |message: String| Error::Parse { row: line, message };
        let row = row.map_err(|e| Error::Parse {
            row: row_of(&e).max(line),
            message: e.to_string(),
        })?;
        let id = ItemId::new(row.item_id).map_err(|e| fail(e.to_string()))?;
        let is_known_best = match row.is_known_best.as_str() {
            "0" => false,
            "1" => true,
            other => return Err(fail(format!("is_known_best must be 0 or 1, got {other:?}"))),
        };
        items.push(ItemEntry {
            task: row.task,
            id,
            label: (!row.label.is_empty()).then_some(row.label),
            is_known_best,
        });
    }
    build_registry(&items)?;
    Ok(items)
}

pub fn parse_comparisons(text: &str) -> Result<Vec<ComparisonRecord>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &COMPARISONS_HEADER)?;
    let mut records = Vec::new();
    for (i, row) in rdr.deserialize::<ComparisonRow>().enumerate() {
        let line = i + 2;
        let fail = |message: String| Error::Parse { row: line, message };
        let row = row.map_err(|e| Error::Parse {
            row: row_of(&e).max(line),
            message: e.to_string(),
        })?;
        let arity: usize = row
            .arity
            .parse()
            .map_err(|_| fail(format!("arity {:?} is not an integer", row.arity)))?;
        if !(MIN_ARITY..=MAX_ARITY).contains(&arity) {
            return Err(fail(format!("unknown arity {arity}")));
        }
        let cells = [&row.slot_1, &row.slot_2, &row.slot_3, &row.slot_4];
        if let Some(k) = cells[..arity].iter().position(|c| c.is_empty()) {
            return Err(fail(format!("slot_{} is empty for arity {arity}", k + 1)));
        }
        if let Some(k) = cells[arity..].iter().position(|c| !c.is_empty()) {
            return Err(fail(format!(
                "slot_{} must be empty for arity {arity}",
                arity + k + 1
            )));
        }
        let slots = cells[..arity]
            .iter()
            .map(|c| ItemId::new(c.as_str()))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| fail(e.to_string()))?;
        let winner: usize = row.winner_slot.parse().map_err(|_| {
            fail(format!(
                "winner_slot {:?} is not an integer",
                row.winner_slot
            ))
        })?;
        if winner == 0 {
            return Err(fail("winner slot must be at least 1".into()));
        }
        if winner > arity {
            return Err(fail(format!(
                "winner slot exceeds arity ({winner} > {arity})"
            )));
        }
        let set = ComparisonSet::new(slots).map_err(|e| fail(e.to_string()))?;
        let record =
            ComparisonRecord::new(row.task, set, winner - 1).map_err(|e| fail(e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

/// Parses and validates a comparison log against its item registry.
pub fn parse_dataset(comparisons: &str, items: &str) -> Result<Dataset> {
    Dataset::new(parse_items(items)?, parse_comparisons(comparisons)?)
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer");
    String::from_utf8(bytes).expect("input was UTF-8")
}

pub fn serialize_comparisons(records: &[ComparisonRecord]) -> String {
    let mut w = writer();
    w.write_record(COMPARISONS_HEADER)
        .expect("in-memory writer");
    for r in records {
        let mut cells: Vec<&str> = r.set.slots().iter().map(ItemId::as_str).collect();
        cells.resize(MAX_ARITY, "");
        let arity = r.arity().to_string();
        let winner = (r.winner_slot + 1).to_string();
        let mut row = vec![r.task.as_str(), arity.as_str()];
        row.extend(cells);
        row.push(winner.as_str());
        w.write_record(&row).expect("in-memory writer");
    }
    finish(w)
}

pub fn serialize_items(items: &[ItemEntry]) -> String {
    let mut w = writer();
    w.write_record(ITEMS_HEADER).expect("in-memory writer");
    for e in items {
        w.write_record([
            e.task.as_str(),
            e.id.as_str(),
            e.label.as_deref().unwrap_or(""),
            if e.is_known_best { "1" } else { "0" },
        ])
        .expect("in-memory writer");
    }
    finish(w)
}

/// Returns `(comparisons.csv, items.csv)` text.
pub fn serialize_dataset(d: &Dataset) -> (String, String) {
    (serialize_comparisons(&d.records), serialize_items(&d.items))
}
