use std::fmt;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use bestof_core::data::{numbered_items, parse_dataset, serialize_dataset, Dataset, ItemId};
use bestof_core::guarantees::{compute_delta, verify_bound};
use bestof_core::inference::{
    fit_bradley_terry, fit_position_multinomial, fit_saturated, format_paper_tables,
    hypothesis_suite, BtOptions, FitResult,
};
use bestof_core::model::{generate_dataset, read_merits, write_merits, write_saturated};
use bestof_core::posterior::{
    mh_sample_bt, posterior_benchmark, sample_saturated_posterior, write_samples, McmcConfig,
};
use bestof_core::report::{to_csv, CsvRow};
use bestof_core::rng::derive_seed;
use bestof_core::selection::{
    benchmark, AlgorithmConfig, CondorcetConfig, EliminationConfig, TournamentConfig,
};
use bestof_core::{ChoiceModel, MeritVector};

use crate::args::{
    Algorithm, AlgorithmArgs, BoundArgs, DataArgs, FitArgs, FitModel, GenArgs, ModelSource,
    PosteriorArgs, PosteriorModel, SimulateArgs, TestArgs,
};

/// A malformed invocation, reported with exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_rows<R: CsvRow>(out: Option<&Path>, rows: &[R]) -> Result<()> {
    emit(out, &to_csv(rows))
}

/// The given seed, or one drawn from the clock. Echoed either way.
fn seed(given: Option<u64>) -> u64 {
    let s = given.unwrap_or_else(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0)
    });
    eprintln!("seed={s}");
    s
}

fn load(data: &DataArgs) -> Result<Dataset> {
    let comparisons = read(&data.input)?;
    let items = read(&data.items)?;
    parse_dataset(&comparisons, &items).with_context(|| {
        format!(
            "parsing {} with {}",
            data.input.display(),
            data.items.display()
        )
    })
}

fn load_model(src: &ModelSource) -> Result<(Vec<ItemId>, ChoiceModel)> {
    let (items, merits) = match (&src.merits, &src.merits_file) {
        (Some(g), _) => (numbered_items(g.len()), MeritVector::new(g.clone())?),
        (None, Some(path)) => {
            read_merits(&read(path)?).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, None) => return Err(usage("give --merits or --merits-file")),
    };
    if items.len() < 2 {
        return Err(usage("a model needs at least two items"));
    }
    Ok((items, ChoiceModel::BradleyTerry(merits)))
}

fn present_arities(d: &Dataset, task: &str) -> Vec<usize> {
    let mut a: Vec<usize> = d
        .records()
        .iter()
        .filter(|r| r.task == task)
        .map(|r| r.arity())
        .collect();
    a.sort_unstable();
    a.dedup();
    a
}

fn algorithm_configs(a: &AlgorithmArgs, items: Vec<ItemId>) -> Result<Vec<AlgorithmConfig>> {
    let first = *a.sweep.values.first().ok_or_else(|| usage("empty sweep"))?;
    let base = match a.algorithm {
        Algorithm::Tournament => {
            let mut c = TournamentConfig::new(items, a.arity, first);
            if let Some(p) = a.pool_size {
                c.pool_size = p;
            }
            if let Some(r) = a.max_rounds {
                c.max_rounds = r;
            }
            AlgorithmConfig::Tournament(c)
        }
        Algorithm::Elimination => {
            AlgorithmConfig::Elimination(EliminationConfig::new(items, a.arity, 1))
        }
        Algorithm::Condorcet => AlgorithmConfig::Condorcet(CondorcetConfig::new(items, a.arity, 1)),
    };
    if a.sweep.name != base.param_name() {
        return Err(usage(format!(
            "{} sweeps parameter {}, not {}",
            base.name(),
            base.param_name(),
            a.sweep.name
        )));
    }
    Ok(base.sweep(&a.sweep.values)?)
}

fn describe(fit: &FitResult, arities: &[usize]) -> String {
    let arities: Vec<String> = arities.iter().map(|a| a.to_string()).collect();
    let mut s = format!(
        "arities={} records={} log_likelihood={} dimension={} iterations={} converged={}",
        arities.join(","),
        fit.n_records,
        fit.log_likelihood,
        fit.dimension,
        fit.iterations,
        fit.converged
    );
    if !fit.boundary.is_empty() {
        let ids: Vec<&str> = fit
            .boundary
            .iter()
            .map(|&i| fit.items[i].as_str())
            .collect();
        s.push_str(&format!(" boundary={}", ids.join("|")));
    }
    s
}

pub fn fit(a: FitArgs) -> Result<()> {
    let d = load(&a.data)?;
    let arities = if a.arity.is_empty() {
        present_arities(&d, &a.task)
    } else {
        a.arity.clone()
    };
    if a.model != FitModel::Bt && arities.len() != 1 {
        return Err(usage(
            "saturated and position fits need exactly one --arity",
        ));
    }
    let (fit, text) = match a.model {
        FitModel::Bt => {
            let opts = BtOptions {
                pseudo_count: a.pseudo_count,
                ..BtOptions::default()
            };
            let fit = fit_bradley_terry(&d, &a.task, &arities, &opts)?;
            let merits = fit.merits().expect("Bradley-Terry fit").normalized();
            let text = write_merits(&fit.items, &merits);
            (fit, text)
        }
        FitModel::Saturated => {
            let fit = fit_saturated(&d, &a.task, arities[0])?;
            let ChoiceModel::Saturated(s) = &fit.model else {
                unreachable!()
            };
            let text = write_saturated(&fit.items, s);
            (fit, text)
        }
        FitModel::Position => {
            let fit = fit_position_multinomial(&d, &a.task, arities[0])?;
            let ChoiceModel::Position(p) = &fit.model else {
                unreachable!()
            };
            let mut text = String::from("slot,probability\n");
            for (i, q) in p.probs().iter().enumerate() {
                text.push_str(&format!("{},{q}\n", i + 1));
            }
            (fit, text)
        }
    };
    eprintln!("{}", describe(&fit, &arities));
    emit(a.out.as_deref(), &text)
}

pub fn test(a: TestArgs) -> Result<()> {
    let d = load(&a.data)?;
    let tasks: Vec<String> = match &a.task {
        Some(t) => vec![t.clone()],
        None => d.tasks().into_iter().map(String::from).collect(),
    };
    let mut rows = Vec::new();
    for t in &tasks {
        rows.extend(hypothesis_suite(&d, t).with_context(|| format!("task {t}"))?);
    }
    if a.paper_table {
        print!("{}", format_paper_tables(&rows));
        if let Some(p) = &a.out {
            write(p, &to_csv(&rows))?;
        }
        Ok(())
    } else {
        emit_rows(a.out.as_deref(), &rows)
    }
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let (items, model) = load_model(&a.model)?;
    let truth = match &a.truth {
        Some(id) => Some(
            items
                .iter()
                .position(|x| x.as_str() == id)
                .ok_or_else(|| usage(format!("unknown --truth item {id:?}")))?,
        ),
        None => None,
    };
    let configs = algorithm_configs(&a.algorithm, items)?;
    let s = seed(a.algorithm.seed);
    let rows = benchmark(&configs, &model, truth, a.reps, s)?;
    emit_rows(a.algorithm.out.as_deref(), &rows)
}

pub fn posterior(a: PosteriorArgs) -> Result<()> {
    let d = load(&a.data)?;
    let n = a.algorithm.arity;
    let s = seed(a.algorithm.seed);
    let cfg = McmcConfig {
        accepted_steps: a.steps,
        burn_in: a.burn_in,
        thin: a.thin,
        initial_step: a.step_size,
        ..McmcConfig::default()
    };
    let samples = match a.model {
        PosteriorModel::Bt => {
            let scope = if a.scope.is_empty() {
                vec![n]
            } else {
                a.scope.clone()
            };
            let samples = mh_sample_bt(&d, &a.task, &scope, &cfg, s)?;
            let ess: Vec<String> = samples
                .ess
                .iter()
                .map(|e| format!("{:.1}", e.ess))
                .collect();
            eprintln!(
                "acceptance_rate={:.4} step_size={:.5} proposals={} min_ess={}",
                samples.acceptance_rate.unwrap_or(f64::NAN),
                samples.step_size.unwrap_or(f64::NAN),
                samples.proposals,
                ess.join("|")
            );
            samples
        }
        PosteriorModel::Saturated => {
            let scope = if a.scope.is_empty() {
                (2..=n).collect()
            } else {
                a.scope.clone()
            };
            let count = a.draws.unwrap_or(cfg.retained() as usize);
            sample_saturated_posterior(&d, &a.task, &scope, count, s)?
        }
    };
    if let Some(p) = &a.samples_out {
        write(p, &write_samples(&samples))?;
    }
    let configs = algorithm_configs(&a.algorithm, samples.items.clone())?;
    let rows = posterior_benchmark(&samples, &configs, a.reps_per_draw, derive_seed(s, &[1]))?;
    emit_rows(a.algorithm.out.as_deref(), &rows)
}

pub fn bound(a: BoundArgs) -> Result<()> {
    let (_, model) = load_model(&a.model)?;
    if a.sweep.name != "T" {
        return Err(usage(format!("bound sweeps T, not {}", a.sweep.name)));
    }
    let thresholds = a
        .sweep
        .values
        .iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(usage(format!("T must be a positive integer, got {v}")))
            }
        })
        .collect::<Result<Vec<u32>>>()?;
    let delta = compute_delta(&model, a.arity)?;
    let w = delta.witness();
    let set: Vec<String> = w.set.iter().map(|i| (i + 1).to_string()).collect();
    eprintln!(
        "delta={} rival={} set={} shared={} exact={}",
        delta.delta,
        w.rival + 1,
        set.join("|"),
        w.shared,
        delta.exact
    );
    let s = seed(a.seed);
    let rows = verify_bound(&model, a.arity, &thresholds, a.reps, s)?;
    for r in rows.iter().filter(|r| !r.holds()) {
        eprintln!(
            "warning: T={} empirical upper band {} exceeds bound {}",
            r.t, r.ci_high, r.bound
        );
    }
    emit_rows(a.out.as_deref(), &rows)
}

pub fn gen(a: GenArgs) -> Result<()> {
    let (items, model) = load_model(&a.model)?;
    if a.counts.is_empty() {
        return Err(usage("give --counts, e.g. 2=100,3=100"));
    }
    let s = seed(a.seed);
    let fresh = generate_dataset(&model, &a.task, &items, &a.counts, s)?;
    let comparisons = a.out_dir.join("comparisons.csv");
    let registry = a.out_dir.join("items.csv");
    let d = if a.append && comparisons.exists() {
        let old = parse_dataset(&read(&comparisons)?, &read(&registry)?)
            .with_context(|| format!("parsing {}", comparisons.display()))?;
        let mut entries = old.items().to_vec();
        entries.extend_from_slice(fresh.items());
        let mut records = old.records().to_vec();
        records.extend_from_slice(fresh.records());
        Dataset::new(entries, records)?
    } else {
        fresh
    };
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let (c, i) = serialize_dataset(&d);
    write(&comparisons, &c)?;
    write(&registry, &i)
}
