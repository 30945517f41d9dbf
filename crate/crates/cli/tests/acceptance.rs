//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p bestof-cli --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use bestof_core::data::{numbered_items, parse_dataset};
use bestof_core::guarantees::{compute_delta, elimination_error_bound, verify_bound};
use bestof_core::inference::{fit_bradley_terry, BtOptions};
use bestof_core::model::{generate_dataset, ChoiceModel, MeritVector};
use bestof_core::posterior::{
    mh_sample_bt, posterior_benchmark, sample_saturated_posterior, McmcConfig, PosteriorSamples,
};
use bestof_core::rng;
use bestof_core::selection::{
    benchmark, binomial, run_with_oracle, AlgorithmConfig, CondorcetConfig, EliminationConfig,
    ErrorCostEstimate, SelectionSession, TournamentConfig,
};
use bestof_core::special::chi_square_sf;
use rand::Rng;

/// Tolerance for p-values the tables print to three decimals.
const P_TOL_3DP: f64 = 0.005;
/// Tolerance for p-values the tables print to two decimals.
const P_TOL_2DP: f64 = 0.01;
/// Rows printed as 0.00 must fall below this.
const P_ZERO: f64 = 0.005;
const COST_LAW_RUNS: usize = 10_000;
const BOUND_REPS: u64 = 10_000;
const ORDERING_REPS: u64 = 2000;
const MERIT_RECOVERY_TOL: f64 = 0.03;
const PAIRWISE_TOL: f64 = 1e-10;
/// Relative rounding slack allowed between successive MM log-likelihoods.
const MONOTONE_SLACK: f64 = 1e-9;
const POSTERIOR_MEAN_TOL: f64 = 0.03;
const SE_MULTIPLE: f64 = 3.0;

type Outcome = Result<String, String>;
type CostLaw = Box<dyn Fn(u64, Option<u32>) -> bool>;
type Criterion = (&'static str, fn() -> Outcome);

fn bt(g: &[f64]) -> ChoiceModel {
    ChoiceModel::BradleyTerry(MeritVector::new(g.to_vec()).unwrap())
}

fn check(ok: bool, what: String, failures: &mut Vec<String>) {
    if !ok {
        failures.push(what);
    }
}

fn finish(summary: String, failures: Vec<String>) -> Outcome {
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(failures.join("; "))
    }
}

fn p_values() -> Outcome {
    // (deviance, df, printed p, tolerance)
    let printed = [
        (2.7, 10, 0.987, P_TOL_3DP),
        (36.1, 35, 0.417, P_TOL_3DP),
        (34.6, 40, 0.711, P_TOL_3DP),
        (48.9, 35, 0.060, P_TOL_3DP),
        (53.1, 35, 0.026, P_TOL_3DP),
        (10.8, 10, 0.373, P_TOL_3DP),
        (39.8, 40, 0.477, P_TOL_3DP),
        (4.9, 10, 0.901, P_TOL_3DP),
        (32.3, 35, 0.597, P_TOL_3DP),
        (39.5, 40, 0.493, P_TOL_3DP),
        (4.2, 10, 0.937, P_TOL_3DP),
        (38.5, 40, 0.537, P_TOL_3DP),
        (1.7, 4, 0.79, P_TOL_2DP),
        (11.7, 4, 0.02, P_TOL_2DP),
        (10.2, 4, 0.04, P_TOL_2DP),
        (2.6, 2, 0.28, P_TOL_2DP),
        (15.8, 10, 0.11, P_TOL_2DP),
    ];
    let zero_rows = [
        (65.1, 4),
        (64.2, 3),
        (110.0, 2),
        (35.3, 3),
        (14.6, 2),
        (13.6, 3),
        (17.8, 3),
        (28.3, 2),
        (29.2, 10),
        (45.8, 10),
        (25.8, 10),
    ];
    let mut failures = Vec::new();
    for (d, df, p, tol) in printed {
        let ours = chi_square_sf(d, df).map_err(|e| e.to_string())?;
        check(
            (ours - p).abs() <= tol,
            format!("D={d} df={df}: {ours:.4} vs {p}"),
            &mut failures,
        );
    }
    for (d, df) in zero_rows {
        let ours = chi_square_sf(d, df).map_err(|e| e.to_string())?;
        check(
            ours < P_ZERO,
            format!("D={d} df={df}: {ours:.2e} not below {P_ZERO}"),
            &mut failures,
        );
    }
    finish(
        format!(
            "{} printed rows and {} zero rows reproduced",
            printed.len(),
            zero_rows.len()
        ),
        failures,
    )
}

fn cost_laws() -> Outcome {
    let mut r = rng::stream(20_240_601);
    let mut failures = Vec::new();
    let mut counts = [0usize; 3];
    for run in 0..COST_LAW_RUNS {
        let m = r.random_range(2..=8usize);
        let n = r.random_range(2..=m.min(4));
        let mut g: Vec<f64> = (0..m).map(|_| r.random::<f64>()).collect();
        g[r.random_range(0..m)] += 0.01;
        let model = bt(&g);
        let items = numbered_items(m);
        let seed: u64 = r.random();
        let kind = run % 3;
        counts[kind] += 1;
        let (cfg, law): (AlgorithmConfig, CostLaw) = match kind {
            0 => {
                let k = r.random_range(1..=3u32);
                let expected = k as u64 * binomial(m as u64, n as u64);
                (
                    AlgorithmConfig::Condorcet(CondorcetConfig::new(items, n, k)),
                    Box::new(move |c, _| c == expected),
                )
            }
            1 => {
                let t = r.random_range(1..=30u32);
                let cfg = EliminationConfig::new(items, n, t);
                let ceiling = cfg.cost_ceiling();
                (
                    AlgorithmConfig::Elimination(cfg),
                    Box::new(move |c, _| (c as f64) < ceiling),
                )
            }
            _ => {
                let f = r.random_range(0.4..0.95);
                let cfg = TournamentConfig::new(items, n, f);
                let p = cfg.pool_size as u64;
                (
                    AlgorithmConfig::Tournament(cfg),
                    Box::new(move |c, rounds| Some(c) == rounds.map(|x| x as u64 * p)),
                )
            }
        };
        let res = SelectionSession::new(cfg.clone(), seed)
            .and_then(|s| run_with_oracle(s, &model, seed.wrapping_add(1)))
            .map_err(|e| e.to_string())?;
        if !law(res.comparisons, res.rounds) {
            check(
                false,
                format!(
                    "{} m={m} n={n}: {} comparisons",
                    cfg.name(),
                    res.comparisons
                ),
                &mut failures,
            );
        }
    }
    finish(
        format!(
            "{COST_LAW_RUNS} runs (condorcet {}, elimination {}, tournament {}) obey their cost laws",
            counts[0], counts[1], counts[2]
        ),
        failures,
    )
}

/// Independent enumerator of the discriminating margin over bitmask subsets.
fn brute_force_delta(g: &[f64], n: usize) -> f64 {
    let m = g.len();
    let best = (0..m).max_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap();
    let p = |i: usize, set: &[usize]| g[i] / set.iter().map(|&k| g[k]).sum::<f64>();
    let mut delta = f64::INFINITY;
    for j in (0..m).filter(|&j| j != best) {
        for mask in 0usize..1 << m {
            let set: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            let (hb, hj) = (mask >> best & 1 == 1, mask >> j & 1 == 1);
            if set.len() == n - 1 && !hb && !hj {
                let a: Vec<usize> = set.iter().copied().chain([best]).collect();
                let b: Vec<usize> = set.iter().copied().chain([j]).collect();
                let (pb, pj) = (p(best, &a), p(j, &b));
                let only_j = pb * (1.0 - pj);
                let only_b = (1.0 - pb) * pj;
                delta = delta.min((only_j - only_b) / (1.0 - pb * pj));
            } else if set.len() == n && hb && hj {
                delta = delta.min(p(best, &set) - p(j, &set));
            }
        }
    }
    delta
}

fn proposition_bound() -> Outcome {
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for g in [vec![0.4, 0.2, 0.15, 0.1, 0.1, 0.05], vec![0.7, 0.3]] {
        let model = bt(&g);
        let rows = verify_bound(&model, 2, &[20, 40, 80, 200], BOUND_REPS, 99)
            .map_err(|e| e.to_string())?;
        for r in &rows {
            check(
                r.holds(),
                format!(
                    "m={} T={}: upper band {:.5} > bound {:.5}",
                    r.m, r.t, r.ci_high, r.bound
                ),
                &mut failures,
            );
            let expected = elimination_error_bound(r.m, r.t, r.delta).bound;
            check(
                r.bound == expected,
                format!("bound arithmetic at T={}", r.t),
                &mut failures,
            );
        }
        lines.push(format!(
            "m={} delta={:.4} bounds [{}]",
            g.len(),
            rows[0].delta,
            rows.iter()
                .map(|r| format!("{:.4}", r.bound))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    let mut r = rng::stream(5);
    let mut compared = 0;
    for _ in 0..300 {
        let m = r.random_range(2..=5usize);
        let n = r.random_range(2..=m.min(4));
        let mut g: Vec<f64> = (0..m).map(|_| r.random_range(0.05..1.0)).collect();
        g[0] = g.iter().copied().fold(0.0, f64::max) + 0.05;
        let ours = compute_delta(&bt(&g), n).map_err(|e| e.to_string())?.delta;
        let oracle = brute_force_delta(&g, n);
        compared += 1;
        check(
            (ours - oracle).abs() < 1e-12,
            format!("delta {ours} vs brute force {oracle}"),
            &mut failures,
        );
    }
    lines.push(format!(
        "delta equals brute force on {compared} models with m<=5"
    ));
    finish(lines.join("; "), failures)
}

fn disjoint(a: &ErrorCostEstimate, b: &ErrorCostEstimate) -> bool {
    a.ci_high < b.ci_low || b.ci_high < a.ci_low
}

fn arity_ordering() -> Outcome {
    let model = bt(&[0.3, 0.2, 0.15, 0.15, 0.1, 0.1]);
    let items = numbered_items(6);
    let elim = |n: usize, ts: &[u32]| -> Result<Vec<ErrorCostEstimate>, String> {
        let cfgs: Vec<AlgorithmConfig> = ts
            .iter()
            .map(|&t| AlgorithmConfig::Elimination(EliminationConfig::new(items.clone(), n, t)))
            .collect();
        benchmark(&cfgs, &model, None, ORDERING_REPS, 42).map_err(|e| e.to_string())
    };
    let mut failures = Vec::new();
    let mut lines = Vec::new();

    let four = elim(4, &[40, 80])?;
    let two_ts: Vec<u32> = (1..=40).collect();
    let two = elim(2, &two_ts)?;
    for f in &four {
        // The 2-way method gets at least the 4-way method's budget.
        let Some(t) = two
            .iter()
            .find(|t| t.mean_comparisons >= f.mean_comparisons)
        else {
            return Err("no 2-way threshold matches the budget".into());
        };
        let ok = f.error_rate < t.error_rate && disjoint(f, t);
        check(
            ok,
            format!(
                "4-way {:.3} [{:.3},{:.3}] vs 2-way {:.3} [{:.3},{:.3}]",
                f.error_rate, f.ci_low, f.ci_high, t.error_rate, t.ci_low, t.ci_high
            ),
            &mut failures,
        );
        lines.push(format!(
            "4-way {:.3}@{:.0} < 2-way {:.3}@{:.0}",
            f.error_rate, f.mean_comparisons, t.error_rate, t.mean_comparisons
        ));
    }

    let ks = [4u32, 6, 8];
    let cond: Vec<AlgorithmConfig> = ks
        .iter()
        .map(|&k| AlgorithmConfig::Condorcet(CondorcetConfig::new(items.clone(), 2, k)))
        .collect();
    let cond = benchmark(&cond, &model, None, ORDERING_REPS, 43).map_err(|e| e.to_string())?;
    for c in &cond {
        // The largest elimination threshold within Condorcet's budget.
        let Some(e) = two
            .iter()
            .rev()
            .find(|e| e.mean_comparisons <= c.mean_comparisons)
        else {
            return Err("no elimination threshold fits the budget".into());
        };
        check(
            e.error_rate <= c.error_rate,
            format!(
                "elimination {:.3} > condorcet {:.3}",
                e.error_rate, c.error_rate
            ),
            &mut failures,
        );
        lines.push(format!(
            "elim {:.3}@{:.0} <= condorcet {:.3}@{:.0}",
            e.error_rate, e.mean_comparisons, c.error_rate, c.mean_comparisons
        ));
    }
    finish(lines.join("; "), failures)
}

fn fitting() -> Outcome {
    let mut failures = Vec::new();
    let items = "task,item_id,label,is_known_best\nt,A,,0\nt,B,,0\n";
    for (a, b) in [(1, 1), (7, 3), (75, 25), (13, 190)] {
        let mut text = String::from("task,arity,slot_1,slot_2,slot_3,slot_4,winner_slot\n");
        for k in 0..a + b {
            text.push_str(if k < a {
                "t,2,A,B,,,1\n"
            } else {
                "t,2,B,A,,,1\n"
            });
        }
        let d = parse_dataset(&text, items).map_err(|e| e.to_string())?;
        let fit =
            fit_bradley_terry(&d, "t", &[2], &BtOptions::default()).map_err(|e| e.to_string())?;
        let g = fit.merits().unwrap().values()[0];
        let closed = a as f64 / (a + b) as f64;
        check(
            (g - closed).abs() < PAIRWISE_TOL,
            format!("{a}-{b}: {g} vs {closed}"),
            &mut failures,
        );
    }

    let truth = [0.3, 0.2, 0.15, 0.15, 0.1, 0.1];
    let d = generate_dataset(
        &bt(&truth),
        "syn",
        &numbered_items(6),
        &[(2, 5000), (3, 5000), (4, 5000)],
        8,
    )
    .map_err(|e| e.to_string())?;
    let opts = BtOptions {
        record_trace: true,
        ..BtOptions::default()
    };
    let fit = fit_bradley_terry(&d, "syn", &[2, 3, 4], &opts).map_err(|e| e.to_string())?;
    let err = fit
        .merits()
        .unwrap()
        .values()
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check(
        err < MERIT_RECOVERY_TOL,
        format!("L-inf error {err:.4}"),
        &mut failures,
    );
    let worst = fit
        .trace
        .windows(2)
        .map(|w| (w[0] - w[1]) / w[0].abs().max(1.0))
        .fold(0.0, f64::max);
    check(
        worst <= MONOTONE_SLACK,
        format!("MM step decreased the likelihood by {worst:.2e}"),
        &mut failures,
    );
    finish(
        format!(
            "pairwise MLE exact; L-inf error {err:.4}; {} monotone MM iterations (largest relative dip {worst:.1e})",
            fit.trace.len()
        ),
        failures,
    )
}

fn posterior() -> Outcome {
    let mut failures = Vec::new();
    let mut text = String::from("task,arity,slot_1,slot_2,slot_3,slot_4,winner_slot\n");
    for k in 0..10 {
        text.push_str(if k < 7 {
            "t,2,A,B,,,1\n"
        } else {
            "t,2,B,A,,,1\n"
        });
    }
    let d = parse_dataset(&text, "task,item_id,label,is_known_best\nt,A,,1\nt,B,,0\n")
        .map_err(|e| e.to_string())?;

    let count = 20_000;
    let sat = sample_saturated_posterior(&d, "t", &[2], count, 12).map_err(|e| e.to_string())?;
    let p: Vec<f64> = sat
        .draws
        .iter()
        .map(|m| match m {
            ChoiceModel::Saturated(s) => s.get(&[0, 1]).unwrap()[0],
            _ => unreachable!(),
        })
        .collect();
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    let var = p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = p.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let beta_mean = 8.0 / 12.0;
    let beta_var = 32.0 / (144.0 * 13.0);
    check(
        (mean - beta_mean).abs() < SE_MULTIPLE * (beta_var / n).sqrt(),
        format!("Beta(8,4) mean {mean:.4}"),
        &mut failures,
    );
    check(
        (var - beta_var).abs() < SE_MULTIPLE * ((m4 - var * var) / n).sqrt(),
        format!("Beta(8,4) variance {var:.5}"),
        &mut failures,
    );

    let cfg = McmcConfig::default();
    let mh = mh_sample_bt(&d, "t", &[2], &cfg, 31).map_err(|e| e.to_string())?;
    check(
        mh.draws.len() == 1000,
        format!("{} retained draws", mh.draws.len()),
        &mut failures,
    );
    let share: Vec<f64> = mh
        .draws
        .iter()
        .map(|m| match m {
            ChoiceModel::BradleyTerry(g) => g.values()[0] / (g.values()[0] + g.values()[1]),
            _ => unreachable!(),
        })
        .collect();
    let mh_mean = share.iter().sum::<f64>() / share.len() as f64;
    let k = 1000;
    let h = 1.0 / k as f64;
    let (mut z, mut num) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let (a, b) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let q = a / (a + b);
            let w = q.powi(7) * (1.0 - q).powi(3);
            z += w;
            num += w * q;
        }
    }
    let oracle = num / z;
    check(
        (mh_mean - oracle).abs() < POSTERIOR_MEAN_TOL,
        format!("MH mean {mh_mean:.4} vs quadrature {oracle:.4}"),
        &mut failures,
    );

    let model = bt(&[0.35, 0.25, 0.2, 0.1, 0.1]);
    let point = PosteriorSamples {
        items: numbered_items(5),
        draws: vec![model.clone()],
        acceptance_rate: None,
        step_size: None,
        proposals: 0,
        ess: vec![],
    };
    let cfgs = AlgorithmConfig::Elimination(EliminationConfig::new(numbered_items(5), 3, 5))
        .sweep(&[5.0, 10.0, 20.0])
        .map_err(|e| e.to_string())?;
    let a = posterior_benchmark(&point, &cfgs, 500, 77).map_err(|e| e.to_string())?;
    let b = benchmark(&cfgs, &model, None, 500, 77).map_err(|e| e.to_string())?;
    let same = a.iter().zip(&b).all(|(x, y)| &x.estimate == y);
    check(
        same,
        "point-mass posterior benchmark differs from benchmark".into(),
        &mut failures,
    );
    finish(
        format!(
            "Beta(8,4) mean {mean:.4} var {var:.5}; MH mean {mh_mean:.4} vs {oracle:.4}; 1000 retained; point mass matches"
        ),
        failures,
    )
}

fn bestof(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_bestof"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "bestof {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn pipeline(dir: &Path) -> Result<(), String> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let merits = "0.3,0.2,0.15,0.15,0.1,0.1";
    bestof(&[
        "gen",
        "--merits",
        merits,
        "--task",
        "demo",
        "--counts",
        "2=150,3=150,4=150",
        "--seed",
        "3",
        "--out-dir",
        &p("data"),
    ])?;
    let input = p("data/comparisons.csv");
    let items = p("data/items.csv");
    bestof(&[
        "fit",
        "--input",
        &input,
        "--items",
        &items,
        "--task",
        "demo",
        "--out",
        &p("merits.csv"),
    ])?;
    bestof(&[
        "test",
        "--input",
        &input,
        "--items",
        &items,
        "--out",
        &p("suite.csv"),
    ])?;
    for (alg, sweep) in [
        ("tournament", "f=0.5:0.9:0.2"),
        ("elimination", "T=5:15:5"),
        ("condorcet", "k=1:3:1"),
    ] {
        bestof(&[
            "simulate",
            "--algorithm",
            alg,
            "--arity",
            "3",
            "--merits",
            merits,
            "--sweep",
            sweep,
            "--reps",
            "300",
            "--seed",
            "11",
            "--out",
            &p(&format!("{alg}.csv")),
        ])?;
    }
    bestof(&[
        "posterior",
        "--input",
        &input,
        "--items",
        &items,
        "--task",
        "demo",
        "--algorithm",
        "elimination",
        "--arity",
        "3",
        "--sweep",
        "T=5,10",
        "--seed",
        "5",
        "--out",
        &p("post_bt.csv"),
        "--samples-out",
        &p("draws_bt.csv"),
    ])?;
    bestof(&[
        "posterior",
        "--input",
        &input,
        "--items",
        &items,
        "--task",
        "demo",
        "--model",
        "saturated",
        "--algorithm",
        "tournament",
        "--arity",
        "3",
        "--sweep",
        "f=0.7",
        "--draws",
        "200",
        "--seed",
        "5",
        "--out",
        &p("post_sat.csv"),
        "--samples-out",
        &p("draws_sat.csv"),
    ])?;
    bestof(&[
        "bound",
        "--merits",
        merits,
        "--arity",
        "2",
        "--sweep",
        "T=20,40",
        "--reps",
        "500",
        "--seed",
        "8",
        "--out",
        &p("bound.csv"),
    ])?;
    Ok(())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    pipeline(a.path())?;
    pipeline(b.path())?;
    let files = [
        "data/comparisons.csv",
        "data/items.csv",
        "merits.csv",
        "suite.csv",
        "tournament.csv",
        "elimination.csv",
        "condorcet.csv",
        "post_bt.csv",
        "draws_bt.csv",
        "post_sat.csv",
        "draws_sat.csv",
        "bound.csv",
    ];
    let mut failures = Vec::new();
    for f in files {
        let x = std::fs::read(a.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        check(
            x == y && !x.is_empty(),
            format!("{f} differs"),
            &mut failures,
        );
    }
    finish(
        format!("{} output files identical across reruns", files.len()),
        failures,
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("1 p-value reproduction", p_values),
        ("2 cost laws", cost_laws),
        ("3 error bound", proposition_bound),
        ("4 arity and method ordering", arity_ordering),
        ("5 fitting correctness", fitting),
        ("6 posterior correctness", posterior),
        ("7 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {name} ({secs:.1}s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
