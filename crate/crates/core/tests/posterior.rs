use bestof_core::data::{numbered_items, parse_dataset, Dataset};
use bestof_core::model::{ChoiceModel, MeritVector};
use bestof_core::posterior::{
    effective_sample_size, mh_sample_bt, posterior_benchmark, sample_saturated_posterior, EssFlag,
    McmcConfig, PosteriorSamples,
};
use bestof_core::rng;
use bestof_core::selection::{AlgorithmConfig, EliminationConfig, TournamentConfig};
use rand_distr::{Distribution, StandardNormal};

const ITEMS: &str = "task,item_id,label,is_known_best\nt,A,,1\nt,B,,0\nt,C,,0\n";

/// A beats B seven times out of ten.
fn seven_three() -> Dataset {
    let mut text = String::from("task,arity,slot_1,slot_2,slot_3,slot_4,winner_slot\n");
    for k in 0..10 {
        text.push_str(if k < 7 {
            "t,2,A,B,,,1\n"
        } else {
            "t,2,B,A,,,1\n"
        });
    }
    let items = "task,item_id,label,is_known_best\nt,A,,1\nt,B,,0\n";
    parse_dataset(&text, items).unwrap()
}

fn mean_var(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (mean, var, m4)
}

#[test]
fn saturated_pair_posterior_is_beta_8_4() {
    let d = seven_three();
    let s = sample_saturated_posterior(&d, "t", &[2], 20_000, 4).unwrap();
    assert_eq!(s.draws.len(), 20_000);
    let p: Vec<f64> = s
        .draws
        .iter()
        .map(|m| match m {
            ChoiceModel::Saturated(sat) => sat.get(&[0, 1]).unwrap()[0],
            _ => unreachable!(),
        })
        .collect();
    let (mean, var, m4) = mean_var(&p);
    let n = p.len() as f64;
    let (a, b) = (8.0, 4.0);
    let true_mean = a / (a + b);
    let true_var = a * b / ((a + b) * (a + b) * (a + b + 1.0));
    assert!(
        (mean - true_mean).abs() < 3.0 * (true_var / n).sqrt(),
        "mean {mean}"
    );
    let var_se = ((m4 - var * var) / n).sqrt();
    assert!(
        (var - true_var).abs() < 3.0 * var_se,
        "variance {var} vs {true_var}"
    );
}

#[test]
fn unobserved_subsets_draw_from_the_prior() {
    let d = parse_dataset(
        "task,arity,slot_1,slot_2,slot_3,slot_4,winner_slot\nt,2,A,B,,,1\n",
        ITEMS,
    )
    .unwrap();
    let s = sample_saturated_posterior(&d, "t", &[2, 3], 4000, 8).unwrap();
    let mut sum = [0.0; 3];
    let mut ab = 0.0;
    for m in &s.draws {
        let ChoiceModel::Saturated(sat) = m else {
            unreachable!()
        };
        for (k, p) in sat.get(&[0, 1, 2]).unwrap().iter().enumerate() {
            sum[k] += p;
        }
        ab += sat.get(&[0, 1]).unwrap()[0];
    }
    let n = s.draws.len() as f64;
    // Flat Dirichlet(1,1,1): mean 1/3, sd sqrt(2/36).
    let se = (2.0f64 / 36.0 / n).sqrt();
    for total in sum {
        assert!((total / n - 1.0 / 3.0).abs() < 3.0 * se);
    }
    // Dirichlet mean identity (count + 1) / (total + |K|) = 2/3.
    let se = (2.0f64 / 36.0 / n).sqrt();
    assert!((ab / n - 2.0 / 3.0).abs() < 3.0 * se);
}

/// Posterior mean of `γ_A / (γ_A + γ_B)` and `P(γ_A > γ_B)` under a uniform
/// prior on the unit square, by midpoint quadrature.
fn quadrature_oracle(wins: i32, losses: i32) -> (f64, f64) {
    let k = 1000;
    let h = 1.0 / k as f64;
    let (mut z, mut num, mut above) = (0.0, 0.0, 0.0);
    for i in 0..k {
        let a = (i as f64 + 0.5) * h;
        for j in 0..k {
            let b = (j as f64 + 0.5) * h;
            let p = a / (a + b);
            let w = p.powi(wins) * (1.0 - p).powi(losses);
            z += w;
            num += w * p;
            if a > b {
                above += w;
            }
        }
    }
    (num / z, above / z)
}

#[test]
fn mh_pair_posterior_matches_quadrature() {
    let d = seven_three();
    let s = mh_sample_bt(&d, "t", &[2], &McmcConfig::default(), 21).unwrap();
    assert_eq!(s.draws.len(), 1000);
    let rate = s.acceptance_rate.unwrap();
    assert!(rate > 0.05 && rate < 0.9, "acceptance {rate}");
    let p: Vec<f64> = s
        .draws
        .iter()
        .map(|m| match m {
            ChoiceModel::BradleyTerry(g) => g.values()[0] / (g.values()[0] + g.values()[1]),
            _ => unreachable!(),
        })
        .collect();
    let (mean, _, _) = mean_var(&p);
    let above = p.iter().filter(|&&x| x > 0.5).count() as f64 / p.len() as f64;
    let (oracle_mean, oracle_above) = quadrature_oracle(7, 3);
    assert!((mean - oracle_mean).abs() < 0.03, "{mean} vs {oracle_mean}");
    assert!(
        (above - oracle_above).abs() < 0.06,
        "{above} vs {oracle_above}"
    );
}

#[test]
fn bookkeeping_and_determinism() {
    let d = seven_three();
    let cfg = McmcConfig::default();
    assert_eq!(cfg.retained(), 1000);
    let a = mh_sample_bt(&d, "t", &[2], &cfg, 5).unwrap();
    let b = mh_sample_bt(&d, "t", &[2], &cfg, 5).unwrap();
    assert_eq!(a, b);
    let cfg = McmcConfig {
        accepted_steps: 2200,
        burn_in: 200,
        thin: 8,
        ..McmcConfig::default()
    };
    assert_eq!(
        mh_sample_bt(&d, "t", &[2], &cfg, 5).unwrap().draws.len(),
        250
    );
}

#[test]
fn empty_scope_samples_the_prior() {
    let d = seven_three();
    let s = mh_sample_bt(&d, "t", &[3], &McmcConfig::default(), 9).unwrap();
    for item in 0..2 {
        let xs: Vec<f64> = s
            .draws
            .iter()
            .map(|m| match m {
                ChoiceModel::BradleyTerry(g) => g.values()[item],
                _ => unreachable!(),
            })
            .collect();
        let (mean, var, _) = mean_var(&xs);
        let ess = effective_sample_size(&xs).ess;
        assert!(
            (mean - 0.5).abs() < 3.0 * (var / ess).sqrt(),
            "mean {mean}, ess {ess}"
        );
    }
}

#[test]
fn ess_reference_cases() {
    let mut r = rng::stream(3);
    let iid: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut r)).collect();
    let e = effective_sample_size(&iid);
    assert!((800.0..=1200.0).contains(&e.ess), "{e:?}");

    let phi: f64 = 0.9;
    let mut x = 0.0;
    let ar: Vec<f64> = (0..10_000)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            x = phi * x + z;
            x
        })
        .collect();
    let e = effective_sample_size(&ar);
    let expected = 10_000.0 * (1.0 - phi) / (1.0 + phi);
    assert_eq!(e.flag, EssFlag::Ok);
    assert!(
        (e.ess - expected).abs() < 0.3 * expected,
        "{} vs {expected}",
        e.ess
    );
}

#[test]
fn sure_winner_draws_never_fail() {
    let g = MeritVector::new(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let samples = PosteriorSamples {
        items: numbered_items(6),
        draws: vec![ChoiceModel::BradleyTerry(g); 50],
        acceptance_rate: None,
        step_size: None,
        proposals: 0,
        ess: vec![],
    };
    let base = EliminationConfig::new(numbered_items(6), 3, 10);
    let cfgs = AlgorithmConfig::Elimination(base)
        .sweep(&[10.0, 20.0, 40.0])
        .unwrap();
    for row in posterior_benchmark(&samples, &cfgs, 2, 1).unwrap() {
        assert_eq!(row.estimate.error_rate, 0.0);
        assert_eq!(row.estimate.runs, 100);
    }
    let t = AlgorithmConfig::Tournament(TournamentConfig::new(numbered_items(6), 4, 0.8));
    let row = &posterior_benchmark(&samples, &[t], 1, 1).unwrap()[0];
    assert_eq!(row.estimate.error_rate, 0.0);
}
