//! Posterior sampling over model parameters, and the posterior-expected
//! error and cost of the selection algorithms.
//!
//! Bradley-Terry merits get a uniform prior on `[0, 1]^m` and are sampled by
//! random-walk Metropolis-Hastings. Saturated multinomials get independent
//! flat Dirichlet priors, so their posterior is sampled exactly.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::data::{Dataset, ItemId, TaskView};
use crate::error::{Error, Result};
use crate::inference::{bt_log_likelihood, renormalize};
use crate::model::{ChoiceModel, MeritVector, SaturatedModel};
use crate::rng;
use crate::selection::{
    check_model, combinations, run_seeds, run_with_oracle, AlgorithmConfig, ErrorCostEstimate,
    SelectionSession,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    /// Accepted proposals in total, burn-in included.
    pub accepted_steps: u64,
    /// Accepted proposals discarded as burn-in. The step size adapts only
    /// during burn-in.
    pub burn_in: u64,
    pub thin: u64,
    pub initial_step: f64,
    /// Acceptance band targeted while adapting.
    pub target_acceptance: (f64, f64),
    /// Give up after this many proposals per accepted step.
    pub proposal_cap_factor: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            accepted_steps: 5000,
            burn_in: 1000,
            thin: 4,
            initial_step: 0.1,
            target_acceptance: (0.25, 0.40),
            proposal_cap_factor: 50,
        }
    }
}

impl McmcConfig {
    /// Number of draws kept: `(accepted_steps − burn_in) / thin`.
    pub fn retained(&self) -> u64 {
        (self.accepted_steps.saturating_sub(self.burn_in)) / self.thin.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidConfig(
                "thinning stride must be at least 1".into(),
            ));
        }
        if self.burn_in >= self.accepted_steps || self.retained() == 0 {
            return Err(Error::InvalidConfig(
                "burn-in leaves no draws to retain".into(),
            ));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidConfig("step size must be positive".into()));
        }
        let (lo, hi) = self.target_acceptance;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::InvalidConfig("bad acceptance band".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EssFlag {
    Ok,
    /// The chain is constant; the length is reported.
    Degenerate,
    /// The estimate exceeded the chain length and was clamped to it.
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssEstimate {
    pub ess: f64,
    pub flag: EssFlag,
}

/// Effective sample size by Geyer's initial positive sequence: sum
/// autocorrelation pairs `ρ_{2k} + ρ_{2k+1}` while they stay positive.
pub fn effective_sample_size(chain: &[f64]) -> EssEstimate {
    let n = chain.len();
    if n < 2 {
        return EssEstimate {
            ess: n as f64,
            flag: EssFlag::Degenerate,
        };
    }
    let mean = chain.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = chain.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centred[..n - lag]
            .iter()
            .zip(&centred[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = autocov(0);
    if c0 <= 0.0 {
        return EssEstimate {
            ess: n as f64,
            flag: EssFlag::Degenerate,
        };
    }
    let mut sum = 0.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        k += 1;
    }
    let tau = 2.0 * sum - 1.0;
    let ess = n as f64 / tau;
    if tau <= 0.0 || ess > n as f64 {
        EssEstimate {
            ess: n as f64,
            flag: EssFlag::Clamped,
        }
    } else {
        EssEstimate {
            ess,
            flag: EssFlag::Ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub items: Vec<ItemId>,
    pub draws: Vec<ChoiceModel>,
    /// Post-burn-in acceptance rate (Metropolis-Hastings only).
    pub acceptance_rate: Option<f64>,
    /// Frozen step size (Metropolis-Hastings only).
    pub step_size: Option<f64>,
    pub proposals: u64,
    /// Per item, on normalized merits (Metropolis-Hastings only).
    pub ess: Vec<EssEstimate>,
}

/// Folds a real number into `[0, 1]` by reflection at both ends.
fn reflect(x: f64) -> f64 {
    let y = x.abs() % 2.0;
    if y > 1.0 {
        2.0 - y
    } else {
        y
    }
}

pub fn mh_sample_bt(
    d: &Dataset,
    task: &str,
    arities: &[usize],
    cfg: &McmcConfig,
    seed: u64,
) -> Result<PosteriorSamples> {
    mh_sample_view(&d.task_view(task, arities)?, cfg, seed)
}

/// Random-walk Metropolis-Hastings on the merit vector. Every coordinate
/// moves at once by a Gaussian step, reflected into the unit cube (a
/// symmetric proposal). The step size is rescaled during burn-in toward
/// the target acceptance band, then frozen. A scope without records
/// samples the prior.
///
/// Burn-in and the run length count accepted proposals. The retained draws
/// are spaced evenly over the post-burn-in chain, repeats from rejections
/// included, so they follow the posterior rather than the jump chain.
pub fn mh_sample_view(view: &TaskView, cfg: &McmcConfig, seed: u64) -> Result<PosteriorSamples> {
    cfg.validate()?;
    const WINDOW: u64 = 50;
    let m = view.m();
    let subsets = view.subset_counts();
    let log_post = |g: &[f64]| -> f64 {
        let ll = bt_log_likelihood(&subsets, g);
        if ll.is_nan() {
            f64::NEG_INFINITY
        } else {
            ll
        }
    };
    let mut rng = rng::stream(seed);
    let mut x = vec![0.5; m];
    let mut lp = log_post(&x);
    let mut step = cfg.initial_step;
    let cap = cfg.proposal_cap_factor * cfg.accepted_steps;

    let mut accepted = 0u64;
    let mut proposals = 0u64;
    let (mut window_props, mut window_acc) = (0u64, 0u64);
    let (mut post_props, mut post_acc) = (0u64, 0u64);
    let mut chain: Vec<Vec<f64>> = Vec::new();
    while accepted < cfg.accepted_steps {
        if proposals >= cap {
            return Err(Error::Sampler(format!(
                "{proposals} proposals yielded only {accepted} acceptances"
            )));
        }
        proposals += 1;
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let z: f64 = StandardNormal.sample(&mut rng);
                reflect(xi + step * z)
            })
            .collect();
        let ly = log_post(&y);
        let accept = ly > f64::NEG_INFINITY && (ly >= lp || rng.random::<f64>().ln() < ly - lp);
        let burning = accepted < cfg.burn_in;
        if accept {
            x = y;
            lp = ly;
            accepted += 1;
        }
        if burning {
            window_props += 1;
            window_acc += accept as u64;
            if window_props == WINDOW {
                let rate = window_acc as f64 / WINDOW as f64;
                if rate < cfg.target_acceptance.0 {
                    step *= 0.7;
                } else if rate > cfg.target_acceptance.1 {
                    step *= 1.3;
                }
                step = step.clamp(1e-5, 2.0);
                window_props = 0;
                window_acc = 0;
            }
        } else {
            post_props += 1;
            post_acc += accept as u64;
            chain.push(x.clone());
        }
    }
    let acceptance_rate = post_acc as f64 / post_props.max(1) as f64;
    if acceptance_rate < 0.01 {
        return Err(Error::Sampler(format!(
            "acceptance rate {acceptance_rate:.4} after adaptation"
        )));
    }

    let retained = cfg.retained() as usize;
    let len = chain.len();
    let picks: Vec<usize> = (0..retained)
        .map(|k| (k + 1) * len / retained - 1)
        .collect();
    let draws = picks
        .iter()
        .map(|&i| MeritVector::new(chain[i].clone()).map(ChoiceModel::BradleyTerry))
        .collect::<Result<Vec<_>>>()?;
    let normalized: Vec<Vec<f64>> = picks
        .iter()
        .map(|&i| {
            let s: f64 = chain[i].iter().sum();
            chain[i].iter().map(|g| g / s).collect()
        })
        .collect();
    let ess = (0..m)
        .map(|j| effective_sample_size(&normalized.iter().map(|g| g[j]).collect::<Vec<_>>()))
        .collect();
    Ok(PosteriorSamples {
        items: view.items.clone(),
        draws,
        acceptance_rate: Some(acceptance_rate),
        step_size: Some(step),
        proposals,
        ess,
    })
}

pub fn sample_saturated_posterior(
    d: &Dataset,
    task: &str,
    arities: &[usize],
    count: usize,
    seed: u64,
) -> Result<PosteriorSamples> {
    sample_saturated_view(&d.task_view(task, arities)?, arities, count, seed)
}

/// Exact draws from independent `Dirichlet(1 + counts)` posteriors, one per
/// subset of each requested arity. Subsets never observed draw from the
/// flat prior.
pub fn sample_saturated_view(
    view: &TaskView,
    arities: &[usize],
    count: usize,
    seed: u64,
) -> Result<PosteriorSamples> {
    if count == 0 {
        return Err(Error::InvalidConfig("draw count must be at least 1".into()));
    }
    let m = view.m();
    let observed: BTreeMap<Vec<usize>, Vec<u64>> = view
        .subset_counts()
        .into_iter()
        .map(|s| (s.members, s.wins))
        .collect();
    let mut keys = Vec::new();
    for &k in arities {
        if k < 2 || k > m {
            return Err(Error::InvalidConfig(format!("arity {k} for {m} items")));
        }
        keys.extend(combinations(m, k));
    }
    let alphas: Vec<Vec<f64>> = keys
        .iter()
        .map(|key| match observed.get(key) {
            Some(w) => w.iter().map(|&c| 1.0 + c as f64).collect(),
            None => vec![1.0; key.len()],
        })
        .collect();
    let mut rng = rng::stream(seed);
    let mut draws = Vec::with_capacity(count);
    for _ in 0..count {
        let mut table = BTreeMap::new();
        for (key, alpha) in keys.iter().zip(&alphas) {
            let g = alpha
                .iter()
                .map(|&a| {
                    Gamma::new(a, 1.0)
                        .map(|dist| dist.sample(&mut rng))
                        .map_err(|e| Error::Sampler(e.to_string()))
                })
                .collect::<Result<Vec<f64>>>()?;
            let total: f64 = g.iter().sum();
            let probs = if total > 0.0 {
                renormalize(g.iter().map(|x| x / total).collect())
            } else {
                vec![1.0 / key.len() as f64; key.len()]
            };
            table.insert(key.clone(), probs);
        }
        draws.push(ChoiceModel::Saturated(SaturatedModel::new(m, table)?));
    }
    Ok(PosteriorSamples {
        items: view.items.clone(),
        draws,
        acceptance_rate: None,
        step_size: None,
        proposals: 0,
        ess: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEstimate {
    /// Pooled over all runs on all draws with a unique best item.
    pub estimate: ErrorCostEstimate,
    pub draws_used: usize,
    /// Draws without a unique best item, skipped.
    pub tied_draws: usize,
    pub reps_per_draw: u64,
}

/// Posterior-expected error rate and cost. Each draw with a unique best
/// item is simulated `reps_per_draw` times against that item as ground
/// truth. Run `r` on draw `d` uses run index `d · reps_per_draw + r`, so a
/// single draw reproduces [`benchmark`](crate::selection::benchmark) on
/// that model.
pub fn posterior_benchmark(
    samples: &PosteriorSamples,
    configs: &[AlgorithmConfig],
    reps_per_draw: u64,
    seed: u64,
) -> Result<Vec<PosteriorEstimate>> {
    if reps_per_draw == 0 {
        return Err(Error::InvalidConfig(
            "reps per draw must be at least 1".into(),
        ));
    }
    if samples.draws.is_empty() {
        return Err(Error::InvalidConfig("no posterior draws".into()));
    }
    let truths: Vec<Option<usize>> = samples.draws.iter().map(ChoiceModel::best_item).collect();
    let used: Vec<(usize, usize)> = truths
        .iter()
        .enumerate()
        .filter_map(|(d, t)| t.map(|t| (d, t)))
        .collect();
    let tied_draws = truths.len() - used.len();
    if used.is_empty() {
        return Err(Error::NoUniqueBest);
    }
    configs
        .iter()
        .enumerate()
        .map(|(p, cfg)| {
            for model in &samples.draws {
                check_model(cfg, model)?;
            }
            let jobs: Vec<(usize, usize, u64)> = used
                .iter()
                .flat_map(|&(d, t)| (0..reps_per_draw).map(move |r| (d, t, r)))
                .collect();
            let runs = jobs
                .into_par_iter()
                .map(|(d, truth, r)| {
                    let (s, o) = run_seeds(seed, p, d as u64 * reps_per_draw + r);
                    let res = run_with_oracle(
                        SelectionSession::new(cfg.clone(), s)?,
                        &samples.draws[d],
                        o,
                    )?;
                    Ok((res.selected == truth, res))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PosteriorEstimate {
                estimate: ErrorCostEstimate::from_runs(cfg, &runs),
                draws_used: used.len(),
                tied_draws,
                reps_per_draw,
            })
        })
        .collect()
}

/// Long-format CSV of the draws: `draw_index,item_id,merit` for merit
/// vectors, `draw_index,subset,member,probability` for saturated models.
pub fn write_samples(samples: &PosteriorSamples) -> String {
    let items = &samples.items;
    let saturated = matches!(samples.draws.first(), Some(ChoiceModel::Saturated(_)));
    let mut out = String::from(if saturated {
        "draw_index,subset,member,probability\n"
    } else {
        "draw_index,item_id,merit\n"
    });
    for (d, model) in samples.draws.iter().enumerate() {
        match model {
            ChoiceModel::BradleyTerry(g) => {
                for (id, v) in items.iter().zip(g.values()) {
                    out.push_str(&format!("{d},{id},{v}\n"));
                }
            }
            ChoiceModel::Saturated(s) => {
                for line in crate::model::write_saturated(items, s).lines().skip(1) {
                    out.push_str(&format!("{d},{line}\n"));
                }
            }
            ChoiceModel::Position(_) => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::numbered_items;
    use crate::selection::{benchmark, EliminationConfig};

    #[test]
    fn reflection_stays_in_the_cube() {
        for x in [-2.5, -1.0, -0.3, 0.0, 0.4, 1.0, 1.2, 2.0, 3.7] {
            let y = reflect(x);
            assert!((0.0..=1.0).contains(&y), "{x} -> {y}");
        }
        assert!((reflect(1.2) - 0.8).abs() < 1e-12);
        assert!((reflect(-0.3) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert_eq!(McmcConfig::default().retained(), 1000);
        assert!(McmcConfig::default().validate().is_ok());
        let bad = McmcConfig {
            burn_in: 5000,
            ..McmcConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = McmcConfig {
            thin: 0,
            ..McmcConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ess_special_cases() {
        let e = effective_sample_size(&[3.0; 100]);
        assert_eq!(e.flag, EssFlag::Degenerate);
        assert_eq!(e.ess, 100.0);
        let alt: Vec<f64> = (0..1000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let e = effective_sample_size(&alt);
        assert_eq!(e.flag, EssFlag::Clamped);
        assert_eq!(e.ess, 1000.0);
    }

    #[test]
    fn single_draw_posterior_benchmark_matches_benchmark() {
        let model = ChoiceModel::BradleyTerry(MeritVector::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap());
        let samples = PosteriorSamples {
            items: numbered_items(4),
            draws: vec![model.clone()],
            acceptance_rate: None,
            step_size: None,
            proposals: 0,
            ess: vec![],
        };
        let cfgs = [AlgorithmConfig::Elimination(EliminationConfig::new(
            numbered_items(4),
            2,
            5,
        ))];
        let a = posterior_benchmark(&samples, &cfgs, 200, 9).unwrap();
        let b = benchmark(&cfgs, &model, None, 200, 9).unwrap();
        assert_eq!(a[0].estimate, b[0]);
        assert_eq!((a[0].draws_used, a[0].tied_draws), (1, 0));
    }

    #[test]
    fn tied_draws_are_skipped() {
        let samples = PosteriorSamples {
            items: numbered_items(3),
            draws: vec![
                ChoiceModel::BradleyTerry(MeritVector::uniform(3)),
                ChoiceModel::BradleyTerry(MeritVector::new(vec![0.5, 0.3, 0.2]).unwrap()),
            ],
            acceptance_rate: None,
            step_size: None,
            proposals: 0,
            ess: vec![],
        };
        let cfgs = [AlgorithmConfig::Elimination(EliminationConfig::new(
            numbered_items(3),
            2,
            3,
        ))];
        let r = posterior_benchmark(&samples, &cfgs, 10, 1).unwrap();
        assert_eq!((r[0].draws_used, r[0].tied_draws), (1, 1));
        assert_eq!(r[0].estimate.runs, 10);
        let only_tied = PosteriorSamples {
            draws: vec![samples.draws[0].clone()],
            ..samples
        };
        assert_eq!(
            posterior_benchmark(&only_tied, &cfgs, 10, 1).unwrap_err(),
            Error::NoUniqueBest
        );
    }
}
