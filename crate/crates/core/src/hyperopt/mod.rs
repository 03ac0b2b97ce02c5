//! Hyperparameter search over reservoir and readout settings.

mod evaluate;

pub use evaluate::{
    evaluate_config, evaluate_detailed, objective_value, score_features, Evaluation, GRAM_RANK_TOL,
};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::ReadoutSettings;
use crate::reservoir::ReservoirConfig;

/// Default number of trials per search.
pub const DEFAULT_BUDGET: usize = 200;

/// A real-valued search dimension: a fixed value or a closed interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dim {
    Fixed(f64),
    Range([f64; 2]),
}

impl Dim {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            Dim::Fixed(v) => (v, v),
            Dim::Range([lo, hi]) => (lo, hi),
        }
    }

    fn check(&self, name: &str, lo: f64, hi: f64) -> Result<()> {
        let (a, b) = self.bounds();
        if !(a.is_finite() && b.is_finite() && a <= b && a >= lo && b <= hi) {
            return Err(Error::Config(format!(
                "search dimension {name} = [{a}, {b}] must be ordered inside [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

/// An integer search dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntDim {
    Fixed(usize),
    Range([usize; 2]),
}

impl IntDim {
    fn bounds(&self) -> (usize, usize) {
        match *self {
            IntDim::Fixed(v) => (v, v),
            IntDim::Range([lo, hi]) => (lo, hi),
        }
    }
}

/// Search ranges; `None` outcome sets mean every outcome index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpace {
    pub a_in: Dim,
    #[serde(rename = "a_fb_D")]
    pub a_fb_d: Dim,
    pub a_fb_4: Dim,
    #[serde(rename = "a_fb_B")]
    pub a_fb_b: Dim,
    pub mu_prime: Option<Vec<usize>>,
    pub mu_dprime: Option<Vec<usize>>,
    pub mu_tprime: Option<Vec<usize>>,
    /// Ridge strength, sampled log-uniformly.
    pub alpha: Dim,
    pub washout: IntDim,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            a_in: Dim::Range([-PI, PI]),
            a_fb_d: Dim::Range([-PI, PI]),
            a_fb_4: Dim::Range([-PI, PI]),
            a_fb_b: Dim::Fixed(0.0),
            mu_prime: None,
            mu_dprime: None,
            mu_tprime: Some(vec![0]),
            alpha: Dim::Range([1e-25, 1e-1]),
            washout: IntDim::Range([3, 50]),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self, outcomes: usize) -> Result<()> {
        self.a_in.check("a_in", -PI, PI)?;
        self.a_fb_d.check("a_fb_D", -PI, PI)?;
        self.a_fb_4.check("a_fb_4", -PI, PI)?;
        self.a_fb_b.check("a_fb_B", -PI, PI)?;
        self.alpha.check("alpha", f64::MIN_POSITIVE, f64::INFINITY)?;
        let (lo, hi) = self.washout.bounds();
        if lo > hi {
            return Err(Error::Config(format!("washout range [{lo}, {hi}] is empty")));
        }
        for (name, set) in [
            ("mu_prime", &self.mu_prime),
            ("mu_dprime", &self.mu_dprime),
            ("mu_tprime", &self.mu_tprime),
        ] {
            if let Some(set) = set {
                if set.is_empty() {
                    return Err(Error::Config(format!("{name} choice set is empty")));
                }
                if let Some(bad) = set.iter().find(|&&m| m >= outcomes) {
                    return Err(Error::Config(format!(
                        "{name}: outcome index {bad} >= {outcomes}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn choices(set: &Option<Vec<usize>>, outcomes: usize) -> Vec<usize> {
        set.clone().unwrap_or_else(|| (0..outcomes).collect())
    }

    /// Whether `p` lies inside the space.
    pub fn contains(&self, p: &Params, outcomes: usize) -> bool {
        let inside = |d: &Dim, v: f64| {
            let (lo, hi) = d.bounds();
            v >= lo && v <= hi
        };
        let (wlo, whi) = self.washout.bounds();
        inside(&self.a_in, p.a_in)
            && inside(&self.a_fb_d, p.a_fb_d)
            && inside(&self.a_fb_4, p.a_fb_4)
            && inside(&self.a_fb_b, p.a_fb_b)
            && inside(&self.alpha, p.alpha)
            && (wlo..=whi).contains(&p.washout)
            && Self::choices(&self.mu_prime, outcomes).contains(&p.mu_prime)
            && Self::choices(&self.mu_dprime, outcomes).contains(&p.mu_dprime)
            && Self::choices(&self.mu_tprime, outcomes).contains(&p.mu_tprime)
    }
}

/// One point of the search space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub a_in: f64,
    #[serde(rename = "a_fb_D")]
    pub a_fb_d: f64,
    pub a_fb_4: f64,
    #[serde(rename = "a_fb_B")]
    pub a_fb_b: f64,
    pub mu_prime: usize,
    pub mu_dprime: usize,
    pub mu_tprime: usize,
    pub alpha: f64,
    pub washout: usize,
}

impl Params {
    /// Copy of `base` carrying these reservoir hyperparameters.
    pub fn apply(&self, base: &ReservoirConfig) -> ReservoirConfig {
        ReservoirConfig {
            a_in: self.a_in,
            a_fb_d: self.a_fb_d,
            a_fb_4: self.a_fb_4,
            a_fb_b: self.a_fb_b,
            mu_prime: self.mu_prime,
            mu_dprime: self.mu_dprime,
            mu_tprime: self.mu_tprime,
            ..base.clone()
        }
    }

    pub fn readout(&self, standardize: bool) -> ReadoutSettings {
        ReadoutSettings {
            alpha: self.alpha,
            washout: self.washout,
            standardize,
        }
    }

    /// The hyperparameters already present in a configuration.
    pub fn from_config(config: &ReservoirConfig, readout: &ReadoutSettings) -> Self {
        Self {
            a_in: config.a_in,
            a_fb_d: config.a_fb_d,
            a_fb_4: config.a_fb_4,
            a_fb_b: config.a_fb_b,
            mu_prime: config.mu_prime,
            mu_dprime: config.mu_dprime,
            mu_tprime: config.mu_tprime,
            alpha: readout.alpha,
            washout: readout.washout,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    Failed,
}

/// One evaluated point. Failed trials carry no objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: Params,
    pub objective: Option<f64>,
    pub seed: u64,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Proposal strategy. Proposals inside one batch see the same history.
pub trait Sampler: Sync {
    fn name(&self) -> &'static str;

    /// Number of trials proposed before the history is refreshed.
    fn batch_size(&self, budget: usize) -> usize;

    fn propose(
        &self,
        space: &SearchSpace,
        outcomes: usize,
        history: &[Trial],
        rng: &mut ChaCha8Rng,
    ) -> Params;
}

fn sample_dim(d: &Dim, rng: &mut ChaCha8Rng) -> f64 {
    match *d {
        Dim::Fixed(v) => v,
        Dim::Range([lo, hi]) if lo == hi => lo,
        Dim::Range([lo, hi]) => rng.random_range(lo..=hi),
    }
}

fn sample_log_dim(d: &Dim, rng: &mut ChaCha8Rng) -> f64 {
    match *d {
        Dim::Fixed(v) => v,
        Dim::Range([lo, hi]) if lo == hi => lo,
        Dim::Range([lo, hi]) => 10f64.powf(rng.random_range(lo.log10()..=hi.log10())),
    }
}

fn sample_int(d: &IntDim, rng: &mut ChaCha8Rng) -> usize {
    let (lo, hi) = d.bounds();
    rng.random_range(lo..=hi)
}

fn sample_choice(set: &[usize], rng: &mut ChaCha8Rng) -> usize {
    set[rng.random_range(0..set.len())]
}

/// Independent uniform draws (log-uniform for the ridge strength).
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomSampler;

impl Sampler for RandomSampler {
    fn name(&self) -> &'static str {
        "random"
    }

    fn batch_size(&self, budget: usize) -> usize {
        budget.max(1)
    }

    fn propose(
        &self,
        space: &SearchSpace,
        outcomes: usize,
        _history: &[Trial],
        rng: &mut ChaCha8Rng,
    ) -> Params {
        Params {
            a_in: sample_dim(&space.a_in, rng),
            a_fb_d: sample_dim(&space.a_fb_d, rng),
            a_fb_4: sample_dim(&space.a_fb_4, rng),
            a_fb_b: sample_dim(&space.a_fb_b, rng),
            mu_prime: sample_choice(&SearchSpace::choices(&space.mu_prime, outcomes), rng),
            mu_dprime: sample_choice(&SearchSpace::choices(&space.mu_dprime, outcomes), rng),
            mu_tprime: sample_choice(&SearchSpace::choices(&space.mu_tprime, outcomes), rng),
            alpha: sample_log_dim(&space.alpha, rng),
            washout: sample_int(&space.washout, rng),
        }
    }
}

/// Tree-structured Parzen style sampler.
///
/// After a random warm-up, candidates are drawn around the best quantile of
/// past trials and the one maximising the good/bad density ratio is kept.
#[derive(Clone, Copy, Debug)]
pub struct KdeSampler {
    pub startup: usize,
    pub gamma: f64,
    pub candidates: usize,
}

impl Default for KdeSampler {
    fn default() -> Self {
        Self {
            startup: 20,
            gamma: 0.25,
            candidates: 24,
        }
    }
}

// Continuous coordinates in [0, 1] for the Parzen estimators.
fn unit_coords(space: &SearchSpace, p: &Params) -> [Option<f64>; 6] {
    fn lin(d: &Dim, v: f64) -> Option<f64> {
        match *d {
            Dim::Range([lo, hi]) if hi > lo => Some((v - lo) / (hi - lo)),
            _ => None,
        }
    }
    let log = match space.alpha {
        Dim::Range([lo, hi]) if hi > lo => {
            Some((p.alpha.log10() - lo.log10()) / (hi.log10() - lo.log10()))
        }
        _ => None,
    };
    let (wlo, whi) = space.washout.bounds();
    let wash = (whi > wlo).then(|| (p.washout - wlo) as f64 / (whi - wlo) as f64);
    [
        lin(&space.a_in, p.a_in),
        lin(&space.a_fb_d, p.a_fb_d),
        lin(&space.a_fb_4, p.a_fb_4),
        lin(&space.a_fb_b, p.a_fb_b),
        log,
        wash,
    ]
}

fn from_unit(space: &SearchSpace, base: &Params, u: &[Option<f64>; 6]) -> Params {
    fn lin(d: &Dim, u: Option<f64>, keep: f64) -> f64 {
        match (*d, u) {
            (Dim::Range([lo, hi]), Some(x)) => lo + x.clamp(0.0, 1.0) * (hi - lo),
            _ => keep,
        }
    }
    let alpha = match (space.alpha, u[4]) {
        (Dim::Range([lo, hi]), Some(x)) => {
            10f64.powf(lo.log10() + x.clamp(0.0, 1.0) * (hi.log10() - lo.log10()))
        }
        _ => base.alpha,
    };
    let (wlo, whi) = space.washout.bounds();
    let washout = match u[5] {
        Some(x) => wlo + (x.clamp(0.0, 1.0) * (whi - wlo) as f64).round() as usize,
        None => base.washout,
    };
    Params {
        a_in: lin(&space.a_in, u[0], base.a_in),
        a_fb_d: lin(&space.a_fb_d, u[1], base.a_fb_d),
        a_fb_4: lin(&space.a_fb_4, u[2], base.a_fb_4),
        a_fb_b: lin(&space.a_fb_b, u[3], base.a_fb_b),
        alpha,
        washout,
        ..base.clone()
    }
}

fn parzen_log_density(x: f64, centres: &[f64], bw: f64) -> f64 {
    // mixture of Gaussians plus a uniform prior component
    let norm = 1.0 / (bw * (2.0 * PI).sqrt());
    let sum: f64 = centres
        .iter()
        .map(|c| norm * (-0.5 * ((x - c) / bw).powi(2)).exp())
        .sum();
    ((sum + 1.0) / (centres.len() as f64 + 1.0)).ln()
}

fn categorical_log_mass(v: usize, observed: &[usize], n_choices: usize) -> f64 {
    let hits = observed.iter().filter(|&&o| o == v).count() as f64;
    ((hits + 1.0) / (observed.len() as f64 + n_choices as f64)).ln()
}

impl Sampler for KdeSampler {
    fn name(&self) -> &'static str {
        "kde"
    }

    fn batch_size(&self, _budget: usize) -> usize {
        1
    }

    fn propose(
        &self,
        space: &SearchSpace,
        outcomes: usize,
        history: &[Trial],
        rng: &mut ChaCha8Rng,
    ) -> Params {
        let mut done: Vec<&Trial> = history
            .iter()
            .filter(|t| t.status == TrialStatus::Completed)
            .collect();
        if done.len() < self.startup.max(2) {
            return RandomSampler.propose(space, outcomes, history, rng);
        }
        done.sort_by(|a, b| {
            a.objective
                .unwrap_or(f64::INFINITY)
                .total_cmp(&b.objective.unwrap_or(f64::INFINITY))
                .then(a.index.cmp(&b.index))
        });
        let n_good = ((done.len() as f64 * self.gamma).ceil() as usize).clamp(1, done.len() - 1);
        let (good, bad) = done.split_at(n_good);
        let good_u: Vec<[Option<f64>; 6]> = good.iter().map(|t| unit_coords(space, &t.params)).collect();
        let bad_u: Vec<[Option<f64>; 6]> = bad.iter().map(|t| unit_coords(space, &t.params)).collect();
        let bw_good = (1.06 * (good.len() as f64).powf(-0.2) * 0.3).max(0.02);
        let bw_bad = (1.06 * (bad.len() as f64).powf(-0.2) * 0.3).max(0.02);

        let cat_sets = [
            SearchSpace::choices(&space.mu_prime, outcomes),
            SearchSpace::choices(&space.mu_dprime, outcomes),
            SearchSpace::choices(&space.mu_tprime, outcomes),
        ];
        let cat_of = |p: &Params| [p.mu_prime, p.mu_dprime, p.mu_tprime];

        let mut best: Option<(f64, Params)> = None;
        for _ in 0..self.candidates.max(1) {
            // draw around a random good trial
            let anchor = good[rng.random_range(0..good.len())];
            let anchor_u = unit_coords(space, &anchor.params);
            let mut u = anchor_u;
            for x in u.iter_mut().flatten() {
                let noise = Normal::new(0.0, bw_good).expect("positive bandwidth");
                *x = (*x + noise.sample(rng)).clamp(0.0, 1.0);
            }
            let mut cand = from_unit(space, &anchor.params, &u);
            // categorical choices: reuse a good trial's value or explore uniformly
            let mut cats = cat_of(&anchor.params);
            for (slot, set) in cats.iter_mut().zip(&cat_sets) {
                if rng.random::<f64>() < 0.2 {
                    *slot = sample_choice(set, rng);
                }
            }
            cand.mu_prime = cats[0];
            cand.mu_dprime = cats[1];
            cand.mu_tprime = cats[2];

            let cu = unit_coords(space, &cand);
            let mut score = 0.0;
            for dim in 0..6 {
                if let Some(x) = cu[dim] {
                    let g: Vec<f64> = good_u.iter().filter_map(|c| c[dim]).collect();
                    let b: Vec<f64> = bad_u.iter().filter_map(|c| c[dim]).collect();
                    score += parzen_log_density(x, &g, bw_good) - parzen_log_density(x, &b, bw_bad);
                }
            }
            let cc = cat_of(&cand);
            for i in 0..3 {
                let g: Vec<usize> = good.iter().map(|t| cat_of(&t.params)[i]).collect();
                let b: Vec<usize> = bad.iter().map(|t| cat_of(&t.params)[i]).collect();
                score += categorical_log_mass(cc[i], &g, cat_sets[i].len())
                    - categorical_log_mass(cc[i], &b, cat_sets[i].len());
            }
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, cand));
            }
        }
        best.expect("at least one candidate").1
    }
}

/// Sampler selection for configuration files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    #[default]
    Random,
    Kde,
}

impl SamplerKind {
    pub fn build(self) -> Box<dyn Sampler> {
        match self {
            SamplerKind::Random => Box::new(RandomSampler),
            SamplerKind::Kde => Box::new(KdeSampler::default()),
        }
    }
}

/// Outcome of a search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best: Trial,
    pub trials: Vec<Trial>,
}

impl OptimizeResult {
    /// The trial log as JSON lines.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for t in &self.trials {
            out.push_str(&serde_json::to_string(t)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Seed handed to the objective of trial `index`.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng.random()
}

fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5a3c_1e00_0000);
    rng.set_stream(index as u64);
    rng
}

/// Runs `budget` trials and returns the best completed one with the full log.
///
/// Objective values that are errors or non-finite mark the trial failed;
/// failed trials still consume budget.
pub fn optimize<F>(
    space: &SearchSpace,
    outcomes: usize,
    objective: F,
    budget: usize,
    seed: u64,
    sampler: &dyn Sampler,
) -> Result<OptimizeResult>
where
    F: Fn(&Params, u64) -> Result<f64> + Sync,
{
    if budget == 0 {
        return Err(Error::Config("search budget must be at least 1".into()));
    }
    space.validate(outcomes)?;
    let mut trials: Vec<Trial> = Vec::with_capacity(budget);
    while trials.len() < budget {
        let start = trials.len();
        let end = (start + sampler.batch_size(budget).max(1)).min(budget);
        let proposals: Vec<(usize, Params)> = (start..end)
            .map(|i| (i, sampler.propose(space, outcomes, &trials, &mut trial_rng(seed, i))))
            .collect();
        let batch: Vec<Trial> = proposals
            .into_par_iter()
            .map(|(index, params)| {
                let tseed = trial_seed(seed, index);
                let (objective, status, error) = match objective(&params, tseed) {
                    Ok(v) if v.is_finite() => (Some(v), TrialStatus::Completed, None),
                    Ok(v) => (None, TrialStatus::Failed, Some(format!("non-finite objective {v}"))),
                    Err(e) => (None, TrialStatus::Failed, Some(e.to_string())),
                };
                Trial {
                    index,
                    params,
                    objective,
                    seed: tseed,
                    status,
                    error,
                }
            })
            .collect();
        trials.extend(batch);
    }
    let best = trials
        .iter()
        .filter(|t| t.status == TrialStatus::Completed)
        .min_by(|a, b| {
            a.objective
                .unwrap()
                .total_cmp(&b.objective.unwrap())
                .then(a.index.cmp(&b.index))
        })
        .cloned()
        .ok_or_else(|| Error::Optimization(format!("all {budget} trials failed")))?;
    Ok(OptimizeResult { best, trials })
}
