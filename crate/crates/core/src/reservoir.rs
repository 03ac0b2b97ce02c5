//! Step-wise encode, evolve, measure and feedback protocol.
//!
//! At step `k` the input `s_k` sets `phi_B = a_in * s_k`; the feedback
//! phases are driven by selected outcome probabilities of earlier steps.
//! With a finite shot budget the measured frequencies replace the exact
//! probabilities, both as features and (by default) as feedback signal.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::circuit::{CircuitModel, CircuitPhases};
use crate::error::{Error, Result};
use crate::fock::{DistributionEngine, OutputDistribution, PhotonInput};

/// Default quantisation step for discretised phase studies.
pub const DEFAULT_PHASE_STEP: f64 = 2.0 * PI / 512.0;

/// How past outcome probabilities drive the circuit phases.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    /// `phi_D` and `phi_4` both from step `k-1`.
    OneStep,
    /// `phi_D` from `k-1`, `phi_4` from `k-2`.
    #[default]
    TwoStep,
    /// Two-step feedback plus a third loop adding `a_fb_B * p_{k-3}(mu''')` to `phi_B`.
    ThreeLoop,
    Off,
}

impl FeedbackMode {
    /// Number of active feedback loops.
    pub fn loops(self) -> usize {
        match self {
            FeedbackMode::Off => 0,
            FeedbackMode::OneStep | FeedbackMode::TwoStep => 2,
            FeedbackMode::ThreeLoop => 3,
        }
    }
}

/// Which probabilities are fed back when the shot budget is finite.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    /// Measured frequencies, as in the experiment.
    #[default]
    Empirical,
    /// Exact probabilities, for ideal-system studies.
    Exact,
}

/// Detection events collected per step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShotBudget {
    Finite(u64),
    #[default]
    Infinite,
}

impl ShotBudget {
    pub fn is_finite(self) -> bool {
        matches!(self, ShotBudget::Finite(_))
    }
}

impl fmt::Display for ShotBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShotBudget::Finite(n) => write!(f, "{n}"),
            ShotBudget::Infinite => write!(f, "infinite"),
        }
    }
}

impl Serialize for ShotBudget {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ShotBudget::Finite(n) => s.serialize_u64(*n),
            ShotBudget::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for ShotBudget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct ShotVisitor;

        impl Visitor<'_> for ShotVisitor {
            type Value = ShotBudget;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive shot count or \"infinite\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ShotBudget, E> {
                if v == 0 {
                    return Err(E::custom("n_shot must be at least 1"));
                }
                Ok(ShotBudget::Finite(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ShotBudget, E> {
                if v < 1 {
                    return Err(E::custom("n_shot must be at least 1"));
                }
                Ok(ShotBudget::Finite(v as u64))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ShotBudget, E> {
                if v.is_infinite() && v > 0.0 {
                    return Ok(ShotBudget::Infinite);
                }
                if v >= 1.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
                    return Ok(ShotBudget::Finite(v as u64));
                }
                Err(E::custom(format!("n_shot must be a positive integer, got {v}")))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ShotBudget, E> {
                match v {
                    "inf" | "infinite" | "Infinity" => Ok(ShotBudget::Infinite),
                    other => Err(E::custom(format!("unrecognised shot budget '{other}'"))),
                }
            }

            fn visit_unit<E: de::Error>(self) -> std::result::Result<ShotBudget, E> {
                Ok(ShotBudget::Infinite)
            }
        }

        d.deserialize_any(ShotVisitor)
    }
}

/// Reservoir hyperparameters and noise model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirConfig {
    pub a_in: f64,
    #[serde(rename = "a_fb_D")]
    pub a_fb_d: f64,
    pub a_fb_4: f64,
    pub mu_prime: usize,
    pub mu_dprime: usize,
    /// Third-loop weight on `phi_B`; only read in [`FeedbackMode::ThreeLoop`].
    #[serde(rename = "a_fb_B", default)]
    pub a_fb_b: f64,
    #[serde(default)]
    pub mu_tprime: usize,
    #[serde(default)]
    pub feedback_mode: FeedbackMode,
    #[serde(default)]
    pub feedback_source: FeedbackSource,
    #[serde(default)]
    pub n_shot: ShotBudget,
    /// Phase quantisation step in radians; 0 means continuous control.
    #[serde(default)]
    pub phase_step: f64,
    #[serde(default)]
    pub circuit: CircuitModel,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            a_in: 1.0,
            a_fb_d: 0.0,
            a_fb_4: 0.0,
            mu_prime: 0,
            mu_dprime: 0,
            a_fb_b: 0.0,
            mu_tprime: 0,
            feedback_mode: FeedbackMode::default(),
            feedback_source: FeedbackSource::default(),
            n_shot: ShotBudget::Infinite,
            phase_step: 0.0,
            circuit: CircuitModel::Canonical,
            seed: 0,
        }
    }
}

impl ReservoirConfig {
    /// Checks bounds against a basis of `outcomes` measurement outcomes.
    pub fn validate(&self, outcomes: usize) -> Result<()> {
        let weights = [
            ("a_in", self.a_in),
            ("a_fb_D", self.a_fb_d),
            ("a_fb_4", self.a_fb_4),
            ("a_fb_B", self.a_fb_b),
        ];
        for (name, w) in weights {
            if !w.is_finite() || w.abs() > PI {
                return Err(Error::Config(format!("{name} = {w} outside [-pi, pi]")));
            }
        }
        let selectors = [
            ("mu_prime", self.mu_prime),
            ("mu_dprime", self.mu_dprime),
            ("mu_tprime", self.mu_tprime),
        ];
        for (name, mu) in selectors {
            if mu >= outcomes {
                return Err(Error::Config(format!(
                    "{name}: outcome index {mu} >= {outcomes}"
                )));
            }
        }
        if !(self.phase_step.is_finite() && self.phase_step >= 0.0) {
            return Err(Error::Config(format!(
                "phase_step must be finite and >= 0, got {}",
                self.phase_step
            )));
        }
        if self.n_shot == ShotBudget::Finite(0) {
            return Err(Error::Config("n_shot must be at least 1".into()));
        }
        Ok(())
    }

    /// Copy with a different RNG seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Wraps an angle into `[-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    if (-PI..=PI).contains(&phi) {
        return phi;
    }
    let two_pi = 2.0 * PI;
    let w = (phi + PI).rem_euclid(two_pi) - PI;
    // keep +pi rather than mapping it onto -pi
    if w == -PI && phi > 0.0 {
        PI
    } else {
        w
    }
}

/// Nearest multiple of `phase_step` (ties to even); identity when the step is 0.
pub fn quantize_phase(phi: f64, phase_step: f64) -> f64 {
    if phase_step == 0.0 {
        phi
    } else {
        (phi / phase_step).round_ties_even() * phase_step
    }
}

/// Multinomial draw of `n_shot` detection events over the outcomes of `dist`.
pub fn sample_counts<R: rand::Rng + ?Sized>(
    dist: &OutputDistribution,
    n_shot: u64,
    rng: &mut R,
) -> Vec<u64> {
    let probs = dist.probs();
    let mut counts = vec![0u64; probs.len()];
    let mut remaining_shots = n_shot;
    let mut remaining_mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = remaining_shots;
            break;
        }
        let p = p.max(0.0);
        let q = if remaining_mass > 0.0 {
            (p / remaining_mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let drawn = if q == 0.0 {
            0
        } else if q == 1.0 {
            remaining_shots
        } else {
            Binomial::new(remaining_shots, q)
                .expect("binomial parameters are in range")
                .sample(rng)
        };
        counts[i] = drawn;
        remaining_shots -= drawn;
        remaining_mass -= p;
    }
    counts
}

/// Everything observed at one reservoir step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub s_k: f64,
    /// Phases actually applied, after quantisation.
    pub phases: CircuitPhases,
    /// Exact probabilities, or measured frequencies under a finite budget.
    pub probs: OutputDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u64>>,
}

/// Per-step probability vectors stacked row-wise (`K x D`).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self(matrix)
    }

    pub fn from_records(records: &[StepRecord]) -> Self {
        let cols = records.first().map_or(0, |r| r.probs.len());
        Self(DMatrix::from_fn(records.len(), cols, |r, c| {
            records[r].probs.get(c)
        }))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        Self(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self(self.0.rows(start, end - start).into_owned())
    }

    /// Reorders rows: row `i` of the result is row `order[i]` of `self`.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        Self(self.0.select_rows(order))
    }
}

/// A reservoir bound to one photon input, ready to process sequences.
#[derive(Clone, Debug)]
pub struct Reservoir {
    config: ReservoirConfig,
    engine: DistributionEngine,
}

impl Reservoir {
    pub fn new(config: ReservoirConfig, photon: PhotonInput) -> Result<Self> {
        let engine = DistributionEngine::new(config.circuit.modes(), photon)?;
        config.validate(engine.outcomes())?;
        Ok(Self { config, engine })
    }

    pub fn config(&self) -> &ReservoirConfig {
        &self.config
    }

    pub fn engine(&self) -> &DistributionEngine {
        &self.engine
    }

    pub fn outcomes(&self) -> usize {
        self.engine.outcomes()
    }

    /// Runs the protocol over `inputs`, seeding the shot-noise RNG with `config.seed`.
    pub fn run(&self, inputs: &[f64]) -> Result<Vec<StepRecord>> {
        if let Some((k, &bad)) = inputs
            .iter()
            .enumerate()
            .find(|(_, s)| !(0.0..=1.0).contains(*s))
        {
            return Err(Error::Input(format!("input s_{k} = {bad} not in [0, 1]")));
        }
        let cfg = &self.config;
        let d = self.outcomes();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        // history[0] = p_{k-1}, history[1] = p_{k-2}, history[2] = p_{k-3}
        let mut history: [Vec<f64>; 3] = [vec![0.0; d], vec![0.0; d], vec![0.0; d]];
        let mut records = Vec::with_capacity(inputs.len());

        for (k, &s_k) in inputs.iter().enumerate() {
            let mut phi_b = cfg.a_in * s_k;
            let (phi_d, phi_4) = match cfg.feedback_mode {
                FeedbackMode::Off => (0.0, 0.0),
                FeedbackMode::OneStep => (
                    cfg.a_fb_d * history[0][cfg.mu_prime],
                    cfg.a_fb_4 * history[0][cfg.mu_dprime],
                ),
                FeedbackMode::TwoStep | FeedbackMode::ThreeLoop => (
                    cfg.a_fb_d * history[0][cfg.mu_prime],
                    cfg.a_fb_4 * history[1][cfg.mu_dprime],
                ),
            };
            if cfg.feedback_mode == FeedbackMode::ThreeLoop {
                phi_b += cfg.a_fb_b * history[2][cfg.mu_tprime];
            }
            let phases = CircuitPhases::new(
                quantize_phase(phi_b, cfg.phase_step),
                quantize_phase(phi_d, cfg.phase_step),
                quantize_phase(phi_4, cfg.phase_step),
            );
            let unitary = cfg.circuit.unitary(&phases)?;
            let exact = self.engine.mixed(&unitary)?;

            let (probs, counts) = match cfg.n_shot {
                ShotBudget::Infinite => (exact.clone(), None),
                ShotBudget::Finite(n) => {
                    let counts = sample_counts(&exact, n, &mut rng);
                    let freq = counts.iter().map(|&c| c as f64 / n as f64).collect();
                    (OutputDistribution::new(freq), Some(counts))
                }
            };
            let fed_back = match cfg.feedback_source {
                FeedbackSource::Empirical => probs.probs(),
                FeedbackSource::Exact => exact.probs(),
            };
            history.rotate_right(1);
            history[0].copy_from_slice(fed_back);

            records.push(StepRecord {
                k,
                s_k,
                phases,
                probs,
                counts,
            });
        }
        Ok(records)
    }

    /// Independent shot-noise replicas with seeds `seed, seed + 1, ...`.
    pub fn replicas(&self, inputs: &[f64], n_replicas: usize) -> Result<Vec<Vec<StepRecord>>> {
        if !self.config.n_shot.is_finite() {
            return Err(Error::Config(
                "Monte Carlo replicas need a finite shot budget".into(),
            ));
        }
        if n_replicas == 0 {
            return Err(Error::Config("at least one replica is required".into()));
        }
        (0..n_replicas)
            .into_par_iter()
            .map(|i| {
                let cfg = self.config.with_seed(self.config.seed.wrapping_add(i as u64));
                Reservoir {
                    config: cfg,
                    engine: self.engine.clone(),
                }
                .run(inputs)
            })
            .collect()
    }
}

/// Runs the reservoir protocol over `inputs`.
pub fn run_sequence(
    inputs: &[f64],
    config: &ReservoirConfig,
    photon: &PhotonInput,
) -> Result<Vec<StepRecord>> {
    Reservoir::new(config.clone(), photon.clone())?.run(inputs)
}

/// Feature matrices for `n_replicas` independent shot-noise realisations.
pub fn monte_carlo_replicas(
    inputs: &[f64],
    config: &ReservoirConfig,
    photon: &PhotonInput,
    n_replicas: usize,
) -> Result<Vec<FeatureMatrix>> {
    let reservoir = Reservoir::new(config.clone(), photon.clone())?;
    Ok(reservoir
        .replicas(inputs, n_replicas)?
        .iter()
        .map(|r| FeatureMatrix::from_records(r))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_phase(0.3, 0.0), 0.3);
        assert_eq!(quantize_phase(0.3, 0.25), 0.25);
        // ties go to the even multiple
        assert_eq!(quantize_phase(0.375, 0.25), 0.5);
        assert_eq!(quantize_phase(0.125, 0.25), 0.0);
        assert_eq!(quantize_phase(-0.125, 0.25), 0.0);
    }

    #[test]
    fn wrap_examples() {
        assert!((wrap_phase(5.94) - (5.94 - 2.0 * PI)).abs() < 1e-15);
        assert_eq!(wrap_phase(0.17), 0.17);
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), -PI);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
    }

    #[test]
    fn point_mass_sampling() {
        let mut probs = vec![0.0; 10];
        probs[3] = 1.0;
        let dist = OutputDistribution::new(probs);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let counts = sample_counts(&dist, 100, &mut rng);
        assert_eq!(counts[3], 100);
        assert_eq!(counts.iter().sum::<u64>(), 100);
    }

    #[test]
    fn shot_budget_serde() {
        let b: ShotBudget = serde_json::from_str("16100").unwrap();
        assert_eq!(b, ShotBudget::Finite(16100));
        let b: ShotBudget = serde_json::from_str("\"infinite\"").unwrap();
        assert_eq!(b, ShotBudget::Infinite);
        let b: ShotBudget = serde_json::from_str("1e4").unwrap();
        assert_eq!(b, ShotBudget::Finite(10000));
        assert!(serde_json::from_str::<ShotBudget>("0").is_err());
        assert!(serde_json::from_str::<ShotBudget>("2.5").is_err());
        assert_eq!(serde_json::to_string(&ShotBudget::Infinite).unwrap(), "\"infinite\"");
    }

    #[test]
    fn config_validation() {
        let mut cfg = ReservoirConfig::default();
        assert!(cfg.validate(10).is_ok());
        cfg.mu_prime = 10;
        assert!(cfg.validate(10).is_err());
        cfg.mu_prime = 0;
        cfg.a_fb_d = 5.94;
        assert!(cfg.validate(10).is_err());
        cfg.a_fb_d = wrap_phase(5.94);
        assert!(cfg.validate(10).is_ok());
        cfg.phase_step = -1.0;
        assert!(cfg.validate(10).is_err());
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        let cfg = ReservoirConfig::default();
        let photon = PhotonInput::single_photon();
        assert!(matches!(
            run_sequence(&[0.1, f64::NAN], &cfg, &photon),
            Err(Error::Input(_))
        ));
        assert!(run_sequence(&[1.5], &cfg, &photon).is_err());
        let bad = ReservoirConfig {
            mu_dprime: 4,
            ..ReservoirConfig::default()
        };
        assert!(matches!(run_sequence(&[0.5], &bad, &photon), Err(Error::Config(_))));
    }

    #[test]
    fn replicas_refuse_infinite_shots() {
        let cfg = ReservoirConfig::default();
        assert!(monte_carlo_replicas(&[0.5], &cfg, &PhotonInput::single_photon(), 2).is_err());
    }
}
