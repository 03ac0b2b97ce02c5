//! Hardware-optimised settings per task and photon configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::PhotonInput;
use crate::readout::SplitSpec;
use crate::reservoir::{wrap_phase, FeedbackMode, ReservoirConfig, ShotBudget};
use crate::tasks::TaskKind;

/// Photon source configurations compared throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonConfig {
    Indistinguishable,
    Distinguishable,
    Single,
}

impl PhotonConfig {
    pub const ALL: [PhotonConfig; 3] = [
        PhotonConfig::Indistinguishable,
        PhotonConfig::Distinguishable,
        PhotonConfig::Single,
    ];

    pub fn photon_input(self) -> PhotonInput {
        match self {
            PhotonConfig::Indistinguishable => PhotonInput::two_photon(1.0),
            PhotonConfig::Distinguishable => PhotonInput::two_photon(0.0),
            PhotonConfig::Single => PhotonInput::single_photon(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PhotonConfig::Indistinguishable => "indistinguishable",
            PhotonConfig::Distinguishable => "distinguishable",
            PhotonConfig::Single => "single",
        }
    }
}

/// Benchmark group a preset was tuned for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetTask {
    Memory,
    Expressivity,
    Xor,
    Narma,
    MackeyGlass,
}

impl PresetTask {
    pub fn label(self) -> &'static str {
        match self {
            PresetTask::Memory => "memory",
            PresetTask::Expressivity => "expressivity",
            PresetTask::Xor => "xor",
            PresetTask::Narma => "narma",
            PresetTask::MackeyGlass => "mackey_glass",
        }
    }

    /// Function reconstruction uses only the latest output; temporal tasks use two steps.
    pub fn feedback_mode(self) -> FeedbackMode {
        match self {
            PresetTask::Expressivity => FeedbackMode::OneStep,
            _ => FeedbackMode::TwoStep,
        }
    }

    /// Representative task instance for shipped configurations.
    pub fn default_kind(self) -> TaskKind {
        match self {
            PresetTask::Memory => TaskKind::Memory(6),
            PresetTask::Expressivity => TaskKind::Monomial(5),
            PresetTask::Xor => TaskKind::Xor(1),
            PresetTask::Narma => TaskKind::Narma(5),
            PresetTask::MackeyGlass => TaskKind::MackeyGlass(3),
        }
    }
}

/// One row of hardware settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub task: PresetTask,
    pub photon: PhotonConfig,
    /// Weights as tuned on hardware; may lie outside `[-pi, pi]`.
    pub a_in: f64,
    pub a_fb_d: f64,
    pub a_fb_4: f64,
    pub mu_prime: usize,
    pub mu_dprime: usize,
    /// Average detected events per step, in units of 1e4.
    pub counts_1e4: f64,
    pub counts_spread_1e4: Option<f64>,
    pub samples: usize,
    pub train_fraction: f64,
}

const fn row(
    task: PresetTask,
    photon: PhotonConfig,
    w: [f64; 3],
    mu: [usize; 2],
    counts: f64,
    spread: Option<f64>,
    samples: usize,
    train_fraction: f64,
) -> Preset {
    Preset {
        task,
        photon,
        a_in: w[0],
        a_fb_d: w[1],
        a_fb_4: w[2],
        mu_prime: mu[0],
        mu_dprime: mu[1],
        counts_1e4: counts,
        counts_spread_1e4: spread,
        samples,
        train_fraction,
    }
}

use PhotonConfig::{Distinguishable as D, Indistinguishable as I, Single as S};
use PresetTask::{Expressivity, MackeyGlass, Memory, Narma, Xor};

/// All tuned rows: two-photon tasks for both source types, then single-photon rows.
pub const PRESETS: [Preset; 14] = [
    row(Memory, I, [0.17, 5.94, 2.33], [5, 8], 1.61, Some(0.10), 497, 0.8),
    row(Memory, D, [0.37, 3.47, 3.71], [3, 3], 1.93, Some(0.08), 497, 0.8),
    row(Expressivity, I, [-1.69, 3.14, 3.14], [7, 3], 2.17, Some(0.14), 150, 0.8),
    row(Expressivity, D, [-1.18, 2.81, -2.42], [5, 6], 2.36, Some(0.06), 150, 0.8),
    row(Xor, I, [-1.82, 0.77, 3.14], [3, 3], 1.23, Some(0.03), 300, 0.8),
    row(Xor, D, [-1.04, 1.83, 2.02], [7, 6], 1.12, Some(0.13), 300, 0.8),
    row(Narma, I, [1.32, 1.16, -0.42], [3, 8], 1.32, Some(0.14), 500, 0.8),
    row(Narma, D, [1.49, 2.91, -1.20], [3, 0], 1.24, Some(0.12), 500, 0.8),
    row(MackeyGlass, I, [-2.65, 1.98, 2.59], [3, 6], 1.13, Some(0.06), 390, 0.5),
    row(MackeyGlass, D, [-2.92, 2.59, 2.44], [3, 6], 1.18, Some(0.08), 390, 0.5),
    row(Memory, S, [0.25, 1.16, 2.66], [3, 3], 4.97, None, 497, 0.8),
    row(Expressivity, S, [-2.87, -3.03, -0.23], [2, 0], 4.12, None, 150, 0.8),
    row(Xor, S, [-1.04, -1.15, 3.14], [2, 2], 3.00, None, 300, 0.8),
    row(Narma, S, [0.96, 1.67, 2.35], [2, 3], 5.00, None, 500, 0.8),
];

/// Looks up the row for a task and photon configuration.
pub fn find(task: PresetTask, photon: PhotonConfig) -> Result<&'static Preset> {
    PRESETS
        .iter()
        .find(|p| p.task == task && p.photon == photon)
        .ok_or_else(|| {
            Error::Config(format!(
                "no preset for {} with {} photons",
                task.label(),
                photon.label()
            ))
        })
}

impl Preset {
    /// Mean event count per step.
    pub fn n_shot(&self) -> u64 {
        (self.counts_1e4 * 1e4).round() as u64
    }

    pub fn name(&self) -> String {
        format!("{}_{}", self.task.label(), self.photon.label())
    }

    /// Reservoir configuration with weights wrapped into `[-pi, pi]`.
    pub fn reservoir_config(&self) -> ReservoirConfig {
        ReservoirConfig {
            a_in: wrap_phase(self.a_in),
            a_fb_d: wrap_phase(self.a_fb_d),
            a_fb_4: wrap_phase(self.a_fb_4),
            mu_prime: self.mu_prime,
            mu_dprime: self.mu_dprime,
            feedback_mode: self.task.feedback_mode(),
            n_shot: ShotBudget::Finite(self.n_shot()),
            ..ReservoirConfig::default()
        }
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec::new(self.train_fraction)
    }
}
