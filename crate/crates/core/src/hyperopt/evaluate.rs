use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::PhotonInput;
use crate::readout::{
    binary_accuracy, gram_effective_rank, memory_capacity, mse_score, predict, r2_with_flag,
    ridge_fit_with, MetricsReport, ReadoutModel, ReadoutSettings, RidgeOptions, SplitSpec,
};
use crate::reservoir::{FeatureMatrix, Reservoir, ReservoirConfig, StepRecord};
use crate::tasks::{generate, Dataset, TaskKind, TaskSpec};

/// Relative singular-value threshold for the reported Gram rank.
pub const GRAM_RANK_TOL: f64 = 1e-10;

/// Scores plus the test-suffix predictions they were computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// Index of the first test row.
    pub test_start: usize,
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
}

struct Fit {
    model: ReadoutModel,
    predictions: Vec<f64>,
}

fn fit_prefix(
    features: &FeatureMatrix,
    targets: &[f64],
    valid_from: usize,
    k_tr: usize,
    readout: &ReadoutSettings,
) -> Result<Fit> {
    let washout = readout.washout.max(valid_from);
    if washout >= k_tr {
        return Err(Error::Config(format!(
            "washout {washout} leaves no training rows before the split at {k_tr}"
        )));
    }
    let train = features.slice_rows(0, k_tr);
    let options = RidgeOptions {
        standardize: readout.standardize,
    };
    let model = ridge_fit_with(&train, &targets[..k_tr], readout.alpha, washout, options)?;
    let test = features.slice_rows(k_tr, features.rows());
    let predictions = predict(&model, &test)?;
    Ok(Fit { model, predictions })
}

/// Trains the readout on the chronological prefix and scores the suffix.
pub fn score_features(
    kind: TaskKind,
    dataset: &Dataset,
    features: &FeatureMatrix,
    split: &SplitSpec,
    readout: &ReadoutSettings,
) -> Result<Evaluation> {
    if features.rows() != dataset.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows for {} samples",
            features.rows(),
            dataset.len()
        )));
    }
    let (k_tr, k_ts) = split.resolve(dataset.len())?;
    let fit = fit_prefix(features, &dataset.targets, dataset.valid_from, k_tr, readout)?;
    let targets = dataset.targets[k_tr..].to_vec();
    let mse = mse_score(&fit.predictions, &targets)?;
    let (r2, r2_degenerate) = r2_with_flag(&fit.predictions, &targets)?;
    let accuracy = if kind.is_binary() {
        Some(binary_accuracy(&fit.predictions, &targets)?)
    } else {
        None
    };
    let (per_delay_r2, capacity) = match kind {
        TaskKind::Memory(max_delay) => {
            let mut per_delay = Vec::with_capacity(max_delay + 1);
            for d in 0..=max_delay {
                let delayed = dataset.delayed_input(d);
                let f = fit_prefix(features, &delayed, d, k_tr, readout)?;
                per_delay.push(r2_with_flag(&f.predictions, &delayed[k_tr..])?.0);
            }
            let c = memory_capacity(&per_delay)?;
            (Some(per_delay), Some(c))
        }
        _ => (None, None),
    };
    let washout = readout.washout.max(dataset.valid_from);
    let gram_rank = gram_effective_rank(&features.slice_rows(washout, k_tr), GRAM_RANK_TOL);
    Ok(Evaluation {
        report: MetricsReport {
            mse,
            r2,
            r2_degenerate,
            accuracy,
            per_delay_r2,
            capacity,
            gram_rank,
            train_rows: fit.model.train_rows,
            test_rows: k_ts,
            fit_residual: fit.model.residual,
            rank_deficient_fit: fit.model.rank_deficient,
        },
        test_start: k_tr,
        predictions: fit.predictions,
        targets,
    })
}

/// Full pipeline for one configuration, keeping the step records.
pub fn evaluate_detailed(
    task: &TaskSpec,
    config: &ReservoirConfig,
    photon: &PhotonInput,
    split: &SplitSpec,
    readout: &ReadoutSettings,
) -> Result<(Evaluation, Vec<StepRecord>, Dataset)> {
    let dataset = generate(task)?;
    let reservoir = Reservoir::new(config.clone(), photon.clone())?;
    let records = reservoir.run(&dataset.inputs)?;
    let features = FeatureMatrix::from_records(&records);
    let eval = score_features(task.kind, &dataset, &features, split, readout)?;
    Ok((eval, records, dataset))
}

/// Generates the task data, runs the reservoir, fits on the train prefix and scores the test suffix.
pub fn evaluate_config(
    task: &TaskSpec,
    config: &ReservoirConfig,
    photon: &PhotonInput,
    split: &SplitSpec,
    readout: &ReadoutSettings,
) -> Result<MetricsReport> {
    evaluate_detailed(task, config, photon, split, readout).map(|(e, _, _)| e.report)
}

/// Scalar to minimise for a task family.
pub fn objective_value(kind: TaskKind, report: &MetricsReport) -> f64 {
    match kind {
        TaskKind::Memory(_) => -report.capacity.unwrap_or(report.r2),
        TaskKind::Xor(_) => -report.accuracy.unwrap_or(0.0),
        _ => report.mse,
    }
}
