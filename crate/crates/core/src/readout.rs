//! Linear readout and figures of merit.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::FeatureMatrix;

/// Trained ridge readout: `y = x . weights + bias`.
///
/// The bias is fitted alongside the weights but is not penalised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub alpha: f64,
    pub washout: usize,
    /// Per-feature `(mean, scale)` applied before the weights, if standardised.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Vec<(f64, f64)>>,
    /// Set when singular directions were dropped (pseudoinverse solution).
    pub rank_deficient: bool,
    /// `|(A^T A + alpha J) W - A^T y| / |A^T y|` on the training rows.
    pub residual: f64,
    pub train_rows: usize,
}

/// Readout hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSettings {
    pub alpha: f64,
    pub washout: usize,
    #[serde(default)]
    pub standardize: bool,
}

impl Default for ReadoutSettings {
    fn default() -> Self {
        Self {
            alpha: 1e-6,
            washout: 10,
            standardize: false,
        }
    }
}

/// Ridge fit options beyond the regularisation strength and washout.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RidgeOptions {
    pub standardize: bool,
}

/// Ridge regression on rows `washout..` of `x` against `y`.
pub fn ridge_fit(x: &FeatureMatrix, y: &[f64], alpha: f64, washout: usize) -> Result<ReadoutModel> {
    ridge_fit_with(x, y, alpha, washout, RidgeOptions::default())
}

pub fn ridge_fit_with(
    x: &FeatureMatrix,
    y: &[f64],
    alpha: f64,
    washout: usize,
    options: RidgeOptions,
) -> Result<ReadoutModel> {
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!(
            "feature matrix has {} rows, target has {}",
            x.rows(),
            y.len()
        )));
    }
    if washout >= x.rows() {
        return Err(Error::Config(format!(
            "washout {washout} leaves no training rows out of {}",
            x.rows()
        )));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Config(format!("ridge alpha must be >= 0, got {alpha}")));
    }
    let n = x.rows() - washout;
    let d = x.cols();
    let mut xt = x.matrix().rows(washout, n).into_owned();
    let yt = DVector::from_column_slice(&y[washout..]);

    let standardization = options.standardize.then(|| {
        (0..d)
            .map(|c| {
                let col = xt.column(c);
                let mean = col.mean();
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
                (mean, scale)
            })
            .collect::<Vec<_>>()
    });
    if let Some(stats) = &standardization {
        for (c, &(mean, scale)) in stats.iter().enumerate() {
            xt.column_mut(c).apply(|v| *v = (*v - mean) / scale);
        }
    }

    // Centring removes the unpenalised intercept from the ridge problem.
    let x_mean = DVector::from_fn(d, |c, _| xt.column(c).mean());
    let y_mean = yt.mean();
    let mut xc = xt.clone();
    for c in 0..d {
        let m = x_mean[c];
        xc.column_mut(c).add_scalar_mut(-m);
    }
    let yc = yt.add_scalar(-y_mean);

    let (u, sv, v) = thin_svd(&xc);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let cutoff = f64::EPSILON * n.max(d) as f64 * sigma_max;
    let mut w = DVector::<f64>::zeros(d);
    let mut rank_deficient = sv.len() < d;
    for (i, &s) in sv.iter().enumerate() {
        if s <= cutoff {
            rank_deficient = true;
            continue;
        }
        let coeff = u.column(i).dot(&yc) * s / (s * s + alpha);
        w += v.column(i) * coeff;
    }
    let bias = y_mean - x_mean.dot(&w);
    let residual = normal_equation_residual(&xt, &yt, &w, bias, alpha);

    Ok(ReadoutModel {
        weights: w.iter().copied().collect(),
        bias,
        alpha,
        washout,
        standardization,
        rank_deficient,
        residual,
        train_rows: n,
    })
}

/// Thin SVD `(U, singular values descending, V)`.
fn thin_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let fm = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)]);
    let svd = fm.thin_svd().expect("SVD failed to converge");
    let (u, v) = (svd.U(), svd.V());
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    (
        DMatrix::from_fn(u.nrows(), u.ncols(), |r, c| u[(r, c)]),
        sv,
        DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)]),
    )
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
        .singular_values()
        .expect("SVD failed to converge")
}

/// Relative residual of the bias-augmented normal equations, bias unpenalised.
fn normal_equation_residual(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    bias: f64,
    alpha: f64,
) -> f64 {
    let (n, d) = x.shape();
    let a = DMatrix::from_fn(n, d + 1, |r, c| if c < d { x[(r, c)] } else { 1.0 });
    let mut coef = DVector::zeros(d + 1);
    coef.rows_mut(0, d).copy_from(w);
    coef[d] = bias;
    let aty = a.transpose() * y;
    let mut lhs = a.transpose() * (&a * &coef);
    for c in 0..d {
        lhs[c] += alpha * coef[c];
    }
    let denom = aty.norm();
    if denom == 0.0 {
        (lhs - aty).norm()
    } else {
        (lhs - aty).norm() / denom
    }
}

/// Readout predictions `x . weights + bias` for every row of `x`.
pub fn predict(model: &ReadoutModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    if x.cols() != model.weights.len() {
        return Err(Error::Dimension(format!(
            "model expects {} features, got {}",
            model.weights.len(),
            x.cols()
        )));
    }
    let m = x.matrix();
    Ok((0..m.nrows())
        .map(|r| {
            let dot: f64 = (0..m.ncols())
                .map(|c| {
                    let v = match &model.standardization {
                        Some(stats) => (m[(r, c)] - stats[c].0) / stats[c].1,
                        None => m[(r, c)],
                    };
                    v * model.weights[c]
                })
                .sum();
            dot + model.bias
        })
        .collect())
}

fn check_lengths(pred: &[f64], target: &[f64], min: usize) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::Dimension(format!(
            "prediction length {} != target length {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.len() < min {
        return Err(Error::Input(format!(
            "need at least {min} samples, got {}",
            pred.len()
        )));
    }
    Ok(())
}

/// Squared Pearson correlation with a flag for the zero-variance case.
///
/// The score is undefined when either vector is constant; it is reported
/// as 0 and the flag is set.
pub fn r2_with_flag(pred: &[f64], target: &[f64]) -> Result<(f64, bool)> {
    check_lengths(pred, target, 2)?;
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = target.iter().sum::<f64>() / n;
    let (mut cov, mut vp, mut vt) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(target) {
        let (dp, dt) = (p - mp, t - mt);
        cov += dp * dt;
        vp += dp * dp;
        vt += dt * dt;
    }
    if vp <= 0.0 || vt <= 0.0 || !(vp * vt).is_normal() {
        return Ok((0.0, true));
    }
    Ok(((cov * cov / (vp * vt)).clamp(0.0, 1.0), false))
}

/// Squared Pearson correlation between predictions and targets.
pub fn r2_score(pred: &[f64], target: &[f64]) -> Result<f64> {
    r2_with_flag(pred, target).map(|(r2, _)| r2)
}

/// Mean squared error.
pub fn mse_score(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target, 1)?;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / pred.len() as f64)
}

/// Total memory capacity: the sum of per-delay R^2 values.
pub fn memory_capacity(per_delay_r2: &[f64]) -> Result<f64> {
    if per_delay_r2.is_empty() {
        return Err(Error::Input("memory capacity needs at least one delay".into()));
    }
    Ok(per_delay_r2.iter().sum())
}

/// Number of singular values of `x` above `tol` times the largest.
///
/// This is the rank of the Gram matrix `G = X^T X`.
pub fn gram_effective_rank(x: &FeatureMatrix, tol: f64) -> usize {
    if x.rows() == 0 || x.cols() == 0 {
        return 0;
    }
    let sv = singular_values(x.matrix());
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Eigenvalues of the Gram matrix `X^T X`, descending.
pub fn gram_spectrum(x: &FeatureMatrix) -> Vec<f64> {
    let g = x.matrix().transpose() * x.matrix();
    let mut ev: Vec<f64> = SymmetricEigen::new(g).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Fraction of predictions that round (after clamping to `[0, 1]`) to the target bit.
pub fn binary_accuracy(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target, 1)?;
    let hits = pred
        .iter()
        .zip(target)
        .filter(|(p, t)| {
            let bit = if p.clamp(0.0, 1.0) >= 0.5 { 1.0 } else { 0.0 };
            bit == **t
        })
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Min-max normalisation onto `[0, 1]`; constant input maps to zeros.
///
/// Presentation-only: used when exporting comparison plots, never in training.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect()
}

/// Chronological train/test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    /// Fraction of the sequence used for training (prefix).
    pub train_fraction: f64,
    /// Control experiment: permute the (input, target) pairs before running.
    #[serde(default)]
    pub shuffle: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            shuffle: false,
        }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Self {
        Self {
            train_fraction,
            shuffle: false,
        }
    }

    /// `(K_tr, K_ts)` for a sequence of length `k`.
    pub fn resolve(&self, k: usize) -> Result<(usize, usize)> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        let k_tr = (k as f64 * self.train_fraction + 1e-9).floor() as usize;
        if k_tr == 0 || k_tr >= k {
            return Err(Error::Config(format!(
                "split of {k} samples at {} leaves an empty side",
                self.train_fraction
            )));
        }
        Ok((k_tr, k - k_tr))
    }
}

/// Scores of one trained readout on the test suffix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub r2: f64,
    /// Set when R^2 was undefined (constant vector) and reported as 0.
    pub r2_degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_delay_r2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    pub gram_rank: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub fit_residual: f64,
    pub rank_deficient_fit: bool,
}
