//! Fock-space combinatorics and multiphoton output statistics.
//!
//! Indistinguishable photons pick up amplitudes `Per(U_{S,T}) / sqrt(prod s_i! prod t_j!)`;
//! distinguishable photons propagate independently, which amounts to the
//! permanent of the elementwise squared moduli. Partial distinguishability
//! of a photon pair is a convex mixture of the two.

mod basis;
mod permanent;

pub use basis::{enumerate_basis, FockBasis, OccupationState};
pub use permanent::{permanent, MAX_PERMANENT_ORDER};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use permanent::permanent_row_major;

/// Maximum photon number handled by the simulator.
pub const MAX_PHOTONS: usize = 4;

/// Tolerance for the unitarity check in [`ModeUnitary::new`].
pub const UNITARITY_TOL: f64 = 1e-10;

/// Single-particle transfer matrix of an `m`-mode interferometer.
///
/// Entry `(o, i)` is the amplitude for a photon entering mode `i` to leave
/// in mode `o`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary(DMatrix<Complex64>);

impl ModeUnitary {
    /// Wraps `matrix`, rejecting it if it is not square and unitary.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "mode unitary must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let deviation = unitarity_deviation(&matrix);
        if !(deviation < UNITARITY_TOL) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(matrix))
    }

    /// Wraps a matrix that is unitary by construction.
    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Self {
        debug_assert!(unitarity_deviation(&matrix) < UNITARITY_TOL);
        Self(matrix)
    }

    pub fn identity(m: usize) -> Self {
        Self(DMatrix::identity(m, m))
    }

    pub fn modes(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn get(&self, out_mode: usize, in_mode: usize) -> Complex64 {
        self.0[(out_mode, in_mode)]
    }

    /// `max |U^dag U - I|` over all entries.
    pub fn deviation(&self) -> f64 {
        unitarity_deviation(&self.0)
    }
}

pub fn unitarity_deviation(matrix: &DMatrix<Complex64>) -> f64 {
    let gram = matrix.adjoint() * matrix;
    let m = gram.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..m {
        for c in 0..m {
            let target = if r == c { 1.0 } else { 0.0 };
            let d = (gram[(r, c)] - Complex64::new(target, 0.0)).norm();
            worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
        }
    }
    worst
}

/// Photons injected into the interferometer.
///
/// `visibility` interpolates two-photon statistics between fully
/// distinguishable (0) and fully indistinguishable (1). For any other photon
/// number only the endpoints are meaningful.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonInput {
    pub input_modes: Vec<usize>,
    pub visibility: f64,
}

impl PhotonInput {
    pub fn new(input_modes: Vec<usize>, visibility: f64) -> Self {
        Self {
            input_modes,
            visibility,
        }
    }

    /// One photon in mode 0, the `|1 0 0 0>` input.
    pub fn single_photon() -> Self {
        Self::new(vec![0], 1.0)
    }

    /// Two photons in the first and last of four modes, `|1 0 0 1>`.
    pub fn two_photon(visibility: f64) -> Self {
        Self::new(vec![0, 3], visibility)
    }

    /// Default injection pattern for `n_ph` photons on a four-mode chip.
    pub fn default_for(n_ph: usize, visibility: f64) -> Result<Self> {
        let modes = match n_ph {
            1 => vec![0],
            2 => vec![0, 3],
            3 => vec![0, 1, 3],
            4 => vec![0, 1, 2, 3],
            _ => {
                return Err(Error::Unsupported(format!(
                    "no default injection pattern for {n_ph} photons"
                )))
            }
        };
        Ok(Self::new(modes, visibility))
    }

    pub fn n_ph(&self) -> usize {
        self.input_modes.len()
    }

    pub fn occupation(&self, modes: usize) -> Result<OccupationState> {
        OccupationState::from_modes(modes, &self.input_modes)
    }

    /// Checks the photon input against an `m`-mode circuit.
    pub fn validate(&self, modes: usize) -> Result<()> {
        let n = self.n_ph();
        if n == 0 || n > MAX_PHOTONS {
            return Err(Error::Unsupported(format!(
                "photon number {n} outside supported range 1..={MAX_PHOTONS}"
            )));
        }
        if let Some(&bad) = self.input_modes.iter().find(|&&i| i >= modes) {
            return Err(Error::ModeIndex { index: bad, modes });
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::Config(format!(
                "visibility {} outside [0, 1]",
                self.visibility
            )));
        }
        let endpoint = self.visibility == 0.0 || self.visibility == 1.0;
        if !endpoint && n != 2 {
            return Err(Error::Unsupported(format!(
                "fractional visibility {} is only defined for two photons, got {n}",
                self.visibility
            )));
        }
        Ok(())
    }
}

/// Probabilities over the outcomes of a [`FockBasis`], in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutputDistribution(Vec<f64>);

impl OutputDistribution {
    pub fn new(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.0[idx]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `weight * self + (1 - weight) * other`, componentwise.
    pub fn mix(&self, other: &Self, weight: f64) -> Self {
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| weight * a + (1.0 - weight) * b)
                .collect(),
        )
    }
}

/// Precomputed photon-routing tables for one photon input on one mode count.
///
/// The reservoir evaluates the same input against a fresh unitary at every
/// step; this keeps the basis and the row/column multiplicity lists around.
#[derive(Clone, Debug)]
pub struct DistributionEngine {
    basis: FockBasis,
    input: PhotonInput,
    input_columns: Vec<usize>,
    input_norm: f64,
    outputs: Vec<(Vec<usize>, f64)>,
}

impl DistributionEngine {
    pub fn new(modes: usize, input: PhotonInput) -> Result<Self> {
        input.validate(modes)?;
        let occupation = input.occupation(modes)?;
        let basis = enumerate_basis(modes, input.n_ph());
        let outputs = basis
            .states()
            .iter()
            .map(|s| (s.mode_list(), s.factorial_product()))
            .collect();
        Ok(Self {
            input_columns: occupation.mode_list(),
            input_norm: occupation.factorial_product(),
            basis,
            input,
            outputs,
        })
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn input(&self) -> &PhotonInput {
        &self.input
    }

    pub fn outcomes(&self) -> usize {
        self.basis.len()
    }

    fn check_modes(&self, u: &ModeUnitary) -> Result<()> {
        if u.modes() != self.basis.modes() {
            return Err(Error::Dimension(format!(
                "unitary acts on {} modes, photon input expects {}",
                u.modes(),
                self.basis.modes()
            )));
        }
        Ok(())
    }

    /// Output statistics for fully indistinguishable photons.
    pub fn indistinguishable(&self, u: &ModeUnitary) -> Result<OutputDistribution> {
        self.check_modes(u)?;
        let n = self.input_columns.len();
        let mut sub = [Complex64::new(0.0, 0.0); MAX_PERMANENT_ORDER * MAX_PERMANENT_ORDER];
        let probs = self
            .outputs
            .iter()
            .map(|(rows, out_norm)| {
                for (a, &r) in rows.iter().enumerate() {
                    for (b, &c) in self.input_columns.iter().enumerate() {
                        sub[a * n + b] = u.get(r, c);
                    }
                }
                permanent_row_major(n, &sub[..n * n]).norm_sqr() / (self.input_norm * out_norm)
            })
            .collect();
        Ok(OutputDistribution(probs))
    }

    /// Output statistics for fully distinguishable (labelled) photons.
    pub fn distinguishable(&self, u: &ModeUnitary) -> Result<OutputDistribution> {
        self.check_modes(u)?;
        let n = self.input_columns.len();
        let mut sub = [Complex64::new(0.0, 0.0); MAX_PERMANENT_ORDER * MAX_PERMANENT_ORDER];
        let probs = self
            .outputs
            .iter()
            .map(|(rows, out_norm)| {
                for (a, &r) in rows.iter().enumerate() {
                    for (b, &c) in self.input_columns.iter().enumerate() {
                        sub[a * n + b] = Complex64::new(u.get(r, c).norm_sqr(), 0.0);
                    }
                }
                permanent_row_major(n, &sub[..n * n]).re / out_norm
            })
            .collect();
        Ok(OutputDistribution(probs))
    }

    /// Statistics for the configured visibility.
    pub fn mixed(&self, u: &ModeUnitary) -> Result<OutputDistribution> {
        let v = self.input.visibility;
        if v == 1.0 {
            self.indistinguishable(u)
        } else if v == 0.0 {
            self.distinguishable(u)
        } else {
            let ind = self.indistinguishable(u)?;
            let dis = self.distinguishable(u)?;
            Ok(ind.mix(&dis, v))
        }
    }
}

/// Output distribution for indistinguishable photons entering as `input`.
pub fn indistinguishable_distribution(
    u: &ModeUnitary,
    input: &OccupationState,
) -> Result<OutputDistribution> {
    if input.modes() != u.modes() {
        return Err(Error::Dimension(format!(
            "input state has {} modes, unitary has {}",
            input.modes(),
            u.modes()
        )));
    }
    DistributionEngine::new(u.modes(), PhotonInput::new(input.mode_list(), 1.0))?
        .indistinguishable(u)
}

/// Output distribution for distinguishable photons, one per listed mode.
pub fn distinguishable_distribution(
    u: &ModeUnitary,
    input_modes: &[usize],
) -> Result<OutputDistribution> {
    DistributionEngine::new(u.modes(), PhotonInput::new(input_modes.to_vec(), 0.0))?
        .distinguishable(u)
}

/// Output distribution for a photon input with visibility `V`.
pub fn mixed_distribution(u: &ModeUnitary, input: &PhotonInput) -> Result<OutputDistribution> {
    DistributionEngine::new(u.modes(), input.clone())?.mixed(u)
}
