//! Interferometer construction.
//!
//! The reservoir uses a closed-form four-mode transfer matrix driven by one
//! encoding phase (`phi_B`) and two feedback phases (`phi_D`, `phi_4`).
//! Generic gate lists are available for extended layouts.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::ModeUnitary;

/// Auxiliary chip phases that are recognised by name and default to zero.
pub const AUXILIARY_PHASES: [&str; 5] = ["phi_1", "phi_2", "phi_A", "phi_C", "phi_3"];

/// Phase settings of the interferometer, in radians.
///
/// Values are stored unwrapped; only `e^{i phi}` enters any matrix.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CircuitPhases {
    #[serde(rename = "phi_B")]
    pub phi_b: f64,
    #[serde(rename = "phi_D")]
    pub phi_d: f64,
    #[serde(rename = "phi_4")]
    pub phi_4: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl CircuitPhases {
    pub fn new(phi_b: f64, phi_d: f64, phi_4: f64) -> Self {
        Self {
            phi_b,
            phi_d,
            phi_4,
            extra: BTreeMap::new(),
        }
    }

    /// Looks up a phase by name (`phi_B`, `phi_D`, `phi_4` or an auxiliary phase).
    pub fn named(&self, name: &str) -> Result<f64> {
        match name {
            "phi_B" => Ok(self.phi_b),
            "phi_D" => Ok(self.phi_d),
            "phi_4" => Ok(self.phi_4),
            other => match self.extra.get(other) {
                Some(&v) => Ok(v),
                None if AUXILIARY_PHASES.contains(&other) => Ok(0.0),
                None => Err(Error::Config(format!("unknown phase name '{other}'"))),
            },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.phi_b.is_finite()
            && self.phi_d.is_finite()
            && self.phi_4.is_finite()
            && self.extra.values().all(|v| v.is_finite())
    }
}

fn cis(phi: f64) -> Complex64 {
    Complex64::from_polar(1.0, phi)
}

/// The chip's full input-output transfer matrix at the given phases.
pub fn build_canonical_unitary(phases: &CircuitPhases) -> ModeUnitary {
    let one = Complex64::new(1.0, 0.0);
    let two = Complex64::new(2.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let b = cis(phases.phi_b);
    let d = cis(phases.phi_d);
    let f = cis(phases.phi_4);
    let df = cis(phases.phi_d + phases.phi_4);

    #[rustfmt::skip]
    let entries = [
        one - b + df - f,      i * (-one + b + df - f), i * (-one - b + df + f), -(one + b + df + f),
        i * (-one + b + df - f), -one + b - df + f,     -(one + b + df + f),     i * (one + b - df - f),
        i * (-b + d),          -(two + b + d),          b - d,                   i * (two - b - d),
        -(two + b + d),        i * (b - d),             i * (two - b - d),       -b + d,
    ];
    let m = DMatrix::from_row_slice(4, 4, &entries) * Complex64::new(0.25, 0.0);
    ModeUnitary::from_matrix_unchecked(m)
}

/// Identity on `m` modes with `e^{i phi}` on `mode`.
pub fn build_phase_shifter(m: usize, mode: usize, phi: f64) -> Result<ModeUnitary> {
    if mode >= m {
        return Err(Error::ModeIndex { index: mode, modes: m });
    }
    let mut u = DMatrix::identity(m, m);
    u[(mode, mode)] = cis(phi);
    Ok(ModeUnitary::from_matrix_unchecked(u))
}

/// Feedback-dependent evolution layer acting after the encoding stage.
pub fn build_evolution_unitary(phi_d: f64, phi_4: f64) -> ModeUnitary {
    let i = Complex64::new(0.0, 1.0);
    let one = Complex64::new(1.0, 0.0);
    let d = cis(phi_d);
    let f = cis(phi_4);
    let df = cis(phi_d + phi_4);

    #[rustfmt::skip]
    let entries = [
        df,      i * f, i,    -one,
        i * df,  -f,    one,  i,
        i * d,   one,   -one, i,
        -d,      i,     i,    one,
    ];
    ModeUnitary::from_matrix_unchecked(
        DMatrix::from_row_slice(4, 4, &entries) * Complex64::new(0.5, 0.0),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// Symmetric 50:50 coupler `(1/sqrt 2) [[1, i], [i, 1]]`.
    BeamSplitter,
    PhaseShifter,
    Swap,
}

/// A gate phase: either a literal value or the name of a circuit phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseValue {
    Fixed(f64),
    Named(String),
}

impl PhaseValue {
    fn resolve(&self, phases: &CircuitPhases) -> Result<f64> {
        match self {
            PhaseValue::Fixed(v) => Ok(*v),
            PhaseValue::Named(name) => phases.named(name),
        }
    }
}

/// One elementary gate record `{kind, modes, phase}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub kind: GateKind,
    pub modes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseValue>,
}

impl Gate {
    pub fn beam_splitter(a: usize, b: usize) -> Self {
        Self {
            kind: GateKind::BeamSplitter,
            modes: vec![a, b],
            phase: None,
        }
    }

    pub fn swap(a: usize, b: usize) -> Self {
        Self {
            kind: GateKind::Swap,
            modes: vec![a, b],
            phase: None,
        }
    }

    pub fn phase_shifter(mode: usize, phase: PhaseValue) -> Self {
        Self {
            kind: GateKind::PhaseShifter,
            modes: vec![mode],
            phase: Some(phase),
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        let arity = match self.kind {
            GateKind::PhaseShifter => 1,
            GateKind::BeamSplitter | GateKind::Swap => 2,
        };
        if self.modes.len() != arity {
            return Err(Error::Config(format!(
                "{:?} gate takes {arity} mode(s), got {}",
                self.kind,
                self.modes.len()
            )));
        }
        if let Some(&bad) = self.modes.iter().find(|&&x| x >= m) {
            return Err(Error::ModeIndex { index: bad, modes: m });
        }
        if arity == 2 && self.modes[0] == self.modes[1] {
            return Err(Error::Config(format!(
                "{:?} gate needs two distinct modes",
                self.kind
            )));
        }
        if self.kind == GateKind::PhaseShifter && self.phase.is_none() {
            return Err(Error::Config("phase shifter without a phase".into()));
        }
        Ok(())
    }

    /// Applies this gate to `u` from the left (`u <- G u`).
    fn apply(&self, u: &mut DMatrix<Complex64>, phases: &CircuitPhases) -> Result<()> {
        match self.kind {
            GateKind::PhaseShifter => {
                let phi = self.phase.as_ref().expect("validated").resolve(phases)?;
                let mut row = u.row_mut(self.modes[0]);
                row *= cis(phi);
            }
            GateKind::Swap => u.swap_rows(self.modes[0], self.modes[1]),
            GateKind::BeamSplitter => {
                let (a, b) = (self.modes[0], self.modes[1]);
                let t = Complex64::new(FRAC_1_SQRT_2, 0.0);
                let r = Complex64::new(0.0, FRAC_1_SQRT_2);
                for col in 0..u.ncols() {
                    let (xa, xb) = (u[(a, col)], u[(b, col)]);
                    u[(a, col)] = t * xa + r * xb;
                    u[(b, col)] = r * xa + t * xb;
                }
            }
        }
        Ok(())
    }
}

/// Ordered, non-empty gate sequence in signal propagation order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Gate>", into = "Vec<Gate>")]
pub struct GateList(Vec<Gate>);

impl GateList {
    pub fn new(gates: Vec<Gate>) -> Result<Self> {
        if gates.is_empty() {
            return Err(Error::Config("gate list must not be empty".into()));
        }
        Ok(Self(gates))
    }

    pub fn gates(&self) -> &[Gate] {
        &self.0
    }

    /// Smallest mode count that accommodates every gate.
    pub fn min_modes(&self) -> usize {
        self.0
            .iter()
            .flat_map(|g| g.modes.iter())
            .max()
            .map_or(1, |&x| x + 1)
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        self.0.iter().try_for_each(|g| g.validate(m))
    }
}

impl TryFrom<Vec<Gate>> for GateList {
    type Error = Error;
    fn try_from(gates: Vec<Gate>) -> Result<Self> {
        Self::new(gates)
    }
}

impl From<GateList> for Vec<Gate> {
    fn from(list: GateList) -> Self {
        list.0
    }
}

/// Product of the gates, first gate acting first. Named phases resolve to zero.
pub fn compose(gates: &GateList, m: usize) -> Result<ModeUnitary> {
    compose_with(gates, m, &CircuitPhases::default())
}

/// Like [`compose`], resolving named gate phases against `phases`.
pub fn compose_with(gates: &GateList, m: usize, phases: &CircuitPhases) -> Result<ModeUnitary> {
    gates.validate(m)?;
    let mut u = DMatrix::identity(m, m);
    for gate in gates.gates() {
        gate.apply(&mut u, phases)?;
    }
    ModeUnitary::new(u)
}

/// Which interferometer the reservoir drives.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "gates")]
pub enum CircuitModel {
    /// Closed-form four-mode chip transfer matrix.
    #[default]
    Canonical,
    /// Gate list whose named phases are driven by the reservoir.
    Gates(GateList),
}

impl CircuitModel {
    pub fn modes(&self) -> usize {
        match self {
            CircuitModel::Canonical => 4,
            CircuitModel::Gates(g) => g.min_modes().max(1),
        }
    }

    pub fn unitary(&self, phases: &CircuitPhases) -> Result<ModeUnitary> {
        match self {
            CircuitModel::Canonical => Ok(build_canonical_unitary(phases)),
            CircuitModel::Gates(g) => compose_with(g, self.modes(), phases),
        }
    }
}
