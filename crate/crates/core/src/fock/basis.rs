use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Photon counts per optical mode, e.g. `|1 0 0 1>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OccupationState(Vec<u8>);

impl OccupationState {
    pub fn new(occupations: Vec<u8>) -> Self {
        Self(occupations)
    }

    /// Occupation state obtained by placing one photon in each listed mode.
    pub fn from_modes(modes: usize, photon_modes: &[usize]) -> Result<Self> {
        let mut occ = vec![0u8; modes];
        for &mode in photon_modes {
            if mode >= modes {
                return Err(Error::ModeIndex { index: mode, modes });
            }
            occ[mode] += 1;
        }
        Ok(Self(occ))
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn photons(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }

    pub fn occupations(&self) -> &[u8] {
        &self.0
    }

    /// Mode list with each mode repeated by its occupation (ascending).
    pub fn mode_list(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(mode, &count)| std::iter::repeat_n(mode, count as usize))
            .collect()
    }

    /// Product of the factorials of the occupations.
    pub fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&c| factorial(c as usize)).product()
    }

    /// Compact label such as `"1001"`, used for CSV column names.
    pub fn label(&self) -> String {
        if self.0.iter().all(|&c| c < 10) {
            self.0.iter().map(|c| char::from(b'0' + c)).collect()
        } else {
            self.0
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(".")
        }
    }
}

impl fmt::Display for OccupationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ">")
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All occupation states of `n` photons over `m` modes in canonical order.
///
/// The canonical order is lexicographically descending on the occupation
/// vector, so for two photons in four modes the outcome indices run
/// `2000, 1100, 1010, 1001, 0200, 0110, 0101, 0020, 0011, 0002`.
#[derive(Clone, Debug)]
pub struct FockBasis {
    modes: usize,
    photons: usize,
    states: Vec<OccupationState>,
    index: HashMap<OccupationState, usize>,
}

impl FockBasis {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[OccupationState] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &OccupationState {
        &self.states[idx]
    }

    pub fn index_of(&self, state: &OccupationState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn labels(&self) -> Vec<String> {
        self.states.iter().map(OccupationState::label).collect()
    }
}

/// Enumerates every weak composition of `n` into `m` parts.
pub fn enumerate_basis(m: usize, n: usize) -> FockBasis {
    assert!(m >= 1, "a Fock basis needs at least one mode");
    let mut states = Vec::with_capacity(binomial(n + m - 1, n));
    let mut current = vec![0u8; m];
    fill(&mut current, 0, n, &mut states);
    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    FockBasis {
        modes: m,
        photons: n,
        states,
        index,
    }
}

fn fill(current: &mut [u8], mode: usize, remaining: usize, out: &mut Vec<OccupationState>) {
    if mode + 1 == current.len() {
        current[mode] = remaining as u8;
        out.push(OccupationState(current.to_vec()));
        return;
    }
    for count in (0..=remaining).rev() {
        current[mode] = count as u8;
        fill(current, mode + 1, remaining - count, out);
    }
    current[mode] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(enumerate_basis(4, 1).len(), 4);
        assert_eq!(enumerate_basis(4, 2).len(), 10);
        assert_eq!(enumerate_basis(4, 3).len(), 20);
        assert_eq!(enumerate_basis(3, 0).len(), 1);
        for m in 1..6 {
            for n in 0..5 {
                assert_eq!(enumerate_basis(m, n).len(), binomial(n + m - 1, n));
            }
        }
    }

    #[test]
    fn canonical_order_is_descending() {
        let basis = enumerate_basis(4, 2);
        let labels = basis.labels();
        assert_eq!(
            labels,
            ["2000", "1100", "1010", "1001", "0200", "0110", "0101", "0020", "0011", "0002"]
        );
        for pair in basis.states().windows(2) {
            assert!(pair[0] > pair[1]);
        }
        for (i, s) in basis.states().iter().enumerate() {
            assert_eq!(basis.index_of(s), Some(i));
            assert_eq!(s.photons(), 2);
        }
    }

    #[test]
    fn occupation_helpers() {
        let s = OccupationState::from_modes(4, &[0, 3]).unwrap();
        assert_eq!(s.occupations(), &[1, 0, 0, 1]);
        assert_eq!(s.mode_list(), vec![0, 3]);
        assert_eq!(s.to_string(), "|1 0 0 1>");
        let b = OccupationState::new(vec![2, 0, 1]);
        assert_eq!(b.factorial_product(), 2.0);
        assert!(OccupationState::from_modes(4, &[4]).is_err());
    }
}
