//! Collective spin operators in a fixed total-spin sector.
//!
//! Only real matrices are built: `J_z` and `-i J_y`, which keeps every
//! Hamiltonian real symmetric. Basis order is `M = -J, -J+1, ..., +J`, so the
//! spin-down state of a single two-level system sits at index 0.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A total-spin sector, stored as `2J` to keep half-integers exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinSector {
    twice_j: u32,
}

impl SpinSector {
    pub const HALF: SpinSector = SpinSector { twice_j: 1 };

    pub fn from_twice(twice_j: u32) -> Self {
        Self { twice_j }
    }

    /// Parse a real `J` that must be a nonnegative multiple of 1/2.
    pub fn from_j(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !twice.is_finite() || twice < 0.0 || (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("J = {j} is not a nonnegative half-integer")));
        }
        Ok(Self { twice_j: twice.round() as u32 })
    }

    /// Maximal sector `J = N/2` of `N` two-level systems.
    pub fn maximal(n_atoms: u32) -> Self {
        Self { twice_j: n_atoms }
    }

    pub fn twice_j(self) -> u32 {
        self.twice_j
    }

    pub fn j(self) -> f64 {
        f64::from(self.twice_j) / 2.0
    }

    pub fn dim(self) -> usize {
        self.twice_j as usize + 1
    }

    /// Magnetic quantum number of basis index `m_index`.
    pub fn m(self, m_index: usize) -> f64 {
        m_index as f64 - self.j()
    }

    /// How many times this sector occurs in the decomposition of `n_atoms`
    /// spin-1/2 systems: `C(N, N/2-J) - C(N, N/2-J-1)`. Zero if it does not occur.
    pub fn multiplicity(self, n_atoms: u32) -> u64 {
        if self.twice_j > n_atoms || (n_atoms - self.twice_j) % 2 != 0 {
            return 0;
        }
        let lower = (n_atoms - self.twice_j) / 2;
        let c = |r: u32| -> u64 {
            let mut acc: u128 = 1;
            for i in 0..r {
                acc = acc * u128::from(n_atoms - i) / u128::from(i + 1);
            }
            acc as u64
        };
        if lower == 0 {
            1
        } else {
            c(lower) - c(lower - 1)
        }
    }

    /// Ladder matrix element `<M+1| J_+ |M>` with `M = m(m_index)`.
    fn raise_element(self, m_index: usize) -> f64 {
        let j = self.j();
        let m = self.m(m_index);
        (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
    }
}

impl std::fmt::Display for SpinSector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice_j % 2 == 0 {
            write!(f, "{}", self.twice_j / 2)
        } else {
            write!(f, "{}/2", self.twice_j)
        }
    }
}

pub fn jz_matrix(spin: SpinSector) -> DMatrix<f64> {
    DMatrix::from_fn(spin.dim(), spin.dim(), |r, c| if r == c { spin.m(r) } else { 0.0 })
}

/// Real antisymmetric matrix `-i J_y = (J_- - J_+)/2`.
pub fn minus_i_jy_matrix(spin: SpinSector) -> DMatrix<f64> {
    let d = spin.dim();
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d.saturating_sub(1) {
        let e = 0.5 * spin.raise_element(i);
        // <M| J_- |M+1> sits above the diagonal, <M+1| J_+ |M> below it
        out[(i, i + 1)] = e;
        out[(i + 1, i)] = -e;
    }
    out
}

/// `J_x = (J_+ + J_-)/2`; real symmetric. Not needed by the Hamiltonians,
/// kept for algebraic checks.
pub fn jx_matrix(spin: SpinSector) -> DMatrix<f64> {
    let d = spin.dim();
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d.saturating_sub(1) {
        let e = 0.5 * spin.raise_element(i);
        out[(i, i + 1)] = e;
        out[(i + 1, i)] = e;
    }
    out
}

/// Eigenvalue of the combined parity `exp(i pi (J_z + J)) exp(i pi a^+ a)`
/// on `|n> chi_{J,M}`, normalised so that `|0> chi_up` of a single two-level
/// system has parity +1: `(-1)^(n + J - M)`.
pub fn parity_label(n: usize, m_index: usize, spin: SpinSector) -> i8 {
    let j_minus_m = spin.twice_j as usize - m_index;
    if (n + j_minus_m) % 2 == 0 {
        1
    } else {
        -1
    }
}
