//! Truncated Hamiltonian matrices in the product basis `|n> chi_{J,M}`.
//!
//! Rows are ordered Fock-major, spin-minor: `row = n * (2J + 1) + m_index`.
//! Three builders are provided:
//!
//! * the dipole-gauge Rabi Hamiltonian `a^+a + (D/2) s_z + f (a + a^+) s_x + f^2`,
//! * the Coulomb-gauge Rabi Hamiltonian assembled from its Fock-block formula
//!   `H_kn = n d_kn I + (D/2) S_kn [p s_z + q (-i s_y)]`,
//! * the Coulomb-gauge Dicke Hamiltonian with collective spin matrices,
//!   `H_kn = n d_kn I + D S_kn [p J_z + q (-i J_y)]`,
//!
//! where `p = ((-1)^n + (-1)^k)/2` and `q = ((-1)^n - (-1)^k)/2`.

use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::special_fn::{self, OverlapTable};
use crate::spin::{self, SpinSector};

/// Physical inputs in units of the field frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub n_atoms: u32,
    /// Two-level transition frequency.
    pub delta: f64,
    /// Dimensionless coupling `f`.
    pub coupling: f64,
    pub spin: SpinSector,
}

impl ModelParams {
    /// Parameters in the maximal spin sector `J = N/2`.
    pub fn new(n_atoms: u32, delta: f64, coupling: f64) -> Result<Self> {
        Self::with_spin(n_atoms, delta, coupling, SpinSector::maximal(n_atoms))
    }

    pub fn rabi(delta: f64, coupling: f64) -> Result<Self> {
        Self::new(1, delta, coupling)
    }

    pub fn with_spin(n_atoms: u32, delta: f64, coupling: f64, spin: SpinSector) -> Result<Self> {
        let p = Self { n_atoms, delta, coupling, spin };
        p.validate()?;
        Ok(p)
    }

    pub fn at_coupling(&self, coupling: f64) -> Result<Self> {
        Self::with_spin(self.n_atoms, self.delta, coupling, self.spin)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::InvalidParams("atom count must be at least 1".into()));
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::InvalidParams(format!("delta must be > 0, got {}", self.delta)));
        }
        if !self.coupling.is_finite() || self.coupling < 0.0 {
            return Err(Error::InvalidParams(format!("coupling must be >= 0, got {}", self.coupling)));
        }
        if self.spin.multiplicity(self.n_atoms) == 0 {
            return Err(Error::InvalidParams(format!(
                "J = {} does not occur for N = {} two-level systems",
                self.spin, self.n_atoms
            )));
        }
        Ok(())
    }

    fn require_single_atom(&self) -> Result<()> {
        if self.n_atoms != 1 {
            return Err(Error::InvalidParams(format!(
                "the Rabi builders need N = 1, got N = {}",
                self.n_atoms
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    Dipole,
    Coulomb,
}

/// Which Hamiltonian to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builder {
    RabiDipole,
    RabiCoulomb,
    DickeCoulomb,
}

impl Builder {
    pub fn build(self, params: &ModelParams, n_max: usize) -> Result<HamiltonianMatrix> {
        match self {
            Builder::RabiDipole => build_qrm_dipole(params, n_max),
            Builder::RabiCoulomb => {
                let table = special_fn::build_overlap_table(params.coupling, n_max.max(1))?;
                build_qrm_coulomb(params, n_max, &table)
            }
            Builder::DickeCoulomb => {
                let table = special_fn::build_overlap_table(params.coupling, n_max.max(1))?;
                build_dicke_coulomb(params, n_max, &table)
            }
        }
    }
}

/// Dense real symmetric Hamiltonian with its basis bookkeeping.
#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    matrix: DMatrix<f64>,
    parity: Vec<i8>,
    gauge: Gauge,
    params: ModelParams,
    n_max: usize,
}

impl HamiltonianMatrix {
    fn zeros(params: &ModelParams, n_max: usize, gauge: Gauge) -> Self {
        let s = params.spin;
        let dim = (n_max + 1) * s.dim();
        let parity = (0..dim).map(|r| spin::parity_label(r / s.dim(), r % s.dim(), s)).collect();
        Self { matrix: DMatrix::zeros(dim, dim), parity, gauge, params: *params, n_max }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn spin(&self) -> SpinSector {
        self.params.spin
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn parity(&self) -> &[i8] {
        &self.parity
    }

    #[inline]
    pub fn index(&self, n: usize, m_index: usize) -> usize {
        n * self.params.spin.dim() + m_index
    }

    /// Inverse of [`Self::index`].
    #[inline]
    pub fn state(&self, row: usize) -> (usize, usize) {
        let d = self.params.spin.dim();
        (row / d, row % d)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix[(row, col)]
    }

    /// Element between `|k> chi_i` and `|n> chi_j`.
    pub fn element(&self, k: usize, i: usize, n: usize, j: usize) -> f64 {
        self.matrix[(self.index(k, i), self.index(n, j))]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    /// `max |H - H^T|`; zero for every builder here.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for c in 0..n {
            for r in 0..c {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)]).abs());
            }
        }
        worst
    }

    /// Largest magnitude coupling two rows of opposite parity.
    pub fn cross_parity_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for c in 0..n {
            for r in 0..n {
                if self.parity[r] != self.parity[c] {
                    worst = worst.max(self.matrix[(r, c)].abs());
                }
            }
        }
        worst
    }

    /// Extract the principal submatrix on `rows` (full-basis indices).
    pub fn submatrix(&self, rows: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows.len(), |a, b| self.matrix[(rows[a], rows[b])])
    }

    /// Nonzero entries as `row,col,value` lines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "row,col,value")?;
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                let v = self.matrix[(r, c)];
                if v != 0.0 {
                    writeln!(out, "{r},{c},{v:e}")?;
                }
            }
        }
        Ok(())
    }

    fn set_sym(&mut self, r: usize, c: usize, v: f64) {
        self.matrix[(r, c)] = v;
        self.matrix[(c, r)] = v;
    }
}

/// `(p, q)` weights of the cosh-like and sinh-like parts of block `(k, n)`.
#[inline]
fn block_weights(k: usize, n: usize) -> (f64, f64) {
    let sign_n = if n % 2 == 0 { 1.0 } else { -1.0 };
    if (k + n) % 2 == 0 {
        (sign_n, 0.0)
    } else {
        (0.0, sign_n)
    }
}

fn check_table(params: &ModelParams, n_max: usize, table: &OverlapTable) -> Result<()> {
    if table.coupling() != params.coupling {
        return Err(Error::Mismatch(format!(
            "overlap table built for f = {} but params have f = {}",
            table.coupling(),
            params.coupling
        )));
    }
    if table.size() < n_max {
        return Err(Error::Mismatch(format!(
            "overlap table covers n <= {} but n_max = {n_max}",
            table.size()
        )));
    }
    Ok(())
}

pub fn build_qrm_dipole(params: &ModelParams, n_max: usize) -> Result<HamiltonianMatrix> {
    params.validate()?;
    params.require_single_atom()?;
    let mut h = HamiltonianMatrix::zeros(params, n_max, Gauge::Dipole);
    let (d, f) = (params.delta, params.coupling);
    let shift = f * f;
    for n in 0..=n_max {
        let down = h.index(n, 0);
        let up = h.index(n, 1);
        h.set_sym(down, down, n as f64 - 0.5 * d + shift);
        h.set_sym(up, up, n as f64 + 0.5 * d + shift);
        if n < n_max {
            let g = f * ((n + 1) as f64).sqrt();
            // f (a + a^+) s_x: photon number changes by one, spin flips
            h.set_sym(h.index(n + 1, 1), down, g);
            h.set_sym(h.index(n + 1, 0), up, g);
        }
    }
    Ok(h)
}

pub fn build_qrm_coulomb(
    params: &ModelParams,
    n_max: usize,
    table: &OverlapTable,
) -> Result<HamiltonianMatrix> {
    params.validate()?;
    params.require_single_atom()?;
    check_table(params, n_max, table)?;
    // Pauli matrices in the (down, up) order
    let sigma_z = [[-1.0, 0.0], [0.0, 1.0]];
    let minus_i_sigma_y = [[0.0, 1.0], [-1.0, 0.0]];
    let half_delta = 0.5 * params.delta;
    let mut h = HamiltonianMatrix::zeros(params, n_max, Gauge::Coulomb);
    for k in 0..=n_max {
        for n in k..=n_max {
            let (p, q) = block_weights(k, n);
            let s = table.get(k, n);
            for i in 0..2 {
                for j in 0..2 {
                    if k == n && j < i {
                        continue;
                    }
                    let mut v = half_delta * s * (p * sigma_z[i][j] + q * minus_i_sigma_y[i][j]);
                    if k == n && i == j {
                        v += n as f64;
                    }
                    let (r, c) = (h.index(k, i), h.index(n, j));
                    h.set_sym(r, c, v);
                }
            }
        }
    }
    Ok(h)
}

pub fn build_dicke_coulomb(
    params: &ModelParams,
    n_max: usize,
    table: &OverlapTable,
) -> Result<HamiltonianMatrix> {
    params.validate()?;
    check_table(params, n_max, table)?;
    let s = params.spin;
    let jz = spin::jz_matrix(s);
    let a = spin::minus_i_jy_matrix(s);
    let d = s.dim();
    let mut h = HamiltonianMatrix::zeros(params, n_max, Gauge::Coulomb);
    for k in 0..=n_max {
        for n in k..=n_max {
            let (p, q) = block_weights(k, n);
            let coeff = params.delta * table.get(k, n);
            for i in 0..d {
                for j in 0..d {
                    if k == n && j < i {
                        continue;
                    }
                    let spin_part = p * jz[(i, j)] + q * a[(i, j)];
                    let mut v = coeff * spin_part;
                    if k == n && i == j {
                        v += n as f64;
                    }
                    let (r, c) = (h.index(k, i), h.index(n, j));
                    h.set_sym(r, c, v);
                }
            }
        }
    }
    Ok(h)
}

/// One parity block of a Hamiltonian.
#[derive(Clone, Debug)]
pub struct SectorMatrix {
    pub parity: i8,
    /// Full-basis row index of each sector row.
    pub rows: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct ParitySplit {
    pub even: SectorMatrix,
    pub odd: SectorMatrix,
    /// Max |entry| between the two sectors; always zero on success.
    pub cross_residual: f64,
}

impl ParitySplit {
    pub fn sectors(&self) -> [&SectorMatrix; 2] {
        [&self.even, &self.odd]
    }
}

pub fn split_by_parity(h: &HamiltonianMatrix) -> Result<ParitySplit> {
    let residual = h.cross_parity_residual();
    if residual != 0.0 {
        return Err(Error::Consistency(format!(
            "Hamiltonian couples opposite parity sectors (max entry {residual:e})"
        )));
    }
    let sector = |parity: i8| {
        let rows: Vec<usize> = (0..h.dim()).filter(|&r| h.parity[r] == parity).collect();
        let matrix = h.submatrix(&rows);
        SectorMatrix { parity, rows, matrix }
    };
    Ok(ParitySplit { even: sector(1), odd: sector(-1), cross_residual: residual })
}
