//! Dense symmetric eigendecomposition and Fock-cutoff convergence control.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::hamiltonian::{split_by_parity, Builder, HamiltonianMatrix, ModelParams, SectorMatrix};
use crate::spin::SpinSector;

/// Inputs whose transpose differs by more than this are rejected.
pub const SYMMETRY_TOL: f64 = 1e-13;

const QR_EPS: f64 = f64::EPSILON;

/// Eigenpairs sorted by ascending eigenvalue; column `i` of `vectors` pairs
/// with `values[i]`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Mismatch(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for c in 0..n {
        for r in 0..c {
            worst = worst.max((m[(r, c)] - m[(c, r)]).abs());
        }
    }
    if worst > SYMMETRY_TOL {
        return Err(Error::NonSymmetric(worst));
    }
    Ok(())
}

fn iteration_cap(n: usize) -> usize {
    1000 + 100 * n
}

pub fn eig_symmetric(m: &DMatrix<f64>) -> Result<Eigen> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Eigen { values: Vec::new(), vectors: DMatrix::zeros(0, 0) });
    }
    let cap = iteration_cap(n);
    let eig = SymmetricEigen::try_new(m.clone(), QR_EPS, cap).ok_or(Error::EigenNoConvergence(cap))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigen { values, vectors })
}

/// Ascending eigenvalues only.
pub fn eigenvalues_symmetric(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenvalues (and optionally eigenvectors) of one parity sector.
#[derive(Clone, Debug)]
pub struct SectorSpectrum {
    pub parity: i8,
    pub eigenvalues: Vec<f64>,
    /// Full-basis row of each sector basis vector.
    pub rows: Vec<usize>,
    pub eigenvectors: Option<DMatrix<f64>>,
}

fn solve_sector(sector: &SectorMatrix, keep_vectors: bool) -> Result<SectorSpectrum> {
    let (eigenvalues, eigenvectors) = if keep_vectors {
        let e = eig_symmetric(&sector.matrix)?;
        (e.values, Some(e.vectors))
    } else {
        (eigenvalues_symmetric(&sector.matrix)?, None)
    };
    Ok(SectorSpectrum { parity: sector.parity, eigenvalues, rows: sector.rows.clone(), eigenvectors })
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// All levels of the truncated problem, ascending.
    pub eigenvalues: Vec<f64>,
    /// Parity label of each entry of `eigenvalues`.
    pub parity: Vec<i8>,
    /// Full-basis eigenvectors as columns, same order as `eigenvalues`.
    pub eigenvectors: Option<DMatrix<f64>>,
    pub spin: SpinSector,
    pub n_max_used: usize,
    pub converged: bool,
    /// Largest change of a watched level over the last cutoff doubling.
    pub max_shift: f64,
}

impl Spectrum {
    /// Ascending levels of one parity sector.
    pub fn sector(&self, parity: i8) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(&self.parity)
            .filter(|(_, &p)| p == parity)
            .map(|(&e, _)| e)
            .collect()
    }

    pub fn lowest_in_sector(&self, parity: i8, count: usize) -> Vec<f64> {
        let mut s = self.sector(parity);
        s.truncate(count);
        s
    }

    pub fn lowest(&self, count: usize) -> Vec<f64> {
        self.eigenvalues.iter().take(count).copied().collect()
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Solve both parity sectors of an assembled Hamiltonian.
pub fn solve_sectors(
    h: &HamiltonianMatrix,
    keep_vectors: bool,
    exec: Execution,
) -> Result<[SectorSpectrum; 2]> {
    let split = split_by_parity(h)?;
    let (even, odd) = exec::join(
        exec,
        || solve_sector(&split.even, keep_vectors),
        || solve_sector(&split.odd, keep_vectors),
    );
    Ok([even?, odd?])
}

fn merge(h: &HamiltonianMatrix, sectors: &[SectorSpectrum; 2]) -> (Vec<f64>, Vec<i8>, Option<DMatrix<f64>>) {
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(h.dim());
    for (s, sec) in sectors.iter().enumerate() {
        for (i, &e) in sec.eigenvalues.iter().enumerate() {
            entries.push((e, s, i));
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let values = entries.iter().map(|e| e.0).collect();
    let parity = entries.iter().map(|e| sectors[e.1].parity).collect();
    let vectors = if sectors.iter().all(|s| s.eigenvectors.is_some()) {
        let mut full = DMatrix::zeros(h.dim(), entries.len());
        for (col, &(_, s, i)) in entries.iter().enumerate() {
            let sec = &sectors[s];
            let v = sec.eigenvectors.as_ref().expect("checked above");
            for (a, &row) in sec.rows.iter().enumerate() {
                full[(row, col)] = v[(a, i)];
            }
        }
        Some(full)
    } else {
        None
    };
    (values, parity, vectors)
}

/// Spectrum of a single truncation, no convergence check.
pub fn spectrum_of(h: &HamiltonianMatrix, keep_vectors: bool, exec: Execution) -> Result<Spectrum> {
    let sectors = solve_sectors(h, keep_vectors, exec)?;
    let (eigenvalues, parity, eigenvectors) = merge(h, &sectors);
    Ok(Spectrum {
        eigenvalues,
        parity,
        eigenvectors,
        spin: h.spin(),
        n_max_used: h.n_max(),
        converged: false,
        max_shift: f64::INFINITY,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct ConvergenceOptions {
    /// Number of lowest levels watched in each parity sector.
    pub watch: usize,
    pub tol: f64,
    pub n_max_start: usize,
    pub n_max_cap: usize,
    pub keep_vectors: bool,
    pub exec: Execution,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            watch: 12,
            tol: 1e-8,
            n_max_start: 32,
            n_max_cap: 1024,
            keep_vectors: false,
            exec: Execution::default(),
        }
    }
}

fn watched_shift(a: &[SectorSpectrum; 2], b: &[SectorSpectrum; 2], watch: usize) -> f64 {
    let mut worst = 0.0f64;
    for (sa, sb) in a.iter().zip(b) {
        let count = watch.min(sa.eigenvalues.len()).min(sb.eigenvalues.len());
        for i in 0..count {
            worst = worst.max((sa.eigenvalues[i] - sb.eigenvalues[i]).abs());
        }
    }
    worst
}

/// Double the Fock cutoff until the lowest `watch` levels of each parity
/// sector move by at most `tol`. The reported levels come from the smaller
/// cutoff of the final pair; `converged` is false if the cap stops the search.
pub fn converged_spectrum(
    builder: Builder,
    params: &ModelParams,
    opts: &ConvergenceOptions,
) -> Result<Spectrum> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::Domain(format!("convergence tolerance must be > 0, got {}", opts.tol)));
    }
    if opts.watch == 0 {
        return Err(Error::Domain("at least one level must be watched".into()));
    }
    let mut n_max = opts.n_max_start.max(1);
    if n_max > opts.n_max_cap {
        return Err(Error::Domain(format!(
            "n_max_start = {} exceeds n_max_cap = {}",
            opts.n_max_start, opts.n_max_cap
        )));
    }
    let mut h = builder.build(params, n_max)?;
    let mut sectors = solve_sectors(&h, opts.keep_vectors, opts.exec)?;
    let mut max_shift = f64::INFINITY;
    let mut converged = false;

    while 2 * n_max <= opts.n_max_cap {
        let next_n = 2 * n_max;
        let next_h = builder.build(params, next_n)?;
        let next_sectors = solve_sectors(&next_h, opts.keep_vectors, opts.exec)?;
        max_shift = watched_shift(&sectors, &next_sectors, opts.watch);
        log::debug!("n_max {n_max} -> {next_n}: watched shift {max_shift:e}");
        if max_shift <= opts.tol {
            converged = true;
            break;
        }
        n_max = next_n;
        h = next_h;
        sectors = next_sectors;
    }

    let (eigenvalues, parity, eigenvectors) = merge(&h, &sectors);
    Ok(Spectrum {
        eigenvalues,
        parity,
        eigenvectors,
        spin: params.spin,
        n_max_used: n_max,
        converged,
        max_shift,
    })
}
