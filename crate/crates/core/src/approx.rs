//! Operator-method approximations built on the product basis.
//!
//! The zeroth order of the method is the Hamiltonian diagonal. Near the
//! weak-coupling degeneracies the diagonal states are replaced by correct
//! linear combinations inside an *excitation manifold*: for spin sector `J`
//! and excitation number `e`, the states
//!
//! ```text
//! |e - m> chi_{J, -J + m},   m = 0 ..= min(e, 2J)
//! ```
//!
//! which are degenerate at `f = 0`, `D = 1`. For a single two-level system
//! this is the pair `|n> up, |n+1> down` with `e = n + 1`; for two and three
//! systems it is the triple / quadruple of the 3x3 and 4x4 combination
//! matrices. All combinations are found by diagonalizing the manifold
//! submatrix; the closed-form pair roots are provided separately and checked
//! against it.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::eigensolve::eig_symmetric;
use crate::error::{Error, Result};
use crate::hamiltonian::{Builder, HamiltonianMatrix, ModelParams};
use crate::special_fn;
use crate::spin::{self, SpinSector};

/// Second-order denominators smaller than this are flagged, not summed.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Diag0,
    Pair0,
    Multi0,
    PairwiseQuad,
    SecondOrder,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Diag0, Method::Pair0, Method::Multi0, Method::PairwiseQuad, Method::SecondOrder];

    pub fn name(self) -> &'static str {
        match self {
            Method::Diag0 => "diag0",
            Method::Pair0 => "pair0",
            Method::Multi0 => "multi0",
            Method::PairwiseQuad => "pairwise_quad",
            Method::SecondOrder => "second_order",
        }
    }

    /// `pair0` is the closed two-state formula and needs `J = 1/2`.
    pub fn applies_to(self, spin: SpinSector) -> bool {
        match self {
            Method::Pair0 => spin == SpinSector::HALF,
            _ => true,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown approximation method '{s}'")))
    }
}

/// Level label. For `diag0` `n` is the photon number and `branch` the spin
/// index; for the manifold methods `n` is the excitation number and `branch`
/// the rank within the manifold (ascending energy).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelLabel {
    pub n: usize,
    pub branch: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproxLevel {
    pub label: LevelLabel,
    pub parity: i8,
    pub energy: f64,
    /// Combination coefficients in manifold order (`M` ascending).
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproxResult {
    pub method: Method,
    pub levels: Vec<ApproxLevel>,
}

impl ApproxResult {
    /// Ascending energies of one parity sector.
    pub fn sector(&self, parity: i8) -> Vec<f64> {
        let mut e: Vec<f64> =
            self.levels.iter().filter(|l| l.parity == parity).map(|l| l.energy).collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

/// Basis states `(photon number, spin index)` of excitation manifold `e`.
pub fn manifold_states(spin: SpinSector, excitation: usize) -> Vec<(usize, usize)> {
    let top = excitation.min(spin.twice_j() as usize);
    (0..=top).map(|m| (excitation - m, m)).collect()
}

/// Parity shared by every state of manifold `e`: `(-1)^(e + 2J)`.
pub fn manifold_parity(spin: SpinSector, excitation: usize) -> i8 {
    let (n, m) = manifold_states(spin, excitation)[0];
    spin::parity_label(n, m, spin)
}

fn coulomb_matrix(params: &ModelParams, n_max: usize) -> Result<HamiltonianMatrix> {
    let builder = if params.n_atoms == 1 { Builder::RabiCoulomb } else { Builder::DickeCoulomb };
    builder.build(params, n_max.max(1))
}

/// The manifold submatrix together with its full-basis rows.
pub fn manifold_submatrix(h: &HamiltonianMatrix, excitation: usize) -> Result<(Vec<usize>, DMatrix<f64>)> {
    if excitation > h.n_max() {
        return Err(Error::Mismatch(format!(
            "manifold e = {excitation} needs n_max >= {excitation}, matrix has {}",
            h.n_max()
        )));
    }
    let rows: Vec<usize> =
        manifold_states(h.spin(), excitation).iter().map(|&(n, m)| h.index(n, m)).collect();
    let sub = h.submatrix(&rows);
    Ok((rows, sub))
}

/// Eigenpairs of a manifold, ascending, with the sign fixed so that the
/// `M = -J` component is nonnegative.
fn manifold_eigen(h: &HamiltonianMatrix, excitation: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let (_, sub) = manifold_submatrix(h, excitation)?;
    let eig = eig_symmetric(&sub)?;
    Ok(eig
        .values
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let mut v: Vec<f64> = eig.vectors.column(i).iter().copied().collect();
            if v[0] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (e, v)
        })
        .collect())
}

/// Roots `(E-, E+)` of the 2x2 block `[[d1, h], [h, d2]]`.
pub fn pair_roots(d1: f64, d2: f64, h: f64) -> (f64, f64) {
    let mean = 0.5 * (d1 + d2);
    let half = 0.5 * ((d1 - d2).powi(2) + 4.0 * h * h).sqrt();
    (mean - half, mean + half)
}

/// Averaged two-state roots over consecutive manifold states:
/// `E_1 = E+_1`, `E_j = (E-_{j-1} + E+_j)/2`, `E_m = E-_{m-1}`.
/// The result is ordered as `E_1, E_2, ...`, i.e. from the top of the manifold down.
pub fn pairwise_quadratic_energies(sub: &DMatrix<f64>) -> Vec<f64> {
    let m = sub.nrows();
    if m == 1 {
        return vec![sub[(0, 0)]];
    }
    let roots: Vec<(f64, f64)> =
        (0..m - 1).map(|i| pair_roots(sub[(i, i)], sub[(i + 1, i + 1)], sub[(i, i + 1)])).collect();
    let mut out = Vec::with_capacity(m);
    out.push(roots[0].1);
    for j in 1..m - 1 {
        out.push(0.5 * (roots[j - 1].0 + roots[j].1));
    }
    out.push(roots[m - 2].0);
    out
}

fn require(params: &ModelParams, n_atoms: u32, twice_j: u32) -> Result<()> {
    if params.n_atoms != n_atoms || params.spin.twice_j() != twice_j {
        return Err(Error::InvalidParams(format!(
            "expected N = {n_atoms}, J = {}, got N = {}, J = {}",
            SpinSector::from_twice(twice_j),
            params.n_atoms,
            params.spin
        )));
    }
    Ok(())
}

/// Spin projection of a two-level system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwoLevel {
    Down,
    Up,
}

impl TwoLevel {
    fn index(self) -> usize {
        match self {
            TwoLevel::Down => 0,
            TwoLevel::Up => 1,
        }
    }
}

/// Zeroth-order Rabi energy `E_ns = H_{ns,ns}`, read from the Coulomb matrix.
pub fn qrm_zeroth_diag(params: &ModelParams, n: usize, s: TwoLevel) -> Result<f64> {
    require(params, 1, 1)?;
    let h = coulomb_matrix(params, n)?;
    Ok(h.element(n, s.index(), n, s.index()))
}

/// One branch of the Rabi two-state combination `A |n> up + B |n+1> down`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairLevel {
    pub energy: f64,
    pub a: f64,
    pub b: f64,
}

/// Branches `[-, +]` of the pair `|n> up, |n+1> down` from the 2x2 submatrix.
pub fn qrm_pair(params: &ModelParams, n: usize) -> Result<[PairLevel; 2]> {
    require(params, 1, 1)?;
    let h = coulomb_matrix(params, n + 1)?;
    let eig = manifold_eigen(&h, n + 1)?;
    // manifold order is (|n+1> down, |n> up), i.e. (B, A)
    let level = |i: usize| PairLevel { energy: eig[i].0, a: eig[i].1[1], b: eig[i].1[0] };
    Ok([level(0), level(1)])
}

/// Closed two-state formula with gap `M` and mixing ratio `gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairClosedForm {
    pub minus: PairLevel,
    pub plus: PairLevel,
    pub gap: f64,
}

pub fn qrm_pair_closed_form(params: &ModelParams, n: usize) -> Result<PairClosedForm> {
    require(params, 1, 1)?;
    let table = special_fn::build_overlap_table(params.coupling, n + 1)?;
    let delta = params.delta;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let (s_nn, s_next, s_mix) = (table.get(n, n), table.get(n + 1, n + 1), table.get(n, n + 1));

    let detuning = 1.0 - 0.5 * delta * sign * (s_nn - s_next);
    let gap = (detuning * detuning + delta * delta * s_mix * s_mix).sqrt();
    let mean = n as f64 + 0.5 + 0.25 * delta * sign * (s_nn + s_next);
    let up_diag = n as f64 + 0.5 * delta * sign * s_nn;
    let coupling = 0.5 * delta * sign * s_mix;

    let branch = |energy: f64| {
        let denom = up_diag - energy;
        if denom.abs() <= 1e-14 * (1.0 + energy.abs()) {
            // gamma diverges: the branch is the bare |n> up state
            return PairLevel { energy, a: 1.0, b: 0.0 };
        }
        let gamma = coupling / denom;
        let norm = (1.0 + gamma * gamma).sqrt();
        PairLevel { energy, a: -gamma / norm, b: 1.0 / norm }
    };
    Ok(PairClosedForm { minus: branch(mean - 0.5 * gap), plus: branch(mean + 0.5 * gap), gap })
}

/// A multi-state combination level with coefficients in manifold order.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiLevel {
    pub energy: f64,
    pub coefficients: Vec<f64>,
}

/// Diagonalize excitation manifold `e` of any sector.
pub fn manifold_levels(params: &ModelParams, excitation: usize) -> Result<Vec<MultiLevel>> {
    let h = coulomb_matrix(params, excitation)?;
    Ok(manifold_eigen(&h, excitation)?
        .into_iter()
        .map(|(energy, coefficients)| MultiLevel { energy, coefficients })
        .collect())
}

pub fn manifold_pairwise_quad(params: &ModelParams, excitation: usize) -> Result<Vec<f64>> {
    let h = coulomb_matrix(params, excitation)?;
    let (_, sub) = manifold_submatrix(&h, excitation)?;
    Ok(pairwise_quadratic_energies(&sub))
}

/// Two-system `J = 1` diagonal energy `E_{n1M}`, `m_proj` in `-1..=1`.
pub fn dicke2_zeroth(params: &ModelParams, n: usize, m_proj: i32) -> Result<f64> {
    require(params, 2, 2)?;
    if !(-1..=1).contains(&m_proj) {
        return Err(Error::Domain(format!("M = {m_proj} outside -1..=1")));
    }
    let h = coulomb_matrix(params, n)?;
    let m = (m_proj + 1) as usize;
    Ok(h.element(n, m, n, m))
}

/// Combinations of `|n,-1>, |n-1,0>, |n-2,1>` (fewer states for `n < 2`).
pub fn dicke2_multi(params: &ModelParams, n: usize) -> Result<Vec<MultiLevel>> {
    require(params, 2, 2)?;
    manifold_levels(params, n)
}

pub fn dicke2_pairwise_quad(params: &ModelParams, n: usize) -> Result<[f64; 3]> {
    require(params, 2, 2)?;
    if n < 2 {
        return Err(Error::Domain(format!("three-state quadratics need n >= 2, got {n}")));
    }
    let e = manifold_pairwise_quad(params, n)?;
    Ok([e[0], e[1], e[2]])
}

/// Combinations of `|n,-3/2>, ..., |n-3,3/2>` (fewer states for `n < 3`).
pub fn dicke3_multi(params: &ModelParams, n: usize) -> Result<Vec<MultiLevel>> {
    require(params, 3, 3)?;
    manifold_levels(params, n)
}

pub fn dicke3_pairwise_quad(params: &ModelParams, n: usize) -> Result<[f64; 4]> {
    require(params, 3, 3)?;
    if n < 3 {
        return Err(Error::Domain(format!("four-state quadratics need n >= 3, got {n}")));
    }
    let e = manifold_pairwise_quad(params, n)?;
    Ok([e[0], e[1], e[2], e[3]])
}

/// A second-order term skipped because its denominator nearly vanished.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlaggedTerm {
    pub n: usize,
    pub m_index: usize,
    pub numerator: f64,
    pub denominator: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrder {
    pub zeroth: f64,
    pub correction: f64,
    pub energy: f64,
    /// Largest term contributed by the last Fock block.
    pub tail_estimate: f64,
    pub flagged: Vec<FlaggedTerm>,
}

struct Accumulator {
    sum: f64,
    tail: f64,
    flagged: Vec<FlaggedTerm>,
}

impl Accumulator {
    fn new() -> Self {
        Self { sum: 0.0, tail: 0.0, flagged: Vec::new() }
    }

    fn add(&mut self, h: &HamiltonianMatrix, row: usize, numerator: f64, denominator: f64) {
        if numerator == 0.0 {
            return;
        }
        let (n, m_index) = h.state(row);
        if denominator.abs() < DEGENERATE_DENOMINATOR {
            self.flagged.push(FlaggedTerm { n, m_index, numerator, denominator });
            return;
        }
        let term = numerator / denominator;
        self.sum += term;
        if n == h.n_max() {
            self.tail = self.tail.max(term.abs());
        }
    }
}

/// Ground state `|0> chi_{J,-J}` plus its second-order correction, summed
/// over every other basis state of `h`.
pub fn second_order_ground(h: &HamiltonianMatrix) -> SecondOrder {
    let ground = h.index(0, 0);
    let e0 = h.get(ground, ground);
    let mut acc = Accumulator::new();
    for mu in 0..h.dim() {
        if mu == ground {
            continue;
        }
        let v = h.get(mu, ground);
        acc.add(h, mu, -(v * v), h.get(mu, mu) - e0);
    }
    SecondOrder {
        zeroth: e0,
        correction: acc.sum,
        energy: e0 + acc.sum,
        tail_estimate: acc.tail,
        flagged: acc.flagged,
    }
}

pub fn qrm_second_order_ground(params: &ModelParams, k_max: usize) -> Result<SecondOrder> {
    require(params, 1, 1)?;
    let h = coulomb_matrix(params, k_max.max(1))?;
    Ok(second_order_ground(&h))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Minus,
    Plus,
}

/// Excited pair level `(n, branch)` of a `J = 1/2` matrix with its
/// second-order correction.
pub fn second_order_pair(h: &HamiltonianMatrix, n: usize, branch: Branch) -> Result<SecondOrder> {
    if h.spin() != SpinSector::HALF {
        return Err(Error::InvalidParams("pair corrections need J = 1/2".into()));
    }
    if n + 1 > h.n_max() {
        return Err(Error::Mismatch(format!("pair n = {n} needs k_max >= {}", n + 1)));
    }
    let eig = manifold_eigen(h, n + 1)?;
    let (this, other) = match branch {
        Branch::Minus => (&eig[0], &eig[1]),
        Branch::Plus => (&eig[1], &eig[0]),
    };
    let nu_up = h.index(n, 1);
    let nu_down = h.index(n + 1, 0);
    let (a_r, b_r) = (this.1[1], this.1[0]);
    let (a_o, b_o) = (other.1[1], other.1[0]);

    let f_nr = a_o * a_r * h.get(nu_up, nu_up)
        + a_o * b_r * h.get(nu_up, nu_down)
        + b_o * a_r * h.get(nu_down, nu_up)
        + b_o * b_r * h.get(nu_down, nu_down);

    let e0 = this.0;
    let mut acc = Accumulator::new();
    acc.add(h, nu_up, f_nr * f_nr, e0 - other.0);
    for mu in 0..h.dim() {
        if mu == nu_up || mu == nu_down {
            continue;
        }
        let mixed = a_r * h.get(mu, nu_up) + b_r * h.get(mu, nu_down);
        acc.add(h, mu, mixed * mixed, e0 - h.get(mu, mu));
    }
    Ok(SecondOrder {
        zeroth: e0,
        correction: acc.sum,
        energy: e0 + acc.sum,
        tail_estimate: acc.tail,
        flagged: acc.flagged,
    })
}

pub fn qrm_second_order_excited(
    params: &ModelParams,
    n: usize,
    branch: Branch,
    k_max: usize,
) -> Result<SecondOrder> {
    require(params, 1, 1)?;
    let h = coulomb_matrix(params, k_max.max(n + 1))?;
    second_order_pair(&h, n, branch)
}

/// Approximate levels of one method for the sector in `params`, keeping the
/// `count` lowest of each parity. `k_max` is the Fock cutoff used for
/// second-order sums.
pub fn approximate_spectrum(
    params: &ModelParams,
    method: Method,
    count: usize,
    k_max: usize,
) -> Result<ApproxResult> {
    if !method.applies_to(params.spin) {
        return Err(Error::InvalidParams(format!("{method} needs J = 1/2, got J = {}", params.spin)));
    }
    let spin = params.spin;
    // enough manifolds that each parity has `count` members with margin
    let top = 2 * count + 2 * spin.twice_j() as usize + 4;
    let cutoff = top.max(k_max);
    let h = coulomb_matrix(params, cutoff)?;
    let mut levels = Vec::new();
    match method {
        Method::Diag0 => {
            for row in 0..h.dim() {
                let (n, m) = h.state(row);
                if n > top {
                    continue;
                }
                levels.push(ApproxLevel {
                    label: LevelLabel { n, branch: m },
                    parity: h.parity()[row],
                    energy: h.get(row, row),
                    coefficients: None,
                });
            }
        }
        Method::Pair0 => {
            levels.push(single_state_level(&h, 0));
            for n in 0..top {
                let cf = qrm_pair_closed_form_from(&h, n);
                let parity = manifold_parity(spin, n + 1);
                for (branch, lvl) in [cf.minus, cf.plus].into_iter().enumerate() {
                    levels.push(ApproxLevel {
                        label: LevelLabel { n: n + 1, branch },
                        parity,
                        energy: lvl.energy,
                        coefficients: Some(vec![lvl.b, lvl.a]),
                    });
                }
            }
        }
        Method::Multi0 => {
            for e in 0..=top {
                let parity = manifold_parity(spin, e);
                for (branch, (energy, v)) in manifold_eigen(&h, e)?.into_iter().enumerate() {
                    levels.push(ApproxLevel {
                        label: LevelLabel { n: e, branch },
                        parity,
                        energy,
                        coefficients: Some(v),
                    });
                }
            }
        }
        Method::PairwiseQuad => {
            for e in 0..=top {
                let parity = manifold_parity(spin, e);
                let (_, sub) = manifold_submatrix(&h, e)?;
                let mut energies = pairwise_quadratic_energies(&sub);
                energies.sort_by(f64::total_cmp);
                for (branch, energy) in energies.into_iter().enumerate() {
                    levels.push(ApproxLevel {
                        label: LevelLabel { n: e, branch },
                        parity,
                        energy,
                        coefficients: None,
                    });
                }
            }
        }
        Method::SecondOrder => {
            let g = second_order_ground(&h);
            levels.push(ApproxLevel { energy: g.energy, ..single_state_level(&h, 0) });
            if spin == SpinSector::HALF {
                for n in 0..top {
                    let parity = manifold_parity(spin, n + 1);
                    for (branch, b) in [Branch::Minus, Branch::Plus].into_iter().enumerate() {
                        let so = second_order_pair(&h, n, b)?;
                        levels.push(ApproxLevel {
                            label: LevelLabel { n: n + 1, branch },
                            parity,
                            energy: so.energy,
                            coefficients: None,
                        });
                    }
                }
            }
        }
    }
    Ok(ApproxResult { method, levels: keep_lowest(levels, count) })
}

fn single_state_level(h: &HamiltonianMatrix, excitation: usize) -> ApproxLevel {
    let row = h.index(excitation, 0);
    ApproxLevel {
        label: LevelLabel { n: excitation, branch: 0 },
        parity: h.parity()[row],
        energy: h.get(row, row),
        coefficients: Some(vec![1.0]),
    }
}

fn qrm_pair_closed_form_from(h: &HamiltonianMatrix, n: usize) -> PairClosedForm {
    let params = ModelParams { n_atoms: 1, ..*h.params() };
    // the J = 1/2 matrix entries do not depend on N, so the N = 1 path applies
    qrm_pair_closed_form(&params, n).expect("validated J = 1/2 params")
}

fn keep_lowest(mut levels: Vec<ApproxLevel>, count: usize) -> Vec<ApproxLevel> {
    levels.sort_by(|a, b| b.parity.cmp(&a.parity).then(a.energy.total_cmp(&b.energy)));
    let mut out = Vec::new();
    for parity in [1i8, -1] {
        out.extend(levels.iter().filter(|l| l.parity == parity).take(count).cloned());
    }
    out
}
