//! Coupling sweeps and cross-checks: gauge equivalence, the large-N scaling
//! of Dicke spectra and the deep-strong-coupling ladder.

use crate::approx::{self, ApproxResult, Method};
use crate::eigensolve::{self, converged_spectrum, ConvergenceOptions, Spectrum};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::hamiltonian::{Builder, ModelParams};
use crate::spin::SpinSector;

/// `points` evenly spaced couplings from `f_min` to `f_max` inclusive.
pub fn linspace(f_min: f64, f_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![f_min],
        _ => {
            let step = (f_max - f_min) / (points - 1) as f64;
            (0..points)
                .map(|i| if i == points - 1 { f_max } else { f_min + step * i as f64 })
                .collect()
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("coupling grid is empty".into()));
    }
    if grid.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::Domain("coupling grid values must be finite and >= 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("coupling grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Coulomb-gauge builder appropriate for `params`.
pub fn coulomb_builder(params: &ModelParams) -> Builder {
    if params.n_atoms == 1 {
        Builder::RabiCoulomb
    } else {
        Builder::DickeCoulomb
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelError {
    pub method: Method,
    pub parity: i8,
    pub level_index: usize,
    pub numeric: f64,
    pub approx: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub coupling: f64,
    pub spectrum: Spectrum,
    pub approx: Vec<ApproxResult>,
    pub errors: Vec<LevelError>,
}

impl SweepPoint {
    pub fn max_error(&self, method: Method) -> Option<f64> {
        self.errors.iter().filter(|e| e.method == method).map(|e| e.abs_error).reduce(f64::max)
    }

    /// Error of the lowest level of the sector holding the ground state.
    pub fn ground_error(&self, method: Method) -> Option<f64> {
        let parity = self.spectrum.parity[0];
        self.errors
            .iter()
            .find(|e| e.method == method && e.parity == parity && e.level_index == 0)
            .map(|e| e.abs_error)
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    /// Lowest levels reported per parity sector.
    pub levels: usize,
    pub convergence: ConvergenceOptions,
    pub exec: Execution,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            methods: Vec::new(),
            levels: 8,
            convergence: ConvergenceOptions::default(),
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub params: ModelParams,
    pub f_grid: Vec<f64>,
    pub methods: Vec<Method>,
    pub levels: usize,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn unconverged_points(&self) -> Vec<f64> {
        self.points.iter().filter(|p| !p.spectrum.converged).map(|p| p.coupling).collect()
    }
}

fn level_errors(spectrum: &Spectrum, approx: &ApproxResult, levels: usize) -> Vec<LevelError> {
    let mut out = Vec::new();
    for parity in [1i8, -1] {
        let numeric = spectrum.lowest_in_sector(parity, levels);
        let approx_levels = approx.sector(parity);
        for (i, (&num, &app)) in numeric.iter().zip(&approx_levels).enumerate() {
            out.push(LevelError {
                method: approx.method,
                parity,
                level_index: i,
                numeric: num,
                approx: app,
                abs_error: (num - app).abs(),
            });
        }
    }
    out
}

fn sweep_point(params: &ModelParams, cfg: &SweepConfig, inner: Execution) -> Result<SweepPoint> {
    let opts = ConvergenceOptions {
        watch: cfg.levels.max(1),
        exec: inner,
        ..cfg.convergence
    };
    let spectrum = converged_spectrum(coulomb_builder(params), params, &opts)?;
    let mut approx = Vec::with_capacity(cfg.methods.len());
    let mut errors = Vec::new();
    for &method in &cfg.methods {
        let result = approx::approximate_spectrum(params, method, cfg.levels, spectrum.n_max_used)?;
        errors.extend(level_errors(&spectrum, &result, cfg.levels));
        approx.push(result);
    }
    Ok(SweepPoint { coupling: params.coupling, spectrum, approx, errors })
}

/// Converged numerics plus the requested approximations at every grid point.
/// Points run concurrently under [`Execution::Parallel`]; results stay in
/// grid order.
pub fn sweep(params: &ModelParams, f_grid: &[f64], cfg: &SweepConfig) -> Result<SweepResult> {
    check_grid(f_grid)?;
    for m in &cfg.methods {
        if !m.applies_to(params.spin) {
            return Err(Error::InvalidParams(format!(
                "method {m} does not apply to J = {}",
                params.spin
            )));
        }
    }
    let points = exec::map_slice(cfg.exec, f_grid, |&f| {
        let p = params.at_coupling(f)?;
        sweep_point(&p, cfg, Execution::Sequential)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        params: *params,
        f_grid: f_grid.to_vec(),
        methods: cfg.methods.clone(),
        levels: cfg.levels,
        points,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeReport {
    /// `(n_max, max deviation of the lowest levels)` along the schedule.
    pub schedule: Vec<(usize, f64)>,
}

impl GaugeReport {
    pub fn final_deviation(&self) -> f64 {
        self.schedule.last().map_or(f64::NAN, |s| s.1)
    }

    /// True if no step increases the deviation by more than `slack`.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.schedule.windows(2).all(|w| w[1].1 <= w[0].1 + slack)
    }
}

/// Compare the lowest `levels` eigenvalues of the dipole and Coulomb Rabi
/// Hamiltonians at each cutoff of `schedule`.
pub fn gauge_equivalence(
    params: &ModelParams,
    schedule: &[usize],
    levels: usize,
    exec: Execution,
) -> Result<GaugeReport> {
    if params.n_atoms != 1 {
        return Err(Error::InvalidParams("gauge comparison is defined for N = 1".into()));
    }
    let rows = exec::map_slice(exec, schedule, |&n_max| -> Result<(usize, f64)> {
        let dip = Builder::RabiDipole.build(params, n_max)?;
        let cou = Builder::RabiCoulomb.build(params, n_max)?;
        let a = eigensolve::spectrum_of(&dip, false, Execution::Sequential)?;
        let b = eigensolve::spectrum_of(&cou, false, Execution::Sequential)?;
        let dev = a
            .lowest(levels)
            .iter()
            .zip(b.lowest(levels))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        Ok((n_max, dev))
    });
    Ok(GaugeReport { schedule: rows.into_iter().collect::<Result<_>>()? })
}

/// Cutoffs `start, 2 start, 4 start, ...` up to `cap`.
pub fn doubling_schedule(start: usize, cap: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = start.max(1);
    while n <= cap {
        out.push(n);
        n *= 2;
    }
    out
}

/// How levels of the two atom numbers are paired in [`scaling_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelMap {
    /// Level `p` (ascending) of excitation manifold `e` for `N1` atoms against
    /// level `p` of manifold `(N2/N1) e` for `N2` atoms. Manifolds are counted
    /// off the ascending spectrum by their sizes `min(e, 2J) + 1`; exact at
    /// `f = 0` when `D = 1`.
    Manifold,
    /// Plain ascending index with strides: `E(N1, s1 n)` against
    /// `(N1/N2) E(N2, s2 n)`, `s1 / s2 = N2 / N1`. For `N1 = 10, N2 = 20`
    /// this is `E(10, 2n)` against `E(20, n)/2`.
    SortedIndex,
}

impl std::str::FromStr for LevelMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "manifold" => Ok(LevelMap::Manifold),
            "sorted" | "sorted_index" => Ok(LevelMap::SortedIndex),
            _ => Err(Error::Domain(format!("unknown level map '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingRow {
    pub coupling: f64,
    /// Level index in the `N1` spectrum (manifold map) or `n` (sorted map).
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_deviation: f64,
    pub rel_deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingTable {
    pub n1: u32,
    pub n2: u32,
    pub map: LevelMap,
    pub rows: Vec<ScalingRow>,
    pub unconverged: Vec<f64>,
}

impl ScalingTable {
    pub fn max_abs_deviation_at(&self, coupling: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.coupling == coupling)
            .map(|r| r.abs_deviation)
            .fold(0.0, f64::max)
    }
}

/// Pairs of (N1 index, N2 index) compared by `map`, for `levels` rows.
fn level_pairs(n1: u32, n2: u32, map: LevelMap, levels: usize) -> Result<Vec<(usize, usize)>> {
    let (big, small) = (n1.max(n2), n1.min(n2));
    if big % small != 0 {
        return Err(Error::Domain(format!("atom numbers {n1} and {n2} are not commensurate")));
    }
    let ratio = (big / small) as usize;
    match map {
        LevelMap::SortedIndex => {
            let (s1, s2) = if n2 >= n1 { (ratio, 1) } else { (1, ratio) };
            Ok((0..levels).map(|n| (s1 * n, s2 * n)).collect())
        }
        LevelMap::Manifold => {
            if n2 < n1 {
                return Err(Error::Domain("the manifold map needs N2 >= N1".into()));
            }
            let start_of = |twice_j: usize, e: usize| -> usize {
                (0..e).map(|x| x.min(twice_j) + 1).sum()
            };
            let (j1, j2) = (n1 as usize, n2 as usize);
            let mut pairs = Vec::with_capacity(levels);
            let mut e = 0;
            while pairs.len() < levels {
                let size = e.min(j1) + 1;
                for p in 0..size {
                    if pairs.len() == levels {
                        break;
                    }
                    pairs.push((start_of(j1, e) + p, start_of(j2, ratio * e) + p));
                }
                e += 1;
            }
            Ok(pairs)
        }
    }
}

/// Compare maximal-sector spectra of `N1` and `N2` atoms under the scaling
/// `E(N1, .) ~ (N1/N2) E(N2, .)`. Deviations are reported, not judged.
#[allow(clippy::too_many_arguments)]
pub fn scaling_check(
    delta: f64,
    n1: u32,
    n2: u32,
    f_grid: &[f64],
    map: LevelMap,
    levels: usize,
    opts: &ConvergenceOptions,
    exec: Execution,
) -> Result<ScalingTable> {
    check_grid(f_grid)?;
    let pairs = level_pairs(n1, n2, map, levels)?;
    let need1 = pairs.iter().map(|p| p.0).max().unwrap_or(0) + 1;
    let need2 = pairs.iter().map(|p| p.1).max().unwrap_or(0) + 1;
    let scale = f64::from(n1) / f64::from(n2);

    let per_point = exec::map_slice(exec, f_grid, |&f| -> Result<(Vec<ScalingRow>, bool)> {
        let spectrum = |n_atoms: u32, need: usize| -> Result<Spectrum> {
            let p = ModelParams::with_spin(n_atoms, delta, f, SpinSector::maximal(n_atoms))?;
            // `need` merged levels fit in `need` per sector
            let o = ConvergenceOptions { watch: need, exec: Execution::Sequential, ..*opts };
            let s = converged_spectrum(coulomb_builder(&p), &p, &o)?;
            if s.eigenvalues.len() < need {
                return Err(Error::Resource(format!(
                    "N = {n_atoms} truncation holds {} levels, {need} needed",
                    s.eigenvalues.len()
                )));
            }
            Ok(s)
        };
        let s1 = spectrum(n1, need1)?;
        let s2 = spectrum(n2, need2)?;
        let rows = pairs
            .iter()
            .enumerate()
            .map(|(n, &(i1, i2))| {
                let lhs = s1.eigenvalues[i1];
                let rhs = scale * s2.eigenvalues[i2];
                let abs_deviation = (lhs - rhs).abs();
                let rel_deviation =
                    if abs_deviation == 0.0 { 0.0 } else { abs_deviation / rhs.abs().max(lhs.abs()) };
                ScalingRow { coupling: f, n, lhs, rhs, abs_deviation, rel_deviation }
            })
            .collect();
        Ok((rows, s1.converged && s2.converged))
    });

    let mut rows = Vec::new();
    let mut unconverged = Vec::new();
    for (point, &f) in per_point.into_iter().zip(f_grid) {
        let (r, ok) = point?;
        rows.extend(r);
        if !ok {
            unconverged.push(f);
        }
    }
    Ok(ScalingTable { n1, n2, map, rows, unconverged })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeepStrongReport {
    pub levels: Vec<f64>,
    pub distances: Vec<f64>,
    pub max_distance: f64,
    pub converged: bool,
}

/// Distance of the lowest `levels` converged eigenvalues from the nearest
/// integers. Meaningful as a deep-strong check for `f >= 2`; smaller
/// couplings are accepted as controls.
pub fn deep_strong_asymptote(
    params: &ModelParams,
    levels: usize,
    opts: &ConvergenceOptions,
) -> Result<DeepStrongReport> {
    let o = ConvergenceOptions { watch: levels.max(1), ..*opts };
    let s = converged_spectrum(coulomb_builder(params), params, &o)?;
    let lowest = s.lowest(levels);
    let distances: Vec<f64> = lowest.iter().map(|e| (e - e.round()).abs()).collect();
    let max_distance = distances.iter().copied().fold(0.0, f64::max);
    Ok(DeepStrongReport { levels: lowest, distances, max_distance, converged: s.converged })
}
