mod common;

use cavity_spectra::analysis::{self, LevelMap, SweepConfig};
use cavity_spectra::approx::{self, Method};
use cavity_spectra::eigensolve::{self, converged_spectrum, ConvergenceOptions};
use cavity_spectra::exec::Execution;
use cavity_spectra::hamiltonian::{split_by_parity, Builder, ModelParams};
use cavity_spectra::spin::SpinSector;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn small_matrices_match_jacobi() {
    for (n_atoms, twice_j, f) in [(1, 1, 0.7), (2, 2, 0.4), (3, 1, 1.1), (4, 4, 0.9)] {
        let p = ModelParams::with_spin(n_atoms, 0.8, f, SpinSector::from_twice(twice_j)).unwrap();
        let h = Builder::DickeCoulomb.build(&p, 6).unwrap();
        let oracle = common::jacobi_eigenvalues(h.matrix());
        let got = eigensolve::eigenvalues_symmetric(h.matrix()).unwrap();
        assert!(max_diff(&got, &oracle) < 1e-11, "N = {n_atoms}");
    }
    let p = ModelParams::rabi(1.0, 0.9).unwrap();
    let h = Builder::RabiDipole.build(&p, 10).unwrap();
    let got = eigensolve::eigenvalues_symmetric(h.matrix()).unwrap();
    assert!(max_diff(&got, &common::jacobi_eigenvalues(h.matrix())) < 1e-11);
}

#[test]
fn parity_sectors_reassemble_full_spectrum() {
    for builder in [Builder::RabiDipole, Builder::RabiCoulomb] {
        let p = ModelParams::rabi(0.7, 1.3).unwrap();
        let h = builder.build(&p, 40).unwrap();
        let full = eigensolve::eigenvalues_symmetric(h.matrix()).unwrap();
        let split = eigensolve::spectrum_of(&h, false, Execution::Parallel).unwrap();
        assert!(max_diff(&full, &split.eigenvalues) < 1e-11);
        let sectors = split_by_parity(&h).unwrap();
        assert_eq!(sectors.even.rows.len() + sectors.odd.rows.len(), h.dim());
    }
}

#[test]
fn truncation_is_variational() {
    let p = ModelParams::new(3, 1.0, 0.8).unwrap();
    let mut previous: Option<Vec<f64>> = None;
    for n_max in [4, 8, 16, 32] {
        let h = Builder::DickeCoulomb.build(&p, n_max).unwrap();
        let s = eigensolve::spectrum_of(&h, false, Execution::Sequential).unwrap();
        let low = s.lowest(6);
        if let Some(prev) = previous {
            for (a, b) in low.iter().zip(&prev) {
                assert!(*a <= b + 1e-12, "n_max {n_max}: {a} > {b}");
            }
        }
        previous = Some(low);
    }
}

#[test]
fn random_symmetric_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut m = DMatrix::<f64>::zeros(50, 50);
    for i in 0..50 {
        for j in i..50 {
            let v: f64 = rng.random_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let e = eigensolve::eig_symmetric(&m).unwrap();
    for (i, &lambda) in e.values.iter().enumerate() {
        let v = e.vectors.column(i);
        assert!((&m * v - v * lambda).norm() < 1e-12);
    }
    assert!((e.vectors.transpose() * &e.vectors - DMatrix::identity(50, 50)).amax() < 1e-12);
    assert!(max_diff(&e.values, &common::jacobi_eigenvalues(&m)) < 1e-11);
}

#[test]
fn converged_eigenvectors_satisfy_the_hamiltonian() {
    let p = ModelParams::rabi(1.0, 0.6).unwrap();
    let opts = ConvergenceOptions { keep_vectors: true, watch: 4, ..Default::default() };
    let s = converged_spectrum(Builder::RabiCoulomb, &p, &opts).unwrap();
    let h = Builder::RabiCoulomb.build(&p, s.n_max_used).unwrap();
    let v = s.eigenvectors.as_ref().unwrap();
    for i in 0..4 {
        let col = v.column(i);
        assert!((h.matrix() * col - col * s.eigenvalues[i]).norm() < 1e-10);
    }
}

#[test]
fn singlet_of_two_atoms_is_a_bare_ladder() {
    for f in [0.0, 0.5, 1.0, 2.0] {
        let p = ModelParams::with_spin(2, 1.0, f, SpinSector::from_twice(0)).unwrap();
        let h = Builder::DickeCoulomb.build(&p, 30).unwrap();
        let s = eigensolve::spectrum_of(&h, false, Execution::Sequential).unwrap();
        let ladder: Vec<f64> = (0..=30).map(|n| n as f64).collect();
        assert!(max_diff(&s.eigenvalues, &ladder) < 1e-12);
    }
}

#[test]
fn three_atom_doublet_is_the_rabi_model() {
    for f in [0.3, 1.4] {
        let a = Builder::RabiCoulomb.build(&ModelParams::rabi(0.9, f).unwrap(), 24).unwrap();
        let p3 = ModelParams::with_spin(3, 0.9, f, SpinSector::HALF).unwrap();
        let b = Builder::DickeCoulomb.build(&p3, 24).unwrap();
        assert!((a.matrix() - b.matrix()).amax() <= 1e-15);
    }
}

#[test]
fn pair_method_tracks_pair_subspace() {
    let p = ModelParams::rabi(0.7, 0.4).unwrap();
    let r = approx::approximate_spectrum(&p, Method::Pair0, 4, 32).unwrap();
    let [lo, hi] = approx::qrm_pair(&p, 1).unwrap();
    let energies: Vec<f64> = r.levels.iter().map(|l| l.energy).collect();
    assert!(energies.iter().any(|e| (e - lo.energy).abs() < 1e-12));
    assert!(energies.iter().any(|e| (e - hi.energy).abs() < 1e-12));
}

#[test]
fn pair_closed_form_coefficients_match_vectors() {
    for f in [0.1, 0.5, 1.2] {
        let p = ModelParams::rabi(1.0, f).unwrap();
        for n in 0..6 {
            let v = approx::qrm_pair(&p, n).unwrap();
            let c = approx::qrm_pair_closed_form(&p, n).unwrap();
            for (a, b) in [(v[0], c.minus), (v[1], c.plus)] {
                assert!((a.energy - b.energy).abs() < 1e-12);
                assert!((a.a - b.a).abs() < 1e-9 && (a.b - b.b).abs() < 1e-9, "f {f} n {n}: {a:?} {b:?}");
            }
        }
    }
}

#[test]
fn second_order_never_worse_than_zeroth_on_ground() {
    let p = ModelParams::rabi(1.0, 0.0).unwrap();
    let cfg = SweepConfig {
        methods: vec![Method::Diag0, Method::SecondOrder],
        levels: 2,
        convergence: ConvergenceOptions { n_max_start: 32, ..Default::default() },
        exec: Execution::Parallel,
    };
    let grid = analysis::linspace(0.0, 1.5, 16);
    let r = analysis::sweep(&p, &grid, &cfg).unwrap();
    for point in &r.points {
        let e0 = point.ground_error(Method::Diag0).unwrap();
        let e2 = point.ground_error(Method::SecondOrder).unwrap();
        assert!(e2 <= e0 + 1e-14, "f = {}: {e2} > {e0}", point.coupling);
    }
}

#[test]
fn sweep_is_identical_sequential_and_parallel() {
    let p = ModelParams::new(2, 1.0, 0.0).unwrap();
    let grid = analysis::linspace(0.0, 1.0, 6);
    let run = |exec| {
        let cfg = SweepConfig {
            methods: vec![Method::Multi0, Method::PairwiseQuad],
            levels: 4,
            convergence: ConvergenceOptions { n_max_start: 16, ..Default::default() },
            exec,
        };
        analysis::sweep(&p, &grid, &cfg).unwrap()
    };
    let (a, b) = (run(Execution::Sequential), run(Execution::Parallel));
    for (x, y) in a.points.iter().zip(&b.points) {
        assert_eq!(x.spectrum.eigenvalues, y.spectrum.eigenvalues);
        assert_eq!(x.errors, y.errors);
    }
}

#[test]
fn scaling_with_equal_atom_numbers_is_exact() {
    let grid = [0.0, 0.4, 0.8];
    let o = ConvergenceOptions { n_max_start: 16, ..Default::default() };
    for map in [LevelMap::Manifold, LevelMap::SortedIndex] {
        let t = analysis::scaling_check(1.0, 3, 3, &grid, map, 6, &o, Execution::Sequential).unwrap();
        assert!(t.rows.iter().all(|r| r.abs_deviation == 0.0));
    }
}

#[test]
fn deep_strong_distances_shrink_with_coupling() {
    let o = ConvergenceOptions::default();
    let d = |f: f64| {
        analysis::deep_strong_asymptote(&ModelParams::rabi(1.0, f).unwrap(), 6, &o).unwrap().max_distance
    };
    let (a, b, c) = (d(2.0), d(3.0), d(5.0));
    assert!(a > b && b > c, "{a} {b} {c}");
    // the residual offset is the second-order shift -D^2/(16 f^2)
    assert!((c - 1.0 / 400.0).abs() < 3e-4);
}
