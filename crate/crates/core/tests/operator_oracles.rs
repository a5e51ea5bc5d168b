//! Sparse operators checked against dense nalgebra counterparts on small
//! lattices.

use ect_core::baseline::normal_operator_norm;
use ect_core::forward::Sensor;
use ect_core::grid::{ElectrodeLayout, Grid};
use ect_core::operators::{estimate_step_bound, GradientTransforms, LaplacianSolver};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense_g(t: &GradientTransforms, vertical: bool) -> DMatrix<f64> {
    let n = t.len();
    let mut g = DMatrix::zeros(n, n);
    for (r, c, v) in t.entries(vertical) {
        g[(r, c)] += v as f64;
    }
    g
}

fn dense_l(lap: &LaplacianSolver) -> DMatrix<f64> {
    let n = lap.len();
    DMatrix::from_fn(n, n, |r, c| lap.matrix().get(r, c) as f64)
}

fn to_dv(x: &Array1<f64>) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().copied())
}

#[test]
fn laplacian_matches_dense_product() {
    for n in [8, 11, 16] {
        let grid = Grid::new(n, n, 0.45).unwrap();
        let t = GradientTransforms::new(&grid);
        let lap = LaplacianSolver::new(&t).unwrap();
        let (g1, g2) = (dense_g(&t, false), dense_g(&t, true));
        let l = g1.transpose() * &g1 + g2.transpose() * &g2;
        assert_eq!(l, dense_l(&lap), "{n}x{n}");
    }
}

#[test]
fn laplacian_is_positive_definite() {
    for n in [8, 10, 12, 14, 16] {
        let grid = Grid::new(n, n, 0.5).unwrap();
        let lap = LaplacianSolver::new(&GradientTransforms::new(&grid)).unwrap();
        let eig = SymmetricEigen::new(dense_l(&lap));
        let min = eig.eigenvalues.min();
        assert!(min > 1e-3, "{n}x{n}: smallest eigenvalue {min}");
    }
}

#[test]
fn dense_transposes_match_adjoints() {
    let grid = Grid::new(12, 12, 0.45).unwrap();
    let t = GradientTransforms::new(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y = Array1::from_iter((0..t.len()).map(|_| rng.random_range(-1.0..1.0)));
    for (vertical, adj) in [(false, t.g1_t(&y).unwrap()), (true, t.g2_t(&y).unwrap())] {
        let dense = dense_g(&t, vertical).transpose() * to_dv(&y);
        assert!((dense - to_dv(&adj)).amax() < 1e-14);
    }
}

#[test]
fn direct_and_cg_solves_match_dense_inverse() {
    let grid = Grid::new(16, 16, 0.45).unwrap();
    let t = GradientTransforms::new(&grid);
    let direct = LaplacianSolver::with_direct(&t).unwrap();
    let cg = LaplacianSolver::with_cg(&t).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let b = Array1::from_iter((0..t.len()).map(|_| rng.random_range(-1.0..1.0)));
    let oracle = dense_l(&direct).cholesky().expect("SPD").solve(&to_dv(&b));
    for solver in [&direct, &cg] {
        let x = to_dv(&solver.solve(&b).unwrap());
        assert!((&x - &oracle).norm() / oracle.norm() < 1e-7);
    }
}

fn small_sensor() -> (Sensor, ect_core::forward::Calibration) {
    let grid = Grid::new(16, 16, 0.45).unwrap();
    let layout = ElectrodeLayout::place(&grid, 6, 0.7, 1.0).unwrap();
    let sensor = Sensor::new(grid, layout, 1.0, 1.0, 3.0).unwrap();
    let cal = sensor.calibrate().unwrap();
    (sensor, cal)
}

fn dense_s(s: &ndarray::Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(s.nrows(), s.ncols(), |r, c| s[(r, c)])
}

#[test]
fn step_bound_matches_dense_spectrum() {
    let (sensor, cal) = small_sensor();
    let lap = LaplacianSolver::new(&GradientTransforms::new(&sensor.grid)).unwrap();
    let s = dense_s(&cal.sensitivity.s);
    let l_inv = dense_l(&lap).try_inverse().unwrap();
    let m = &s * l_inv * s.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let lambda = SymmetricEigen::new(m).eigenvalues.max();
    let bound = estimate_step_bound(&cal.sensitivity, &lap).unwrap();
    assert!(bound.converged);
    assert!((bound.lambda_max - lambda).abs() / lambda < 1e-3, "{} vs {lambda}", bound.lambda_max);
    assert!((bound.beta * lambda - 0.95).abs() < 1e-3);
}

#[test]
fn landweber_norm_matches_dense_svd() {
    let (_, cal) = small_sensor();
    let sigma = dense_s(&cal.sensitivity.s).singular_values().max();
    let est = normal_operator_norm(&cal.sensitivity).unwrap();
    assert!((est - sigma * sigma).abs() / (sigma * sigma) < 1e-3, "{est} vs {}", sigma * sigma);
}
