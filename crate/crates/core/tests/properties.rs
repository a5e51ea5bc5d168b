//! Property tests for the structural invariants of each module.

use std::f64::consts::PI;

use ect_core::baseline::{art, landweber, lbp, residual_norm, sirt, IterParams};
use ect_core::forward::{
    denormalize_measurements, normalize_measurements, solve_potential, CapacitanceVector, MeasurementVector,
    SensitivityMatrix, SorParams,
};
use ect_core::grid::{
    denormalize, make_phantom, normalize, pair_index, ElectrodeLayout, Grid, PermittivityField, PhantomSpec,
    PixelClass, Shape,
};
use ect_core::metrics::{evaluate_against_truth, segment_objects, Polarity};
use ect_core::operators::{GradientTransforms, LaplacianSolver};
use ect_core::tv::{tv_fist, tv_ist, update_weights, TvConfig, TvProblem};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disc() -> impl Strategy<Value = Shape> {
    (0.0..1.0f64, 0.0..2.0 * PI, 0.1..0.35f64, 1.0..3.0f64).prop_map(|(t, phi, radius, eps)| {
        let d = t * (0.9 - radius);
        Shape::Disc { center: [d * phi.cos(), d * phi.sin()], radius, eps }
    })
}

/// `rows x cols` toy sensitivity with `rows = n(n-1)/2`.
fn toy_system(n: usize, cols: usize) -> impl Strategy<Value = (SensitivityMatrix, Array1<f64>)> {
    let rows = n * (n - 1) / 2;
    (
        proptest::collection::vec(0.01..1.0f64, rows * cols),
        proptest::collection::vec(0.0..1.0f64, cols),
    )
        .prop_map(move |(s, x)| {
            let s = SensitivityMatrix::new(Array2::from_shape_vec((rows, cols), s).unwrap(), pair_index(n)).unwrap();
            (s, Array1::from(x))
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn pixel_classes_partition_the_lattice(n1 in 8usize..40, n2 in 8usize..40, frac in 0.2..0.5f64) {
        let g = Grid::new(n1, n2, frac).unwrap();
        let roi = g.classes().iter().filter(|c| **c == PixelClass::Roi).count();
        prop_assert_eq!(g.classes().len(), n1 * n2);
        prop_assert_eq!(roi, g.roi_len());
        let (r0, c0) = g.center();
        let rad = g.roi_radius_px();
        for p in 0..n1 * n2 {
            let (r, c) = g.row_col(p);
            let d = ((r as f64 + 0.5 - r0).powi(2) + (c as f64 + 0.5 - c0).powi(2)).sqrt();
            prop_assert_eq!(g.class(p) == PixelClass::Roi, d < rad);
            prop_assert_eq!(g.roi_index(p).is_some(), d < rad);
        }
    }

    #[test]
    fn electrodes_are_disjoint_and_counter_clockwise(n in 2usize..=16, coverage in 0.2..0.8f64) {
        let g = Grid::new(64, 64, 0.45).unwrap();
        if let Ok(l) = ElectrodeLayout::place(&g, n, coverage, 1.0) {
            prop_assert_eq!(l.n_pairs(), n * (n - 1) / 2);
            prop_assert_eq!(l.pairs().len(), l.n_pairs());
            let mut seen = vec![false; 64 * 64];
            let pitch = 2.0 * PI / n as f64;
            for (k, arc) in l.arcs().iter().enumerate() {
                prop_assert!(!arc.is_empty());
                let start = k as f64 * pitch;
                let mut prev = f64::NEG_INFINITY;
                for &p in arc {
                    prop_assert!(!seen[p]);
                    seen[p] = true;
                    prop_assert_eq!(g.class(p), PixelClass::Boundary);
                    let a = g.angle(p);
                    prop_assert!(a >= start && a < start + coverage * pitch, "electrode {} angle {}", k, a);
                    prop_assert!(a >= prev);
                    prev = a;
                }
            }
            // Every boundary pixel inside a window belongs to that electrode.
            for p in 0..64 * 64 {
                if g.class(p) == PixelClass::Boundary {
                    let a = g.angle(p);
                    prop_assert_eq!(seen[p], a.rem_euclid(pitch) < coverage * pitch && a < n as f64 * pitch);
                }
            }
        }
    }

    #[test]
    fn normalization_round_trip(lo in 0.5..5.0f64, hi in 0.5..5.0f64, t in 0.0..1.0f64) {
        prop_assume!((hi - lo).abs() > 1e-3);
        let eps = lo + t * (hi - lo);
        let x = normalize(eps, lo, hi);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&x));
        prop_assert!((denormalize(x, lo, hi) - eps).abs() <= 1e-12 * eps.abs());
    }

    #[test]
    fn phantoms_are_deterministic_in_range_and_layered(a in disc(), b in disc()) {
        let g = Grid::new(40, 40, 0.45).unwrap();
        let spec = PhantomSpec { background_eps: 1.0, wall_eps: None, shapes: vec![a, b.clone()] };
        let f = make_phantom(&g, &spec, 1.0, 3.0).unwrap();
        prop_assert_eq!(&f, &make_phantom(&g, &spec, 1.0, 3.0).unwrap());
        let x = f.normalized(&g);
        prop_assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        let img = g.to_image(&x).unwrap();
        for p in 0..40 * 40 {
            let (r, c) = g.row_col(p);
            if g.roi_index(p).is_none() {
                prop_assert_eq!(img[(r, c)], 0.0);
            }
        }
        // The later disc wins wherever it covers a ROI pixel.
        let only_b = make_phantom(&g, &PhantomSpec { shapes: vec![b.clone()], ..spec.clone() }, 1.0, 3.0).unwrap();
        prop_assume!(b.eps() != 1.0);
        for &p in g.roi_pixels() {
            let (r, c) = g.row_col(p);
            if only_b.eps[(r, c)] == b.eps() {
                prop_assert_eq!(f.eps[(r, c)], b.eps());
            }
        }
    }

    #[test]
    fn measurement_normalization_round_trip(
        vals in proptest::collection::vec((1e-12..1e-10f64, 1e-12..1e-10f64, -0.5..1.5f64), 1..30)
    ) {
        prop_assume!(vals.iter().all(|(a, b, _)| (a - b).abs() > 1e-3 * a.max(*b)));
        let pairs = vec![(0, 1); vals.len()];
        let lo = CapacitanceVector { c: vals.iter().map(|v| v.0).collect(), pairs: pairs.clone() };
        let hi = CapacitanceVector { c: vals.iter().map(|v| v.1).collect(), pairs };
        let m = MeasurementVector::new(vals.iter().map(|v| v.2).collect());
        let c = denormalize_measurements(&m, &lo, &hi).unwrap();
        let back = normalize_measurements(&c, &lo, &hi).unwrap();
        for (a, b) in back.lambda.iter().zip(m.lambda.iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn weights_are_finite_and_positive(g in proptest::collection::vec(-1e6..1e6f64, 1..50), rho in 1e-9..1e3f64) {
        let w = update_weights(&Array1::from(g), rho).unwrap();
        prop_assert!(w.iter().all(|v| v.is_finite() && *v > 0.0 && *v <= 1.0 / rho));
    }

    #[test]
    fn landweber_residual_does_not_increase(
        (s, x_true) in toy_system(4, 5),
        k in 1usize..40,
        clamp in any::<bool>(),
        scale in 0.1..1.0f64,
    ) {
        let m = MeasurementVector::new(s.s.dot(&x_true));
        let p = IterParams { iterations: k, step_scale: scale, clamp, ..IterParams::default() };
        let a = landweber(&s, &m, &p).unwrap();
        let b = landweber(&s, &m, &IterParams { iterations: k + 1, ..p }).unwrap();
        prop_assert!(residual_norm(&s, b.view(), &m) <= residual_norm(&s, a.view(), &m) * (1.0 + 1e-9) + 1e-14);
    }

    #[test]
    fn art_is_fejer_monotone(
        (s, x_true) in toy_system(5, 8),
        k in 1usize..20,
        relax in 0.05..1.95f64,
        clamp in any::<bool>(),
    ) {
        let m = MeasurementVector::new(s.s.dot(&x_true));
        let p = IterParams { iterations: k, relax, clamp, ..IterParams::default() };
        let dist = |x: &Array1<f64>| (x - &x_true).mapv(|v| v * v).sum().sqrt();
        let a = art(&s, &m, &p).unwrap();
        let b = art(&s, &m, &IterParams { iterations: k + 1, ..p }).unwrap();
        prop_assert!(dist(&b) <= dist(&a) * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn baselines_are_deterministic((s, x_true) in toy_system(4, 6)) {
        let m = MeasurementVector::new(s.s.dot(&x_true));
        let p = IterParams { iterations: 20, ..IterParams::default() };
        prop_assert_eq!(lbp(&s, &m).unwrap(), lbp(&s, &m).unwrap());
        prop_assert_eq!(landweber(&s, &m, &p).unwrap(), landweber(&s, &m, &p).unwrap());
        prop_assert_eq!(art(&s, &m, &p).unwrap(), art(&s, &m, &p).unwrap());
        prop_assert_eq!(sirt(&s, &m, &p).unwrap(), sirt(&s, &m, &p).unwrap());
    }

    #[test]
    fn segmented_areas_fit_in_the_roi(seed in proptest::collection::vec(0.0..1.0f64, 24 * 24), thr in 0.05..0.95f64) {
        let g = Grid::new(24, 24, 0.5).unwrap();
        let x = g.from_image(&Array2::from_shape_vec((24, 24), seed).unwrap()).unwrap();
        for pol in [Polarity::Bright, Polarity::Dark] {
            let objs = segment_objects(&x, &g, thr, pol).unwrap();
            prop_assert!(objs.iter().map(|o| o.pixel_count).sum::<usize>() <= g.roi_len());
            prop_assert!(objs.iter().all(|o| o.pixel_count >= 4));
            prop_assert!(objs.windows(2).all(|w| w[0].pixel_count >= w[1].pixel_count));
        }
    }

    #[test]
    fn size_error_vanishes_iff_areas_agree(a in disc(), noise in proptest::collection::vec(-0.3..0.3f64, 1..2000)) {
        let g = Grid::new(40, 40, 0.45).unwrap();
        let spec = PhantomSpec { background_eps: 1.0, wall_eps: None, shapes: vec![a] };
        let truth = make_phantom(&g, &spec, 1.0, 3.0).unwrap();
        let x = truth.normalized(&g);
        prop_assume!(x.iter().filter(|v| **v > 0.5).count() >= 4);
        // Perturbations that keep every pixel on its side of the threshold.
        let y = Array1::from_iter(x.iter().enumerate().map(|(i, &v)| {
            let d = noise[i % noise.len()].abs() * 0.5;
            if v > 0.5 { (v - d).max(0.51) } else { (v + d).min(0.49) }
        }));
        let r = evaluate_against_truth(&y, &truth, &g, 0.5, Polarity::Bright).unwrap();
        prop_assert!(r.matches.iter().all(|m| m.size_error == 0.0 && m.recon_area == m.truth_area));
        // Growing every object by its outer ring changes the area.
        let t = GradientTransforms::new(&g);
        let grown = t.apply(&x).unwrap().g.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }) + &x;
        let grown = grown.mapv(|v| v.min(1.0));
        let r = evaluate_against_truth(&grown, &truth, &g, 0.5, Polarity::Bright).unwrap();
        prop_assert!(r.matches.iter().all(|m| (m.size_error > 0.0) == (m.recon_area != m.truth_area)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn potentials_obey_the_maximum_principle(
        eps in proptest::collection::vec(1.0..5.0f64, 16 * 16),
        excited in 0usize..4,
        v_c in -2.0..2.0f64,
    ) {
        prop_assume!(v_c.abs() > 0.1);
        let g = Grid::new(16, 16, 0.45).unwrap();
        let l = ElectrodeLayout::place(&g, 4, 0.5, v_c).unwrap();
        let f = PermittivityField { eps: Array2::from_shape_vec((16, 16), eps).unwrap(), eps_empty: 1.0, eps_full: 5.0 };
        let pf = solve_potential(&f, &l, excited, &SorParams::with_tol(1e-10)).unwrap();
        let (lo, hi) = (v_c.min(0.0), v_c.max(0.0));
        let tol = 1e-8 * v_c.abs();
        prop_assert!(pf.phi.iter().all(|&v| v >= lo - tol && v <= hi + tol));
        for (k, arc) in l.arcs().iter().enumerate() {
            let want = if k == excited { v_c } else { 0.0 };
            prop_assert!(arc.iter().all(|&p| pf.phi[(p / 16, p % 16)] == want));
        }
    }

    #[test]
    fn tv_traces_are_bounded_and_deterministic(seed in any::<u64>(), k_max in 1usize..30, reweight in any::<bool>()) {
        let g = Grid::new(12, 12, 0.45).unwrap();
        let lap = LaplacianSolver::new(&GradientTransforms::new(&g)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = g.roi_len();
        let s = Array2::from_shape_fn((10, n), |_| rng.random_range(0.0..0.05));
        let s = SensitivityMatrix::new(s, pair_index(5)).unwrap();
        let x = Array1::from_shape_fn(n, |_| rng.random_range(0.0..1.0));
        let m = MeasurementVector::new(s.s.dot(&x));
        let problem = TvProblem::new(&s, &lap, &m);
        let cfg = TvConfig { k_max, reweight, v: 3, ..TvConfig::default() };
        let a = tv_fist(&problem, &cfg).unwrap();
        let b = tv_fist(&problem, &cfg).unwrap();
        prop_assert!(a.trace.records.len() <= k_max + 1);
        prop_assert_eq!(&a.trace, &b.trace);
        prop_assert_eq!(&a.x, &b.x);
        let i = tv_ist(&problem, &cfg).unwrap();
        prop_assert!(i.trace.records.len() <= k_max + 1);
    }
}
