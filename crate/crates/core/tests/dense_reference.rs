//! Cross-checks the banded shift-invert eigensolver against dense
//! factorizations that share no code with it.

use landscape_core::eigen::{find_lowest_pairs, inverse_power, EigenSettings};
use landscape_core::grid::{eval_on_grid, Grid};
use landscape_core::model::{build_magnetic, MagneticSpec};
use landscape_core::operator::{assemble, MagneticHamiltonian};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn dense_interior(h: &MagneticHamiltonian) -> DMatrix<Complex64> {
    let m = h.grid().interior_len();
    let mut out = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    for j in 0..m {
        let mut e = vec![Complex64::new(0.0, 0.0); m];
        e[j] = Complex64::new(1.0, 0.0);
        for (i, v) in h.apply_interior(&e).into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

/// Real symmetric embedding [[X, -Y], [Y, X]] of the Hermitian X + iY; its
/// spectrum is the Hermitian spectrum with every eigenvalue doubled.
fn embedded_spectrum(dense: &DMatrix<Complex64>) -> Vec<f64> {
    let m = dense.nrows();
    let e = DMatrix::from_fn(2 * m, 2 * m, |i, j| {
        let (bi, bj) = (i / m, j / m);
        let v = dense[(i % m, j % m)];
        match (bi, bj) {
            (0, 0) | (1, 1) => v.re,
            (0, 1) => -v.im,
            _ => v.im,
        }
    });
    let mut eigs: Vec<f64> = e.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(f64::total_cmp);
    eigs
}

#[test]
fn one_d_low_modes_match_a_dense_solve() {
    let g = Grid::line(0.0, 4.0, 41).unwrap();
    let v = eval_on_grid(&g, |p| 3.0 + 2.0 * (1.7 * p[0]).sin().powi(2) + 0.5 * p[0]).unwrap();
    let h = assemble(&g, &v, None, 0.5).unwrap();

    let dense = dense_interior(&h);
    let real = DMatrix::from_fn(dense.nrows(), dense.ncols(), |i, j| {
        assert!(dense[(i, j)].im == 0.0);
        dense[(i, j)].re
    });
    let mut want: Vec<f64> = real.symmetric_eigen().eigenvalues.iter().copied().collect();
    want.sort_by(f64::total_cmp);

    let settings = EigenSettings {
        scan_min: Some(3.0),
        scan_max: Some(8.0),
        scan_step: 0.1,
        max_pairs: 4,
        ..Default::default()
    };
    let pairs = find_lowest_pairs(&h, &settings).unwrap();
    assert_eq!(pairs.len(), 4);
    for (pair, want) in pairs.iter().zip(&want) {
        assert!(
            (pair.lambda - want).abs() < 1e-8,
            "banded {} vs dense {want}",
            pair.lambda
        );
    }
}

#[test]
fn two_d_magnetic_spectrum_matches_the_hermitian_embedding() {
    let g = Grid::rect([-0.5, -0.5], [0.5, 0.5], [17, 17]).unwrap();
    let v = eval_on_grid(&g, |p| {
        6.0 + 30.0 * (-((p[0] - 0.15) * (p[0] - 0.15) + p[1] * p[1]) / 0.02).exp()
            + 24.0 * (-((p[0] + 0.2) * (p[0] + 0.2) + (p[1] + 0.1) * (p[1] + 0.1)) / 0.03).exp()
    })
    .unwrap();
    let spec = MagneticSpec { bumps_per_axis: 3, b: 4.0, sigma_x: 0.3, sigma_y: 0.25, seed: 9 };
    let (a, _) = build_magnetic(&g, &spec).unwrap();
    let h = assemble(&g, &v, Some(&a), 0.5).unwrap();

    let dense = dense_interior(&h);
    let mut herm_defect: f64 = 0.0;
    for i in 0..dense.nrows() {
        for j in 0..dense.ncols() {
            herm_defect = herm_defect.max((dense[(i, j)] - dense[(j, i)].conj()).norm());
        }
    }
    assert!(herm_defect < 1e-12, "assembled matrix is not Hermitian: {herm_defect}");

    let eigs = embedded_spectrum(&dense);
    for k in 0..3 {
        assert!(
            (eigs[2 * k] - eigs[2 * k + 1]).abs() < 1e-9,
            "embedding eigenvalue {k} not doubled"
        );
    }

    let settings = EigenSettings {
        scan_min: Some(eigs[0] - 1.0),
        scan_max: Some(eigs[4] + 1.0),
        scan_step: 0.25,
        max_pairs: 3,
        ..Default::default()
    };
    let pairs = find_lowest_pairs(&h, &settings).unwrap();
    assert_eq!(pairs.len(), 3);
    for (k, pair) in pairs.iter().enumerate() {
        assert!(
            (pair.lambda - eigs[2 * k]).abs() < 1e-8,
            "mode {k}: banded {} vs embedded {}",
            pair.lambda,
            eigs[2 * k]
        );
    }
}

#[test]
fn ground_state_magnitude_matches_the_embedding() {
    let g = Grid::rect([-0.5, -0.5], [0.5, 0.5], [13, 13]).unwrap();
    let v = eval_on_grid(&g, |p| {
        5.0 + 40.0 * (-((p[0] - 0.1) * (p[0] - 0.1) + (p[1] - 0.05) * (p[1] - 0.05)) / 0.02).exp()
    })
    .unwrap();
    let spec = MagneticSpec { bumps_per_axis: 2, b: 5.0, sigma_x: 0.35, sigma_y: 0.3, seed: 3 };
    let (a, _) = build_magnetic(&g, &spec).unwrap();
    let h = assemble(&g, &v, Some(&a), 0.5).unwrap();

    let dense = dense_interior(&h);
    let m = dense.nrows();
    let e = DMatrix::from_fn(2 * m, 2 * m, |i, j| {
        let (bi, bj) = (i / m, j / m);
        let v = dense[(i % m, j % m)];
        match (bi, bj) {
            (0, 0) | (1, 1) => v.re,
            (0, 1) => -v.im,
            _ => v.im,
        }
    });
    let se = e.symmetric_eigen();
    let mut order: Vec<usize> = (0..2 * m).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let ground = order[0];
    let col = se.eigenvectors.column(ground);
    let mut mods: Vec<f64> = (0..m)
        .map(|i| Complex64::new(col[i], col[m + i]).norm())
        .collect();
    let peak = mods.iter().cloned().fold(0.0f64, f64::max);
    for x in &mut mods {
        *x /= peak;
    }

    let pair = inverse_power(&h, se.eigenvalues[ground], 1e-11, 80).unwrap();
    assert!(pair.converged);
    assert!((pair.lambda - se.eigenvalues[ground]).abs() < 1e-9);
    let interior = h.restrict(&pair.phi);
    let scale = interior.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    for (z, want) in interior.iter().zip(&mods) {
        assert!(
            (z.norm() / scale - want).abs() < 1e-7,
            "|phi| mismatch: {} vs {want}",
            z.norm() / scale
        );
    }
}

#[test]
fn desk_style_potential_first_five_modes_match_dense() {
    let g = Grid::rect([-0.5, -0.5], [0.5, 0.5], [33, 33]).unwrap();
    let spec = landscape_core::model::PotentialSpec {
        bumps_per_axis: 8,
        weight_low: 0.0,
        weight_high: 120.0,
        sigma: 0.125,
        offset: 10.0,
        seed: 77,
    };
    let v = landscape_core::model::build_potential(&g, &spec).unwrap();
    let h = assemble(&g, &v, None, 0.5).unwrap();

    let dense = dense_interior(&h);
    let real = DMatrix::from_fn(dense.nrows(), dense.ncols(), |i, j| dense[(i, j)].re);
    let mut want: Vec<f64> = real.symmetric_eigen().eigenvalues.iter().copied().collect();
    want.sort_by(f64::total_cmp);

    let settings = EigenSettings {
        scan_step: 1.0,
        max_pairs: 5,
        probe_seed: 12,
        ..Default::default()
    };
    let pairs = find_lowest_pairs(&h, &settings).unwrap();
    assert_eq!(pairs.len(), 5);
    for (k, pair) in pairs.iter().enumerate() {
        assert!(
            (pair.lambda - want[k]).abs() < 1e-8,
            "mode {k}: banded {} vs dense {}",
            pair.lambda,
            want[k]
        );
    }
}

#[test]
fn magnetic_field_never_lowers_the_ground_energy() {
    let g = Grid::rect([-0.5, -0.5], [0.5, 0.5], [21, 21]).unwrap();
    let v = eval_on_grid(&g, |p| {
        4.0 + 25.0 * (-((p[0] + 0.1) * (p[0] + 0.1) + p[1] * p[1]) / 0.04).exp()
    })
    .unwrap();
    let mut last = f64::NEG_INFINITY;
    for b in [0.0, 3.0, 6.0] {
        let spec = MagneticSpec { bumps_per_axis: 3, b, sigma_x: 0.3, sigma_y: 0.3, seed: 17 };
        let (a, _) = build_magnetic(&g, &spec).unwrap();
        let h = assemble(&g, &v, Some(&a), 0.5).unwrap();
        let pair = inverse_power(&h, h.potential_min(), 1e-10, 80).unwrap();
        assert!(pair.converged);
        assert!(
            pair.lambda >= last - 1e-10,
            "ground energy dropped when the field grew: {} after {last}",
            pair.lambda
        );
        last = pair.lambda;
    }
}
