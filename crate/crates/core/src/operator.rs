//! Peierls discretization of H = s (-i grad - A)^2 + V on the interior nodes,
//! with Dirichlet rows eliminated.
//!
//! Each directed edge j -> k carries the phase exp(i theta_jk) with
//! theta_jk = -A(edge midpoint) . (x_k - x_j), A at the midpoint taken as the
//! mean of the two nodal values. The action is
//!
//!   (H psi)_j = s * sum_a h_a^{-2} (2 psi_j - e^{i th} psi_{j+e_a} - e^{-i th'} psi_{j-e_a})
//!             + V_j psi_j
//!
//! which reproduces s (k - A)^2 on plane waves and is Hermitian by
//! construction (reverse edges carry conjugate phases). Boundary neighbors are
//! skipped: apply() is exactly the matrix of the eliminated interior system.

use crate::banded::{Banded, BandedLu};
use crate::error::{CoreError, Result};
use crate::grid::{ComplexField, Grid, ScalarField, VectorField};
use num_complex::Complex64;
use std::sync::{Arc, Mutex};

/// Shifted factorizations are ~100 MB at 129^2, so the cache is a small LRU,
/// enough for inverse-power warmup reuse and repeated monitor evaluations at
/// one shift, without letting a lambda-scan accumulate gigabytes.
const FACTOR_CACHE_CAPACITY: usize = 4;

pub enum ShiftedFactor {
    Real(BandedLu<f64>),
    Complex(BandedLu<Complex64>),
}

impl ShiftedFactor {
    pub fn pivot_ratio(&self) -> f64 {
        match self {
            ShiftedFactor::Real(f) => f.pivot_ratio(),
            ShiftedFactor::Complex(f) => f.pivot_ratio(),
        }
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        match self {
            ShiftedFactor::Complex(f) => f.solve_in_place(b),
            ShiftedFactor::Real(f) => {
                let n = b.len();
                let mut re = vec![0.0; n];
                let mut im = vec![0.0; n];
                for (i, v) in b.iter().enumerate() {
                    re[i] = v.re;
                    im[i] = v.im;
                }
                f.solve_in_place(&mut re);
                f.solve_in_place(&mut im);
                for i in 0..n {
                    b[i] = Complex64::new(re[i], im[i]);
                }
            }
        }
    }
}

pub struct MagneticHamiltonian {
    grid: Grid,
    scale: f64,
    potential: Vec<f64>,
    diag: Vec<f64>,
    /// Forward-edge phases per axis; axis 0 edges indexed ix * n1 + iy for the
    /// edge (ix,iy)-(ix+1,iy), axis 1 edges ix * (n1-1) + iy.
    phases: [Vec<Complex64>; 2],
    is_real: bool,
    v_min: f64,
    cache: Mutex<Vec<(u64, Arc<ShiftedFactor>)>>,
}

pub fn assemble(
    grid: &Grid,
    v: &ScalarField,
    a: Option<&VectorField>,
    scale: f64,
) -> Result<MagneticHamiltonian> {
    if scale != 0.5 && scale != 1.0 {
        return Err(CoreError::InvalidArgument(format!(
            "laplacian scale must be 1/2 or 1, got {scale}"
        )));
    }
    if v.grid() != grid {
        return Err(CoreError::GridMismatch("potential grid".into()));
    }
    if let Some(a) = a {
        if a.grid() != grid {
            return Err(CoreError::GridMismatch("vector potential grid".into()));
        }
    }
    let mut v_min = f64::INFINITY;
    for (i, &val) in v.values().iter().enumerate() {
        if !val.is_finite() {
            return Err(CoreError::NonFinite { index: i, coords: grid.node_coord(i), value: val });
        }
        if val < 0.0 {
            return Err(CoreError::NegativePotential { index: i, value: val });
        }
        v_min = v_min.min(val);
    }

    let dim = grid.dim();
    let mut kinetic = 0.0;
    for ax in 0..dim {
        let h = grid.spacing(ax);
        kinetic += scale * 2.0 / (h * h);
    }
    let diag: Vec<f64> = (0..grid.interior_len())
        .map(|r| kinetic + v.values()[grid.interior_to_flat(r)])
        .collect();

    let mut phases = [Vec::new(), Vec::new()];
    let mut is_real = true;
    for ax in 0..dim {
        let h = grid.spacing(ax);
        let (n_edges, stride) = edge_layout(grid, ax);
        let mut edge_phases = Vec::with_capacity(n_edges);
        for e in 0..n_edges {
            let flat = edge_to_flat(grid, ax, e, stride);
            let theta = match a {
                None => 0.0,
                Some(a) => {
                    let comp = a.component(ax).values();
                    let mid = 0.5 * (comp[flat] + comp[flat + flat_step(grid, ax)]);
                    -mid * h
                }
            };
            let ph = Complex64::from_polar(1.0, theta);
            if ph.re != 1.0 || ph.im != 0.0 {
                is_real = false;
            }
            edge_phases.push(ph);
        }
        phases[ax] = edge_phases;
    }

    Ok(MagneticHamiltonian {
        grid: grid.clone(),
        scale,
        potential: v.values().to_vec(),
        diag,
        phases,
        is_real,
        v_min,
        cache: Mutex::new(Vec::new()),
    })
}

fn edge_layout(grid: &Grid, axis: usize) -> (usize, usize) {
    match grid.dim() {
        1 => (grid.n_nodes(0) - 1, 1),
        _ => {
            let (n0, n1) = (grid.n_nodes(0), grid.n_nodes(1));
            if axis == 0 {
                ((n0 - 1) * n1, n1)
            } else {
                (n0 * (n1 - 1), n1 - 1)
            }
        }
    }
}

/// Flat node index of the lower endpoint of edge e along `axis`.
fn edge_to_flat(grid: &Grid, axis: usize, e: usize, stride: usize) -> usize {
    match grid.dim() {
        1 => e,
        _ => {
            if axis == 0 {
                e
            } else {
                let n1 = grid.n_nodes(1);
                (e / stride) * n1 + (e % stride)
            }
        }
    }
}

fn flat_step(grid: &Grid, axis: usize) -> usize {
    match grid.dim() {
        1 => 1,
        _ => {
            if axis == 0 {
                grid.n_nodes(1)
            } else {
                1
            }
        }
    }
}

impl MagneticHamiltonian {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn potential_min(&self) -> f64 {
        self.v_min
    }

    /// True when every link phase is exactly 1 (A absent or zero); solves then
    /// run in real arithmetic, which is ~4x cheaper.
    pub fn is_real(&self) -> bool {
        self.is_real
    }

    /// Phase of the directed edge from `flat` one step forward along `axis`.
    fn forward_phase(&self, axis: usize, flat: usize) -> Complex64 {
        let idx = match self.grid.dim() {
            1 => flat,
            _ => {
                let n1 = self.grid.n_nodes(1);
                if axis == 0 {
                    flat
                } else {
                    (flat / n1) * (n1 - 1) + (flat % n1)
                }
            }
        };
        self.phases[axis][idx]
    }

    pub fn restrict(&self, f: &ComplexField) -> Vec<Complex64> {
        (0..self.grid.interior_len())
            .map(|r| f.values()[self.grid.interior_to_flat(r)])
            .collect()
    }

    pub fn extend(&self, interior: &[Complex64]) -> ComplexField {
        let mut out = ComplexField::zeros(self.grid.clone());
        for (r, &v) in interior.iter().enumerate() {
            out.values_mut()[self.grid.interior_to_flat(r)] = v;
        }
        out
    }

    /// H applied to a field that is zero on the boundary; boundary entries of
    /// psi are ignored so this is exactly the eliminated interior matrix.
    pub fn apply(&self, psi: &ComplexField) -> Result<ComplexField> {
        if psi.grid() != &self.grid {
            return Err(CoreError::GridMismatch("apply".into()));
        }
        let interior = self.restrict(psi);
        let out = self.apply_interior(&interior);
        Ok(self.extend(&out))
    }

    pub fn apply_interior(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.grid.interior_len());
        let dim = self.grid.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
        let inv_h2: Vec<f64> = (0..dim)
            .map(|a| {
                let h = self.grid.spacing(a);
                self.scale / (h * h)
            })
            .collect();
        let counts = self.grid.interior_counts();
        for r in 0..x.len() {
            let flat = self.grid.interior_to_flat(r);
            let idx = self.grid.multi_index(flat);
            let mut acc = Complex64::new(self.diag[r] * x[r].re, self.diag[r] * x[r].im);
            for a in 0..dim {
                let step = match a {
                    0 => {
                        if dim == 1 {
                            1
                        } else {
                            counts[1]
                        }
                    }
                    _ => 1,
                };
                // Forward neighbor (interior only; boundary psi is zero).
                if idx[a] + 1 < self.grid.n_nodes(a) - 1 {
                    let ph = self.forward_phase(a, flat);
                    acc -= ph * x[r + step] * inv_h2[a];
                }
                if idx[a] > 1 {
                    let back_flat = flat - flat_step(&self.grid, a);
                    let ph = self.forward_phase(a, back_flat).conj();
                    acc -= ph * x[r - step] * inv_h2[a];
                }
            }
            out[r] = acc;
        }
        out
    }

    /// Assembled interior matrix of H - lambda as a banded system.
    fn banded_complex(&self, lambda: f64) -> Banded<Complex64> {
        let counts = self.grid.interior_counts();
        let dim = self.grid.dim();
        let bw = if dim == 1 { 1 } else { counts[1] };
        let n = self.grid.interior_len();
        let mut m = Banded::new(n, bw, bw);
        let inv_h2: Vec<f64> = (0..dim)
            .map(|a| {
                let h = self.grid.spacing(a);
                self.scale / (h * h)
            })
            .collect();
        for r in 0..n {
            let flat = self.grid.interior_to_flat(r);
            let idx = self.grid.multi_index(flat);
            m.set(r, r, Complex64::new(self.diag[r] - lambda, 0.0));
            for a in 0..dim {
                let step = if a == 0 {
                    if dim == 1 {
                        1
                    } else {
                        counts[1]
                    }
                } else {
                    1
                };
                if idx[a] + 1 < self.grid.n_nodes(a) - 1 {
                    let ph = self.forward_phase(a, flat);
                    m.set(r, r + step, -ph * inv_h2[a]);
                    m.set(r + step, r, -(ph.conj()) * inv_h2[a]);
                }
            }
        }
        m
    }

    fn banded_real(&self, lambda: f64) -> Banded<f64> {
        let counts = self.grid.interior_counts();
        let dim = self.grid.dim();
        let bw = if dim == 1 { 1 } else { counts[1] };
        let n = self.grid.interior_len();
        let mut m = Banded::new(n, bw, bw);
        let inv_h2: Vec<f64> = (0..dim)
            .map(|a| {
                let h = self.grid.spacing(a);
                self.scale / (h * h)
            })
            .collect();
        for r in 0..n {
            let flat = self.grid.interior_to_flat(r);
            let idx = self.grid.multi_index(flat);
            m.set(r, r, self.diag[r] - lambda);
            for a in 0..dim {
                let step = if a == 0 {
                    if dim == 1 {
                        1
                    } else {
                        counts[1]
                    }
                } else {
                    1
                };
                if idx[a] + 1 < self.grid.n_nodes(a) - 1 {
                    m.set(r, r + step, -inv_h2[a]);
                    m.set(r + step, r, -inv_h2[a]);
                }
            }
        }
        m
    }

    /// Factorization of H - lambda, LRU-cached per shift; concurrent callers
    /// block on the lock so each shift is built once.
    pub fn shift_factor(&self, lambda: f64) -> Result<Arc<ShiftedFactor>> {
        let key = lambda.to_bits();
        let mut cache = self.cache.lock().unwrap();
        if let Some(pos) = cache.iter().position(|(k, _)| *k == key) {
            let entry = cache.remove(pos);
            let fact = entry.1.clone();
            cache.insert(0, entry);
            return Ok(fact);
        }
        let built = if self.is_real {
            self.banded_real(lambda).factor().map(ShiftedFactor::Real)
        } else {
            self.banded_complex(lambda).factor().map(ShiftedFactor::Complex)
        };
        let fact = Arc::new(built.map_err(|e| match e {
            CoreError::SingularMatrix { .. } => {
                CoreError::ShiftOnEigenvalue { lambda, pivot_ratio: 0.0 }
            }
            other => other,
        })?);
        cache.insert(0, (key, fact.clone()));
        cache.truncate(FACTOR_CACHE_CAPACITY);
        Ok(fact)
    }

    pub fn shifted_solve_interior(&self, lambda: f64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let fact = self.shift_factor(lambda)?;
        let mut x = rhs.to_vec();
        fact.solve_in_place(&mut x);
        Ok(x)
    }

    /// Solves (H - lambda) w = rhs with Dirichlet walls; rhs and w are full
    /// fields, zero on the boundary.
    pub fn shifted_solve(&self, lambda: f64, rhs: &ComplexField) -> Result<ComplexField> {
        if rhs.grid() != &self.grid {
            return Err(CoreError::GridMismatch("shifted_solve".into()));
        }
        let x = self.shifted_solve_interior(lambda, &self.restrict(rhs))?;
        Ok(self.extend(&x))
    }

    /// Same operator in the gauge shifted by chi: every forward edge phase
    /// becomes theta - (chi_k - chi_j), which matches re-assembly with
    /// A + grad chi to O(h^2) and intertwines exactly with multiplication by
    /// e^{i chi}.
    pub fn gauge_transform(&self, chi: &ScalarField) -> Result<MagneticHamiltonian> {
        if chi.grid() != &self.grid {
            return Err(CoreError::GridMismatch("gauge_transform".into()));
        }
        let mut phases = self.phases.clone();
        let mut is_real = true;
        for ax in 0..self.grid.dim() {
            let (n_edges, stride) = edge_layout(&self.grid, ax);
            for e in 0..n_edges {
                let flat = edge_to_flat(&self.grid, ax, e, stride);
                let dchi = chi.values()[flat + flat_step(&self.grid, ax)] - chi.values()[flat];
                let ph = phases[ax][e] * Complex64::from_polar(1.0, -dchi);
                if ph.re != 1.0 || ph.im != 0.0 {
                    is_real = false;
                }
                phases[ax][e] = ph;
            }
        }
        Ok(MagneticHamiltonian {
            grid: self.grid.clone(),
            scale: self.scale,
            potential: self.potential.clone(),
            diag: self.diag.clone(),
            phases,
            is_real,
            v_min: self.v_min,
            cache: Mutex::new(Vec::new()),
        })
    }
}

/// e^{i chi} psi, the field-side companion of `gauge_transform`.
pub fn conjugate_field(psi: &ComplexField, chi: &ScalarField) -> Result<ComplexField> {
    if psi.grid() != chi.grid() {
        return Err(CoreError::GridMismatch("conjugate_field".into()));
    }
    let values = psi
        .values()
        .iter()
        .zip(chi.values())
        .map(|(&p, &c)| p * Complex64::from_polar(1.0, c))
        .collect();
    ComplexField::new(psi.grid().clone(), values)
}

/// h^d-weighted Hermitian inner product over all nodes (boundary is zero for
/// Dirichlet fields).
pub fn inner_product(f: &ComplexField, g: &ComplexField) -> Complex64 {
    debug_assert_eq!(f.grid(), g.grid());
    let w = f.grid().cell_volume();
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in f.values().iter().zip(g.values()) {
        acc += a.conj() * b;
    }
    acc * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::eval_on_grid;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use std::f64::consts::PI;

    fn random_complex_field(grid: &Grid, seed: u64) -> ComplexField {
        let mut rng = crate::rng::stream(seed, 77, 0);
        let mut f = ComplexField::zeros(grid.clone());
        for flat in 0..grid.len() {
            if !grid.is_boundary(flat) {
                f.values_mut()[flat] =
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        f
    }

    fn small_magnetic_setup(n: usize, seed: u64) -> (Grid, MagneticHamiltonian) {
        let g = Grid::rect([-0.5, -0.5], [0.5, 0.5], [n, n]).unwrap();
        let v = eval_on_grid(&g, |p| 3.0 + (5.0 * p[0]).sin().powi(2) + p[1] * p[1]).unwrap();
        let spec = crate::model::MagneticSpec {
            bumps_per_axis: 3,
            b: 2.5,
            sigma_x: 0.3,
            sigma_y: 0.35,
            seed,
        };
        let (a, _) = crate::model::build_magnetic(&g, &spec).unwrap();
        let h = assemble(&g, &v, Some(&a), 0.5).unwrap();
        (g, h)
    }

    #[test]
    fn hermitian_to_machine_precision() {
        let (g, h) = small_magnetic_setup(9, 3);
        let f = random_complex_field(&g, 1);
        let w = random_complex_field(&g, 2);
        let lhs = inner_product(&f, &h.apply(&w).unwrap());
        let rhs = inner_product(&h.apply(&f).unwrap(), &w);
        let scale = lhs.norm().max(rhs.norm()).max(1.0);
        assert!((lhs - rhs).norm() / scale < 1e-12, "asymmetry {:e}", (lhs - rhs).norm() / scale);
    }

    #[test]
    fn rayleigh_quotient_is_real_and_bounded_below() {
        let (g, h) = small_magnetic_setup(9, 5);
        for seed in 0..5 {
            let f = random_complex_field(&g, 100 + seed);
            let num = inner_product(&f, &h.apply(&f).unwrap());
            let den = inner_product(&f, &f);
            let rq = num.re / den.re;
            assert!(num.im.abs() / num.norm().max(1e-300) < 1e-10);
            assert!(rq >= h.potential_min(), "rq {rq} below min V {}", h.potential_min());
        }
    }

    #[test]
    fn apply_matches_assembled_matrix() {
        let (g, h) = small_magnetic_setup(7, 11);
        let f = random_complex_field(&g, 9);
        let x = h.restrict(&f);
        let via_apply = h.apply_interior(&x);
        let m = h.banded_complex(0.0);
        let via_matrix = m.matvec(&x);
        for (a, b) in via_apply.iter().zip(&via_matrix) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn shifted_solve_inverts_apply() {
        let (g, h) = small_magnetic_setup(9, 13);
        let f = random_complex_field(&g, 21);
        let lambda = 1.7;
        let w = h.shifted_solve(lambda, &f).unwrap();
        let back = h.apply(&w).unwrap();
        // (H - lambda) w should reproduce f on the interior.
        for flat in 0..g.len() {
            let lhs = back.values()[flat] - w.values()[flat] * lambda;
            assert!((lhs - f.values()[flat]).norm() < 1e-9);
        }
    }

    #[test]
    fn real_fast_path_matches_complex_assembly() {
        let g = Grid::rect([-0.5, -0.5], [0.5, 0.5], [9, 9]).unwrap();
        let v = eval_on_grid(&g, |p| 1.0 + p[0].abs() + p[1].abs()).unwrap();
        let h = assemble(&g, &v, None, 0.5).unwrap();
        assert!(h.is_real());
        let f = random_complex_field(&g, 31);
        let x_fast = h.shifted_solve(0.9, &f).unwrap();
        let m = h.banded_complex(0.9);
        let lu = m.factor().unwrap();
        let x_ref = lu.solve(&h.restrict(&f));
        for (a, b) in h.restrict(&x_fast).iter().zip(&x_ref) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn constant_vector_potential_is_a_gauge_of_zero() {
        // 1D, A = a const: the transform adds grad chi, so chi = -a x cancels
        // the field on the lattice up to roundoff.
        let g = Grid::line(0.0, PI, 33).unwrap();
        let v = eval_on_grid(&g, |_| 1.0).unwrap();
        let a_const = 0.7;
        let a = VectorField::new(g.clone(), vec![eval_on_grid(&g, |_| a_const).unwrap()]).unwrap();
        let h_a = assemble(&g, &v, Some(&a), 0.5).unwrap();
        let h_0 = assemble(&g, &v, None, 0.5).unwrap();
        let chi = eval_on_grid(&g, |p| -a_const * p[0]).unwrap();
        let h_gauged = h_a.gauge_transform(&chi).unwrap();

        let f = random_complex_field(&g, 4);
        let lhs = h_gauged.apply(&f).unwrap();
        let rhs = h_0.apply(&f).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn gauge_transform_intertwines_with_field_conjugation() {
        let (g, h) = small_magnetic_setup(9, 17);
        let chi = eval_on_grid(&g, |p| (2.0 * p[0]).sin() + 0.5 * p[1]).unwrap();
        let hg = h.gauge_transform(&chi).unwrap();
        let psi = random_complex_field(&g, 8);
        // H' (e^{i chi} psi) == e^{i chi} (H psi), exactly in exact arithmetic.
        let lhs = hg.apply(&conjugate_field(&psi, &chi).unwrap()).unwrap();
        let rhs = conjugate_field(&h.apply(&psi).unwrap(), &chi).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            assert!((x - y).norm() < 1e-11);
        }
    }

    #[test]
    fn gauge_transform_matches_reassembly_with_gradient_added() {
        let g = Grid::rect([-0.5, -0.5], [0.5, 0.5], [33, 33]).unwrap();
        let v = eval_on_grid(&g, |_| 1.0).unwrap();
        let spec =
            crate::model::MagneticSpec { bumps_per_axis: 3, b: 1.5, sigma_x: 0.3, sigma_y: 0.3, seed: 2 };
        let (a, _) = crate::model::build_magnetic(&g, &spec).unwrap();
        let h = assemble(&g, &v, Some(&a), 0.5).unwrap();

        let chi_fn = |p: [f64; 2]| (3.0 * p[0]).sin() * (2.0 * p[1]).cos();
        let dchi = |p: [f64; 2]| {
            [3.0 * (3.0 * p[0]).cos() * (2.0 * p[1]).cos(), -2.0 * (3.0 * p[0]).sin() * (2.0 * p[1]).sin()]
        };
        let chi = eval_on_grid(&g, chi_fn).unwrap();
        let hg = h.gauge_transform(&chi).unwrap();

        let ax = eval_on_grid(&g, |p| a.component(0).sample(p) + dchi(p)[0]).unwrap();
        let ay = eval_on_grid(&g, |p| a.component(1).sample(p) + dchi(p)[1]).unwrap();
        let a_shifted = VectorField::new(g.clone(), vec![ax, ay]).unwrap();
        let h_re = assemble(&g, &v, Some(&a_shifted), 0.5).unwrap();

        // Link phases agree to O(h^2): midpoint rule vs exact difference of chi.
        let h0 = g.spacing(0);
        let mut worst: f64 = 0.0;
        for ax_dir in 0..2 {
            let (n_edges, _) = edge_layout(&g, ax_dir);
            for e in 0..n_edges {
                let d = (hg.phases[ax_dir][e] - h_re.phases[ax_dir][e]).norm();
                worst = worst.max(d);
            }
        }
        assert!(worst < 3.0 * h0 * h0, "worst phase gap {worst:e} at h = {h0:e}");
    }

    #[test]
    fn constant_chi_multiplies_by_global_phase() {
        let g = Grid::line(0.0, 1.0, 9).unwrap();
        let psi = random_complex_field(&g, 3);
        let chi = eval_on_grid(&g, |_| 0.9).unwrap();
        let rotated = conjugate_field(&psi, &chi).unwrap();
        let ph = Complex64::from_polar(1.0, 0.9);
        for (r, p) in rotated.values().iter().zip(psi.values()) {
            assert_abs_diff_eq!(r.re, (p * ph).re, epsilon = 1e-15);
            assert_abs_diff_eq!(r.im, (p * ph).im, epsilon = 1e-15);
        }
    }

    #[test]
    fn scale_and_potential_validation() {
        let g = Grid::line(0.0, 1.0, 5).unwrap();
        let v = eval_on_grid(&g, |_| 1.0).unwrap();
        assert!(assemble(&g, &v, None, 0.3).is_err());
        let mut neg = v.clone();
        neg.values_mut()[2] = -0.1;
        assert!(matches!(
            assemble(&g, &neg, None, 0.5),
            Err(CoreError::NegativePotential { index: 2, .. })
        ));
    }
}
