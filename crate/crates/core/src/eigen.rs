//! Low-lying eigenpairs: a resolvent monitor locates candidate eigenvalues on
//! a lambda scan, inverse power iteration with Rayleigh-quotient refinement
//! sharpens them, and deflation keeps clustered states apart.

use crate::error::{CoreError, Result};
use crate::grid::{ComplexField, Grid};
use crate::operator::MagneticHamiltonian;
use crate::rng::{stream, tag};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Probe pair for the monitor phi_{f,g}(lambda) = 1 / integral f (H-l)^{-1} g.
#[derive(Clone, Debug)]
pub struct MonitorProbe {
    pub f: ComplexField,
    pub g: ComplexField,
    pub seed: u64,
}

const PROBE_BUMPS: usize = 8;

impl MonitorProbe {
    /// Deterministic default probes: superpositions of 8 wide Gaussian bumps
    /// with complex normal amplitudes, one stream per bump.
    pub fn random(grid: &Grid, seed: u64) -> Result<Self> {
        let f = random_bumps(grid, seed, tag::PROBE_F)?;
        let g = random_bumps(grid, seed, tag::PROBE_G)?;
        Ok(Self { f, g, seed })
    }
}

fn random_bumps(grid: &Grid, seed: u64, tag: u64) -> Result<ComplexField> {
    let dim = grid.dim();
    let mut extent = f64::INFINITY;
    for a in 0..dim {
        extent = extent.min(grid.upper(a) - grid.lower(a));
    }
    let mut bumps = Vec::with_capacity(PROBE_BUMPS);
    for i in 0..PROBE_BUMPS {
        let mut rng = stream(seed, tag, i as u64);
        let mut center = [0.0f64; 2];
        for c in center.iter_mut().take(dim) {
            *c = rng.gen::<f64>();
        }
        // Widths of 0.15 to 0.35 of the box keep the probes low-frequency.
        let width = (0.15 + 0.2 * rng.gen::<f64>()) * extent;
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        bumps.push((center, width, Complex64::new(re, im)));
    }
    let mut field = ComplexField::zeros(grid.clone());
    for flat in 0..grid.len() {
        let p = grid.node_coord(flat);
        let mut acc = Complex64::new(0.0, 0.0);
        for (center, width, coeff) in &bumps {
            let mut r2 = 0.0;
            for a in 0..dim {
                let c = grid.lower(a) + center[a] * (grid.upper(a) - grid.lower(a));
                r2 += (p[a] - c) * (p[a] - c);
            }
            acc += *coeff * (-r2 / (width * width)).exp();
        }
        field.values_mut()[flat] = acc;
    }
    if field.max_modulus() == 0.0 {
        return Err(CoreError::InvalidArgument("probe field is identically zero".into()));
    }
    Ok(field)
}

/// phi_{f,g}(lambda): reciprocal of the h^d-weighted sum of f * (H-lambda)^{-1} g
/// over interior nodes (no conjugation on f). Poles of the resolvent become
/// zeros, so |phi| dips at eigenvalues. A resolvent breakdown is reported as
/// the shift sitting on an eigenvalue.
pub fn monitor(
    h: &MagneticHamiltonian,
    probe: &MonitorProbe,
    lambda: f64,
) -> Result<Complex64> {
    let grid = h.grid();
    let g_int = h.restrict(&probe.g);
    let w = h.shifted_solve_interior(lambda, &g_int)?;
    let f_int = h.restrict(&probe.f);
    let mut acc = Complex64::new(0.0, 0.0);
    for (fv, wv) in f_int.iter().zip(&w) {
        acc += fv * wv;
    }
    let mut vol = 1.0;
    for a in 0..grid.dim() {
        vol *= grid.spacing(a);
    }
    let integral = vol * acc;
    if integral.norm() == 0.0 {
        return Err(CoreError::EigenSearch(
            "monitor integral vanished; probes are orthogonal to the resolvent image".into(),
        ));
    }
    Ok(1.0 / integral)
}

#[derive(Clone, Copy, Debug)]
pub struct ScanPoint {
    pub lambda: f64,
    /// |phi|; exactly 0 when the resolvent broke down at this shift.
    pub magnitude: f64,
    pub minimum: bool,
}

/// Evaluates |phi| over the lambda grid and flags strict interior local
/// minima. Endpoints are never flagged.
pub fn scan_monitor(
    h: &MagneticHamiltonian,
    probe: &MonitorProbe,
    lambda_grid: &[f64],
) -> Result<Vec<ScanPoint>> {
    if lambda_grid.len() < 3 {
        return Err(CoreError::InvalidArgument("lambda grid needs at least 3 points".into()));
    }
    for w in lambda_grid.windows(2) {
        if !(w[0] < w[1]) {
            return Err(CoreError::InvalidArgument("lambda grid must be strictly increasing".into()));
        }
    }
    let mut points: Vec<ScanPoint> = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let magnitude = match monitor(h, probe, lambda) {
            Ok(phi) => phi.norm(),
            Err(CoreError::ShiftOnEigenvalue { .. }) => 0.0,
            Err(e) => return Err(e),
        };
        points.push(ScanPoint { lambda, magnitude, minimum: false });
    }
    for i in 1..points.len() - 1 {
        points[i].minimum = points[i].magnitude < points[i - 1].magnitude
            && points[i].magnitude < points[i + 1].magnitude;
    }
    Ok(points)
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub lambda: f64,
    /// Full-grid eigenfunction, zero on the walls, max modulus 1, phase fixed
    /// so the first maximal-modulus node is real positive.
    pub phi: ComplexField,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

const WARMUP_STEPS: usize = 3;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Removes the components of x along each deflated interior vector.
fn project_off(x: &mut [Complex64], deflate: &[Vec<Complex64>]) {
    for d in deflate {
        let n2 = d.iter().map(|v| v.norm_sqr()).sum::<f64>();
        if n2 == 0.0 {
            continue;
        }
        let alpha = dot(d, x) / n2;
        for (xi, di) in x.iter_mut().zip(d) {
            *xi -= alpha * di;
        }
    }
}

/// Inverse power iteration from shift lambda0: three fixed-shift warmup steps
/// (reusing one factorization), then Rayleigh-quotient updates. Returns the
/// best iterate flagged unconverged when max_iter runs out.
pub fn inverse_power(
    h: &MagneticHamiltonian,
    lambda0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair> {
    inverse_power_deflated(h, lambda0, tol, max_iter, 0, 0, &[])
}

pub fn inverse_power_deflated(
    h: &MagneticHamiltonian,
    lambda0: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
    start_index: u64,
    accepted: &[EigenPair],
) -> Result<EigenPair> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CoreError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(CoreError::InvalidArgument("max_iter must be positive".into()));
    }
    let m = h.grid().interior_len();
    let deflate: Vec<Vec<Complex64>> = accepted.iter().map(|p| h.restrict(&p.phi)).collect();

    let mut x: Vec<Complex64> = {
        let mut rng = stream(seed, tag::EIGEN_START, start_index);
        (0..m)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im)
            })
            .collect()
    };
    project_off(&mut x, &deflate);
    let nx = norm(&x);
    if nx == 0.0 {
        return Err(CoreError::EigenSearch("start vector lies in the deflated span".into()));
    }
    for v in &mut x {
        *v /= nx;
    }

    let shift_scale = h.potential_min().abs().max(lambda0.abs()).max(1.0);
    let mut sigma = lambda0;
    let mut lambda = lambda0;
    let mut best: Option<(f64, f64, Vec<Complex64>)> = None;
    let mut iterations = 0;
    let mut nudges = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut y = match h.shifted_solve_interior(sigma, &x) {
            Ok(y) => y,
            Err(CoreError::ShiftOnEigenvalue { .. }) if nudges < 3 => {
                // The shift landed on an eigenvalue; step off it slightly.
                nudges += 1;
                sigma += 1e-10 * shift_scale * 10f64.powi(nudges);
                continue;
            }
            Err(e) => return Err(e),
        };
        project_off(&mut y, &deflate);
        let ny = norm(&y);
        if ny == 0.0 {
            return Err(CoreError::EigenSearch("iterate collapsed under deflation".into()));
        }
        for v in &mut y {
            *v /= ny;
        }
        let hy = h.apply_interior(&y);
        let rq = dot(&y, &hy);
        debug_assert!(rq.im.abs() < 1e-8 * rq.re.abs().max(1.0));
        lambda = rq.re;
        let mut res2 = 0.0;
        for (hv, yv) in hy.iter().zip(&y) {
            res2 += (hv - lambda * yv).norm_sqr();
        }
        let residual = res2.sqrt();
        if best.as_ref().map_or(true, |(r, _, _)| residual < *r) {
            best = Some((residual, lambda, y.clone()));
        }
        x = y;
        if residual <= tol {
            break;
        }
        if iterations >= WARMUP_STEPS {
            sigma = lambda;
        }
    }

    let (residual, lambda, interior) = best.unwrap_or((f64::INFINITY, lambda, x));
    let mut phi = h.extend(&interior);
    normalize_pair(&mut phi);
    Ok(EigenPair { lambda, phi, residual, iterations, converged: residual <= tol })
}

/// Scales to max modulus 1 and rotates so the first maximal node is real
/// positive; real fields stay real.
fn normalize_pair(phi: &mut ComplexField) {
    let mut best = 0usize;
    let mut best_mod = 0.0;
    for (i, v) in phi.values().iter().enumerate() {
        let m = v.norm();
        if m > best_mod * (1.0 + 1e-12) {
            best_mod = m;
            best = i;
        }
    }
    if best_mod == 0.0 {
        return;
    }
    let rot = phi.values()[best].conj() / (best_mod * best_mod);
    for v in phi.values_mut() {
        *v *= rot;
    }
}

#[derive(Clone, Debug)]
pub struct EigenSettings {
    /// Scan window; defaults to [min V, min V + 40 * scan_step].
    pub scan_min: Option<f64>,
    pub scan_max: Option<f64>,
    pub scan_step: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_pairs: usize,
    pub probe_seed: u64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            scan_min: None,
            scan_max: None,
            scan_step: 0.05,
            tol: 1e-10,
            max_iter: 60,
            max_pairs: 4,
            probe_seed: 12,
        }
    }
}

/// How many times the scan window may double past scan_max before giving up.
const MAX_SCAN_EXTENSIONS: usize = 8;

/// Finds the lowest max_pairs eigenpairs: scan the monitor, refine each dip,
/// deflate accepted states, extend the window upward until enough pairs
/// converge. Results are sorted by eigenvalue.
pub fn find_lowest_pairs(
    h: &MagneticHamiltonian,
    settings: &EigenSettings,
) -> Result<Vec<EigenPair>> {
    if !(settings.scan_step.is_finite() && settings.scan_step > 0.0) {
        return Err(CoreError::InvalidArgument("scan_step must be positive".into()));
    }
    if settings.max_pairs == 0 {
        return Ok(Vec::new());
    }
    let probe = MonitorProbe::random(h.grid(), settings.probe_seed)?;
    let lo = settings.scan_min.unwrap_or_else(|| h.potential_min());
    let default_hi = lo + 40.0 * settings.scan_step;
    let mut window_lo = lo;
    let mut window_hi = settings.scan_max.unwrap_or(default_hi).max(lo + 3.0 * settings.scan_step);

    let mut accepted: Vec<EigenPair> = Vec::new();
    let mut refine_counter = 0u64;
    'extend: for extension in 0..=MAX_SCAN_EXTENSIONS {
        let n_points = ((window_hi - window_lo) / settings.scan_step).ceil() as usize + 1;
        let grid_vals: Vec<f64> =
            (0..n_points.max(3)).map(|i| window_lo + i as f64 * settings.scan_step).collect();
        let scan = scan_monitor(h, &probe, &grid_vals)?;
        for point in scan.iter().filter(|p| p.minimum) {
            // Refine the same dip repeatedly with deflation so degenerate
            // eigenvalues yield their full multiplicity; an iterate that
            // converges away from the dip belongs to another dip and ends
            // this one.
            loop {
                if accepted.len() >= settings.max_pairs {
                    break 'extend;
                }
                let pair = inverse_power_deflated(
                    h,
                    point.lambda,
                    settings.tol,
                    settings.max_iter,
                    settings.probe_seed,
                    refine_counter,
                    &accepted,
                )?;
                refine_counter += 1;
                if !pair.converged || (pair.lambda - point.lambda).abs() > 1.5 * settings.scan_step
                {
                    break;
                }
                let duplicate = accepted.iter().any(|a| {
                    let overlap = crate::operator::inner_product(&a.phi, &pair.phi).norm();
                    let na = crate::operator::inner_product(&a.phi, &a.phi).norm();
                    let np = crate::operator::inner_product(&pair.phi, &pair.phi).norm();
                    overlap * overlap > 0.5 * na * np
                });
                if duplicate {
                    break;
                }
                accepted.push(pair);
            }
        }
        if accepted.len() >= settings.max_pairs {
            break;
        }
        if extension == MAX_SCAN_EXTENSIONS {
            return Err(CoreError::EigenSearch(format!(
                "found {} of {} requested pairs with the scan window up to {window_hi}",
                accepted.len(),
                settings.max_pairs
            )));
        }
        // Continue above the current window, doubling the total span; the
        // two-step overlap keeps a dip at the seam visible.
        let width = window_hi - lo;
        window_lo = window_hi - 2.0 * settings.scan_step;
        window_hi += width.max(3.0 * settings.scan_step);
    }
    accepted.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(accepted)
}
