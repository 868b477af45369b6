//! Landscape function u solving (s(-Delta) + V) u = 1 with Dirichlet walls,
//! the eigenfunction bound lambda*u derived from it, and the smoothed (local)
//! landscape V_t = V * k_t computed through a Fourier multiplier.
//!
//! The smoothing kernel k_t is the time average of the heat kernel, so its
//! transform is m_t(xi) = (1 - e^{-t |xi|^2}) / (t |xi|^2), evaluated in
//! closed form on a zero-padded grid; k_t is never tabulated in space.

use crate::error::{CoreError, Result};
use crate::grid::{Grid, ScalarField};
use crate::operator::MagneticHamiltonian;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Relative residual demanded from the landscape solve.
const LANDSCAPE_RESIDUAL_TOL: f64 = 1e-10;

/// Solves (s(-Delta_h) + V) u = 1 on the interior, u = 0 on the walls.
/// V >= 0 makes the system an M-matrix, so u > 0 holds on the interior and is
/// verified here.
pub fn solve_landscape(grid: &Grid, v: &ScalarField, scale: f64) -> Result<ScalarField> {
    let h = crate::operator::assemble(grid, v, None, scale)?;
    solve_landscape_with(&h)
}

/// Same, reusing an assembled Hamiltonian (ignores its magnetic phases; the
/// landscape equation is the A = 0 comparison problem).
pub fn solve_landscape_with(h: &MagneticHamiltonian) -> Result<ScalarField> {
    let grid = h.grid();
    let ones = vec![Complex64::new(1.0, 0.0); grid.interior_len()];
    // The A = 0 operator shares V and scale with h but not its phases; build a
    // dedicated real operator to keep this the comparison problem.
    let v = ScalarField::new(grid.clone(), h.potential().to_vec())?;
    let real_h = crate::operator::assemble(grid, &v, None, h.scale())?;
    let u_int = real_h.shifted_solve_interior(0.0, &ones)?;

    // Residual in the sup norm, relative to the unit right-hand side.
    let back = real_h.apply_interior(&u_int);
    let mut resid: f64 = 0.0;
    for b in &back {
        resid = resid.max((b - Complex64::new(1.0, 0.0)).norm());
    }
    if resid > LANDSCAPE_RESIDUAL_TOL {
        return Err(CoreError::SolverBreakdown { residual: resid, tol: LANDSCAPE_RESIDUAL_TOL });
    }

    let mut u = ScalarField::zeros(grid.clone());
    for (r, val) in u_int.iter().enumerate() {
        let flat = grid.interior_to_flat(r);
        if val.re <= -1e-14 {
            return Err(CoreError::SolverBreakdown { residual: -val.re, tol: 1e-14 });
        }
        u.values_mut()[flat] = val.re;
    }
    Ok(u)
}

/// lambda * u and the region where that bound permits |phi|/max|phi| to reach
/// its ceiling: {lambda u >= 1}.
pub struct FmBound {
    pub bound: ScalarField,
    pub active: Vec<bool>,
}

pub fn fm_bound(u: &ScalarField, lambda: f64) -> Result<FmBound> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "eigenvalue must be positive and finite, got {lambda}"
        )));
    }
    let mut bound = u.clone();
    for v in bound.values_mut() {
        *v *= lambda;
    }
    let active = bound.values().iter().map(|&b| b >= 1.0).collect();
    Ok(FmBound { bound, active })
}

#[derive(Clone, Debug)]
pub struct LocalLandscapeParams {
    pub t: f64,
    /// Zero-padding nodes per side; defaults to one domain width per axis.
    pub padding: Option<usize>,
}

/// Closed-form multiplier of the time-averaged heat kernel; continuous at 0
/// (series below the roundoff knee), values in (0, 1].
pub fn heat_average_multiplier(t: f64, xi2: f64) -> f64 {
    let z = t * xi2;
    if z < 1e-9 {
        // (1 - e^{-z})/z = 1 - z/2 + O(z^2); below the branch point the
        // quadratic term is under 1e-18.
        1.0 - 0.5 * z
    } else {
        // exp_m1 keeps full precision where 1 - e^{-z} would cancel.
        -(-z).exp_m1() / z
    }
}

/// V * k_t on the nodes of V's grid via real-to-complex FFT on a zero-padded
/// extension. Accuracy holds away from a boundary collar of width ~3 sqrt(t)
/// where the free-space convolution sees the zero extension.
pub fn local_landscape(v: &ScalarField, params: &LocalLandscapeParams) -> Result<ScalarField> {
    if !(params.t.is_finite() && params.t > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "smoothing time must be positive, got {}",
            params.t
        )));
    }
    let grid = v.grid();
    let dim = grid.dim();

    let mut n_pad = [1usize; 2];
    let mut pad = [0usize; 2];
    for a in 0..dim {
        let n = grid.n_nodes(a);
        let p = params.padding.unwrap_or(n - 1);
        pad[a] = p;
        n_pad[a] = n + 2 * p;
    }

    let mut planner = FftPlanner::<f64>::new();

    match dim {
        1 => {
            let n = grid.n_nodes(0);
            let (np, p) = (n_pad[0], pad[0]);
            let h = grid.spacing(0);
            let mut buf = vec![Complex64::new(0.0, 0.0); np];
            for i in 0..n {
                buf[i + p] = Complex64::new(v.values()[i], 0.0);
            }
            planner.plan_fft_forward(np).process(&mut buf);
            for (k, val) in buf.iter_mut().enumerate() {
                let xi = frequency(k, np, h);
                *val *= heat_average_multiplier(params.t, xi * xi);
            }
            planner.plan_fft_inverse(np).process(&mut buf);
            let scale = 1.0 / np as f64;
            let mut out = ScalarField::zeros(grid.clone());
            for i in 0..n {
                out.values_mut()[i] = buf[i + p].re * scale;
            }
            Ok(out)
        }
        _ => {
            let (n0, n1) = (grid.n_nodes(0), grid.n_nodes(1));
            let (np0, np1) = (n_pad[0], n_pad[1]);
            let (h0, h1) = (grid.spacing(0), grid.spacing(1));
            let mut buf = vec![Complex64::new(0.0, 0.0); np0 * np1];
            for i in 0..n0 {
                for j in 0..n1 {
                    buf[(i + pad[0]) * np1 + j + pad[1]] =
                        Complex64::new(v.values()[i * n1 + j], 0.0);
                }
            }

            let fft_rows = planner.plan_fft_forward(np1);
            for row in buf.chunks_exact_mut(np1) {
                fft_rows.process(row);
            }
            let fft_cols = planner.plan_fft_forward(np0);
            let mut col = vec![Complex64::new(0.0, 0.0); np0];
            for j in 0..np1 {
                for i in 0..np0 {
                    col[i] = buf[i * np1 + j];
                }
                fft_cols.process(&mut col);
                for i in 0..np0 {
                    buf[i * np1 + j] = col[i];
                }
            }

            for i in 0..np0 {
                let xi0 = frequency(i, np0, h0);
                for j in 0..np1 {
                    let xi1 = frequency(j, np1, h1);
                    buf[i * np1 + j] *= heat_average_multiplier(params.t, xi0 * xi0 + xi1 * xi1);
                }
            }

            let ifft_rows = planner.plan_fft_inverse(np1);
            for row in buf.chunks_exact_mut(np1) {
                ifft_rows.process(row);
            }
            let ifft_cols = planner.plan_fft_inverse(np0);
            for j in 0..np1 {
                for i in 0..np0 {
                    col[i] = buf[i * np1 + j];
                }
                ifft_cols.process(&mut col);
                for i in 0..np0 {
                    buf[i * np1 + j] = col[i];
                }
            }

            let scale = 1.0 / (np0 * np1) as f64;
            let mut out = ScalarField::zeros(grid.clone());
            for i in 0..n0 {
                for j in 0..n1 {
                    out.values_mut()[i * n1 + j] =
                        buf[(i + pad[0]) * np1 + j + pad[1]].re * scale;
                }
            }
            Ok(out)
        }
    }
}

/// Angular frequency of DFT bin k on an n-point grid with spacing h.
fn frequency(k: usize, n: usize, h: f64) -> f64 {
    let signed = if k <= n / 2 { k as isize } else { k as isize - n as isize };
    2.0 * std::f64::consts::PI * signed as f64 / (n as f64 * h)
}
