//! Random Gaussian-bump models for the potential V and vector potential A.
//!
//! V(p) = offset + sum_i v_i exp(-|p - c_i|^2 / sigma^2) with weights v_i drawn
//! uniformly from [weight_low, weight_high]. Bump centers sit on the closed
//! uniform lattice over the box: along each axis, c = lower + (i / (B-1)) *
//! (upper - lower) for i in 0..B (midpoint when B = 1).
//!
//! A = b * (sum_i a_i^x G_x(p - c_i), -sum_i a_i^y G_y(p - c_i)) with standard
//! normal amplitudes. The field strength b multiplies the finished sums, so
//! scaling b scales A with one rounding: A(2b) == 2 * A(b) bit for bit.
//!
//! Every weight comes from its own counter-based stream keyed by (seed, index),
//! so construction order and threading cannot change a model.

use crate::error::{CoreError, Result};
use crate::grid::{eval_on_grid, Grid, Point, ScalarField, VectorField};
use crate::rng::{stream, tag};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub bumps_per_axis: usize,
    pub weight_low: f64,
    pub weight_high: f64,
    pub sigma: f64,
    pub offset: f64,
    pub seed: u64,
}

impl PotentialSpec {
    fn validate(&self) -> Result<()> {
        if self.bumps_per_axis < 1 {
            return Err(CoreError::InvalidSpec("bumps_per_axis must be at least 1".into()));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(CoreError::InvalidSpec(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.weight_low.is_finite() && self.weight_high.is_finite())
            || self.weight_low > self.weight_high
        {
            return Err(CoreError::InvalidSpec(format!(
                "weight range [{}, {}] is invalid",
                self.weight_low, self.weight_high
            )));
        }
        if self.weight_low < 0.0 {
            return Err(CoreError::InvalidSpec("weights must be nonnegative (V >= 0)".into()));
        }
        if !(self.offset.is_finite() && self.offset >= 0.0) {
            return Err(CoreError::InvalidSpec(format!(
                "offset must be finite and nonnegative, got {}",
                self.offset
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagneticSpec {
    pub bumps_per_axis: usize,
    pub b: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub seed: u64,
}

impl MagneticSpec {
    fn validate(&self) -> Result<()> {
        if self.bumps_per_axis < 1 {
            return Err(CoreError::InvalidSpec("bumps_per_axis must be at least 1".into()));
        }
        for (name, s) in [("sigma_x", self.sigma_x), ("sigma_y", self.sigma_y)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(CoreError::InvalidSpec(format!("{name} must be positive, got {s}")));
            }
        }
        if !self.b.is_finite() {
            return Err(CoreError::InvalidSpec(format!("b must be finite, got {}", self.b)));
        }
        Ok(())
    }
}

/// Lattice of bump centers over the closed box of `grid`, in weight-index
/// order (row-major, axis 0 slowest).
fn centers(grid: &Grid, bumps_per_axis: usize) -> Vec<Point> {
    let b = bumps_per_axis;
    let axis_center = |a: usize, i: usize| -> f64 {
        if b == 1 {
            0.5 * (grid.lower(a) + grid.upper(a))
        } else {
            grid.lower(a) + (i as f64 / (b - 1) as f64) * (grid.upper(a) - grid.lower(a))
        }
    };
    match grid.dim() {
        1 => (0..b).map(|i| [axis_center(0, i), 0.0]).collect(),
        _ => {
            let mut out = Vec::with_capacity(b * b);
            for ix in 0..b {
                for iy in 0..b {
                    out.push([axis_center(0, ix), axis_center(1, iy)]);
                }
            }
            out
        }
    }
}

/// Evaluable potential: the grid-free ground truth behind `build_potential`.
#[derive(Clone, Debug)]
pub struct PotentialModel {
    dim: usize,
    offset: f64,
    inv_sigma2: f64,
    centers: Vec<Point>,
    weights: Vec<f64>,
}

impl PotentialModel {
    pub fn new(grid: &Grid, spec: &PotentialSpec) -> Result<Self> {
        spec.validate()?;
        let centers = centers(grid, spec.bumps_per_axis);
        let weights = (0..centers.len())
            .map(|i| {
                let mut rng = stream(spec.seed, tag::POTENTIAL_WEIGHTS, i as u64);
                if spec.weight_high > spec.weight_low {
                    rng.gen_range(spec.weight_low..spec.weight_high)
                } else {
                    spec.weight_low
                }
            })
            .collect();
        Ok(Self {
            dim: grid.dim(),
            offset: spec.offset,
            inv_sigma2: 1.0 / (spec.sigma * spec.sigma),
            centers,
            weights,
        })
    }

    pub fn eval(&self, p: Point) -> f64 {
        let mut acc = 0.0;
        for (c, w) in self.centers.iter().zip(&self.weights) {
            let dx = p[0] - c[0];
            let mut r2 = dx * dx;
            if self.dim == 2 {
                let dy = p[1] - c[1];
                r2 += dy * dy;
            }
            acc += w * (-r2 * self.inv_sigma2).exp();
        }
        self.offset + acc
    }
}

pub fn build_potential(grid: &Grid, spec: &PotentialSpec) -> Result<ScalarField> {
    let model = PotentialModel::new(grid, spec)?;
    eval_on_grid(grid, |p| model.eval(p))
}

/// Evaluable vector potential with its exact divergence.
#[derive(Clone, Debug)]
pub struct MagneticModel {
    dim: usize,
    b: f64,
    inv_sx2: f64,
    inv_sy2: f64,
    centers: Vec<Point>,
    weights_x: Vec<f64>,
    weights_y: Vec<f64>,
}

impl MagneticModel {
    pub fn new(grid: &Grid, spec: &MagneticSpec) -> Result<Self> {
        spec.validate()?;
        let centers = if grid.dim() == 1 { Vec::new() } else { centers(grid, spec.bumps_per_axis) };
        let normal = |t: u64, i: usize| -> f64 {
            stream(spec.seed, t, i as u64).sample(StandardNormal)
        };
        let weights_x = (0..centers.len()).map(|i| normal(tag::MAGNETIC_X, i)).collect();
        let weights_y = (0..centers.len()).map(|i| normal(tag::MAGNETIC_Y, i)).collect();
        Ok(Self {
            dim: grid.dim(),
            b: spec.b,
            inv_sx2: 1.0 / (spec.sigma_x * spec.sigma_x),
            inv_sy2: 1.0 / (spec.sigma_y * spec.sigma_y),
            centers,
            weights_x,
            weights_y,
        })
    }

    /// A(p). Zero in 1D.
    pub fn eval(&self, p: Point) -> [f64; 2] {
        let (a, _) = self.eval_with_divergence_raw(p, false);
        a
    }

    /// div A(p) in closed form.
    pub fn divergence(&self, p: Point) -> f64 {
        let (_, d) = self.eval_with_divergence_raw(p, true);
        d
    }

    /// One pass over the bumps for A and div A together; the exponentials are
    /// shared between the two components when sigma_x == sigma_y.
    pub fn eval_with_divergence(&self, p: Point) -> ([f64; 2], f64) {
        self.eval_with_divergence_raw(p, true)
    }

    fn eval_with_divergence_raw(&self, p: Point, want_div: bool) -> ([f64; 2], f64) {
        if self.dim == 1 {
            return ([0.0, 0.0], 0.0);
        }
        let shared_sigma = self.inv_sx2 == self.inv_sy2;
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sdiv = 0.0;
        for (i, c) in self.centers.iter().enumerate() {
            let dx = p[0] - c[0];
            let dy = p[1] - c[1];
            let r2 = dx * dx + dy * dy;
            let ex = (-r2 * self.inv_sx2).exp();
            let ey = if shared_sigma { ex } else { (-r2 * self.inv_sy2).exp() };
            let wx = self.weights_x[i];
            let wy = self.weights_y[i];
            sx += wx * ex;
            sy -= wy * ey;
            if want_div {
                sdiv += wx * (-2.0 * dx * self.inv_sx2) * ex - wy * (-2.0 * dy * self.inv_sy2) * ey;
            }
        }
        ([self.b * sx, self.b * sy], self.b * sdiv)
    }
}

/// Builds A on the grid. In 1D the field is identically zero and a warning is
/// returned for the caller's manifest.
pub fn build_magnetic(grid: &Grid, spec: &MagneticSpec) -> Result<(VectorField, Option<String>)> {
    let model = MagneticModel::new(grid, spec)?;
    if grid.dim() == 1 {
        return Ok((
            VectorField::zeros(grid.clone()),
            Some("magnetic spec on a 1d grid: vector potential is identically zero".into()),
        ));
    }
    let ax = eval_on_grid(grid, |p| model.eval(p)[0])?;
    let ay = eval_on_grid(grid, |p| model.eval(p)[1])?;
    Ok((VectorField::new(grid.clone(), vec![ax, ay])?, None))
}

pub fn divergence_analytic(grid: &Grid, spec: &MagneticSpec, p: Point) -> Result<f64> {
    Ok(MagneticModel::new(grid, spec)?.divergence(p))
}
