//! Uniform tensor grids on axis-aligned boxes, and fields living on them.
//!
//! Nodes are node-centered and include the boundary: along axis a the
//! coordinates are lower[a] + i * h[a] for i in 0..n[a], with
//! h[a] = (upper[a] - lower[a]) / (n[a] - 1). Flat storage is row-major with
//! axis 0 slowest: flat = i0 * n1 + i1 in 2D. The on-disk format and every
//! consumer of flat indices depend on this ordering; it is fixed.
//!
//! Dirichlet unknowns are the interior nodes only; boundary nodes exist in
//! fields (value 0 for anything solved) so plotting and interpolation see the
//! whole box.

use crate::error::{CoreError, Result};
use num_complex::Complex64;

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    lower: [f64; 2],
    upper: [f64; 2],
    n: [usize; 2],
}

impl Grid {
    pub fn line(lower: f64, upper: f64, n: usize) -> Result<Self> {
        Self::build(1, [lower, 0.0], [upper, 1.0], [n, 1])
    }

    pub fn rect(lower: [f64; 2], upper: [f64; 2], n: [usize; 2]) -> Result<Self> {
        Self::build(2, lower, upper, n)
    }

    fn build(dim: usize, lower: [f64; 2], upper: [f64; 2], n: [usize; 2]) -> Result<Self> {
        for a in 0..dim {
            if !lower[a].is_finite() || !upper[a].is_finite() {
                return Err(CoreError::InvalidGrid(format!(
                    "axis {a}: bounds must be finite, got [{}, {}]",
                    lower[a], upper[a]
                )));
            }
            if upper[a] <= lower[a] {
                return Err(CoreError::InvalidGrid(format!(
                    "axis {a}: upper {} must exceed lower {}",
                    upper[a], lower[a]
                )));
            }
            if n[a] < 3 {
                return Err(CoreError::InvalidGrid(format!(
                    "axis {a}: need at least 3 nodes for a nonempty interior, got {}",
                    n[a]
                )));
            }
        }
        Ok(Self { dim, lower, upper, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.lower[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.upper[axis]
    }

    pub fn n_nodes(&self, axis: usize) -> usize {
        self.n[axis]
    }

    /// Total node count including the boundary.
    pub fn len(&self) -> usize {
        match self.dim {
            1 => self.n[0],
            _ => self.n[0] * self.n[1],
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.n[axis] - 1) as f64
    }

    /// Cell volume h^d used as the quadrature weight for inner products.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// The single source of truth for node coordinates: lower + i * h, never
    /// accumulated, so coordinates are bit-identical wherever they are computed.
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + i as f64 * self.spacing(axis)
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat / self.n[1], flat % self.n[1]],
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.n[1] + idx[1],
        }
    }

    pub fn node_coord(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let mut p = [0.0; 2];
        for a in 0..self.dim {
            p[a] = self.axis_coord(a, idx[a]);
        }
        p
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        (0..self.dim).any(|a| idx[a] == 0 || idx[a] == self.n[a] - 1)
    }

    pub fn interior_counts(&self) -> [usize; 2] {
        let mut c = [1, 1];
        for a in 0..self.dim {
            c[a] = self.n[a] - 2;
        }
        c
    }

    pub fn interior_len(&self) -> usize {
        let c = self.interior_counts();
        match self.dim {
            1 => c[0],
            _ => c[0] * c[1],
        }
    }

    /// Interior enumeration follows the same row-major order as flat indices.
    pub fn interior_index(&self, flat: usize) -> Option<usize> {
        let idx = self.multi_index(flat);
        if self.is_boundary(flat) {
            return None;
        }
        let c = self.interior_counts();
        Some(match self.dim {
            1 => idx[0] - 1,
            _ => (idx[0] - 1) * c[1] + (idx[1] - 1),
        })
    }

    pub fn interior_to_flat(&self, interior: usize) -> usize {
        let c = self.interior_counts();
        match self.dim {
            1 => interior + 1,
            _ => (interior / c[1] + 1) * self.n[1] + (interior % c[1] + 1),
        }
    }

    /// Strict membership in the open box.
    pub fn contains_open(&self, p: Point) -> bool {
        (0..self.dim).all(|a| p[a] > self.lower[a] && p[a] < self.upper[a])
    }

    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        (0..self.dim)
            .map(|a| (p[a] - self.lower[a]).min(self.upper[a] - p[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn midpoint(&self) -> Point {
        let mut p = [0.0; 2];
        for a in 0..self.dim {
            p[a] = 0.5 * (self.lower[a] + self.upper[a]);
        }
        p
    }

    fn same_as(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(CoreError::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Cell index and normalized offset for interpolation; the point is clamped
    /// to the closed box first so roundoff at the walls cannot index outside.
    fn locate(&self, axis: usize, x: f64) -> (usize, f64) {
        let h = self.spacing(axis);
        let t = (x - self.lower[axis]) / h;
        let max_cell = self.n[axis] - 2;
        let i = (t.floor() as isize).clamp(0, max_cell as isize) as usize;
        let frac = (t - i as f64).clamp(0.0, 1.0);
        (i, frac)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::InvalidArgument(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| v.abs().max(m))
    }

    /// Multilinear interpolation; exact at nodes.
    pub fn sample(&self, p: Point) -> f64 {
        match self.grid.dim() {
            1 => {
                let (i, t) = self.grid.locate(0, p[0]);
                (1.0 - t) * self.values[i] + t * self.values[i + 1]
            }
            _ => {
                let (i, t) = self.grid.locate(0, p[0]);
                let (j, s) = self.grid.locate(1, p[1]);
                let n1 = self.grid.n_nodes(1);
                let v00 = self.values[i * n1 + j];
                let v01 = self.values[i * n1 + j + 1];
                let v10 = self.values[(i + 1) * n1 + j];
                let v11 = self.values[(i + 1) * n1 + j + 1];
                (1.0 - t) * ((1.0 - s) * v00 + s * v01) + t * ((1.0 - s) * v10 + s * v11)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::InvalidArgument(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_real(f: &ScalarField) -> Self {
        Self {
            grid: f.grid.clone(),
            values: f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| v.norm().max(m))
    }

    /// Pointwise modulus as a real field.
    pub fn modulus(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.norm()).collect(),
        }
    }

    pub fn sample(&self, p: Point) -> Complex64 {
        match self.grid.dim() {
            1 => {
                let (i, t) = self.grid.locate(0, p[0]);
                self.values[i] * (1.0 - t) + self.values[i + 1] * t
            }
            _ => {
                let (i, t) = self.grid.locate(0, p[0]);
                let (j, s) = self.grid.locate(1, p[1]);
                let n1 = self.grid.n_nodes(1);
                let v00 = self.values[i * n1 + j];
                let v01 = self.values[i * n1 + j + 1];
                let v10 = self.values[(i + 1) * n1 + j];
                let v11 = self.values[(i + 1) * n1 + j + 1];
                (v00 * (1.0 - s) + v01 * s) * (1.0 - t) + (v10 * (1.0 - s) + v11 * s) * t
            }
        }
    }
}

/// One full-grid scalar component per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(grid: Grid, components: Vec<ScalarField>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(CoreError::InvalidArgument(format!(
                "expected {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        for c in &components {
            grid.same_as(c.grid())?;
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: Grid) -> Self {
        let components = (0..grid.dim()).map(|_| ScalarField::zeros(grid.clone())).collect();
        Self { grid, components }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }
}

/// Evaluates f at every node; rejects non-finite results naming the node.
pub fn eval_on_grid<F: Fn(Point) -> f64>(grid: &Grid, f: F) -> Result<ScalarField> {
    let mut values = Vec::with_capacity(grid.len());
    for flat in 0..grid.len() {
        let p = grid.node_coord(flat);
        let v = f(p);
        if !v.is_finite() {
            return Err(CoreError::NonFinite { index: flat, coords: p, value: v });
        }
        values.push(v);
    }
    ScalarField::new(grid.clone(), values)
}
