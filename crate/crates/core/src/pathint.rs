//! Monte Carlo engine for Brownian-path functionals: survival-weighted
//! potential actions, the landscape time-integral identity, the regularized
//! potential, and the complex magnetic propagator.
//!
//! Increments are Normal(0, dt I) per axis (generator one half Laplacian).
//! Path p always draws from stream (seed, PATHS, p), so estimates are
//! bit-identical across thread counts: paths are simulated in fixed chunks
//! and the chunk moments combined by a fixed-shape pairwise tree.

use crate::error::{CoreError, Result};
use crate::grid::{ComplexField, Grid, Point, ScalarField};
use crate::model::MagneticModel;
use crate::rng::{stream, tag};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::io::Write;

/// Fixed chunk width for the deterministic reduction.
const CHUNK: usize = 4096;

/// 2ab/dt beyond this makes the wall-crossing probability under 4e-18; the
/// exponential is skipped.
const BRIDGE_EXP_CUTOFF: f64 = 40.0;

#[derive(Clone, Debug)]
pub struct PathConfig {
    pub n_paths: usize,
    pub dt: f64,
    /// Evaluation times, strictly increasing, each at least dt. Construction
    /// rounds them to integer multiples of dt.
    pub t_grid: Vec<f64>,
    pub seed: u64,
    pub bridge_correction: bool,
}

impl PathConfig {
    /// Validates and rounds t_grid onto the step lattice. Returns the rounded
    /// config and a note when rounding moved any entry, for run manifests.
    pub fn validated(mut self) -> Result<(Self, Option<String>)> {
        if self.n_paths == 0 {
            return Err(CoreError::InvalidArgument("n_paths must be positive".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(CoreError::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.t_grid.is_empty() {
            return Err(CoreError::InvalidArgument("t_grid must be nonempty".into()));
        }
        for w in self.t_grid.windows(2) {
            if !(w[0] < w[1]) {
                return Err(CoreError::InvalidArgument(
                    "t_grid must be strictly increasing".into(),
                ));
            }
        }
        if !(self.t_grid[0].is_finite() && self.t_grid[0] >= self.dt) {
            return Err(CoreError::InvalidArgument(format!(
                "dt = {} must not exceed the smallest t_grid entry {}",
                self.dt, self.t_grid[0]
            )));
        }
        let mut moved = 0usize;
        let mut prev_k = 0u64;
        for t in &mut self.t_grid {
            let k = (*t / self.dt).round().max(1.0) as u64;
            if k == prev_k {
                return Err(CoreError::InvalidArgument(format!(
                    "t_grid entries {} apart collapse onto one step of dt = {}; coarsen t_grid or shrink dt",
                    *t, self.dt
                )));
            }
            prev_k = k;
            let rounded = k as f64 * self.dt;
            if (rounded - *t).abs() > 1e-12 * t.abs() {
                moved += 1;
            }
            *t = rounded;
        }
        let note = (moved > 0)
            .then(|| format!("{moved} t_grid entries rounded to multiples of dt = {}", self.dt));
        Ok((self, note))
    }

    fn step_counts(&self) -> Vec<u64> {
        self.t_grid.iter().map(|t| (t / self.dt).round() as u64).collect()
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    sum: f64,
    sumsq: f64,
    alive: u64,
}

impl Moments {
    fn push(&mut self, w: f64, alive: bool) {
        self.sum += w;
        self.sumsq += w * w;
        self.alive += alive as u64;
    }

    fn merge(&self, other: &Self) -> Self {
        Self {
            sum: self.sum + other.sum,
            sumsq: self.sumsq + other.sumsq,
            alive: self.alive + other.alive,
        }
    }

    fn mean_stderr(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        let mean = self.sum / nf;
        let var = (self.sumsq / nf - mean * mean).max(0.0) / (nf - 1.0).max(1.0);
        (mean, var.sqrt())
    }
}

/// Runs per-chunk closures over the fixed path partition and folds the chunk
/// results pairwise. The tree shape depends only on n_paths, never on the
/// thread count.
fn chunked<T, F>(n_paths: usize, per_chunk: F) -> T
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
    for<'a> &'a T: std::ops::Add<&'a T, Output = T>,
{
    let n_chunks = n_paths.div_ceil(CHUNK);
    let mut layer: Vec<T> = (0..n_chunks)
        .into_par_iter()
        .map(|c| per_chunk((c * CHUNK) as u64, ((c + 1) * CHUNK).min(n_paths) as u64))
        .collect();
    while layer.len() > 1 {
        let mut next = Vec::with_capacity(layer.len().div_ceil(2));
        let mut it = layer.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(&a + &b),
                None => next.push(a),
            }
        }
        layer = next;
    }
    layer.into_iter().next().expect("at least one chunk")
}

#[derive(Clone)]
struct MomentVec(Vec<Moments>);

impl std::ops::Add<&MomentVec> for &MomentVec {
    type Output = MomentVec;
    fn add(self, rhs: &MomentVec) -> MomentVec {
        MomentVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a.merge(b)).collect())
    }
}

/// One Euler step with optional bridge weighting. Returns None when the path
/// leaves the closed box (hard kill), otherwise the survival factor for this
/// step: the product over walls of (1 - crossing probability).
fn step_survival(
    grid: &Grid,
    x: &mut Point,
    rng: &mut ChaCha8Rng,
    sqrt_dt: f64,
    dt: f64,
    bridge: bool,
) -> Option<f64> {
    let dim = grid.dim();
    let old = *x;
    for xi in x.iter_mut().take(dim) {
        let g: f64 = rng.sample(StandardNormal);
        *xi += sqrt_dt * g;
    }
    if !grid.contains_open(*x) {
        return None;
    }
    if !bridge {
        return Some(1.0);
    }
    let mut factor = 1.0;
    for a in 0..dim {
        for wall in [grid.lower(a), grid.upper(a)] {
            let prod2 = 2.0 * (old[a] - wall).abs() * (x[a] - wall).abs();
            if prod2 <= BRIDGE_EXP_CUTOFF * dt {
                factor *= -(-prod2 / dt).exp_m1();
            }
        }
    }
    Some(factor)
}

/// Per-time moments of W = chi * bridge * e^{-integral of scaled V}, with the
/// V integral taken by the left-endpoint rule along each path.
pub struct RunMoments {
    pub t_grid: Vec<f64>,
    pub n_paths: usize,
    per_t: Vec<Moments>,
}

impl RunMoments {
    pub fn mean(&self, i: usize) -> f64 {
        self.per_t[i].mean_stderr(self.n_paths).0
    }

    pub fn stderr(&self, i: usize) -> f64 {
        self.per_t[i].mean_stderr(self.n_paths).1
    }

    pub fn n_alive(&self, i: usize) -> u64 {
        self.per_t[i].alive
    }
}

fn survival_run(grid: &Grid, v: &ScalarField, x0: Point, cfg: &PathConfig) -> Result<RunMoments> {
    if !grid.contains_open(x0) {
        return Err(CoreError::InvalidArgument(format!(
            "start point {:?} is not strictly inside the box",
            &x0[..grid.dim()]
        )));
    }
    let (cfg, _) = cfg.clone().validated()?;
    let steps = cfg.step_counts();
    let max_step = *steps.last().expect("nonempty t_grid");
    let sqrt_dt = cfg.dt.sqrt();

    let per_t = chunked(cfg.n_paths, |lo, hi| {
        let mut acc = MomentVec(vec![Moments::default(); steps.len()]);
        for p in lo..hi {
            let mut rng = stream(cfg.seed, tag::PATHS, p);
            let mut x = x0;
            let mut action = 0.0;
            let mut weight = 1.0;
            let mut alive = true;
            let mut slot = 0;
            for k in 1..=max_step {
                if alive {
                    action += v.sample(x) * cfg.dt;
                    match step_survival(grid, &mut x, &mut rng, sqrt_dt, cfg.dt, cfg.bridge_correction)
                    {
                        Some(f) => weight *= f,
                        None => alive = false,
                    }
                }
                if k == steps[slot] {
                    let w = if alive { weight * (-action).exp() } else { 0.0 };
                    acc.0[slot].push(w, alive);
                    slot += 1;
                    if slot == steps.len() {
                        break;
                    }
                }
            }
        }
        acc
    });
    Ok(RunMoments { t_grid: cfg.t_grid, n_paths: cfg.n_paths, per_t: per_t.0 })
}

/// Survival-weighted action moments for the potential as given.
pub fn run_paths(grid: &Grid, v: &ScalarField, x0: Point, cfg: &PathConfig) -> Result<RunMoments> {
    survival_run(grid, v, x0, cfg)
}

#[derive(Clone, Copy, Debug)]
pub struct BoundEstimate {
    pub x0: Point,
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n_alive: u64,
    pub n_paths: usize,
}

#[derive(Clone, Debug)]
pub struct BoundProfile {
    pub x0: Point,
    pub lambda: f64,
    pub estimates: Vec<BoundEstimate>,
}

impl BoundProfile {
    /// Smallest mean over the time grid, with its index.
    pub fn min_bound(&self) -> (usize, &BoundEstimate) {
        let i = self
            .estimates
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
            .map(|(i, _)| i)
            .expect("nonempty profile");
        (i, &self.estimates[i])
    }

    pub fn write_csv<W: Write>(&self, dim: usize, mut out: W) -> Result<()> {
        let coords: Vec<String> = (0..dim).map(|a| format!("x0_{a}")).collect();
        writeln!(out, "{},t,mean,stderr,n_alive,n_paths,lambda", coords.join(","))?;
        for e in &self.estimates {
            let point: Vec<String> = (0..dim).map(|a| format!("{}", e.x0[a])).collect();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                point.join(","),
                e.t,
                e.mean,
                e.stderr,
                e.n_alive,
                e.n_paths,
                self.lambda
            )?;
        }
        Ok(())
    }
}

/// Pointwise eigenfunction bound: for each t the mean of
/// chi * exp(lambda t - integral of V), with standard error.
pub fn theorem2_bound(
    grid: &Grid,
    v: &ScalarField,
    x0: Point,
    lambda: f64,
    cfg: &PathConfig,
) -> Result<BoundProfile> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let moments = survival_run(grid, v, x0, cfg)?;
    let estimates = moments
        .t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (mean, stderr) = moments.per_t[i].mean_stderr(moments.n_paths);
            let grow = (lambda * t).exp();
            BoundEstimate {
                x0,
                t,
                mean: grow * mean,
                stderr: grow * stderr,
                n_alive: moments.per_t[i].alive,
                n_paths: moments.n_paths,
            }
        })
        .collect();
    Ok(BoundProfile { x0, lambda, estimates })
}

#[derive(Clone, Copy, Debug)]
pub struct LandscapeEstimate {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    /// Upper bound used for the integral beyond the last grid time.
    pub tail_upper: f64,
    /// Decay rate backing the tail bound (inf V / 2, or fitted).
    pub decay_rate: f64,
}

/// Estimates the landscape u(x0) of the plain-Laplacian problem
/// (-Laplace + V) u = 1 from survival-weighted paths: the substitution T = 2t
/// maps that identity onto generator-half paths, so the engine integrates
/// e^{-(1/2) integral V} over time and halves the result.
///
/// Tail beyond the grid: pathwise e^{-S} decay when inf V > 0, otherwise a
/// rate fitted to the last three grid means (requires visible decay).
pub fn landscape_via_paths(
    grid: &Grid,
    v: &ScalarField,
    x0: Point,
    cfg: &PathConfig,
) -> Result<LandscapeEstimate> {
    let v_min = v.min();
    if v_min < 0.0 {
        return Err(CoreError::InvalidArgument("potential must be nonnegative".into()));
    }
    let mut half_v = v.clone();
    for val in half_v.values_mut() {
        *val *= 0.5;
    }
    let m = survival_run(grid, &half_v, x0, cfg)?;
    let n = m.t_grid.len();

    // Trapezoid from t = 0 (where the integrand is exactly 1) across the grid.
    let mut ts = Vec::with_capacity(n + 1);
    let mut ms = Vec::with_capacity(n + 1);
    let mut es = Vec::with_capacity(n + 1);
    ts.push(0.0);
    ms.push(1.0);
    es.push(0.0);
    for i in 0..n {
        let (mean, err) = m.per_t[i].mean_stderr(m.n_paths);
        ts.push(m.t_grid[i]);
        ms.push(mean);
        es.push(err);
    }
    let mut trapz = 0.0;
    let mut sigma = 0.0;
    for i in 0..n {
        let w = 0.5 * (ts[i + 1] - ts[i]);
        trapz += w * (ms[i] + ms[i + 1]);
        // Means share paths, so errors add linearly for a safe bound.
        sigma += w * (es[i] + es[i + 1]);
    }

    // Trapezoid curvature allowance: per-interval error is (step^3/12) f'',
    // with f'' taken from second divided differences of the measured means.
    let d2 = |j: usize| -> f64 {
        let (dl, dr) = (ts[j] - ts[j - 1], ts[j + 1] - ts[j]);
        2.0 * ((ms[j + 1] - ms[j]) / dr - (ms[j] - ms[j - 1]) / dl) / (dl + dr)
    };
    let mut disc = 0.0;
    if n >= 2 {
        for i in 0..n {
            let left = if i >= 1 { d2(i).abs() } else { 0.0 };
            let right = if i + 2 <= n { d2(i + 1).abs() } else { 0.0 };
            let step = ts[i + 1] - ts[i];
            disc += step.powi(3) / 12.0 * left.max(right);
        }
    }

    let (last_mean, last_err) = m.per_t[n - 1].mean_stderr(m.n_paths);
    let (decay_rate, tail_upper) = if v_min > 0.0 {
        // e^{-S(t)} <= e^{-S(T)} e^{-(t-T) v_min/2} pathwise.
        let rate = 0.5 * v_min;
        (rate, (last_mean + 3.0 * last_err) / rate)
    } else {
        if n < 4 {
            return Err(CoreError::TailUncontrolled(
                "t_grid too short to fit a decay rate; widen t_grid".into(),
            ));
        }
        let (a, _) = m.per_t[n - 3].mean_stderr(m.n_paths);
        let (b, _) = m.per_t[n - 2].mean_stderr(m.n_paths);
        if !(a > b && b > last_mean && last_mean > 0.0) {
            return Err(CoreError::TailUncontrolled(
                "survival not yet decaying at the end of t_grid; widen t_grid".into(),
            ));
        }
        let rate = (a / last_mean).ln() / (m.t_grid[n - 1] - m.t_grid[n - 3]);
        // Fitted, not rigorous: double the tail for the upper bracket.
        (rate, 2.0 * (last_mean + 3.0 * last_err) / rate)
    };

    Ok(LandscapeEstimate {
        estimate: 0.5 * (trapz + 0.5 * tail_upper),
        lower: 0.5 * (trapz - 3.0 * sigma - disc),
        upper: 0.5 * (trapz + 3.0 * sigma + disc + tail_upper),
        tail_upper: 0.5 * tail_upper,
        decay_rate,
    })
}

#[derive(Clone, Debug)]
pub struct RegularizedSup {
    pub t_star: f64,
    pub value: f64,
    pub stderr: f64,
    /// Mean and stderr of (1/t) integral of V for every grid time.
    pub curve: Vec<(f64, f64, f64)>,
}

/// Time-averaged potential along free paths (no killing at the walls),
/// maximized over the time grid. Ties resolve to the earliest time.
pub fn regularized_potential_sup<F>(
    v_eval: F,
    x0: Point,
    dim: usize,
    cfg: &PathConfig,
) -> Result<RegularizedSup>
where
    F: Fn(Point) -> f64 + Sync,
{
    if !(1..=2).contains(&dim) {
        return Err(CoreError::InvalidArgument(format!("dimension must be 1 or 2, got {dim}")));
    }
    let (cfg, _) = cfg.clone().validated()?;
    let steps = cfg.step_counts();
    let max_step = *steps.last().expect("nonempty");
    let sqrt_dt = cfg.dt.sqrt();

    let per_t = chunked(cfg.n_paths, |lo, hi| {
        let mut acc = MomentVec(vec![Moments::default(); steps.len()]);
        for p in lo..hi {
            let mut rng = stream(cfg.seed, tag::PATHS, p);
            let mut x = x0;
            // Left-endpoint time average (1/t) integral V = (sum of V)/k; the
            // dt-free form keeps constant potentials exact.
            let mut vsum = 0.0;
            let mut slot = 0;
            for k in 1..=max_step {
                vsum += v_eval(x);
                for xi in x.iter_mut().take(dim) {
                    let g: f64 = rng.sample(StandardNormal);
                    *xi += sqrt_dt * g;
                }
                if k == steps[slot] {
                    acc.0[slot].push(vsum / k as f64, true);
                    slot += 1;
                    if slot == steps.len() {
                        break;
                    }
                }
            }
        }
        acc
    });

    let curve: Vec<(f64, f64, f64)> = cfg
        .t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (mean, err) = per_t.0[i].mean_stderr(cfg.n_paths);
            (t, mean, err)
        })
        .collect();
    let best = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("nonempty");
    Ok(RegularizedSup {
        t_star: curve[best].0,
        value: curve[best].1,
        stderr: curve[best].2,
        curve,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct RegularizedCheck {
    pub x0: Point,
    pub t_star: f64,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    /// lhs + 3 stderr - rhs; nonnegative means pass.
    pub margin: f64,
    pub pass: bool,
    pub distance: f64,
}

/// Compares the maximized time-averaged potential against the reciprocal
/// landscape barrier 1/(u + c_d e^{-sqrt(v_min) d(x0, walls)}), with u the
/// half-Laplacian landscape.
pub fn theorem3_check<F>(
    v_eval: F,
    u: &ScalarField,
    x0: Point,
    cfg: &PathConfig,
    c_d: f64,
    v_min: f64,
) -> Result<RegularizedCheck>
where
    F: Fn(Point) -> f64 + Sync,
{
    if !(v_min.is_finite() && v_min > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "inf V must be positive for this bound, got {v_min}"
        )));
    }
    if !(c_d.is_finite() && c_d > 0.0) {
        return Err(CoreError::InvalidArgument(format!("c_d must be positive, got {c_d}")));
    }
    let grid = u.grid();
    if !grid.contains_open(x0) {
        return Err(CoreError::InvalidArgument("x0 must be strictly inside the box".into()));
    }
    let sup = regularized_potential_sup(v_eval, x0, grid.dim(), cfg)?;
    let distance = grid.distance_to_boundary(x0);
    let rhs = 1.0 / (u.sample(x0) + c_d * (-v_min.sqrt() * distance).exp());
    let margin = sup.value + 3.0 * sup.stderr - rhs;
    Ok(RegularizedCheck {
        x0,
        t_star: sup.t_star,
        lhs: sup.value,
        lhs_stderr: sup.stderr,
        rhs,
        margin,
        pass: margin >= 0.0,
        distance,
    })
}

/// Vector potential with its divergence, evaluable anywhere paths go.
pub trait MagneticField: Sync {
    fn a(&self, p: Point) -> [f64; 2];
    fn divergence(&self, p: Point) -> f64;
    fn a_and_div(&self, p: Point) -> ([f64; 2], f64) {
        (self.a(p), self.divergence(p))
    }
}

impl MagneticField for MagneticModel {
    fn a(&self, p: Point) -> [f64; 2] {
        self.eval(p)
    }

    fn divergence(&self, p: Point) -> f64 {
        MagneticModel::divergence(self, p)
    }

    fn a_and_div(&self, p: Point) -> ([f64; 2], f64) {
        self.eval_with_divergence(p)
    }
}

/// A = 0 everywhere.
pub struct ZeroField;

impl MagneticField for ZeroField {
    fn a(&self, _: Point) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn divergence(&self, _: Point) -> f64 {
        0.0
    }
}

/// Quadrature rule for the A·dω sum. Only the left-endpoint rule is the
/// correct discretization here; the midpoint variant double-counts the
/// divergence correction and exists as a documented cross-check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StochasticRule {
    Ito,
    StratonovichMidpoint,
}

#[derive(Clone, Copy, Debug)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n_alive: u64,
    pub n_paths: usize,
}

#[derive(Clone, Copy, Default)]
struct ComplexMoments {
    re: f64,
    im: f64,
    re_sq: f64,
    im_sq: f64,
    alive: u64,
}

impl std::ops::Add<&ComplexMoments> for &ComplexMoments {
    type Output = ComplexMoments;
    fn add(self, o: &ComplexMoments) -> ComplexMoments {
        ComplexMoments {
            re: self.re + o.re,
            im: self.im + o.im,
            re_sq: self.re_sq + o.re_sq,
            im_sq: self.im_sq + o.im_sq,
            alive: self.alive + o.alive,
        }
    }
}

/// Path estimate of [e^{-tH} psi](x0) for H = (1/2)(-i grad - A)^2 + V with
/// Dirichlet walls: mean over paths of
/// chi * exp(-i sum A·dω - (i/2) sum div A dt - sum V dt) * psi(ω(t)),
/// all sums left-endpoint, psi interpolated bilinearly at the endpoint.
pub fn propagator_mc<M, F>(
    field: &M,
    v_eval: F,
    psi: &ComplexField,
    x0: Point,
    t: f64,
    cfg: &PathConfig,
    rule: StochasticRule,
) -> Result<ComplexEstimate>
where
    M: MagneticField,
    F: Fn(Point) -> f64 + Sync,
{
    let grid = psi.grid();
    if !grid.contains_open(x0) {
        return Err(CoreError::InvalidArgument("x0 must be strictly inside the box".into()));
    }
    let (cfg, _) = cfg.clone().validated()?;
    let n_steps = cfg
        .t_grid
        .iter()
        .find(|&&tg| (tg - t).abs() <= 0.5 * cfg.dt)
        .map(|&tg| (tg / cfg.dt).round() as u64)
        .ok_or_else(|| {
            CoreError::InvalidArgument(format!("evaluation time {t} is not on the config t_grid"))
        })?;
    let sqrt_dt = cfg.dt.sqrt();
    let dim = grid.dim();

    let acc = chunked(cfg.n_paths, |lo, hi| {
        let mut acc = ComplexMoments::default();
        for p in lo..hi {
            let mut rng = stream(cfg.seed, tag::PATHS, p);
            let mut x = x0;
            let mut action = 0.0;
            let mut phase = 0.0;
            let mut weight = 1.0;
            let mut alive = true;
            for _ in 0..n_steps {
                let (a_here, div_here) = field.a_and_div(x);
                action += v_eval(x) * cfg.dt;
                phase += 0.5 * div_here * cfg.dt;
                let old = x;
                let mut dw = [0.0f64; 2];
                for a in 0..dim {
                    let g: f64 = rng.sample(StandardNormal);
                    dw[a] = sqrt_dt * g;
                    x[a] += dw[a];
                }
                match rule {
                    StochasticRule::Ito => {
                        for a in 0..dim {
                            phase += a_here[a] * dw[a];
                        }
                    }
                    StochasticRule::StratonovichMidpoint => {
                        let mid = [0.5 * (old[0] + x[0]), 0.5 * (old[1] + x[1])];
                        let a_mid = field.a(mid);
                        for a in 0..dim {
                            phase += a_mid[a] * dw[a];
                        }
                    }
                }
                if !grid.contains_open(x) {
                    alive = false;
                    break;
                }
                if cfg.bridge_correction {
                    for a in 0..dim {
                        for wall in [grid.lower(a), grid.upper(a)] {
                            let prod2 = 2.0 * (old[a] - wall).abs() * (x[a] - wall).abs();
                            if prod2 <= BRIDGE_EXP_CUTOFF * cfg.dt {
                                weight *= -(-prod2 / cfg.dt).exp_m1();
                            }
                        }
                    }
                }
            }
            if alive {
                let w = weight * (-action).exp();
                let rot = Complex64::new(0.0, -phase).exp();
                let val = w * rot * psi.sample(x);
                acc.re += val.re;
                acc.im += val.im;
                acc.re_sq += val.re * val.re;
                acc.im_sq += val.im * val.im;
                acc.alive += 1;
            }
        }
        acc
    });

    let n = cfg.n_paths as f64;
    let mean_re = acc.re / n;
    let mean_im = acc.im / n;
    let var = |sq: f64, mean: f64| ((sq / n - mean * mean).max(0.0) / (n - 1.0).max(1.0)).sqrt();
    Ok(ComplexEstimate {
        mean: Complex64::new(mean_re, mean_im),
        stderr_re: var(acc.re_sq, mean_re),
        stderr_im: var(acc.im_sq, mean_im),
        n_alive: acc.alive,
        n_paths: cfg.n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::eval_on_grid;
    use std::f64::consts::PI;

    fn interval() -> (Grid, ScalarField) {
        let g = Grid::line(0.0, PI, 129).unwrap();
        let v = eval_on_grid(&g, |_| 0.0).unwrap();
        (g, v)
    }

    fn cfg(n_paths: usize, dt: f64, t_grid: Vec<f64>, seed: u64) -> PathConfig {
        PathConfig { n_paths, dt, t_grid, seed, bridge_correction: false }
    }

    #[test]
    fn config_rounds_and_rejects() {
        let (c, note) = cfg(10, 0.01, vec![0.012, 0.053], 0).validated().unwrap();
        assert_eq!(c.t_grid, vec![0.01, 0.05]);
        assert!(note.is_some());
        assert!(cfg(10, 0.1, vec![0.05], 0).validated().is_err());
        assert!(cfg(10, 0.01, vec![0.03, 0.02], 0).validated().is_err());
        assert!(cfg(10, 0.01, vec![0.030, 0.032], 0).validated().is_err());
        assert!(cfg(0, 0.01, vec![0.1], 0).validated().is_err());
    }

    #[test]
    fn short_horizons_keep_paths_alive() {
        let (g, v) = interval();
        let m = run_paths(&g, &v, [PI / 2.0, 0.0], &cfg(2000, 1e-3, vec![0.05], 7)).unwrap();
        assert!(m.n_alive(0) as f64 >= 0.999 * 2000.0);
        assert!(m.mean(0) > 0.999);
    }

    #[test]
    fn start_point_must_be_interior() {
        let (g, v) = interval();
        assert!(run_paths(&g, &v, [0.0, 0.0], &cfg(10, 1e-3, vec![0.01], 0)).is_err());
        assert!(run_paths(&g, &v, [-1.0, 0.0], &cfg(10, 1e-3, vec![0.01], 0)).is_err());
    }

    #[test]
    fn survival_matches_the_interval_series() {
        let (g, v) = interval();
        let t = 2.0;
        let m = run_paths(&g, &v, [PI / 2.0, 0.0], &cfg(40_000, 1e-3, vec![t], 11)).unwrap();
        let p = crate::analytic::SeriesParams::new(t / 2.0, PI / 2.0).unwrap();
        // Engine time t equals series time t/2 (generator half vs plain).
        let want = crate::analytic::interval_series_bound(&p, 0.0).unwrap().value;
        let slack = 3.0 * m.stderr(0) + 2.0 * 1e-3f64.sqrt() * 0.1;
        assert!(
            (m.mean(0) - want).abs() < slack,
            "mc {} vs series {want}, slack {slack}",
            m.mean(0)
        );
    }

    #[test]
    fn bridge_correction_lowers_survival_weight() {
        let (g, v) = interval();
        let base = cfg(8_000, 2e-3, vec![0.5, 1.0], 23);
        let plain = run_paths(&g, &v, [1.0, 0.0], &base).unwrap();
        let mut with = base.clone();
        with.bridge_correction = true;
        let bridged = run_paths(&g, &v, [1.0, 0.0], &with).unwrap();
        for i in 0..2 {
            assert!(bridged.mean(i) < plain.mean(i));
            assert_eq!(bridged.n_alive(i), plain.n_alive(i));
        }
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let (g, v) = interval();
        let run = || {
            let m =
                run_paths(&g, &v, [1.3, 0.0], &cfg(10_000, 2e-3, vec![0.2, 0.6], 99)).unwrap();
            (m.mean(0).to_bits(), m.mean(1).to_bits(), m.stderr(1).to_bits())
        };
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let quad = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        assert_eq!(single.install(run), quad.install(run));
    }

    #[test]
    fn doubling_paths_shrinks_stderr() {
        let (g, v) = interval();
        let small = run_paths(&g, &v, [1.0, 0.0], &cfg(5_000, 2e-3, vec![1.0], 5)).unwrap();
        let large = run_paths(&g, &v, [1.0, 0.0], &cfg(10_000, 2e-3, vec![1.0], 5)).unwrap();
        let combined = 3.0 * (small.stderr(0) + large.stderr(0));
        assert!((small.mean(0) - large.mean(0)).abs() < combined);
        let ratio = large.stderr(0) / small.stderr(0);
        assert!((ratio - 1.0 / 2.0f64.sqrt()).abs() < 0.1, "stderr ratio {ratio}");
    }

    #[test]
    fn bound_profile_grows_with_lambda_factor() {
        let (g, v) = interval();
        let c = cfg(2_000, 1e-3, vec![0.1, 0.3], 3);
        let p0 = theorem2_bound(&g, &v, [1.0, 0.0], 0.0, &c).unwrap();
        let p1 = theorem2_bound(&g, &v, [1.0, 0.0], 1.0, &c).unwrap();
        for (a, b) in p0.estimates.iter().zip(&p1.estimates) {
            assert!((b.mean - a.mean * (b.t).exp()).abs() < 1e-12);
        }
        let (_, min0) = p0.min_bound();
        assert!(min0.mean <= p0.estimates[0].mean);
        assert!(theorem2_bound(&g, &v, [1.0, 0.0], -1.0, &c).is_err());
    }

    #[test]
    fn csv_round_trip_layout() {
        let (g, v) = interval();
        let p =
            theorem2_bound(&g, &v, [1.0, 0.0], 0.5, &cfg(500, 1e-3, vec![0.1], 3)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(g.dim(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x0_0,t,mean,stderr,n_alive,n_paths,lambda");
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 7);
        assert!(row.ends_with(",0.5"));
    }

    #[test]
    fn constant_potential_landscape_is_one_over_c() {
        let g = Grid::line(0.0, PI, 65).unwrap();
        let c = 50.0;
        let v = eval_on_grid(&g, |_| c).unwrap();
        let t_grid: Vec<f64> = (1..=100).map(|i| i as f64 * 0.005).collect();
        let est =
            landscape_via_paths(&g, &v, [PI / 2.0, 0.0], &cfg(4_000, 1e-3, t_grid, 17)).unwrap();
        assert!(est.lower <= 1.0 / c && 1.0 / c <= est.upper, "bracket [{}, {}]", est.lower, est.upper);
        assert!((est.estimate - 1.0 / c).abs() < 2e-3);
    }

    #[test]
    fn free_interval_landscape_brackets_the_parabola() {
        let (g, v) = interval();
        let t_grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.2).collect();
        let est = landscape_via_paths(&g, &v, [PI / 2.0, 0.0], &cfg(20_000, 2e-3, t_grid, 29))
            .unwrap();
        let want = PI * PI / 8.0;
        assert!(
            est.lower <= want && want <= est.upper,
            "bracket [{}, {}] misses {want}",
            est.lower,
            est.upper
        );
    }

    #[test]
    fn boundary_start_gives_smaller_landscape() {
        let (g, v) = interval();
        let t_grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.2).collect();
        let mid = landscape_via_paths(&g, &v, [PI / 2.0, 0.0], &cfg(6_000, 2e-3, t_grid.clone(), 31))
            .unwrap();
        let edge =
            landscape_via_paths(&g, &v, [0.3, 0.0], &cfg(6_000, 2e-3, t_grid, 31)).unwrap();
        assert!(edge.estimate < mid.estimate);
    }

    #[test]
    fn undecayed_tail_is_reported() {
        let (g, v) = interval();
        let err = landscape_via_paths(
            &g,
            &v,
            [PI / 2.0, 0.0],
            &cfg(2_000, 1e-3, vec![0.01, 0.02, 0.03, 0.04], 3),
        );
        match err {
            Err(CoreError::TailUncontrolled(msg)) => assert!(msg.contains("widen t_grid")),
            other => panic!("expected tail error, got {other:?}"),
        }
    }

    #[test]
    fn regularized_constant_potential_is_exact() {
        let c = 7.25;
        let sup = regularized_potential_sup(
            |_| c,
            [1.0, 0.0],
            1,
            &cfg(500, 1e-3, vec![0.05, 0.1, 0.2], 3),
        )
        .unwrap();
        assert_eq!(sup.value, c);
        assert_eq!(sup.t_star, 0.05);
        for (_, mean, err) in &sup.curve {
            assert_eq!(*mean, c);
            assert_eq!(*err, 0.0);
        }
    }

    #[test]
    fn regularized_short_time_recovers_the_potential_pointwise() {
        let v = |p: Point| 3.0 + p[0] * p[0];
        let x0 = [0.4, 0.0];
        let sup =
            regularized_potential_sup(v, x0, 1, &cfg(20_000, 1e-4, vec![2e-3, 0.3], 13)).unwrap();
        let short = sup.curve[0];
        assert!((short.1 - v(x0)).abs() < 3.0 * short.2 + 0.01, "{} vs {}", short.1, v(x0));
    }

    #[test]
    fn constant_potential_regularized_check_passes() {
        let g = Grid::line(0.0, PI, 65).unwrap();
        let c = 12.0;
        let v = eval_on_grid(&g, |_| c).unwrap();
        let u = crate::landscape::solve_landscape(&g, &v, 0.5).unwrap();
        let rec = theorem3_check(
            |_| c,
            &u,
            [1.2, 0.0],
            &cfg(2_000, 1e-3, vec![0.05, 0.1, 0.2], 5),
            2.0,
            c,
        )
        .unwrap();
        assert!(rec.pass, "margin {}", rec.margin);
        assert_eq!(rec.lhs, c);
        assert!(rec.rhs <= c);
        assert!(theorem3_check(|_| c, &u, [1.2, 0.0], &cfg(10, 1e-3, vec![0.01], 0), 2.0, 0.0)
            .is_err());
    }

    #[test]
    fn propagator_damps_an_eigenfunction() {
        let g = Grid::line(0.0, PI, 129).unwrap();
        let psi = ComplexField::from_real(&eval_on_grid(&g, |p| p[0].sin()).unwrap());
        let x0 = [PI / 2.0, 0.0];
        let t = 0.1;
        let est = propagator_mc(
            &ZeroField,
            |_| 0.0,
            &psi,
            x0,
            t,
            &cfg(40_000, 1e-3, vec![t], 41),
            StochasticRule::Ito,
        )
        .unwrap();
        // Ground state of the half-Laplacian on (0, pi): lambda = 1/2.
        let want = (-0.5 * t).exp() * (PI / 2.0).sin();
        let slack = 3.0 * est.stderr_re + 1e-3;
        assert!((est.mean.re - want).abs() < slack, "{} vs {want}", est.mean.re);
        assert!(est.mean.im.abs() < 3.0 * est.stderr_im + 1e-12);
        assert!(est.n_alive as usize <= est.n_paths);
    }

    #[test]
    fn midpoint_rule_visibly_disagrees() {
        // With div A != 0 the midpoint sum equals the left-endpoint sum plus
        // (1/2) integral div A dt, so the two phases drift apart.
        struct Shear;
        impl MagneticField for Shear {
            fn a(&self, p: Point) -> [f64; 2] {
                [10.0 * p[0], 10.0 * p[1]]
            }
            fn divergence(&self, _: Point) -> f64 {
                20.0
            }
        }
        let g = Grid::rect([-1.0, -1.0], [1.0, 1.0], [33, 33]).unwrap();
        let psi = ComplexField::from_real(
            &eval_on_grid(&g, |p| (1.0 - p[0] * p[0]) * (1.0 - p[1] * p[1])).unwrap(),
        );
        let t = 0.1;
        let c = cfg(4_000, 1e-3, vec![t], 8);
        let ito =
            propagator_mc(&Shear, |_| 0.0, &psi, [0.0, 0.0], t, &c, StochasticRule::Ito).unwrap();
        let strat = propagator_mc(
            &Shear,
            |_| 0.0,
            &psi,
            [0.0, 0.0],
            t,
            &c,
            StochasticRule::StratonovichMidpoint,
        )
        .unwrap();
        let gap = (ito.mean - strat.mean).norm();
        let noise = ito.stderr_re + ito.stderr_im + strat.stderr_re + strat.stderr_im;
        assert!(gap > 5.0 * noise, "gap {gap} vs noise {noise}");
    }

    #[test]
    fn propagator_requires_on_grid_time() {
        let g = Grid::line(0.0, PI, 17).unwrap();
        let psi = ComplexField::from_real(&eval_on_grid(&g, |p| p[0].sin()).unwrap());
        let bad = propagator_mc(
            &ZeroField,
            |_| 0.0,
            &psi,
            [1.0, 0.0],
            0.37,
            &cfg(10, 1e-3, vec![0.1], 0),
            StochasticRule::Ito,
        );
        assert!(bad.is_err());
    }
}
