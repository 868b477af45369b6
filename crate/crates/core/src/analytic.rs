//! Closed-form oracles: the interval survival series, the interval
//! eigenfunction and landscape, and the exit-time Laplace transform on balls
//! through modified Bessel functions I_nu.
//!
//! The interval formulas run under the plain -Laplacian normalization; the
//! scale-1/2 translation doubles both lambda and V (see `rescale_half_to_unit`).
//! The Bessel evaluation is self-contained: a positive power series below the
//! crossover argument and the scaled large-argument expansion above it.

use crate::error::{CoreError, Result};
use crate::rng::{stream, tag};
use rand::Rng;
use rand_distr::StandardNormal;

/// Argument where the I_nu evaluation switches from power series to the
/// large-argument expansion. The two agree to ~e^{-2z} relative error here.
const BESSEL_CROSSOVER: f64 = 12.0;

#[derive(Clone, Debug)]
pub struct SeriesParams {
    pub n_terms: usize,
    pub t: f64,
    pub x0: f64,
}

impl SeriesParams {
    pub fn new(t: f64, x0: f64) -> Result<Self> {
        let p = Self { n_terms: 200, t, x0 };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.n_terms < 1 {
            return Err(CoreError::InvalidArgument("n_terms must be at least 1".into()));
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(CoreError::InvalidArgument(format!("t must be positive, got {}", self.t)));
        }
        if !(self.x0 > 0.0 && self.x0 < std::f64::consts::PI) {
            return Err(CoreError::InvalidArgument(format!(
                "x0 must lie strictly inside (0, pi), got {}",
                self.x0
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SeriesValue {
    pub value: f64,
    /// Rigorous bound on the dropped tail, same e^{lambda t} weighting as the
    /// value.
    pub truncation_bound: f64,
}

/// e^{lambda t} times the survival probability of a -Laplacian Brownian
/// particle started at x0 in (0, pi):
/// e^{lambda t} (4/pi) sum_{k odd} e^{-k^2 t} sin(k x0)/k, truncated to
/// n_terms terms with the tail bounded explicitly.
pub fn interval_series_bound(params: &SeriesParams, lambda: f64) -> Result<SeriesValue> {
    params.validate()?;
    if !lambda.is_finite() {
        return Err(CoreError::InvalidArgument(format!("lambda must be finite, got {lambda}")));
    }
    let t = params.t;
    let four_over_pi = 4.0 / std::f64::consts::PI;
    let mut sum = 0.0;
    let mut k_stop = 2 * params.n_terms as u64 + 1;
    for i in 0..params.n_terms as u64 {
        let k = 2 * i + 1;
        let decay = (-(k as f64) * (k as f64) * t).exp();
        if decay == 0.0 {
            k_stop = k;
            break;
        }
        sum += decay * ((k as f64) * params.x0).sin() / k as f64;
    }
    let weight = (lambda * t).exp();
    let value = weight * four_over_pi * sum;

    // Odd k >= K: sum e^{-k^2 t}/k <= e^{-K^2 t} / (K (1 - e^{-4Kt})).
    let kf = k_stop as f64;
    let tail = four_over_pi * (-kf * kf * t).exp() / (kf * -(-4.0 * kf * t).exp_m1());
    Ok(SeriesValue { value, truncation_bound: weight * tail })
}

#[derive(Clone, Copy, Debug)]
pub struct IntervalFacts {
    /// Ground state sin x of the -Laplacian on (0, pi), sup-normalized.
    pub phi1: f64,
    /// Its eigenvalue.
    pub lambda1: f64,
    /// Landscape solving -u'' = 1 with zero walls.
    pub u: f64,
}

/// Exact interval facts at x, checking the pointwise sandwich
/// sin x <= min{1, (4/pi) sin x} <= x(pi - x)/2 on the way out.
pub fn interval_closed_forms(x: f64) -> Result<IntervalFacts> {
    if !(x >= 0.0 && x <= std::f64::consts::PI) {
        return Err(CoreError::InvalidArgument(format!("x must lie in [0, pi], got {x}")));
    }
    let phi1 = x.sin();
    let u = x * (std::f64::consts::PI - x) / 2.0;
    let mid = f64::min(1.0, 4.0 / std::f64::consts::PI * phi1);
    debug_assert!(phi1 <= mid + 1e-15 && mid <= u + 1e-15);
    Ok(IntervalFacts { phi1, lambda1: 1.0, u })
}

/// Carries interval data stated under the plain -Laplacian to the 1/2-Laplacian
/// convention: both the eigenvalue and the potential double.
pub fn rescale_half_to_unit(lambda_or_v: f64) -> f64 {
    2.0 * lambda_or_v
}

/// Inverse of `rescale_half_to_unit`.
pub fn rescale_unit_to_half(lambda_or_v: f64) -> f64 {
    0.5 * lambda_or_v
}

fn validate_ball(r: f64, lambda: f64, d: usize) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(CoreError::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    if !(1..=3).contains(&d) {
        return Err(CoreError::InvalidArgument(format!("dimension must be 1, 2 or 3, got {d}")));
    }
    Ok(d as f64 / 2.0 - 1.0)
}

/// S(z, nu) = Gamma(nu+1) (2/z)^nu I_nu(z) as a power series; every term is
/// positive so the sum carries full relative accuracy at any argument that
/// does not overflow.
fn bessel_ratio_series(z: f64, nu: f64) -> f64 {
    let q = z * z / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    loop {
        term *= q / ((m + 1.0) * (m + 1.0 + nu));
        sum += term;
        m += 1.0;
        if term < sum * 1e-17 || m > 400.0 {
            return sum;
        }
    }
}

/// ln S(z, nu) through the large-argument expansion of I_nu, summed to its
/// smallest term. Valid past the crossover; exact for nu = +-1/2 where the
/// expansion terminates.
fn bessel_ratio_asymptotic_ln(z: f64, nu: f64, d: usize) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        let next = term * ((2.0 * k + 1.0) * (2.0 * k + 1.0) - mu) / (8.0 * z * (k + 1.0));
        if next >= term || next < 1e-17 * sum {
            if next < term {
                sum += next;
            }
            break;
        }
        term = next;
        sum += term;
        k += 1.0;
    }
    let ln_gamma = match d {
        1 => 0.5 * std::f64::consts::PI.ln(),
        2 => 0.0,
        _ => 0.5 * std::f64::consts::PI.ln() - std::f64::consts::LN_2,
    };
    ln_gamma + nu * (2.0 / z).ln() + z - 0.5 * (2.0 * std::f64::consts::PI * z).ln() + sum.ln()
}

/// E[e^{-lambda tau}] for standard Brownian motion leaving a ball of radius r
/// in dimension d: with z = r sqrt(2 lambda) and nu = d/2 - 1 this is
/// (z/2)^nu / (Gamma(nu+1) I_nu(z)). Returns exactly 1 at lambda = 0; may
/// underflow to 0 for huge z (use the ln variant there).
pub fn exit_time_laplace_ball(r: f64, lambda: f64, d: usize) -> Result<f64> {
    let nu = validate_ball(r, lambda, d)?;
    let z = r * (2.0 * lambda).sqrt();
    if z <= BESSEL_CROSSOVER {
        Ok(1.0 / bessel_ratio_series(z, nu))
    } else {
        Ok((-bessel_ratio_asymptotic_ln(z, nu, d)).exp())
    }
}

/// ln E[e^{-lambda tau}], overflow-safe for any argument.
pub fn exit_time_laplace_ball_ln(r: f64, lambda: f64, d: usize) -> Result<f64> {
    let nu = validate_ball(r, lambda, d)?;
    let z = r * (2.0 * lambda).sqrt();
    if z <= BESSEL_CROSSOVER {
        Ok(-bessel_ratio_series(z, nu).ln())
    } else {
        Ok(-bessel_ratio_asymptotic_ln(z, nu, d))
    }
}

#[derive(Clone, Debug)]
pub struct McExitConfig {
    pub n_paths: usize,
    pub dt: f64,
    /// Paths still inside at this time are scored as if exiting right then;
    /// the resulting upward bias is e^{-lambda t_cap} at most.
    pub t_cap: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Monte Carlo counterpart of `exit_time_laplace_ball`: standard Brownian
/// paths on a time lattice, exit declared at the first lattice point outside
/// the ball. All lambdas share the same paths, so the returned means are
/// monotone in lambda by construction. No bridge correction: the discrete
/// exit time overshoots the true one by O(sqrt(dt)), biasing means down.
pub fn mc_exit_time_laplace(
    r: f64,
    lambdas: &[f64],
    d: usize,
    cfg: &McExitConfig,
) -> Result<Vec<Estimate>> {
    validate_ball(r, lambdas.iter().cloned().fold(0.0, f64::max).max(0.0), d)?;
    for &l in lambdas {
        if !(l.is_finite() && l >= 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "lambda must be nonnegative, got {l}"
            )));
        }
    }
    if cfg.n_paths == 0 {
        return Err(CoreError::InvalidArgument("n_paths must be positive".into()));
    }
    if !(cfg.dt.is_finite() && cfg.dt > 0.0 && cfg.t_cap >= cfg.dt) {
        return Err(CoreError::InvalidArgument(format!(
            "need 0 < dt <= t_cap, got dt {} t_cap {}",
            cfg.dt, cfg.t_cap
        )));
    }

    let n_steps = (cfg.t_cap / cfg.dt).round() as u64;
    let sqrt_dt = cfg.dt.sqrt();
    let r2 = r * r;
    let mut sums = vec![0.0f64; lambdas.len()];
    let mut sumsq = vec![0.0f64; lambdas.len()];
    for p in 0..cfg.n_paths as u64 {
        let mut rng = stream(cfg.seed, tag::EXIT_MC, p);
        let mut x = [0.0f64; 3];
        let mut tau = cfg.t_cap;
        for k in 1..=n_steps {
            let mut norm2 = 0.0;
            for xi in x.iter_mut().take(d) {
                let g: f64 = rng.sample(StandardNormal);
                *xi += sqrt_dt * g;
                norm2 += *xi * *xi;
            }
            if norm2 >= r2 {
                tau = k as f64 * cfg.dt;
                break;
            }
        }
        for (i, &l) in lambdas.iter().enumerate() {
            let w = (-l * tau).exp();
            sums[i] += w;
            sumsq[i] += w * w;
        }
    }
    let n = cfg.n_paths as f64;
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let mean = sums[i] / n;
            let var = (sumsq[i] / n - mean * mean).max(0.0) / (n - 1.0).max(1.0);
            Estimate { mean, stderr: var.sqrt() }
        })
        .collect())
}
