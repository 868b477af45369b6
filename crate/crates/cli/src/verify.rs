//! The verification pipelines behind `verify <which>`. Each writes a CSV of
//! per-node results, records a pass/fail entry in the manifest, and returns
//! whether everything passed. Config shapes that cannot support a check are
//! config errors, not failures.

use std::f64::consts::PI;
use std::time::Instant;

use landscape_core::analytic::{interval_closed_forms, interval_series_bound, SeriesParams};
use landscape_core::eigen::find_lowest_pairs;
use landscape_core::landscape::solve_landscape;
use landscape_core::model::{build_magnetic, PotentialModel};
use landscape_core::operator::assemble;
use landscape_core::pathint::{theorem2_bound, theorem3_check};

use crate::commands::{
    coord_header_x0, ensure_potential, ground_lambda, point_cols, resolve_points, write_csv, Ctx,
};
use crate::fail::{CliResult, Fail};

#[derive(Copy, Clone, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum WhichVerify {
    Thm1,
    Thm2,
    Corollary,
    Thm3,
    #[value(name = "example-1d")]
    Example1d,
}

impl WhichVerify {
    pub fn name(self) -> &'static str {
        match self {
            WhichVerify::Thm1 => "thm1",
            WhichVerify::Thm2 => "thm2",
            WhichVerify::Corollary => "corollary",
            WhichVerify::Thm3 => "thm3",
            WhichVerify::Example1d => "example-1d",
        }
    }
}

pub fn run(ctx: &mut Ctx, which: WhichVerify) -> CliResult<bool> {
    let (pass, detail) = match which {
        WhichVerify::Example1d => example_1d(ctx)?,
        WhichVerify::Thm2 => thm2(ctx)?,
        WhichVerify::Thm1 => thm1(ctx)?,
        WhichVerify::Corollary => corollary(ctx)?,
        WhichVerify::Thm3 => thm3(ctx)?,
    };
    ctx.run.record_verification(which.name(), pass, detail.clone());
    if pass {
        println!("verify {}: pass ({detail})", which.name());
    } else {
        eprintln!("verify {}: FAIL ({detail})", which.name());
    }
    Ok(pass)
}

/// The analytic comparisons need the unit-scale Dirichlet Laplacian on
/// (0, pi) with no potential; anything else in the config is a mistake.
fn require_unit_interval(ctx: &Ctx) -> CliResult<()> {
    let g = &ctx.grid;
    if g.dim() != 1 {
        return Err(Fail::Config("this verification runs on the 1d box (0, pi); the config grid is 2d".into()));
    }
    if g.lower(0).abs() > 1e-9 || (g.upper(0) - PI).abs() > 1e-9 {
        return Err(Fail::Config(format!(
            "this verification runs on the box (0, pi); the config grid is ({}, {})",
            g.lower(0),
            g.upper(0)
        )));
    }
    if let Some(p) = &ctx.cfg.potential {
        if p.weight_high > 0.0 || p.offset > 0.0 {
            return Err(Fail::Config("this verification needs a zero potential; drop the potential section".into()));
        }
    }
    if ctx.cfg.laplacian_scale != 1.0 {
        return Err(Fail::Config("this verification compares against the unit Laplacian; set laplacian_scale to 1.0".into()));
    }
    Ok(())
}

/// Ground pair, landscape and the pointwise sandwich on (0, pi), all against
/// closed forms, plus the survival series at the midpoint.
fn example_1d(ctx: &mut Ctx) -> CliResult<(bool, String)> {
    require_unit_interval(ctx)?;
    let v = ensure_potential(ctx)?;
    let t0 = Instant::now();
    let h = assemble(&ctx.grid, &v, None, 1.0)?;
    let pairs = find_lowest_pairs(&h, &ctx.cfg.eigen.settings_with_pairs(1))?;
    let u = solve_landscape(&ctx.grid, &v, 1.0)?;
    ctx.note_stage("eigenpair and landscape", t0);

    let hh = ctx.grid.spacing(0);
    let tol = 5.0 * hh * hh;
    let ground = &pairs[0];
    let lambda = ground.lambda;

    let mut rows = Vec::new();
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst = String::new();
    for flat in 0..ctx.grid.len() {
        let x = ctx.grid.node_coord(flat)[0];
        let facts = interval_closed_forms(x)?;
        let phi = ground.phi.values()[flat].norm();
        let un = u.values()[flat];
        let mid = 1.0f64.min(4.0 / PI * phi);
        let chain_gap = (phi - mid).max(mid - lambda * un).max((un - facts.u).abs() - tol);
        rows.push(format!("{x},{phi},{},{un},{},{chain_gap}", facts.phi1, facts.u));
        if chain_gap > worst_gap {
            worst_gap = chain_gap;
            worst = format!("x = {x}: |phi| = {phi}, min(1, 4/pi |phi|) = {mid}, lambda u = {}", lambda * un);
        }
    }
    write_csv(&mut ctx.run, "verify_example_1d.csv", "x,abs_phi,sin_x,u,u_exact,chain_gap", &rows)?;

    if (lambda - 1.0).abs() > tol {
        return Ok((false, format!("ground eigenvalue {lambda} differs from 1 by more than {tol}")));
    }
    if worst_gap > tol {
        return Ok((false, format!("sandwich violated at {worst}")));
    }
    // Survival check at the midpoint: the weighted series stays above the
    // eigenfunction and its minimum over t dips below lambda u.
    let x0 = PI / 2.0;
    let u_mid = u.sample([x0, 0.0]);
    let mut series_min = f64::INFINITY;
    for t in [0.125, 0.25, 0.5, 1.0] {
        let s = interval_series_bound(&SeriesParams::new(t, x0)?, lambda)?;
        if s.value + s.truncation_bound < 1.0 - tol {
            return Ok((false, format!("series bound {} at t = {t} fell below the eigenfunction value 1", s.value)));
        }
        series_min = series_min.min(s.value + s.truncation_bound);
    }
    if series_min > lambda * u_mid + tol {
        return Ok((false, format!(
            "series minimum {series_min} never dipped below lambda u = {} at the midpoint",
            lambda * u_mid
        )));
    }
    Ok((true, format!("lambda = {lambda}, worst sandwich gap {worst_gap:.3e}, tol {tol:.3e}")))
}

/// Path survival means against the exact interval heat series. Config t_grid
/// entries are unit-Laplacian times; the engine runs its half generator for
/// twice as long at half the growth rate.
fn thm2(ctx: &mut Ctx) -> CliResult<(bool, String)> {
    require_unit_interval(ctx)?;
    let v = ensure_potential(ctx)?;
    let unit_ts = ctx.cfg.paths.times()?;
    let engine = ctx.cfg.paths.with_times(unit_ts.iter().map(|t| 2.0 * t).collect());
    let points = resolve_points(&ctx.cfg, &ctx.grid)?;
    let sigma = ctx.cfg.verify.sigma;

    let cap = ctx.cfg.verify.stderr_cap;
    let t0 = Instant::now();
    let mut rows = Vec::new();
    let mut pass = true;
    let mut worst = (f64::NEG_INFINITY, String::new());
    for &x0 in &points {
        let prof = theorem2_bound(&ctx.grid, &v, x0, 0.5, &engine)?;
        for (i, &t) in unit_ts.iter().enumerate() {
            let e = &prof.estimates[i];
            let s = interval_series_bound(&SeriesParams::new(t, x0[0])?, 1.0)?;
            let diff = (e.mean - s.value).abs();
            let slack = sigma * e.stderr + s.truncation_bound;
            let ok = diff <= slack && e.stderr <= cap;
            pass &= ok;
            rows.push(format!(
                "{},{t},{},{},{},{},{diff},{slack},{}",
                x0[0], e.mean, e.stderr, s.value, s.truncation_bound, ok as u8
            ));
            let violation = (diff - slack).max(e.stderr - cap);
            if violation > worst.0 {
                worst = (
                    violation,
                    format!(
                        "x0 = {}, t = {t}: paths {} +- {} (stderr cap {cap}), series {}",
                        x0[0], e.mean, e.stderr, s.value
                    ),
                );
            }
        }
    }
    ctx.note_stage("survival paths", t0);
    write_csv(
        &mut ctx.run,
        "verify_thm2.csv",
        "x0,t,mc_mean,mc_stderr,series,series_tail,diff,slack,pass",
        &rows,
    )?;
    let detail = if pass {
        format!("{} point/time pairs matched within {sigma} sigma", rows.len())
    } else {
        format!("worst offender {}", worst.1)
    };
    Ok((pass, detail))
}

/// Eigenfunction moduli under lambda times the scalar landscape, across the
/// configured magnetic strengths.
fn thm1(ctx: &mut Ctx) -> CliResult<(bool, String)> {
    let v = ensure_potential(ctx)?;
    let t0 = Instant::now();
    let u = solve_landscape(&ctx.grid, &v, ctx.cfg.laplacian_scale)?;
    ctx.note_stage("solve landscape", t0);
    let hh = (0..ctx.grid.dim()).map(|a| ctx.grid.spacing(a)).fold(0.0, f64::max);
    let slack = ctx.cfg.verify.slack_h2 * hh * hh;

    let bs: Vec<Option<f64>> = match &ctx.cfg.magnetic {
        Some(_) => ctx.cfg.verify.b_values.iter().map(|&b| Some(b)).collect(),
        None => vec![None],
    };
    let mut rows = Vec::new();
    let mut pass = true;
    let mut worst = (f64::NEG_INFINITY, String::new());
    for b in bs {
        let t0 = Instant::now();
        let a = match (b, &ctx.cfg.magnetic) {
            (Some(bv), Some(m)) => Some(build_magnetic(&ctx.grid, &m.spec_with_b(bv))?.0),
            _ => None,
        };
        let h = assemble(&ctx.grid, &v, a.as_ref(), ctx.cfg.laplacian_scale)?;
        let pairs = find_lowest_pairs(&h, &ctx.cfg.eigen.settings_with_pairs(ctx.cfg.verify.pairs))?;
        ctx.note_stage(&format!("eigenpairs b={}", b.unwrap_or(0.0)), t0);
        for (k, p) in pairs.iter().enumerate() {
            if !p.converged {
                return Ok((false, format!("pair {k} at b = {} did not converge", b.unwrap_or(0.0))));
            }
            let mut gap = f64::NEG_INFINITY;
            let mut at = 0;
            for flat in 0..ctx.grid.len() {
                let g = p.phi.values()[flat].norm() - p.lambda * u.values()[flat];
                if g > gap {
                    gap = g;
                    at = flat;
                }
            }
            let node = ctx.grid.node_coord(at);
            let ok = gap <= slack;
            pass &= ok;
            rows.push(format!(
                "{},{k},{},{gap},{},{},{},{}",
                b.unwrap_or(0.0),
                p.lambda,
                point_cols(ctx.grid.dim(), node),
                p.phi.values()[at].norm(),
                p.lambda * u.values()[at],
                ok as u8
            ));
            if gap - slack > worst.0 {
                worst = (
                    gap - slack,
                    format!(
                        "b = {}, pair {k} at {:?}: |phi| = {}, lambda u = {}, slack {slack:.3e}",
                        b.unwrap_or(0.0),
                        &node[..ctx.grid.dim()],
                        p.phi.values()[at].norm(),
                        p.lambda * u.values()[at]
                    ),
                );
            }
        }
    }
    let dim = ctx.grid.dim();
    write_csv(
        &mut ctx.run,
        "verify_thm1.csv",
        &format!("b,pair,lambda,worst_gap,{},abs_phi,lambda_u,pass", crate::commands::coord_header(dim)),
        &rows,
    )?;
    let detail = if pass {
        format!("{} pairs stayed under lambda u + {slack:.3e}", rows.len())
    } else {
        format!("worst offender {}", worst.1)
    };
    Ok((pass, detail))
}

/// Minimum of the survival bound over the t grid against headroom times
/// lambda u at sampled interior nodes.
fn corollary(ctx: &mut Ctx) -> CliResult<(bool, String)> {
    if ctx.cfg.laplacian_scale != 0.5 {
        return Err(Fail::Config(
            "survival paths realize the half-Laplacian semigroup; set laplacian_scale to 0.5".into(),
        ));
    }
    let ts = ctx.cfg.paths.times()?;
    let n = ts.len();
    if n < 10 || ts[0] > 1e-5 || ts[n - 1] < 1e-3 {
        return Err(Fail::Config(format!(
            "the survival minimum is found by scanning small times: need at least 10 times \
             covering [1e-5, 1e-3], got {n} points spanning [{}, {}]",
            ts[0],
            ts[n - 1]
        )));
    }
    let v = ensure_potential(ctx)?;
    let lambda = match ctx.cfg.bound_lambda {
        Some(l) => l,
        None => ground_lambda(ctx, &v)?,
    };
    let t0 = Instant::now();
    let u = solve_landscape(&ctx.grid, &v, 0.5)?;
    ctx.note_stage("solve landscape", t0);
    let pcfg = ctx.cfg.paths.path_config()?;
    let points = resolve_points(&ctx.cfg, &ctx.grid)?;
    let sigma = ctx.cfg.verify.sigma;
    let headroom = ctx.cfg.verify.headroom;
    let dim = ctx.grid.dim();

    let t0 = Instant::now();
    let mut rows = Vec::new();
    let mut pass = true;
    let mut worst = (f64::NEG_INFINITY, String::new());
    for &x0 in &points {
        let prof = theorem2_bound(&ctx.grid, &v, x0, lambda, &pcfg)?;
        let (_, best) = prof.min_bound();
        let uu = u.sample(x0);
        let rhs = headroom * lambda * uu;
        let ok = best.mean <= rhs + sigma * best.stderr;
        pass &= ok;
        rows.push(format!(
            "{},{},{},{},{lambda},{uu},{},{}",
            point_cols(dim, x0),
            best.t,
            best.mean,
            best.stderr,
            lambda * uu,
            ok as u8
        ));
        let excess = best.mean - sigma * best.stderr - rhs;
        if excess > worst.0 {
            worst = (
                excess,
                format!(
                    "x0 = {:?}: min bound {} +- {} at t = {}, {headroom} lambda u = {rhs}",
                    &x0[..dim], best.mean, best.stderr, best.t
                ),
            );
        }
    }
    ctx.note_stage("survival paths", t0);
    write_csv(
        &mut ctx.run,
        "verify_corollary.csv",
        &format!("{},t_star,min_mean,stderr,lambda,u,lambda_u,pass", coord_header_x0(dim)),
        &rows,
    )?;
    let detail = if pass {
        format!("{} nodes dipped under {headroom} lambda u (lambda = {lambda})", rows.len())
    } else {
        format!("worst offender {}", worst.1)
    };
    Ok((pass, detail))
}

/// Time-averaged potential along free paths against the reciprocal landscape.
/// Gates in 1d; 2d margins are recorded for inspection only because the
/// dimensional constant is not pinned down.
fn thm3(ctx: &mut Ctx) -> CliResult<(bool, String)> {
    let Some(pot) = ctx.cfg.potential.clone() else {
        return Err(Fail::Config(
            "this verification evaluates the potential off the grid; it needs a potential section".into(),
        ));
    };
    let v = ensure_potential(ctx)?;
    let v_min = v.min();
    if v_min <= 0.0 {
        return Err(Fail::Config(
            "this verification needs a potential bounded below by a positive constant; set a positive offset".into(),
        ));
    }
    let model = PotentialModel::new(&ctx.grid, &pot.spec())?;
    let t0 = Instant::now();
    let u = solve_landscape(&ctx.grid, &v, 0.5)?;
    ctx.note_stage("solve landscape", t0);
    let pcfg = ctx.cfg.paths.path_config()?;
    let points = resolve_points(&ctx.cfg, &ctx.grid)?;
    let dim = ctx.grid.dim();
    let gate = dim == 1;
    let c_d = if gate { ctx.cfg.verify.c1 } else { ctx.cfg.verify.c2 };

    let t0 = Instant::now();
    let mut rows = Vec::new();
    let mut pass = true;
    let mut worst = (f64::NEG_INFINITY, String::new());
    for &x0 in &points {
        let check = theorem3_check(|p| model.eval(p), &u, x0, &pcfg, c_d, v_min)?;
        if gate {
            pass &= check.pass;
        }
        rows.push(format!(
            "{},{},{},{},{},{},{},{}",
            point_cols(dim, x0),
            check.t_star,
            check.lhs,
            check.lhs_stderr,
            check.rhs,
            check.margin,
            check.distance,
            check.pass as u8
        ));
        if -check.margin > worst.0 {
            worst = (
                -check.margin,
                format!(
                    "x0 = {:?}: averaged potential {} +- {} at t = {}, needs {}",
                    &x0[..dim], check.lhs, check.lhs_stderr, check.t_star, check.rhs
                ),
            );
        }
    }
    ctx.note_stage("averaging paths", t0);
    write_csv(
        &mut ctx.run,
        "verify_thm3.csv",
        &format!("{},t_star,lhs,lhs_stderr,rhs,margin,distance,pass", coord_header_x0(dim)),
        &rows,
    )?;
    let detail = if !gate {
        format!("2d margins recorded for {} nodes (informational, c2 = {c_d})", rows.len())
    } else if pass {
        format!("{} nodes cleared the reciprocal landscape (c1 = {c_d})", rows.len())
    } else {
        format!("worst offender {}", worst.1)
    };
    Ok((if gate { pass } else { true }, detail))
}
