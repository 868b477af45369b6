//! The artifact-producing commands. Each builds what it needs (reusing
//! checksum-verified artifacts from earlier runs of the same config), writes
//! fixed-name outputs under the run directory, and logs stage timings.

use std::time::Instant;

use landscape_core::eigen::find_lowest_pairs;
use landscape_core::grid::{eval_on_grid, Grid, Point, ScalarField, VectorField};
use landscape_core::io;
use landscape_core::landscape::{local_landscape, solve_landscape, LocalLandscapeParams};
use landscape_core::model::{build_magnetic, build_potential};
use landscape_core::operator::assemble;
use landscape_core::pathint::{landscape_via_paths, theorem2_bound};
use landscape_core::rng::{stream, tag};
use rand::Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::fail::{CliResult, Fail};
use crate::manifest::RunDir;

pub struct Ctx {
    pub cfg: RunConfig,
    pub grid: Grid,
    pub run: RunDir,
    pub stages: Vec<(String, f64)>,
}

impl Ctx {
    pub fn note_stage(&mut self, name: &str, t0: Instant) {
        self.stages.push((name.to_string(), t0.elapsed().as_secs_f64()));
    }
}

/// V from the config's bump model, or identically zero without a `potential`
/// section. Reuses V.llf1 when its checksum still matches the manifest.
pub fn ensure_potential(ctx: &mut Ctx) -> CliResult<ScalarField> {
    let name = "V.llf1";
    if ctx.run.has_valid(name)? {
        let v = io::read_scalar(&ctx.run.path(name))?;
        if v.grid() != &ctx.grid {
            return Err(Fail::Config(format!("{name} was written for a different grid")));
        }
        return Ok(v);
    }
    let t0 = Instant::now();
    let v = match &ctx.cfg.potential {
        Some(p) => build_potential(&ctx.grid, &p.spec())?,
        None => eval_on_grid(&ctx.grid, |_| 0.0)?,
    };
    io::write_scalar(&ctx.run.path(name), &v)?;
    ctx.run.record(name)?;
    ctx.note_stage("build potential", t0);
    Ok(v)
}

pub fn ensure_magnetic(ctx: &mut Ctx) -> CliResult<Option<VectorField>> {
    let Some(m) = ctx.cfg.magnetic.clone() else {
        return Ok(None);
    };
    let names = ["A_x.llf1", "A_y.llf1"];
    if ctx.run.has_valid(names[0])? && ctx.run.has_valid(names[1])? {
        let ax = io::read_scalar(&ctx.run.path(names[0]))?;
        let ay = io::read_scalar(&ctx.run.path(names[1]))?;
        if ax.grid() != &ctx.grid || ay.grid() != &ctx.grid {
            return Err(Fail::Config("A field files were written for a different grid".into()));
        }
        return Ok(Some(VectorField::new(ctx.grid.clone(), vec![ax, ay])?));
    }
    let t0 = Instant::now();
    let (a, _note) = build_magnetic(&ctx.grid, &m.spec())?;
    for (axis, name) in names.iter().enumerate() {
        io::write_scalar(&ctx.run.path(name), a.component(axis))?;
        ctx.run.record(name)?;
    }
    ctx.note_stage("build magnetic field", t0);
    Ok(Some(a))
}

pub fn gen_model(ctx: &mut Ctx) -> CliResult<()> {
    if ctx.cfg.potential.is_none() && ctx.cfg.magnetic.is_none() {
        return Err(Fail::Config(
            "gen-model: config has neither a potential nor a magnetic section".into(),
        ));
    }
    ensure_potential(ctx)?;
    ensure_magnetic(ctx)?;
    Ok(())
}

pub fn landscape(ctx: &mut Ctx) -> CliResult<()> {
    let v = ensure_potential(ctx)?;
    let t0 = Instant::now();
    let u = solve_landscape(&ctx.grid, &v, ctx.cfg.laplacian_scale)?;
    ctx.note_stage("solve landscape", t0);
    io::write_scalar(&ctx.run.path("u.llf1"), &u)?;
    ctx.run.record("u.llf1")?;
    let rows = field_rows(&ctx.grid, |flat| format!("{}", u.values()[flat]));
    write_csv(&mut ctx.run, "u.csv", &format!("{},u", coord_header(ctx.grid.dim())), &rows)
}

pub fn local_landscape_cmd(ctx: &mut Ctx) -> CliResult<()> {
    let v = ensure_potential(ctx)?;
    let ts = ctx.cfg.smoothing.t.clone();
    let mut rows = Vec::new();
    for (i, &t) in ts.iter().enumerate() {
        let t0 = Instant::now();
        let vt = local_landscape(&v, &LocalLandscapeParams { t, padding: ctx.cfg.smoothing.padding })?;
        ctx.note_stage(&format!("smooth t={t}"), t0);
        let name = format!("V_t_{i}.llf1");
        io::write_scalar(&ctx.run.path(&name), &vt)?;
        ctx.run.record(&name)?;
        rows.extend(field_rows(&ctx.grid, |flat| format!("{t},{}", vt.values()[flat])));
    }
    write_csv(
        &mut ctx.run,
        "V_t.csv",
        &format!("{},t,V_t", coord_header(ctx.grid.dim())),
        &rows,
    )
}

#[derive(Serialize)]
struct EigRecord {
    index: usize,
    lambda: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    b: f64,
    seed: u64,
}

pub fn eigs(ctx: &mut Ctx) -> CliResult<()> {
    let v = ensure_potential(ctx)?;
    let a = ensure_magnetic(ctx)?;
    let t0 = Instant::now();
    let h = assemble(&ctx.grid, &v, a.as_ref(), ctx.cfg.laplacian_scale)?;
    let pairs = find_lowest_pairs(&h, &ctx.cfg.eigen.settings())?;
    ctx.note_stage("eigenpairs", t0);
    let mut records = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let name = format!("eig_{i:03}.llf1");
        io::write_complex(&ctx.run.path(&name), &p.phi)?;
        ctx.run.record(&name)?;
        records.push(EigRecord {
            index: i,
            lambda: p.lambda,
            residual: p.residual,
            iterations: p.iterations,
            converged: p.converged,
            b: ctx.cfg.magnetic.as_ref().map_or(0.0, |m| m.b),
            seed: ctx.cfg.eigen.probe_seed,
        });
    }
    let text = serde_json::to_string_pretty(&records).map_err(|e| Fail::Config(e.to_string()))?;
    io::write_atomic(&ctx.run.path("eigs.json"), |w| {
        use std::io::Write;
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    })?;
    ctx.run.record("eigs.json")
}

pub fn fk_bound(ctx: &mut Ctx) -> CliResult<()> {
    let v = ensure_potential(ctx)?;
    let lambda = match ctx.cfg.bound_lambda {
        Some(l) => l,
        None => ground_lambda(ctx, &v)?,
    };
    let t0 = Instant::now();
    let u = solve_landscape(&ctx.grid, &v, ctx.cfg.laplacian_scale)?;
    ctx.note_stage("solve landscape", t0);
    let pcfg = ctx.cfg.paths.path_config()?;
    let points = resolve_points(&ctx.cfg, &ctx.grid)?;
    let dim = ctx.grid.dim();

    let t0 = Instant::now();
    let mut rows = Vec::new();
    let mut envelope = Vec::new();
    for &x0 in &points {
        let prof = theorem2_bound(&ctx.grid, &v, x0, lambda, &pcfg)?;
        for e in &prof.estimates {
            rows.push(format!(
                "{},{},{},{},{},{},{lambda}",
                point_cols(dim, x0),
                e.t,
                e.mean,
                e.stderr,
                e.n_alive,
                e.n_paths
            ));
        }
        let (_, best) = prof.min_bound();
        let uu = u.sample(x0);
        envelope.push(format!(
            "{},{},{},{},{lambda},{uu},{}",
            point_cols(dim, x0),
            best.t,
            best.mean,
            best.stderr,
            lambda * uu
        ));
    }
    ctx.note_stage("survival paths", t0);
    let cols = coord_header_x0(dim);
    write_csv(
        &mut ctx.run,
        "fk_bound.csv",
        &format!("{cols},t,mean,stderr,n_alive,n_paths,lambda"),
        &rows,
    )?;
    write_csv(
        &mut ctx.run,
        "fk_bound_envelope.csv",
        &format!("{cols},t_star,mean,stderr,lambda,u,lambda_u"),
        &envelope,
    )
}

pub fn fk_landscape(ctx: &mut Ctx) -> CliResult<()> {
    let v = ensure_potential(ctx)?;
    let t0 = Instant::now();
    // The path estimator targets the unit-Laplacian landscape regardless of
    // the operator scale used elsewhere in the run.
    let u = solve_landscape(&ctx.grid, &v, 1.0)?;
    ctx.note_stage("solve landscape", t0);
    let pcfg = ctx.cfg.paths.path_config()?;
    let points = resolve_points(&ctx.cfg, &ctx.grid)?;
    let dim = ctx.grid.dim();

    let t0 = Instant::now();
    let mut rows = Vec::new();
    for &x0 in &points {
        let est = landscape_via_paths(&ctx.grid, &v, x0, &pcfg)?;
        let uu = u.sample(x0);
        let contained = est.lower <= uu && uu <= est.upper;
        rows.push(format!(
            "{},{},{},{},{},{},{uu},{}",
            point_cols(dim, x0),
            est.estimate,
            est.lower,
            est.upper,
            est.tail_upper,
            est.decay_rate,
            contained as u8
        ));
    }
    ctx.note_stage("landscape paths", t0);
    write_csv(
        &mut ctx.run,
        "fk_landscape.csv",
        &format!("{},estimate,lower,upper,tail_upper,decay_rate,u_sparse,contained", coord_header_x0(dim)),
        &rows,
    )
}

pub fn ground_lambda(ctx: &mut Ctx, v: &ScalarField) -> CliResult<f64> {
    let a = ensure_magnetic(ctx)?;
    let t0 = Instant::now();
    let h = assemble(&ctx.grid, v, a.as_ref(), ctx.cfg.laplacian_scale)?;
    let pairs = find_lowest_pairs(&h, &ctx.cfg.eigen.settings_with_pairs(1))?;
    ctx.note_stage("ground energy", t0);
    Ok(pairs[0].lambda)
}

/// Explicit sample points, or a deterministic interior node draw.
pub fn resolve_points(cfg: &RunConfig, grid: &Grid) -> CliResult<Vec<Point>> {
    let dim = grid.dim();
    if let Some(list) = &cfg.sample.points {
        let mut out = Vec::with_capacity(list.len());
        for p in list {
            let mut q = [0.0; 2];
            q[..dim].copy_from_slice(&p[..dim]);
            if !grid.contains_open(q) {
                return Err(Fail::Config(format!("sample point {p:?} is not inside the box")));
            }
            out.push(q);
        }
        return Ok(out);
    }
    let n = [grid.n_nodes(0), if dim == 2 { grid.n_nodes(1) } else { 1 }];
    let mut flats = Vec::with_capacity(cfg.sample.count);
    let mut out = Vec::with_capacity(cfg.sample.count);
    let mut draw = 0u64;
    while out.len() < cfg.sample.count {
        if draw > 10_000 * cfg.sample.count as u64 {
            return Err(Fail::Config(format!(
                "cannot place {} interior points with margin {}",
                cfg.sample.count, cfg.sample.margin
            )));
        }
        let mut rng = stream(cfg.sample.seed, tag::SAMPLE_POINTS, draw);
        draw += 1;
        let ix = ((rng.gen::<f64>() * n[0] as f64) as usize).min(n[0] - 1);
        let iy = if dim == 2 {
            ((rng.gen::<f64>() * n[1] as f64) as usize).min(n[1] - 1)
        } else {
            0
        };
        let flat = ix * n[1] + iy;
        let p = grid.node_coord(flat);
        if grid.distance_to_boundary(p) >= cfg.sample.margin && !flats.contains(&flat) {
            flats.push(flat);
            out.push(p);
        }
    }
    Ok(out)
}

pub fn coord_header(dim: usize) -> String {
    if dim == 1 {
        "x".into()
    } else {
        "x,y".into()
    }
}

pub fn coord_header_x0(dim: usize) -> String {
    (0..dim).map(|a| format!("x0_{a}")).collect::<Vec<_>>().join(",")
}

pub fn point_cols(dim: usize, p: Point) -> String {
    (0..dim).map(|a| format!("{}", p[a])).collect::<Vec<_>>().join(",")
}

pub fn field_rows(grid: &Grid, value: impl Fn(usize) -> String) -> Vec<String> {
    (0..grid.len())
        .map(|flat| {
            let p = grid.node_coord(flat);
            format!("{},{}", point_cols(grid.dim(), p), value(flat))
        })
        .collect()
}

pub fn write_csv(run: &mut RunDir, name: &str, header: &str, rows: &[String]) -> CliResult<()> {
    io::write_atomic(&run.path(name), |w| {
        use std::io::Write;
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    run.record(name)
}
