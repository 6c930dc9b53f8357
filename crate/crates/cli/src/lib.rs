//! Command-line front end: configuration, file formats and the subcommand pipelines.

pub mod config;
pub mod io;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand as ClapSubcommand};
use log::info;

use scalcurv::barriers::{
    hyperboloid_for_pinching, lightcone_gradient_aid, treibergs_envelope, Barrier, BarrierPair, BarrierSpec,
    EnvelopeKind, Hyperboloid, SampledBarrier, SphereFunction, DEFAULT_CIRCLE_SAMPLES,
};
use scalcurv::curvature::{Builtin, Curvature, SampledCurvature};
use scalcurv::dirichlet::DirichletProblem;
use scalcurv::entire::{asymptotic_residual, solve_entire, sup_difference_on_ball};
use scalcurv::grid::{GridFunction, GridSpec};
use scalcurv::verify::{radial_shoot, run_battery};
use scalcurv::{Error, Result};

use crate::config::{BarrierKind, RunConfig, Subcommand};
use crate::io::{read_grid, read_sphere_rows, write_grid, write_table, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SCALCURV_OUT";

#[derive(Debug, Parser)]
#[command(name = "scalcurv", version, about = "Entire spacelike graphs of prescribed sigma_2 curvature")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: $SCALCURV_OUT, then run.out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override a configuration key, e.g. `--set domain.spacing=0.03125`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Clone, Copy, ClapSubcommand)]
enum Command {
    /// Solve the Dirichlet problem on one box.
    SolveDirichlet,
    /// Run the expanding-domain driver.
    SolveEntire,
    /// Sample the barrier pair and auxiliary data.
    Barriers,
    /// Radially symmetric shooting oracle.
    OracleRadial,
    /// Randomized inequality and comparison battery.
    Verify,
}

impl Command {
    fn subcommand(self) -> Subcommand {
        match self {
            Command::SolveDirichlet => Subcommand::SolveDirichlet,
            Command::SolveEntire => Subcommand::SolveEntire,
            Command::Barriers => Subcommand::Barriers,
            Command::OracleRadial => Subcommand::OracleRadial,
            Command::Verify => Subcommand::Verify,
        }
    }
}

/// What a pipeline produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub report: Report,
    pub artifacts: Vec<PathBuf>,
    pub verification_failed: bool,
    /// Extra text for the printed summary.
    pub notes: String,
}

/// Entry point shared by `main` and the tests. Returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: run.threads: {e}");
            return EXIT_INPUT;
        }
    };
    match pool.install(|| execute(&cfg)) {
        Ok(outcome) => {
            print!("{}", summary(&cfg, &outcome));
            if outcome.verification_failed {
                EXIT_VERIFY
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_SOLVER
            }
        }
    }
}

/// Defaults, then the config file, then `--set`, then the dedicated flags.
fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut explicit_out = false;
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::parse("--config", format!("{}: {e}", p.display())))?;
            explicit_out = text
                .lines()
                .any(|l| l.split_once('=').is_some_and(|(k, _)| k.trim() == "run.out"));
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::parse("--set", format!("expected KEY=VALUE, got {kv:?}")))?;
        let k = k.trim();
        explicit_out |= k == "run.out";
        cfg.set(k, v.trim())?;
    }
    cfg.subcommand = cli.command.subcommand();
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    } else if !explicit_out {
        if let Some(env) = std::env::var_os(OUT_ENV) {
            cfg.out = PathBuf::from(env);
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the pipeline for `cfg.subcommand` and writes its artifacts under `cfg.out`.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    fs::create_dir_all(&cfg.out)?;
    let hash = cfg.hash();
    let config_path = cfg.out.join("config.txt");
    fs::write(&config_path, format!("{}{}", io::provenance(&hash), cfg.to_text()))?;
    let mut outcome = match cfg.subcommand {
        Subcommand::SolveDirichlet => solve_dirichlet(cfg, &hash)?,
        Subcommand::SolveEntire => solve_entire_cmd(cfg, &hash)?,
        Subcommand::Barriers => barriers_cmd(cfg, &hash)?,
        Subcommand::OracleRadial => oracle_radial(cfg, &hash)?,
        Subcommand::Verify => verify_cmd(cfg, &hash)?,
    };
    outcome.report.push("config_sha256", &hash);
    let report_path = cfg.out.join("report.txt");
    outcome.report.write(&report_path, &hash)?;
    outcome.artifacts.insert(0, config_path);
    outcome.artifacts.push(report_path);
    let mut manifest = io::provenance(&hash);
    manifest.push_str(&format!("subcommand = {}\n", cfg.subcommand.name()));
    for a in &outcome.artifacts {
        let name = a.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        manifest.push_str(&format!("artifact = {name}\n"));
    }
    let manifest_path = cfg.out.join("manifest.txt");
    fs::write(&manifest_path, manifest)?;
    outcome.artifacts.push(manifest_path);
    Ok(outcome)
}

fn summary(cfg: &RunConfig, outcome: &Outcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scalcurv {}  (n = {})", cfg.subcommand.name(), cfg.dim);
    for (k, v) in outcome.report.entries() {
        let _ = writeln!(s, "  {k:<28} {v}");
    }
    s.push_str(&outcome.notes);
    let _ = writeln!(s, "artifacts in {}:", cfg.out.display());
    for a in &outcome.artifacts {
        let _ = writeln!(s, "  {}", a.file_name().map(|n| n.to_string_lossy()).unwrap_or_default());
    }
    s
}

pub fn build_curvature(cfg: &RunConfig) -> Result<Arc<dyn Curvature>> {
    match &cfg.curvature_file {
        Some(p) => Ok(Arc::new(SampledCurvature::new(read_grid(p)?)?)),
        None => Ok(Arc::new(cfg.builtin()?)),
    }
}

fn fourier(coeffs: &[f64], theta: f64) -> (f64, f64) {
    let mut f = coeffs[0];
    let mut df = 0.0;
    for (k, pair) in coeffs[1..].chunks(2).enumerate() {
        let m = (k + 1) as f64;
        f += pair[0] * (m * theta).cos() + pair[1] * (m * theta).sin();
        df += m * (-pair[0] * (m * theta).sin() + pair[1] * (m * theta).cos());
    }
    (f, df)
}

/// The asymptotic data `f` on the unit sphere, for Treibergs barriers.
pub fn sphere_data(cfg: &RunConfig) -> Result<SphereFunction> {
    match &cfg.f_file {
        Some(p) => {
            let rows = read_sphere_rows(p, cfg.dim)?;
            let n = cfg.dim;
            let points = rows.iter().map(|r| r[..n].to_vec()).collect();
            let values = rows.iter().map(|r| r[n]).collect();
            let grads = rows.iter().map(|r| r[n + 1..].to_vec()).collect();
            SphereFunction::from_samples(n, points, values, grads, false)
        }
        None => {
            let samples = if cfg.sphere_samples > 0 {
                cfg.sphere_samples
            } else {
                DEFAULT_CIRCLE_SAMPLES
            };
            let c = cfg.f_fourier.clone();
            let c2 = c.clone();
            SphereFunction::circle(samples, move |t| fourier(&c, t).0, move |t| fourier(&c2, t).1)
        }
    }
}

/// The configured `f` when Treibergs barriers are used.
fn asymptotic_data(cfg: &RunConfig) -> Result<Option<SphereFunction>> {
    if cfg.barrier_kind == BarrierKind::Treibergs {
        sphere_data(cfg).map(Some)
    } else {
        Ok(None)
    }
}

fn explicit_hyperboloid(p: &config::HyperboloidParams, dim: usize) -> Result<Hyperboloid> {
    let shift = if p.shift.is_empty() { vec![0.0; dim] } else { p.shift.clone() };
    Hyperboloid::new(p.alpha, shift, p.lift)
}

/// Barrier descriptions that can be written back out (everything but sampled grids).
fn barrier_specs(cfg: &RunConfig) -> Result<Option<(BarrierSpec, BarrierSpec)>> {
    Ok(Some(match cfg.barrier_kind {
        BarrierKind::Pinching => (
            BarrierSpec::Hyperboloid(hyperboloid_for_pinching(cfg.h1, cfg.dim)?),
            BarrierSpec::Hyperboloid(hyperboloid_for_pinching(cfg.h2, cfg.dim)?),
        ),
        BarrierKind::Hyperboloid => (
            BarrierSpec::Hyperboloid(explicit_hyperboloid(&cfg.lower, cfg.dim)?),
            BarrierSpec::Hyperboloid(explicit_hyperboloid(&cfg.upper, cfg.dim)?),
        ),
        BarrierKind::Treibergs => {
            let f = Arc::new(sphere_data(cfg)?);
            (
                BarrierSpec::Treibergs(treibergs_envelope(f.clone(), cfg.h1, cfg.h2, EnvelopeKind::Lower)?),
                BarrierSpec::Treibergs(treibergs_envelope(f, cfg.h1, cfg.h2, EnvelopeKind::Upper)?),
            )
        }
        BarrierKind::SpecFiles => {
            let read = |p: &Option<PathBuf>| -> Result<BarrierSpec> {
                let p = p.as_ref().ok_or_else(|| Error::parse("barrier.lower.file", "missing"))?;
                BarrierSpec::from_text(&fs::read_to_string(p)?)
            };
            (read(&cfg.lower_file)?, read(&cfg.upper_file)?)
        }
        BarrierKind::GridFiles => return Ok(None),
    }))
}

pub fn build_barriers(cfg: &RunConfig) -> Result<BarrierPair> {
    let pair = match (cfg.barrier_kind, barrier_specs(cfg)?) {
        (BarrierKind::Pinching, _) => BarrierPair::hyperboloids(cfg.h1, cfg.h2, cfg.dim)?,
        (_, Some((lo, hi))) => {
            let mut pair = BarrierPair::new(lo.into_barrier(), hi.into_barrier())?;
            if cfg.barrier_kind == BarrierKind::Treibergs {
                pair.pinching = Some((cfg.h1, cfg.h2));
            }
            pair
        }
        (_, None) => {
            let read = |p: &Option<PathBuf>| -> Result<Arc<dyn Barrier>> {
                let p = p.as_ref().ok_or_else(|| Error::parse("barrier.lower.file", "missing"))?;
                Ok(Arc::new(SampledBarrier::new(read_grid(p)?)))
            };
            BarrierPair::new(read(&cfg.lower_file)?, read(&cfg.upper_file)?)?
        }
    };
    if pair.dim() != cfg.dim {
        return Err(Error::parse(
            "run.dim",
            format!("barriers have dimension {}, config says {}", pair.dim(), cfg.dim),
        ));
    }
    Ok(pair)
}

/// `sup |u - √(α² + |x|²)|` over the ball of radius `r`, when `H` is a constant builtin
/// and the barriers are centered hyperboloids.
fn hyperboloid_error(cfg: &RunConfig, u: &GridFunction, r: f64) -> Result<Option<f64>> {
    if cfg.curvature_file.is_some() || cfg.barrier_kind != BarrierKind::Pinching {
        return Ok(None);
    }
    let Builtin::Constant { h } = cfg.builtin()? else {
        return Ok(None);
    };
    let exact = hyperboloid_for_pinching(h, cfg.dim)?;
    let sampled = exact.sample(u.spec());
    sup_difference_on_ball(u, &sampled, r).map(Some)
}

/// `x, u(x e₁), φ₁, φ₂` along the first axis.
fn axis_profile(u: &GridFunction, pair: &BarrierPair) -> Vec<Vec<f64>> {
    let spec = u.spec();
    let m = spec.shape()[0];
    (0..m)
        .map(|i| {
            let mut x = vec![0.0; spec.dim()];
            x[0] = spec.origin()[0] + i as f64 * spec.spacing();
            let uv = u.interpolate(&x).unwrap_or(f64::NAN);
            vec![x[0], uv, pair.lower.value(&x), pair.upper.value(&x)]
        })
        .collect()
}

fn solve_dirichlet(cfg: &RunConfig, hash: &str) -> Result<Outcome> {
    let curvature = build_curvature(cfg)?;
    let pair = build_barriers(cfg)?;
    let problem = DirichletProblem::new(&*curvature, &pair, cfg.radius, cfg.spacing)?;
    let (u, rep) = problem.solve(&cfg.solver_options())?;
    info!("dirichlet solve finished in {:.2}s", rep.wall_time);

    let mut out = Outcome::default();
    let p = cfg.out.join("solution.csv");
    write_grid(&p, &u, hash)?;
    out.artifacts.push(p);
    let p = cfg.out.join("residual_history.csv");
    let rows: Vec<Vec<f64>> = rep
        .residual_history
        .iter()
        .enumerate()
        .map(|(j, (t, r))| vec![j as f64, *t, *r])
        .collect();
    write_table(&p, hash, &["iteration", "t", "residual"], &rows)?;
    out.artifacts.push(p);
    let p = cfg.out.join("profile.csv");
    write_table(&p, hash, &["x1", "u", "lower", "upper"], &axis_profile(&u, &pair))?;
    out.artifacts.push(p);

    let r = &mut out.report;
    r.push("radius", cfg.radius);
    r.push("spacing", cfg.spacing);
    r.push("nodes", u.len());
    r.push("iterations", rep.iterations);
    r.push("final_residual", format!("{:.6e}", rep.final_residual));
    r.push("floor_stop", rep.floor_stop);
    r.push("nu_max", format!("{:.6}", rep.nu_max));
    r.push("min_margin", format!("{:.6e}", rep.min_margin));
    r.push("max_iterate_slope", format!("{:.6}", rep.max_iterate_slope));
    r.push("monotonization_k", rep.k);
    r.push("sandwich_violations", rep.sandwich_violations);
    r.push("sandwich_constant", format!("{:.6}", rep.sandwich_constant));
    if let Some(e) = hyperboloid_error(cfg, &u, cfg.radius)? {
        r.push("sup_error_vs_hyperboloid", format!("{e:.6e}"));
    }
    r.push("wall_time_s", format!("{:.3}", rep.wall_time));
    Ok(out)
}

fn solve_entire_cmd(cfg: &RunConfig, hash: &str) -> Result<Outcome> {
    let curvature = build_curvature(cfg)?;
    let pair = build_barriers(cfg)?;
    let opts = cfg.entire_options();
    let (inner, run) = solve_entire(&*curvature, &pair, &opts)?;

    let mut out = Outcome::default();
    let p = cfg.out.join("solution.csv");
    write_grid(&p, &inner, hash)?;
    out.artifacts.push(p);

    let p = cfg.out.join("stages.csv");
    let rows: Vec<Vec<f64>> = run
        .stages
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let gap = if k == 0 { f64::NAN } else { run.gaps[k - 1] };
            vec![
                s.radius,
                s.report.iterations as f64,
                s.report.final_residual,
                gap,
                s.nu_max_inner,
                s.report.sandwich_violations as f64,
                s.report.k,
            ]
        })
        .collect();
    write_table(
        &p,
        hash,
        &["radius", "iterations", "final_residual", "gap", "nu_max_inner", "sandwich_violations", "k"],
        &rows,
    )?;
    out.artifacts.push(p);

    let last = run.last();
    let profile = match asymptotic_data(cfg)? {
        Some(f) => asymptotic_residual(&last.solution, &|y| f.eval_direction(y), opts.ring_directions)?,
        None => run.asymptotic.clone(),
    };
    let p = cfg.out.join("asymptotic.csv");
    let rows: Vec<Vec<f64>> = profile.rings.iter().map(|g| vec![g.radius, g.max_abs, g.mean]).collect();
    write_table(&p, hash, &["ring_radius", "max_abs_residual", "mean_residual"], &rows)?;
    out.artifacts.push(p);
    let p = cfg.out.join("profile.csv");
    write_table(&p, hash, &["x1", "u", "lower", "upper"], &axis_profile(&last.solution, &pair))?;
    out.artifacts.push(p);

    let r = &mut out.report;
    r.push("r0", cfg.r0);
    r.push("spacing", cfg.spacing);
    r.push(
        "radii",
        run.stages.iter().map(|s| s.radius.to_string()).collect::<Vec<_>>().join(","),
    );
    r.push(
        "gaps",
        run.gaps.iter().map(|g| format!("{g:.6e}")).collect::<Vec<_>>().join(","),
    );
    r.push("gaps_strictly_decreasing", run.gaps_strictly_decreasing());
    r.push("stopped_early", run.stopped_early);
    r.push("final_residual", format!("{:.6e}", last.report.final_residual));
    r.push("nu_max_inner", format!("{:.6}", last.nu_max_inner));
    r.push(
        "asymptotic_residuals",
        profile.rings.iter().map(|g| format!("{:.6e}", g.max_abs)).collect::<Vec<_>>().join(","),
    );
    r.push("asymptotic_decreasing", profile.is_decreasing());
    if let Some(e) = hyperboloid_error(cfg, &inner, cfg.r0)? {
        r.push("sup_error_vs_hyperboloid", format!("{e:.6e}"));
    }
    for w in &run.warnings {
        r.push("warning", w);
    }
    r.push("wall_time_s", format!("{:.3}", run.wall_time));
    Ok(out)
}

fn barriers_cmd(cfg: &RunConfig, hash: &str) -> Result<Outcome> {
    let pair = build_barriers(cfg)?;
    let spec = GridSpec::centered_box(cfg.dim, cfg.radius, cfg.spacing)?;
    let lower = pair.lower.sample(&spec);
    let upper = pair.upper.sample(&spec);
    let mut out = Outcome::default();
    for (name, g) in [("lower.csv", &lower), ("upper.csv", &upper)] {
        let p = cfg.out.join(name);
        write_grid(&p, g, hash)?;
        out.artifacts.push(p);
    }
    if let Some((lo, hi)) = barrier_specs(cfg)? {
        for (name, s) in [("lower.barrier", lo), ("upper.barrier", hi)] {
            let p = cfg.out.join(name);
            fs::write(&p, format!("{}{}", io::provenance(hash), s.to_text()))?;
            out.artifacts.push(p);
        }
    }
    let probe = GridFunction::zeros(spec.clone());
    let p = cfg.out.join("profile.csv");
    let rows: Vec<Vec<f64>> = axis_profile(&probe, &pair)
        .into_iter()
        .map(|r| vec![r[0], r[2], r[3], r[3] - r[2]])
        .collect();
    write_table(&p, hash, &["x1", "lower", "upper", "gap"], &rows)?;
    out.artifacts.push(p);

    let gap = upper
        .values()
        .iter()
        .zip(lower.values())
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min);
    let ordered = gap > 0.0;
    let r = &mut out.report;
    r.push("kind", cfg.barrier_kind.name());
    r.push("radius", cfg.radius);
    r.push("nodes", spec.len());
    r.push("min_gap", format!("{gap:.6e}"));
    r.push("strictly_ordered", ordered);
    if cfg.barrier_kind == BarrierKind::Pinching {
        let phi1 = hyperboloid_for_pinching(cfg.h1, cfg.dim)?;
        let phi2 = hyperboloid_for_pinching(cfg.h2, cfg.dim)?;
        if cfg.h1 > cfg.h2 {
            let aid = lightcone_gradient_aid(&phi1, &phi2, cfg.r0)?;
            r.push("aid_delta", format!("{:.6e}", aid.delta));
            r.push("aid_eps", format!("{:.6e}", aid.eps));
            r.push("aid_r1", format!("{:.6}", aid.r1));
        }
    }
    out.verification_failed = !ordered;
    if !ordered {
        out.notes.push_str("barriers are not strictly ordered on the grid\n");
    }
    Ok(out)
}

fn oracle_radial(cfg: &RunConfig, hash: &str) -> Result<Outcome> {
    let curvature = build_curvature(cfg)?;
    let boundary = match cfg.oracle_boundary {
        Some(b) => b,
        None => {
            let pair = build_barriers(cfg)?;
            let mut x = vec![0.0; cfg.dim];
            x[0] = cfg.radius;
            pair.lower.value(&x)
        }
    };
    let prof = radial_shoot(&*curvature, cfg.dim, cfg.radius, boundary)?;
    let rows: Vec<Vec<f64>> = (0..prof.r().len())
        .map(|i| {
            vec![
                prof.r()[i],
                prof.u()[i],
                prof.du()[i],
                prof.lambda_radial()[i],
                prof.lambda_angular()[i],
            ]
        })
        .collect();
    let mut out = Outcome::default();
    let p = cfg.out.join("radial_profile.csv");
    write_table(&p, hash, &["r", "u", "du", "lambda_radial", "lambda_angular"], &rows)?;
    out.artifacts.push(p);
    let r = &mut out.report;
    r.push("radius", cfg.radius);
    r.push("boundary_value", boundary);
    r.push("u_at_origin", format!("{:.12e}", prof.u()[0]));
    r.push("max_slope", format!("{:.6}", prof.du().iter().fold(0.0f64, |m, v| m.max(v.abs()))));
    r.push("residual", format!("{:.6e}", prof.residual()));
    Ok(out)
}

fn verify_cmd(cfg: &RunConfig, hash: &str) -> Result<Outcome> {
    let report = run_battery(&cfg.battery_options())?;
    let mut out = Outcome::default();
    let p = cfg.out.join("battery.csv");
    fs::write(&p, format!("{}{}", io::provenance(hash), report.csv()))?;
    out.artifacts.push(p);
    for s in &report.suites {
        out.report.push(
            s.name.replace(' ', "_"),
            if s.pass { "PASS" } else { "FAIL" },
        );
    }
    out.report.push("seed", cfg.seed);
    out.report.push("all_passed", report.all_passed());
    out.notes = report.table();
    out.verification_failed = !report.all_passed();
    Ok(out)
}
