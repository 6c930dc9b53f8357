//! Expanding-domain driver: Dirichlet solves with data `φ₁` on growing boxes,
//! compared on a fixed inner ball until they stabilize.

use log::{info, warn};
use rayon::prelude::*;

use crate::barriers::BarrierPair;
use crate::curvature::Curvature;
use crate::dirichlet::{DirichletProblem, SolverOptions, SolverReport};
use crate::error::{Error, Result};
use crate::geometry::tilt_factor;
use crate::grid::{GridFunction, GridSpec};

#[derive(Debug, Clone)]
pub struct EntireOptions {
    /// Radius of the inner ball on which stages are compared.
    pub r0: f64,
    pub spacing: f64,
    /// Box half-widths; `None` uses `default_schedule(r0, default_stages)`.
    pub schedule: Option<Vec<f64>>,
    pub default_stages: usize,
    /// Stop once a stabilization gap falls below this.
    pub tol: f64,
    pub solver: SolverOptions,
    /// Directions per ring of the asymptotic residual.
    pub ring_directions: usize,
}

impl Default for EntireOptions {
    fn default() -> Self {
        Self {
            r0: 2.0,
            spacing: 1.0 / 16.0,
            schedule: None,
            default_stages: 3,
            tol: 1e-6,
            solver: SolverOptions::default(),
            ring_directions: 32,
        }
    }
}

/// Geometric radii `R₁ = max(2R₀, R₀ + 2)`, `R_{k+1} = 2R_k`.
pub fn default_schedule(r0: f64, stages: usize) -> Vec<f64> {
    let first = (2.0 * r0).max(r0 + 2.0);
    (0..stages).map(|k| first * 2f64.powi(k as i32)).collect()
}

impl EntireOptions {
    pub fn radii(&self) -> Vec<f64> {
        self.schedule
            .clone()
            .unwrap_or_else(|| default_schedule(self.r0, self.default_stages))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.spacing > 0.0 && self.tol > 0.0) {
            return Err(Error::Domain("r0, spacing and tol must be positive".into()));
        }
        let radii = self.radii();
        if radii.is_empty() {
            return Err(Error::Domain("radius schedule is empty".into()));
        }
        if radii[0] <= self.r0 {
            return Err(Error::Domain(format!(
                "first radius {} must exceed the inner radius {}",
                radii[0], self.r0
            )));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(format!("radius schedule must be strictly increasing: {radii:?}")));
        }
        for r in radii.iter().chain(std::iter::once(&self.r0)) {
            let m = 2.0 * r / self.spacing;
            if (m - m.round()).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "radius {r} is not a multiple of half the spacing {}",
                    self.spacing
                )));
            }
        }
        if self.ring_directions == 0 {
            return Err(Error::Domain("ring_directions must be positive".into()));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone)]
pub struct StageRecord {
    pub radius: f64,
    pub solution: GridFunction,
    pub report: SolverReport,
    /// `ν_max` over interior nodes with `|x| ≤ R₀`.
    pub nu_max_inner: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingResidual {
    pub radius: f64,
    /// `u(r x̂) - r - f(x̂)` per direction.
    pub values: Vec<f64>,
    pub max_abs: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticProfile {
    pub rings: Vec<RingResidual>,
}

impl AsymptoticProfile {
    /// Ring sup-norms strictly decrease outward.
    pub fn is_decreasing(&self) -> bool {
        self.rings.windows(2).all(|w| w[1].max_abs < w[0].max_abs)
    }
}

#[derive(Debug, Clone)]
pub struct ExpansionRun {
    pub r0: f64,
    pub schedule: Vec<f64>,
    pub stages: Vec<StageRecord>,
    /// `δ_k = sup_{B_{R₀}} |u_{R_{k+1}} - u_{R_k}|`, one per consecutive pair of stages.
    pub gaps: Vec<f64>,
    /// Ring residuals of the outermost stage against `f ≡ 0`.
    pub asymptotic: AsymptoticProfile,
    pub warnings: Vec<String>,
    pub stopped_early: bool,
    pub wall_time: f64,
}

impl ExpansionRun {
    pub fn gaps_strictly_decreasing(&self) -> bool {
        self.gaps.windows(2).all(|w| w[1] < w[0])
    }

    pub fn last(&self) -> &StageRecord {
        self.stages.last().expect("a run has at least one stage")
    }
}

/// `sup |a - b|` over nodes of `a`'s grid with `|x| ≤ r0` (b interpolated).
pub fn sup_difference_on_ball(a: &GridFunction, b: &GridFunction, r0: f64) -> Result<f64> {
    let spec = a.spec();
    let vals: Vec<Option<f64>> = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let x = spec.point(i);
            if x.iter().map(|v| v * v).sum::<f64>() > r0 * r0 * (1.0 + 1e-12) {
                return Some(0.0);
            }
            b.interpolate(&x).map(|bv| (a.values()[i] - bv).abs())
        })
        .collect();
    let mut sup = 0.0f64;
    for v in vals {
        sup = sup.max(v.ok_or_else(|| Error::Domain("inner ball not covered by both grids".into()))?);
    }
    Ok(sup)
}

/// Restriction to the common grid `[-r0, r0]ⁿ` with the given spacing.
pub fn restrict(u: &GridFunction, r0: f64, spacing: f64) -> Result<GridFunction> {
    u.resample_box(r0, spacing)
}

fn nu_max_on_ball(u: &GridFunction, r0: f64) -> f64 {
    let n = u.dim();
    let spec = u.spec();
    let slope = (0..u.len())
        .into_par_iter()
        .filter_map(|i| {
            let x = spec.point(i);
            if x.iter().map(|v| v * v).sum::<f64>() > r0 * r0 {
                return None;
            }
            let mut g = vec![0.0; n];
            let mut h = vec![0.0; n * n];
            u.jet_at(i, &mut g, &mut h)
                .then(|| g.iter().map(|v| v * v).sum::<f64>().sqrt())
        })
        .reduce(|| 0.0, f64::max);
    tilt_factor(&[slope]).unwrap_or(f64::INFINITY)
}

/// `u(r x̂) - r - f(x̂)` on rings `r ∈ radii`, directions equally spaced
/// (`n = 2`) or on a Fibonacci lattice (`n = 3`); multilinear interpolation.
pub fn asymptotic_residual_at(
    u: &GridFunction,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    radii: &[f64],
    directions: usize,
) -> Result<AsymptoticProfile> {
    let dirs = crate::barriers::sphere_points(u.dim(), directions)?;
    let mut rings = Vec::with_capacity(radii.len());
    for &r in radii {
        let values: Vec<Option<f64>> = dirs
            .par_iter()
            .map(|y| {
                let x: Vec<f64> = y.iter().map(|v| v * r).collect();
                u.interpolate(&x).map(|uv| uv - r - f(y))
            })
            .collect();
        let values: Vec<f64> = values
            .into_iter()
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::Domain(format!("ring of radius {r} leaves the grid")))?;
        let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        rings.push(RingResidual {
            radius: r,
            values,
            max_abs,
            mean,
        });
    }
    Ok(AsymptoticProfile { rings })
}

/// Rings at `R/4, R/2, 3R/4` where `R` is the inner radius of `u`'s box.
pub fn asymptotic_residual(
    u: &GridFunction,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    directions: usize,
) -> Result<AsymptoticProfile> {
    let big_r = u.spec().inner_radius();
    asymptotic_residual_at(u, f, &[0.25 * big_r, 0.5 * big_r, 0.75 * big_r], directions)
}

/// Runs the expansion. Returns the last stage restricted to `[-R₀, R₀]ⁿ`.
pub fn solve_entire(
    curvature: &dyn Curvature,
    barriers: &BarrierPair,
    opts: &EntireOptions,
) -> Result<(GridFunction, ExpansionRun)> {
    let start = std::time::Instant::now();
    opts.validate()?;
    let radii = opts.radii();
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut gaps: Vec<f64> = Vec::new();
    let mut warnings = Vec::new();
    let mut stopped_early = false;
    for (k, &radius) in radii.iter().enumerate() {
        let stage_err = |e: Error, gaps: &Vec<f64>, stages: &Vec<StageRecord>| Error::Stage {
            stage: k,
            radius,
            source: Box::new(e),
            completed_radii: stages.iter().map(|s| s.radius).collect(),
            gaps: gaps.clone(),
        };
        let problem = DirichletProblem::new(curvature, barriers, radius, opts.spacing)
            .map_err(|e| stage_err(e, &gaps, &stages))?;
        let (solution, report) = problem
            .solve(&opts.solver)
            .map_err(|e| stage_err(e, &gaps, &stages))?;
        let nu_max_inner = nu_max_on_ball(&solution, opts.r0);
        info!(
            "stage {k}: R = {radius}, residual {:.3e}, nu_max(B_R0) {:.4}",
            report.final_residual, nu_max_inner
        );
        if let Some(prev) = stages.last() {
            let gap = sup_difference_on_ball(&solution, &prev.solution, opts.r0)?;
            if let Some(&last) = gaps.last() {
                if gap > 10.0 * last {
                    let msg = format!("gap grew from {last:.3e} to {gap:.3e} at R = {radius}");
                    warn!("{msg}");
                    warnings.push(msg);
                }
            }
            gaps.push(gap);
        }
        stages.push(StageRecord {
            radius,
            solution,
            report,
            nu_max_inner,
        });
        if gaps.last().is_some_and(|&g| g < opts.tol) && k + 1 < radii.len() {
            stopped_early = true;
            break;
        }
    }
    let last = stages.last().expect("at least one stage");
    let asymptotic = asymptotic_residual(&last.solution, &|_| 0.0, opts.ring_directions)?;
    let inner = restrict(&last.solution, opts.r0, opts.spacing)?;
    let run = ExpansionRun {
        r0: opts.r0,
        schedule: radii,
        stages,
        gaps,
        asymptotic,
        warnings,
        stopped_early,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((inner, run))
}

/// Grid `[-r0, r0]ⁿ` shared by all stages.
pub fn common_grid(dim: usize, r0: f64, spacing: f64) -> Result<GridSpec> {
    GridSpec::centered_box(dim, r0, spacing)
}
