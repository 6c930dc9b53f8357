//! Discrete Dirichlet problem `H₂[u] = H(x, u)` on `[-R, R]ⁿ`, `u = φ₁` on the
//! boundary.
//!
//! The solver follows a monotonized continuation: for `t` along a schedule it
//! solves
//!
//! ```text
//! H₂[u] e^{-ku} = t H(x, v) e^{-kv} + (1 - t) H(x, φ₁) e^{-kφ₁}
//! ```
//!
//! with `v` frozen at the previous iterate, by damped Newton. At `t = 1` the
//! frozen iterate is released (`v = u`) so the last solve targets the actual
//! equation. Every accepted iterate is spacelike and admissible at every
//! interior node.

use std::time::Instant;

use log::{debug, info, warn};
use rayon::prelude::*;

use crate::barriers::BarrierPair;
use crate::curvature::Curvature;
use crate::error::{Error, Result};
use crate::geometry::{admissibility_margin, linearize_raw, sigma12_raw, tilt_factor, MAX_DIM};
use crate::grid::{centered_jet, GridFunction, GridSpec};
use crate::linsolve;

/// Nonlinear residual target.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Barrier checks and the sandwich use `BARRIER_TOL_FACTOR · h²`.
pub const BARRIER_TOL_FACTOR: f64 = 10.0;
/// Smallest admissibility margin an accepted iterate may have.
pub const ADMISSIBILITY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Sup-norm residual target at `t = 1`.
    pub tol: f64,
    /// Residual target of the intermediate (`t < 1`) solves.
    pub intermediate_tol: f64,
    /// Homotopy parameters; nondecreasing, in `[0, 1]`, ending at 1.
    pub schedule: Vec<f64>,
    /// Newton iterations allowed per continuation step.
    pub max_newton: usize,
    pub shrink: f64,
    pub min_step: f64,
    pub margin: f64,
    /// Initial step length of Newton iteration `j` is `damping[min(j, len - 1)]`
    /// (1 when empty).
    pub damping: Vec<f64>,
    pub check_barriers: bool,
    /// Heights sampled per node between the barriers when estimating `k`.
    pub k_samples: usize,
    /// Overrides the monotonization exponent (must still meet its lower bound).
    pub k_override: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            intermediate_tol: 1e-7,
            schedule: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            max_newton: 40,
            shrink: 0.5,
            min_step: 1e-12,
            margin: ADMISSIBILITY_MARGIN,
            damping: Vec::new(),
            check_barriers: true,
            k_samples: 9,
            k_override: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.intermediate_tol > 0.0) {
            return Err(Error::Domain("solver tolerances must be positive".into()));
        }
        if self.schedule.is_empty() || *self.schedule.last().unwrap() != 1.0 {
            return Err(Error::Domain("continuation schedule must end at t = 1".into()));
        }
        if self.schedule.iter().any(|t| !(0.0..=1.0).contains(t))
            || self.schedule.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::Domain(format!(
                "continuation schedule must be nondecreasing in [0, 1], got {:?}",
                self.schedule
            )));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Domain(format!("line-search shrink must lie in (0,1), got {}", self.shrink)));
        }
        if self.damping.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return Err(Error::Domain("damping factors must lie in (0, 1]".into()));
        }
        if self.max_newton == 0 {
            return Err(Error::Domain("max_newton must be positive".into()));
        }
        Ok(())
    }

    fn damping_at(&self, j: usize) -> f64 {
        match self.damping.len() {
            0 => 1.0,
            len => self.damping[j.min(len - 1)],
        }
    }
}

/// Right-hand side data of one continuation step.
#[derive(Debug, Clone)]
pub struct ContinuationState {
    pub t: f64,
    pub k: f64,
    /// The frozen iterate `v`; `None` means `v = u` (only at `t = 1`).
    pub frozen: Option<GridFunction>,
    /// `t H(x,v)e^{-kv} + (1-t) H(x,φ₁)e^{-kφ₁}` at every node (frozen case),
    /// or the `(1-t)` part alone when `v = u`.
    rhs: Vec<f64>,
}

impl ContinuationState {
    pub fn new(
        t: f64,
        k: f64,
        frozen: Option<GridFunction>,
        phi1: &GridFunction,
        curvature: &dyn Curvature,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("homotopy parameter must lie in [0,1], got {t}")));
        }
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!("monotonization exponent must be >= 0, got {k}")));
        }
        if frozen.is_none() && t != 1.0 {
            return Err(Error::Domain("the unfrozen equation is only defined at t = 1".into()));
        }
        if let Some(v) = &frozen {
            if v.spec() != phi1.spec() {
                return Err(Error::Domain("frozen iterate lives on a different grid".into()));
            }
        }
        let spec = phi1.spec();
        let rhs = (0..spec.len())
            .into_par_iter()
            .map(|i| {
                let x = spec.point(i);
                let p = phi1.values()[i];
                let base = (1.0 - t) * curvature.value(&x, p) * (-k * p).exp();
                match &frozen {
                    Some(v) => {
                        let z = v.values()[i];
                        base + t * curvature.value(&x, z) * (-k * z).exp()
                    }
                    None => base,
                }
            })
            .collect();
        Ok(Self { t, k, frozen, rhs })
    }
}

/// Result of [`DirichletProblem::newton_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub residual_before: f64,
    pub residual_after: f64,
    pub step_length: f64,
    pub halvings: usize,
    /// `‖δu‖∞` of the full Newton update.
    pub update_sup: f64,
    /// Largest zeroth-order (diagonal, non-stencil) coefficient assembled.
    pub max_zeroth_order: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverReport {
    /// Accepted Newton steps over the whole continuation.
    pub iterations: usize,
    /// `sup |H₂[u] - H(x,u)|` over interior nodes.
    pub final_residual: f64,
    pub nu_max: f64,
    /// Smallest admissibility margin seen on any accepted iterate.
    pub min_margin: f64,
    /// Largest interior slope seen on any accepted iterate.
    pub max_iterate_slope: f64,
    /// Nodes with `u < φ₁ - 10h²` or `u > φ₂ + 10h²`.
    pub sandwich_violations: usize,
    /// `max(φ₁ - u, u - φ₂, 0) / h²`.
    pub sandwich_constant: f64,
    pub wall_time: f64,
    pub k: f64,
    pub t_reached: f64,
    /// `(t, sup residual)` before each Newton step and at convergence.
    pub residual_history: Vec<(f64, f64)>,
    /// Stopped on a stalled line search below `max(tol, 0.1h²)`.
    pub floor_stop: bool,
    /// Discrete `φ₁` is strictly convex at every interior node.
    pub initial_strictly_convex: bool,
}

/// Outcome of the numerical barrier hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierCheckReport {
    /// `min (H₂[φ₁] - H(x,φ₁))` over interior nodes (`-∞` if not admissible somewhere).
    pub lower_slack: f64,
    /// `max (H₂[φ₂] - H(x,φ₂))` over interior nodes where `φ₂` is admissible.
    pub upper_excess: f64,
    /// `min (φ₂ - φ₁)` over all nodes.
    pub order_gap: f64,
    pub tolerance: f64,
    pub violations: Vec<String>,
}

impl BarrierCheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct Scan {
    max_slope: f64,
    slope_idx: usize,
    min_margin: f64,
    margin_idx: usize,
}

/// A discretized problem: grid, barriers sampled on it and interior numbering.
pub struct DirichletProblem<'a> {
    curvature: &'a dyn Curvature,
    spec: GridSpec,
    phi1: GridFunction,
    phi2: GridFunction,
    interior: Vec<usize>,
    unknown: Vec<usize>,
}

impl<'a> DirichletProblem<'a> {
    pub fn new(curvature: &'a dyn Curvature, barriers: &BarrierPair, radius: f64, spacing: f64) -> Result<Self> {
        let dim = barriers.dim();
        if dim > MAX_DIM {
            return Err(Error::Domain(format!("dimension {dim} above supported maximum {MAX_DIM}")));
        }
        let spec = GridSpec::centered_box(dim, radius, spacing)?;
        Self::on_grid(curvature, barriers, spec)
    }

    pub fn on_grid(curvature: &'a dyn Curvature, barriers: &BarrierPair, spec: GridSpec) -> Result<Self> {
        if spec.dim() != barriers.dim() {
            return Err(Error::Domain("grid and barrier dimensions differ".into()));
        }
        let phi1 = barriers.lower.sample(&spec);
        let phi2 = barriers.upper.sample(&spec);
        if let Some(i) = phi1.values().iter().chain(phi2.values()).position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "barrier not finite at node {} of the grid",
                i % spec.len()
            )));
        }
        let mut unknown = vec![usize::MAX; spec.len()];
        let mut interior = Vec::new();
        for (i, slot) in unknown.iter_mut().enumerate() {
            if !spec.is_boundary(i) {
                *slot = interior.len();
                interior.push(i);
            }
        }
        Ok(Self {
            curvature,
            spec,
            phi1,
            phi2,
            interior,
            unknown,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn lower(&self) -> &GridFunction {
        &self.phi1
    }

    pub fn upper(&self) -> &GridFunction {
        &self.phi2
    }

    pub fn curvature(&self) -> &dyn Curvature {
        self.curvature
    }

    fn location(&self, idx: usize) -> String {
        let x = self.spec.point(idx);
        format!(
            "x = ({})",
            x.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
        )
    }

    fn tolerance(&self) -> f64 {
        BARRIER_TOL_FACTOR * self.spec.spacing() * self.spec.spacing()
    }

    /// Discrete `H₂` of a barrier at an interior node, `None` if not admissible.
    fn discrete_sigma2(&self, values: &[f64], idx: usize) -> Option<f64> {
        let n = self.spec.dim();
        let mut g = [0.0; MAX_DIM];
        let mut h = [0.0; MAX_DIM * MAX_DIM];
        centered_jet(values, &self.spec, idx, &mut g[..n], &mut h[..n * n]);
        let (s1, s2) = sigma12_raw(&g[..n], &h[..n * n])?;
        (s1 > 0.0 && s2 > 0.0).then_some(s2)
    }

    /// Checks `H₂[φ₁] ≥ H(·,φ₁)`, `H₂[φ₂] ≤ H(·,φ₂)` (where `φ₂` is admissible)
    /// at interior nodes within `10h²`, and `φ₁ ≤ φ₂` at all nodes.
    pub fn check_barriers(&self) -> BarrierCheckReport {
        let tol = self.tolerance();
        let (p1, p2) = (self.phi1.values(), self.phi2.values());
        let per_node: Vec<(f64, f64)> = self
            .interior
            .par_iter()
            .map(|&i| {
                let x = self.spec.point(i);
                let lower = match self.discrete_sigma2(p1, i) {
                    Some(s2) => s2 - self.curvature.value(&x, p1[i]),
                    None => f64::NEG_INFINITY,
                };
                let upper = match self.discrete_sigma2(p2, i) {
                    Some(s2) => s2 - self.curvature.value(&x, p2[i]),
                    None => f64::NEG_INFINITY,
                };
                (lower, upper)
            })
            .collect();
        let mut violations = Vec::new();
        let mut lower_slack = f64::INFINITY;
        let mut upper_excess = f64::NEG_INFINITY;
        let mut worst_lower = (f64::INFINITY, 0);
        let mut worst_upper = (f64::NEG_INFINITY, 0);
        for (&i, &(lo, up)) in self.interior.iter().zip(&per_node) {
            lower_slack = lower_slack.min(lo);
            upper_excess = upper_excess.max(up);
            if lo < worst_lower.0 {
                worst_lower = (lo, i);
            }
            if up > worst_upper.0 {
                worst_upper = (up, i);
            }
        }
        if lower_slack < -tol {
            let count = per_node.iter().filter(|(lo, _)| *lo < -tol).count();
            violations.push(format!(
                "lower barrier is not a subsolution at {count} nodes; worst H2[phi1] - H = {:.3e} at {}",
                worst_lower.0,
                self.location(worst_lower.1)
            ));
        }
        if upper_excess > tol {
            let count = per_node.iter().filter(|(_, up)| *up > tol).count();
            violations.push(format!(
                "upper barrier is not a supersolution at {count} nodes; worst H2[phi2] - H = {:.3e} at {}",
                worst_upper.0,
                self.location(worst_upper.1)
            ));
        }
        let (mut order_gap, mut order_idx) = (f64::INFINITY, 0);
        for i in 0..p1.len() {
            let d = p2[i] - p1[i];
            if d < order_gap {
                order_gap = d;
                order_idx = i;
            }
        }
        if order_gap < -1e-12 {
            violations.push(format!(
                "barriers out of order: phi2 - phi1 = {order_gap:.3e} at {}",
                self.location(order_idx)
            ));
        }
        BarrierCheckReport {
            lower_slack,
            upper_excess,
            order_gap,
            tolerance: tol,
            violations,
        }
    }

    /// `k = max(sup_K H_z / H, 0)` over the slab `φ₁ ≤ z ≤ φ₂` sampled at every
    /// node with `samples` heights.
    pub fn monotonization_exponent(&self, samples: usize) -> f64 {
        let samples = samples.max(2);
        let (p1, p2) = (self.phi1.values(), self.phi2.values());
        (0..self.spec.len())
            .into_par_iter()
            .map(|i| {
                let x = self.spec.point(i);
                (0..samples)
                    .map(|s| {
                        let z = p1[i] + (p2[i] - p1[i]) * s as f64 / (samples - 1) as f64;
                        self.curvature.dz(&x, z) / self.curvature.value(&x, z)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .reduce(|| 0.0, f64::max)
            .max(0.0)
    }

    pub fn state(&self, t: f64, k: f64, frozen: Option<GridFunction>) -> Result<ContinuationState> {
        ContinuationState::new(t, k, frozen, &self.phi1, self.curvature)
    }

    fn check_grid(&self, u: &GridFunction) -> Result<()> {
        if u.spec() != &self.spec {
            return Err(Error::Domain("grid function lives on a different grid".into()));
        }
        Ok(())
    }

    /// Residual at one interior node, with `(σ₁, σ₂)`. Errors when not spacelike.
    fn node_residual(&self, u: &[f64], idx: usize, state: &ContinuationState) -> Result<(f64, f64, f64)> {
        let n = self.spec.dim();
        let mut g = [0.0; MAX_DIM];
        let mut h = [0.0; MAX_DIM * MAX_DIM];
        centered_jet(u, &self.spec, idx, &mut g[..n], &mut h[..n * n]);
        let (s1, s2) = sigma12_raw(&g[..n], &h[..n * n]).ok_or_else(|| Error::NotSpacelike {
            location: self.location(idx),
            slope: g[..n].iter().map(|v| v * v).sum::<f64>().sqrt(),
        })?;
        let z = u[idx];
        let e = (-state.k * z).exp();
        let rhs = if state.frozen.is_some() {
            state.rhs[idx]
        } else {
            let x = self.spec.point(idx);
            state.rhs[idx] + state.t * self.curvature.value(&x, z) * e
        };
        Ok((s2 * e - rhs, s1, s2))
    }

    /// Pointwise residual of the continuation equation (zero on the boundary).
    pub fn residual(&self, u: &GridFunction, state: &ContinuationState) -> Result<GridFunction> {
        self.check_grid(u)?;
        let vals = self.residual_values(u.values(), state)?;
        let mut out = vec![0.0; self.spec.len()];
        for (&i, r) in self.interior.iter().zip(vals) {
            out[i] = r;
        }
        GridFunction::new(self.spec.clone(), out)
    }

    fn residual_values(&self, u: &[f64], state: &ContinuationState) -> Result<Vec<f64>> {
        let results: Vec<Result<(f64, f64, f64)>> = self
            .interior
            .par_iter()
            .map(|&i| self.node_residual(u, i, state))
            .collect();
        let mut out = Vec::with_capacity(results.len());
        let mut worst: Option<(f64, Error)> = None;
        for r in results {
            match r {
                Ok((v, _, _)) => out.push(v),
                Err(e) => {
                    let slope = match &e {
                        Error::NotSpacelike { slope, .. } => *slope,
                        _ => f64::INFINITY,
                    };
                    if worst.as_ref().map_or(true, |(s, _)| slope > *s) {
                        worst = Some((slope, e));
                    }
                }
            }
        }
        match worst {
            Some((_, e)) => Err(e),
            None => Ok(out),
        }
    }

    /// `sup |H₂[u] - H(x,u)|` over interior nodes.
    pub fn equation_residual(&self, u: &GridFunction) -> Result<f64> {
        self.check_grid(u)?;
        let vals: Vec<Result<f64>> = self
            .interior
            .par_iter()
            .map(|&i| {
                let n = self.spec.dim();
                let mut g = [0.0; MAX_DIM];
                let mut h = [0.0; MAX_DIM * MAX_DIM];
                centered_jet(u.values(), &self.spec, i, &mut g[..n], &mut h[..n * n]);
                let (_, s2) = sigma12_raw(&g[..n], &h[..n * n]).ok_or_else(|| Error::NotSpacelike {
                    location: self.location(i),
                    slope: g[..n].iter().map(|v| v * v).sum::<f64>().sqrt(),
                })?;
                let x = self.spec.point(i);
                Ok((s2 - self.curvature.value(&x, u.values()[i])).abs())
            })
            .collect();
        let mut sup = 0.0f64;
        for v in vals {
            sup = sup.max(v?);
        }
        Ok(sup)
    }

    fn scan(&self, u: &[f64]) -> Scan {
        let n = self.spec.dim();
        self.interior
            .par_iter()
            .map(|&i| {
                let mut g = [0.0; MAX_DIM];
                let mut h = [0.0; MAX_DIM * MAX_DIM];
                centered_jet(u, &self.spec, i, &mut g[..n], &mut h[..n * n]);
                let slope = g[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                let margin = match sigma12_raw(&g[..n], &h[..n * n]) {
                    Some((s1, s2)) => admissibility_margin(s1, s2),
                    None => f64::NEG_INFINITY,
                };
                Scan {
                    max_slope: slope,
                    slope_idx: i,
                    min_margin: margin,
                    margin_idx: i,
                }
            })
            .reduce(
                || Scan {
                    max_slope: f64::NEG_INFINITY,
                    slope_idx: usize::MAX,
                    min_margin: f64::INFINITY,
                    margin_idx: usize::MAX,
                },
                |a, b| {
                    // Ties resolved by node index so the reduction is order independent.
                    let (max_slope, slope_idx) = if b.max_slope > a.max_slope
                        || (b.max_slope == a.max_slope && b.slope_idx < a.slope_idx)
                    {
                        (b.max_slope, b.slope_idx)
                    } else {
                        (a.max_slope, a.slope_idx)
                    };
                    let (min_margin, margin_idx) = if b.min_margin < a.min_margin
                        || (b.min_margin == a.min_margin && b.margin_idx < a.margin_idx)
                    {
                        (b.min_margin, b.margin_idx)
                    } else {
                        (a.min_margin, a.margin_idx)
                    };
                    Scan {
                        max_slope,
                        slope_idx,
                        min_margin,
                        margin_idx,
                    }
                },
            )
    }

    /// Errors unless `u` is spacelike and admissible (margin above `margin`) at
    /// every interior node.
    pub fn check_iterate(&self, u: &GridFunction, margin: f64) -> Result<(f64, f64)> {
        self.check_grid(u)?;
        let s = self.scan(u.values());
        if s.max_slope >= 1.0 {
            return Err(Error::NotSpacelike {
                location: self.location(s.slope_idx),
                slope: s.max_slope,
            });
        }
        if !(s.min_margin > margin) {
            let n = self.spec.dim();
            let mut g = vec![0.0; n];
            let mut h = vec![0.0; n * n];
            centered_jet(u.values(), &self.spec, s.margin_idx, &mut g, &mut h);
            let (s1, s2) = sigma12_raw(&g, &h).unwrap_or((f64::NAN, f64::NAN));
            return Err(Error::Ellipticity {
                location: self.location(s.margin_idx),
                sigma1: s1,
                sigma2: s2,
            });
        }
        Ok((s.max_slope, s.min_margin))
    }

    /// Assembles the Newton system: residual and Jacobian triplets over unknowns.
    fn assemble(&self, u: &[f64], state: &ContinuationState) -> Result<(Vec<f64>, Vec<(usize, usize, f64)>, f64)> {
        let n = self.spec.dim();
        let h = self.spec.spacing();
        let strides = self.spec.strides();
        let rows: Vec<Result<(f64, Vec<(usize, f64)>, f64)>> = self
            .interior
            .par_iter()
            .map(|&i| {
                let mut g = [0.0; MAX_DIM];
                let mut hs = [0.0; MAX_DIM * MAX_DIM];
                let mut c = [0.0; MAX_DIM * MAX_DIM];
                let mut b = [0.0; MAX_DIM];
                centered_jet(u, &self.spec, i, &mut g[..n], &mut hs[..n * n]);
                let (_, s2) = linearize_raw(&g[..n], &hs[..n * n], &mut c[..n * n], &mut b[..n]).map_err(|e| {
                    match e {
                        Error::NotSpacelike { slope, .. } => Error::NotSpacelike {
                            location: self.location(i),
                            slope,
                        },
                        Error::Ellipticity { sigma1, sigma2, .. } => Error::Ellipticity {
                            location: self.location(i),
                            sigma1,
                            sigma2,
                        },
                        other => other,
                    }
                })?;
                let z = u[i];
                let e = (-state.k * z).exp();
                let (res, zeroth) = if state.frozen.is_some() {
                    (s2 * e - state.rhs[i], -state.k * s2 * e)
                } else {
                    let x = self.spec.point(i);
                    let hv = self.curvature.value(&x, z);
                    let hz = self.curvature.dz(&x, z);
                    let rhs = state.rhs[i] + hv * e;
                    // d/du [(σ₂ - H(x,u)) e^{-ku}] beyond the stencil part.
                    (s2 * e - rhs, e * (-hz - state.k * (s2 - hv)))
                };
                let mut entries: Vec<(usize, f64)> = Vec::with_capacity(1 + 2 * n + 2 * n * (n - 1));
                let mut diag = zeroth;
                let inv_h2 = 1.0 / (h * h);
                let inv_2h = 0.5 / h;
                let inv_4h2 = 0.25 * inv_h2;
                let push = |node: usize, v: f64, entries: &mut Vec<(usize, f64)>| {
                    let col = self.unknown[node];
                    if col != usize::MAX {
                        entries.push((col, v));
                    }
                };
                for a in 0..n {
                    let caa = c[a * n + a] * e;
                    diag -= 2.0 * caa * inv_h2;
                    push(i + strides[a], caa * inv_h2 + b[a] * e * inv_2h, &mut entries);
                    push(i - strides[a], caa * inv_h2 - b[a] * e * inv_2h, &mut entries);
                    for bb in 0..a {
                        let w = 2.0 * c[a * n + bb] * e * inv_4h2;
                        push(i + strides[a] + strides[bb], w, &mut entries);
                        push(i - strides[a] - strides[bb], w, &mut entries);
                        push(i + strides[a] - strides[bb], -w, &mut entries);
                        push(i - strides[a] + strides[bb], -w, &mut entries);
                    }
                }
                entries.push((self.unknown[i], diag));
                Ok((res, entries, zeroth))
            })
            .collect();
        let mut residual = Vec::with_capacity(rows.len());
        let mut triplets = Vec::with_capacity(rows.len() * (1 + 2 * n * n));
        let mut max_zeroth = f64::NEG_INFINITY;
        for (row, r) in rows.into_iter().enumerate() {
            let (res, entries, zeroth) = r?;
            residual.push(res);
            max_zeroth = max_zeroth.max(zeroth);
            triplets.extend(entries.into_iter().map(|(col, v)| (row, col, v)));
        }
        Ok((residual, triplets, max_zeroth))
    }

    /// One damped Newton step with backtracking. A trial point is accepted when
    /// it is spacelike, admissible with margin above `opts.margin`, and its sup
    /// residual is below the current one (or already below `opts.tol`).
    pub fn newton_step(
        &self,
        u: &GridFunction,
        state: &ContinuationState,
        damping: f64,
        opts: &SolverOptions,
    ) -> Result<(GridFunction, StepReport)> {
        self.check_grid(u)?;
        self.check_iterate(u, opts.margin)?;
        let (res, triplets, max_zeroth) = self.assemble(u.values(), state)?;
        let r0 = sup_norm(&res);
        let neg: Vec<f64> = res.iter().map(|v| -v).collect();
        let delta = linsolve::solve(self.interior.len(), &triplets, &neg)?;
        let update_sup = sup_norm(&delta);
        let mut step = damping.clamp(0.0, 1.0);
        let mut halvings = 0;
        let mut trial = u.values().to_vec();
        while step >= opts.min_step {
            for (&i, d) in self.interior.iter().zip(&delta) {
                trial[i] = u.values()[i] + step * d;
            }
            let s = self.scan(&trial);
            if s.max_slope < 1.0 && s.min_margin > opts.margin {
                if let Ok(r) = self.residual_values(&trial, state) {
                    let r1 = sup_norm(&r);
                    if r1 < r0 || r1 <= opts.tol {
                        let next = GridFunction::new(self.spec.clone(), trial)?;
                        return Ok((
                            next,
                            StepReport {
                                residual_before: r0,
                                residual_after: r1,
                                step_length: step,
                                halvings,
                                update_sup,
                                max_zeroth_order: max_zeroth,
                            },
                        ));
                    }
                }
            }
            step *= opts.shrink;
            halvings += 1;
        }
        Err(Error::Stall {
            iterations: 0,
            t: state.t,
            residual: r0,
            reason: format!("line search exhausted after {halvings} reductions (|du| = {update_sup:.3e})"),
        })
    }

    /// Newton iterations on one continuation step.
    fn converge(
        &self,
        mut u: GridFunction,
        state: &ContinuationState,
        tol: f64,
        opts: &SolverOptions,
        report: &mut SolverReport,
    ) -> Result<GridFunction> {
        let floor = tol.max(0.1 * self.spec.spacing().powi(2));
        for it in 0..=opts.max_newton {
            let r = sup_norm(&self.residual_values(u.values(), state)?);
            report.residual_history.push((state.t, r));
            if r <= tol {
                return Ok(u);
            }
            if it == opts.max_newton {
                break;
            }
            let damping = opts.damping_at(report.iterations);
            match self.newton_step(&u, state, damping, opts) {
                Ok((next, step)) => {
                    debug!(
                        "t = {:.3} it {it}: residual {:.3e} -> {:.3e} (step {}, |du| {:.3e})",
                        state.t, step.residual_before, step.residual_after, step.step_length, step.update_sup
                    );
                    u = next;
                    report.iterations += 1;
                    let s = self.scan(u.values());
                    report.min_margin = report.min_margin.min(s.min_margin);
                    report.max_iterate_slope = report.max_iterate_slope.max(s.max_slope);
                }
                Err(Error::Stall { reason, .. }) if r <= floor => {
                    warn!("stalled at residual {r:.3e} <= {floor:.3e}, accepting: {reason}");
                    report.floor_stop = true;
                    return Ok(u);
                }
                Err(Error::Stall { residual, reason, .. }) => {
                    return Err(Error::Stall {
                        iterations: report.iterations,
                        t: state.t,
                        residual,
                        reason: format!("{reason}; last good t = {}", report.t_reached),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        let r = report.residual_history.last().map_or(f64::NAN, |p| p.1);
        Err(Error::Stall {
            iterations: report.iterations,
            t: state.t,
            residual: r,
            reason: format!(
                "no convergence in {} Newton iterations; last good t = {}",
                opts.max_newton, report.t_reached
            ),
        })
    }

    /// Full continuation from `φ₁`.
    pub fn solve(&self, opts: &SolverOptions) -> Result<(GridFunction, SolverReport)> {
        self.solve_from(self.phi1.clone(), opts)
    }

    /// Full continuation from a given initial iterate (boundary values are reset to `φ₁`).
    pub fn solve_from(&self, initial: GridFunction, opts: &SolverOptions) -> Result<(GridFunction, SolverReport)> {
        let start = Instant::now();
        opts.validate()?;
        self.check_grid(&initial)?;
        if opts.check_barriers {
            let check = self.check_barriers();
            if !check.passed() {
                return Err(Error::BarrierCheck(check.violations.join("; ")));
            }
        }
        let k_min = self.monotonization_exponent(opts.k_samples);
        let k = match opts.k_override {
            Some(k) if k + 1e-12 < k_min => {
                return Err(Error::Domain(format!(
                    "monotonization exponent {k} below its lower bound {k_min}"
                )))
            }
            Some(k) => k,
            None => k_min,
        };
        let mut u = initial;
        for i in 0..self.spec.len() {
            if self.spec.is_boundary(i) {
                u.values_mut()[i] = self.phi1.values()[i];
            }
        }
        let (slope, margin) = self.check_iterate(&u, opts.margin).map_err(|e| {
            Error::Precondition(format!("initial iterate is not admissible: {e}"))
        })?;
        let convex = self.strictly_convex(&u);
        if !convex {
            info!("initial iterate is admissible but not strictly convex at every node");
        }
        let mut report = SolverReport {
            k,
            min_margin: margin,
            max_iterate_slope: slope,
            initial_strictly_convex: convex,
            ..Default::default()
        };
        for &t in &opts.schedule {
            let (state, tol) = if t < 1.0 {
                (self.state(t, k, Some(u.clone()))?, opts.intermediate_tol.max(opts.tol))
            } else {
                (self.state(1.0, k, None)?, opts.tol)
            };
            u = self.converge(u, &state, tol, opts, &mut report)?;
            report.t_reached = t;
        }
        report.final_residual = self.equation_residual(&u)?;
        let (slope, _) = u.max_interior_slope();
        report.nu_max = tilt_factor(&[slope]).unwrap_or(f64::INFINITY);
        let (violations, c) = self.sandwich(&u);
        report.sandwich_violations = violations;
        report.sandwich_constant = c;
        report.wall_time = start.elapsed().as_secs_f64();
        info!(
            "dirichlet solve: {} iterations, residual {:.3e}, nu_max {:.4}, {:.2}s",
            report.iterations, report.final_residual, report.nu_max, report.wall_time
        );
        Ok((u, report))
    }

    fn strictly_convex(&self, u: &GridFunction) -> bool {
        let n = self.spec.dim();
        self.interior.par_iter().all(|&i| {
            let mut g = vec![0.0; n];
            let mut h = vec![0.0; n * n];
            centered_jet(u.values(), &self.spec, i, &mut g, &mut h);
            nalgebra::DMatrix::from_row_slice(n, n, &h)
                .symmetric_eigenvalues()
                .iter()
                .all(|&l| l > 0.0)
        })
    }

    /// `(count of nodes outside [φ₁ - 10h², φ₂ + 10h²], max violation / h²)`.
    pub fn sandwich(&self, u: &GridFunction) -> (usize, f64) {
        let h2 = self.spec.spacing().powi(2);
        let tol = BARRIER_TOL_FACTOR * h2;
        let mut count = 0;
        let mut worst = 0.0f64;
        for ((&v, &lo), &hi) in u.values().iter().zip(self.phi1.values()).zip(self.phi2.values()) {
            let excess = (lo - v).max(v - hi).max(0.0);
            worst = worst.max(excess);
            if excess > tol {
                count += 1;
            }
        }
        (count, worst / h2)
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Solves on `[-radius, radius]ⁿ` with spacing `spacing` and boundary data `φ₁`.
pub fn solve_dirichlet(
    curvature: &dyn Curvature,
    barriers: &BarrierPair,
    radius: f64,
    spacing: f64,
    opts: &SolverOptions,
) -> Result<(GridFunction, SolverReport)> {
    DirichletProblem::new(curvature, barriers, radius, spacing)?.solve(opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::{hyperboloid_for_pinching, Barrier, BarrierPair};
    use crate::curvature::Builtin;
    use std::sync::Arc;

    fn unit_pair() -> BarrierPair {
        BarrierPair::hyperboloids(1.0, 1.0, 2).unwrap()
    }

    #[test]
    fn hyperboloid_residual_is_truncation_sized() {
        let h = Builtin::Constant { h: 1.0 };
        let pair = unit_pair();
        let p = DirichletProblem::new(&h, &pair, 2.0, 1.0 / 16.0).unwrap();
        let u = p.lower().clone();
        let state = p.state(1.0, 0.0, Some(u.clone())).unwrap();
        let r = p.residual(&u, &state).unwrap();
        let sup = sup_norm(r.values());
        assert!(sup > 0.0 && sup < 0.5 / 256.0 * 10.0, "sup residual {sup}");
    }

    #[test]
    fn residual_at_t0_ignores_frozen_iterate() {
        let h = Builtin::TanhHeight {
            base: 1.0,
            amp: 0.1,
            center: 1.0,
        };
        let pair = BarrierPair::hyperboloids(1.2, 0.8, 2).unwrap();
        let p = DirichletProblem::new(&h, &pair, 1.0, 0.125).unwrap();
        let u = p.lower().clone();
        let v1 = p.upper().clone();
        let mut v2 = p.lower().clone();
        v2.values_mut().iter_mut().for_each(|x| *x += 3.0);
        let k = p.monotonization_exponent(9);
        let a = p.residual(&u, &p.state(0.0, k, Some(v1)).unwrap()).unwrap();
        let b = p.residual(&u, &p.state(0.0, k, Some(v2)).unwrap()).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn non_admissible_start_is_rejected() {
        let h = Builtin::Constant { h: 1.0 };
        let pair = unit_pair();
        let p = DirichletProblem::new(&h, &pair, 1.0, 0.125).unwrap();
        // Saddle: u = 0.2(x² - y²) has σ₂ < 0.
        let saddle = GridFunction::from_fn(p.spec().clone(), |x| 0.2 * (x[0] * x[0] - x[1] * x[1]));
        let state = p.state(1.0, 0.0, None).unwrap();
        assert!(matches!(
            p.newton_step(&saddle, &state, 1.0, &SolverOptions::default()),
            Err(Error::Ellipticity { .. })
        ));
        assert!(matches!(
            p.solve_from(saddle, &SolverOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn newton_reaches_tolerance_from_subsolution() {
        let h = Builtin::Constant { h: 1.0 };
        let pair = BarrierPair::hyperboloids(1.2, 1.0, 2).unwrap();
        let p = DirichletProblem::new(&h, &pair, 3.0, 1.0 / 16.0).unwrap();
        let (u, rep) = p.solve(&SolverOptions::default()).unwrap();
        assert!(rep.final_residual <= 1e-9, "{rep:?}");
        assert!(rep.min_margin > 0.0 && rep.max_iterate_slope < 1.0);
        assert!(rep.iterations <= 40);
        for w in rep.residual_history.windows(2) {
            if w[0].0 == w[1].0 {
                assert!(w[1].1 <= w[0].1);
            }
        }
        // Boundary data untouched.
        for i in 0..u.len() {
            if p.spec().is_boundary(i) {
                assert_eq!(u.values()[i], p.lower().values()[i]);
            }
        }
        // A step from the converged solution barely moves it.
        let state = p.state(1.0, 0.0, None).unwrap();
        let opts = SolverOptions::default();
        let (_, step) = p.newton_step(&u, &state, 1.0, &opts).unwrap();
        assert!(step.update_sup < 1e-8, "{step:?}");
    }

    #[test]
    fn zeroth_order_coefficient_is_nonpositive() {
        let h = Builtin::TanhHeight {
            base: 1.0,
            amp: 0.1,
            center: 1.5,
        };
        let pair = BarrierPair::hyperboloids(1.2, 0.8, 2).unwrap();
        let p = DirichletProblem::new(&h, &pair, 2.0, 0.125).unwrap();
        let k = p.monotonization_exponent(9);
        assert!(k > 0.0);
        let state = p.state(0.5, k, Some(p.lower().clone())).unwrap();
        let (_, step) = p.newton_step(p.lower(), &state, 1.0, &SolverOptions::default()).unwrap();
        assert!(step.max_zeroth_order <= 0.0);
    }

    #[test]
    fn barrier_check_flags_swapped_pinching() {
        let h = Builtin::Constant { h: 1.0 };
        let lower = Arc::new(hyperboloid_for_pinching(0.8, 2).unwrap());
        let upper = Arc::new(hyperboloid_for_pinching(1.2, 2).unwrap());
        let pair = BarrierPair::new(lower.clone(), upper.clone()).unwrap();
        let p = DirichletProblem::new(&h, &pair, 1.0, 0.125).unwrap();
        let rep = p.check_barriers();
        assert!(!rep.passed());
        assert_eq!(rep.violations.len(), 3, "{:?}", rep.violations);
        assert!(lower.value(&[0.0, 0.0]) > upper.value(&[0.0, 0.0]));
        assert!(matches!(
            p.solve(&SolverOptions::default()),
            Err(Error::BarrierCheck(_))
        ));
    }
}
