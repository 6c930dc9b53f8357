//! Radially symmetric solutions by shooting on `u(0)`.
//!
//! For `u = u(r)` the principal curvatures are
//! `λ_r = u''/w³` (once) and `λ_a = u'/(r w)` (`n - 1` times), `w = √(1 - u'²)`, so
//! `σ₂ = (n-1) λ_r λ_a + C(n-1, 2) λ_a²` and the equation `σ₂ = H` becomes
//! `u'' = w³ (H - C(n-1,2) λ_a²) / ((n-1) λ_a)`. On the axis `λ_r = λ_a` and
//! `u''(0) = √(2H / (n(n-1)))`.

use crate::barriers::Barrier;
use crate::curvature::Curvature;
use crate::error::{Error, Result};

/// Integration step relative to `R`.
pub const RELATIVE_STEP: f64 = 1e-4;
/// Required sup residual of the radial equation along a profile.
pub const PROFILE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct RadialProfile {
    dim: usize,
    r: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    lambda_radial: Vec<f64>,
    lambda_angular: Vec<f64>,
    residual: f64,
}

impl RadialProfile {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        *self.r.last().unwrap()
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn du(&self) -> &[f64] {
        &self.du
    }

    pub fn lambda_radial(&self) -> &[f64] {
        &self.lambda_radial
    }

    pub fn lambda_angular(&self) -> &[f64] {
        &self.lambda_angular
    }

    /// `sup |σ₂(λ) - H|` along the profile, with `λ_r` from differences of `u'`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `σ₂` from the radial and angular curvatures.
    pub fn sigma2_at(&self, i: usize) -> f64 {
        radial_sigma2(self.dim, self.lambda_radial[i], self.lambda_angular[i])
    }

    /// Cubic Hermite interpolation of `u` at radius `s ∈ [0, R]`.
    pub fn eval(&self, s: f64) -> Option<f64> {
        let big_r = self.radius();
        if !(s >= 0.0 && s <= big_r * (1.0 + 1e-12)) {
            return None;
        }
        let m = self.r.len() - 1;
        let dr = big_r / m as f64;
        let k = ((s / dr).floor() as usize).min(m - 1);
        let t = (s - self.r[k]) / dr;
        let (t2, t3) = (t * t, t * t * t);
        Some(
            (2.0 * t3 - 3.0 * t2 + 1.0) * self.u[k]
                + (t3 - 2.0 * t2 + t) * dr * self.du[k]
                + (-2.0 * t3 + 3.0 * t2) * self.u[k + 1]
                + (t3 - t2) * dr * self.du[k + 1],
        )
    }

    fn eval_du(&self, s: f64) -> Option<f64> {
        let big_r = self.radius();
        if !(s >= 0.0 && s <= big_r * (1.0 + 1e-12)) {
            return None;
        }
        let m = self.r.len() - 1;
        let dr = big_r / m as f64;
        let k = ((s / dr).floor() as usize).min(m - 1);
        let t = (s - self.r[k]) / dr;
        Some((1.0 - t) * self.du[k] + t * self.du[k + 1])
    }
}

impl Barrier for RadialProfile {
    fn dim(&self) -> usize {
        self.dim
    }

    /// `NaN` beyond the profile radius.
    fn value(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.eval(r).unwrap_or(f64::NAN)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return vec![0.0; x.len()];
        }
        let d = self.eval_du(r).unwrap_or(f64::NAN);
        x.iter().map(|v| d * v / r).collect()
    }

    fn describe(&self) -> String {
        format!(
            "radial-profile(n={}, R={}, u(0)={}, nodes={})",
            self.dim,
            self.radius(),
            self.u[0],
            self.r.len()
        )
    }
}

pub fn radial_sigma2(dim: usize, lambda_r: f64, lambda_a: f64) -> f64 {
    let m = (dim - 1) as f64;
    m * lambda_r * lambda_a + 0.5 * m * (m - 1.0) * lambda_a * lambda_a
}

struct Rhs<'a> {
    dim: usize,
    curvature: &'a dyn Curvature,
}

impl Rhs<'_> {
    fn h(&self, r: f64, u: f64) -> f64 {
        let mut x = vec![0.0; self.dim];
        x[0] = r;
        self.curvature.value(&x, u)
    }

    /// `u''` at `(r, u, u')`; `None` once the profile stops being spacelike or admissible.
    fn accel(&self, r: f64, u: f64, p: f64) -> Option<f64> {
        let n = self.dim as f64;
        let h = self.h(r, u);
        if !(h > 0.0) {
            return None;
        }
        if r == 0.0 {
            return Some((2.0 * h / (n * (n - 1.0))).sqrt());
        }
        if !(p.abs() < 1.0) {
            return None;
        }
        let w = (1.0 - p * p).sqrt();
        let la = p / (r * w);
        if !(la > 0.0) {
            return None;
        }
        let c2 = 0.5 * (n - 1.0) * (n - 2.0);
        Some(w * w * w * (h - c2 * la * la) / ((n - 1.0) * la))
    }
}

struct Trajectory {
    u: Vec<f64>,
    du: Vec<f64>,
}

/// Sub-steps on the first interval, where `λ_a = u'/(r w)` is singular. Interval
/// `k` uses `AXIS_SUBSTEPS / (k+1)²` (at least one) since the local error near
/// the axis scales like `(dr/r)⁴`.
const AXIS_SUBSTEPS: usize = 256;

fn rk4_step(rhs: &Rhs, r: f64, y: f64, p: f64, dr: f64) -> Option<(f64, f64)> {
    let a1 = rhs.accel(r, y, p)?;
    let (y2, p2) = (y + 0.5 * dr * p, p + 0.5 * dr * a1);
    let a2 = rhs.accel(r + 0.5 * dr, y2, p2)?;
    let (y3, p3) = (y + 0.5 * dr * p2, p + 0.5 * dr * a2);
    let a3 = rhs.accel(r + 0.5 * dr, y3, p3)?;
    let (y4, p4) = (y + dr * p3, p + dr * a3);
    let a4 = rhs.accel(r + dr, y4, p4)?;
    let y = y + dr / 6.0 * (p + 2.0 * p2 + 2.0 * p3 + p4);
    let p = p + dr / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    (p.abs() < 1.0).then_some((y, p))
}

/// Classical RK4 on `steps` equal intervals from `r = 0`.
fn integrate(rhs: &Rhs, u0: f64, big_r: f64, steps: usize) -> Option<Trajectory> {
    let dr = big_r / steps as f64;
    let mut u = Vec::with_capacity(steps + 1);
    let mut du = Vec::with_capacity(steps + 1);
    let (mut y, mut p) = (u0, 0.0);
    u.push(y);
    du.push(p);
    for k in 0..steps {
        let subs = (AXIS_SUBSTEPS / ((k + 1) * (k + 1))).max(1);
        let sub = dr / subs as f64;
        for j in 0..subs {
            (y, p) = rk4_step(rhs, k as f64 * dr + j as f64 * sub, y, p, sub)?;
        }
        u.push(y);
        du.push(p);
    }
    Some(Trajectory { u, du })
}

/// Solves `σ₂ = H(r, u)`, `u'(0) = 0`, `u(R) = boundary` by bisection on `u(0)`.
/// `H` is evaluated at `x = r e₁` and must be radial.
pub fn radial_shoot(curvature: &dyn Curvature, dim: usize, radius: f64, boundary: f64) -> Result<RadialProfile> {
    if dim < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {dim}")));
    }
    if !(radius > 0.0 && radius.is_finite() && boundary.is_finite()) {
        return Err(Error::Domain(format!("need R > 0 and finite boundary value (R = {radius})")));
    }
    let rhs = Rhs { dim, curvature };
    let steps = (1.0 / RELATIVE_STEP).ceil() as usize;
    let miss = |a: f64| integrate(&rhs, a, radius, steps).map(|t| *t.u.last().unwrap() - boundary);

    // |u'| < 1 gives u(R) - u(0) ∈ (0, R), so the root lies in (boundary - R, boundary).
    let mut lo = boundary - radius - 1.0;
    let mut hi = boundary + 1.0;
    let (flo, fhi) = (miss(lo), miss(hi));
    match (flo, fhi) {
        (Some(a), Some(b)) if a < 0.0 && b > 0.0 => {}
        _ => {
            let scan: Vec<String> = (0..=8)
                .map(|j| {
                    let a = lo + (hi - lo) * j as f64 / 8.0;
                    format!("u0={a:.4}: {:?}", miss(a))
                })
                .collect();
            return Err(Error::SearchFailure(format!(
                "shooting bracket not found: {}",
                scan.join(", ")
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
        match miss(mid) {
            Some(v) if v > 0.0 => hi = mid,
            Some(_) => lo = mid,
            // A blown-up trajectory only happens for extreme heights; shrink from above.
            None => hi = mid,
        }
    }
    let a = 0.5 * (lo + hi);
    let traj = integrate(&rhs, a, radius, steps)
        .ok_or_else(|| Error::Numeric("shooting trajectory lost spacelikeness".into()))?;
    build_profile(&rhs, radius, traj)
}

fn build_profile(rhs: &Rhs, radius: f64, traj: Trajectory) -> Result<RadialProfile> {
    let m = traj.u.len() - 1;
    let dr = radius / m as f64;
    let r: Vec<f64> = (0..=m).map(|k| k as f64 * dr).collect();
    let p = &traj.du;
    // u'' by fourth-order differences of u' (one-sided near the ends).
    let upp: Vec<f64> = (0..=m)
        .map(|k| {
            if k >= 2 && k + 2 <= m {
                (-p[k + 2] + 8.0 * p[k + 1] - 8.0 * p[k - 1] + p[k - 2]) / (12.0 * dr)
            } else if k < 2 {
                (-25.0 * p[k] + 48.0 * p[k + 1] - 36.0 * p[k + 2] + 16.0 * p[k + 3] - 3.0 * p[k + 4])
                    / (12.0 * dr)
            } else {
                (25.0 * p[k] - 48.0 * p[k - 1] + 36.0 * p[k - 2] - 16.0 * p[k - 3] + 3.0 * p[k - 4])
                    / (12.0 * dr)
            }
        })
        .collect();
    let mut lambda_radial = Vec::with_capacity(m + 1);
    let mut lambda_angular = Vec::with_capacity(m + 1);
    let mut residual = 0.0f64;
    for k in 0..=m {
        let w = (1.0 - p[k] * p[k]).sqrt();
        let lr = upp[k] / (w * w * w);
        let la = if k == 0 { lr } else { p[k] / (r[k] * w) };
        lambda_radial.push(lr);
        lambda_angular.push(la);
        let s2 = radial_sigma2(rhs.dim, lr, la);
        residual = residual.max((s2 - rhs.h(r[k], traj.u[k])).abs());
    }
    if !(residual < PROFILE_RESIDUAL_TOL) {
        return Err(Error::Numeric(format!(
            "radial profile residual {residual:.3e} above {PROFILE_RESIDUAL_TOL:e}"
        )));
    }
    Ok(RadialProfile {
        dim: rhs.dim,
        r,
        u: traj.u,
        du: traj.du,
        lambda_radial,
        lambda_angular,
        residual,
    })
}
