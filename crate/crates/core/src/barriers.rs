//! Sub- and supersolutions for the prescribed `σ₂` equation.
//!
//! * [`Hyperboloid`]: `lift + √(α² + |x - shift|²)`, whose graph has constant
//!   `σ₂ = n(n-1)/(2α²)`.
//! * [`TreibergsEnvelope`]: supremum (lower barrier) or infimum (upper barrier)
//!   over sphere directions `y` of the shifted hyperboloids
//!   `z(x,y) = f(y) + offset - p(y)·y + √(α² + |x + p(y)|²)`, with
//!   `p(y) = Df(y) ± 2M y`. These encode asymptotic data `u - |x| → f(x/|x|)`.
//! * [`Mollified`]: convolution with the bump `(1 - |x/β|²)⁴`, evaluated by
//!   tensor-grid quadrature, and [`mollify`] for functions already sampled on a grid.
//! * [`epsilon_shifted_envelopes`]: the auxiliary functions used by the gradient
//!   and `C²` estimates for general data at infinity.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};

/// Safety factor applied to the sampled curvature modulus `M`.
pub const MODULUS_SAFETY: f64 = 1.25;

/// Default number of sphere samples for `n = 2`.
pub const DEFAULT_CIRCLE_SAMPLES: usize = 720;

/// Default number of sphere samples for `n = 3`.
pub const DEFAULT_SPHERE_SAMPLES: usize = 2000;

/// Anything that can serve as a barrier: a spacelike function on `ℝⁿ`.
pub trait Barrier: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Gradient; central differences unless overridden.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let step = 1e-6;
        let mut y = x.to_vec();
        (0..x.len())
            .map(|i| {
                y[i] = x[i] + step;
                let p = self.value(&y);
                y[i] = x[i] - step;
                let m = self.value(&y);
                y[i] = x[i];
                (p - m) / (2.0 * step)
            })
            .collect()
    }

    /// `σ₂` of the graph when it is known in closed form.
    fn exact_sigma2(&self) -> Option<f64> {
        None
    }

    fn describe(&self) -> String;

    /// Samples the barrier on every node of `spec`.
    fn sample(&self, spec: &GridSpec) -> GridFunction {
        let values: Vec<f64> = (0..spec.len())
            .into_par_iter()
            .map(|i| self.value(&spec.point(i)))
            .collect();
        GridFunction::new(spec.clone(), values).expect("length matches spec")
    }
}

/// `α = √(n(n-1)/(2h))`, the semi-axis of the hyperboloid with `σ₂ = h`.
pub fn alpha_for_pinching(h: f64, dim: usize) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("curvature level must be positive, got {h}")));
    }
    if dim < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {dim}")));
    }
    let n = dim as f64;
    Ok((n * (n - 1.0) / (2.0 * h)).sqrt())
}

/// Upward hyperboloid `lift + √(α² + |x - shift|²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperboloid {
    pub alpha: f64,
    pub shift: Vec<f64>,
    pub lift: f64,
}

impl Hyperboloid {
    pub fn new(alpha: f64, shift: Vec<f64>, lift: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("hyperboloid semi-axis must be positive, got {alpha}")));
        }
        if shift.len() < 2 {
            return Err(Error::Domain("hyperboloid dimension must be >= 2".into()));
        }
        Ok(Self { alpha, shift, lift })
    }

    pub fn centered(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(alpha, vec![0.0; dim], 0.0)
    }

    /// Exact `σ₂` of the graph, `n(n-1)/(2α²)`.
    pub fn sigma2(&self) -> f64 {
        let n = self.shift.len() as f64;
        n * (n - 1.0) / (2.0 * self.alpha * self.alpha)
    }

    /// Closed-form row-major Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let d: Vec<f64> = x.iter().zip(&self.shift).map(|(a, s)| a - s).collect();
        let s = (self.alpha * self.alpha + d.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                h[i * n + j] = id / s - d[i] * d[j] / (s * s * s);
            }
        }
        h
    }
}

impl Barrier for Hyperboloid {
    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.shift).map(|(a, s)| (a - s) * (a - s)).sum();
        self.lift + (self.alpha * self.alpha + r2).sqrt()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = x.iter().zip(&self.shift).map(|(a, s)| a - s).collect();
        let s = (self.alpha * self.alpha + d.iter().map(|v| v * v).sum::<f64>()).sqrt();
        d.into_iter().map(|v| v / s).collect()
    }

    fn exact_sigma2(&self) -> Option<f64> {
        Some(self.sigma2())
    }

    fn describe(&self) -> String {
        format!(
            "hyperboloid(alpha={}, shift={:?}, lift={}, sigma2={})",
            self.alpha,
            self.shift,
            self.lift,
            self.sigma2()
        )
    }
}

/// Hyperboloid centered at the origin with constant `σ₂ = h`.
pub fn hyperboloid_for_pinching(h: f64, dim: usize) -> Result<Hyperboloid> {
    Hyperboloid::centered(alpha_for_pinching(h, dim)?, dim)
}

/// Asymptotic data `f` on `S^{n-1}`, sampled together with its tangential gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereFunction {
    dim: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    grads: Vec<Vec<f64>>,
    curvature_modulus: f64,
    /// `n = 2` samples at equally spaced angles `2πk/N` (enables refinement).
    uniform_circle: bool,
}

impl SphereFunction {
    /// Samples `f` (given on unit vectors) at the default sphere points; the
    /// tangential gradient is taken by central differences of the 0-homogeneous
    /// extension `f(x/|x|)`.
    pub fn from_fn(dim: usize, samples: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let points = sphere_points(dim, samples)?;
        let ext = |x: &[f64]| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let y: Vec<f64> = x.iter().map(|v| v / r).collect();
            f(&y)
        };
        let step = 1e-6;
        let mut values = Vec::with_capacity(points.len());
        let mut grads = Vec::with_capacity(points.len());
        for y in &points {
            values.push(f(y));
            let mut z = y.clone();
            let g: Vec<f64> = (0..dim)
                .map(|i| {
                    z[i] = y[i] + step;
                    let p = ext(&z);
                    z[i] = y[i] - step;
                    let m = ext(&z);
                    z[i] = y[i];
                    (p - m) / (2.0 * step)
                })
                .collect();
            grads.push(g);
        }
        Self::from_samples(dim, points, values, grads, dim == 2)
    }

    /// `n = 2` data from `f(θ)` and `f'(θ)` on `N` equally spaced angles.
    pub fn circle(samples: usize, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Result<Self> {
        let points = sphere_points(2, samples)?;
        let mut values = Vec::with_capacity(samples);
        let mut grads = Vec::with_capacity(samples);
        for y in &points {
            let th = y[1].atan2(y[0]);
            values.push(f(th));
            let d = df(th);
            grads.push(vec![-d * y[1], d * y[0]]);
        }
        Self::from_samples(2, points, values, grads, true)
    }

    pub fn constant(dim: usize, samples: usize, c: f64) -> Result<Self> {
        Self::from_fn(dim, samples, |_| c)
    }

    /// Builds from explicit samples and estimates `M` (with the safety factor).
    /// Gradients are projected onto the tangent space.
    pub fn from_samples(
        dim: usize,
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
        grads: Vec<Vec<f64>>,
        uniform_circle: bool,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("empty sphere sampling".into()));
        }
        if values.len() != points.len() || grads.len() != points.len() {
            return Err(Error::Domain("sphere samples have mismatched lengths".into()));
        }
        let mut grads = grads;
        for (y, g) in points.iter().zip(grads.iter_mut()) {
            if y.len() != dim || g.len() != dim {
                return Err(Error::Domain(format!("sphere sample has wrong dimension (expected {dim})")));
            }
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("sphere sample {y:?} is not a unit vector")));
            }
            let radial: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
            for (gi, yi) in g.iter_mut().zip(y) {
                *gi -= radial * yi;
            }
        }
        let uniform_circle = uniform_circle && dim == 2 && is_uniform_circle(&points);
        let mut out = Self {
            dim,
            points,
            values,
            grads,
            curvature_modulus: 0.0,
            uniform_circle,
        };
        out.curvature_modulus = MODULUS_SAFETY * out.sampled_modulus();
        Ok(out)
    }

    /// Replaces the estimated `M` (e.g. when read back from a file).
    pub fn with_curvature_modulus(mut self, m: f64) -> Result<Self> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("curvature modulus must be >= 0, got {m}")));
        }
        self.curvature_modulus = m;
        Ok(self)
    }

    /// `max |f(x) - f(y) - Df(y)·(x-y)| / |x-y|²` over sampled pairs.
    pub fn sampled_modulus(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .into_par_iter()
            .map(|j| {
                let y = &self.points[j];
                let mut best = 0.0f64;
                for i in 0..n {
                    if i == j {
                        continue;
                    }
                    let x = &self.points[i];
                    let mut d2 = 0.0;
                    let mut lin = 0.0;
                    for k in 0..self.dim {
                        let d = x[k] - y[k];
                        d2 += d * d;
                        lin += self.grads[j][k] * d;
                    }
                    if d2 > 1e-24 {
                        best = best.max((self.values[i] - self.values[j] - lin).abs() / d2);
                    }
                }
                best
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grads(&self) -> &[Vec<f64>] {
        &self.grads
    }

    pub fn curvature_modulus(&self) -> f64 {
        self.curvature_modulus
    }

    /// `p_i(y) = Df(y) + sign·2M y` at sample `k`; `sign = +1` for the lower envelope.
    pub fn shift_vector(&self, k: usize, sign: f64) -> Vec<f64> {
        let m2 = 2.0 * self.curvature_modulus * sign;
        self.grads[k]
            .iter()
            .zip(&self.points[k])
            .map(|(g, y)| g + m2 * y)
            .collect()
    }

    /// `f` at a direction (nearest-sample for `n ≥ 3`, Hermite for the circle).
    pub fn eval_direction(&self, y: &[f64]) -> f64 {
        if self.uniform_circle {
            return self.circle_hermite(y[1].atan2(y[0])).0;
        }
        let k = self.nearest(y);
        self.values[k]
    }

    fn nearest(&self, y: &[f64]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, p) in self.points.iter().enumerate() {
            let dot: f64 = p.iter().zip(y).map(|(a, b)| a * b).sum();
            if dot > best.0 {
                best = (dot, k);
            }
        }
        best.1
    }

    /// Cubic Hermite interpolation of `(f, f')` at angle `θ` on a uniform circle.
    fn circle_hermite(&self, theta: f64) -> (f64, f64) {
        let n = self.points.len();
        let dth = 2.0 * PI / n as f64;
        let s = theta.rem_euclid(2.0 * PI) / dth;
        let k0 = (s.floor() as usize) % n;
        let k1 = (k0 + 1) % n;
        let t = s - s.floor();
        let tangential = |k: usize| {
            let y = &self.points[k];
            -self.grads[k][0] * y[1] + self.grads[k][1] * y[0]
        };
        let (f0, f1) = (self.values[k0], self.values[k1]);
        let (d0, d1) = (tangential(k0) * dth, tangential(k1) * dth);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * f0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * f1
            + (t3 - t2) * d1;
        let deriv = ((6.0 * t2 - 6.0 * t) * f0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * f1
            + (3.0 * t2 - 2.0 * t) * d1)
            / dth;
        (value, deriv)
    }
}

fn is_uniform_circle(points: &[Vec<f64>]) -> bool {
    let n = points.len();
    points.iter().enumerate().all(|(k, y)| {
        let th = 2.0 * PI * k as f64 / n as f64;
        (y[0] - th.cos()).abs() < 1e-12 && (y[1] - th.sin()).abs() < 1e-12
    })
}

/// Equally spaced angles for `n = 2`, a Fibonacci lattice for `n = 3`.
pub fn sphere_points(dim: usize, samples: usize) -> Result<Vec<Vec<f64>>> {
    if samples == 0 {
        return Err(Error::Domain("empty sphere sampling".into()));
    }
    match dim {
        2 => Ok((0..samples)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / samples as f64;
                vec![th.cos(), th.sin()]
            })
            .collect()),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            Ok((0..samples)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / samples as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect())
        }
        _ => Err(Error::Domain(format!(
            "sphere sampling implemented for n = 2, 3 only, got {dim}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    /// `q₁ = sup_y z₁(·, y)`, a subsolution.
    Lower,
    /// `q₂ = inf_y z₂(·, y)`, a supersolution.
    Upper,
}

impl EnvelopeKind {
    fn sign(self) -> f64 {
        match self {
            EnvelopeKind::Lower => 1.0,
            EnvelopeKind::Upper => -1.0,
        }
    }
}

/// Envelope of shifted hyperboloids over sampled sphere directions.
#[derive(Debug, Clone)]
pub struct TreibergsEnvelope {
    kind: EnvelopeKind,
    alpha: f64,
    offset: f64,
    sphere: Arc<SphereFunction>,
    // Per-sample constants: f(y) + offset - p(y)·y and p(y).
    heights: Vec<f64>,
    shifts: Vec<Vec<f64>>,
}

impl TreibergsEnvelope {
    /// Envelope with explicit semi-axis and vertical offset (0 for the barriers).
    pub fn new(kind: EnvelopeKind, alpha: f64, offset: f64, sphere: Arc<SphereFunction>) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("envelope semi-axis must be positive, got {alpha}")));
        }
        if sphere.is_empty() {
            return Err(Error::Domain("empty sphere sampling".into()));
        }
        let sign = kind.sign();
        let mut heights = Vec::with_capacity(sphere.len());
        let mut shifts = Vec::with_capacity(sphere.len());
        for k in 0..sphere.len() {
            let p = sphere.shift_vector(k, sign);
            let py: f64 = p.iter().zip(&sphere.points[k]).map(|(a, b)| a * b).sum();
            heights.push(sphere.values[k] + offset - py);
            shifts.push(p);
        }
        Ok(Self {
            kind,
            alpha,
            offset,
            sphere,
            heights,
            shifts,
        })
    }

    pub fn kind(&self) -> EnvelopeKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn sphere(&self) -> &SphereFunction {
        &self.sphere
    }

    /// `max_y |p(y)|` over the samples.
    pub fn max_shift(&self) -> f64 {
        self.shifts
            .iter()
            .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// `z(x, y_k)` for sample `k`.
    pub fn member(&self, x: &[f64], k: usize) -> f64 {
        let p = &self.shifts[k];
        let r2: f64 = x.iter().zip(p).map(|(a, b)| (a + b) * (a + b)).sum();
        self.heights[k] + (self.alpha * self.alpha + r2).sqrt()
    }

    /// `z(x, θ)` with Hermite-interpolated data, `n = 2` only.
    fn member_at_angle(&self, x: &[f64], theta: f64) -> f64 {
        let (f, df) = self.sphere.circle_hermite(theta);
        let (c, s) = (theta.cos(), theta.sin());
        let m2 = 2.0 * self.sphere.curvature_modulus * self.kind.sign();
        let p = [-df * s + m2 * c, df * c + m2 * s];
        let r2 = (x[0] + p[0]).powi(2) + (x[1] + p[1]).powi(2);
        f + self.offset - m2 + (self.alpha * self.alpha + r2).sqrt()
    }

    fn better(&self, a: f64, b: f64) -> bool {
        match self.kind {
            EnvelopeKind::Lower => a > b,
            EnvelopeKind::Upper => a < b,
        }
    }

    /// Sampled extremum followed, on a uniform circle, by a golden-section
    /// refinement around the best sample.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut best = (self.member(x, 0), 0);
        for k in 1..self.heights.len() {
            let z = self.member(x, k);
            if self.better(z, best.0) {
                best = (z, k);
            }
        }
        if !self.sphere.uniform_circle || self.heights.len() < 3 {
            return best.0;
        }
        let dth = 2.0 * PI / self.heights.len() as f64;
        let center = dth * best.1 as f64;
        let sign = match self.kind {
            EnvelopeKind::Lower => 1.0,
            EnvelopeKind::Upper => -1.0,
        };
        // Maximize sign·z over [center - dth, center + dth].
        let objective = |th: f64| sign * self.member_at_angle(x, th);
        let (mut a, mut b) = (center - dth, center + dth);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (objective(c), objective(d));
        for _ in 0..40 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = objective(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = objective(d);
            }
        }
        let refined = sign * fc.max(fd);
        if self.better(refined, best.0) {
            refined
        } else {
            best.0
        }
    }
}

impl Barrier for TreibergsEnvelope {
    fn dim(&self) -> usize {
        self.sphere.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }

    fn describe(&self) -> String {
        format!(
            "treibergs-{}(alpha={}, offset={}, samples={}, M={})",
            match self.kind {
                EnvelopeKind::Lower => "lower",
                EnvelopeKind::Upper => "upper",
            },
            self.alpha,
            self.offset,
            self.sphere.len(),
            self.sphere.curvature_modulus()
        )
    }
}

/// `q₁` (kind = lower, semi-axis from `h1`) or `q₂` (kind = upper, from `h2`).
pub fn treibergs_envelope(
    f: Arc<SphereFunction>,
    h1: f64,
    h2: f64,
    kind: EnvelopeKind,
) -> Result<TreibergsEnvelope> {
    check_pinching(h1, h2)?;
    let h = match kind {
        EnvelopeKind::Lower => h1,
        EnvelopeKind::Upper => h2,
    };
    let alpha = alpha_for_pinching(h, f.dim())?;
    TreibergsEnvelope::new(kind, alpha, 0.0, f)
}

pub fn check_pinching(h1: f64, h2: f64) -> Result<()> {
    if !(h2 > 0.0 && h1.is_finite()) {
        return Err(Error::Domain(format!("pinching requires h2 > 0, got h2 = {h2}")));
    }
    if h1 < h2 {
        return Err(Error::Domain(format!(
            "pinching requires h1 >= h2, got h1 = {h1} < h2 = {h2}"
        )));
    }
    Ok(())
}

/// Compactly supported bump `(1 - (|x|/β)²)⁴`, unnormalized.
pub fn bump(r: f64, beta: f64) -> f64 {
    let s = r / beta;
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - s * s).powi(4)
    }
}

/// Tensor-grid quadrature rule for the normalized bump: offsets and weights.
fn bump_rule(dim: usize, beta: f64, step: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = (beta / step).floor() as i64;
    let width = (2 * k + 1) as usize;
    let total = width.pow(dim as u32);
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    for flat in 0..total {
        let mut rem = flat;
        let mut o = vec![0.0; dim];
        for d in (0..dim).rev() {
            o[d] = ((rem % width) as i64 - k) as f64 * step;
            rem /= width;
        }
        let r = o.iter().map(|v| v * v).sum::<f64>().sqrt();
        let w = bump(r, beta);
        if w > 0.0 {
            offsets.push(o);
            weights.push(w);
        }
    }
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    (offsets, weights)
}

/// Discrete convolution of a grid function with the normalized bump of radius
/// `beta`. The output lives on the nodes where the kernel fits inside the input
/// grid (the input box shrunk by `⌊β/h⌋` nodes per side).
pub fn mollify(g: &GridFunction, beta: f64) -> Result<GridFunction> {
    let h = g.spacing();
    if !(beta >= 2.0 * h * (1.0 - 1e-12)) {
        return Err(Error::Domain(format!(
            "mollifier radius {beta} below resolution (need >= 2h = {})",
            2.0 * h
        )));
    }
    let spec = g.spec();
    let k = (beta / h + 1e-9).floor() as usize;
    if spec.shape().iter().any(|&m| m < 2 * k + 3) {
        return Err(Error::Domain("grid too small for the mollifier radius".into()));
    }
    let (offsets, weights) = bump_rule(spec.dim(), beta, h);
    let out_origin: Vec<f64> = spec.origin().iter().map(|o| o + k as f64 * h).collect();
    let out_shape: Vec<usize> = spec.shape().iter().map(|m| m - 2 * k).collect();
    let out_spec = GridSpec::new(h, out_origin, out_shape)?;
    // Offsets are integer multiples of h, so they map to flat index shifts.
    let shifts: Vec<isize> = offsets
        .iter()
        .map(|o| {
            o.iter()
                .zip(spec.strides())
                .map(|(v, &s)| (v / h).round() as isize * s as isize)
                .sum()
        })
        .collect();
    let src = g.values();
    let values: Vec<f64> = (0..out_spec.len())
        .into_par_iter()
        .map(|i| {
            let x = out_spec.point(i);
            let center = spec.node_at(&x).expect("output nodes are input nodes") as isize;
            shifts
                .iter()
                .zip(&weights)
                .map(|(&s, &w)| w * src[(center + s) as usize])
                .sum()
        })
        .collect();
    GridFunction::new(out_spec, values)
}

/// Pointwise mollification of a barrier by tensor-grid quadrature.
#[derive(Clone)]
pub struct Mollified<B> {
    inner: B,
    beta: f64,
    offsets: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl<B: Barrier> Mollified<B> {
    /// Quadrature step `β / nodes_per_radius`.
    pub fn new(inner: B, beta: f64, nodes_per_radius: usize) -> Result<Self> {
        if !(beta > 0.0) || nodes_per_radius < 2 {
            return Err(Error::Domain(format!(
                "mollifier needs beta > 0 and >= 2 nodes per radius (beta = {beta})"
            )));
        }
        let (offsets, weights) = bump_rule(inner.dim(), beta, beta / nodes_per_radius as f64);
        Ok(Self {
            inner,
            beta,
            offsets,
            weights,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: Barrier> Barrier for Mollified<B> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        let mut acc = 0.0;
        for (o, w) in self.offsets.iter().zip(&self.weights) {
            for d in 0..x.len() {
                y[d] = x[d] - o[d];
            }
            acc += w * self.inner.value(&y);
        }
        acc
    }

    fn describe(&self) -> String {
        format!("mollified(beta={}, {})", self.beta, self.inner.describe())
    }
}

/// A barrier given only through samples on a grid (multilinear in between).
#[derive(Debug, Clone)]
pub struct SampledBarrier {
    grid: GridFunction,
}

impl SampledBarrier {
    pub fn new(grid: GridFunction) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> &GridFunction {
        &self.grid
    }
}

impl Barrier for SampledBarrier {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.grid.interpolate(x).unwrap_or(f64::NAN)
    }

    fn describe(&self) -> String {
        format!("sampled-grid(shape={:?}, spacing={})", self.grid.spec().shape(), self.grid.spacing())
    }
}

/// Lower and upper barriers, `φ₁ ≤ φ₂`.
#[derive(Clone)]
pub struct BarrierPair {
    pub lower: Arc<dyn Barrier>,
    pub upper: Arc<dyn Barrier>,
    /// `(h1, h2)` when the pair comes from a pinching of the curvature.
    pub pinching: Option<(f64, f64)>,
}

impl BarrierPair {
    pub fn new(lower: Arc<dyn Barrier>, upper: Arc<dyn Barrier>) -> Result<Self> {
        if lower.dim() != upper.dim() {
            return Err(Error::Domain("barrier dimensions differ".into()));
        }
        Ok(Self {
            lower,
            upper,
            pinching: None,
        })
    }

    /// Centered hyperboloids for `σ₂ = h1` (lower) and `σ₂ = h2` (upper).
    pub fn hyperboloids(h1: f64, h2: f64, dim: usize) -> Result<Self> {
        check_pinching(h1, h2)?;
        Ok(Self {
            lower: Arc::new(hyperboloid_for_pinching(h1, dim)?),
            upper: Arc::new(hyperboloid_for_pinching(h2, dim)?),
            pinching: Some((h1, h2)),
        })
    }

    /// Treibergs envelopes `q₁ ≤ q₂` for asymptotic data `f`.
    pub fn treibergs(f: Arc<SphereFunction>, h1: f64, h2: f64) -> Result<Self> {
        Ok(Self {
            lower: Arc::new(treibergs_envelope(f.clone(), h1, h2, EnvelopeKind::Lower)?),
            upper: Arc::new(treibergs_envelope(f, h1, h2, EnvelopeKind::Upper)?),
            pinching: Some((h1, h2)),
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }
}

/// The §4-style aid for lightcone data: `ψ = ε + √(ε² + |x|²)`.
#[derive(Debug, Clone)]
pub struct LightconeAid {
    pub psi: Hyperboloid,
    pub delta: f64,
    pub eps: f64,
    /// `ψ > φ₂` outside `B_{R₁}`.
    pub r1: f64,
}

/// Builds `ψ` with `δ = δ₀/2`, `ε = δ/2`, `δ₀ = inf_{B_{R₀}}(φ₁ - |x|)`, for
/// centered hyperboloid barriers, and locates `R₁` by bisection.
pub fn lightcone_gradient_aid(phi1: &Hyperboloid, phi2: &Hyperboloid, r0: f64) -> Result<LightconeAid> {
    if !(r0 > 0.0) {
        return Err(Error::Domain(format!("inner radius must be positive, got {r0}")));
    }
    let dim = phi1.dim();
    let delta0 = (phi1.alpha * phi1.alpha + r0 * r0).sqrt() - r0 + phi1.lift;
    let delta = 0.5 * delta0;
    let eps = 0.5 * delta;
    let psi = Hyperboloid::new(eps, vec![0.0; dim], eps)?;
    // ψ - φ₂ is increasing in |x| when ε < α₂.
    let gap = |r: f64| eps + (eps * eps + r * r).sqrt() - phi2.lift - (phi2.alpha * phi2.alpha + r * r).sqrt();
    if eps >= phi2.alpha {
        return Err(Error::SearchFailure(format!(
            "eps = {eps} >= upper semi-axis {}; psi never crosses phi2",
            phi2.alpha
        )));
    }
    let mut hi = r0.max(1.0);
    while gap(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::SearchFailure(format!("no crossing of psi and phi2 found (eps = {eps})")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(LightconeAid {
        psi,
        delta,
        eps,
        r1: hi,
    })
}

/// `ν` bound at the maximum of the test function: with `s = sup_{ψ ≤ φ₂} |Dψ|`
/// and `α = (1 - s)/2`, returns `1/√(1 - (s/(1-α))²)`.
pub fn nu_bound_from_slope(sup_slope: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&sup_slope) {
        return Err(Error::Domain(format!("aid slope must lie in [0,1), got {sup_slope}")));
    }
    let alpha = 0.5 * (1.0 - sup_slope);
    let q = sup_slope / (1.0 - alpha);
    Ok(1.0 / (1.0 - q * q).sqrt())
}

/// The gradient aid of the general-data construction (`ψ = q₁^ε ⋆ φ_β`).
pub struct GradientAid {
    pub psi: Mollified<TreibergsEnvelope>,
    pub delta: f64,
    pub eps: f64,
    pub r1: f64,
    pub r2: f64,
    /// `min (q₁ - δ - ψ)` over the verification grid on `B_{R₀}` (must be ≥ 0).
    pub inner_gap: f64,
    /// `min (ψ - q₂)` over the verification rings in `B_{R₂} ∖ B_{R₁}` (must be > 0).
    pub outer_gap: f64,
}

/// The strictly convex aid of the `C²` estimate (`ψ = q₁^{-ε} ⋆ φ_β`).
pub struct ConvexAid {
    pub psi: Mollified<TreibergsEnvelope>,
    pub eps: f64,
    pub alpha: f64,
    pub r1: f64,
    pub r2: f64,
    /// `min (ψ - q₂ - 1)` over `B_{R₀}` (must be ≥ 0).
    pub inner_gap: f64,
    /// `min (q₁ - ψ)` over `B_{R₂} ∖ B_{R₁}` (must be > 0).
    pub outer_gap: f64,
}

pub struct AuxiliaryFunctions {
    pub gradient: GradientAid,
    pub convex: ConvexAid,
}

/// Parameters of the auxiliary-function search.
#[derive(Debug, Clone)]
pub struct AidOptions {
    /// Ratio of the geometric radius grid.
    pub radius_ratio: f64,
    /// Largest radius searched, as a multiple of `R₀`.
    pub max_radius_factor: f64,
    /// `R₂ = r2_factor · R₁`.
    pub r2_factor: f64,
    /// Directions per verification ring.
    pub ring_directions: usize,
    /// Radii per verification annulus.
    pub ring_radii: usize,
    /// Spacing of the verification grid on `B_{R₀}`.
    pub inner_spacing: f64,
    /// `ε` of the convex aid.
    pub convex_eps: f64,
    /// Quadrature nodes per mollifier radius.
    pub quadrature_nodes: usize,
}

impl Default for AidOptions {
    fn default() -> Self {
        Self {
            radius_ratio: 1.1,
            max_radius_factor: 1e4,
            r2_factor: 1.5,
            ring_directions: 64,
            ring_radii: 12,
            inner_spacing: 0.125,
            convex_eps: 1.0,
            quadrature_nodes: 3,
        }
    }
}

fn ring_points(dim: usize, radius: f64, directions: usize) -> Result<Vec<Vec<f64>>> {
    Ok(sphere_points(dim, directions)?
        .into_iter()
        .map(|y| y.into_iter().map(|v| v * radius).collect())
        .collect())
}

fn ball_points(dim: usize, radius: f64, spacing: f64) -> Result<Vec<Vec<f64>>> {
    let m = (radius / spacing).ceil();
    let spec = GridSpec::centered_box(dim, m * spacing, spacing)?;
    Ok((0..spec.len())
        .map(|i| spec.point(i))
        .filter(|x| x.iter().map(|v| v * v).sum::<f64>() <= radius * radius)
        .collect())
}

/// `min_x (a(x) - b(x))` over the given points.
fn min_gap(points: &[Vec<f64>], a: &(dyn Fn(&[f64]) -> f64 + Sync), b: &(dyn Fn(&[f64]) -> f64 + Sync)) -> f64 {
    points
        .par_iter()
        .map(|x| a(x) - b(x))
        .reduce(|| f64::INFINITY, f64::min)
}

/// Smallest radius `r` of the geometric grid such that `gap ≥ threshold` at every
/// grid radius in `[r, r·r2_factor²]`.
fn first_stable_radius(
    dim: usize,
    start: f64,
    opts: &AidOptions,
    threshold: f64,
    gap: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<f64> {
    let stop = start * opts.max_radius_factor;
    let mut radii = vec![start];
    while *radii.last().unwrap() < stop {
        let next = radii.last().unwrap() * opts.radius_ratio;
        radii.push(next);
    }
    let gaps: Vec<f64> = radii
        .iter()
        .map(|&r| {
            ring_points(dim, r, opts.ring_directions)
                .map(|pts| pts.par_iter().map(|x| gap(x)).reduce(|| f64::INFINITY, f64::min))
                .unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    let span = opts.r2_factor * opts.r2_factor;
    for (j, &r) in radii.iter().enumerate() {
        let window_ok = radii
            .iter()
            .zip(&gaps)
            .skip(j)
            .take_while(|(&s, _)| s <= r * span)
            .all(|(_, &g)| g >= threshold);
        let window_complete = *radii.last().unwrap() >= r * span;
        if window_ok && window_complete {
            return Ok(r);
        }
    }
    let tail: Vec<String> = radii
        .iter()
        .zip(&gaps)
        .rev()
        .take(5)
        .map(|(r, g)| format!("r={r:.3}: gap={g:.3e}"))
        .collect();
    Err(Error::SearchFailure(format!(
        "no radius in [{start}, {stop}] reaches gap >= {threshold:.3e}; largest radii: {}",
        tail.join(", ")
    )))
}

/// Builds both auxiliary functions for asymptotic data `f`, inner radius `r0`
/// and pinching `h1 ≥ h2`. `delta` defaults to half of
/// `δ₀ = inf_{B_R}(√(α₁² + |x|²) - |x|)`, `R = R₀ + max|p₁|`.
pub fn epsilon_shifted_envelopes(
    f: Arc<SphereFunction>,
    h1: f64,
    h2: f64,
    r0: f64,
    delta: Option<f64>,
    opts: &AidOptions,
) -> Result<AuxiliaryFunctions> {
    check_pinching(h1, h2)?;
    if !(r0 > 0.0) {
        return Err(Error::Domain(format!("inner radius must be positive, got {r0}")));
    }
    let dim = f.dim();
    let q1 = treibergs_envelope(f.clone(), h1, h2, EnvelopeKind::Lower)?;
    let q2 = treibergs_envelope(f.clone(), h1, h2, EnvelopeKind::Upper)?;
    let alpha1 = q1.alpha();

    // Gradient aid.
    let big_r = r0 + q1.max_shift();
    let delta0 = (alpha1 * alpha1 + big_r * big_r).sqrt() - big_r;
    let delta = delta.unwrap_or(0.5 * delta0);
    if !(delta > 0.0 && delta < delta0) {
        return Err(Error::Domain(format!("delta must lie in (0, {delta0}), got {delta}")));
    }
    // ε + √(ε² + R²) < √(α₁² + R²) - δ; the left side increases with ε.
    let target = (alpha1 * alpha1 + big_r * big_r).sqrt() - delta;
    let (mut lo, mut hi) = (0.0, alpha1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + (mid * mid + big_r * big_r).sqrt() < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps = 0.5 * lo;
    let q1_eps = TreibergsEnvelope::new(EnvelopeKind::Lower, eps, eps, f.clone())?;
    let inner = ball_points(dim, r0, opts.inner_spacing)?;
    let raw_inner_gap = min_gap(&inner, &|x| q1.value(x) - delta, &|x| q1_eps.value(x));
    if raw_inner_gap < 0.0 {
        return Err(Error::SearchFailure(format!(
            "q1^eps exceeds q1 - delta on B_R0 by {:.3e}",
            -raw_inner_gap
        )));
    }
    let r1 = first_stable_radius(dim, r0, opts, 0.5 * eps, &|x| q1_eps.value(x) - q2.value(x))?;
    let r2 = opts.r2_factor * r1;
    // Mollification raises a convex function by at most L·β; keep β below the margins.
    let beta = 0.25 * raw_inner_gap.min(0.5 * eps);
    let psi = Mollified::new(q1_eps, beta, opts.quadrature_nodes)?;
    let annulus = annulus_points(dim, r1, r2, opts)?;
    let inner_gap = min_gap(&inner, &|x| q1.value(x) - delta, &|x| psi.value(x));
    let outer_gap = min_gap(&annulus, &|x| psi.value(x), &|x| q2.value(x));
    if inner_gap < 0.0 || outer_gap <= 0.0 {
        return Err(Error::SearchFailure(format!(
            "gradient aid separation failed: inner gap {inner_gap:.3e}, outer gap {outer_gap:.3e}"
        )));
    }
    let gradient = GradientAid {
        psi,
        delta,
        eps,
        r1,
        r2,
        inner_gap,
        outer_gap,
    };

    // Convex aid.
    let ceps = opts.convex_eps;
    let top = min_gap(&inner, &|_| 0.0, &|x| -q2.value(x));
    let top = -top + 2.0;
    let f_min = f.values().iter().copied().fold(f64::INFINITY, f64::min);
    // z₁^{-ε} ≥ f(y) - ε - 2M + α on B_{R₀}; pick α so that this is ≥ sup q₂ + 2.
    let alpha = (top - f_min + ceps + 2.0 * f.curvature_modulus()).max(alpha1) + 1.0;
    let q1_neg = TreibergsEnvelope::new(EnvelopeKind::Lower, alpha, -ceps, f.clone())?;
    let r1c = first_stable_radius(dim, r0, opts, 0.5 * ceps, &|x| q1.value(x) - q1_neg.value(x))?;
    let r2c = opts.r2_factor * r1c;
    let beta_c = 0.25 * ceps;
    let psi_c = Mollified::new(q1_neg, beta_c, opts.quadrature_nodes)?;
    let annulus_c = annulus_points(dim, r1c, r2c, opts)?;
    let inner_gap_c = min_gap(&inner, &|x| psi_c.value(x), &|x| q2.value(x) + 1.0);
    let outer_gap_c = min_gap(&annulus_c, &|x| q1.value(x), &|x| psi_c.value(x));
    if inner_gap_c < 0.0 || outer_gap_c <= 0.0 {
        return Err(Error::SearchFailure(format!(
            "convex aid separation failed: inner gap {inner_gap_c:.3e}, outer gap {outer_gap_c:.3e}"
        )));
    }
    Ok(AuxiliaryFunctions {
        gradient,
        convex: ConvexAid {
            psi: psi_c,
            eps: ceps,
            alpha,
            r1: r1c,
            r2: r2c,
            inner_gap: inner_gap_c,
            outer_gap: outer_gap_c,
        },
    })
}

fn annulus_points(dim: usize, r1: f64, r2: f64, opts: &AidOptions) -> Result<Vec<Vec<f64>>> {
    let mut pts = Vec::new();
    for k in 0..opts.ring_radii {
        let r = r1 + (r2 - r1) * k as f64 / (opts.ring_radii - 1).max(1) as f64;
        pts.extend(ring_points(dim, r, opts.ring_directions)?);
    }
    Ok(pts)
}

/// Plain-text `key = value` description of a barrier.
#[derive(Debug, Clone)]
pub enum BarrierSpec {
    Hyperboloid(Hyperboloid),
    Treibergs(TreibergsEnvelope),
}

impl BarrierSpec {
    pub fn into_barrier(self) -> Arc<dyn Barrier> {
        match self {
            BarrierSpec::Hyperboloid(h) => Arc::new(h),
            BarrierSpec::Treibergs(t) => Arc::new(t),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(",");
        match self {
            BarrierSpec::Hyperboloid(h) => {
                let _ = writeln!(s, "kind = hyperboloid");
                let _ = writeln!(s, "dim = {}", h.dim());
                let _ = writeln!(s, "alpha = {:.17e}", h.alpha);
                let _ = writeln!(s, "shift = {}", join(&h.shift));
                let _ = writeln!(s, "lift = {:.17e}", h.lift);
            }
            BarrierSpec::Treibergs(t) => {
                let kind = match t.kind {
                    EnvelopeKind::Lower => "lower",
                    EnvelopeKind::Upper => "upper",
                };
                let sp = t.sphere();
                let _ = writeln!(s, "kind = treibergs");
                let _ = writeln!(s, "envelope = {kind}");
                let _ = writeln!(s, "dim = {}", sp.dim());
                let _ = writeln!(s, "alpha = {:.17e}", t.alpha);
                let _ = writeln!(s, "offset = {:.17e}", t.offset);
                let _ = writeln!(s, "curvature_modulus = {:.17e}", sp.curvature_modulus());
                let _ = writeln!(s, "uniform_circle = {}", sp.uniform_circle);
                for k in 0..sp.len() {
                    let mut row = sp.points[k].clone();
                    row.push(sp.values[k]);
                    row.extend_from_slice(&sp.grads[k]);
                    let _ = writeln!(s, "sample = {}", join(&row));
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv: Vec<(String, String)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(format!("line {}", lineno + 1), "expected key = value"))?;
            kv.push((k.trim().to_string(), v.trim().to_string()));
        }
        let get = |key: &str| -> Result<&str> {
            kv.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::parse(key, "missing"))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse::<f64>()
                .map_err(|e| Error::parse(key, e.to_string()))
        };
        let list = |key: &str, v: &str| -> Result<Vec<f64>> {
            v.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::parse(key, e.to_string())))
                .collect()
        };
        let dim: usize = get("dim")?
            .parse()
            .map_err(|e: std::num::ParseIntError| Error::parse("dim", e.to_string()))?;
        match get("kind")? {
            "hyperboloid" => {
                let shift = list("shift", get("shift")?)?;
                if shift.len() != dim {
                    return Err(Error::parse("shift", format!("expected {dim} components")));
                }
                Ok(BarrierSpec::Hyperboloid(Hyperboloid::new(num("alpha")?, shift, num("lift")?)?))
            }
            "treibergs" => {
                let kind = match get("envelope")? {
                    "lower" => EnvelopeKind::Lower,
                    "upper" => EnvelopeKind::Upper,
                    other => return Err(Error::parse("envelope", format!("unknown envelope {other:?}"))),
                };
                let uniform = get("uniform_circle").map(|v| v == "true").unwrap_or(false);
                let mut points = Vec::new();
                let mut values = Vec::new();
                let mut grads = Vec::new();
                for (k, v) in kv.iter().filter(|(k, _)| k == "sample") {
                    let row = list(k, v)?;
                    if row.len() != 2 * dim + 1 {
                        return Err(Error::parse("sample", format!("expected {} numbers", 2 * dim + 1)));
                    }
                    points.push(row[..dim].to_vec());
                    values.push(row[dim]);
                    grads.push(row[dim + 1..].to_vec());
                }
                let sphere = SphereFunction::from_samples(dim, points, values, grads, uniform)?
                    .with_curvature_modulus(num("curvature_modulus")?)?;
                Ok(BarrierSpec::Treibergs(TreibergsEnvelope::new(
                    kind,
                    num("alpha")?,
                    num("offset")?,
                    Arc::new(sphere),
                )?))
            }
            other => Err(Error::parse("kind", format!("unknown barrier kind {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{principal_curvatures, PointJet};
    use approx::assert_relative_eq;

    fn cosine_data(samples: usize) -> Arc<SphereFunction> {
        Arc::new(SphereFunction::circle(samples, |t| 0.3 * t.cos(), |t| -0.3 * t.sin()).unwrap())
    }

    #[test]
    fn pinching_semi_axes() {
        assert_relative_eq!(hyperboloid_for_pinching(1.0, 2).unwrap().alpha, 1.0);
        assert_relative_eq!(hyperboloid_for_pinching(3.0, 3).unwrap().alpha, 1.0);
        assert!(hyperboloid_for_pinching(0.0, 2).is_err());
        assert!(hyperboloid_for_pinching(-1.0, 2).is_err());
    }

    #[test]
    fn hyperboloid_sigma2_is_constant() {
        let h = Hyperboloid::new(0.7, vec![0.3, -0.2, 1.0], 2.0).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.0, 2.0, -3.0], [-4.0, 0.5, 0.1]] {
            let jet = PointJet::from_slices(&h.gradient(&x), &h.hessian(&x)).unwrap();
            let pc = principal_curvatures(&jet).unwrap();
            assert_relative_eq!(pc.sigma2(), h.sigma2(), max_relative = 1e-12);
        }
    }

    #[test]
    fn constant_data_collapses_to_one_hyperboloid() {
        let f = Arc::new(SphereFunction::constant(2, 90, 0.4).unwrap());
        assert_eq!(f.curvature_modulus(), 0.0);
        let q1 = treibergs_envelope(f, 1.0, 1.0, EnvelopeKind::Lower).unwrap();
        for x in [[0.0, 0.0], [3.0, -1.0], [-7.0, 2.0]] {
            let expected = 0.4 + (1.0f64 + x[0] * x[0] + x[1] * x[1]).sqrt();
            assert_relative_eq!(q1.value(&x), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn modulus_inequality_holds_on_samples() {
        let f = cosine_data(180);
        let m = f.curvature_modulus();
        assert!(m > 0.0);
        for j in 0..f.len() {
            for i in 0..f.len() {
                let (x, y) = (&f.points()[i], &f.points()[j]);
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
                let lin: f64 = f.grads()[j].iter().zip(x.iter().zip(y)).map(|(g, (a, b))| g * (a - b)).sum();
                assert!((f.values()[i] - f.values()[j] - lin).abs() <= m * d2 + 1e-14);
            }
        }
    }

    #[test]
    fn envelope_refinement_tracks_exact_supremum() {
        // With coarse samples, refinement should get close to the dense-sample value.
        let coarse = treibergs_envelope(cosine_data(60), 1.2, 0.8, EnvelopeKind::Lower).unwrap();
        let dense = treibergs_envelope(cosine_data(20000), 1.2, 0.8, EnvelopeKind::Lower).unwrap();
        for x in [[0.3, 0.1], [5.0, -2.0], [-3.0, 4.0]] {
            // M differs slightly between samplings; compare loosely.
            assert!((coarse.value(&x) - dense.value(&x)).abs() < 5e-3);
        }
    }

    #[test]
    fn mollify_preserves_affine_functions() {
        let spec = GridSpec::centered_box(2, 2.0, 0.1).unwrap();
        let g = GridFunction::from_fn(spec, |x| 0.4 * x[0] - 0.3 * x[1] + 1.0);
        let m = mollify(&g, 0.3).unwrap();
        for i in 0..m.len() {
            let x = m.spec().point(i);
            assert!((m.values()[i] - (0.4 * x[0] - 0.3 * x[1] + 1.0)).abs() < 1e-12);
        }
        assert!(mollify(&g, 0.15).is_err());
    }

    #[test]
    fn lightcone_aid_separates() {
        let phi1 = hyperboloid_for_pinching(1.0, 2).unwrap();
        let phi2 = hyperboloid_for_pinching(1.0, 2).unwrap();
        let aid = lightcone_gradient_aid(&phi1, &phi2, 2.0).unwrap();
        let spec = GridSpec::centered_box(2, 2.0, 0.05).unwrap();
        for i in 0..spec.len() {
            let x = spec.point(i);
            if x[0] * x[0] + x[1] * x[1] <= 4.0 {
                assert!(aid.psi.value(&x) <= phi1.value(&x) - aid.delta + 1e-12);
            }
        }
        for r in [aid.r1 * 1.001, aid.r1 * 2.0, aid.r1 * 10.0] {
            assert!(aid.psi.value(&[r, 0.0]) > phi2.value(&[r, 0.0]));
        }
        assert!(aid.psi.value(&[0.9 * aid.r1, 0.0]) <= phi2.value(&[0.9 * aid.r1, 0.0]));
    }

    #[test]
    fn barrier_text_roundtrip() {
        let h = BarrierSpec::Hyperboloid(Hyperboloid::new(0.9, vec![0.1, -0.2], 0.3).unwrap());
        let back = BarrierSpec::from_text(&h.to_text()).unwrap();
        match back {
            BarrierSpec::Hyperboloid(b) => assert_eq!(b, Hyperboloid::new(0.9, vec![0.1, -0.2], 0.3).unwrap()),
            _ => panic!("wrong kind"),
        }
        let t = treibergs_envelope(cosine_data(36), 1.2, 0.8, EnvelopeKind::Upper).unwrap();
        let text = BarrierSpec::Treibergs(t.clone()).to_text();
        let back = BarrierSpec::from_text(&text).unwrap().into_barrier();
        for x in [[0.0, 0.0], [2.0, 1.0]] {
            assert_eq!(back.value(&x), t.value(&x));
        }
        assert!(BarrierSpec::from_text("kind = cone\ndim = 2").is_err());
    }
}
