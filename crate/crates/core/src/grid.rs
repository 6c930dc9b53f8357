//! Uniform Cartesian grids and the finite-difference jets taken on them.

use crate::error::{Error, Result};
use crate::geometry::MAX_DIM;

/// Geometry of a uniform grid: `shape[d]` nodes along axis `d`, starting at
/// `origin[d]` with common spacing. Storage is row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    spacing: f64,
    origin: Vec<f64>,
    shape: Vec<usize>,
    strides: Vec<usize>,
}

impl GridSpec {
    pub fn new(spacing: f64, origin: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let dim = shape.len();
        if !(2..=MAX_DIM).contains(&dim) || origin.len() != dim {
            return Err(Error::Domain(format!(
                "grid dimension must be in 2..={MAX_DIM} with matching origin, got shape {shape:?}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Domain(format!("grid spacing must be positive, got {spacing}")));
        }
        if shape.iter().any(|&m| m < 3) {
            return Err(Error::Domain(format!("need at least 3 nodes per axis, got {shape:?}")));
        }
        let mut strides = vec![1; dim];
        for d in (0..dim - 1).rev() {
            strides[d] = strides[d + 1] * shape[d + 1];
        }
        Ok(Self {
            spacing,
            origin,
            shape,
            strides,
        })
    }

    /// The box `[-radius, radius]ⁿ`; `2·radius/spacing` must be an integer.
    pub fn centered_box(dim: usize, radius: f64, spacing: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("box radius must be positive, got {radius}")));
        }
        let cells = 2.0 * radius / spacing;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::Domain(format!(
                "box width 2R = {} is not a multiple of spacing {spacing}",
                2.0 * radius
            )));
        }
        let m = rounded as usize + 1;
        Self::new(spacing, vec![-radius; dim], vec![m; dim])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Upper corner of the box.
    pub fn upper(&self) -> Vec<f64> {
        self.origin
            .iter()
            .zip(&self.shape)
            .map(|(o, &m)| o + (m - 1) as f64 * self.spacing)
            .collect()
    }

    /// Half-width of the largest centered cube contained in the grid box.
    pub fn inner_radius(&self) -> f64 {
        self.origin
            .iter()
            .zip(self.upper())
            .map(|(lo, hi)| (-lo).min(hi))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for d in 0..self.dim() {
            out[d] = idx / self.strides[d];
            idx %= self.strides[d];
        }
    }

    pub fn coords(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for d in 0..self.dim() {
            let k = rem / self.strides[d];
            rem %= self.strides[d];
            out[d] = self.origin[d] + k as f64 * self.spacing;
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.coords(idx, &mut x);
        x
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let mut rem = idx;
        for d in 0..self.dim() {
            let k = rem / self.strides[d];
            rem %= self.strides[d];
            if k == 0 || k + 1 == self.shape[d] {
                return true;
            }
        }
        false
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_boundary(i)).collect()
    }

    /// Index of the node at `x`, if `x` is (to rounding) a node of this grid.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for d in 0..self.dim() {
            let s = (x[d] - self.origin[d]) / self.spacing;
            let k = s.round();
            if (s - k).abs() > 1e-9 || k < 0.0 || k as usize >= self.shape[d] {
                return None;
            }
            idx += k as usize * self.strides[d];
        }
        Some(idx)
    }
}

/// A scalar field sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Domain(format!(
                "grid has {} nodes but {} values were given",
                spec.len(),
                values.len()
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        let values = vec![0.0; spec.len()];
        Self { spec, values }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; spec.dim()];
        let values = (0..spec.len())
            .map(|i| {
                spec.coords(i, &mut x);
                f(&x)
            })
            .collect();
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Centered second-order jet at an interior node. `hess` is row-major.
    /// Returns `false` (leaving the buffers untouched) at boundary nodes.
    pub fn jet_at(&self, idx: usize, grad: &mut [f64], hess: &mut [f64]) -> bool {
        if self.spec.is_boundary(idx) {
            return false;
        }
        centered_jet(&self.values, &self.spec, idx, grad, hess);
        true
    }

    /// Largest centered-difference slope `|Du|` over interior nodes, with its node.
    pub fn max_interior_slope(&self) -> (f64, usize) {
        let n = self.dim();
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n * n];
        let mut worst = (0.0, 0);
        for idx in 0..self.len() {
            if self.jet_at(idx, &mut g, &mut h) {
                let s = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if s > worst.0 {
                    worst = (s, idx);
                }
            }
        }
        worst
    }

    /// Multilinear interpolation; `None` outside the grid box.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let n = self.dim();
        let h = self.spec.spacing;
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for d in 0..n {
            let s = (x[d] - self.spec.origin[d]) / h;
            let last = (self.spec.shape[d] - 1) as f64;
            if !(s >= -1e-9 && s <= last + 1e-9) {
                return None;
            }
            let s = s.clamp(0.0, last);
            let k = (s.floor() as usize).min(self.spec.shape[d] - 2);
            base[d] = k;
            frac[d] = s - k as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = 0;
            for d in 0..n {
                let bit = (corner >> d) & 1;
                w *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
                idx += (base[d] + bit) * self.spec.strides[d];
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        Some(acc)
    }

    /// Resamples onto the centered box `[-radius, radius]ⁿ` with spacing `spacing`.
    pub fn resample_box(&self, radius: f64, spacing: f64) -> Result<GridFunction> {
        let spec = GridSpec::centered_box(self.dim(), radius, spacing)?;
        let mut x = vec![0.0; self.dim()];
        let mut values = Vec::with_capacity(spec.len());
        for i in 0..spec.len() {
            spec.coords(i, &mut x);
            values.push(self.interpolate(&x).ok_or_else(|| {
                Error::Domain(format!("point {x:?} outside the source grid"))
            })?);
        }
        GridFunction::new(spec, values)
    }

    pub fn sup_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Centered differences for `Du` and `D²u` (mixed terms from the four diagonal
/// neighbours). `idx` must be an interior node.
pub fn centered_jet(values: &[f64], spec: &GridSpec, idx: usize, grad: &mut [f64], hess: &mut [f64]) {
    let n = spec.dim();
    let h = spec.spacing;
    let inv2h = 0.5 / h;
    let invh2 = 1.0 / (h * h);
    let inv4h2 = 0.25 * invh2;
    let u0 = values[idx];
    for i in 0..n {
        let si = spec.strides[i];
        let up = values[idx + si];
        let um = values[idx - si];
        grad[i] = (up - um) * inv2h;
        hess[i * n + i] = (up - 2.0 * u0 + um) * invh2;
        for j in 0..i {
            let sj = spec.strides[j];
            let v = (values[idx + si + sj] - values[idx + si - sj] - values[idx - si + sj]
                + values[idx - si - sj])
                * inv4h2;
            hess[i * n + j] = v;
            hess[j * n + i] = v;
        }
    }
}
