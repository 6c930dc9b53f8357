//! Prescribed curvature functions `H(x, z)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::GridFunction;

pub trait Curvature: Send + Sync {
    fn value(&self, x: &[f64], z: f64) -> f64;

    /// `∂H/∂z`; central differences unless overridden.
    fn dz(&self, x: &[f64], z: f64) -> f64 {
        let s = 1e-6 * (1.0 + z.abs());
        (self.value(x, z + s) - self.value(x, z - s)) / (2.0 * s)
    }

    fn describe(&self) -> String;
}

/// Builtin curvature families, addressable by name from config files.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    /// `H ≡ h`.
    Constant { h: f64 },
    /// `H = base + amp·sin(x₁)/(1 + |x|²)`.
    SinBump { base: f64, amp: f64 },
    /// `H = base + amp·exp(-|x|²)`, radially symmetric.
    RadialGauss { base: f64, amp: f64 },
    /// `H = base + amp·tanh(z - center)`, increasing in `z` for `amp ≥ 0`.
    TanhHeight { base: f64, amp: f64, center: f64 },
}

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Constant { .. } => "constant",
            Builtin::SinBump { .. } => "sin-bump",
            Builtin::RadialGauss { .. } => "radial-gauss",
            Builtin::TanhHeight { .. } => "tanh-height",
        }
    }

    /// Parameter names in the order used by [`Builtin::params`] and [`Builtin::from_parts`].
    pub fn param_names(name: &str) -> Result<&'static [&'static str]> {
        Ok(match name {
            "constant" => &["h"],
            "sin-bump" => &["base", "amp"],
            "radial-gauss" => &["base", "amp"],
            "tanh-height" => &["base", "amp", "center"],
            other => {
                return Err(Error::parse(
                    "curvature.name",
                    format!("unknown builtin {other:?} (constant, sin-bump, radial-gauss, tanh-height)"),
                ))
            }
        })
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Builtin::Constant { h } => vec![h],
            Builtin::SinBump { base, amp } | Builtin::RadialGauss { base, amp } => vec![base, amp],
            Builtin::TanhHeight { base, amp, center } => vec![base, amp, center],
        }
    }

    pub fn from_parts(name: &str, params: &[f64]) -> Result<Self> {
        let names = Self::param_names(name)?;
        if params.len() != names.len() {
            return Err(Error::parse(
                "curvature",
                format!("{name} takes {} parameters ({})", names.len(), names.join(", ")),
            ));
        }
        let b = match name {
            "constant" => Builtin::Constant { h: params[0] },
            "sin-bump" => Builtin::SinBump {
                base: params[0],
                amp: params[1],
            },
            "radial-gauss" => Builtin::RadialGauss {
                base: params[0],
                amp: params[1],
            },
            _ => Builtin::TanhHeight {
                base: params[0],
                amp: params[1],
                center: params[2],
            },
        };
        b.validate()?;
        Ok(b)
    }

    /// `(inf H, sup H)` over all of `ℝⁿ × ℝ`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Builtin::Constant { h } => (h, h),
            Builtin::SinBump { base, amp } | Builtin::TanhHeight { base, amp, .. } => {
                (base - amp.abs(), base + amp.abs())
            }
            Builtin::RadialGauss { base, amp } => (base + amp.min(0.0), base + amp.max(0.0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain(format!("{} parameters must be finite", self.name())));
        }
        let (lo, _) = self.bounds();
        if lo <= 0.0 {
            return Err(Error::Domain(format!(
                "{} must be bounded below by a positive constant (inf = {lo})",
                self.name()
            )));
        }
        Ok(())
    }
}

impl Curvature for Builtin {
    fn value(&self, x: &[f64], z: f64) -> f64 {
        match *self {
            Builtin::Constant { h } => h,
            Builtin::SinBump { base, amp } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                base + amp * x[0].sin() / (1.0 + r2)
            }
            Builtin::RadialGauss { base, amp } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                base + amp * (-r2).exp()
            }
            Builtin::TanhHeight { base, amp, center } => base + amp * (z - center).tanh(),
        }
    }

    fn dz(&self, _x: &[f64], z: f64) -> f64 {
        match *self {
            Builtin::TanhHeight { amp, center, .. } => {
                let c = (z - center).cosh();
                amp / (c * c)
            }
            _ => 0.0,
        }
    }

    fn describe(&self) -> String {
        let params = self
            .params()
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        format!("{}({params})", self.name())
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// `H(x)` sampled on a grid, independent of `z`; multilinear between nodes.
#[derive(Debug, Clone)]
pub struct SampledCurvature {
    grid: GridFunction,
}

impl SampledCurvature {
    pub fn new(grid: GridFunction) -> Result<Self> {
        if let Some(v) = grid.values().iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("sampled curvature must be positive, found {v}")));
        }
        Ok(Self { grid })
    }

    pub fn grid(&self) -> &GridFunction {
        &self.grid
    }
}

impl Curvature for SampledCurvature {
    fn value(&self, x: &[f64], _z: f64) -> f64 {
        self.grid.interpolate(x).unwrap_or(f64::NAN)
    }

    fn dz(&self, _x: &[f64], _z: f64) -> f64 {
        0.0
    }

    fn describe(&self) -> String {
        format!("sampled(shape={:?}, spacing={})", self.grid.spec().shape(), self.grid.spacing())
    }
}

/// Wraps a closure.
pub struct FnCurvature<F> {
    f: F,
    label: String,
}

impl<F: Fn(&[f64], f64) -> f64 + Send + Sync> FnCurvature<F> {
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self { f, label: label.into() }
    }
}

impl<F: Fn(&[f64], f64) -> f64 + Send + Sync> Curvature for FnCurvature<F> {
    fn value(&self, x: &[f64], z: f64) -> f64 {
        (self.f)(x, z)
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_roundtrip_and_bounds() {
        let b = Builtin::from_parts("tanh-height", &[1.0, 0.1, 1.5]).unwrap();
        assert_eq!(Builtin::from_parts(b.name(), &b.params()).unwrap(), b);
        assert_eq!(b.bounds(), (0.9, 1.1));
        assert!(Builtin::from_parts("constant", &[0.0]).is_err());
        assert!(Builtin::from_parts("sin-bump", &[1.0]).is_err());
        assert!(Builtin::from_parts("nope", &[]).is_err());
    }

    #[test]
    fn analytic_dz_matches_differences() {
        let b = Builtin::TanhHeight {
            base: 1.0,
            amp: 0.1,
            center: 1.5,
        };
        let copy = b.clone();
        let f = FnCurvature::new("copy", move |x: &[f64], z| copy.value(x, z));
        for z in [-1.0, 0.5, 1.5, 3.0] {
            assert!((b.dz(&[0.0, 0.0], z) - f.dz(&[0.0, 0.0], z)).abs() < 1e-8);
        }
    }

    #[test]
    fn sin_bump_is_pinched() {
        let b = Builtin::SinBump { base: 1.0, amp: 0.2 };
        for x in [[1.2, 0.0], [-1.5, 3.0], [0.0, 0.0]] {
            let v = b.value(&x, 0.0);
            assert!((0.8..=1.2).contains(&v));
        }
    }
}
