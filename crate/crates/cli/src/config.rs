//! Flat `section.key = value` run configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use scalcurv::barriers::check_pinching;
use scalcurv::curvature::Builtin;
use scalcurv::dirichlet::SolverOptions;
use scalcurv::entire::EntireOptions;
use scalcurv::geometry::MAX_DIM;
use scalcurv::verify::BatteryOptions;
use scalcurv::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    SolveDirichlet,
    SolveEntire,
    Barriers,
    OracleRadial,
    Verify,
}

impl Subcommand {
    pub const ALL: [Subcommand; 5] = [
        Subcommand::SolveDirichlet,
        Subcommand::SolveEntire,
        Subcommand::Barriers,
        Subcommand::OracleRadial,
        Subcommand::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::SolveDirichlet => "solve-dirichlet",
            Subcommand::SolveEntire => "solve-entire",
            Subcommand::Barriers => "barriers",
            Subcommand::OracleRadial => "oracle-radial",
            Subcommand::Verify => "verify",
        }
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::parse("run.subcommand", format!("unknown subcommand {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierKind {
    /// Centered hyperboloids with `σ₂ = h1` (lower) and `σ₂ = h2` (upper).
    Pinching,
    /// Explicit `barrier.lower.*` / `barrier.upper.*` hyperboloids.
    Hyperboloid,
    /// Envelopes built from the asymptotic data `f`.
    Treibergs,
    /// Barrier description files as written by the `barriers` subcommand.
    SpecFiles,
    /// Sampled grid CSV files.
    GridFiles,
}

impl BarrierKind {
    pub const ALL: [BarrierKind; 5] = [
        BarrierKind::Pinching,
        BarrierKind::Hyperboloid,
        BarrierKind::Treibergs,
        BarrierKind::SpecFiles,
        BarrierKind::GridFiles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BarrierKind::Pinching => "pinching",
            BarrierKind::Hyperboloid => "hyperboloid",
            BarrierKind::Treibergs => "treibergs",
            BarrierKind::SpecFiles => "spec-files",
            BarrierKind::GridFiles => "grid-files",
        }
    }
}

impl FromStr for BarrierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BarrierKind::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::parse("barrier.kind", format!("unknown barrier kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperboloidParams {
    pub alpha: f64,
    /// Empty means the origin.
    pub shift: Vec<f64>,
    pub lift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub dim: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// 0 lets rayon decide.
    pub threads: usize,

    pub curvature_name: String,
    pub curvature_params: Vec<f64>,
    /// Sampled `H(x)` grid; overrides the builtin when set.
    pub curvature_file: Option<PathBuf>,

    pub barrier_kind: BarrierKind,
    pub h1: f64,
    pub h2: f64,
    pub lower: HyperboloidParams,
    pub upper: HyperboloidParams,
    /// `f(θ) = a₀ + Σ aₖ cos kθ + bₖ sin kθ` as `a₀, a₁, b₁, a₂, b₂, ...` (n = 2).
    pub f_fourier: Vec<f64>,
    /// Rows `y₁..yₙ, f, g₁..gₙ` (point, value, tangential gradient).
    pub f_file: Option<PathBuf>,
    pub sphere_samples: usize,
    pub lower_file: Option<PathBuf>,
    pub upper_file: Option<PathBuf>,

    /// Box half-width for `solve-dirichlet`, `barriers` and `oracle-radial`.
    pub radius: f64,
    pub r0: f64,
    pub schedule: Vec<f64>,
    pub stages: usize,
    pub spacing: f64,

    pub solver_tol: f64,
    pub intermediate_tol: f64,
    pub max_newton: usize,
    pub continuation: Vec<f64>,
    pub damping: Vec<f64>,
    pub shrink: f64,
    pub min_step: f64,
    pub margin: f64,
    pub check_barriers: bool,
    pub k_samples: usize,

    pub entire_tol: f64,
    pub ring_directions: usize,

    /// Boundary value for the shooting oracle; defaults to the lower barrier at `radius·e₁`.
    pub oracle_boundary: Option<f64>,

    pub maclaurin_samples: usize,
    pub ilt_samples: usize,
    pub ilt_safety: f64,
    pub homogeneity_samples: usize,
    pub comparison_pairs: usize,
    pub comparison_spacing: f64,
    pub radial_cases: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverOptions::default();
        let entire = EntireOptions::default();
        let battery = BatteryOptions::default();
        Self {
            subcommand: Subcommand::SolveEntire,
            dim: 2,
            seed: battery.seed,
            out: PathBuf::from("scalcurv-out"),
            threads: 0,
            curvature_name: "constant".into(),
            curvature_params: vec![1.0],
            curvature_file: None,
            barrier_kind: BarrierKind::Pinching,
            h1: 1.2,
            h2: 0.8,
            lower: HyperboloidParams {
                alpha: 1.0,
                shift: Vec::new(),
                lift: 0.0,
            },
            upper: HyperboloidParams {
                alpha: 1.0,
                shift: Vec::new(),
                lift: 0.0,
            },
            f_fourier: vec![0.0],
            f_file: None,
            sphere_samples: 0,
            lower_file: None,
            upper_file: None,
            radius: 3.0,
            r0: entire.r0,
            schedule: Vec::new(),
            stages: entire.default_stages,
            spacing: entire.spacing,
            solver_tol: solver.tol,
            intermediate_tol: solver.intermediate_tol,
            max_newton: solver.max_newton,
            continuation: solver.schedule.clone(),
            damping: solver.damping.clone(),
            shrink: solver.shrink,
            min_step: solver.min_step,
            margin: solver.margin,
            check_barriers: solver.check_barriers,
            k_samples: solver.k_samples,
            entire_tol: entire.tol,
            ring_directions: entire.ring_directions,
            oracle_boundary: None,
            maclaurin_samples: battery.maclaurin_samples,
            ilt_samples: battery.ilt_samples,
            ilt_safety: battery.ilt_safety,
            homogeneity_samples: battery.homogeneity_samples,
            comparison_pairs: battery.comparison_pairs,
            comparison_spacing: battery.comparison_spacing,
            radial_cases: battery.radial_cases,
        }
    }
}

/// Every key, in serialization order.
pub const KEYS: &[&str] = &[
    "run.subcommand",
    "run.dim",
    "run.seed",
    "run.out",
    "run.threads",
    "curvature.name",
    "curvature.params",
    "curvature.file",
    "barrier.kind",
    "barrier.h1",
    "barrier.h2",
    "barrier.lower.alpha",
    "barrier.lower.shift",
    "barrier.lower.lift",
    "barrier.upper.alpha",
    "barrier.upper.shift",
    "barrier.upper.lift",
    "barrier.f.fourier",
    "barrier.f.file",
    "barrier.f.samples",
    "barrier.lower.file",
    "barrier.upper.file",
    "domain.radius",
    "domain.r0",
    "domain.schedule",
    "domain.stages",
    "domain.spacing",
    "solver.tol",
    "solver.intermediate_tol",
    "solver.max_newton",
    "solver.continuation",
    "solver.damping",
    "solver.shrink",
    "solver.min_step",
    "solver.margin",
    "solver.check_barriers",
    "solver.k_samples",
    "entire.tol",
    "entire.ring_directions",
    "oracle.boundary",
    "verify.maclaurin_samples",
    "verify.ilt_samples",
    "verify.ilt_safety",
    "verify.homogeneity_samples",
    "verify.comparison_pairs",
    "verify.comparison_spacing",
    "verify.radial_cases",
];

fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| Error::parse(key, format!("cannot parse {v:?}: {e}")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|t| num(key, t.trim())).collect()
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn opt_num(key: &str, v: &str) -> Result<Option<f64>> {
    if v.is_empty() {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Parses `key = value` lines on top of the defaults. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse(format!("line {}", lineno + 1), format!("expected key = value, got {line:?}"))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    /// Sets one key; unknown keys and malformed values name the field.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "run.subcommand" => self.subcommand = v.parse()?,
            "run.dim" => self.dim = num(key, v)?,
            "run.seed" => self.seed = num(key, v)?,
            "run.out" => self.out = PathBuf::from(v),
            "run.threads" => self.threads = num(key, v)?,
            "curvature.name" => self.curvature_name = v.to_string(),
            "curvature.params" => self.curvature_params = list(key, v)?,
            "curvature.file" => self.curvature_file = path(v),
            "barrier.kind" => self.barrier_kind = v.parse()?,
            "barrier.h1" => self.h1 = num(key, v)?,
            "barrier.h2" => self.h2 = num(key, v)?,
            "barrier.lower.alpha" => self.lower.alpha = num(key, v)?,
            "barrier.lower.shift" => self.lower.shift = list(key, v)?,
            "barrier.lower.lift" => self.lower.lift = num(key, v)?,
            "barrier.upper.alpha" => self.upper.alpha = num(key, v)?,
            "barrier.upper.shift" => self.upper.shift = list(key, v)?,
            "barrier.upper.lift" => self.upper.lift = num(key, v)?,
            "barrier.f.fourier" => self.f_fourier = list(key, v)?,
            "barrier.f.file" => self.f_file = path(v),
            "barrier.f.samples" => self.sphere_samples = num(key, v)?,
            "barrier.lower.file" => self.lower_file = path(v),
            "barrier.upper.file" => self.upper_file = path(v),
            "domain.radius" => self.radius = num(key, v)?,
            "domain.r0" => self.r0 = num(key, v)?,
            "domain.schedule" => self.schedule = list(key, v)?,
            "domain.stages" => self.stages = num(key, v)?,
            "domain.spacing" => self.spacing = num(key, v)?,
            "solver.tol" => self.solver_tol = num(key, v)?,
            "solver.intermediate_tol" => self.intermediate_tol = num(key, v)?,
            "solver.max_newton" => self.max_newton = num(key, v)?,
            "solver.continuation" => self.continuation = list(key, v)?,
            "solver.damping" => self.damping = list(key, v)?,
            "solver.shrink" => self.shrink = num(key, v)?,
            "solver.min_step" => self.min_step = num(key, v)?,
            "solver.margin" => self.margin = num(key, v)?,
            "solver.check_barriers" => self.check_barriers = num(key, v)?,
            "solver.k_samples" => self.k_samples = num(key, v)?,
            "entire.tol" => self.entire_tol = num(key, v)?,
            "entire.ring_directions" => self.ring_directions = num(key, v)?,
            "oracle.boundary" => self.oracle_boundary = opt_num(key, v)?,
            "verify.maclaurin_samples" => self.maclaurin_samples = num(key, v)?,
            "verify.ilt_samples" => self.ilt_samples = num(key, v)?,
            "verify.ilt_safety" => self.ilt_safety = num(key, v)?,
            "verify.homogeneity_samples" => self.homogeneity_samples = num(key, v)?,
            "verify.comparison_pairs" => self.comparison_pairs = num(key, v)?,
            "verify.comparison_spacing" => self.comparison_spacing = num(key, v)?,
            "verify.radial_cases" => self.radial_cases = num(key, v)?,
            other => return Err(Error::parse(other, "unknown configuration key")),
        }
        Ok(())
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "run.subcommand" => self.subcommand.name().into(),
            "run.dim" => self.dim.to_string(),
            "run.seed" => self.seed.to_string(),
            "run.out" => self.out.display().to_string(),
            "run.threads" => self.threads.to_string(),
            "curvature.name" => self.curvature_name.clone(),
            "curvature.params" => join(&self.curvature_params),
            "curvature.file" => show_path(&self.curvature_file),
            "barrier.kind" => self.barrier_kind.name().into(),
            "barrier.h1" => self.h1.to_string(),
            "barrier.h2" => self.h2.to_string(),
            "barrier.lower.alpha" => self.lower.alpha.to_string(),
            "barrier.lower.shift" => join(&self.lower.shift),
            "barrier.lower.lift" => self.lower.lift.to_string(),
            "barrier.upper.alpha" => self.upper.alpha.to_string(),
            "barrier.upper.shift" => join(&self.upper.shift),
            "barrier.upper.lift" => self.upper.lift.to_string(),
            "barrier.f.fourier" => join(&self.f_fourier),
            "barrier.f.file" => show_path(&self.f_file),
            "barrier.f.samples" => self.sphere_samples.to_string(),
            "barrier.lower.file" => show_path(&self.lower_file),
            "barrier.upper.file" => show_path(&self.upper_file),
            "domain.radius" => self.radius.to_string(),
            "domain.r0" => self.r0.to_string(),
            "domain.schedule" => join(&self.schedule),
            "domain.stages" => self.stages.to_string(),
            "domain.spacing" => self.spacing.to_string(),
            "solver.tol" => self.solver_tol.to_string(),
            "solver.intermediate_tol" => self.intermediate_tol.to_string(),
            "solver.max_newton" => self.max_newton.to_string(),
            "solver.continuation" => join(&self.continuation),
            "solver.damping" => join(&self.damping),
            "solver.shrink" => self.shrink.to_string(),
            "solver.min_step" => self.min_step.to_string(),
            "solver.margin" => self.margin.to_string(),
            "solver.check_barriers" => self.check_barriers.to_string(),
            "solver.k_samples" => self.k_samples.to_string(),
            "entire.tol" => self.entire_tol.to_string(),
            "entire.ring_directions" => self.ring_directions.to_string(),
            "oracle.boundary" => self.oracle_boundary.map(|b| b.to_string()).unwrap_or_default(),
            "verify.maclaurin_samples" => self.maclaurin_samples.to_string(),
            "verify.ilt_samples" => self.ilt_samples.to_string(),
            "verify.ilt_safety" => self.ilt_safety.to_string(),
            "verify.homogeneity_samples" => self.homogeneity_samples.to_string(),
            "verify.comparison_pairs" => self.comparison_pairs.to_string(),
            "verify.comparison_spacing" => self.comparison_spacing.to_string(),
            "verify.radial_cases" => self.radial_cases.to_string(),
            _ => unreachable!("key list and serializer out of sync: {key}"),
        }
    }

    /// Canonical text: every key once, in [`KEYS`] order. `f64` values use the
    /// shortest representation that parses back to the same bits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let _ = writeln!(s, "{key} = {}", self.value_of(key));
        }
        s
    }

    /// SHA-256 of the canonical text without `run.out` and `run.threads`,
    /// which do not affect results. Hex encoded.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for key in KEYS.iter().filter(|k| !matches!(**k, "run.out" | "run.threads")) {
            hasher.update(format!("{key} = {}\n", self.value_of(key)).as_bytes());
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn builtin(&self) -> Result<Builtin> {
        Builtin::from_parts(&self.curvature_name, &self.curvature_params)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver_tol,
            intermediate_tol: self.intermediate_tol,
            schedule: self.continuation.clone(),
            max_newton: self.max_newton,
            shrink: self.shrink,
            min_step: self.min_step,
            margin: self.margin,
            damping: self.damping.clone(),
            check_barriers: self.check_barriers,
            k_samples: self.k_samples,
            ..SolverOptions::default()
        }
    }

    pub fn entire_options(&self) -> EntireOptions {
        EntireOptions {
            r0: self.r0,
            spacing: self.spacing,
            schedule: (!self.schedule.is_empty()).then(|| self.schedule.clone()),
            default_stages: self.stages,
            tol: self.entire_tol,
            solver: self.solver_options(),
            ring_directions: self.ring_directions,
        }
    }

    pub fn battery_options(&self) -> BatteryOptions {
        BatteryOptions {
            seed: self.seed,
            maclaurin_samples: self.maclaurin_samples,
            ilt_samples: self.ilt_samples,
            ilt_safety: self.ilt_safety,
            homogeneity_samples: self.homogeneity_samples,
            comparison_pairs: self.comparison_pairs,
            comparison_spacing: self.comparison_spacing,
            radial_cases: self.radial_cases,
        }
    }

    /// Checks every field that the selected subcommand uses, before any work starts.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::parse(key, format!("must be positive and finite, got {v}")))
            }
        };
        if !(2..=MAX_DIM).contains(&self.dim) {
            return Err(Error::parse("run.dim", format!("must lie in 2..={MAX_DIM}, got {}", self.dim)));
        }
        if self.subcommand == Subcommand::Verify {
            positive("verify.comparison_spacing", self.comparison_spacing)?;
            if !(self.ilt_safety > 0.0 && self.ilt_safety <= 1.0) {
                return Err(Error::parse("verify.ilt_safety", "must lie in (0, 1]"));
            }
            return Ok(());
        }
        positive("domain.spacing", self.spacing)?;
        positive("domain.radius", self.radius)?;
        if self.uses_pinching() {
            check_pinching(self.h1, self.h2).map_err(|e| Error::parse("barrier.h1/barrier.h2", e.to_string()))?;
        }
        if self.curvature_file.is_none() {
            let b = self.builtin()?;
            if self.uses_pinching() {
                let (lo, hi) = b.bounds();
                if lo < self.h2 || hi > self.h1 {
                    return Err(Error::parse(
                        "curvature",
                        format!(
                            "{} ranges over [{lo}, {hi}], outside the pinching interval [{}, {}]",
                            b.name(),
                            self.h2,
                            self.h1
                        ),
                    ));
                }
            }
        }
        match self.barrier_kind {
            BarrierKind::Hyperboloid => {
                for (side, p) in [("lower", &self.lower), ("upper", &self.upper)] {
                    positive(&format!("barrier.{side}.alpha"), p.alpha)?;
                    if !p.shift.is_empty() && p.shift.len() != self.dim {
                        return Err(Error::parse(
                            format!("barrier.{side}.shift"),
                            format!("expected {} components", self.dim),
                        ));
                    }
                }
            }
            BarrierKind::Treibergs => {
                // Sphere sampling exists for S¹ and S² only.
                if self.dim > 3 {
                    return Err(Error::parse("run.dim", "treibergs barriers support n <= 3"));
                }
                if self.f_file.is_none() && (self.dim != 2 || self.f_fourier.len() % 2 == 0) {
                    return Err(Error::parse(
                        "barrier.f.fourier",
                        "needs n = 2 and an odd number of coefficients (a0, a1, b1, ...)",
                    ));
                }
            }
            BarrierKind::SpecFiles | BarrierKind::GridFiles => {
                if self.lower_file.is_none() || self.upper_file.is_none() {
                    return Err(Error::parse("barrier.lower.file", "both barrier files are required"));
                }
            }
            BarrierKind::Pinching => {}
        }
        let solver = self.solver_options();
        solver.validate().map_err(|e| Error::parse("solver", e.to_string()))?;
        if self.subcommand == Subcommand::SolveEntire {
            self.entire_options()
                .validate()
                .map_err(|e| Error::parse("domain", e.to_string()))?;
        }
        if let Some(b) = self.oracle_boundary {
            if !b.is_finite() {
                return Err(Error::parse("oracle.boundary", "must be finite"));
            }
        }
        Ok(())
    }

    fn uses_pinching(&self) -> bool {
        matches!(self.barrier_kind, BarrierKind::Pinching | BarrierKind::Treibergs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
        cfg.validate().unwrap();
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn every_key_is_settable() {
        let cfg = RunConfig::default();
        for key in KEYS {
            let mut c = cfg.clone();
            c.set(key, &cfg.value_of(key)).unwrap();
            assert_eq!(c, cfg, "{key}");
        }
    }

    #[test]
    fn errors_name_the_field() {
        let err = RunConfig::parse("domain.spacing = abc").unwrap_err();
        assert!(err.to_string().contains("domain.spacing"));
        let err = RunConfig::parse("solver.bogus = 1").unwrap_err();
        assert!(err.to_string().contains("solver.bogus"));
        let cfg = RunConfig::parse("barrier.h1 = 0.8\nbarrier.h2 = 1.2\ncurvature.params = 1").unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("pinching"), "{err}");
    }

    #[test]
    fn curvature_outside_pinching_rejected() {
        let cfg = RunConfig::parse("curvature.params = 1.5").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("curvature"));
    }
}
