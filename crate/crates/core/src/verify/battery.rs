//! The full randomized battery behind the `verify` subcommand.

use rand::Rng;

use crate::barriers::alpha_for_pinching;
use crate::curvature::Builtin;
use crate::error::Result;
use crate::verify::comparison::comparison_suite;
use crate::verify::inequalities::{
    homogeneity_check, ilt_survey, ilt_violations, maclaurin_check, rng, HOMOGENEITY_REL_TOL,
};
use crate::verify::radial::radial_shoot;

#[derive(Debug, Clone)]
pub struct BatteryOptions {
    pub seed: u64,
    pub maclaurin_samples: usize,
    pub ilt_samples: usize,
    /// Fraction of the empirical constant used for the ILT re-check.
    pub ilt_safety: f64,
    pub homogeneity_samples: usize,
    pub comparison_pairs: usize,
    pub comparison_spacing: f64,
    pub radial_cases: usize,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        Self {
            seed: 20240607,
            maclaurin_samples: 10_000,
            ilt_samples: 100_000,
            ilt_safety: 0.9,
            homogeneity_samples: 10_000,
            comparison_pairs: 100,
            comparison_spacing: 1.0 / 16.0,
            radial_cases: 10,
        }
    }
}

/// One line of the pass/fail table plus raw statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: String,
    pub pass: bool,
    pub samples: usize,
    pub violations: usize,
    /// Suite-specific statistic (max ratio, min ratio, max error, ...).
    pub statistic: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryReport {
    pub suites: Vec<SuiteResult>,
}

impl BatteryReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.pass)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            out.push_str(&format!(
                "{:<28} {:<4} samples={:<7} violations={:<4} stat={:.6e}  {}\n",
                s.name,
                if s.pass { "PASS" } else { "FAIL" },
                s.samples,
                s.violations,
                s.statistic,
                s.detail
            ));
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("suite,pass,samples,violations,statistic\n");
        for s in &self.suites {
            out.push_str(&format!(
                "{},{},{},{},{:.17e}\n",
                s.name, s.pass, s.samples, s.violations, s.statistic
            ));
        }
        out
    }
}

/// `σ₂ ≤ (n-1)/(2n)σ₁²` for `n = 2, 3, 4`.
pub fn maclaurin_suites(opts: &BatteryOptions) -> Result<Vec<SuiteResult>> {
    (2..=4)
        .map(|n| {
            let r = maclaurin_check(n, opts.maclaurin_samples, opts.seed.wrapping_add(n as u64))?;
            Ok(SuiteResult {
                name: format!("maclaurin n={n}"),
                pass: r.violations == 0,
                samples: r.samples,
                violations: r.violations,
                statistic: r.max_ratio,
                detail: "stat = max sigma2 / bound".into(),
            })
        })
        .collect()
}

/// Empirical ILT constant for `n = 3` and a re-check at `safety · ε` on fresh samples.
pub fn ilt_suite(opts: &BatteryOptions) -> Result<SuiteResult> {
    let survey = ilt_survey(3, opts.ilt_samples, opts.seed.wrapping_add(100))?;
    let eps = opts.ilt_safety * survey.min_ratio;
    let violations = ilt_violations(3, opts.ilt_samples, eps, opts.seed.wrapping_add(101))?;
    Ok(SuiteResult {
        name: "ilt n=3".into(),
        pass: violations == 0 && survey.min_ratio > 0.0,
        samples: opts.ilt_samples,
        violations,
        statistic: survey.min_ratio,
        detail: format!(
            "stat = empirical eps; re-checked at {:.6e} on fresh samples (mean ratio {:.3e})",
            eps, survey.mean_ratio
        ),
    })
}

pub fn homogeneity_suite(opts: &BatteryOptions) -> Result<SuiteResult> {
    let mut violations = 0;
    let mut worst = 0.0f64;
    for n in 2..=4 {
        let r = homogeneity_check(n, opts.homogeneity_samples, opts.seed.wrapping_add(200 + n as u64))?;
        violations += r.violations;
        worst = worst.max(r.max_rel_error);
    }
    Ok(SuiteResult {
        name: "sigma_k homogeneity".into(),
        pass: violations == 0,
        samples: 3 * opts.homogeneity_samples,
        violations,
        statistic: worst,
        detail: format!("stat = max relative error (tol {HOMOGENEITY_REL_TOL:e})"),
    })
}

pub fn comparison_suite_result(opts: &BatteryOptions) -> Result<SuiteResult> {
    let r = comparison_suite(opts.comparison_pairs, opts.comparison_spacing, opts.seed.wrapping_add(300))?;
    Ok(SuiteResult {
        name: "comparison principle".into(),
        pass: r.failed == 0 && r.passed == opts.comparison_pairs,
        samples: r.passed + r.failed,
        violations: r.failed,
        statistic: r.worst_margin,
        detail: format!("stat = min(u - v) + 10h^2; {} candidates rejected by hypotheses", r.rejected),
    })
}

/// Shooting reproduces `√(α² + r²)` for random `(n, h)`.
pub fn radial_suite(opts: &BatteryOptions) -> Result<SuiteResult> {
    let mut r = rng(opts.seed.wrapping_add(400));
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..opts.radial_cases {
        let n = r.random_range(2..=4usize);
        let h = r.random_range(0.5..2.0);
        let big_r = r.random_range(1.0..4.0);
        let alpha = alpha_for_pinching(h, n)?;
        let exact = |s: f64| (alpha * alpha + s * s).sqrt();
        let prof = radial_shoot(&Builtin::Constant { h }, n, big_r, exact(big_r))?;
        let err = prof
            .r()
            .iter()
            .zip(prof.u())
            .map(|(s, u)| (u - exact(*s)).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        if err > 1e-8 {
            violations += 1;
        }
    }
    Ok(SuiteResult {
        name: "radial hyperboloids".into(),
        pass: violations == 0,
        samples: opts.radial_cases,
        violations,
        statistic: worst,
        detail: "stat = max |u - sqrt(alpha^2 + r^2)| (tol 1e-8)".into(),
    })
}

pub fn run_battery(opts: &BatteryOptions) -> Result<BatteryReport> {
    let mut suites = maclaurin_suites(opts)?;
    suites.push(ilt_suite(opts)?);
    suites.push(homogeneity_suite(opts)?);
    suites.push(comparison_suite_result(opts)?);
    suites.push(radial_suite(opts)?);
    Ok(BatteryReport { suites })
}
