//! Randomized checks of the algebraic inequalities behind the estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{sigma12_raw, sigma2_of_matrix, sigma_k, PrincipalCurvatures};
use crate::verify::radial::radial_sigma2;

/// `Γ₂` samples are drawn uniformly from `[BOX_LO, BOX_HI]ⁿ` and rejected outside the cone.
pub const BOX_LO: f64 = -1.0;
pub const BOX_HI: f64 = 3.0;
/// Relative slack for the MacLaurin comparison (rounding only).
pub const MACLAURIN_REL_TOL: f64 = 1e-12;
/// Relative tolerance of the homogeneity identities.
pub const HOMOGENEITY_REL_TOL: f64 = 1e-12;

const MAX_ATTEMPTS_PER_SAMPLE: usize = 10_000;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One `Γ₂` sample by rejection.
pub fn sample_gamma2(n: usize, rng: &mut impl Rng) -> Result<PrincipalCurvatures> {
    for _ in 0..MAX_ATTEMPTS_PER_SAMPLE {
        let l: Vec<f64> = (0..n).map(|_| rng.random_range(BOX_LO..BOX_HI)).collect();
        let pc = PrincipalCurvatures::from_lambdas(l);
        if pc.is_admissible() {
            return Ok(pc);
        }
    }
    Err(Error::SearchFailure(format!("no admissible sample in {MAX_ATTEMPTS_PER_SAMPLE} draws (n = {n})")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaclaurinReport {
    pub dim: usize,
    pub samples: usize,
    pub violations: usize,
    /// `max σ₂ / ((n-1)/(2n) σ₁²)`; at most 1.
    pub max_ratio: f64,
}

/// `σ₂ ≤ (n-1)/(2n) σ₁²` on random `Γ₂` samples.
pub fn maclaurin_check(n: usize, samples: usize, seed: u64) -> Result<MaclaurinReport> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {n}")));
    }
    let mut rng = rng(seed);
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    for _ in 0..samples {
        let pc = sample_gamma2(n, &mut rng)?;
        let bound = (n as f64 - 1.0) / (2.0 * n as f64) * pc.sigma1() * pc.sigma1();
        max_ratio = max_ratio.max(pc.sigma2() / bound);
        if pc.sigma2() > bound * (1.0 + MACLAURIN_REL_TOL) {
            violations += 1;
        }
    }
    Ok(MaclaurinReport {
        dim: n,
        samples,
        violations,
        max_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IltCheck {
    pub holds: bool,
    /// `Σ_{k≠i₀} σ_{1,k} λ_k² / (σ_{1,i₀} λ_{i₀}²)`, `∞` when the denominator vanishes.
    pub ratio: f64,
}

/// Checks `ε σ_{1,i₀} λ_{i₀}² ≤ Σ_{k≠i₀} σ_{1,k} λ_k²` for an index `i₀` into
/// `pc.lambdas()` (sorted descending) with `λ_{i₀} ≤ 0`.
pub fn ilt_check(pc: &PrincipalCurvatures, i0: usize, eps: f64) -> Result<IltCheck> {
    if !pc.is_admissible() {
        return Err(Error::Precondition(format!(
            "curvatures not admissible (sigma1 = {}, sigma2 = {})",
            pc.sigma1(),
            pc.sigma2()
        )));
    }
    let l = pc.lambdas();
    if i0 >= l.len() {
        return Err(Error::Domain(format!("index {i0} out of range for n = {}", l.len())));
    }
    if l[i0] > 0.0 {
        return Err(Error::Hypothesis(format!("lambda[{i0}] = {} is positive", l[i0])));
    }
    let s = pc.sigma1_partials();
    let rhs: f64 = (0..l.len()).filter(|&k| k != i0).map(|k| s[k] * l[k] * l[k]).sum();
    let denom = s[i0] * l[i0] * l[i0];
    let ratio = if denom == 0.0 { f64::INFINITY } else { rhs / denom };
    Ok(IltCheck {
        holds: eps * denom <= rhs,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IltSurvey {
    pub dim: usize,
    pub samples: usize,
    pub min_ratio: f64,
    pub mean_ratio: f64,
    /// Admissible draws rejected for having no nonpositive curvature.
    pub skipped: usize,
}

/// Draws `samples` admissible `λ` with a nonpositive entry and records the ILT ratio.
pub fn ilt_survey(n: usize, samples: usize, seed: u64) -> Result<IltSurvey> {
    if n < 3 {
        return Err(Error::Domain(format!(
            "in dimension {n} every admissible curvature vector is positive"
        )));
    }
    let mut rng = rng(seed);
    let mut min_ratio = f64::INFINITY;
    let mut sum = 0.0;
    let mut kept = 0;
    let mut skipped = 0;
    while kept < samples {
        let pc = sample_gamma2(n, &mut rng)?;
        let i0 = n - 1;
        if pc.lambdas()[i0] > 0.0 {
            skipped += 1;
            if skipped > MAX_ATTEMPTS_PER_SAMPLE * samples.max(1) {
                return Err(Error::SearchFailure("no admissible sample with a nonpositive entry".into()));
            }
            continue;
        }
        let r = ilt_check(&pc, i0, 0.0)?.ratio;
        min_ratio = min_ratio.min(r);
        if r.is_finite() {
            sum += r;
        }
        kept += 1;
    }
    Ok(IltSurvey {
        dim: n,
        samples,
        min_ratio,
        mean_ratio: sum / samples.max(1) as f64,
        skipped,
    })
}

/// Smallest observed ILT ratio: an upper bound for the best constant `ε(n)`.
pub fn empirical_ilt_epsilon(n: usize, samples: usize, seed: u64) -> Result<f64> {
    Ok(ilt_survey(n, samples, seed)?.min_ratio)
}

/// Counts failures of [`ilt_check`] at `eps` over fresh qualifying samples.
pub fn ilt_violations(n: usize, samples: usize, eps: f64, seed: u64) -> Result<usize> {
    let mut rng = rng(seed);
    let mut kept = 0;
    let mut violations = 0;
    while kept < samples {
        let pc = sample_gamma2(n, &mut rng)?;
        if pc.lambdas()[n - 1] > 0.0 {
            continue;
        }
        if !ilt_check(&pc, n - 1, eps)?.holds {
            violations += 1;
        }
        kept += 1;
    }
    Ok(violations)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneityReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest `|f(cλ) - c^k f(λ)| / scale` seen.
    pub max_rel_error: f64,
}

/// `σ_k(cλ) = c^k σ_k(λ)` for every evaluator: the generic `σ_k`, the sorted
/// curvature record, the matrix route, the jet route and the radial formula.
pub fn homogeneity_check(n: usize, samples: usize, seed: u64) -> Result<HomogeneityReport> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {n}")));
    }
    let mut rng = rng(seed);
    let mut violations = 0;
    let mut max_rel = 0.0f64;
    let mut check = |scaled: f64, base: f64, c: f64, k: i32, scale: f64| {
        let expected = c.powi(k) * base;
        let rel = (scaled - expected).abs() / (c.powi(k) * scale).max(f64::MIN_POSITIVE);
        max_rel = max_rel.max(rel);
        if rel > HOMOGENEITY_REL_TOL {
            violations += 1;
        }
    };
    for _ in 0..samples {
        let l: Vec<f64> = (0..n).map(|_| rng.random_range(BOX_LO..BOX_HI)).collect();
        let c: f64 = rng.random_range(0.1..10.0);
        let cl: Vec<f64> = l.iter().map(|v| c * v).collect();
        let abs: Vec<f64> = l.iter().map(|v| v.abs()).collect();
        for k in 0..=n {
            check(sigma_k(&cl, k), sigma_k(&l, k), c, k as i32, sigma_k(&abs, k));
        }
        let (a, b) = (PrincipalCurvatures::from_lambdas(l.clone()), PrincipalCurvatures::from_lambdas(cl.clone()));
        check(b.sigma1(), a.sigma1(), c, 1, sigma_k(&abs, 1));
        check(b.sigma2(), a.sigma2(), c, 2, sigma_k(&abs, 2));
        for (sb, sa) in b.sigma1_partials().iter().zip(a.sigma1_partials()) {
            check(*sb, *sa, c, 1, sigma_k(&abs, 1));
        }
        // The trace identity ½(tr² - tr A²) rounds relative to tr² + tr A², not σ₂(|λ|).
        let trace_scale = sigma_k(&abs, 2) + l.iter().map(|v| v * v).sum::<f64>();
        let diag = |v: &[f64]| nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v));
        check(sigma2_of_matrix(&diag(&cl)), sigma2_of_matrix(&diag(&l)), c, 2, trace_scale);
        let zero = vec![0.0; n];
        let flat = |v: &[f64]| {
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                h[i * n + i] = v[i];
            }
            h
        };
        let (s1a, s2a) = sigma12_raw(&zero, &flat(&l)).expect("zero gradient");
        let (s1b, s2b) = sigma12_raw(&zero, &flat(&cl)).expect("zero gradient");
        check(s1b, s1a, c, 1, sigma_k(&abs, 1));
        check(s2b, s2a, c, 2, trace_scale);
        let rad_scale = radial_sigma2(n, abs[0], abs[1]).abs() + 2.0 * abs[0] * abs[1] + abs[1] * abs[1] * n as f64;
        check(radial_sigma2(n, cl[0], cl[1]), radial_sigma2(n, l[0], l[1]), c, 2, rad_scale);
    }
    Ok(HomogeneityReport {
        samples,
        violations,
        max_rel_error: max_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ilt_example_ratio() {
        let pc = PrincipalCurvatures::from_lambdas(vec![2.0, 2.0, -0.5]);
        let c = ilt_check(&pc, 2, 1.0).unwrap();
        assert!((c.ratio - 12.0).abs() < 1e-12);
        assert!(c.holds);
        assert!(!ilt_check(&pc, 2, 12.5).unwrap().holds);
        assert!(matches!(ilt_check(&pc, 0, 1.0), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn ilt_zero_entry_is_vacuous() {
        let pc = PrincipalCurvatures::from_lambdas(vec![1.0, 1.0, 0.0]);
        let c = ilt_check(&pc, 2, 1e6).unwrap();
        assert!(c.holds && c.ratio.is_infinite());
    }

    #[test]
    fn planar_cone_has_no_nonpositive_entry() {
        assert!(matches!(empirical_ilt_epsilon(2, 10_000, 1), Err(Error::Domain(_))));
        let mut r = rng(3);
        for _ in 0..1000 {
            let pc = sample_gamma2(2, &mut r).unwrap();
            assert!(pc.lambdas().iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn ilt_ratio_is_scale_invariant() {
        let pc = PrincipalCurvatures::from_lambdas(vec![2.5, 1.5, -0.4]);
        let scaled = PrincipalCurvatures::from_lambdas(vec![2.5 * 7.0, 1.5 * 7.0, -0.4 * 7.0]);
        let (a, b) = (ilt_check(&pc, 2, 0.0).unwrap().ratio, ilt_check(&scaled, 2, 0.0).unwrap().ratio);
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn non_admissible_input_is_rejected() {
        let pc = PrincipalCurvatures::from_lambdas(vec![1.0, -2.0, -2.0]);
        assert!(matches!(ilt_check(&pc, 2, 1.0), Err(Error::Precondition(_))));
    }
}
