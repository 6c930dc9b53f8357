//! Discrete comparison-principle experiments.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::barriers::{alpha_for_pinching, Barrier, Hyperboloid};
use crate::curvature::{Builtin, Curvature};
use crate::dirichlet::BARRIER_TOL_FACTOR;
use crate::error::{Error, Result};
use crate::geometry::{sigma12_raw, MAX_DIM};
use crate::grid::{centered_jet, GridSpec};
use crate::verify::inequalities::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingReport {
    /// `min (u - v)` over the closed grid.
    pub min_difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Heights sampled per node when checking `∂H/∂z ≥ 0` on the slab between `v` and `u`.
const SLAB_SAMPLES: usize = 9;

/// Given a subsolution `v` (admissible, `H₂[v] ≥ H(·,v)`) and a supersolution `u`
/// (`H₂[u] ≤ H(·,u)` where admissible) with `v ≤ u` on the boundary and
/// `∂H/∂z ≥ 0`, reports `min(u - v)` over the grid. Hypotheses are checked at grid
/// nodes with tolerance `10h²`; a failed hypothesis is an error naming it.
pub fn comparison_experiment(
    curvature: &dyn Curvature,
    v: &dyn Barrier,
    u: &dyn Barrier,
    spec: &GridSpec,
) -> Result<OrderingReport> {
    let tol = BARRIER_TOL_FACTOR * spec.spacing() * spec.spacing();
    let n = spec.dim();
    if v.dim() != n || u.dim() != n {
        return Err(Error::Domain("dimension mismatch between grid and functions".into()));
    }
    let vs = v.sample(spec);
    let us = u.sample(spec);
    let (vv, uu) = (vs.values(), us.values());

    let hz_min = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let x = spec.point(i);
            let (lo, hi) = (vv[i].min(uu[i]), vv[i].max(uu[i]));
            (0..SLAB_SAMPLES)
                .map(|s| curvature.dz(&x, lo + (hi - lo) * s as f64 / (SLAB_SAMPLES - 1) as f64))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    if hz_min < 0.0 {
        return Err(Error::Hypothesis(format!(
            "dH/dz >= 0 fails on the slab (min {hz_min:.3e})"
        )));
    }

    let interior: Vec<usize> = (0..spec.len()).filter(|&i| !spec.is_boundary(i)).collect();
    let jets: Vec<(Option<(f64, f64)>, Option<(f64, f64)>)> = interior
        .par_iter()
        .map(|&i| {
            let mut g = [0.0; MAX_DIM];
            let mut h = [0.0; MAX_DIM * MAX_DIM];
            centered_jet(vv, spec, i, &mut g[..n], &mut h[..n * n]);
            let a = sigma12_raw(&g[..n], &h[..n * n]);
            centered_jet(uu, spec, i, &mut g[..n], &mut h[..n * n]);
            let b = sigma12_raw(&g[..n], &h[..n * n]);
            (a, b)
        })
        .collect();
    for (&i, (jv, ju)) in interior.iter().zip(&jets) {
        let x = spec.point(i);
        match jv {
            Some((s1, s2)) if *s1 > 0.0 && *s2 > 0.0 => {
                if *s2 < curvature.value(&x, vv[i]) - tol {
                    return Err(Error::Hypothesis(format!(
                        "subsolution inequality H2[v] >= H(x,v) fails at {x:?} ({s2:.6} < {:.6})",
                        curvature.value(&x, vv[i])
                    )));
                }
            }
            _ => {
                return Err(Error::Hypothesis(format!(
                    "v is not spacelike and admissible at {x:?}"
                )))
            }
        }
        match ju {
            None => {
                return Err(Error::Hypothesis(format!("u is not spacelike at {x:?}")));
            }
            Some((s1, s2)) if *s1 > 0.0 && *s2 > 0.0 && *s2 > curvature.value(&x, uu[i]) + tol => {
                return Err(Error::Hypothesis(format!(
                    "supersolution inequality H2[u] <= H(x,u) fails at {x:?} ({s2:.6} > {:.6})",
                    curvature.value(&x, uu[i])
                )));
            }
            _ => {}
        }
    }
    for i in (0..spec.len()).filter(|&i| spec.is_boundary(i)) {
        if vv[i] > uu[i] + tol {
            return Err(Error::Hypothesis(format!(
                "boundary ordering v <= u fails at {:?} (v - u = {:.3e})",
                spec.point(i),
                vv[i] - uu[i]
            )));
        }
    }
    let min_difference = uu
        .iter()
        .zip(vv)
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min);
    Ok(OrderingReport {
        min_difference,
        tolerance: tol,
        pass: min_difference >= -tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSuiteReport {
    pub passed: usize,
    pub failed: usize,
    /// Candidate pairs rejected by the hypothesis checks.
    pub rejected: usize,
    /// Smallest `min(u - v) + tol` over the accepted pairs.
    pub worst_margin: f64,
}

/// Randomized pairs of shifted hyperboloids: `v` with `σ₂ ≥ sup H`, `u` with
/// `σ₂ ≤ inf H`, and `H` either constant or increasing in `z`. Candidates
/// violating a hypothesis are rejected and counted; the suite runs until
/// `pairs` candidates were accepted.
pub fn comparison_suite(pairs: usize, spacing: f64, seed: u64) -> Result<ComparisonSuiteReport> {
    let mut r = rng(seed);
    let mut report = ComparisonSuiteReport {
        passed: 0,
        failed: 0,
        rejected: 0,
        worst_margin: f64::INFINITY,
    };
    let mut attempts = 0;
    while report.passed + report.failed < pairs {
        attempts += 1;
        if attempts > 100 * pairs.max(1) {
            return Err(Error::SearchFailure(format!(
                "only {} of {pairs} candidate pairs met the hypotheses",
                report.passed + report.failed
            )));
        }
        let curvature: Arc<dyn Curvature> = if r.random_bool(0.5) {
            Arc::new(Builtin::Constant {
                h: r.random_range(0.8..1.2),
            })
        } else {
            Arc::new(Builtin::TanhHeight {
                base: r.random_range(0.9..1.1),
                amp: r.random_range(0.0..0.1),
                center: r.random_range(0.0..2.0),
            })
        };
        let (hmin, hmax) = sample_bounds(&*curvature);
        let radius = [1.0, 1.5, 2.0][r.random_range(0..3)];
        let spec = GridSpec::centered_box(2, radius, spacing)?;
        let v = Hyperboloid::new(
            alpha_for_pinching(hmax * r.random_range(1.0..1.5), 2)?,
            vec![r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)],
            r.random_range(-0.2..0.2),
        )?;
        let u = Hyperboloid::new(
            alpha_for_pinching(hmin * r.random_range(0.6..1.0), 2)?,
            vec![r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)],
            r.random_range(-0.2..0.6),
        )?;
        match comparison_experiment(&*curvature, &v, &u, &spec) {
            Ok(rep) => {
                report.worst_margin = report.worst_margin.min(rep.min_difference + rep.tolerance);
                if rep.pass {
                    report.passed += 1;
                } else {
                    report.failed += 1;
                }
            }
            Err(Error::Hypothesis(_)) => report.rejected += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

fn sample_bounds(h: &dyn Curvature) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..=400 {
        let z = -10.0 + 20.0 * k as f64 / 400.0;
        let v = h.value(&[0.0, 0.0], z);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::hyperboloid_for_pinching;

    #[test]
    fn ordered_hyperboloids_pass() {
        let spec = GridSpec::centered_box(2, 2.0, 1.0 / 16.0).unwrap();
        let v = hyperboloid_for_pinching(1.2, 2).unwrap();
        let u = hyperboloid_for_pinching(0.8, 2).unwrap();
        let rep = comparison_experiment(&Builtin::Constant { h: 1.0 }, &v, &u, &spec).unwrap();
        assert!(rep.pass && rep.min_difference > 0.0);
    }

    #[test]
    fn identical_pair_gives_zero() {
        let spec = GridSpec::centered_box(2, 1.0, 1.0 / 16.0).unwrap();
        let v = hyperboloid_for_pinching(1.0, 2).unwrap();
        let rep = comparison_experiment(&Builtin::Constant { h: 1.0 }, &v, &v, &spec).unwrap();
        assert_eq!(rep.min_difference, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn violated_hypotheses_are_rejected() {
        let spec = GridSpec::centered_box(2, 1.0, 1.0 / 16.0).unwrap();
        let v = hyperboloid_for_pinching(0.8, 2).unwrap();
        let u = hyperboloid_for_pinching(1.2, 2).unwrap();
        // v is not a subsolution of H ≡ 1.
        assert!(matches!(
            comparison_experiment(&Builtin::Constant { h: 1.0 }, &v, &u, &spec),
            Err(Error::Hypothesis(_))
        ));
        let decreasing = Builtin::TanhHeight {
            base: 1.0,
            amp: -0.1,
            center: 0.0,
        };
        let v = hyperboloid_for_pinching(1.2, 2).unwrap();
        let u = hyperboloid_for_pinching(0.8, 2).unwrap();
        let err = comparison_experiment(&decreasing, &v, &u, &spec).unwrap_err();
        assert!(err.to_string().contains("dH/dz"));
    }
}
