//! Two independent expansion runs of the same problem should agree.

use crate::barriers::BarrierPair;
use crate::curvature::Curvature;
use crate::entire::{solve_entire, sup_difference_on_ball, EntireOptions, ExpansionRun};
use crate::error::{Error, Result};
use crate::grid::GridFunction;

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    /// `sup |u - v|` over the common inner ball.
    pub sup_difference: f64,
    pub final_residuals: (f64, f64),
    pub runs: (ExpansionRun, ExpansionRun),
    pub solutions: (GridFunction, GridFunction),
}

/// Heights sampled per node when checking `∂H/∂z ≥ 0`.
const SLAB_SAMPLES: usize = 9;

/// Runs `solve_entire` twice (e.g. with different damping or schedules) and
/// compares the results on `B_{R₀}` (the smaller of the two inner radii).
/// `∂H/∂z ≥ 0` is checked on the barrier slab over the first run's inner grid.
pub fn uniqueness_experiment(
    curvature: &dyn Curvature,
    barriers: &BarrierPair,
    opts_a: &EntireOptions,
    opts_b: &EntireOptions,
) -> Result<UniquenessReport> {
    let (ua, run_a) = solve_entire(curvature, barriers, opts_a)?;
    let spec = ua.spec();
    for i in 0..spec.len() {
        let x = spec.point(i);
        let (lo, hi) = (barriers.lower.value(&x), barriers.upper.value(&x));
        for s in 0..SLAB_SAMPLES {
            let z = lo + (hi - lo) * s as f64 / (SLAB_SAMPLES - 1) as f64;
            let hz = curvature.dz(&x, z);
            if hz < 0.0 {
                return Err(Error::Hypothesis(format!(
                    "dH/dz = {hz:.3e} < 0 at x = {x:?}, z = {z}"
                )));
            }
        }
    }
    let (ub, run_b) = solve_entire(curvature, barriers, opts_b)?;
    let r0 = opts_a.r0.min(opts_b.r0);
    let sup_difference = sup_difference_on_ball(&ua, &ub, r0)?;
    Ok(UniquenessReport {
        sup_difference,
        final_residuals: (run_a.last().report.final_residual, run_b.last().report.final_residual),
        runs: (run_a, run_b),
        solutions: (ua, ub),
    })
}
