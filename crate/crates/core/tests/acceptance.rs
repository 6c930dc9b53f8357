//! One PASS/FAIL line per acceptance criterion. Tests hold a shared lock so
//! their wall-clock budgets are measured one at a time.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use scalcurv::barriers::{
    hyperboloid_for_pinching, lightcone_gradient_aid, nu_bound_from_slope, Barrier, BarrierPair, SphereFunction,
    DEFAULT_CIRCLE_SAMPLES,
};
use scalcurv::curvature::Builtin;
use scalcurv::dirichlet::{DirichletProblem, SolverOptions};
use scalcurv::entire::{asymptotic_residual, solve_entire, sup_difference_on_ball, EntireOptions};
use scalcurv::geometry::sigma12_raw;
use scalcurv::grid::{GridFunction, GridSpec};
use scalcurv::verify::inequalities::{homogeneity_check, ilt_survey, ilt_violations, maclaurin_check};
use scalcurv::verify::{comparison_suite, radial_shoot, uniqueness_experiment};

static SERIAL: Mutex<()> = Mutex::new(());

fn verdict(n: usize, name: &str, pass: bool, secs: f64, budget: f64, detail: &str) {
    let pass = pass && secs < budget;
    println!(
        "criterion {n} [{name}]: {} ({detail}; {secs:.1}s of {budget:.0}s)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} failed: {detail}");
}

fn sup_on_ball(u: &GridFunction, f: impl Fn(&[f64]) -> f64, r: f64) -> f64 {
    let spec = u.spec();
    (0..spec.len())
        .map(|i| spec.point(i))
        .zip(u.values())
        .filter(|(x, _)| x.iter().map(|v| v * v).sum::<f64>() <= r * r * (1.0 + 1e-12))
        .map(|(x, v)| (v - f(&x)).abs())
        .fold(0.0, f64::max)
}

fn unit_hyperboloid(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

#[test]
fn criterion_1_hyperboloid_exactness() {
    const RATIO_RANGE: (f64, f64) = (3.0, 5.0);
    const FINE_ERROR_MAX: f64 = 5e-3;
    const BUDGET: f64 = 5.0;
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let hyp = hyperboloid_for_pinching(1.0, 2).unwrap();
    let err = |h: f64| {
        let u = hyp.sample(&GridSpec::centered_box(2, 2.0, h).unwrap());
        let (mut g, mut m) = ([0.0; 2], [0.0; 4]);
        let mut worst = 0.0f64;
        for i in 0..u.len() {
            if u.jet_at(i, &mut g, &mut m) {
                worst = worst.max((sigma12_raw(&g, &m).unwrap().1 - 1.0).abs());
            }
        }
        worst
    };
    let (coarse, fine) = (err(1.0 / 32.0), err(1.0 / 64.0));
    let ratio = coarse / fine;
    verdict(
        1,
        "hyperboloid exactness",
        (RATIO_RANGE.0..=RATIO_RANGE.1).contains(&ratio) && fine < FINE_ERROR_MAX,
        t.elapsed().as_secs_f64(),
        BUDGET,
        &format!("err(1/32) = {coarse:.3e}, err(1/64) = {fine:.3e}, ratio {ratio:.3}"),
    );
}

#[test]
fn criterion_2_dirichlet_reproduction() {
    const SUP_ERROR_MAX: f64 = 5e-3;
    const RESIDUAL_MAX: f64 = 1e-9;
    const BUDGET: f64 = 120.0;
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let h = Builtin::Constant { h: 1.0 };
    let pair = BarrierPair::hyperboloids(1.0, 0.8, 2).unwrap();
    let problem = DirichletProblem::new(&h, &pair, 3.0, 1.0 / 32.0).unwrap();
    let (u, rep) = problem.solve(&SolverOptions::default()).unwrap();
    let err = sup_on_ball(&u, unit_hyperboloid, f64::INFINITY);
    let admissible = rep.max_iterate_slope < 1.0 && rep.min_margin > 0.0;
    verdict(
        2,
        "Dirichlet reproduction",
        err <= SUP_ERROR_MAX && rep.final_residual <= RESIDUAL_MAX && admissible,
        t.elapsed().as_secs_f64(),
        BUDGET,
        &format!(
            "sup error {err:.3e}, residual {:.3e}, {} Newton steps, max |Du| {:.4}, min margin {:.3e}",
            rep.final_residual, rep.iterations, rep.max_iterate_slope, rep.min_margin
        ),
    );
}

#[test]
fn criterion_3_entire_stabilization() {
    const SUP_ERROR_MAX: f64 = 1e-2;
    const BUDGET: f64 = 600.0;
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let h = Builtin::Constant { h: 1.0 };
    let pair = BarrierPair::hyperboloids(1.2, 0.8, 2).unwrap();
    let opts = EntireOptions {
        r0: 2.0,
        spacing: 1.0 / 16.0,
        schedule: Some(vec![4.0, 8.0, 16.0]),
        ..EntireOptions::default()
    };
    let (inner, run) = solve_entire(&h, &pair, &opts).unwrap();
    let err = sup_on_ball(&inner, unit_hyperboloid, opts.r0);

    let phi1 = hyperboloid_for_pinching(1.2, 2).unwrap();
    let phi2 = hyperboloid_for_pinching(0.8, 2).unwrap();
    let aid = lightcone_gradient_aid(&phi1, &phi2, opts.r0).unwrap();
    let slope = aid.r1 / (aid.eps * aid.eps + aid.r1 * aid.r1).sqrt();
    let nu_bound = 1.1 * nu_bound_from_slope(slope).unwrap();
    println!(
        "criterion 3 diagnostic: nu_max on B_R0 per stage {:?}, aid bound (10% slack) {nu_bound:.3}",
        run.stages.iter().map(|s| s.nu_max_inner).collect::<Vec<_>>()
    );
    verdict(
        3,
        "entire-driver stabilization",
        run.gaps_strictly_decreasing() && run.gaps.len() == 2 && err <= SUP_ERROR_MAX,
        t.elapsed().as_secs_f64(),
        BUDGET,
        &format!("gaps {:?}, sup error on B_R0 {err:.3e}", run.gaps),
    );
}

#[test]
fn criterion_4_sandwich() {
    const TOL_FACTOR: f64 = 10.0;
    const BUDGET: f64 = 300.0;
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let h = Builtin::SinBump { base: 1.0, amp: 0.2 };
    let (lo, hi) = h.bounds();
    assert!(lo >= 0.8 && hi <= 1.2);
    let pair = BarrierPair::hyperboloids(1.2, 0.8, 2).unwrap();
    let mut details = Vec::new();
    let mut total = 0;
    for (radius, spacing) in [(4.0, 1.0 / 32.0), (8.0, 1.0 / 16.0)] {
        let problem = DirichletProblem::new(&h, &pair, radius, spacing).unwrap();
        let (u, rep) = problem.solve(&SolverOptions::default()).unwrap();
        let tol = TOL_FACTOR * spacing * spacing;
        let (l, up) = (pair.lower.sample(u.spec()), pair.upper.sample(u.spec()));
        let violations = (0..u.len())
            .filter(|&i| u.values()[i] < l.values()[i] - tol || u.values()[i] > up.values()[i] + tol)
            .count();
        total += violations + rep.sandwich_violations;
        details.push(format!(
            "R={radius} h={spacing}: {violations} violations, residual {:.2e}",
            rep.final_residual
        ));
    }
    verdict(
        4,
        "sandwich",
        total == 0,
        t.elapsed().as_secs_f64(),
        BUDGET,
        &details.join("; "),
    );
}

#[test]
fn criterion_5_radial_oracle() {
    const SUP_DIFF_MAX: f64 = 1e-3;
    const BUDGET: f64 = 180.0;
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let h = Builtin::RadialGauss { base: 1.0, amp: 0.15 };
    let radius = 3.0;
    // The box corners sit at R√2; the oracle covers them and supplies the boundary data.
    let outer = radius * 2.0f64.sqrt();
    let phi2 = hyperboloid_for_pinching(1.0, 2).unwrap();
    let oracle = radial_shoot(&h, 2, outer, phi2.value(&[outer, 0.0])).unwrap();
    let oracle = Arc::new(oracle);
    let pair = BarrierPair::new(oracle.clone(), Arc::new(phi2)).unwrap();
    let problem = DirichletProblem::new(&h, &pair, radius, 1.0 / 32.0).unwrap();
    let (u, rep) = problem.solve(&SolverOptions::default()).unwrap();
    let diff = sup_on_ball(&u, |x| oracle.value(x), f64::INFINITY);
    verdict(
        5,
        "radial-oracle equivalence",
        diff <= SUP_DIFF_MAX,
        t.elapsed().as_secs_f64(),
        BUDGET,
        &format!(
            "sup |u - u_radial| = {diff:.3e}, oracle residual {:.2e}, PDE residual {:.2e}",
            oracle.residual(),
            rep.final_residual
        ),
    );
}

#[test]
fn criterion_6_inequality_battery() {
    const MACLAURIN_SAMPLES: usize = 10_000;
    const ILT_SAMPLES: usize = 100_000;
    const ILT_SAFETY: f64 = 0.9;
    const BUDGET: f64 = 60.0;
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let mut violations = 0;
    let mut details = Vec::new();
    for n in 2..=4 {
        let r = maclaurin_check(n, MACLAURIN_SAMPLES, 1000 + n as u64).unwrap();
        violations += r.violations;
        details.push(format!("maclaurin n={n}: {} violations", r.violations));
    }
    let survey = ilt_survey(3, ILT_SAMPLES, 2000).unwrap();
    let eps = ILT_SAFETY * survey.min_ratio;
    let ilt = ilt_violations(3, ILT_SAMPLES, eps, 2001).unwrap();
    violations += ilt;
    details.push(format!("ilt eps {eps:.4e}: {ilt} violations"));
    let mut worst = 0.0f64;
    for n in 2..=4 {
        let r = homogeneity_check(n, MACLAURIN_SAMPLES, 3000 + n as u64).unwrap();
        violations += r.violations;
        worst = worst.max(r.max_rel_error);
    }
    details.push(format!("homogeneity max rel error {worst:.2e}"));
    verdict(
        6,
        "inequality battery",
        violations == 0 && survey.min_ratio > 0.0,
        t.elapsed().as_secs_f64(),
        BUDGET,
        &details.join(", "),
    );
}

#[test]
fn criterion_7_comparison_and_uniqueness() {
    const PAIRS: usize = 100;
    const UNIQUENESS_MAX: f64 = 1e-6;
    const BUDGET: f64 = 600.0;
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let suite = comparison_suite(PAIRS, 1.0 / 16.0, 7).unwrap();

    let h = Builtin::TanhHeight {
        base: 1.0,
        amp: 0.1,
        center: 1.5,
    };
    let pair = BarrierPair::hyperboloids(1.2, 0.8, 2).unwrap();
    let a = EntireOptions {
        r0: 2.0,
        spacing: 1.0 / 32.0,
        schedule: Some(vec![4.0, 8.0]),
        ..EntireOptions::default()
    };
    let mut b = a.clone();
    b.schedule = Some(vec![3.0, 8.0]);
    b.solver.damping = vec![0.5, 0.75, 1.0];
    let uniq = uniqueness_experiment(&h, &pair, &a, &b).unwrap();
    verdict(
        7,
        "comparison and uniqueness",
        suite.passed == PAIRS && suite.failed == 0 && uniq.sup_difference < UNIQUENESS_MAX,
        t.elapsed().as_secs_f64(),
        BUDGET,
        &format!(
            "{}/{PAIRS} pairs ordered (worst margin {:.2e}, {} rejected), runs differ by {:.3e}",
            suite.passed, suite.worst_margin, suite.rejected, uniq.sup_difference
        ),
    );
}

#[test]
fn criterion_8_treibergs_asymptotics() {
    const BUDGET: f64 = 900.0;
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let f = |th: f64| 0.3 * th.cos();
    let sphere = Arc::new(SphereFunction::circle(DEFAULT_CIRCLE_SAMPLES, f, |th| -0.3 * th.sin()).unwrap());
    let pair = BarrierPair::treibergs(sphere.clone(), 1.2, 0.8).unwrap();
    let opts = EntireOptions {
        r0: 2.0,
        spacing: 1.0 / 16.0,
        schedule: Some(vec![4.0, 8.0, 16.0]),
        ..EntireOptions::default()
    };
    let test_grid = GridSpec::centered_box(2, 16.0, opts.spacing).unwrap();
    let (q1, q2) = (pair.lower.sample(&test_grid), pair.upper.sample(&test_grid));
    let crossings = q1.values().iter().zip(q2.values()).filter(|(a, b)| a >= b).count();
    let min_gap = q2
        .values()
        .iter()
        .zip(q1.values())
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min);

    let (inner, run) = solve_entire(&Builtin::Constant { h: 1.0 }, &pair, &opts).unwrap();
    let last = &run.last().solution;
    let profile = asymptotic_residual(last, &|y| f(y[1].atan2(y[0])), opts.ring_directions).unwrap();
    let rings: Vec<String> = profile
        .rings
        .iter()
        .map(|r| format!("r={}: {:.3e}", r.radius, r.max_abs))
        .collect();
    let drift = sup_difference_on_ball(&inner, &run.stages[1].solution, opts.r0).unwrap();
    verdict(
        8,
        "Treibergs asymptotics",
        crossings == 0 && profile.is_decreasing(),
        t.elapsed().as_secs_f64(),
        BUDGET,
        &format!(
            "{crossings} nodes with q1 >= q2 (min gap {min_gap:.3e}), ring residuals [{}], last gap {drift:.2e}",
            rings.join(", ")
        ),
    );
}
