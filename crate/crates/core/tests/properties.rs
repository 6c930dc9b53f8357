use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use scalcurv::barriers::{
    hyperboloid_for_pinching, treibergs_envelope, Barrier, BarrierPair, EnvelopeKind, Hyperboloid, SphereFunction,
};
use scalcurv::curvature::Builtin;
use scalcurv::dirichlet::{DirichletProblem, SolverOptions};
use scalcurv::geometry::{linearize_h2, sigma12_raw, sigma_k, PointJet, PrincipalCurvatures};
use scalcurv::grid::{GridFunction, GridSpec};

/// Independent `σ₂`: sum of the principal 2×2 minors of `A = ν(I + ν² g gᵀ) D²u`.
fn sigma2_minors(g: &[f64], m: &DMatrix<f64>) -> f64 {
    let n = g.len();
    let gv = DVector::from_column_slice(g);
    let nu = 1.0 / (1.0 - gv.norm_squared()).sqrt();
    let b = DMatrix::identity(n, n) + &gv * gv.transpose() * (nu * nu);
    let a = b * m * nu;
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += a[(i, i)] * a[(j, j)] - a[(i, j)] * a[(j, i)];
        }
    }
    s
}

prop_compose! {
    fn jet(n: usize)(
        dir in prop::collection::vec(-1.0..1.0f64, n),
        slope in 0.0..0.85f64,
        entries in prop::collection::vec(-1.0..3.0f64, n * n),
    ) -> (Vec<f64>, DMatrix<f64>) {
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
        let g: Vec<f64> = dir.iter().map(|v| slope * v / norm).collect();
        let raw = DMatrix::from_row_slice(n, n, &entries);
        let m = (&raw + raw.transpose()) * 0.5 + DMatrix::identity(n, n) * 1.5;
        (g, m)
    }
}

fn any_jet() -> impl Strategy<Value = (Vec<f64>, DMatrix<f64>)> {
    (2usize..=4).prop_flat_map(jet)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The closed-form Hessian slot and the gradient slot match central
    /// differences of the minor expansion.
    #[test]
    fn linearization_matches_finite_differences((g, m) in any_jet()) {
        let n = g.len();
        let s2 = sigma2_minors(&g, &m);
        let s1_ok = sigma12_raw(&g, m.transpose().as_slice()).map(|(s1, _)| s1 > 0.0).unwrap_or(false);
        prop_assume!(s1_ok && s2 > 1e-3);
        let lin = linearize_h2(&PointJet::new(DVector::from_column_slice(&g), m.clone()).unwrap()).unwrap();
        prop_assert!((lin.sigma2 - s2).abs() <= 1e-10 * (1.0 + s2.abs()));
        let eps = 1e-6;
        for i in 0..n {
            for j in 0..n {
                let (mut mp, mut mm) = (m.clone(), m.clone());
                mp[(i, j)] += eps;
                mm[(i, j)] -= eps;
                let fd = (sigma2_minors(&g, &mp) - sigma2_minors(&g, &mm)) / (2.0 * eps);
                prop_assert!((lin.c[(i, j)] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "c[{i},{j}] = {} vs {fd}", lin.c[(i, j)]);
            }
            let step = 1e-6;
            let (mut gp, mut gm) = (g.clone(), g.clone());
            gp[i] += step;
            gm[i] -= step;
            let fd = (sigma2_minors(&gp, &m) - sigma2_minors(&gm, &m)) / (2.0 * step);
            prop_assert!((lin.b[i] - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "b[{i}] = {} vs {fd}", lin.b[i]);
        }
        // Ellipticity: the symmetric part of c is positive definite on admissible jets.
        let sym = (&lin.c + lin.c.transpose()) * 0.5;
        prop_assert!(sym.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn sigma_k_is_homogeneous_and_symmetric(
        l in prop::collection::vec(-3.0..3.0f64, 2..=6),
        c in 0.1..10.0f64,
        k in 0usize..=6,
        rot in 0usize..6,
    ) {
        let k = k.min(l.len());
        let abs: Vec<f64> = l.iter().map(|v| v.abs()).collect();
        let scale = sigma_k(&abs, k).max(1e-300);
        let cl: Vec<f64> = l.iter().map(|v| c * v).collect();
        let lhs = sigma_k(&cl, k);
        let rhs = c.powi(k as i32) * sigma_k(&l, k);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * c.powi(k as i32) * scale);
        let mut r = l.clone();
        r.rotate_left(rot % l.len());
        prop_assert!((sigma_k(&r, k) - sigma_k(&l, k)).abs() <= 1e-13 * scale);
    }

    #[test]
    fn admissible_curvatures_satisfy_maclaurin(l in prop::collection::vec(-1.0..3.0f64, 2..=5)) {
        let pc = PrincipalCurvatures::from_lambdas(l);
        prop_assume!(pc.is_admissible());
        let s1 = pc.sigma1();
        prop_assert!(pc.maclaurin_slack() >= -1e-12 * s1 * s1);
        prop_assert!(pc.sigma1_partials().iter().all(|d| *d > 0.0));
    }

    /// Discrete `σ₂` of a hyperboloid converges at second order on a box.
    #[test]
    fn truncation_error_is_second_order(
        alpha in 0.8..2.0f64,
        shift in prop::collection::vec(-0.3..0.3f64, 2),
        m in 8usize..=12,
    ) {
        let hyp = Hyperboloid::new(alpha, shift, 0.0).unwrap();
        let exact = hyp.sigma2();
        let err = |h: f64| {
            let g = hyp.sample(&GridSpec::centered_box(2, 1.0, h).unwrap());
            let (mut grad, mut hess) = ([0.0; 2], [0.0; 4]);
            let mut worst = 0.0f64;
            for i in 0..g.len() {
                if g.jet_at(i, &mut grad, &mut hess) {
                    worst = worst.max((sigma12_raw(&grad, &hess).unwrap().1 - exact).abs());
                }
            }
            worst
        };
        let h = 1.0 / m as f64;
        let ratio = err(h) / err(h / 2.0);
        prop_assert!((ratio - 4.0).abs() <= 0.3 * 4.0, "ratio {ratio}");
    }

    #[test]
    fn hyperboloid_barriers_are_ordered(
        h1 in 0.5..3.0f64,
        frac in 0.2..1.0f64,
        dim in 2usize..=4,
        x in prop::collection::vec(-50.0..50.0f64, 4),
    ) {
        let lo = hyperboloid_for_pinching(h1, dim).unwrap();
        let hi = hyperboloid_for_pinching(h1 * frac, dim).unwrap();
        let x = &x[..dim];
        prop_assert!(lo.value(x) <= hi.value(x));
        prop_assert!((lo.sigma2() - h1).abs() < 1e-12 * h1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// `q₁ < q₂` for random trigonometric data and pinching constants.
    #[test]
    fn treibergs_envelopes_are_ordered(
        coeffs in prop::collection::vec(-0.3..0.3f64, 5),
        h1 in 1.0..1.5f64,
        frac in 0.5..0.95f64,
        pts in prop::collection::vec((0.0..30.0f64, 0.0..std::f64::consts::TAU), 20),
    ) {
        let f = move |t: f64| coeffs[0] + coeffs[1] * t.cos() + coeffs[2] * t.sin() + coeffs[3] * (2.0 * t).cos() + coeffs[4] * (2.0 * t).sin();
        let c = f.clone();
        let df = move |t: f64| {
            let h = 1e-6;
            (c(t + h) - c(t - h)) / (2.0 * h)
        };
        let sphere = Arc::new(SphereFunction::circle(360, f, df).unwrap());
        let q1 = treibergs_envelope(sphere.clone(), h1, h1 * frac, EnvelopeKind::Lower).unwrap();
        let q2 = treibergs_envelope(sphere, h1, h1 * frac, EnvelopeKind::Upper).unwrap();
        for (r, t) in pts {
            let x = [r * t.cos(), r * t.sin()];
            let (a, b) = (q1.evaluate(&x), q2.evaluate(&x));
            prop_assert!(a < b, "q1 = {a} >= q2 = {b} at {x:?}");
        }
    }

    /// Solutions stay inside the barrier sandwich and solve the discrete equation.
    #[test]
    fn dirichlet_solutions_are_sandwiched(
        base in 0.9..1.1f64,
        amp in 0.0..0.1f64,
        h1 in 1.2..1.4f64,
        h2 in 0.6..0.8f64,
    ) {
        let curvature = Builtin::SinBump { base, amp };
        let pair = BarrierPair::hyperboloids(h1, h2, 2).unwrap();
        let problem = DirichletProblem::new(&curvature, &pair, 1.5, 0.125).unwrap();
        let (u, rep) = problem.solve(&SolverOptions::default()).unwrap();
        prop_assert!(rep.final_residual <= 1e-9);
        prop_assert_eq!(rep.sandwich_violations, 0);
        prop_assert!(rep.max_iterate_slope < 1.0 && rep.min_margin > 0.0);
        let lo: GridFunction = pair.lower.sample(u.spec());
        let tol = 10.0 * 0.125 * 0.125;
        prop_assert!(u.values().iter().zip(lo.values()).all(|(a, b)| *a >= b - tol));
    }
}
