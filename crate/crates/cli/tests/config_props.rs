use proptest::prelude::*;

use scalcurv_cli::config::{RunConfig, KEYS};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3..1e3f64]
}

fn list() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(finite(), 0..5)
}

prop_compose! {
    fn config()(
        dim in 2usize..=8,
        seed in any::<u64>(),
        threads in 0usize..64,
        name in prop::sample::select(vec!["constant", "sin-bump", "radial-gauss", "tanh-height"]),
        params in list(),
        h in (finite(), finite()),
        lower in (finite(), list(), finite()),
        fourier in list(),
        path in "[a-z0-9_/]{0,12}",
        domain in (finite(), finite(), list(), 0usize..10, finite()),
        solver in (finite(), finite(), 0usize..100, list(), list(), finite(), any::<bool>()),
        boundary in prop::option::of(finite()),
        counts in (0usize..100_000, finite(), 0usize..500),
    ) -> RunConfig {
        let mut c = RunConfig { dim, seed, threads, ..RunConfig::default() };
        c.curvature_name = name.to_string();
        c.curvature_params = params;
        (c.h1, c.h2) = h;
        (c.lower.alpha, c.lower.shift, c.lower.lift) = lower;
        c.f_fourier = fourier;
        c.f_file = (!path.is_empty()).then(|| path.clone().into());
        c.out = if path.is_empty() { "x".into() } else { path.into() };
        (c.radius, c.r0, c.schedule, c.stages, c.spacing) = domain;
        (c.solver_tol, c.intermediate_tol, c.max_newton, c.continuation, c.damping, c.shrink, c.check_barriers) = solver;
        c.oracle_boundary = boundary;
        (c.ilt_samples, c.comparison_spacing, c.comparison_pairs) = counts;
        c
    }
}

proptest! {
    #[test]
    fn parse_serialize_parse_is_identity(c in config()) {
        let text = c.to_text();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_text(), text);
        prop_assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn single_key_override_reproduces_its_line(c in config(), key in prop::sample::select(KEYS.to_vec())) {
        let text = c.to_text();
        let prefix = format!("{key} =");
        let line = text.lines().find(|l| l.starts_with(&prefix)).unwrap();
        let mut d = RunConfig::default();
        d.set(key, line.split_once('=').unwrap().1.trim()).unwrap();
        let d_text = d.to_text();
        prop_assert_eq!(d_text.lines().find(|l| l.starts_with(&prefix)).unwrap(), line);
    }
}
