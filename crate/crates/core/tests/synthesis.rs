use num_complex::Complex64;
use proptest::prelude::*;
use qflow::grid::{distance_mod_phase, spectral_gradient, GridSpec, ScalarField, WaveFunction};
use qflow::spectral_sim::{evolve, ModelSpec};
use qflow::synthesis::{
    compile_expr, compile_phase, realize, synthesize_basic_phase, synthesize_gradient_flow, synthesize_translation,
    torus_wavevectors, PhaseExpr, PhaseMode, SynthesisOptions, TrigPoly, TrotterParams, Wavevector,
};
use qflow::transport::{apply_transport, integrate_flow};
use qflow::Error;

fn torus(dim: usize, n: usize) -> (GridSpec, ModelSpec) {
    let g = GridSpec::torus(dim, n).unwrap();
    (g, ModelSpec::torus_trig(g, None).unwrap())
}

fn smooth(grid: GridSpec) -> WaveFunction {
    WaveFunction::from_fn(grid, |p| {
        let y = if grid.dim > 1 { p[1] } else { 0.0 };
        Complex64::new(1.0 + 0.4 * p[0].cos(), 0.3 * (2.0 * p[0] + y).sin())
    })
    .unwrap()
}

fn trig_at_depth(dim: usize, depth: usize) -> impl Strategy<Value = TrigPoly> {
    let ks: Vec<Wavevector> = torus_wavevectors(dim, depth).into_iter().collect();
    let n = ks.len();
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n).prop_map(move |cs| {
        let mut t = TrigPoly::zero(dim);
        for (k, (c, s)) in ks.iter().zip(cs) {
            t.add_mode(*k, c, s);
        }
        t
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(32) })]

    #[test]
    fn compiled_programs_denote_their_targets(
        (dim, depth, poly) in (1usize..=2, 0usize..=2).prop_flat_map(|(d, k)| (Just(d), Just(k), trig_at_depth(d, k))),
    ) {
        let (g, model) = torus(dim, 32);
        let target = PhaseExpr::Trig(poly);
        let program = compile_expr(&model, &target, depth).unwrap();
        prop_assert!(program.depth <= depth);
        let err = program.denotation(&model).max_abs_diff(&target.sample(&g)).unwrap();
        prop_assert!(err <= 1e-10 * target.sample(&g).max_abs().max(1.0), "err {err}");
    }

    #[test]
    fn synthesized_schedules_are_unitary(a in -1.0..1.0f64, b in -1.0..1.0f64, tau in 1e-3..1e-2f64) {
        let (g, model) = torus(1, 64);
        let target = ScalarField::from_fn(g, |p| a * p[0].sin() + b * (p[0].cos() * p[0].cos()));
        let c = compile_phase(&model, &target, 1, tau, &SynthesisOptions::default()).unwrap();
        let out = evolve(&model, &smooth(g), &c.schedule, 10_000).unwrap();
        prop_assert!((out.norm() - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn sine_phase_is_a_single_basic_phase() {
    let (g, model) = torus(1, 32);
    let target = PhaseExpr::Trig(TrigPoly::mode(1, [1, 0, 0], 0.0, 0.5));
    let p = compile_expr(&model, &target, 0).unwrap();
    assert_eq!(p.depth, 0);
    assert_eq!(p.instructions.len(), 1);
    assert_eq!(p.denotation(&model).max_abs_diff(&target.sample(&g)).unwrap(), 0.0);
}

#[test]
fn second_harmonic_needs_depth_one() {
    let (g, model) = torus(1, 32);
    for target in [TrigPoly::mode(1, [2, 0, 0], 1.0, 0.0), TrigPoly::mode(1, [2, 0, 0], 0.0, -0.7)] {
        let e = PhaseExpr::Trig(target);
        assert!(matches!(compile_expr(&model, &e, 0), Err(Error::NotRepresentable { .. })));
        let p = compile_expr(&model, &e, 1).unwrap();
        assert!(p.denotation(&model).max_abs_diff(&e.sample(&g)).unwrap() <= 1e-12);
    }
}

#[test]
fn basic_phase_converges_to_the_multiplier() {
    let (g, model) = torus(1, 64);
    let psi = smooth(g);
    let target = psi.multiply_phase(&ScalarField::from_fn(g, |p| 0.5 * p[0].sin() - 0.2 * p[0].cos())).unwrap();
    let d: Vec<f64> = [1e-2, 1e-3]
        .iter()
        .map(|&tau| {
            let s = synthesize_basic_phase(&model, &[0.5, -0.2], tau).unwrap();
            assert!(s.total_time() <= tau * (1.0 + 1e-12));
            distance_mod_phase(&evolve(&model, &psi, &s, 1_000_000).unwrap(), &target).unwrap()
        })
        .collect();
    assert!(d[1] < d[0] / 5.0, "{d:?}");
}

#[test]
fn opposite_translations_return_to_the_start() {
    let g = GridSpec::line(1, 4096, 16.0).unwrap();
    let model = ModelSpec::line_dipole_gauss(g, None, 1.0, 0.0).unwrap();
    let psi = WaveFunction::from_fn(g, |p| Complex64::new((-0.5 * (p[0] - 0.3).powi(2)).exp(), 0.0)).unwrap();
    let opts = SynthesisOptions::idealized();
    let tau = 1e-3;
    let fwd = synthesize_translation(&model, 0, 1.0, tau, &opts).unwrap();
    let back = synthesize_translation(&model, 0, -1.0, tau, &opts).unwrap();
    let out = evolve(&model, &psi, &fwd.then(back), 1_000_000).unwrap();
    assert!(distance_mod_phase(&out, &psi).unwrap() <= 1e-2);
}

#[test]
fn idealized_gradient_flow_tracks_characteristics() {
    let (g, model) = torus(1, 256);
    let phi = ScalarField::from_fn(g, |p| 0.5 * p[0].cos());
    let psi = smooth(g);
    let exact = apply_transport(&integrate_flow(&spectral_gradient(&phi).scaled(2.0), 1.0, None).unwrap(), &psi).unwrap();
    let d: Vec<f64> = [(0.05, 16), (0.025, 64)]
        .iter()
        .map(|&(tau, n)| {
            let params = TrotterParams::new(tau, n, 1).unwrap();
            let s = synthesize_gradient_flow(&model, &phi, &params, &SynthesisOptions::idealized()).unwrap();
            assert!(s.is_idealized());
            distance_mod_phase(&evolve(&model, &psi, &s, 1_000_000).unwrap(), &exact).unwrap()
        })
        .collect();
    assert!(d[1] < d[0] && d[1] <= 0.1, "{d:?}");
}

#[test]
fn budget_is_enforced() {
    let (g, model) = torus(1, 32);
    let target = ScalarField::from_fn(g, |p| p[0].sin());
    let opts = SynthesisOptions::default().with_budget(1e-6);
    assert!(matches!(compile_phase(&model, &target, 0, 1e-2, &opts), Err(Error::BudgetExceeded { .. })));
}

#[test]
fn realize_idealized_is_a_single_exact_phase() {
    let (g, model) = torus(1, 32);
    let target = PhaseExpr::Trig(TrigPoly::mode(1, [1, 0, 0], 1.0, 0.0));
    let p = compile_expr(&model, &target, 0).unwrap();
    let opts = SynthesisOptions { mode: PhaseMode::Idealized, ..SynthesisOptions::default() };
    let s = realize(&model, &p, 1e-3, &opts).unwrap();
    assert_eq!(s.total_time(), 0.0);
    let psi = smooth(g);
    let out = evolve(&model, &psi, &s, 1).unwrap();
    let exact = psi.multiply_phase(&target.sample(&g)).unwrap();
    assert!(distance_mod_phase(&out, &exact).unwrap() <= 1e-7);
}
