use num_complex::Complex64;
use proptest::prelude::*;
use qflow::grid::{distance_mod_phase, GridSpec, ScalarField, WaveFunction};
use qflow::spectral_sim::{evolve, ControlSchedule, ModelSpec};

fn smooth(grid: GridSpec) -> WaveFunction {
    WaveFunction::from_fn(grid, |p| Complex64::new(1.0 + 0.4 * p[0].cos(), 0.3 * (2.0 * p[0]).sin())).unwrap()
}

fn schedule(segs: &[(f64, f64, f64)], phase: f64) -> ControlSchedule {
    let mut s = ControlSchedule::new();
    for &(tau, a, b) in segs {
        s.push_control(tau, vec![a, b]).unwrap();
    }
    s.add_global_phase(phase);
    s
}

fn segments() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.01..0.2f64, -5.0..5.0f64, -5.0..5.0f64), 1..6)
}

fn potential_model(grid: GridSpec) -> ModelSpec {
    ModelSpec::torus_trig(grid, Some(ScalarField::from_fn(grid, |p| 2.0 * (2.0 * p[0]).cos()))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(32) })]

    #[test]
    fn evolution_is_unitary(segs in segments(), theta in -4.0..4.0f64) {
        let grid = GridSpec::torus(1, 64).unwrap();
        let model = potential_model(grid);
        let out = evolve(&model, &smooth(grid), &schedule(&segs, theta), 200).unwrap();
        prop_assert!((out.norm() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn concatenation_is_composition(a in segments(), b in segments()) {
        let grid = GridSpec::torus(1, 64).unwrap();
        let model = potential_model(grid);
        let psi = smooth(grid);
        let (sa, sb) = (schedule(&a, 0.3), schedule(&b, -1.1));
        let joint = evolve(&model, &psi, &sa.clone().then(sb.clone()), 200).unwrap();
        let split = evolve(&model, &evolve(&model, &psi, &sa, 200).unwrap(), &sb, 200).unwrap();
        prop_assert!(joint.l2_distance(&split).unwrap() <= 1e-11);
    }

    #[test]
    fn global_phase_only_rotates(segs in segments(), theta in -4.0..4.0f64) {
        let grid = GridSpec::torus(1, 64).unwrap();
        let model = potential_model(grid);
        let psi = smooth(grid);
        let plain = evolve(&model, &psi, &schedule(&segs, 0.0), 200).unwrap();
        let rotated = evolve(&model, &psi, &schedule(&segs, theta), 200).unwrap();
        prop_assert!(distance_mod_phase(&plain, &rotated).unwrap() <= 1e-7);
        prop_assert!(rotated.l2_distance(&plain.with_global_phase(theta)).unwrap() <= 1e-12);
    }
}

#[test]
fn plane_waves_on_the_two_torus_are_exact() {
    let grid = GridSpec::torus(2, 32).unwrap();
    let model = ModelSpec::torus_trig(grid, None).unwrap();
    let (k, t) = ([3.0, -2.0], 0.37);
    let psi = WaveFunction::from_fn(grid, |p| Complex64::from_polar(1.0, k[0] * p[0] + k[1] * p[1])).unwrap();
    let s = ControlSchedule::single(t, vec![0.0; model.control_count()]).unwrap();
    let out = evolve(&model, &psi, &s, 7).unwrap();
    let k2 = k[0] * k[0] + k[1] * k[1];
    let exact = psi.with_global_phase(-k2 * t);
    assert!(out.l2_distance(&exact).unwrap() <= 1e-12);
}

#[test]
fn gaussian_on_the_line_spreads_like_the_free_kernel() {
    // e^{itΔ} e^{−x²/2} ∝ (1+2it)^{−1/2} e^{−x²/(2(1+2it))}
    let grid = GridSpec::line(1, 512, 20.0).unwrap();
    let model = ModelSpec::line_dipole_gauss(grid, None, 1.0, 0.0).unwrap();
    let psi = WaveFunction::from_fn(grid, |p| Complex64::new((-0.5 * p[0] * p[0]).exp(), 0.0)).unwrap();
    let t = 0.5;
    let s = ControlSchedule::single(t, vec![0.0; model.control_count()]).unwrap();
    let out = evolve(&model, &psi, &s, 10).unwrap();
    let w = Complex64::new(1.0, 2.0 * t);
    let exact = WaveFunction::from_fn(grid, |p| (-(p[0] * p[0]) / (2.0 * w)).exp() / w.sqrt()).unwrap();
    assert!(distance_mod_phase(&out, &exact).unwrap() <= 1e-10);
}

#[test]
fn constant_control_is_a_pointwise_phase() {
    // With the kinetic part negligible, u·W for time τ multiplies by e^{−iτuW}.
    let grid = GridSpec::torus(1, 64).unwrap();
    let model = ModelSpec::torus_trig(grid, None).unwrap();
    let psi = smooth(grid);
    let (tau, u) = (1e-7, 2e6);
    let s = ControlSchedule::single(tau, vec![u, 0.0]).unwrap();
    let out = evolve(&model, &psi, &s, 10_000_000).unwrap();
    let exact = psi.multiply_phase(&ScalarField::from_fn(grid, |p| -tau * u * p[0].sin())).unwrap();
    assert!(distance_mod_phase(&out, &exact).unwrap() <= 1e-5);
}

#[test]
fn schedule_json_roundtrip_preserves_evolution() {
    let grid = GridSpec::torus(1, 32).unwrap();
    let model = potential_model(grid);
    let mut s = schedule(&[(0.1, 1.0, -2.0), (0.05, 0.5, 0.0)], 0.7);
    s.push_phase(grid.points().map(|p| p[0].cos()).collect()).unwrap();
    let back = ControlSchedule::from_json(&s.to_json().unwrap()).unwrap();
    let psi = smooth(grid);
    let a = evolve(&model, &psi, &s, 100).unwrap();
    let b = evolve(&model, &psi, &back, 100).unwrap();
    assert_eq!(a.values(), b.values());
}

#[test]
fn mismatched_control_length_is_rejected() {
    let grid = GridSpec::torus(1, 32).unwrap();
    let model = ModelSpec::torus_trig(grid, None).unwrap();
    let s = ControlSchedule::single(0.1, vec![1.0]).unwrap();
    assert!(evolve(&model, &smooth(grid), &s, 10).is_err());
}
