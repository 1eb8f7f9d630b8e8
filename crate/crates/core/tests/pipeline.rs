use num_complex::Complex64;
use qflow::grid::{distance_mod_phase, spectral_gradient, GridSpec, ScalarField, VectorField, WaveFunction};
use qflow::pipeline::{factor_state, steer, steer_with_flows, SteerOptions};
use qflow::spectral_sim::{evolve, ControlSchedule, ModelSpec, Segment};
use qflow::synthesis::{compile_phase, SynthesisOptions};
use qflow::transport::{apply_transport, integrate_flow};
use qflow::Error;

fn torus(dim: usize, n: usize) -> (GridSpec, ModelSpec) {
    let g = GridSpec::torus(dim, n).unwrap();
    (g, ModelSpec::torus_trig(g, None).unwrap())
}

fn density_phase(g: GridSpec, amp: impl Fn(f64) -> f64, phase: impl Fn(f64) -> f64) -> WaveFunction {
    WaveFunction::from_fn(g, |p| Complex64::from_polar(amp(p[0]), phase(p[0]))).unwrap()
}

fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    a - t * (a / t).round()
}

fn max_segment_gap(a: &ControlSchedule, b: &ControlSchedule) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut gap: f64 = 0.0;
    for (x, y) in a.segments().iter().zip(b.segments()) {
        match (x, y) {
            (Segment::Control { tau: t1, u: u1 }, Segment::Control { tau: t2, u: u2 }) => {
                gap = gap.max((t1 - t2).abs());
                gap = u1.iter().zip(u2).fold(gap, |m, (p, q)| m.max((p - q).abs() / p.abs().max(1.0)));
            }
            (Segment::Phase { phase: p1 }, Segment::Phase { phase: p2 }) => {
                gap = p1.iter().zip(p2.iter()).fold(gap, |m, (p, q)| m.max((p - q).abs()));
            }
            _ => return f64::INFINITY,
        }
    }
    gap
}

#[test]
fn equal_densities_reduce_to_one_compiled_phase() {
    let (g, model) = torus(1, 128);
    let amp = |x: f64| (1.0 + 0.5 * x.cos()).sqrt();
    let psi0 = density_phase(g, amp, |x| 0.3 * x.sin());
    let psi1 = density_phase(g, amp, |x| 0.3 * x.sin() + 0.5 * x.cos() + 0.2);
    let opts = SteerOptions::default();
    let out = steer(&model, &psi0, &psi1, 1.0, 1, &opts).unwrap();
    assert_eq!(out.report.stages.len(), 1);
    assert_eq!(out.report.stages[0].name, "phase");

    let f0 = factor_state(&psi0, opts.eps_floor).unwrap();
    let f1 = factor_state(&psi1, opts.eps_floor).unwrap();
    let target = f1.relative_phase.add(&f0.relative_phase.scaled(-1.0)).unwrap();
    let syn = SynthesisOptions { max_depth: opts.max_depth, ..SynthesisOptions::default() };
    let direct = compile_phase(&model, &target, opts.max_depth, opts.phase_tau, &syn).unwrap().schedule;
    assert_eq!(out.schedule.segments(), direct.segments());
    let expected = direct.global_phase() + f1.reference_phase - f0.reference_phase;
    assert!(wrap_angle(out.schedule.global_phase() - expected).abs() <= 1e-12);
    assert!(out.achieved() <= 1e-3, "{}", out.achieved());
}

#[test]
fn global_phases_of_endpoints_only_move_the_global_phase() {
    let (g, model) = torus(1, 128);
    let psi0 = density_phase(g, |x| (1.0 + 0.3 * x.sin()).sqrt(), |x| 0.4 * x.cos());
    let psi1 = density_phase(g, |x| (1.0 + 0.5 * x.cos()).sqrt(), |x| x.sin());
    let opts = SteerOptions::default();
    let a = steer(&model, &psi0, &psi1, 0.5, 1, &opts).unwrap();
    let b = steer(&model, &psi0.with_global_phase(1.3), &psi1.with_global_phase(-2.1), 0.5, 1, &opts).unwrap();
    assert!(max_segment_gap(&a.schedule, &b.schedule) <= 1e-12);
    let shift = wrap_angle(b.schedule.global_phase() - a.schedule.global_phase());
    assert!(wrap_angle(shift - (-2.1 - 1.3)).abs() <= 1e-9, "shift {shift}");
    assert!((a.achieved() - b.achieved()).abs() <= 1e-9);
}

#[test]
fn steering_to_a_known_gradient_flow_image() {
    let (g, model) = torus(1, 256);
    let rho0 = density_phase(g, |x| (1.0 + 0.3 * x.cos()).sqrt(), |_| 0.0);
    let phi = ScalarField::from_fn(g, |p| 0.2 * p[0].sin());
    let f = spectral_gradient(&phi).scaled(2.0);
    let target = apply_transport(&integrate_flow(&f, 1.0, None).unwrap(), &rho0).unwrap();
    let opts = SteerOptions::default();
    let out = steer_with_flows(&model, &rho0, &target, &[(f, 1.0)], 0.5, 2, &opts).unwrap();
    let r = &out.report;
    assert!(r.transport_mismatch <= 1e-2, "{}", r.transport_mismatch);
    assert!(r.audit_passed);
    assert!(out.achieved() <= 2e-2, "{}", out.achieved());
}

#[test]
fn empty_flow_list_is_the_identity_transport() {
    let (g, model) = torus(1, 64);
    let psi0 = density_phase(g, |x| (1.0 + 0.3 * x.cos()).sqrt(), |_| 0.0);
    let psi1 = density_phase(g, |x| (1.0 + 0.3 * x.cos()).sqrt(), |x| 0.2 * x.sin());
    let out = steer_with_flows(&model, &psi0, &psi1, &[], 0.5, 1, &SteerOptions::default()).unwrap();
    let names: Vec<&str> = out.report.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["phase"]);
    assert!(out.achieved() <= 1e-3);
}

#[test]
fn gradient_field_on_the_two_torus_becomes_a_gradient_flow() {
    let (g, model) = torus(2, 32);
    let psi0 = WaveFunction::from_fn(g, |p| Complex64::new((1.0 + 0.2 * p[1].cos()).sqrt(), 0.0)).unwrap();
    let f = VectorField::from_fn(g, |p| [0.3 * p[0].cos(), 0.0, 0.0]);
    let target = apply_transport(&integrate_flow(&f, 1.0, None).unwrap(), &psi0).unwrap();
    let out = steer_with_flows(&model, &psi0, &target, &[(f, 1.0)], 0.5, 1, &SteerOptions::default()).unwrap();
    let transport = &out.schedule.provenance.as_ref().unwrap()["stages"][1]["schedule"];
    assert_eq!(transport["construction"], "flow_composition");
    assert!(out.report.audit_passed);
    assert!(out.achieved() <= 5e-2, "{}", out.achieved());
}

#[test]
fn two_flows_compose_with_additive_error() {
    let (g, model) = torus(1, 256);
    let psi0 = density_phase(g, |x| (1.0 + 0.3 * x.cos()).sqrt(), |_| 0.0);
    let f1 = VectorField::from_fn(g, |p| [0.3 * p[0].sin(), 0.0, 0.0]);
    let f2 = VectorField::from_fn(g, |p| [0.2 * (2.0 * p[0]).cos(), 0.0, 0.0]);
    let opts = SteerOptions::default();
    let image = |psi: &WaveFunction, f: &VectorField| apply_transport(&integrate_flow(f, 1.0, None).unwrap(), psi).unwrap();
    let mid = image(&psi0, &f1);
    let end = image(&mid, &f2);
    let e1 = steer_with_flows(&model, &psi0, &mid, &[(f1.clone(), 1.0)], 0.5, 1, &opts).unwrap().achieved();
    let e2 = steer_with_flows(&model, &mid, &end, &[(f2.clone(), 1.0)], 0.5, 1, &opts).unwrap().achieved();
    let both = steer_with_flows(&model, &psi0, &end, &[(f1, 1.0), (f2, 1.0)], 0.5, 1, &opts).unwrap();
    assert!(both.report.audit_passed);
    assert!(both.achieved() <= 2.0 * (e1 + e2), "{} vs {e1} + {e2}", both.achieved());
}

#[test]
fn rotational_field_is_unrealizable() {
    let (g, model) = torus(2, 16);
    let psi0 = WaveFunction::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
    let psi1 = WaveFunction::from_fn(g, |p| Complex64::new((1.0 + 0.2 * p[0].cos()).sqrt(), 0.0)).unwrap();
    let f = VectorField::from_fn(g, |p| [p[1].sin(), -p[0].sin(), 0.0]);
    let err = steer_with_flows(&model, &psi0, &psi1, &[(f, 1.0)], 0.5, 1, &SteerOptions::default()).unwrap_err();
    assert!(matches!(err, Error::UnrealizableField(ref m) if m.starts_with("flow 0")), "{err}");
}

#[test]
fn reconstruction_error_shrinks_with_the_floor() {
    // |ψ| vanishes linearly at x = 0 and x = π, so the floored region has width ∝ ε.
    let (g, _) = torus(1, 1024);
    let psi = density_phase(g, |x| x.sin().abs(), |x| 0.3 * x.cos());
    let errs: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&eps| factor_state(&psi, eps).unwrap().reconstruction_error)
        .collect();
    for (e, eps) in errs.iter().zip([1e-1f64, 1e-2, 1e-3]) {
        assert!(*e <= eps.sqrt(), "error {e} at floor {eps}");
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn schedule_reproduces_the_reported_error() {
    let (g, model) = torus(1, 256);
    let psi0 = WaveFunction::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
    let psi1 = density_phase(g, |x| (1.0 + 0.5 * x.cos()).sqrt(), |x| x.sin());
    let opts = SteerOptions::default();
    let out = steer(&model, &psi0, &psi1, 0.5, 2, &opts).unwrap();
    let replay = evolve(&model, &psi0, &out.schedule, opts.substeps).unwrap();
    assert_eq!(distance_mod_phase(&replay, &psi1).unwrap(), out.achieved());
    assert!(out.report.total_time <= 0.5);
    assert!(out.report.audit_passed);
}

#[test]
fn zero_budget_returns_an_empty_schedule() {
    let (g, model) = torus(1, 64);
    let psi0 = WaveFunction::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
    let psi1 = density_phase(g, |x| (1.0 + 0.5 * x.cos()).sqrt(), |x| x.sin());
    let out = steer(&model, &psi0, &psi1, 0.0, 1, &SteerOptions::default()).unwrap();
    assert!(out.schedule.is_empty());
    assert!(out.report.budget_limited);
    assert_eq!(out.achieved(), distance_mod_phase(&psi0, &psi1).unwrap());
}

#[test]
fn steering_on_the_two_torus_needs_explicit_flows() {
    let (g, model) = torus(2, 16);
    let psi = WaveFunction::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
    assert!(matches!(steer(&model, &psi, &psi, 1.0, 1, &SteerOptions::default()), Err(Error::Unsupported(_))));
}

#[test]
fn constant_field_on_the_circle_becomes_a_bracket_flow() {
    let (g, model) = torus(1, 512);
    let psi0 = density_phase(g, |x| (1.0 + 0.3 * x.cos()).sqrt(), |_| 0.0);
    let c = 0.5;
    let f = VectorField::from_fn(g, |_| [c, 0.0, 0.0]);
    let target = density_phase(g, |x| (1.0 + 0.3 * (x + c).cos()).sqrt(), |_| 0.0);
    let errs: Vec<f64> = [1, 2]
        .iter()
        .map(|&r| steer_with_flows(&model, &psi0, &target, &[(f.clone(), 1.0)], 1.0, r, &SteerOptions::default()).unwrap().achieved())
        .collect();
    assert!(errs[1] < errs[0] && errs[1] <= 5e-2, "{errs:?}");
}
