use num_complex::Complex64;
use proptest::prelude::*;
use qflow::grid::{GridSpec, Point, VectorField, WaveFunction};
use qflow::transport::{apply_transport, bracket_flow_product, integrate_flow, lie_bracket};

type Modes = Vec<(f64, f64)>;

fn modes() -> impl Strategy<Value = Modes> {
    prop::collection::vec((-0.3..0.3f64, -0.3..0.3f64), 1..4)
}

fn series(m: &Modes, x: f64) -> f64 {
    m.iter().enumerate().map(|(k, (a, b))| a * ((k + 1) as f64 * x).cos() + b * ((k + 1) as f64 * x).sin()).sum()
}

/// A band-limited field on T² with component modes in x and y.
fn field(grid: GridSpec, fx: &Modes, fy: &Modes) -> VectorField {
    VectorField::from_fn(grid, |p| {
        let mut v: Point = [0.0; 3];
        v[0] = series(fx, p[0] + p[1]);
        v[1] = series(fy, p[1] - p[0]);
        v
    })
}

fn smooth(grid: GridSpec) -> WaveFunction {
    WaveFunction::from_fn(grid, |p| {
        let y = if grid.dim > 1 { p[1] } else { 0.0 };
        Complex64::new(1.0 + 0.3 * p[0].cos() * y.cos(), 0.2 * (p[0] + y).sin())
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(24) })]

    #[test]
    fn transport_is_unitary(fx in modes(), fy in modes(), t in -0.5..0.5f64) {
        let grid = GridSpec::torus(2, 32).unwrap();
        let flow = integrate_flow(&field(grid, &fx, &fy), t, None).unwrap();
        let out = apply_transport(&flow, &smooth(grid)).unwrap();
        prop_assert!((out.norm() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn jacobian_is_exponential_of_integrated_divergence(fx in modes(), t in 0.05..0.5f64) {
        // In 1-D the flow Jacobian is also ∂_x P, which the positions give directly.
        let grid = GridSpec::torus(1, 128).unwrap();
        let f = VectorField::from_fn(grid, |p| [series(&fx, p[0]), 0.0, 0.0]);
        let flow = integrate_flow(&f, t, None).unwrap();
        let jac = flow.jacobian();
        let h = grid.spacing();
        let pos = &flow.positions()[0];
        let n = grid.len();
        for i in 0..n {
            let mut dp = pos[(i + 1) % n] - pos[(i + n - 1) % n];
            dp -= grid.period() * (dp / grid.period()).round();
            let fd = dp / (2.0 * h);
            prop_assert!((fd - jac[i]).abs() <= 1e-2 * jac[i], "node {i}: {fd} vs {}", jac[i]);
        }
    }

    #[test]
    fn flows_compose_in_time(fx in modes(), fy in modes(), s in 0.05..0.3f64, t in 0.05..0.3f64) {
        let grid = GridSpec::torus(2, 32).unwrap();
        let f = field(grid, &fx, &fy);
        let composed = integrate_flow(&f, s, None).unwrap().after(&integrate_flow(&f, t, None).unwrap()).unwrap();
        let direct = integrate_flow(&f, s + t, None).unwrap();
        let psi = smooth(grid);
        let a = apply_transport(&composed, &psi).unwrap();
        let b = apply_transport(&direct, &psi).unwrap();
        prop_assert!(a.l2_distance(&b).unwrap() <= 1e-5);
    }

    #[test]
    fn bracket_is_antisymmetric_bilinear_and_satisfies_jacobi(
        a in (modes(), modes()), b in (modes(), modes()), c in (modes(), modes()), s in -2.0..2.0f64,
    ) {
        let grid = GridSpec::torus(2, 32).unwrap();
        let (f, g, h) = (field(grid, &a.0, &a.1), field(grid, &b.0, &b.1), field(grid, &c.0, &c.1));
        let br = |x: &VectorField, y: &VectorField| lie_bracket(x, y).unwrap();

        let anti = br(&f, &g).add(&br(&g, &f)).unwrap();
        prop_assert!(anti.max_norm() <= 1e-10);

        let lin = br(&f.scaled(s).add(&h).unwrap(), &g);
        let expect = br(&f, &g).scaled(s).add(&br(&h, &g)).unwrap();
        prop_assert!(lin.max_abs_diff(&expect).unwrap() <= 1e-8);

        let jacobi = br(&f, &br(&g, &h)).add(&br(&g, &br(&h, &f))).unwrap().add(&br(&h, &br(&f, &g))).unwrap();
        prop_assert!(jacobi.max_norm() <= 1e-8, "jacobi {}", jacobi.max_norm());
    }
}

#[test]
fn constant_field_pulls_back_by_translation() {
    let grid = GridSpec::torus(1, 128).unwrap();
    let (c, t) = (0.7, 0.9);
    let f = VectorField::from_fn(grid, |_| [c, 0.0, 0.0]);
    let psi = smooth(grid);
    let out = apply_transport(&integrate_flow(&f, t, None).unwrap(), &psi).unwrap();
    let exact = WaveFunction::from_fn(grid, |p| {
        let x = p[0] + c * t;
        Complex64::new(1.0 + 0.3 * x.cos(), 0.2 * x.sin())
    })
    .unwrap();
    assert!(out.l2_distance(&exact).unwrap() <= 1e-10);
}

#[test]
fn bracket_product_of_cos_and_sin_approaches_unit_translation() {
    // [cos x e₁, sin x e₁] = e₁, so the product tends to the pullback by x ↦ x + 1.
    let grid = GridSpec::torus(1, 128).unwrap();
    let f = VectorField::from_fn(grid, |p| [p[0].cos(), 0.0, 0.0]);
    let g = VectorField::from_fn(grid, |p| [p[0].sin(), 0.0, 0.0]);
    let psi = smooth(grid);
    let exact = WaveFunction::from_fn(grid, |p| {
        let x = p[0] + 1.0;
        Complex64::new(1.0 + 0.3 * x.cos(), 0.2 * x.sin())
    })
    .unwrap();
    let errs: Vec<f64> = [(0.2, 25), (0.1, 100), (0.05, 400)]
        .iter()
        .map(|&(t, n)| bracket_flow_product(&f, &g, t, n, &psi, None).unwrap().l2_distance(&exact).unwrap())
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[2] <= 5e-2, "{errs:?}");
}

#[test]
fn flow_leaving_the_line_box_is_an_error() {
    let grid = GridSpec::line(1, 64, 4.0).unwrap();
    let f = VectorField::from_fn(grid, |_| [1.0, 0.0, 0.0]);
    let psi = WaveFunction::from_fn(grid, |p| Complex64::new((-p[0] * p[0]).exp(), 0.0)).unwrap();
    let flow = integrate_flow(&f, 1.0, None);
    assert!(flow.is_err() || apply_transport(&flow.unwrap(), &psi).is_err());
}
