use std::f64::consts::PI;

use proptest::prelude::*;
use qflow::grid::{partial_derivative, Density, GridSpec};
use qflow::moser::{moser_interpolation_field, moser_map_torus, moser_match, moser_match_box, BoxSpec};

type Modes = Vec<(f64, f64)>;

fn modes() -> impl Strategy<Value = Modes> {
    prop::collection::vec((-0.12..0.12f64, -0.12..0.12f64), 1..4)
}

fn mass(m: &Modes, x: f64) -> f64 {
    1.0 + m.iter().enumerate().map(|(k, (a, b))| a * ((k + 1) as f64 * x).cos() + b * ((k + 1) as f64 * x).sin()).sum::<f64>()
}

fn torus_density(grid: GridSpec, m: &Modes) -> Density {
    Density::from_fn(grid, |p| {
        let y = if grid.dim > 1 { p[1] } else { 0.0 };
        (mass(m, p[0]) * mass(m, y + 0.5 * p[0].sin())).sqrt()
    })
    .unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(32) })]

    #[test]
    fn circle_match_pulls_back_exactly(m0 in modes(), m1 in modes()) {
        let grid = GridSpec::torus(1, 256).unwrap();
        let (r0, r1) = (torus_density(grid, &m0), torus_density(grid, &m1));
        let p = moser_match(&r0, &r1).unwrap();
        prop_assert!(max_diff(&p.pullback_real(r0.values()).unwrap(), r1.values()) <= 1e-6);
        prop_assert!(p.jacobian().iter().all(|&j| j > 0.0));
        // Monotone lift: consecutive images advance by less than a period.
        let x = &p.map()[0];
        let mut total = 0.0;
        for i in 0..grid.len() {
            let mut dx = x[(i + 1) % grid.len()] - x[i];
            dx -= 2.0 * PI * (dx / (2.0 * PI)).floor();
            total += dx;
        }
        prop_assert!((total - 2.0 * PI).abs() <= 1e-9);
    }

    #[test]
    fn interpolation_field_solves_the_continuity_equation(m0 in modes(), m1 in modes(), t in 0.0..=1.0f64) {
        let grid = GridSpec::torus(1, 256).unwrap();
        let (r0, r1) = (torus_density(grid, &m0), torus_density(grid, &m1));
        let (mu0, mu1) = (r0.squared(), r1.squared());
        let v = moser_interpolation_field(&r0, &r1, t).unwrap();
        let flux: Vec<f64> = (0..grid.len()).map(|i| ((1.0 - t) * mu0[i] + t * mu1[i]) * v.components[0][i]).collect();
        let div = partial_derivative(&grid, &flux, 0);
        let residual = (0..grid.len()).map(|i| (mu1[i] - mu0[i] + div[i]).abs()).fold(0.0, f64::max);
        prop_assert!(residual <= 1e-8, "residual {residual}");
        let mean: f64 = v.components[0].iter().sum::<f64>() / grid.len() as f64;
        prop_assert!(mean.abs() <= 1e-12);
    }
}

#[test]
fn uniform_state_is_carried_to_the_target() {
    let grid = GridSpec::torus(1, 256).unwrap();
    let r1 = torus_density(grid, &vec![(0.3, -0.2), (0.1, 0.0)]);
    let uniform = Density::from_fn(grid, |_| 1.0).unwrap();
    let p = moser_map_torus(&r1).unwrap();
    assert!(max_diff(&p.pullback_real(uniform.values()).unwrap(), r1.values()) <= 1e-8);
    assert_eq!(p.map()[0][0], 0.0);
}

#[test]
fn two_torus_match() {
    let grid = GridSpec::torus(2, 64).unwrap();
    let r0 = torus_density(grid, &vec![(0.1, 0.05)]);
    let r1 = torus_density(grid, &vec![(-0.05, 0.1), (0.05, 0.0)]);
    let p = moser_match(&r0, &r1).unwrap();
    let err = max_diff(&p.pullback_real(r0.values()).unwrap(), r1.values());
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn box_match_is_identity_outside_the_outer_cube() {
    let grid = GridSpec::line(2, 64, 6.0).unwrap();
    let bx = BoxSpec::new(2.0, 3.0).unwrap();
    let bump = |r2: f64| if r2 < 4.0 { (-1.0 / (1.0 - r2 / 4.0)).exp() } else { 0.0 };
    let base = |x: f64, y: f64| (-(x * x + y * y) / 6.0).exp();
    let r0 = Density::from_fn(grid, |p| base(p[0], p[1]).sqrt()).unwrap();
    let r1 = Density::from_fn(grid, |p| (base(p[0], p[1]) + 0.4 * bump(p[0] * p[0] + p[1] * p[1]) * p[0].sin()).sqrt()).unwrap();
    // Equal mass keeps the outer region matched after normalisation.
    let p = moser_match_box(&r0, &r1, &bx).unwrap();
    for i in 0..grid.len() {
        let x = grid.point(i);
        if x[0].abs() > bx.outer || x[1].abs() > bx.outer {
            assert_eq!(p.map()[0][i], x[0]);
            assert_eq!(p.map()[1][i], x[1]);
            assert_eq!(p.jacobian()[i], 1.0);
        }
    }
    let err = max_diff(&p.pullback_real(r0.values()).unwrap(), r1.values());
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn vanishing_density_is_rejected() {
    let grid = GridSpec::torus(1, 64).unwrap();
    let r0 = Density::from_fn(grid, |_| 1.0).unwrap();
    let r1 = Density::from_fn(grid, |p| p[0].sin().abs()).unwrap();
    assert!(moser_match(&r0, &r1).is_err());
}
