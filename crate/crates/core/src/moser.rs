//! Triangular Moser maps matching positive densities, and the 1-D
//! density-interpolation field.
//!
//! A density `μ = ρ²` on the cube `[lo, lo+W]^d` defines
//! `P_1(x) = lo + W·∫_{lo}^{x_1} h_1` and `P_2(x) = lo + W·∫_{lo}^{x_2} h_2(x_1,·)`
//! with `h_1` the normalised marginal and `h_2` the conditional density. `P`
//! carries the uniform density to `μ`. Matching two densities uses
//! `P = P_0^{-1} ∘ P_1`, inverted coordinate by coordinate.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fourier_coefficients, Density, GridSpec, Interpolant, Manifold, Point, VectorField, MAX_DIM};
use crate::transport::DiffeoMap;

/// Densities are clamped below at this level and renormalised before matching.
pub const DENSITY_FLOOR: f64 = 1e-8;

/// Densities must agree outside the inner box to this level.
pub const OUTSIDE_MATCH_TOL: f64 = 1e-10;

const INVERSION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    /// `R′`: the densities may differ only inside `Q_{R′}`.
    pub inner: f64,
    /// `R`: the map is the identity outside `Q_R`.
    pub outer: f64,
}

impl BoxSpec {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && inner < outer && outer.is_finite()) {
            return Err(Error::InvalidArgument(format!("box needs 0 < R' < R, got R'={inner}, R={outer}")));
        }
        Ok(Self { inner, outer })
    }

    fn contains(&self, half: f64, p: &[f64]) -> bool {
        p.iter().all(|x| x.abs() <= half)
    }
}

/// Spectrally exact running integral of a periodic 1-D sample, evaluable at
/// any point together with its derivative.
struct Cumulative {
    origin: f64,
    scale: f64,
    x0: f64,
    mean: f64,
    /// `(k, c_k)` with `k ≠ 0` and the Nyquist mode dropped.
    modes: Vec<(f64, Complex64)>,
    base: Complex64,
}

impl Cumulative {
    fn new(axis_grid: &GridSpec, values: &[f64], x0: f64) -> Self {
        let n = values.len();
        let c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let coeffs = fourier_coefficients(axis_grid, &c);
        let scale = 2.0 * PI / axis_grid.period();
        let origin = axis_grid.origin();
        let modes: Vec<(f64, Complex64)> = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(k, _)| *k != n / 2)
            .map(|(k, c)| ((if k < n / 2 { k as f64 } else { k as f64 - n as f64 }), *c))
            .collect();
        let mut out = Self { origin, scale, x0, mean: coeffs[0].re, modes, base: Complex64::new(0.0, 0.0) };
        out.base = out.periodic_part(x0).0;
        out
    }

    fn periodic_part(&self, x: f64) -> (Complex64, Complex64) {
        let theta = self.scale * (x - self.origin);
        let mut anti = Complex64::new(0.0, 0.0);
        let mut deriv = Complex64::new(0.0, 0.0);
        for (k, c) in &self.modes {
            let e = Complex64::from_polar(1.0, k * theta);
            anti += c * e / Complex64::new(0.0, k * self.scale);
            deriv += c * e;
        }
        (anti, deriv)
    }

    /// `(∫_{x0}^x v, v(x))`.
    fn eval(&self, x: f64) -> (f64, f64) {
        let (anti, deriv) = self.periodic_part(x);
        ((anti - self.base).re + self.mean * (x - self.x0), deriv.re + self.mean)
    }
}

/// Solve `lo + width·F(z)/mass = y` for `z ∈ [lo, lo+width]`, `F` increasing.
fn invert_monotone(cum: &Cumulative, mass: f64, lo: f64, width: f64, y: f64) -> Result<f64> {
    let g = |z: f64| {
        let (f, d) = cum.eval(z);
        (lo + width * f / mass - y, width * d / mass)
    };
    let (mut a, mut b) = (lo, lo + width);
    let (fa, fb) = (g(a).0, g(b).0);
    if fa > 0.0 || fb < 0.0 {
        if fa.abs() < 1e-11 {
            return Ok(a);
        }
        if fb.abs() < 1e-11 {
            return Ok(b);
        }
        return Err(Error::InversionFailed { target: y });
    }
    // Newton, falling back to bisection whenever the step leaves the bracket.
    let mut z = y.clamp(a, b);
    for _ in 0..200 {
        let (v, d) = g(z);
        if v.abs() < INVERSION_TOL {
            return Ok(z);
        }
        if v < 0.0 {
            a = z;
        } else {
            b = z;
        }
        let newton = z - v / d;
        z = if d > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if b - a < 1e-15 * width.max(1.0) {
            return Ok(z);
        }
    }
    Err(Error::InversionFailed { target: y })
}

/// 1-D grid with the same axis sampling as `grid`.
fn axis_grid(grid: &GridSpec) -> GridSpec {
    GridSpec { dim: 1, ..*grid }
}

/// Triangular map data for one density on the cube `[lo, lo+width]^d`.
struct Triangular {
    grid: GridSpec,
    lo: f64,
    width: f64,
    mu: Vec<f64>,
    /// Cumulative of the first marginal.
    first: Cumulative,
    mass: f64,
    /// d = 2: per-row conditional cumulative and row mass.
    rows: Vec<(Cumulative, f64)>,
    /// d = 2: interpolants of μ along axis 0, one per axis-1 node.
    columns: Vec<Interpolant>,
}

impl Triangular {
    fn new(grid: &GridSpec, mu: Vec<f64>, lo: f64, width: f64) -> Result<Self> {
        let ag = axis_grid(grid);
        let n = grid.n();
        let hi = lo + width;
        match grid.dim {
            1 => {
                let first = Cumulative::new(&ag, &mu, lo);
                let mass = first.eval(hi).0;
                Ok(Self { grid: *grid, lo, width, mu, first, mass, rows: Vec::new(), columns: Vec::new() })
            }
            2 => {
                let mut rows = Vec::with_capacity(n);
                let mut marginal = Vec::with_capacity(n);
                for i in 0..n {
                    let row = &mu[i * n..(i + 1) * n];
                    let cum = Cumulative::new(&ag, row, lo);
                    let m = cum.eval(hi).0;
                    marginal.push(m);
                    rows.push((cum, m));
                }
                let first = Cumulative::new(&ag, &marginal, lo);
                let mass = first.eval(hi).0;
                let columns = (0..n)
                    .map(|j| {
                        let col: Vec<f64> = (0..n).map(|i| mu[i * n + j]).collect();
                        Interpolant::from_real(&ag, &col)
                    })
                    .collect();
                Ok(Self { grid: *grid, lo, width, mu, first, mass, rows, columns })
            }
            d => Err(Error::Unsupported(format!("density matching in dimension {d}"))),
        }
    }

    /// `P` at grid node `idx`.
    fn forward_node(&self, idx: usize) -> Point {
        let g = &self.grid;
        let m = g.multi_index(idx);
        let x = g.point(idx);
        let mut out = [0.0; MAX_DIM];
        out[0] = self.lo + self.width * self.first.eval(x[0]).0 / self.mass;
        if g.dim == 2 {
            let (cum, rm) = &self.rows[m[0]];
            out[1] = self.lo + self.width * cum.eval(x[1]).0 / rm;
        }
        out
    }

    /// `J_P` at grid node `idx`: `width^d μ / mass`.
    fn jacobian_node(&self, idx: usize) -> f64 {
        self.width.powi(self.grid.dim as i32) * self.mu[idx] / self.mass
    }

    /// First coordinate of `P⁻¹`.
    fn invert_first(&self, y0: f64) -> Result<f64> {
        invert_monotone(&self.first, self.mass, self.lo, self.width, y0)
    }

    /// Conditional cumulative along axis 1 at an off-grid first coordinate.
    fn row_at(&self, z0: f64) -> (Cumulative, f64) {
        let row: Vec<f64> = self.columns.iter().map(|c| c.eval_re(&[z0, 0.0, 0.0])).collect();
        let cum = Cumulative::new(&axis_grid(&self.grid), &row, self.lo);
        let m = cum.eval(self.lo + self.width).0;
        (cum, m)
    }
}

fn check_positive(rho: &Density, region: impl Fn(&Point) -> bool) -> Result<()> {
    let g = rho.grid();
    for (i, v) in rho.values().iter().enumerate() {
        if region(&g.point(i)) && !(*v > 0.0) {
            return Err(Error::NonPositiveDensity { node: i });
        }
    }
    Ok(())
}

fn prepared(rho: &Density) -> Vec<f64> {
    rho.floored(DENSITY_FLOOR).squared()
}

/// Map `P` on the torus with `J_P = (2π)^d ρ₁²`, i.e. `L_P` carries the
/// uniform state `(2π)^{−d/2}` to `ρ₁`. `P(0) = 0`.
pub fn moser_map_torus(rho1: &Density) -> Result<DiffeoMap> {
    let g = *rho1.grid();
    if g.manifold != Manifold::Torus {
        return Err(Error::InvalidArgument("moser_map_torus needs a torus grid".into()));
    }
    check_positive(rho1, |_| true)?;
    let tri = Triangular::new(&g, prepared(rho1), 0.0, 2.0 * PI)?;
    let mut map = vec![vec![0.0; g.len()]; g.dim];
    let mut jac = vec![0.0; g.len()];
    for i in 0..g.len() {
        let p = tri.forward_node(i);
        for a in 0..g.dim {
            map[a][i] = p[a];
        }
        jac[i] = tri.jacobian_node(i);
    }
    DiffeoMap::new(g, map, jac)
}

/// `P = P₀⁻¹ ∘ P₁` on `[lo, lo+width]^d`, for nodes selected by `inside`;
/// identity elsewhere.
fn match_on_cube(
    rho0: &Density,
    rho1: &Density,
    lo: f64,
    width: f64,
    inside: impl Fn(&Point) -> bool,
) -> Result<DiffeoMap> {
    let g = *rho0.grid();
    g.check_same(rho1.grid())?;
    let mu0 = prepared(rho0);
    let mu1 = prepared(rho1);
    let t0 = Triangular::new(&g, mu0.clone(), lo, width)?;
    let t1 = Triangular::new(&g, mu1, lo, width)?;
    let mu0_interp = Interpolant::from_real(&g, &mu0);
    let vol = width.powi(g.dim as i32);
    let n = g.n();
    let mut map: Vec<Vec<f64>> = (0..g.dim).map(|a| g.points().map(|p| p[a]).collect()).collect();
    let mut jac = vec![1.0; g.len()];
    let mut row_cache: Vec<Option<(f64, Option<(Cumulative, f64)>)>> = (0..n).map(|_| None).collect();
    for i in 0..g.len() {
        let x = g.point(i);
        if !inside(&x) {
            continue;
        }
        let y = t1.forward_node(i);
        let m = g.multi_index(i);
        // z₀ depends only on the first coordinate of x.
        if row_cache[m[0]].is_none() {
            let z0 = t0.invert_first(y[0])?;
            row_cache[m[0]] = Some((z0, if g.dim == 2 { Some(t0.row_at(z0)) } else { None }));
        }
        let (z0, row) = row_cache[m[0]].as_ref().unwrap();
        let mut z = [0.0; MAX_DIM];
        z[0] = *z0;
        if let Some((cum, rm)) = row {
            z[1] = invert_monotone(cum, *rm, lo, width, y[1])?;
        }
        let j1 = t1.jacobian_node(i);
        let j0 = vol * mu0_interp.eval_re(&z) / t0.mass;
        if !(j0 > 0.0) {
            return Err(Error::NonPositiveJacobian { node: i, value: j0 });
        }
        for a in 0..g.dim {
            map[a][i] = if g.manifold == Manifold::Torus { g.wrap(z[a]) } else { z[a] };
        }
        jac[i] = j1 / j0;
    }
    DiffeoMap::new(g, map, jac)
}

/// Torus map with `L_P ρ₀ = ρ₁`.
pub fn moser_match(rho0: &Density, rho1: &Density) -> Result<DiffeoMap> {
    let g = *rho0.grid();
    if g.manifold != Manifold::Torus {
        return Err(Error::InvalidArgument("moser_match needs a torus grid; use moser_match_box".into()));
    }
    check_positive(rho0, |_| true)?;
    check_positive(rho1, |_| true)?;
    match_on_cube(rho0, rho1, 0.0, 2.0 * PI, |_| true)
}

/// Box map with `L_P ρ₀ = ρ₁`, equal to the identity outside `Q_R`.
pub fn moser_match_box(rho0: &Density, rho1: &Density, bx: &BoxSpec) -> Result<DiffeoMap> {
    let g = *rho0.grid();
    g.check_same(rho1.grid())?;
    if g.manifold != Manifold::Line {
        return Err(Error::InvalidArgument("moser_match_box needs a line grid".into()));
    }
    if bx.outer > g.box_half_width {
        return Err(Error::InvalidArgument(format!(
            "matching box R={} exceeds the grid half-width {}",
            bx.outer, g.box_half_width
        )));
    }
    let d = g.dim;
    let max_diff = (0..g.len())
        .filter(|&i| !bx.contains(bx.inner, &g.point(i)[..d]))
        .map(|i| (rho0.values()[i] - rho1.values()[i]).abs())
        .fold(0.0, f64::max);
    if max_diff > OUTSIDE_MATCH_TOL {
        return Err(Error::DensityMismatchOutsideBox { max_diff });
    }
    let r = bx.outer;
    check_positive(rho0, |p| bx.contains(r, &p[..d]))?;
    check_positive(rho1, |p| bx.contains(r, &p[..d]))?;
    match_on_cube(rho0, rho1, -r, 2.0 * r, |p| bx.contains(r, &p[..d]))
}

/// `v_t = (F + C_t)/μ_t` with `F(x) = ∫_{x₀}^x (μ₀ − μ₁)` and
/// `μ_t = (1−t)μ₀ + tμ₁`, so that `∂_t μ_t + ∂_x(μ_t v_t) = 0`.
///
/// On the torus `C_t` makes `∫v_t = 0`, so `v_t` is the gradient of a periodic
/// function. On the box `x₀ = −L` and `C_t = 0`, so `v_t` vanishes where the
/// densities agree.
pub fn moser_interpolation_field(rho0: &Density, rho1: &Density, t: f64) -> Result<VectorField> {
    let g = *rho0.grid();
    g.check_same(rho1.grid())?;
    if g.dim != 1 {
        return Err(Error::Unsupported("the interpolation field is one-dimensional".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("interpolation time must lie in [0,1], got {t}")));
    }
    check_positive(rho0, |_| true)?;
    check_positive(rho1, |_| true)?;
    let mu0 = prepared(rho0);
    let mu1 = prepared(rho1);
    let diff: Vec<f64> = mu0.iter().zip(&mu1).map(|(a, b)| a - b).collect();
    let cum = Cumulative::new(&g, &diff, g.origin());
    let f: Vec<f64> = g.axis_coords().iter().map(|&x| cum.eval(x).0).collect();
    let mut mu_t: Vec<f64> = mu0.iter().zip(&mu1).map(|(a, b)| (1.0 - t) * a + t * b).collect();
    if let Some(node) = mu_t.iter().position(|m| !(*m > 0.0)) {
        return Err(Error::NonPositiveDensity { node });
    }
    let c = match g.manifold {
        Manifold::Torus => {
            let num: f64 = f.iter().zip(&mu_t).map(|(a, m)| a / m).sum();
            let den: f64 = mu_t.iter().map(|m| 1.0 / m).sum();
            -num / den
        }
        Manifold::Line => 0.0,
    };
    for (m, fv) in mu_t.iter_mut().zip(&f) {
        *m = (fv + c) / *m;
    }
    VectorField::new(g, vec![mu_t])
}
