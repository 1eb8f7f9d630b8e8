//! Flows of vector fields and the unitary operators they induce.
//!
//! `e^{tT_f}ψ(x) = ψ(φ_f^t(x))·exp(½∫₀ᵗ div f(φ_f^s(x)) ds)` where
//! `T_f = ⟨f,∇⟩ + ½ div f`. Composition reverses order: `L_{A∘B} = L_B L_A`.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{
    divergence, partial_derivative, read_container, write_real_fields, GridData, GridSpec, Interpolant,
    Manifold, Point, VectorField, WaveFunction, MAX_DIM,
};

/// Fields on the box must vanish below this level outside the inner half-box.
pub const SUPPORT_TOL: f64 = 1e-8;

/// Allowed drift of the norm after an off-grid composition.
pub const TRANSPORT_NORM_TOL: f64 = 1e-6;

/// Anything that can report a field value and its divergence at a point.
pub trait FieldEval {
    fn dim(&self) -> usize;
    /// Returns `(f(p), div f(p))`.
    fn eval(&self, p: &Point) -> (Point, f64);
    /// Upper bound on `|f|`, used to pick the default step count.
    fn max_speed(&self) -> f64;
}

/// Off-grid evaluation of a sampled field through the grid interpolant.
pub struct SampledField {
    dim: usize,
    comps: Vec<Interpolant>,
    div: Interpolant,
    max_speed: f64,
}

impl SampledField {
    pub fn new(f: &VectorField) -> Self {
        let g = f.grid;
        let comps = f.components.iter().map(|c| Interpolant::from_real(&g, c)).collect();
        let div = Interpolant::from_real(&g, &divergence(f).values);
        Self { dim: g.dim, comps, div, max_speed: f.max_norm() }
    }

    /// Field value without the divergence.
    pub fn value(&self, p: &Point) -> Point {
        let mut out = [0.0; MAX_DIM];
        for (a, c) in self.comps.iter().enumerate() {
            out[a] = c.eval_re(p);
        }
        out
    }
}

impl FieldEval for SampledField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, p: &Point) -> (Point, f64) {
        (self.value(p), self.div.eval_re(p))
    }

    fn max_speed(&self) -> f64 {
        self.max_speed
    }
}

/// A field given in closed form as `p ↦ (f(p), div f(p))`.
pub struct AnalyticField<F> {
    pub dim: usize,
    pub max_speed: f64,
    pub f: F,
}

impl<F: Fn(&Point) -> (Point, f64)> FieldEval for AnalyticField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, p: &Point) -> (Point, f64) {
        (self.f)(p)
    }

    fn max_speed(&self) -> f64 {
        self.max_speed
    }
}

/// Default RK4 step count, `ceil(64·|t|·max|f|)`, at least one.
pub fn default_rk_steps(t: f64, max_speed: f64) -> usize {
    ((64.0 * t.abs() * max_speed).ceil() as usize).max(1)
}

/// Sampled flow `φ_f^t` with the divergence line integral along each trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMap {
    grid: GridSpec,
    positions: Vec<Vec<f64>>,
    div_integral: Vec<f64>,
}

fn centered_displacement(grid: &GridSpec, to: f64, from: f64) -> f64 {
    let d = to - from;
    match grid.manifold {
        Manifold::Torus => {
            let p = grid.period();
            d - p * (d / p).round()
        }
        Manifold::Line => d,
    }
}

fn in_box(grid: &GridSpec, p: &Point) -> bool {
    match grid.manifold {
        Manifold::Torus => true,
        Manifold::Line => p[..grid.dim].iter().all(|x| x.abs() <= grid.box_half_width),
    }
}

impl FlowMap {
    pub fn identity(grid: GridSpec) -> Self {
        let positions = (0..grid.dim).map(|a| grid.points().map(|p| p[a]).collect()).collect();
        Self { grid, positions, div_integral: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn position(&self, idx: usize) -> Point {
        let mut p = [0.0; MAX_DIM];
        for (a, c) in self.positions.iter().enumerate() {
            p[a] = c[idx];
        }
        p
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn div_integral(&self) -> &[f64] {
        &self.div_integral
    }

    /// Jacobian determinant from the Liouville formula, `exp(∫ div f)`.
    pub fn jacobian(&self) -> Vec<f64> {
        self.div_integral.iter().map(|s| s.exp()).collect()
    }

    pub fn to_diffeo(&self) -> DiffeoMap {
        DiffeoMap { grid: self.grid, map: self.positions.clone(), jacobian: self.jacobian() }
    }

    /// `self ∘ earlier`: first follow `earlier`, then `self`.
    pub fn after(&self, earlier: &FlowMap) -> Result<FlowMap> {
        self.grid.check_same(&earlier.grid)?;
        let g = self.grid;
        let (disp, s_interp) = self.interpolants();
        let mut positions = vec![vec![0.0; g.len()]; g.dim];
        let mut div_integral = vec![0.0; g.len()];
        for i in 0..g.len() {
            let y = earlier.position(i);
            if !in_box(&g, &y) {
                return Err(Error::OutOfBox { node: i });
            }
            for a in 0..g.dim {
                positions[a][i] = wrap_coord(&g, y[a] + disp[a].eval_re(&y));
            }
            div_integral[i] = earlier.div_integral[i] + s_interp.eval_re(&y);
        }
        Ok(FlowMap { grid: g, positions, div_integral })
    }

    fn interpolants(&self) -> (Vec<Interpolant>, Interpolant) {
        let g = self.grid;
        let disp = (0..g.dim)
            .map(|a| {
                let d: Vec<f64> = (0..g.len())
                    .map(|i| centered_displacement(&g, self.positions[a][i], g.point(i)[a]))
                    .collect();
                Interpolant::from_real(&g, &d)
            })
            .collect();
        (disp, Interpolant::from_real(&g, &self.div_integral))
    }

    /// Container layout: `d` position fields followed by the divergence integral.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut fields: Vec<&[f64]> = self.positions.iter().map(|c| c.as_slice()).collect();
        fields.push(&self.div_integral);
        write_real_fields(w, &self.grid, &fields)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let (grid, mut fields) = read_real(r)?;
        let div_integral = fields.pop().unwrap();
        Ok(Self { grid, positions: fields, div_integral })
    }
}

fn read_real<R: Read>(r: &mut R) -> Result<(GridSpec, Vec<Vec<f64>>)> {
    match read_container(r)? {
        GridData::Real { grid, fields } if fields.len() == grid.dim + 1 => Ok((grid, fields)),
        _ => Err(Error::InvalidArgument("expected d+1 real fields".into())),
    }
}

fn wrap_coord(grid: &GridSpec, x: f64) -> f64 {
    match grid.manifold {
        Manifold::Torus => grid.wrap(x),
        Manifold::Line => x,
    }
}

/// Integrate `ẋ = f(x)` from every node for time `t` with classical RK4,
/// carrying `∫ div f` as an extra state variable.
pub fn integrate_flow(f: &VectorField, t: f64, rk_steps: Option<usize>) -> Result<FlowMap> {
    if f.components.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("vector field"));
    }
    if !f.supported_in_interior(SUPPORT_TOL) {
        return Err(Error::SupportViolation("field does not vanish outside the inner half-box".into()));
    }
    let field = SampledField::new(f);
    integrate_flow_with(&f.grid, &field, t, rk_steps)
}

pub fn integrate_flow_with<E: FieldEval + ?Sized>(
    grid: &GridSpec,
    field: &E,
    t: f64,
    rk_steps: Option<usize>,
) -> Result<FlowMap> {
    if !t.is_finite() {
        return Err(Error::NonFinite("flow time"));
    }
    let steps = rk_steps.unwrap_or_else(|| default_rk_steps(t, field.max_speed()));
    if steps == 0 {
        return Err(Error::InvalidArgument("rk_steps must be at least 1".into()));
    }
    let g = *grid;
    let d = g.dim;
    let h = t / steps as f64;
    let mut flow = FlowMap::identity(g);
    if t == 0.0 {
        return Ok(flow);
    }
    let shift = |x: &Point, k: &Point, s: f64| {
        let mut y = *x;
        for a in 0..d {
            y[a] += s * k[a];
        }
        y
    };
    for i in 0..g.len() {
        let mut x = g.point(i);
        let mut acc = 0.0;
        for _ in 0..steps {
            let (k1, s1) = field.eval(&x);
            let (k2, s2) = field.eval(&shift(&x, &k1, 0.5 * h));
            let (k3, s3) = field.eval(&shift(&x, &k2, 0.5 * h));
            let (k4, s4) = field.eval(&shift(&x, &k3, h));
            for a in 0..d {
                x[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            }
            acc += h / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
            if !in_box(&g, &x) {
                return Err(Error::OutOfBox { node: i });
            }
        }
        if !acc.is_finite() || x[..d].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow integration"));
        }
        for a in 0..d {
            flow.positions[a][i] = wrap_coord(&g, x[a]);
        }
        flow.div_integral[i] = acc;
    }
    Ok(flow)
}

/// Sampled diffeomorphism with its Jacobian determinant.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffeoMap {
    grid: GridSpec,
    map: Vec<Vec<f64>>,
    jacobian: Vec<f64>,
}

impl DiffeoMap {
    pub fn new(grid: GridSpec, map: Vec<Vec<f64>>, jacobian: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if map.len() != grid.dim || map.iter().any(|c| c.len() != grid.len()) || jacobian.len() != grid.len() {
            return Err(Error::InvalidArgument("diffeomorphism samples do not match the grid".into()));
        }
        if map.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("diffeomorphism"));
        }
        if let Some(node) = jacobian.iter().position(|j| !(*j > 0.0 && j.is_finite())) {
            return Err(Error::NonPositiveJacobian { node, value: jacobian[node] });
        }
        Ok(Self { grid, map, jacobian })
    }

    pub fn identity(grid: GridSpec) -> Self {
        FlowMap::identity(grid).to_diffeo()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn map(&self) -> &[Vec<f64>] {
        &self.map
    }

    pub fn jacobian(&self) -> &[f64] {
        &self.jacobian
    }

    pub fn point(&self, idx: usize) -> Point {
        let mut p = [0.0; MAX_DIM];
        for (a, c) in self.map.iter().enumerate() {
            p[a] = c[idx];
        }
        p
    }

    /// `∫ J_P − vol(M)`; zero for a volume-preserving sampling of a diffeomorphism.
    pub fn volume_defect(&self) -> f64 {
        self.jacobian.iter().sum::<f64>() * self.grid.cell_volume() - self.grid.volume()
    }

    /// Largest coordinate distance from the identity map.
    pub fn max_displacement(&self) -> f64 {
        let g = &self.grid;
        (0..g.len())
            .flat_map(|i| {
                let x = g.point(i);
                (0..g.dim).map(move |a| centered_displacement(g, self.map[a][i], x[a]).abs())
            })
            .fold(0.0, f64::max)
    }

    /// `L_P ψ = √J_P · (ψ∘P)`.
    pub fn pullback(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        self.grid.check_same(psi.grid())?;
        let weights: Vec<f64> = self.jacobian.iter().map(|j| j.sqrt()).collect();
        let values = warp(&self.grid, &self.map, &weights, psi.values())?;
        checked_state(self.grid, values)
    }

    /// `√J_P · (ρ∘P)` for a real field, without any normalisation check.
    pub fn pullback_real(&self, values: &[f64]) -> Result<Vec<f64>> {
        let c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let weights: Vec<f64> = self.jacobian.iter().map(|j| j.sqrt()).collect();
        Ok(warp(&self.grid, &self.map, &weights, &c)?.into_iter().map(|v| v.re).collect())
    }

    /// `self ∘ inner`, with `J = J_self(inner(x))·J_inner(x)`.
    pub fn compose(&self, inner: &DiffeoMap) -> Result<DiffeoMap> {
        self.grid.check_same(&inner.grid)?;
        let g = self.grid;
        let disp: Vec<Interpolant> = (0..g.dim)
            .map(|a| {
                let d: Vec<f64> =
                    (0..g.len()).map(|i| centered_displacement(&g, self.map[a][i], g.point(i)[a])).collect();
                Interpolant::from_real(&g, &d)
            })
            .collect();
        let logj: Vec<f64> = self.jacobian.iter().map(|j| j.ln()).collect();
        let logj = Interpolant::from_real(&g, &logj);
        let mut map = vec![vec![0.0; g.len()]; g.dim];
        let mut jacobian = vec![0.0; g.len()];
        for i in 0..g.len() {
            let y = inner.point(i);
            if !in_box(&g, &y) {
                return Err(Error::OutOfBox { node: i });
            }
            for a in 0..g.dim {
                map[a][i] = wrap_coord(&g, y[a] + disp[a].eval_re(&y));
            }
            jacobian[i] = inner.jacobian[i] * logj.eval_re(&y).exp();
        }
        DiffeoMap::new(g, map, jacobian)
    }

    /// Container layout: `d` map components followed by the Jacobian determinant.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut fields: Vec<&[f64]> = self.map.iter().map(|c| c.as_slice()).collect();
        fields.push(&self.jacobian);
        write_real_fields(w, &self.grid, &fields)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let (grid, mut fields) = read_real(r)?;
        let jacobian = fields.pop().unwrap();
        DiffeoMap::new(grid, fields, jacobian)
    }
}

/// `out(x) = w(x)·ψ̃(P(x))` with ψ̃ the grid interpolant.
fn warp(grid: &GridSpec, map: &[Vec<f64>], weights: &[f64], values: &[Complex64]) -> Result<Vec<Complex64>> {
    let interp = Interpolant::new(grid, values);
    let mut out = Vec::with_capacity(grid.len());
    let mut p = [0.0; MAX_DIM];
    for i in 0..grid.len() {
        for (a, c) in map.iter().enumerate() {
            p[a] = c[i];
        }
        if !in_box(grid, &p) {
            return Err(Error::OutOfBox { node: i });
        }
        out.push(interp.eval(&p) * weights[i]);
    }
    Ok(out)
}

fn checked_state(grid: GridSpec, values: Vec<Complex64>) -> Result<WaveFunction> {
    let norm = (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.cell_volume()).sqrt();
    if (norm - 1.0).abs() > TRANSPORT_NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(WaveFunction::from_raw(grid, values))
}

/// `e^{tT_f}ψ` from a precomputed flow.
pub fn apply_transport(flow: &FlowMap, psi: &WaveFunction) -> Result<WaveFunction> {
    flow.grid.check_same(psi.grid())?;
    Ok(checked_state(flow.grid, apply_transport_raw(flow, psi.values())?)?)
}

/// Transport without the unit-norm check; used on generator outputs.
pub fn apply_transport_raw(flow: &FlowMap, values: &[Complex64]) -> Result<Vec<Complex64>> {
    let weights: Vec<f64> = flow.div_integral.iter().map(|s| (0.5 * s).exp()).collect();
    warp(&flow.grid, &flow.positions, &weights, values)
}

/// `[f,g] = (Dg)f − (Df)g`.
pub fn lie_bracket(f: &VectorField, g: &VectorField) -> Result<VectorField> {
    f.grid.check_same(&g.grid)?;
    let grid = f.grid;
    let d = grid.dim;
    let mut out = vec![vec![0.0; grid.len()]; d];
    for j in 0..d {
        for i in 0..d {
            let dg = partial_derivative(&grid, &g.components[i], j);
            let df = partial_derivative(&grid, &f.components[i], j);
            for n in 0..grid.len() {
                out[i][n] += f.components[j][n] * dg[n] - g.components[j][n] * df[n];
            }
        }
    }
    VectorField::new(grid, out)
}

/// `(e^{−T_f/(tn)} e^{−tT_g} e^{T_f/(tn)} e^{tT_g})^n ψ`, rightmost factor first.
pub fn bracket_flow_product(
    f: &VectorField,
    g: &VectorField,
    t: f64,
    n: usize,
    psi: &WaveFunction,
    rk_steps: Option<usize>,
) -> Result<WaveFunction> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument("bracket time must be finite and nonzero".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("bracket repetitions must be at least 1".into()));
    }
    let s = 1.0 / (t * n as f64);
    let factors = [
        integrate_flow(g, t, rk_steps)?,
        integrate_flow(f, s, rk_steps)?,
        integrate_flow(g, -t, rk_steps)?,
        integrate_flow(f, -s, rk_steps)?,
    ];
    let mut state = psi.clone();
    for _ in 0..n {
        for flow in &factors {
            state = apply_transport(flow, &state)?;
        }
    }
    Ok(state)
}

/// `T_f ψ = ⟨f,∇ψ⟩ + ½ div f ψ` by spectral differentiation.
pub fn transport_generator(f: &VectorField, values: &[Complex64]) -> Vec<Complex64> {
    let grid = f.grid;
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    let div = divergence(f);
    let mut out: Vec<Complex64> = values.iter().zip(&div.values).map(|(v, d)| v * (0.5 * d)).collect();
    for a in 0..grid.dim {
        let dr = partial_derivative(&grid, &re, a);
        let di = partial_derivative(&grid, &im, a);
        for n in 0..grid.len() {
            out[n] += Complex64::new(dr[n], di[n]) * f.components[a][n];
        }
    }
    out
}

/// `‖(e^{−tT_g} T_f e^{tT_g} − T_f − tT_{[f,g]})ψ‖`, the defect of the
/// first-order expansion of the conjugated generator.
pub fn conjugation_residual(f: &VectorField, g: &VectorField, t: f64, psi: &WaveFunction) -> Result<f64> {
    let grid = f.grid;
    let fwd = integrate_flow(g, t, None)?;
    let back = integrate_flow(g, -t, None)?;
    let moved = apply_transport(&fwd, psi)?;
    let gen = transport_generator(f, moved.values());
    let conj = apply_transport_raw(&back, &gen)?;
    let bracket = lie_bracket(f, g)?;
    let tf = transport_generator(f, psi.values());
    let tb = transport_generator(&bracket, psi.values());
    let s: f64 = (0..grid.len()).map(|n| (conj[n] - tf[n] - tb[n] * t).norm_sqr()).sum();
    Ok((s * grid.cell_volume()).sqrt())
}

/// `(φ_g^t)⋆f (x) = DP(P⁻¹x) f(P⁻¹x)` with `P = φ_g^t`.
pub fn pushforward(f: &VectorField, g: &VectorField, t: f64) -> Result<VectorField> {
    f.grid.check_same(&g.grid)?;
    let grid = f.grid;
    let d = grid.dim;
    let fwd = integrate_flow(g, t, None)?;
    let back = integrate_flow(g, -t, None)?;
    // DP = I + D(displacement), sampled then interpolated at P⁻¹(x).
    let disp: Vec<Vec<f64>> = (0..d)
        .map(|a| (0..grid.len()).map(|i| centered_displacement(&grid, fwd.positions[a][i], grid.point(i)[a])).collect())
        .collect();
    let mut jac: Vec<Vec<Interpolant>> = Vec::with_capacity(d);
    for da in &disp {
        jac.push((0..d).map(|b| Interpolant::from_real(&grid, &partial_derivative(&grid, da, b))).collect());
    }
    let fi = SampledField::new(f);
    let mut out = vec![vec![0.0; grid.len()]; d];
    for i in 0..grid.len() {
        let y = back.position(i);
        let fy = fi.value(&y);
        for a in 0..d {
            let mut v = fy[a];
            for b in 0..d {
                v += jac[a][b].eval_re(&y) * fy[b];
            }
            out[a][i] = v;
        }
    }
    VectorField::new(grid, out)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarField;

    fn torus(n: usize) -> GridSpec {
        GridSpec::torus(1, n).unwrap()
    }

    #[test]
    fn zero_field_gives_identity() {
        let g = torus(32);
        let flow = integrate_flow(&VectorField::zeros(g), 1.0, None).unwrap();
        assert_eq!(flow, FlowMap::identity(g));
    }

    #[test]
    fn constant_field_translates() {
        let g = torus(32);
        let f = VectorField::from_fn(g, |_| [0.7, 0.0, 0.0]);
        let flow = integrate_flow(&f, 1.0, None).unwrap();
        for i in 0..g.len() {
            let expect = g.wrap(g.coord(i) + 0.7);
            assert!((flow.position(i)[0] - expect).abs() < 1e-12);
            assert!(flow.div_integral()[i].abs() < 1e-12);
        }
        let psi = WaveFunction::from_fn(g, |p| Complex64::from_polar(1.0, p[0])).unwrap();
        let out = apply_transport(&flow, &psi).unwrap();
        let expect = WaveFunction::from_fn(g, |p| Complex64::from_polar(1.0, p[0] + 0.7)).unwrap();
        assert!(out.l2_distance(&expect).unwrap() < 1e-10);
    }

    #[test]
    fn bracket_of_cos_and_sin_is_unit() {
        let g = torus(64);
        let f = VectorField::from_fn(g, |p| [p[0].cos(), 0.0, 0.0]);
        let h = VectorField::from_fn(g, |p| [p[0].sin(), 0.0, 0.0]);
        let b = lie_bracket(&f, &h).unwrap();
        assert!(b.components[0].iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(lie_bracket(&f, &f).unwrap().max_norm() < 1e-12);
    }

    #[test]
    fn box_support_is_enforced() {
        let g = GridSpec::line(1, 64, 4.0).unwrap();
        let f = VectorField::from_fn(g, |_| [1.0, 0.0, 0.0]);
        assert!(matches!(integrate_flow(&f, 0.1, None), Err(Error::SupportViolation(_))));
    }

    #[test]
    fn generator_of_constant_field_is_derivative() {
        let g = torus(32);
        let f = VectorField::from_fn(g, |_| [1.0, 0.0, 0.0]);
        let vals: Vec<Complex64> = g.points().map(|p| Complex64::new(p[0].sin(), 0.0)).collect();
        let out = transport_generator(&f, &vals);
        for (p, v) in g.points().zip(&out) {
            assert!((v.re - p[0].cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn flow_and_diffeo_roundtrip_through_container() {
        let g = torus(16);
        let phi = ScalarField::from_fn(g, |p| p[0].cos());
        let f = crate::grid::spectral_gradient(&phi);
        let flow = integrate_flow(&f, 0.5, None).unwrap();
        let mut buf = Vec::new();
        flow.write_to(&mut buf).unwrap();
        assert_eq!(FlowMap::read_from(&mut buf.as_slice()).unwrap(), flow);
        let p = flow.to_diffeo();
        buf.clear();
        p.write_to(&mut buf).unwrap();
        assert_eq!(DiffeoMap::read_from(&mut buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((loglog_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }
}
