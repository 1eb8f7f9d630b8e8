//! Phase programs over the iterated phase families `H_j`.
//!
//! Torus: `H_0 = span{sin⟨bⱼ,x⟩, cos⟨bⱼ,x⟩}` and `H_j` collects
//! `φ₀ − Σ_k |∇φ_k|²` with `φ₀, φ_k ∈ H_{j−1}`. Line: `H_0` is spanned by
//! the control directions and `H_j` by `φ₀ − Σ_k ∂_{a_k}φ_k`. Constants
//! are always available as global phases.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::expr::{Exponent, GaussPoly, PhaseExpr, TrigPoly, Wavevector};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Manifold, PhaseField, MAX_DIM};
use crate::spectral_sim::ModelSpec;

/// Coefficients below this are treated as absent.
const COEF_TOL: f64 = 1e-13;

/// Relative residual above which a target counts as not representable.
pub const REPRESENTABLE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    /// `e^{iΣαⱼWⱼ}`.
    BasicPhase { alpha: Vec<f64> },
    /// `e^{−i|∇φ|²}` with `φ` the inner denotation.
    NegGradSquare { inner: Box<PhaseProgram> },
    /// `e^{−i∂_axis φ}` with `φ` the inner denotation; realized by conjugating a
    /// translation whose length is the realization time scale.
    ConjugatedStep { inner: Box<PhaseProgram>, axis: usize },
}

/// A phase `constant + Σ denotation(instruction)`, with the closed form it
/// was compiled from.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseProgram {
    pub depth: usize,
    pub constant: f64,
    pub instructions: Vec<Instruction>,
    target: PhaseExpr,
}

impl PhaseProgram {
    pub fn target(&self) -> &PhaseExpr {
        &self.target
    }

    /// Closed form of what the instructions compute.
    pub fn denote(&self, model: &ModelSpec) -> PhaseExpr {
        let grid = model.grid();
        let mut acc = PhaseExpr::zero(grid).add(&constant_expr(grid, self.constant)).unwrap();
        for ins in &self.instructions {
            let term = match ins {
                Instruction::BasicPhase { alpha } => basic_expr(model, alpha),
                Instruction::NegGradSquare { inner } => {
                    inner.denote(model).grad_square().expect("torus phases are closed under |∇·|²").scaled(-1.0)
                }
                Instruction::ConjugatedStep { inner, axis } => inner.denote(model).partial(*axis).scaled(-1.0),
            };
            acc = acc.add(&term).unwrap();
        }
        acc
    }

    /// Grid samples of [`Self::denote`].
    pub fn denotation(&self, model: &ModelSpec) -> PhaseField {
        self.denote(model).sample(model.grid())
    }

    /// Grid samples of the stored target.
    pub fn target_field(&self, grid: &GridSpec) -> PhaseField {
        self.target.sample(grid)
    }

    /// Number of `BasicPhase` leaves in the instruction tree.
    pub fn leaf_count(&self) -> usize {
        self.instructions
            .iter()
            .map(|i| match i {
                Instruction::BasicPhase { .. } => 1,
                Instruction::NegGradSquare { inner } | Instruction::ConjugatedStep { inner, .. } => inner.leaf_count(),
            })
            .sum()
    }
}

fn constant_expr(grid: &GridSpec, c: f64) -> PhaseExpr {
    match grid.manifold {
        Manifold::Torus => PhaseExpr::Trig(TrigPoly::constant(grid.dim, c)),
        Manifold::Line => {
            let mut g = GaussPoly::zero(grid.dim);
            g.constant = c;
            PhaseExpr::Gauss(g)
        }
    }
}

fn torus_direction(dim: usize, j: usize) -> Wavevector {
    let mut k = [0; MAX_DIM];
    if j + 1 == dim {
        k[..dim].iter_mut().for_each(|c| *c = 1);
    } else {
        k[j] = 1;
    }
    k
}

/// `Σ αⱼ Wⱼ` in closed form.
pub fn basic_expr(model: &ModelSpec, alpha: &[f64]) -> PhaseExpr {
    let d = model.grid().dim;
    match model.grid().manifold {
        Manifold::Torus => {
            let mut t = TrigPoly::zero(d);
            for j in 0..d {
                t.add_mode(torus_direction(d, j), alpha[2 * j + 1], alpha[2 * j]);
            }
            PhaseExpr::Trig(t)
        }
        Manifold::Line => {
            let mut g = GaussPoly::gaussian(d, alpha[d]);
            g.linear[..d].copy_from_slice(&alpha[..d]);
            PhaseExpr::Gauss(g)
        }
    }
}

/// Compile a closed-form phase at depth at most `depth`.
pub fn compile_expr(model: &ModelSpec, expr: &PhaseExpr, depth: usize) -> Result<PhaseProgram> {
    match expr {
        PhaseExpr::Trig(t) => {
            if model.grid().manifold != Manifold::Torus {
                return Err(Error::InvalidArgument("trigonometric phase on a line model".into()));
            }
            let scale = t.sup_bound().max(1.0);
            compile_trig(&t.pruned(COEF_TOL * scale), depth, scale)
        }
        PhaseExpr::Gauss(g) => {
            if model.grid().manifold != Manifold::Line {
                return Err(Error::InvalidArgument("Gaussian phase on a torus model".into()));
            }
            compile_gauss(g, depth)
        }
    }
}

/// Sample-level fit of a target phase into closed form: exact Fourier
/// interpolation on the torus, least squares onto `{1, xⱼ, ∂ⁿG : |n| ≤ depth}`
/// on the line. Returns the closed form and the sup-norm misfit.
pub fn fit_phase(grid: &GridSpec, target: &PhaseField, depth: usize) -> Result<(PhaseExpr, f64)> {
    grid.check_same(&target.grid)?;
    let expr = match grid.manifold {
        Manifold::Torus => {
            let scale = target.max_abs().max(1.0);
            PhaseExpr::Trig(TrigPoly::from_samples(grid, &target.values, COEF_TOL * scale)?)
        }
        Manifold::Line => PhaseExpr::Gauss(fit_gauss(grid, &target.values, depth)?),
    };
    let residual = expr.sample(grid).max_abs_diff(target)?;
    Ok((expr, residual))
}

// ---------------------------------------------------------------- torus

/// Wavevectors whose sine and cosine lie in `H_depth`.
pub fn torus_wavevectors(dim: usize, depth: usize) -> BTreeSet<Wavevector> {
    let mut set: BTreeSet<Wavevector> = (0..dim).map(|j| torus_direction(dim, j)).collect();
    for _ in 0..depth {
        let prev: Vec<Wavevector> = set.iter().copied().collect();
        for a in &prev {
            for b in &prev {
                let ab: i32 = (0..dim).map(|i| a[i] * b[i]).sum();
                if ab == 0 {
                    continue;
                }
                for k in [[a[0] + b[0], a[1] + b[1], a[2] + b[2]], [a[0] - b[0], a[1] - b[1], a[2] - b[2]]] {
                    if k.iter().any(|&c| c != 0) {
                        let t = TrigPoly::mode(dim, k, 1.0, 0.0);
                        set.extend(t.modes.keys().copied());
                    }
                }
            }
        }
    }
    set
}

fn trig_residual_outside(t: &TrigPoly, allowed: &BTreeSet<Wavevector>) -> f64 {
    t.modes.iter().filter(|(k, _)| !allowed.contains(*k)).map(|(_, (c, s))| c.hypot(*s)).fold(0.0, f64::max)
}

fn compile_trig(t: &TrigPoly, depth: usize, scale: f64) -> Result<PhaseProgram> {
    let dim = t.dim;
    let h0 = torus_wavevectors(dim, 0);
    if trig_residual_outside(t, &h0) == 0.0 {
        let mut alpha = vec![0.0; 2 * dim];
        for j in 0..dim {
            if let Some((c, s)) = t.modes.get(&torus_direction(dim, j)) {
                alpha[2 * j] = *s;
                alpha[2 * j + 1] = *c;
            }
        }
        let instructions = if alpha.iter().any(|a| *a != 0.0) { vec![Instruction::BasicPhase { alpha }] } else { vec![] };
        return Ok(PhaseProgram { depth: 0, constant: t.constant, instructions, target: PhaseExpr::Trig(t.clone()) });
    }
    if depth == 0 {
        return Err(Error::NotRepresentable { depth, residual: trig_residual_outside(t, &h0) });
    }
    let below = torus_wavevectors(dim, depth - 1);
    if trig_residual_outside(t, &below) == 0.0 {
        return compile_trig(t, depth - 1, scale);
    }
    let reach = torus_wavevectors(dim, depth);
    let outside = trig_residual_outside(t, &reach);
    if outside > REPRESENTABLE_TOL * scale {
        return Err(Error::NotRepresentable { depth, residual: outside });
    }

    // Unknowns: β over the basis of H_{depth−1}, the symmetric Gram weights S,
    // and a constant. Rows: constant, then cos/sin coefficient of each mode.
    let basis: Vec<(Wavevector, bool)> = below.iter().flat_map(|k| [(*k, false), (*k, true)]).collect();
    let w: Vec<TrigPoly> =
        basis.iter().map(|(k, is_sin)| if *is_sin { TrigPoly::mode(dim, *k, 0.0, 1.0) } else { TrigPoly::mode(dim, *k, 1.0, 0.0) }).collect();
    let grads: Vec<Vec<TrigPoly>> = w.iter().map(|p| (0..dim).map(|a| p.partial(a)).collect()).collect();
    let nb = basis.len();
    let pairs: Vec<(usize, usize)> = (0..nb).flat_map(|a| (a..nb).map(move |b| (a, b))).collect();
    let mut columns: Vec<TrigPoly> = w.clone();
    for &(a, b) in &pairs {
        let mut g = TrigPoly::zero(dim);
        for ax in 0..dim {
            g = g.add(&grads[a][ax].mul(&grads[b][ax]));
        }
        let m = if a == b { -1.0 } else { -2.0 };
        columns.push(g.scaled(m));
    }
    columns.push(TrigPoly::constant(dim, 1.0));
    let rows: Vec<Wavevector> = reach.iter().copied().collect();
    let nrow = 1 + 2 * rows.len();
    let coeffs = |p: &TrigPoly| -> Vec<f64> {
        let mut v = vec![p.constant];
        for k in &rows {
            let (c, s) = p.modes.get(k).copied().unwrap_or((0.0, 0.0));
            v.push(c);
            v.push(s);
        }
        v
    };
    let mut a = DMatrix::<f64>::zeros(nrow, columns.len());
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in coeffs(col).into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    let y = DVector::from_vec(coeffs(t));
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&y, 1e-12).map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))?;
    let residual = (&a * &x - &y).amax();
    if residual > REPRESENTABLE_TOL * scale {
        return Err(Error::NotRepresentable { depth, residual });
    }

    let beta = TrigPoly::zero(dim);
    let beta = (0..nb).fold(beta, |acc, i| acc.add(&w[i].scaled(x[i])));
    let mut s = DMatrix::<f64>::zeros(nb, nb);
    for (p, &(i, j)) in pairs.iter().enumerate() {
        s[(i, j)] = x[nb + p];
        s[(j, i)] = x[nb + p];
    }
    let mut constant = x[nb + pairs.len()];
    // Shift S into the PSD cone with E = diag(1/|k|²): Σ E_aa|∇w_a|² = #pairs.
    let e_inv_sqrt: Vec<f64> =
        basis.iter().map(|(k, _)| (0..dim).map(|i| (k[i] * k[i]) as f64).sum::<f64>().sqrt()).collect();
    let scaled = DMatrix::from_fn(nb, nb, |i, j| s[(i, j)] * e_inv_sqrt[i] * e_inv_sqrt[j]);
    let lam_min = SymmetricEigen::new(scaled).eigenvalues.min();
    if lam_min < 0.0 {
        for i in 0..nb {
            s[(i, i)] -= lam_min / (e_inv_sqrt[i] * e_inv_sqrt[i]);
        }
        constant -= lam_min * (nb / 2) as f64;
    }
    let eig = SymmetricEigen::new(s);
    let mu_max = eig.eigenvalues.max().max(0.0);

    let mut instructions = Vec::new();
    let mut phi0 = compile_trig(&beta.pruned(COEF_TOL * scale), depth - 1, scale)?;
    constant += phi0.constant;
    instructions.append(&mut phi0.instructions);
    for (k, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu <= 1e-13 * mu_max.max(1.0) {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let phi = (0..nb).fold(TrigPoly::zero(dim), |acc, i| acc.add(&w[i].scaled(mu.sqrt() * v[i])));
        let inner = compile_trig(&phi.pruned(COEF_TOL * scale), depth - 1, scale)?;
        instructions.push(Instruction::NegGradSquare { inner: Box::new(inner) });
    }
    Ok(PhaseProgram { depth, constant, instructions, target: PhaseExpr::Trig(t.clone()) })
}

// ---------------------------------------------------------------- line

fn total_order(n: &Exponent) -> u32 {
    n.iter().sum()
}

/// Expand the Gaussian part in the basis `∂ⁿG`. Each `xⁿG` has leading term
/// `(−1)^{|n|}∂ⁿG`, so peeling off highest-order monomials terminates.
fn hermite_coefficients(g: &GaussPoly) -> Vec<(Exponent, f64)> {
    let mut rest = g.gauss.clone();
    let mut out = Vec::new();
    loop {
        rest.retain(|_, c| c.abs() > COEF_TOL);
        let Some((&n, &c)) = rest.iter().max_by_key(|(n, _)| (total_order(n), **n)) else { break };
        let sign = if total_order(&n) % 2 == 0 { 1.0 } else { -1.0 };
        let coef = sign * c;
        out.push((n, coef));
        for (m, v) in GaussPoly::hermite(g.dim, n).gauss {
            *rest.entry(m).or_insert(0.0) -= coef * v;
        }
        rest.remove(&n);
    }
    out
}

fn compile_gauss(g: &GaussPoly, depth: usize) -> Result<PhaseProgram> {
    let dim = g.dim;
    let terms = hermite_coefficients(g);
    let too_deep: f64 = terms.iter().filter(|(n, _)| total_order(n) as usize > depth).map(|(_, c)| c.abs()).fold(0.0, f64::max);
    if too_deep > 0.0 {
        return Err(Error::NotRepresentable { depth, residual: too_deep });
    }
    let mut alpha = vec![0.0; dim + 1];
    alpha[..dim].copy_from_slice(&g.linear[..dim]);
    let mut instructions = Vec::new();
    let mut used = 0;
    for (n, c) in terms {
        if total_order(&n) == 0 {
            alpha[dim] += c;
            continue;
        }
        let axis = (0..dim).find(|&a| n[a] > 0).unwrap();
        let mut m = n;
        m[axis] -= 1;
        // −∂_axis(−c ∂^m G) = c ∂ⁿG
        let inner = compile_gauss(&GaussPoly::hermite(dim, m).scaled(-c), total_order(&m) as usize)?;
        used = used.max(inner.depth + 1);
        instructions.push(Instruction::ConjugatedStep { inner: Box::new(inner), axis });
    }
    if alpha.iter().any(|a| *a != 0.0) {
        instructions.insert(0, Instruction::BasicPhase { alpha });
    }
    Ok(PhaseProgram { depth: used, constant: g.constant, instructions, target: PhaseExpr::Gauss(g.clone()) })
}

fn multi_indices(dim: usize, max_order: u32) -> Vec<Exponent> {
    let mut out = Vec::new();
    let mut n = [0u32; MAX_DIM];
    loop {
        if total_order(&n) <= max_order {
            out.push(n);
        }
        let mut a = 0;
        loop {
            if a == dim {
                return out;
            }
            n[a] += 1;
            if n[a] <= max_order {
                break;
            }
            n[a] = 0;
            a += 1;
        }
    }
}

fn fit_gauss(grid: &GridSpec, values: &[f64], depth: usize) -> Result<GaussPoly> {
    let dim = grid.dim;
    let mut basis: Vec<GaussPoly> = vec![];
    let mut c = GaussPoly::zero(dim);
    c.constant = 1.0;
    basis.push(c);
    for a in 0..dim {
        basis.push(GaussPoly::linear(dim, a, 1.0));
    }
    for n in multi_indices(dim, depth as u32) {
        basis.push(GaussPoly::hermite(dim, n));
    }
    let a = DMatrix::from_fn(grid.len(), basis.len(), |i, j| basis[j].eval(&grid.point(i)));
    let y = DVector::from_column_slice(values);
    let x = a.svd(true, true).solve(&y, 1e-12).map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))?;
    Ok(basis.iter().zip(x.iter()).fold(GaussPoly::zero(dim), |acc, (b, c)| acc.add(&b.scaled(*c))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(d: usize, n: usize) -> ModelSpec {
        ModelSpec::torus_trig(GridSpec::torus(d, n).unwrap(), None).unwrap()
    }

    fn check_denotation(model: &ModelSpec, p: &PhaseProgram) {
        let diff = p.denotation(model).max_abs_diff(&p.target_field(model.grid())).unwrap();
        assert!(diff < 1e-9, "denotation off by {diff}");
    }

    #[test]
    fn cos_squared_needs_depth_one() {
        let m = torus(1, 32);
        let c = TrigPoly::mode(1, [1, 0, 0], 1.0, 0.0);
        let target = PhaseExpr::Trig(c.mul(&c));
        assert!(matches!(compile_expr(&m, &target, 0), Err(Error::NotRepresentable { depth: 0, .. })));
        let p = compile_expr(&m, &target, 1).unwrap();
        assert_eq!(p.depth, 1);
        check_denotation(&m, &p);
    }

    #[test]
    fn higher_modes_on_two_torus() {
        let m = torus(2, 32);
        let mut t = TrigPoly::zero(2);
        t.add_mode([2, 1, 0], 0.3, -0.2);
        t.add_mode([0, 1, 0], 0.1, 0.0);
        t.add_mode([1, 1, 0], 0.0, 0.4);
        let target = PhaseExpr::Trig(t);
        let p = compile_expr(&m, &target, 2).unwrap();
        check_denotation(&m, &p);
    }

    #[test]
    fn hermite_chain_on_line() {
        let g = GridSpec::line(1, 128, 10.0).unwrap();
        let m = ModelSpec::line_dipole_gauss(g, None, 0.0, 0.0).unwrap();
        // x³G has components up to ∂³G.
        let mut e = GaussPoly::zero(1);
        e.gauss.insert([3, 0, 0], 0.5);
        e.linear[0] = -0.25;
        let target = PhaseExpr::Gauss(e);
        assert!(matches!(compile_expr(&m, &target, 2), Err(Error::NotRepresentable { depth: 2, .. })));
        let p = compile_expr(&m, &target, 3).unwrap();
        assert_eq!(p.depth, 3);
        check_denotation(&m, &p);
    }

    #[test]
    fn line_fit_recovers_hermite_combination() {
        let g = GridSpec::line(1, 128, 10.0).unwrap();
        let e = GaussPoly::hermite(1, [2, 0, 0]).scaled(0.7).add(&GaussPoly::linear(1, 0, 0.2));
        let field = PhaseExpr::Gauss(e).sample(&g);
        let (_, res) = fit_phase(&g, &field, 2).unwrap();
        assert!(res < 1e-10);
        let (_, res1) = fit_phase(&g, &field, 1).unwrap();
        assert!(res1 > 1e-3);
    }
}
