//! Exact symbolic phases.
//!
//! Torus phases are real trigonometric polynomials; line phases are
//! `c + ⟨a,x⟩ + p(x)e^{−|x|²/2}` with `p` a polynomial. Both families are
//! closed under the operations the synthesizers need (scaling, sums,
//! partial derivatives; products on the torus).

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fourier_coefficients, GridSpec, Manifold, Point, ScalarField, MAX_DIM};

/// Wavevector with first nonzero component positive.
pub type Wavevector = [i32; MAX_DIM];

/// `constant + Σ_k (c_k cos⟨k,x⟩ + s_k sin⟨k,x⟩)` over canonical `k ≠ 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrigPoly {
    pub dim: usize,
    pub constant: f64,
    pub modes: BTreeMap<Wavevector, (f64, f64)>,
}

fn canonical(k: Wavevector) -> (Wavevector, f64) {
    match k.iter().find(|&&c| c != 0) {
        Some(&c) if c < 0 => ([-k[0], -k[1], -k[2]], -1.0),
        _ => (k, 1.0),
    }
}

fn is_zero_k(k: &Wavevector) -> bool {
    k.iter().all(|&c| c == 0)
}

fn dot(k: &Wavevector, p: &Point, dim: usize) -> f64 {
    (0..dim).map(|a| k[a] as f64 * p[a]).sum()
}

impl TrigPoly {
    pub fn zero(dim: usize) -> Self {
        Self { dim, ..Default::default() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self { dim, constant: c, modes: BTreeMap::new() }
    }

    /// `c cos⟨k,x⟩ + s sin⟨k,x⟩` for any integer `k`.
    pub fn mode(dim: usize, k: Wavevector, c: f64, s: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_mode(k, c, s);
        p
    }

    pub fn add_mode(&mut self, k: Wavevector, c: f64, s: f64) {
        if is_zero_k(&k) {
            self.constant += c;
            return;
        }
        let (k, sign) = canonical(k);
        let e = self.modes.entry(k).or_insert((0.0, 0.0));
        e.0 += c;
        e.1 += sign * s;
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = self.clone();
        out.constant += other.constant;
        for (k, (c, s)) in &other.modes {
            out.add_mode(*k, *c, *s);
        }
        out
    }

    pub fn scaled(&self, a: f64) -> TrigPoly {
        TrigPoly {
            dim: self.dim,
            constant: a * self.constant,
            modes: self.modes.iter().map(|(k, (c, s))| (*k, (a * c, a * s))).collect(),
        }
    }

    pub fn partial(&self, axis: usize) -> TrigPoly {
        let mut out = TrigPoly::zero(self.dim);
        for (k, (c, s)) in &self.modes {
            let ka = k[axis] as f64;
            if ka != 0.0 {
                out.add_mode(*k, ka * s, -ka * c);
            }
        }
        out
    }

    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = TrigPoly::constant(self.dim, self.constant * other.constant);
        for (k, (c, s)) in &other.modes {
            out.add_mode(*k, self.constant * c, self.constant * s);
        }
        for (k, (c, s)) in &self.modes {
            out.add_mode(*k, other.constant * c, other.constant * s);
        }
        for (a, (ca, sa)) in &self.modes {
            for (b, (cb, sb)) in &other.modes {
                let plus = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
                let minus = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
                // cos a cos b, sin a sin b, sin a cos b, cos a sin b
                out.add_mode(minus, 0.5 * (ca * cb + sa * sb), 0.5 * (sa * cb - ca * sb));
                out.add_mode(plus, 0.5 * (ca * cb - sa * sb), 0.5 * (sa * cb + ca * sb));
            }
        }
        out
    }

    pub fn grad_square(&self) -> TrigPoly {
        (0..self.dim).fold(TrigPoly::zero(self.dim), |acc, a| {
            let p = self.partial(a);
            acc.add(&p.mul(&p))
        })
    }

    pub fn eval(&self, p: &Point) -> f64 {
        self.modes.iter().fold(self.constant, |acc, (k, (c, s))| {
            let t = dot(k, p, self.dim);
            acc + c * t.cos() + s * t.sin()
        })
    }

    /// Drop modes whose coefficients are below `tol` in absolute value.
    pub fn pruned(&self, tol: f64) -> TrigPoly {
        TrigPoly {
            dim: self.dim,
            constant: self.constant,
            modes: self.modes.iter().filter(|(_, (c, s))| c.abs().max(s.abs()) > tol).map(|(k, v)| (*k, *v)).collect(),
        }
    }

    /// Upper bound of `sup |φ|`.
    pub fn sup_bound(&self) -> f64 {
        self.modes.values().map(|(c, s)| c.hypot(*s)).sum::<f64>() + self.constant.abs()
    }

    /// Upper bound of `sup |∇φ|²`.
    pub fn grad_sup_sq_bound(&self) -> f64 {
        (0..self.dim).map(|a| self.partial(a).sup_bound().powi(2)).sum()
    }

    /// Exact trigonometric interpolant of grid samples. Modes at the Nyquist
    /// index are rejected: they are not resolved as derivatives.
    pub fn from_samples(grid: &GridSpec, values: &[f64], tol: f64) -> Result<TrigPoly> {
        if grid.manifold != Manifold::Torus {
            return Err(Error::InvalidArgument("trigonometric phases live on the torus".into()));
        }
        let data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let coef = fourier_coefficients(grid, &data);
        let n = grid.n() as i64;
        let mut out = TrigPoly::zero(grid.dim);
        for (idx, a) in coef.iter().enumerate() {
            if a.norm() <= tol {
                continue;
            }
            let m = grid.multi_index(idx);
            let mut k = [0i32; MAX_DIM];
            for ax in 0..grid.dim {
                let mi = m[ax] as i64;
                if mi == n / 2 {
                    return Err(Error::InvalidArgument("phase has energy at the Nyquist mode".into()));
                }
                k[ax] = if mi > n / 2 { (mi - n) as i32 } else { mi as i32 };
            }
            // Indices k and −k each contribute half of the real mode.
            if is_zero_k(&k) {
                out.constant += a.re;
            } else {
                out.add_mode(k, a.re, -a.im);
            }
        }
        Ok(out)
    }
}

/// Monomial exponent of `x^n`.
pub type Exponent = [u32; MAX_DIM];

/// `constant + ⟨linear, x⟩ + p(x)e^{−|x|²/2}` with `p = Σ gauss[n] xⁿ`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaussPoly {
    pub dim: usize,
    pub constant: f64,
    pub linear: [f64; MAX_DIM],
    pub gauss: BTreeMap<Exponent, f64>,
}

impl GaussPoly {
    pub fn zero(dim: usize) -> Self {
        Self { dim, ..Default::default() }
    }

    /// `c e^{−|x|²/2}`.
    pub fn gaussian(dim: usize, c: f64) -> Self {
        let mut g = Self::zero(dim);
        g.gauss.insert([0; MAX_DIM], c);
        g
    }

    pub fn linear(dim: usize, axis: usize, c: f64) -> Self {
        let mut g = Self::zero(dim);
        g.linear[axis] = c;
        g
    }

    fn add_monomial(&mut self, n: Exponent, c: f64) {
        if c != 0.0 {
            *self.gauss.entry(n).or_insert(0.0) += c;
        }
    }

    pub fn add(&self, other: &GaussPoly) -> GaussPoly {
        let mut out = self.clone();
        out.constant += other.constant;
        for a in 0..MAX_DIM {
            out.linear[a] += other.linear[a];
        }
        for (n, c) in &other.gauss {
            out.add_monomial(*n, *c);
        }
        out
    }

    pub fn scaled(&self, s: f64) -> GaussPoly {
        GaussPoly {
            dim: self.dim,
            constant: s * self.constant,
            linear: self.linear.map(|v| s * v),
            gauss: self.gauss.iter().map(|(n, c)| (*n, s * c)).collect(),
        }
    }

    /// `∂_a(xⁿG) = nₐx^{n−eₐ}G − x^{n+eₐ}G`.
    pub fn partial(&self, axis: usize) -> GaussPoly {
        let mut out = GaussPoly::zero(self.dim);
        out.constant = self.linear[axis];
        for (n, c) in &self.gauss {
            if n[axis] > 0 {
                let mut m = *n;
                m[axis] -= 1;
                out.add_monomial(m, c * n[axis] as f64);
            }
            let mut m = *n;
            m[axis] += 1;
            out.add_monomial(m, -c);
        }
        out
    }

    /// `∂ⁿ e^{−|x|²/2}`.
    pub fn hermite(dim: usize, n: Exponent) -> GaussPoly {
        let mut g = GaussPoly::gaussian(dim, 1.0);
        for a in 0..dim {
            for _ in 0..n[a] {
                g = g.partial(a);
            }
        }
        g
    }

    pub fn eval(&self, p: &Point) -> f64 {
        let r2: f64 = p[..self.dim].iter().map(|x| x * x).sum();
        let gauss = (-0.5 * r2).exp();
        let poly: f64 = self
            .gauss
            .iter()
            .map(|(n, c)| c * (0..self.dim).map(|a| p[a].powi(n[a] as i32)).product::<f64>())
            .sum();
        let lin: f64 = (0..self.dim).map(|a| self.linear[a] * p[a]).sum();
        self.constant + lin + poly * gauss
    }

    pub fn is_linear(&self) -> bool {
        self.gauss.values().all(|c| *c == 0.0)
    }
}

/// A phase in closed form.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseExpr {
    Trig(TrigPoly),
    Gauss(GaussPoly),
}

impl PhaseExpr {
    pub fn zero(grid: &GridSpec) -> Self {
        match grid.manifold {
            Manifold::Torus => PhaseExpr::Trig(TrigPoly::zero(grid.dim)),
            Manifold::Line => PhaseExpr::Gauss(GaussPoly::zero(grid.dim)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PhaseExpr::Trig(t) => t.dim,
            PhaseExpr::Gauss(g) => g.dim,
        }
    }

    pub fn eval(&self, p: &Point) -> f64 {
        match self {
            PhaseExpr::Trig(t) => t.eval(p),
            PhaseExpr::Gauss(g) => g.eval(p),
        }
    }

    pub fn sample(&self, grid: &GridSpec) -> ScalarField {
        ScalarField::from_fn(*grid, |p| self.eval(p))
    }

    pub fn scaled(&self, s: f64) -> PhaseExpr {
        match self {
            PhaseExpr::Trig(t) => PhaseExpr::Trig(t.scaled(s)),
            PhaseExpr::Gauss(g) => PhaseExpr::Gauss(g.scaled(s)),
        }
    }

    pub fn add(&self, other: &PhaseExpr) -> Result<PhaseExpr> {
        match (self, other) {
            (PhaseExpr::Trig(a), PhaseExpr::Trig(b)) => Ok(PhaseExpr::Trig(a.add(b))),
            (PhaseExpr::Gauss(a), PhaseExpr::Gauss(b)) => Ok(PhaseExpr::Gauss(a.add(b))),
            _ => Err(Error::InvalidArgument("cannot mix torus and line phases".into())),
        }
    }

    pub fn partial(&self, axis: usize) -> PhaseExpr {
        match self {
            PhaseExpr::Trig(t) => PhaseExpr::Trig(t.partial(axis)),
            PhaseExpr::Gauss(g) => PhaseExpr::Gauss(g.partial(axis)),
        }
    }

    /// `|∇φ|²`; on the line only linear phases stay in the family.
    pub fn grad_square(&self) -> Result<PhaseExpr> {
        match self {
            PhaseExpr::Trig(t) => Ok(PhaseExpr::Trig(t.grad_square())),
            PhaseExpr::Gauss(g) if g.is_linear() => {
                let c = g.linear[..g.dim].iter().map(|v| v * v).sum();
                let mut out = GaussPoly::zero(g.dim);
                out.constant = c;
                Ok(PhaseExpr::Gauss(out))
            }
            PhaseExpr::Gauss(_) => {
                Err(Error::NotRepresentable { depth: 0, residual: f64::INFINITY })
            }
        }
    }

    /// `sup |∇φ|²` upper bound, or a sampled estimate on the line.
    pub fn grad_sup_sq(&self, grid: &GridSpec) -> f64 {
        match self {
            PhaseExpr::Trig(t) => t.grad_sup_sq_bound(),
            PhaseExpr::Gauss(g) => {
                let parts: Vec<GaussPoly> = (0..g.dim).map(|a| g.partial(a)).collect();
                grid.points().map(|p| parts.iter().map(|q| q.eval(&p).powi(2)).sum::<f64>()).fold(0.0, f64::max)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_to_sum() {
        let s = TrigPoly::mode(1, [1, 0, 0], 0.0, 1.0);
        let c = TrigPoly::mode(1, [1, 0, 0], 1.0, 0.0);
        let sc = s.mul(&c);
        for x in [0.3, 1.7, -2.2] {
            let p = [x, 0.0, 0.0];
            assert!((sc.eval(&p) - x.sin() * x.cos()).abs() < 1e-15);
            assert!((s.grad_square().eval(&p) - x.cos().powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn samples_roundtrip() {
        let g = GridSpec::torus(2, 16).unwrap();
        let mut t = TrigPoly::constant(2, 0.25);
        t.add_mode([1, -2, 0], 0.5, -0.75);
        t.add_mode([0, 3, 0], 0.0, 1.5);
        let back = TrigPoly::from_samples(&g, &PhaseExpr::Trig(t.clone()).sample(&g).values, 1e-13).unwrap();
        for p in g.points() {
            assert!((back.eval(&p) - t.eval(&p)).abs() < 1e-13);
        }
        assert_eq!(back.pruned(1e-12).modes.len(), 2);
    }

    #[test]
    fn hermite_derivatives() {
        // ∂²G = (x² − 1)G
        let h = GaussPoly::hermite(1, [2, 0, 0]);
        for x in [0.0f64, 0.7, -1.9] {
            let p = [x, 0.0, 0.0];
            let expect = (x * x - 1.0) * (-0.5 * x * x).exp();
            assert!((h.eval(&p) - expect).abs() < 1e-15);
        }
    }
}
