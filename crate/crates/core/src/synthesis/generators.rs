//! Finite generating families of the flow Lie algebra, each field paired
//! with a bracket derivation from gradient fields.

use super::expr::{GaussPoly, TrigPoly};
use crate::error::Result;
use crate::grid::{GridSpec, Manifold, Point, VectorField, MAX_DIM};
use crate::spectral_sim::ModelSpec;
use crate::transport::lie_bracket;

/// How a field is obtained from gradients by brackets and linear combinations.
#[derive(Clone, Debug)]
pub enum Derivation {
    /// `∇φ`, sampled from the exact gradient.
    Gradient { label: String, field: VectorField },
    Bracket(Box<Derivation>, Box<Derivation>),
    Combination(Vec<(f64, Derivation)>),
}

impl Derivation {
    fn bracket(a: Derivation, b: Derivation) -> Derivation {
        Derivation::Bracket(Box::new(a), Box::new(b))
    }

    fn scaled(self, c: f64) -> Derivation {
        Derivation::Combination(vec![(c, self)])
    }

    /// Re-evaluate the tree numerically with [`lie_bracket`].
    pub fn evaluate(&self) -> Result<VectorField> {
        match self {
            Derivation::Gradient { field, .. } => Ok(field.clone()),
            Derivation::Bracket(a, b) => lie_bracket(&a.evaluate()?, &b.evaluate()?),
            Derivation::Combination(terms) => {
                let mut acc: Option<VectorField> = None;
                for (c, d) in terms {
                    let v = d.evaluate()?.scaled(*c);
                    acc = Some(match acc {
                        None => v,
                        Some(a) => a.add(&v)?,
                    });
                }
                Ok(acc.expect("combinations are never empty"))
            }
        }
    }

    /// Bracket depth of the tree.
    pub fn depth(&self) -> usize {
        match self {
            Derivation::Gradient { .. } => 0,
            Derivation::Bracket(a, b) => 1 + a.depth().max(b.depth()),
            Derivation::Combination(t) => t.iter().map(|(_, d)| d.depth()).max().unwrap_or(0),
        }
    }

    /// Infix rendering such as `[∇sin(x1), ∇(-cos(x1))]`.
    pub fn describe(&self) -> String {
        match self {
            Derivation::Gradient { label, .. } => format!("∇{label}"),
            Derivation::Bracket(a, b) => format!("[{}, {}]", a.describe(), b.describe()),
            Derivation::Combination(t) => {
                t.iter().map(|(c, d)| format!("{c}·{}", d.describe())).collect::<Vec<_>>().join(" + ")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorField {
    pub label: String,
    /// Closed form sampled on the grid.
    pub field: VectorField,
    pub derivation: Derivation,
}

/// Generating family up to trigonometric degree `order` per axis (torus) or
/// Hermite order `order` (line).
pub fn generator_basis(model: &ModelSpec, order: usize) -> Vec<GeneratorField> {
    let grid = *model.grid();
    match grid.manifold {
        Manifold::Torus => torus_basis(&grid, order),
        Manifold::Line => line_basis(&grid, order),
    }
}

// ---------------------------------------------------------------- torus

/// `Π_i trig_i(ℓ_i x_i) e_k`; `ℓ_i = 0` marks an absent factor.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Monomial {
    ell: [u32; MAX_DIM],
    is_cos: [bool; MAX_DIM],
    k: usize,
}

impl Monomial {
    fn unit(k: usize) -> Self {
        Monomial { ell: [0; MAX_DIM], is_cos: [true; MAX_DIM], k }
    }

    fn single(axis: usize, ell: u32, is_cos: bool, k: usize) -> Self {
        let mut m = Self::unit(k);
        m.ell[axis] = ell;
        m.is_cos[axis] = is_cos;
        m
    }

    fn axes(&self, dim: usize) -> Vec<usize> {
        (0..dim).filter(|&a| self.ell[a] > 0).collect()
    }

    fn scalar(&self, dim: usize) -> TrigPoly {
        let mut p = TrigPoly::constant(dim, 1.0);
        for a in self.axes(dim) {
            let mut k = [0; MAX_DIM];
            k[a] = self.ell[a] as i32;
            let f = if self.is_cos[a] { TrigPoly::mode(dim, k, 1.0, 0.0) } else { TrigPoly::mode(dim, k, 0.0, 1.0) };
            p = p.mul(&f);
        }
        p
    }

    fn label(&self, dim: usize) -> String {
        let mut parts: Vec<String> = self
            .axes(dim)
            .into_iter()
            .map(|a| {
                let f = if self.is_cos[a] { "cos" } else { "sin" };
                let l = if self.ell[a] == 1 { String::new() } else { self.ell[a].to_string() };
                format!("{f}({l}x{})", a + 1)
            })
            .collect();
        parts.push(format!("e{}", self.k + 1));
        parts.join(" ")
    }

    fn field(&self, grid: &GridSpec) -> VectorField {
        let s = self.scalar(grid.dim);
        let k = self.k;
        VectorField::from_fn(*grid, |p| {
            let mut v = [0.0; MAX_DIM];
            v[k] = s.eval(p);
            v
        })
    }
}

fn trig_gradient(grid: &GridSpec, phi: &TrigPoly, label: &str) -> Derivation {
    let parts: Vec<TrigPoly> = (0..grid.dim).map(|a| phi.partial(a)).collect();
    let field = VectorField::from_fn(*grid, |p| {
        let mut v = [0.0; MAX_DIM];
        for (a, q) in parts.iter().enumerate() {
            v[a] = q.eval(p);
        }
        v
    });
    Derivation::Gradient { label: label.to_string(), field }
}

fn sincos(dim: usize, axis: usize, ell: i32, is_cos: bool) -> TrigPoly {
    let mut k = [0; MAX_DIM];
    k[axis] = ell;
    if is_cos {
        TrigPoly::mode(dim, k, 1.0, 0.0)
    } else {
        TrigPoly::mode(dim, k, 0.0, 1.0)
    }
}

fn derive_monomial(grid: &GridSpec, m: &Monomial) -> Derivation {
    let d = grid.dim;
    let axes = m.axes(d);
    let k = m.k;
    let xk = format!("x{}", k + 1);
    match axes.len() {
        0 => {
            // [cos(x_k)e_k, sin(x_k)e_k] = e_k
            let c = trig_gradient(grid, &sincos(d, k, 1, false), &format!("sin({xk})"));
            let s = trig_gradient(grid, &sincos(d, k, 1, true).scaled(-1.0), &format!("(-cos({xk}))"));
            Derivation::bracket(c, s)
        }
        1 if axes[0] == k => {
            let l = m.ell[k];
            if m.is_cos[k] {
                trig_gradient(grid, &sincos(d, k, l as i32, false).scaled(1.0 / l as f64), &format!("(sin({l}{xk})/{l})"))
            } else {
                trig_gradient(grid, &sincos(d, k, l as i32, true).scaled(-1.0 / l as f64), &format!("(-cos({l}{xk})/{l})"))
            }
        }
        1 => {
            let j = axes[0];
            let l = m.ell[j];
            let xj = format!("x{}", j + 1);
            if l == 1 {
                let g = |p: TrigPoly, name: String| trig_gradient(grid, &p, &name);
                let sj = sincos(d, j, 1, false);
                let cj = sincos(d, j, 1, true);
                let sk = sincos(d, k, 1, false);
                let ck = sincos(d, k, 1, true);
                if m.is_cos[j] {
                    // ½[∇cos x_j cos x_k, ∇sin x_k] − ½[∇cos x_j sin x_k, ∇cos x_k]
                    Derivation::Combination(vec![
                        (0.5, Derivation::bracket(g(cj.mul(&ck), format!("(cos({xj})cos({xk}))")), g(sk.clone(), format!("sin({xk})")))),
                        (-0.5, Derivation::bracket(g(cj.mul(&sk), format!("(cos({xj})sin({xk}))")), g(ck.clone(), format!("cos({xk})")))),
                    ])
                } else {
                    // −½[∇sin x_j sin x_k, ∇cos x_k] + ½[∇sin x_j cos x_k, ∇sin x_k]
                    Derivation::Combination(vec![
                        (-0.5, Derivation::bracket(g(sj.mul(&sk), format!("(sin({xj})sin({xk}))")), g(ck.clone(), format!("cos({xk})")))),
                        (0.5, Derivation::bracket(g(sj.mul(&ck), format!("(sin({xj})cos({xk}))")), g(sk, format!("sin({xk})")))),
                    ])
                }
            } else {
                // Raise the degree in x_j by one using sin(x_j)e_j and cos(x_j)e_j.
                let lo = l - 1;
                let inv = 1.0 / lo as f64;
                let sin_jj = derive_monomial(grid, &Monomial::single(j, 1, false, j));
                let cos_jj = derive_monomial(grid, &Monomial::single(j, 1, true, j));
                let c_lo = derive_monomial(grid, &Monomial::single(j, lo, true, k));
                let s_lo = derive_monomial(grid, &Monomial::single(j, lo, false, k));
                if m.is_cos[j] {
                    Derivation::Combination(vec![
                        (inv, Derivation::bracket(sin_jj, c_lo)),
                        (inv, Derivation::bracket(cos_jj, s_lo)),
                    ])
                } else {
                    Derivation::Combination(vec![
                        (inv, Derivation::bracket(sin_jj, s_lo)),
                        (-inv, Derivation::bracket(cos_jj, c_lo)),
                    ])
                }
            }
        }
        _ => {
            if m.ell[k] > 0 {
                // g depends on x_k: f = A(x_α) g e_k = [A e_k, g₁ e_k] with ∂_k g₁ = g.
                let alpha = *axes.iter().find(|&&a| a != k).unwrap();
                let a_field = derive_monomial(grid, &Monomial::single(alpha, m.ell[alpha], m.is_cos[alpha], k));
                let mut g1 = *m;
                g1.ell[alpha] = 0;
                let lk = m.ell[k] as f64;
                // ∂_k sin(ℓx_k)/ℓ = cos(ℓx_k); ∂_k(−cos(ℓx_k)/ℓ) = sin(ℓx_k)
                let coef = if m.is_cos[k] { 1.0 / lk } else { -1.0 / lk };
                g1.is_cos[k] = !m.is_cos[k];
                Derivation::bracket(a_field, derive_monomial(grid, &g1)).scaled(coef)
            } else {
                // g independent of x_k: (1/ℓ)[g e_α, sin(ℓx_α)e_k] = g cos(ℓx_α) e_k.
                let alpha = *axes.last().unwrap();
                let l = m.ell[alpha];
                let mut g = *m;
                g.ell[alpha] = 0;
                g.k = alpha;
                let g_field = derive_monomial(grid, &g);
                let inv = 1.0 / l as f64;
                if m.is_cos[alpha] {
                    Derivation::bracket(g_field, derive_monomial(grid, &Monomial::single(alpha, l, false, k))).scaled(inv)
                } else {
                    Derivation::bracket(g_field, derive_monomial(grid, &Monomial::single(alpha, l, true, k))).scaled(-inv)
                }
            }
        }
    }
}

fn torus_basis(grid: &GridSpec, order: usize) -> Vec<GeneratorField> {
    let d = grid.dim;
    let mut monos = Vec::new();
    for k in 0..d {
        // Every axis carries ℓ ∈ 0..=order, with cos before sin.
        let choices: Vec<(u32, bool)> =
            std::iter::once((0, true)).chain((1..=order as u32).flat_map(|l| [(l, true), (l, false)])).collect();
        let count = choices.len().pow(d as u32);
        let mut per_k: Vec<Monomial> = (0..count)
            .map(|mut code| {
                let mut m = Monomial::unit(k);
                for a in (0..d).rev() {
                    let (l, c) = choices[code % choices.len()];
                    m.ell[a] = l;
                    m.is_cos[a] = c;
                    code /= choices.len();
                }
                m
            })
            .collect();
        // Constant field last, as it is the first genuinely bracket-generated one.
        per_k.rotate_left(1);
        monos.extend(per_k);
    }
    monos
        .into_iter()
        .map(|m| GeneratorField { label: m.label(d), field: m.field(grid), derivation: derive_monomial(grid, &m) })
        .collect()
}

// ---------------------------------------------------------------- line

fn analytic_gradient<F: Fn(&Point) -> Point>(grid: &GridSpec, label: &str, f: F) -> Derivation {
    Derivation::Gradient { label: label.to_string(), field: VectorField::from_fn(*grid, f) }
}

fn r2(p: &Point, d: usize) -> f64 {
    p[..d].iter().map(|x| x * x).sum()
}

/// `∇(x_j)`: the constant field `e_j`.
fn unit(grid: &GridSpec, j: usize) -> Derivation {
    analytic_gradient(grid, &format!("x{}", j + 1), move |_| {
        let mut v = [0.0; MAX_DIM];
        v[j] = 1.0;
        v
    })
}

fn gauss_field(grid: &GridSpec, j: usize, poly: impl Fn(&Point) -> f64) -> VectorField {
    let d = grid.dim;
    VectorField::from_fn(*grid, |p| {
        let mut v = [0.0; MAX_DIM];
        v[j] = poly(p) * (-0.5 * r2(p, d)).exp();
        v
    })
}

/// Intermediate fields `h_j, k_j, ad²_{e_j}h_j, ℓ_j, m_j` leading to `e^{−|x|²/2}e_j`.
pub fn hermite_chain(grid: &GridSpec, j: usize) -> Vec<GeneratorField> {
    let d = grid.dim;
    let xj = format!("x{}", j + 1);
    let quarter = move |p: &Point| (-0.25 * r2(p, d)).exp();
    let grad_e = analytic_gradient(grid, "e^{-|x|²/4}", move |p| {
        let e = quarter(p);
        let mut v = [0.0; MAX_DIM];
        for a in 0..d {
            v[a] = -0.5 * p[a] * e;
        }
        v
    });
    let grad_xe = analytic_gradient(grid, &format!("({xj}e^{{-|x|²/4}})"), move |p| {
        let e = quarter(p);
        let mut v = [0.0; MAX_DIM];
        for a in 0..d {
            v[a] = -0.5 * p[j] * p[a] * e;
        }
        v[j] += e;
        v
    });
    let grad_x2e = analytic_gradient(grid, &format!("({xj}²/2 e^{{-|x|²/4}})"), move |p| {
        let e = quarter(p);
        let mut v = [0.0; MAX_DIM];
        for a in 0..d {
            v[a] = -0.25 * p[j] * p[j] * p[a] * e;
        }
        v[j] += p[j] * e;
        v
    });
    let h = Derivation::bracket(grad_xe.clone(), grad_e).scaled(-4.0);
    let k = Derivation::bracket(grad_x2e, grad_xe).scaled(-8.0);
    let ad2h = Derivation::bracket(unit(grid, j), Derivation::bracket(unit(grid, j), h.clone()));
    let ell = Derivation::Combination(vec![(1.0, k.clone()), (-1.0, ad2h.clone())]);
    let m = Derivation::Combination(vec![(1.0 / 6.0, ell.clone()), (-1.0 / 6.0, h.clone())]);
    let e = format!("e{}", j + 1);
    vec![
        GeneratorField { label: format!("(2+|x|²)G {e}"), field: gauss_field(grid, j, |p| 2.0 + r2(p, d)), derivation: h },
        GeneratorField {
            label: format!("(8-2{xj}²+{xj}²|x|²)G {e}"),
            field: gauss_field(grid, j, |p| 8.0 - 2.0 * p[j] * p[j] + p[j] * p[j] * r2(p, d)),
            derivation: k,
        },
        GeneratorField {
            label: format!("(-2{xj}²-|x|²+{xj}²|x|²)G {e}"),
            field: gauss_field(grid, j, |p| -2.0 * p[j] * p[j] - r2(p, d) + p[j] * p[j] * r2(p, d)),
            derivation: ad2h,
        },
        GeneratorField { label: format!("(8+|x|²)G {e}"), field: gauss_field(grid, j, |p| 8.0 + r2(p, d)), derivation: ell },
        GeneratorField { label: format!("G {e}"), field: gauss_field(grid, j, |_| 1.0), derivation: m },
    ]
}

fn line_basis(grid: &GridSpec, order: usize) -> Vec<GeneratorField> {
    let d = grid.dim;
    let mut out = Vec::new();
    for j in 0..d {
        let m = hermite_chain(grid, j).pop().unwrap();
        let mut stack = vec![([0u32; MAX_DIM], m.derivation)];
        while let Some((n, der)) = stack.pop() {
            let poly = GaussPoly::hermite(d, n);
            let label = {
                let parts: String = (0..d)
                    .filter(|&a| n[a] > 0)
                    .map(|a| if n[a] == 1 { format!("∂{}", a + 1) } else { format!("∂{}^{}", a + 1, n[a]) })
                    .collect();
                format!("{parts}G e{}", j + 1)
            };
            out.push(GeneratorField {
                label,
                field: VectorField::from_fn(*grid, |p| {
                    let mut v = [0.0; MAX_DIM];
                    v[j] = poly.eval(p);
                    v
                }),
                derivation: der.clone(),
            });
            if (n.iter().sum::<u32>() as usize) < order {
                // Only raise axes at or after the last raised one so each n appears once.
                let last = (0..d).rev().find(|&a| n[a] > 0).unwrap_or(0);
                for a in (last..d).rev() {
                    let mut up = n;
                    up[a] += 1;
                    stack.push((up, Derivation::bracket(unit(grid, a), der.clone())));
                }
            }
        }
    }
    out
}
