use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GridSpec, Manifold, Point};
use crate::error::{Error, Result};

/// Tolerance used when an operation requires a unit-norm input.
pub(crate) const NORM_TOL: f64 = 1e-6;

/// A complex state on a grid with unit quadrature L² norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl WaveFunction {
    /// Build a state from nodal values, rescaling to unit norm.
    pub fn normalized(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("wavefunction"));
        }
        let norm = l2_norm(&grid, &values);
        if norm == 0.0 {
            return Err(Error::InvalidArgument("cannot normalise the zero state".into()));
        }
        let values = values.into_iter().map(|v| v / norm).collect();
        Ok(Self { grid, values })
    }

    pub fn from_fn<F>(grid: GridSpec, f: F) -> Result<Self>
    where
        F: Fn(&Point) -> Complex64,
    {
        let values = grid.points().map(|p| f(&p)).collect();
        Self::normalized(grid, values)
    }

    /// Wrap values already known to be (numerically) unit norm.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<Complex64>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.grid, &self.values)
    }

    /// Multiply by `e^{iθ}`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let z = Complex64::from_polar(1.0, theta);
        Self { grid: self.grid, values: self.values.iter().map(|v| v * z).collect() }
    }

    /// Pointwise multiplication by `e^{iφ(x)}`.
    pub fn multiply_phase(&self, phase: &ScalarField) -> Result<Self> {
        self.grid.check_same(&phase.grid)?;
        let values = self.values.iter().zip(&phase.values).map(|(v, p)| v * Complex64::from_polar(1.0, *p)).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Raw L² distance `‖a − b‖` without phase alignment.
    pub fn l2_distance(&self, other: &WaveFunction) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    /// Fraction of `|ψ|²` outside the inner half of the box (zero on the torus).
    pub fn mass_leak(&self) -> f64 {
        if self.grid.manifold == Manifold::Torus {
            return 0.0;
        }
        let outside: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.grid.in_inner_half(&self.grid.point(*i)))
            .map(|(_, v)| v.norm_sqr())
            .sum();
        outside * self.grid.cell_volume() / self.norm().powi(2)
    }
}

fn check_len(grid: &GridSpec, len: usize) -> Result<()> {
    grid.validate()?;
    if len != grid.len() {
        return Err(Error::InvalidArgument(format!("expected {} nodal values, got {len}", grid.len())));
    }
    Ok(())
}

pub(crate) fn l2_norm(grid: &GridSpec, values: &[Complex64]) -> f64 {
    (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.cell_volume()).sqrt()
}

/// Quadrature L² pairing `⟨a, b⟩ = ∫ conj(a) b`.
pub fn inner_product(a: &WaveFunction, b: &WaveFunction) -> Result<Complex64> {
    a.grid.check_same(&b.grid)?;
    let s: Complex64 = a.values.iter().zip(&b.values).map(|(x, y)| x.conj() * y).sum();
    Ok(s * a.grid.cell_volume())
}

/// `inf_θ ‖a − e^{iθ} b‖ = sqrt(2 − 2|⟨a,b⟩|)` for unit states.
pub fn distance_mod_phase(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    for s in [a, b] {
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
    }
    // Evaluate ‖a − e^{iθ*} b‖ at the optimal θ* directly; the closed form loses
    // half the digits near zero.
    let ip = inner_product(b, a)?;
    let rot = if ip.norm() > 0.0 { ip / ip.norm() } else { Complex64::new(1.0, 0.0) };
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - rot * y).norm_sqr()).sum();
    Ok((s * a.grid.cell_volume()).sqrt())
}

/// A real scalar field; used for phases, potentials and divergences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

/// Phase fields are plain real fields with no normalisation constraint.
pub type PhaseField = ScalarField;

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn<F: Fn(&Point) -> f64>(grid: GridSpec, f: F) -> Self {
        Self { grid, values: grid.points().map(|p| f(&p)).collect() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self { grid: self.grid, values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

/// Nonnegative amplitude field with `∫ρ² = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Density {
    /// Validate nonnegativity and rescale to unit L² mass.
    pub fn normalized(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("density"));
        }
        if let Some(node) = values.iter().position(|&v| v < 0.0) {
            return Err(Error::NonPositiveDensity { node });
        }
        let mass = (values.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()).sqrt();
        if mass == 0.0 {
            return Err(Error::InvalidArgument("zero density".into()));
        }
        Ok(Self { grid, values: values.into_iter().map(|v| v / mass).collect() })
    }

    pub fn from_fn<F: Fn(&Point) -> f64>(grid: GridSpec, f: F) -> Result<Self> {
        Self::normalized(grid, grid.points().map(|p| f(&p)).collect())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `ρ²`, the probability density.
    pub fn squared(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * v).collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Clamp below at `floor` and renormalise.
    pub fn floored(&self, floor: f64) -> Self {
        let values = self.values.iter().map(|v| v.max(floor)).collect();
        Self::normalized(self.grid, values).expect("floored density stays valid")
    }

    pub fn to_wavefunction(&self) -> WaveFunction {
        WaveFunction::from_raw(self.grid, self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }
}

/// A real `d`-vector field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub grid: GridSpec,
    pub components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: GridSpec, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim {
            return Err(Error::InvalidArgument(format!(
                "vector field needs {} components, got {}",
                grid.dim,
                components.len()
            )));
        }
        for c in &components {
            check_len(&grid, c.len())?;
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("vector field"));
            }
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, components: vec![vec![0.0; grid.len()]; grid.dim] }
    }

    pub fn from_fn<F: Fn(&Point) -> Point>(grid: GridSpec, f: F) -> Self {
        let mut components = vec![Vec::with_capacity(grid.len()); grid.dim];
        for p in grid.points() {
            let v = f(&p);
            for (a, c) in components.iter_mut().enumerate() {
                c.push(v[a]);
            }
        }
        Self { grid, components }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            components: self.components.iter().map(|c| c.iter().map(|v| v * s).collect()).collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        })
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &VectorField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.iter().all(|v| *v == 0.0))
    }

    /// On the box, true when the field is below `tol` at every node outside the
    /// inner half-box. Always true on the torus.
    pub fn supported_in_interior(&self, tol: f64) -> bool {
        if self.grid.manifold == Manifold::Torus {
            return true;
        }
        (0..self.grid.len())
            .filter(|&i| !self.grid.in_inner_half(&self.grid.point(i)))
            .all(|i| self.components.iter().all(|c| c[i].abs() <= tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mode(g: GridSpec, k: f64) -> WaveFunction {
        WaveFunction::from_fn(g, |p| Complex64::from_polar(1.0, k * p[0])).unwrap()
    }

    #[test]
    fn normalized_constant_has_unit_overlap() {
        let g = GridSpec::torus(1, 32).unwrap();
        let c = WaveFunction::from_fn(g, |_| Complex64::new(3.0, 0.0)).unwrap();
        assert!((inner_product(&c, &c).unwrap() - 1.0).norm() < 1e-14);
        assert!((c.values()[0].re - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn fourier_modes_are_orthogonal() {
        let g = GridSpec::torus(1, 64).unwrap();
        let ip = inner_product(&mode(g, 1.0), &mode(g, 2.0)).unwrap();
        assert!(ip.norm() < 1e-12);
        let d = distance_mod_phase(&mode(g, 1.0), &mode(g, 2.0)).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn phase_linearity_and_invariance() {
        let g = GridSpec::torus(1, 64).unwrap();
        let psi = WaveFunction::from_fn(g, |p| Complex64::new(1.0 + 0.3 * p[0].cos(), 0.2 * (2.0 * p[0]).sin())).unwrap();
        let rotated = psi.with_global_phase(0.7);
        let ip = inner_product(&psi, &rotated).unwrap();
        assert!((ip - Complex64::from_polar(1.0, 0.7)).norm() < 1e-12);
        let d = distance_mod_phase(&psi, &psi.with_global_phase(1.3)).unwrap();
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn superposition_distance() {
        // ⟨(ψ₁+ψ₂)/√2, ψ₁⟩ = 1/√2.
        let g = GridSpec::torus(1, 64).unwrap();
        let a = WaveFunction::from_fn(g, |p| Complex64::from_polar(1.0, p[0]) + Complex64::from_polar(1.0, 2.0 * p[0])).unwrap();
        let d = distance_mod_phase(&a, &mode(g, 1.0)).unwrap();
        assert!((d - (2.0 - 2f64.sqrt()).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalised_input() {
        let g = GridSpec::torus(1, 16).unwrap();
        let a = mode(g, 1.0);
        let b = WaveFunction::from_raw(g, a.values().iter().map(|v| v * 2.0).collect());
        assert!(matches!(distance_mod_phase(&a, &b), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn density_validation() {
        let g = GridSpec::torus(1, 16).unwrap();
        assert!(Density::normalized(g, vec![-1.0; 16]).is_err());
        let d = Density::normalized(g, vec![2.0; 16]).unwrap();
        let mass: f64 = d.squared().iter().sum::<f64>() * g.cell_volume();
        assert!((mass - 1.0).abs() < 1e-14);
    }
}
