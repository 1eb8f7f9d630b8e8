//! Uniform grids on the flat torus and on periodic boxes standing in for
//! Euclidean space, plus the field types every other module works with.
//!
//! Nodes are stored row-major: axis 0 is the slowest index. On the torus the
//! nodes of one axis are `2πk/N`, `k = 0..N`; on a box of half-width `L` they
//! are `-L + 2Lk/N`.

mod container;
mod fields;
mod interp;
mod spectral;

pub use container::{read_container, write_complex, write_real_fields, GridData, CONTAINER_MAGIC};
pub use fields::{distance_mod_phase, inner_product, Density, PhaseField, ScalarField, VectorField, WaveFunction};
pub use interp::{CubicSpline, Interpolant, TrigSeries};
pub use spectral::{
    cumulative_integral_periodic, divergence, fft_inplace, fourier_coefficients, laplacian,
    partial_derivative, spectral_gradient,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension any field type supports.
pub const MAX_DIM: usize = 3;

/// A point in at most three dimensions; unused trailing slots are zero.
pub type Point = [f64; MAX_DIM];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Manifold {
    Torus,
    Line,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub manifold: Manifold,
    pub dim: usize,
    pub points_per_axis: usize,
    /// Half-width `L` of the box `[-L, L)^d`. Ignored on the torus.
    #[serde(default)]
    pub box_half_width: f64,
}

impl GridSpec {
    pub fn torus(dim: usize, n: usize) -> Result<Self> {
        let g = Self { manifold: Manifold::Torus, dim, points_per_axis: n, box_half_width: PI };
        g.validate()?;
        Ok(g)
    }

    pub fn line(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        let g = Self { manifold: Manifold::Line, dim, points_per_axis: n, box_half_width: half_width };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points_per_axis;
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("points_per_axis must be a power of two >= 8, got {n}")));
        }
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension must be 1..={MAX_DIM}, got {}", self.dim)));
        }
        if self.manifold == Manifold::Line && !(self.box_half_width.is_finite() && self.box_half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("box half-width must be positive, got {}", self.box_half_width)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.points_per_axis
    }

    /// Total number of nodes, `N^d`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length of one period along an axis.
    pub fn period(&self) -> f64 {
        match self.manifold {
            Manifold::Torus => 2.0 * PI,
            Manifold::Line => 2.0 * self.box_half_width,
        }
    }

    pub fn origin(&self) -> f64 {
        match self.manifold {
            Manifold::Torus => 0.0,
            Manifold::Line => -self.box_half_width,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.period() / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.period().powi(self.dim as i32)
    }

    /// Coordinate of node `k` along any axis.
    pub fn coord(&self, k: usize) -> f64 {
        self.origin() + k as f64 * self.spacing()
    }

    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.points_per_axis).map(|k| self.coord(k)).collect()
    }

    /// Distance in flat index between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points_per_axis.pow((self.dim - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let n = self.points_per_axis;
        let mut out = [0; MAX_DIM];
        for a in (0..self.dim).rev() {
            out[a] = idx % n;
            idx /= n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim].iter().fold(0, |acc, &i| acc * self.points_per_axis + i)
    }

    pub fn point(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.dim {
            p[a] = self.coord(m[a]);
        }
        p
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Angular wavenumbers along one axis in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points_per_axis as i64;
        let scale = 2.0 * PI / self.period();
        (0..n).map(|k| if k < n / 2 { k } else { k - n }).map(|k| k as f64 * scale).collect()
    }

    /// Whether a point lies inside the inner half of the box, i.e. at least
    /// `L/2` away from the boundary in every coordinate. Always true on the torus.
    pub fn in_inner_half(&self, p: &Point) -> bool {
        match self.manifold {
            Manifold::Torus => true,
            Manifold::Line => p[..self.dim].iter().all(|x| x.abs() <= 0.5 * self.box_half_width),
        }
    }

    /// Wrap a coordinate into the fundamental cell `[origin, origin + period)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let p = self.period();
        let o = self.origin();
        o + (x - o).rem_euclid(p)
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(GridSpec::torus(1, 12).is_err());
        assert!(GridSpec::torus(1, 4).is_err());
        assert!(GridSpec::torus(4, 16).is_err());
        assert!(GridSpec::line(1, 16, 0.0).is_err());
        assert!(GridSpec::line(2, 16, 5.0).is_ok());
    }

    #[test]
    fn spacing_and_indexing() {
        let g = GridSpec::torus(2, 8).unwrap();
        assert!((g.spacing() - 2.0 * PI / 8.0).abs() < 1e-15);
        let l = GridSpec::line(1, 16, 4.0).unwrap();
        assert!((l.spacing() - 0.5).abs() < 1e-15);
        assert_eq!(l.coord(0), -4.0);
        for idx in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(idx)), idx);
        }
        assert_eq!(g.stride(0), 8);
        assert_eq!(g.stride(1), 1);
        let p = g.point(9);
        assert!((p[0] - g.spacing()).abs() < 1e-15 && (p[1] - g.spacing()).abs() < 1e-15);
    }

    #[test]
    fn wavenumbers_in_fft_order() {
        let g = GridSpec::torus(1, 8).unwrap();
        assert_eq!(g.wavenumbers(), vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }
}
