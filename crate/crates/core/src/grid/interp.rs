//! Off-grid evaluation of nodal data: trigonometric interpolation on the
//! torus and periodic cubic B-splines on the box.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{fft_inplace, fourier_coefficients, GridSpec, Manifold, Point, MAX_DIM};

/// Trigonometric interpolant of nodal data, stored as a sparse mode list.
#[derive(Clone, Debug)]
pub struct TrigSeries {
    grid: GridSpec,
    modes: Vec<([i64; MAX_DIM], Complex64)>,
    kmax: usize,
}

impl TrigSeries {
    pub fn new(grid: &GridSpec, values: &[Complex64]) -> Self {
        let coeffs = fourier_coefficients(grid, values);
        let n = grid.n();
        let cutoff = 1e-16 * coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let mut modes = Vec::new();
        for (idx, c) in coeffs.iter().enumerate() {
            if c.norm() <= cutoff {
                continue;
            }
            let m = grid.multi_index(idx);
            // Split Nyquist coefficients evenly between ±N/2 so that real data
            // interpolates to a real function.
            let mut expanded: Vec<([i64; MAX_DIM], Complex64)> = vec![([0; MAX_DIM], *c)];
            for a in 0..grid.dim {
                let mut next = Vec::with_capacity(expanded.len() * 2);
                for (mut k, w) in expanded {
                    if m[a] == n / 2 {
                        let mut k2 = k;
                        k[a] = n as i64 / 2;
                        k2[a] = -(n as i64) / 2;
                        next.push((k, w * 0.5));
                        next.push((k2, w * 0.5));
                    } else {
                        k[a] = if m[a] < n / 2 { m[a] as i64 } else { m[a] as i64 - n as i64 };
                        next.push((k, w));
                    }
                }
                expanded = next;
            }
            modes.extend(expanded);
        }
        let kmax = modes.iter().flat_map(|(k, _)| k.iter().map(|v| v.unsigned_abs() as usize)).max().unwrap_or(0);
        Self { grid: *grid, modes, kmax }
    }

    pub fn from_real(grid: &GridSpec, values: &[f64]) -> Self {
        let c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::new(grid, &c)
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn eval(&self, p: &Point) -> Complex64 {
        let scale = 2.0 * PI / self.grid.period();
        let o = self.grid.origin();
        let km = self.kmax;
        // table[a][km + k] = e^{i k s (x_a - o)}
        let mut table: Vec<Vec<Complex64>> = Vec::with_capacity(self.grid.dim);
        for &x in p.iter().take(self.grid.dim) {
            let z = Complex64::from_polar(1.0, scale * (x - o));
            let mut row = vec![Complex64::new(1.0, 0.0); 2 * km + 1];
            for k in 1..=km {
                row[km + k] = row[km + k - 1] * z;
                row[km - k] = row[km - k + 1] * z.conj();
            }
            table.push(row);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in &self.modes {
            let mut term = *c;
            for (a, row) in table.iter().enumerate() {
                term *= row[(km as i64 + k[a]) as usize];
            }
            acc += term;
        }
        acc
    }
}

/// Periodic tensor-product cubic B-spline interpolant.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl CubicSpline {
    pub fn new(grid: &GridSpec, values: &[Complex64]) -> Self {
        // The interpolation matrix is circulant with symbol (4 + 2cos θ)/6 per axis.
        let mut data = values.to_vec();
        fft_inplace(grid, &mut data, false);
        let n = grid.n();
        let symbol: Vec<f64> =
            (0..n).map(|k| (4.0 + 2.0 * (2.0 * PI * k as f64 / n as f64).cos()) / 6.0).collect();
        for (idx, v) in data.iter_mut().enumerate() {
            let m = grid.multi_index(idx);
            let s: f64 = (0..grid.dim).map(|a| symbol[m[a]]).product();
            *v /= s;
        }
        fft_inplace(grid, &mut data, true);
        Self { grid: *grid, coeffs: data }
    }

    pub fn from_real(grid: &GridSpec, values: &[f64]) -> Self {
        let c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::new(grid, &c)
    }

    fn weights(t: f64) -> [f64; 4] {
        let t2 = t * t;
        let t3 = t2 * t;
        [
            (1.0 - t).powi(3) / 6.0,
            (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
            (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
            t3 / 6.0,
        ]
    }

    pub fn eval(&self, p: &Point) -> Complex64 {
        let g = &self.grid;
        let n = g.n() as i64;
        let h = g.spacing();
        let o = g.origin();
        let mut base = [0i64; MAX_DIM];
        let mut w = [[0.0; 4]; MAX_DIM];
        for a in 0..g.dim {
            let u = (p[a] - o) / h;
            let i = u.floor();
            base[a] = i as i64 - 1;
            w[a] = Self::weights(u - i);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let total = 4usize.pow(g.dim as u32);
        for combo in 0..total {
            let mut c = combo;
            let mut weight = 1.0;
            let mut idx = 0usize;
            for a in 0..g.dim {
                let o_a = c % 4;
                c /= 4;
                weight *= w[a][o_a];
                let k = (base[a] + o_a as i64).rem_euclid(n) as usize;
                idx += k * g.stride(a);
            }
            acc += self.coeffs[idx] * weight;
        }
        acc
    }
}

/// Off-grid evaluator matched to the manifold.
#[derive(Clone, Debug)]
pub enum Interpolant {
    Trig(TrigSeries),
    Spline(CubicSpline),
}

impl Interpolant {
    pub fn new(grid: &GridSpec, values: &[Complex64]) -> Self {
        match grid.manifold {
            Manifold::Torus => Interpolant::Trig(TrigSeries::new(grid, values)),
            Manifold::Line => Interpolant::Spline(CubicSpline::new(grid, values)),
        }
    }

    pub fn from_real(grid: &GridSpec, values: &[f64]) -> Self {
        let c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::new(grid, &c)
    }

    pub fn eval(&self, p: &Point) -> Complex64 {
        match self {
            Interpolant::Trig(t) => t.eval(p),
            Interpolant::Spline(s) => s.eval(p),
        }
    }

    pub fn eval_re(&self, p: &Point) -> f64 {
        self.eval(p).re
    }
}
