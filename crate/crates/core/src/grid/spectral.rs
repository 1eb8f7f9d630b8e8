use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{GridSpec, ScalarField, VectorField};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place multidimensional FFT over all axes of `grid`.
///
/// The inverse transform includes the `1/N^d` normalisation, so a forward
/// transform followed by an inverse one is the identity.
pub fn fft_inplace(grid: &GridSpec, data: &mut [Complex64], inverse: bool) {
    debug_assert_eq!(data.len(), grid.len());
    let n = grid.n();
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..grid.dim {
        let stride = grid.stride(axis);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(n) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[start + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[start + k * stride] = *v;
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / grid.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Normalised Fourier coefficients `c_k = N^{-d} Σ_x v(x) e^{-i k·(x - origin)}`.
pub fn fourier_coefficients(grid: &GridSpec, values: &[Complex64]) -> Vec<Complex64> {
    let mut data = values.to_vec();
    fft_inplace(grid, &mut data, false);
    let scale = 1.0 / grid.len() as f64;
    data.iter_mut().for_each(|v| *v *= scale);
    data
}

fn to_complex(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Apply a diagonal Fourier multiplier built from per-node wavevectors.
fn apply_multiplier<F>(grid: &GridSpec, values: &[f64], symbol: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> Complex64,
{
    let mut data = to_complex(values);
    fft_inplace(grid, &mut data, false);
    let ks = grid.wavenumbers();
    let n = grid.n();
    let mut kvec = [0.0; super::MAX_DIM];
    for (idx, v) in data.iter_mut().enumerate() {
        let m = grid.multi_index(idx);
        for a in 0..grid.dim {
            kvec[a] = ks[m[a]];
            // The Nyquist mode has no well-defined odd derivative.
            if m[a] == n / 2 {
                kvec[a] = f64::NAN;
            }
        }
        *v *= symbol(&kvec[..grid.dim]);
    }
    fft_inplace(grid, &mut data, true);
    data.into_iter().map(|c| c.re).collect()
}

/// Spectral partial derivative of a real nodal field along `axis`.
pub fn partial_derivative(grid: &GridSpec, values: &[f64], axis: usize) -> Vec<f64> {
    apply_multiplier(grid, values, |k| {
        let ka = k[axis];
        if ka.is_nan() {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, ka)
        }
    })
}

/// Spectral Laplacian of a real nodal field.
pub fn laplacian(grid: &GridSpec, values: &[f64]) -> Vec<f64> {
    let n = grid.n() as f64;
    let nyq = std::f64::consts::PI * n / grid.period();
    apply_multiplier(grid, values, |k| {
        let k2: f64 = k.iter().map(|&ka| if ka.is_nan() { nyq * nyq } else { ka * ka }).sum();
        Complex64::new(-k2, 0.0)
    })
}

pub fn spectral_gradient(field: &ScalarField) -> VectorField {
    let grid = field.grid;
    let components = (0..grid.dim).map(|a| partial_derivative(&grid, &field.values, a)).collect();
    VectorField { grid, components }
}

pub fn divergence(f: &VectorField) -> ScalarField {
    let grid = f.grid;
    let mut out = vec![0.0; grid.len()];
    for (a, comp) in f.components.iter().enumerate() {
        for (o, d) in out.iter_mut().zip(partial_derivative(&grid, comp, a)) {
            *o += d;
        }
    }
    ScalarField { grid, values: out }
}

/// Spectrally exact running integral of a periodic 1-D sample.
///
/// Returns `(F, mean)` where `F[k] = ∫_{x_0}^{x_k} v` for the trigonometric
/// interpolant of `v`, and `mean` is its average. The linear part `mean·(x - x_0)`
/// is included in `F`.
pub fn cumulative_integral_periodic(values: &[f64], period: f64) -> (Vec<f64>, f64) {
    let n = values.len();
    let grid = GridSpec { manifold: super::Manifold::Torus, dim: 1, points_per_axis: n, box_half_width: 0.0 };
    let coeffs = fourier_coefficients(&grid, &to_complex(values));
    let mean = coeffs[0].re;
    let scale = 2.0 * std::f64::consts::PI / period;
    // Antiderivative coefficients for k != 0 (Nyquist dropped: its integral is
    // not a trigonometric polynomial of the same degree).
    let mut anti = vec![Complex64::new(0.0, 0.0); n];
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        let kk = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
        if k == n / 2 {
            continue;
        }
        anti[k] = *c / Complex64::new(0.0, kk as f64 * scale);
    }
    let mut back: Vec<Complex64> = anti.iter().map(|c| c * n as f64).collect();
    fft_inplace(&grid, &mut back, true);
    let h = period / n as f64;
    let base = back[0].re;
    let out = back.iter().enumerate().map(|(k, v)| v.re - base + mean * k as f64 * h).collect();
    (out, mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn forward_inverse_roundtrip() {
        let g = GridSpec::torus(2, 16).unwrap();
        let data: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut work = data.clone();
        fft_inplace(&g, &mut work, false);
        fft_inplace(&g, &mut work, true);
        for (a, b) in data.iter().zip(&work) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_resolved_mode() {
        let g = GridSpec::torus(1, 64).unwrap();
        let v: Vec<f64> = g.axis_coords().iter().map(|x| (3.0 * x).sin()).collect();
        let d = partial_derivative(&g, &v, 0);
        for (x, dv) in g.axis_coords().iter().zip(&d) {
            assert!((dv - 3.0 * (3.0 * x).cos()).abs() < 1e-12);
        }
        let l = laplacian(&g, &v);
        for (x, lv) in g.axis_coords().iter().zip(&l) {
            assert!((lv + 9.0 * (3.0 * x).sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn cumulative_integral_matches_closed_form() {
        let n = 64;
        let xs: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
        let v: Vec<f64> = xs.iter().map(|x| 1.0 + 0.5 * x.cos()).collect();
        let (f, mean) = cumulative_integral_periodic(&v, 2.0 * PI);
        assert!((mean - 1.0).abs() < 1e-14);
        for (x, fx) in xs.iter().zip(&f) {
            assert!((fx - (x + 0.5 * x.sin())).abs() < 1e-12);
        }
    }
}
