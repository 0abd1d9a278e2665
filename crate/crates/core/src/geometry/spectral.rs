//! Fourier-based differentiation and filtering of periodic node data.

use nalgebra::Vector2;
use num_complex::Complex;
use rustfft::FftPlanner;

use super::Boundary;
use crate::error::Result;

/// Signed integer wavenumber of FFT bin `k` for length `n`.
fn wavenumber(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Applies a per-wavenumber multiplier to a real periodic sequence.
fn fourier_multiply(values: &[f64], mult: impl Fn(f64, bool) -> Complex<f64>) -> Vec<f64> {
    let n = values.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let nyquist = n.is_multiple_of(2) && k == n / 2;
        *c *= mult(wavenumber(k, n), nyquist);
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// First and second derivative with respect to `ξ ∈ [0, 2π)`.
pub(crate) fn periodic_derivatives(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d1 = fourier_multiply(values, |k, nyq| if nyq { Complex::new(0.0, 0.0) } else { Complex::new(0.0, k) });
    let d2 = fourier_multiply(values, |k, nyq| if nyq { Complex::new(0.0, 0.0) } else { Complex::new(-k * k, 0.0) });
    (d1, d2)
}

/// Gaussian low-pass with standard deviation `sigma` measured in `ξ`.
pub(crate) fn gaussian_lowpass(values: &[f64], sigma: f64) -> Vec<f64> {
    fourier_multiply(values, |k, _| Complex::new((-0.5 * (k * sigma).powi(2)).exp(), 0.0))
}

impl Boundary<f64> {
    /// Builds a boundary from equispaced-in-parameter samples of a smooth
    /// closed curve; tangents, weights and curvature come from spectral
    /// differentiation of the coordinates.
    pub fn from_periodic_samples(points: &[Vector2<f64>]) -> Result<Self> {
        let n = points.len();
        let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
        let (dx, ddx) = periodic_derivatives(&xs);
        let (dy, ddy) = periodic_derivatives(&ys);
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut b = Self::with_capacity(n);
        for j in 0..n {
            b.push_node(points[j], Vector2::new(dx[j], dy[j]), Vector2::new(ddx[j], ddy[j]), h)?;
        }
        b.check_orientation()?;
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_trig_polynomial() {
        let n = 64;
        let xi: Vec<f64> = (0..n).map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64).collect();
        let f: Vec<f64> = xi.iter().map(|x| (3.0 * x).sin() + 0.5 * (5.0 * x).cos()).collect();
        let (d1, d2) = periodic_derivatives(&f);
        for (j, x) in xi.iter().enumerate() {
            assert!((d1[j] - (3.0 * (3.0 * x).cos() - 2.5 * (5.0 * x).sin())).abs() < 1e-12);
            assert!((d2[j] - (-9.0 * (3.0 * x).sin() - 12.5 * (5.0 * x).cos())).abs() < 1e-11);
        }
    }

    #[test]
    fn samples_of_ellipse_match_analytic_boundary() {
        let exact = super::super::make_ellipse(1.0, 0.5, 128).unwrap();
        let spec = Boundary::from_periodic_samples(exact.points()).unwrap();
        for j in 0..128 {
            assert!((exact.curvature()[j] - spec.curvature()[j]).abs() < 1e-10);
            assert!((exact.weights()[j] - spec.weights()[j]).abs() < 1e-12);
        }
    }
}
