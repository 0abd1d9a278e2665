//! Nyström discretization of the Neumann–Poincaré operator `K*_D` and the
//! single-layer potential on a sampled boundary.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Vector2, LU};

use crate::error::{invalid, Error, Result};
use crate::geometry::Boundary;
use crate::scalar::Real;

/// `λ = (κ+1)/(2(κ−1))`.
pub fn contrast_from_conductivity<T: Real>(kappa: T) -> Result<T> {
    if !(kappa > T::zero()) || kappa == T::one() || !kappa.is_finite() {
        return invalid(format!("conductivity must be positive and different from 1, got {kappa}"));
    }
    Ok((kappa + T::one()) / (T::lit(2.0) * (kappa - T::one())))
}

/// Discretized `K*_D` with the quadrature weights folded into the columns.
///
/// Off-diagonal entries are `⟨x_i − x_j, ν_i⟩ / (2π |x_i − x_j|²) · w_j`; the
/// diagonal uses the smooth limit `κ_i / (4π) · w_i`.
pub fn np_operator_matrix<T: Real>(boundary: &Boundary<T>) -> Result<DMatrix<T>> {
    let n = boundary.n_nodes();
    let (x, nu, w, k) = (boundary.points(), boundary.normals(), boundary.weights(), boundary.curvature());
    let two_pi = T::two_pi();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = if i == j {
                k[i] / (T::lit(2.0) * two_pi) * w[i]
            } else {
                let d = x[i] - x[j];
                let r2 = d.norm_squared();
                if !(r2 > T::zero()) {
                    return Err(Error::DegenerateGeometry(format!("nodes {i} and {j} coincide")));
                }
                d.dot(&nu[i]) / (two_pi * r2) * w[j]
            };
        }
    }
    Ok(m)
}

/// A per-node boundary density.
#[derive(Debug, Clone, PartialEq)]
pub struct Density<T: Real> {
    pub values: Vec<T>,
    /// Whether `Σ values_j w_j` vanishes (to quadrature accuracy).
    pub zero_mean: bool,
}

impl<T: Real> Density<T> {
    /// Wraps node values, detecting the zero-mean property relative to
    /// `Σ |values_j| w_j`.
    pub fn new(boundary: &Boundary<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != boundary.n_nodes() {
            return invalid(format!("density has {} values for {} nodes", values.len(), boundary.n_nodes()));
        }
        let (mean, scale) = values
            .iter()
            .zip(boundary.weights())
            .fold((T::zero(), T::zero()), |(m, s), (&v, &w)| (m + v * w, s + v.abs() * w));
        let zero_mean = mean.abs() <= T::lit(1e-10) * scale;
        Ok(Self { values, zero_mean })
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![T::zero(); n], zero_mean: true }
    }

    /// `Σ values_j w_j`.
    pub fn integral(&self, boundary: &Boundary<T>) -> T {
        self.values.iter().zip(boundary.weights()).fold(T::zero(), |acc, (&v, &w)| acc + v * w)
    }
}

/// The factorized operator `λI − K*_D` on one boundary.
#[derive(Debug, Clone)]
pub struct NpSystem<T: Real> {
    boundary: Boundary<T>,
    lambda: T,
    kernel: DMatrix<T>,
    lu: LU<T, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<T: Real> NpSystem<T> {
    /// Assembles and factorizes `λI − K*_D`. Requires `|λ| > 1/2`.
    pub fn new(boundary: &Boundary<T>, lambda: T) -> Result<Self> {
        if !(lambda.abs() > T::lit(0.5)) || !lambda.is_finite() {
            return Err(Error::ContractViolation(format!("|λ| must exceed 1/2, got λ = {lambda}")));
        }
        let kernel = np_operator_matrix(boundary)?;
        let n = boundary.n_nodes();
        let op = DMatrix::identity(n, n) * lambda - &kernel;
        let lu = op.lu();
        if !lu.is_invertible() {
            return Err(Error::Numerical("singular λI − K* factorization".into()));
        }
        Ok(Self { boundary: boundary.clone(), lambda, kernel, lu })
    }

    /// Convenience constructor from a conductivity `κ`.
    pub fn from_conductivity(boundary: &Boundary<T>, kappa: T) -> Result<Self> {
        Self::new(boundary, contrast_from_conductivity(kappa)?)
    }

    pub fn boundary(&self) -> &Boundary<T> {
        &self.boundary
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// The weighted `K*_D` matrix.
    pub fn kernel_matrix(&self) -> &DMatrix<T> {
        &self.kernel
    }

    /// Solves `(λI − K*_D) φ = rhs`.
    pub fn solve_density(&self, rhs: &Density<T>) -> Result<Density<T>> {
        let n = self.boundary.n_nodes();
        if rhs.values.len() != n {
            return invalid(format!("right-hand side has {} values for {n} nodes", rhs.values.len()));
        }
        let b = DVector::from_column_slice(&rhs.values);
        let x = self.lu.solve(&b).ok_or_else(|| Error::Numerical("density solve failed".into()))?;
        Ok(Density { values: x.as_slice().to_vec(), zero_mean: rhs.zero_mean })
    }

    /// Solves for every column of `rhs` at once.
    pub fn solve_many(&self, rhs: &DMatrix<T>) -> Result<DMatrix<T>> {
        if rhs.nrows() != self.boundary.n_nodes() {
            return invalid("right-hand side row count does not match the node count");
        }
        self.lu.solve(rhs).ok_or_else(|| Error::Numerical("density solve failed".into()))
    }

    /// Writes the kernel matrix as a raw little-endian dump: `u64` size
    /// followed by the row-major `f64` entries. Meant for debugging only.
    pub fn dump_kernel<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.kernel.nrows();
        out.write_all(&(n as u64).to_le_bytes())?;
        for i in 0..n {
            for j in 0..n {
                out.write_all(&self.kernel[(i, j)].as_f64().to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// `Γ(x) = log|x| / 2π`.
pub fn fundamental<T: Real>(x: &Vector2<T>) -> T {
    x.norm().ln() / T::two_pi()
}

/// `∇_x Γ(x − source) = (x − source) / (2π |x − source|²)`.
pub fn grad_fundamental<T: Real>(x: &Vector2<T>, source: &Vector2<T>) -> Result<Vector2<T>> {
    let d = x - source;
    let r2 = d.norm_squared();
    if !(r2 > T::zero()) {
        return invalid("gradient of the fundamental solution at its source");
    }
    Ok(d / (T::two_pi() * r2))
}

/// `S_D[φ](x)` by the trapezoidal rule.
///
/// Refuses points within one node spacing of the boundary, where the plain
/// rule loses accuracy.
pub fn single_layer_eval<T: Real>(boundary: &Boundary<T>, phi: &Density<T>, x: &Vector2<T>) -> Result<T> {
    if phi.values.len() != boundary.n_nodes() {
        return invalid("density length does not match the node count");
    }
    let distance = boundary.distance_to_nodes(x);
    let spacing = boundary.max_spacing();
    if distance <= spacing {
        return Err(Error::NearBoundary { distance: distance.as_f64(), spacing: spacing.as_f64() });
    }
    Ok(boundary
        .points()
        .iter()
        .zip(boundary.weights())
        .zip(&phi.values)
        .fold(T::zero(), |acc, ((y, &w), &p)| acc + fundamental(&(x - y)) * p * w))
}
