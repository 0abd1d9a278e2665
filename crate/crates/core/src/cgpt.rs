//! Generalized and contracted generalized polarization tensors, their
//! complex combinations `N¹`, `N²`, and the similarity transform law.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::error::{invalid, Result};
use crate::geometry::{Boundary, SimilarityTransform};
use crate::potential::{Density, NpSystem};
use crate::scalar::{binomial, cis, cplx, cpowi, Cplx, Real};

/// A two-dimensional multi-index `(α₁, α₂)`.
pub type MultiIndex = (usize, usize);

/// Real coefficients of `Re P_m` (`a`) and `Im P_m` (`b`) in the monomial
/// basis, where `P_m(x) = (x₁ + i x₂)^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs<T: Real> {
    pub order: usize,
    pub a: BTreeMap<MultiIndex, T>,
    pub b: BTreeMap<MultiIndex, T>,
}

impl<T: Real> HarmonicCoeffs<T> {
    /// `(Σ a_α x^α, Σ b_β x^β)`.
    pub fn eval(&self, x: &Vector2<T>) -> (T, T) {
        let sum = |map: &BTreeMap<MultiIndex, T>| {
            map.iter().fold(T::zero(), |acc, (&(i, j), &c)| acc + c * x.x.powi(i as i32) * x.y.powi(j as i32))
        };
        (sum(&self.a), sum(&self.b))
    }
}

/// Binomial expansion of `(x₁ + i x₂)^m`; zero coefficients are omitted.
pub fn harmonic_coeffs<T: Real>(m: usize) -> Result<HarmonicCoeffs<T>> {
    if m == 0 {
        return invalid("harmonic polynomial order must be at least 1");
    }
    let mut a = BTreeMap::new();
    let mut b = BTreeMap::new();
    for k in 0..=m {
        let c: T = binomial(m, k);
        // i^k cycles through 1, i, −1, −i
        match k % 4 {
            0 => a.insert((m - k, k), c),
            1 => b.insert((m - k, k), c),
            2 => a.insert((m - k, k), -c),
            _ => b.insert((m - k, k), -c),
        };
    }
    Ok(HarmonicCoeffs { order: m, a, b })
}

fn monomial<T: Real>(x: &Vector2<T>, alpha: MultiIndex) -> T {
    x.x.powi(alpha.0 as i32) * x.y.powi(alpha.1 as i32)
}

/// `∂_ν x^α`.
fn monomial_normal_derivative<T: Real>(x: &Vector2<T>, nu: &Vector2<T>, alpha: MultiIndex) -> T {
    let (i, j) = alpha;
    let mut d = T::zero();
    if i > 0 {
        d += T::from_count(i) * x.x.powi(i as i32 - 1) * x.y.powi(j as i32) * nu.x;
    }
    if j > 0 {
        d += T::from_count(j) * x.x.powi(i as i32) * x.y.powi(j as i32 - 1) * nu.y;
    }
    d
}

/// `M_αβ = ∮ y^β (λI − K*)⁻¹[∂_ν y^α] ds` on an already factorized system.
pub fn gpt_with_system<T: Real>(system: &NpSystem<T>, alpha: MultiIndex, beta: MultiIndex) -> Result<T> {
    if alpha.0 + alpha.1 == 0 || beta.0 + beta.1 == 0 {
        return invalid("GPT multi-indices must have order at least 1");
    }
    let b = system.boundary();
    let rhs: Vec<T> =
        b.points().iter().zip(b.normals()).map(|(x, nu)| monomial_normal_derivative(x, nu, alpha)).collect();
    let phi = system.solve_density(&Density::new(b, rhs)?)?;
    Ok(b.points()
        .iter()
        .zip(b.weights())
        .zip(&phi.values)
        .fold(T::zero(), |acc, ((x, &w), &p)| acc + monomial(x, beta) * p * w))
}

/// A single GPT entry `M_αβ(λ, D)`.
pub fn compute_gpt<T: Real>(boundary: &Boundary<T>, lambda: T, alpha: MultiIndex, beta: MultiIndex) -> Result<T> {
    gpt_with_system(&NpSystem::new(boundary, lambda)?, alpha, beta)
}

/// Complex CGPTs `N¹` (symmetric) and `N²` (Hermitian) up to order `K`,
/// indexed from 0 for order 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CgptPair<T: Real> {
    pub n1: DMatrix<Cplx<T>>,
    pub n2: DMatrix<Cplx<T>>,
    pub lambda: T,
}

impl<T: Real> CgptPair<T> {
    pub fn new(n1: DMatrix<Cplx<T>>, n2: DMatrix<Cplx<T>>, lambda: T) -> Result<Self> {
        let k = n1.nrows();
        if k == 0 || n1.ncols() != k || n2.nrows() != k || n2.ncols() != k {
            return invalid("CGPT matrices must be square, non-empty and of equal order");
        }
        Ok(Self { n1, n2, lambda })
    }

    pub fn order(&self) -> usize {
        self.n1.nrows()
    }

    /// Top-left `k × k` blocks.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.order() {
            return invalid(format!("cannot truncate order {} to {k}", self.order()));
        }
        Ok(Self {
            n1: self.n1.view((0, 0), (k, k)).into_owned(),
            n2: self.n2.view((0, 0), (k, k)).into_owned(),
            lambda: self.lambda,
        })
    }

    /// `(‖N¹ − N¹ᵗ‖, ‖N² − N²ᴴ‖)` relative to the respective Frobenius norms.
    pub fn symmetry_defect(&self) -> (T, T) {
        let rel = |d: T, n: T| if n > T::zero() { d / n } else { d };
        (
            rel((&self.n1 - self.n1.transpose()).norm(), self.n1.norm()),
            rel((&self.n2 - self.n2.adjoint()).norm(), self.n2.norm()),
        )
    }

    /// `(‖N¹‖²_F + ‖N²‖²_F)^{1/2}`.
    pub fn norm(&self) -> T {
        (self.n1.norm_squared() + self.n2.norm_squared()).sqrt()
    }

    /// `(‖N¹ − N¹'‖²_F + ‖N² − N²'‖²_F)^{1/2}`.
    pub fn distance(&self, other: &Self) -> T {
        ((&self.n1 - &other.n1).norm_squared() + (&self.n2 - &other.n2).norm_squared()).sqrt()
    }
}

/// CGPTs from an already factorized system: one solve per real and
/// imaginary part of `∂_ν P_m = m z^{m−1}(ν₁ + iν₂)`.
pub fn cgpt_with_system<T: Real>(system: &NpSystem<T>, order: usize) -> Result<CgptPair<T>> {
    if order == 0 {
        return invalid("CGPT order must be at least 1");
    }
    let b = system.boundary();
    let n = b.n_nodes();
    let zs: Vec<Cplx<T>> = b.points().iter().map(|x| cplx(x.x, x.y)).collect();
    let mut rhs = DMatrix::zeros(n, 2 * order);
    for (j, (z, nu)) in zs.iter().zip(b.normals()).enumerate() {
        let nu_c = cplx(nu.x, nu.y);
        let mut zpow = cplx(T::one(), T::zero());
        for m in 1..=order {
            let d = zpow * nu_c * T::from_count(m);
            rhs[(j, 2 * m - 2)] = d.re;
            rhs[(j, 2 * m - 1)] = d.im;
            zpow *= *z;
        }
    }
    let phi = system.solve_many(&rhs)?;
    let mut n1 = DMatrix::zeros(order, order);
    let mut n2 = DMatrix::zeros(order, order);
    for j in 0..n {
        let w = b.weights()[j];
        let mut pn = zs[j];
        for col in 0..order {
            let pw = pn * w;
            for row in 0..order {
                let ph = cplx(phi[(j, 2 * row)], phi[(j, 2 * row + 1)]);
                n1[(row, col)] += pw * ph;
                n2[(row, col)] += pw * ph.conj();
            }
            pn *= zs[j];
        }
    }
    CgptPair::new(n1, n2, system.lambda())
}

/// `N¹`, `N²` of `boundary` up to order `K`.
pub fn compute_cgpt<T: Real>(boundary: &Boundary<T>, lambda: T, order: usize) -> Result<CgptPair<T>> {
    cgpt_with_system(&NpSystem::new(boundary, lambda)?, order)
}

/// Slow cross-check: assembles the contracted tensors from individual GPT
/// entries through the harmonic coefficients. Limited to `K ≤ 3`.
pub fn compute_cgpt_via_gpts<T: Real>(boundary: &Boundary<T>, lambda: T, order: usize) -> Result<CgptPair<T>> {
    if order == 0 || order > 3 {
        return invalid("the GPT assembly path supports orders 1 to 3");
    }
    let system = NpSystem::new(boundary, lambda)?;
    let coeffs: Vec<HarmonicCoeffs<T>> = (1..=order).map(harmonic_coeffs).collect::<Result<_>>()?;
    let mut blocks = DMatrix::zeros(2 * order, 2 * order);
    for m in 0..order {
        for n in 0..order {
            let contract = |left: &BTreeMap<MultiIndex, T>, right: &BTreeMap<MultiIndex, T>| -> Result<T> {
                let mut acc = T::zero();
                for (&alpha, &ca) in left {
                    for (&beta, &cb) in right {
                        acc += ca * cb * gpt_with_system(&system, alpha, beta)?;
                    }
                }
                Ok(acc)
            };
            let (am, bm) = (&coeffs[m].a, &coeffs[m].b);
            let (an, bn) = (&coeffs[n].a, &coeffs[n].b);
            blocks[(2 * m, 2 * n)] = contract(am, an)?;
            blocks[(2 * m, 2 * n + 1)] = contract(am, bn)?;
            blocks[(2 * m + 1, 2 * n)] = contract(bm, an)?;
            blocks[(2 * m + 1, 2 * n + 1)] = contract(bm, bn)?;
        }
    }
    from_real_blocks(&RealCgptBlocks::new(blocks)?, lambda)
}

/// The real `2K × 2K` CGPT matrix with `2 × 2` blocks
/// `[[M^cc, M^cs], [M^sc, M^ss]]_{mn}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealCgptBlocks<T: Real> {
    pub m: DMatrix<T>,
}

impl<T: Real> RealCgptBlocks<T> {
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        if m.nrows() == 0 || !m.nrows().is_multiple_of(2) || m.ncols() != m.nrows() {
            return invalid(format!("CGPT block matrix must be 2K × 2K, got {} × {}", m.nrows(), m.ncols()));
        }
        Ok(Self { m })
    }

    pub fn order(&self) -> usize {
        self.m.nrows() / 2
    }

    /// Block `(m, n)` for 1-based orders.
    pub fn block(&self, m: usize, n: usize) -> Matrix2<T> {
        self.m.fixed_view::<2, 2>(2 * m - 2, 2 * n - 2).into_owned()
    }

    /// Leading `2k × 2k` part.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.order() {
            return invalid(format!("cannot truncate order {} to {k}", self.order()));
        }
        Ok(Self { m: self.m.view((0, 0), (2 * k, 2 * k)).into_owned() })
    }
}

/// `M^cc = Re(N¹+N²)/2`, `M^ss = Re(N²−N¹)/2`, `M^cs = Im(N¹+N²)/2`,
/// `M^sc = Im(N¹−N²)/2`.
pub fn to_real_blocks<T: Real>(pair: &CgptPair<T>) -> RealCgptBlocks<T> {
    let k = pair.order();
    let half = T::lit(0.5);
    let mut m = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let (a, b) = (pair.n1[(i, j)], pair.n2[(i, j)]);
            m[(2 * i, 2 * j)] = (a.re + b.re) * half;
            m[(2 * i, 2 * j + 1)] = (a.im + b.im) * half;
            m[(2 * i + 1, 2 * j)] = (a.im - b.im) * half;
            m[(2 * i + 1, 2 * j + 1)] = (b.re - a.re) * half;
        }
    }
    RealCgptBlocks { m }
}

/// `N¹ = (M^cc − M^ss) + i(M^cs + M^sc)`, `N² = (M^cc + M^ss) + i(M^cs − M^sc)`.
pub fn from_real_blocks<T: Real>(blocks: &RealCgptBlocks<T>, lambda: T) -> Result<CgptPair<T>> {
    let k = blocks.order();
    let m = &blocks.m;
    let n1 = DMatrix::from_fn(k, k, |i, j| {
        let (cc, cs, sc, ss) =
            (m[(2 * i, 2 * j)], m[(2 * i, 2 * j + 1)], m[(2 * i + 1, 2 * j)], m[(2 * i + 1, 2 * j + 1)]);
        cplx(cc - ss, cs + sc)
    });
    let n2 = DMatrix::from_fn(k, k, |i, j| {
        let (cc, cs, sc, ss) =
            (m[(2 * i, 2 * j)], m[(2 * i, 2 * j + 1)], m[(2 * i + 1, 2 * j)], m[(2 * i + 1, 2 * j + 1)]);
        cplx(cc + ss, cs - sc)
    });
    CgptPair::new(n1, n2, lambda)
}

/// Lower-triangular `C^z_{mn} = binom(m, n) z^{m−n}`.
pub fn translation_matrix<T: Real>(z: Cplx<T>, order: usize) -> DMatrix<Cplx<T>> {
    DMatrix::from_fn(order, order, |i, j| {
        let (m, n) = (i + 1, j + 1);
        if m < n {
            Cplx::new(T::zero(), T::zero())
        } else {
            cpowi(z, m - n) * binomial::<T>(m, n)
        }
    })
}

/// `∂C^z/∂z`: entries `binom(m, n)(m − n) z^{m−n−1}`.
fn translation_matrix_derivative<T: Real>(z: Cplx<T>, order: usize) -> DMatrix<Cplx<T>> {
    DMatrix::from_fn(order, order, |i, j| {
        let (m, n) = (i + 1, j + 1);
        if m <= n {
            Cplx::new(T::zero(), T::zero())
        } else {
            cpowi(z, m - n - 1) * (binomial::<T>(m, n) * T::from_count(m - n))
        }
    })
}

/// Diagonal `G^w` with entries `s^m e^{imθ}`.
pub fn scaling_rotation_matrix<T: Real>(s: T, theta: T, order: usize) -> DMatrix<Cplx<T>> {
    let mut g = DMatrix::zeros(order, order);
    for i in 0..order {
        let m = i + 1;
        g[(i, i)] = cis(theta * T::from_count(m)) * s.powi(m as i32);
    }
    g
}

/// `N¹ ↦ C G N¹ G Cᵗ`, `N² ↦ conj(C G) N² G Cᵗ` for `x ↦ z + s e^{iθ} x`.
///
/// Exact for truncated tensors because `C` is lower triangular and `G`
/// diagonal.
pub fn transform_cgpt<T: Real>(pair: &CgptPair<T>, t: &SimilarityTransform<T>) -> CgptPair<T> {
    let k = pair.order();
    let x = translation_matrix(t.z, k) * scaling_rotation_matrix(t.s, t.theta, k);
    let xt = x.transpose();
    CgptPair { n1: &x * &pair.n1 * &xt, n2: x.conjugate() * &pair.n2 * &xt, lambda: pair.lambda }
}

/// Partial derivatives of [`transform_cgpt`] with respect to
/// `(Re z, Im z, s, θ)`, in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformJacobian<T: Real> {
    pub d_n1: [DMatrix<Cplx<T>>; 4],
    pub d_n2: [DMatrix<Cplx<T>>; 4],
}

pub fn transform_jacobian<T: Real>(pair: &CgptPair<T>, t: &SimilarityTransform<T>) -> TransformJacobian<T> {
    let k = pair.order();
    let c = translation_matrix(t.z, k);
    let g = scaling_rotation_matrix(t.s, t.theta, k);
    let dc = translation_matrix_derivative(t.z, k);
    let i_unit = cplx(T::zero(), T::one());
    let dg_ds = DMatrix::from_fn(k, k, |a, b| {
        if a == b {
            g[(a, a)] * (T::from_count(a + 1) / t.s)
        } else {
            Cplx::new(T::zero(), T::zero())
        }
    });
    let dg_dtheta = DMatrix::from_fn(k, k, |a, b| {
        if a == b {
            g[(a, a)] * i_unit * T::from_count(a + 1)
        } else {
            Cplx::new(T::zero(), T::zero())
        }
    });
    let x = &c * &g;
    let dx = [&dc * &g, (&dc * &g) * i_unit, &c * dg_ds, &c * dg_dtheta];
    let xt = x.transpose();
    let xc = x.conjugate();
    let d_n1 = dx.clone().map(|d| &d * &pair.n1 * &xt + &x * &pair.n1 * d.transpose());
    let d_n2 = dx.map(|d| d.conjugate() * &pair.n2 * &xt + &xc * &pair.n2 * d.transpose());
    TransformJacobian { d_n1, d_n2 }
}
