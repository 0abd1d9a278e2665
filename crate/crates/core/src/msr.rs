//! Multistatic response simulation, measurement noise, and least-squares
//! reconstruction of CGPTs.

use nalgebra::{DMatrix, DVector, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cgpt::RealCgptBlocks;
use crate::error::{invalid, Error, Result};
use crate::geometry::Boundary;
use crate::potential::{fundamental, NpSystem};
use crate::scalar::Real;

/// `N` coincident sources/receivers evenly spaced on a circle of radius `R`
/// around `center`. CGPTs are expanded about `reference`, which equals the
/// center for the concentric setting used in the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig<T: Real> {
    pub n: usize,
    pub radius: T,
    pub center: Vector2<T>,
    pub reference: Vector2<T>,
}

impl<T: Real> ArrayConfig<T> {
    /// Concentric array: expansion point at the array center.
    pub fn new(n: usize, radius: T, center: Vector2<T>) -> Result<Self> {
        Self::with_reference(n, radius, center, center)
    }

    pub fn with_reference(n: usize, radius: T, center: Vector2<T>, reference: Vector2<T>) -> Result<Self> {
        if n < 3 {
            return invalid(format!("an array needs at least 3 elements, got {n}"));
        }
        if !(radius > T::zero()) || !radius.is_finite() {
            return invalid(format!("array radius must be positive, got {radius}"));
        }
        Ok(Self { n, radius, center, reference })
    }

    pub fn is_concentric(&self) -> bool {
        self.center == self.reference
    }

    /// `θ_r = 2πr/N`.
    pub fn angle(&self, r: usize) -> T {
        T::two_pi() * T::from_count(r) / T::from_count(self.n)
    }

    pub fn position(&self, r: usize) -> Vector2<T> {
        let t = self.angle(r);
        self.center + Vector2::new(t.cos(), t.sin()) * self.radius
    }

    pub fn positions(&self) -> Vec<Vector2<T>> {
        (0..self.n).map(|r| self.position(r)).collect()
    }
}

/// Measured or simulated `V_rs = u_s(x_r) − Γ_s(x_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MsrMatrix<T: Real> {
    pub values: DMatrix<T>,
    pub config: ArrayConfig<T>,
    /// Standard deviation of the added Gaussian noise (0 for clean data).
    pub noise_sigma: T,
}

impl<T: Real> MsrMatrix<T> {
    /// `‖V − Vᵗ‖_max / ‖V‖_max`.
    pub fn asymmetry(&self) -> T {
        let scale = self.values.amax();
        if scale == T::zero() {
            return T::zero();
        }
        (&self.values - self.values.transpose()).amax() / scale
    }
}

/// `V_rs = S_D[φ_s](x_r)` with `(λI − K*)φ_s = ∂_ν Γ(· − x_s)`.
pub fn simulate_msr<T: Real>(boundary: &Boundary<T>, kappa: T, config: &ArrayConfig<T>) -> Result<MsrMatrix<T>> {
    let system = NpSystem::from_conductivity(boundary, kappa)?;
    simulate_msr_with_system(&system, config)
}

/// As [`simulate_msr`] on an already factorized system.
pub fn simulate_msr_with_system<T: Real>(system: &NpSystem<T>, config: &ArrayConfig<T>) -> Result<MsrMatrix<T>> {
    let b = system.boundary();
    let xs = config.positions();
    let spacing = b.max_spacing();
    for x in &xs {
        if b.contains(x) {
            return Err(Error::DegenerateGeometry(format!(
                "array element ({}, {}) lies inside the inclusion",
                x.x, x.y
            )));
        }
        let distance = b.distance_to_nodes(x);
        if distance <= spacing {
            return Err(Error::NearBoundary { distance: distance.as_f64(), spacing: spacing.as_f64() });
        }
    }
    let (n, nn) = (config.n, b.n_nodes());
    let two_pi = T::two_pi();
    let rhs = DMatrix::from_fn(nn, n, |j, s| {
        let d = b.points()[j] - xs[s];
        d.dot(&b.normals()[j]) / (two_pi * d.norm_squared())
    });
    let phi = system.solve_many(&rhs)?;
    let g = DMatrix::from_fn(n, nn, |r, j| fundamental(&(xs[r] - b.points()[j])) * b.weights()[j]);
    Ok(MsrMatrix { values: g * phi, config: *config, noise_sigma: T::zero() })
}

/// `V + σ_noise W` with `σ_noise = (V_max − V_min)σ₀` and `W` i.i.d. standard
/// Gaussian (not symmetrized), drawn from a ChaCha stream seeded by `seed`.
pub fn add_noise<T: Real>(v: &MsrMatrix<T>, sigma0: T, seed: u64) -> Result<MsrMatrix<T>> {
    if !(sigma0 >= T::zero()) || !sigma0.is_finite() {
        return invalid(format!("noise level must be non-negative, got {sigma0}"));
    }
    if sigma0 == T::zero() {
        return Ok(v.clone());
    }
    let sigma = (v.values.max() - v.values.min()) * sigma0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = v.values.clone();
    // fill row by row so the layout of draws does not depend on storage order
    for r in 0..out.nrows() {
        for s in 0..out.ncols() {
            let w: f64 = StandardNormal.sample(&mut rng);
            out[(r, s)] += sigma * T::lit(w);
        }
    }
    Ok(MsrMatrix { values: out, config: v.config, noise_sigma: sigma })
}

/// `A = C·Dg` (concentric) or `A` built per element (general). Column pair
/// `(2m−2, 2m−1)` belongs to order `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrices<T: Real> {
    pub a: DMatrix<T>,
    /// Angular part `(cos mθ_r, sin mθ_r)` with `θ_r` measured at the
    /// expansion point.
    pub c: DMatrix<T>,
    /// Diagonal of `Dg`, `1/(2π m R^m)` repeated per order; only defined for
    /// concentric arrays.
    pub dg: Option<DVector<T>>,
}

pub fn coefficient_matrices<T: Real>(config: &ArrayConfig<T>, order: usize) -> Result<CoefficientMatrices<T>> {
    if order == 0 || 2 * order >= config.n {
        return invalid(format!("need 1 ≤ K and 2K < N, got K = {order}, N = {}", config.n));
    }
    let n = config.n;
    let rel: Vec<Vector2<T>> = config.positions().iter().map(|x| x - config.reference).collect();
    let two_pi = T::two_pi();
    let mut a = DMatrix::zeros(n, 2 * order);
    let mut c = DMatrix::zeros(n, 2 * order);
    for (r, d) in rel.iter().enumerate() {
        let (rr, th) = (d.norm(), d.y.atan2(d.x));
        for m in 1..=order {
            let mt = T::from_count(m) * th;
            let radial = T::one() / (two_pi * T::from_count(m) * rr.powi(m as i32));
            c[(r, 2 * m - 2)] = mt.cos();
            c[(r, 2 * m - 1)] = mt.sin();
            a[(r, 2 * m - 2)] = mt.cos() * radial;
            a[(r, 2 * m - 1)] = mt.sin() * radial;
        }
    }
    let dg = config.is_concentric().then(|| {
        DVector::from_fn(2 * order, |i, _| {
            let m = i / 2 + 1;
            T::one() / (two_pi * T::from_count(m) * config.radius.powi(m as i32))
        })
    });
    Ok(CoefficientMatrices { a, c, dg })
}

fn symmetrize<T: Real>(m: DMatrix<T>) -> DMatrix<T> {
    (&m + m.transpose()) * T::lit(0.5)
}

/// Least-squares CGPTs of order `K` from an MSR matrix.
///
/// Concentric arrays use the closed form `(2/N)² Dg⁻¹ Cᵗ V C Dg⁻¹`; other
/// configurations go through [`reconstruct_cgpt_least_squares`]. The output
/// is symmetrized.
pub fn reconstruct_cgpt<T: Real>(v: &MsrMatrix<T>, order: usize) -> Result<RealCgptBlocks<T>> {
    let coeffs = coefficient_matrices(&v.config, order)?;
    let Some(dg) = coeffs.dg else {
        return reconstruct_cgpt_least_squares(v, order);
    };
    let n = T::from_count(v.config.n);
    let factor = T::lit(2.0) / n;
    let inv = dg.map(|d| factor / d);
    let mut m = coeffs.c.transpose() * &v.values * &coeffs.c;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            m[(i, j)] *= inv[i] * inv[j];
        }
    }
    RealCgptBlocks::new(symmetrize(m))
}

/// `argmin_M ‖V − A M Aᵗ‖_F` through a QR factorization of the
/// column-equilibrated `A`. Reports the first order whose columns are
/// numerically dependent on the earlier ones.
pub fn reconstruct_cgpt_least_squares<T: Real>(v: &MsrMatrix<T>, order: usize) -> Result<RealCgptBlocks<T>> {
    let coeffs = coefficient_matrices(&v.config, order)?;
    let a = coeffs.a;
    let norms = DVector::from_fn(a.ncols(), |j, _| a.column(j).norm());
    let mut scaled = a.clone();
    for j in 0..a.ncols() {
        if !(norms[j] > T::zero()) {
            return Err(Error::IllPosed { order: j / 2 + 1 });
        }
        scaled.column_mut(j).scale_mut(T::one() / norms[j]);
    }
    let qr = scaled.qr();
    let (q, r) = (qr.q(), qr.r());
    let tol = T::lit(1e-10);
    for j in 0..r.ncols() {
        if r[(j, j)].abs() < tol {
            return Err(Error::IllPosed { order: j / 2 + 1 });
        }
    }
    let inner = q.transpose() * &v.values * &q;
    let rinv = r.try_inverse().ok_or(Error::IllPosed { order })?;
    let mut m = &rinv * inner * rinv.transpose();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            m[(i, j)] /= norms[i] * norms[j];
        }
    }
    RealCgptBlocks::new(symmetrize(m))
}

/// `⌊log(σ/N)/log ε − 2⌋`, clamped to `[1, ⌊N/2⌋]`; noiseless data gives the
/// upper clamp.
pub fn max_truncation_order(sigma_noise: f64, n: usize, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("ε must lie in (0, 1), got {eps}"));
    }
    if !(sigma_noise >= 0.0) {
        return invalid(format!("noise level must be non-negative, got {sigma_noise}"));
    }
    let cap = n / 2;
    if sigma_noise == 0.0 {
        return Ok(cap.max(1));
    }
    let bound = (sigma_noise / n as f64).ln() / eps.ln() - 2.0;
    Ok(floor_clamped(bound, cap))
}

/// `⌊(log σ − log τ₀)/(2 log ε)⌋`, at least 1. Noiseless data has no
/// resolution limit and yields `usize::MAX`.
pub fn resolving_order(sigma_noise: f64, tau0: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("ε must lie in (0, 1), got {eps}"));
    }
    if !(tau0 > 0.0 && tau0 <= 1.0) {
        return invalid(format!("τ₀ must lie in (0, 1], got {tau0}"));
    }
    if !(sigma_noise >= 0.0) {
        return invalid(format!("noise level must be non-negative, got {sigma_noise}"));
    }
    if sigma_noise == 0.0 {
        return Ok(usize::MAX);
    }
    Ok(floor_clamped((sigma_noise.ln() - tau0.ln()) / (2.0 * eps.ln()), usize::MAX))
}

fn floor_clamped(x: f64, cap: usize) -> usize {
    // guard against log ratios that should be integers landing just below
    let f = (x + 1e-9).floor();
    if f < 1.0 {
        1
    } else if f >= cap as f64 {
        cap
    } else {
        f as usize
    }
}

/// `‖V − A M_K Aᵗ‖_F` for the exact CGPTs truncated at `K`.
pub fn truncation_residual<T: Real>(v: &MsrMatrix<T>, exact: &RealCgptBlocks<T>, order: usize) -> Result<T> {
    let m = exact.truncate(order)?;
    let a = coefficient_matrices(&v.config, order)?.a;
    Ok((&v.values - &a * m.m * a.transpose()).norm())
}

/// `‖M^est_mm − M_mm‖_F / ‖M_mm‖_F` for the diagonal block of order `m`.
pub fn relative_block_error<T: Real>(estimate: &RealCgptBlocks<T>, exact: &RealCgptBlocks<T>, m: usize) -> Result<T> {
    if m == 0 || m > estimate.order() || m > exact.order() {
        return invalid(format!("block order {m} out of range"));
    }
    let reference = exact.block(m, m).norm();
    if !(reference > T::zero()) {
        return Err(Error::Numerical(format!("exact block of order {m} vanishes")));
    }
    Ok((estimate.block(m, m) - exact.block(m, m)).norm() / reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgpt::{compute_cgpt, to_real_blocks};
    use crate::geometry::{make_ellipse, make_flower};
    use rand::Rng;
    use std::f64::consts::PI;

    fn config(n: usize, r: f64) -> ArrayConfig<f64> {
        ArrayConfig::new(n, r, Vector2::zeros()).unwrap()
    }

    fn random_symmetric(k: usize, seed: u64) -> RealCgptBlocks<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(2 * k, 2 * k, |_, _| rng.random_range(-1.0..1.0));
        RealCgptBlocks::new(symmetrize(m)).unwrap()
    }

    #[test]
    fn angular_matrix_is_orthogonal() {
        for k in 1..=25 {
            let c = coefficient_matrices(&config(51, 2.0), k).unwrap().c;
            let g = c.transpose() * &c - DMatrix::identity(2 * k, 2 * k) * 25.5;
            assert!(g.amax() <= 1e-10, "K={k}");
        }
        let c = coefficient_matrices(&config(3, 2.0), 1).unwrap().c;
        assert!((c.transpose() * &c - DMatrix::identity(2, 2) * 1.5).amax() < 1e-14);
        assert!(coefficient_matrices(&config(51, 2.0), 26).is_err());
    }

    #[test]
    fn radial_factor_and_product() {
        let cm = coefficient_matrices(&config(51, 2.0), 4).unwrap();
        let dg = cm.dg.clone().unwrap();
        for m in 1..=4 {
            let expected = 1.0 / (2.0 * PI * m as f64 * 2f64.powi(m as i32));
            assert!((dg[2 * m - 2] - expected).abs() < 1e-16 && (dg[2 * m - 1] - expected).abs() < 1e-16);
        }
        let a = &cm.c * DMatrix::from_diagonal(&dg);
        assert!((a - cm.a).amax() < 1e-16);
        let off = ArrayConfig::with_reference(51, 2.0, Vector2::zeros(), Vector2::new(0.1, 0.0)).unwrap();
        assert!(coefficient_matrices(&off, 4).unwrap().dg.is_none());
    }

    #[test]
    fn noiseless_msr_is_symmetric() {
        let disk = make_ellipse(1.0, 1.0, 256).unwrap();
        let v = simulate_msr(&disk, 4.0 / 3.0, &config(51, 2.0)).unwrap();
        assert!(v.asymmetry() <= 1e-8);
        let flower = make_flower(5, 0.3, 512).unwrap();
        let v = simulate_msr(&flower, 4.0 / 3.0, &config(51, 2.0)).unwrap();
        assert!(v.asymmetry() <= 1e-8);
    }

    #[test]
    fn no_contrast_no_response() {
        let disk = make_ellipse(1.0, 1.0, 128).unwrap();
        let v = simulate_msr(&disk, 1.0 + 1e-9, &config(21, 2.0)).unwrap();
        assert!(v.values.amax() <= 1e-9);
    }

    #[test]
    fn array_inside_inclusion_is_rejected() {
        let disk = make_ellipse(3.0, 3.0, 128).unwrap();
        assert!(matches!(simulate_msr(&disk, 4.0 / 3.0, &config(21, 2.0)), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn disk_matches_first_order_prediction() {
        // the disk CGPTs are diagonal, so the first neglected term is order
        // (2,2), of size ε⁶ against the ε² leading term
        let disk = make_ellipse(1.0, 1.0, 256).unwrap();
        for r in [4.0, 8.0] {
            let cfg = config(32, r);
            let v = simulate_msr(&disk, 4.0 / 3.0, &cfg).unwrap();
            let exact = to_real_blocks(&compute_cgpt(&disk, 3.5, 1).unwrap());
            let res = truncation_residual(&v, &exact, 1).unwrap();
            let eps = 1.0 / r;
            assert!(res <= eps.powi(4), "R={r}");
        }
    }

    #[test]
    fn noise_statistics_and_determinism() {
        let disk = make_ellipse(1.0, 0.5, 128).unwrap();
        let v = simulate_msr(&disk, 4.0 / 3.0, &config(51, 2.0)).unwrap();
        assert_eq!(add_noise(&v, 0.0, 3).unwrap(), v);
        let a = add_noise(&v, 0.1, 42).unwrap();
        let b = add_noise(&v, 0.1, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, add_noise(&v, 0.1, 43).unwrap());
        let range = v.values.max() - v.values.min();
        assert!((a.noise_sigma - 0.1 * range).abs() < 1e-18);
        let w = (&a.values - &v.values) / a.noise_sigma;
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() <= 3.0 / 51.0, "{var}");
    }

    #[test]
    fn reconstruction_of_disk() {
        let disk = make_ellipse(1.0, 1.0, 256).unwrap();
        let v = simulate_msr(&disk, 4.0 / 3.0, &config(51, 2.0)).unwrap();
        let m = reconstruct_cgpt(&v, 3).unwrap();
        let n2_11 = m.m[(0, 0)] + m.m[(1, 1)];
        let oracle = 2.0 * PI / 3.5;
        assert!((n2_11 - oracle).abs() <= 1e-3 * oracle);
    }

    #[test]
    fn consistent_data_is_recovered() {
        for (cfg, k) in [
            (config(51, 2.0), 5),
            (ArrayConfig::with_reference(40, 3.0, Vector2::new(0.5, 0.2), Vector2::new(0.7, -0.1)).unwrap(), 4),
        ] {
            let exact = random_symmetric(k, 8);
            let a = coefficient_matrices(&cfg, k).unwrap().a;
            let v = MsrMatrix { values: &a * &exact.m * a.transpose(), config: cfg, noise_sigma: 0.0 };
            let m = reconstruct_cgpt(&v, k).unwrap();
            assert!((&m.m - &exact.m).amax() <= 1e-10 * exact.m.amax());
            let res = (&v.values - &a * &m.m * a.transpose()).norm();
            assert!(res <= 1e-10 * v.values.norm());
        }
    }

    #[test]
    fn closed_form_and_least_squares_agree() {
        let e = make_ellipse(1.0, 0.5, 256).unwrap();
        let v = simulate_msr(&e, 4.0 / 3.0, &config(51, 2.0)).unwrap();
        let noisy = add_noise(&v, 0.05, 1).unwrap();
        for data in [&v, &noisy] {
            let closed = reconstruct_cgpt(data, 6).unwrap();
            let lsq = reconstruct_cgpt_least_squares(data, 6).unwrap();
            assert!((&closed.m - &lsq.m).amax() <= 1e-10 * closed.m.amax().max(1.0));
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        // every element at the same distance and angle modulo π/2 leaves
        // order 2 indistinguishable from order 1
        let cfg = ArrayConfig::new(4, 2.0, Vector2::zeros()).unwrap();
        let v = MsrMatrix { values: DMatrix::zeros(4, 4), config: cfg, noise_sigma: 0.0 };
        assert!(reconstruct_cgpt_least_squares(&v, 2).is_err());
        let off = ArrayConfig::with_reference(5, 2.0, Vector2::zeros(), Vector2::new(0.0, 0.0)).unwrap();
        assert!(reconstruct_cgpt_least_squares(
            &MsrMatrix { values: DMatrix::zeros(5, 5), config: off, noise_sigma: 0.0 },
            2
        )
        .is_ok());
    }

    #[test]
    fn truncation_order_formula() {
        let eps: f64 = 0.5;
        assert_eq!(max_truncation_order(51.0 * eps.powi(4), 51, eps).unwrap(), 2);
        assert_eq!(max_truncation_order(51.0 * 1e-6, 51, eps).unwrap(), 17);
        assert_eq!(max_truncation_order(51.0 * 1e-30, 51, eps).unwrap(), 25);
        assert_eq!(max_truncation_order(0.0, 51, eps).unwrap(), 25);
        assert_eq!(max_truncation_order(1e3, 51, eps).unwrap(), 1);
        assert!(max_truncation_order(1e-3, 51, 1.5).is_err());
    }

    #[test]
    fn resolving_order_formula() {
        assert_eq!(resolving_order(0.1, 0.1, 0.5).unwrap(), 1);
        // log ratio 4·log ε ⇒ m₀ = 2
        assert_eq!(resolving_order(0.1 * 0.5f64.powi(4), 0.1, 0.5).unwrap(), 2);
        assert_eq!(resolving_order(0.0, 0.1, 0.5).unwrap(), usize::MAX);
        assert!(resolving_order(0.1, 0.0, 0.5).is_err());
    }

    #[test]
    fn relative_block_errors() {
        let m = random_symmetric(3, 1);
        assert_eq!(relative_block_error(&m, &m, 2).unwrap(), 0.0);
        let mut p = m.clone();
        p.m[(2, 2)] += 0.5 * m.block(2, 2).norm();
        assert!((relative_block_error(&p, &m, 2).unwrap() - 0.5).abs() < 1e-14);
        assert!(relative_block_error(&p, &m, 4).is_err());
    }
}
