//! Transform estimation, debiasing, invariant descriptors, and the two
//! dictionary-matching algorithms.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgpt::{compute_cgpt, transform_cgpt, transform_jacobian, translation_matrix, CgptPair};
use crate::error::{invalid, Error, Result};
use crate::geometry::{normalize, wrap_angle, ShapeSpec, SimilarityTransform};
use crate::scalar::{cabs, carg, cplx, Cplx, Real};

/// Invariant descriptor matrices `𝓘¹`, `𝓘²`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorPair<T: Real> {
    pub i1: DMatrix<T>,
    pub i2: DMatrix<T>,
}

impl<T: Real> DescriptorPair<T> {
    pub fn order(&self) -> usize {
        self.i1.nrows()
    }

    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.order() {
            return invalid(format!("cannot truncate descriptors of order {} to {k}", self.order()));
        }
        Ok(Self { i1: self.i1.view((0, 0), (k, k)).into_owned(), i2: self.i2.view((0, 0), (k, k)).into_owned() })
    }
}

/// Translation-, rotation- and scale-invariant descriptors.
///
/// The translation is removed with `u = N²₁₂/(2N²₁₁)` (zero at order 1),
/// the scale by dividing by `|J²_mm J²_nn|^{1/2}`, and the rotation by taking
/// moduli. The diagonal of `𝓘²` is exactly 1 by construction.
pub fn shape_descriptors<T: Real>(pair: &CgptPair<T>) -> Result<DescriptorPair<T>> {
    let k = pair.order();
    let n2_11 = pair.n2[(0, 0)];
    if !(cabs(n2_11) > T::zero()) {
        return Err(Error::DegenerateNormalization { order: 1 });
    }
    let u = if k >= 2 { pair.n2[(0, 1)] / (n2_11 * T::lit(2.0)) } else { cplx(T::zero(), T::zero()) };
    let c = translation_matrix(-u, k);
    let ct = c.transpose();
    let j1 = &c * &pair.n1 * &ct;
    let j2 = c.conjugate() * &pair.n2 * &ct;
    let mut d = Vec::with_capacity(k);
    for m in 0..k {
        let a = cabs(j2[(m, m)]);
        if !(a > T::zero()) || !a.is_finite() {
            return Err(Error::DegenerateNormalization { order: m + 1 });
        }
        d.push(a.sqrt());
    }
    let i1 = DMatrix::from_fn(k, k, |m, n| cabs(j1[(m, n)]) / d[m] / d[n]);
    let i2 = DMatrix::from_fn(k, k, |m, n| if m == n { T::one() } else { cabs(j2[(m, n)]) / d[m] / d[n] });
    Ok(DescriptorPair { i1, i2 })
}

/// Where a dictionary entry came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub shape: String,
    pub lambda: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryEntry<T: Real> {
    pub name: String,
    pub cgpt: CgptPair<T>,
    /// Rotational symmetry order; 1 means none.
    pub symmetry: usize,
    pub descriptors: DescriptorPair<T>,
    pub provenance: Provenance,
}

impl<T: Real> DictionaryEntry<T> {
    pub fn new(name: impl Into<String>, cgpt: CgptPair<T>, symmetry: usize, provenance: Provenance) -> Result<Self> {
        if symmetry == 0 {
            return invalid("symmetry order must be at least 1");
        }
        let descriptors = shape_descriptors(&cgpt)?;
        Ok(Self { name: name.into(), cgpt, symmetry, descriptors, provenance })
    }
}

/// Reference shapes, centred at the origin with unit characteristic size.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dictionary<T: Real> {
    pub entries: Vec<DictionaryEntry<T>>,
}

impl<T: Real> Dictionary<T> {
    pub fn new(entries: Vec<DictionaryEntry<T>>) -> Self {
        Self { entries }
    }

    /// Builds entries from shape specifications at CGPT order `K`: each shape
    /// is sampled with `nodes` points (or its default), normalized, and its
    /// CGPTs computed with contrast `λ`.
    pub fn from_shapes(shapes: &[ShapeSpec], order: usize, lambda: T, nodes: Option<usize>) -> Result<Self> {
        if order < 2 {
            return invalid("dictionary order must be at least 2");
        }
        let entries = shapes
            .par_iter()
            .map(|spec| {
                let n = nodes.unwrap_or_else(|| spec.default_nodes());
                let (b, _) = normalize(&spec.build::<T>(n)?);
                let cgpt = compute_cgpt(&b, lambda, order)?;
                let prov = Provenance { shape: spec.to_string(), lambda: lambda.as_f64(), nodes: n };
                DictionaryEntry::new(spec.name(), cgpt, spec.symmetry_order(), prov)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Smallest CGPT order over all entries.
    pub fn order(&self) -> usize {
        self.entries.iter().map(|e| e.cgpt.order()).min().unwrap_or(0)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }
}

/// Ranked matching result.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport<T: Real> {
    /// `(entry index, name, e_n)` sorted by increasing error.
    pub ranking: Vec<(usize, String, T)>,
    /// Per-entry errors in dictionary order.
    pub errors: Vec<T>,
    /// Estimated transform per entry in dictionary order (Algorithm 1 only).
    pub transforms: Option<Vec<SimilarityTransform<T>>>,
    /// Dictionary index of the best match.
    pub winner: usize,
}

impl<T: Real> MatchReport<T> {
    fn from_errors(dict: &Dictionary<T>, errors: Vec<T>, transforms: Option<Vec<SimilarityTransform<T>>>) -> Self {
        let mut ranking: Vec<(usize, String, T)> =
            errors.iter().enumerate().map(|(i, &e)| (i, dict.entries[i].name.clone(), e)).collect();
        ranking.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        let winner = ranking[0].0;
        Self { ranking, errors, transforms, winner }
    }

    pub fn winner_name(&self) -> &str {
        &self.ranking[0].1
    }
}

/// `s = (N²₁₁(D)/N²₁₁(B))^{1/2}`.
pub fn estimate_scale<T: Real>(query: &CgptPair<T>, candidate: &CgptPair<T>) -> Result<T> {
    let ratio = query.n2[(0, 0)].re / candidate.n2[(0, 0)].re;
    if !(ratio > T::zero()) || !ratio.is_finite() {
        return Err(Error::InconsistentContrast { ratio: ratio.as_f64() });
    }
    Ok(ratio.sqrt())
}

/// `z = N²₁₂(D)/(2N²₁₁(D))`, exact when the candidate has `N²₁₂ = 0`.
pub fn estimate_translation_symmetric<T: Real>(query: &CgptPair<T>) -> Result<Cplx<T>> {
    if query.order() < 2 {
        return invalid("translation estimate needs CGPTs of order 2");
    }
    Ok(query.n2[(0, 1)] / (query.n2[(0, 0)] * T::lit(2.0)))
}

fn truncated_pair<T: Real>(pair: &CgptPair<T>, k: usize) -> CgptPair<T> {
    pair.truncate(k.min(pair.order())).unwrap_or_else(|_| pair.clone())
}

/// Squared CGPT misfit `‖N(T B) − N(D)‖²` at order `k`.
fn misfit<T: Real>(query: &CgptPair<T>, candidate: &CgptPair<T>, t: &SimilarityTransform<T>) -> T {
    let moved = transform_cgpt(candidate, t);
    (&moved.n1 - &query.n1).norm_squared() + (&moved.n2 - &query.n2).norm_squared()
}

const ROTATION_GRID: usize = 128;
const GOLDEN_STEPS: usize = 20;

/// Rotation for a candidate with `p`-fold symmetry: grid search over
/// `[0, 2π/p)` followed by golden-section refinement, on CGPTs truncated at
/// order `max(⌈p/2⌉, 2)` (or what is available). Returns a value in
/// `[0, 2π/p)`.
pub fn estimate_rotation_symmetric<T: Real>(
    query: &CgptPair<T>,
    candidate: &CgptPair<T>,
    p: usize,
    s: T,
    z: Cplx<T>,
) -> Result<T> {
    if p == 0 {
        return invalid("symmetry order must be at least 1");
    }
    let k = p.div_ceil(2).max(2).min(query.order()).min(candidate.order());
    let (q, c) = (truncated_pair(query, k), truncated_pair(candidate, k));
    let period = T::two_pi() / T::from_count(p);
    let f = |theta: T| misfit(&q, &c, &SimilarityTransform { z, s, theta });
    let h = period / T::from_count(ROTATION_GRID);
    let (mut best, mut best_val) = (T::zero(), f(T::zero()));
    for i in 1..ROTATION_GRID {
        let t = h * T::from_count(i);
        let v = f(t);
        if v < best_val {
            best = t;
            best_val = v;
        }
    }
    let ratio = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let (mut a, mut b) = (best - h, best + h);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_STEPS {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        }
    }
    let mut theta = (a + b) / T::lit(2.0);
    if f(theta) > best_val {
        theta = best;
    }
    let wrapped = theta % period;
    Ok(if wrapped < T::zero() { wrapped + period } else { wrapped })
}

/// Solves the 2×2 complex system
/// `N¹₁₂(D)/N¹₁₁(D) = 2z + w N¹₁₂(B)/N¹₁₁(B)`,
/// `N²₁₂(D)/N²₁₁(D) = 2z + w N²₁₂(B)/N²₁₁(B)` for `(z, w)` and returns
/// `(z, arg w)`.
pub fn estimate_transform_nonsymmetric<T: Real>(query: &CgptPair<T>, candidate: &CgptPair<T>) -> Result<(Cplx<T>, T)> {
    if query.order() < 2 || candidate.order() < 2 {
        return invalid("transform estimate needs CGPTs of order 2");
    }
    let (b1, b2) = (candidate.n1[(0, 0)], candidate.n2[(0, 0)]);
    if !(cabs(b1) > T::lit(1e-6) * cabs(b2)) {
        return Err(Error::DegenerateCandidate("N¹₁₁ of the candidate vanishes".into()));
    }
    let a1 = candidate.n1[(0, 1)] / b1;
    let a2 = candidate.n2[(0, 1)] / b2;
    let r1 = query.n1[(0, 1)] / query.n1[(0, 0)];
    let r2 = query.n2[(0, 1)] / query.n2[(0, 0)];
    let two = T::lit(2.0);
    let det = (a2 - a1) * two;
    let row = |a: Cplx<T>| (T::lit(4.0) + a.norm_sqr()).sqrt();
    if !(cabs(det) > T::lit(1e-6) * row(a1) * row(a2)) || !r1.re.is_finite() {
        return Err(Error::DegenerateCandidate("transform system is singular".into()));
    }
    let w = (r2 - r1) / (a2 - a1);
    let z = (r1 - w * a1) / two;
    Ok((z, wrap_angle(carg(w))))
}

/// Result of [`debias`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebiasOutcome<T: Real> {
    pub transform: SimilarityTransform<T>,
    pub objective: T,
    pub initial_objective: T,
    pub iterations: usize,
    /// False when the iteration limit was reached before the step size fell
    /// below tolerance.
    pub converged: bool,
}

const DEBIAS_MAX_ITER: usize = 100;
const DEBIAS_MAX_HALVINGS: usize = 20;
const DEBIAS_TOL: f64 = 1e-10;

fn residual_vector<T: Real>(query: &CgptPair<T>, candidate: &CgptPair<T>, t: &SimilarityTransform<T>) -> DVector<T> {
    let moved = transform_cgpt(candidate, t);
    let k = query.order();
    let mut r = DVector::zeros(4 * k * k);
    let mut i = 0;
    for (a, b) in [(&moved.n1, &query.n1), (&moved.n2, &query.n2)] {
        for (x, y) in a.iter().zip(b.iter()) {
            r[i] = x.re - y.re;
            r[i + 1] = x.im - y.im;
            i += 2;
        }
    }
    r
}

fn with_params<T: Real>(p: &[T; 4]) -> SimilarityTransform<T> {
    SimilarityTransform { z: cplx(p[0], p[1]), s: p[2], theta: p[3] }
}

/// Gauss–Newton refinement of `(z, s, θ)` minimizing
/// `‖N¹(T B) − N¹(D)‖²_F + ‖N²(T B) − N²(D)‖²_F` at order `k_fit`, with
/// backtracking so the objective never increases.
pub fn debias<T: Real>(
    query: &CgptPair<T>,
    candidate: &CgptPair<T>,
    initial: &SimilarityTransform<T>,
    k_fit: usize,
) -> Result<DebiasOutcome<T>> {
    if k_fit == 0 {
        return invalid("debias order must be at least 1");
    }
    let k = k_fit.min(query.order()).min(candidate.order());
    let (q, c) = (truncated_pair(query, k), truncated_pair(candidate, k));
    let mut p = [initial.z.re, initial.z.im, initial.s, initial.theta];
    let mut r = residual_vector(&q, &c, &with_params(&p));
    let initial_objective = r.norm_squared();
    let mut obj = initial_objective;
    let tol = T::lit(DEBIAS_TOL);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < DEBIAS_MAX_ITER {
        iterations += 1;
        let jac = transform_jacobian(&c, &with_params(&p));
        let mut j = DMatrix::zeros(r.len(), 4);
        for col in 0..4 {
            let mut i = 0;
            for d in [&jac.d_n1[col], &jac.d_n2[col]] {
                for x in d.iter() {
                    j[(i, col)] = x.re;
                    j[(i + 1, col)] = x.im;
                    i += 2;
                }
            }
        }
        let svd = j.svd(true, true);
        let step = svd
            .solve(&(-&r), T::epsilon() * T::lit(1e3) * svd.singular_values.max())
            .map_err(|e| Error::Numerical(format!("Gauss–Newton step: {e}")))?;
        let scale = T::one() + p.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if step.amax() <= tol * scale {
            converged = true;
            break;
        }
        let mut accepted = false;
        let mut factor = T::one();
        for _ in 0..=DEBIAS_MAX_HALVINGS {
            let trial =
                [p[0] + step[0] * factor, p[1] + step[1] * factor, p[2] + step[2] * factor, p[3] + step[3] * factor];
            if trial[2] > T::zero() {
                let rt = residual_vector(&q, &c, &with_params(&trial));
                let ot = rt.norm_squared();
                if ot < obj {
                    p = trial;
                    r = rt;
                    obj = ot;
                    accepted = true;
                    break;
                }
            }
            factor *= T::lit(0.5);
        }
        if !accepted {
            // no descent direction left at working precision
            converged = true;
            break;
        }
    }
    if !converged {
        log::debug!("debias stopped after {DEBIAS_MAX_ITER} iterations without converging");
    }
    let transform = SimilarityTransform { z: cplx(p[0], p[1]), s: p[2], theta: wrap_angle(p[3]) };
    Ok(DebiasOutcome { transform, objective: obj, initial_objective, iterations, converged })
}

/// Fitting order used by debiasing: 2 without symmetry, `max(2, ⌈p/2⌉)` with.
pub fn debias_order(symmetry: usize) -> usize {
    if symmetry <= 1 {
        2
    } else {
        symmetry.div_ceil(2).max(2)
    }
}

/// Full transform estimate of the query relative to one candidate:
/// closed-form initial guess followed by debiasing.
///
/// Without symmetry the closed form relies on order-2 ratios, which noise
/// can push into a poor basin; the grid-search rotation estimate is debiased
/// as a second start and the lower objective wins.
pub fn estimate_transform<T: Real>(
    query: &CgptPair<T>,
    candidate: &CgptPair<T>,
    symmetry: usize,
) -> Result<SimilarityTransform<T>> {
    let s = estimate_scale(query, candidate)?;
    let k_fit = debias_order(symmetry);
    let grid_start = || -> Result<SimilarityTransform<T>> {
        let z = estimate_translation_symmetric(query)?;
        Ok(SimilarityTransform { z, s, theta: estimate_rotation_symmetric(query, candidate, symmetry, s, z)? })
    };
    if symmetry >= 2 {
        return Ok(debias(query, candidate, &grid_start()?, k_fit)?.transform);
    }
    let grid = debias(query, candidate, &grid_start()?, k_fit)?;
    match estimate_transform_nonsymmetric(query, candidate) {
        Ok((z, theta)) => {
            let closed = debias(query, candidate, &SimilarityTransform { z, s, theta }, k_fit)?;
            Ok(if closed.objective <= grid.objective { closed.transform } else { grid.transform })
        }
        Err(Error::DegenerateCandidate(_)) => Ok(grid.transform),
        Err(e) => Err(e),
    }
}

/// Algorithm 1: estimate the transform against every entry, undo it on the
/// query, and compare CGPTs of the first `k` orders by relative error.
///
/// The query needs order ≥ 2 for the transform estimate even when `k = 1`.
pub fn algorithm1_match<T: Real>(query: &CgptPair<T>, dict: &Dictionary<T>, k: usize) -> Result<MatchReport<T>> {
    if dict.is_empty() {
        return invalid("empty dictionary");
    }
    if k == 0 || k > query.order() || k > dict.order() {
        return invalid(format!(
            "comparison order {k} exceeds the available orders (query {}, dictionary {})",
            query.order(),
            dict.order()
        ));
    }
    let results = dict
        .entries
        .par_iter()
        .map(|entry| {
            let t = estimate_transform(query, &entry.cgpt, entry.symmetry)?;
            let back = transform_cgpt(&query.truncate(k)?, &t.inverse());
            let reference = entry.cgpt.truncate(k)?;
            Ok((back.distance(&reference) / reference.norm(), t))
        })
        .collect::<Result<Vec<(T, SimilarityTransform<T>)>>>()?;
    let (errors, transforms): (Vec<T>, Vec<_>) = results.into_iter().unzip();
    Ok(MatchReport::from_errors(dict, errors, Some(transforms)))
}

/// Algorithm 2: Frobenius distance between descriptors of the first `k`
/// orders.
pub fn algorithm2_match<T: Real>(query: &DescriptorPair<T>, dict: &Dictionary<T>, k: usize) -> Result<MatchReport<T>> {
    if dict.is_empty() {
        return invalid("empty dictionary");
    }
    if k == 0 || k > query.order() || k > dict.order() {
        return invalid(format!(
            "comparison order {k} exceeds the available orders (query {}, dictionary {})",
            query.order(),
            dict.order()
        ));
    }
    let q = query.truncate(k)?;
    let errors = dict
        .entries
        .iter()
        .map(|e| {
            let d = e.descriptors.truncate(k)?;
            Ok(((&d.i1 - &q.i1).norm_squared() + (&d.i2 - &q.i2).norm_squared()).sqrt())
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(MatchReport::from_errors(dict, errors, None))
}

/// Mean of `𝓘¹_{mn}` over each anti-diagonal `m + n = l`, for
/// `l = 2..=l_max`, using the entries available in the matrix. Anti-diagonals
/// with no entries yield 0.
pub fn antidiagonal_means<T: Real>(desc: &DescriptorPair<T>, l_max: usize) -> Vec<(usize, T)> {
    let k = desc.order();
    (2..=l_max)
        .map(|l| {
            let entries: Vec<T> =
                (1..l).filter(|&m| m <= k && l - m <= k).map(|m| desc.i1[(m - 1, l - m - 1)]).collect();
            let mean = if entries.is_empty() {
                T::zero()
            } else {
                entries.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(entries.len())
            };
            (l, mean)
        })
        .collect()
}

/// Relative threshold above the median anti-diagonal mean.
const PETAL_THRESHOLD: f64 = 5.0;

/// Number of petals: the first anti-diagonal `l ∈ [2, p_max]` whose mean
/// `𝓘¹` entry exceeds five times the median over all anti-diagonals up to
/// `p_max`. Only complete anti-diagonals are used, so the descriptors must
/// reach order `p_max − 1`.
pub fn petal_count<T: Real>(desc: &DescriptorPair<T>, p_max: usize) -> Result<usize> {
    if p_max < 2 {
        return invalid("p_max must be at least 2");
    }
    if desc.order() + 1 < p_max {
        return invalid(format!("descriptors of order {} cannot resolve p_max = {p_max}", desc.order()));
    }
    let means = antidiagonal_means(desc, p_max);
    let mut sorted: Vec<T> = means.iter().map(|&(_, m)| m).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / T::lit(2.0)
    };
    let threshold = median * T::lit(PETAL_THRESHOLD);
    // numerically zero anti-diagonals of exact tensors never count
    let floor = T::lit(1e-6) * sorted.last().copied().unwrap_or(T::zero());
    means
        .iter()
        .find(|&&(_, m)| m > threshold && m > floor && m > T::zero())
        .map(|&(l, _)| l)
        .ok_or(Error::NoSymmetryDetected { p_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgpt::compute_cgpt;
    use crate::geometry::{make_ellipse, make_flower, make_letter, normalize};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    fn c(re: f64, im: f64) -> Cplx<f64> {
        cplx(re, im)
    }

    fn tr(z: (f64, f64), s: f64, theta: f64) -> SimilarityTransform<f64> {
        SimilarityTransform::new(c(z.0, z.1), s, theta).unwrap()
    }

    fn letter(ch: char) -> CgptPair<f64> {
        let (b, _) = normalize(&make_letter::<f64>(ch, 1024).unwrap());
        compute_cgpt(&b, 3.5, 5).unwrap()
    }

    fn flower(p: usize) -> CgptPair<f64> {
        compute_cgpt(&make_flower(p, 0.3, 64 * p).unwrap(), 3.5, 10).unwrap()
    }

    fn small_dictionary() -> &'static Dictionary<f64> {
        static DICT: OnceLock<Dictionary<f64>> = OnceLock::new();
        DICT.get_or_init(|| {
            let shapes: Vec<ShapeSpec> = "PEHKRS".chars().map(ShapeSpec::Letter).collect();
            Dictionary::from_shapes(&shapes, 5, 3.5, Some(1024)).unwrap()
        })
    }

    fn angle_distance(a: f64, b: f64, period: f64) -> f64 {
        let d = (a - b).rem_euclid(period);
        d.min(period - d)
    }

    #[test]
    fn scale_estimates() {
        let p = letter('P');
        assert!((estimate_scale(&transform_cgpt(&p, &tr((0.0, 0.0), 7.5, 0.0)), &p).unwrap() - 7.5).abs() < 1e-12);
        assert_eq!(estimate_scale(&p, &p).unwrap(), 1.0);
        let q = transform_cgpt(&p, &tr((33.3505, 73.8395), 2.4762, 6.0827));
        assert!((estimate_scale(&q, &p).unwrap() - 2.4762).abs() < 1e-10);
        let neg = CgptPair { lambda: -3.5, n2: -p.n2.clone(), n1: p.n1.clone() };
        assert!(matches!(estimate_scale(&neg, &p), Err(Error::InconsistentContrast { .. })));
    }

    #[test]
    fn symmetric_translation_and_rotation() {
        let f5 = flower(5);
        let truth = tr((16.3, -46.7), 7.5, 2.69);
        let q = transform_cgpt(&f5, &truth);
        let z = estimate_translation_symmetric(&q).unwrap();
        assert!((z - truth.z).norm() < 1e-6);
        let s = estimate_scale(&q, &f5).unwrap();
        let theta = estimate_rotation_symmetric(&q, &f5, 5, s, z).unwrap();
        assert!(angle_distance(theta, 2.69, 2.0 * PI / 5.0) < 1e-6, "{theta}");
        assert!((0.0..2.0 * PI / 5.0).contains(&theta));

        assert!(estimate_translation_symmetric(&f5).unwrap().norm() < 1e-10);
        let disk = compute_cgpt(&make_ellipse(1.0, 1.0, 128).unwrap(), 3.5, 3).unwrap();
        let moved = transform_cgpt(&disk, &tr((0.4, -1.1), 1.0, 0.0));
        assert!((estimate_translation_symmetric(&moved).unwrap() - c(0.4, -1.1)).norm() < 1e-12);
        let unrotated = estimate_rotation_symmetric(&f5, &f5, 5, 1.0, c(0.0, 0.0)).unwrap();
        assert!(angle_distance(unrotated, 0.0, 2.0 * PI / 5.0) < 1e-6);
    }

    #[test]
    fn rotation_objective_is_minimal() {
        let f7 = flower(7);
        let truth = tr((1.0, 2.0), 1.5, 4.0);
        let q = transform_cgpt(&f7, &truth);
        let theta = estimate_rotation_symmetric(&q, &f7, 7, 1.5, truth.z).unwrap();
        let (qt, ct) = (q.truncate(4).unwrap(), f7.truncate(4).unwrap());
        let at = misfit(&qt, &ct, &tr((1.0, 2.0), 1.5, theta));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..64 {
            let other = rng.random_range(0.0..2.0 * PI);
            assert!(at <= misfit(&qt, &ct, &tr((1.0, 2.0), 1.5, other)));
        }
    }

    #[test]
    fn nonsymmetric_estimator_round_trip() {
        let p = letter('P');
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let truth = tr(
                (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..2.0 * PI),
            );
            let (z, theta) = estimate_transform_nonsymmetric(&transform_cgpt(&p, &truth), &p).unwrap();
            assert!((z - truth.z).norm() < 1e-8);
            assert!(angle_distance(theta, truth.theta, 2.0 * PI) < 1e-8);
        }
        let (z, theta) = estimate_transform_nonsymmetric(&p, &p).unwrap();
        assert!(z.norm() < 1e-12 && angle_distance(theta, 0.0, 2.0 * PI) < 1e-12);
        let paper = tr((33.3505, 73.8395), 2.4762, 6.0827);
        let (z, theta) = estimate_transform_nonsymmetric(&transform_cgpt(&p, &paper), &p).unwrap();
        assert!((z - paper.z).norm() < 1e-4 && (theta - 6.0827).abs() < 1e-4);
    }

    #[test]
    fn nonsymmetric_estimator_rejects_symmetric_candidates() {
        let f5 = flower(5);
        assert!(matches!(
            estimate_transform_nonsymmetric(&transform_cgpt(&f5, &tr((1.0, 0.0), 2.0, 0.3)), &f5),
            Err(Error::DegenerateCandidate(_))
        ));
    }

    #[test]
    fn debias_fixed_point_and_basin() {
        let p = letter('R');
        let truth = tr((2.0, -1.0), 1.7, 0.9);
        let q = transform_cgpt(&p, &truth);
        let fixed = debias(&q, &p, &truth, 2).unwrap();
        assert!((fixed.transform.z - truth.z).norm() < 1e-10);
        assert!((fixed.transform.s - truth.s).abs() < 1e-10);
        let start = SimilarityTransform { z: truth.z + c(0.2, -0.1), s: truth.s * 1.05, theta: truth.theta - 0.05 };
        let out = debias(&q, &p, &start, 2).unwrap();
        assert!(out.converged);
        assert!((out.transform.z - truth.z).norm() < 1e-8);
        assert!((out.transform.s - truth.s).abs() < 1e-8);
        assert!(angle_distance(out.transform.theta, truth.theta, 2.0 * PI) < 1e-8);
        assert!(out.objective <= out.initial_objective);
    }

    #[test]
    fn debias_never_increases_the_objective_on_noisy_data() {
        let p = letter('K');
        let truth = tr((0.5, 0.5), 2.0, 3.0);
        let mut q = transform_cgpt(&p, &truth);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scale = q.n2[(0, 0)].norm() * 0.05;
        q.n1.iter_mut().for_each(|x| *x += c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale);
        q.n2.iter_mut().for_each(|x| *x += c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale);
        let out = debias(&q, &p, &truth, 2).unwrap();
        assert!(out.objective <= out.initial_objective);
    }

    #[test]
    fn descriptors_are_invariant() {
        let p = letter('E');
        let d = shape_descriptors(&p).unwrap();
        // translations comparable to the shape size: far larger shifts push
        // the order-5 entries past double-precision cancellation limits
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let t = tr(
                (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                rng.random_range(0.5..2.0),
                rng.random_range(0.0..2.0 * PI),
            );
            let dt = shape_descriptors(&transform_cgpt(&p, &t)).unwrap();
            let dev = (&dt.i1 - &d.i1).amax().max((&dt.i2 - &d.i2).amax());
            assert!(dev < 1e-10, "{dev} {t:?}");
        }
        for m in 0..5 {
            assert_eq!(d.i2[(m, m)], 1.0);
        }
        assert!((&d.i1 - d.i1.transpose()).amax() < 1e-12 && (&d.i2 - d.i2.transpose()).amax() < 1e-12);
        let disk = compute_cgpt(&make_ellipse(1.0, 1.0, 128).unwrap(), 3.5, 4).unwrap();
        assert!(shape_descriptors(&disk).unwrap().i1.amax() < 1e-12);
    }

    #[test]
    fn self_matches() {
        let dict = small_dictionary();
        for (i, e) in dict.entries.iter().enumerate() {
            let r1 = algorithm1_match(&e.cgpt, dict, 5).unwrap();
            assert_eq!(r1.winner, i);
            assert!(r1.errors[i] <= 1e-10);
            let r2 = algorithm2_match(&e.descriptors, dict, 5).unwrap();
            assert_eq!(r2.winner, i);
            assert_eq!(r2.errors[i], 0.0);
        }
    }

    #[test]
    fn transformed_letter_is_identified() {
        let dict = small_dictionary();
        let i = dict.index_of("P").unwrap();
        let q = transform_cgpt(&dict.entries[i].cgpt, &tr((33.3505, 73.8395), 2.4762, 6.0827));
        let r = algorithm1_match(&q, dict, 5).unwrap();
        assert_eq!(r.winner_name(), "P");
        assert!(r.ranking.windows(2).all(|w| w[0].2 <= w[1].2));
        let r2 = algorithm2_match(&shape_descriptors(&q).unwrap(), dict, 5).unwrap();
        assert_eq!(r2.winner_name(), "P");
    }

    #[test]
    fn empty_dictionary_and_bad_orders() {
        let p = letter('P');
        let empty = Dictionary::<f64>::default();
        assert!(algorithm1_match(&p, &empty, 2).is_err());
        assert!(algorithm2_match(&shape_descriptors(&p).unwrap(), &empty, 2).is_err());
        assert!(algorithm1_match(&p, small_dictionary(), 6).is_err());
    }

    #[test]
    fn petals_from_exact_tensors() {
        for p in [3usize, 5, 7] {
            let d = shape_descriptors(&flower(p)).unwrap();
            assert_eq!(petal_count(&d, 11).unwrap(), p);
        }
        let disk = compute_cgpt(&make_ellipse(1.0, 1.0, 128).unwrap(), 3.5, 10).unwrap();
        assert!(matches!(
            petal_count(&shape_descriptors(&disk).unwrap(), 11),
            Err(Error::NoSymmetryDetected { p_max: 11 })
        ));
    }

    #[test]
    fn antidiagonals_of_exact_flower_vanish_off_pattern() {
        let d = shape_descriptors(&flower(5)).unwrap();
        for (l, m) in antidiagonal_means(&d, 11) {
            if l % 5 != 0 {
                assert!(m < 1e-8, "l={l} {m}");
            } else {
                assert!(m > 1e-3);
            }
        }
    }
}
