//! Experiment protocols: scenario setup, seeded noisy trials, and the
//! reconstruction, petal-counting and identification studies built on them.
//!
//! Every noisy trial draws its noise from `split_seed(master, stream)`, so
//! results do not depend on how trials are scheduled across threads.

use nalgebra::{DMatrix, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgpt::{compute_cgpt, from_real_blocks, to_real_blocks, CgptPair, RealCgptBlocks};
use crate::error::{invalid, Error, Result};
use crate::geometry::{apply_transform, characteristic_size, normalize, Boundary, ShapeSpec, SimilarityTransform};
use crate::matching::{
    algorithm1_match, algorithm2_match, antidiagonal_means, petal_count, shape_descriptors, Dictionary,
};
use crate::msr::{
    add_noise, max_truncation_order, reconstruct_cgpt, relative_block_error, resolving_order, simulate_msr,
    ArrayConfig, MsrMatrix,
};
use crate::potential::contrast_from_conductivity;
use crate::scalar::cplx;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Counter-based seed for stream `stream` of a master seed.
pub fn split_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

/// One inclusion in front of one array: the base shape (optionally
/// normalized), moved by `transform`, imaged with conductivity `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub shape: ShapeSpec,
    pub nodes: usize,
    /// Normalize the base shape (centroid at 0, unit size) before moving it.
    pub normalize: bool,
    pub kappa: f64,
    pub transform: SimilarityTransform<f64>,
    pub array: ArrayConfig<f64>,
}

impl Scenario {
    pub fn base(&self) -> Result<Boundary<f64>> {
        let b = self.shape.build::<f64>(self.nodes)?;
        Ok(if self.normalize { normalize(&b).0 } else { b })
    }

    /// The inclusion `D = T(B)`.
    pub fn inclusion(&self) -> Result<Boundary<f64>> {
        Ok(apply_transform(&self.base()?, &self.transform))
    }

    pub fn lambda(&self) -> Result<f64> {
        contrast_from_conductivity(self.kappa)
    }

    /// `ε = δ/R`.
    pub fn epsilon(&self) -> Result<f64> {
        Ok(characteristic_size(&self.inclusion()?) / self.array.radius)
    }

    pub fn simulate(&self) -> Result<MsrMatrix<f64>> {
        simulate_msr(&self.inclusion()?, self.kappa, &self.array)
    }

    /// CGPTs of the inclusion about the array's expansion point, computed
    /// directly from the boundary.
    pub fn oracle_cgpt(&self, order: usize) -> Result<CgptPair<f64>> {
        let r = self.array.reference;
        let shift = SimilarityTransform { z: cplx(-r.x, -r.y), s: 1.0, theta: 0.0 };
        compute_cgpt(&apply_transform(&self.inclusion()?, &shift), self.lambda()?, order)
    }
}

/// Clean data together with what the order formulas need.
#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    pub clean: MsrMatrix<f64>,
    pub eps: f64,
    pub lambda: f64,
}

impl Scenario {
    pub fn acquire(&self) -> Result<Acquisition> {
        Ok(Acquisition { clean: self.simulate()?, eps: self.epsilon()?, lambda: self.lambda()? })
    }
}

impl Acquisition {
    pub fn orders(&self, sigma0: f64, tau0: f64) -> Result<OrderChoice> {
        choose_orders(&self.clean, sigma0, tau0, self.eps)
    }
}

/// Noise statistics of a data set and the orders they allow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderChoice {
    pub sigma0: f64,
    pub noise_sigma: f64,
    /// Truncation order `K` used by the least-squares reconstruction.
    pub truncation: usize,
    /// Resolving order `m₀` at tolerance `τ₀` (`usize::MAX`, stored as
    /// `null`, when noiseless).
    #[serde(with = "unbounded")]
    pub resolving: usize,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &usize, s: S) -> Result<S::Ok, S::Error> {
        if *m == usize::MAX {
            s.serialize_none()
        } else {
            s.serialize_some(m)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        Ok(Option::<usize>::deserialize(d)?.unwrap_or(usize::MAX))
    }
}

/// Orders for data of clean range `V_max − V_min` at noise level `σ₀`.
pub fn choose_orders(clean: &MsrMatrix<f64>, sigma0: f64, tau0: f64, eps: f64) -> Result<OrderChoice> {
    if !(sigma0 >= 0.0) || !sigma0.is_finite() {
        return invalid(format!("noise level must be non-negative, got {sigma0}"));
    }
    let noise_sigma = (clean.values.max() - clean.values.min()) * sigma0;
    let n = clean.config.n;
    // 2K < N keeps the angular basis orthogonal
    let truncation = max_truncation_order(noise_sigma, n, eps)?.min((n - 1) / 2);
    let resolving = resolving_order(noise_sigma, tau0, eps)?;
    Ok(OrderChoice { sigma0, noise_sigma, truncation, resolving })
}

/// One seeded noisy reconstruction at order `K` (noise skipped for σ₀ = 0).
pub fn noisy_reconstruction(clean: &MsrMatrix<f64>, choice: &OrderChoice, seed: u64) -> Result<RealCgptBlocks<f64>> {
    let v = add_noise(clean, choice.sigma0, seed)?;
    reconstruct_cgpt(&v, choice.truncation)
}

/// Per-noise-level summary of a reconstruction study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionRow {
    pub orders: OrderChoice,
    /// Relative error of the diagonal block of order `m` (index `m − 1`) of
    /// the mean reconstruction over all trials.
    pub mean_error: Vec<f64>,
    /// Mean over trials of the per-trial relative block error.
    pub trial_error: Vec<f64>,
}

/// Reconstructs `trials` noisy copies per noise level and compares diagonal
/// blocks of orders `1..=max_order` (capped by `K`) with the oracle.
///
/// `truncation` overrides the order formula when set.
pub fn reconstruction_study(
    scenario: &Scenario,
    sigma0s: &[f64],
    trials: usize,
    tau0: f64,
    max_order: usize,
    truncation: Option<usize>,
    seed: u64,
) -> Result<Vec<ReconstructionRow>> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    let clean = scenario.simulate()?;
    let eps = scenario.epsilon()?;
    let exact = to_real_blocks(&scenario.oracle_cgpt(max_order)?);
    sigma0s
        .iter()
        .enumerate()
        .map(|(level, &sigma0)| {
            let mut orders = choose_orders(&clean, sigma0, tau0, eps)?;
            if let Some(k) = truncation {
                if k == 0 || 2 * k >= clean.config.n {
                    return invalid(format!("truncation order {k} needs 1 ≤ K and 2K < N = {}", clean.config.n));
                }
                orders.truncation = k;
            }
            let depth = max_order.min(orders.truncation);
            let stream = split_seed(seed, level as u64);
            let runs = if sigma0 == 0.0 { 1 } else { trials };
            let estimates = (0..runs)
                .into_par_iter()
                .map(|t| noisy_reconstruction(&clean, &orders, split_seed(stream, t as u64)))
                .collect::<Result<Vec<_>>>()?;
            let dim = 2 * orders.truncation;
            let sum = estimates.iter().fold(DMatrix::zeros(dim, dim), |acc, e| acc + &e.m);
            let mean = RealCgptBlocks::new(sum / runs as f64)?;
            let mut mean_error = Vec::with_capacity(depth);
            let mut trial_error = Vec::with_capacity(depth);
            for m in 1..=depth {
                mean_error.push(relative_block_error(&mean, &exact, m)?);
                let mut acc = 0.0;
                for e in &estimates {
                    acc += relative_block_error(e, &exact, m)?;
                }
                trial_error.push(acc / runs as f64);
            }
            Ok(ReconstructionRow { orders, mean_error, trial_error })
        })
        .collect()
}

/// Query CGPTs from one noisy trial: reconstruct at `K`, keep the first
/// `min(m₀, K)` orders but never fewer than `min_order` (when `K` allows).
pub fn query_from_trial(
    clean: &MsrMatrix<f64>,
    choice: &OrderChoice,
    lambda: f64,
    min_order: usize,
    seed: u64,
) -> Result<CgptPair<f64>> {
    let blocks = noisy_reconstruction(clean, choice, seed)?;
    let keep = choice.resolving.max(min_order).min(choice.truncation);
    from_real_blocks(&blocks.truncate(keep)?, lambda)
}

/// Per-noise-level outcome of a petal-counting study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PetalRow {
    pub orders: OrderChoice,
    /// Largest anti-diagonal searched for petals, `min(p_max, min(m₀, K) + 1)`.
    pub l_max: usize,
    /// Mean over trials of the anti-diagonal means of `𝓘¹`, for
    /// `l = 2..=min(p_max, 2 min(m₀, K))` (the upper ones are incomplete).
    pub antidiagonal_means: Vec<(usize, f64)>,
    /// Detected petal count per trial (`None` when nothing was detected).
    pub detections: Vec<Option<usize>>,
}

impl PetalRow {
    pub fn hits(&self, p: usize) -> usize {
        self.detections.iter().filter(|d| **d == Some(p)).count()
    }
}

/// Counts petals on `trials` noisy reconstructions per noise level. The
/// descriptors are truncated at the resolving order, which bounds the
/// anti-diagonals that carry information.
pub fn petal_study(
    acq: &Acquisition,
    sigma0s: &[f64],
    trials: usize,
    tau0: f64,
    p_max: usize,
    seed: u64,
) -> Result<Vec<PetalRow>> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    if p_max < 2 {
        return invalid("p_max must be at least 2");
    }
    let (clean, lambda) = (&acq.clean, acq.lambda);
    sigma0s
        .iter()
        .enumerate()
        .map(|(level, &sigma0)| {
            let orders = acq.orders(sigma0, tau0)?;
            let stream = split_seed(seed, level as u64);
            let runs = if sigma0 == 0.0 { 1 } else { trials };
            let per_trial = (0..runs)
                .into_par_iter()
                .map(|t| {
                    let q = query_from_trial(clean, &orders, lambda, 1, split_seed(stream, t as u64))?;
                    let desc = shape_descriptors(&q)?;
                    let means = antidiagonal_means(&desc, p_max.min(2 * desc.order()));
                    let detected = match petal_count(&desc, p_max.min(desc.order() + 1)) {
                        Ok(p) => Some(p),
                        Err(Error::NoSymmetryDetected { .. }) => None,
                        Err(e) => return Err(e),
                    };
                    Ok((means, detected))
                })
                .collect::<Result<Vec<_>>>()?;
            let shown = per_trial.iter().map(|(m, _)| m.len() + 1).min().unwrap_or(1);
            let l_max = p_max.min(orders.resolving.min(orders.truncation) + 1);
            let antidiagonal_means = (2..=shown)
                .map(|l| (l, per_trial.iter().map(|(m, _)| m[l - 2].1).sum::<f64>() / runs as f64))
                .collect();
            let detections = per_trial.into_iter().map(|(_, d)| d).collect();
            Ok(PetalRow { orders, l_max, antidiagonal_means, detections })
        })
        .collect()
}

/// Which matching algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// CGPT matching with transform estimation.
    Cgpt,
    /// Invariant-descriptor matching.
    Descriptor,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "cgpt" => Ok(Algorithm::Cgpt),
            "2" | "descriptor" => Ok(Algorithm::Descriptor),
            _ => Err(Error::Parse(format!("unknown algorithm `{s}` (expected 1 or 2)"))),
        }
    }
}

/// Per-entry errors `e_n` for one query.
pub fn match_errors(query: &CgptPair<f64>, dict: &Dictionary<f64>, algo: Algorithm, k: usize) -> Result<Vec<f64>> {
    Ok(match algo {
        Algorithm::Cgpt => algorithm1_match(query, dict, k)?.errors,
        Algorithm::Descriptor => algorithm2_match(&shape_descriptors(query)?, dict, k)?.errors,
    })
}

/// Identification outcome for one true shape at one noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationRow {
    pub truth: String,
    pub orders: OrderChoice,
    /// Mean `e_n` over trials, in dictionary order.
    pub mean_errors: Vec<f64>,
    /// Winning entry per trial.
    pub winners: Vec<usize>,
}

impl IdentificationRow {
    /// Trials won by `index`.
    pub fn wins(&self, index: usize) -> usize {
        self.winners.iter().filter(|&&w| w == index).count()
    }

    /// Entry with the smallest mean error.
    pub fn mean_winner(&self) -> usize {
        let mut best = 0;
        for (i, e) in self.mean_errors.iter().enumerate() {
            if *e < self.mean_errors[best] {
                best = i;
            }
        }
        best
    }
}

/// Matches `trials` noisy reconstructions of the clean data against
/// the dictionary at comparison order `k`.
///
/// Queries keep `max(min(m₀, K), k, 2)` orders (capped at `K`): order 2 is
/// needed by the transform estimate and order `k` by the comparison.
#[allow(clippy::too_many_arguments)]
pub fn identification_study(
    acq: &Acquisition,
    truth: &str,
    dict: &Dictionary<f64>,
    algo: Algorithm,
    k: usize,
    sigma0: f64,
    trials: usize,
    tau0: f64,
    seed: u64,
) -> Result<IdentificationRow> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    let orders = acq.orders(sigma0, tau0)?;
    let runs = if sigma0 == 0.0 { 1 } else { trials };
    let per_trial = (0..runs)
        .into_par_iter()
        .map(|t| {
            let q = query_from_trial(&acq.clean, &orders, acq.lambda, k.max(2), split_seed(seed, t as u64))?;
            match_errors(&q, dict, algo, k.min(q.order()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mean_errors = vec![0.0; dict.len()];
    let mut winners = Vec::with_capacity(runs);
    for errs in &per_trial {
        let mut best = 0;
        for (i, e) in errs.iter().enumerate() {
            mean_errors[i] += e / runs as f64;
            if *e < errs[best] {
                best = i;
            }
        }
        winners.push(best);
    }
    Ok(IdentificationRow { truth: truth.to_string(), orders, mean_errors, winners })
}

/// Array centre inside `boundary`: its centroid when that lies inside,
/// otherwise the interior grid point closest to the centroid among those
/// reasonably far from the boundary.
pub fn interior_reference(boundary: &Boundary<f64>) -> Result<Vector2<f64>> {
    let c = boundary.centroid();
    if boundary.contains(&c) && boundary.distance_to_nodes(&c) > 4.0 * boundary.max_spacing() {
        return Ok(c);
    }
    let (mut lo, mut hi) = (boundary.points()[0], boundary.points()[0]);
    for p in boundary.points() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    const GRID: usize = 64;
    let mut candidates = Vec::new();
    for i in 1..GRID {
        for j in 1..GRID {
            let x = Vector2::new(
                lo.x + (hi.x - lo.x) * i as f64 / GRID as f64,
                lo.y + (hi.y - lo.y) * j as f64 / GRID as f64,
            );
            if boundary.contains(&x) {
                candidates.push((x, boundary.distance_to_nodes(&x)));
            }
        }
    }
    let deepest = candidates.iter().map(|c| c.1).fold(0.0, f64::max);
    candidates
        .iter()
        .filter(|c| c.1 >= 0.5 * deepest)
        .min_by(|a, b| (a.0 - c).norm().total_cmp(&(b.0 - c).norm()))
        .map(|c| c.0)
        .ok_or_else(|| Error::DegenerateGeometry("no interior point found".into()))
}

/// Array description in configuration files: the radius is given directly
/// or through `ε = δ/R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Array centre and expansion point `z0`; the inclusion centroid (or an
    /// interior point near it) when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub z: [f64; 2],
    pub s: f64,
    pub theta: f64,
}

impl Default for TransformSpec {
    fn default() -> Self {
        Self { z: [0.0, 0.0], s: 1.0, theta: 0.0 }
    }
}

fn default_kappa() -> f64 {
    4.0 / 3.0
}
fn default_trials() -> usize {
    100
}
fn default_tau0() -> f64 {
    0.1
}
fn default_orders() -> Vec<usize> {
    vec![1, 2, 3, 4, 5, 6]
}
fn default_p_max() -> usize {
    11
}

/// Experiment description shared by the CLI subcommands (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Shape spec such as `ellipse:1,0.5` or `letter:P`.
    pub shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    /// Normalize the base shape before applying the transform.
    #[serde(default)]
    pub normalize: bool,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    pub array: ArraySpec,
    #[serde(default)]
    pub transform: TransformSpec,
    #[serde(default)]
    pub sigma0: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_tau0")]
    pub tau0: f64,
    /// CGPT orders reported or compared.
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_p_max")]
    pub p_max: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if let Some(s) = self.sigma0.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return invalid(format!("noise level must be non-negative, got {s}"));
        }
        if !(self.tau0 > 0.0 && self.tau0 <= 1.0) {
            return invalid(format!("τ₀ must lie in (0, 1], got {}", self.tau0));
        }
        if self.orders.contains(&0) {
            return invalid("orders must be at least 1");
        }
        match (self.array.radius, self.array.epsilon) {
            (Some(_), Some(_)) => return invalid("give the array radius or ε, not both"),
            (None, None) => return invalid("the array needs a radius or ε"),
            (_, Some(e)) if !(e > 0.0 && e < 1.0) => return invalid(format!("ε must lie in (0, 1), got {e}")),
            _ => {}
        }
        Ok(())
    }

    pub fn shape_spec(&self) -> Result<ShapeSpec> {
        self.shape.parse()
    }

    pub fn max_order(&self) -> usize {
        self.orders.iter().copied().max().unwrap_or(1)
    }

    /// Resolves the array geometry against the transformed shape and checks
    /// that `z0` lies inside it.
    pub fn scenario(&self) -> Result<Scenario> {
        self.validate()?;
        let shape = self.shape_spec()?;
        let t = &self.transform;
        let transform = SimilarityTransform::new(cplx(t.z[0], t.z[1]), t.s, t.theta)?;
        let nodes = self.nodes.unwrap_or_else(|| shape.default_nodes());
        let provisional = Scenario {
            shape,
            nodes,
            normalize: self.normalize,
            kappa: self.kappa,
            transform,
            array: ArrayConfig::new(self.array.n, 1.0, Vector2::zeros())?,
        };
        let d = provisional.inclusion()?;
        let z0 = match self.array.z0 {
            Some([x, y]) => Vector2::new(x, y),
            None => interior_reference(&d)?,
        };
        if !d.contains(&z0) {
            return Err(Error::ContractViolation(format!(
                "reference point ({}, {}) is not inside the inclusion",
                z0.x, z0.y
            )));
        }
        let radius = match (self.array.radius, self.array.epsilon) {
            (Some(r), _) => r,
            (None, Some(e)) => characteristic_size(&d) / e,
            (None, None) => unreachable!("validated above"),
        };
        Ok(Scenario { array: ArrayConfig::new(self.array.n, radius, z0)?, ..provisional })
    }
}

/// Transform applied to letter queries in the identification experiments.
pub fn letter_transform() -> SimilarityTransform<f64> {
    SimilarityTransform { z: cplx(33.3505, 73.8395), s: 2.4762, theta: 6.0827 }
}

/// Transform applied to flower queries in the petal experiments.
pub fn flower_transform() -> SimilarityTransform<f64> {
    SimilarityTransform { z: cplx(16.3, -46.7), s: 7.5, theta: 2.69 }
}

/// Array used with the flowers: 51 elements centred at `(15, −45.5)` with
/// `δ/R = 0.5`.
pub fn flower_scenario(shape: ShapeSpec) -> Result<Scenario> {
    ExperimentConfig {
        shape: shape.to_string(),
        nodes: None,
        normalize: false,
        kappa: default_kappa(),
        array: ArraySpec { n: 51, radius: None, epsilon: Some(0.5), z0: Some([15.0, -45.5]) },
        transform: TransformSpec { z: [16.3, -46.7], s: 7.5, theta: 2.69 },
        sigma0: vec![],
        trials: 1,
        tau0: default_tau0(),
        orders: default_orders(),
        p_max: default_p_max(),
        seed: 0,
        output: None,
    }
    .scenario()
}

/// Normalized letter moved by [`letter_transform`], imaged by 51 elements
/// with `δ/R = 0.5` centred inside the letter.
pub fn letter_scenario(glyph: char) -> Result<Scenario> {
    let t = letter_transform();
    ExperimentConfig {
        shape: ShapeSpec::Letter(glyph).to_string(),
        nodes: None,
        normalize: true,
        kappa: default_kappa(),
        array: ArraySpec { n: 51, radius: None, epsilon: Some(0.5), z0: None },
        transform: TransformSpec { z: [t.z.re, t.z.im], s: t.s, theta: t.theta },
        sigma0: vec![],
        trials: 1,
        tau0: default_tau0(),
        orders: default_orders(),
        p_max: default_p_max(),
        seed: 0,
        output: None,
    }
    .scenario()
}

/// The acquisition setup of the reconstruction experiments: ellipse with
/// semi-axes 1 and 0.5 at the origin, 51 elements on the circle of radius 2.
pub fn ellipse_scenario() -> Result<Scenario> {
    Ok(Scenario {
        shape: ShapeSpec::Ellipse { a: 1.0, b: 0.5 },
        nodes: 512,
        normalize: false,
        kappa: default_kappa(),
        transform: SimilarityTransform::identity(),
        array: ArrayConfig::new(51, 2.0, Vector2::zeros())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_seed_is_injective_on_small_counters() {
        let mut seen = std::collections::HashSet::new();
        for m in 0..4u64 {
            for t in 0..1000u64 {
                assert!(seen.insert(split_seed(m, t)));
            }
        }
    }

    #[test]
    fn orders_shrink_as_noise_grows() {
        let s = ellipse_scenario().unwrap();
        let v = s.simulate().unwrap();
        let eps = s.epsilon().unwrap();
        assert!((eps - 0.5).abs() < 1e-3);
        let choices: Vec<OrderChoice> =
            [0.001, 0.01, 0.1, 1.0].iter().map(|&s0| choose_orders(&v, s0, 0.1, eps).unwrap()).collect();
        for w in choices.windows(2) {
            assert!(w[1].resolving <= w[0].resolving && w[1].truncation <= w[0].truncation);
            assert!((w[1].noise_sigma / w[0].noise_sigma - 10.0).abs() < 1e-9);
        }
        for c in &choices {
            assert!(c.resolving <= c.truncation && 2 * c.truncation < 51);
        }
    }

    #[test]
    fn noiseless_reconstruction_matches_oracle() {
        let s = ellipse_scenario().unwrap();
        let rows = reconstruction_study(&s, &[0.0], 3, 0.1, 4, Some(12), 7).unwrap();
        for e in &rows[0].mean_error {
            assert!(*e < 1e-4, "{:?}", rows[0].mean_error);
        }
    }

    #[test]
    fn config_rejects_reference_outside_shape() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"shape":"ellipse:1,0.5","array":{"n":51,"radius":2.0,"z0":[0.0,0.9]}}"#).unwrap();
        assert!(matches!(cfg.scenario(), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn config_requires_exactly_one_radius_source() {
        let both: ExperimentConfig =
            serde_json::from_str(r#"{"shape":"ellipse:1,0.5","array":{"n":51,"radius":2.0,"epsilon":0.5}}"#).unwrap();
        assert!(both.validate().is_err());
        let zero_trials: ExperimentConfig =
            serde_json::from_str(r#"{"shape":"ellipse:1,0.5","trials":0,"array":{"n":51,"radius":2.0}}"#).unwrap();
        assert!(zero_trials.validate().is_err());
    }

    #[test]
    fn interior_reference_for_concave_letter() {
        let (b, _) = normalize(&crate::geometry::make_letter::<f64>('C', 1024).unwrap());
        let z = interior_reference(&b).unwrap();
        assert!(b.contains(&z));
    }
}
