//! Closed inclusion boundaries: sampling, similarity transforms and the
//! shipped shape families (ellipses, flowers, damaged flowers, letters).

mod letters;
mod shapes;
mod spectral;

pub use letters::{glyph_polygon, make_letter, parse_glyph_file, perturb_letter, GLYPHS};
pub use shapes::{make_damaged_flower, make_ellipse, make_flower, DamagedFlowerProfile, ShapeSpec};

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::scalar::{cabs, carg, cis, cplx, Cplx, Real};

/// A sampled, counter-clockwise, closed `C²` curve.
///
/// Node `j` sits at parameter `ξ_j = 2πj/n`; `weights[j]` is the trapezoidal
/// arclength weight `|x'(ξ_j)|·2π/n`, so `Σ weights` is the perimeter.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary<T: Real> {
    points: Vec<Vector2<T>>,
    tangents: Vec<Vector2<T>>,
    normals: Vec<Vector2<T>>,
    weights: Vec<T>,
    curvature: Vec<T>,
}

impl<T: Real> Boundary<T> {
    /// Samples a periodic parametrization `ξ ↦ [x(ξ), x'(ξ), x''(ξ)]` at `n`
    /// equispaced nodes.
    pub fn from_parametrization<F>(n: usize, curve: F) -> Result<Self>
    where
        F: Fn(T) -> [Vector2<T>; 3],
    {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("need at least 3 nodes, got {n}")));
        }
        let h = T::two_pi() / T::from_count(n);
        let mut b = Self::with_capacity(n);
        for j in 0..n {
            let xi = h * T::from_count(j);
            let [x, dx, ddx] = curve(xi);
            b.push_node(x, dx, ddx, h)?;
        }
        b.check_orientation()?;
        Ok(b)
    }

    fn with_capacity(n: usize) -> Self {
        Self {
            points: Vec::with_capacity(n),
            tangents: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            curvature: Vec::with_capacity(n),
        }
    }

    fn push_node(&mut self, x: Vector2<T>, dx: Vector2<T>, ddx: Vector2<T>, h: T) -> Result<()> {
        let speed = dx.norm();
        if !(speed > T::zero()) || !speed.is_finite() {
            return Err(Error::DegenerateGeometry(format!(
                "parametrization speed {speed} at node {}",
                self.points.len()
            )));
        }
        let t = dx / speed;
        self.points.push(x);
        self.tangents.push(t);
        self.normals.push(Vector2::new(t.y, -t.x));
        self.weights.push(speed * h);
        self.curvature.push((dx.x * ddx.y - dx.y * ddx.x) / (speed * speed * speed));
        Ok(())
    }

    fn check_orientation(&self) -> Result<()> {
        if !(self.area() > T::zero()) {
            return Err(Error::DegenerateGeometry(
                "curve is not counter-clockwise (non-positive enclosed area)".into(),
            ));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vector2<T>] {
        &self.points
    }

    pub fn tangents(&self) -> &[Vector2<T>] {
        &self.tangents
    }

    /// Outward unit normals.
    pub fn normals(&self) -> &[Vector2<T>] {
        &self.normals
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Signed curvature; positive on convex arcs of a counter-clockwise curve.
    pub fn curvature(&self) -> &[T] {
        &self.curvature
    }

    pub fn perimeter(&self) -> T {
        self.weights.iter().fold(T::zero(), |acc, &w| acc + w)
    }

    /// Enclosed area, `∮ x₁ ν₁ ds`.
    pub fn area(&self) -> T {
        self.quad(|x, nu| x.x * nu.x)
    }

    /// Area centroid (centre of mass of the filled inclusion).
    pub fn centroid(&self) -> Vector2<T> {
        let two_area = self.area() * T::lit(2.0);
        let cx = self.quad(|x, nu| x.x * x.x * nu.x) / two_area;
        let cy = self.quad(|x, nu| x.y * x.y * nu.y) / two_area;
        Vector2::new(cx, cy)
    }

    /// Trapezoidal quadrature `Σ_j f(x_j, ν_j) w_j`.
    pub fn quad<F: Fn(&Vector2<T>, &Vector2<T>) -> T>(&self, f: F) -> T {
        self.points
            .iter()
            .zip(&self.normals)
            .zip(&self.weights)
            .fold(T::zero(), |acc, ((x, nu), &w)| acc + f(x, nu) * w)
    }

    /// Largest arclength weight, i.e. the coarsest node spacing.
    pub fn max_spacing(&self) -> T {
        self.weights.iter().fold(T::zero(), |acc, &w| acc.max(w))
    }

    /// Distance from `x` to the nearest node.
    pub fn distance_to_nodes(&self, x: &Vector2<T>) -> T {
        self.points.iter().map(|p| (p - x).norm()).fold(T::max_value().unwrap_or(T::lit(f64::MAX)), |a, b| a.min(b))
    }

    /// Winding-number test against the node polygon.
    pub fn contains(&self, x: &Vector2<T>) -> bool {
        let n = self.points.len();
        let mut winding = 0i32;
        for i in 0..n {
            let a = self.points[i] - x;
            let b = self.points[(i + 1) % n] - x;
            let cross = a.x * b.y - a.y * b.x;
            if a.y <= T::zero() {
                if b.y > T::zero() && cross > T::zero() {
                    winding += 1;
                }
            } else if b.y <= T::zero() && cross < T::zero() {
                winding -= 1;
            }
        }
        winding != 0
    }

    /// Whether two non-adjacent edges of the node polygon cross.
    pub fn self_intersects(&self) -> bool {
        let n = self.points.len();
        let p = &self.points;
        let orient = |a: &Vector2<T>, b: &Vector2<T>, c: &Vector2<T>| {
            let v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
            if v > T::zero() {
                1
            } else if v < T::zero() {
                -1
            } else {
                0
            }
        };
        for i in 0..n {
            let (a, b) = (&p[i], &p[(i + 1) % n]);
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (c, d) = (&p[j], &p[(j + 1) % n]);
                let o1 = orient(a, b, c);
                let o2 = orient(a, b, d);
                let o3 = orient(c, d, a);
                let o4 = orient(c, d, b);
                if o1 * o2 < 0 && o3 * o4 < 0 {
                    return true;
                }
            }
        }
        false
    }

    /// Builds a boundary from explicit per-node data, checking the invariants.
    pub fn from_nodes(
        points: Vec<Vector2<T>>,
        tangents: Vec<Vector2<T>>,
        weights: Vec<T>,
        curvature: Vec<T>,
    ) -> Result<Self> {
        let n = points.len();
        if n < 3 || tangents.len() != n || weights.len() != n || curvature.len() != n {
            return Err(Error::InvalidArgument("inconsistent node arrays".into()));
        }
        let mut normals = Vec::with_capacity(n);
        let mut unit_tangents = Vec::with_capacity(n);
        for t in &tangents {
            let len = t.norm();
            if !(len > T::zero()) {
                return Err(Error::DegenerateGeometry("zero tangent".into()));
            }
            let t = t / len;
            normals.push(Vector2::new(t.y, -t.x));
            unit_tangents.push(t);
        }
        let b = Self { points, tangents: unit_tangents, normals, weights, curvature };
        b.check_orientation()?;
        Ok(b)
    }

    /// Converts the boundary to another scalar type.
    pub fn cast<U: Real>(&self) -> Boundary<U> {
        let v = |x: &Vector2<T>| Vector2::new(U::lit(x.x.as_f64()), U::lit(x.y.as_f64()));
        let s = |x: &T| U::lit(x.as_f64());
        Boundary {
            points: self.points.iter().map(v).collect(),
            tangents: self.tangents.iter().map(v).collect(),
            normals: self.normals.iter().map(v).collect(),
            weights: self.weights.iter().map(s).collect(),
            curvature: self.curvature.iter().map(s).collect(),
        }
    }
}

/// `x ↦ z + s·e^{iθ}·x`, i.e. the composite `T_z ∘ s ∘ R_θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform<T: Real> {
    pub z: Cplx<T>,
    pub s: T,
    pub theta: T,
}

impl<T: Real> SimilarityTransform<T> {
    /// Validates `s > 0` and reduces `theta` into `[0, 2π)`.
    pub fn new(z: Cplx<T>, s: T, theta: T) -> Result<Self> {
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {s}")));
        }
        Ok(Self { z, s, theta: wrap_angle(theta) })
    }

    pub fn identity() -> Self {
        Self { z: cplx(T::zero(), T::zero()), s: T::one(), theta: T::zero() }
    }

    /// `w = s·e^{iθ}`.
    pub fn w(&self) -> Cplx<T> {
        cis(self.theta) * self.s
    }

    pub fn apply_complex(&self, x: Cplx<T>) -> Cplx<T> {
        self.z + self.w() * x
    }

    pub fn apply_point(&self, x: &Vector2<T>) -> Vector2<T> {
        let y = self.apply_complex(cplx(x.x, x.y));
        Vector2::new(y.re, y.im)
    }

    /// The transform equal to applying `self` first and `then` second.
    pub fn then(&self, then: &Self) -> Self {
        let w = then.w() * self.w();
        Self { z: then.z + then.w() * self.z, s: cabs(w), theta: wrap_angle(carg(w)) }
    }

    /// `R_{-θ} s⁻¹ T_{-z}` written again in `T_z' s' R_θ'` form.
    pub fn inverse(&self) -> Self {
        let winv = cis(-self.theta) / self.s;
        Self { z: -(winv * self.z), s: T::one() / self.s, theta: wrap_angle(-self.theta) }
    }
}

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let tp = T::two_pi();
    let mut t = theta % tp;
    if t < T::zero() {
        t += tp;
    }
    if t >= tp {
        t -= tp;
    }
    t
}

/// Maps nodes by `x ↦ z + s e^{iθ} x`, rotating frames and rescaling weights
/// and curvature.
pub fn apply_transform<T: Real>(boundary: &Boundary<T>, t: &SimilarityTransform<T>) -> Boundary<T> {
    let (c, s) = (t.theta.cos(), t.theta.sin());
    let rot = |v: &Vector2<T>| Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y);
    Boundary {
        points: boundary.points.iter().map(|x| t.apply_point(x)).collect(),
        tangents: boundary.tangents.iter().map(rot).collect(),
        normals: boundary.normals.iter().map(rot).collect(),
        weights: boundary.weights.iter().map(|&w| w * t.s).collect(),
        curvature: boundary.curvature.iter().map(|&k| k / t.s).collect(),
    }
}

/// Half the largest pairwise node distance.
pub fn characteristic_size<T: Real>(boundary: &Boundary<T>) -> T {
    let p = boundary.points();
    let mut best = T::zero();
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            best = best.max((p[i] - p[j]).norm_squared());
        }
    }
    best.sqrt() / T::lit(2.0)
}

/// Translates the centroid to the origin and rescales to unit characteristic
/// size; returns the normalized boundary and the transform that maps it back.
pub fn normalize<T: Real>(boundary: &Boundary<T>) -> (Boundary<T>, SimilarityTransform<T>) {
    let c = boundary.centroid();
    let delta = characteristic_size(boundary);
    let to_unit = SimilarityTransform { z: cplx(-c.x / delta, -c.y / delta), s: T::one() / delta, theta: T::zero() };
    (apply_transform(boundary, &to_unit), to_unit.inverse())
}
