use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, Vector2, Vector4};

use super::{letters, Boundary};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Ellipse `(a cos ξ, b sin ξ)` with analytic normals and curvature.
pub fn make_ellipse<T: Real>(semi_axis_a: T, semi_axis_b: T, n: usize) -> Result<Boundary<T>> {
    if !(semi_axis_a > T::zero() && semi_axis_b > T::zero()) {
        return invalid(format!("ellipse axes must be positive, got {semi_axis_a}, {semi_axis_b}"));
    }
    if n < 16 || !n.is_multiple_of(2) {
        return invalid(format!("ellipse needs an even node count >= 16, got {n}"));
    }
    let (a, b) = (semi_axis_a, semi_axis_b);
    Boundary::from_parametrization(n, |xi: T| {
        let (s, c) = (xi.sin(), xi.cos());
        [Vector2::new(a * c, b * s), Vector2::new(-a * s, b * c), Vector2::new(-a * c, -b * s)]
    })
}

/// Curve `x(ξ)·r(ξ)` from a radial profile returning `(r, r', r'')`.
fn radial_curve<T: Real>(n: usize, profile: impl Fn(T) -> (T, T, T)) -> Result<Boundary<T>> {
    Boundary::from_parametrization(n, |xi: T| {
        let (r, dr, ddr) = profile(xi);
        let (s, c) = (xi.sin(), xi.cos());
        let e = Vector2::new(c, s);
        let e_perp = Vector2::new(-s, c);
        let two = T::lit(2.0);
        [e * r, e * dr + e_perp * r, e * (ddr - r) + e_perp * (two * dr)]
    })
}

fn check_petals<T: Real>(p: usize, eta: T) -> Result<()> {
    if p < 2 {
        return invalid(format!("petal count must be >= 2, got {p}"));
    }
    if !(eta > T::zero() && eta < T::one()) {
        return invalid(format!("flower amplitude must lie in (0, 1), got {eta}"));
    }
    Ok(())
}

fn flower_profile<T: Real>(p: usize, eta: T, xi: T) -> (T, T, T) {
    let pf = T::from_count(p);
    let (s, c) = ((pf * xi).sin(), (pf * xi).cos());
    (T::one() + eta * c, -eta * pf * s, -eta * pf * pf * c)
}

/// Flower `x(ξ)(1 + η cos pξ)`.
pub fn make_flower<T: Real>(p: usize, eta: T, n: usize) -> Result<Boundary<T>> {
    check_petals(p, eta)?;
    if n < 16 * p {
        return invalid(format!("flower with {p} petals needs n >= {}, got {n}", 16 * p));
    }
    radial_curve(n, |xi| flower_profile(p, eta, xi))
}

/// Radial profile of a flower whose petal at `ξ = 0` is damaged.
///
/// On `|ξ| < π/p` the radius is the degree-6 polynomial matching value, slope
/// and second derivative of `1 + η cos pξ` at both troughs `ξ = ±π/p`, with
/// the peak lowered to `f(0) = 1 + (1−t)η`. Elsewhere it is the plain flower.
#[derive(Debug, Clone)]
pub struct DamagedFlowerProfile {
    p: usize,
    eta: f64,
    coeffs: [f64; 7],
}

impl DamagedFlowerProfile {
    pub fn new(p: usize, eta: f64, t: f64) -> Result<Self> {
        check_petals(p, eta)?;
        if !(t > 0.0 && t < 1.0) {
            return invalid(format!("damage fraction must lie in (0, 1), got {t}"));
        }
        let h = std::f64::consts::PI / p as f64;
        let pf = p as f64;
        // Both junction conditions are symmetric in ξ, so the degree-6
        // solution is even: f = c0 + c2 ξ² + c4 ξ⁴ + c6 ξ⁶. Rows: f(h), f'(h),
        // f''(h), f(0).
        let even = [0usize, 2, 4, 6];
        let mut m = Matrix4::<f64>::zeros();
        for (col, &k) in even.iter().enumerate() {
            let kf = k as f64;
            m[(0, col)] = h.powi(k as i32);
            m[(1, col)] = if k >= 1 { kf * h.powi(k as i32 - 1) } else { 0.0 };
            m[(2, col)] = if k >= 2 { kf * (kf - 1.0) * h.powi(k as i32 - 2) } else { 0.0 };
            m[(3, col)] = if k == 0 { 1.0 } else { 0.0 };
        }
        let rhs = Vector4::new(1.0 - eta, 0.0, eta * pf * pf, 1.0 + (1.0 - t) * eta);
        let sol =
            m.lu().solve(&rhs).ok_or_else(|| Error::Numerical("damaged-flower Hermite system is singular".into()))?;
        let mut coeffs = [0.0; 7];
        for (col, &k) in even.iter().enumerate() {
            coeffs[k] = sol[col];
        }
        Ok(Self { p, eta, coeffs })
    }

    pub fn half_width(&self) -> f64 {
        std::f64::consts::PI / self.p as f64
    }

    /// `(r, r', r'')` at `ξ`.
    pub fn eval(&self, xi: f64) -> (f64, f64, f64) {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut u = xi.rem_euclid(two_pi);
        if u > std::f64::consts::PI {
            u -= two_pi;
        }
        if u.abs() < self.half_width() {
            let c = &self.coeffs;
            let (mut f, mut df, mut ddf) = (0.0, 0.0, 0.0);
            for k in (0..7).rev() {
                f = f * u + c[k];
            }
            for k in (1..7).rev() {
                df = df * u + k as f64 * c[k];
            }
            for k in (2..7).rev() {
                ddf = ddf * u + (k * (k - 1)) as f64 * c[k];
            }
            (f, df, ddf)
        } else {
            flower_profile(self.p, self.eta, xi)
        }
    }
}

/// Flower with one damaged petal; see [`DamagedFlowerProfile`].
pub fn make_damaged_flower<T: Real>(p: usize, eta: T, t: T, n: usize) -> Result<Boundary<T>> {
    if n < 16 * p {
        return invalid(format!("flower with {p} petals needs n >= {}, got {n}", 16 * p));
    }
    let profile = DamagedFlowerProfile::new(p, eta.as_f64(), t.as_f64())?;
    radial_curve(n, |xi: T| {
        let (r, dr, ddr) = profile.eval(xi.as_f64());
        (T::lit(r), T::lit(dr), T::lit(ddr))
    })
}

/// Textual shape description used by the CLI and by file provenance, e.g.
/// `ellipse:1,0.5`, `flower:5,0.3`, `dflower:7,0.3,0.5`, `letter:P`.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Ellipse {
        a: f64,
        b: f64,
    },
    Flower {
        p: usize,
        eta: f64,
    },
    DamagedFlower {
        p: usize,
        eta: f64,
        t: f64,
    },
    Letter(char),
    /// Letter perturbed by [`super::perturb_letter`] with the given magnitude
    /// and seed (smoothing radius at its default).
    PerturbedLetter {
        glyph: char,
        magnitude: f64,
        seed: u64,
    },
}

impl ShapeSpec {
    /// Default quadrature size: `2^9` for analytic curves, `2^11` for letters.
    pub fn default_nodes(&self) -> usize {
        match self {
            ShapeSpec::Letter(_) | ShapeSpec::PerturbedLetter { .. } => 2048,
            _ => 512,
        }
    }

    /// Rotational symmetry order (1 when there is none).
    pub fn symmetry_order(&self) -> usize {
        match self {
            ShapeSpec::Flower { p, .. } => *p,
            _ => 1,
        }
    }

    /// Short name used for dictionary entries.
    pub fn name(&self) -> String {
        match self {
            ShapeSpec::Letter(c) => c.to_string(),
            ShapeSpec::PerturbedLetter { glyph, .. } => glyph.to_string(),
            ShapeSpec::Flower { p, .. } => format!("flower{p}"),
            ShapeSpec::DamagedFlower { p, .. } => format!("dflower{p}"),
            ShapeSpec::Ellipse { .. } => "ellipse".to_string(),
        }
    }

    pub fn build<T: Real>(&self, n: usize) -> Result<Boundary<T>> {
        match *self {
            ShapeSpec::Ellipse { a, b } => make_ellipse(T::lit(a), T::lit(b), n),
            ShapeSpec::Flower { p, eta } => make_flower(p, T::lit(eta), n),
            ShapeSpec::DamagedFlower { p, eta, t } => make_damaged_flower(p, T::lit(eta), T::lit(t), n),
            ShapeSpec::Letter(c) => letters::make_letter(c, n),
            ShapeSpec::PerturbedLetter { glyph, magnitude, seed } => {
                let base = letters::make_letter::<f64>(glyph, n)?;
                let radius = letters::DEFAULT_SMOOTHING;
                Ok(letters::perturb_letter(&base, magnitude, radius, seed)?.cast())
            }
        }
    }
}

impl fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeSpec::Ellipse { a, b } => write!(f, "ellipse:{a},{b}"),
            ShapeSpec::Flower { p, eta } => write!(f, "flower:{p},{eta}"),
            ShapeSpec::DamagedFlower { p, eta, t } => write!(f, "dflower:{p},{eta},{t}"),
            ShapeSpec::Letter(c) => write!(f, "letter:{c}"),
            ShapeSpec::PerturbedLetter { glyph, magnitude, seed } => {
                write!(f, "pletter:{glyph},{magnitude},{seed}")
            }
        }
    }
}

impl FromStr for ShapeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) =
            s.split_once(':').ok_or_else(|| Error::Parse(format!("shape spec `{s}` lacks `kind:` prefix")))?;
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Parse(format!("shape spec `{s}`: missing argument {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("shape spec `{s}`: {e}")))
        };
        let int = |i: usize| -> Result<usize> {
            parts
                .get(i)
                .ok_or_else(|| Error::Parse(format!("shape spec `{s}`: missing argument {i}")))?
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("shape spec `{s}`: {e}")))
        };
        let glyph = || -> Result<char> {
            let g = parts.first().copied().unwrap_or("");
            let mut chars = g.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(Error::Parse(format!("shape spec `{s}`: expected a single glyph"))),
            }
        };
        let expect = |k: usize| -> Result<()> {
            if parts.len() != k {
                return Err(Error::Parse(format!("shape spec `{s}`: expected {k} arguments")));
            }
            Ok(())
        };
        match kind.trim() {
            "ellipse" => {
                expect(2)?;
                Ok(ShapeSpec::Ellipse { a: num(0)?, b: num(1)? })
            }
            "flower" => {
                expect(2)?;
                Ok(ShapeSpec::Flower { p: int(0)?, eta: num(1)? })
            }
            "dflower" => {
                expect(3)?;
                Ok(ShapeSpec::DamagedFlower { p: int(0)?, eta: num(1)?, t: num(2)? })
            }
            "letter" => {
                expect(1)?;
                Ok(ShapeSpec::Letter(glyph()?))
            }
            "pletter" => {
                expect(3)?;
                Ok(ShapeSpec::PerturbedLetter { glyph: glyph()?, magnitude: num(1)?, seed: int(2)? as u64 })
            }
            other => Err(Error::Parse(format!("unknown shape kind `{other}`"))),
        }
    }
}
