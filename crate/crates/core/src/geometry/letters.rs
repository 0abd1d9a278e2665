//! Capital-letter inclusions built from the shipped polygon dataset.
//!
//! Each glyph is a hole-free polygon (holes are filled in the data). Corners
//! are rounded with circular fillets of radius 2% of the glyph height, the
//! resulting curve is sampled uniformly in arclength, and the shape is
//! normalized to centroid 0 and characteristic size 1.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spectral::gaussian_lowpass;
use super::{characteristic_size, normalize, Boundary};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// The embedded glyph files (format `glyph <char> n <count>` then `x y` rows,
/// counter-clockwise, closed implicitly).
pub const GLYPHS: &[(char, &str)] = &[
    ('A', include_str!("../../data/glyphs/A.txt")),
    ('B', include_str!("../../data/glyphs/B.txt")),
    ('C', include_str!("../../data/glyphs/C.txt")),
    ('D', include_str!("../../data/glyphs/D.txt")),
    ('E', include_str!("../../data/glyphs/E.txt")),
    ('F', include_str!("../../data/glyphs/F.txt")),
    ('G', include_str!("../../data/glyphs/G.txt")),
    ('H', include_str!("../../data/glyphs/H.txt")),
    ('I', include_str!("../../data/glyphs/I.txt")),
    ('J', include_str!("../../data/glyphs/J.txt")),
    ('K', include_str!("../../data/glyphs/K.txt")),
    ('L', include_str!("../../data/glyphs/L.txt")),
    ('M', include_str!("../../data/glyphs/M.txt")),
    ('N', include_str!("../../data/glyphs/N.txt")),
    ('O', include_str!("../../data/glyphs/O.txt")),
    ('P', include_str!("../../data/glyphs/P.txt")),
    ('Q', include_str!("../../data/glyphs/Q.txt")),
    ('R', include_str!("../../data/glyphs/R.txt")),
    ('S', include_str!("../../data/glyphs/S.txt")),
    ('T', include_str!("../../data/glyphs/T.txt")),
    ('U', include_str!("../../data/glyphs/U.txt")),
    ('V', include_str!("../../data/glyphs/V.txt")),
    ('W', include_str!("../../data/glyphs/W.txt")),
    ('X', include_str!("../../data/glyphs/X.txt")),
    ('Y', include_str!("../../data/glyphs/Y.txt")),
    ('Z', include_str!("../../data/glyphs/Z.txt")),
];

/// Fillet radius as a fraction of glyph height.
const FILLET_FRACTION: f64 = 0.02;

/// Gaussian smoothing width of the filleted outline, as a fraction of glyph
/// height.
const LETTER_SMOOTHING: f64 = 0.015;

/// Minimum number of fine samples taken along the outline before smoothing.
const FINE_SAMPLES: usize = 1 << 14;

/// Default low-pass radius used when a perturbed letter is built from a
/// `ShapeSpec`.
pub(crate) const DEFAULT_SMOOTHING: f64 = 0.03;

/// Parses one glyph file.
pub fn parse_glyph_file(text: &str) -> Result<(char, Vec<[f64; 2]>)> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty glyph file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (glyph, count) = match fields.as_slice() {
        ["glyph", g, "n", count] if g.chars().count() == 1 => {
            let count = count.parse::<usize>().map_err(|e| Error::Parse(format!("glyph header count: {e}")))?;
            (g.chars().next().unwrap_or('?'), count)
        }
        _ => return Err(Error::Parse(format!("bad glyph header `{header}`"))),
    };
    let mut pts = Vec::with_capacity(count);
    for line in lines {
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) => pts.push([x, y]),
            _ => return Err(Error::Parse(format!("bad glyph vertex `{line}`"))),
        }
    }
    if pts.len() != count {
        return Err(Error::Parse(format!("glyph {glyph}: header says {count} vertices, found {}", pts.len())));
    }
    if pts.len() < 3 {
        return Err(Error::Parse(format!("glyph {glyph}: fewer than 3 vertices")));
    }
    Ok((glyph, pts))
}

/// Raw polygon of a shipped glyph.
pub fn glyph_polygon(glyph: char) -> Result<Vec<[f64; 2]>> {
    let text = GLYPHS
        .iter()
        .find(|(c, _)| *c == glyph)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::InvalidArgument(format!("unsupported glyph `{glyph}`")))?;
    let (c, pts) = parse_glyph_file(text)?;
    debug_assert_eq!(c, glyph);
    Ok(pts)
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Line {
        start: Vector2<f64>,
        dir: Vector2<f64>,
        len: f64,
    },
    /// Circular arc; `sweep` is signed (positive = counter-clockwise turn).
    Arc {
        center: Vector2<f64>,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl Piece {
    fn length(&self) -> f64 {
        match *self {
            Piece::Line { len, .. } => len,
            Piece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Position at arclength `s` into the piece.
    fn eval(&self, s: f64) -> Vector2<f64> {
        match *self {
            Piece::Line { start, dir, .. } => start + dir * s,
            Piece::Arc { center, radius, start_angle, sweep } => {
                let ang = start_angle + sweep.signum() * s / radius;
                center + Vector2::new(ang.cos(), ang.sin()) * radius
            }
        }
    }
}

fn left_normal(d: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-d.y, d.x)
}

/// Replaces every polygon corner by a tangent circular arc.
fn fillet_polygon(poly: &[Vector2<f64>], radius: f64) -> Result<Vec<Piece>> {
    let n = poly.len();
    let mut arcs = Vec::with_capacity(n);
    for i in 0..n {
        let prev = poly[(i + n - 1) % n];
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let (lin, lout) = ((cur - prev).norm(), (next - cur).norm());
        if lin == 0.0 || lout == 0.0 {
            return Err(Error::DegenerateGeometry(format!("repeated vertex {i}")));
        }
        let din = (cur - prev) / lin;
        let dout = (next - cur) / lout;
        let cross = din.x * dout.y - din.y * dout.x;
        let turn = cross.atan2(din.dot(&dout));
        if turn.abs() < 1e-12 {
            arcs.push(None);
            continue;
        }
        let half = (turn.abs() / 2.0).tan();
        let tlen = (radius * half).min(0.45 * lin.min(lout));
        let r = tlen / half;
        let a = cur - din * tlen;
        let center = a + left_normal(&din) * (r * turn.signum());
        let start = a - center;
        arcs.push(Some((
            a,
            cur + dout * tlen,
            Piece::Arc { center, radius: r, start_angle: start.y.atan2(start.x), sweep: turn },
        )));
    }
    let mut pieces = Vec::with_capacity(2 * n);
    for i in 0..n {
        let arc_end = match arcs[i] {
            Some((_, end, arc)) => {
                pieces.push(arc);
                end
            }
            None => poly[i],
        };
        let next_start = match arcs[(i + 1) % n] {
            Some((start, _, _)) => start,
            None => poly[(i + 1) % n],
        };
        let seg = next_start - arc_end;
        let len = seg.norm();
        if len > 1e-14 {
            pieces.push(Piece::Line { start: arc_end, dir: seg / len, len });
        }
    }
    Ok(pieces)
}

/// Positions at `m` points spaced uniformly in arclength.
fn sample_pieces(pieces: &[Piece], m: usize) -> Vec<Vector2<f64>> {
    let total: f64 = pieces.iter().map(Piece::length).sum();
    let h = total / m as f64;
    let mut out = Vec::with_capacity(m);
    let mut piece = 0;
    let mut offset = 0.0;
    for j in 0..m {
        let s = j as f64 * h;
        while piece + 1 < pieces.len() && s >= offset + pieces[piece].length() {
            offset += pieces[piece].length();
            piece += 1;
        }
        out.push(pieces[piece].eval(s - offset));
    }
    out
}

/// Letter boundary with filled holes and filleted corners, normalized to
/// centroid 0 and characteristic size 1.
///
/// The filleted outline is only `C¹` (curvature jumps where arcs meet
/// edges), which would cap the trapezoidal rule at second order. It is
/// therefore sampled finely, smoothed by a Gaussian of width
/// `LETTER_SMOOTHING × height` in arclength, and decimated to `n` nodes, with
/// tangents and curvature obtained spectrally. At `n ≥ 1024` the discarded
/// Fourier tail is far below double-precision roundoff for every glyph.
pub fn make_letter<T: Real>(glyph: char, n: usize) -> Result<Boundary<T>> {
    if n < 64 {
        return invalid(format!("letters need at least 64 nodes, got {n}"));
    }
    let raw = glyph_polygon(glyph)?;
    let poly: Vec<Vector2<f64>> = raw.iter().map(|p| Vector2::new(p[0], p[1])).collect();
    let (ymin, ymax) = poly.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    let height = ymax - ymin;
    let pieces = fillet_polygon(&poly, FILLET_FRACTION * height)?;
    let total: f64 = pieces.iter().map(Piece::length).sum();
    let stride = FINE_SAMPLES.div_ceil(n);
    let fine = sample_pieces(&pieces, n * stride);
    let sigma = 2.0 * std::f64::consts::PI * LETTER_SMOOTHING * height / total;
    let xs = gaussian_lowpass(&fine.iter().map(|p| p.x).collect::<Vec<_>>(), sigma);
    let ys = gaussian_lowpass(&fine.iter().map(|p| p.y).collect::<Vec<_>>(), sigma);
    let nodes: Vec<Vector2<f64>> = (0..n).map(|j| Vector2::new(xs[j * stride], ys[j * stride])).collect();
    let b = Boundary::from_periodic_samples(&nodes)?;
    let (unit, _) = normalize(&b);
    Ok(unit.cast())
}

/// Seeded smooth radial perturbation followed by Gaussian low-pass smoothing
/// of the node coordinates.
///
/// The radial displacement has modes 2..=8 and peak size
/// `magnitude × characteristic_size`; `smoothing` is the Gaussian radius in
/// length units. A zero magnitude returns the input unchanged.
pub fn perturb_letter<T: Real>(boundary: &Boundary<T>, magnitude: T, smoothing: T, seed: u64) -> Result<Boundary<T>> {
    let magnitude = magnitude.as_f64();
    if !(0.0..0.2).contains(&magnitude) {
        return invalid(format!("perturbation magnitude must lie in [0, 0.2), got {magnitude}"));
    }
    if magnitude == 0.0 {
        return Ok(boundary.clone());
    }
    let b: Boundary<f64> = boundary.cast();
    let n = b.n_nodes();
    let center = b.centroid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64)> =
        (2..=8).map(|k| (k as f64, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let raw: Vec<f64> = (0..n)
        .map(|j| {
            let xi = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            modes.iter().map(|(k, a, c)| (a * (k * xi).cos() + c * (k * xi).sin()) / k).sum()
        })
        .collect();
    let peak = raw.iter().zip(b.points()).map(|(d, x)| (d * (x - center).norm()).abs()).fold(0.0, f64::max);
    let scale = magnitude * characteristic_size(&b) / peak;
    let moved: Vec<Vector2<f64>> =
        b.points().iter().zip(&raw).map(|(x, d)| center + (x - center) * (1.0 + scale * d)).collect();
    let sigma = 2.0 * std::f64::consts::PI * smoothing.as_f64() / b.perimeter();
    let xs = gaussian_lowpass(&moved.iter().map(|p| p.x).collect::<Vec<_>>(), sigma);
    let ys = gaussian_lowpass(&moved.iter().map(|p| p.y).collect::<Vec<_>>(), sigma);
    let smoothed: Vec<Vector2<f64>> = xs.into_iter().zip(ys).map(|(x, y)| Vector2::new(x, y)).collect();
    let out = Boundary::from_periodic_samples(&smoothed)?;
    if out.self_intersects() {
        return Err(Error::DegenerateGeometry("perturbed letter self-intersects".into()));
    }
    Ok(out.cast())
}
