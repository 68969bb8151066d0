//! Embeddings of the three spaces, ground-truth loops and point-cloud utilities.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::hit_spec::{GroupClass, HitSpec, Letter, Word};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub enum GeometryError {
    UnknownEmbedding(String),
    BadParam(String),
    Incompatible(&'static str),
    Indivisible { points: usize, segments: usize },
    TooFewPoints,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::UnknownEmbedding(e) => write!(f, "unknown embedding `{e}`"),
            GeometryError::BadParam(p) => write!(f, "bad embedding parameter `{p}`"),
            GeometryError::Incompatible(m) => write!(f, "embedding incompatible with spec: {m}"),
            GeometryError::Indivisible { points, segments } => {
                write!(f, "{points} points cannot be split into {segments} segments")
            }
            GeometryError::TooFewPoints => write!(f, "need at least 2 points"),
        }
    }
}

impl core::error::Error for GeometryError {}

/// Ordered points in R^dim, stored row-major. `bounds`, when present, holds
/// segment offsets `0 = b0 < b1 < ... < bL = len`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub data: Vec<f64>,
    pub bounds: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len() % dim, 0);
        PointCloud { dim, data, bounds: None }
    }

    pub fn with_bounds(mut self, bounds: Vec<usize>) -> Self {
        debug_assert_eq!(*bounds.last().unwrap(), self.len());
        self.bounds = Some(bounds);
        self
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn segment_count(&self) -> Option<usize> {
        self.bounds.as_ref().map(|b| b.len() - 1)
    }

    /// List append with segment metadata; the monoidal product of clouds.
    pub fn concat(parts: &[PointCloud]) -> PointCloud {
        let dim = parts.first().map_or(3, |p| p.dim);
        let mut data = Vec::new();
        let mut bounds = vec![0];
        for p in parts {
            assert_eq!(p.dim, dim);
            let base = data.len() / dim;
            data.extend_from_slice(&p.data);
            match &p.bounds {
                Some(b) => bounds.extend(b[1..].iter().map(|x| x + base)),
                None => bounds.push(base + p.len()),
            }
        }
        PointCloud { dim, data, bounds: Some(bounds) }
    }

    pub fn reversed(&self) -> PointCloud {
        let data = self.data.chunks_exact(self.dim).rev().flatten().copied().collect();
        let bounds = self.bounds.as_ref().map(|b| {
            let n = self.len();
            b.iter().rev().map(|x| n - x).collect()
        });
        PointCloud { dim: self.dim, data, bounds }
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for p in self.points() {
            for (a, b) in c.iter_mut().zip(p) {
                *a += b;
            }
        }
        let n = self.len().max(1) as f64;
        c.iter_mut().for_each(|a| *a /= n);
        c
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpaceEmbedding {
    Torus { major: f64, minor: f64 },
    /// Two circles of the given radius through the origin, centered at
    /// (-radius, 0, 0) and (0, 0, -radius).
    Wedge { radius: f64 },
    Klein4D { scale: f64 },
}

/// An embedding together with the generator -> chart-channel assignment.
/// Every chart takes two angles.
#[derive(Clone, Debug, PartialEq)]
pub struct Space {
    pub embedding: SpaceEmbedding,
    pub channel_of: Vec<usize>,
}

pub const TORUS_R: f64 = 2.0;
pub const TORUS_LITTLE_R: f64 = 0.8;

pub fn torus_point(u: f64, v: f64) -> [f64; 3] {
    torus_point_with(TORUS_R, TORUS_LITTLE_R, u, v)
}

pub fn torus_point_with(major: f64, minor: f64, u: f64, v: f64) -> [f64; 3] {
    let rho = major + minor * libm::cos(v);
    [rho * libm::cos(u), rho * libm::sin(u), minor * libm::sin(v)]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Circle {
    A,
    B,
}

pub fn wedge_point(circle: Circle, phi: f64) -> [f64; 3] {
    let (c, s) = (libm::cos(phi), libm::sin(phi));
    match circle {
        Circle::A => [-1.0 + c, s, 0.0],
        Circle::B => [0.0, s, -1.0 + c],
    }
}

pub fn klein_point(u: f64, v: f64) -> [f64; 4] {
    klein_point_with(2.0, u, v)
}

pub fn klein_point_with(scale: f64, u: f64, v: f64) -> [f64; 4] {
    let rho = scale + libm::cos(v);
    let sv = libm::sin(v);
    [rho * libm::cos(u), rho * libm::sin(u), sv * libm::cos(u / 2.0), sv * libm::sin(u / 2.0)]
}

fn parse_f64(spec: &HitSpec, key: &str, default: f64) -> Result<f64, GeometryError> {
    match spec.embedding_param(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| GeometryError::BadParam(key.into())),
    }
}

fn parse_gen(spec: &HitSpec, key: &str, default: usize) -> Result<usize, GeometryError> {
    match spec.embedding_param(key) {
        None => Ok(default),
        Some(v) => spec.generator_index(v).ok_or_else(|| GeometryError::BadParam(key.into())),
    }
}

impl Space {
    pub fn from_spec(spec: &HitSpec) -> Result<Space, GeometryError> {
        if spec.rank() != 2 {
            return Err(GeometryError::Incompatible("all shipped embeddings have two generators"));
        }
        let (embedding, keys, defaults) = match spec.embedding.as_str() {
            "torus" => {
                if spec.dimension != 3 {
                    return Err(GeometryError::Incompatible("torus lives in R^3"));
                }
                let major = parse_f64(spec, "R", TORUS_R)?;
                let minor = parse_f64(spec, "r", TORUS_LITTLE_R)?;
                if !(major > minor && minor > 0.0) {
                    return Err(GeometryError::BadParam("R > r > 0".into()));
                }
                (SpaceEmbedding::Torus { major, minor }, ["u", "v"], [0, 1])
            }
            "wedge" => {
                if spec.dimension != 3 {
                    return Err(GeometryError::Incompatible("wedge lives in R^3"));
                }
                let radius = parse_f64(spec, "radius", 1.0)?;
                if radius <= 0.0 {
                    return Err(GeometryError::BadParam("radius".into()));
                }
                (SpaceEmbedding::Wedge { radius }, ["A", "B"], [0, 1])
            }
            "klein" => {
                if spec.dimension != 4 {
                    return Err(GeometryError::Incompatible("Klein bottle lives in R^4"));
                }
                let scale = parse_f64(spec, "scale", 2.0)?;
                if scale <= 1.0 {
                    return Err(GeometryError::BadParam("scale must exceed 1".into()));
                }
                let d = match spec.group_class {
                    GroupClass::KleinSemidirect { flipped, flipper } => [flipper, flipped],
                    _ => [0, 1],
                };
                (SpaceEmbedding::Klein4D { scale }, ["u", "v"], d)
            }
            other => return Err(GeometryError::UnknownEmbedding(other.into())),
        };
        // keys[c] names the generator driving channel c.
        let mut channel_of = vec![usize::MAX; 2];
        for c in 0..2 {
            let g = parse_gen(spec, keys[c], defaults[c])?;
            if channel_of[g] != usize::MAX {
                return Err(GeometryError::BadParam("two channels share a generator".into()));
            }
            channel_of[g] = c;
        }
        Ok(Space { embedding, channel_of })
    }

    pub fn dim(&self) -> usize {
        match self.embedding {
            SpaceEmbedding::Klein4D { .. } => 4,
            _ => 3,
        }
    }

    /// Map chart angles (one per channel) to a point.
    pub fn chart(&self, th: [f64; 2], out: &mut [f64]) {
        match self.embedding {
            SpaceEmbedding::Torus { major, minor } => out.copy_from_slice(&torus_point_with(major, minor, th[0], th[1])),
            SpaceEmbedding::Wedge { radius } => {
                let a = wedge_point(Circle::A, th[0]);
                let b = wedge_point(Circle::B, th[1]);
                for i in 0..3 {
                    out[i] = radius * (a[i] + b[i]);
                }
            }
            SpaceEmbedding::Klein4D { scale } => out.copy_from_slice(&klein_point_with(scale, th[0], th[1])),
        }
    }

    pub fn basepoint(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.chart([0.0, 0.0], &mut p);
        p
    }

    /// Generator loop for `letter` sampled at parameters `ts` (fractions of a
    /// full turn), with a start-angle shift. Inverse letters are the exact
    /// row reversal of the positive traversal.
    pub fn letter_segment(&self, letter: Letter, ts: &[f64], phase: f64) -> PointCloud {
        let d = self.dim();
        let ch = self.channel_of[letter.gen];
        let mut data = vec![0.0; ts.len() * d];
        for (k, &t) in ts.iter().enumerate() {
            let mut th = [0.0; 2];
            th[ch] = phase + 2.0 * PI * t;
            self.chart(th, &mut data[k * d..(k + 1) * d]);
        }
        let seg = PointCloud::new(d, data);
        if letter.inv {
            seg.reversed()
        } else {
            seg
        }
    }

    /// Center of the circle traced by generator `gen` (wedge only).
    pub fn circle_center(&self, gen: usize) -> Option<[f64; 3]> {
        match self.embedding {
            SpaceEmbedding::Wedge { radius } => Some(match self.channel_of[gen] {
                0 => [-radius, 0.0, 0.0],
                _ => [0.0, 0.0, -radius],
            }),
            _ => None,
        }
    }
}

/// `t_k = k / (n - 1)`: both endpoints, so each segment closes on itself.
pub fn inclusive_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

/// `t_k = k / n`: half-open, uniformly spaced around the circle.
pub fn exclusive_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / n as f64).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopSample {
    pub word: Word,
    pub cloud: PointCloud,
    pub phase: f64,
    pub noise_sigma: f64,
}

/// Concatenated generator traversals for `word`, one shared phase, i.i.d.
/// Gaussian noise per coordinate. The empty word gives the basepoint alone.
pub fn ground_truth_loop(
    space: &Space,
    word: &Word,
    pts_per_seg: usize,
    phase: f64,
    noise_sigma: f64,
    rng: &mut Rng,
) -> LoopSample {
    assert!(pts_per_seg >= 2, "pts_per_seg must be at least 2");
    let mut cloud = if word.is_empty() {
        PointCloud::new(space.dim(), space.basepoint())
    } else {
        let ts = inclusive_grid(pts_per_seg);
        let segs: Vec<PointCloud> = word.letters.iter().map(|&l| space.letter_segment(l, &ts, phase)).collect();
        PointCloud::concat(&segs)
    };
    if noise_sigma > 0.0 {
        for x in cloud.data.iter_mut() {
            *x += noise_sigma * rng.normal();
        }
    }
    LoopSample { word: word.clone(), cloud, phase, noise_sigma }
}

/// For each of `n` arc-length-uniform targets, the polyline segment index
/// `k` and blend `alpha` such that the target is `(1-alpha) p_k + alpha p_{k+1}`.
/// A cloud of zero total length maps every target to `(0, 0.0)`.
pub fn arc_length_plan(data: &[f64], dim: usize, n: usize) -> (Vec<(usize, f64)>, Vec<f64>) {
    let m = data.len() / dim;
    assert!(m >= 2 && n >= 2);
    let mut lens = Vec::with_capacity(m - 1);
    for k in 0..m - 1 {
        let mut s = 0.0;
        for c in 0..dim {
            let d = data[(k + 1) * dim + c] - data[k * dim + c];
            s += d * d;
        }
        lens.push(libm::sqrt(s));
    }
    let total: f64 = lens.iter().sum();
    if total == 0.0 {
        return (vec![(0, 0.0); n], lens);
    }
    let mut plan = Vec::with_capacity(n);
    let (mut k, mut s_k) = (0usize, 0.0);
    for j in 0..n {
        let tau = total * j as f64 / (n - 1) as f64;
        while k < m - 2 && (s_k + lens[k] < tau || lens[k] == 0.0) {
            s_k += lens[k];
            k += 1;
        }
        while lens[k] == 0.0 && k > 0 {
            k -= 1;
            s_k -= lens[k];
        }
        let alpha = if j == n - 1 {
            1.0
        } else if j == 0 {
            0.0
        } else {
            ((tau - s_k) / lens[k]).clamp(0.0, 1.0)
        };
        plan.push((k, alpha));
    }
    (plan, lens)
}

pub fn apply_plan(data: &[f64], dim: usize, plan: &[(usize, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(plan.len() * dim);
    for &(k, a) in plan {
        for c in 0..dim {
            out.push((1.0 - a) * data[k * dim + c] + a * data[(k + 1) * dim + c]);
        }
    }
    out
}

/// Arc-length-uniform piecewise-linear resampling; endpoints are kept.
/// Segment metadata is dropped.
pub fn resample(cloud: &PointCloud, n: usize) -> Result<PointCloud, GeometryError> {
    if cloud.len() < 2 || n < 2 {
        return Err(GeometryError::TooFewPoints);
    }
    let (plan, _) = arc_length_plan(&cloud.data, cloud.dim, n);
    Ok(PointCloud::new(cloud.dim, apply_plan(&cloud.data, cloud.dim, &plan)))
}

/// Contiguous blocks, from metadata when it has `l` segments, otherwise by
/// equal index count.
pub fn split_segments(cloud: &PointCloud, l: usize) -> Result<Vec<PointCloud>, GeometryError> {
    let bounds: Vec<usize> = match &cloud.bounds {
        Some(b) if b.len() == l + 1 => b.clone(),
        _ => {
            if l == 0 || cloud.len() % l != 0 {
                return Err(GeometryError::Indivisible { points: cloud.len(), segments: l });
            }
            let s = cloud.len() / l;
            (0..=l).map(|i| i * s).collect()
        }
    };
    Ok(bounds
        .windows(2)
        .map(|w| PointCloud::new(cloud.dim, cloud.data[w[0] * cloud.dim..w[1] * cloud.dim].to_vec()))
        .collect())
}

/// Near-equal contiguous blocks: `round(i * n / l)`.
pub fn even_bounds(n: usize, l: usize) -> Vec<usize> {
    (0..=l).map(|i| (i * n + l / 2) / l).collect()
}
