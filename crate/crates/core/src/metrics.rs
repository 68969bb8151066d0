//! Evaluation quantities over point clouds and decoders.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::autograd::{chamfer_match, Mat};
use crate::decoders::{Decoder, DecoderError};
use crate::geometry::{
    apply_plan, arc_length_plan, exclusive_grid, resample, split_segments, GeometryError, PointCloud, Space, SpaceEmbedding,
};
use crate::hit_spec::{enumerate_words, words_equal, GroupClass, HitSpec, Letter, Word};
use crate::rng::Rng;

/// Points per segment for the per-segment metric.
pub const SEG_PTS: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub enum MetricError {
    DimMismatch { left: usize, right: usize },
    Empty,
    Segmentation(GeometryError),
    NotWedge,
    NotTorus,
    Decoder(DecoderError),
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::DimMismatch { left, right } => write!(f, "point dimension mismatch: {left} vs {right}"),
            MetricError::Empty => write!(f, "empty point cloud"),
            MetricError::Segmentation(e) => write!(f, "segmentation failed: {e}"),
            MetricError::NotWedge => write!(f, "circle accuracy is defined on the wedge of circles only"),
            MetricError::NotTorus => write!(f, "the coherence battery is defined on the torus only"),
            MetricError::Decoder(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for MetricError {}

impl From<GeometryError> for MetricError {
    fn from(e: GeometryError) -> Self {
        MetricError::Segmentation(e)
    }
}

impl From<DecoderError> for MetricError {
    fn from(e: DecoderError) -> Self {
        MetricError::Decoder(e)
    }
}

/// One evaluated number, keyed the way the report CSV is.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub space: String,
    pub arch: String,
    pub type_tag: String,
    pub seed: u64,
    pub word: String,
    pub len: usize,
    pub metric: String,
    pub value: f64,
}

fn as_mat(c: &PointCloud) -> Mat {
    Mat::from_vec(c.len(), c.dim, c.data.clone())
}

/// `(1/2N) sum_i min_j |p_i - q_j|^2 + (1/2M) sum_j min_i |p_i - q_j|^2`.
pub fn chamfer(p: &PointCloud, q: &PointCloud) -> Result<f64, MetricError> {
    if p.dim != q.dim {
        return Err(MetricError::DimMismatch { left: p.dim, right: q.dim });
    }
    if p.is_empty() || q.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(chamfer_match(&as_mat(p), &as_mat(q)).0)
}

fn at_seg_pts(c: &PointCloud) -> Result<PointCloud, MetricError> {
    match c.len() {
        0 => Err(MetricError::Empty),
        SEG_PTS => Ok(c.clone()),
        1 => Ok(PointCloud::new(c.dim, c.data.repeat(SEG_PTS))),
        _ => Ok(resample(c, SEG_PTS)?),
    }
}

/// Mean chamfer over the `l` aligned segments, each at 32 points. Segments
/// that already have 32 points are compared as is.
pub fn per_segment_chamfer(gen: &PointCloud, gt: &PointCloud, l: usize) -> Result<f64, MetricError> {
    if gen.dim != gt.dim {
        return Err(MetricError::DimMismatch { left: gen.dim, right: gt.dim });
    }
    let a = split_segments(gen, l)?;
    let b = split_segments(gt, l)?;
    let mut total = 0.0;
    for (x, y) in a.iter().zip(&b) {
        total += chamfer(&at_seg_pts(x)?, &at_seg_pts(y)?)?;
    }
    Ok(total / l as f64)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Fraction of segments whose centroid is strictly closer to the center of
/// the correct circle than to the other circle's center.
pub fn circle_accuracy(gen: &PointCloud, space: &Space, word: &Word) -> Result<f64, MetricError> {
    if !matches!(space.embedding, SpaceEmbedding::Wedge { .. }) {
        return Err(MetricError::NotWedge);
    }
    let l = word.len();
    if l == 0 {
        return Err(MetricError::Empty);
    }
    let segs = split_segments(gen, l)?;
    let centers = [space.circle_center(0).unwrap(), space.circle_center(1).unwrap()];
    let mut hits = 0;
    for (seg, letter) in segs.iter().zip(&word.letters) {
        if seg.is_empty() {
            continue;
        }
        let c = seg.centroid();
        let own = dist(&c, &centers[letter.gen]);
        let other = dist(&c, &centers[1 - letter.gen]);
        if own < other {
            hits += 1;
        }
    }
    Ok(hits as f64 / l as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherenceReport {
    pub composition_gap: f64,
    pub commutativity_gap: f64,
    pub reorder_gap: f64,
    pub noncanonical_gap: f64,
}

fn is_torus(spec: &HitSpec) -> bool {
    matches!(spec.group_class, GroupClass::FreeAbelian(2))
}

/// Torus battery on pre-resampling clouds, with chamfer as the cloud distance.
/// Composition averages the canonical pairs (a, b), (aa, b), (a, bb), (aa, bb).
pub fn coherence_battery(dec: &Decoder) -> Result<CoherenceReport, MetricError> {
    if !is_torus(&dec.spec) {
        return Err(MetricError::NotTorus);
    }
    let s = &dec.spec;
    let raw = |t: &str| dec.decode_raw(&s.parse_word(t).expect("generator names"));
    let (a, b) = (&s.generators[0], &s.generators[1]);
    let w = |parts: &[&String]| {
        let v: Vec<&str> = parts.iter().map(|x| x.as_str()).collect();
        v.join(" ")
    };
    let pairs = [
        (w(&[a]), w(&[b])),
        (w(&[a, a]), w(&[b])),
        (w(&[a]), w(&[b, b])),
        (w(&[a, a]), w(&[b, b])),
    ];
    let mut comp = 0.0;
    for (x, y) in &pairs {
        let joined = PointCloud::concat(&[raw(x)?, raw(y)?]);
        comp += chamfer(&joined, &raw(&format_join(x, y))?)?;
    }
    let ab = raw(&w(&[a, b]))?;
    let ba = raw(&w(&[b, a]))?;
    let b_then_a = PointCloud::concat(&[raw(&w(&[b]))?, raw(&w(&[a]))?]);
    Ok(CoherenceReport {
        composition_gap: comp / pairs.len() as f64,
        commutativity_gap: chamfer(&ab, &ba)?,
        reorder_gap: chamfer(&b_then_a, &ab)?,
        noncanonical_gap: chamfer(&raw(&w(&[a, b, a, b]))?, &raw(&w(&[a, a, b, b]))?)?,
    })
}

fn format_join(x: &str, y: &str) -> String {
    let mut s = String::from(x);
    s.push(' ');
    s.push_str(y);
    s
}

/// Pairs of positive words up to `max_len` with the same letters in a
/// different order that are distinct group elements.
pub fn order_pairs(spec: &HitSpec, max_len: usize) -> Vec<(Word, Word)> {
    let words = enumerate_words(spec, max_len, false).unwrap_or_default();
    let key = |w: &Word| {
        let mut k: Vec<usize> = w.letters.iter().map(|l| l.token()).collect();
        k.sort_unstable();
        k
    };
    let mut out = Vec::new();
    for (i, x) in words.iter().enumerate() {
        for y in &words[i + 1..] {
            if x.len() == y.len() && x.len() >= 2 && key(x) == key(y) && !words_equal(spec, x, y) {
                out.push((x.clone(), y.clone()));
            }
        }
    }
    out
}

/// Noise floor for order sensitivity: 3x the median per-segment chamfer
/// between two independent noisy samplings of the same ground-truth word.
pub fn noise_floor(space: &Space, words: &[Word], sigma: f64, rng: &mut Rng) -> Result<f64, MetricError> {
    let mut vals = Vec::with_capacity(words.len());
    for w in words {
        let x = crate::geometry::ground_truth_loop(space, w, SEG_PTS, 0.0, sigma, rng).cloud;
        let y = crate::geometry::ground_truth_loop(space, w, SEG_PTS, 0.0, sigma, rng).cloud;
        vals.push(per_segment_chamfer(&x, &y, w.len())?);
    }
    Ok(3.0 * median(&mut vals))
}

pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fraction of pairs whose outputs differ by more than `threshold` in
/// per-segment chamfer. `decode` maps a word to its segmented cloud.
pub fn order_sensitivity<F>(decode: F, pairs: &[(Word, Word)], threshold: f64) -> Result<f64, MetricError>
where
    F: Fn(&Word) -> Result<PointCloud, MetricError>,
{
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut hit = 0;
    for (x, y) in pairs {
        let d = per_segment_chamfer(&decode(x)?, &decode(y)?, x.len())?;
        if d > threshold {
            hit += 1;
        }
    }
    Ok(hit as f64 / pairs.len() as f64)
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, libm::sqrt(var))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingPoint {
    pub len: usize,
    pub mean: f64,
    pub std: f64,
}

/// Per-length d-bar over test words, averaged per decoder (one per seed),
/// then mean and std across decoders. Ground truth is noiseless, phase 0.
pub fn scaling_curve(decoders: &[&Decoder], words_by_len: &[(usize, Vec<Word>)]) -> Result<Vec<ScalingPoint>, MetricError> {
    let mut out = Vec::with_capacity(words_by_len.len());
    for (len, words) in words_by_len {
        let mut per_seed = Vec::with_capacity(decoders.len());
        for d in decoders {
            let mut acc = 0.0;
            for w in words {
                let gt = crate::geometry::ground_truth_loop(&d.space, w, SEG_PTS, 0.0, 0.0, &mut Rng::new(0)).cloud;
                acc += per_segment_chamfer(&d.decode_raw(w)?, &gt, w.len())?;
            }
            per_seed.push(acc / words.len().max(1) as f64);
        }
        let (mean, std) = mean_std(&per_seed);
        out.push(ScalingPoint { len: *len, mean, std });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArtifactRow {
    pub len: usize,
    pub fair: f64,
    pub naive: f64,
}

/// Synthetic wedge curves (random letters, 32 uniformly spaced points per
/// circle) under i.i.d. noise `sigma`. Fair: per-segment chamfer at the
/// native 32 points. Naive: the noisy and clean curves each brought to 64
/// points (the noisy one at the clean curve's arc-length positions),
/// whole-cloud chamfer, divided by `L`.
pub fn resampling_artifact_check(sigma: f64, lengths: &[usize], trials: usize, rng: &mut Rng) -> Result<Vec<ArtifactRow>, MetricError> {
    let space = Space { embedding: SpaceEmbedding::Wedge { radius: 1.0 }, channel_of: vec![0, 1] };
    let ts = exclusive_grid(SEG_PTS);
    let mut rows = Vec::with_capacity(lengths.len());
    for &l in lengths {
        let (mut fair, mut naive) = (0.0, 0.0);
        for _ in 0..trials {
            let segs: Vec<PointCloud> =
                (0..l).map(|_| space.letter_segment(Letter::new(rng.below(2)), &ts, 0.0)).collect();
            let clean = PointCloud::concat(&segs);
            let mut noisy = clean.clone();
            for x in noisy.data.iter_mut() {
                *x += sigma * rng.normal();
            }
            fair += per_segment_chamfer(&noisy, &clean, l)?;
            let (plan, _) = arc_length_plan(&clean.data, clean.dim, 64);
            let c64 = PointCloud::new(clean.dim, apply_plan(&clean.data, clean.dim, &plan));
            let n64 = PointCloud::new(clean.dim, apply_plan(&noisy.data, clean.dim, &plan));
            naive += chamfer(&n64, &c64)? / l as f64;
        }
        rows.push(ArtifactRow { len: l, fair: fair / trials as f64, naive: naive / trials as f64 });
    }
    Ok(rows)
}
