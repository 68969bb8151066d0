//! Compilation of a HIT spec into loop decoders.
//!
//! Type-B decoders (Transport, Homotopy) build one generator network per
//! generator and produce a word's loop by list-appending per-letter segments,
//! so `decode(w1 w2)` is literally `decode(w1) ++ decode(w2)` before the final
//! resampling. Type-A decoders (Cover, TransformerWC, TransportAttention,
//! SequentialGRU) produce the whole loop at once.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::autograd::{Graph, Mat, ParamId, ParamStore, Var};
use crate::geometry::{even_bounds, inclusive_grid, GeometryError, PointCloud, Space, SpaceEmbedding};
use crate::hit_spec::{reduce_word, GroupClass, HitSpec, NormalForm, Relation, Word};
use crate::nn::{one_hot, uniform_mat, Block, Gru, LayerNorm, Linear, Mlp, NnError};
use crate::rng::Rng;

const TAU: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecoderKind {
    Transport,
    Homotopy,
    Cover,
    TransformerWC,
    TransportAttention,
    SequentialGRU,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TypeTag {
    A,
    B,
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeTag::A => "A",
            TypeTag::B => "B",
        })
    }
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 6] = [
        DecoderKind::Transport,
        DecoderKind::Homotopy,
        DecoderKind::Cover,
        DecoderKind::TransformerWC,
        DecoderKind::TransportAttention,
        DecoderKind::SequentialGRU,
    ];

    pub fn type_tag(self) -> TypeTag {
        match self {
            DecoderKind::Transport | DecoderKind::Homotopy => TypeTag::B,
            _ => TypeTag::A,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Transport => "transport",
            DecoderKind::Homotopy => "homotopy",
            DecoderKind::Cover => "cover",
            DecoderKind::TransformerWC => "transformer_wc",
            DecoderKind::TransportAttention => "transport_attn",
            DecoderKind::SequentialGRU => "sequential_gru",
        }
    }

    pub fn parse(s: &str) -> Option<DecoderKind> {
        DecoderKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Architecture hyperparameters. Defaults are the desk-scale configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyper {
    pub pts_per_seg: usize,
    pub out_pts: usize,
    pub gen_hidden: usize,
    pub gen_layers: usize,
    pub homotopy_hidden: usize,
    pub width: usize,
    pub heads: usize,
    pub layers: usize,
    pub ff: usize,
    pub max_positions: usize,
    pub cover_hidden: usize,
    pub gru_hidden: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            pts_per_seg: 32,
            out_pts: 64,
            gen_hidden: 128,
            gen_layers: 2,
            homotopy_hidden: 64,
            width: 128,
            heads: 4,
            layers: 4,
            ff: 256,
            max_positions: 16,
            cover_hidden: 256,
            gru_hidden: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DecoderError {
    Incompatible { kind: DecoderKind, reason: String },
    WrongKind(&'static str),
    WordTooLong { len: usize, max: usize },
    InvalidWord,
    NotAbelian,
    Nn(NnError),
    Geometry(GeometryError),
}

impl fmt::Display for DecoderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecoderError::Incompatible { kind, reason } => write!(f, "{kind} cannot be compiled for this spec: {reason}"),
            DecoderError::WrongKind(want) => write!(f, "operation needs a {want} decoder"),
            DecoderError::WordTooLong { len, max } => write!(f, "word length {len} exceeds {max} positions"),
            DecoderError::InvalidWord => write!(f, "word uses generators outside the spec"),
            DecoderError::NotAbelian => write!(f, "transport rotation is defined for count-vector normal forms only"),
            DecoderError::Nn(e) => write!(f, "{e}"),
            DecoderError::Geometry(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for DecoderError {}

impl From<NnError> for DecoderError {
    fn from(e: NnError) -> Self {
        DecoderError::Nn(e)
    }
}

impl From<GeometryError> for DecoderError {
    fn from(e: GeometryError) -> Self {
        DecoderError::Geometry(e)
    }
}

/// Loop network for one generator. Each chart channel gets
/// `angle(t) = 2 pi w t + m(t) - (1 - t) m(0) - t m(1)` where `m` is the MLP
/// output, `w = 1` on the generator's own channel and 0 elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNet {
    pub gen: usize,
    pub mlp: Mlp,
    pub winding: [i64; 2],
}

/// `H(s, t) = (1 - s) LHS(t) + s RHS(t) + s (1 - s) MLP(s, t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomotopyNet {
    pub relation: Relation,
    pub mlp: Mlp,
}

/// Per-generator plane frequencies `omega[i][j]`; `T_gamma` rotates plane
/// `j` by `sum_i n_i omega[i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportRotation {
    pub omega: Mat,
}

/// Block-diagonal rotation by per-plane angles.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneRotation {
    pub angles: Vec<f64>,
}

impl PlaneRotation {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), 2 * self.angles.len());
        let mut y = x.to_vec();
        for (j, &a) in self.angles.iter().enumerate() {
            let (c, s) = (libm::cos(a), libm::sin(a));
            y[2 * j] = x[2 * j] * c - x[2 * j + 1] * s;
            y[2 * j + 1] = x[2 * j] * s + x[2 * j + 1] * c;
        }
        y
    }

    /// Dense `2P x 2P` matrix, row-major.
    pub fn matrix(&self) -> Mat {
        let n = 2 * self.angles.len();
        let mut m = Mat::zeros(n, n);
        for (j, &a) in self.angles.iter().enumerate() {
            let (c, s) = (libm::cos(a), libm::sin(a));
            m.data[(2 * j) * n + 2 * j] = c;
            m.data[(2 * j) * n + 2 * j + 1] = -s;
            m.data[(2 * j + 1) * n + 2 * j] = s;
            m.data[(2 * j + 1) * n + 2 * j + 1] = c;
        }
        m
    }
}

pub fn transport_rotation(delta: &NormalForm, freqs: &TransportRotation) -> Result<PlaneRotation, DecoderError> {
    let NormalForm::CountVector(n) = delta else {
        return Err(DecoderError::NotAbelian);
    };
    let om = &freqs.omega;
    assert_eq!(n.len(), om.rows, "count vector length must match generator count");
    let angles = (0..om.cols).map(|j| n.iter().enumerate().map(|(i, &c)| c as f64 * om.at(i, j)).sum()).collect();
    Ok(PlaneRotation { angles })
}

#[derive(Clone, Debug, PartialEq)]
enum Arch {
    Transport { gens: Vec<GeneratorNet> },
    Homotopy { gens: Vec<GeneratorNet>, cells: Vec<HomotopyNet> },
    Cover { net: Mlp },
    Attention { embed: ParamId, pos: Option<ParamId>, omega: Option<ParamId>, blocks: Vec<Block>, ln_f: LayerNorm, head: Linear },
    Gru { cell: Gru, head: Linear },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoder {
    pub kind: DecoderKind,
    pub spec: HitSpec,
    pub space: Space,
    pub hp: Hyper,
    pub store: ParamStore,
    arch: Arch,
}

/// Pre-resampling output on the tape: `rows x dim` points plus segment offsets.
#[derive(Clone, Debug)]
pub struct RawOut {
    pub points: Var,
    pub bounds: Vec<usize>,
}

/// Per-channel winding targets for the whole word: abelianized counts, or
/// `(n, m)` on Klein (flipper channel gets `n`, flipped channel the lifted `m`).
pub fn channel_targets(spec: &HitSpec, space: &Space, w: &Word) -> [i64; 2] {
    let mut t = [0i64; 2];
    match (spec.group_class, reduce_word(spec, w)) {
        (GroupClass::KleinSemidirect { flipped, flipper }, NormalForm::SemidirectPair(m, n)) => {
            t[space.channel_of[flipped]] = m;
            t[space.channel_of[flipper]] = n;
        }
        _ => {
            for l in &w.letters {
                t[space.channel_of[l.gen]] += l.sign();
            }
        }
    }
    t
}

/// Normal-form code fed to the Cover network.
pub fn cover_code(spec: &HitSpec, w: &Word) -> Vec<f64> {
    match reduce_word(spec, w) {
        NormalForm::CountVector(c) => c.iter().map(|&x| x as f64).collect(),
        NormalForm::SemidirectPair(m, n) => vec![m as f64, n as f64],
        NormalForm::ReducedWord(_) => unreachable!("cover is not compiled for free groups"),
    }
}

/// Rescale increments so they sum to exactly `2 pi target`. For a nonzero
/// target the increments are multiplied by `2 pi target / sum`; for zero the
/// mean is subtracted. An all-zero input yields uniform increments.
pub fn winding_constrain(raw: &[f64], target: i64) -> Vec<f64> {
    let n = raw.len();
    let total = TAU * target as f64;
    let s: f64 = raw.iter().sum();
    if target == 0 {
        let m = s / n as f64;
        return raw.iter().map(|x| x - m).collect();
    }
    if s == 0.0 {
        return vec![total / n as f64; n];
    }
    let k = 1.0 / s;
    raw.iter().map(|x| x * k * total).collect()
}

fn winding_constrain_tape(g: &mut Graph<'_>, inc: Var, target: i64) -> Var {
    let n = g.value(inc).len();
    if target == 0 {
        let m = g.mean(inc);
        let neg = g.scale(m, -1.0);
        return g.add_scalar_var(inc, neg);
    }
    let s = g.sum(inc);
    if g.scalar_value(s) == 0.0 {
        return g.constant(Mat::from_vec(n, 1, vec![TAU * target as f64 / n as f64; n]));
    }
    let k = g.recip(s);
    let y = g.mul_scalar_var(inc, k);
    g.scale(y, TAU * target as f64)
}

/// Map an `n x 2` angle matrix through the space's chart.
pub fn chart_tape(space: &Space, g: &mut Graph<'_>, angles: Var) -> Var {
    let a0 = g.slice_cols(angles, 0, 1);
    let a1 = g.slice_cols(angles, 1, 2);
    match space.embedding {
        SpaceEmbedding::Torus { major, minor } => {
            let (cu, su) = (g.cos(a0), g.sin(a0));
            let (cv, sv) = (g.cos(a1), g.sin(a1));
            let rho = g.scale(cv, minor);
            let rho = g.offset(rho, major);
            let x = g.mul(rho, cu);
            let y = g.mul(rho, su);
            let z = g.scale(sv, minor);
            g.concat_cols(&[x, y, z])
        }
        SpaceEmbedding::Wedge { radius } => {
            let (ca, sa) = (g.cos(a0), g.sin(a0));
            let (cb, sb) = (g.cos(a1), g.sin(a1));
            let x = g.offset(ca, -1.0);
            let y = g.add(sa, sb);
            let z = g.offset(cb, -1.0);
            let p = g.concat_cols(&[x, y, z]);
            if radius == 1.0 {
                p
            } else {
                g.scale(p, radius)
            }
        }
        SpaceEmbedding::Klein4D { scale } => {
            let (cu, su) = (g.cos(a0), g.sin(a0));
            let (cv, sv) = (g.cos(a1), g.sin(a1));
            let rho = g.offset(cv, scale);
            let x = g.mul(rho, cu);
            let y = g.mul(rho, su);
            let hu = g.scale(a0, 0.5);
            let (ch, sh) = (g.cos(hu), g.sin(hu));
            let z = g.mul(sv, ch);
            let w = g.mul(sv, sh);
            g.concat_cols(&[x, y, z, w])
        }
    }
}

fn abelian_counts(spec: &HitSpec, w: &Word) -> Vec<i64> {
    let mut c = vec![0i64; spec.rank()];
    for l in &w.letters {
        c[l.gen] += l.sign();
    }
    c
}

impl Decoder {
    pub fn compile(spec: &HitSpec, kind: DecoderKind, hp: &Hyper, rng: &mut Rng) -> Result<Decoder, DecoderError> {
        let space = Space::from_spec(spec)?;
        let mut store = ParamStore::new();
        let c = 2; // chart channels
        let d = space.dim();
        let k = spec.rank();
        let gen_nets = |store: &mut ParamStore, rng: &mut Rng| -> Vec<GeneratorNet> {
            (0..k)
                .map(|gen| {
                    let mut sizes = vec![1];
                    sizes.extend(core::iter::repeat(hp.gen_hidden).take(hp.gen_layers));
                    sizes.push(c);
                    let mlp = Mlp::new(store, &format!("gen.{}", spec.generators[gen]), &sizes, rng);
                    let mut winding = [0; 2];
                    winding[space.channel_of[gen]] = 1;
                    GeneratorNet { gen, mlp, winding }
                })
                .collect()
        };
        let arch = match kind {
            DecoderKind::Transport => Arch::Transport { gens: gen_nets(&mut store, rng) },
            DecoderKind::Homotopy => {
                let gens = gen_nets(&mut store, rng);
                let cells = spec
                    .relations
                    .iter()
                    .enumerate()
                    .map(|(i, r)| HomotopyNet {
                        relation: r.balanced(),
                        mlp: Mlp::new(&mut store, &format!("cell.{i}"), &[2, hp.homotopy_hidden, hp.homotopy_hidden, d], rng),
                    })
                    .collect();
                Arch::Homotopy { gens, cells }
            }
            DecoderKind::Cover => {
                if matches!(spec.group_class, GroupClass::Free(_)) {
                    return Err(DecoderError::Incompatible {
                        kind,
                        reason: "a free group has infinitely many classes and no finite code".into(),
                    });
                }
                let code = if matches!(spec.group_class, GroupClass::KleinSemidirect { .. }) { 2 } else { k };
                let net = Mlp::new(&mut store, "cover", &[code, hp.cover_hidden, hp.cover_hidden, hp.out_pts * c], rng);
                Arch::Cover { net }
            }
            DecoderKind::TransformerWC | DecoderKind::TransportAttention => {
                let w = hp.width;
                let embed = store.add("embed", uniform_mat(rng, 2 * k, w, 1.0));
                let (pos, omega) = if kind == DecoderKind::TransformerWC {
                    (Some(store.add("pos", uniform_mat(rng, hp.max_positions, w, 1.0))), None)
                } else {
                    if w % 2 != 0 {
                        return Err(NnError::HeadsDoNotDivide { width: w, heads: hp.heads }.into());
                    }
                    let planes = w / 2;
                    let mut om = Mat::zeros(k, planes);
                    for i in 0..k {
                        for j in 0..planes {
                            let base = libm::pow(10_000.0, -(j as f64) / planes as f64);
                            om.data[i * planes + j] = base * rng.uniform(0.5, 1.5);
                        }
                    }
                    (None, Some(store.add("omega", om)))
                };
                let blocks = (0..hp.layers)
                    .map(|i| Block::new(&mut store, &format!("block.{i}"), w, hp.heads, hp.ff, rng))
                    .collect::<Result<Vec<_>, _>>()?;
                let ln_f = LayerNorm::new(&mut store, "ln_f", w);
                let head = Linear::new(&mut store, "head", w, hp.pts_per_seg * c, rng);
                Arch::Attention { embed, pos, omega, blocks, ln_f, head }
            }
            DecoderKind::SequentialGRU => {
                let cell = Gru::new(&mut store, "gru", 2 * k, hp.gru_hidden, rng);
                let head = Linear::new(&mut store, "head", hp.gru_hidden, hp.pts_per_seg * d, rng);
                Arch::Gru { cell, head }
            }
        };
        Ok(Decoder { kind, spec: spec.clone(), space, hp: hp.clone(), store, arch })
    }

    pub fn param_count(&self) -> usize {
        self.store.count()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn generator_nets(&self) -> &[GeneratorNet] {
        match &self.arch {
            Arch::Transport { gens } | Arch::Homotopy { gens, .. } => gens,
            _ => &[],
        }
    }

    pub fn homotopy_nets(&self) -> &[HomotopyNet] {
        match &self.arch {
            Arch::Homotopy { cells, .. } => cells,
            _ => &[],
        }
    }

    /// Parameters owned by the 2-cells.
    pub fn homotopy_param_count(&self) -> usize {
        self.homotopy_nets().iter().map(|c| c.mlp.param_count()).sum()
    }

    /// Is the transport-rotation table present (TransportAttention only)?
    pub fn transport_freqs(&self) -> Option<TransportRotation> {
        match &self.arch {
            Arch::Attention { omega: Some(o), .. } => Some(TransportRotation { omega: self.store.get(*o).clone() }),
            _ => None,
        }
    }

    fn check_word(&self, w: &Word) -> Result<(), DecoderError> {
        if !self.spec.word_valid(w) {
            return Err(DecoderError::InvalidWord);
        }
        if let Arch::Attention { pos: Some(_), .. } = &self.arch {
            if w.len() > self.hp.max_positions {
                return Err(DecoderError::WordTooLong { len: w.len(), max: self.hp.max_positions });
            }
        }
        Ok(())
    }

    fn generator_segment_tape(&self, g: &mut Graph<'_>, net: &GeneratorNet) -> Var {
        let n = self.hp.pts_per_seg;
        let ts = inclusive_grid(n);
        let t = g.constant(Mat::col(&ts));
        let m = net.mlp.apply(g, t);
        let m0 = g.slice_rows(m, 0, 1);
        let m1 = g.slice_rows(m, n - 1, n);
        let one_minus: Vec<f64> = ts.iter().map(|t| 1.0 - t).collect();
        let om = g.constant(Mat::col(&one_minus));
        let a = g.matmul(om, m0);
        let b = g.matmul(t, m1);
        let r = g.sub(m, a);
        let r = g.sub(r, b);
        let mut base = Mat::zeros(n, 2);
        for (k, &tk) in ts.iter().enumerate() {
            for ch in 0..2 {
                base.data[k * 2 + ch] = TAU * net.winding[ch] as f64 * tk;
            }
        }
        let base = g.constant(base);
        let ang = g.add(base, r);
        chart_tape(&self.space, g, ang)
    }

    fn transport_raw(&self, g: &mut Graph<'_>, gens: &[GeneratorNet], w: &Word) -> RawOut {
        let n = self.hp.pts_per_seg;
        let mut fwd: Vec<Option<Var>> = vec![None; gens.len()];
        let mut rev: Vec<Option<Var>> = vec![None; gens.len()];
        let mut parts = Vec::with_capacity(w.len());
        for l in &w.letters {
            let f = match fwd[l.gen] {
                Some(v) => v,
                None => {
                    let v = self.generator_segment_tape(g, &gens[l.gen]);
                    fwd[l.gen] = Some(v);
                    v
                }
            };
            let seg = if l.inv {
                match rev[l.gen] {
                    Some(v) => v,
                    None => {
                        let v = g.reverse_rows(f);
                        rev[l.gen] = Some(v);
                        v
                    }
                }
            } else {
                f
            };
            parts.push(seg);
        }
        let points = g.concat_rows(&parts);
        RawOut { points, bounds: (0..=w.len()).map(|i| i * n).collect() }
    }

    fn angles_to_points(&self, g: &mut Graph<'_>, raw: Var, targets: [i64; 2]) -> Var {
        let inc = g.softplus(raw);
        let mut cols = Vec::with_capacity(2);
        for (ch, &t) in targets.iter().enumerate() {
            let col = g.slice_cols(inc, ch, ch + 1);
            let c = winding_constrain_tape(g, col, t);
            let cum = g.cumsum_rows(c);
            // Exclusive running sum: the loop starts at angle 0.
            cols.push(g.sub(cum, c));
        }
        let ang = g.concat_cols(&cols);
        chart_tape(&self.space, g, ang)
    }

    /// Pre-resampling output on a tape. The empty word gives zero points.
    pub fn forward_raw(&self, g: &mut Graph<'_>, w: &Word) -> Result<RawOut, DecoderError> {
        self.check_word(w)?;
        let d = self.dim();
        if w.is_empty() {
            let points = g.constant(Mat::zeros(0, d));
            return Ok(RawOut { points, bounds: vec![0] });
        }
        let n = self.hp.pts_per_seg;
        let l = w.len();
        let seg_bounds: Vec<usize> = (0..=l).map(|i| i * n).collect();
        Ok(match &self.arch {
            Arch::Transport { gens } | Arch::Homotopy { gens, .. } => self.transport_raw(g, gens, w),
            Arch::Cover { net } => {
                let cv = cover_code(&self.spec, w);
                let x = g.constant(Mat::from_vec(1, cv.len(), cv));
                let y = net.apply(g, x);
                let raw = g.reshape(y, self.hp.out_pts, 2);
                let targets = channel_targets(&self.spec, &self.space, w);
                let points = self.angles_to_points(g, raw, targets);
                RawOut { points, bounds: even_bounds(self.hp.out_pts, l) }
            }
            Arch::Attention { embed, pos, omega, blocks, ln_f, head } => {
                let tokens: Vec<usize> = w.letters.iter().map(|l| l.token()).collect();
                let oh = g.constant(one_hot(&tokens, 2 * self.spec.rank()));
                let e = g.param(*embed);
                let mut x = g.matmul(oh, e);
                if let Some(p) = pos {
                    let pt = g.param(*p);
                    let pv = g.slice_rows(pt, 0, l);
                    x = g.add(x, pv);
                }
                let rot = omega.map(|o| {
                    // Inclusive prefix counts: token i sits at group element w_1 ... w_i.
                    let k = self.spec.rank();
                    let mut pre = Mat::zeros(l, k);
                    let mut run = vec![0i64; k];
                    for (i, lt) in w.letters.iter().enumerate() {
                        run[lt.gen] += lt.sign();
                        for j in 0..k {
                            pre.data[i * k + j] = run[j] as f64;
                        }
                    }
                    let pre = g.constant(pre);
                    let om = g.param(o);
                    g.matmul(pre, om)
                });
                for b in blocks {
                    x = b.apply(g, x, rot);
                }
                let x = ln_f.apply(g, x);
                let y = head.apply(g, x);
                let raw = g.reshape(y, l * n, 2);
                let targets = channel_targets(&self.spec, &self.space, w);
                let points = self.angles_to_points(g, raw, targets);
                RawOut { points, bounds: seg_bounds }
            }
            Arch::Gru { cell, head } => {
                let mut h = g.constant(Mat::zeros(1, cell.hidden));
                let mut parts = Vec::with_capacity(l);
                for lt in &w.letters {
                    let x = g.constant(one_hot(&[lt.token()], 2 * self.spec.rank()));
                    h = cell.apply(g, h, x);
                    let y = head.apply(g, h);
                    parts.push(g.reshape(y, n, d));
                }
                let points = g.concat_rows(&parts);
                RawOut { points, bounds: seg_bounds }
            }
        })
    }

    /// The `out_pts`-point output on a tape (resampled unless the
    /// architecture already emits exactly `out_pts` points).
    pub fn forward(&self, g: &mut Graph<'_>, w: &Word) -> Result<Var, DecoderError> {
        let raw = self.forward_raw(g, w)?;
        if w.is_empty() {
            let bp = self.space.basepoint();
            let data = bp.repeat(self.hp.out_pts);
            return Ok(g.constant(Mat::from_vec(self.hp.out_pts, self.dim(), data)));
        }
        if g.value(raw.points).rows == self.hp.out_pts && matches!(self.arch, Arch::Cover { .. }) {
            return Ok(raw.points);
        }
        Ok(g.resample(raw.points, self.hp.out_pts))
    }

    /// Pre-resampling cloud with segment offsets.
    pub fn decode_raw(&self, w: &Word) -> Result<PointCloud, DecoderError> {
        let mut g = Graph::new(&self.store);
        let raw = self.forward_raw(&mut g, w)?;
        let m = g.value(raw.points);
        Ok(PointCloud { dim: self.dim(), data: m.data.clone(), bounds: Some(raw.bounds) })
    }

    /// The final `out_pts`-point cloud. Segment offsets are carried over by
    /// assigning each output point to the source segment it interpolates.
    pub fn decode(&self, w: &Word) -> Result<PointCloud, DecoderError> {
        let raw = self.decode_raw(w)?;
        let out = self.hp.out_pts;
        if w.is_empty() {
            return Ok(PointCloud::new(self.dim(), self.space.basepoint().repeat(out)));
        }
        if matches!(self.arch, Arch::Cover { .. }) {
            return Ok(raw);
        }
        let (plan, _) = crate::geometry::arc_length_plan(&raw.data, raw.dim, out);
        let data = crate::geometry::apply_plan(&raw.data, raw.dim, &plan);
        let src = raw.bounds.as_ref().unwrap();
        let mut bounds = vec![0];
        let seg_of = |idx: usize| src.windows(2).position(|b| idx < b[1]).unwrap_or(src.len() - 2);
        for s in 1..src.len() - 1 {
            let first = plan.iter().position(|&(k, a)| {
                let idx = if a >= 0.5 { k + 1 } else { k };
                seg_of(idx) >= s
            });
            bounds.push(first.unwrap_or(out).max(*bounds.last().unwrap()));
        }
        bounds.push(out);
        Ok(PointCloud { dim: raw.dim, data, bounds: Some(bounds) })
    }

    /// Surface point rows `H(s, t)` for 2-cell `cell`, with `t` on the
    /// boundary words' own grid.
    pub fn homotopy_tape(&self, g: &mut Graph<'_>, cell: usize, s: f64) -> Result<Var, DecoderError> {
        let Arch::Homotopy { gens, cells } = &self.arch else {
            return Err(DecoderError::WrongKind("homotopy"));
        };
        let c = &cells[cell];
        let mut lhs = self.transport_raw(g, gens, &c.relation.lhs).points;
        let mut rhs = self.transport_raw(g, gens, &c.relation.rhs).points;
        let (nl, nr) = (g.value(lhs).rows, g.value(rhs).rows);
        if nl != nr {
            let n = nl.max(nr);
            lhs = g.resample(lhs, n);
            rhs = g.resample(rhs, n);
        }
        let bump = self.homotopy_bump(g, cell, s, nl.max(nr));
        let a = g.scale(lhs, 1.0 - s);
        let b = g.scale(rhs, s);
        let ab = g.add(a, b);
        Ok(g.add(ab, bump))
    }

    /// The learned part of the surface, `s (1 - s) MLP(s, t)` on an
    /// `n`-point inclusive `t` grid.
    fn homotopy_bump(&self, g: &mut Graph<'_>, cell: usize, s: f64, n: usize) -> Var {
        let Arch::Homotopy { cells, .. } = &self.arch else { unreachable!() };
        let ts = inclusive_grid(n);
        let mut st = Mat::zeros(n, 2);
        for (k, &t) in ts.iter().enumerate() {
            st.data[2 * k] = s;
            st.data[2 * k + 1] = t;
        }
        let st = g.constant(st);
        let m = cells[cell].mlp.apply(g, st);
        g.scale(m, s * (1.0 - s))
    }

    pub fn homotopy_segment(&self, cell: usize, s: f64) -> Result<PointCloud, DecoderError> {
        let mut g = Graph::new(&self.store);
        let h = self.homotopy_tape(&mut g, cell, s)?;
        Ok(PointCloud::new(self.dim(), g.value(h).data.clone()))
    }

    /// Smoothness of the proof terms: mean squared finite difference of
    /// each learned bump `s (1 - s) MLP(s, t)` along `t` and `s`, sampled at
    /// `s in {0, 1/4, 1/2, 3/4, 1}`. The boundary interpolation is left out
    /// so the penalty does not act on the generator loops. `None` without
    /// 2-cells.
    pub fn smoothness_tape(&self, g: &mut Graph<'_>) -> Option<Var> {
        let Arch::Homotopy { cells, .. } = &self.arch else {
            return None;
        };
        if cells.is_empty() {
            return None;
        }
        let mut terms = Vec::new();
        for (c, cell) in cells.iter().enumerate() {
            let n = self.hp.pts_per_seg * cell.relation.lhs.len().max(cell.relation.rhs.len()).max(1);
            let rows: Vec<Var> = (0..5).map(|i| self.homotopy_bump(g, c, i as f64 / 4.0, n)).collect();
            for (i, &r) in rows.iter().enumerate() {
                let a = g.slice_rows(r, 1, n);
                let b = g.slice_rows(r, 0, n - 1);
                let dt = g.sub(a, b);
                let sq = g.mul(dt, dt);
                terms.push(g.mean(sq));
                if i > 0 {
                    let ds = g.sub(r, rows[i - 1]);
                    let sq = g.mul(ds, ds);
                    terms.push(g.mean(sq));
                }
            }
        }
        let all = g.concat_rows(&terms);
        Some(g.mean(all))
    }

    /// Abelianized counts of a word (used for rotation angles).
    pub fn counts(&self, w: &Word) -> Vec<i64> {
        abelian_counts(&self.spec, w)
    }
}
