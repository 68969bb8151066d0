//! Layers built on the tape: affine maps, MLPs, GRU cells, layer norm and
//! multi-head attention with optional rotary transport.
//!
//! Weights are stored `in x out` and applied as `x W + b` to row batches.
//! Init is uniform in `±1/sqrt(fan_in)` for weights and biases alike.

use alloc::format;
use alloc::vec::Vec;

use crate::autograd::{Graph, Mat, ParamId, ParamStore, Var};
use crate::rng::Rng;

pub fn uniform_mat(rng: &mut Rng, rows: usize, cols: usize, bound: f64) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / libm::sqrt(fan_in as f64);
        let w = store.add(format!("{name}.w"), uniform_mat(rng, fan_in, fan_out, bound));
        let b = store.add(format!("{name}.b"), uniform_mat(rng, 1, fan_out, bound));
        Linear { w, b, fan_in, fan_out }
    }

    pub fn apply(&self, g: &mut Graph<'_>, x: Var) -> Var {
        let w = g.param(self.w);
        let b = g.param(self.b);
        let y = g.matmul(x, w);
        g.add_row(y, b)
    }

    pub fn param_count(&self) -> usize {
        self.fan_in * self.fan_out + self.fan_out
    }
}

/// Affine layers with tanh between them (none after the last).
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `sizes = [in, hidden..., out]`.
    pub fn new(store: &mut ParamStore, name: &str, sizes: &[usize], rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2);
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn apply(&self, g: &mut Graph<'_>, x: Var) -> Var {
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.apply(g, h);
            if i + 1 < self.layers.len() {
                h = g.tanh(h);
            }
        }
        h
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Linear::param_count).sum()
    }
}

/// Standard GRU cell:
/// `z = s(x Wz + h Uz + bz)`, `r = s(x Wr + h Ur + br)`,
/// `n = tanh(x Wn + (r * h) Un + bn)`, `h' = (1 - z) * n + z * h`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gru {
    pub wz: Linear,
    pub wr: Linear,
    pub wn: Linear,
    pub uz: ParamId,
    pub ur: ParamId,
    pub un: ParamId,
    pub hidden: usize,
}

impl Gru {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / libm::sqrt(hidden as f64);
        let wz = Linear::new(store, &format!("{name}.z"), input, hidden, rng);
        let wr = Linear::new(store, &format!("{name}.r"), input, hidden, rng);
        let wn = Linear::new(store, &format!("{name}.n"), input, hidden, rng);
        let uz = store.add(format!("{name}.uz"), uniform_mat(rng, hidden, hidden, bound));
        let ur = store.add(format!("{name}.ur"), uniform_mat(rng, hidden, hidden, bound));
        let un = store.add(format!("{name}.un"), uniform_mat(rng, hidden, hidden, bound));
        Gru { wz, wr, wn, uz, ur, un, hidden }
    }

    pub fn apply(&self, g: &mut Graph<'_>, h: Var, x: Var) -> Var {
        let (uz, ur, un) = (g.param(self.uz), g.param(self.ur), g.param(self.un));
        let xz = self.wz.apply(g, x);
        let hz = g.matmul(h, uz);
        let z = g.add(xz, hz);
        let z = g.sigmoid(z);
        let xr = self.wr.apply(g, x);
        let hr = g.matmul(h, ur);
        let r = g.add(xr, hr);
        let r = g.sigmoid(r);
        let xn = self.wn.apply(g, x);
        let rh = g.mul(r, h);
        let hn = g.matmul(rh, un);
        let n = g.add(xn, hn);
        let n = g.tanh(n);
        // h' = n + z * (h - n)
        let d = g.sub(h, n);
        let zd = g.mul(z, d);
        g.add(n, zd)
    }

    pub fn param_count(&self) -> usize {
        self.wz.param_count() * 3 + 3 * self.hidden * self.hidden
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub width: usize,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        let gain = store.add(format!("{name}.gain"), Mat::from_vec(1, width, alloc::vec![1.0; width]));
        let bias = store.add(format!("{name}.bias"), Mat::zeros(1, width));
        LayerNorm { gain, bias, width }
    }

    pub fn apply(&self, g: &mut Graph<'_>, x: Var) -> Var {
        let (gain, bias) = (g.param(self.gain), g.param(self.bias));
        let y = g.layer_norm_rows(x);
        let y = g.mul_row(y, gain);
        g.add_row(y, bias)
    }

    pub fn param_count(&self) -> usize {
        2 * self.width
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NnError {
    HeadsDoNotDivide { width: usize, heads: usize },
}

impl core::fmt::Display for NnError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            NnError::HeadsDoNotDivide { width, heads } => write!(f, "width {width} not divisible by {heads} heads"),
        }
    }
}

impl core::error::Error for NnError {}

impl Attention {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, heads: usize, rng: &mut Rng) -> Result<Self, NnError> {
        if heads == 0 || width % heads != 0 || (width / heads) % 2 != 0 {
            return Err(NnError::HeadsDoNotDivide { width, heads });
        }
        Ok(Attention {
            q: Linear::new(store, &format!("{name}.q"), width, width, rng),
            k: Linear::new(store, &format!("{name}.k"), width, width, rng),
            v: Linear::new(store, &format!("{name}.v"), width, width, rng),
            o: Linear::new(store, &format!("{name}.o"), width, width, rng),
            heads,
            width,
        })
    }

    /// Multi-head softmax attention without the residual. `rot`, when
    /// given, is an `n x width/2` matrix of plane angles applied to both
    /// queries and keys, so scores depend on the relative rotation only.
    /// Returns the output and the per-head attention matrices.
    pub fn attend(&self, g: &mut Graph<'_>, x: Var, rot: Option<Var>) -> (Var, Vec<Var>) {
        let mut q = self.q.apply(g, x);
        let mut k = self.k.apply(g, x);
        let v = self.v.apply(g, x);
        if let Some(th) = rot {
            q = g.rope(q, th);
            k = g.rope(k, th);
        }
        let dh = self.width / self.heads;
        let inv = 1.0 / libm::sqrt(dh as f64);
        let mut outs = Vec::with_capacity(self.heads);
        let mut alphas = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * dh, (h + 1) * dh);
            let kh = g.slice_cols(k, h * dh, (h + 1) * dh);
            let vh = g.slice_cols(v, h * dh, (h + 1) * dh);
            let kt = g.transpose(kh);
            let s = g.matmul(qh, kt);
            let s = g.scale(s, inv);
            let a = g.softmax_rows(s);
            alphas.push(a);
            outs.push(g.matmul(a, vh));
        }
        let cat = g.concat_cols(&outs);
        (self.o.apply(g, cat), alphas)
    }

    /// `x + MHA(x)`.
    pub fn apply(&self, g: &mut Graph<'_>, x: Var, rot: Option<Var>) -> Var {
        let (y, _) = self.attend(g, x, rot);
        g.add(x, y)
    }

    pub fn param_count(&self) -> usize {
        4 * self.q.param_count()
    }
}

/// Pre-norm block: `x + MHA(LN x)`, then `x + FF(LN x)` with GELU.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub ln1: LayerNorm,
    pub attn: Attention,
    pub ln2: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
}

impl Block {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, heads: usize, ff: usize, rng: &mut Rng) -> Result<Self, NnError> {
        Ok(Block {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), width),
            attn: Attention::new(store, &format!("{name}.attn"), width, heads, rng)?,
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), width),
            ff1: Linear::new(store, &format!("{name}.ff1"), width, ff, rng),
            ff2: Linear::new(store, &format!("{name}.ff2"), ff, width, rng),
        })
    }

    pub fn apply(&self, g: &mut Graph<'_>, x: Var, rot: Option<Var>) -> Var {
        let h = self.ln1.apply(g, x);
        let (a, _) = self.attn.attend(g, h, rot);
        let x = g.add(x, a);
        let h = self.ln2.apply(g, x);
        let h = self.ff1.apply(g, h);
        let h = g.gelu(h);
        let h = self.ff2.apply(g, h);
        g.add(x, h)
    }

    pub fn param_count(&self) -> usize {
        self.ln1.param_count() + self.attn.param_count() + self.ln2.param_count() + self.ff1.param_count() + self.ff2.param_count()
    }
}

/// One-hot rows for `tokens` over a vocabulary of `vocab`.
pub fn one_hot(tokens: &[usize], vocab: usize) -> Mat {
    let mut m = Mat::zeros(tokens.len(), vocab);
    for (i, &t) in tokens.iter().enumerate() {
        m.data[i * vocab + t] = 1.0;
    }
    m
}
