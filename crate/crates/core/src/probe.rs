//! Structural probes: exact functoriality and attention counterexamples.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::decoders::{Decoder, DecoderError};
use crate::geometry::PointCloud;
use crate::hit_spec::{enumerate_words, reduce_word, words_equal, GroupClass, NormalForm, Word};

#[derive(Clone, Debug, PartialEq)]
pub enum ProbeError {
    NoSameClassPair { max_len: usize },
    Decoder(DecoderError),
}

impl fmt::Display for ProbeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeError::NoSameClassPair { max_len } => write!(f, "no two distinct words of length <= {max_len} share a class"),
            ProbeError::Decoder(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ProbeError {}

impl From<DecoderError> for ProbeError {
    fn from(e: DecoderError) -> Self {
        ProbeError::Decoder(e)
    }
}

/// `w2` and `w2prime` are the same group element but different words; `delta`
/// is the largest coordinate change in the `w1` block between
/// `decode(w1 w2)` and `decode(w1 w2prime)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub w1: Word,
    pub w2: Word,
    pub w2prime: Word,
    pub class: NormalForm,
    pub delta: f64,
}

impl Witness {
    pub fn is_valid(&self, dec: &Decoder) -> bool {
        self.w2 != self.w2prime && words_equal(&dec.spec, &self.w2, &self.w2prime) && reduce_word(&dec.spec, &self.w2) == self.class
    }
}

fn first_block(c: &PointCloud) -> &[f64] {
    let end = c.bounds.as_ref().map_or(c.len(), |b| b[1]);
    &c.data[..end * c.dim]
}

/// Same-class pairs among words up to `max_len`, shortlex order. On a free
/// group the only pairs are those differing by cancelling letters.
pub fn same_class_pairs(dec: &Decoder, max_len: usize) -> Vec<(Word, Word)> {
    let words = enumerate_words(&dec.spec, max_len, true).unwrap_or_default();
    let mut by_class: BTreeMap<NormalForm, Vec<Word>> = BTreeMap::new();
    for w in words {
        by_class.entry(reduce_word(&dec.spec, &w)).or_default().push(w);
    }
    let mut pairs = Vec::new();
    for ws in by_class.values() {
        for (i, x) in ws.iter().enumerate() {
            for y in &ws[i + 1..] {
                pairs.push((x.clone(), y.clone()));
            }
        }
    }
    pairs.sort_by(|a, b| (a.0.len() + a.1.len(), &a.0, &a.1).cmp(&(b.0.len() + b.1.len(), &b.0, &b.1)));
    pairs
}

/// Fix `w1` = the first generator and search same-class continuations for
/// the one that moves the `w1` block the most. At most `budget` pairs are
/// evaluated, shortest first.
pub fn counterexample_search(dec: &Decoder, max_len: usize, budget: usize) -> Result<Witness, ProbeError> {
    let pairs = same_class_pairs(dec, max_len);
    if pairs.is_empty() {
        return Err(ProbeError::NoSameClassPair { max_len });
    }
    let w1 = Word::from_letters(alloc::vec![crate::hit_spec::Letter::new(0)]);
    let mut best: Option<Witness> = None;
    for (w2, w2p) in pairs.into_iter().take(budget.max(1)) {
        let x = dec.decode_raw(&w1.concat(&w2))?;
        let y = dec.decode_raw(&w1.concat(&w2p))?;
        let (bx, by) = (first_block(&x), first_block(&y));
        let n = bx.len().min(by.len());
        let delta = bx[..n].iter().zip(&by[..n]).map(|(p, q)| libm::fabs(p - q)).fold(0.0, f64::max);
        if best.as_ref().is_none_or(|b| delta > b.delta) {
            let class = reduce_word(&dec.spec, &w2);
            best = Some(Witness { w1: w1.clone(), w2, w2prime: w2p, class, delta });
        }
    }
    Ok(best.expect("at least one pair"))
}

/// The free-group probe pair `a a^-1 b` vs `b`, for specs where short
/// same-class pairs only come from cancellation.
pub fn free_probe_pair(dec: &Decoder) -> Option<(Word, Word)> {
    if !matches!(dec.spec.group_class, GroupClass::Free(_)) || dec.spec.rank() < 2 {
        return None;
    }
    let a = crate::hit_spec::Letter::new(0);
    let b = crate::hit_spec::Letter::new(1);
    Some((Word::from_letters(alloc::vec![a, a.inverse(), b]), Word::from_letters(alloc::vec![b])))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctorialityReport {
    pub pairs: usize,
    pub violations: usize,
    pub max_abs_diff: f64,
}

/// Compare `decode_raw(w1 w2)` with `decode_raw(w1) ++ decode_raw(w2)` bit
/// for bit, for every pair of words with letters up to `max_len` each.
pub fn functoriality_check(dec: &Decoder, max_len: usize) -> Result<FunctorialityReport, ProbeError> {
    let words = enumerate_words(&dec.spec, max_len, true).map_err(|_| ProbeError::NoSameClassPair { max_len })?;
    let single: Vec<PointCloud> = words.iter().map(|w| dec.decode_raw(w)).collect::<Result<_, _>>()?;
    let mut rep = FunctorialityReport { pairs: 0, violations: 0, max_abs_diff: 0.0 };
    for (i, w1) in words.iter().enumerate() {
        for (j, w2) in words.iter().enumerate() {
            let whole = dec.decode_raw(&w1.concat(w2))?;
            let parts = PointCloud::concat(&[single[i].clone(), single[j].clone()]);
            rep.pairs += 1;
            let same_bits = whole.data.len() == parts.data.len()
                && whole.data.iter().zip(&parts.data).all(|(a, b)| a.to_bits() == b.to_bits())
                && whole.bounds == parts.bounds;
            if !same_bits {
                rep.violations += 1;
                let d = if whole.data.len() == parts.data.len() {
                    whole.data.iter().zip(&parts.data).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max)
                } else {
                    f64::INFINITY
                };
                rep.max_abs_diff = rep.max_abs_diff.max(d);
            }
        }
    }
    Ok(rep)
}
