use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{GroupClass, HitSpec, Letter, NormalForm, Relation, Word};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupError {
    WrongClass(&'static str),
    MaxLenTooSmall,
}

impl fmt::Display for GroupError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupError::WrongClass(want) => write!(f, "operation requires a {want} spec"),
            GroupError::MaxLenTooSmall => write!(f, "max_len must be at least 1"),
        }
    }
}

impl core::error::Error for GroupError {}

pub(crate) fn free_reduce(letters: &[Letter]) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
    for &l in letters {
        if out.last() == Some(&l.inverse()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

fn cyclic_reduce(mut r: Vec<Letter>) -> Vec<Letter> {
    while r.len() >= 2 && r[0] == r[r.len() - 1].inverse() {
        r.pop();
        r.remove(0);
    }
    r
}

fn rotations(r: &[Letter]) -> impl Iterator<Item = Vec<Letter>> + '_ {
    (0..r.len()).map(move |i| {
        let mut v = r[i..].to_vec();
        v.extend_from_slice(&r[..i]);
        v
    })
}

/// Commutator `p q p^-1 q^-1` up to rotation; returns the generator pair.
fn as_commutator(r: &[Letter]) -> Option<(usize, usize)> {
    if r.len() != 4 {
        return None;
    }
    rotations(r).find_map(|v| {
        let (p, q) = (v[0], v[1]);
        (p.gen != q.gen && v[2] == p.inverse() && v[3] == q.inverse())
            .then(|| (p.gen.min(q.gen), p.gen.max(q.gen)))
    })
}

/// Twist `p q p^-1 q` up to rotation; returns (flipped, flipper).
fn as_klein(r: &[Letter]) -> Option<(usize, usize)> {
    if r.len() != 4 {
        return None;
    }
    rotations(r).find_map(|v| {
        let (p, q) = (v[0], v[1]);
        (p.gen != q.gen && v[2] == p.inverse() && v[3] == q).then_some((q.gen, p.gen))
    })
}

fn relator(rel: &Relation) -> Vec<Letter> {
    let mut all = rel.lhs.letters.clone();
    all.extend(rel.rhs.inverse().letters);
    cyclic_reduce(free_reduce(&all))
}

/// Classify the presented group. Errors carry the offending relation index.
pub(crate) fn classify(k: usize, rels: &[Relation]) -> Result<GroupClass, (usize, String)> {
    if rels.is_empty() {
        return Ok(GroupClass::Free(k));
    }
    if k == 2 && rels.len() == 1 {
        if let Some((flipped, flipper)) = as_klein(&relator(&rels[0])) {
            return Ok(GroupClass::KleinSemidirect { flipped, flipper });
        }
    }
    let mut pairs = Vec::new();
    for (i, r) in rels.iter().enumerate() {
        match as_commutator(&relator(r)) {
            Some(p) => pairs.push(p),
            None => {
                return Err((
                    i,
                    String::from("only commutators (x y = y x) or a single twist (y x y^-1 = x^-1) are supported"),
                ))
            }
        }
    }
    pairs.sort();
    pairs.dedup();
    if pairs.len() == k * (k - 1) / 2 {
        Ok(GroupClass::FreeAbelian(k))
    } else {
        Err((
            rels.len() - 1,
            format!("commutators cover {} of {} generator pairs; partially commutative groups are not supported", pairs.len(), k * (k - 1) / 2),
        ))
    }
}

fn klein_mul((m1, n1): (i64, i64), (m2, n2): (i64, i64)) -> (i64, i64) {
    let s = if n1.rem_euclid(2) == 0 { 1 } else { -1 };
    (m1 + s * m2, n1 + n2)
}

pub fn reduce_word(spec: &HitSpec, w: &Word) -> NormalForm {
    match spec.group_class {
        GroupClass::FreeAbelian(k) => {
            let mut c = vec![0i64; k];
            for l in &w.letters {
                c[l.gen] += l.sign();
            }
            NormalForm::CountVector(c)
        }
        GroupClass::Free(_) => NormalForm::ReducedWord(Word { letters: free_reduce(&w.letters) }),
        GroupClass::KleinSemidirect { flipped, .. } => {
            let (m, n) = w.letters.iter().fold((0, 0), |acc, l| {
                let g = if l.gen == flipped { (l.sign(), 0) } else { (0, l.sign()) };
                klein_mul(acc, g)
            });
            NormalForm::SemidirectPair(m, n)
        }
    }
}

/// Group product of two normal forms from the same spec.
pub fn multiply(a: &NormalForm, b: &NormalForm) -> NormalForm {
    match (a, b) {
        (NormalForm::CountVector(x), NormalForm::CountVector(y)) => {
            NormalForm::CountVector(x.iter().zip(y).map(|(p, q)| p + q).collect())
        }
        (NormalForm::ReducedWord(x), NormalForm::ReducedWord(y)) => {
            NormalForm::ReducedWord(Word { letters: free_reduce(&x.concat(y).letters) })
        }
        (NormalForm::SemidirectPair(m1, n1), NormalForm::SemidirectPair(m2, n2)) => {
            let (m, n) = klein_mul((*m1, *n1), (*m2, *n2));
            NormalForm::SemidirectPair(m, n)
        }
        _ => panic!("normal forms from different group classes"),
    }
}

fn power(gen: usize, e: i64) -> impl Iterator<Item = Letter> {
    let l = Letter { gen, inv: e < 0 };
    core::iter::repeat(l).take(e.unsigned_abs() as usize)
}

/// Canonical word representing a normal form: `g0^c0 g1^c1 ...`, the reduced
/// word itself, or `flipped^m flipper^n`.
pub fn word_of(spec: &HitSpec, nf: &NormalForm) -> Word {
    match (nf, spec.group_class) {
        (NormalForm::CountVector(c), _) => {
            Word { letters: c.iter().enumerate().flat_map(|(g, &e)| power(g, e)).collect() }
        }
        (NormalForm::ReducedWord(w), _) => w.clone(),
        (NormalForm::SemidirectPair(m, n), GroupClass::KleinSemidirect { flipped, flipper }) => {
            Word { letters: power(flipped, *m).chain(power(flipper, *n)).collect() }
        }
        (NormalForm::SemidirectPair(..), _) => panic!("semidirect normal form on a non-Klein spec"),
    }
}

/// Length of the canonical representative.
pub fn normal_form_len(nf: &NormalForm) -> usize {
    match nf {
        NormalForm::CountVector(c) => c.iter().map(|x| x.unsigned_abs() as usize).sum(),
        NormalForm::ReducedWord(w) => w.len(),
        NormalForm::SemidirectPair(m, n) => (m.unsigned_abs() + n.unsigned_abs()) as usize,
    }
}

pub fn words_equal(spec: &HitSpec, w1: &Word, w2: &Word) -> bool {
    reduce_word(spec, w1) == reduce_word(spec, w2)
}

/// All words of length 1..=max_len in shortlex order. Letter order is
/// `g0, g0^-1, g1, g1^-1, ...` (inverses only when requested).
pub fn enumerate_words(spec: &HitSpec, max_len: usize, include_inverses: bool) -> Result<Vec<Word>, GroupError> {
    if max_len < 1 {
        return Err(GroupError::MaxLenTooSmall);
    }
    let alphabet: Vec<Letter> = (0..spec.rank())
        .flat_map(|g| {
            let inv = include_inverses.then_some(Letter::inverse_of(g));
            core::iter::once(Letter::new(g)).chain(inv)
        })
        .collect();
    let mut out = Vec::new();
    let mut layer: Vec<Vec<Letter>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * alphabet.len());
        for w in &layer {
            for &l in &alphabet {
                let mut v = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned().map(Word::from_letters));
        layer = next;
    }
    Ok(out)
}

/// Enumerated words whose normal form is as long as the word itself, i.e.
/// words that do not cancel. For Klein at length 2 this drops
/// `a a^-1, a^-1 a, b b^-1, b^-1 b` and leaves 16 words.
pub fn training_words(spec: &HitSpec, max_len: usize, include_inverses: bool) -> Result<Vec<Word>, GroupError> {
    Ok(enumerate_words(spec, max_len, include_inverses)?
        .into_iter()
        .filter(|w| normal_form_len(&reduce_word(spec, w)) == w.len())
        .collect())
}

/// No flipper letter precedes a flipped letter.
pub fn is_canonical_klein(spec: &HitSpec, w: &Word) -> Result<bool, GroupError> {
    let GroupClass::KleinSemidirect { flipper, .. } = spec.group_class else {
        return Err(GroupError::WrongClass("Klein"));
    };
    let first_flipper = w.letters.iter().position(|l| l.gen == flipper);
    Ok(match first_flipper {
        None => true,
        Some(i) => w.letters[i..].iter().all(|l| l.gen == flipper),
    })
}
