//! HIT specifications: generators, relations and the exact word problem.
//!
//! Concrete syntax (one declaration per line, `#` starts a comment):
//!
//! ```text
//! space klein dim 4
//! generator a
//! generator b
//! relation b a b^-1 = a^-1
//! embedding klein scale=2 u=b v=a
//! ```
//!
//! Words are whitespace-separated generator names, each optionally suffixed
//! with `^-1`. The identity is written `e`.

mod group;
mod parse;

pub use group::{GroupError, 
    enumerate_words, is_canonical_klein, multiply, normal_form_len, reduce_word, training_words,
    word_of, words_equal,
};
pub use parse::{parse_hit_spec, ParseError, ParseErrorKind};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// A signed generator occurrence. `gen` indexes `HitSpec::generators`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub gen: usize,
    pub inv: bool,
}

impl Letter {
    pub fn new(gen: usize) -> Self {
        Letter { gen, inv: false }
    }

    pub fn inverse_of(gen: usize) -> Self {
        Letter { gen, inv: true }
    }

    pub fn sign(self) -> i64 {
        if self.inv {
            -1
        } else {
            1
        }
    }

    pub fn inverse(self) -> Self {
        Letter { gen: self.gen, inv: !self.inv }
    }

    /// Dense index `2*gen + inv`, used as a token id.
    pub fn token(self) -> usize {
        2 * self.gen + self.inv as usize
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    pub letters: Vec<Letter>,
}

impl Word {
    pub fn identity() -> Self {
        Word { letters: Vec::new() }
    }

    pub fn from_letters(letters: Vec<Letter>) -> Self {
        Word { letters }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word { letters }
    }

    pub fn inverse(&self) -> Word {
        Word { letters: self.letters.iter().rev().map(|l| l.inverse()).collect() }
    }

    pub fn has_inverses(&self) -> bool {
        self.letters.iter().any(|l| l.inv)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub lhs: Word,
    pub rhs: Word,
}

impl Relation {
    /// Move trailing letters across the equals sign until both sides have
    /// equal length (or differ by one). `b a b^-1 = a^-1` becomes
    /// `b a = a^-1 b`; these are the boundary words of the 2-cell.
    pub fn balanced(&self) -> Relation {
        let mut lhs = self.lhs.letters.clone();
        let mut rhs = self.rhs.letters.clone();
        while lhs.len() > rhs.len() + 1 {
            let l = lhs.pop().unwrap();
            rhs.push(l.inverse());
        }
        while rhs.len() > lhs.len() + 1 {
            let l = rhs.pop().unwrap();
            lhs.push(l.inverse());
        }
        Relation { lhs: Word { letters: lhs }, rhs: Word { letters: rhs } }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupClass {
    FreeAbelian(usize),
    Free(usize),
    /// `flipper * flipped * flipper^-1 = flipped^-1`; the group is Z x| Z
    /// with normal forms (m, n) = flipped^m flipper^n.
    KleinSemidirect { flipped: usize, flipper: usize },
}

impl GroupClass {
    pub fn rank(&self) -> usize {
        match *self {
            GroupClass::FreeAbelian(k) | GroupClass::Free(k) => k,
            GroupClass::KleinSemidirect { .. } => 2,
        }
    }

    pub fn is_abelian(&self) -> bool {
        matches!(self, GroupClass::FreeAbelian(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormalForm {
    CountVector(Vec<i64>),
    ReducedWord(Word),
    SemidirectPair(i64, i64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HitSpec {
    pub name: String,
    pub dimension: usize,
    pub generators: Vec<String>,
    pub relations: Vec<Relation>,
    /// Embedding selector (`torus`, `wedge`, `klein`).
    pub embedding: String,
    /// `key=value` arguments following the selector, in file order.
    pub embedding_params: Vec<(String, String)>,
    pub group_class: GroupClass,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WordError {
    UnknownGenerator(String),
    BadToken(String),
}

impl fmt::Display for WordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WordError::UnknownGenerator(g) => write!(f, "unknown generator `{g}`"),
            WordError::BadToken(t) => write!(f, "malformed letter `{t}`"),
        }
    }
}

impl core::error::Error for WordError {}

impl HitSpec {
    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g == name)
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn embedding_param(&self, key: &str) -> Option<&str> {
        self.embedding_params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Parse `a b^-1 a`. Also accepts run-together single-character
    /// generators (`abab`, `ab^-1`) when every generator name is one char.
    pub fn parse_word(&self, text: &str) -> Result<Word, WordError> {
        let text = text.trim();
        if text.is_empty() || text == "e" {
            return Ok(Word::identity());
        }
        let mut letters = Vec::new();
        for tok in text.split_whitespace() {
            if let Ok(Some(l)) = self.parse_letter(tok) {
                letters.push(l);
                continue;
            }
            // Run-together form.
            let single = self.generators.iter().all(|g| g.chars().count() == 1);
            if !single {
                return Err(self.parse_letter(tok).err().unwrap_or(WordError::UnknownGenerator(tok.into())));
            }
            let mut rest = tok;
            while let Some(c) = rest.chars().next() {
                let gen = self
                    .generator_index(&rest[..c.len_utf8()])
                    .ok_or_else(|| WordError::UnknownGenerator(c.into()))?;
                rest = &rest[c.len_utf8()..];
                let inv = if let Some(r) = rest.strip_prefix("^-1") {
                    rest = r;
                    true
                } else {
                    false
                };
                letters.push(Letter { gen, inv });
            }
        }
        Ok(Word { letters })
    }

    fn parse_letter(&self, tok: &str) -> Result<Option<Letter>, WordError> {
        let (name, inv) = match tok.strip_suffix("^-1") {
            Some(n) => (n, true),
            None => (tok, false),
        };
        if name.is_empty() || name.contains('^') {
            return Err(WordError::BadToken(tok.into()));
        }
        Ok(self.generator_index(name).map(|gen| Letter { gen, inv }))
    }

    pub fn format_word(&self, w: &Word) -> String {
        if w.is_empty() {
            return "e".into();
        }
        let mut s = String::new();
        for (i, l) in w.letters.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&self.generators[l.gen]);
            if l.inv {
                s.push_str("^-1");
            }
        }
        s
    }

    /// Compact form without spaces when all generator names are one char
    /// (`ab^-1a`); used for file names and table keys.
    pub fn compact_word(&self, w: &Word) -> String {
        if self.generators.iter().any(|g| g.chars().count() != 1) {
            return self.format_word(w);
        }
        self.format_word(w).replace(' ', "")
    }

    pub fn word_valid(&self, w: &Word) -> bool {
        w.letters.iter().all(|l| l.gen < self.generators.len())
    }
}
