use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::group::classify;
use super::{HitSpec, Letter, Relation, Word};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    DuplicateGenerator(String),
    UnknownGenerator(String),
    UnsupportedRelation(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.col)?;
        match &self.kind {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::DuplicateGenerator(g) => write!(f, "duplicate generator `{g}`"),
            ParseErrorKind::UnknownGenerator(g) => write!(f, "unknown generator `{g}`"),
            ParseErrorKind::UnsupportedRelation(m) => write!(f, "unsupported relation: {m}"),
        }
    }
}

impl core::error::Error for ParseError {}

struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokens(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Tok { text: &line[s..i], col: line[..s].chars().count() + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok { text: &line[s..], col: line[..s].chars().count() + 1 });
    }
    out
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn err(line: usize, col: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, col, kind }
}

fn syntax(line: usize, col: usize, msg: &str) -> ParseError {
    err(line, col, ParseErrorKind::Syntax(msg.to_string()))
}

struct RawRelation<'a> {
    line: usize,
    col: usize,
    lhs: Vec<Tok<'a>>,
    rhs: Vec<Tok<'a>>,
}

pub fn parse_hit_spec(text: &str) -> Result<HitSpec, ParseError> {
    let mut space: Option<(String, usize)> = None;
    let mut generators: Vec<String> = Vec::new();
    let mut raw_rel: Vec<RawRelation<'_>> = Vec::new();
    let mut embedding: Option<(String, Vec<(String, String)>)> = None;
    let mut last_line = 1;

    for (i, full) in text.lines().enumerate() {
        let ln = i + 1;
        last_line = ln;
        let line = match full.find('#') {
            Some(p) => &full[..p],
            None => full,
        };
        let toks = tokens(line);
        let Some(head) = toks.first() else { continue };
        match head.text {
            "space" => {
                if space.is_some() {
                    return Err(syntax(ln, head.col, "second `space` declaration"));
                }
                if toks.len() != 4 || toks[2].text != "dim" {
                    return Err(syntax(ln, head.col, "expected `space <name> dim <d>`"));
                }
                if !is_ident(toks[1].text) {
                    return Err(syntax(ln, toks[1].col, "space name must be an identifier"));
                }
                let d: usize = toks[3]
                    .text
                    .parse()
                    .map_err(|_| syntax(ln, toks[3].col, "dimension must be an integer"))?;
                if d != 3 && d != 4 {
                    return Err(syntax(ln, toks[3].col, "dimension must be 3 or 4"));
                }
                space = Some((toks[1].text.to_string(), d));
            }
            "generator" => {
                if toks.len() < 2 {
                    return Err(syntax(ln, head.col, "expected `generator <sym>`"));
                }
                for t in &toks[1..] {
                    if !is_ident(t.text) || t.text == "e" {
                        return Err(syntax(ln, t.col, "generator must be an identifier other than `e`"));
                    }
                    if generators.iter().any(|g| g == t.text) {
                        return Err(err(ln, t.col, ParseErrorKind::DuplicateGenerator(t.text.into())));
                    }
                    generators.push(t.text.to_string());
                }
            }
            "relation" => {
                let rest = &toks[1..];
                let Some(eq) = rest.iter().position(|t| t.text == "=") else {
                    return Err(syntax(ln, head.col, "expected `relation <word> = <word>`"));
                };
                if rest.iter().filter(|t| t.text == "=").count() > 1 {
                    return Err(syntax(ln, head.col, "more than one `=`"));
                }
                let mut rest: Vec<Tok<'_>> = tokens(line).into_iter().skip(1).collect();
                let rhs = rest.split_off(eq + 1);
                rest.pop();
                if rest.is_empty() || rhs.is_empty() {
                    return Err(syntax(ln, head.col, "both sides of a relation must be nonempty (use `e`)"));
                }
                raw_rel.push(RawRelation { line: ln, col: head.col, lhs: rest, rhs });
            }
            "embedding" => {
                if embedding.is_some() {
                    return Err(syntax(ln, head.col, "second `embedding` declaration"));
                }
                if toks.len() < 2 || !is_ident(toks[1].text) {
                    return Err(syntax(ln, head.col, "expected `embedding <token> [key=value ...]`"));
                }
                let mut params = Vec::new();
                for t in &toks[2..] {
                    match t.text.split_once('=') {
                        Some((k, v)) if !k.is_empty() && !v.is_empty() => {
                            params.push((k.to_string(), v.to_string()))
                        }
                        _ => return Err(syntax(ln, t.col, "expected `key=value`")),
                    }
                }
                embedding = Some((toks[1].text.to_string(), params));
            }
            other => {
                let _ = other;
                return Err(syntax(ln, head.col, "unknown declaration"));
            }
        }
    }

    let Some((name, dimension)) = space else {
        return Err(syntax(last_line, 1, "missing `space` declaration"));
    };
    if generators.is_empty() {
        return Err(syntax(last_line, 1, "no generators declared"));
    }
    if generators.len() > 4 {
        return Err(syntax(last_line, 1, "at most 4 generators are supported"));
    }

    let resolve = |toks: &[Tok<'_>], ln: usize| -> Result<Word, ParseError> {
        let mut letters = Vec::new();
        for t in toks {
            if t.text == "e" {
                if toks.len() != 1 {
                    return Err(syntax(ln, t.col, "`e` must stand alone"));
                }
                continue;
            }
            let (nm, inv) = match t.text.strip_suffix("^-1") {
                Some(n) => (n, true),
                None => (t.text, false),
            };
            if !is_ident(nm) {
                return Err(syntax(ln, t.col, "malformed letter"));
            }
            let gen = generators
                .iter()
                .position(|g| g == nm)
                .ok_or_else(|| err(ln, t.col, ParseErrorKind::UnknownGenerator(nm.into())))?;
            letters.push(Letter { gen, inv });
        }
        Ok(Word { letters })
    };

    let mut relations = Vec::new();
    for r in &raw_rel {
        let lhs = resolve(&r.lhs, r.line)?;
        let rhs = resolve(&r.rhs, r.line)?;
        if lhs.is_empty() && rhs.is_empty() {
            return Err(err(r.line, r.col, ParseErrorKind::UnsupportedRelation("trivial relation e = e".into())));
        }
        relations.push(Relation { lhs, rhs });
    }

    let group_class = classify(generators.len(), &relations).map_err(|(idx, msg)| {
        let (line, col) = raw_rel.get(idx).map(|r| (r.line, r.col)).unwrap_or((last_line, 1));
        err(line, col, ParseErrorKind::UnsupportedRelation(msg))
    })?;

    let (embedding, embedding_params) = embedding.unwrap_or_else(|| (name.clone(), Vec::new()));

    Ok(HitSpec { name, dimension, generators, relations, embedding, embedding_params, group_class })
}
