use hitnet_core::hit_spec::*;

const TORUS: &str = include_str!("../../../specs/torus.hit");
const WEDGE: &str = include_str!("../../../specs/wedge.hit");
const KLEIN: &str = include_str!("../../../specs/klein.hit");

fn specs() -> Vec<HitSpec> {
    [TORUS, WEDGE, KLEIN].iter().map(|s| parse_hit_spec(s).unwrap()).collect()
}

fn w(spec: &HitSpec, s: &str) -> Word {
    spec.parse_word(s).unwrap()
}

#[test]
fn classifies_shipped_specs() {
    let s = specs();
    assert_eq!(s[0].group_class, GroupClass::FreeAbelian(2));
    assert_eq!(s[0].dimension, 3);
    assert_eq!(s[1].group_class, GroupClass::Free(2));
    assert_eq!(s[2].group_class, GroupClass::KleinSemidirect { flipped: 0, flipper: 1 });
    assert_eq!(s[2].dimension, 4);
}

#[test]
fn klein_classification_ignores_names() {
    let src = "space k dim 4\ngenerator x\ngenerator y\nrelation x y x^-1 = y^-1\n";
    let s = parse_hit_spec(src).unwrap();
    assert_eq!(s.group_class, GroupClass::KleinSemidirect { flipped: 1, flipper: 0 });
    // Relator form and inverted conjugation are the same presentation.
    let src = "space k dim 4\ngenerator p q\nrelation q^-1 p q p = e\n";
    let s = parse_hit_spec(src).unwrap();
    assert_eq!(s.group_class, GroupClass::KleinSemidirect { flipped: 0, flipper: 1 });
}

#[test]
fn commutator_forms() {
    for rel in ["a b = b a", "a b a^-1 b^-1 = e", "b a = a b", "a^-1 b^-1 a b = e"] {
        let src = format!("space t dim 3\ngenerator a\ngenerator b\nrelation {rel}\n");
        assert_eq!(parse_hit_spec(&src).unwrap().group_class, GroupClass::FreeAbelian(2), "{rel}");
    }
    let src = "space t dim 3\ngenerator a b c\nrelation a b = b a\nrelation a c = c a\nrelation b c = c b\n";
    assert_eq!(parse_hit_spec(src).unwrap().group_class, GroupClass::FreeAbelian(3));
}

#[test]
fn parse_errors_carry_position() {
    let e = parse_hit_spec("space t dim 3\ngenerator a\ngenerator a\n").unwrap_err();
    assert_eq!((e.line, e.col), (3, 11));
    assert!(matches!(e.kind, ParseErrorKind::DuplicateGenerator(_)));

    let e = parse_hit_spec("space t dim 3\ngenerator a\nrelation a c = c a\n").unwrap_err();
    assert_eq!((e.line, e.col), (3, 12));
    assert!(matches!(e.kind, ParseErrorKind::UnknownGenerator(ref g) if g == "c"));

    let e = parse_hit_spec("space t dim 3\ngenerator a b\nrelation a a = b\n").unwrap_err();
    assert_eq!(e.line, 3);
    assert!(matches!(e.kind, ParseErrorKind::UnsupportedRelation(_)));

    let e = parse_hit_spec("space t dim 5\n").unwrap_err();
    assert_eq!((e.line, e.col), (1, 13));

    let e = parse_hit_spec("generator a\n  bogus line\n").unwrap_err();
    assert_eq!((e.line, e.col), (2, 3));

    assert!(parse_hit_spec("generator a\n").is_err());
    assert!(parse_hit_spec("space t dim 3\ngenerator a b\nrelation a b\n").is_err());
}

#[test]
fn comments_and_blank_lines() {
    let s = parse_hit_spec("# hi\n\nspace t dim 3 # trailing\ngenerator a\n").unwrap();
    assert_eq!(s.group_class, GroupClass::Free(1));
    assert_eq!(s.embedding, "t");
}

#[test]
fn reduce_examples() {
    let s = specs();
    assert_eq!(reduce_word(&s[0], &w(&s[0], "a b a")), NormalForm::CountVector(vec![2, 1]));
    assert_eq!(reduce_word(&s[1], &w(&s[1], "a b b^-1 a")), NormalForm::ReducedWord(w(&s[1], "a a")));
    assert_eq!(reduce_word(&s[2], &w(&s[2], "b a b^-1")), NormalForm::SemidirectPair(-1, 0));
    assert_eq!(reduce_word(&s[2], &w(&s[2], "b a b^-1")), reduce_word(&s[2], &w(&s[2], "a^-1")));
}

#[test]
fn words_equal_examples() {
    let s = specs();
    assert!(words_equal(&s[0], &w(&s[0], "a b"), &w(&s[0], "b a")));
    assert!(!words_equal(&s[1], &w(&s[1], "a b"), &w(&s[1], "b a")));
    for sp in &s {
        let x = w(sp, "a b^-1 a");
        assert!(words_equal(sp, &x, &x.concat(&Word::identity())));
    }
}

#[test]
fn enumeration() {
    let s = specs();
    let words = enumerate_words(&s[0], 2, false).unwrap();
    let names: Vec<String> = words.iter().map(|x| s[0].compact_word(x)).collect();
    assert_eq!(names, ["a", "b", "aa", "ab", "ba", "bb"]);
    assert_eq!(enumerate_words(&s[2], 2, true).unwrap().len(), 20);
    assert_eq!(enumerate_words(&s[0], 3, false).unwrap().len(), 2 + 4 + 8);
    assert!(enumerate_words(&s[0], 0, false).is_err());

    let one = parse_hit_spec("space c dim 3\ngenerator a\n").unwrap();
    assert_eq!(enumerate_words(&one, 1, false).unwrap(), vec![w(&one, "a")]);
}

#[test]
fn klein_training_set_is_sixteen() {
    let k = &specs()[2];
    let tw = training_words(k, 2, true).unwrap();
    assert_eq!(tw.len(), 16);
    // Brute-force oracle: drop words that freely cancel somewhere.
    let raw = enumerate_words(k, 2, true).unwrap();
    let expect: Vec<Word> = raw
        .into_iter()
        .filter(|x| x.letters.windows(2).all(|p| p[0] != p[1].inverse()))
        .collect();
    assert_eq!(tw, expect);
}

#[test]
fn canonical_klein() {
    let k = &specs()[2];
    assert!(is_canonical_klein(k, &w(k, "aabb")).unwrap());
    assert!(!is_canonical_klein(k, &w(k, "abab")).unwrap());
    assert!(!is_canonical_klein(k, &w(k, "baa")).unwrap());
    assert!(is_canonical_klein(k, &Word::identity()).unwrap());
    assert!(is_canonical_klein(&specs()[0], &Word::identity()).is_err());
}

#[test]
fn homomorphism_and_inverse_law_up_to_five() {
    for sp in specs() {
        let words = enumerate_words(&sp, 5, true).unwrap();
        let short = enumerate_words(&sp, 2, true).unwrap();
        let e = reduce_word(&sp, &Word::identity());
        for x in &words {
            let nx = reduce_word(&sp, x);
            assert_eq!(reduce_word(&sp, &x.concat(&x.inverse())), e);
            assert_eq!(reduce_word(&sp, &word_of(&sp, &nx)), nx);
            for y in &short {
                let lhs = reduce_word(&sp, &x.concat(y));
                assert_eq!(lhs, multiply(&nx, &reduce_word(&sp, y)));
            }
        }
        // Split every length-5 word at every cut point.
        for x in words.iter().filter(|x| x.len() == 5) {
            for cut in 0..=5 {
                let a = Word::from_letters(x.letters[..cut].to_vec());
                let b = Word::from_letters(x.letters[cut..].to_vec());
                assert_eq!(reduce_word(&sp, x), multiply(&reduce_word(&sp, &a), &reduce_word(&sp, &b)));
            }
        }
    }
}

#[test]
fn free_reduction_confluent() {
    let s = &specs()[1];
    // Right-to-left stack reduction must agree with the left-to-right one.
    for x in enumerate_words(s, 6, true).unwrap() {
        let mut st: Vec<Letter> = Vec::new();
        for &l in x.letters.iter().rev() {
            if st.last() == Some(&l.inverse()) {
                st.pop();
            } else {
                st.push(l);
            }
        }
        st.reverse();
        assert_eq!(reduce_word(s, &x), NormalForm::ReducedWord(Word::from_letters(st)));
    }
}

#[test]
fn balanced_boundaries() {
    let k = &specs()[2];
    let b = k.relations[0].balanced();
    assert_eq!(k.format_word(&b.lhs), "b a");
    assert_eq!(k.format_word(&b.rhs), "a^-1 b");
    let t = &specs()[0];
    let b = t.relations[0].balanced();
    assert_eq!((t.format_word(&b.lhs), t.format_word(&b.rhs)), ("a b".into(), "b a".into()));
}

#[test]
fn word_syntax_round_trip() {
    let k = &specs()[2];
    let x = w(k, "a b^-1 a");
    assert_eq!(k.format_word(&x), "a b^-1 a");
    assert_eq!(w(k, "ab^-1a"), x);
    assert_eq!(k.format_word(&Word::identity()), "e");
    assert!(k.parse_word("a c").is_err());
}
