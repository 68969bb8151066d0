mod common;

use std::collections::BTreeSet;

use common::{scratch, tiny};
use hitnet_core::decoders::{DecoderKind, TypeTag};
use hitnet_core::hit_spec::{is_canonical_klein, reduce_word};
use hitnet_harness::experiment::{self, EvalReport};
use hitnet_harness::plots::{scaling_svg, series, trend};
use hitnet_harness::report::{self, report_json, tables, TableFormat};
use hitnet_harness::{checkpoint, cli, run_experiment};

fn csv_bytes(r: &EvalReport, name: &str) -> Vec<u8> {
    let p = scratch(name).join("r.csv");
    report::write_metric_csv(&p, r.records()).unwrap();
    std::fs::read(p).unwrap()
}

fn without_clock(json: &str) -> String {
    json.lines().filter(|l| !l.contains("wall_clock_secs")).collect::<Vec<_>>().join("\n")
}

#[test]
fn identical_config_gives_identical_outputs() {
    let cfg = tiny("torus", "transport, transformer_wc");
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(csv_bytes(&a, "det-a"), csv_bytes(&b, "det-b"));
    assert_eq!(without_clock(&report_json(&a)), without_clock(&report_json(&b)));

    let mut other = cfg.clone();
    other.seeds = vec![6];
    let c = run_experiment(&other).unwrap();
    assert_ne!(csv_bytes(&a, "det-a2"), csv_bytes(&c, "det-c"));
}

#[test]
fn metric_csv_has_fixed_columns() {
    let r = run_experiment(&tiny("wedge", "transport")).unwrap();
    let text = String::from_utf8(csv_bytes(&r, "cols")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("space,arch,type,seed,word,L,metric,value"));
    let metrics: BTreeSet<&str> = lines.map(|l| l.split(',').nth(6).unwrap()).collect();
    for m in ["dbar", "circle_acc", "order_sensitivity", "train_loss", "epochs_run", "params"] {
        assert!(metrics.contains(m), "missing {m}: {metrics:?}");
    }
}

#[test]
fn test_words_never_overlap_training() {
    for space in ["torus", "wedge", "klein"] {
        let plan = experiment::plan(&tiny(space, "transport")).unwrap();
        for set in &plan.sets {
            assert!(!set.words.is_empty());
            for w in &set.words {
                assert_eq!(w.len(), set.len);
                assert!(w.letters.windows(2).all(|p| p[0] != p[1].inverse()), "{space}: {w:?} not reduced");
                if set.len > 2 {
                    assert!(!plan.train_words.contains(w));
                }
            }
            let distinct: BTreeSet<_> = set.words.iter().collect();
            assert_eq!(distinct.len(), set.words.len());
        }
    }
}

#[test]
fn klein_test_sets_balance_canonical_words() {
    let plan = experiment::plan(&tiny("klein", "transport")).unwrap();
    for set in plan.sets.iter().filter(|s| s.len > 2) {
        let canon = set.canonical.iter().filter(|c| **c == Some(true)).count();
        assert_eq!(2 * canon, set.words.len(), "L={}", set.len);
        for (w, c) in set.words.iter().zip(&set.canonical) {
            assert_eq!(is_canonical_klein(&plan.spec, w).unwrap(), c.unwrap());
        }
    }
}

#[test]
fn tables_put_type_a_rows_first() {
    let r = run_experiment(&tiny("torus", "transport, cover, homotopy, transformer_wc")).unwrap();
    let ts = tables(&r);
    let names: Vec<&str> = ts.iter().map(|t| t.name.as_str()).collect();
    assert_eq!(names, ["torus_dbar", "torus_coherence", "torus_training"]);
    let md = ts[0].markdown();
    let rows: Vec<&str> = md.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| Arch")).collect();
    let tags: Vec<&str> = rows.iter().map(|l| l.split('|').nth(2).unwrap().trim()).collect();
    assert_eq!(tags, ["A", "A", "", "B", "B"], "{md}");
    assert!(rows[0].contains('±'));

    let csv = ts[0].csv().unwrap();
    assert_eq!(csv.lines().next(), Some("table,panel,arch,type,column,mean,std"));
    // 4 archs x 3 lengths.
    assert_eq!(csv.lines().count(), 1 + 12);
    let dir = scratch("tables");
    let files = report::emit_tables(&r, &dir, TableFormat::Markdown).unwrap();
    assert_eq!(files.len(), 3);
}

#[test]
fn empty_report_gives_header_only_tables() {
    let r = EvalReport {
        space: "torus".into(),
        archs: vec![],
        seeds: vec![],
        lengths: vec![3],
        cells: vec![],
        scaling: vec![],
        params: vec![],
        wall_clock_secs: 0.0,
    };
    let ts = tables(&r);
    let md = ts[0].markdown();
    assert!(md.contains("| Arch | Type | L=3 |"));
    assert!(!md.lines().any(|l| l.starts_with("| ") && !l.starts_with("| Arch")));
    assert_eq!(ts[0].csv().unwrap().lines().count(), 1);
    assert!(scaling_svg("empty", &[], &[]).ends_with("</svg>\n"));
}

#[test]
fn plot_matches_scaling_rows() {
    let r = run_experiment(&tiny("wedge", "transport, transformer_wc")).unwrap();
    let svg = scaling_svg("t", &r.scaling, &r.archs);
    for row in &r.scaling {
        let needle = format!(r#"data-arch="{}" data-len="{}" data-value="{}""#, row.arch.name(), row.len, row.mean);
        assert!(svg.contains(&needle), "missing {needle}");
    }
    let circles = svg.matches("<circle").count();
    assert_eq!(circles, r.scaling.len());
    for &a in &r.archs {
        let vals: Vec<f64> = series(&r.scaling, a).iter().map(|p| p.1).collect();
        assert!(svg.contains(&format!(r#"data-arch="{}" data-trend="{}""#, a.name(), trend(&vals))));
        let line = svg.lines().find(|l| l.contains("polyline") && l.contains(&format!(r#""{}""#, a.name()))).unwrap();
        assert_eq!(line.contains("stroke-dasharray"), a.type_tag() == TypeTag::A);
    }
    assert_eq!(trend(&[1.0, 1.0]), "flat");
    assert_eq!(trend(&[1.0, 2.0, 2.0]), "rising");
    assert_eq!(trend(&[3.0, 2.0]), "falling");
    assert_eq!(trend(&[1.0, 2.0, 1.0]), "mixed");
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let cfg = tiny("klein", "homotopy, transport_attn, sequential_gru, cover");
    let plan = experiment::plan(&cfg).unwrap();
    for kind in [DecoderKind::Homotopy, DecoderKind::TransportAttention, DecoderKind::SequentialGRU, DecoderKind::Cover] {
        let (dec, _, _) = experiment::train_cell(&plan, kind, 3, &cfg.hyper, &cfg.train_config()).unwrap();
        let text = checkpoint::to_string(&dec);
        let back = checkpoint::from_str(&text, &plan.spec).unwrap();
        assert_eq!(checkpoint::to_string(&back), text);
        for w in plan.sets.iter().flat_map(|s| &s.words).take(10) {
            let (x, y) = (dec.decode_raw(w).unwrap(), back.decode_raw(w).unwrap());
            assert!(x.data.iter().zip(&y.data).all(|(p, q)| p.to_bits() == q.to_bits()), "{kind:?}");
        }

        let wrong_space = hitnet_core::parse_hit_spec(&std::fs::read_to_string(common::spec_path("torus")).unwrap()).unwrap();
        assert!(checkpoint::from_str(&text, &wrong_space).is_err());
        let truncated: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        assert!(checkpoint::from_str(&truncated, &plan.spec).is_err());
        assert!(checkpoint::from_str(&text.replacen("checkpoint v1", "checkpoint v9", 1), &plan.spec).is_err());
    }
}

#[test]
fn witness_classes_agree_with_the_oracle() {
    let cfg = tiny("torus", "transformer_wc");
    let plan = experiment::plan(&cfg).unwrap();
    let (dec, _, _) = experiment::train_cell(&plan, DecoderKind::TransformerWC, 1, &cfg.hyper, &cfg.train_config()).unwrap();
    let w = hitnet_core::probe::counterexample_search(&dec, 2, 64).unwrap();
    assert!(w.is_valid(&dec));
    assert_eq!(reduce_word(&plan.spec, &w.w2), reduce_word(&plan.spec, &w.w2prime));
    let j = report::witness_json("torus", dec.kind, |x| plan.spec.format_word(x), &w, true);
    let hitnet_core::hit_spec::NormalForm::CountVector(v) = reduce_word(&plan.spec, &w.w2) else { panic!() };
    assert_eq!(j.class, format!("{v:?}"));
    assert!(j.delta > 1e-9);
}

#[test]
fn write_report_lays_out_the_output_tree() {
    let r = run_experiment(&tiny("torus", "transport")).unwrap();
    let dir = scratch("tree");
    cli::write_report(&r, &dir).unwrap();
    for f in ["report.csv", "report.json", "tables/torus_dbar.md", "tables/torus_dbar.csv", "plots/torus_scaling.svg", "checkpoints/torus_transport_5.ckpt"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(j["space"], "torus");
    assert_eq!(j["cells"][0]["epochs_run"], 3);
}
