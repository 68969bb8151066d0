//! Metric CSV, JSON summaries and table emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hitnet_core::decoders::{DecoderKind, TypeTag};
use hitnet_core::hit_spec::{NormalForm, Word};
use hitnet_core::metrics::MetricRecord;
use hitnet_core::probe::Witness;
use serde::Serialize;

use crate::experiment::EvalReport;

#[derive(Serialize)]
struct CsvRow<'a> {
    space: &'a str,
    arch: &'a str,
    #[serde(rename = "type")]
    type_tag: &'a str,
    seed: u64,
    word: &'a str,
    #[serde(rename = "L")]
    len: usize,
    metric: &'a str,
    value: f64,
}

pub fn write_metric_csv<'a>(path: &Path, records: impl IntoIterator<Item = &'a MetricRecord>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut any = false;
    for r in records {
        any = true;
        w.serialize(CsvRow {
            space: &r.space,
            arch: &r.arch,
            type_tag: &r.type_tag,
            seed: r.seed,
            word: &r.word,
            len: r.len,
            metric: &r.metric,
            value: r.value,
        })?;
    }
    if !any {
        w.write_record(["space", "arch", "type", "seed", "word", "L", "metric", "value"])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
pub struct WitnessJson {
    pub space: String,
    pub arch: String,
    pub w1: String,
    pub w2: String,
    pub w2prime: String,
    pub class: String,
    pub delta: f64,
    pub valid: bool,
}

pub fn witness_json(space: &str, arch: DecoderKind, fmt: impl Fn(&Word) -> String, w: &Witness, valid: bool) -> WitnessJson {
    WitnessJson {
        space: space.into(),
        arch: arch.name().into(),
        w1: fmt(&w.w1),
        w2: fmt(&w.w2),
        w2prime: fmt(&w.w2prime),
        class: match &w.class {
            NormalForm::CountVector(v) => format!("{v:?}"),
            NormalForm::ReducedWord(r) => fmt(r),
            NormalForm::SemidirectPair(m, n) => format!("({m},{n})"),
        },
        delta: w.delta,
        valid,
    }
}

#[derive(Serialize)]
struct ScalingJson {
    arch: String,
    #[serde(rename = "type")]
    type_tag: String,
    #[serde(rename = "L")]
    len: usize,
    mean: f64,
    std: f64,
}

#[derive(Serialize)]
struct CellJson {
    arch: String,
    seed: u64,
    best_loss: f64,
    epochs_run: usize,
    stopped_early: bool,
    error: Option<String>,
}

#[derive(Serialize)]
struct ReportJson {
    space: String,
    archs: Vec<String>,
    seeds: Vec<u64>,
    lengths: Vec<usize>,
    params: Vec<(String, usize)>,
    cells: Vec<CellJson>,
    scaling: Vec<ScalingJson>,
    wall_clock_secs: f64,
}

pub fn report_json(r: &EvalReport) -> String {
    let j = ReportJson {
        space: r.space.clone(),
        archs: r.archs.iter().map(|a| a.name().into()).collect(),
        seeds: r.seeds.clone(),
        lengths: r.lengths.clone(),
        params: r.params.iter().map(|(a, n)| (a.name().into(), *n)).collect(),
        cells: r
            .cells
            .iter()
            .map(|c| CellJson {
                arch: c.arch.name().into(),
                seed: c.seed,
                best_loss: c.best_loss,
                epochs_run: c.train_log.len(),
                stopped_early: c.train_log.last().is_some_and(|t| t.early_stop),
                error: c.error.clone(),
            })
            .collect(),
        scaling: r
            .scaling
            .iter()
            .map(|s| ScalingJson { arch: s.arch.name().into(), type_tag: s.arch.type_tag().to_string(), len: s.len, mean: s.mean, std: s.std })
            .collect(),
        wall_clock_secs: r.wall_clock_secs,
    };
    serde_json::to_string_pretty(&j).expect("plain data")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl TableFormat {
    fn ext(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "md",
        }
    }
}

/// A table: named columns, rows keyed by architecture, cells as
/// `(mean, std)` or a gap.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub panels: Vec<Panel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<(DecoderKind, Vec<Option<(f64, f64)>>)>,
    pub percent: bool,
}

fn cell_text(c: Option<(f64, f64)>, percent: bool) -> String {
    match c {
        None => "n/a".into(),
        Some((m, s)) if percent => format!("{:.1}±{:.1}", 100.0 * m, 100.0 * s),
        Some((m, s)) if m.fract() == 0.0 && s == 0.0 && m.abs() >= 1.0 => format!("{m:.0}"),
        Some((m, s)) if m.abs() >= 100.0 => format!("{m:.1}±{s:.1}"),
        Some((m, s)) => format!("{m:.4}±{s:.4}"),
    }
}

impl Table {
    pub fn markdown(&self) -> String {
        let mut out = format!("# {}\n", self.name);
        for p in &self.panels {
            let _ = write!(out, "\n## {}\n\n| Arch | Type |", p.title);
            for c in &p.columns {
                let _ = write!(out, " {c} |");
            }
            out.push_str("\n|---|---|");
            out.push_str(&"---|".repeat(p.columns.len()));
            out.push('\n');
            let mut last: Option<TypeTag> = None;
            for tag in [TypeTag::A, TypeTag::B] {
                for (arch, cells) in p.rows.iter().filter(|r| r.0.type_tag() == tag) {
                    if last.is_some_and(|t| t != tag) {
                        out.push_str("| | |");
                        out.push_str(&" |".repeat(p.columns.len()));
                        out.push('\n');
                    }
                    last = Some(tag);
                    let _ = write!(out, "| {} | {} |", arch.name(), tag);
                    for c in cells {
                        let _ = write!(out, " {} |", cell_text(*c, p.percent));
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["table", "panel", "arch", "type", "column", "mean", "std"])?;
        for p in &self.panels {
            for tag in [TypeTag::A, TypeTag::B] {
                for (arch, cells) in p.rows.iter().filter(|r| r.0.type_tag() == tag) {
                    for (col, c) in p.columns.iter().zip(cells) {
                        let (m, s) = c.map_or((String::new(), String::new()), |(m, s)| (m.to_string(), s.to_string()));
                        w.write_record([self.name.as_str(), &p.title, arch.name(), &tag.to_string(), col, &m, &s])?;
                    }
                }
            }
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

fn length_panel(r: &EvalReport, title: &str, metric: &str, percent: bool) -> Panel {
    Panel {
        title: title.into(),
        columns: r.lengths.iter().map(|l| format!("L={l}")).collect(),
        rows: r.archs.iter().map(|&a| (a, r.lengths.iter().map(|&l| r.summary(a, metric, l)).collect())).collect(),
        percent,
    }
}

/// Build the table analogues for a report's space.
pub fn tables(r: &EvalReport) -> Vec<Table> {
    let space = r.space.as_str();
    let has = |m: &str| r.records().any(|x| x.metric == m);
    let mut out = Vec::new();
    let mut main = Table { name: format!("{space}_dbar"), panels: Vec::new() };
    if has("dbar_canonical") || has("dbar_noncanonical") {
        main.panels.push(length_panel(r, "per-segment chamfer, canonical words", "dbar_canonical", false));
        main.panels.push(length_panel(r, "per-segment chamfer, non-canonical words", "dbar_noncanonical", false));
    } else {
        main.panels.push(length_panel(r, "per-segment chamfer", "dbar", false));
    }
    if has("circle_acc") {
        main.panels.push(length_panel(r, "circle accuracy (%)", "circle_acc", true));
    }
    out.push(main);
    if has("coh_commutativity") {
        let cols = [("Comp.", "coh_composition"), ("Comm.", "coh_commutativity"), ("Reorder", "coh_reorder"), ("Noncan.", "coh_noncanonical")];
        out.push(Table {
            name: format!("{space}_coherence"),
            panels: vec![Panel {
                title: "coherence battery".into(),
                columns: cols.iter().map(|c| c.0.into()).collect(),
                rows: r.archs.iter().map(|&a| (a, cols.iter().map(|c| r.summary(a, c.1, 0)).collect())).collect(),
                percent: false,
            }],
        });
    }
    if has("order_sensitivity") {
        out.push(Table {
            name: format!("{space}_order_sensitivity"),
            panels: vec![Panel {
                title: "pairs distinguished (%)".into(),
                columns: vec!["distinguished".into()],
                rows: r.archs.iter().map(|&a| (a, vec![r.summary(a, "order_sensitivity", 0)])).collect(),
                percent: true,
            }],
        });
    }
    let cols = [("params", "params"), ("train loss", "train_loss"), ("epochs", "epochs_run")];
    out.push(Table {
        name: format!("{space}_training"),
        panels: vec![Panel {
            title: "training".into(),
            columns: cols.iter().map(|c| c.0.into()).collect(),
            rows: r.archs.iter().map(|&a| (a, cols.iter().map(|c| r.summary(a, c.1, 0)).collect())).collect(),
            percent: false,
        }],
    });
    out
}

pub fn emit_tables(r: &EvalReport, dir: &Path, format: TableFormat) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for t in tables(r) {
        let p = dir.join(format!("{}.{}", t.name, format.ext()));
        let text = match format {
            TableFormat::Csv => t.csv()?,
            TableFormat::Markdown => t.markdown(),
        };
        fs::write(&p, text)?;
        paths.push(p);
    }
    Ok(paths)
}
