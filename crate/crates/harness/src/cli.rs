//! `hitnet` command line. Exit codes: 0 success, 1 validation error (bad
//! flags, config or spec), 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use hitnet_core::decoders::{Decoder, DecoderKind};
use hitnet_core::geometry::{ground_truth_loop, Space};
use hitnet_core::hit_spec::{training_words, HitSpec};
use hitnet_core::metrics::{coherence_battery, resampling_artifact_check};
use hitnet_core::probe::counterexample_search;
use hitnet_core::rng::Rng;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiment::{self, load_spec, EvalReport};
use crate::report::{self, TableFormat};
use crate::{ablation, checkpoint, plots};

#[derive(Parser, Debug)]
#[command(name = "hitnet", version, about = "Compile HIT specs into loop decoders, train them and measure compositionality")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Experiment config file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// HIT spec file; overrides the config.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Desk-scale factor for samples, epochs and patience.
    #[arg(long)]
    pub desk: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Extra `key=value` config overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Train one decoder and write its checkpoint and loss curve.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        arch: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run a full experiment (all architectures and seeds), or evaluate one checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Comma-separated architectures; overrides the config.
        #[arg(long)]
        archs: Option<String>,
        /// Comma-separated seeds; overrides the config.
        #[arg(long)]
        seeds: Option<String>,
        /// Evaluate this checkpoint instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Coherence battery (torus) for a checkpoint or a random initialization.
    Battery {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        arch: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Search for a same-class pair that changes an earlier output block.
    Counterexample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        arch: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        max_len: usize,
        #[arg(long, default_value_t = 256)]
        budget: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Baseline run plus the matched-loss retraining of type-A decoders.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// Fair vs naive chamfer on synthetic noisy curves.
    ResampleCheck {
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value = "2,4,8,10")]
        lengths: String,
        #[arg(long, default_value_t = 40)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write ground-truth training samples as CSV.
    DumpData {
        #[command(flatten)]
        common: Common,
        /// Semicolon-separated words; default is the training set.
        #[arg(long)]
        words: Option<String>,
        #[arg(long, default_value_t = 1)]
        samples: usize,
        #[arg(long, default_value_t = 0.02)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug)]
pub enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

fn invalid<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Validation(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

pub fn build_config(c: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display())).map_err(invalid)?;
            let base = p.parent().unwrap_or(Path::new("."));
            ExperimentConfig::parse(&text, base).map_err(invalid)?
        }
        None => ExperimentConfig::default(),
    };
    let here = Path::new(".");
    for kv in &c.sets {
        let (k, v) = kv.split_once('=').ok_or_else(|| invalid(anyhow!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v, here).map_err(invalid)?;
    }
    if let Some(s) = &c.spec {
        cfg.spec = Some(s.clone());
    }
    if let Some(d) = c.desk {
        cfg.desk = d;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn spec_of(cfg: &ExperimentConfig) -> Result<HitSpec, Failure> {
    load_spec(cfg).map_err(invalid)
}

fn kind(name: &str) -> Result<DecoderKind, Failure> {
    DecoderKind::parse(name).ok_or_else(|| {
        let all: Vec<&str> = DecoderKind::ALL.iter().map(|k| k.name()).collect();
        invalid(anyhow!("unknown architecture `{name}` (expected one of {})", all.join(", ")))
    })
}

fn decoder(cfg: &ExperimentConfig, spec: &HitSpec, arch: DecoderKind, seed: u64, ckpt: &Option<PathBuf>) -> Result<Decoder, Failure> {
    match ckpt {
        Some(p) => checkpoint::load(p, spec).map_err(invalid),
        None => Decoder::compile(spec, arch, &cfg.hyper, &mut Rng::new(seed)).map_err(invalid),
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<String, Failure> {
    let text = serde_json::to_string_pretty(v).map_err(runtime)?;
    if let Some(d) = path.parent() {
        fs::create_dir_all(d).map_err(runtime)?;
    }
    fs::write(path, &text).map_err(runtime)?;
    Ok(text)
}

/// All report artifacts for a finished experiment.
pub fn write_report(r: &EvalReport, out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out)?;
    report::write_metric_csv(&out.join("report.csv"), r.records())?;
    fs::write(out.join("report.json"), report::report_json(r))?;
    report::emit_tables(r, &out.join("tables"), TableFormat::Markdown)?;
    report::emit_tables(r, &out.join("tables"), TableFormat::Csv)?;
    plots::emit_plots(r, &out.join("plots"))?;
    for c in &r.cells {
        checkpoint::save(&c.decoder, &out.join("checkpoints").join(format!("{}_{}_{}.ckpt", r.space, c.arch.name(), c.seed)))?;
    }
    Ok(())
}

fn print_summary(r: &EvalReport) {
    println!("{}: {} cells in {:.1}s", r.space, r.cells.len(), r.wall_clock_secs);
    for c in r.cells.iter().filter(|c| c.error.is_some()) {
        println!("  {} seed {} failed: {}", c.arch, c.seed, c.error.as_deref().unwrap_or(""));
    }
    for t in report::tables(r) {
        println!("\n{}", t.markdown());
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Train { common, arch, seed } => {
            let cfg = build_config(&common)?;
            let arch = kind(&arch)?;
            let spec = spec_of(&cfg)?;
            let mut one = cfg.clone();
            one.archs = vec![arch];
            one.seeds = vec![seed];
            let plan = experiment::plan(&one).map_err(invalid)?;
            let (dec, log, best) =
                experiment::train_cell(&plan, arch, seed, &cfg.hyper, &cfg.train_config()).map_err(|e| runtime(anyhow!(e)))?;
            let stem = format!("{}_{}_{}", spec.name, arch.name(), seed);
            checkpoint::save(&dec, &cfg.out.join("checkpoints").join(format!("{stem}.ckpt"))).map_err(runtime)?;
            let mut w = csv::Writer::from_path(cfg.out.join(format!("train_{stem}.csv"))).map_err(runtime)?;
            w.write_record(["epoch", "loss", "lr", "early_stop"]).map_err(runtime)?;
            for t in &log {
                w.write_record([t.epoch.to_string(), t.loss.to_string(), t.lr.to_string(), t.early_stop.to_string()]).map_err(runtime)?;
            }
            w.flush().map_err(runtime)?;
            println!("{stem}: best loss {best:.6} after {} epochs, {} params", log.len(), dec.param_count());
        }
        Cmd::Eval { common, archs, seeds, checkpoint: ckpt, seed } => {
            let mut cfg = build_config(&common)?;
            let here = Path::new(".");
            if let Some(a) = archs {
                cfg.set("archs", &a, here).map_err(invalid)?;
            }
            if let Some(s) = seeds {
                cfg.set("seeds", &s, here).map_err(invalid)?;
            }
            if let Some(p) = ckpt {
                let spec = spec_of(&cfg)?;
                let dec = checkpoint::load(&p, &spec).map_err(invalid)?;
                let plan = experiment::plan(&cfg).map_err(invalid)?;
                let (records, _) = experiment::evaluate(&dec, seed, &plan.sets).map_err(runtime)?;
                fs::create_dir_all(&cfg.out).map_err(runtime)?;
                report::write_metric_csv(&cfg.out.join("report.csv"), &records).map_err(runtime)?;
                println!("wrote {} records to {}", records.len(), cfg.out.join("report.csv").display());
                return Ok(());
            }
            cfg.validate().map_err(invalid)?;
            spec_of(&cfg)?;
            let r = experiment::run_experiment(&cfg).map_err(runtime)?;
            write_report(&r, &cfg.out).map_err(runtime)?;
            print_summary(&r);
        }
        Cmd::Battery { common, arch, seed, checkpoint: ckpt } => {
            let cfg = build_config(&common)?;
            let spec = spec_of(&cfg)?;
            let dec = decoder(&cfg, &spec, kind(&arch)?, seed, &ckpt)?;
            let rep = coherence_battery(&dec).map_err(invalid)?;
            #[derive(Serialize)]
            struct Out<'a> {
                space: &'a str,
                arch: &'a str,
                composition_gap: f64,
                commutativity_gap: f64,
                reorder_gap: f64,
                noncanonical_gap: f64,
            }
            let o = Out {
                space: &spec.name,
                arch: dec.kind.name(),
                composition_gap: rep.composition_gap,
                commutativity_gap: rep.commutativity_gap,
                reorder_gap: rep.reorder_gap,
                noncanonical_gap: rep.noncanonical_gap,
            };
            let text = write_json(&cfg.out.join("battery").join(format!("{}_{}.json", spec.name, dec.kind.name())), &o)?;
            println!("{text}");
        }
        Cmd::Counterexample { common, arch, seed, max_len, budget, checkpoint: ckpt } => {
            let cfg = build_config(&common)?;
            let spec = spec_of(&cfg)?;
            let dec = decoder(&cfg, &spec, kind(&arch)?, seed, &ckpt)?;
            let w = counterexample_search(&dec, max_len, budget).map_err(invalid)?;
            let j = report::witness_json(&spec.name, dec.kind, |x| spec.format_word(x), &w, w.is_valid(&dec));
            let text = write_json(&cfg.out.join("witness").join(format!("{}_{}.json", spec.name, dec.kind.name())), &j)?;
            println!("{text}");
        }
        Cmd::Ablate { common } => {
            let cfg = build_config(&common)?;
            cfg.validate().map_err(invalid)?;
            spec_of(&cfg)?;
            let base = experiment::run_experiment(&cfg).map_err(runtime)?;
            write_report(&base, &cfg.out).map_err(runtime)?;
            let (re, rows) = ablation::matched_loss_ablation(&cfg, &base).map_err(runtime)?;
            write_report(&re, &cfg.out.join("ablation")).map_err(runtime)?;
            let mut w = csv::Writer::from_path(cfg.out.join("ablation.csv")).map_err(runtime)?;
            for r in &rows {
                w.serialize(r).map_err(runtime)?;
            }
            w.flush().map_err(runtime)?;
            let md = ablation::ablation_markdown(&rows);
            fs::write(cfg.out.join("ablation.md"), &md).map_err(runtime)?;
            println!("{md}");
        }
        Cmd::ResampleCheck { sigma, lengths, trials, seed, out } => {
            let lengths: Vec<usize> = lengths
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| invalid(anyhow!("bad length `{s}`"))))
                .collect::<Result<_, _>>()?;
            if lengths.iter().any(|&l| l == 0) || trials == 0 || !(sigma >= 0.0) {
                return Err(invalid(anyhow!("lengths and trials must be positive and sigma non-negative")));
            }
            let rows = resampling_artifact_check(sigma, &lengths, trials, &mut Rng::new(seed)).map_err(runtime)?;
            fs::create_dir_all(&out).map_err(runtime)?;
            let mut w = csv::Writer::from_path(out.join("resample_check.csv")).map_err(runtime)?;
            w.write_record(["L", "fair", "naive", "ratio"]).map_err(runtime)?;
            println!("L\tfair\tnaive\tnaive/fair");
            for r in &rows {
                w.write_record([r.len.to_string(), r.fair.to_string(), r.naive.to_string(), (r.naive / r.fair).to_string()])
                    .map_err(runtime)?;
                println!("{}\t{:.4}\t{:.4}\t{:.2}", r.len, r.fair, r.naive, r.naive / r.fair);
            }
            w.flush().map_err(runtime)?;
        }
        Cmd::DumpData { common, words, samples, sigma, seed } => {
            let cfg = build_config(&common)?;
            let spec = spec_of(&cfg)?;
            let space = Space::from_spec(&spec).map_err(invalid)?;
            let words = match words {
                Some(ws) => ws
                    .split(';')
                    .map(|t| spec.parse_word(t.trim()).map_err(|e| invalid(anyhow!("word `{t}`: {e:?}"))))
                    .collect::<Result<Vec<_>, _>>()?,
                None => training_words(&spec, cfg.train_max_len, cfg.inverses).map_err(invalid)?,
            };
            fs::create_dir_all(&cfg.out).map_err(runtime)?;
            let path = cfg.out.join(format!("data_{}.csv", spec.name));
            let mut w = csv::Writer::from_path(&path).map_err(runtime)?;
            let mut header = vec!["word".to_string(), "sample".into(), "point".into()];
            header.extend((0..space.dim()).map(|i| format!("x{i}")));
            w.write_record(&header).map_err(runtime)?;
            let mut rng = Rng::new(seed);
            for word in &words {
                for s in 0..samples {
                    let phase = rng.uniform(0.0, std::f64::consts::TAU);
                    let c = ground_truth_loop(&space, word, 32, phase, sigma, &mut rng).cloud;
                    for (i, p) in c.points().enumerate() {
                        let mut rec = vec![spec.format_word(word), s.to_string(), i.to_string()];
                        rec.extend(p.iter().map(|x| x.to_string()));
                        w.write_record(&rec).map_err(runtime)?;
                    }
                }
            }
            w.flush().map_err(runtime)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(f) => {
            let (Failure::Validation(e) | Failure::Runtime(e)) = &f;
            eprintln!("error: {e:#}");
            f.code()
        }
    }
}
