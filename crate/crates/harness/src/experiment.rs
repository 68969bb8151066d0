//! Training and evaluation of every (architecture, seed) cell.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use hitnet_core::decoders::{Decoder, DecoderKind};
use hitnet_core::geometry::{ground_truth_loop, PointCloud, Space};
use hitnet_core::hit_spec::{enumerate_words, is_canonical_klein, training_words, GroupClass, HitSpec, Letter, Word};
use hitnet_core::metrics::{
    circle_accuracy, coherence_battery, mean_std, noise_floor, order_pairs, order_sensitivity, per_segment_chamfer,
    CoherenceReport, MetricError, MetricRecord, SEG_PTS,
};
use hitnet_core::rng::Rng;
use hitnet_core::train::{build_dataset, train, TrainConfig, TrainRecord, WordData};

use crate::config::ExperimentConfig;

/// Stream keys for the per-seed generator.
const DATA_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 3;
const TEST_WORDS_KEY: u64 = 0x7e57_3057;

#[derive(Clone, Debug, PartialEq)]
pub struct TestSet {
    pub len: usize,
    pub words: Vec<Word>,
    /// Klein only: canonical flag per word.
    pub canonical: Vec<Option<bool>>,
}

fn is_freely_reduced(w: &Word) -> bool {
    w.letters.windows(2).all(|p| p[0] != p[1].inverse())
}

fn random_word(rng: &mut Rng, k: usize, len: usize, inverses: bool) -> Word {
    let mut letters: Vec<Letter> = Vec::with_capacity(len);
    while letters.len() < len {
        let g = rng.below(k);
        let l = if inverses && rng.below(2) == 1 { Letter::inverse_of(g) } else { Letter::new(g) };
        if letters.last().is_some_and(|p| *p == l.inverse()) {
            continue;
        }
        letters.push(l);
    }
    Word::from_letters(letters)
}

fn count_words(k: usize, len: usize, inverses: bool) -> f64 {
    if inverses {
        2.0 * k as f64 * ((2 * k - 1) as f64).powi(len as i32 - 1)
    } else {
        (k as f64).powi(len as i32)
    }
}

fn sample_distinct(rng: &mut Rng, k: usize, len: usize, inverses: bool, cap: usize, keep: impl Fn(&Word) -> bool) -> Vec<Word> {
    let mut seen = BTreeSet::new();
    let mut attempts = 0;
    while seen.len() < cap && attempts < 200 * cap {
        attempts += 1;
        let w = random_word(rng, k, len, inverses);
        if keep(&w) {
            seen.insert(w);
        }
    }
    seen.into_iter().collect()
}

/// Test words of exactly `len` letters (freely reduced when inverses are
/// allowed): all of them when there are at most `cap`, otherwise `cap`
/// distinct random ones. On the Klein bottle, equal numbers of canonical and
/// non-canonical words.
pub fn test_words(spec: &HitSpec, len: usize, inverses: bool, cap: usize, rng: &mut Rng) -> TestSet {
    let k = spec.rank();
    if let GroupClass::KleinSemidirect { flipped, flipper } = spec.group_class {
        // Canonical words are flipped^i flipper^j with constant signs.
        let mut canon = Vec::new();
        for i in 0..=len {
            let j = len - i;
            let signs: &[bool] = if inverses { &[false, true] } else { &[false] };
            for &si in if i == 0 { &[false][..] } else { signs } {
                for &sj in if j == 0 { &[false][..] } else { signs } {
                    let mut l = vec![Letter { gen: flipped, inv: si }; i];
                    l.extend(std::iter::repeat(Letter { gen: flipper, inv: sj }).take(j));
                    canon.push(Word::from_letters(l));
                }
            }
        }
        let half = cap / 2;
        if canon.len() > half {
            rng.shuffle(&mut canon);
            canon.truncate(half);
            canon.sort();
        }
        let n = canon.len();
        let non = sample_distinct(rng, k, len, inverses, n, |w| !is_canonical_klein(spec, w).unwrap_or(true));
        let mut words = canon;
        let mut flags = vec![Some(true); words.len()];
        flags.extend(std::iter::repeat(Some(false)).take(non.len()));
        words.extend(non);
        return TestSet { len, words, canonical: flags };
    }
    let words = if count_words(k, len, inverses) <= cap as f64 {
        enumerate_words(spec, len, inverses)
            .expect("len >= 1")
            .into_iter()
            .filter(|w| w.len() == len && is_freely_reduced(w))
            .collect()
    } else {
        sample_distinct(rng, k, len, inverses, cap, |_| true)
    };
    let n = words.len();
    TestSet { len, words, canonical: vec![None; n] }
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub arch: DecoderKind,
    pub seed: u64,
    pub decoder: Decoder,
    pub train_log: Vec<TrainRecord>,
    pub best_loss: f64,
    pub records: Vec<MetricRecord>,
    pub coherence: Option<CoherenceReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ScalingRow {
    pub arch: DecoderKind,
    pub len: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub space: String,
    pub archs: Vec<DecoderKind>,
    pub seeds: Vec<u64>,
    pub lengths: Vec<usize>,
    pub cells: Vec<CellOutcome>,
    pub scaling: Vec<ScalingRow>,
    pub params: Vec<(DecoderKind, usize)>,
    pub wall_clock_secs: f64,
}

impl EvalReport {
    pub fn records(&self) -> impl Iterator<Item = &MetricRecord> {
        self.cells.iter().flat_map(|c| c.records.iter())
    }

    pub fn cell(&self, arch: DecoderKind, seed: u64) -> Option<&CellOutcome> {
        self.cells.iter().find(|c| c.arch == arch && c.seed == seed)
    }

    /// Per-seed means of `metric` at length `len`, one value per seed.
    pub fn per_seed_means(&self, arch: DecoderKind, metric: &str, len: usize) -> Vec<f64> {
        self.cells
            .iter()
            .filter(|c| c.arch == arch && c.error.is_none())
            .filter_map(|c| {
                let v: Vec<f64> = c.records.iter().filter(|r| r.metric == metric && r.len == len).map(|r| r.value).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect()
    }

    pub fn summary(&self, arch: DecoderKind, metric: &str, len: usize) -> Option<(f64, f64)> {
        let v = self.per_seed_means(arch, metric, len);
        (!v.is_empty()).then(|| mean_std(&v))
    }

    /// Mean d-bar over all words of a length (both Klein classes together).
    pub fn dbar(&self, arch: DecoderKind, len: usize) -> Option<(f64, f64)> {
        self.scaling.iter().find(|r| r.arch == arch && r.len == len).map(|r| (r.mean, r.std))
    }
}

pub fn load_spec(cfg: &ExperimentConfig) -> anyhow::Result<HitSpec> {
    let path = cfg.spec.as_ref().ok_or(crate::config::ConfigError::NoSpec)?;
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read spec {}: {e}", path.display()))?;
    Ok(hitnet_core::parse_hit_spec(&text)?)
}

fn record(space: &str, arch: DecoderKind, seed: u64, word: String, len: usize, metric: &str, value: f64) -> MetricRecord {
    MetricRecord {
        space: space.to_string(),
        arch: arch.name().to_string(),
        type_tag: arch.type_tag().to_string(),
        seed,
        word,
        len,
        metric: metric.to_string(),
        value,
    }
}

pub fn ground_truth(space: &Space, w: &Word) -> PointCloud {
    ground_truth_loop(space, w, SEG_PTS, 0.0, 0.0, &mut Rng::new(0)).cloud
}

/// Per-word and per-decoder metrics of a trained decoder.
pub fn evaluate(dec: &Decoder, seed: u64, sets: &[TestSet]) -> Result<(Vec<MetricRecord>, Option<CoherenceReport>), MetricError> {
    let s = &dec.spec;
    let name = &s.name;
    let mut out = Vec::new();
    let wedge = matches!(s.group_class, GroupClass::Free(_));
    for set in sets {
        for (w, canon) in set.words.iter().zip(&set.canonical) {
            let raw = dec.decode_raw(w)?;
            let text = s.format_word(w);
            let d = per_segment_chamfer(&raw, &ground_truth(&dec.space, w), w.len())?;
            let metric = match canon {
                Some(true) => "dbar_canonical",
                Some(false) => "dbar_noncanonical",
                None => "dbar",
            };
            out.push(record(name, dec.kind, seed, text.clone(), set.len, metric, d));
            if wedge {
                out.push(record(name, dec.kind, seed, text, set.len, "circle_acc", circle_accuracy(&raw, &dec.space, w)?));
            }
        }
    }
    let coherence = if matches!(s.group_class, GroupClass::FreeAbelian(2)) { Some(coherence_battery(dec)?) } else { None };
    if let Some(c) = &coherence {
        for (m, v) in [
            ("coh_composition", c.composition_gap),
            ("coh_commutativity", c.commutativity_gap),
            ("coh_reorder", c.reorder_gap),
            ("coh_noncanonical", c.noncanonical_gap),
        ] {
            out.push(record(name, dec.kind, seed, "-".into(), 0, m, v));
        }
    }
    if wedge {
        let pairs = order_pairs(s, 3);
        let words: Vec<Word> = pairs.iter().flat_map(|p| [p.0.clone(), p.1.clone()]).collect();
        let floor = noise_floor(&dec.space, &words, TrainConfig::default().sigma, &mut Rng::new(seed).split(7))?;
        let frac = order_sensitivity(|w| Ok(dec.decode_raw(w)?), &pairs, floor)?;
        out.push(record(name, dec.kind, seed, "-".into(), 0, "order_sensitivity", frac));
    }
    Ok((out, coherence))
}

/// Everything a cell needs that is shared across cells.
pub struct Plan {
    pub spec: HitSpec,
    pub space: Space,
    pub train_words: Vec<Word>,
    pub sets: Vec<TestSet>,
    pub train: TrainConfig,
}

pub fn plan(cfg: &ExperimentConfig) -> anyhow::Result<Plan> {
    cfg.validate()?;
    let spec = load_spec(cfg)?;
    let space = Space::from_spec(&spec)?;
    let train_words = training_words(&spec, cfg.train_max_len, cfg.inverses)?;
    let mut rng = Rng::new(TEST_WORDS_KEY);
    let mut sets = Vec::new();
    // In-distribution column: the training words of length 2.
    let l2: Vec<Word> = train_words.iter().filter(|w| w.len() == 2).cloned().collect();
    if !l2.is_empty() {
        let canonical = l2
            .iter()
            .map(|w| matches!(spec.group_class, GroupClass::KleinSemidirect { .. }).then(|| is_canonical_klein(&spec, w).unwrap()))
            .collect();
        sets.push(TestSet { len: 2, words: l2, canonical });
    }
    for &l in &cfg.test_lengths {
        let set = test_words(&spec, l, cfg.inverses, cfg.test_cap, &mut rng);
        for w in &set.words {
            assert!(!train_words.contains(w), "test word {} is in the training set", spec.format_word(w));
        }
        sets.push(set);
    }
    Ok(Plan { spec, space, train_words, sets, train: cfg.train_config() })
}

/// Train one cell from scratch.
pub fn train_cell(
    plan: &Plan,
    arch: DecoderKind,
    seed: u64,
    hyper: &hitnet_core::decoders::Hyper,
    train_cfg: &TrainConfig,
) -> Result<(Decoder, Vec<TrainRecord>, f64), String> {
    let master = Rng::new(seed);
    let data: Vec<WordData> =
        build_dataset(&plan.space, &plan.train_words, train_cfg.samples_per_word, train_cfg.sigma, hyper.out_pts, &mut master.split(DATA_STREAM));
    let mut dec = Decoder::compile(&plan.spec, arch, hyper, &mut master.split(INIT_STREAM)).map_err(|e| e.to_string())?;
    let out = train(&mut dec, &data, train_cfg, &mut master.split(SHUFFLE_STREAM)).map_err(|e| e.to_string())?;
    Ok((dec, out.records, out.best_loss))
}

fn run_cell(plan: &Plan, cfg: &ExperimentConfig, arch: DecoderKind, seed: u64, train_cfg: &TrainConfig) -> Option<CellOutcome> {
    let init = match Decoder::compile(&plan.spec, arch, &cfg.hyper, &mut Rng::new(seed).split(INIT_STREAM)) {
        Ok(d) => d,
        // Incompatible kinds (Cover on a free group) are skipped.
        Err(_) => return None,
    };
    Some(match train_cell(plan, arch, seed, &cfg.hyper, train_cfg) {
        Ok((dec, log, best)) => {
            let (mut records, coherence, error) = match evaluate(&dec, seed, &plan.sets) {
                Ok((r, c)) => (r, c, None),
                Err(e) => (Vec::new(), None, Some(e.to_string())),
            };
            let name = &plan.spec.name;
            records.push(record(name, arch, seed, "-".into(), 0, "train_loss", best));
            records.push(record(name, arch, seed, "-".into(), 0, "epochs_run", log.len() as f64));
            records.push(record(name, arch, seed, "-".into(), 0, "params", dec.param_count() as f64));
            CellOutcome { arch, seed, decoder: dec, train_log: log, best_loss: best, records, coherence, error }
        }
        Err(e) => CellOutcome {
            arch,
            seed,
            decoder: init,
            train_log: Vec::new(),
            best_loss: f64::NAN,
            records: Vec::new(),
            coherence: None,
            error: Some(e),
        },
    })
}

fn threads(cfg: &ExperimentConfig) -> usize {
    if cfg.threads > 0 {
        cfg.threads
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Run `jobs` on a bounded pool, returning results in job order.
pub fn parallel_map<J: Sync, R: Send>(jobs: &[J], workers: usize, f: impl Fn(&J) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every job ran")).collect()
}

/// Scaling rows from the per-word d-bar records: per-seed mean over words,
/// then mean and std over seeds.
pub fn scaling_rows(cells: &[CellOutcome], archs: &[DecoderKind], lengths: &[usize]) -> Vec<ScalingRow> {
    let mut rows = Vec::new();
    for &arch in archs {
        for &len in lengths {
            let per_seed: Vec<f64> = cells
                .iter()
                .filter(|c| c.arch == arch && c.error.is_none())
                .filter_map(|c| {
                    let v: Vec<f64> =
                        c.records.iter().filter(|r| r.len == len && r.metric.starts_with("dbar")).map(|r| r.value).collect();
                    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect();
            if !per_seed.is_empty() {
                let (mean, std) = mean_std(&per_seed);
                rows.push(ScalingRow { arch, len, mean, std });
            }
        }
    }
    rows
}

pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<EvalReport> {
    run_with(cfg, &cfg.train_config())
}

/// `run_experiment` with explicit training settings.
pub fn run_with(cfg: &ExperimentConfig, train_cfg: &TrainConfig) -> anyhow::Result<EvalReport> {
    let start = Instant::now();
    let plan = plan(cfg)?;
    let jobs: Vec<(DecoderKind, u64)> = cfg.archs.iter().flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s))).collect();
    let cells: Vec<CellOutcome> =
        parallel_map(&jobs, threads(cfg), |&(a, s)| run_cell(&plan, cfg, a, s, train_cfg)).into_iter().flatten().collect();
    let archs: Vec<DecoderKind> = cfg.archs.iter().copied().filter(|a| cells.iter().any(|c| c.arch == *a)).collect();
    let lengths: Vec<usize> = plan.sets.iter().map(|s| s.len).collect();
    let scaling = scaling_rows(&cells, &archs, &lengths);
    let params = archs
        .iter()
        .map(|&a| (a, cells.iter().find(|c| c.arch == a).map_or(0, |c| c.decoder.param_count())))
        .collect();
    Ok(EvalReport {
        space: plan.spec.name.clone(),
        archs,
        seeds: cfg.seeds.clone(),
        lengths,
        cells,
        scaling,
        params,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
