//! Chamfer-loss training with AdamW, warmup + cosine schedule and early
//! stopping on the training objective.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::autograd::{Graph, Mat, Var};
use crate::decoders::{Decoder, DecoderError};
use crate::geometry::{ground_truth_loop, resample, Space};
use crate::hit_spec::Word;
use crate::optim::{cosine_lr, AdamW, LrSchedule};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub samples_per_word: usize,
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup: usize,
    pub sigma: f64,
    pub smooth_lambda: f64,
    /// Samples per optimizer step; 0 uses every sample of the word.
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            samples_per_word: 1000,
            epochs: 500,
            patience: 80,
            lr: 1e-3,
            weight_decay: 1e-4,
            warmup: 20,
            sigma: 0.02,
            smooth_lambda: 0.05,
            batch_size: 0,
        }
    }
}

/// `max(1, round(x * factor))`.
pub fn scaled(x: usize, factor: f64) -> usize {
    (libm::round(x as f64 * factor) as usize).max(1)
}

impl TrainConfig {
    /// Samples, epochs and patience scaled by the desk factor.
    pub fn desk(&self, factor: f64) -> TrainConfig {
        TrainConfig {
            samples_per_word: scaled(self.samples_per_word, factor),
            epochs: scaled(self.epochs, factor),
            patience: scaled(self.patience, factor),
            warmup: self.warmup.min(scaled(self.epochs, factor).saturating_sub(1)),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordData {
    pub word: Word,
    pub targets: Vec<Mat>,
}

/// Noisy ground-truth loops with uniform random phase, each resampled to
/// `out_pts` points.
pub fn build_dataset(space: &Space, words: &[Word], samples: usize, sigma: f64, out_pts: usize, rng: &mut Rng) -> Vec<WordData> {
    words
        .iter()
        .map(|w| {
            let targets = (0..samples)
                .map(|_| {
                    let phase = rng.uniform(0.0, 2.0 * PI);
                    let c = ground_truth_loop(space, w, 32, phase, sigma, rng).cloud;
                    let c = if c.len() >= 2 { resample(&c, out_pts).expect("two or more points") } else { c };
                    Mat::from_vec(c.len(), c.dim, c.data)
                })
                .collect();
            WordData { word: w.clone(), targets }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainRecord {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    pub early_stop: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub records: Vec<TrainRecord>,
    pub best_loss: f64,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainError {
    Diverged { epoch: usize },
    Decoder(DecoderError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Diverged { epoch } => write!(f, "training diverged (non-finite loss) at epoch {epoch}"),
            TrainError::Decoder(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<DecoderError> for TrainError {
    fn from(e: DecoderError) -> Self {
        TrainError::Decoder(e)
    }
}

/// Chamfer to the word's samples, plus the 2-cell smoothness term when the
/// decoder has one.
pub fn objective(dec: &Decoder, g: &mut Graph<'_>, data: &WordData, smooth_lambda: f64) -> Result<Var, DecoderError> {
    objective_on(dec, g, &data.word, &data.targets, smooth_lambda)
}

fn objective_on(dec: &Decoder, g: &mut Graph<'_>, word: &Word, targets: &[Mat], smooth_lambda: f64) -> Result<Var, DecoderError> {
    let y = dec.forward(g, word)?;
    let c = g.chamfer(y, targets);
    Ok(match dec.smoothness_tape(g) {
        Some(s) if smooth_lambda != 0.0 => {
            let s = g.scale(s, smooth_lambda);
            g.add(c, s)
        }
        _ => c,
    })
}

/// Mean objective over all words at the current parameters.
pub fn evaluate_loss(dec: &Decoder, data: &[WordData], smooth_lambda: f64) -> Result<f64, DecoderError> {
    let mut total = 0.0;
    for d in data {
        let mut g = Graph::new(&dec.store);
        let l = objective(dec, &mut g, d, smooth_lambda)?;
        total += g.scalar_value(l);
    }
    Ok(total / data.len() as f64)
}

/// One optimizer step per word per epoch, in a freshly shuffled order. After
/// each epoch the full objective is evaluated; training stops once it has
/// not improved for `patience` epochs, and the best parameters are restored.
pub fn train(dec: &mut Decoder, data: &[WordData], cfg: &TrainConfig, rng: &mut Rng) -> Result<TrainOutcome, TrainError> {
    assert!(!data.is_empty(), "empty training set");
    let sched = LrSchedule { base_lr: cfg.lr, warmup_epochs: cfg.warmup, total_epochs: cfg.epochs };
    let mut opt = AdamW::new(&dec.store, cfg.lr, cfg.weight_decay);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut best = (f64::INFINITY, 0usize, dec.store.clone());
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut stopped_early = false;
    for epoch in 0..cfg.epochs {
        opt.lr = cosine_lr(&sched, epoch);
        rng.shuffle(&mut order);
        for &i in &order {
            let d = &data[i];
            let batch: Vec<Mat>;
            let targets = if cfg.batch_size > 0 && cfg.batch_size < d.targets.len() {
                let mut idx: Vec<usize> = (0..d.targets.len()).collect();
                for j in 0..cfg.batch_size {
                    let k = j + rng.below(idx.len() - j);
                    idx.swap(j, k);
                }
                batch = idx[..cfg.batch_size].iter().map(|&j| d.targets[j].clone()).collect();
                &batch[..]
            } else {
                &d.targets[..]
            };
            let grads = {
                let mut g = Graph::new(&dec.store);
                let l = objective_on(dec, &mut g, &d.word, targets, cfg.smooth_lambda)?;
                if !g.scalar_value(l).is_finite() {
                    return Err(TrainError::Diverged { epoch });
                }
                g.backward(l).expect("scalar objective")
            };
            opt.step(&mut dec.store, &grads);
        }
        let loss = evaluate_loss(dec, data, cfg.smooth_lambda)?;
        if !loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        if loss < best.0 {
            best = (loss, epoch, dec.store.clone());
        }
        let stop = epoch - best.1 >= cfg.patience;
        records.push(TrainRecord { epoch, loss, lr: opt.lr, early_stop: stop });
        if stop {
            stopped_early = true;
            break;
        }
    }
    dec.store = best.2;
    Ok(TrainOutcome { records, best_loss: best.0, best_epoch: best.1, stopped_early })
}
