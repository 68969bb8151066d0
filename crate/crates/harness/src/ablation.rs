//! Matched-loss ablation: retrain the type-A architectures with twice the
//! epochs and a lower learning rate, and compare d-bar at the longest length.

use hitnet_core::decoders::{DecoderKind, TypeTag};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiment::{run_with, EvalReport};

pub const ABLATION_LR: f64 = 5e-4;

#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub arch: String,
    pub loss_before: f64,
    pub loss_after: f64,
    /// Best type-B training loss of the baseline.
    pub target_loss: f64,
    pub dbar_before: f64,
    pub dbar_after: f64,
    /// Best type-B d-bar at the same length.
    pub dbar_type_b: f64,
    #[serde(rename = "L")]
    pub len: usize,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn seed_losses(r: &EvalReport, arch: DecoderKind) -> Vec<f64> {
    r.cells.iter().filter(|c| c.arch == arch && c.error.is_none()).map(|c| c.best_loss).collect()
}

pub fn matched_loss_ablation(cfg: &ExperimentConfig, baseline: &EvalReport) -> anyhow::Result<(EvalReport, Vec<AblationRow>)> {
    let type_a: Vec<DecoderKind> = baseline.archs.iter().copied().filter(|a| a.type_tag() == TypeTag::A).collect();
    let type_b: Vec<DecoderKind> = baseline.archs.iter().copied().filter(|a| a.type_tag() == TypeTag::B).collect();
    let len = *baseline.lengths.iter().max().ok_or_else(|| anyhow::anyhow!("baseline has no lengths"))?;
    let mut acfg = cfg.clone();
    acfg.archs = type_a.clone();
    let mut t = cfg.train_config();
    t.epochs *= 2;
    t.lr = ABLATION_LR;
    let retrained = run_with(&acfg, &t)?;
    let target = type_b.iter().map(|&a| mean(&seed_losses(baseline, a))).fold(f64::INFINITY, f64::min);
    let best_b = type_b.iter().filter_map(|&a| baseline.dbar(a, len)).map(|d| d.0).fold(f64::INFINITY, f64::min);
    let rows = type_a
        .iter()
        .map(|&a| AblationRow {
            arch: a.name().into(),
            loss_before: mean(&seed_losses(baseline, a)),
            loss_after: mean(&seed_losses(&retrained, a)),
            target_loss: target,
            dbar_before: baseline.dbar(a, len).map_or(f64::NAN, |d| d.0),
            dbar_after: retrained.dbar(a, len).map_or(f64::NAN, |d| d.0),
            dbar_type_b: best_b,
            len,
        })
        .collect();
    Ok((retrained, rows))
}

pub fn ablation_markdown(rows: &[AblationRow]) -> String {
    let mut s = String::from("| Arch | train loss | target | d-bar before | d-bar after | change | type-B d-bar |\n|---|---|---|---|---|---|---|\n");
    for r in rows {
        s.push_str(&format!(
            "| {} | {:.4} -> {:.4} | {:.4} | {:.4} | {:.4} | {:+.1}% | {:.4} |\n",
            r.arch,
            r.loss_before,
            r.loss_after,
            r.target_loss,
            r.dbar_before,
            r.dbar_after,
            100.0 * (r.dbar_after - r.dbar_before) / r.dbar_before,
            r.dbar_type_b
        ));
    }
    s
}
