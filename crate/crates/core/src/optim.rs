//! AdamW with decoupled weight decay, and a warmup + cosine schedule.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::autograd::{Mat, ParamStore};

#[derive(Clone, Debug, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Mat>,
    pub v: Vec<Mat>,
}

impl AdamW {
    pub fn new(store: &ParamStore, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Mat> = store.tensors().iter().map(|t| Mat::zeros(t.rows, t.cols)).collect();
        AdamW { lr, weight_decay, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    /// One update. Decay is applied first, `p *= 1 - lr * wd`, then the
    /// bias-corrected Adam step.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Mat]) {
        assert_eq!(grads.len(), store.len());
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(self.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, t as f64);
        let decay = 1.0 - self.lr * self.weight_decay;
        for (i, p) in store.tensors_mut().iter_mut().enumerate() {
            let g = &grads[i];
            assert!(g.same_shape(p));
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for k in 0..p.data.len() {
                m.data[k] = self.beta1 * m.data[k] + (1.0 - self.beta1) * g.data[k];
                v.data[k] = self.beta2 * v.data[k] + (1.0 - self.beta2) * g.data[k] * g.data[k];
                let mh = m.data[k] / bc1;
                let vh = v.data[k] / bc2;
                p.data[k] = p.data[k] * decay - self.lr * mh / (libm::sqrt(vh) + self.eps);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
}

/// `base * (epoch + 1) / warmup` during warmup, then a half cosine from
/// `base` at `epoch = warmup` down to 0 at `epoch = total`.
pub fn cosine_lr(s: &LrSchedule, epoch: usize) -> f64 {
    if epoch < s.warmup_epochs {
        return s.base_lr * (epoch + 1) as f64 / s.warmup_epochs as f64;
    }
    if epoch >= s.total_epochs {
        return 0.0;
    }
    let span = (s.total_epochs - s.warmup_epochs).max(1) as f64;
    let x = (epoch - s.warmup_epochs) as f64 / span;
    0.5 * s.base_lr * (1.0 + libm::cos(PI * x))
}
