//! Adam and the single critic update.

use ndarray::{ArrayView2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{critic_loss, CriticMetrics, LossConfig};
use super::mlp::Mlp;
use crate::error::CriticError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    t: i32,
    m: Mlp,
    v: Mlp,
}

impl Adam {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: net.zeros_like(),
            v: net.zeros_like(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, net: &mut Mlp, grad: &Mlp) {
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((p, g), m), v) in net
            .layers
            .iter_mut()
            .zip(&grad.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            Zip::from(&mut p.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(update);
            Zip::from(&mut p.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(update);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub loss: f64,
    pub metrics: CriticMetrics,
    /// The loss or gradient was non-finite and the parameters were left
    /// untouched.
    pub rejected: bool,
}

/// One optimizer step on the critic loss.
pub fn train_critic_step<R: Rng + ?Sized>(
    net: &mut Mlp,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
    cfg: &LossConfig,
    optimizer: &mut Adam,
    rng: &mut R,
) -> Result<StepOutcome, CriticError> {
    let out = critic_loss(net, real, fake, cfg, rng)?;
    let rejected = !out.metrics.finite;
    if !rejected {
        optimizer.step(net, &out.grad);
    }
    Ok(StepOutcome {
        loss: out.loss,
        metrics: out.metrics,
        rejected,
    })
}
