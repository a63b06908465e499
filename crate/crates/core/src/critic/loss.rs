//! Critic losses, the generator objective and the style reward.
//!
//! * `bce`: `E[softplus(−D(x))] + E[softplus(D(x̃))]`, no penalty.
//! * `w1`: `−E[D(x)] + E[D(x̃)] + λ E[(‖∇D(x̂)‖ − 1)²]`.
//! * `w1_soft`: `−E[tanh ηD(x)] + E[tanh ηD(x̃)] + λ E[max(0, ‖∇D(x̂)‖ − 1)²]`.
//!
//! `x̂ = αx + (1 − α)x̃` with one `α ~ U(0, 1)` per real/fake pair.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis as NdAxis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::CriticError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Bce,
    W1,
    W1Soft,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Bce, LossKind::W1, LossKind::W1Soft];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::W1 => "w1",
            LossKind::W1Soft => "w1_soft",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = CriticError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                CriticError::InvalidConfig(format!(
                    "unknown loss '{s}' (expected bce, w1 or w1_soft)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    None,
    TwoSided,
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub kind: LossKind,
    /// Soft-boundary slope.
    pub eta: f64,
    /// Gradient-penalty weight.
    pub lambda: f64,
    /// `None` picks the family default: two-sided for `w1`, one-sided for
    /// `w1_soft`, none for `bce`.
    pub penalty: Option<PenaltyKind>,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            kind: LossKind::W1Soft,
            eta: 0.3,
            lambda: 10.0,
            penalty: None,
        }
    }
}

impl LossConfig {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            ..Default::default()
        }
    }

    pub fn penalty_kind(&self) -> PenaltyKind {
        self.penalty.unwrap_or(match self.kind {
            LossKind::Bce => PenaltyKind::None,
            LossKind::W1 => PenaltyKind::TwoSided,
            LossKind::W1Soft => PenaltyKind::OneSided,
        })
    }

    pub fn validate(&self) -> Result<(), CriticError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(CriticError::InvalidConfig(format!(
                "eta must be > 0, got {}",
                self.eta
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(CriticError::InvalidConfig(format!(
                "lambda must be ≥ 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// `(φ(r), φ'(r))` for a gradient norm `r`.
fn penalty_term(kind: PenaltyKind, r: f64) -> (f64, f64) {
    match kind {
        PenaltyKind::None => (0.0, 0.0),
        PenaltyKind::TwoSided => ((r - 1.0).powi(2), 2.0 * (r - 1.0)),
        PenaltyKind::OneSided if r > 1.0 => ((r - 1.0).powi(2), 2.0 * (r - 1.0)),
        PenaltyKind::OneSided => (0.0, 0.0),
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn mean_std(v: &Array1<f64>) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CriticMetrics {
    pub d_real_mean: f64,
    pub d_real_std: f64,
    pub d_fake_mean: f64,
    pub d_fake_std: f64,
    /// Main (non-penalty) loss terms.
    pub main: f64,
    /// `λ · E[φ(‖∇D‖)]`.
    pub penalty: f64,
    pub grad_norm_mean: f64,
    /// Every `tanh(ηD)` term of the batch lies strictly inside (−1, 1);
    /// trivially true for the other families.
    pub tanh_bounded: bool,
    pub finite: bool,
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub grad: Mlp,
    pub metrics: CriticMetrics,
}

/// Main terms and their output adjoints for one family.
fn main_terms(
    cfg: &LossConfig,
    d_real: &Array1<f64>,
    d_fake: &Array1<f64>,
) -> (f64, Array1<f64>, Array1<f64>, bool) {
    let (nr, nf) = (d_real.len() as f64, d_fake.len() as f64);
    match cfg.kind {
        LossKind::W1 => {
            let main = d_fake.sum() / nf - d_real.sum() / nr;
            (
                main,
                Array1::from_elem(d_real.len(), -1.0 / nr),
                Array1::from_elem(d_fake.len(), 1.0 / nf),
                true,
            )
        }
        LossKind::W1Soft => {
            let eta = cfg.eta;
            let tr = d_real.mapv(|d| (eta * d).tanh());
            let tf = d_fake.mapv(|d| (eta * d).tanh());
            let bounded = tr.iter().chain(tf.iter()).all(|t| t.abs() < 1.0);
            let main = tf.sum() / nf - tr.sum() / nr;
            (
                main,
                tr.mapv(|t| -eta * (1.0 - t * t) / nr),
                tf.mapv(|t| eta * (1.0 - t * t) / nf),
                bounded,
            )
        }
        LossKind::Bce => {
            let main = d_real.mapv(|d| softplus(-d)).sum() / nr + d_fake.mapv(softplus).sum() / nf;
            (
                main,
                d_real.mapv(|d| -sigmoid(-d) / nr),
                d_fake.mapv(|d| sigmoid(d) / nf),
                true,
            )
        }
    }
}

/// Loss only (no gradient), with explicit interpolation weights.
pub fn critic_loss_value(
    net: &Mlp,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
    cfg: &LossConfig,
    alphas: &[f64],
) -> Result<f64, CriticError> {
    Ok(critic_loss_with(net, real, fake, cfg, alphas)?.loss)
}

/// Loss, parameter gradient and batch metrics.
pub fn critic_loss<R: Rng + ?Sized>(
    net: &Mlp,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
    cfg: &LossConfig,
    rng: &mut R,
) -> Result<LossOutput, CriticError> {
    let alphas: Vec<f64> = (0..real.nrows()).map(|_| rng.gen::<f64>()).collect();
    critic_loss_with(net, real, fake, cfg, &alphas)
}

/// [`critic_loss`] with the interpolation weights supplied.
pub fn critic_loss_with(
    net: &Mlp,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
    cfg: &LossConfig,
    alphas: &[f64],
) -> Result<LossOutput, CriticError> {
    cfg.validate()?;
    if net.output_dim() != 1 {
        return Err(CriticError::InvalidConfig(format!(
            "critic needs one output, has {}",
            net.output_dim()
        )));
    }
    if real.nrows() == 0 || fake.nrows() == 0 {
        return Err(CriticError::EmptyBatch);
    }
    if real.ncols() != fake.ncols() {
        return Err(CriticError::DimensionMismatch {
            expected: real.ncols(),
            actual: fake.ncols(),
        });
    }

    let real_cache = net.forward_cached(real)?;
    let fake_cache = net.forward_cached(fake)?;
    let (d_real, d_fake) = (real_cache.output(), fake_cache.output());
    let (main, adj_real, adj_fake, tanh_bounded) = main_terms(cfg, &d_real, &d_fake);
    let mut grad = net.backward(Some((&real_cache, &adj_real.insert_axis(NdAxis(1)))), None);
    let fake_grad = net.backward(Some((&fake_cache, &adj_fake.insert_axis(NdAxis(1)))), None);
    grad.axpy(1.0, &fake_grad);

    let mut penalty = 0.0;
    let mut grad_norm_mean = 0.0;
    let kind = cfg.penalty_kind();
    if kind != PenaltyKind::None {
        if real.nrows() != fake.nrows() || alphas.len() != real.nrows() {
            return Err(CriticError::DimensionMismatch {
                expected: real.nrows(),
                actual: fake.nrows().min(alphas.len()),
            });
        }
        let alpha = Array1::from(alphas.to_vec()).insert_axis(NdAxis(1));
        let interp = &real * &alpha + &fake * &(1.0 - &alpha);
        let cache = net.forward_cached(interp.view())?;
        let tape = net.input_gradients(&cache);
        let g = tape.input_gradient();
        let b = g.nrows() as f64;
        let norms = g.map_axis(NdAxis(1), |row| row.dot(&row).sqrt());
        grad_norm_mean = norms.sum() / b;
        let mut adjoint = Array2::zeros(g.raw_dim());
        for ((mut adj_row, g_row), &r) in adjoint
            .rows_mut()
            .into_iter()
            .zip(g.rows())
            .zip(norms.iter())
        {
            let (phi, dphi) = penalty_term(kind, r);
            penalty += phi;
            if r > 0.0 && dphi != 0.0 {
                Zip::from(&mut adj_row)
                    .and(&g_row)
                    .for_each(|a, &gv| *a = cfg.lambda / b * dphi * gv / r);
            }
        }
        penalty *= cfg.lambda / b;
        if cfg.lambda > 0.0 {
            let pg = net.backward(None, Some((&cache, &tape, &adjoint)));
            grad.axpy(1.0, &pg);
        }
    }

    let loss = main + penalty;
    let (d_real_mean, d_real_std) = mean_std(&d_real);
    let (d_fake_mean, d_fake_std) = mean_std(&d_fake);
    let finite = loss.is_finite() && grad.is_finite();
    Ok(LossOutput {
        loss,
        grad,
        metrics: CriticMetrics {
            d_real_mean,
            d_real_std,
            d_fake_mean,
            d_fake_std,
            main,
            penalty,
            grad_norm_mean,
            tanh_bounded,
            finite,
        },
    })
}

#[derive(Debug, Clone)]
pub struct GeneratorLoss {
    pub loss: f64,
    /// Gradient with respect to each generated sample.
    pub grad_x: Array2<f64>,
    /// Critic output per generated sample.
    pub d: Array1<f64>,
}

/// Generator objective against a fixed critic: `−E[D]` for both Wasserstein
/// families, the non-saturating `E[softplus(−D)]` for BCE.
pub fn generator_loss(
    critic: &Mlp,
    fake: ArrayView2<f64>,
    kind: LossKind,
) -> Result<GeneratorLoss, CriticError> {
    let cache = critic.forward_cached(fake)?;
    let d = cache.output();
    let tape = critic.input_gradients(&cache);
    let n = d.len() as f64;
    let (loss, scale) = match kind {
        LossKind::W1 | LossKind::W1Soft => (-d.sum() / n, Array1::from_elem(d.len(), -1.0 / n)),
        LossKind::Bce => (
            d.mapv(|v| softplus(-v)).sum() / n,
            d.mapv(|v| -sigmoid(-v) / n),
        ),
    };
    let grad_x = tape.input_gradient() * &scale.insert_axis(NdAxis(1));
    Ok(GeneratorLoss { loss, grad_x, d })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSquash {
    /// `exp(D)`.
    #[default]
    Raw,
    /// `exp(tanh(ηD))`.
    Tanh,
}

/// Style reward `exp(D(x̃))` per row.
pub fn style_reward(
    net: &Mlp,
    x: ArrayView2<f64>,
    squash: RewardSquash,
    eta: f64,
) -> Result<Array1<f64>, CriticError> {
    let d = net.forward(x)?;
    Ok(match squash {
        RewardSquash::Raw => d.mapv(f64::exp),
        RewardSquash::Tanh => d.mapv(|v| (eta * v).tanh().exp()),
    })
}

pub fn style_reward_from_output(d: f64) -> f64 {
    d.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(w: &[f64]) -> Mlp {
        let mut net = Mlp::zeros(&[w.len(), 1]).unwrap();
        net.layers[0].w = Array2::from_shape_vec((1, w.len()), w.to_vec()).unwrap();
        net
    }

    fn batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn identical_batches_cancel() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::new(&[3, 8, 1], &mut rng).unwrap();
        let x = batch(&mut rng, 16, 3);
        for kind in [LossKind::W1, LossKind::W1Soft] {
            let out =
                critic_loss(&net, x.view(), x.view(), &LossConfig::new(kind), &mut rng).unwrap();
            assert_eq!(out.metrics.main, 0.0);
        }
    }

    #[test]
    fn zero_lambda_identical_batches_have_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[3, 8, 1], &mut rng).unwrap();
        let x = batch(&mut rng, 16, 3);
        let cfg = LossConfig {
            lambda: 0.0,
            ..LossConfig::new(LossKind::W1Soft)
        };
        let out = critic_loss(&net, x.view(), x.view(), &cfg, &mut rng).unwrap();
        assert!(out.grad.to_flat().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn unit_linear_critic_has_no_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = linear(&[0.6, 0.8]);
        let (r, f) = (batch(&mut rng, 8, 2), batch(&mut rng, 8, 2));
        for kind in [LossKind::W1, LossKind::W1Soft] {
            let out =
                critic_loss(&net, r.view(), f.view(), &LossConfig::new(kind), &mut rng).unwrap();
            assert!(
                out.metrics.penalty.abs() < 1e-24,
                "{kind}: {}",
                out.metrics.penalty
            );
        }
    }

    #[test]
    fn half_norm_critic_penalties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = linear(&[0.3, 0.4]);
        let (r, f) = (batch(&mut rng, 8, 2), batch(&mut rng, 8, 2));
        let two = critic_loss(
            &net,
            r.view(),
            f.view(),
            &LossConfig::new(LossKind::W1),
            &mut rng,
        )
        .unwrap();
        assert!((two.metrics.penalty - 10.0 * 0.25).abs() < 1e-12);
        let one = critic_loss(
            &net,
            r.view(),
            f.view(),
            &LossConfig::new(LossKind::W1Soft),
            &mut rng,
        )
        .unwrap();
        assert_eq!(one.metrics.penalty, 0.0);
    }

    #[test]
    fn swapping_batches_negates_main_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&[2, 8, 1], &mut rng).unwrap();
        let (r, f) = (batch(&mut rng, 8, 2), batch(&mut rng, 8, 2));
        let alphas = vec![0.5; 8];
        for kind in [LossKind::W1, LossKind::W1Soft] {
            let a = critic_loss_with(&net, r.view(), f.view(), &LossConfig::new(kind), &alphas)
                .unwrap();
            let b = critic_loss_with(&net, f.view(), r.view(), &LossConfig::new(kind), &alphas)
                .unwrap();
            assert_eq!(a.metrics.main, -b.metrics.main);
        }
    }

    #[test]
    fn soft_main_terms_are_bounded() {
        let net = linear(&[10.0]);
        let r = array![[1.0], [2.0]];
        let f = array![[-1.0], [-3.0]];
        let out = critic_loss_with(
            &net,
            r.view(),
            f.view(),
            &LossConfig::new(LossKind::W1Soft),
            &[0.5, 0.5],
        )
        .unwrap();
        assert!(out.metrics.main > -2.0 && out.metrics.main < 2.0);
    }

    #[test]
    fn reward_is_exp_of_output() {
        let mut net = linear(&[1.0]);
        let r = style_reward(
            &net,
            array![[0.0], [1.0], [-50.0]].view(),
            RewardSquash::Raw,
            0.3,
        )
        .unwrap();
        assert_eq!(r[0], 1.0);
        assert!((r[1] - std::f64::consts::E).abs() < 1e-15);
        assert!(r[2] > 0.0 && r[2] < 1e-20);
        net.layers[0].w[[0, 0]] = 2.0;
        let s = style_reward(&net, array![[1.0]].view(), RewardSquash::Tanh, 0.3).unwrap();
        assert!(s[0] < std::f64::consts::E);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let net = linear(&[1.0]);
        let empty = Array2::<f64>::zeros((0, 1));
        let x = array![[1.0]];
        assert!(matches!(
            critic_loss_with(&net, empty.view(), x.view(), &LossConfig::default(), &[]),
            Err(CriticError::EmptyBatch)
        ));
    }

    #[test]
    fn parse_loss_names() {
        assert_eq!("w1_soft".parse::<LossKind>().unwrap(), LossKind::W1Soft);
        assert!("wgan".parse::<LossKind>().is_err());
    }
}
