use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{make_dataset, Dataset, DatasetSpec};
use super::metrics::{mode_coverage, Coverage};
use crate::critic::{
    critic_widths, generator_loss, train_critic_step, Adam, AdamConfig, LossConfig, LossKind, Mlp,
};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub dataset: DatasetSpec,
    pub losses: Vec<LossKind>,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub batch: usize,
    pub latent_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub critic_lr: f64,
    pub generator_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Critic updates per generator update.
    pub critic_steps: usize,
    pub eta: f64,
    pub lambda: f64,
    pub coverage_samples: usize,
    /// Coverage radius in units of the mixture σ.
    pub coverage_sigmas: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::Gauss2,
            losses: LossKind::ALL.to_vec(),
            seeds: (0..5).collect(),
            steps: 3000,
            batch: 128,
            latent_dim: 8,
            generator_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            critic_lr: 1e-3,
            generator_lr: 1e-3,
            beta1: 0.5,
            beta2: 0.9,
            critic_steps: 5,
            eta: 0.3,
            lambda: 10.0,
            coverage_samples: 4000,
            coverage_sigmas: 3.0,
        }
    }
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.losses.is_empty() {
            return bad("losses must be non-empty");
        }
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty");
        }
        if self.batch == 0
            || self.latent_dim == 0
            || self.critic_steps == 0
            || self.coverage_samples == 0
        {
            return bad("batch, latent_dim, critic_steps and coverage_samples must be positive");
        }
        if self.generator_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        let rates = [self.critic_lr, self.generator_lr];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.coverage_sigmas.is_finite() && self.coverage_sigmas >= 0.0) {
            return bad("coverage_sigmas must be non-negative");
        }
        for &kind in &self.losses {
            self.loss_config(kind).validate()?;
        }
        Ok(())
    }

    pub fn loss_config(&self, kind: LossKind) -> LossConfig {
        LossConfig {
            eta: self.eta,
            lambda: self.lambda,
            ..LossConfig::new(kind)
        }
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..Default::default()
        }
    }
}

/// Metrics logged after one critic/generator round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub d_real_mean: f64,
    pub d_real_std: f64,
    pub d_fake_mean: f64,
    pub d_fake_std: f64,
    pub penalty: f64,
    pub critic_loss: f64,
    pub generator_loss: f64,
    /// `exp(D)` over the generator batch.
    pub reward_mean: f64,
    pub reward_std: f64,
    /// Extremes of `tanh(ηD)` over the generator batch.
    pub soft_min: f64,
    pub soft_max: f64,
}

impl StepRecord {
    pub const HEADER: [&'static str; 12] = [
        "step",
        "d_real_mean",
        "d_real_std",
        "d_fake_mean",
        "d_fake_std",
        "penalty",
        "critic_loss",
        "generator_loss",
        "reward_mean",
        "reward_std",
        "soft_min",
        "soft_max",
    ];

    pub fn fields(&self) -> [String; 12] {
        [
            self.step.to_string(),
            self.d_real_mean.to_string(),
            self.d_real_std.to_string(),
            self.d_fake_mean.to_string(),
            self.d_fake_std.to_string(),
            self.penalty.to_string(),
            self.critic_loss.to_string(),
            self.generator_loss.to_string(),
            self.reward_mean.to_string(),
            self.reward_std.to_string(),
            self.soft_min.to_string(),
            self.soft_max.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub loss: LossKind,
    pub seed: u64,
    /// One record per step; a diverged run stops at the failing step.
    pub steps: Vec<StepRecord>,
    pub coverage: Option<Coverage>,
    pub diverged: bool,
    /// Critic batches whose `tanh(ηD)` reached ±1 (tracked for `w1_soft`).
    pub tanh_violations: usize,
}

impl RunReport {
    pub fn name(&self) -> String {
        run_name(&self.dataset, self.loss, self.seed)
    }
}

pub fn run_name(dataset: &str, loss: LossKind, seed: u64) -> String {
    format!("{dataset}_{}_seed{seed}", loss.name())
}

/// Independent random streams of one run. Every loss family sees the same
/// initial weights, data and latent draws for a given seed.
#[derive(Clone, Copy)]
enum Stream {
    CriticInit = 1,
    GeneratorInit = 2,
    Data = 3,
    Latent = 4,
    Penalty = 5,
    Eval = 6,
}

fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

fn latent<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, dim), || rng.sample(StandardNormal))
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains one generator/critic pair.
pub fn train_run(
    spec: &BenchmarkSpec,
    data: &Dataset,
    loss: LossKind,
    seed: u64,
) -> Result<RunReport, Error> {
    let dim = data.dim();
    let cfg = spec.loss_config(loss);
    let mut critic = Mlp::new(
        &critic_widths(dim, &spec.critic_hidden),
        &mut stream(seed, Stream::CriticInit),
    )?;
    let mut gen_widths = vec![spec.latent_dim];
    gen_widths.extend_from_slice(&spec.generator_hidden);
    gen_widths.push(dim);
    let mut generator = Mlp::new(&gen_widths, &mut stream(seed, Stream::GeneratorInit))?;
    let mut critic_opt = Adam::new(&critic, spec.adam(spec.critic_lr));
    let mut gen_opt = Adam::new(&generator, spec.adam(spec.generator_lr));
    let (mut data_rng, mut z_rng, mut pen_rng) = (
        stream(seed, Stream::Data),
        stream(seed, Stream::Latent),
        stream(seed, Stream::Penalty),
    );

    let mut report = RunReport {
        dataset: spec.dataset.name().to_string(),
        loss,
        seed,
        steps: Vec::with_capacity(spec.steps),
        coverage: None,
        diverged: false,
        tanh_violations: 0,
    };
    for step in 0..spec.steps {
        let mut outcome = None;
        for _ in 0..spec.critic_steps {
            let real = data.sample(spec.batch, &mut data_rng);
            let fake =
                generator.forward_matrix(latent(spec.batch, spec.latent_dim, &mut z_rng).view())?;
            let o = train_critic_step(
                &mut critic,
                real.view(),
                fake.view(),
                &cfg,
                &mut critic_opt,
                &mut pen_rng,
            )?;
            if loss == LossKind::W1Soft && !o.metrics.tanh_bounded {
                report.tanh_violations += 1;
            }
            let rejected = o.rejected;
            outcome = Some(o);
            if rejected {
                break;
            }
        }
        let outcome = outcome.expect("critic_steps > 0");

        let z = latent(spec.batch, spec.latent_dim, &mut z_rng);
        let cache = generator.forward_cached(z.view())?;
        let g = generator_loss(&critic, cache.output_matrix().view(), loss)?;
        let grad = generator.backward(Some((&cache, &g.grad_x)), None);
        let g_finite = g.loss.is_finite() && grad.is_finite();
        if g_finite && !outcome.rejected {
            gen_opt.step(&mut generator, &grad);
        }

        let (reward_mean, reward_std) = mean_std(g.d.iter().map(|d| d.exp()));
        let soft = g.d.iter().map(|d| (cfg.eta * d).tanh());
        let m = outcome.metrics;
        report.steps.push(StepRecord {
            step,
            d_real_mean: m.d_real_mean,
            d_real_std: m.d_real_std,
            d_fake_mean: m.d_fake_mean,
            d_fake_std: m.d_fake_std,
            penalty: m.penalty,
            critic_loss: outcome.loss,
            generator_loss: g.loss,
            reward_mean,
            reward_std,
            soft_min: soft.clone().fold(f64::INFINITY, f64::min),
            soft_max: soft.fold(f64::NEG_INFINITY, f64::max),
        });
        if outcome.rejected || !g_finite || !generator.is_finite() || !critic.is_finite() {
            report.diverged = true;
            break;
        }
    }

    if let (Some(mix), false) = (data.mixture(), report.diverged) {
        let z = latent(
            spec.coverage_samples,
            spec.latent_dim,
            &mut stream(seed, Stream::Eval),
        );
        let samples = generator.forward_matrix(z.view())?;
        report.coverage = Some(mode_coverage(
            samples.view(),
            &mix.centers,
            spec.coverage_sigmas * mix.sigma,
        ));
    }
    Ok(report)
}

/// Runs every (loss, seed) pair in parallel; reports come back ordered by
/// loss, then seed, as listed in the spec.
pub fn train_adversarial(spec: &BenchmarkSpec) -> Result<Vec<RunReport>, Error> {
    spec.validate()?;
    let data = make_dataset(&spec.dataset)?;
    train_adversarial_on(spec, &data)
}

pub fn train_adversarial_on(spec: &BenchmarkSpec, data: &Dataset) -> Result<Vec<RunReport>, Error> {
    let runs: Vec<(LossKind, u64)> = spec
        .losses
        .iter()
        .flat_map(|&l| spec.seeds.iter().map(move |&s| (l, s)))
        .collect();
    runs.par_iter()
        .map(|&(loss, seed)| train_run(spec, data, loss, seed))
        .collect()
}
