//! Adversarial style critic: MLP, losses, optimizer and style features.

pub mod features;
pub mod loss;
pub mod mlp;
pub mod optim;

pub use features::{extract_features, style_dim, style_feature, transition_matrix, FeatureStats};
pub use loss::{
    critic_loss, critic_loss_with, generator_loss, style_reward, CriticMetrics, GeneratorLoss,
    LossConfig, LossKind, LossOutput, PenaltyKind, RewardSquash,
};
pub use mlp::{Checkpoint, Mlp};
pub use optim::{train_critic_step, Adam, AdamConfig, StepOutcome};

/// Default critic hidden widths.
pub const DEFAULT_HIDDEN: [usize; 3] = [1024, 512, 256];

/// `[input, hidden.., 1]`.
pub fn critic_widths(input: usize, hidden: &[usize]) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(1);
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central differences of the full critic loss (main terms and penalty)
    /// against the analytic parameter gradient.
    #[test]
    fn loss_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in LossKind::ALL {
            for _ in 0..3 {
                let mut net = Mlp::new(&[3, 7, 5, 1], &mut rng).unwrap();
                // larger weights push gradient norms past 1 so both penalty branches fire
                let flat: Vec<f64> = net.to_flat().iter().map(|v| v * 2.5).collect();
                net.set_flat(&flat).unwrap();
                let real = Array2::from_shape_fn((6, 3), |_| rng.gen_range(-1.5..1.5));
                let fake = Array2::from_shape_fn((6, 3), |_| rng.gen_range(-1.5..1.5));
                let alphas: Vec<f64> = (0..6).map(|_| rng.gen()).collect();
                let cfg = LossConfig::new(kind);
                let out = critic_loss_with(&net, real.view(), fake.view(), &cfg, &alphas).unwrap();
                let analytic = out.grad.to_flat();
                let h = 1e-4;
                let mut probe = net.clone();
                for (i, g) in analytic.iter().enumerate() {
                    let mut p = flat.clone();
                    p[i] += h;
                    probe.set_flat(&p).unwrap();
                    let up = critic_loss_with(&probe, real.view(), fake.view(), &cfg, &alphas)
                        .unwrap()
                        .loss;
                    p[i] -= 2.0 * h;
                    probe.set_flat(&p).unwrap();
                    let down = critic_loss_with(&probe, real.view(), fake.view(), &cfg, &alphas)
                        .unwrap()
                        .loss;
                    let fd = (up - down) / (2.0 * h);
                    assert!(
                        (g - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                        "{kind} param {i}: {g} vs {fd}"
                    );
                }
            }
        }
    }
}
