//! Clipped-surrogate actor loss, squared-error critic loss and their
//! analytic gradients, plus the minibatch optimization loop.

use rand::seq::SliceRandom;

use super::adam::{clip_grad_norm, AdamState};
use super::gae::standardize;
use super::mlp::{log_softmax, Mlp};
use crate::config::LearnerConfig;
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// One (step, agent) training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub actor_in: Vec<f64>,
    pub critic_in: Vec<f64>,
    pub action: usize,
    pub old_logp: f64,
    pub advantage: f64,
    pub value_target: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActorStats {
    pub loss: f64,
    pub surrogate: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
}

pub fn clip(ratio: f64, eps: f64) -> f64 {
    ratio.clamp(1.0 - eps, 1.0 + eps)
}

pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> f64 {
    (ratio * adv).min(clip(ratio, eps) * adv)
}

/// d surrogate / d ratio. Zero where the clipped branch is active.
fn surrogate_slope(ratio: f64, adv: f64, eps: f64) -> f64 {
    if (adv >= 0.0 && ratio > 1.0 + eps) || (adv < 0.0 && ratio < 1.0 - eps) {
        0.0
    } else {
        adv
    }
}

fn entropy_of(logp: &[f64]) -> f64 {
    -logp.iter().map(|l| l.exp() * l).sum::<f64>()
}

/// Actor loss `-(mean surrogate + c_H * mean entropy)`; gradients are
/// accumulated into `grad` when given.
pub fn actor_loss(
    actor: &Mlp,
    batch: &[&Sample],
    clip_eps: f64,
    entropy_coef: f64,
    mut grad: Option<&mut [f64]>,
) -> Result<ActorStats> {
    let b = batch.len() as f64;
    let mut stats = ActorStats::default();
    for s in batch {
        let cache = actor.forward_cached(&s.actor_in);
        let logp = log_softmax(cache.output());
        if logp.iter().any(|l| l.is_nan()) {
            return Err(Error::NonFinite("actor log-probabilities".into()));
        }
        let ratio = (logp[s.action] - s.old_logp).exp();
        let surr = clipped_surrogate(ratio, s.advantage, clip_eps);
        let ent = entropy_of(&logp);
        stats.surrogate += surr;
        stats.entropy += ent;
        if (ratio - 1.0).abs() > clip_eps {
            stats.clip_fraction += 1.0;
        }
        if let Some(g) = grad.as_deref_mut() {
            let slope = surrogate_slope(ratio, s.advantage, clip_eps);
            let g_out: Vec<f64> = logp
                .iter()
                .enumerate()
                .map(|(j, &lj)| {
                    let p = lj.exp();
                    let onehot = if j == s.action { 1.0 } else { 0.0 };
                    let d_surr = slope * ratio * (onehot - p);
                    let d_ent = -p * (lj + ent);
                    -(d_surr + entropy_coef * d_ent) / b
                })
                .collect();
            actor.backward(&cache, &g_out, g);
        }
    }
    stats.surrogate /= b;
    stats.entropy /= b;
    stats.clip_fraction /= b;
    stats.loss = -(stats.surrogate + entropy_coef * stats.entropy);
    if !stats.loss.is_finite() {
        return Err(Error::NonFinite(format!("actor loss {}", stats.loss)));
    }
    Ok(stats)
}

/// Critic loss `mean (V - target)^2`.
pub fn critic_loss(critic: &Mlp, batch: &[&Sample], mut grad: Option<&mut [f64]>) -> Result<f64> {
    let b = batch.len() as f64;
    let mut loss = 0.0;
    for s in batch {
        let cache = critic.forward_cached(&s.critic_in);
        let err = cache.output()[0] - s.value_target;
        loss += err * err / b;
        if let Some(g) = grad.as_deref_mut() {
            critic.backward(&cache, &[2.0 * err / b], g);
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("critic loss {loss}")));
    }
    Ok(loss)
}

/// `epochs` passes of shuffled minibatches over `samples`. Advantages are
/// standardized over the whole batch first.
pub fn ppo_update(
    actor: &mut Mlp,
    critic: &mut Mlp,
    actor_opt: &mut AdamState,
    critic_opt: &mut AdamState,
    samples: &mut [Sample],
    cfg: &LearnerConfig,
    rng: &mut SimRng,
) -> Result<UpdateStats> {
    let mut adv: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
    standardize(&mut adv);
    for (s, a) in samples.iter_mut().zip(adv) {
        s.advantage = a;
    }

    let mut stats = UpdateStats::default();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut g_actor = vec![0.0; actor.params.len()];
    let mut g_critic = vec![0.0; critic.params.len()];
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();

            g_actor.iter_mut().for_each(|g| *g = 0.0);
            let a = actor_loss(actor, &batch, cfg.clip_eps, cfg.entropy_coef, Some(&mut g_actor))?;
            clip_grad_norm(&mut g_actor, cfg.max_grad_norm);
            actor_opt.step(&mut actor.params, &g_actor);

            g_critic.iter_mut().for_each(|g| *g = 0.0);
            let c = critic_loss(critic, &batch, Some(&mut g_critic))?;
            clip_grad_norm(&mut g_critic, cfg.max_grad_norm);
            critic_opt.step(&mut critic.params, &g_critic);

            stats.actor_loss += a.loss;
            stats.critic_loss += c;
            stats.entropy += a.entropy;
            stats.clip_fraction += a.clip_fraction;
            stats.minibatches += 1;
        }
    }
    actor.ensure_finite("actor")?;
    critic.ensure_finite("critic")?;
    if stats.minibatches > 0 {
        let k = stats.minibatches as f64;
        stats.actor_loss /= k;
        stats.critic_loss /= k;
        stats.entropy /= k;
        stats.clip_fraction /= k;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn clip_arithmetic() {
        assert_eq!(clipped_surrogate(1.5, 2.0, 0.2), 1.2 * 2.0);
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), 0.8 * -1.0);
        assert_eq!(clipped_surrogate(1.0, 3.0, 0.2), 3.0);
        assert_eq!(clipped_surrogate(1.5, -2.0, 0.2), -3.0);
    }

    #[test]
    fn on_policy_surrogate_is_mean_advantage() {
        let actor = Mlp::init(&[3, 8, 7], 1.0, &mut stream(4, Purpose::Init, 0));
        let advs = [0.5, -1.25, 2.0];
        let samples: Vec<Sample> = advs
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let x = vec![i as f64 * 0.3, -0.2, 1.0];
                let logp = log_softmax(&actor.forward(&x));
                Sample { actor_in: x, critic_in: vec![], action: i, old_logp: logp[i], advantage: a, value_target: 0.0 }
            })
            .collect();
        let refs: Vec<&Sample> = samples.iter().collect();
        let st = actor_loss(&actor, &refs, 0.2, 0.0, None).unwrap();
        assert_eq!(st.surrogate, advs.iter().sum::<f64>() / 3.0);
        assert_eq!(st.clip_fraction, 0.0);
    }

    #[test]
    fn update_reduces_critic_loss() {
        let mut rng = stream(9, Purpose::Init, 0);
        let mut actor = Mlp::init(&[2, 8, 7], 0.01, &mut rng);
        let mut critic = Mlp::init(&[2, 16, 1], 1.0, &mut rng);
        let cfg = LearnerConfig::default();
        let mut ao = AdamState::new(actor.params.len(), cfg.actor_lr, 0.9, 0.999, 1e-8);
        let mut co = AdamState::new(critic.params.len(), cfg.critic_lr, 0.9, 0.999, 1e-8);
        let mut samples: Vec<Sample> = (0..128)
            .map(|i| {
                let x = vec![(i % 7) as f64 / 7.0, (i % 3) as f64 / 3.0];
                Sample {
                    actor_in: x.clone(),
                    critic_in: x.clone(),
                    action: i % 7,
                    old_logp: -(7f64).ln(),
                    advantage: if i % 7 == 2 { 1.0 } else { -0.1 },
                    value_target: x[0] - x[1],
                }
            })
            .collect();
        let refs: Vec<&Sample> = samples.iter().collect();
        let before = critic_loss(&critic, &refs, None).unwrap();
        let mut shuffle = stream(9, Purpose::Shuffle, 0);
        for _ in 0..20 {
            ppo_update(&mut actor, &mut critic, &mut ao, &mut co, &mut samples, &cfg, &mut shuffle).unwrap();
        }
        let refs: Vec<&Sample> = samples.iter().collect();
        assert!(critic_loss(&critic, &refs, None).unwrap() < 0.5 * before);
        let p = crate::learner::mlp::softmax(&actor.forward(&[2.0 / 7.0, 2.0 / 3.0]));
        assert!(p[2] > 1.0 / 7.0);
    }
}
