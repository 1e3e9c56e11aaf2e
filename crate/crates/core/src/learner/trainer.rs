//! Episode loop: collect a rollout with the shared actor, scalarize the
//! reward vectors in collection order, then run GAE and PPO.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::Serialize;

use super::adam::AdamState;
use super::buffer::RolloutBuffer;
use super::checkpoint::Checkpoint;
use super::mlp::{log_softmax, Mlp};
use super::ppo::{ppo_update, UpdateStats};
use crate::config::{Phase, ScenarioConfig};
use crate::env::{global_state, global_state_dim, observation_dim, reset, step, Action, Observation, WorldState};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, rolling_variance, PolicyTag, StepMetrics, TailAverage};
use crate::reward::{scalarize, NormalizerState};
use crate::rng::{stream, Purpose, SimRng};

/// Final-layer init scale of the actor, so the first policy is close to
/// uniform.
const ACTOR_OUT_SCALE: f64 = 0.01;

pub fn actor_dims(cfg: &ScenarioConfig) -> Vec<usize> {
    let mut d = vec![observation_dim(cfg) + cfg.world.n_uavs];
    d.extend(&cfg.learner.actor_hidden);
    d.push(Action::COUNT);
    d
}

pub fn critic_dims(cfg: &ScenarioConfig) -> Vec<usize> {
    let mut d = vec![global_state_dim(cfg) + cfg.world.n_uavs];
    d.extend(&cfg.learner.critic_hidden);
    d.push(1);
    d
}

fn with_one_hot(features: &[f64], agent: usize, n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(features.len() + n);
    v.extend_from_slice(features);
    v.extend((0..n).map(|i| if i == agent { 1.0 } else { 0.0 }));
    v
}

pub fn actor_input(obs: &Observation, agent: usize, n: usize) -> Vec<f64> {
    with_one_hot(&obs.features, agent, n)
}

pub fn critic_input(state: &[f64], agent: usize, n: usize) -> Vec<f64> {
    with_one_hot(state, agent, n)
}

/// One row of the optional per-step trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub episode: u64,
    pub step: u64,
    pub agent: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub action: usize,
    pub collided: bool,
    pub served_users: usize,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeReport {
    pub episode: u64,
    pub phase: Phase,
    pub metrics: StepMetrics,
    pub total_reward: f64,
    pub reward_variance: f64,
    pub update: UpdateStats,
    /// Normalizer as it stood before this episode's rollout.
    pub normalizer_before: NormalizerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub cfg: ScenarioConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub normalizer: NormalizerState,
    pub next_episode: u64,
    pub reward_history: [Vec<f64>; 3],
}

fn history_slot(tag: PolicyTag) -> usize {
    match tag {
        PolicyTag::Gmappo => 0,
        PolicyTag::Kmeans => 1,
        PolicyTag::Random => 2,
    }
}

struct Rollout {
    metrics: StepMetrics,
    total_reward: f64,
    buffer: RolloutBuffer,
    bootstrap: Vec<f64>,
}

impl Trainer {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream(cfg.seed, Purpose::Init, 0);
        let actor = Mlp::init(&actor_dims(cfg), ACTOR_OUT_SCALE, &mut rng);
        let critic = Mlp::init(&critic_dims(cfg), 1.0, &mut rng);
        let l = &cfg.learner;
        Ok(Trainer {
            actor_opt: AdamState::new(actor.params.len(), l.actor_lr, l.adam_beta1, l.adam_beta2, l.adam_eps),
            critic_opt: AdamState::new(critic.params.len(), l.critic_lr, l.adam_beta1, l.adam_beta2, l.adam_eps),
            actor,
            critic,
            normalizer: NormalizerState::new(&cfg.reward),
            next_episode: 0,
            reward_history: Default::default(),
            cfg: cfg.clone(),
        })
    }

    pub fn from_checkpoint(cfg: &ScenarioConfig, ck: Checkpoint) -> Result<Self> {
        cfg.validate()?;
        if ck.actor.dims() != actor_dims(cfg).as_slice() || ck.critic.dims() != critic_dims(cfg).as_slice() {
            return Err(Error::Checkpoint(format!(
                "network shapes {:?}/{:?} do not match the configuration",
                ck.actor.dims(),
                ck.critic.dims()
            )));
        }
        if ck.seed != cfg.seed {
            return Err(Error::Checkpoint(format!("checkpoint seed {} differs from configured {}", ck.seed, cfg.seed)));
        }
        Ok(Trainer {
            cfg: cfg.clone(),
            actor: ck.actor,
            critic: ck.critic,
            actor_opt: ck.actor_opt,
            critic_opt: ck.critic_opt,
            normalizer: ck.normalizer,
            next_episode: ck.next_episode,
            reward_history: ck.reward_history,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            next_episode: self.next_episode,
            seed: self.cfg.seed,
            actor: self.actor.clone(),
            critic: self.critic.clone(),
            actor_opt: self.actor_opt.clone(),
            critic_opt: self.critic_opt.clone(),
            normalizer: self.normalizer.clone(),
            reward_history: self.reward_history.clone(),
        }
    }

    /// Appends an episode total and returns the rolling variance.
    pub fn record_total(&mut self, tag: PolicyTag, total: f64) -> f64 {
        let h = &mut self.reward_history[history_slot(tag)];
        h.push(total);
        let window = self.cfg.experiment.variance_window;
        // only the window is ever read back
        if h.len() > window {
            h.drain(..h.len() - window);
        }
        rolling_variance(h, window)
    }

    /// Action distribution of `agent` given its observation.
    pub fn policy(&self, obs: &Observation, agent: usize) -> Result<Vec<f64>> {
        let logits = self.actor.forward(&actor_input(obs, agent, self.cfg.world.n_uavs));
        let logp = log_softmax(&logits);
        if logp.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite(format!("actor output for agent {agent}")));
        }
        Ok(logp)
    }

    fn choose(&self, logp: &[f64], mode: ActionMode, rng: &mut SimRng) -> Result<usize> {
        Ok(match mode {
            ActionMode::Greedy => {
                let mut best = 0;
                for (i, l) in logp.iter().enumerate() {
                    if *l > logp[best] {
                        best = i;
                    }
                }
                best
            }
            ActionMode::Sample => {
                let w: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
                WeightedIndex::new(&w)
                    .map_err(|e| Error::NonFinite(format!("action distribution: {e}")))?
                    .sample(rng)
            }
        })
    }

    /// Rolls out one episode. With `learn` the normalizer is updated in
    /// collection order and the buffer is filled; otherwise rewards are scored
    /// against the frozen statistics.
    fn rollout(
        &mut self,
        episode: u64,
        mode: ActionMode,
        learn: bool,
        mut trace: Option<&mut Vec<TraceRow>>,
    ) -> Result<Rollout> {
        let cfg = self.cfg.clone();
        let n = cfg.world.n_uavs;
        let horizon = cfg.env.horizon_steps;
        let mut env_rng = stream(cfg.seed, Purpose::Environment, episode);
        let mut pol_rng = stream(cfg.seed, if learn { Purpose::Policy } else { Purpose::Eval }, episode);
        let (mut world, mut obs) = reset(&cfg, episode, &mut env_rng)?;
        let mut buffer = RolloutBuffer::new(n);
        let mut tail = TailAverage::new(horizon, cfg.experiment.metrics_tail_fraction);
        let mut total = 0.0;
        let checksum = self.actor.checksum();

        for t in 0..horizon {
            let gs = global_state(&world, &cfg);
            let mut actions = Vec::with_capacity(n);
            let mut logps = Vec::with_capacity(n);
            for (i, o) in obs.iter().enumerate() {
                let logp = self.policy(o, i)?;
                let a = self.choose(&logp, mode, &mut pol_rng)?;
                actions.push(a);
                logps.push(logp[a]);
            }
            let out = step(&mut world, &actions, &cfg)?;

            let z = if learn {
                self.normalizer.update_and_normalize(&out.rewards[0])
            } else {
                self.normalizer.normalize(&out.rewards[0])
            };
            let rewards: Vec<f64> = out.rewards.iter().map(|r| scalarize(&z, r.collided, &cfg.reward)).collect();
            total += rewards.iter().sum::<f64>() / n as f64;

            if learn {
                for i in 0..n {
                    let ci = critic_input(&gs, i, n);
                    let v = self.critic.forward(&ci)[0];
                    buffer.push(actor_input(&obs[i], i, n), ci, actions[i], logps[i], v, rewards[i]);
                }
            }
            if let Some(rows) = trace.as_deref_mut() {
                push_trace(rows, episode, t, &actions, &world, &out.collided(), &rewards);
            }
            tail.record(t, compute_metrics(&world.links, n, &cfg));
            obs = out.observations;
            if out.done {
                break;
            }
        }
        assert_eq!(checksum, self.actor.checksum(), "actor changed during rollout");

        // episodes end on the time limit, so bootstrap from the last state
        let bootstrap = if learn {
            let gs = global_state(&world, &cfg);
            (0..n).map(|i| self.critic.forward(&critic_input(&gs, i, n))[0]).collect()
        } else {
            vec![]
        };
        Ok(Rollout { metrics: tail.mean(), total_reward: total, buffer, bootstrap })
    }

    /// Collects one episode, updates both networks and advances the episode
    /// counter.
    pub fn train_episode(&mut self, trace: Option<&mut Vec<TraceRow>>) -> Result<EpisodeReport> {
        let episode = self.next_episode;
        let phase = crate::scenario::phase_for_episode(&self.cfg, episode);
        let normalizer_before = self.normalizer.clone();
        let r = self.rollout(episode, ActionMode::Sample, true, trace)?;

        let l = &self.cfg.learner;
        let mut samples = r.buffer.into_samples(&r.bootstrap, l.gamma, l.gae_lambda)?;
        let mut shuffle = stream(self.cfg.seed, Purpose::Shuffle, episode);
        let learner_cfg = self.cfg.learner.clone();
        let update = ppo_update(
            &mut self.actor,
            &mut self.critic,
            &mut self.actor_opt,
            &mut self.critic_opt,
            &mut samples,
            &learner_cfg,
            &mut shuffle,
        )?;

        let reward_variance = self.record_total(PolicyTag::Gmappo, r.total_reward);
        self.next_episode += 1;
        Ok(EpisodeReport {
            episode,
            phase,
            metrics: r.metrics,
            total_reward: r.total_reward,
            reward_variance,
            update,
            normalizer_before,
        })
    }

    /// Greedy rollout with frozen weights and normalizer.
    pub fn evaluate_episode(&mut self, episode: u64, trace: Option<&mut Vec<TraceRow>>) -> Result<(StepMetrics, f64)> {
        let r = self.rollout(episode, ActionMode::Greedy, false, trace)?;
        Ok((r.metrics, r.total_reward))
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn push_trace(
    rows: &mut Vec<TraceRow>,
    episode: u64,
    t: usize,
    actions: &[usize],
    world: &WorldState,
    collided: &[bool],
    rewards: &[f64],
) {
    let loads = world.loads();
    for (i, p) in world.uav_pos.iter().enumerate() {
        rows.push(TraceRow {
            episode,
            step: t as u64,
            agent: i,
            x: p.x,
            y: p.y,
            z: p.z,
            action: actions[i],
            collided: collided[i],
            served_users: loads[i + 1],
            reward: rewards[i],
        });
    }
}
