use super::gae::gae;
use super::ppo::Sample;
use crate::error::{Error, Result};

/// Per-episode storage, laid out step-major: entry `t * n_agents + i` is
/// agent `i` at step `t`.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub n_agents: usize,
    pub actor_in: Vec<Vec<f64>>,
    pub critic_in: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub logps: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(n_agents: usize) -> Self {
        RolloutBuffer { n_agents, ..Default::default() }
    }

    pub fn steps(&self) -> usize {
        if self.n_agents == 0 {
            0
        } else {
            self.actions.len() / self.n_agents
        }
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(&mut self, actor_in: Vec<f64>, critic_in: Vec<f64>, action: usize, logp: f64, value: f64, reward: f64) {
        self.actor_in.push(actor_in);
        self.critic_in.push(critic_in);
        self.actions.push(action);
        self.logps.push(logp);
        self.values.push(value);
        self.rewards.push(reward);
    }

    pub fn clear(&mut self) {
        let n = self.n_agents;
        *self = Self::new(n);
    }

    /// Runs GAE per agent and flattens into samples in (step, agent) order.
    /// `bootstrap[i]` is agent `i`'s value after the last step.
    pub fn into_samples(self, bootstrap: &[f64], gamma: f64, lambda: f64) -> Result<Vec<Sample>> {
        let n = self.n_agents;
        let len = self.actions.len();
        if [self.actor_in.len(), self.critic_in.len(), self.logps.len(), self.values.len(), self.rewards.len()]
            .iter()
            .any(|&l| l != len)
            || n == 0
            || len % n != 0
            || bootstrap.len() != n
        {
            return Err(Error::InvalidArgument("rollout buffer sequences are ragged".into()));
        }
        let t_len = len / n;
        let mut adv = vec![0.0; len];
        let mut targets = vec![0.0; len];
        for i in 0..n {
            let r: Vec<f64> = (0..t_len).map(|t| self.rewards[t * n + i]).collect();
            let v: Vec<f64> = (0..t_len).map(|t| self.values[t * n + i]).collect();
            let (a, tg) = gae(&r, &v, bootstrap[i], gamma, lambda)?;
            for t in 0..t_len {
                adv[t * n + i] = a[t];
                targets[t * n + i] = tg[t];
            }
        }
        Ok(self
            .actor_in
            .into_iter()
            .zip(self.critic_in)
            .enumerate()
            .map(|(k, (actor_in, critic_in))| Sample {
                actor_in,
                critic_in,
                action: self.actions[k],
                old_logp: self.logps[k],
                advantage: adv[k],
                value_target: targets[k],
            })
            .collect())
    }
}
