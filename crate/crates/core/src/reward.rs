//! Raw multi-objective team reward and running z-score scalarization.

use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_watts, node_loads, LinkReport};
use crate::config::{RewardConfig, ScenarioConfig};
use crate::env::WorldState;

pub const N_COMPONENTS: usize = 5;
pub const COMPONENT_NAMES: [&str; N_COMPONENTS] = ["ee", "fair", "load", "cov", "qos"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardVector {
    /// Sum rate over radiated power, Mbps/W.
    pub r_ee: f64,
    pub r_fair: f64,
    pub r_load: f64,
    pub r_cov: f64,
    pub r_qos: f64,
    pub collided: bool,
}

impl RewardVector {
    pub fn components(&self) -> [f64; N_COMPONENTS] {
        [self.r_ee, self.r_fair, self.r_load, self.r_cov, self.r_qos]
    }
}

/// Jain's index over `xs`. Zero when every entry is zero.
pub fn jain_index(xs: &[f64]) -> f64 {
    let sum: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    if sq <= 0.0 {
        0.0
    } else {
        sum * sum / (xs.len() as f64 * sq)
    }
}

pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Team reward shared by all agents; `collided` is filled in per agent by the
/// environment.
pub fn compute_raw(links: &[LinkReport], world: &WorldState, cfg: &ScenarioConfig) -> RewardVector {
    let ch = &cfg.channel;
    let n = world.n_uavs();
    let m = links.len();
    let rates: Vec<f64> = links.iter().map(|l| l.rate_bps).collect();

    let power_w = n as f64 * dbm_to_watts(ch.p_uav_dbm) + dbm_to_watts(ch.p_gbs_dbm);
    let r_ee = rates.iter().sum::<f64>() / 1e6 / power_w;

    let counts: Vec<f64> = node_loads(links, n)[1..].iter().map(|&c| c as f64).collect();
    let r_load = if n == 0 {
        0.0
    } else {
        -population_std(&counts) / (m as f64 / n as f64).max(1.0)
    };

    let covered = rates.iter().filter(|&&r| r >= ch.rate_threshold_bps).count();
    let r_cov = if m == 0 { 0.0 } else { covered as f64 / m as f64 };
    let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let r_qos = if m == 0 {
        0.0
    } else {
        -((ch.rate_threshold_bps - min_rate) / ch.rate_threshold_bps).max(0.0)
    };

    RewardVector {
        r_ee,
        r_fair: jain_index(&rates),
        r_load,
        r_cov,
        r_qos,
        collided: false,
    }
}

/// Welford accumulator for one component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunningMoments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn std(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2.max(0.0) / self.count as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizerState {
    pub moments: [RunningMoments; N_COMPONENTS],
    pub warmup_min: u64,
    pub epsilon: f64,
}

impl NormalizerState {
    pub fn new(cfg: &RewardConfig) -> Self {
        NormalizerState {
            moments: [RunningMoments::default(); N_COMPONENTS],
            warmup_min: cfg.warmup_min,
            epsilon: cfg.epsilon,
        }
    }

    /// Updates the statistics with `raw` and returns the normalized
    /// components. Before `warmup_min` samples the raw values pass through.
    pub fn update_and_normalize(&mut self, raw: &RewardVector) -> [f64; N_COMPONENTS] {
        let mut out = raw.components();
        for (k, x) in out.iter_mut().enumerate() {
            let mom = &mut self.moments[k];
            mom.push(*x);
            if mom.count >= self.warmup_min {
                *x = (*x - mom.mean) / (mom.std() + self.epsilon);
            }
        }
        out
    }

    /// Normalizes without touching the statistics.
    pub fn normalize(&self, raw: &RewardVector) -> [f64; N_COMPONENTS] {
        let mut out = raw.components();
        for (k, x) in out.iter_mut().enumerate() {
            let mom = &self.moments[k];
            if mom.count >= self.warmup_min {
                *x = (*x - mom.mean) / (mom.std() + self.epsilon);
            }
        }
        out
    }
}

pub fn scalarize(normalized: &[f64; N_COMPONENTS], collided: bool, cfg: &RewardConfig) -> f64 {
    let weighted: f64 = normalized.iter().zip(&cfg.weights).map(|(r, w)| r * w).sum();
    weighted - if collided { cfg.collision_penalty } else { 0.0 }
}

/// Single-sample update-then-normalize followed by weighted scalarization.
pub fn normalize_and_scalarize(raw: &RewardVector, norm: &mut NormalizerState, cfg: &RewardConfig) -> f64 {
    let z = norm.update_and_normalize(raw);
    scalarize(&z, raw.collided, cfg)
}
