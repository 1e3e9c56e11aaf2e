//! Run configuration.
//!
//! A [`ScenarioConfig`] is the single source of every tunable: world geometry,
//! radio parameters, reward weights, learner hyperparameters and the phase
//! schedule. It round-trips through a sectioned `key = value` TOML file; any
//! unknown key is rejected so that typos fail loudly instead of silently
//! falling back to a default.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Vec2, Vec3};

/// User-distribution regime of the task chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Urban,
    Suburban,
    Rural,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Urban, Phase::Suburban, Phase::Rural];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Urban => "urban",
            Phase::Suburban => "suburban",
            Phase::Rural => "rural",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "urban" => Ok(Phase::Urban),
            "suburban" => Ok(Phase::Suburban),
            "rural" => Ok(Phase::Rural),
            other => Err(Error::Config(format!("unknown phase '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpan {
    pub phase: Phase,
    pub episodes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsersPerPhase {
    pub urban: usize,
    pub suburban: usize,
    pub rural: usize,
}

impl UsersPerPhase {
    pub fn get(&self, phase: Phase) -> usize {
        match phase {
            Phase::Urban => self.urban,
            Phase::Suburban => self.suburban,
            Phase::Rural => self.rural,
        }
    }

    pub fn set_all(&mut self, m: usize) {
        self.urban = m;
        self.suburban = m;
        self.rural = m;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub area_side_m: f64,
    pub n_uavs: usize,
    pub h_min_m: f64,
    pub h_max_m: f64,
    pub d_min_m: f64,
    pub gbs_pos: Vec3,
    pub users: UsersPerPhase,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            area_side_m: 2000.0,
            n_uavs: 4,
            h_min_m: 80.0,
            h_max_m: 120.0,
            d_min_m: 100.0,
            gbs_pos: Vec3::new(1000.0, 1000.0, 25.0),
            users: UsersPerPhase {
                urban: 140,
                suburban: 90,
                rural: 40,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_dbm_per_hz: f64,
    pub p_uav_dbm: f64,
    pub p_gbs_dbm: f64,
    pub g_uav_dbi: f64,
    pub g_gbs_dbi: f64,
    /// Environment constant `a` of the logistic LoS model.
    pub a_env: f64,
    /// Environment constant `b` of the logistic LoS model.
    pub b_env: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    /// Terrestrial path-loss exponent.
    pub kappa_gbs: f64,
    /// Reference distance of the terrestrial model; free-space loss applies up to here.
    pub d0_m: f64,
    pub shadow_sigma_db: f64,
    pub rate_threshold_bps: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 2.0e9,
            bandwidth_hz: 20.0e6,
            noise_dbm_per_hz: -174.0,
            p_uav_dbm: 23.0,
            p_gbs_dbm: 43.0,
            g_uav_dbi: 2.0,
            g_gbs_dbi: 15.0,
            a_env: 9.61,
            b_env: 0.16,
            eta_los_db: 1.0,
            eta_nlos_db: 20.0,
            kappa_gbs: 3.8,
            d0_m: 1.0,
            shadow_sigma_db: 8.0,
            rate_threshold_bps: 1.0e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub step_xy_m: f64,
    pub step_z_m: f64,
    pub horizon_steps: usize,
    /// Nearest neighbours encoded in each observation.
    pub k_neighbors: usize,
    /// Nearest users encoded in each observation.
    pub l_users: usize,
    /// Length that divides user offsets in observations.
    pub user_offset_scale_m: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            step_xy_m: 50.0,
            step_z_m: 10.0,
            horizon_steps: 200,
            k_neighbors: 3,
            l_users: 10,
            user_offset_scale_m: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Preference weights in component order (ee, fair, load, cov, qos).
    pub weights: Vec<f64>,
    pub collision_penalty: f64,
    /// Samples seen before a component is z-scored; earlier samples pass through.
    pub warmup_min: u64,
    pub epsilon: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            weights: vec![1.0; 5],
            collision_penalty: 5.0,
            warmup_min: 100,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Write a checkpoint every this many episodes (0 disables periodic checkpoints).
    pub checkpoint_every: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![64, 64],
            critic_hidden: vec![128, 128],
            actor_lr: 5e-4,
            critic_lr: 1e-3,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            minibatch_size: 64,
            epochs: 4,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            checkpoint_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UrbanParams {
    pub k_clusters: usize,
    pub sigma_u_m: f64,
}

impl Default for UrbanParams {
    fn default() -> Self {
        Self {
            k_clusters: 3,
            sigma_u_m: 120.0,
        }
    }
}

/// One Gaussian component of the suburban mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianComponent {
    pub weight: f64,
    /// Row-major 2x2 covariance (m^2).
    pub cov: [[f64; 2]; 2],
    /// Fixed mean; when absent the mean is redrawn every episode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec2>,
}

impl GaussianComponent {
    pub fn isotropic(weight: f64, std_m: f64) -> Self {
        Self {
            weight,
            cov: [[std_m * std_m, 0.0], [0.0, std_m * std_m]],
            mean: None,
        }
    }

    /// Largest per-axis standard deviation.
    pub fn max_std(&self) -> f64 {
        self.cov[0][0].max(self.cov[1][1]).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuburbanParams {
    /// Fraction of users drawn from the uniform background.
    pub alpha: f64,
    pub components: Vec<GaussianComponent>,
}

impl Default for SuburbanParams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            components: vec![
                GaussianComponent::isotropic(0.5, 200.0),
                GaussianComponent::isotropic(0.5, 200.0),
            ],
        }
    }
}

/// Parameters of the three spatial user models. Rural is uniform and has none.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseParams {
    pub urban: UrbanParams,
    pub suburban: SuburbanParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub schedule: Vec<PhaseSpan>,
    pub phases: PhaseParams,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            schedule: vec![
                PhaseSpan { phase: Phase::Urban, episodes: 700 },
                PhaseSpan { phase: Phase::Suburban, episodes: 700 },
                PhaseSpan { phase: Phase::Rural, episodes: 700 },
            ],
            phases: PhaseParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Per-episode metrics average the last this-fraction of steps.
    pub metrics_tail_fraction: f64,
    /// Rolling window (episodes) of the reward-variance column.
    pub variance_window: usize,
    /// User counts visited by the sweep.
    pub sweep_users: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            metrics_tail_fraction: 0.2,
            variance_window: 50,
            sweep_users: vec![60, 80, 100, 120, 140],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub world: WorldConfig,
    pub channel: ChannelConfig,
    pub env: EnvConfig,
    pub reward: RewardConfig,
    pub learner: LearnerConfig,
    pub scenario: ScenarioSection,
    pub experiment: ExperimentConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            world: WorldConfig::default(),
            channel: ChannelConfig::default(),
            env: EnvConfig::default(),
            reward: RewardConfig::default(),
            learner: LearnerConfig::default(),
            scenario: ScenarioSection::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    /// Overrides one value addressed by a dotted path such as
    /// `learner.actor_lr` or `world.users.urban`. The raw value is read as a
    /// TOML literal, falling back to a bare string. The result is re-validated.
    pub fn set_path(&mut self, dotted: &str, raw: &str) -> Result<()> {
        let mut root = toml::Table::try_from(&*self)?;
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        let parts: Vec<&str> = dotted.split('.').collect();
        let (last, parents) = parts.split_last().expect("split yields at least one part");
        let mut table = &mut root;
        for p in parents {
            table = table
                .get_mut(*p)
                .and_then(|v| v.as_table_mut())
                .ok_or_else(|| Error::Config(format!("unknown config section '{p}' in '{dotted}'")))?;
        }
        if !table.contains_key(*last) {
            return Err(Error::Config(format!("unknown config key '{dotted}'")));
        }
        table.insert(last.to_string(), value);
        let updated: ScenarioConfig = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("override {dotted}={raw}: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn users_for(&self, phase: Phase) -> usize {
        self.world.users.get(phase)
    }

    pub fn total_episodes(&self) -> u64 {
        self.scenario.schedule.iter().map(|s| s.episodes).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.world;
        check(w.area_side_m > 0.0 && w.area_side_m.is_finite(), || {
            format!("area_side_m must be positive, got {}", w.area_side_m)
        })?;
        check(w.n_uavs >= 1, || "n_uavs must be at least 1".into())?;
        check(0.0 < w.h_min_m && w.h_min_m < w.h_max_m, || {
            format!("need 0 < h_min_m < h_max_m, got {} / {}", w.h_min_m, w.h_max_m)
        })?;
        check(w.d_min_m > 0.0, || format!("d_min_m must be positive, got {}", w.d_min_m))?;
        for phase in Phase::ALL {
            check(w.users.get(phase) >= 1, || format!("{phase} user count must be at least 1"))?;
        }

        let c = &self.channel;
        for (name, v) in [
            ("p_uav_dbm", c.p_uav_dbm),
            ("p_gbs_dbm", c.p_gbs_dbm),
            ("g_uav_dbi", c.g_uav_dbi),
            ("g_gbs_dbi", c.g_gbs_dbi),
            ("noise_dbm_per_hz", c.noise_dbm_per_hz),
            ("eta_los_db", c.eta_los_db),
            ("eta_nlos_db", c.eta_nlos_db),
        ] {
            check(v.is_finite(), || format!("{name} must be finite, got {v}"))?;
        }
        check(c.bandwidth_hz > 0.0, || "bandwidth_hz must be positive".into())?;
        check(c.carrier_hz > 0.0, || "carrier_hz must be positive".into())?;
        check(c.a_env > 0.0 && c.b_env > 0.0, || "a_env and b_env must be positive".into())?;
        check(c.d0_m > 0.0, || "d0_m must be positive".into())?;
        check(c.kappa_gbs > 0.0, || "kappa_gbs must be positive".into())?;
        check(c.shadow_sigma_db >= 0.0, || "shadow_sigma_db must be non-negative".into())?;
        check(c.rate_threshold_bps > 0.0, || "rate_threshold_bps must be positive".into())?;

        let e = &self.env;
        check(e.step_xy_m >= 0.0 && e.step_z_m >= 0.0, || "step sizes must be non-negative".into())?;
        check(e.user_offset_scale_m > 0.0, || "user_offset_scale_m must be positive".into())?;
        check(e.horizon_steps >= 1, || "horizon_steps must be at least 1".into())?;

        let r = &self.reward;
        check(r.weights.len() == 5, || {
            format!("reward weights need exactly 5 entries, got {}", r.weights.len())
        })?;
        check(r.weights.iter().all(|w| *w >= 0.0 && w.is_finite()), || {
            "reward weights must be finite and non-negative".into()
        })?;
        check(r.weights.iter().any(|w| *w > 0.0), || "reward weights must not all be zero".into())?;
        check(r.collision_penalty >= 0.0, || "collision_penalty must be non-negative".into())?;
        check(r.epsilon > 0.0, || "reward epsilon must be positive".into())?;

        let l = &self.learner;
        check(l.minibatch_size >= 1 && l.epochs >= 1, || "minibatch_size and epochs must be >= 1".into())?;
        check((0.0..=1.0).contains(&l.gamma) && (0.0..=1.0).contains(&l.gae_lambda), || {
            "gamma and gae_lambda must lie in [0, 1]".into()
        })?;
        check(l.clip_eps > 0.0 && l.actor_lr > 0.0 && l.critic_lr > 0.0, || {
            "clip_eps and learning rates must be positive".into()
        })?;

        let s = &self.scenario;
        check(!s.schedule.is_empty(), || "phase schedule must not be empty".into())?;
        let u = &s.phases.urban;
        check(u.k_clusters >= 1 && u.sigma_u_m > 0.0, || {
            "urban needs k_clusters >= 1 and sigma_u_m > 0".into()
        })?;
        validate_suburban(&s.phases.suburban)?;

        let x = &self.experiment;
        check(x.metrics_tail_fraction > 0.0 && x.metrics_tail_fraction <= 1.0, || {
            "metrics_tail_fraction must lie in (0, 1]".into()
        })?;
        check(x.variance_window >= 1, || "variance_window must be at least 1".into())?;
        Ok(())
    }
}

pub(crate) fn validate_suburban(p: &SuburbanParams) -> Result<()> {
    check((0.0..=1.0).contains(&p.alpha), || format!("alpha must lie in [0, 1], got {}", p.alpha))?;
    if p.alpha < 1.0 {
        check(!p.components.is_empty(), || "suburban mixture needs at least one component".into())?;
    }
    if !p.components.is_empty() {
        check(p.components.iter().all(|c| c.weight >= 0.0), || "mixture weights must be >= 0".into())?;
        let total: f64 = p.components.iter().map(|c| c.weight).sum();
        check((total - 1.0).abs() < 1e-9, || format!("mixture weights must sum to 1, got {total}"))?;
        for (k, c) in p.components.iter().enumerate() {
            let [[a, b], [b2, d]] = c.cov;
            check(b == b2, || format!("covariance {k} is not symmetric"))?;
            check(a > 0.0 && a * d - b * b > 0.0, || format!("covariance {k} is not positive definite"))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ScenarioConfig::from_toml_str("[channel]\nkapa_gbs = 3.5\n").unwrap_err();
        assert!(err.to_string().contains("kapa_gbs"), "{err}");
        assert!(ScenarioConfig::from_toml_str("bogus = 1\n").is_err());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ScenarioConfig::from_toml_str("seed = 9\n[world]\nn_uavs = 2\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.world.n_uavs, 2);
        assert_eq!(cfg.channel, ChannelConfig::default());
    }

    #[test]
    fn invariant_violations_are_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.world.h_min_m = 130.0;
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::default();
        cfg.reward.weights = vec![1.0; 4];
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::default();
        cfg.reward.weights = vec![0.0; 5];
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::default();
        cfg.scenario.schedule.clear();
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::default();
        cfg.scenario.phases.suburban.components[0].weight = 0.7;
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::default();
        cfg.scenario.phases.suburban.components[0].cov = [[1.0, 2.0], [2.0, 1.0]];
        assert!(cfg.validate().is_err());

        assert!(ScenarioConfig::from_toml_str(
            "[[scenario.schedule]]\nphase = \"downtown\"\nepisodes = 3\n"
        )
        .is_err());
    }

    #[test]
    fn dotted_overrides() {
        let mut cfg = ScenarioConfig::default();
        cfg.set_path("learner.actor_lr", "0.01").unwrap();
        cfg.set_path("world.users.urban", "20").unwrap();
        cfg.set_path("seed", "42").unwrap();
        assert_eq!(cfg.learner.actor_lr, 0.01);
        assert_eq!(cfg.world.users.urban, 20);
        assert_eq!(cfg.seed, 42);
        assert!(cfg.set_path("learner.actor_lrr", "0.01").is_err());
        assert!(cfg.set_path("world.h_min_m", "500").is_err());
        assert!(cfg.set_path("world.n_uavs", "many").is_err());
    }
}
