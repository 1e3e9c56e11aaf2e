//! Multi-UAV environment: reset, joint-action stepping, observations and the
//! centralized state vector.
//!
//! Committed states always satisfy the altitude band, the area box and the
//! pairwise separation `d_min`. Moves are clamped to the box; any pair whose
//! tentative positions come closer than `d_min` is moved back to where it was
//! and flagged as colliding.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::{evaluate_links, node_loads, LinkReport};
use crate::config::{Phase, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::reward::{compute_raw, RewardVector};
use crate::rng::SimRng;
use crate::scenario::{phase_for_episode, sample_phase, UserField};

pub const MAX_LAYOUT_ATTEMPTS: usize = 10_000;
const GRID: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
    Hover,
}

impl Action {
    pub const COUNT: usize = 7;
    pub const ALL: [Action; 7] = [
        Action::PosX,
        Action::NegX,
        Action::PosY,
        Action::NegY,
        Action::PosZ,
        Action::NegZ,
        Action::Hover,
    ];

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn displacement(self, step_xy: f64, step_z: f64) -> Vec3 {
        match self {
            Action::PosX => Vec3::new(step_xy, 0.0, 0.0),
            Action::NegX => Vec3::new(-step_xy, 0.0, 0.0),
            Action::PosY => Vec3::new(0.0, step_xy, 0.0),
            Action::NegY => Vec3::new(0.0, -step_xy, 0.0),
            Action::PosZ => Vec3::new(0.0, 0.0, step_z),
            Action::NegZ => Vec3::new(0.0, 0.0, -step_z),
            Action::Hover => Vec3::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub uav_pos: Vec<Vec3>,
    pub users: UserField,
    /// Frozen per-user shadowing of the ground-station link (dB).
    pub shadow_db: Vec<f64>,
    pub step_index: usize,
    pub phase: Phase,
    pub episode_index: u64,
    /// Link evaluation of the current positions.
    pub links: Vec<LinkReport>,
}

impl WorldState {
    pub fn n_uavs(&self) -> usize {
        self.uav_pos.len()
    }

    /// Rebuilds a state around explicit UAV positions (used by baselines).
    pub fn with_uavs(&self, uav_pos: Vec<Vec3>, cfg: &ScenarioConfig) -> WorldState {
        let mut s = WorldState {
            uav_pos,
            links: Vec::new(),
            ..self.clone()
        };
        s.links = evaluate_links(&s, cfg);
        s
    }

    pub fn loads(&self) -> Vec<usize> {
        node_loads(&self.links, self.n_uavs())
    }
}

/// Local view of one UAV. Layout: own position (3), `k_neighbors` relative
/// neighbour positions (3 each), `l_users` nearest users as
/// `(dx, dy, served_by_me)`, then the fraction of users this UAV serves.
/// Missing neighbours or users are zero-padded.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub features: Vec<f64>,
}

pub fn observation_dim(cfg: &ScenarioConfig) -> usize {
    3 + 3 * cfg.env.k_neighbors + 3 * cfg.env.l_users + 1
}

pub fn global_state_dim(cfg: &ScenarioConfig) -> usize {
    let n = cfg.world.n_uavs;
    3 * n + (n + 1) + GRID * GRID + 1
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observations: Vec<Observation>,
    pub rewards: Vec<RewardVector>,
    pub done: bool,
}

impl StepOutcome {
    pub fn collided(&self) -> Vec<bool> {
        self.rewards.iter().map(|r| r.collided).collect()
    }
}

pub fn reset(cfg: &ScenarioConfig, episode_index: u64, rng: &mut SimRng) -> Result<(WorldState, Vec<Observation>)> {
    let phase = phase_for_episode(cfg, episode_index);
    let users = sample_phase(cfg, phase, rng)?;
    let shadow = Normal::new(0.0, cfg.channel.shadow_sigma_db)
        .map_err(|e| Error::Config(format!("shadowing: {e}")))?;
    let shadow_db: Vec<f64> = (0..users.len()).map(|_| shadow.sample(rng)).collect();
    let uav_pos = initial_layout(cfg, rng)?;
    let mut state = WorldState {
        uav_pos,
        users,
        shadow_db,
        step_index: 0,
        phase,
        episode_index,
        links: Vec::new(),
    };
    state.links = evaluate_links(&state, cfg);
    let obs = observations(&state, cfg);
    Ok((state, obs))
}

fn initial_layout(cfg: &ScenarioConfig, rng: &mut SimRng) -> Result<Vec<Vec3>> {
    let w = &cfg.world;
    for _ in 0..MAX_LAYOUT_ATTEMPTS {
        let layout: Vec<Vec3> = (0..w.n_uavs)
            .map(|_| {
                Vec3::new(
                    rng.random::<f64>() * w.area_side_m,
                    rng.random::<f64>() * w.area_side_m,
                    rng.random_range(w.h_min_m..=w.h_max_m),
                )
            })
            .collect();
        if separation_ok(&layout, w.d_min_m) {
            return Ok(layout);
        }
    }
    Err(Error::InfeasibleLayout(MAX_LAYOUT_ATTEMPTS))
}

pub fn separation_ok(pos: &[Vec3], d_min: f64) -> bool {
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            if pos[i].dist(pos[j]) < d_min {
                return false;
            }
        }
    }
    true
}

/// Checks altitude band, area box and pairwise separation.
pub fn constraints_hold(pos: &[Vec3], cfg: &ScenarioConfig) -> bool {
    let w = &cfg.world;
    pos.iter().all(|p| {
        (w.h_min_m..=w.h_max_m).contains(&p.z) && p.xy().in_square(w.area_side_m)
    }) && separation_ok(pos, w.d_min_m)
}

fn clamp_to_box(p: Vec3, cfg: &ScenarioConfig) -> Vec3 {
    let w = &cfg.world;
    Vec3::new(
        p.x.clamp(0.0, w.area_side_m),
        p.y.clamp(0.0, w.area_side_m),
        p.z.clamp(w.h_min_m, w.h_max_m),
    )
}

/// Applies a joint action. On a malformed action the state is left untouched.
pub fn step(state: &mut WorldState, actions: &[usize], cfg: &ScenarioConfig) -> Result<StepOutcome> {
    let n = state.n_uavs();
    if actions.len() != n {
        return Err(Error::InvalidArgument(format!(
            "joint action has {} entries for {n} agents",
            actions.len()
        )));
    }
    let moves: Vec<Action> = actions
        .iter()
        .enumerate()
        .map(|(agent, &index)| Action::from_index(index).ok_or(Error::InvalidAction { agent, index }))
        .collect::<Result<_>>()?;

    let prev = state.uav_pos.clone();
    let mut next: Vec<Vec3> = prev
        .iter()
        .zip(&moves)
        .map(|(p, a)| {
            let d = a.displacement(cfg.env.step_xy_m, cfg.env.step_z_m);
            clamp_to_box(Vec3::new(p.x + d.x, p.y + d.y, p.z + d.z), cfg)
        })
        .collect();

    // Reverting one pair can create a conflict with a third UAV, so repeat
    // until clean. Each pass reverts at least one more UAV and the previous
    // committed layout is feasible, so this terminates.
    let mut collided = vec![false; n];
    let mut reverted = vec![false; n];
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in i + 1..n {
                if next[i].dist(next[j]) < cfg.world.d_min_m {
                    collided[i] = true;
                    collided[j] = true;
                    for k in [i, j] {
                        if !reverted[k] {
                            reverted[k] = true;
                            next[k] = prev[k];
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    state.uav_pos = next;
    state.step_index += 1;
    debug_assert!(constraints_hold(&state.uav_pos, cfg), "committed state violates constraints");
    state.links = evaluate_links(state, cfg);

    let shared = compute_raw(&state.links, state, cfg);
    let rewards = collided
        .iter()
        .map(|&c| RewardVector { collided: c, ..shared })
        .collect();
    Ok(StepOutcome {
        observations: observations(state, cfg),
        rewards,
        done: state.step_index >= cfg.env.horizon_steps,
    })
}

pub fn observations(state: &WorldState, cfg: &ScenarioConfig) -> Vec<Observation> {
    (0..state.n_uavs()).map(|i| observe(state, i, cfg)).collect()
}

pub fn observe(state: &WorldState, agent: usize, cfg: &ScenarioConfig) -> Observation {
    let w = &cfg.world;
    let side = w.area_side_m;
    let h_span = w.h_max_m - w.h_min_m;
    let me = state.uav_pos[agent];
    let mut f = Vec::with_capacity(observation_dim(cfg));
    f.extend([me.x / side, me.y / side, (me.z - w.h_min_m) / h_span]);

    let mut others: Vec<(f64, usize)> = state
        .uav_pos
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != agent)
        .map(|(j, p)| (p.dist(me), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for slot in 0..cfg.env.k_neighbors {
        match others.get(slot) {
            Some(&(_, j)) => {
                let p = state.uav_pos[j];
                f.extend([(p.x - me.x) / side, (p.y - me.y) / side, (p.z - me.z) / h_span]);
            }
            None => f.extend([0.0; 3]),
        }
    }

    let uscale = cfg.env.user_offset_scale_m;
    let here = me.xy();
    let mut near: Vec<(f64, usize)> = state
        .users
        .positions
        .iter()
        .enumerate()
        .map(|(u, p)| (p.dist_sq(here), u))
        .collect();
    let l = cfg.env.l_users.min(near.len());
    if l > 0 && l < near.len() {
        near.select_nth_unstable_by(l - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    near.truncate(l);
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for slot in 0..cfg.env.l_users {
        match near.get(slot) {
            Some(&(_, u)) => {
                let p = state.users.positions[u];
                let mine = if state.links[u].served_by_uav(agent) { 1.0 } else { 0.0 };
                f.extend([(p.x - me.x) / uscale, (p.y - me.y) / uscale, mine]);
            }
            None => f.extend([0.0; 3]),
        }
    }

    let served = state.links.iter().filter(|r| r.served_by_uav(agent)).count();
    f.push(served as f64 / state.users.len().max(1) as f64);
    Observation { features: f }
}

/// Centralized state: normalized UAV positions, per-node association shares,
/// a 4x4 user-occupancy histogram and the elapsed-step fraction. Independent
/// of user order and of the phase.
pub fn global_state(state: &WorldState, cfg: &ScenarioConfig) -> Vec<f64> {
    let w = &cfg.world;
    let side = w.area_side_m;
    let m = state.users.len().max(1) as f64;
    let mut s = Vec::with_capacity(global_state_dim(cfg));
    for p in &state.uav_pos {
        s.extend([p.x / side, p.y / side, (p.z - w.h_min_m) / (w.h_max_m - w.h_min_m)]);
    }
    s.extend(state.loads().iter().map(|&c| c as f64 / m));
    let mut grid = [0usize; GRID * GRID];
    for p in &state.users.positions {
        let cx = ((p.x / side * GRID as f64) as usize).min(GRID - 1);
        let cy = ((p.y / side * GRID as f64) as usize).min(GRID - 1);
        grid[cy * GRID + cx] += 1;
    }
    s.extend(grid.iter().map(|&c| c as f64 / m));
    s.push(state.step_index as f64 / cfg.env.horizon_steps as f64);
    s
}
