//! Radio propagation, association and achievable rate.
//!
//! Node `0` is always the ground base station; nodes `1..=N` are the UAVs in
//! order. All powers are handled in dBm on the way in and milliwatts once
//! linearised.

use crate::config::{ChannelConfig, ScenarioConfig};
use crate::env::WorldState;
use crate::error::{Error, Result};
use crate::geom::{Vec2, Vec3};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const GBS_NODE: usize = 0;

/// Free-space path loss `20 log10(4 pi d f / c)` in dB.
pub fn fspl_db(dist_m: f64, freq_hz: f64) -> Result<f64> {
    if !(dist_m > 0.0) || !(freq_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fspl needs positive distance and frequency, got d={dist_m} f={freq_hz}"
        )));
    }
    Ok(20.0 * (4.0 * std::f64::consts::PI * dist_m * freq_hz / SPEED_OF_LIGHT).log10())
}

fn fspl_unchecked(dist_m: f64, freq_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * dist_m * freq_hz / SPEED_OF_LIGHT).log10()
}

/// Logistic line-of-sight probability at elevation `theta_deg`.
pub fn p_los(theta_deg: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * (-b * (theta_deg - a)).exp())
}

/// Geometry of one UAV-to-ground-user link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub horizontal_dist_m: f64,
    pub altitude_m: f64,
    pub elevation_deg: f64,
    pub dist_3d_m: f64,
}

impl LinkGeometry {
    pub fn from_parts(horizontal_dist_m: f64, altitude_m: f64) -> Self {
        let elevation_deg = if horizontal_dist_m <= 0.0 {
            90.0
        } else {
            (altitude_m / horizontal_dist_m).atan().to_degrees()
        };
        Self {
            horizontal_dist_m,
            altitude_m,
            elevation_deg,
            dist_3d_m: horizontal_dist_m.hypot(altitude_m),
        }
    }

    pub fn between(uav: Vec3, user: Vec2) -> Self {
        Self::from_parts(uav.xy().dist(user), uav.z)
    }
}

/// Probability-weighted mean of the LoS and NLoS losses, averaged in dB.
pub fn a2g_pathloss_db(geom: &LinkGeometry, ch: &ChannelConfig) -> f64 {
    let p = p_los(geom.elevation_deg, ch.a_env, ch.b_env);
    let fspl = fspl_unchecked(geom.dist_3d_m, ch.carrier_hz);
    p * (fspl + ch.eta_los_db) + (1.0 - p) * (fspl + ch.eta_nlos_db)
}

/// Log-distance terrestrial loss with shadowing; distances below the
/// reference distance are clamped to it.
pub fn gbs_pathloss_db(dist_m: f64, shadow_db: f64, ch: &ChannelConfig) -> f64 {
    let d = dist_m.max(ch.d0_m);
    fspl_unchecked(ch.d0_m, ch.carrier_hz) + 10.0 * ch.kappa_gbs * (d / ch.d0_m).log10() + shadow_db
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) / 1000.0
}

/// Downlink outcome for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    /// 0 for the ground station, `i + 1` for UAV `i`.
    pub serving_node: usize,
    pub sinr_linear: f64,
    pub rate_bps: f64,
    /// Sub-band allocated by the serving node (equal split among its users).
    pub bandwidth_hz: f64,
    /// Path loss to every node, indexed like `serving_node`.
    pub pathloss_db: Vec<f64>,
    /// LoS probability of the serving link (0 when served by the ground station).
    pub p_los: f64,
}

impl LinkReport {
    pub fn served_by_uav(&self, uav: usize) -> bool {
        self.serving_node == uav + 1
    }
}

/// Per-node association counts, `n_uavs + 1` entries with the GBS first.
pub fn node_loads(reports: &[LinkReport], n_uavs: usize) -> Vec<usize> {
    let mut loads = vec![0usize; n_uavs + 1];
    for r in reports {
        loads[r.serving_node] += 1;
    }
    loads
}

pub fn evaluate_links(world: &WorldState, cfg: &ScenarioConfig) -> Vec<LinkReport> {
    evaluate_links_at(&world.uav_pos, &world.users.positions, &world.shadow_db, cfg)
}

/// Max-received-power association followed by SINR and rate, given raw
/// positions. `gbs_shadow_db[u]` is the frozen shadowing of user `u`.
pub fn evaluate_links_at(
    uavs: &[Vec3],
    users: &[Vec2],
    gbs_shadow_db: &[f64],
    cfg: &ScenarioConfig,
) -> Vec<LinkReport> {
    let ch = &cfg.channel;
    let gbs = cfg.world.gbs_pos;
    let n_nodes = uavs.len() + 1;
    let noise_mw_per_hz = db_to_linear(ch.noise_dbm_per_hz);

    // Pass 1: losses, received powers, association.
    let mut per_user: Vec<(Vec<f64>, Vec<f64>, f64, usize)> = Vec::with_capacity(users.len());
    let mut loads = vec![0usize; n_nodes];
    for (u, &pos) in users.iter().enumerate() {
        let mut loss = Vec::with_capacity(n_nodes);
        let mut rx_mw = Vec::with_capacity(n_nodes);
        let d_gbs = gbs.dist(Vec3::new(pos.x, pos.y, 0.0));
        let l0 = gbs_pathloss_db(d_gbs, gbs_shadow_db[u], ch);
        loss.push(l0);
        rx_mw.push(db_to_linear(ch.p_gbs_dbm + ch.g_gbs_dbi - l0));
        let mut serving_plos = 0.0;
        let mut plos_by_node = Vec::with_capacity(uavs.len());
        for &q in uavs {
            let geom = LinkGeometry::between(q, pos);
            let l = a2g_pathloss_db(&geom, ch);
            plos_by_node.push(p_los(geom.elevation_deg, ch.a_env, ch.b_env));
            loss.push(l);
            rx_mw.push(db_to_linear(ch.p_uav_dbm + ch.g_uav_dbi - l));
        }
        let mut best = 0;
        for k in 1..n_nodes {
            if rx_mw[k] > rx_mw[best] {
                best = k;
            }
        }
        if best > 0 {
            serving_plos = plos_by_node[best - 1];
        }
        loads[best] += 1;
        per_user.push((loss, rx_mw, serving_plos, best));
    }

    // Pass 2: SINR and rate over the equal-split sub-band.
    per_user
        .into_iter()
        .map(|(loss, rx_mw, p_los, k)| {
            let bw = ch.bandwidth_hz / loads[k] as f64;
            let signal = rx_mw[k];
            let interference: f64 = rx_mw
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, p)| *p)
                .sum();
            let noise = noise_mw_per_hz * bw;
            let sinr = if signal > 0.0 { signal / (noise + interference) } else { 0.0 };
            LinkReport {
                serving_node: k,
                sinr_linear: sinr,
                rate_bps: bw * (1.0 + sinr).log2(),
                bandwidth_hz: bw,
                pathloss_db: loss,
                p_los,
            }
        })
        .collect()
}
