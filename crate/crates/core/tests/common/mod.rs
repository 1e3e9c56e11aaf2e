//! Independent reference implementations used by the integration tests and
//! the acceptance harness. Nothing here calls the code it checks.

#![allow(dead_code)]

use aeroswarm_core::config::ScenarioConfig;
use aeroswarm_core::geom::{Vec2, Vec3};

pub const C: f64 = 299_792_458.0;

/// Scalar re-derivation of association, SINR and rate for every user.
/// Returns `(serving_node, sinr, rate_bps)` per user.
pub fn brute_links(uavs: &[Vec3], users: &[Vec2], shadow: &[f64], cfg: &ScenarioConfig) -> Vec<(usize, f64, f64)> {
    let ch = &cfg.channel;
    let g = cfg.world.gbs_pos;
    let n_nodes = uavs.len() + 1;

    // received power [mW] of node k at user u
    let mut rx = vec![vec![0.0f64; n_nodes]; users.len()];
    for (u, p) in users.iter().enumerate() {
        let dx = g.x - p.x;
        let dy = g.y - p.y;
        let dz = g.z;
        let mut d = (dx * dx + dy * dy + dz * dz).sqrt();
        if d < ch.d0_m {
            d = ch.d0_m;
        }
        let pl_d0 = 20.0 * (4.0 * std::f64::consts::PI * ch.d0_m * ch.carrier_hz / C).log10();
        let loss = pl_d0 + 10.0 * ch.kappa_gbs * (d / ch.d0_m).log10() + shadow[u];
        rx[u][0] = 10f64.powf((ch.p_gbs_dbm + ch.g_gbs_dbi - loss) / 10.0);

        for (i, q) in uavs.iter().enumerate() {
            let r = ((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt();
            let h = q.z;
            let theta = if r == 0.0 { 90.0 } else { (h / r).atan().to_degrees() };
            let dist = (r * r + h * h).sqrt();
            let fspl = 20.0 * (4.0 * std::f64::consts::PI * dist * ch.carrier_hz / C).log10();
            let plos = 1.0 / (1.0 + ch.a_env * (-ch.b_env * (theta - ch.a_env)).exp());
            let loss = plos * (fspl + ch.eta_los_db) + (1.0 - plos) * (fspl + ch.eta_nlos_db);
            rx[u][i + 1] = 10f64.powf((ch.p_uav_dbm + ch.g_uav_dbi - loss) / 10.0);
        }
    }

    let mut serving = vec![0usize; users.len()];
    for u in 0..users.len() {
        for k in 0..n_nodes {
            if rx[u][k] > rx[u][serving[u]] {
                serving[u] = k;
            }
        }
    }
    let mut count = vec![0usize; n_nodes];
    for &s in &serving {
        count[s] += 1;
    }

    let n0 = 10f64.powf(ch.noise_dbm_per_hz / 10.0);
    (0..users.len())
        .map(|u| {
            let k = serving[u];
            let bw = ch.bandwidth_hz / count[k] as f64;
            let mut interf = 0.0;
            for j in 0..n_nodes {
                if j != k {
                    interf += rx[u][j];
                }
            }
            let sinr = if rx[u][k] > 0.0 { rx[u][k] / (n0 * bw + interf) } else { 0.0 };
            (k, sinr, bw * (1.0 + sinr).log2())
        })
        .collect()
}

/// Three-node (GBS + 2 UAVs), five-user fixture.
pub fn link_fixture() -> (ScenarioConfig, Vec<Vec3>, Vec<Vec2>, Vec<f64>) {
    let mut cfg = ScenarioConfig::default();
    cfg.world.n_uavs = 2;
    let uavs = vec![Vec3::new(400.0, 500.0, 90.0), Vec3::new(1500.0, 1300.0, 115.0)];
    let users = vec![
        Vec2::new(420.0, 480.0),
        Vec2::new(1000.0, 990.0),
        Vec2::new(1450.0, 1400.0),
        Vec2::new(700.0, 1700.0),
        Vec2::new(1900.0, 100.0),
    ];
    let shadow = vec![3.2, -7.5, 0.0, 11.0, -1.4];
    (cfg, uavs, users, shadow)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Advantage from the definition: A_t = sum_l (γλ)^l δ_{t+l}.
pub fn gae_double_sum(r: &[f64], v: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let t_len = r.len();
    let value_at = |t: usize| if t < t_len { v[t] } else { bootstrap };
    (0..t_len)
        .map(|t| {
            let mut a = 0.0;
            for l in 0..t_len - t {
                let k = t + l;
                let delta = r[k] + gamma * value_at(k + 1) - v[k];
                a += (gamma * lambda).powi(l as i32) * delta;
            }
            a
        })
        .collect()
}

/// Central differences of `f` around `params`.
pub fn finite_diff(params: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error between gradients, with an absolute floor so that
/// entries near zero compare on an absolute scale.
pub fn max_grad_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Forward pass through a tanh MLP written as explicit nested loops over the
/// documented flat layout.
pub fn scalar_forward(dims: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut act = x.to_vec();
    let mut off = 0;
    for l in 0..dims.len() - 1 {
        let mut next = vec![0.0; dims[l + 1]];
        for o in 0..dims[l + 1] {
            let mut s = params[off + dims[l] * dims[l + 1] + o];
            for i in 0..dims[l] {
                s += params[off + o * dims[l] + i] * act[i];
            }
            next[o] = if l + 2 < dims.len() { s.tanh() } else { s };
        }
        off += dims[l] * dims[l + 1] + dims[l + 1];
        act = next;
    }
    act
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn std_pop(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample KS test at level `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// Rolling mean over a trailing window (shorter at the start).
pub fn rolling(xs: &[f64], w: usize) -> Vec<f64> {
    (0..xs.len())
        .map(|i| {
            let s = i.saturating_sub(w - 1);
            mean(&xs[s..=i])
        })
        .collect()
}
