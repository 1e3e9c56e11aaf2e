//! Non-learning references: a static K-means placement with full knowledge of
//! the user field, and a uniform random controller.

use rand::Rng;

use crate::channel::evaluate_links_at;
use crate::config::ScenarioConfig;
use crate::env::{constraints_hold, Action, WorldState};
use crate::error::{Error, Result};
use crate::geom::{Vec2, Vec3};
use crate::rng::SimRng;

pub const RESTARTS: usize = 20;
pub const MAX_ITERS: usize = 100;
pub const ALTITUDE_GRID_M: [f64; 5] = [80.0, 90.0, 100.0, 110.0, 120.0];
const REPAIR_ROUNDS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementSolution {
    pub uav_pos: Vec<Vec3>,
    pub objective_coverage: f64,
    /// Cluster of each user.
    pub assignment: Vec<usize>,
    pub wcss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centers: Vec<Vec2>,
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_history: Vec<f64>,
}

impl Clustering {
    pub fn wcss(&self) -> f64 {
        *self.wcss_history.last().unwrap_or(&f64::INFINITY)
    }
}

pub fn wcss(points: &[Vec2], centers: &[Vec2]) -> f64 {
    points
        .iter()
        .map(|p| centers.iter().map(|c| p.dist_sq(*c)).fold(f64::INFINITY, f64::min))
        .sum()
}

fn nearest(p: Vec2, centers: &[Vec2]) -> usize {
    let mut best = 0;
    for (k, c) in centers.iter().enumerate().skip(1) {
        if p.dist_sq(*c) < p.dist_sq(centers[best]) {
            best = k;
        }
    }
    best
}

/// k-means++ seeding from the points themselves.
pub fn seed_centers(points: &[Vec2], k: usize, rng: &mut SimRng) -> Vec<Vec2> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| p.dist_sq(centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[idx];
        centers.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(p.dist_sq(c));
        }
    }
    centers
}

/// Lloyd iterations from `centers`. An emptied cluster is re-seeded at the
/// point farthest from its current center.
pub fn lloyd(points: &[Vec2], mut centers: Vec<Vec2>, max_iters: usize) -> Clustering {
    let k = centers.len();
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(*p, &centers)).collect();
    let mut history = vec![wcss(points, &centers)];
    for _ in 0..max_iters {
        let mut sum = vec![Vec2::default(); k];
        let mut count = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            sum[a].x += p.x;
            sum[a].y += p.y;
            count[a] += 1;
        }
        for c in 0..k {
            if count[c] > 0 {
                centers[c] = Vec2::new(sum[c].x / count[c] as f64, sum[c].y / count[c] as f64);
            } else {
                let far = (0..points.len())
                    .max_by(|&i, &j| {
                        let di = points[i].dist_sq(centers[assignment[i]]);
                        let dj = points[j].dist_sq(centers[assignment[j]]);
                        di.total_cmp(&dj).then(j.cmp(&i))
                    })
                    .unwrap();
                centers[c] = points[far];
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(*p, &centers)).collect();
        history.push(wcss(points, &centers));
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Clustering { centers, assignment, wcss_history: history }
}

/// Best of `restarts` seeded Lloyd runs.
pub fn kmeans(points: &[Vec2], k: usize, restarts: usize, max_iters: usize, rng: &mut SimRng) -> Result<Clustering> {
    if k == 0 || points.len() < k {
        return Err(Error::InvalidArgument(format!("k-means needs at least {k} points, got {}", points.len())));
    }
    let mut best: Option<Clustering> = None;
    for _ in 0..restarts.max(1) {
        let c = lloyd(points, seed_centers(points, k, rng), max_iters);
        if best.as_ref().is_none_or(|b| c.wcss() < b.wcss()) {
            best = Some(c);
        }
    }
    Ok(best.unwrap())
}

/// Pushes UAVs apart horizontally until every pair is at least `d_min`
/// apart. In a violating pair the member closer to its own target stays
/// (lower index on ties) and the other moves along the separating direction
/// to exactly `d_min`.
pub fn repair_separation(pos: &mut [Vec2], targets: &[Vec2], d_min: f64, side: f64) -> Result<()> {
    let n = pos.len();
    for _ in 0..REPAIR_ROUNDS {
        let mut clean = true;
        for i in 0..n {
            for j in i + 1..n {
                if pos[i].dist(pos[j]) >= d_min {
                    continue;
                }
                clean = false;
                let (stay, go) = if pos[j].dist(targets[j]) < pos[i].dist(targets[i]) { (j, i) } else { (i, j) };
                let (dx, dy) = (pos[go].x - pos[stay].x, pos[go].y - pos[stay].y);
                let len = (dx * dx + dy * dy).sqrt();
                let (ux, uy) = if len > 1e-9 {
                    (dx / len, dy / len)
                } else {
                    // coincident: head away from the area centre
                    let (cx, cy) = (side / 2.0 - pos[stay].x, side / 2.0 - pos[stay].y);
                    if cx.abs() + cy.abs() < 1e-9 { (1.0, 0.0) } else if cx.abs() >= cy.abs() { (-cx.signum(), 0.0) } else { (0.0, -cy.signum()) }
                };
                let mut p = Vec2::new(pos[stay].x + ux * d_min, pos[stay].y + uy * d_min);
                if !p.in_square(side) {
                    // blocked by the boundary: try the opposite side of the stayer
                    let q = Vec2::new(pos[stay].x - ux * d_min, pos[stay].y - uy * d_min);
                    p = if q.in_square(side) {
                        q
                    } else {
                        Vec2::new(p.x.clamp(0.0, side), p.y.clamp(0.0, side))
                    };
                }
                pos[go] = p;
            }
        }
        if clean {
            return Ok(());
        }
    }
    Err(Error::InfeasibleLayout(REPAIR_ROUNDS))
}

fn covered_in_cell(
    uavs: &[Vec3],
    cell: usize,
    users: &[Vec2],
    members: &[usize],
    shadow: &[f64],
    cfg: &ScenarioConfig,
) -> usize {
    let links = evaluate_links_at(uavs, users, shadow, cfg);
    members
        .iter()
        .filter(|&&u| links[u].rate_bps >= cfg.channel.rate_threshold_bps && links[u].served_by_uav(cell))
        .count()
}

/// Static placement at the K-means centroids of the episode's users with a
/// per-UAV altitude scan. Fails when there are fewer users than UAVs.
pub fn kmeans_place(world: &WorldState, cfg: &ScenarioConfig, rng: &mut SimRng) -> Result<PlacementSolution> {
    let n = cfg.world.n_uavs;
    let users = &world.users.positions;
    if users.len() < n {
        return Err(Error::InvalidArgument(format!("{} users cannot fill {n} clusters", users.len())));
    }
    let clustering = kmeans(users, n, RESTARTS, MAX_ITERS, rng)?;
    let mut xy = clustering.centers.clone();
    repair_separation(&mut xy, &clustering.centers, cfg.world.d_min_m, cfg.world.area_side_m)?;

    let mid = ALTITUDE_GRID_M[ALTITUDE_GRID_M.len() / 2].clamp(cfg.world.h_min_m, cfg.world.h_max_m);
    let mut uavs: Vec<Vec3> = xy.iter().map(|p| Vec3::new(p.x, p.y, mid)).collect();
    for k in 0..n {
        let members: Vec<usize> = (0..users.len()).filter(|&u| clustering.assignment[u] == k).collect();
        let mut best = (0usize, uavs[k].z);
        let mut first = true;
        for h in ALTITUDE_GRID_M {
            if !(cfg.world.h_min_m..=cfg.world.h_max_m).contains(&h) {
                continue;
            }
            uavs[k].z = h;
            let c = covered_in_cell(&uavs, k, users, &members, &world.shadow_db, cfg);
            if first || c > best.0 {
                best = (c, h);
                first = false;
            }
        }
        uavs[k].z = best.1;
    }
    if !constraints_hold(&uavs, cfg) {
        return Err(Error::InfeasibleLayout(REPAIR_ROUNDS));
    }

    let links = evaluate_links_at(&uavs, users, &world.shadow_db, cfg);
    let covered = links.iter().filter(|l| l.rate_bps >= cfg.channel.rate_threshold_bps).count();
    Ok(PlacementSolution {
        objective_coverage: covered as f64 / users.len() as f64,
        wcss: clustering.wcss(),
        assignment: clustering.assignment,
        uav_pos: uavs,
    })
}

/// Uniform choice over the seven moves for each agent.
pub fn random_policy(n_agents: usize, rng: &mut SimRng) -> Vec<usize> {
    (0..n_agents).map(|_| rng.random_range(0..Action::COUNT)).collect()
}
