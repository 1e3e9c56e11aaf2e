//! Spatial user distributions and the phase schedule.
//!
//! Urban users follow a Thomas cluster process, suburban users a Gaussian
//! mixture over a uniform background, rural users a uniform (binomial) point
//! process. All samplers produce an exact user count and reject Gaussian
//! offsets that leave the area, so cluster shape is not distorted at borders.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{GaussianComponent, Phase, PhaseParams, ScenarioConfig, SuburbanParams};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::rng::SimRng;

/// Maximum redraws of a single Gaussian offset before giving up.
pub const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct UserField {
    pub positions: Vec<Vec2>,
    pub phase: Phase,
}

impl UserField {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Phase active at `episode_index`. Past the end of the schedule the last
/// phase stays active.
pub fn phase_for_episode(cfg: &ScenarioConfig, episode_index: u64) -> Phase {
    let mut end = 0u64;
    for span in &cfg.scenario.schedule {
        end += span.episodes;
        if episode_index < end {
            return span.phase;
        }
    }
    cfg.scenario
        .schedule
        .last()
        .expect("validated schedule is non-empty")
        .phase
}

/// Draws users for `phase` with the configured count.
pub fn sample_phase(cfg: &ScenarioConfig, phase: Phase, rng: &mut SimRng) -> Result<UserField> {
    let params = &cfg.scenario.phases;
    match phase {
        Phase::Urban => sample_urban(cfg, params, rng),
        Phase::Suburban => sample_suburban(cfg, params, rng),
        Phase::Rural => Ok(sample_rural(cfg, rng)),
    }
}

pub fn sample_urban(cfg: &ScenarioConfig, params: &PhaseParams, rng: &mut SimRng) -> Result<UserField> {
    let urban = &params.urban;
    if urban.k_clusters == 0 || !(urban.sigma_u_m > 0.0) {
        return Err(Error::InvalidArgument(
            "urban sampling needs k_clusters >= 1 and sigma_u_m > 0".into(),
        ));
    }
    let area = cfg.world.area_side_m;
    let centers: Vec<Vec2> = (0..urban.k_clusters)
        .map(|_| draw_center(area, urban.sigma_u_m, rng))
        .collect();
    let positions = sample_thomas(&centers, urban.sigma_u_m, cfg.users_for(Phase::Urban), area, rng)?;
    Ok(UserField {
        positions,
        phase: Phase::Urban,
    })
}

/// Thomas-process daughters: each user picks a parent uniformly and is offset
/// by an isotropic Gaussian of std `sigma`, redrawn until inside the area.
pub fn sample_thomas(
    centers: &[Vec2],
    sigma: f64,
    m: usize,
    area: f64,
    rng: &mut SimRng,
) -> Result<Vec<Vec2>> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument("need at least one cluster center".into()));
    }
    let chol = [[sigma, 0.0], [0.0, sigma]];
    (0..m)
        .map(|_| {
            let c = centers[rng.random_range(0..centers.len())];
            gaussian_in_area(c, &chol, area, rng)
        })
        .collect()
}

pub fn sample_suburban(cfg: &ScenarioConfig, params: &PhaseParams, rng: &mut SimRng) -> Result<UserField> {
    let positions = sample_mixture(
        &params.suburban,
        cfg.users_for(Phase::Suburban),
        cfg.world.area_side_m,
        rng,
    )?;
    Ok(UserField {
        positions,
        phase: Phase::Suburban,
    })
}

/// Uniform background with probability `alpha`, otherwise component `k`
/// with probability `weight_k`. Components without a fixed mean get one drawn
/// from `rng` before any user is placed.
pub fn sample_mixture(params: &SuburbanParams, m: usize, area: f64, rng: &mut SimRng) -> Result<Vec<Vec2>> {
    crate::config::validate_suburban(params)?;
    let resolved: Vec<(Vec2, [[f64; 2]; 2])> = params
        .components
        .iter()
        .map(|c| {
            let mean = c.mean.unwrap_or_else(|| draw_center(area, c.max_std(), rng));
            (mean, cholesky2(c))
        })
        .collect();
    let weights: Vec<f64> = params.components.iter().map(|c| c.weight).collect();

    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        if resolved.is_empty() || rng.random::<f64>() < params.alpha {
            out.push(uniform_point(area, rng));
            continue;
        }
        let k = pick_weighted(&weights, rng);
        let (mean, chol) = &resolved[k];
        out.push(gaussian_in_area(*mean, chol, area, rng)?);
    }
    Ok(out)
}

/// `m` i.i.d. uniform points (fixed-count Poisson process).
pub fn sample_rural(cfg: &ScenarioConfig, rng: &mut SimRng) -> UserField {
    let area = cfg.world.area_side_m;
    UserField {
        positions: sample_uniform(cfg.users_for(Phase::Rural), area, rng),
        phase: Phase::Rural,
    }
}

pub fn sample_uniform(m: usize, area: f64, rng: &mut SimRng) -> Vec<Vec2> {
    (0..m).map(|_| uniform_point(area, rng)).collect()
}

fn uniform_point(area: f64, rng: &mut SimRng) -> Vec2 {
    Vec2::new(rng.random::<f64>() * area, rng.random::<f64>() * area)
}

/// Uniform center such that a `2 * spread` disk fits inside the area; if it
/// cannot fit, the area midpoint.
fn draw_center(area: f64, spread: f64, rng: &mut SimRng) -> Vec2 {
    let margin = 2.0 * spread;
    if 2.0 * margin >= area {
        return Vec2::new(area / 2.0, area / 2.0);
    }
    Vec2::new(
        rng.random_range(margin..area - margin),
        rng.random_range(margin..area - margin),
    )
}

fn cholesky2(c: &GaussianComponent) -> [[f64; 2]; 2] {
    let [[a, b], [_, d]] = c.cov;
    let l11 = a.sqrt();
    let l21 = b / l11;
    let l22 = (d - l21 * l21).sqrt();
    [[l11, 0.0], [l21, l22]]
}

fn gaussian_in_area(mean: Vec2, chol: &[[f64; 2]; 2], area: f64, rng: &mut SimRng) -> Result<Vec2> {
    for _ in 0..MAX_REJECTIONS {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let p = Vec2::new(
            mean.x + chol[0][0] * z1,
            mean.y + chol[1][0] * z1 + chol[1][1] * z2,
        );
        if p.in_square(area) {
            return Ok(p);
        }
    }
    Err(Error::RejectionExhausted {
        what: "gaussian user offset",
        attempts: MAX_REJECTIONS,
    })
}

fn pick_weighted(weights: &[f64], rng: &mut SimRng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}
