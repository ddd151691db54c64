//! Seeded random instances. Every generator takes an explicit RNG; streams
//! are split from a master seed with [`rng_for`].

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::{center, inner_p, norm_p, Dist, Event, OutcomeSpace, ScoreFn, Weights};
use crate::error::{Error, Result};
use crate::persona::FirstOrder;
use crate::pooling::{Decomposition, PoolKind};

/// Independent deterministic stream `stream` under `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random strictly positive distribution with log weights uniform in
/// `[-spread, spread]`.
pub fn random_dist<R: Rng>(rng: &mut R, m: usize, spread: f64) -> Result<Dist> {
    let logw: Vec<f64> = (0..m).map(|_| rng.gen_range(-spread..=spread)).collect();
    Dist::from_log_weights(OutcomeSpace::new(m)?, &logw)
}

/// Normalized positive uniforms lifted so that every weight is at least
/// `floor`.
pub fn random_weights<R: Rng>(rng: &mut R, n: usize, floor: f64) -> Result<Weights> {
    if n == 0 || !(0.0..=1.0 / n as f64).contains(&floor) {
        return Err(Error::InvalidWeights(format!(
            "floor {floor} infeasible for {n} weights"
        )));
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-3..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let free = 1.0 - n as f64 * floor;
    Weights::normalized(
        &raw.iter()
            .map(|u| floor + free * u / total)
            .collect::<Vec<_>>(),
    )
}

pub fn random_scorefn<R: Rng>(rng: &mut R, m: usize, scale: f64) -> Result<ScoreFn> {
    ScoreFn::new((0..m).map(|_| rng.gen_range(-scale..=scale)).collect())
}

/// Nonempty proper subset of `0..m`.
pub fn random_event<R: Rng>(rng: &mut R, m: usize) -> Result<Event> {
    loop {
        let idx: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
        if !idx.is_empty() && idx.len() < m {
            return Event::new(m, &idx);
        }
    }
}

/// Log-pool decomposition of `n` random children on `m` outcomes with
/// weights floored at `0.05 / n`.
pub fn random_log_decomposition<R: Rng>(
    rng: &mut R,
    m: usize,
    n: usize,
    spread: f64,
) -> Result<Decomposition> {
    let children = (0..n)
        .map(|_| random_dist(rng, m, spread))
        .collect::<Result<Vec<_>>>()?;
    let weights = random_weights(rng, n, 0.05 / n as f64)?;
    Decomposition::from_children(children, weights, PoolKind::Log)
}

/// Tilts with `Σ β_i h_i ≡ 0`: all but the heaviest index are drawn freely
/// and the heaviest one is solved from the constraint.
pub fn random_centered_tilts<R: Rng>(
    rng: &mut R,
    m: usize,
    weights: &Weights,
    scale: f64,
) -> Result<Vec<ScoreFn>> {
    let beta = weights.as_slice();
    let k = weights.argmax();
    let mut tilts: Vec<Vec<f64>> = (0..beta.len())
        .map(|_| (0..m).map(|_| rng.gen_range(-scale..=scale)).collect())
        .collect();
    let solved: Vec<f64> = (0..m)
        .map(|o| {
            let rest: f64 = (0..beta.len())
                .filter(|&i| i != k)
                .map(|i| beta[i] * tilts[i][o])
                .sum();
            -rest / beta[k]
        })
        .collect();
    tilts[k] = solved;
    tilts.into_iter().map(ScoreFn::new).collect()
}

/// A three-child instance with a single anti-aligned profile and a budget
/// `ε` equal to the realized `‖ΔL‖_P`.
#[derive(Debug, Clone)]
pub struct CompensationInstance {
    pub decomp: Decomposition,
    /// Children are ordered `[H, W, J]`.
    pub h_index: usize,
    pub delta: f64,
    pub dbeta: Vec<f64>,
    pub epsilon: f64,
}

/// Uniform parent on `m ≥ 3` outcomes. `v_H` and `v_J` are `P`-orthogonal,
/// `v_W` is solved from the pooling constraint (so it is the only profile
/// anti-aligned with `v_H`), and the weight change `(δ, x, −δ−x)` cancels
/// the `v_H` component of `ΔL` to first order. `J` is downgraded but
/// orthogonal to `v_H`, so it contributes nothing to the compensation sum.
pub fn engineered_compensation_instance<R: Rng>(
    rng: &mut R,
    m: usize,
) -> Result<CompensationInstance> {
    if m < 3 {
        return Err(Error::SpaceTooSmall(m));
    }
    let space = OutcomeSpace::new(m)?;
    let u = Dist::uniform(space.clone());
    let raw = |rng: &mut R| -> Vec<f64> { (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect() };
    let unit = |v: Vec<f64>| -> Result<Vec<f64>> {
        let c = center(&u, &v)?;
        let n = norm_p(&u, &c)?;
        Ok(c.iter().map(|x| x / n).collect())
    };
    let e1 = unit(raw(rng))?;
    let mut e2 = unit(raw(rng))?;
    let proj = inner_p(&u, &e1, &e2)?;
    for (a, b) in e2.iter_mut().zip(&e1) {
        *a -= proj * b;
    }
    let e2 = unit(e2)?;
    let a = rng.gen_range(0.5..1.5);
    let b = a * rng.gen_range(0.01..0.05);
    let weights = random_weights(rng, 3, 0.2)?;
    let beta = weights.as_slice().to_vec();
    let hh: Vec<f64> = e1.iter().map(|x| a * x).collect();
    let hj: Vec<f64> = e2.iter().map(|x| b * x).collect();
    let hw: Vec<f64> = hh
        .iter()
        .zip(&hj)
        .map(|(x, y)| -(beta[0] * x + beta[2] * y) / beta[1])
        .collect();
    let children = [hh, hw, hj]
        .iter()
        .map(|h| Dist::from_log_weights(space.clone(), h))
        .collect::<Result<Vec<_>>>()?;
    let decomp = Decomposition::from_children(children, weights, PoolKind::Log)?;
    let delta = rng.gen_range(1e-3..1e-2);
    let x = delta * beta[1] / beta[0];
    let dbeta = vec![delta, x, -delta - x];
    let epsilon = FirstOrder::new(&decomp, &dbeta)?
        .actual_delta_l(1.0)
        .and_then(|dl| norm_p(decomp.parent(), &dl))?;
    Ok(CompensationInstance {
        decomp,
        h_index: 0,
        delta,
        dbeta,
        epsilon,
    })
}
