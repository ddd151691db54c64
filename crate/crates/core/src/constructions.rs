//! Explicit instance families: cyclic artificial welfare, the analytic
//! strictly-unanimous construction, and peaked incompatible agents.

use serde::{Deserialize, Serialize};

use crate::dist::{Dist, OutcomeSpace, ScoreFn, Weights, VALUE_TOL};
use crate::error::{Error, Result};
use crate::pooling::{Decomposition, PoolKind};
use crate::welfare::unanimity_report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    CyclicWelfare,
    AnalyticUnanimity,
    PeakedIncompatible,
}

/// A parameterized family, as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFamily {
    pub kind: FamilyKind,
    pub n: usize,
    pub epsilon: f64,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
}

impl InstanceFamily {
    /// Exclusive upper bound on `epsilon` for this family.
    pub fn epsilon_bound(kind: FamilyKind, n: usize) -> f64 {
        match kind {
            FamilyKind::CyclicWelfare => 1.0 / n as f64,
            FamilyKind::AnalyticUnanimity => 0.25,
            FamilyKind::PeakedIncompatible => 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_n(self.n)?;
        check_epsilon(self.epsilon, Self::epsilon_bound(self.kind, self.n))?;
        if let Some(c) = self.c {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::ParamOutOfRange(format!(
                    "C must be positive, got {c}"
                )));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.n {
                return Err(Error::LengthMismatch {
                    expected: self.n,
                    found: w.len(),
                });
            }
        }
        Ok(())
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::ParamOutOfRange(format!("need n >= 2, got {n}")));
    }
    Ok(())
}

fn check_epsilon(eps: f64, upper: f64) -> Result<()> {
    if !(eps > 0.0 && eps < upper) {
        return Err(Error::ParamOutOfRange(format!(
            "epsilon must lie in (0, {upper}), got {eps}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CyclicInstance {
    pub agents: Vec<Dist>,
    pub weights: Weights,
    /// `W_i` is 0 on outcome `(i + 1) mod n` and `-C` elsewhere.
    pub welfare: Vec<ScoreFn>,
}

/// `n` agents on `n` outcomes, each confident in its own outcome but valuing
/// the next one. Under uniform weights the log pool is uniform.
pub fn cyclic_welfare_instance(n: usize, epsilon: f64, c: f64) -> Result<CyclicInstance> {
    check_n(n)?;
    check_epsilon(epsilon, 1.0 / n as f64)?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::ParamOutOfRange(format!(
            "C must be positive, got {c}"
        )));
    }
    let space = OutcomeSpace::new(n)?;
    let peak = 1.0 - (n as f64 - 1.0) * epsilon;
    let agents = (0..n)
        .map(|i| {
            let raw: Vec<f64> = (0..n)
                .map(|j| if j == i { peak } else { epsilon })
                .collect();
            Dist::new(space.clone(), &raw)
        })
        .collect::<Result<Vec<_>>>()?;
    let welfare = (0..n)
        .map(|i| {
            let fav = (i + 1) % n;
            ScoreFn::new((0..n).map(|j| if j == fav { 0.0 } else { -c }).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CyclicInstance {
        agents,
        weights: Weights::uniform(n)?,
        welfare,
    })
}

fn resolve_weights(n: usize, weights: Option<&Weights>) -> Result<Weights> {
    let w = match weights {
        Some(w) => w.clone(),
        None => Weights::uniform(n)?,
    };
    if w.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: w.len(),
        });
    }
    if w.as_slice().iter().any(|&b| b >= 1.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok(w)
}

/// Agents on `n + 1` outcomes: shared mass on outcome 0, a private outcome
/// `i` with mass `ε`, and `ε^{n+1}` on every other private outcome.
pub fn analytic_agents(n: usize, epsilon: f64) -> Result<Vec<Dist>> {
    check_n(n)?;
    check_epsilon(epsilon, 0.25)?;
    let alpha = epsilon;
    let delta = epsilon.powi(n as i32 + 1);
    let space = OutcomeSpace::new(n + 1)?;
    let common = 1.0 - alpha - (n as f64 - 1.0) * delta;
    (1..=n)
        .map(|i| {
            let raw: Vec<f64> = (0..=n)
                .map(|o| match o {
                    0 => common,
                    o if o == i => alpha,
                    _ => delta,
                })
                .collect();
            Dist::new(space.clone(), &raw)
        })
        .collect()
}

pub fn analytic_unanimity_instance(
    n: usize,
    epsilon: f64,
    weights: Option<&Weights>,
) -> Result<Decomposition> {
    let w = resolve_weights(n, weights)?;
    let agents = analytic_agents(n, epsilon)?;
    Decomposition::from_children(agents, w, PoolKind::Log)
}

/// The search grid `10^{-k/4}`, `k = 1..=40`, restricted to `ε < 1/4`.
pub fn epsilon_grid() -> Vec<f64> {
    (1..=40)
        .map(|k| 10f64.powf(-(k as f64) / 4.0))
        .filter(|&e| e < 0.25)
        .collect()
}

/// Largest grid value of `ε` at which the analytic instance is strictly
/// unanimous (every gap above `1e-9`).
pub fn find_epsilon_for_unanimity(n: usize, weights: Option<&Weights>) -> Result<f64> {
    resolve_weights(n, weights)?;
    for eps in epsilon_grid() {
        let decomp = analytic_unanimity_instance(n, eps, weights)?;
        if unanimity_report(&decomp)?
            .gaps
            .iter()
            .all(|&g| g > VALUE_TOL)
        {
            return Ok(eps);
        }
    }
    Err(Error::NotFound(format!(
        "no epsilon on the grid makes the n = {n} instance strictly unanimous"
    )))
}

/// `n` agents on `n` outcomes; agent `i` puts `1 − ε` on outcome `i`.
pub fn peaked_incompatible_family(n: usize, epsilon: f64) -> Result<Vec<Dist>> {
    check_n(n)?;
    check_epsilon(epsilon, 0.5)?;
    let space = OutcomeSpace::new(n)?;
    let off = epsilon / (n as f64 - 1.0);
    (0..n)
        .map(|i| {
            let raw: Vec<f64> = (0..n)
                .map(|k| if k == i { 1.0 - epsilon } else { off })
                .collect();
            Dist::new(space.clone(), &raw)
        })
        .collect()
}

/// `(x − x_i)·ln(x_i / (1 − x_i))`.
pub fn binary_gap_closed_form(x_i: f64, x: f64) -> Result<f64> {
    for (name, v) in [("x_i", x_i), ("x", x)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::ParamOutOfRange(format!(
                "{name} must lie in (0, 1), got {v}"
            )));
        }
    }
    Ok((x - x_i) * (x_i / (1.0 - x_i)).ln())
}
