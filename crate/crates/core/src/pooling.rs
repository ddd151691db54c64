//! Linear and logarithmic opinion pools, certified decompositions, and the
//! tilt representation of children around their pool.

use serde::{Deserialize, Serialize};

use crate::dist::{log_sum_exp, tv, Dist, OutcomeSpace, ScoreFn, Weights, VALUE_TOL};
use crate::error::{Error, Result};

/// Tolerance (in TV) when a decomposition is first built.
pub const DECOMP_TOL: f64 = 1e-12;
/// Looser tolerance for decompositions rebuilt after a perturbation.
pub const REVALIDATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Log,
    Linear,
}

fn check_agents(agents: &[Dist], weights: &Weights) -> Result<OutcomeSpace> {
    let first = agents.first().ok_or(Error::LengthMismatch {
        expected: weights.len(),
        found: 0,
    })?;
    if agents.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            found: agents.len(),
        });
    }
    for a in &agents[1..] {
        first.check_same_space(a)?;
    }
    Ok(first.space().clone())
}

/// `Σ_j β_j ln P_j(o)` for every outcome.
pub fn pooled_log_weights(agents: &[Dist], weights: &Weights) -> Result<Vec<f64>> {
    check_agents(agents, weights)?;
    let m = agents[0].len();
    let mut acc = vec![0.0; m];
    for (agent, &b) in agents.iter().zip(weights.as_slice()) {
        if b == 0.0 {
            continue;
        }
        for (a, l) in acc.iter_mut().zip(agent.ln_p()) {
            *a += b * l;
        }
    }
    Ok(acc)
}

/// Normalized weighted geometric mean of the agents.
pub fn log_pool(agents: &[Dist], weights: &Weights) -> Result<Dist> {
    let space = check_agents(agents, weights)?;
    let logw = pooled_log_weights(agents, weights)?;
    Dist::from_log_weights(space, &logw)
}

/// A log pool together with its unnormalized log masses and `ln Z`.
#[derive(Debug, Clone)]
pub struct PoolDiagnostics {
    pub pool: Dist,
    pub log_unnormalized: Vec<f64>,
    pub log_z: f64,
}

pub fn log_pool_diagnostics(agents: &[Dist], weights: &Weights) -> Result<PoolDiagnostics> {
    let space = check_agents(agents, weights)?;
    let log_unnormalized = pooled_log_weights(agents, weights)?;
    let log_z = log_sum_exp(&log_unnormalized);
    let pool = Dist::from_log_weights(space, &log_unnormalized)?;
    Ok(PoolDiagnostics {
        pool,
        log_unnormalized,
        log_z,
    })
}

/// Mixture `Σ β_i P_i`.
pub fn linear_pool(agents: &[Dist], weights: &Weights) -> Result<Dist> {
    let space = check_agents(agents, weights)?;
    let mut acc = vec![0.0; space.size()];
    for (agent, &b) in agents.iter().zip(weights.as_slice()) {
        for (a, p) in acc.iter_mut().zip(agent.p()) {
            *a += b * p;
        }
    }
    Dist::new(space, &acc)
}

pub fn pool(kind: PoolKind, agents: &[Dist], weights: &Weights) -> Result<Dist> {
    match kind {
        PoolKind::Log => log_pool(agents, weights),
        PoolKind::Linear => linear_pool(agents, weights),
    }
}

/// A parent together with children and weights certified to pool to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    parent: Dist,
    children: Vec<Dist>,
    weights: Weights,
    kind: PoolKind,
}

impl Decomposition {
    pub fn new(
        parent: Dist,
        children: Vec<Dist>,
        weights: Weights,
        kind: PoolKind,
    ) -> Result<Self> {
        Self::with_tolerance(parent, children, weights, kind, DECOMP_TOL)
    }

    pub fn with_tolerance(
        parent: Dist,
        children: Vec<Dist>,
        weights: Weights,
        kind: PoolKind,
        tol: f64,
    ) -> Result<Self> {
        if children.len() < 2 {
            return Err(Error::InvalidDecomposition(format!(
                "need at least two children, got {}",
                children.len()
            )));
        }
        let pooled = pool(kind, &children, &weights)?;
        parent.check_same_space(&pooled)?;
        let gap = tv(&pooled, &parent)?;
        if gap > tol {
            return Err(Error::NotAPoolWitness { discrepancy: gap });
        }
        Ok(Self {
            parent,
            children,
            weights,
            kind,
        })
    }

    /// Builds the decomposition whose parent is the pool of `children`.
    pub fn from_children(children: Vec<Dist>, weights: Weights, kind: PoolKind) -> Result<Self> {
        let parent = pool(kind, &children, &weights)?;
        Self::new(parent, children, weights, kind)
    }

    pub fn parent(&self) -> &Dist {
        &self.parent
    }

    pub fn children(&self) -> &[Dist] {
        &self.children
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn kind(&self) -> PoolKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    /// Recomputes the pool of the children from scratch.
    pub fn repool(&self) -> Result<Dist> {
        pool(self.kind, &self.children, &self.weights)
    }

    pub(crate) fn require_log(&self) -> Result<()> {
        if self.kind != PoolKind::Log {
            return Err(Error::KindMismatch { expected: "log" });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct DecompositionDoc {
    parent: Dist,
    children: Vec<Dist>,
    beta: Weights,
    kind: PoolKind,
}

impl Serialize for Decomposition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DecompositionDoc {
            parent: self.parent.clone(),
            children: self.children.clone(),
            beta: self.weights.clone(),
            kind: self.kind,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Decomposition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = DecompositionDoc::deserialize(d)?;
        Decomposition::new(doc.parent, doc.children, doc.beta, doc.kind)
            .map_err(serde::de::Error::custom)
    }
}

/// Writes every child as `P_i ∝ P·e^{h_i}` with `Σ β_i h_i ≡ 0`.
///
/// The raw tilts `ln P_i − ln P` already satisfy `Σ β_i h_i ≡ ln Z`; the
/// constant is removed from the single index `argmax β` (lowest index on
/// ties), which leaves every child unchanged.
pub fn tilt_representation(
    parent: &Dist,
    children: &[Dist],
    weights: &Weights,
) -> Result<Vec<ScoreFn>> {
    let m = parent.len();
    let mut tilts: Vec<Vec<f64>> = children
        .iter()
        .map(|c| {
            parent.check_same_space(c)?;
            Ok(c.ln_p()
                .iter()
                .zip(parent.ln_p())
                .map(|(a, b)| a - b)
                .collect())
        })
        .collect::<Result<_>>()?;
    if tilts.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            found: tilts.len(),
        });
    }
    let beta = weights.as_slice();
    let sums: Vec<f64> = (0..m)
        .map(|o| tilts.iter().zip(beta).map(|(h, b)| b * h[o]).sum())
        .collect();
    let log_z = parent.expectation(&sums)?;
    let discrepancy = sums.iter().map(|s| (s - log_z).abs()).fold(0.0, f64::max);
    if discrepancy > VALUE_TOL {
        return Err(Error::NotAPoolWitness { discrepancy });
    }
    let k = weights.argmax();
    let shift = log_z / beta[k];
    for x in tilts[k].iter_mut() {
        *x -= shift;
    }
    tilts.into_iter().map(ScoreFn::new).collect()
}

/// Rebuilds `P_i ∝ P·e^{h}`.
pub fn reconstruct_from_tilt(parent: &Dist, h: &ScoreFn) -> Result<Dist> {
    if h.len() != parent.len() {
        return Err(Error::DimensionMismatch {
            expected: parent.len(),
            found: h.len(),
        });
    }
    let logw: Vec<f64> = parent
        .ln_p()
        .iter()
        .zip(h.values())
        .map(|(a, b)| a + b)
        .collect();
    Dist::from_log_weights(parent.space().clone(), &logw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(raw: &[f64]) -> Dist {
        Dist::from_slice(raw).unwrap()
    }

    #[test]
    fn identical_agents_pool_to_themselves() {
        let a = d(&[0.1, 0.6, 0.3]);
        let w = Weights::new(vec![0.2, 0.5, 0.3]).unwrap();
        let agents = vec![a.clone(), a.clone(), a.clone()];
        assert!(tv(&log_pool(&agents, &w).unwrap(), &a).unwrap() < 1e-15);
        assert!(tv(&linear_pool(&agents, &w).unwrap(), &a).unwrap() < 1e-15);
    }

    #[test]
    fn symmetric_binary_log_pool_is_uniform() {
        let agents = vec![d(&[0.2, 0.8]), d(&[0.8, 0.2])];
        let w = Weights::uniform(2).unwrap();
        let p = log_pool(&agents, &w).unwrap();
        assert!((p.p()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_mixture_selects_agent() {
        let agents = vec![d(&[0.2, 0.8]), d(&[0.7, 0.3])];
        let w = Weights::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(linear_pool(&agents, &w).unwrap().p(), agents[0].p());
    }

    #[test]
    fn pool_errors() {
        let w = Weights::uniform(2).unwrap();
        assert_eq!(
            log_pool(&[d(&[0.5, 0.5]), d(&[0.2, 0.3, 0.5])], &w).unwrap_err(),
            Error::SpaceMismatch
        );
        assert!(matches!(
            log_pool(&[d(&[0.5, 0.5])], &w),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn decomposition_rejects_non_witness() {
        let children = vec![d(&[0.2, 0.8]), d(&[0.6, 0.4])];
        let w = Weights::uniform(2).unwrap();
        let err = Decomposition::new(d(&[0.5, 0.5]), children.clone(), w.clone(), PoolKind::Log);
        assert!(matches!(err, Err(Error::NotAPoolWitness { .. })));
        let ok = Decomposition::from_children(children, w, PoolKind::Log).unwrap();
        assert_eq!(ok.len(), 2);
    }

    #[test]
    fn tilts_of_parent_copies_vanish() {
        let p = d(&[0.3, 0.3, 0.4]);
        let w = Weights::new(vec![0.5, 0.25, 0.25]).unwrap();
        let h = tilt_representation(&p, &[p.clone(), p.clone(), p.clone()], &w).unwrap();
        assert!(h.iter().flat_map(|h| h.values()).all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn tilts_round_trip_and_sum_to_zero() {
        let children = vec![
            d(&[0.1, 0.2, 0.7]),
            d(&[0.5, 0.3, 0.2]),
            d(&[0.3, 0.3, 0.4]),
        ];
        let w = Weights::new(vec![0.3, 0.3, 0.4]).unwrap();
        let dec = Decomposition::from_children(children.clone(), w.clone(), PoolKind::Log).unwrap();
        let h = tilt_representation(dec.parent(), &children, &w).unwrap();
        for o in 0..3 {
            let s: f64 = h
                .iter()
                .zip(w.as_slice())
                .map(|(h, b)| b * h.values()[o])
                .sum();
            assert!(s.abs() < 1e-12);
        }
        for (hi, ci) in h.iter().zip(&children) {
            let r = reconstruct_from_tilt(dec.parent(), hi).unwrap();
            assert!(tv(&r, ci).unwrap() < 1e-14);
        }
        let bogus = tilt_representation(&d(&[0.5, 0.25, 0.25]), &children, &w);
        assert!(matches!(bogus, Err(Error::NotAPoolWitness { .. })));
    }

    #[test]
    fn decomposition_json_round_trip() {
        let children = vec![d(&[0.1, 0.9]), d(&[0.6, 0.4])];
        let dec =
            Decomposition::from_children(children, Weights::uniform(2).unwrap(), PoolKind::Log)
                .unwrap();
        let s = serde_json::to_string(&dec).unwrap();
        assert!(s.contains("\"kind\":\"log\""));
        let back: Decomposition = serde_json::from_str(&s).unwrap();
        assert_eq!(back, dec);
    }
}
