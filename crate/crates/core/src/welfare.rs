//! Welfare gaps under epistemic (log-score) utility, the covariance form of
//! the compositional-agent condition, and unanimity verdicts.

use serde::Serialize;

use crate::dist::{entropy, kl, Dist, ScoreFn, VALUE_TOL};
use crate::error::{Error, Result};
use crate::pooling::Decomposition;

/// `Δ_R(P) = E_P[ln R] − E_R[ln R]`, cross-checked against
/// `H(R) − H(P) − KL(P‖R)`.
pub fn welfare_gap(r: &Dist, p: &Dist) -> Result<f64> {
    Ok(gap_terms(r, p)?.gap)
}

/// The pieces of one welfare gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapTerms {
    pub gap: f64,
    pub entropy_agent: f64,
    pub entropy_pool: f64,
    pub kl_pool_agent: f64,
}

pub fn gap_terms(r: &Dist, p: &Dist) -> Result<GapTerms> {
    r.check_same_space(p)?;
    let direct = p.expectation(r.ln_p())? - r.expectation(r.ln_p())?;
    let entropy_agent = entropy(r);
    let entropy_pool = entropy(p);
    let kl_pool_agent = kl(p, r)?;
    let identity = entropy_agent - entropy_pool - kl_pool_agent;
    let scale = 1.0 + entropy_agent.abs() + entropy_pool.abs() + kl_pool_agent;
    if (direct - identity).abs() > VALUE_TOL * scale {
        return Err(Error::IdentityMismatch { direct, identity });
    }
    Ok(GapTerms {
        gap: direct,
        entropy_agent,
        entropy_pool,
        kl_pool_agent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceCheck {
    /// `Cov_{P_i}(W_i, P/P_i)`.
    pub cov: f64,
    /// `E_P[W_i] − E_{P_i}[W_i]`, computed directly.
    pub welfare_change: f64,
    pub is_compositional: bool,
}

/// Covariance under `agent` between `welfare` and the ratio `pool/agent`.
pub fn covariance_condition(
    agent: &Dist,
    welfare: &ScoreFn,
    pool: &Dist,
) -> Result<CovarianceCheck> {
    covariance_condition_with_tolerance(agent, welfare, pool, VALUE_TOL)
}

pub fn covariance_condition_with_tolerance(
    agent: &Dist,
    welfare: &ScoreFn,
    pool: &Dist,
    tol: f64,
) -> Result<CovarianceCheck> {
    agent.check_same_space(pool)?;
    let w = welfare.values();
    let ratio: Vec<f64> = pool
        .ln_p()
        .iter()
        .zip(agent.ln_p())
        .map(|(a, b)| (a - b).exp())
        .collect();
    let ew = agent.expectation(w)?;
    let eq = agent.expectation(&ratio)?;
    let cov = agent
        .p()
        .iter()
        .zip(w.iter().zip(&ratio))
        .map(|(pi, (wi, qi))| pi * (wi - ew) * (qi - eq))
        .sum();
    let welfare_change = pool.expectation(w)? - ew;
    Ok(CovarianceCheck {
        cov,
        welfare_change,
        is_compositional: cov >= -tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelfareReport {
    pub gaps: Vec<f64>,
    pub entropy_terms: Vec<GapTerms>,
    pub unanimous: bool,
    pub strictly_unanimous: bool,
    pub tolerance: f64,
}

impl WelfareReport {
    pub fn min_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Gaps of every agent against `pool`, with `W_i = ln P_i`.
pub fn welfare_report(agents: &[Dist], pool: &Dist, tol: f64) -> Result<WelfareReport> {
    let entropy_terms = agents
        .iter()
        .map(|a| gap_terms(a, pool))
        .collect::<Result<Vec<_>>>()?;
    let gaps: Vec<f64> = entropy_terms.iter().map(|t| t.gap).collect();
    Ok(WelfareReport {
        unanimous: gaps.iter().all(|&g| g >= -tol),
        strictly_unanimous: gaps.iter().all(|&g| g > tol),
        gaps,
        entropy_terms,
        tolerance: tol,
    })
}

pub fn unanimity_report(decomp: &Decomposition) -> Result<WelfareReport> {
    welfare_report(decomp.children(), decomp.parent(), VALUE_TOL)
}

/// `Σ β_i Δ_i` for a decomposition.
pub fn weighted_gap_sum(decomp: &Decomposition) -> Result<f64> {
    let report = unanimity_report(decomp)?;
    Ok(report
        .gaps
        .iter()
        .zip(decomp.weights().as_slice())
        .map(|(g, b)| g * b)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{OutcomeSpace, Weights};
    use crate::pooling::PoolKind;

    fn d(raw: &[f64]) -> Dist {
        Dist::from_slice(raw).unwrap()
    }

    #[test]
    fn self_gap_is_zero() {
        let p = d(&[0.2, 0.5, 0.3]);
        assert!(welfare_gap(&p, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn binary_gap_matches_log_odds_form() {
        for &(xi, x) in &[(0.2, 0.6), (0.9, 0.1), (0.5, 0.77)] {
            let g = welfare_gap(&d(&[xi, 1.0 - xi]), &d(&[x, 1.0 - x])).unwrap();
            let closed = (x - xi) * (xi / (1.0 - xi)).ln();
            assert!((g - closed).abs() < 1e-12, "{g} vs {closed}");
        }
    }

    #[test]
    fn gap_against_uniform_is_symmetrized_kl() {
        let r = d(&[0.7, 0.1, 0.2]);
        let u = Dist::uniform(OutcomeSpace::new(3).unwrap());
        let g = welfare_gap(&r, &u).unwrap();
        let sym = kl(&r, &u).unwrap() + kl(&u, &r).unwrap();
        assert!((g + sym).abs() < 1e-12);
    }

    #[test]
    fn covariance_trivial_cases() {
        let p = d(&[0.2, 0.5, 0.3]);
        let w = ScoreFn::new(vec![1.0, -2.0, 0.5]).unwrap();
        let c = covariance_condition(&p, &w, &p).unwrap();
        assert!(c.cov.abs() < 1e-15 && c.is_compositional);
        let q = d(&[0.6, 0.1, 0.3]);
        let c = covariance_condition(&p, &ScoreFn::constant(3, 4.0), &q).unwrap();
        assert!(c.cov.abs() < 1e-15 && c.is_compositional);
    }

    #[test]
    fn covariance_equals_welfare_change() {
        let agent = d(&[0.2, 0.5, 0.3]);
        let pool = d(&[0.6, 0.1, 0.3]);
        let w = ScoreFn::new(vec![3.0, -1.0, 0.0]).unwrap();
        let c = covariance_condition(&agent, &w, &pool).unwrap();
        assert!((c.cov - c.welfare_change).abs() < 1e-14);
        assert!(c.is_compositional);
    }

    #[test]
    fn identical_children_are_weakly_unanimous() {
        let p = d(&[0.3, 0.3, 0.4]);
        let dec = Decomposition::from_children(
            vec![p.clone(), p.clone()],
            Weights::uniform(2).unwrap(),
            PoolKind::Log,
        )
        .unwrap();
        let r = unanimity_report(&dec).unwrap();
        assert!(r.unanimous && !r.strictly_unanimous);
        assert!(weighted_gap_sum(&dec).unwrap().abs() < 1e-15);
    }

    #[test]
    fn linear_pool_loses_on_average() {
        let dec = Decomposition::from_children(
            vec![d(&[0.1, 0.3, 0.6]), d(&[0.5, 0.4, 0.1])],
            Weights::new(vec![0.4, 0.6]).unwrap(),
            PoolKind::Linear,
        )
        .unwrap();
        assert!(weighted_gap_sum(&dec).unwrap() < 0.0);
    }
}
