//! Factorizing a parent belief into subagents, with or without fixed
//! components, and compatible splits of an existing child.

use rand::Rng;
use serde::Serialize;

use crate::dist::{coarse_grain_bound, tv, Dist, Event, OutcomeSpace, ScoreFn, Weights};
use crate::error::{Error, Result};
use crate::pooling::{log_pool, Decomposition, PoolKind};
use crate::sampling::rng_for;
use crate::welfare::welfare_gap;

/// Minimum TV separating children from each other and from the parent.
pub const DISTINCT_TV: f64 = 1e-6;
/// Seeds tried before giving up on distinctness.
pub const RETRY_BUDGET: usize = 16;
/// Base tilt magnitude for generated components.
pub const TILT_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    PairwiseDistinct,
    WithFixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub construction: Construction,
    pub seed: u64,
    /// Zero-based retry that produced the result.
    pub attempt: usize,
    /// Index of the child solved from the others.
    pub solved_index: usize,
    pub fixed: usize,
    pub tilt_magnitudes: Vec<f64>,
    pub distinct_tv: f64,
    pub min_pairwise_tv: f64,
    pub min_tv_to_parent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Factorization {
    #[serde(flatten)]
    pub decomposition: Decomposition,
    pub provenance: Provenance,
}

/// `Q ∝ U·e^{ε h}` with a seeded direction `h` centered under the uniform
/// reference and scaled to unit sup norm.
fn tilted_reference<R: Rng>(rng: &mut R, space: &OutcomeSpace, magnitude: f64) -> Result<Dist> {
    let m = space.size();
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = raw.iter().sum::<f64>() / m as f64;
    let centered: Vec<f64> = raw.iter().map(|x| x - mean).collect();
    let sup = centered.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let logw: Vec<f64> = if sup > 0.0 {
        centered.iter().map(|x| magnitude * x / sup).collect()
    } else {
        // Degenerate draw; fall back to a fixed non-constant direction.
        (0..m)
            .map(|o| if o == 0 { magnitude } else { 0.0 })
            .collect()
    };
    Dist::from_log_weights(space.clone(), &logw)
}

/// `ln P_k = (ln P − Σ_{i≠k} β_i ln P_i) / β_k`, normalized.
fn solve_component(
    parent: &Dist,
    others: &[(usize, &Dist)],
    weights: &Weights,
    k: usize,
) -> Result<Dist> {
    let beta = weights.as_slice();
    let logw: Vec<f64> = (0..parent.len())
        .map(|o| {
            let rest: f64 = others.iter().map(|(i, d)| beta[*i] * d.ln_p()[o]).sum();
            (parent.ln_p()[o] - rest) / beta[k]
        })
        .collect();
    Dist::from_log_weights(parent.space().clone(), &logw)
}

/// Smallest TV over child pairs not both fixed, and smallest TV from a
/// non-fixed child to the parent.
fn separation(parent: &Dist, children: &[Dist], fixed: usize) -> Result<(f64, f64)> {
    let mut pairwise = f64::INFINITY;
    for i in 0..children.len() {
        for j in (i + 1)..children.len() {
            if i < fixed && j < fixed {
                continue;
            }
            pairwise = pairwise.min(tv(&children[i], &children[j])?);
        }
    }
    let mut to_parent = f64::INFINITY;
    for c in &children[fixed..] {
        to_parent = to_parent.min(tv(c, parent)?);
    }
    Ok((pairwise, to_parent))
}

fn magnitudes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| TILT_SCALE * (1.0 + i as f64 / n as f64))
        .collect()
}

fn build(
    parent: &Dist,
    fixed: &[Dist],
    weights: &Weights,
    solved: usize,
    seed: u64,
    construction: Construction,
) -> Result<Factorization> {
    let n = weights.len();
    let eps = magnitudes(n);
    for attempt in 0..RETRY_BUDGET {
        let mut rng = rng_for(seed, attempt as u64);
        let mut children: Vec<Option<Dist>> = vec![None; n];
        for (i, f) in fixed.iter().enumerate() {
            children[i] = Some(f.clone());
        }
        for i in fixed.len()..n {
            if i != solved {
                children[i] = Some(tilted_reference(&mut rng, parent.space(), eps[i])?);
            }
        }
        let others: Vec<(usize, &Dist)> = children
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (i, c)))
            .collect();
        let solved_child = solve_component(parent, &others, weights, solved)?;
        children[solved] = Some(solved_child);
        let children: Vec<Dist> = children.into_iter().map(|c| c.expect("filled")).collect();
        let (min_pairwise_tv, min_tv_to_parent) = separation(parent, &children, fixed.len())?;
        if min_pairwise_tv <= DISTINCT_TV || min_tv_to_parent <= DISTINCT_TV {
            continue;
        }
        let decomposition =
            Decomposition::new(parent.clone(), children, weights.clone(), PoolKind::Log)?;
        return Ok(Factorization {
            decomposition,
            provenance: Provenance {
                construction,
                seed,
                attempt,
                solved_index: solved,
                fixed: fixed.len(),
                tilt_magnitudes: eps,
                distinct_tv: DISTINCT_TV,
                min_pairwise_tv,
                min_tv_to_parent,
            },
        });
    }
    Err(Error::DistinctnessFailure {
        attempts: RETRY_BUDGET,
    })
}

/// Children that log-pool to `parent`, pairwise distinct and distinct from
/// it. The heaviest-weight child absorbs the residual.
pub fn factor_pairwise_distinct(
    parent: &Dist,
    weights: &Weights,
    seed: u64,
) -> Result<Factorization> {
    if weights.positive_count() < 2 {
        return Err(Error::WeightTooConcentrated);
    }
    build(
        parent,
        &[],
        weights,
        weights.argmax(),
        seed,
        Construction::PairwiseDistinct,
    )
}

/// Factorization whose first `fixed.len()` children are given verbatim.
/// Child `fixed.len()` is solved; the rest are generated.
pub fn factor_with_fixed(
    parent: &Dist,
    fixed: &[Dist],
    weights: &Weights,
    seed: u64,
) -> Result<Factorization> {
    let m = fixed.len();
    let n = weights.len();
    if n < m + 2 {
        return Err(Error::PreconditionViolation(format!(
            "need at least {} weights for {m} fixed components, got {n}",
            m + 2
        )));
    }
    let beta = weights.as_slice();
    if beta[m] <= 0.0 {
        return Err(Error::PreconditionViolation(format!(
            "weight of solved component {m} must be positive"
        )));
    }
    if m > 0 && beta[..m].iter().all(|&b| b == 0.0) {
        return Err(Error::PreconditionViolation(
            "some fixed component needs positive weight".into(),
        ));
    }
    for f in fixed {
        parent.check_same_space(f)?;
    }
    build(parent, fixed, weights, m, seed, Construction::WithFixed)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::ParamOutOfRange(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Subagents `ln P₁₁ = ln P₁ + (1−α)g − c₁` and `ln P₁₂ = ln P₁ − αg − c₂`,
/// whose `(α, 1−α)` log pool is the child again.
pub fn compatible_split(child: &Dist, alpha: f64, g: &ScoreFn) -> Result<(Dist, Dist)> {
    check_alpha(alpha)?;
    if g.len() != child.len() {
        return Err(Error::DimensionMismatch {
            expected: child.len(),
            found: g.len(),
        });
    }
    let first: Vec<f64> = child
        .ln_p()
        .iter()
        .zip(g.values())
        .map(|(l, x)| l + (1.0 - alpha) * x)
        .collect();
    let second: Vec<f64> = child
        .ln_p()
        .iter()
        .zip(g.values())
        .map(|(l, x)| l - alpha * x)
        .collect();
    Ok((
        Dist::from_log_weights(child.space().clone(), &first)?,
        Dist::from_log_weights(child.space().clone(), &second)?,
    ))
}

/// Children and weights with child `index` replaced by its split; the two
/// subagents sit at `index` and `index + 1`.
pub fn split_children(
    decomp: &Decomposition,
    index: usize,
    alpha: f64,
    g: &ScoreFn,
) -> Result<(Vec<Dist>, Weights)> {
    let n = decomp.len();
    if index >= n {
        return Err(Error::IndexOutOfRange { index, len: n });
    }
    let (a, b) = compatible_split(&decomp.children()[index], alpha, g)?;
    let beta = decomp.weights().as_slice();
    let mut children = Vec::with_capacity(n + 1);
    let mut w = Vec::with_capacity(n + 1);
    for (i, c) in decomp.children().iter().enumerate() {
        if i == index {
            children.push(a.clone());
            children.push(b.clone());
            w.push(alpha * beta[i]);
            w.push((1.0 - alpha) * beta[i]);
        } else {
            children.push(c.clone());
            w.push(beta[i]);
        }
    }
    Ok((children, Weights::new(w)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitCheck {
    pub first: Dist,
    pub second: Dist,
    pub pooled: Dist,
    /// TV between the pool after splitting and the original parent.
    pub tv_delta: f64,
}

pub fn split_invariance_check(
    decomp: &Decomposition,
    index: usize,
    alpha: f64,
    g: &ScoreFn,
) -> Result<SplitCheck> {
    decomp.require_log()?;
    let (children, weights) = split_children(decomp, index, alpha, g)?;
    let pooled = log_pool(&children, &weights)?;
    let tv_delta = tv(&pooled, decomp.parent())?;
    Ok(SplitCheck {
        first: children[index].clone(),
        second: children[index + 1].clone(),
        pooled,
        tv_delta,
    })
}

/// `E_{P_t}[ln P₁]` with `P_t ∝ P₁^t`.
pub fn tilt_mean(p1: &Dist, t: f64) -> Result<f64> {
    let logw: Vec<f64> = p1.ln_p().iter().map(|l| t * l).collect();
    let pt = Dist::from_log_weights(p1.space().clone(), &logw)?;
    pt.expectation(p1.ln_p())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParentBenefitReport {
    pub t: f64,
    pub alpha: f64,
    pub o_star: usize,
    pub lambda: f64,
    /// `P_t ∝ P₁^t`, built as the even log pool of `P₁` and `P₁^{2t−1}`.
    pub pool: Dist,
    pub parent_gap: f64,
    pub subagent_gap: f64,
    pub sibling_gap: f64,
    /// TV between the pool after splitting `P₁` and `P_t`.
    pub split_tv: f64,
    pub kl_pool_subagent: f64,
    pub coarse_bound: f64,
}

/// Even log pool of `P₁` and `P₂ ∝ P₁^{2t−1}`, with `P₁` then split by
/// `g = −λ·1_{o⋆}`.
pub fn parent_benefit_counterexample(
    p1: &Dist,
    t: f64,
    alpha: f64,
    o_star: usize,
    lambda: f64,
) -> Result<ParentBenefitReport> {
    if p1.uniformity_defect() < 1e-12 {
        return Err(Error::UniformParent);
    }
    if !(t.is_finite() && t > 1.0) {
        return Err(Error::ParamOutOfRange(format!("t must exceed 1, got {t}")));
    }
    check_alpha(alpha)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::ParamOutOfRange(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let m = p1.len();
    if o_star >= m {
        return Err(Error::IndexOutOfRange {
            index: o_star,
            len: m,
        });
    }
    let logw: Vec<f64> = p1.ln_p().iter().map(|l| (2.0 * t - 1.0) * l).collect();
    let p2 = Dist::from_log_weights(p1.space().clone(), &logw)?;
    let half = Weights::uniform(2)?;
    let decomp = Decomposition::from_children(vec![p1.clone(), p2], half, PoolKind::Log)?;
    let event = Event::new(m, &[o_star])?;
    let g = ScoreFn::indicator(m, &event).scaled(-lambda);
    let split = split_invariance_check(&decomp, 0, alpha, &g)?;
    let pool = decomp.parent().clone();
    let (kl_pool_subagent, coarse_bound) = coarse_grain_bound(&pool, &split.first, &event)?;
    Ok(ParentBenefitReport {
        t,
        alpha,
        o_star,
        lambda,
        parent_gap: welfare_gap(p1, &pool)?,
        subagent_gap: welfare_gap(&split.first, &pool)?,
        sibling_gap: welfare_gap(&split.second, &pool)?,
        split_tv: split.tv_delta,
        kl_pool_subagent,
        coarse_bound,
        pool,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParentBenefitSweep {
    pub rows: Vec<ParentBenefitReport>,
    /// First `λ` on the schedule with a negative subagent gap.
    pub first_negative_lambda: Option<f64>,
}

/// `λ ∈ {1, 2, 4, …, 2^12}`, stopping at the first negative subagent gap.
pub fn parent_benefit_sweep(
    p1: &Dist,
    t: f64,
    alpha: f64,
    o_star: usize,
) -> Result<ParentBenefitSweep> {
    let mut rows = Vec::new();
    for k in 0..=12 {
        let lambda = f64::from(1u32 << k);
        let row = parent_benefit_counterexample(p1, t, alpha, o_star, lambda)?;
        let negative = row.subagent_gap < 0.0;
        rows.push(row);
        if negative {
            return Ok(ParentBenefitSweep {
                rows,
                first_negative_lambda: Some(lambda),
            });
        }
    }
    Ok(ParentBenefitSweep {
        rows,
        first_negative_lambda: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::welfare::unanimity_report;

    fn d(raw: &[f64]) -> Dist {
        Dist::from_slice(raw).unwrap()
    }

    #[test]
    fn two_way_uniform_factorization() {
        let p = d(&[0.1, 0.2, 0.3, 0.4]);
        let f = factor_pairwise_distinct(&p, &Weights::uniform(2).unwrap(), 9).unwrap();
        let back = f.decomposition.repool().unwrap();
        assert!(tv(&back, &p).unwrap() <= 1e-12);
        assert_eq!(f.provenance.solved_index, 0);
    }

    #[test]
    fn four_distinct_children_on_five_outcomes() {
        let p = d(&[0.3, 0.1, 0.2, 0.15, 0.25]);
        let w = Weights::new(vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        let f = factor_pairwise_distinct(&p, &w, 1).unwrap();
        let c = f.decomposition.children();
        for i in 0..4 {
            assert!(tv(&c[i], &p).unwrap() > DISTINCT_TV);
            for j in (i + 1)..4 {
                assert!(tv(&c[i], &c[j]).unwrap() > DISTINCT_TV);
            }
        }
        assert_eq!(f.provenance.solved_index, 1);
    }

    #[test]
    fn zero_weight_children_are_irrelevant() {
        let p = d(&[0.3, 0.3, 0.4]);
        let w = Weights::new(vec![0.7, 0.3, 0.0, 0.0]).unwrap();
        let f = factor_pairwise_distinct(&p, &w, 4).unwrap();
        let mut kids = f.decomposition.children().to_vec();
        kids[2] = d(&[0.9, 0.05, 0.05]);
        kids[3] = d(&[0.01, 0.01, 0.98]);
        assert!(tv(&log_pool(&kids, &w).unwrap(), &p).unwrap() < 1e-12);
    }

    #[test]
    fn concentrated_weights_rejected() {
        let p = d(&[0.5, 0.5]);
        let w = Weights::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            factor_pairwise_distinct(&p, &w, 0).unwrap_err(),
            Error::WeightTooConcentrated
        );
    }

    #[test]
    fn fixed_component_kept_verbatim() {
        let p = d(&[0.2, 0.5, 0.3]);
        let w = Weights::uniform(3).unwrap();
        let f = factor_with_fixed(&p, std::slice::from_ref(&p), &w, 3).unwrap();
        assert_eq!(&f.decomposition.children()[0], &p);
        let peaked = vec![d(&[1e-6, 1e-6, 1.0]), d(&[0.98, 0.01, 0.01])];
        let w = Weights::new(vec![0.25, 0.25, 0.3, 0.2]).unwrap();
        let f = factor_with_fixed(&p, &peaked, &w, 3).unwrap();
        assert!(tv(&f.decomposition.repool().unwrap(), &p).unwrap() <= 1e-12);
        let w2 = Weights::uniform(2).unwrap();
        assert!(matches!(
            factor_with_fixed(&p, std::slice::from_ref(&p), &w2, 0),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn clone_split_is_identity() {
        let c = d(&[0.2, 0.3, 0.5]);
        let (a, b) = compatible_split(&c, 0.4, &ScoreFn::zeros(3)).unwrap();
        assert!(tv(&a, &c).unwrap() < 1e-15 && tv(&b, &c).unwrap() < 1e-15);
    }

    #[test]
    fn depressing_split_starves_outcome() {
        let c = d(&[0.2, 0.3, 0.5]);
        let e = Event::new(3, &[1]).unwrap();
        let g = ScoreFn::indicator(3, &e).scaled(-40.0);
        let (a, _) = compatible_split(&c, 0.5, &g).unwrap();
        assert!(a.p()[1] < 1e-8);
    }

    #[test]
    fn split_keeps_pool_and_clone_keeps_gaps() {
        let dec = Decomposition::from_children(
            vec![
                d(&[0.1, 0.6, 0.3]),
                d(&[0.4, 0.4, 0.2]),
                d(&[0.3, 0.2, 0.5]),
            ],
            Weights::new(vec![0.2, 0.5, 0.3]).unwrap(),
            PoolKind::Log,
        )
        .unwrap();
        let g = ScoreFn::new(vec![20.0, -20.0, 3.0]).unwrap();
        assert!(split_invariance_check(&dec, 1, 0.37, &g).unwrap().tv_delta <= 1e-10);
        let before = unanimity_report(&dec).unwrap().gaps;
        let (kids, w) = split_children(&dec, 2, 0.5, &ScoreFn::zeros(3)).unwrap();
        let after = crate::welfare::welfare_report(&kids, dec.parent(), 1e-9)
            .unwrap()
            .gaps;
        assert!((after[2] - before[2]).abs() < 1e-12 && (after[3] - before[2]).abs() < 1e-12);
        assert_eq!(w.len(), 4);
        assert!(matches!(
            split_invariance_check(&dec, 3, 0.5, &g),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn parent_benefit_witness() {
        let p1 = d(&[0.5, 0.3, 0.2]);
        let sweep = parent_benefit_sweep(&p1, 2.0, 0.5, 2).unwrap();
        assert!(sweep.rows.iter().all(|r| r.parent_gap > 0.0));
        assert!(sweep.first_negative_lambda.is_some());
        let u = d(&[1.0, 1.0, 1.0]);
        assert_eq!(
            parent_benefit_counterexample(&u, 2.0, 0.5, 0, 1.0).unwrap_err(),
            Error::UniformParent
        );
    }

    #[test]
    fn tilt_mean_is_nondecreasing() {
        let p1 = d(&[0.5, 0.3, 0.2]);
        let means: Vec<f64> = (0..20)
            .map(|k| tilt_mean(&p1, 1.0 + 0.25 * k as f64).unwrap())
            .collect();
        assert!(means.windows(2).all(|w| w[1] - w[0] > 0.0));
    }
}
