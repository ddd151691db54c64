//! Pool-preserving transport, empirical openness radii around strictly
//! unanimous decompositions, and small-tilt derivatives.

use serde::Serialize;

use crate::dist::{covariance_p, tv, Dist, OutcomeSpace, ScoreFn, Weights, VALUE_TOL};
use crate::error::{Error, Result};
use crate::pooling::{Decomposition, REVALIDATE_TOL};
use crate::sampling::{random_dist, rng_for};
use crate::welfare::{unanimity_report, welfare_gap};

/// `S(P_i) ∝ P_i · R / P`, evaluated in log space. Returns `child` itself
/// when `target` equals `base`.
pub fn transport(child: &Dist, base: &Dist, target: &Dist) -> Result<Dist> {
    child.check_same_space(base)?;
    base.check_same_space(target)?;
    if target.p() == base.p() {
        return Ok(child.clone());
    }
    let logw: Vec<f64> = child
        .ln_p()
        .iter()
        .zip(base.ln_p().iter().zip(target.ln_p()))
        .map(|(c, (b, t))| c + t - b)
        .collect();
    Dist::from_log_weights(child.space().clone(), &logw)
}

/// Moves every child so that the pool becomes `target`, keeping weights.
pub fn transport_decomposition(decomp: &Decomposition, target: &Dist) -> Result<Decomposition> {
    decomp.require_log()?;
    decomp.parent().check_same_space(target)?;
    let children = decomp
        .children()
        .iter()
        .map(|c| transport(c, decomp.parent(), target))
        .collect::<Result<Vec<_>>>()?;
    Decomposition::with_tolerance(
        target.clone(),
        children,
        decomp.weights().clone(),
        decomp.kind(),
        REVALIDATE_TOL,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpennessCertificate {
    pub center: Decomposition,
    /// TV radius within which every probed target stayed strictly unanimous.
    pub radius: f64,
    pub samples: usize,
    pub min_gap_at_boundary: f64,
    pub seed: u64,
    pub sample_radii: Vec<f64>,
}

/// First step of the upward scan, floor of the downward one, and bisection depth.
const SCAN_START: f64 = 1.0 / (1u64 << 40) as f64;
const SCAN_FLOOR_EXP: i32 = -200;
const BISECT_STEPS: usize = 30;

fn mix(p: &Dist, q: &Dist, s: f64) -> Result<Dist> {
    let raw: Vec<f64> = p
        .p()
        .iter()
        .zip(q.p())
        .map(|(a, b)| (1.0 - s) * a + s * b)
        .collect();
    Dist::new(p.space().clone(), &raw)
}

fn min_gap_at(decomp: &Decomposition, target: &Dist) -> Result<f64> {
    let moved = transport_decomposition(decomp, target)?;
    Ok(unanimity_report(&moved)?.min_gap())
}

fn passes(decomp: &Decomposition, target: &Dist) -> Result<bool> {
    Ok(min_gap_at(decomp, target)? > VALUE_TOL)
}

/// Largest passing step on the ray `P + s(Q − P)`, found by a geometric scan
/// followed by bisection at the first failure.
fn ray_radius(decomp: &Decomposition, q: &Dist) -> Result<f64> {
    let p = decomp.parent();
    let root = std::f64::consts::SQRT_2;
    let mut pass;
    let mut fail = None;
    let mut s = SCAN_START;
    if !passes(decomp, &mix(p, q, s)?)? {
        // Walk down until a step passes.
        fail = Some(s);
        let floor = 2f64.powi(SCAN_FLOOR_EXP);
        loop {
            s /= 2.0;
            if s < floor {
                return Ok(0.0);
            }
            if passes(decomp, &mix(p, q, s)?)? {
                pass = s;
                break;
            }
            fail = Some(s);
        }
    } else {
        pass = s;
        while s < 1.0 {
            s = (s * root).min(1.0);
            if passes(decomp, &mix(p, q, s)?)? {
                pass = s;
            } else {
                fail = Some(s);
                break;
            }
        }
    }
    if let Some(mut hi) = fail {
        let mut lo = pass;
        for _ in 0..BISECT_STEPS {
            let mid = 0.5 * (lo + hi);
            if passes(decomp, &mix(p, q, mid)?)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        pass = lo;
    }
    tv(p, &mix(p, q, pass)?)
}

/// Probes `samples` seeded rays from the parent toward random interior
/// distributions and reports the smallest clean TV radius.
pub fn certify_openness(
    decomp: &Decomposition,
    samples: usize,
    seed: u64,
) -> Result<OpennessCertificate> {
    let report = unanimity_report(decomp)?;
    if !report.strictly_unanimous {
        return Err(Error::NotStrictlyUnanimous {
            min_gap: report.min_gap(),
        });
    }
    if samples == 0 {
        return Err(Error::ParamOutOfRange("samples must be positive".into()));
    }
    let m = decomp.parent().len();
    let directions = (0..samples)
        .map(|j| random_dist(&mut rng_for(seed, j as u64), m, 2.0))
        .collect::<Result<Vec<_>>>()?;
    let sample_radii = directions
        .iter()
        .map(|q| ray_radius(decomp, q))
        .collect::<Result<Vec<_>>>()?;
    let mut radius = sample_radii.iter().copied().fold(f64::INFINITY, f64::min);
    if radius <= 0.0 {
        return Err(Error::OpennessNotCertified);
    }
    // Gap on the sphere of the final radius along every ray; shrink until
    // all of those points are strictly unanimous.
    let p = decomp.parent();
    for _ in 0..64 {
        let mut worst = f64::INFINITY;
        for q in &directions {
            let s = radius / tv(p, q)?;
            worst = worst.min(min_gap_at(decomp, &mix(p, q, s.min(1.0))?)?);
        }
        if worst > VALUE_TOL {
            return Ok(OpennessCertificate {
                center: decomp.clone(),
                radius,
                samples,
                min_gap_at_boundary: worst,
                seed,
                sample_radii,
            });
        }
        radius /= 2.0;
    }
    Err(Error::OpennessNotCertified)
}

/// `d/dε Δ_{P^{(ε)}}(P)` at `ε = 0` for `P^{(ε)} ∝ P e^{εh}`, which is
/// `−Cov_P(h, ln P)`.
pub fn tilt_gap_derivative(p: &Dist, h: &ScoreFn) -> Result<f64> {
    if h.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: h.len(),
        });
    }
    Ok(-covariance_p(p, h.values(), p.ln_p())?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalAudit {
    pub derivatives: Vec<f64>,
    pub weighted_sum: f64,
}

/// Derivatives of every child's gap along its tilt, plus their
/// `β`-weighted sum. The tilts must satisfy `Σ β_i h_i ≡ 0`.
pub fn local_unanimity_audit(p: &Dist, tilts: &[ScoreFn], weights: &Weights) -> Result<LocalAudit> {
    if tilts.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            found: tilts.len(),
        });
    }
    let beta = weights.as_slice();
    let mut max_violation = 0.0f64;
    for o in 0..p.len() {
        let mut s = 0.0;
        for (h, b) in tilts.iter().zip(beta) {
            if h.len() != p.len() {
                return Err(Error::DimensionMismatch {
                    expected: p.len(),
                    found: h.len(),
                });
            }
            s += b * h.values()[o];
        }
        max_violation = max_violation.max(s.abs());
    }
    if max_violation > VALUE_TOL {
        return Err(Error::TiltsNotCentered { max_violation });
    }
    let derivatives = tilts
        .iter()
        .map(|h| tilt_gap_derivative(p, h))
        .collect::<Result<Vec<_>>>()?;
    let weighted_sum = derivatives.iter().zip(beta).map(|(d, b)| d * b).sum();
    Ok(LocalAudit {
        derivatives,
        weighted_sum,
    })
}

/// `Δ_R(U)`: the gap of `R` when the pool is uniform.
pub fn uniform_no_gain(r: &Dist) -> Result<f64> {
    let u = Dist::uniform(OutcomeSpace::clone(r.space()));
    welfare_gap(r, &u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{analytic_unanimity_instance, find_epsilon_for_unanimity};
    use crate::dist::kl;
    use crate::pooling::PoolKind;

    fn d(raw: &[f64]) -> Dist {
        Dist::from_slice(raw).unwrap()
    }

    #[test]
    fn transport_trivial_cases() {
        let c = d(&[0.1, 0.2, 0.7]);
        let p = d(&[0.3, 0.3, 0.4]);
        let r = d(&[0.5, 0.25, 0.25]);
        assert_eq!(transport(&c, &p, &p).unwrap(), c);
        assert!(tv(&transport(&p, &p, &r).unwrap(), &r).unwrap() < 1e-15);
    }

    #[test]
    fn transported_decomposition_pools_to_target() {
        let dec = Decomposition::from_children(
            vec![d(&[0.1, 0.2, 0.7]), d(&[0.6, 0.3, 0.1])],
            Weights::new(vec![0.3, 0.7]).unwrap(),
            PoolKind::Log,
        )
        .unwrap();
        let r = d(&[0.05, 0.05, 0.9]);
        let moved = transport_decomposition(&dec, &r).unwrap();
        assert!(tv(&moved.repool().unwrap(), &r).unwrap() < 1e-12);
        let back = transport_decomposition(&moved, dec.parent()).unwrap();
        for (a, b) in back.children().iter().zip(dec.children()) {
            assert!(tv(a, b).unwrap() < 1e-12);
        }
        assert_eq!(transport_decomposition(&dec, dec.parent()).unwrap(), dec);
    }

    #[test]
    fn openness_on_analytic_instance() {
        let eps = find_epsilon_for_unanimity(3, None).unwrap();
        let dec = analytic_unanimity_instance(3, eps, None).unwrap();
        let cert = certify_openness(&dec, 16, 42).unwrap();
        assert!(cert.radius > 0.0 && cert.min_gap_at_boundary > 0.0);
    }

    #[test]
    fn binary_decomposition_is_not_strictly_unanimous() {
        let dec = Decomposition::from_children(
            vec![d(&[0.2, 0.8]), d(&[0.7, 0.3])],
            Weights::uniform(2).unwrap(),
            PoolKind::Log,
        )
        .unwrap();
        assert!(matches!(
            certify_openness(&dec, 8, 1),
            Err(Error::NotStrictlyUnanimous { .. })
        ));
    }

    #[test]
    fn derivative_trivial_cases() {
        let p = d(&[0.2, 0.3, 0.5]);
        assert_eq!(
            tilt_gap_derivative(&p, &ScoreFn::constant(3, 2.0))
                .unwrap()
                .abs(),
            0.0
        );
        let u = d(&[1.0, 1.0, 1.0]);
        let h = ScoreFn::new(vec![1.0, -3.0, 0.5]).unwrap();
        assert!(tilt_gap_derivative(&u, &h).unwrap().abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let p = d(&[0.2, 0.3, 0.5]);
        let h = ScoreFn::new(vec![0.4, -1.0, 0.7]).unwrap();
        let gap = |e: f64| {
            let r = crate::pooling::reconstruct_from_tilt(&p, &h.scaled(e)).unwrap();
            welfare_gap(&r, &p).unwrap()
        };
        let step = 1e-5;
        let fd = (gap(step) - gap(-step)) / (2.0 * step);
        let exact = tilt_gap_derivative(&p, &h).unwrap();
        assert!((fd - exact).abs() <= 1e-6 * exact.abs());
    }

    #[test]
    fn audit_rejects_uncentered_tilts() {
        let p = d(&[0.2, 0.3, 0.5]);
        let w = Weights::uniform(2).unwrap();
        let h = vec![
            ScoreFn::new(vec![1.0, 0.0, 0.0]).unwrap(),
            ScoreFn::zeros(3),
        ];
        assert!(matches!(
            local_unanimity_audit(&p, &h, &w),
            Err(Error::TiltsNotCentered { .. })
        ));
        let h = vec![ScoreFn::zeros(3), ScoreFn::zeros(3)];
        let a = local_unanimity_audit(&p, &h, &w).unwrap();
        assert!(a.derivatives.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_no_gain_examples() {
        assert_eq!(uniform_no_gain(&d(&[1.0, 1.0])).unwrap().abs(), 0.0);
        let r = d(&[0.7, 0.3]);
        let u = d(&[0.5, 0.5]);
        let g = uniform_no_gain(&r).unwrap();
        assert!(g < 0.0);
        assert!((g + kl(&r, &u).unwrap() + kl(&u, &r).unwrap()).abs() < 1e-12);
    }
}
