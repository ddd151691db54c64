//! Centered log profiles and first-order control of the pool: weight-change
//! linearization, the compensation inequality, event suppression within a
//! span of profiles, and the quadratic KL budget.

use serde::Serialize;

use crate::dist::{inner_p, norm_p, variance_p, Dist, Event, ScoreFn, Weights, NORM_TOL};
use crate::error::{Error, Result};
use crate::linalg::project;
use crate::pooling::{pooled_log_weights, Decomposition};

/// Tolerance on `E_base[v]` for a profile.
pub const PROFILE_TOL: f64 = 1e-10;
/// Inner products with `v_H` above `-ALIGN_DEAD_ZONE` count as aligned.
pub const ALIGN_DEAD_ZONE: f64 = 1e-12;
/// `‖u‖_P` below this marks the elicited direction as already spanned.
pub const SPAN_TOL: f64 = 1e-10;

/// A log-probability direction centered under its base distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogProfile {
    v: ScoreFn,
    #[serde(skip)]
    base: Dist,
}

impl LogProfile {
    pub fn new(base: Dist, v: ScoreFn) -> Result<Self> {
        if v.len() != base.len() {
            return Err(Error::DimensionMismatch {
                expected: base.len(),
                found: v.len(),
            });
        }
        let mean = base.expectation(v.values())?;
        if mean.abs() > PROFILE_TOL {
            return Err(Error::ProfileNotCentered { mean });
        }
        Ok(Self { v, base })
    }

    /// Centers `f` under `base` first.
    pub fn centered(base: Dist, f: &[f64]) -> Result<Self> {
        let mean = base.expectation(f)?;
        let v = ScoreFn::new(f.iter().map(|x| x - mean).collect())?;
        Self::new(base, v)
    }

    pub fn values(&self) -> &[f64] {
        self.v.values()
    }

    pub fn base(&self) -> &Dist {
        &self.base
    }

    pub fn norm(&self) -> f64 {
        norm_p(&self.base, self.v.values()).expect("lengths checked at construction")
    }
}

/// `v_i = ln P_i − E_P[ln P_i]` for every child.
pub fn centered_profiles(decomp: &Decomposition) -> Result<Vec<LogProfile>> {
    decomp.require_log()?;
    decomp
        .children()
        .iter()
        .map(|c| LogProfile::centered(decomp.parent().clone(), c.ln_p()))
        .collect()
}

fn shared_base(profiles: &[LogProfile]) -> Result<&Dist> {
    let base = profiles
        .first()
        .map(|p| p.base())
        .ok_or(Error::DegenerateSpan)?;
    for p in &profiles[1..] {
        base.check_same_space(p.base())?;
        if p.base().p() != base.p() {
            return Err(Error::InvalidDecomposition(
                "profiles have different bases".into(),
            ));
        }
    }
    Ok(base)
}

fn check_dbeta(dbeta: &[f64], n: usize) -> Result<()> {
    if dbeta.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: dbeta.len(),
        });
    }
    if dbeta.iter().any(|x| !x.is_finite()) {
        return Err(Error::DbetaInconsistent("non-finite entry".into()));
    }
    let sum: f64 = dbeta.iter().sum();
    if sum.abs() > NORM_TOL {
        return Err(Error::DbetaNotZeroSum { sum });
    }
    Ok(())
}

/// Linear prediction `Σ Δβ_i v_i` of the log change of the pool, with the
/// exact change available by re-pooling.
#[derive(Debug, Clone)]
pub struct FirstOrder {
    decomp: Decomposition,
    profiles: Vec<LogProfile>,
    dbeta: Vec<f64>,
    predicted: ScoreFn,
}

impl FirstOrder {
    pub fn new(decomp: &Decomposition, dbeta: &[f64]) -> Result<Self> {
        let profiles = centered_profiles(decomp)?;
        check_dbeta(dbeta, decomp.len())?;
        let m = decomp.parent().len();
        let mut predicted = vec![0.0; m];
        for (p, d) in profiles.iter().zip(dbeta) {
            for (x, v) in predicted.iter_mut().zip(p.values()) {
                *x += d * v;
            }
        }
        Ok(Self {
            decomp: decomp.clone(),
            profiles,
            dbeta: dbeta.to_vec(),
            predicted: ScoreFn::new(predicted)?,
        })
    }

    pub fn predicted(&self) -> &ScoreFn {
        &self.predicted
    }

    pub fn profiles(&self) -> &[LogProfile] {
        &self.profiles
    }

    pub fn dbeta(&self) -> &[f64] {
        &self.dbeta
    }

    pub fn predicted_norm(&self) -> f64 {
        norm_p(self.decomp.parent(), self.predicted.values()).expect("same space")
    }

    /// `Σ |Δβ_i| ‖v_i‖_P`.
    pub fn triangle_bound(&self) -> f64 {
        self.profiles
            .iter()
            .zip(&self.dbeta)
            .map(|(p, d)| d.abs() * p.norm())
            .sum()
    }

    /// `ln P'(o) − ln P(o)` with `P'` the pool at `β + tΔβ` and `P` the pool
    /// at `β`, both recomputed from the children.
    pub fn actual_delta_l(&self, t: f64) -> Result<Vec<f64>> {
        let beta = self.decomp.weights().as_slice();
        let moved: Vec<f64> = beta
            .iter()
            .zip(&self.dbeta)
            .map(|(b, d)| b + t * d)
            .collect();
        if let Some(i) = moved.iter().position(|&b| b < 0.0) {
            return Err(Error::DbetaInconsistent(format!(
                "weight {i} becomes negative at scale {t}"
            )));
        }
        let moved = Weights::new(moved)?;
        let before = pooled_log_weights(self.decomp.children(), self.decomp.weights())?;
        let after = pooled_log_weights(self.decomp.children(), &moved)?;
        let lz0 = crate::dist::log_sum_exp(&before);
        let lz1 = crate::dist::log_sum_exp(&after);
        Ok(after
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b) - (lz1 - lz0))
            .collect())
    }

    /// `ΔL(t) − t·Σ Δβ_i v_i`.
    pub fn residual(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self
            .actual_delta_l(t)?
            .iter()
            .zip(self.predicted.values())
            .map(|(a, p)| a - t * p)
            .collect())
    }

    pub fn residual_norm(&self, t: f64) -> Result<f64> {
        norm_p(self.decomp.parent(), &self.residual(t)?)
    }
}

pub fn first_order_delta_l(decomp: &Decomposition, dbeta: &[f64]) -> Result<FirstOrder> {
    FirstOrder::new(decomp, dbeta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    Aligned,
    AntiAligned,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompensationReport {
    pub h_index: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub dbeta: Vec<f64>,
    /// `⟨v_i, v_H⟩_P` for every child.
    pub inner: Vec<f64>,
    pub alignment: Vec<Alignment>,
    pub vh_norm: f64,
    pub delta_l_norm: f64,
    pub residual_norm: f64,
    /// `Σ_{anti} (Δβ_i)^+ |⟨v_i, v_H⟩|`.
    pub lhs: f64,
    /// `δ‖v_H‖² − (ε + ‖r‖)‖v_H‖ − Σ_{aligned} (Δβ_j)^- ⟨v_j, v_H⟩`.
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    /// `Σ_{aligned} (Δβ_j)^- ⟨v_j, v_H⟩`.
    pub aligned_downgrade: f64,
    /// The unique anti-aligned child, if there is exactly one.
    pub waluigi: Option<usize>,
    pub waluigi_increase: Option<f64>,
    /// `(δ‖v_H‖² − (ε + ‖r‖)‖v_H‖) / |⟨v_W, v_H⟩|`; a valid bound when no
    /// aligned child is downgraded against `v_H`.
    pub explicit_bound: Option<f64>,
    /// `rhs / |⟨v_W, v_H⟩|`; always a valid bound with a unique `W`.
    pub general_bound: Option<f64>,
}

/// Both sides of the compensation inequality for the weight change `dbeta`
/// with `dbeta[h_index] = delta`, using the exact residual of the pool.
pub fn compensation_bound(
    decomp: &Decomposition,
    h_index: usize,
    delta: f64,
    epsilon: f64,
    dbeta: &[f64],
) -> Result<CompensationReport> {
    let n = decomp.len();
    if h_index >= n {
        return Err(Error::IndexOutOfRange {
            index: h_index,
            len: n,
        });
    }
    if dbeta.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: dbeta.len(),
        });
    }
    if delta.is_nan() || delta < 0.0 || dbeta[h_index] != delta {
        return Err(Error::DbetaInconsistent(format!(
            "dbeta[{h_index}] = {} but delta = {delta}",
            dbeta[h_index]
        )));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::ParamOutOfRange(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    let fo = FirstOrder::new(decomp, dbeta)?;
    let p = decomp.parent();
    let actual = fo.actual_delta_l(1.0)?;
    let delta_l_norm = norm_p(p, &actual)?;
    if delta_l_norm > epsilon {
        return Err(Error::BudgetViolated {
            norm: delta_l_norm,
            budget: epsilon,
        });
    }
    let residual_norm = fo.residual_norm(1.0)?;
    let vh = fo.profiles()[h_index].values().to_vec();
    let vh_norm = norm_p(p, &vh)?;
    let inner: Vec<f64> = fo
        .profiles()
        .iter()
        .map(|v| inner_p(p, v.values(), &vh))
        .collect::<Result<_>>()?;
    let alignment: Vec<Alignment> = inner
        .iter()
        .map(|&x| {
            if x < -ALIGN_DEAD_ZONE {
                Alignment::AntiAligned
            } else {
                Alignment::Aligned
            }
        })
        .collect();
    let mut lhs = 0.0;
    let mut aligned_downgrade = 0.0;
    for ((&d, &ip), a) in dbeta.iter().zip(&inner).zip(&alignment) {
        match a {
            Alignment::AntiAligned => lhs += d.max(0.0) * ip.abs(),
            Alignment::Aligned => aligned_downgrade += (-d).max(0.0) * ip,
        }
    }
    let core = delta * vh_norm * vh_norm - (epsilon + residual_norm) * vh_norm;
    let rhs = core - aligned_downgrade;
    let slack = lhs - rhs;
    let anti: Vec<usize> = (0..n)
        .filter(|&i| alignment[i] == Alignment::AntiAligned)
        .collect();
    let waluigi = (anti.len() == 1).then(|| anti[0]);
    Ok(CompensationReport {
        h_index,
        delta,
        epsilon,
        dbeta: dbeta.to_vec(),
        alignment,
        vh_norm,
        delta_l_norm,
        residual_norm,
        lhs,
        rhs,
        slack,
        holds: slack >= -1e-9,
        aligned_downgrade,
        waluigi,
        waluigi_increase: waluigi.map(|w| dbeta[w]),
        explicit_bound: waluigi.map(|w| core / inner[w].abs()),
        general_bound: waluigi.map(|w| rhs / inner[w].abs()),
        inner,
    })
}

/// `g_A = 1_A − P(A)`.
pub fn centered_indicator(p: &Dist, event: &Event) -> Result<Vec<f64>> {
    if event.indices().iter().any(|&i| i >= p.len()) || event.indices().len() >= p.len() {
        return Err(Error::EmptyOrFullEvent);
    }
    let pa = p.mass(event);
    Ok((0..p.len())
        .map(|o| if event.contains(o) { 1.0 - pa } else { -pa })
        .collect())
}

fn check_delta_l(p: &Dist, delta_l: &ScoreFn) -> Result<()> {
    if delta_l.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: delta_l.len(),
        });
    }
    Ok(())
}

/// `P'(A) − P(A)` for `P' ∝ P e^{ΔL}` and its linearization
/// `⟨ΔL, g_A⟩_P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventChange {
    pub exact: f64,
    pub linear: f64,
}

pub fn event_first_order(p: &Dist, event: &Event, delta_l: &ScoreFn) -> Result<EventChange> {
    check_delta_l(p, delta_l)?;
    let g = centered_indicator(p, event)?;
    let linear = inner_p(p, delta_l.values(), &g)?;
    // With x = ΔL − E_P[ΔL], N = E_P[1_A (e^x − 1)] and D = E_P[e^x − 1]:
    // P'(A) − P(A) = (N − P(A) D) / (1 + D).
    let mean = p.expectation(delta_l.values())?;
    let em1: Vec<f64> = delta_l
        .values()
        .iter()
        .map(|x| (x - mean).exp_m1())
        .collect();
    let d: f64 = p.p().iter().zip(&em1).map(|(w, e)| w * e).sum();
    let nsum: f64 = event.indices().iter().map(|&o| p.p()[o] * em1[o]).sum();
    let pa = p.mass(event);
    let exact = (nsum - pa * d) / (1.0 + d);
    Ok(EventChange { exact, linear })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuppressionPlan {
    pub delta_l: ScoreFn,
    pub budget: f64,
    /// First-order decrease `ε‖Proj_S g_A‖_P`.
    pub achieved: f64,
    pub projection_norm: f64,
    pub span_dim: usize,
    /// Set when `g_A` is orthogonal to the span; the plan is then zero.
    pub zero_projection: bool,
}

fn profile_vectors(profiles: &[LogProfile]) -> Vec<Vec<f64>> {
    profiles.iter().map(|p| p.values().to_vec()).collect()
}

/// `‖Proj_S g‖_P` relative to `‖g‖_P` below which the projection is zero.
const ZERO_PROJECTION: f64 = 1e-12;

/// Best log change inside `span{v_i}` with `‖ΔL‖_P ≤ ε` for lowering
/// `P(A)` to first order: `ΔL⋆ = −ε Proj_S g_A / ‖Proj_S g_A‖_P`.
pub fn optimal_suppression(
    profiles: &[LogProfile],
    event: &Event,
    epsilon: f64,
) -> Result<SuppressionPlan> {
    let base = shared_base(profiles)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::ParamOutOfRange(format!(
            "budget must be positive, got {epsilon}"
        )));
    }
    let g = centered_indicator(base, event)?;
    let proj = project(base.p(), &profile_vectors(profiles), &g);
    if proj.rank() == 0 {
        return Err(Error::DegenerateSpan);
    }
    let norm = norm_p(base, &proj.vector)?;
    let m = base.len();
    if norm <= ZERO_PROJECTION * norm_p(base, &g)? {
        return Ok(SuppressionPlan {
            delta_l: ScoreFn::zeros(m),
            budget: epsilon,
            achieved: 0.0,
            projection_norm: 0.0,
            span_dim: proj.rank(),
            zero_projection: true,
        });
    }
    let delta_l = ScoreFn::new(proj.vector.iter().map(|x| -epsilon * x / norm).collect())?;
    Ok(SuppressionPlan {
        delta_l,
        budget: epsilon,
        achieved: epsilon * norm,
        projection_norm: norm,
        span_dim: proj.rank(),
        zero_projection: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionGain {
    /// `M(S₁) − M(S₀)` on the value scale.
    pub gain: f64,
    /// `ε|⟨g_A, u⟩_P| / ‖u‖_P`.
    pub closed_form: f64,
    pub u_norm: f64,
    /// `⟨g_A, u⟩_P`.
    pub inner_gu: f64,
    /// `⟨g_A, u⟩_P / (‖g_A‖_P ‖u‖_P)`.
    pub correlation: f64,
    pub baseline_sq: f64,
    pub enlarged_sq: f64,
    /// `‖Proj_{S₁} g‖² − ‖Proj_{S₀} g‖² − ⟨g, u⟩²/‖u‖²`.
    pub pythagoras_defect: f64,
    pub w_in_span: bool,
}

/// Effect on optimal suppression of adding the direction `w` to the
/// baseline span of `profiles`.
pub fn projection_gain(
    profiles: &[LogProfile],
    w: &LogProfile,
    event: &Event,
    epsilon: f64,
) -> Result<ProjectionGain> {
    let base = shared_base(profiles)?;
    if w.base().p() != base.p() {
        return Err(Error::InvalidDecomposition(
            "direction has a different base".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::ParamOutOfRange(format!(
            "budget must be positive, got {epsilon}"
        )));
    }
    let g = centered_indicator(base, event)?;
    let mut vectors = profile_vectors(profiles);
    let p0 = project(base.p(), &vectors, &g);
    let w_proj = project(base.p(), &vectors, w.values());
    let u: Vec<f64> = w
        .values()
        .iter()
        .zip(&w_proj.vector)
        .map(|(a, b)| a - b)
        .collect();
    let u_norm = norm_p(base, &u)?;
    vectors.push(w.values().to_vec());
    let p1 = project(base.p(), &vectors, &g);
    let baseline_sq = inner_p(base, &p0.vector, &p0.vector)?;
    let enlarged_sq = inner_p(base, &p1.vector, &p1.vector)?;
    let g_norm = norm_p(base, &g)?;
    if u_norm < SPAN_TOL {
        return Ok(ProjectionGain {
            gain: 0.0,
            closed_form: 0.0,
            u_norm,
            inner_gu: 0.0,
            correlation: 0.0,
            baseline_sq,
            enlarged_sq,
            pythagoras_defect: enlarged_sq - baseline_sq,
            w_in_span: true,
        });
    }
    let inner_gu = inner_p(base, &g, &u)?;
    Ok(ProjectionGain {
        gain: epsilon * (enlarged_sq.sqrt() - baseline_sq.sqrt()),
        closed_form: epsilon * inner_gu.abs() / u_norm,
        u_norm,
        inner_gu,
        correlation: inner_gu / (g_norm * u_norm),
        baseline_sq,
        enlarged_sq,
        pythagoras_defect: enlarged_sq - baseline_sq - inner_gu * inner_gu / (u_norm * u_norm),
        w_in_span: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlBudget {
    /// `KL(P'‖P)` for `P' ∝ P e^{ΔL}`.
    pub kl: f64,
    /// `½ Var_P(ΔL)`.
    pub half_var: f64,
}

pub fn kl_budget(p: &Dist, delta_l: &ScoreFn) -> Result<KlBudget> {
    check_delta_l(p, delta_l)?;
    let mean = p.expectation(delta_l.values())?;
    let x: Vec<f64> = delta_l.values().iter().map(|v| v - mean).collect();
    let em1: Vec<f64> = x.iter().map(|v| v.exp_m1()).collect();
    // KL(P'‖P) = E_P[x e^x] / E_P[e^x] − ln E_P[e^x], with e^x − 1 kept
    // explicit so small changes do not cancel.
    let d: f64 = p.p().iter().zip(&em1).map(|(w, e)| w * e).sum();
    let xm: f64 = p.p().iter().zip(&x).map(|(w, v)| w * v).sum();
    let xe: f64 = p
        .p()
        .iter()
        .zip(x.iter().zip(&em1))
        .map(|(w, (v, e))| w * v * e)
        .sum();
    let kl = ((xm + xe) / (1.0 + d) - d.ln_1p()).max(0.0);
    let half_var = 0.5 * variance_p(p, delta_l.values())?;
    Ok(KlBudget { kl, half_var })
}
