//! Parameter-grid experiments over the instance families. A config names a
//! family, a grid and the analyses to run; the runner returns one row per
//! grid point and a manifest of seeds and thresholds.

use serde::{Deserialize, Serialize};

use crate::constructions::{
    analytic_unanimity_instance, cyclic_welfare_instance, peaked_incompatible_family, FamilyKind,
    InstanceFamily,
};
use crate::dist::{Event, Weights, NORM_TOL, VALUE_TOL};
use crate::error::{Error, Result};
use crate::factorize::DISTINCT_TV;
use crate::persona::{centered_profiles, compensation_bound, optimal_suppression, FirstOrder};
use crate::pooling::{log_pool, Decomposition, PoolKind, DECOMP_TOL};
use crate::stability::certify_openness;
use crate::welfare::{covariance_condition, unanimity_report, weighted_gap_sum};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Gaps,
    Openness,
    Suppression,
    Compensation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n: Vec<usize>,
    pub epsilon: Vec<f64>,
    /// Welfare scale of the cyclic family.
    #[serde(rename = "C", default, skip_serializing_if = "Vec::is_empty")]
    pub c: Vec<f64>,
    /// Suppression budgets.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub budgets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub family: FamilyKind,
    pub grid: Grid,
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub seed: u64,
    /// Rays per openness certificate.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Agent weights; uniform when absent. Every `n` on the grid must match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
    /// Event to suppress; outcome 0 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<Vec<usize>>,
}

fn default_samples() -> usize {
    16
}

const DEFAULT_C: f64 = 1.0;

impl ExperimentConfig {
    pub fn parse(input: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(input)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parse(msg));
        if self.schema != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            ));
        }
        if self.grid.n.is_empty() || self.grid.epsilon.is_empty() {
            return bad("grid needs at least one n and one epsilon".into());
        }
        if self.analyses.is_empty() {
            return bad("no analyses requested".into());
        }
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        if self.analyses.contains(&Analysis::Suppression) && self.grid.budgets.is_empty() {
            return bad("suppression needs a nonempty budget grid".into());
        }
        if let Some(b) = self
            .grid
            .budgets
            .iter()
            .find(|b| !(b.is_finite() && **b > 0.0))
        {
            return bad(format!("budget must be positive, got {b}"));
        }
        for &n in &self.grid.n {
            for &epsilon in &self.grid.epsilon {
                for c in self.c_values() {
                    let fam = InstanceFamily {
                        kind: self.family,
                        n,
                        epsilon,
                        c,
                        weights: self.weights.clone(),
                    };
                    fam.validate().map_err(|e| {
                        Error::Parse(format!("grid point n={n}, epsilon={epsilon}: {e}"))
                    })?;
                }
            }
            if self.family == FamilyKind::CyclicWelfare && self.weights.is_some() {
                return bad("the cyclic family uses uniform weights".into());
            }
            let m = outcomes(self.family, n);
            if let Some(ev) = &self.event {
                Event::new(m, ev).map_err(|e| Error::Parse(format!("event for n={n}: {e}")))?;
            }
        }
        Ok(())
    }

    fn c_values(&self) -> Vec<Option<f64>> {
        if self.family == FamilyKind::CyclicWelfare {
            if self.grid.c.is_empty() {
                vec![Some(DEFAULT_C)]
            } else {
                self.grid.c.iter().map(|&c| Some(c)).collect()
            }
        } else {
            vec![None]
        }
    }
}

fn outcomes(kind: FamilyKind, n: usize) -> usize {
    match kind {
        FamilyKind::AnalyticUnanimity => n + 1,
        FamilyKind::CyclicWelfare | FamilyKind::PeakedIncompatible => n,
    }
}

/// One grid point. Cells of analyses that were not requested are empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub family: FamilyKind,
    pub n: usize,
    pub epsilon: f64,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub budget: Option<f64>,
    pub min_gap: Option<f64>,
    pub weighted_gap_sum: Option<f64>,
    pub strictly_unanimous: Option<bool>,
    pub min_welfare_change: Option<f64>,
    pub openness_seed: Option<u64>,
    pub openness_radius: Option<f64>,
    pub openness_boundary_gap: Option<f64>,
    pub suppression_achieved: Option<f64>,
    pub suppression_per_budget: Option<f64>,
    pub compensation_lhs: Option<f64>,
    pub compensation_rhs: Option<f64>,
    pub compensation_slack: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds {
    pub value_tol: f64,
    pub norm_tol: f64,
    pub decomposition_tol: f64,
    pub distinct_tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub schema: u32,
    pub version: String,
    /// Filled in by the caller from the raw config bytes.
    pub config_hash: String,
    pub family: FamilyKind,
    pub seed: u64,
    pub samples: usize,
    pub analyses: Vec<Analysis>,
    pub rows: usize,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub manifest: Manifest,
}

fn resolve_weights(cfg: &ExperimentConfig, n: usize) -> Result<Weights> {
    match &cfg.weights {
        Some(w) => Ok(w.clone()),
        None => Weights::uniform(n),
    }
}

fn instance(cfg: &ExperimentConfig, n: usize, eps: f64, c: Option<f64>) -> Result<Decomposition> {
    let w = resolve_weights(cfg, n)?;
    match cfg.family {
        FamilyKind::AnalyticUnanimity => analytic_unanimity_instance(n, eps, Some(&w)),
        FamilyKind::PeakedIncompatible => {
            Decomposition::from_children(peaked_incompatible_family(n, eps)?, w, PoolKind::Log)
        }
        FamilyKind::CyclicWelfare => {
            let inst = cyclic_welfare_instance(n, eps, c.unwrap_or(DEFAULT_C))?;
            Decomposition::from_children(inst.agents, inst.weights, PoolKind::Log)
        }
    }
}

fn empty_row(
    cfg: &ExperimentConfig,
    n: usize,
    epsilon: f64,
    c: Option<f64>,
    budget: Option<f64>,
) -> Row {
    Row {
        family: cfg.family,
        n,
        epsilon,
        c,
        budget,
        min_gap: None,
        weighted_gap_sum: None,
        strictly_unanimous: None,
        min_welfare_change: None,
        openness_seed: None,
        openness_radius: None,
        openness_boundary_gap: None,
        suppression_achieved: None,
        suppression_per_budget: None,
        compensation_lhs: None,
        compensation_rhs: None,
        compensation_slack: None,
        note: String::new(),
    }
}

/// Weight change `δ` on child 0 taken evenly from the others, with
/// `δ = min β / 10`, and a budget equal to the realized `‖ΔL‖_P`.
fn compensation_row(decomp: &Decomposition, row: &mut Row) -> Result<()> {
    let beta = decomp.weights().as_slice();
    let n = beta.len();
    let delta = beta.iter().copied().fold(f64::INFINITY, f64::min) / 10.0;
    if delta <= 0.0 {
        row.note.push_str("compensation skipped: zero weight; ");
        return Ok(());
    }
    let mut dbeta = vec![-delta / (n - 1) as f64; n];
    dbeta[0] = delta;
    let fix: f64 = dbeta.iter().sum();
    dbeta[n - 1] -= fix;
    let dl = FirstOrder::new(decomp, &dbeta)?.actual_delta_l(1.0)?;
    let eps = crate::dist::norm_p(decomp.parent(), &dl)?;
    let r = compensation_bound(decomp, 0, delta, eps, &dbeta)?;
    row.compensation_lhs = Some(r.lhs);
    row.compensation_rhs = Some(r.rhs);
    row.compensation_slack = Some(r.slack);
    Ok(())
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let wants = |a: Analysis| cfg.analyses.contains(&a);
    let budgets: Vec<Option<f64>> = if wants(Analysis::Suppression) {
        cfg.grid.budgets.iter().map(|&b| Some(b)).collect()
    } else {
        vec![None]
    };
    let mut rows = Vec::new();
    let mut point = 0u64;
    for &n in &cfg.grid.n {
        for &eps in &cfg.grid.epsilon {
            for c in cfg.c_values() {
                let decomp = instance(cfg, n, eps, c)?;
                let report = unanimity_report(&decomp)?;
                let mut base = empty_row(cfg, n, eps, c, None);
                if wants(Analysis::Gaps) {
                    base.min_gap = Some(report.min_gap());
                    base.weighted_gap_sum = Some(weighted_gap_sum(&decomp)?);
                    base.strictly_unanimous = Some(report.strictly_unanimous);
                    if cfg.family == FamilyKind::CyclicWelfare {
                        let inst = cyclic_welfare_instance(n, eps, c.unwrap_or(DEFAULT_C))?;
                        let pool = log_pool(&inst.agents, &inst.weights)?;
                        let mut worst = f64::INFINITY;
                        for (a, w) in inst.agents.iter().zip(&inst.welfare) {
                            worst = worst.min(covariance_condition(a, w, &pool)?.welfare_change);
                        }
                        base.min_welfare_change = Some(worst);
                    }
                }
                if wants(Analysis::Openness) {
                    let seed = cfg.seed.wrapping_add(point);
                    base.openness_seed = Some(seed);
                    match certify_openness(&decomp, cfg.samples, seed) {
                        Ok(cert) => {
                            base.openness_radius = Some(cert.radius);
                            base.openness_boundary_gap = Some(cert.min_gap_at_boundary);
                        }
                        Err(
                            e @ (Error::NotStrictlyUnanimous { .. } | Error::OpennessNotCertified),
                        ) => {
                            base.note.push_str(&format!("openness: {e}; "));
                        }
                        Err(e) => return Err(e),
                    }
                }
                if wants(Analysis::Compensation) {
                    compensation_row(&decomp, &mut base)?;
                }
                let event =
                    Event::new(decomp.parent().len(), cfg.event.as_deref().unwrap_or(&[0]))?;
                for &b in &budgets {
                    let mut row = base.clone();
                    row.budget = b;
                    if let Some(b) = b {
                        match optimal_suppression(&centered_profiles(&decomp)?, &event, b) {
                            Ok(plan) => {
                                row.suppression_achieved = Some(plan.achieved);
                                row.suppression_per_budget = Some(plan.achieved / b);
                            }
                            Err(Error::DegenerateSpan) => {
                                row.note.push_str("suppression: degenerate span; ")
                            }
                            Err(e) => return Err(e),
                        }
                    }
                    row.note = row.note.trim_end_matches([' ', ';']).to_string();
                    rows.push(row);
                }
                point += 1;
            }
        }
    }
    let manifest = Manifest {
        schema: SCHEMA_VERSION,
        version: crate::VERSION.to_string(),
        config_hash: String::new(),
        family: cfg.family,
        seed: cfg.seed,
        samples: cfg.samples,
        analyses: cfg.analyses.clone(),
        rows: rows.len(),
        thresholds: Thresholds {
            value_tol: VALUE_TOL,
            norm_tol: NORM_TOL,
            decomposition_tol: DECOMP_TOL,
            distinct_tv: DISTINCT_TV,
        },
    };
    Ok(Outcome { rows, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: &str) -> ExperimentConfig {
        ExperimentConfig::parse(s).unwrap()
    }

    #[test]
    fn analytic_grid_rows() {
        let c = cfg(
            r#"{"schema":1,"family":"analytic_unanimity","grid":{"n":[2,3],"epsilon":[0.01,0.001]},
            "analyses":["gaps","openness"],"samples":4}"#,
        );
        let out = run(&c).unwrap();
        assert_eq!(out.rows.len(), 4);
        assert_eq!(out.manifest.rows, 4);
        let r = &out.rows[0];
        assert!(r.min_gap.is_some() && r.suppression_achieved.is_none());
        assert_eq!(r.strictly_unanimous, Some(true));
        assert!(r.openness_radius.unwrap() > 0.0);
    }

    #[test]
    fn peaked_sweep_goes_negative() {
        let c = cfg(
            r#"{"schema":1,"family":"peaked_incompatible","grid":{"n":[3],"epsilon":[0.1,0.01,0.001]},
            "analyses":["gaps"],"weights":[0.5,0.3,0.2]}"#,
        );
        let s: Vec<f64> = run(&c)
            .unwrap()
            .rows
            .iter()
            .map(|r| r.weighted_gap_sum.unwrap())
            .collect();
        assert!(s.windows(2).all(|w| w[1] < w[0]) && s[2] < 0.0);
    }

    #[test]
    fn suppression_is_linear_in_budget() {
        let c = cfg(
            r#"{"schema":1,"family":"analytic_unanimity","grid":{"n":[3],"epsilon":[0.01],
            "budgets":[0.001,0.01,0.1]},"analyses":["suppression","compensation"],"event":[1,2]}"#,
        );
        let rows = run(&c).unwrap().rows;
        assert_eq!(rows.len(), 3);
        let k = rows[0].suppression_per_budget.unwrap();
        for r in &rows {
            assert!((r.suppression_per_budget.unwrap() - k).abs() < 1e-12 * k);
            assert!(r.compensation_slack.unwrap() >= -1e-9);
        }
    }

    #[test]
    fn cyclic_rows_report_welfare_margin() {
        let c = cfg(
            r#"{"schema":1,"family":"cyclic_welfare","grid":{"n":[3],"epsilon":[0.1],"C":[10]},
            "analyses":["gaps"]}"#,
        );
        let r = &run(&c).unwrap().rows[0];
        assert!((r.min_welfare_change.unwrap() - 10.0 * (1.0 / 3.0 - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_are_parse_errors() {
        for s in [
            r#"{"schema":2,"family":"analytic_unanimity","grid":{"n":[2],"epsilon":[0.1]},"analyses":["gaps"]}"#,
            r#"{"schema":1,"family":"analytic_unanimity","grid":{"n":[2],"epsilon":[0.3]},"analyses":["gaps"]}"#,
            r#"{"schema":1,"family":"analytic_unanimity","grid":{"n":[2],"epsilon":[0.1]},"analyses":[]}"#,
            r#"{"schema":1,"family":"analytic_unanimity","grid":{"n":[2],"epsilon":[0.1]},"analyses":["suppression"]}"#,
            r#"{"schema":1,"family":"nope","grid":{"n":[2],"epsilon":[0.1]},"analyses":["gaps"]}"#,
            r#"{"schema":1,"family":"peaked_incompatible","grid":{"n":[2],"epsilon":[0.1]},"analyses":["gaps"],"event":[5]}"#,
        ] {
            assert!(
                matches!(ExperimentConfig::parse(s), Err(Error::Parse(_))),
                "{s}"
            );
        }
    }
}
