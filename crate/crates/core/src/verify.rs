//! Seeded verification suites. Each check draws its own RNG stream from the
//! suite seed, so reports are reproducible byte for byte.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constructions::{
    analytic_unanimity_instance, binary_gap_closed_form, cyclic_welfare_instance, epsilon_grid,
    find_epsilon_for_unanimity, peaked_incompatible_family,
};
use crate::dist::{inner_p, kl, norm_p, tv, Dist, OutcomeSpace, ScoreFn, Weights};
use crate::error::{Error, Result};
use crate::factorize::{
    factor_pairwise_distinct, factor_with_fixed, parent_benefit_sweep, split_children,
    split_invariance_check, DISTINCT_TV,
};
use crate::persona::{
    centered_indicator, centered_profiles, compensation_bound, event_first_order, kl_budget,
    optimal_suppression, projection_gain, FirstOrder, LogProfile,
};
use crate::pooling::{
    linear_pool, log_pool, reconstruct_from_tilt, tilt_representation, Decomposition, PoolKind,
};
use crate::sampling::{
    engineered_compensation_instance, random_centered_tilts, random_dist, random_event,
    random_log_decomposition, random_scorefn, random_weights, rng_for,
};
use crate::stability::{
    certify_openness, local_unanimity_audit, tilt_gap_derivative, transport_decomposition,
    uniform_no_gain,
};
use crate::welfare::{
    covariance_condition, gap_terms, unanimity_report, weighted_gap_sum, welfare_gap,
};

pub const SUITES: [&str; 6] = [
    "pools",
    "welfare",
    "constructions",
    "factorize",
    "stability",
    "persona",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub seed: u64,
    /// Overrides the instance count of every randomized check.
    pub samples: Option<usize>,
    /// Multiplies every check tolerance.
    pub tolerance_scale: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            seed: 42,
            samples: None,
            tolerance_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed statistic; `null` when the check errored.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub version: String,
    pub suite: String,
    pub seed: u64,
    pub samples: Option<usize>,
    pub tolerance_scale: f64,
    pub total: usize,
    pub failed: usize,
    pub all_passed: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Ctx<'a> {
    opts: &'a Options,
    checks: Vec<Check>,
}

impl Ctx<'_> {
    fn count(&self, default: usize) -> usize {
        self.opts.samples.unwrap_or(default)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        rng_for(self.opts.seed, stream)
    }

    /// Runs `f` with the scaled tolerance; `f` returns (passed, value, detail).
    fn run(
        &mut self,
        name: &str,
        tol: f64,
        f: impl FnOnce(&Self, f64) -> Result<(bool, f64, String)>,
    ) {
        let tolerance = tol * self.opts.tolerance_scale;
        let check = match f(self, tolerance) {
            Ok((passed, value, detail)) => Check {
                name: name.to_string(),
                passed,
                value,
                tolerance,
                detail,
            },
            Err(e) => Check {
                name: name.to_string(),
                passed: false,
                value: f64::NAN,
                tolerance,
                detail: format!("error: {e}"),
            },
        };
        self.checks.push(check);
    }
}

/// Runs one suite, or every suite for `"all"`.
pub fn run(suite: &str, opts: &Options) -> Result<Report> {
    let selected: Vec<&str> = match suite {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        s => return Err(Error::UnknownSuite(s.to_string())),
    };
    let mut ctx = Ctx {
        opts,
        checks: Vec::new(),
    };
    for s in selected {
        match s {
            "pools" => pools(&mut ctx),
            "welfare" => welfare(&mut ctx),
            "constructions" => constructions(&mut ctx),
            "factorize" => factorize(&mut ctx),
            "stability" => stability(&mut ctx),
            "persona" => persona(&mut ctx),
            _ => unreachable!(),
        }
    }
    let mut checks = ctx.checks;
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    let failed = checks.iter().filter(|c| !c.passed).count();
    Ok(Report {
        version: crate::VERSION.to_string(),
        suite: suite.to_string(),
        seed: opts.seed,
        samples: opts.samples,
        tolerance_scale: opts.tolerance_scale,
        total: checks.len(),
        failed,
        all_passed: failed == 0,
        checks,
    })
}

fn small_instance<R: Rng>(rng: &mut R) -> Result<(Vec<Dist>, Weights)> {
    let m = rng.gen_range(2..=10);
    let n = rng.gen_range(2..=5);
    let agents = (0..n)
        .map(|_| random_dist(rng, m, 3.0))
        .collect::<Result<Vec<_>>>()?;
    Ok((agents, random_weights(rng, n, 0.0)?))
}

fn decomposition<R: Rng>(rng: &mut R, m_min: usize) -> Result<Decomposition> {
    let m = rng.gen_range(m_min..=10);
    let n = rng.gen_range(2..=5);
    random_log_decomposition(rng, m, n, 1.5)
}

/// Zero-sum weight change no larger than half of the smallest weight.
fn zero_sum_dbeta<R: Rng>(rng: &mut R, weights: &Weights) -> Vec<f64> {
    let n = weights.len();
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = raw.iter().map(|x| x - mean).collect();
    let peak = centered.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let floor = weights
        .as_slice()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    centered.iter().map(|x| 0.5 * floor * x / peak).collect()
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn pools(ctx: &mut Ctx) {
    ctx.run("pools.log_matches_product_formula", 1e-12, |c, tol| {
        let mut rng = c.rng(1);
        let mut worst = 0.0f64;
        for _ in 0..c.count(1000) {
            let (agents, w) = small_instance(&mut rng)?;
            let m = agents[0].len();
            let raw: Vec<f64> = (0..m)
                .map(|o| {
                    agents
                        .iter()
                        .zip(w.as_slice())
                        .map(|(a, b)| a.p()[o].powf(*b))
                        .product()
                })
                .collect();
            worst = worst.max(tv(&log_pool(&agents, &w)?, &Dist::from_slice(&raw)?)?);
        }
        Ok((
            worst <= tol,
            worst,
            "max tv to the normalized weighted geometric mean".into(),
        ))
    });
    ctx.run("pools.linear_matches_mixture", 1e-12, |c, tol| {
        let mut rng = c.rng(2);
        let mut worst = 0.0f64;
        for _ in 0..c.count(1000) {
            let (agents, w) = small_instance(&mut rng)?;
            let m = agents[0].len();
            let mix: Vec<f64> = (0..m)
                .map(|o| {
                    agents
                        .iter()
                        .zip(w.as_slice())
                        .map(|(a, b)| b * a.p()[o])
                        .sum()
                })
                .collect();
            worst = worst.max(tv(&linear_pool(&agents, &w)?, &Dist::from_slice(&mix)?)?);
        }
        Ok((worst <= tol, worst, "max tv to the weighted mixture".into()))
    });
    ctx.run("pools.tilt_round_trip", 1e-10, |c, tol| {
        let mut rng = c.rng(3);
        let mut worst = 0.0f64;
        for _ in 0..c.count(500) {
            let d = decomposition(&mut rng, 2)?;
            let h = tilt_representation(d.parent(), d.children(), d.weights())?;
            for (child, hi) in d.children().iter().zip(&h) {
                worst = worst.max(tv(&reconstruct_from_tilt(d.parent(), hi)?, child)?);
            }
        }
        Ok((
            worst <= tol,
            worst,
            "max tv between child and its tilt reconstruction".into(),
        ))
    });
}

fn welfare(ctx: &mut Ctx) {
    ctx.run("welfare.gap_identity", 1e-9, |c, tol| {
        let mut rng = c.rng(10);
        let mut worst = 0.0f64;
        for _ in 0..c.count(1000) {
            let m = rng.gen_range(2..=10);
            let r = random_dist(&mut rng, m, 3.0)?;
            let p = random_dist(&mut rng, m, 3.0)?;
            let direct: f64 = p.p().iter().zip(r.ln_p()).map(|(a, b)| a * b).sum::<f64>()
                - r.p().iter().zip(r.ln_p()).map(|(a, b)| a * b).sum::<f64>();
            let t = gap_terms(&r, &p)?;
            let identity = t.entropy_agent - t.entropy_pool - t.kl_pool_agent;
            worst = worst.max((direct - identity).abs());
        }
        Ok((
            worst <= tol,
            worst,
            "max |direct gap − (H(R) − H(P) − KL(P‖R))|".into(),
        ))
    });
    ctx.run("welfare.binary_census", 1e-10, |_, tol| {
        let grid: Vec<f64> = (1..=50).map(|k| k as f64 / 51.0).collect();
        let space = OutcomeSpace::new(2)?;
        let mut both_positive = 0usize;
        let mut points = 0usize;
        let mut worst = 0.0f64;
        for &x1 in &grid {
            for &x2 in &grid {
                if x1 == x2 {
                    continue;
                }
                let a = Dist::new(space.clone(), &[x1, 1.0 - x1])?;
                let b = Dist::new(space.clone(), &[x2, 1.0 - x2])?;
                for j in 1..=9 {
                    let b1 = j as f64 / 10.0;
                    let w = Weights::new(vec![b1, 1.0 - b1])?;
                    let pool = log_pool(&[a.clone(), b.clone()], &w)?;
                    let x = pool.p()[0];
                    let g1 = welfare_gap(&a, &pool)?;
                    let g2 = welfare_gap(&b, &pool)?;
                    worst = worst
                        .max((g1 - binary_gap_closed_form(x1, x)?).abs())
                        .max((g2 - binary_gap_closed_form(x2, x)?).abs());
                    if g1 > 1e-9 && g2 > 1e-9 {
                        both_positive += 1;
                    }
                    points += 1;
                }
            }
        }
        Ok((
            both_positive == 0 && worst <= tol,
            worst,
            format!("{points} grid points, {both_positive} with both gaps > 1e-9; value is max closed-form error"),
        ))
    });
    ctx.run("welfare.linear_pool_impossibility", -1e-12, |c, tol| {
        let mut rng = c.rng(11);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..c.count(500) {
            let (agents, w) = small_instance(&mut rng)?;
            let d = Decomposition::from_children(agents, w, PoolKind::Linear)?;
            worst = worst.max(weighted_gap_sum(&d)?);
        }
        Ok((
            worst < tol,
            worst,
            "max weighted gap sum under linear pooling".into(),
        ))
    });
    ctx.run("welfare.uniform_no_gain", 1e-10, |c, tol| {
        let mut rng = c.rng(12);
        let mut worst = 0.0f64;
        let mut max_gap = f64::NEG_INFINITY;
        for _ in 0..c.count(500) {
            let m = rng.gen_range(2..=10);
            let r = random_dist(&mut rng, m, 3.0)?;
            let u = Dist::uniform(r.space().clone());
            let g = uniform_no_gain(&r)?;
            max_gap = max_gap.max(g);
            worst = worst.max((g + kl(&r, &u)? + kl(&u, &r)?).abs());
        }
        Ok((
            max_gap <= 0.0 && worst <= tol,
            worst,
            format!("max gap {max_gap:.3e}; value is max |gap + KL(R‖U) + KL(U‖R)|"),
        ))
    });
    ctx.run("welfare.cyclic_instance", 1e-12, |_, tol| {
        let mut worst = 0.0f64;
        let c_val = 10.0;
        let mut compositional = true;
        for n in 2..=8 {
            let eps = 0.5 / n as f64;
            let inst = cyclic_welfare_instance(n, eps, c_val)?;
            let pool = log_pool(&inst.agents, &inst.weights)?;
            worst = worst.max(pool.uniformity_defect());
            let margin = c_val * (1.0 / n as f64 - eps);
            for (a, w) in inst.agents.iter().zip(&inst.welfare) {
                let cc = covariance_condition(a, w, &pool)?;
                compositional &= cc.is_compositional && cc.welfare_change > 0.0;
                worst = worst.max((cc.welfare_change - margin).abs() / margin);
            }
        }
        Ok((
            compositional && worst <= tol,
            worst,
            "pool uniformity defect and relative welfare-margin error, n = 2..8".into(),
        ))
    });
}

fn skewed_weights(n: usize) -> Result<[Weights; 3]> {
    let ramp: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let geo: Vec<f64> = (0..n).map(|i| 0.6f64.powi(i as i32)).collect();
    Ok([
        Weights::uniform(n)?,
        Weights::normalized(&ramp)?,
        Weights::normalized(&geo)?,
    ])
}

/// Strictly unanimous analytic instances for `n ∈ {2, 3, 5}` under uniform,
/// ramp and geometric weights.
pub fn unanimity_instances() -> Result<Vec<(usize, usize, f64, Decomposition)>> {
    let mut out = Vec::new();
    for n in [2, 3, 5] {
        for (k, w) in skewed_weights(n)?.iter().enumerate() {
            let eps = find_epsilon_for_unanimity(n, Some(w))?;
            out.push((n, k, eps, analytic_unanimity_instance(n, eps, Some(w))?));
        }
    }
    Ok(out)
}

/// Grid for the peaked family, largest first.
pub fn peaked_epsilon_grid() -> Vec<f64> {
    (1..=40)
        .map(|k| 0.5 * 10f64.powf(-(k as f64) / 4.0))
        .collect()
}

/// Largest grid `ε` from which every sampled weight vector has a negative
/// weighted gap sum at that and every smaller grid value.
pub fn peaked_threshold(n: usize, weights: &[Weights]) -> Result<Option<f64>> {
    let grid = peaked_epsilon_grid();
    let mut all_neg = Vec::with_capacity(grid.len());
    for &eps in &grid {
        let agents = peaked_incompatible_family(n, eps)?;
        let mut ok = true;
        for w in weights {
            let d = Decomposition::from_children(agents.clone(), w.clone(), PoolKind::Log)?;
            ok &= weighted_gap_sum(&d)? < 0.0;
        }
        all_neg.push(ok);
    }
    let mut threshold = None;
    for (eps, ok) in grid.iter().zip(&all_neg).rev() {
        if !ok {
            break;
        }
        threshold = Some(*eps);
    }
    Ok(threshold)
}

fn constructions(ctx: &mut Ctx) {
    ctx.run("constructions.analytic_existence", 1e-9, |_, tol| {
        let mut min_gap = f64::INFINITY;
        let mut found = Vec::new();
        for (n, k, eps, d) in unanimity_instances()? {
            min_gap = min_gap.min(unanimity_report(&d)?.min_gap());
            found.push(format!("n={n} w{k} eps={eps:.3e}"));
        }
        Ok((min_gap > tol, min_gap, found.join("; ")))
    });
    ctx.run("constructions.epsilon_grid_ordering", 0.0, |_, _| {
        let g = epsilon_grid();
        let ok = g.windows(2).all(|w| w[0] > w[1]) && g.iter().all(|&e| e > 0.0 && e < 0.25);
        Ok((ok, g.len() as f64, "grid length".into()))
    });
    ctx.run("constructions.no_universal_weights", 0.0, |c, _| {
        let mut rng = c.rng(20);
        let mut detail = Vec::new();
        let mut ok = true;
        let mut smallest = f64::INFINITY;
        for n in [2, 4] {
            let weights = (0..c.count(200))
                .map(|_| random_weights(&mut rng, n, 0.01 / n as f64))
                .collect::<Result<Vec<_>>>()?;
            match peaked_threshold(n, &weights)? {
                Some(t) => {
                    smallest = smallest.min(t);
                    detail.push(format!("n={n} threshold {t:.3e}"));
                }
                None => {
                    ok = false;
                    detail.push(format!("n={n} no threshold"));
                }
            }
        }
        Ok((ok, smallest, detail.join("; ")))
    });
}

fn factorize(ctx: &mut Ctx) {
    ctx.run("factorize.pairwise_distinct", 1e-12, |c, tol| {
        let mut rng = c.rng(30);
        let mut worst = 0.0f64;
        let mut min_distinct = f64::INFINITY;
        for i in 0..c.count(100) {
            let m = rng.gen_range(3..=10);
            let n = rng.gen_range(2..=5);
            let parent = random_dist(&mut rng, m, 2.0)?;
            let w = random_weights(&mut rng, n, 0.05 / n as f64)?;
            let f = factor_pairwise_distinct(&parent, &w, c.opts.seed.wrapping_add(i as u64))?;
            worst = worst.max(tv(&f.decomposition.repool()?, &parent)?);
            min_distinct = min_distinct.min(
                f.provenance
                    .min_pairwise_tv
                    .min(f.provenance.min_tv_to_parent),
            );
        }
        Ok((
            worst <= tol && min_distinct > DISTINCT_TV,
            worst,
            format!("min distinctness tv {min_distinct:.3e}"),
        ))
    });
    ctx.run("factorize.with_fixed", 1e-12, |c, tol| {
        let mut rng = c.rng(31);
        let mut worst = 0.0f64;
        for i in 0..c.count(100) {
            let m = rng.gen_range(3..=10);
            let n = rng.gen_range(3..=5);
            let parent = random_dist(&mut rng, m, 2.0)?;
            let fixed = vec![random_dist(&mut rng, m, 2.0)?];
            let w = random_weights(&mut rng, n, 0.05 / n as f64)?;
            let f = factor_with_fixed(&parent, &fixed, &w, c.opts.seed.wrapping_add(i as u64))?;
            if f.decomposition.children()[0] != fixed[0] {
                return Ok((false, f64::NAN, "fixed child was modified".into()));
            }
            worst = worst.max(tv(&f.decomposition.repool()?, &parent)?);
        }
        Ok((
            worst <= tol,
            worst,
            "max tv of repooled children to parent".into(),
        ))
    });
    ctx.run("factorize.split_invariance", 1e-10, |c, tol| {
        let mut rng = c.rng(32);
        let mut worst = 0.0f64;
        for _ in 0..c.count(500) {
            let d = decomposition(&mut rng, 2)?;
            let idx = rng.gen_range(0..d.len());
            let alpha = rng.gen_range(0.05..0.95);
            let g = random_scorefn(&mut rng, d.parent().len(), 2.0)?;
            worst = worst.max(split_invariance_check(&d, idx, alpha, &g)?.tv_delta);
        }
        Ok((
            worst <= tol,
            worst,
            "max tv between pools before and after a split".into(),
        ))
    });
    ctx.run("factorize.clone_split_gaps", 1e-10, |c, tol| {
        let mut rng = c.rng(33);
        let mut worst = 0.0f64;
        for _ in 0..c.count(500) {
            let d = decomposition(&mut rng, 2)?;
            let idx = rng.gen_range(0..d.len());
            let alpha = rng.gen_range(0.05..0.95);
            let g = ScoreFn::zeros(d.parent().len());
            let (children, w) = split_children(&d, idx, alpha, &g)?;
            let pool = log_pool(&children, &w)?;
            let before = unanimity_report(&d)?.gaps;
            for (j, child) in children.iter().enumerate() {
                let orig = if j <= idx { j } else { j - 1 };
                worst = worst.max((welfare_gap(child, &pool)? - before[orig]).abs());
            }
        }
        Ok((
            worst <= tol,
            worst,
            "max gap change under clone splits".into(),
        ))
    });
    ctx.run("factorize.parent_benefit_not_inherited", 0.0, |_, _| {
        let p1 = Dist::from_slice(&[0.5, 0.3, 0.2])?;
        let sweep = parent_benefit_sweep(&p1, 2.0, 0.5, 2)?;
        let last = sweep
            .rows
            .last()
            .ok_or_else(|| Error::NotFound("empty sweep".into()))?;
        let ok = sweep.first_negative_lambda.is_some()
            && last.parent_gap > 0.0
            && last.subagent_gap < 0.0;
        Ok((
            ok,
            last.subagent_gap,
            format!(
                "lambda {:?}, parent gap {:.6e}, subagent gap {:.6e}",
                sweep.first_negative_lambda, last.parent_gap, last.subagent_gap
            ),
        ))
    });
}

fn stability(ctx: &mut Ctx) {
    ctx.run("stability.transport_exact", 1e-10, |c, tol| {
        let mut rng = c.rng(40);
        let mut worst = 0.0f64;
        let mut identity = true;
        for _ in 0..c.count(500) {
            let d = decomposition(&mut rng, 2)?;
            let target = random_dist(&mut rng, d.parent().len(), 2.0)?;
            let moved = transport_decomposition(&d, &target)?;
            worst = worst.max(tv(&moved.repool()?, &target)?);
            let same = transport_decomposition(&d, d.parent())?;
            identity &= same.children() == d.children();
        }
        Ok((
            identity && worst <= tol,
            worst,
            format!("identity at base: {identity}"),
        ))
    });
    ctx.run("stability.openness", 0.0, |c, _| {
        let samples = c.opts.samples.unwrap_or(32).max(1);
        let mut min_radius = f64::INFINITY;
        for (i, (.., d)) in unanimity_instances()?.into_iter().enumerate() {
            let cert = certify_openness(&d, samples, c.opts.seed.wrapping_add(i as u64))?;
            min_radius = min_radius.min(cert.radius);
        }
        Ok((
            min_radius > 0.0,
            min_radius,
            format!("{samples} rays per instance"),
        ))
    });
    ctx.run("stability.local_impossibility", 1e-8, |c, tol| {
        let mut rng = c.rng(41);
        let mut worst = 0.0f64;
        let mut worst_fd = 0.0f64;
        let step = 1e-5;
        for _ in 0..c.count(500) {
            let m = rng.gen_range(2..=10);
            let n = rng.gen_range(2..=5);
            let p = random_dist(&mut rng, m, 2.0)?;
            let w = random_weights(&mut rng, n, 0.05 / n as f64)?;
            let tilts = random_centered_tilts(&mut rng, m, &w, 1.0)?;
            worst = worst.max(local_unanimity_audit(&p, &tilts, &w)?.weighted_sum.abs());
            let h = &tilts[0];
            let at = |e: f64| -> Result<f64> {
                let logw: Vec<f64> = p
                    .ln_p()
                    .iter()
                    .zip(h.values())
                    .map(|(l, x)| l + e * x)
                    .collect();
                welfare_gap(&Dist::from_log_weights(p.space().clone(), &logw)?, &p)
            };
            let fd = (at(step)? - at(-step)?) / (2.0 * step);
            let an = tilt_gap_derivative(&p, h)?;
            worst_fd = worst_fd.max((fd - an).abs() / an.abs().max(1e-3));
        }
        Ok((
            worst <= tol && worst_fd <= 1e-6,
            worst,
            format!("max relative finite-difference error {worst_fd:.3e} (limit 1e-6)"),
        ))
    });
}

fn persona(ctx: &mut Ctx) {
    ctx.run("persona.linearization_order", 1.9, |c, tol| {
        let mut rng = c.rng(50);
        let ts: Vec<f64> = (0..7).map(|k| 0.5f64.powi(k)).collect();
        let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let mut min_slope = f64::INFINITY;
        for _ in 0..c.count(100) {
            let d = decomposition(&mut rng, 2)?;
            let dbeta = zero_sum_dbeta(&mut rng, d.weights());
            let fo = FirstOrder::new(&d, &dbeta)?;
            let ys = ts
                .iter()
                .map(|&t| fo.residual_norm(t).map(f64::ln))
                .collect::<Result<Vec<_>>>()?;
            min_slope = min_slope.min(ls_slope(&xs, &ys));
        }
        Ok((
            min_slope >= tol,
            min_slope,
            "min log-log slope of the residual norm".into(),
        ))
    });
    ctx.run("persona.compensation_inequality", -1e-9, |c, tol| {
        let mut rng = c.rng(51);
        let mut worst = f64::INFINITY;
        for _ in 0..c.count(200) {
            let d = decomposition(&mut rng, 2)?;
            let dbeta = zero_sum_dbeta(&mut rng, d.weights());
            let h = (0..dbeta.len())
                .max_by(|&a, &b| dbeta[a].total_cmp(&dbeta[b]))
                .expect("nonempty");
            let fo = FirstOrder::new(&d, &dbeta)?;
            let eps = norm_p(d.parent(), &fo.actual_delta_l(1.0)?)?;
            worst = worst.min(compensation_bound(&d, h, dbeta[h], eps, &dbeta)?.slack);
        }
        Ok((worst >= tol, worst, "min slack LHS − RHS".into()))
    });
    ctx.run("persona.waluigi_weight_increase", 0.0, |c, _| {
        let mut rng = c.rng(52);
        let mut min_bound = f64::INFINITY;
        let mut ok = true;
        for _ in 0..c.count(100) {
            let m = rng.gen_range(3..=10);
            let inst = engineered_compensation_instance(&mut rng, m)?;
            let r = compensation_bound(
                &inst.decomp,
                inst.h_index,
                inst.delta,
                inst.epsilon,
                &inst.dbeta,
            )?;
            let (Some(w), Some(bound)) = (r.waluigi, r.explicit_bound) else {
                return Ok((false, f64::NAN, "no unique anti-aligned profile".into()));
            };
            let premise = inst.epsilon + r.residual_norm < inst.delta * r.vh_norm;
            ok &= premise && r.holds && inst.dbeta[w].max(0.0) >= bound - 1e-15;
            min_bound = min_bound.min(bound);
        }
        Ok((
            ok && min_bound > 0.0,
            min_bound,
            "min explicit lower bound on the anti-aligned weight increase".into(),
        ))
    });
    ctx.run("persona.suppression_optimality", 1e-9, |c, tol| {
        let mut rng = c.rng(53);
        let mut worst = f64::NEG_INFINITY;
        let eps = 0.1;
        for _ in 0..c.count(100) {
            let d = decomposition(&mut rng, 3)?;
            let profiles = centered_profiles(&d)?;
            let p = d.parent();
            let event = random_event(&mut rng, p.len())?;
            let g = centered_indicator(p, &event)?;
            let plan = optimal_suppression(&profiles, &event, eps)?;
            for _ in 0..10_000 {
                let mut dir = vec![0.0; p.len()];
                for v in &profiles {
                    let coef: f64 = rng.gen_range(-1.0..=1.0);
                    for (x, y) in dir.iter_mut().zip(v.values()) {
                        *x += coef * y;
                    }
                }
                let nrm = norm_p(p, &dir)?;
                if nrm == 0.0 {
                    continue;
                }
                let decrease = -eps * inner_p(p, &dir, &g)? / nrm;
                worst = worst.max(decrease - plan.achieved);
            }
        }
        Ok((
            worst <= tol,
            worst,
            "max excess of random directions over the optimum".into(),
        ))
    });
    ctx.run("persona.suppression_linear_in_budget", 1e-12, |c, tol| {
        let mut rng = c.rng(54);
        let budgets = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
        let mut worst = 0.0f64;
        for _ in 0..c.count(100) {
            let d = decomposition(&mut rng, 3)?;
            let profiles = centered_profiles(&d)?;
            let event = random_event(&mut rng, d.parent().len())?;
            let base = optimal_suppression(&profiles, &event, 1.0)?.achieved;
            for &b in &budgets {
                let a = optimal_suppression(&profiles, &event, b)?.achieved;
                worst = worst.max((a - b * base).abs() / base.max(f64::MIN_POSITIVE) / b);
            }
        }
        Ok((
            worst <= tol,
            worst,
            "max relative deviation of achieved/ε from a constant".into(),
        ))
    });
    ctx.run("persona.projection_pythagoras", 1e-10, |c, tol| {
        let mut rng = c.rng(55);
        let mut worst = 0.0f64;
        let mut gain_ok = true;
        let mut bound_ok = true;
        for _ in 0..c.count(500) {
            let d = decomposition(&mut rng, 3)?;
            let profiles = centered_profiles(&d)?;
            let p = d.parent().clone();
            let event = random_event(&mut rng, p.len())?;
            let w =
                LogProfile::centered(p.clone(), random_scorefn(&mut rng, p.len(), 1.0)?.values())?;
            let r = projection_gain(&profiles, &w, &event, 0.1)?;
            worst = worst.max(r.pythagoras_defect.abs());
            if r.inner_gu.abs() > 1e-6 {
                gain_ok &= r.gain > 0.0;
            }
            bound_ok &= r.gain <= r.closed_form * (1.0 + 1e-12) + 1e-15;
        }
        Ok((
            worst <= tol && gain_ok && bound_ok,
            worst,
            format!("gain positive off-span: {gain_ok}; value gain within closed form: {bound_ok}"),
        ))
    });
    ctx.run("persona.projection_gain_in_span", 0.0, |c, _| {
        let mut rng = c.rng(56);
        let mut ok = true;
        for _ in 0..c.count(500) {
            let d = decomposition(&mut rng, 3)?;
            let profiles = centered_profiles(&d)?;
            let p = d.parent().clone();
            let event = random_event(&mut rng, p.len())?;
            let mut comb = vec![0.0; p.len()];
            for v in &profiles {
                let coef: f64 = rng.gen_range(-1.0..=1.0);
                for (x, y) in comb.iter_mut().zip(v.values()) {
                    *x += coef * y;
                }
            }
            let w = LogProfile::centered(p, &comb)?;
            let r = projection_gain(&profiles, &w, &event, 0.1)?;
            ok &= r.w_in_span && r.gain == 0.0;
        }
        Ok((
            ok,
            0.0,
            "directions inside the span give exactly zero gain".into(),
        ))
    });
    ctx.run("persona.kl_budget", 0.1, |c, tol| {
        let mut rng = c.rng(57);
        let mut worst = 0.0f64;
        let mut converging = true;
        for _ in 0..c.count(500) {
            let m = rng.gen_range(2..=10);
            let p = random_dist(&mut rng, m, 2.0)?;
            let raw = random_scorefn(&mut rng, m, 1.0)?;
            let nrm = norm_p(&p, &crate::dist::center(&p, raw.values())?)?;
            if nrm < 1e-6 {
                continue;
            }
            let scale = rng.gen_range(1e-4..=0.01) / norm_p(&p, raw.values())?;
            let dl = raw.scaled(scale);
            let ratio = |f: &ScoreFn| -> Result<f64> {
                let b = kl_budget(&p, f)?;
                Ok(b.kl / b.half_var)
            };
            let r1 = ratio(&dl)?;
            let r2 = ratio(&dl.scaled(0.1))?;
            worst = worst.max((r1 - 1.0).abs());
            converging &= (r2 - 1.0).abs() <= (r1 - 1.0).abs() + 1e-6;
        }
        Ok((
            worst <= tol && converging,
            worst,
            format!("max |ratio − 1| at ‖ΔL‖ ≤ 0.01; shrinks under scaling: {converging}"),
        ))
    });
    ctx.run("persona.event_linearization_order", 1.9, |c, tol| {
        let mut rng = c.rng(58);
        let mut min_slope = f64::INFINITY;
        for _ in 0..c.count(100) {
            let m = rng.gen_range(2..=10);
            let p = random_dist(&mut rng, m, 2.0)?;
            let event = random_event(&mut rng, m)?;
            let dl = random_scorefn(&mut rng, m, 1.0)?;
            let err = |t: f64| -> Result<f64> {
                let e = event_first_order(&p, &event, &dl.scaled(t))?;
                Ok((e.exact - e.linear).abs())
            };
            let (e1, e2) = (err(1e-2)?, err(1e-3)?);
            if e1 < 1e-13 {
                continue;
            }
            min_slope = min_slope.min((e1 / e2).log10());
        }
        Ok((
            min_slope >= tol,
            min_slope,
            "min decade slope of |exact − linear| event change".into(),
        ))
    });
}
