//! Double-double reference computations for pooling and divergences.

use twofloat::TwoFloat;

use compagency::sampling::{random_dist, random_weights, rng_for};
use compagency::welfare::welfare_gap;
use compagency::{entropy, kl, log_pool, Dist};

fn ln2() -> TwoFloat {
    TwoFloat::new_add(std::f64::consts::LN_2, 2.3190468138462996e-17)
}

// twofloat's own exp is too coarse for a reference.
fn tf_exp(x: TwoFloat) -> TwoFloat {
    let k = (f64::from(x) / std::f64::consts::LN_2).round();
    let r = x - ln2() * k;
    let mut term = TwoFloat::from(1.0);
    let mut sum = TwoFloat::from(1.0);
    for n in 1..=30 {
        term = term * r / n as f64;
        sum += term;
    }
    sum * 2f64.powi(k as i32)
}

/// One Newton step on `exp(y) = x` from the double-precision logarithm.
fn tf_ln_dd(x: TwoFloat) -> TwoFloat {
    let y = TwoFloat::from(f64::from(x).ln());
    y + tf_exp(-y) * x - 1.0
}

fn tf_ln(x: f64) -> TwoFloat {
    tf_ln_dd(TwoFloat::from(x))
}

fn sum(xs: impl Iterator<Item = TwoFloat>) -> TwoFloat {
    xs.fold(TwoFloat::from(0.0), |a, b| a + b)
}

#[test]
fn reference_exp_and_ln_agree() {
    for x in [1e-9, 0.01, 0.3, 0.5, 0.999] {
        let back = tf_exp(tf_ln(x));
        assert!(f64::from((back - x) / x).abs() < 1e-30);
    }
}

#[test]
fn log_pool_matches_reference() {
    let mut rng = rng_for(99, 0);
    let mut worst = 0.0f64;
    for m in 2..=10 {
        for n in 1..=5 {
            let agents: Vec<Dist> = (0..n)
                .map(|_| random_dist(&mut rng, m, 4.0).unwrap())
                .collect();
            let w = random_weights(&mut rng, n, 0.0).unwrap();
            let lw: Vec<TwoFloat> = (0..m)
                .map(|o| {
                    sum(agents
                        .iter()
                        .zip(w.as_slice())
                        .map(|(a, &b)| tf_ln(a.p()[o]) * b))
                })
                .collect();
            let e: Vec<TwoFloat> = lw.iter().map(|&x| tf_exp(x)).collect();
            let z = sum(e.iter().copied());
            let pool = log_pool(&agents, &w).unwrap();
            for (o, x) in e.iter().enumerate() {
                let r = f64::from(*x / z);
                worst = worst.max((pool.p()[o] - r).abs() / r);
            }
        }
    }
    assert!(worst < 1e-13, "max relative error {worst:e}");
}

#[test]
fn divergences_match_reference() {
    let mut rng = rng_for(99, 1);
    for m in 2..=10 {
        let p = random_dist(&mut rng, m, 3.0).unwrap();
        let q = random_dist(&mut rng, m, 3.0).unwrap();
        let h = -f64::from(sum(p.p().iter().map(|&x| tf_ln(x) * x)));
        let d = f64::from(sum(p
            .p()
            .iter()
            .zip(q.p())
            .map(|(&a, &b)| (tf_ln(a) - tf_ln(b)) * a)));
        let g = f64::from(sum(p
            .p()
            .iter()
            .zip(q.p())
            .map(|(&a, &b)| tf_ln(b) * a - tf_ln(b) * b)));
        assert!((entropy(&p) - h).abs() < 1e-14);
        assert!((kl(&p, &q).unwrap() - d).abs() < 1e-14);
        assert!((welfare_gap(&q, &p).unwrap() - g).abs() < 1e-13);
    }
}

#[test]
fn nearby_kl_keeps_relative_accuracy() {
    // KL of a 1e-6 tilt is ~1e-13; naive summation would lose most digits.
    let p = Dist::from_slice(&[0.1, 0.2, 0.3, 0.4]).unwrap();
    let dl = compagency::ScoreFn::new(vec![1e-6, -2e-6, 0.5e-6, 0.0]).unwrap();
    let z = sum(p
        .p()
        .iter()
        .zip(dl.values())
        .map(|(&w, &v)| tf_exp(TwoFloat::from(v)) * w));
    let zx = sum(p
        .p()
        .iter()
        .zip(dl.values())
        .map(|(&w, &v)| tf_exp(TwoFloat::from(v)) * w * v));
    let lnz = tf_ln_dd(z);
    // The stored masses sum to 1 only up to rounding; normalize exactly.
    let mass = sum(p.p().iter().map(|&w| TwoFloat::from(w)));
    let exact = f64::from(zx / z - lnz + tf_ln_dd(mass));
    let got = compagency::persona::kl_budget(&p, &dl).unwrap().kl;
    assert!((got - exact).abs() < 1e-6 * exact, "{got:e} vs {exact:e}");
}
