//! Outcome spaces, strictly positive distributions and the information
//! geometry every other module is built on.
//!
//! A [`Dist`] keeps both its probabilities and their logarithms. Log values
//! are authoritative whenever a distribution was produced from log weights
//! (pools, tilts, transports), which keeps peaked inputs accurate far below
//! the range where `p.ln()` would lose digits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance for value comparisons.
pub const VALUE_TOL: f64 = 1e-9;
/// Tolerance on normalization sums.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSpace {
    size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl OutcomeSpace {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::SpaceTooSmall(size));
        }
        Ok(Self { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::SpaceTooSmall(labels.len()));
        }
        let mut sorted: Vec<&String> = labels.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidLabels("duplicate label".into()));
        }
        Ok(Self {
            size: labels.len(),
            labels: Some(labels),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

/// Numerically stable `ln Σ exp(x)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

/// A strictly positive probability vector on a finite outcome space.
///
/// Equality compares the space and the probabilities; the cached logs may
/// differ in the last bit depending on how the value was built.
#[derive(Debug, Clone)]
pub struct Dist {
    space: OutcomeSpace,
    p: Vec<f64>,
    ln_p: Vec<f64>,
}

impl PartialEq for Dist {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space && self.p == other.p
    }
}

impl Dist {
    /// Normalizes `raw` into a distribution. Every entry must be finite and
    /// strictly positive.
    pub fn new(space: OutcomeSpace, raw: &[f64]) -> Result<Self> {
        if raw.len() != space.size() {
            return Err(Error::DimensionMismatch {
                expected: space.size(),
                found: raw.len(),
            });
        }
        for (index, &value) in raw.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if value <= 0.0 {
                return Err(Error::NonPositiveEntry { index, value });
            }
        }
        let total: f64 = raw.iter().sum();
        if !total.is_finite() {
            // Sum overflowed; go through log space instead.
            let logs: Vec<f64> = raw.iter().map(|x| x.ln()).collect();
            return Self::from_log_weights(space, &logs);
        }
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        if let Some(index) = p.iter().position(|&x| x <= 0.0) {
            return Err(Error::NonPositiveEntry { index, value: 0.0 });
        }
        let ln_p = p.iter().map(|x| x.ln()).collect();
        Ok(Self { space, p, ln_p })
    }

    /// Convenience constructor on an unlabeled space of size `raw.len()`.
    pub fn from_slice(raw: &[f64]) -> Result<Self> {
        Self::new(OutcomeSpace::new(raw.len())?, raw)
    }

    /// Softmax of unnormalized log weights, max-shifted.
    pub fn from_log_weights(space: OutcomeSpace, logw: &[f64]) -> Result<Self> {
        if logw.len() != space.size() {
            return Err(Error::DimensionMismatch {
                expected: space.size(),
                found: logw.len(),
            });
        }
        if let Some(index) = logw.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let lse = log_sum_exp(logw);
        let ln_p: Vec<f64> = logw.iter().map(|x| x - lse).collect();
        let p: Vec<f64> = ln_p.iter().map(|x| x.exp()).collect();
        if let Some(index) = p.iter().position(|&x| x <= 0.0) {
            return Err(Error::NonPositiveEntry { index, value: 0.0 });
        }
        Ok(Self { space, p, ln_p })
    }

    pub fn uniform(space: OutcomeSpace) -> Self {
        let m = space.size();
        let p = vec![1.0 / m as f64; m];
        let ln_p = vec![-(m as f64).ln(); m];
        Self { space, p, ln_p }
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn ln_p(&self) -> &[f64] {
        &self.ln_p
    }

    pub fn mass(&self, event: &Event) -> f64 {
        event.indices().iter().map(|&i| self.p[i]).sum()
    }

    /// Maximum absolute deviation from the uniform distribution.
    pub fn uniformity_defect(&self) -> f64 {
        let u = 1.0 / self.len() as f64;
        self.p.iter().map(|x| (x - u).abs()).fold(0.0, f64::max)
    }

    pub fn expectation(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        Ok(self.p.iter().zip(f).map(|(p, x)| p * x).sum())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: len,
            });
        }
        Ok(())
    }

    pub(crate) fn check_same_space(&self, other: &Dist) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct DistDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    p: Vec<f64>,
}

impl Serialize for Dist {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DistDoc {
            labels: self.space.labels.clone(),
            p: self.p.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dist {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = DistDoc::deserialize(d)?;
        Dist::try_from_parts(doc.labels, &doc.p).map_err(serde::de::Error::custom)
    }
}

impl Dist {
    fn try_from_parts(labels: Option<Vec<String>>, p: &[f64]) -> Result<Self> {
        let space = match labels {
            Some(labels) => OutcomeSpace::with_labels(labels)?,
            None => OutcomeSpace::new(p.len())?,
        };
        let total: f64 = p.iter().sum();
        if p.iter().all(|x| x.is_finite()) && (total - 1.0).abs() > NORM_TOL {
            return Err(Error::Parse(format!("probabilities sum to {total}, not 1")));
        }
        // Already normalized to within NORM_TOL; keep the masses bit for bit
        // so that serialization round-trips exactly.
        let mut dist = Dist::new(space, p)?;
        dist.p = p.to_vec();
        dist.ln_p = p.iter().map(|x| x.ln()).collect();
        Ok(dist)
    }
}

/// Nonnegative pooling weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        for (index, &b) in beta.iter().enumerate() {
            if !b.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if b < 0.0 {
                return Err(Error::InvalidWeights(format!(
                    "weight {index} is negative ({b})"
                )));
            }
        }
        let total: f64 = beta.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(Self(beta))
    }

    /// Rescales nonnegative raw weights to sum to one.
    pub fn normalized(raw: &[f64]) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidWeights(format!(
                "cannot normalize total {total}"
            )));
        }
        Self::new(raw.iter().map(|x| x / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every weight strictly positive.
    pub fn is_strict(&self) -> bool {
        self.0.iter().all(|&b| b > 0.0)
    }

    pub fn positive_count(&self) -> usize {
        self.0.iter().filter(|&&b| b > 0.0).count()
    }

    /// Index of the largest weight, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &b) in self.0.iter().enumerate() {
            if b > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl<'de> Deserialize<'de> for Weights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        Weights::new(raw).map_err(serde::de::Error::custom)
    }
}

/// A real-valued function on outcomes: welfare functions, tilts, log
/// profiles before centering, indicators.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ScoreFn(Vec<f64>);

impl ScoreFn {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn constant(m: usize, c: f64) -> Self {
        Self(vec![c; m])
    }

    pub fn indicator(m: usize, event: &Event) -> Self {
        let mut v = vec![0.0; m];
        for &i in event.indices() {
            v[i] = 1.0;
        }
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self(self.0.iter().map(|x| x * t).collect())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for ScoreFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        ScoreFn::new(raw).map_err(serde::de::Error::custom)
    }
}

/// A set of outcomes, kept as a sorted list of indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Event(Vec<usize>);

impl Event {
    /// Builds a nonempty proper subset of an `m`-outcome space.
    pub fn new(m: usize, indices: &[usize]) -> Result<Self> {
        let mut v = indices.to_vec();
        v.sort_unstable();
        v.dedup();
        if let Some(&bad) = v.iter().find(|&&i| i >= m) {
            return Err(Error::IndexOutOfRange { index: bad, len: m });
        }
        if v.is_empty() || v.len() == m {
            return Err(Error::EmptyOrFullEvent);
        }
        Ok(Self(v))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }
}

/// Shannon entropy in nats.
pub fn entropy(p: &Dist) -> f64 {
    -p.p.iter().zip(&p.ln_p).map(|(x, l)| x * l).sum::<f64>()
}

/// `KL(P‖Q)` in nats.
pub fn kl(p: &Dist, q: &Dist) -> Result<f64> {
    p.check_same_space(q)?;
    let v: f64 =
        p.p.iter()
            .zip(p.ln_p.iter().zip(&q.ln_p))
            .map(|(x, (lp, lq))| x * (lp - lq))
            .sum();
    Ok(v.max(0.0))
}

/// Total variation distance.
pub fn tv(p: &Dist, q: &Dist) -> Result<f64> {
    p.check_same_space(q)?;
    Ok(0.5
        * p.p
            .iter()
            .zip(&q.p)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// `⟨f, g⟩_P = Σ P(o) f(o) g(o)`.
pub fn inner_p(p: &Dist, f: &[f64], g: &[f64]) -> Result<f64> {
    p.check_len(f.len())?;
    p.check_len(g.len())?;
    Ok(p.p
        .iter()
        .zip(f.iter().zip(g))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

pub fn norm_p(p: &Dist, f: &[f64]) -> Result<f64> {
    Ok(inner_p(p, f, f)?.sqrt())
}

/// `Cov_P(f, g)` computed from centered values.
pub fn covariance_p(p: &Dist, f: &[f64], g: &[f64]) -> Result<f64> {
    let ef = p.expectation(f)?;
    let eg = p.expectation(g)?;
    p.check_len(g.len())?;
    Ok(p.p
        .iter()
        .zip(f.iter().zip(g))
        .map(|(w, (a, b))| w * (a - ef) * (b - eg))
        .sum())
}

pub fn variance_p(p: &Dist, f: &[f64]) -> Result<f64> {
    covariance_p(p, f, f)
}

/// `f - E_P[f]`.
pub fn center(p: &Dist, f: &[f64]) -> Result<Vec<f64>> {
    let mean = p.expectation(f)?;
    Ok(f.iter().map(|x| x - mean).collect())
}

/// KL divergence together with its two-block coarse-grained lower bound for
/// the partition `{A, Aᶜ}`.
pub fn coarse_grain_bound(p: &Dist, q: &Dist, event: &Event) -> Result<(f64, f64)> {
    p.check_same_space(q)?;
    if event.indices().iter().any(|&i| i >= p.len()) || event.indices().len() >= p.len() {
        return Err(Error::EmptyOrFullEvent);
    }
    let full = kl(p, q)?;
    let pa = p.mass(event);
    let qa = q.mass(event);
    let (pc, qc) = (1.0 - pa, 1.0 - qa);
    let bound = pa * (pa / qa).ln() + pc * (pc / qc).ln();
    Ok((full, bound))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(raw: &[f64]) -> Dist {
        Dist::from_slice(raw).unwrap()
    }

    #[test]
    fn make_dist_examples() {
        let u = d(&[1.0, 1.0, 1.0, 1.0]);
        assert!(u.p().iter().all(|&x| x == 0.25));
        let two = d(&[2.0, 6.0]);
        assert_eq!(two.p(), &[0.25, 0.75]);
        assert!(matches!(
            Dist::from_slice(&[0.2, 0.0, 0.8]),
            Err(Error::NonPositiveEntry { index: 1, .. })
        ));
        assert!(matches!(
            Dist::from_slice(&[0.2, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        let space = OutcomeSpace::new(3).unwrap();
        assert!(matches!(
            Dist::new(space, &[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 2
            })
        ));
        assert!(matches!(OutcomeSpace::new(1), Err(Error::SpaceTooSmall(1))));
    }

    #[test]
    fn labels_must_be_distinct() {
        assert!(OutcomeSpace::with_labels(vec!["a".into(), "a".into()]).is_err());
        let s = OutcomeSpace::with_labels(vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(s.size(), 2);
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&d(&[1.0, 1.0, 1.0])) - 3f64.ln()).abs() < 1e-15);
        let peaked = d(&[1.0 - 1e-12, 1e-12]);
        assert!(entropy(&peaked) < 1e-10);
    }

    #[test]
    fn kl_and_tv_examples() {
        let p = d(&[0.9, 0.1]);
        let q = d(&[0.1, 0.9]);
        assert_eq!(kl(&p, &p).unwrap(), 0.0);
        assert!((tv(&p, &q).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(tv(&p, &p).unwrap(), 0.0);
        let r = d(&[0.2, 0.5, 0.3]);
        assert_eq!(kl(&p, &r), Err(Error::SpaceMismatch));
    }

    #[test]
    fn kl_to_uniform_is_entropy_gap() {
        let r = d(&[0.7, 0.2, 0.05, 0.05]);
        let u = Dist::uniform(OutcomeSpace::new(4).unwrap());
        let lhs = kl(&r, &u).unwrap();
        assert!((lhs - (4f64.ln() - entropy(&r))).abs() < 1e-15);
    }

    #[test]
    fn inner_product_basics() {
        let p = d(&[0.2, 0.3, 0.5]);
        let f = [1.0, -2.0, 0.5];
        assert_eq!(inner_p(&p, &f, &[0.0; 3]).unwrap(), 0.0);
        assert!((norm_p(&p, &[1.0; 3]).unwrap() - 1.0).abs() < 1e-15);
        assert!(inner_p(&p, &f, &[1.0]).is_err());
    }

    #[test]
    fn coarse_grain_examples() {
        let p = d(&[0.2, 0.3, 0.5]);
        let a = Event::new(3, &[0]).unwrap();
        let (k, b) = coarse_grain_bound(&p, &p, &a).unwrap();
        assert!(k.abs() < 1e-15 && b.abs() < 1e-15);
        // Constant ratio P/Q on A and on Aᶜ gives equality.
        let q = d(&[0.1, 0.15, 0.75]);
        let a = Event::new(3, &[0, 1]).unwrap();
        let (k, b) = coarse_grain_bound(&p, &q, &a).unwrap();
        assert!((k - b).abs() < 1e-14, "{k} vs {b}");
        assert_eq!(Event::new(3, &[]), Err(Error::EmptyOrFullEvent));
        assert_eq!(Event::new(3, &[0, 1, 2]), Err(Error::EmptyOrFullEvent));
    }

    #[test]
    fn log_weights_handle_extreme_ranges() {
        let s = OutcomeSpace::new(3).unwrap();
        let p = Dist::from_log_weights(s, &[0.0, -500.0, 200.0]).unwrap();
        assert!((p.p().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p.ln_p()[1] - (-700.0)).abs() < 1e-9);
        let s = OutcomeSpace::new(2).unwrap();
        assert!(Dist::from_log_weights(s, &[0.0, -1000.0]).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(Weights::new(vec![0.5, 0.5]).unwrap().is_strict());
        assert!(!Weights::new(vec![1.0, 0.0]).unwrap().is_strict());
        assert!(Weights::new(vec![0.6, 0.6]).is_err());
        assert!(Weights::new(vec![1.2, -0.2]).is_err());
        assert_eq!(Weights::new(vec![0.25, 0.5, 0.25]).unwrap().argmax(), 1);
        assert_eq!(Weights::uniform(3).unwrap().argmax(), 0);
    }

    #[test]
    fn dist_json_revalidates() {
        let p: Dist = serde_json::from_str(r#"{"p":[0.25,0.75]}"#).unwrap();
        assert_eq!(p.p(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<Dist>(r#"{"p":[0.5,0.0,0.5]}"#).is_err());
        assert!(serde_json::from_str::<Dist>(r#"{"p":[0.5,0.6]}"#).is_err());
        let labeled: Dist = serde_json::from_str(r#"{"labels":["x","y"],"p":[0.5,0.5]}"#).unwrap();
        assert_eq!(labeled.space().labels().unwrap()[1], "y");
        assert!(serde_json::from_str::<Dist>(r#"{"labels":["x"],"p":[0.5,0.5]}"#).is_err());
    }
}
