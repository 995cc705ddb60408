//! Hyper-exponential idle-time distributions.
//!
//! A [`HyperExpDist`] is a finite mixture of exponentials,
//!
//! ```text
//! f(t) = Σ α_i λ_i exp(-λ_i t),   t ≥ 0
//! ```
//!
//! Components are kept sorted by ascending rate, so index 0 is always the
//! slowest (longest idle times) component. Everything downstream relies on
//! that ordering.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{check_time, Error, Result};
use crate::solver::{solve_root, Tolerance};

/// Weights below this are treated as vanished components.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Accepted deviation of the supplied weights from summing to one.
const WEIGHT_SUM_SLACK: f64 = 1e-9;

/// Solver horizon in units of the slowest mean idle time.
pub const HORIZON_MEANS: f64 = 50.0;

/// A weighted mixture of exponential distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistRecord", into = "DistRecord")]
pub struct HyperExpDist {
    alphas: Vec<f64>,
    lambdas: Vec<f64>,
}

/// Serialized form: `{"n": .., "alphas": [..], "lambdas": [..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistRecord {
    pub n: usize,
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl TryFrom<DistRecord> for HyperExpDist {
    type Error = Error;

    fn try_from(r: DistRecord) -> Result<Self> {
        if r.n != r.alphas.len() || r.n != r.lambdas.len() {
            return Err(Error::Parameter(format!(
                "record declares n = {} but has {} weights and {} rates",
                r.n,
                r.alphas.len(),
                r.lambdas.len()
            )));
        }
        HyperExpDist::new(r.alphas, r.lambdas)
    }
}

impl From<HyperExpDist> for DistRecord {
    fn from(d: HyperExpDist) -> Self {
        DistRecord {
            n: d.alphas.len(),
            alphas: d.alphas,
            lambdas: d.lambdas,
        }
    }
}

impl HyperExpDist {
    /// Build a mixture from weights summing to one and positive rates.
    ///
    /// Weights below [`WEIGHT_FLOOR`] are dropped and the rest renormalized;
    /// components are sorted by ascending rate.
    pub fn new(alphas: Vec<f64>, lambdas: Vec<f64>) -> Result<Self> {
        let sum: f64 = alphas.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_SLACK {
            return Err(Error::Parameter(format!(
                "mixture weights must sum to 1, got {sum}"
            )));
        }
        Self::from_weights(alphas, lambdas)
    }

    /// Build a mixture from non-negative weights of any positive total.
    pub fn from_weights(alphas: Vec<f64>, lambdas: Vec<f64>) -> Result<Self> {
        if alphas.len() != lambdas.len() {
            return Err(Error::Parameter(format!(
                "{} weights but {} rates",
                alphas.len(),
                lambdas.len()
            )));
        }
        if alphas.is_empty() {
            return Err(Error::Parameter("mixture needs at least one component".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::Parameter(format!("weight {a} is not a probability")));
        }
        if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Parameter(format!("rate {l} is not positive")));
        }
        let total: f64 = alphas.iter().sum();
        if total <= 0.0 {
            return Err(Error::Parameter("all weights are zero".into()));
        }
        let mut comps: Vec<(f64, f64)> = alphas
            .iter()
            .zip(&lambdas)
            .map(|(a, l)| (a / total, *l))
            .filter(|(a, _)| *a >= WEIGHT_FLOOR)
            .collect();
        comps.sort_by(|x, y| x.1.total_cmp(&y.1));
        let kept: f64 = comps.iter().map(|c| c.0).sum();
        let (alphas, lambdas) = comps.into_iter().map(|(a, l)| (a / kept, l)).unzip();
        Ok(Self { alphas, lambdas })
    }

    /// A single exponential with the given rate.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![rate])
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Number of mixture components.
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn components(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.alphas.iter().copied().zip(self.lambdas.iter().copied())
    }

    /// Smallest rate (the tail rate).
    pub fn min_rate(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn max_rate(&self) -> f64 {
        self.lambdas[self.lambdas.len() - 1]
    }

    /// `Σ α_i λ_i`, the density at the origin.
    pub fn mean_rate(&self) -> f64 {
        self.components().map(|(a, l)| a * l).sum()
    }

    /// True when two components share a rate (value-to-cost is then not
    /// strictly increasing).
    pub fn has_duplicate_rates(&self) -> bool {
        self.lambdas.windows(2).any(|w| w[0] == w[1])
    }

    /// True when every component has the same rate, i.e. the law is a plain
    /// exponential and its value-to-cost ratio is constant.
    pub fn is_single_rate(&self) -> bool {
        self.lambdas[0] == self.lambdas[self.lambdas.len() - 1]
    }

    /// Density `f(t)`.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.pdf_at(t))
    }

    /// Distribution function `F(t) = 1 - Σ α_i exp(-λ_i t)`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.cdf_at(t))
    }

    /// Survival function `1 - F(t)`.
    pub fn ccdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.ccdf_at(t))
    }

    /// Value-to-cost ratio `(1 - F(t)) / f(t)`: capacity earned per unit of
    /// collision risk when transmitting at `t`.
    ///
    /// Rises from `1 / Σ α_i λ_i` at the origin to `1 / λ_min` as `t → ∞`.
    pub fn value_to_cost(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.value_to_cost_at(t))
    }

    /// Mean idle time `Σ α_i / λ_i`.
    pub fn mean(&self) -> f64 {
        self.components().map(|(a, l)| a / l).sum()
    }

    pub(crate) fn pdf_at(&self, t: f64) -> f64 {
        self.components().map(|(a, l)| a * l * (-l * t).exp()).sum()
    }

    pub(crate) fn ccdf_at(&self, t: f64) -> f64 {
        if t == f64::INFINITY {
            return 0.0;
        }
        self.components().map(|(a, l)| a * (-l * t).exp()).sum()
    }

    pub(crate) fn cdf_at(&self, t: f64) -> f64 {
        // Σ α_i (1 - e^{-λ_i t}) keeps precision near t = 0.
        if t == f64::INFINITY {
            return 1.0;
        }
        self.components().map(|(a, l)| -a * (-l * t).exp_m1()).sum()
    }

    pub(crate) fn value_to_cost_at(&self, t: f64) -> f64 {
        // Factor out exp(-λ_min t) so the ratio survives large t.
        let base = self.min_rate();
        let (num, den) = self.components().fold((0.0, 0.0), |(n, d), (a, l)| {
            let w = a * (-(l - base) * t).exp();
            (n + w, d + w * l)
        });
        num / den
    }

    /// Probability mass `F(b) - F(a)` of the interval `(a, b]`; `b` may be
    /// infinite.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if b == f64::INFINITY {
            return self.ccdf_at(a);
        }
        // e^{-λa} (1 - e^{-λ(b-a)}) avoids cancellation for short intervals.
        self.components()
            .map(|(al, l)| al * (-l * a).exp() * -(-l * (b - a)).exp_m1())
            .sum()
    }

    /// `∫_a^b (1 - F(t)) dt`, the expected access time of a transmission
    /// over `[a, b)` that aborts at the arrival.
    pub fn survival_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if b == f64::INFINITY {
            return self.components().map(|(al, l)| al / l * (-l * a).exp()).sum();
        }
        self.components()
            .map(|(al, l)| al / l * (-l * a).exp() * -(-l * (b - a)).exp_m1())
            .sum()
    }

    /// Horizon used to bracket every transmission-limit solve.
    pub fn horizon(&self) -> f64 {
        HORIZON_MEANS / self.min_rate()
    }

    /// The time `t` with `1 - F(t) = q`, for `0 < q ≤ 1`.
    pub fn inverse_ccdf(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::Domain(format!("tail probability must lie in (0, 1], got {q}")));
        }
        if q == 1.0 {
            return Ok(0.0);
        }
        let horizon = self.horizon();
        if self.ccdf_at(horizon) > q {
            return Err(Error::Unbounded { horizon });
        }
        if self.is_single_rate() {
            return Ok(-q.ln() / self.min_rate());
        }
        solve_root(
            |t| self.ccdf_at(t),
            q,
            0.0,
            horizon,
            Tolerance::residual_only(1e-15 * q.max(1e-3)),
        )
    }

    /// The time `t` with `F(t) = p`, for `0 ≤ p < 1`.
    pub fn inverse_cdf(&self, p: f64) -> Result<f64> {
        if !(p >= 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("probability must lie in [0, 1), got {p}")));
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        let horizon = self.horizon();
        if self.cdf_at(horizon) < p {
            return Err(Error::Unbounded { horizon });
        }
        if self.is_single_rate() {
            return Ok(-(-p).ln_1p() / self.min_rate());
        }
        solve_root(
            |t| self.cdf_at(t),
            p,
            0.0,
            horizon,
            Tolerance::residual_only(1e-15 * p.max(1e-3)),
        )
    }

    /// Draw one idle time: pick component `i` with probability `α_i`, then an
    /// exponential variate with rate `λ_i`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = self.sample_component(rng);
        sample_exponential(self.lambdas[i], rng)
    }

    /// Draw `n` idle times.
    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    pub(crate) fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.alphas, rng)
    }
}

/// Draw an index with the given probabilities (assumed to sum to one).
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding left u above the accumulated total: take the last positive weight.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

pub(crate) fn sample_exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let x = Exp::new(rate).expect("rate validated positive").sample(rng);
    // Exp can return exactly 0 with vanishing probability; idle times are > 0.
    if x > 0.0 {
        x
    } else {
        f64::MIN_POSITIVE
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn three_state() -> HyperExpDist {
        HyperExpDist::new(vec![1.0 / 3.0; 3], vec![5.0, 100.0, 6000.0]).unwrap()
    }

    #[test]
    fn pdf_at_origin() {
        let d = HyperExpDist::exponential(2.0).unwrap();
        assert_eq!(d.pdf(0.0).unwrap(), 2.0);
        let d = HyperExpDist::new(vec![0.5, 0.5], vec![1.0, 3.0]).unwrap();
        assert!((d.pdf(0.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn pdf_matches_high_precision_value() {
        // 40-digit evaluation of 0.32·160·e^{-0.16} + 0.68·3670·e^{-3.67}.
        let d = HyperExpDist::new(vec![0.32, 0.68], vec![160.0, 3670.0]).unwrap();
        let reference = 107.208_840_394_007_16;
        assert!((d.pdf(1e-3).unwrap() - reference).abs() / reference < 1e-14);
    }

    #[test]
    fn negative_time_rejected() {
        let d = three_state();
        assert!(matches!(d.pdf(-1.0), Err(Error::Domain(_))));
        assert!(matches!(d.cdf(-1e-9), Err(Error::Domain(_))));
        assert!(matches!(d.value_to_cost(-0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn cdf_closed_forms() {
        assert_eq!(three_state().cdf(0.0).unwrap(), 0.0);
        let d = HyperExpDist::exponential(100.0).unwrap();
        assert!((d.cdf(10f64.ln() / 100.0).unwrap() - 0.9).abs() < 1e-14);
    }

    #[test]
    fn value_to_cost_limits() {
        let d = HyperExpDist::exponential(50.0).unwrap();
        for t in [0.0, 0.01, 1.0, 100.0] {
            assert!((d.value_to_cost(t).unwrap() - 0.02).abs() < 1e-15);
        }
        let d = three_state();
        let at0 = d.value_to_cost(0.0).unwrap();
        assert!((at0 - 1.0 / (6105.0 / 3.0)).abs() < 1e-15);
        let at1 = d.value_to_cost(1.0).unwrap();
        assert!((at1 - 0.2).abs() / 0.2 < 1e-3, "{at1}");
        assert!(d.value_to_cost(1e6).unwrap().is_finite());
    }

    #[test]
    fn means() {
        assert!((HyperExpDist::exponential(500.0).unwrap().mean() - 0.002).abs() < 1e-18);
        let d = HyperExpDist::new(vec![0.32, 0.68], vec![160.0, 3670.0]).unwrap();
        assert!((d.mean() - 2.185_286_103_542_234e-3).abs() < 1e-17);
        assert!((three_state().mean() - 0.070_055_555_555_555_56).abs() < 1e-16);
    }

    #[test]
    fn construction_sorts_and_prunes() {
        let d = HyperExpDist::new(vec![0.7, 0.3, 0.0], vec![6000.0, 100.0, 1.0]).unwrap();
        assert_eq!(d.lambdas(), &[100.0, 6000.0]);
        assert_eq!(d.alphas(), &[0.3, 0.7]);
        assert!(HyperExpDist::new(vec![0.5, 0.4], vec![1.0, 2.0]).is_err());
        assert!(HyperExpDist::new(vec![1.0], vec![0.0]).is_err());
        assert!(HyperExpDist::new(vec![], vec![]).is_err());
        let d = HyperExpDist::new(vec![0.5, 0.5], vec![3.0, 3.0]).unwrap();
        assert!(d.has_duplicate_rates());
        assert!(d.is_single_rate());
    }

    #[test]
    fn record_round_trip() {
        let d = three_state();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"n\":3"));
        let back: HyperExpDist = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let bad = r#"{"n":2,"alphas":[1.0],"lambdas":[5.0]}"#;
        assert!(serde_json::from_str::<HyperExpDist>(bad).is_err());
    }

    #[test]
    fn inverse_ccdf_round_trip() {
        let d = three_state();
        for q in [0.9, 0.5, 0.1, 0.01, 1e-4] {
            let t = d.inverse_ccdf(q).unwrap();
            assert!((d.ccdf_at(t) - q).abs() <= 1e-15 * q.max(1e-3) + 1e-16);
        }
        assert!(matches!(d.inverse_ccdf(1e-200), Err(Error::Unbounded { .. })));
    }

    #[test]
    fn interval_pieces_are_consistent() {
        let d = three_state();
        let (a, b) = (1e-3, 0.2);
        let direct = d.ccdf_at(a) - d.ccdf_at(b);
        assert!((d.interval_mass(a, b) - direct).abs() < 1e-15);
        assert!((d.survival_integral(0.0, f64::INFINITY) - d.mean()).abs() < 1e-15);
        let split = d.survival_integral(0.0, a) + d.survival_integral(a, f64::INFINITY);
        assert!((split - d.mean()).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = three_state();
        let a = d.sample_n(100, &mut seeded(9));
        let b = d.sample_n(100, &mut seeded(9));
        assert_eq!(a, b);
        assert!(a.iter().all(|x| *x > 0.0));
    }
}
