//! Strategies that only know the idle-time mixture.

use crate::distribution::HyperExpDist;
use crate::error::{check_eta, Error, Result};

use super::{Episode, PtsiMode, Strategy, StrategyKind};

/// Default confidence level of the multiple-shot waits.
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// One-shot: transmit from the start of the idle time up to `τ(η)`, where
/// `Σ α_i (1 - e^{-λ_i τ}) = η`.
pub fn stat_one_shot(dist: &HyperExpDist, eta: f64) -> Result<Strategy> {
    check_eta(eta)?;
    let tau = dist.inverse_cdf(eta)?;
    single_context(StrategyKind::StatOneShot, eta, vec![Episode::new(0.0, tau)])
}

/// Optimal with statistical knowledge: stay silent until `τ` with
/// `1 - F(τ) = η`, then transmit until the primary returns.
///
/// The value-to-cost ratio of a mixture never decreases, so the tail of the
/// idle time is where capacity is cheapest in collision budget. For a single
/// exponential every policy spending the budget earns the same; the tail
/// policy is kept as the canonical choice.
pub fn stat_optimal(dist: &HyperExpDist, eta: f64) -> Result<Strategy> {
    check_eta(eta)?;
    let tau = dist.inverse_ccdf(eta)?;
    single_context(StrategyKind::StatOptimal, eta, vec![Episode::tail(tau)])
}

/// Multiple-shot strategy built from the rates alone.
///
/// The first episode assumes the fastest rate: transmit over `[0, t_N]` with
/// `t_N = ln(1/(1-η))/λ_N`. Surviving until `t_{i+1}^e = ln(1/ε)/λ_{i+1}`
/// rules out rate `λ_{i+1}` with confidence `1 - ε`, after which the next
/// episode `[t_{i+1}^e, t_{i+1}^e + t_i]` spends budget `η` against rate `λ_i`.
/// Weights play no part, which is what makes the schedule robust to drift in
/// the mixture weights.
pub fn multiple_shot(rates: &[f64], eta: f64, epsilon: f64) -> Result<Strategy> {
    check_eta(eta)?;
    if !(epsilon > 0.0 && epsilon < 1.0 - eta) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1 - η) = (0, {}), got {epsilon}",
            1.0 - eta
        )));
    }
    if rates.is_empty() {
        return Err(Error::Parameter("need at least one rate".into()));
    }
    if let Some(l) = rates.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::Parameter(format!("rate {l} is not positive")));
    }
    if let Some(w) = rates.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(format!(
            "rates must be strictly ascending, got {} then {}",
            w[0], w[1]
        )));
    }
    let n = rates.len();
    let budget = -(-eta).ln_1p();
    let confidence = -epsilon.ln();
    let mut episodes = vec![Episode::new(0.0, budget / rates[n - 1])];
    for i in (0..n - 1).rev() {
        let start = confidence / rates[i + 1];
        let end = start + budget / rates[i];
        let prev = episodes.last().expect("first episode pushed");
        if start < prev.end {
            return Err(Error::Construction(format!(
                "episode for rate {} starts at {start} before the episode for rate {} ends at {}; \
                 rates too close for η = {eta}, ε = {epsilon}",
                rates[i],
                rates[i + 1],
                prev.end
            )));
        }
        episodes.push(Episode::new(start, end));
    }
    single_context(StrategyKind::MultipleShot, eta, episodes)
}

/// Small-η capacity approximation of the multiple-shot strategy:
///
/// ```text
/// T ≈ Σ_{j<N} α_j Σ_{i=j}^{N-1} e^{-λ_j t_{i+1}^e} η / λ_i + η / λ_N
/// ```
pub fn multiple_shot_capacity_approx(dist: &HyperExpDist, eta: f64, epsilon: f64) -> f64 {
    let l = dist.lambdas();
    let a = dist.alphas();
    let n = l.len();
    let wait = |i: usize| -epsilon.ln() / l[i];
    let mut total = eta / l[n - 1];
    for j in 0..n.saturating_sub(1) {
        let inner: f64 = (j..n - 1).map(|i| (-l[j] * wait(i + 1)).exp() * eta / l[i]).sum();
        total += a[j] * inner;
    }
    total
}

fn single_context(kind: StrategyKind, eta: f64, episodes: Vec<Episode>) -> Result<Strategy> {
    Strategy::new(kind, PtsiMode::Statistical, Some(eta), vec![episodes], None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::predict;

    fn three_state() -> HyperExpDist {
        HyperExpDist::new(vec![1.0 / 3.0; 3], vec![5.0, 100.0, 6000.0]).unwrap()
    }

    #[test]
    fn one_shot_single_exponential() {
        let d = HyperExpDist::exponential(100.0).unwrap();
        let s = stat_one_shot(&d, 0.1).unwrap();
        let tau = s.contexts[0][0].end;
        assert!((tau - (10.0f64 / 9.0).ln() / 100.0).abs() < 1e-15);
        assert!((predict(&s, &d).unwrap().capacity - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn one_shot_small_eta_linearization() {
        let s = stat_one_shot(&three_state(), 0.01).unwrap();
        let tau = s.contexts[0][0].end;
        let approx = 0.01 / (6105.0 / 3.0);
        assert!((approx - tau).abs() / tau < 0.02, "{tau} vs {approx}");
    }

    #[test]
    fn one_shot_near_full_collision() {
        let d = three_state();
        let s = stat_one_shot(&d, 1.0 - 1e-12).unwrap();
        let tau = s.contexts[0][0].end;
        assert!((d.ccdf(tau).unwrap() / 1e-12 - 1.0).abs() < 1e-2);
    }

    #[test]
    fn eta_domain() {
        for eta in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(stat_one_shot(&three_state(), eta).is_err());
            assert!(stat_optimal(&three_state(), eta).is_err());
        }
    }

    #[test]
    fn optimal_single_exponential_is_memoryless() {
        let d = HyperExpDist::exponential(100.0).unwrap();
        let s = stat_optimal(&d, 0.1).unwrap();
        assert!((s.contexts[0][0].start - 10f64.ln() / 100.0).abs() < 1e-15);
        assert!((predict(&s, &d).unwrap().capacity - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn optimal_beats_one_shot_on_mixture() {
        let d = three_state();
        let opt = predict(&stat_optimal(&d, 0.1).unwrap(), &d).unwrap();
        let os = predict(&stat_one_shot(&d, 0.1).unwrap(), &d).unwrap();
        assert!(opt.capacity > os.capacity);
    }

    #[test]
    fn multiple_shot_episode_times() {
        let s = multiple_shot(&[100.0, 6000.0], 0.05, 1e-3).unwrap();
        let e = &s.contexts[0];
        assert_eq!(e.len(), 2);
        assert!((e[0].end - 8.548_882_397_925_08e-6).abs() < 1e-17);
        assert!((e[1].start - 1.151_292_546_497_023e-3).abs() < 1e-15);
        assert!((e[1].end - e[1].start - 5.129_329_438_755_05e-4).abs() < 1e-15);
    }

    #[test]
    fn multiple_shot_degenerates_to_one_shot() {
        let s = multiple_shot(&[100.0], 0.05, 1e-3).unwrap();
        let one = stat_one_shot(&HyperExpDist::exponential(100.0).unwrap(), 0.05).unwrap();
        assert_eq!(s.contexts, one.contexts);
    }

    #[test]
    fn multiple_shot_parameter_errors() {
        assert!(matches!(multiple_shot(&[100.0, 6000.0], 0.5, 0.6), Err(Error::Domain(_))));
        assert!(multiple_shot(&[6000.0, 100.0], 0.05, 1e-3).is_err());
        let err = multiple_shot(&[100.0, 110.0, 120.0], 0.3, 0.5).unwrap_err();
        match err {
            Error::Construction(msg) => assert!(msg.contains("100") && msg.contains("110"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn multiple_shot_capacity_formula() {
        let d = HyperExpDist::new(vec![0.5, 0.5], vec![100.0, 6000.0]).unwrap();
        let t2e = 1000f64.ln() / 6000.0;
        let expected = 0.5 * (-100.0 * t2e).exp() * 0.05 / 100.0 + 0.05 / 6000.0;
        assert!((multiple_shot_capacity_approx(&d, 0.05, 1e-3) - expected).abs() < 1e-18);
    }
}
