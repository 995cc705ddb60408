//! Strategies that know the state of the previous idle time.
//!
//! Given previous state `i` the next idle time follows the conditional mixture
//! `f_i(t) = Σ_j p_ij λ_j e^{-λ_j t}`; each construction below is a policy per
//! previous state built from those laws.

use crate::distribution::HyperExpDist;
use crate::error::{check_eta, Error, Result};
use crate::smmpp::SmmppModel;
use crate::solver::{solve_root, Tolerance};

use super::{Episode, PtsiMode, Strategy, StrategyKind};

fn conditional_laws(model: &SmmppModel) -> Result<Vec<HyperExpDist>> {
    (0..model.num_states())
        .map(|i| model.conditional_next_dist(i))
        .collect()
}

fn markov_strategy(kind: StrategyKind, model: &SmmppModel, eta: f64, contexts: Vec<Vec<Episode>>) -> Result<Strategy> {
    Strategy::new(
        kind,
        PtsiMode::Markov,
        Some(eta),
        contexts,
        Some(model.steady_state().to_vec()),
    )
}

/// One-shot with an equal collision budget `η` in every previous state:
/// transmit over `[0, τ_i]` with `Σ_j p_ij (1 - e^{-λ_j τ_i}) = η`.
pub fn markov_os_balanced(model: &SmmppModel, eta: f64) -> Result<Strategy> {
    check_eta(eta)?;
    let contexts = conditional_laws(model)?
        .iter()
        .map(|d| Ok(vec![Episode::new(0.0, d.inverse_cdf(eta)?)]))
        .collect::<Result<_>>()?;
    markov_strategy(StrategyKind::MarkovOsBalanced, model, eta, contexts)
}

/// Linearized capacity of [`markov_os_balanced`], `Σ_i α_i η / Σ_j p_ij λ_j`.
/// Accurate only while every `λ_j τ_i` is small.
pub fn markov_os_balanced_capacity_approx(model: &SmmppModel, eta: f64) -> f64 {
    model
        .steady_state()
        .iter()
        .enumerate()
        .map(|(i, a)| a * eta / model.conditional_rate(i))
        .sum()
}

/// Order in which the one-shot suboptimal strategy hands out full
/// transmission: largest expected next idle time `Σ_j p_ij / λ_j` first.
fn benefit_order(model: &SmmppModel) -> Vec<usize> {
    let mut order: Vec<usize> = (0..model.num_states()).collect();
    order.sort_by(|&a, &b| model.conditional_mean(b).total_cmp(&model.conditional_mean(a)));
    order
}

/// Split of the collision budget across ordered states: the first `m` states
/// transmit fully, state `m + 1` gets the remaining per-state budget `q`.
fn greedy_prefix(order: &[usize], alphas: &[f64], eta: f64) -> (usize, f64) {
    let mut spent = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if spent + alphas[i] >= eta {
            return (k, ((eta - spent) / alphas[i]).clamp(0.0, 1.0));
        }
        spent += alphas[i];
    }
    (order.len(), 0.0)
}

/// One-shot suboptimal: give whole idle times to the previous states whose
/// next idle time is longest in expectation, cap one more state so the
/// aggregate collision equals `η`, and stay silent elsewhere.
pub fn markov_os_suboptimal(model: &SmmppModel, eta: f64) -> Result<Strategy> {
    check_eta(eta)?;
    let laws = conditional_laws(model)?;
    let alphas = model.steady_state();
    let order = benefit_order(model);
    let (m, q) = greedy_prefix(&order, alphas, eta);
    let mut contexts = vec![Vec::new(); model.num_states()];
    for &i in &order[..m] {
        contexts[i].push(Episode::tail(0.0));
    }
    if let Some(&i) = order.get(m) {
        if q >= 1.0 {
            contexts[i].push(Episode::tail(0.0));
        } else if q > 0.0 {
            let tau = laws[i].inverse_cdf(q)?;
            if tau <= 0.0 {
                return Err(Error::Construction(format!(
                    "residual budget {q} too small to resolve a transmission limit"
                )));
            }
            contexts[i].push(Episode::new(0.0, tau));
        }
    }
    markov_strategy(StrategyKind::MarkovOsSuboptimal, model, eta, contexts)
}

/// Capacity expression `Σ_{k≤m} α_{i_k} Σ_j p_{i_k j}/λ_j + α_{i_{m+1}} τ_{i_{m+1}}`
/// for a strategy built by [`markov_os_suboptimal`]. The last term charges
/// the full cap `τ`, so it overstates the exact capacity.
pub fn markov_os_suboptimal_capacity_approx(model: &SmmppModel, strategy: &Strategy) -> f64 {
    let alphas = model.steady_state();
    strategy
        .contexts
        .iter()
        .enumerate()
        .map(|(i, eps)| match eps.first() {
            Some(e) if e.is_unbounded() => alphas[i] * model.conditional_mean(i),
            Some(e) => alphas[i] * e.end,
            None => 0.0,
        })
        .sum()
}

/// Optimal balanced: in every previous state spend exactly `η` on the tail,
/// `[τ_i, ∞)` with `1 - F_i(τ_i) = η`.
pub fn markov_opt_balanced(model: &SmmppModel, eta: f64) -> Result<Strategy> {
    check_eta(eta)?;
    let contexts = conditional_laws(model)?
        .iter()
        .map(|d| Ok(vec![Episode::tail(d.inverse_ccdf(eta)?)]))
        .collect::<Result<_>>()?;
    markov_strategy(StrategyKind::MarkovOptBalanced, model, eta, contexts)
}

/// Optimal allocation over time and previous states.
///
/// Every state transmits exactly where its value-to-cost ratio
/// `(1 - F_i(t)) / f_i(t)` exceeds one common threshold `a*`, chosen so the
/// stationary-weighted collision equals `η`. States whose ratio already
/// exceeds `a*` at `t = 0` transmit throughout; states whose ratio never
/// reaches it stay silent.
pub fn markov_optimal(model: &SmmppModel, eta: f64) -> Result<Strategy> {
    check_eta(eta)?;
    let laws = conditional_laws(model)?;
    let allocation = common_threshold_allocation(&laws, model.steady_state(), eta)?;
    let contexts = laws
        .iter()
        .zip(&allocation.collisions)
        .map(|(d, &q)| tail_for_budget(d, q))
        .collect::<Result<_>>()?;
    markov_strategy(StrategyKind::MarkovOptimal, model, eta, contexts)
}

/// The common value-to-cost threshold `a*` of [`markov_optimal`].
pub fn markov_optimal_threshold(model: &SmmppModel, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let laws = conditional_laws(model)?;
    Ok(common_threshold_allocation(&laws, model.steady_state(), eta)?.threshold)
}

/// Tail policy spending per-context collision `q` (`1` = whole idle time).
pub(crate) fn tail_for_budget(d: &HyperExpDist, q: f64) -> Result<Vec<Episode>> {
    if q >= 1.0 {
        Ok(vec![Episode::tail(0.0)])
    } else if q <= 0.0 {
        Ok(Vec::new())
    } else {
        match d.inverse_ccdf(q) {
            Ok(tau) => Ok(vec![Episode::tail(tau)]),
            // The budget is below what the horizon can resolve.
            Err(Error::Unbounded { .. }) => Ok(Vec::new()),
            Err(e) => Err(e),
        }
    }
}

pub(crate) struct Allocation {
    pub threshold: f64,
    /// Per-context collision probability `1 - F_i(τ_i)`.
    pub collisions: Vec<f64>,
}

/// Per-context collision when transmitting wherever the ratio exceeds `a`.
fn collision_above(d: &HyperExpDist, a: f64) -> f64 {
    if d.value_to_cost_at(0.0) > a {
        return 1.0;
    }
    if d.is_single_rate() {
        return 0.0;
    }
    let horizon = d.horizon();
    if d.value_to_cost_at(horizon) <= a {
        return 0.0;
    }
    let tau = solve_root(
        |t| d.value_to_cost_at(t),
        a,
        0.0,
        horizon,
        Tolerance::residual_only(0.0),
    )
    .expect("ratio brackets the threshold");
    d.ccdf_at(tau)
}

/// Find the common threshold and the per-context collisions it induces.
///
/// Bisects on the threshold until the bracket collapses to adjacent floats,
/// then splits the remaining budget between the two bracketing allocations.
/// The split only moves mass among contexts whose ratio equals the threshold
/// to within floating point (exact ties for single-rate laws, numerically
/// flat tails otherwise), where every allocation earns the same.
pub(crate) fn common_threshold_allocation(laws: &[HyperExpDist], weights: &[f64], eta: f64) -> Result<Allocation> {
    let total = |a: f64| -> (f64, Vec<f64>) {
        let q: Vec<f64> = laws.iter().map(|d| collision_above(d, a)).collect();
        (q.iter().zip(weights).map(|(q, w)| q * w).sum(), q)
    };
    let ratio_lo = laws
        .iter()
        .map(|d| d.value_to_cost_at(0.0))
        .fold(f64::INFINITY, f64::min);
    // The ratio tends to 1/λ_min; at the horizon it can round one ulp above.
    let ratio_hi = laws
        .iter()
        .map(|d| (1.0 / d.min_rate()).max(d.value_to_cost_at(d.horizon())))
        .fold(0.0, f64::max);
    // Just below every starting ratio all contexts transmit fully.
    let mut lo = ratio_lo * (1.0 - 1e-12);
    let mut hi = ratio_hi;
    let (mut c_lo, mut q_lo) = total(lo);
    let (mut c_hi, mut q_hi) = total(hi);
    if !(c_lo >= eta && c_hi <= eta) {
        return Err(Error::Solver {
            target: eta,
            lo,
            hi,
            lo_value: c_lo,
            hi_value: c_hi,
        });
    }
    for _ in 0..2000 {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let (c, q) = total(mid);
        if c > eta {
            (lo, c_lo, q_lo) = (mid, c, q);
        } else if c < eta {
            (hi, c_hi, q_hi) = (mid, c, q);
        } else {
            return Ok(Allocation {
                threshold: mid,
                collisions: q,
            });
        }
    }
    let theta = if c_lo > c_hi { (c_lo - eta) / (c_lo - c_hi) } else { 0.0 };
    let collisions = q_lo
        .iter()
        .zip(&q_hi)
        .map(|(l, h)| l + theta * (h - l))
        .collect();
    Ok(Allocation {
        threshold: hi,
        collisions,
    })
}
