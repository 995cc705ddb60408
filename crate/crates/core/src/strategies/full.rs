//! Strategies that know the state generating the current idle time.

use crate::error::{check_eta, Result};
use crate::smmpp::SmmppModel;

use super::markov::tail_for_budget;
use super::{Episode, PtsiMode, Strategy, StrategyKind};

/// Balanced: in state `i` transmit over `[0, τ_i]` with `1 - e^{-λ_i τ_i} = η`.
pub fn full_balanced(model: &SmmppModel, eta: f64) -> Result<Strategy> {
    check_eta(eta)?;
    let budget = -(-eta).ln_1p();
    let contexts = model
        .rates()
        .iter()
        .map(|l| vec![Episode::new(0.0, budget / l)])
        .collect();
    Strategy::new(
        StrategyKind::FullBalanced,
        PtsiMode::Full,
        Some(eta),
        contexts,
        Some(model.steady_state().to_vec()),
    )
}

/// Optimal: with rates ascending, give whole idle times to the slowest states
/// while their weight fits in the budget, then cap the next state at the
/// per-state collision that exhausts it. Faster states stay silent.
///
/// The capped state uses residual budget `η' = (η - Σ_{i≤m} α_i)/α_{m+1}`,
/// `τ_{m+1} = ln(1/(1-η'))/λ_{m+1}`, so the aggregate collision is exactly `η`.
pub fn full_optimal(model: &SmmppModel, eta: f64) -> Result<Strategy> {
    check_eta(eta)?;
    let alphas = model.steady_state();
    let mut contexts = vec![Vec::new(); model.num_states()];
    let mut spent = 0.0;
    for (i, (a, l)) in alphas.iter().zip(model.rates()).enumerate() {
        if spent + a < eta {
            contexts[i].push(Episode::tail(0.0));
            spent += a;
            continue;
        }
        let residual = ((eta - spent) / a).clamp(0.0, 1.0);
        contexts[i] = if residual >= 1.0 {
            tail_for_budget(&model.state_dist(i)?, 1.0)?
        } else if residual > 0.0 {
            vec![Episode::new(0.0, -(-residual).ln_1p() / l)]
        } else {
            Vec::new()
        };
        break;
    }
    Strategy::new(
        StrategyKind::FullOptimal,
        PtsiMode::Full,
        Some(eta),
        contexts,
        Some(alphas.to_vec()),
    )
}
