//! Secondary transmission strategies.
//!
//! A strategy tells the secondary user when to transmit inside a channel idle
//! time. Every construction in this module produces the same representation:
//! for each conditioning context (one context when only the idle-time law is
//! known, one per traffic state otherwise) a list of disjoint transmit
//! episodes `[start, end)`. While the channel has stayed idle the secondary
//! user transmits during each episode it reaches and stops at the first
//! primary arrival. The primary packet is collided iff it arrives inside an
//! episode.
//!
//! With that semantics the predicted capacity and collision probability of an
//! episode under an exponential mixture are closed forms:
//!
//! ```text
//! capacity  = p ∫_a^b (1 - F(t)) dt = p Σ (α_i/λ_i)(e^{-λ_i a} - e^{-λ_i b})
//! collision = p (F(b) - F(a))       = p Σ  α_i     (e^{-λ_i a} - e^{-λ_i b})
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::HyperExpDist;
use crate::error::{Error, Result};
use crate::smmpp::SmmppModel;

mod full;
mod markov;
mod statistical;

pub use crate::solver::{solve_root, Tolerance};
pub use full::{full_balanced, full_optimal};
pub use markov::{
    markov_opt_balanced, markov_optimal, markov_optimal_threshold, markov_os_balanced,
    markov_os_balanced_capacity_approx, markov_os_suboptimal, markov_os_suboptimal_capacity_approx,
};
pub use statistical::{
    multiple_shot, multiple_shot_capacity_approx, stat_one_shot, stat_optimal,
    DEFAULT_EPSILON,
};

/// How much the secondary user knows about the primary traffic state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PtsiMode {
    /// Only the idle-time mixture is known; one context.
    Statistical,
    /// The state of the previous idle time is known; context = previous state.
    Markov,
    /// The state generating the current idle time is known.
    Full,
}

impl fmt::Display for PtsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PtsiMode::Statistical => "stat",
            PtsiMode::Markov => "markov",
            PtsiMode::Full => "full",
        })
    }
}

impl FromStr for PtsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stat" | "statistical" => Ok(PtsiMode::Statistical),
            "markov" => Ok(PtsiMode::Markov),
            "full" => Ok(PtsiMode::Full),
            other => Err(Error::Parameter(format!("unknown PTSI mode `{other}`"))),
        }
    }
}

/// Which construction produced a strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    StatOneShot,
    StatOptimal,
    MarkovOsBalanced,
    MarkovOsSuboptimal,
    MarkovOptBalanced,
    MarkovOptimal,
    FullBalanced,
    FullOptimal,
    MultipleShot,
    AlwaysTransmit,
    NeverTransmit,
}

impl StrategyKind {
    /// The nine collision-constrained constructions, in presentation order.
    pub const CONSTRUCTED: [StrategyKind; 9] = [
        StrategyKind::StatOneShot,
        StrategyKind::StatOptimal,
        StrategyKind::MarkovOsBalanced,
        StrategyKind::MarkovOsSuboptimal,
        StrategyKind::MarkovOptBalanced,
        StrategyKind::MarkovOptimal,
        StrategyKind::FullBalanced,
        StrategyKind::FullOptimal,
        StrategyKind::MultipleShot,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::StatOneShot => "stat_one_shot",
            StrategyKind::StatOptimal => "stat_optimal",
            StrategyKind::MarkovOsBalanced => "markov_os_balanced",
            StrategyKind::MarkovOsSuboptimal => "markov_os_suboptimal",
            StrategyKind::MarkovOptBalanced => "markov_opt_balanced",
            StrategyKind::MarkovOptimal => "markov_optimal",
            StrategyKind::FullBalanced => "full_balanced",
            StrategyKind::FullOptimal => "full_optimal",
            StrategyKind::MultipleShot => "multiple_shot",
            StrategyKind::AlwaysTransmit => "always_transmit",
            StrategyKind::NeverTransmit => "never_transmit",
        }
    }

    /// The information level the construction needs.
    pub fn mode(&self) -> PtsiMode {
        match self {
            StrategyKind::MarkovOsBalanced
            | StrategyKind::MarkovOsSuboptimal
            | StrategyKind::MarkovOptBalanced
            | StrategyKind::MarkovOptimal => PtsiMode::Markov,
            StrategyKind::FullBalanced | StrategyKind::FullOptimal => PtsiMode::Full,
            _ => PtsiMode::Statistical,
        }
    }

    /// Build this strategy for a traffic model at collision budget `eta`.
    ///
    /// Statistical constructions use the model's marginal mixture;
    /// `epsilon` only matters for the multiple-shot strategy.
    pub fn build(&self, model: &SmmppModel, eta: f64, epsilon: f64) -> Result<Strategy> {
        match self {
            StrategyKind::StatOneShot => stat_one_shot(&model.marginal_dist(), eta),
            StrategyKind::StatOptimal => stat_optimal(&model.marginal_dist(), eta),
            StrategyKind::MarkovOsBalanced => markov_os_balanced(model, eta),
            StrategyKind::MarkovOsSuboptimal => markov_os_suboptimal(model, eta),
            StrategyKind::MarkovOptBalanced => markov_opt_balanced(model, eta),
            StrategyKind::MarkovOptimal => markov_optimal(model, eta),
            StrategyKind::FullBalanced => full_balanced(model, eta),
            StrategyKind::FullOptimal => full_optimal(model, eta),
            StrategyKind::MultipleShot => multiple_shot(model.rates(), eta, epsilon),
            StrategyKind::AlwaysTransmit => Ok(Strategy::always_transmit()),
            StrategyKind::NeverTransmit => Ok(Strategy::never_transmit()),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            StrategyKind::CONSTRUCTED.as_slice(),
            &[StrategyKind::AlwaysTransmit, StrategyKind::NeverTransmit],
        ]
        .concat()
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::Parameter(format!("unknown strategy `{s}`")))
    }
}

/// One transmit window `[start, end)` inside an idle time.
///
/// `prob` is the chance, drawn once per cycle, that the window is used at
/// all. `end` may be `f64::INFINITY` ("until the primary returns").
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub start: f64,
    #[serde(with = "infinite_as_null")]
    pub end: f64,
    pub prob: f64,
}

impl Episode {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end, prob: 1.0 }
    }

    /// Transmit from `start` until the primary returns.
    pub fn tail(start: f64) -> Self {
        Self::new(start, f64::INFINITY)
    }

    pub fn is_unbounded(&self) -> bool {
        self.end == f64::INFINITY
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// A transmit schedule per conditioning context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub mode: PtsiMode,
    /// Collision budget the strategy was designed for, if any.
    pub eta: Option<f64>,
    /// Episodes per context, start-sorted and disjoint.
    pub contexts: Vec<Vec<Episode>>,
    /// Stationary state weights known at design time; used to draw the
    /// conditioning state of the very first cycle in Markov mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_prior: Option<Vec<f64>>,
}

impl Strategy {
    /// Validate and assemble a strategy.
    pub fn new(
        kind: StrategyKind,
        mode: PtsiMode,
        eta: Option<f64>,
        contexts: Vec<Vec<Episode>>,
        context_prior: Option<Vec<f64>>,
    ) -> Result<Self> {
        if contexts.is_empty() {
            return Err(Error::Construction("strategy needs at least one context".into()));
        }
        if mode == PtsiMode::Statistical && contexts.len() != 1 {
            return Err(Error::Construction(format!(
                "statistical strategies have one context, got {}",
                contexts.len()
            )));
        }
        for (c, eps) in contexts.iter().enumerate() {
            for (k, e) in eps.iter().enumerate() {
                if !(e.start >= 0.0 && e.start.is_finite()) || !(e.end > e.start) {
                    return Err(Error::Construction(format!(
                        "context {c} episode {k} [{}, {}) is empty or negative",
                        e.start, e.end
                    )));
                }
                if !(e.prob > 0.0 && e.prob <= 1.0) {
                    return Err(Error::Construction(format!(
                        "context {c} episode {k} has transmit probability {}",
                        e.prob
                    )));
                }
            }
            if let Some(k) = eps.windows(2).position(|w| w[1].start < w[0].end) {
                return Err(Error::Construction(format!(
                    "context {c}: episodes {k} and {} overlap",
                    k + 1
                )));
            }
        }
        if let Some(prior) = &context_prior {
            if prior.len() != contexts.len() {
                return Err(Error::Construction("context prior length mismatch".into()));
            }
        }
        Ok(Self {
            kind,
            mode,
            eta,
            contexts,
            context_prior,
        })
    }

    /// Transmit throughout every idle time.
    pub fn always_transmit() -> Self {
        Self {
            kind: StrategyKind::AlwaysTransmit,
            mode: PtsiMode::Statistical,
            eta: None,
            contexts: vec![vec![Episode::tail(0.0)]],
            context_prior: None,
        }
    }

    /// Never transmit.
    pub fn never_transmit() -> Self {
        Self {
            kind: StrategyKind::NeverTransmit,
            mode: PtsiMode::Statistical,
            eta: None,
            contexts: vec![vec![]],
            context_prior: None,
        }
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn episodes(&self, context: usize) -> &[Episode] {
        &self.contexts[context]
    }
}

/// Where the design-time idle-time law comes from.
#[derive(Debug, Clone, Copy)]
pub enum TrafficSource<'a> {
    Mixture(&'a HyperExpDist),
    Model(&'a SmmppModel),
}

impl<'a> From<&'a HyperExpDist> for TrafficSource<'a> {
    fn from(d: &'a HyperExpDist) -> Self {
        TrafficSource::Mixture(d)
    }
}

impl<'a> From<&'a SmmppModel> for TrafficSource<'a> {
    fn from(m: &'a SmmppModel) -> Self {
        TrafficSource::Model(m)
    }
}

/// Predicted performance of one conditioning context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextPrediction {
    /// Probability that a cycle is evaluated in this context.
    pub weight: f64,
    pub capacity: f64,
    pub collision: f64,
}

/// Predicted secondary capacity (seconds per cycle) and collision probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPrediction {
    pub capacity: f64,
    pub collision: f64,
    pub per_context: Vec<ContextPrediction>,
}

/// Capacity and collision of an episode list under one idle-time law.
pub fn evaluate_episodes(episodes: &[Episode], dist: &HyperExpDist) -> (f64, f64) {
    episodes.iter().fold((0.0, 0.0), |(cap, col), e| {
        (
            cap + e.prob * dist.survival_integral(e.start, e.end),
            col + e.prob * dist.interval_mass(e.start, e.end),
        )
    })
}

/// Closed-form capacity and collision of `strategy` under `source`.
///
/// Statistical strategies are evaluated against the mixture (the marginal
/// mixture for a model source). Markov strategies weight the conditional
/// next-idle law of each previous state by the stationary distribution; full
/// strategies weight each state's own exponential.
pub fn predict<'a>(strategy: &Strategy, source: impl Into<TrafficSource<'a>>) -> Result<StrategyPrediction> {
    let source = source.into();
    let laws: Vec<(f64, HyperExpDist)> = match (strategy.mode, source) {
        (PtsiMode::Statistical, TrafficSource::Mixture(d)) => vec![(1.0, d.clone())],
        (PtsiMode::Statistical, TrafficSource::Model(m)) => vec![(1.0, m.marginal_dist())],
        (PtsiMode::Markov, TrafficSource::Model(m)) => {
            check_contexts(strategy, m)?;
            m.steady_state()
                .iter()
                .enumerate()
                .map(|(i, w)| Ok((*w, m.conditional_next_dist(i)?)))
                .collect::<Result<_>>()?
        }
        (PtsiMode::Full, TrafficSource::Model(m)) => {
            check_contexts(strategy, m)?;
            m.steady_state()
                .iter()
                .enumerate()
                .map(|(i, w)| Ok((*w, m.state_dist(i)?)))
                .collect::<Result<_>>()?
        }
        (mode, TrafficSource::Mixture(_)) => {
            return Err(Error::Incompatible(format!(
                "{mode} strategies need a traffic model, not just a mixture"
            )))
        }
    };
    let per_context: Vec<ContextPrediction> = laws
        .iter()
        .zip(&strategy.contexts)
        .map(|((w, d), eps)| {
            let (capacity, collision) = evaluate_episodes(eps, d);
            ContextPrediction {
                weight: *w,
                capacity,
                collision,
            }
        })
        .collect();
    let capacity = per_context.iter().map(|c| c.weight * c.capacity).sum();
    let collision: f64 = per_context.iter().map(|c| c.weight * c.collision).sum();
    Ok(StrategyPrediction {
        capacity,
        collision: collision.clamp(0.0, 1.0),
        per_context,
    })
}

fn check_contexts(strategy: &Strategy, model: &SmmppModel) -> Result<()> {
    if strategy.num_contexts() != model.num_states() {
        Err(Error::Incompatible(format!(
            "strategy has {} contexts but the model has {} states",
            strategy.num_contexts(),
            model.num_states()
        )))
    } else {
        Ok(())
    }
}
