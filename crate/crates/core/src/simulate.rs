//! Discrete-event evaluation of strategies on idle-time traces.
//!
//! Each cycle is one idle duration `X`. The secondary user walks the episodes
//! of the cycle's context in order; an episode `[a, b)` with `a < X` is used
//! (after one Bernoulli draw if its probability is below one) over
//! `[a, min(b, X))`, and the primary packet is collided iff `X ≤ b`. The cycle
//! ends at the first arrival, so there is at most one collision per cycle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::smmpp::{draw_state, IdleTrace};
use crate::strategies::{PtsiMode, Strategy};

/// Default outage window, in cycles.
pub const DEFAULT_WINDOW: usize = 100;

/// Evaluation options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Window size for the instantaneous collision series.
    pub window: usize,
    /// Constraint for the outage figure; falls back to the strategy's design η.
    pub eta: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            eta: None,
        }
    }
}

/// Outcome of running one strategy over one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub cycles: usize,
    /// Total secondary access time in seconds.
    pub access_time: f64,
    /// Mean access time per cycle.
    pub capacity: f64,
    /// Standard error of `capacity`.
    pub capacity_se: f64,
    pub collided: usize,
    pub collision: f64,
    /// Binomial standard error of `collision`.
    pub collision_se: f64,
    pub window: usize,
    /// Collision rate of every full window of `window` cycles.
    pub window_collisions: Vec<f64>,
    pub eta: Option<f64>,
    /// Fraction of windows whose collision rate exceeds `eta`.
    pub outage: Option<f64>,
    /// Conditioning state drawn for the first cycle in Markov mode.
    pub initial_context: Option<usize>,
    #[serde(skip)]
    pub collisions: Vec<bool>,
}

/// Run `strategy` over `trace` with default options.
pub fn run(trace: &IdleTrace, strategy: &Strategy, seed: u64) -> Result<SimResult> {
    run_with(trace, strategy, seed, SimOptions::default())
}

pub fn run_with(trace: &IdleTrace, strategy: &Strategy, seed: u64, opts: SimOptions) -> Result<SimResult> {
    if opts.window == 0 {
        return Err(Error::Parameter("window must be at least one cycle".into()));
    }
    let labels = match strategy.mode {
        PtsiMode::Statistical => None,
        mode => Some(trace.states().ok_or_else(|| {
            Error::Incompatible(format!("{mode} mode needs state labels and the trace has none"))
        })?),
    };
    if let Some(labels) = labels {
        if let Some((i, s)) = labels.iter().enumerate().find(|(_, s)| **s >= strategy.num_contexts()) {
            return Err(Error::Incompatible(format!(
                "cycle {i} has state {s} but the strategy has {} contexts",
                strategy.num_contexts()
            )));
        }
    }

    let mut rng = seeded(seed);
    let initial_context = match strategy.mode {
        PtsiMode::Markov => Some(match &strategy.context_prior {
            Some(prior) => draw_state(prior, &mut rng),
            None => rng.random_range(0..strategy.num_contexts()),
        }),
        _ => None,
    };

    let durations = trace.durations();
    let n = durations.len();
    let mut collisions = Vec::with_capacity(n);
    let (mut total, mut total_sq) = (0.0, 0.0);
    for (k, &x) in durations.iter().enumerate() {
        let context = match (strategy.mode, labels) {
            (PtsiMode::Statistical, _) => 0,
            (PtsiMode::Full, Some(l)) => l[k],
            (PtsiMode::Markov, Some(l)) => match k {
                0 => initial_context.expect("drawn above"),
                _ => l[k - 1],
            },
            _ => unreachable!("labels checked above"),
        };
        let (access, collided) = play_cycle(strategy.episodes(context), x, &mut rng);
        total += access;
        total_sq += access * access;
        collisions.push(collided);
    }

    let collided = collisions.iter().filter(|c| **c).count();
    let nf = n as f64;
    let capacity = total / nf;
    let variance = (total_sq / nf - capacity * capacity).max(0.0);
    let collision = collided as f64 / nf;
    let window_collisions = window_series(&collisions, opts.window);
    let eta = opts.eta.or(strategy.eta);
    let outage = match eta {
        Some(eta) if !window_collisions.is_empty() => Some(outage_of(&window_collisions, eta)),
        _ => None,
    };
    Ok(SimResult {
        cycles: n,
        access_time: total,
        capacity,
        capacity_se: (variance / nf).sqrt(),
        collided,
        collision,
        collision_se: (collision * (1.0 - collision) / nf).sqrt(),
        window: opts.window,
        window_collisions,
        eta,
        outage,
        initial_context,
        collisions,
    })
}

/// Access time and collision flag of a single idle time of length `x`.
fn play_cycle<R: Rng + ?Sized>(episodes: &[crate::strategies::Episode], x: f64, rng: &mut R) -> (f64, bool) {
    let mut access = 0.0;
    for e in episodes {
        if e.start >= x {
            break;
        }
        if e.prob < 1.0 && !rng.random_bool(e.prob) {
            continue;
        }
        access += e.end.min(x) - e.start;
        if x <= e.end {
            return (access, true);
        }
    }
    (access, false)
}

fn window_series(collisions: &[bool], window: usize) -> Vec<f64> {
    collisions
        .chunks_exact(window)
        .map(|w| w.iter().filter(|c| **c).count() as f64 / window as f64)
        .collect()
}

fn outage_of(series: &[f64], eta: f64) -> f64 {
    series.iter().filter(|r| **r > eta).count() as f64 / series.len() as f64
}

/// Fraction of `window`-cycle windows whose collision rate is strictly above `eta`.
pub fn outage(result: &SimResult, eta: f64, window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::Parameter("window must be at least one cycle".into()));
    }
    let series = window_series(&result.collisions, window);
    if series.is_empty() {
        return Err(Error::Data(format!(
            "{} cycles do not fill one window of {window}",
            result.collisions.len()
        )));
    }
    Ok(outage_of(&series, eta))
}

/// One row of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub mode: PtsiMode,
    pub result: SimResult,
}

/// Results of several strategies on the same trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub eta: f64,
    pub window: usize,
    pub rows: Vec<ComparisonRow>,
}

/// Run every strategy on the same trace. Strategy `k` draws its Bernoulli
/// choices from its own stream seeded by `derive_seed(seed, k)`.
pub fn compare(strategies: &[Strategy], trace: &IdleTrace, eta: f64, seed: u64, window: usize) -> Result<Comparison> {
    let opts = SimOptions {
        window,
        eta: Some(eta),
    };
    let rows = strategies
        .iter()
        .enumerate()
        .map(|(k, s)| {
            Ok(ComparisonRow {
                strategy: s.kind.to_string(),
                mode: s.mode,
                result: run_with(trace, s, derive_seed(seed, k as u64), opts)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Comparison { eta, window, rows })
}

impl Comparison {
    /// Comma-separated summary, one row per strategy.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "strategy,ptsi,cycles,capacity,capacity_se,collision,collision_se,outage\n",
        );
        for r in &self.rows {
            let s = &r.result;
            out.push_str(&format!(
                "{},{},{},{:.9e},{:.3e},{:.6},{:.3e},{}\n",
                r.strategy,
                r.mode,
                s.cycles,
                s.capacity,
                s.capacity_se,
                s.collision,
                s.collision_se,
                s.outage.map_or(String::new(), |o| format!("{o:.6}")),
            ));
        }
        out
    }

    /// Window collision series, one row per window and one column per strategy.
    pub fn windows_csv(&self) -> String {
        let mut out = String::from("window");
        for r in &self.rows {
            out.push(',');
            out.push_str(&r.strategy);
        }
        out.push('\n');
        let len = self.rows.iter().map(|r| r.result.window_collisions.len()).max().unwrap_or(0);
        for w in 0..len {
            out.push_str(&w.to_string());
            for r in &self.rows {
                out.push(',');
                if let Some(v) = r.result.window_collisions.get(w) {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
        out
    }
}
