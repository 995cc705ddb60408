//! Semi-Markov-modulated Poisson traffic.
//!
//! The primary network switches among `N` traffic states, each with its own
//! packet arrival rate. A state holds for an integer number of idle times:
//! after every idle time one transition is drawn from the row-stochastic
//! matrix `P` (self-loops allowed). Packet lengths are ignored, so a trace is
//! just the sequence of idle durations together with the state that produced
//! each one. Pooling the durations and forgetting the labels gives a
//! hyper-exponential law whose weights are the stationary distribution of `P`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{sample_exponential, sample_index, HyperExpDist};
use crate::error::{Error, Result};
use crate::rng::{seeded, Stream};

const ROW_SUM_SLACK: f64 = 1e-9;

/// Rates, transition matrix and cached stationary weights of a traffic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct SmmppModel {
    rates: Vec<f64>,
    transition: Vec<Vec<f64>>,
    steady: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub rates: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

impl TryFrom<ModelRecord> for SmmppModel {
    type Error = Error;

    fn try_from(r: ModelRecord) -> Result<Self> {
        SmmppModel::new(r.rates, r.transition)
    }
}

impl From<SmmppModel> for ModelRecord {
    fn from(m: SmmppModel) -> Self {
        ModelRecord {
            rates: m.rates,
            transition: m.transition,
        }
    }
}

impl SmmppModel {
    /// Build a model; states are reordered so that rates ascend, and `P` is
    /// permuted to match.
    pub fn new(rates: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let n = rates.len();
        if n == 0 {
            return Err(Error::Parameter("model needs at least one state".into()));
        }
        if let Some(l) = rates.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Parameter(format!("rate {l} is not positive")));
        }
        if transition.len() != n || transition.iter().any(|r| r.len() != n) {
            return Err(Error::Parameter(format!(
                "transition matrix must be {n}×{n}"
            )));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::Parameter(format!("row {i} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_SLACK {
                return Err(Error::Parameter(format!("row {i} sums to {s}, not 1")));
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| rates[a].total_cmp(&rates[b]));
        let rates: Vec<f64> = order.iter().map(|&i| rates[i]).collect();
        let transition: Vec<Vec<f64>> = order
            .iter()
            .map(|&i| {
                let row: Vec<f64> = order.iter().map(|&j| transition[i][j]).collect();
                let s: f64 = row.iter().sum();
                row.into_iter().map(|p| p / s).collect()
            })
            .collect();
        let steady = steady_state(&transition)?;
        Ok(Self {
            rates,
            transition,
            steady,
        })
    }

    /// A model whose next state is drawn independently of the current one;
    /// every row of `P` equals the mixture weights.
    pub fn from_mixture(dist: &HyperExpDist) -> Self {
        let rates = dist.lambdas().to_vec();
        let row = dist.alphas().to_vec();
        Self {
            transition: vec![row.clone(); rates.len()],
            steady: row,
            rates,
        }
    }

    /// Symmetric chain: `stay` on the diagonal, the rest spread evenly.
    pub fn symmetric(rates: Vec<f64>, stay: f64) -> Result<Self> {
        let n = rates.len();
        let off = if n > 1 { (1.0 - stay) / (n - 1) as f64 } else { 0.0 };
        let transition = (0..n)
            .map(|i| (0..n).map(|j| if i == j { if n > 1 { stay } else { 1.0 } } else { off }).collect())
            .collect();
        Self::new(rates, transition)
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    /// Stationary weights `α` with `α = αP`.
    pub fn steady_state(&self) -> &[f64] {
        &self.steady
    }

    pub fn num_states(&self) -> usize {
        self.rates.len()
    }

    /// Idle-time law when the traffic state is unknown: the mixture of the
    /// state exponentials weighted by the stationary distribution.
    pub fn marginal_dist(&self) -> HyperExpDist {
        HyperExpDist::from_weights(self.steady.clone(), self.rates.clone())
            .expect("validated model yields a valid mixture")
    }

    /// Law of the next idle time given that the previous one was produced in
    /// state `prev`: `f_i(t) = Σ_j p_ij λ_j exp(-λ_j t)`.
    pub fn conditional_next_dist(&self, prev: usize) -> Result<HyperExpDist> {
        let row = self.transition.get(prev).ok_or_else(|| {
            Error::Model(format!(
                "state {prev} out of range for a {}-state model",
                self.num_states()
            ))
        })?;
        HyperExpDist::from_weights(row.clone(), self.rates.clone())
    }

    /// Law of the current idle time given its generating state.
    pub fn state_dist(&self, state: usize) -> Result<HyperExpDist> {
        let rate = *self.rates.get(state).ok_or_else(|| {
            Error::Model(format!(
                "state {state} out of range for a {}-state model",
                self.num_states()
            ))
        })?;
        HyperExpDist::exponential(rate)
    }

    /// `Σ_j p_ij / λ_j`, the expected next idle time after state `i`.
    pub fn conditional_mean(&self, prev: usize) -> f64 {
        self.transition[prev]
            .iter()
            .zip(&self.rates)
            .map(|(p, l)| p / l)
            .sum()
    }

    /// `Σ_j p_ij λ_j`, the expected next arrival rate after state `i`.
    pub fn conditional_rate(&self, prev: usize) -> f64 {
        self.transition[prev]
            .iter()
            .zip(&self.rates)
            .map(|(p, l)| p * l)
            .sum()
    }

    /// Generate `n_cycles` idle times with their state labels.
    pub fn generate(&self, n_cycles: usize, seed: u64) -> Result<IdleTrace> {
        if n_cycles == 0 {
            return Err(Error::Parameter("need at least one cycle".into()));
        }
        let mut rng = seeded(seed);
        let mut durations = Vec::with_capacity(n_cycles);
        let mut states = Vec::with_capacity(n_cycles);
        self.generate_into(n_cycles, &mut rng, &mut durations, &mut states);
        Ok(IdleTrace {
            durations,
            states: Some(states),
            segment_starts: vec![0],
        })
    }

    fn generate_into(&self, n: usize, rng: &mut Stream, durations: &mut Vec<f64>, states: &mut Vec<usize>) {
        let mut state = sample_index(&self.steady, rng);
        for _ in 0..n {
            durations.push(sample_exponential(self.rates[state], rng));
            states.push(state);
            state = sample_index(&self.transition[state], rng);
        }
    }
}

/// Stationary distribution of an irreducible row-stochastic matrix.
///
/// Solves `α (P - I) = 0` with `Σ α = 1` directly by Gaussian elimination.
pub fn steady_state(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    if n == 0 || p.iter().any(|r| r.len() != n) {
        return Err(Error::Model("transition matrix must be square and non-empty".into()));
    }
    if !is_irreducible(p) {
        return Err(Error::Model(
            "transition matrix is reducible; stationary distribution is not unique".into(),
        ));
    }
    // Rows of the system are the columns of (P - I)ᵀ; the last is replaced by Σα = 1.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut row: Vec<f64> = (0..n).map(|i| p[i][j] - if i == j { 1.0 } else { 0.0 }).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-14 {
            return Err(Error::Model("singular stationary system".into()));
        }
        a.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let factor = a[r][col] / a[col][col];
                if factor != 0.0 {
                    for c in col..=n {
                        a[r][c] -= factor * a[col][c];
                    }
                }
            }
        }
    }
    let mut alpha: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
    if alpha.iter().any(|x| *x <= 0.0) {
        return Err(Error::Model("stationary weights are not all positive".into()));
    }
    let s: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|x| *x /= s);
    Ok(alpha)
}

fn is_irreducible(p: &[Vec<f64>]) -> bool {
    let n = p.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { p[i][j] } else { p[j][i] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// A sequence of channel idle times.
///
/// Each cycle is one idle duration ended by a primary arrival. State labels
/// are present for synthetic traces and absent for captured ones.
#[derive(Debug, Clone, PartialEq)]
pub struct IdleTrace {
    durations: Vec<f64>,
    states: Option<Vec<usize>>,
    segment_starts: Vec<usize>,
}

impl IdleTrace {
    /// A trace without state labels.
    pub fn unlabeled(durations: Vec<f64>) -> Result<Self> {
        Self::new(durations, None, vec![0])
    }

    pub fn labeled(durations: Vec<f64>, states: Vec<usize>) -> Result<Self> {
        Self::new(durations, Some(states), vec![0])
    }

    pub fn new(
        durations: Vec<f64>,
        states: Option<Vec<usize>>,
        segment_starts: Vec<usize>,
    ) -> Result<Self> {
        if durations.is_empty() {
            return Err(Error::Data("trace has no cycles".into()));
        }
        if let Some((i, d)) = durations.iter().enumerate().find(|(_, d)| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::Data(format!("cycle {i} has non-positive duration {d}")));
        }
        if let Some(s) = &states {
            if s.len() != durations.len() {
                return Err(Error::Data(format!(
                    "{} state labels for {} cycles",
                    s.len(),
                    durations.len()
                )));
            }
        }
        let mut segment_starts = segment_starts;
        if segment_starts.first() != Some(&0) {
            segment_starts.insert(0, 0);
        }
        if segment_starts.windows(2).any(|w| w[0] >= w[1])
            || segment_starts.iter().any(|s| *s >= durations.len())
        {
            return Err(Error::Data("segment boundaries must be increasing and inside the trace".into()));
        }
        Ok(Self {
            durations,
            states,
            segment_starts,
        })
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn states(&self) -> Option<&[usize]> {
        self.states.as_deref()
    }

    /// Index of the first cycle of every segment (always starts with 0).
    pub fn segment_starts(&self) -> &[usize] {
        &self.segment_starts
    }

    pub fn mean_duration(&self) -> f64 {
        self.durations.iter().sum::<f64>() / self.durations.len() as f64
    }

    /// Drop state labels, as for a captured trace.
    pub fn without_labels(mut self) -> Self {
        self.states = None;
        self
    }
}

/// Piecewise-stationary traffic: a list of (cycle count, model) segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonstationarySchedule {
    segments: Vec<ScheduleSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSegment {
    pub cycles: usize,
    pub model: SmmppModel,
}

impl NonstationarySchedule {
    pub fn new(segments: Vec<ScheduleSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Parameter("schedule needs at least one segment".into()));
        }
        if let Some((i, _)) = segments.iter().enumerate().find(|(_, s)| s.cycles == 0) {
            return Err(Error::Parameter(format!("segment {i} has zero cycles")));
        }
        Ok(Self { segments })
    }

    /// Convenience: segments of i.i.d. hyper-exponential idle times.
    pub fn from_mixtures(segments: Vec<(usize, HyperExpDist)>) -> Result<Self> {
        Self::new(
            segments
                .into_iter()
                .map(|(cycles, d)| ScheduleSegment {
                    cycles,
                    model: SmmppModel::from_mixture(&d),
                })
                .collect(),
        )
    }

    pub fn segments(&self) -> &[ScheduleSegment] {
        &self.segments
    }

    pub fn total_cycles(&self) -> usize {
        self.segments.iter().map(|s| s.cycles).sum()
    }

    /// Generate the concatenated trace from one random stream; a one-segment
    /// schedule reproduces [`SmmppModel::generate`] exactly.
    pub fn generate(&self, seed: u64) -> Result<IdleTrace> {
        let total = self.total_cycles();
        let mut rng = seeded(seed);
        let mut durations = Vec::with_capacity(total);
        let mut states = Vec::with_capacity(total);
        let mut starts = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            starts.push(durations.len());
            seg.model.generate_into(seg.cycles, &mut rng, &mut durations, &mut states);
        }
        IdleTrace::new(durations, Some(states), starts)
    }
}

/// Fraction of cycles spent in each state.
pub fn state_occupancy(states: &[usize], n: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n];
    for s in states {
        counts[*s] += 1;
    }
    counts.into_iter().map(|c| c as f64 / states.len() as f64).collect()
}

/// Draw a state from a weight vector (used for first-cycle contexts).
pub(crate) fn draw_state<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    sample_index(weights, rng)
}
