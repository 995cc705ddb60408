//! Estimating hyper-exponential parameters from idle-time samples.

use serde::{Deserialize, Serialize};

use crate::distribution::HyperExpDist;
use crate::error::{Error, Result};

mod tail;
mod windowed;

pub use tail::{tail_diagnostics, TailDiagnostics, KNEE_CANDIDATES};
pub use windowed::{windowed_fit, GroupFit, ParamSummary, WindowedFit};

/// Samples required per mixture component.
pub const MIN_SAMPLES_PER_COMPONENT: usize = 10;
/// Components whose total responsibility falls below this many samples are dropped.
pub const COLLAPSE_MASS: f64 = 1e-6;
/// Relative rate gap under which two fitted components are merged.
pub const MERGE_GAP: f64 = 0.05;

/// EM stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    /// Stop when the relative log-likelihood change drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 2000,
        }
    }
}

/// Outcome of an EM fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Fitted mixture, components sorted by rate.
    pub dist: HyperExpDist,
    /// Log-likelihood of the samples under `dist`.
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood of the parameters entering every EM iteration,
    /// starting with the initial mixture.
    pub trace: Vec<f64>,
    /// Components removed because their responsibility vanished.
    pub dropped: usize,
    /// Components folded into a neighbour with a near-identical rate.
    pub merged: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn log_likelihood_per_sample(&self, n: usize) -> f64 {
        self.log_likelihood / n as f64
    }
}

/// Quantiles of the samples spanned by [`default_init`].
pub const INIT_QUANTILES: (f64, f64) = (0.01, 0.99);

/// Initial mixture used when none is supplied: `n` equally weighted rates
/// spread log-uniformly between the reciprocals of the 99th and 1st
/// percentiles of the samples.
///
/// The extreme order statistics are avoided because a component started at
/// `1/min(samples)` can lock onto the single smallest sample.
pub fn default_init(samples: &[f64], n: usize) -> Result<HyperExpDist> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pick = |q: f64| sorted[((q * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)];
    let (lo, hi) = (pick(INIT_QUANTILES.0), pick(INIT_QUANTILES.1));
    let (r_lo, r_hi) = (1.0 / hi, 1.0 / lo);
    let rates = if n == 1 || r_lo == r_hi {
        (0..n).map(|k| (r_lo * r_hi).sqrt() * (1.0 + k as f64 * 1e-3)).collect()
    } else {
        let step = (r_hi / r_lo).ln() / (n - 1) as f64;
        (0..n).map(|k| r_lo * (step * k as f64).exp()).collect()
    };
    HyperExpDist::new(vec![1.0 / n as f64; n], rates)
}

fn check_samples(samples: &[f64], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("need at least one component".into()));
    }
    if samples.len() < MIN_SAMPLES_PER_COMPONENT * n {
        return Err(Error::Data(format!(
            "{} samples are too few for {n} components (need {})",
            samples.len(),
            MIN_SAMPLES_PER_COMPONENT * n
        )));
    }
    if let Some((i, x)) = samples.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::Data(format!("sample {i} is {x}; idle times must be positive")));
    }
    Ok(())
}

/// Log-likelihood of `samples` under `dist`.
pub fn log_likelihood(samples: &[f64], dist: &HyperExpDist) -> f64 {
    let log_w: Vec<f64> = dist.components().map(|(a, l)| (a * l).ln()).collect();
    let lambdas = dist.lambdas();
    samples
        .iter()
        .map(|&x| {
            let m = log_w
                .iter()
                .zip(lambdas)
                .map(|(w, l)| w - l * x)
                .fold(f64::NEG_INFINITY, f64::max);
            m + log_w.iter().zip(lambdas).map(|(w, l)| (w - l * x - m).exp()).sum::<f64>().ln()
        })
        .sum()
}

/// One EM pass: returns the log-likelihood of the *current* parameters and
/// the updated `(Σ_i r_ik, Σ_i r_ik x_i)` per component.
fn em_step(samples: &[f64], alphas: &[f64], lambdas: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let k = alphas.len();
    let log_w: Vec<f64> = alphas.iter().zip(lambdas).map(|(a, l)| (a * l).ln()).collect();
    let mut mass = vec![0.0; k];
    let mut moment = vec![0.0; k];
    let mut terms = vec![0.0; k];
    let mut ll = 0.0;
    for &x in samples {
        let mut m = f64::NEG_INFINITY;
        for j in 0..k {
            terms[j] = log_w[j] - lambdas[j] * x;
            m = m.max(terms[j]);
        }
        let mut s = 0.0;
        for t in terms.iter_mut() {
            *t = (*t - m).exp();
            s += *t;
        }
        ll += m + s.ln();
        for j in 0..k {
            let r = terms[j] / s;
            mass[j] += r;
            moment[j] += r * x;
        }
    }
    (ll, mass, moment)
}

/// Fit an `n`-component hyper-exponential mixture by expectation-maximization.
///
/// ```
/// use oppaccess::{fit::{em_fit, EmOptions}, HyperExpDist, rng::seeded};
///
/// let truth = HyperExpDist::new(vec![0.3, 0.7], vec![50.0, 2000.0])?;
/// let samples = truth.sample_n(20_000, &mut seeded(1));
/// let fit = em_fit(&samples, 2, None, EmOptions::default())?;
/// assert!(fit.converged);
/// assert!((fit.dist.lambdas()[0] / 50.0 - 1.0).abs() < 0.1);
/// # Ok::<(), oppaccess::Error>(())
/// ```
pub fn em_fit(samples: &[f64], n: usize, init: Option<&HyperExpDist>, opts: EmOptions) -> Result<FitResult> {
    check_samples(samples, n)?;
    let init = match init {
        Some(d) if d.len() != n => {
            return Err(Error::Parameter(format!(
                "initial mixture has {} components, asked for {n}",
                d.len()
            )))
        }
        Some(d) => d.clone(),
        None => default_init(samples, n)?,
    };
    let mut alphas = init.alphas().to_vec();
    let mut lambdas = init.lambdas().to_vec();
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut dropped = 0;
    let mut converged = false;
    let mut prev_ll = f64::NAN;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let (ll, mass, moment) = em_step(samples, &alphas, &lambdas);
        trace.push(ll);
        if iterations > 0 && ((ll - prev_ll) / ll.abs()).abs() < opts.tol {
            converged = true;
            break;
        }
        prev_ll = ll;
        iterations += 1;

        let keep: Vec<usize> = (0..alphas.len()).filter(|&j| mass[j] >= COLLAPSE_MASS).collect();
        if keep.len() < alphas.len() {
            for j in (0..alphas.len()).filter(|j| !keep.contains(j)) {
                warnings.push(format!(
                    "component with rate {:.6e} collapsed at iteration {iterations} and was dropped",
                    lambdas[j]
                ));
            }
            dropped += alphas.len() - keep.len();
        }
        let kept_mass: f64 = keep.iter().map(|&j| mass[j]).sum();
        alphas = keep.iter().map(|&j| mass[j] / kept_mass).collect();
        lambdas = keep.iter().map(|&j| mass[j] / moment[j]).collect();
    }
    if !converged {
        // Record the likelihood of the final update too.
        trace.push(log_likelihood(samples, &HyperExpDist::from_weights(alphas.clone(), lambdas.clone())?));
        warnings.push(format!("EM stopped after {} iterations without converging", opts.max_iter));
    }

    let mut dist = HyperExpDist::from_weights(alphas, lambdas)?;
    let merged_before = dist.len();
    dist = merge_close_rates(dist)?;
    let merged = merged_before - dist.len();
    if merged > 0 {
        warnings.push(format!("merged {merged} component(s) with rates within {}%", MERGE_GAP * 100.0));
    }
    let log_likelihood = if merged > 0 || !converged {
        log_likelihood(samples, &dist)
    } else {
        *trace.last().expect("at least one iteration ran")
    };
    Ok(FitResult {
        dist,
        log_likelihood,
        iterations,
        converged,
        trace,
        dropped,
        merged,
        warnings,
    })
}

/// Merge neighbouring components whose rates differ by less than
/// [`MERGE_GAP`]; the merged component keeps the pair's weight and mean.
fn merge_close_rates(dist: HyperExpDist) -> Result<HyperExpDist> {
    let mut alphas: Vec<f64> = Vec::new();
    let mut lambdas: Vec<f64> = Vec::new();
    for (a, l) in dist.components() {
        match (alphas.last_mut(), lambdas.last_mut()) {
            (Some(pa), Some(pl)) if (l - *pl) / l < MERGE_GAP => {
                let mean = *pa / *pl + a / l;
                *pa += a;
                *pl = *pa / mean;
            }
            _ => {
                alphas.push(a);
                lambdas.push(l);
            }
        }
    }
    HyperExpDist::from_weights(alphas, lambdas)
}
