//! Two-regime tail diagnostics of the empirical CCDF.
//!
//! Below the knee the CCDF is modelled as a power law (a line in
//! `log t, log CCDF`), above it as an exponential (a line in `t, log CCDF`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of knee positions tried.
pub const KNEE_CANDIDATES: usize = 50;
/// Smallest input accepted.
pub const MIN_SAMPLES: usize = 1000;
/// Fraction of the largest samples left out of the fits.
pub const TRIM_FRACTION: f64 = 1e-3;
/// Log-spaced abscissae at which the empirical CCDF is read off.
pub const EVAL_POINTS: usize = 200;
/// A knee further right must lower the combined residual by more than this
/// fraction to be preferred over one further left.
pub const PARSIMONY: f64 = 0.05;
const MIN_POST_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDiagnostics {
    /// Knee position in seconds.
    pub knee: f64,
    /// True when the knee sits at the smallest sample, i.e. no power-law regime.
    pub degenerate: bool,
    /// Slope of `log CCDF` against `log t` below the knee.
    pub pre_slope: Option<f64>,
    /// Slope of `log CCDF` against `t` above the knee, about `-λ_tail`.
    pub post_slope: f64,
    /// Coefficient of determination of each segment fit.
    pub pre_r2: Option<f64>,
    pub post_r2: f64,
    /// Combined squared residual at the chosen knee.
    pub residual: f64,
    /// Empirical CCDF points used, as `(t, ccdf)`.
    pub points: Vec<(f64, f64)>,
}

/// Running sums for a least-squares line through `(u, y)`.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: f64,
    u: f64,
    y: f64,
    uu: f64,
    uy: f64,
    yy: f64,
}

impl Sums {
    fn push(&mut self, u: f64, y: f64) {
        self.n += 1.0;
        self.u += u;
        self.y += y;
        self.uu += u * u;
        self.uy += u * y;
        self.yy += y * y;
    }

    fn minus(&self, o: &Sums) -> Sums {
        Sums {
            n: self.n - o.n,
            u: self.u - o.u,
            y: self.y - o.y,
            uu: self.uu - o.uu,
            uy: self.uy - o.uy,
            yy: self.yy - o.yy,
        }
    }

    /// `(slope, residual sum of squares, r²)`.
    fn fit(&self) -> Option<(f64, f64, f64)> {
        if self.n < 2.0 {
            return None;
        }
        let suu = self.uu - self.u * self.u / self.n;
        let suy = self.uy - self.u * self.y / self.n;
        let syy = self.yy - self.y * self.y / self.n;
        if suu <= 0.0 {
            return None;
        }
        let slope = suy / suu;
        let sse = (syy - slope * suy).max(0.0);
        let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
        Some((slope, sse, r2))
    }
}

/// Locate the power-law/exponential knee of the empirical CCDF.
///
/// The CCDF `P(X ≥ x_(i)) = (n - i)/n` is read at the sorted samples nearest
/// to a log-spaced grid, the top 0.1% excluded. Each of 50 log-spaced knee
/// candidates splits those points into a log-log and a linear-log segment;
/// the leftmost candidate within 5% of the smallest combined residual wins.
pub fn tail_diagnostics(samples: &[f64]) -> Result<TailDiagnostics> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Data(format!(
            "tail diagnostics need at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if let Some(x) = samples.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::Data(format!("sample {x} is not a positive duration")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let kept = n - (TRIM_FRACTION * n as f64).ceil() as usize;
    let (lo, hi) = (sorted[0], sorted[kept - 1]);
    if lo == hi {
        return Err(Error::Data("samples are all equal".into()));
    }

    let mut points: Vec<(f64, f64)> = Vec::with_capacity(EVAL_POINTS);
    let mut last = usize::MAX;
    for g in log_grid(lo, hi, EVAL_POINTS) {
        let i = sorted[..kept].partition_point(|x| *x < g).min(kept - 1);
        if i != last {
            points.push((sorted[i], (n - i) as f64 / n as f64));
            last = i;
        }
    }

    // Prefix sums: `pre[k]` covers points[..k].
    let mut pre = vec![Sums::default()];
    let mut post = vec![Sums::default()];
    for &(t, c) in &points {
        let (mut a, mut b) = (*pre.last().unwrap(), *post.last().unwrap());
        a.push(t.ln(), c.ln());
        b.push(t, c.ln());
        pre.push(a);
        post.push(b);
    }
    let all_post = *post.last().unwrap();
    let max_split = points.len().saturating_sub(MIN_POST_POINTS);
    let last_knee = points[max_split].0;

    let mut candidates = Vec::with_capacity(KNEE_CANDIDATES);
    for knee in log_grid(lo, last_knee, KNEE_CANDIDATES) {
        let k = points.partition_point(|(t, _)| *t < knee);
        let head = pre[k].fit();
        let Some(tail) = all_post.minus(&post[k]).fit() else {
            continue;
        };
        let head_sse = if k < 2 { 0.0 } else { head.map_or(0.0, |h| h.1) };
        candidates.push((knee, k, head_sse + tail.1, head, tail));
    }
    let best = candidates
        .iter()
        .map(|c| c.2)
        .fold(f64::INFINITY, f64::min);
    let chosen = candidates
        .iter()
        .find(|c| c.2 <= best * (1.0 + PARSIMONY) + f64::EPSILON)
        .ok_or_else(|| Error::Data("no knee candidate leaves a fittable tail".into()))?;
    let (knee, k, residual, head, tail) = *chosen;
    let degenerate = k == 0;
    Ok(TailDiagnostics {
        knee,
        degenerate,
        pre_slope: if k >= 2 { head.map(|h| h.0) } else { None },
        post_slope: tail.0,
        pre_r2: if k >= 2 { head.map(|h| h.2) } else { None },
        post_r2: tail.2,
        residual,
        points,
    })
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (hi / lo).ln() / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |k| if k + 1 == n { hi } else { lo * (step * k as f64).exp() })
}
