//! Fitting consecutive groups of samples, to expose drift in the parameters.

use serde::{Deserialize, Serialize};

use super::{em_fit, EmOptions, FitResult, MIN_SAMPLES_PER_COMPONENT};
use crate::error::{Error, Result};

/// Fit of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupFit {
    pub index: usize,
    /// Index of the group's first sample.
    pub start: usize,
    pub result: Result<FitResult>,
}

/// Five-number summary of one parameter across groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    /// `alpha{k}` or `lambda{k}`, `k` counting components by ascending rate.
    pub name: String,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl ParamSummary {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedFit {
    pub group_size: usize,
    pub groups: Vec<GroupFit>,
    /// Summaries over groups that kept all requested components.
    pub summary: Vec<ParamSummary>,
}

impl WindowedFit {
    pub fn failed(&self) -> usize {
        self.groups.iter().filter(|g| g.result.is_err()).count()
    }

    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.summary.iter().find(|p| p.name == name)
    }
}

/// Split `samples` into consecutive groups of `group_size` (a trailing
/// partial group is ignored) and fit `n` components to each.
pub fn windowed_fit(samples: &[f64], group_size: usize, n: usize, opts: EmOptions) -> Result<WindowedFit> {
    if n == 0 {
        return Err(Error::Parameter("need at least one component".into()));
    }
    if group_size < MIN_SAMPLES_PER_COMPONENT * n {
        return Err(Error::Parameter(format!(
            "group size {group_size} is below {} for {n} components",
            MIN_SAMPLES_PER_COMPONENT * n
        )));
    }
    if samples.len() < group_size {
        return Err(Error::Data(format!(
            "{} samples do not fill one group of {group_size}",
            samples.len()
        )));
    }
    let groups: Vec<GroupFit> = samples
        .chunks_exact(group_size)
        .enumerate()
        .map(|(index, chunk)| GroupFit {
            index,
            start: index * group_size,
            result: em_fit(chunk, n, None, opts),
        })
        .collect();

    let complete: Vec<&FitResult> = groups
        .iter()
        .filter_map(|g| g.result.as_ref().ok())
        .filter(|f| f.dist.len() == n)
        .collect();
    let mut summary = Vec::new();
    if !complete.is_empty() {
        for k in 0..n {
            summary.push(five_numbers(format!("alpha{k}"), complete.iter().map(|f| f.dist.alphas()[k])));
        }
        for k in 0..n {
            summary.push(five_numbers(format!("lambda{k}"), complete.iter().map(|f| f.dist.lambdas()[k])));
        }
    }
    Ok(WindowedFit {
        group_size,
        groups,
        summary,
    })
}

fn five_numbers(name: String, values: impl Iterator<Item = f64>) -> ParamSummary {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    ParamSummary {
        name,
        count: v.len(),
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
    }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::HyperExpDist;
    use crate::rng::seeded;

    #[test]
    fn quartiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
        assert_eq!(quantile(&[7.0], 0.75), 7.0);
    }

    #[test]
    fn group_count_and_order() {
        let d = HyperExpDist::new(vec![0.32, 0.68], vec![160.0, 3670.0]).unwrap();
        let xs = d.sample_n(10_500, &mut seeded(4));
        let w = windowed_fit(&xs, 1000, 2, EmOptions::default()).unwrap();
        assert_eq!(w.groups.len(), 10);
        assert!(w.groups.iter().enumerate().all(|(i, g)| g.index == i && g.start == 1000 * i));
        assert_eq!(w.summary.len(), 4);
        let l0 = w.param("lambda0").unwrap();
        assert!(l0.min <= l0.q1 && l0.q1 <= l0.median && l0.median <= l0.q3 && l0.q3 <= l0.max);
    }

    #[test]
    fn parameter_checks() {
        assert!(matches!(windowed_fit(&[1.0; 100], 15, 2, EmOptions::default()), Err(Error::Parameter(_))));
        assert!(matches!(windowed_fit(&[1.0; 10], 20, 2, EmOptions::default()), Err(Error::Data(_))));
    }
}
