//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//!
//! [model]                      # design model the strategies are built for
//! rates = [5.0, 100.0, 6000.0]
//! transition = [[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]]
//!
//! [traffic]                    # optional; defaults to the design model
//! [[traffic.segments]]
//! cycles = 20000
//! rates = [160.0, 3670.0]
//! weights = [0.32, 0.68]
//!
//! [strategy]
//! names = ["stat_optimal", "multiple_shot"]
//! eta = 0.05
//! epsilon = 1e-3               # default
//!
//! [trace]
//! cycles = 100000              # or: file = "trace.csv"
//!
//! [eval]
//! window = 100                 # default
//!
//! [sweep]
//! etas = [0.01, 0.05, 0.1]
//! traffic_weights = [[0.5, 0.5], [0.9, 0.1]]
//! ```
//!
//! A model is given by exactly one of: `rates` with `transition`, `rates`
//! with `weights` (i.i.d. mixture), `file` (a JSON distribution record), or
//! `segments` (traffic only). Relative paths resolve against the directory of
//! the config file.

use std::fmt;
use std::path::{Path, PathBuf};

use oppaccess::smmpp::ScheduleSegment;
use oppaccess::strategies::DEFAULT_EPSILON;
use oppaccess::{HyperExpDist, NonstationarySchedule, SmmppModel};
use serde::Deserialize;

/// A problem with the configuration or command-line values (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(ConfigError(msg.into()).into())
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: Option<ModelSpec>,
    pub traffic: Option<ModelSpec>,
    #[serde(default)]
    pub strategy: StrategySpec,
    #[serde(default)]
    pub trace: TraceSpec,
    #[serde(default)]
    pub eval: EvalSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    /// Verbatim text, echoed into every report.
    #[serde(skip)]
    pub text: String,
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub rates: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    pub transition: Option<Vec<Vec<f64>>>,
    pub file: Option<PathBuf>,
    pub segments: Option<Vec<SegmentSpec>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub cycles: usize,
    pub rates: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    pub transition: Option<Vec<Vec<f64>>>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    #[serde(default)]
    pub names: Vec<String>,
    pub eta: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub ptsi: Option<String>,
}

impl Default for StrategySpec {
    fn default() -> Self {
        Self {
            names: Vec::new(),
            eta: None,
            epsilon: DEFAULT_EPSILON,
            ptsi: None,
        }
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub cycles: Option<usize>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    #[serde(default = "default_window")]
    pub window: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self { window: default_window() }
    }
}

fn default_window() -> usize {
    oppaccess::simulate::DEFAULT_WINDOW
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub etas: Vec<f64>,
    pub traffic_weights: Option<Vec<Vec<f64>>>,
}

/// Where the idle times under evaluation come from.
#[derive(Debug, Clone)]
pub enum TrafficSource {
    Model(SmmppModel),
    Schedule(NonstationarySchedule),
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.text = text.to_string();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// The model strategies are designed for.
    pub fn design_model(&self) -> anyhow::Result<SmmppModel> {
        match &self.model {
            Some(spec) => {
                if spec.segments.is_some() {
                    return config_err("[model] must be stationary; put schedules under [traffic]");
                }
                self.stationary(spec.rates.clone(), spec.weights.clone(), spec.transition.clone(), spec.file.as_deref(), "model")
            }
            None => config_err("missing [model] section"),
        }
    }

    /// The traffic that generates traces: `[traffic]` if present, else the design model.
    pub fn traffic(&self) -> anyhow::Result<TrafficSource> {
        let Some(spec) = &self.traffic else {
            return Ok(TrafficSource::Model(self.design_model()?));
        };
        match &spec.segments {
            Some(segments) => {
                if spec.rates.is_some() || spec.weights.is_some() || spec.transition.is_some() || spec.file.is_some() {
                    return config_err("[traffic] takes either segments or a single model, not both");
                }
                let segments = segments
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        Ok(ScheduleSegment {
                            cycles: s.cycles,
                            model: self.stationary(
                                s.rates.clone(),
                                s.weights.clone(),
                                s.transition.clone(),
                                s.file.as_deref(),
                                &format!("traffic segment {i}"),
                            )?,
                        })
                    })
                    .collect::<anyhow::Result<_>>()?;
                Ok(TrafficSource::Schedule(NonstationarySchedule::new(segments)?))
            }
            None => Ok(TrafficSource::Model(self.stationary(
                spec.rates.clone(),
                spec.weights.clone(),
                spec.transition.clone(),
                spec.file.as_deref(),
                "traffic",
            )?)),
        }
    }

    fn stationary(
        &self,
        rates: Option<Vec<f64>>,
        weights: Option<Vec<f64>>,
        transition: Option<Vec<Vec<f64>>>,
        file: Option<&Path>,
        what: &str,
    ) -> anyhow::Result<SmmppModel> {
        match (rates, weights, transition, file) {
            (Some(r), None, Some(p), None) => Ok(SmmppModel::new(r, p).map_err(|e| ConfigError(format!("{what}: {e}")))?),
            (Some(r), Some(w), None, None) => {
                let d = HyperExpDist::new(w, r).map_err(|e| ConfigError(format!("{what}: {e}")))?;
                Ok(SmmppModel::from_mixture(&d))
            }
            (None, None, None, Some(f)) => {
                let path = self.resolve(f);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ConfigError(format!("{what}: cannot read {}: {e}", path.display())))?;
                let d: HyperExpDist = serde_json::from_str(&text)
                    .map_err(|e| ConfigError(format!("{what}: {}: {e}", path.display())))?;
                Ok(SmmppModel::from_mixture(&d))
            }
            _ => config_err(format!(
                "{what}: give exactly one of rates+transition, rates+weights, or file"
            )),
        }
    }
}

/// Check η and ε against the configuration invariants.
pub fn check_budget(eta: f64, epsilon: f64) -> anyhow::Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return config_err(format!("eta must lie in (0, 1), got {eta}"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0 - eta) {
        return config_err(format!("epsilon must lie in (0, 1 - eta) = (0, {}), got {epsilon}", 1.0 - eta));
    }
    Ok(())
}
