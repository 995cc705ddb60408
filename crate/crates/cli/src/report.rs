//! Comma-separated report tables with a commented provenance header.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use oppaccess::simulate::SimResult;
use oppaccess::strategies::{Strategy, StrategyPrediction};

use crate::config::ExperimentConfig;

/// Header lines (without `#`) naming the command, seed and the verbatim config.
pub fn provenance(command: &str, seed: u64, cfg: &ExperimentConfig, path: &Path) -> Vec<String> {
    let mut lines = vec![
        format!("oppaccess {command} {}", env!("CARGO_PKG_VERSION")),
        format!("seed = {seed}"),
        format!("config {}:", path.display()),
    ];
    lines.extend(cfg.text.lines().map(|l| format!("> {l}")));
    lines
}

pub fn commented(header: &[String], body: &str) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str(body);
    out
}

pub fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub const RESULT_COLUMNS: &str = "strategy,ptsi,eta,predicted_capacity,predicted_collision,\
cycles,capacity,capacity_se,collision,collision_se,outage";

/// One row of [`RESULT_COLUMNS`]; simulation columns stay empty without a result.
pub fn result_row(s: &Strategy, eta: f64, p: &StrategyPrediction, r: Option<&SimResult>) -> String {
    let mut row = format!(
        "{},{},{eta},{:.9e},{:.9e}",
        s.kind, s.mode, p.capacity, p.collision
    );
    match r {
        Some(r) => {
            let _ = write!(
                row,
                ",{},{:.9e},{:.3e},{:.6},{:.3e},{}",
                r.cycles,
                r.capacity,
                r.capacity_se,
                r.collision,
                r.collision_se,
                r.outage.map_or(String::new(), |o| format!("{o:.6}"))
            );
        }
        None => row.push_str(",,,,,,"),
    }
    row
}

/// Per-window collision rates, one column per labelled series.
pub fn windows_table(series: &[(String, &[f64])]) -> String {
    let mut out = String::from("window");
    for (name, _) in series {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let len = series.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    for w in 0..len {
        out.push_str(&w.to_string());
        for (_, s) in series {
            out.push(',');
            if let Some(v) = s.get(w) {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    out
}
