use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::Context;
use oppaccess::fit::{em_fit, tail_diagnostics, windowed_fit, EmOptions};
use oppaccess::io::{read_trace, write_trace};
use oppaccess::rng::derive_seed;
use oppaccess::simulate::{run_with, SimOptions};
use oppaccess::strategies::{predict, PtsiMode, Strategy, StrategyKind};
use oppaccess::{HyperExpDist, IdleTrace, SmmppModel};

use crate::config::{check_budget, config_err, ConfigError, ExperimentConfig, TrafficSource};
use crate::report::{commented, emit, provenance, result_row, windows_table, RESULT_COLUMNS};
use crate::{CompareArgs, DiagnoseArgs, EvalArgs, FitArgs, GenerateArgs, Selection, SweepArgs};

fn trace_seed(seed: u64, variant: u64) -> u64 {
    derive_seed(seed, 2 * variant)
}

fn sim_seed(seed: u64, variant: u64) -> u64 {
    derive_seed(seed, 2 * variant + 1)
}

fn load_trace(path: &Path) -> anyhow::Result<IdleTrace> {
    let file = File::open(path).with_context(|| format!("opening trace {}", path.display()))?;
    read_trace(BufReader::new(file)).with_context(|| format!("reading trace {}", path.display()))
}

fn generate_from(traffic: &TrafficSource, cycles: Option<usize>, seed: u64) -> anyhow::Result<IdleTrace> {
    match (traffic, cycles) {
        (TrafficSource::Model(m), Some(n)) => Ok(m.generate(n, seed)?),
        (TrafficSource::Model(_), None) => config_err("trace.cycles is required to generate from a stationary model"),
        (TrafficSource::Schedule(s), None) => Ok(s.generate(seed)?),
        (TrafficSource::Schedule(_), Some(_)) => {
            config_err("trace.cycles conflicts with [traffic] segments, which fix the cycle counts")
        }
    }
}

/// The trace under evaluation: `--trace`, else `trace.file`, else generated.
fn trace_for(cfg: &ExperimentConfig, select: &Selection, traffic: &TrafficSource, seed: u64) -> anyhow::Result<IdleTrace> {
    if let Some(p) = &select.trace {
        return load_trace(p);
    }
    match &cfg.trace.file {
        Some(_) if cfg.trace.cycles.is_some() => config_err("[trace] takes either file or cycles, not both"),
        Some(f) => load_trace(&cfg.resolve(f)),
        None => generate_from(traffic, cfg.trace.cycles, seed),
    }
}

fn ptsi_filter(cfg: &ExperimentConfig, select: &Selection) -> anyhow::Result<Option<PtsiMode>> {
    match select.ptsi.as_ref().or(cfg.strategy.ptsi.as_ref()) {
        Some(p) => Ok(Some(p.parse().map_err(|e: oppaccess::Error| ConfigError(e.to_string()))?)),
        None => Ok(None),
    }
}

/// Requested strategy kinds, checked against the PTSI filter.
fn kinds(cfg: &ExperimentConfig, select: &Selection) -> anyhow::Result<Vec<StrategyKind>> {
    let names = if select.strategies.is_empty() { &cfg.strategy.names } else { &select.strategies };
    let ptsi = ptsi_filter(cfg, select)?;
    if names.is_empty() {
        return Ok(StrategyKind::CONSTRUCTED
            .into_iter()
            .filter(|k| ptsi.is_none_or(|p| k.mode() == p))
            .collect());
    }
    names
        .iter()
        .map(|n| {
            let k: StrategyKind = n.parse().map_err(|e: oppaccess::Error| ConfigError(e.to_string()))?;
            match ptsi {
                Some(p) if k.mode() != p => config_err(format!("strategy {k} needs {} PTSI, not {p}", k.mode())),
                _ => Ok(k),
            }
        })
        .collect()
}

fn single_eta(cfg: &ExperimentConfig, select: &Selection) -> anyhow::Result<f64> {
    match select.eta.as_slice() {
        [] => cfg.strategy.eta.ok_or_else(|| ConfigError("no collision budget: set strategy.eta or --eta".into()).into()),
        [eta] => Ok(*eta),
        _ => config_err("this command takes a single --eta"),
    }
}

struct Setup {
    cfg: ExperimentConfig,
    seed: u64,
    epsilon: f64,
    window: usize,
}

fn setup(config: &Path, seed: Option<u64>, select: Option<&Selection>) -> anyhow::Result<Setup> {
    let cfg = ExperimentConfig::load(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    let epsilon = select.and_then(|s| s.epsilon).unwrap_or(cfg.strategy.epsilon);
    let window = select.and_then(|s| s.window).unwrap_or(cfg.eval.window);
    if window == 0 {
        return config_err("window must be at least one cycle");
    }
    Ok(Setup { cfg, seed, epsilon, window })
}

pub fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let Setup { cfg, seed, .. } = setup(&args.common.config, args.common.seed, None)?;
    let traffic = cfg.traffic()?;
    let cycles = args.cycles.or(cfg.trace.cycles);
    let mut trace = generate_from(&traffic, cycles, trace_seed(seed, 0))?;
    if args.unlabeled {
        trace = trace.without_labels();
    }
    let header = provenance("generate", seed, &cfg, &args.common.config);
    let mut buf = Vec::new();
    write_trace(&mut buf, &trace, &header)?;
    emit(args.common.out.as_deref(), std::str::from_utf8(&buf)?)
}

pub fn fit(args: FitArgs) -> anyhow::Result<()> {
    let trace = load_trace(&args.trace)?;
    let opts = EmOptions {
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let n = args.components;
    let Some(group_size) = args.group_size else {
        let fit = em_fit(trace.durations(), n, None, opts)?;
        eprintln!(
            "{} samples, {} components: log-likelihood {:.6}, {} iterations, {}",
            trace.len(),
            fit.dist.len(),
            fit.log_likelihood,
            fit.iterations,
            if fit.converged { "converged" } else { "not converged" }
        );
        for w in &fit.warnings {
            eprintln!("warning: {w}");
        }
        let json = serde_json::to_string_pretty(&fit.dist)? + "\n";
        return emit(args.out.as_deref(), &json);
    };

    let w = windowed_fit(trace.durations(), group_size, n, opts)?;
    let header = vec![
        format!("oppaccess fit {}", env!("CARGO_PKG_VERSION")),
        format!("trace {}, {} samples", args.trace.display(), trace.len()),
        format!("components = {n}, group_size = {group_size}, tol = {}, max_iter = {}", args.tol, args.max_iter),
    ];
    let mut table = String::from("group,start,status");
    for k in 0..n {
        let _ = write!(table, ",alpha{k}");
    }
    for k in 0..n {
        let _ = write!(table, ",lambda{k}");
    }
    table.push_str(",log_likelihood,iterations\n");
    for g in &w.groups {
        let _ = write!(table, "{},{}", g.index, g.start);
        match &g.result {
            Ok(f) => {
                let status = if f.dist.len() < n { "reduced" } else if f.converged { "ok" } else { "not_converged" };
                let _ = write!(table, ",{status}");
                for k in 0..n {
                    table.push(',');
                    if let Some(a) = f.dist.alphas().get(k) {
                        let _ = write!(table, "{a}");
                    }
                }
                for k in 0..n {
                    table.push(',');
                    if let Some(l) = f.dist.lambdas().get(k) {
                        let _ = write!(table, "{l}");
                    }
                }
                let _ = writeln!(table, ",{},{}", f.log_likelihood, f.iterations);
            }
            Err(e) => {
                let _ = writeln!(table, ",failed: {}{}", e.to_string().replace(',', ";"), ",".repeat(2 * n + 2));
            }
        }
    }
    emit(args.out.as_deref(), &commented(&header, &table))?;

    let mut summary = String::from("param,count,min,q1,median,q3,max,iqr\n");
    for p in &w.summary {
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            p.name, p.count, p.min, p.q1, p.median, p.q3, p.max, p.iqr()
        );
    }
    match &args.summary {
        Some(path) => emit(Some(path), &commented(&header, &summary)),
        None => {
            eprint!("{summary}");
            Ok(())
        }
    }
}

fn build(kind: StrategyKind, model: &SmmppModel, eta: f64, epsilon: f64) -> anyhow::Result<Strategy> {
    kind.build(model, eta, epsilon).with_context(|| format!("building {kind} at eta = {eta}"))
}

pub fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let Setup { cfg, seed, epsilon, window } = setup(&args.common.config, args.common.seed, Some(&args.select))?;
    let eta = single_eta(&cfg, &args.select)?;
    check_budget(eta, epsilon)?;
    let kind = match kinds(&cfg, &args.select)?.as_slice() {
        [k] => *k,
        _ if args.select.strategies.is_empty() && cfg.strategy.names.is_empty() => match ptsi_filter(&cfg, &args.select)? {
            Some(PtsiMode::Statistical) => StrategyKind::StatOptimal,
            Some(PtsiMode::Markov) => StrategyKind::MarkovOptimal,
            Some(PtsiMode::Full) => StrategyKind::FullOptimal,
            None => return config_err("eval needs one strategy: pass --strategy or --ptsi"),
        },
        _ => return config_err("eval runs exactly one strategy; use compare for several"),
    };
    let model = cfg.design_model()?;
    let traffic = cfg.traffic()?;
    let s = build(kind, &model, eta, epsilon)?;
    let trace = trace_for(&cfg, &args.select, &traffic, trace_seed(seed, 0))?;
    let r = run_with(&trace, &s, sim_seed(seed, 0), SimOptions { window, eta: Some(eta) })?;
    let p = predict(&s, &model)?;

    let header = provenance("eval", seed, &cfg, &args.common.config);
    let body = format!("{RESULT_COLUMNS}\n{}\n", result_row(&s, eta, &p, Some(&r)));
    emit(args.common.out.as_deref(), &commented(&header, &body))?;
    if let Some(path) = &args.windows {
        let table = windows_table(&[(kind.to_string(), &r.window_collisions)]);
        emit(Some(path), &commented(&header, &table))?;
    }
    if let Some(path) = &args.save_strategy {
        emit(Some(path), &(serde_json::to_string_pretty(&s)? + "\n"))?;
    }
    Ok(())
}

pub fn compare(args: CompareArgs) -> anyhow::Result<()> {
    let Setup { cfg, seed, epsilon, window } = setup(&args.common.config, args.common.seed, Some(&args.select))?;
    let eta = single_eta(&cfg, &args.select)?;
    check_budget(eta, epsilon)?;
    let model = cfg.design_model()?;
    let traffic = cfg.traffic()?;
    let trace = trace_for(&cfg, &args.select, &traffic, trace_seed(seed, 0))?;
    let explicit = !(args.select.strategies.is_empty() && cfg.strategy.names.is_empty());
    let mut kinds = kinds(&cfg, &args.select)?;
    if !explicit && trace.states().is_none() {
        kinds.retain(|k| k.mode() == PtsiMode::Statistical);
        eprintln!("trace has no state labels; comparing statistical strategies only");
    }
    let strategies = kinds
        .iter()
        .map(|k| build(*k, &model, eta, epsilon))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let cmp = oppaccess::compare(&strategies, &trace, eta, sim_seed(seed, 0), window)?;

    let header = provenance("compare", seed, &cfg, &args.common.config);
    let mut body = format!("{RESULT_COLUMNS}\n");
    for (s, row) in strategies.iter().zip(&cmp.rows) {
        let p = predict(s, &model)?;
        let _ = writeln!(body, "{}", result_row(s, eta, &p, Some(&row.result)));
    }
    emit(args.common.out.as_deref(), &commented(&header, &body))?;
    if let Some(path) = &args.windows {
        let series: Vec<(String, &[f64])> = cmp
            .rows
            .iter()
            .map(|r| (r.strategy.clone(), r.result.window_collisions.as_slice()))
            .collect();
        emit(Some(path), &commented(&header, &windows_table(&series)))?;
    }
    Ok(())
}

pub fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    let Setup { cfg, seed, epsilon, window } = setup(&args.common.config, args.common.seed, Some(&args.select))?;
    let etas = if args.select.eta.is_empty() { cfg.sweep.etas.clone() } else { args.select.eta.clone() };
    if etas.is_empty() {
        return config_err("no budgets to sweep: set sweep.etas or --eta");
    }
    for eta in &etas {
        check_budget(*eta, epsilon)?;
    }
    let model = cfg.design_model()?;
    let kinds = kinds(&cfg, &args.select)?;

    // Traffic variants: the configured traffic, or its weights replaced in turn.
    let base = cfg.traffic()?;
    let variants: Vec<(String, TrafficSource)> = match &cfg.sweep.traffic_weights {
        None => vec![("configured".to_string(), base)],
        Some(list) => {
            let TrafficSource::Model(m) = &base else {
                return config_err("sweep.traffic_weights needs stationary traffic, not segments");
            };
            list.iter()
                .map(|w| {
                    let d = HyperExpDist::new(w.clone(), m.rates().to_vec())
                        .map_err(|e| ConfigError(format!("sweep.traffic_weights {w:?}: {e}")))?;
                    let label = w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("|");
                    Ok((label, TrafficSource::Model(SmmppModel::from_mixture(&d))))
                })
                .collect::<anyhow::Result<_>>()?
        }
    };

    let header = provenance("sweep", seed, &cfg, &args.common.config);
    let mut body = format!("traffic,{RESULT_COLUMNS}\n");
    for (v, (label, traffic)) in variants.iter().enumerate() {
        let trace = if args.predict_only {
            None
        } else {
            Some(trace_for(&cfg, &args.select, traffic, trace_seed(seed, v as u64))?)
        };
        for (e, eta) in etas.iter().enumerate() {
            for (k, kind) in kinds.iter().enumerate() {
                let s = build(*kind, &model, *eta, epsilon)?;
                let p = predict(&s, &model)?;
                let r = match &trace {
                    Some(t) => {
                        let cell = derive_seed(sim_seed(seed, v as u64), (e * kinds.len() + k) as u64);
                        Some(run_with(t, &s, cell, SimOptions { window, eta: Some(*eta) })?)
                    }
                    None => None,
                };
                let _ = writeln!(body, "{label},{}", result_row(&s, *eta, &p, r.as_ref()));
            }
        }
    }
    emit(args.common.out.as_deref(), &commented(&header, &body))
}

pub fn diagnose(args: DiagnoseArgs) -> anyhow::Result<()> {
    let trace = load_trace(&args.trace)?;
    let d = tail_diagnostics(trace.durations())?;
    let header = vec![
        format!("oppaccess diagnose {}", env!("CARGO_PKG_VERSION")),
        format!("trace {}, {} samples", args.trace.display(), trace.len()),
    ];
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    let body = format!(
        "knee,degenerate,pre_slope,pre_r2,post_slope,post_r2,residual\n{},{},{},{},{},{},{}\n",
        d.knee,
        d.degenerate,
        opt(d.pre_slope),
        opt(d.pre_r2),
        d.post_slope,
        d.post_r2,
        d.residual
    );
    emit(args.out.as_deref(), &commented(&header, &body))?;
    if let Some(path) = &args.points {
        let mut table = String::from("t,ccdf\n");
        for (t, c) in &d.points {
            let _ = writeln!(table, "{t},{c}");
        }
        emit(Some(path), &commented(&header, &table))?;
    }
    Ok(())
}
