//! The pipeline stages behind the CLI subcommands. Each stage reads the
//! configured source data, writes its files under the output directory and
//! refreshes `manifest.json` at the output root.
//!
//! Layout of the output directory:
//!
//! ```text
//! ingest/    universe.csv, panel.csv, coverage.csv
//! features/  features.csv, missing.csv
//! graphs/    stage.json, plans.json, summary.csv, sequences/<key>/stride-<s>/<date>.{csv,json}
//! backtest/  metrics.json, performance_{raw,scaled}.csv, returns.csv, turnover.csv,
//!            cost_curve.csv, diversification.csv, splits.csv, topology.csv,
//!            clusters.csv, signals/<run>.csv, coefficients/<model>{,_long}.csv
//! report/    manifest.json, tables/*, figures/*
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{spectral_clustering, topology_series, TopologyStats};
use crate::backtest::{
    graph_key, learn_split_graphs, plan_splits, run_backtest, GraphStore, GraphVariant, PerfReport, SplitPlan,
    WalkForwardConfig, WalkForwardResult,
};
use crate::config::RunConfig;
use crate::features::{raw_feature_series, winsorize, FeatureHistory, FEATURE_NAMES};
use crate::graph::GraphSnapshot;
use crate::market_data::{
    load_prices, load_universe, synth_market, write_prices, write_universe, AssetClass, PricePanel, SynthMarket,
};
use crate::output::{
    num, opt_num, panel_fingerprint, read_graph_sequence, read_json, write_csv, write_graph_sequence, write_json,
    write_manifest, RunManifest,
};
use crate::strategies::coefficient_report;
use crate::{Error, Result, N_FEATURES};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StageOptions {
    /// Reuse graphs and searches already on disk when their stage hash matches.
    pub resume: bool,
}

fn stage_dir(config: &RunConfig, stage: &str) -> PathBuf {
    config.paths.output.join(stage)
}

fn refresh_manifest(config: &RunConfig) -> Result<RunManifest> {
    write_manifest(&config.paths.output, &config.hash(), config.seed)
}

/// Universe and prices from the configured source paths.
pub fn load_panel(config: &RunConfig) -> Result<PricePanel<f64>> {
    let universe = load_universe(&config.paths.universe)?;
    if universe.is_empty() {
        return Err(Error::Data(format!("{}: universe is empty", config.paths.universe.display())));
    }
    load_prices(&config.paths.prices, &universe)
}

/// Generates the configured synthetic market and writes it to the universe
/// and price paths.
pub fn cmd_synth(config: &RunConfig) -> Result<SynthMarket> {
    let synth = config
        .synth
        .as_ref()
        .ok_or_else(|| Error::Config("the [synth] section is required to generate data".into()))?;
    let market = synth_market(synth, config.seed)?;
    write_universe(&config.paths.universe, market.panel.assets())?;
    write_prices(&config.paths.prices, &market.panel)?;
    info!(
        "wrote {} synthetic assets over {} days to {}",
        market.panel.n_assets(),
        market.panel.n_days(),
        config.paths.prices.display()
    );
    Ok(market)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassCoverage {
    pub class: AssetClass,
    pub n_assets: usize,
    pub n_days: usize,
    /// Asset-days with a price.
    pub observed: usize,
    pub coverage: f64,
}

/// Price availability per asset class over the aligned calendar.
pub fn coverage_by_class(panel: &PricePanel<f64>) -> Vec<ClassCoverage> {
    AssetClass::ALL
        .iter()
        .filter_map(|&class| {
            let members: Vec<usize> = (0..panel.n_assets()).filter(|&a| panel.assets()[a].asset_class == class).collect();
            if members.is_empty() {
                return None;
            }
            let observed = members.iter().map(|&a| panel.series(a).iter().filter(|p| p.is_some()).count()).sum();
            let cells = members.len() * panel.n_days();
            Some(ClassCoverage {
                class,
                n_assets: members.len(),
                n_days: panel.n_days(),
                observed,
                coverage: if cells == 0 { 0.0 } else { observed as f64 / cells as f64 },
            })
        })
        .collect()
}

/// Validates the source data and writes the aligned panel and coverage.
pub fn cmd_ingest(config: &RunConfig) -> Result<Vec<ClassCoverage>> {
    let panel = load_panel(config)?;
    let dir = stage_dir(config, "ingest");
    write_universe(dir.join("universe.csv"), panel.assets())?;
    let mut header = vec!["date"];
    header.extend(panel.assets().iter().map(|a| a.ticker.as_str()));
    let rows = (0..panel.n_days()).map(|t| {
        std::iter::once(panel.calendar().date(t).to_string())
            .chain((0..panel.n_assets()).map(|a| opt_num(panel.price(a, t))))
            .collect::<Vec<_>>()
    });
    write_csv(dir.join("panel.csv"), &header, rows)?;
    let coverage = coverage_by_class(&panel);
    write_csv(
        dir.join("coverage.csv"),
        &["class", "n_assets", "n_days", "observed", "coverage"],
        coverage.iter().map(|c| {
            [
                c.class.to_string(),
                c.n_assets.to_string(),
                c.n_days.to_string(),
                c.observed.to_string(),
                num(c.coverage),
            ]
        }),
    )?;
    for c in &coverage {
        info!("{}: {} assets, coverage {:.1}%", c.class, c.n_assets, 100.0 * c.coverage);
    }
    refresh_manifest(config)?;
    Ok(coverage)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeatureMissing {
    pub feature: String,
    pub missing_frac: f64,
}

/// Share of asset-days without each winsorized feature, plus the share
/// without a complete row (`all`).
pub fn feature_missing(panel: &PricePanel<f64>, history: &FeatureHistory<f64>, config: &RunConfig) -> Result<Vec<FeatureMissing>> {
    let cells = (panel.n_assets() * panel.n_days()).max(1) as f64;
    let mut missing = [0usize; N_FEATURES];
    for a in 0..panel.n_assets() {
        for (k, raw) in raw_feature_series(panel.series(a)).iter().enumerate() {
            missing[k] += winsorize(raw, config.features.winsor)?.iter().filter(|v| v.is_none()).count();
        }
    }
    let incomplete = (0..history.n_assets())
        .map(|a| (0..history.n_days()).filter(|&t| history.row(a, t).is_none()).count())
        .sum::<usize>();
    Ok(FEATURE_NAMES
        .iter()
        .zip(missing)
        .map(|(name, m)| (name.to_string(), m))
        .chain(std::iter::once(("all".to_string(), incomplete)))
        .map(|(feature, m)| FeatureMissing {
            feature,
            missing_frac: m as f64 / cells,
        })
        .collect())
}

/// Computes the feature history and dumps every complete row.
pub fn cmd_features(config: &RunConfig) -> Result<Vec<FeatureMissing>> {
    let panel = load_panel(config)?;
    let history = FeatureHistory::compute(&panel, &config.features)?;
    let dir = stage_dir(config, "features");
    let mut header = vec!["date", "ticker"];
    header.extend(FEATURE_NAMES);
    header.push("sigma");
    let mut rows = Vec::new();
    for t in 0..history.n_days() {
        for a in 0..history.n_assets() {
            if let Some(row) = history.row(a, t) {
                let mut rec = vec![history.calendar().date(t).to_string(), history.assets()[a].ticker.clone()];
                rec.extend(row.iter().map(|&v| num(v)));
                rec.push(opt_num(history.sigma(a, t)));
                rows.push(rec);
            }
        }
    }
    write_csv(dir.join("features.csv"), &header, rows)?;
    let missing = feature_missing(&panel, &history, config)?;
    write_csv(
        dir.join("missing.csv"),
        &["feature", "missing_frac"],
        missing.iter().map(|m| [m.feature.clone(), num(m.missing_frac)]),
    )?;
    for m in &missing {
        info!("{}: {:.2}% missing", m.feature, 100.0 * m.missing_frac);
    }
    refresh_manifest(config)?;
    Ok(missing)
}

/// Everything the stored searches and graphs depend on.
#[derive(Serialize)]
struct GraphInputs<'a> {
    data: String,
    features: &'a crate::features::FeatureConfig<f64>,
    lookbacks: &'a [usize],
    max_missing_frac: f64,
    alpha_grid: &'a [f64],
    beta_grid: &'a [f64],
    stride: usize,
    search_stride: usize,
    tol: f64,
    max_iter: usize,
    unit_mean_scaling: bool,
    first_test_year: i32,
    step_years: u32,
    validation_frac: f64,
    sigma_target: f64,
}

/// Hash keying the graph stage's cache.
pub fn graph_stage_hash(config: &RunConfig, panel: &PricePanel<f64>) -> String {
    let g = &config.graph;
    let b = &config.backtest;
    let inputs = GraphInputs {
        data: panel_fingerprint(panel),
        features: &config.features,
        lookbacks: &g.lookbacks,
        max_missing_frac: g.max_missing_frac,
        alpha_grid: &g.alpha_grid,
        beta_grid: &g.beta_grid,
        stride: g.stride,
        search_stride: g.search_stride,
        tol: g.tol,
        max_iter: g.max_iter,
        unit_mean_scaling: g.unit_mean_scaling,
        first_test_year: b.first_test_year,
        step_years: b.step_years,
        validation_frac: b.validation_frac,
        sigma_target: b.sigma_target,
    };
    hex::encode(Sha256::digest(serde_json::to_vec(&inputs).expect("inputs serialize")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct StageStamp {
    stage_hash: String,
}

fn sequence_dir(graphs_dir: &Path, key: &str, stride: usize) -> PathBuf {
    graphs_dir.join("sequences").join(key).join(format!("stride-{stride}"))
}

fn stored_keys(plans: &[SplitPlan], wf: &WalkForwardConfig) -> BTreeSet<String> {
    plans
        .iter()
        .filter_map(|p| p.hyper)
        .flat_map(|hp| wf.graph_variants().into_iter().map(move |v| graph_key(v, hp)))
        .collect()
}

#[derive(Clone, Debug)]
pub struct GraphsSummary {
    pub plans: Vec<SplitPlan>,
    pub sequences: usize,
    pub days_written: usize,
    pub solver_failures: usize,
}

/// Runs the hyperparameter searches and learns every graph the configured
/// runs need. With `resume`, searches and graph days already stored under the
/// same stage hash are reused; otherwise the graph directory is rebuilt.
pub fn cmd_graphs(config: &RunConfig, opts: StageOptions) -> Result<GraphsSummary> {
    let panel = load_panel(config)?;
    let history = FeatureHistory::compute(&panel, &config.features)?;
    let wf = config.walk_forward();
    let dir = stage_dir(config, "graphs");
    let stamp = StageStamp {
        stage_hash: graph_stage_hash(config, &panel),
    };
    let stamp_path = dir.join("stage.json");
    let plans_path = dir.join("plans.json");
    let reusable = opts.resume && stamp_path.exists() && read_json::<StageStamp>(&stamp_path)? == stamp;
    if !reusable {
        if opts.resume && stamp_path.exists() {
            warn!("stored graphs were built from different inputs; rebuilding");
        }
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
    }
    write_json(&stamp_path, &stamp)?;

    let plans: Vec<SplitPlan> = if reusable && plans_path.exists() {
        info!("reusing hyperparameter searches from {}", plans_path.display());
        read_json(&plans_path)?
    } else {
        let p = plan_splits(&history, &wf)?;
        write_json(&plans_path, &p)?;
        p
    };

    let calendar = history.calendar();
    let mut store = GraphStore::new();
    if reusable {
        for key in stored_keys(&plans, &wf) {
            let seq = read_graph_sequence(&sequence_dir(&dir, &key, wf.graph_stride), calendar, wf.graph_stride)?;
            if !seq.graphs.is_empty() {
                info!("{key}: {} stored days", seq.graphs.len());
                store.insert(key, seq);
            }
        }
    }
    let mut days_written = 0;
    for plan in &plans {
        learn_split_graphs(&history, plan, &wf, &mut store)?;
        for (key, seq) in &store {
            days_written += write_graph_sequence(&sequence_dir(&dir, key, wf.graph_stride), seq, calendar, false)?;
        }
    }

    let mut summary = Vec::new();
    let mut solver_failures = 0;
    for (key, seq) in &store {
        let learned = seq.learned().count();
        let failures = seq.solver_failures();
        solver_failures += failures;
        summary.push([
            key.clone(),
            learned.to_string(),
            (seq.graphs.len() - learned).to_string(),
            failures.to_string(),
        ]);
    }
    write_csv(dir.join("summary.csv"), &["sequence", "learned_days", "empty_days", "solver_failures"], summary)?;
    refresh_manifest(config)?;
    if let Some(budget) = config.graph.max_solver_failures {
        if solver_failures > budget {
            return Err(Error::Solver(format!(
                "{solver_failures} window solves did not converge (budget {budget}); see graphs/summary.csv"
            )));
        }
    }
    Ok(GraphsSummary {
        sequences: store.len(),
        plans,
        days_written,
        solver_failures,
    })
}

/// Plans and graph sequences written by [`cmd_graphs`].
pub fn load_graph_store(config: &RunConfig, panel: &PricePanel<f64>) -> Result<(Vec<SplitPlan>, GraphStore)> {
    let wf = config.walk_forward();
    let dir = stage_dir(config, "graphs");
    let missing = |what: &str| {
        Error::Data(format!(
            "{what}; the configured runs need learned graphs, run `netmom graphs` with this config first"
        ))
    };
    let stamp_path = dir.join("stage.json");
    let plans_path = dir.join("plans.json");
    if !stamp_path.exists() || !plans_path.exists() {
        return Err(missing(&format!("no graph store at {}", dir.display())));
    }
    let stamp: StageStamp = read_json(&stamp_path)?;
    if stamp.stage_hash != graph_stage_hash(config, panel) {
        return Err(missing(&format!("graph store at {} was built from different inputs", dir.display())));
    }
    let plans: Vec<SplitPlan> = read_json(&plans_path)?;
    let mut store = GraphStore::new();
    for key in stored_keys(&plans, &wf) {
        let seq_dir = sequence_dir(&dir, &key, wf.graph_stride);
        if !seq_dir.is_dir() {
            return Err(missing(&format!("graph sequence {key} is not stored")));
        }
        store.insert(key, read_graph_sequence(&seq_dir, panel.calendar(), wf.graph_stride)?);
    }
    Ok((plans, store))
}

#[derive(Serialize)]
struct RunMetrics<'a> {
    name: &'a str,
    raw: &'a PerfReport<f64>,
    scaled: Option<&'a PerfReport<f64>>,
}

#[derive(Serialize)]
struct BacktestMetrics<'a> {
    config_hash: String,
    oos_start: NaiveDate,
    oos_end: NaiveDate,
    n_splits: usize,
    runs: Vec<RunMetrics<'a>>,
}

pub const PERFORMANCE_COLUMNS: [&str; 12] = [
    "strategy",
    "n_days",
    "annual_return",
    "volatility",
    "sharpe",
    "downside_deviation",
    "max_drawdown",
    "mdd_duration",
    "sortino",
    "calmar",
    "hit_rate",
    "avg_profit_over_loss",
];

fn performance_record(name: &str, m: &PerfReport<f64>) -> Vec<String> {
    vec![
        name.to_string(),
        m.n_days.to_string(),
        num(m.annual_return),
        num(m.volatility),
        opt_num(m.sharpe),
        num(m.downside_deviation),
        num(m.max_drawdown),
        num(m.mdd_duration),
        opt_num(m.sortino),
        opt_num(m.calmar),
        num(m.hit_rate),
        opt_num(m.avg_profit_over_loss),
    ]
}

/// Normalized full-universe graphs in force over each split's test span.
fn test_span_graphs(result: &WalkForwardResult, store: &GraphStore) -> Vec<(usize, GraphSnapshot<f64>)> {
    let mut out = Vec::new();
    for plan in &result.plans {
        let Some(hp) = plan.hyper else { continue };
        let Some(seq) = store.get(&graph_key(GraphVariant::Full, hp)) else {
            continue;
        };
        for (&day, g) in seq.graphs.range(plan.split.test.clone()) {
            if let Some(g) = g {
                out.push((day, crate::graph::normalize_graph(g)));
            }
        }
    }
    out
}

fn write_backtest(config: &RunConfig, history: &FeatureHistory<f64>, result: &WalkForwardResult, store: &GraphStore) -> Result<()> {
    let dir = stage_dir(config, "backtest");
    let calendar = history.calendar();
    let (first, last) = (result.plans.first().expect("non-empty"), result.plans.last().expect("non-empty"));
    write_json(
        dir.join("metrics.json"),
        &BacktestMetrics {
            config_hash: config.hash(),
            oos_start: first.split.test_dates.0,
            oos_end: last.split.test_dates.1,
            n_splits: result.plans.len(),
            runs: result
                .runs
                .iter()
                .map(|r| RunMetrics {
                    name: &r.name,
                    raw: &r.metrics_raw,
                    scaled: r.metrics_scaled.as_ref(),
                })
                .collect(),
        },
    )?;
    write_csv(
        dir.join("performance_raw.csv"),
        &PERFORMANCE_COLUMNS,
        result.runs.iter().map(|r| performance_record(&r.name, &r.metrics_raw)),
    )?;
    write_csv(
        dir.join("performance_scaled.csv"),
        &PERFORMANCE_COLUMNS,
        result
            .runs
            .iter()
            .filter_map(|r| r.metrics_scaled.as_ref().map(|m| performance_record(&r.name, m))),
    )?;

    let mut returns = Vec::new();
    for r in &result.runs {
        let raw = r.raw.by_day();
        let scaled = r.scaled.by_day();
        let days: BTreeSet<usize> = raw.keys().chain(scaled.keys()).copied().collect();
        for d in days {
            returns.push([
                calendar.date(d).to_string(),
                r.name.clone(),
                opt_num(raw.get(&d).copied()),
                opt_num(scaled.get(&d).copied()),
            ]);
        }
    }
    write_csv(dir.join("returns.csv"), &["date", "strategy", "raw_return", "scaled_return"], returns)?;
    write_csv(
        dir.join("turnover.csv"),
        &["date", "strategy", "turnover"],
        result.runs.iter().flat_map(|r| {
            r.turnover
                .iter()
                .map(|&(d, z)| [calendar.date(d).to_string(), r.name.clone(), num(z)])
        }),
    )?;
    write_csv(
        dir.join("cost_curve.csv"),
        &["strategy", "cost_bps", "sharpe", "sharpe_scaled"],
        result.runs.iter().flat_map(|r| {
            r.cost_curve
                .iter()
                .map(|c| [r.name.clone(), num(c.cost_bps), opt_num(c.sharpe_raw), opt_num(c.sharpe_scaled)])
        }),
    )?;
    write_csv(
        dir.join("diversification.csv"),
        &["a", "b", "correlation_raw", "correlation_scaled", "sign_agreement"],
        result.diversification().into_iter().map(|p| {
            [
                p.a,
                p.b,
                opt_num(p.correlation_raw),
                opt_num(p.correlation_scaled),
                opt_num(p.sign_agreement),
            ]
        }),
    )?;
    write_csv(
        dir.join("splits.csv"),
        &[
            "split",
            "label",
            "train_start",
            "train_end",
            "validation_start",
            "validation_end",
            "test_start",
            "test_end",
            "alpha",
            "beta",
            "validation_sharpe",
        ],
        result.plans.iter().map(|p| {
            let s = &p.split;
            let sharpe = p.search.as_ref().and_then(|o| o.points.iter().find(|q| q.hyper == o.best)).and_then(|q| q.sharpe);
            vec![
                s.index.to_string(),
                s.label(),
                s.train_dates.0.to_string(),
                s.train_dates.1.to_string(),
                s.validation_dates.0.to_string(),
                s.validation_dates.1.to_string(),
                s.test_dates.0.to_string(),
                s.test_dates.1.to_string(),
                opt_num(p.hyper.map(|h| h.alpha)),
                opt_num(p.hyper.map(|h| h.beta)),
                opt_num(sharpe),
            ]
        }),
    )?;

    for r in &result.runs {
        let s = &r.signals;
        let mut header = vec!["date"];
        header.extend(s.tickers.iter().map(String::as_str));
        let rows = (0..s.n_days())
            .filter(|&t| (0..s.n_assets()).any(|a| s.get(a, t).is_some()))
            .map(|t| {
                std::iter::once(s.dates[t].to_string())
                    .chain((0..s.n_assets()).map(|a| opt_num(s.get(a, t))))
                    .collect::<Vec<_>>()
            });
        write_csv(dir.join("signals").join(format!("{}.csv", r.name)), &header, rows)?;
    }

    let mut by_model: BTreeMap<&str, Vec<(String, String, crate::strategies::RegressionModel<f64>)>> = BTreeMap::new();
    for m in &result.models {
        by_model
            .entry(&m.model_name)
            .or_default()
            .push((m.period.clone(), m.model_name.clone(), m.model.clone()));
    }
    for (name, models) in by_model {
        let table = coefficient_report(&models);
        let wide = table.wide_records();
        let long = table.long_records();
        let header = |recs: &[Vec<String>]| recs[0].clone();
        let (wh, lh) = (header(&wide), header(&long));
        let coef_dir = dir.join("coefficients");
        write_csv(coef_dir.join(format!("{name}.csv")), &wh.iter().map(String::as_str).collect::<Vec<_>>(), wide.into_iter().skip(1))?;
        write_csv(coef_dir.join(format!("{name}_long.csv")), &lh.iter().map(String::as_str).collect::<Vec<_>>(), long.into_iter().skip(1))?;
    }

    let graphs = test_span_graphs(result, store);
    if !graphs.is_empty() {
        let classes: Vec<AssetClass> = history.assets().iter().map(|a| a.asset_class).collect();
        let stats: Vec<TopologyStats> = topology_series(
            graphs.iter().map(|(_, g)| g),
            &classes,
            config.graph.rel_eps,
            config.analysis.skip_low_degree,
        );
        write_csv(
            dir.join("topology.csv"),
            &["date", "n_nodes", "sparsity", "avg_degree", "clustering", "community_ratio", "jaccard"],
            stats.iter().map(|s| {
                [
                    s.date.to_string(),
                    s.n_nodes.to_string(),
                    num(s.sparsity),
                    num(s.avg_degree),
                    num(s.clustering),
                    num(s.community_ratio),
                    opt_num(s.jaccard),
                ]
            }),
        )?;
        let mut clusters = Vec::new();
        for plan in &result.plans {
            let Some((_, g)) = graphs.iter().find(|(d, _)| plan.split.test.contains(d)) else {
                continue;
            };
            let k = config.analysis.spectral_k.min(g.n_nodes());
            match spectral_clustering(g, k, config.seed) {
                Ok(labels) => {
                    for (t, c) in g.tickers.iter().zip(labels) {
                        clusters.push([plan.split.label(), g.date.to_string(), t.clone(), c.to_string()]);
                    }
                }
                Err(e) => warn!("split {}: spectral clustering skipped: {e}", plan.split.label()),
            }
        }
        write_csv(dir.join("clusters.csv"), &["split", "date", "ticker", "cluster"], clusters)?;
    }
    Ok(())
}

/// Runs every configured strategy and ablation over the walk-forward splits
/// and writes the reports. Graph-based runs read the store written by
/// [`cmd_graphs`].
pub fn cmd_backtest(config: &RunConfig) -> Result<WalkForwardResult> {
    let panel = load_panel(config)?;
    let history = FeatureHistory::compute(&panel, &config.features)?;
    let wf = config.walk_forward();
    let (plans, store) = if wf.needs_graphs() {
        load_graph_store(config, &panel)?
    } else {
        (plan_splits(&history, &wf)?, GraphStore::new())
    };
    let result = run_backtest(&history, &panel, &plans, &store, &wf)?;
    let dir = stage_dir(config, "backtest");
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    write_backtest(config, &history, &result, &store)?;
    for r in &result.runs {
        info!(
            "{}: sharpe {} (scaled {})",
            r.name,
            opt_num(r.metrics_raw.sharpe),
            opt_num(r.metrics_scaled.as_ref().and_then(|m| m.sharpe))
        );
    }
    refresh_manifest(config)?;
    Ok(result)
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = reader.headers().map_err(|e| Error::csv(path, e))?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(|e| Error::csv(path, e)))
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

fn parse_f64(s: &str, path: &Path) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Data(format!("{}: bad number `{s}`", path.display())))
}

#[derive(Clone, Debug)]
pub struct ReportSummary {
    pub files: usize,
    pub manifest: RunManifest,
}

/// Collects the backtest tables and writes plot-ready long-format files for
/// cumulative returns, cost curves, topology and correlations.
pub fn cmd_report(config: &RunConfig) -> Result<ReportSummary> {
    let src = stage_dir(config, "backtest");
    if !src.join("metrics.json").exists() {
        return Err(Error::Data(format!(
            "nothing to report: {} has no backtest results; run `netmom backtest` first",
            src.display()
        )));
    }
    let dir = stage_dir(config, "report");
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let tables = dir.join("tables");
    let figures = dir.join("figures");
    for name in [
        "metrics.json",
        "performance_raw.csv",
        "performance_scaled.csv",
        "splits.csv",
        "diversification.csv",
        "cost_curve.csv",
    ] {
        let from = src.join(name);
        let bytes = fs::read(&from).map_err(|e| Error::io(&from, e))?;
        crate::output::write_atomic(tables.join(name), &bytes)?;
    }
    let coef_dir = src.join("coefficients");
    if coef_dir.is_dir() {
        let mut names: Vec<_> = fs::read_dir(&coef_dir)
            .map_err(|e| Error::io(&coef_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.file_name()))
            .collect();
        names.sort();
        for name in names {
            let from = coef_dir.join(&name);
            let bytes = fs::read(&from).map_err(|e| Error::io(&from, e))?;
            crate::output::write_atomic(tables.join("coefficients").join(&name), &bytes)?;
        }
    }

    let path = src.join("returns.csv");
    let (_, rows) = read_records(&path)?;
    let mut equity: BTreeMap<(String, &str), f64> = BTreeMap::new();
    let mut cumulative = Vec::new();
    for row in &rows {
        for (kind, col) in [("raw", 2), ("scaled", 3)] {
            if let Some(r) = parse_f64(&row[col], &path)? {
                let e = equity.entry((row[1].clone(), kind)).or_insert(1.0);
                *e *= 1.0 + r;
                cumulative.push([row[0].clone(), row[1].clone(), kind.to_string(), num(*e)]);
            }
        }
    }
    write_csv(figures.join("cumulative_returns.csv"), &["date", "strategy", "kind", "equity"], cumulative)?;

    let path = src.join("cost_curve.csv");
    let (_, rows) = read_records(&path)?;
    let costs = rows.iter().flat_map(|r| {
        [("raw", &r[2]), ("scaled", &r[3])]
            .into_iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(kind, v)| [r[0].clone(), r[1].clone(), kind.to_string(), v.clone()])
            .collect::<Vec<_>>()
    });
    write_csv(figures.join("cost_curves.csv"), &["strategy", "cost_bps", "kind", "sharpe"], costs)?;

    let path = src.join("diversification.csv");
    let (_, rows) = read_records(&path)?;
    let heat = rows.iter().flat_map(|r| {
        [("correlation_raw", &r[2]), ("correlation_scaled", &r[3]), ("sign_agreement", &r[4])]
            .into_iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(metric, v)| [r[0].clone(), r[1].clone(), metric.to_string(), v.clone()])
            .collect::<Vec<_>>()
    });
    write_csv(figures.join("correlation_heatmap.csv"), &["a", "b", "metric", "value"], heat)?;

    let path = src.join("turnover.csv");
    if path.exists() {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        crate::output::write_atomic(figures.join("turnover.csv"), &bytes)?;
    }

    let path = src.join("topology.csv");
    if path.exists() {
        let (header, rows) = read_records(&path)?;
        let long = rows.iter().flat_map(|r| {
            header
                .iter()
                .zip(r)
                .skip(1)
                .filter(|(_, v)| !v.is_empty())
                .map(|(metric, v)| [r[0].clone(), metric.clone(), v.clone()])
                .collect::<Vec<_>>()
        });
        write_csv(figures.join("topology.csv"), &["date", "metric", "value"], long)?;
    }

    let report_manifest = write_manifest(&dir, &config.hash(), config.seed)?;
    refresh_manifest(config)?;
    Ok(ReportSummary {
        files: report_manifest.files.len(),
        manifest: report_manifest,
    })
}
