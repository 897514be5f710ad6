use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    cost_adjusted_returns, generate_splits, perf_metrics, portfolio_returns, return_correlation, scale_to_target_vol,
    sign_agreement, turnover, MddDuration, PerfReport, PortfolioReturns, SplitAnchors, VolPanel, WalkForwardSplit,
};
use crate::analysis::{apply_mask, EdgeMask};
use crate::graph::{
    grid_search, learn_graph_sequence, default_grid, GraphHyperParams, GraphSequence, GridSearchOutcome, PipelineConfig,
    SearchConfig,
};
use crate::features::FeatureHistory;
use crate::market_data::{AssetClass, PricePanel};
use crate::strategies::{
    feature_names, individual_samples, network_samples, signals_gmom, signals_linreg, signals_long_only, signals_macd,
    signals_regcombo, signals_signcombo, RegressionModel, Samples, SignalSeries, StrategyKind,
};
use crate::{Error, Result};

pub const DEFAULT_COSTS_BPS: [f64; 7] = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0];

/// Variations of GMOM used to probe where its performance comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Ablation {
    /// GMOM on graphs keeping only same-class edges.
    IntraOnly,
    /// GMOM on graphs keeping only cross-class edges.
    InterOnly,
    /// Full GMOM signals traded on one class only.
    ClassMomentum(AssetClass),
    /// GMOM with graphs and regression built from one class only.
    ClassGraph(AssetClass),
    /// GMOM with a single lookback window instead of the ensemble.
    Lookback(usize),
}

impl Ablation {
    pub fn name(&self) -> String {
        match self {
            Ablation::IntraOnly => "GMOM-Intra".into(),
            Ablation::InterOnly => "GMOM-Inter".into(),
            Ablation::ClassMomentum(c) => format!("M-{c}"),
            Ablation::ClassGraph(c) => format!("S-{c}"),
            Ablation::Lookback(d) => format!("GMOM-{d}"),
        }
    }

    pub fn graph_variant(&self) -> GraphVariant {
        match self {
            Ablation::ClassGraph(c) => GraphVariant::Class(*c),
            Ablation::Lookback(d) => GraphVariant::Lookback(*d),
            _ => GraphVariant::Full,
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown ablation '{s}'"));
        match s {
            "GMOM-Intra" => Ok(Ablation::IntraOnly),
            "GMOM-Inter" => Ok(Ablation::InterOnly),
            _ => {
                if let Some(c) = s.strip_prefix("M-") {
                    Ok(Ablation::ClassMomentum(c.parse().map_err(|_| bad())?))
                } else if let Some(c) = s.strip_prefix("S-") {
                    Ok(Ablation::ClassGraph(c.parse().map_err(|_| bad())?))
                } else if let Some(d) = s.strip_prefix("GMOM-") {
                    Ok(Ablation::Lookback(d.parse().map_err(|_| bad())?))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl TryFrom<String> for Ablation {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Ablation> for String {
    fn from(a: Ablation) -> String {
        a.name()
    }
}

/// Which graphs a run needs: the ensemble over all assets, the ensemble over
/// one class, or a single lookback window over all assets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphVariant {
    Full,
    Class(AssetClass),
    Lookback(usize),
}

impl GraphVariant {
    pub fn key(&self) -> String {
        match self {
            GraphVariant::Full => "full".into(),
            GraphVariant::Class(c) => format!("class-{c}"),
            GraphVariant::Lookback(d) => format!("lookback-{d}"),
        }
    }

    pub fn candidates(&self, history: &FeatureHistory<f64>) -> Vec<usize> {
        match self {
            GraphVariant::Class(c) => class_assets(history, *c),
            _ => (0..history.n_assets()).collect(),
        }
    }

    pub fn pipeline(&self, base: &PipelineConfig<f64>) -> PipelineConfig<f64> {
        match self {
            GraphVariant::Lookback(d) => base.with_lookbacks(vec![*d]),
            _ => base.clone(),
        }
    }
}

fn class_assets(history: &FeatureHistory<f64>, c: AssetClass) -> Vec<usize> {
    history
        .assets()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.asset_class == c)
        .map(|(i, _)| i)
        .collect()
}

/// Storage name of the graph sequence for a variant and hyperparameters.
pub fn graph_key(variant: GraphVariant, hp: GraphHyperParams<f64>) -> String {
    format!("{}_a{}_b{}", variant.key(), hp.alpha, hp.beta)
}

/// Ensemble (unnormalized) graph sequences by [`graph_key`].
pub type GraphStore = BTreeMap<String, GraphSequence<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkForwardConfig {
    pub anchors: SplitAnchors,
    pub sigma_target: f64,
    pub costs_bps: Vec<f64>,
    pub strategies: Vec<StrategyKind>,
    pub ablations: Vec<Ablation>,
    pub pipeline: PipelineConfig<f64>,
    pub grid: Vec<GraphHyperParams<f64>>,
    /// Graph recompute stride during the backtest.
    pub graph_stride: usize,
    /// Graph recompute stride during the hyperparameter search.
    pub search_stride: usize,
    pub mdd_duration: MddDuration,
}

impl Default for WalkForwardConfig {
    fn default() -> Self {
        Self {
            anchors: SplitAnchors::default(),
            sigma_target: 0.15,
            costs_bps: DEFAULT_COSTS_BPS.to_vec(),
            strategies: StrategyKind::ALL.to_vec(),
            ablations: Vec::new(),
            pipeline: PipelineConfig::default(),
            grid: default_grid(),
            graph_stride: 1,
            search_stride: 21,
            mdd_duration: MddDuration::Underwater,
        }
    }
}

impl WalkForwardConfig {
    fn wants(&self, kind: StrategyKind) -> bool {
        self.strategies.contains(&kind)
    }

    fn needs_linreg(&self) -> bool {
        self.wants(StrategyKind::LinReg) || self.wants(StrategyKind::SignCombo)
    }

    fn needs_gmom(&self) -> bool {
        self.wants(StrategyKind::Gmom)
            || self.wants(StrategyKind::SignCombo)
            || self.ablations.iter().any(|a| matches!(a, Ablation::ClassMomentum(_)))
    }

    /// Graph variants the configured strategies and ablations read.
    pub fn graph_variants(&self) -> BTreeSet<GraphVariant> {
        let mut out: BTreeSet<GraphVariant> = self.ablations.iter().map(|a| a.graph_variant()).collect();
        if self.strategies.iter().any(|s| s.needs_graphs()) {
            out.insert(GraphVariant::Full);
        }
        out
    }

    pub fn needs_graphs(&self) -> bool {
        !self.graph_variants().is_empty()
    }

    pub fn search_config(&self) -> SearchConfig<f64> {
        SearchConfig {
            stride: self.search_stride,
            sigma_target: self.sigma_target,
        }
    }

    /// Names of the runs in output order: strategies, then ablations.
    pub fn run_names(&self) -> Vec<String> {
        self.strategies
            .iter()
            .map(|s| s.name().to_string())
            .chain(self.ablations.iter().map(|a| a.name()))
            .collect()
    }
}

/// A split together with the hyperparameters its graphs use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub split: WalkForwardSplit,
    pub search: Option<GridSearchOutcome<f64>>,
    pub hyper: Option<GraphHyperParams<f64>>,
}

/// Splits and, when graphs are needed, the validation grid search of each.
pub fn plan_splits(history: &FeatureHistory<f64>, config: &WalkForwardConfig) -> Result<Vec<SplitPlan>> {
    let splits = generate_splits(history.calendar(), &config.anchors)?;
    let all: Vec<usize> = (0..history.n_assets()).collect();
    splits
        .into_iter()
        .map(|split| {
            if !config.needs_graphs() {
                return Ok(SplitPlan {
                    split,
                    search: None,
                    hyper: None,
                });
            }
            info!("split {}: searching {} grid points", split.label(), config.grid.len());
            let search = grid_search(
                history,
                split.validation.clone(),
                &config.grid,
                &config.pipeline,
                &config.search_config(),
                &all,
            )?;
            Ok(SplitPlan {
                hyper: Some(search.best),
                search: Some(search),
                split,
            })
        })
        .collect()
}

/// Learns every graph variant a split needs, from the first day through the
/// end of its test span, reusing days already in `store`.
pub fn learn_split_graphs(
    history: &FeatureHistory<f64>,
    plan: &SplitPlan,
    config: &WalkForwardConfig,
    store: &mut GraphStore,
) -> Result<()> {
    let Some(hp) = plan.hyper else {
        return Ok(());
    };
    for variant in config.graph_variants() {
        let key = graph_key(variant, hp);
        info!("split {}: graphs {key}", plan.split.label());
        let seq = learn_graph_sequence(
            history,
            0..plan.split.test.end,
            config.graph_stride,
            hp,
            &variant.pipeline(&config.pipeline),
            &variant.candidates(history),
            store.get(&key),
        )?;
        store.insert(key, seq);
    }
    Ok(())
}

/// Splits, hyperparameter searches and all graphs a run needs.
pub fn prepare_graphs(
    history: &FeatureHistory<f64>,
    config: &WalkForwardConfig,
    store: &mut GraphStore,
) -> Result<Vec<SplitPlan>> {
    let plans = plan_splits(history, config)?;
    for plan in &plans {
        learn_split_graphs(history, plan, config, store)?;
    }
    Ok(plans)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostPoint {
    pub cost_bps: f64,
    pub sharpe_raw: Option<f64>,
    pub sharpe_scaled: Option<f64>,
}

/// Out-of-sample record of one strategy or ablation.
#[derive(Clone, Debug)]
pub struct StrategyRun {
    pub name: String,
    pub signals: SignalSeries<f64>,
    pub raw: PortfolioReturns<f64>,
    pub scaled: PortfolioReturns<f64>,
    pub metrics_raw: PerfReport<f64>,
    /// `None` when too few days remain after the scaling burn-in.
    pub metrics_scaled: Option<PerfReport<f64>>,
    /// Daily mean turnover over held assets.
    pub turnover: Vec<(usize, f64)>,
    pub cost_curve: Vec<CostPoint>,
}

#[derive(Clone, Debug)]
pub struct FittedModel {
    /// In-sample years, e.g. `"1990-1999"`.
    pub period: String,
    pub model_name: String,
    pub model: RegressionModel<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairStat {
    pub a: String,
    pub b: String,
    pub correlation_raw: Option<f64>,
    pub correlation_scaled: Option<f64>,
    pub sign_agreement: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct WalkForwardResult {
    pub plans: Vec<SplitPlan>,
    pub runs: Vec<StrategyRun>,
    pub models: Vec<FittedModel>,
}

impl WalkForwardResult {
    pub fn run(&self, name: &str) -> Option<&StrategyRun> {
        self.runs.iter().find(|r| r.name == name)
    }

    /// Pairwise return correlations and sign agreement over all runs.
    pub fn diversification(&self) -> Vec<PairStat> {
        let mut out = Vec::new();
        for a in &self.runs {
            for b in &self.runs {
                out.push(PairStat {
                    a: a.name.clone(),
                    b: b.name.clone(),
                    correlation_raw: return_correlation(&a.raw, &b.raw).ok(),
                    correlation_scaled: return_correlation(&a.scaled, &b.scaled).ok(),
                    sign_agreement: sign_agreement(&a.signals, &b.signals),
                });
            }
        }
        out
    }
}

struct SplitOutput {
    signals: Vec<(String, SignalSeries<f64>)>,
    models: Vec<FittedModel>,
}

fn train_period(split: &WalkForwardSplit) -> String {
    use chrono::Datelike;
    format!("{}-{}", split.train_dates.0.year(), split.train_dates.1.year())
}

fn fit(samples: Samples<f64>, names: &[String], split: &WalkForwardSplit, what: &str) -> Result<RegressionModel<f64>> {
    samples.fit(names).map_err(|e| {
        Error::Data(format!(
            "split {} (train {}): cannot fit {what} on {} rows: {e}",
            split.label(),
            train_period(split),
            samples.len()
        ))
    })
}

fn normalized_sequence(store: &GraphStore, variant: GraphVariant, plan: &SplitPlan) -> Result<GraphSequence<f64>> {
    let hp = plan
        .hyper
        .ok_or_else(|| Error::Data(format!("split {}: no graph hyperparameters", plan.split.label())))?;
    let key = graph_key(variant, hp);
    store
        .get(&key)
        .map(|s| s.normalized())
        .ok_or_else(|| Error::Data(format!("graph store has no sequence '{key}'; run the graphs stage first")))
}

fn run_split(
    history: &FeatureHistory<f64>,
    panel: &PricePanel<f64>,
    plan: &SplitPlan,
    store: &GraphStore,
    config: &WalkForwardConfig,
) -> Result<SplitOutput> {
    let split = &plan.split;
    let train = split.train_signal_days();
    let test = split.test.clone();
    let period = train_period(split);
    let classes: Vec<AssetClass> = history.assets().iter().map(|a| a.asset_class).collect();
    let mut signals: BTreeMap<String, SignalSeries<f64>> = BTreeMap::new();
    let mut models = Vec::new();
    let mut keep_model = |name: &str, model: &RegressionModel<f64>| {
        models.push(FittedModel {
            period: period.clone(),
            model_name: name.to_string(),
            model: model.clone(),
        })
    };

    if config.wants(StrategyKind::LongOnly) {
        signals.insert("LongOnly".into(), signals_long_only(panel, test.clone()));
    }
    if config.wants(StrategyKind::Macd) {
        signals.insert("MACD".into(), signals_macd(history, test.clone()));
    }
    if config.needs_linreg() {
        let m = fit(individual_samples(history, train.clone()), &feature_names(false, false), split, "LinReg")?;
        keep_model("LinReg", &m);
        signals.insert("LinReg".into(), signals_linreg(&m, history, test.clone()));
    }

    let full = if config.graph_variants().contains(&GraphVariant::Full) {
        Some(normalized_sequence(store, GraphVariant::Full, plan)?)
    } else {
        None
    };
    if let Some(seq) = &full {
        if config.needs_gmom() {
            let samples = network_samples(history, seq, train.clone(), false, None);
            let m = fit(samples, &feature_names(true, false), split, "GMOM")?;
            keep_model("GMOM", &m);
            signals.insert("GMOM".into(), signals_gmom(&m, history, seq, test.clone()));
        }
        if config.wants(StrategyKind::RegCombo) {
            let samples = network_samples(history, seq, train.clone(), true, None);
            let m = fit(samples, &feature_names(true, true), split, "RegCombo")?;
            keep_model("RegCombo", &m);
            signals.insert("RegCombo".into(), signals_regcombo(&m, history, seq, test.clone()));
        }
    }
    if config.wants(StrategyKind::SignCombo) {
        let s = signals_signcombo(&signals["LinReg"], &signals["GMOM"]);
        signals.insert("SignCombo".into(), s);
    }

    for ablation in &config.ablations {
        let name = ablation.name();
        let s = match *ablation {
            Ablation::IntraOnly | Ablation::InterOnly => {
                let mask = if *ablation == Ablation::IntraOnly {
                    EdgeMask::IntraOnly
                } else {
                    EdgeMask::InterOnly
                };
                let hp = plan.hyper.expect("graphs imply hyperparameters");
                let ensemble = store
                    .get(&graph_key(GraphVariant::Full, hp))
                    .ok_or_else(|| Error::Data("graph store has no full ensemble".into()))?;
                let seq = ensemble.map_graphs(|g| apply_mask(g, mask, &classes));
                let m = fit(network_samples(history, &seq, train.clone(), false, None), &feature_names(true, false), split, &name)?;
                keep_model(&name, &m);
                signals_gmom(&m, history, &seq, test.clone())
            }
            Ablation::ClassMomentum(c) => signals["GMOM"].clone().restricted_to(&class_assets(history, c)),
            Ablation::ClassGraph(c) => {
                let keep = class_assets(history, c);
                let seq = normalized_sequence(store, GraphVariant::Class(c), plan)?;
                let samples = network_samples(history, &seq, train.clone(), false, Some(&keep));
                let m = fit(samples, &feature_names(true, false), split, &name)?;
                keep_model(&name, &m);
                signals_gmom(&m, history, &seq, test.clone()).restricted_to(&keep)
            }
            Ablation::Lookback(d) => {
                let seq = normalized_sequence(store, GraphVariant::Lookback(d), plan)?;
                let m = fit(network_samples(history, &seq, train.clone(), false, None), &feature_names(true, false), split, &name)?;
                keep_model(&name, &m);
                signals_gmom(&m, history, &seq, test.clone())
            }
        };
        signals.insert(name.clone(), s.renamed(name));
    }

    let order = config.run_names();
    Ok(SplitOutput {
        signals: order
            .into_iter()
            .map(|n| {
                let s = signals.remove(&n).expect("every configured run produced signals");
                (n, s)
            })
            .collect(),
        models,
    })
}

fn evaluate(
    signals: SignalSeries<f64>,
    history: &FeatureHistory<f64>,
    vol: &VolPanel<f64>,
    days: std::ops::Range<usize>,
    config: &WalkForwardConfig,
) -> Result<StrategyRun> {
    let returns = history.return_panel();
    let sigma = config.sigma_target;
    let raw = portfolio_returns(&signals, &returns, vol, days.clone(), sigma);
    let scaled = scale_to_target_vol(&raw, sigma);
    let metrics_raw = perf_metrics(&raw.returns, config.mdd_duration)
        .map_err(|e| Error::Data(format!("{}: no out-of-sample returns ({e})", signals.strategy)))?;
    let metrics_scaled = perf_metrics(&scaled.returns, config.mdd_duration).ok();
    let zeta = turnover(&signals, vol, days.clone(), sigma);
    let cost_curve = config
        .costs_bps
        .iter()
        .map(|&c| {
            let r = cost_adjusted_returns(&signals, &returns, vol, &zeta, days.clone(), sigma, c);
            CostPoint {
                cost_bps: c,
                sharpe_raw: perf_metrics(&r.returns, config.mdd_duration).ok().and_then(|m| m.sharpe),
                sharpe_scaled: perf_metrics(&scale_to_target_vol(&r, sigma).returns, config.mdd_duration)
                    .ok()
                    .and_then(|m| m.sharpe),
            }
        })
        .collect();
    Ok(StrategyRun {
        name: signals.strategy.clone(),
        turnover: zeta.portfolio_average(&signals),
        signals,
        raw,
        scaled,
        metrics_raw,
        metrics_scaled,
        cost_curve,
    })
}

/// Fits every model on each split's training span, trades the following test
/// span, and evaluates the concatenated out-of-sample record. Graphs come from
/// `store` (see [`prepare_graphs`]).
pub fn run_backtest(
    history: &FeatureHistory<f64>,
    panel: &PricePanel<f64>,
    plans: &[SplitPlan],
    store: &GraphStore,
    config: &WalkForwardConfig,
) -> Result<WalkForwardResult> {
    let (Some(first), Some(last)) = (plans.first(), plans.last()) else {
        return Err(Error::Data("no walk-forward splits".into()));
    };
    if config.strategies.is_empty() && config.ablations.is_empty() {
        return Err(Error::Config("no strategies configured".into()));
    }
    let outputs: Vec<SplitOutput> = plans
        .par_iter()
        .map(|plan| run_split(history, panel, plan, store, config))
        .collect::<Result<_>>()?;

    let oos = first.split.test.start..last.split.test.end;
    let dates = history.calendar().dates();
    let tickers: Vec<String> = history.assets().iter().map(|a| a.ticker.clone()).collect();
    let names = config.run_names();
    let mut combined: Vec<SignalSeries<f64>> = names.iter().map(|n| SignalSeries::empty(n.clone(), dates, &tickers)).collect();
    for (plan, out) in plans.iter().zip(&outputs) {
        for (dst, (_, s)) in combined.iter_mut().zip(&out.signals) {
            dst.overlay(s, plan.split.test.clone());
        }
    }
    let vol = VolPanel::from_history(history);
    let runs: Vec<StrategyRun> = combined
        .into_par_iter()
        .map(|s| evaluate(s, history, &vol, oos.clone(), config))
        .collect::<Result<_>>()?;
    Ok(WalkForwardResult {
        plans: plans.to_vec(),
        runs,
        models: outputs.into_iter().flat_map(|o| o.models).collect(),
    })
}

/// Graphs, then backtest, with an in-memory graph store.
pub fn run_walk_forward(
    history: &FeatureHistory<f64>,
    panel: &PricePanel<f64>,
    config: &WalkForwardConfig,
) -> Result<WalkForwardResult> {
    let mut store = GraphStore::new();
    let plans = prepare_graphs(history, config, &mut store)?;
    run_backtest(history, panel, &plans, &store, config)
}
