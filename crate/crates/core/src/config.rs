//! TOML run configuration. Every key has a default, so an empty file runs
//! the full protocol on whatever data the paths point at.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backtest::{Ablation, MddDuration, SplitAnchors, WalkForwardConfig, DEFAULT_COSTS_BPS};
use crate::features::FeatureConfig;
use crate::graph::{GraphHyperParams, PipelineConfig, DEFAULT_LOOKBACKS, DEFAULT_REL_EPS, DEFAULT_GRID_VALUES};
use crate::market_data::SynthConfig;
use crate::strategies::StrategyKind;
use crate::{Error, Result};

pub const LOOKBACK_RANGE: (usize, usize) = (2, 2520);
pub const HYPER_RANGE: (f64, f64) = (1e-8, 1e4);
pub const MAX_COST_BPS: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub universe: PathBuf,
    pub prices: PathBuf,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            universe: "data/universe.csv".into(),
            prices: "data/prices".into(),
            output: "output".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub lookbacks: Vec<usize>,
    /// Largest fraction of missing feature rows an asset may have in a window.
    pub max_missing_frac: f64,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub stride: usize,
    pub search_stride: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub unit_mean_scaling: bool,
    /// Relative weight below which a pair does not count as an edge.
    pub rel_eps: f64,
    /// Non-converged window solves tolerated before the graphs stage fails.
    pub max_solver_failures: Option<usize>,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            lookbacks: DEFAULT_LOOKBACKS.to_vec(),
            max_missing_frac: 0.1,
            alpha_grid: DEFAULT_GRID_VALUES.to_vec(),
            beta_grid: DEFAULT_GRID_VALUES.to_vec(),
            stride: 1,
            search_stride: 21,
            tol: 1e-6,
            max_iter: 50_000,
            unit_mean_scaling: false,
            rel_eps: DEFAULT_REL_EPS,
            max_solver_failures: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestSection {
    pub first_test_year: i32,
    pub step_years: u32,
    pub validation_frac: f64,
    pub sigma_target: f64,
    pub costs_bps: Vec<f64>,
    pub strategies: Vec<StrategyKind>,
    pub ablations: Vec<Ablation>,
    pub mdd_duration: MddDuration,
}

impl Default for BacktestSection {
    fn default() -> Self {
        let anchors = SplitAnchors::default();
        Self {
            first_test_year: anchors.first_test_year,
            step_years: anchors.step_years,
            validation_frac: anchors.validation_frac,
            sigma_target: 0.15,
            costs_bps: DEFAULT_COSTS_BPS.to_vec(),
            strategies: StrategyKind::ALL.to_vec(),
            ablations: Vec::new(),
            mdd_duration: MddDuration::Underwater,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub spectral_k: usize,
    /// Leave degree-0/1 nodes out of the mean clustering coefficient instead
    /// of counting them as 0.
    pub skip_low_degree: bool,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            spectral_k: 4,
            skip_low_degree: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub features: FeatureConfig<f64>,
    pub graph: GraphSection,
    pub backtest: BacktestSection,
    pub analysis: AnalysisSection,
    pub synth: Option<SynthConfig>,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file; relative paths are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.paths.resolve_against(base);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, leaving out file locations so
    /// moving a project directory keeps its hash.
    pub fn hash(&self) -> String {
        let located = Self {
            paths: Paths::default(),
            ..self.clone()
        };
        hex::encode(Sha256::digest(located.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.graph;
        check(!g.lookbacks.is_empty(), || "graph.lookbacks is empty".into())?;
        for &d in &g.lookbacks {
            check((LOOKBACK_RANGE.0..=LOOKBACK_RANGE.1).contains(&d), || {
                format!("lookback {d} outside [{}, {}]", LOOKBACK_RANGE.0, LOOKBACK_RANGE.1)
            })?;
        }
        check(g.lookbacks.iter().collect::<BTreeSet<_>>().len() == g.lookbacks.len(), || {
            "graph.lookbacks has duplicates".into()
        })?;
        check((0.0..1.0).contains(&g.max_missing_frac), || {
            format!("graph.max_missing_frac {} outside [0, 1)", g.max_missing_frac)
        })?;
        for (name, grid) in [("alpha_grid", &g.alpha_grid), ("beta_grid", &g.beta_grid)] {
            check(!grid.is_empty(), || format!("graph.{name} is empty"))?;
            for &v in grid {
                check(v >= HYPER_RANGE.0 && v <= HYPER_RANGE.1, || {
                    format!("graph.{name} value {v} outside [{}, {}]", HYPER_RANGE.0, HYPER_RANGE.1)
                })?;
            }
        }
        check((1..=252).contains(&g.stride), || format!("graph.stride {} outside [1, 252]", g.stride))?;
        check((1..=252).contains(&g.search_stride), || {
            format!("graph.search_stride {} outside [1, 252]", g.search_stride)
        })?;
        check(g.tol > 0.0 && g.tol <= 1e-2, || format!("graph.tol {} outside (0, 0.01]", g.tol))?;
        check(g.max_iter >= 1, || "graph.max_iter must be positive".into())?;
        check((0.0..1.0).contains(&g.rel_eps), || format!("graph.rel_eps {} outside [0, 1)", g.rel_eps))?;

        let b = &self.backtest;
        check((1900..=2200).contains(&b.first_test_year), || {
            format!("backtest.first_test_year {} outside [1900, 2200]", b.first_test_year)
        })?;
        check(b.step_years >= 1, || "backtest.step_years must be positive".into())?;
        check(b.validation_frac > 0.0 && b.validation_frac <= 0.5, || {
            format!("backtest.validation_frac {} outside (0, 0.5]", b.validation_frac)
        })?;
        check(b.sigma_target > 0.0 && b.sigma_target <= 1.0, || {
            format!("backtest.sigma_target {} outside (0, 1]", b.sigma_target)
        })?;
        for &c in &b.costs_bps {
            check((0.0..=MAX_COST_BPS).contains(&c), || format!("cost {c} bps outside [0, {MAX_COST_BPS}]"))?;
        }
        check(!b.strategies.is_empty() || !b.ablations.is_empty(), || "no strategies configured".into())?;
        for a in &b.ablations {
            if let Ablation::Lookback(d) = a {
                check((LOOKBACK_RANGE.0..=LOOKBACK_RANGE.1).contains(d), || {
                    format!("ablation lookback {d} outside [{}, {}]", LOOKBACK_RANGE.0, LOOKBACK_RANGE.1)
                })?;
            }
        }

        check(self.analysis.spectral_k >= 1, || "analysis.spectral_k must be positive".into())?;
        let w = &self.features.winsor;
        check(w.multiplier > 0.0 && w.half_life > 0.0, || {
            "features.winsor multiplier and half_life must be positive".into()
        })?;
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<GraphHyperParams<f64>> {
        self.graph
            .alpha_grid
            .iter()
            .flat_map(|&alpha| self.graph.beta_grid.iter().map(move |&beta| GraphHyperParams { alpha, beta }))
            .collect()
    }

    pub fn pipeline(&self) -> PipelineConfig<f64> {
        PipelineConfig {
            lookbacks: self.graph.lookbacks.clone(),
            max_missing_frac: self.graph.max_missing_frac,
            tol: self.graph.tol,
            max_iter: self.graph.max_iter,
            unit_mean_scaling: self.graph.unit_mean_scaling,
        }
    }

    pub fn walk_forward(&self) -> WalkForwardConfig {
        let b = &self.backtest;
        WalkForwardConfig {
            anchors: SplitAnchors {
                first_test_year: b.first_test_year,
                step_years: b.step_years,
                validation_frac: b.validation_frac,
            },
            sigma_target: b.sigma_target,
            costs_bps: b.costs_bps.clone(),
            strategies: b.strategies.clone(),
            ablations: b.ablations.clone(),
            pipeline: self.pipeline(),
            grid: self.grid(),
            graph_stride: self.graph.stride,
            search_stride: self.graph.search_stride,
            mdd_duration: b.mdd_duration,
        }
    }
}

impl Paths {
    fn resolve_against(&mut self, base: &Path) {
        for p in [&mut self.universe, &mut self.prices, &mut self.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.grid().len(), 121);
        assert_eq!(c.graph.lookbacks, vec![252, 504, 756, 1008, 1260]);
        assert_eq!(c.backtest.sigma_target, 0.15);
    }

    #[test]
    fn round_trip_and_hash() {
        let text = r#"
            seed = 3
            [graph]
            lookbacks = [63, 126]
            alpha_grid = [0.1, 1.0]
            beta_grid = [1.0]
            stride = 5
            [backtest]
            first_test_year = 2016
            strategies = ["LongOnly", "GMOM"]
            ablations = ["GMOM-Intra", "S-EQ", "GMOM-126"]
            mdd_duration = "peak_to_trough"
            [synth]
            blocks = 2
            assets_per_block = 3
            days = 500
            rho = 0.9
            lambda = 1.0
            idio_vol = 0.01
        "#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.backtest.ablations[1], Ablation::ClassGraph(crate::market_data::AssetClass::Eq));
        let again = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
        let mut other = c.clone();
        other.seed = 4;
        assert_ne!(other.hash(), c.hash());
        let mut moved = c.clone();
        moved.paths.output = "/elsewhere".into();
        assert_eq!(moved.hash(), c.hash());
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for bad in [
            "[graph]\nlookbacks = [1]",
            "[graph]\nlookbacks = [3000]",
            "[graph]\nalpha_grid = [0.0]",
            "[graph]\nbeta_grid = []",
            "[graph]\nstride = 0",
            "[backtest]\ncosts_bps = [-1.0]",
            "[backtest]\nvalidation_frac = 0.9",
            "[backtest]\nstrategies = []",
            "[backtest]\nablations = [\"GMOM-1\"]",
            "[backtest]\nstrategies = [\"Nope\"]",
            "unknown_key = 1",
        ] {
            let e = RunConfig::from_toml(bad).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{bad}: {e}");
        }
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[paths]\noutput = \"out\"\nprices = \"/abs/prices\"").unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.paths.output, dir.path().join("out"));
        assert_eq!(c.paths.prices, PathBuf::from("/abs/prices"));
    }
}
