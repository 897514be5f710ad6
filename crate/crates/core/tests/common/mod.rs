#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use netmom::backtest::{SplitAnchors, WalkForwardConfig};
use netmom::config::RunConfig;
use netmom::graph::{GraphHyperParams, PipelineConfig};
use netmom::market_data::{synth_market, AssetClass, PricePanel, SynthConfig, SynthMarket};

pub fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

/// Strongly persistent four-block market over ten years starting 2010.
pub fn momentum_market(seed: u64) -> SynthMarket {
    let mut c = SynthConfig::new(4, 4, 2520, 0.95, 1.0);
    c.start_date = date("2010-01-04");
    synth_market(&c, seed).unwrap()
}

/// Same prices with two asset classes inside every block (the generator
/// assigns one class per block), so both same-class and cross-class edges
/// carry weight.
pub fn mixed_classes(panel: &PricePanel<f64>, per_block: usize) -> PricePanel<f64> {
    let assets = panel
        .assets()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut a = a.clone();
            a.asset_class = AssetClass::ALL[((i % per_block) * 2 / per_block) % 4];
            a
        })
        .collect();
    let series = (0..panel.n_assets()).map(|a| panel.series(a).to_vec()).collect();
    PricePanel::new(panel.calendar().clone(), assets, series).unwrap()
}

/// Two-split walk-forward over the 2010-2019 synthetic calendar with a small
/// grid and strided graphs.
pub fn small_walk_forward() -> WalkForwardConfig {
    WalkForwardConfig {
        anchors: SplitAnchors {
            first_test_year: 2016,
            step_years: 2,
            validation_frac: 0.1,
        },
        pipeline: PipelineConfig::default().with_lookbacks(vec![126, 252]),
        grid: [0.1, 1.0]
            .iter()
            .flat_map(|&alpha| [0.1, 1.0].map(|beta| GraphHyperParams { alpha, beta }))
            .collect(),
        graph_stride: 5,
        search_stride: 10,
        ..WalkForwardConfig::default()
    }
}

/// Run configuration matching [`small_walk_forward`] with paths under `root`.
pub fn small_run_config(root: &Path) -> RunConfig {
    let mut c = RunConfig::from_toml(
        r#"
        seed = 11
        [graph]
        lookbacks = [126, 252]
        alpha_grid = [0.1, 1.0]
        beta_grid = [0.1, 1.0]
        stride = 5
        search_stride = 10
        [backtest]
        first_test_year = 2016
        step_years = 2
        "#,
    )
    .unwrap();
    c.paths.universe = root.join("data/universe.csv");
    c.paths.prices = root.join("data/prices");
    c.paths.output = root.join("output");
    c
}

/// Every file under `root` keyed by relative path.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Header and rows of a CSV file.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}
