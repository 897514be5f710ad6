//! Seeded block-factor market.
//!
//! Each block `k` has an AR(1) factor `f_{k,t} = ρ f_{k,t−1} + η_t` and each
//! asset in the block returns `r = λ f_{k,t} + ε`. Draws come from ChaCha8
//! seeded with the config seed and are turned into normals with the cosine
//! branch of Box–Muller, so the generated CSV text is stable across platforms.

use chrono::NaiveDate;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AssetClass, AssetMeta, PricePanel, TradingCalendar};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub blocks: usize,
    pub assets_per_block: usize,
    pub days: usize,
    pub rho: f64,
    pub lambda: f64,
    pub idio_vol: f64,
    #[serde(default = "default_factor_vol")]
    pub factor_vol: f64,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
}

fn default_factor_vol() -> f64 {
    0.01
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date")
}

impl SynthConfig {
    pub fn new(blocks: usize, assets_per_block: usize, days: usize, rho: f64, lambda: f64) -> Self {
        Self {
            blocks,
            assets_per_block,
            days,
            rho,
            lambda,
            idio_vol: 0.01,
            factor_vol: default_factor_vol(),
            start_date: default_start(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.idio_vol >= 0.0) || !(self.factor_vol >= 0.0) {
            return Err(Error::Config("volatilities must be non-negative".into()));
        }
        if self.blocks == 0 || self.assets_per_block == 0 || self.days < 2 {
            return Err(Error::Config("need at least one block, one asset and two days".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthMarket {
    pub panel: PricePanel<f64>,
    /// Generating block of each asset, in panel order.
    pub blocks: Vec<usize>,
}

struct Normal {
    rng: ChaCha8Rng,
}

impl Normal {
    fn uniform(&mut self) -> f64 {
        // (0, 1]
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn sample(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

pub fn synth_market(config: &SynthConfig, seed: u64) -> Result<SynthMarket> {
    config.validate()?;
    let mut normal = Normal {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let calendar = TradingCalendar::business_days(config.start_date, config.days);
    let n_assets = config.blocks * config.assets_per_block;
    let stationary = config.factor_vol / (1.0 - config.rho * config.rho).sqrt();
    let mut factors: Vec<f64> = (0..config.blocks).map(|_| stationary * normal.sample()).collect();

    let mut prices = vec![vec![Some(100.0); config.days]; n_assets];
    for t in 1..config.days {
        for f in factors.iter_mut() {
            *f = config.rho * *f + config.factor_vol * normal.sample();
        }
        for (a, series) in prices.iter_mut().enumerate() {
            let block = a / config.assets_per_block;
            let r = config.lambda * factors[block] + config.idio_vol * normal.sample();
            let prev = series[t - 1].expect("synthetic prices are dense");
            series[t] = Some(prev * (1.0 + r.max(-0.95)));
        }
    }

    let first = calendar.date(0);
    let last = calendar.date(config.days - 1);
    let assets = (0..n_assets)
        .map(|a| {
            let block = a / config.assets_per_block;
            AssetMeta {
                ticker: format!("B{block}N{:02}", a % config.assets_per_block),
                asset_class: AssetClass::ALL[block % 4],
                description: format!("synthetic block {block}"),
                first_date: first,
                last_date: last,
            }
        })
        .collect();
    let blocks = (0..n_assets).map(|a| a / config.assets_per_block).collect();
    Ok(SynthMarket {
        panel: PricePanel::new(calendar, assets, prices)?,
        blocks,
    })
}
