//! Trading signals: network momentum propagated along learned graphs and fed
//! to a pooled linear model, plus the individual-momentum and model-free
//! baselines and their combinations.

mod ols;
mod propagate;
mod report;
mod signals;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::FEATURE_NAMES;
use crate::Error;

pub use ols::{fit_ols, RegressionModel, Samples, MAX_CONDITION, T_CRITICAL};
pub use propagate::{propagate, PropagatedFeatures};
pub use report::{coefficient_report, CoefficientCell, CoefficientRow, CoefficientTable};
pub use signals::{
    individual_samples, network_samples, phi, sign, signals_gmom, signals_linreg, signals_long_only, signals_macd,
    signals_regcombo, signals_signcombo, SignalSeries, PHI_SCALE,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    LongOnly,
    #[serde(rename = "MACD")]
    Macd,
    LinReg,
    #[serde(rename = "GMOM")]
    Gmom,
    RegCombo,
    SignCombo,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::LongOnly,
        StrategyKind::Macd,
        StrategyKind::LinReg,
        StrategyKind::Gmom,
        StrategyKind::RegCombo,
        StrategyKind::SignCombo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::LongOnly => "LongOnly",
            StrategyKind::Macd => "MACD",
            StrategyKind::LinReg => "LinReg",
            StrategyKind::Gmom => "GMOM",
            StrategyKind::RegCombo => "RegCombo",
            StrategyKind::SignCombo => "SignCombo",
        }
    }

    /// Whether the strategy propagates features along graphs.
    pub fn needs_graphs(self) -> bool {
        matches!(self, StrategyKind::Gmom | StrategyKind::RegCombo | StrategyKind::SignCombo)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

/// Regression column names: the eight features, or the eight individual then
/// eight propagated ones.
pub fn feature_names(network: bool, with_individual: bool) -> Vec<String> {
    let mut out = Vec::new();
    if with_individual || !network {
        out.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    }
    if network {
        out.extend(FEATURE_NAMES.iter().map(|s| format!("net_{s}")));
    }
    out
}
