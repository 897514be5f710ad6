//! Network momentum toolkit.
//!
//! Momentum features are computed per asset from daily prices, sparse asset
//! graphs are learned from stacked feature windows by a log-barrier convex
//! program, individual momentum is propagated along the learned edges, and a
//! pooled linear model turns the propagated features into long/short signals.
//! The [`backtest`] module runs the expanding-window walk-forward protocol and
//! the [`analysis`] module computes topology diagnostics over the graph
//! sequence.
//!
//! Numerical kernels are generic over [`Scalar`] (implemented for `f32` and
//! `f64`). The data pipeline, file formats and CLI stages work in `f64`; the
//! aliases at the bottom of this file name the concrete types they use.

pub mod analysis;
pub mod backtest;
pub mod config;
pub mod error;
pub mod features;
pub mod graph;
pub mod linalg;
pub mod market_data;
pub mod output;
pub mod pipeline;
pub mod strategies;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

pub use error::{Error, Result};

/// Floating point scalar used by every numerical kernel.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + ScalarOperand
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + serde::Serialize
    + 'static
{
    /// Lossy conversion from `f64`; every supported scalar can represent
    /// (an approximation of) any finite `f64`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Trading days per year used for every annualization.
pub const TRADING_DAYS: usize = 252;

/// Number of momentum features per asset and day.
pub const N_FEATURES: usize = 8;

pub type AssetMeta = market_data::AssetMeta;
pub type PricePanelF64 = market_data::PricePanel<f64>;
pub type ReturnPanelF64 = market_data::ReturnPanel<f64>;
pub type FeatureHistoryF64 = features::FeatureHistory<f64>;
pub type FeatureMatrixF64 = features::FeatureMatrix<f64>;
pub type StackedFeaturesF64 = features::StackedFeatureMatrix<f64>;
pub type GraphSnapshotF64 = graph::GraphSnapshot<f64>;
pub type GraphHyperParamsF64 = graph::GraphHyperParams<f64>;
pub type RegressionModelF64 = strategies::RegressionModel<f64>;
pub type SignalSeriesF64 = strategies::SignalSeries<f64>;
pub type PortfolioReturnsF64 = backtest::PortfolioReturns<f64>;
pub type PerfReportF64 = backtest::PerfReport<f64>;

pub type GraphSnapshotF32 = graph::GraphSnapshot<f32>;
pub type GraphHyperParamsF32 = graph::GraphHyperParams<f32>;
