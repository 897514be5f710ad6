//! Walk-forward backtesting: expanding-window splits, volatility-targeted
//! long/short portfolio returns, turnover and linear trading costs,
//! performance metrics and diversification statistics.

mod diversification;
mod metrics;
mod portfolio;
mod splits;
mod walk_forward;

pub use diversification::{return_correlation, sign_agreement, MIN_OVERLAP};
pub use metrics::{perf_metrics, MddDuration, PerfReport};
pub use portfolio::{
    cost_adjusted_returns, portfolio_returns, scale_to_target_vol, turnover, PortfolioReturns, Scaling, TurnoverPanel,
    VolPanel,
};
pub use splits::{generate_splits, SplitAnchors, WalkForwardSplit};
pub use walk_forward::{
    graph_key, learn_split_graphs, plan_splits, prepare_graphs, run_backtest, run_walk_forward, Ablation, CostPoint,
    FittedModel, GraphStore, GraphVariant, PairStat, SplitPlan, StrategyRun, WalkForwardConfig, WalkForwardResult,
    DEFAULT_COSTS_BPS,
};
