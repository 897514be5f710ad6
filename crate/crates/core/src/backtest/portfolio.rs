use std::ops::Range;

use chrono::NaiveDate;
use log::debug;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureHistory, VOL_SPAN};
use crate::market_data::{EwmState, ReturnPanel, Series};
use crate::strategies::SignalSeries;
use crate::{Scalar, TRADING_DAYS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    Raw,
    VolScaled,
}

/// Daily portfolio returns labelled by the signal date `t`; each value is
/// realized from `t` to `t + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PortfolioReturns<T> {
    pub strategy: String,
    pub scaling: Scaling,
    pub days: Vec<usize>,
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<T>,
}

impl<T: Scalar> PortfolioReturns<T> {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// Returns keyed by calendar day.
    pub fn by_day(&self) -> std::collections::BTreeMap<usize, T> {
        self.days.iter().copied().zip(self.returns.iter().copied()).collect()
    }
}

/// Daily (unannualized) volatility estimates by asset and day.
#[derive(Clone, Debug, PartialEq)]
pub struct VolPanel<T> {
    daily: Vec<Series<T>>,
}

impl<T: Scalar> VolPanel<T> {
    pub fn new(daily: Vec<Series<T>>) -> Self {
        Self { daily }
    }

    pub fn from_history(history: &FeatureHistory<T>) -> Self {
        Self {
            daily: (0..history.n_assets())
                .map(|a| (0..history.n_days()).map(|t| history.sigma(a, t)).collect())
                .collect(),
        }
    }

    pub fn daily(&self, asset: usize, day: usize) -> Option<T> {
        self.daily[asset].get(day).copied().flatten()
    }

    /// `σ_daily · √252`.
    pub fn annualized(&self, asset: usize, day: usize) -> Option<T> {
        self.daily(asset, day).map(|s| s * T::of_usize(TRADING_DAYS).sqrt())
    }
}

/// Turnover `ζ_{i,t} = σ_tgt |x_t/σ_t − x_{t−1}/σ_{t−1}|` by asset and day,
/// with a missing position or volatility counted as flat.
#[derive(Clone, Debug, PartialEq)]
pub struct TurnoverPanel<T> {
    pub days: Range<usize>,
    pub zeta: Vec<Vec<T>>,
}

impl<T: Scalar> TurnoverPanel<T> {
    pub fn get(&self, asset: usize, day: usize) -> T {
        self.zeta[asset][day - self.days.start]
    }

    /// Per-day mean of `ζ` over assets holding a position that day.
    pub fn portfolio_average(&self, signals: &SignalSeries<T>) -> Vec<(usize, T)> {
        self.days
            .clone()
            .filter_map(|t| {
                let held: Vec<usize> = (0..signals.n_assets()).filter(|&a| signals.get(a, t).is_some()).collect();
                (!held.is_empty()).then(|| {
                    let s: T = held.iter().map(|&a| self.get(a, t)).sum();
                    (t, s / T::of_usize(held.len()))
                })
            })
            .collect()
    }
}

fn scaled_position<T: Scalar>(signals: &SignalSeries<T>, vol: &VolPanel<T>, a: usize, t: usize) -> T {
    match (signals.get(a, t), vol.annualized(a, t)) {
        (Some(x), Some(s)) if s > T::zero() => x / s,
        _ => T::zero(),
    }
}

pub fn turnover<T: Scalar>(
    signals: &SignalSeries<T>,
    vol: &VolPanel<T>,
    days: Range<usize>,
    sigma_target: T,
) -> TurnoverPanel<T> {
    let zeta = (0..signals.n_assets())
        .map(|a| {
            let mut prev = T::zero();
            days.clone()
                .map(|t| {
                    let q = scaled_position(signals, vol, a, t);
                    let z = sigma_target * (q - prev).abs();
                    prev = q;
                    z
                })
                .collect()
        })
        .collect();
    TurnoverPanel { days, zeta }
}

fn portfolio_core<T: Scalar>(
    signals: &SignalSeries<T>,
    returns: &ReturnPanel<T>,
    vol: &VolPanel<T>,
    days: Range<usize>,
    sigma_target: T,
    costs: Option<(&TurnoverPanel<T>, T)>,
) -> PortfolioReturns<T> {
    let mut out = PortfolioReturns {
        strategy: signals.strategy.clone(),
        scaling: Scaling::Raw,
        days: Vec::new(),
        dates: Vec::new(),
        returns: Vec::new(),
    };
    for t in days {
        if t + 1 >= returns.n_days() {
            break;
        }
        let mut sum = T::zero();
        let mut n = 0usize;
        for a in 0..signals.n_assets() {
            let (Some(x), Some(sigma), Some(r)) = (signals.get(a, t), vol.annualized(a, t), returns.get(a, t + 1))
            else {
                continue;
            };
            if !(sigma > T::zero()) {
                debug!("{} on day {t}: zero volatility, excluded", signals.tickers[a]);
                continue;
            }
            let mut term = x * sigma_target / sigma * r;
            if let Some((panel, c)) = costs {
                term -= c * panel.get(a, t);
            }
            sum += term;
            n += 1;
        }
        if n > 0 {
            out.days.push(t);
            out.dates.push(returns.calendar().date(t));
            out.returns.push(sum / T::of_usize(n));
        }
    }
    out
}

/// `(1/N_t) Σ_i x_{i,t} (σ_tgt/σ_{i,t}) r_{i,t+1}` over assets with a position,
/// a positive annualized volatility and a next-day return. Days with
/// `N_t = 0` are omitted.
pub fn portfolio_returns<T: Scalar>(
    signals: &SignalSeries<T>,
    returns: &ReturnPanel<T>,
    vol: &VolPanel<T>,
    days: Range<usize>,
    sigma_target: T,
) -> PortfolioReturns<T> {
    portfolio_core(signals, returns, vol, days, sigma_target, None)
}

/// Same average with `c · ζ_{i,t}` (`c` in basis points) subtracted from each
/// asset's term.
pub fn cost_adjusted_returns<T: Scalar>(
    signals: &SignalSeries<T>,
    returns: &ReturnPanel<T>,
    vol: &VolPanel<T>,
    turnover: &TurnoverPanel<T>,
    days: Range<usize>,
    sigma_target: T,
    cost_bps: T,
) -> PortfolioReturns<T> {
    let c = cost_bps * T::of(1e-4);
    portfolio_core(signals, returns, vol, days, sigma_target, Some((turnover, c)))
}

/// Rescales each day by `σ_tgt / (σ̂ · √252)` where `σ̂` is the span-60 EWM
/// standard deviation of the raw portfolio returns strictly before that day.
/// The first 60 days, and days with zero estimated volatility, are dropped.
pub fn scale_to_target_vol<T: Scalar>(raw: &PortfolioReturns<T>, sigma_target: T) -> PortfolioReturns<T> {
    let alpha = T::of(2.0) / T::of_usize(VOL_SPAN + 1);
    let annual = T::of_usize(TRADING_DAYS).sqrt();
    let mut state = EwmState::new(alpha);
    let mut out = PortfolioReturns {
        strategy: raw.strategy.clone(),
        scaling: Scaling::VolScaled,
        days: Vec::new(),
        dates: Vec::new(),
        returns: Vec::new(),
    };
    for i in 0..raw.len() {
        if state.count() >= VOL_SPAN {
            match state.std() {
                Some(s) if s > T::zero() => {
                    out.days.push(raw.days[i]);
                    out.dates.push(raw.dates[i]);
                    out.returns.push(raw.returns[i] * sigma_target / (s * annual));
                }
                _ => debug!("{}: zero portfolio volatility on {}, day omitted", raw.strategy, raw.dates[i]),
            }
        }
        state.update(raw.returns[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{AssetClass, AssetMeta, TradingCalendar};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        signals: SignalSeries<f64>,
        returns: ReturnPanel<f64>,
        vol: VolPanel<f64>,
    }

    fn fixture(seed: u64, n_assets: usize, n_days: usize) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cal = TradingCalendar::business_days(NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(), n_days);
        let assets: Vec<AssetMeta> = (0..n_assets)
            .map(|a| AssetMeta {
                ticker: format!("A{a}"),
                asset_class: AssetClass::Eq,
                description: String::new(),
                first_date: cal.date(0),
                last_date: cal.date(n_days - 1),
            })
            .collect();
        let maybe = |rng: &mut ChaCha8Rng, p: f64, v: f64| if rng.random_bool(p) { Some(v) } else { None };
        let rets = (0..n_assets)
            .map(|_| {
                (0..n_days)
                    .map(|_| {
                        let v = rng.random_range(-0.03..0.03);
                        maybe(&mut rng, 0.9, v)
                    })
                    .collect()
            })
            .collect();
        let vols = (0..n_assets)
            .map(|_| {
                (0..n_days)
                    .map(|_| {
                        let v = if rng.random_bool(0.05) { 0.0 } else { rng.random_range(0.002..0.03) };
                        maybe(&mut rng, 0.9, v)
                    })
                    .collect()
            })
            .collect();
        let tickers: Vec<String> = assets.iter().map(|a| a.ticker.clone()).collect();
        let mut signals = SignalSeries::empty("S", cal.dates(), &tickers);
        for a in 0..n_assets {
            for t in 0..n_days {
                let x = [-1.0, 0.0, 1.0, 0.5][rng.random_range(0..4)];
                let x = maybe(&mut rng, 0.85, x);
                signals.set(a, t, x);
            }
        }
        Fixture {
            signals,
            returns: ReturnPanel::from_parts(cal, assets, rets).unwrap(),
            vol: VolPanel::new(vols),
        }
    }

    fn oracle(f: &Fixture, days: Range<usize>, tgt: f64, c_bps: f64, zeta: Option<&TurnoverPanel<f64>>) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for t in days {
            if t + 1 >= f.returns.n_days() {
                continue;
            }
            let mut terms = Vec::new();
            for a in 0..f.signals.n_assets() {
                let x = f.signals.positions[a][t];
                let s = f.vol.daily(a, t).map(|s| s * 252f64.sqrt());
                let r = f.returns.get(a, t + 1);
                if let (Some(x), Some(s), Some(r)) = (x, s, r) {
                    if s > 0.0 {
                        let cost = zeta.map_or(0.0, |z| c_bps * 1e-4 * z.get(a, t));
                        terms.push(x * tgt / s * r - cost);
                    }
                }
            }
            if !terms.is_empty() {
                out.push((t, terms.iter().sum::<f64>() / terms.len() as f64));
            }
        }
        out
    }

    #[test]
    fn unit_leverage() {
        let cal = TradingCalendar::business_days(NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(), 2);
        let meta = AssetMeta {
            ticker: "A".into(),
            asset_class: AssetClass::Fx,
            description: String::new(),
            first_date: cal.date(0),
            last_date: cal.date(1),
        };
        let returns = ReturnPanel::from_parts(cal.clone(), vec![meta], vec![vec![None, Some(0.01)]]).unwrap();
        let daily = 0.15 / 252f64.sqrt();
        let vol = VolPanel::new(vec![vec![Some(daily), Some(daily)]]);
        let mut s = SignalSeries::empty("L", cal.dates(), &["A".to_string()]);
        s.set(0, 0, Some(1.0));
        let p = portfolio_returns(&s, &returns, &vol, 0..2, 0.15);
        assert_eq!(p.days, vec![0]);
        assert!((p.returns[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn flat_signals_give_zero_returns() {
        let mut f = fixture(3, 4, 50);
        for s in f.signals.positions.iter_mut() {
            s.iter_mut().for_each(|x| *x = Some(0.0));
        }
        let p = portfolio_returns(&f.signals, &f.returns, &f.vol, 0..50, 0.15);
        assert!(!p.is_empty());
        assert!(p.returns.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn turnover_examples() {
        let cal = TradingCalendar::business_days(NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(), 3);
        let tickers = vec!["A".to_string()];
        let mut s = SignalSeries::empty("S", cal.dates(), &tickers);
        s.set(0, 0, Some(-1.0));
        s.set(0, 1, Some(1.0));
        s.set(0, 2, Some(1.0));
        let daily = 0.15 / 252f64.sqrt();
        let vol = VolPanel::new(vec![vec![Some(daily); 3]]);
        let z = turnover(&s, &vol, 0..3, 0.15);
        assert!((z.get(0, 0) - 1.0).abs() < 1e-12, "established from flat");
        assert!((z.get(0, 1) - 2.0).abs() < 1e-12);
        assert_eq!(z.get(0, 2), 0.0);
    }

    #[test]
    fn scaling_hits_target_on_iid_returns() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let daily = 0.30 / 252f64.sqrt();
        let n = 5000;
        let raw = PortfolioReturns {
            strategy: "X".into(),
            scaling: Scaling::Raw,
            days: (0..n).collect(),
            dates: vec![NaiveDate::default(); n],
            returns: (0..n)
                .map(|_| {
                    let u1: f64 = 1.0 - rng.random::<f64>();
                    let u2: f64 = rng.random();
                    daily * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                })
                .collect(),
        };
        let scaled = scale_to_target_vol(&raw, 0.15);
        assert_eq!(scaled.len(), n - 60);
        let m = scaled.returns.iter().sum::<f64>() / scaled.len() as f64;
        let v = scaled.returns.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (scaled.len() - 1) as f64;
        let annual = (v * 252.0).sqrt();
        assert!((annual - 0.15).abs() <= 0.2 * 0.15, "{annual}");

        // a series already at target is left roughly alone
        let at_target = PortfolioReturns {
            returns: raw.returns.iter().map(|r| r / 2.0).collect(),
            ..raw.clone()
        };
        let again = scale_to_target_vol(&at_target, 0.15);
        let mult: f64 = again
            .returns
            .iter()
            .zip(&at_target.returns[60..])
            .map(|(s, r)| s / r)
            .sum::<f64>()
            / again.len() as f64;
        assert!((mult - 1.0).abs() < 0.1, "{mult}");
    }

    #[test]
    fn zero_returns_are_omitted_after_scaling() {
        let raw = PortfolioReturns {
            strategy: "Z".into(),
            scaling: Scaling::Raw,
            days: (0..100).collect(),
            dates: vec![NaiveDate::default(); 100],
            returns: vec![0.0; 100],
        };
        assert!(scale_to_target_vol(&raw, 0.15).is_empty());
    }

    proptest! {
        #[test]
        fn returns_match_oracle(seed in 0u64..1_000_000) {
            let f = fixture(seed, 4, 30);
            let p = portfolio_returns(&f.signals, &f.returns, &f.vol, 3..30, 0.15);
            let want = oracle(&f, 3..30, 0.15, 0.0, None);
            prop_assert_eq!(p.days.len(), want.len());
            for ((d, r), (wd, wr)) in p.days.iter().zip(&p.returns).zip(&want) {
                prop_assert_eq!(d, wd);
                prop_assert!((r - wr).abs() <= 1e-12);
            }
        }

        #[test]
        fn turnover_matches_formula(seed in 0u64..1_000_000) {
            let f = fixture(seed, 3, 25);
            let z = turnover(&f.signals, &f.vol, 2..25, 0.15);
            for a in 0..3 {
                let q = |t: usize| match (f.signals.positions[a][t], f.vol.daily(a, t)) {
                    (Some(x), Some(s)) if s > 0.0 => x / (s * 252f64.sqrt()),
                    _ => 0.0,
                };
                for t in 2..25 {
                    let prev = if t == 2 { 0.0 } else { q(t - 1) };
                    let want = 0.15 * (q(t) - prev).abs();
                    prop_assert!((z.get(a, t) - want).abs() <= 1e-12);
                    prop_assert!(z.get(a, t) >= 0.0);
                }
            }
        }

        #[test]
        fn costs_match_oracle(seed in 0u64..1_000_000, c in 0.0f64..5.0) {
            let f = fixture(seed, 4, 30);
            let z = turnover(&f.signals, &f.vol, 0..30, 0.15);
            let p = cost_adjusted_returns(&f.signals, &f.returns, &f.vol, &z, 0..30, 0.15, c);
            let want = oracle(&f, 0..30, 0.15, c, Some(&z));
            prop_assert_eq!(p.len(), want.len());
            for (r, (_, wr)) in p.returns.iter().zip(&want) {
                prop_assert!((r - wr).abs() <= 1e-12);
            }
            let free = cost_adjusted_returns(&f.signals, &f.returns, &f.vol, &z, 0..30, 0.15, 0.0);
            prop_assert_eq!(free, portfolio_returns(&f.signals, &f.returns, &f.vol, 0..30, 0.15));
        }

        #[test]
        fn homogeneous_in_returns(seed in 0u64..1_000_000, e in -3i32..4) {
            let f = fixture(seed, 3, 20);
            let k = 2f64.powi(e);
            let base = portfolio_returns(&f.signals, &f.returns, &f.vol, 0..20, 0.15);
            let scaled = portfolio_returns(&f.signals, &f.returns.scaled(k), &f.vol, 0..20, 0.15);
            for (a, b) in base.returns.iter().zip(&scaled.returns) {
                prop_assert_eq!(a * k, *b);
            }
        }
    }
}
