use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::Deserialize;

use super::{AssetMeta, PricePanel, TradingCalendar};
use crate::output::write_atomic;
use crate::{Error, Result, Scalar};

#[derive(Deserialize)]
struct UniverseRow {
    ticker: String,
    class: String,
    description: String,
    first_date: String,
    last_date: String,
}

#[derive(Deserialize)]
struct PriceRow {
    date: String,
    price: String,
}

fn parse_date(s: &str, context: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::Data(format!("{context}: unparseable date `{s}`: {e}")))
}

/// Reads `ticker,class,description,first_date,last_date`.
pub fn load_universe(path: impl AsRef<Path>) -> Result<Vec<AssetMeta>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let expected = ["ticker", "class", "description", "first_date", "last_date"];
    if headers.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::Data(format!(
            "{}: expected header {}, got {:?}",
            path.display(),
            expected.join(","),
            headers
        )));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in reader.deserialize::<UniverseRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let ticker = row.ticker.trim().to_string();
        if !seen.insert(ticker.clone()) {
            return Err(Error::DuplicateTicker(ticker));
        }
        let first_date = parse_date(&row.first_date, &ticker)?;
        let last_date = parse_date(&row.last_date, &ticker)?;
        if first_date > last_date {
            return Err(Error::Data(format!("{ticker}: first_date {first_date} after last_date {last_date}")));
        }
        out.push(AssetMeta {
            asset_class: row.class.trim().parse()?,
            description: row.description,
            ticker,
            first_date,
            last_date,
        });
    }
    Ok(out)
}

pub fn write_universe(path: impl AsRef<Path>, assets: &[AssetMeta]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e| Error::csv(path, e);
    w.write_record(["ticker", "class", "description", "first_date", "last_date"])
        .map_err(io)?;
    for a in assets {
        w.write_record([
            a.ticker.as_str(),
            a.asset_class.as_str(),
            a.description.as_str(),
            &a.first_date.to_string(),
            &a.last_date.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Reads `<price_dir>/<ticker>.csv` (`date,price`) for every universe entry
/// and aligns them on the union of their dates.
pub fn load_prices<T: Scalar>(price_dir: impl AsRef<Path>, universe: &[AssetMeta]) -> Result<PricePanel<T>> {
    let dir = price_dir.as_ref();
    let mut per_asset: Vec<HashMap<NaiveDate, f64>> = Vec::with_capacity(universe.len());
    let mut all_dates = BTreeSet::new();
    for meta in universe {
        let path = dir.join(format!("{}.csv", meta.ticker));
        if !path.exists() {
            return Err(Error::Data(format!(
                "missing price file for ticker {} (expected {})",
                meta.ticker,
                path.display()
            )));
        }
        let mut reader = csv::Reader::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        let mut rows = HashMap::new();
        for row in reader.deserialize::<PriceRow>() {
            let row = row.map_err(|e| Error::csv(&path, e))?;
            let date = parse_date(&row.date, &meta.ticker)?;
            let price: f64 = row.price.trim().parse().map_err(|_| {
                Error::Data(format!("{}: unparseable price `{}` on {date}", meta.ticker, row.price))
            })?;
            if !(price > 0.0) || !price.is_finite() {
                return Err(Error::NonPositivePrice {
                    ticker: meta.ticker.clone(),
                    date: date.to_string(),
                    price,
                });
            }
            if rows.insert(date, price).is_some() {
                return Err(Error::Data(format!("{}: duplicate date {date}", meta.ticker)));
            }
            all_dates.insert(date);
        }
        per_asset.push(rows);
    }
    let calendar = TradingCalendar::new(all_dates.into_iter().collect())?;
    let prices = per_asset
        .iter()
        .map(|rows| {
            calendar
                .dates()
                .iter()
                .map(|d| rows.get(d).map(|&p| T::of(p)))
                .collect()
        })
        .collect();
    PricePanel::new(calendar, universe.to_vec(), prices)
}

/// Writes one `date,price` file per asset; missing days are omitted.
pub fn write_prices<T: Scalar>(price_dir: impl AsRef<Path>, panel: &PricePanel<T>) -> Result<()> {
    let dir = price_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, meta) in panel.assets().iter().enumerate() {
        let path = dir.join(format!("{}.csv", meta.ticker));
        let mut text = String::from("date,price\n");
        for (day, p) in panel.series(i).iter().enumerate() {
            if let Some(p) = p {
                text.push_str(&format!("{},{}\n", panel.calendar().date(day), p.as_f64()));
            }
        }
        write_atomic(&path, text.as_bytes())?;
    }
    Ok(())
}
