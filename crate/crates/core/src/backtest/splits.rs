use std::ops::Range;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::market_data::TradingCalendar;
use crate::{Error, Result};

/// Where the expanding-window protocol places its test blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitAnchors {
    pub first_test_year: i32,
    pub step_years: u32,
    pub validation_frac: f64,
}

impl Default for SplitAnchors {
    fn default() -> Self {
        Self {
            first_test_year: 2000,
            step_years: 5,
            validation_frac: 0.1,
        }
    }
}

/// Day-index spans of one retraining round. `validation` is the tail of
/// `train`; `test` starts right after `train`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkForwardSplit {
    pub index: usize,
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
    pub train_dates: (NaiveDate, NaiveDate),
    pub validation_dates: (NaiveDate, NaiveDate),
    pub test_dates: (NaiveDate, NaiveDate),
}

impl WalkForwardSplit {
    /// Training days not held out for validation.
    pub fn fit_span(&self) -> Range<usize> {
        self.train.start..self.validation.start
    }

    /// Signal days whose next-day return still lies inside the training span.
    pub fn train_signal_days(&self) -> Range<usize> {
        self.train.start..self.train.end.saturating_sub(1)
    }

    /// Same for the validation span.
    pub fn validation_signal_days(&self) -> Range<usize> {
        self.validation.start..self.validation.end.saturating_sub(1)
    }

    /// `"2000-2004"`: the calendar years of the test span.
    pub fn label(&self) -> String {
        format!("{}-{}", self.test_dates.0.year(), self.test_dates.1.year())
    }
}

/// Expanding-window splits: each test block spans `step_years` calendar years
/// (the last one is cut at the calendar end) and trains on everything before
/// it. Validation is the last `ceil(validation_frac × train days)` of train.
pub fn generate_splits(calendar: &TradingCalendar, anchors: &SplitAnchors) -> Result<Vec<WalkForwardSplit>> {
    if anchors.step_years == 0 {
        return Err(Error::Config("step_years must be positive".into()));
    }
    if !(anchors.validation_frac > 0.0 && anchors.validation_frac < 1.0) {
        return Err(Error::Config(format!(
            "validation_frac must lie in (0, 1), got {}",
            anchors.validation_frac
        )));
    }
    let dates = calendar.dates();
    let (Some(first), Some(last)) = (dates.first(), dates.last()) else {
        return Err(Error::Data("empty calendar".into()));
    };
    let first_index_in = |year: i32| dates.partition_point(|d| d.year() < year);

    let mut splits = Vec::new();
    let mut year = anchors.first_test_year;
    while year <= last.year() {
        let start = first_index_in(year);
        let end = first_index_in(year + anchors.step_years as i32);
        if start == 0 {
            return Err(Error::Data(format!(
                "calendar starts {first}, leaving no training data before {year}"
            )));
        }
        if start < end {
            let n_val = (anchors.validation_frac * start as f64).ceil() as usize;
            if n_val >= start {
                return Err(Error::Data(format!("training span before {year} is too short")));
            }
            let validation = start - n_val..start;
            splits.push(WalkForwardSplit {
                index: splits.len(),
                train: 0..start,
                train_dates: (dates[0], dates[start - 1]),
                validation_dates: (dates[validation.start], dates[start - 1]),
                validation,
                test: start..end,
                test_dates: (dates[start], dates[end - 1]),
            });
        }
        year += anchors.step_years as i32;
    }
    if splits.is_empty() {
        return Err(Error::Data(format!(
            "calendar {first}..{last} has no test days from {}",
            anchors.first_test_year
        )));
    }
    Ok(splits)
}
