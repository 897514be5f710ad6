use serde::Serialize;

use super::RegressionModel;
use crate::Scalar;

/// One estimated coefficient as shown in the significance table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientCell {
    pub coefficient: f64,
    pub std_error: f64,
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
}

impl CoefficientCell {
    /// `0.0123* (0.0045)`; the star marks `|t| > 1.96`.
    pub fn display(&self) -> String {
        format!(
            "{:.4}{} ({:.4})",
            self.coefficient,
            if self.significant { "*" } else { "" },
            self.std_error
        )
    }

    pub fn sign(&self) -> &'static str {
        if self.coefficient > 0.0 {
            "+"
        } else if self.coefficient < 0.0 {
            "-"
        } else {
            "0"
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub period: String,
    pub model: String,
    pub n_samples: usize,
    pub cells: Vec<CoefficientCell>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CoefficientTable {
    pub features: Vec<String>,
    pub rows: Vec<CoefficientRow>,
}

impl CoefficientTable {
    /// Wide layout: one row per period and model, one column per feature.
    pub fn wide_records(&self) -> Vec<Vec<String>> {
        let mut out = vec![["period", "model", "n_samples"]
            .iter()
            .map(|s| s.to_string())
            .chain(self.features.iter().cloned())
            .collect()];
        for row in &self.rows {
            let mut rec = vec![row.period.clone(), row.model.clone(), row.n_samples.to_string()];
            rec.extend(row.cells.iter().map(CoefficientCell::display));
            out.push(rec);
        }
        out
    }

    /// Long layout with full precision: one record per coefficient.
    pub fn long_records(&self) -> Vec<Vec<String>> {
        let mut out = vec![["period", "model", "feature", "coefficient", "std_error", "t_stat", "p_value", "significant", "sign"]
            .iter()
            .map(|s| s.to_string())
            .collect()];
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            for (feature, c) in self.features.iter().zip(&row.cells) {
                out.push(vec![
                    row.period.clone(),
                    row.model.clone(),
                    feature.clone(),
                    c.coefficient.to_string(),
                    c.std_error.to_string(),
                    opt(c.t_stat),
                    opt(c.p_value),
                    c.significant.to_string(),
                    c.sign().to_string(),
                ]);
            }
        }
        out
    }
}

/// Table of coefficients per in-sample period. Models with a different
/// feature list than the first are skipped (one table per model family).
pub fn coefficient_report<T: Scalar>(models: &[(String, String, RegressionModel<T>)]) -> CoefficientTable {
    let Some((_, _, first)) = models.first() else {
        return CoefficientTable::default();
    };
    let features = first.feature_names.clone();
    let rows = models
        .iter()
        .filter(|(_, _, m)| m.feature_names == features)
        .map(|(period, model, m)| CoefficientRow {
            period: period.clone(),
            model: model.clone(),
            n_samples: m.n_samples,
            cells: (0..m.n_features())
                .map(|k| CoefficientCell {
                    coefficient: m.coefficients[k].as_f64(),
                    std_error: m.std_errors[k].as_f64(),
                    t_stat: m.t_stats[k].map(Scalar::as_f64),
                    p_value: m.p_values[k].map(Scalar::as_f64),
                    significant: m.is_significant(k),
                })
                .collect(),
        })
        .collect();
    CoefficientTable { features, rows }
}
