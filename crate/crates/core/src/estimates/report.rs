use std::collections::BTreeMap;

use serde::Serialize;

use crate::geometry::QuotientPoint;

/// Whether the audited quantity is bounded from above or from below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Passes when `lhs ≤ rhs`.
    Upper,
    /// Passes when `lhs ≥ rhs`.
    Lower,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Upper => "upper",
            Direction::Lower => "lower",
        }
    }
}

/// One audited inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub name: String,
    /// The inequality in symbols.
    pub paper_eq: String,
    pub direction: Direction,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs` for upper bounds, `lhs − rhs` for lower bounds.
    pub margin: f64,
    pub passed: bool,
    /// Set when a hypothesis or precondition failed and nothing was checked.
    pub skipped: Option<String>,
    pub time: Option<f64>,
    pub center: Option<QuotientPoint>,
    pub radius: Option<f64>,
    pub params: BTreeMap<String, f64>,
}

pub const CSV_COLUMNS: [&str; 12] = [
    "name",
    "paper_eq",
    "direction",
    "lhs",
    "rhs",
    "margin",
    "passed",
    "time",
    "center_s",
    "center_alpha",
    "radius",
    "params_json",
];

impl EstimateReport {
    pub fn new(name: &str, paper_eq: &str, direction: Direction, lhs: f64, rhs: f64) -> Self {
        let margin = match direction {
            Direction::Upper => rhs - lhs,
            Direction::Lower => lhs - rhs,
        };
        EstimateReport {
            name: name.to_string(),
            paper_eq: paper_eq.to_string(),
            direction,
            lhs,
            rhs,
            margin,
            passed: margin >= 0.0,
            skipped: None,
            time: None,
            center: None,
            radius: None,
            params: BTreeMap::new(),
        }
    }

    pub fn upper(name: &str, paper_eq: &str, lhs: f64, rhs: f64) -> Self {
        Self::new(name, paper_eq, Direction::Upper, lhs, rhs)
    }

    pub fn lower(name: &str, paper_eq: &str, lhs: f64, rhs: f64) -> Self {
        Self::new(name, paper_eq, Direction::Lower, lhs, rhs)
    }

    /// A report whose check was not performed.
    pub fn skipped(name: &str, paper_eq: &str, direction: Direction, reason: impl Into<String>) -> Self {
        let mut r = Self::new(name, paper_eq, direction, f64::NAN, f64::NAN);
        r.margin = f64::NAN;
        r.passed = false;
        r.skipped = Some(reason.into());
        r
    }

    pub fn is_skipped(&self) -> bool {
        self.skipped.is_some()
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn at(mut self, center: QuotientPoint, radius: f64) -> Self {
        self.center = Some(center);
        self.radius = Some(radius);
        self
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// The row in [`CSV_COLUMNS`] order. Skipped reports print `skipped` in
    /// the `passed` column and carry the reason in `params_json`.
    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        let mut params = serde_json::Map::new();
        for (k, v) in &self.params {
            params.insert(k.clone(), json_number(*v));
        }
        if let Some(reason) = &self.skipped {
            params.insert("skip_reason".into(), serde_json::Value::String(reason.clone()));
        }
        vec![
            self.name.clone(),
            self.paper_eq.clone(),
            self.direction.as_str().to_string(),
            fmt_num(self.lhs),
            fmt_num(self.rhs),
            fmt_num(self.margin),
            if self.is_skipped() { "skipped".into() } else { self.passed.to_string() },
            opt(self.time),
            opt(self.center.map(|c| c.s)),
            opt(self.center.map(|c| c.alpha)),
            opt(self.radius),
            serde_json::Value::Object(params).to_string(),
        ]
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.12e}")
    }
}

fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or_else(|| serde_json::Value::String(v.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_follows_direction() {
        let u = EstimateReport::upper("u", "a ≤ b", 1.0, 3.0);
        assert_eq!(u.margin, 2.0);
        assert!(u.passed);
        let l = EstimateReport::lower("l", "a ≥ b", 1.0, 3.0);
        assert_eq!(l.margin, -2.0);
        assert!(!l.passed);
    }

    #[test]
    fn csv_row_matches_columns() {
        let r = EstimateReport::upper("x", "eq", 0.5, 1.0)
            .at(QuotientPoint::new(0.25, 0.0), 0.1)
            .at_time(0.01)
            .param("A", 2.0);
        let row = r.csv_row();
        assert_eq!(row.len(), CSV_COLUMNS.len());
        assert_eq!(row[6], "true");
        assert_eq!(row[11], r#"{"A":2.0}"#);
        let s = EstimateReport::skipped("y", "eq", Direction::Lower, "radius above threshold");
        assert_eq!(s.csv_row()[6], "skipped");
    }
}
