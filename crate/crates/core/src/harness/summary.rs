//! Method x metric summary tables.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub instance: String,
    pub metrics: BTreeMap<String, f64>,
}

impl SummaryRow {
    pub fn new(method: impl Into<String>, instance: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            instance: instance.into(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn with(mut self, metric: &str, value: f64) -> Self {
        self.metrics.insert(metric.to_string(), value);
        self
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }
}

/// Mean of `metric` over the rows of `method`, skipping rows without it.
pub fn method_mean(rows: &[SummaryRow], method: &str, metric: &str) -> Option<f64> {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.metric(metric))
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Median of `metric` over the rows of `method`.
pub fn method_median(rows: &[SummaryRow], method: &str, metric: &str) -> Option<f64> {
    let mut vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.metric(metric))
        .collect();
    median(&mut vals)
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// CSV with columns `method, instance, <metrics...>, mean_<metrics...>`; metrics sorted by name
/// and each `mean_` column holding the mean over the rows of the same method.
pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::invalid("summary needs at least one record"));
    }
    let names: BTreeSet<&str> = rows.iter().flat_map(|r| r.metrics.keys().map(String::as_str)).collect();
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["method".to_string(), "instance".to_string()];
    header.extend(names.iter().map(|n| n.to_string()));
    header.extend(names.iter().map(|n| format!("mean_{n}")));
    writer.write_record(&header)?;
    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for row in rows {
        let mut record = vec![row.method.clone(), row.instance.clone()];
        record.extend(names.iter().map(|n| fmt(row.metric(n))));
        record.extend(names.iter().map(|n| fmt(method_mean(rows, &row.method, n))));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn emit_summary(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::invalid("summary needs at least one record"));
    }
    write_summary(rows, std::fs::File::create(path)?)
}
