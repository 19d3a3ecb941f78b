//! CSV writers and readers for experiment and validation outputs. Floats
//! are written with Rust's shortest round-trip formatting, so parsing a
//! file back yields bit-identical values and repeated runs produce
//! byte-identical bytes.

use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::experiment::{Aggregate, Row, StructureRow};
use pilotcluster_core::validator::ValidationReport;
use pilotcluster_core::CombiningScheme;

pub const ROWS_HEADER: [&str; 10] = [
    "sweep_var",
    "sweep_value",
    "deployment",
    "scheme",
    "init",
    "cell",
    "se_bit_per_symbol",
    "coalition_size",
    "messages",
    "k_scheduled",
];

pub const AGG_HEADER: [&str; 8] = [
    "sweep_var",
    "sweep_value",
    "scheme",
    "init",
    "metric",
    "mean",
    "ci95_low",
    "ci95_high",
];

pub const STRUCTURES_HEADER: [&str; 6] = [
    "sweep_var",
    "sweep_value",
    "deployment",
    "scheme",
    "init",
    "structure",
];

pub const VALIDATION_HEADER: [&str; 6] =
    ["cell", "scheme", "closed_form", "mc", "std_err", "gap"];

pub const TRACE_HEADER: [&str; 10] = [
    "sweep_var",
    "sweep_value",
    "deployment",
    "init",
    "t",
    "bs",
    "source_block",
    "target_block",
    "utilities_before",
    "utilities_after",
];

pub fn write_traces(path: &Path, sweep_var: &str, rows: &[crate::experiment::TraceRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(TRACE_HEADER)?;
    for row in rows {
        writer.write_record([
            sweep_var,
            &row.sweep_value,
            &row.deployment.to_string(),
            row.init,
            &row.t.to_string(),
            &row.bs.to_string(),
            &row.source_block,
            &row.target_block,
            &row.utilities_before,
            &row.utilities_after,
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_rows(path: &Path, sweep_var: &str, rows: &[Row]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(ROWS_HEADER)?;
    for row in rows {
        writer.write_record([
            sweep_var,
            &row.sweep_value,
            &row.deployment.to_string(),
            row.scheme,
            row.init,
            &row.cell.to_string(),
            &row.se.to_string(),
            &row.coalition_size.to_string(),
            &row.messages.to_string(),
            &row.k_scheduled.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_aggregates(path: &Path, sweep_var: &str, aggregates: &[Aggregate]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(AGG_HEADER)?;
    for a in aggregates {
        writer.write_record([
            sweep_var,
            &a.sweep_value,
            a.scheme,
            a.init,
            a.metric,
            &a.mean.to_string(),
            &a.ci95_low.to_string(),
            &a.ci95_high.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_structures(path: &Path, sweep_var: &str, rows: &[StructureRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(STRUCTURES_HEADER)?;
    for row in rows {
        writer.write_record([
            sweep_var,
            &row.sweep_value,
            &row.deployment.to_string(),
            row.scheme,
            row.init,
            &row.structure,
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_validation(
    path: &Path,
    scheme: CombiningScheme,
    report: &ValidationReport,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(VALIDATION_HEADER)?;
    for row in &report.rows {
        writer.write_record([
            row.cell.to_string(),
            scheme.to_string(),
            row.closed_form.to_string(),
            row.mc_estimate.to_string(),
            row.std_err.to_string(),
            row.gap.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// A parsed aggregate CSV used by plotting and tests.
#[derive(Debug, Clone)]
pub struct AggTable {
    pub sweep_var: String,
    pub rows: Vec<AggRecord>,
}

#[derive(Debug, Clone)]
pub struct AggRecord {
    pub sweep_value: String,
    pub scheme: String,
    pub init: String,
    pub metric: String,
    pub mean: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

pub fn read_aggregates(path: &Path) -> Result<AggTable> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let expected: Vec<&str> = AGG_HEADER.to_vec();
    for column in &expected {
        if !headers.iter().any(|h| h == *column) {
            bail!("missing column '{column}' in {}", path.display());
        }
    }
    let index = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (iv, is, ii, im, imean, ilow, ihigh) = (
        index("sweep_value"),
        index("scheme"),
        index("init"),
        index("metric"),
        index("mean"),
        index("ci95_low"),
        index("ci95_high"),
    );
    let isweep = index("sweep_var");
    let mut sweep_var = String::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        sweep_var = record[isweep].to_string();
        rows.push(AggRecord {
            sweep_value: record[iv].to_string(),
            scheme: record[is].to_string(),
            init: record[ii].to_string(),
            metric: record[im].to_string(),
            mean: record[imean].parse()?,
            ci95_low: record[ilow].parse()?,
            ci95_high: record[ihigh].parse()?,
        });
    }
    if rows.is_empty() {
        bail!("no data rows in {}", path.display());
    }
    Ok(AggTable { sweep_var, rows })
}
