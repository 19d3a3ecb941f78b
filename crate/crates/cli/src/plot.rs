//! SVG line charts with confidence bands from aggregated CSV tables.
//!
//! The plot spec is the same flat key=value format as experiment configs:
//! `metric` selects the aggregated metric, `out` the SVG path, and `title`,
//! `x_label`, `y_label`, `schemes` (comma list of `scheme:init` filters)
//! are optional. Rendering is a pure function of the CSV bytes and the
//! spec, so regenerating from identical inputs gives identical SVG bytes.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use plotters::prelude::*;

use crate::csvio::{read_aggregates, AggRecord};

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub metric: String,
    pub out: String,
    pub title: String,
    pub x_label: Option<String>,
    pub y_label: Option<String>,
    pub series_filter: Option<Vec<String>>,
}

impl PlotSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read plot spec {}", path.display()))?;
        let mut map = BTreeMap::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("plot spec line '{raw}' is not key=value"))?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self {
            metric: map
                .remove("metric")
                .unwrap_or_else(|| "se_bit_per_symbol".into()),
            out: map.remove("out").unwrap_or_else(|| "plot.svg".into()),
            title: map.remove("title").unwrap_or_default(),
            x_label: map.remove("x_label"),
            y_label: map.remove("y_label"),
            series_filter: map
                .remove("schemes")
                .map(|s| s.split(',').map(|x| x.trim().to_string()).collect()),
        })
    }
}

fn unit_for(metric: &str) -> &'static str {
    match metric {
        "se_bit_per_symbol" => "bit/symbol",
        "coalition_size" | "k_scheduled" => "count",
        "messages" => "packets",
        _ => "",
    }
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

/// Renders one aggregated CSV into an SVG line chart with 95% confidence
/// bands, one series per (scheme, init).
pub fn plot(csv_path: &Path, spec: &PlotSpec, out_path: &Path) -> Result<()> {
    let table = read_aggregates(csv_path)?;
    let records: Vec<&AggRecord> = table
        .rows
        .iter()
        .filter(|r| r.metric == spec.metric)
        .collect();
    if records.is_empty() {
        bail!("no rows with metric '{}' in {}", spec.metric, csv_path.display());
    }

    // Numeric x positions; non-numeric sweep values (an infinite budget)
    // cannot be placed on the axis and are dropped.
    let mut series: BTreeMap<String, Vec<(f64, f64, f64, f64)>> = BTreeMap::new();
    let mut dropped = 0usize;
    for record in records {
        let label = if record.init == "-" {
            record.scheme.clone()
        } else {
            format!("{} ({})", record.scheme, record.init)
        };
        if let Some(filter) = &spec.series_filter {
            if !filter.iter().any(|f| label.starts_with(f.as_str())) {
                continue;
            }
        }
        match record.sweep_value.parse::<f64>() {
            Ok(x) => series
                .entry(label)
                .or_default()
                .push((x, record.mean, record.ci95_low, record.ci95_high)),
            Err(_) => dropped += 1,
        }
    }
    if dropped > 0 {
        eprintln!("plot: dropped {dropped} non-numeric sweep values");
    }
    if series.is_empty() || series.values().all(|v| v.is_empty()) {
        bail!("no plottable data for metric '{}'", spec.metric);
    }
    for points in series.values_mut() {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let x_min = series
        .values()
        .flat_map(|v| v.iter().map(|p| p.0))
        .fold(f64::INFINITY, f64::min);
    let x_max = series
        .values()
        .flat_map(|v| v.iter().map(|p| p.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let y_min = series
        .values()
        .flat_map(|v| v.iter().map(|p| p.2))
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let y_max = series
        .values()
        .flat_map(|v| v.iter().map(|p| p.3))
        .fold(f64::NEG_INFINITY, f64::max);
    let x_pad = ((x_max - x_min) * 0.04).max(1e-9);
    let y_pad = ((y_max - y_min) * 0.06).max(1e-9);

    let root = SVGBackend::new(out_path, (900, 600)).into_drawing_area();
    root.fill(&WHITE)?;
    let x_label = spec
        .x_label
        .clone()
        .unwrap_or_else(|| table.sweep_var.clone());
    let y_label = spec
        .y_label
        .clone()
        .unwrap_or_else(|| format!("{} [{}]", spec.metric, unit_for(&spec.metric)));

    let mut chart = ChartBuilder::on(&root)
        .caption(&spec.title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(42)
        .y_label_area_size(56)
        .build_cartesian_2d(x_min - x_pad..x_max + x_pad, y_min..y_max + y_pad)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()?;

    for (idx, (label, points)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let band: Vec<(f64, f64)> = points
            .iter()
            .map(|&(x, _, lo, _)| (x, lo))
            .chain(points.iter().rev().map(|&(x, _, _, hi)| (x, hi)))
            .collect();
        chart.draw_series(std::iter::once(Polygon::new(band, color.mix(0.15))))?;
        chart
            .draw_series(LineSeries::new(
                points.iter().map(|&(x, mean, _, _)| (x, mean)),
                color.stroke_width(2),
            ))?
            .label(label.clone())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.85))
        .position(SeriesLabelPosition::UpperRight)
        .draw()?;
    root.present()?;
    Ok(())
}
