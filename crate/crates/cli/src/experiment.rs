//! The experiment runner: sweeps one variable over many seeded random
//! deployments, runs coalition formation and the baseline schemes, and
//! writes per-cell rows plus aggregated means with confidence intervals.
//!
//! Deployments are embarrassingly parallel; every random stream derives
//! from the master seed, the deployment index, and a purpose tag, and
//! results are gathered in deployment order, so output bytes never depend
//! on thread count. Deployment streams deliberately do not depend on the
//! sweep value: a budget sweep replays identical deployments and visit
//! orders under different budgets, which is what makes saturation
//! comparisons exact.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use pilotcluster_core::baselines::{
    exhaustive_optimum, random_structure, singleton_structure, PARTITION_LIMIT,
};
use pilotcluster_core::formation::{run_formation, FormationOptions};
use pilotcluster_core::game::{Budget, CoalitionStructure, DEFAULT_EPS_REL};
use pilotcluster_core::geometry::Deployment;
use pilotcluster_core::propagation::PropagationStats;
use pilotcluster_core::seeds::sub_rng;
use pilotcluster_core::utility::{
    full_reuse_utilities, scheduled_counts, structure_utilities, CombiningScheme, SystemParams,
};
use pilotcluster_core::Error as CoreError;

use crate::config::{AutoOr, ExperimentConfig, SweepValue, SweepVar};

/// Fixed parameters of one sweep point.
#[derive(Debug, Clone)]
pub struct PointParams {
    pub cells: usize,
    pub antennas: usize,
    pub frame_symbols: usize,
    pub alpha: f64,
    pub snr: f64,
    pub density: f64,
    pub gamma: f64,
    pub d_min: f64,
    pub k_max: usize,
    pub budget: Budget,
    pub target_avg_size: usize,
    pub max_rounds: usize,
}

/// Resolves the parameters in force at one sweep value.
pub fn point_params(config: &ExperimentConfig, value: &SweepValue) -> Result<PointParams> {
    let mut cells = config.cells;
    let mut antennas = config.antennas;
    let mut alpha = config.alpha;
    let mut k_max_setting = config.k_max;
    let mut budget = config.budget;
    match (config.sweep, value) {
        (SweepVar::Cells, SweepValue::Count(v)) => cells = *v,
        (SweepVar::Antennas, SweepValue::Count(v)) => antennas = *v,
        (SweepVar::KMax, SweepValue::Count(v)) => k_max_setting = AutoOr::Value(*v),
        (SweepVar::Alpha, SweepValue::Fraction(v)) => alpha = *v,
        (SweepVar::Budget, SweepValue::Budget(b)) => budget = *b,
        (var, v) => bail!("sweep value {v:?} does not fit variable {}", var.key()),
    }
    let pilots_per_cell = (alpha * config.frame_symbols as f64 / cells as f64).floor() as usize;
    if pilots_per_cell < 1 {
        bail!("alpha {alpha} leaves no pilot per cell at L = {cells}");
    }
    let k_max = match k_max_setting {
        // Unsaturated scheduling: every cell could absorb the whole budget.
        AutoOr::Auto => cells * pilots_per_cell,
        AutoOr::Value(v) => v,
    };
    let target_avg_size = match config.target_avg_size {
        AutoOr::Auto => (cells as f64).sqrt().ceil() as usize,
        AutoOr::Value(v) => v,
    };
    Ok(PointParams {
        cells,
        antennas,
        frame_symbols: config.frame_symbols,
        alpha,
        snr: config.snr_linear(),
        density: config.density,
        gamma: config.gamma,
        d_min: config.d_min,
        k_max,
        budget,
        target_avg_size: target_avg_size.clamp(1, cells),
        max_rounds: match config.max_rounds {
            AutoOr::Auto => 100 * cells,
            AutoOr::Value(v) => v,
        },
    })
}

impl PointParams {
    pub fn system_params(&self) -> Result<SystemParams> {
        SystemParams::new(
            self.antennas,
            self.frame_symbols,
            self.alpha,
            self.snr,
            vec![self.k_max; self.cells],
        )
        .context("invalid system parameters at a sweep point")
    }
}

/// One per-cell output row.
#[derive(Debug, Clone)]
pub struct Row {
    pub sweep_value: String,
    pub deployment: usize,
    pub scheme: &'static str,
    pub init: &'static str,
    pub cell: usize,
    pub se: f64,
    pub coalition_size: usize,
    pub messages: u64,
    pub k_scheduled: usize,
}

/// One final structure (for the stability checker).
#[derive(Debug, Clone)]
pub struct StructureRow {
    pub sweep_value: String,
    pub deployment: usize,
    pub scheme: &'static str,
    pub init: &'static str,
    pub structure: String,
}

/// One applied deviation from a formation run.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub sweep_value: String,
    pub deployment: usize,
    pub init: &'static str,
    pub t: usize,
    pub bs: usize,
    pub source_block: String,
    pub target_block: String,
    /// Semicolon-joined per-cell utilities.
    pub utilities_before: String,
    pub utilities_after: String,
}

/// Everything produced for one combining scheme.
#[derive(Debug, Default)]
pub struct SchemeOutput {
    pub rows: Vec<Row>,
    pub structures: Vec<StructureRow>,
    pub traces: Vec<TraceRow>,
    pub skipped_zf_infeasible: usize,
}

fn trace_rows(
    value_label: &str,
    deployment_index: usize,
    init: &'static str,
    result: &pilotcluster_core::formation::FormationResult,
) -> Vec<TraceRow> {
    let join = |values: &[f64]| {
        values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";")
    };
    let block_text = |members: &[usize]| {
        let inner = members
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!("{{{inner}}}")
    };
    result
        .deviations
        .iter()
        .map(|record| TraceRow {
            sweep_value: value_label.to_string(),
            deployment: deployment_index,
            init,
            t: record.t,
            bs: record.bs,
            source_block: block_text(&record.before.coalition_of(record.bs)),
            target_block: block_text(&record.joined),
            utilities_before: join(&record.utilities_before),
            utilities_after: join(&record.utilities_after),
        })
        .collect()
}

/// Deterministic per-deployment inputs, shared by every scheme and value
/// with the same L.
pub fn deployment_bundle(
    config: &ExperimentConfig,
    point: &PointParams,
    deployment_index: usize,
) -> Result<(Deployment, PropagationStats)> {
    let mut dep_rng = sub_rng(config.seed, deployment_index as u64, "deployment");
    let deployment = Deployment::generate(
        point.cells,
        point.density,
        point.gamma,
        point.d_min,
        &mut dep_rng,
    )?;
    let mut mu_rng = sub_rng(config.seed, deployment_index as u64, "mu");
    let stats = PropagationStats::estimate(&deployment, config.mu_samples, &mut mu_rng)?;
    Ok((deployment, stats))
}

/// Evaluates every requested scheme for one (sweep value, deployment).
#[allow(clippy::too_many_arguments)]
fn evaluate_deployment(
    config: &ExperimentConfig,
    point: &PointParams,
    params: &SystemParams,
    stats: &PropagationStats,
    scheme: CombiningScheme,
    value_label: &str,
    deployment_index: usize,
) -> Result<SchemeOutput> {
    let mut out = SchemeOutput::default();
    let l = point.cells;
    let budgets = vec![point.budget; l];
    let options = FormationOptions {
        max_rounds: point.max_rounds,
        eps_rel: DEFAULT_EPS_REL,
    };

    let push = |out: &mut SchemeOutput,
                    name: &'static str,
                    init: &'static str,
                    structure: &CoalitionStructure,
                    messages: Option<&[u64]>|
     -> Result<()> {
        let utilities = match structure_utilities(structure, stats, params, scheme) {
            Ok((per_cell, _)) => per_cell,
            Err(CoreError::ZfInfeasible { .. }) => {
                out.skipped_zf_infeasible += 1;
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        let k = scheduled_counts(structure, params);
        for cell in 0..structure.n_cells() {
            out.rows.push(Row {
                sweep_value: value_label.to_string(),
                deployment: deployment_index,
                scheme: name,
                init,
                cell,
                se: utilities[cell],
                coalition_size: structure.coalition_size(cell),
                messages: messages.map_or(0, |m| m[cell]),
                k_scheduled: k[cell],
            });
        }
        out.structures.push(StructureRow {
            sweep_value: value_label.to_string(),
            deployment: deployment_index,
            scheme: name,
            init,
            structure: structure.to_string(),
        });
        Ok(())
    };

    // Coalition formation from singleton initialization; its scheduling also
    // feeds the full-reuse baseline.
    let mut singleton_counts: Option<Vec<usize>> = None;
    if config.init_singletons {
        let tag = format!("formation-{scheme}-singletons");
        let mut rng = sub_rng(config.seed, deployment_index as u64, &tag);
        match run_formation(
            singleton_structure(l),
            &budgets,
            params,
            stats,
            scheme,
            &mut rng,
            &options,
        ) {
            Ok(result) => {
                singleton_counts = Some(scheduled_counts(&result.final_structure, params));
                out.traces
                    .extend(trace_rows(value_label, deployment_index, "singletons", &result));
                push(
                    &mut out,
                    "formation",
                    "singletons",
                    &result.final_structure,
                    Some(&result.messages),
                )?;
            }
            Err(CoreError::ZfInfeasible { .. }) => out.skipped_zf_infeasible += 1,
            Err(e) => return Err(e.into()),
        }
    }

    if config.init_random {
        let tag = format!("formation-{scheme}-random");
        let mut init_rng = sub_rng(config.seed, deployment_index as u64, "init-random");
        let initial = random_structure(l, point.target_avg_size, &mut init_rng)?;
        let mut rng = sub_rng(config.seed, deployment_index as u64, &tag);
        match run_formation(initial, &budgets, params, stats, scheme, &mut rng, &options) {
            Ok(result) => {
                out.traces
                    .extend(trace_rows(value_label, deployment_index, "random", &result));
                push(
                    &mut out,
                    "formation",
                    "random",
                    &result.final_structure,
                    Some(&result.messages),
                )?
            }
            Err(CoreError::ZfInfeasible { .. }) => out.skipped_zf_infeasible += 1,
            Err(e) => return Err(e.into()),
        }
    }

    if config.baselines {
        push(&mut out, "noncooperation", "-", &singleton_structure(l), None)?;

        let mut rng = sub_rng(config.seed, deployment_index as u64, "random-structure");
        let random = random_structure(l, point.target_avg_size, &mut rng)?;
        push(&mut out, "random", "-", &random, None)?;

        // Full pilot reuse with scheduling taken from the singleton-init
        // formation run (falling back to grand-coalition scheduling when
        // that run is disabled).
        let counts = singleton_counts
            .unwrap_or_else(|| scheduled_counts(&CoalitionStructure::grand(l), params));
        match full_reuse_utilities(&counts, stats, params, scheme) {
            Ok(utilities) => {
                for cell in 0..l {
                    out.rows.push(Row {
                        sweep_value: value_label.to_string(),
                        deployment: deployment_index,
                        scheme: "full_reuse",
                        init: "-",
                        cell,
                        se: utilities[cell],
                        coalition_size: l,
                        messages: 0,
                        k_scheduled: counts[cell],
                    });
                }
                out.structures.push(StructureRow {
                    sweep_value: value_label.to_string(),
                    deployment: deployment_index,
                    scheme: "full_reuse",
                    init: "-",
                    structure: CoalitionStructure::grand(l).to_string(),
                });
            }
            Err(CoreError::ZfInfeasible { .. }) => out.skipped_zf_infeasible += 1,
            Err(e) => return Err(e.into()),
        }
    }

    if config.exhaustive && l <= PARTITION_LIMIT {
        match exhaustive_optimum(l, stats, params, scheme) {
            Ok(result) => push(&mut out, "optimum", "-", &result.best, None)?,
            Err(CoreError::ZfInfeasible { .. }) => out.skipped_zf_infeasible += 1,
            Err(e) => return Err(e.into()),
        }
    }

    Ok(out)
}

/// Aggregated statistics for one (sweep value, scheme, init, metric).
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub sweep_value: String,
    pub scheme: &'static str,
    pub init: &'static str,
    pub metric: &'static str,
    pub mean: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

pub const METRICS: [&str; 4] = ["se_bit_per_symbol", "coalition_size", "messages", "k_scheduled"];

fn metric_of(row: &Row, metric: &str) -> f64 {
    match metric {
        "se_bit_per_symbol" => row.se,
        "coalition_size" => row.coalition_size as f64,
        "messages" => row.messages as f64,
        "k_scheduled" => row.k_scheduled as f64,
        _ => unreachable!("unknown metric"),
    }
}

/// Mean over deployments of the per-deployment cell means, with a normal
/// 95% confidence interval over deployments. Keys appear in first-occurrence
/// order; deployments contribute in ascending index order.
pub fn aggregate_rows(rows: &[Row]) -> Vec<Aggregate> {
    use std::collections::BTreeMap;

    type Key = (String, &'static str, &'static str);
    let mut order: Vec<Key> = Vec::new();
    // key -> deployment -> per-metric (sum, count)
    let mut grouped: BTreeMap<Key, BTreeMap<usize, [(f64, usize); METRICS.len()]>> =
        BTreeMap::new();
    for row in rows {
        let key = (row.sweep_value.clone(), row.scheme, row.init);
        if !grouped.contains_key(&key) {
            order.push(key.clone());
        }
        let cells = grouped
            .entry(key)
            .or_default()
            .entry(row.deployment)
            .or_insert([(0.0, 0); METRICS.len()]);
        for (slot, &metric) in METRICS.iter().enumerate() {
            cells[slot].0 += metric_of(row, metric);
            cells[slot].1 += 1;
        }
    }

    let mut aggregates = Vec::new();
    for key in order {
        let per_dep = &grouped[&key];
        let (value, scheme, init) = key;
        for (slot, &metric) in METRICS.iter().enumerate() {
            let per_deployment: Vec<f64> = per_dep
                .values()
                .map(|cells| cells[slot].0 / cells[slot].1 as f64)
                .collect();
            let n = per_deployment.len() as f64;
            let mean = per_deployment.iter().sum::<f64>() / n;
            let sd = if per_deployment.len() > 1 {
                (per_deployment.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let half = 1.96 * sd / n.sqrt();
            aggregates.push(Aggregate {
                sweep_value: value.clone(),
                scheme,
                init,
                metric,
                mean,
                ci95_low: mean - half,
                ci95_high: mean + half,
            });
        }
    }
    aggregates
}

/// Full experiment outputs for one combining scheme.
pub struct ExperimentOutput {
    pub scheme: CombiningScheme,
    pub rows: Vec<Row>,
    pub structures: Vec<StructureRow>,
    pub traces: Vec<TraceRow>,
    pub aggregates: Vec<Aggregate>,
    pub skipped_zf_infeasible: usize,
}

/// Runs the configured experiment in memory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentOutput>> {
    let mut outputs: Vec<ExperimentOutput> = config
        .schemes
        .iter()
        .map(|&scheme| ExperimentOutput {
            scheme,
            rows: Vec::new(),
            structures: Vec::new(),
            traces: Vec::new(),
            aggregates: Vec::new(),
            skipped_zf_infeasible: 0,
        })
        .collect();

    for value in &config.values {
        let point = point_params(config, value)?;
        let params = point.system_params()?;
        let value_label = value.to_string();

        // Deployments in parallel, gathered in index order.
        let per_deployment: Vec<Vec<SchemeOutput>> = (0..config.n_deployments)
            .into_par_iter()
            .map(|d| -> Result<Vec<SchemeOutput>> {
                let (_deployment, stats) = deployment_bundle(config, &point, d)?;
                config
                    .schemes
                    .iter()
                    .map(|&scheme| {
                        evaluate_deployment(
                            config,
                            &point,
                            &params,
                            &stats,
                            scheme,
                            &value_label,
                            d,
                        )
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;

        for bundle in per_deployment {
            for (slot, scheme_out) in bundle.into_iter().enumerate() {
                outputs[slot].rows.extend(scheme_out.rows);
                outputs[slot].structures.extend(scheme_out.structures);
                outputs[slot].traces.extend(scheme_out.traces);
                outputs[slot].skipped_zf_infeasible += scheme_out.skipped_zf_infeasible;
            }
        }
    }

    for output in &mut outputs {
        output.aggregates = aggregate_rows(&output.rows);
    }
    Ok(outputs)
}

/// Renders the run metadata file content.
pub fn run_metadata(config: &ExperimentConfig, outputs: &[ExperimentOutput]) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "sweep = {}", config.sweep.key());
    let _ = writeln!(
        text,
        "values = {}",
        config
            .values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    let _ = writeln!(text, "seed = {}", config.seed);
    let _ = writeln!(text, "n_deployments = {}", config.n_deployments);
    let _ = writeln!(
        text,
        "objective = sum of per-cell spectral efficiencies (averages reported per cell)"
    );
    for output in outputs {
        let _ = writeln!(
            text,
            "skipped_zf_infeasible_{} = {}",
            output.scheme, output.skipped_zf_infeasible
        );
    }
    text
}

/// Output file paths for a combining scheme.
pub fn output_paths(out_dir: &std::path::Path, scheme: CombiningScheme) -> (PathBuf, PathBuf, PathBuf) {
    (
        out_dir.join(format!("rows_{scheme}.csv")),
        out_dir.join(format!("agg_{scheme}.csv")),
        out_dir.join(format!("structures_{scheme}.csv")),
    )
}
