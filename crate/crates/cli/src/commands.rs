//! Subcommand drivers: `run`, `validate`, and `stability-check`.

use std::path::Path;

use anyhow::{bail, Context, Result};

use pilotcluster_core::baselines::{random_structure, singleton_structure};
use pilotcluster_core::game::{CoalitionStructure, GameState, DEFAULT_EPS_REL};
use pilotcluster_core::game::is_individually_stable;
use pilotcluster_core::seeds::sub_rng;
use pilotcluster_core::utility::scheduled_counts;
use pilotcluster_core::validator::{validate, ValidationSettings};

use crate::config::{ExperimentConfig, SweepValue, SweepVar};
use crate::csvio;
use crate::experiment::{
    deployment_bundle, output_paths, point_params, run_experiment, run_metadata,
};
use crate::plot::{plot, PlotSpec};

/// `run <config>`: execute the experiment and write CSV tables, the run
/// metadata, and a default SVG per combining scheme.
pub fn cmd_run(config_path: &Path, overrides: &[String]) -> Result<()> {
    let config = ExperimentConfig::load(config_path, overrides)?;
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("cannot create {}", config.out_dir.display()))?;
    let outputs = run_experiment(&config)?;
    let sweep_var = config.sweep.key();

    for output in &outputs {
        let (rows_path, agg_path, structures_path) = output_paths(&config.out_dir, output.scheme);
        csvio::write_rows(&rows_path, sweep_var, &output.rows)?;
        csvio::write_aggregates(&agg_path, sweep_var, &output.aggregates)?;
        csvio::write_structures(&structures_path, sweep_var, &output.structures)?;
        csvio::write_traces(
            &config.out_dir.join(format!("trace_{}.csv", output.scheme)),
            sweep_var,
            &output.traces,
        )?;

        let spec = PlotSpec {
            metric: "se_bit_per_symbol".into(),
            out: String::new(),
            title: format!("average SE per cell vs {sweep_var} ({})", output.scheme),
            x_label: None,
            y_label: None,
            series_filter: None,
        };
        let svg_path = config
            .out_dir
            .join(format!("se_vs_{sweep_var}_{}.svg", output.scheme));
        match plot(&agg_path, &spec, &svg_path) {
            Ok(()) => println!("wrote {}", svg_path.display()),
            // A pure budget sweep has no numeric x axis for "inf"-only data.
            Err(e) => eprintln!("plot skipped: {e}"),
        }
        println!(
            "wrote {} ({} rows), {}, {}",
            rows_path.display(),
            output.rows.len(),
            agg_path.display(),
            structures_path.display()
        );
    }
    std::fs::write(
        config.out_dir.join("run_meta.txt"),
        run_metadata(&config, &outputs),
    )?;
    Ok(())
}

/// `plot <csv> <spec>`: render an aggregated CSV into an SVG.
pub fn cmd_plot(csv_path: &Path, spec_path: &Path) -> Result<()> {
    let spec = PlotSpec::load(spec_path)?;
    let out = std::path::PathBuf::from(&spec.out);
    plot(csv_path, &spec, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

/// `validate <config>`: compare closed-form utilities against the
/// channel-level Monte Carlo estimate on one deployment. Exits nonzero if a
/// cell fails the bound or gap check.
pub fn cmd_validate(config_path: &Path, overrides: &[String]) -> Result<bool> {
    let config = ExperimentConfig::load(config_path, overrides)?;
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("cannot create {}", config.out_dir.display()))?;
    // Fixed parameters come from the first sweep value.
    let point = point_params(&config, &config.values[0])?;
    let params = point.system_params()?;
    let (deployment, _) = deployment_bundle(&config, &point, 0)?;

    let structure = match config.val_structure.as_str() {
        "singletons" => singleton_structure(point.cells),
        "grand" => CoalitionStructure::grand(point.cells),
        "random" => {
            let mut rng = sub_rng(config.seed, 0, "validate-structure");
            // Redraw until the structure is evaluable for every requested
            // scheme (zero-forcing needs M > K_j in every cell).
            let mut draw = random_structure(point.cells, point.target_avg_size, &mut rng)?;
            for _ in 0..1000 {
                let k = scheduled_counts(&draw, &params);
                if k.iter().all(|&kj| kj < point.antennas) {
                    break;
                }
                draw = random_structure(point.cells, point.target_avg_size, &mut rng)?;
            }
            draw
        }
        other => bail!("val_structure must be random|singletons|grand, got '{other}'"),
    };
    println!("validating structure {structure}");

    let settings = ValidationSettings {
        n_position_draws: config.n_position_draws,
        n_channel_draws: config.n_channel_draws,
        max_rel_gap: config.max_rel_gap,
    };
    let mut all_pass = true;
    for &scheme in &config.schemes {
        let mut rng = sub_rng(config.seed, 0, "validate-mc");
        let report = validate(&structure, &params, &deployment, scheme, &settings, &mut rng)?;
        let path = config.out_dir.join(format!("validation_{scheme}.csv"));
        csvio::write_validation(&path, scheme, &report)?;
        for row in &report.rows {
            println!(
                "{scheme} cell {:>2}: closed {:8.4}  mc {:8.4} +- {:.4}  gap {:5.2}%  {}",
                row.cell,
                row.closed_form,
                row.mc_estimate,
                row.std_err,
                row.gap * 100.0,
                if row.pass { "pass" } else { "FAIL" }
            );
        }
        println!(
            "{scheme}: {} ({} cells), wrote {}",
            if report.pass { "PASS" } else { "FAIL" },
            report.rows.len(),
            path.display()
        );
        all_pass &= report.pass;
    }
    Ok(all_pass)
}

/// `stability-check <structures.csv> <config>`: re-evaluate individual
/// stability for every recorded final structure. The config must be the
/// one that produced the CSV (deployments are rebuilt from its seed).
pub fn cmd_stability_check(
    csv_path: &Path,
    config_path: &Path,
    overrides: &[String],
) -> Result<(usize, usize)> {
    let config = ExperimentConfig::load(config_path, overrides)?;
    let mut reader = csv::Reader::from_path(csv_path)
        .with_context(|| format!("cannot open {}", csv_path.display()))?;
    let headers = reader.headers()?.clone();
    for column in csvio::STRUCTURES_HEADER {
        if !headers.iter().any(|h| h == column) {
            bail!("missing column '{column}' in {}", csv_path.display());
        }
    }
    let index = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (iv, id, ischeme, iinit, istructure) = (
        index("sweep_value"),
        index("deployment"),
        index("scheme"),
        index("init"),
        index("structure"),
    );

    // The combining scheme is recoverable from the file name written by
    // `run`; fall back to the first configured scheme.
    let combining = config
        .schemes
        .iter()
        .find(|s| {
            csv_path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.contains(&s.to_string()))
        })
        .copied()
        .unwrap_or(config.schemes[0]);

    let mut stable = 0usize;
    let mut total = 0usize;
    for record in reader.records() {
        let record = record?;
        let value_text = &record[iv];
        let value = parse_value(&config, value_text)?;
        let point = point_params(&config, &value)?;
        let params = point.system_params()?;
        let deployment_index: usize = record[id].parse()?;
        let (_, stats) = deployment_bundle(&config, &point, deployment_index)?;
        let structure: CoalitionStructure = record[istructure].parse()?;
        let state = GameState::unbounded(point.cells);
        let report = is_individually_stable(
            &structure,
            &state,
            &stats,
            &params,
            combining,
            DEFAULT_EPS_REL,
        )?;
        total += 1;
        if report.stable {
            stable += 1;
        }
        println!(
            "{value_text} dep {deployment_index} {}/{}: {} {}",
            &record[ischeme],
            &record[iinit],
            record[istructure].to_string(),
            if report.stable { "stable" } else { "UNSTABLE" }
        );
    }
    println!("{stable}/{total} structures individually stable ({combining})");
    Ok((stable, total))
}

fn parse_value(config: &ExperimentConfig, text: &str) -> Result<SweepValue> {
    Ok(match config.sweep {
        SweepVar::Cells | SweepVar::Antennas | SweepVar::KMax => SweepValue::Count(text.parse()?),
        SweepVar::Alpha => SweepValue::Fraction(text.parse()?),
        SweepVar::Budget => SweepValue::Budget(text.parse().map_err(|e| anyhow::anyhow!("{e}"))?),
    })
}
