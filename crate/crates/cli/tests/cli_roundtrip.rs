//! End-to-end checks of the command-line surface: the real binary, CSV
//! schemas, aggregate recomputation, and plot determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

use pilotcluster_cli::config::ExperimentConfig;
use pilotcluster_cli::csvio::{self, read_aggregates};
use pilotcluster_cli::experiment::{output_paths, run_experiment};
use pilotcluster_cli::plot::{plot, PlotSpec};

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pilotcluster-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("exp.txt");
    std::fs::write(
        &path,
        format!(
            "seed = 21\nschemes = mrc\nsweep = L\nvalues = 4,6\nM = 300\n\
             n_deployments = 5\nmu_samples = 1500\nout_dir = {}\n{extra}",
            dir.join("out").display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn run_writes_exact_headers_and_consistent_aggregates() {
    let dir = temp_dir("roundtrip");
    let config_path = small_config(&dir, "");
    let config = ExperimentConfig::load(&config_path, &[]).unwrap();
    let outputs = run_experiment(&config).unwrap();
    let out_dir = dir.join("out");
    std::fs::create_dir_all(&out_dir).unwrap();
    let (rows_path, agg_path, _) = output_paths(&out_dir, outputs[0].scheme);
    csvio::write_rows(&rows_path, "L", &outputs[0].rows).unwrap();
    csvio::write_aggregates(&agg_path, "L", &outputs[0].aggregates).unwrap();

    let rows_text = std::fs::read_to_string(&rows_path).unwrap();
    assert!(rows_text.starts_with(
        "sweep_var,sweep_value,deployment,scheme,init,cell,se_bit_per_symbol,coalition_size,messages,k_scheduled\n"
    ));
    let agg_text = std::fs::read_to_string(&agg_path).unwrap();
    assert!(agg_text
        .starts_with("sweep_var,sweep_value,scheme,init,metric,mean,ci95_low,ci95_high\n"));

    // The reported mean is exactly the mean of the per-deployment cell
    // means recomputed from the written rows.
    let mut reader = csv::Reader::from_path(&rows_path).unwrap();
    let mut parsed: Vec<(String, String, String, usize, f64)> = Vec::new();
    for record in reader.records() {
        let r = record.unwrap();
        parsed.push((
            r[1].to_string(),
            r[3].to_string(),
            r[4].to_string(),
            r[2].parse().unwrap(),
            r[6].parse().unwrap(),
        ));
    }
    let table = read_aggregates(&agg_path).unwrap();
    for agg in table
        .rows
        .iter()
        .filter(|a| a.metric == "se_bit_per_symbol")
    {
        let mut deployment_ids: Vec<usize> = Vec::new();
        for (value, scheme, init, dep, _) in &parsed {
            if *value == agg.sweep_value
                && *scheme == agg.scheme
                && *init == agg.init
                && !deployment_ids.contains(dep)
            {
                deployment_ids.push(*dep);
            }
        }
        let per_dep: Vec<f64> = deployment_ids
            .iter()
            .map(|d| {
                let cells: Vec<f64> = parsed
                    .iter()
                    .filter(|(value, scheme, init, dep, _)| {
                        *value == agg.sweep_value
                            && *scheme == agg.scheme
                            && *init == agg.init
                            && dep == d
                    })
                    .map(|(_, _, _, _, se)| *se)
                    .collect();
                cells.iter().sum::<f64>() / cells.len() as f64
            })
            .collect();
        let recomputed = per_dep.iter().sum::<f64>() / per_dep.len() as f64;
        assert_eq!(
            recomputed, agg.mean,
            "aggregate mismatch for {} {} {}",
            agg.sweep_value, agg.scheme, agg.init
        );
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn plot_is_deterministic_and_validates_inputs() {
    let dir = temp_dir("plot");
    let config_path = small_config(&dir, "");
    let config = ExperimentConfig::load(&config_path, &[]).unwrap();
    let outputs = run_experiment(&config).unwrap();
    let out_dir = dir.join("out");
    std::fs::create_dir_all(&out_dir).unwrap();
    let (_, agg_path, _) = output_paths(&out_dir, outputs[0].scheme);
    csvio::write_aggregates(&agg_path, "L", &outputs[0].aggregates).unwrap();

    let spec = PlotSpec {
        metric: "se_bit_per_symbol".into(),
        out: String::new(),
        title: "roundtrip".into(),
        x_label: None,
        y_label: None,
        series_filter: None,
    };
    let svg_a = dir.join("a.svg");
    let svg_b = dir.join("b.svg");
    plot(&agg_path, &spec, &svg_a).unwrap();
    plot(&agg_path, &spec, &svg_b).unwrap();
    assert_eq!(
        std::fs::read(&svg_a).unwrap(),
        std::fs::read(&svg_b).unwrap(),
        "plot output must be byte-identical"
    );

    // Unknown metric and empty tables are rejected.
    let bad_spec = PlotSpec {
        metric: "not_a_metric".into(),
        ..spec.clone()
    };
    assert!(plot(&agg_path, &bad_spec, &dir.join("c.svg")).is_err());
    let empty = dir.join("empty.csv");
    std::fs::write(&empty, "sweep_var,sweep_value,scheme,init,metric,mean,ci95_low,ci95_high\n")
        .unwrap();
    assert!(plot(&empty, &spec, &dir.join("d.svg")).is_err());
    let missing = dir.join("missing.csv");
    std::fs::write(&missing, "sweep_var,sweep_value\nL,4\n").unwrap();
    let err = plot(&missing, &spec, &dir.join("e.svg")).unwrap_err();
    assert!(err.to_string().contains("missing column"), "{err}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn binary_runs_the_full_pipeline() {
    let dir = temp_dir("binary");
    let config_path = small_config(&dir, "exhaustive = true\n");
    let binary = env!("CARGO_BIN_EXE_pilotcluster");

    let status = Command::new(binary)
        .args(["run", config_path.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let out_dir = dir.join("out");
    for file in ["rows_mrc.csv", "agg_mrc.csv", "structures_mrc.csv", "run_meta.txt", "se_vs_L_mrc.svg"] {
        assert!(out_dir.join(file).exists(), "{file} missing");
    }

    // plot subcommand on the generated aggregate table.
    let spec_path = dir.join("plot.txt");
    std::fs::write(
        &spec_path,
        format!("metric = coalition_size\nout = {}\n", dir.join("sizes.svg").display()),
    )
    .unwrap();
    let status = Command::new(binary)
        .args([
            "plot",
            out_dir.join("agg_mrc.csv").to_str().unwrap(),
            spec_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("sizes.svg").exists());

    // stability-check over the recorded structures.
    let output = Command::new(binary)
        .args([
            "stability-check",
            out_dir.join("structures_mrc.csv").to_str().unwrap(),
            config_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("structures individually stable"));

    // validate on a small configuration.
    let val_config = dir.join("val.txt");
    std::fs::write(
        &val_config,
        format!(
            "seed = 5\nschemes = mrc\nsweep = L\nvalues = 2\nM = 64\nk_max = 12\n\
             n_deployments = 1\nn_position_draws = 30\nn_channel_draws = 40\nout_dir = {}\n",
            dir.join("val_out").display()
        ),
    )
    .unwrap();
    let output = Command::new(binary)
        .args(["validate", val_config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "validate failed: {}",
        String::from_utf8_lossy(&output.stdout)
    );
    assert!(dir.join("val_out").join("validation_mrc.csv").exists());
    let text = std::fs::read_to_string(dir.join("val_out").join("validation_mrc.csv")).unwrap();
    assert!(text.starts_with("cell,scheme,closed_form,mc,std_err,gap\n"));
    let _ = std::fs::remove_dir_all(&dir);
}
