use std::path::Path;
use std::process::Command;

use lti_ident::environments::{load_dataset, save_dataset};
use lti_ident_harness::experiment::{build_dataset, fit_dataset};
use lti_ident_harness::{run_experiment, ExperimentConfig, ExperimentKind, ResultRow, RowStatus};
use serde_json::Value;

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(kind);
    cfg.steps_per_env = 400;
    cfg.fit.epochs = 20;
    cfg.seeds = vec![0, 1];
    cfg
}

/// Replaces every control entry of the stored CSV files with a constant.
fn corrupt_controls(dir: &Path) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if !path.file_name().unwrap().to_string_lossy().starts_with("env_") {
            continue;
        }
        let mut reader = csv::Reader::from_path(&path).unwrap();
        let header = reader.headers().unwrap().clone();
        let mut writer = csv::Writer::from_path(path.with_extension("tmp")).unwrap();
        writer.write_record(&header).unwrap();
        for record in reader.records() {
            let record = record.unwrap();
            let row: Vec<String> = header
                .iter()
                .zip(record.iter())
                .map(|(h, v)| if h.starts_with("u_") && !v.is_empty() { "123.5".to_string() } else { v.to_string() })
                .collect();
            writer.write_record(&row).unwrap();
        }
        writer.flush().unwrap();
        std::fs::rename(path.with_extension("tmp"), &path).unwrap();
    }
}

#[test]
fn estimation_never_reads_stored_controls() {
    for kind in [ExperimentKind::Table1Cell, ExperimentKind::DcMotor] {
        let mut cfg = small(kind);
        cfg.fit.epochs = 5;
        let (_, set) = build_dataset(&cfg, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&set, dir.path()).unwrap();
        corrupt_controls(dir.path());
        let tampered = load_dataset(dir.path()).unwrap();
        assert!(tampered.trajectories[0].u.iter().all(|u| u.iter().all(|&v| v == 123.5)));
        let (a, _) = fit_dataset(&cfg, &set, 3).unwrap();
        let (a2, _) = fit_dataset(&cfg, &set, 3).unwrap();
        assert_eq!(a.matrix(), a2.matrix(), "repeat");
        let (b, _) = fit_dataset(&cfg, &tampered, 3).unwrap();
        assert_eq!(a.matrix(), b.matrix());
    }
}

#[test]
fn experiment_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(ExperimentKind::Table1Cell);
    cfg.output_dir = Some(dir.path().to_path_buf());
    cfg.persist_datasets = true;
    let rows = run_experiment(&cfg).unwrap();
    for name in ["results.csv", "table.csv", "config.toml", "metadata.json"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let table = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert!(table.lines().next().unwrap().ends_with("mean_mcc,std_mcc,n_seeds,n_failed"));
    let stored: Vec<ResultRow> = csv::Reader::from_path(dir.path().join("results.csv"))
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(stored.len(), 2);
    for (row, disk) in rows.iter().zip(&stored) {
        assert_eq!(row.seed, disk.seed);
        assert_eq!(row.dataset_fingerprint, disk.dataset_fingerprint);
        assert_eq!(row.status, RowStatus::Ok);
        assert!((0.0..=1.0).contains(&row.val_mcc.unwrap()));
    }
    let mut again = cfg.clone();
    again.output_dir = None;
    let rerun = run_experiment(&again).unwrap();
    for (x, y) in rows.iter().zip(&rerun) {
        assert_eq!(x.val_mcc, y.val_mcc);
        assert_eq!(x.final_loss, y.final_loss);
        assert_eq!(x.system_fingerprint, y.system_fingerprint);
    }
}

fn cli(out: &Path, args: &[&str]) -> Value {
    let output = Command::new(env!("CARGO_BIN_EXE_lti-ident"))
        .args(args)
        .env("LTI_IDENT_OUTPUT_DIR", out)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let text = String::from_utf8(output.stdout).unwrap();
    serde_json::from_str(&text).unwrap_or(Value::String(text))
}

#[test]
fn cli_runs_the_full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let motor = ["--kind", "dc_motor", "--steps_per_env", "600", "--epochs", "20"];

    let sim = cli(out, &[&["simulate"][..], &motor].concat());
    assert_eq!(sim["environments"], 3);
    assert!(out.join("dataset").join("metadata.json").is_file());
    assert!(out.join("system.json").is_file());

    let dataset = out.join("dataset");
    let dataset = dataset.to_str().unwrap();
    let fitted = cli(out, &[&["fit", "--dataset", dataset][..], &motor].concat());
    assert!(fitted["report"]["final_loss"].as_f64().unwrap() <= fitted["report"]["initial_loss"].as_f64().unwrap());
    let decoder = out.join("decoder.json");
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&decoder).unwrap()).unwrap();
    assert_eq!(doc["dataset_fingerprint"], sim["dataset_fingerprint"]);

    let scored = cli(out, &["mcc", "--dataset", dataset, "--decoder", decoder.to_str().unwrap()]);
    assert!(scored["val_mcc"].as_f64().unwrap() > 0.9, "{scored}");

    let system = out.join("system.json");
    let recovered = out.join("recovered.json");
    let id = cli(
        out,
        &["sysid", "--system", system.to_str().unwrap(), "--out", recovered.to_str().unwrap()],
    );
    assert!(id["transfer_max_rel_error"].as_f64().unwrap() < 1e-7);
    assert!(recovered.is_file());

    let design = cli(out, &["design", "--kind", "table1_cell", "--d_u", "2"]);
    assert_eq!(design["satisfies_variability"], true);
    assert!((design["condition_number"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let exp_dir = out.join("experiment");
    let table = cli(
        out,
        &[
            "experiment",
            "--kind",
            "table1_cell",
            "--steps_per_env",
            "300",
            "--epochs",
            "5",
            "--seeds",
            "0,1",
            "--output_dir",
            exp_dir.to_str().unwrap(),
        ],
    );
    let Value::String(table) = table else { panic!("table is CSV") };
    assert!(table.starts_with("kind,d_u,"), "{table}");
    assert!(exp_dir.join("results.csv").is_file());
}

#[test]
fn cli_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_lti-ident"))
        .args(["design", "--kind", "table1_cell", "--validation_fraction", "1.5"])
        .env("LTI_IDENT_OUTPUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(!status.status.success());
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "kind = \"table1_cell\"\nnot_a_field = 3\n").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_lti-ident"))
        .args(["design", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("not_a_field"));
}
