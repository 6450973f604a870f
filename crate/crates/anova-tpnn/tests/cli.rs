//! End-to-end checks of the `anova-tpnn` binary: exit codes, output
//! formats and idempotence.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_anova-tpnn")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn binary")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("anova_tpnn_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_train_config(dir: &Path, data: &Path, extra_fit: &str) -> PathBuf {
    let config = format!(
        r#"
[data]
path = "{}"
target = "y"

[model]
order = 2
basis_count = 5
seed = 1

[fit]
max_epochs = 10
batch_size = 512
seed = 1
{extra_fit}

[output]
model = "{}"
report = "{}"
"#,
        data.display(),
        dir.join("model.json").display(),
        dir.join("report.json").display(),
    );
    let path = dir.join("train.toml");
    std::fs::write(&path, config).unwrap();
    path
}

#[test]
fn train_predict_explain_pipeline() {
    let dir = tmp_dir("pipeline");
    let data = dir.join("f1.csv");

    let out = run(&["synth", "--kind", "f1", "--n", "800", "--out", data.to_str().unwrap(), "--seed", "5"]);
    assert!(out.status.success(), "synth failed: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("f1.csv.truth.json").exists());

    let config = write_train_config(&dir, &data, "");
    let out = run(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("model.json").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert!(report["selected_epoch"].as_u64().is_some());

    // predictions agree with library forward values spot-checked on 5 rows
    let preds = dir.join("preds.csv");
    let out = run(&["predict", "--model", dir.join("model.json").to_str().unwrap(), "--data", data.to_str().unwrap(), "--out", preds.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let model = anova_tpnn::model::load_model(dir.join("model.json")).unwrap();
    let dataset = anova_tpnn::data::load_csv(&data, "y").unwrap();
    let pred_text = std::fs::read_to_string(&preds).unwrap();
    let mut lines = pred_text.lines();
    assert_eq!(lines.next().unwrap(), "row,prediction");
    for (i, line) in lines.take(5).enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], i.to_string());
        let got: f64 = fields[1].parse().unwrap();
        let row: Vec<f64> = dataset.features.row(i).to_vec();
        let expect = model.forward(&row).unwrap();
        assert_eq!(got.to_bits(), expect.to_bits(), "prediction differs at row {i}");
    }

    // explain: every record carries a sum that matches prediction - beta0
    let shap = dir.join("shap.jsonl");
    let out = run(&["explain", "--model", dir.join("model.json").to_str().unwrap(), "--data", data.to_str().unwrap(), "--out", shap.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for line in std::fs::read_to_string(&shap).unwrap().lines().take(10) {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        let sum = record["sum"].as_f64().unwrap();
        let check = record["prediction_minus_beta0"].as_f64().unwrap();
        assert!((sum - check).abs() < 1e-10);
    }

    // curves: grid=3 gives 3 rows per main effect (plus header)
    let curves = dir.join("curves");
    let out = run(&["curves", "--model", dir.join("model.json").to_str().unwrap(), "--out", curves.to_str().unwrap(), "--grid", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let main1 = std::fs::read_to_string(curves.join("main_1_x1.csv")).unwrap();
    assert_eq!(main1.lines().count(), 4);
    assert!(curves.join("pair_1_2.csv").exists());

    // importance writes both formats with the header the spec names
    let out = run(&["importance", "--model", dir.join("model.json").to_str().unwrap(), "--data", data.to_str().unwrap(), "--out", dir.join("imp").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let imp = std::fs::read_to_string(dir.join("imp.csv")).unwrap();
    assert!(imp.starts_with("component,raw,normalized\n"));

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tmp_dir("exit");

    // unknown command: usage error
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));

    // missing data file: data error
    let config = write_train_config(&dir, &dir.join("missing.csv"), "");
    let out = run(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // malformed model file: data error
    let bad_model = dir.join("bad.json");
    std::fs::write(&bad_model, "{ not json").unwrap();
    let out = run(&["predict", "--model", bad_model.to_str().unwrap(), "--data", bad_model.to_str().unwrap(), "--out", dir.join("x.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // monotone directive on a pair: config error with the spec's message
    let data = dir.join("f1.csv");
    let out = run(&["synth", "--kind", "f1", "--n", "300", "--out", data.to_str().unwrap()]);
    assert!(out.status.success());
    let config = write_train_config(&dir, &data, "[fit.monotone]\n\"1,2\" = \"inc\"\n");
    let out = run(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("main effect"));

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn outputs_are_idempotent_with_no_timestamp() {
    let dir = tmp_dir("idem");
    let data = dir.join("f1.csv");
    run(&["synth", "--kind", "f1", "--n", "600", "--out", data.to_str().unwrap(), "--seed", "9"]);
    let data2 = dir.join("f1_again.csv");
    run(&["synth", "--kind", "f1", "--n", "600", "--out", data2.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(
        std::fs::read(&data).unwrap(),
        std::fs::read(&data2).unwrap(),
        "synth outputs differ for identical seeds"
    );

    let config = write_train_config(&dir, &data, "");
    let out = run(&["train", "--config", config.to_str().unwrap(), "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let model1 = std::fs::read(dir.join("model.json")).unwrap();
    let report1 = std::fs::read(dir.join("report.json")).unwrap();
    let out = run(&["train", "--config", config.to_str().unwrap(), "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(model1, std::fs::read(dir.join("model.json")).unwrap());
    assert_eq!(report1, std::fs::read(dir.join("report.json")).unwrap());

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn predict_handles_header_only_and_logit_models() {
    let dir = tmp_dir("predict_edge");

    // classification data: y in {0, 1}
    let csv = "x1,x2,y\n0.1,0.9,0\n0.8,0.2,1\n0.9,0.1,1\n0.2,0.7,0\n0.7,0.3,1\n0.3,0.8,0\n0.85,0.15,1\n0.15,0.85,0\n0.6,0.4,1\n0.4,0.6,0\n";
    let data = dir.join("cls.csv");
    std::fs::write(&data, csv).unwrap();
    let config = format!(
        r#"
[data]
path = "{}"
target = "y"

[split]
ratios = [0.6, 0.2, 0.2]

[model]
order = 1
basis_count = 3
link = "logit"

[fit]
loss = "logistic"
max_epochs = 5
batch_size = 8

[output]
model = "{}"
"#,
        data.display(),
        dir.join("cls_model.json").display()
    );
    let config_path = dir.join("cls.toml");
    std::fs::write(&config_path, config).unwrap();
    let out = run(&["train", "--config", config_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // header-only input produces header-only output (with probability column)
    let empty = dir.join("empty.csv");
    std::fs::write(&empty, "x1,x2\n").unwrap();
    let preds = dir.join("empty_preds.csv");
    let out = run(&["predict", "--model", dir.join("cls_model.json").to_str().unwrap(), "--data", empty.to_str().unwrap(), "--out", preds.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&preds).unwrap(), "row,prediction,probability\n");

    // probabilities lie in [0, 1]
    let preds = dir.join("cls_preds.csv");
    let out = run(&["predict", "--model", dir.join("cls_model.json").to_str().unwrap(), "--data", data.to_str().unwrap(), "--out", preds.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for line in std::fs::read_to_string(&preds).unwrap().lines().skip(1) {
        let prob: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&prob));
    }

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn stability_command_and_numeric_exit_code() {
    let dir = tmp_dir("stab_numeric");
    let data = dir.join("f1.csv");
    run(&["synth", "--kind", "f1", "--n", "400", "--out", data.to_str().unwrap()]);

    // small stability run writes per-component scores
    let config = format!(
        r#"
[data]
path = "{}"
target = "y"

[model]
order = 1
basis_count = 3
seed = 1

[fit]
max_epochs = 4
batch_size = 256
seed = 1

[output]
model = "{}"
"#,
        data.display(),
        dir.join("model.json").display()
    );
    let config_path = dir.join("train.toml");
    std::fs::write(&config_path, &config).unwrap();
    let out_json = dir.join("stability.json");
    let out = run(&["stability", "--config", config_path.to_str().unwrap(), "--out", out_json.to_str().unwrap(), "--reps", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_json).unwrap()).unwrap();
    assert!(doc["overall"].as_f64().unwrap().is_finite());
    assert_eq!(doc["per_component"].as_object().unwrap().len(), 5);

    // a divergent learning rate ends with a numeric failure: exit 3
    let bad = config.replace("max_epochs = 4", "max_epochs = 4
learning_rate = 1e300");
    std::fs::write(&config_path, bad).unwrap();
    let out = run(&["train", "--config", config_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn purify_and_bench_commands_run() {
    let dir = tmp_dir("purify_bench");
    let data = dir.join("f1.csv");
    run(&["synth", "--kind", "f1", "--n", "500", "--out", data.to_str().unwrap()]);
    let config = write_train_config(&dir, &data, "");
    let out = run(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    // purify a model file
    let purified = dir.join("purified.json");
    let out = run(&["purify", "--model", dir.join("model.json").to_str().unwrap(), "--out", purified.to_str().unwrap(), "--grid", "11"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&purified).unwrap()).unwrap();
    assert_eq!(doc["grid"].as_array().unwrap().len(), 11);

    // purify accepts its own tabulated output as input
    let repurified = dir.join("repurified.json");
    let out = run(&["purify", "--model", purified.to_str().unwrap(), "--out", repurified.to_str().unwrap(), "--grid", "11"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // a small bench run writes its result files
    let bench_config = dir.join("bench.toml");
    std::fs::write(
        &bench_config,
        "experiment = \"approximation\"\nk_list = [1, 2]\n",
    )
    .unwrap();
    let bench_out = dir.join("bench_out");
    let out = run(&["bench", "--config", bench_config.to_str().unwrap(), "--out", bench_out.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(bench_out.join("approximation.json").exists());
    assert!(bench_out.join("approximation.csv").exists());

    std::fs::remove_dir_all(&dir).ok();
}
