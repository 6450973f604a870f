//! Command implementations behind the `anova-tpnn` binary: training from a
//! TOML config, prediction, explanation, curve export, importance,
//! stability, purification, synthetic generation and benchmark runs.
//!
//! Every command is a plain function so library users can drive the same
//! flows programmatically; the binary only parses arguments and maps
//! errors to exit codes (1 usage/config, 2 data, 3 numeric).

use crate::data::{fit_quantile_transform, generate_synthetic, load_csv, split, Dataset, SyntheticKind, SyntheticSpec};
use crate::error::{Error, Result};
use crate::interpret::{
    anova_shap, importance_scores, purify, stability_score, ComponentFn, Decomposition,
    Quadrature, DEFAULT_PURIFY_GRID,
};
use crate::model::{
    build_model, load_model, save_model, AnovaTpnnModel, BasisCounts, BasisMode, ComponentSpec,
    Link, Monotonicity,
};
use crate::synthbench::{
    run_approximation_study, run_prediction_experiment, run_selection_experiment,
    run_stability_experiment, ExperimentSpec,
};
use crate::train::{train, FitConfig, LossKind, MonotoneDirective, ValidationPolicy};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Global flags shared by every command.
#[derive(Debug, Clone, Default)]
pub struct GlobalOpts {
    /// Override every seed in configs and specs.
    pub seed: Option<u64>,
    /// Worker threads for repetition-parallel commands (0 = auto).
    pub threads: Option<usize>,
    /// Omit timestamps and wall-clock fields so outputs are byte-identical
    /// across runs.
    pub no_timestamp: bool,
}

// --- config file ---

fn default_ratios() -> [f64; 3] {
    [0.7, 0.1, 0.2]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: String,
    pub target: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    #[serde(default = "default_ratios")]
    pub ratios: [f64; 3],
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            ratios: default_ratios(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ComponentsField {
    /// "all": every subset up to the model order.
    Keyword(String),
    /// Explicit 1-based subsets, e.g. [[1], [2], [1, 2]].
    Explicit(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub components: Option<ComponentsField>,
    #[serde(default = "default_basis_count")]
    pub basis_count: usize,
    /// Per-order overrides, keys are interaction orders.
    #[serde(default)]
    pub basis_count_per_order: BTreeMap<String, usize>,
    #[serde(default = "default_mode")]
    pub mode: BasisMode,
    #[serde(default = "default_link")]
    pub link: Link,
    #[serde(default)]
    pub seed: u64,
}

fn default_order() -> usize {
    1
}
fn default_basis_count() -> usize {
    30
}
fn default_mode() -> BasisMode {
    BasisMode::Independent
}
fn default_link() -> Link {
    Link::Identity
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub max_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_validation")]
    pub validation: ValidationPolicy,
    /// Map from 1-based feature indices (comma-separated for the error
    /// path) to "inc" or "dec".
    #[serde(default)]
    pub monotone: BTreeMap<String, String>,
    #[serde(default)]
    pub verbose: bool,
}

fn default_loss() -> LossKind {
    LossKind::Squared
}
fn default_lr() -> f64 {
    5e-3
}
fn default_batch() -> usize {
    4096
}
fn default_epochs() -> usize {
    200
}
fn default_validation() -> ValidationPolicy {
    ValidationPolicy::SelectBestEpoch
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            loss: default_loss(),
            learning_rate: default_lr(),
            batch_size: default_batch(),
            max_epochs: default_epochs(),
            seed: 0,
            validation: default_validation(),
            monotone: BTreeMap::new(),
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub model: String,
    #[serde(default)]
    pub report: Option<String>,
}

/// Structured contents of a training config file (TOML).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    #[serde(default)]
    pub split: Option<SplitSection>,
    pub model: ModelSection,
    #[serde(default)]
    pub fit: Option<FitSection>,
    pub output: OutputSection,
}

pub fn load_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Io {
        path: path.as_ref().display().to_string(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("bad config: {e}")))
}

fn parse_monotone_key(key: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in key.split(',') {
        let idx: usize = part
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad monotone key '{key}' (expected 1-based feature indices)")))?;
        if idx == 0 {
            return Err(Error::Config("monotone feature indices are 1-based".into()));
        }
        out.push(idx - 1);
    }
    Ok(out)
}

fn parse_monotone_direction(value: &str) -> Result<Monotonicity> {
    match value {
        "inc" | "increasing" => Ok(Monotonicity::Increasing),
        "dec" | "decreasing" => Ok(Monotonicity::Decreasing),
        "none" => Ok(Monotonicity::None),
        other => Err(Error::Config(format!("bad monotone direction '{other}'"))),
    }
}

fn fit_config_of(section: &FitSection, opts: &GlobalOpts) -> Result<FitConfig> {
    let mut monotone = Vec::new();
    for (key, value) in &section.monotone {
        monotone.push(MonotoneDirective {
            features: parse_monotone_key(key)?,
            direction: parse_monotone_direction(value)?,
        });
    }
    Ok(FitConfig {
        loss: section.loss,
        learning_rate: section.learning_rate,
        batch_size: section.batch_size,
        max_epochs: section.max_epochs,
        seed: opts.seed.unwrap_or(section.seed),
        validation: section.validation,
        monotone,
        verbose: section.verbose,
        ..FitConfig::default()
    })
}

fn basis_counts_of(section: &ModelSection) -> Result<BasisCounts> {
    let mut per_order = BTreeMap::new();
    for (key, &k) in &section.basis_count_per_order {
        let order: usize = key
            .parse()
            .map_err(|_| Error::Config(format!("bad basis_count_per_order key '{key}'")))?;
        per_order.insert(order, k);
    }
    Ok(BasisCounts {
        default: section.basis_count,
        per_order,
    })
}

fn component_spec_of(section: &ModelSection) -> Result<ComponentSpec> {
    match &section.components {
        None => Ok(ComponentSpec::AllUpToOrder),
        Some(ComponentsField::Keyword(word)) if word == "all" => Ok(ComponentSpec::AllUpToOrder),
        Some(ComponentsField::Keyword(word)) => {
            Err(Error::Config(format!("unknown components keyword '{word}'")))
        }
        Some(ComponentsField::Explicit(list)) => {
            let mut zero_based = Vec::with_capacity(list.len());
            for s in list {
                let mut set = Vec::with_capacity(s.len());
                for &j in s {
                    if j == 0 {
                        return Err(Error::Config("component indices are 1-based".into()));
                    }
                    set.push(j - 1);
                }
                zero_based.push(set);
            }
            Ok(ComponentSpec::Explicit(zero_based))
        }
    }
}

#[derive(Debug, Serialize)]
struct TrainReportDoc<'a> {
    config: String,
    selected_epoch: Option<usize>,
    train_losses: &'a [f64],
    val_losses: &'a [f64],
    snapshot: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_metric: Option<TestMetric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unix_time: Option<u64>,
    transformer_warnings: &'a [String],
}

#[derive(Debug, Serialize)]
struct TestMetric {
    kind: String,
    value: f64,
    rows: usize,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_file(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    if let Some(parent) = path.as_ref().parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.display().to_string(),
                source: e,
            })?;
        }
    }
    std::fs::write(path.as_ref(), contents).map_err(|e| Error::Io {
        path: path.as_ref().display().to_string(),
        source: e,
    })
}

/// Train per a config file: load, split, rank-transform, fit, persist.
pub fn cmd_train(config_path: &str, opts: &GlobalOpts) -> Result<()> {
    let config = load_run_config(config_path)?;
    let data = load_csv(&config.data.path, &config.data.target)?;

    let split_section = config.split.clone().unwrap_or_default();
    let fit_section = config.fit.clone().unwrap_or_default();
    let fit_cfg = fit_config_of(&fit_section, opts)?;
    let split_seed = opts
        .seed
        .unwrap_or_else(|| split_section.seed.unwrap_or(fit_section.seed));
    let ratios = (
        split_section.ratios[0],
        split_section.ratios[1],
        split_section.ratios[2],
    );
    let (train_d, val_d, test_d) = split(&data, ratios, split_seed)?;

    let mut model = build_model(
        data.n_features(),
        config.model.order,
        &component_spec_of(&config.model)?,
        &basis_counts_of(&config.model)?,
        config.model.mode,
        config.model.link,
        opts.seed.unwrap_or(config.model.seed),
    )?;
    model.transformer = fit_quantile_transform(&train_d.features, &train_d.feature_names)?;
    model.feature_names = train_d.feature_names.clone();
    for w in &model.transformer.warnings {
        eprintln!("warning: {w}");
    }

    let use_val = fit_cfg.validation == ValidationPolicy::SelectBestEpoch;
    let (fitted, report) = train(model, &train_d, if use_val { Some(&val_d) } else { None }, &fit_cfg)?;

    save_model(&fitted, &config.output.model)?;

    if let Some(report_path) = &config.output.report {
        let test_metric = Some(test_metric_of(&fitted, &test_d, fit_section.loss)?);
        let doc = TrainReportDoc {
            config: config_path.to_string(),
            selected_epoch: report.selected_epoch,
            train_losses: &report.train_losses,
            val_losses: &report.val_losses,
            snapshot: &report.snapshot,
            wall_seconds: if opts.no_timestamp { None } else { Some(report.wall_seconds) },
            test_metric,
            unix_time: if opts.no_timestamp { None } else { Some(now_unix()) },
            transformer_warnings: &fitted.transformer.warnings,
        };
        write_file(report_path, &to_json_pretty(&doc)?)?;
    }
    Ok(())
}

fn test_metric_of(model: &AnovaTpnnModel, test: &Dataset, loss: LossKind) -> Result<TestMetric> {
    match loss {
        LossKind::Squared => {
            let mut se = 0.0;
            for i in 0..test.n_rows() {
                let row: Vec<f64> = test.features.row(i).to_vec();
                let pred = model.forward(&row)?;
                se += (pred - test.target[i]) * (pred - test.target[i]);
            }
            Ok(TestMetric {
                kind: "rmse".into(),
                value: (se / test.n_rows() as f64).sqrt(),
                rows: test.n_rows(),
            })
        }
        LossKind::Logistic => {
            // AUROC of predicted probabilities against the labels
            let mut scored: Vec<(f64, bool)> = Vec::with_capacity(test.n_rows());
            for i in 0..test.n_rows() {
                let row: Vec<f64> = test.features.row(i).to_vec();
                scored.push((model.predict_response(&row)?, test.target[i] == 1.0));
            }
            scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let n_pos = scored.iter().filter(|(_, y)| *y).count();
            let n_neg = scored.len() - n_pos;
            if n_pos == 0 || n_neg == 0 {
                return Ok(TestMetric {
                    kind: "auroc".into(),
                    value: f64::NAN,
                    rows: test.n_rows(),
                });
            }
            let mut rank_sum = 0.0;
            let mut i = 0;
            while i < scored.len() {
                let mut k = i;
                while k < scored.len() && scored[k].0 == scored[i].0 {
                    k += 1;
                }
                let avg = (i + 1 + k) as f64 / 2.0;
                for item in &scored[i..k] {
                    if item.1 {
                        rank_sum += avg;
                    }
                }
                i = k;
            }
            let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
            Ok(TestMetric {
                kind: "auroc".into(),
                value: u / (n_pos as f64 * n_neg as f64),
                rows: test.n_rows(),
            })
        }
    }
}

fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(format!("serialization: {e}")))
}

/// Read the model's feature columns (by header name) from a CSV that may
/// contain extra columns such as the target.
fn read_feature_matrix(path: &str, feature_names: &[String]) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_string(),
            message: e.to_string(),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_string(),
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut col_of = Vec::with_capacity(feature_names.len());
    for name in feature_names {
        let idx = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("feature column '{name}' not found in {path}")))?;
        col_of.push(idx);
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(col_of.len());
        for (fi, &ci) in col_of.iter().enumerate() {
            let cell = record.get(ci).ok_or_else(|| Error::Csv {
                path: path.to_string(),
                message: format!("row {} is short", row_no + 1),
            })?;
            let value: f64 = cell.trim().parse().map_err(|_| Error::BadCell {
                row: row_no + 1,
                column: feature_names[fi].clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::BadCell {
                    row: row_no + 1,
                    column: feature_names[fi].clone(),
                    value: cell.to_string(),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    let n = rows.len();
    let p = feature_names.len();
    let mut out = Array2::zeros((n, p));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Predict each row of a CSV; writes row, prediction (plus probability for
/// logit models), order preserved.
pub fn cmd_predict(model_path: &str, data_path: &str, out_path: &str) -> Result<()> {
    let model = load_model(model_path)?;
    let features = read_feature_matrix(data_path, &model.feature_names)?;
    let logit = model.link == Link::Logit;
    let mut out = String::new();
    out.push_str(if logit { "row,prediction,probability\n" } else { "row,prediction\n" });
    for i in 0..features.nrows() {
        let row: Vec<f64> = features.row(i).to_vec();
        let f = model.forward(&row)?;
        if logit {
            out.push_str(&format!("{},{},{}\n", i, f, crate::basis::sigmoid(f)));
        } else {
            out.push_str(&format!("{},{}\n", i, f));
        }
    }
    write_file(out_path, &out)
}

#[derive(Serialize)]
struct ExplainRecord {
    row: usize,
    beta0: f64,
    shap: BTreeMap<String, f64>,
    components: BTreeMap<String, f64>,
    sum: f64,
    prediction_minus_beta0: f64,
    prediction: f64,
}

fn component_key(features: &[usize]) -> String {
    features
        .iter()
        .map(|j| (j + 1).to_string())
        .collect::<Vec<_>>()
        .join(":")
}

/// Per-row SHAP attributions as JSON lines.
pub fn cmd_explain(model_path: &str, data_path: &str, out_path: &str) -> Result<()> {
    let model = load_model(model_path)?;
    let features = read_feature_matrix(data_path, &model.feature_names)?;
    let mut out = String::new();
    for i in 0..features.nrows() {
        let row: Vec<f64> = features.row(i).to_vec();
        let at = anova_shap(&model, &row)?;
        let shap: BTreeMap<String, f64> = model
            .feature_names
            .iter()
            .cloned()
            .zip(at.shap.iter().cloned())
            .collect();
        let components: BTreeMap<String, f64> = model
            .components
            .iter()
            .zip(at.component_values.iter())
            .map(|(c, &v)| (component_key(&c.features), v))
            .collect();
        let record = ExplainRecord {
            row: i,
            beta0: at.beta0,
            sum: at.shap.iter().sum(),
            prediction_minus_beta0: at.prediction - at.beta0,
            prediction: at.prediction,
            shap,
            components,
        };
        out.push_str(&serde_json::to_string(&record).map_err(|e| Error::Numeric(e.to_string()))?);
        out.push('\n');
    }
    write_file(out_path, &out)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Export per-component curves (mains) and surfaces (pairs) on a rank grid,
/// with raw-unit x obtained by inverting the quantile transform.
pub fn cmd_curves(model_path: &str, out_dir: &str, grid: usize) -> Result<()> {
    if grid < 2 {
        return Err(Error::InvalidArgument("curve grid needs at least 2 points".into()));
    }
    let model = load_model(model_path)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_string(),
        source: e,
    })?;
    let ranks: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    for (idx, comp) in model.components.iter().enumerate() {
        match comp.features.as_slice() {
            [j] => {
                let map = &model.transformer.maps[*j];
                let mut out = String::from("x_raw,x_transformed,f\n");
                let mut row = vec![0.0; model.n_features()];
                for &r in &ranks {
                    row[*j] = r;
                    let f = model.eval_component_transformed(idx, &row);
                    out.push_str(&format!("{},{},{}\n", map.invert(r), r, f));
                }
                let name = sanitize(&model.feature_names[*j]);
                write_file(
                    Path::new(out_dir).join(format!("main_{}_{}.csv", j + 1, name)),
                    &out,
                )?;
            }
            [a, b] => {
                let map_a = &model.transformer.maps[*a];
                let map_b = &model.transformer.maps[*b];
                let mut out = String::from("x_a,x_b,f\n");
                let mut row = vec![0.0; model.n_features()];
                for &ra in &ranks {
                    for &rb in &ranks {
                        row[*a] = ra;
                        row[*b] = rb;
                        let f = model.eval_component_transformed(idx, &row);
                        out.push_str(&format!("{},{},{}\n", map_a.invert(ra), map_b.invert(rb), f));
                    }
                }
                write_file(
                    Path::new(out_dir).join(format!("pair_{}_{}.csv", a + 1, b + 1)),
                    &out,
                )?;
            }
            _ => {
                // orders beyond 2 have no 2-D export; skip with a notice
                eprintln!(
                    "note: component {} has order {} and is not exported",
                    component_key(&comp.features),
                    comp.features.len()
                );
            }
        }
    }
    Ok(())
}

/// Importance table as CSV and JSON (descending raw score).
pub fn cmd_importance(model_path: &str, data_path: &str, out_prefix: &str) -> Result<()> {
    let model = load_model(model_path)?;
    let features = read_feature_matrix(data_path, &model.feature_names)?;
    let table = importance_scores(&model, &features)?;
    let mut csv_out = String::from("component,raw,normalized\n");
    for e in table.sorted_desc() {
        csv_out.push_str(&format!("{},{},{}\n", component_key(&e.features), e.raw, e.normalized));
    }
    write_file(format!("{out_prefix}.csv"), &csv_out)?;
    write_file(format!("{out_prefix}.json"), &to_json_pretty(&table)?)?;
    Ok(())
}

#[derive(Serialize)]
struct CliStabilityDoc {
    repetitions: usize,
    seed: u64,
    overall: f64,
    overall_cardinality_weighted: f64,
    per_component: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unix_time: Option<u64>,
}

/// Stability of a config's model under resampled splits of its dataset.
pub fn cmd_stability(
    config_path: &str,
    repetitions: usize,
    seed: u64,
    out_path: &str,
    opts: &GlobalOpts,
) -> Result<()> {
    if repetitions < 2 {
        return Err(Error::InvalidArgument("stability needs at least 2 repetitions".into()));
    }
    let config = load_run_config(config_path)?;
    let data = load_csv(&config.data.path, &config.data.target)?;
    let split_section = config.split.clone().unwrap_or_default();
    let fit_section = config.fit.clone().unwrap_or_default();
    let ratios = (
        split_section.ratios[0],
        split_section.ratios[1],
        split_section.ratios[2],
    );
    let seed = opts.seed.unwrap_or(seed);

    let mut models = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let (train_d, val_d, _) = split(&data, ratios, seed.wrapping_add(3000 + rep as u64))?;
        let mut model = build_model(
            data.n_features(),
            config.model.order,
            &component_spec_of(&config.model)?,
            &basis_counts_of(&config.model)?,
            config.model.mode,
            config.model.link,
            seed.wrapping_add(1000),
        )?;
        model.transformer = fit_quantile_transform(&train_d.features, &train_d.feature_names)?;
        model.feature_names = train_d.feature_names.clone();
        let mut fit_cfg = fit_config_of(&fit_section, &GlobalOpts::default())?;
        fit_cfg.seed = seed.wrapping_add(2000);
        let use_val = fit_cfg.validation == ValidationPolicy::SelectBestEpoch;
        let (fitted, _) = train(model, &train_d, if use_val { Some(&val_d) } else { None }, &fit_cfg)?;
        models.push(fitted);
    }
    // fixed evaluation points: a seeded subsample of the data rows
    let eval_n = data.n_rows().min(2000);
    let eval_rows = {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(77));
        let mut idx: Vec<usize> = (0..data.n_rows()).collect();
        for i in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        let mut rows = Array2::zeros((eval_n, data.n_features()));
        for (r, &i) in idx[..eval_n].iter().enumerate() {
            rows.row_mut(r).assign(&data.features.row(i));
        }
        rows
    };
    let report = stability_score(&models, &eval_rows)?;
    let doc = CliStabilityDoc {
        repetitions,
        seed,
        overall: report.overall,
        overall_cardinality_weighted: report.overall_cardinality_weighted,
        per_component: report
            .per_component
            .iter()
            .map(|e| (component_key(&e.features), e.sc))
            .collect(),
        unix_time: if opts.no_timestamp { None } else { Some(now_unix()) },
    };
    write_file(out_path, &to_json_pretty(&doc)?)
}

// --- purification command ---

/// Grid tabulation of a decomposition, the output format of `purify` and
/// an accepted input format (components are then interpolated).
#[derive(Debug, Serialize, Deserialize)]
pub struct TabulatedDecomposition {
    pub beta0: f64,
    /// Shared per-axis grid on the transformed [0, 1] scale.
    pub grid: Vec<f64>,
    pub components: Vec<TabulatedComponent>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TabulatedComponent {
    /// 1-based feature indices.
    #[serde(rename = "S")]
    pub s: Vec<usize>,
    /// Length grid.len() for mains; grid.len()^2 row-major (first feature
    /// major) for pairs.
    pub values: Vec<f64>,
}

fn interp1(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let g = grid.len();
    if x <= grid[0] {
        return values[0];
    }
    if x >= grid[g - 1] {
        return values[g - 1];
    }
    let mut lo = 0;
    let mut hi = g - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if grid[mid] <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = (x - grid[lo]) / (grid[hi] - grid[lo]);
    values[lo] + t * (values[hi] - values[lo])
}

fn decomposition_of_tabulated(tab: &TabulatedDecomposition) -> Result<Decomposition> {
    let grid = Arc::new(tab.grid.clone());
    if grid.len() < 2 {
        return Err(Error::Data("tabulated grid needs at least 2 points".into()));
    }
    let mut components = Vec::with_capacity(tab.components.len());
    for c in &tab.components {
        let features: Vec<usize> = c
            .s
            .iter()
            .map(|&j| {
                if j == 0 {
                    Err(Error::Data("tabulated S indices are 1-based".into()))
                } else {
                    Ok(j - 1)
                }
            })
            .collect::<Result<_>>()?;
        match features.len() {
            1 => {
                if c.values.len() != grid.len() {
                    return Err(Error::Data(format!(
                        "component {:?}: {} values for grid of {}",
                        c.s,
                        c.values.len(),
                        grid.len()
                    )));
                }
                let grid = grid.clone();
                let values = c.values.clone();
                components.push(ComponentFn {
                    features,
                    eval: Arc::new(move |x: &[f64]| interp1(&grid, &values, x[0])),
                });
            }
            2 => {
                let g = grid.len();
                if c.values.len() != g * g {
                    return Err(Error::Data(format!(
                        "component {:?}: {} values for {}^2 grid",
                        c.s,
                        c.values.len(),
                        g
                    )));
                }
                let grid = grid.clone();
                let values = c.values.clone();
                components.push(ComponentFn {
                    features,
                    eval: Arc::new(move |x: &[f64]| {
                        // bilinear: interpolate rows along the second axis,
                        // then across the first
                        let g = grid.len();
                        let row_at = |i: usize| {
                            interp1(&grid, &values[i * g..(i + 1) * g], x[1])
                        };
                        if x[0] <= grid[0] {
                            return row_at(0);
                        }
                        if x[0] >= grid[g - 1] {
                            return row_at(g - 1);
                        }
                        let mut lo = 0;
                        let mut hi = g - 1;
                        while hi - lo > 1 {
                            let mid = (lo + hi) / 2;
                            if grid[mid] <= x[0] {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        let t = (x[0] - grid[lo]) / (grid[hi] - grid[lo]);
                        let a = row_at(lo);
                        let b = row_at(hi);
                        a + t * (b - a)
                    }),
                });
            }
            n => {
                return Err(Error::Data(format!(
                    "tabulated components support order <= 2, got {n}"
                )))
            }
        }
    }
    Ok(Decomposition {
        beta0: tab.beta0,
        components,
    })
}

fn tabulate(dec: &Decomposition, grid_points: usize) -> TabulatedDecomposition {
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| i as f64 / (grid_points - 1) as f64)
        .collect();
    let components = dec
        .components
        .iter()
        .map(|c| {
            let values = match c.features.len() {
                1 => grid.iter().map(|&x| c.value(&[x])).collect(),
                2 => {
                    let mut v = Vec::with_capacity(grid.len() * grid.len());
                    for &a in &grid {
                        for &b in &grid {
                            v.push(c.value(&[a, b]));
                        }
                    }
                    v
                }
                _ => unreachable!("purify rejects order > 2"),
            };
            TabulatedComponent {
                s: c.features.iter().map(|&j| j + 1).collect(),
                values,
            }
        })
        .collect();
    TabulatedDecomposition {
        beta0: dec.beta0,
        grid,
        components,
    }
}

/// Purify a model file or a tabulated decomposition into the sum-to-zero
/// form; emits a grid tabulation.
pub fn cmd_purify(input_path: &str, out_path: &str, grid: usize) -> Result<()> {
    if grid < 2 {
        return Err(Error::InvalidArgument("purify grid needs at least 2 points".into()));
    }
    let text = std::fs::read_to_string(input_path).map_err(|e| Error::Io {
        path: input_path.to_string(),
        source: e,
    })?;
    let looks_like_model = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .map_or(false, |v| v.get("schema").is_some());
    let dec = if looks_like_model {
        // a real model file: surface its own parse/checksum errors
        let model = crate::model::model_from_json(&text)?;
        crate::interpret::decomposition_of_model(&model)
    } else {
        let tab: TabulatedDecomposition = serde_json::from_str(&text).map_err(|e| {
            Error::Data(format!(
                "input is neither a model file nor a tabulated decomposition: {e}"
            ))
        })?;
        decomposition_of_tabulated(&tab)?
    };
    let quad = Quadrature::Grid { points: DEFAULT_PURIFY_GRID };
    let purified = purify(&dec, &quad)?;
    write_file(out_path, &to_json_pretty(&tabulate(&purified, grid))?)
}

/// Generate a synthetic dataset as CSV plus a ground-truth sidecar JSON.
pub fn cmd_synth(kind: SyntheticKind, n: usize, snr: f64, seed: u64, out_path: &str) -> Result<()> {
    let out = generate_synthetic(&SyntheticSpec { kind, n, snr, seed })?;
    let d = &out.dataset;
    let mut csv_out = String::new();
    csv_out.push_str(&d.feature_names.join(","));
    csv_out.push_str(",y\n");
    for i in 0..d.n_rows() {
        for j in 0..d.n_features() {
            csv_out.push_str(&format!("{},", d.features[(i, j)]));
        }
        csv_out.push_str(&format!("{}\n", d.target[i]));
    }
    write_file(out_path, &csv_out)?;

    #[derive(Serialize)]
    struct TruthDoc {
        kind: SyntheticKind,
        n: usize,
        snr: f64,
        seed: u64,
        sigma_eps: f64,
        /// 1-based signal components up to order 2.
        signal_components: Vec<Vec<usize>>,
    }
    let truth = TruthDoc {
        kind,
        n,
        snr,
        seed,
        sigma_eps: out.sigma_eps,
        signal_components: out
            .truth
            .iter()
            .map(|s| s.iter().map(|&j| j + 1).collect())
            .collect(),
    };
    write_file(format!("{out_path}.truth.json"), &to_json_pretty(&truth)?)
}

/// Which benchmark experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum BenchKind {
    #[serde(rename = "selection")]
    Selection,
    #[serde(rename = "prediction")]
    Prediction,
    #[serde(rename = "stability")]
    Stability,
    #[serde(rename = "approximation")]
    Approximation,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub experiment: BenchKind,
    #[serde(default = "default_bench_kind")]
    pub kind: SyntheticKind,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_snr")]
    pub snr: f64,
    #[serde(default = "default_bench_order")]
    pub order: usize,
    #[serde(default = "default_basis_count")]
    pub basis_count: usize,
    #[serde(default = "default_bench_epochs")]
    pub max_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Basis counts for the approximation experiment.
    #[serde(default = "default_k_list")]
    pub k_list: Vec<usize>,
    #[serde(default)]
    pub screen_threshold: Option<f64>,
}

fn default_bench_kind() -> SyntheticKind {
    SyntheticKind::F1
}
fn default_reps() -> usize {
    10
}
fn default_n() -> usize {
    15000
}
fn default_snr() -> f64 {
    5.0
}
fn default_bench_order() -> usize {
    2
}
fn default_bench_epochs() -> usize {
    150
}
fn default_k_list() -> Vec<usize> {
    vec![2, 5, 10, 30]
}

/// Run a benchmark experiment from a TOML spec, writing JSON and CSV
/// result files under `out_dir`.
pub fn cmd_bench(config_path: &str, out_dir: &str, opts: &GlobalOpts) -> Result<()> {
    let text = std::fs::read_to_string(config_path).map_err(|e| Error::Io {
        path: config_path.to_string(),
        source: e,
    })?;
    let bench: BenchConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("bad bench config: {e}")))?;
    let mut spec = ExperimentSpec::new(bench.kind);
    spec.repetitions = bench.repetitions;
    spec.n = bench.n;
    spec.snr = bench.snr;
    spec.order = bench.order;
    spec.basis_count = bench.basis_count;
    spec.max_epochs = bench.max_epochs;
    spec.seed_base = opts.seed.unwrap_or(bench.seed);
    spec.threads = opts.threads.unwrap_or(0);
    if bench.screen_threshold.is_some() {
        spec.screen_threshold = bench.screen_threshold;
    }

    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_string(),
        source: e,
    })?;
    let out = PathBuf::from(out_dir);
    match bench.experiment {
        BenchKind::Selection => {
            let result = run_selection_experiment(&spec)?;
            write_file(out.join("selection.json"), &to_json_pretty(&result)?)?;
            let mut csv_out = String::from("repetition,auroc\n");
            for (i, v) in result.per_repetition_auroc.iter().enumerate() {
                csv_out.push_str(&format!("{i},{v}\n"));
            }
            csv_out.push_str(&format!("mean,{}\nstd,{}\n", result.mean_auroc, result.std_auroc));
            write_file(out.join("selection.csv"), &csv_out)?;
        }
        BenchKind::Prediction => {
            let result = run_prediction_experiment(&spec)?;
            write_file(out.join("prediction.json"), &to_json_pretty(&result)?)?;
            let mut csv_out = String::from("repetition,rmse,sigma_eps\n");
            for i in 0..result.per_repetition_rmse.len() {
                csv_out.push_str(&format!(
                    "{i},{},{}\n",
                    result.per_repetition_rmse[i], result.per_repetition_sigma_eps[i]
                ));
            }
            csv_out.push_str(&format!("mean,{},\nstd,{},\n", result.mean_rmse, result.std_rmse));
            write_file(out.join("prediction.csv"), &csv_out)?;
        }
        BenchKind::Stability => {
            let result = run_stability_experiment(&spec)?;
            write_file(out.join("stability.json"), &to_json_pretty(&result)?)?;
            let mut csv_out = String::from("component,sc\n");
            for e in &result.report.per_component {
                csv_out.push_str(&format!("{},{}\n", component_key(&e.features), e.sc));
            }
            csv_out.push_str(&format!("overall,{}\n", result.report.overall));
            write_file(out.join("stability.csv"), &csv_out)?;
        }
        BenchKind::Approximation => {
            let result = run_approximation_study(&bench.k_list, 3, spec.threads)?;
            write_file(out.join("approximation.json"), &to_json_pretty(&result)?)?;
            let mut csv_out = String::from("basis_count,best_rmse\n");
            for p in &result.points {
                csv_out.push_str(&format!("{},{}\n", p.basis_count, p.best_rmse));
            }
            write_file(out.join("approximation.csv"), &csv_out)?;
        }
    }
    Ok(())
}

/// Print command usage to stderr.
pub fn print_usage(mut w: impl Write) {
    let _ = writeln!(
        w,
        "anova-tpnn - identifiable functional ANOVA models (tensor product neural networks)

USAGE:
    anova-tpnn <COMMAND> [OPTIONS]

COMMANDS:
    train       --config <toml>                          train and save a model
    predict     --model <json> --data <csv> --out <csv>  predictions per row
    explain     --model <json> --data <csv> --out <jsonl> per-row SHAP values
    curves      --model <json> --out <dir> [--grid N]    export component curves
    importance  --model <json> --data <csv> --out <prefix> component importance
    stability   --config <toml> --out <json> [--reps N] [--seed N]
    purify      --model <json|tabulated> --out <json> [--grid N]
    synth       --kind <f1|f2|f3> --out <csv> [--n N] [--snr X] [--seed N]
    bench       --config <toml> --out <dir>              synthetic experiments

GLOBAL OPTIONS:
    --seed <N>        override configured seeds
    --threads <N>     worker threads for repetitions
    --no-timestamp    omit timestamps for byte-identical reruns

EXIT CODES: 0 ok, 1 usage/config error, 2 data error, 3 numeric failure"
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_keys_parse() {
        assert_eq!(parse_monotone_key("3").unwrap(), vec![2]);
        assert_eq!(parse_monotone_key("1,2").unwrap(), vec![0, 1]);
        assert!(parse_monotone_key("0").is_err());
        assert!(parse_monotone_key("x").is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let toml_text = r#"
[data]
path = "a.csv"
target = "y"
typo_key = 1

[model]
order = 1

[output]
model = "m.json"
"#;
        let err = toml::from_str::<RunConfig>(toml_text).unwrap_err();
        assert!(err.to_string().contains("typo_key"));
    }

    #[test]
    fn tabulated_round_trip_interpolates() {
        let tab = TabulatedDecomposition {
            beta0: 1.0,
            grid: vec![0.0, 0.5, 1.0],
            components: vec![TabulatedComponent {
                s: vec![1],
                values: vec![-1.0, 0.0, 1.0],
            }],
        };
        let dec = decomposition_of_tabulated(&tab).unwrap();
        let c = dec.component(&[0]).unwrap();
        assert_eq!(c.value(&[0.25]), -0.5);
        assert_eq!(c.value(&[2.0]), 1.0);
    }
}
