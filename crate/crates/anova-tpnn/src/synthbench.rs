//! End-to-end synthetic experiments: component selection, prediction,
//! stability under resampling and the basis-count approximation study.
//!
//! Every experiment is reproducible bit-for-bit from its spec: repetition
//! r derives all of its seeds from `seed_base` and r, repetitions may run
//! concurrently, and aggregation is order-independent.

use crate::data::{fit_quantile_transform, generate_synthetic, split, Dataset, SyntheticKind, SyntheticSpec};
use crate::error::{Error, Result};
use crate::interpret::{importance_scores, selection_auroc, stability_score, StabilityReport};
use crate::model::{build_model, AnovaTpnnModel, BasisCounts, BasisMode, ComponentSpec, Link};
use crate::train::{train, FitConfig, LossKind, ValidationPolicy};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: SyntheticKind,
    pub repetitions: usize,
    pub n: usize,
    pub snr: f64,
    /// Interaction order of the fitted model.
    pub order: usize,
    /// Basis count per component.
    pub basis_count: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed_base: u64,
    /// Worker threads for repetitions; 0 uses the available parallelism.
    #[serde(default)]
    pub threads: usize,
    /// Interaction screening used by the stability experiment: pairs whose
    /// normalized importance on a pilot fit falls below this are dropped
    /// before the refits (all main effects are always kept). None disables
    /// screening.
    #[serde(default = "default_screen_threshold")]
    pub screen_threshold: Option<f64>,
}

fn default_screen_threshold() -> Option<f64> {
    Some(0.1)
}

impl ExperimentSpec {
    pub fn new(kind: SyntheticKind) -> Self {
        Self {
            kind,
            repetitions: 10,
            n: 15000,
            snr: 5.0,
            order: 2,
            basis_count: 30,
            max_epochs: 250,
            batch_size: 4096,
            learning_rate: 5e-3,
            seed_base: 0,
            threads: 0,
            screen_threshold: default_screen_threshold(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if self.n < 10 {
            return Err(Error::Config("n too small for a 70/10/20 split".into()));
        }
        Ok(())
    }

    fn fit_config(&self, rep: usize) -> FitConfig {
        FitConfig {
            loss: LossKind::Squared,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            seed: self.seed_base.wrapping_add(2000 + rep as u64),
            validation: ValidationPolicy::SelectBestEpoch,
            ..FitConfig::default()
        }
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Run `jobs` closures over up to `threads` workers, preserving output
/// order by index.
fn run_parallel<T: Send>(jobs: Vec<Box<dyn FnOnce() -> Result<T> + Send>>, threads: usize) -> Result<Vec<T>> {
    let threads = if threads == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        threads
    };
    let threads = threads.max(1).min(jobs.len().max(1));
    if threads <= 1 {
        return jobs.into_iter().map(|j| j()).collect();
    }
    let mut slots: Vec<Option<Result<T>>> = Vec::new();
    slots.resize_with(jobs.len(), || None);
    let jobs: Vec<(usize, Box<dyn FnOnce() -> Result<T> + Send>)> = jobs.into_iter().enumerate().collect();
    let queue = std::sync::Mutex::new(jobs);
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let job = { queue.lock().unwrap().pop() };
                match job {
                    Some((idx, f)) => {
                        let out = f();
                        results.lock().unwrap()[idx] = Some(out);
                    }
                    None => break,
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("job ran")).collect()
}

/// One fully trained repetition: generate, split, rank-transform, train.
fn fit_repetition(spec: &ExperimentSpec, rep: usize) -> Result<(AnovaTpnnModel, Dataset, Dataset, f64)> {
    let data = generate_synthetic(&SyntheticSpec {
        kind: spec.kind,
        n: spec.n,
        snr: spec.snr,
        seed: spec.seed_base.wrapping_add(17 + rep as u64),
    })?;
    let (train_d, val_d, test_d) = split(&data.dataset, (0.7, 0.1, 0.2), spec.seed_base.wrapping_add(3000 + rep as u64))?;
    let mut model = build_model(
        data.dataset.n_features(),
        spec.order,
        &ComponentSpec::AllUpToOrder,
        &BasisCounts::uniform(spec.basis_count),
        BasisMode::Independent,
        Link::Identity,
        spec.seed_base.wrapping_add(1000 + rep as u64),
    )?;
    model.transformer = fit_quantile_transform(&train_d.features, &train_d.feature_names)?;
    model.feature_names = train_d.feature_names.clone();
    let (fitted, _) = train(model, &train_d, Some(&val_d), &spec.fit_config(rep))?;
    Ok((fitted, train_d, test_d, data.sigma_eps))
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    pub spec: ExperimentSpec,
    pub per_repetition_auroc: Vec<f64>,
    pub mean_auroc: f64,
    pub std_auroc: f64,
}

/// Component selection: train on each repetition, score components by
/// importance on the training rows, and measure the AUROC of those scores
/// against the generator's true signal set.
pub fn run_selection_experiment(spec: &ExperimentSpec) -> Result<SelectionResult> {
    spec.validate()?;
    let truth = spec.kind.signal_components();
    let jobs: Vec<Box<dyn FnOnce() -> Result<f64> + Send>> = (0..spec.repetitions)
        .map(|rep| {
            let spec = spec.clone();
            let truth = truth.clone();
            Box::new(move || {
                let (model, train_d, _, _) = fit_repetition(&spec, rep)?;
                let table = importance_scores(&model, &train_d.features)?;
                selection_auroc(&table, &truth)
            }) as Box<dyn FnOnce() -> Result<f64> + Send>
        })
        .collect();
    let per_repetition_auroc = run_parallel(jobs, spec.threads)?;
    let (mean_auroc, std_auroc) = mean_std(&per_repetition_auroc);
    Ok(SelectionResult {
        spec: spec.clone(),
        per_repetition_auroc,
        mean_auroc,
        std_auroc,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictionResult {
    pub spec: ExperimentSpec,
    pub per_repetition_rmse: Vec<f64>,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    /// Noise standard deviations used by the generator, per repetition.
    pub per_repetition_sigma_eps: Vec<f64>,
}

/// Prediction: test RMSE per repetition with validation-based epoch
/// selection.
pub fn run_prediction_experiment(spec: &ExperimentSpec) -> Result<PredictionResult> {
    spec.validate()?;
    let jobs: Vec<Box<dyn FnOnce() -> Result<(f64, f64)> + Send>> = (0..spec.repetitions)
        .map(|rep| {
            let spec = spec.clone();
            Box::new(move || {
                let (model, _, test_d, sigma_eps) = fit_repetition(&spec, rep)?;
                let mut se = 0.0;
                for i in 0..test_d.n_rows() {
                    let row: Vec<f64> = test_d.features.row(i).to_vec();
                    let pred = model.forward(&row)?;
                    se += (pred - test_d.target[i]) * (pred - test_d.target[i]);
                }
                Ok(((se / test_d.n_rows() as f64).sqrt(), sigma_eps))
            }) as Box<dyn FnOnce() -> Result<(f64, f64)> + Send>
        })
        .collect();
    let outcomes = run_parallel(jobs, spec.threads)?;
    let per_repetition_rmse: Vec<f64> = outcomes.iter().map(|(r, _)| *r).collect();
    let per_repetition_sigma_eps: Vec<f64> = outcomes.iter().map(|(_, s)| *s).collect();
    let (mean_rmse, std_rmse) = mean_std(&per_repetition_rmse);
    Ok(PredictionResult {
        spec: spec.clone(),
        per_repetition_rmse,
        mean_rmse,
        std_rmse,
        per_repetition_sigma_eps,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityResult {
    pub spec: ExperimentSpec,
    pub report: StabilityReport,
    /// Components the refitted models contain (0-based), after screening.
    pub components: Vec<Vec<usize>>,
}

/// Stability: refit on resampled training sets (random splits of one
/// generated dataset, new split per repetition) and score the spread of
/// each component on a fixed held-out point set.
///
/// Interactions are screened first, mirroring how screened second-order
/// models are interpreted in practice: a pilot fit ranks the pairs by
/// importance and only those above `screen_threshold` (normalized) are
/// kept for the refits. Main effects always stay.
pub fn run_stability_experiment(spec: &ExperimentSpec) -> Result<StabilityResult> {
    spec.validate()?;
    if spec.repetitions < 2 {
        return Err(Error::Config("stability needs repetitions >= 2".into()));
    }
    let data = generate_synthetic(&SyntheticSpec {
        kind: spec.kind,
        n: spec.n,
        snr: spec.snr,
        seed: spec.seed_base.wrapping_add(17),
    })?;
    // fixed evaluation points drawn from the input distribution, never trained on
    let eval = generate_synthetic(&SyntheticSpec {
        kind: spec.kind,
        n: 2000,
        snr: spec.snr,
        seed: spec.seed_base.wrapping_add(900_001),
    })?;
    let p = data.dataset.n_features();

    // screened component list from a pilot fit
    let components: Vec<Vec<usize>> = match (spec.screen_threshold, spec.order) {
        (Some(threshold), d) if d >= 2 => {
            let (pilot_train, pilot_val, _) =
                split(&data.dataset, (0.7, 0.1, 0.2), spec.seed_base.wrapping_add(811))?;
            let mut pilot = build_model(
                p,
                spec.order,
                &ComponentSpec::AllUpToOrder,
                &BasisCounts::uniform(spec.basis_count),
                BasisMode::Independent,
                Link::Identity,
                spec.seed_base.wrapping_add(812),
            )?;
            pilot.transformer =
                fit_quantile_transform(&pilot_train.features, &pilot_train.feature_names)?;
            pilot.feature_names = pilot_train.feature_names.clone();
            let (pilot, _) = train(pilot, &pilot_train, Some(&pilot_val), &spec.fit_config(usize::MAX / 2))?;
            let table = importance_scores(&pilot, &pilot_train.features)?;
            table
                .entries
                .iter()
                .filter(|e| e.features.len() == 1 || e.normalized >= threshold)
                .map(|e| e.features.clone())
                .collect()
        }
        _ => match spec.order {
            1 => (0..p).map(|j| vec![j]).collect(),
            _ => {
                let mut out: Vec<Vec<usize>> = (0..p).map(|j| vec![j]).collect();
                for a in 0..p {
                    for b in (a + 1)..p {
                        out.push(vec![a, b]);
                    }
                }
                out
            }
        },
    };

    let jobs: Vec<Box<dyn FnOnce() -> Result<AnovaTpnnModel> + Send>> = (0..spec.repetitions)
        .map(|rep| {
            let spec = spec.clone();
            let data = data.dataset.clone();
            let components = components.clone();
            Box::new(move || {
                let (train_d, val_d, _) =
                    split(&data, (0.7, 0.1, 0.2), spec.seed_base.wrapping_add(3000 + rep as u64))?;
                let mut model = build_model(
                    data.n_features(),
                    spec.order,
                    &ComponentSpec::Explicit(components),
                    &BasisCounts::uniform(spec.basis_count),
                    BasisMode::Independent,
                    Link::Identity,
                    spec.seed_base.wrapping_add(1000),
                )?;
                model.transformer = fit_quantile_transform(&train_d.features, &train_d.feature_names)?;
                model.feature_names = train_d.feature_names.clone();
                let (fitted, _) = train(model, &train_d, Some(&val_d), &spec.fit_config(0))?;
                Ok(fitted)
            }) as Box<dyn FnOnce() -> Result<AnovaTpnnModel> + Send>
        })
        .collect();
    let models = run_parallel(jobs, spec.threads)?;
    let report = stability_score(&models, &eval.dataset.features)?;
    Ok(StabilityResult {
        spec: spec.clone(),
        report,
        components,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproximationPoint {
    pub basis_count: usize,
    /// Best grid RMSE over the seeds tried.
    pub best_rmse: f64,
    pub per_seed_rmse: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproximationResult {
    pub target: String,
    pub points: Vec<ApproximationPoint>,
}

/// Grid RMSE between a 1-D model and a target function on [0, 1].
fn grid_rmse(model: &AnovaTpnnModel, target: impl Fn(f64) -> f64, points: usize) -> f64 {
    let mut se = 0.0;
    for i in 0..points {
        let x = i as f64 / (points - 1) as f64;
        let err = model.forward_transformed(&[x]) - target(x);
        se += err * err;
    }
    (se / points as f64).sqrt()
}

/// How well a single main effect approximates the centered target
/// sin(2 pi x) as the basis count grows: the best-of-seeds grid RMSE
/// should fall as K rises.
pub fn run_approximation_study(k_list: &[usize], seeds_per_k: usize, threads: usize) -> Result<ApproximationResult> {
    if k_list.is_empty() {
        return Err(Error::Config("approximation study needs basis counts".into()));
    }
    let target = |x: f64| (2.0 * std::f64::consts::PI * x).sin();
    run_approximation_study_on(k_list, seeds_per_k, threads, "sin(2 pi x)", target)
}

pub fn run_approximation_study_on(
    k_list: &[usize],
    seeds_per_k: usize,
    threads: usize,
    target_name: &str,
    target: impl Fn(f64) -> f64 + Copy + Send + Sync + 'static,
) -> Result<ApproximationResult> {
    let n = 4000;
    let mut points = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let jobs: Vec<Box<dyn FnOnce() -> Result<f64> + Send>> = (0..seeds_per_k)
            .map(|seed| {
                Box::new(move || {
                    // x regular in [0,1], target noiseless
                    let mut feats = ndarray::Array2::zeros((n, 1));
                    let mut y = ndarray::Array1::zeros(n);
                    for i in 0..n {
                        let x = (i as f64 + 0.5) / n as f64;
                        feats[(i, 0)] = x;
                        y[i] = target(x);
                    }
                    let data = Dataset::new(feats, y, vec!["x1".into()])?;
                    let model = build_model(
                        1,
                        1,
                        &ComponentSpec::AllUpToOrder,
                        &BasisCounts::uniform(k),
                        BasisMode::Independent,
                        Link::Identity,
                        seed as u64,
                    )?;
                    let cfg = FitConfig {
                        batch_size: 512,
                        max_epochs: 400,
                        seed: seed as u64,
                        validation: ValidationPolicy::None,
                        ..FitConfig::default()
                    };
                    let (fitted, _) = train(model, &data, None, &cfg)?;
                    Ok(grid_rmse(&fitted, target, 1001))
                }) as Box<dyn FnOnce() -> Result<f64> + Send>
            })
            .collect();
        let per_seed_rmse = run_parallel(jobs, threads)?;
        let best_rmse = per_seed_rmse.iter().cloned().fold(f64::INFINITY, f64::min);
        points.push(ApproximationPoint {
            basis_count: k,
            best_rmse,
            per_seed_rmse,
        });
    }
    Ok(ApproximationResult {
        target: target_name.to_string(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(kind: SyntheticKind) -> ExperimentSpec {
        ExperimentSpec {
            repetitions: 2,
            n: 1200,
            max_epochs: 30,
            batch_size: 512,
            threads: 2,
            ..ExperimentSpec::new(kind)
        }
    }

    #[test]
    fn selection_runs_and_aggregates() {
        let spec = ExperimentSpec {
            repetitions: 1,
            ..small_spec(SyntheticKind::F1)
        };
        let out = run_selection_experiment(&spec).unwrap();
        assert_eq!(out.per_repetition_auroc.len(), 1);
        assert_eq!(out.std_auroc, 0.0);
        assert!(out.mean_auroc >= 0.0 && out.mean_auroc <= 1.0);
    }

    #[test]
    fn prediction_reports_sigma() {
        let out = run_prediction_experiment(&small_spec(SyntheticKind::F1)).unwrap();
        assert_eq!(out.per_repetition_rmse.len(), 2);
        assert!(out.per_repetition_sigma_eps.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn stability_runs() {
        let out = run_stability_experiment(&small_spec(SyntheticKind::F1)).unwrap();
        assert_eq!(out.report.n_runs, 2);
        assert!(out.report.overall.is_finite());
    }

    #[test]
    fn experiments_are_reproducible() {
        let spec = ExperimentSpec {
            repetitions: 2,
            n: 600,
            max_epochs: 10,
            batch_size: 256,
            threads: 2,
            ..ExperimentSpec::new(SyntheticKind::F1)
        };
        let a = run_selection_experiment(&spec).unwrap();
        let b = run_selection_experiment(&spec).unwrap();
        assert_eq!(a.per_repetition_auroc, b.per_repetition_auroc);
    }

    #[test]
    fn approximation_k1_beats_zero_predictor_on_linear_target() {
        let out =
            run_approximation_study_on(&[1], 2, 2, "x - 0.5", |x| x - 0.5).unwrap();
        // the zero predictor has grid RMSE ~ 1/sqrt(12) ~ 0.289
        assert!(out.points[0].best_rmse < 0.289, "rmse {}", out.points[0].best_rmse);
    }

    #[test]
    fn approximation_zero_target_is_trivial() {
        let out = run_approximation_study_on(&[1, 4], 1, 2, "zero", |_| 0.0).unwrap();
        for p in &out.points {
            assert!(p.best_rmse < 1e-3, "rmse {}", p.best_rmse);
        }
    }
}
