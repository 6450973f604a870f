//! Properties of trained models that need an actual fit: importance
//! ordering against known coefficients, the noiseless approximation bound
//! and the signal-vs-noise stability contrast.

use anova_tpnn::data::{fit_quantile_transform, generate_synthetic, split, Dataset, SyntheticKind, SyntheticSpec};
use anova_tpnn::interpret::{importance_scores, stability_score};
use anova_tpnn::model::{build_model, AnovaTpnnModel, BasisCounts, BasisMode, ComponentSpec, Link};
use anova_tpnn::train::{train, FitConfig};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fit_f1(data: &Dataset, order: usize, k: usize, epochs: usize, seed: u64) -> AnovaTpnnModel {
    let (tr, va, _) = split(data, (0.7, 0.1, 0.2), seed).unwrap();
    let mut model = build_model(
        data.n_features(),
        order,
        &ComponentSpec::AllUpToOrder,
        &BasisCounts::uniform(k),
        BasisMode::Independent,
        Link::Identity,
        seed,
    )
    .unwrap();
    model.transformer = fit_quantile_transform(&tr.features, &tr.feature_names).unwrap();
    model.feature_names = tr.feature_names.clone();
    let cfg = FitConfig {
        max_epochs: epochs,
        batch_size: 1024,
        seed,
        ..FitConfig::default()
    };
    train(model, &tr, Some(&va), &cfg).unwrap().0
}

#[test]
fn f1_importance_orders_features_by_coefficient() {
    // true coefficients: 20 x4 vs 5 x5
    let data = generate_synthetic(&SyntheticSpec {
        kind: SyntheticKind::F1,
        n: 6000,
        snr: 5.0,
        seed: 31,
    })
    .unwrap();
    let model = fit_f1(&data.dataset, 2, 10, 50, 1);
    let table = importance_scores(&model, &data.dataset.features).unwrap();
    let raw_of = |s: &[usize]| {
        table
            .entries
            .iter()
            .find(|e| e.features == s)
            .map(|e| e.raw)
            .unwrap()
    };
    assert!(
        raw_of(&[3]) > raw_of(&[4]),
        "importance of feature 4 ({}) should exceed feature 5 ({})",
        raw_of(&[3]),
        raw_of(&[4])
    );
}

#[test]
fn noiseless_f1_fits_to_small_error() {
    // with no noise the test RMSE is pure approximation error
    let data = generate_synthetic(&SyntheticSpec {
        kind: SyntheticKind::F1,
        n: 8000,
        snr: f64::INFINITY,
        seed: 8,
    })
    .unwrap();
    assert_eq!(data.sigma_eps, 0.0);
    let (tr, va, te) = split(&data.dataset, (0.7, 0.1, 0.2), 2).unwrap();
    let mut model = build_model(
        5,
        2,
        &ComponentSpec::AllUpToOrder,
        &BasisCounts::uniform(30),
        BasisMode::Independent,
        Link::Identity,
        3,
    )
    .unwrap();
    model.transformer = fit_quantile_transform(&tr.features, &tr.feature_names).unwrap();
    let cfg = FitConfig {
        max_epochs: 250,
        batch_size: 1024,
        seed: 4,
        ..FitConfig::default()
    };
    let (fitted, _) = train(model, &tr, Some(&va), &cfg).unwrap();
    let mut se = 0.0;
    for i in 0..te.n_rows() {
        let row: Vec<f64> = te.features.row(i).to_vec();
        se += (fitted.forward(&row).unwrap() - te.target[i]).powi(2);
    }
    let rmse = (se / te.n_rows() as f64).sqrt();
    assert!(rmse <= 0.5, "noiseless F1 test RMSE {rmse} (signal std ~ 9.4)");
}

#[test]
fn shuffled_targets_are_much_less_stable_than_signal() {
    let data = generate_synthetic(&SyntheticSpec {
        kind: SyntheticKind::F1,
        n: 3000,
        snr: 5.0,
        seed: 41,
    })
    .unwrap();

    // pure-noise panel: same features, permuted targets
    let mut shuffled = data.dataset.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = shuffled.n_rows();
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    shuffled.target = Array1::from_iter(perm.iter().map(|&i| data.dataset.target[i]));

    let sc_of = |d: &Dataset| {
        let runs: Vec<AnovaTpnnModel> = (0..3).map(|r| fit_f1(d, 1, 8, 30, 100 + r)).collect();
        stability_score(&runs, &d.features).unwrap().overall
    };
    let signal_sc = sc_of(&data.dataset);
    let noise_sc = sc_of(&shuffled);
    println!("signal SC {signal_sc:.4} vs shuffled-target SC {noise_sc:.4}");
    assert!(
        noise_sc > 3.0 * signal_sc,
        "expected pure-noise refits to be much less stable: {noise_sc} vs {signal_sc}"
    );
}
