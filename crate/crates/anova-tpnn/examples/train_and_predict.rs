//! Fit a second-order model on synthetic data and measure test RMSE.
//!
//! ```bash
//! cargo run --release --example train_and_predict
//! ```

use anova_tpnn::data::{fit_quantile_transform, generate_synthetic, split, SyntheticKind, SyntheticSpec};
use anova_tpnn::model::{build_model, BasisCounts, BasisMode, ComponentSpec, Link};
use anova_tpnn::train::{train, FitConfig};

fn main() -> anova_tpnn::Result<()> {
    // 5 features, strong mains plus one interaction, SNR 5
    let data = generate_synthetic(&SyntheticSpec {
        kind: SyntheticKind::F1,
        n: 8000,
        snr: 5.0,
        seed: 7,
    })?;
    println!("generated n={} p={} sigma_eps={:.3}", data.dataset.n_rows(), data.dataset.n_features(), data.sigma_eps);

    let (train_d, val_d, test_d) = split(&data.dataset, (0.7, 0.1, 0.2), 1)?;

    let mut model = build_model(
        train_d.n_features(),
        2,                                  // mains + pairwise interactions
        &ComponentSpec::AllUpToOrder,
        &BasisCounts::uniform(20),
        BasisMode::Independent,
        Link::Identity,
        42,
    )?;
    // rank-transform inputs to [0, 1] using the training split only
    model.transformer = fit_quantile_transform(&train_d.features, &train_d.feature_names)?;
    model.feature_names = train_d.feature_names.clone();

    let cfg = FitConfig {
        max_epochs: 80,
        batch_size: 2048,
        seed: 1,
        ..FitConfig::default()
    };
    let (fitted, report) = train(model, &train_d, Some(&val_d), &cfg)?;
    println!(
        "trained {} epochs, best epoch {:?}, final val loss {:.4}",
        report.train_losses.len(),
        report.selected_epoch,
        report.val_losses.last().unwrap()
    );

    let mut se = 0.0;
    for i in 0..test_d.n_rows() {
        let row: Vec<f64> = test_d.features.row(i).to_vec();
        let pred = fitted.forward(&row)?;
        se += (pred - test_d.target[i]).powi(2);
    }
    let rmse = (se / test_d.n_rows() as f64).sqrt();
    println!("test RMSE {rmse:.3} (noise floor {:.3})", data.sigma_eps);
    Ok(())
}
