//! Exact per-feature SHAP attributions read off a fitted model.
//!
//! For a sum-to-zero decomposition the SHAP value of feature j is the sum
//! of f_S(x_S)/|S| over components containing j; no sampling, no
//! background dataset.
//!
//! ```bash
//! cargo run --release --example explain_attributions
//! ```

use anova_tpnn::data::{fit_quantile_transform, generate_synthetic, split, SyntheticKind, SyntheticSpec};
use anova_tpnn::interpret::anova_shap;
use anova_tpnn::model::{build_model, BasisCounts, BasisMode, ComponentSpec, Link};
use anova_tpnn::train::{train, FitConfig};

fn main() -> anova_tpnn::Result<()> {
    let data = generate_synthetic(&SyntheticSpec {
        kind: SyntheticKind::F1,
        n: 6000,
        snr: 5.0,
        seed: 3,
    })?;
    let (train_d, val_d, _) = split(&data.dataset, (0.7, 0.1, 0.2), 1)?;
    let mut model = build_model(5, 2, &ComponentSpec::AllUpToOrder, &BasisCounts::uniform(15), BasisMode::Independent, Link::Identity, 0)?;
    model.transformer = fit_quantile_transform(&train_d.features, &train_d.feature_names)?;
    model.feature_names = train_d.feature_names.clone();
    let (fitted, _) = train(model, &train_d, Some(&val_d), &FitConfig { max_epochs: 60, batch_size: 2048, ..FitConfig::default() })?;

    for i in 0..3 {
        let row: Vec<f64> = data.dataset.features.row(i).to_vec();
        let at = anova_shap(&fitted, &row)?;
        println!("row {i}: prediction {:.3} = intercept {:.3} + contributions", at.prediction, at.beta0);
        for (name, value) in fitted.feature_names.iter().zip(at.shap.iter()) {
            println!("   {name:>4}  {value:+.4}");
        }
        let total: f64 = at.shap.iter().sum();
        println!("   sum of SHAP values {total:+.4} (equals prediction - intercept: {:+.4})", at.prediction - at.beta0);
    }
    Ok(())
}
