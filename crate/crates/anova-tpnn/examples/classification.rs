//! Binary classification with the logit link and logistic loss.
//!
//! ```bash
//! cargo run --release --example classification
//! ```

use anova_tpnn::data::{split, Dataset};
use anova_tpnn::model::{build_model, BasisCounts, BasisMode, ComponentSpec, Link};
use anova_tpnn::train::{train, FitConfig, LossKind};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anova_tpnn::Result<()> {
    // P(y=1 | x) = sigmoid(4 x1 - 2 x2 - 1)
    let n = 6000;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut feats = Array2::zeros((n, 2));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let a: f64 = rng.gen_range(0.0..1.0);
        let b: f64 = rng.gen_range(0.0..1.0);
        feats[(i, 0)] = a;
        feats[(i, 1)] = b;
        let p = 1.0 / (1.0 + (-(4.0 * a - 2.0 * b - 1.0)).exp());
        y[i] = if rng.gen_bool(p) { 1.0 } else { 0.0 };
    }
    let data = Dataset::new(feats, y, vec!["x1".into(), "x2".into()])?;
    let (train_d, val_d, test_d) = split(&data, (0.7, 0.1, 0.2), 0)?;

    let model = build_model(2, 1, &ComponentSpec::AllUpToOrder, &BasisCounts::uniform(10), BasisMode::Independent, Link::Logit, 3)?;
    let cfg = FitConfig {
        loss: LossKind::Logistic,
        max_epochs: 80,
        batch_size: 1024,
        ..FitConfig::default()
    };
    let (fitted, report) = train(model, &train_d, Some(&val_d), &cfg)?;
    println!("best epoch {:?}", report.selected_epoch);

    // test AUROC of predicted probabilities
    let mut scored: Vec<(f64, bool)> = Vec::new();
    for i in 0..test_d.n_rows() {
        let row: Vec<f64> = test_d.features.row(i).to_vec();
        scored.push((fitted.predict_response(&row)?, test_d.target[i] == 1.0));
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n_pos = scored.iter().filter(|(_, t)| *t).count();
    let n_neg = scored.len() - n_pos;
    let rank_sum: f64 = scored
        .iter()
        .enumerate()
        .filter(|(_, (_, t))| *t)
        .map(|(i, _)| (i + 1) as f64)
        .sum();
    let auroc = (rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64);
    println!("test AUROC {auroc:.3} on {} rows ({n_pos} positives)", scored.len());

    for &x in &[[0.9, 0.1], [0.1, 0.9]] {
        println!("P(y=1 | {x:?}) = {:.3}", fitted.predict_response(&x)?);
    }
    Ok(())
}
