//! Constructive identifiability check: when two independently seeded fits
//! agree as functions, their per-component estimates agree too. This is
//! what structural sum-to-zero buys over unconstrained additive networks.

use anova_tpnn::data::{fit_quantile_transform, split, Dataset};
use anova_tpnn::model::{build_model, AnovaTpnnModel, BasisCounts, BasisMode, ComponentSpec, Link};
use anova_tpnn::train::{train, FitConfig};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fit(data: &Dataset, seed: u64) -> AnovaTpnnModel {
    let (tr, va, _) = split(data, (0.7, 0.1, 0.2), 1).unwrap();
    let mut model = build_model(
        2,
        2,
        &ComponentSpec::AllUpToOrder,
        &BasisCounts::uniform(10),
        BasisMode::Independent,
        Link::Identity,
        seed,
    )
    .unwrap();
    model.transformer = fit_quantile_transform(&tr.features, &tr.feature_names).unwrap();
    let cfg = FitConfig {
        batch_size: 512,
        max_epochs: 250,
        seed,
        ..FitConfig::default()
    };
    train(model, &tr, Some(&va), &cfg).unwrap().0
}

#[test]
fn component_agreement_tracks_function_agreement() {
    // d=2, p=2 target with a genuine interaction
    let n = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut feats = Array2::zeros((n, 2));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let a: f64 = rng.gen_range(0.0..1.0);
        let b: f64 = rng.gen_range(0.0..1.0);
        feats[(i, 0)] = a;
        feats[(i, 1)] = b;
        y[i] = 3.0 * a + (2.0 * std::f64::consts::PI * b).sin() + 2.0 * a * b
            + 0.05 * rng.gen_range(-1.0..1.0);
    }
    let data = Dataset::new(feats, y, vec!["x1".into(), "x2".into()]).unwrap();

    let run1 = fit(&data, 100);
    let run2 = fit(&data, 200);

    // dense grid comparison of the two fitted functions
    let g = 60;
    let mut forward_se = 0.0;
    let mut count = 0.0;
    for i in 0..g {
        for j in 0..g {
            let x = [(i as f64 + 0.5) / g as f64, (j as f64 + 0.5) / g as f64];
            let d = run1.forward(&x).unwrap() - run2.forward(&x).unwrap();
            forward_se += d * d;
            count += 1.0;
        }
    }
    let forward_rmse = (forward_se / count).sqrt();

    // per-component comparison on the same grid
    for comp in &run1.components {
        let mut se = 0.0;
        let mut m = 0.0;
        for i in 0..g {
            for j in 0..g {
                let x = [(i as f64 + 0.5) / g as f64, (j as f64 + 0.5) / g as f64];
                let d = run1.eval_component(&comp.features, &x).unwrap()
                    - run2.eval_component(&comp.features, &x).unwrap();
                se += d * d;
                m += 1.0;
            }
        }
        let comp_rmse = (se / m).sqrt();
        assert!(
            comp_rmse <= 10.0 * forward_rmse,
            "component {:?} rmse {} exceeds 10x forward rmse {}",
            comp.features,
            comp_rmse,
            forward_rmse
        );
    }
}
