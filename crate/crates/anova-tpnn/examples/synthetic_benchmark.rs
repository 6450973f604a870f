//! A scaled-down component-selection benchmark: can importance scores
//! separate true signal components from nulls?
//!
//! The full-scale experiment (n=15000, 10 repetitions) runs through the
//! acceptance suite or `anova-tpnn bench`.
//!
//! ```bash
//! cargo run --release --example synthetic_benchmark
//! ```

use anova_tpnn::data::SyntheticKind;
use anova_tpnn::synthbench::{run_prediction_experiment, run_selection_experiment, ExperimentSpec};

fn main() -> anova_tpnn::Result<()> {
    let spec = ExperimentSpec {
        repetitions: 3,
        n: 5000,
        max_epochs: 40,
        batch_size: 1024,
        ..ExperimentSpec::new(SyntheticKind::F1)
    };

    let selection = run_selection_experiment(&spec)?;
    println!(
        "selection AUROC per repetition {:?} -> mean {:.3} (std {:.3})",
        selection
            .per_repetition_auroc
            .iter()
            .map(|v| format!("{v:.3}"))
            .collect::<Vec<_>>(),
        selection.mean_auroc,
        selection.std_auroc
    );

    let prediction = run_prediction_experiment(&spec)?;
    println!(
        "test RMSE per repetition {:?} -> mean {:.3}; generator noise sigma {:.3}",
        prediction
            .per_repetition_rmse
            .iter()
            .map(|v| format!("{v:.3}"))
            .collect::<Vec<_>>(),
        prediction.mean_rmse,
        prediction.per_repetition_sigma_eps[0]
    );
    Ok(())
}
