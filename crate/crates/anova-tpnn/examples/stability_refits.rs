//! Measure how much each component estimate moves across refits on
//! resampled training data. Zero means the runs agree exactly; identical
//! seeds give exactly zero.
//!
//! ```bash
//! cargo run --release --example stability_refits
//! ```

use anova_tpnn::data::SyntheticKind;
use anova_tpnn::synthbench::{run_stability_experiment, ExperimentSpec};

fn main() -> anova_tpnn::Result<()> {
    let spec = ExperimentSpec {
        repetitions: 4,
        n: 4000,
        max_epochs: 40,
        batch_size: 1024,
        ..ExperimentSpec::new(SyntheticKind::F1)
    };
    println!("refitting {} times on resampled splits (screen threshold {:?})...", spec.repetitions, spec.screen_threshold);
    let out = run_stability_experiment(&spec)?;

    println!("\ncomponents kept after importance screening:");
    for s in &out.components {
        println!("   {}", s.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(":"));
    }
    println!("\nper-component stability (smaller = more stable):");
    for e in &out.report.per_component {
        let name = e.features.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(":");
        println!("   SC(f_{name}) = {:.4}", e.sc);
    }
    println!("\noverall SC {:.4} (mean), {:.4} (cardinality-weighted sum)", out.report.overall, out.report.overall_cardinality_weighted);
    Ok(())
}
