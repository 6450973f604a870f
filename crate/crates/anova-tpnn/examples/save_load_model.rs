//! Persist a model to its JSON document and reload it bit-exactly.
//!
//! ```bash
//! cargo run --release --example save_load_model
//! ```

use anova_tpnn::model::{build_model, load_model, save_model, BasisCounts, BasisMode, ComponentSpec, Link};

fn main() -> anova_tpnn::Result<()> {
    let model = build_model(3, 2, &ComponentSpec::AllUpToOrder, &BasisCounts::uniform(4), BasisMode::Independent, Link::Identity, 9)?;

    let path = std::env::temp_dir().join("anova_tpnn_example_model.json");
    save_model(&model, &path)?;
    println!("saved to {}", path.display());

    let reloaded = load_model(&path)?;
    let x = [0.3, 0.7, 0.5];
    let a = model.forward(&x)?;
    let b = reloaded.forward(&x)?;
    println!("forward before {a:.17} after {b:.17} (bit-identical: {})", a.to_bits() == b.to_bits());

    // the file is versioned and checksummed; corruption is detected
    let text = std::fs::read_to_string(&path).unwrap();
    let tampered = text.replace("\"d\": 2", "\"d\": 3");
    match anova_tpnn::model::model_from_json(&tampered) {
        Err(e) => println!("tampered file rejected: {e}"),
        Ok(_) => println!("unexpected: tampered file accepted"),
    }
    std::fs::remove_file(&path).ok();
    Ok(())
}
