//! Purify an ambiguous additive decomposition into the unique sum-to-zero
//! form.
//!
//! The input below and `f1 = x1, f2 = x2, f12 = x1*x2` describe the same
//! total function; purification maps both to the same component set, which
//! is what makes component-level interpretation well-defined.
//!
//! ```bash
//! cargo run --release --example purify_decomposition
//! ```

use anova_tpnn::interpret::{purify, ComponentFn, Decomposition, Quadrature};

fn show(label: &str, dec: &Decomposition) {
    println!("{label}: beta0 = {:+.4}", dec.beta0);
    for c in &dec.components {
        let name = c.features.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(":");
        let probe: Vec<f64> = c.features.iter().map(|_| 0.25).collect();
        println!("   f_{name}(0.25,...) = {:+.4}", c.value(&probe));
    }
}

fn main() -> anova_tpnn::Result<()> {
    // one of infinitely many decompositions of x1 + x2 + x1*x2
    let ambiguous = Decomposition {
        beta0: 0.0,
        components: vec![
            ComponentFn::new(vec![0], |x: &[f64]| -x[0]),
            ComponentFn::new(vec![1], |x: &[f64]| x[0]),
            ComponentFn::new(vec![0, 1], |x: &[f64]| x[0] * (x[1] + 2.0)),
        ],
    };
    show("before", &ambiguous);

    let quad = Quadrature::Grid { points: 201 };
    let purified = purify(&ambiguous, &quad)?;
    show("after", &purified);

    // the canonical components under uniform [0,1]^2
    println!("\nclosed forms: beta0 = 1.25, f_1 = 1.5(x-0.5), f_2 = 1.5(x-0.5), f_12 = (x1-0.5)(x2-0.5)");
    let f12 = purified.component(&[0, 1]).unwrap();
    println!("f_12(0.2, 0.9) = {:+.6} vs (0.2-0.5)(0.9-0.5) = {:+.6}", f12.value(&[0.2, 0.9]), (0.2 - 0.5) * (0.9 - 0.5));

    // total function is untouched
    let x = [0.37, 0.81];
    println!("total before {:.6} after {:.6}", ambiguous.total(&x), purified.total(&x));
    Ok(())
}
