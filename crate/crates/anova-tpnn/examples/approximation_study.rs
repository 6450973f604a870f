//! How approximation quality scales with the basis count: fit a centered
//! sine with K basis functions and watch the grid RMSE fall.
//!
//! ```bash
//! cargo run --release --example approximation_study
//! ```

use anova_tpnn::synthbench::run_approximation_study;

fn main() -> anova_tpnn::Result<()> {
    let ks = [2, 5, 10, 30];
    println!("fitting sin(2 pi x) with K basis functions, best of 3 seeds each...");
    let out = run_approximation_study(&ks, 3, 0)?;
    println!("{:>4} {:>12}", "K", "best RMSE");
    for p in &out.points {
        println!("{:>4} {:>12.5}", p.basis_count, p.best_rmse);
    }
    Ok(())
}
