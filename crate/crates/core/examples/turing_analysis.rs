//! Locate the Turing point of a built-in model and print the full report:
//! steady state, wave number, and the four qualitative predictors.
//!
//! ```sh
//! cargo run --release --example turing_analysis [model]
//! ```

use std::collections::BTreeMap;

use dihedra::cli;

fn main() -> anyhow::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "kgs".to_string());
    let model = cli::load_model(&name, &BTreeMap::new())?;
    let (mu_guess, state_guess) = cli::default_guess(&model.name)
        .ok_or_else(|| anyhow::anyhow!("no default guess for `{name}`"))?;
    let analysis = cli::analyze_model(&model, mu_guess, state_guess)?;
    print!("{}", cli::analysis_report(&model, &analysis));

    // The dispersion curve around the critical wave number.
    println!("\ndispersion samples (k, max Re omega):");
    for frac in [0.5, 0.9, 1.0, 1.1, 1.5] {
        let k = frac * analysis.tp.k;
        let rate = dihedra::turing::max_growth_rate(&model, &analysis.tp.state, k)?;
        println!("  k = {k:.5}  rate = {rate:+.6e}");
    }
    Ok(())
}
