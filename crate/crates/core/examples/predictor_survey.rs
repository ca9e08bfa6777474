//! Compute P1..P4 for every bundled analysis target and print them as a
//! table, together with the qualitative pattern each sign combination
//! implies.
//!
//! ```sh
//! cargo run --release --example predictor_survey
//! ```

use std::collections::BTreeMap;

use dihedra::cli;
use dihedra::model::ModelSpec;

fn main() -> anyhow::Result<()> {
    println!(
        "{:<10} {:>9} {:>9} {:>9} {:>8} {:>8} {:>8} {:>8}  reading",
        "preset", "u*", "v*", "mu*", "P1", "P2", "P3", "P4"
    );
    for name in ["kgs", "logistic", "gilad", "vh1", "vh2"] {
        let preset = cli::preset(name)?;
        let model = ModelSpec::builtin(preset.model, &BTreeMap::new())?;
        let a = cli::analyze_model(&model, preset.mu_guess, preset.state_guess)?;
        let p = a.predictors;
        let phase = if p.p2 > 0.0 { "in-phase" } else { "anti-phase" };
        let polarity = if p.p3 > 0.0 { "peaks" } else { "gaps" };
        println!(
            "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>8.3} {:>8.3} {:>8.3} {:>8.3}  {} {}",
            name, a.tp.state.u, a.tp.state.v, a.tp.mu(), p.p1, p.p2, p.p3, p.p4, phase, polarity
        );
    }
    Ok(())
}
