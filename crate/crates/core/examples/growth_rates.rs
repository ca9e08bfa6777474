//! Cross-check the temporal dispersion relation against measured growth:
//! perturb the uniform state with single cosine modes and compare the
//! fitted exponential rates with the eigenvalues of the linearisation.
//!
//! ```sh
//! cargo run --release --example growth_rates
//! ```

use std::collections::BTreeMap;

use dihedra::model::ModelSpec;
use dihedra::sim;
use dihedra::turing;

fn main() -> anyhow::Result<()> {
    let model = ModelSpec::builtin("kgs", &BTreeMap::new())?;
    let tp = turing::find_turing_point(&model, 1.0, (1.0, 0.5))?;
    println!(
        "kgs Turing point: mu* = {:.6}, k = {:.6}",
        tp.mu(),
        tp.k
    );

    let len = 20.0 * tp.wavelength();
    // Unstable band side: growth at k*; stable side: decay everywhere.
    let band = turing::band_unstable_state(&model, &tp, 0.01)?;
    let stable = turing::bifurcation_side_state(&model, &tp, 0.01)?;
    println!(
        "band side mu = {:.6}, bifurcation side mu = {:.6}",
        band.mu, stable.mu
    );

    for (label, state, k) in [
        ("band side, k = k*", &band, tp.k),
        ("stable side, k = k*", &stable, tp.k),
        ("stable side, k = k*/4", &stable, tp.k / 4.0),
    ] {
        let check = sim::linear_growth_check(&model, state, k, 30.0, 0.05, 128, len)?;
        println!(
            "{label:<22} measured {:+.6e}  dispersion {:+.6e}  (k used {:.5})",
            check.measured, check.reference, check.k
        );
    }
    Ok(())
}
