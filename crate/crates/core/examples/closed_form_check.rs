//! Cross-check the generic symbolic pipeline against the hand-derived
//! closed forms for the Klausmeier-Gray-Scott model, at the reference
//! parameters and at random points of the valid region.
//!
//! ```sh
//! cargo run --release --example closed_form_check
//! ```

use rand::Rng;
use rand::SeedableRng;

use dihedra::cli;
use dihedra::kgs_oracle;

fn main() -> anyhow::Result<()> {
    print!("{}", cli::oracle_report(0.5, 7.2)?);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut worst: Option<kgs_oracle::OracleReport> = None;
    for _ in 0..50 {
        let m = rng.random_range(0.1..2.0);
        let s = rng.random_range(2.1..20.0);
        let report = kgs_oracle::oracle_compare(m, s / m)?;
        let is_worse = worst
            .as_ref()
            .map(|w| report.max_relative() > w.max_relative())
            .unwrap_or(true);
        if is_worse {
            worst = Some(report);
        }
    }
    let worst = worst.unwrap();
    println!(
        "\nworst of 50 random points: m = {:.4}, delta_v = {:.4} -> max rel dev {:.3e}",
        worst.m,
        worst.delta_v,
        worst.max_relative()
    );
    Ok(())
}
