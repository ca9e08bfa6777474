//! Synthesise a ring-type profile. Ring branches need P4 < 0, which the
//! default Klausmeier-Gray-Scott parameters do not satisfy; shrinking the
//! water diffusion to delta_v = 4.5 (with m = 0.5) moves the model into the
//! subcritical region where rings bifurcate.
//!
//! ```sh
//! cargo run --release --example ring_profile [out_dir]
//! ```

use std::collections::BTreeMap;

use dihedra::cli;
use dihedra::field::Species;
use dihedra::matching;
use dihedra::model::ModelSpec;
use dihedra::profile::{self, PatternSpec};

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/ring_profile".to_string());
    let out = std::path::PathBuf::from(out);

    let mut overrides = BTreeMap::new();
    overrides.insert("delta_v".to_string(), 4.5);
    let model = ModelSpec::builtin("kgs", &overrides)?;
    let analysis = cli::analyze_model(&model, 1.0, (1.0, 0.5))?;
    let p = analysis.predictors;
    println!(
        "kgs with delta_v = 4.5: P1 = {:.3}, P4 = {:.3} (rings {})",
        p.p1,
        p.p4,
        if p.p4 < 0.0 { "bifurcate" } else { "do not bifurcate" }
    );

    // Axisymmetric ring core plus a hexagonal N = 1 modulation.
    let sol = matching::solve_ring(6, 1, &[0.45, 0.37])?;
    let coeffs: Vec<String> = sol.coeffs.iter().map(|c| format!("{c:+.6}")).collect();
    println!("ring coefficients (m=6, N=1): [{}]", coeffs.join(", "));

    let eps = PatternSpec::default_eps(p.p1, analysis.tp.k);
    let spec = PatternSpec::new(sol, eps, 1.0)?;
    let len = 20.0 * analysis.tp.wavelength();
    let field = profile::ring_field(&analysis.tp, &analysis.lf, &spec, 256, len, false)?;

    std::fs::create_dir_all(&out)?;
    for s in [Species::U, Species::V] {
        field.write_csv(s, &out.join(format!("{}_ring.csv", s.name())))?;
        field.write_pgm(s, &out.join(format!("{}_ring.pgm", s.name())))?;
    }
    let (lo, hi) = field.min_max(Species::U);
    println!("u in [{lo:.6}, {hi:.6}]; written to {}", out.display());
    Ok(())
}
