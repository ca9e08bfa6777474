//! Synthesise a localised spot A-type initial profile (hexagon by default)
//! and write it as CSV and PGM images, plus the manifest that reproduces it.
//!
//! ```sh
//! cargo run --release --example spot_profile [preset:pattern] [out_dir]
//! ```

use dihedra::cli;
use dihedra::field::Species;
use dihedra::profile;

fn main() -> anyhow::Result<()> {
    let spec = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "kgs:hexagon".to_string());
    let out = std::env::args()
        .nth(2)
        .unwrap_or_else(|| "target/spot_profile".to_string());
    let out = std::path::PathBuf::from(out);

    let mut plan = cli::RunPlan::from_spec_string(&spec)?;
    plan.n_grid = 256;
    let run = cli::prepare_run(&plan)?;

    std::fs::create_dir_all(&out)?;
    for s in [Species::U, Species::V] {
        run.init.write_csv(s, &out.join(format!("{}_init.csv", s.name())))?;
        run.init.write_pgm(s, &out.join(format!("{}_init.pgm", s.name())))?;
    }
    std::fs::write(out.join("manifest.txt"), cli::manifest(&run))?;

    let (lo, hi) = run.init.min_max(Species::U);
    println!(
        "{spec}: {}x{} grid over a side of {:.1} (20 wavelengths), u in [{:.4}, {:.4}]",
        run.init.n_grid,
        run.init.n_grid,
        run.init.len,
        lo,
        hi
    );
    println!(
        "dihedral symmetry error of the profile: {:.2e}",
        profile::dihedral_symmetry_error(&run.init, run.matching.symmetry)
    );
    println!("written to {}", out.display());
    Ok(())
}
