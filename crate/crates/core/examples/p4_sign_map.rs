//! Classify sign(P4) over the (delta_v, m) plane for the
//! Klausmeier-Gray-Scott family and write the map as CSV. Ring-type
//! patterns only bifurcate in the P4 < 0 region; no Turing point exists
//! for delta_v m <= 2.
//!
//! ```sh
//! cargo run --release --example p4_sign_map [out.csv]
//! ```

use dihedra::cli;
use dihedra::localform;

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/p4_sign_map.csv".to_string());
    let dvs = localform::grid(0.5, 20.0, 40);
    let ms = localform::grid(0.1, 2.0, 40);
    let map = localform::kgs_p4_map(dvs, ms);

    let mut counts = std::collections::BTreeMap::new();
    for row in &map.cells {
        for cell in row {
            *counts.entry(cell.label()).or_insert(0usize) += 1;
        }
    }
    println!("cell classes over the 40x40 grid:");
    for (label, count) in &counts {
        println!("  {label:<10} {count}");
    }

    std::fs::write(&out, cli::sign_map_csv(&map, "delta_v", "m"))?;
    println!("map written to {out}");
    Ok(())
}
