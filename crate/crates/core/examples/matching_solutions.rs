//! Solve the dihedral matching conditions: polish the three bundled spot A
//! coefficient sets, then survey further solutions by multistart.
//!
//! ```sh
//! cargo run --release --example matching_solutions
//! ```

use dihedra::matching::{self, seeds, MatchKind};

fn main() -> anyhow::Result<()> {
    println!("polished spot A coefficient sets:");
    for (name, m, n, init) in [
        ("hexagon", seeds::HEXAGON.0, seeds::HEXAGON.1, seeds::HEXAGON.2.to_vec()),
        ("square", seeds::SQUARE.0, seeds::SQUARE.1, seeds::SQUARE.2.to_vec()),
        ("pentagon", seeds::PENTAGON.0, seeds::PENTAGON.1, seeds::PENTAGON.2.to_vec()),
    ] {
        let sol = matching::solve_spot_a(m, n, &init)?;
        let coeffs: Vec<String> = sol.coeffs.iter().map(|c| format!("{c:+.6}")).collect();
        println!(
            "  {name:<9} (m={m}, N={n}): [{}]  residual {:.1e}, min sv {:.3}",
            coeffs.join(", "),
            sol.residual,
            sol.jac_min_sv
        );
    }

    println!("\nmultistart survey, spot A m=6 N=2 (500 trials, seed 42):");
    for sol in matching::multistart(MatchKind::SpotA, 6, 2, 500, 42)? {
        let coeffs: Vec<String> = sol.coeffs.iter().map(|c| format!("{c:+.4}")).collect();
        println!("  [{}]  min sv {:.3}", coeffs.join(", "), sol.jac_min_sv);
    }

    println!("\nmultistart survey, ring m=6 N=1 (Z2 classes):");
    for sol in matching::multistart(MatchKind::Ring, 6, 1, 200, 42)? {
        let coeffs: Vec<String> = sol.coeffs.iter().map(|c| format!("{c:+.4}")).collect();
        println!("  [{}]  min sv {:.3}", coeffs.join(", "), sol.jac_min_sv);
    }
    Ok(())
}
