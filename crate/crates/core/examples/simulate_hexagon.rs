//! Time-integrate the hexagon initial profile in the Klausmeier-Gray-Scott
//! model at reduced resolution and report how the localised patch evolves.
//! Snapshots land in `target/simulate_hexagon/` as CSV + PGM.
//!
//! Figure-quality runs use --ngrid 512 via the CLI instead:
//!
//! ```sh
//! cargo run --release -- simulate --preset kgs:hexagon --out runs/kgs_hexagon
//! cargo run --release --example simulate_hexagon    # quick 128-grid version
//! ```

use dihedra::cli;
use dihedra::field::Species;

fn main() -> anyhow::Result<()> {
    let out = std::path::PathBuf::from("target/simulate_hexagon");
    let mut plan = cli::RunPlan::from_spec_string("kgs:hexagon")?;
    plan.n_grid = 128;
    plan.t_end = 200.0;
    plan.snapshot_times = vec![0.0, 50.0, 100.0, 150.0, 200.0];

    let run = cli::prepare_run(&plan)?;
    println!("{}", cli::analysis_report(&run.model, &run.analysis));
    println!(
        "integrating to t = {} on a {n}x{n} grid...",
        plan.t_end,
        n = run.init.n_grid
    );

    let t0 = std::time::Instant::now();
    let final_field = cli::execute_run(&run, &out)?;
    let (lo, hi) = final_field.min_max(Species::U);
    println!(
        "done in {:.1?}; final u range [{lo:.4}, {hi:.4}] (uniform state u* = {:.4})",
        t0.elapsed(),
        run.analysis.tp.state.u
    );
    println!("snapshots in {}", out.display());
    Ok(())
}
