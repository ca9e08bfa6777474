//! Define a reaction-diffusion model from expression strings (the same
//! config format the CLI accepts from a file) and run the analysis
//! pipeline on it.
//!
//! ```sh
//! cargo run --release --example custom_model
//! ```

use dihedra::cli;
use dihedra::equilibria;
use dihedra::model;

const CONFIG: &str = r#"
# Klausmeier-Gray-Scott with a slightly higher plant mortality.
name = "kgs_m06"
fhat = "-v*u^2 + m*u"
ghat = "-mu + v + v*u^2"
d_v = 7.2
beta = 0.0

[params]
m = 0.6
"#;

fn main() -> anyhow::Result<()> {
    let model = model::from_config_str(CONFIG)?;
    println!("parsed `{}`:", model.name);
    println!("  fhat = {}", model.fhat);
    println!("  ghat = {}", model.ghat);

    // Survey the uniform states first (the nontrivial branch exists above
    // the fold at mu = 2m = 1.2), then aim the Turing search at the
    // vegetated branch: the state with the largest u.
    let mu = 1.25;
    let found = equilibria::find_steady_states(
        &model,
        mu,
        &equilibria::lattice_seeds(6.0, 6.0, 10),
        false,
    )?;
    println!("\nsteady states at mu = {mu}:");
    for s in &found.states {
        println!("  u = {:.6}, v = {:.6}", s.u, s.v);
    }
    let vegetated = found
        .states
        .iter()
        .max_by(|a, b| a.u.total_cmp(&b.u))
        .ok_or_else(|| anyhow::anyhow!("no steady state at mu = {mu}"))?;

    let analysis = cli::analyze_model(&model, mu, (vegetated.u, vegetated.v))?;
    println!();
    print!("{}", cli::analysis_report(&model, &analysis));
    Ok(())
}
