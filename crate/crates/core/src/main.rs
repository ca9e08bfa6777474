//! Thin command-line front end over the dihedra library.
//!
//! Exit codes: 0 success, 2 usage error (clap default), 3 numerical or
//! pipeline failure.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use dihedra::cli;
use dihedra::equilibria;
use dihedra::field::Species;
use dihedra::localform;
use dihedra::matching::{self, MatchKind};
use dihedra::profile;

#[derive(Parser)]
#[command(name = "dihedra", version, about = "Turing analysis and localised dihedral patterns for two-component reaction-diffusion models")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find uniform steady states at fixed mu.
    Steady {
        /// Builtin model name or config file path.
        #[arg(long)]
        model: String,
        #[arg(long)]
        mu: f64,
        /// Seed lattice extent in u and v.
        #[arg(long, default_value_t = 10.0)]
        seed_max: f64,
        /// Seeds per axis.
        #[arg(long, default_value_t = 12)]
        seeds: usize,
        /// Keep states with negative components.
        #[arg(long)]
        allow_negative: bool,
        /// Optional CSV output path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Locate a Turing point and report it, optionally with the dispersion curve.
    Turing {
        #[arg(long)]
        model: String,
        #[arg(long)]
        mu_guess: Option<f64>,
        #[arg(long)]
        u_guess: Option<f64>,
        #[arg(long)]
        v_guess: Option<f64>,
        /// Write the (k, max Re omega) dispersion curve here.
        #[arg(long)]
        dispersion_csv: Option<PathBuf>,
    },
    /// Print the four predictors and their qualitative reading.
    Predict {
        #[arg(long)]
        model: String,
        #[arg(long)]
        mu_guess: Option<f64>,
        #[arg(long)]
        u_guess: Option<f64>,
        #[arg(long)]
        v_guess: Option<f64>,
    },
    /// Full report: steady state, Turing point, wave number, predictors.
    Analyze {
        #[arg(long)]
        model: String,
        #[arg(long)]
        mu_guess: Option<f64>,
        #[arg(long)]
        u_guess: Option<f64>,
        #[arg(long)]
        v_guess: Option<f64>,
    },
    /// Classify sign(P4) over a (delta_v, m) grid for the kgs family.
    P4map {
        #[arg(long, default_value_t = 0.5)]
        dv_min: f64,
        #[arg(long, default_value_t = 20.0)]
        dv_max: f64,
        #[arg(long, default_value_t = 40)]
        dv_count: usize,
        #[arg(long, default_value_t = 0.1)]
        m_min: f64,
        #[arg(long, default_value_t = 2.0)]
        m_max: f64,
        #[arg(long, default_value_t = 40)]
        m_count: usize,
        /// CSV output path (param1, param2, class).
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a dihedral matching condition by multistart.
    Match {
        /// spot-a or ring.
        #[arg(long)]
        kind: String,
        /// Dihedral index.
        #[arg(long)]
        m: usize,
        /// Truncation order.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = cli::DEFAULT_SEED)]
        seed: u64,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesise a localised initial profile and write CSV + PGM fields.
    Profile {
        /// preset:pattern, e.g. kgs:hexagon.
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 256)]
        ngrid: usize,
        /// Override the profile amplitude C.
        #[arg(long)]
        amplitude: Option<f64>,
        /// Force the eps sign (+1 or -1); default follows P1.
        #[arg(long, default_value_t = 0.0)]
        eps_sign: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time-integrate a preset and write snapshots plus a manifest.
    Simulate {
        /// preset:pattern, e.g. kgs:hexagon.
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = cli::DEFAULT_NGRID)]
        ngrid: usize,
        #[arg(long, default_value_t = cli::DEFAULT_DT)]
        dt: f64,
        /// Override the final time (default: last preset snapshot).
        #[arg(long)]
        t_end: Option<f64>,
        /// Force the eps sign (+1 or -1); default follows P1.
        #[arg(long, default_value_t = 0.0)]
        eps_sign: f64,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long, default_value_t = cli::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the generic pipeline against closed forms (kgs only).
    Oracle {
        /// Model with a closed form; only `kgs` is available.
        model: String,
        #[arg(long, default_value_t = 0.5)]
        m: f64,
        #[arg(long, default_value_t = 7.2)]
        delta_v: f64,
        /// Additionally check this many random parameter points.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = cli::DEFAULT_SEED)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    match dispatch(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn guesses(
    model: &dihedra::ModelSpec,
    mu_guess: Option<f64>,
    u_guess: Option<f64>,
    v_guess: Option<f64>,
) -> anyhow::Result<(f64, (f64, f64))> {
    if let (Some(mu), Some(u), Some(v)) = (mu_guess, u_guess, v_guess) {
        return Ok((mu, (u, v)));
    }
    let (mu_default, state_default) = cli::default_guess(&model.name)
        .context("custom models need --mu-guess, --u-guess, and --v-guess")?;
    Ok((
        mu_guess.unwrap_or(mu_default),
        (
            u_guess.unwrap_or(state_default.0),
            v_guess.unwrap_or(state_default.1),
        ),
    ))
}

fn dispatch(args: Args) -> anyhow::Result<()> {
    match args.command {
        Command::Steady {
            model,
            mu,
            seed_max,
            seeds,
            allow_negative,
            csv,
        } => {
            let model = cli::load_model(&model, &BTreeMap::new())?;
            let found = equilibria::find_steady_states(
                &model,
                mu,
                &equilibria::lattice_seeds(seed_max, seed_max, seeds),
                allow_negative,
            )?;
            println!(
                "{} steady state(s) at mu={mu} ({} seeds failed to converge)",
                found.states.len(),
                found.failed_seeds
            );
            for s in &found.states {
                println!("  u={:.9}, v={:.9}  (residual {:.2e})", s.u, s.v, s.residual);
            }
            if let Some(path) = csv {
                std::fs::write(&path, cli::steady_csv(&found.states))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        Command::Turing {
            model,
            mu_guess,
            u_guess,
            v_guess,
            dispersion_csv,
        } => {
            let model = cli::load_model(&model, &BTreeMap::new())?;
            let (mu, state) = guesses(&model, mu_guess, u_guess, v_guess)?;
            let a = cli::analyze_model(&model, mu, state)?;
            print!("{}", cli::analysis_report(&model, &a));
            if let Some(path) = dispersion_csv {
                std::fs::write(&path, cli::dispersion_csv(&model, &a, 300)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        Command::Predict {
            model,
            mu_guess,
            u_guess,
            v_guess,
        }
        | Command::Analyze {
            model,
            mu_guess,
            u_guess,
            v_guess,
        } => {
            let model = cli::load_model(&model, &BTreeMap::new())?;
            let (mu, state) = guesses(&model, mu_guess, u_guess, v_guess)?;
            let a = cli::analyze_model(&model, mu, state)?;
            print!("{}", cli::analysis_report(&model, &a));
            Ok(())
        }
        Command::P4map {
            dv_min,
            dv_max,
            dv_count,
            m_min,
            m_max,
            m_count,
            out,
        } => {
            let map = localform::kgs_p4_map(
                localform::grid(dv_min, dv_max, dv_count),
                localform::grid(m_min, m_max, m_count),
            );
            std::fs::write(&out, cli::sign_map_csv(&map, "delta_v", "m"))
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} cells to {}", dv_count * m_count, out.display());
            Ok(())
        }
        Command::Match {
            kind,
            m,
            n,
            trials,
            seed,
            out,
        } => {
            let kind = match kind.as_str() {
                "spot-a" | "spotA" | "spot_a" => MatchKind::SpotA,
                "ring" => MatchKind::Ring,
                other => anyhow::bail!("unknown kind `{other}` (expected spot-a or ring)"),
            };
            let sols = matching::multistart(kind, m, n, trials, seed)?;
            let csv = cli::matching_csv(&sols);
            match out {
                Some(path) => std::fs::write(&path, csv)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            eprintln!("{} distinct solution(s) from {trials} trials", sols.len());
            Ok(())
        }
        Command::Profile {
            preset,
            ngrid,
            amplitude,
            eps_sign,
            out,
        } => {
            let mut plan = cli::RunPlan::from_spec_string(&preset)?;
            plan.n_grid = ngrid;
            plan.eps_sign = eps_sign;
            if let Some(a) = amplitude {
                plan.amplitude = a;
            }
            let run = cli::prepare_run(&plan)?;
            std::fs::create_dir_all(&out)?;
            for s in [Species::U, Species::V] {
                run.init
                    .write_csv(s, &out.join(format!("{}_init.csv", s.name())))?;
                run.init
                    .write_pgm(s, &out.join(format!("{}_init.pgm", s.name())))?;
            }
            std::fs::write(out.join("manifest.txt"), cli::manifest(&run))?;
            let err = profile::dihedral_symmetry_error(&run.init, run.matching.symmetry);
            println!(
                "profile {} written to {} (dihedral symmetry error {:.2e})",
                preset,
                out.display(),
                err
            );
            Ok(())
        }
        Command::Simulate {
            preset,
            ngrid,
            dt,
            t_end,
            eps_sign,
            amplitude,
            seed,
            out,
        } => {
            let mut plan = cli::RunPlan::from_spec_string(&preset)?;
            plan.n_grid = ngrid;
            plan.dt = dt;
            plan.eps_sign = eps_sign;
            plan.seed = seed;
            if let Some(a) = amplitude {
                plan.amplitude = a;
            }
            if let Some(t) = t_end {
                plan.t_end = t;
                plan.snapshot_times.retain(|&s| s <= t + 0.5 * dt);
            }
            let run = cli::prepare_run(&plan)?;
            println!("{}", cli::analysis_report(&run.model, &run.analysis));
            let final_field = cli::execute_run(&run, &out)?;
            let (lo, hi) = final_field.min_max(Species::U);
            println!(
                "run complete: {} snapshots in {} (final u range [{:.4}, {:.4}])",
                run.cfg.snapshot_times.len(),
                out.display(),
                lo,
                hi
            );
            Ok(())
        }
        Command::Oracle {
            model,
            m,
            delta_v,
            random,
            seed,
        } => {
            anyhow::ensure!(model == "kgs", "closed forms are available for `kgs` only");
            print!("{}", cli::oracle_report(m, delta_v)?);
            if random > 0 {
                use rand::Rng;
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut worst = 0.0f64;
                for _ in 0..random {
                    let m_r = rng.random_range(0.1..2.0);
                    let s = rng.random_range(2.1..20.0);
                    let report = dihedra::kgs_oracle::oracle_compare(m_r, s / m_r)?;
                    worst = worst.max(report.max_relative());
                }
                println!("worst relative deviation over {random} random points: {worst:.3e}");
            }
            Ok(())
        }
    }
}
