//! Pipeline glue used by the `dihedra` binary and the runnable examples:
//! named presets, report formatting, snapshot output, and run manifests.
//!
//! Everything here is a thin layer over the library modules so the binary
//! stays an argument parser.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::equilibria;
use crate::error::{Error, Result};
use crate::field::{Field2D, Species};
use crate::localform::{self, LocalForm, Predictors};
use crate::matching::{self, MatchingSolution};
use crate::model::{self, ModelSpec};
use crate::profile::{self, PatternSpec};
use crate::sim::{self, SimConfig};
use crate::turing::{self, TuringPoint};

/// Fixed default RNG seed so repeated invocations are reproducible.
pub const DEFAULT_SEED: u64 = 42;
/// Default time step.
pub const DEFAULT_DT: f64 = 0.1;
/// Default grid for figure-quality runs; acceptance tests use 128-256.
pub const DEFAULT_NGRID: usize = 512;

/// A named analysis target: builtin model plus a Turing-point guess and
/// simulation defaults.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub model: &'static str,
    pub mu_guess: f64,
    pub state_guess: (f64, f64),
    /// Profile amplitude C; the first von Hardenberg point needs a larger
    /// kick for the pattern to register at simulation resolution.
    pub amplitude: f64,
    pub snapshot_times: &'static [f64],
}

const EARLY_SNAPSHOTS: [f64; 5] = [100.0, 200.0, 300.0, 400.0, 500.0];
const LATE_SNAPSHOTS: [f64; 5] = [200.0, 300.0, 400.0, 500.0, 600.0];

pub fn preset(name: &str) -> Result<Preset> {
    let p = match name {
        "kgs" => Preset {
            name: "kgs",
            model: "kgs",
            mu_guess: 1.0,
            state_guess: (1.0, 0.5),
            amplitude: 1.0,
            snapshot_times: &EARLY_SNAPSHOTS,
        },
        "logistic" => Preset {
            name: "logistic",
            model: "logistic_klausmeier",
            mu_guess: 2.2,
            state_guess: (0.5, 1.8),
            amplitude: 1.0,
            snapshot_times: &EARLY_SNAPSHOTS,
        },
        "gilad" => Preset {
            name: "gilad",
            model: "nfc_gilad",
            mu_guess: 1.6,
            state_guess: (0.5, 0.8),
            amplitude: 1.0,
            snapshot_times: &EARLY_SNAPSHOTS,
        },
        "vh1" => Preset {
            name: "vh1",
            model: "von_hardenberg",
            mu_guess: 0.17,
            state_guess: (0.02, 0.17),
            amplitude: 4.0,
            snapshot_times: &LATE_SNAPSHOTS,
        },
        "vh2" => Preset {
            name: "vh2",
            model: "von_hardenberg",
            mu_guess: 0.41,
            state_guess: (0.27, 0.55),
            amplitude: 1.0,
            snapshot_times: &LATE_SNAPSHOTS,
        },
        _ => return Err(Error::UnknownModel(format!("preset `{name}`"))),
    };
    Ok(p)
}

/// The bundled pattern seeds by name.
pub fn pattern_seed(name: &str) -> Result<(usize, usize, Vec<f64>)> {
    match name {
        "hexagon" => {
            let (m, n, a) = matching::seeds::HEXAGON;
            Ok((m, n, a.to_vec()))
        }
        "square" => {
            let (m, n, a) = matching::seeds::SQUARE;
            Ok((m, n, a.to_vec()))
        }
        "pentagon" => {
            let (m, n, a) = matching::seeds::PENTAGON;
            Ok((m, n, a.to_vec()))
        }
        _ => Err(Error::Invalid(format!(
            "unknown pattern `{name}` (expected hexagon, square, or pentagon)"
        ))),
    }
}

/// Resolve a model source: a builtin name or a config file path.
pub fn load_model(source: &str, overrides: &BTreeMap<String, f64>) -> Result<ModelSpec> {
    let path = Path::new(source);
    if path.exists() {
        if !overrides.is_empty() {
            return Err(Error::Invalid(
                "parameter overrides apply to builtin models only".into(),
            ));
        }
        return model::from_config_file(path);
    }
    ModelSpec::builtin(source, overrides)
}

/// Default Turing guesses for the builtin models.
pub fn default_guess(model_name: &str) -> Option<(f64, (f64, f64))> {
    match model_name {
        "kgs" => Some((1.0, (1.0, 0.5))),
        "logistic_klausmeier" => Some((2.2, (0.5, 1.8))),
        "nfc_gilad" => Some((1.6, (0.5, 0.8))),
        "von_hardenberg" => Some((0.17, (0.02, 0.17))),
        _ => None,
    }
}

/// The full local analysis at a Turing point.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub tp: TuringPoint,
    pub lf: LocalForm,
    pub predictors: Predictors,
}

pub fn analyze_model(model: &ModelSpec, mu_guess: f64, state_guess: (f64, f64)) -> Result<Analysis> {
    let tp = turing::find_turing_point(model, mu_guess, state_guess)?;
    let lf = localform::build_local_form(model, &tp)?;
    let predictors = lf.predictors()?;
    Ok(Analysis {
        tp,
        lf,
        predictors,
    })
}

/// Plain-text report: Turing point, wave number, predictors with their
/// qualitative readings.
pub fn analysis_report(model: &ModelSpec, a: &Analysis) -> String {
    let p = &a.predictors;
    let mut s = String::new();
    let _ = writeln!(s, "model: {}", model.name);
    let _ = writeln!(
        s,
        "parameters: D_v={}, beta={}, {}",
        model.d_v,
        model.beta,
        model
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let _ = writeln!(
        s,
        "turing point: u*={:.6}, v*={:.6}, mu*={:.6}",
        a.tp.state.u, a.tp.state.v, a.tp.mu()
    );
    let _ = writeln!(
        s,
        "wave number: k={:.6}  (wavelength lambda={:.4}, repeated-root residual {:.2e})",
        a.tp.k,
        a.tp.wavelength(),
        a.tp.discriminant_residual
    );
    let _ = writeln!(s, "bifurcation side: eps_side={:+}", a.tp.eps_side);
    let dir = if p.p1 > 0.0 {
        "localised branches emerge for mu above mu* (precipitation increasing)"
    } else {
        "localised branches emerge for mu below mu* (precipitation decreasing)"
    };
    let phase = if p.p2 > 0.0 {
        "u and v deviations share sign: in-phase"
    } else {
        "u and v deviations have opposite sign: anti-phase"
    };
    let polarity = if p.p3 > 0.0 {
        "spot cores sit above the uniform state: peaks"
    } else {
        "spot cores sit below the uniform state: gaps"
    };
    let rings = if p.p4 < 0.0 {
        "ring-type branches bifurcate (and stripes are subcritical)"
    } else {
        "no ring-type branch bifurcates"
    };
    let _ = writeln!(s, "predictors:");
    let _ = writeln!(s, "  P1={:.3}  ({dir})", p.p1);
    let _ = writeln!(s, "  P2={:.3}  ({phase})", p.p2);
    let _ = writeln!(s, "  P3={:.3}  ({polarity})", p.p3);
    let _ = writeln!(s, "  P4={:.3}  ({rings})", p.p4);
    s
}

/// CSV of the dispersion curve (k, max Re omega) on (0, 3 k*].
pub fn dispersion_csv(model: &ModelSpec, a: &Analysis, points: usize) -> Result<String> {
    let mut out = String::from("k,re_omega_max\n");
    for i in 1..=points {
        let k = 3.0 * a.tp.k * i as f64 / points as f64;
        let rate = turing::max_growth_rate(model, &a.tp.state, k)?;
        let _ = writeln!(out, "{k},{rate}");
    }
    Ok(out)
}

/// CSV of steady states at fixed mu.
pub fn steady_csv(states: &[equilibria::SteadyState]) -> String {
    let mut out = String::from("u,v,mu,residual\n");
    for s in states {
        let _ = writeln!(out, "{},{},{},{}", s.u, s.v, s.mu, s.residual);
    }
    out
}

/// CSV of matching solutions: coefficients, residual, certificate.
pub fn matching_csv(solutions: &[MatchingSolution]) -> String {
    let mut out = String::new();
    let n = solutions.first().map(|s| s.coeffs.len()).unwrap_or(0);
    let header: Vec<String> = (0..n)
        .map(|i| format!("c{i}"))
        .chain(["residual".to_string(), "jac_min_sv".to_string()])
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for s in solutions {
        let row: Vec<String> = s
            .coeffs
            .iter()
            .map(|c| format!("{c}"))
            .chain([format!("{}", s.residual), format!("{}", s.jac_min_sv)])
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// CSV of a P4 sign map: param1, param2, class.
pub fn sign_map_csv(map: &localform::SignMap, name1: &str, name2: &str) -> String {
    let mut out = format!("{name1},{name2},class\n");
    for (i, p1) in map.param1.iter().enumerate() {
        for (j, p2) in map.param2.iter().enumerate() {
            let _ = writeln!(out, "{p1},{p2},{}", map.cells[i][j].label());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Simulation runs with manifests
// ---------------------------------------------------------------------------

/// Everything needed to reproduce one simulation run.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub preset: String,
    pub pattern: String,
    pub n_grid: usize,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub eps_sign: f64,
    pub amplitude: f64,
    pub seed: u64,
}

impl RunPlan {
    pub fn from_preset(preset_name: &str, pattern: &str) -> Result<RunPlan> {
        let p = preset(preset_name)?;
        pattern_seed(pattern)?;
        Ok(RunPlan {
            preset: preset_name.to_string(),
            pattern: pattern.to_string(),
            n_grid: DEFAULT_NGRID,
            dt: DEFAULT_DT,
            t_end: *p.snapshot_times.last().unwrap(),
            snapshot_times: p.snapshot_times.to_vec(),
            eps_sign: 0.0, // resolved against P1 at run time
            amplitude: p.amplitude,
            seed: DEFAULT_SEED,
        })
    }

    /// Parse "preset:pattern" (e.g. "kgs:hexagon").
    pub fn from_spec_string(spec: &str) -> Result<RunPlan> {
        let (p, pat) = spec.split_once(':').ok_or_else(|| {
            Error::Invalid(format!("expected preset:pattern, got `{spec}`"))
        })?;
        RunPlan::from_preset(p, pat)
    }
}

/// Outputs of a prepared run, before time stepping.
pub struct PreparedRun {
    pub model: ModelSpec,
    pub analysis: Analysis,
    pub matching: MatchingSolution,
    pub eps: f64,
    pub init: Field2D,
    pub cfg: SimConfig,
    pub plan: RunPlan,
}

/// Resolve a plan into a concrete initial field and configuration.
pub fn prepare_run(plan: &RunPlan) -> Result<PreparedRun> {
    let p = preset(&plan.preset)?;
    let model = ModelSpec::builtin(p.model, &BTreeMap::new())?;
    let analysis = analyze_model(&model, p.mu_guess, p.state_guess)?;
    let (m, n_trunc, seed_coeffs) = pattern_seed(&plan.pattern)?;
    let matching = matching::solve_spot_a(m, n_trunc, &seed_coeffs)?;

    let base_eps = PatternSpec::default_eps(analysis.predictors.p1, analysis.tp.k);
    let eps = if plan.eps_sign == 0.0 {
        base_eps
    } else {
        base_eps.abs() * plan.eps_sign
    };
    let spec = PatternSpec::new(matching.clone(), eps, plan.amplitude)?;
    let len = 20.0 * analysis.tp.wavelength();
    let init = profile::spot_a_field(&analysis.tp, &analysis.predictors, &spec, plan.n_grid, len)?;
    let cfg = SimConfig::new(
        plan.dt,
        plan.t_end,
        plan.snapshot_times.clone(),
        analysis.tp.mu() + eps,
    )?;
    Ok(PreparedRun {
        model,
        analysis,
        matching,
        eps,
        init,
        cfg,
        plan: plan.clone(),
    })
}

fn time_tag(t: f64) -> String {
    if t.fract() == 0.0 {
        format!("{}", t as i64)
    } else {
        format!("{t}")
    }
}

/// Render the manifest for a prepared run; parseable by `parse_manifest`.
pub fn manifest(run: &PreparedRun) -> String {
    let a = &run.analysis;
    let mut s = String::new();
    let _ = writeln!(s, "# dihedra run manifest");
    let _ = writeln!(s, "preset = {}", run.plan.preset);
    let _ = writeln!(s, "pattern = {}", run.plan.pattern);
    let _ = writeln!(s, "model = {}", run.model.name);
    for (k, v) in &run.model.params {
        let _ = writeln!(s, "param_{k} = {v}");
    }
    let _ = writeln!(s, "d_v = {}", run.model.d_v);
    let _ = writeln!(s, "beta = {}", run.model.beta);
    let _ = writeln!(s, "mu_star = {}", a.tp.mu());
    let _ = writeln!(s, "u_star = {}", a.tp.state.u);
    let _ = writeln!(s, "v_star = {}", a.tp.state.v);
    let _ = writeln!(s, "k = {}", a.tp.k);
    let _ = writeln!(s, "P1 = {}", a.predictors.p1);
    let _ = writeln!(s, "P2 = {}", a.predictors.p2);
    let _ = writeln!(s, "P3 = {}", a.predictors.p3);
    let _ = writeln!(s, "P4 = {}", a.predictors.p4);
    let _ = writeln!(s, "matching_m = {}", run.matching.symmetry);
    let _ = writeln!(s, "matching_n = {}", run.matching.truncation);
    let coeffs: Vec<String> = run.matching.coeffs.iter().map(|c| format!("{c}")).collect();
    let _ = writeln!(s, "matching_coeffs = {}", coeffs.join(","));
    let _ = writeln!(s, "eps = {}", run.eps);
    let _ = writeln!(s, "eps_sign = {}", run.eps.signum());
    let _ = writeln!(s, "amplitude = {}", run.plan.amplitude);
    let _ = writeln!(s, "n_grid = {}", run.plan.n_grid);
    let _ = writeln!(s, "domain_length = {}", run.init.len);
    let _ = writeln!(s, "dt = {}", run.plan.dt);
    let _ = writeln!(s, "t_end = {}", run.plan.t_end);
    let times: Vec<String> = run
        .plan
        .snapshot_times
        .iter()
        .map(|t| format!("{t}"))
        .collect();
    let _ = writeln!(s, "snapshot_times = {}", times.join(","));
    let _ = writeln!(s, "seed = {}", run.plan.seed);
    s
}

/// Rebuild a run plan from a manifest.
pub fn parse_manifest(text: &str) -> Result<RunPlan> {
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            fields.insert(k.trim(), v.trim());
        }
    }
    let get = |k: &str| -> Result<&str> {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::Invalid(format!("manifest missing `{k}`")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Invalid(format!("manifest field `{k}` is not a number")))
    };
    Ok(RunPlan {
        preset: get("preset")?.to_string(),
        pattern: get("pattern")?.to_string(),
        n_grid: num("n_grid")? as usize,
        dt: num("dt")?,
        t_end: num("t_end")?,
        snapshot_times: get("snapshot_times")?
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Invalid("bad snapshot_times in manifest".into()))?,
        eps_sign: num("eps_sign")?,
        amplitude: num("amplitude")?,
        seed: num("seed")? as u64,
    })
}

/// Execute a prepared run, writing `u_t<t>.{csv,pgm}` and `v_t<t>.{csv,pgm}`
/// snapshots plus `manifest.txt` into `out_dir`.
pub fn execute_run(run: &PreparedRun, out_dir: &Path) -> Result<Field2D> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("manifest.txt"), manifest(run))?;
    let out_dir: PathBuf = out_dir.to_path_buf();
    let final_field = sim::run(&run.model, &run.init, &run.cfg, &mut |t, field| {
        let tag = time_tag(t);
        for s in [Species::U, Species::V] {
            field.write_csv(s, &out_dir.join(format!("{}_t{}.csv", s.name(), tag)))?;
            field.write_pgm(s, &out_dir.join(format!("{}_t{}.pgm", s.name(), tag)))?;
        }
        Ok(())
    })?;
    Ok(final_field)
}

/// Oracle comparison report for the closed-form model.
pub fn oracle_report(m: f64, delta_v: f64) -> Result<String> {
    let report = crate::kgs_oracle::oracle_compare(m, delta_v)?;
    let mut s = String::new();
    let _ = writeln!(s, "closed-form oracle comparison at m={m}, delta_v={delta_v}");
    let _ = writeln!(s, "{:<10} {:>22} {:>22} {:>12}", "quantity", "closed form", "pipeline", "rel dev");
    for d in &report.deviations {
        let _ = writeln!(
            s,
            "{:<10} {:>22.15e} {:>22.15e} {:>12.3e}",
            d.name, d.closed, d.pipeline, d.relative
        );
    }
    let _ = writeln!(
        s,
        "max relative deviation: {:.3e} ({})",
        report.max_relative(),
        if report.pass() { "PASS" } else { "FAIL" }
    );
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kgs_report_contains_values_and_interpretation() {
        let model = load_model("kgs", &BTreeMap::new()).unwrap();
        let a = analyze_model(&model, 1.0, (1.0, 0.5)).unwrap();
        let report = analysis_report(&model, &a);
        assert!(report.contains("P1=6.923"), "{report}");
        assert!(report.contains("anti-phase"), "{report}");
        assert!(report.contains("gaps"), "{report}");
    }

    #[test]
    fn vh1_report_is_in_phase_peaks() {
        let model = load_model("von_hardenberg", &BTreeMap::new()).unwrap();
        let a = analyze_model(&model, 0.17, (0.02, 0.17)).unwrap();
        let report = analysis_report(&model, &a);
        assert!(report.contains("in-phase"), "{report}");
        assert!(report.contains("peaks"), "{report}");
    }

    #[test]
    fn unknown_model_is_an_error() {
        assert!(load_model("nosuch", &BTreeMap::new()).is_err());
    }

    #[test]
    fn eps_sign_against_p1_is_rejected() {
        let mut plan = RunPlan::from_spec_string("kgs:hexagon").unwrap();
        plan.n_grid = 64;
        plan.eps_sign = -1.0; // P1 > 0 for this preset
        match prepare_run(&plan) {
            Err(Error::PatternSpec(msg)) => assert!(msg.contains("P1 eps")),
            other => panic!("expected pattern-spec rejection, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn manifest_round_trip_reproduces_runs() {
        let mut plan = RunPlan::from_spec_string("kgs:hexagon").unwrap();
        plan.n_grid = 64;
        plan.dt = 0.5;
        plan.t_end = 1.0;
        plan.snapshot_times = vec![1.0];
        let run1 = prepare_run(&plan).unwrap();
        let text = manifest(&run1);
        let plan2 = parse_manifest(&text).unwrap();
        let run2 = prepare_run(&plan2).unwrap();
        assert_eq!(manifest(&run2), text);

        let dir1 = std::env::temp_dir().join("dihedra_run_a");
        let dir2 = std::env::temp_dir().join("dihedra_run_b");
        execute_run(&run1, &dir1).unwrap();
        execute_run(&run2, &dir2).unwrap();
        let a = std::fs::read(dir1.join("u_t1.csv")).unwrap();
        let b = std::fs::read(dir2.join("u_t1.csv")).unwrap();
        assert_eq!(a, b, "runs from the same manifest must be byte-identical");
    }

    #[test]
    fn pattern_and_preset_lookup() {
        assert!(preset("kgs").is_ok());
        assert!(preset("vh1").is_ok());
        assert!(preset("nope").is_err());
        assert!(pattern_seed("hexagon").is_ok());
        assert!(pattern_seed("heptagon").is_err());
    }
}
