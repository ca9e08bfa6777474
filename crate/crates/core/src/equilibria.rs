//! Uniform steady states f(u,v;mu) = g(u,v;mu) = 0 and continuation in mu.

use crate::error::{Error, Result};
use crate::linalg::solve2;
use crate::model::ModelSpec;

/// Newton convergence target; the stored residual is usually at machine
/// level, the acceptance bound on returned states is RESIDUAL_BOUND.
const NEWTON_TOL: f64 = 1e-15;
/// Hard bound every returned state must satisfy.
pub const RESIDUAL_BOUND: f64 = 1e-10;
const MAX_ITERS: usize = 50;
const MAX_DAMPINGS: usize = 12;
/// Two states closer than this (euclidean in (u,v)) are the same root.
pub const DISTINCT_TOL: f64 = 1e-6;

/// A converged uniform steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub u: f64,
    pub v: f64,
    pub mu: f64,
    /// max(|f|, |g|) at the point.
    pub residual: f64,
}

/// Outcome of a multi-seed search.
#[derive(Debug, Clone)]
pub struct SteadyFind {
    pub states: Vec<SteadyState>,
    /// Seeds that failed to converge (skipped, not fatal).
    pub failed_seeds: usize,
}

/// Damped Newton from a single seed at fixed mu.
pub fn newton_steady(model: &ModelSpec, mu: f64, u0: f64, v0: f64) -> Result<SteadyState> {
    let mut u = u0;
    let mut v = v0;
    let (mut fu, mut gv) = model.reaction(u, v, mu).map_err(to_noconv)?;
    let mut res = fu.abs().max(gv.abs());
    let res0 = res;
    for iter in 0..MAX_ITERS {
        if res < NEWTON_TOL {
            break;
        }
        if !res.is_finite() || res > 1e10 * res0.max(1.0) {
            return Err(Error::NoConvergence {
                what: "steady-state Newton (diverged)".into(),
                iters: iter,
                residual: res,
            });
        }
        let jac = model.jacobian(u, v, mu).map_err(to_noconv)?;
        let step = match solve2(&jac, &[-fu, -gv]) {
            Ok(s) => s,
            // Singular Jacobian at a fold: accept the point if already
            // converged, otherwise report a (retryable) stall.
            Err(_) if res < RESIDUAL_BOUND => break,
            Err(_) => {
                return Err(Error::NoConvergence {
                    what: "steady-state Newton (singular Jacobian)".into(),
                    iters: iter,
                    residual: res,
                })
            }
        };
        // Halve the step until the residual decreases.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_DAMPINGS {
            let (ut, vt) = (u + lambda * step[0], v + lambda * step[1]);
            match model.reaction(ut, vt, mu) {
                Ok((ft, gt)) => {
                    let rt = ft.abs().max(gt.abs());
                    if rt < res || rt < NEWTON_TOL {
                        u = ut;
                        v = vt;
                        fu = ft;
                        gv = gt;
                        res = rt;
                        accepted = true;
                        break;
                    }
                }
                Err(_) => {}
            }
            lambda *= 0.5;
        }
        if !accepted {
            // Stalled at the floor of what the arithmetic resolves; the
            // residual bound below decides whether that is good enough.
            break;
        }
    }
    if res >= RESIDUAL_BOUND || !u.is_finite() || !v.is_finite() {
        return Err(Error::NoConvergence {
            what: "steady-state Newton".into(),
            iters: MAX_ITERS,
            residual: res,
        });
    }
    Ok(SteadyState {
        u,
        v,
        mu,
        residual: res,
    })
}

/// Coarse seed lattice over [0, u_max] x [0, v_max].
pub fn lattice_seeds(u_max: f64, v_max: f64, per_axis: usize) -> Vec<(f64, f64)> {
    let n = per_axis.max(2);
    let mut seeds = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            seeds.push((
                u_max * i as f64 / (n - 1) as f64,
                v_max * j as f64 / (n - 1) as f64,
            ));
        }
    }
    seeds
}

/// Converge every seed, deduplicate, optionally reject negative states
/// (vegetation and water densities are nonnegative).
pub fn find_steady_states(
    model: &ModelSpec,
    mu: f64,
    seeds: &[(f64, f64)],
    allow_negative: bool,
) -> Result<SteadyFind> {
    if seeds.is_empty() {
        return Err(Error::Invalid("at least one seed is required".into()));
    }
    if !mu.is_finite() {
        return Err(Error::Invalid(format!("mu must be finite, got {mu}")));
    }
    let mut states: Vec<SteadyState> = Vec::new();
    let mut failed = 0usize;
    for &(u0, v0) in seeds {
        match newton_steady(model, mu, u0, v0) {
            Ok(s) => {
                if !allow_negative && (s.u < -1e-9 || s.v < -1e-9) {
                    continue;
                }
                let duplicate = states
                    .iter()
                    .any(|t| ((t.u - s.u).powi(2) + (t.v - s.v).powi(2)).sqrt() <= DISTINCT_TOL);
                if !duplicate {
                    states.push(s);
                }
            }
            Err(_) => failed += 1,
        }
    }
    states.sort_by(|a, b| a.u.total_cmp(&b.u).then(a.v.total_cmp(&b.v)));
    Ok(SteadyFind {
        states,
        failed_seeds: failed,
    })
}

/// One Newton step to `mu_new` seeded from `from`, with a jump guard that
/// rejects convergence onto a different branch. No substepping: cheap
/// failure for walkers that manage their own steps.
///
/// States whose Jacobian is numerically singular (fold points, where two
/// branches meet and continuation is ambiguous) are also rejected; walkers
/// respond by shrinking their step, which approaches the fold from one side
/// instead of landing on it.
pub fn branch_probe(model: &ModelSpec, from: &SteadyState, mu_new: f64) -> Result<SteadyState> {
    // Tangent predictor from implicit differentiation, clamped: near a fold
    // the branch has square-root growth and the linear extrapolation would
    // overshoot, but even the clamped step lands the seed decisively on the
    // `from` side of the fold midline, which fixes which branch Newton
    // converges to.
    let (mut seed_u, mut seed_v) = (from.u, from.v);
    let mut tangent_norm = None;
    if let Ok(jac) = model.jacobian(from.u, from.v, from.mu) {
        let f_mu = model.partial(crate::model::Component::F, 0, 0, 1, from.u, from.v, from.mu);
        let g_mu = model.partial(crate::model::Component::G, 0, 0, 1, from.u, from.v, from.mu);
        if let (Ok(f_mu), Ok(g_mu)) = (f_mu, g_mu) {
            if let Ok(tangent) = solve2(&jac, &[-f_mu, -g_mu]) {
                let dmu = mu_new - from.mu;
                let (du, dv) = (tangent[0] * dmu, tangent[1] * dmu);
                let cap = 0.2 * (1.0 + from.u.hypot(from.v));
                let norm = du.hypot(dv);
                let shrink = if norm > cap { cap / norm } else { 1.0 };
                seed_u += du * shrink;
                seed_v += dv * shrink;
                tangent_norm = Some(tangent[0].hypot(tangent[1]));
            }
        }
    }
    let s = newton_steady(model, mu_new, seed_u, seed_v)?;
    // True branch states converge to the arithmetic floor; a Newton run
    // that stalls above it has found a ghost minimum (e.g. just past a
    // fold, where the annihilated root pair leaves a shallow residual
    // basin that the general RESIDUAL_BOUND would admit).
    if s.residual > 1e-13 {
        return Err(Error::NoConvergence {
            what: "branch probe (residual floor)".into(),
            iters: 0,
            residual: s.residual,
        });
    }
    // Jump guard: the accepted motion must be commensurate with the step.
    // The tangent bound tightens it for small steps, which is what rejects
    // hops onto a nearby twin branch or onto a distant branch past a fold
    // (square-root growth toward a fold stays within a few tangent lengths
    // for the fractional steps the walkers take).
    let jump = ((s.u - from.u).powi(2) + (s.v - from.v).powi(2)).sqrt();
    let coarse = 0.5 * (1.0 + from.u.hypot(from.v));
    let allowed = match tangent_norm {
        Some(t) => coarse.min(4.0 * t * (mu_new - from.mu).abs() + 1e-9 * coarse),
        None => coarse,
    };
    if jump > allowed {
        return Err(Error::NoConvergence {
            what: "branch probe (jump guard)".into(),
            iters: 0,
            residual: jump,
        });
    }
    let jac = model.jacobian(s.u, s.v, s.mu)?;
    let scale: f64 = jac.iter().flatten().map(|x| x.abs()).sum();
    if crate::linalg::mat2_det(&jac).abs() <= 1e-10 * scale * scale {
        return Err(Error::NoConvergence {
            what: "branch probe (fold point)".into(),
            iters: 0,
            residual: s.residual,
        });
    }
    Ok(s)
}

/// Follow the branch through `from` to a new mu, substepping as needed.
///
/// A fold shows up as Newton failure that persists under substep halving;
/// that is reported as a branch end.
pub fn continue_branch(model: &ModelSpec, from: &SteadyState, mu_new: f64) -> Result<SteadyState> {
    if !mu_new.is_finite() {
        return Err(Error::Invalid(format!("mu must be finite, got {mu_new}")));
    }
    if mu_new == from.mu {
        return Ok(*from);
    }
    let mut current = *from;
    let min_step = 1e-12 * mu_new.abs().max(from.mu.abs()).max(1.0);
    let mut step = mu_new - current.mu;
    loop {
        if (mu_new - current.mu).abs() == 0.0 {
            return Ok(current);
        }
        if step.abs() > (mu_new - current.mu).abs() {
            step = mu_new - current.mu;
        }
        let target = current.mu + step;
        match branch_probe(model, &current, target) {
            Ok(s) => {
                current = s;
                step *= 1.7;
            }
            Err(_) => {
                step *= 0.5;
                if step.abs() < min_step {
                    return Err(Error::BranchEnd {
                        mu: current.mu,
                        msg: format!("continuation stalled heading for mu = {mu_new}"),
                    });
                }
            }
        }
    }
}

fn to_noconv(e: Error) -> Error {
    Error::NoConvergence {
        what: format!("steady-state evaluation ({e})"),
        iters: 0,
        residual: f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn kgs() -> ModelSpec {
        ModelSpec::builtin("kgs", &BTreeMap::new()).unwrap()
    }

    /// Closed-form nontrivial KGS branches u_pm = mu/2m +- sqrt((mu/2m)^2-1),
    /// v = m/u, written independently of the solver.
    fn kgs_branch(mu: f64, m: f64, upper: bool) -> (f64, f64) {
        let r = mu / (2.0 * m);
        let s = (r * r - 1.0).sqrt();
        let u = if upper { r + s } else { r - s };
        (u, m / u)
    }

    #[test]
    fn kgs_states_at_fold_mu() {
        // At mu = 2m the two nontrivial branches meet at (1, m).
        let model = kgs();
        let found =
            find_steady_states(&model, 1.0, &lattice_seeds(10.0, 10.0, 12), false).unwrap();
        let has = |u: f64, v: f64| {
            found
                .states
                .iter()
                .any(|s| (s.u - u).abs() < 1e-5 && (s.v - v).abs() < 1e-5)
        };
        assert!(has(0.0, 1.0), "trivial state missing: {:?}", found.states);
        assert!(has(1.0, 0.5), "double root missing: {:?}", found.states);
        for s in &found.states {
            assert!(s.residual < RESIDUAL_BOUND);
        }
    }

    #[test]
    fn kgs_states_near_turing_mu() {
        let model = kgs();
        let found =
            find_steady_states(&model, 1.002, &lattice_seeds(10.0, 10.0, 12), false).unwrap();
        let (u_want, v_want) = kgs_branch(1.002, 0.5, true);
        assert!(
            found
                .states
                .iter()
                .any(|s| (s.u - u_want).abs() < 1e-9 && (s.v - v_want).abs() < 1e-9),
            "upper branch missing: {:?}",
            found.states
        );
        // The published 3-dp Turing point rounds to this neighbourhood.
        assert!(found
            .states
            .iter()
            .any(|s| (s.u - 1.071).abs() < 1e-2 && (s.v - 0.467).abs() < 1e-2));
    }

    #[test]
    fn logistic_states_near_turing_mu() {
        let model = ModelSpec::builtin("logistic_klausmeier", &BTreeMap::new()).unwrap();
        let found =
            find_steady_states(&model, 2.200, &lattice_seeds(10.0, 10.0, 12), false).unwrap();
        assert!(
            found
                .states
                .iter()
                .any(|s| (s.u - 0.465).abs() < 5e-3 && (s.v - 1.809).abs() < 5e-3),
            "expected state near (0.465, 1.809): {:?}",
            found.states
        );
    }

    #[test]
    fn continuation_tracks_closed_form_branch() {
        let model = kgs();
        let start = newton_steady(&model, 1.002, 1.07, 0.47).unwrap();
        let moved = continue_branch(&model, &start, 1.01).unwrap();
        let (u_want, v_want) = kgs_branch(1.01, 0.5, true);
        assert!((moved.u - u_want).abs() < 1e-9);
        assert!((moved.v - v_want).abs() < 1e-9);
        assert!(moved.u > start.u, "u increases along the upper branch");
    }

    #[test]
    fn continuation_identity() {
        let model = kgs();
        let s = newton_steady(&model, 1.01, 1.1, 0.45).unwrap();
        let same = continue_branch(&model, &s, s.mu).unwrap();
        assert_eq!(s, same);
    }

    #[test]
    fn continuation_hits_fold() {
        // The nontrivial KGS branch only exists for mu >= 2m = 1; pushing
        // below must end with a branch-end error.
        let model = kgs();
        let s = newton_steady(&model, 1.05, 1.3, 0.4).unwrap();
        match continue_branch(&model, &s, 0.9) {
            Err(Error::BranchEnd { mu, .. }) => assert!(mu >= 1.0 - 1e-3),
            other => panic!("expected branch end, got {other:?}"),
        }
    }

    #[test]
    fn branch_matches_closed_form_over_grid() {
        let model = kgs();
        let mut state = newton_steady(&model, 1.01, 1.15, 0.43).unwrap();
        let mut mu = 1.01;
        while mu < 2.0 {
            mu += 0.05;
            state = continue_branch(&model, &state, mu).unwrap();
            let (u_want, v_want) = kgs_branch(mu, 0.5, true);
            assert!((state.u - u_want).abs() < 1e-9, "mu={mu}");
            assert!((state.v - v_want).abs() < 1e-9, "mu={mu}");
        }
    }
}
