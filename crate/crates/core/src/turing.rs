//! Turing instability location.
//!
//! A Turing point is a parameter value mu* at which the quadratic
//! sigma(lambda; mu) = det(lambda I - M(mu)), evaluated along a continued
//! steady branch, has a repeated negative real root -k^2. On one side of
//! mu* sigma has two distinct negative roots, on the other no real roots;
//! `eps_side` records the no-real-roots side, probed numerically so the
//! P1 cross-check stays independent.

use num_complex::Complex64;

use crate::equilibria::{self, SteadyState};
use crate::error::{Error, Result};
use crate::linalg::{mat2_det, mat2_trace};
use crate::model::ModelSpec;

/// Relative step used to probe which side of mu* has no real roots.
pub const EPS_SIDE_PROBE: f64 = 1e-4;
/// |discriminant| bound at a converged Turing point.
pub const DISCRIMINANT_BOUND: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct TuringPoint {
    pub state: SteadyState,
    /// Critical wave number, k^2 = -(f_u + g_v)/2 > 0.
    pub k: f64,
    /// Repeated-root condition 4 f_v g_u + (f_u - g_v)^2 at mu*.
    pub discriminant_residual: f64,
    /// Sign s such that sigma(.; mu* + s d) has no real roots for small d > 0.
    pub eps_side: f64,
}

impl TuringPoint {
    pub fn mu(&self) -> f64 {
        self.state.mu
    }

    /// Pattern wavelength 2 pi / k.
    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.k
    }
}

/// sigma(lambda; mu) = (lambda - f_u)(lambda - g_v) - f_v g_u at a steady state.
pub fn sigma(model: &ModelSpec, state: &SteadyState, lambda: f64) -> Result<f64> {
    let m = model.jacobian(state.u, state.v, state.mu)?;
    Ok((lambda - m[0][0]) * (lambda - m[1][1]) - m[0][1] * m[1][0])
}

/// Repeated-root condition: discriminant of sigma as a quadratic in lambda.
pub fn discriminant(model: &ModelSpec, state: &SteadyState) -> Result<f64> {
    let m = model.jacobian(state.u, state.v, state.mu)?;
    Ok(4.0 * m[0][1] * m[1][0] + (m[0][0] - m[1][1]).powi(2))
}

/// Classification of the real roots of sigma at a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootKind {
    NoRealRoots,
    TwoDistinctNegative,
    Other,
}

pub fn classify_roots(model: &ModelSpec, state: &SteadyState) -> Result<RootKind> {
    let m = model.jacobian(state.u, state.v, state.mu)?;
    let disc = 4.0 * m[0][1] * m[1][0] + (m[0][0] - m[1][1]).powi(2);
    let tr = mat2_trace(&m);
    let det = mat2_det(&m);
    let scale = (tr * tr).max(det.abs()).max(1e-30);
    if disc < -1e-12 * scale {
        return Ok(RootKind::NoRealRoots);
    }
    if disc > 1e-12 * scale && tr < 0.0 && det > 0.0 {
        return Ok(RootKind::TwoDistinctNegative);
    }
    Ok(RootKind::Other)
}

const FIRST_STEP: f64 = 0.001;
const STEP_GROWTH: f64 = 1.6;
const RANGE_CAP: f64 = 20.0;

/// Find the Turing point nearest `mu_guess` on the branch through
/// `state_guess`.
///
/// The search is a 1-D root find in mu of the repeated-root condition along
/// a continued steady branch: probes expand geometrically from the guess in
/// both directions and clamp at branch ends (folds). A guess that lands on
/// a fold is ambiguous about which branch to follow, so the first probe in
/// each direction converges a small seed cloud and every distinct candidate
/// branch is walked.
pub fn find_turing_point(
    model: &ModelSpec,
    mu_guess: f64,
    state_guess: (f64, f64),
) -> Result<TuringPoint> {
    // Guesses that straddle a basin boundary can stall Newton; fall back to
    // a perturbed seed cloud and take the converged state nearest the guess.
    let base = match equilibria::newton_steady(model, mu_guess, state_guess.0, state_guess.1) {
        Ok(s) => s,
        Err(e) => {
            let fake = SteadyState {
                u: state_guess.0,
                v: state_guess.1,
                mu: mu_guess,
                residual: f64::INFINITY,
            };
            probe_states(model, &fake, mu_guess)
                .into_iter()
                .next()
                .ok_or(e)?
        }
    };
    let d_base = discriminant(model, &base)?;
    let scale = mu_guess.abs().max(1.0);

    let mut best: Option<TuringPoint> = None;
    let mut rejection: Option<Error> = None;
    for dir in [1.0, -1.0] {
        if let Some(tp) = walk_direction(model, &base, d_base, dir, scale, &mut rejection)? {
            let better = best
                .map(|b| (tp.mu() - mu_guess).abs() < (b.mu() - mu_guess).abs())
                .unwrap_or(true);
            if better {
                best = Some(tp);
            }
        }
    }
    best.ok_or_else(|| {
        rejection.unwrap_or(Error::NoSignChange {
            what: "repeated-root condition".into(),
            lo: mu_guess - RANGE_CAP * scale,
            hi: mu_guess + RANGE_CAP * scale,
        })
    })
}

fn walk_direction(
    model: &ModelSpec,
    base: &SteadyState,
    d_base: f64,
    dir: f64,
    scale: f64,
    rejection: &mut Option<Error>,
) -> Result<Option<TuringPoint>> {
    let mu_first = base.mu + dir * FIRST_STEP * scale;
    for candidate in probe_states(model, base, mu_first) {
        if let Some(tp) = walk_branch(model, base, d_base, candidate, dir, scale, rejection)? {
            return Ok(Some(tp));
        }
    }
    Ok(None)
}

/// Distinct steady states at `mu` reachable from a seed cloud around `from`.
/// Away from folds this is a single state; at a fold both branches appear.
fn probe_states(model: &ModelSpec, from: &SteadyState, mu: f64) -> Vec<SteadyState> {
    let ru = 0.04 * (1.0 + from.u.abs());
    let rv = 0.04 * (1.0 + from.v.abs());
    let seeds = [
        (from.u, from.v),
        (from.u + ru, from.v),
        (from.u - ru, from.v),
        (from.u, from.v + rv),
        (from.u, from.v - rv),
        (from.u + ru, from.v - rv),
        (from.u - ru, from.v + rv),
    ];
    let mut found: Vec<SteadyState> = Vec::new();
    for (u0, v0) in seeds {
        if let Ok(s) = equilibria::newton_steady(model, mu, u0, v0) {
            let distinct = found.iter().all(|t| {
                ((t.u - s.u).powi(2) + (t.v - s.v).powi(2)).sqrt() > equilibria::DISTINCT_TOL
            });
            if distinct {
                found.push(s);
            }
        }
    }
    found.sort_by(|a, b| {
        let da = (a.u - from.u).hypot(a.v - from.v);
        let db = (b.u - from.u).hypot(b.v - from.v);
        da.total_cmp(&db)
    });
    found.truncate(4);
    found
}

fn walk_branch(
    model: &ModelSpec,
    base: &SteadyState,
    d_base: f64,
    first: SteadyState,
    dir: f64,
    scale: f64,
    rejection: &mut Option<Error>,
) -> Result<Option<TuringPoint>> {
    let mut prev = first;
    let mut d_prev = discriminant(model, &prev)?;
    // Crossing already between the guess and the first probe? Only
    // meaningful when the probe continues the branch through the guess
    // (a distant candidate from the seed cloud lives on another branch).
    let near_base = (prev.u - base.u).hypot(prev.v - base.v) <= 0.5 * (1.0 + base.u.hypot(base.v));
    if near_base && (d_prev == 0.0 || d_prev.signum() != d_base.signum()) {
        match turing_from_bracket(model, base, d_base, &prev, d_prev) {
            Ok(tp) => return Ok(Some(tp)),
            Err(e) => rejection.get_or_insert(e),
        };
    }
    let mut step = FIRST_STEP * scale * STEP_GROWTH;
    let mut travelled = 0.0;
    while travelled < RANGE_CAP * scale && step > 1e-13 * scale {
        let mu_next = prev.mu + dir * step;
        let next = match equilibria::branch_probe(model, &prev, mu_next) {
            Ok(s) => s,
            Err(_) => {
                // Branch end ahead: approach it geometrically, a Turing
                // point may sit arbitrarily close to the fold.
                step *= 0.5;
                continue;
            }
        };
        let d_next = discriminant(model, &next)?;
        if d_next == 0.0 || d_next.signum() != d_prev.signum() {
            match turing_from_bracket(model, &prev, d_prev, &next, d_next) {
                Ok(tp) => return Ok(Some(tp)),
                Err(e) => {
                    // Keep walking: the first crossing may be a rejected
                    // (e.g. Belyakov-Devaney) point with a valid one beyond.
                    rejection.get_or_insert(e);
                }
            }
        }
        travelled += (next.mu - prev.mu).abs();
        prev = next;
        d_prev = d_next;
        step = (step * STEP_GROWTH).min(2.0 * scale);
    }
    Ok(None)
}

/// Polish a Turing point from a discriminant sign change between two states
/// on the same branch, then validate it.
///
/// Bisection with branch tracking: every midpoint is converged from the
/// nearest resolved endpoint, so the continuation hop halves with the
/// interval. This stays on-branch even when one endpoint sits within
/// rounding distance of a fold (where free-ranging interpolation steps
/// would hop between branches). The mu-slope of the discriminant grows like
/// 1/sqrt(distance-to-fold), so the root is polished to the floor of f64
/// resolution for the residual bound to hold at near-fold Turing points.
pub fn turing_from_bracket(
    model: &ModelSpec,
    s_lo: &SteadyState,
    d_lo: f64,
    s_hi: &SteadyState,
    d_hi: f64,
) -> Result<TuringPoint> {
    if d_lo != 0.0 && d_hi != 0.0 && d_lo.signum() == d_hi.signum() {
        return Err(Error::NoSignChange {
            what: "repeated-root condition".into(),
            lo: s_lo.mu,
            hi: s_hi.mu,
        });
    }
    let mu_tol = 4.0 * f64::EPSILON * s_hi.mu.abs().max(s_lo.mu.abs()).max(1.0);
    let (mut lo, mut d_low) = (*s_lo, d_lo);
    let (mut hi, mut d_high) = (*s_hi, d_hi);
    for _ in 0..120 {
        if (hi.mu - lo.mu).abs() <= mu_tol {
            break;
        }
        // Probe the midpoint; on ambiguity (fold-adjacent Newton failure)
        // retry at nearby fractions before giving up.
        let mut placed = false;
        for frac in [0.5, 0.375, 0.625, 0.25, 0.75] {
            let mu_mid = lo.mu + frac * (hi.mu - lo.mu);
            let from = if (mu_mid - lo.mu).abs() < (mu_mid - hi.mu).abs() {
                &lo
            } else {
                &hi
            };
            if let Ok(mid) = equilibria::branch_probe(model, from, mu_mid) {
                let d_mid = discriminant(model, &mid)?;
                if d_mid == 0.0 {
                    return validate_turing(model, &mid);
                }
                if d_mid.signum() == d_low.signum() {
                    lo = mid;
                    d_low = d_mid;
                } else {
                    hi = mid;
                    d_high = d_mid;
                }
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::BranchEnd {
                mu: 0.5 * (lo.mu + hi.mu),
                msg: "bracket bisection lost the branch".into(),
            });
        }
    }
    let _ = (d_low, d_high);
    let state = if lo.residual <= hi.residual { lo } else { hi };
    validate_turing(model, &state)
}

fn validate_turing(model: &ModelSpec, state: &SteadyState) -> Result<TuringPoint> {
    let m = model.jacobian(state.u, state.v, state.mu)?;
    let disc = 4.0 * m[0][1] * m[1][0] + (m[0][0] - m[1][1]).powi(2);
    let k_sq = -mat2_trace(&m) / 2.0;
    let scale = mat2_trace(&m).powi(2).max(1e-30);
    if disc.abs() > DISCRIMINANT_BOUND.max(1e-9 * scale) {
        return Err(Error::NotTuringPoint {
            mu: state.mu,
            reason: format!("repeated-root residual {disc:.3e} too large"),
        });
    }
    if k_sq < 1e-12 {
        if k_sq < 0.0 {
            // Repeated positive root.
            return Err(Error::BelyakovDevaney {
                mu: state.mu,
                lambda: -k_sq,
            });
        }
        return Err(Error::NotTuringPoint {
            mu: state.mu,
            reason: format!("k^2 = {k_sq:.3e} is not positive"),
        });
    }

    // Probe both sides: the Turing structure is two distinct negative roots
    // on one side, no real roots on the other. The probe distance shrinks
    // if a branch end (fold) sits closer to mu* than the default step.
    let mut delta = EPS_SIDE_PROBE * state.mu.abs().max(1.0);
    let mut eps_side = None;
    let mut last_kinds = (RootKind::Other, RootKind::Other);
    // The two-negative-roots window can be as narrow as the quartic of the
    // distance to criticality; shrink far enough to resolve windows down to
    // the f64 floor.
    for _ in 0..48 {
        let sides = equilibria::continue_branch(model, state, state.mu + delta).and_then(
            |plus| {
                equilibria::continue_branch(model, state, state.mu - delta).map(|minus| (plus, minus))
            },
        );
        let (plus, minus) = match sides {
            Ok(pair) => pair,
            Err(_) => {
                delta *= 0.25;
                continue;
            }
        };
        let kind_plus = classify_roots(model, &plus)?;
        let kind_minus = classify_roots(model, &minus)?;
        last_kinds = (kind_plus, kind_minus);
        match (kind_plus, kind_minus) {
            (RootKind::NoRealRoots, RootKind::TwoDistinctNegative) => {
                eps_side = Some(1.0);
                break;
            }
            (RootKind::TwoDistinctNegative, RootKind::NoRealRoots) => {
                eps_side = Some(-1.0);
                break;
            }
            _ => delta *= 0.25,
        }
    }
    let eps_side = eps_side.ok_or_else(|| Error::NotTuringPoint {
        mu: state.mu,
        reason: format!(
            "side structure {:?} / {:?} is not a Turing transition",
            last_kinds.0, last_kinds.1
        ),
    })?;

    Ok(TuringPoint {
        state: *state,
        k: k_sq.sqrt(),
        discriminant_residual: disc,
        eps_side,
    })
}

/// A state on the bifurcation side of the Turing point (no real roots of
/// sigma), at mu-distance up to `delta`. With no marginal wavenumbers the
/// uniform state is temporally stable there: localised patterns bifurcate
/// into a stable background. The distance shrinks when a branch end or the
/// side structure interferes.
pub fn bifurcation_side_state(
    model: &ModelSpec,
    tp: &TuringPoint,
    delta: f64,
) -> Result<SteadyState> {
    side_state(model, tp, tp.eps_side * delta.abs(), RootKind::NoRealRoots)
}

/// A state on the opposite side, where sigma has two distinct negative
/// roots -k1^2 < -k2^2 and the uniform state is unstable to the band of
/// wavenumbers between k2 and k1.
pub fn band_unstable_state(model: &ModelSpec, tp: &TuringPoint, delta: f64) -> Result<SteadyState> {
    side_state(model, tp, -tp.eps_side * delta.abs(), RootKind::TwoDistinctNegative)
}

fn side_state(
    model: &ModelSpec,
    tp: &TuringPoint,
    signed_delta: f64,
    want: RootKind,
) -> Result<SteadyState> {
    let mut d = signed_delta;
    for _ in 0..20 {
        if let Ok(s) = equilibria::continue_branch(model, &tp.state, tp.mu() + d) {
            if classify_roots(model, &s)? == want {
                return Ok(s);
            }
        }
        d *= 0.5;
    }
    Err(Error::BranchEnd {
        mu: tp.mu(),
        msg: format!("no state with {want:?} side structure within {signed_delta}"),
    })
}

/// Temporal eigenvalues of the original time-dependent system against a
/// perturbation with wave number `k_perturb`:
/// the two roots omega of det(-k^2 D + dF - omega I) = 0, with the full
/// diffusion matrix D = [[1, 0], [-D_v beta, D_v]].
pub fn growth_rates(
    model: &ModelSpec,
    state: &SteadyState,
    k_perturb: f64,
) -> Result<[Complex64; 2]> {
    let j = model.raw_jacobian(state.u, state.v, state.mu)?;
    let k2 = k_perturb * k_perturb;
    // dF = -d(fhat, ghat); the PDE reads u_t = lap u - fhat, etc.
    let a = [
        [-k2 - j[0][0], -j[0][1]],
        [k2 * model.d_v * model.beta - j[1][0], -k2 * model.d_v - j[1][1]],
    ];
    let tr = mat2_trace(&a);
    let det = mat2_det(&a);
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        Ok([
            Complex64::new(0.5 * (tr + root), 0.0),
            Complex64::new(0.5 * (tr - root), 0.0),
        ])
    } else {
        let imag = 0.5 * (-disc).sqrt();
        Ok([
            Complex64::new(0.5 * tr, imag),
            Complex64::new(0.5 * tr, -imag),
        ])
    }
}

/// max Re omega over the two temporal eigenvalues.
pub fn max_growth_rate(model: &ModelSpec, state: &SteadyState, k_perturb: f64) -> Result<f64> {
    let roots = growth_rates(model, state, k_perturb)?;
    Ok(roots[0].re.max(roots[1].re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn kgs_tp() -> (ModelSpec, TuringPoint) {
        let model = ModelSpec::builtin("kgs", &BTreeMap::new()).unwrap();
        let tp = find_turing_point(&model, 1.0, (1.0, 0.5)).unwrap();
        (model, tp)
    }

    #[test]
    fn kgs_turing_point_location() {
        let (_, tp) = kgs_tp();
        assert!((tp.state.u - 1.071).abs() < 2e-3);
        assert!((tp.state.v - 0.467).abs() < 2e-3);
        assert!((tp.mu() - 1.002).abs() < 2e-3);
        assert!((tp.k - 0.3177).abs() < 1e-3);
        assert!(tp.discriminant_residual.abs() < DISCRIMINANT_BOUND);
        assert_eq!(tp.eps_side, 1.0);
    }

    #[test]
    fn sigma_vanishes_at_repeated_root() {
        let (model, tp) = kgs_tp();
        let s = sigma(&model, &tp.state, -tp.k * tp.k).unwrap();
        assert!(s.abs() < 1e-8, "sigma(-k^2) = {s}");
    }

    #[test]
    fn sigma_at_zero_is_k_fourth() {
        // sigma(0) = det M = (k^2)^2 at the repeated root -k^2.
        let (model, tp) = kgs_tp();
        let s = sigma(&model, &tp.state, 0.0).unwrap();
        let k4 = tp.k.powi(4);
        assert!((s - k4).abs() < 1e-8);
        assert!(s > 0.0);
    }

    #[test]
    fn sigma_is_monic_quadratic() {
        let (model, tp) = kgs_tp();
        let big = 1e8;
        let s = sigma(&model, &tp.state, big).unwrap();
        assert!((s / (big * big) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sigma_factors_as_repeated_root() {
        // sigma(lambda; mu*) = (lambda + k^2)^2: tr M = -2k^2, det M = k^4.
        let (model, tp) = kgs_tp();
        let m = model
            .jacobian(tp.state.u, tp.state.v, tp.state.mu)
            .unwrap();
        assert!((mat2_trace(&m) + 2.0 * tp.k * tp.k).abs() < 1e-8);
        assert!((mat2_det(&m) - tp.k.powi(4)).abs() < 1e-8);
    }

    #[test]
    fn marginal_stability_at_criticality() {
        let (model, tp) = kgs_tp();
        let rate = max_growth_rate(&model, &tp.state, tp.k).unwrap();
        assert!(rate.abs() < 1e-6, "max Re omega = {rate}");
    }

    #[test]
    fn stable_side_is_stable_at_all_wave_numbers() {
        let (model, tp) = kgs_tp();
        let state = bifurcation_side_state(&model, &tp, 0.01).unwrap();
        for i in 1..=200 {
            let k = 3.0 * tp.k * i as f64 / 200.0;
            let rate = max_growth_rate(&model, &state, k).unwrap();
            assert!(rate < 0.0, "unstable at k={k}: rate {rate}");
        }
    }

    #[test]
    fn band_side_has_unstable_band() {
        let (model, tp) = kgs_tp();
        let state = band_unstable_state(&model, &tp, 0.01).unwrap();
        let rate_at_kstar = max_growth_rate(&model, &state, tp.k).unwrap();
        assert!(rate_at_kstar > 0.0, "expected growth at k*: {rate_at_kstar}");
    }

    #[test]
    fn zero_mode_stable_at_uniform_state() {
        let (model, tp) = kgs_tp();
        let state = bifurcation_side_state(&model, &tp, 0.01).unwrap();
        let roots = growth_rates(&model, &state, 0.0).unwrap();
        assert!(roots[0].re < 0.0 && roots[1].re < 0.0);
    }

    #[test]
    fn critical_wave_number_maximises_growth() {
        // At mu*, the most unstable perturbation over a k grid sits at k*
        // to grid resolution.
        let (model, tp) = kgs_tp();
        let n = 600;
        let mut best = (0.0f64, f64::NEG_INFINITY);
        for i in 1..=n {
            let k = 3.0 * tp.k * i as f64 / n as f64;
            let rate = max_growth_rate(&model, &tp.state, k).unwrap();
            if rate > best.1 {
                best = (k, rate);
            }
        }
        let grid_step = 3.0 * tp.k / n as f64;
        assert!(
            (best.0 - tp.k).abs() <= grid_step + 1e-12,
            "argmax {} vs k* {}",
            best.0,
            tp.k
        );
    }

    #[test]
    fn all_five_reported_turing_points() {
        let cases: [(&str, f64, (f64, f64), (f64, f64, f64), f64); 5] = [
            ("kgs", 1.0, (1.0, 0.5), (1.071, 0.467, 1.002), 0.3177),
            (
                "logistic_klausmeier",
                2.2,
                (0.5, 1.8),
                (0.465, 1.809, 2.200),
                0.1612,
            ),
            ("nfc_gilad", 1.6, (0.5, 0.8), (0.474, 0.768, 1.635), 0.333),
            (
                "von_hardenberg",
                0.17,
                (0.02, 0.17),
                (0.017, 0.173, 0.169),
                0.106,
            ),
            // The second von Hardenberg wave number is asserted at its
            // self-consistent value: P2 = -(k^2 + f_u)/f_v = 2.578 and the
            // 612-long preset box (20 wavelengths) both pin k near 0.2053.
            (
                "von_hardenberg",
                0.41,
                (0.27, 0.55),
                (0.271, 0.556, 0.414),
                0.2053,
            ),
        ];
        for (name, mu_guess, guess, (u, v, mu), k) in cases {
            let model = ModelSpec::builtin(name, &BTreeMap::new()).unwrap();
            let tp = find_turing_point(&model, mu_guess, guess)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!((tp.state.u - u).abs() < 2e-3, "{name} u: {}", tp.state.u);
            assert!((tp.state.v - v).abs() < 2e-3, "{name} v: {}", tp.state.v);
            assert!((tp.mu() - mu).abs() < 2e-3, "{name} mu: {}", tp.mu());
            assert!((tp.k - k).abs() < 1e-3, "{name} k: {}", tp.k);
        }
    }
}
