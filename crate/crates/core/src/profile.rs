//! Localised dihedral initial profiles.
//!
//! Spot A-type fields place a cosine-Bessel sum along the critical
//! eigendirection under a global exponential envelope:
//!
//! ```text
//! (u, v) = (u*, v*) + C P3 [ sum_n a_|n| J_|mn|(kr) cos(mn theta) ]
//!          exp(-sqrt(P1 eps) r) (1, P2)
//! ```
//!
//! Ring-type fields use the leading-order core expansion
//!
//! ```text
//! (u, v) = (u*, v*) + C_R (c0 eps)^(3/4)
//!          sum_n b_|n| [ kr J_|mn+1|(kr) U0 + 2 J_|mn|(kr) U1 ] cos(mn theta)
//! ```
//!
//! multiplied by the same envelope. The true ring far field would need the
//! nonautonomous amplitude equation solved on the rescaled radial variable;
//! the envelope stands in for it, which is fine for initial guesses.

use crate::bessel;
use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::linalg::Vec2;
use crate::localform::{LocalForm, Predictors};
use crate::matching::{MatchKind, MatchingSolution};
use crate::turing::TuringPoint;

/// Envelope e-folding length of the default profile, in wavelengths. The
/// offset eps controls the envelope through sqrt(P1 eps); pinning the decay
/// length to a fixed number of wavelengths seeds geometrically similar
/// patches (a core plus two or three rings) in every model, which is what
/// lets new cells nucleate around the initial patch. One or two further
/// e-folds still fit inside the 20-wavelength default domain, so profiles
/// vanish at the boundary.
pub const ENVELOPE_WAVELENGTHS: f64 = 1.5;
/// Default profile amplitude C.
pub const DEFAULT_AMPLITUDE: f64 = 1.0;

/// Worker threads for field synthesis, from DIHEDRA_THREADS (default 1).
/// Rows are written by disjoint chunks, so the result is identical for any
/// thread count.
fn thread_count() -> usize {
    std::env::var("DIHEDRA_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(1)
        .max(1)
}

/// Run `fill(iy, u_row, v_row)` for every grid row, chunked across threads.
fn for_each_row<F>(u: &mut [f64], v: &mut [f64], n_grid: usize, fill: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync,
{
    let threads = thread_count().min(n_grid);
    if threads <= 1 {
        for (iy, (u_row, v_row)) in u
            .chunks_mut(n_grid)
            .zip(v.chunks_mut(n_grid))
            .enumerate()
        {
            fill(iy, u_row, v_row);
        }
        return;
    }
    let rows_per = n_grid.div_ceil(threads);
    std::thread::scope(|scope| {
        for (chunk_idx, (u_chunk, v_chunk)) in u
            .chunks_mut(rows_per * n_grid)
            .zip(v.chunks_mut(rows_per * n_grid))
            .enumerate()
        {
            let fill = &fill;
            scope.spawn(move || {
                for (local, (u_row, v_row)) in u_chunk
                    .chunks_mut(n_grid)
                    .zip(v_chunk.chunks_mut(n_grid))
                    .enumerate()
                {
                    fill(chunk_idx * rows_per + local, u_row, v_row);
                }
            });
        }
    });
}

/// What to synthesise: a polished matching solution plus the bifurcation
/// offset and amplitude.
#[derive(Debug, Clone)]
pub struct PatternSpec {
    pub matching: MatchingSolution,
    /// Parameter offset eps = mu - mu*; P1 * eps must be positive.
    pub eps: f64,
    /// C > 0 for spot A profiles, C_R > 0 for rings.
    pub amplitude: f64,
}

impl PatternSpec {
    pub fn new(matching: MatchingSolution, eps: f64, amplitude: f64) -> Result<Self> {
        if !(amplitude > 0.0) {
            return Err(Error::PatternSpec(format!(
                "amplitude must be positive, got {amplitude}"
            )));
        }
        if eps == 0.0 || !eps.is_finite() {
            return Err(Error::PatternSpec(format!("eps must be finite and nonzero, got {eps}")));
        }
        Ok(PatternSpec {
            matching,
            eps,
            amplitude,
        })
    }

    /// Default eps: sign from P1, magnitude chosen so the envelope
    /// sqrt(P1 eps) decays over ENVELOPE_WAVELENGTHS wavelengths,
    /// i.e. |eps| = k^2 / ((2 pi ENVELOPE_WAVELENGTHS)^2 |P1|).
    pub fn default_eps(p1: f64, k: f64) -> f64 {
        let decay = k / (2.0 * std::f64::consts::PI * ENVELOPE_WAVELENGTHS);
        (decay * decay / p1.abs()).copysign(p1)
    }
}

/// Synthesise the spot A-type initial profile on an n_grid x n_grid domain
/// of side length `len`.
pub fn spot_a_field(
    tp: &TuringPoint,
    pred: &Predictors,
    spec: &PatternSpec,
    n_grid: usize,
    len: f64,
) -> Result<Field2D> {
    if spec.matching.kind != MatchKind::SpotA {
        return Err(Error::PatternSpec(
            "spot_a_field needs a spot A matching solution".into(),
        ));
    }
    if !(pred.p1 * spec.eps > 0.0) {
        return Err(Error::PatternSpec(format!(
            "P1 eps = {} must be positive",
            pred.p1 * spec.eps
        )));
    }
    let mut field = Field2D::uniform(n_grid, len, tp.state.u, tp.state.v)?;
    let m = spec.matching.symmetry;
    let n_trunc = spec.matching.truncation;
    let coeffs = &spec.matching.coeffs;
    let decay = (pred.p1 * spec.eps).sqrt();
    let k = tp.k;
    let max_order = m * n_trunc;
    if max_order > bessel::MAX_ORDER {
        return Err(Error::BesselOrder(max_order));
    }

    let h = field.spacing();
    let half = 0.5 * field.len;
    let (u_star, v_star) = (tp.state.u, tp.state.v);
    let (p2, p3, amp) = (pred.p2, pred.p3, spec.amplitude);
    for_each_row(&mut field.u, &mut field.v, n_grid, |iy, u_row, v_row| {
        let y = iy as f64 * h - half;
        for ix in 0..n_grid {
            let x = ix as f64 * h - half;
            let r = x.hypot(y);
            let theta = y.atan2(x);
            let js = bessel::bessel_j_upto(max_order, k * r).expect("order validated above");
            let mut series = coeffs[0] * js[0];
            for n in 1..=n_trunc {
                series += 2.0 * coeffs[n] * js[m * n] * (m as f64 * n as f64 * theta).cos();
            }
            let dev = amp * p3 * series * (-decay * r).exp();
            u_row[ix] = u_star + dev;
            v_row[ix] = v_star + p2 * dev;
        }
    });
    Ok(field)
}

/// Synthesise the ring-type leading-order profile.
///
/// Ring branches only bifurcate when P4 < 0; a nonnegative P4 is an error
/// unless `force` is set (the profile is still well defined as a field).
pub fn ring_field(
    tp: &TuringPoint,
    lf: &LocalForm,
    spec: &PatternSpec,
    n_grid: usize,
    len: f64,
    force: bool,
) -> Result<Field2D> {
    if spec.matching.kind != MatchKind::Ring {
        return Err(Error::PatternSpec(
            "ring_field needs a ring matching solution".into(),
        ));
    }
    let c0_eps = lf.c0 * spec.eps;
    if !(c0_eps > 0.0) {
        return Err(Error::PatternSpec(format!(
            "c0 eps = {c0_eps} must be positive"
        )));
    }
    if lf.c3 >= 0.0 && !force {
        return Err(Error::PatternSpec(format!(
            "P4 = {} is not negative: no ring branch bifurcates (pass force to synthesise anyway)",
            lf.c3
        )));
    }
    let mut field = Field2D::uniform(n_grid, len, tp.state.u, tp.state.v)?;
    let m = spec.matching.symmetry as i64;
    let n_trunc = spec.matching.truncation as i64;
    let coeffs = &spec.matching.coeffs;
    let k = tp.k;
    let amp = spec.amplitude * c0_eps.powf(0.75);
    let decay = c0_eps.sqrt();
    let max_order = (m * n_trunc + 1).unsigned_abs() as usize;
    if max_order > bessel::MAX_ORDER {
        return Err(Error::BesselOrder(max_order));
    }

    let h = field.spacing();
    let half = 0.5 * field.len;
    let (u_star, v_star) = (tp.state.u, tp.state.v);
    let (u0, u1) = (lf.u0, lf.u1);
    for_each_row(&mut field.u, &mut field.v, n_grid, |iy, u_row, v_row| {
        let y = iy as f64 * h - half;
        for ix in 0..n_grid {
            let x = ix as f64 * h - half;
            let r = x.hypot(y);
            let theta = y.atan2(x);
            let kr = k * r;
            let js = bessel::bessel_j_upto(max_order, kr).expect("order validated above");
            let mut dev: Vec2 = [0.0, 0.0];
            // |mn + 1| is not symmetric in n, so the signed sum stays.
            for n in -n_trunc..=n_trunc {
                let b = coeffs[n.unsigned_abs() as usize];
                let j0 = js[(m * n).unsigned_abs() as usize];
                let j1 = js[(m * n + 1).unsigned_abs() as usize];
                let ang = ((m * n) as f64 * theta).cos();
                dev[0] += b * (kr * j1 * u0[0] + 2.0 * j0 * u1[0]) * ang;
                dev[1] += b * (kr * j1 * u0[1] + 2.0 * j0 * u1[1]) * ang;
            }
            let env = amp * (-decay * r).exp();
            u_row[ix] = u_star + env * dev[0];
            v_row[ix] = v_star + env * dev[1];
        }
    });
    Ok(field)
}

/// Max deviation from D_m symmetry over a polar probe set, sampled with
/// bilinear interpolation: both the 2 pi / m rotation and the theta -> -theta
/// reflection are checked for u and v.
pub fn dihedral_symmetry_error(field: &Field2D, m: usize) -> f64 {
    let radii: [f64; 5] = [0.12, 0.25, 0.4, 0.55, 0.7];
    let n_angles = 48;
    let rot = 2.0 * std::f64::consts::PI / m as f64;
    let mut worst = 0.0f64;
    for frac in radii {
        let r = frac * 0.5 * field.len;
        for a in 0..n_angles {
            let theta = 2.0 * std::f64::consts::PI * a as f64 / n_angles as f64;
            for s in [crate::field::Species::U, crate::field::Species::V] {
                let here = field.sample_bilinear(s, r * theta.cos(), r * theta.sin());
                let rotated =
                    field.sample_bilinear(s, r * (theta + rot).cos(), r * (theta + rot).sin());
                let reflected = field.sample_bilinear(s, r * theta.cos(), -r * theta.sin());
                worst = worst.max((here - rotated).abs()).max((here - reflected).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localform::build_local_form;
    use crate::matching::{self, seeds, solve_ring, solve_spot_a};
    use crate::model::ModelSpec;
    use crate::turing::find_turing_point;
    use std::collections::BTreeMap;

    fn kgs_setup() -> (TuringPoint, LocalForm, Predictors, MatchingSolution) {
        let model = ModelSpec::builtin("kgs", &BTreeMap::new()).unwrap();
        let tp = find_turing_point(&model, 1.0, (1.0, 0.5)).unwrap();
        let lf = build_local_form(&model, &tp).unwrap();
        let pred = lf.predictors().unwrap();
        let (m, n, a) = seeds::HEXAGON;
        let sol = solve_spot_a(m, n, &a).unwrap();
        (tp, lf, pred, sol)
    }

    #[test]
    fn center_deviation_is_a0_term() {
        // At r = 0 only J_0 survives: deviation = C P3 a_0 (1, P2).
        let (tp, _, pred, sol) = kgs_setup();
        let a0 = sol.coeffs[0];
        let spec = PatternSpec::new(sol, PatternSpec::default_eps(pred.p1, tp.k), 1.0).unwrap();
        let field = spot_a_field(&tp, &pred, &spec, 65, 50.0).unwrap();
        let center = field.idx(32, 32);
        let want_u = tp.state.u + pred.p3 * a0;
        let want_v = tp.state.v + pred.p2 * pred.p3 * a0;
        assert!((field.u[center] - want_u).abs() < 1e-12);
        assert!((field.v[center] - want_v).abs() < 1e-12);
        // For this model P3 < 0 and a0 > 0: the core is a gap.
        assert!(field.u[center] < tp.state.u);
    }

    #[test]
    fn rejects_wrong_eps_sign() {
        let (tp, _, pred, sol) = kgs_setup();
        let spec = PatternSpec::new(sol, -PatternSpec::default_eps(pred.p1, tp.k), 1.0).unwrap();
        assert!(matches!(
            spot_a_field(&tp, &pred, &spec, 33, 50.0),
            Err(Error::PatternSpec(_))
        ));
    }

    #[test]
    fn rotation_invariance_on_fine_grid() {
        // Construction is a cosine series in m theta; on a fine grid over a
        // small domain the bilinear interpolation error stays below 1e-6
        // for a small-amplitude profile.
        let (tp, _, pred, sol) = kgs_setup();
        let m = sol.symmetry;
        let spec = PatternSpec::new(sol, PatternSpec::default_eps(pred.p1, tp.k), 0.02).unwrap();
        let len = 2.0 * tp.wavelength();
        let field = spot_a_field(&tp, &pred, &spec, 2049, len).unwrap();
        let err = dihedral_symmetry_error(&field, m);
        assert!(err < 1e-6, "symmetry error {err:.3e}");
    }

    #[test]
    fn perturbed_cell_breaks_symmetry_by_its_magnitude() {
        let (tp, _, pred, sol) = kgs_setup();
        let m = sol.symmetry;
        let spec = PatternSpec::new(sol, PatternSpec::default_eps(pred.p1, tp.k), 0.02).unwrap();
        let len = 2.0 * tp.wavelength();
        let mut field = spot_a_field(&tp, &pred, &spec, 257, len).unwrap();
        let base_err = dihedral_symmetry_error(&field, m);
        // Poke the grid cell nearest one of the off-axis probe points so
        // the bilinear sample sees at least a quarter of the bump.
        let bump = 1e-3;
        let r = 0.4 * 0.5 * field.len;
        let theta = 2.0 * std::f64::consts::PI * 5.0 / 48.0;
        let h = field.spacing();
        let ix = ((r * theta.cos() + 0.5 * field.len) / h).round() as usize;
        let iy = ((r * theta.sin() + 0.5 * field.len) / h).round() as usize;
        let i = field.idx(ix, iy);
        field.u[i] += bump;
        let err = dihedral_symmetry_error(&field, m);
        assert!(
            err > 0.2 * bump && err < 2.0 * bump + 2.0 * base_err,
            "base {base_err:.3e}, perturbed {err:.3e}"
        );
    }

    #[test]
    fn spot_field_decays_to_boundary() {
        let (tp, _, pred, sol) = kgs_setup();
        let spec =
            PatternSpec::new(sol, PatternSpec::default_eps(pred.p1, tp.k), 1.0).unwrap();
        let len = 20.0 * tp.wavelength();
        let field = spot_a_field(&tp, &pred, &spec, 129, len).unwrap();
        let n = field.n_grid;
        let mut boundary_dev = 0.0f64;
        let mut center_dev = 0.0f64;
        for iy in 0..n {
            for ix in 0..n {
                let dev = (field.u[field.idx(ix, iy)] - tp.state.u).abs();
                if ix == 0 || iy == 0 || ix == n - 1 || iy == n - 1 {
                    boundary_dev = boundary_dev.max(dev);
                }
                let c = (n / 4..3 * n / 4).contains(&ix) && (n / 4..3 * n / 4).contains(&iy);
                if c {
                    center_dev = center_dev.max(dev);
                }
            }
        }
        assert!(
            boundary_dev < 1e-3 * center_dev,
            "boundary {boundary_dev:.3e} vs center {center_dev:.3e}"
        );
    }

    #[test]
    fn v_deviation_is_rank_one() {
        let (tp, _, pred, sol) = kgs_setup();
        let spec =
            PatternSpec::new(sol, PatternSpec::default_eps(pred.p1, tp.k), 1.0).unwrap();
        let field = spot_a_field(&tp, &pred, &spec, 65, 100.0).unwrap();
        for i in 0..field.u.len() {
            let du = field.u[i] - tp.state.u;
            let dv = field.v[i] - tp.state.v;
            assert!((dv - pred.p2 * du).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_profile_properties() {
        let (tp, lf, pred, _) = kgs_setup();
        let eps = PatternSpec::default_eps(pred.p1, tp.k);
        let sol = solve_ring(6, 0, &[0.9]).unwrap();
        let spec = PatternSpec::new(sol.clone(), eps, 1.0).unwrap();
        // KGS at these parameters has P4 > 0: hard error without force.
        assert!(matches!(
            ring_field(&tp, &lf, &spec, 65, 100.0, false),
            Err(Error::PatternSpec(_))
        ));
        let field = ring_field(&tp, &lf, &spec, 65, 100.0, true).unwrap();

        // Center value: kr J_1 -> 0 and J_0 -> 1, so the deviation is
        // C_R (c0 eps)^(3/4) b_0 * 2 U1.
        let center = field.idx(32, 32);
        let amp = (lf.c0 * eps).powf(0.75);
        let want_u = tp.state.u + amp * sol.coeffs[0] * 2.0 * lf.u1[0];
        let want_v = tp.state.v + amp * sol.coeffs[0] * 2.0 * lf.u1[1];
        assert!((field.u[center] - want_u).abs() < 1e-12);
        assert!((field.v[center] - want_v).abs() < 1e-12);

        // N = 0 is axisymmetric: exact under quarter-turn grid rotations.
        let n = field.n_grid;
        for iy in 0..n {
            for ix in 0..n {
                let a = field.u[field.idx(ix, iy)];
                let b = field.u[field.idx(n - 1 - iy, ix)];
                assert!((a - b).abs() < 1e-12);
            }
        }

        // Flipping the coefficients reflects the deviation.
        let mut neg = sol;
        neg.coeffs[0] = -neg.coeffs[0];
        let spec_neg = PatternSpec::new(neg, eps, 1.0).unwrap();
        let field_neg = ring_field(&tp, &lf, &spec_neg, 65, 100.0, true).unwrap();
        for i in 0..field.u.len() {
            let d = field.u[i] - tp.state.u;
            let dn = field_neg.u[i] - tp.state.u;
            assert!((d + dn).abs() < 1e-12);
        }
    }

    #[test]
    fn kind_mismatch_rejected() {
        let (tp, lf, pred, spot) = kgs_setup();
        let eps = PatternSpec::default_eps(pred.p1, tp.k);
        let spec = PatternSpec::new(spot, eps, 1.0).unwrap();
        assert!(matches!(
            ring_field(&tp, &lf, &spec, 33, 50.0, true),
            Err(Error::PatternSpec(_))
        ));
        let ring = matching::solve_ring(6, 0, &[0.9]).unwrap();
        let spec = PatternSpec::new(ring, eps, 1.0).unwrap();
        assert!(matches!(
            spot_a_field(&tp, &pred, &spec, 33, 50.0),
            Err(Error::PatternSpec(_))
        ));
    }
}
