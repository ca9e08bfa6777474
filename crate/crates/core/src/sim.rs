//! Time integration of the full reaction-diffusion system.
//!
//! The stepper is a second-order exponential integrator realised with
//! rational approximations whose poles are real and distinct, so that one
//! step reduces to tridiagonal solves along rows and columns:
//!
//! ```text
//! u*      = (I - h A_x)^-1 (I - h A_y)^-1 (u_n + h F(u_n))
//! u_{n+1} = P(A_x) P(A_y) u_n
//!         + S3[ h (5/2 F(u_n) + 1/2 F(u*)) ]
//!         - S4[ 2 h F(u_n) ]
//! ```
//!
//! with P(B) = 9 (I - hB/3)^-1 - 8 (I - hB/4)^-1 and S_p the dimensionally
//! split resolvent (I - hA_x/p)^-1 (I - hA_y/p)^-1. P matches exp through
//! second order and is damped at -infinity; the one-dimensional Laplacians
//! commute exactly on the tensor grid, so the propagator splitting is exact
//! and the scheme keeps its second order. The binding checks are the
//! dt-halving order test and the dispersion cross-check in the acceptance
//! suite.
//!
//! Cross-diffusion is removed up front: with kappa = beta D_v / (D_v - 1),
//! (u, v) -> (u, v - kappa u) diagonalises the diffusion matrix, the
//! reactions are evaluated in the original variables, and fields transform
//! back before they are observed.
//!
//! Boundary conditions are homogeneous Neumann via ghost-point reflection.

use crate::equilibria::SteadyState;
use crate::error::{Error, Result};
use crate::expr::Compiled;
use crate::field::Field2D;
use crate::model::ModelSpec;
use crate::turing;

/// Abort threshold on |field values|.
const BLOWUP_LIMIT: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Sorted times within [0, t_end]; snapshots are taken at the nearest
    /// whole step.
    pub snapshot_times: Vec<f64>,
    /// Bifurcation parameter for the run.
    pub mu: f64,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64, snapshot_times: Vec<f64>, mu: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
        }
        if !(t_end >= 0.0) {
            return Err(Error::Invalid(format!("t_end must be >= 0, got {t_end}")));
        }
        let mut last = 0.0;
        for &t in &snapshot_times {
            if t < 0.0 || t > t_end + 0.5 * dt {
                return Err(Error::Invalid(format!(
                    "snapshot time {t} outside [0, {t_end}]"
                )));
            }
            if t < last {
                return Err(Error::Invalid("snapshot times must be sorted".into()));
            }
            last = t;
        }
        if !mu.is_finite() {
            return Err(Error::Invalid(format!("mu must be finite, got {mu}")));
        }
        Ok(SimConfig {
            dt,
            t_end,
            snapshot_times,
            mu,
        })
    }
}

/// The cross-diffusion transform and diagonal diffusion rates.
#[derive(Debug, Clone, Copy)]
pub struct DiagonalForm {
    /// beta D_v / (D_v - 1); zero when beta = 0.
    pub kappa: f64,
    pub d_u: f64,
    pub d_v: f64,
}

impl DiagonalForm {
    /// (u, v) -> (u_hat, v_hat).
    pub fn forward(&self, u: f64, v: f64) -> (f64, f64) {
        (u, v - self.kappa * u)
    }

    /// (u_hat, v_hat) -> (u, v).
    pub fn inverse(&self, u_hat: f64, v_hat: f64) -> (f64, f64) {
        (u_hat, v_hat + self.kappa * u_hat)
    }
}

/// Diagonalise the diffusion matrix [[1, 0], [-D_v beta, D_v]].
pub fn diagonalize(model: &ModelSpec) -> Result<DiagonalForm> {
    if model.beta == 0.0 {
        return Ok(DiagonalForm {
            kappa: 0.0,
            d_u: 1.0,
            d_v: model.d_v,
        });
    }
    if (model.d_v - 1.0).abs() < 1e-12 {
        return Err(Error::SingularTransform);
    }
    Ok(DiagonalForm {
        kappa: model.beta * model.d_v / (model.d_v - 1.0),
        d_u: 1.0,
        d_v: model.d_v,
    })
}

// ---------------------------------------------------------------------------
// Tridiagonal Neumann solver
// ---------------------------------------------------------------------------

/// Factorised (I - c L) with L the 1-D ghost-reflected Neumann Laplacian:
/// interior rows (-g, 1+2g, -g), boundary rows (1+2g, -2g), g = c / h^2.
/// Strictly diagonally dominant, so Thomas factorisation needs no pivoting.
struct NeumannSolver {
    n: usize,
    gamma: f64,
    /// Modified upper-diagonal coefficients.
    cp: Vec<f64>,
    /// Reciprocal pivot per row.
    inv_d: Vec<f64>,
}

impl NeumannSolver {
    fn new(n: usize, gamma: f64) -> Self {
        let mut cp = vec![0.0; n];
        let mut inv_d = vec![0.0; n];
        let diag = 1.0 + 2.0 * gamma;
        inv_d[0] = 1.0 / diag;
        cp[0] = -2.0 * gamma * inv_d[0];
        for i in 1..n - 1 {
            let d = diag + gamma * cp[i - 1];
            inv_d[i] = 1.0 / d;
            cp[i] = -gamma * inv_d[i];
        }
        let d_last = diag + 2.0 * gamma * cp[n - 2];
        inv_d[n - 1] = 1.0 / d_last;
        NeumannSolver {
            n,
            gamma,
            cp,
            inv_d,
        }
    }

    /// Solve along x (contiguous rows), in place.
    fn solve_rows(&self, a: &mut [f64]) {
        let n = self.n;
        let g = self.gamma;
        for row in a.chunks_exact_mut(n) {
            row[0] *= self.inv_d[0];
            for i in 1..n - 1 {
                row[i] = (row[i] + g * row[i - 1]) * self.inv_d[i];
            }
            row[n - 1] = (row[n - 1] + 2.0 * g * row[n - 2]) * self.inv_d[n - 1];
            for i in (0..n - 1).rev() {
                row[i] -= self.cp[i] * row[i + 1];
            }
        }
    }

    /// Solve along y (strided columns), vectorised across each row.
    fn solve_cols(&self, a: &mut [f64]) {
        let n = self.n;
        let g = self.gamma;
        for ix in 0..n {
            a[ix] *= self.inv_d[0];
        }
        for iy in 1..n - 1 {
            let (prev, cur) = a.split_at_mut(iy * n);
            let prev_row = &prev[(iy - 1) * n..];
            let inv = self.inv_d[iy];
            for ix in 0..n {
                cur[ix] = (cur[ix] + g * prev_row[ix]) * inv;
            }
        }
        {
            let iy = n - 1;
            let (prev, cur) = a.split_at_mut(iy * n);
            let prev_row = &prev[(iy - 1) * n..];
            let inv = self.inv_d[iy];
            for ix in 0..n {
                cur[ix] = (cur[ix] + 2.0 * g * prev_row[ix]) * inv;
            }
        }
        for iy in (0..n - 1).rev() {
            let (cur, next) = a.split_at_mut((iy + 1) * n);
            let cur_row = &mut cur[iy * n..];
            let cpi = self.cp[iy];
            for ix in 0..n {
                cur_row[ix] -= cpi * next[ix];
            }
        }
    }
}

/// The three split resolvents for one component: poles at h, h/3, h/4.
struct ComponentSolvers {
    predictor: NeumannSolver,
    third: NeumannSolver,
    quarter: NeumannSolver,
}

impl ComponentSolvers {
    fn new(n: usize, h_grid: f64, dt: f64, d: f64) -> Self {
        let base = dt * d / (h_grid * h_grid);
        ComponentSolvers {
            predictor: NeumannSolver::new(n, base),
            third: NeumannSolver::new(n, base / 3.0),
            quarter: NeumannSolver::new(n, base / 4.0),
        }
    }
}

fn split_solve(solver: &NeumannSolver, a: &mut [f64]) {
    solver.solve_cols(a);
    solver.solve_rows(a);
}

/// P(A_x) P(A_y) a with P(B) = 9 (I - hB/3)^-1 - 8 (I - hB/4)^-1,
/// applied direction by direction.
fn apply_propagator(solvers: &ComponentSolvers, a: &[f64], scratch: &mut Vec<f64>) -> Vec<f64> {
    // y direction.
    let mut t3 = a.to_vec();
    solvers.third.solve_cols(&mut t3);
    scratch.clear();
    scratch.extend_from_slice(a);
    solvers.quarter.solve_cols(scratch);
    for (x, q) in t3.iter_mut().zip(scratch.iter()) {
        *x = 9.0 * *x - 8.0 * q;
    }
    // x direction.
    let mut out = t3.clone();
    solvers.third.solve_rows(&mut out);
    solvers.quarter.solve_rows(&mut t3);
    for (x, q) in out.iter_mut().zip(t3.iter()) {
        *x = 9.0 * *x - 8.0 * q;
    }
    out
}

// ---------------------------------------------------------------------------
// Reaction evaluation in hat variables
// ---------------------------------------------------------------------------

struct HatReaction {
    fhat: Compiled,
    ghat: Compiled,
    kappa: f64,
}

impl HatReaction {
    fn new(model: &ModelSpec, diag: &DiagonalForm, mu: f64) -> Result<Self> {
        Ok(HatReaction {
            fhat: Compiled::new(&model.fhat, &model.params, mu)?,
            ghat: Compiled::new(&model.ghat, &model.params, mu)?,
            kappa: diag.kappa,
        })
    }

    /// F_hat(u_hat, v_hat) = (-fhat(u, v), kappa fhat(u, v) - ghat(u, v))
    /// with u = u_hat, v = v_hat + kappa u_hat.
    fn eval(&self, u_hat: &[f64], v_hat: &[f64], out_u: &mut [f64], out_v: &mut [f64]) {
        for i in 0..u_hat.len() {
            let u = u_hat[i];
            let v = v_hat[i] + self.kappa * u;
            let f = self.fhat.eval(u, v);
            let g = self.ghat.eval(u, v);
            out_u[i] = -f;
            out_v[i] = self.kappa * f - g;
        }
    }
}

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------

/// Integrate `model` from `init`, delivering snapshots (physical variables)
/// to `sink` in time order, and returning the final physical field.
pub fn run(
    model: &ModelSpec,
    init: &Field2D,
    cfg: &SimConfig,
    sink: &mut dyn FnMut(f64, &Field2D) -> Result<()>,
) -> Result<Field2D> {
    let diag = diagonalize(model)?;
    let reaction = HatReaction::new(model, &diag, cfg.mu)?;
    let n = init.n_grid;
    if n < 64 {
        return Err(Error::Invalid(format!(
            "simulation grids need n_grid >= 64, got {n}"
        )));
    }
    let h_grid = init.spacing();
    let dt = cfg.dt;
    let total_steps = (cfg.t_end / dt).round() as usize;

    // Snapshot step indices (nearest step), deduplicated.
    let mut snap_steps: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|t| ((t / dt).round() as usize).min(total_steps))
        .collect();
    snap_steps.dedup();

    let solvers_u = ComponentSolvers::new(n, h_grid, dt, diag.d_u);
    let solvers_v = ComponentSolvers::new(n, h_grid, dt, diag.d_v);

    // Transform to hat variables.
    let size = n * n;
    let mut u_hat = vec![0.0; size];
    let mut v_hat = vec![0.0; size];
    for i in 0..size {
        let (uh, vh) = diag.forward(init.u[i], init.v[i]);
        u_hat[i] = uh;
        v_hat[i] = vh;
    }

    let mut fu = vec![0.0; size];
    let mut fv = vec![0.0; size];
    let mut fu_star = vec![0.0; size];
    let mut fv_star = vec![0.0; size];
    let mut pred_u = vec![0.0; size];
    let mut pred_v = vec![0.0; size];
    let mut scratch = Vec::with_capacity(size);

    let mut next_snap = 0usize;
    let emit = |step: usize,
                    u_hat: &[f64],
                    v_hat: &[f64],
                    next_snap: &mut usize,
                    sink: &mut dyn FnMut(f64, &Field2D) -> Result<()>|
     -> Result<()> {
        while *next_snap < snap_steps.len() && snap_steps[*next_snap] == step {
            let mut snap = Field2D::uniform(n, init.len, 0.0, 0.0)?;
            for i in 0..size {
                let (u, v) = diag.inverse(u_hat[i], v_hat[i]);
                snap.u[i] = u;
                snap.v[i] = v;
            }
            sink(step as f64 * dt, &snap)?;
            *next_snap += 1;
        }
        Ok(())
    };

    emit(0, &u_hat, &v_hat, &mut next_snap, sink)?;

    for step in 1..=total_steps {
        reaction.eval(&u_hat, &v_hat, &mut fu, &mut fv);

        // Predictor: backward Euler with split resolvent.
        for i in 0..size {
            pred_u[i] = u_hat[i] + dt * fu[i];
            pred_v[i] = v_hat[i] + dt * fv[i];
        }
        split_solve(&solvers_u.predictor, &mut pred_u);
        split_solve(&solvers_v.predictor, &mut pred_v);
        reaction.eval(&pred_u, &pred_v, &mut fu_star, &mut fv_star);

        for (comp_solvers, state, f_n, f_star) in [
            (&solvers_u, &mut u_hat, &fu, &fu_star),
            (&solvers_v, &mut v_hat, &fv, &fv_star),
        ] {
            let propagated = apply_propagator(comp_solvers, state, &mut scratch);
            // S3 term: h (5/2 F_n + 1/2 F*).
            let mut s3 = vec![0.0; size];
            for i in 0..size {
                s3[i] = dt * (2.5 * f_n[i] + 0.5 * f_star[i]);
            }
            split_solve(&comp_solvers.third, &mut s3);
            // S4 term: 2 h F_n.
            let mut s4 = vec![0.0; size];
            for i in 0..size {
                s4[i] = 2.0 * dt * f_n[i];
            }
            split_solve(&comp_solvers.quarter, &mut s4);
            for i in 0..size {
                state[i] = propagated[i] + s3[i] - s4[i];
            }
        }

        // Blow-up / NaN screening.
        let mut max_abs = 0.0f64;
        for &x in u_hat.iter().chain(v_hat.iter()) {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    t: step as f64 * dt,
                });
            }
            max_abs = max_abs.max(x.abs());
        }
        if max_abs > BLOWUP_LIMIT {
            return Err(Error::BlowUp {
                t: step as f64 * dt,
                max: max_abs,
            });
        }

        emit(step, &u_hat, &v_hat, &mut next_snap, sink)?;
    }

    let mut out = Field2D::uniform(n, init.len, 0.0, 0.0)?;
    for i in 0..size {
        let (u, v) = diag.inverse(u_hat[i], v_hat[i]);
        out.u[i] = u;
        out.v[i] = v;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Linear growth measurement
// ---------------------------------------------------------------------------

/// Result of a single-mode linear growth measurement.
#[derive(Debug, Clone, Copy)]
pub struct GrowthCheck {
    /// The wave number actually used (snapped so that k L is a multiple of pi).
    pub k: f64,
    /// Effective wave number of the discrete Laplacian for that mode.
    pub k_eff: f64,
    /// Fitted exponential rate.
    pub measured: f64,
    /// max Re omega from the dispersion relation at k_eff.
    pub reference: f64,
}

/// Perturb the uniform state at `state` with a single Neumann-compatible
/// cosine mode of amplitude 1e-6 along the dominant temporal eigenvector
/// and fit the exponential rate over [0, t_short].
///
/// The fit window shrinks if the log-amplitude trace bends (nonlinear
/// contamination or rate crossover).
pub fn linear_growth_check(
    model: &ModelSpec,
    state: &SteadyState,
    k_request: f64,
    t_short: f64,
    dt: f64,
    n_grid: usize,
    len: f64,
) -> Result<GrowthCheck> {
    // Snap to a Neumann mode: k L = j pi.
    let j = (k_request * len / std::f64::consts::PI).round().max(1.0);
    let k = j * std::f64::consts::PI / len;
    let h_grid = len / (n_grid - 1) as f64;
    let k_eff = ((2.0 / (h_grid * h_grid)) * (1.0 - (k * h_grid).cos())).sqrt();

    // Dominant temporal eigenvector of A(k_eff).
    let roots = turing::growth_rates(model, state, k_eff)?;
    if roots[0].im.abs() > 1e-10 {
        return Err(Error::Invalid(format!(
            "complex growth rates at k = {k}: pick a different probe"
        )));
    }
    let omega = roots[0].re.max(roots[1].re);
    let jmat = model.raw_jacobian(state.u, state.v, state.mu)?;
    let k2 = k_eff * k_eff;
    let a = [
        [-k2 - jmat[0][0], -jmat[0][1]],
        [
            k2 * model.d_v * model.beta - jmat[1][0],
            -k2 * model.d_v - jmat[1][1],
        ],
    ];
    // (A - omega I) vec = 0: take the better-conditioned null vector.
    let r1 = [a[0][0] - omega, a[0][1]];
    let r2 = [a[1][0], a[1][1] - omega];
    let mut vec = if r1[0].abs().max(r1[1].abs()) > r2[0].abs().max(r2[1].abs()) {
        [-r1[1], r1[0]]
    } else {
        [-r2[1], r2[0]]
    };
    let norm = vec[0].abs().max(vec[1].abs());
    vec = [vec[0] / norm, vec[1] / norm];
    // Dual row annihilating the other eigenvector.
    let other = roots[0].re.min(roots[1].re);
    let o1 = [a[0][0] - other, a[0][1]];
    let o2 = [a[1][0], a[1][1] - other];
    let orow = if o1[0].abs().max(o1[1].abs()) > o2[0].abs().max(o2[1].abs()) {
        o1
    } else {
        o2
    };
    let proj_norm = orow[0] * vec[0] + orow[1] * vec[1];

    let amp0 = 1e-6;
    let mut field = Field2D::uniform(n_grid, len, state.u, state.v)?;
    for iy in 0..n_grid {
        for ix in 0..n_grid {
            // Mode measured from the left edge so the reflection condition
            // holds on both boundaries.
            let s = ix as f64 * h_grid;
            let c = amp0 * (k * s).cos();
            let i = field.idx(ix, iy);
            field.u[i] += c * vec[0];
            field.v[i] += c * vec[1];
        }
    }

    let steps = (t_short / dt).ceil() as usize;
    let cfg = SimConfig::new(dt, steps as f64 * dt, (0..=steps).map(|s| s as f64 * dt).collect(), state.mu)?;
    let mut amplitudes: Vec<(f64, f64)> = Vec::with_capacity(steps + 1);
    let probe = field.idx(0, n_grid / 2);
    run(model, &field, &cfg, &mut |t, snap| {
        let du = snap.u[probe] - state.u;
        let dv = snap.v[probe] - state.v;
        let a_mode = (orow[0] * du + orow[1] * dv) / (proj_norm * amp0);
        amplitudes.push((t, a_mode));
        Ok(())
    })?;

    // Log-linear fit with window shrinking on poor fit.
    let mut window = amplitudes.len();
    for _ in 0..4 {
        let pts: Vec<(f64, f64)> = amplitudes[..window]
            .iter()
            .filter(|(_, a)| a.abs() > 1e-300)
            .map(|(t, a)| (*t, a.abs().ln()))
            .collect();
        if pts.len() < 4 {
            break;
        }
        let n_pts = pts.len() as f64;
        let mean_t = pts.iter().map(|(t, _)| t).sum::<f64>() / n_pts;
        let mean_y = pts.iter().map(|(_, y)| y).sum::<f64>() / n_pts;
        let sxx: f64 = pts.iter().map(|(t, _)| (t - mean_t) * (t - mean_t)).sum();
        let sxy: f64 = pts
            .iter()
            .map(|(t, y)| (t - mean_t) * (y - mean_y))
            .sum();
        let slope = sxy / sxx;
        let intercept = mean_y - slope * mean_t;
        let worst = pts
            .iter()
            .map(|(t, y)| (y - slope * t - intercept).abs())
            .fold(0.0, f64::max);
        if worst < 0.02 || window <= amplitudes.len() / 4 {
            return Ok(GrowthCheck {
                k,
                k_eff,
                measured: slope,
                reference: omega,
            });
        }
        window /= 2;
    }
    Err(Error::Invalid(
        "growth fit did not stabilise: nonlinear contamination".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria;
    use std::collections::BTreeMap;

    fn diffusion_only(d_v: f64) -> ModelSpec {
        ModelSpec::new("diffusion_only", "0", "0", d_v, 0.0, BTreeMap::new()).unwrap()
    }

    #[test]
    fn diagonalize_identity_without_cross_diffusion() {
        let model = ModelSpec::builtin("kgs", &BTreeMap::new()).unwrap();
        let d = diagonalize(&model).unwrap();
        assert_eq!(d.kappa, 0.0);
        assert_eq!(d.d_v, 7.2);
    }

    #[test]
    fn diagonalize_von_hardenberg_mixing() {
        let model = ModelSpec::builtin("von_hardenberg", &BTreeMap::new()).unwrap();
        let d = diagonalize(&model).unwrap();
        assert!((d.kappa - 300.0 / 99.0).abs() < 1e-14);
        let (u, v) = (0.3, 0.7);
        let (uh, vh) = d.forward(u, v);
        let (ub, vb) = d.inverse(uh, vh);
        assert!((ub - u).abs() < 1e-14 && (vb - v).abs() < 1e-14);
    }

    #[test]
    fn diagonalize_rejects_unit_ratio_with_cross_diffusion() {
        let model = ModelSpec::new("bad", "0", "0", 1.0, 2.0, BTreeMap::new()).unwrap();
        assert!(matches!(diagonalize(&model), Err(Error::SingularTransform)));
    }

    #[test]
    fn tridiagonal_solver_matches_dense_solve() {
        let n = 12;
        let gamma = 0.8;
        let solver = NeumannSolver::new(n, gamma);
        // Dense (I - cL) with ghost-reflected boundary rows.
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = 1.0 + 2.0 * gamma;
            if i == 0 {
                dense[i][1] = -2.0 * gamma;
            } else if i == n - 1 {
                dense[i][n - 2] = -2.0 * gamma;
            } else {
                dense[i][i - 1] = -gamma;
                dense[i][i + 1] = -gamma;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let want = crate::linalg::lu_solve(dense, rhs.clone()).unwrap();
        let mut got = rhs;
        solver.solve_rows(&mut got);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn columns_and_rows_agree_on_transpose() {
        let n = 16;
        let solver = NeumannSolver::new(n, 0.37);
        let mut a: Vec<f64> = (0..n * n).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let mut at = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                at[ix * n + iy] = a[iy * n + ix];
            }
        }
        solver.solve_rows(&mut a);
        solver.solve_cols(&mut at);
        for iy in 0..n {
            for ix in 0..n {
                assert!((a[iy * n + ix] - at[ix * n + iy]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn constants_are_fixed_points_of_pure_diffusion() {
        let model = diffusion_only(5.0);
        let init = Field2D::uniform(64, 10.0, 1.3, -0.4).unwrap();
        let cfg = SimConfig::new(0.1, 5.0, vec![], 0.0).unwrap();
        let out = run(&model, &init, &cfg, &mut |_, _| Ok(())).unwrap();
        // Constants are exact fixed points of the rational stepper up to
        // per-step rounding in the tridiagonal recurrences.
        for &x in &out.u {
            assert!((x - 1.3).abs() < 5e-12);
        }
        for &x in &out.v {
            assert!((x + 0.4).abs() < 5e-12);
        }
    }

    #[test]
    fn pure_diffusion_conserves_weighted_mean() {
        let model = diffusion_only(3.0);
        let n = 64;
        let mut init = Field2D::uniform(n, 12.0, 0.0, 0.0).unwrap();
        for iy in 0..n {
            for ix in 0..n {
                let (x, y) = (init.coord(ix), init.coord(iy));
                let i = init.idx(ix, iy);
                init.u[i] = (-(x * x + y * y) / 4.0).exp();
                init.v[i] = 0.5 * ((0.8 * x).sin() + (1.1 * y).cos());
            }
        }
        let mean_u0 = init.weighted_mean(crate::field::Species::U);
        let mean_v0 = init.weighted_mean(crate::field::Species::V);
        let cfg = SimConfig::new(0.1, 10.0, vec![], 0.0).unwrap();
        let out = run(&model, &init, &cfg, &mut |_, _| Ok(())).unwrap();
        let mean_u = out.weighted_mean(crate::field::Species::U);
        let mean_v = out.weighted_mean(crate::field::Species::V);
        assert!((mean_u - mean_u0).abs() < 1e-12, "u drift {:e}", mean_u - mean_u0);
        assert!((mean_v - mean_v0).abs() < 1e-12, "v drift {:e}", mean_v - mean_v0);
    }

    #[test]
    fn single_mode_decays_at_the_scheme_rate() {
        // For pure diffusion a discrete cosine mode is an exact eigenvector;
        // one step multiplies it by P(z_x) P(z_y) with z = -dt d k_eff^2.
        let model = diffusion_only(2.0);
        let n = 64;
        let len = 10.0;
        let h = len / (n - 1) as f64;
        let dt = 0.05;
        let (jx, jy) = (3.0, 5.0);
        let kx = jx * std::f64::consts::PI / len;
        let ky = jy * std::f64::consts::PI / len;
        let mut init = Field2D::uniform(n, len, 0.0, 0.0).unwrap();
        for iy in 0..n {
            for ix in 0..n {
                let i = init.idx(ix, iy);
                init.u[i] = (kx * ix as f64 * h).cos() * (ky * iy as f64 * h).cos();
            }
        }
        let cfg = SimConfig::new(dt, dt, vec![], 0.0).unwrap();
        let out = run(&model, &init, &cfg, &mut |_, _| Ok(())).unwrap();
        let p = |z: f64| 9.0 / (1.0 - z / 3.0) - 8.0 / (1.0 - z / 4.0);
        let keff2 = |k: f64| (2.0 / (h * h)) * (1.0 - (k * h).cos());
        let factor = p(-dt * 1.0 * keff2(kx)) * p(-dt * 1.0 * keff2(ky));
        for i in 0..init.u.len() {
            assert!(
                (out.u[i] - factor * init.u[i]).abs() < 1e-12,
                "i={i}: {} vs {}",
                out.u[i],
                factor * init.u[i]
            );
        }
    }

    #[test]
    fn uniform_steady_state_is_a_fixed_point() {
        let model = ModelSpec::builtin("kgs", &BTreeMap::new()).unwrap();
        let mu = 1.05;
        let s = equilibria::newton_steady(&model, mu, 1.6, 0.3).unwrap();
        let init = Field2D::uniform(64, 20.0, s.u, s.v).unwrap();
        let cfg = SimConfig::new(0.1, 100.0, vec![], mu).unwrap();
        let out = run(&model, &init, &cfg, &mut |_, _| Ok(())).unwrap();
        for i in 0..out.u.len() {
            assert!((out.u[i] - s.u).abs() < 1e-10, "u drift {:e}", out.u[i] - s.u);
            assert!((out.v[i] - s.v).abs() < 1e-10, "v drift {:e}", out.v[i] - s.v);
        }
    }

    #[test]
    fn blow_up_detected() {
        // u_t = lap u + u from a uniform positive state grows like e^t and
        // must abort with a blow-up error.
        let model = ModelSpec::new("explode", "-u", "0", 1.0, 0.0, BTreeMap::new()).unwrap();
        let init = Field2D::uniform(64, 10.0, 1.0, 0.0).unwrap();
        let cfg = SimConfig::new(0.5, 100.0, vec![], 0.0).unwrap();
        match run(&model, &init, &cfg, &mut |_, _| Ok(())) {
            Err(Error::BlowUp { t, .. }) => assert!(t > 5.0 && t < 40.0, "t = {t}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn snapshots_arrive_in_order_at_nearest_steps() {
        let model = diffusion_only(1.0);
        let init = Field2D::uniform(64, 10.0, 1.0, 1.0).unwrap();
        let cfg = SimConfig::new(0.1, 1.0, vec![0.0, 0.33, 0.5, 1.0], 0.0).unwrap();
        let mut seen = Vec::new();
        run(&model, &init, &cfg, &mut |t, _| {
            seen.push(t);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), 4);
        assert!((seen[0] - 0.0).abs() < 1e-12);
        assert!((seen[1] - 0.3).abs() < 1e-9);
        assert!((seen[2] - 0.5).abs() < 1e-9);
        assert!((seen[3] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn order_two_on_a_coarse_nonlinear_run() {
        // Self-convergence on a small KGS patch: halving dt shrinks the
        // deviation from a dt/8 reference by about 4.
        let model = ModelSpec::builtin("kgs", &BTreeMap::new()).unwrap();
        let mu = 1.05;
        let s = equilibria::newton_steady(&model, mu, 1.6, 0.3).unwrap();
        let n = 64;
        let mut init = Field2D::uniform(n, 40.0, s.u, s.v).unwrap();
        for iy in 0..n {
            for ix in 0..n {
                let (x, y) = (init.coord(ix), init.coord(iy));
                let i = init.idx(ix, iy);
                init.u[i] += 0.2 * (-(x * x + y * y) / 16.0).exp();
                init.v[i] -= 0.1 * (-(x * x + y * y) / 25.0).exp();
            }
        }
        let t_end = 2.0;
        let run_at = |dt: f64| {
            let cfg = SimConfig::new(dt, t_end, vec![], mu).unwrap();
            run(&model, &init, &cfg, &mut |_, _| Ok(())).unwrap()
        };
        let err_at = |dt: f64| {
            let coarse = run_at(dt);
            let fine = run_at(dt / 8.0);
            coarse
                .u
                .iter()
                .zip(&fine.u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err_at(0.1);
        let e2 = err_at(0.05);
        let ratio = e1 / e2;
        assert!(
            (3.5..4.6).contains(&ratio),
            "order ratio {ratio} (e1={e1:e}, e2={e2:e})"
        );
    }
}
