//! Local Turing normal-form data and the qualitative predictors P1-P4.
//!
//! At a Turing point the steady-state system reduces to
//!
//! ```text
//! 0 = lap(U) - M1 U - eps M2 U - Q(U, U) - C(U, U, U) + h.o.t.
//! ```
//!
//! with M1 = M(mu*), M2 = M'(mu*) (derivative along the branch), and Q, C
//! the symmetric bilinear/trilinear forms polarising the quadratic and cubic
//! Taylor terms. The generalised eigenbasis U0, U1 of M1 (repeated eigenvalue
//! -k^2) and its dual basis project the system onto scalar amplitudes, which
//! yields the constants gamma, c0, c3 and the four predictors:
//!
//! * P1 = c0       - direction of bifurcation (sign of eps for patterns),
//! * P2 = [U0]_2/[U0]_1 - in-phase (>0) or anti-phase (<0) u, v deviations,
//! * P3 = [U0]_1/gamma  - polarity: peaks (>0) or gaps (<0),
//! * P4 = c3       - ring-type patterns bifurcate iff P4 < 0.

use crate::equilibria;
use crate::error::{Error, Result};
use crate::linalg::{brent, dot2, mat2_mul_vec, Mat2, Vec2};
use crate::model::ModelSpec;
use crate::turing::{self, TuringPoint};

/// Relative step for the M2 central difference along the branch.
const M2_FD_STEP: f64 = 1e-5;
/// gamma nondegeneracy threshold relative to |Q00|.
const GAMMA_THRESHOLD: f64 = 1e-8;

/// Quadratic coefficient tensor: the six second partials with the 1/2
/// convention, so that `q . (U,U)` is exactly the quadratic Taylor term.
#[derive(Debug, Clone, Copy)]
pub struct QuadTensor {
    /// (uu, uv, vv) coefficients of the f component.
    pub f: [f64; 3],
    /// (uu, uv, vv) coefficients of the g component.
    pub g: [f64; 3],
}

/// Cubic coefficient tensor: the eight third partials with the 1/6
/// convention.
#[derive(Debug, Clone, Copy)]
pub struct CubicTensor {
    /// (uuu, uuv, uvv, vvv) coefficients of the f component.
    pub f: [f64; 4],
    /// (uuu, uuv, uvv, vvv) coefficients of the g component.
    pub g: [f64; 4],
}

#[derive(Debug, Clone, Copy)]
pub struct LocalForm {
    pub m1: Mat2,
    pub m2: Mat2,
    pub q: QuadTensor,
    pub c: CubicTensor,
    pub u0: Vec2,
    pub u1: Vec2,
    pub u0_dual: Vec2,
    pub u1_dual: Vec2,
    pub k: f64,
    pub gamma: f64,
    pub c0: f64,
    pub c3: f64,
    /// Max deviation of the finite-difference Richardson check from the
    /// implicit-differentiation M2; None when the branch is too short for
    /// the stencil (Turing point within 2h of a fold).
    pub m2_fd_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Predictors {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

/// Assemble the local form at a Turing point.
///
/// M2 is a Richardson-extrapolated central difference of M along the
/// continued branch (steps h and h/2 with h = 1e-5 max(1, |mu*|)).
pub fn build_local_form(model: &ModelSpec, tp: &TuringPoint) -> Result<LocalForm> {
    let s = tp.state;
    let m1 = model.jacobian(s.u, s.v, s.mu)?;
    let f_u = m1[0][0];
    let f_v = m1[0][1];
    let scale = m1.iter().flatten().map(|x| x.abs()).sum::<f64>();
    if f_v.abs() <= 1e-12 * scale.max(1.0) {
        return Err(Error::DegenerateEigenbasis { fv: f_v });
    }
    let k2 = tp.k * tp.k;

    let u0 = [f_v, -(k2 + f_u)];
    let u1 = [0.0, k2];
    let u0_dual = [1.0 / f_v, 0.0];
    let u1_dual = [(k2 + f_u) / (k2 * f_v), 1.0 / k2];

    let tensor = model.partial_tensor(s.u, s.v, s.mu, 3)?;
    let q = QuadTensor {
        f: [
            0.5 * tensor.f[&(2, 0, 0)],
            0.5 * tensor.f[&(1, 1, 0)],
            0.5 * tensor.f[&(0, 2, 0)],
        ],
        g: [
            0.5 * tensor.g[&(2, 0, 0)],
            0.5 * tensor.g[&(1, 1, 0)],
            0.5 * tensor.g[&(0, 2, 0)],
        ],
    };
    let c = CubicTensor {
        f: [
            tensor.f[&(3, 0, 0)] / 6.0,
            tensor.f[&(2, 1, 0)] / 6.0,
            tensor.f[&(1, 2, 0)] / 6.0,
            tensor.f[&(0, 3, 0)] / 6.0,
        ],
        g: [
            tensor.g[&(3, 0, 0)] / 6.0,
            tensor.g[&(2, 1, 0)] / 6.0,
            tensor.g[&(1, 2, 0)] / 6.0,
            tensor.g[&(0, 3, 0)] / 6.0,
        ],
    };

    let (m2, m2_fd_gap) = branch_m2(model, tp)?;

    let mut lf = LocalForm {
        m1,
        m2,
        q,
        c,
        u0,
        u1,
        u0_dual,
        u1_dual,
        k: tp.k,
        gamma: 0.0,
        c0: 0.0,
        c3: 0.0,
        m2_fd_gap,
    };
    let q00 = lf.bilinear_q(&u0, &u0);
    let q01 = lf.bilinear_q(&u0, &u1);
    let c000 = lf.trilinear_c(&u0, &u0, &u0);
    lf.gamma = dot2(&u1_dual, &q00);
    lf.c0 = dot2(&u1_dual, &scale2(&mat2_mul_vec(&m2, &u0), -0.25));
    lf.c3 = -(5.0 / 6.0 * dot2(&u0_dual, &q00)
        + 5.0 / 6.0 * dot2(&u1_dual, &q01)
        + 19.0 / 18.0 * dot2(&u1_dual, &q00))
        * dot2(&u1_dual, &q00)
        - 0.75 * dot2(&u1_dual, &c000);
    Ok(lf)
}

fn scale2(v: &Vec2, a: f64) -> Vec2 {
    [a * v[0], a * v[1]]
}

/// M2 = dM/dmu along the branch.
///
/// The branch derivative (u', v') = -M^{-1} (f_mu, g_mu) comes from implicit
/// differentiation of the steady-state equations (M is nonsingular at a
/// Turing point: det M = k^4 > 0), so
///
/// ```text
/// M2[0] = (f_uu u' + f_uv v' + f_umu,  f_uv u' + f_vv v' + f_vmu)
/// M2[1] = (g_uu u' + g_uv v' + g_umu,  g_uv u' + g_vv v' + g_vmu)
/// ```
///
/// A finite-difference stencil along the branch degrades near folds (the
/// branch has a square-root singularity a distance r away and the (h/r)^2
/// truncation cannot reach the oracle tolerance when r is small), so the
/// central-difference Richardson pair is kept only as a consistency check
/// where the stencil fits.
fn branch_m2(model: &ModelSpec, tp: &TuringPoint) -> Result<(Mat2, Option<f64>)> {
    let s = tp.state;
    let t = model.partial_tensor(s.u, s.v, s.mu, 2)?;
    let m = model.jacobian(s.u, s.v, s.mu)?;
    let rhs = [-t.f[&(0, 0, 1)], -t.g[&(0, 0, 1)]];
    let branch_prime = crate::linalg::solve2(&m, &rhs)?;
    let (up, vp) = (branch_prime[0], branch_prime[1]);
    let m2 = [
        [
            t.f[&(2, 0, 0)] * up + t.f[&(1, 1, 0)] * vp + t.f[&(1, 0, 1)],
            t.f[&(1, 1, 0)] * up + t.f[&(0, 2, 0)] * vp + t.f[&(0, 1, 1)],
        ],
        [
            t.g[&(2, 0, 0)] * up + t.g[&(1, 1, 0)] * vp + t.g[&(1, 0, 1)],
            t.g[&(1, 1, 0)] * up + t.g[&(0, 2, 0)] * vp + t.g[&(0, 1, 1)],
        ],
    ];

    let h = M2_FD_STEP * s.mu.abs().max(1.0);
    let gap = fd_richardson_gap(model, &s, &m2, h);
    Ok((m2, gap))
}

/// Richardson-extrapolated central difference of M vs the implicit M2;
/// None when the stencil steps off the branch.
fn fd_richardson_gap(
    model: &ModelSpec,
    s: &equilibria::SteadyState,
    m2: &Mat2,
    h: f64,
) -> Option<f64> {
    let m_at = |mu: f64| -> Result<Mat2> {
        let st = equilibria::continue_branch(model, s, mu)?;
        model.jacobian(st.u, st.v, st.mu)
    };
    let diff = |h: f64| -> Result<Mat2> {
        let plus = m_at(s.mu + h)?;
        let minus = m_at(s.mu - h)?;
        let mut d = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                d[i][j] = (plus[i][j] - minus[i][j]) / (2.0 * h);
            }
        }
        Ok(d)
    };
    let d_h = diff(h).ok()?;
    let d_h2 = diff(0.5 * h).ok()?;
    let mut gap = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let extrapolated = (4.0 * d_h2[i][j] - d_h[i][j]) / 3.0;
            gap = gap.max((extrapolated - m2[i][j]).abs());
        }
    }
    Some(gap)
}

impl LocalForm {
    /// Symmetric bilinear form with Q(U, U) equal to the quadratic Taylor
    /// term.
    pub fn bilinear_q(&self, x: &Vec2, y: &Vec2) -> Vec2 {
        let cross = x[0] * y[1] + x[1] * y[0];
        [
            self.q.f[0] * x[0] * y[0] + self.q.f[1] * cross + self.q.f[2] * x[1] * y[1],
            self.q.g[0] * x[0] * y[0] + self.q.g[1] * cross + self.q.g[2] * x[1] * y[1],
        ]
    }

    /// Symmetric trilinear form with C(U, U, U) equal to the cubic Taylor
    /// term.
    pub fn trilinear_c(&self, x: &Vec2, y: &Vec2, z: &Vec2) -> Vec2 {
        let uuv = x[0] * y[0] * z[1] + x[0] * y[1] * z[0] + x[1] * y[0] * z[0];
        let uvv = x[0] * y[1] * z[1] + x[1] * y[0] * z[1] + x[1] * y[1] * z[0];
        let uuu = x[0] * y[0] * z[0];
        let vvv = x[1] * y[1] * z[1];
        [
            self.c.f[0] * uuu + self.c.f[1] * uuv + self.c.f[2] * uvv + self.c.f[3] * vvv,
            self.c.g[0] * uuu + self.c.g[1] * uuv + self.c.g[2] * uvv + self.c.g[3] * vvv,
        ]
    }

    pub fn q00(&self) -> Vec2 {
        self.bilinear_q(&self.u0, &self.u0)
    }

    /// The four qualitative predictors. Errors if gamma is degenerate
    /// (P3 undefined).
    pub fn predictors(&self) -> Result<Predictors> {
        let q00 = self.q00();
        let q00_norm = q00[0].hypot(q00[1]);
        if self.gamma.abs() <= GAMMA_THRESHOLD * q00_norm {
            return Err(Error::GammaDegenerate {
                gamma: self.gamma,
                threshold: GAMMA_THRESHOLD * q00_norm,
            });
        }
        Ok(Predictors {
            p1: self.c0,
            p2: self.u0[1] / self.u0[0],
            p3: self.u0[0] / self.gamma,
            p4: self.c3,
        })
    }
}

/// Convenience: predictors straight from a model and its Turing point.
pub fn predictors(model: &ModelSpec, tp: &TuringPoint) -> Result<Predictors> {
    build_local_form(model, tp)?.predictors()
}

// ---------------------------------------------------------------------------
// P4 sign map
// ---------------------------------------------------------------------------

/// Per-cell classification of the P4 sign map.
#[derive(Debug, Clone, PartialEq)]
pub enum CellClass {
    /// No Turing point on the swept branch; the reason is recorded.
    NoTuring(String),
    P4Negative,
    P4Positive,
}

impl CellClass {
    pub fn label(&self) -> &'static str {
        match self {
            CellClass::NoTuring(_) => "no-turing",
            CellClass::P4Negative => "P4<0",
            CellClass::P4Positive => "P4>0",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SignMap {
    pub param1: Vec<f64>,
    pub param2: Vec<f64>,
    /// cells[i][j] classifies (param1[i], param2[j]).
    pub cells: Vec<Vec<CellClass>>,
}

/// Classify sign(P4) over a two-parameter grid for a model family.
///
/// `make_model` builds the family member; `anchor` supplies a starting mu
/// and seed state on the branch to sweep. Cells where any stage fails are
/// classified NoTuring with the failure recorded.
pub fn p4_sign_map<F, A>(
    param1: Vec<f64>,
    param2: Vec<f64>,
    make_model: F,
    anchor: A,
) -> SignMap
where
    F: Fn(f64, f64) -> Result<ModelSpec>,
    A: Fn(&ModelSpec) -> Result<(f64, (f64, f64))>,
{
    let mut cells = Vec::with_capacity(param1.len());
    for &p1 in &param1 {
        let mut row = Vec::with_capacity(param2.len());
        for &p2 in &param2 {
            row.push(classify_cell(&make_model, &anchor, p1, p2));
        }
        cells.push(row);
    }
    SignMap {
        param1,
        param2,
        cells,
    }
}

fn classify_cell<F, A>(make_model: &F, anchor: &A, p1: f64, p2: f64) -> CellClass
where
    F: Fn(f64, f64) -> Result<ModelSpec>,
    A: Fn(&ModelSpec) -> Result<(f64, (f64, f64))>,
{
    let stage = (|| -> Result<Predictors> {
        let model = make_model(p1, p2)?;
        let (mu0, seed) = anchor(&model)?;
        let base = equilibria::newton_steady(&model, mu0, seed.0, seed.1)?;
        let tp = branch_turing_scan(&model, &base)?;
        predictors(&model, &tp)
    })();
    match stage {
        Ok(p) if p.p4 < 0.0 => CellClass::P4Negative,
        Ok(_) => CellClass::P4Positive,
        Err(e) => CellClass::NoTuring(e.to_string()),
    }
}

/// Find the first repeated-root crossing along the branch through `base`.
///
/// Walks toward the lower branch end with geometrically shrinking steps
/// (folds are approached, never crossed), then upward with growing steps.
/// This resolves Turing points that sit within O(1e-8) of a fold, where
/// bracket expansion from a fixed guess cannot.
pub fn branch_turing_scan(model: &ModelSpec, base: &equilibria::SteadyState) -> Result<TuringPoint> {
    let scale = base.mu.abs().max(1.0);
    let d_base = turing::discriminant(model, base)?;
    let mut rejection: Option<Error> = None;

    // Downward: halve the step on every failed probe (approaching a fold
    // geometrically, never crossing it), regrow gently on success.
    let mut prev = *base;
    let mut d_prev = d_base;
    let mut step = 0.2 * scale;
    let floor = base.mu - 50.0 * scale;
    while step > 1e-13 * scale && prev.mu > floor {
        match equilibria::branch_probe(model, &prev, prev.mu - step) {
            Ok(next) => {
                let d_next = turing::discriminant(model, &next)?;
                if d_next == 0.0 || d_next.signum() != d_prev.signum() {
                    match turing::turing_from_bracket(model, &next, d_next, &prev, d_prev) {
                        Ok(tp) => return Ok(tp),
                        Err(e) => {
                            rejection.get_or_insert(e);
                        }
                    }
                }
                prev = next;
                d_prev = d_next;
                step = (step * 1.3).min(0.2 * scale);
            }
            Err(_) => step *= 0.5,
        }
    }

    // Upward from the anchor with growing steps.
    let mut prev = *base;
    let mut d_prev = d_base;
    let mut step = 0.05 * scale;
    let cap = base.mu + 50.0 * scale;
    while prev.mu < cap {
        let target = (prev.mu + step).min(cap);
        match equilibria::branch_probe(model, &prev, target) {
            Ok(next) => {
                let d_next = turing::discriminant(model, &next)?;
                if d_next == 0.0 || d_next.signum() != d_prev.signum() {
                    match turing::turing_from_bracket(model, &prev, d_prev, &next, d_next) {
                        Ok(tp) => return Ok(tp),
                        Err(e) => {
                            rejection.get_or_insert(e);
                        }
                    }
                }
                prev = next;
                d_prev = d_next;
                step *= 1.6;
            }
            Err(_) => {
                step *= 0.5;
                if step < 1e-13 * scale {
                    break;
                }
            }
        }
    }
    Err(rejection.unwrap_or(Error::NoSignChange {
        what: "repeated-root condition along branch".into(),
        lo: base.mu - 0.2 * scale,
        hi: cap,
    }))
}

/// The (delta_v, m) sign map for the Klausmeier-Gray-Scott family.
///
/// Anchor: mu0 = 2.5 m sits above the fold at 2m for every cell; the
/// largest-u steady state there is the branch carrying the Turing point.
pub fn kgs_p4_map(delta_v: Vec<f64>, m: Vec<f64>) -> SignMap {
    p4_sign_map(
        delta_v,
        m,
        |dv, m| {
            let mut o = std::collections::BTreeMap::new();
            o.insert("delta_v".to_string(), dv);
            o.insert("m".to_string(), m);
            ModelSpec::builtin("kgs", &o)
        },
        |model| {
            let m = model.params["m"];
            let mu0 = 2.5 * m;
            let found =
                equilibria::find_steady_states(model, mu0, &equilibria::lattice_seeds(6.0, 6.0, 8), false)?;
            let state = found
                .states
                .iter()
                .max_by(|a, b| a.u.total_cmp(&b.u))
                .ok_or_else(|| Error::Invalid("no steady state at anchor".into()))?;
            Ok((mu0, (state.u, state.v)))
        },
    )
}

/// Uniformly spaced grid values over [lo, hi].
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64)
        .collect()
}

/// Locate the P4 sign flip in delta_v at fixed m for the KGS family by
/// bisection on the generic pipeline.
pub fn kgs_p4_flip(m: f64, dv_lo: f64, dv_hi: f64) -> Result<f64> {
    let p4_at = |dv: f64| -> Result<f64> {
        let mut o = std::collections::BTreeMap::new();
        o.insert("delta_v".to_string(), dv);
        o.insert("m".to_string(), m);
        let model = ModelSpec::builtin("kgs", &o)?;
        let mu0 = 2.5 * m;
        let base = equilibria::newton_steady(&model, mu0, 2.0, m / 2.0)?;
        let tp = branch_turing_scan(&model, &base)?;
        Ok(predictors(&model, &tp)?.p4)
    };
    let f_lo = p4_at(dv_lo)?;
    let f_hi = p4_at(dv_hi)?;
    let (flip, _) = brent(p4_at, dv_lo, dv_hi, f_lo, f_hi, 1e-10, 0.0)?;
    Ok(flip)
}
