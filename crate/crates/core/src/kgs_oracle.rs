//! Hand-derived closed forms for the Klausmeier-Gray-Scott model.
//!
//! For `u_t = lap u + v u^2 - m u`, `v_t = delta_v lap v + mu - v - v u^2`
//! everything about the Turing point is explicit in terms of s = delta_v m:
//! the two repeated-root branch values, the wave number, and all four
//! predictors. The expressions here are transcribed independently of the
//! generic symbolic pipeline and serve as its oracle; intermediate
//! projections (Q00, Q01, C000 contractions) are exposed for term-by-term
//! comparison.

use crate::equilibria;
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};
use crate::localform;
use crate::model::ModelSpec;

/// Fraction of |closed-form value| allowed as deviation in oracle_compare.
pub const ORACLE_REL_TOL: f64 = 1e-7;

/// Repeated positive spatial eigenvalue branch (u*^+): always a
/// Belyakov-Devaney point, never a Turing point.
#[derive(Debug, Clone, Copy)]
pub struct BdPoint {
    pub u_star: f64,
    pub v_star: f64,
    pub mu_star: f64,
    /// Repeated eigenvalue, positive for all delta_v m > 0 where it exists.
    pub lambda: f64,
}

/// Turing branch data (u*^-), present iff delta_v m > 2.
#[derive(Debug, Clone, Copy)]
pub struct KgsTuring {
    pub u_star: f64,
    pub v_star: f64,
    pub mu_star: f64,
    /// Repeated eigenvalue -k^2 (negative).
    pub lambda: f64,
    pub k: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub gamma: f64,
    pub m2: Mat2,
    /// Common direction of Q00, Q01, C000: (-u*^2, (m-k^2)^2 / 2m).
    pub nonlinear_direction: Vec2,
    /// Scalar prefactors of Q00, Q01, C000 on that direction.
    pub q00_factor: f64,
    pub q01_factor: f64,
    pub c000_factor: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct KgsClosedForm {
    pub m: f64,
    pub delta_v: f64,
    /// Present iff delta_v m >= 1 (where the repeated-root values are real).
    pub bd: Option<BdPoint>,
    /// Present iff delta_v m > 2.
    pub turing: Option<KgsTuring>,
}

/// Evaluate the closed forms at (m, delta_v). Requires delta_v m > 0.
pub fn closed_form(m: f64, delta_v: f64) -> Result<KgsClosedForm> {
    let s = delta_v * m;
    if !(s > 0.0) {
        return Err(Error::Invalid(format!(
            "closed form needs delta_v m > 0, got {s}"
        )));
    }
    let mut out = KgsClosedForm {
        m,
        delta_v,
        bd: None,
        turing: None,
    };
    if s < 1.0 {
        return Ok(out);
    }
    let root = (8.0 * s * s - 8.0 * s).sqrt();

    // u*^+ branch: repeated eigenvalue lambda^+ > 0 for all s.
    let u_plus = (3.0 * s - 1.0 + root).sqrt();
    let lambda_plus = (s + (s * s + (s - 2.0) * s).sqrt()) / delta_v;
    out.bd = Some(BdPoint {
        u_star: u_plus,
        v_star: m / u_plus,
        mu_star: m * (1.0 + u_plus * u_plus) / u_plus,
        lambda: lambda_plus,
    });
    if s <= 2.0 {
        return Ok(out);
    }

    // u*^- branch: the Turing point.
    let u = (3.0 * s - 1.0 - root).sqrt();
    let u2 = u * u;
    let mu_star = m * (1.0 + u2) / u;
    let k2 = ((2.0 * s * s - 2.0 * s).sqrt() - s) / delta_v;
    let k = k2.sqrt();
    let a = m - k2;
    let b = m - 2.0 * k2;
    let c = m + k2;

    let p1 = u * a * a * c / (4.0 * k2 * m * m * (u2 - 1.0));
    let p2 = -a / u2;
    let p3 = -2.0 * u * m * k2 / (b * a * c);
    let p4 = 5.0 / 6.0 * (u2 * b * b * a * c / (2.0 * m * k2))
        - 5.0 / 6.0 * (u2 * b * a * a * c * c / (4.0 * m * m * k2))
        - 19.0 / 18.0 * (u2 * b * b * a * a * c * c / (4.0 * m * m * k2 * k2))
        + 3.0 / 4.0 * (u2 * a * a * c / (2.0 * m * k2));
    let gamma = u * b * a * c / (2.0 * m * k2);
    let m2 = [
        [0.0, -2.0 * u * u2 / (m * (u2 - 1.0))],
        [0.0, u * a * a / (m * m * (u2 - 1.0))],
    ];

    out.turing = Some(KgsTuring {
        u_star: u,
        v_star: m / u,
        mu_star,
        lambda: -k2,
        k,
        p1,
        p2,
        p3,
        p4,
        gamma,
        m2,
        nonlinear_direction: [-u2, a * a / (2.0 * m)],
        q00_factor: -u * b,
        q01_factor: -k2 * u,
        c000_factor: u2 * a,
    });
    Ok(out)
}

/// One compared quantity in an oracle report.
#[derive(Debug, Clone)]
pub struct Deviation {
    pub name: &'static str,
    pub closed: f64,
    pub pipeline: f64,
    pub relative: f64,
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub m: f64,
    pub delta_v: f64,
    pub deviations: Vec<Deviation>,
}

impl OracleReport {
    pub fn max_relative(&self) -> f64 {
        self.deviations
            .iter()
            .map(|d| d.relative)
            .fold(0.0, f64::max)
    }

    pub fn pass(&self) -> bool {
        self.max_relative() < ORACLE_REL_TOL
    }
}

/// Run the generic pipeline on the KGS model at (m, delta_v) and compare
/// mu*, u*, k and P1..P4 against the closed forms.
///
/// Requires delta_v m > 2.05: a margin off the fold boundary where both
/// routes are well conditioned.
pub fn oracle_compare(m: f64, delta_v: f64) -> Result<OracleReport> {
    let s = delta_v * m;
    if !(s > 2.05) {
        return Err(Error::Invalid(format!(
            "oracle_compare needs delta_v m > 2.05, got {s}"
        )));
    }
    let closed = closed_form(m, delta_v)?;
    let ct = closed.turing.expect("delta_v m > 2.05 has a Turing branch");

    let mut overrides = std::collections::BTreeMap::new();
    overrides.insert("m".to_string(), m);
    overrides.insert("delta_v".to_string(), delta_v);
    let model = ModelSpec::builtin("kgs", &overrides)?;
    // The closed-form point seeds the search; the pipeline still has to
    // converge on its own root.
    let base = equilibria::newton_steady(&model, 2.5 * m, 2.0, m / 2.0)?;
    let tp = localform::branch_turing_scan(&model, &base)?;
    let p = localform::predictors(&model, &tp)?;

    let quantities = [
        ("mu_star", ct.mu_star, tp.mu()),
        ("u_star", ct.u_star, tp.state.u),
        ("k", ct.k, tp.k),
        ("P1", ct.p1, p.p1),
        ("P2", ct.p2, p.p2),
        ("P3", ct.p3, p.p3),
        ("P4", ct.p4, p.p4),
    ];
    let deviations = quantities
        .iter()
        .map(|(name, closed, pipeline)| Deviation {
            name,
            closed: *closed,
            pipeline: *pipeline,
            relative: (pipeline - closed).abs() / closed.abs().max(1e-300),
        })
        .collect();
    Ok(OracleReport {
        m,
        delta_v,
        deviations,
    })
}
