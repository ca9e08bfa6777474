//! Two-component reaction-diffusion models.
//!
//! The PDE convention throughout the crate is
//!
//! ```text
//! u_t = lap(u) - fhat(u, v; mu)
//! v_t = D_v lap(v - beta u) - ghat(u, v; mu)
//! ```
//!
//! Steady-state analysis works with the rescaled reactions `f = fhat` and
//! `g = ghat / D_v + beta fhat`, so that both stationary equations share the
//! plain Laplacian. Built-in models are defined as parsed expressions rather
//! than hand-coded derivatives: every model exercises the same symbolic
//! pipeline, and the closed-form oracle module provides the independent
//! cross-check for the Klausmeier-Gray-Scott case.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::expr::{self, Bindings, Expr, Var};
use crate::linalg::Mat2;

/// A two-component reaction-diffusion model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub fhat: Expr,
    pub ghat: Expr,
    /// Diffusion ratio D_v > 0.
    pub d_v: f64,
    /// Cross-diffusion rate beta >= 0.
    pub beta: f64,
    pub params: BTreeMap<String, f64>,
    derivs: ReactionDerivs,
}

/// Cached symbolic partials of the effective reactions (f, g) up to third
/// order in (u, v) and second order in mu, plus first partials of the raw
/// (fhat, ghat) for the time-dependent dispersion relation.
#[derive(Debug, Clone)]
struct ReactionDerivs {
    f: BTreeMap<(u8, u8, u8), Expr>,
    g: BTreeMap<(u8, u8, u8), Expr>,
    fhat_u: Expr,
    fhat_v: Expr,
    ghat_u: Expr,
    ghat_v: Expr,
}

pub const MAX_PARTIAL_ORDER: u8 = 3;
pub const MAX_MU_ORDER: u8 = 2;

impl ModelSpec {
    pub fn new(
        name: &str,
        fhat_src: &str,
        ghat_src: &str,
        d_v: f64,
        beta: f64,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        if !(d_v > 0.0) || !d_v.is_finite() {
            return Err(Error::Invalid(format!("D_v must be positive, got {d_v}")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Invalid(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        if let Some((k, x)) = params.iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::Invalid(format!("parameter `{k}` is not finite: {x}")));
        }
        let names: Vec<String> = params.keys().cloned().collect();
        let fhat = expr::parse(fhat_src, &names)?;
        let ghat = expr::parse(ghat_src, &names)?;
        let derivs = ReactionDerivs::build(&fhat, &ghat, d_v, beta);
        Ok(ModelSpec {
            name: name.to_string(),
            fhat,
            ghat,
            d_v,
            beta,
            params,
            derivs,
        })
    }

    /// A built-in model with its published default parameters, optionally
    /// overridden. Override keys are the model's parameter names plus
    /// `delta_v` and `beta`.
    pub fn builtin(name: &str, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let (fhat, ghat, mut d_v, mut beta, defaults): (&str, &str, f64, f64, Vec<(&str, f64)>) =
            match name {
                "kgs" => (
                    "-v*u^2 + m*u",
                    "-mu + v + v*u^2",
                    7.2,
                    0.0,
                    vec![("m", 0.5)],
                ),
                "logistic_klausmeier" => (
                    "-(1 - b*u)*v*u^2 + m*u",
                    "-mu + v + v*u^2",
                    182.5,
                    0.0,
                    vec![("b", 1.0), ("m", 0.45)],
                ),
                "nfc_gilad" => (
                    "-lambda*v*u*(1 - u)*(1 + eta*u)^2 + u",
                    "-mu + nu*(1 - rho*u)*v + lambda*v*u*(1 + eta*u)^2",
                    125.0,
                    0.0,
                    vec![
                        ("lambda", 16.0 / 35.0),
                        ("eta", 14.0 / 5.0),
                        ("nu", 10.0 / 7.0),
                        ("rho", 7.0 / 10.0),
                    ],
                ),
                "von_hardenberg" => (
                    "-gamma*v*u/(1 + sigma*v) + u^2 + nu*u",
                    "-mu + (1 - rho*u)*v + u*v^2",
                    100.0,
                    3.0,
                    vec![
                        ("gamma", 1.6),
                        ("sigma", 1.6),
                        ("nu", 0.2),
                        ("rho", 1.5),
                    ],
                ),
                _ => return Err(Error::UnknownModel(name.to_string())),
            };
        let mut params: BTreeMap<String, f64> =
            defaults.iter().map(|(k, x)| (k.to_string(), *x)).collect();
        for (key, value) in overrides {
            match key.as_str() {
                "delta_v" | "d_v" => d_v = *value,
                "beta" => beta = *value,
                k if params.contains_key(k) => {
                    params.insert(k.to_string(), *value);
                }
                k => return Err(Error::UnknownParameter(k.to_string())),
            }
        }
        Self::new(name, fhat, ghat, d_v, beta, params)
    }

    /// The effective steady-state reactions `f = fhat`,
    /// `g = ghat / D_v + beta fhat` as symbolic expressions.
    pub fn effective_reaction(&self) -> (Expr, Expr) {
        (
            self.fhat.clone(),
            effective_g(&self.fhat, &self.ghat, self.d_v, self.beta),
        )
    }

    fn bindings(&self, u: f64, v: f64, mu: f64) -> Bindings<'_> {
        Bindings::new(u, v, mu, &self.params)
    }

    /// (f, g) evaluated at a point.
    pub fn reaction(&self, u: f64, v: f64, mu: f64) -> Result<(f64, f64)> {
        let b = self.bindings(u, v, mu);
        Ok((
            expr::evaluate(self.derivs.f(0, 0, 0), &b)?,
            expr::evaluate(self.derivs.g(0, 0, 0), &b)?,
        ))
    }

    /// (fhat, ghat) evaluated at a point.
    pub fn raw_reaction(&self, u: f64, v: f64, mu: f64) -> Result<(f64, f64)> {
        let b = self.bindings(u, v, mu);
        Ok((
            expr::evaluate(&self.fhat, &b)?,
            expr::evaluate(&self.ghat, &b)?,
        ))
    }

    /// One partial of f or g: d^a/du^a d^b/dv^b d^c/dmu^c.
    pub fn partial(&self, which: Component, a: u8, b: u8, c: u8, u: f64, v: f64, mu: f64) -> Result<f64> {
        let e = match which {
            Component::F => self.derivs.f(a, b, c),
            Component::G => self.derivs.g(a, b, c),
        };
        expr::evaluate(e, &self.bindings(u, v, mu)).map_err(|err| Error::Eval {
            context: partial_name(which, a, b, c),
            msg: err.to_string(),
        })
    }

    /// The linearisation M(mu) = [[f_u, f_v], [g_u, g_v]] at a point.
    pub fn jacobian(&self, u: f64, v: f64, mu: f64) -> Result<Mat2> {
        Ok([
            [
                self.partial(Component::F, 1, 0, 0, u, v, mu)?,
                self.partial(Component::F, 0, 1, 0, u, v, mu)?,
            ],
            [
                self.partial(Component::G, 1, 0, 0, u, v, mu)?,
                self.partial(Component::G, 0, 1, 0, u, v, mu)?,
            ],
        ])
    }

    /// First partials of the raw reactions for the time-dependent dispersion
    /// relation.
    pub fn raw_jacobian(&self, u: f64, v: f64, mu: f64) -> Result<Mat2> {
        let b = self.bindings(u, v, mu);
        Ok([
            [
                expr::evaluate(&self.derivs.fhat_u, &b)?,
                expr::evaluate(&self.derivs.fhat_v, &b)?,
            ],
            [
                expr::evaluate(&self.derivs.ghat_u, &b)?,
                expr::evaluate(&self.derivs.ghat_v, &b)?,
            ],
        ])
    }

    /// Every partial of (f, g) in (u, v) up to `max_order`, plus mu-mixed
    /// partials up to second order in mu.
    pub fn partial_tensor(&self, u: f64, v: f64, mu: f64, max_order: u8) -> Result<PartialTensor> {
        if max_order == 0 || max_order > MAX_PARTIAL_ORDER {
            return Err(Error::Invalid(format!(
                "max_order must be in 1..={MAX_PARTIAL_ORDER}, got {max_order}"
            )));
        }
        let mut f = BTreeMap::new();
        let mut g = BTreeMap::new();
        for a in 0..=max_order {
            for b in 0..=(max_order - a) {
                for c in 0..=MAX_MU_ORDER {
                    f.insert((a, b, c), self.partial(Component::F, a, b, c, u, v, mu)?);
                    g.insert((a, b, c), self.partial(Component::G, a, b, c, u, v, mu)?);
                }
            }
        }
        Ok(PartialTensor { f, g })
    }
}

/// Which effective reaction component a partial refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    F,
    G,
}

fn partial_name(which: Component, a: u8, b: u8, c: u8) -> String {
    let mut s = String::from(match which {
        Component::F => "f",
        Component::G => "g",
    });
    if a + b + c > 0 {
        s.push('_');
        (0..a).for_each(|_| s.push('u'));
        (0..b).for_each(|_| s.push('v'));
        (0..c).for_each(|_| {
            let _ = write!(s, "mu");
        });
    }
    s
}

/// Evaluated partials keyed by (order_u, order_v, order_mu).
#[derive(Debug, Clone)]
pub struct PartialTensor {
    pub f: BTreeMap<(u8, u8, u8), f64>,
    pub g: BTreeMap<(u8, u8, u8), f64>,
}

fn effective_g(fhat: &Expr, ghat: &Expr, d_v: f64, beta: f64) -> Expr {
    expr::simplify(Expr::Add(
        Box::new(Expr::Div(
            Box::new(ghat.clone()),
            Box::new(Expr::Num(d_v)),
        )),
        Box::new(Expr::Mul(
            Box::new(Expr::Num(beta)),
            Box::new(fhat.clone()),
        )),
    ))
}

impl ReactionDerivs {
    fn build(fhat: &Expr, ghat: &Expr, d_v: f64, beta: f64) -> Self {
        let f0 = fhat.clone();
        let g0 = effective_g(fhat, ghat, d_v, beta);
        let mut f = BTreeMap::new();
        let mut g = BTreeMap::new();
        for (map, base) in [(&mut f, &f0), (&mut g, &g0)] {
            for a in 0..=MAX_PARTIAL_ORDER {
                for b in 0..=(MAX_PARTIAL_ORDER - a) {
                    for c in 0..=MAX_MU_ORDER {
                        let mut e = base.clone();
                        for _ in 0..a {
                            e = expr::differentiate(&e, Var::U);
                        }
                        for _ in 0..b {
                            e = expr::differentiate(&e, Var::V);
                        }
                        for _ in 0..c {
                            e = expr::differentiate(&e, Var::Mu);
                        }
                        map.insert((a, b, c), e);
                    }
                }
            }
        }
        ReactionDerivs {
            f,
            g,
            fhat_u: expr::differentiate(fhat, Var::U),
            fhat_v: expr::differentiate(fhat, Var::V),
            ghat_u: expr::differentiate(ghat, Var::U),
            ghat_v: expr::differentiate(ghat, Var::V),
        }
    }

    fn f(&self, a: u8, b: u8, c: u8) -> &Expr {
        &self.f[&(a, b, c)]
    }

    fn g(&self, a: u8, b: u8, c: u8) -> &Expr {
        &self.g[&(a, b, c)]
    }
}

// ---------------------------------------------------------------------------
// Model config files
// ---------------------------------------------------------------------------

/// Parse a model definition from the line-oriented config format:
///
/// ```text
/// name = "custom"
/// fhat = "-v*u^2 + m*u"
/// ghat = "-mu + v + v*u^2"
/// d_v = 7.2
/// beta = 0.0
///
/// [params]
/// m = 0.5
/// ```
pub fn from_config_str(text: &str) -> Result<ModelSpec> {
    let mut name = String::from("custom");
    let mut fhat: Option<String> = None;
    let mut ghat: Option<String> = None;
    let mut d_v: Option<f64> = None;
    let mut beta = 0.0;
    let mut params = BTreeMap::new();
    let mut in_params = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "[params]" {
            in_params = true;
            continue;
        }
        if line.starts_with('[') {
            return Err(Error::Config {
                line: line_no,
                msg: format!("unknown section `{line}`"),
            });
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            msg: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let unquote = |v: &str| -> String { v.trim_matches('"').to_string() };
        let number = |v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| Error::Config {
                line: line_no,
                msg: format!("expected a number, got `{v}`"),
            })
        };
        if in_params {
            params.insert(key.to_string(), number(value)?);
        } else {
            match key {
                "name" => name = unquote(value),
                "fhat" => fhat = Some(unquote(value)),
                "ghat" => ghat = Some(unquote(value)),
                "d_v" | "delta_v" => d_v = Some(number(value)?),
                "beta" => beta = number(value)?,
                _ => {
                    return Err(Error::Config {
                        line: line_no,
                        msg: format!("unknown key `{key}`"),
                    })
                }
            }
        }
    }
    let fhat = fhat.ok_or(Error::Config {
        line: 0,
        msg: "missing `fhat`".into(),
    })?;
    let ghat = ghat.ok_or(Error::Config {
        line: 0,
        msg: "missing `ghat`".into(),
    })?;
    let d_v = d_v.ok_or(Error::Config {
        line: 0,
        msg: "missing `d_v`".into(),
    })?;
    ModelSpec::new(&name, &fhat, &ghat, d_v, beta, params)
}

pub fn from_config_file(path: &std::path::Path) -> Result<ModelSpec> {
    from_config_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng_points(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<(f64, f64, f64)> {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            lo + (hi - lo) * ((state >> 11) as f64 / (1u64 << 53) as f64)
        };
        (0..n).map(|_| (next(), next(), next())).collect()
    }

    #[test]
    fn builtin_kgs_matches_closed_reactions() {
        let m = ModelSpec::builtin("kgs", &BTreeMap::new()).unwrap();
        assert_eq!(m.beta, 0.0);
        assert_eq!(m.d_v, 7.2);
        for (u, v, mu) in rng_points(20, 0.1, 2.0, 7) {
            let (fh, gh) = m.raw_reaction(u, v, mu).unwrap();
            assert!((fh - (-v * u * u + 0.5 * u)).abs() < 1e-14);
            assert!((gh - (-mu + v + v * u * u)).abs() < 1e-14);
        }
    }

    #[test]
    fn builtin_von_hardenberg_has_cross_diffusion() {
        let m = ModelSpec::builtin("von_hardenberg", &BTreeMap::new()).unwrap();
        assert_eq!(m.beta, 3.0);
        assert_eq!(m.d_v, 100.0);
    }

    #[test]
    fn unknown_model_rejected() {
        assert!(matches!(
            ModelSpec::builtin("gray_scott_3d", &BTreeMap::new()),
            Err(Error::UnknownModel(_))
        ));
    }

    #[test]
    fn unknown_override_rejected() {
        let mut o = BTreeMap::new();
        o.insert("zeta".to_string(), 1.0);
        assert!(matches!(
            ModelSpec::builtin("kgs", &o),
            Err(Error::UnknownParameter(_))
        ));
    }

    #[test]
    fn effective_reaction_reduces_for_beta_zero() {
        let m = ModelSpec::builtin("kgs", &BTreeMap::new()).unwrap();
        let (_, g) = m.effective_reaction();
        for (u, v, mu) in rng_points(20, 0.1, 2.0, 11) {
            let got = expr::evaluate(&g, &Bindings::new(u, v, mu, &m.params)).unwrap();
            let want = (-mu + v + v * u * u) / 7.2;
            assert!((got - want).abs() < 1e-13 * want.abs().max(1.0));
        }
    }

    #[test]
    fn effective_reactions_match_hand_coded_forms() {
        // 50 random points per model against independently written closures.
        type Closure = Box<dyn Fn(f64, f64, f64) -> (f64, f64)>;
        let cases: Vec<(&str, Closure)> = vec![
            (
                "kgs",
                Box::new(|u, v, mu| {
                    let f = -v * u * u + 0.5 * u;
                    (f, (-mu + v + v * u * u) / 7.2)
                }),
            ),
            (
                "logistic_klausmeier",
                Box::new(|u, v, mu| {
                    let f = -(1.0 - u) * v * u * u + 0.45 * u;
                    (f, (-mu + v + v * u * u) / 182.5)
                }),
            ),
            (
                "nfc_gilad",
                Box::new(|u, v, mu| {
                    let (l, eta, nu, rho) = (16.0 / 35.0, 2.8, 10.0 / 7.0, 0.7);
                    let w = 1.0 + eta * u;
                    let f = -l * v * u * (1.0 - u) * w * w + u;
                    (
                        f,
                        (-mu + nu * (1.0 - rho * u) * v + l * v * u * w * w) / 125.0,
                    )
                }),
            ),
            (
                "von_hardenberg",
                Box::new(|u, v, mu| {
                    let (g_, s, nu, rho) = (1.6, 1.6, 0.2, 1.5);
                    let f = -g_ * v * u / (1.0 + s * v) + u * u + nu * u;
                    let gh = -mu + (1.0 - rho * u) * v + u * v * v;
                    (f, gh / 100.0 + 3.0 * f)
                }),
            ),
        ];
        for (name, closure) in cases {
            let m = ModelSpec::builtin(name, &BTreeMap::new()).unwrap();
            for (u, v, mu) in rng_points(50, 0.05, 2.0, 23) {
                let (f, g) = m.reaction(u, v, mu).unwrap();
                let (fw, gw) = closure(u, v, mu);
                assert!(
                    ((f - fw) / fw.abs().max(1.0)).abs() < 1e-12,
                    "{name} f at ({u},{v},{mu})"
                );
                assert!(
                    ((g - gw) / gw.abs().max(1.0)).abs() < 1e-12,
                    "{name} g at ({u},{v},{mu})"
                );
            }
        }
    }

    #[test]
    fn kgs_partials() {
        let m = ModelSpec::builtin("kgs", &BTreeMap::new()).unwrap();
        for (u, v, mu) in rng_points(10, 0.2, 1.8, 3) {
            // f = -v u^2 + m u
            let fu = m.partial(Component::F, 1, 0, 0, u, v, mu).unwrap();
            assert!((fu - (-2.0 * u * v + 0.5)).abs() < 1e-14);
            let fuuu = m.partial(Component::F, 3, 0, 0, u, v, mu).unwrap();
            assert_eq!(fuuu, 0.0);
            let fuuv = m.partial(Component::F, 2, 1, 0, u, v, mu).unwrap();
            assert!((fuuv - (-2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn mixed_partials_commute() {
        for name in ["kgs", "logistic_klausmeier", "nfc_gilad", "von_hardenberg"] {
            let m = ModelSpec::builtin(name, &BTreeMap::new()).unwrap();
            let (f, g) = m.effective_reaction();
            for e in [f, g] {
                let uv = expr::differentiate(&expr::differentiate(&e, Var::U), Var::V);
                let vu = expr::differentiate(&expr::differentiate(&e, Var::V), Var::U);
                for (u, v, mu) in rng_points(20, 0.1, 1.5, 31) {
                    let b = Bindings::new(u, v, mu, &m.params);
                    let a = expr::evaluate(&uv, &b).unwrap();
                    let c = expr::evaluate(&vu, &b).unwrap();
                    assert!((a - c).abs() < 1e-12 * a.abs().max(1.0), "{name}");
                }
            }
        }
    }

    /// Fourth-order central difference of order `ord` in one variable.
    fn fd4(f: &dyn Fn(f64) -> f64, x: f64, h: f64, ord: u8) -> f64 {
        match ord {
            0 => f(x),
            1 => (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h),
            2 => {
                (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h)
                    - f(x - 2.0 * h))
                    / (12.0 * h * h)
            }
            3 => {
                (-f(x + 3.0 * h) + 8.0 * f(x + 2.0 * h) - 13.0 * f(x + h) + 13.0 * f(x - h)
                    - 8.0 * f(x - 2.0 * h)
                    + f(x - 3.0 * h))
                    / (8.0 * h * h * h)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn builtin_derivatives_match_finite_differences() {
        // Symbolic partials vs fourth-order central differences, all (u,v)
        // partials up to order 3, 100 random points per model.
        let h = 0.008;
        for name in ["kgs", "logistic_klausmeier", "nfc_gilad", "von_hardenberg"] {
            let m = ModelSpec::builtin(name, &BTreeMap::new()).unwrap();
            for (u, v, mu) in rng_points(100, 0.15, 1.6, 101) {
                for (a, b) in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)]
                {
                    for comp in [Component::F, Component::G] {
                        let sym = m.partial(comp, a, b, 0, u, v, mu).unwrap();
                        let base = |uu: f64, vv: f64| -> f64 {
                            let (fv, gv) = m.reaction(uu, vv, mu).unwrap();
                            match comp {
                                Component::F => fv,
                                Component::G => gv,
                            }
                        };
                        let in_v = |uu: f64| -> Box<dyn Fn(f64) -> f64 + '_> {
                            Box::new(move |vv| base(uu, vv))
                        };
                        let dv_at = |uu: f64| fd4(&*in_v(uu), v, h, b);
                        let fd = fd4(&dv_at, u, h, a);
                        let scale = sym.abs().max(1.0);
                        assert!(
                            ((sym - fd) / scale).abs() < 1e-6,
                            "{name} d^{a}u d^{b}v {comp:?} at ({u:.4},{v:.4},{mu:.4}): sym {sym}, fd {fd}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn config_round_trip() {
        let text = r#"
# Klausmeier-Gray-Scott written as a config file.
name = "kgs_file"
fhat = "-v*u^2 + m*u"
ghat = "-mu + v + v*u^2"
d_v = 7.2
beta = 0.0

[params]
m = 0.5
"#;
        let m = from_config_str(text).unwrap();
        assert_eq!(m.name, "kgs_file");
        let builtin = ModelSpec::builtin("kgs", &BTreeMap::new()).unwrap();
        for (u, v, mu) in [(0.5, 0.5, 1.0), (1.071, 0.467, 1.002)] {
            let a = m.reaction(u, v, mu).unwrap();
            let b = builtin.reaction(u, v, mu).unwrap();
            assert!((a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-15);
        }
    }

    #[test]
    fn config_rejects_unknown_key() {
        let text = "fhat = \"u\"\nghat = \"v\"\nd_v = 1.0\nwhatever = 2\n";
        assert!(matches!(
            from_config_str(text),
            Err(Error::Config { line: 4, .. })
        ));
    }
}
