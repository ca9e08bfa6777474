//! Algebraic matching conditions for localised dihedral patterns.
//!
//! Spot A-type coefficient sequences {a_n} solve the quadratic condition
//!
//! ```text
//! a_n = 2 sum_{j=1}^{N-n} cos(m pi (n-j)/3) a_j a_{n+j}
//!     +   sum_{j=0}^{n}   cos(m pi (n-2j)/3) a_j a_{n-j}
//! ```
//!
//! and ring-type sequences {b_n} solve the cubic condition
//!
//! ```text
//! b_n = sum_{i+j+k=n, |i|,|j|,|k| <= N} (-1)^{m(|i|+|j|-|k|-n)/2} b_|i| b_|j| b_|k|
//! ```
//!
//! for n = 0..N. Solutions are found by damped Newton with an SVD-based
//! nondegeneracy certificate; multistart draws starting coefficients
//! uniformly from [-1, 1] with a seeded, portable generator.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{lu_solve, singular_values};

/// Residual bound for returned solutions.
pub const RESIDUAL_BOUND: f64 = 1e-12;
/// Smallest-singular-value bound certifying nondegeneracy.
pub const MIN_SV_BOUND: f64 = 1e-8;
/// Coefficient vectors closer than this are the same solution.
pub const DISTINCT_TOL: f64 = 1e-6;
const MAX_NEWTON_ITERS: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchKind {
    SpotA,
    Ring,
}

/// A converged nondegenerate solution of a matching condition.
#[derive(Debug, Clone)]
pub struct MatchingSolution {
    pub kind: MatchKind,
    /// Dihedral index m >= 1.
    pub symmetry: usize,
    /// Truncation order N >= 0; coeffs has N+1 entries.
    pub truncation: usize,
    pub coeffs: Vec<f64>,
    /// Max-norm of the matching residual at the solution.
    pub residual: f64,
    /// Smallest singular value of the Jacobian (nondegeneracy certificate).
    pub jac_min_sv: f64,
}

/// cos(m pi p / 3) evaluated exactly: the value only depends on
/// (m p) mod 6 and is one of {1, 1/2, -1/2, -1}.
fn cos_third(m: usize, p: i64) -> f64 {
    const TABLE: [f64; 6] = [1.0, 0.5, -0.5, -1.0, -0.5, 0.5];
    TABLE[(m as i64 * p).rem_euclid(6) as usize]
}

/// Residual of the quadratic (spot A) matching condition; component n is
/// a_n minus the right-hand side.
pub fn spot_a_residual(m: usize, n_trunc: usize, coeffs: &[f64]) -> Result<Vec<f64>> {
    check_lengths(m, n_trunc, coeffs)?;
    let mut res = Vec::with_capacity(n_trunc + 1);
    for n in 0..=n_trunc {
        let mut rhs = 0.0;
        for j in 1..=(n_trunc - n) {
            rhs += 2.0 * cos_third(m, n as i64 - j as i64) * coeffs[j] * coeffs[n + j];
        }
        for j in 0..=n {
            rhs += cos_third(m, n as i64 - 2 * j as i64) * coeffs[j] * coeffs[n - j];
        }
        res.push(coeffs[n] - rhs);
    }
    Ok(res)
}

fn spot_a_jacobian(m: usize, n_trunc: usize, coeffs: &[f64]) -> Vec<Vec<f64>> {
    let size = n_trunc + 1;
    let mut jac = vec![vec![0.0; size]; size];
    for (n, row) in jac.iter_mut().enumerate() {
        row[n] += 1.0;
        for j in 1..=(n_trunc - n) {
            let c = 2.0 * cos_third(m, n as i64 - j as i64);
            row[j] -= c * coeffs[n + j];
            row[n + j] -= c * coeffs[j];
        }
        for j in 0..=n {
            let c = cos_third(m, n as i64 - 2 * j as i64);
            row[j] -= c * coeffs[n - j];
            row[n - j] -= c * coeffs[j];
        }
    }
    jac
}

/// Residual of the cubic (ring) matching condition.
///
/// The sign exponent m(|i|+|j|-|k|-n)/2 is an integer for every index
/// triple with i+j+k = n, since |x| and x share parity; the consistency
/// error is kept for malformed index arithmetic.
pub fn ring_residual(m: usize, n_trunc: usize, coeffs: &[f64]) -> Result<Vec<f64>> {
    check_lengths(m, n_trunc, coeffs)?;
    let n_i = n_trunc as i64;
    let mut res = Vec::with_capacity(n_trunc + 1);
    for n in 0..=n_trunc as i64 {
        let mut rhs = 0.0;
        for i in -n_i..=n_i {
            for j in -n_i..=n_i {
                let k = n - i - j;
                if k.abs() > n_i {
                    continue;
                }
                rhs += ring_sign(m, i, j, k, n)? * coeffs[i.unsigned_abs() as usize]
                    * coeffs[j.unsigned_abs() as usize]
                    * coeffs[k.unsigned_abs() as usize];
            }
        }
        res.push(coeffs[n as usize] - rhs);
    }
    Ok(res)
}

fn ring_sign(m: usize, i: i64, j: i64, k: i64, n: i64) -> Result<f64> {
    let p = i.abs() + j.abs() - k.abs() - n;
    if p.rem_euclid(2) != 0 {
        return Err(Error::SignExponentNonIntegral { i, j, k, n });
    }
    let exponent = m as i64 * (p / 2);
    Ok(if exponent.rem_euclid(2) == 0 { 1.0 } else { -1.0 })
}

fn ring_jacobian(m: usize, n_trunc: usize, coeffs: &[f64]) -> Result<Vec<Vec<f64>>> {
    let size = n_trunc + 1;
    let n_i = n_trunc as i64;
    let mut jac = vec![vec![0.0; size]; size];
    for n in 0..=n_i {
        let row = &mut jac[n as usize];
        row[n as usize] += 1.0;
        for i in -n_i..=n_i {
            for j in -n_i..=n_i {
                let k = n - i - j;
                if k.abs() > n_i {
                    continue;
                }
                let s = ring_sign(m, i, j, k, n)?;
                let (ai, aj, ak) = (
                    i.unsigned_abs() as usize,
                    j.unsigned_abs() as usize,
                    k.unsigned_abs() as usize,
                );
                row[ai] -= s * coeffs[aj] * coeffs[ak];
                row[aj] -= s * coeffs[ai] * coeffs[ak];
                row[ak] -= s * coeffs[ai] * coeffs[aj];
            }
        }
    }
    Ok(jac)
}

fn check_lengths(m: usize, n_trunc: usize, coeffs: &[f64]) -> Result<()> {
    if m == 0 {
        return Err(Error::Invalid("dihedral index m must be >= 1".into()));
    }
    if coeffs.len() != n_trunc + 1 {
        return Err(Error::Invalid(format!(
            "expected {} coefficients, got {}",
            n_trunc + 1,
            coeffs.len()
        )));
    }
    Ok(())
}

fn residual_of(kind: MatchKind, m: usize, n_trunc: usize, coeffs: &[f64]) -> Result<Vec<f64>> {
    match kind {
        MatchKind::SpotA => spot_a_residual(m, n_trunc, coeffs),
        MatchKind::Ring => ring_residual(m, n_trunc, coeffs),
    }
}

fn jacobian_of(kind: MatchKind, m: usize, n_trunc: usize, coeffs: &[f64]) -> Result<Vec<Vec<f64>>> {
    match kind {
        MatchKind::SpotA => Ok(spot_a_jacobian(m, n_trunc, coeffs)),
        MatchKind::Ring => ring_jacobian(m, n_trunc, coeffs),
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Newton-polish a matching solution from an initial guess.
pub fn solve(
    kind: MatchKind,
    m: usize,
    n_trunc: usize,
    initial: &[f64],
) -> Result<MatchingSolution> {
    check_lengths(m, n_trunc, initial)?;
    let mut x = initial.to_vec();
    let mut res = residual_of(kind, m, n_trunc, &x)?;
    let mut res_norm = max_norm(&res);
    for _iter in 0..MAX_NEWTON_ITERS {
        if res_norm < 1e-14 {
            break;
        }
        let jac = jacobian_of(kind, m, n_trunc, &x)?;
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let step = lu_solve(jac, rhs).map_err(|_| Error::MatchingDegenerate {
            min_sv: 0.0,
        })?;
        // Damped update: halve until the residual decreases.
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
            let trial_res = residual_of(kind, m, n_trunc, &trial)?;
            let trial_norm = max_norm(&trial_res);
            if trial_norm < res_norm {
                x = trial;
                res = trial_res;
                res_norm = trial_norm;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
        if !res_norm.is_finite() || res_norm > 1e12 {
            return Err(Error::MatchingDiverged {
                iters: MAX_NEWTON_ITERS,
            });
        }
    }
    if !(res_norm < RESIDUAL_BOUND) {
        return Err(Error::MatchingDiverged {
            iters: MAX_NEWTON_ITERS,
        });
    }
    if max_norm(&x) < 1e-8 {
        return Err(Error::MatchingTrivial);
    }
    let jac = jacobian_of(kind, m, n_trunc, &x)?;
    let sv = singular_values(&jac);
    let min_sv = *sv.last().unwrap();
    if min_sv <= MIN_SV_BOUND {
        return Err(Error::MatchingDegenerate { min_sv });
    }
    Ok(MatchingSolution {
        kind,
        symmetry: m,
        truncation: n_trunc,
        coeffs: x,
        residual: res_norm,
        jac_min_sv: min_sv,
    })
}

pub fn solve_spot_a(m: usize, n_trunc: usize, initial: &[f64]) -> Result<MatchingSolution> {
    solve(MatchKind::SpotA, m, n_trunc, initial)
}

pub fn solve_ring(m: usize, n_trunc: usize, initial: &[f64]) -> Result<MatchingSolution> {
    solve(MatchKind::Ring, m, n_trunc, initial)
}

/// Multistart search: `trials` uniform draws from [-1, 1]^{N+1}, converged
/// solutions deduplicated (modulo the b -> -b symmetry for ring solutions:
/// the cubic residual is odd) and sorted for deterministic output.
pub fn multistart(
    kind: MatchKind,
    m: usize,
    n_trunc: usize,
    trials: usize,
    rng_seed: u64,
) -> Result<Vec<MatchingSolution>> {
    if trials == 0 {
        return Err(Error::Invalid("multistart needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut found: Vec<MatchingSolution> = Vec::new();
    for _ in 0..trials {
        let initial: Vec<f64> = (0..=n_trunc).map(|_| rng.random_range(-1.0..1.0)).collect();
        let Ok(mut sol) = solve(kind, m, n_trunc, &initial) else {
            continue;
        };
        if kind == MatchKind::Ring {
            canonicalize_ring(&mut sol.coeffs);
        }
        let duplicate = found.iter().any(|other| {
            other
                .coeffs
                .iter()
                .zip(&sol.coeffs)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                <= DISTINCT_TOL
        });
        if !duplicate {
            found.push(sol);
        }
    }
    found.sort_by(|a, b| {
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        std::cmp::Ordering::Equal
    });
    Ok(found)
}

/// Flip the overall sign so the first nonzero coefficient is positive.
fn canonicalize_ring(coeffs: &mut [f64]) {
    if let Some(first) = coeffs.iter().find(|c| c.abs() > 1e-12) {
        if *first < 0.0 {
            for c in coeffs.iter_mut() {
                *c = -*c;
            }
        }
    }
}

/// The three bundled spot A coefficient sets (3-decimal seeds, polished by
/// Newton before use in profiles).
pub mod seeds {
    /// (m, N, seed coefficients)
    pub const HEXAGON: (usize, usize, [f64; 3]) = (6, 2, [0.311, 0.267, 0.189]);
    pub const SQUARE: (usize, usize, [f64; 6]) =
        (4, 5, [-0.136, 0.262, 0.236, -0.114, 0.187, 0.145]);
    pub const PENTAGON: (usize, usize, [f64; 4]) = (5, 3, [-0.382, 0.300, 0.382, 0.486]);
}
