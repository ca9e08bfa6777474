//! Small dense linear algebra: 2-vectors, 2x2 matrices, LU solves and a
//! Jacobi eigensolver for the matching-condition Jacobians.
//!
//! Everything here operates on stack arrays or `Vec<f64>` rows; the systems
//! in this crate are tiny (2x2 for steady states, (N+1)x(N+1) with N <= ~8
//! for matching conditions), so no external linear algebra crate is pulled in.

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub fn mat2_mul_vec(m: &Mat2, v: &Vec2) -> Vec2 {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

pub fn mat2_trace(m: &Mat2) -> f64 {
    m[0][0] + m[1][1]
}

pub fn mat2_det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn dot2(a: &Vec2, b: &Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Solve the 2x2 system `m x = b`.
pub fn solve2(m: &Mat2, b: &Vec2) -> Result<Vec2> {
    let det = mat2_det(m);
    let scale = m[0][0].abs() + m[0][1].abs() + m[1][0].abs() + m[1][1].abs();
    if det.abs() <= f64::EPSILON * scale * scale * 1e-2 {
        return Err(Error::SingularSystem);
    }
    Ok([
        (b[0] * m[1][1] - b[1] * m[0][1]) / det,
        (b[1] * m[0][0] - b[0] * m[1][0]) / det,
    ])
}

/// In-place LU solve with partial pivoting for a small dense system.
///
/// Consumes `a` (n x n, row major) and `b`; returns x with `a x = b`.
pub fn lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    for col in 0..n {
        let (pivot_row, pivot_val) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_val == 0.0 || !pivot_val.is_finite() {
            return Err(Error::SingularSystem);
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col + 1..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(x)
}

/// Singular values of a small dense matrix via cyclic Jacobi on A^T A.
///
/// Returns the singular values sorted descending.
pub fn singular_values(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert!(a.iter().all(|r| r.len() == n));
    // Gram matrix.
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[k][i] * a[k][j];
            }
            g[i][j] = s;
        }
    }
    // Cyclic Jacobi sweeps; the Gram matrix is symmetric positive semidefinite.
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += g[i][j] * g[i][j];
            }
        }
        let scale: f64 = (0..n).map(|i| g[i][i].abs()).sum::<f64>().max(1e-300);
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if g[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (g[q][q] - g[p][p]) / (2.0 * g[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let gkp = g[k][p];
                    let gkq = g[k][q];
                    g[k][p] = c * gkp - s * gkq;
                    g[k][q] = s * gkp + c * gkq;
                }
                for k in 0..n {
                    let gpk = g[p][k];
                    let gqk = g[q][k];
                    g[p][k] = c * gpk - s * gqk;
                    g[q][k] = s * gpk + c * gqk;
                }
            }
        }
    }
    let mut sv: Vec<f64> = (0..n).map(|i| g[i][i].max(0.0).sqrt()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Bracketed scalar root find (Brent's method).
///
/// `fa` and `fb` must have opposite signs. Converges to `|f| <= f_tol` or an
/// interval shorter than `x_tol`.
pub fn brent<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    x_tol: f64,
    f_tol: f64,
) -> Result<(f64, f64)> {
    if fa == 0.0 {
        return Ok((a, fa));
    }
    if fb == 0.0 {
        return Ok((b, fb));
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange {
            what: "brent bracket".into(),
            lo: a,
            hi: b,
        });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = b - a;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * x_tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb.abs() <= f_tol {
            return Ok((b, fb));
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Inverse quadratic / secant step.
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min(e * q.abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        fb = f(b)?;
    }
    Ok((b, fb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve2_roundtrip() {
        let m = [[2.0, 1.0], [-1.0, 3.0]];
        let x = solve2(&m, &[5.0, 4.0]).unwrap();
        let back = mat2_mul_vec(&m, &x);
        assert!((back[0] - 5.0).abs() < 1e-14);
        assert!((back[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn lu_solve_matches_known_solution() {
        let a = vec![
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ];
        let x = lu_solve(a.clone(), vec![6.0, 10.0, 8.0]).unwrap();
        for (r, bi) in a.iter().zip([6.0, 10.0, 8.0]) {
            let s: f64 = r.iter().zip(&x).map(|(m, v)| m * v).sum();
            assert!((s - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn lu_solve_rejects_singular() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(lu_solve(a, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn singular_values_of_diagonal() {
        let a = vec![
            vec![3.0, 0.0, 0.0],
            vec![0.0, -1.5, 0.0],
            vec![0.0, 0.0, 0.5],
        ];
        let sv = singular_values(&a);
        assert!((sv[0] - 3.0).abs() < 1e-12);
        assert!((sv[1] - 1.5).abs() < 1e-12);
        assert!((sv[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn brent_finds_cubic_root() {
        let f = |x: f64| Ok(x * x * x - 2.0);
        let fa = f(1.0).unwrap();
        let fb = f(2.0).unwrap();
        let (root, _) = brent(f, 1.0, 2.0, fa, fb, 1e-14, 0.0).unwrap();
        assert!((root - 2.0_f64.cbrt()).abs() < 1e-12);
    }
}
