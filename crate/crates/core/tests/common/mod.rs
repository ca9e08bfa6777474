//! Shared measurement helpers for the integration suites: pattern region
//! segmentation, gap counting, phase correlation.

use dihedra::equilibria::{self, SteadyState};
use dihedra::field::Field2D;
use dihedra::model::ModelSpec;
use dihedra::turing::TuringPoint;

/// The uniform background at the run parameter mu* + eps.
pub fn background(model: &ModelSpec, tp: &TuringPoint, eps: f64) -> SteadyState {
    equilibria::continue_branch(model, &tp.state, tp.mu() + eps).expect("background state")
}

/// Gap threshold: a quarter of the way from the background toward the
/// deepest value, which separates genuine gaps from boundary ripple.
pub fn gap_threshold(field: &Field2D, u_bg: f64) -> f64 {
    let mut u_min = f64::INFINITY;
    for &x in &field.u {
        u_min = u_min.min(x);
    }
    u_bg - 0.25 * (u_bg - u_min)
}

/// Count 4-connected components of {u < threshold}.
pub fn count_gaps(field: &Field2D, threshold: f64) -> usize {
    let n = field.n_grid;
    let mut mark = vec![false; n * n];
    let mut count = 0usize;
    let mut stack = Vec::new();
    for start in 0..n * n {
        if mark[start] || field.u[start] >= threshold {
            continue;
        }
        count += 1;
        stack.push(start);
        mark[start] = true;
        while let Some(i) = stack.pop() {
            let (ix, iy) = (i % n, i / n);
            let mut push = |j: usize| {
                if !mark[j] && field.u[j] < threshold {
                    mark[j] = true;
                    stack.push(j);
                }
            };
            if ix > 0 {
                push(i - 1);
            }
            if ix + 1 < n {
                push(i + 1);
            }
            if iy > 0 {
                push(i - n);
            }
            if iy + 1 < n {
                push(i + n);
            }
        }
    }
    count
}

/// Radius (from the domain centre) of the outermost below-threshold pixel.
pub fn pattern_radius(field: &Field2D, threshold: f64) -> f64 {
    let n = field.n_grid;
    let mut r_max = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            if field.u[iy * n + ix] < threshold {
                let r = field.coord(ix).hypot(field.coord(iy));
                r_max = r_max.max(r);
            }
        }
    }
    r_max
}

/// Correlation of (u - u_bg) and (v - v_bg) over the patterned region
/// (|u - u_bg| above a tenth of its maximum).
pub fn phase_correlation(field: &Field2D, u_bg: f64, v_bg: f64) -> f64 {
    let mut max_dev = 0.0f64;
    for &x in &field.u {
        max_dev = max_dev.max((x - u_bg).abs());
    }
    let cut = 0.1 * max_dev;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for i in 0..field.u.len() {
        let du = field.u[i] - u_bg;
        if du.abs() <= cut {
            continue;
        }
        let dv = field.v[i] - v_bg;
        suv += du * dv;
        suu += du * du;
        svv += dv * dv;
    }
    suv / (suu * svv).sqrt().max(1e-300)
}

/// Max |u - u_bg| over the field.
pub fn pattern_amplitude(field: &Field2D, u_bg: f64) -> f64 {
    field
        .u
        .iter()
        .map(|x| (x - u_bg).abs())
        .fold(0.0, f64::max)
}
