//! Two-component fields on a uniform square grid.
//!
//! Grids are vertex-centered: n_grid points per side spanning [0, L] with
//! spacing h = L/(n_grid - 1). Polar coordinates are measured from the
//! domain centre. Fields serialise to full-precision CSV (one line per grid
//! row) and 8-bit binary PGM with the min-max scale recorded in a sidecar
//! text file.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Which component of a two-component field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    U,
    V,
}

impl Species {
    pub fn name(self) -> &'static str {
        match self {
            Species::U => "u",
            Species::V => "v",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub n_grid: usize,
    /// Domain side length.
    pub len: f64,
    /// Row-major values, index iy * n_grid + ix.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Field2D {
    pub fn uniform(n_grid: usize, len: f64, u0: f64, v0: f64) -> Result<Self> {
        if n_grid < 2 {
            return Err(Error::Invalid(format!("n_grid must be >= 2, got {n_grid}")));
        }
        if !(len > 0.0) {
            return Err(Error::Invalid(format!("domain length must be > 0, got {len}")));
        }
        Ok(Field2D {
            n_grid,
            len,
            u: vec![u0; n_grid * n_grid],
            v: vec![v0; n_grid * n_grid],
        })
    }

    pub fn spacing(&self) -> f64 {
        self.len / (self.n_grid - 1) as f64
    }

    /// Centered coordinate of grid index i in either direction.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing() - 0.5 * self.len
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.n_grid + ix
    }

    pub fn values(&self, s: Species) -> &[f64] {
        match s {
            Species::U => &self.u,
            Species::V => &self.v,
        }
    }

    pub fn values_mut(&mut self, s: Species) -> &mut Vec<f64> {
        match s {
            Species::U => &mut self.u,
            Species::V => &mut self.v,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }

    pub fn min_max(&self, s: Species) -> (f64, f64) {
        let vals = self.values(s);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &x in vals {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        (lo, hi)
    }

    /// Bilinear interpolation at centered coordinates (x, y). Positions
    /// outside the grid are clamped to the boundary.
    pub fn sample_bilinear(&self, s: Species, x: f64, y: f64) -> f64 {
        let h = self.spacing();
        let n = self.n_grid;
        let fx = ((x + 0.5 * self.len) / h).clamp(0.0, (n - 1) as f64);
        let fy = ((y + 0.5 * self.len) / h).clamp(0.0, (n - 1) as f64);
        let ix = (fx.floor() as usize).min(n - 2);
        let iy = (fy.floor() as usize).min(n - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let vals = self.values(s);
        let v00 = vals[self.idx(ix, iy)];
        let v10 = vals[self.idx(ix + 1, iy)];
        let v01 = vals[self.idx(ix, iy + 1)];
        let v11 = vals[self.idx(ix + 1, iy + 1)];
        v00 * (1.0 - tx) * (1.0 - ty)
            + v10 * tx * (1.0 - ty)
            + v01 * (1.0 - tx) * ty
            + v11 * tx * ty
    }

    /// Trapezoid-weighted spatial mean: the discrete integral the no-flux
    /// Laplacian conserves, divided by the domain area.
    pub fn weighted_mean(&self, s: Species) -> f64 {
        let n = self.n_grid;
        let vals = self.values(s);
        let w1 = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let mut sum = 0.0;
        let mut wsum = 0.0;
        for iy in 0..n {
            for ix in 0..n {
                let w = w1(ix) * w1(iy);
                sum += w * vals[self.idx(ix, iy)];
                wsum += w;
            }
        }
        sum / wsum
    }

    /// Full-precision CSV: one line per grid row, comma separated.
    pub fn write_csv(&self, s: Species, path: &Path) -> Result<()> {
        let vals = self.values(s);
        let mut out = String::with_capacity(self.n_grid * self.n_grid * 20);
        for iy in 0..self.n_grid {
            for ix in 0..self.n_grid {
                if ix > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{}", vals[self.idx(ix, iy)]));
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Binary (P5) PGM, min-max scaled to 0..255; the scale is recorded in
    /// `<path>.scale.txt`.
    pub fn write_pgm(&self, s: Species, path: &Path) -> Result<()> {
        let vals = self.values(s);
        let (lo, hi) = self.min_max(s);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut file = std::fs::File::create(path)?;
        write!(file, "P5\n{} {}\n255\n", self.n_grid, self.n_grid)?;
        let bytes: Vec<u8> = (0..self.n_grid * self.n_grid)
            .map(|i| (255.0 * (vals[i] - lo) / span).round().clamp(0.0, 255.0) as u8)
            .collect();
        file.write_all(&bytes)?;
        let sidecar = format!("min = {lo}\nmax = {hi}\n");
        std::fs::write(path.with_extension("pgm.scale.txt"), sidecar)?;
        Ok(())
    }
}
