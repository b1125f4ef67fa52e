//! Uniform grids on the flat torus `[0,1)ᵈ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid with `n` points per axis on `𝕋ᵈ`, `d ∈ {1,2,3}`.
///
/// Values are stored row-major with axis order `x₁ … x_d` (the last axis is
/// contiguous). `n` is a power of two, at least 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    dim: usize,
    n: usize,
}

impl TryFrom<GridSpec> for TorusGrid {
    type Error = Error;
    fn try_from(g: GridSpec) -> Result<Self> {
        TorusGrid::new(g.dim, g.n)
    }
}

impl From<TorusGrid> for GridSpec {
    fn from(g: TorusGrid) -> Self {
        GridSpec { dim: g.dim, n: g.n }
    }
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {n} must be a power of two >= 4"
            )));
        }
        Ok(TorusGrid { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total number of grid points, `nᵈ`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one grid cell, `spacingᵈ`.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Distance between consecutive entries along `axis` in the flat storage.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Per-axis indices of a flat index; unused trailing axes are 0.
    #[inline]
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    #[inline]
    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        (0..self.dim).fold(0, |acc, a| acc * self.n + idx[a] % self.n)
    }

    /// Coordinates of grid point `flat`; unused trailing axes are 0.
    #[inline]
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        [idx[0] as f64 * h, idx[1] as f64 * h, idx[2] as f64 * h]
    }

    /// Signed wavenumber of storage index `j` on the lattice `{-n/2+1, …, n/2}`.
    #[inline]
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Integer wave vector of spectral index `flat`.
    #[inline]
    pub fn wavevector(&self, flat: usize) -> [i64; 3] {
        let idx = self.multi_index(flat);
        let mut k = [0i64; 3];
        for a in 0..self.dim {
            k[a] = self.wavenumber(idx[a]);
        }
        k
    }

    /// Whether `k` is the unpaired Nyquist wavenumber `n/2`.
    #[inline]
    pub fn is_nyquist(&self, k: i64) -> bool {
        k == (self.n / 2) as i64
    }

    /// Derivative symbol `2πk_a` per axis, with the Nyquist wavenumber mapped
    /// to zero so every derivative keeps real data real.
    #[inline]
    pub fn derivative_symbol(&self, flat: usize) -> [f64; 3] {
        let k = self.wavevector(flat);
        let mut s = [0.0; 3];
        for a in 0..self.dim {
            if !self.is_nyquist(k[a]) {
                s[a] = 2.0 * std::f64::consts::PI * k[a] as f64;
            }
        }
        s
    }

    /// Flat index of the wave vector `-k`.
    #[inline]
    pub fn conjugate_index(&self, flat: usize) -> usize {
        let idx = self.multi_index(flat);
        let mut out = [0usize; 3];
        for a in 0..self.dim {
            out[a] = (self.n - idx[a]) % self.n;
        }
        self.flat_index(out)
    }
}

/// Minimal-image displacement `x − y − k` per axis, each component in `[-½, ½)`.
#[inline]
pub(crate) fn torus_displacement(x: &[f64; 3], y: &[f64; 3], dim: usize) -> [f64; 3] {
    let mut d = [0.0; 3];
    for a in 0..dim {
        let mut v = x[a] - y[a];
        v -= v.round();
        d[a] = v;
    }
    d
}

#[inline]
pub(crate) fn torus_distance(x: &[f64; 3], y: &[f64; 3], dim: usize) -> f64 {
    let d = torus_displacement(x, y, dim);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Geodesic distance on `𝕋ᵈ`: the minimum of `|x − y − k|` over integer
/// shifts `k` with `|k| ≤ 2`.
pub fn geodesic_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() || x.len() > 3 {
        return Err(Error::InvalidGrid(format!(
            "points of dimensions {} and {} (expected equal, 1..=3)",
            x.len(),
            y.len()
        )));
    }
    for &v in x.iter().chain(y) {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::CoordinateOutOfRange { value: v });
        }
    }
    let d = x.len();
    let mut best = f64::INFINITY;
    let range = -2i64..=2;
    let shifts: Vec<[i64; 3]> = match d {
        1 => range.clone().map(|a| [a, 0, 0]).collect(),
        2 => range
            .clone()
            .flat_map(|a| range.clone().map(move |b| [a, b, 0]))
            .collect(),
        _ => range
            .clone()
            .flat_map(|a| {
                range
                    .clone()
                    .flat_map(move |b| (-2i64..=2).map(move |c| [a, b, c]))
            })
            .collect(),
    };
    for k in shifts {
        if k.iter().map(|v| v * v).sum::<i64>() > 4 {
            continue;
        }
        let dist = (0..d)
            .map(|a| {
                let v = x[a] - y[a] - k[a] as f64;
                v * v
            })
            .sum::<f64>()
            .sqrt();
        best = best.min(dist);
    }
    Ok(best)
}
