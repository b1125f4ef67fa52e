//! Periodized convolution kernels `ρ^δ` and spectral mollification.
//!
//! Kernels are centred at the origin, sampled on the grid and renormalized to
//! unit discrete mass. Convolution multiplies Fourier coefficients by the
//! kernel's discrete transform `ρ̂^δ(k)`, which is real because both profiles
//! are even.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{torus_distance, TorusGrid};
use crate::par;
use crate::spectral::{forward, inverse, SpectralField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Wrapped Gaussian with standard deviation `δ/3`.
    GaussianPeriodized,
    /// `exp(−1/(1 − (r/δ)²))` for geodesic radius `r < δ`, zero outside.
    BumpCompact,
}

impl Profile {
    pub const ALL: [Profile; 2] = [Profile::GaussianPeriodized, Profile::BumpCompact];

    pub fn name(self) -> &'static str {
        match self {
            Profile::GaussianPeriodized => "gaussian_periodized",
            Profile::BumpCompact => "bump_compact",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_periodized" | "gaussian" => Ok(Profile::GaussianPeriodized),
            "bump_compact" | "bump" => Ok(Profile::BumpCompact),
            _ => Err(Error::InvalidConfig(format!("unknown mollifier profile '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mollifier {
    pub profile: Profile,
    pub delta: f64,
}

impl Mollifier {
    pub fn new(profile: Profile, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidConfig(format!("mollifier width {delta} must be positive")));
        }
        Ok(Mollifier { profile, delta })
    }

    pub fn gaussian(delta: f64) -> Result<Self> {
        Self::new(Profile::GaussianPeriodized, delta)
    }

    pub fn bump(delta: f64) -> Result<Self> {
        Self::new(Profile::BumpCompact, delta)
    }

    /// Same profile at width `δ/2`.
    pub fn halved(self) -> Self {
        Mollifier { profile: self.profile, delta: 0.5 * self.delta }
    }

    /// Errors unless `δ ≥ 2·spacing`.
    pub fn check_resolution(&self, grid: &TorusGrid) -> Result<()> {
        let min = 2.0 * grid.spacing();
        // tolerate roundoff from dyadic schedules landing exactly on the limit
        if self.delta < min * (1.0 - 1e-12) {
            return Err(Error::UnresolvedKernel { delta: self.delta, min });
        }
        Ok(())
    }

    /// The kernel sampled on `grid`, with unit discrete mass.
    pub fn kernel_field(&self, grid: &TorusGrid) -> Result<ScalarField> {
        self.check_resolution(grid)?;
        let g = *grid;
        let raw: Vec<f64> = match self.profile {
            Profile::GaussianPeriodized => {
                let line = wrapped_gaussian_line(g.n(), self.delta / 3.0);
                par::map_range(g.len(), |i| {
                    let idx = g.multi_index(i);
                    (0..g.dim()).map(|a| line[idx[a]]).product()
                })
            }
            Profile::BumpCompact => {
                let origin = [0.0; 3];
                let delta = self.delta;
                par::map_range(g.len(), |i| {
                    let r = torus_distance(&g.point(i), &origin, g.dim()) / delta;
                    if r < 1.0 {
                        (-1.0 / (1.0 - r * r)).exp()
                    } else {
                        0.0
                    }
                })
            }
        };
        let mass = par::sum(&raw) * g.cell_volume();
        if !(mass > 0.0) {
            return Err(Error::UnresolvedKernel { delta: self.delta, min: 2.0 * g.spacing() });
        }
        let inv = 1.0 / mass;
        Ok(ScalarField::from_vec_unchecked(g, raw.into_iter().map(|v| v * inv).collect()))
    }

    /// Discrete Fourier multiplier of the kernel, cached per grid.
    pub fn symbol(&self, grid: &TorusGrid) -> Result<KernelSymbol> {
        self.check_resolution(grid)?;
        type Key = (Profile, u64, TorusGrid);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Vec<f64>>>>> = OnceLock::new();
        let key = (self.profile, self.delta.to_bits(), *grid);
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(s) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(KernelSymbol { grid: *grid, values: s.clone() });
        }
        let spec = forward(&self.kernel_field(grid)?);
        let values = Arc::new(spec.coeffs().iter().map(|c| c.re).collect::<Vec<_>>());
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        if map.len() >= 64 {
            map.clear();
        }
        map.insert(key, values.clone());
        Ok(KernelSymbol { grid: *grid, values })
    }

    /// Discrete second moment `Σ r² ρ^δ h^d` with `r` the distance to the origin.
    pub fn second_moment(&self, grid: &TorusGrid) -> Result<f64> {
        let k = self.kernel_field(grid)?;
        let g = *grid;
        let origin = [0.0; 3];
        let v = k.values();
        Ok(par::sum_by(g.len(), |i| {
            let r = torus_distance(&g.point(i), &origin, g.dim());
            r * r * v[i]
        }) * g.cell_volume())
    }
}

impl fmt::Display for Mollifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(delta={})", self.profile, self.delta)
    }
}

/// 1-D periodization `Σ_m exp(−(x − m)²/2σ²)` at the grid nodes `j/n`.
fn wrapped_gaussian_line(n: usize, sigma: f64) -> Vec<f64> {
    let images = (8.0 * sigma).ceil() as i64 + 2;
    let h = 1.0 / n as f64;
    (0..n)
        .map(|j| {
            let x = j as f64 * h;
            (-images..=images)
                .map(|m| {
                    let y = x - m as f64;
                    (-y * y / (2.0 * sigma * sigma)).exp()
                })
                .sum()
        })
        .collect()
}

/// Real Fourier multiplier `ρ̂^δ(k)` on a particular grid.
#[derive(Clone, Debug)]
pub struct KernelSymbol {
    grid: TorusGrid,
    values: Arc<Vec<f64>>,
}

impl KernelSymbol {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn apply_spectral(&self, f: &SpectralField) -> Result<SpectralField> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", f.grid(), self.grid)));
        }
        let s = &self.values;
        let coeffs = par::map_range(s.len(), |i| f.coeffs()[i] * s[i]);
        SpectralField::from_parts(self.grid, coeffs)
    }

    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        f.check_grid(&self.grid)?;
        Ok(inverse(&self.apply_spectral(&forward(f))?))
    }

    pub fn apply_vector(&self, v: &VectorField) -> Result<VectorField> {
        let comps = v
            .components()
            .iter()
            .map(|c| self.apply(c))
            .collect::<Result<Vec<_>>>()?;
        let mut out = VectorField::new(comps)?;
        // a Fourier multiplier commutes with the divergence
        out.set_divergence_free(v.is_divergence_free());
        Ok(out)
    }
}

/// Fields that can be convolved with a mollifier.
pub trait Mollify: Sized {
    fn mollify(&self, m: &Mollifier) -> Result<Self>;
}

impl Mollify for ScalarField {
    fn mollify(&self, m: &Mollifier) -> Result<Self> {
        m.symbol(self.grid())?.apply(self)
    }
}

impl Mollify for VectorField {
    fn mollify(&self, m: &Mollifier) -> Result<Self> {
        m.symbol(self.grid())?.apply_vector(self)
    }
}

/// `f * ρ^δ`.
pub fn mollify<T: Mollify>(f: &T, m: &Mollifier) -> Result<T> {
    f.mollify(m)
}

/// Dyadic schedule `δ₀ 2⁻ʲ`, `j = 0 … levels−1`.
pub fn dyadic_schedule(delta0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|j| delta0 * 0.5f64.powi(j as i32)).collect()
}
