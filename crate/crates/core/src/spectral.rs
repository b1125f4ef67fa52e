//! Fourier transforms on the torus grid, exact spectral differential
//! operators, Leray projection and two-thirds dealiasing.
//!
//! Coefficients are normalized so that `f(x) = Σ_k f̂(k) e^{2πi k·x}`, i.e.
//! `f̂(k) = N⁻ᵈ Σ_x f(x) e^{-2πi k·x}`. With this convention a constant field
//! `c` has `f̂(0) = c` and Parseval reads `‖f‖₂² = Σ_k |f̂(k)|²`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::par;

/// Relative divergence threshold for the divergence-free tag.
pub const DIVERGENCE_FREE_TOL: f64 = 1e-10;

/// Complex Fourier coefficients of a field, stored with the same flat layout
/// as the real samples (storage index `j` ↔ wavenumber `grid.wavenumber(j)`).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// In-place unnormalized d-dimensional transform, one axis at a time.
fn transform(grid: &TorusGrid, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
    let n = grid.n();
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        if stride == 1 {
            par::for_each_chunk_mut(data, n, |_, line| fft.process(line));
            continue;
        }
        // Gather strided lines into a line-major buffer. Lines belonging to one
        // outer block are contiguous there, so the scatter runs per block.
        let lines = data.len() / n;
        let src: &[Complex64] = data;
        let mut buf: Vec<Complex64> = par::map_range(lines, |l| {
            let (outer, inner) = (l / stride, l % stride);
            let base = outer * n * stride + inner;
            (0..n).map(|j| src[base + j * stride]).collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect();
        par::for_each_chunk_mut(&mut buf, n, |_, line| fft.process(line));
        let block = n * stride;
        par::for_each_chunk_mut(data, block, |outer, dst| {
            let lines = &buf[outer * block..(outer + 1) * block];
            for inner in 0..stride {
                let line = &lines[inner * n..(inner + 1) * n];
                for (j, v) in line.iter().enumerate() {
                    dst[inner + j * stride] = *v;
                }
            }
        });
    }
}

/// Forward transform of a real field.
pub fn forward(f: &ScalarField) -> SpectralField {
    let grid = *f.grid();
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&grid, &mut data, &plans(grid.n()).forward);
    let scale = grid.cell_volume();
    par::for_each_indexed_mut(&mut data, |_, c| *c *= scale);
    SpectralField { grid, coeffs: data }
}

/// Inverse transform; the imaginary part (roundoff for Hermitian data) is
/// discarded.
pub fn inverse(spec: &SpectralField) -> ScalarField {
    let grid = spec.grid;
    let mut data = spec.coeffs.clone();
    transform(&grid, &mut data, &plans(grid.n()).inverse);
    ScalarField::from_vec_unchecked(grid, data.into_iter().map(|c| c.re).collect())
}

impl SpectralField {
    /// Wraps coefficients, checking that the array matches the lattice size.
    pub fn from_parts(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a lattice of {} modes",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at integer wave vector `k` (components taken mod `n`).
    pub fn at(&self, k: &[i64]) -> Complex64 {
        let n = self.grid.n() as i64;
        let mut idx = [0usize; 3];
        for (a, &ka) in k.iter().enumerate().take(self.grid.dim()) {
            idx[a] = ka.rem_euclid(n) as usize;
        }
        self.coeffs[self.grid.flat_index(idx)]
    }

    /// Largest `|F(−k) − conj F(k)|`; zero for the transform of real data.
    pub fn hermitian_defect(&self) -> f64 {
        par::max_by(self.coeffs.len(), |i| {
            let j = self.grid.conjugate_index(i);
            (self.coeffs[j] - self.coeffs[i].conj()).norm()
        })
    }

    /// `Σ_k |F(k)|²`.
    pub fn energy(&self) -> f64 {
        par::sum_by(self.coeffs.len(), |i| self.coeffs[i].norm_sqr())
    }

    /// Multiplies coefficient `i` by `symbol(i)`.
    pub fn multiply<F>(&self, symbol: F) -> SpectralField
    where
        F: Fn(usize) -> Complex64 + Sync + Send,
    {
        let coeffs = par::map_range(self.coeffs.len(), |i| self.coeffs[i] * symbol(i));
        SpectralField { grid: self.grid, coeffs }
    }

    /// Multiplies by a real symbol.
    pub fn multiply_real<F>(&self, symbol: F) -> SpectralField
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let coeffs = par::map_range(self.coeffs.len(), |i| self.coeffs[i] * symbol(i));
        SpectralField { grid: self.grid, coeffs }
    }

    /// Spectral `∂/∂x_axis`: multiplication by `i 2π k_axis` (Nyquist zeroed).
    pub fn derivative(&self, axis: usize) -> SpectralField {
        let g = self.grid;
        self.multiply(move |i| Complex64::new(0.0, g.derivative_symbol(i)[axis]))
    }

    /// Spectral Laplacian, symbol `−Σ_a (2πk_a)²` with Nyquist components zeroed.
    pub fn laplacian(&self) -> SpectralField {
        let g = self.grid;
        self.multiply_real(move |i| -laplacian_symbol(&g, i))
    }

    /// `Σ_k |κ(k)|² |F(k)|²`, i.e. `‖∇f‖₂²` by Parseval.
    pub fn gradient_energy(&self) -> f64 {
        let g = self.grid;
        par::sum_by(self.coeffs.len(), |i| laplacian_symbol(&g, i) * self.coeffs[i].norm_sqr())
    }

    /// Two-thirds rule: zero every mode with some `|k_j| > n/3`.
    pub fn dealiased(&self) -> SpectralField {
        let g = self.grid;
        self.multiply_real(move |i| if in_two_thirds_band(&g, i) { 1.0 } else { 0.0 })
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_grid(other)?;
        let coeffs = par::map_range(self.coeffs.len(), |i| self.coeffs[i] + other.coeffs[i]);
        Ok(SpectralField { grid: self.grid, coeffs })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_grid(other)?;
        let coeffs = par::map_range(self.coeffs.len(), |i| self.coeffs[i] - other.coeffs[i]);
        Ok(SpectralField { grid: self.grid, coeffs })
    }

    pub fn scale(&self, alpha: f64) -> SpectralField {
        self.multiply_real(|_| alpha)
    }

    fn check_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }
}

/// `|κ(k)|² = Σ_a (2πk_a)²` with the Nyquist wavenumber dropped per axis.
#[inline]
pub fn laplacian_symbol(g: &TorusGrid, i: usize) -> f64 {
    let s = g.derivative_symbol(i);
    s[0] * s[0] + s[1] * s[1] + s[2] * s[2]
}

/// Full lattice multiplier `4π²|k|²` (Nyquist kept), used by Sobolev norms.
#[inline]
pub fn lattice_symbol(g: &TorusGrid, i: usize) -> f64 {
    let k = g.wavevector(i);
    4.0 * PI * PI * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
}

#[inline]
fn in_two_thirds_band(g: &TorusGrid, i: usize) -> bool {
    let k = g.wavevector(i);
    let cut = g.n() as f64 / 3.0;
    (0..g.dim()).all(|a| (k[a].abs() as f64) <= cut)
}

/// Two-thirds dealiasing of a spectral field.
pub fn dealias(f: &SpectralField) -> SpectralField {
    f.dealiased()
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let spec = forward(f);
    spectral_gradient(&spec)
}

pub(crate) fn spectral_gradient(spec: &SpectralField) -> VectorField {
    let comps = par::map_range(spec.grid.dim(), |a| inverse(&spec.derivative(a)));
    VectorField::new(comps).expect("gradient components share the grid")
}

/// Spectral divergence of a vector field.
pub fn divergence(v: &VectorField) -> ScalarField {
    inverse(&spectral_divergence(v))
}

/// Fourier coefficients of `div v`.
pub fn spectral_divergence(v: &VectorField) -> SpectralField {
    let g = *v.grid();
    let parts = par::map_slice(v.components(), forward);
    spectral_divergence_of(&g, &parts)
}

/// `Σ_a i κ_a F_a` for already transformed components.
pub(crate) fn spectral_divergence_of(g: &TorusGrid, parts: &[SpectralField]) -> SpectralField {
    let coeffs = par::map_range(g.len(), |i| {
        let s = g.derivative_symbol(i);
        parts
            .iter()
            .enumerate()
            .map(|(a, p)| Complex64::new(0.0, s[a]) * p.coeffs[i])
            .sum()
    });
    SpectralField { grid: *g, coeffs }
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    inverse(&forward(f).laplacian())
}

/// Orthogonal projection onto divergence-free fields:
/// `v̂(k) ↦ v̂(k) − κ (κ·v̂(k)) / |κ|²` for `κ ≠ 0`, mean untouched.
///
/// In one dimension only constants are divergence-free; a constant input is
/// returned as is, anything else is rejected.
pub fn leray_project(v: &VectorField) -> Result<VectorField> {
    let g = *v.grid();
    if g.dim() == 1 {
        let c = v.component(0);
        let mean = c.mean();
        if c.values().iter().all(|&x| x == c.values()[0]) {
            let mut out = VectorField::constant(g, &[mean])?;
            out.set_divergence_free(true);
            return Ok(out);
        }
        return Err(Error::TrivialInOneDimension);
    }
    let parts = par::map_slice(v.components(), forward);
    let projected = leray_project_spectral(&g, &parts);
    let comps = par::map_slice(&projected, inverse);
    let mut out = VectorField::new(comps)?;
    out.set_divergence_free(true);
    Ok(out)
}

pub(crate) fn leray_project_spectral(g: &TorusGrid, parts: &[SpectralField]) -> Vec<SpectralField> {
    let dim = g.dim();
    let mut out: Vec<SpectralField> = parts.to_vec();
    // Fill the projected coefficients mode by mode.
    let projected: Vec<[Complex64; 3]> = par::map_range(g.len(), |i| {
        let s = g.derivative_symbol(i);
        let s2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
        let mut c = [Complex64::new(0.0, 0.0); 3];
        for a in 0..dim {
            c[a] = parts[a].coeffs[i];
        }
        if s2 > 0.0 {
            let dot: Complex64 = (0..dim).map(|a| c[a] * s[a]).sum::<Complex64>() / s2;
            for a in 0..dim {
                c[a] -= dot * s[a];
            }
        }
        c
    });
    for (a, field) in out.iter_mut().enumerate() {
        for (i, c) in field.coeffs.iter_mut().enumerate() {
            *c = projected[i][a];
        }
    }
    out
}

/// Max modulus of the spectral divergence relative to the largest component
/// modulus (0 for the zero field).
pub fn relative_divergence(v: &VectorField) -> f64 {
    let scale = v.max_component_abs();
    if scale == 0.0 {
        return 0.0;
    }
    divergence(v).max_abs() / scale
}

impl VectorField {
    /// Sets the divergence-free tag after checking the spectral divergence
    /// against [`DIVERGENCE_FREE_TOL`].
    pub fn tag_divergence_free(mut self) -> Result<Self> {
        let rel = relative_divergence(&self);
        if rel > DIVERGENCE_FREE_TOL {
            return Err(Error::InvalidField(format!(
                "relative divergence {rel:e} exceeds {DIVERGENCE_FREE_TOL:e}"
            )));
        }
        self.set_divergence_free(true);
        Ok(self)
    }
}
