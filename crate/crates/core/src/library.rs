//! Catalog of closed-form divergence-free velocity fields with integrability
//! metadata.
//!
//! Planar fields are written as `∇⊥ψ = (−∂₂ψ, ∂₁ψ)` for a stream function
//! `ψ(x₁, x₂)`. In three dimensions they extend as columns independent of
//! `x₃` with vanishing third component; radial coordinates are then measured
//! in the `(x₁, x₂)` plane, so the singular set of `power_singularity` is a
//! line and its integrability threshold is unchanged.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::norms::{lp_integral, lp_norm};
use crate::par;
use crate::quadrature::fit_slope;
use crate::spectral::{leray_project, relative_divergence};

/// Relative L² Leray correction above which a sampled singular field is
/// reported as unresolved.
pub const LERAY_WARNING_THRESHOLD: f64 = 5e-3;

/// Outer radius of the `power_singularity` cutoff (inside the unit cell).
pub const CUTOFF_RADIUS: f64 = 0.49;

fn one() -> f64 {
    1.0
}

fn one_u() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantParams {
    pub value: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShearParams {
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one_u")]
    pub m: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaylorGreenParams {
    #[serde(default = "one")]
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationBumpParams {
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "default_bump_radius")]
    pub radius: f64,
}

fn default_bump_radius() -> f64 {
    0.35
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSingularityParams {
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Singularity exponent `a ∈ (0, 2)`; `|b| ≍ r^{1−a}` near the center.
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlternatingShearParams {
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one_u")]
    pub m: u32,
    /// Time-modulation exponent: the amplitude is `A t^{−β}`.
    #[serde(default)]
    pub beta: f64,
    /// Length `τ` of each constant-direction interval.
    #[serde(default = "default_switch_period")]
    pub switch_period: f64,
}

fn default_switch_period() -> f64 {
    0.05
}

/// A catalog field, serialized as `{"name": ..., "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant(ConstantParams),
    Shear(ShearParams),
    TaylorGreen(TaylorGreenParams),
    RotationBump(RotationBumpParams),
    PowerSingularity(PowerSingularityParams),
    AlternatingShear(AlternatingShearParams),
}

/// Known integrability of a catalog field: `b ∈ L^p` for every `p` below
/// `p_finite_below`, and `‖b(t)‖ ∈ L^α_t` for every `α` below `alpha_time`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityCard {
    pub p_finite_below: Exponent,
    pub alpha_time: Exponent,
}

/// A sampled field plus what happened while sampling it.
#[derive(Clone, Debug)]
pub struct Instance {
    pub field: VectorField,
    pub metadata: InstanceMetadata,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InstanceMetadata {
    /// Relative L² size of the Leray correction, when one was applied.
    pub leray_correction: Option<f64>,
    /// Relative spectral divergence of the returned field.
    pub divergence: f64,
    pub warnings: Vec<String>,
}

impl FieldSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FieldSpec::Constant(_) => "constant",
            FieldSpec::Shear(_) => "shear",
            FieldSpec::TaylorGreen(_) => "taylor_green",
            FieldSpec::RotationBump(_) => "rotation_bump",
            FieldSpec::PowerSingularity(_) => "power_singularity",
            FieldSpec::AlternatingShear(_) => "alternating_shear",
        }
    }

    pub fn constant(value: &[f64]) -> Self {
        FieldSpec::Constant(ConstantParams { value: value.to_vec() })
    }

    pub fn shear(amplitude: f64, m: u32) -> Self {
        FieldSpec::Shear(ShearParams { amplitude, m })
    }

    pub fn taylor_green(amplitude: f64) -> Self {
        FieldSpec::TaylorGreen(TaylorGreenParams { amplitude })
    }

    pub fn rotation_bump(amplitude: f64, radius: f64) -> Self {
        FieldSpec::RotationBump(RotationBumpParams { amplitude, radius })
    }

    pub fn power_singularity(amplitude: f64, a: f64) -> Self {
        FieldSpec::PowerSingularity(PowerSingularityParams { amplitude, a })
    }

    pub fn alternating_shear(amplitude: f64, m: u32, beta: f64, switch_period: f64) -> Self {
        FieldSpec::AlternatingShear(AlternatingShearParams { amplitude, m, beta, switch_period })
    }

    pub fn time_dependent(&self) -> bool {
        matches!(self, FieldSpec::AlternatingShear(_))
    }

    /// Whether the field is unbounded in space (and so by default run through
    /// the mollified pipeline).
    pub fn is_rough(&self) -> bool {
        matches!(self, FieldSpec::PowerSingularity(p) if p.a > 1.0)
    }

    /// First direction switch strictly after `t`, for time-dependent fields.
    pub fn next_switch(&self, t: f64) -> Option<f64> {
        match self {
            FieldSpec::AlternatingShear(p) => {
                let tau = p.switch_period;
                let mut j = (t / tau).floor() + 1.0;
                // guard against t sitting a hair below a switch
                if j * tau - t <= 1e-12 * tau {
                    j += 1.0;
                }
                Some(j * tau)
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidField(format!("{name} must be finite, got {v}")))
            }
        };
        match self {
            FieldSpec::Constant(p) => {
                if p.value.is_empty() || p.value.len() > 3 {
                    return Err(Error::InvalidField("constant needs 1 to 3 components".into()));
                }
                p.value.iter().try_for_each(|&v| finite("value", v))
            }
            FieldSpec::Shear(p) => {
                finite("amplitude", p.amplitude)?;
                positive_m(p.m)
            }
            FieldSpec::TaylorGreen(p) => finite("amplitude", p.amplitude),
            FieldSpec::RotationBump(p) => {
                finite("amplitude", p.amplitude)?;
                if !(p.radius > 0.0 && p.radius <= 0.5) {
                    return Err(Error::InvalidField(format!(
                        "rotation_bump radius {} not in (0, 0.5]",
                        p.radius
                    )));
                }
                Ok(())
            }
            FieldSpec::PowerSingularity(p) => {
                finite("amplitude", p.amplitude)?;
                if !(p.a > 0.0 && p.a < 2.0) {
                    return Err(Error::InvalidField(format!(
                        "power_singularity exponent a = {} not in (0, 2)",
                        p.a
                    )));
                }
                Ok(())
            }
            FieldSpec::AlternatingShear(p) => {
                finite("amplitude", p.amplitude)?;
                positive_m(p.m)?;
                if !(p.beta >= 0.0 && p.beta.is_finite()) {
                    return Err(Error::InvalidField(format!("beta = {} must be >= 0", p.beta)));
                }
                if !(p.switch_period > 0.0 && p.switch_period.is_finite()) {
                    return Err(Error::InvalidField("switch_period must be positive".into()));
                }
                Ok(())
            }
        }
    }

    pub fn card(&self) -> IntegrabilityCard {
        let mut card = IntegrabilityCard {
            p_finite_below: Exponent::INFINITY,
            alpha_time: Exponent::INFINITY,
        };
        match self {
            FieldSpec::PowerSingularity(p) if p.a > 1.0 => {
                card.p_finite_below = Exponent(2.0 / (p.a - 1.0));
            }
            FieldSpec::AlternatingShear(p) if p.beta > 0.0 => {
                card.alpha_time = Exponent(1.0 / p.beta);
            }
            _ => {}
        }
        card
    }

    /// Samples the field on `grid` at time `t`.
    pub fn instantiate(&self, grid: &TorusGrid, t: f64) -> Result<Instance> {
        self.instantiate_on_piece(grid, t, t)
    }

    /// Like [`instantiate`](Self::instantiate), but for piecewise-in-time
    /// fields the piece is the one containing `piece_time`. A step ending
    /// exactly on a switch passes its midpoint here so the last stage sees the
    /// left limit.
    pub fn instantiate_on_piece(&self, grid: &TorusGrid, t: f64, piece_time: f64) -> Result<Instance> {
        self.validate()?;
        let g = *grid;
        let d = g.dim();
        if d == 1 && !matches!(self, FieldSpec::Constant(_)) {
            return Err(Error::InvalidField(format!(
                "{} needs d >= 2; only constants are divergence-free on the circle",
                self.name()
            )));
        }
        let mut metadata = InstanceMetadata::default();
        let field = match self {
            FieldSpec::Constant(p) => VectorField::constant(g, &p.value)?,
            FieldSpec::Shear(p) => {
                let (a, m) = (p.amplitude, p.m as f64);
                planar(g, |x| [a * (2.0 * PI * m * x[1]).sin(), 0.0])?
            }
            FieldSpec::TaylorGreen(p) => {
                let a = p.amplitude;
                planar(g, |x| taylor_green_velocity(a, x))?
            }
            FieldSpec::RotationBump(p) => {
                let (a, radius) = (p.amplitude, p.radius);
                let raw = planar(g, |x| {
                    radial_perp(x, |r| a * bump_derivative(r / radius) / radius)
                })?;
                project(raw, &mut metadata)?
            }
            FieldSpec::PowerSingularity(p) => {
                let (amp, a) = (p.amplitude, p.a);
                let raw = planar(g, |x| radial_perp(x, |r| amp * power_profile_derivative(r, a)))?;
                project(raw, &mut metadata)?
            }
            FieldSpec::AlternatingShear(p) => {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(Error::InvalidField(format!("time {t} must be >= 0")));
                }
                let amp = if t == 0.0 { 0.0 } else { p.amplitude * t.powf(-p.beta) };
                let m = p.m as f64;
                let even = ((piece_time / p.switch_period) + 1e-12).floor() as i64 % 2 == 0;
                planar(g, move |x| {
                    if even {
                        [amp * (2.0 * PI * m * x[1]).sin(), 0.0]
                    } else {
                        [0.0, amp * (2.0 * PI * m * x[0]).sin()]
                    }
                })?
            }
        };
        metadata.divergence = relative_divergence(&field);
        if let Some(c) = metadata.leray_correction {
            if c > LERAY_WARNING_THRESHOLD {
                metadata.warnings.push(format!(
                    "singularity unresolved at N = {}: Leray projection changed the sampled field by {:.2}% (relative L2)",
                    g.n(),
                    100.0 * c
                ));
            }
        }
        let mut field = field;
        field.set_divergence_free(metadata.divergence <= 1e-8);
        Ok(Instance { field, metadata })
    }

    /// Shorthand for `instantiate(..).field`.
    pub fn sample(&self, grid: &TorusGrid, t: f64) -> Result<VectorField> {
        Ok(self.instantiate(grid, t)?.field)
    }
}

fn positive_m(m: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidField("cell count m must be >= 1".into()));
    }
    Ok(())
}

/// `∇⊥` of `A sin(2πx₁) sin(2πx₂)`.
pub fn taylor_green_velocity(a: f64, x: [f64; 3]) -> [f64; 2] {
    let (s1, c1) = (2.0 * PI * x[0]).sin_cos();
    let (s2, c2) = (2.0 * PI * x[1]).sin_cos();
    [-2.0 * PI * a * s1 * c2, 2.0 * PI * a * c1 * s2]
}

/// Builds a field from its two planar components, padding a zero third
/// component in three dimensions.
fn planar<F>(g: TorusGrid, f: F) -> Result<VectorField>
where
    F: Fn([f64; 3]) -> [f64; 2] + Sync + Send,
{
    let pairs = par::map_range(g.len(), |i| f(g.point(i)));
    let mut comps = vec![
        ScalarField::new(g, pairs.iter().map(|p| p[0]).collect())?,
        ScalarField::new(g, pairs.iter().map(|p| p[1]).collect())?,
    ];
    if g.dim() == 3 {
        comps.push(ScalarField::zeros(g));
    }
    VectorField::new(comps)
}

/// `∇⊥ψ` for a radial stream function with `ψ′(r)` given, `r` measured from
/// `(½, ½)`; zero at the center.
fn radial_perp<F: Fn(f64) -> f64>(x: [f64; 3], dpsi: F) -> [f64; 2] {
    let d1 = x[0] - 0.5;
    let d2 = x[1] - 0.5;
    let r = (d1 * d1 + d2 * d2).sqrt();
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let g = dpsi(r) / r;
    [-g * d2, g * d1]
}

/// Derivative of `s ↦ exp(1 − 1/(1 − s²))` (peak value 1), zero for `s ≥ 1`.
fn bump_derivative(s: f64) -> f64 {
    if s >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - s * s;
    (1.0 - 1.0 / q).exp() * (-2.0 * s / (q * q))
}

/// `C^∞` step from 0 (t ≤ 0) to 1 (t ≥ 1) and its derivative.
fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let f = |t: f64| (-1.0 / t).exp();
    let (a, b) = (f(t), f(1.0 - t));
    let (da, db) = (a / (t * t), b / ((1.0 - t) * (1.0 - t)));
    let s = a + b;
    (a / s, (da * b + a * db) / (s * s))
}

/// Cutoff `χ(r) = 1 − S(r / 0.49)` and `χ′(r)`.
fn cutoff(r: f64) -> (f64, f64) {
    let (s, ds) = smooth_step(r / CUTOFF_RADIUS);
    (1.0 - s, -ds / CUTOFF_RADIUS)
}

/// `ψ′(r)` for `ψ = χ(r) r^{2−a}`.
fn power_profile_derivative(r: f64, a: f64) -> f64 {
    let (c, dc) = cutoff(r);
    dc * r.powf(2.0 - a) + c * (2.0 - a) * r.powf(1.0 - a)
}

fn project(raw: VectorField, meta: &mut InstanceMetadata) -> Result<VectorField> {
    let projected = leray_project(&raw)?;
    let diff: f64 = raw
        .components()
        .iter()
        .zip(projected.components())
        .map(|(a, b)| {
            let d = a - b;
            d.inner(&d).unwrap_or(0.0)
        })
        .sum();
    let base: f64 = raw.components().iter().map(|a| a.inner(a).unwrap_or(0.0)).sum();
    meta.leray_correction = Some(if base > 0.0 { (diff / base).sqrt() } else { 0.0 });
    Ok(projected)
}

/// Verdict of a log-log slope fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Converging,
    Diverging,
    Inconclusive,
}

impl Trend {
    /// `< 0.05` converging, `> 0.2` diverging.
    pub fn from_slope(slope: f64) -> Trend {
        if slope < 0.05 {
            Trend::Converging
        } else if slope > 0.2 {
            Trend::Diverging
        } else {
            Trend::Inconclusive
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendReport {
    pub exponent: f64,
    /// Refinement parameters (grid sizes or time-step counts).
    pub resolutions: Vec<usize>,
    pub integrals: Vec<f64>,
    pub slope: f64,
    pub trend: Trend,
}

fn trend_report(exponent: f64, resolutions: Vec<usize>, integrals: Vec<f64>) -> TrendReport {
    let x: Vec<f64> = resolutions.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = integrals.iter().map(|v| v.ln()).collect();
    let slope = fit_slope(&x, &y);
    TrendReport { exponent, resolutions, integrals, slope, trend: Trend::from_slope(slope) }
}

/// Fits `log ∫|b|^p` against `log N` over the given resolutions.
///
/// Time-dependent fields are sampled at `t = 1`.
pub fn estimate_integrability(
    spec: &FieldSpec,
    dim: usize,
    p: f64,
    resolutions: &[usize],
) -> Result<TrendReport> {
    if resolutions.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "integrability trend needs at least 3 resolutions, got {}",
            resolutions.len()
        )));
    }
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(format!("p = {p} must lie in [1, inf]")));
    }
    let grids = resolutions
        .iter()
        .map(|&n| TorusGrid::new(dim, n))
        .collect::<Result<Vec<_>>>()?;
    let integrals = par::map_slice(&grids, |g| -> Result<f64> {
        let mag = spec.sample(g, 1.0)?.magnitude();
        if p.is_infinite() {
            lp_norm(&mag, p)
        } else {
            lp_integral(&mag, p)
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(trend_report(p, resolutions.to_vec(), integrals))
}

/// Fits `log ∫₀ᵀ ‖b(t)‖₂^α dt` (midpoint rule with `M` cells) against
/// `log M` over the given cell counts.
pub fn estimate_time_integrability(
    spec: &FieldSpec,
    grid: &TorusGrid,
    alpha: f64,
    t_final: f64,
    cell_counts: &[usize],
) -> Result<TrendReport> {
    if cell_counts.len() < 3 {
        return Err(Error::InvalidConfig("time trend needs at least 3 refinements".into()));
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidExponent(format!("alpha = {alpha} must lie in [1, inf)")));
    }
    let integrals = cell_counts
        .iter()
        .map(|&m| -> Result<f64> {
            let h = t_final / m as f64;
            let vals = par::map_range(m, |j| -> Result<f64> {
                let t = (j as f64 + 0.5) * h;
                let b = spec.sample(grid, t)?;
                Ok(lp_norm(&b.magnitude(), 2.0)?.powf(alpha))
            });
            let vals = vals.into_iter().collect::<Result<Vec<_>>>()?;
            Ok(par::sum(&vals) * h)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(trend_report(alpha, cell_counts.to_vec(), integrals))
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub spec: FieldSpec,
    pub time_dependent: bool,
    pub card: IntegrabilityCard,
    pub description: &'static str,
}

/// One representative parameter choice per catalog field.
pub fn catalog() -> Vec<CatalogEntry> {
    let entries = [
        (FieldSpec::constant(&[1.0, 0.0]), "uniform translation"),
        (FieldSpec::shear(1.0, 1), "sinusoidal shear flow, m periods per cell"),
        (FieldSpec::taylor_green(1.0), "Taylor-Green vortex array"),
        (FieldSpec::rotation_bump(1.0, 0.35), "compactly supported rotating eddy"),
        (FieldSpec::power_singularity(1.0, 1.5), "point vortex with |b| ~ r^(1-a)"),
        (
            FieldSpec::alternating_shear(1.0, 1, 0.5, 0.05),
            "shear switching direction every tau, amplitude ~ t^(-beta)",
        ),
    ];
    entries
        .into_iter()
        .map(|(spec, description)| CatalogEntry {
            time_dependent: spec.time_dependent(),
            card: spec.card(),
            spec,
            description,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(d: usize, n: usize) -> TorusGrid {
        TorusGrid::new(d, n).unwrap()
    }

    #[test]
    fn constant_field() {
        let g = grid(2, 16);
        let b = FieldSpec::constant(&[1.0, 0.0]).sample(&g, 0.0).unwrap();
        assert_eq!(relative_divergence(&b), 0.0);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert!((lp_norm(&b.magnitude(), p).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn taylor_green_against_closed_form() {
        let g = grid(2, 64);
        let b = FieldSpec::taylor_green(1.0).sample(&g, 0.0).unwrap();
        assert!(relative_divergence(&b) <= 1e-10);
        // |∇⊥ψ| = 2π sqrt(sin²(2πx)cos²(2πy) + cos²(2πx)sin²(2πy)), scanned
        // independently of the sampler.
        let mut max = 0.0f64;
        for i in 0..64 {
            for j in 0..64 {
                let (x, y) = (2.0 * PI * i as f64 / 64.0, 2.0 * PI * j as f64 / 64.0);
                let v = ((x.sin() * y.cos()).powi(2) + (x.cos() * y.sin()).powi(2)).sqrt();
                max = max.max(v);
            }
        }
        let linf = lp_norm(&b.magnitude(), f64::INFINITY).unwrap();
        assert!((linf - 2.0 * PI * max).abs() < 1e-12);
    }

    #[test]
    fn every_entry_passes_divergence_gate() {
        for (d, n) in [(2, 64), (3, 16)] {
            let g = grid(d, n);
            for e in catalog() {
                let spec = match &e.spec {
                    FieldSpec::Constant(_) => FieldSpec::constant(&vec![0.5; d]),
                    s => s.clone(),
                };
                let inst = spec.instantiate(&g, 0.13).unwrap();
                assert!(inst.metadata.divergence <= 1e-8, "{} d={d}", spec.name());
                assert!(inst.field.is_divergence_free());
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = grid(2, 16);
        for a in [0.0, 2.0, 2.5, -1.0] {
            let err = FieldSpec::power_singularity(1.0, a).instantiate(&g, 0.0).unwrap_err();
            assert!(matches!(err, Error::InvalidField(_)));
        }
        assert!(FieldSpec::shear(1.0, 0).validate().is_err());
        assert!(FieldSpec::taylor_green(1.0).sample(&grid(1, 16), 0.0).is_err());
        assert!(FieldSpec::constant(&[1.0, 2.0]).sample(&grid(3, 4), 0.0).is_err());
    }

    #[test]
    fn coarse_singular_field_warns() {
        let inst = FieldSpec::power_singularity(1.0, 1.75).instantiate(&grid(2, 16), 0.0).unwrap();
        assert!(!inst.metadata.warnings.is_empty());
        assert!(inst.metadata.leray_correction.unwrap() > LERAY_WARNING_THRESHOLD);
    }

    #[test]
    fn cutoff_is_smooth_and_monotone() {
        let (c0, _) = cutoff(0.0);
        let (c1, d1) = cutoff(CUTOFF_RADIUS);
        assert_eq!((c0, c1, d1), (1.0, 0.0, 0.0));
        let mut prev = 1.0;
        for i in 1..100 {
            let r = i as f64 * CUTOFF_RADIUS / 100.0;
            let (c, dc) = cutoff(r);
            assert!(c <= prev && dc <= 0.0);
            let fd = (cutoff(r + 1e-6).0 - cutoff(r - 1e-6).0) / 2e-6;
            assert!((fd - dc).abs() < 1e-5 * (1.0 + dc.abs()));
            prev = c;
        }
    }

    #[test]
    fn power_profile_is_radial_derivative_of_stream_function() {
        let a = 1.4;
        let psi = |r: f64| cutoff(r).0 * r.powf(2.0 - a);
        for r in [0.01, 0.1, 0.3, 0.45] {
            let fd = (psi(r + 1e-7) - psi(r - 1e-7)) / 2e-7;
            assert!((fd - power_profile_derivative(r, a)).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn bounded_fields_converge() {
        for p in [1.0, 3.0, 8.0] {
            let r = estimate_integrability(&FieldSpec::shear(1.0, 2), 2, p, &[16, 32, 64]).unwrap();
            assert_eq!(r.trend, Trend::Converging);
        }
        assert!(estimate_integrability(&FieldSpec::shear(1.0, 2), 2, 2.0, &[16, 32]).is_err());
    }

    #[test]
    fn power_singularity_trends_at_moderate_resolution() {
        let spec = FieldSpec::power_singularity(1.0, 1.5);
        let ns = [64, 128, 256, 512];
        assert_eq!(estimate_integrability(&spec, 2, 3.0, &ns).unwrap().trend, Trend::Converging);
        assert_eq!(estimate_integrability(&spec, 2, 5.0, &ns).unwrap().trend, Trend::Diverging);
        // at the critical exponent the integral keeps growing with N
        let crit = estimate_integrability(&spec, 2, 4.0, &ns).unwrap();
        assert!(crit.integrals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn alternating_shear_switches_direction() {
        let g = grid(2, 16);
        let spec = FieldSpec::alternating_shear(1.0, 1, 0.0, 0.1);
        let b0 = spec.sample(&g, 0.05).unwrap();
        let b1 = spec.sample(&g, 0.15).unwrap();
        assert!(b0.component(1).max_abs() == 0.0 && b0.component(0).max_abs() > 0.9);
        assert!(b1.component(0).max_abs() == 0.0 && b1.component(1).max_abs() > 0.9);
        assert!(spec.sample(&g, 0.0).unwrap().is_zero());
        assert!((spec.next_switch(0.05).unwrap() - 0.1).abs() < 1e-15);
        assert!((spec.next_switch(0.1).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(FieldSpec::shear(1.0, 1).next_switch(0.0), None);
    }

    #[test]
    fn alternating_shear_time_integrability() {
        // β = 1/2: ∫‖b‖₂^α finite iff α < 2
        let g = grid(2, 8);
        let spec = FieldSpec::alternating_shear(1.0, 1, 0.5, 0.05);
        assert_eq!(spec.card().alpha_time, Exponent(2.0));
        let counts = [100, 400, 1600, 6400];
        let t = |alpha| estimate_time_integrability(&spec, &g, alpha, 1.0, &counts).unwrap().trend;
        assert_eq!(t(1.0), Trend::Converging);
        assert_eq!(t(1.5), Trend::Converging);
        assert_eq!(t(3.0), Trend::Diverging);
    }

    #[test]
    fn serde_shape() {
        let s: FieldSpec =
            serde_json::from_str(r#"{"name":"power_singularity","params":{"a":1.5}}"#).unwrap();
        assert_eq!(s, FieldSpec::power_singularity(1.0, 1.5));
        assert!(serde_json::from_str::<FieldSpec>(
            r#"{"name":"shear","params":{"amplitude":1,"bogus":2}}"#
        )
        .is_err());
        let card = serde_json::to_string(&FieldSpec::shear(1.0, 1).card()).unwrap();
        assert_eq!(card, r#"{"p_finite_below":"inf","alpha_time":"inf"}"#);
    }
}
