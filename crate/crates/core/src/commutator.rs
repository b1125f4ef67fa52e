//! Mollification commutators and their decay under dyadic δ sweeps.
//!
//! ```text
//! r^δ        = b·∇(w∗ρ^δ) − (b·∇w)∗ρ^δ
//! divform    = div[b(w∗ρ^δ) − (bw)∗ρ^δ]
//! correction = (w∗ρ^δ) div b − (w div b)∗ρ^δ
//! ```
//!
//! By the product rule `divform = r^δ + correction`, so the two forms agree
//! when `div b = 0`. Derivatives are spectral, products pointwise on the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::library::FieldSpec;
use crate::mollifier::{dyadic_schedule, Mollifier, Profile};
use crate::norms::{h_norm, lp_norm};
use crate::par;
use crate::quadrature::{fit_slope, left_rectangle, simpson};
use crate::solver::{Trajectory, Velocity};
use crate::spectral::{divergence, forward, gradient, inverse, spectral_gradient};

fn check(b: &VectorField, w: &ScalarField) -> Result<()> {
    w.check_grid(b.grid())
}

/// `r^δ = b·∇(w∗ρ^δ) − (b·∇w)∗ρ^δ`.
pub fn commutator(b: &VectorField, w: &ScalarField, m: &Mollifier) -> Result<ScalarField> {
    check(b, w)?;
    let sym = m.symbol(b.grid())?;
    let w_hat = forward(w);
    let grad_wm = spectral_gradient(&sym.apply_spectral(&w_hat)?);
    let grad_w = spectral_gradient(&w_hat);
    let first = b.dot(&grad_wm)?;
    let second = sym.apply(&b.dot(&grad_w)?)?;
    Ok(&first - &second)
}

/// `div[b(w∗ρ^δ) − (bw)∗ρ^δ]`.
pub fn commutator_divform(b: &VectorField, w: &ScalarField, m: &Mollifier) -> Result<ScalarField> {
    check(b, w)?;
    let sym = m.symbol(b.grid())?;
    let wm = sym.apply(w)?;
    let bw = b.times_scalar(w)?;
    let flux = b
        .times_scalar(&wm)?
        .components()
        .iter()
        .zip(bw.components())
        .map(|(a, c)| Ok(a - &sym.apply(c)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(divergence(&VectorField::new(flux)?))
}

/// `(w∗ρ^δ) div b − (w div b)∗ρ^δ`.
pub fn commutator_divb_correction(
    b: &VectorField,
    w: &ScalarField,
    m: &Mollifier,
) -> Result<ScalarField> {
    check(b, w)?;
    let sym = m.symbol(b.grid())?;
    let div_b = divergence(b);
    let first = &sym.apply(w)? * &div_b;
    let second = sym.apply(&(w * &div_b))?;
    Ok(&first - &second)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutatorNorm {
    /// `∫₀ᵀ ‖r^δ(t)‖₁ dt`.
    L1Spacetime,
    /// `(∫₀ᵀ ‖r^δ(t)‖²_{H⁻¹} dt)^{1/2}`.
    L2Hminus1,
}

/// Where the commutator's `w` comes from.
#[derive(Clone, Debug)]
pub enum WSource {
    /// A time-independent field.
    Field(ScalarField),
    /// Recorded snapshots of a solve.
    Trajectory(Trajectory),
}

#[derive(Clone, Debug)]
pub struct CommutatorStudyConfig {
    pub b_spec: FieldSpec,
    pub grid: TorusGrid,
    pub w_source: WSource,
    pub delta0: f64,
    pub levels: usize,
    pub profile: Profile,
    pub norm: CommutatorNorm,
    /// Midpoint nodes in `[0, T]` for an explicit `w`; a trajectory uses its
    /// own snapshots.
    pub time_samples: usize,
    pub t_final: f64,
}

impl CommutatorStudyConfig {
    pub fn schedule(&self) -> Vec<f64> {
        dyadic_schedule(self.delta0, self.levels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidConfig("a sweep needs at least 2 levels".into()));
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(Error::InvalidConfig(format!("delta0 = {} must be positive", self.delta0)));
        }
        let last = *self.schedule().last().unwrap();
        Mollifier::new(self.profile, last)?.check_resolution(&self.grid)?;
        if !(self.t_final > 0.0) {
            return Err(Error::InvalidConfig("t_final must be positive".into()));
        }
        self.b_spec.validate()?;
        match &self.w_source {
            WSource::Field(w) => {
                w.check_grid(&self.grid)?;
                if self.time_samples == 0 {
                    return Err(Error::InvalidConfig("time_samples must be >= 1".into()));
                }
                if let FieldSpec::AlternatingShear(p) = &self.b_spec {
                    let h = self.t_final / self.time_samples as f64;
                    if h > 0.5 * p.switch_period {
                        return Err(Error::InvalidConfig(format!(
                            "time node spacing {h} exceeds half the switch period {}",
                            p.switch_period
                        )));
                    }
                }
            }
            WSource::Trajectory(tr) => {
                tr.initial().check_grid(&self.grid)?;
                if tr.times.len() < 2 {
                    return Err(Error::InvalidConfig("trajectory has a single snapshot".into()));
                }
                if let FieldSpec::AlternatingShear(p) = &self.b_spec {
                    let widest = tr.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
                    if widest > 0.5 * p.switch_period * (1.0 + 1e-9) {
                        return Err(Error::InvalidConfig(format!(
                            "snapshot spacing {widest} exceeds half the switch period {}; lower record_every",
                            p.switch_period
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Every norm at roundoff level.
    Exact,
    Decay,
    /// Some consecutive ratio above 1.2.
    NoDecay,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub delta: f64,
    pub norm: f64,
    /// `norm_j / norm_{j−1}`; absent on the first row.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayTable {
    pub norm_type: CommutatorNorm,
    pub profile: Profile,
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `log norm` against `log δ`; `None` unless the
    /// verdict is `decay`.
    pub fitted_rate: Option<f64>,
    pub verdict: Verdict,
}

impl DecayTable {
    pub fn norms(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.norm).collect()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ratio).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.ratios().iter().all(|&r| r < 1.0)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["delta", "norm", "ratio"])?;
        for r in &self.rows {
            let ratio = r.ratio.map(|v| format!("{v:.9e}")).unwrap_or_default();
            out.write_record([format!("{:.9e}", r.delta), format!("{:.9e}", r.norm), ratio])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Norms at or below this are treated as exact zeros.
pub const EXACT_TOL: f64 = 1e-12;
/// Largest tolerated growth between consecutive levels.
pub const NO_DECAY_RATIO: f64 = 1.2;

/// Builds the table and verdict from `(δ_j, norm_j)`.
pub fn decay_table(
    norm_type: CommutatorNorm,
    profile: Profile,
    deltas: &[f64],
    norms: &[f64],
) -> DecayTable {
    let rows: Vec<DecayRow> = deltas
        .iter()
        .zip(norms)
        .enumerate()
        .map(|(j, (&delta, &norm))| DecayRow {
            delta,
            norm,
            ratio: (j > 0).then(|| norm / norms[j - 1]),
        })
        .collect();
    let verdict = if norms.iter().all(|&n| n <= EXACT_TOL) {
        Verdict::Exact
    } else if rows.iter().filter_map(|r| r.ratio).any(|r| !(r <= NO_DECAY_RATIO)) {
        Verdict::NoDecay
    } else {
        Verdict::Decay
    };
    let fitted_rate = (verdict == Verdict::Decay).then(|| {
        let skip = usize::from(deltas.len() >= 5);
        let x: Vec<f64> = deltas[skip..].iter().map(|d| d.ln()).collect();
        let y: Vec<f64> = norms[skip..].iter().map(|n| n.ln()).collect();
        fit_slope(&x, &y)
    });
    DecayTable { norm_type, profile, rows, fitted_rate, verdict }
}

fn space_norm(r: &ScalarField, norm: CommutatorNorm) -> Result<f64> {
    match norm {
        CommutatorNorm::L1Spacetime => lp_norm(r, 1.0),
        CommutatorNorm::L2Hminus1 => Ok(h_norm(r, -1)?.powi(2)),
    }
}

fn finish(norm: CommutatorNorm, integral: f64) -> f64 {
    match norm {
        CommutatorNorm::L1Spacetime => integral,
        CommutatorNorm::L2Hminus1 => integral.max(0.0).sqrt(),
    }
}

/// Evaluates the configured space-time norm of `r^δ` at every level of the
/// schedule (levels in parallel).
pub fn convergence_study(cfg: &CommutatorStudyConfig) -> Result<DecayTable> {
    cfg.validate()?;
    let velocity = Velocity::from_spec(&cfg.b_spec, &cfg.grid)?;
    let deltas = cfg.schedule();
    // (time, weight-bearing nodes, w at that time)
    let (times, ws): (Vec<f64>, Vec<&ScalarField>) = match &cfg.w_source {
        WSource::Field(w) => {
            let h = cfg.t_final / cfg.time_samples as f64;
            ((0..cfg.time_samples).map(|i| (i as f64 + 0.5) * h).collect(), vec![w; cfg.time_samples])
        }
        WSource::Trajectory(tr) => (tr.times.clone(), tr.states.iter().collect()),
    };
    let bs = times.iter().map(|&t| velocity.at(t)).collect::<Result<Vec<_>>>()?;
    let norms = par::map_slice(&deltas, |&delta| -> Result<f64> {
        let m = Mollifier::new(cfg.profile, delta)?;
        let vals = bs
            .iter()
            .zip(&ws)
            .map(|(b, w)| space_norm(&commutator(b, w, &m)?, cfg.norm))
            .collect::<Result<Vec<_>>>()?;
        let integral = match &cfg.w_source {
            WSource::Field(_) => vals.iter().sum::<f64>() * cfg.t_final / cfg.time_samples as f64,
            WSource::Trajectory(_) => left_rectangle(&times, &vals),
        };
        Ok(finish(cfg.norm, integral))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(decay_table(cfg.norm, cfg.profile, &deltas, &norms))
}

/// Both sides of the mollified energy identity for a trajectory `u`:
///
/// ```text
/// ½‖u^δ(T)‖² + ∫₀ᵀ‖∇u^δ‖² − ½‖u^δ(0)‖²  =  ∫₀ᵀ∫ r^δ u^δ
/// ```
///
/// valid for divergence-free `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyCoupling {
    pub delta: f64,
    /// Left-hand side.
    pub energy_residual: f64,
    /// Right-hand side.
    pub commutator_pairing: f64,
}

impl EnergyCoupling {
    pub fn mismatch(&self) -> f64 {
        (self.energy_residual - self.commutator_pairing).abs()
    }
}

/// Evaluates [`EnergyCoupling`] with Simpson quadrature over the snapshots.
/// `b` receives the mollifier the run used.
pub fn energy_coupling(traj: &Trajectory, b: &Velocity, m: &Mollifier) -> Result<EnergyCoupling> {
    let g = *traj.initial().grid();
    m.check_resolution(&g)?;
    let b = match (traj.b_mollifier, b.mollifier()) {
        (Some(bm), None) => b.mollified(bm)?,
        _ => b.clone(),
    };
    let sym = m.symbol(&g)?;
    let per_time = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, u)| -> Result<(f64, f64, f64)> {
            let u_hat = forward(u);
            let um_hat = sym.apply_spectral(&u_hat)?;
            let um = inverse(&um_hat);
            let bt = b.at(t)?;
            let r = commutator(&bt, u, m)?;
            Ok((0.5 * um.inner(&um)?, um_hat.gradient_energy(), r.inner(&um)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let grad: Vec<f64> = per_time.iter().map(|v| v.1).collect();
    let pair: Vec<f64> = per_time.iter().map(|v| v.2).collect();
    let e0 = per_time[0].0;
    let e1 = per_time.last().unwrap().0;
    Ok(EnergyCoupling {
        delta: m.delta,
        energy_residual: e1 + simpson(&traj.times, &grad) - e0,
        commutator_pairing: simpson(&traj.times, &pair),
    })
}

/// [`energy_coupling`] along a schedule, levels in parallel.
pub fn energy_coupling_sweep(
    traj: &Trajectory,
    b: &Velocity,
    profile: Profile,
    deltas: &[f64],
) -> Result<Vec<EnergyCoupling>> {
    par::map_slice(deltas, |&d| energy_coupling(traj, b, &Mollifier::new(profile, d)?))
        .into_iter()
        .collect()
}

/// Convenience: `b·∇w` with a spectral gradient.
pub fn transport_derivative(b: &VectorField, w: &ScalarField) -> Result<ScalarField> {
    check(b, w)?;
    b.dot(&gradient(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, InitialDatum, SolverConfig};
    use std::f64::consts::PI;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(2, n).unwrap()
    }

    fn random_w(g: TorusGrid, seed: u64) -> ScalarField {
        InitialDatum::SmoothRandom { seed, max_mode: 6 }.sample(&g).unwrap()
    }

    /// A non-solenoidal field: `∇(cos 2πx₁ · sin 4πx₂)`.
    fn gradient_field(g: TorusGrid) -> VectorField {
        gradient(&ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos() * (4.0 * PI * x[1]).sin()).unwrap())
    }

    #[test]
    fn trivial_cases_vanish() {
        let g = grid(64);
        let m = Mollifier::gaussian(0.1).unwrap();
        let w = random_w(g, 1);
        let b = VectorField::constant(g, &[1.0, -0.5]).unwrap();
        assert!(commutator(&b, &w, &m).unwrap().max_abs() <= 1e-12);
        assert!(commutator_divform(&b, &w, &m).unwrap().max_abs() <= 1e-12);
        let tg = FieldSpec::taylor_green(1.0).sample(&g, 0.0).unwrap();
        let c = ScalarField::constant(g, 3.0);
        assert!(commutator(&tg, &c, &m).unwrap().max_abs() <= 1e-12);
        assert!(commutator_divb_correction(&tg, &w, &m).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn zero_mean_for_solenoidal_b() {
        let g = grid(64);
        for spec in [FieldSpec::taylor_green(1.0), FieldSpec::power_singularity(1.0, 1.25)] {
            let b = spec.sample(&g, 0.0).unwrap();
            let r = commutator(&b, &random_w(g, 4), &Mollifier::bump(0.1).unwrap()).unwrap();
            assert!(r.integral().abs() <= 1e-10, "{}", spec.name());
        }
    }

    #[test]
    fn first_order_decay_for_lipschitz_b() {
        let g = grid(256);
        let b = FieldSpec::taylor_green(1.0).sample(&g, 0.0).unwrap();
        let w = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        let norms: Vec<f64> = [0.05, 0.025, 0.0125]
            .iter()
            .map(|&d| lp_norm(&commutator(&b, &w, &Mollifier::gaussian(d).unwrap()).unwrap(), 1.0).unwrap())
            .collect();
        assert!(norms[0] / norms[1] >= 1.8 && norms[1] / norms[2] >= 1.8, "{norms:?}");
    }

    #[test]
    fn divform_identity() {
        let g = grid(256);
        let m = Mollifier::gaussian(0.05).unwrap();
        let w = random_w(g, 7);
        for spec in [FieldSpec::taylor_green(1.0), FieldSpec::shear(2.0, 3)] {
            let b = spec.sample(&g, 0.0).unwrap();
            let d = &commutator(&b, &w, &m).unwrap() - &commutator_divform(&b, &w, &m).unwrap();
            assert!(lp_norm(&d, 2.0).unwrap() <= 1e-9, "{}", spec.name());
        }
        let b = gradient_field(g);
        let direct = commutator(&b, &w, &m).unwrap();
        let div = commutator_divform(&b, &w, &m).unwrap();
        let corr = commutator_divb_correction(&b, &w, &m).unwrap();
        assert!(lp_norm(&(&div - &direct), 2.0).unwrap() > 1e-3);
        assert!(lp_norm(&(&(&div - &direct) - &corr), 2.0).unwrap() <= 1e-9);
    }

    #[test]
    fn correction_decays() {
        let g = grid(128);
        let b = gradient_field(g);
        for w in [random_w(g, 2), ScalarField::constant(g, 1.5)] {
            let mut prev = f64::INFINITY;
            for d in dyadic_schedule(0.2, 4) {
                let c = commutator_divb_correction(&b, &w, &Mollifier::bump(d).unwrap()).unwrap();
                let n = lp_norm(&c, 2.0).unwrap();
                assert!(n < prev);
                prev = n;
            }
        }
    }

    #[test]
    fn verdicts() {
        let d = [0.1, 0.05, 0.025];
        let t = decay_table(CommutatorNorm::L1Spacetime, Profile::BumpCompact, &d, &[1.0, 0.5, 0.25]);
        assert_eq!(t.verdict, Verdict::Decay);
        assert!((t.fitted_rate.unwrap() - 1.0).abs() < 1e-12);
        let t = decay_table(CommutatorNorm::L1Spacetime, Profile::BumpCompact, &d, &[1.0, 1.3, 0.2]);
        assert_eq!(t.verdict, Verdict::NoDecay);
        assert_eq!(t.fitted_rate, None);
        let t = decay_table(CommutatorNorm::L1Spacetime, Profile::BumpCompact, &d, &[0.0, 1e-14, 0.0]);
        assert_eq!(t.verdict, Verdict::Exact);
        // first level dropped from the fit with 5 levels
        let d5 = dyadic_schedule(0.1, 5);
        let t = decay_table(CommutatorNorm::L1Spacetime, Profile::BumpCompact, &d5, &[9.0, 0.4, 0.1, 0.025, 0.00625]);
        assert!((t.fitted_rate.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_b_study_is_exact() {
        let g = grid(64);
        let cfg = CommutatorStudyConfig {
            b_spec: FieldSpec::constant(&[1.0, 1.0]),
            grid: g,
            w_source: WSource::Field(random_w(g, 5)),
            delta0: 0.2,
            levels: 3,
            profile: Profile::GaussianPeriodized,
            norm: CommutatorNorm::L2Hminus1,
            time_samples: 2,
            t_final: 1.0,
        };
        let t = convergence_study(&cfg).unwrap();
        assert_eq!(t.verdict, Verdict::Exact);
        let bad = CommutatorStudyConfig { levels: 6, ..cfg };
        assert!(matches!(convergence_study(&bad), Err(Error::UnresolvedKernel { .. })));
    }

    #[test]
    fn trajectory_source_and_energy_coupling() {
        let g = grid(32);
        let spec = FieldSpec::taylor_green(1.0);
        let b = Velocity::from_spec(&spec, &g).unwrap();
        let u0 = random_w(g, 3);
        let mut cfg = SolverConfig::fixed(0.05, 1.25e-4);
        cfg.record_every = 1;
        let traj = solve(&b, &u0, &cfg).unwrap();
        let c = energy_coupling(&traj, &b, &Mollifier::gaussian(0.1).unwrap()).unwrap();
        assert!(c.mismatch() <= 1e-6, "{c:?}");
        let study = CommutatorStudyConfig {
            b_spec: spec,
            grid: g,
            w_source: WSource::Trajectory(traj),
            delta0: 0.25,
            levels: 3,
            profile: Profile::BumpCompact,
            norm: CommutatorNorm::L1Spacetime,
            time_samples: 0,
            t_final: 0.05,
        };
        assert_eq!(convergence_study(&study).unwrap().verdict, Verdict::Decay);
    }

    #[test]
    fn switch_resolution_validated() {
        let g = grid(32);
        let cfg = CommutatorStudyConfig {
            b_spec: FieldSpec::alternating_shear(1.0, 1, 0.0, 0.1),
            grid: g,
            w_source: WSource::Field(random_w(g, 1)),
            delta0: 0.2,
            levels: 2,
            profile: Profile::GaussianPeriodized,
            norm: CommutatorNorm::L1Spacetime,
            time_samples: 4,
            t_final: 1.0,
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        assert!(CommutatorStudyConfig { time_samples: 20, ..cfg }.validate().is_ok());
    }
}
