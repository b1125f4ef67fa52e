//! Lebesgue and Sobolev norms on the unit torus.
//!
//! `L^p` norms use the rectangle rule on the grid, which is spectrally
//! accurate for smooth periodic integrands. The `L^∞` norm is the grid
//! maximum and therefore never exceeds the true supremum.
//!
//! `H^{±1}` norms use the Fourier multiplier `(1 + 4π²|k|²)^{±1}` over the
//! full frequency lattice. The dual-pairing definition of `H⁻¹` differs from
//! this one only by bounded equivalence constants.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::par;
use crate::spectral::{forward, lattice_symbol};

/// `‖f‖_{L^p}`, `p ∈ [1, ∞]`.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(format!("p = {p} must lie in [1, inf]")));
    }
    let v = f.values();
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let vol = f.grid().cell_volume();
    let s = if p == 1.0 {
        par::sum_by(v.len(), |i| v[i].abs())
    } else if p == 2.0 {
        par::sum_by(v.len(), |i| v[i] * v[i])
    } else {
        // Scale by the max to keep |v|^p representable for large p.
        let m = f.max_abs();
        if m == 0.0 {
            return Ok(0.0);
        }
        let s = par::sum_by(v.len(), |i| (v[i].abs() / m).powf(p));
        return Ok(m * (s * vol).powf(1.0 / p));
    };
    Ok((s * vol).powf(1.0 / p))
}

/// `∫ |f|^p` (no root), used by integrability trend studies.
pub fn lp_integral(f: &ScalarField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 || p.is_infinite() {
        return Err(Error::InvalidExponent(format!("p = {p} must lie in [1, inf)")));
    }
    let v = f.values();
    Ok(par::sum_by(v.len(), |i| v[i].abs().powf(p)) * f.grid().cell_volume())
}

/// `L^p` norm of the pointwise magnitude of a vector field.
pub fn lp_norm_vector(v: &VectorField, p: f64) -> Result<f64> {
    lp_norm(&v.magnitude(), p)
}

/// `(Σ_k (1 + 4π²|k|²)^s |f̂(k)|²)^{1/2}` for `s ∈ {−1, +1}`.
pub fn h_norm(f: &ScalarField, s: i32) -> Result<f64> {
    if s != 1 && s != -1 {
        return Err(Error::InvalidExponent(format!(
            "Sobolev index {s} not supported (expected -1 or +1)"
        )));
    }
    let spec = forward(f);
    let g = *f.grid();
    let c = spec.coeffs();
    let total = par::sum_by(c.len(), |i| {
        let m = 1.0 + lattice_symbol(&g, i);
        let w = if s == 1 { m } else { 1.0 / m };
        w * c[i].norm_sqr()
    });
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn sine(n: usize) -> ScalarField {
        let g = TorusGrid::new(1, n).unwrap();
        ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap()
    }

    fn random(d: usize, n: usize, seed: u64) -> ScalarField {
        let g = TorusGrid::new(d, n).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
    }

    /// Composite Simpson on 20000 panels of ∫₀¹ |sin 2πx|^p, independent of
    /// the grid rule under test.
    fn fine_quadrature(p: f64) -> f64 {
        let m = 20_000;
        let h = 1.0 / m as f64;
        let f = |x: f64| (2.0 * PI * x).sin().abs().powf(p);
        let mut s = f(0.0) + f(1.0);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn constant_field_all_p() {
        let g = TorusGrid::new(2, 8).unwrap();
        let c = ScalarField::constant(g, 3.0);
        for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            assert!((lp_norm(&c, p).unwrap() - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sine_l2_and_linf() {
        let oracle = fine_quadrature(2.0).sqrt();
        assert!((oracle - 0.5_f64.sqrt()).abs() < 1e-10);
        for n in [16, 64, 256] {
            assert!((lp_norm(&sine(n), 2.0).unwrap() - 0.5_f64.sqrt()).abs() < 1e-10);
        }
        assert!((lp_norm(&sine(256), f64::INFINITY).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_small_p_and_bad_sobolev_index() {
        assert!(lp_norm(&sine(8), 0.5).is_err());
        assert!(h_norm(&sine(8), 0).is_err());
        assert!(h_norm(&sine(8), 2).is_err());
    }

    #[test]
    fn sobolev_norms_of_sine() {
        let f = sine(64);
        // two-term oracle: |f̂(±1)| = 1/2
        let two_term = |s: f64| (2.0 * 0.25 * (1.0 + 4.0 * PI * PI).powf(s)).sqrt();
        assert!((h_norm(&f, -1).unwrap() - two_term(-1.0)).abs() < 1e-12);
        assert!((h_norm(&f, 1).unwrap() - two_term(1.0)).abs() < 1e-12);
        assert!((two_term(-1.0) - 0.111141).abs() < 1e-6);
        assert!((two_term(1.0) - 4.498801).abs() < 1e-6);
        let g = TorusGrid::new(2, 8).unwrap();
        assert!((h_norm(&ScalarField::constant(g, -2.0), -1).unwrap() - 2.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn homogeneity(seed in any::<u64>(), alpha in -5.0..5.0f64, pi in 0usize..5) {
            let p = [1.0, 1.5, 2.0, 3.0, f64::INFINITY][pi];
            let f = random(2, 16, seed);
            let lhs = lp_norm(&f.scale(alpha), p).unwrap();
            let rhs = alpha.abs() * lp_norm(&f, p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn holder_and_nesting(seed in any::<u64>(), p in 1.0..8.0f64) {
            let f = random(2, 16, seed);
            let g = random(2, 16, seed ^ 0xabcdef);
            let pc = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
            let fg = &f * &g;
            prop_assert!(lp_norm(&fg, 1.0).unwrap()
                <= lp_norm(&f, p).unwrap() * lp_norm(&g, pc).unwrap() + 1e-10);
            let q2 = p + 1.0;
            prop_assert!(lp_norm(&f, p).unwrap() <= lp_norm(&f, q2).unwrap() + 1e-10);
            prop_assert!(lp_norm(&f, q2).unwrap() <= lp_norm(&f, f64::INFINITY).unwrap() + 1e-10);
        }

        #[test]
        fn sobolev_sandwich(seed in any::<u64>(), d in 1usize..=3) {
            let n = if d == 3 { 8 } else { 16 };
            let f = random(d, n, seed);
            let l2 = lp_norm(&f, 2.0).unwrap();
            prop_assert!(h_norm(&f, -1).unwrap() <= l2 * (1.0 + 1e-12));
            prop_assert!(l2 <= h_norm(&f, 1).unwrap() * (1.0 + 1e-12));
        }
    }
}
