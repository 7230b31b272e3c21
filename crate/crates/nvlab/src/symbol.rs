//! Pointwise symbols: the multiplier m(ξ) = ξ̄/ξ, the dispersion symbol w(ξ),
//! the modulation σ = τ − w(ξ) and the resonance function H with its gradient.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, NvError, Result};

/// Energy level E of the equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParam {
    e: f64,
}

impl EnergyParam {
    pub fn new(e: f64) -> Result<Self> {
        require_finite("E", e)?;
        Ok(Self { e })
    }

    /// Energy for operations that only make sense for E < 0.
    pub fn negative(e: f64) -> Result<Self> {
        let p = Self::new(e)?;
        if e >= 0.0 {
            return Err(NvError::Precondition(format!("E < 0 required, got {e}")));
        }
        Ok(p)
    }

    pub fn value(self) -> f64 {
        self.e
    }

    pub fn abs(self) -> f64 {
        self.e.abs()
    }
}

/// Frequency point (ξ1, ξ2) with dual time frequency τ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub xi1: f64,
    pub xi2: f64,
    pub tau: f64,
}

impl SpectralPoint {
    pub fn new(xi1: f64, xi2: f64) -> Self {
        Self { xi1, xi2, tau: 0.0 }
    }

    pub fn with_tau(xi1: f64, xi2: f64, tau: f64) -> Self {
        Self { xi1, xi2, tau }
    }

    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.xi1, self.xi2)
    }

    fn check(&self) -> Result<()> {
        require_finite("xi1", self.xi1)?;
        require_finite("xi2", self.xi2)?;
        require_finite("tau", self.tau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolValue {
    pub value: f64,
    /// Set when ξ = 0 and the value is the continuous extension 0.
    pub at_origin_convention: bool,
}

/// (ξ1 − iξ2)/(ξ1 + iξ2), with value 0 at the origin.
pub fn multiplier_m(p: SpectralPoint) -> Complex64 {
    multiplier_raw(p.xi1, p.xi2)
}

#[inline]
pub fn multiplier_raw(xi1: f64, xi2: f64) -> Complex64 {
    let q = xi1 * xi1 + xi2 * xi2;
    if q == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    // (ξ̄)² / |ξ|²
    Complex64::new((xi1 * xi1 - xi2 * xi2) / q, -2.0 * xi1 * xi2 / q)
}

/// 2(ξ1³ − 3ξ1ξ2²)(1 − 3E/|ξ|²) for any sign of E, 0 at the origin.
#[inline]
pub fn dispersion(xi1: f64, xi2: f64, e: f64) -> f64 {
    let q = xi1 * xi1 + xi2 * xi2;
    if q == 0.0 {
        return 0.0;
    }
    2.0 * (xi1 * xi1 * xi1 - 3.0 * xi1 * xi2 * xi2) * (1.0 - 3.0 * e / q)
}

/// Dispersion symbol w(ξ1, ξ2) for E ≤ 0.
pub fn symbol_w(p: SpectralPoint, e: EnergyParam) -> Result<SymbolValue> {
    p.check()?;
    if e.value() > 0.0 {
        return Err(NvError::Precondition(format!(
            "symbol_w requires E <= 0, got {}",
            e.value()
        )));
    }
    let origin = p.xi1 == 0.0 && p.xi2 == 0.0;
    Ok(SymbolValue {
        value: dispersion(p.xi1, p.xi2, e.value()),
        at_origin_convention: origin,
    })
}

/// (ξ³ + ξ̄³)(1 − 3E/|ξ|²) in the complex identification ξ = ξ1 + iξ2.
pub fn symbol_p_complex(xi: Complex64, e: EnergyParam) -> f64 {
    let q = xi.norm_sqr();
    if q == 0.0 {
        return 0.0;
    }
    let c = xi * xi * xi;
    2.0 * c.re * (1.0 - 3.0 * e.value() / q)
}

/// σ = τ − w(ξ).
pub fn sigma(p: SpectralPoint, e: EnergyParam) -> Result<f64> {
    Ok(p.tau - symbol_w(p, e)?.value)
}

/// H[ξ, ξ̂] = w(ξ̂) − w(ξ) − w(ξ̂ − ξ).
pub fn resonance_h(xi: SpectralPoint, xihat: SpectralPoint, e: EnergyParam) -> Result<f64> {
    xi.check()?;
    xihat.check()?;
    let e = EnergyParam::negative(e.value())?;
    Ok(resonance_raw(xi.xi1, xi.xi2, xihat.xi1, xihat.xi2, e.value()))
}

#[inline]
pub fn resonance_raw(x1: f64, x2: f64, h1: f64, h2: f64, e: f64) -> f64 {
    dispersion(h1, h2, e) - dispersion(x1, x2, e) - dispersion(h1 - x1, h2 - x2, e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Xi1,
    Xi2,
}

/// Closed-form ∂H/∂ξ_j at fixed ξ̂.
pub fn resonance_dh(xi: SpectralPoint, xihat: SpectralPoint, e: EnergyParam, axis: Axis) -> Result<f64> {
    xi.check()?;
    xihat.check()?;
    let e = EnergyParam::negative(e.value())?;
    let (n1, n2) = (xihat.xi1 - xi.xi1, xihat.xi2 - xi.xi2);
    if xi.xi1 == 0.0 && xi.xi2 == 0.0 {
        return Err(NvError::Precondition("resonance_dH: xi = 0 is singular".into()));
    }
    if n1 == 0.0 && n2 == 0.0 {
        return Err(NvError::Precondition("resonance_dH: xihat = xi is singular".into()));
    }
    Ok(resonance_dh_raw(xi.xi1, xi.xi2, n1, n2, e.abs(), axis))
}

/// Gradient formula with η = ξ̂ − ξ and k = |E|.
#[inline]
pub fn resonance_dh_raw(x1: f64, x2: f64, n1: f64, n2: f64, k: f64, axis: Axis) -> f64 {
    let qx = x1 * x1 + x2 * x2;
    let qn = n1 * n1 + n2 * n2;
    let gx = 1.0 + 3.0 * k / qx;
    let gn = 1.0 + 3.0 * k / qn;
    match axis {
        Axis::Xi1 => {
            -6.0 * ((x1 * x1 - x2 * x2) * gx - (n1 * n1 - n2 * n2) * gn
                - 2.0 * k * x1 * x1 * (x1 * x1 - 3.0 * x2 * x2) / (qx * qx)
                + 2.0 * k * n1 * n1 * (n1 * n1 - 3.0 * n2 * n2) / (qn * qn))
        }
        Axis::Xi2 => {
            -12.0 * (-x1 * x2 * gx + n1 * n2 * gn
                - k * x1 * x2 * (x1 * x1 - 3.0 * x2 * x2) / (qx * qx)
                + k * n1 * n2 * (n1 * n1 - 3.0 * n2 * n2) / (qn * qn))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn en(e: f64) -> EnergyParam {
        EnergyParam::new(e).unwrap()
    }

    #[test]
    fn multiplier_examples() {
        let m = multiplier_m(SpectralPoint::new(1.0, 0.0));
        assert!((m - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let m = multiplier_m(SpectralPoint::new(0.0, 1.0));
        assert!((m - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let m = multiplier_m(SpectralPoint::new(3.0, 4.0));
        assert!((m - Complex64::new(-7.0 / 25.0, -24.0 / 25.0)).norm() < 1e-15);
        assert_eq!(multiplier_m(SpectralPoint::new(0.0, 0.0)).norm(), 0.0);
    }

    #[test]
    fn symbol_examples() {
        let v = symbol_w(SpectralPoint::new(1.0, 0.0), en(-1.0)).unwrap();
        assert_eq!(v.value, 8.0);
        assert!(!v.at_origin_convention);
        assert_eq!(symbol_w(SpectralPoint::new(0.0, 2.5), en(-3.0)).unwrap().value, 0.0);
        let a = symbol_w(SpectralPoint::new(2.0, 1.0), en(-1.0)).unwrap().value;
        let b = symbol_w(SpectralPoint::new(-2.0, -1.0), en(-1.0)).unwrap().value;
        assert_eq!(a, -b);
        let o = symbol_w(SpectralPoint::new(0.0, 0.0), en(-1.0)).unwrap();
        assert!(o.at_origin_convention && o.value == 0.0);
        assert!(symbol_w(SpectralPoint::new(1.0, 0.0), en(1.0)).is_err());
        assert!(symbol_w(SpectralPoint::new(f64::NAN, 0.0), en(-1.0)).is_err());
    }

    #[test]
    fn complex_symbol_examples() {
        assert!((symbol_p_complex(Complex64::new(1.0, 0.0), en(-1.0)) - 8.0).abs() < 1e-14);
        assert!(symbol_p_complex(Complex64::new(0.0, 1.0), en(-1.0)).abs() < 1e-14);
        let x0 = Complex64::new(1.0, 0.5);
        let rot = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let a = symbol_p_complex(x0, en(-1.0));
        let b = symbol_p_complex(rot * x0, en(-1.0));
        assert!((a - b).abs() < 1e-13 * a.abs().max(1.0));
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(SpectralPoint::with_tau(1.0, 0.0, 8.0), en(-1.0)).unwrap(), 0.0);
        assert_eq!(sigma(SpectralPoint::with_tau(0.0, 1.0, 0.0), en(-1.0)).unwrap(), 0.0);
        assert_eq!(sigma(SpectralPoint::with_tau(0.0, 0.0, 5.0), en(-1.0)).unwrap(), 5.0);
    }

    #[test]
    fn resonance_examples() {
        let p = SpectralPoint::new(1.0, 0.0);
        assert_eq!(resonance_h(p, p, en(-1.0)).unwrap(), 0.0);
        let h = resonance_h(p, SpectralPoint::new(2.0, 0.0), en(-1.0)).unwrap();
        assert!((h - 12.0).abs() < 1e-13);
        assert!(resonance_h(p, p, en(0.0)).is_err());
    }

    #[test]
    fn resonance_symmetry_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x = SpectralPoint::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let h = SpectralPoint::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let y = SpectralPoint::new(h.xi1 - x.xi1, h.xi2 - x.xi2);
            let a = resonance_h(x, h, en(-1.3)).unwrap();
            let b = resonance_h(y, h, en(-1.3)).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn resonance_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = en(-1.0);
        let mut n = 0;
        while n < 100 {
            let x1 = rng.gen_range(-2.0..2.0);
            let x2 = rng.gen_range(-2.0..2.0);
            let h1 = rng.gen_range(-4.0..4.0);
            let h2 = rng.gen_range(-4.0..4.0);
            let qx = x1 * x1 + x2 * x2;
            let qn = (h1 - x1) * (h1 - x1) + (h2 - x2) * (h2 - x2);
            if qx < 0.04 || qn < 0.04 {
                continue;
            }
            n += 1;
            let hstep = 1e-5;
            let f = |a: f64, b: f64| resonance_raw(a, b, h1, h2, e.value());
            let fd1 = (f(x1 + hstep, x2) - f(x1 - hstep, x2)) / (2.0 * hstep);
            let fd2 = (f(x1, x2 + hstep) - f(x1, x2 - hstep)) / (2.0 * hstep);
            let xi = SpectralPoint::new(x1, x2);
            let xh = SpectralPoint::new(h1, h2);
            let d1 = resonance_dh(xi, xh, e, Axis::Xi1).unwrap();
            let d2 = resonance_dh(xi, xh, e, Axis::Xi2).unwrap();
            let scale = 1.0 + d1.abs().max(d2.abs());
            assert!((d1 - fd1).abs() <= 1e-6 * scale, "d1 {d1} fd {fd1}");
            assert!((d2 - fd2).abs() <= 1e-6 * scale, "d2 {d2} fd {fd2}");
        }
    }

    #[test]
    fn resonance_gradient_swap_symmetry() {
        // ξ̂ = 2ξ makes ξ and ξ̂ − ξ coincide, so the ∂ξ2 bracket cancels.
        let xi = SpectralPoint::new(1.0, 1.0);
        let xh = SpectralPoint::new(2.0, 2.0);
        let d2 = resonance_dh(xi, xh, en(-1.0), Axis::Xi2).unwrap();
        assert!(d2.abs() < 1e-13);
        assert!(resonance_dh(xi, xi, en(-1.0), Axis::Xi1).is_err());
        assert!(resonance_dh(SpectralPoint::new(0.0, 0.0), xh, en(-1.0), Axis::Xi1).is_err());
    }

    #[test]
    fn fractional_kernels_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let a: f64 = rng.gen_range(-100.0..100.0);
            let b: f64 = rng.gen_range(-100.0..100.0);
            assert!((a * b / (a * a + b * b)).abs() <= 0.5 + 1e-15);
        }
    }

    #[test]
    fn continuity_at_origin() {
        for &r in &[1e-1, 1e-3, 1e-6] {
            for k in 0..16 {
                let th = k as f64 * 0.39;
                let (x1, x2) = (r * th.cos(), r * th.sin());
                let w = dispersion(x1, x2, -1.0);
                assert!(w.abs() <= 2.0 * r.powi(3) + 24.0 * r);
            }
        }
    }

    proptest! {
        #[test]
        fn multiplier_unit_modulus_and_even(x1 in -1e3f64..1e3, x2 in -1e3f64..1e3) {
            prop_assume!(x1 * x1 + x2 * x2 > 1e-12);
            let m = multiplier_raw(x1, x2);
            prop_assert!((m.norm() - 1.0).abs() < 1e-14);
            prop_assert_eq!(m, multiplier_raw(-x1, -x2));
        }

        #[test]
        fn symbol_odd(x1 in -50f64..50.0, x2 in -50f64..50.0, e in -10f64..0.0) {
            prop_assert_eq!(dispersion(x1, x2, e), -dispersion(-x1, -x2, e));
        }

        #[test]
        fn complex_symbol_matches_real(x1 in -20f64..20.0, x2 in -20f64..20.0, e in -10f64..0.0) {
            prop_assume!(x1 * x1 + x2 * x2 > 1e-6);
            let a = dispersion(x1, x2, e);
            let b = symbol_p_complex(Complex64::new(x1, x2), en(e));
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn complex_symbol_cube_root_invariance(x1 in -20f64..20.0, x2 in -20f64..20.0) {
            prop_assume!(x1 * x1 + x2 * x2 > 1e-6);
            let z = Complex64::new(x1, x2);
            let rot = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
            let a = symbol_p_complex(z, en(-1.0));
            let b = symbol_p_complex(rot * z, en(-1.0));
            prop_assert!((a - b).abs() <= 1e-11 * (1.0 + a.abs()));
        }
    }
}
