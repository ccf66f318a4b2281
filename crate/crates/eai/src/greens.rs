//! Free-space dyadic Green's function split into near-, intermediate- and
//! far-field terms.
//!
//! With `R = r_obs − r_src`, `g = e^{ikR}/(4πR)` and the time dependence
//! `e^{−iωt}`:
//!
//! ```text
//! NF = −i P g (1/k²R²) [I − 3 R̂R̂]
//! IF =  i P g (i/kR)   [I − 3 R̂R̂]
//! FF =  i P g          [I − R̂R̂]
//! ```
//!
//! where the prefactor `P` is ωμ₀ (μ₀ = 1 internally) for the field radiated
//! by a current moment, or k² for the normalized form used in the
//! scattering operator. The sum of the three terms equals
//! `i P [I + ∇∇/k²] g`.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EaiError, Result};
use crate::model::{self, Vec3};

pub type Dyadic3 = Matrix3<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Prefactor {
    /// ωμ₀: field per unit current moment.
    #[default]
    OmegaMu0,
    /// k²: dimensionless coupling when multiplied by a polarizability.
    KSquared,
}

/// Selects which dyadic terms are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreenOptions {
    pub near: bool,
    pub intermediate: bool,
    pub far: bool,
    #[serde(default)]
    pub prefactor: Prefactor,
}

impl Default for GreenOptions {
    fn default() -> Self {
        Self::full()
    }
}

impl GreenOptions {
    pub const fn full() -> Self {
        Self {
            near: true,
            intermediate: true,
            far: true,
            prefactor: Prefactor::OmegaMu0,
        }
    }

    pub const fn near_only() -> Self {
        Self {
            near: true,
            intermediate: false,
            far: false,
            prefactor: Prefactor::OmegaMu0,
        }
    }

    pub const fn far_only() -> Self {
        Self {
            near: false,
            intermediate: false,
            far: true,
            prefactor: Prefactor::OmegaMu0,
        }
    }

    pub const fn with_prefactor(mut self, prefactor: Prefactor) -> Self {
        self.prefactor = prefactor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.near || self.intermediate || self.far) {
            return Err(invalid("green options", "at least one dyadic term must be enabled"));
        }
        Ok(())
    }

    pub fn prefactor_value(&self, omega: f64) -> f64 {
        match self.prefactor {
            Prefactor::OmegaMu0 => omega,
            Prefactor::KSquared => {
                let k = model::wavenumber(omega);
                k * k
            }
        }
    }
}

/// Distance regime of a source/observation pair. Diagnostic only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Near,
    Intermediate,
    Far,
}

pub fn kr_regime(r_obs: &Vec3, r_src: &Vec3, omega: f64) -> Regime {
    let r = model::distance(r_obs, r_src);
    let lambda = 2.0 * std::f64::consts::PI / model::wavenumber(omega);
    if r < lambda {
        Regime::Near
    } else if r < 10.0 * lambda {
        Regime::Intermediate
    } else {
        Regime::Far
    }
}

/// Evaluates the enabled terms of the dyadic at `r_obs` due to a source at
/// `r_src`.
pub fn green_dyadic(r_obs: &Vec3, r_src: &Vec3, omega: f64, opts: &GreenOptions) -> Result<Dyadic3> {
    let rv = model::sub(r_obs, r_src);
    let r = model::norm(&rv);
    if r <= 0.0 {
        return Err(EaiError::ZeroSeparation);
    }
    let k = model::wavenumber(omega);
    let kr = k * r;
    let i = Complex64::i();
    let g = Complex64::from_polar(1.0 / (4.0 * std::f64::consts::PI * r), kr);
    let base = i * opts.prefactor_value(omega) * g;

    let hat = [rv[0] / r, rv[1] / r, rv[2] / r];
    let rr = |a: usize, b: usize| hat[a] * hat[b];
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    // Scalar weights multiplying [I − 3R̂R̂] and [I − R̂R̂].
    let mut static_weight = Complex64::new(0.0, 0.0);
    if opts.near {
        static_weight -= Complex64::new(1.0 / (kr * kr), 0.0);
    }
    if opts.intermediate {
        static_weight += i / kr;
    }
    let far_weight = if opts.far { 1.0 } else { 0.0 };

    Ok(Dyadic3::from_fn(|a, b| {
        let longitudinal = delta(a, b) - 3.0 * rr(a, b);
        let transverse = delta(a, b) - rr(a, b);
        base * (static_weight * longitudinal + far_weight * transverse)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frob(m: &Dyadic3) -> f64 {
        m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    const OMEGA_300: f64 = 2.0 * std::f64::consts::PI * 300e9;

    #[test]
    fn far_field_is_transverse() {
        let g = green_dyadic(&[0.0, 0.0, 2.0], &[0.0; 3], OMEGA_300, &GreenOptions::far_only()).unwrap();
        assert_eq!(g[(2, 2)], Complex64::new(0.0, 0.0));
        assert!(g[(0, 0)].norm() > 0.0);
    }

    #[test]
    fn reciprocity_is_exact() {
        let a = [0.13, -0.4, 0.22];
        let b = [1.1, 0.35, -0.7];
        let gab = green_dyadic(&a, &b, OMEGA_300, &GreenOptions::full()).unwrap();
        let gba = green_dyadic(&b, &a, OMEGA_300, &GreenOptions::full()).unwrap();
        assert_eq!(gab, gba.transpose());
    }

    #[test]
    fn zero_separation_is_an_error() {
        let p = [0.1, 0.2, 0.3];
        assert!(matches!(
            green_dyadic(&p, &p, OMEGA_300, &GreenOptions::full()),
            Err(EaiError::ZeroSeparation)
        ));
    }

    #[test]
    fn regime_boundaries() {
        let lambda = model::wavelength_mm(300.0);
        let o = [0.0; 3];
        assert_eq!(kr_regime(&[0.1, 0.0, 0.0], &o, OMEGA_300), Regime::Near);
        assert_eq!(kr_regime(&[lambda, 0.0, 0.0], &o, OMEGA_300), Regime::Intermediate);
        assert_eq!(kr_regime(&[100.0 * lambda, 0.0, 0.0], &o, OMEGA_300), Regime::Far);
    }

    #[test]
    fn term_power_laws() {
        // Divide out e^{ikR}; the remaining magnitudes follow R^-3, R^-2, R^-1.
        let lambda = model::wavelength_mm(300.0);
        let r1 = 1e-3 * lambda;
        let k = model::wavenumber(OMEGA_300);
        let cases = [
            (GreenOptions::near_only(), 1.0 / 8.0),
            (
                GreenOptions {
                    near: false,
                    intermediate: true,
                    far: false,
                    prefactor: Prefactor::OmegaMu0,
                },
                1.0 / 4.0,
            ),
            (GreenOptions::far_only(), 1.0 / 2.0),
        ];
        for (opts, expected) in cases {
            let g1 = green_dyadic(&[r1, 0.0, 0.0], &[0.0; 3], OMEGA_300, &opts).unwrap();
            let g2 = green_dyadic(&[2.0 * r1, 0.0, 0.0], &[0.0; 3], OMEGA_300, &opts).unwrap();
            let ratio = frob(&g2) / frob(&g1);
            assert!((ratio - expected).abs() / expected < 0.02, "{opts:?}: {ratio}");
            // Magnitudes are phase-free here, so the ratio is exact.
            assert!((ratio - expected).abs() < 1e-12, "{ratio} vs {expected}, k={k}");
        }
    }

    #[test]
    fn quasi_static_limit() {
        let omega = 1e-3 * OMEGA_300;
        let k = model::wavenumber(omega);
        let rv = [0.03, -0.05, 0.02];
        let r = model::norm(&rv);
        let g = green_dyadic(&rv, &[0.0; 3], omega, &GreenOptions::near_only()).unwrap();
        let i = Complex64::i();
        for a in 0..3 {
            for b in 0..3 {
                let d = if a == b { 1.0 } else { 0.0 };
                let stat = -i * omega / (4.0 * std::f64::consts::PI * k * k * r.powi(3))
                    * (d - 3.0 * rv[a] * rv[b] / (r * r));
                if stat.norm() > 1e-30 {
                    // Only the retardation phase e^{ikR} separates the two.
                    let ratio = g[(a, b)] / stat;
                    assert!((ratio - Complex64::new(1.0, 0.0)).norm() < 2.0 * k * r, "{ratio}");
                    assert!((ratio.norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn prefactor_switch_is_linear() {
        let a = [0.3, 0.1, -0.2];
        let b = [-0.4, 0.0, 0.5];
        let k = model::wavenumber(OMEGA_300);
        let om = green_dyadic(&a, &b, OMEGA_300, &GreenOptions::full()).unwrap();
        let ks = green_dyadic(&a, &b, OMEGA_300, &GreenOptions::full().with_prefactor(Prefactor::KSquared)).unwrap();
        let scaled = om * Complex64::new(k * k / OMEGA_300, 0.0);
        assert!(frob(&(ks - scaled)) < 1e-14 * frob(&ks));
    }

    #[test]
    fn time_convention_sign() {
        // For e^{-iωt} and small kR, Im(FF_zz) = ωμ₀ cos(kR)/(4πR) > 0.
        let lambda = model::wavelength_mm(300.0);
        let r = 0.1 * lambda / (2.0 * std::f64::consts::PI);
        let g = green_dyadic(&[r, 0.0, 0.0], &[0.0; 3], OMEGA_300, &GreenOptions::far_only()).unwrap();
        assert!(g[(2, 2)].im > 0.0);
        let expected = OMEGA_300 * (0.1f64).cos() / (4.0 * std::f64::consts::PI * r);
        assert!((g[(2, 2)].im - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn options_require_a_term() {
        let none = GreenOptions {
            near: false,
            intermediate: false,
            far: false,
            prefactor: Prefactor::OmegaMu0,
        };
        assert!(none.validate().is_err());
        assert!(GreenOptions::full().validate().is_ok());
    }
}
