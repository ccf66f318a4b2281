//! Dipole systems, unit conventions and per-dipole material parameters.
//!
//! Geometry is in millimetres. Frequencies enter as ordinary frequencies in
//! GHz and are stored as angular frequencies in rad/s. Polarizabilities are
//! the electrostatic value divided by the vacuum permittivity, in mm³.
//! Internally ε₀ = μ₀ = 1 while the speed of light is carried explicitly, so
//! absorbed powers are in arbitrary (but mutually consistent) units.

use num_complex::Complex64;

use crate::error::{invalid, EaiError, Result};

/// Speed of light in mm/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e11;

/// Minimum separation (mm) between two dipoles.
pub const MIN_SEPARATION: f64 = 1e-9;

pub type Vec3 = [f64; 3];

pub fn ghz_to_angular(f_ghz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_ghz * 1e9
}

pub fn angular_to_ghz(omega: f64) -> f64 {
    omega / (2.0 * std::f64::consts::PI * 1e9)
}

/// Free-space wavenumber (mm⁻¹) at angular frequency `omega`.
pub fn wavenumber(omega: f64) -> f64 {
    omega / SPEED_OF_LIGHT
}

/// Free-space wavelength (mm) at an ordinary frequency in GHz.
pub fn wavelength_mm(f_ghz: f64) -> f64 {
    SPEED_OF_LIGHT / (f_ghz * 1e9)
}

pub(crate) fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm(a: &Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    norm(&sub(a, b))
}

/// Returns `v / |v|`, rejecting zero and non-finite vectors.
pub fn unit_vector(v: Vec3, field: &str) -> Result<Vec3> {
    let n = norm(&v);
    if !n.is_finite() || n == 0.0 {
        return Err(invalid(field, "direction must be a finite non-zero vector"));
    }
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

/// A single bound charge oscillating along a fixed axis (Lorentz oscillator).
#[derive(Debug, Clone, PartialEq)]
pub struct Dipole {
    /// Position (mm).
    pub position: Vec3,
    /// Unit oscillation direction.
    pub axis: Vec3,
    /// Resonant angular frequency (rad/s).
    pub omega0: f64,
    /// Momentum relaxation rate (rad/s).
    pub gamma: f64,
    /// Electrostatic polarizability over ε₀ (mm³).
    pub alpha_e: f64,
}

impl Dipole {
    /// Builds a dipole from GHz-valued resonance and damping. The axis is
    /// normalized.
    pub fn new(position: Vec3, axis: Vec3, f0_ghz: f64, gamma_ghz: f64, alpha_e: f64) -> Result<Self> {
        if position.iter().any(|x| !x.is_finite()) {
            return Err(invalid("position", "must be finite"));
        }
        let axis = unit_vector(axis, "axis")?;
        for (name, value) in [("f0_ghz", f0_ghz), ("gamma_ghz", gamma_ghz), ("alpha_e", alpha_e)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be positive, got {value}")));
            }
        }
        Ok(Self {
            position,
            axis,
            omega0: ghz_to_angular(f0_ghz),
            gamma: ghz_to_angular(gamma_ghz),
            alpha_e,
        })
    }

    /// Resonant frequency in GHz.
    pub fn f0_ghz(&self) -> f64 {
        angular_to_ghz(self.omega0)
    }

    pub fn gamma_ghz(&self) -> f64 {
        angular_to_ghz(self.gamma)
    }

    /// Lorentz denominator normalized to the resonance, 1 − ω̃² − iω̃Γ̃.
    pub fn normalized_denominator(&self, omega: f64) -> Complex64 {
        let w = omega / self.omega0;
        let g = self.gamma / self.omega0;
        Complex64::new(1.0 - w * w, -w * g)
    }
}

/// An ordered, immutable collection of dipoles with pairwise distinct
/// positions. Dipole `k` owns rows and columns `3k..3k+3` of every system
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleSystem {
    dipoles: Vec<Dipole>,
}

impl DipoleSystem {
    pub fn new(dipoles: Vec<Dipole>) -> Result<Self> {
        if dipoles.is_empty() {
            return Err(invalid("dipoles", "system needs at least one dipole"));
        }
        for i in 0..dipoles.len() {
            for j in (i + 1)..dipoles.len() {
                let d = distance(&dipoles[i].position, &dipoles[j].position);
                if d <= MIN_SEPARATION {
                    return Err(EaiError::CoincidentDipoles {
                        first: i,
                        second: j,
                        distance: d,
                    });
                }
            }
        }
        Ok(Self { dipoles })
    }

    pub fn dipoles(&self) -> &[Dipole] {
        &self.dipoles
    }

    pub fn len(&self) -> usize {
        self.dipoles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dipoles.is_empty()
    }

    /// Dimension of the field space, 3N.
    pub fn dim(&self) -> usize {
        3 * self.dipoles.len()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.dipoles.iter().map(|d| d.position).collect()
    }
}

/// Clausius–Mossotti polarizability over ε₀ for a particle of relative
/// permittivity `eps_r`, depolarization shape factor `shape` and volume
/// `volume` (mm³).
pub fn clausius_mossotti(eps_r: Complex64, shape: f64, volume: f64) -> Result<Complex64> {
    if !(shape > 0.0 && shape < 1.0) {
        return Err(invalid("shape", format!("must lie in (0, 1), got {shape}")));
    }
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(invalid("volume", format!("must be positive, got {volume}")));
    }
    let chi = eps_r - 1.0;
    let denom = 1.0 + shape * chi;
    if denom.norm() < 1e-12 {
        return Err(EaiError::SingularShape {
            magnitude: denom.norm(),
        });
    }
    Ok(chi / denom * volume)
}

/// Positions of `count` points spaced `spacing` apart along x, centred on
/// the origin.
pub fn chain_positions(count: usize, spacing: f64) -> Vec<Vec3> {
    let centre = (count as f64 - 1.0) / 2.0;
    (0..count)
        .map(|i| [(i as f64 - centre) * spacing, 0.0, 0.0])
        .collect()
}

/// Vertices of a regular polygon in the xy-plane with the given side length,
/// centred on the origin, first vertex at `first_angle_deg`, running
/// anticlockwise.
pub fn ring_positions(count: usize, side: f64, first_angle_deg: f64) -> Vec<Vec3> {
    let n = count as f64;
    let radius = if count > 1 {
        side / (2.0 * (std::f64::consts::PI / n).sin())
    } else {
        0.0
    };
    (0..count)
        .map(|i| {
            let theta = first_angle_deg.to_radians() + 2.0 * std::f64::consts::PI * i as f64 / n;
            [radius * theta.cos(), radius * theta.sin(), 0.0]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelength_at_300_ghz() {
        assert!((wavelength_mm(300.0) - 0.999_308_19).abs() < 1e-6);
    }

    #[test]
    fn ghz_round_trip() {
        for f in [0.1, 42.0, 300.0, 512.5, 1e4] {
            let back = angular_to_ghz(ghz_to_angular(f));
            assert!(((back - f) / f).abs() < 1e-12);
        }
    }

    #[test]
    fn clausius_mossotti_examples() {
        let vac = clausius_mossotti(Complex64::new(1.0, 0.0), 0.4, 1.0).unwrap();
        assert_eq!(vac, Complex64::new(0.0, 0.0));

        let a = clausius_mossotti(Complex64::new(2.0, 0.0), 1.0 / 3.0, 3.0).unwrap();
        assert!((a.re - 2.25).abs() < 1e-14 && a.im == 0.0);

        // Perfect conductor limit tends to V/n.
        let big = clausius_mossotti(Complex64::new(1e9, 0.0), 1.0 / 3.0, 1.0).unwrap();
        assert!((big.re - 3.0).abs() < 1e-6);
    }

    #[test]
    fn clausius_mossotti_rejects_bad_inputs() {
        // 1 + n(eps - 1) = 0 at eps = 1 - 1/n.
        let err = clausius_mossotti(Complex64::new(1.0 - 2.0, 0.0), 0.5, 1.0).unwrap_err();
        assert!(matches!(err, EaiError::SingularShape { .. }));
        assert!(clausius_mossotti(Complex64::new(2.0, 0.0), 1.0, 1.0).is_err());
        assert!(clausius_mossotti(Complex64::new(2.0, 0.0), 0.3, 0.0).is_err());
    }

    #[test]
    fn dipole_axis_is_normalized() {
        let d = Dipole::new([0.0; 3], [0.0, 0.0, 2.5], 300.0, 20.0, 0.005).unwrap();
        assert!((norm(&d.axis) - 1.0).abs() < 1e-12);
        assert!(Dipole::new([0.0; 3], [0.0; 3], 300.0, 20.0, 0.005).is_err());
        assert!(Dipole::new([0.0; 3], [0.0, 0.0, 1.0], 300.0, 0.0, 0.005).is_err());
        assert!(Dipole::new([0.0; 3], [0.0, 0.0, 1.0], -1.0, 20.0, 0.005).is_err());
    }

    #[test]
    fn coincident_dipoles_rejected() {
        let z = [0.0, 0.0, 1.0];
        let a = Dipole::new([0.0; 3], z, 300.0, 20.0, 0.005).unwrap();
        let err = DipoleSystem::new(vec![a.clone(), a]).unwrap_err();
        assert!(matches!(err, EaiError::CoincidentDipoles { first: 0, second: 1, .. }));
        assert!(DipoleSystem::new(vec![]).is_err());
    }

    #[test]
    fn chain_and_ring_geometry() {
        let chain = chain_positions(21, 0.2);
        assert!((chain[0][0] + 2.0).abs() < 1e-12 && (chain[20][0] - 2.0).abs() < 1e-12);

        let pair = chain_positions(2, 0.1);
        assert!((distance(&pair[0], &pair[1]) - 0.1).abs() < 1e-15);

        let oct = ring_positions(8, 0.0383, 90.0);
        for i in 0..8 {
            let d = distance(&oct[i], &oct[(i + 1) % 8]);
            assert!((d - 0.0383).abs() < 1e-12);
        }
        assert!(oct[0][0].abs() < 1e-15 && oct[0][1] > 0.0);
    }
}
