//! Frequency-dependent system matrices: discretized conductivity Σ,
//! scattering operator M and intrinsic response matrix L.
//!
//! For an incident field `e` at the dipole sites the total (local) field is
//! `M⁻¹ e` and the absorbed power is `W = e† L e` with
//! `L = M⁻† Σʳ M⁻¹`, where `Σʳ` is half the real part of Σ.

use num_complex::Complex64;

use crate::error::Result;
use crate::greens::{green_dyadic, GreenOptions, Prefactor};
use crate::linalg::{CMatrix, CVector, Factorization};
use crate::model::{Dipole, DipoleSystem};

/// Scalar conductivity of one dipole, α ω₀² (−iω)/(ω₀² − ω² − iωΓ), with
/// q²/m = α ω₀² and ε₀ = 1.
pub fn sigma_scalar(dipole: &Dipole, omega: f64) -> Complex64 {
    let w0sq = dipole.omega0 * dipole.omega0;
    let num = Complex64::new(0.0, -omega) * (dipole.alpha_e * w0sq);
    let den = Complex64::new(w0sq - omega * omega, -omega * dipole.gamma);
    num / den
}

/// Block-diagonal conductivity matrix with blocks σᵢ x̂ᵢx̂ᵢ.
pub fn build_sigma(system: &DipoleSystem, omega: f64) -> CMatrix {
    let n = system.dim();
    let mut sigma = CMatrix::zeros(n, n);
    for (k, d) in system.dipoles().iter().enumerate() {
        let s = sigma_scalar(d, omega);
        for a in 0..3 {
            for b in 0..3 {
                sigma[(3 * k + a, 3 * k + b)] = s * (d.axis[a] * d.axis[b]);
            }
        }
    }
    sigma
}

/// Scattering operator. Block (j, i) is δᵢⱼ I − cᵢ G′(rⱼ; rᵢ) x̂ᵢx̂ᵢ with
/// cᵢ = −iαᵢ/(1 − ω̃ᵢ² − iω̃ᵢΓ̃ᵢ) and G′ the k²-prefactor dyadic restricted
/// to the terms enabled in `scatter`. Self-blocks carry no dyadic.
pub fn build_m(system: &DipoleSystem, omega: f64, scatter: &GreenOptions) -> Result<CMatrix> {
    scatter.validate()?;
    let opts = scatter.with_prefactor(Prefactor::KSquared);
    let n = system.dim();
    let mut m = CMatrix::identity(n, n);
    let dipoles = system.dipoles();
    for (i, di) in dipoles.iter().enumerate() {
        let coupling = Complex64::new(0.0, -di.alpha_e) / di.normalized_denominator(omega);
        for (j, dj) in dipoles.iter().enumerate() {
            if i == j {
                continue;
            }
            let g = green_dyadic(&dj.position, &di.position, omega, &opts)?;
            // G′ · x̂ᵢx̂ᵢ = (G′ x̂ᵢ) x̂ᵢᵀ
            for a in 0..3 {
                let gx: Complex64 = (0..3).map(|c| g[(a, c)] * di.axis[c]).sum();
                for b in 0..3 {
                    m[(3 * j + a, 3 * i + b)] -= coupling * gx * di.axis[b];
                }
            }
        }
    }
    Ok(m)
}

/// Per-frequency matrices for one dipole system.
#[derive(Debug, Clone)]
pub struct SystemMatrices<'a> {
    system: &'a DipoleSystem,
    omega: f64,
    scatter: GreenOptions,
    sigma_scalars: Vec<Complex64>,
    m: CMatrix,
    m_lu: Factorization,
    l: CMatrix,
}

impl<'a> SystemMatrices<'a> {
    pub fn new(system: &'a DipoleSystem, omega: f64, scatter: &GreenOptions) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(crate::error::invalid("omega", format!("must be positive, got {omega}")));
        }
        let m = build_m(system, omega, scatter)?;
        let m_lu = Factorization::new(&m)?;
        let m_adj_lu = Factorization::with_condition(&m.adjoint(), m_lu.condition());

        let sigma_scalars: Vec<Complex64> = system.dipoles().iter().map(|d| sigma_scalar(d, omega)).collect();

        // L = Y diag(½ Re σ) Y† with M† Y = [x̂₀ … x̂_{N-1}] (one site per column).
        let n = system.dim();
        let count = system.len();
        let mut axes = CMatrix::zeros(n, count);
        for (k, d) in system.dipoles().iter().enumerate() {
            for a in 0..3 {
                axes[(3 * k + a, k)] = Complex64::new(d.axis[a], 0.0);
            }
        }
        let y = m_adj_lu.solve(&axes)?;
        let mut weighted = y.clone();
        for (k, s) in sigma_scalars.iter().enumerate() {
            let w = 0.5 * s.re;
            weighted.column_mut(k).scale_mut(w);
        }
        let l = &weighted * y.adjoint();
        // Symmetrize away rounding so downstream Hermitian checks are exact.
        let l = crate::linalg::hermitian_part(&l);

        Ok(Self {
            system,
            omega,
            scatter: *scatter,
            sigma_scalars,
            m,
            m_lu,
            l,
        })
    }

    pub fn system(&self) -> &'a DipoleSystem {
        self.system
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn scatter(&self) -> &GreenOptions {
        &self.scatter
    }

    pub fn m(&self) -> &CMatrix {
        &self.m
    }

    /// Condition estimate of M.
    pub fn condition(&self) -> f64 {
        self.m_lu.condition()
    }

    pub fn l(&self) -> &CMatrix {
        &self.l
    }

    pub fn sigma(&self) -> CMatrix {
        build_sigma(self.system, self.omega)
    }

    pub fn sigma_scalars(&self) -> &[Complex64] {
        &self.sigma_scalars
    }

    /// Total local field at the dipoles for an incident field `e_inc`.
    pub fn total_field(&self, e_inc: &CVector) -> Result<CVector> {
        self.m_lu.solve_vec(e_inc)
    }

    /// W = e† L e.
    pub fn absorbed_power(&self, e_inc: &CVector) -> f64 {
        (e_inc.adjoint() * &self.l * e_inc)[(0, 0)].re
    }

    /// Absorbed power from the site sum Σᵢ ½ Re σᵢ |E(rᵢ)·x̂ᵢ|² over the
    /// solved total field.
    pub fn absorbed_power_direct(&self, e_inc: &CVector) -> Result<f64> {
        let e = self.total_field(e_inc)?;
        Ok(self
            .system
            .dipoles()
            .iter()
            .zip(&self.sigma_scalars)
            .enumerate()
            .map(|(k, (d, s))| {
                let proj: Complex64 = (0..3).map(|a| e[3 * k + a] * d.axis[a]).sum();
                0.5 * s.re * proj.norm_sqr()
            })
            .sum())
    }

    /// Dipole moments p = Σ M⁻¹ z / (−iω) excited by a site field `z`.
    pub fn dipole_moments(&self, z: &CVector) -> Result<CVector> {
        let e = self.total_field(z)?;
        let mut p = CVector::zeros(e.len());
        let scale = Complex64::new(0.0, -self.omega).inv();
        for (k, (d, s)) in self.system.dipoles().iter().zip(&self.sigma_scalars).enumerate() {
            let proj: Complex64 = (0..3).map(|a| e[3 * k + a] * d.axis[a]).sum();
            for a in 0..3 {
                p[3 * k + a] = s * proj * d.axis[a] * scale;
            }
        }
        Ok(p)
    }
}

/// Intrinsic response matrix L at `omega`.
pub fn build_l(system: &DipoleSystem, omega: f64, scatter: &GreenOptions) -> Result<CMatrix> {
    Ok(SystemMatrices::new(system, omega, scatter)?.l)
}

/// Absorbed power for incident site field `e_inc`.
pub fn absorbed_power(system: &DipoleSystem, omega: f64, scatter: &GreenOptions, e_inc: &CVector) -> Result<f64> {
    Ok(SystemMatrices::new(system, omega, scatter)?.absorbed_power(e_inc))
}
