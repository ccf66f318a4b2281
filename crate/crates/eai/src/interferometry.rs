//! Point-source probes, two-source fringes, the H matrix and mode recovery.
//!
//! A probe is a unit current moment at a fixed position. Its incident field
//! at the dipoles is one column of the source matrix Gᴾ. Driving probes `a`
//! and `b` together with differential phase Δφ gives the fringe
//!
//! ```text
//! W(Δφ) = H_aa + H_bb + 2 Re(H_ab e^{jΔφ}),   H = Gᴾ† L Gᴾ
//! ```
//!
//! so the first Fourier coefficient of the fringe is `H_ab`. Recovery
//! deconvolves the probe patterns with a pseudo-inverse of Gᴾ and
//! diagonalizes the result.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::SystemMatrices;
use crate::error::{invalid, EaiError, Result};
use crate::greens::{green_dyadic, GreenOptions};
use crate::linalg::{self, CMatrix, CVector, EigDecomposition};
use crate::model::{self, DipoleSystem, Vec3};

pub const DEFAULT_PHASE_STEPS: usize = 16;
pub const MIN_PHASE_STEPS: usize = 4;

/// Relative eigenvalue gap below which modes are compared as one subspace.
pub const DEFAULT_CLUSTER_GAP: f64 = 1e-6;

/// Modes weaker than this fraction of the strongest are not compared.
pub const DEFAULT_SIGNIFICANCE: f64 = 1e-9;

/// A point current-moment source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub position: Vec3,
    pub polarization: Vec3,
    pub green: GreenOptions,
}

impl Probe {
    pub fn new(position: Vec3, polarization: Vec3, green: GreenOptions) -> Result<Self> {
        if position.iter().any(|x| !x.is_finite()) {
            return Err(invalid("probe position", "must be finite"));
        }
        green.validate()?;
        Ok(Self {
            position,
            polarization: model::unit_vector(polarization, "probe polarization")?,
            green,
        })
    }
}

/// Ordered probes. Position `n` in the set is row/column `n` of H.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    probes: Vec<Probe>,
}

impl ProbeSet {
    pub fn new(probes: Vec<Probe>) -> Result<Self> {
        if probes.is_empty() {
            return Err(invalid("probes", "at least one probe is required"));
        }
        for i in 0..probes.len() {
            for j in (i + 1)..probes.len() {
                let same_place = model::distance(&probes[i].position, &probes[j].position) <= model::MIN_SEPARATION;
                let same_pol = model::distance(&probes[i].polarization, &probes[j].polarization) <= 1e-12;
                if same_place && same_pol {
                    return Err(invalid("probes", format!("probes {i} and {j} are duplicates")));
                }
            }
        }
        Ok(Self { probes })
    }

    /// Probes evenly spaced on the segment from `start` to `end` inclusive.
    pub fn line(start: Vec3, end: Vec3, count: usize, polarization: Vec3, green: GreenOptions) -> Result<Self> {
        let probes = line_points(start, end, count)
            .into_iter()
            .map(|p| Probe::new(p, polarization, green))
            .collect::<Result<Vec<_>>>()?;
        Self::new(probes)
    }

    /// Probes on a circle about the origin in the xy-plane, `count` of them
    /// starting at `first_deg` and stepping by `step_deg`.
    pub fn arc(
        radius: f64,
        first_deg: f64,
        step_deg: f64,
        count: usize,
        polarization: Vec3,
        green: GreenOptions,
    ) -> Result<Self> {
        let probes = (0..count)
            .map(|i| {
                let t = (first_deg + step_deg * i as f64).to_radians();
                Probe::new([radius * t.cos(), radius * t.sin(), 0.0], polarization, green)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(probes)
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    /// Same probes with every dyadic selection replaced by `green`.
    pub fn with_green(&self, green: GreenOptions) -> Self {
        Self {
            probes: self.probes.iter().map(|p| Probe { green, ..*p }).collect(),
        }
    }

    /// The probes at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let probes = indices
            .iter()
            .map(|&i| {
                self.probes.get(i).copied().ok_or(EaiError::IndexOutOfRange {
                    index: i,
                    len: self.probes.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(probes)
    }
}

/// `count` evenly spaced points from `start` to `end` inclusive. A single
/// point sits at `start`.
pub fn line_points(start: Vec3, end: Vec3, count: usize) -> Vec<Vec3> {
    (0..count)
        .map(|i| {
            let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
            [
                start[0] + t * (end[0] - start[0]),
                start[1] + t * (end[1] - start[1]),
                start[2] + t * (end[2] - start[2]),
            ]
        })
        .collect()
}

/// Incident field at every dipole from a unit current moment at the probe.
pub fn probe_field(probe: &Probe, system: &DipoleSystem, omega: f64) -> Result<CVector> {
    let mut e = CVector::zeros(system.dim());
    for (k, d) in system.dipoles().iter().enumerate() {
        if model::distance(&d.position, &probe.position) <= model::MIN_SEPARATION {
            return Err(EaiError::ProbeOnDipole { probe: 0, dipole: k });
        }
        let g = green_dyadic(&d.position, &probe.position, omega, &probe.green)?;
        for a in 0..3 {
            e[3 * k + a] = (0..3).map(|b| g[(a, b)] * probe.polarization[b]).sum();
        }
    }
    Ok(e)
}

/// Source matrix Gᴾ (3N × S), one probe field per column.
pub fn source_matrix(probes: &ProbeSet, system: &DipoleSystem, omega: f64) -> Result<CMatrix> {
    let mut g = CMatrix::zeros(system.dim(), probes.len());
    for (n, p) in probes.probes().iter().enumerate() {
        let col = probe_field(p, system, omega).map_err(|e| match e {
            EaiError::ProbeOnDipole { dipole, .. } => EaiError::ProbeOnDipole { probe: n, dipole },
            other => other,
        })?;
        g.set_column(n, &col);
    }
    Ok(g)
}

/// Additive Gaussian noise on every power reading. The standard deviation
/// is the mean power of the sweep divided by `snr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub snr: f64,
    pub seed: u64,
}

impl NoiseModel {
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn corrupt(&self, stream: u64, values: &mut [f64]) -> Result<()> {
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(invalid("snr", format!("must be positive, got {}", self.snr)));
        }
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        let sigma = mean.abs() / self.snr;
        if sigma == 0.0 {
            return Ok(());
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| invalid("snr", e.to_string()))?;
        let mut rng = self.rng(stream);
        for v in values.iter_mut() {
            *v += normal.sample(&mut rng);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeSample {
    /// Differential phase Δφ (radians).
    pub phase: f64,
    /// Total absorbed power.
    pub power: f64,
}

/// Uniform differential phases over [0, 2π).
pub fn phase_grid(steps: usize) -> Vec<f64> {
    (0..steps).map(|k| 2.0 * PI * k as f64 / steps as f64).collect()
}

fn check_steps(steps: usize) -> Result<()> {
    if steps < MIN_PHASE_STEPS {
        return Err(invalid(
            "phase_steps",
            format!("at least {MIN_PHASE_STEPS} phase steps are required, got {steps}"),
        ));
    }
    Ok(())
}

/// Power absorbed under a single incident field, from a forward solve and
/// the per-site dissipation sum.
pub fn single_source_power(mats: &SystemMatrices, e_inc: &CVector) -> Result<f64> {
    mats.absorbed_power_direct(e_inc)
}

/// Fringe for two incident fields `e_a + e^{jΔφ} e_b`, one forward solve per
/// phase step.
pub fn fringe_from_fields(
    mats: &SystemMatrices,
    e_a: &CVector,
    e_b: &CVector,
    steps: usize,
    noise: Option<(&NoiseModel, u64)>,
) -> Result<Vec<FringeSample>> {
    check_steps(steps)?;
    let phases = phase_grid(steps);
    let mut powers = phases
        .iter()
        .map(|&phi| {
            let e = e_a + e_b * Complex64::from_polar(1.0, phi);
            mats.absorbed_power_direct(&e)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some((model, stream)) = noise {
        model.corrupt(stream, &mut powers)?;
    }
    Ok(phases
        .into_iter()
        .zip(powers)
        .map(|(phase, power)| FringeSample { phase, power })
        .collect())
}

/// Fringe between two probes.
pub fn fringe_sweep(
    mats: &SystemMatrices,
    probe_a: &Probe,
    probe_b: &Probe,
    steps: usize,
    noise: Option<&NoiseModel>,
) -> Result<Vec<FringeSample>> {
    let system = mats.system();
    let e_a = probe_field(probe_a, system, mats.omega())?;
    let e_b = probe_field(probe_b, system, mats.omega())?;
    fringe_from_fields(mats, &e_a, &e_b, steps, noise.map(|n| (n, 0)))
}

/// Fourier terms of a fringe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeTerms {
    /// Mean power, H_aa + H_bb.
    pub dc: f64,
    /// First harmonic, H_ab.
    pub h_ab: Complex64,
}

/// Projects a fringe sampled on a uniform grid onto its first harmonic.
pub fn extract_fringe(sweep: &[FringeSample]) -> Result<FringeTerms> {
    let s = sweep.len();
    if s < MIN_PHASE_STEPS {
        return Err(EaiError::NonUniformPhaseGrid(format!(
            "need at least {MIN_PHASE_STEPS} samples, got {s}"
        )));
    }
    for (k, sample) in sweep.iter().enumerate() {
        let expected = 2.0 * PI * k as f64 / s as f64;
        if (sample.phase - expected).abs() > 1e-9 {
            return Err(EaiError::NonUniformPhaseGrid(format!(
                "sample {k} at {} rad, expected {expected} rad",
                sample.phase
            )));
        }
    }
    let norm = 1.0 / s as f64;
    let dc = sweep.iter().map(|x| x.power).sum::<f64>() * norm;
    let h_ab = sweep
        .iter()
        .map(|x| Complex64::from_polar(x.power, -x.phase))
        .sum::<Complex64>()
        * norm;
    Ok(FringeTerms { dc, h_ab })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Direct,
    FringeExtracted,
}

/// Response over probe current moments.
#[derive(Debug, Clone)]
pub struct HMatrix {
    pub matrix: CMatrix,
    pub provenance: Provenance,
}

impl HMatrix {
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn eig(&self) -> Result<EigDecomposition> {
        linalg::eig_hermitian(&self.matrix, true)
    }
}

/// Populates H as an experiment would: diagonal entries from single-probe
/// powers, off-diagonal entries from two-probe fringes.
pub fn measure_h(
    mats: &SystemMatrices,
    probes: &ProbeSet,
    steps: usize,
    noise: Option<&NoiseModel>,
) -> Result<HMatrix> {
    check_steps(steps)?;
    let g = source_matrix(probes, mats.system(), mats.omega())?;
    let s = probes.len();
    let columns: Vec<CVector> = (0..s).map(|n| g.column(n).into_owned()).collect();

    let pairs: Vec<(usize, usize)> = (0..s).flat_map(|a| (a..s).map(move |b| (a, b))).collect();
    let entries = pairs
        .par_iter()
        .map(|&(a, b)| {
            let stream = (a * s + b) as u64;
            if a == b {
                let mut w = [single_source_power(mats, &columns[a])?];
                if let Some(n) = noise {
                    n.corrupt(stream, &mut w)?;
                }
                Ok(Complex64::new(w[0], 0.0))
            } else {
                let sweep = fringe_from_fields(mats, &columns[a], &columns[b], steps, noise.map(|n| (n, stream)))?;
                Ok(extract_fringe(&sweep)?.h_ab)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut h = CMatrix::zeros(s, s);
    for (&(a, b), &value) in pairs.iter().zip(&entries) {
        h[(a, b)] = value;
        h[(b, a)] = value.conj();
    }
    Ok(HMatrix {
        matrix: linalg::hermitian_part(&h),
        provenance: Provenance::FringeExtracted,
    })
}

/// H = Gᴾ† L Gᴾ evaluated algebraically.
pub fn direct_h(mats: &SystemMatrices, probes: &ProbeSet) -> Result<HMatrix> {
    let g = source_matrix(probes, mats.system(), mats.omega())?;
    let h = g.adjoint() * mats.l() * &g;
    Ok(HMatrix {
        matrix: linalg::hermitian_part(&h),
        provenance: Provenance::Direct,
    })
}

/// Complex fringe visibility 2H_nm / (H_nn + H_mm).
pub fn visibility(h: &CMatrix, n: usize, m: usize) -> Result<Complex64> {
    let len = h.nrows();
    for index in [n, m] {
        if index >= len {
            return Err(EaiError::IndexOutOfRange { index, len });
        }
    }
    let sum = h[(n, n)].re + h[(m, m)].re;
    if !(sum > 0.0) {
        return Err(EaiError::DegenerateVisibility { n, m, sum });
    }
    Ok(h[(n, m)] * (2.0 / sum))
}

/// Eigenvalues with their site-field vectors and dipole moments.
#[derive(Debug, Clone)]
pub struct ModeSet {
    /// Responsivities, descending.
    pub eigenvalues: Vec<f64>,
    /// Unit site-field eigenvectors u (3N × K).
    pub field_modes: CMatrix,
    /// Unit-norm dipole moments p (3N × K), phase-fixed.
    pub dipole_moments: CMatrix,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn moment(&self, i: usize) -> CVector {
        self.dipole_moments.column(i).into_owned()
    }

    /// Axis-projected dipole moment of each site for mode `i`.
    pub fn site_moments(&self, system: &DipoleSystem, i: usize) -> Vec<Complex64> {
        project_on_axes(system, &self.dipole_moments.column(i).into_owned())
    }

    /// Axis-projected field of eigenvector `i` at each site. This is the
    /// modal form drawn for chains and rings.
    pub fn site_fields(&self, system: &DipoleSystem, i: usize) -> Vec<Complex64> {
        project_on_axes(system, &self.field_modes.column(i).into_owned())
    }
}

fn project_on_axes(system: &DipoleSystem, v: &CVector) -> Vec<Complex64> {
    system
        .dipoles()
        .iter()
        .enumerate()
        .map(|(k, d)| (0..3).map(|a| v[3 * k + a] * d.axis[a]).sum())
        .collect()
}

fn normalized_moments(mats: &SystemMatrices, fields: &CMatrix) -> Result<CMatrix> {
    let mut out = CMatrix::zeros(fields.nrows(), fields.ncols());
    for i in 0..fields.ncols() {
        let mut p = mats.dipole_moments(&fields.column(i).into_owned())?;
        let n = p.norm();
        if n > 0.0 {
            p /= Complex64::new(n, 0.0);
        }
        linalg::fix_phase(&mut p);
        out.set_column(i, &p);
    }
    Ok(out)
}

fn mode_set(mats: &SystemMatrices, eig: EigDecomposition) -> Result<ModeSet> {
    let dipole_moments = normalized_moments(mats, &eig.vectors)?;
    Ok(ModeSet {
        eigenvalues: eig.values,
        field_modes: eig.vectors,
        dipole_moments,
    })
}

/// Modes from diagonalizing L itself.
pub fn direct_modes(mats: &SystemMatrices) -> Result<ModeSet> {
    mode_set(mats, linalg::eig_hermitian(mats.l(), false)?)
}

/// Raised when the probes cannot resolve every significant mode of L.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartialRecovery {
    /// Numerical rank of Gᴾ.
    pub rank: usize,
    /// Number of significant modes that would need resolving.
    pub required: usize,
}

impl std::fmt::Display for PartialRecovery {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "partial recovery: source matrix has numerical rank {} but {} modes are significant",
            self.rank, self.required
        )
    }
}

#[derive(Debug, Clone)]
pub struct Recovery {
    /// Modes of the deconvolved response matrix.
    pub modes: ModeSet,
    /// Eigenvalues of H itself, descending.
    pub source_eigenvalues: Vec<f64>,
    /// Eigenvectors w of H (S × S).
    pub source_vectors: CMatrix,
    /// Dipole moments excited by each w, unit-norm (3N × S).
    pub source_moments: CMatrix,
    /// The deconvolved response matrix.
    pub l_recovered: CMatrix,
    pub rank: usize,
    pub warning: Option<PartialRecovery>,
}

/// Deconvolves the probe patterns from H and diagonalizes the result.
pub fn recover_modes(h: &HMatrix, probes: &ProbeSet, mats: &SystemMatrices, rel_tol: f64) -> Result<Recovery> {
    if h.len() != probes.len() {
        return Err(EaiError::Dimension(format!(
            "H is {}x{} but there are {} probes",
            h.len(),
            h.len(),
            probes.len()
        )));
    }
    let g = source_matrix(probes, mats.system(), mats.omega())?;
    let g_pinv = linalg::pinv(&g, rel_tol)?;
    let hm = linalg::hermitian_part(&h.matrix);
    let l_rec = linalg::hermitian_part(&(g_pinv.matrix.adjoint() * &hm * &g_pinv.matrix));
    let modes = mode_set(mats, linalg::eig_hermitian(&l_rec, true)?)?;

    let source = linalg::eig_hermitian(&hm, true)?;
    let source_moments = normalized_moments(mats, &(&g * &source.vectors))?;

    let direct = linalg::eig_hermitian(mats.l(), false)?;
    let required = significant_count(&direct.values, DEFAULT_SIGNIFICANCE);
    let warning = (g_pinv.rank < required).then_some(PartialRecovery {
        rank: g_pinv.rank,
        required,
    });

    Ok(Recovery {
        modes,
        source_eigenvalues: source.values,
        source_vectors: source.vectors,
        source_moments,
        l_recovered: l_rec,
        rank: g_pinv.rank,
        warning,
    })
}

/// Number of eigenvalues above `significance · λ_max`.
pub fn significant_count(values: &[f64], significance: f64) -> usize {
    let top = values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    values.iter().take_while(|&&v| v > significance * top).count()
}

/// Splits descending eigenvalues into runs whose consecutive relative gap is
/// below `rel_gap`.
pub fn eigenvalue_clusters(values: &[f64], rel_gap: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || {
            let hi = values[i - 1];
            let scale = hi.abs().max(values[i].abs());
            (hi - values[i]) > rel_gap * scale
        };
        if split {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeComparison {
    /// Largest principal angle over all compared clusters (radians).
    pub max_angle: f64,
    /// Largest |λ_direct − λ_recovered| / λ_max over compared modes.
    pub max_eigenvalue_error: f64,
    /// Clusters of the direct spectrum that were compared.
    pub clusters: Vec<Range<usize>>,
    /// Principal angle of each cluster.
    pub angles: Vec<f64>,
}

/// Compares the significant modes of `direct` against `recovered`, cluster
/// by cluster, using principal angles between spans of field modes.
pub fn compare_modes(direct: &ModeSet, recovered: &ModeSet, rel_gap: f64, significance: f64) -> ModeComparison {
    let count = significant_count(&direct.eigenvalues, significance);
    let clusters: Vec<Range<usize>> = eigenvalue_clusters(&direct.eigenvalues, rel_gap)
        .into_iter()
        .filter(|c| c.start < count)
        .collect();
    let top = direct.eigenvalues.first().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);

    let mut angles = Vec::with_capacity(clusters.len());
    let mut max_err: f64 = 0.0;
    for c in &clusters {
        let angle = if c.end > recovered.len() {
            std::f64::consts::FRAC_PI_2
        } else {
            let a = direct.field_modes.columns(c.start, c.len()).into_owned();
            let b = recovered.field_modes.columns(c.start, c.len()).into_owned();
            linalg::max_principal_angle(&a, &b)
        };
        angles.push(angle);
        for i in c.clone() {
            let err = match recovered.eigenvalues.get(i) {
                Some(r) => (direct.eigenvalues[i] - r).abs() / top,
                None => f64::INFINITY,
            };
            max_err = max_err.max(err);
        }
    }
    ModeComparison {
        max_angle: angles.iter().copied().fold(0.0, f64::max),
        max_eigenvalue_error: max_err,
        clusters,
        angles,
    }
}

/// Where the H matrix used for recovery comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HSource {
    Direct,
    Fringe { steps: usize },
}

impl HSource {
    pub fn build(&self, mats: &SystemMatrices, probes: &ProbeSet, noise: Option<&NoiseModel>) -> Result<HMatrix> {
        match *self {
            HSource::Direct => direct_h(mats, probes),
            HSource::Fringe { steps } => measure_h(mats, probes, steps, noise),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePoint {
    pub probes: usize,
    pub rank: usize,
    pub max_angle: f64,
    pub max_eigenvalue_error: f64,
}

/// Recovers modes for S = 1..=max_probes probes from `generator` and
/// reports the error against direct diagonalization.
pub fn convergence_study<F>(
    mats: &SystemMatrices,
    generator: F,
    max_probes: usize,
    source: HSource,
    rel_tol: f64,
) -> Result<Vec<ConvergencePoint>>
where
    F: Fn(usize) -> Result<ProbeSet> + Sync,
{
    let direct = direct_modes(mats)?;
    (1..=max_probes)
        .into_par_iter()
        .map(|s| {
            let probes = generator(s)?;
            let h = source.build(mats, &probes, None)?;
            let rec = recover_modes(&h, &probes, mats, rel_tol)?;
            let cmp = compare_modes(&direct, &rec.modes, DEFAULT_CLUSTER_GAP, DEFAULT_SIGNIFICANCE);
            Ok(ConvergencePoint {
                probes: s,
                rank: rec.rank,
                max_angle: cmp.max_angle,
                max_eigenvalue_error: cmp.max_eigenvalue_error,
            })
        })
        .collect()
}

/// First probe count from which the error stays below `tol` for every
/// larger count in the study.
pub fn plateau_start(points: &[ConvergencePoint], tol: f64) -> Option<usize> {
    let mut start = None;
    for p in points {
        if p.max_angle <= tol {
            start.get_or_insert(p.probes);
        } else {
            start = None;
        }
    }
    start
}
