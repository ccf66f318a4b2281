//! Sweep drivers and spectral/mode diagnostics used by the scenario library.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::assembly::SystemMatrices;
use crate::error::{invalid, Result};
use crate::greens::GreenOptions;
use crate::interferometry::{self, Probe, ProbeSet};
use crate::linalg::{self, CMatrix};
use crate::model::{self, DipoleSystem};

/// What a spectrum sweep records at each frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumSource {
    /// Power absorbed from one probe.
    Probe(Probe),
    /// Tr L: power summed over an incoherent, isotropic set of unit site fields.
    Trace,
    /// Largest eigenvalue of L.
    MaxEigenvalue,
}

/// Frequencies from `start` to `stop` inclusive in steps of `step` (GHz).
pub fn frequency_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop >= start && step > 0.0 && stop.is_finite()) {
        return Err(invalid(
            "frequencies",
            format!("need 0 < start <= stop and step > 0, got start={start} stop={stop} step={step}"),
        ));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

fn spectrum_value(system: &DipoleSystem, scatter: &GreenOptions, source: &SpectrumSource, f_ghz: f64) -> Result<f64> {
    let omega = model::ghz_to_angular(f_ghz);
    let mats = SystemMatrices::new(system, omega, scatter)?;
    match source {
        SpectrumSource::Probe(p) => {
            let e = interferometry::probe_field(p, system, omega)?;
            mats.absorbed_power_direct(&e)
        }
        SpectrumSource::Trace => Ok(mats.l().trace().re),
        SpectrumSource::MaxEigenvalue => {
            let eig = linalg::eig_hermitian(mats.l(), false)?;
            Ok(eig.values.first().copied().unwrap_or(0.0))
        }
    }
}

/// Evaluates `source` at each frequency (GHz). Frequencies run in parallel.
pub fn spectrum_sweep(
    system: &DipoleSystem,
    scatter: &GreenOptions,
    source: &SpectrumSource,
    freqs: &[f64],
) -> Result<Vec<f64>> {
    freqs
        .par_iter()
        .map(|&f| spectrum_value(system, scatter, source, f))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Grid index of the sample nearest the feature.
    pub index: usize,
    /// Refined abscissa.
    pub x: f64,
    /// Refined height of the curve at `x`.
    pub value: f64,
}

/// Vertex of the parabola through three equally spaced samples, as an
/// offset in grid steps in [-½, ½] and the interpolated height.
fn parabolic_vertex(y0: f64, y1: f64, y2: f64) -> (f64, f64) {
    let denom = y0 - 2.0 * y1 + y2;
    if denom == 0.0 {
        return (0.0, y1);
    }
    let delta = (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5);
    (delta, y1 - 0.25 * (y0 - y2) * delta)
}

/// Strict interior local maxima with quadratic refinement.
pub fn find_peaks(xs: &[f64], ys: &[f64]) -> Vec<Peak> {
    let mut out = Vec::new();
    if xs.len() < 3 || xs.len() != ys.len() {
        return out;
    }
    for i in 1..ys.len() - 1 {
        if ys[i] > ys[i - 1] && ys[i] >= ys[i + 1] {
            let (delta, value) = parabolic_vertex(ys[i - 1], ys[i], ys[i + 1]);
            let step = 0.5 * (xs[i + 1] - xs[i - 1]);
            out.push(Peak {
                index: i,
                x: xs[i] + delta * step,
                value,
            });
        }
    }
    out
}

/// Spectral features: peaks and shoulders, located at local maxima of the
/// negative curvature −y″ where y″ < 0. Features whose curvature is below
/// `min_rel` of the strongest are dropped. Heights are read off the curve.
pub fn find_features(xs: &[f64], ys: &[f64], min_rel: f64) -> Vec<Peak> {
    let n = ys.len();
    if n < 5 || xs.len() != n {
        return Vec::new();
    }
    let h = xs[1] - xs[0];
    let curv: Vec<f64> = (1..n - 1).map(|i| -(ys[i - 1] - 2.0 * ys[i] + ys[i + 1]) / (h * h)).collect();
    let cx: Vec<f64> = xs[1..n - 1].to_vec();
    let strongest = curv.iter().copied().fold(0.0, f64::max);
    find_peaks(&cx, &curv)
        .into_iter()
        .filter(|p| curv[p.index] > 0.0 && curv[p.index] >= min_rel * strongest)
        .map(|p| Peak {
            index: p.index + 1,
            x: p.x,
            value: ys[p.index + 1],
        })
        .collect()
}

/// Full width at half maximum of the peak at `index`, by linear
/// interpolation of the half-height crossings. `None` if a side never
/// drops below half height.
pub fn fwhm(xs: &[f64], ys: &[f64], index: usize) -> Option<f64> {
    let half = 0.5 * ys[index];
    let crossing = |a: usize, b: usize| xs[a] + (half - ys[a]) * (xs[b] - xs[a]) / (ys[b] - ys[a]);
    let left = (0..index).rev().find(|&i| ys[i] < half).map(|i| crossing(i, i + 1))?;
    let right = (index + 1..ys.len()).find(|&i| ys[i] < half).map(|i| crossing(i - 1, i))?;
    Some(right - left)
}

/// Absorbed power with a single probe at each position of `path`.
pub fn line_scan(mats: &SystemMatrices, path: &ProbeSet) -> Result<Vec<f64>> {
    path.probes()
        .par_iter()
        .map(|p| {
            let e = interferometry::probe_field(p, mats.system(), mats.omega())?;
            mats.absorbed_power_direct(&e)
        })
        .collect()
}

/// Complex visibility between a fixed reference probe and each probe along
/// `path`, from H = Gᴾ† L Gᴾ.
pub fn visibility_scan(mats: &SystemMatrices, path: &ProbeSet, reference: &Probe) -> Result<Vec<Complex64>> {
    let system = mats.system();
    let e_ref = interferometry::probe_field(reference, system, mats.omega())?;
    let h_rr = mats.absorbed_power(&e_ref);
    let l_ref = mats.l() * &e_ref;
    path.probes()
        .iter()
        .map(|p| {
            let e = interferometry::probe_field(p, system, mats.omega())?;
            let h = CMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(h_rr, 0.0),
                    e_ref.dotc(&(mats.l() * &e)),
                    e.dotc(&l_ref),
                    Complex64::new(mats.absorbed_power(&e), 0.0),
                ],
            );
            interferometry::visibility(&h, 0, 1)
        })
        .collect()
}

/// Ratio λ₀/λ₁ of the two largest eigenvalues.
pub fn dominance_ratio(values: &[f64]) -> f64 {
    match values {
        [a, b, ..] if *b > 0.0 => a / b,
        [_, _, ..] => f64::INFINITY,
        _ => f64::INFINITY,
    }
}

/// Sizes of the leading eigenvalue clusters, limited to `count` clusters.
pub fn leading_cluster_sizes(values: &[f64], rel_gap: f64, count: usize) -> Vec<usize> {
    interferometry::eigenvalue_clusters(values, rel_gap)
        .into_iter()
        .take(count)
        .map(|c| c.len())
        .collect()
}

/// Fraction of Σ|pₖ|² carried by the sites in `sites`.
pub fn norm_fraction(site_moments: &[Complex64], sites: &[usize]) -> f64 {
    let total: f64 = site_moments.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    sites.iter().map(|&k| site_moments[k].norm_sqr()).sum::<f64>() / total
}

/// Phase of site `k` relative to site `reference` (degrees, in (−180, 180]).
pub fn relative_phase_deg(site_moments: &[Complex64], k: usize, reference: usize) -> f64 {
    (site_moments[k] / site_moments[reference]).arg().to_degrees()
}
