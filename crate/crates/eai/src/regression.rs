//! Evaluates a scenario's `[[expect]]` entries.

use std::cell::OnceCell;
use std::fmt;

use num_complex::Complex64;

use crate::assembly::SystemMatrices;
use crate::config::{Expectation, Extremum, Origin, PeakMethod, PhaseRelation, Scenario, SpectrumKind};
use crate::error::{EaiError, Result};
use crate::experiments::{self, Peak, SpectrumSource};
use crate::greens::GreenOptions;
use crate::interferometry::{
    self, HSource, ModeSet, Probe, ProbeSet, Recovery, DEFAULT_CLUSTER_GAP, DEFAULT_SIGNIFICANCE,
};
use crate::linalg::{self, CVector};
use crate::model::{self, DipoleSystem, Vec3};

/// Features must carry at least this fraction of the strongest curvature.
pub const FEATURE_MIN_REL: f64 = 1e-3;

/// Outcome of one expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub kind: &'static str,
    pub origin: Origin,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let origin = match self.origin {
            Origin::Published => "published",
            Origin::Derived => "derived",
        };
        write!(f, "[{status}] {} ({origin}): {}", self.kind, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }
}

/// Everything shared between the checks of one scenario.
pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub system: DipoleSystem,
    pub scatter: GreenOptions,
    spectrum: OnceCell<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Context<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        Ok(Self {
            scenario,
            system: scenario.build_system()?,
            scatter: scenario.scatter_options(),
            spectrum: OnceCell::new(),
        })
    }

    pub fn matrices(&self, f_ghz: f64) -> Result<SystemMatrices<'_>> {
        SystemMatrices::new(&self.system, model::ghz_to_angular(f_ghz), &self.scatter)
    }

    /// Frequencies and values of the scenario spectrum, computed once.
    pub fn spectrum(&self) -> Result<&(Vec<f64>, Vec<f64>)> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let spec = self.scenario.spectrum.as_ref().ok_or_else(|| missing(self.scenario, "spectrum"))?;
        let source = match spec.source {
            SpectrumKind::Probe => match &spec.probe {
                Some(p) => SpectrumSource::Probe(p.probe()?),
                None => return Err(missing(self.scenario, "spectrum.probe")),
            },
            SpectrumKind::Trace => SpectrumSource::Trace,
            SpectrumKind::MaxEigenvalue => SpectrumSource::MaxEigenvalue,
        };
        let freqs = experiments::frequency_grid(spec.start_ghz, spec.stop_ghz, spec.step_ghz)?;
        let values = experiments::spectrum_sweep(&self.system, &self.scatter, &source, &freqs)?;
        Ok(self.spectrum.get_or_init(|| (freqs, values)))
    }

    fn phase_steps(&self) -> usize {
        self.scenario
            .recovery
            .as_ref()
            .map_or(interferometry::DEFAULT_PHASE_STEPS, |r| r.phase_steps)
    }

    fn rel_tol(&self) -> f64 {
        self.scenario.recovery.as_ref().map_or(1e-10, |r| r.rel_tol)
    }

    /// Fringe-measured H with `count` probes, deconvolved.
    pub fn recover(&self, mats: &SystemMatrices, count: Option<usize>) -> Result<(ProbeSet, Recovery)> {
        let probes = self.scenario.probe_set(count)?;
        let h = HSource::Fringe {
            steps: self.phase_steps(),
        }
        .build(mats, &probes, None)?;
        let rec = interferometry::recover_modes(&h, &probes, mats, self.rel_tol())?;
        Ok((probes, rec))
    }

    /// Scan path probes and the reference probe at `reference`.
    fn scan_probes(&self, reference: Option<Vec3>) -> Result<(ProbeSet, Option<Probe>)> {
        let scan = self.scenario.scan.as_ref().ok_or_else(|| missing(self.scenario, "scan"))?;
        let green = scan.green.options();
        let path = scan.path.probes(scan.path.count(), scan.polarization, green)?;
        let reference = reference
            .map(|r| Probe::new(r, scan.polarization, green))
            .transpose()?;
        Ok((path, reference))
    }
}

fn missing(scenario: &Scenario, section: &str) -> EaiError {
    EaiError::Config(format!("scenario `{}` has no [{section}] section", scenario.name))
}

fn nearest(peaks: &[Peak], x: f64) -> Option<&Peak> {
    peaks.iter().min_by(|a, b| (a.x - x).abs().total_cmp(&(b.x - x).abs()))
}

fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.1}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Wraps an angle in degrees into (−180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

fn normalized(v: CVector) -> CVector {
    let n = v.norm();
    if n > 0.0 {
        v / Complex64::new(n, 0.0)
    } else {
        v
    }
}

fn overlap(a: &CVector, b: &CVector) -> f64 {
    let d = a.norm() * b.norm();
    if d == 0.0 {
        0.0
    } else {
        a.dotc(b).norm() / d
    }
}

/// Per-site pattern laid along each dipole axis, unit norm.
fn site_pattern(system: &DipoleSystem, pattern: &[f64]) -> Result<CVector> {
    if pattern.len() != system.len() {
        return Err(EaiError::Config(format!(
            "field `pattern`: {} entries for {} dipoles",
            pattern.len(),
            system.len()
        )));
    }
    let mut v = CVector::zeros(system.dim());
    for (k, d) in system.dipoles().iter().enumerate() {
        for c in 0..3 {
            v[3 * k + c] = Complex64::new(pattern[k] * d.axis[c], 0.0);
        }
    }
    Ok(normalized(v))
}

fn compare(direct: &ModeSet, recovered: &ModeSet) -> interferometry::ModeComparison {
    interferometry::compare_modes(direct, recovered, DEFAULT_CLUSTER_GAP, DEFAULT_SIGNIFICANCE)
}

/// Evaluates one expectation.
pub fn evaluate(ctx: &Context, exp: &Expectation) -> Result<Check> {
    let (passed, detail) = match exp {
        Expectation::Peaks {
            frequencies_ghz,
            tolerance_ghz,
            exact_count,
            method,
            ..
        } => {
            let (xs, ys) = ctx.spectrum()?;
            let found = match method {
                PeakMethod::Maxima => experiments::find_peaks(xs, ys),
                PeakMethod::Features => experiments::find_features(xs, ys, FEATURE_MIN_REL),
            };
            let found_x: Vec<f64> = found.iter().map(|p| p.x).collect();
            let all_matched = frequencies_ghz
                .iter()
                .all(|&f| nearest(&found, f).is_some_and(|p| (p.x - f).abs() <= *tolerance_ghz));
            let count_ok = !exact_count || found.len() == frequencies_ghz.len();
            (
                all_matched && count_ok,
                format!(
                    "expected {} ±{tolerance_ghz} GHz{}, found {}",
                    fmt_list(frequencies_ghz),
                    if *exact_count { " (exact count)" } else { "" },
                    fmt_list(&found_x)
                ),
            )
        }
        Expectation::Fwhm {
            frequency_ghz,
            width_ghz,
            tolerance_ghz,
            ..
        } => {
            let (xs, ys) = ctx.spectrum()?;
            let peaks = experiments::find_peaks(xs, ys);
            match nearest(&peaks, *frequency_ghz) {
                Some(p) => match experiments::fwhm(xs, ys, p.index) {
                    Some(w) => (
                        (w - width_ghz).abs() <= *tolerance_ghz,
                        format!("FWHM {w:.2} GHz at {:.1} GHz, expected {width_ghz} ±{tolerance_ghz}", p.x),
                    ),
                    None => (false, format!("peak at {:.1} GHz has no half-height crossing", p.x)),
                },
                None => (false, "no peak found".to_string()),
            }
        }
        Expectation::Clusters {
            frequency_ghz,
            sizes,
            rel_gap,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let eig = linalg::eig_hermitian(mats.l(), false)?;
            let got = experiments::leading_cluster_sizes(&eig.values, *rel_gap, sizes.len());
            let lead: Vec<String> = eig.values.iter().take(4).map(|v| format!("{v:.6e}")).collect();
            (
                &got == sizes,
                format!(
                    "leading clusters {got:?} at {frequency_ghz} GHz (expected {sizes:?}), λ = [{}]",
                    lead.join(", ")
                ),
            )
        }
        Expectation::Dominance {
            frequency_ghz,
            min_ratio,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let eig = linalg::eig_hermitian(mats.l(), false)?;
            let r = experiments::dominance_ratio(&eig.values);
            (r > *min_ratio, format!("λ0/λ1 = {r:.3} at {frequency_ghz} GHz, need > {min_ratio}"))
        }
        Expectation::Recovery {
            frequency_ghz,
            probes,
            max_angle,
            succeeds,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let (_, rec) = ctx.recover(&mats, Some(*probes))?;
            let cmp = compare(&interferometry::direct_modes(&mats)?, &rec.modes);
            let ok = cmp.max_angle <= *max_angle;
            (
                ok == *succeeds,
                format!(
                    "{probes} probes at {frequency_ghz} GHz: max principal angle {:.3e} rad, eigenvalue error {:.3e} (expected {} {max_angle:e}){}",
                    cmp.max_angle,
                    cmp.max_eigenvalue_error,
                    if *succeeds { "<=" } else { ">" },
                    rec.warning.map(|w| format!("; {w}")).unwrap_or_default()
                ),
            )
        }
        Expectation::Plateau {
            frequency_ghz,
            probes,
            max_angle,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let max = ctx
                .scenario
                .recovery
                .as_ref()
                .and_then(|r| r.max_probes)
                .unwrap_or(probes + 5);
            let points = interferometry::convergence_study(
                &mats,
                |s| ctx.scenario.probe_set(Some(s)),
                max,
                HSource::Fringe {
                    steps: ctx.phase_steps(),
                },
                ctx.rel_tol(),
            )?;
            let start = interferometry::plateau_start(&points, *max_angle);
            let curve: Vec<String> = points.iter().map(|p| format!("{}:{:.1e}", p.probes, p.max_angle)).collect();
            (
                start == Some(*probes),
                format!(
                    "plateau below {max_angle:e} starts at {start:?}, expected {probes}; angles {}",
                    curve.join(" ")
                ),
            )
        }
        Expectation::NeighbourPhase {
            frequency_ghz,
            site,
            neighbours,
            relation,
            tolerance_deg,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let modes = interferometry::direct_modes(&mats)?;
            let p = modes.site_fields(&ctx.system, 0);
            let phases: Vec<f64> = neighbours
                .iter()
                .map(|&k| experiments::relative_phase_deg(&p, k, *site))
                .collect();
            let target = match relation {
                PhaseRelation::InPhase => 0.0,
                PhaseRelation::Antiphase => 180.0,
            };
            let ok = phases.iter().all(|&ph| wrap_deg(ph - target).abs() <= *tolerance_deg);
            (
                ok,
                format!(
                    "dominant mode at {frequency_ghz} GHz: phase of sites {neighbours:?} relative to {site} = {} deg, expected {target} ±{tolerance_deg}",
                    fmt_list(&phases)
                ),
            )
        }
        Expectation::ModePattern {
            frequency_ghz,
            pattern,
            min_overlap,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let eig = linalg::eig_hermitian(mats.l(), false)?;
            let o = overlap(&eig.vector(0), &site_pattern(&ctx.system, pattern)?);
            (
                o > *min_overlap,
                format!("|<u0, {pattern:?}>| = {o:.6} at {frequency_ghz} GHz, need > {min_overlap}"),
            )
        }
        Expectation::ScanExtremum {
            frequency_ghz,
            at,
            extremum,
            tolerance,
            ..
        } => {
            let scan = ctx.scenario.scan.as_ref().ok_or_else(|| missing(ctx.scenario, "scan"))?;
            let (path, _) = ctx.scan_probes(None)?;
            let mats = ctx.matrices(*frequency_ghz)?;
            let w = experiments::line_scan(&mats, &path)?;
            let xs: Vec<f64> = (0..path.len()).map(|i| scan.path.coordinate(i, path.len())).collect();
            let ys: Vec<f64> = match extremum {
                Extremum::Maximum => w,
                Extremum::Minimum => w.iter().map(|v| -v).collect(),
            };
            let found = experiments::find_peaks(&xs, &ys);
            let best = nearest(&found, *at).map(|p| p.x);
            (
                best.is_some_and(|x| (x - at).abs() <= *tolerance),
                format!(
                    "nearest local {} at {}, expected {at} ±{tolerance}",
                    format!("{extremum:?}").to_lowercase(),
                    best.map_or("none".to_string(), |x| format!("{x:.3}"))
                ),
            )
        }
        Expectation::RecoveryStability {
            frequency_ghz,
            base,
            probes,
            max_angle,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let (_, reference) = ctx.recover(&mats, Some(*base))?;
            let mut worst: f64 = 0.0;
            let mut parts = Vec::new();
            for &n in probes {
                let (_, rec) = ctx.recover(&mats, Some(n))?;
                let cmp = compare(&reference.modes, &rec.modes);
                worst = worst.max(cmp.max_angle);
                parts.push(format!("{n}:{:.2e}", cmp.max_angle));
            }
            (
                worst <= *max_angle,
                format!(
                    "angle against {base}-probe recovery: {} rad, need <= {max_angle:e}",
                    parts.join(" ")
                ),
            )
        }
        Expectation::StationarySite {
            frequency_ghz,
            site,
            max_fraction,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let p = interferometry::direct_modes(&mats)?.site_fields(&ctx.system, 0);
            let top = p.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let frac = if top > 0.0 { p[*site].norm() / top } else { 0.0 };
            (
                frac < *max_fraction,
                format!("|u_{site}| / max|u| = {frac:.4} at {frequency_ghz} GHz, need < {max_fraction}"),
            )
        }
        Expectation::EndLocalized {
            frequency_ghz,
            modes,
            end_sites,
            min_fraction,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let set = interferometry::direct_modes(&mats)?;
            let n = ctx.system.len();
            let ends: Vec<usize> = (0..*end_sites).chain(n.saturating_sub(*end_sites)..n).collect();
            let fracs: Vec<f64> = (0..*modes)
                .map(|i| experiments::norm_fraction(&set.site_fields(&ctx.system, i), &ends))
                .collect();
            (
                fracs.iter().all(|&f| f >= *min_fraction),
                format!(
                    "norm fraction on the outer {end_sites} sites per end: {:?}, need >= {min_fraction}",
                    fracs.iter().map(|f| (f * 1e4).round() / 1e4).collect::<Vec<_>>()
                ),
            )
        }
        Expectation::RecoveredEigenvalues {
            frequency_ghz,
            values,
            tolerance,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let (_, rec) = ctx.recover(&mats, None)?;
            let ev = &rec.modes.eigenvalues;
            let scale = if ev.first().is_some_and(|&v| v > 0.0) { values[0] / ev[0] } else { 0.0 };
            let scaled: Vec<f64> = ev.iter().take(values.len()).map(|v| v * scale).collect();
            let worst = values
                .iter()
                .enumerate()
                .map(|(i, v)| scaled.get(i).map_or(f64::INFINITY, |s| (s - v).abs()))
                .fold(0.0, f64::max);
            (
                worst <= *tolerance,
                format!(
                    "scaled eigenvalues {:?}, expected {values:?} ±{tolerance}",
                    scaled.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
                ),
            )
        }
        Expectation::HTable {
            frequency_ghz,
            amplitudes,
            phases_deg,
            amplitude_tolerance,
            phase_tolerance_deg,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let probes = ctx.scenario.probe_set(Some(amplitudes.len()))?;
            let h = HSource::Fringe {
                steps: ctx.phase_steps(),
            }
            .build(&mats, &probes, None)?
            .matrix;
            let scale = amplitudes[0][0] / h[(0, 0)].norm();
            let mut amp_err: f64 = 0.0;
            let mut phase_err: f64 = 0.0;
            for (a, row) in amplitudes.iter().enumerate() {
                for (b, &want) in row.iter().enumerate() {
                    amp_err = amp_err.max((h[(a, b)].norm() * scale - want).abs());
                    if a != b {
                        let got = h[(a, b)].arg().to_degrees();
                        phase_err = phase_err.max(wrap_deg(got - phases_deg[a][b]).abs());
                    }
                }
            }
            (
                amp_err <= *amplitude_tolerance && phase_err <= *phase_tolerance_deg,
                format!(
                    "max amplitude error {amp_err:.3} (tol {amplitude_tolerance}), max phase error {phase_err:.3} deg (tol {phase_tolerance_deg})"
                ),
            )
        }
        Expectation::ModeMap {
            frequency_ghz,
            resonances_ghz,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let (_, rec) = ctx.recover(&mats, None)?;
            let dominant = resonances_ghz
                .iter()
                .map(|&f| Ok(interferometry::direct_modes(&ctx.matrices(f)?)?.moment(0)))
                .collect::<Result<Vec<CVector>>>()?;
            let assigned: Vec<f64> = (0..resonances_ghz.len().min(rec.modes.len()))
                .map(|i| {
                    let m = rec.modes.moment(i);
                    let best = (0..dominant.len())
                        .max_by(|&a, &b| overlap(&m, &dominant[a]).total_cmp(&overlap(&m, &dominant[b])))
                        .unwrap_or(0);
                    resonances_ghz[best]
                })
                .collect();
            (
                &assigned == resonances_ghz,
                format!(
                    "recovered modes map to {} GHz, expected {}",
                    fmt_list(&assigned),
                    fmt_list(resonances_ghz)
                ),
            )
        }
        Expectation::FringeConsistency {
            frequency_ghz,
            rel_tolerance,
            ..
        } => {
            let mats = ctx.matrices(*frequency_ghz)?;
            let probes = ctx.scenario.probe_set(None)?;
            let fringe = interferometry::measure_h(&mats, &probes, ctx.phase_steps(), None)?.matrix;
            let direct = interferometry::direct_h(&mats, &probes)?.matrix;
            let rel = linalg::frobenius(&(&fringe - &direct)) / linalg::frobenius(&direct);
            (
                rel < *rel_tolerance,
                format!("|H_fringe - H_direct| / |H_direct| = {rel:.3e}, need < {rel_tolerance:e}"),
            )
        }
        Expectation::VisibilityContrast {
            frequency_ghz,
            baseline_ghz,
            reference,
            max_ratio,
            ..
        } => {
            let (path, reference) = ctx.scan_probes(Some(*reference))?;
            let reference = reference.expect("reference requested");
            let min_abs = |f: f64| -> Result<f64> {
                let g = experiments::visibility_scan(&ctx.matrices(f)?, &path, &reference)?;
                Ok(g.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min))
            };
            let at = min_abs(*frequency_ghz)?;
            let base = min_abs(*baseline_ghz)?;
            let ratio = at / base;
            (
                ratio < *max_ratio,
                format!(
                    "min |γ| = {at:.4} at {frequency_ghz} GHz vs {base:.4} at {baseline_ghz} GHz, ratio {ratio:.4}, need < {max_ratio}"
                ),
            )
        }
        Expectation::VisibilityShift {
            frequency_ghz,
            other,
            reference,
            min_deg,
            ..
        } => {
            let (path, reference) = ctx.scan_probes(Some(*reference))?;
            let reference = reference.expect("reference requested");
            let other = Scenario::load(other)?;
            let other_system = other.build_system()?;
            let omega = model::ghz_to_angular(*frequency_ghz);
            let a = experiments::visibility_scan(&ctx.matrices(*frequency_ghz)?, &path, &reference)?;
            let b = experiments::visibility_scan(
                &SystemMatrices::new(&other_system, omega, &other.scatter_options())?,
                &path,
                &reference,
            )?;
            let shift = a
                .iter()
                .zip(&b)
                .filter(|(x, y)| x.norm() > 1e-6 && y.norm() > 1e-6)
                .map(|(x, y)| wrap_deg((x / y).arg().to_degrees()).abs())
                .fold(0.0, f64::max);
            (
                shift > *min_deg,
                format!(
                    "largest visibility phase change against `{}` is {shift:.2} deg, need > {min_deg}",
                    other.name
                ),
            )
        }
    };
    Ok(Check {
        kind: exp.kind(),
        origin: exp.origin(),
        passed,
        detail,
    })
}

/// Runs every expectation of `scenario` in file order.
pub fn run_regression(scenario: &Scenario) -> Result<Report> {
    let ctx = Context::new(scenario)?;
    let checks = scenario
        .expect
        .iter()
        .map(|e| evaluate(&ctx, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(Report {
        scenario: scenario.name.clone(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping() {
        assert_eq!(wrap_deg(190.0), -170.0);
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert_eq!(wrap_deg(45.0), 45.0);
    }

    #[test]
    fn two_dipole_structure() {
        let s = Scenario::load("two-dipole").unwrap();
        let report = run_regression(&s).unwrap();
        for c in &report.checks {
            if matches!(c.kind, "neighbour-phase" | "mode-pattern" | "scan-extremum" | "fringe-consistency") {
                assert!(c.passed, "{c}");
            }
        }
    }

    #[test]
    fn missing_section_is_a_config_error() {
        let mut s = Scenario::load("two-dipole").unwrap();
        s.scan = None;
        let ctx = Context::new(&s).unwrap();
        let e = s.expect.iter().find(|e| e.kind() == "scan-extremum").unwrap();
        assert!(matches!(evaluate(&ctx, e), Err(EaiError::Config(_))));
    }
}
