//! Scenario files.
//!
//! A scenario is a TOML document describing a dipole system, the probes used
//! to illuminate it, the frequencies of interest and the observables a
//! regression run checks. The schema is documented field by field on the
//! structs below; `scenarios/*.toml` are complete examples.
//!
//! ```toml
//! name = "two-dipole"
//!
//! [system]
//! f0_ghz = 300.0
//! gamma_ghz = 20.0
//! alpha = 0.005
//! layout = "chain"
//! count = 2
//! spacing = 0.1
//!
//! [spectrum]
//! start_ghz = 150.0
//! stop_ghz = 450.0
//! source = "probe"
//! probe = { position = [10.0, 10.0, 0.0], green = "full" }
//!
//! [[expect]]
//! kind = "peaks"
//! origin = "published"
//! frequencies_ghz = [240.0, 340.0]
//! tolerance_ghz = 3.0
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{EaiError, Result};
use crate::greens::{GreenOptions, Prefactor};
use crate::interferometry::{self, Probe, ProbeSet};
use crate::model::{self, Dipole, DipoleSystem, Vec3};

const Z_AXIS: Vec3 = [0.0, 0.0, 1.0];

fn z_axis() -> Vec3 {
    Z_AXIS
}

fn default_step() -> f64 {
    1.0
}

fn default_phase_steps() -> usize {
    interferometry::DEFAULT_PHASE_STEPS
}

fn default_rel_tol() -> f64 {
    crate::linalg::DEFAULT_PINV_TOL
}

fn default_first_angle() -> f64 {
    90.0
}

/// Named dyadic selection for probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GreenPreset {
    #[default]
    Full,
    Near,
    Far,
}

impl GreenPreset {
    pub fn options(self) -> GreenOptions {
        match self {
            GreenPreset::Full => GreenOptions::full(),
            GreenPreset::Near => GreenOptions::near_only(),
            GreenPreset::Far => GreenOptions::far_only(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    #[default]
    Chain,
    Ring,
    Explicit,
}

/// Per-dipole replacement of the base parameters.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Override {
    pub index: usize,
    pub f0_ghz: Option<f64>,
    pub gamma_ghz: Option<f64>,
    pub alpha: Option<f64>,
    pub axis: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// Resonant frequency of every dipole (GHz).
    pub f0_ghz: f64,
    /// Damping rate of every dipole (GHz).
    pub gamma_ghz: f64,
    /// Electrostatic polarizability over ε₀ (mm³).
    pub alpha: f64,
    #[serde(default = "z_axis")]
    pub axis: Vec3,
    #[serde(default)]
    pub layout: Layout,
    /// Number of dipoles for chain and ring layouts.
    pub count: Option<usize>,
    /// Chain pitch or ring side length (mm).
    pub spacing: Option<f64>,
    /// Ring only: angle of dipole 0 (degrees, anticlockwise from +x).
    #[serde(default = "default_first_angle")]
    pub first_angle_deg: f64,
    /// Explicit layout only (mm).
    pub positions: Option<Vec<Vec3>>,
    #[serde(default)]
    pub overrides: Vec<Override>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterSpec {
    #[serde(default = "yes")]
    pub near: bool,
    #[serde(default = "yes")]
    pub intermediate: bool,
    #[serde(default = "yes")]
    pub far: bool,
}

fn yes() -> bool {
    true
}

impl Default for ScatterSpec {
    fn default() -> Self {
        Self {
            near: true,
            intermediate: true,
            far: true,
        }
    }
}

impl ScatterSpec {
    pub fn options(&self) -> GreenOptions {
        GreenOptions {
            near: self.near,
            intermediate: self.intermediate,
            far: self.far,
            prefactor: Prefactor::KSquared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub position: Vec3,
    #[serde(default = "z_axis")]
    pub polarization: Vec3,
    #[serde(default)]
    pub green: GreenPreset,
}

impl ProbeSpec {
    pub fn probe(&self) -> Result<Probe> {
        Probe::new(self.position, self.polarization, self.green.options())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    #[default]
    Probe,
    Trace,
    MaxEigenvalue,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub start_ghz: f64,
    pub stop_ghz: f64,
    #[serde(default = "default_step")]
    pub step_ghz: f64,
    #[serde(default)]
    pub source: SpectrumKind,
    pub probe: Option<ProbeSpec>,
}

/// A path of probe positions: a straight segment or an arc of a circle
/// about the origin in the xy-plane.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "path", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathSpec {
    Line {
        start: Vec3,
        end: Vec3,
        count: usize,
    },
    Circle {
        radius: f64,
        #[serde(default)]
        start_deg: f64,
        step_deg: f64,
        count: usize,
    },
}

impl PathSpec {
    pub fn count(&self) -> usize {
        match self {
            PathSpec::Line { count, .. } | PathSpec::Circle { count, .. } => *count,
        }
    }

    /// The first `count` points of the path; a line is re-divided so that
    /// the points still span it end to end.
    pub fn probes(&self, count: usize, polarization: Vec3, green: GreenOptions) -> Result<ProbeSet> {
        match *self {
            PathSpec::Line { start, end, .. } => ProbeSet::line(start, end, count, polarization, green),
            PathSpec::Circle {
                radius,
                start_deg,
                step_deg,
                ..
            } => ProbeSet::arc(radius, start_deg, step_deg, count, polarization, green),
        }
    }

    /// Scalar coordinate of point `i` for tables: x for lines, the angle in
    /// degrees for circles.
    pub fn coordinate(&self, i: usize, count: usize) -> f64 {
        match *self {
            PathSpec::Line { start, end, .. } => {
                let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
                let dx = end[0] - start[0];
                if dx.abs() > 0.0 {
                    start[0] + t * dx
                } else {
                    start[1] + t * (end[1] - start[1])
                }
            }
            PathSpec::Circle { start_deg, step_deg, .. } => start_deg + step_deg * i as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScanSpec {
    pub frequencies_ghz: Vec<f64>,
    #[serde(flatten)]
    pub path: PathSpec,
    #[serde(default = "z_axis")]
    pub polarization: Vec3,
    #[serde(default)]
    pub green: GreenPreset,
    /// Reference probe positions for visibility curves.
    #[serde(default)]
    pub references: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbesSpec {
    #[serde(default = "z_axis")]
    pub polarization: Vec3,
    #[serde(default)]
    pub green: GreenPreset,
    /// Explicit positions; takes precedence over `generator`.
    pub positions: Option<Vec<Vec3>>,
    pub generator: Option<PathSpec>,
    /// Probes used when no count is requested; defaults to all of them.
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverySpec {
    pub frequencies_ghz: Vec<f64>,
    #[serde(default = "default_phase_steps")]
    pub phase_steps: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Largest probe count tried by a convergence study.
    pub max_probes: Option<usize>,
}

/// Whether a number comes from the published results or was derived here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Published,
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PeakMethod {
    /// Local maxima of the spectrum.
    #[default]
    Maxima,
    /// Maxima and shoulders (negative-curvature maxima).
    Features,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseRelation {
    InPhase,
    Antiphase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extremum {
    Minimum,
    Maximum,
}

/// One checked observable. Every variant carries its origin and tolerance.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Expectation {
    /// Peaks of the scenario spectrum, each within `tolerance_ghz`. With
    /// `exact_count` no other peaks may be present.
    Peaks {
        origin: Origin,
        frequencies_ghz: Vec<f64>,
        tolerance_ghz: f64,
        #[serde(default)]
        exact_count: bool,
        #[serde(default)]
        method: PeakMethod,
    },
    /// Width of the spectrum peak nearest `frequency_ghz`.
    Fwhm {
        origin: Origin,
        frequency_ghz: f64,
        width_ghz: f64,
        tolerance_ghz: f64,
    },
    /// Sizes of the leading eigenvalue clusters of L at a frequency.
    Clusters {
        origin: Origin,
        frequency_ghz: f64,
        sizes: Vec<usize>,
        rel_gap: f64,
    },
    /// λ₀/λ₁ of L above `min_ratio`.
    Dominance {
        origin: Origin,
        frequency_ghz: f64,
        min_ratio: f64,
    },
    /// Recovery with the first `probes` scenario probes, from fringe data.
    /// `succeeds = false` expects the comparison to fail the threshold.
    Recovery {
        origin: Origin,
        frequency_ghz: f64,
        probes: usize,
        max_angle: f64,
        #[serde(default = "yes")]
        succeeds: bool,
    },
    /// First probe count from which recovery stays within `max_angle`.
    Plateau {
        origin: Origin,
        frequency_ghz: f64,
        probes: usize,
        max_angle: f64,
    },
    /// Phase of `neighbours` relative to `site` in the dominant mode.
    NeighbourPhase {
        origin: Origin,
        frequency_ghz: f64,
        site: usize,
        neighbours: Vec<usize>,
        relation: PhaseRelation,
        tolerance_deg: f64,
    },
    /// |⟨u₀, pattern⟩| of the dominant L eigenvector against a normalized
    /// per-site pattern along each dipole axis.
    ModePattern {
        origin: Origin,
        frequency_ghz: f64,
        pattern: Vec<f64>,
        min_overlap: f64,
    },
    /// The single-probe line scan has a local extremum within `tolerance`
    /// of path coordinate `at`.
    ScanExtremum {
        origin: Origin,
        frequency_ghz: f64,
        at: f64,
        extremum: Extremum,
        tolerance: f64,
    },
    /// Recovery with each count in `probes` matches recovery with `base`
    /// probes to `max_angle`.
    RecoveryStability {
        origin: Origin,
        frequency_ghz: f64,
        base: usize,
        probes: Vec<usize>,
        max_angle: f64,
    },
    /// Dominant mode leaves `site` nearly still.
    StationarySite {
        origin: Origin,
        frequency_ghz: f64,
        site: usize,
        max_fraction: f64,
    },
    /// Leading `modes` eigenvectors concentrate on `end_sites` at each end.
    EndLocalized {
        origin: Origin,
        frequency_ghz: f64,
        modes: usize,
        end_sites: usize,
        min_fraction: f64,
    },
    /// Eigenvalues of the deconvolved response, rescaled so the largest
    /// equals `values[0]`, each within `tolerance`.
    RecoveredEigenvalues {
        origin: Origin,
        frequency_ghz: f64,
        values: Vec<f64>,
        tolerance: f64,
    },
    /// Fringe-measured H: amplitudes rescaled so that entry (0, 0) equals
    /// `amplitudes[0][0]`, and phases in degrees.
    HTable {
        origin: Origin,
        frequency_ghz: f64,
        amplitudes: Vec<Vec<f64>>,
        phases_deg: Vec<Vec<f64>>,
        amplitude_tolerance: f64,
        phase_tolerance_deg: f64,
    },
    /// Each recovered source-space mode matches the dominant mode at the
    /// listed resonance best, in eigenvalue order.
    ModeMap {
        origin: Origin,
        frequency_ghz: f64,
        resonances_ghz: Vec<f64>,
    },
    /// Fringe-extracted H against Gᴾ† L Gᴾ.
    FringeConsistency {
        origin: Origin,
        frequency_ghz: f64,
        rel_tolerance: f64,
    },
    /// min |γ| over the scan at `frequency_ghz` is below `max_ratio` times
    /// the same quantity at `baseline_ghz`.
    VisibilityContrast {
        origin: Origin,
        frequency_ghz: f64,
        baseline_ghz: f64,
        reference: Vec3,
        max_ratio: f64,
    },
    /// Visibility phase along the scan differs from that of scenario
    /// `other` by at least `min_deg` somewhere.
    VisibilityShift {
        origin: Origin,
        frequency_ghz: f64,
        other: String,
        reference: Vec3,
        min_deg: f64,
    },
}

impl Expectation {
    pub fn kind(&self) -> &'static str {
        match self {
            Expectation::Peaks { .. } => "peaks",
            Expectation::Fwhm { .. } => "fwhm",
            Expectation::Clusters { .. } => "clusters",
            Expectation::Dominance { .. } => "dominance",
            Expectation::Recovery { .. } => "recovery",
            Expectation::Plateau { .. } => "plateau",
            Expectation::NeighbourPhase { .. } => "neighbour-phase",
            Expectation::ModePattern { .. } => "mode-pattern",
            Expectation::ScanExtremum { .. } => "scan-extremum",
            Expectation::RecoveryStability { .. } => "recovery-stability",
            Expectation::StationarySite { .. } => "stationary-site",
            Expectation::EndLocalized { .. } => "end-localized",
            Expectation::RecoveredEigenvalues { .. } => "recovered-eigenvalues",
            Expectation::HTable { .. } => "h-table",
            Expectation::ModeMap { .. } => "mode-map",
            Expectation::FringeConsistency { .. } => "fringe-consistency",
            Expectation::VisibilityContrast { .. } => "visibility-contrast",
            Expectation::VisibilityShift { .. } => "visibility-shift",
        }
    }

    pub fn origin(&self) -> Origin {
        match self {
            Expectation::Peaks { origin, .. }
            | Expectation::Fwhm { origin, .. }
            | Expectation::Clusters { origin, .. }
            | Expectation::Dominance { origin, .. }
            | Expectation::Recovery { origin, .. }
            | Expectation::Plateau { origin, .. }
            | Expectation::NeighbourPhase { origin, .. }
            | Expectation::ModePattern { origin, .. }
            | Expectation::ScanExtremum { origin, .. }
            | Expectation::RecoveryStability { origin, .. }
            | Expectation::StationarySite { origin, .. }
            | Expectation::EndLocalized { origin, .. }
            | Expectation::RecoveredEigenvalues { origin, .. }
            | Expectation::HTable { origin, .. }
            | Expectation::ModeMap { origin, .. }
            | Expectation::FringeConsistency { origin, .. }
            | Expectation::VisibilityContrast { origin, .. }
            | Expectation::VisibilityShift { origin, .. } => *origin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub system: SystemSpec,
    #[serde(default)]
    pub scatter: ScatterSpec,
    pub spectrum: Option<SpectrumSpec>,
    pub scan: Option<ScanSpec>,
    pub probes: Option<ProbesSpec>,
    pub recovery: Option<RecoverySpec>,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

/// Scenario files shipped with the crate, by name.
pub const BUILTIN: &[(&str, &str)] = &[
    ("two-dipole", include_str!("../scenarios/two-dipole.toml")),
    ("two-dipole-weak", include_str!("../scenarios/two-dipole-weak.toml")),
    ("five-chain", include_str!("../scenarios/five-chain.toml")),
    ("triangle", include_str!("../scenarios/triangle.toml")),
    ("square", include_str!("../scenarios/square.toml")),
    ("octagon", include_str!("../scenarios/octagon.toml")),
    ("octagon-defect", include_str!("../scenarios/octagon-defect.toml")),
    ("octagon-defect-moved", include_str!("../scenarios/octagon-defect-moved.toml")),
    ("eleven-defect", include_str!("../scenarios/eleven-defect.toml")),
    ("eleven-defect-shifted", include_str!("../scenarios/eleven-defect-shifted.toml")),
    ("twenty-one-chain", include_str!("../scenarios/twenty-one-chain.toml")),
];

/// Turns a TOML error into a message carrying the line and field.
fn toml_error(source: &str, err: toml::de::Error) -> EaiError {
    let mut msg = String::new();
    if let Some(span) = err.span() {
        let line = source[..span.start.min(source.len())].matches('\n').count() + 1;
        msg.push_str(&format!("line {line}: "));
    }
    msg.push_str(err.message());
    EaiError::Config(msg)
}

impl Scenario {
    pub fn parse(source: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(source).map_err(|e| toml_error(source, e))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            EaiError::Config(m) => EaiError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// A built-in scenario by name, or a file path.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some((_, text)) = BUILTIN.iter().find(|(n, _)| *n == name_or_path) {
            return Self::parse(text);
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            return Self::from_file(path);
        }
        Err(EaiError::UnknownScenario(name_or_path.to_string()))
    }

    fn validate(&self) -> Result<()> {
        let cfg = |m: String| EaiError::Config(m);
        if self.name.trim().is_empty() {
            return Err(cfg("field `name`: must not be empty".into()));
        }
        let count = self.dipole_count()?;
        if count == 0 {
            return Err(cfg("field `system`: dipole list is empty".into()));
        }
        for o in &self.system.overrides {
            if o.index >= count {
                return Err(cfg(format!(
                    "field `system.overrides`: index {} out of range for {count} dipoles",
                    o.index
                )));
            }
        }
        if let Some(r) = &self.recovery {
            if r.frequencies_ghz.is_empty() {
                return Err(cfg("field `recovery.frequencies_ghz`: must not be empty".into()));
            }
        }
        if let Some(s) = &self.spectrum {
            if s.source == SpectrumKind::Probe && s.probe.is_none() {
                return Err(cfg("field `spectrum.probe`: required when source = \"probe\"".into()));
            }
        }
        Ok(())
    }

    fn dipole_count(&self) -> Result<usize> {
        let s = &self.system;
        match s.layout {
            Layout::Explicit => Ok(s.positions.as_ref().map_or(0, Vec::len)),
            Layout::Chain | Layout::Ring => s
                .count
                .ok_or_else(|| EaiError::Config("field `system.count`: required for chain and ring layouts".into())),
        }
    }

    fn positions(&self) -> Result<Vec<Vec3>> {
        let s = &self.system;
        let spacing = || {
            s.spacing
                .ok_or_else(|| EaiError::Config("field `system.spacing`: required for chain and ring layouts".into()))
        };
        Ok(match s.layout {
            Layout::Explicit => s.positions.clone().unwrap_or_default(),
            Layout::Chain => model::chain_positions(self.dipole_count()?, spacing()?),
            Layout::Ring => model::ring_positions(self.dipole_count()?, spacing()?, s.first_angle_deg),
        })
    }

    pub fn build_system(&self) -> Result<DipoleSystem> {
        let s = &self.system;
        let mut dipoles = self
            .positions()?
            .into_iter()
            .map(|p| Dipole::new(p, s.axis, s.f0_ghz, s.gamma_ghz, s.alpha))
            .collect::<Result<Vec<_>>>()?;
        for o in &s.overrides {
            let d = &dipoles[o.index];
            dipoles[o.index] = Dipole::new(
                d.position,
                o.axis.unwrap_or(d.axis),
                o.f0_ghz.unwrap_or(d.f0_ghz()),
                o.gamma_ghz.unwrap_or(d.gamma_ghz()),
                o.alpha.unwrap_or(d.alpha_e),
            )?;
        }
        DipoleSystem::new(dipoles)
    }

    pub fn scatter_options(&self) -> GreenOptions {
        self.scatter.options()
    }

    /// Recovery probes, truncated to (or generated with) `count` entries.
    pub fn probe_set(&self, count: Option<usize>) -> Result<ProbeSet> {
        let spec = self
            .probes
            .as_ref()
            .ok_or_else(|| EaiError::Config(format!("scenario `{}` has no [probes] section", self.name)))?;
        let green = spec.green.options();
        let count = count.or(spec.count);
        if let Some(points) = &spec.positions {
            let n = count.unwrap_or(points.len());
            if n > points.len() {
                return Err(EaiError::Config(format!(
                    "field `probes.positions`: {n} probes requested but only {} listed",
                    points.len()
                )));
            }
            let probes = points[..n]
                .iter()
                .map(|&p| Probe::new(p, spec.polarization, green))
                .collect::<Result<Vec<_>>>()?;
            return ProbeSet::new(probes);
        }
        match &spec.generator {
            Some(path) => path.probes(count.unwrap_or(path.count()), spec.polarization, green),
            None => Err(EaiError::Config(
                "field `probes`: needs either `positions` or `generator`".into(),
            )),
        }
    }

    /// Number of recovery probes listed or generated by default.
    pub fn default_probe_count(&self) -> Option<usize> {
        let spec = self.probes.as_ref()?;
        if spec.count.is_some() {
            return spec.count;
        }
        spec.positions
            .as_ref()
            .map(Vec::len)
            .or_else(|| spec.generator.as_ref().map(PathSpec::count))
    }
}
