use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use eai::config::{Expectation, Scenario, SpectrumKind, BUILTIN};
use eai::experiments;
use eai::interferometry::{self, HSource, NoiseModel, Probe, ProbeSet};
use eai::output::{self, Table};
use eai::regression::{self, Context};
use eai::{EaiError, Result};

#[derive(Parser, Debug)]
#[command(name = "eai", version, about = "Energy absorption interferometry on coupled dipole systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Built-in scenario name or path to a scenario TOML file.
    #[arg(long, global = true)]
    scenario: Option<String>,

    /// Directory for CSV output.
    #[arg(long, global = true, env = "EAI_OUT_DIR", default_value = "out")]
    out: PathBuf,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for measurement noise.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Adds Gaussian noise to every power reading at this signal-to-noise ratio.
    #[arg(long, global = true)]
    snr: Option<f64>,

    /// Relative singular-value cutoff for the generalized inverse.
    #[arg(long, global = true)]
    rel_tol: Option<f64>,

    /// Differential phase steps per fringe.
    #[arg(long, global = true)]
    phase_steps: Option<usize>,

    /// Number of probes (recover) or the largest count tried (converge).
    #[arg(long, global = true)]
    probes: Option<usize>,

    /// Frequency in GHz; repeat for several. Defaults come from the scenario.
    #[arg(long = "freq", global = true)]
    freqs: Vec<f64>,

    /// Build H algebraically instead of from simulated fringes.
    #[arg(long, global = true)]
    direct_h: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Absorbed power against frequency.
    Spectrum,
    /// Single-probe power along the scan path.
    Scan,
    /// Fringe between the first two scenario probes.
    Fringe,
    /// Visibility along the scan path against each reference position.
    Visibility,
    /// Measure H, deconvolve and compare with direct diagonalization.
    Recover,
    /// Recovery error against the number of probes.
    Converge,
    /// Check every expectation in the scenario.
    Regress,
    /// List built-in scenarios.
    ListScenarios,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Scan => "scan",
            Command::Fringe => "fringe",
            Command::Visibility => "visibility",
            Command::Recover => "recover",
            Command::Converge => "converge",
            Command::Regress => "regress",
            Command::ListScenarios => "list-scenarios",
        }
    }
}

enum Outcome {
    Ok,
    RegressionFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::RegressionFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| EaiError::Config(format!("--threads: {e}")))?;
    }
    if cli.command == Command::ListScenarios {
        for (name, text) in BUILTIN {
            let s = Scenario::parse(text)?;
            println!("{name:24} {}", s.description);
        }
        return Ok(Outcome::Ok);
    }
    let name = cli
        .scenario
        .as_deref()
        .ok_or_else(|| EaiError::Config(format!("`{}` needs --scenario", cli.command.name())))?;
    let scenario = Scenario::load(name)?;
    let ctx = Context::new(&scenario)?;
    match cli.command {
        Command::Spectrum => spectrum(cli, &ctx),
        Command::Scan => scan(cli, &ctx),
        Command::Fringe => fringe(cli, &ctx),
        Command::Visibility => visibility(cli, &ctx),
        Command::Recover => recover(cli, &ctx),
        Command::Converge => converge(cli, &ctx),
        Command::Regress => regress(cli, &ctx),
        Command::ListScenarios => unreachable!(),
    }
}

fn out_file(cli: &Cli, ctx: &Context, command: &str, f_ghz: Option<f64>) -> PathBuf {
    let name = match f_ghz {
        Some(f) => format!("{}_{command}_{f}.csv", ctx.scenario.name),
        None => format!("{}_{command}.csv", ctx.scenario.name),
    };
    cli.out.join(name)
}

fn write(table: &Table, path: &Path) -> Result<()> {
    output::write_csv(table, path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn noise(cli: &Cli) -> Option<NoiseModel> {
    cli.snr.map(|snr| NoiseModel { snr, seed: cli.seed })
}

fn phase_steps(cli: &Cli, ctx: &Context) -> usize {
    cli.phase_steps
        .or(ctx.scenario.recovery.as_ref().map(|r| r.phase_steps))
        .unwrap_or(interferometry::DEFAULT_PHASE_STEPS)
}

fn rel_tol(cli: &Cli, ctx: &Context) -> f64 {
    cli.rel_tol
        .or(ctx.scenario.recovery.as_ref().map(|r| r.rel_tol))
        .unwrap_or(eai::linalg::DEFAULT_PINV_TOL)
}

fn h_source(cli: &Cli, ctx: &Context) -> HSource {
    if cli.direct_h {
        HSource::Direct
    } else {
        HSource::Fringe {
            steps: phase_steps(cli, ctx),
        }
    }
}

/// `--freq` values, else the scenario's list for this command.
fn frequencies(cli: &Cli, defaults: Option<&Vec<f64>>, what: &str) -> Result<Vec<f64>> {
    if !cli.freqs.is_empty() {
        return Ok(cli.freqs.clone());
    }
    match defaults {
        Some(f) if !f.is_empty() => Ok(f.clone()),
        _ => Err(EaiError::Config(format!("no frequencies for {what}: pass --freq"))),
    }
}

fn recovery_freqs(cli: &Cli, ctx: &Context) -> Result<Vec<f64>> {
    frequencies(cli, ctx.scenario.recovery.as_ref().map(|r| &r.frequencies_ghz), "recovery")
}

fn spectrum(cli: &Cli, ctx: &Context) -> Result<Outcome> {
    let spec = ctx
        .scenario
        .spectrum
        .as_ref()
        .ok_or_else(|| EaiError::Config("scenario has no [spectrum] section".into()))?;
    let (xs, ys) = ctx.spectrum()?;
    let mut t = Table::new(["f_ghz", "power"]);
    for (x, y) in xs.iter().zip(ys) {
        t.push(&[*x, *y]);
    }
    write(&t, &out_file(cli, ctx, "spectrum", None))?;
    let peaks: Vec<String> = experiments::find_peaks(xs, ys).iter().map(|p| format!("{:.1}", p.x)).collect();
    let features: Vec<String> = experiments::find_features(xs, ys, regression::FEATURE_MIN_REL)
        .iter()
        .map(|p| format!("{:.1}", p.x))
        .collect();
    let source = match spec.source {
        SpectrumKind::Probe => "single probe",
        SpectrumKind::Trace => "Tr L",
        SpectrumKind::MaxEigenvalue => "largest eigenvalue of L",
    };
    println!("spectrum ({source}): peaks [{}] GHz", peaks.join(", "));
    println!("features [{}] GHz", features.join(", "));
    Ok(Outcome::Ok)
}

fn scan_setup<'a>(ctx: &Context<'a>) -> Result<(&'a eai::config::ScanSpec, ProbeSet)> {
    let scan = ctx
        .scenario
        .scan
        .as_ref()
        .ok_or_else(|| EaiError::Config("scenario has no [scan] section".into()))?;
    let path = scan.path.probes(scan.path.count(), scan.polarization, scan.green.options())?;
    Ok((scan, path))
}

fn scan(cli: &Cli, ctx: &Context) -> Result<Outcome> {
    let (spec, path) = scan_setup(ctx)?;
    for f in frequencies(cli, Some(&spec.frequencies_ghz), "scan")? {
        let mats = ctx.matrices(f)?;
        let w = experiments::line_scan(&mats, &path)?;
        let mut t = Table::new(["coordinate", "x_mm", "y_mm", "z_mm", "power"]);
        for (i, (p, w)) in path.probes().iter().zip(&w).enumerate() {
            let c = spec.path.coordinate(i, path.len());
            t.push(&[c, p.position[0], p.position[1], p.position[2], *w]);
        }
        write(&t, &out_file(cli, ctx, "scan", Some(f)))?;
    }
    Ok(Outcome::Ok)
}

fn visibility(cli: &Cli, ctx: &Context) -> Result<Outcome> {
    let (spec, path) = scan_setup(ctx)?;
    if spec.references.is_empty() {
        return Err(EaiError::Config("field `scan.references`: no reference positions".into()));
    }
    let refs = spec
        .references
        .iter()
        .map(|&r| Probe::new(r, spec.polarization, spec.green.options()))
        .collect::<Result<Vec<_>>>()?;
    let mut headers = vec!["coordinate".to_string()];
    for i in 0..refs.len() {
        headers.push(format!("ref{i}_amp"));
        headers.push(format!("ref{i}_phase_deg"));
    }
    for f in frequencies(cli, Some(&spec.frequencies_ghz), "visibility")? {
        let mats = ctx.matrices(f)?;
        let curves = refs
            .iter()
            .map(|r| experiments::visibility_scan(&mats, &path, r))
            .collect::<Result<Vec<_>>>()?;
        let mut t = Table::new(headers.clone());
        for i in 0..path.len() {
            let mut row = vec![spec.path.coordinate(i, path.len())];
            for c in &curves {
                row.extend(output::polar_cells(c[i]));
            }
            t.push(&row);
        }
        write(&t, &out_file(cli, ctx, "visibility", Some(f)))?;
    }
    Ok(Outcome::Ok)
}

fn fringe(cli: &Cli, ctx: &Context) -> Result<Outcome> {
    let probes = ctx.scenario.probe_set(None)?;
    if probes.len() < 2 {
        return Err(EaiError::Config("fringe needs at least two probes".into()));
    }
    let steps = phase_steps(cli, ctx);
    for f in recovery_freqs(cli, ctx)? {
        let mats = ctx.matrices(f)?;
        let sweep =
            interferometry::fringe_sweep(&mats, &probes.probes()[0], &probes.probes()[1], steps, noise(cli).as_ref())?;
        let mut t = Table::new(["phase_deg", "power"]);
        for s in &sweep {
            t.push(&[s.phase.to_degrees(), s.power]);
        }
        write(&t, &out_file(cli, ctx, "fringe", Some(f)))?;
        let terms = interferometry::extract_fringe(&sweep)?;
        println!(
            "{f} GHz: mean {:.6e}, H_01 = {:.6e} at {:.3} deg",
            terms.dc,
            terms.h_ab.norm(),
            terms.h_ab.arg().to_degrees()
        );
    }
    Ok(Outcome::Ok)
}

/// Resonances listed by a mode-map expectation at `f`, if any.
fn resonance_labels(ctx: &Context, f: f64) -> Option<Vec<f64>> {
    ctx.scenario.expect.iter().find_map(|e| match e {
        Expectation::ModeMap {
            frequency_ghz,
            resonances_ghz,
            ..
        } if *frequency_ghz == f => Some(resonances_ghz.clone()),
        _ => None,
    })
}

/// Number of phase samples per cycle in the mode snapshot table.
const SNAPSHOT_STEPS: usize = 8;

fn recover(cli: &Cli, ctx: &Context) -> Result<Outcome> {
    let probes = ctx.scenario.probe_set(cli.probes)?;
    let noise = noise(cli);
    for f in recovery_freqs(cli, ctx)? {
        let mats = ctx.matrices(f)?;
        let h = h_source(cli, ctx).build(&mats, &probes, noise.as_ref())?;
        let rec = interferometry::recover_modes(&h, &probes, &mats, rel_tol(cli, ctx))?;
        let direct = interferometry::direct_modes(&mats)?;
        let cmp = interferometry::compare_modes(
            &direct,
            &rec.modes,
            interferometry::DEFAULT_CLUSTER_GAP,
            interferometry::DEFAULT_SIGNIFICANCE,
        );

        let shown = rec.modes.len().min(probes.len());
        let labels = resonance_labels(ctx, f);
        let eig_row: Vec<f64> = rec.modes.eigenvalues[..shown].to_vec();
        write(
            &output::h_table(&h.matrix, &eig_row, labels.as_deref()),
            &out_file(cli, ctx, "recover-h", Some(f)),
        )?;

        let system = mats.system();
        let mut modes = Table::new(["mode", "eigenvalue", "direct_eigenvalue", "site", "p_amp", "p_phase_deg"]);
        let mut snaps = Table::new(["mode", "phase_deg", "site", "displacement"]);
        for i in 0..shown {
            let p = rec.modes.site_moments(system, i);
            for (k, z) in p.iter().enumerate() {
                let [amp, ph] = output::polar_cells(*z);
                modes.push(&[
                    i as f64,
                    rec.modes.eigenvalues[i],
                    direct.eigenvalues.get(i).copied().unwrap_or(f64::NAN),
                    k as f64,
                    amp,
                    ph,
                ]);
            }
            for s in 0..SNAPSHOT_STEPS {
                let phi = 2.0 * std::f64::consts::PI * s as f64 / SNAPSHOT_STEPS as f64;
                let rot = Complex64::from_polar(1.0, -phi);
                for (k, z) in p.iter().enumerate() {
                    snaps.push(&[i as f64, phi.to_degrees(), k as f64, (z * rot).re]);
                }
            }
        }
        write(&modes, &out_file(cli, ctx, "recover", Some(f)))?;
        write(&snaps, &out_file(cli, ctx, "recover-snapshots", Some(f)))?;

        println!(
            "{f} GHz, {} probes ({:?} H): rank {}, max principal angle {:.3e} rad, eigenvalue error {:.3e}",
            probes.len(),
            h.provenance,
            rec.rank,
            cmp.max_angle,
            cmp.max_eigenvalue_error
        );
        if let Some(w) = rec.warning {
            println!("warning: {w}");
        }
    }
    Ok(Outcome::Ok)
}

fn converge(cli: &Cli, ctx: &Context) -> Result<Outcome> {
    let max = cli
        .probes
        .or(ctx.scenario.recovery.as_ref().and_then(|r| r.max_probes))
        .or(ctx.scenario.default_probe_count())
        .ok_or_else(|| EaiError::Config("no probe count: pass --probes".into()))?;
    for f in recovery_freqs(cli, ctx)? {
        let mats = ctx.matrices(f)?;
        let points = interferometry::convergence_study(
            &mats,
            |s| ctx.scenario.probe_set(Some(s)),
            max,
            h_source(cli, ctx),
            rel_tol(cli, ctx),
        )?;
        let mut t = Table::new(["probes", "rank", "max_angle_rad", "max_eigenvalue_error"]);
        for p in &points {
            t.push(&[p.probes as f64, p.rank as f64, p.max_angle, p.max_eigenvalue_error]);
        }
        write(&t, &out_file(cli, ctx, "converge", Some(f)))?;
        for p in &points {
            println!("{f} GHz  S={:3}  rank {:3}  angle {:.3e}", p.probes, p.rank, p.max_angle);
        }
    }
    Ok(Outcome::Ok)
}

fn regress(cli: &Cli, ctx: &Context) -> Result<Outcome> {
    let report = regression::run_regression(ctx.scenario)?;
    println!("scenario {}", report.scenario);
    for c in &report.checks {
        println!("  {c}");
    }
    if let Some(spec) = &ctx.scenario.recovery {
        if ctx.scenario.probes.is_some() {
            for &f in &spec.frequencies_ghz {
                let mats = ctx.matrices(f)?;
                let (probes, rec) = ctx.recover(&mats, None)?;
                let h = HSource::Fringe {
                    steps: phase_steps(cli, ctx),
                }
                .build(&mats, &probes, None)?;
                let shown = rec.modes.len().min(probes.len());
                let table = output::h_table(
                    &h.matrix,
                    &rec.modes.eigenvalues[..shown],
                    resonance_labels(ctx, f).as_deref(),
                );
                write(&table, &out_file(cli, ctx, "regress", Some(f)))?;
            }
        }
    }
    println!(
        "{} of {} checks passed",
        report.checks.len() - report.failures(),
        report.checks.len()
    );
    Ok(if report.passed() {
        Outcome::Ok
    } else {
        Outcome::RegressionFailed
    })
}
