//! Acceptance criteria, one line each.
//!
//! Criteria 1-7 are evaluated through the scenario library's checks; the
//! oracle equivalences of criterion 8 are computed here. Where a criterion
//! depends on the fringe-measured H, the same pipeline on the exact H is
//! printed alongside as a diagnostic; it does not affect the verdict.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eai::assembly::SystemMatrices;
use eai::config::Scenario;
use eai::greens::{green_dyadic, GreenOptions};
use eai::interferometry::{self, HSource, ModeSet, ProbeSet};
use eai::linalg::{self, CMatrix, CVector};
use eai::model;
use eai::regression::{self, Check, Context};
use num_complex::Complex64;

struct Verdict {
    id: &'static str,
    title: &'static str,
    lines: Vec<(bool, String)>,
}

impl Verdict {
    fn new(id: &'static str, title: &'static str) -> Self {
        Self {
            id,
            title,
            lines: Vec::new(),
        }
    }

    fn add(&mut self, passed: bool, detail: impl Into<String>) {
        self.lines.push((passed, detail.into()));
    }

    fn note(&mut self, detail: impl Into<String>) {
        // Diagnostics are listed but never decide the verdict.
        self.lines.push((true, format!("note: {}", detail.into())));
    }

    /// Scenario checks whose kind is in `kinds`, in file order.
    fn checks(&mut self, scenario: &str, kinds: &[&str]) {
        let s = Scenario::load(scenario).unwrap();
        let ctx = Context::new(&s).unwrap();
        let mut seen = 0;
        for exp in s.expect.iter().filter(|e| kinds.contains(&e.kind())) {
            let c: Check = regression::evaluate(&ctx, exp).unwrap();
            self.add(c.passed, format!("{scenario}: {} {}", c.kind, c.detail));
            seen += 1;
        }
        assert!(seen > 0, "{scenario} has no checks of kinds {kinds:?}");
    }

    fn passed(&self) -> bool {
        self.lines.iter().all(|(p, _)| *p)
    }

    fn print(&self) {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {}: {}", self.id, self.title);
        for (p, line) in &self.lines {
            println!("        {} {line}", if *p { "ok  " } else { "FAIL" });
        }
    }
}

fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    linalg::frobenius(&(a - b)) / linalg::frobenius(b).max(f64::MIN_POSITIVE)
}

/// Largest principal angle between the recovered and direct modes.
fn recovery_angle(mats: &SystemMatrices, probes: &ProbeSet, source: HSource, rel_tol: f64) -> f64 {
    let h = source.build(mats, probes, None).unwrap();
    let rec = interferometry::recover_modes(&h, probes, mats, rel_tol).unwrap();
    compare(&interferometry::direct_modes(mats).unwrap(), &rec.modes)
}

fn compare(a: &ModeSet, b: &ModeSet) -> f64 {
    interferometry::compare_modes(a, b, interferometry::DEFAULT_CLUSTER_GAP, interferometry::DEFAULT_SIGNIFICANCE)
        .max_angle
}

/// Direct-H diagnostic for every recovery expectation of `scenario`.
fn exact_h_notes(v: &mut Verdict, scenario: &str) {
    let s = Scenario::load(scenario).unwrap();
    let ctx = Context::new(&s).unwrap();
    let tol = s.recovery.as_ref().map_or(linalg::DEFAULT_PINV_TOL, |r| r.rel_tol);
    for exp in &s.expect {
        if let eai::config::Expectation::Recovery {
            frequency_ghz, probes, ..
        } = exp
        {
            let mats = ctx.matrices(*frequency_ghz).unwrap();
            let set = s.probe_set(Some(*probes)).unwrap();
            let angle = recovery_angle(&mats, &set, HSource::Direct, tol);
            v.note(format!(
                "{scenario}: {} probes at {frequency_ghz} GHz with exact H: angle {angle:.2e} rad",
                set.len()
            ));
        }
    }
}

fn criterion_1() -> Verdict {
    let mut v = Verdict::new("1", "two-dipole splitting; weak pair single line");
    v.checks("two-dipole", &["peaks"]);
    v.checks("two-dipole-weak", &["peaks", "fwhm"]);
    v
}

fn criterion_2() -> Verdict {
    let mut v = Verdict::new("2", "mode symmetry and on-axis null/peak");
    v.checks("two-dipole", &["mode-pattern", "scan-extremum"]);
    v
}

fn criterion_3() -> Verdict {
    let mut v = Verdict::new("3", "ring spectra and degeneracy pattern");
    for s in ["triangle", "square", "octagon"] {
        v.checks(s, &["peaks", "clusters"]);
    }
    v
}

fn criterion_4() -> Verdict {
    let mut v = Verdict::new("4", "defect octagon splitting and stationary defect");
    v.checks("octagon-defect", &["peaks", "stationary-site"]);
    v
}

fn criterion_5() -> Verdict {
    let mut v = Verdict::new("5", "5-chain features, fringe-table recovery, probe count");
    v.checks(
        "five-chain",
        &["peaks", "recovery", "h-table", "recovered-eigenvalues", "mode-map", "recovery-stability"],
    );
    exact_h_notes(&mut v, "five-chain");
    v
}

fn criterion_6() -> Verdict {
    let mut v = Verdict::new("6", "11-chain defect features, phases, plateau, shifted defect");
    v.checks("eleven-defect", &["peaks", "neighbour-phase", "plateau", "visibility-shift"]);
    let s = Scenario::load("eleven-defect").unwrap();
    let ctx = Context::new(&s).unwrap();
    let f = s.recovery.as_ref().unwrap().frequencies_ghz[0];
    let mats = ctx.matrices(f).unwrap();
    let angles: Vec<String> = (9..=11)
        .map(|n| {
            let set = s.probe_set(Some(n)).unwrap();
            format!("{n}: {:.1e}", recovery_angle(&mats, &set, HSource::Direct, linalg::DEFAULT_PINV_TOL))
        })
        .collect();
    v.note(format!("exact-H recovery angle by probe count at {f} GHz: {}", angles.join(", ")));
    v
}

fn criterion_7() -> Verdict {
    let mut v = Verdict::new("7", "21-chain resonances, end modes, visibility contrast");
    v.checks(
        "twenty-one-chain",
        &["peaks", "dominance", "clusters", "end-localized", "visibility-contrast"],
    );
    v
}

/// Every frequency a scenario evaluates recovery or a scan at.
fn scenario_freqs(s: &Scenario) -> Vec<f64> {
    let mut f: Vec<f64> = s.recovery.iter().flat_map(|r| r.frequencies_ghz.clone()).collect();
    f.extend(s.scan.iter().flat_map(|r| r.frequencies_ghz.clone()));
    f.sort_by(f64::total_cmp);
    f.dedup();
    f
}

fn criterion_8() -> Verdict {
    let mut v = Verdict::new("8", "oracle equivalences");

    // (a) fringe-extracted H against Gᴾ† L Gᴾ.
    let mut worst = (0.0, String::new());
    for name in common::builtin_names() {
        let s = Scenario::load(name).unwrap();
        if s.probes.is_none() {
            continue;
        }
        let ctx = Context::new(&s).unwrap();
        let set = s.probe_set(None).unwrap();
        let steps = s.recovery.as_ref().map_or(interferometry::DEFAULT_PHASE_STEPS, |r| r.phase_steps);
        for f in scenario_freqs(&s) {
            let mats = ctx.matrices(f).unwrap();
            let fringe = interferometry::measure_h(&mats, &set, steps, None).unwrap().matrix;
            let direct = interferometry::direct_h(&mats, &set).unwrap().matrix;
            let d = rel_diff(&fringe, &direct);
            if d >= worst.0 {
                worst = (d, format!("{name} at {f} GHz"));
            }
        }
    }
    v.add(worst.0 < 1e-9, format!("(a) fringe vs direct H: worst {:.2e} ({})", worst.0, worst.1));

    // (b) per-site absorption sum against the quadratic form.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for name in common::builtin_names() {
        let s = Scenario::load(name).unwrap();
        let ctx = Context::new(&s).unwrap();
        let f = scenario_freqs(&s).first().copied().unwrap_or(300.0);
        let mats = ctx.matrices(f).unwrap();
        for _ in 0..50 {
            let e = CVector::from_fn(ctx.system.dim(), |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let direct = mats.absorbed_power_direct(&e).unwrap();
            let form = mats.absorbed_power(&e);
            worst = worst.max((direct - form).abs() / direct.abs().max(form.abs()));
        }
    }
    v.add(worst < 1e-10, format!("(b) site sum vs quadratic form, 50 fields per scenario: worst {worst:.2e}"));

    // (c) closed-form dyadic against finite differences.
    let mut worst = 0.0f64;
    for f in [42.0, 300.0, 500.0] {
        let omega = model::ghz_to_angular(f);
        let lambda = model::wavelength_mm(f);
        for (obs, src) in common::random_pairs(f as u64, 20, lambda, 0.05, 5.0) {
            let exact = green_dyadic(&obs, &src, omega, &GreenOptions::full()).unwrap();
            let fd = common::fd_green(&obs, &src, omega, omega, 1e-5 * lambda);
            worst = worst.max(common::frobenius3(&(exact - fd)) / common::frobenius3(&fd));
        }
    }
    v.add(worst < 1e-5, format!("(c) Green's dyadic vs finite differences: worst {worst:.2e}"));

    // (d) passivity and |γ| ≤ 1 at every evaluated frequency.
    let (mut min_ratio, mut max_gamma) = (f64::INFINITY, 0.0f64);
    for name in common::builtin_names() {
        let s = Scenario::load(name).unwrap();
        let ctx = Context::new(&s).unwrap();
        let mut freqs = scenario_freqs(&s);
        if let Some(spec) = &s.spectrum {
            freqs.extend(eai::experiments::frequency_grid(spec.start_ghz, spec.stop_ghz, spec.step_ghz).unwrap());
        }
        let set = s.probes.as_ref().map(|_| s.probe_set(None).unwrap());
        for f in freqs {
            let mats = ctx.matrices(f).unwrap();
            let eig = linalg::eig_hermitian(mats.l(), false).unwrap();
            min_ratio = min_ratio.min(eig.values.last().unwrap() / eig.values[0]);
            if let Some(set) = &set {
                let h = interferometry::direct_h(&mats, set).unwrap().matrix;
                for a in 0..h.nrows() {
                    for b in a + 1..h.nrows() {
                        max_gamma = max_gamma.max(interferometry::visibility(&h, a, b).unwrap().norm());
                    }
                }
            }
        }
    }
    v.add(
        min_ratio >= -1e-12 && max_gamma <= 1.0 + 1e-12,
        format!("(d) min λ/λ_max {min_ratio:.2e}, max |γ| {max_gamma:.6}"),
    );

    // (e) recovery with near-only, far-only and full probe dyadics.
    for name in ["two-dipole", "octagon"] {
        let s = Scenario::load(name).unwrap();
        let ctx = Context::new(&s).unwrap();
        let rec = s.recovery.as_ref().unwrap();
        let base = s.probe_set(None).unwrap();
        for &f in &rec.frequencies_ghz {
            let mats = ctx.matrices(f).unwrap();
            let direct = interferometry::direct_modes(&mats).unwrap();
            let mut fringe = Vec::new();
            let mut exact = Vec::new();
            let mut sets = Vec::new();
            for (label, green) in [
                ("near", GreenOptions::near_only()),
                ("far", GreenOptions::far_only()),
                ("full", GreenOptions::full()),
            ] {
                let set = base.with_green(green);
                let source = HSource::Fringe { steps: rec.phase_steps };
                let h = source.build(&mats, &set, None).unwrap();
                let modes = interferometry::recover_modes(&h, &set, &mats, rec.rel_tol).unwrap().modes;
                fringe.push(format!("{label} {:.1e}", compare(&direct, &modes)));
                exact.push(format!("{label} {:.1e}", recovery_angle(&mats, &set, HSource::Direct, rec.rel_tol)));
                sets.push(modes);
            }
            let worst = sets.iter().map(|m| compare(&direct, m)).fold(0.0, f64::max);
            v.add(
                worst < 1e-6,
                format!(
                    "(e) {name} at {f} GHz, {} probes: angle against direct modes [{}]",
                    base.len(),
                    fringe.join(", ")
                ),
            );
            v.note(format!("(e) {name} at {f} GHz with exact H: [{}]", exact.join(", ")));
        }
    }
    v
}

#[test]
fn acceptance() {
    let verdicts = [
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
    ];
    for v in &verdicts {
        v.print();
    }
    let failed: Vec<&str> = verdicts.iter().filter(|v| !v.passed()).map(|v| v.id).collect();
    println!("{} of {} criteria pass", verdicts.len() - failed.len(), verdicts.len());
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
