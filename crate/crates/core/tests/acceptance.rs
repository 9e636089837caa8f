//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each, and exits non-zero if any failed.

#![allow(clippy::excessive_precision, clippy::type_complexity)]

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use lattice_gravimetry::analytic::{css_moments, moments};
use lattice_gravimetry::dicke::{css, oat_twist, rotate_x, SymmetricSpinState};
use lattice_gravimetry::oracle::equivalence_sweep;
use lattice_gravimetry::par::Exec;
use lattice_gravimetry::params::{derive, PhysicalParams};
use lattice_gravimetry::phasebook::{closed_form_total_phase, total_phase};
use lattice_gravimetry::sensitivity::{
    chi_scaling, finite_difference_dg_over_g, robustness_with, scaling_study, tune_to_operating_point, uncertainty,
    StateKind, ROBUSTNESS_GRID,
};
use lattice_gravimetry::{C64, HBAR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances and budgets.
const EQUIVALENCE_TOL: f64 = 1e-10;
const EQUIVALENCE_DRAWS: usize = 50;
const EQUIVALENCE_BUDGET: Duration = Duration::from_secs(30);
const SINGLE_PARTICLE_TOL: f64 = 1e-12;
const SINGLE_PARTICLE_GRID: usize = 30;
const TOTAL_PHASE_DRAWS: usize = 1000;
const TOTAL_PHASE_REL_TOL: f64 = 1e-9;
const CSS_EXPONENT: f64 = -0.5;
const CSS_EXPONENT_TOL: f64 = 0.005;
const CSS_BUDGET: Duration = Duration::from_secs(5);
const SSS_EXPONENT: f64 = -5.0 / 6.0;
const SSS_EXPONENT_TOL: f64 = 0.05;
const SSS_BUDGET: Duration = Duration::from_secs(120);
const CHI_EXPONENT: f64 = -1.0 / 3.0;
const CHI_EXPONENT_TOL: f64 = 0.05;
const ORDERING_SLACK: f64 = 1e-12;
const COINCIDENCE_TOL: f64 = 1e-12;
const RB87_RECOIL: f64 = 2.47e-30;
const RB87_SHIFT_TIME: f64 = 13.4e-3;
const RB87_REL_TOL: f64 = 0.01;
const RB87_DG_REL_TOL: f64 = 1e-12;
/// ħ / (2 M g L d T_tot) for the ⁸⁷Rb set, from a 40-digit evaluation.
const RB87_DG_OVER_G_CSS1: f64 = 1.877445267689097504e-6;
const DISLOCATION_SPAN: f64 = 0.2;
const PEAK_SHIFT_TOL: f64 = 1e-10;
const VISIBILITY_TOL: f64 = 1e-8;
const DERIVATIVE_REL_TOL: f64 = 1e-3;
const DERIVATIVE_REL_STEP: f64 = 1e-6;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> SymmetricSpinState {
    match rng.random_range(0..3) {
        0 => rotate_x(&oat_twist(&css(n).unwrap(), rng.random_range(0.0..0.5)), rng.random_range(-PI..PI)),
        kind => {
            let mut c: Vec<C64> =
                (0..=n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            if kind == 1 {
                for k in 0..=n / 2 {
                    c[n - k] = c[k];
                }
            }
            SymmetricSpinState::normalized(c).unwrap()
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let n_list: Vec<usize> = (1..=8).collect();
    let reports = equivalence_sweep(
        &PhysicalParams::rb87_scaled(),
        &n_list,
        EQUIVALENCE_DRAWS,
        42,
        EQUIVALENCE_TOL,
        Exec::default(),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let worst = reports.iter().map(|r| r.max_deviation).fold(0.0, f64::max);
    let route = reports.iter().map(|r| r.route_deviation).fold(0.0, f64::max);
    let passed = reports.iter().all(|r| r.passed) && elapsed <= EQUIVALENCE_BUDGET;
    outcome(
        passed,
        format!(
            "N=1..8 x {EQUIVALENCE_DRAWS} draws, max |analytic - oracle| = {worst:.2e}, \
             max |fock - first-quantized| = {route:.2e} (tol {EQUIVALENCE_TOL:e}), {:.1} s (budget {} s)",
            elapsed.as_secs_f64(),
            EQUIVALENCE_BUDGET.as_secs()
        ),
    )
}

fn single_particle_closed_forms() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..SINGLE_PARTICLE_GRID {
        for j in 0..SINGLE_PARTICLE_GRID {
            let xi = -PI + 2.0 * PI * i as f64 / (SINGLE_PARTICLE_GRID - 1) as f64;
            let phi = -PI + 2.0 * PI * j as f64 / (SINGLE_PARTICLE_GRID - 1) as f64;
            let m = css_moments(1, xi, phi);
            let (c2, cp) = (xi.cos().powi(2), phi.cos());
            let mean = 0.5 * c2 * cp;
            let var_global = 0.25 * (1.0 - c2 * c2 * cp * cp);
            let var_local = 0.25 * c2 * (1.0 - c2 * cp * cp);
            let general = moments(&css(1).unwrap(), xi, phi).unwrap();
            worst = worst
                .max((m.mean_global - mean).abs())
                .max((m.mean_local - mean).abs())
                .max((m.var_global - var_global).abs())
                .max((m.var_local - var_local).abs())
                .max(general.max_abs_diff(&m));
        }
    }
    outcome(
        worst <= SINGLE_PARTICLE_TOL,
        format!("{SINGLE_PARTICLE_GRID}x{SINGLE_PARTICLE_GRID} grid, max deviation {worst:.2e} (tol {SINGLE_PARTICLE_TOL:e})"),
    )
}

fn total_phase_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_identity, mut worst_eps): (f64, f64) = (0.0, 0.0);
    let mut closed_form_fixed = true;
    for _ in 0..TOTAL_PHASE_DRAWS {
        let base = PhysicalParams::rb87();
        let er = derive(&base).unwrap().recoil_energy;
        let p = PhysicalParams {
            atom_mass: base.atom_mass * rng.random_range(0.05..5.0),
            gravity: rng.random_range(0.0..30.0),
            wavelength: rng.random_range(4e-7..1.2e-6),
            drive_freq: base.drive_freq * rng.random_range(0.1..2.0),
            transition_freq: rng.random_range(-1e5..1e5),
            eps_up: rng.random_range(-2.0..2.0) * er,
            eps_dn: rng.random_range(-2.0..2.0) * er,
            shift_sites: rng.random_range(1..200),
            hold_time: rng.random_range(0.0..2.0),
            pulse_time: rng.random_range(0.0..1e-3),
            ..base
        };
        let chained = total_phase(&p).unwrap();
        let closed = closed_form_total_phase(&p).unwrap();
        worst_identity = worst_identity.max(((chained - closed) / closed).abs());

        let q = PhysicalParams {
            eps_up: rng.random_range(-2.0..2.0) * er,
            eps_dn: rng.random_range(-2.0..2.0) * er,
            transition_freq: rng.random_range(-1e5..1e5),
            ..p
        };
        worst_eps = worst_eps.max(((total_phase(&q).unwrap() - chained) / chained).abs());
        closed_form_fixed &= closed_form_total_phase(&q).unwrap() == closed;
    }
    outcome(
        worst_identity <= TOTAL_PHASE_REL_TOL && worst_eps <= TOTAL_PHASE_REL_TOL && closed_form_fixed,
        format!(
            "{TOTAL_PHASE_DRAWS} draws, max rel |chained - closed| = {worst_identity:.2e}, \
             max rel change under new eps/omega0 = {worst_eps:.2e} (tol {TOTAL_PHASE_REL_TOL:e})"
        ),
    )
}

fn css_scaling() -> Outcome {
    let start = Instant::now();
    let study = scaling_study(&PhysicalParams::rb87(), &[10, 100, 1000, 10000], StateKind::Css).unwrap();
    let elapsed = start.elapsed();
    let e = study.fit.exponent;
    outcome(
        (e - CSS_EXPONENT).abs() <= CSS_EXPONENT_TOL && elapsed <= CSS_BUDGET,
        format!(
            "exponent {e:.6} (target {CSS_EXPONENT} +/- {CSS_EXPONENT_TOL}), r2 {:.6}, {:.2} s (budget {} s)",
            study.fit.r_squared,
            elapsed.as_secs_f64(),
            CSS_BUDGET.as_secs()
        ),
    )
}

fn sss_scaling() -> Outcome {
    let start = Instant::now();
    let study = scaling_study(&PhysicalParams::rb87(), &[100, 1000, 10000], StateKind::Sss).unwrap();
    let elapsed = start.elapsed();
    let e = study.fit.exponent;
    let values: Vec<String> = study.points.iter().map(|q| format!("N={}: {:.3e}", q.n, q.dg_over_g)).collect();
    outcome(
        (e - SSS_EXPONENT).abs() <= SSS_EXPONENT_TOL && elapsed <= SSS_BUDGET,
        format!(
            "exponent {e:.4} (target {SSS_EXPONENT:.4} +/- {SSS_EXPONENT_TOL}), [{}], {:.1} s (budget {} s)",
            values.join(", "),
            elapsed.as_secs_f64(),
            SSS_BUDGET.as_secs()
        ),
    )
}

fn chi_scaling_law() -> Outcome {
    let fit = chi_scaling(&[100, 1000, 10000], Exec::default()).unwrap();
    let e = fit.exponent;
    outcome(
        (e - CHI_EXPONENT).abs() <= CHI_EXPONENT_TOL,
        format!("exponent {e:.4} (target {CHI_EXPONENT:.4} +/- {CHI_EXPONENT_TOL})"),
    )
}

fn variance_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_order, mut worst_equal): (f64, f64) = (f64::NEG_INFINITY, 0.0);
    let mut samples = 0;
    for _ in 0..2000 {
        let n = rng.random_range(1..=20);
        let s = random_state(n, &mut rng);
        let m = moments(&s, rng.random_range(-2.0 * PI..2.0 * PI), rng.random_range(-PI..PI)).unwrap();
        worst_order = worst_order.max(m.var_local - m.var_global);
        samples += 1;
        for xi in [0.0, PI] {
            let m = moments(&s, xi, rng.random_range(-PI..PI)).unwrap();
            worst_equal = worst_equal.max((m.var_local - m.var_global).abs());
        }
    }
    outcome(
        worst_order <= ORDERING_SLACK && worst_equal <= COINCIDENCE_TOL,
        format!(
            "{samples} samples, max (var_local - var_global) = {worst_order:.2e}, \
             max |difference| at xi in {{0, pi}} = {worst_equal:.2e} (tol {COINCIDENCE_TOL:e})"
        ),
    )
}

fn rb87_point_check() -> Outcome {
    let p = PhysicalParams::rb87();
    let d = derive(&p).unwrap();
    let er_rel = (d.recoil_energy - RB87_RECOIL).abs() / RB87_RECOIL;
    let ts_rel = (d.shift_time - RB87_SHIFT_TIME).abs() / RB87_SHIFT_TIME;
    let report = uncertainty(&p, &css(1).unwrap()).unwrap();
    let closed = HBAR / (2.0 * p.atom_mass * p.gravity * f64::from(p.shift_sites) * d.lattice_const * d.total_time);
    let closed_rel = (report.dg_over_g - closed).abs() / closed;
    let frozen_rel = (report.dg_over_g - RB87_DG_OVER_G_CSS1).abs() / RB87_DG_OVER_G_CSS1;
    outcome(
        er_rel <= RB87_REL_TOL && ts_rel <= RB87_REL_TOL && closed_rel <= RB87_DG_REL_TOL && frozen_rel <= RB87_DG_REL_TOL,
        format!(
            "E_r = {:.4e} J, T_s = {:.4} ms, dg/g = {:.6e} (closed-form rel {closed_rel:.1e}, reference rel {frozen_rel:.1e})",
            d.recoil_energy,
            d.shift_time * 1e3,
            report.dg_over_g
        ),
    )
}

fn dislocation_robustness() -> Outcome {
    let p = PhysicalParams::rb87_scaled();
    let unit = HBAR / p.hold_time;
    let deltas: Vec<f64> = (0..=8).map(|k| (-DISLOCATION_SPAN + 0.05 * k as f64) * unit).collect();
    let (mut worst_shift, mut worst_vis): (f64, f64) = (0.0, 0.0);
    for n in [2, 4] {
        let rows = robustness_with(&p, &css(n).unwrap(), &deltas, ROBUSTNESS_GRID, Exec::default()).unwrap();
        for r in &rows {
            let cos2 = (r.delta / unit).cos().powi(2);
            worst_shift = worst_shift.max(r.shift.abs());
            worst_vis = worst_vis.max((r.visibility - cos2).abs()).max((r.expected_visibility - cos2).abs());
        }
    }
    outcome(
        worst_shift < PEAK_SHIFT_TOL && worst_vis <= VISIBILITY_TOL,
        format!(
            "delta in +/-{DISLOCATION_SPAN} hbar/T_h, N in {{2, 4}}, {ROBUSTNESS_GRID}-point scans: \
             max peak shift {worst_shift:.2e} rad (tol {PEAK_SHIFT_TOL:e}), \
             max |visibility - cos^2| {worst_vis:.2e} (tol {VISIBILITY_TOL:e})"
        ),
    )
}

fn derivative_consistency() -> Outcome {
    let p = tune_to_operating_point(&PhysicalParams::rb87_scaled()).unwrap();
    let mut worst: f64 = 0.0;
    let states = [
        css(1).unwrap(),
        css(64).unwrap(),
        lattice_gravimetry::cli::build_state(&lattice_gravimetry::cli::StateSpec {
            kind: StateKind::Sss,
            n: 64,
            mu: None,
            beta: None,
        })
        .unwrap(),
    ];
    for s in &states {
        let closed = uncertainty(&p, s).unwrap().dg_over_g;
        let fd = finite_difference_dg_over_g(&p, s, DERIVATIVE_REL_STEP).unwrap();
        worst = worst.max((fd - closed).abs() / closed);
    }
    outcome(
        worst <= DERIVATIVE_REL_TOL,
        format!("css(1), css(64), optimal sss(64): max rel deviation {worst:.2e} (tol {DERIVATIVE_REL_TOL:e})"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("single-particle closed forms", single_particle_closed_forms),
        ("total-phase identity", total_phase_identity),
        ("CSS scaling", css_scaling),
        ("SSS scaling", sss_scaling),
        ("chi scaling", chi_scaling_law),
        ("variance ordering and coincidence", variance_ordering),
        ("Rb-87 point check", rb87_point_check),
        ("dislocation robustness", dislocation_robustness),
        ("derivative consistency", derivative_consistency),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.passed {
            failures += 1;
        }
        println!("criterion {:>2} {name}: {} | {}", k + 1, if result.passed { "PASS" } else { "FAIL" }, result.detail);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
