//! Gravity uncertainty from spin-population statistics.
//!
//! The operating point is φ = π/2, ξ = 0, where the fringe slope is largest
//! and a coherent input reaches the standard quantum limit.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::analytic::moments;
use crate::dicke::{css, oat_state, optimal_oat_with, SymmetricSpinState};
use crate::oracle::{measure, simulate, SequenceOptions};
use crate::par::{self, Exec};
use crate::params::{derive, PhysicalParams};
use crate::phasebook::{gravity_for_phase, ledger, phase_per_gravity};
use crate::{Error, Result, HBAR};

/// Visibilities below this make χ meaningless.
pub const MIN_VISIBILITY: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub chi: f64,
    pub dg_over_g: f64,
    pub phi_star: f64,
    pub xi_star: f64,
    pub n: usize,
}

/// χ = 2ΔJ_z / (𝒱√N).
pub fn chi(s: &SymmetricSpinState, xi: f64, phi: f64) -> Result<f64> {
    let m = moments(s, xi, phi)?;
    if !(m.visibility.abs() >= MIN_VISIBILITY) {
        return Err(Error::DegenerateVisibility(m.visibility));
    }
    Ok(2.0 * m.var_global.max(0.0).sqrt() / (m.visibility.abs() * (s.n_particles() as f64).sqrt()))
}

/// Δg/g = ħχ / (2√N M g L d T_tot) at the optimal operating point.
pub fn uncertainty(p: &PhysicalParams, s: &SymmetricSpinState) -> Result<SensitivityReport> {
    let d = derive(p)?;
    if p.gravity == 0.0 {
        return Err(Error::ZeroGravity);
    }
    let (xi_star, phi_star) = (0.0, FRAC_PI_2);
    let chi = chi(s, xi_star, phi_star)?;
    let n = s.n_particles();
    let dg_over_g = HBAR * chi
        / (2.0
            * (n as f64).sqrt()
            * p.atom_mass
            * p.gravity
            * f64::from(p.shift_sites)
            * d.lattice_const
            * d.total_time);
    Ok(SensitivityReport { chi, dg_over_g, phi_star, xi_star, n })
}

/// Copy of `p` with ξ = 0 and the hold time nearest to `p.hold_time` that puts
/// the total phase at π/2 (mod 2π).
pub fn tune_to_operating_point(p: &PhysicalParams) -> Result<PhysicalParams> {
    if p.gravity <= 0.0 {
        return Err(Error::ZeroGravity);
    }
    let d = derive(p)?;
    let q = PhysicalParams { eps_up: p.eps_dn - HBAR * p.transition_freq, ..*p };
    let rate = phase_per_gravity(&q)? * p.gravity / d.total_time;
    // rate · T_tot + π = π/2 + 2πk
    let fixed = d.shift_time + 2.0 * p.pulse_time;
    let k_min = ((rate * fixed + FRAC_PI_2) / (2.0 * PI)).ceil();
    let k_near = ((rate * d.total_time + FRAC_PI_2) / (2.0 * PI)).round().max(k_min);
    let hold_time = (2.0 * PI * k_near - FRAC_PI_2) / rate - fixed;
    let q = PhysicalParams { hold_time: hold_time.max(0.0), ..q };
    q.check_invariants()?;
    Ok(q)
}

/// ⟨J_z⟩ through the phase ledger and the analytic moments.
fn mean_jz(p: &PhysicalParams, s: &SymmetricSpinState) -> Result<f64> {
    let l = ledger(p)?;
    Ok(moments(s, l.xi, l.phi_total)?.mean_global)
}

/// ΔJ_z / (g |∂⟨J_z⟩/∂g|) from a Richardson-extrapolated central difference
/// with relative step `rel_step`.
pub fn finite_difference_dg_over_g(p: &PhysicalParams, s: &SymmetricSpinState, rel_step: f64) -> Result<f64> {
    if p.gravity == 0.0 {
        return Err(Error::ZeroGravity);
    }
    let g = p.gravity;
    let at = |gravity: f64| mean_jz(&PhysicalParams { gravity, ..*p }, s);
    let central = |h: f64| -> Result<f64> { Ok((at(g + h)? - at(g - h)?) / (2.0 * h)) };
    let h = rel_step * g;
    let slope = (4.0 * central(h / 2.0)? - central(h)?) / 3.0;
    let l = ledger(p)?;
    let spread = moments(s, l.xi, l.phi_total)?.var_global.max(0.0).sqrt();
    Ok(spread / (g * slope.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_min: usize,
    pub n_max: usize,
}

/// Least-squares line through (ln x, ln y).
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateFit(format!("need matching data, got {} and {} points", xs.len(), ys.len())));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::DegenerateFit("all values must be finite and positive".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 1e-12 * n {
        return Err(Error::DegenerateFit("abscissas are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok((slope, intercept, r_squared))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Css,
    Sss,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub dg_over_g: f64,
    pub chi: f64,
    /// Twisting strength and alignment; zero for coherent inputs.
    pub mu: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub kind: StateKind,
    pub points: Vec<ScalingPoint>,
    pub fit: ScalingFit,
}

/// Smallest number of particle numbers accepted by [`scaling_study`].
pub const MIN_SCALING_POINTS: usize = 3;

fn check_n_list(n_list: &[usize]) -> Result<()> {
    if n_list.len() < MIN_SCALING_POINTS {
        return Err(Error::InvalidParam {
            name: "N_list",
            reason: format!("need at least {MIN_SCALING_POINTS} particle numbers, got {}", n_list.len()),
        });
    }
    if n_list.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParam { name: "N_list", reason: "must be sorted".into() });
    }
    if n_list[0] == 0 {
        return Err(Error::InvalidParam { name: "N_list", reason: "particle numbers must be >= 1".into() });
    }
    Ok(())
}

fn fit_points(xs: &[f64], ys: &[f64], n_list: &[usize]) -> Result<ScalingFit> {
    let (exponent, intercept, r_squared) = fit_power_law(xs, ys)?;
    Ok(ScalingFit { exponent, intercept, r_squared, n_min: n_list[0], n_max: n_list[n_list.len() - 1] })
}

pub fn scaling_study(p: &PhysicalParams, n_list: &[usize], kind: StateKind) -> Result<ScalingStudy> {
    scaling_study_with(p, n_list, kind, Exec::default())
}

/// Δg/g for each N with a coherent or an optimally twisted input, and a
/// log-log fit.
pub fn scaling_study_with(p: &PhysicalParams, n_list: &[usize], kind: StateKind, exec: Exec) -> Result<ScalingStudy> {
    check_n_list(n_list)?;
    let points = par::try_map(exec, n_list, |&n| -> Result<ScalingPoint> {
        let (state, mu, beta) = match kind {
            StateKind::Css => (css(n)?, 0.0, 0.0),
            StateKind::Sss => {
                let opt = optimal_oat_with(n, Exec::Sequential)?;
                (oat_state(n, opt.mu, opt.beta)?, opt.mu, opt.beta)
            }
        };
        let r = uncertainty(p, &state)?;
        Ok(ScalingPoint { n, dg_over_g: r.dg_over_g, chi: r.chi, mu, beta })
    })?;
    let xs: Vec<f64> = points.iter().map(|q| q.n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|q| q.dg_over_g).collect();
    let fit = fit_points(&xs, &ys, n_list)?;
    Ok(ScalingStudy { kind, points, fit })
}

/// Log-log fit of the optimized one-axis-twisting χ over `n_list`.
pub fn chi_scaling(n_list: &[usize], exec: Exec) -> Result<ScalingFit> {
    check_n_list(n_list)?;
    let chis = par::try_map(exec, n_list, |&n| optimal_oat_with(n, Exec::Sequential).map(|o| o.chi))?;
    let xs: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    fit_points(&xs, &chis, n_list)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeRow {
    pub phi: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// ⟨J_z⟩ and the ±ΔJ_z band over `phi_grid`, at the ξ of the phase ledger.
pub fn fringe_scan(p: &PhysicalParams, s: &SymmetricSpinState, phi_grid: &[f64]) -> Result<Vec<FringeRow>> {
    if phi_grid.is_empty() {
        return Err(Error::InvalidParam { name: "phi_grid", reason: "must not be empty".into() });
    }
    let xi = ledger(p)?.xi;
    phi_grid
        .iter()
        .map(|&phi| {
            let m = moments(s, xi, phi)?;
            let half = m.var_global.max(0.0).sqrt();
            Ok(FringeRow { phi, mean: m.mean_global, lo: m.mean_global - half, hi: m.mean_global + half })
        })
        .collect()
}

/// `points` values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points).map(|k| start + (stop - start) * k as f64 / (points - 1) as f64).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    /// Dislocation energy, J.
    pub delta: f64,
    /// Fringe-peak position relative to the δ = 0 scan, rad.
    pub shift: f64,
    /// 2 × peak height / N.
    pub visibility: f64,
    /// Analytic visibility at the shifted spin angle.
    pub expected_visibility: f64,
}

/// Default φ-grid size for [`robustness`].
pub const ROBUSTNESS_GRID: usize = 10_000;

struct Peak {
    phi: f64,
    height: f64,
}

/// Extremum of `ys` along `phis` (maximum when `sign` > 0), refined by a
/// parabola through the best sample and its neighbours.
fn locate_peak(phis: &[f64], ys: &[f64], sign: f64) -> Peak {
    let mut best = 1;
    for k in 1..ys.len() - 1 {
        if sign * ys[k] > sign * ys[best] {
            best = k;
        }
    }
    let (a, b, c) = (ys[best - 1], ys[best], ys[best + 1]);
    let curvature = a - 2.0 * b + c;
    let step = phis[best + 1] - phis[best];
    if curvature == 0.0 {
        return Peak { phi: phis[best], height: b };
    }
    let offset = 0.5 * (a - c) / curvature;
    Peak { phi: phis[best] + offset * step, height: b - 0.125 * (c - a).powi(2) / curvature }
}

pub fn robustness(p: &PhysicalParams, s: &SymmetricSpinState, deltas: &[f64]) -> Result<Vec<RobustnessRow>> {
    robustness_with(p, s, deltas, ROBUSTNESS_GRID, Exec::default())
}

/// Oracle fringe scans over one period of φ for each dislocation energy δ.
///
/// The scan is centred on a multiple of 2π near the configured phase (at
/// least 4π, so every grid point maps to g ≥ 0); each φ is realised through
/// the gravity that produces it.
pub fn robustness_with(
    p: &PhysicalParams,
    s: &SymmetricSpinState,
    deltas: &[f64],
    grid_points: usize,
    exec: Exec,
) -> Result<Vec<RobustnessRow>> {
    if grid_points < 3 {
        return Err(Error::InvalidParam { name: "grid_points", reason: "need at least 3".into() });
    }
    if let Some(&d) = deltas.iter().find(|d| !d.is_finite()) {
        return Err(Error::InvalidParam { name: "delta_list", reason: format!("must be finite, got {d}") });
    }
    let phi_now = ledger(p)?.phi_total;
    let centre = (2.0 * PI * (phi_now / (2.0 * PI)).round()).max(4.0 * PI);
    let phis: Vec<f64> =
        (0..grid_points).map(|k| centre - PI + 2.0 * PI * k as f64 / (grid_points - 1) as f64).collect();
    let gravities = phis.iter().map(|&phi| gravity_for_phase(p, phi)).collect::<Result<Vec<_>>>()?;
    let n = s.n_particles() as f64;
    let xi = ledger(p)?.xi;

    let scan = |delta: f64| -> Result<(Peak, f64)> {
        let opt = SequenceOptions { dislocation_energy: delta, ..Default::default() };
        let ys = par::try_map(exec, &gravities, |&gravity| -> Result<f64> {
            Ok(measure(&simulate(&PhysicalParams { gravity, ..*p }, s, &opt)?).mean_global)
        })?;
        let expected = moments(s, xi + opt.xi_offset(p)?, 0.0)?.visibility;
        let sign = if expected < 0.0 { -1.0 } else { 1.0 };
        Ok((locate_peak(&phis, &ys, sign), expected))
    };

    let (reference, _) = scan(0.0)?;
    deltas
        .iter()
        .map(|&delta| {
            let (peak, expected) = scan(delta)?;
            let shift = if expected.abs() < MIN_VISIBILITY { f64::NAN } else { peak.phi - reference.phi };
            Ok(RobustnessRow { delta, shift, visibility: 2.0 * peak.height / n, expected_visibility: expected })
        })
        .collect()
}
