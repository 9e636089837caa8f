//! Phase bookkeeping for the shift → π/2 → hold → π/2 → shift → π/2 sequence.
//!
//! Arrows follow the interferometer's two arms: `left` is the |←⟩ arm that
//! sits at +L after the first beam splitter, `right` the |→⟩ arm at −L.
//! Phases are kept unwrapped; the ⁸⁷Rb total phase is ~5×10⁵ rad.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::params::{derive, DerivedParams, PhysicalParams};
use crate::{Result, HBAR};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Leg {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseLedger {
    pub phi1_up: f64,
    pub phi1_dn: f64,
    pub phi2_left: f64,
    pub phi2_right: f64,
    pub phi3_left: f64,
    pub phi3_right: f64,
    pub phi4_up: f64,
    pub phi4_dn: f64,
    pub phi5_up: f64,
    pub phi5_dn: f64,
    pub theta1_r: f64,
    pub theta1_l: f64,
    pub theta2_r: f64,
    pub theta2_l: f64,
    pub theta3_dn: f64,
    pub theta3_up: f64,
    pub theta4_dn: f64,
    pub theta4_up: f64,
    /// Half the spin-precession phase collected during the hold.
    pub xi: f64,
    /// Extra phase of the two outer (±2L) paths.
    pub eta: f64,
    pub phi_total: f64,
}

/// F·L·d, the energy step between the two arms, J.
fn arm_energy(p: &PhysicalParams, d: &DerivedParams) -> f64 {
    d.force * f64::from(p.shift_sites) * d.lattice_const
}

/// Phases `(up, dn)` collected while the lattices are shifted by L sites.
///
/// On the first leg spin-up climbs from 0 to −L and spin-down descends to +L;
/// on the second leg the arms return to site 0, so the gravity term flips.
pub fn shift_phases(p: &PhysicalParams, d: &DerivedParams, leg: Leg) -> (f64, f64) {
    let half_spin = HBAR * p.transition_freq / 2.0;
    let half_grav = match leg {
        Leg::First => arm_energy(p, d) / 2.0,
        Leg::Second => -arm_energy(p, d) / 2.0,
    };
    let up = -(p.eps_up + half_spin + half_grav) * d.shift_time / HBAR;
    let dn = -(p.eps_dn - half_spin - half_grav) * d.shift_time / HBAR;
    (up, dn)
}

/// Gravitational phases during a π/2 pulse.
///
/// First pulse returns `(φ₂,←, φ₂,→)`; second returns `(φ₄,↑, φ₄,↓)`, where
/// φ₄,↓ carries the −π picked up by the lower arm.
pub fn pulse_phases(p: &PhysicalParams, d: &DerivedParams, which: Leg) -> (f64, f64) {
    let a = arm_energy(p, d) * p.pulse_time / HBAR;
    match which {
        Leg::First => (a, -a),
        Leg::Second => (a, -a - PI),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoldPhases {
    pub left: f64,
    pub right: f64,
    pub xi: f64,
}

pub fn hold_phases(p: &PhysicalParams, d: &DerivedParams) -> HoldPhases {
    let left = arm_energy(p, d) * p.hold_time / HBAR;
    let xi = (p.eps_up - p.eps_dn + HBAR * p.transition_freq) * p.hold_time / (2.0 * HBAR);
    HoldPhases { left, right: -left, xi }
}

pub fn ledger(p: &PhysicalParams) -> Result<PhaseLedger> {
    let d = derive(p)?;
    let (phi1_up, phi1_dn) = shift_phases(p, &d, Leg::First);
    let (phi2_left, phi2_right) = pulse_phases(p, &d, Leg::First);
    let hold = hold_phases(p, &d);
    let (phi4_up, phi4_dn) = pulse_phases(p, &d, Leg::Second);
    let (phi5_up, phi5_dn) = shift_phases(p, &d, Leg::Second);

    let theta1_r = phi1_up + phi2_right;
    let theta1_l = phi1_dn + phi2_left;
    let theta2_r = theta1_r + hold.right;
    let theta2_l = theta1_l + hold.left;
    let theta3_dn = theta2_r + phi4_dn;
    let theta3_up = theta2_l + phi4_up;
    let theta4_dn = theta3_dn + phi5_dn;
    let theta4_up = theta3_up + phi5_up;

    let eta = -(p.eps_up - p.eps_dn + HBAR * p.transition_freq + arm_energy(p, &d)) * d.shift_time / HBAR;

    Ok(PhaseLedger {
        phi1_up,
        phi1_dn,
        phi2_left,
        phi2_right,
        phi3_left: hold.left,
        phi3_right: hold.right,
        phi4_up,
        phi4_dn,
        phi5_up,
        phi5_dn,
        theta1_r,
        theta1_l,
        theta2_r,
        theta2_l,
        theta3_dn,
        theta3_up,
        theta4_dn,
        theta4_up,
        xi: hold.xi,
        eta,
        phi_total: theta4_up - theta4_dn,
    })
}

/// θ₄,↑ − θ₄,↓ from the chained ledger.
pub fn total_phase(p: &PhysicalParams) -> Result<f64> {
    Ok(ledger(p)?.phi_total)
}

/// 2MgLd(T_s + T_h + 2T_{π/2})/ħ + π, evaluated directly.
pub fn closed_form_total_phase(p: &PhysicalParams) -> Result<f64> {
    let d = derive(p)?;
    Ok(2.0 * p.atom_mass * p.gravity * f64::from(p.shift_sites) * d.lattice_const * d.total_time / HBAR + PI)
}

/// ∂φ/∂g, rad per m/s².
pub fn phase_per_gravity(p: &PhysicalParams) -> Result<f64> {
    let d = derive(p)?;
    Ok(2.0 * p.atom_mass * f64::from(p.shift_sites) * d.lattice_const * d.total_time / HBAR)
}

/// Gravity that makes the closed-form total phase equal `phi`.
pub fn gravity_for_phase(p: &PhysicalParams, phi: f64) -> Result<f64> {
    Ok((phi - PI) / phase_per_gravity(p)?)
}
