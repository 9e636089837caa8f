//! Physical configuration of the gravimeter and the quantities derived from it.
//!
//! Everything is SI with an explicit [`HBAR`]. On-site energies `eps_up`,
//! `eps_dn` and the transition frequency enter the spin-precession phase only;
//! they default to zero in config files.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{Error, Result, HBAR};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Atomic mass, kg.
    pub atom_mass: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
    /// Lattice laser wavelength, m.
    pub wavelength: f64,
    /// Spin-up lattice depth in recoil units.
    pub depth_up: f64,
    /// Spin-down lattice depth in recoil units.
    pub depth_dn: f64,
    /// Polarization-phase drive frequency ν, rad/s.
    pub drive_freq: f64,
    /// Internal transition frequency ω₀, rad/s.
    pub transition_freq: f64,
    /// Bare on-site energy of spin-up, J.
    #[serde(rename = "eps_up_J")]
    pub eps_up: f64,
    /// Bare on-site energy of spin-down, J.
    #[serde(rename = "eps_dn_J")]
    pub eps_dn: f64,
    /// Lattice sites travelled per shift leg.
    pub shift_sites: u32,
    /// Hold duration, s.
    pub hold_time: f64,
    /// Duration of one π/2 pulse, s.
    pub pulse_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// d = λ/2, m.
    pub lattice_const: f64,
    /// κ = 2π/λ, 1/m.
    pub wave_vector: f64,
    /// F = M g, N.
    pub force: f64,
    /// E_r = 2π²ħ²/(Mλ²), J.
    pub recoil_energy: f64,
    /// T_s = Lπ/ν, s.
    pub shift_time: f64,
    /// T_s + T_h + 2 T_{π/2}, s.
    pub total_time: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Warning {
    /// ħν ≥ E_r: the shift is probably too fast to stay adiabatic.
    Adiabaticity { hbar_nu_over_er: String },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::Adiabaticity { hbar_nu_over_er } => write!(
                f,
                "hbar*nu = {hbar_nu_over_er} E_r is not below the recoil energy; \
                 Landau-Zener leakage is likely"
            ),
        }
    }
}

fn positive_finite(name: &'static str, x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::InvalidParam { name, reason: format!("must be finite and > 0, got {x}") });
    }
    Ok(())
}

fn nonnegative_finite(name: &'static str, x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidParam { name, reason: format!("must be finite and >= 0, got {x}") });
    }
    Ok(())
}

fn finite(name: &'static str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::InvalidParam { name, reason: format!("must be finite, got {x}") });
    }
    Ok(())
}

pub fn recoil_energy(atom_mass: f64, wavelength: f64) -> f64 {
    2.0 * PI * PI * HBAR * HBAR / (atom_mass * wavelength * wavelength)
}

impl PhysicalParams {
    /// The ⁸⁷Rb configuration: V = 100 E_r, ħν = 0.5 E_r, L = 50,
    /// T_{π/2} = 0.01 ms, T_h = 1 s, standard gravity.
    pub fn rb87() -> Self {
        let atom_mass = 1.44e-25;
        let wavelength = 7.85e-7;
        let er = recoil_energy(atom_mass, wavelength);
        PhysicalParams {
            atom_mass,
            gravity: 9.806_65,
            wavelength,
            depth_up: 100.0,
            depth_dn: 100.0,
            drive_freq: 0.5 * er / HBAR,
            transition_freq: 0.0,
            eps_up: 0.0,
            eps_dn: 0.0,
            shift_sites: 50,
            hold_time: 1.0,
            pulse_time: 1.0e-5,
        }
    }

    /// ⁸⁷Rb constants with a one-site shift and a sub-millisecond hold, so the
    /// total phase is of order ten radians instead of 10⁵.
    pub fn rb87_scaled() -> Self {
        PhysicalParams { shift_sites: 1, hold_time: 7.5e-4, ..Self::rb87() }
    }

    pub fn check_invariants(&self) -> Result<()> {
        positive_finite("atom_mass", self.atom_mass)?;
        positive_finite("wavelength", self.wavelength)?;
        positive_finite("drive_freq", self.drive_freq)?;
        nonnegative_finite("gravity", self.gravity)?;
        nonnegative_finite("hold_time", self.hold_time)?;
        nonnegative_finite("pulse_time", self.pulse_time)?;
        finite("transition_freq", self.transition_freq)?;
        finite("eps_up", self.eps_up)?;
        finite("eps_dn", self.eps_dn)?;
        finite("depth_up", self.depth_up)?;
        finite("depth_dn", self.depth_dn)?;
        if self.shift_sites < 1 {
            return Err(Error::InvalidParam { name: "shift_sites", reason: "must be >= 1".into() });
        }
        Ok(())
    }

    /// Parses a flat JSON object. Energies may be given in joules
    /// (`eps_up_J`) or recoil units (`eps_up_Er`), never both; the drive may be
    /// given as `drive_freq` (rad/s) or `drive_energy_Er` (ħν / E_r).
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        match value {
            Value::Object(map) => Self::from_map(&map),
            _ => Err(Error::Config("parameter config must be a JSON object".into())),
        }
    }

    pub fn from_map(map: &Map<String, Value>) -> Result<Self> {
        const KNOWN: &[&str] = &[
            "atom_mass", "gravity", "wavelength", "depth_up", "depth_dn", "drive_freq",
            "drive_energy_Er", "transition_freq", "eps_up_J", "eps_up_Er", "eps_dn_J",
            "eps_dn_Er", "shift_sites", "hold_time", "pulse_time",
        ];
        if let Some(unknown) = map.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown parameter key `{unknown}`")));
        }

        let num = |key: &str| -> Result<Option<f64>> {
            match map.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(v) => v
                    .as_f64()
                    .map(Some)
                    .ok_or_else(|| Error::Config(format!("key `{key}` must be a number"))),
            }
        };
        let required = |key: &str| -> Result<f64> { num(key)?.ok_or_else(|| Error::MissingKey(key.into())) };

        let atom_mass = required("atom_mass")?;
        let wavelength = required("wavelength")?;
        positive_finite("atom_mass", atom_mass)?;
        positive_finite("wavelength", wavelength)?;
        let er = recoil_energy(atom_mass, wavelength);

        let either = |joule_key: &str, er_key: &str| -> Result<Option<f64>> {
            match (num(joule_key)?, num(er_key)?) {
                (Some(_), Some(_)) => Err(Error::Config(format!(
                    "give either `{joule_key}` or `{er_key}`, not both"
                ))),
                (Some(j), None) => Ok(Some(j)),
                (None, Some(r)) => Ok(Some(r * er)),
                (None, None) => Ok(None),
            }
        };

        let drive_freq = match (num("drive_freq")?, num("drive_energy_Er")?) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either `drive_freq` or `drive_energy_Er`, not both".into()))
            }
            (Some(nu), None) => nu,
            (None, Some(r)) => r * er / HBAR,
            (None, None) => return Err(Error::MissingKey("drive_freq".into())),
        };

        let shift_sites = match map.get("shift_sites") {
            None => return Err(Error::MissingKey("shift_sites".into())),
            Some(v) => v
                .as_u64()
                .and_then(|l| u32::try_from(l).ok())
                .ok_or_else(|| Error::Config("key `shift_sites` must be a non-negative integer".into()))?,
        };

        let p = PhysicalParams {
            atom_mass,
            gravity: required("gravity")?,
            wavelength,
            depth_up: required("depth_up")?,
            depth_dn: required("depth_dn")?,
            drive_freq,
            transition_freq: num("transition_freq")?.unwrap_or(0.0),
            eps_up: either("eps_up_J", "eps_up_Er")?.unwrap_or(0.0),
            eps_dn: either("eps_dn_J", "eps_dn_Er")?.unwrap_or(0.0),
            shift_sites,
            hold_time: required("hold_time")?,
            pulse_time: required("pulse_time")?,
        };
        p.check_invariants()?;
        Ok(p)
    }
}

pub fn derive(p: &PhysicalParams) -> Result<DerivedParams> {
    p.check_invariants()?;
    let lattice_const = p.wavelength / 2.0;
    let shift_time = f64::from(p.shift_sites) * PI / p.drive_freq;
    let d = DerivedParams {
        lattice_const,
        wave_vector: 2.0 * PI / p.wavelength,
        force: p.atom_mass * p.gravity,
        recoil_energy: recoil_energy(p.atom_mass, p.wavelength),
        shift_time,
        total_time: shift_time + p.hold_time + 2.0 * p.pulse_time,
    };
    let all_finite = [d.lattice_const, d.wave_vector, d.force, d.recoil_energy, d.shift_time, d.total_time]
        .iter()
        .all(|x| x.is_finite());
    if !all_finite || d.shift_time <= 0.0 {
        return Err(Error::InvalidParam {
            name: "drive_freq",
            reason: "derived quantities overflow or shift time is not positive".into(),
        });
    }
    Ok(d)
}

/// Fatal errors for invariant violations; a warning when ħν ≥ E_r.
pub fn validate(p: &PhysicalParams) -> Result<Vec<Warning>> {
    let d = derive(p)?;
    let ratio = HBAR * p.drive_freq / d.recoil_energy;
    let mut warnings = Vec::new();
    if ratio >= 1.0 {
        warnings.push(Warning::Adiabaticity { hbar_nu_over_er: format!("{ratio:.3}") });
    }
    Ok(warnings)
}
