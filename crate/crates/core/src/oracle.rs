//! Brute-force bosonic simulation of the full sequence.
//!
//! Ten modes: five sites `l ∈ {−2, −1, 0, +1, +2}` (in units of L) times two
//! spins. A state is a vector over every occupation pattern with total N,
//! enumerated in ascending lexicographic order. Each stage is a
//! single-particle unitary; [`simulate`] lifts it to the Fock space, while
//! [`first_quantized_moments`] multiplies the 10×10 matrices and contracts one-
//! and two-body correlations of the initial state instead.
//!
//! Pulses use the single-particle map `a†↑ → (a†↑ − a†↓)/√2`,
//! `a†↓ → (a†↑ + a†↓)/√2` on every site, in the frame rotating with the
//! spin splitting.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, visibility_from, MeasurementMoments};
use crate::dicke::{css, oat_twist, rotate_x, SymmetricSpinState};
use crate::par::{self, Exec};
use crate::params::{derive, PhysicalParams};
use crate::phasebook::{ledger, phase_per_gravity};
use crate::{Error, Result, C64, HBAR};

pub const SITES: usize = 5;
pub const MODES: usize = 2 * SITES;
/// Largest N accepted by [`embed`]; the basis then has C(17, 9) = 24310 states.
pub const ORACLE_CAP: usize = 8;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Dn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    /// Site in units of L, −2..=2.
    pub site: i32,
    pub spin: Spin,
}

impl ModeIndex {
    pub fn new(site: i32, spin: Spin) -> Option<Self> {
        (-2..=2).contains(&site).then_some(ModeIndex { site, spin })
    }

    pub fn index(self) -> usize {
        (self.site + 2) as usize * 2 + matches!(self.spin, Spin::Dn) as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < MODES);
        ModeIndex { site: (i / 2) as i32 - 2, spin: if i.is_multiple_of(2) { Spin::Up } else { Spin::Dn } }
    }

    pub fn all() -> [ModeIndex; MODES] {
        std::array::from_fn(ModeIndex::from_index)
    }
}

const UP0: usize = 4;
const DN0: usize = 5;

pub type Occupation = [u8; MODES];

/// Every occupation pattern of N bosons in ten modes.
#[derive(Debug)]
pub struct FockBasis {
    n_particles: usize,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

impl FockBasis {
    fn build(n: usize) -> Self {
        let mut states = Vec::new();
        let mut occ = [0u8; MODES];
        fn fill(mode: usize, left: usize, occ: &mut Occupation, out: &mut Vec<Occupation>) {
            if mode == MODES - 1 {
                occ[mode] = left as u8;
                out.push(*occ);
                return;
            }
            for k in 0..=left {
                occ[mode] = k as u8;
                fill(mode + 1, left - k, occ, out);
            }
        }
        fill(0, n, &mut occ, &mut states);
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        FockBasis { n_particles: n, states, index }
    }

    /// Shared basis for N ≤ [`ORACLE_CAP`].
    pub fn shared(n: usize) -> Result<Arc<FockBasis>> {
        static CACHE: [OnceLock<Arc<FockBasis>>; ORACLE_CAP + 1] = [const { OnceLock::new() }; ORACLE_CAP + 1];
        if n > ORACLE_CAP {
            return Err(Error::ParticleCap { n, cap: ORACLE_CAP, hint: "; the oracle needs N <= 8" });
        }
        Ok(CACHE[n].get_or_init(|| Arc::new(FockBasis::build(n))).clone())
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn position(&self, occ: &Occupation) -> Option<usize> {
        self.index.get(occ).copied()
    }
}

#[derive(Clone, Debug)]
pub struct FockState {
    basis: Arc<FockBasis>,
    amps: Vec<C64>,
    /// Relative phase of the two arms meeting at site 0, tracked from the
    /// single-particle propagator before the last pulse.
    arm_phase: Option<f64>,
}

impl FockState {
    pub fn new(basis: Arc<FockBasis>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::InvalidParam {
                name: "amps",
                reason: format!("expected {} amplitudes, got {}", basis.dim(), amps.len()),
            });
        }
        Ok(FockState { basis, amps, arm_phase: None })
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn n_particles(&self) -> usize {
        self.basis.n_particles
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn arm_phase(&self) -> Option<f64> {
        self.arm_phase
    }

    /// Nonzero amplitudes as `(occupation, [re, im])` for fixture dumps.
    pub fn dump(&self) -> FockDump {
        let entries = self
            .basis
            .states
            .iter()
            .zip(&self.amps)
            .filter(|(_, a)| **a != ZERO)
            .map(|(s, a)| (*s, [a.re, a.im]))
            .collect();
        FockDump { n_particles: self.n_particles(), arm_phase: self.arm_phase, entries }
    }

    /// ⟨a†_i a_j⟩.
    pub fn one_body(&self, i: usize, j: usize) -> C64 {
        let mut acc = ZERO;
        for (s, &amp) in self.basis.states.iter().zip(&self.amps) {
            if s[j] == 0 || amp == ZERO {
                continue;
            }
            let mut t = *s;
            t[j] -= 1;
            t[i] += 1;
            let k = self.basis.index[&t];
            acc += self.amps[k].conj() * amp * (f64::from(s[j]) * f64::from(t[i])).sqrt();
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockDump {
    pub n_particles: usize,
    pub arm_phase: Option<f64>,
    pub entries: Vec<(Occupation, [f64; 2])>,
}

/// Perturbations of the ideal sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SequenceOptions {
    /// Extra on-site energy during the hold, +δ for spin-up and −δ for spin-down, J.
    pub dislocation_energy: f64,
    /// Added to the hold time, s.
    pub hold_jitter: f64,
    /// Added to each π/2 pulse duration, s.
    pub pulse_jitter: f64,
}

impl SequenceOptions {
    pub fn check(&self) -> Result<()> {
        for (name, x) in [
            ("dislocation_energy", self.dislocation_energy),
            ("hold_jitter", self.hold_jitter),
            ("pulse_jitter", self.pulse_jitter),
        ] {
            if !x.is_finite() {
                return Err(Error::InvalidParam { name, reason: format!("must be finite, got {x}") });
            }
        }
        Ok(())
    }

    /// Parameters with the jitters folded into the hold and pulse durations.
    pub fn effective(&self, p: &PhysicalParams) -> Result<PhysicalParams> {
        self.check()?;
        let q = PhysicalParams {
            hold_time: p.hold_time + self.hold_jitter,
            pulse_time: p.pulse_time + self.pulse_jitter,
            ..*p
        };
        q.check_invariants()?;
        Ok(q)
    }

    /// ξ shift caused by the dislocation energy over the (jittered) hold.
    pub fn xi_offset(&self, p: &PhysicalParams) -> Result<f64> {
        Ok(self.dislocation_energy * self.effective(p)?.hold_time / HBAR)
    }
}

pub fn embed(s: &SymmetricSpinState) -> Result<FockState> {
    let n = s.n_particles();
    if n > ORACLE_CAP {
        return Err(Error::ParticleCap { n, cap: ORACLE_CAP, hint: "; use N <= 8" });
    }
    let basis = FockBasis::shared(n)?;
    let mut amps = vec![ZERO; basis.dim()];
    for (k, &c) in s.coeffs().iter().enumerate() {
        let mut occ = [0u8; MODES];
        occ[UP0] = k as u8;
        occ[DN0] = (n - k) as u8;
        amps[basis.index[&occ]] = c;
    }
    Ok(FockState { basis, amps, arm_phase: None })
}

enum Op {
    /// Mode `m` moves to `target[m]` and picks up `e^{i phase[m]}` per atom.
    Relabel { target: [Option<usize>; MODES], phase: [f64; MODES] },
    /// The π/2 mixer on every site, times `e^{i site_phase[s]}` per atom.
    Pulse { site_phase: [f64; SITES] },
}

struct Stage {
    name: &'static str,
    op: Op,
}

type Matrix = [[C64; MODES]; MODES];

/// Single-particle pulse matrix, `[to][from]` in (up, dn) order.
const PULSE: [[f64; 2]; 2] = [[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [-FRAC_1_SQRT_2, FRAC_1_SQRT_2]];

fn site_of(m: usize) -> f64 {
    (m / 2) as f64 - 2.0
}

fn is_up(m: usize) -> bool {
    m.is_multiple_of(2)
}

fn build_sequence(p: &PhysicalParams, opt: &SequenceOptions) -> Result<Vec<Stage>> {
    let p = opt.effective(p)?;
    let d = derive(&p)?;
    let step = d.force * d.lattice_const * f64::from(p.shift_sites);
    let half_spin = HBAR * p.transition_freq / 2.0;

    let shift = |name: &'static str| {
        let mut target = [None; MODES];
        let mut phase = [0.0; MODES];
        for m in 0..MODES {
            let l = site_of(m);
            let (to, energy) = if is_up(m) {
                (l - 1.0, p.eps_up + half_spin - step * (l - 0.5))
            } else {
                (l + 1.0, p.eps_dn - half_spin - step * (l + 0.5))
            };
            target[m] = ModeIndex::new(to as i32, if is_up(m) { Spin::Up } else { Spin::Dn }).map(ModeIndex::index);
            phase[m] = -energy * d.shift_time / HBAR;
        }
        Stage { name, op: Op::Relabel { target, phase } }
    };
    let pulse = |name: &'static str| {
        let site_phase = std::array::from_fn(|s| step * (s as f64 - 2.0) * p.pulse_time / HBAR);
        Stage { name, op: Op::Pulse { site_phase } }
    };
    let hold = {
        let target = std::array::from_fn(Some);
        let phase = std::array::from_fn(|m| {
            let spin_energy = if is_up(m) {
                p.eps_up + half_spin + opt.dislocation_energy
            } else {
                p.eps_dn - half_spin - opt.dislocation_energy
            };
            (step * site_of(m) - spin_energy) * p.hold_time / HBAR
        });
        Stage { name: "hold", op: Op::Relabel { target, phase } }
    };

    Ok(vec![shift("shift1"), pulse("pulse1"), hold, pulse("pulse2"), shift("shift2"), pulse("pulse3")])
}

fn stage_matrix(op: &Op) -> Matrix {
    let mut u = [[ZERO; MODES]; MODES];
    match op {
        Op::Relabel { target, phase } => {
            for m in 0..MODES {
                if let Some(t) = target[m] {
                    u[t][m] = C64::from_polar(1.0, phase[m]);
                }
            }
        }
        Op::Pulse { site_phase } => {
            for s in 0..SITES {
                let ph = C64::from_polar(1.0, site_phase[s]);
                for (a, row) in PULSE.iter().enumerate() {
                    for (b, &x) in row.iter().enumerate() {
                        u[2 * s + a][2 * s + b] = ph * x;
                    }
                }
            }
        }
    }
    u
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = [[ZERO; MODES]; MODES];
    for i in 0..MODES {
        for k in 0..MODES {
            if a[i][k] == ZERO {
                continue;
            }
            for j in 0..MODES {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn identity() -> Matrix {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { C64::new(1.0, 0.0) } else { ZERO }))
}

/// Arm phase arg U[0↑, 0↓] − arg U[0↓, 0↑] of the propagator up to the last pulse.
fn arm_phase_of(u: &Matrix) -> f64 {
    u[UP0][DN0].arg() - u[DN0][UP0].arg()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn apply_relabel(
    f: &FockState,
    target: &[Option<usize>; MODES],
    phase: &[f64; MODES],
    stage: &'static str,
) -> Result<Vec<C64>> {
    let basis = &f.basis;
    let mut out = vec![ZERO; basis.dim()];
    for (s, &amp) in basis.states.iter().zip(&f.amps) {
        if amp == ZERO {
            continue;
        }
        let mut t = [0u8; MODES];
        let mut theta = 0.0;
        for m in 0..MODES {
            if s[m] == 0 {
                continue;
            }
            let to = target[m].ok_or(Error::LeftWindow { stage })?;
            t[to] += s[m];
            theta += f64::from(s[m]) * phase[m];
        }
        out[basis.index[&t]] += amp * C64::from_polar(1.0, theta);
    }
    Ok(out)
}

fn apply_pulse_on_site(f: &FockState, site: usize, phase: f64) -> Vec<C64> {
    let basis = &f.basis;
    let (u, d) = (2 * site, 2 * site + 1);
    let (a, b) = (PULSE[0][0], PULSE[0][1]);
    let (c, e) = (PULSE[1][0], PULSE[1][1]);
    let ph = C64::from_polar(1.0, phase);
    let mut out = vec![ZERO; basis.dim()];
    let mut terms = [0.0f64; 2 * ORACLE_CAP + 1];
    for (s, &amp) in basis.states.iter().zip(&f.amps) {
        if amp == ZERO {
            continue;
        }
        let (p, q) = (s[u] as usize, s[d] as usize);
        if p + q == 0 {
            out[basis.index[s]] += amp;
            continue;
        }
        // (a u† + c d†)^p (b u† + e d†)^q |0⟩ / √(p! q!)
        terms[..=p + q].iter_mut().for_each(|t| *t = 0.0);
        for i in 0..=p {
            let left = binomial(p, i) * a.powi(i as i32) * c.powi((p - i) as i32);
            for j in 0..=q {
                terms[i + j] += left * binomial(q, j) * b.powi(j as i32) * e.powi((q - j) as i32);
            }
        }
        let norm_in = (factorial(p) * factorial(q)).sqrt();
        let weight = amp * ph.powu((p + q) as u32);
        let mut t = *s;
        for k in 0..=p + q {
            if terms[k] == 0.0 {
                continue;
            }
            t[u] = k as u8;
            t[d] = (p + q - k) as u8;
            let norm_out = (factorial(k) * factorial(p + q - k)).sqrt();
            out[basis.index[&t]] += weight * terms[k] * norm_out / norm_in;
        }
    }
    out
}

fn apply_stage(f: &FockState, stage: &Stage) -> Result<Vec<C64>> {
    match &stage.op {
        Op::Relabel { target, phase } => apply_relabel(f, target, phase, stage.name),
        Op::Pulse { site_phase } => {
            let mut g = f.clone();
            for (s, &ph) in site_phase.iter().enumerate() {
                g.amps = apply_pulse_on_site(&g, s, ph);
            }
            Ok(g.amps)
        }
    }
}

/// Norm after every stage, as `(stage, Σ|amp|²)`.
pub type NormTrace = Vec<(&'static str, f64)>;

pub fn simulate(p: &PhysicalParams, s: &SymmetricSpinState, opt: &SequenceOptions) -> Result<FockState> {
    Ok(simulate_traced(p, s, opt)?.0)
}

pub fn simulate_traced(
    p: &PhysicalParams,
    s: &SymmetricSpinState,
    opt: &SequenceOptions,
) -> Result<(FockState, NormTrace)> {
    let stages = build_sequence(p, opt)?;
    let mut f = embed(s)?;
    let mut trace = Vec::with_capacity(stages.len());
    let mut u = identity();
    let last = stages.len() - 1;
    for (k, stage) in stages.iter().enumerate() {
        if k == last {
            f.arm_phase = Some(arm_phase_of(&u));
        }
        u = matmul(&stage_matrix(&stage.op), &u);
        f.amps = apply_stage(&f, stage)?;
        if f.amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite { stage: stage.name });
        }
        trace.push((stage.name, f.norm_sqr()));
    }
    Ok((f, trace))
}

fn spin_sign(m: usize) -> f64 {
    if is_up(m) {
        0.5
    } else {
        -0.5
    }
}

/// Visibility and flag from the site-0 coherence `z = ⟨a†0↑ a0↓⟩` taken before
/// the last pulse, rotated by the tracked arm phase.
fn visibility_from_site0(z: C64, arm_phase: Option<f64>, n: usize) -> (f64, bool) {
    let w = z * C64::from_polar(1.0, arm_phase.unwrap_or(0.0));
    visibility_from(w, 1.0, n)
}

/// ⟨J_z⁽ˡ⁾⟩ for l = −2..=2.
pub fn site_means(f: &FockState) -> [f64; SITES] {
    let mut means = [0.0; SITES];
    for (s, a) in f.basis.states.iter().zip(&f.amps) {
        let w = a.norm_sqr();
        for (site, mean) in means.iter_mut().enumerate() {
            *mean += w * 0.5 * (f64::from(s[2 * site]) - f64::from(s[2 * site + 1]));
        }
    }
    means
}

pub fn measure(f: &FockState) -> MeasurementMoments {
    let n = f.n_particles();
    let site_j = |s: &Occupation, site: usize| 0.5 * (f64::from(s[2 * site]) - f64::from(s[2 * site + 1]));
    let (mut mean_g, mut mean_l, mut sec_g, mut sec_l, mut sec_m, mut sec_p) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (s, a) in f.basis.states.iter().zip(&f.amps) {
        let w = a.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let j: f64 = (0..SITES).map(|site| site_j(s, site)).sum();
        let j0 = site_j(s, 2);
        mean_g += w * j;
        sec_g += w * j * j;
        mean_l += w * j0;
        sec_l += w * j0 * j0;
        sec_m += w * site_j(s, 0).powi(2);
        sec_p += w * site_j(s, 4).powi(2);
    }
    // After the last pulse, ⟨J_z⁽⁰⁾⟩ and Im⟨b†↑ b↓⟩ are the real and imaginary
    // parts of the pre-pulse coherence ⟨a†↑ a↓⟩ at site 0.
    let z = C64::new(mean_l, f.one_body(UP0, DN0).im);
    let (visibility, nonsymmetric) = visibility_from_site0(z, f.arm_phase, n);
    MeasurementMoments {
        n_particles: n,
        mean_global: mean_g,
        mean_local: mean_l,
        second_global: sec_g,
        second_local: sec_l,
        second_outer_minus: sec_m,
        second_outer_plus: sec_p,
        var_global: sec_g - mean_g * mean_g,
        var_local: sec_l - mean_l * mean_l,
        visibility,
        nonsymmetric,
    }
}

/// Expectation of a product of site-0 ladder operators in the initial Dicke
/// state. `ops` is applied right to left; each entry is `(create, mode)` with
/// mode 0 = up, 1 = dn.
fn dicke_correlator(s: &SymmetricSpinState, ops: &[(bool, usize)]) -> C64 {
    let n = s.n_particles() as i64;
    let c = s.coeffs();
    let mut acc = ZERO;
    for (k, &amp) in c.iter().enumerate() {
        let mut occ = [k as i64, n - k as i64];
        let mut factor = 1.0;
        for &(create, mode) in ops.iter().rev() {
            if create {
                occ[mode] += 1;
                factor *= (occ[mode] as f64).sqrt();
            } else {
                factor *= (occ[mode] as f64).sqrt();
                occ[mode] -= 1;
            }
            if factor == 0.0 {
                break;
            }
        }
        if factor == 0.0 || occ[0] + occ[1] != n || occ[0] < 0 || occ[1] < 0 {
            continue;
        }
        acc += c[occ[0] as usize].conj() * amp * factor;
    }
    acc
}

/// The same moments from the 10×10 propagator and one- and two-body
/// correlations of the input state. No particle cap.
pub fn first_quantized_moments(
    p: &PhysicalParams,
    s: &SymmetricSpinState,
    opt: &SequenceOptions,
) -> Result<MeasurementMoments> {
    let stages = build_sequence(p, opt)?;
    let mut u = identity();
    let mut before_last = identity();
    for (k, stage) in stages.iter().enumerate() {
        if k == stages.len() - 1 {
            before_last = u;
        }
        u = matmul(&stage_matrix(&stage.op), &u);
    }

    let init = [UP0, DN0];
    let mut g1 = [[ZERO; 2]; 2];
    let mut g2 = [[[[ZERO; 2]; 2]; 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            g1[x][y] = dicke_correlator(s, &[(true, x), (false, y)]);
            for z in 0..2 {
                for w in 0..2 {
                    g2[x][y][z][w] = dicke_correlator(s, &[(true, x), (true, y), (false, z), (false, w)]);
                }
            }
        }
    }
    let one_body = |m: &Matrix, a: usize, b: usize| -> C64 {
        let mut acc = ZERO;
        for x in 0..2 {
            for y in 0..2 {
                acc += m[a][init[x]].conj() * m[b][init[y]] * g1[x][y];
            }
        }
        acc
    };
    // ⟨n_a n_b⟩ = ⟨a†_a a†_b a_b a_a⟩ + δ_ab ⟨n_a⟩
    let mut density = [[0.0; MODES]; MODES];
    let mut mean_n = [0.0; MODES];
    for a in 0..MODES {
        mean_n[a] = one_body(&u, a, a).re;
    }
    let total: f64 = mean_n.iter().sum();
    if (total - s.n_particles() as f64).abs() > 1e-9 * (1.0 + total.abs()) {
        return Err(Error::LeftWindow { stage: "sequence" });
    }
    for a in 0..MODES {
        for b in 0..MODES {
            let mut acc = ZERO;
            for x in 0..2 {
                for y in 0..2 {
                    let cx = u[a][init[x]].conj() * u[b][init[y]].conj();
                    if cx == ZERO {
                        continue;
                    }
                    for z in 0..2 {
                        for w in 0..2 {
                            acc += cx * u[b][init[z]] * u[a][init[w]] * g2[x][y][z][w];
                        }
                    }
                }
            }
            density[a][b] = acc.re + if a == b { mean_n[a] } else { 0.0 };
        }
    }

    let corr = |modes_a: &[usize], modes_b: &[usize]| -> f64 {
        let mut acc = 0.0;
        for &a in modes_a {
            for &b in modes_b {
                acc += spin_sign(a) * spin_sign(b) * density[a][b];
            }
        }
        acc
    };
    let all: Vec<usize> = (0..MODES).collect();
    let site = |l: usize| [2 * l, 2 * l + 1];
    let mean_g: f64 = (0..MODES).map(|m| spin_sign(m) * mean_n[m]).sum();
    let mean_l: f64 = site(2).iter().map(|&m| spin_sign(m) * mean_n[m]).sum();
    let sec_g = corr(&all, &all);
    let sec_l = corr(&site(2), &site(2));

    let z = one_body(&before_last, UP0, DN0);
    let (visibility, nonsymmetric) = visibility_from_site0(z, Some(arm_phase_of(&before_last)), s.n_particles());
    Ok(MeasurementMoments {
        n_particles: s.n_particles(),
        mean_global: mean_g,
        mean_local: mean_l,
        second_global: sec_g,
        second_local: sec_l,
        second_outer_minus: corr(&site(0), &site(0)),
        second_outer_plus: corr(&site(4), &site(4)),
        var_global: sec_g - mean_g * mean_g,
        var_local: sec_l - mean_l * mean_l,
        visibility,
        nonsymmetric,
    })
}

/// Analytic moments at the (ξ, φ) the phase ledger assigns to `p` and `opt`.
pub fn analytic_moments(
    p: &PhysicalParams,
    s: &SymmetricSpinState,
    opt: &SequenceOptions,
) -> Result<MeasurementMoments> {
    let q = opt.effective(p)?;
    let l = ledger(&q)?;
    analytic::moments(s, l.xi + opt.xi_offset(p)?, l.phi_total)
}

/// Copy of `base` whose ledger gives spin angle `xi` and total phase
/// `phi` (mod 2π, with the smallest g ≥ 0). Needs a nonzero hold time.
pub fn params_for_angles(base: &PhysicalParams, xi: f64, phi: f64) -> Result<PhysicalParams> {
    if !(base.hold_time > 0.0) {
        return Err(Error::InvalidParam { name: "hold_time", reason: "must be > 0 to set xi".into() });
    }
    let eps_up = 2.0 * HBAR * xi / base.hold_time + base.eps_dn - HBAR * base.transition_freq;
    let q = PhysicalParams { eps_up, gravity: 0.0, ..*base };
    let gravity = (phi - PI).rem_euclid(2.0 * PI) / phase_per_gravity(&q)?;
    let q = PhysicalParams { gravity, ..q };
    q.check_invariants()?;
    Ok(q)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDeviation {
    pub field: String,
    pub max_abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub n_particles: usize,
    pub draws: usize,
    /// Worst analytic-vs-Fock deviation per field.
    pub fields: Vec<FieldDeviation>,
    pub max_deviation: f64,
    /// Worst Fock-vs-first-quantized deviation over all fields.
    pub route_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// One randomized draw: input state, angles and perturbations.
#[derive(Clone, Debug)]
pub struct Draw {
    pub state: SymmetricSpinState,
    pub params: PhysicalParams,
    pub options: SequenceOptions,
}

/// Random inputs built from `base`: coherent, twisted, random symmetric and
/// random complex states, ξ and φ uniform in [−π, π), random ε↓ and ω₀, and a
/// small random dislocation.
pub fn random_draw(base: &PhysicalParams, n: usize, rng: &mut impl Rng) -> Result<Draw> {
    let state = match rng.random_range(0..4) {
        0 => css(n)?,
        1 => rotate_x(&oat_twist(&css(n)?, rng.random_range(0.0..1.0)), rng.random_range(-PI..PI)),
        kind => {
            let mut c: Vec<C64> =
                (0..=n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            if kind == 2 {
                for k in 0..=n / 2 {
                    c[n - k] = c[k];
                }
            }
            SymmetricSpinState::normalized(c)?
        }
    };
    let er = derive(base)?.recoil_energy;
    let base = PhysicalParams {
        eps_dn: rng.random_range(-0.5..0.5) * er,
        transition_freq: rng.random_range(0.0..2.0 * PI * 1e3),
        ..*base
    };
    let params = params_for_angles(&base, rng.random_range(-PI..PI), rng.random_range(-PI..PI))?;
    let options =
        SequenceOptions { dislocation_energy: rng.random_range(-0.2..0.2) * HBAR / base.hold_time, ..Default::default() };
    Ok(Draw { state, params, options })
}

/// Compares analytic moments with both oracle routes over `draws` random
/// inputs for every N in `n_list`.
pub fn equivalence_sweep(
    base: &PhysicalParams,
    n_list: &[usize],
    draws: usize,
    seed: u64,
    tolerance: f64,
    exec: Exec,
) -> Result<Vec<EquivalenceReport>> {
    if let Some(&n) = n_list.iter().find(|&&n| n > ORACLE_CAP) {
        return Err(Error::ParticleCap { n, cap: ORACLE_CAP, hint: "; use N <= 8" });
    }
    if n_list.contains(&0) {
        return Err(Error::InvalidParam { name: "N", reason: "must be >= 1".into() });
    }
    let mut jobs = Vec::new();
    for &n in n_list {
        // one stream per N, so adding an N does not shift the others
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for _ in 0..draws {
            jobs.push(random_draw(base, n, &mut rng)?);
        }
    }
    let results = par::try_map(exec, &jobs, |draw| -> Result<(f64, MeasurementMoments, MeasurementMoments)> {
        let fock = measure(&simulate(&draw.params, &draw.state, &draw.options)?);
        let routed = first_quantized_moments(&draw.params, &draw.state, &draw.options)?;
        let analytic = analytic_moments(&draw.params, &draw.state, &draw.options)?;
        Ok((fock.max_abs_diff(&routed), fock, analytic))
    })?;

    let mut reports = Vec::new();
    for (chunk, &n) in results.chunks(draws.max(1)).zip(n_list) {
        let mut fields: Vec<FieldDeviation> = MeasurementMoments::fields(&chunk[0].1)
            .iter()
            .map(|(name, _)| FieldDeviation { field: name.to_string(), max_abs: 0.0 })
            .collect();
        let mut route_deviation: f64 = 0.0;
        for (route, fock, analytic) in chunk {
            route_deviation = route_deviation.max(*route);
            for ((dev, (_, a)), (_, b)) in fields.iter_mut().zip(fock.fields()).zip(analytic.fields()) {
                dev.max_abs = dev.max_abs.max((a - b).abs());
            }
        }
        let max_deviation = fields.iter().map(|f| f.max_abs).fold(0.0, f64::max);
        reports.push(EquivalenceReport {
            n_particles: n,
            draws,
            fields,
            max_deviation,
            route_deviation,
            tolerance,
            passed: max_deviation <= tolerance && route_deviation <= tolerance,
        });
    }
    Ok(reports)
}
