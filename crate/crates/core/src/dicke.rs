//! Permutation-symmetric N-atom spin states in the Dicke basis.
//!
//! `coeffs[n]` is the amplitude of the state with `n` atoms in |↑⟩ and `N − n`
//! in |↓⟩. Collective operators act as
//! `J₊|n⟩ = √((n+1)(N−n)) |n+1⟩` and `J_z|n⟩ = (n − N/2)|n⟩`, so the binomial
//! coherent spin state points along +x.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::par::{self, Exec};
use crate::{Error, Result, C64};

/// Largest particle number accepted by [`css`].
pub const DEFAULT_PARTICLE_CAP: usize = 1_000_000;

/// Tolerance on Σ|c|² − 1 for constructed states.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricSpinState {
    coeffs: Vec<C64>,
}

impl SymmetricSpinState {
    /// Wraps `coeffs` if it describes at least one particle and is normalized.
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidParam { name: "coeffs", reason: "need N >= 1 (at least two amplitudes)".into() });
        }
        let deviation = (norm_sqr(&coeffs) - 1.0).abs();
        if !(deviation <= NORM_TOL) {
            return Err(Error::Unnormalized { deviation });
        }
        Ok(SymmetricSpinState { coeffs })
    }

    /// Rescales `coeffs` to unit norm.
    pub fn normalized(mut coeffs: Vec<C64>) -> Result<Self> {
        let norm = norm_sqr(&coeffs).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParam { name: "coeffs", reason: "zero or non-finite norm".into() });
        }
        coeffs.iter_mut().for_each(|c| *c /= norm);
        Self::new(coeffs)
    }

    #[cfg(test)]
    pub(crate) fn unchecked(coeffs: Vec<C64>) -> Self {
        SymmetricSpinState { coeffs }
    }

    pub fn n_particles(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.coeffs)
    }

    /// Σₙ α(n, N−n) cₙ c*ₙ₋₁, the coherence that sets the fringe visibility.
    pub fn coherence(&self) -> C64 {
        let n_tot = self.n_particles() as u64;
        (1..=self.n_particles())
            .map(|n| alpha(n as u64, n_tot - n as u64) * self.coeffs[n] * self.coeffs[n - 1].conj())
            .sum()
    }
}

impl Serialize for SymmetricSpinState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.coeffs.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymmetricSpinState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        let coeffs = pairs.into_iter().map(|[re, im]| C64::new(re, im)).collect();
        SymmetricSpinState::new(coeffs).map_err(serde::de::Error::custom)
    }
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// α_p^q = √(p(q+1)).
pub fn alpha(p: u64, q: u64) -> f64 {
    (p as f64 * (q as f64 + 1.0)).sqrt()
}

/// ln √(n! / (j!(n−j)!)), finite for any `j ≤ n`.
pub fn ln_dcoef(n: u64, j: u64) -> f64 {
    assert!(j <= n, "dcoef({n}, {j}) needs j <= n");
    let k = j.min(n - j);
    let ln_binom: f64 = (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum();
    0.5 * ln_binom
}

/// d_n^j = √(n! / (j!(n−j)!)); overflows to +inf once the value exceeds f64.
pub fn dcoef(n: u64, j: u64) -> f64 {
    ln_dcoef(n, j).exp()
}

pub fn css(n: usize) -> Result<SymmetricSpinState> {
    css_with_cap(n, DEFAULT_PARTICLE_CAP)
}

/// Binomial coherent spin state 2^{−N/2} Σ √C(N,n) |n⟩.
pub fn css_with_cap(n: usize, cap: usize) -> Result<SymmetricSpinState> {
    if n == 0 {
        return Err(Error::InvalidParam { name: "N", reason: "need at least one particle".into() });
    }
    if n > cap {
        return Err(Error::ParticleCap { n, cap, hint: "" });
    }
    let mut ln_fact = Vec::with_capacity(n + 1);
    ln_fact.push(0.0f64);
    for k in 1..=n {
        ln_fact.push(ln_fact[k - 1] + (k as f64).ln());
    }
    let half_ln2 = 0.5 * n as f64 * std::f64::consts::LN_2;
    let coeffs: Vec<C64> = (0..=n)
        .map(|k| {
            let ln_c = 0.5 * (ln_fact[n] - (ln_fact[k] + ln_fact[n - k])) - half_ln2;
            C64::new(ln_c.exp(), 0.0)
        })
        .collect();
    SymmetricSpinState::normalized(coeffs)
}

/// Applies exp(−iμ J_z²): cₙ → cₙ e^{−iμ(n−N/2)²}.
pub fn oat_twist(s: &SymmetricSpinState, mu: f64) -> SymmetricSpinState {
    let n_tot = s.n_particles() as f64;
    let coeffs = s
        .coeffs
        .iter()
        .enumerate()
        .map(|(n, &c)| {
            let m = n as f64 - n_tot / 2.0;
            c * C64::from_polar(1.0, -mu * m * m)
        })
        .collect();
    SymmetricSpinState { coeffs }
}

/// Above this dimension [`rotate_x`] switches from dense diagonalization to a
/// Chebyshev expansion of the propagator.
const DENSE_ROTATION_MAX_DIM: usize = 257;

/// Applies the collective rotation exp(−iβ J_x).
pub fn rotate_x(s: &SymmetricSpinState, beta: f64) -> SymmetricSpinState {
    let coeffs = if s.coeffs.len() <= DENSE_ROTATION_MAX_DIM {
        rotate_x_dense(&s.coeffs, beta)
    } else {
        rotate_x_chebyshev(&s.coeffs, beta)
    };
    SymmetricSpinState { coeffs }
}

/// ⟨n+1|J_x|n⟩ for n = 0..N−1.
fn jx_offdiag(n_tot: usize) -> Vec<f64> {
    (0..n_tot).map(|n| 0.5 * (((n + 1) * (n_tot - n)) as f64).sqrt()).collect()
}

/// Exact exponential through the eigendecomposition of the tridiagonal J_x.
pub fn rotate_x_dense(c: &[C64], beta: f64) -> Vec<C64> {
    let dim = c.len();
    let off = jx_offdiag(dim - 1);
    let mut jx = DMatrix::<f64>::zeros(dim, dim);
    for (n, &v) in off.iter().enumerate() {
        jx[(n + 1, n)] = v;
        jx[(n, n + 1)] = v;
    }
    let eig = SymmetricEigen::new(jx);
    let q = &eig.eigenvectors;
    let projected: Vec<C64> = (0..dim)
        .map(|k| {
            let amp: C64 = (0..dim).map(|n| c[n] * q[(n, k)]).sum();
            amp * C64::from_polar(1.0, -beta * eig.eigenvalues[k])
        })
        .collect();
    (0..dim).map(|n| (0..dim).map(|k| projected[k] * q[(n, k)]).sum()).collect()
}

/// Bessel functions J₀(z) … J_{k_max}(z), z ≥ 0, by Miller's backward recurrence.
fn bessel_j_sequence(z: f64, k_max: usize) -> Vec<f64> {
    if z == 0.0 {
        let mut out = vec![0.0; k_max + 1];
        out[0] = 1.0;
        return out;
    }
    let mut start = k_max + 40 + (4.0 * (k_max as f64).sqrt()) as usize;
    start += start % 2;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / z * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            vals.iter_mut().skip(k - 1).for_each(|v| *v *= 1e-250);
        }
    }
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    vals.truncate(k_max + 1);
    vals.iter_mut().for_each(|v| *v /= norm);
    vals
}

/// exp(−iβJ_x) applied to `c` by a Chebyshev expansion; converges to machine
/// precision with ~|β|N/2 tridiagonal products.
pub fn rotate_x_chebyshev(c: &[C64], beta: f64) -> Vec<C64> {
    let n_tot = c.len() - 1;
    let half = n_tot as f64 / 2.0;
    let off: Vec<f64> = jx_offdiag(n_tot).into_iter().map(|v| v / half).collect();
    let apply = |v: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (n, &a) in off.iter().enumerate() {
            out[n + 1] += a * v[n];
            out[n] += a * v[n + 1];
        }
        out
    };

    let z = beta * half;
    let k_max = (z.abs() + 15.0 * z.abs().cbrt() + 40.0).ceil() as usize;
    let bessel = bessel_j_sequence(z.abs(), k_max);
    let step = if z >= 0.0 { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) };

    let mut t_prev = c.to_vec();
    let mut t_cur = apply(c);
    let mut out: Vec<C64> = c.iter().map(|&x| x * bessel[0]).collect();
    let mut phase = step;
    for k in 1..=k_max {
        let coef = phase * (2.0 * bessel[k]);
        out.iter_mut().zip(&t_cur).for_each(|(o, &t)| *o += coef * t);
        if k > z.abs() as usize && bessel[k].abs() < 1e-18 {
            break;
        }
        let next: Vec<C64> = apply(&t_cur).iter().zip(&t_prev).map(|(&a, &b)| 2.0 * a - b).collect();
        t_prev = std::mem::replace(&mut t_cur, next);
        phase *= step;
    }
    out
}

/// First and second moments of the collective spin in the y–z plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinMoments {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub var_y: f64,
    pub var_z: f64,
    /// ½⟨{J_y, J_z}⟩ − ⟨J_y⟩⟨J_z⟩.
    pub cov_yz: f64,
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn spin_moments(s: &SymmetricSpinState) -> SpinMoments {
    let c = &s.coeffs;
    let n_tot = s.n_particles();
    let dim = c.len();
    let mut raised = vec![C64::new(0.0, 0.0); dim];
    let mut lowered = vec![C64::new(0.0, 0.0); dim];
    for n in 0..n_tot {
        let a = (((n + 1) * (n_tot - n)) as f64).sqrt();
        raised[n + 1] = a * c[n];
        lowered[n] = a * c[n + 1];
    }
    let jy_c: Vec<C64> = raised.iter().zip(&lowered).map(|(r, l)| (r - l) * C64::new(0.0, -0.5)).collect();
    let jz_c: Vec<C64> = c.iter().enumerate().map(|(n, &x)| x * (n as f64 - n_tot as f64 / 2.0)).collect();

    let j_plus = inner(c, &raised);
    let jz = inner(c, &jz_c).re;
    let (jx, jy) = (j_plus.re, j_plus.im);
    SpinMoments {
        jx,
        jy,
        jz,
        var_y: norm_sqr(&jy_c) - jy * jy,
        var_z: norm_sqr(&jz_c) - jz * jz,
        cov_yz: inner(&jy_c, &jz_c).re - jy * jz,
    }
}

/// Rotation about x that moves the narrowest y–z quadrature onto J_y.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alignment {
    /// Angle for [`rotate_x`], in (−π/2, π/2].
    pub beta: f64,
    /// Var(J_y) after the rotation.
    pub var_min: f64,
    /// √N ΔJ_min / ⟨J_x⟩, infinite when the mean spin has collapsed.
    pub chi: f64,
}

pub fn align_squeezing(s: &SymmetricSpinState) -> Alignment {
    let m = spin_moments(s);
    // Var_β(J_y) = cos²β Vy + sin²β Vz − sin2β Cyz
    let beta = 0.5 * m.cov_yz.atan2(0.5 * (m.var_z - m.var_y));
    let half_sum = 0.5 * (m.var_y + m.var_z);
    let radius = (0.25 * (m.var_y - m.var_z).powi(2) + m.cov_yz * m.cov_yz).sqrt();
    let det = m.var_y * m.var_z - m.cov_yz * m.cov_yz;
    let var_min = det / (half_sum + radius);
    let n_tot = s.n_particles() as f64;
    let chi = if var_min > 0.0 && m.jx > 1e-9 * n_tot / 2.0 {
        (n_tot * var_min).sqrt() / m.jx
    } else {
        f64::INFINITY
    };
    let beta = if beta <= -FRAC_PI_2 { beta + std::f64::consts::PI } else { beta };
    Alignment { beta, var_min, chi }
}

/// Closed-form optimally aligned squeezing parameter of exp(−iμJ_z²) acting on
/// the x-polarized coherent state, valid for any N ≥ 2.
pub fn oat_chi_closed_form(n: usize, mu: f64) -> f64 {
    let nf = n as f64;
    let a = 1.0 - (2.0 * mu).cos().powf(nf - 2.0);
    let b = 4.0 * mu.sin() * mu.cos().powf(nf - 2.0);
    let radius = (a * a + b * b).sqrt();
    // a − √(a²+b²) = −b²/(a + √(a²+b²)) avoids cancellation
    let a_minus = if a + radius > 0.0 { -b * b / (a + radius) } else { 0.0 };
    let var_min = nf / 4.0 * (1.0 + (nf - 1.0) / 4.0 * a_minus);
    let jx = nf / 2.0 * mu.cos().powf(nf - 1.0);
    if var_min > 0.0 && jx > 1e-9 * nf / 2.0 {
        (nf * var_min).sqrt() / jx
    } else {
        f64::INFINITY
    }
}

/// Squeezing parameter of the aligned, twisted coherent state, computed on the
/// (N+1)-dimensional state vector.
pub fn oat_chi_exact(n: usize, mu: f64) -> Result<f64> {
    Ok(align_squeezing(&oat_twist(&css(n)?, mu)).chi)
}

/// Particle numbers above this use [`oat_chi_closed_form`] inside the optimizer.
pub const CLOSED_FORM_ABOVE: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OatOptimum {
    pub mu: f64,
    pub beta: f64,
    pub chi: f64,
}

const MU_GRID_POINTS: usize = 1200;
const MU_GRID_MIN: f64 = 1e-7;

fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol * (1.0 + lo.abs()) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

pub fn optimal_oat(n: usize) -> Result<OatOptimum> {
    optimal_oat_with(n, Exec::default())
}

/// Twisting strength and alignment that minimize χ at the φ = π/2, ξ = 0
/// operating point. Log-spaced grid over μ ∈ [10⁻⁷, π/2], then golden-section
/// refinement between the neighbours of the best grid point. The smallest μ
/// wins ties.
pub fn optimal_oat_with(n: usize, exec: Exec) -> Result<OatOptimum> {
    if n < 2 {
        return Err(Error::InvalidParam { name: "N", reason: "one-axis twisting needs N >= 2".into() });
    }
    let base = css(n)?;
    let objective = |mu: f64| -> f64 {
        if n > CLOSED_FORM_ABOVE {
            oat_chi_closed_form(n, mu)
        } else {
            align_squeezing(&oat_twist(&base, mu)).chi
        }
    };

    let ln_lo = MU_GRID_MIN.ln();
    let ln_hi = FRAC_PI_2.ln();
    let grid: Vec<f64> = (0..MU_GRID_POINTS)
        .map(|k| (ln_lo + (ln_hi - ln_lo) * k as f64 / (MU_GRID_POINTS - 1) as f64).exp())
        .collect();
    let values = par::map(exec, &grid, |&mu| objective(mu));

    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = k;
        }
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (refined_mu, refined_chi) = golden_section(objective, lo, hi, 1e-12);
    let mu = if values[best] <= refined_chi { grid[best] } else { refined_mu };

    // reported χ and β always come from the state vector
    let aligned = align_squeezing(&oat_twist(&base, mu));
    Ok(OatOptimum { mu, beta: aligned.beta, chi: aligned.chi })
}

/// rotate_x(oat_twist(css(N), μ), β).
pub fn oat_state(n: usize, mu: f64, beta: f64) -> Result<SymmetricSpinState> {
    Ok(rotate_x(&oat_twist(&css(n)?, mu), beta))
}
