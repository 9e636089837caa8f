//! Closed-form spin-population statistics of the interferometer output.
//!
//! The general expressions hold for any complex Dicke coefficients; the
//! symmetric forms (`cₙ = c_{N−n}`) and the coherent-state closed forms are
//! special cases of them. ξ and φ are free angles here; [`crate::sensitivity`]
//! ties them to the physical parameters.

use serde::{Deserialize, Serialize};

use crate::dicke::{alpha, SymmetricSpinState};
use crate::{Error, Result, C64};

/// Normalization tolerance accepted by [`moments`].
pub const MOMENTS_NORM_TOL: f64 = 1e-9;

/// Relative imaginary part above which the visibility sum counts as complex.
const REAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMoments {
    pub n_particles: usize,
    /// ⟨J_z⟩ summed over every occupied site.
    pub mean_global: f64,
    /// ⟨J_z⁽⁰⁾⟩ on the recombination site.
    pub mean_local: f64,
    pub second_global: f64,
    pub second_local: f64,
    /// ⟨(J_z⁽⁻²ᴸ⁾)²⟩
    pub second_outer_minus: f64,
    /// ⟨(J_z⁽⁺²ᴸ⁾)²⟩
    pub second_outer_plus: f64,
    pub var_global: f64,
    pub var_local: f64,
    /// Fringe prefactor in ⟨J_z⟩ = (N𝒱/2) cos φ. Signed when the coherence sum
    /// is real; its modulus otherwise.
    pub visibility: f64,
    /// The coherence sum had a significant imaginary part, so the fringe is
    /// shifted and `visibility` is a modulus.
    pub nonsymmetric: bool,
}

impl MeasurementMoments {
    /// Field-by-field values, in a fixed order, for comparisons and reports.
    pub fn fields(&self) -> [(&'static str, f64); 9] {
        [
            ("mean_global", self.mean_global),
            ("mean_local", self.mean_local),
            ("second_global", self.second_global),
            ("second_local", self.second_local),
            ("second_outer_minus", self.second_outer_minus),
            ("second_outer_plus", self.second_outer_plus),
            ("var_global", self.var_global),
            ("var_local", self.var_local),
            ("visibility", self.visibility),
        ]
    }

    /// Largest absolute difference over all numeric fields.
    pub fn max_abs_diff(&self, other: &MeasurementMoments) -> f64 {
        self.fields()
            .iter()
            .zip(other.fields())
            .map(|((_, a), (_, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Visibility from the coherence sum S = Σ α(n, N−n) cₙ c*ₙ₋₁.
pub(crate) fn visibility_from(coherence: C64, cos2_xi: f64, n: usize) -> (f64, bool) {
    let scale = 2.0 * cos2_xi / n as f64;
    if coherence.im.abs() <= REAL_TOL * coherence.norm() {
        (scale * coherence.re, false)
    } else {
        (scale * coherence.norm(), true)
    }
}

pub fn moments(s: &SymmetricSpinState, xi: f64, phi: f64) -> Result<MeasurementMoments> {
    let deviation = (s.norm_sqr() - 1.0).abs();
    if !(deviation <= MOMENTS_NORM_TOL) {
        return Err(Error::Unnormalized { deviation });
    }
    let c = s.coeffs();
    let n = s.n_particles();
    let n_u = n as u64;

    let coherence = s.coherence();
    let mut pair_coherence = C64::new(0.0, 0.0);
    for k in 2..=n {
        let k_u = k as u64;
        pair_coherence += c[k] * c[k - 2].conj() * alpha(k_u - 1, k_u - 1) * alpha(n_u - k_u + 1, n_u - k_u + 1);
    }
    let (mut up_count, mut dn_count, mut up_dn) = (0.0, 0.0, 0.0);
    for (k, amp) in c.iter().enumerate() {
        let w = amp.norm_sqr();
        up_count += w * k as f64;
        dn_count += w * (n - k) as f64;
        up_dn += w * (k * (n - k)) as f64;
    }

    let (sin_xi, cos_xi) = xi.sin_cos();
    let cos2 = cos_xi * cos_xi;
    let sin2 = sin_xi * sin_xi;
    let cos4 = cos2 * cos2;
    let fringe = C64::from_polar(1.0, -phi);

    let mean_local = cos2 * (coherence * fringe).re;
    let second_outer_minus = sin2 / 4.0 * up_count;
    let second_outer_plus = sin2 / 4.0 * dn_count;
    let second_local =
        n as f64 / 4.0 * cos2 + cos4 / 2.0 * up_dn + cos4 / 2.0 * (pair_coherence * fringe * fringe).re;
    let second_global = second_local + second_outer_minus + second_outer_plus;
    let mean_global = mean_local;
    let (visibility, nonsymmetric) = visibility_from(coherence, cos2, n);

    Ok(MeasurementMoments {
        n_particles: n,
        mean_global,
        mean_local,
        second_global,
        second_local,
        second_outer_minus,
        second_outer_plus,
        var_global: second_global - mean_global * mean_global,
        var_local: second_local - mean_local * mean_local,
        visibility,
        nonsymmetric,
    })
}

/// Coherent-spin-state closed forms.
pub fn css_moments(n: usize, xi: f64, phi: f64) -> MeasurementMoments {
    let nf = n as f64;
    let cos2 = xi.cos().powi(2);
    let sin2 = xi.sin().powi(2);
    let cos4 = cos2 * cos2;
    let cos2_phi = phi.cos().powi(2);
    let mean = nf / 2.0 * cos2 * phi.cos();
    let second_local = nf / 4.0 * cos2 - nf / 4.0 * cos4 * cos2_phi + nf * nf / 4.0 * cos4 * cos2_phi;
    let outer = nf / 8.0 * sin2;
    MeasurementMoments {
        n_particles: n,
        mean_global: mean,
        mean_local: mean,
        second_global: second_local + 2.0 * outer,
        second_local,
        second_outer_minus: outer,
        second_outer_plus: outer,
        var_global: nf / 4.0 * (1.0 - cos4 * cos2_phi),
        var_local: nf / 4.0 * cos2 * (1.0 - cos2 * cos2_phi),
        visibility: cos2,
        nonsymmetric: false,
    }
}

pub fn single_particle_moments(xi: f64, phi: f64) -> MeasurementMoments {
    css_moments(1, xi, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::{css, ln_dcoef, oat_twist};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_state(n: usize, symmetric: bool, seed: u64) -> SymmetricSpinState {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut c: Vec<C64> =
            (0..=n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        if symmetric {
            for k in 0..=n / 2 {
                c[n - k] = c[k];
            }
        }
        SymmetricSpinState::normalized(c).unwrap()
    }

    #[test]
    fn single_particle_dark_port() {
        let m = css_moments(1, 0.0, PI);
        assert!((m.mean_global + 0.5).abs() < 1e-15);
        assert!(m.var_global.abs() < 1e-15);
    }

    #[test]
    fn xi_quarter_turn_kills_the_fringe() {
        for n in [1, 5, 40] {
            let m = moments(&css(n).unwrap(), FRAC_PI_2, 0.3).unwrap();
            assert!(m.mean_global.abs() < 1e-15);
            assert!(m.visibility.abs() < 1e-15);
        }
    }

    #[test]
    fn single_particle_special_points() {
        let m = single_particle_moments(0.0, FRAC_PI_2);
        assert!(m.mean_global.abs() < 1e-16);
        assert!((m.var_global - 0.25).abs() < 1e-16);
        let m = single_particle_moments(PI, 0.0);
        assert!((m.mean_global - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_fringe() {
        let m = css_moments(17, 0.0, 0.0);
        assert_eq!(m.mean_global, 8.5);
        assert_eq!(m.var_global, 0.0);
    }

    #[test]
    fn general_matches_css_closed_form() {
        let general = moments(&css(8).unwrap(), 0.7, 2.1).unwrap();
        let closed = css_moments(8, 0.7, 2.1);
        assert!(general.max_abs_diff(&closed) < 1e-12, "{general:?}\n{closed:?}");
    }

    #[test]
    fn rejects_unnormalized() {
        let mut c = css(3).unwrap().coeffs().to_vec();
        c[0] *= 1.1;
        let bad = SymmetricSpinState::unchecked(c);
        assert!(matches!(moments(&bad, 0.0, 0.0), Err(Error::Unnormalized { .. })));
    }

    #[test]
    fn visibility_of_css_is_cos_squared() {
        for xi in [0.0, 0.3, 1.1, 2.9] {
            let m = moments(&css(12).unwrap(), xi, 0.0).unwrap();
            assert!((m.visibility - xi.cos().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn complex_coherence_is_flagged() {
        let m = moments(&random_state(5, false, 3), 0.2, 0.4).unwrap();
        assert!(m.nonsymmetric);
        let m = moments(&oat_twist(&css(6).unwrap(), 0.3), 0.2, 0.4).unwrap();
        assert!(!m.nonsymmetric);
    }

    #[test]
    fn fringe_is_pure_cosine_for_symmetric_states() {
        let s = random_state(7, true, 11);
        let v = moments(&s, 0.0, 0.0).unwrap().visibility;
        let residual = (0..100)
            .map(|k| 2.0 * PI * k as f64 / 100.0)
            .map(|phi| moments(&s, 0.0, phi).unwrap().mean_global - 7.0 * v / 2.0 * phi.cos())
            .fold(0.0f64, |m, r| m.max(r.abs()));
        assert!(residual < 1e-12);
    }

    #[test]
    fn trig_sum_rule() {
        for n in 0..=60u64 {
            for xi in [0.1, 0.77, 1.4] {
                let (s2, c2) = (f64::sin(xi).powi(2), f64::cos(xi).powi(2));
                let total: f64 = (0..=n)
                    .map(|j| (2.0 * ln_dcoef(n, j)).exp() * s2.powi(j as i32) * c2.powi((n - j) as i32))
                    .sum();
                assert!((total - 1.0).abs() < 1e-12, "n={n}: {total}");
            }
        }
    }

    #[test]
    fn coincidence_at_integer_multiples_of_pi() {
        for seed in 0..20 {
            let s = random_state(6, seed % 2 == 0, seed);
            for xi in [0.0, PI, 2.0 * PI] {
                let m = moments(&s, xi, 0.37 * seed as f64).unwrap();
                assert!((m.var_local - m.var_global).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn local_variance_never_exceeds_global(n in 1usize..=12, symmetric: bool, seed: u64,
                                               xi in -7.0f64..7.0, phi in -7.0f64..7.0) {
            let m = moments(&random_state(n, symmetric, seed), xi, phi).unwrap();
            prop_assert!(m.var_global >= -1e-12);
            prop_assert!(m.var_local >= -1e-12);
            prop_assert!(m.var_local <= m.var_global + 1e-12);
            prop_assert!(m.mean_global.abs() <= n as f64 / 2.0 + 1e-12);
        }
    }
}
