//! Closed-form limit laws and the Kolmogorov–Smirnov distance.
//!
//! `σ_v` is the semicircle law of variance `v` (with `σ₀ = δ₀`). Mixing
//! `σ_v` over a variance law `ν` gives an atom at zero plus a symmetric
//! density that is non-increasing in `|x|`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mixtures::{ComponentLaw, MixtureError, MomentMap, PushForward};
use crate::spectra::EmpiricalCdf;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitsError {
    #[error("density is only defined away from x = 0")]
    DensityAtZero,
    #[error("variance must be non-negative and finite, got {0}")]
    Variance(f64),
    #[error("mixture weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("variance atom ({0}, {1}) is invalid")]
    Atom(f64, f64),
    #[error("spin de Finetti measure must live on [-1, 1]")]
    SpinSupport,
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

/// `s_v(x) = √((4v − x²)₊) / (2πv)`. For `v = 0` there is no density and
/// the function returns 0.
pub fn semicircle_pdf(v: f64, x: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let r = 4.0 * v - x * x;
    if r <= 0.0 {
        0.0
    } else {
        r.sqrt() / (2.0 * PI * v)
    }
}

/// Distribution function of `σ_v`; a unit step at 0 when `v = 0`.
pub fn semicircle_cdf(v: f64, x: f64) -> f64 {
    if v <= 0.0 {
        return if x >= 0.0 { 1.0 } else { 0.0 };
    }
    let edge = 2.0 * v.sqrt();
    if x <= -edge {
        return 0.0;
    }
    if x >= edge {
        return 1.0;
    }
    let s = (4.0 * v - x * x).max(0.0).sqrt();
    let val = (x * s / 2.0 + 2.0 * v * (x / edge).clamp(-1.0, 1.0).asin()) / (2.0 * PI * v) + 0.5;
    val.clamp(0.0, 1.0)
}

/// Catalan number `C_n = binom(2n, n)/(n + 1)`.
pub fn catalan(n: u32) -> u128 {
    // C_{i+1} = C_i · 2(2i + 1)/(i + 2)
    let mut c: u128 = 1;
    for i in 0..u128::from(n) {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c
}

/// `∫ x^k dσ_v = v^{k/2} C_{k/2}` for even `k`, 0 for odd `k`.
pub fn semicircle_moment(v: f64, k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    if k == 0 {
        return 1.0;
    }
    v.powi((k / 2) as i32) * catalan(k / 2) as f64
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const QUAD_TOL: f64 = 1e-11;

/// A limit law for the eigenvalue distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawTarget")]
pub enum TargetLaw {
    /// `σ_v`.
    Semicircle { v: f64 },
    /// `atom · δ₀ + Σ w_i σ_{v_i}` with `v_i > 0`.
    Mixture {
        #[serde(rename = "atom")]
        atom_weight: f64,
        nu: Vec<(f64, f64)>,
    },
    /// Spin case: `∫ σ_{1−t²} dμ(t)` for a measure `mu` on `[-1, 1]`.
    SpinMixture { mu: ComponentLaw },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawTarget {
    Semicircle { v: f64 },
    Mixture { atom: f64, nu: Vec<(f64, f64)> },
    SpinMixture { mu: ComponentLaw },
    SpinUniform,
}

impl TryFrom<RawTarget> for TargetLaw {
    type Error = LimitsError;

    fn try_from(raw: RawTarget) -> Result<Self, Self::Error> {
        let t = match raw {
            RawTarget::Semicircle { v } => TargetLaw::Semicircle { v },
            RawTarget::Mixture { atom, nu } => TargetLaw::Mixture { atom_weight: atom, nu },
            RawTarget::SpinMixture { mu } => TargetLaw::SpinMixture { mu },
            RawTarget::SpinUniform => TargetLaw::spin_uniform(),
        };
        t.validate()?;
        Ok(t)
    }
}

impl TargetLaw {
    pub fn semicircle(v: f64) -> Self {
        TargetLaw::Semicircle { v }
    }

    /// Uniform de Finetti measure on `[-1, 1]` in the spin case.
    pub fn spin_uniform() -> Self {
        TargetLaw::SpinMixture { mu: ComponentLaw::uniform(-1.0, 1.0) }
    }

    /// `σ_μ` from the variance push-forward `ν`.
    pub fn from_pushforward(nu: &PushForward) -> Self {
        match nu {
            PushForward::Atoms(atoms) => {
                let atom_weight = atoms.iter().filter(|a| a.0 == 0.0).map(|a| a.1).sum();
                let rest: Vec<(f64, f64)> = atoms.iter().copied().filter(|a| a.0 != 0.0 && a.1 > 0.0).collect();
                if atom_weight == 0.0 && rest.len() == 1 {
                    return TargetLaw::Semicircle { v: rest[0].0 };
                }
                if rest.is_empty() {
                    return TargetLaw::Semicircle { v: 0.0 };
                }
                TargetLaw::Mixture { atom_weight, nu: rest }
            }
            PushForward::SpinImage { base, map: MomentMap::Variance } => TargetLaw::SpinMixture { mu: base.clone() },
            PushForward::SpinImage { base, map: MomentMap::Mean } => {
                // not a variance law; treat the values as variances of a spin image is meaningless
                TargetLaw::SpinMixture { mu: base.clone() }
            }
        }
    }

    pub fn validate(&self) -> Result<(), LimitsError> {
        match self {
            TargetLaw::Semicircle { v } => {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(LimitsError::Variance(*v));
                }
            }
            TargetLaw::Mixture { atom_weight, nu } => {
                if !(0.0..=1.0).contains(atom_weight) {
                    return Err(LimitsError::WeightSum(*atom_weight));
                }
                for &(v, w) in nu {
                    if !(v.is_finite() && v > 0.0 && (0.0..=1.0).contains(&w)) {
                        return Err(LimitsError::Atom(v, w));
                    }
                }
                let total = atom_weight + nu.iter().map(|a| a.1).sum::<f64>();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(LimitsError::WeightSum(total));
                }
            }
            TargetLaw::SpinMixture { mu } => {
                mu.validate()?;
                if !mu.supported_within(-1.0, 1.0) {
                    return Err(LimitsError::SpinSupport);
                }
            }
        }
        Ok(())
    }

    /// Mass of the atom at zero.
    pub fn atom_weight(&self) -> f64 {
        match self {
            TargetLaw::Semicircle { v } => {
                if *v == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            TargetLaw::Mixture { atom_weight, .. } => *atom_weight,
            TargetLaw::SpinMixture { mu } => match mu {
                ComponentLaw::PointMasses { atoms } => atoms.iter().filter(|a| a.0.abs() == 1.0).map(|a| a.1).sum(),
                ComponentLaw::SpinLaw { .. } => 1.0,
                ComponentLaw::UniformInterval { .. } => 0.0,
            },
        }
    }

    /// Largest variance in the support of `ν`.
    pub fn max_variance(&self) -> f64 {
        match self {
            TargetLaw::Semicircle { v } => *v,
            TargetLaw::Mixture { nu, .. } => nu.iter().filter(|a| a.1 > 0.0).fold(0.0, |m: f64, a| m.max(a.0)),
            TargetLaw::SpinMixture { mu } => match mu {
                ComponentLaw::PointMasses { atoms } => {
                    atoms.iter().filter(|a| a.1 > 0.0).fold(0.0, |m: f64, a| m.max(1.0 - a.0 * a.0))
                }
                ComponentLaw::SpinLaw { .. } => 0.0,
                ComponentLaw::UniformInterval { lo, hi } => {
                    if *lo <= 0.0 && *hi >= 0.0 {
                        1.0
                    } else {
                        1.0 - lo.abs().min(hi.abs()).powi(2)
                    }
                }
            },
        }
    }

    /// Support is contained in `[-r, r]` with `r = 2√v_max`.
    pub fn support_radius(&self) -> f64 {
        2.0 * self.max_variance().sqrt()
    }

    /// Distribution function (right-continuous).
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            TargetLaw::Semicircle { v } => semicircle_cdf(*v, x),
            TargetLaw::Mixture { atom_weight, nu } => {
                let atom = if x >= 0.0 { *atom_weight } else { 0.0 };
                atom + nu.iter().map(|&(v, w)| w * semicircle_cdf(v, x)).sum::<f64>()
            }
            TargetLaw::SpinMixture { mu } => spin_mixture_cdf(mu, x),
        }
    }

    /// Left limit `G(x−)`; differs from [`Self::cdf`] only at 0.
    pub fn cdf_left(&self, x: f64) -> f64 {
        if x == 0.0 {
            self.cdf(0.0) - self.atom_weight()
        } else {
            self.cdf(x)
        }
    }

    /// Density of the absolutely continuous part, `x ≠ 0`.
    pub fn density(&self, x: f64) -> Result<f64, LimitsError> {
        if x == 0.0 {
            return Err(LimitsError::DensityAtZero);
        }
        Ok(match self {
            TargetLaw::Semicircle { v } => semicircle_pdf(*v, x),
            TargetLaw::Mixture { nu, .. } => mixture_density_atoms(nu, x),
            TargetLaw::SpinMixture { mu } => spin_mixture_density(mu, x)?,
        })
    }

    /// `∫ x^k dσ`.
    pub fn moment(&self, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match self {
            TargetLaw::Semicircle { v } => semicircle_moment(*v, k),
            TargetLaw::Mixture { nu, .. } => nu.iter().map(|&(v, w)| w * semicircle_moment(v, k)).sum(),
            TargetLaw::SpinMixture { mu } => {
                if k % 2 == 1 {
                    return 0.0;
                }
                let image = PushForward::SpinImage { base: mu.clone(), map: MomentMap::Variance };
                catalan(k / 2) as f64 * image.moment(k / 2)
            }
        }
    }
}

fn mixture_density_atoms(nu: &[(f64, f64)], x: f64) -> f64 {
    let x2 = x * x;
    nu.iter()
        .filter(|a| a.0 > x2 / 4.0)
        .map(|&(v, w)| w * (4.0 * v - x2).sqrt() / (2.0 * PI * v))
        .sum()
}

/// `ρ_μ(x) = (1/2π) ∫_{x²/4}^∞ √(4v − x²)/v dν(v)` for a discrete `ν`.
pub fn mixture_density(law: &TargetLaw, x: f64) -> Result<f64, LimitsError> {
    law.density(x)
}

/// Spin-case density for `0 < |x| ≤ 2`:
/// `(1/2π) ∫_{−a/2}^{a/2} √(a² − 4t²)/(1 − t²) dμ(t)` with `a = √(4 − x²)`.
/// Returns 0 for `|x| > 2`.
pub fn spin_mixture_density(mu: &ComponentLaw, x: f64) -> Result<f64, LimitsError> {
    if x == 0.0 {
        return Err(LimitsError::DensityAtZero);
    }
    if x.abs() >= 2.0 {
        return Ok(0.0);
    }
    let a = (4.0 - x * x).sqrt();
    let half = 0.5 * a;
    let g = |t: f64| ((a * a - 4.0 * t * t).max(0.0)).sqrt() / (1.0 - t * t);
    let value = match mu {
        ComponentLaw::PointMasses { atoms } => {
            atoms.iter().filter(|p| p.0.abs() < half).map(|&(t, w)| w * g(t)).sum::<f64>()
        }
        // atoms at ±1 only feed the atom at zero
        ComponentLaw::SpinLaw { .. } => 0.0,
        ComponentLaw::UniformInterval { lo, hi } => {
            let from = lo.max(-half);
            let to = hi.min(half);
            if from >= to {
                0.0
            } else {
                // t = (a/2) sin θ removes the square-root endpoint behaviour
                let th0 = (from / half).clamp(-1.0, 1.0).asin();
                let th1 = (to / half).clamp(-1.0, 1.0).asin();
                let f = |th: f64| {
                    let (s, c) = th.sin_cos();
                    0.5 * a * a * c * c / (1.0 - half * half * s * s)
                };
                integrate(&f, th0, th1, QUAD_TOL) / (hi - lo)
            }
        }
    };
    Ok(value / (2.0 * PI))
}

fn spin_mixture_cdf(mu: &ComponentLaw, x: f64) -> f64 {
    match mu {
        ComponentLaw::PointMasses { atoms } => {
            atoms.iter().map(|&(t, w)| w * semicircle_cdf(1.0 - t * t, x)).sum()
        }
        ComponentLaw::SpinLaw { .. } => semicircle_cdf(0.0, x),
        ComponentLaw::UniformInterval { lo, hi } => {
            if x == 0.0 {
                return 0.5;
            }
            // t ↦ F_{1−t²}(x) is constant outside |t| < √(1 − x²/4)
            let inner = (1.0 - x * x / 4.0).max(0.0).sqrt();
            let outside = if x > 0.0 { 1.0 } else { 0.0 };
            let f = |t: f64| semicircle_cdf(1.0 - t * t, x);
            let from = lo.max(-inner);
            let to = hi.min(inner);
            let mut total = 0.0;
            if from < to {
                total += integrate(&f, from, to, QUAD_TOL);
                total += outside * ((from - lo).max(0.0) + (hi - to).max(0.0));
            } else {
                total += outside * (hi - lo);
            }
            (total / (hi - lo)).clamp(0.0, 1.0)
        }
    }
}

/// `Some(a)` when `ν = δ_a`, decided by `∫v² dν = (∫v dν)²` within a
/// relative tolerance of `1e-12`.
pub fn is_semicircle(nu: &PushForward) -> Option<f64> {
    let m1 = nu.moment(1);
    let m2 = nu.moment(2);
    let scale = m2.abs().max(m1 * m1).max(f64::MIN_POSITIVE);
    ((m2 - m1 * m1).abs() <= 1e-12 * scale || (m1 == 0.0 && m2 == 0.0)).then_some(m1)
}

/// `sup_x |F_n(x) − G(x)|`, evaluating both one-sided limits at every
/// eigenvalue and at the atom of the target.
pub fn ks_distance(esd: &EmpiricalCdf, target: &TargetLaw) -> f64 {
    let pts = esd.points();
    let n = pts.len();
    if n == 0 {
        return 1.0;
    }
    let nf = n as f64;
    let mut worst = 0.0_f64;
    let mut i = 0;
    while i < n {
        let x = pts[i];
        let mut j = i;
        while j < n && pts[j] == x {
            j += 1;
        }
        let below = i as f64 / nf;
        let at = j as f64 / nf;
        worst = worst.max((below - target.cdf_left(x)).abs()).max((at - target.cdf(x)).abs());
        i = j;
    }
    if target.atom_weight() > 0.0 {
        worst = worst.max((esd.eval(0.0) - target.cdf(0.0)).abs()).max((esd.eval_left(0.0) - target.cdf_left(0.0)).abs());
    }
    worst.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixtures::pushforward_nu;
    use crate::mixtures::DeFinettiMixture;

    fn uniform_closed_form(x: f64) -> f64 {
        0.25 * (2.0 - x.abs()).max(0.0)
    }

    #[test]
    fn semicircle_values() {
        assert!((semicircle_pdf(1.0, 0.0) - 1.0 / PI).abs() < 1e-15);
        assert_eq!(semicircle_pdf(1.0, 2.0), 0.0);
        assert_eq!(semicircle_pdf(1.0, -2.0), 0.0);
        assert_eq!(semicircle_cdf(1.0, -2.0), 0.0);
        assert_eq!(semicircle_cdf(1.0, 2.0), 1.0);
        assert!((semicircle_cdf(1.0, 0.0) - 0.5).abs() < 1e-15);
        assert!((semicircle_pdf(0.25, 0.0) - 2.0 / PI).abs() < 1e-15);
        assert_eq!(semicircle_cdf(0.0, -1e-300), 0.0);
        assert_eq!(semicircle_cdf(0.0, 0.0), 1.0);
        for v in [0.3, 1.0, 4.0] {
            let e = 2.0 * f64::sqrt(v);
            assert_eq!(semicircle_cdf(v, e), 1.0);
            assert_eq!(semicircle_cdf(v, -e), 0.0);
        }
    }

    #[test]
    fn semicircle_cdf_is_antiderivative() {
        for v in [0.36, 1.0, 2.5] {
            let e = 2.0 * f64::sqrt(v);
            for &x in &[-0.9 * e, -0.2, 0.1, 0.7 * e] {
                let num = integrate(&|y| semicircle_pdf(v, y), -e, x, 1e-12);
                assert!((num - semicircle_cdf(v, x)).abs() < 1e-8, "v={v} x={x}");
            }
        }
    }

    #[test]
    fn catalan_moments() {
        assert_eq!((0..6).map(catalan).collect::<Vec<_>>(), vec![1, 1, 2, 5, 14, 42]);
        assert_eq!(semicircle_moment(1.0, 2), 1.0);
        assert_eq!(semicircle_moment(1.0, 4), 2.0);
        assert_eq!(semicircle_moment(1.0, 6), 5.0);
        assert_eq!(semicircle_moment(1.0, 8), 14.0);
        assert_eq!(semicircle_moment(4.0, 2), 4.0);
        assert_eq!(semicircle_moment(1.0, 3), 0.0);
        // against quadrature of the density
        let q = integrate(&|x| x.powi(6) * semicircle_pdf(2.0, x), -2.0 * 2f64.sqrt(), 2.0 * 2f64.sqrt(), 1e-12);
        assert!((q - semicircle_moment(2.0, 6)).abs() < 1e-7);
    }

    #[test]
    fn mixture_density_examples() {
        let one = TargetLaw::Mixture { atom_weight: 0.0, nu: vec![(1.0, 1.0)] };
        for x in [-1.9, -0.5, 0.3, 1.2] {
            assert!((mixture_density(&one, x).unwrap() - semicircle_pdf(1.0, x)).abs() < 1e-15);
        }
        assert_eq!(mixture_density(&one, 2.5).unwrap(), 0.0);
        let two = TargetLaw::Mixture { atom_weight: 0.0, nu: vec![(1.0, 0.5), (4.0, 0.5)] };
        let expected = 7f64.sqrt() / (16.0 * PI);
        assert!((mixture_density(&two, 3.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.05263).abs() < 1e-5);
        assert_eq!(mixture_density(&two, 0.0), Err(LimitsError::DensityAtZero));
    }

    #[test]
    fn spin_density_examples() {
        for x in [0.01, 0.5, -1.3, 2.0] {
            let d = spin_mixture_density(&ComponentLaw::point_mass(0.0), x).unwrap();
            assert!((d - semicircle_pdf(1.0, x)).abs() < 1e-12);
        }
        let uni = ComponentLaw::uniform(-1.0, 1.0);
        assert!((spin_mixture_density(&uni, 1.0).unwrap() - 0.25).abs() < 1e-8);
        assert!((spin_mixture_density(&uni, 0.001).unwrap() - 0.5).abs() < 1e-3);
        for x in [-1.9, -0.7, 0.2, 1.5] {
            assert!((spin_mixture_density(&uni, x).unwrap() - uniform_closed_form(x)).abs() < 1e-8, "{x}");
        }
        assert_eq!(spin_mixture_density(&uni, 2.5).unwrap(), 0.0);
        assert_eq!(spin_mixture_density(&uni, 0.0), Err(LimitsError::DensityAtZero));
    }

    #[test]
    fn spin_point_masses_match_scaled_semicircle() {
        for t in [0.0, 0.5, -0.5, 0.9, -0.9] {
            let mu = ComponentLaw::point_mass(t);
            for i in 1..40 {
                let x = -2.0 + i as f64 * 0.1;
                if x.abs() < 1e-9 {
                    continue;
                }
                let d = spin_mixture_density(&mu, x).unwrap();
                assert!((d - semicircle_pdf(1.0 - t * t, x)).abs() < 1e-10, "t={t} x={x}");
            }
        }
    }

    #[test]
    fn spin_uniform_cdf_matches_closed_form() {
        let law = TargetLaw::spin_uniform();
        let closed = |x: f64| {
            let y = x.clamp(-2.0, 2.0);
            // ∫_{-2}^{y} (2 − |s|)/4 ds
            if y <= 0.0 {
                (2.0 + y).powi(2) / 8.0
            } else {
                1.0 - (2.0 - y).powi(2) / 8.0
            }
        };
        for x in [-2.5, -1.7, -0.4, -1e-6, 0.0, 0.3, 1.1, 1.99, 3.0] {
            assert!((law.cdf(x) - closed(x)).abs() < 1e-8, "{x}: {} vs {}", law.cdf(x), closed(x));
        }
        assert_eq!(law.atom_weight(), 0.0);
        assert_eq!(law.support_radius(), 2.0);
        // second moment: C₁ · E(1 − t²) = 2/3 = ∫ x² (2 − |x|)/4
        assert!((law.moment(2) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn density_integrates_to_continuous_mass() {
        let laws = [
            TargetLaw::Mixture { atom_weight: 0.0, nu: vec![(1.0, 0.5), (4.0, 0.5)] },
            TargetLaw::Mixture { atom_weight: 0.25, nu: vec![(0.36, 0.25), (1.0, 0.5)] },
            TargetLaw::semicircle(2.0),
            TargetLaw::spin_uniform(),
            TargetLaw::SpinMixture { mu: ComponentLaw::PointMasses { atoms: vec![(1.0, 0.3), (0.5, 0.7)] } },
        ];
        for law in laws {
            let r = law.support_radius();
            let pts = 10_000;
            let h = 2.0 * r / (pts - 1) as f64;
            let ys: Vec<f64> = (0..pts).map(|i| law.density(-r + i as f64 * h).unwrap()).collect();
            let integral = h * (ys.iter().sum::<f64>() - 0.5 * (ys[0] + ys[pts - 1]));
            assert!((integral - (1.0 - law.atom_weight())).abs() < 1e-4, "{law:?}: {integral}");
        }
    }

    #[test]
    fn mixture_density_even_and_monotone() {
        let law = TargetLaw::Mixture { atom_weight: 0.1, nu: vec![(0.5, 0.3), (1.0, 0.2), (3.0, 0.4)] };
        let mut prev = f64::INFINITY;
        for i in 1..400 {
            let x = i as f64 * 0.01;
            let d = law.density(x).unwrap();
            assert_eq!(d, law.density(-x).unwrap());
            assert!(d <= prev);
            prev = d;
        }
    }

    #[test]
    fn semicircle_characterisation() {
        assert_eq!(is_semicircle(&PushForward::Atoms(vec![(2.5, 1.0)])), Some(2.5));
        assert_eq!(is_semicircle(&PushForward::Atoms(vec![(1.0, 0.5), (4.0, 0.5)])), None);
        assert_eq!(is_semicircle(&PushForward::Atoms(vec![(0.0, 1.0)])), Some(0.0));
        let nu = pushforward_nu(&DeFinettiMixture::spin_atoms(&[(0.5, 0.8), (0.5, -0.8)]).unwrap()).nu;
        assert!((is_semicircle(&nu).unwrap() - 0.36).abs() < 1e-15);
        let uni = pushforward_nu(&DeFinettiMixture::spin_continuous(ComponentLaw::uniform(-1.0, 1.0)).unwrap()).nu;
        assert_eq!(is_semicircle(&uni), None);
    }

    #[test]
    fn ks_special_cases() {
        let zeros = EmpiricalCdf::from_points(vec![0.0; 10]);
        assert_eq!(ks_distance(&zeros, &TargetLaw::semicircle(0.0)), 0.0);
        assert!((ks_distance(&zeros, &TargetLaw::semicircle(1.0)) - 0.5).abs() < 1e-12);

        // quantile construction for σ₁: points at (i − ½)/n quantiles
        let n = 500;
        let law = TargetLaw::semicircle(1.0);
        let quantile = |p: f64| {
            let (mut lo, mut hi) = (-2.0, 2.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if law.cdf(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let pts: Vec<f64> = (0..n).map(|i| quantile((i as f64 + 0.5) / n as f64)).collect();
        let d = ks_distance(&EmpiricalCdf::from_points(pts), &law);
        assert!(d <= 1.0 / n as f64, "{d}");
    }

    #[test]
    fn target_json_descriptors() {
        let t: TargetLaw = serde_json::from_str(r#"{"kind":"semicircle","v":1.0}"#).unwrap();
        assert_eq!(t, TargetLaw::semicircle(1.0));
        let t: TargetLaw = serde_json::from_str(r#"{"kind":"mixture","atom":0.0,"nu":[[1.0,0.5],[4.0,0.5]]}"#).unwrap();
        assert_eq!(t, TargetLaw::Mixture { atom_weight: 0.0, nu: vec![(1.0, 0.5), (4.0, 0.5)] });
        let t: TargetLaw = serde_json::from_str(r#"{"kind":"spin_uniform"}"#).unwrap();
        assert_eq!(t, TargetLaw::spin_uniform());
        assert!(serde_json::from_str::<TargetLaw>(r#"{"kind":"mixture","atom":0.2,"nu":[[1.0,0.5]]}"#).is_err());
        let back: TargetLaw = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn pushforward_to_target() {
        let nu = pushforward_nu(&DeFinettiMixture::spin_atoms(&[(0.25, 1.0), (0.75, 0.0)]).unwrap()).nu;
        let t = TargetLaw::from_pushforward(&nu);
        assert_eq!(t, TargetLaw::Mixture { atom_weight: 0.25, nu: vec![(1.0, 0.75)] });
        assert_eq!(t.cdf_left(0.0), 0.375);
        assert_eq!(t.cdf(0.0), 0.625);
    }
}
