//! Exchangeable sequences through their de Finetti mixture representation.
//!
//! A [`DeFinettiMixture`] is a probability measure over component laws.
//! Sampling first draws a component (the *tau tag*), then draws i.i.d.
//! values from that component. Component laws are restricted to bounded
//! support so every moment is finite.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixtureError {
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("weight {0} outside [0, 1]")]
    WeightRange(f64),
    #[error("non-finite atom value {0}")]
    NonFiniteValue(f64),
    #[error("point-mass law has no atoms")]
    NoAtoms,
    #[error("uniform interval needs lo < hi, got [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("spin parameter {0} outside [-1, 1]")]
    SpinRange(f64),
    #[error("mixture has no components")]
    NoComponents,
    #[error("de Finetti measure for the spin case must live on [-1, 1]")]
    SpinSupport,
    #[error("empirical statistics of an empty sequence")]
    EmptySequence,
    #[error("empirical variance {0} is negative beyond rounding")]
    NegativeVariance(f64),
    #[error("tau tag {0} does not match the mixture")]
    TagMismatch(TauTag),
    #[error("cannot parse tau tag {0:?}")]
    BadTag(String),
}

/// A bounded-support law `Λ_τ` for the entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawLaw")]
pub enum ComponentLaw {
    /// Finitely many atoms `(value, weight)`.
    PointMasses { atoms: Vec<(f64, f64)> },
    /// Uniform law on `[lo, hi]`.
    #[serde(rename = "uniform")]
    UniformInterval { lo: f64, hi: f64 },
    /// `P(+1) = (1 + t)/2`, `P(−1) = (1 − t)/2`.
    #[serde(rename = "spin")]
    SpinLaw { t: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawLaw {
    PointMasses { atoms: Vec<(f64, f64)> },
    Uniform { lo: f64, hi: f64 },
    Spin { t: f64 },
    Rademacher,
}

impl TryFrom<RawLaw> for ComponentLaw {
    type Error = MixtureError;

    fn try_from(raw: RawLaw) -> Result<Self, Self::Error> {
        let law = match raw {
            RawLaw::PointMasses { atoms } => ComponentLaw::PointMasses { atoms },
            RawLaw::Uniform { lo, hi } => ComponentLaw::UniformInterval { lo, hi },
            RawLaw::Spin { t } => ComponentLaw::SpinLaw { t },
            RawLaw::Rademacher => ComponentLaw::rademacher(),
        };
        law.validate()?;
        Ok(law)
    }
}

fn check_weights(weights: impl Iterator<Item = f64>) -> Result<(), MixtureError> {
    let mut total = 0.0;
    for w in weights {
        if !(0.0..=1.0).contains(&w) {
            return Err(MixtureError::WeightRange(w));
        }
        total += w;
    }
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(MixtureError::WeightSum(total));
    }
    Ok(())
}

impl ComponentLaw {
    pub fn point_mass(value: f64) -> Self {
        ComponentLaw::PointMasses { atoms: vec![(value, 1.0)] }
    }

    /// Symmetric ±1 law.
    pub fn rademacher() -> Self {
        ComponentLaw::PointMasses { atoms: vec![(-1.0, 0.5), (1.0, 0.5)] }
    }

    pub fn spin(t: f64) -> Self {
        ComponentLaw::SpinLaw { t }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        ComponentLaw::UniformInterval { lo, hi }
    }

    pub fn validate(&self) -> Result<(), MixtureError> {
        match self {
            ComponentLaw::PointMasses { atoms } => {
                if atoms.is_empty() {
                    return Err(MixtureError::NoAtoms);
                }
                if let Some(&(v, _)) = atoms.iter().find(|(v, _)| !v.is_finite()) {
                    return Err(MixtureError::NonFiniteValue(v));
                }
                check_weights(atoms.iter().map(|a| a.1))
            }
            ComponentLaw::UniformInterval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(MixtureError::EmptyInterval { lo: *lo, hi: *hi });
                }
                Ok(())
            }
            ComponentLaw::SpinLaw { t } => {
                if !(-1.0..=1.0).contains(t) {
                    return Err(MixtureError::SpinRange(*t));
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ComponentLaw::PointMasses { atoms } => {
                if atoms.len() == 1 {
                    return atoms[0].0;
                }
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for &(v, w) in atoms {
                    acc += w;
                    if u < acc && w > 0.0 {
                        return v;
                    }
                }
                // u landed in the rounding gap above the cumulative sum
                atoms.iter().rev().find(|a| a.1 > 0.0).map_or(atoms[0].0, |a| a.0)
            }
            ComponentLaw::UniformInterval { lo, hi } => rng.gen_range(*lo..*hi),
            ComponentLaw::SpinLaw { t } => {
                let u: f64 = rng.gen();
                if u < 0.5 * (1.0 + t) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// `m_k = ∫ x^k dΛ`.
    pub fn moment(&self, k: u32) -> f64 {
        match self {
            ComponentLaw::PointMasses { atoms } => atoms.iter().map(|&(v, w)| w * v.powi(k as i32)).sum(),
            ComponentLaw::UniformInterval { lo, hi } => {
                let p = k as i32 + 1;
                (hi.powi(p) - lo.powi(p)) / (f64::from(p) * (hi - lo))
            }
            ComponentLaw::SpinLaw { t } => {
                if k % 2 == 0 {
                    1.0
                } else {
                    *t
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// `v = m₂ − m₁²`, clamped at zero.
    pub fn variance(&self) -> f64 {
        let m1 = self.moment(1);
        (self.moment(2) - m1 * m1).max(0.0)
    }

    /// Largest `|x|` in the support.
    pub fn support_bound(&self) -> f64 {
        match self {
            ComponentLaw::PointMasses { atoms } => {
                atoms.iter().filter(|a| a.1 > 0.0).fold(0.0, |m: f64, a| m.max(a.0.abs()))
            }
            ComponentLaw::UniformInterval { lo, hi } => lo.abs().max(hi.abs()),
            ComponentLaw::SpinLaw { .. } => 1.0,
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        match self {
            ComponentLaw::PointMasses { atoms } => atoms.iter().any(|&(v, w)| w > 0.0 && v == x),
            ComponentLaw::UniformInterval { lo, hi } => (*lo..=*hi).contains(&x),
            ComponentLaw::SpinLaw { t } => (x == 1.0 && *t > -1.0) || (x == -1.0 && *t < 1.0),
        }
    }

    /// Support contained in `[lo, hi]`.
    pub fn supported_within(&self, lo: f64, hi: f64) -> bool {
        match self {
            ComponentLaw::PointMasses { atoms } => {
                atoms.iter().all(|&(v, w)| w == 0.0 || (lo..=hi).contains(&v))
            }
            ComponentLaw::UniformInterval { lo: a, hi: b } => *a >= lo && *b <= hi,
            ComponentLaw::SpinLaw { .. } => lo <= -1.0 && hi >= 1.0,
        }
    }

    /// `E[X^k · 1{|X| ≤ cutoff}]`, computed in closed form.
    pub fn truncated_moment(&self, cutoff: f64, k: u32) -> f64 {
        match self {
            ComponentLaw::PointMasses { atoms } => atoms
                .iter()
                .filter(|a| a.0.abs() <= cutoff)
                .map(|&(v, w)| w * v.powi(k as i32))
                .sum(),
            ComponentLaw::UniformInterval { lo, hi } => {
                let a = lo.max(-cutoff);
                let b = hi.min(cutoff);
                if a >= b {
                    return 0.0;
                }
                let p = k as i32 + 1;
                (b.powi(p) - a.powi(p)) / (f64::from(p) * (hi - lo))
            }
            ComponentLaw::SpinLaw { .. } => {
                if cutoff >= 1.0 {
                    self.moment(k)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn truncated_mean(&self, cutoff: f64) -> f64 {
        self.truncated_moment(cutoff, 1)
    }

    /// Short human-readable description, used in provenance records.
    pub fn descriptor(&self) -> String {
        match self {
            ComponentLaw::PointMasses { atoms } => {
                let parts: Vec<String> = atoms.iter().map(|(v, w)| format!("{v}@{w}")).collect();
                format!("point_masses[{}]", parts.join(" "))
            }
            ComponentLaw::UniformInterval { lo, hi } => format!("uniform[{lo} {hi}]"),
            ComponentLaw::SpinLaw { t } => format!("spin[{t}]"),
        }
    }
}

/// Free-function form of [`ComponentLaw::moment`].
pub fn component_moment(law: &ComponentLaw, k: u32) -> f64 {
    law.moment(k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedComponent {
    pub weight: f64,
    pub law: ComponentLaw,
}

/// The de Finetti measure `μ` together with the component laws `Λ_τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, try_from = "RawMixture")]
pub enum DeFinettiMixture {
    /// Finitely many components, `τ` is the component index.
    Discrete { components: Vec<WeightedComponent> },
    /// Spin case with a general measure `mu` on `[-1, 1]`; `τ = t` and
    /// `Λ_t` is the spin law with parameter `t`.
    SpinContinuous { spin_continuous: ComponentLaw },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawMixture {
    Discrete { components: Vec<WeightedComponent> },
    SpinContinuous { spin_continuous: ComponentLaw },
}

impl TryFrom<RawMixture> for DeFinettiMixture {
    type Error = MixtureError;

    fn try_from(raw: RawMixture) -> Result<Self, Self::Error> {
        let m = match raw {
            RawMixture::Discrete { components } => DeFinettiMixture::Discrete { components },
            RawMixture::SpinContinuous { spin_continuous } => DeFinettiMixture::SpinContinuous { spin_continuous },
        };
        m.validate()?;
        Ok(m)
    }
}

/// Identifies the component drawn from a mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauTag {
    Component(usize),
    Spin(f64),
}

impl fmt::Display for TauTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauTag::Component(i) => write!(f, "component:{i}"),
            TauTag::Spin(t) => write!(f, "spin:{t}"),
        }
    }
}

impl FromStr for TauTag {
    type Err = MixtureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MixtureError::BadTag(s.to_string());
        match s.split_once(':') {
            Some(("component", i)) => i.parse().map(TauTag::Component).map_err(|_| bad()),
            Some(("spin", t)) => t.parse().map(TauTag::Spin).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl Serialize for TauTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TauTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl DeFinettiMixture {
    pub fn single(law: ComponentLaw) -> Self {
        DeFinettiMixture::Discrete { components: vec![WeightedComponent { weight: 1.0, law }] }
    }

    pub fn discrete(components: Vec<(f64, ComponentLaw)>) -> Result<Self, MixtureError> {
        let m = DeFinettiMixture::Discrete {
            components: components.into_iter().map(|(weight, law)| WeightedComponent { weight, law }).collect(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Mixture of spin laws `Σ w_i λ_{t_i}`.
    pub fn spin_atoms(atoms: &[(f64, f64)]) -> Result<Self, MixtureError> {
        Self::discrete(atoms.iter().map(|&(w, t)| (w, ComponentLaw::spin(t))).collect())
    }

    pub fn spin_continuous(mu: ComponentLaw) -> Result<Self, MixtureError> {
        let m = DeFinettiMixture::SpinContinuous { spin_continuous: mu };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MixtureError> {
        match self {
            DeFinettiMixture::Discrete { components } => {
                if components.is_empty() {
                    return Err(MixtureError::NoComponents);
                }
                for c in components {
                    c.law.validate()?;
                }
                check_weights(components.iter().map(|c| c.weight))
            }
            DeFinettiMixture::SpinContinuous { spin_continuous: mu } => {
                mu.validate()?;
                if !mu.supported_within(-1.0, 1.0) {
                    return Err(MixtureError::SpinSupport);
                }
                Ok(())
            }
        }
    }

    pub fn sample_tau<R: Rng + ?Sized>(&self, rng: &mut R) -> TauTag {
        match self {
            DeFinettiMixture::Discrete { components } => {
                if components.len() == 1 {
                    return TauTag::Component(0);
                }
                let index = WeightedIndex::new(components.iter().map(|c| c.weight))
                    .expect("validated weights")
                    .sample(rng);
                TauTag::Component(index)
            }
            DeFinettiMixture::SpinContinuous { spin_continuous: mu } => TauTag::Spin(mu.sample(rng)),
        }
    }

    /// The law `Λ_τ` selected by `tag`.
    pub fn conditional_law(&self, tag: &TauTag) -> Result<ComponentLaw, MixtureError> {
        match (self, tag) {
            (DeFinettiMixture::Discrete { components }, TauTag::Component(i)) => {
                components.get(*i).map(|c| c.law.clone()).ok_or(MixtureError::TagMismatch(*tag))
            }
            (DeFinettiMixture::SpinContinuous { .. }, TauTag::Spin(t)) if (-1.0..=1.0).contains(t) => {
                Ok(ComponentLaw::spin(*t))
            }
            _ => Err(MixtureError::TagMismatch(*tag)),
        }
    }
}

/// Free-function form of [`DeFinettiMixture::sample_tau`].
pub fn sample_tau<R: Rng + ?Sized>(mixture: &DeFinettiMixture, rng: &mut R) -> TauTag {
    mixture.sample_tau(rng)
}

/// A finite prefix `ξ₁, …, ξ_n` of an exchangeable sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeableSequence {
    pub values: Vec<f64>,
    pub tau_tag: TauTag,
}

/// Draws `τ` once, then `n` i.i.d. values from `Λ_τ`.
pub fn sample_exchangeable<R: Rng + ?Sized>(
    mixture: &DeFinettiMixture,
    n: usize,
    rng: &mut R,
) -> ExchangeableSequence {
    let tau_tag = mixture.sample_tau(rng);
    let law = mixture.conditional_law(&tau_tag).expect("tag drawn from this mixture");
    let values = (0..n).map(|_| law.sample(rng)).collect();
    ExchangeableSequence { values, tau_tag }
}

/// `M_n = (1/n) Σ ξ_i`.
pub fn empirical_mean(seq: &[f64]) -> Result<f64, MixtureError> {
    if seq.is_empty() {
        return Err(MixtureError::EmptySequence);
    }
    Ok(seq.iter().sum::<f64>() / seq.len() as f64)
}

/// `V_n = (1/n) Σ ξ_i² − M_n²`. Rounding below zero is clamped; anything
/// more negative than `1e-12 · max(1, (1/n)Σξ_i²)` is an error.
pub fn empirical_variance(seq: &[f64]) -> Result<f64, MixtureError> {
    let mean = empirical_mean(seq)?;
    let second = seq.iter().map(|x| x * x).sum::<f64>() / seq.len() as f64;
    let v = second - mean * mean;
    if v >= 0.0 {
        Ok(v)
    } else if v >= -1e-12 * second.max(1.0) {
        Ok(0.0)
    } else {
        Err(MixtureError::NegativeVariance(v))
    }
}

/// Which moment functional a push-forward applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMap {
    /// `τ ↦ m₁(τ)`
    Mean,
    /// `τ ↦ v(τ)`
    Variance,
}

/// Image of the de Finetti measure under a moment map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PushForward {
    /// Atoms `(value, weight)`, equal values merged, first-appearance order.
    Atoms(Vec<(f64, f64)>),
    /// Law of `map(t)` for `t ~ base`, in the spin case where
    /// `m₁(t) = t` and `v(t) = 1 − t²`.
    SpinImage { base: ComponentLaw, map: MomentMap },
}

impl PushForward {
    fn from_atoms(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for (v, w) in pairs {
            match atoms.iter_mut().find(|a| a.0 == v) {
                Some(a) => a.1 += w,
                None => atoms.push((v, w)),
            }
        }
        PushForward::Atoms(atoms)
    }

    pub fn atoms(&self) -> Option<&[(f64, f64)]> {
        match self {
            PushForward::Atoms(a) => Some(a),
            PushForward::SpinImage { .. } => None,
        }
    }

    pub fn total_weight(&self) -> f64 {
        match self {
            PushForward::Atoms(a) => a.iter().map(|x| x.1).sum(),
            PushForward::SpinImage { .. } => 1.0,
        }
    }

    /// `∫ v^k dν(v)`.
    pub fn moment(&self, k: u32) -> f64 {
        match self {
            PushForward::Atoms(a) => a.iter().map(|&(v, w)| w * v.powi(k as i32)).sum(),
            PushForward::SpinImage { base, map: MomentMap::Mean } => base.moment(k),
            PushForward::SpinImage { base, map: MomentMap::Variance } => {
                // (1 − t²)^k = Σ_i C(k,i) (−1)^i t^{2i}
                let mut binom = 1.0;
                let mut total = 0.0;
                for i in 0..=k {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    total += sign * binom * base.moment(2 * i);
                    binom = binom * f64::from(k - i) / f64::from(i + 1);
                }
                total
            }
        }
    }

    /// Mass of the atom at zero.
    pub fn mass_at_zero(&self) -> f64 {
        match self {
            PushForward::Atoms(a) => a.iter().filter(|x| x.0 == 0.0).map(|x| x.1).sum(),
            PushForward::SpinImage { base, map } => {
                let hit = |t: f64| match map {
                    MomentMap::Mean => t == 0.0,
                    MomentMap::Variance => t.abs() == 1.0,
                };
                match base {
                    ComponentLaw::PointMasses { atoms } => {
                        atoms.iter().filter(|a| hit(a.0)).map(|a| a.1).sum()
                    }
                    // base charges ±1 only
                    ComponentLaw::SpinLaw { .. } => match map {
                        MomentMap::Variance => 1.0,
                        MomentMap::Mean => 0.0,
                    },
                    ComponentLaw::UniformInterval { .. } => 0.0,
                }
            }
        }
    }
}

/// `ν` (variance push-forward) and `μ₁` (mean push-forward).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushForwards {
    pub nu: PushForward,
    pub mu1: PushForward,
}

pub fn pushforward_nu(mixture: &DeFinettiMixture) -> PushForwards {
    match mixture {
        DeFinettiMixture::Discrete { components } => PushForwards {
            nu: PushForward::from_atoms(components.iter().map(|c| (c.law.variance(), c.weight))),
            mu1: PushForward::from_atoms(components.iter().map(|c| (c.law.mean(), c.weight))),
        },
        DeFinettiMixture::SpinContinuous { spin_continuous: mu } => match mu {
            ComponentLaw::PointMasses { atoms } => PushForwards {
                nu: PushForward::from_atoms(atoms.iter().map(|&(t, w)| (1.0 - t * t, w))),
                mu1: PushForward::from_atoms(atoms.iter().copied()),
            },
            ComponentLaw::SpinLaw { t } => {
                let atoms = [(1.0, 0.5 * (1.0 + t)), (-1.0, 0.5 * (1.0 - t))];
                PushForwards {
                    nu: PushForward::from_atoms(atoms.iter().map(|&(s, w)| (1.0 - s * s, w))),
                    mu1: PushForward::from_atoms(atoms),
                }
            }
            ComponentLaw::UniformInterval { .. } => PushForwards {
                nu: PushForward::SpinImage { base: mu.clone(), map: MomentMap::Variance },
                mu1: PushForward::SpinImage { base: mu.clone(), map: MomentMap::Mean },
            },
        },
    }
}
