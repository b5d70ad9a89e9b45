//! Band prototypes and random symmetric matrix builders.
//!
//! Entries are filled row-wise over the in-band upper triangle, then
//! mirrored. The same fill order is used for Wigner and de Finetti
//! builds so a run is reproducible from its stream alone.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::mixtures::{ComponentLaw, DeFinettiMixture, MixtureError, TauTag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("half-width {half_width} exceeds n - 1 = {max}")]
    HalfWidth { half_width: usize, max: usize },
    #[error("truncation cutoff must be positive, got {0}")]
    Cutoff(f64),
    #[error("growth rule needs c > 0 and 0 <= q <= 1, got c = {c}, q = {q}")]
    Rule { c: f64, q: f64 },
    #[error("band spec needs a half_width unless kind is full")]
    MissingHalfWidth,
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandKind {
    /// `|i − j| ≤ b`
    Strict,
    /// `|i − j|_N ≤ b` with the distance on the circle `ℤ/Nℤ`.
    Periodic,
}

/// Dimension, half-width and band kind of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandSpec {
    pub n: usize,
    pub half_width: usize,
    pub kind: BandKind,
}

impl BandSpec {
    pub fn new(n: usize, half_width: usize, kind: BandKind) -> Result<Self, EnsembleError> {
        if n == 0 {
            return Err(EnsembleError::EmptyDimension);
        }
        if half_width > n - 1 {
            return Err(EnsembleError::HalfWidth { half_width, max: n - 1 });
        }
        Ok(Self { n, half_width, kind })
    }

    /// Full matrix: strict band with `b = n − 1`.
    pub fn full(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        Self { n, half_width: n - 1, kind: BandKind::Strict }
    }

    pub fn strict(n: usize, half_width: usize) -> Result<Self, EnsembleError> {
        Self::new(n, half_width, BandKind::Strict)
    }

    pub fn periodic(n: usize, half_width: usize) -> Result<Self, EnsembleError> {
        Self::new(n, half_width, BandKind::Periodic)
    }

    /// `w = min(n, 2b + 1)`.
    pub fn bandwidth(&self) -> usize {
        self.n.min(2 * self.half_width + 1)
    }

    pub fn is_full(&self) -> bool {
        match self.kind {
            BandKind::Strict => self.half_width == self.n - 1,
            BandKind::Periodic => self.bandwidth() == self.n,
        }
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        let d = i.abs_diff(j);
        match self.kind {
            BandKind::Strict => d <= self.half_width,
            BandKind::Periodic => d.min(self.n - d) <= self.half_width,
        }
    }

    /// Columns `j ≥ i` inside the band for row `i`, ascending.
    pub fn upper_row(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (i..self.n).filter(move |&j| self.in_band(i, j))
    }

    /// In-band neighbours of `i` (including `i`), ascending.
    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.in_band(i, j)).collect()
    }

    /// Largest number of in-band entries in any row.
    pub fn max_row_occupancy(&self) -> usize {
        (0..self.n).map(|i| (0..self.n).filter(|&j| self.in_band(i, j)).count()).max().unwrap_or(0)
    }
}

/// Half-width from the growth rule `b = max(1, ⌊c · n^q⌋)`, capped at `n − 1`.
pub fn half_width_rule(n: usize, c: f64, q: f64) -> Result<usize, EnsembleError> {
    if !(c > 0.0 && (0.0..=1.0).contains(&q)) {
        return Err(EnsembleError::Rule { c, q });
    }
    if n == 0 {
        return Err(EnsembleError::EmptyDimension);
    }
    let raw = (c * (n as f64).powf(q)).floor();
    let b = if raw >= 1.0 { raw as usize } else { 1 };
    Ok(b.min(n - 1))
}

/// The 0/1 band mask `B_N` (strict) or `P_N` (periodic).
pub fn prototype(spec: &BandSpec) -> Matrix {
    Matrix::from_fn(spec.n, |i, j| if spec.in_band(i, j) { 1.0 } else { 0.0 })
}

/// Where the entries of a sample came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntrySource {
    Wigner,
    DeFinetti(TauTag),
}

impl EntrySource {
    pub fn tau_tag(&self) -> Option<TauTag> {
        match self {
            EntrySource::Wigner => None,
            EntrySource::DeFinetti(t) => Some(*t),
        }
    }
}

impl fmt::Display for EntrySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntrySource::Wigner => f.write_str("wigner"),
            EntrySource::DeFinetti(t) => t.fmt(f),
        }
    }
}

impl Serialize for EntrySource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntrySource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "wigner" {
            return Ok(EntrySource::Wigner);
        }
        s.parse().map(EntrySource::DeFinetti).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Seed of the stream that produced the sample, when known.
    pub seed: Option<u64>,
    pub source: EntrySource,
    /// Law the entries were drawn from (`Λ_τ` for de Finetti builds).
    pub law: ComponentLaw,
}

/// One realised symmetric matrix with its band spec and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    pub entries: Matrix,
    pub spec: BandSpec,
    pub provenance: Provenance,
}

impl MatrixSample {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.provenance.seed = Some(seed);
        self
    }

    pub fn tau_tag(&self) -> Option<TauTag> {
        self.provenance.source.tau_tag()
    }

    /// The in-band upper-triangle entries in fill order.
    pub fn drawn_entries(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.spec.n {
            out.extend(self.spec.upper_row(i).map(|j| self.entries[(i, j)]));
        }
        out
    }
}

fn fill<R: Rng + ?Sized>(spec: &BandSpec, law: &ComponentLaw, rng: &mut R) -> Matrix {
    let mut m = Matrix::zeros(spec.n);
    for i in 0..spec.n {
        for j in spec.upper_row(i) {
            let x = law.sample(rng);
            m.set_sym(i, j, x);
        }
    }
    m
}

/// Wigner band matrix with i.i.d. entries from `law`.
pub fn build_wigner<R: Rng + ?Sized>(spec: &BandSpec, law: &ComponentLaw, rng: &mut R) -> MatrixSample {
    MatrixSample {
        entries: fill(spec, law, rng),
        spec: *spec,
        provenance: Provenance { seed: None, source: EntrySource::Wigner, law: law.clone() },
    }
}

/// de Finetti band matrix: one `τ` per matrix, then i.i.d. `Λ_τ` entries.
pub fn build_definetti<R: Rng + ?Sized>(
    spec: &BandSpec,
    mixture: &DeFinettiMixture,
    rng: &mut R,
) -> MatrixSample {
    let tau = mixture.sample_tau(rng);
    let law = mixture.conditional_law(&tau).expect("tag drawn from this mixture");
    MatrixSample {
        entries: fill(spec, &law, rng),
        spec: *spec,
        provenance: Provenance { seed: None, source: EntrySource::DeFinetti(tau), law },
    }
}

/// Output of [`truncate_and_center`].
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    /// Entries with `|x| > cutoff` set to zero.
    pub truncated: MatrixSample,
    /// `truncated − mean_matrix`.
    pub centered: MatrixSample,
    /// Truncated mean times the band mask.
    pub mean_matrix: MatrixSample,
    /// `|E(x · 1{|x| ≤ cutoff})|` under the entry law.
    pub e: f64,
}

/// Truncation and centering of a sample, with the truncated mean computed
/// from the entry law in closed form.
pub fn truncate_and_center(sample: &MatrixSample, cutoff: f64) -> Result<Truncation, EnsembleError> {
    if !(cutoff > 0.0) {
        return Err(EnsembleError::Cutoff(cutoff));
    }
    let spec = sample.spec;
    let mean = sample.provenance.law.truncated_mean(cutoff);
    let truncated = sample.entries.map(|x| if x.abs() <= cutoff { x } else { 0.0 });
    let mask = prototype(&spec);
    let mean_matrix = mask.scaled(mean);
    let centered = truncated.sub(&mean_matrix);
    let wrap = |entries| MatrixSample { entries, spec, provenance: sample.provenance.clone() };
    Ok(Truncation {
        truncated: wrap(truncated),
        centered: wrap(centered),
        mean_matrix: wrap(mean_matrix),
        e: mean.abs(),
    })
}

/// Entry model: a single law (Wigner) or an exchangeable mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntryModel {
    Mixture(DeFinettiMixture),
    Law(ComponentLaw),
}

impl EntryModel {
    pub fn build<R: Rng + ?Sized>(&self, spec: &BandSpec, rng: &mut R) -> MatrixSample {
        match self {
            EntryModel::Law(law) => build_wigner(spec, law, rng),
            EntryModel::Mixture(m) => build_definetti(spec, m, rng),
        }
    }

    pub fn validate(&self) -> Result<(), MixtureError> {
        match self {
            EntryModel::Law(l) => l.validate(),
            EntryModel::Mixture(m) => m.validate(),
        }
    }

    /// The model as a de Finetti mixture (a law is a one-component mixture).
    pub fn as_mixture(&self) -> DeFinettiMixture {
        match self {
            EntryModel::Law(l) => DeFinettiMixture::single(l.clone()),
            EntryModel::Mixture(m) => m.clone(),
        }
    }
}

/// `{"n":…, "half_width":…, "kind":"strict"|"periodic"|"full", "entries":{…}}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<usize>,
    pub kind: KindSpec,
    pub entries: EntryModel,
}

/// Band kind as written in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindSpec {
    Strict,
    Periodic,
    Full,
}

impl KindSpec {
    pub fn band_spec(self, n: usize, half_width: Option<usize>) -> Result<BandSpec, EnsembleError> {
        match self {
            KindSpec::Full => {
                if n == 0 {
                    return Err(EnsembleError::EmptyDimension);
                }
                Ok(BandSpec::full(n))
            }
            KindSpec::Strict => BandSpec::strict(n, half_width.ok_or(EnsembleError::MissingHalfWidth)?),
            KindSpec::Periodic => BandSpec::periodic(n, half_width.ok_or(EnsembleError::MissingHalfWidth)?),
        }
    }
}

impl EnsembleSpec {
    pub fn band_spec(&self) -> Result<BandSpec, EnsembleError> {
        self.entries.validate()?;
        self.kind.band_spec(self.n, self.half_width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_from_seed;

    fn rows(m: &Matrix) -> Vec<Vec<f64>> {
        (0..m.dim()).map(|i| m.row(i).to_vec()).collect()
    }

    #[test]
    fn spec_validation_and_bandwidth() {
        assert!(BandSpec::strict(0, 0).is_err());
        assert!(BandSpec::strict(3, 3).is_err());
        assert_eq!(BandSpec::strict(10, 2).unwrap().bandwidth(), 5);
        assert_eq!(BandSpec::periodic(10, 7).unwrap().bandwidth(), 10);
        assert!(BandSpec::full(5).is_full());
        assert!(BandSpec::periodic(6, 3).unwrap().is_full());
        assert!(!BandSpec::strict(6, 3).unwrap().is_full());
    }

    #[test]
    fn prototype_examples() {
        assert_eq!(prototype(&BandSpec::strict(3, 0).unwrap()), Matrix::identity(3));
        let p = prototype(&BandSpec::periodic(4, 1).unwrap());
        assert_eq!(
            rows(&p),
            vec![
                vec![1.0, 1.0, 0.0, 1.0],
                vec![1.0, 1.0, 1.0, 0.0],
                vec![0.0, 1.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0, 1.0],
            ]
        );
        assert_eq!(prototype(&BandSpec::strict(4, 3).unwrap()), Matrix::from_fn(4, |_, _| 1.0));
    }

    #[test]
    fn periodic_rows_have_bandwidth_ones() {
        for n in 1..=30 {
            for b in 0..n {
                let spec = BandSpec::periodic(n, b).unwrap();
                let p = prototype(&spec);
                for i in 0..n {
                    let ones = p.row(i).iter().filter(|&&x| x == 1.0).count();
                    assert_eq!(ones, spec.bandwidth(), "n={n} b={b} row {i}");
                }
                assert_eq!(spec.max_row_occupancy(), spec.bandwidth());
            }
        }
    }

    #[test]
    fn periodic_minus_strict_rank_bound() {
        for n in 1..=40 {
            for b in 0..n {
                let diff = prototype(&BandSpec::periodic(n, b).unwrap())
                    .sub(&prototype(&BandSpec::strict(n, b).unwrap()));
                let bound = 2 * b.min(n - b - 1);
                assert!(diff.rank(1e-10) <= bound, "n={n} b={b}");
            }
        }
    }

    #[test]
    fn point_mass_build_is_scaled_prototype() {
        let mut rng = stream_from_seed(5);
        for spec in [BandSpec::strict(7, 2).unwrap(), BandSpec::periodic(7, 2).unwrap(), BandSpec::full(4)] {
            let s = build_wigner(&spec, &ComponentLaw::point_mass(2.5), &mut rng);
            assert_eq!(s.entries, prototype(&spec).scaled(2.5));
        }
    }

    #[test]
    fn band_mask_and_symmetry_hold() {
        let mut rng = stream_from_seed(6);
        let spec = BandSpec::strict(100, 10).unwrap();
        let s = build_wigner(&spec, &ComponentLaw::uniform(-1.0, 2.0), &mut rng);
        assert!(s.entries.is_symmetric());
        for i in 0..100usize {
            for j in 0..100 {
                if i.abs_diff(j) > 10 {
                    assert_eq!(s.entries[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn rademacher_two_by_two_outcomes_are_uniform() {
        // 8 outcomes of (x11, x12, x22); chi-square with 7 dof, 1% critical value 18.475
        let mut rng = stream_from_seed(7);
        let spec = BandSpec::strict(2, 1).unwrap();
        let law = ComponentLaw::rademacher();
        let trials = 100_000;
        let mut counts = [0usize; 8];
        for _ in 0..trials {
            let m = build_wigner(&spec, &law, &mut rng).entries;
            let bit = |x: f64| usize::from(x > 0.0);
            counts[bit(m[(0, 0)]) | bit(m[(0, 1)]) << 1 | bit(m[(1, 1)]) << 2] += 1;
        }
        let expected = trials as f64 / 8.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 18.475, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn definetti_spin_extremes() {
        let mut rng = stream_from_seed(8);
        let spec = BandSpec::periodic(9, 2).unwrap();
        let mask = prototype(&spec);
        let ones = DeFinettiMixture::single(ComponentLaw::spin(1.0));
        assert_eq!(build_definetti(&spec, &ones, &mut rng).entries, mask);

        // ±prototype, each with frequency 1/2; sd over 1e4 trials is 0.005
        let pm = DeFinettiMixture::spin_atoms(&[(0.5, 1.0), (0.5, -1.0)]).unwrap();
        let trials = 10_000;
        let mut plus = 0;
        for _ in 0..trials {
            let s = build_definetti(&spec, &pm, &mut rng);
            if s.entries == mask {
                plus += 1;
                assert_eq!(s.tau_tag(), Some(TauTag::Component(0)));
            } else {
                assert_eq!(s.entries, mask.scaled(-1.0));
            }
        }
        let freq = plus as f64 / trials as f64;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn truncation_examples() {
        let mut rng = stream_from_seed(9);
        let spec = BandSpec::strict(6, 2).unwrap();

        let s = build_wigner(&spec, &ComponentLaw::rademacher(), &mut rng);
        let t = truncate_and_center(&s, 2.0).unwrap();
        assert_eq!(t.truncated.entries, s.entries);
        assert_eq!(t.centered.entries, s.entries);
        assert_eq!(t.e, 0.0);

        let s = build_wigner(&spec, &ComponentLaw::point_mass(3.0), &mut rng);
        let t = truncate_and_center(&s, 2.0).unwrap();
        assert_eq!(t.truncated.entries, Matrix::zeros(6));
        assert_eq!(t.e, 0.0);

        let law = ComponentLaw::PointMasses { atoms: vec![(-1.0, 0.75), (3.0, 0.25)] };
        let s = build_wigner(&spec, &law, &mut rng);
        let t = truncate_and_center(&s, 2.0).unwrap();
        assert_eq!(t.e, 0.75);
        for i in 0..6 {
            for j in 0..6 {
                let c = t.centered.entries[(i, j)];
                if spec.in_band(i, j) {
                    assert!(c == -0.25 || c == 0.75, "{c}");
                    assert_eq!(t.mean_matrix.entries[(i, j)], -0.75);
                } else {
                    assert_eq!(c, 0.0);
                }
            }
        }
        assert_eq!(truncate_and_center(&s, 0.0), Err(EnsembleError::Cutoff(0.0)));
    }

    #[test]
    fn growth_rule() {
        assert_eq!(half_width_rule(2000, 1.0, 0.8).unwrap(), 437);
        assert_eq!(half_width_rule(10, 0.01, 0.5).unwrap(), 1);
        assert_eq!(half_width_rule(10, 5.0, 1.0).unwrap(), 9);
        assert_eq!(half_width_rule(1, 1.0, 0.5).unwrap(), 0);
        assert!(half_width_rule(10, 1.0, 1.5).is_err());
    }

    #[test]
    fn ensemble_spec_json() {
        let doc = r#"{"n":1000, "half_width":100, "kind":"periodic", "entries":{"kind":"spin","t":0.5}}"#;
        let e: EnsembleSpec = serde_json::from_str(doc).unwrap();
        assert_eq!(e.band_spec().unwrap(), BandSpec::periodic(1000, 100).unwrap());
        assert_eq!(e.entries, EntryModel::Law(ComponentLaw::spin(0.5)));

        let doc = r#"{"n":50, "kind":"full", "entries":{"components":[{"weight":1.0,"law":{"kind":"rademacher"}}]}}"#;
        let e: EnsembleSpec = serde_json::from_str(doc).unwrap();
        assert_eq!(e.band_spec().unwrap(), BandSpec::full(50));
        assert!(matches!(e.entries, EntryModel::Mixture(_)));

        let doc = r#"{"n":50, "kind":"strict", "entries":{"kind":"rademacher"}}"#;
        let e: EnsembleSpec = serde_json::from_str(doc).unwrap();
        assert_eq!(e.band_spec(), Err(EnsembleError::MissingHalfWidth));
    }
}
