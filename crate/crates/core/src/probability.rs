//! Probability mass functions over a finite alphabet, hypothesis models with
//! non-identical marginals, type vectors and divergence primitives.
//!
//! Symbols are 0-based inside the library. Helpers named `*_one_based` convert
//! at the I/O boundary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest probability kept in a [`Pmf`]; smaller entries (including exact
/// zeros) are raised to this value before renormalizing.
pub const PMF_FLOOR: f64 = 1e-12;

/// Tolerance on class weights summing to one.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Tolerance used when deciding whether `weight * n` is an integer.
const INTEGRALITY_TOLERANCE: f64 = 1e-6;

/// A strictly positive probability vector over the alphabet `{0, .., m-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    /// Builds a PMF, clamping entries to [`PMF_FLOOR`] and renormalizing.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_correction(probs).map(|(pmf, _)| pmf)
    }

    /// Like [`Pmf::new`], also returning the largest absolute change applied
    /// to any entry by the clamp and renormalization.
    pub fn with_correction(raw: Vec<f64>) -> Result<(Self, f64)> {
        if raw.is_empty() {
            return Err(Error::domain("a PMF needs at least one symbol"));
        }
        if let Some((k, v)) = raw.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::domain(format!(
                "PMF entry {} is {v}; entries must be finite and nonnegative",
                k + 1
            )));
        }
        let raw_sum: f64 = raw.iter().sum();
        if raw_sum <= 0.0 {
            return Err(Error::domain("PMF entries sum to zero"));
        }
        let tolerance = 4.0 * f64::EPSILON * raw.len() as f64;
        let mut probs = raw.clone();
        if (raw_sum - 1.0).abs() > tolerance {
            probs.iter_mut().for_each(|v| *v /= raw_sum);
        }
        let clamped = probs.iter().filter(|&&v| v < PMF_FLOOR).count();
        let free_mass: f64 = probs.iter().filter(|&&v| v >= PMF_FLOOR).sum();
        // Clamped entries sit exactly at the floor; the remaining entries are
        // rescaled to fill the rest, which keeps the operation idempotent.
        // Inputs that already sum to one up to rounding are left bit-exact so
        // that equal literals give equal log-likelihoods.
        let target = 1.0 - clamped as f64 * PMF_FLOOR;
        if clamped > 0 {
            for v in probs.iter_mut() {
                *v = if *v < PMF_FLOOR { PMF_FLOOR } else { *v * target / free_mass };
            }
        }
        let correction = probs
            .iter()
            .zip(&raw)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok((Pmf { probs }, correction))
    }

    pub fn uniform(m: usize) -> Self {
        assert!(m > 0, "alphabet must be nonempty");
        Pmf { probs: vec![1.0 / m as f64; m] }
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, symbol: usize) -> f64 {
        self.probs[symbol]
    }

    pub fn log_probs(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.ln()).collect()
    }
}

impl<'de> Deserialize<'de> for Pmf {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        Pmf::new(raw).map_err(serde::de::Error::custom)
    }
}

/// A PMF used by a fixed asymptotic fraction of the sample indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionClass {
    pub pmf: Pmf,
    pub weight: f64,
}

impl DistributionClass {
    pub fn new(pmf: Pmf, weight: f64) -> Self {
        DistributionClass { pmf, weight }
    }
}

/// Which hypothesis generated the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn index(self) -> usize {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hypothesis::H0 => write!(f, "H0"),
            Hypothesis::H1 => write!(f, "H1"),
        }
    }
}

/// The pair of class lists defining the test: under H1 the marginals are
/// drawn from `h1`, under H0 from `h0`.
///
/// For a sample size `n` each class owns `weight * n` consecutive indices, in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisModel {
    m: usize,
    h0: Vec<DistributionClass>,
    h1: Vec<DistributionClass>,
}

fn check_classes(classes: &[DistributionClass], name: &str) -> Result<usize> {
    let first = classes
        .first()
        .ok_or_else(|| Error::config(format!("{name}: class list is empty")))?;
    let m = first.pmf.alphabet_size();
    for (i, c) in classes.iter().enumerate() {
        if c.pmf.alphabet_size() != m {
            return Err(Error::config(format!(
                "{name}: class {} has alphabet size {}, expected {m}",
                i + 1,
                c.pmf.alphabet_size()
            )));
        }
        if !(c.weight > 0.0 && c.weight <= 1.0) {
            return Err(Error::config(format!(
                "{name}: class {} has weight {}, expected a value in (0, 1]",
                i + 1,
                c.weight
            )));
        }
    }
    let total: f64 = classes.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::config(format!("{name}: class weights sum to {total}, expected 1")));
    }
    Ok(m)
}

impl HypothesisModel {
    pub fn new(h0: Vec<DistributionClass>, h1: Vec<DistributionClass>) -> Result<Self> {
        let m0 = check_classes(&h0, "h0")?;
        let m1 = check_classes(&h1, "h1")?;
        if m0 != m1 {
            return Err(Error::config(format!(
                "alphabet sizes differ between hypotheses: h0 has {m0}, h1 has {m1}"
            )));
        }
        Ok(HypothesisModel { m: m0, h0, h1 })
    }

    /// Both hypotheses iid with the given PMFs.
    pub fn iid(q: Pmf, p: Pmf) -> Result<Self> {
        Self::new(vec![DistributionClass::new(q, 1.0)], vec![DistributionClass::new(p, 1.0)])
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    pub fn classes(&self, h: Hypothesis) -> &[DistributionClass] {
        match h {
            Hypothesis::H0 => &self.h0,
            Hypothesis::H1 => &self.h1,
        }
    }

    /// Replaces the class list of one hypothesis by the single averaged PMF.
    pub fn with_averaged(&self, h: Hypothesis) -> Self {
        let avg = average_pmf(self.classes(h)).expect("validated class list");
        let single = vec![DistributionClass::new(avg, 1.0)];
        let mut out = self.clone();
        match h {
            Hypothesis::H0 => out.h0 = single,
            Hypothesis::H1 => out.h1 = single,
        }
        out
    }

    /// Number of indices owned by each class of `h` at sample size `n`.
    pub fn class_sizes(&self, h: Hypothesis, n: usize) -> Result<Vec<usize>> {
        let mut sizes = Vec::with_capacity(self.classes(h).len());
        for (i, c) in self.classes(h).iter().enumerate() {
            let exact = c.weight * n as f64;
            let rounded = exact.round();
            if (exact - rounded).abs() > INTEGRALITY_TOLERANCE {
                return Err(Error::config(format!(
                    "{h} class {} has weight {} giving {exact} indices at n = {n}; \
                     weight * n must be an integer",
                    i + 1,
                    c.weight
                )));
            }
            sizes.push(rounded as usize);
        }
        let total: usize = sizes.iter().sum();
        if total != n {
            return Err(Error::config(format!(
                "{h} class sizes sum to {total} at n = {n}"
            )));
        }
        Ok(sizes)
    }

    /// The PMF in force at every index `0..n` under `h`.
    pub fn marginals(&self, h: Hypothesis, n: usize) -> Result<Vec<&Pmf>> {
        let sizes = self.class_sizes(h, n)?;
        let mut out = Vec::with_capacity(n);
        for (c, &size) in self.classes(h).iter().zip(&sizes) {
            out.extend(std::iter::repeat_n(&c.pmf, size));
        }
        Ok(out)
    }

    /// Common refinement of the two class partitions of the index fraction
    /// `[0, 1)`. Returns `(h0, h1)` lists of equal length whose `i`-th entries
    /// carry the same weight and cover the same indices.
    pub fn aligned_classes(&self) -> (Vec<DistributionClass>, Vec<DistributionClass>) {
        let cumulative = |cs: &[DistributionClass]| {
            let mut acc = 0.0;
            cs.iter()
                .map(|c| {
                    acc += c.weight;
                    acc
                })
                .collect::<Vec<f64>>()
        };
        let b0 = cumulative(&self.h0);
        let b1 = cumulative(&self.h1);
        let (mut i0, mut i1) = (0usize, 0usize);
        let mut start = 0.0;
        let (mut a0, mut a1) = (Vec::new(), Vec::new());
        while i0 < b0.len() && i1 < b1.len() {
            let (e0, e1) = (b0[i0], b1[i1]);
            let end = e0.min(e1);
            let w = end - start;
            if w > WEIGHT_TOLERANCE {
                a0.push(DistributionClass::new(self.h0[i0].pmf.clone(), w));
                a1.push(DistributionClass::new(self.h1[i1].pmf.clone(), w));
                start = end;
            }
            if (e0 - end).abs() <= WEIGHT_TOLERANCE {
                i0 += 1;
            }
            if (e1 - end).abs() <= WEIGHT_TOLERANCE {
                i1 += 1;
            }
        }
        (a0, a1)
    }

    /// Loads a model from its JSON representation, applying the PMF clamp.
    pub fn from_json(text: &str) -> Result<(Self, LoadReport)> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("malformed model file: {e}")))?;
        let mut report = LoadReport::default();
        let mut convert = |raw: Vec<RawClass>, name: &str| -> Result<Vec<DistributionClass>> {
            raw.into_iter()
                .enumerate()
                .map(|(i, c)| {
                    if c.pmf.len() != file.m {
                        return Err(Error::config(format!(
                            "{name} class {} has {} entries, expected m = {}",
                            i + 1,
                            c.pmf.len(),
                            file.m
                        )));
                    }
                    let (pmf, correction) = Pmf::with_correction(c.pmf)
                        .map_err(|e| Error::config(format!("{name} class {}: {e}", i + 1)))?;
                    report.max_correction = report.max_correction.max(correction);
                    if correction > 0.0 {
                        report.corrected_classes.push(format!("{name}[{}]", i + 1));
                    }
                    Ok(DistributionClass::new(pmf, c.weight))
                })
                .collect()
        };
        let h0 = convert(file.h0, "h0")?;
        let h1 = convert(file.h1, "h1")?;
        Ok((HypothesisModel::new(h0, h1)?, report))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFileOut { m: self.m, h0: &self.h0, h1: &self.h1 })
            .expect("model serializes")
    }
}

#[derive(Deserialize)]
struct RawClass {
    pmf: Vec<f64>,
    weight: f64,
}

#[derive(Deserialize)]
struct ModelFile {
    m: usize,
    h0: Vec<RawClass>,
    h1: Vec<RawClass>,
}

#[derive(Serialize)]
struct ModelFileOut<'a> {
    m: usize,
    h0: &'a [DistributionClass],
    h1: &'a [DistributionClass],
}

/// Corrections applied while loading a model file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    /// Largest absolute change applied to any probability.
    pub max_correction: f64,
    /// Classes whose PMF was altered, as `h0[1]`, `h1[3]`, ...
    pub corrected_classes: Vec<String>,
}

/// Per-symbol counts of an observation block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypeVector {
    counts: Vec<usize>,
    n: usize,
}

impl TypeVector {
    pub fn from_counts(counts: Vec<usize>) -> Self {
        let n = counts.iter().sum();
        TypeVector { counts, n }
    }

    /// Counts the 0-based symbols of `x` over an alphabet of size `m`.
    pub fn from_symbols(x: &[usize], m: usize) -> Result<Self> {
        let mut counts = vec![0usize; m];
        for (i, &s) in x.iter().enumerate() {
            if s >= m {
                return Err(Error::domain(format!(
                    "observation at index {} is symbol {}, outside the alphabet 1..={m}",
                    i + 1,
                    s + 1
                )));
            }
            counts[s] += 1;
        }
        Ok(TypeVector { counts, n: x.len() })
    }

    /// Like [`TypeVector::from_symbols`] for symbols written `1..=m`.
    pub fn from_one_based(x: &[usize], m: usize) -> Result<Self> {
        let mut zero = Vec::with_capacity(x.len());
        for (i, &s) in x.iter().enumerate() {
            if s == 0 || s > m {
                return Err(Error::domain(format!(
                    "observation at index {} is symbol {s}, outside the alphabet 1..={m}",
                    i + 1
                )));
            }
            zero.push(s - 1);
        }
        Self::from_symbols(&zero, m)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// The sorted observation vector (0-based symbols, nondecreasing).
    pub fn sorted_symbols(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        for (k, &c) in self.counts.iter().enumerate() {
            out.extend(std::iter::repeat_n(k, c));
        }
        out
    }
}

/// Empirical type of a 0-based labeled observation vector.
pub fn type_vector(x: &[usize], m: usize) -> Result<TypeVector> {
    TypeVector::from_symbols(x, m)
}

/// Weighted arithmetic average of the class PMFs.
pub fn average_pmf(classes: &[DistributionClass]) -> Result<Pmf> {
    let first = classes
        .first()
        .ok_or_else(|| Error::domain("cannot average an empty class list"))?;
    let m = first.pmf.alphabet_size();
    let mut acc = vec![0.0; m];
    for c in classes {
        if c.pmf.alphabet_size() != m {
            return Err(Error::domain("classes have different alphabet sizes"));
        }
        for (a, p) in acc.iter_mut().zip(c.pmf.probs()) {
            *a += c.weight * p;
        }
    }
    Pmf::new(acc)
}

pub(crate) fn kl_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| if x > 0.0 { x * (x / y).ln() } else { 0.0 })
        .sum::<f64>()
        .max(0.0)
}

/// `D(a || b)` in nats.
pub fn kl_divergence(a: &Pmf, b: &Pmf) -> Result<f64> {
    if a.alphabet_size() != b.alphabet_size() {
        return Err(Error::domain(format!(
            "alphabet sizes differ: {} vs {}",
            a.alphabet_size(),
            b.alphabet_size()
        )));
    }
    Ok(kl_slices(a.probs(), b.probs()))
}

/// Weighted average of per-class divergences, `from[i]` paired with
/// `to[pairing[i]]`. Paired classes must carry the same weight.
pub fn divergence_rate(
    from: &[DistributionClass],
    to: &[DistributionClass],
    pairing: &[usize],
) -> Result<f64> {
    if pairing.len() != from.len() {
        return Err(Error::domain(format!(
            "pairing has {} entries for {} classes",
            pairing.len(),
            from.len()
        )));
    }
    let mut rate = 0.0;
    for (i, (c, &j)) in from.iter().zip(pairing).enumerate() {
        let d = to
            .get(j)
            .ok_or_else(|| Error::domain(format!("pairing maps class {} to missing class {}", i + 1, j + 1)))?;
        if (c.weight - d.weight).abs() > WEIGHT_TOLERANCE {
            return Err(Error::domain(format!(
                "class {} has weight {} but its partner has weight {}",
                i + 1,
                c.weight,
                d.weight
            )));
        }
        rate += c.weight * kl_divergence(&c.pmf, &d.pmf)?;
    }
    Ok(rate)
}

/// Divergence rate between the two hypotheses of `model`, `D(from || to)`,
/// over the common refinement of their class partitions.
pub fn model_divergence_rate(model: &HypothesisModel, from: Hypothesis) -> f64 {
    let (a0, a1) = model.aligned_classes();
    let (f, t) = match from {
        Hypothesis::H0 => (a0, a1),
        Hypothesis::H1 => (a1, a0),
    };
    let pairing: Vec<usize> = (0..f.len()).collect();
    divergence_rate(&f, &t, &pairing).expect("aligned classes share weights")
}

/// Draws labeled samples of a fixed size from one hypothesis.
#[derive(Debug, Clone)]
pub struct Sampler {
    m: usize,
    /// Cumulative distribution of each distinct class.
    cdfs: Vec<Vec<f64>>,
    /// Class owning each index.
    owner: Vec<usize>,
}

impl Sampler {
    pub fn new(model: &HypothesisModel, h: Hypothesis, n: usize) -> Result<Self> {
        let sizes = model.class_sizes(h, n)?;
        let cdfs = model
            .classes(h)
            .iter()
            .map(|c| {
                let mut acc = 0.0;
                c.pmf
                    .probs()
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        let mut owner = Vec::with_capacity(n);
        for (c, &s) in sizes.iter().enumerate() {
            owner.extend(std::iter::repeat_n(c, s));
        }
        Ok(Sampler { m: model.alphabet_size(), cdfs, owner })
    }

    pub fn n(&self) -> usize {
        self.owner.len()
    }

    /// Fills `labels` with one draw per index and returns its type.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, labels: &mut Vec<usize>) -> TypeVector {
        labels.clear();
        let mut counts = vec![0usize; self.m];
        for &c in &self.owner {
            let cdf = &self.cdfs[c];
            let u: f64 = rng.random();
            let s = cdf.iter().position(|&f| u < f).unwrap_or(self.m - 1);
            counts[s] += 1;
            labels.push(s);
        }
        TypeVector { counts, n: self.owner.len() }
    }
}

/// Samples `n` labeled observations under `h`, returning the labeled vector
/// and its type.
pub fn sample<R: Rng + ?Sized>(
    model: &HypothesisModel,
    h: Hypothesis,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, TypeVector)> {
    let sampler = Sampler::new(model, h, n)?;
    let mut labels = Vec::with_capacity(n);
    let t = sampler.sample_into(rng, &mut labels);
    Ok((labels, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use proptest::prelude::*;

    fn pmf(v: &[f64]) -> Pmf {
        Pmf::new(v.to_vec()).unwrap()
    }

    #[test]
    fn type_vector_counts() {
        let t = TypeVector::from_one_based(&[3, 1, 3], 3).unwrap();
        assert_eq!(t.counts(), &[1, 0, 2]);
        let t = TypeVector::from_one_based(&[3, 2, 1, 3, 1], 3).unwrap();
        assert_eq!(t.counts(), &[2, 1, 2]);
        assert_eq!(t.n(), 5);
        assert_eq!(t.sorted_symbols(), vec![0, 0, 1, 2, 2]);
        let t = type_vector(&[], 4).unwrap();
        assert_eq!(t.counts(), &[0, 0, 0, 0]);
        assert_eq!(t.n(), 0);
    }

    #[test]
    fn type_vector_rejects_out_of_alphabet() {
        let err = TypeVector::from_one_based(&[1, 4, 2], 3).unwrap_err();
        assert!(err.to_string().contains("index 2"), "{err}");
        assert!(type_vector(&[0, 3], 3).is_err());
    }

    #[test]
    fn pmf_clamps_zero_entries() {
        let (p, corr) = Pmf::with_correction(vec![0.0, 1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert!(p.get(0) > 0.0);
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(corr > 0.0 && corr < 1e-11);
        assert!(Pmf::new(vec![]).is_err());
        assert!(Pmf::new(vec![0.5, -0.1]).is_err());
        assert!(Pmf::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn pmf_keeps_exact_literals() {
        let p = pmf(&[1.0 / 12.0, 1.0 / 3.0, 7.0 / 12.0]);
        assert_eq!(p.get(1), 1.0 / 3.0);
    }

    #[test]
    fn average_pmf_cases() {
        let p = pmf(&[0.2, 0.3, 0.5]);
        let avg = average_pmf(&[DistributionClass::new(p.clone(), 1.0)]).unwrap();
        assert_eq!(avg, p);
        let avg = average_pmf(&[
            DistributionClass::new(pmf(&[0.1, 0.9]), 0.5),
            DistributionClass::new(pmf(&[0.9, 0.1]), 0.5),
        ])
        .unwrap();
        assert!((avg.get(0) - 0.5).abs() < 1e-12);
        assert!(average_pmf(&[]).is_err());
    }

    #[test]
    fn kl_cases() {
        let a = pmf(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&a, &a).unwrap(), 0.0);
        let b = pmf(&[0.25, 0.75]);
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_divergence(&a, &b).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.143841036).abs() < 1e-8);
        let c = pmf(&[1.0, 0.0]);
        assert!((kl_divergence(&c, &Pmf::uniform(2)).unwrap() - 2f64.ln()).abs() < 1e-10);
        assert!(kl_divergence(&a, &Pmf::uniform(3)).is_err());
    }

    #[test]
    fn divergence_rate_cases() {
        let cls = |a: f64, b: f64| {
            vec![
                DistributionClass::new(pmf(&[a, 1.0 - a]), 0.5),
                DistributionClass::new(pmf(&[b, 1.0 - b]), 0.5),
            ]
        };
        let p = cls(0.1, 0.9);
        let q = cls(0.5, 0.3);
        assert_eq!(divergence_rate(&p, &p, &[0, 1]).unwrap(), 0.0);
        let expected = 0.5 * kl_divergence(&q[0].pmf, &p[0].pmf).unwrap()
            + 0.5 * kl_divergence(&q[1].pmf, &p[1].pmf).unwrap();
        assert!((divergence_rate(&q, &p, &[0, 1]).unwrap() - expected).abs() < 1e-15);

        let single_a = vec![DistributionClass::new(pmf(&[0.3, 0.7]), 1.0)];
        let single_b = vec![DistributionClass::new(pmf(&[0.6, 0.4]), 1.0)];
        assert_eq!(
            divergence_rate(&single_a, &single_b, &[0]).unwrap(),
            kl_divergence(&single_a[0].pmf, &single_b[0].pmf).unwrap()
        );
        let lopsided = vec![
            DistributionClass::new(pmf(&[0.3, 0.7]), 0.25),
            DistributionClass::new(pmf(&[0.3, 0.7]), 0.75),
        ];
        assert!(divergence_rate(&lopsided, &q, &[0, 1]).is_err());
    }

    #[test]
    fn class_sizes_require_integrality() {
        let half = |a: f64| DistributionClass::new(pmf(&[a, 1.0 - a]), 0.5);
        let model = HypothesisModel::new(vec![half(0.5), half(0.3)], vec![half(0.1), half(0.9)]).unwrap();
        assert_eq!(model.class_sizes(Hypothesis::H0, 10).unwrap(), vec![5, 5]);
        assert!(matches!(model.class_sizes(Hypothesis::H1, 7), Err(Error::Config(_))));
    }

    #[test]
    fn model_validation() {
        let a = DistributionClass::new(pmf(&[0.5, 0.5]), 0.6);
        let b = DistributionClass::new(pmf(&[0.5, 0.5]), 0.6);
        assert!(HypothesisModel::new(vec![a.clone(), b], vec![a.clone()]).is_err());
        let c3 = DistributionClass::new(Pmf::uniform(3), 1.0);
        let c2 = DistributionClass::new(Pmf::uniform(2), 1.0);
        assert!(HypothesisModel::new(vec![c3], vec![c2]).is_err());
    }

    #[test]
    fn aligned_classes_refine_both_partitions() {
        let c = |a: f64, w: f64| DistributionClass::new(pmf(&[a, 1.0 - a]), w);
        let model = HypothesisModel::new(
            vec![c(0.2, 0.25), c(0.4, 0.75)],
            vec![c(0.6, 0.5), c(0.8, 0.5)],
        )
        .unwrap();
        let (a0, a1) = model.aligned_classes();
        let w: Vec<f64> = a0.iter().map(|c| c.weight).collect();
        assert_eq!(w.len(), 3);
        assert!((w[0] - 0.25).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15 && (w[2] - 0.5).abs() < 1e-15);
        assert_eq!(a1[0].pmf, a1[1].pmf);
        assert_eq!(a0[1].pmf, a0[2].pmf);
    }

    #[test]
    fn model_json_round_trip_and_clamp_report() {
        let text = r#"{"m": 2, "h0": [{"pmf": [0.5, 0.5], "weight": 1.0}],
                       "h1": [{"pmf": [0.0, 1.0], "weight": 0.5}, {"pmf": [1.0, 0.0], "weight": 0.5}]}"#;
        let (model, report) = HypothesisModel::from_json(text).unwrap();
        assert!(report.max_correction > 0.0);
        assert_eq!(report.corrected_classes, vec!["h1[1]", "h1[2]"]);
        let (again, _) = HypothesisModel::from_json(&model.to_json()).unwrap();
        assert_eq!(again, model);
        let bad = r#"{"m": 3, "h0": [{"pmf": [0.5, 0.5], "weight": 1.0}], "h1": []}"#;
        assert!(HypothesisModel::from_json(bad).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_near_degenerate() {
        let model = HypothesisModel::iid(pmf(&[1.0, 0.0, 0.0]), Pmf::uniform(3)).unwrap();
        let (x, t) = sample(&model, Hypothesis::H0, 50, &mut trial_rng(3, 0)).unwrap();
        assert_eq!(t.counts(), &[50, 0, 0]);
        assert_eq!(TypeVector::from_symbols(&x, 3).unwrap(), t);
        let a = sample(&model, Hypothesis::H1, 40, &mut trial_rng(9, 4)).unwrap();
        let b = sample(&model, Hypothesis::H1, 40, &mut trial_rng(9, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_type_converges_to_average() {
        let c = |a: f64| DistributionClass::new(pmf(&[a, 1.0 - a]), 0.5);
        let model = HypothesisModel::new(vec![c(0.5), c(0.3)], vec![c(0.1), c(0.9)]).unwrap();
        let (_, t) = sample(&model, Hypothesis::H0, 100_000, &mut trial_rng(2024, 0)).unwrap();
        let f = t.frequencies();
        assert!((f[0] - 0.4).abs() < 0.01 && (f[1] - 0.6).abs() < 0.01, "{f:?}");
    }

    fn arb_pmf(m: usize) -> impl Strategy<Value = Pmf> {
        proptest::collection::vec(0.01f64..1.0, m).prop_map(|v| Pmf::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn type_vector_is_permutation_invariant(
            x in proptest::collection::vec(0usize..4, 0..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut y = x.clone();
            y.shuffle(&mut trial_rng(seed, 0));
            prop_assert_eq!(type_vector(&x, 4).unwrap(), type_vector(&y, 4).unwrap());
        }

        #[test]
        fn kl_is_nonnegative(a in arb_pmf(4), b in arb_pmf(4)) {
            let d = kl_divergence(&a, &b).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!(kl_divergence(&a, &a).unwrap().abs() < 1e-15);
            if a.probs().iter().zip(b.probs()).any(|(x, y)| (x - y).abs() > 1e-6) {
                prop_assert!(d > 0.0);
            }
        }

        #[test]
        fn average_is_valid_pmf(
            ps in proptest::collection::vec(arb_pmf(3), 1..6),
            raw_w in proptest::collection::vec(0.05f64..1.0, 6),
        ) {
            let total: f64 = raw_w[..ps.len()].iter().sum();
            let classes: Vec<_> = ps.iter().zip(&raw_w).map(|(p, w)| DistributionClass::new(p.clone(), w / total)).collect();
            let avg = average_pmf(&classes).unwrap();
            prop_assert!((avg.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(avg.probs().iter().all(|&p| p > 0.0));
        }
    }
}
