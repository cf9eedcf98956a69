//! Log-likelihood trellises and the implicit augmented trellis used by the
//! assignment solvers.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::probability::{Hypothesis, HypothesisModel, Pmf, TypeVector};

/// `m x n` matrix whose entry `(k, i)` is the log-probability of symbol `k`
/// at index `i`. Stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikMatrix {
    m: usize,
    n: usize,
    values: Vec<f64>,
}

const COLUMN_TOLERANCE: f64 = 1e-9;

impl LogLikMatrix {
    /// Builds a trellis from row-major values, checking that every column is
    /// the log of a PMF.
    pub fn from_rows(m: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * n {
            return Err(Error::domain(format!(
                "expected {} trellis entries for a {m} x {n} trellis, got {}",
                m * n,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "trellis entry ({}, {}) is not finite",
                pos / n.max(1) + 1,
                pos % n.max(1) + 1
            )));
        }
        let out = LogLikMatrix { m, n, values };
        for i in 0..n {
            let mass: f64 = (0..m).map(|k| out.get(k, i).exp()).sum();
            if (mass - 1.0).abs() > COLUMN_TOLERANCE {
                return Err(Error::domain(format!(
                    "trellis column {} exponentiates to total mass {mass}",
                    i + 1
                )));
            }
        }
        Ok(out)
    }

    /// Arbitrary finite benefit matrix, without the per-column normalization
    /// check. Used to pose general assignment instances.
    pub fn from_benefits(m: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * n {
            return Err(Error::domain(format!("expected {} entries, got {}", m * n, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("benefit entries must be finite"));
        }
        Ok(LogLikMatrix { m, n, values })
    }

    /// One column per PMF.
    pub fn from_columns(columns: &[&Pmf]) -> Result<Self> {
        let m = columns
            .first()
            .map(|p| p.alphabet_size())
            .ok_or_else(|| Error::domain("a trellis needs at least one column"))?;
        if columns.iter().any(|p| p.alphabet_size() != m) {
            return Err(Error::domain("trellis columns have different alphabet sizes"));
        }
        let n = columns.len();
        let mut values = vec![0.0; m * n];
        for (i, p) in columns.iter().enumerate() {
            for k in 0..m {
                values[k * n + i] = p.get(k).ln();
            }
        }
        Ok(LogLikMatrix { m, n, values })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, symbol: usize, column: usize) -> f64 {
        self.values[symbol * self.n + column]
    }

    #[inline]
    pub fn row(&self, symbol: usize) -> &[f64] {
        &self.values[symbol * self.n..(symbol + 1) * self.n]
    }

    /// CSV dump: `m` lines of `n` values, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for k in 0..self.m {
            for (i, v) in self.row(k).iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`LogLikMatrix::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut m = 0;
        let mut n = None;
        for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
            let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::domain(format!("trellis CSV line {}: {e}", m + 1)))?;
            if *n.get_or_insert(row.len()) != row.len() {
                return Err(Error::domain(format!("trellis CSV line {} has {} fields", m + 1, row.len())));
            }
            values.extend(row);
            m += 1;
        }
        Self::from_rows(m, n.unwrap_or(0), values)
    }
}

/// Trellis of marginal log-likelihoods under `h` for sample size `n`.
pub fn build_loglik(model: &HypothesisModel, h: Hypothesis, n: usize) -> Result<LogLikMatrix> {
    if n == 0 {
        return Err(Error::config("sample size must be positive"));
    }
    LogLikMatrix::from_columns(&model.marginals(h, n)?)
}

/// One state per trellis column (0-based symbols).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    pub states: Vec<usize>,
}

impl Path {
    pub fn new(states: Vec<usize>) -> Self {
        Path { states }
    }

    pub fn from_one_based(states: &[usize]) -> Self {
        Path { states: states.iter().map(|s| s - 1).collect() }
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.states.iter().map(|s| s + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Sum of the trellis entries visited by `path`.
pub fn path_value(matrix: &LogLikMatrix, path: &Path) -> f64 {
    assert_eq!(path.len(), matrix.cols(), "path length must equal the trellis width");
    path.states.iter().enumerate().map(|(i, &k)| matrix.get(k, i)).sum()
}

/// True when the per-symbol counts of `path` equal the type `t`.
pub fn compatible(path: &Path, t: &TypeVector) -> bool {
    if path.len() != t.n() {
        return false;
    }
    let mut counts = vec![0usize; t.alphabet_size()];
    for &s in &path.states {
        match counts.get_mut(s) {
            Some(c) => *c += 1,
            None => return false,
        }
    }
    counts == t.counts()
}

/// The `n x n` augmented trellis in which row `k` of `base` is repeated
/// `multiplicities[k]` times, kept implicit.
///
/// Rows of the augmented trellis are "persons", columns are "objects".
#[derive(Debug, Clone)]
pub struct RowGroupedBenefit<'a> {
    base: &'a LogLikMatrix,
    multiplicities: Vec<usize>,
    group_start: Vec<usize>,
    group_of_person: Vec<usize>,
}

impl<'a> RowGroupedBenefit<'a> {
    pub fn new(base: &'a LogLikMatrix, multiplicities: Vec<usize>) -> Result<Self> {
        if multiplicities.len() != base.rows() {
            return Err(Error::domain(format!(
                "{} multiplicities for a trellis with {} rows",
                multiplicities.len(),
                base.rows()
            )));
        }
        let total: usize = multiplicities.iter().sum();
        if total != base.cols() {
            return Err(Error::domain(format!(
                "multiplicities sum to {total} but the trellis has {} columns; \
                 the augmented trellis must be square",
                base.cols()
            )));
        }
        let mut group_start = Vec::with_capacity(multiplicities.len() + 1);
        let mut group_of_person = Vec::with_capacity(total);
        let mut acc = 0;
        for (k, &c) in multiplicities.iter().enumerate() {
            group_start.push(acc);
            group_of_person.extend(std::iter::repeat_n(k, c));
            acc += c;
        }
        group_start.push(acc);
        Ok(RowGroupedBenefit { base, multiplicities, group_start, group_of_person })
    }

    pub fn from_type(base: &'a LogLikMatrix, t: &TypeVector) -> Result<Self> {
        Self::new(base, t.counts().to_vec())
    }

    pub fn base(&self) -> &LogLikMatrix {
        self.base
    }

    pub fn size(&self) -> usize {
        self.base.cols()
    }

    pub fn groups(&self) -> usize {
        self.multiplicities.len()
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    /// Persons `start..end` belonging to `group`.
    pub fn persons_of(&self, group: usize) -> std::ops::Range<usize> {
        self.group_start[group]..self.group_start[group + 1]
    }

    #[inline]
    pub fn group_of(&self, person: usize) -> usize {
        self.group_of_person[person]
    }

    #[inline]
    pub fn benefit(&self, person: usize, object: usize) -> f64 {
        self.base.get(self.group_of_person[person], object)
    }

    /// Explicit `n x n` matrix, for testing and small instances.
    pub fn materialize(&self) -> Vec<Vec<f64>> {
        (0..self.size())
            .map(|p| (0..self.size()).map(|o| self.benefit(p, o)).collect())
            .collect()
    }

    /// Path induced by an assignment: column `o` takes the state of the
    /// person assigned to it.
    pub fn induced_path(&self, object_of_person: &[usize]) -> Path {
        let mut states = vec![0; self.size()];
        for (person, &object) in object_of_person.iter().enumerate() {
            states[object] = self.group_of(person);
        }
        Path { states }
    }

    /// An assignment realizing `path`: the persons of each group take that
    /// group's columns in increasing column order.
    pub fn assignment_for(&self, path: &Path) -> Vec<usize> {
        let mut next: Vec<usize> = self.group_start[..self.groups()].to_vec();
        let mut out = vec![0; self.size()];
        for (object, &k) in path.states.iter().enumerate() {
            out[next[k]] = object;
            next[k] += 1;
        }
        out
    }
}
