//! Decision statistics for the unlabeled test and the labeled benchmark.
//!
//! Every unlabeled statistic depends on the data only through the type
//! vector. Statistics are on the log-likelihood-ratio scale; H1 is declared
//! when the statistic exceeds the threshold.

use serde::Serialize;

use crate::assignment::{auction_sp, hungarian, AuctionConfig};
use crate::error::{Error, Result};
use crate::probability::{Hypothesis, Pmf, TypeVector};
use crate::trellis::{path_value, LogLikMatrix, Path, RowGroupedBenefit};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput {
    pub statistic: f64,
    /// Label estimate under H1, for path-producing detectors.
    pub path_h1: Option<Path>,
    /// Label estimate under H0, for path-producing detectors.
    pub path_h0: Option<Path>,
}

#[derive(Serialize)]
struct DetectorOutputJson {
    statistic: f64,
    path_h1: Option<Vec<usize>>,
    path_h0: Option<Vec<usize>>,
}

impl DetectorOutput {
    /// JSON with 1-based symbols in the paths.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DetectorOutputJson {
            statistic: self.statistic,
            path_h1: self.path_h1.as_ref().map(Path::to_one_based),
            path_h0: self.path_h0.as_ref().map(Path::to_one_based),
        })
        .expect("detector output serializes")
    }
}

/// H1 iff `statistic > threshold`.
pub fn decide(statistic: f64, threshold: f64) -> Hypothesis {
    if statistic > threshold {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}

/// Precomputed per-symbol log ratios `log(p_bar / q_bar)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UlrDetector {
    log_ratio: Vec<f64>,
}

impl UlrDetector {
    pub fn new(p_bar: &Pmf, q_bar: &Pmf) -> Result<Self> {
        if p_bar.alphabet_size() != q_bar.alphabet_size() {
            return Err(Error::domain("p_bar and q_bar have different alphabet sizes"));
        }
        let log_ratio = p_bar.probs().iter().zip(q_bar.probs()).map(|(p, q)| (p / q).ln()).collect();
        Ok(UlrDetector { log_ratio })
    }

    pub fn statistic(&self, t: &TypeVector) -> Result<f64> {
        if t.n() == 0 {
            return Err(Error::domain("the ULR statistic needs at least one observation"));
        }
        if t.alphabet_size() != self.log_ratio.len() {
            return Err(Error::domain("type vector and PMFs have different alphabet sizes"));
        }
        let n = t.n() as f64;
        Ok(t.counts().iter().zip(&self.log_ratio).map(|(&c, r)| c as f64 / n * r).sum())
    }
}

/// Unlabeled log-likelihood ratio: the iid statistic evaluated with the
/// averaged PMFs, `sum_x t(x) log(p_bar(x) / q_bar(x))`.
pub fn ulr(t: &TypeVector, p_bar: &Pmf, q_bar: &Pmf) -> Result<DetectorOutput> {
    let statistic = UlrDetector::new(p_bar, q_bar)?.statistic(t)?;
    Ok(DetectorOutput { statistic, path_h1: None, path_h0: None })
}

/// Optimal statistic when the labels are known: `sum_i u[x_i, i] - v[x_i, i]`.
pub fn labeled_llr(x: &[usize], u: &LogLikMatrix, v: &LogLikMatrix) -> f64 {
    assert_eq!(x.len(), u.cols(), "labeled vector length must equal the trellis width");
    assert_eq!(x.len(), v.cols(), "labeled vector length must equal the trellis width");
    x.iter().enumerate().map(|(i, &k)| u.get(k, i) - v.get(k, i)).sum()
}

fn check_shape(t: &TypeVector, trellis: &LogLikMatrix) {
    assert_eq!(t.alphabet_size(), trellis.rows(), "type and trellis alphabets differ");
    assert_eq!(t.n(), trellis.cols(), "type size must equal the trellis width");
}

/// Greedy path search processing the sorted observations in ascending
/// symbol order: each takes the unblocked column with the largest entry in
/// its row (lowest column on ties), which is then blocked.
pub fn detector_a(t: &TypeVector, trellis: &LogLikMatrix) -> (Path, f64) {
    check_shape(t, trellis);
    let n = trellis.cols();
    let mut blocked = vec![false; n];
    let mut states = vec![0usize; n];
    for symbol in t.sorted_symbols() {
        let row = trellis.row(symbol);
        let mut best = usize::MAX;
        let mut best_value = f64::NEG_INFINITY;
        for (i, &v) in row.iter().enumerate() {
            if !blocked[i] && (best == usize::MAX || v > best_value) {
                best = i;
                best_value = v;
            }
        }
        blocked[best] = true;
        states[best] = symbol;
    }
    let path = Path::new(states);
    let value = path_value(trellis, &path);
    (path, value)
}

/// Minimum-modification path search.
///
/// Starts from the column-wise argmax path (lowest row on ties), pairs the
/// sorted states of that path with the sorted observations, and applies each
/// mismatched pair `a -> b` in order at the unblocked step in state `a` whose
/// entry drops the least, `L[a, i] - L[b, i]` (lowest step on ties). Modified
/// steps are blocked.
///
/// Consecutive identical pairs are applied together: `r` repetitions of
/// `a -> b` take the `r` smallest drops among the unblocked state-`a` steps,
/// which is what applying them one at a time selects.
pub fn detector_b(t: &TypeVector, trellis: &LogLikMatrix) -> (Path, f64) {
    check_shape(t, trellis);
    let (m, n) = (trellis.rows(), trellis.cols());
    let mut states = vec![0usize; n];
    for (i, s) in states.iter_mut().enumerate() {
        let mut best_value = trellis.get(0, i);
        for k in 1..m {
            let v = trellis.get(k, i);
            if v > best_value {
                best_value = v;
                *s = k;
            }
        }
    }
    // Steps grouped by their argmax state, in increasing order. An unblocked
    // step still holds its argmax state.
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, &s) in states.iter().enumerate() {
        buckets[s].push(i);
    }
    let path_counts: Vec<usize> = buckets.iter().map(Vec::len).collect();
    let runs = mismatch_runs(&path_counts, t.counts());

    let mut blocked = vec![false; n];
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (from, to, count) in runs {
        let from_row = trellis.row(from);
        let to_row = trellis.row(to);
        candidates.clear();
        candidates.extend(
            buckets[from].iter().filter(|&&i| !blocked[i]).map(|&i| (from_row[i] - to_row[i], i)),
        );
        let by_loss = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if count < candidates.len() {
            candidates.select_nth_unstable_by(count, by_loss);
        }
        for &(_, i) in &candidates[..count] {
            states[i] = to;
            blocked[i] = true;
        }
    }
    let path = Path::new(states);
    let value = path_value(trellis, &path);
    (path, value)
}

/// Pairs the sorted expansions of two count vectors position by position and
/// returns the mismatched pairs `(a, b, repetitions)` in order, merging
/// consecutive identical pairs.
fn mismatch_runs(from_counts: &[usize], to_counts: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut runs = Vec::new();
    let (mut a, mut b) = (0usize, 0usize);
    let (mut left_a, mut left_b) = (from_counts[0], to_counts[0]);
    loop {
        while left_a == 0 {
            a += 1;
            if a == from_counts.len() {
                return runs;
            }
            left_a = from_counts[a];
        }
        while left_b == 0 {
            b += 1;
            left_b = to_counts[b];
        }
        let k = left_a.min(left_b);
        if a != b {
            runs.push((a, b, k));
        }
        left_a -= k;
        left_b -= k;
    }
}

/// Path search used by [`glrt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathSearch {
    Hungarian,
    Auction(AuctionConfig),
    DetectorA,
    DetectorB,
}

/// Best (or greedy) compatible path on one trellis.
pub fn search_path(t: &TypeVector, trellis: &LogLikMatrix, search: &PathSearch) -> Result<(Path, f64)> {
    if t.alphabet_size() != trellis.rows() || t.n() != trellis.cols() {
        return Err(Error::domain(format!(
            "type over {} symbols with n = {} does not fit a {} x {} trellis",
            t.alphabet_size(),
            t.n(),
            trellis.rows(),
            trellis.cols()
        )));
    }
    match search {
        PathSearch::DetectorA => Ok(detector_a(t, trellis)),
        PathSearch::DetectorB => Ok(detector_b(t, trellis)),
        PathSearch::Hungarian | PathSearch::Auction(_) => {
            let rg = RowGroupedBenefit::from_type(trellis, t)?;
            let result = match search {
                PathSearch::Auction(cfg) => auction_sp(&rg, cfg)?,
                _ => hungarian(&rg)?,
            };
            let path = result.path(&rg);
            Ok((path, result.total_benefit))
        }
    }
}

/// Generalized likelihood ratio: the best compatible path is searched
/// independently on the H1 trellis `u` and the H0 trellis `v`, and the
/// statistic is the difference of the two path values.
pub fn glrt(t: &TypeVector, u: &LogLikMatrix, v: &LogLikMatrix, search: &PathSearch) -> Result<DetectorOutput> {
    let (path_h1, value_h1) = search_path(t, u, search)?;
    let (path_h0, value_h0) = search_path(t, v, search)?;
    Ok(DetectorOutput {
        statistic: value_h1 - value_h0,
        path_h1: Some(path_h1),
        path_h0: Some(path_h0),
    })
}
