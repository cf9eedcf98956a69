//! Seeded Monte Carlo estimation of ROC curves, empirical error exponents
//! and detector run times.
//!
//! Trial `k` under hypothesis `h` draws from the RNG stream `2k + h` of the
//! run seed, so the output does not depend on how trials are scheduled over
//! threads. All detectors of a run see the same samples.

use std::fmt;
use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use statrs::function::beta::inv_beta_reg;

use crate::assignment::AuctionConfig;
use crate::detectors::{glrt, labeled_llr, PathSearch, UlrDetector};
use crate::error::{Error, Result};
use crate::probability::{average_pmf, Hypothesis, HypothesisModel, Sampler, TypeVector};
use crate::rng::trial_rng;
use crate::trellis::{build_loglik, LogLikMatrix};

pub const MIN_RUNS: usize = 100;
pub const MIN_REPS: usize = 100;
pub const CONFIDENCE_LEVEL: f64 = 0.95;
/// Calls per timing sample in [`bench`].
pub const BENCH_BATCH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    Labeled,
    Ulr,
    DetectorA,
    DetectorB,
    Auction,
    Hungarian,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::Labeled,
        DetectorKind::Ulr,
        DetectorKind::DetectorA,
        DetectorKind::DetectorB,
        DetectorKind::Auction,
        DetectorKind::Hungarian,
    ];

    pub fn id(self) -> &'static str {
        match self {
            DetectorKind::Labeled => "labeled",
            DetectorKind::Ulr => "ulr",
            DetectorKind::DetectorA => "detA",
            DetectorKind::DetectorB => "detB",
            DetectorKind::Auction => "auction",
            DetectorKind::Hungarian => "hungarian",
        }
    }

    /// Parses a comma-separated list such as `ulr,detA,detB`.
    pub fn parse_list(s: &str) -> Result<Vec<DetectorKind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let kind = part.parse()?;
            if !out.contains(&kind) {
                out.push(kind);
            }
        }
        if out.is_empty() {
            return Err(Error::config("detectors: the list is empty"));
        }
        Ok(out)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::config(format!(
                    "detectors: unknown detector '{s}', expected one of labeled, ulr, detA, detB, auction, hungarian"
                ))
            })
    }
}

/// Everything a detector needs at a fixed sample size, built once per run.
#[derive(Debug, Clone)]
pub struct DetectorBank {
    n: usize,
    u: LogLikMatrix,
    v: LogLikMatrix,
    ulr: UlrDetector,
    auction: AuctionConfig,
}

impl DetectorBank {
    pub fn new(model: &HypothesisModel, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("n: must be positive"));
        }
        let p_bar = average_pmf(model.classes(Hypothesis::H1))?;
        let q_bar = average_pmf(model.classes(Hypothesis::H0))?;
        Ok(DetectorBank {
            n,
            u: build_loglik(model, Hypothesis::H1, n)?,
            v: build_loglik(model, Hypothesis::H0, n)?,
            ulr: UlrDetector::new(&p_bar, &q_bar)?,
            auction: AuctionConfig::for_alphabet(model.alphabet_size()),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn trellis(&self, h: Hypothesis) -> &LogLikMatrix {
        match h {
            Hypothesis::H0 => &self.v,
            Hypothesis::H1 => &self.u,
        }
    }

    /// Statistic of `kind`; only the labeled detector reads `x`, the others
    /// use the type `t` of `x`.
    pub fn statistic(&self, kind: DetectorKind, x: &[usize], t: &TypeVector) -> Result<f64> {
        let search = match kind {
            DetectorKind::Labeled => return Ok(labeled_llr(x, &self.u, &self.v)),
            DetectorKind::Ulr => return self.ulr.statistic(t),
            DetectorKind::DetectorA => PathSearch::DetectorA,
            DetectorKind::DetectorB => PathSearch::DetectorB,
            DetectorKind::Auction => PathSearch::Auction(self.auction),
            DetectorKind::Hungarian => PathSearch::Hungarian,
        };
        Ok(glrt(t, &self.u, &self.v, &search)?.statistic)
    }
}

/// Statistics of every detector on every trial, `[detector][trial]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub detectors: Vec<DetectorKind>,
    pub runs: usize,
    pub h0: Vec<Vec<f64>>,
    pub h1: Vec<Vec<f64>>,
}

fn check_runs(runs: usize) -> Result<()> {
    if runs < MIN_RUNS {
        return Err(Error::config(format!("runs: at least {MIN_RUNS} are required, got {runs}")));
    }
    Ok(())
}

fn trial_stream(trial: usize, h: Hypothesis) -> u64 {
    ((trial as u64) << 1) | h.index() as u64
}

fn simulate_hypothesis(
    model: &HypothesisModel,
    bank: &DetectorBank,
    detectors: &[DetectorKind],
    h: Hypothesis,
    runs: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let sampler = Sampler::new(model, h, bank.n())?;
    let per_trial = (0..runs)
        .into_par_iter()
        .map_init(Vec::new, |labels, trial| {
            let mut rng = trial_rng(seed, trial_stream(trial, h));
            let t = sampler.sample_into(&mut rng, labels);
            detectors.iter().map(|&d| bank.statistic(d, labels, &t)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok((0..detectors.len()).map(|d| per_trial.iter().map(|row| row[d]).collect()).collect())
}

/// Draws `runs` samples under each hypothesis and evaluates every detector.
pub fn simulate(
    model: &HypothesisModel,
    n: usize,
    detectors: &[DetectorKind],
    runs: usize,
    seed: u64,
) -> Result<Simulation> {
    check_runs(runs)?;
    let bank = DetectorBank::new(model, n)?;
    Ok(Simulation {
        detectors: detectors.to_vec(),
        runs,
        h0: simulate_hypothesis(model, &bank, detectors, Hypothesis::H0, runs, seed)?,
        h1: simulate_hypothesis(model, &bank, detectors, Hypothesis::H1, runs, seed)?,
    })
}

/// Two-sided Clopper-Pearson interval for `k` successes out of `trials`.
pub fn clopper_pearson(k: usize, trials: usize, level: f64) -> (f64, f64) {
    assert!(k <= trials && trials > 0, "need 0 <= k <= trials and trials > 0");
    let tail = (1.0 - level) / 2.0;
    let (kf, nf) = (k as f64, trials as f64);
    let lo = if k == 0 { 0.0 } else { inv_beta_reg(kf, nf - kf + 1.0, tail) };
    let hi = if k == trials { 1.0 } else { inv_beta_reg(kf + 1.0, nf - kf, 1.0 - tail) };
    (lo, hi)
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_std_error(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Memoized Clopper-Pearson intervals for a fixed number of trials.
struct IntervalCache {
    trials: usize,
    cache: Vec<Option<(f64, f64)>>,
}

impl IntervalCache {
    fn new(trials: usize) -> Self {
        IntervalCache { trials, cache: vec![None; trials + 1] }
    }

    fn get(&mut self, k: usize) -> (f64, f64) {
        let trials = self.trials;
        *self.cache[k].get_or_insert_with(|| clopper_pearson(k, trials, CONFIDENCE_LEVEL))
    }
}

/// `# key: value` lines: the writer's own fields, then the caller's entries
/// whose keys the writer did not already emit.
fn metadata_header(own: &[(&str, String)], extra: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in own {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    for (k, v) in extra {
        if !own.iter().any(|(o, _)| o == k) {
            out.push_str(&format!("# {k}: {v}\n"));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocPoint {
    /// H1 is declared when the statistic exceeds this value.
    pub threshold: f64,
    pub type1: f64,
    pub type2: f64,
    pub type1_ci: (f64, f64),
    pub type2_ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub detector: DetectorKind,
    pub n: usize,
    pub runs: usize,
    pub seed: u64,
    /// Sorted by increasing type-I error.
    pub points: Vec<RocPoint>,
    /// The statistic took a single value over all trials.
    pub degenerate: bool,
}

impl RocCurve {
    /// Empirical ROC from the statistics observed under each hypothesis,
    /// sweeping the threshold over every distinct observed value.
    pub fn from_statistics(
        detector: DetectorKind,
        n: usize,
        seed: u64,
        h0: &[f64],
        h1: &[f64],
    ) -> Result<RocCurve> {
        if h0.len() != h1.len() || h0.is_empty() {
            return Err(Error::domain("need the same positive number of trials under each hypothesis"));
        }
        if h0.iter().chain(h1).any(|s| s.is_nan()) {
            return Err(Error::solver(format!("{detector} produced a NaN statistic")));
        }
        let runs = h0.len();
        let sort = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v
        };
        let (s0, s1) = (sort(h0), sort(h1));
        let mut thresholds: Vec<f64> = s0.iter().chain(&s1).copied().collect();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let mut cache = IntervalCache::new(runs);
        let points = thresholds
            .iter()
            .map(|&tau| {
                let false_alarms = runs - s0.partition_point(|&s| s <= tau);
                let misses = s1.partition_point(|&s| s <= tau);
                RocPoint {
                    threshold: tau,
                    type1: false_alarms as f64 / runs as f64,
                    type2: misses as f64 / runs as f64,
                    type1_ci: cache.get(false_alarms),
                    type2_ci: cache.get(misses),
                }
            })
            .collect();
        Ok(RocCurve { detector, n, runs, seed, points, degenerate: thresholds.len() == 1 })
    }

    /// Operating point whose type-I error is closest to `target`, the
    /// smaller type-I error on ties.
    pub fn point_near(&self, target: f64) -> &RocPoint {
        self.points
            .iter()
            .min_by(|a, b| (a.type1 - target).abs().total_cmp(&(b.type1 - target).abs()))
            .expect("a ROC curve has at least one point")
    }

    /// CSV with `#`-prefixed metadata lines followed by a header row.
    pub fn to_csv(&self, metadata: &[(String, String)]) -> String {
        let mut out = metadata_header(
            &[
                ("detector", self.detector.to_string()),
                ("n", self.n.to_string()),
                ("runs", self.runs.to_string()),
                ("seed", self.seed.to_string()),
                ("degenerate", self.degenerate.to_string()),
            ],
            metadata,
        );
        out.push_str("threshold,type1,type2,type1_ci_low,type1_ci_high,type2_ci_low,type2_ci_high\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.threshold, p.type1, p.type2, p.type1_ci.0, p.type1_ci.1, p.type2_ci.0, p.type2_ci.1
            ));
        }
        out
    }
}

/// ROC curves of several detectors sharing the same samples.
pub fn roc_all(
    model: &HypothesisModel,
    n: usize,
    detectors: &[DetectorKind],
    runs: usize,
    seed: u64,
) -> Result<Vec<RocCurve>> {
    let sim = simulate(model, n, detectors, runs, seed)?;
    detectors
        .iter()
        .enumerate()
        .map(|(d, &kind)| RocCurve::from_statistics(kind, n, seed, &sim.h0[d], &sim.h1[d]))
        .collect()
}

pub fn roc(model: &HypothesisModel, n: usize, detector: DetectorKind, runs: usize, seed: u64) -> Result<RocCurve> {
    Ok(roc_all(model, n, &[detector], runs, seed)?.remove(0))
}

/// How the decision threshold is set at each sample size. Both rules take
/// the empirical quantile of the H0 statistic that yields the requested
/// type-I error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// Fixed type-I error probability.
    TypeOneTarget(f64),
    /// Type-I error probability `exp(-n alpha)`, so that every sample size
    /// aims at the same type-I exponent `alpha`.
    TypeOneExponent(f64),
}

impl ThresholdRule {
    pub fn target(&self, n: usize) -> f64 {
        match *self {
            ThresholdRule::TypeOneTarget(p) => p,
            ThresholdRule::TypeOneExponent(alpha) => (-(n as f64) * alpha).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ThresholdRule::TypeOneTarget(p) if !(p > 0.0 && p < 1.0) => {
                Err(Error::config(format!("threshold: type-I target must lie in (0, 1), got {p}")))
            }
            ThresholdRule::TypeOneExponent(a) if !(a > 0.0 && a.is_finite()) => {
                Err(Error::config(format!("threshold: type-I exponent must be positive, got {a}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdRule::TypeOneTarget(p) => write!(f, "H0 empirical quantile at type-I target {p}"),
            ThresholdRule::TypeOneExponent(a) => write!(f, "H0 empirical quantile at type-I target exp(-n*{a})"),
        }
    }
}

/// Threshold `tau` from the sorted H0 statistics so that the fraction of H0
/// statistics above `tau` is close to `target`.
fn quantile_threshold(sorted_h0: &[f64], target: f64) -> f64 {
    let runs = sorted_h0.len();
    let idx = ((1.0 - target) * runs as f64).floor() as usize;
    sorted_h0[idx.min(runs - 1)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentEstimate {
    pub n: usize,
    pub threshold: f64,
    pub type1: f64,
    pub type2: f64,
    pub type1_ci: (f64, f64),
    pub type2_ci: (f64, f64),
    /// `-log(type1) / n`, the empirical type-I exponent.
    pub minus_log_p0_err_over_n: f64,
    /// `-log(type2) / n`, the empirical type-II exponent.
    pub minus_log_p1_err_over_n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    pub detector: DetectorKind,
    pub rule: ThresholdRule,
    pub runs: usize,
    pub seed: u64,
    pub estimates: Vec<ExponentEstimate>,
    /// Sample sizes left out, with the reason.
    pub dropped: Vec<(usize, String)>,
}

impl ExponentReport {
    pub fn to_csv(&self, metadata: &[(String, String)]) -> String {
        let mut own = vec![
            ("detector", self.detector.to_string()),
            ("runs", self.runs.to_string()),
            ("seed", self.seed.to_string()),
            ("threshold rule", self.rule.to_string()),
        ];
        let dropped: Vec<String> = self.dropped.iter().map(|(n, why)| format!("n={n}: {why}")).collect();
        own.extend(dropped.into_iter().map(|d| ("dropped", d)));
        let mut out = metadata_header(&own, metadata);
        out.push_str("n,threshold,type1,type2,type1_ci_low,type1_ci_high,type2_ci_low,type2_ci_high,alpha_hat,omega_hat\n");
        for e in &self.estimates {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                e.n,
                e.threshold,
                e.type1,
                e.type2,
                e.type1_ci.0,
                e.type1_ci.1,
                e.type2_ci.0,
                e.type2_ci.1,
                e.minus_log_p0_err_over_n,
                e.minus_log_p1_err_over_n
            ));
        }
        out
    }
}

/// Empirical error exponents of one detector at each sample size. Sample
/// sizes where either error was never observed are dropped and reported.
pub fn empirical_exponents(
    model: &HypothesisModel,
    n_list: &[usize],
    detector: DetectorKind,
    rule: ThresholdRule,
    runs: usize,
    seed: u64,
) -> Result<ExponentReport> {
    rule.validate()?;
    check_runs(runs)?;
    let mut estimates = Vec::new();
    let mut dropped = Vec::new();
    for &n in n_list {
        let sim = simulate(model, n, &[detector], runs, seed)?;
        let mut s0 = sim.h0[0].clone();
        s0.sort_by(f64::total_cmp);
        let tau = quantile_threshold(&s0, rule.target(n));
        let false_alarms = sim.h0[0].iter().filter(|&&s| s > tau).count();
        let misses = sim.h1[0].iter().filter(|&&s| s <= tau).count();
        if false_alarms == 0 || misses == 0 {
            dropped.push((
                n,
                format!("{false_alarms} false alarms and {misses} misses in {runs} runs; the exponent is too large for this budget"),
            ));
            continue;
        }
        let (type1, type2) = (false_alarms as f64 / runs as f64, misses as f64 / runs as f64);
        estimates.push(ExponentEstimate {
            n,
            threshold: tau,
            type1,
            type2,
            type1_ci: clopper_pearson(false_alarms, runs, CONFIDENCE_LEVEL),
            type2_ci: clopper_pearson(misses, runs, CONFIDENCE_LEVEL),
            minus_log_p0_err_over_n: -type1.ln() / n as f64,
            minus_log_p1_err_over_n: -type2.ln() / n as f64,
        });
    }
    Ok(ExponentReport { detector, rule, runs, seed, estimates, dropped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub detector: DetectorKind,
    pub hypothesis: Hypothesis,
    /// Median time of one call, in nanoseconds.
    pub median_ns: f64,
    /// Median divided by the ULR median under the same hypothesis.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub n: usize,
    pub m: usize,
    pub reps: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub fn normalized(&self, detector: DetectorKind, h: Hypothesis) -> Option<f64> {
        self.rows.iter().find(|r| r.detector == detector && r.hypothesis == h).map(|r| r.normalized)
    }

    pub fn to_csv(&self, metadata: &[(String, String)]) -> String {
        let mut out = metadata_header(
            &[("n", self.n.to_string()), ("m", self.m.to_string()), ("reps", self.reps.to_string())],
            metadata,
        );
        out.push_str("detector,hypothesis,median_ns,normalized_to_ulr\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.detector, r.hypothesis, r.median_ns, r.normalized));
        }
        out
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Median wall-clock time per call of each detector, normalized to ULR.
/// ULR is always measured. Runs serially on the calling thread.
pub fn bench(
    model: &HypothesisModel,
    n: usize,
    detectors: &[DetectorKind],
    reps: usize,
    seed: u64,
) -> Result<BenchTable> {
    if reps < MIN_REPS {
        return Err(Error::config(format!("reps: at least {MIN_REPS} are required, got {reps}")));
    }
    let bank = DetectorBank::new(model, n)?;
    let mut kinds = vec![DetectorKind::Ulr];
    kinds.extend(detectors.iter().copied().filter(|&d| d != DetectorKind::Ulr));
    let mut rows = Vec::new();
    for h in [Hypothesis::H0, Hypothesis::H1] {
        let sampler = Sampler::new(model, h, n)?;
        let mut timings = vec![Vec::with_capacity(reps); kinds.len()];
        let mut labels = Vec::new();
        for rep in 0..reps {
            let mut rng = trial_rng(seed, trial_stream(rep, h));
            let t = sampler.sample_into(&mut rng, &mut labels);
            for (slot, &kind) in kinds.iter().enumerate() {
                let start = Instant::now();
                for _ in 0..BENCH_BATCH {
                    black_box(bank.statistic(kind, black_box(&labels), black_box(&t))?);
                }
                timings[slot].push(start.elapsed().as_nanos() as f64 / BENCH_BATCH as f64);
            }
        }
        let medians: Vec<f64> = timings.into_iter().map(median).collect();
        let reference = medians[0].max(f64::MIN_POSITIVE);
        for (&kind, &med) in kinds.iter().zip(&medians) {
            rows.push(BenchRow { detector: kind, hypothesis: h, median_ns: med, normalized: med / reference });
        }
    }
    Ok(BenchTable { n, m: model.alphabet_size(), reps, rows })
}
