//! Asymptotic error exponents.
//!
//! The log-moment generating function of a PMF `r` is
//! `phi(lambda; r) = log sum_x r(x) exp(lambda(x))`, with `lambda` pinned to
//! zero at the reference symbol (the last one). `psi` averages `phi` over
//! the distribution classes of a hypothesis and its Legendre transform `Psi`
//! is the rate function of the type vector. The unlabeled exponent is
//! `Omega(alpha) = min { Psi_H1(omega) : Psi_H0(omega) <= alpha }`; the
//! labeled exponent solves the same program class by class with KL
//! divergences.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::probability::{average_pmf, kl_slices, DistributionClass, Hypothesis, HypothesisModel, Pmf};

/// Gradient-norm tolerance of the Newton solvers.
pub const NEWTON_TOLERANCE: f64 = 1e-10;
pub const NEWTON_MAX_ITERATIONS: usize = 200;
/// Constraint residual at which the multiplier search stops.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-12;
/// Width of the multiplier bracket at which the search stops.
pub const MULTIPLIER_TOLERANCE: f64 = 1e-15;
/// Slack of the discrete monotonicity and convexity checks on curves.
pub const CURVE_SLACK: f64 = 1e-8;
pub const DEFAULT_GRID_POINTS: usize = 200;

/// Tilting vector with its last coordinate fixed to zero. Only the `m - 1`
/// free coordinates are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaVector {
    free: Vec<f64>,
}

impl LambdaVector {
    pub fn new(free: Vec<f64>) -> Self {
        LambdaVector { free }
    }

    pub fn zeros(m: usize) -> Self {
        assert!(m >= 1, "alphabet must be non-empty");
        LambdaVector { free: vec![0.0; m - 1] }
    }

    /// From a full length-`m` vector whose last entry must be zero.
    pub fn from_full(full: &[f64]) -> Result<Self> {
        match full.split_last() {
            Some((&last, free)) if last == 0.0 => Ok(LambdaVector { free: free.to_vec() }),
            Some((&last, _)) => Err(Error::domain(format!(
                "the reference coordinate must be 0, got {last}"
            ))),
            None => Err(Error::domain("empty lambda vector")),
        }
    }

    pub fn free(&self) -> &[f64] {
        &self.free
    }

    pub fn alphabet_size(&self) -> usize {
        self.free.len() + 1
    }

    pub fn full(&self) -> Vec<f64> {
        let mut v = self.free.clone();
        v.push(0.0);
        v
    }

    /// Index of the pinned coordinate.
    pub fn reference(&self) -> usize {
        self.free.len()
    }

    fn scaled(&self, s: f64) -> LambdaVector {
        LambdaVector { free: self.free.iter().map(|x| x * s).collect() }
    }
}

fn check_dims(lam: &LambdaVector, r: &Pmf) {
    assert_eq!(lam.alphabet_size(), r.alphabet_size(), "lambda and PMF alphabets differ");
}

/// Returns `(phi, tilted)` where `tilted(x) = r(x) e^{lambda(x) - phi}`.
fn tilt(lam: &LambdaVector, r: &Pmf) -> (f64, Vec<f64>) {
    check_dims(lam, r);
    let exponents: Vec<f64> = r
        .probs()
        .iter()
        .enumerate()
        .map(|(x, p)| p.ln() + lam.free.get(x).copied().unwrap_or(0.0))
        .collect();
    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = exponents.iter().map(|a| (a - top).exp()).sum();
    let value = top + sum.ln();
    let tilted = exponents.iter().map(|a| (a - value).exp()).collect();
    (value, tilted)
}

pub fn phi(lam: &LambdaVector, r: &Pmf) -> f64 {
    tilt(lam, r).0
}

/// The tilted PMF `r e^lambda / sum(r e^lambda)`, all `m` entries.
pub fn grad_phi(lam: &LambdaVector, r: &Pmf) -> Vec<f64> {
    tilt(lam, r).1
}

fn covariance(tilted: &[f64]) -> DMatrix<f64> {
    let k = tilted.len() - 1;
    DMatrix::from_fn(k, k, |i, j| {
        let d = if i == j { tilted[i] } else { 0.0 };
        d - tilted[i] * tilted[j]
    })
}

/// Hessian over the free coordinates: `diag(w) - w w^T` with `w` the first
/// `m - 1` tilted probabilities.
pub fn hess_phi(lam: &LambdaVector, r: &Pmf) -> DMatrix<f64> {
    covariance(&tilt(lam, r).1)
}

struct PsiEval {
    value: f64,
    grad: Vec<f64>,
    hess: DMatrix<f64>,
}

fn psi_eval(lam: &LambdaVector, classes: &[DistributionClass], with_hess: bool) -> PsiEval {
    let m = lam.alphabet_size();
    let mut value = 0.0;
    let mut grad = vec![0.0; m];
    let mut hess = DMatrix::zeros(if with_hess { m - 1 } else { 0 }, if with_hess { m - 1 } else { 0 });
    for c in classes {
        let (v, w) = tilt(lam, &c.pmf);
        value += c.weight * v;
        for (g, t) in grad.iter_mut().zip(&w) {
            *g += c.weight * t;
        }
        if with_hess {
            hess += covariance(&w) * c.weight;
        }
    }
    PsiEval { value, grad, hess }
}

/// Weighted average of `phi` over the classes.
pub fn psi(lam: &LambdaVector, classes: &[DistributionClass]) -> f64 {
    classes.iter().map(|c| c.weight * phi(lam, &c.pmf)).sum()
}

/// Weighted average of the tilted PMFs, all `m` entries.
pub fn grad_psi(lam: &LambdaVector, classes: &[DistributionClass]) -> Vec<f64> {
    psi_eval(lam, classes, false).grad
}

pub fn hess_psi(lam: &LambdaVector, classes: &[DistributionClass]) -> DMatrix<f64> {
    psi_eval(lam, classes, true).hess
}

/// Damped Newton minimization of a smooth strictly convex function.
/// `eval(x)` returns value, gradient and Hessian.
fn newton_minimize<F>(mut x: Vec<f64>, what: &str, eval: F) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64]) -> (f64, DVector<f64>, DMatrix<f64>),
{
    let (mut f, mut g, mut h) = eval(&x);
    for iteration in 0..NEWTON_MAX_ITERATIONS {
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::solver(format!("{what}: non-finite objective at iteration {iteration}")));
        }
        if g.norm() < NEWTON_TOLERANCE {
            return Ok((x, iteration));
        }
        let direction = match h.clone().cholesky() {
            Some(chol) => -chol.solve(&g),
            None => -g.clone(),
        };
        let slope = g.dot(&direction);
        let mut step = 1.0;
        loop {
            let candidate: Vec<f64> = x.iter().zip(direction.iter()).map(|(a, d)| a + step * d).collect();
            let (fc, gc, hc) = eval(&candidate);
            let armijo = fc <= f + 1e-4 * step * slope + 1e-15 * (1.0 + f.abs());
            // Near the optimum the objective can be flat to rounding; a
            // shrinking gradient is then the more reliable acceptance test.
            let gradient_drop = gc.norm() < (1.0 - 1e-4 * step) * g.norm();
            if fc.is_finite() && (armijo || gradient_drop) {
                x = candidate;
                (f, g, h) = (fc, gc, hc);
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return Err(Error::solver(format!(
                    "{what}: line search stalled with gradient norm {:.3e}",
                    g.norm()
                )));
            }
        }
    }
    if g.norm() < NEWTON_TOLERANCE {
        return Ok((x, NEWTON_MAX_ITERATIONS));
    }
    Err(Error::solver(format!(
        "{what}: no convergence in {NEWTON_MAX_ITERATIONS} iterations, gradient norm {:.3e}",
        g.norm()
    )))
}

fn check_classes(classes: &[DistributionClass], m: usize) -> Result<()> {
    if classes.is_empty() {
        return Err(Error::domain("empty class list"));
    }
    if classes.iter().any(|c| c.pmf.alphabet_size() != m) {
        return Err(Error::domain("class alphabet does not match omega"));
    }
    Ok(())
}

/// Maximizer and value of the Legendre transform.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreSolution {
    pub value: f64,
    pub lambda: LambdaVector,
    pub iterations: usize,
}

/// Log-ratio tilt mapping `reference` onto `omega`, the exact maximizer when
/// there is a single class.
fn closed_form_lambda(omega: &[f64], reference: &[f64]) -> Vec<f64> {
    let m = omega.len();
    (0..m - 1)
        .map(|x| (omega[x] * reference[m - 1] / (reference[x] * omega[m - 1])).ln())
        .collect()
}

/// `sup_lambda { sum_{x != ref} lambda(x) omega(x) - psi(lambda) }` with the
/// maximizing `lambda`.
pub fn legendre_psi_solution(omega: &Pmf, classes: &[DistributionClass]) -> Result<LegendreSolution> {
    let m = omega.alphabet_size();
    check_classes(classes, m)?;
    let w = omega.probs();
    if w.iter().any(|&v| v <= 0.0) {
        return Err(Error::domain("omega must be strictly positive"));
    }
    if m == 1 {
        return Ok(LegendreSolution { value: 0.0, lambda: LambdaVector::zeros(1), iterations: 0 });
    }
    let r_bar = average_pmf(classes)?;
    let start = closed_form_lambda(w, r_bar.probs());
    let objective = |x: &[f64]| {
        let lam = LambdaVector::new(x.to_vec());
        let e = psi_eval(&lam, classes, true);
        let linear: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
        let grad = DVector::from_iterator(m - 1, (0..m - 1).map(|i| e.grad[i] - w[i]));
        (e.value - linear, grad, e.hess)
    };
    let (x, iterations) = newton_minimize(start, "Legendre transform", objective)?;
    let lambda = LambdaVector::new(x);
    let value = legendre_value(&lambda, w, classes);
    Ok(LegendreSolution { value, lambda, iterations })
}

fn legendre_value(lam: &LambdaVector, omega: &[f64], classes: &[DistributionClass]) -> f64 {
    let linear: f64 = lam.free.iter().zip(omega).map(|(a, b)| a * b).sum();
    (linear - psi(lam, classes)).max(0.0)
}

/// Legendre transform of `psi` at `omega`. Nonnegative, zero only at the
/// averaged PMF of the classes.
pub fn legendre_psi(omega: &Pmf, classes: &[DistributionClass]) -> Result<f64> {
    Ok(legendre_psi_solution(omega, classes)?.value)
}

/// `Psi_H0(p_bar)`: beyond this type-I exponent the unlabeled exponent is zero.
pub fn unlabeled_zero_crossing(model: &HypothesisModel) -> Result<f64> {
    let p_bar = average_pmf(model.classes(Hypothesis::H1))?;
    legendre_psi(&p_bar, model.classes(Hypothesis::H0))
}

/// `Psi_H1(q_bar)`: the unlabeled exponent at `alpha = 0`.
pub fn unlabeled_at_zero(model: &HypothesisModel) -> Result<f64> {
    let q_bar = average_pmf(model.classes(Hypothesis::H0))?;
    legendre_psi(&q_bar, model.classes(Hypothesis::H1))
}

/// Point of the optimal trade-off traced by the weight `theta` in (0, 1):
/// both Legendre transforms are attained at `omega = grad psi_H1(theta nu)
/// = grad psi_H0(-(1 - theta) nu)`.
struct TradeoffPoint {
    nu: Vec<f64>,
    psi0: f64,
    psi1: f64,
}

fn tradeoff_point(model: &HypothesisModel, theta: f64, warm: Vec<f64>) -> Result<TradeoffPoint> {
    let m = model.alphabet_size();
    let p_classes = model.classes(Hypothesis::H1);
    let q_classes = model.classes(Hypothesis::H0);
    let objective = |x: &[f64]| {
        let nu = LambdaVector::new(x.to_vec());
        let e1 = psi_eval(&nu.scaled(theta), p_classes, true);
        let e0 = psi_eval(&nu.scaled(-(1.0 - theta)), q_classes, true);
        let value = e1.value / theta + e0.value / (1.0 - theta);
        let grad = DVector::from_iterator(m - 1, (0..m - 1).map(|i| e1.grad[i] - e0.grad[i]));
        let hess = e1.hess * theta + e0.hess * (1.0 - theta);
        (value, grad, hess)
    };
    let (nu, _) = newton_minimize(warm, "unlabeled exponent", objective)?;
    let lam = LambdaVector::new(nu.clone());
    let lam1 = lam.scaled(theta);
    let lam0 = lam.scaled(-(1.0 - theta));
    let omega = grad_psi(&lam1, p_classes);
    Ok(TradeoffPoint {
        psi0: legendre_value(&lam0, &omega, q_classes),
        psi1: legendre_value(&lam1, &omega, p_classes),
        nu,
    })
}

/// Bisection on a weight in (0, 1) for a curve whose constraint value
/// decreases from its maximum at 0 to 0 at 1. `eval` returns
/// `(constraint, objective)`.
fn bisect_weight<F>(alpha: f64, what: &str, mut eval: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = None;
    for _ in 0..200 {
        let theta = 0.5 * (lo + hi);
        let (constraint, objective) = eval(theta)?;
        let residual = constraint - alpha;
        best = Some(objective);
        if residual.abs() < CONSTRAINT_TOLERANCE || hi - lo < MULTIPLIER_TOLERANCE {
            return Ok(objective);
        }
        if residual > 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
    }
    best.ok_or_else(|| Error::solver(format!("{what}: multiplier search did not start")))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("alpha must be a finite nonnegative number, got {alpha}")));
    }
    Ok(())
}

/// Best type-II exponent of unlabeled detection at type-I exponent `alpha`.
/// At `alpha = 0` the continuous extension is returned.
pub fn omega_unlabeled(alpha: f64, model: &HypothesisModel) -> Result<f64> {
    check_alpha(alpha)?;
    if model.alphabet_size() == 1 {
        return Ok(0.0);
    }
    if alpha == 0.0 {
        return unlabeled_at_zero(model);
    }
    if alpha >= unlabeled_zero_crossing(model)? {
        return Ok(0.0);
    }
    let mut warm = vec![0.0; model.alphabet_size() - 1];
    bisect_weight(alpha, "unlabeled exponent", |theta| {
        let point = tradeoff_point(model, theta, warm.clone())?;
        warm = point.nu;
        Ok((point.psi0, point.psi1))
    })
}

/// Geometric interpolation `omega_c ∝ p_c^{1-theta} q_c^theta` per class,
/// returning `(sum w D(omega||q), sum w D(omega||p))`.
fn tilted_divergences(p: &[DistributionClass], q: &[DistributionClass], theta: f64) -> (f64, f64) {
    let (mut dq, mut dp) = (0.0, 0.0);
    for (pc, qc) in p.iter().zip(q) {
        let logs: Vec<f64> = pc
            .pmf
            .probs()
            .iter()
            .zip(qc.pmf.probs())
            .map(|(a, b)| (1.0 - theta) * a.ln() + theta * b.ln())
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let norm = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        let omega: Vec<f64> = logs.iter().map(|l| (l - norm).exp()).collect();
        dq += pc.weight * kl_slices(&omega, qc.pmf.probs());
        dp += pc.weight * kl_slices(&omega, pc.pmf.probs());
    }
    (dq, dp)
}

/// Best type-II exponent with labeled data at type-I exponent `alpha`.
pub fn omega_labeled(alpha: f64, model: &HypothesisModel) -> Result<f64> {
    check_alpha(alpha)?;
    let (q, p) = model.aligned_classes();
    let (d_pq, _) = tilted_divergences(&p, &q, 0.0);
    if alpha >= d_pq {
        return Ok(0.0);
    }
    if alpha == 0.0 {
        return Ok(tilted_divergences(&p, &q, 1.0).1);
    }
    bisect_weight(alpha, "labeled exponent", |theta| Ok(tilted_divergences(&p, &q, theta)))
}

/// Zero crossing of the labeled exponent, the divergence rate `D(p || q)`.
pub fn labeled_zero_crossing(model: &HypothesisModel) -> f64 {
    let (q, p) = model.aligned_classes();
    tilted_divergences(&p, &q, 0.0).0
}

/// The four comparison exponents around the unlabeled one at a given
/// `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentBounds {
    pub alpha: f64,
    pub unlabeled: f64,
    pub labeled: f64,
    /// Both hypotheses replaced by their averaged PMFs.
    pub averaged_both: f64,
    /// H1 replaced by its averaged PMF.
    pub averaged_h1: f64,
    /// H0 replaced by its averaged PMF.
    pub averaged_h0: f64,
}

impl ExponentBounds {
    pub fn compute(alpha: f64, model: &HypothesisModel) -> Result<Self> {
        let both = model.with_averaged(Hypothesis::H0).with_averaged(Hypothesis::H1);
        Ok(ExponentBounds {
            alpha,
            unlabeled: omega_unlabeled(alpha, model)?,
            labeled: omega_labeled(alpha, model)?,
            averaged_both: omega_labeled(alpha, &both)?,
            averaged_h1: omega_unlabeled(alpha, &model.with_averaged(Hypothesis::H1))?,
            averaged_h0: omega_unlabeled(alpha, &model.with_averaged(Hypothesis::H0))?,
        })
    }

    /// Largest violation of the ordering, 0 when all inequalities hold.
    pub fn worst_violation(&self) -> f64 {
        [
            self.unlabeled - self.labeled,
            self.averaged_both - self.unlabeled,
            self.averaged_h1 - self.unlabeled,
            self.averaged_h0 - self.unlabeled,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Sampled exponent curve with its endpoint data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentCurve {
    pub alphas: Vec<f64>,
    pub omegas: Vec<f64>,
    /// Value of the continuous extension at `alpha = 0`.
    pub omega_at_zero: f64,
    /// Smallest `alpha` at which the exponent vanishes.
    pub alpha_star: f64,
}

/// Geometric grid from `alpha_star / 1000` to `1.2 alpha_star`.
pub fn default_alpha_grid(alpha_star: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2, "a grid needs at least two points");
    let (lo, hi) = (alpha_star / 1000.0, 1.2 * alpha_star);
    let ratio = (hi / lo).ln() / (points - 1) as f64;
    (0..points).map(|i| lo * (ratio * i as f64).exp()).collect()
}

fn check_grid(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::domain("empty alpha grid"));
    }
    if alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::domain("alpha grid entries must be positive and finite"));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("alpha grid must be strictly increasing"));
    }
    Ok(())
}

impl ExponentCurve {
    /// Largest violation of monotonicity along the grid.
    pub fn monotonicity_violation(&self) -> f64 {
        self.omegas.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Largest violation of discrete convexity: at each interior point the
    /// chord through the neighbours must not pass below the curve.
    pub fn convexity_violation(&self) -> f64 {
        let (a, o) = (&self.alphas, &self.omegas);
        (1..a.len().saturating_sub(1))
            .map(|i| {
                let chord = (o[i - 1] * (a[i + 1] - a[i]) + o[i + 1] * (a[i] - a[i - 1])) / (a[i + 1] - a[i - 1]);
                o[i] - chord
            })
            .fold(0.0, f64::max)
    }

    fn validate(self, what: &str) -> Result<Self> {
        let mono = self.monotonicity_violation();
        let conv = self.convexity_violation();
        if mono > CURVE_SLACK || conv > CURVE_SLACK {
            return Err(Error::solver(format!(
                "{what} curve is not convex and nonincreasing: monotonicity violation {mono:.3e}, \
                 convexity violation {conv:.3e}"
            )));
        }
        Ok(self)
    }
}

/// Unlabeled exponent sampled on `alphas`.
pub fn exponent_curve(model: &HypothesisModel, alphas: &[f64]) -> Result<ExponentCurve> {
    check_grid(alphas)?;
    let omegas = alphas
        .par_iter()
        .map(|&a| omega_unlabeled(a, model))
        .collect::<Result<Vec<f64>>>()?;
    ExponentCurve {
        alphas: alphas.to_vec(),
        omegas,
        omega_at_zero: unlabeled_at_zero(model)?,
        alpha_star: unlabeled_zero_crossing(model)?,
    }
    .validate("unlabeled exponent")
}

/// Labeled exponent sampled on `alphas`.
pub fn labeled_exponent_curve(model: &HypothesisModel, alphas: &[f64]) -> Result<ExponentCurve> {
    check_grid(alphas)?;
    let omegas = alphas
        .par_iter()
        .map(|&a| omega_labeled(a, model))
        .collect::<Result<Vec<f64>>>()?;
    ExponentCurve {
        alphas: alphas.to_vec(),
        omegas,
        omega_at_zero: omega_labeled(0.0, model)?,
        alpha_star: labeled_zero_crossing(model),
    }
    .validate("labeled exponent")
}

/// Unlabeled and labeled curves with the fully averaged lower bound, on a
/// shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub unlabeled: ExponentCurve,
    pub labeled: ExponentCurve,
    pub iid_bound: ExponentCurve,
}

impl CurveTable {
    /// Uses the default grid over the unlabeled zero crossing when `alphas`
    /// is `None`.
    pub fn compute(model: &HypothesisModel, alphas: Option<&[f64]>) -> Result<Self> {
        let grid = match alphas {
            Some(a) => a.to_vec(),
            None => default_alpha_grid(unlabeled_zero_crossing(model)?, DEFAULT_GRID_POINTS),
        };
        let both = model.with_averaged(Hypothesis::H0).with_averaged(Hypothesis::H1);
        Ok(CurveTable {
            unlabeled: exponent_curve(model, &grid)?,
            labeled: labeled_exponent_curve(model, &grid)?,
            iid_bound: labeled_exponent_curve(&both, &grid)?,
        })
    }

    /// CSV body with a header row and 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,omega_unlabeled,omega_labeled,omega_iid_bound\n");
        for i in 0..self.unlabeled.alphas.len() {
            out.push_str(&format!(
                "{:.11e},{:.11e},{:.11e},{:.11e}\n",
                self.unlabeled.alphas[i], self.unlabeled.omegas[i], self.labeled.omegas[i], self.iid_bound.omegas[i]
            ));
        }
        out
    }
}
