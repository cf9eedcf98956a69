//! The three benchmark hypothesis models.
//!
//! * `exp1`: H0 uniform; under H1 the `n` columns interpolate linearly, row
//!   by row, from `(0, k, 2k, ..., (m-1)k)` with `k = 2 / (m (m - 1))` to the
//!   uniform PMF. The zero entry is clamped to the PMF floor.
//! * `exp2`: H0 iid with `q = (d, 2d, ..., m d)`, `d = 2 / (m (m + 1))`;
//!   under H1 the first half of the indices put mass `1 - delta` on the first
//!   symbol and the second half on the last, spreading `delta` evenly over
//!   the remaining symbols.
//! * `exp3`: binary; H0 halves `(.5, .5)` and `(.3, .7)`, H1 halves
//!   `(.1, .9)` and `(.9, .1)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::{DistributionClass, HypothesisModel, Pmf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Exp1,
    Exp2,
    Exp3,
    Custom,
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentId::Exp1 => "exp1",
            ExperimentId::Exp2 => "exp2",
            ExperimentId::Exp3 => "exp3",
            ExperimentId::Custom => "custom",
        })
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(ExperimentId::Exp1),
            "exp2" => Ok(ExperimentId::Exp2),
            "exp3" => Ok(ExperimentId::Exp3),
            "custom" => Ok(ExperimentId::Custom),
            other => Err(Error::config(format!(
                "experiment: unknown id '{other}', expected exp1, exp2, exp3 or custom"
            ))),
        }
    }
}

fn class(probs: Vec<f64>, weight: f64) -> Result<DistributionClass> {
    Ok(DistributionClass::new(Pmf::new(probs)?, weight))
}

/// Raw (unclamped) H1 column `i` of the first experiment.
pub fn exp1_column(m: usize, n: usize, i: usize) -> Vec<f64> {
    let kappa = 2.0 / (m as f64 * (m as f64 - 1.0));
    let uniform = 1.0 / m as f64;
    let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    (0..m)
        .map(|k| {
            let start = k as f64 * kappa;
            start + frac * (uniform - start)
        })
        .collect()
}

/// Limit of the column average of the first experiment, independent of `n`.
pub fn exp1_average(m: usize) -> Vec<f64> {
    let mf = m as f64;
    (0..m)
        .map(|k| if k == 0 { 1.0 / (2.0 * mf) } else { (mf + 2.0 * k as f64 - 1.0) / (2.0 * mf * (mf - 1.0)) })
        .collect()
}

pub fn exp1(m: usize, n: usize) -> Result<HypothesisModel> {
    if m < 2 {
        return Err(Error::config(format!("m: exp1 requires m >= 2, got {m}")));
    }
    if n < 2 {
        return Err(Error::config(format!("n: exp1 requires n >= 2, got {n}")));
    }
    let weight = 1.0 / n as f64;
    let h1 = (0..n).map(|i| class(exp1_column(m, n, i), weight)).collect::<Result<Vec<_>>>()?;
    HypothesisModel::new(vec![DistributionClass::new(Pmf::uniform(m), 1.0)], h1)
}

pub fn exp2(m: usize, delta: f64) -> Result<HypothesisModel> {
    if m < 2 {
        return Err(Error::config(format!("m: exp2 requires m >= 2, got {m}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(format!("delta: exp2 requires 0 < delta < 1, got {delta}")));
    }
    let step = 2.0 / (m as f64 * (m as f64 + 1.0));
    let q = (1..=m).map(|k| k as f64 * step).collect();
    let spread = delta / (m as f64 - 1.0);
    let peaked = |at: usize| (0..m).map(|k| if k == at { 1.0 - delta } else { spread }).collect();
    HypothesisModel::new(
        vec![class(q, 1.0)?],
        vec![class(peaked(0), 0.5)?, class(peaked(m - 1), 0.5)?],
    )
}

pub fn exp3() -> Result<HypothesisModel> {
    HypothesisModel::new(
        vec![class(vec![0.5, 0.5], 0.5)?, class(vec![0.3, 0.7], 0.5)?],
        vec![class(vec![0.1, 0.9], 0.5)?, class(vec![0.9, 0.1], 0.5)?],
    )
}

/// Builds the model of a benchmark experiment at sample size `n`. The
/// `custom` id has no built-in model and is rejected; `delta` is only read
/// by `exp2`.
pub fn build_experiment(id: ExperimentId, m: usize, n: usize, delta: Option<f64>) -> Result<HypothesisModel> {
    let model = match id {
        ExperimentId::Exp1 => exp1(m, n)?,
        ExperimentId::Exp2 => {
            let delta = delta.ok_or_else(|| Error::config("delta: exp2 requires a value for delta"))?;
            exp2(m, delta)?
        }
        ExperimentId::Exp3 => {
            if m != 2 {
                return Err(Error::config(format!("m: exp3 is binary, got m = {m}")));
            }
            exp3()?
        }
        ExperimentId::Custom => {
            return Err(Error::config("experiment: custom experiments take their model from a file"));
        }
    };
    // Every class must own a whole number of indices.
    for h in [crate::probability::Hypothesis::H0, crate::probability::Hypothesis::H1] {
        model.class_sizes(h, n).map_err(|e| Error::config(format!("n: {e}")))?;
    }
    Ok(model)
}
