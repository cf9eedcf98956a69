//! Maximum-benefit assignment on the augmented trellis.
//!
//! Persons are the rows of a [`RowGroupedBenefit`], objects its columns. Three
//! solvers are provided: an exact Hungarian method, an epsilon-scaled auction
//! that bids per group of identical persons, and an exhaustive oracle for
//! small instances.

use crate::error::{Error, Result};
use crate::trellis::{path_value, Path, RowGroupedBenefit};

/// Largest instance accepted by [`brute_force`].
pub const BRUTE_FORCE_MAX_N: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    /// `object_of_person[p]` is the column given to person `p`.
    pub object_of_person: Vec<usize>,
    /// Sum of the assigned benefits, accumulated in column order.
    pub total_benefit: f64,
    /// Solver-specific work counter: augmenting steps for the Hungarian
    /// method, object bids for the auction, paths visited for the oracle.
    pub iterations: u64,
    /// Final bid increment, for the auction.
    pub final_epsilon: Option<f64>,
}

impl AssignmentResult {
    fn from_assignment(rg: &RowGroupedBenefit<'_>, object_of_person: Vec<usize>, iterations: u64) -> Self {
        let total_benefit = path_value(rg.base(), &rg.induced_path(&object_of_person));
        AssignmentResult { object_of_person, total_benefit, iterations, final_epsilon: None }
    }

    /// The trellis path encoded by this assignment.
    pub fn path(&self, rg: &RowGroupedBenefit<'_>) -> Path {
        rg.induced_path(&self.object_of_person)
    }
}

/// Exact maximum-benefit assignment by the shortest augmenting path form of
/// the Hungarian method, O(n^3).
///
/// Persons are inserted in increasing index order and, among equally short
/// augmenting paths, the lowest object index is taken, so the result is
/// deterministic.
pub fn hungarian(rg: &RowGroupedBenefit<'_>) -> Result<AssignmentResult> {
    let n = rg.size();
    if rg.multiplicities().iter().sum::<usize>() != n {
        return Err(Error::domain("assignment instance is not square"));
    }
    if n == 0 {
        return Ok(AssignmentResult::from_assignment(rg, Vec::new(), 0));
    }
    // Minimization of cost = -benefit with 1-based sentinel column 0.
    let cost = |p: usize, o: usize| -rg.benefit(p, o);
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut person_at = vec![usize::MAX; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut steps = 0u64;
    for person in 0..n {
        person_at[0] = person;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            steps += 1;
            let i0 = person_at[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j - 1) - u[i0 + 1] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[person_at[j] + 1] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if person_at[j0] == usize::MAX {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            person_at[j0] = person_at[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut object_of_person = vec![0usize; n];
    for j in 1..=n {
        object_of_person[person_at[j]] = j - 1;
    }
    Ok(AssignmentResult::from_assignment(rg, object_of_person, steps))
}

/// Settings of the epsilon-scaled auction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionConfig {
    /// Bid increment of the last scaling phase; the result is within
    /// `n * epsilon_final` of the optimum.
    pub epsilon_final: f64,
    /// Ratio between successive increments.
    pub scaling_factor: f64,
    /// First increment. `None` uses half the benefit range of the instance.
    pub epsilon_initial: Option<f64>,
    /// Cap on the number of object bids over all phases.
    pub max_bids: u64,
}

impl AuctionConfig {
    /// Defaults for alphabet size `m`: final increment `1e-3 / m`.
    pub fn for_alphabet(m: usize) -> Self {
        AuctionConfig {
            epsilon_final: 1e-3 / m.max(1) as f64,
            scaling_factor: 4.0,
            epsilon_initial: None,
            max_bids: 1_000_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon_final > 0.0 && self.epsilon_final.is_finite()) {
            return Err(Error::domain(format!("epsilon_final must be positive, got {}", self.epsilon_final)));
        }
        if !(self.scaling_factor > 1.0) {
            return Err(Error::domain(format!("scaling_factor must exceed 1, got {}", self.scaling_factor)));
        }
        if let Some(e0) = self.epsilon_initial {
            if !(e0 >= self.epsilon_final) {
                return Err(Error::domain(format!(
                    "epsilon_initial {e0} is below epsilon_final {}",
                    self.epsilon_final
                )));
            }
        }
        Ok(())
    }
}

/// Auction with epsilon scaling, bidding once per group of identical persons.
///
/// A group short of `d` objects bids at once for its `d` best objects among
/// those it does not hold; each price is raised to leave the winner a margin
/// of `epsilon` below the `(d+1)`-th best value. Sibling persons therefore
/// never outbid each other. On termination each group's objects are within
/// `epsilon` of its best alternative outside its holdings, which bounds the
/// loss by `n * epsilon_final`.
pub fn auction_sp(rg: &RowGroupedBenefit<'_>, cfg: &AuctionConfig) -> Result<AssignmentResult> {
    cfg.validate()?;
    let n = rg.size();
    let base = rg.base();
    let m = rg.groups();
    if rg.multiplicities().iter().sum::<usize>() != n {
        return Err(Error::domain("assignment instance is not square"));
    }
    if n == 0 {
        return Ok(AssignmentResult::from_assignment(rg, Vec::new(), 0));
    }
    let active: Vec<usize> = (0..m).filter(|&k| rg.multiplicities()[k] > 0).collect();
    let (lo, hi) = active
        .iter()
        .flat_map(|&k| base.row(k).iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| (lo.min(b), hi.max(b)));
    let mut epsilon = cfg
        .epsilon_initial
        .unwrap_or((hi - lo) / 2.0)
        .max(cfg.epsilon_final);

    let mut price = vec![0.0f64; n];
    let mut owner = vec![usize::MAX; n];
    let mut deficit = vec![0usize; m];
    let mut queued = vec![false; m];
    let mut queue = std::collections::VecDeque::with_capacity(m);
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut bids = 0u64;

    loop {
        owner.iter_mut().for_each(|o| *o = usize::MAX);
        for &k in &active {
            deficit[k] = rg.multiplicities()[k];
            queued[k] = true;
            queue.push_back(k);
        }
        while let Some(k) = queue.pop_front() {
            queued[k] = false;
            let d = deficit[k];
            if d == 0 {
                continue;
            }
            let row = base.row(k);
            candidates.clear();
            candidates.extend((0..n).filter(|&j| owner[j] != k).map(|j| (row[j] - price[j], j)));
            // Best values first; lower object index wins ties.
            let by_value = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
            let second_best = if candidates.len() > d {
                candidates.select_nth_unstable_by(d, by_value);
                candidates[d].0
            } else {
                candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min)
            };
            let winners = &mut candidates[..d];
            winners.sort_unstable_by(by_value);
            for &(value, j) in winners.iter() {
                price[j] += value - second_best + epsilon;
                let previous = owner[j];
                if previous != usize::MAX {
                    deficit[previous] += 1;
                    if !queued[previous] {
                        queued[previous] = true;
                        queue.push_back(previous);
                    }
                }
                owner[j] = k;
            }
            deficit[k] = 0;
            bids += d as u64;
            if bids > cfg.max_bids {
                return Err(Error::solver(format!(
                    "auction exceeded {} bids at epsilon {epsilon:.3e} (n = {n}, final epsilon {:.3e})",
                    cfg.max_bids, cfg.epsilon_final
                )));
            }
        }
        if epsilon <= cfg.epsilon_final {
            break;
        }
        epsilon = (epsilon / cfg.scaling_factor).max(cfg.epsilon_final);
    }

    let mut next: Vec<usize> = (0..m).map(|k| rg.persons_of(k).start).collect();
    let mut object_of_person = vec![0usize; n];
    for (j, &k) in owner.iter().enumerate() {
        object_of_person[next[k]] = j;
        next[k] += 1;
    }
    let mut result = AssignmentResult::from_assignment(rg, object_of_person, bids);
    result.final_epsilon = Some(epsilon);
    Ok(result)
}

/// Exhaustive search over the distinct compatible paths (multiset
/// permutations of the row labels), for `n <= 8`.
pub fn brute_force(rg: &RowGroupedBenefit<'_>) -> Result<AssignmentResult> {
    let n = rg.size();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::domain(format!(
            "brute force is limited to n <= {BRUTE_FORCE_MAX_N}, got n = {n}"
        )));
    }
    let mut states: Vec<usize> = (0..rg.groups())
        .flat_map(|k| std::iter::repeat_n(k, rg.multiplicities()[k]))
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut visited = 0u64;
    loop {
        visited += 1;
        let value = path_value(rg.base(), &Path::new(states.clone()));
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, states.clone()));
        }
        if !next_permutation(&mut states) {
            break;
        }
    }
    let (_, states) = best.expect("at least one path");
    let assignment = rg.assignment_for(&Path::new(states));
    Ok(AssignmentResult::from_assignment(rg, assignment, visited))
}

/// Advances `v` to the next lexicographic permutation; false after the last.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
