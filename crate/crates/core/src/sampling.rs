//! Marginal inclusion probabilities and systematic k-set sampling.
//!
//! A vector `p` is a feasible marginal vector for k-sets of `[N]` iff every
//! entry lies in `[0, 1]` and the entries sum to `k`. Madow's systematic
//! scheme turns any such vector into a random k-set using a single uniform
//! draw: lay the `p_i` end to end on `[0, k)` and pick the items whose
//! intervals contain `U, U + 1, ..., U + k - 1`.

use rand::Rng;

use crate::error::{check_cardinality, Error, Result};

/// Raw inputs within this distance of feasibility are repaired; beyond it
/// they are rejected.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

/// Sums closer than this to `k` are left untouched by the repair step,
/// which makes normalization idempotent.
const SUM_SLACK: f64 = 1e-12;

/// Inclusion probabilities for the `N` items, summing to `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalVector {
    probs: Vec<f64>,
    k: usize,
    correction: f64,
}

impl MarginalVector {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    /// Largest absolute change the repair step applied to a single entry.
    pub fn correction(&self) -> f64 {
        self.correction
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// Expected sum-reward `r . p` of a k-set drawn with these marginals.
    pub fn dot(&self, rewards: &[f64]) -> f64 {
        self.probs.iter().zip(rewards).map(|(p, r)| p * r).sum()
    }
}

/// A set of `k` distinct item indices, stored in increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KSet {
    members: Vec<usize>,
}

impl KSet {
    /// Builds a k-set from arbitrary distinct indices below `n`.
    pub fn new(mut members: Vec<usize>, n: usize) -> Result<Self> {
        members.sort_unstable();
        let distinct = members.windows(2).all(|w| w[0] < w[1]);
        if !distinct || members.last().is_some_and(|&m| m >= n) {
            return Err(Error::Config(format!(
                "k-set members must be distinct indices below {n}: {members:?}"
            )));
        }
        check_cardinality(members.len(), n)?;
        Ok(Self { members })
    }

    pub(crate) fn from_sorted(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self { members }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.members.binary_search(&item).is_ok()
    }

    pub fn into_members(self) -> Vec<usize> {
        self.members
    }
}

/// Checks the feasibility condition and repairs small floating-point drift.
///
/// Entries are clamped to `[0, 1]`; if the sum then differs from `k`, the
/// entries strictly inside `(0, 1)` are rescaled proportionally (repeating
/// the clamp if a rescaled entry crosses 1).
pub fn validate_marginals(probs: &[f64], k: usize) -> Result<MarginalVector> {
    validate_with_tolerance(probs, k, FEASIBILITY_TOLERANCE)
}

pub(crate) fn validate_with_tolerance(
    probs: &[f64],
    k: usize,
    tolerance: f64,
) -> Result<MarginalVector> {
    let n = probs.len();
    if n == 0 {
        return Err(Error::InfeasibleMarginals {
            reason: "empty marginal vector".into(),
        });
    }
    check_cardinality(k, n)?;
    if let Some((i, &p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < -tolerance || **p > 1.0 + tolerance)
    {
        return Err(Error::InfeasibleMarginals {
            reason: format!("entry {i} = {p} lies outside [0, 1]"),
        });
    }
    let target = k as f64;
    let raw_sum: f64 = probs.iter().sum();
    if (raw_sum - target).abs() > tolerance {
        return Err(Error::InfeasibleMarginals {
            reason: format!("entries sum to {raw_sum}, expected {k}"),
        });
    }

    let mut out: Vec<f64> = probs.iter().map(|p| p.clamp(0.0, 1.0)).collect();
    for _ in 0..n {
        let sum: f64 = out.iter().sum();
        if (sum - target).abs() <= SUM_SLACK {
            break;
        }
        let fixed: f64 = out.iter().filter(|&&p| p == 0.0 || p == 1.0).sum();
        let free: f64 = sum - fixed;
        if free <= 0.0 {
            return Err(Error::InfeasibleMarginals {
                reason: format!("no free mass left to absorb a sum of {sum} (k = {k})"),
            });
        }
        let scale = (target - fixed) / free;
        for p in out.iter_mut().filter(|p| **p > 0.0 && **p < 1.0) {
            *p = (*p * scale).min(1.0);
        }
    }

    let correction = probs
        .iter()
        .zip(&out)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(MarginalVector {
        probs: out,
        k,
        correction,
    })
}

/// Draws one k-set whose inclusion probabilities are exactly `m`.
///
/// Uses one uniform variate per call. Items with `p_i = 0` are never
/// selected and items with `p_i = 1` always are.
pub fn madow_sample<R: Rng + ?Sized>(m: &MarginalVector, rng: &mut R) -> KSet {
    let u: f64 = rng.random();
    madow_select(m.probs(), m.k(), u)
}

/// Deterministic core of [`madow_sample`] for a given uniform draw `u`.
pub fn madow_select(probs: &[f64], k: usize, u: f64) -> KSet {
    let n = probs.len();
    let mut members = Vec::with_capacity(k);
    // Running prefix sum Pi_j; the last one is pinned to k so that
    // U + k - 1 < k always lands in some interval.
    let mut upper = 0.0f64;
    let mut j = 0usize;
    for i in 0..k {
        let point = u + i as f64;
        while j < n {
            upper = if j + 1 == n {
                k as f64
            } else {
                upper + probs[j]
            };
            if point < upper {
                break;
            }
            j += 1;
        }
        if j >= n {
            break;
        }
        members.push(j);
        j += 1;
    }
    if members.len() < k {
        // Only reachable through rounding in the prefix sums: fill with the
        // largest-probability items not yet chosen.
        let mut rest: Vec<usize> = (0..n).filter(|i| !members.contains(i)).collect();
        rest.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        members.extend(rest.into_iter().take(k - members.len()));
        members.sort_unstable();
    }
    KSet::from_sorted(members)
}

/// Per-item inclusion frequencies over `draws` independent samples.
pub fn empirical_inclusion<R: Rng + ?Sized>(
    m: &MarginalVector,
    draws: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut counts = vec![0u64; m.n()];
    for _ in 0..draws {
        for &i in madow_sample(m, rng).members() {
            counts[i] += 1;
        }
    }
    counts
        .into_iter()
        .map(|c| c as f64 / draws.max(1) as f64)
        .collect()
}
