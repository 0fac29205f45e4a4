//! Best fixed k-set in hindsight.

use itertools::Itertools;

use crate::combin::binomial;
use crate::environments::{reward_eval, Round, Rounds, Trace, Variant};
use crate::error::{check_cardinality, Error, Result};
use crate::policy::pairwise::densest_ksubgraph_bruteforce;
use crate::sampling::KSet;

const BRUTEFORCE_LIMIT: f64 = 1e8;

/// Cumulative reward of each expert over the trace.
pub fn column_sums(trace: &Trace) -> Vec<f64> {
    let mut sums = vec![0.0; trace.n()];
    for t in 0..trace.len() {
        match trace.round(t) {
            Round::OneHot(i) => sums[i] += 1.0,
            Round::Pair(i, j) => {
                sums[i] += 1.0;
                sums[j] += 1.0;
            }
            Round::Dense(v) => sums.iter_mut().zip(v).for_each(|(s, x)| *s += x),
        }
    }
    sums
}

/// Indices of the `k` largest entries (ties by index), sorted.
pub fn top_k(values: &[f64], k: usize) -> KSet {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    if k < values.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| {
            values[b].total_cmp(&values[a]).then(a.cmp(&b))
        });
        idx.truncate(k);
    }
    idx.sort_unstable();
    KSet::from_sorted(idx)
}

/// Sum-reward optimum: the top `k` cumulative rewards.
pub fn oracle_sum(trace: &Trace, k: usize) -> Result<(KSet, f64)> {
    check_cardinality(k, trace.n())?;
    let sums = column_sums(trace);
    let best = top_k(&sums, k);
    let value = best.members().iter().map(|&i| sums[i]).sum();
    Ok((best, value))
}

/// Exact optimum for any variant by enumerating every k-set.
pub fn oracle_bruteforce(trace: &Trace, variant: Variant, k: usize) -> Result<(KSet, f64)> {
    let n = trace.n();
    check_cardinality(k, n)?;
    let size = binomial(n, k) * trace.len().max(1) as f64;
    if size > BRUTEFORCE_LIMIT {
        return Err(Error::InstanceTooLarge {
            what: "binomial(N, k) * T evaluations",
            size,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    let rewards: Vec<_> = (0..trace.len()).map(|t| trace.reward(t)).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for set in (0..n).combinations(k) {
        let mut value = 0.0;
        for r in &rewards {
            value += reward_eval(variant, &set, r)?;
        }
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((set, value));
        }
    }
    let (set, value) = best.expect("at least one k-set");
    Ok((KSet::from_sorted(set), value))
}

/// Max-reward value of a feasible set built by splitting the first
/// `k * floor(N/k)` experts into `k` contiguous blocks and keeping each
/// block's best expert by cumulative reward. A lower bound on the optimum.
pub fn oracle_partition_lowerbound(trace: &Trace, k: usize) -> Result<(KSet, f64)> {
    let n = trace.n();
    check_cardinality(k, n)?;
    let block = n / k;
    let sums = column_sums(trace);
    let chosen: Vec<usize> = (0..k)
        .map(|b| {
            let range = b * block..(b + 1) * block;
            range
                .max_by(|&x, &y| sums[x].total_cmp(&sums[y]).then(y.cmp(&x)))
                .expect("nonempty block")
        })
        .collect();
    let mut value = 0.0;
    for t in 0..trace.len() {
        value += reward_eval(Variant::Max, &chosen, &trace.reward(t))?;
    }
    Ok((KSet::from_sorted(chosen), value))
}

/// Pairwise optimum for a vertex budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOracle {
    pub label: &'static str,
    pub budget: usize,
    pub set: KSet,
    pub value: f64,
}

/// Best vertex sets of size `k`, `ceil(sqrt(2k))` and `2k` on a pair trace.
pub fn pair_oracles(trace: &Trace, k: usize) -> Result<Vec<PairOracle>> {
    let Rounds::Pair(pairs) = trace.rounds() else {
        return Err(Error::Config("pair oracles need a pair trace".into()));
    };
    let n = trace.n();
    let budgets = [
        ("k-items", k),
        ("sqrt2k-items", sqrt2k_budget(k)),
        ("2k-items", 2 * k),
    ];
    budgets
        .into_iter()
        .map(|(label, b)| {
            let budget = b.min(n);
            let (set, covered) = densest_ksubgraph_bruteforce(pairs, n, budget)?;
            Ok(PairOracle {
                label,
                budget,
                set,
                value: covered as f64,
            })
        })
        .collect()
}

/// `ceil(sqrt(2k))`.
pub fn sqrt2k_budget(k: usize) -> usize {
    let mut m = (2.0 * k as f64).sqrt().floor() as usize;
    while m * m < 2 * k {
        m += 1;
    }
    m
}
