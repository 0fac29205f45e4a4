//! Comparison policies: LRU and LFU caches, Gaussian follow-the-perturbed-
//! leader, and Hedge run explicitly over every k-subset.

use itertools::Itertools;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::combin::binomial;
use crate::error::{check_cardinality, Error, Result};
use crate::sampling::{validate_marginals, KSet, MarginalVector};

const EXPANDED_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eviction {
    Lru,
    /// Least frequently used among residents, counting every request since
    /// the start (counts never decay); ties go to the least recent.
    Lfu,
    /// As [`Eviction::Lfu`], but an item's count starts over when it is
    /// evicted.
    InCacheLfu,
}

/// Outcome of one cache request.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheStep {
    /// Residents at the time of the request, sorted.
    pub predicted: Vec<usize>,
    pub hit: bool,
    pub evicted: Option<usize>,
}

/// A size-`k` cache over `n` items that always admits the requested item.
#[derive(Debug, Clone)]
pub struct CacheState {
    n: usize,
    k: usize,
    policy: Eviction,
    resident: Vec<usize>,
    last_used: Vec<u64>,
    frequency: Vec<u64>,
    in_cache: Vec<bool>,
    clock: u64,
}

impl CacheState {
    pub fn new(n: usize, k: usize, policy: Eviction) -> Result<Self> {
        check_cardinality(k, n)?;
        Ok(Self {
            n,
            k,
            policy,
            resident: Vec::with_capacity(k),
            last_used: vec![0; n],
            frequency: vec![0; n],
            in_cache: vec![false; n],
            clock: 0,
        })
    }

    pub fn lru(n: usize, k: usize) -> Result<Self> {
        Self::new(n, k, Eviction::Lru)
    }

    pub fn lfu(n: usize, k: usize) -> Result<Self> {
        Self::new(n, k, Eviction::Lfu)
    }

    pub fn in_cache_lfu(n: usize, k: usize) -> Result<Self> {
        Self::new(n, k, Eviction::InCacheLfu)
    }

    /// Current residents, sorted.
    pub fn resident(&self) -> Vec<usize> {
        let mut r = self.resident.clone();
        r.sort_unstable();
        r
    }

    pub fn contains(&self, item: usize) -> bool {
        self.in_cache[item]
    }

    /// Serves `item`: reports the prediction made before the reveal, then
    /// updates the bookkeeping.
    pub fn step(&mut self, item: usize) -> Result<CacheStep> {
        if item >= self.n {
            return Err(Error::Range {
                line: self.clock + 1,
                id: item,
                n: self.n,
            });
        }
        let predicted = self.resident();
        self.clock += 1;
        let hit = self.in_cache[item];
        let mut evicted = None;
        if !hit {
            if self.resident.len() == self.k {
                let pos = self.victim();
                let out = self.resident.swap_remove(pos);
                self.in_cache[out] = false;
                if self.policy == Eviction::InCacheLfu {
                    self.frequency[out] = 0;
                }
                evicted = Some(out);
            }
            self.resident.push(item);
            self.in_cache[item] = true;
        }
        self.last_used[item] = self.clock;
        self.frequency[item] += 1;
        Ok(CacheStep {
            predicted,
            hit,
            evicted,
        })
    }

    fn victim(&self) -> usize {
        let key = |&&i: &&usize| match self.policy {
            Eviction::Lru => (0, self.last_used[i]),
            Eviction::Lfu | Eviction::InCacheLfu => (self.frequency[i], self.last_used[i]),
        };
        self.resident
            .iter()
            .position_min_by_key(key)
            .expect("cache is full")
    }
}

/// Convenience wrapper: one LRU step.
pub fn lru_step(state: &mut CacheState, item: usize) -> Result<CacheStep> {
    debug_assert_eq!(state.policy, Eviction::Lru);
    state.step(item)
}

/// Convenience wrapper: one LFU step.
pub fn lfu_step(state: &mut CacheState, item: usize) -> Result<CacheStep> {
    debug_assert_ne!(state.policy, Eviction::Lru);
    state.step(item)
}

/// Top `k` of `R + sigma * gamma`, `gamma` standard normal; ties by index.
pub fn ftpl_predict<R: Rng + ?Sized>(
    cumulative: &[f64],
    sigma: f64,
    k: usize,
    rng: &mut R,
) -> Result<KSet> {
    let n = cumulative.len();
    check_cardinality(k, n)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!(
            "perturbation scale {sigma} must be >= 0"
        )));
    }
    let scores: Vec<f64> = cumulative
        .iter()
        .map(|&r| {
            let g: f64 = rng.sample(StandardNormal);
            r + sigma * g
        })
        .collect();
    let mut idx: Vec<usize> = (0..n).collect();
    if k < n {
        idx.select_nth_unstable_by(k - 1, |&a, &b| {
            scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
        });
        idx.truncate(k);
    }
    idx.sort_unstable();
    Ok(KSet::from_sorted(idx))
}

/// `sqrt(T / (k ln(Ne/k)))`.
pub fn ftpl_default_sigma(n: usize, k: usize, horizon: usize) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    (horizon as f64 / (kf * (nf * std::f64::consts::E / kf).ln())).sqrt()
}

/// Hedge over all `binomial(N, k)` subsets, enumerated.
#[derive(Debug, Clone)]
pub struct ExpandedHedge {
    /// Every k-subset in lexicographic order.
    pub sets: Vec<Vec<usize>>,
    /// Probability of each subset.
    pub probs: Vec<f64>,
    pub marginals: MarginalVector,
}

/// Runs Hedge over meta-experts on a history of one-hot rewards.
pub fn expanded_hedge_oracle(
    history: &[usize],
    eta: f64,
    n: usize,
    k: usize,
) -> Result<ExpandedHedge> {
    check_cardinality(k, n)?;
    let size = binomial(n, k);
    if size > EXPANDED_LIMIT {
        return Err(Error::InstanceTooLarge {
            what: "binomial(N, k) meta-experts",
            size,
            limit: EXPANDED_LIMIT,
        });
    }
    let mut counts = vec![0.0f64; n];
    for &y in history {
        if y >= n {
            return Err(Error::Range { line: 0, id: y, n });
        }
        counts[y] += 1.0;
    }
    let sets: Vec<Vec<usize>> = (0..n).combinations(k).collect();
    let log_w: Vec<f64> = sets
        .iter()
        .map(|s| eta * s.iter().map(|&i| counts[i]).sum::<f64>())
        .collect();
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|&x| (x - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    let mut marg = vec![0.0; n];
    for (s, p) in sets.iter().zip(&probs) {
        for &i in s {
            marg[i] += p;
        }
    }
    Ok(ExpandedHedge {
        sets,
        probs,
        marginals: validate_marginals(&marg, k)?,
    })
}
