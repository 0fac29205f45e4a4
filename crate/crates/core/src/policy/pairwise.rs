//! Pairwise rewards through super-items.
//!
//! Every unordered pair `{i, j}` becomes one expert of a k-sets game over
//! `binomial(N, 2)` super-items. The learner plays the union of the
//! endpoints of its `k` super-items, so it predicts between `m_min(k)` and
//! `2k` items and competes with offline sets of about `sqrt(2k)` items.

use itertools::Itertools;
use rand::Rng;

use crate::combin::binomial;
use crate::environments::RewardVector;
use crate::error::{check_cardinality, Error, Result};
use crate::policy::ftrl::{tuned_eta, FtrlState, LinkFunction};
use crate::policy::sage_hedge::{EtaSchedule, SageHedge};
use crate::policy::MarginalPolicy;
use crate::sampling::{madow_sample, KSet, MarginalVector};

const DENSEST_LIMIT: f64 = 1e7;

/// `binomial(n, 2)`.
pub fn super_item_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Lexicographic index of the unordered pair `{i, j}`.
pub fn pair_encode(i: usize, j: usize, n: usize) -> Result<usize> {
    if i == j || i >= n || j >= n {
        return Err(Error::InvalidPair { i, j, n });
    }
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    Ok(i * n - i * (i + 1) / 2 + (j - i - 1))
}

/// Inverse of [`pair_encode`]; returns `(min, max)`.
pub fn pair_decode(idx: usize, n: usize) -> Result<(usize, usize)> {
    if idx >= super_item_count(n) {
        return Err(Error::InvalidPair { i: idx, j: idx, n });
    }
    let mut rest = idx;
    for i in 0..n - 1 {
        let row = n - 1 - i;
        if rest < row {
            return Ok((i, i + 1 + rest));
        }
        rest -= row;
    }
    unreachable!("index checked against the pair count")
}

/// Least `m` with `binomial(m, 2) >= k`.
pub fn m_min(k: usize) -> usize {
    let mut m = 0;
    while super_item_count(m) < k {
        m += 1;
    }
    m
}

/// 1 when both requested items are in `items`.
pub fn pairwise_reward(items: &[usize], pair: (usize, usize)) -> f64 {
    if items.contains(&pair.0) && items.contains(&pair.1) {
        1.0
    } else {
        0.0
    }
}

/// Largest number of edges (with multiplicity) induced by `k` vertices.
pub fn densest_ksubgraph_bruteforce(
    edges: &[(usize, usize)],
    n: usize,
    k: usize,
) -> Result<(KSet, u64)> {
    check_cardinality(k, n)?;
    let size = binomial(n, k);
    if size > DENSEST_LIMIT {
        return Err(Error::InstanceTooLarge {
            what: "binomial(n, k) vertex sets",
            size,
            limit: DENSEST_LIMIT,
        });
    }
    let mut weight = vec![0u64; n * n];
    for &(i, j) in edges {
        if i == j || i >= n || j >= n {
            return Err(Error::InvalidPair { i, j, n });
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        weight[a * n + b] += 1;
    }
    let mut best: Option<(Vec<usize>, u64)> = None;
    for set in (0..n).combinations(k) {
        let mut covered = 0;
        for (x, &a) in set.iter().enumerate() {
            for &b in &set[x + 1..] {
                covered += weight[a * n + b];
            }
        }
        if best.as_ref().is_none_or(|(_, c)| covered > *c) {
            best = Some((set, covered));
        }
    }
    let (set, covered) = best.expect("at least one vertex set");
    Ok((KSet::from_sorted(set), covered))
}

/// `2 sqrt(k l* ln(N^2 e / 2k)) + 2k ln(N^2 e / 2k)`.
pub fn improper_bound(k: usize, n: usize, l_star: f64) -> f64 {
    let (k, n) = (k as f64, n as f64);
    let c = (n * n * std::f64::consts::E / (2.0 * k)).ln();
    2.0 * (k * l_star.max(0.0) * c).sqrt() + 2.0 * k * c
}

#[derive(Debug, Clone)]
pub enum PairBase {
    Ftrl(FtrlState),
    Hedge(SageHedge),
}

/// One round's play.
#[derive(Debug, Clone)]
pub struct PairPrediction {
    /// Union of the endpoints, sorted.
    pub items: Vec<usize>,
    /// The sampled super-items.
    pub super_set: KSet,
    /// Marginals over super-items.
    pub marginals: MarginalVector,
}

#[derive(Debug, Clone)]
pub struct PairwisePolicy {
    n: usize,
    k: usize,
    base: PairBase,
}

impl PairwisePolicy {
    pub fn new(n: usize, k: usize, base: PairBase) -> Result<Self> {
        let m = super_item_count(n);
        check_cardinality(k, m)?;
        let dim = match &base {
            PairBase::Ftrl(f) => f.n(),
            PairBase::Hedge(h) => h.n(),
        };
        if dim != m || base_k(&base) != k {
            return Err(Error::Config(format!(
                "base policy must play {k} of {m} super-items"
            )));
        }
        Ok(Self { n, k, base })
    }

    /// FTRL base (identity link) tuned for `horizon` rounds.
    pub fn ftrl(n: usize, k: usize, horizon: usize, eta: Option<f64>) -> Result<Self> {
        let m = super_item_count(n);
        check_cardinality(k, m)?;
        let eta = eta.unwrap_or_else(|| tuned_eta(m, k, horizon));
        Self::new(
            n,
            k,
            PairBase::Ftrl(FtrlState::new(m, k, eta, LinkFunction::Identity)?),
        )
    }

    pub fn hedge(n: usize, k: usize, schedule: EtaSchedule) -> Result<Self> {
        let m = super_item_count(n);
        Self::new(n, k, PairBase::Hedge(SageHedge::new(m, k, schedule)?))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn base(&self) -> &PairBase {
        &self.base
    }

    pub fn marginals(&self) -> Result<MarginalVector> {
        match &self.base {
            PairBase::Ftrl(f) => f.marginals(),
            PairBase::Hedge(h) => h.marginals(),
        }
    }

    pub fn predict<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PairPrediction> {
        let marginals = self.marginals()?;
        let super_set = madow_sample(&marginals, rng);
        let items = union_items(super_set.members(), self.n)?;
        Ok(PairPrediction {
            items,
            super_set,
            marginals,
        })
    }

    /// Unit reward on the requested pair's super-item.
    pub fn update(&mut self, pair: (usize, usize), played: &MarginalVector) -> Result<()> {
        let m = super_item_count(self.n);
        let reward = RewardVector::one_hot(m, pair_encode(pair.0, pair.1, self.n)?);
        match &mut self.base {
            PairBase::Ftrl(f) => f.observe(&reward, played),
            PairBase::Hedge(h) => h.observe(&reward, played),
        }
    }
}

fn base_k(base: &PairBase) -> usize {
    match base {
        PairBase::Ftrl(f) => f.k(),
        PairBase::Hedge(h) => h.k(),
    }
}

/// Sorted union of the endpoints of the given super-items.
pub fn union_items(super_items: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut items = Vec::with_capacity(2 * super_items.len());
    for &s in super_items {
        let (i, j) = pair_decode(s, n)?;
        items.push(i);
        items.push(j);
    }
    items.sort_unstable();
    items.dedup();
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lexicographic_codes() {
        let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        for (idx, &(i, j)) in pairs.iter().enumerate() {
            assert_eq!(pair_encode(i, j, 4).unwrap(), idx);
            assert_eq!(pair_decode(idx, 4).unwrap(), (i, j));
        }
        assert_eq!(pair_encode(3, 1, 4).unwrap(), 4);
        assert!(matches!(
            pair_encode(2, 2, 4),
            Err(Error::InvalidPair { .. })
        ));
        assert!(pair_decode(6, 4).is_err());
    }

    #[test]
    fn union_size_extremes() {
        assert_eq!(m_min(1), 2);
        assert_eq!(m_min(3), 3);
        assert_eq!(m_min(4), 4);
        assert_eq!(m_min(6), 4);
        assert_eq!(m_min(7), 5);
        let tri: Vec<usize> = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(i, j)| pair_encode(i, j, 4).unwrap())
            .collect();
        assert_eq!(union_items(&tri, 4).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn single_super_item_gives_two_items() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PairwisePolicy::ftrl(6, 1, 100, None).unwrap();
        for _ in 0..50 {
            assert_eq!(p.predict(&mut rng).unwrap().items.len(), 2);
        }
    }

    #[test]
    fn reward_examples() {
        assert_eq!(pairwise_reward(&[1, 2, 5], (1, 2)), 1.0);
        assert_eq!(pairwise_reward(&[1, 5], (1, 2)), 0.0);
        assert_eq!(pairwise_reward(&[0, 1, 2, 3], (2, 1)), 1.0);
    }

    #[test]
    fn densest_examples() {
        let tri = [(0, 1), (1, 2), (0, 2)];
        assert_eq!(densest_ksubgraph_bruteforce(&tri, 3, 2).unwrap().1, 1);
        let k5: Vec<_> = (0..5).tuple_combinations().collect();
        assert_eq!(densest_ksubgraph_bruteforce(&k5, 5, 3).unwrap().1, 3);
        let star: Vec<_> = (1..6).map(|l| (0, l)).collect();
        let (set, covered) = densest_ksubgraph_bruteforce(&star, 6, 3).unwrap();
        assert_eq!(covered, 2);
        assert!(set.contains(0));
        assert!(matches!(
            densest_ksubgraph_bruteforce(&[], 60, 30),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn improper_examples() {
        let c = 25f64.ln() + 1.0;
        assert!((improper_bound(2, 10, 0.0) - 4.0 * c).abs() < 1e-12);
        let b = improper_bound(2, 10, 50.0);
        assert!((b - (2.0 * (100.0 * c).sqrt() + 4.0 * c)).abs() < 1e-12);
        let first = |l: f64| improper_bound(2, 10, l) - improper_bound(2, 10, 0.0);
        assert!((first(100.0) / first(50.0) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hedge_base_learns_a_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = PairwisePolicy::hedge(5, 2, EtaSchedule::Fixed(1.0)).unwrap();
        for _ in 0..30 {
            let pred = p.predict(&mut rng).unwrap();
            p.update((3, 1), &pred.marginals).unwrap();
        }
        let pred = p.predict(&mut rng).unwrap();
        assert_eq!(pairwise_reward(&pred.items, (1, 3)), 1.0);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(n in 2usize..40, a in 0usize..1000, b in 0usize..1000) {
            let (i, j) = (a % n, b % n);
            prop_assume!(i != j);
            let idx = pair_encode(i, j, n).unwrap();
            prop_assert!(idx < super_item_count(n));
            prop_assert_eq!(pair_decode(idx, n).unwrap(), (i.min(j), i.max(j)));
        }

        #[test]
        fn union_size_is_bounded(seed in 0u64..1000, k in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = PairwisePolicy::ftrl(8, k, 50, None).unwrap();
            let items = p.predict(&mut rng).unwrap().items;
            prop_assert!(items.len() >= m_min(k) && items.len() <= 2 * k);
        }
    }
}
