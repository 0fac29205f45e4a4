//! SAGE with a Hedge base learner: Hedge over all k-subsets, played through
//! its inclusion probabilities.

use rand::Rng;

use crate::environments::RewardVector;
use crate::error::{check_cardinality, Error, Result};
use crate::esp::{hedge_marginals, WeightVector};
use crate::policy::{check_reward_len, MarginalPolicy};
use crate::sampling::{madow_sample, KSet, MarginalVector};

/// Learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSchedule {
    Fixed(f64),
    /// Restart at rounds 1, 2, 4, 8, ... with the rate tuned for the epoch
    /// length; `ln_experts` is the log of the meta-expert count.
    Doubling {
        ln_experts: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SageHedge {
    weights: WeightVector,
    k: usize,
    schedule: EtaSchedule,
    eta: f64,
    round: usize,
    cumulative_expected_reward: f64,
}

impl SageHedge {
    pub fn new(n: usize, k: usize, schedule: EtaSchedule) -> Result<Self> {
        check_cardinality(k, n)?;
        let eta = match schedule {
            EtaSchedule::Fixed(eta) => eta,
            EtaSchedule::Doubling { ln_experts } => tune_eta(1, ln_experts),
        };
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {eta} must be finite and >= 0"
            )));
        }
        Ok(Self {
            weights: WeightVector::uniform(n),
            k,
            schedule,
            eta,
            round: 0,
            cumulative_expected_reward: 0.0,
        })
    }

    /// Fixed rate tuned for a known horizon.
    pub fn tuned(n: usize, k: usize, horizon: usize) -> Result<Self> {
        Self::new(
            n,
            k,
            EtaSchedule::Fixed(tune_eta(horizon, ln_meta_experts(n, k))),
        )
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn cumulative_expected_reward(&self) -> f64 {
        self.cumulative_expected_reward
    }

    pub fn marginals(&self) -> Result<MarginalVector> {
        hedge_marginals(&self.weights, self.k)
    }

    pub fn predict<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(KSet, MarginalVector)> {
        let m = self.marginals()?;
        Ok((madow_sample(&m, rng), m))
    }

    /// `log w_i += eta * r_i`, then advances the round counter.
    pub fn update(&mut self, reward: &RewardVector) -> Result<()> {
        check_reward_len(reward, self.weights.len())?;
        for (i, &r) in reward.values().iter().enumerate() {
            if r != 0.0 {
                self.weights.bump(i, self.eta * r);
            }
        }
        self.round += 1;
        if let EtaSchedule::Doubling { ln_experts } = self.schedule {
            let next = self.round + 1;
            if next.is_power_of_two() {
                self.weights.reset();
                self.eta = tune_eta(next, ln_experts);
            }
        }
        Ok(())
    }

    /// Adds a round's expected reward to the running total.
    pub fn credit(&mut self, expected_reward: f64) {
        self.cumulative_expected_reward += expected_reward;
    }
}

impl MarginalPolicy for SageHedge {
    fn n(&self) -> usize {
        self.weights.len()
    }

    fn k(&self) -> usize {
        self.k
    }

    fn marginals(&self) -> Result<MarginalVector> {
        SageHedge::marginals(self)
    }

    fn observe(&mut self, reward: &RewardVector, played: &MarginalVector) -> Result<()> {
        self.update(reward)?;
        self.credit(played.dot(reward.values()));
        Ok(())
    }
}

/// `k ln(Ne/k)`, the usual upper bound on `ln binomial(N, k)`.
pub fn ln_meta_experts(n: usize, k: usize) -> f64 {
    let (n, k) = (n as f64, k as f64);
    k * (n * std::f64::consts::E / k).ln()
}

/// Small-loss regret bound for the k-sets problem:
/// `sqrt(2 k l* ln(Ne/k)) + k ln(Ne/k)`.
pub fn small_loss_bound(n: usize, k: usize, l_star: f64) -> f64 {
    let c = ln_meta_experts(n, k);
    (2.0 * c * l_star.max(0.0)).sqrt() + c
}

/// `sqrt(2 ln n / T)` where `ln_experts = ln n`.
pub fn tune_eta(horizon: usize, ln_experts: f64) -> f64 {
    (2.0 * ln_experts / horizon.max(1) as f64).sqrt()
}
