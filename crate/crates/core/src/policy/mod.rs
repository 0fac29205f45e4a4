//! Online policies that play a k-set each round through its marginals.

pub mod cover;
pub mod ftrl;
pub mod pairwise;
pub mod sage_hedge;

pub use ftrl::{water_fill, FtrlState, LinkFunction, WaterFill};
pub use pairwise::PairwisePolicy;
pub use sage_hedge::{EtaSchedule, SageHedge};

use rand::Rng;

use crate::environments::RewardVector;
use crate::error::{Error, Result};
use crate::sampling::{madow_sample, KSet, MarginalVector};

/// A learner over `n` experts that exposes its inclusion probabilities.
pub trait MarginalPolicy {
    fn n(&self) -> usize;

    fn k(&self) -> usize;

    /// Marginals for the coming round.
    fn marginals(&self) -> Result<MarginalVector>;

    /// Feeds back the round's rewards; `played` is what [`Self::marginals`]
    /// returned for that round.
    fn observe(&mut self, reward: &RewardVector, played: &MarginalVector) -> Result<()>;

    fn predict<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(KSet, MarginalVector)>
    where
        Self: Sized,
    {
        let m = self.marginals()?;
        Ok((madow_sample(&m, rng), m))
    }
}

pub(crate) fn check_reward_len(reward: &RewardVector, n: usize) -> Result<()> {
    if reward.len() != n {
        return Err(Error::Config(format!(
            "reward vector has {} entries, policy has {n} experts",
            reward.len()
        )));
    }
    Ok(())
}
