//! Follow-the-regularized-leader with the entropic regularizer over the
//! capped simplex `{p in [0,1]^N : sum p = k}`.
//!
//! The per-round objective is `psi(r_t . p_t)` for a concave non-decreasing
//! link `psi`; FTRL linearizes it, so the leader's scores are the summed
//! gradients `R_i = sum_s r_si psi'(r_s . p_s)`. The regularized leader has
//! the closed form `p_i = min(1, K exp(eta R_i))` ("water-filling").

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::environments::RewardVector;
use crate::error::{check_cardinality, Error, Result};
use crate::policy::{check_reward_len, MarginalPolicy};
use crate::sampling::{madow_sample, validate_marginals, KSet, MarginalVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkFunction {
    /// `psi(x) = x`; the plain sum reward.
    #[default]
    Identity,
    /// `psi(x) = sqrt(x + 1) - 1`
    SqrtShifted,
    /// `psi(x) = ln(1 + x)`
    Log1p,
}

impl LinkFunction {
    pub const ALL: [LinkFunction; 3] = [
        LinkFunction::Identity,
        LinkFunction::SqrtShifted,
        LinkFunction::Log1p,
    ];

    pub fn value(self, x: f64) -> f64 {
        match self {
            LinkFunction::Identity => x,
            LinkFunction::SqrtShifted => (x + 1.0).sqrt() - 1.0,
            LinkFunction::Log1p => x.ln_1p(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            LinkFunction::Identity => 1.0,
            LinkFunction::SqrtShifted => 0.5 / (x + 1.0).sqrt(),
            LinkFunction::Log1p => 1.0 / (1.0 + x),
        }
    }
}

impl FromStr for LinkFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "id" | "linear" => Ok(LinkFunction::Identity),
            "sqrt" | "sqrt-shifted" => Ok(LinkFunction::SqrtShifted),
            "log1p" | "log" => Ok(LinkFunction::Log1p),
            other => Err(Error::Config(format!("unknown link function `{other}`"))),
        }
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkFunction::Identity => "identity",
            LinkFunction::SqrtShifted => "sqrt-shifted",
            LinkFunction::Log1p => "log1p",
        })
    }
}

/// Solution of the water-filling program.
#[derive(Debug, Clone)]
pub struct WaterFill {
    pub marginals: MarginalVector,
    /// `ln K`; every free coordinate equals `exp(log_k + eta R_i)`.
    pub log_k: f64,
    /// Number of coordinates pinned at 1.
    pub saturated: usize,
}

/// `argmax_p eta <R, p> + H(p)` over the capped simplex, in closed form.
///
/// Scores are sorted in decreasing order (ties by index). With `s` items
/// saturated, the rest share `k - s` in proportion to `exp(eta R_i)`; `s` is
/// the smallest count for which the largest free item stays below one.
pub fn water_fill(r: &[f64], eta: f64, k: usize) -> Result<WaterFill> {
    let n = r.len();
    check_cardinality(k, n)?;
    let z: Vec<f64> = r.iter().map(|&x| eta * x).collect();
    if let Some(x) = z.iter().find(|x| !x.is_finite()) {
        return Err(Error::Config(format!("score {x} is not finite")));
    }
    if k == n {
        let z_min = z.iter().copied().fold(f64::INFINITY, f64::min);
        return Ok(WaterFill {
            marginals: validate_marginals(&vec![1.0; n], k)?,
            log_k: -z_min,
            saturated: n,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    let zs: Vec<f64> = order.iter().map(|&i| z[i]).collect();

    // tail[s] = ln sum_{j >= s} exp(zs[j]) for s <= k
    let anchor = zs[k];
    let rest: f64 = zs[k..].iter().map(|&x| (x - anchor).exp()).sum();
    let mut tail = vec![0.0; k + 1];
    tail[k] = anchor + rest.ln();
    for s in (0..k).rev() {
        tail[s] = log_add_exp(zs[s], tail[s + 1]);
    }

    let mut s = 0;
    while s < k - 1 && ((k - s) as f64).ln() + zs[s] > tail[s] {
        s += 1;
    }
    let log_k = ((k - s) as f64).ln() - tail[s];

    let mut probs = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        probs[i] = if rank < s {
            1.0
        } else {
            (log_k + z[i]).exp().min(1.0)
        };
    }
    let marginals = validate_marginals(&probs, k).map_err(|e| {
        Error::NumericalDegradation(format!("water-filling output is not feasible: {e}"))
    })?;
    Ok(WaterFill {
        marginals,
        log_k,
        saturated: s,
    })
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Sum of the `k` largest entries of `v`.
pub fn k_largest_sum(v: &[f64], k: usize) -> Result<f64> {
    if k > v.len() {
        return Err(Error::Cardinality { k, n: v.len() });
    }
    if k == 0 {
        return Ok(0.0);
    }
    if k == v.len() {
        return Ok(v.iter().sum());
    }
    let mut buf = v.to_vec();
    buf.select_nth_unstable_by(k - 1, |a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    Ok(buf[..k].iter().sum())
}

/// `k ln(N/k) / eta + 2 eta sum_t ||grad_t^2||_{k,inf}`.
pub fn gradient_bound(k: usize, n: usize, eta: f64, grad_history: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for g in grad_history {
        let sq: Vec<f64> = g.iter().map(|x| x * x).collect();
        total += k_largest_sum(&sq, k)?;
    }
    Ok(entropic_bound(k, n, eta, total))
}

/// The same bound given the accumulated `sum_t ||grad_t^2||_{k,inf}`.
pub fn entropic_bound(k: usize, n: usize, eta: f64, sq_grad_total: f64) -> f64 {
    let range = k as f64 * (n as f64 / k as f64).ln();
    let first = if range == 0.0 { 0.0 } else { range / eta };
    first + 2.0 * eta * sq_grad_total
}

/// Rate minimizing [`entropic_bound`] when every squared gradient has
/// k-largest-sum at most one: `sqrt(k ln(N/k) / (2T))`. Falls back to 1 when
/// `k = N` (any rate plays the full set).
pub fn tuned_eta(n: usize, k: usize, horizon: usize) -> f64 {
    let range = k as f64 * (n as f64 / k as f64).ln();
    if range <= 0.0 {
        return 1.0;
    }
    (range / (2.0 * horizon.max(1) as f64)).sqrt()
}

#[derive(Debug, Clone)]
pub struct FtrlState {
    grad_sum: Vec<f64>,
    eta: f64,
    k: usize,
    link: LinkFunction,
    sq_grad_total: f64,
}

impl FtrlState {
    pub fn new(n: usize, k: usize, eta: f64, link: LinkFunction) -> Result<Self> {
        check_cardinality(k, n)?;
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {eta} must be positive"
            )));
        }
        Ok(Self {
            grad_sum: vec![0.0; n],
            eta,
            k,
            link,
            sq_grad_total: 0.0,
        })
    }

    pub fn grad_sum(&self) -> &[f64] {
        &self.grad_sum
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn link(&self) -> LinkFunction {
        self.link
    }

    /// `sum_t ||grad_t^2||_{k,inf}` over the updates so far.
    pub fn sq_grad_total(&self) -> f64 {
        self.sq_grad_total
    }

    pub fn water_fill(&self) -> Result<WaterFill> {
        water_fill(&self.grad_sum, self.eta, self.k)
    }

    pub fn marginals(&self) -> Result<MarginalVector> {
        Ok(self.water_fill()?.marginals)
    }

    pub fn predict<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(KSet, MarginalVector)> {
        let m = self.marginals()?;
        Ok((madow_sample(&m, rng), m))
    }

    /// `R_i += r_i psi'(r . p_used)`; returns the gradient applied.
    pub fn update(&mut self, reward: &RewardVector, p_used: &MarginalVector) -> Result<Vec<f64>> {
        check_reward_len(reward, self.grad_sum.len())?;
        let slope = self.link.derivative(p_used.dot(reward.values()));
        let grad: Vec<f64> = reward.values().iter().map(|&r| r * slope).collect();
        for (acc, g) in self.grad_sum.iter_mut().zip(&grad) {
            *acc += g;
        }
        let sq: Vec<f64> = grad.iter().map(|g| g * g).collect();
        self.sq_grad_total += k_largest_sum(&sq, self.k)?;
        Ok(grad)
    }
}

impl MarginalPolicy for FtrlState {
    fn n(&self) -> usize {
        self.grad_sum.len()
    }

    fn k(&self) -> usize {
        self.k
    }

    fn marginals(&self) -> Result<MarginalVector> {
        FtrlState::marginals(self)
    }

    fn observe(&mut self, reward: &RewardVector, played: &MarginalVector) -> Result<()> {
        self.update(reward, played).map(|_| ())
    }
}
