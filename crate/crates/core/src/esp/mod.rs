//! Elementary symmetric polynomials and the Hedge marginals built on them.
//!
//! Hedge over all k-subsets puts mass proportional to `prod_{i in S} w_i` on
//! each subset `S`. Marginalizing gives
//!
//! ```text
//! p_i = w_i * e_{k-1}(w_{-i}) / e_k(w)
//! ```
//!
//! where `e_l` is the elementary symmetric polynomial of order `l` and
//! `w_{-i}` drops item `i`. [`esp_prefix_suffix`] evaluates every quantity in
//! that formula with one forward and one backward pass over the items
//! (`O(Nk)` work). Leave-one-out values come from convolving a prefix row with
//! a suffix row, never from polynomial division.

mod coeffs;
mod scaled;

pub use coeffs::{CoeffState, IterativeHedge};
pub use scaled::Scaled;

use crate::error::{check_cardinality, Error, Result};
use crate::sampling::{validate_marginals, MarginalVector};

/// Expert weights held as natural logarithms, `log w_i = eta * R_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    log_weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(Error::Config("weight vector must be nonempty".into()));
        }
        if let Some(x) = log_weights.iter().find(|x| !x.is_finite()) {
            return Err(Error::Config(format!("log-weight {x} is not finite")));
        }
        Ok(Self { log_weights })
    }

    /// All weights equal to one.
    pub fn uniform(n: usize) -> Self {
        Self {
            log_weights: vec![0.0; n],
        }
    }

    /// Builds log-weights from plain positive weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::Config(format!(
                "weight {w} must be positive and finite"
            )));
        }
        Self::new(weights.iter().map(|w| w.ln()).collect())
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_weight(&self, i: usize) -> f64 {
        self.log_weights[i]
    }

    /// Multiplies weight `i` by `exp(delta)`.
    pub fn bump(&mut self, i: usize, delta: f64) {
        self.log_weights[i] += delta;
    }

    pub fn reset(&mut self) {
        self.log_weights.iter_mut().for_each(|x| *x = 0.0);
    }

    fn max_log_weight(&self) -> f64 {
        self.log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Weights divided by the largest one, in extended range.
    fn shifted(&self, shift: f64) -> Vec<Scaled> {
        self.log_weights
            .iter()
            .map(|&lw| {
                let x = lw - shift;
                if x > -700.0 {
                    Scaled::from_f64(x.exp())
                } else {
                    Scaled::exp(x)
                }
            })
            .collect()
    }
}

/// Output of [`esp_prefix_suffix`].
///
/// Values are stored for the weights divided by `exp(shift)`; the accessors
/// undo the shift (`e_l` scales by `exp(l * shift)`).
#[derive(Debug, Clone)]
pub struct EspTable {
    k: usize,
    shift: f64,
    orders: Vec<Scaled>,
    leave_one_out: Vec<Scaled>,
    shifted_weights: Vec<Scaled>,
}

impl EspTable {
    pub fn k(&self) -> usize {
        self.k
    }

    /// `ln e_l(w)` for `l <= k`.
    pub fn ln_e(&self, l: usize) -> f64 {
        self.orders[l].ln() + l as f64 * self.shift
    }

    /// `e_l(w)`; overflows to `inf` when the true value exceeds `f64`.
    pub fn e(&self, l: usize) -> f64 {
        self.ln_e(l).exp()
    }

    /// `ln e_{k-1}(w_{-i})`.
    pub fn ln_leave_one_out(&self, i: usize) -> f64 {
        self.leave_one_out[i].ln() + (self.k - 1) as f64 * self.shift
    }

    /// `e_{k-1}(w_{-i})`.
    pub fn leave_one_out(&self, i: usize) -> f64 {
        self.ln_leave_one_out(i).exp()
    }

    /// `w_i e_{k-1}(w_{-i}) / e_k(w)`, computed without leaving extended range.
    pub fn inclusion(&self, i: usize) -> f64 {
        (self.shifted_weights[i] * self.leave_one_out[i]).ratio(self.orders[self.k])
    }
}

/// Evaluates `e_0..=e_k` of `w` and `e_{k-1}(w_{-i})` for every item.
pub fn esp_prefix_suffix(w: &WeightVector, k: usize) -> Result<EspTable> {
    let n = w.len();
    check_cardinality(k, n)?;
    let shift = w.max_log_weight();
    let v = w.shifted(shift);
    let width = k + 1;

    // prefix[i * width + l] = e_l(v_0, ..., v_{i-1})
    let mut prefix = vec![Scaled::ZERO; (n + 1) * width];
    prefix[0] = Scaled::ONE;
    for i in 0..n {
        let (done, rest) = prefix.split_at_mut((i + 1) * width);
        let prev = &done[i * width..];
        let next = &mut rest[..width];
        next[0] = Scaled::ONE;
        let top = width.min(i + 2);
        for l in 1..top {
            next[l] = prev[l] + v[i] * prev[l - 1];
        }
    }
    let orders = prefix[n * width..].to_vec();

    // Walk backwards keeping suffix[l] = e_l(v_{i+1}, ..., v_{n-1}).
    let mut suffix = vec![Scaled::ZERO; k];
    suffix[0] = Scaled::ONE;
    let mut leave_one_out = vec![Scaled::ZERO; n];
    for i in (0..n).rev() {
        let pre = &prefix[i * width..i * width + k];
        let mut acc = Scaled::ZERO;
        for j in 0..k {
            acc = acc + pre[j] * suffix[k - 1 - j];
        }
        leave_one_out[i] = acc;
        for l in (1..k).rev() {
            suffix[l] = suffix[l] + v[i] * suffix[l - 1];
        }
    }

    Ok(EspTable {
        k,
        shift,
        orders,
        leave_one_out,
        shifted_weights: v,
    })
}

/// Marginal inclusion probabilities of Hedge run over all k-subsets.
pub fn hedge_marginals(w: &WeightVector, k: usize) -> Result<MarginalVector> {
    let table = esp_prefix_suffix(w, k)?;
    let probs: Vec<f64> = (0..w.len()).map(|i| table.inclusion(i)).collect();
    validate_marginals(&probs, k).map_err(|e| match e {
        Error::InfeasibleMarginals { reason } => Error::NumericalDegradation(format!(
            "symmetric-polynomial marginals failed feasibility: {reason}"
        )),
        other => other,
    })
}
