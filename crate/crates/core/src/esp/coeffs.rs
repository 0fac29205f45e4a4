//! Incremental Hedge marginals through the coefficients of
//! `g(X) = prod_i (X - w_i) = sum_j a_j X^j`.
//!
//! When only item `f` changes weight from `w` to `c * w`, the coefficients
//! follow
//!
//! ```text
//! a'_0 = c * a_0
//! a'_j = (a'_{j-1} - a_{j-1}) / w + c * a_j      (1 <= j <= N)
//! ```
//!
//! and the marginals are read off as
//! `p_i = sum_{j=0}^{N-k} a_j w_i^{-(N-k-j)} / a_{N-k}`.
//!
//! Both are divisions of `g` by a linear factor `(X - w)`. Run bottom-up
//! they divide by `w` at every step and lose accuracy on the coefficients
//! where `w` is small next to the other roots; run top-down they lose it
//! where `w` is large. We split the division at the coefficient maximizing
//! `|a_j| w^j` and go bottom-up below it, top-down above it (composite
//! deflation), then multiply back by `(X - c w)`, which has no cancellation.
//!
//! The coefficients start at `+-binomial(N, j)` and the engine is meant for
//! small `N` (validated up to 32); [`IterativeHedge`] falls back to the
//! symmetric-polynomial DP whenever a read-out fails the feasibility check.

use crate::combin::binomial;
use crate::error::{check_cardinality, Error, Result};
use crate::esp::{hedge_marginals, WeightVector};
use crate::sampling::{validate_marginals, MarginalVector};

#[derive(Debug, Clone, PartialEq)]
pub struct CoeffState {
    a: Vec<f64>,
    eta: f64,
    n: usize,
}

impl CoeffState {
    /// Coefficients of `(X - 1)^n`, i.e. every weight equal to one.
    pub fn init(n: usize, eta: f64) -> Self {
        let a = (0..=n)
            .map(|j| {
                let sign = if (n - j).is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * binomial(n, j)
            })
            .collect();
        Self { a, eta, n }
    }

    /// Expands `prod_i (X - w_i)` for the given weights directly.
    pub fn from_weights(w: &WeightVector, eta: f64) -> Self {
        let n = w.len();
        let mut a = vec![0.0; n + 1];
        a[0] = 1.0;
        for (deg, &lw) in w.log_weights().iter().enumerate() {
            let wi = lw.exp();
            // multiply the degree-`deg` polynomial by (X - wi)
            for j in (0..=deg + 1).rev() {
                let shifted = if j > 0 { a[j - 1] } else { 0.0 };
                let kept = if j <= deg { a[j] } else { 0.0 };
                a[j] = shifted - wi * kept;
            }
        }
        Self { a, eta, n }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Item `item`, whose weight was `w_prev`, gains one unit of reward:
    /// its weight becomes `w_prev * exp(eta)`.
    pub fn update(&mut self, item: usize, w_prev: f64) {
        self.update_by(item, w_prev, self.eta.exp());
    }

    /// Same update for an arbitrary multiplicative factor.
    pub fn update_by(&mut self, item: usize, w_prev: f64, factor: f64) {
        debug_assert!(item < self.n);
        if factor == 1.0 {
            return;
        }
        let h = self.deflate(w_prev);
        // g' = h * (X - c w)
        let cw = factor * w_prev;
        let n = self.n;
        self.a[0] = -cw * h[0];
        for j in 1..n {
            self.a[j] = h[j - 1] - cw * h[j];
        }
        self.a[n] = h[n - 1];
    }

    /// `g(X) / (X - w)` for a root `w` of `g`, by composite deflation.
    fn deflate(&self, w: f64) -> Vec<f64> {
        let n = self.n;
        let s = self.split(w);
        let mut h = vec![0.0; n];
        // bottom-up for h_0..h_{s-1}
        let inv = 1.0 / w;
        let mut prev = 0.0;
        for j in 0..s.min(n) {
            prev = (prev - self.a[j]) * inv;
            h[j] = prev;
        }
        // top-down for h_s..h_{n-1}
        if s < n {
            h[n - 1] = self.a[n];
            for j in (s + 1..n).rev() {
                h[j - 1] = self.a[j] + w * h[j];
            }
        }
        h
    }

    /// Index maximizing `|a_j| w^j`.
    fn split(&self, w: f64) -> usize {
        let lw = w.ln();
        let mut best = (f64::NEG_INFINITY, 0);
        for (j, &aj) in self.a.iter().enumerate() {
            let score = aj.abs().ln() + j as f64 * lw;
            if score > best.0 {
                best = (score, j);
            }
        }
        best.1
    }

    /// `(-1)^{N-1-m} e_m(w_{-i})` read from `g / (X - w_i)`, i.e. the
    /// coefficient `h_{N-1-m}` of the quotient, computed from whichever end
    /// is stable for `w_i`.
    fn quotient_coefficient(&self, w: f64, idx: usize) -> f64 {
        let n = self.n;
        if idx < self.split(w) {
            let inv = 1.0 / w;
            let mut prev = 0.0;
            for j in 0..=idx {
                prev = (prev - self.a[j]) * inv;
            }
            prev
        } else {
            let mut h = self.a[n];
            for j in (idx + 1..n).rev() {
                h = self.a[j] + w * h;
            }
            h
        }
    }

    /// `e_k(w) = (-1)^k a_{N-k}`.
    pub fn esp(&self, k: usize) -> f64 {
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * self.a[self.n - k]
    }

    /// Marginals read off the coefficients for weights `w` (which must be
    /// the weights the coefficients currently describe).
    pub fn marginals(&self, w: &WeightVector, k: usize) -> Result<MarginalVector> {
        check_cardinality(k, self.n)?;
        if w.len() != self.n {
            return Err(Error::Config(format!(
                "weight vector has {} items, coefficients describe {}",
                w.len(),
                self.n
            )));
        }
        let top = self.n - k;
        let denom = self.a[top];
        // p_i = w_i e_{k-1}(w_{-i}) / e_k(w); the quotient coefficient at
        // index N-k carries the same sign as a_{N-k}, with opposite parity.
        let probs: Vec<f64> = w
            .log_weights()
            .iter()
            .map(|&lw| {
                let wi = lw.exp();
                -wi * self.quotient_coefficient(wi, top) / denom
            })
            .collect();
        validate_marginals(&probs, k).map_err(|e| {
            Error::NumericalDegradation(format!("coefficient read-out is not feasible: {e}"))
        })
    }
}

/// Hedge over k-sets driven by the coefficient recurrence, falling back to
/// the DP (and re-expanding the coefficients) on numerical trouble.
#[derive(Debug, Clone)]
pub struct IterativeHedge {
    coeffs: CoeffState,
    weights: WeightVector,
    k: usize,
    fallbacks: usize,
}

impl IterativeHedge {
    pub fn new(n: usize, k: usize, eta: f64) -> Result<Self> {
        check_cardinality(k, n)?;
        Ok(Self {
            coeffs: CoeffState::init(n, eta),
            weights: WeightVector::uniform(n),
            k,
            fallbacks: 0,
        })
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn coeffs(&self) -> &CoeffState {
        &self.coeffs
    }

    /// Number of rounds that needed the DP fallback.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    /// Records a unit reward on `item`.
    pub fn observe(&mut self, item: usize) {
        let w_prev = self.weights.log_weight(item).exp();
        self.coeffs.update(item, w_prev);
        self.weights.bump(item, self.coeffs.eta());
    }

    pub fn marginals(&mut self) -> Result<MarginalVector> {
        match self.coeffs.marginals(&self.weights, self.k) {
            Ok(m) => Ok(m),
            Err(Error::NumericalDegradation(_)) => {
                self.fallbacks += 1;
                self.coeffs = CoeffState::from_weights(&self.weights, self.coeffs.eta());
                hedge_marginals(&self.weights, self.k)
            }
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esp::esp_prefix_suffix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_is_binomial_expansion() {
        assert_eq!(
            CoeffState::init(3, 0.1).coefficients(),
            &[-1.0, 3.0, -3.0, 1.0]
        );
        assert_eq!(CoeffState::init(1, 0.1).coefficients(), &[-1.0, 1.0]);
        assert_eq!(CoeffState::init(2, 0.1).coefficients(), &[1.0, -2.0, 1.0]);
    }

    #[test]
    fn one_bump_doubles_a_root() {
        let mut c = CoeffState::init(2, std::f64::consts::LN_2);
        c.update(0, 1.0);
        let a = c.coefficients();
        for (x, y) in a.iter().zip([2.0, -3.0, 1.0]) {
            assert!((x - y).abs() < 1e-12, "{a:?}");
        }
    }

    #[test]
    fn zero_rate_leaves_state_unchanged() {
        let mut c = CoeffState::init(5, 0.0);
        let before = c.clone();
        c.update(2, 1.0);
        assert_eq!(c, before);
    }

    #[test]
    fn bump_and_unbump_restore_the_rebuild() {
        let eta = 0.7;
        let mut w = WeightVector::new(vec![0.0, 0.7, 1.4, 0.0, 2.1]).unwrap();
        let mut c = CoeffState::from_weights(&w, eta);
        let w1 = w.log_weight(1).exp();
        c.update_by(1, w1, eta.exp());
        w.bump(1, eta);
        c.update_by(1, w.log_weight(1).exp(), (-eta).exp());
        w.bump(1, -eta);
        let rebuilt = CoeffState::from_weights(&w, eta);
        for (x, y) in c.coefficients().iter().zip(rebuilt.coefficients()) {
            assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn symmetric_read_out() {
        let c = CoeffState::init(4, 0.3);
        let m = c.marginals(&WeightVector::uniform(4), 2).unwrap();
        assert!(m.probs().iter().all(|p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn softmax_at_k_one() {
        let w = WeightVector::from_weights(&[2.0, 1.0]).unwrap();
        let c = CoeffState::from_weights(&w, 0.0);
        let m = c.marginals(&w, 1).unwrap();
        assert!((m.get(0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.get(1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fifty_round_history_matches_dp() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut engine = IterativeHedge::new(8, 3, 0.1).unwrap();
        for _ in 0..50 {
            engine.observe(rng.random_range(0..8));
        }
        let from_coeffs = engine.coeffs().marginals(engine.weights(), 3).unwrap();
        let dp = hedge_marginals(engine.weights(), 3).unwrap();
        for (a, b) in from_coeffs.probs().iter().zip(dp.probs()) {
            assert!((a - b).abs() / b <= 1e-6);
        }
    }

    #[test]
    fn vieta_matches_dp_esp() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in 1..=10 {
            let mut engine = IterativeHedge::new(n, 1, 0.25).unwrap();
            for _ in 0..40 {
                engine.observe(rng.random_range(0..n));
                let table = esp_prefix_suffix(engine.weights(), n).unwrap();
                for k in 1..=n {
                    let exact = table.e(k);
                    let err = (engine.coeffs().esp(k) - exact).abs() / exact;
                    assert!(err <= 1e-8, "n={n} k={k} err={err:e}");
                }
            }
        }
    }
}
