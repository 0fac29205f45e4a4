//! The potential-based policy for stable loss functions on `[N]^T`.
//!
//! A loss `phi` over whole request sequences is achievable by some online
//! k-set policy iff it is stable and `E phi >= 1 - k/N` under uniform i.i.d.
//! requests. The witness policy uses the potentials
//! `phi_t(prefix) = E phi(prefix, uniform continuation)` and includes item
//! `i` at round `t` with probability
//! `T (phi_{t-1}(prefix) - phi_t(prefix i)) + k/N`.
//!
//! Everything here enumerates `[N]^T`, so instances are capped at
//! `N^T <= 10^7` sequences.

use rand::Rng;

use crate::error::{check_cardinality, Error, Result};
use crate::sampling::{madow_sample, validate_with_tolerance, KSet, MarginalVector};

const ENUMERATION_LIMIT: f64 = 1e7;
/// Floating-point slack in the stability and achievability comparisons.
const SLACK: f64 = 1e-12;
const FEASIBILITY: f64 = 1e-9;

/// A loss on full sequences, tabulated in base-`N` order (first request is
/// the most significant digit).
#[derive(Debug, Clone, PartialEq)]
pub struct LossFunction {
    n: usize,
    t: usize,
    k: usize,
    values: Vec<f64>,
}

fn sequence_count(n: usize, t: usize) -> Result<usize> {
    let size = (n as f64).powi(t as i32);
    if size > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge {
            what: "N^T sequences",
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(n.pow(t as u32))
}

impl LossFunction {
    pub fn from_values(n: usize, t: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        check_cardinality(k, n)?;
        if t == 0 {
            return Err(Error::Config("horizon must be at least one round".into()));
        }
        let count = sequence_count(n, t)?;
        if values.len() != count {
            return Err(Error::Config(format!(
                "expected {count} loss values, got {}",
                values.len()
            )));
        }
        if let Some((idx, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Config(format!(
                "loss {v} of sequence {idx} lies outside [0, 1]"
            )));
        }
        Ok(Self { n, t, k, values })
    }

    /// Tabulates `f` over every sequence.
    pub fn from_fn(n: usize, t: usize, k: usize, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let count = sequence_count(n, t)?;
        let mut seq = vec![0usize; t];
        let values = (0..count)
            .map(|idx| {
                decode_into(idx, n, &mut seq);
                f(&seq)
            })
            .collect();
        Self::from_values(n, t, k, values)
    }

    pub fn constant(n: usize, t: usize, k: usize, c: f64) -> Result<Self> {
        Self::from_values(n, t, k, vec![c; sequence_count(n, t)?])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, seq: &[usize]) -> f64 {
        self.values[encode(seq, self.n)]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn encode(seq: &[usize], n: usize) -> usize {
    seq.iter().fold(0, |acc, &y| acc * n + y)
}

fn decode_into(mut idx: usize, n: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % n;
        idx /= n;
    }
}

/// Decodes a sequence index (see [`LossFunction`]) into `t` requests.
pub fn decode_sequence(idx: usize, n: usize, t: usize) -> Vec<usize> {
    let mut out = vec![0; t];
    decode_into(idx, n, &mut out);
    out
}

/// `levels[t][prefix]` = `phi_t(prefix)` for prefixes of length `t`.
#[derive(Debug, Clone)]
pub struct PotentialTable {
    n: usize,
    t: usize,
    k: usize,
    levels: Vec<Vec<f64>>,
}

impl PotentialTable {
    pub fn new(phi: &LossFunction) -> Self {
        let n = phi.n;
        let mut levels = vec![phi.values.clone()];
        for _ in 0..phi.t {
            let next: Vec<f64> = levels
                .last()
                .expect("nonempty")
                .chunks_exact(n)
                .map(|c| c.iter().sum::<f64>() / n as f64)
                .collect();
            levels.push(next);
        }
        levels.reverse();
        Self {
            n,
            t: phi.t,
            k: phi.k,
            levels,
        }
    }

    pub fn potential(&self, prefix: &[usize]) -> f64 {
        self.levels[prefix.len()][encode(prefix, self.n)]
    }

    /// `phi_0`, the mean of the loss.
    pub fn root(&self) -> f64 {
        self.levels[0][0]
    }

    fn raw_inclusion(&self, prefix_idx: usize, depth: usize, item: usize) -> f64 {
        let before = self.levels[depth][prefix_idx];
        let after = self.levels[depth + 1][prefix_idx * self.n + item];
        self.t as f64 * (before - after) + self.k as f64 / self.n as f64
    }
}

/// First coordinate at which stability fails.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityViolation {
    /// A sequence attaining the violating extreme.
    pub sequence: Vec<usize>,
    /// Zero-based position of the varied request.
    pub position: usize,
    pub max_minus_mean: f64,
    pub mean_minus_min: f64,
}

/// Checks, for every sequence and position, that varying that one request
/// moves the loss at most `k/(NT)` above and `(1 - k/N)/T` below its mean.
pub fn stability_check(phi: &LossFunction) -> Result<Option<StabilityViolation>> {
    let (n, t) = (phi.n, phi.t);
    let count = sequence_count(n, t)?;
    let up = phi.k as f64 / (n * t) as f64 + SLACK;
    let down = (1.0 - phi.k as f64 / n as f64) / t as f64 + SLACK;
    for position in 0..t {
        let stride = n.pow((t - 1 - position) as u32);
        for base in (0..count).filter(|idx| (idx / stride) % n == 0) {
            let group = (0..n).map(|i| phi.values[base + i * stride]);
            let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for v in group {
                lo = lo.min(v);
                hi = hi.max(v);
                sum += v;
            }
            let mean = sum / n as f64;
            if hi - mean > up || mean - lo > down {
                let worst = (0..n)
                    .max_by(|&a, &b| {
                        let da = (phi.values[base + a * stride] - mean).abs();
                        let db = (phi.values[base + b * stride] - mean).abs();
                        da.total_cmp(&db)
                    })
                    .unwrap_or(0);
                return Ok(Some(StabilityViolation {
                    sequence: decode_sequence(base + worst * stride, n, t),
                    position,
                    max_minus_mean: hi - mean,
                    mean_minus_min: mean - lo,
                }));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Achievability {
    pub mean: f64,
    pub threshold: f64,
    pub achievable: bool,
}

/// Exact `E phi` under uniform requests, compared with `1 - k/N`.
pub fn achievability_check(phi: &LossFunction) -> Result<Achievability> {
    let mean = phi.mean();
    let threshold = 1.0 - phi.k as f64 / phi.n as f64;
    Ok(Achievability {
        mean,
        threshold,
        achievable: mean >= threshold - SLACK,
    })
}

/// Inclusion probabilities for the round after `prefix`.
pub fn cover_marginals(table: &PotentialTable, prefix: &[usize]) -> Result<MarginalVector> {
    let depth = prefix.len();
    if depth >= table.t {
        return Err(Error::Config(format!(
            "prefix of length {depth} leaves no round to play (T = {})",
            table.t
        )));
    }
    let idx = encode(prefix, table.n);
    let probs: Vec<f64> = (0..table.n)
        .map(|i| table.raw_inclusion(idx, depth, i))
        .collect();
    validate_with_tolerance(&probs, table.k, FEASIBILITY).map_err(|e| Error::FeasibilityViolation {
        round: depth + 1,
        reason: e.to_string(),
    })
}

/// `mu(y) = (1/T) sum_t (1 - p_t(y_t))`, computed from the potentials.
pub fn exact_expected_loss(table: &PotentialTable, seq: &[usize]) -> f64 {
    let mut prefix = 0usize;
    let mut total = 0.0;
    for (depth, &y) in seq.iter().enumerate() {
        total += 1.0 - table.raw_inclusion(prefix, depth, y);
        prefix = prefix * table.n + y;
    }
    total / table.t as f64
}

#[derive(Debug, Clone)]
pub struct CoverRound {
    pub marginals: MarginalVector,
    pub set: KSet,
    pub request: usize,
    pub hit: bool,
}

/// Plays the policy against `seq`, sampling each round's set.
pub fn cover_play<R: Rng + ?Sized>(
    table: &PotentialTable,
    seq: &[usize],
    rng: &mut R,
) -> Result<Vec<CoverRound>> {
    if seq.len() != table.t {
        return Err(Error::Config(format!(
            "sequence has {} requests, the loss is defined on {}",
            seq.len(),
            table.t
        )));
    }
    if let Some(&y) = seq.iter().find(|&&y| y >= table.n) {
        return Err(Error::Range {
            line: 0,
            id: y,
            n: table.n,
        });
    }
    (0..seq.len())
        .map(|t| {
            let marginals = cover_marginals(table, &seq[..t])?;
            let set = madow_sample(&marginals, rng);
            let hit = set.contains(seq[t]);
            Ok(CoverRound {
                marginals,
                set,
                request: seq[t],
                hit,
            })
        })
        .collect()
}

/// Random stable, achievable loss: a centred perturbation of a constant,
/// shrunk until it satisfies both stability budgets and stays in `[0, 1]`.
pub fn generate_stable_phi<R: Rng + ?Sized>(
    n: usize,
    t: usize,
    k: usize,
    rng: &mut R,
) -> Result<LossFunction> {
    check_cardinality(k, n)?;
    let count = sequence_count(n, t)?;
    let base = 1.0 - k as f64 / n as f64;
    let mut noise: Vec<f64> = (0..count).map(|_| rng.random_range(-1.0..1.0)).collect();
    let centre = noise.iter().sum::<f64>() / count as f64;
    noise.iter_mut().for_each(|x| *x -= centre);

    // Largest excursions of the noise along any single coordinate.
    let probe = LossFunction {
        n,
        t,
        k,
        values: noise.clone(),
    };
    let (up, down) = coordinate_spread(&probe);
    let up_budget = k as f64 / (n * t) as f64;
    let down_budget = (1.0 - k as f64 / n as f64) / t as f64;
    let mut scale: f64 = rng.random_range(0.5..1.0);
    if up > 0.0 {
        scale = scale.min(0.999 * up_budget / up);
    }
    if down > 0.0 {
        scale = scale.min(0.999 * down_budget / down);
    }
    let (lo, hi) = noise
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| {
            (l.min(x), h.max(x))
        });
    let headroom = 1.0 - base - scale * hi;
    let offset = if headroom > 0.0 {
        rng.random_range(0.0..=headroom * 0.5)
    } else {
        0.0
    };
    loop {
        let values: Vec<f64> = noise.iter().map(|&x| base + offset + scale * x).collect();
        let in_range = base + offset + scale * lo >= 0.0 && base + offset + scale * hi <= 1.0;
        if in_range {
            let phi = LossFunction::from_values(n, t, k, values)?;
            if stability_check(&phi)?.is_none() && achievability_check(&phi)?.achievable {
                return Ok(phi);
            }
        }
        scale *= 0.5;
        if scale < 1e-300 {
            return LossFunction::constant(n, t, k, base + offset);
        }
    }
}

/// Largest `max - mean` and `mean - min` over all single-coordinate fibres.
fn coordinate_spread(phi: &LossFunction) -> (f64, f64) {
    let (n, t) = (phi.n, phi.t);
    let count = phi.values.len();
    let (mut up, mut down) = (0.0f64, 0.0f64);
    for position in 0..t {
        let stride = n.pow((t - 1 - position) as u32);
        for base in (0..count).filter(|idx| (idx / stride) % n == 0) {
            let vals: Vec<f64> = (0..n).map(|i| phi.values[base + i * stride]).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            up = up.max(hi - mean);
            down = down.max(mean - lo);
        }
    }
    (up, down)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_fraction_of_zeros() -> LossFunction {
        LossFunction::from_fn(2, 2, 1, |y| {
            let zeros = y.iter().filter(|&&s| s == 0).count() as f64;
            0.5 * zeros / y.len() as f64 + 0.25
        })
        .unwrap()
    }

    #[test]
    fn constant_loss_is_stable() {
        let phi = LossFunction::constant(3, 4, 1, 0.7).unwrap();
        assert_eq!(stability_check(&phi).unwrap(), None);
        let table = PotentialTable::new(&phi);
        let m = cover_marginals(&table, &[2, 0]).unwrap();
        assert!(m.probs().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn coordinate_flip_breaks_stability() {
        // N=2, k=1, T=2: the first request moves the loss by 0.6
        let phi = LossFunction::from_fn(2, 2, 1, |y| if y[0] == 0 { 0.8 } else { 0.2 }).unwrap();
        let v = stability_check(&phi).unwrap().expect("violation");
        assert_eq!(v.position, 0);
        assert!((v.max_minus_mean - 0.3).abs() < 1e-12);
    }

    #[test]
    fn achievability_examples() {
        let exact = LossFunction::constant(4, 2, 2, 0.5).unwrap();
        let a = achievability_check(&exact).unwrap();
        assert!(a.achievable && a.mean == 0.5);
        assert!(
            achievability_check(&LossFunction::constant(4, 2, 2, 0.9).unwrap())
                .unwrap()
                .achievable
        );
        assert!(
            !achievability_check(&LossFunction::constant(4, 2, 2, 0.4).unwrap())
                .unwrap()
                .achievable
        );
    }

    #[test]
    fn hand_enumerated_marginals() {
        let phi = half_fraction_of_zeros();
        let table = PotentialTable::new(&phi);
        assert!((table.root() - 0.5).abs() < 1e-15);
        assert!((table.potential(&[0]) - 5.0 / 8.0).abs() < 1e-15);
        let m = cover_marginals(&table, &[]).unwrap();
        assert!((m.get(0) - 0.25).abs() < 1e-15);
        assert!((m.get(1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn telescoping_identity_on_small_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = generate_stable_phi(3, 5, 1, &mut rng).unwrap();
        let table = PotentialTable::new(&phi);
        let gap = 1.0 - 1.0 / 3.0 - phi.mean();
        for idx in 0..phi.values().len() {
            let y = decode_sequence(idx, 3, 5);
            let mu = exact_expected_loss(&table, &y);
            assert!((mu - phi.eval(&y) - gap).abs() <= 1e-12);
            assert!(mu <= phi.eval(&y) + 1e-12);
        }
    }

    #[test]
    fn constant_loss_at_threshold_is_met_exactly() {
        let phi = LossFunction::constant(4, 3, 2, 0.5).unwrap();
        let table = PotentialTable::new(&phi);
        assert_eq!(exact_expected_loss(&table, &[0, 3, 1]), 0.5);
    }

    #[test]
    fn full_set_never_misses() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi = LossFunction::constant(3, 4, 3, 0.0).unwrap();
        let table = PotentialTable::new(&phi);
        let rounds = cover_play(&table, &[0, 2, 1, 1], &mut rng).unwrap();
        assert!(rounds.iter().all(|r| r.hit));
    }

    #[test]
    fn monte_carlo_loss_of_constant_phi() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phi = LossFunction::constant(4, 8, 1, 0.75).unwrap();
        let table = PotentialTable::new(&phi);
        let seq = [0, 1, 2, 3, 3, 2, 1, 0];
        let reps = 4000;
        let misses: usize = (0..reps)
            .map(|_| {
                cover_play(&table, &seq, &mut rng)
                    .unwrap()
                    .iter()
                    .filter(|r| !r.hit)
                    .count()
            })
            .sum();
        let rate = misses as f64 / (reps * seq.len()) as f64;
        assert!(
            (rate - exact_expected_loss(&table, &seq)).abs() < 0.01,
            "{rate}"
        );
    }

    #[test]
    fn rewarded_symbol_gets_more_mass() {
        let phi = half_fraction_of_zeros();
        let table = PotentialTable::new(&phi);
        for prefix in [&[][..], &[0][..], &[1][..]] {
            let m = cover_marginals(&table, prefix).unwrap();
            assert!(m.get(1) > m.get(0));
        }
    }

    #[test]
    fn generated_losses_are_stable_and_achievable() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for &(n, t, k) in &[(2, 6, 1), (3, 4, 2), (4, 3, 2)] {
            let phi = generate_stable_phi(n, t, k, &mut rng).unwrap();
            assert_eq!(stability_check(&phi).unwrap(), None);
            assert!(achievability_check(&phi).unwrap().achievable);
            let table = PotentialTable::new(&phi);
            for idx in 0..phi.values().len() {
                let y = decode_sequence(idx, n, t);
                for depth in 0..t {
                    cover_marginals(&table, &y[..depth]).unwrap();
                }
            }
        }
    }

    #[test]
    fn enumeration_guard() {
        assert!(matches!(
            LossFunction::constant(10, 8, 1, 0.5),
            Err(Error::InstanceTooLarge { .. })
        ));
    }
}
