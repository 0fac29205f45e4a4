//! Drives a policy over a trace and records regret round by round.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{ftpl_default_sigma, ftpl_predict, CacheState};
use crate::environments::{
    gen_bernoulli_ensemble, gen_distance_reward, gen_zipf_onehot, gen_zipf_pairs, load_trace_csv,
    reward_eval, Round, Rounds, Trace, TraceKind, Variant,
};
use crate::error::{check_cardinality, Error, Result};
use crate::harness::bounds::{bound_table, BoundTable};
use crate::harness::oracle::{
    column_sums, oracle_bruteforce, oracle_partition_lowerbound, pair_oracles, top_k,
};
use crate::policy::cover::{cover_marginals, generate_stable_phi, PotentialTable};
use crate::policy::ftrl::{entropic_bound, tuned_eta, FtrlState, LinkFunction};
use crate::policy::pairwise::{
    improper_bound, pair_encode, pairwise_reward, super_item_count, PairBase, PairwisePolicy,
};
use crate::policy::sage_hedge::{ln_meta_experts, small_loss_bound, tune_eta, SageHedge};
use crate::policy::{EtaSchedule, MarginalPolicy};
use crate::sampling::madow_sample;

pub const CSV_HEADER: [&str; 6] = [
    "t",
    "expected_reward",
    "cum_reward",
    "oracle_cum",
    "regret",
    "normalized_regret",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    SageHedge,
    Ftrl,
    Pairwise,
    Cover,
    Lru,
    Lfu,
    Ftpl,
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "sage-hedge" | "hedge" => PolicyKind::SageHedge,
            "ftrl" | "sage-ftrl" => PolicyKind::Ftrl,
            "pairwise" => PolicyKind::Pairwise,
            "cover" => PolicyKind::Cover,
            "lru" => PolicyKind::Lru,
            "lfu" => PolicyKind::Lfu,
            "ftpl" => PolicyKind::Ftpl,
            other => return Err(Error::Config(format!("unknown policy `{other}`"))),
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::SageHedge => "sage-hedge",
            PolicyKind::Ftrl => "ftrl",
            PolicyKind::Pairwise => "pairwise",
            PolicyKind::Cover => "cover",
            PolicyKind::Lru => "lru",
            PolicyKind::Lfu => "lfu",
            PolicyKind::Ftpl => "ftpl",
        })
    }
}

/// How a round's reward is credited.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accounting {
    /// The expectation under the played marginals (`p_t . r_t`), where that
    /// determines the expected reward.
    Exact,
    /// The reward of the sampled set.
    Sampled,
}

impl FromStr for Accounting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(Accounting::Exact),
            "sampled" => Ok(Accounting::Sampled),
            other => Err(Error::Config(format!("unknown accounting mode `{other}`"))),
        }
    }
}

impl fmt::Display for Accounting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Accounting::Exact => "exact",
            Accounting::Sampled => "sampled",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    File {
        path: PathBuf,
        kind: TraceKind,
    },
    /// Zipf one-hot requests (pair requests for the pair variant).
    Zipf {
        exponent: f64,
    },
    /// Dense i.i.d. Bernoulli rewards.
    Bernoulli {
        p: f64,
    },
    /// Distance rewards around Zipf-distributed requests.
    Distance {
        exponent: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub policy: PolicyKind,
    pub variant: Variant,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub eta: Option<f64>,
    pub sigma: Option<f64>,
    pub link: LinkFunction,
    pub source: TraceSource,
    pub seed: Option<u64>,
    pub accounting: Accounting,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(policy: PolicyKind, variant: Variant, n: usize, k: usize, t: usize) -> Self {
        Self {
            policy,
            variant,
            n,
            k,
            t,
            eta: None,
            sigma: None,
            link: LinkFunction::Identity,
            source: TraceSource::Zipf { exponent: 0.8 },
            seed: Some(0),
            accounting: Accounting::Exact,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_cardinality(self.k, self.n)?;
        if self.t == 0 {
            return Err(Error::Config("the horizon T must be positive".into()));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::Config(format!("--eta {eta} must be positive")));
            }
        }
        if let Some(sigma) = self.sigma {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::Config(format!("--sigma {sigma} must be >= 0")));
            }
        }
        let generated = !matches!(self.source, TraceSource::File { .. });
        if self.seed.is_none() && (generated || self.accounting == Accounting::Sampled) {
            return Err(Error::Config(
                "a seed is required for generated traces and sampled accounting".into(),
            ));
        }
        Ok(())
    }

    /// Builds or loads the trace this configuration describes.
    pub fn trace(&self) -> Result<Trace> {
        let mut rng = self.rng(0);
        match &self.source {
            TraceSource::File { path, kind } => {
                Ok(load_trace_csv(path, *kind, self.n)?.truncated(self.t))
            }
            TraceSource::Zipf { exponent } if self.variant == Variant::Pair => {
                gen_zipf_pairs(self.n, self.t, *exponent, &mut rng)
            }
            TraceSource::Zipf { exponent } => gen_zipf_onehot(self.n, self.t, *exponent, &mut rng),
            TraceSource::Bernoulli { p } => gen_bernoulli_ensemble(self.n, self.t, *p, &mut rng),
            TraceSource::Distance { exponent } => {
                let requests = gen_zipf_onehot(self.n, self.t, *exponent, &mut rng)?;
                let Rounds::OneHot(items) = requests.rounds() else {
                    unreachable!("zipf generator yields one-hot rounds")
                };
                gen_distance_reward(self.n, items)
            }
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.unwrap_or(0));
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretRow {
    pub t: usize,
    pub expected_reward: f64,
    pub cum_reward: f64,
    pub oracle_cum: f64,
    pub regret: f64,
    pub normalized_regret: f64,
}

#[derive(Debug, Clone)]
pub struct RegretRecord {
    pub policy: PolicyKind,
    pub variant: Variant,
    pub n: usize,
    pub k: usize,
    pub rows: Vec<RegretRow>,
    /// Accounting actually used (exact falls back to sampled when the
    /// expectation is not determined by the marginals).
    pub accounting: Accounting,
    pub hit_rate: f64,
    pub oracle_value: f64,
    pub oracle_label: &'static str,
    pub bounds: BoundTable,
    /// Extra labelled quantities (policy-specific bounds, alternate
    /// accountings, alternate oracles).
    pub notes: Vec<(String, f64)>,
}

impl RegretRecord {
    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.regret)
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_reward)
    }

    pub fn note(&self, label: &str) -> Option<f64> {
        self.notes.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path.as_ref())?;
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.expected_reward.to_string(),
                r.cum_reward.to_string(),
                r.oracle_cum.to_string(),
                r.regret.to_string(),
                r.normalized_regret.to_string(),
            ])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        })
    }

    pub fn summary_line(&self) -> String {
        let mut s = format!(
            "policy={} variant={} N={} k={} T={} accounting={} final_regret={:.6} \
             cum_reward={:.6} oracle({})={:.6} hit_rate={:.6}",
            self.policy,
            self.variant,
            self.n,
            self.k,
            self.rows.len(),
            self.accounting,
            self.final_regret(),
            self.cumulative_reward(),
            self.oracle_label,
            self.oracle_value,
            self.hit_rate,
        );
        for (label, v) in &self.notes {
            s.push_str(&format!(" {label}={v:.6}"));
        }
        s
    }
}

/// Loads or generates the trace, runs, and writes the CSV if requested.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RegretRecord> {
    config.validate()?;
    let trace = config.trace()?;
    let record = run_on_trace(config, &trace)?;
    if let Some(out) = &config.out {
        record.write_csv(out)?;
    }
    Ok(record)
}

/// Fixed comparator or per-prefix best, whichever the variant allows.
enum Comparator {
    /// Best k-set of each prefix under linear rewards.
    PrefixTopK { sums: Vec<f64>, k: usize },
    /// A fixed set chosen in hindsight on the whole trace.
    Fixed(Vec<usize>),
}

impl Comparator {
    fn round_value(&mut self, trace: &Trace, t: usize, variant: Variant) -> Result<Option<f64>> {
        match self {
            Comparator::PrefixTopK { sums, k } => {
                match trace.round(t) {
                    Round::OneHot(i) => sums[i] += 1.0,
                    Round::Pair(i, j) => {
                        let idx = pair_encode(i, j, trace.n())?;
                        sums[idx] += 1.0;
                    }
                    Round::Dense(v) => sums.iter_mut().zip(v).for_each(|(s, x)| *s += x),
                }
                let best = top_k(sums, *k);
                Ok(Some(best.members().iter().map(|&i| sums[i]).sum()))
            }
            Comparator::Fixed(set) => Ok(Some(reward_eval(variant, set, &trace.reward(t))?)),
        }
    }
}

/// Whether the expected reward is `p . r` for this trace and variant.
fn linear(variant: Variant, trace: &Trace) -> bool {
    variant == Variant::Sum
        || (trace.kind() == TraceKind::OneHot && matches!(variant, Variant::Max | Variant::Lp(_)))
}

/// Runs the configured policy on an explicit trace.
pub fn run_on_trace(config: &ExperimentConfig, trace: &Trace) -> Result<RegretRecord> {
    config.validate()?;
    if trace.n() != config.n {
        return Err(Error::Config(format!(
            "trace has {} experts, configuration says {}",
            trace.n(),
            config.n
        )));
    }
    let (n, k, t_len) = (config.n, config.k, trace.len());
    let variant = config.variant;
    let is_pair = trace.kind() == TraceKind::Pair;
    if (variant == Variant::Pair) != (config.policy == PolicyKind::Pairwise)
        || (is_pair != (variant == Variant::Pair))
    {
        return Err(Error::Config(
            "the pair variant needs a pair trace and the pairwise policy".into(),
        ));
    }
    let one_hot_only = matches!(
        config.policy,
        PolicyKind::Lru | PolicyKind::Lfu | PolicyKind::Cover
    );
    if one_hot_only && trace.kind() != TraceKind::OneHot {
        return Err(Error::Config(format!(
            "the {} policy needs a one-hot request trace",
            config.policy
        )));
    }

    let mut notes: Vec<(String, f64)> = Vec::new();
    let (mut comparator, oracle_label) = if is_pair {
        let m = super_item_count(n);
        check_cardinality(k, m)?;
        (
            Comparator::PrefixTopK {
                sums: vec![0.0; m],
                k,
            },
            "k-super-items",
        )
    } else if linear(variant, trace) {
        (
            Comparator::PrefixTopK {
                sums: vec![0.0; n],
                k,
            },
            "top-k",
        )
    } else {
        match oracle_bruteforce(trace, variant, k) {
            Ok((set, _)) => (Comparator::Fixed(set.into_members()), "bruteforce"),
            Err(Error::InstanceTooLarge { .. }) if variant == Variant::Max => {
                let (set, _) = oracle_partition_lowerbound(trace, k)?;
                (
                    Comparator::Fixed(set.into_members()),
                    "partition-lower-bound",
                )
            }
            Err(e) => return Err(e),
        }
    };

    let exact_possible = match config.policy {
        PolicyKind::SageHedge | PolicyKind::Ftrl | PolicyKind::Cover => linear(variant, trace),
        PolicyKind::Pairwise => true,
        PolicyKind::Lru | PolicyKind::Lfu => true,
        PolicyKind::Ftpl => false,
    };
    let accounting = if config.accounting == Accounting::Exact && exact_possible {
        Accounting::Exact
    } else {
        Accounting::Sampled
    };
    let exact = accounting == Accounting::Exact;

    let mut rng = config.rng(1);
    let mut rows = Vec::with_capacity(t_len);
    let mut cum = 0.0;
    let mut oracle_cum = 0.0;
    let mut hits = 0usize;
    let mut push =
        |t: usize, expected: f64, realized: f64, comparator: &mut Comparator| -> Result<()> {
            if realized > 0.0 {
                hits += 1;
            }
            cum += expected;
            if let Some(v) = comparator.round_value(trace, t, variant)? {
                oracle_cum = match comparator {
                    Comparator::PrefixTopK { .. } => v,
                    Comparator::Fixed(_) => oracle_cum + v,
                };
            }
            let regret = oracle_cum - cum;
            rows.push(RegretRow {
                t: t + 1,
                expected_reward: expected,
                cum_reward: cum,
                oracle_cum,
                regret,
                normalized_regret: regret / (t + 1) as f64,
            });
            Ok(())
        };

    match config.policy {
        PolicyKind::SageHedge | PolicyKind::Ftrl => {
            let mut policy: Box<dyn MarginalPolicy> = if config.policy == PolicyKind::SageHedge {
                let eta = config
                    .eta
                    .unwrap_or_else(|| tune_eta(t_len, ln_meta_experts(n, k)));
                Box::new(SageHedge::new(n, k, EtaSchedule::Fixed(eta))?)
            } else {
                let eta = config.eta.unwrap_or_else(|| tuned_eta(n, k, t_len));
                Box::new(FtrlState::new(n, k, eta, config.link)?)
            };
            for t in 0..t_len {
                let m = policy.marginals()?;
                let set = madow_sample(&m, &mut rng);
                let r = trace.reward(t);
                let realized = reward_eval(variant, set.members(), &r)?;
                let expected = if exact { m.dot(r.values()) } else { realized };
                policy.observe(&r, &m)?;
                push(t, expected, realized, &mut comparator)?;
            }
        }
        PolicyKind::Pairwise => {
            let mut policy = PairwisePolicy::ftrl(n, k, t_len, config.eta)?;
            let mut union_total = 0.0;
            for t in 0..t_len {
                let Round::Pair(i, j) = trace.round(t) else {
                    unreachable!("checked above")
                };
                let pred = policy.predict(&mut rng)?;
                let idx = pair_encode(i, j, n)?;
                let union = pairwise_reward(&pred.items, (i, j));
                union_total += union;
                let expected = if exact {
                    pred.marginals.get(idx)
                } else if pred.super_set.contains(idx) {
                    1.0
                } else {
                    0.0
                };
                policy.update((i, j), &pred.marginals)?;
                push(t, expected, union, &mut comparator)?;
            }
            notes.push(("union_reward".into(), union_total));
            if let PairBase::Ftrl(f) = policy.base() {
                notes.push((
                    "entropic_bound".into(),
                    entropic_bound(k, super_item_count(n), f.eta(), f.sq_grad_total()),
                ));
            }
        }
        PolicyKind::Cover => {
            let phi = generate_stable_phi(n, t_len, k, &mut config.rng(2))?;
            let table = PotentialTable::new(&phi);
            let Rounds::OneHot(items) = trace.rounds() else {
                unreachable!("checked above")
            };
            for t in 0..t_len {
                let m = cover_marginals(&table, &items[..t])?;
                let set = madow_sample(&m, &mut rng);
                let realized = if set.contains(items[t]) { 1.0 } else { 0.0 };
                let expected = if exact { m.get(items[t]) } else { realized };
                push(t, expected, realized, &mut comparator)?;
            }
            notes.push(("phi".into(), phi.eval(items)));
            notes.push(("phi_mean".into(), phi.mean()));
        }
        PolicyKind::Lru | PolicyKind::Lfu => {
            let mut cache = if config.policy == PolicyKind::Lru {
                CacheState::lru(n, k)?
            } else {
                CacheState::lfu(n, k)?
            };
            let Rounds::OneHot(items) = trace.rounds() else {
                unreachable!("checked above")
            };
            for (t, &y) in items.iter().enumerate() {
                let hit = if cache.step(y)?.hit { 1.0 } else { 0.0 };
                push(t, hit, hit, &mut comparator)?;
            }
        }
        PolicyKind::Ftpl => {
            let sigma = config
                .sigma
                .unwrap_or_else(|| ftpl_default_sigma(n, k, t_len));
            let mut sums = vec![0.0; n];
            for t in 0..t_len {
                let set = ftpl_predict(&sums, sigma, k, &mut rng)?;
                let r = trace.reward(t);
                let realized = reward_eval(variant, set.members(), &r)?;
                sums.iter_mut().zip(r.values()).for_each(|(s, x)| *s += x);
                push(t, realized, realized, &mut comparator)?;
            }
            notes.push(("sigma".into(), sigma));
        }
    }

    let oracle_value = rows.last().map_or(0.0, |r| r.oracle_cum);
    let l_star = t_len as f64 - oracle_value;
    match config.policy {
        PolicyKind::SageHedge if linear(variant, trace) && trace.kind() == TraceKind::OneHot => {
            notes.push(("small_loss_bound".into(), small_loss_bound(n, k, l_star)));
        }
        PolicyKind::Pairwise => {
            notes.push(("improper_bound".into(), improper_bound(k, n, l_star)));
            if let Ok(oracles) = pair_oracles(trace, k) {
                for o in oracles {
                    notes.push((format!("oracle_{}", o.label), o.value));
                }
            }
        }
        _ => {}
    }
    if !linear(variant, trace) && !is_pair {
        notes.push(("oracle_sum_total".into(), column_sums(trace).iter().sum()));
    }

    Ok(RegretRecord {
        policy: config.policy,
        variant,
        n,
        k,
        rows,
        accounting,
        hit_rate: if t_len == 0 {
            0.0
        } else {
            hits as f64 / t_len as f64
        },
        oracle_value,
        oracle_label,
        bounds: bound_table(n, k, t_len),
        notes,
    })
}
