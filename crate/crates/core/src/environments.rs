//! Reward functions, synthetic adversaries and trace files.
//!
//! Trace files are headerless, comma-separated, LF-terminated:
//!
//! ```text
//! one-hot: timestamp,item_id
//! pair:    timestamp,item_i,item_j          (item_i != item_j)
//! dense:   timestamp,v0,v1,...,v{N-1}       (values in [0, 1])
//! ```
//!
//! Timestamps are non-decreasing integers; only their order matters.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Bernoulli, Distribution};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::policy::pairwise::{pair_decode, super_item_count};

/// Per-round expert rewards, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector {
    values: Vec<f64>,
}

impl RewardVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::RewardOutOfRange { index, value });
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn one_hot(n: usize, item: usize) -> Self {
        let mut values = vec![0.0; n];
        values[item] = 1.0;
        Self { values }
    }

    pub fn two_hot(n: usize, i: usize, j: usize) -> Self {
        let mut values = vec![0.0; n];
        values[i] = 1.0;
        values[j] = 1.0;
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// Reward functions of a chosen set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// `sum_{i in S} r_i`
    Sum,
    /// `max_{i in S} r_i`
    Max,
    /// `(sum_{i in S} r_i^p)^(1/p)`, `p >= 1`
    Lp(f64),
    /// `sum_{i < j in S} r_i r_j` over unordered distinct pairs
    Pair,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "sum" => Ok(Variant::Sum),
            "max" => Ok(Variant::Max),
            "pair" | "pairwise" => Ok(Variant::Pair),
            "lp" => Ok(Variant::Lp(2.0)),
            other => {
                let p = other
                    .strip_prefix("lp:")
                    .or_else(|| other.strip_prefix('l'))
                    .and_then(|p| p.parse::<f64>().ok())
                    .filter(|p| *p >= 1.0);
                p.map(Variant::Lp)
                    .ok_or_else(|| Error::UnknownVariant(s.to_string()))
            }
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Sum => write!(f, "sum"),
            Variant::Max => write!(f, "max"),
            Variant::Lp(p) => write!(f, "lp:{p}"),
            Variant::Pair => write!(f, "pair"),
        }
    }
}

/// Value of `variant` for the set `set` under rewards `r`.
pub fn reward_eval(variant: Variant, set: &[usize], r: &RewardVector) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Config("reward of an empty set is undefined".into()));
    }
    if let Some(&i) = set.iter().find(|&&i| i >= r.len()) {
        return Err(Error::Config(format!(
            "set member {i} is out of range for {} experts",
            r.len()
        )));
    }
    let v = r.values();
    Ok(match variant {
        Variant::Sum => set.iter().map(|&i| v[i]).sum(),
        Variant::Max => set.iter().map(|&i| v[i]).fold(0.0, f64::max),
        Variant::Lp(p) => set.iter().map(|&i| v[i].powf(p)).sum::<f64>().powf(1.0 / p),
        Variant::Pair => {
            let mut acc = 0.0;
            for (a, &i) in set.iter().enumerate() {
                for &j in &set[a + 1..] {
                    acc += v[i] * v[j];
                }
            }
            acc
        }
    })
}

/// Shape of the rounds in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    OneHot,
    Pair,
    Dense,
}

impl FromStr for TraceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "onehot" | "one-hot" | "one_hot" => Ok(TraceKind::OneHot),
            "pair" | "pairs" => Ok(TraceKind::Pair),
            "dense" => Ok(TraceKind::Dense),
            other => Err(Error::Config(format!("unknown trace kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rounds {
    OneHot(Vec<usize>),
    Pair(Vec<(usize, usize)>),
    Dense(Vec<Vec<f64>>),
}

/// One round of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Round<'a> {
    OneHot(usize),
    Pair(usize, usize),
    Dense(&'a [f64]),
}

/// An ordered sequence of adversary moves over `n` experts.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    n: usize,
    timestamps: Vec<i64>,
    rounds: Rounds,
}

impl Trace {
    /// Validates ids and values; timestamps default to `0..T`.
    pub fn new(n: usize, rounds: Rounds) -> Result<Self> {
        let t = match &rounds {
            Rounds::OneHot(v) => v.len(),
            Rounds::Pair(v) => v.len(),
            Rounds::Dense(v) => v.len(),
        };
        Self::with_timestamps(n, (0..t as i64).collect(), rounds)
    }

    pub fn with_timestamps(n: usize, timestamps: Vec<i64>, rounds: Rounds) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("a trace needs at least one expert".into()));
        }
        let trace = Self {
            n,
            timestamps,
            rounds,
        };
        if trace.timestamps.len() != trace.len() {
            return Err(Error::Config("one timestamp per round is required".into()));
        }
        for t in 0..trace.len() {
            let line = t as u64 + 1;
            match trace.round(t) {
                Round::OneHot(i) => check_id(i, n, line)?,
                Round::Pair(i, j) => {
                    check_id(i, n, line)?;
                    check_id(j, n, line)?;
                    if i == j {
                        return Err(Error::InvalidPair { i, j, n });
                    }
                }
                Round::Dense(v) => {
                    if v.len() != n {
                        return Err(Error::Config(format!(
                            "round {t} has {} values, expected {n}",
                            v.len()
                        )));
                    }
                    RewardVector::new(v.to_vec())?;
                }
            }
        }
        Ok(trace)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        match &self.rounds {
            Rounds::OneHot(v) => v.len(),
            Rounds::Pair(v) => v.len(),
            Rounds::Dense(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> TraceKind {
        match &self.rounds {
            Rounds::OneHot(_) => TraceKind::OneHot,
            Rounds::Pair(_) => TraceKind::Pair,
            Rounds::Dense(_) => TraceKind::Dense,
        }
    }

    pub fn rounds(&self) -> &Rounds {
        &self.rounds
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn round(&self, t: usize) -> Round<'_> {
        match &self.rounds {
            Rounds::OneHot(v) => Round::OneHot(v[t]),
            Rounds::Pair(v) => Round::Pair(v[t].0, v[t].1),
            Rounds::Dense(v) => Round::Dense(&v[t]),
        }
    }

    /// Dense reward vector of round `t`.
    pub fn reward(&self, t: usize) -> RewardVector {
        match self.round(t) {
            Round::OneHot(i) => RewardVector::one_hot(self.n, i),
            Round::Pair(i, j) => RewardVector::two_hot(self.n, i, j),
            Round::Dense(v) => RewardVector { values: v.to_vec() },
        }
    }

    /// Prefix of the first `t` rounds.
    pub fn truncated(&self, t: usize) -> Trace {
        let t = t.min(self.len());
        let rounds = match &self.rounds {
            Rounds::OneHot(v) => Rounds::OneHot(v[..t].to_vec()),
            Rounds::Pair(v) => Rounds::Pair(v[..t].to_vec()),
            Rounds::Dense(v) => Rounds::Dense(v[..t].to_vec()),
        };
        Trace {
            n: self.n,
            timestamps: self.timestamps[..t].to_vec(),
            rounds,
        }
    }
}

fn check_id(id: usize, n: usize, line: u64) -> Result<()> {
    if id >= n {
        return Err(Error::Range { line, id, n });
    }
    Ok(())
}

fn zipf_weights(m: usize, exponent: f64) -> Vec<f64> {
    (1..=m).map(|r| (r as f64).powf(-exponent)).collect()
}

/// Zipf probabilities of ranks `1..=n` (item `i` has rank `i + 1`).
pub fn zipf_masses(n: usize, exponent: f64) -> Vec<f64> {
    let w = zipf_weights(n, exponent);
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// I.i.d. one-hot requests; item `i` is drawn with probability
/// proportional to `(i + 1)^-exponent`.
pub fn gen_zipf_onehot<R: Rng + ?Sized>(
    n: usize,
    t: usize,
    exponent: f64,
    rng: &mut R,
) -> Result<Trace> {
    if !(exponent >= 0.0) {
        return Err(Error::Config(format!(
            "zipf exponent {exponent} must be >= 0"
        )));
    }
    let dist = WeightedIndex::new(zipf_weights(n, exponent))
        .map_err(|e| Error::Config(format!("zipf law: {e}")))?;
    let items = (0..t).map(|_| dist.sample(rng)).collect();
    Trace::new(n, Rounds::OneHot(items))
}

/// Deterministic cyclic requests `0, 1, ..., n-1, 0, 1, ...`.
pub fn gen_round_robin(n: usize, t: usize) -> Result<Trace> {
    Trace::new(n, Rounds::OneHot((0..t).map(|s| s % n).collect()))
}

/// Cyclic requests over a random permutation of the items.
pub fn gen_shuffled_round_robin<R: Rng + ?Sized>(n: usize, t: usize, rng: &mut R) -> Result<Trace> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Trace::new(n, Rounds::OneHot((0..t).map(|s| order[s % n]).collect()))
}

/// Dense trace with i.i.d. `Bernoulli(p)` entries.
pub fn gen_bernoulli_ensemble<R: Rng + ?Sized>(
    n: usize,
    t: usize,
    p: f64,
    rng: &mut R,
) -> Result<Trace> {
    let coin = Bernoulli::new(p).map_err(|e| Error::Config(format!("bernoulli p={p}: {e}")))?;
    let rows = (0..t)
        .map(|_| {
            (0..n)
                .map(|_| if coin.sample(rng) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    Trace::new(n, Rounds::Dense(rows))
}

/// Dense trace where requesting item `i` pays `1 - |j - i| / n` at position `j`.
pub fn gen_distance_reward(n: usize, items: &[usize]) -> Result<Trace> {
    if let Some((t, &i)) = items.iter().enumerate().find(|(_, &i)| i >= n) {
        return Err(Error::Range {
            line: t as u64 + 1,
            id: i,
            n,
        });
    }
    let rows = items
        .iter()
        .map(|&i| {
            (0..n)
                .map(|j| 1.0 - (j as f64 - i as f64).abs() / n as f64)
                .collect()
        })
        .collect();
    Trace::new(n, Rounds::Dense(rows))
}

/// Pair requests drawn from a Zipf law over all unordered pairs, with the
/// popularity order of the pairs shuffled.
pub fn gen_zipf_pairs<R: Rng + ?Sized>(
    n: usize,
    t: usize,
    exponent: f64,
    rng: &mut R,
) -> Result<Trace> {
    if n < 2 {
        return Err(Error::Config("pair traces need n >= 2".into()));
    }
    let m = super_item_count(n);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let dist = WeightedIndex::new(zipf_weights(m, exponent))
        .map_err(|e| Error::Config(format!("zipf law: {e}")))?;
    let pairs = (0..t)
        .map(|_| pair_decode(order[dist.sample(rng)], n))
        .collect::<Result<Vec<_>>>()?;
    Trace::new(n, Rounds::Pair(pairs))
}

/// Reads a trace file of the given kind over `n` experts.
pub fn load_trace_csv(path: impl AsRef<Path>, kind: TraceKind, n: usize) -> Result<Trace> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::Csv(e),
        })?;

    let mut timestamps = Vec::new();
    let mut one_hot = Vec::new();
    let mut pairs = Vec::new();
    let mut dense = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut line = 0u64;
    loop {
        let more = reader.read_record(&mut record).map_err(|e| Error::Parse {
            line: e.position().map_or(line + 1, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        line = record.position().map_or(line + 1, |p| p.line());
        let want = match kind {
            TraceKind::OneHot => 2,
            TraceKind::Pair => 3,
            TraceKind::Dense => n + 1,
        };
        if record.len() != want {
            return Err(Error::Parse {
                line,
                message: format!("expected {want} fields, found {}", record.len()),
            });
        }
        let ts: i64 = parse_field(&record[0], line, "timestamp")?;
        if timestamps.last().is_some_and(|&prev| ts < prev) {
            return Err(Error::Parse {
                line,
                message: format!("timestamp {ts} decreases"),
            });
        }
        timestamps.push(ts);
        match kind {
            TraceKind::OneHot => {
                let id: usize = parse_field(&record[1], line, "item id")?;
                check_id(id, n, line)?;
                one_hot.push(id);
            }
            TraceKind::Pair => {
                let i: usize = parse_field(&record[1], line, "item id")?;
                let j: usize = parse_field(&record[2], line, "item id")?;
                check_id(i, n, line)?;
                check_id(j, n, line)?;
                if i == j {
                    return Err(Error::Parse {
                        line,
                        message: format!("pair ({i}, {j}) repeats an item"),
                    });
                }
                pairs.push((i, j));
            }
            TraceKind::Dense => {
                let row = (1..=n)
                    .map(|c| {
                        let v: f64 = parse_field(&record[c], line, "reward")?;
                        if !(0.0..=1.0).contains(&v) {
                            return Err(Error::Parse {
                                line,
                                message: format!("reward {v} outside [0, 1]"),
                            });
                        }
                        Ok(v)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                dense.push(row);
            }
        }
    }
    let rounds = match kind {
        TraceKind::OneHot => Rounds::OneHot(one_hot),
        TraceKind::Pair => Rounds::Pair(pairs),
        TraceKind::Dense => Rounds::Dense(dense),
    };
    Trace::with_timestamps(n, timestamps, rounds)
}

fn parse_field<T: FromStr>(field: &str, line: u64, what: &str) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {what} from `{field}`"),
    })
}

/// Writes a trace in the format [`load_trace_csv`] reads.
pub fn save_trace_csv(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .flexible(true)
        .from_path(path)?;
    for t in 0..trace.len() {
        let mut fields = vec![trace.timestamps[t].to_string()];
        match trace.round(t) {
            Round::OneHot(i) => fields.push(i.to_string()),
            Round::Pair(i, j) => {
                fields.push(i.to_string());
                fields.push(j.to_string());
            }
            Round::Dense(v) => fields.extend(v.iter().map(|x| x.to_string())),
        }
        writer.write_record(&fields)?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}
