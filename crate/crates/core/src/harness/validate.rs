//! Quick invariant checks behind `kexperts validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::expanded_hedge_oracle;
use crate::environments::{gen_bernoulli_ensemble, gen_zipf_onehot, Variant};
use crate::esp::{hedge_marginals, IterativeHedge, WeightVector};
use crate::harness::oracle::{oracle_bruteforce, oracle_partition_lowerbound, oracle_sum};
use crate::harness::runner::{run_on_trace, ExperimentConfig, PolicyKind};
use crate::policy::cover::{
    decode_sequence, exact_expected_loss, generate_stable_phi, PotentialTable,
};
use crate::policy::ftrl::water_fill;
use crate::policy::sage_hedge::small_loss_bound;
use crate::sampling::empirical_inclusion;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&mut ChaCha8Rng) -> Result<String, String>;

const CHECKS: [(&str, Check); 7] = [
    ("hedge-marginals-vs-enumeration", hedge_vs_enumeration),
    ("systematic-sampling-fidelity", sampling_fidelity),
    ("coefficient-engine-vs-dp", coefficient_engine),
    ("water-filling-kkt", water_filling),
    ("potential-telescoping", telescoping),
    ("oracle-consistency", oracles),
    ("small-loss-bound", small_loss),
];

/// Runs every check with a fixed seed.
pub fn run_validation_suite(seed: u64) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(name, check)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            match check(&mut rng) {
                Ok(detail) => CheckResult {
                    name,
                    passed: true,
                    detail,
                },
                Err(detail) => CheckResult {
                    name,
                    passed: false,
                    detail,
                },
            }
        })
        .collect()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn hedge_vs_enumeration(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0f64;
    for &(n, k) in &[(6, 2), (8, 3), (10, 4)] {
        let history: Vec<usize> = (0..30).map(|_| rng.random_range(0..n)).collect();
        let eta = 0.5;
        let mut lw = vec![0.0; n];
        history.iter().for_each(|&y| lw[y] += eta);
        let dp = hedge_marginals(&WeightVector::new(lw).map_err(err)?, k).map_err(err)?;
        let brute = expanded_hedge_oracle(&history, eta, n, k).map_err(err)?;
        for (a, b) in dp.probs().iter().zip(brute.marginals.probs()) {
            worst = worst.max((a - b).abs());
        }
    }
    if worst <= 1e-9 {
        Ok(format!("max |diff| = {worst:.2e}"))
    } else {
        Err(format!("max |diff| = {worst:.2e} > 1e-9"))
    }
}

fn sampling_fidelity(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let n = 12;
    let k = 4;
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let m = water_fill(&raw.iter().map(|x| x.ln()).collect::<Vec<_>>(), 1.0, k)
        .map_err(err)?
        .marginals;
    let freq = empirical_inclusion(&m, 50_000, rng);
    let worst = freq
        .iter()
        .zip(m.probs())
        .map(|(f, p)| (f - p).abs())
        .fold(0.0, f64::max);
    if worst <= 0.015 {
        Ok(format!("max |freq - p| = {worst:.4}"))
    } else {
        Err(format!("max |freq - p| = {worst:.4}"))
    }
}

fn coefficient_engine(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let (n, k) = (16, 4);
    let mut engine = IterativeHedge::new(n, k, 0.1).map_err(err)?;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        engine.observe(rng.random_range(0..n));
        let a = engine.marginals().map_err(err)?;
        let b = hedge_marginals(engine.weights(), k).map_err(err)?;
        for (x, y) in a.probs().iter().zip(b.probs()) {
            worst = worst.max((x - y).abs() / y);
        }
    }
    if worst <= 1e-6 {
        Ok(format!(
            "max rel err = {worst:.2e}, fallbacks = {}",
            engine.fallbacks()
        ))
    } else {
        Err(format!("max rel err = {worst:.2e}"))
    }
}

fn water_filling(rng: &mut ChaCha8Rng) -> Result<String, String> {
    for _ in 0..200 {
        let n = rng.random_range(2..200);
        let k = rng.random_range(1..=n);
        let eta = rng.random_range(0.01..3.0);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let w = water_fill(&r, eta, k).map_err(err)?;
        let p = w.marginals.probs();
        let sum: f64 = p.iter().sum();
        if (sum - k as f64).abs() > 1e-9 {
            return Err(format!("sum {sum} != {k}"));
        }
        for (i, &pi) in p.iter().enumerate() {
            let rebuilt = (w.log_k + eta * r[i]).exp().min(1.0);
            if (rebuilt - pi).abs() > 1e-9 || !(0.0..=1.0).contains(&pi) {
                return Err(format!("coordinate {i}: {pi} vs {rebuilt}"));
            }
        }
    }
    Ok("200 random programs".into())
}

fn telescoping(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let (n, t, k) = (3, 5, 1);
    let phi = generate_stable_phi(n, t, k, rng).map_err(err)?;
    let table = PotentialTable::new(&phi);
    let gap = 1.0 - k as f64 / n as f64 - phi.mean();
    let mut worst = 0.0f64;
    for idx in 0..phi.values().len() {
        let y = decode_sequence(idx, n, t);
        worst = worst.max((exact_expected_loss(&table, &y) - phi.eval(&y) - gap).abs());
    }
    if worst <= 1e-12 {
        Ok(format!("max deviation = {worst:.2e}"))
    } else {
        Err(format!("max deviation = {worst:.2e}"))
    }
}

fn oracles(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let trace = gen_bernoulli_ensemble(10, 50, 0.2, rng).map_err(err)?;
    let a = oracle_sum(&trace, 3).map_err(err)?.1;
    let b = oracle_bruteforce(&trace, Variant::Sum, 3).map_err(err)?.1;
    if (a - b).abs() > 1e-9 {
        return Err(format!("top-k {a} vs enumeration {b}"));
    }
    let lb = oracle_partition_lowerbound(&trace, 3).map_err(err)?.1;
    let opt = oracle_bruteforce(&trace, Variant::Max, 3).map_err(err)?.1;
    if lb > opt + 1e-12 {
        return Err(format!("partition {lb} exceeds optimum {opt}"));
    }
    Ok(format!("sum {a}, max {opt} >= partition {lb}"))
}

fn small_loss(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let (n, k, t) = (50, 5, 2000);
    let trace = gen_zipf_onehot(n, t, 0.8, rng).map_err(err)?;
    let cfg = ExperimentConfig::new(PolicyKind::SageHedge, Variant::Sum, n, k, t);
    let rec = run_on_trace(&cfg, &trace).map_err(err)?;
    let (_, opt) = oracle_sum(&trace, k).map_err(err)?;
    let bound = small_loss_bound(n, k, t as f64 - opt);
    let regret = rec.final_regret();
    if regret <= bound {
        Ok(format!("regret {regret:.2} <= bound {bound:.2}"))
    } else {
        Err(format!("regret {regret:.2} > bound {bound:.2}"))
    }
}
