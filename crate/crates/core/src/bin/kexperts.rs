use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use kexperts::environments::{load_trace_csv, TraceKind, Variant};
use kexperts::harness::bound_table;
use kexperts::harness::oracle::{
    oracle_bruteforce, oracle_partition_lowerbound, oracle_sum, pair_oracles,
};
use kexperts::harness::runner::{
    run_experiment, Accounting, ExperimentConfig, PolicyKind, TraceSource,
};
use kexperts::harness::validate::run_validation_suite;
use kexperts::policy::LinkFunction;
use kexperts::Result;

#[derive(Parser)]
#[command(
    name = "kexperts",
    version,
    about = "Online k-subset prediction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a policy over a trace and write per-round regret as CSV.
    Run(RunArgs),
    /// Print regret bounds for (N, k, T).
    Bounds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: usize,
    },
    /// Offline optimum of a trace file.
    Oracle {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = KindArg::Onehot)]
        kind: KindArg,
        #[arg(long, default_value = "sum")]
        variant: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
    /// Run the built-in invariant checks.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    SageHedge,
    Ftrl,
    Pairwise,
    Cover,
    Lru,
    Lfu,
    Ftpl,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenArg {
    Zipf,
    Bernoulli,
    Distance,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Onehot,
    Pair,
    Dense,
}

#[derive(Clone, Copy, ValueEnum)]
enum AccountingArg {
    Exact,
    Sampled,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    policy: PolicyArg,
    /// sum, max, lp (= lp:2), lp:<p> or pair
    #[arg(long, default_value = "sum")]
    variant: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    t: usize,
    /// Learning rate (default: tuned for T).
    #[arg(long)]
    eta: Option<f64>,
    /// FTPL perturbation scale (default: sqrt(T / (k ln(Ne/k)))).
    #[arg(long)]
    sigma: Option<f64>,
    /// Zipf exponent for generated requests.
    #[arg(long, default_value_t = 0.8)]
    p_exponent: f64,
    /// Bernoulli success probability (default: 1/(2k)).
    #[arg(long)]
    bernoulli_p: Option<f64>,
    /// FTRL link function: identity, sqrt-shifted or log1p.
    #[arg(long, default_value = "identity")]
    link: String,
    #[arg(long, conflicts_with = "gen")]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = KindArg::Onehot)]
    trace_kind: KindArg,
    #[arg(long, value_enum)]
    gen: Option<GenArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = AccountingArg::Exact)]
    accounting: AccountingArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn kind(k: KindArg) -> TraceKind {
    match k {
        KindArg::Onehot => TraceKind::OneHot,
        KindArg::Pair => TraceKind::Pair,
        KindArg::Dense => TraceKind::Dense,
    }
}

fn run(args: RunArgs) -> Result<()> {
    let policy = match args.policy {
        PolicyArg::SageHedge => PolicyKind::SageHedge,
        PolicyArg::Ftrl => PolicyKind::Ftrl,
        PolicyArg::Pairwise => PolicyKind::Pairwise,
        PolicyArg::Cover => PolicyKind::Cover,
        PolicyArg::Lru => PolicyKind::Lru,
        PolicyArg::Lfu => PolicyKind::Lfu,
        PolicyArg::Ftpl => PolicyKind::Ftpl,
    };
    let variant: Variant = args.variant.parse()?;
    let mut cfg = ExperimentConfig::new(policy, variant, args.n, args.k, args.t);
    cfg.eta = args.eta;
    cfg.sigma = args.sigma;
    cfg.link = args.link.parse::<LinkFunction>()?;
    cfg.seed = args.seed;
    cfg.accounting = match args.accounting {
        AccountingArg::Exact => Accounting::Exact,
        AccountingArg::Sampled => Accounting::Sampled,
    };
    cfg.out = args.out;
    cfg.source = match (args.trace, args.gen) {
        (Some(path), _) => TraceSource::File {
            path,
            kind: kind(args.trace_kind),
        },
        (None, Some(GenArg::Bernoulli)) => TraceSource::Bernoulli {
            p: args.bernoulli_p.unwrap_or(1.0 / (2.0 * args.k as f64)),
        },
        (None, Some(GenArg::Distance)) => TraceSource::Distance {
            exponent: args.p_exponent,
        },
        (None, Some(GenArg::Zipf) | None) => TraceSource::Zipf {
            exponent: args.p_exponent,
        },
    };
    let record = run_experiment(&cfg)?;
    println!("{}", record.summary_line());
    Ok(())
}

fn oracle(trace: PathBuf, k_arg: KindArg, variant: &str, n: usize, k: usize) -> Result<()> {
    let variant: Variant = variant.parse()?;
    let trace = load_trace_csv(&trace, kind(k_arg), n)?;
    if trace.kind() == TraceKind::Pair {
        for o in pair_oracles(&trace, k)? {
            println!(
                "{} budget={} value={} set={:?}",
                o.label,
                o.budget,
                o.value,
                o.set.members()
            );
        }
        return Ok(());
    }
    let (label, (set, value)) = match variant {
        Variant::Sum => ("top-k", oracle_sum(&trace, k)?),
        _ => match oracle_bruteforce(&trace, variant, k) {
            Ok(best) => ("bruteforce", best),
            Err(kexperts::Error::InstanceTooLarge { .. }) if variant == Variant::Max => (
                "partition-lower-bound",
                oracle_partition_lowerbound(&trace, k)?,
            ),
            Err(e) => return Err(e),
        },
    };
    println!("{label} value={value} set={:?}", set.members());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Bounds { n, k, t } => {
            if k == 0 || k > n || t == 0 {
                Err(kexperts::Error::Cardinality { k, n })
            } else {
                print!("{}", bound_table(n, k, t));
                Ok(())
            }
        }
        Command::Oracle {
            trace,
            kind,
            variant,
            n,
            k,
        } => oracle(trace, kind, &variant, n, k),
        Command::Validate { seed } => {
            let results = run_validation_suite(seed);
            let mut ok = true;
            for r in &results {
                println!(
                    "{} {}: {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
                ok &= r.passed;
            }
            if ok {
                Ok(())
            } else {
                Err(kexperts::Error::Config("validation failed".into()))
            }
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
