use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hrs_core::harness::{
    gen_csmti, gen_master_list, gen_random, run_property_suite, run_ratio_experiment, CsmtiParams, GenParams,
    SmallShape, Source, SUITES,
};
use hrs_core::json::{matching_from_json, matching_to_json, oracle_to_json, partition_to_json, trace_to_json, witnesses_to_json};
use hrs_core::oracle::{run_query, Query, SearchBudget, Strategy, Verdict, DEFAULT_MAX_NODES};
use hrs_core::reduce::{reduce_occ, reduce_stable, Target};
use hrs_core::smti::{parse_smti, serialize_smti};
use hrs_core::verify::VerifyError;
use hrs_core::{
    detect_generalized_master_list, find_blocking_pairs, find_occupancy_blocking_pairs, is_a_perfect,
    parse_instance, serialize_instance, size_descending_partition, solve, Instance, OrderedPartition,
};

const OK: u8 = 0;
const PROPERTY_FAILS: u8 = 1;
const USAGE: u8 = 2;
const BUDGET_EXHAUSTED: u8 = 3;
const INPUT: u8 = 4;

/// Error carrying its own exit status. Anything else exits with `INPUT`.
#[derive(Debug)]
struct Coded(u8, String);

impl std::fmt::Display for Coded {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Coded {}

fn coded(code: u8, msg: impl Into<String>) -> anyhow::Error {
    Coded(code, msg.into()).into()
}

#[derive(Parser)]
#[command(name = "hrs", version, about = "Hospital/residents matching with agent sizes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the round-based solver under an agent ordering.
    Solve(SolveArgs),
    /// Check a matching for stability.
    Verify(VerifyArgs),
    /// Exhaustive search over feasible matchings.
    Oracle(OracleArgs),
    /// Build an instance from a restricted SMTI instance.
    Reduce(ReduceArgs),
    /// Generate a seeded random instance.
    Gen(GenArgs),
    /// Run experiments.
    Bench {
        #[command(subcommand)]
        which: BenchCommand,
    },
    /// Run a randomized property suite.
    Test(TestArgs),
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    /// size-desc, detect, or file:<path> with one class per line.
    #[arg(long, default_value = "size-desc")]
    ordering: String,
    /// Write the round-by-round trace as JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Notion {
    /// Same as classic.
    Stable,
    Classic,
    Occupancy,
    APerfect,
}

#[derive(Args)]
struct VerifyArgs {
    file: PathBuf,
    /// JSON object with a "matched" map from agent to hospital labels.
    #[arg(long)]
    matching: PathBuf,
    #[arg(long, value_enum, default_value = "stable")]
    notion: Notion,
}

#[derive(Clone, Copy, ValueEnum)]
enum QueryArg {
    Stable,
    OccStable,
    MaxOcc,
    APerfect,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Plain,
    Decompose,
}

#[derive(Args)]
struct OracleArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    query: QueryArg,
    #[arg(long, env = "HRS_MAX_NODES", default_value_t = DEFAULT_MAX_NODES)]
    max_nodes: u64,
    #[arg(long, value_enum, default_value = "plain")]
    strategy: StrategyArg,
    /// Comma-separated interface hospitals for the decompose strategy.
    #[arg(long, value_delimiter = ',')]
    interface: Option<Vec<String>>,
    /// Include every matching found (stable and occ-stable queries).
    #[arg(long)]
    list: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Occ,
    Stable,
}

#[derive(Args)]
struct ReduceArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    target: TargetArg,
    /// Where to write the instance; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the gadget index as JSON.
    #[arg(long)]
    index: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Uniform,
    GenMl,
    Csmti,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    agents: usize,
    #[arg(long, default_value_t = 4)]
    hospitals: usize,
    #[arg(long, default_value_t = 1)]
    size_min: u32,
    #[arg(long, default_value_t = 3)]
    size_max: u32,
    #[arg(long, default_value_t = 1)]
    cap_min: u32,
    #[arg(long, default_value_t = 6)]
    cap_max: u32,
    #[arg(long, default_value_t = 0.6)]
    density: f64,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Number of men and of women (csmti).
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Number of tied men (csmti).
    #[arg(long, default_value_t = 1)]
    tied: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Solver size against the oracle optimum on small random instances.
    Ratio(RatioArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchFamily {
    Uniform,
    GenMl,
}

#[derive(Args)]
struct RatioArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "HRS_MAX_NODES", default_value_t = DEFAULT_MAX_NODES)]
    max_nodes: u64,
    #[arg(long, value_enum, default_value = "uniform")]
    family: BenchFamily,
    /// CSV destination; the aggregates go next to it with a .json extension.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct TestArgs {
    /// Suite name, or "all".
    #[arg(long)]
    suite: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "HRS_MAX_NODES", default_value_t = DEFAULT_MAX_NODES)]
    max_nodes: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = read(path)?;
    parse_instance(&text).map_err(|e| anyhow!("{}:{e}", path.display()))
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn ordering(inst: &Instance, spec: &str) -> Result<OrderedPartition> {
    match spec {
        "size-desc" => Ok(size_descending_partition(inst)),
        "detect" => detect_generalized_master_list(inst)
            .ok_or_else(|| coded(PROPERTY_FAILS, "instance does not follow a generalized master list")),
        _ => {
            let path = spec
                .strip_prefix("file:")
                .ok_or_else(|| coded(USAGE, format!("unknown ordering {spec:?}")))?;
            let text = read(Path::new(path))?;
            OrderedPartition::from_text(inst, &text).map_err(|e| anyhow!("{path}: {e}"))
        }
    }
}

fn cmd_solve(a: SolveArgs) -> Result<u8> {
    let inst = load_instance(&a.file)?;
    let p = ordering(&inst, &a.ordering)?;
    let trace = solve(&inst, &p).map_err(|e| anyhow!("{e}"))?;
    if let Some(path) = &a.trace {
        let text = serde_json::to_string_pretty(&trace_to_json(&inst, &trace))?;
        write(path, &text)?;
    }
    let mut out = matching_to_json(&inst, &trace.matching);
    out["partition"] = partition_to_json(&inst, &trace.partition);
    print_json(&out);
    Ok(OK)
}

fn cmd_verify(a: VerifyArgs) -> Result<u8> {
    let inst = load_instance(&a.file)?;
    let text = read(&a.matching)?;
    let m = matching_from_json(&inst, &text).map_err(|e| anyhow!("{}: {e}", a.matching.display()))?;
    let (name, result) = match a.notion {
        Notion::Stable | Notion::Classic => ("classic", find_blocking_pairs(&inst, &m).map(Some)),
        Notion::Occupancy => ("occupancy", find_occupancy_blocking_pairs(&inst, &m).map(Some)),
        Notion::APerfect => ("a-perfect", is_a_perfect(&inst, &m).map(|_| None)),
    };
    let out = match result {
        Err(VerifyError::Infeasible(v)) => {
            print_json(&json!({"notion": name, "feasible": false, "holds": false, "reason": v.to_string()}));
            return Ok(PROPERTY_FAILS);
        }
        Err(e) => return Err(e.into()),
        Ok(Some(ws)) => json!({
            "notion": name,
            "feasible": true,
            "holds": ws.is_empty(),
            "witnesses": witnesses_to_json(&inst, &ws),
        }),
        Ok(None) => {
            let unmatched: Vec<&str> = inst
                .agent_ids()
                .filter(|&x| m.hospital_of(x).is_none())
                .map(|x| inst.agent_label(x))
                .collect();
            json!({"notion": name, "feasible": true, "holds": unmatched.is_empty(), "unmatched": unmatched})
        }
    };
    let holds = out["holds"] == true;
    print_json(&out);
    Ok(if holds { OK } else { PROPERTY_FAILS })
}

fn cmd_oracle(a: OracleArgs) -> Result<u8> {
    let inst = load_instance(&a.file)?;
    let query = match a.query {
        QueryArg::Stable => Query::Stable,
        QueryArg::OccStable => Query::OccStable,
        QueryArg::MaxOcc => Query::MaxOcc,
        QueryArg::APerfect => Query::APerfect,
    };
    let interface = a
        .interface
        .map(|labels| {
            labels
                .iter()
                .map(|l| inst.hospital_id(l).ok_or_else(|| coded(USAGE, format!("unknown hospital {l:?}"))))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let (strategy, name) = match a.strategy {
        StrategyArg::Plain if interface.is_some() => {
            return Err(coded(USAGE, "--interface needs --strategy decompose"));
        }
        StrategyArg::Plain => (Strategy::Plain, "plain"),
        StrategyArg::Decompose => (Strategy::Decompose { interface }, "decompose"),
    };
    let r = run_query(&inst, query, &strategy, SearchBudget::nodes(a.max_nodes));
    let mut out = oracle_to_json(&inst, query, name, &r);
    if a.list {
        out["matchings"] = r.matchings.iter().map(|m| matching_to_json(&inst, m)).collect();
    }
    print_json(&out);
    Ok(match (r.verdict, query) {
        (Verdict::BudgetExhausted, _) => BUDGET_EXHAUSTED,
        (Verdict::Complete, Query::APerfect) if !r.found() => PROPERTY_FAILS,
        _ => OK,
    })
}

fn cmd_reduce(a: ReduceArgs) -> Result<u8> {
    let text = read(&a.file)?;
    let smti = parse_smti(&text).map_err(|e| anyhow!("{}:{e}", a.file.display()))?;
    let target = match a.target {
        TargetArg::Occ => Target::Occ,
        TargetArg::Stable => Target::Stable,
    };
    let (inst, index) = match target {
        Target::Occ => reduce_occ(&smti),
        Target::Stable => reduce_stable(&smti),
    }
    .map_err(|e| anyhow!("{}: {e}", a.file.display()))?;
    let body = serialize_instance(&inst);
    match &a.out {
        Some(path) => write(path, &body)?,
        None => print!("{body}"),
    }
    if let Some(path) = &a.index {
        write(path, &serde_json::to_string_pretty(&index.to_json(&smti, &inst))?)?;
    }
    Ok(OK)
}

fn cmd_gen(a: GenArgs) -> Result<u8> {
    let body = match a.family {
        FamilyArg::Csmti => {
            let smti = gen_csmti(&CsmtiParams {
                n: a.n,
                tied: a.tied,
                seed: a.seed,
            })
            .map_err(|e| coded(USAGE, e.to_string()))?;
            serialize_smti(&smti)
        }
        family => {
            let p = GenParams {
                agents: a.agents,
                hospitals: a.hospitals,
                size_min: a.size_min,
                size_max: a.size_max,
                cap_min: a.cap_min,
                cap_max: a.cap_max,
                density: a.density,
                seed: a.seed,
                classes: a.classes,
            };
            let inst = match family {
                FamilyArg::GenMl => gen_master_list(&p),
                _ => gen_random(&p),
            }
            .map_err(|e| coded(USAGE, e.to_string()))?;
            serialize_instance(&inst)
        }
    };
    match &a.out {
        Some(path) => write(path, &body)?,
        None => print!("{body}"),
    }
    Ok(OK)
}

fn cmd_ratio(a: RatioArgs) -> Result<u8> {
    let shape = SmallShape::SUITE;
    let source = match a.family {
        BenchFamily::Uniform => Source::SmallRandom(shape),
        BenchFamily::GenMl => Source::SmallMasterList(shape),
    };
    let report = run_ratio_experiment(&source, a.seed, a.trials, SearchBudget::nodes(a.max_nodes), a.jobs);
    let csv = report.to_csv();
    let summary = report.summary_json();
    match &a.out {
        Some(path) => {
            write(path, &csv)?;
            write(&path.with_extension("json"), &serde_json::to_string_pretty(&summary)?)?;
            print_json(&summary);
        }
        None => print!("{csv}"),
    }
    Ok(if report.violations == 0 { OK } else { PROPERTY_FAILS })
}

fn cmd_test(a: TestArgs) -> Result<u8> {
    let suites: Vec<&str> = match a.suite.as_str() {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        s => {
            return Err(coded(
                USAGE,
                format!("unknown suite {s:?}; expected one of: all, {}", SUITES.join(", ")),
            ))
        }
    };
    let budget = SearchBudget::nodes(a.max_nodes);
    let mut failed = false;
    let mut reports = Vec::new();
    for suite in suites {
        let r = run_property_suite(suite, a.trials, a.seed, budget, a.jobs).expect("suite name checked");
        failed |= !r.passed();
        reports.push(serde_json::to_value(&r)?);
    }
    print_json(&Value::Array(reports));
    Ok(if failed { PROPERTY_FAILS } else { OK })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench {
            which: BenchCommand::Ratio(a),
        } => cmd_ratio(a),
        Command::Test(a) => cmd_test(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("hrs: {e:#}");
            ExitCode::from(e.downcast_ref::<Coded>().map_or(INPUT, |c| c.0))
        }
    }
}
