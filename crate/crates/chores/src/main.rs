use chores::instances::{
    random_instance, ErInstance, Instance, IntegralAllocation,
};
use chores::market::{ErEquilibrium, PaymentGraph};
use chores::report::{
    batches_from_json, bench, instance_digest, model_name, parse_model, pipeline, Goal,
    RunReport, SolverChoice,
};
use chores::verify::{minimal_alpha_oracle, Criterion, OracleCriterion};
use chores::{parse_q, Error, Q};
use clap::{Args, Parser, Subcommand};
use num::One;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "chores",
    about = "Earning-restricted competitive equilibria for chore division, \
             rounded into fair and Pareto-optimal allocations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Default seed for generation
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Pivot cap for the complementary pivot solver
    #[arg(long, global = true, default_value_t = 1_000_000)]
    max_pivots: usize,
    /// Output format for tabular commands
    #[arg(long, global = true, default_value = "json")]
    format: String,
    /// Print the payment graph of computed equilibria as DOT
    #[arg(long, global = true)]
    dump_graph: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance (optionally an ER instance)
    Gen(GenArgs),
    /// Solve an ER instance with Lemke's complementary pivot scheme
    ErSolve(ErSolveArgs),
    /// Solve an ER instance by consumption-graph enumeration (small n)
    ErEnum(ErEnumArgs),
    /// Round an equilibrium (or balance an instance) into an integral allocation
    Round(RoundArgs),
    /// EFX allocation: exact for m <= 2n, 4-EFX above
    Efx(EfxArgs),
    /// Bivalued pipelines: EFX+PO for m <= 2n, 3-EFX+PO above
    Bivalued(EfxArgs),
    /// Check a fairness criterion; exit code 0 = pass, 1 = fail
    Check(CheckArgs),
    /// Exhaustive minimal-alpha oracle
    Oracle(OracleArgs),
    /// Full goal pipeline with verification and a run report
    Pipeline(PipelineArgs),
    /// Batch benchmarking over generated instances
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    agents: usize,
    #[arg(long)]
    chores: usize,
    /// uniform | bivalued:a,b | 2ary
    #[arg(long, default_value = "uniform")]
    model: String,
    #[arg(long)]
    output: PathBuf,
    /// Emit an ER instance with this uniform earning requirement
    #[arg(long)]
    earning: Option<String>,
    /// Uniform chore earning cap for the ER instance
    #[arg(long)]
    cap: Option<String>,
}

#[derive(Args)]
struct ErSolveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Also write the pivot trace
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ErEnumArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 4)]
    max_agents: usize,
}

#[derive(Args)]
struct RoundArgs {
    /// half | one | rebalance | balanced
    #[arg(long)]
    mode: String,
    /// Equilibrium file (modes half/one/rebalance) or instance (balanced)
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EfxArgs {
    #[arg(long)]
    input: PathBuf,
    /// Optional precomputed equilibrium (m > 2n route)
    #[arg(long)]
    eq: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// auto | enumerate | lemke
    #[arg(long, default_value = "auto")]
    solver: String,
}

#[derive(Args)]
struct CheckArgs {
    /// efx | ef1 | ef2 | efk | pefx | pef1 | pef2 | pefk
    #[arg(long)]
    criterion: String,
    #[arg(long, default_value = "1")]
    alpha: String,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    alloc: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// efx | ef1 | ef2
    #[arg(long)]
    criterion: String,
    #[arg(long)]
    instance: PathBuf,
    /// Enumeration cap on n^m
    #[arg(long, default_value_t = 10_000_000)]
    cap: u64,
}

#[derive(Args)]
struct PipelineArgs {
    /// ef2po | ef1po | efx | bivalued
    #[arg(long)]
    goal: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    /// auto | enumerate | lemke
    #[arg(long, default_value = "auto")]
    solver: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// auto | enumerate | lemke
    #[arg(long, default_value = "auto")]
    solver: String,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn load_equilibrium(path: &PathBuf) -> chores::Result<(ErInstance, ErEquilibrium)> {
    ErEquilibrium::load(path)
}

fn run(cli: Cli) -> chores::Result<i32> {
    match cli.command {
        Command::Gen(args) => {
            let model = parse_model(&args.model)?;
            let inst = random_instance(args.agents, args.chores, &model, cli.seed);
            match (&args.earning, &args.cap) {
                (None, None) => inst.save(&args.output)?,
                (e, c) => {
                    let earning = e.as_deref().map(parse_q).transpose()?.unwrap_or_else(Q::one);
                    let cap = c.as_deref().map(parse_q).transpose()?.unwrap_or_else(Q::one);
                    let n = inst.n();
                    let m = inst.m();
                    let er = ErInstance::new(inst, vec![earning; n], vec![cap; m])?;
                    er.save(&args.output)?;
                }
            }
            println!("wrote {} ({} model, seed {})", args.output.display(), model_name(&model), cli.seed);
            Ok(0)
        }
        Command::ErSolve(args) => {
            let er = ErInstance::load(&args.input)?;
            let (eq, trace) = chores::lcp::solve_er(&er, cli.max_pivots, args.trace.is_some())?;
            eq.save(&er, &args.output)?;
            if cli.dump_graph {
                print!("{}", PaymentGraph::of(&eq).to_dot(&eq));
            }
            if let Some(trace_path) = args.trace {
                let steps: Vec<serde_json::Value> = trace
                    .steps
                    .iter()
                    .map(|s| {
                        serde_json::json!({
                            "entering": format!("{:?}", s.entering),
                            "leaving": format!("{:?}", s.leaving),
                            "z": chores::fmt_q(&s.z_after),
                        })
                    })
                    .collect();
                let v = serde_json::json!({
                    "v": 1,
                    "pivots": trace.steps.len(),
                    "start_z": chores::fmt_q(&trace.start_z),
                    "start_z_formula": chores::fmt_q(&trace.start_z_formula),
                    "termination": format!("{:?}", trace.termination),
                    "steps": steps,
                });
                std::fs::write(&trace_path, serde_json::to_string_pretty(&v).unwrap())?;
            }
            println!("solved in {} pivots -> {}", trace.steps.len(), args.output.display());
            Ok(0)
        }
        Command::ErEnum(args) => {
            let er = ErInstance::load(&args.input)?;
            let eq = chores::enumerate::find_er_equilibrium_enum(&er, args.max_agents)?;
            eq.save(&er, &args.output)?;
            if cli.dump_graph {
                print!("{}", PaymentGraph::of(&eq).to_dot(&eq));
            }
            println!("found equilibrium -> {}", args.output.display());
            Ok(0)
        }
        Command::Round(args) => {
            let (alloc, payments) = match args.mode.as_str() {
                "balanced" => {
                    let inst = Instance::load(&args.input)?;
                    let (alloc, p) = chores::rounding::balanced_po(&inst)?;
                    (alloc, p)
                }
                mode => {
                    let (er, eq) = load_equilibrium(&args.input)?;
                    match mode {
                        "half" => chores::rounding::round_er_half(&eq, &er)?,
                        "one" => chores::rounding::round_er_one(&eq, &er)?,
                        "rebalance" => chores::rounding::rebalance_ef1(&eq, &er)?,
                        other => {
                            return Err(Error::Parse(format!("unknown rounding mode {other:?}")))
                        }
                    }
                }
            };
            alloc.save(&args.output, Some(&payments))?;
            println!("rounded ({}) -> {}", args.mode, args.output.display());
            Ok(0)
        }
        Command::Efx(args) => {
            let inst = Instance::load(&args.input)?;
            let solver = SolverChoice::parse(&args.solver)?;
            let n = inst.n();
            let m = inst.m();
            if m <= 2 * n {
                let order: Vec<usize> = (0..n).collect();
                let alloc = chores::efx::efx_small(&inst, &order)?;
                alloc.save(&args.output, None)?;
            } else {
                let er = ErInstance::uniform(inst.clone(), chores::qr(1, 2))?;
                let eq = match &args.eq {
                    Some(path) => load_equilibrium(path)?.1,
                    None => chores::report::solve_equilibrium(&er, solver, cli.max_pivots)?.0,
                };
                let alloc = chores::efx::four_efx(&eq, &er)?;
                alloc.save(&args.output, None)?;
            }
            println!("efx allocation -> {}", args.output.display());
            Ok(0)
        }
        Command::Bivalued(args) => {
            let inst = Instance::load(&args.input)?;
            let solver = SolverChoice::parse(&args.solver)?;
            let bform = chores::instances::normalize_bivalued(&inst)?;
            let n = inst.n();
            let m = inst.m();
            let (alloc, p) = if m <= 2 * n {
                chores::bivalued::bivalued_efx_po_small(&bform)?
            } else {
                let er = ErInstance::uniform(bform.scaled.clone(), chores::qr(1, 2))?;
                let eq = match &args.eq {
                    Some(path) => load_equilibrium(path)?.1,
                    None => chores::report::solve_equilibrium(&er, solver, cli.max_pivots)?.0,
                };
                chores::bivalued::bivalued_3efx_po(&eq, &er, &bform)?
            };
            alloc.save(&args.output, Some(&p))?;
            println!("bivalued allocation -> {}", args.output.display());
            Ok(0)
        }
        Command::Check(args) => {
            let inst = Instance::load(&args.instance)?;
            let (alloc, payments) = IntegralAllocation::load(&args.alloc)?;
            let alpha = parse_q(&args.alpha)?;
            let criterion = parse_criterion(&args.criterion, alpha, args.k)?;
            let verdict =
                chores::verify::check_fairness(&inst, &alloc, payments.as_ref(), &criterion)?;
            match verdict {
                Ok(()) => {
                    println!("PASS");
                    Ok(0)
                }
                Err(witness) => {
                    println!("FAIL: {}", witness.render());
                    Ok(1)
                }
            }
        }
        Command::Oracle(args) => {
            let inst = Instance::load(&args.instance)?;
            let criterion = match args.criterion.as_str() {
                "efx" => OracleCriterion::Efx,
                "ef1" => OracleCriterion::Ef1,
                "ef2" => OracleCriterion::Ef2,
                other => return Err(Error::Parse(format!("unknown oracle criterion {other:?}"))),
            };
            let (alpha, alloc) = minimal_alpha_oracle(&inst, criterion, args.cap)?;
            println!("{}", chores::fmt_q(&alpha));
            println!("witness bundles: {:?}", alloc.bundles());
            Ok(0)
        }
        Command::Pipeline(args) => {
            let inst = Instance::load(&args.input)?;
            let goal = Goal::parse(&args.goal)?;
            let solver = SolverChoice::parse(&args.solver)?;
            let (alloc, payments, report) = pipeline(&inst, goal, solver, cli.max_pivots)?;
            alloc.save(&args.output, payments.as_ref())?;
            if let Some(report_path) = args.report {
                std::fs::write(
                    &report_path,
                    serde_json::to_string_pretty(&report.to_json()).unwrap(),
                )?;
            }
            println!(
                "{} via {}: digest {}, efx alpha {}",
                goal.name(),
                report.algorithm,
                instance_digest(&inst),
                report.efx_alpha.as_ref().map(chores::fmt_q).unwrap_or_else(|| "-".into()),
            );
            Ok(0)
        }
        Command::Bench(args) => {
            let cfg = serde_json::from_str(&std::fs::read_to_string(&args.config)?)
                .map_err(|e| Error::Parse(e.to_string()))?;
            let batches = batches_from_json(&cfg)?;
            let solver = SolverChoice::parse(&args.solver)?;
            let (rows, worst) = bench(&batches, solver, cli.max_pivots)?;
            match cli.format.as_str() {
                "csv" => {
                    let mut out = String::from(RunReport::csv_header());
                    out.push('\n');
                    for row in &rows {
                        out.push_str(&row.csv_row());
                        out.push('\n');
                    }
                    std::fs::write(&args.output, out)?;
                }
                "json" => {
                    let v =
                        serde_json::Value::Array(rows.iter().map(RunReport::to_json).collect());
                    std::fs::write(&args.output, serde_json::to_string_pretty(&v).unwrap())?;
                }
                other => return Err(Error::Parse(format!("unknown format {other:?}"))),
            }
            for (goal, alpha) in worst {
                println!("worst efx alpha for {goal}: {}", chores::fmt_q(&alpha));
            }
            println!("{} rows -> {}", rows.len(), args.output.display());
            Ok(0)
        }
    }
}

fn parse_criterion(name: &str, alpha: Q, k: Option<usize>) -> chores::Result<Criterion> {
    Ok(match name {
        "efx" => Criterion::Efx { alpha },
        "ef1" => Criterion::Efk { alpha, k: 1 },
        "ef2" => Criterion::Efk { alpha, k: 2 },
        "efk" => Criterion::Efk {
            alpha,
            k: k.ok_or_else(|| Error::Parse("efk needs --k".into()))?,
        },
        "pefx" => Criterion::PEfx { alpha },
        "pef1" => Criterion::PEfk { alpha, k: 1 },
        "pef2" => Criterion::PEfk { alpha, k: 2 },
        "pefk" => Criterion::PEfk {
            alpha,
            k: k.ok_or_else(|| Error::Parse("pefk needs --k".into()))?,
        },
        other => return Err(Error::Parse(format!("unknown criterion {other:?}"))),
    })
}
