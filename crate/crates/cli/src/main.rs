//! `gridmga`: validate and scale cases, generate alternative sets, run
//! feedback rounds, evaluate sets, run experiments and serve sessions.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gridmga_core::evaluation::{evaluate, rank_by_values, EvalContext, EvalFn};
use gridmga_core::experiment::{export_report, run_experiment, ExperimentConfig};
use gridmga_core::hitl::{run_hitl_round, FeedbackSource, HitlParams, RankingFeedback, Variant};
use gridmga_core::mga::{generate_mga_set, AlternativeSet, WeightVector};
use gridmga_core::network::to_native;
use gridmga_core::{cases, Alternative, Network, ReconfigModel, Solver, SwitchingOptions};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "gridmga", version, about = "Near-optimal grid reconfiguration alternatives with operator feedback")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a case for structural problems.
    Validate { case: String },
    /// Multiply every line limit by a factor and write the native document.
    Scale {
        case: String,
        #[arg(long)]
        factor: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an initial set of alternatives.
    Mga(MgaArgs),
    /// Generate a feedback round from a ranking of a set.
    Hitl(HitlArgs),
    /// Evaluate every alternative of a set and rank them.
    Eval(EvalArgs),
    /// Run a full study and export tables.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also run every sweep point into its own subdirectory.
        #[arg(long)]
        sweeps: bool,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = gridmga_service::DATA_DIR_ENV, default_value = gridmga_service::DEFAULT_DATA_DIR)]
        data_dir: PathBuf,
        /// Concurrent solves; defaults to the number of CPUs.
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args)]
struct SolverArgs {
    /// Relative MIP gap.
    #[arg(long, default_value_t = 1e-3)]
    gap: f64,
    /// Seconds per solve.
    #[arg(long)]
    time_limit: Option<f64>,
}

impl SolverArgs {
    fn solver(&self) -> Result<Solver> {
        let mut s = Solver::with_default_backend(self.gap)?;
        s.options.time_limit = self.time_limit;
        Ok(s)
    }
}

#[derive(Args)]
struct MgaArgs {
    /// Bundled case name or case file.
    case: String,
    /// Multiplier on every line limit.
    #[arg(long)]
    factor: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    max_line_actions: usize,
    #[arg(long, default_value_t = 3)]
    max_busbar_actions: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HitlArgs {
    /// Set document written by `mga` or `hitl`.
    set: PathBuf,
    /// JSON file with ranked alternative positions, or an evaluation
    /// function (u1..u6) to rank by.
    #[arg(long)]
    ranking: String,
    /// Alternatives kept when ranking by a function.
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, default_value = "v2")]
    variant: Variant,
    #[arg(long, default_value_t = 0.15)]
    tau: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    set: PathBuf,
    #[arg(long = "fn")]
    fn_id: EvalFn,
    /// Loading above which a line counts as overloaded.
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Self-contained alternative set: enough to rebuild the model later.
#[derive(Debug, Serialize, Deserialize)]
struct SetDocument {
    network: Network,
    switching: SwitchingOptions,
    f_star: f64,
    least_cost: Alternative,
    set: AlternativeSet,
    feedback: Option<FeedbackRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FeedbackRecord {
    ranking: RankingFeedback,
    params: HitlParams,
    weights: Vec<WeightVector>,
    warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EvalOutput {
    fn_id: EvalFn,
    values: Vec<f64>,
    /// Positions in the set, best first.
    ranking: Vec<usize>,
}

fn write_json(out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn read_set(path: &Path) -> Result<SetDocument> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_case(case: &str) -> Result<Network> {
    cases::load(case).with_context(|| format!("loading case {case}"))
}

fn validate(case: &str) -> Result<()> {
    let net = load_case(case)?;
    let report = net.validate();
    if !report.is_valid() {
        bail!("{} has {} issues:\n{report}", net.name, report.issues.len());
    }
    println!(
        "{}: {} buses, {} branches, {} generators, {} splittable substations, {:.1} MW load",
        net.name,
        net.buses.len(),
        net.branches.len(),
        net.generators.len(),
        net.substations.iter().filter(|s| s.splittable).count(),
        net.total_load()
    );
    Ok(())
}

fn mga(args: &MgaArgs) -> Result<()> {
    let mut net = load_case(&args.case)?;
    if let Some(f) = args.factor {
        net = net.scale_line_capacities(f)?;
    }
    let switching = SwitchingOptions {
        allow_busbar_splitting: args.max_busbar_actions > 0,
        max_busbar_actions: args.max_busbar_actions,
        ..SwitchingOptions::lines_only(args.max_line_actions)
    };
    let model = ReconfigModel::build(Arc::new(net.clone()), switching.clone())?;
    let solver = args.solver.solver()?;
    let (f_star, least_cost) = model.solve_least_cost(&solver)?;
    log::info!("least cost {f_star:.3} with topology {}", least_cost.topology.to_bit_string());
    let set = generate_mga_set(&model, &solver, f_star, args.epsilon, args.count, args.seed)?;
    write_json(
        args.out.as_deref(),
        &SetDocument {
            network: net,
            switching,
            f_star,
            least_cost,
            set,
            feedback: None,
        },
    )
}

fn context(doc: &SetDocument, threshold: f64) -> Result<EvalContext> {
    let mut ctx = EvalContext::from_least_cost(&doc.least_cost.topology);
    ctx.overload_threshold = threshold;
    ctx.validate()?;
    Ok(ctx)
}

fn values(doc: &SetDocument, model: &ReconfigModel, fn_id: EvalFn, ctx: &EvalContext) -> Result<Vec<f64>> {
    doc.set
        .alternatives
        .iter()
        .map(|a| Ok(evaluate(fn_id, a, &doc.network, model.layout(), ctx)?))
        .collect()
}

fn hitl(args: &HitlArgs) -> Result<()> {
    let doc = read_set(&args.set)?;
    let model = ReconfigModel::build(Arc::new(doc.network.clone()), doc.switching.clone())?;
    let ranking = match args.ranking.parse::<EvalFn>() {
        Ok(fn_id) => {
            let v = values(&doc, &model, fn_id, &context(&doc, 0.9)?)?;
            let mut ranked = rank_by_values(&v, fn_id.direction());
            ranked.truncate(args.top_k);
            RankingFeedback {
                ranked_ids: ranked,
                source: FeedbackSource::Simulated { fn_id },
            }
        }
        Err(_) => {
            let text = fs::read_to_string(&args.ranking).with_context(|| format!("reading ranking {}", args.ranking))?;
            RankingFeedback {
                ranked_ids: serde_json::from_str(&text).context("ranking file must hold a JSON list of positions")?,
                source: FeedbackSource::Human {
                    session: args.ranking.clone(),
                },
            }
        }
    };
    let params = HitlParams {
        variant: args.variant,
        tau: args.tau,
        a: args.a,
        b: args.b,
        round_count: args.count,
    };
    let round = run_hitl_round(
        &model,
        &args.solver.solver()?,
        &doc.set,
        &ranking,
        &params,
        args.seed.unwrap_or(doc.set.seed),
    )?;
    for w in &round.warnings {
        log::warn!("{w}");
    }
    write_json(
        args.out.as_deref(),
        &SetDocument {
            set: round.set,
            feedback: Some(FeedbackRecord {
                ranking,
                params: round.params,
                weights: round.feedback_weights,
                warnings: round.warnings,
            }),
            ..doc
        },
    )
}

fn eval(args: &EvalArgs) -> Result<()> {
    let doc = read_set(&args.set)?;
    let model = ReconfigModel::build(Arc::new(doc.network.clone()), doc.switching.clone())?;
    let v = values(&doc, &model, args.fn_id, &context(&doc, args.threshold)?)?;
    let ranking = rank_by_values(&v, args.fn_id.direction());
    write_json(
        args.out.as_deref(),
        &EvalOutput {
            fn_id: args.fn_id,
            values: v,
            ranking,
        },
    )
}

fn experiment(config: &Path, out: &Path, sweeps: bool) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = ExperimentConfig::from_toml(&text)?;
    let mut runs = vec![(String::new(), cfg.clone())];
    if sweeps {
        runs.extend(cfg.sweep_configs());
    }
    for (name, c) in runs {
        let dir = out.join(&name);
        log::info!("running {}", if name.is_empty() { "main study" } else { &name });
        let report = run_experiment(&c)?;
        for f in &report.failures {
            log::error!("seed {} failed: {}", f.seed, f.error);
        }
        export_report(&report, &dir)?;
        println!(
            "{}: f* {:.3}, {} seeds, {} failures -> {}",
            report.network,
            report.f_star,
            report.seeds.len(),
            report.failures.len(),
            dir.display()
        );
    }
    Ok(())
}

fn serve(listen: SocketAddr, data_dir: PathBuf, workers: Option<usize>) -> Result<()> {
    let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(gridmga_service::serve(listen, data_dir, workers))?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.command {
        Command::Validate { case } => validate(&case),
        Command::Scale { case, factor, out } => {
            let net = load_case(&case)?.scale_line_capacities(factor)?;
            let text = to_native(&net)?;
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display())),
                None => {
                    println!("{text}");
                    Ok(())
                }
            }
        }
        Command::Mga(args) => mga(&args),
        Command::Hitl(args) => hitl(&args),
        Command::Eval(args) => eval(&args),
        Command::Experiment { config, out, sweeps } => experiment(&config, &out, sweeps),
        Command::Serve {
            listen,
            data_dir,
            workers,
        } => serve(listen, data_dir, workers),
    }
}
