//! Command-line front end: decide solvability, run and replay protocols,
//! explore schedules exhaustively, attack protocols with the freezing
//! adversary, analyze state graphs, print the d-disagreement bounds, and run
//! campaigns from config files.
//!
//! Machine-readable records go to stdout; human summaries go to stderr. Exit
//! codes: 0 all checks passed, 1 internal error, 2 usage or parse error,
//! 3 a check failed or the task is unsolvable.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use soslab::adversary::freeze_adversary;
use soslab::harness::{parse_campaign, run_campaign, CampaignSchedules, Outcome, ProtocolSpec};
use soslab::kernel::{
    decisions_of, enumerate_with, format_trace, parse_trace, run, CrashRule, EnumerateOptions,
    ProcessId, RunResult, Schedule,
};
use soslab::sos::{
    decide_solvability, disagreement_lower_bound, disagreement_upper_bound_n, OutputSet, ValueId,
};
use soslab::text::{parse_sos, parse_value_list};
use soslab::valence::{analyze, extract_state_graph, StateGraph};

#[derive(Parser)]
#[command(
    name = "soslab",
    version,
    about = "Deterministic simulator and analysis toolkit for SOS distributed tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether an SOS task is solvable under t crashes.
    Decide {
        /// The SOS, e.g. '{{1},{1,2}}'.
        #[arg(long)]
        sos: String,
        /// Crash bound.
        #[arg(long, default_value_t = 0)]
        t: u32,
    },
    /// Run one protocol instance under a seeded or replayed schedule.
    Run(RunArgs),
    /// Exhaustively explore the schedules of a protocol instance.
    Explore(ExploreArgs),
    /// Attack a protocol with the freeze/thaw/crash adversary.
    Adversary(AdversaryArgs),
    /// Analyze a state graph: valences, axioms, critical states.
    Valence(ValenceArgs),
    /// Print the d-disagreement process bounds for (d, t).
    Bounds {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        t: u32,
    },
    /// Run a campaign from a config file.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads for the run grid (default sequential).
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Override the config's seed range, as 'lo..hi'.
        #[arg(long)]
        seeds: Option<String>,
    },
}

/// Protocol selection shared by run/explore/adversary.
#[derive(Args)]
struct ProtocolArgs {
    /// alg1 | alg2 | alg2-relaxed | alg3
    #[arg(long)]
    protocol: String,
    /// The SOS (alg1, alg3).
    #[arg(long)]
    sos: Option<String>,
    /// Number of distinct values (alg2).
    #[arg(long)]
    d: Option<u32>,
    /// The d values, e.g. '1,2,3' (alg2; defaults to 1..=d).
    #[arg(long)]
    values: Option<String>,
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 0)]
    t: u32,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Schedule seed; defaults to $SOSLAB_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Processes to crash at seed-chosen points, e.g. 'p2,p5'.
    #[arg(long)]
    crash: Option<String>,
    /// Replay an explicit schedule from a trace file instead.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Input vector, e.g. '1,-,2' ('-' is no input; defaults to all '-').
    #[arg(long)]
    input: Option<String>,
}

#[derive(Args)]
struct ExploreArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// State-exploration budget.
    #[arg(long, default_value_t = 1_000_000)]
    budget: usize,
    /// Also explore crash decisions (any process, up to t).
    #[arg(long, default_value_t = false)]
    crashes: bool,
}

#[derive(Args)]
struct AdversaryArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ValenceArgs {
    /// Read a state graph from a file...
    #[arg(long)]
    graph: Option<PathBuf>,
    /// ...or extract one from a protocol instance.
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    sos: Option<String>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, default_value_t = 1_000_000)]
    budget: usize,
}

/// Anything that should stop the command with a specific exit code.
enum CliError {
    Usage(String),
    CheckFailed(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::CheckFailed(_) => 3,
            CliError::Internal(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::CheckFailed(m) | CliError::Internal(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("soslab: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Decide { sos, t } => cmd_decide(&sos, t),
        Command::Run(args) => cmd_run(args),
        Command::Explore(args) => cmd_explore(args),
        Command::Adversary(args) => cmd_adversary(args),
        Command::Valence(args) => cmd_valence(args),
        Command::Bounds { d, t } => cmd_bounds(d, t),
        Command::Campaign {
            config,
            workers,
            seeds,
        } => cmd_campaign(&config, workers, seeds.as_deref()),
    }
}

fn default_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("SOSLAB_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or(0)
}

impl ProtocolArgs {
    fn spec(&self) -> Result<ProtocolSpec, CliError> {
        let sos = self
            .sos
            .as_deref()
            .map(parse_sos)
            .transpose()
            .map_err(usage)?;
        match self.protocol.as_str() {
            "alg1" => Ok(ProtocolSpec::Alg1 {
                sos: sos.ok_or_else(|| usage("alg1 needs --sos"))?,
                n: self.n,
                t: self.t,
            }),
            "alg2" | "alg2-relaxed" => {
                let d = self.d.ok_or_else(|| usage("alg2 needs --d"))?;
                let values = match &self.values {
                    Some(text) => parse_value_list(text).map_err(usage)?,
                    None => (1..=d).map(ValueId).collect(),
                };
                Ok(ProtocolSpec::Alg2 {
                    d,
                    values,
                    n: self.n,
                    t: self.t,
                    relaxed: self.protocol == "alg2-relaxed",
                })
            }
            "alg3" => {
                if self.t != 0 {
                    return Err(usage("alg3 requires --t 0"));
                }
                Ok(ProtocolSpec::Alg3 {
                    sos: sos.ok_or_else(|| usage("alg3 needs --sos"))?,
                    n: self.n,
                })
            }
            other => Err(usage(format!("unknown protocol '{other}'"))),
        }
    }
}

fn format_vector(vector: &[Option<ValueId>]) -> String {
    let parts: Vec<String> = vector
        .iter()
        .map(|v| v.map(|v| v.to_string()).unwrap_or_else(|| "-".into()))
        .collect();
    format!("[{}]", parts.join(","))
}

fn format_pid_set(set: &BTreeSet<ProcessId>) -> String {
    let parts: Vec<String> = set.iter().map(|p| p.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

fn result_record(result: &RunResult) -> String {
    format!(
        "result quiescent={} crashed={} output_vector={} output_set={}",
        result.quiescent,
        format_pid_set(&result.crashed),
        format_vector(&result.output_vector),
        result.output_set,
    )
}

fn cmd_decide(sos_text: &str, t: u32) -> Result<(), CliError> {
    let sos = parse_sos(sos_text).map_err(usage)?;
    let verdict = decide_solvability(&sos, t);
    let components: Vec<String> = verdict
        .components
        .iter()
        .map(|c| {
            let sets: Vec<String> = c.iter().map(|o| o.to_string()).collect();
            format!("{{{}}}", sets.join(","))
        })
        .collect();
    println!(
        "verdict solvable={} reason={} components={}",
        verdict.solvable,
        verdict.reason,
        components.join(";"),
    );
    if verdict.solvable {
        eprintln!("solvable under t={t} crashes ({})", verdict.reason);
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "unsolvable under t={t} crashes: the SOS graph has {} components",
            verdict.components.len()
        )))
    }
}

fn parse_inputs(text: Option<&str>, n: u32) -> Result<Vec<Option<ValueId>>, CliError> {
    match text {
        None => Ok(vec![None; n as usize]),
        Some(text) => {
            let inputs: Vec<Option<ValueId>> = text
                .split(',')
                .map(|tok| {
                    let tok = tok.trim();
                    if tok == "-" {
                        Ok(None)
                    } else {
                        tok.parse::<u32>()
                            .map(|v| Some(ValueId(v)))
                            .map_err(|_| usage(format!("bad input value '{tok}'")))
                    }
                })
                .collect::<Result<_, _>>()?;
            if inputs.len() != n as usize {
                return Err(usage(format!(
                    "input vector has {} entries, expected n = {n}",
                    inputs.len()
                )));
            }
            Ok(inputs)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let spec = args.protocol.spec()?;
    let instance = spec.instantiate().map_err(usage)?;
    let inputs = parse_inputs(args.input.as_deref(), instance.n())?;
    let schedule = match &args.schedule {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(internal)?;
            let trace = parse_trace(&text).map_err(usage)?;
            Schedule::Explicit(decisions_of(&trace))
        }
        None => {
            let mut crash_targets = BTreeSet::new();
            if let Some(crash) = &args.crash {
                for tok in crash.split(',').filter(|s| !s.trim().is_empty()) {
                    let tok = tok.trim();
                    let id = tok
                        .strip_prefix('p')
                        .and_then(|r| r.parse::<u32>().ok())
                        .ok_or_else(|| usage(format!("bad process '{tok}'")))?;
                    crash_targets.insert(ProcessId(id));
                }
            }
            Schedule::Seeded {
                seed: default_seed(args.seed),
                crash_targets,
            }
        }
    };
    let result = run(&instance.behaviors, instance.t, &inputs, &schedule).map_err(internal)?;
    print!("{}", format_trace(&result.trace));
    println!("{}", result_record(&result));
    eprintln!(
        "{}: n={} t={} {} decisions, output set {}{}",
        instance.name,
        instance.n(),
        instance.t,
        result.trace.len(),
        result.output_set,
        if result.quiescent { "" } else { " (NOT quiescent)" },
    );
    if !result.quiescent {
        return Err(CliError::CheckFailed(format!(
            "run did not quiesce; blocked: {}",
            format_pid_set(&result.blocked)
        )));
    }
    Ok(())
}

fn cmd_explore(args: ExploreArgs) -> Result<(), CliError> {
    let spec = args.protocol.spec()?;
    let instance = spec.instantiate().map_err(usage)?;
    let inputs = vec![None; instance.n() as usize];
    let opts = EnumerateOptions {
        max_states: args.budget,
        crashes: if args.crashes {
            CrashRule::Any
        } else {
            CrashRule::None
        },
    };
    let mut index = 0usize;
    let mut sets: BTreeSet<OutputSet> = BTreeSet::new();
    let mut non_quiescent = 0usize;
    enumerate_with(&instance.behaviors, instance.t, &inputs, &opts, |r| {
        index += 1;
        if r.quiescent {
            sets.insert(r.output_set.clone());
        } else {
            non_quiescent += 1;
        }
        println!(
            "run {index} output_set={} crashed={} quiescent={} decisions={}",
            r.output_set,
            format_pid_set(&r.crashed),
            r.quiescent,
            r.trace.len()
        );
    })
    .map_err(internal)?;
    let set_list: Vec<String> = sets.iter().map(|o| o.to_string()).collect();
    println!(
        "explored runs={index} output_sets={{{}}} non_quiescent={non_quiescent}",
        set_list.join(",")
    );
    eprintln!(
        "{}: {} runs, {} distinct output sets",
        instance.name,
        index,
        sets.len()
    );
    Ok(())
}

fn cmd_adversary(args: AdversaryArgs) -> Result<(), CliError> {
    let spec = args.protocol.spec()?;
    let values = match &spec {
        ProtocolSpec::Alg2 { values, .. } => values.clone(),
        _ => return Err(usage("the adversary targets alg2 or alg2-relaxed")),
    };
    let instance = spec.instantiate().map_err(usage)?;
    let seed = default_seed(args.seed);
    let attack =
        freeze_adversary(&instance.behaviors, instance.t, &values, seed).map_err(internal)?;
    for fragment in &attack.report.fragments {
        let frozen: Vec<String> = fragment
            .frozen
            .iter()
            .map(|(p, v)| format!("{p}:{v}"))
            .collect();
        println!(
            "fragment {} frozen=[{}] committed={} quota={}",
            fragment.index,
            frozen.join(","),
            fragment
                .committed
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".into()),
            fragment.quota
        );
    }
    println!(
        "adversary violated={} target={} output_set={} crashed={} stalled={} seed={seed}",
        attack.report.violated,
        attack.report.target,
        attack.result.output_set,
        format_pid_set(&attack.report.crash_set),
        attack.report.stalled_early,
    );
    eprintln!(
        "{} against {}: {}",
        if attack.report.violated {
            "violation"
        } else {
            "defended"
        },
        instance.name,
        if attack.report.violated {
            format!(
                "output {} is a strict subset of {} with {} crash(es)",
                attack.result.output_set,
                attack.report.target,
                attack.result.crashed.len()
            )
        } else {
            format!("run produced the full target {}", attack.report.target)
        }
    );
    Ok(())
}

fn cmd_valence(args: ValenceArgs) -> Result<(), CliError> {
    let graph: StateGraph = match (&args.graph, &args.protocol) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(internal)?;
            StateGraph::parse(&text).map_err(usage)?
        }
        (None, Some(name)) => {
            if name != "alg3" {
                return Err(usage("valence extraction currently targets alg3"));
            }
            let sos = args
                .sos
                .as_deref()
                .ok_or_else(|| usage("extraction needs --sos"))?;
            let sos = parse_sos(sos).map_err(usage)?;
            let n = args.n.ok_or_else(|| usage("extraction needs --n"))?;
            let cfg = soslab::protocols::Alg3Config::new(&sos, n, 0).map_err(usage)?;
            let inputs = vec![None; n as usize];
            extract_state_graph(&cfg.instance().behaviors, &inputs, args.budget)
                .map_err(internal)?
        }
        _ => return Err(usage("pass exactly one of --graph or --protocol")),
    };

    let report = analyze(&graph);
    for (i, state) in graph.states() {
        let valence: Vec<String> = report.valences[i].iter().map(|o| o.to_string()).collect();
        println!(
            "state {i} size={} output={} valence={{{}}} disconnected={} critical={}",
            state.len(),
            graph.is_output(i),
            valence.join(","),
            report.disconnected_states.contains(&i),
            report.critical_states.contains(&i),
        );
    }
    let fmt_witness = |w: Option<usize>| w.map(|i| i.to_string()).unwrap_or_else(|| "-".into());
    println!(
        "axioms asynchrony={} witness={} termination={} resilience={} witness={}",
        report.axioms.asynchrony.holds,
        fmt_witness(report.axioms.asynchrony.witness),
        report.axioms.termination.holds,
        report.axioms.resilience.holds,
        fmt_witness(report.axioms.resilience.witness),
    );
    let inputs: Vec<String> = graph.input_states().iter().map(|i| i.to_string()).collect();
    println!(
        "summary states={} input_states=[{}] disconnected={} critical={}",
        graph.len(),
        inputs.join(","),
        report.disconnected_states.len(),
        report.critical_states.len(),
    );
    eprintln!(
        "{} states, {} disconnected, {} critical",
        graph.len(),
        report.disconnected_states.len(),
        report.critical_states.len()
    );
    if !report.malformed_maximal.is_empty() {
        return Err(CliError::CheckFailed(format!(
            "malformed graph: maximal states {:?} are not output states",
            report.malformed_maximal
        )));
    }
    Ok(())
}

fn cmd_bounds(d: u32, t: u32) -> Result<(), CliError> {
    if d < 1 {
        return Err(usage("d must be at least 1"));
    }
    let lower = disagreement_lower_bound(d, t);
    let upper = disagreement_upper_bound_n(d, t);
    println!("bounds d={d} t={t} lower={lower} upper={upper}");
    eprintln!(
        "d-disagreement with d={d}, t={t}: impossible below n={lower}, implemented at n≥{upper}"
    );
    Ok(())
}

fn cmd_campaign(path: &PathBuf, workers: usize, seeds: Option<&str>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(internal)?;
    let mut campaign = parse_campaign(&text).map_err(usage)?;
    if let Some(text) = seeds {
        let (lo, hi) = text
            .split_once("..")
            .ok_or_else(|| usage("expected --seeds lo..hi"))?;
        let lo = lo.parse::<u64>().map_err(usage)?;
        let hi = hi.parse::<u64>().map_err(usage)?;
        match &mut campaign.schedules {
            CampaignSchedules::Seeded { seeds } => *seeds = lo..hi,
            CampaignSchedules::Exhaustive { .. } => {
                return Err(usage("--seeds does not apply to an exhaustive campaign"))
            }
        }
    }
    let report = run_campaign(&campaign, workers.max(1)).map_err(internal)?;
    let mut failed = 0usize;
    let mut inconclusive = 0usize;
    for check in &report.reports {
        println!(
            "check {} {} runs={} detail={}",
            check.name, check.outcome, check.runs_examined, check.detail
        );
        match check.outcome {
            Outcome::Failed => {
                failed += 1;
                if let Some(ce) = &check.counterexample {
                    eprintln!("counterexample for {}: {}", check.name, ce.explanation);
                    eprint!("{}", format_trace(&ce.result.trace));
                }
            }
            Outcome::Inconclusive => inconclusive += 1,
            Outcome::Passed => {}
        }
    }
    eprintln!(
        "campaign: {} checks, {} failed, {} inconclusive, {} runs",
        report.reports.len(),
        failed,
        inconclusive,
        report.runs_examined
    );
    if failed > 0 {
        Err(CliError::CheckFailed(format!("{failed} check(s) failed")))
    } else if inconclusive > 0 {
        Err(CliError::CheckFailed(format!(
            "{inconclusive} check(s) inconclusive"
        )))
    } else {
        Ok(())
    }
}
