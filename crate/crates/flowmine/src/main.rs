use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use flowmine::error::Error;
use flowmine::export::{
    diff_models, graph_to_dot, model_to_dot, parse_model_export, render_diff, serialize_model,
};
use flowmine::mining::{mine, MineConfig};
use flowmine::model::{parse_message_definitions, parse_traces, MsgId, Trace, TraceSet};
use flowmine::report::RunReport;
use flowmine::synth::{generate, parse_flow_file, GenerationConfig, Preset};

#[derive(Parser)]
#[command(name = "flowmine", version, about = "Mine message-flow specifications from communication traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine a flow model from a message dictionary and trace files
    Mine(MineArgs),
    /// Generate synthetic traces and their ground-truth model
    Generate(GenerateArgs),
    /// Compare two model exports
    Diff(DiffArgs),
}

#[derive(Args)]
struct MineArgs {
    /// Message definition file
    #[arg(long)]
    defs: PathBuf,
    /// Trace files, one trace per line
    #[arg(long, required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    /// Accuracy target for refinement
    #[arg(long, default_value_t = 0.9)]
    accuracy: f64,
    /// Edge-pruning confidence threshold
    #[arg(long, default_value_t = 0.45)]
    theta: f64,
    /// Longest candidate path considered
    #[arg(long, default_value_t = 10)]
    max_len: usize,
    /// Path-enumeration cap
    #[arg(long, default_value_t = 100_000)]
    max_paths: usize,
    /// Weight of essential edges in path scores
    #[arg(long, default_value_t = 1.0)]
    w_essential: f64,
    /// Essential message flow removal during evaluation
    #[arg(long, default_value = "on", value_parser = ["on", "off"])]
    emf: String,
    /// Evaluation worker threads
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Accepted for interface symmetry; mining itself is deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for artifacts
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write DOT renderings of the causality graph and mined flows
    #[arg(long)]
    dot: bool,
    /// Write the report as JSON instead of text
    #[arg(long)]
    json_report: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// Named corpus preset: small-20, large-10, or large-20
    #[arg(long, conflicts_with = "flows")]
    preset: Option<String>,
    /// Flow definition file (dictionary + flow blocks)
    #[arg(long)]
    flows: Option<PathBuf>,
    /// Executions of each flow per trace
    #[arg(long, default_value_t = 10)]
    instances: usize,
    /// Number of traces to generate
    #[arg(long, default_value_t = 1)]
    num_traces: usize,
    /// Interleaving seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop rule `ID:PROB`: emissions of ID are dropped with probability PROB
    #[arg(long)]
    drop: Option<String>,
    /// Output directory for traces.txt, defs.txt, ground-truth.txt
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct DiffArgs {
    /// Baseline model export
    model_a: PathBuf,
    /// Comparison model export
    model_b: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mine(args) => cmd_mine(&args),
        Command::Generate(args) => cmd_generate(&args),
        Command::Diff(args) => cmd_diff(&args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn cmd_mine(args: &MineArgs) -> Result<ExitCode, Error> {
    let dict = parse_message_definitions(&read_to_string(&args.defs)?)?;
    let mut traces: Vec<Trace> = Vec::new();
    for path in &args.traces {
        traces.extend(parse_traces(&read_to_string(path)?, &dict)?.traces);
    }
    let traces = TraceSet::new(traces);

    let cfg = MineConfig {
        accuracy: args.accuracy,
        theta: args.theta,
        max_len: args.max_len,
        max_paths: args.max_paths,
        w_essential: args.w_essential,
        emf: args.emf == "on",
        jobs: args.jobs,
        ..MineConfig::default()
    };
    let started = Instant::now();
    let outcome = mine(&traces, &dict, &cfg)?;
    let runtime = started.elapsed().as_secs_f64();

    write_artifact(
        &args.out,
        "model.txt",
        &serialize_model(&outcome.model, &dict, outcome.eval.acceptance_ratio),
    )?;
    write_artifact(&args.out, "essential.txt", &outcome.essential.serialize())?;
    let report = RunReport::from_outcome(&outcome, runtime);
    if args.json_report {
        write_artifact(&args.out, "report.json", &report.render_json())?;
    } else {
        write_artifact(&args.out, "report.txt", &report.render_text())?;
    }
    if args.dot {
        write_artifact(&args.out, "causality.dot", &graph_to_dot(&outcome.graph, &dict))?;
        write_artifact(&args.out, "flows.dot", &model_to_dot(&outcome.model, &dict))?;
    }

    eprintln!(
        "mined {} flows, acceptance ratio {:.4} ({} refinement iterations, {:.2}s)",
        outcome.model.size(),
        outcome.eval.acceptance_ratio,
        outcome.iterations,
        runtime
    );
    if outcome.below_threshold {
        eprintln!(
            "acceptance ratio below target {:.4}; artifacts are best-effort",
            args.accuracy
        );
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn parse_drop(spec: &str) -> Result<(MsgId, f64), Error> {
    let invalid =
        || Error::InvalidParameter(format!("drop rule must be `ID:PROB`, got `{spec}`"));
    let (id, prob) = spec.split_once(':').ok_or_else(invalid)?;
    let id: u32 = id.trim().parse().map_err(|_| invalid())?;
    let prob: f64 = prob.trim().parse().map_err(|_| invalid())?;
    Ok((MsgId(id), prob))
}

fn cmd_generate(args: &GenerateArgs) -> Result<ExitCode, Error> {
    let (dict, mut cfg) = match (&args.preset, &args.flows) {
        (Some(name), None) => {
            let preset = Preset::from_name(name).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown preset `{name}` (expected small-20, large-10, or large-20)"
                ))
            })?;
            preset.config(args.seed)
        }
        (None, Some(path)) => {
            let (dict, flows) = parse_flow_file(&read_to_string(path)?)?;
            let mut cfg = GenerationConfig::new(flows, args.instances, args.seed);
            cfg.num_traces = args.num_traces;
            (dict, cfg)
        }
        _ => {
            return Err(Error::InvalidParameter(
                "exactly one of --preset or --flows is required".into(),
            ))
        }
    };
    if let Some(spec) = &args.drop {
        cfg.drop_rule = Some(parse_drop(spec)?);
    }

    let (traces, ground_truth) = generate(&cfg)?;
    write_artifact(&args.out, "defs.txt", &dict.serialize())?;
    write_artifact(&args.out, "traces.txt", &traces.serialize())?;
    write_artifact(
        &args.out,
        "ground-truth.txt",
        &serialize_model(&ground_truth, &dict, 1.0),
    )?;
    eprintln!(
        "generated {} traces, {} messages, {} ground-truth flows",
        traces.traces.len(),
        traces.total_messages(),
        ground_truth.size()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_diff(args: &DiffArgs) -> Result<ExitCode, Error> {
    let a = parse_model_export(&read_to_string(&args.model_a)?)?;
    let b = parse_model_export(&read_to_string(&args.model_b)?)?;
    print!("{}", render_diff(&diff_models(&a, &b)));
    Ok(ExitCode::SUCCESS)
}
