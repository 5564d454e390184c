//! `kpilens` — explain KPI-driven control decisions from the command line.
//!
//! Trace records go in as JSON Lines, explanation records come out as
//! JSON Lines; everything else (progress, summaries, diagnostics) goes
//! to stderr so stdout stays machine-readable. Exit codes: 0 on
//! success, 1 for configuration/validation problems, 2 for I/O and
//! malformed JSON.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};

use kpilens::bench::{run_bench, BenchConfig};
use kpilens::harness::{run_session, ForecastKind, HarnessConfig, SyntheticEnvConfig};
use kpilens::pipeline::FinalReport;
use kpilens::snapshot::{load_snapshot, save_snapshot};
use kpilens::trace::TraceReader;
use kpilens::{Pipeline, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "kpilens",
    version,
    about = "Symbolic explanations for KPI-driven control agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a recorded trace file and emit one explanation per record.
    Replay(ReplayArgs),
    /// Explain trace records arriving on stdin, one JSON line at a time.
    Stream(StreamArgs),
    /// Run the synthetic adaptive-bitrate session end to end.
    Simulate(SimulateArgs),
    /// Measure per-component latency on a seeded synthetic stream.
    Bench(BenchArgs),
}

#[derive(clap::Args)]
struct ReplayArgs {
    /// Trace file, one JSON record per line.
    #[arg(long)]
    trace: PathBuf,
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Write explanation records here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the end-of-run policy graph here as DOT.
    #[arg(long)]
    policy_graph: Option<PathBuf>,
    /// Write the end-of-run mutual-information table here as CSV.
    #[arg(long)]
    mi_report: Option<PathBuf>,
    /// Resume from a snapshot directory written by --snapshot-out.
    #[arg(long)]
    snapshot_in: Option<PathBuf>,
    /// Write a snapshot directory after the last record.
    #[arg(long)]
    snapshot_out: Option<PathBuf>,
    /// Annotate refinement advice even if the configuration disables it.
    #[arg(long, conflicts_with = "no_refine")]
    refine: bool,
    /// Drop the advisory refinement annotations.
    #[arg(long)]
    no_refine: bool,
    /// Override the configured refiner margin.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(clap::Args)]
struct StreamArgs {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Write the end-of-run policy graph here as DOT.
    #[arg(long)]
    policy_graph: Option<PathBuf>,
    /// Write the end-of-run mutual-information table here as CSV.
    #[arg(long)]
    mi_report: Option<PathBuf>,
    /// Resume from a snapshot directory written by --snapshot-out.
    #[arg(long)]
    snapshot_in: Option<PathBuf>,
    /// Write a snapshot directory when stdin closes.
    #[arg(long)]
    snapshot_out: Option<PathBuf>,
    /// Annotate refinement advice even if the configuration disables it.
    #[arg(long, conflicts_with = "no_refine")]
    refine: bool,
    /// Drop the advisory refinement annotations.
    #[arg(long)]
    no_refine: bool,
    /// Override the configured refiner margin.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Synthetic environment configuration (JSON); built-in defaults
    /// when omitted.
    #[arg(long)]
    env_config: Option<PathBuf>,
    /// Total episodes to play.
    #[arg(long, default_value_t = 8)]
    episodes: usize,
    /// Leading episodes that mix in exploration.
    #[arg(long, default_value_t = 3)]
    warmup_episodes: usize,
    /// Control agent to play: reactive is the only one built in.
    #[arg(long, default_value = "reactive")]
    agent: String,
    /// Forecast source: perfect | persistence.
    #[arg(long, default_value = "perfect")]
    forecaster: String,
    /// Forecast horizon in steps.
    #[arg(long, default_value_t = 3)]
    horizon: usize,
    /// Exploration probability during warm-up episodes.
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    /// Session seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Make the pipeline's advice binding: overridden actions execute.
    #[arg(long)]
    refine: bool,
    /// Fixed refiner margin; omitted = auto-derived from a warm-up probe.
    #[arg(long)]
    tau: Option<f64>,
    /// Write the played trace here as JSON lines.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Write the pipeline configuration the session used (replays need it).
    #[arg(long)]
    config_out: Option<PathBuf>,
    /// Write explanation records here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the explanation stream entirely.
    #[arg(long)]
    quiet: bool,
    /// Write the end-of-run policy graph here as DOT.
    #[arg(long)]
    policy_graph: Option<PathBuf>,
    /// Write the end-of-run mutual-information table here as CSV.
    #[arg(long)]
    mi_report: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BenchArgs {
    /// Number of KPIs in the synthetic stream.
    #[arg(long, default_value_t = 12)]
    kpis: usize,
    /// Number of actions on the ladder.
    #[arg(long, default_value_t = 6)]
    actions: usize,
    /// Decision steps to measure.
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Emit the report as JSON instead of a text table.
    #[arg(long)]
    json: bool,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Replay(args) => replay(args),
        Command::Stream(args) => stream(args),
        Command::Simulate(args) => simulate(args),
        Command::Bench(args) => bench(args),
    };
    if let Err(err) = result {
        // A consumer closing the pipe early is a normal shutdown.
        if is_broken_pipe(&err) {
            return;
        }
        eprintln!("kpilens: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    err.chain()
        .find_map(|c| c.downcast_ref::<kpilens::Error>())
        .map(|e| e.exit_code())
        .unwrap_or(2)
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn load_config(
    path: &Path,
    refine: bool,
    no_refine: bool,
    tau: Option<f64>,
) -> anyhow::Result<PipelineConfig> {
    let mut config = PipelineConfig::from_path(path)
        .with_context(|| format!("loading configuration {}", path.display()))?;
    if refine {
        config.refiner.enabled = true;
    }
    if no_refine {
        config.refiner.enabled = false;
    }
    if let Some(t) = tau {
        config.refiner.tau = t;
    }
    Ok(config)
}

fn open_sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_reports(
    report: &FinalReport,
    policy: Option<&Path>,
    mi: Option<&Path>,
) -> anyhow::Result<()> {
    if let Some(p) = policy {
        fs::write(p, report.policy.to_dot())
            .with_context(|| format!("writing policy graph {}", p.display()))?;
    }
    if let Some(p) = mi {
        fs::write(p, report.mi.to_csv())
            .with_context(|| format!("writing MI report {}", p.display()))?;
    }
    Ok(())
}

fn summary(report: &FinalReport) -> String {
    match report.refinement_rate() {
        Some(rate) => format!(
            "{} records; advisory overrides {}/{} ({:.1}%)",
            report.timesteps,
            report.advisory_overrides,
            report.advisory_decisions,
            rate * 100.0
        ),
        None => format!(
            "{} records; refinement disabled or never consulted",
            report.timesteps
        ),
    }
}

/// Drive records from `reader` through `pipeline`, writing one
/// explanation line per record; `flush_each` keeps interactive pipes
/// responsive.
fn drive<R: BufRead>(
    pipeline: &mut Pipeline,
    reader: TraceReader<'_, R>,
    out: &mut dyn Write,
    flush_each: bool,
) -> anyhow::Result<()> {
    for record in reader {
        let explanation = pipeline.process(&record?)?;
        writeln!(out, "{}", explanation.to_json_line()?)?;
        if flush_each {
            out.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

fn finish(
    mut pipeline: Pipeline,
    snapshot_out: Option<&Path>,
    policy: Option<&Path>,
    mi: Option<&Path>,
) -> anyhow::Result<()> {
    // Snapshots capture the resumable mid-run state, so they are written
    // before the run is sealed.
    if let Some(dir) = snapshot_out {
        save_snapshot(&pipeline, dir)
            .with_context(|| format!("writing snapshot {}", dir.display()))?;
    }
    let report = pipeline.finish()?;
    write_reports(&report, policy, mi)?;
    eprintln!("kpilens: {}", summary(&report));
    Ok(())
}

fn build_pipeline(config: PipelineConfig, snapshot_in: Option<&Path>) -> anyhow::Result<Pipeline> {
    Ok(match snapshot_in {
        Some(dir) => load_snapshot(config, dir)
            .with_context(|| format!("loading snapshot {}", dir.display()))?,
        None => Pipeline::new(config)?,
    })
}

fn replay(args: ReplayArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config, args.refine, args.no_refine, args.tau)?;
    let mut pipeline = build_pipeline(config, args.snapshot_in.as_deref())?;
    let config = pipeline.config().clone();
    let file = File::open(&args.trace)
        .with_context(|| format!("opening trace {}", args.trace.display()))?;
    let reader = TraceReader::new(BufReader::new(file), &config);
    let mut out = open_sink(args.out.as_deref())?;
    drive(&mut pipeline, reader, &mut out, false)?;
    drop(out);
    finish(
        pipeline,
        args.snapshot_out.as_deref(),
        args.policy_graph.as_deref(),
        args.mi_report.as_deref(),
    )
}

fn stream(args: StreamArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config, args.refine, args.no_refine, args.tau)?;
    let mut pipeline = build_pipeline(config, args.snapshot_in.as_deref())?;
    let config = pipeline.config().clone();
    let stdin = io::stdin();
    let reader = TraceReader::new(stdin.lock(), &config);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    drive(&mut pipeline, reader, &mut out, true)?;
    finish(
        pipeline,
        args.snapshot_out.as_deref(),
        args.policy_graph.as_deref(),
        args.mi_report.as_deref(),
    )
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    if args.agent != "reactive" {
        return Err(kpilens::Error::Config(format!(
            "unknown agent {:?}; available: reactive",
            args.agent
        ))
        .into());
    }
    let env = match &args.env_config {
        Some(p) => SyntheticEnvConfig::from_path(p)
            .with_context(|| format!("loading environment configuration {}", p.display()))?,
        None => SyntheticEnvConfig::default(),
    };
    let forecaster: ForecastKind = args.forecaster.parse()?;
    let harness = HarnessConfig {
        env,
        forecaster,
        episodes: args.episodes,
        warmup_episodes: args.warmup_episodes,
        forecast_horizon: args.horizon,
        exploration_epsilon: args.epsilon,
        ..HarnessConfig::default()
    };
    let session = run_session(&harness, args.seed, args.refine, args.tau)?;

    if let Some(p) = &args.config_out {
        fs::write(p, serde_json::to_string_pretty(&session.config)? + "\n")
            .with_context(|| format!("writing configuration {}", p.display()))?;
    }
    if let Some(p) = &args.trace_out {
        let mut w =
            BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
        for record in &session.records {
            writeln!(w, "{}", record.to_json_line()?)?;
        }
        w.flush()?;
    }
    if !args.quiet {
        let mut out = open_sink(args.out.as_deref())?;
        for explanation in &session.explanations {
            writeln!(out, "{}", explanation.to_json_line()?)?;
        }
        out.flush()?;
    }
    write_reports(
        &session.report,
        args.policy_graph.as_deref(),
        args.mi_report.as_deref(),
    )?;
    eprintln!(
        "kpilens: {} episodes, eval mean reward {:.4}, tau {:.6}, overrides applied {}",
        session.episode_rewards.len(),
        session.eval_mean_reward,
        session.tau,
        session.overrides_applied
    );
    eprintln!("kpilens: {}", summary(&session.report));
    Ok(())
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let report = run_bench(&BenchConfig {
        kpi_count: args.kpis,
        action_count: args.actions,
        steps: args.steps,
        seed: args.seed,
    })?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        write!(out, "{}", report.to_text())?;
    }
    out.flush()?;
    Ok(())
}
