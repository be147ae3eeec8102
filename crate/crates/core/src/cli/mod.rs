//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration or usage error,
//! 3 validation failure, 4 backend failure. Errors are printed to stderr
//! as `{"error": {"kind": ..., "message": ...}}`.

mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::backend::{BackendError, HttpClient, GEN_KEY_ENV};
use crate::bench::{
    ground_truth_kdr, load_dataset, reconstruct, run_task1, run_task2, synth_corpus, BenchError, Task2Prefix,
};
use crate::generation::{reference_descriptor, GenerationError, RunOptions, VideoRun};
use crate::metrics::{
    emit_report, kdr, ratio_to_f64, summarize, MetricMode, MetricsError, ResultsFile, RunRecord,
};
use crate::planner::{llm_plan, template_plan, validate_plan, LessonSpec, PlanError, PlannerError, ShotPlan};
use crate::verifier::{ConstraintVerifier, JudgeError, JudgeVerifier, ShotVerifier, VerifyError};

pub use config::{BackendConfig, Condition, JudgeConfig, ModeConfig, PathsConfig, PlannerConfig, RunConfig, Task2Config};

#[derive(Debug, Parser)]
#[command(name = "edustory", version, about = "State-grounded instructional video pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or check shot plans.
    Plan {
        #[command(subcommand)]
        command: PlanCommand,
    },
    /// Print the state trajectory of a plan.
    Simulate {
        plan: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate videos and score them.
    Run {
        #[command(subcommand)]
        task: RunTask,
    },
    /// Write a synthetic annotated corpus.
    Synth {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recompute metrics for a run file.
    Eval {
        run: PathBuf,
        plan: PathBuf,
        #[arg(long)]
        exclude_flagged: bool,
    },
    /// Per-condition table over one or more results files.
    Report {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Validate an annotated dataset and print per-clip drift rates.
    Dataset { manifest: PathBuf },
}

#[derive(Debug, Subcommand)]
enum PlanCommand {
    /// Check a plan's structure and replay its actions.
    Validate { plan: PathBuf },
    /// Deterministic plan from a structured lesson spec.
    Template {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Ask the configured planner backend for a plan.
    Llm {
        /// Text file with the lesson description.
        lesson: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum RunTask {
    /// Generate full videos from plans.
    Task1(RunArgs),
    /// Continue videos from a prefix of k shots.
    Task2(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for independent videos.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn new(code: i32, kind: &'static str, message: impl ToString) -> Self {
        Self {
            code,
            kind,
            message: message.to_string(),
        }
    }

    fn config(message: impl ToString) -> Self {
        Self::new(2, "config", message)
    }

    fn validation(message: impl ToString) -> Self {
        Self::new(3, "validation", message)
    }

    fn backend(message: impl ToString) -> Self {
        Self::new(4, "backend", message)
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::new(1, "io", format!("{}: {err}", path.display()))
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        CliError::validation(e)
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        CliError::backend(e)
    }
}

impl From<JudgeError> for CliError {
    fn from(e: JudgeError) -> Self {
        CliError::backend(e)
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Judge(j) => j.into(),
            other => CliError::config(other),
        }
    }
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::PlanInvalid(p) => p.into(),
            GenerationError::Backend(b) => b.into(),
            GenerationError::Verify(v) => v.into(),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Judge(j) => j.into(),
            other => CliError::validation(other),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Generation(g) => g.into(),
            BenchError::Metrics(m) => m.into(),
            BenchError::InvalidConfig(m) => CliError::config(m),
            BenchError::Io { path, message } => CliError::io(&path, message),
            BenchError::ManifestNotFound(p) => CliError::io(&p, "manifest not found"),
            other => CliError::validation(other),
        }
    }
}

impl From<PlannerError> for CliError {
    fn from(e: PlannerError) -> Self {
        match e {
            PlannerError::Backend(b) => b.into(),
            other => CliError::validation(other),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let body = serde_json::json!({"error": {"kind": e.kind, "message": e.message}});
            eprintln!("{body}");
            e.code
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Plan { command } => match command {
            PlanCommand::Validate { plan } => plan_validate(&plan),
            PlanCommand::Template { spec, output } => {
                let spec: LessonSpec = read_json(&spec, CliError::validation)?;
                emit(output.as_deref(), &pretty(&template_plan(&spec)?))
            }
            PlanCommand::Llm { lesson, config, output } => {
                let config = RunConfig::load(&config).map_err(CliError::config)?;
                let planner = config
                    .planner
                    .as_ref()
                    .ok_or_else(|| CliError::config("`planner` section is required for `plan llm`"))?;
                let text = fs::read_to_string(&lesson).map_err(|e| CliError::io(&lesson, e))?;
                let client = HttpClient::from_env(
                    planner.endpoint.clone(),
                    GEN_KEY_ENV,
                    std::time::Duration::from_secs(planner.timeout_s),
                );
                let plan = llm_plan(&text, &client)?;
                emit(output.as_deref(), &pretty(&plan.plan))
            }
        },
        Command::Simulate { plan, output } => {
            let plan = load_plan(&plan)?;
            emit(output.as_deref(), &pretty(&validate_plan(&plan)?))
        }
        Command::Run { task } => match task {
            RunTask::Task1(args) => run_task(&args, Task::One),
            RunTask::Task2(args) => run_task(&args, Task::Two),
        },
        Command::Synth { config } => {
            let config = RunConfig::load(&config).map_err(CliError::config)?;
            let synth = config
                .synth
                .as_ref()
                .ok_or_else(|| CliError::config("`synth` section is required for `synth`"))?;
            let manifest = synth_corpus(synth, &config.paths.output)?;
            emit(None, &pretty(&serde_json::json!({"manifest": manifest})))
        }
        Command::Eval { run, plan, exclude_flagged } => {
            let video: VideoRun = read_json(&run, CliError::validation)?;
            let plan = load_plan(&plan)?;
            let summary = summarize(&video, &plan, MetricMode::Deterministic, exclude_flagged)?;
            emit(None, &pretty(&summary))
        }
        Command::Report { results, format, output } => {
            let mut runs = Vec::new();
            for path in &results {
                let file: ResultsFile = read_json(path, CliError::validation)?;
                runs.extend(file.runs);
            }
            let report = emit_report(&ResultsFile::new(runs).by_condition())?;
            let text = match format {
                ReportFormat::Text => report.to_text(),
                ReportFormat::Json => report.to_json(),
            };
            emit(output.as_deref(), &text)
        }
        Command::Dataset { manifest } => {
            let data = load_dataset(&manifest)?;
            let mut clips = Vec::with_capacity(data.clips.len());
            for clip in &data.clips {
                let (shots, states) = reconstruct(clip)?;
                clips.push(serde_json::json!({
                    "clip_id": clip.clip_id,
                    "shots": clip.shot_count(),
                    "ground_truth_kdr": ratio_to_f64(ground_truth_kdr(clip)?),
                    "reconstructed_kdr": ratio_to_f64(kdr(&shots, &states, MetricMode::Deterministic)?),
                }));
            }
            emit(None, &pretty(&serde_json::json!({"clips": clips, "warnings": data.warnings})))
        }
    }
}

fn plan_validate(path: &Path) -> CliResult<()> {
    let plan = load_plan(path)?;
    let states = validate_plan(&plan)?;
    emit(
        None,
        &pretty(&serde_json::json!({
            "valid": true,
            "shot_counts": plan.shot_counts(),
            "final_entities": states.last().map(|s| s.entity_count()),
        })),
    )
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, on_parse: fn(String) -> CliError) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| on_parse(format!("{}: {e}", path.display())))
}

fn load_plan(path: &Path) -> CliResult<ShotPlan> {
    read_json(path, CliError::validation)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn emit(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(path) => write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::new(1, "io", format!("stdout: {e}")))
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Task {
    One,
    Two,
}

struct Job<'a> {
    condition: Condition,
    plan_index: usize,
    replicate: usize,
    options: RunOptions,
    name: &'a str,
}

fn run_task(args: &RunArgs, task: Task) -> CliResult<()> {
    let config = RunConfig::load(&args.config).map_err(CliError::config)?;
    if args.jobs == 0 {
        return Err(CliError::config("--jobs must be at least 1"));
    }
    if config.paths.plans.is_empty() {
        return Err(CliError::config("paths.plans must list at least one plan"));
    }
    let task2 = match task {
        Task::Two => Some(
            config
                .task2
                .as_ref()
                .ok_or_else(|| CliError::config("`task2` section is required for `run task2`"))?,
        ),
        Task::One => None,
    };

    let mut plans = Vec::with_capacity(config.paths.plans.len());
    let mut names = Vec::with_capacity(config.paths.plans.len());
    for path in &config.paths.plans {
        let plan = load_plan(path)?;
        validate_plan(&plan)?;
        plans.push(plan);
        names.push(
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "plan".to_string()),
        );
    }
    let prefix_run: Option<VideoRun> = match task2.and_then(|t| t.prefix_run.as_ref()) {
        Some(path) => Some(read_json(path, CliError::validation)?),
        None => None,
    };

    let generator = config.generator();
    let judge = config.judge();
    let verifier: Arc<dyn ShotVerifier> = match &judge {
        Some(client) => Arc::new(JudgeVerifier::new(ConstraintVerifier::new(), Arc::clone(client))),
        None => Arc::new(ConstraintVerifier::new()),
    };

    let mut jobs = Vec::new();
    for &condition in &config.conditions {
        for (plan_index, name) in names.iter().enumerate() {
            for replicate in 0..config.replicates {
                jobs.push(Job {
                    condition,
                    plan_index,
                    replicate,
                    name,
                    options: RunOptions {
                        k_max: condition.k_max(config.k_max),
                        base_seed: config.base_seed.wrapping_add(replicate as u64 * 1_000_000),
                        conditioning: condition.conditioning(),
                    },
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::new(1, "internal", e))?;
    let outcomes: Vec<CliResult<(String, serde_json::Value, RunRecord)>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let plan = &plans[job.plan_index];
                let mode = match (&judge, config.mode) {
                    (Some(client), ModeConfig::Judge) => MetricMode::Judge(client.as_ref()),
                    _ => MetricMode::Deterministic,
                };
                let video = format!("{}/{}", job.name, job.replicate);
                let file = format!("{}_{}_{}.json", job.condition.name(), job.name, job.replicate);
                let (body, summary) = match task {
                    Task::One => {
                        let out = run_task1(plan, generator.as_ref(), verifier.as_ref(), &job.options, mode, config.exclude_flagged)?;
                        (serde_json::to_value(&out.run).expect("serializes"), out.summary)
                    }
                    Task::Two => {
                        let k = task2.expect("task2 config").k;
                        let prefix = build_prefix(plan, prefix_run.as_ref(), k)?;
                        let out = run_task2(&prefix, plan, generator.as_ref(), verifier.as_ref(), &job.options, mode, config.exclude_flagged)?;
                        let summary = out.summary.clone();
                        (serde_json::to_value(&out).expect("serializes"), summary)
                    }
                };
                Ok((
                    file,
                    body,
                    RunRecord {
                        condition: job.condition.label().to_string(),
                        video,
                        summary,
                    },
                ))
            })
            .collect()
    });

    let (subdir, results_name) = match task {
        Task::One => ("runs", "results.json"),
        Task::Two => ("task2", "task2_results.json"),
    };
    let out_dir = &config.paths.output;
    let mut records = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let (file, body, record) = outcome?;
        write_file(&out_dir.join(subdir).join(file), &pretty(&body))?;
        records.push(record);
    }
    let results_path = out_dir.join(results_name);
    let results = ResultsFile::new(records);
    write_file(&results_path, &pretty(&results))?;
    emit(
        None,
        &pretty(&serde_json::json!({"results": results_path, "videos": results.runs.len()})),
    )
}

fn build_prefix(plan: &ShotPlan, run: Option<&VideoRun>, k: usize) -> CliResult<Task2Prefix> {
    let total = plan.total_shots();
    if k == 0 || k >= total {
        return Err(CliError::config(format!("task2.k = {k} must satisfy 1 <= k < {total}")));
    }
    match run {
        Some(run) => {
            if run.shots.len() < k || run.states.len() <= k {
                return Err(CliError::validation(format!("prefix run has fewer than {k} shots")));
            }
            Ok(Task2Prefix {
                shots: run.shots[..k].to_vec(),
                state: run.states[k].clone(),
            })
        }
        None => {
            let states = validate_plan(plan)?;
            Ok(Task2Prefix {
                shots: plan
                    .shots()
                    .take(k)
                    .enumerate()
                    .map(|(i, s)| reference_descriptor(s, &states[i]))
                    .collect(),
                state: states[k].clone(),
            })
        }
    }
}
