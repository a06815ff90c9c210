//! Command-line interface: `validate`, `run`, `score`, `report`, and
//! `convert`, all driven by a TOML config plus mirroring flags.
//!
//! Exit codes: 0 success, 1 validation or scoring findings, 2 usage or IO
//! errors, 3 endpoint failure.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{self, FileConfig, Overrides, RunConfig};
use crate::ingest::{
    audit_benchmark, dataset_digest, load_benchmark, to_canonical_jsonl, validate_dataset,
    BenchmarkManifest, Language, QaRecord, UnknownFields,
};
use crate::inference::{
    run_eval, write_responses, Client, ResponseCache, RunError, RunManifest,
};
use crate::metrics::{judge, ExtractionPolicy, ItemJudgment};
use crate::prompt::{render, RenderedPrompt, TemplateKind, TemplateSet};
use crate::report::{
    aggregate, diff, present_benchmark_order, render_delta_table, render_score_table,
    subject_table, write_judgments, DeltaTable, Format, Metric, RunResult, ScoreSummary,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ENDPOINT: i32 = 3;

#[derive(Parser)]
#[command(
    name = "medeval",
    version,
    about = "Deterministic evaluation harness for bilingual multiple-choice medical QA benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Check datasets against the canonical schema and declared counts.
    Validate(ValidateArgs),
    /// Evaluate benchmarks against an endpoint: load, render, generate, judge.
    Run(RunArgs),
    /// Rescore existing run directories from cached responses, no network.
    Score(ScoreArgs),
    /// Render score or delta tables from run directories.
    Report(ReportArgs),
    /// Convert upstream benchmark distributions to the canonical format.
    Convert(ConvertArgs),
}

#[derive(Args)]
pub struct ValidateArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Only check these benchmark ids.
    #[arg(long = "benchmark")]
    pub benchmarks: Vec<String>,
    /// Only check benchmarks in this language.
    #[arg(long)]
    pub language: Option<Language>,
}

#[derive(Args)]
pub struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Only run these benchmark ids.
    #[arg(long = "benchmark")]
    pub benchmarks: Vec<String>,
    /// Only run benchmarks in this language.
    #[arg(long)]
    pub language: Option<Language>,
    /// Endpoint base URL (overrides the config).
    #[arg(long)]
    pub endpoint_url: Option<String>,
    /// Model identifier sent to the endpoint.
    #[arg(long)]
    pub model: Option<String>,
    /// Label used in reports and run ids.
    #[arg(long)]
    pub model_label: Option<String>,
    /// Prompt template: cot or alpaca.
    #[arg(long)]
    pub template: Option<TemplateKind>,
    /// Number of in-context exemplars.
    #[arg(long)]
    pub shots: Option<usize>,
    /// Answer extraction policy: last-line or full.
    #[arg(long)]
    pub extraction: Option<ExtractionPolicy>,
    /// Generation cap forwarded to the endpoint.
    #[arg(long)]
    pub max_new_tokens: Option<u32>,
    /// Maximum concurrent requests.
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Response cache directory.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Output directory for run results.
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    /// Keep the instruction wording exactly as written in the template.
    #[arg(long)]
    pub verbatim_instruction: bool,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Run directories to rescore.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Answer extraction policy override.
    #[arg(long)]
    pub extraction: Option<ExtractionPolicy>,
    /// Write judgments to this directory instead of in place.
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Run directories to aggregate.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// scores (one row per model) or delta (tuned minus base).
    #[arg(long, default_value = "scores")]
    pub mode: String,
    /// Output format: markdown, csv, or json.
    #[arg(long, default_value = "markdown")]
    pub format: Format,
    /// Accuracy metric: gestalt or exact.
    #[arg(long, default_value = "gestalt")]
    pub metric: Metric,
    /// Bold the top-K cells per column (Markdown only).
    #[arg(long)]
    pub bold_top: Option<usize>,
    /// Write the table here instead of stdout.
    #[arg(long = "out")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ConvertArgs {
    /// Upstream format: igakuqa, medqa, medmcqa, mmlu, or jmmlu.
    pub format: String,
    /// Upstream file or directory.
    #[arg(long)]
    pub input: PathBuf,
    /// Canonical JSONL output path.
    #[arg(long)]
    pub output: PathBuf,
    /// Language of the upstream text.
    #[arg(long, default_value = "en")]
    pub language: Language,
    /// Subject tag override (mmlu/jmmlu single-file input).
    #[arg(long)]
    pub subject: Option<String>,
    /// Base of the medmcqa `cop` field: 1 for the original release, 0 for
    /// zero-based re-exports.
    #[arg(long, default_value_t = 1)]
    pub cop_base: usize,
}

pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Score(args) => cmd_score(&args),
        Command::Report(args) => cmd_report(&args),
        Command::Convert(args) => cmd_convert(&args),
    }
}

fn load_config(path: &Path) -> Result<(FileConfig, PathBuf), i32> {
    let file = FileConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_USAGE
    })?;
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((file, dir))
}

pub fn cmd_validate(args: &ValidateArgs) -> i32 {
    let (file, config_dir) = match load_config(&args.config) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let manifests = match config::benchmark_manifests(
        &file.benchmarks,
        &config_dir,
        &args.benchmarks,
        args.language,
    ) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if manifests.is_empty() {
        eprintln!("error: no benchmarks selected");
        return EXIT_USAGE;
    }
    let mut code = EXIT_OK;
    for manifest in &manifests {
        match audit_benchmark(manifest) {
            Ok((records, violations)) => {
                if violations.is_empty() {
                    println!(
                        "{} ({}): {} records OK",
                        manifest.benchmark,
                        manifest.language,
                        records.len()
                    );
                } else {
                    for violation in &violations {
                        println!("{} ({}): {}", manifest.benchmark, manifest.language, violation);
                    }
                    code = code.max(EXIT_FINDINGS);
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                code = EXIT_USAGE;
            }
        }
    }
    code
}

fn run_id(config: &RunConfig, manifest: &BenchmarkManifest) -> String {
    let sanitize = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' { c } else { '-' })
            .collect()
    };
    let mut id = format!(
        "{}-{}-{}",
        sanitize(&config.model_label),
        manifest.benchmark,
        manifest.language
    );
    if config.template != TemplateKind::Cot || config.shots != 0 {
        id.push_str(&format!("-{}{}", config.template, config.shots));
    }
    id
}

fn judge_all(
    records: &[QaRecord],
    texts: &HashMap<String, String>,
    policy: ExtractionPolicy,
) -> Result<(Vec<ItemJudgment>, Vec<String>), String> {
    let mut judgments = Vec::with_capacity(records.len());
    let mut missing = Vec::new();
    for record in records {
        match texts.get(&record.id) {
            Some(text) => {
                judgments.push(judge(record, &record.id, text, policy).map_err(|e| e.to_string())?)
            }
            None => missing.push(record.id.clone()),
        }
    }
    Ok((judgments, missing))
}

fn subject_map(records: &[QaRecord]) -> BTreeMap<String, Option<String>> {
    records
        .iter()
        .map(|r| (r.id.clone(), r.subject.clone()))
        .collect()
}

pub fn cmd_run(args: &RunArgs) -> i32 {
    let (file, config_dir) = match load_config(&args.config) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let overrides = Overrides {
        benchmarks: args.benchmarks.clone(),
        language: args.language,
        endpoint_url: args.endpoint_url.clone(),
        model: args.model.clone(),
        model_label: args.model_label.clone(),
        template: args.template,
        shots: args.shots,
        extraction: args.extraction,
        max_new_tokens: args.max_new_tokens,
        max_in_flight: args.max_in_flight,
        metric: None,
        cache_dir: args.cache_dir.clone(),
        output_dir: args.output_dir.clone(),
        verbatim_instruction: args.verbatim_instruction,
    };
    let config = match config::resolve(file, &config_dir, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if config.benchmarks.is_empty() {
        eprintln!("error: no benchmarks selected");
        return EXIT_USAGE;
    }

    let templates = match &config.template_dir {
        Some(dir) => match TemplateSet::from_dir(dir) {
            Ok(mut set) => {
                set.verbatim_instruction = config.verbatim_instruction;
                set
            }
            Err(e) => {
                eprintln!("error: reading templates from {}: {e}", dir.display());
                return EXIT_USAGE;
            }
        },
        None => {
            let mut set = TemplateSet::builtin();
            set.verbatim_instruction = config.verbatim_instruction;
            set
        }
    };

    let client = match Client::new(config.endpoint.clone()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cache = match ResponseCache::new(&config.cache_dir) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: cache dir {}: {e}", config.cache_dir.display());
            return EXIT_USAGE;
        }
    };

    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };

    for manifest in &config.benchmarks {
        let (records, warnings) = match load_benchmark(manifest, UnknownFields::Warn) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: {}: {e}", manifest.benchmark);
                return EXIT_USAGE;
            }
        };
        for warning in &warnings {
            eprintln!("warning: {warning}");
        }
        let violations = validate_dataset(&records);
        if !violations.is_empty() {
            for violation in &violations {
                println!("{} ({}): {}", manifest.benchmark, manifest.language, violation);
            }
            return EXIT_FINDINGS;
        }

        let shots = match templates.shots(manifest.language, config.shots) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        let mut prompts: Vec<RenderedPrompt> = Vec::with_capacity(records.len());
        for record in &records {
            match render(record, config.template, &shots, manifest.language, &templates) {
                Ok(p) => prompts.push(p),
                Err(e) => {
                    eprintln!("error: rendering {}: {e}", record.id);
                    return EXIT_USAGE;
                }
            }
        }

        let id = run_id(&config, manifest);
        let run_dir = config.output_dir.join(&id);
        let digest = match dataset_digest(&manifest.paths) {
            Ok(d) => d,
            Err(e) => {
                eprintln!("error: digesting dataset: {e}");
                return EXIT_USAGE;
            }
        };
        let mut run_manifest = RunManifest {
            run_id: id.clone(),
            model_label: config.model_label.clone(),
            benchmark: manifest.benchmark.clone(),
            language: manifest.language,
            dataset_paths: manifest.paths.iter().map(|p| p.display().to_string()).collect(),
            dataset_digest: digest,
            template: config.template,
            shots: config.shots,
            extraction: config.extraction,
            params: config.params.clone(),
            endpoint_base_url: config.endpoint.base_url.clone(),
            endpoint_model: config.endpoint.model.clone(),
            api_flavor: config.endpoint.api_flavor,
            api_key_env: config.endpoint.api_key_env.clone(),
            endpoint_notes: config.endpoint.endpoint_notes.clone(),
            record_count: records.len(),
            created_at: chrono::Utc::now().to_rfc3339(),
            harness_version: env!("CARGO_PKG_VERSION").to_string(),
            status: "complete".to_string(),
        };

        let outcome = runtime.block_on(run_eval(&prompts, &config.params, &client, &cache));
        let responses = match outcome {
            Ok(outcome) => {
                log::info!(
                    "{}: {} responses ({} from cache)",
                    id,
                    outcome.responses.len(),
                    outcome.cache_hits
                );
                outcome.responses
            }
            Err(RunError::Aborted {
                completed,
                failed,
                skipped,
                threshold,
                first_error,
                total,
            }) => {
                run_manifest.status = "aborted".to_string();
                if let Err(e) = write_responses(&run_dir, &completed) {
                    eprintln!("error: writing partial responses: {e}");
                }
                if let Err(e) = run_manifest.write(&run_dir) {
                    eprintln!("error: writing run manifest: {e}");
                }
                eprintln!(
                    "error: {}: aborted with {failed} failures and {skipped} skipped of {total} \
                     (threshold {threshold}); completed {} responses kept in {}; first error: {first_error}",
                    manifest.benchmark,
                    completed.len(),
                    run_dir.display()
                );
                return EXIT_ENDPOINT;
            }
            Err(RunError::Io(e)) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };

        if let Err(e) = write_responses(&run_dir, &responses) {
            eprintln!("error: writing responses: {e}");
            return EXIT_USAGE;
        }
        if let Err(e) = run_manifest.write(&run_dir) {
            eprintln!("error: writing run manifest: {e}");
            return EXIT_USAGE;
        }

        let texts: HashMap<String, String> = responses
            .iter()
            .map(|r| (r.item_id.clone(), r.text.clone()))
            .collect();
        let (judgments, missing) = match judge_all(&records, &texts, config.extraction) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        if !missing.is_empty() {
            eprintln!("error: missing responses for: {}", missing.join(", "));
            return EXIT_ENDPOINT;
        }
        if let Err(e) = write_judgments(&run_dir, &judgments) {
            eprintln!("error: writing judgments: {e}");
            return EXIT_USAGE;
        }
        let summary = ScoreSummary::compute(
            &id,
            &config.model_label,
            &manifest.benchmark,
            manifest.language,
            &judgments,
            &subject_map(&records),
        );
        if let Err(e) = summary.write(&run_dir) {
            eprintln!("error: writing scores: {e}");
            return EXIT_USAGE;
        }
        println!(
            "{} ({}): {} items, gestalt {:.1}, exact {:.1} -> {}",
            manifest.benchmark,
            manifest.language,
            summary.items,
            summary.gestalt_accuracy,
            summary.exact_accuracy,
            run_dir.display()
        );
    }
    EXIT_OK
}

pub fn cmd_score(args: &ScoreArgs) -> i32 {
    let mut code = EXIT_OK;
    for run_dir in &args.runs {
        let mut manifest = match RunManifest::load(run_dir) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("error: {}: {e}", run_dir.display());
                return EXIT_USAGE;
            }
        };
        let dataset = BenchmarkManifest {
            benchmark: manifest.benchmark.clone(),
            language: manifest.language,
            paths: manifest.dataset_paths.iter().map(PathBuf::from).collect(),
            expected_count: None,
            subjects: None,
        };
        let (records, _) = match load_benchmark(&dataset, UnknownFields::Warn) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: {}: {e}", run_dir.display());
                return EXIT_USAGE;
            }
        };
        match dataset_digest(&dataset.paths) {
            Ok(digest) if digest != manifest.dataset_digest => {
                eprintln!(
                    "warning: dataset digest changed since the run was recorded ({})",
                    run_dir.display()
                );
            }
            Err(e) => {
                eprintln!("error: digesting dataset: {e}");
                return EXIT_USAGE;
            }
            _ => {}
        }
        let responses = match crate::inference::read_responses(&run_dir.join("responses.jsonl")) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {}: {e}", run_dir.display());
                return EXIT_USAGE;
            }
        };
        let texts: HashMap<String, String> = responses
            .into_iter()
            .map(|r| (r.item_id, r.text))
            .collect();
        let policy = args.extraction.unwrap_or(manifest.extraction);
        let (judgments, missing) = match judge_all(&records, &texts, policy) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        if !missing.is_empty() {
            for id in &missing {
                println!("{}: missing response for {id}", manifest.benchmark);
            }
            code = code.max(EXIT_FINDINGS);
            continue;
        }
        let out_dir = match &args.output_dir {
            Some(dir) if args.runs.len() == 1 => dir.clone(),
            Some(dir) => dir.join(&manifest.run_id),
            None => run_dir.clone(),
        };
        manifest.extraction = policy;
        if let Err(e) = write_judgments(&out_dir, &judgments) {
            eprintln!("error: writing judgments: {e}");
            return EXIT_USAGE;
        }
        if let Err(e) = manifest.write(&out_dir) {
            eprintln!("error: writing run manifest: {e}");
            return EXIT_USAGE;
        }
        let summary = ScoreSummary::compute(
            &manifest.run_id,
            &manifest.model_label,
            &manifest.benchmark,
            manifest.language,
            &judgments,
            &subject_map(&records),
        );
        if let Err(e) = summary.write(&out_dir) {
            eprintln!("error: writing scores: {e}");
            return EXIT_USAGE;
        }
        println!(
            "{} ({}): {} items, gestalt {:.1}, exact {:.1} -> {}",
            manifest.benchmark,
            manifest.language,
            summary.items,
            summary.gestalt_accuracy,
            summary.exact_accuracy,
            out_dir.display()
        );
    }
    code
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> i32 {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                if let Err(e) = std::fs::create_dir_all(parent) {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            }
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: writing {}: {e}", path.display());
                return EXIT_USAGE;
            }
            EXIT_OK
        }
        None => {
            print!("{text}");
            EXIT_OK
        }
    }
}

pub fn cmd_report(args: &ReportArgs) -> i32 {
    let mut runs = Vec::new();
    for dir in &args.runs {
        match RunResult::load_dir(dir) {
            Ok(run) => runs.push(run),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    let order = present_benchmark_order(&runs);
    match args.mode.as_str() {
        "scores" => {
            let table = match aggregate(&runs, &order, args.metric) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            for warning in &table.warnings {
                eprintln!("warning: {warning}");
            }
            let mut text = render_score_table(&table, args.format, args.bold_top);
            // per-subject appendix for every benchmark that has subject tallies
            for benchmark in &order {
                if let Some(appendix) = subject_table(&runs, benchmark, args.metric) {
                    let rendered = render_score_table(&appendix, args.format, None);
                    match args.format {
                        Format::Markdown => {
                            text.push_str(&format!("\nPer-subject ({benchmark}):\n\n{rendered}"));
                        }
                        Format::Csv | Format::Json => {
                            if let Some(out) = &args.out {
                                let ext = out.extension().map(|e| e.to_string_lossy().to_string());
                                let mut side = out.clone();
                                side.set_file_name(format!(
                                    "{}.subjects-{benchmark}{}",
                                    out.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default(),
                                    ext.map(|e| format!(".{e}")).unwrap_or_default()
                                ));
                                let code = write_or_print(&Some(side), &rendered);
                                if code != EXIT_OK {
                                    return code;
                                }
                            } else {
                                text.push('\n');
                                text.push_str(&rendered);
                            }
                        }
                    }
                }
            }
            write_or_print(&args.out, &text)
        }
        "delta" => {
            // base group = runs with the first label seen, tuned group =
            // the second label; two dirs with one label diff against
            // themselves (all zeros)
            let mut labels: Vec<String> = Vec::new();
            for run in &runs {
                if !labels.contains(&run.model_label) {
                    labels.push(run.model_label.clone());
                }
            }
            let (base_runs, tuned_runs): (Vec<RunResult>, Vec<RunResult>) = match labels.len() {
                2 => runs
                    .into_iter()
                    .partition(|r| r.model_label == labels[0]),
                1 if runs.len() == 2 => {
                    let mut iter = runs.into_iter();
                    let first = iter.next().unwrap();
                    let second = iter.next().unwrap();
                    (vec![first], vec![second])
                }
                n => {
                    eprintln!(
                        "error: delta mode needs exactly 2 model labels (base, tuned), found {n}: {}",
                        labels.join(", ")
                    );
                    return EXIT_USAGE;
                }
            };
            let base_table = match aggregate(&base_runs, &order, args.metric) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            let tuned_table = match aggregate(&tuned_runs, &order, args.metric) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            let delta_row = match diff(&order, &base_table.rows[0], &tuned_table.rows[0]) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            let delta = DeltaTable {
                columns: order.clone(),
                rows: vec![delta_row],
            };
            write_or_print(&args.out, &render_delta_table(&delta, args.format))
        }
        other => {
            eprintln!("error: unknown mode {other:?}, expected \"scores\" or \"delta\"");
            EXIT_USAGE
        }
    }
}

pub fn cmd_convert(args: &ConvertArgs) -> i32 {
    let result = match args.format.as_str() {
        "igakuqa" => crate::convert::convert_igakuqa(&args.input, args.language),
        "medqa" => crate::convert::convert_medqa(&args.input, args.language),
        "medmcqa" => crate::convert::convert_medmcqa(&args.input, args.language, args.cop_base),
        "mmlu" | "jmmlu" => crate::convert::convert_mmlu_csv(
            &args.input,
            args.language,
            &args.format,
            args.subject.as_deref(),
        ),
        other => {
            eprintln!(
                "error: unknown upstream format {other:?}, expected igakuqa, medqa, medmcqa, mmlu, or jmmlu"
            );
            return EXIT_USAGE;
        }
    };
    let (records, report) = match result {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        if let Err(e) = std::fs::create_dir_all(parent) {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    }
    if let Err(e) = std::fs::write(&args.output, to_canonical_jsonl(&records)) {
        eprintln!("error: writing {}: {e}", args.output.display());
        return EXIT_USAGE;
    }
    println!("{}: {}", args.format, report.summary());
    for (id, reason) in &report.excluded {
        println!("excluded {id}: {reason}");
    }
    EXIT_OK
}
