//! Run configuration: a TOML file with `[endpoint]`, `[template]`,
//! `[params]`, and repeated `[[benchmark]]` sections, merged with CLI flag
//! overrides. Flags win over file values, which win over defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::ingest::{BenchmarkManifest, Language, SubjectExpectation};
use crate::inference::{ApiFlavor, EndpointConfig, GenerationParams};
use crate::metrics::ExtractionPolicy;
use crate::prompt::TemplateKind;
use crate::report::Metric;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model_label: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub extraction: Option<String>,
    pub metric: Option<String>,
    #[serde(default)]
    pub endpoint: EndpointSection,
    #[serde(default)]
    pub template: TemplateSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default, rename = "benchmark")]
    pub benchmarks: Vec<BenchmarkSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSection {
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub max_in_flight: Option<usize>,
    pub api_flavor: Option<String>,
    pub notes: Option<String>,
    pub failure_threshold: Option<u32>,
    pub backoff_base_ms: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSection {
    pub kind: Option<String>,
    pub shots: Option<usize>,
    pub dir: Option<PathBuf>,
    pub verbatim_instruction: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub max_new_tokens: Option<u32>,
    pub stop: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub repetition_penalty: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    pub id: String,
    pub language: String,
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub paths: Vec<PathBuf>,
    pub expected_count: Option<usize>,
    pub subjects: Option<Vec<SubjectCount>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectCount {
    pub subject: String,
    pub expected_count: usize,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// CLI flag overrides; every config key has a mirroring flag.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub benchmarks: Vec<String>,
    pub language: Option<Language>,
    pub endpoint_url: Option<String>,
    pub model: Option<String>,
    pub model_label: Option<String>,
    pub template: Option<TemplateKind>,
    pub shots: Option<usize>,
    pub extraction: Option<ExtractionPolicy>,
    pub max_new_tokens: Option<u32>,
    pub max_in_flight: Option<usize>,
    pub metric: Option<Metric>,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub verbatim_instruction: bool,
}

/// A fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model_label: String,
    pub benchmarks: Vec<BenchmarkManifest>,
    pub endpoint: EndpointConfig,
    pub template: TemplateKind,
    pub shots: usize,
    pub template_dir: Option<PathBuf>,
    pub verbatim_instruction: bool,
    pub extraction: ExtractionPolicy,
    pub metric: Metric,
    pub params: GenerationParams,
    pub output_dir: PathBuf,
    pub cache_dir: PathBuf,
}

fn resolve_path(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn parse_key<T: std::str::FromStr<Err = String>>(
    value: Option<String>,
    key: &str,
) -> Result<Option<T>, ConfigError> {
    value
        .map(|s| s.parse().map_err(|e| ConfigError::Invalid(format!("{key}: {e}"))))
        .transpose()
}

/// Builds dataset manifests from `[[benchmark]]` sections, applying id and
/// language filters. Relative paths resolve against the config directory.
pub fn benchmark_manifests(
    sections: &[BenchmarkSection],
    config_dir: &Path,
    filter_ids: &[String],
    filter_language: Option<Language>,
) -> Result<Vec<BenchmarkManifest>, ConfigError> {
    let mut benchmarks = Vec::new();
    for section in sections {
        let language: Language = section
            .language
            .parse()
            .map_err(|e| ConfigError::Invalid(format!("benchmark {}: {e}", section.id)))?;
        if !filter_ids.is_empty() && !filter_ids.contains(&section.id) {
            continue;
        }
        if let Some(filter) = filter_language {
            if filter != language {
                continue;
            }
        }
        let mut paths: Vec<PathBuf> = Vec::new();
        if let Some(path) = &section.path {
            paths.push(resolve_path(config_dir, path));
        }
        paths.extend(section.paths.iter().map(|p| resolve_path(config_dir, p)));
        if paths.is_empty() {
            return Err(ConfigError::Invalid(format!(
                "benchmark {} has no path",
                section.id
            )));
        }
        benchmarks.push(BenchmarkManifest {
            benchmark: section.id.clone(),
            language,
            paths,
            expected_count: section.expected_count,
            subjects: section.subjects.as_ref().map(|subjects| {
                subjects
                    .iter()
                    .map(|s| SubjectExpectation {
                        subject: s.subject.clone(),
                        expected_count: s.expected_count,
                    })
                    .collect()
            }),
        });
    }
    Ok(benchmarks)
}

/// Merges a config file with flag overrides into a [`RunConfig`].
/// Relative dataset paths are resolved against the config file's
/// directory; relative output/cache paths against the working directory.
pub fn resolve(
    file: FileConfig,
    config_dir: &Path,
    overrides: &Overrides,
) -> Result<RunConfig, ConfigError> {
    let defaults = EndpointConfig::default();
    let endpoint = EndpointConfig {
        base_url: overrides
            .endpoint_url
            .clone()
            .or(file.endpoint.base_url)
            .ok_or_else(|| ConfigError::Invalid("endpoint.base_url is required".to_string()))?,
        model: overrides
            .model
            .clone()
            .or(file.endpoint.model)
            .ok_or_else(|| ConfigError::Invalid("endpoint.model is required".to_string()))?,
        api_key_env: file.endpoint.api_key_env,
        timeout_secs: file.endpoint.timeout_secs.unwrap_or(defaults.timeout_secs),
        max_retries: file.endpoint.max_retries.unwrap_or(defaults.max_retries),
        max_in_flight: overrides
            .max_in_flight
            .or(file.endpoint.max_in_flight)
            .unwrap_or(defaults.max_in_flight)
            .max(1),
        api_flavor: parse_key::<ApiFlavor>(file.endpoint.api_flavor, "endpoint.api_flavor")?
            .unwrap_or_default(),
        endpoint_notes: file.endpoint.notes,
        failure_threshold: file
            .endpoint
            .failure_threshold
            .unwrap_or(defaults.failure_threshold),
        backoff_base_ms: file
            .endpoint
            .backoff_base_ms
            .unwrap_or(defaults.backoff_base_ms),
    };

    if endpoint.timeout_secs == 0 {
        return Err(ConfigError::Invalid(
            "endpoint.timeout_secs must be positive".to_string(),
        ));
    }

    let param_defaults = GenerationParams::default();
    let params = GenerationParams {
        max_new_tokens: overrides
            .max_new_tokens
            .or(file.params.max_new_tokens)
            .unwrap_or(param_defaults.max_new_tokens)
            .max(1),
        temperature: 0.0,
        beams: 1,
        stop_sequences: file.params.stop.unwrap_or_default(),
        seed: file.params.seed,
        repetition_penalty: file.params.repetition_penalty,
    };

    let benchmarks = benchmark_manifests(
        &file.benchmarks,
        config_dir,
        &overrides.benchmarks,
        overrides.language,
    )?;

    let template = overrides
        .template
        .or(parse_key::<TemplateKind>(file.template.kind, "template.kind")?)
        .unwrap_or_default();
    let extraction = overrides
        .extraction
        .or(parse_key::<ExtractionPolicy>(file.extraction, "extraction")?)
        .unwrap_or_default();
    let metric = overrides
        .metric
        .or(parse_key::<Metric>(file.metric, "metric")?)
        .unwrap_or_default();

    Ok(RunConfig {
        model_label: overrides
            .model_label
            .clone()
            .or(file.model_label)
            .unwrap_or_else(|| endpoint.model.clone()),
        benchmarks,
        endpoint,
        template,
        shots: overrides.shots.or(file.template.shots).unwrap_or(0),
        template_dir: file.template.dir.map(|d| resolve_path(config_dir, &d)),
        verbatim_instruction: overrides.verbatim_instruction
            || file.template.verbatim_instruction.unwrap_or(false),
        extraction,
        metric,
        params,
        output_dir: overrides
            .output_dir
            .clone()
            .or(file.output_dir)
            .unwrap_or_else(|| PathBuf::from("out")),
        cache_dir: overrides
            .cache_dir
            .clone()
            .or(file.cache_dir)
            .unwrap_or_else(|| PathBuf::from("cache")),
    })
}
