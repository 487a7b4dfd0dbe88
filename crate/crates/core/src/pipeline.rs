//! End-to-end orchestration shared by the command-line front end: loading
//! inputs, filling the store, evaluating, aggregating and run directories.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate_all, Aggregate, AggregateError, VerdictsByTemplate};
use crate::battery::{evaluate_all, BatteryError, Evaluation, ReliabilityVerdict};
use crate::config::{ClientMode, ConfigError, RunConfig};
use crate::corpus::{load_corpus, Corpus, CorpusError};
use crate::modelio::{
    run_jobs, ChatClient, Client, ClientError, JobError, ProfileError, ResponseKey, ResponseStore,
    RunOptions, RunStats, StoreError, SyntheticProfile, SyntheticRespondent,
};
use crate::promptkit::{default_templates, enumerate_jobs, load_templates, JobSet, PromptTemplate, TemplateError};
use crate::report::ReportError;
use crate::seed::{derive_seed, sha256_hex};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("unknown template id {0}")]
    UnknownTemplate(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Job(#[from] JobError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("store incomplete for template {template}: {} responses missing\n{}", missing.len(), preview(missing))]
    Incomplete {
        template: String,
        missing: Vec<ResponseKey>,
    },
    #[error(transparent)]
    Battery(BatteryError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {path}: {message}")]
    Malformed { path: String, message: String },
}

fn preview(missing: &[ResponseKey]) -> String {
    const SHOWN: usize = 20;
    let mut lines: Vec<String> = missing.iter().take(SHOWN).map(|k| format!("  {k}")).collect();
    if missing.len() > SHOWN {
        lines.push(format!("  ... and {} more", missing.len() - SHOWN));
    }
    lines.join("\n")
}

impl From<BatteryError> for PipelineError {
    fn from(e: BatteryError) -> Self {
        match e {
            BatteryError::Incomplete { template, missing } => PipelineError::Incomplete { template, missing },
            other => PipelineError::Battery(other),
        }
    }
}

impl PipelineError {
    /// 1 for invalid inputs, 2 for runtime failures, 3 for incomplete data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_)
            | PipelineError::Corpus(_)
            | PipelineError::Template(_)
            | PipelineError::Profile(_)
            | PipelineError::UnknownTemplate(_) => 1,
            PipelineError::Incomplete { .. } => 3,
            _ => 2,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Validated inputs of a run.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: RunConfig,
    pub corpus: Corpus,
    pub templates: Vec<PromptTemplate>,
}

impl Pipeline {
    /// Validate the config and load corpus and templates.
    pub fn load(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let corpus = load_corpus(&config.corpus)?;
        let mut templates = match &config.templates {
            Some(path) => load_templates(path)?,
            None => default_templates(),
        };
        if let Some(ids) = &config.template_ids {
            for id in ids {
                if !templates.iter().any(|t| &t.id == id) {
                    return Err(PipelineError::UnknownTemplate(id.clone()));
                }
            }
            templates.retain(|t| ids.contains(&t.id));
        }
        if let ClientMode::Synthetic { profile } = &config.client {
            SyntheticProfile::load(profile)?.resolve(&corpus)?;
        }
        Ok(Pipeline {
            config,
            corpus,
            templates,
        })
    }

    pub fn jobs(&self) -> Result<JobSet, PipelineError> {
        Ok(enumerate_jobs(&self.corpus, &self.templates, self.config.samples)?)
    }

    /// The synthetic profile with party clones resolved and its stream seed
    /// keyed by the master seed.
    pub fn synthetic_profile(&self) -> Result<Option<SyntheticProfile>, PipelineError> {
        let ClientMode::Synthetic { profile } = &self.config.client else {
            return Ok(None);
        };
        let mut p = SyntheticProfile::load(profile)?.resolve(&self.corpus)?;
        p.seed = derive_seed(self.config.seed, &["respondent", &p.seed.to_string()]);
        Ok(Some(p))
    }

    pub fn client(&self) -> Result<Client, PipelineError> {
        Ok(match &self.config.client {
            ClientMode::Replay => Client::replay_only(),
            ClientMode::Live(c) => Client::new(Box::new(ChatClient::new(c.clone())?)),
            ClientMode::Synthetic { .. } => {
                let profile = self.synthetic_profile()?.expect("synthetic mode");
                Client::new(Box::new(SyntheticRespondent::new(profile)?))
            }
        })
    }

    pub fn open_store(&self) -> Result<ResponseStore, PipelineError> {
        if let Some(dir) = self.config.store.parent() {
            std::fs::create_dir_all(dir).map_err(io_error(dir))?;
        }
        Ok(ResponseStore::open(&self.config.store)?)
    }

    /// Fill the store for every job; `max_new` stops early after that many fetches.
    pub fn run(&self, store: &Mutex<ResponseStore>, max_new: Option<usize>) -> Result<RunStats, PipelineError> {
        let jobs = self.jobs()?;
        let client = self.client()?;
        let options = RunOptions {
            concurrency: self.config.concurrency,
            max_new,
        };
        Ok(run_jobs(&jobs, &self.config.decoding, &client, store, options)?)
    }

    pub fn evaluate(&self, store: &ResponseStore) -> Result<Evaluation, PipelineError> {
        Ok(evaluate_all(store, &self.corpus, &self.templates, &self.config.battery())?)
    }

    pub fn aggregate(&self, verdicts: &VerdictsByTemplate) -> Result<Aggregate, PipelineError> {
        Ok(aggregate_all(verdicts, &self.corpus, self.config.domain_threshold)?)
    }
}

/// One verdict per line, grouped by template in id order.
pub fn write_verdicts(path: &Path, verdicts: &VerdictsByTemplate) -> Result<(), PipelineError> {
    let mut out = Vec::new();
    for v in verdicts.values().flatten() {
        serde_json::to_writer(&mut out, v).expect("verdict serializes");
        out.push(b'\n');
    }
    std::fs::write(path, out).map_err(io_error(path))
}

pub fn read_verdicts(path: &Path) -> Result<VerdictsByTemplate, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    let mut by_template = VerdictsByTemplate::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: ReliabilityVerdict = serde_json::from_str(line).map_err(|e| PipelineError::Malformed {
            path: path.display().to_string(),
            message: format!("line {}: {e}", i + 1),
        })?;
        by_template.entry(v.template_id.clone()).or_default().push(v);
    }
    Ok(by_template)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes") + "\n";
    std::fs::write(path, text).map_err(io_error(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Malformed {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Create `<output_dir>/<command>-<UTC timestamp>`, adding a numeric suffix
/// when the name is taken. An explicit directory is used as given.
pub fn create_run_dir(output_dir: &Path, command: &str, explicit: Option<&Path>) -> Result<PathBuf, PipelineError> {
    if let Some(dir) = explicit {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
        return Ok(dir.to_path_buf());
    }
    std::fs::create_dir_all(output_dir).map_err(io_error(output_dir))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    for n in 1.. {
        let name = if n == 1 {
            format!("{command}-{stamp}")
        } else {
            format!("{command}-{stamp}-{n}")
        };
        let dir = output_dir.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io_error(&dir)(e)),
        }
    }
    unreachable!()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

fn digest(path: &Path) -> Result<InputDigest, PipelineError> {
    let bytes = std::fs::read(path).map_err(io_error(path))?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub created: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<(String, InputDigest)>,
}

/// Write `manifest.json` into the run directory with digests of every input file.
pub fn write_manifest(dir: &Path, command: &str, config: &RunConfig, extra: &[(&str, &Path)]) -> Result<Manifest, PipelineError> {
    let mut inputs = vec![("corpus".to_string(), digest(&config.corpus)?)];
    if let Some(t) = &config.templates {
        inputs.push(("templates".into(), digest(t)?));
    }
    if let ClientMode::Synthetic { profile } = &config.client {
        inputs.push(("profile".into(), digest(profile)?));
    }
    for (name, path) in extra {
        if path.exists() {
            inputs.push((name.to_string(), digest(path)?));
        }
    }
    let manifest = Manifest {
        command: command.to_string(),
        created: crate::modelio::now_rfc3339(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config: config.clone(),
        inputs,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Print a line to stderr; progress output never goes to stdout.
pub fn note(msg: impl AsRef<str>) {
    let _ = writeln!(std::io::stderr(), "{}", msg.as_ref());
}
