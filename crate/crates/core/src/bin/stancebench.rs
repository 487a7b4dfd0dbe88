use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use stancebench::battery::Evaluation;
use stancebench::config::{ClientMode, RunConfig};
use stancebench::modelio::ChatClientConfig;
use stancebench::pipeline::{
    create_run_dir, note, read_json, read_verdicts, write_json, write_manifest, write_verdicts, Pipeline,
    PipelineError,
};
use stancebench::aggregate::Aggregate;
use stancebench::report::emit_reports;

/// Stance-consistency benchmark for chat models.
#[derive(Parser)]
#[command(name = "stancebench", version)]
struct Cli {
    #[command(flatten)]
    flags: ConfigFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigFlags {
    /// JSON run configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    templates: Option<PathBuf>,
    /// Comma-separated subset of template ids.
    #[arg(long, global = true, value_delimiter = ',')]
    template_ids: Option<Vec<String>>,
    /// Use the synthetic respondent described by this profile.
    #[arg(long, global = true, conflicts_with_all = ["replay", "endpoint"])]
    profile: Option<PathBuf>,
    /// Answer from the store only.
    #[arg(long, global = true)]
    replay: bool,
    /// Chat-completions URL for live runs.
    #[arg(long, global = true, requires = "model")]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, global = true)]
    api_key_env: Option<String>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long, global = true)]
    top_p: Option<f64>,
    #[arg(long, global = true)]
    max_tokens: Option<u32>,
    #[arg(long, global = true)]
    samples: Option<u32>,
    #[arg(long, global = true)]
    reps: Option<u32>,
    #[arg(long, global = true)]
    ci_level: Option<f64>,
    #[arg(long, global = true)]
    lower: Option<f64>,
    #[arg(long, global = true)]
    upper: Option<f64>,
    #[arg(long, global = true)]
    min_valid: Option<u32>,
    #[arg(long, global = true)]
    domain_threshold: Option<u32>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Write into this directory instead of a new timestamped one.
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check config, corpus and templates.
    Validate,
    /// Count prompt instances and show sample prompts.
    Plan {
        #[arg(long, default_value_t = 3)]
        show: usize,
    },
    /// Fill the response store.
    Run {
        /// Stop after this many new responses.
        #[arg(long)]
        max_new: Option<usize>,
    },
    /// Run the reliability battery over a complete store.
    Evaluate,
    /// Leaning matches, domain stances and agree share.
    Aggregate {
        /// Verdicts file from an earlier `evaluate`; evaluated from the store otherwise.
        #[arg(long)]
        verdicts: Option<PathBuf>,
    },
    /// Emit tables and charts.
    Report {
        /// `evaluation.json` from an earlier `evaluate`.
        #[arg(long, requires = "aggregate")]
        evaluation: Option<PathBuf>,
        /// `aggregate.json` from an earlier `aggregate`.
        #[arg(long, requires = "evaluation")]
        aggregate: Option<PathBuf>,
    },
    /// Run, evaluate, aggregate and report against a synthetic respondent with a fresh store.
    Simulate,
}

impl ConfigFlags {
    fn build(&self) -> Result<RunConfig, PipelineError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let cwd = Path::new(".");
        let set_path = |dst: &mut PathBuf, src: &Option<PathBuf>| {
            if let Some(p) = src {
                *dst = cwd.join(p);
            }
        };
        set_path(&mut c.corpus, &self.corpus);
        set_path(&mut c.output_dir, &self.output_dir);
        set_path(&mut c.store, &self.store);
        if let Some(t) = &self.templates {
            c.templates = Some(t.clone());
        }
        if let Some(ids) = &self.template_ids {
            c.template_ids = Some(ids.clone());
        }
        if let Some(p) = &self.profile {
            c.client = ClientMode::Synthetic { profile: p.clone() };
        } else if self.replay {
            c.client = ClientMode::Replay;
        } else if let (Some(endpoint), Some(model)) = (&self.endpoint, &self.model) {
            c.client = ClientMode::Live(ChatClientConfig {
                endpoint: endpoint.clone(),
                model: model.clone(),
                api_key_env: self.api_key_env.clone(),
                retry: Default::default(),
                timeout_secs: 60,
            });
        }
        if let ClientMode::Live(live) = &mut c.client {
            if self.api_key_env.is_some() {
                live.api_key_env = self.api_key_env.clone();
            }
        }
        macro_rules! set {
            ($($field:tt).+ = $flag:ident) => {
                if let Some(v) = self.$flag {
                    c.$($field).+ = v;
                }
            };
        }
        set!(decoding.temperature = temperature);
        set!(decoding.top_p = top_p);
        set!(decoding.max_tokens = max_tokens);
        set!(samples = samples);
        set!(bootstrap_reps = reps);
        set!(ci_level = ci_level);
        set!(thresholds.0 = lower);
        set!(thresholds.1 = upper);
        set!(min_valid = min_valid);
        set!(domain_threshold = domain_threshold);
        set!(seed = seed);
        set!(concurrency = concurrency);
        Ok(c)
    }
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    let config = cli.flags.build()?;
    let pipeline = Pipeline::load(config)?;
    let config = &pipeline.config;
    let explicit = cli.flags.run_dir.as_deref();
    let store_path = config.store.clone();

    match cli.command {
        Command::Validate => {
            let corpus = &pipeline.corpus;
            println!(
                "corpus: {} statements, {} countries, {} parties",
                corpus.len(),
                corpus.country_counts().len(),
                corpus.parties().len()
            );
            println!("templates: {}", pipeline.templates.len());
            println!("ok");
        }
        Command::Plan { show } => {
            let jobs = pipeline.jobs()?;
            let dir = create_run_dir(&config.output_dir, "plan", explicit)?;
            write_manifest(&dir, "plan", config, &[])?;
            println!("prompt instances: {}", jobs.len());
            println!("responses required: {}", jobs.total_samples());
            for job in jobs.iter().take(show) {
                println!("--- {}", job.instance.key);
                println!("{}", job.instance.rendered_text);
            }
        }
        Command::Run { max_new } => {
            let dir = create_run_dir(&config.output_dir, "run", explicit)?;
            let store = Mutex::new(pipeline.open_store()?);
            let result = pipeline.run(&store, max_new);
            write_manifest(&dir, "run", config, &[("store", &store_path)])?;
            let stats = result?;
            println!(
                "fetched {} responses, {} already stored, {} remaining",
                stats.fetched, stats.skipped, stats.remaining
            );
            println!("store: {}", store_path.display());
        }
        Command::Evaluate => {
            let dir = create_run_dir(&config.output_dir, "evaluate", explicit)?;
            write_manifest(&dir, "evaluate", config, &[("store", &store_path)])?;
            let evaluation = pipeline.evaluate(&pipeline.open_store()?)?;
            write_verdicts(&dir.join("verdicts.jsonl"), &evaluation.verdicts)?;
            write_json(&dir.join("evaluation.json"), &evaluation)?;
            print_evaluation(&evaluation);
            println!("run directory: {}", dir.display());
        }
        Command::Aggregate { verdicts } => {
            let dir = create_run_dir(&config.output_dir, "aggregate", explicit)?;
            let by_template = match &verdicts {
                Some(path) => {
                    write_manifest(&dir, "aggregate", config, &[("verdicts", path)])?;
                    read_verdicts(path)?
                }
                None => {
                    write_manifest(&dir, "aggregate", config, &[("store", &store_path)])?;
                    pipeline.evaluate(&pipeline.open_store()?)?.verdicts
                }
            };
            let aggregate = pipeline.aggregate(&by_template)?;
            write_json(&dir.join("aggregate.json"), &aggregate)?;
            for g in &aggregate.leaning.groups {
                if let Some(m) = g.pooled_summary {
                    println!("{} match rate: {:.4} (sd {:.4})", g.leaning, m.mean, m.sd);
                }
            }
            println!("run directory: {}", dir.display());
        }
        Command::Report { evaluation, aggregate } => {
            let dir = create_run_dir(&config.output_dir, "report", explicit)?;
            let (evaluation, aggregate): (Evaluation, Aggregate) = match (&evaluation, &aggregate) {
                (Some(e), Some(a)) => {
                    write_manifest(&dir, "report", config, &[("evaluation", e), ("aggregate", a)])?;
                    (read_json(e)?, read_json(a)?)
                }
                _ => {
                    write_manifest(&dir, "report", config, &[("store", &store_path)])?;
                    let evaluation = pipeline.evaluate(&pipeline.open_store()?)?;
                    let aggregate = pipeline.aggregate(&evaluation.verdicts)?;
                    (evaluation, aggregate)
                }
            };
            let files = emit_reports(&dir.join("report"), &evaluation, &aggregate)?;
            println!("wrote {} report files to {}", files.len(), dir.join("report").display());
        }
        Command::Simulate => {
            if !matches!(config.client, ClientMode::Synthetic { .. }) {
                return Err(stancebench::config::ConfigError::Invalid(
                    "simulate needs a synthetic profile (--profile or client.mode = synthetic)".into(),
                )
                .into());
            }
            let dir = create_run_dir(&config.output_dir, "simulate", explicit)?;
            let mut sim = pipeline.clone();
            sim.config.store = dir.join("responses.jsonl");
            if sim.config.store.exists() {
                std::fs::remove_file(&sim.config.store).map_err(|source| PipelineError::Io {
                    path: sim.config.store.display().to_string(),
                    source,
                })?;
            }
            write_manifest(&dir, "simulate", &sim.config, &[])?;
            let store = Mutex::new(sim.open_store()?);
            let stats = sim.run(&store, None)?;
            note(format!("generated {} synthetic responses", stats.fetched));
            let store = store.into_inner().expect("store lock");
            let evaluation = sim.evaluate(&store)?;
            let aggregate = sim.aggregate(&evaluation.verdicts)?;
            write_verdicts(&dir.join("verdicts.jsonl"), &evaluation.verdicts)?;
            write_json(&dir.join("evaluation.json"), &evaluation)?;
            write_json(&dir.join("aggregate.json"), &aggregate)?;
            let files = emit_reports(&dir.join("report"), &evaluation, &aggregate)?;
            print_evaluation(&evaluation);
            println!("wrote {} report files to {}", files.len(), dir.join("report").display());
        }
    }
    Ok(())
}

fn print_evaluation(evaluation: &Evaluation) {
    let s = &evaluation.summary;
    for t in s.tests.iter().chain(std::iter::once(&s.all_tests)) {
        println!(
            "{:<16} pass {:.4} (sd {:.4}, random {:.4})",
            t.test, t.mean, t.sd, t.random_baseline
        );
    }
    if let Some(c) = &evaluation.cross_template {
        println!("cross-template alpha {:.4}, identical answers {}", c.alpha, c.same_response_count);
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
