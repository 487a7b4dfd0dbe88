mod common;

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use stancebench::modelio::{
    run_jobs, synth_respond, Backend, Client, ClientError, DecodingParams, ResponseStore, RunOptions, Source,
    SyntheticProfile, SyntheticRespondent,
};
use stancebench::promptkit::{enumerate_jobs, JobSet, PromptInstance};

fn profile() -> SyntheticProfile {
    SyntheticProfile {
        default_agree_prob: 0.7,
        refusal_rate: 0.05,
        seed: 5,
        ..Default::default()
    }
}

fn jobs() -> JobSet {
    let corpus = common::generated_corpus(&[("nl", 4), ("de", 3)]);
    enumerate_jobs(&corpus, &[common::template("t1"), common::template("t4")], 5).unwrap()
}

fn synthetic() -> Client {
    Client::new(Box::new(SyntheticRespondent::new(profile()).unwrap()))
}

/// Synthetic backend that fails once its budget is spent.
struct Flaky {
    budget: AtomicUsize,
}

impl Backend for Flaky {
    fn source(&self) -> Source {
        Source::Synthetic
    }
    fn generate(&self, inst: &PromptInstance, i: u32, _: &DecodingParams) -> Result<String, ClientError> {
        if self.budget.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |b| b.checked_sub(1)).is_err() {
            return Err(ClientError::Network {
                attempts: 1,
                message: "connection reset".into(),
            });
        }
        Ok(synth_respond(&profile(), inst, i))
    }
}

fn uninterrupted(dir: &std::path::Path) -> ResponseStore {
    let path = dir.join("full.jsonl");
    let store = Mutex::new(ResponseStore::open(&path).unwrap());
    let stats = run_jobs(&jobs(), &DecodingParams::default(), &synthetic(), &store, RunOptions::default()).unwrap();
    assert_eq!(stats.remaining, 0);
    store.into_inner().unwrap()
}

#[test]
fn chunked_runs_match_uninterrupted() {
    let dir = tempfile::tempdir().unwrap();
    let full = uninterrupted(dir.path());
    let path = dir.path().join("chunked.jsonl");
    let mut rounds = 0;
    for chunk in [1usize, 7, 50, 3, 200].iter().cycle() {
        let store = Mutex::new(ResponseStore::open(&path).unwrap());
        let options = RunOptions {
            concurrency: 1 + rounds % 4,
            max_new: Some(*chunk),
        };
        let stats = run_jobs(&jobs(), &DecodingParams::default(), &synthetic(), &store, options).unwrap();
        rounds += 1;
        if stats.remaining == 0 {
            break;
        }
    }
    assert!(rounds > 3);
    let resumed = ResponseStore::open(&path).unwrap();
    assert_eq!(resumed.content(), full.content());
}

#[test]
fn failure_midway_then_resume_matches() {
    let dir = tempfile::tempdir().unwrap();
    let full = uninterrupted(dir.path());
    let path = dir.path().join("flaky.jsonl");
    let flaky = Client::new(Box::new(Flaky {
        budget: AtomicUsize::new(97),
    }));
    let store = Mutex::new(ResponseStore::open(&path).unwrap());
    assert!(run_jobs(&jobs(), &DecodingParams::default(), &flaky, &store, RunOptions::default()).is_err());
    drop(store);
    assert_eq!(ResponseStore::open(&path).unwrap().len(), 97);

    let store = Mutex::new(ResponseStore::open(&path).unwrap());
    let stats = run_jobs(&jobs(), &DecodingParams::default(), &synthetic(), &store, RunOptions::default()).unwrap();
    assert_eq!(stats.skipped, 97);
    assert_eq!(store.into_inner().unwrap().content(), full.content());
}

#[test]
fn torn_final_line_is_discarded_and_refetched() {
    let dir = tempfile::tempdir().unwrap();
    let full = uninterrupted(dir.path());
    let path = dir.path().join("torn.jsonl");
    let store = Mutex::new(ResponseStore::open(&path).unwrap());
    let options = RunOptions {
        concurrency: 2,
        max_new: Some(40),
    };
    run_jobs(&jobs(), &DecodingParams::default(), &synthetic(), &store, options).unwrap();
    drop(store);
    let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(br#"{"template_id":"t1","label_order":"canon"#).unwrap();
    drop(f);

    let store = Mutex::new(ResponseStore::open(&path).unwrap());
    assert_eq!(store.lock().unwrap().len(), 40);
    run_jobs(&jobs(), &DecodingParams::default(), &synthetic(), &store, RunOptions::default()).unwrap();
    drop(store);
    assert_eq!(ResponseStore::open(&path).unwrap().content(), full.content());
}

#[test]
fn concurrency_does_not_change_content() {
    let one = Mutex::new(ResponseStore::in_memory());
    let many = Mutex::new(ResponseStore::in_memory());
    let opts = |c| RunOptions {
        concurrency: c,
        max_new: None,
    };
    run_jobs(&jobs(), &DecodingParams::default(), &synthetic(), &one, opts(1)).unwrap();
    run_jobs(&jobs(), &DecodingParams::default(), &synthetic(), &many, opts(16)).unwrap();
    assert_eq!(one.into_inner().unwrap().content(), many.into_inner().unwrap().content());
}

#[test]
fn replay_serves_stored_responses_only() {
    let dir = tempfile::tempdir().unwrap();
    let full = uninterrupted(dir.path());
    let store = Mutex::new(ResponseStore::open(dir.path().join("full.jsonl")).unwrap());
    let stats = run_jobs(&jobs(), &DecodingParams::default(), &Client::replay_only(), &store, RunOptions::default())
        .unwrap();
    assert_eq!(stats.fetched, 0);
    assert_eq!(stats.skipped, full.len());

    let empty = Mutex::new(ResponseStore::in_memory());
    let err = run_jobs(&jobs(), &DecodingParams::default(), &Client::replay_only(), &empty, RunOptions::default())
        .unwrap_err();
    assert!(matches!(*err.source, ClientError::ReplayMiss(_)));
}
