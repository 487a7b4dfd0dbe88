//! Filling a response store for a job set with bounded concurrency.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{Client, ClientError, DecodingParams, ResponseKey, ResponseStore};
use crate::promptkit::{JobSet, PromptInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Upper bound on requests in flight.
    pub concurrency: usize,
    /// Stop after fetching this many new responses.
    pub max_new: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            concurrency: 8,
            max_new: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub fetched: usize,
    pub skipped: usize,
    /// Responses still missing after this run.
    pub remaining: usize,
}

#[derive(Debug, thiserror::Error)]
#[error("{key}: {source}")]
pub struct JobError {
    pub key: ResponseKey,
    #[source]
    pub source: Box<ClientError>,
}

/// Make sure the store holds `samples_required` responses for every job.
/// Keys already present are skipped, so an interrupted run can simply be
/// started again.
pub fn run_jobs(
    jobs: &JobSet,
    params: &DecodingParams,
    client: &Client,
    store: &Mutex<ResponseStore>,
    options: RunOptions,
) -> Result<RunStats, JobError> {
    let mut pending: Vec<(&PromptInstance, u32)> = Vec::new();
    let mut skipped = 0;
    {
        let guard = store.lock().expect("store lock");
        for job in jobs {
            for i in 0..job.samples_required {
                if guard.contains(&ResponseKey::new(job.instance.key.clone(), i)) {
                    skipped += 1;
                } else {
                    pending.push((&job.instance, i));
                }
            }
        }
    }
    let missing = pending.len();
    if let Some(limit) = options.max_new {
        pending.truncate(limit);
    }

    let next = AtomicUsize::new(0);
    let fetched = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let failure: Mutex<Option<JobError>> = Mutex::new(None);
    let workers = options.concurrency.max(1).min(pending.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(instance, sample)) = pending.get(i) else {
                    break;
                };
                match client.complete(instance, sample, params, store) {
                    Ok(_) => {
                        fetched.fetch_add(1, Ordering::SeqCst);
                    }
                    Err(source) => {
                        stop.store(true, Ordering::SeqCst);
                        let mut slot = failure.lock().expect("failure lock");
                        if slot.is_none() {
                            *slot = Some(JobError {
                                key: ResponseKey::new(instance.key.clone(), sample),
                                source: Box::new(source),
                            });
                        }
                        break;
                    }
                }
            });
        }
    });

    if let Some(err) = failure.into_inner().expect("failure lock") {
        return Err(err);
    }
    let fetched = fetched.into_inner();
    Ok(RunStats {
        fetched,
        skipped,
        remaining: missing - fetched,
    })
}
