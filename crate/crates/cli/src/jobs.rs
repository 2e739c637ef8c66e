//! Asynchronous synthesis jobs with an append-only JSONL log.
//!
//! Every state change appends the full record to `jobs.jsonl`. On start the
//! log is replayed, the last record per id wins, and jobs that never reached
//! a terminal state are queued again.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Semaphore;

use crate::error::ServiceError;
use crate::request::{run_synthesis, SynthesisRequest};

pub const LOG_FILE: &str = "jobs.jsonl";
pub const DEFAULT_CONCURRENCY: usize = 2;
pub const DEFAULT_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JobRecord {
    pub id: String,
    pub request: SynthesisRequest,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Seconds since the Unix epoch.
    pub created_at: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<f64>,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

struct State {
    jobs: BTreeMap<u64, JobRecord>,
    next: u64,
    log: Option<File>,
}

impl State {
    fn append(&mut self, record: &JobRecord) -> io::Result<()> {
        if let Some(f) = &mut self.log {
            let mut line = serde_json::to_string(record).map_err(io::Error::other)?;
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        Ok(())
    }
}

fn seq(id: &str) -> Option<u64> {
    id.strip_prefix("job-")?.parse().ok()
}

/// The only shared mutable structure of the service. All mutations go
/// through its methods, which serialize on one lock and write the log
/// before releasing it.
pub struct JobRegistry {
    state: Mutex<State>,
    permits: Arc<Semaphore>,
    capacity: usize,
    log_path: Option<PathBuf>,
}

impl JobRegistry {
    /// Opens (and replays) the log under `data_dir`; `None` keeps jobs in
    /// memory only.
    pub fn open(data_dir: Option<&Path>, concurrency: usize, capacity: usize) -> io::Result<Arc<Self>> {
        let mut jobs = BTreeMap::new();
        let mut log = None;
        let mut log_path = None;
        if let Some(dir) = data_dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(LOG_FILE);
            if path.exists() {
                for line in BufReader::new(File::open(&path)?).lines() {
                    let line = line?;
                    // A torn final line from an interrupted write is skipped.
                    let Ok(record) = serde_json::from_str::<JobRecord>(&line) else { continue };
                    let Some(n) = seq(&record.id) else { continue };
                    match jobs.get(&n) {
                        Some(JobRecord { status, .. }) if status.is_terminal() => {}
                        _ => {
                            jobs.insert(n, record);
                        }
                    }
                }
            }
            log = Some(OpenOptions::new().create(true).append(true).open(&path)?);
            log_path = Some(path);
        }
        let next = jobs.keys().next_back().map_or(1, |n| n + 1);
        Ok(Arc::new(JobRegistry {
            state: Mutex::new(State { jobs, next, log }),
            permits: Arc::new(Semaphore::new(concurrency.max(1))),
            capacity,
            log_path,
        }))
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.log_path.as_deref()
    }

    /// Queues every replayed job that had not finished. Needs a Tokio runtime.
    pub fn resume(self: &Arc<Self>) -> io::Result<usize> {
        let pending: Vec<String> = {
            let mut st = self.state.lock().expect("registry lock");
            let ids: Vec<u64> = st.jobs.iter().filter(|(_, r)| !r.status.is_terminal()).map(|(&n, _)| n).collect();
            let mut out = Vec::new();
            for n in ids {
                let mut record = st.jobs[&n].clone();
                if record.status == JobStatus::Running {
                    record.status = JobStatus::Queued;
                    record.started_at = None;
                    st.append(&record)?;
                    st.jobs.insert(n, record.clone());
                }
                out.push(record.id);
            }
            out
        };
        for id in &pending {
            self.spawn(id.clone());
        }
        Ok(pending.len())
    }

    /// Validates and queues a request. Needs a Tokio runtime.
    pub fn submit(self: &Arc<Self>, request: SynthesisRequest) -> Result<JobRecord, ServiceError> {
        request.prepare()?;
        let record = {
            let mut st = self.state.lock().expect("registry lock");
            let active = st.jobs.values().filter(|r| !r.status.is_terminal()).count();
            if active >= self.capacity {
                return Err(ServiceError::Unavailable(format!("job queue full ({active} active)")));
            }
            let n = st.next;
            let record = JobRecord {
                id: format!("job-{n}"),
                request,
                status: JobStatus::Queued,
                result: None,
                error: None,
                created_at: now(),
                started_at: None,
                finished_at: None,
            };
            st.append(&record).map_err(|e| ServiceError::Internal(format!("job log: {e}")))?;
            st.next += 1;
            st.jobs.insert(n, record.clone());
            record
        };
        self.spawn(record.id.clone());
        Ok(record)
    }

    pub fn get(&self, id: &str) -> Option<JobRecord> {
        let n = seq(id)?;
        self.state.lock().expect("registry lock").jobs.get(&n).cloned()
    }

    pub fn list(&self) -> Vec<JobRecord> {
        self.state.lock().expect("registry lock").jobs.values().cloned().collect()
    }

    /// Applies `f` unless the job is already terminal.
    fn update(&self, id: &str, f: impl FnOnce(&mut JobRecord)) -> Option<JobRecord> {
        let n = seq(id)?;
        let mut st = self.state.lock().expect("registry lock");
        let mut record = st.jobs.get(&n)?.clone();
        if record.status.is_terminal() {
            return None;
        }
        f(&mut record);
        // A failed log write leaves the job in memory; the next start reruns it.
        let _ = st.append(&record);
        st.jobs.insert(n, record.clone());
        Some(record)
    }

    fn spawn(self: &Arc<Self>, id: String) {
        let registry = Arc::clone(self);
        tokio::spawn(async move {
            let Ok(_permit) = Arc::clone(&registry.permits).acquire_owned().await else { return };
            let Some(record) = registry.update(&id, |r| {
                r.status = JobStatus::Running;
                r.started_at = Some(now());
            }) else {
                return;
            };
            let request = record.request;
            let outcome = tokio::task::spawn_blocking(move || run_synthesis(&request))
                .await
                .unwrap_or_else(|e| Err(ServiceError::Internal(format!("job panicked: {e}"))));
            registry.update(&id, |r| {
                r.finished_at = Some(now());
                match outcome {
                    Ok(doc) => {
                        r.status = JobStatus::Done;
                        r.result = Some(doc);
                    }
                    Err(e) => {
                        r.status = JobStatus::Failed;
                        r.error = Some(e.to_string());
                    }
                }
            });
        });
    }
}
