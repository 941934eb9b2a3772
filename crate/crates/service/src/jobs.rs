//! Job registry. Status only moves forward: queued, running, then done or
//! failed; progress never decreases.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    CoupledRun,
    SitingRun,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    fn stage(self) -> u8 {
        match self {
            JobStatus::Queued => 0,
            JobStatus::Running => 1,
            JobStatus::Done | JobStatus::Failed => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobHandle {
    pub id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub progress: f64,
    /// Where the result can be fetched once done.
    pub result: Option<String>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct JobOutput {
    pub bytes: Arc<Vec<u8>>,
    pub content_type: &'static str,
}

#[derive(Default)]
struct Entry {
    handle: Option<JobHandle>,
    output: Option<JobOutput>,
}

#[derive(Default)]
pub struct Registry {
    jobs: Mutex<BTreeMap<u64, Entry>>,
}

impl Registry {
    pub fn create(&self, kind: JobKind) -> JobHandle {
        let mut jobs = self.jobs.lock().expect("job registry poisoned");
        let id = jobs.keys().next_back().map_or(1, |k| k + 1);
        let handle = JobHandle {
            id: id.to_string(),
            kind,
            status: JobStatus::Queued,
            progress: 0.0,
            result: None,
            error: None,
        };
        jobs.insert(id, Entry { handle: Some(handle.clone()), output: None });
        handle
    }

    pub fn get(&self, id: &str) -> Option<JobHandle> {
        let id: u64 = id.parse().ok()?;
        self.jobs.lock().expect("job registry poisoned").get(&id)?.handle.clone()
    }

    pub fn list(&self) -> Vec<JobHandle> {
        self.jobs.lock().expect("job registry poisoned").values().filter_map(|e| e.handle.clone()).collect()
    }

    pub fn output(&self, id: &str) -> Option<JobOutput> {
        let id: u64 = id.parse().ok()?;
        self.jobs.lock().expect("job registry poisoned").get(&id)?.output.clone()
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut JobHandle, &mut Option<JobOutput>)) {
        let Ok(id) = id.parse::<u64>() else { return };
        let mut jobs = self.jobs.lock().expect("job registry poisoned");
        if let Some(Entry { handle: Some(h), output }) = jobs.get_mut(&id) {
            f(h, output);
        }
    }

    fn advance(h: &mut JobHandle, to: JobStatus) -> bool {
        if to.stage() > h.status.stage() {
            h.status = to;
            true
        } else {
            false
        }
    }

    pub fn start(&self, id: &str) {
        self.update(id, |h, _| {
            Self::advance(h, JobStatus::Running);
        });
    }

    pub fn progress(&self, id: &str, p: f64) {
        self.update(id, |h, _| {
            if h.status == JobStatus::Running && p.is_finite() {
                h.progress = h.progress.max(p.clamp(0.0, 1.0));
            }
        });
    }

    pub fn finish(&self, id: &str, out: JobOutput) {
        self.update(id, |h, slot| {
            if Self::advance(h, JobStatus::Done) {
                h.progress = 1.0;
                h.result = Some(format!("/api/v1/jobs/{}/result", h.id));
                *slot = Some(out);
            }
        });
    }

    pub fn fail(&self, id: &str, message: String) {
        self.update(id, |h, _| {
            if Self::advance(h, JobStatus::Failed) {
                h.error = Some(message);
            }
        });
    }
}
