use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use harmonize_core::dvl::{DerivedVariableLibrary, DerivedVariableSpec, DvlStore};
use harmonize_core::io::SourceSpec;
use harmonize_core::pipeline::{DvlSource, RunReport};
use harmonize_core::sheet::{validate_sheets, DetailsSheet, ValidationReport, VariableSheet};

use crate::error::ApiError;
use crate::ServiceConfig;

pub(crate) fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // a panicked holder leaves plain data behind; keep serving it
    m.lock().unwrap_or_else(|e| e.into_inner())
}

pub struct Session {
    pub id: String,
    pub name: Option<String>,
    pub source: SourceSpec,
    pub columns: Vec<String>,
    pub variables: VariableSheet,
    pub details: DetailsSheet,
    pub report: ValidationReport,
    pub derived: Vec<DerivedVariableSpec>,
    pub dvl: Option<PathBuf>,
    pub created_at: String,
    pub last_used: Instant,
    pub active_job: Option<String>,
    pub last_success: Option<String>,
    /// Uploaded source file owned by this session.
    pub upload: Option<PathBuf>,
}

impl Session {
    pub fn revalidate(&mut self) {
        self.report = validate_sheets(&self.variables, &self.details);
    }
}

#[derive(Debug, Clone)]
pub enum JobState {
    Queued,
    Running,
    Succeeded(Box<RunReport>),
    Failed(ApiError),
}

impl JobState {
    pub fn name(&self) -> &'static str {
        match self {
            JobState::Queued => "queued",
            JobState::Running => "running",
            JobState::Succeeded(_) => "succeeded",
            JobState::Failed(_) => "failed",
        }
    }
}

pub struct Job {
    pub id: String,
    pub session: String,
    pub state: Mutex<JobState>,
    pub rows_done: AtomicU64,
    /// `u64::MAX` while unknown.
    pub rows_total: AtomicU64,
}

impl Job {
    pub fn new(id: String, session: String) -> Self {
        Job {
            id,
            session,
            state: Mutex::new(JobState::Queued),
            rows_done: AtomicU64::new(0),
            rows_total: AtomicU64::new(u64::MAX),
        }
    }

    pub fn progress(&self) -> (u64, Option<u64>) {
        let total = self.rows_total.load(Ordering::Relaxed);
        (
            self.rows_done.load(Ordering::Relaxed),
            (total != u64::MAX).then_some(total),
        )
    }
}

pub enum Library {
    Store(DvlStore),
    Memory(DerivedVariableLibrary),
}

impl Library {
    pub fn snapshot(&self) -> Result<DerivedVariableLibrary, ApiError> {
        match self {
            Library::Store(s) => Ok(s.load()?),
            Library::Memory(lib) => Ok(lib.clone()),
        }
    }

    /// What a recode job should read derived expressions from.
    pub fn source(&self) -> DvlSource {
        match self {
            Library::Store(s) => DvlSource::Dir(s.dir().to_path_buf()),
            Library::Memory(lib) => DvlSource::Library(lib.clone()),
        }
    }
}

pub struct Shared {
    pub config: ServiceConfig,
    pub work_dir: PathBuf,
    _tmp: Option<tempfile::TempDir>,
    pub sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    pub jobs: Mutex<HashMap<String, Arc<Job>>>,
    pub library: Mutex<Library>,
}

/// Cheaply cloneable handle to the service state.
#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Shared>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Self, ApiError> {
        let (work_dir, tmp) = match &config.work_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| ApiError::internal(e.to_string()))?;
                (dir.clone(), None)
            }
            None => {
                let tmp = tempfile::Builder::new()
                    .prefix("harmonize-service")
                    .tempdir()
                    .map_err(|e| ApiError::internal(e.to_string()))?;
                (tmp.path().to_path_buf(), Some(tmp))
            }
        };
        let library = match &config.dvl_dir {
            Some(dir) => Library::Store(DvlStore::open(dir)?),
            None => Library::Memory(DerivedVariableLibrary::new()),
        };
        Ok(AppState(Arc::new(Shared {
            config,
            work_dir,
            _tmp: tmp,
            sessions: Mutex::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
            library: Mutex::new(library),
        })))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    pub(crate) fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let session = lock(&self.0.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("UnknownSession", format!("no session `{id}`")))?;
        lock(&session).last_used = Instant::now();
        Ok(session)
    }

    pub(crate) fn job(&self, id: &str) -> Result<Arc<Job>, ApiError> {
        lock(&self.0.jobs)
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("UnknownJob", format!("no job `{id}`")))
    }

    pub fn session_count(&self) -> usize {
        lock(&self.0.sessions).len()
    }

    /// Drops sessions idle for longer than the TTL, unless a job is running.
    /// Returns how many were removed.
    pub fn sweep_expired(&self) -> usize {
        let ttl = self.0.config.session_ttl;
        let now = Instant::now();
        let mut sessions = lock(&self.0.sessions);
        let expired: Vec<String> = sessions
            .iter()
            .filter(|(_, s)| {
                let s = lock(s);
                s.active_job.is_none() && now.duration_since(s.last_used) > ttl
            })
            .map(|(id, _)| id.clone())
            .collect();
        for id in &expired {
            if let Some(s) = sessions.remove(id) {
                if let Some(upload) = lock(&s).upload.take() {
                    let _ = std::fs::remove_file(upload);
                }
            }
        }
        drop(sessions);
        if !expired.is_empty() {
            lock(&self.0.jobs).retain(|_, j| !expired.contains(&j.session));
            tracing::info!(count = expired.len(), "expired idle sessions");
        }
        expired.len()
    }

    pub(crate) fn sweep_interval(&self) -> Duration {
        (self.0.config.session_ttl / 4).clamp(Duration::from_millis(100), Duration::from_secs(60))
    }
}
