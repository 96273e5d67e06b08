use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use crate::error::ServiceError;
use crate::model::Event;
use crate::session::Session;

/// Sessions backed by append-only JSONL event logs.
///
/// Writes are serialized by one mutex and replace the session snapshot;
/// readers clone the current snapshot and never wait on a writer.
pub struct Store {
    dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    writer: Mutex<()>,
}

fn log_err(path: &Path) -> impl FnOnce(std::io::Error) -> ServiceError + '_ {
    move |source| ServiceError::Log {
        path: path.to_path_buf(),
        source,
    }
}

impl Store {
    /// A store that keeps nothing on disk.
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            sessions: RwLock::new(HashMap::new()),
            writer: Mutex::new(()),
        }
    }

    /// Opens `dir`, replaying every `*.jsonl` log in it.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(log_err(&dir))?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(log_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let session = replay(&path)?;
            sessions.insert(session.id.clone(), Arc::new(session));
        }
        Ok(Self {
            dir: Some(dir),
            sessions: RwLock::new(sessions),
            writer: Mutex::new(()),
        })
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn append_line(&self, id: &str, event: &Event) -> Result<(), ServiceError> {
        let Some(path) = self.log_path(id) else {
            return Ok(());
        };
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(log_err(&path))?;
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        f.write_all(line.as_bytes()).map_err(log_err(&path))?;
        f.sync_data().map_err(log_err(&path))
    }

    pub fn get(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    /// Session holding `item_id`. Item ids start with their session id.
    pub fn find_item(&self, item_id: &str) -> Result<Arc<Session>, ServiceError> {
        let id = item_id
            .rsplit_once('-')
            .map(|(s, _)| s)
            .ok_or_else(|| ServiceError::UnknownItem(item_id.to_string()))?;
        self.get(id).map_err(|_| ServiceError::UnknownItem(item_id.to_string()))
    }

    /// Next free session id, `s0001`, `s0002`, ...
    pub fn next_id(&self) -> String {
        let map = self.sessions.read().expect("session map poisoned");
        (1..)
            .map(|i| format!("s{i:04}"))
            .find(|id| !map.contains_key(id))
            .unwrap()
    }

    /// Creates a session from a creation event built by `make(id)`.
    pub fn create(
        &self,
        make: impl FnOnce(&str) -> Result<Event, ServiceError>,
    ) -> Result<Arc<Session>, ServiceError> {
        let _guard = self.writer.lock().expect("writer poisoned");
        let id = self.next_id();
        let event = make(&id)?;
        let session = Arc::new(Session::from_event(event.clone())?);
        self.append_line(&id, &event)?;
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(id, session.clone());
        Ok(session)
    }

    /// Validates, persists and applies an event.
    pub fn append(&self, session_id: &str, event: Event) -> Result<Arc<Session>, ServiceError> {
        let _guard = self.writer.lock().expect("writer poisoned");
        let mut next = (*self.get(session_id)?).clone();
        next.apply(event.clone())?;
        self.append_line(session_id, &event)?;
        let next = Arc::new(next);
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(session_id.to_string(), next.clone());
        Ok(next)
    }
}

fn replay(path: &Path) -> Result<Session, ServiceError> {
    let f = File::open(path).map_err(log_err(path))?;
    let mut session: Option<Session> = None;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(log_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line)
            .map_err(|e| ServiceError::Corrupt(format!("{}:{}: {e}", path.display(), i + 1)))?;
        match session.as_mut() {
            None => session = Some(Session::from_event(event)?),
            Some(s) => s.apply(event)?,
        }
    }
    session.ok_or_else(|| ServiceError::Corrupt(format!("{} is empty", path.display())))
}
