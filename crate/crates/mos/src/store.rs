//! Event log and the state it replays into.
//!
//! Every mutation is one JSON line appended (and fsynced) by a single writer.
//! Readers load an immutable [`Snapshot`] that the writer republishes after
//! each append.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use denoise_core::metrics::{mos_aggregate, MosRecord, MosSummary};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use serde::{Deserialize, Serialize};

use crate::pool::{Clip, ClipPool};
use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaylistEntry {
    /// Opaque 128-bit token shown to the client.
    pub id: String,
    #[serde(flatten)]
    pub clip: Clip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub rater: String,
    pub seed: u64,
    pub created_ms: u64,
    pub playlist: Vec<PlaylistEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub session_id: String,
    pub clip_id: String,
    pub score: u8,
    #[serde(default)]
    pub client_ts: Option<u64>,
    pub server_ts: u64,
    /// True when this rating replaces an earlier one for the same clip.
    pub supersedes: bool,
    #[serde(flatten)]
    pub clip: Clip,
}

/// One line of the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Session(Session),
    Rating(Rating),
}

/// State rebuilt from the log.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    sessions: HashMap<String, Session>,
    /// Blinded clip id -> (session id, playlist index).
    clips: HashMap<String, (String, usize)>,
    /// Latest rating per (session, clip).
    ratings: BTreeMap<(String, String), Rating>,
    events: usize,
}

impl Snapshot {
    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    pub fn clip(&self, blinded_id: &str) -> Option<&PlaylistEntry> {
        let (session, index) = self.clips.get(blinded_id)?;
        self.sessions.get(session).map(|s| &s.playlist[*index])
    }

    pub fn event_count(&self) -> usize {
        self.events
    }

    pub fn rating_count(&self) -> usize {
        self.ratings.len()
    }

    /// Current (non-superseded) ratings, unblinded.
    pub fn records(&self) -> Vec<MosRecord> {
        self.ratings
            .values()
            .map(|r| MosRecord {
                rater: self.sessions[&r.session_id].rater.clone(),
                clip: r.clip.file.clone(),
                algorithm: r.clip.algorithm.clone(),
                variant: r.clip.variant.clone(),
                score: r.score,
                timestamp: r.server_ts,
            })
            .collect()
    }

    pub fn report(&self) -> Result<Vec<MosSummary>, ServiceError> {
        if self.ratings.is_empty() {
            return Err(ServiceError::NoRatings);
        }
        mos_aggregate(&self.records()).map_err(|e| ServiceError::Internal(e.to_string()))
    }

    fn apply(&mut self, event: &Event) -> Result<(), String> {
        match event {
            Event::Session(s) => {
                if self.sessions.contains_key(&s.session_id) {
                    return Err(format!("duplicate session {}", s.session_id));
                }
                for (i, entry) in s.playlist.iter().enumerate() {
                    if self.clips.insert(entry.id.clone(), (s.session_id.clone(), i)).is_some() {
                        return Err(format!("duplicate clip id {}", entry.id));
                    }
                }
                self.sessions.insert(s.session_id.clone(), s.clone());
            }
            Event::Rating(r) => {
                match self.clips.get(&r.clip_id) {
                    Some((session, _)) if *session == r.session_id => {}
                    _ => return Err(format!("rating for unknown clip {}", r.clip_id)),
                }
                if r.score > 10 {
                    return Err(format!("score {} out of range", r.score));
                }
                self.ratings.insert((r.session_id.clone(), r.clip_id.clone()), r.clone());
            }
        }
        self.events += 1;
        Ok(())
    }
}

struct Writer {
    file: File,
    rng: ChaCha20Rng,
    state: Snapshot,
}

pub struct Store {
    pool: ClipPool,
    log_path: PathBuf,
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<Snapshot>>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn token(rng: &mut impl Rng) -> String {
    format!("{:032x}", rng.random::<u128>())
}

/// Reads every complete event. A final line without a newline is a torn
/// write from a crash and is dropped; any other bad line is an error.
pub fn read_log(path: &Path) -> Result<Vec<Event>, ServiceError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(ServiceError::Io(e)),
    };
    let mut reader = BufReader::new(file);
    let mut events = Vec::new();
    let mut line = String::new();
    let mut number = 0;
    loop {
        line.clear();
        if reader.read_line(&mut line).map_err(ServiceError::Io)? == 0 {
            break;
        }
        number += 1;
        if !line.ends_with('\n') {
            tracing::warn!(line = number, "ignoring truncated final log line");
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| ServiceError::CorruptLog {
            line: number,
            reason: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

impl Store {
    /// Replays `log_path` (created if absent) and opens it for appending.
    /// `seed` fixes the token generator for reproducible tests; `None` seeds
    /// from the operating system.
    pub fn open(pool: ClipPool, log_path: impl Into<PathBuf>, seed: Option<u64>) -> Result<Self, ServiceError> {
        let log_path = log_path.into();
        let mut state = Snapshot::default();
        for (i, event) in read_log(&log_path)?.iter().enumerate() {
            state
                .apply(event)
                .map_err(|reason| ServiceError::CorruptLog { line: i + 1, reason })?;
        }
        if let Ok(meta) = std::fs::metadata(&log_path) {
            // drop a torn tail so the next append starts on a fresh line
            let valid = valid_prefix_len(&log_path)?;
            if valid < meta.len() {
                OpenOptions::new()
                    .write(true)
                    .open(&log_path)
                    .and_then(|f| f.set_len(valid))
                    .map_err(ServiceError::Io)?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(ServiceError::Io)?;
        let rng = match seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_os_rng(),
        };
        tracing::info!(
            events = state.events,
            sessions = state.sessions.len(),
            clips = pool.clips().len(),
            "rating log replayed"
        );
        Ok(Self {
            pool,
            log_path,
            snapshot: RwLock::new(Arc::new(state.clone())),
            writer: Mutex::new(Writer { file, rng, state }),
        })
    }

    /// Current state; the read lock is held only long enough to clone the `Arc`.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.snapshot.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn pool(&self) -> &ClipPool {
        &self.pool
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    fn commit(&self, writer: &mut Writer, event: Event) -> Result<(), ServiceError> {
        let mut next = writer.state.clone();
        next.apply(&event).map_err(ServiceError::Internal)?;
        let mut line = serde_json::to_vec(&event).map_err(|e| ServiceError::Internal(e.to_string()))?;
        line.push(b'\n');
        writer.file.write_all(&line).map_err(ServiceError::Io)?;
        writer.file.sync_data().map_err(ServiceError::Io)?;
        writer.state = next;
        let published = Arc::new(writer.state.clone());
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = published;
        Ok(())
    }

    pub fn create_session(&self, rater: &str) -> Result<Session, ServiceError> {
        if self.pool.is_empty() {
            return Err(ServiceError::EmptyPool);
        }
        let mut writer = self.writer.lock().map_err(|_| ServiceError::Internal("writer poisoned".into()))?;
        let session_id = token(&mut writer.rng);
        let seed: u64 = writer.rng.random();
        let mut order: Vec<&Clip> = self.pool.clips().iter().collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let playlist = order
            .into_iter()
            .map(|clip| PlaylistEntry {
                id: token(&mut writer.rng),
                clip: clip.clone(),
            })
            .collect();
        let session = Session {
            session_id,
            rater: rater.to_string(),
            seed,
            created_ms: now_ms(),
            playlist,
        };
        self.commit(&mut writer, Event::Session(session.clone()))?;
        Ok(session)
    }

    pub fn record_rating(
        &self,
        session_id: &str,
        clip_id: &str,
        score: u8,
        client_ts: Option<u64>,
    ) -> Result<Rating, ServiceError> {
        if score > 10 {
            return Err(ServiceError::InvalidScore(format!("score {score} is outside 0..=10")));
        }
        let mut writer = self.writer.lock().map_err(|_| ServiceError::Internal("writer poisoned".into()))?;
        let state = &writer.state;
        if state.session(session_id).is_none() {
            return Err(ServiceError::UnknownSession);
        }
        let entry = match state.clips.get(clip_id) {
            Some((s, i)) if s == session_id => state.sessions[s].playlist[*i].clone(),
            _ => return Err(ServiceError::UnknownClip),
        };
        let supersedes = state
            .ratings
            .contains_key(&(session_id.to_string(), clip_id.to_string()));
        let rating = Rating {
            session_id: session_id.to_string(),
            clip_id: clip_id.to_string(),
            score,
            client_ts,
            server_ts: now_ms(),
            supersedes,
            clip: entry.clip,
        };
        self.commit(&mut writer, Event::Rating(rating.clone()))?;
        Ok(rating)
    }
}

fn valid_prefix_len(path: &Path) -> Result<u64, ServiceError> {
    let bytes = std::fs::read(path).map_err(ServiceError::Io)?;
    Ok(bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i as u64 + 1))
}
