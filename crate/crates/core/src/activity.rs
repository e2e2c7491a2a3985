//! Append-only log of reader activity and the state folded from it.
//!
//! Every augmentation is derived from [`ActivityState`], which is a pure fold
//! over [`ActivityEvent`]s. The live store applies each event as it is
//! appended; [`replay`] recomputes the same state from scratch.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::augment::AugmentationClass;
use crate::corpus::PaperId;

pub type Timestamp = DateTime<Utc>;

pub const DEFAULT_WINDOW: usize = 20;
pub const MIN_WINDOW: usize = 1;
pub const MAX_WINDOW: usize = 50;

#[derive(Debug, Error)]
pub enum ActivityError {
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("event log: {0}")]
    Io(#[from] io::Error),
}

/// Reading progress in hundredths, so sums of progress values stay exact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Progress(u8);

impl Progress {
    pub const ZERO: Progress = Progress(0);
    pub const FULL: Progress = Progress(100);

    /// Rounds a fraction in [0, 1] to two decimals.
    pub fn from_fraction(f: f64) -> Result<Self, ActivityError> {
        if !f.is_finite() || !(0.0..=1.0).contains(&f) {
            return Err(ActivityError::InvalidEvent(format!("scroll fraction {f} outside [0, 1]")));
        }
        Ok(Progress((f * 100.0).round() as u8))
    }

    pub fn from_hundredths(h: u8) -> Self {
        Progress(h.min(100))
    }

    pub fn hundredths(self) -> u8 {
        self.0
    }

    pub fn fraction(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl Serialize for Progress {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.fraction())
    }
}

impl<'de> Deserialize<'de> for Progress {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let f = f64::deserialize(d)?;
        Progress::from_fraction(f).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_paper_id: PaperId,
    pub citing_sentence: String,
    pub saved_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Open,
    Scroll,
    MarkRead,
    Save,
    Unsave,
    DeleteHistory,
    SuppressHighlight,
    UnsuppressHighlight,
    CardOpen,
    SetWindow,
}

impl EventKind {
    fn needs_paper(self) -> bool {
        self != EventKind::SetWindow
    }
}

/// Kind-specific part of an event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventBody {
    Open,
    Scroll { fraction: Progress },
    MarkRead,
    Save { provenance: Option<Provenance> },
    Unsave,
    DeleteHistory,
    SuppressHighlight,
    UnsuppressHighlight,
    CardOpen { reading_paper_id: PaperId, class: AugmentationClass },
    SetWindow { window: usize },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::Open => EventKind::Open,
            EventBody::Scroll { .. } => EventKind::Scroll,
            EventBody::MarkRead => EventKind::MarkRead,
            EventBody::Save { .. } => EventKind::Save,
            EventBody::Unsave => EventKind::Unsave,
            EventBody::DeleteHistory => EventKind::DeleteHistory,
            EventBody::SuppressHighlight => EventKind::SuppressHighlight,
            EventBody::UnsuppressHighlight => EventKind::UnsuppressHighlight,
            EventBody::CardOpen { .. } => EventKind::CardOpen,
            EventBody::SetWindow { .. } => EventKind::SetWindow,
        }
    }

    fn payload(&self) -> Value {
        match self {
            EventBody::Scroll { fraction } => json!({ "fraction": fraction }),
            EventBody::Save { provenance: Some(p) } => json!({ "provenance": p }),
            EventBody::CardOpen { reading_paper_id, class } => {
                json!({ "reading_paper_id": reading_paper_id, "class": class })
            }
            EventBody::SetWindow { window } => json!({ "window": window }),
            _ => Value::Null,
        }
    }
}

/// An event as it travels over the wire and sits in the log. `seq` and `ts`
/// are optional on submission and always present once stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<Timestamp>,
    pub kind: EventKind,
    #[serde(default)]
    pub paper_id: Option<PaperId>,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Deserialize)]
struct ScrollPayload {
    fraction: f64,
}

#[derive(Deserialize)]
struct WireProvenance {
    source_paper_id: PaperId,
    citing_sentence: String,
    #[serde(default)]
    saved_at: Option<Timestamp>,
}

#[derive(Deserialize)]
struct SavePayload {
    #[serde(default)]
    provenance: Option<WireProvenance>,
}

#[derive(Deserialize)]
struct CardOpenPayload {
    reading_paper_id: PaperId,
    class: AugmentationClass,
}

#[derive(Deserialize)]
struct WindowPayload {
    window: usize,
}

fn payload<T: serde::de::DeserializeOwned>(kind: EventKind, v: &Value) -> Result<T, ActivityError> {
    T::deserialize(v).map_err(|e| ActivityError::InvalidEvent(format!("{kind:?} payload: {e}")))
}

pub fn validate_window(window: usize) -> Result<usize, ActivityError> {
    if (MIN_WINDOW..=MAX_WINDOW).contains(&window) {
        Ok(window)
    } else {
        Err(ActivityError::InvalidEvent(format!("window {window} outside {MIN_WINDOW}..={MAX_WINDOW}")))
    }
}

impl EventRecord {
    pub fn new(kind: EventKind, paper_id: impl Into<PaperId>, payload: Value) -> Self {
        Self { seq: None, ts: None, kind, paper_id: Some(paper_id.into()), payload }
    }

    /// Validates the record into a typed event; `ts` defaults to `now`.
    pub fn into_new_event(self, now: Timestamp) -> Result<NewEvent, ActivityError> {
        let ts = self.ts.unwrap_or(now);
        let paper_id = match (self.paper_id, self.kind.needs_paper()) {
            (Some(p), _) if !p.0.is_empty() => p,
            (_, false) => PaperId::default(),
            _ => return Err(ActivityError::InvalidEvent(format!("{:?} requires a paper_id", self.kind))),
        };
        let body = match self.kind {
            EventKind::Open => EventBody::Open,
            EventKind::Scroll => {
                let p: ScrollPayload = payload(self.kind, &self.payload)?;
                EventBody::Scroll { fraction: Progress::from_fraction(p.fraction)? }
            }
            EventKind::MarkRead => EventBody::MarkRead,
            EventKind::Save => {
                let p: SavePayload = if self.payload.is_null() {
                    SavePayload { provenance: None }
                } else {
                    payload(self.kind, &self.payload)?
                };
                let provenance = match p.provenance {
                    Some(w) if w.citing_sentence.trim().is_empty() => {
                        return Err(ActivityError::InvalidEvent("provenance citing_sentence is empty".into()))
                    }
                    Some(w) => Some(Provenance {
                        source_paper_id: w.source_paper_id,
                        citing_sentence: w.citing_sentence,
                        saved_at: w.saved_at.unwrap_or(ts),
                    }),
                    None => None,
                };
                EventBody::Save { provenance }
            }
            EventKind::Unsave => EventBody::Unsave,
            EventKind::DeleteHistory => EventBody::DeleteHistory,
            EventKind::SuppressHighlight => EventBody::SuppressHighlight,
            EventKind::UnsuppressHighlight => EventBody::UnsuppressHighlight,
            EventKind::CardOpen => {
                let p: CardOpenPayload = payload(self.kind, &self.payload)?;
                EventBody::CardOpen { reading_paper_id: p.reading_paper_id, class: p.class }
            }
            EventKind::SetWindow => {
                let p: WindowPayload = payload(self.kind, &self.payload)?;
                EventBody::SetWindow { window: validate_window(p.window)? }
            }
        };
        Ok(NewEvent { ts: Some(ts), paper_id, body })
    }
}

/// An event before the store assigns its sequence number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewEvent {
    pub ts: Option<Timestamp>,
    pub paper_id: PaperId,
    pub body: EventBody,
}

impl NewEvent {
    pub fn new(paper_id: impl Into<PaperId>, body: EventBody) -> Self {
        Self { ts: None, paper_id: paper_id.into(), body }
    }

    pub fn at(mut self, ts: Timestamp) -> Self {
        self.ts = Some(ts);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EventRecord", into = "EventRecord")]
pub struct ActivityEvent {
    pub seq: u64,
    pub ts: Timestamp,
    pub paper_id: PaperId,
    pub body: EventBody,
}

impl ActivityEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }
}

impl From<ActivityEvent> for EventRecord {
    fn from(e: ActivityEvent) -> Self {
        let payload = e.body.payload();
        EventRecord {
            seq: Some(e.seq),
            ts: Some(e.ts),
            kind: e.body.kind(),
            paper_id: (e.body.kind().needs_paper() || !e.paper_id.0.is_empty()).then_some(e.paper_id),
            payload,
        }
    }
}

impl TryFrom<EventRecord> for ActivityEvent {
    type Error = ActivityError;

    fn try_from(r: EventRecord) -> Result<Self, Self::Error> {
        let seq = r.seq.ok_or_else(|| ActivityError::InvalidEvent("stored event without seq".into()))?;
        let ts = r.ts.ok_or_else(|| ActivityError::InvalidEvent("stored event without ts".into()))?;
        let e = r.into_new_event(ts)?;
        Ok(ActivityEvent { seq, ts, paper_id: e.paper_id, body: e.body })
    }
}
/// Per-paper activity folded from the log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperActivity {
    /// Opened at least once since the last history deletion.
    pub in_history: bool,
    pub last_open_seq: u64,
    pub last_opened: Option<Timestamp>,
    /// Maximum scroll position, forced to 1.0 by mark_read.
    pub progress: Progress,
    pub saved: bool,
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityState {
    pub last_seq: u64,
    pub papers: BTreeMap<PaperId, PaperActivity>,
    pub suppressed: BTreeSet<PaperId>,
    pub window: usize,
}

impl Default for ActivityState {
    fn default() -> Self {
        Self { last_seq: 0, papers: BTreeMap::new(), suppressed: BTreeSet::new(), window: DEFAULT_WINDOW }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub paper_id: PaperId,
    pub last_opened: Option<Timestamp>,
    pub progress: Progress,
    pub saved: bool,
}

impl ActivityState {
    pub fn apply(&mut self, event: &ActivityEvent) {
        self.last_seq = event.seq;
        let pid = &event.paper_id;
        match &event.body {
            EventBody::Open => {
                let p = self.papers.entry(pid.clone()).or_default();
                p.in_history = true;
                p.last_open_seq = event.seq;
                p.last_opened = Some(event.ts);
            }
            EventBody::Scroll { fraction } => {
                let p = self.papers.entry(pid.clone()).or_default();
                p.progress = p.progress.max(*fraction);
            }
            EventBody::MarkRead => {
                self.papers.entry(pid.clone()).or_default().progress = Progress::FULL;
            }
            EventBody::Save { provenance } => {
                let p = self.papers.entry(pid.clone()).or_default();
                if !p.saved {
                    p.saved = true;
                    p.provenance = provenance.clone();
                }
            }
            EventBody::Unsave => {
                if let Some(p) = self.papers.get_mut(pid) {
                    p.saved = false;
                    p.provenance = None;
                }
            }
            EventBody::DeleteHistory => {
                if let Some(p) = self.papers.get_mut(pid) {
                    p.in_history = false;
                    p.last_open_seq = 0;
                    p.last_opened = None;
                    p.progress = Progress::ZERO;
                }
            }
            EventBody::SuppressHighlight => {
                self.suppressed.insert(pid.clone());
            }
            EventBody::UnsuppressHighlight => {
                self.suppressed.remove(pid);
            }
            EventBody::CardOpen { .. } => {}
            EventBody::SetWindow { window } => self.window = *window,
        }
    }

    pub fn paper(&self, id: &PaperId) -> Option<&PaperActivity> {
        self.papers.get(id)
    }

    /// Opened and not deleted since.
    pub fn is_visited(&self, id: &PaperId) -> bool {
        self.papers.get(id).is_some_and(|p| p.in_history)
    }

    pub fn is_saved(&self, id: &PaperId) -> bool {
        self.papers.get(id).is_some_and(|p| p.saved)
    }

    pub fn is_suppressed(&self, id: &PaperId) -> bool {
        self.suppressed.contains(id)
    }

    /// The `window` most recently opened papers, newest first.
    pub fn reading_history(&self, window: usize) -> Vec<HistoryEntry> {
        let mut open: Vec<(&PaperId, &PaperActivity)> = self.papers.iter().filter(|(_, p)| p.in_history).collect();
        open.sort_by_key(|(_, p)| std::cmp::Reverse(p.last_open_seq));
        open.into_iter()
            .take(window)
            .map(|(id, p)| HistoryEntry {
                paper_id: id.clone(),
                last_opened: p.last_opened,
                progress: p.progress,
                saved: p.saved,
            })
            .collect()
    }

    /// (progress, saved); progress is zero for papers not in the history.
    pub fn engagement(&self, id: &PaperId) -> (Progress, bool) {
        match self.papers.get(id) {
            Some(p) => (if p.in_history { p.progress } else { Progress::ZERO }, p.saved),
            None => (Progress::ZERO, false),
        }
    }

    pub fn library(&self) -> impl Iterator<Item = (&PaperId, &PaperActivity)> {
        self.papers.iter().filter(|(_, p)| p.saved)
    }

    pub fn provenance(&self, id: &PaperId) -> Option<&Provenance> {
        self.papers.get(id).filter(|p| p.saved).and_then(|p| p.provenance.as_ref())
    }
}

/// Folds a complete event sequence into state.
pub fn replay<'a>(events: impl IntoIterator<Item = &'a ActivityEvent>) -> ActivityState {
    let mut state = ActivityState::default();
    for e in events {
        state.apply(e);
    }
    state
}

/// Where and why log recovery stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptLog {
    /// 1-based line number of the first bad line.
    pub line: usize,
    pub last_valid_seq: u64,
    pub message: String,
    /// Bytes dropped from the end of the log.
    pub dropped_bytes: u64,
}

/// Result of reading a log: the valid prefix and, if the tail was bad, a report.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRead {
    pub events: Vec<ActivityEvent>,
    pub corruption: Option<CorruptLog>,
    /// Byte length of the valid prefix.
    pub valid_len: u64,
}

/// Parses newline-delimited events, stopping at the first malformed line or
/// sequence regression.
pub fn read_log(reader: impl io::Read) -> io::Result<LogRead> {
    let mut reader = BufReader::new(reader);
    let mut events: Vec<ActivityEvent> = Vec::new();
    let mut valid_len = 0u64;
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            return Ok(LogRead { events, corruption: None, valid_len });
        }
        line_no += 1;
        let complete = buf.ends_with(b"\n");
        let text = String::from_utf8_lossy(&buf);
        if text.trim().is_empty() && complete {
            valid_len += n as u64;
            continue;
        }
        let last_valid_seq = events.last().map_or(0, |e| e.seq);
        let parsed = if complete {
            serde_json::from_str::<ActivityEvent>(text.trim()).map_err(|e| e.to_string())
        } else {
            Err("truncated final line".to_owned())
        };
        let failure = match parsed {
            Ok(e) if e.seq <= last_valid_seq => Some(format!("sequence {} after {}", e.seq, last_valid_seq)),
            Ok(e) => {
                events.push(e);
                valid_len += n as u64;
                None
            }
            Err(msg) => Some(msg),
        };
        if let Some(message) = failure {
            let mut rest = n as u64;
            let mut sink = Vec::new();
            rest += io::Read::read_to_end(&mut reader, &mut sink)? as u64;
            return Ok(LogRead {
                events,
                corruption: Some(CorruptLog { line: line_no, last_valid_seq, message, dropped_bytes: rest }),
                valid_len,
            });
        }
    }
}

/// The live store: an in-memory event list and state, optionally mirrored to
/// an append-only file that is synced before `append` returns.
#[derive(Debug)]
pub struct ActivityStore {
    path: Option<PathBuf>,
    file: Option<File>,
    events: Vec<ActivityEvent>,
    state: ActivityState,
}

impl Default for ActivityStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl ActivityStore {
    pub fn in_memory() -> Self {
        Self { path: None, file: None, events: Vec::new(), state: ActivityState::default() }
    }

    /// Opens or creates the log at `path`. A corrupt tail is cut off (and kept
    /// next to the log as `<name>.corrupt`) and reported.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Option<CorruptLog>), ActivityError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let read = match File::open(&path) {
            Ok(f) => read_log(f)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                LogRead { events: Vec::new(), corruption: None, valid_len: 0 }
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(c) = &read.corruption {
            let bytes = fs::read(&path)?;
            let mut tail_path = path.clone().into_os_string();
            tail_path.push(".corrupt");
            fs::write(&tail_path, &bytes[read.valid_len as usize..])?;
            let f = OpenOptions::new().write(true).open(&path)?;
            f.set_len(read.valid_len)?;
            f.sync_all()?;
            tracing::warn!(line = c.line, last_valid_seq = c.last_valid_seq, message = %c.message, "event log tail dropped");
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let state = replay(&read.events);
        Ok((Self { path: Some(path), file: Some(file), events: read.events, state }, read.corruption))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn state(&self) -> &ActivityState {
        &self.state
    }

    pub fn events(&self) -> &[ActivityEvent] {
        &self.events
    }

    pub fn next_seq(&self) -> u64 {
        self.state.last_seq + 1
    }

    /// Validates, assigns the next sequence number, persists and applies.
    pub fn append(&mut self, event: NewEvent) -> Result<u64, ActivityError> {
        if let EventBody::Scroll { fraction } = &event.body {
            if fraction.hundredths() > 100 {
                return Err(ActivityError::InvalidEvent("scroll fraction above 1".into()));
            }
        }
        if let EventBody::SetWindow { window } = &event.body {
            validate_window(*window)?;
        }
        if let EventBody::Save { provenance: Some(p) } = &event.body {
            if p.citing_sentence.trim().is_empty() {
                return Err(ActivityError::InvalidEvent("provenance citing_sentence is empty".into()));
            }
        }
        if event.body.kind().needs_paper() && event.paper_id.0.is_empty() {
            return Err(ActivityError::InvalidEvent("event requires a paper_id".into()));
        }
        let stored = ActivityEvent {
            seq: self.next_seq(),
            ts: event.ts.unwrap_or_else(Utc::now),
            paper_id: event.paper_id,
            body: event.body,
        };
        if let Some(file) = self.file.as_mut() {
            let mut line = serde_json::to_vec(&stored).expect("event serializes");
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_data()?;
        }
        self.state.apply(&stored);
        self.events.push(stored);
        Ok(self.state.last_seq)
    }

    /// Validates a wire record and appends it.
    pub fn append_record(&mut self, record: EventRecord) -> Result<u64, ActivityError> {
        if let Some(seq) = record.seq {
            if seq != self.next_seq() {
                return Err(ActivityError::InvalidEvent(format!(
                    "client seq {seq} does not match next seq {}",
                    self.next_seq()
                )));
            }
        }
        let event = record.into_new_event(Utc::now())?;
        self.append(event)
    }
}
