//! Scripted reading sessions.
//!
//! A script is JSON Lines, one operation per line:
//!
//! ```text
//! {"op":"ingest","path":"bundles/a.json"}
//! {"op":"open","paper":"A","at_ms":0}
//! {"op":"scroll","paper":"A","fraction":0.4}
//! {"op":"card","reading":"A","cited":"C1"}
//! {"op":"save","reading":"A","marker":"m3"}
//! {"op":"save","paper":"C9"}
//! {"op":"set_window","window":5}
//! ```
//!
//! `at_ms` is relative to a fixed base instant; when omitted an operation
//! happens one second after the previous one. A scroll without `fraction`
//! draws one (to the hundredth) from the seeded generator. Blank lines and
//! lines starting with `#` are ignored.

use std::path::{Path, PathBuf};

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{EventBody, NewEvent, Progress, Timestamp};
use crate::citeparse::CitationKey;
use crate::corpus::PaperId;
use crate::engine::{Engine, EngineError};
use crate::usage::UsageStats;

/// 2024-01-01T00:00:00Z.
pub const BASE_EPOCH_SECS: i64 = 1_704_067_200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptOp {
    Ingest {
        path: PathBuf,
        #[serde(default)]
        at_ms: Option<u64>,
    },
    Open {
        paper: PaperId,
        #[serde(default)]
        at_ms: Option<u64>,
    },
    Scroll {
        paper: PaperId,
        #[serde(default)]
        fraction: Option<f64>,
        #[serde(default)]
        at_ms: Option<u64>,
    },
    Read {
        paper: PaperId,
        #[serde(default)]
        at_ms: Option<u64>,
    },
    Save {
        #[serde(default)]
        paper: Option<PaperId>,
        #[serde(default)]
        reading: Option<PaperId>,
        #[serde(default)]
        marker: Option<String>,
        #[serde(default)]
        cited: Option<PaperId>,
        #[serde(default)]
        at_ms: Option<u64>,
    },
    Unsave {
        paper: PaperId,
        #[serde(default)]
        at_ms: Option<u64>,
    },
    Delete {
        paper: PaperId,
        #[serde(default)]
        at_ms: Option<u64>,
    },
    Suppress {
        paper: PaperId,
        #[serde(default)]
        at_ms: Option<u64>,
    },
    Unsuppress {
        paper: PaperId,
        #[serde(default)]
        at_ms: Option<u64>,
    },
    Card {
        reading: PaperId,
        #[serde(default)]
        marker: Option<String>,
        #[serde(default)]
        cited: Option<PaperId>,
        #[serde(default)]
        at_ms: Option<u64>,
    },
    SetWindow {
        window: usize,
        #[serde(default)]
        at_ms: Option<u64>,
    },
}

impl ScriptOp {
    fn at_ms(&self) -> Option<u64> {
        match self {
            ScriptOp::Ingest { at_ms, .. }
            | ScriptOp::Open { at_ms, .. }
            | ScriptOp::Scroll { at_ms, .. }
            | ScriptOp::Read { at_ms, .. }
            | ScriptOp::Save { at_ms, .. }
            | ScriptOp::Unsave { at_ms, .. }
            | ScriptOp::Delete { at_ms, .. }
            | ScriptOp::Suppress { at_ms, .. }
            | ScriptOp::Unsuppress { at_ms, .. }
            | ScriptOp::Card { at_ms, .. }
            | ScriptOp::SetWindow { at_ms, .. } => *at_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionScript {
    /// (1-based line number, operation)
    pub ops: Vec<(usize, ScriptOp)>,
    /// Directory that relative ingest paths are resolved against.
    pub base_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("line {line}: {source}")]
    Engine { line: usize, source: EngineError },
    #[error("reading script: {0}")]
    Io(#[from] std::io::Error),
}

impl ScriptError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ScriptError::Invalid { line, .. } | ScriptError::Engine { line, .. } => Some(*line),
            ScriptError::Io(_) => None,
        }
    }
}

impl SessionScript {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ScriptError> {
        let mut ops = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let op: ScriptOp = serde_json::from_str(trimmed)
                .map_err(|e| ScriptError::Invalid { line: i + 1, message: e.to_string() })?;
            ops.push((i + 1, op));
        }
        Ok(Self { ops, base_dir: base_dir.into() })
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub operations: usize,
    pub events: usize,
    pub history: Vec<PaperId>,
    pub library: Vec<PaperId>,
    pub window: usize,
    pub stats: UsageStats,
}

/// Runs a script against `engine`, stopping at the first failing line.
pub fn run_script(engine: &mut Engine, script: &SessionScript, seed: u64) -> Result<SimulationSummary, ScriptError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Utc.timestamp_opt(BASE_EPOCH_SECS, 0).single().expect("valid base instant");
    let mut last_ms: Option<u64> = None;
    for (line, op) in &script.ops {
        let line = *line;
        let ms = match op.at_ms() {
            Some(ms) => ms,
            None => last_ms.map_or(0, |m| m + 1000),
        };
        if last_ms.is_some_and(|prev| ms < prev) {
            return Err(ScriptError::Invalid { line, message: format!("at_ms {ms} goes back in time") });
        }
        last_ms = Some(ms);
        let ts = base + Duration::milliseconds(ms as i64);
        apply_op(engine, op, ts, &script.base_dir, &mut rng).map_err(|source| ScriptError::Engine { line, source })?;
    }
    let state = engine.state();
    Ok(SimulationSummary {
        seed,
        operations: script.ops.len(),
        events: engine.events().len(),
        history: state.reading_history(state.window).into_iter().map(|h| h.paper_id).collect(),
        library: state.library().map(|(id, _)| id.clone()).collect(),
        window: state.window,
        stats: engine.usage(),
    })
}

fn marker_for(
    engine: &Engine,
    reading: &PaperId,
    marker: &Option<String>,
    cited: &Option<PaperId>,
) -> Result<(String, Option<CitationKey>), EngineError> {
    match (marker, cited) {
        (Some(m), _) => {
            let key = match cited {
                Some(c) => {
                    let doc = engine.document(reading)?;
                    let m_ref =
                        doc.parsed.marker(m).ok_or_else(|| EngineError::NotFound(format!("unknown marker {m}")))?;
                    doc.marker_targets(m_ref).into_iter().find(|(_, p)| p == c).map(|(k, _)| k)
                }
                None => None,
            };
            Ok((m.clone(), key))
        }
        (None, Some(c)) => {
            let doc = engine.document(reading)?;
            let m = doc
                .markers_citing(c)
                .next()
                .ok_or_else(|| EngineError::NotFound(format!("{reading} has no marker citing {c}")))?;
            let key = doc.marker_targets(m).into_iter().find(|(_, p)| p == c).map(|(k, _)| k);
            Ok((m.marker_id.clone(), key))
        }
        (None, None) => Err(EngineError::InvalidInput("card needs `marker` or `cited`".into())),
    }
}

fn apply_op(
    engine: &mut Engine,
    op: &ScriptOp,
    ts: Timestamp,
    base_dir: &Path,
    rng: &mut ChaCha8Rng,
) -> Result<(), EngineError> {
    let simple = |engine: &mut Engine, paper: &PaperId, body: EventBody| {
        engine.record_event(NewEvent::new(paper.clone(), body).at(ts)).map(|_| ())
    };
    match op {
        ScriptOp::Ingest { path, .. } => {
            let full = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
            let bytes =
                std::fs::read(&full).map_err(|e| EngineError::InvalidInput(format!("{}: {e}", full.display())))?;
            engine.ingest_bytes(&bytes).map(|_| ())
        }
        ScriptOp::Open { paper, .. } => simple(engine, paper, EventBody::Open),
        ScriptOp::Scroll { paper, fraction, .. } => {
            let fraction = match fraction {
                Some(f) => Progress::from_fraction(*f).map_err(EngineError::from)?,
                None => Progress::from_hundredths(rng.gen_range(0..=100)),
            };
            simple(engine, paper, EventBody::Scroll { fraction })
        }
        ScriptOp::Read { paper, .. } => simple(engine, paper, EventBody::MarkRead),
        ScriptOp::Save { paper, reading, marker, cited, .. } => match (reading, paper) {
            (Some(reading), _) => {
                let (m, key) = marker_for(engine, reading, marker, cited)?;
                engine.save_from_card(reading, &m, key.as_ref(), Some(ts)).map(|_| ())
            }
            (None, Some(paper)) => simple(engine, paper, EventBody::Save { provenance: None }),
            (None, None) => Err(EngineError::InvalidInput("save needs `paper` or `reading`".into())),
        },
        ScriptOp::Unsave { paper, .. } => simple(engine, paper, EventBody::Unsave),
        ScriptOp::Delete { paper, .. } => simple(engine, paper, EventBody::DeleteHistory),
        ScriptOp::Suppress { paper, .. } => simple(engine, paper, EventBody::SuppressHighlight),
        ScriptOp::Unsuppress { paper, .. } => simple(engine, paper, EventBody::UnsuppressHighlight),
        ScriptOp::Card { reading, marker, cited, .. } => {
            let (m, key) = marker_for(engine, reading, marker, cited)?;
            engine.open_card(reading, &m, key.as_ref(), Some(ts)).map(|_| ())
        }
        ScriptOp::SetWindow { window, .. } => engine
            .record_event(NewEvent::new(PaperId::default(), EventBody::SetWindow { window: *window }).at(ts))
            .map(|_| ()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_line_reports_its_number() {
        let err =
            SessionScript::parse("# comment\n{\"op\":\"open\",\"paper\":\"a\"}\n{\"op\":\"fly\"}\n", ".").unwrap_err();
        assert_eq!(err.line(), Some(3));
    }

    #[test]
    fn empty_script_gives_zero_stats() {
        let mut engine = Engine::in_memory();
        let script = SessionScript::parse("", ".").unwrap();
        let summary = run_script(&mut engine, &script, 7).unwrap();
        assert_eq!(summary.events, 0);
        assert_eq!(summary.stats.paper_opens, 0);
        assert_eq!(summary.stats.paper_saves.total, 0);
    }

    #[test]
    fn unknown_paper_aborts_with_line() {
        let mut engine = Engine::in_memory();
        let script = SessionScript::parse("\n{\"op\":\"open\",\"paper\":\"nope\"}", ".").unwrap();
        let err = run_script(&mut engine, &script, 0).unwrap_err();
        assert_eq!(err.line(), Some(2));
    }
}
