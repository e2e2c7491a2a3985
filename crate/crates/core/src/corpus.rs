//! Canonical paper identity: the metadata index, reference resolution and
//! citation statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::citeparse::{write_atomic, ReferenceEntry};
use crate::text::{normalize_title, title_tokens};

/// Minimum token-set Jaccard similarity for a fuzzy title match.
pub const FUZZY_THRESHOLD: f64 = 0.9;
/// Maximum year difference tolerated by exact and fuzzy matches.
pub const YEAR_TOLERANCE: i32 = 1;

const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PaperId(pub String);

impl PaperId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PaperId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PaperId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PaperMetadata {
    #[serde(default)]
    pub paper_id: PaperId,
    pub title: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub summary: Option<String>,
    /// Global citation count; when absent the local in-degree is used.
    #[serde(default)]
    pub citation_count: Option<u64>,
    #[serde(default)]
    pub reference_count: u64,
    #[serde(default)]
    pub outgoing_refs: Vec<PaperId>,
}

impl PaperMetadata {
    pub fn new(title: impl Into<String>, year: Option<i32>) -> Self {
        Self { title: title.into(), year, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    ExactNorm,
    Fuzzy,
    External,
    /// No match anywhere; the entry itself was registered as a new paper.
    Registered,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub paper_id: Option<PaperId>,
    pub confidence: f64,
    pub method: MatchMethod,
}

impl MatchResult {
    fn none() -> Self {
        Self { paper_id: None, confidence: 0.0, method: MatchMethod::None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CitationSource {
    Stored,
    InDegree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationStats {
    pub citation_count: u64,
    pub reference_count: u64,
    pub source: CitationSource,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),
    #[error("unknown paper {0}")]
    UnknownPaper(PaperId),
    #[error("corpus storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus file {path}: {source}")]
    Decode { path: PathBuf, source: serde_json::Error },
}

/// Request half of the external metadata wire contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupRequest {
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ClientError {
    #[error("metadata lookup timed out")]
    Timeout,
    #[error("metadata transport: {0}")]
    Transport(String),
}

/// Source of metadata for references the local corpus does not know.
pub trait MetadataClient: Send + Sync {
    fn lookup(&self, request: &LookupRequest) -> Result<Option<PaperMetadata>, ClientError>;
}

/// In-process client answering from a fixed table keyed by normalized title.
#[derive(Debug, Default, Clone)]
pub struct FixtureClient {
    records: BTreeMap<String, PaperMetadata>,
    failure: Option<ClientError>,
}

impl FixtureClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_record(mut self, meta: PaperMetadata) -> Self {
        self.records.insert(normalize_title(&meta.title), meta);
        self
    }

    /// Makes every lookup fail with `err`.
    pub fn failing(err: ClientError) -> Self {
        Self { records: BTreeMap::new(), failure: Some(err) }
    }
}

impl MetadataClient for FixtureClient {
    fn lookup(&self, request: &LookupRequest) -> Result<Option<PaperMetadata>, ClientError> {
        if let Some(err) = &self.failure {
            return Err(err.clone());
        }
        Ok(self.records.get(&normalize_title(&request.title)).cloned())
    }
}

/// What happened on an external lookup.
#[derive(Debug, Clone, PartialEq)]
pub enum ExternalOutcome {
    Found(PaperMetadata),
    NotFound,
    NotConfigured,
    Failed(ClientError),
}

/// Token-set Jaccard similarity of two normalized titles.
pub fn title_jaccard(a: &str, b: &str) -> f64 {
    let a: BTreeSet<String> = title_tokens(a).into_iter().collect();
    let b: BTreeSet<String> = title_tokens(b).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

fn years_compatible(a: Option<i32>, b: Option<i32>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= YEAR_TOLERANCE,
        _ => true,
    }
}

fn year_distance(a: Option<i32>, b: Option<i32>) -> i32 {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => YEAR_TOLERANCE + 1,
    }
}

fn index_key(title: &str, year: Option<i32>) -> String {
    match year {
        Some(y) => format!("{}|{y}", normalize_title(title)),
        None => format!("{}|", normalize_title(title)),
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id != "index"
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// The paper index. Optionally backed by a directory holding one JSON file per
/// paper plus `index.json`.
#[derive(Default, Clone)]
pub struct Corpus {
    papers: BTreeMap<PaperId, PaperMetadata>,
    index: BTreeMap<String, PaperId>,
    dir: Option<PathBuf>,
    client: Option<Arc<dyn MetadataClient>>,
}

impl fmt::Debug for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Corpus")
            .field("papers", &self.papers.len())
            .field("dir", &self.dir)
            .field("client", &self.client.is_some())
            .finish()
    }
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.papers == other.papers && self.index == other.index
    }
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads (or creates) a corpus persisted under `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, CorpusError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut corpus = Self { dir: Some(dir.clone()), ..Self::default() };
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .filter(|p| p.file_name().is_some_and(|n| n != INDEX_FILE))
            .collect();
        paths.sort();
        for path in paths {
            let bytes = fs::read(&path)?;
            let meta: PaperMetadata =
                serde_json::from_slice(&bytes).map_err(|source| CorpusError::Decode { path: path.clone(), source })?;
            corpus.index.insert(index_key(&meta.title, meta.year), meta.paper_id.clone());
            corpus.papers.insert(meta.paper_id.clone(), meta);
        }
        Ok(corpus)
    }

    /// An in-memory copy that no longer writes to disk.
    pub fn detached(&self) -> Self {
        Self { dir: None, ..self.clone() }
    }

    pub fn with_client(mut self, client: Arc<dyn MetadataClient>) -> Self {
        self.client = Some(client);
        self
    }

    pub fn set_client(&mut self, client: Option<Arc<dyn MetadataClient>>) {
        self.client = client;
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, id: &PaperId) -> Option<&PaperMetadata> {
        self.papers.get(id)
    }

    pub fn contains(&self, id: &PaperId) -> bool {
        self.papers.contains_key(id)
    }

    pub fn papers(&self) -> impl Iterator<Item = &PaperMetadata> {
        self.papers.values()
    }

    /// Id registered for a (title, year) pair.
    pub fn lookup(&self, title: &str, year: Option<i32>) -> Option<&PaperId> {
        self.index.get(&index_key(title, year))
    }

    /// Inserts or updates a paper. Upserting the same normalized title and
    /// year again updates the stored fields and returns the same id.
    pub fn upsert_paper(&mut self, mut meta: PaperMetadata) -> Result<PaperId, CorpusError> {
        if meta.title.trim().is_empty() {
            return Err(CorpusError::InvalidMetadata("title must not be empty".into()));
        }
        let key = index_key(&meta.title, meta.year);
        let id = if self.papers.contains_key(&meta.paper_id) {
            meta.paper_id.clone()
        } else if let Some(existing) = self.index.get(&key) {
            existing.clone()
        } else if !meta.paper_id.0.is_empty() {
            if !valid_id(&meta.paper_id.0) {
                return Err(CorpusError::InvalidMetadata(format!("invalid paper id {:?}", meta.paper_id.0)));
            }
            meta.paper_id.clone()
        } else {
            self.fresh_id(&key)
        };

        if let Some(old) = self.papers.get(&id) {
            let old_key = index_key(&old.title, old.year);
            if old_key != key {
                self.index.remove(&old_key);
            }
        }
        meta.paper_id = id.clone();
        let mut seen = BTreeSet::new();
        meta.outgoing_refs.retain(|r| seen.insert(r.clone()));
        meta.reference_count = meta.reference_count.max(meta.outgoing_refs.len() as u64);

        if let Some(dir) = &self.dir {
            write_atomic(&dir.join(format!("{id}.json")), &serde_json::to_vec_pretty(&meta).expect("serializes"))?;
        }
        self.index.insert(key, id.clone());
        self.papers.insert(id.clone(), meta);
        if let Some(dir) = &self.dir {
            write_atomic(&dir.join(INDEX_FILE), &serde_json::to_vec_pretty(&self.index).expect("serializes"))?;
        }
        Ok(id)
    }

    /// Moves a paper to a new id, rewriting references to it held by other
    /// papers. Fails if `to` is taken.
    pub fn rename_paper(&mut self, from: &PaperId, to: &PaperId) -> Result<(), CorpusError> {
        if self.papers.contains_key(to) {
            return Err(CorpusError::InvalidMetadata(format!("paper id {to} already exists")));
        }
        if !valid_id(&to.0) {
            return Err(CorpusError::InvalidMetadata(format!("invalid paper id {:?}", to.0)));
        }
        let mut meta = self.papers.remove(from).ok_or_else(|| CorpusError::UnknownPaper(from.clone()))?;
        meta.paper_id = to.clone();
        let key = index_key(&meta.title, meta.year);
        self.index.insert(key, to.clone());
        self.papers.insert(to.clone(), meta);
        let mut touched = vec![to.clone()];
        for p in self.papers.values_mut() {
            let mut changed = false;
            for r in p.outgoing_refs.iter_mut().filter(|r| *r == from) {
                *r = to.clone();
                changed = true;
            }
            if changed {
                touched.push(p.paper_id.clone());
            }
        }
        if let Some(dir) = &self.dir {
            for id in &touched {
                write_atomic(
                    &dir.join(format!("{id}.json")),
                    &serde_json::to_vec_pretty(&self.papers[id]).expect("serializes"),
                )?;
            }
            match fs::remove_file(dir.join(format!("{from}.json"))) {
                Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e.into()),
                _ => {}
            }
            write_atomic(&dir.join(INDEX_FILE), &serde_json::to_vec_pretty(&self.index).expect("serializes"))?;
        }
        Ok(())
    }

    fn fresh_id(&self, key: &str) -> PaperId {
        let base = format!("p{}", &hex::encode(Sha256::digest(key.as_bytes()))[..16]);
        let mut id = PaperId(base.clone());
        let mut n = 2;
        while self.papers.contains_key(&id) {
            id = PaperId(format!("{base}-{n}"));
            n += 1;
        }
        id
    }

    /// Local-only resolution: exact normalized title, then fuzzy.
    pub fn resolve_local(&self, entry: &ReferenceEntry) -> MatchResult {
        let norm = normalize_title(&entry.title_guess);
        if norm.is_empty() {
            return MatchResult::none();
        }
        let exact = self
            .papers
            .values()
            .filter(|p| normalize_title(&p.title) == norm && years_compatible(p.year, entry.year_guess))
            .min_by(|a, b| {
                year_distance(a.year, entry.year_guess)
                    .cmp(&year_distance(b.year, entry.year_guess))
                    .then_with(|| a.paper_id.cmp(&b.paper_id))
            });
        if let Some(p) = exact {
            return MatchResult { paper_id: Some(p.paper_id.clone()), confidence: 1.0, method: MatchMethod::ExactNorm };
        }
        let mut best: Option<(f64, &PaperId)> = None;
        for p in self.papers.values() {
            if !years_compatible(p.year, entry.year_guess) {
                continue;
            }
            let j = title_jaccard(&norm, &p.title);
            if j >= FUZZY_THRESHOLD && best.is_none_or(|(bj, _)| j > bj) {
                best = Some((j, &p.paper_id));
            }
        }
        match best {
            Some((j, id)) => MatchResult { paper_id: Some(id.clone()), confidence: j, method: MatchMethod::Fuzzy },
            None => MatchResult::none(),
        }
    }

    /// Resolves a reference entry to a paper id, consulting the external
    /// client when local matching fails.
    pub fn resolve_entry(&mut self, entry: &ReferenceEntry) -> MatchResult {
        let local = self.resolve_local(entry);
        if local.paper_id.is_some() || entry.title_guess.trim().is_empty() {
            return local;
        }
        match self.fetch_external(entry) {
            Some(meta) => MatchResult { paper_id: Some(meta.paper_id), confidence: 1.0, method: MatchMethod::External },
            None => MatchResult::none(),
        }
    }

    /// Asks the external client about an entry; hits are upserted. Failures
    /// are logged and reported as `None`.
    pub fn fetch_external(&mut self, entry: &ReferenceEntry) -> Option<PaperMetadata> {
        match self.fetch_external_outcome(entry) {
            ExternalOutcome::Found(meta) => Some(meta),
            _ => None,
        }
    }

    pub fn fetch_external_outcome(&mut self, entry: &ReferenceEntry) -> ExternalOutcome {
        let Some(client) = self.client.clone() else {
            return ExternalOutcome::NotConfigured;
        };
        let request = LookupRequest { title: entry.title_guess.clone(), year: entry.year_guess };
        match client.lookup(&request) {
            Ok(Some(meta)) => match self.upsert_paper(meta) {
                Ok(id) => ExternalOutcome::Found(self.papers[&id].clone()),
                Err(e) => {
                    tracing::warn!(title = %request.title, error = %e, "external metadata rejected");
                    ExternalOutcome::Failed(ClientError::Transport(e.to_string()))
                }
            },
            Ok(None) => ExternalOutcome::NotFound,
            Err(e) => {
                tracing::warn!(title = %request.title, error = %e, "external metadata lookup failed");
                ExternalOutcome::Failed(e)
            }
        }
    }

    /// Number of corpus papers whose outgoing references include `id`.
    pub fn in_degree(&self, id: &PaperId) -> u64 {
        self.papers.values().filter(|p| p.outgoing_refs.contains(id)).count() as u64
    }

    pub fn citation_stats(&self, id: &PaperId) -> Result<CitationStats, CorpusError> {
        let meta = self.papers.get(id).ok_or_else(|| CorpusError::UnknownPaper(id.clone()))?;
        let (citation_count, source) = match meta.citation_count {
            Some(c) => (c, CitationSource::Stored),
            None => (self.in_degree(id), CitationSource::InDegree),
        };
        Ok(CitationStats { citation_count, reference_count: meta.reference_count, source })
    }
}
