//! One facade over parsing, the corpus, the activity log and the derived
//! views. The server and the command-line tool both go through it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{
    validate_window, ActivityError, ActivityEvent, ActivityState, ActivityStore, CorruptLog, EventBody, EventRecord,
    NewEvent, Progress, Provenance, Timestamp, MAX_WINDOW,
};
use crate::augment::{
    AugmentationClass, AugmentationDecoration, AugmentationType, Augmenter, OverviewStats, ReencounterScore,
    TypeToggles, UserProfile,
};
use crate::cards::{CardBuilder, CardError, DegradedCard, FirstSentenceSummarizer, PaperCard, Summarizer};
use crate::citeparse::{
    write_atomic, CitationKey, CitationMarker, DocumentBundle, ParseCache, ParseError, ParseReport, ParsedDocument,
    Section, SentenceSpan,
};
use crate::corpus::{Corpus, CorpusError, MatchMethod, MatchResult, MetadataClient, PaperId, PaperMetadata};
use crate::document::{EntryResolution, ResolvedDocument};
use crate::strategies::{
    document_text, paper_text, pool_topk, EmbeddingProvider, LexicalProvider, PoolInput, SectionFilter, StrategyReport,
};
use crate::usage::{usage_stats, UsageStats};

pub const SCHEMA_VERSION: u32 = 1;

const EVENTS_FILE: &str = "events.jsonl";
const SETTINGS_FILE: &str = "settings.json";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::NotFound(_) => "not_found",
            EngineError::InvalidInput(_) => "invalid_input",
            EngineError::Conflict(_) => "conflict",
            EngineError::Internal(_) => "internal",
        }
    }
}

impl From<ActivityError> for EngineError {
    fn from(e: ActivityError) -> Self {
        match e {
            ActivityError::InvalidEvent(m) => EngineError::InvalidInput(m),
            other => EngineError::Internal(other.to_string()),
        }
    }
}

impl From<CorpusError> for EngineError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidMetadata(m) => EngineError::InvalidInput(m),
            CorpusError::UnknownPaper(p) => EngineError::NotFound(format!("unknown paper {p}")),
            other => EngineError::Internal(other.to_string()),
        }
    }
}

impl From<ParseError> for EngineError {
    fn from(e: ParseError) -> Self {
        EngineError::InvalidInput(e.to_string())
    }
}

impl From<std::io::Error> for EngineError {
    fn from(e: std::io::Error) -> Self {
        EngineError::Internal(e.to_string())
    }
}

impl From<CardError> for EngineError {
    fn from(e: CardError) -> Self {
        match e {
            CardError::UnresolvedCitation(d) => {
                EngineError::Conflict(format!("marker {} does not resolve to a known paper", d.marker_id))
            }
            other => EngineError::NotFound(other.to_string()),
        }
    }
}

/// Persisted preferences. The history window lives in the event log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct StoredSettings {
    #[serde(default)]
    type_toggles: TypeToggles,
    #[serde(default)]
    own_papers: BTreeSet<PaperId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settings {
    pub window_size: usize,
    pub type_toggles: TypeToggles,
    pub own_papers: BTreeSet<PaperId>,
}

/// Partial update; absent fields are left alone.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsUpdate {
    #[serde(default)]
    pub window_size: Option<usize>,
    #[serde(default)]
    pub type_toggles: Option<BTreeMap<AugmentationType, bool>>,
    #[serde(default)]
    pub own_papers: Option<BTreeSet<PaperId>>,
}

/// Which embedding source the strategy harness uses.
#[derive(Clone, Default)]
pub enum ProviderChoice {
    /// tf-idf fitted on the corpus at call time.
    #[default]
    Lexical,
    External(Arc<dyn EmbeddingProvider>),
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionSummary {
    pub entries: usize,
    pub exact_norm: usize,
    pub fuzzy: usize,
    pub external: usize,
    pub registered: usize,
    pub unresolved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub paper_id: PaperId,
    pub content_hash: String,
    pub parse_report: ParseReport,
    pub resolution: ResolutionSummary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// A distinct cited paper with its undecorated class, for list views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitedPaper {
    pub paper_id: PaperId,
    pub title: String,
    pub class: AugmentationClass,
    pub score: Option<ReencounterScore>,
    pub marker_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedView {
    pub paper_id: PaperId,
    pub title: String,
    pub window: usize,
    pub type_toggles: TypeToggles,
    pub sections: Vec<Section>,
    pub sentences: Vec<SentenceSpan>,
    pub markers: Vec<CitationMarker>,
    pub decorations: Vec<AugmentationDecoration>,
    pub overview: OverviewStats,
    /// Sorted by score, highest first; ties by id.
    pub citations: Vec<CitedPaper>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CardOutcome {
    Card(Box<PaperCard>),
    Degraded(DegradedCard),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryItem {
    pub paper_id: PaperId,
    pub title: String,
    pub last_opened: Option<Timestamp>,
    pub progress: Progress,
    pub saved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryItem {
    pub paper_id: PaperId,
    pub title: String,
    pub saved_from: Option<Provenance>,
    pub saved_from_title: Option<String>,
}

pub struct Engine {
    dir: Option<PathBuf>,
    corpus: Corpus,
    documents: BTreeMap<PaperId, ResolvedDocument>,
    store: ActivityStore,
    settings: StoredSettings,
    cache: Option<ParseCache>,
    summarizer: Box<dyn Summarizer>,
    provider: ProviderChoice,
    card_similarity: bool,
    register_unresolved: bool,
    recovery: Option<CorruptLog>,
}

impl Default for Engine {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Engine {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            corpus: Corpus::new(),
            documents: BTreeMap::new(),
            store: ActivityStore::in_memory(),
            settings: StoredSettings::default(),
            cache: None,
            summarizer: Box::new(FirstSentenceSummarizer),
            provider: ProviderChoice::Lexical,
            card_similarity: false,
            register_unresolved: true,
            recovery: None,
        }
    }

    /// Opens (or creates) a data directory. A damaged event-log tail is cut
    /// off and reported through [`Engine::recovery`].
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, EngineError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let corpus = Corpus::open(dir.join("corpus"))?;
        let docs_dir = dir.join("documents");
        fs::create_dir_all(&docs_dir)?;
        let mut documents = BTreeMap::new();
        for entry in fs::read_dir(&docs_dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|x| x != "json") {
                continue;
            }
            let doc: ResolvedDocument = serde_json::from_slice(&fs::read(&path)?)
                .map_err(|e| EngineError::Internal(format!("{}: {e}", path.display())))?;
            documents.insert(doc.paper_id.clone(), doc);
        }
        let (store, recovery) = ActivityStore::open(dir.join(EVENTS_FILE))?;
        let settings = match fs::read(dir.join(SETTINGS_FILE)) {
            Ok(bytes) => {
                serde_json::from_slice(&bytes).map_err(|e| EngineError::Internal(format!("{SETTINGS_FILE}: {e}")))?
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoredSettings::default(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            cache: Some(ParseCache::new(dir.join("cache"))),
            dir: Some(dir),
            corpus,
            documents,
            store,
            settings,
            recovery,
            ..Self::in_memory()
        })
    }

    /// In-memory copy of the corpus, documents and settings with an empty
    /// activity log.
    pub fn detached(&self) -> Self {
        Self {
            corpus: self.corpus.detached(),
            documents: self.documents.clone(),
            settings: self.settings.clone(),
            provider: self.provider.clone(),
            card_similarity: self.card_similarity,
            register_unresolved: self.register_unresolved,
            ..Self::in_memory()
        }
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn recovery(&self) -> Option<&CorruptLog> {
        self.recovery.as_ref()
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn state(&self) -> &ActivityState {
        self.store.state()
    }

    pub fn events(&self) -> &[ActivityEvent] {
        self.store.events()
    }

    pub fn documents(&self) -> &BTreeMap<PaperId, ResolvedDocument> {
        &self.documents
    }

    pub fn document(&self, id: &PaperId) -> Result<&ResolvedDocument, EngineError> {
        self.documents.get(id).ok_or_else(|| EngineError::NotFound(format!("unknown document {id}")))
    }

    pub fn set_metadata_client(&mut self, client: Option<Arc<dyn MetadataClient>>) {
        self.corpus.set_client(client);
    }

    pub fn set_summarizer(&mut self, summarizer: Box<dyn Summarizer>) {
        self.summarizer = summarizer;
    }

    pub fn set_provider(&mut self, provider: ProviderChoice) {
        self.provider = provider;
    }

    /// Shows embedding similarity on cards (uses the configured provider).
    pub fn set_card_similarity(&mut self, on: bool) {
        self.card_similarity = on;
    }

    /// Whether reference entries that match nothing become papers of their
    /// own, so that later documents citing them can be linked.
    pub fn set_register_unresolved(&mut self, on: bool) {
        self.register_unresolved = on;
    }

    /// Adds corpus metadata directly.
    pub fn upsert_paper(&mut self, meta: PaperMetadata) -> Result<PaperId, EngineError> {
        Ok(self.corpus.upsert_paper(meta)?)
    }

    pub fn ingest_bytes(&mut self, bytes: &[u8]) -> Result<IngestOutcome, EngineError> {
        let bundle = DocumentBundle::from_json_bytes(bytes)?;
        self.ingest(bundle)
    }

    /// Parses a bundle, resolves its references and records the document.
    /// Ingesting identical content again is a no-op returning the same id.
    pub fn ingest(&mut self, bundle: DocumentBundle) -> Result<IngestOutcome, EngineError> {
        let parsed = match &self.cache {
            Some(cache) => cache.parse(&bundle)?,
            None => crate::citeparse::parse_bundle(&bundle),
        };
        let mut resolutions = Vec::with_capacity(parsed.entries.len());
        let mut summary = ResolutionSummary {
            entries: parsed.entries.len(),
            exact_norm: 0,
            fuzzy: 0,
            external: 0,
            registered: 0,
            unresolved: 0,
        };
        for entry in &parsed.entries {
            let mut result = self.corpus.resolve_entry(entry);
            if result.paper_id.is_none() && self.register_unresolved && !entry.title_guess.trim().is_empty() {
                let mut stub = PaperMetadata::new(entry.title_guess.clone(), entry.year_guess);
                stub.authors = entry.authors_guess.clone();
                if let Ok(id) = self.corpus.upsert_paper(stub) {
                    result = MatchResult { paper_id: Some(id), confidence: 1.0, method: MatchMethod::Registered };
                }
            }
            match result.method {
                MatchMethod::ExactNorm => summary.exact_norm += 1,
                MatchMethod::Fuzzy => summary.fuzzy += 1,
                MatchMethod::External => summary.external += 1,
                MatchMethod::Registered => summary.registered += 1,
                MatchMethod::None => summary.unresolved += 1,
            }
            resolutions.push(EntryResolution { entry_key: entry.entry_key.clone(), result });
        }

        let mut warnings = Vec::new();
        let paper_id = self.register_document_paper(&parsed, &mut resolutions, &mut warnings)?;
        let doc = ResolvedDocument { paper_id: paper_id.clone(), parsed, resolutions };
        if let Some(dir) = &self.dir {
            let path = dir.join("documents").join(format!("{paper_id}.json"));
            write_atomic(&path, &serde_json::to_vec(&doc).expect("document serializes"))?;
        }
        let outcome = IngestOutcome {
            paper_id: paper_id.clone(),
            content_hash: doc.parsed.bundle.content_hash.clone(),
            parse_report: doc.parsed.report.clone(),
            resolution: summary,
            warnings,
        };
        tracing::info!(paper = %paper_id, markers = outcome.parse_report.markers, "ingested");
        self.documents.insert(paper_id, doc);
        Ok(outcome)
    }

    /// Creates or updates the corpus record of the ingested document itself,
    /// keeping stored fields the bundle does not provide.
    fn register_document_paper(
        &mut self,
        parsed: &ParsedDocument,
        resolutions: &mut [EntryResolution],
        warnings: &mut Vec<String>,
    ) -> Result<PaperId, EngineError> {
        let content = &parsed.bundle.content;
        let matched = self.corpus.lookup(&content.title, content.year).cloned().or_else(|| {
            let probe = crate::citeparse::ReferenceEntry {
                entry_key: CitationKey::Index(0),
                raw_text: String::new(),
                title_guess: content.title.clone(),
                authors_guess: Vec::new(),
                year_guess: content.year,
            };
            self.corpus.resolve_local(&probe).paper_id
        });
        let existing = match (content.paper_id.as_ref().map(|s| PaperId::new(s.clone())), matched) {
            (Some(explicit), Some(m)) if explicit != m && !self.corpus.contains(&explicit) => {
                if self.is_unreferenced_stub(&m) {
                    self.promote_stub(&m, &explicit)?;
                    for r in resolutions.iter_mut().filter(|r| r.result.paper_id.as_ref() == Some(&m)) {
                        r.result.paper_id = Some(explicit.clone());
                    }
                    Some(explicit)
                } else {
                    warnings.push(format!("paper already known as {m}; bundle id {explicit} ignored"));
                    Some(m)
                }
            }
            (Some(explicit), _) => Some(explicit),
            (None, m) => m,
        };
        let mut meta = existing
            .as_ref()
            .and_then(|id| self.corpus.get(id).cloned())
            .unwrap_or_else(|| PaperMetadata::new(content.title.clone(), content.year));
        let existing_id = existing.clone();
        if let Some(id) = existing {
            meta.paper_id = id;
        }
        meta.title = content.title.clone();
        if content.year.is_some() {
            meta.year = content.year;
        }
        if !content.authors.is_empty() {
            meta.authors = content.authors.clone();
        }
        if let Some(a) = &content.abstract_text {
            meta.abstract_text = a.clone();
        }
        let mut outgoing: Vec<PaperId> = Vec::new();
        for p in resolutions.iter().filter_map(|r| r.result.paper_id.as_ref()) {
            if existing_id.as_ref() == Some(p) {
                warnings.push(format!("reference to the document itself ({p}) ignored"));
            } else if !outgoing.contains(p) {
                outgoing.push(p.clone());
            }
        }
        meta.outgoing_refs = outgoing;
        meta.reference_count = parsed.entries.len() as u64;
        Ok(self.corpus.upsert_paper(meta)?)
    }

    /// A paper registered from a reference entry that no document, event or
    /// setting refers to by id yet.
    fn is_unreferenced_stub(&self, id: &PaperId) -> bool {
        !self.documents.contains_key(id)
            && !self.settings.own_papers.contains(id)
            && !self.events().iter().any(|e| {
                &e.paper_id == id
                    || match &e.body {
                        EventBody::CardOpen { reading_paper_id, .. } => reading_paper_id == id,
                        EventBody::Save { provenance: Some(p) } => &p.source_paper_id == id,
                        _ => false,
                    }
            })
    }

    fn promote_stub(&mut self, from: &PaperId, to: &PaperId) -> Result<(), EngineError> {
        self.corpus.rename_paper(from, to)?;
        for doc in self.documents.values_mut() {
            let mut changed = false;
            for r in doc.resolutions.iter_mut().filter(|r| r.result.paper_id.as_ref() == Some(from)) {
                r.result.paper_id = Some(to.clone());
                changed = true;
            }
            if changed {
                if let Some(dir) = &self.dir {
                    let path = dir.join("documents").join(format!("{}.json", doc.paper_id));
                    write_atomic(&path, &serde_json::to_vec(&doc).expect("document serializes"))?;
                }
            }
        }
        Ok(())
    }

    pub fn settings(&self) -> Settings {
        Settings {
            window_size: self.state().window,
            type_toggles: self.settings.type_toggles.clone(),
            own_papers: self.settings.own_papers.clone(),
        }
    }

    pub fn update_settings(&mut self, update: SettingsUpdate) -> Result<Settings, EngineError> {
        if let Some(w) = update.window_size {
            validate_window(w)?;
        }
        let mut next = self.settings.clone();
        if let Some(t) = update.type_toggles {
            for (k, v) in t {
                next.type_toggles.set(k, v);
            }
        }
        if let Some(own) = update.own_papers {
            next.own_papers = own;
        }
        if next != self.settings {
            if let Some(dir) = &self.dir {
                write_atomic(&dir.join(SETTINGS_FILE), &serde_json::to_vec_pretty(&next).expect("settings serialize"))?;
            }
            self.settings = next;
        }
        if let Some(w) = update.window_size.filter(|w| *w != self.state().window) {
            self.store.append(NewEvent::new(PaperId::default(), EventBody::SetWindow { window: w }))?;
        }
        Ok(self.settings())
    }

    pub fn profile(&self) -> UserProfile {
        UserProfile::from_own(self.settings.own_papers.iter().cloned(), &self.corpus)
    }

    fn window_or_default(&self, window: Option<usize>) -> Result<usize, EngineError> {
        match window {
            Some(w) => Ok(validate_window(w)?),
            None => Ok(self.state().window.clamp(1, MAX_WINDOW)),
        }
    }

    /// Augmented view of a document, computed from the live state.
    pub fn view(&self, id: &PaperId, window: Option<usize>) -> Result<AugmentedView, EngineError> {
        self.view_with(id, window, None)
    }

    /// Like [`Engine::view`], with toggles overriding the stored ones.
    pub fn view_with(
        &self,
        id: &PaperId,
        window: Option<usize>,
        toggles: Option<&TypeToggles>,
    ) -> Result<AugmentedView, EngineError> {
        let window = self.window_or_default(window)?;
        let profile = self.profile();
        let toggles = toggles.unwrap_or(&self.settings.type_toggles);
        Ok(build_view(self.document(id)?, self.state(), &self.corpus, &profile, window, toggles))
    }

    /// The same view recomputed from a full replay of the log.
    pub fn view_from_replay(&self, id: &PaperId, window: Option<usize>) -> Result<AugmentedView, EngineError> {
        let window = self.window_or_default(window)?;
        let state = crate::activity::replay(self.events());
        let profile = self.profile();
        Ok(build_view(self.document(id)?, &state, &self.corpus, &profile, window, &self.settings.type_toggles))
    }

    fn check_paper(&self, id: &PaperId) -> Result<(), EngineError> {
        if self.corpus.contains(id) {
            Ok(())
        } else {
            Err(EngineError::NotFound(format!("unknown paper {id}")))
        }
    }

    /// Appends a wire event. Every event naming a paper must name a known one.
    pub fn record(&mut self, record: EventRecord) -> Result<ActivityEvent, EngineError> {
        if let Some(p) = record.paper_id.as_ref().filter(|p| !p.0.is_empty()) {
            self.check_paper(p)?;
        }
        self.store.append_record(record)?;
        Ok(self.events().last().cloned().expect("just appended"))
    }

    pub fn record_event(&mut self, event: NewEvent) -> Result<ActivityEvent, EngineError> {
        if event.body.kind() != crate::activity::EventKind::SetWindow {
            self.check_paper(&event.paper_id)?;
        }
        self.store.append(event)?;
        Ok(self.events().last().cloned().expect("just appended"))
    }

    fn card_builder<'a>(
        &'a self,
        profile: &'a UserProfile,
        reading: Option<&'a PaperId>,
        window: usize,
    ) -> CardBuilder<'a> {
        CardBuilder {
            augmenter: Augmenter { state: self.state(), corpus: &self.corpus, profile, current: reading, window },
            documents: &self.documents,
            toggles: &self.settings.type_toggles,
            summarizer: self.summarizer.as_ref(),
            provider: None,
        }
    }

    /// Builds the card behind a marker and logs a `card_open` carrying the
    /// class shown at click time. Unresolved markers give a degraded card and
    /// log nothing.
    pub fn open_card(
        &mut self,
        reading: &PaperId,
        marker_id: &str,
        key: Option<&CitationKey>,
        ts: Option<Timestamp>,
    ) -> Result<CardOutcome, EngineError> {
        let card = self.peek_card(reading, marker_id, key)?;
        if let CardOutcome::Card(c) = &card {
            let mut event = NewEvent::new(
                c.meta.paper_id.clone(),
                EventBody::CardOpen { reading_paper_id: reading.clone(), class: c.class.clone() },
            );
            event.ts = ts;
            self.store.append(event)?;
        }
        Ok(card)
    }

    /// Card without logging.
    pub fn peek_card(
        &self,
        reading: &PaperId,
        marker_id: &str,
        key: Option<&CitationKey>,
    ) -> Result<CardOutcome, EngineError> {
        let doc = self.document(reading)?;
        let profile = self.profile();
        let window = self.state().window.clamp(1, MAX_WINDOW);
        let lexical;
        let mut builder = self.card_builder(&profile, Some(reading), window);
        if self.card_similarity {
            builder.provider = match &self.provider {
                ProviderChoice::Lexical => {
                    lexical = self.fit_lexical();
                    Some(&lexical as &dyn EmbeddingProvider)
                }
                ProviderChoice::External(p) => Some(p.as_ref()),
                ProviderChoice::Disabled => None,
            };
        }
        match builder.build_card(doc, marker_id, key) {
            Ok(card) => Ok(CardOutcome::Card(Box::new(card))),
            Err(CardError::UnresolvedCitation(d)) => Ok(CardOutcome::Degraded(*d)),
            Err(e) => Err(e.into()),
        }
    }

    /// Saves the paper behind a marker with the citing sentence as provenance.
    pub fn save_from_card(
        &mut self,
        reading: &PaperId,
        marker_id: &str,
        key: Option<&CitationKey>,
        ts: Option<Timestamp>,
    ) -> Result<ActivityEvent, EngineError> {
        let doc = self.document(reading)?;
        let marker =
            doc.parsed.marker(marker_id).ok_or_else(|| EngineError::NotFound(format!("unknown marker {marker_id}")))?;
        let targets = doc.marker_targets(marker);
        let subject = match key {
            Some(k) => targets.iter().find(|(tk, _)| tk == k),
            None => targets.first(),
        }
        .map(|(_, p)| p.clone())
        .ok_or_else(|| EngineError::Conflict(format!("marker {marker_id} does not resolve to a known paper")))?;
        let sentence = doc.parsed.citing_sentence(marker_id).unwrap_or_default().to_owned();
        let now = ts.unwrap_or_else(chrono::Utc::now);
        let provenance = (!sentence.trim().is_empty()).then(|| Provenance {
            source_paper_id: reading.clone(),
            citing_sentence: sentence,
            saved_at: now,
        });
        self.record_event(NewEvent::new(subject, EventBody::Save { provenance }).at(now))
    }

    pub fn library_card(&self, id: &PaperId) -> Result<PaperCard, EngineError> {
        let profile = self.profile();
        let window = self.state().window.clamp(1, MAX_WINDOW);
        Ok(self.card_builder(&profile, None, window).card_for_library_item(id)?)
    }

    fn title_of(&self, id: &PaperId) -> String {
        self.corpus
            .get(id)
            .map(|m| m.title.clone())
            .or_else(|| self.documents.get(id).map(|d| d.parsed.bundle.title().to_owned()))
            .unwrap_or_default()
    }

    pub fn history(&self, window: Option<usize>) -> Result<Vec<HistoryItem>, EngineError> {
        let window = self.window_or_default(window)?;
        Ok(self
            .state()
            .reading_history(window)
            .into_iter()
            .map(|h| HistoryItem {
                title: self.title_of(&h.paper_id),
                paper_id: h.paper_id,
                last_opened: h.last_opened,
                progress: h.progress,
                saved: h.saved,
            })
            .collect())
    }

    pub fn library(&self) -> Vec<LibraryItem> {
        self.state()
            .library()
            .map(|(id, p)| LibraryItem {
                paper_id: id.clone(),
                title: self.title_of(id),
                saved_from_title: p.provenance.as_ref().map(|pr| self.title_of(&pr.source_paper_id)),
                saved_from: p.provenance.clone(),
            })
            .collect()
    }

    pub fn remove_from_library(&mut self, id: &PaperId) -> Result<ActivityEvent, EngineError> {
        if !self.state().is_saved(id) {
            return Err(EngineError::NotFound(format!("{id} is not in the library")));
        }
        self.record_event(NewEvent::new(id.clone(), EventBody::Unsave))
    }

    fn fit_lexical(&self) -> LexicalProvider {
        let mut texts: Vec<String> = self.corpus.papers().map(paper_text).collect();
        texts.extend(self.documents.values().map(|d| document_text(d, &self.corpus)));
        LexicalProvider::fit(&texts)
    }

    pub fn evaluate_strategies(
        &self,
        doc_id: &PaperId,
        peer_ids: &[PaperId],
        k: usize,
        seed: u64,
        filter: SectionFilter,
    ) -> Result<StrategyReport, EngineError> {
        if k == 0 {
            return Err(EngineError::InvalidInput("k must be at least 1".into()));
        }
        let doc = self.document(doc_id)?;
        let peers =
            peer_ids.iter().filter(|p| *p != doc_id).map(|p| self.document(p)).collect::<Result<Vec<_>, _>>()?;
        let lexical;
        let provider: Option<&dyn EmbeddingProvider> = match &self.provider {
            ProviderChoice::Lexical => {
                lexical = self.fit_lexical();
                Some(&lexical)
            }
            ProviderChoice::External(p) => Some(p.as_ref()),
            ProviderChoice::Disabled => None,
        };
        let input = PoolInput { doc, peers: &peers, corpus: &self.corpus, provider, filter };
        Ok(pool_topk(&input, k, seed))
    }

    pub fn usage(&self) -> UsageStats {
        usage_stats(self.events())
    }
}

/// Pure view assembly; used for both the live and the replayed state.
pub fn build_view(
    doc: &ResolvedDocument,
    state: &ActivityState,
    corpus: &Corpus,
    profile: &UserProfile,
    window: usize,
    toggles: &TypeToggles,
) -> AugmentedView {
    let aug = Augmenter { state, corpus, profile, current: Some(&doc.paper_id), window };
    let decorations = aug.augment_document(doc, toggles);
    let mut marker_ids: BTreeMap<PaperId, Vec<String>> = BTreeMap::new();
    for d in &decorations {
        marker_ids.entry(d.cited_paper_id.clone()).or_default().push(d.marker_id.clone());
    }
    let mut citations: Vec<CitedPaper> = doc
        .cited_papers()
        .into_iter()
        .map(|p| {
            let (class, score) = aug.classify_citation(&p);
            CitedPaper {
                title: corpus.get(&p).map(|m| m.title.clone()).unwrap_or_default(),
                marker_ids: marker_ids.remove(&p).unwrap_or_default(),
                class,
                score: (!score.contributors.is_empty()).then_some(score),
                paper_id: p,
            }
        })
        .collect();
    let value = |c: &CitedPaper| c.score.as_ref().map_or(0.0, |s| s.value);
    citations.sort_by(|a, b| value(b).total_cmp(&value(a)).then_with(|| a.paper_id.cmp(&b.paper_id)));
    AugmentedView {
        paper_id: doc.paper_id.clone(),
        title: doc.parsed.bundle.title().to_owned(),
        window,
        type_toggles: toggles.clone(),
        sections: doc.parsed.bundle.sections().to_vec(),
        sentences: doc.parsed.sentences.clone(),
        markers: doc.parsed.markers.clone(),
        overview: aug.overview(doc),
        decorations,
        citations,
    }
}
