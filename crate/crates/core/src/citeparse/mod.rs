//! Citation parsing: sentences, inline markers, reference entries and the
//! links between them.

mod link;
mod markers;
mod references;
mod sentences;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use link::{link_markers, Linkage, Unresolved};
pub use markers::detect_markers;
pub use references::{is_numeric_block, parse_reference_section};
pub use sentences::segment_sentences;

/// Name of the digest stored next to every content hash.
pub const DIGEST_ALGORITHM: &str = "sha256";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed references: {0}")]
    MalformedReferences(String),
    #[error("unknown marker {0}")]
    UnknownMarker(String),
    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleHint {
    Numeric,
    AuthorYear,
    #[default]
    Auto,
}

/// A reference number or an author-year key such as `smith2020`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CitationKey {
    Index(u32),
    AuthorYear(String),
}

impl fmt::Display for CitationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CitationKey::Index(n) => write!(f, "{n}"),
            CitationKey::AuthorYear(k) => f.write_str(k),
        }
    }
}

impl CitationKey {
    /// Parses the textual form used in URLs and scripts.
    pub fn parse(s: &str) -> Self {
        match s.parse::<u32>() {
            Ok(n) => CitationKey::Index(n),
            Err(_) => CitationKey::AuthorYear(s.to_owned()),
        }
    }
}

/// Half-open range of unicode scalar offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.start <= pos && pos < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub body: String,
}

/// The on-disk bundle format. Everything after `style_hint` is optional
/// metadata about the document itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleContent {
    pub title: String,
    pub sections: Vec<Section>,
    #[serde(default)]
    pub references_block: String,
    #[serde(default)]
    pub style_hint: StyleHint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, rename = "abstract", skip_serializing_if = "Option::is_none")]
    pub abstract_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentBundle {
    pub content_hash: String,
    pub digest_algorithm: String,
    #[serde(flatten)]
    pub content: BundleContent,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl DocumentBundle {
    /// Reads a bundle file; the hash covers the raw bytes.
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, ParseError> {
        let content: BundleContent =
            serde_json::from_slice(bytes).map_err(|e| ParseError::InvalidBundle(e.to_string()))?;
        Self::with_hash(content, digest(bytes))
    }

    /// Builds a bundle in memory; the hash covers the canonical JSON encoding.
    pub fn from_content(content: BundleContent) -> Result<Self, ParseError> {
        let bytes = serde_json::to_vec(&content).expect("bundle content serializes");
        Self::with_hash(content, digest(&bytes))
    }

    fn with_hash(content: BundleContent, content_hash: String) -> Result<Self, ParseError> {
        if content.sections.is_empty() {
            return Err(ParseError::InvalidBundle("bundle has no sections".into()));
        }
        Ok(Self { content_hash, digest_algorithm: DIGEST_ALGORITHM.to_owned(), content })
    }

    pub fn title(&self) -> &str {
        &self.content.title
    }

    pub fn sections(&self) -> &[Section] {
        &self.content.sections
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationMarker {
    pub marker_id: String,
    pub section_index: usize,
    pub char_span: Span,
    pub raw_text: String,
    pub keys: Vec<CitationKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub entry_key: CitationKey,
    pub raw_text: String,
    pub title_guess: String,
    pub authors_guess: Vec<String>,
    pub year_guess: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub section_index: usize,
    pub char_span: Span,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub markers: usize,
    /// Markers whose every key links to an entry.
    pub linked: usize,
    /// Markers with at least one key that links to nothing.
    pub unlinked: usize,
    /// Bracketed or parenthesized candidates rejected as non-citations.
    pub skipped: usize,
    pub entries: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedDocument {
    pub bundle: DocumentBundle,
    /// Style actually used for marker detection (never `Auto`).
    pub style: StyleHint,
    pub markers: Vec<CitationMarker>,
    pub entries: Vec<ReferenceEntry>,
    pub links: std::collections::BTreeMap<String, Vec<CitationKey>>,
    pub unresolved: Vec<Unresolved>,
    pub sentences: Vec<SentenceSpan>,
    pub report: ParseReport,
}

impl ParsedDocument {
    pub fn marker(&self, marker_id: &str) -> Option<&CitationMarker> {
        self.markers.iter().find(|m| m.marker_id == marker_id)
    }

    pub fn entry(&self, key: &CitationKey) -> Option<&ReferenceEntry> {
        self.entries.iter().find(|e| &e.entry_key == key)
    }

    /// Entry keys the marker links to (empty when none resolved).
    pub fn linked_keys(&self, marker_id: &str) -> &[CitationKey] {
        self.links.get(marker_id).map_or(&[], Vec::as_slice)
    }

    pub fn citing_sentence(&self, marker_id: &str) -> Result<&str, ParseError> {
        extract_citing_sentence(self, marker_id)
    }
}

/// Text of the sentence that contains the start of the marker.
pub fn extract_citing_sentence<'a>(doc: &'a ParsedDocument, marker_id: &str) -> Result<&'a str, ParseError> {
    let marker = doc.marker(marker_id).ok_or_else(|| ParseError::UnknownMarker(marker_id.to_owned()))?;
    doc.sentences
        .iter()
        .find(|s| s.section_index == marker.section_index && s.char_span.contains(marker.char_span.start))
        .map(|s| s.text.as_str())
        .ok_or_else(|| ParseError::UnknownMarker(marker_id.to_owned()))
}

struct StyleRun {
    style: StyleHint,
    markers: Vec<CitationMarker>,
    skipped: Vec<(usize, String)>,
    linkage: Linkage,
}

fn run_style(bundle: &DocumentBundle, style: StyleHint, entries: &[ReferenceEntry]) -> StyleRun {
    let mut markers = Vec::new();
    let mut skipped = Vec::new();
    for (si, section) in bundle.sections().iter().enumerate() {
        let d = markers::detect(&section.body, si, style);
        markers.extend(d.markers);
        skipped.extend(d.skipped.into_iter().map(|s| (si, s)));
    }
    for (i, m) in markers.iter_mut().enumerate() {
        m.marker_id = format!("m{i}");
    }
    let linkage = link_markers(&markers, entries);
    StyleRun { style, markers, skipped, linkage }
}

/// Parses a bundle end to end. Deterministic: the same bundle always yields
/// the same document. A broken references block is reported as a warning and
/// leaves the document readable with no entries.
pub fn parse_bundle(bundle: &DocumentBundle) -> ParsedDocument {
    let mut warnings = Vec::new();
    let entries = match parse_reference_section(&bundle.content.references_block) {
        Ok(e) => e,
        Err(e) => {
            warnings.push(e.to_string());
            Vec::new()
        }
    };

    let styles: &[StyleHint] = match bundle.content.style_hint {
        StyleHint::Numeric => &[StyleHint::Numeric],
        StyleHint::AuthorYear => &[StyleHint::AuthorYear],
        StyleHint::Auto => &[StyleHint::Numeric, StyleHint::AuthorYear],
    };
    let mut best: Option<StyleRun> = None;
    for &style in styles {
        let run = run_style(bundle, style, &entries);
        if best.as_ref().is_none_or(|b| run.linkage.links.len() > b.linkage.links.len()) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one style");

    let mut sentences = Vec::new();
    for (si, section) in bundle.sections().iter().enumerate() {
        sentences.extend(segment_sentences(&section.body).into_iter().map(|mut s| {
            s.section_index = si;
            s
        }));
    }

    for (si, raw) in &run.skipped {
        warnings.push(format!("section {si}: skipped non-citation {raw}"));
    }
    let linked = run.linkage.fully_linked(&run.markers);
    let report = ParseReport {
        markers: run.markers.len(),
        linked,
        unlinked: run.markers.len() - linked,
        skipped: run.skipped.len(),
        entries: entries.len(),
        warnings,
    };
    ParsedDocument {
        bundle: bundle.clone(),
        style: run.style,
        markers: run.markers,
        entries,
        links: run.linkage.links,
        unresolved: run.linkage.unresolved,
        sentences,
        report,
    }
}

/// Directory of parsed documents keyed by content hash.
#[derive(Debug, Clone)]
pub struct ParseCache {
    dir: PathBuf,
}

impl ParseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, content_hash: &str) -> PathBuf {
        self.dir.join(format!("{content_hash}.parsed.json"))
    }

    pub fn load(&self, content_hash: &str) -> Option<ParsedDocument> {
        let bytes = fs::read(self.path_for(content_hash)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn store(&self, doc: &ParsedDocument) -> io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(&doc.bundle.content_hash);
        write_atomic(&path, &serde_json::to_vec_pretty(doc)?)?;
        Ok(path)
    }

    /// Returns the cached parse or parses and stores it.
    pub fn parse(&self, bundle: &DocumentBundle) -> io::Result<ParsedDocument> {
        if let Some(doc) = self.load(&bundle.content_hash) {
            return Ok(doc);
        }
        let doc = parse_bundle(bundle);
        self.store(&doc)?;
        Ok(doc)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn bundle(sections: &[(&str, &str)], refs: &str, style: StyleHint) -> DocumentBundle {
        DocumentBundle::from_content(BundleContent {
            title: "Doc".into(),
            sections: sections.iter().map(|(n, b)| Section { name: (*n).into(), body: (*b).into() }).collect(),
            references_block: refs.into(),
            style_hint: style,
            paper_id: None,
            authors: vec![],
            year: None,
            abstract_text: None,
        })
        .unwrap()
    }

    const FOUR_REFS: &str = "[1] A. One. First Title. V, 2001.\n[2] B. Two. Second Title. V, 2002.\n[3] C. Three. Third Title. V, 2003.\n[4] D. Four. Fourth Title. V, 2004.";

    #[test]
    fn two_section_fixture_counts() {
        let b = bundle(
            &[
                ("Introduction", "We build on [1]. Others [2, 3] disagree."),
                ("Related Work", "See [4]. A missing one [12]. And [1] again."),
            ],
            FOUR_REFS,
            StyleHint::Auto,
        );
        let doc = parse_bundle(&b);
        assert_eq!(doc.style, StyleHint::Numeric);
        assert_eq!(doc.report.markers, 5);
        assert_eq!(doc.report.linked, 4);
        assert_eq!(doc.report.unlinked, 1);
        assert_eq!(doc.report.entries, 4);
        assert_eq!(doc.unresolved, vec![Unresolved { marker_id: "m3".into(), key: CitationKey::Index(12) }]);
    }

    #[test]
    fn parse_is_deterministic() {
        let b = bundle(&[("Intro", "Text [1] and [2].")], FOUR_REFS, StyleHint::Auto);
        let a = serde_json::to_vec(&parse_bundle(&b)).unwrap();
        let c = serde_json::to_vec(&parse_bundle(&b)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn empty_references_block_degrades() {
        let b = bundle(&[("Intro", "Text [1] and [2].")], "", StyleHint::Auto);
        let doc = parse_bundle(&b);
        assert!(doc.entries.is_empty());
        assert_eq!(doc.report.markers, 2);
        assert_eq!(doc.report.unlinked, 2);
        assert!(doc.links.is_empty());
        assert!(doc.report.warnings.iter().any(|w| w.contains("malformed references")));
    }

    #[test]
    fn auto_picks_author_year_when_it_links_more() {
        let b = bundle(
            &[("Intro", "As argued (Smith et al., 2020; Doe, 2019), and Doe (2019) too.")],
            "Smith, A., Lee, B. (2020). Alpha. V.\nDoe, J. (2019). Beta. V.",
            StyleHint::Auto,
        );
        let doc = parse_bundle(&b);
        assert_eq!(doc.style, StyleHint::AuthorYear);
        assert_eq!(doc.report.markers, 2);
        assert_eq!(doc.report.linked, 2);
    }

    #[test]
    fn citing_sentence_lookup() {
        let b = bundle(
            &[("Intro", "We build on X. See [2]."), ("Body", "Smith et al. [3] showed this.")],
            FOUR_REFS,
            StyleHint::Numeric,
        );
        let doc = parse_bundle(&b);
        assert_eq!(extract_citing_sentence(&doc, "m0").unwrap(), "See [2].");
        assert_eq!(extract_citing_sentence(&doc, "m1").unwrap(), "Smith et al. [3] showed this.");
        assert_eq!(extract_citing_sentence(&doc, "m9"), Err(ParseError::UnknownMarker("m9".into())));
    }

    #[test]
    fn hash_is_stable_for_identical_bytes() {
        let json = br#"{"title":"T","sections":[{"name":"a","body":"b"}],"references_block":""}"#;
        let a = DocumentBundle::from_json_bytes(json).unwrap();
        let b = DocumentBundle::from_json_bytes(json).unwrap();
        assert_eq!(a.content_hash, b.content_hash);
        assert_eq!(a.digest_algorithm, "sha256");
        assert_eq!(a.content.style_hint, StyleHint::Auto);
        let other = DocumentBundle::from_json_bytes(&[json.as_slice(), b" "].concat()).unwrap();
        assert_ne!(a.content_hash, other.content_hash);
    }

    #[test]
    fn bundle_without_sections_is_rejected() {
        let json = br#"{"title":"T","sections":[]}"#;
        assert!(matches!(DocumentBundle::from_json_bytes(json), Err(ParseError::InvalidBundle(_))));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ParseCache::new(dir.path());
        let b = bundle(&[("Intro", "Text [1].")], FOUR_REFS, StyleHint::Auto);
        let doc = cache.parse(&b).unwrap();
        assert!(cache.path_for(&b.content_hash).ends_with(format!("{}.parsed.json", b.content_hash)));
        assert_eq!(cache.load(&b.content_hash), Some(doc));
    }
}
