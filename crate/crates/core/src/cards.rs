//! Paper Cards: cited-paper metadata plus the reader's own context for it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{Progress, Provenance, Timestamp};
use crate::augment::{AugmentationClass, Augmenter, ReencounterScore, TypeToggles};
use crate::citeparse::{segment_sentences, CitationKey};
use crate::corpus::{CitationSource, PaperId, PaperMetadata};
use crate::document::ResolvedDocument;
use crate::strategies::{cosine, document_text, paper_text, EmbeddingProvider};

/// Produces the short summary line of a card.
pub trait Summarizer: Send + Sync {
    fn summarize(&self, meta: &PaperMetadata) -> Option<String>;
}

/// Stored summary if present, else the first sentence of the abstract.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstSentenceSummarizer;

impl Summarizer for FirstSentenceSummarizer {
    fn summarize(&self, meta: &PaperMetadata) -> Option<String> {
        if let Some(s) = meta.summary.as_ref().filter(|s| !s.trim().is_empty()) {
            return Some(s.clone());
        }
        segment_sentences(&meta.abstract_text).into_iter().map(|s| s.text).find(|t| !t.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardMeta {
    pub paper_id: PaperId,
    pub title: String,
    pub authors: Vec<String>,
    pub year: Option<i32>,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub summary: Option<String>,
    pub citation_count: u64,
    pub reference_count: u64,
    pub citation_source: CitationSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryMention {
    pub paper_id: PaperId,
    pub title: String,
    pub last_opened: Option<Timestamp>,
    pub progress: Progress,
    pub citing_sentence: String,
}

/// Where the card was opened from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerContext {
    pub reading_paper_id: PaperId,
    pub marker_id: String,
    pub entry_key: String,
    pub raw_entry: String,
    pub citing_sentence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperCard {
    pub degraded: bool,
    pub meta: CardMeta,
    pub history_mentions: Vec<HistoryMention>,
    pub saved_from: Option<Provenance>,
    pub class: AugmentationClass,
    pub score: Option<ReencounterScore>,
    pub library_state: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<MarkerContext>,
    /// Cosine between the reading paper and the subject; only with a provider.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

/// What is shown for a marker that does not resolve to a known paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradedCard {
    pub degraded: bool,
    pub reading_paper_id: PaperId,
    pub marker_id: String,
    pub raw_text: Vec<String>,
    pub citing_sentence: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CardError {
    #[error("unknown marker {0}")]
    UnknownMarker(String),
    #[error("marker {} does not resolve to a known paper", .0.marker_id)]
    UnresolvedCitation(Box<DegradedCard>),
    #[error("{0} is not in the library")]
    NotInLibrary(PaperId),
    #[error("unknown paper {0}")]
    UnknownPaper(PaperId),
}

pub struct CardBuilder<'a> {
    pub augmenter: Augmenter<'a>,
    pub documents: &'a BTreeMap<PaperId, ResolvedDocument>,
    pub toggles: &'a TypeToggles,
    pub summarizer: &'a dyn Summarizer,
    pub provider: Option<&'a dyn EmbeddingProvider>,
}

impl<'a> CardBuilder<'a> {
    /// Card for the paper cited by `marker_id` in `reading`. With several
    /// resolved keys, `key` picks one; otherwise the first is used.
    pub fn build_card(
        &self,
        reading: &ResolvedDocument,
        marker_id: &str,
        key: Option<&CitationKey>,
    ) -> Result<PaperCard, CardError> {
        let marker = reading.parsed.marker(marker_id).ok_or_else(|| CardError::UnknownMarker(marker_id.to_owned()))?;
        let sentence = reading.parsed.citing_sentence(marker_id).unwrap_or_default().to_owned();
        let targets = reading.marker_targets(marker);
        let chosen = match key {
            Some(k) => targets.iter().find(|(tk, _)| tk == k),
            None => targets.first(),
        };
        let Some((entry_key, subject)) = chosen.filter(|(_, p)| self.augmenter.corpus.contains(p)) else {
            let keys: Vec<&CitationKey> = match key {
                Some(k) => vec![k],
                None => marker.keys.iter().collect(),
            };
            let raw_text = keys
                .into_iter()
                .map(|k| reading.parsed.entry(k).map_or_else(|| k.to_string(), |e| e.raw_text.clone()))
                .collect();
            return Err(CardError::UnresolvedCitation(Box::new(DegradedCard {
                degraded: true,
                reading_paper_id: reading.paper_id.clone(),
                marker_id: marker_id.to_owned(),
                raw_text,
                citing_sentence: sentence,
            })));
        };
        let mut card = self.card_for(subject, Some(&reading.paper_id))?;
        card.context = Some(MarkerContext {
            reading_paper_id: reading.paper_id.clone(),
            marker_id: marker_id.to_owned(),
            entry_key: entry_key.to_string(),
            raw_entry: reading.parsed.entry(entry_key).map(|e| e.raw_text.clone()).unwrap_or_default(),
            citing_sentence: sentence,
        });
        if let Some(provider) = self.provider {
            let texts = vec![document_text(reading, self.augmenter.corpus), paper_text(&card_source(self, subject)?)];
            card.similarity = provider.embed(&texts).ok().filter(|v| v.len() == 2).map(|v| cosine(&v[0], &v[1]));
        }
        Ok(card)
    }

    pub fn card_for_library_item(&self, paper_id: &PaperId) -> Result<PaperCard, CardError> {
        if !self.augmenter.state.is_saved(paper_id) {
            return Err(CardError::NotInLibrary(paper_id.clone()));
        }
        self.card_for(paper_id, None)
    }

    /// The marker-independent part of a card.
    pub fn card_for(&self, subject: &PaperId, reading: Option<&PaperId>) -> Result<PaperCard, CardError> {
        let meta = card_source(self, subject)?;
        let corpus = self.augmenter.corpus;
        let stats = corpus.citation_stats(subject).map_err(|_| CardError::UnknownPaper(subject.clone()))?;
        let aug = Augmenter { current: reading, ..self.augmenter };
        let (class, score) = aug.classify_citation(subject);
        Ok(PaperCard {
            degraded: false,
            meta: CardMeta {
                paper_id: subject.clone(),
                title: meta.title.clone(),
                authors: meta.authors.clone(),
                year: meta.year,
                abstract_text: meta.abstract_text.clone(),
                summary: self.summarizer.summarize(&meta),
                citation_count: stats.citation_count,
                reference_count: stats.reference_count,
                citation_source: stats.source,
            },
            history_mentions: self.history_mentions(subject, reading),
            saved_from: self.augmenter.state.provenance(subject).cloned(),
            class: self.toggles.apply(&class),
            score: (!score.contributors.is_empty()).then_some(score),
            library_state: self.augmenter.state.is_saved(subject),
            context: None,
            similarity: None,
        })
    }

    /// In-window history papers whose parsed text cites `subject`, newest
    /// first, each with its first citing sentence.
    pub fn history_mentions(&self, subject: &PaperId, reading: Option<&PaperId>) -> Vec<HistoryMention> {
        let state = self.augmenter.state;
        let mut out = Vec::new();
        for h in state.reading_history(self.augmenter.window.max(1)) {
            if Some(&h.paper_id) == reading || &h.paper_id == subject {
                continue;
            }
            let Some(doc) = self.documents.get(&h.paper_id) else { continue };
            let Some(marker) = doc.markers_citing(subject).next() else { continue };
            let citing_sentence = doc.parsed.citing_sentence(&marker.marker_id).unwrap_or_default().to_owned();
            let title = self
                .augmenter
                .corpus
                .get(&h.paper_id)
                .map_or_else(|| doc.parsed.bundle.title().to_owned(), |m| m.title.clone());
            out.push(HistoryMention {
                paper_id: h.paper_id,
                title,
                last_opened: h.last_opened,
                progress: h.progress,
                citing_sentence,
            });
        }
        out
    }
}

fn card_source(builder: &CardBuilder<'_>, subject: &PaperId) -> Result<PaperMetadata, CardError> {
    builder.augmenter.corpus.get(subject).cloned().ok_or_else(|| CardError::UnknownPaper(subject.clone()))
}
