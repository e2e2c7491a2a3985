//! A parsed document joined with the corpus resolution of its entries.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::citeparse::{CitationKey, CitationMarker, ParsedDocument};
use crate::corpus::{MatchResult, PaperId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryResolution {
    pub entry_key: CitationKey,
    pub result: MatchResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedDocument {
    pub paper_id: PaperId,
    pub parsed: ParsedDocument,
    pub resolutions: Vec<EntryResolution>,
}

impl ResolvedDocument {
    pub fn paper_for(&self, key: &CitationKey) -> Option<&PaperId> {
        self.resolutions.iter().find(|r| &r.entry_key == key).and_then(|r| r.result.paper_id.as_ref())
    }

    /// (entry key, cited paper) for every resolved key of a marker, in key order.
    pub fn marker_targets(&self, marker: &CitationMarker) -> Vec<(CitationKey, PaperId)> {
        let mut out: Vec<(CitationKey, PaperId)> = Vec::new();
        for key in self.parsed.linked_keys(&marker.marker_id) {
            if let Some(pid) = self.paper_for(key) {
                if !out.iter().any(|(_, p)| p == pid) {
                    out.push((key.clone(), pid.clone()));
                }
            }
        }
        out
    }

    /// Distinct cited papers that markers actually point to.
    pub fn cited_papers(&self) -> BTreeSet<PaperId> {
        self.parsed.markers.iter().flat_map(|m| self.marker_targets(m)).map(|(_, p)| p).collect()
    }

    /// Distinct marker keys that do not resolve to a paper.
    pub fn unresolved_keys(&self) -> BTreeSet<CitationKey> {
        self.parsed
            .markers
            .iter()
            .flat_map(|m| m.keys.iter())
            .filter(|k| self.parsed.entry(k).is_none() || self.paper_for(k).is_none())
            .cloned()
            .collect()
    }

    /// Markers that cite `paper`.
    pub fn markers_citing<'a>(&'a self, paper: &'a PaperId) -> impl Iterator<Item = &'a CitationMarker> + 'a {
        self.parsed.markers.iter().filter(move |m| self.marker_targets(m).iter().any(|(_, p)| p == paper))
    }
}
