use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{CitationKey, CitationMarker, ReferenceEntry};

/// A marker key that matched no reference entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unresolved {
    pub marker_id: String,
    pub key: CitationKey,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linkage {
    /// marker id -> linked entry keys, in marker key order.
    pub links: BTreeMap<String, Vec<CitationKey>>,
    pub unresolved: Vec<Unresolved>,
}

impl Linkage {
    /// Markers whose every key found an entry.
    pub fn fully_linked(&self, markers: &[CitationMarker]) -> usize {
        let missing: BTreeSet<&str> = self.unresolved.iter().map(|u| u.marker_id.as_str()).collect();
        markers.iter().filter(|m| !missing.contains(m.marker_id.as_str())).count()
    }
}

/// Links marker keys to entries by key equality.
///
/// Numeric keys match entry indices; author-year keys are
/// `<folded first-author surname><year>` on both sides, so equality means the
/// same first author and the same year.
pub fn link_markers(markers: &[CitationMarker], entries: &[ReferenceEntry]) -> Linkage {
    let known: BTreeSet<&CitationKey> = entries.iter().map(|e| &e.entry_key).collect();
    let mut out = Linkage::default();
    for m in markers {
        let mut linked = Vec::new();
        for key in &m.keys {
            if known.contains(key) {
                linked.push(key.clone());
            } else {
                out.unresolved.push(Unresolved { marker_id: m.marker_id.clone(), key: key.clone() });
            }
        }
        if !linked.is_empty() {
            out.links.insert(m.marker_id.clone(), linked);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citeparse::Span;

    fn marker(id: &str, keys: Vec<CitationKey>) -> CitationMarker {
        CitationMarker {
            marker_id: id.into(),
            section_index: 0,
            char_span: Span::new(0, 1),
            raw_text: "x".into(),
            keys,
        }
    }

    fn entry(key: CitationKey) -> ReferenceEntry {
        ReferenceEntry {
            entry_key: key,
            raw_text: String::new(),
            title_guess: "t".into(),
            authors_guess: vec![],
            year_guess: None,
        }
    }

    #[test]
    fn numeric_index_equality() {
        let entries: Vec<_> = (1..=10).map(|i| entry(CitationKey::Index(i))).collect();
        let l = link_markers(&[marker("m0", vec![CitationKey::Index(3)])], &entries);
        assert_eq!(l.links["m0"], vec![CitationKey::Index(3)]);
        assert!(l.unresolved.is_empty());
    }

    #[test]
    fn out_of_range_is_unresolved() {
        let entries: Vec<_> = (1..=10).map(|i| entry(CitationKey::Index(i))).collect();
        let markers = [marker("m0", vec![CitationKey::Index(12)])];
        let l = link_markers(&markers, &entries);
        assert!(l.links.is_empty());
        assert_eq!(l.unresolved, vec![Unresolved { marker_id: "m0".into(), key: CitationKey::Index(12) }]);
        assert_eq!(l.fully_linked(&markers), 0);
    }

    #[test]
    fn author_year_match() {
        let entries = [entry(CitationKey::AuthorYear("smith2020".into()))];
        let l = link_markers(&[marker("m0", vec![CitationKey::AuthorYear("smith2020".into())])], &entries);
        assert_eq!(l.links.len(), 1);
        let l = link_markers(&[marker("m0", vec![CitationKey::AuthorYear("smith2021".into())])], &entries);
        assert!(l.links.is_empty());
    }

    #[test]
    fn multi_key_marker_partially_linked() {
        let entries: Vec<_> = (1..=3).map(|i| entry(CitationKey::Index(i))).collect();
        let markers = [marker("m0", vec![CitationKey::Index(2), CitationKey::Index(5)])];
        let l = link_markers(&markers, &entries);
        assert_eq!(l.links["m0"], vec![CitationKey::Index(2)]);
        assert_eq!(l.unresolved.len(), 1);
        assert_eq!(l.fully_linked(&markers), 0);
    }
}
