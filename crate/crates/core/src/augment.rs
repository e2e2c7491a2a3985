//! Citation classification, reencounter scoring and document decoration.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::activity::ActivityState;
use crate::corpus::{Corpus, PaperId};
use crate::document::ResolvedDocument;

/// Reencounter scores are capped at this many points.
pub const SCORE_CAP: u32 = 5;
const CAP_HUNDREDTHS: u32 = SCORE_CAP * 100;
const BASE_POINTS: u32 = 100;
const SAVED_POINTS: u32 = 200;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    SavedRed,
    VisitedGreen,
    ReencounteredYellow,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overlay {
    OwnHeart,
    CitedQuote,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AugmentationClass {
    pub color: Color,
    #[serde(default)]
    pub overlays: BTreeSet<Overlay>,
}

/// Coarse grouping used by usage statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageCategory {
    Familiar,
    Reencountered,
    NoAugmentation,
}

impl AugmentationClass {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn category(&self) -> UsageCategory {
        match self.color {
            Color::ReencounteredYellow => UsageCategory::Reencountered,
            Color::SavedRed | Color::VisitedGreen => UsageCategory::Familiar,
            Color::None if !self.overlays.is_empty() => UsageCategory::Familiar,
            Color::None => UsageCategory::NoAugmentation,
        }
    }
}

/// The user-facing augmentation types, each of which can be toggled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationType {
    Own,
    CitedByOwn,
    Reencountered,
    Saved,
    Visited,
}

impl AugmentationType {
    /// Display order of the overview panel.
    pub const ALL: [AugmentationType; 5] = [
        AugmentationType::Own,
        AugmentationType::CitedByOwn,
        AugmentationType::Reencountered,
        AugmentationType::Saved,
        AugmentationType::Visited,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeToggles(pub BTreeMap<AugmentationType, bool>);

impl Default for TypeToggles {
    fn default() -> Self {
        Self::all(true)
    }
}

impl TypeToggles {
    pub fn all(on: bool) -> Self {
        Self(AugmentationType::ALL.iter().map(|t| (*t, on)).collect())
    }

    pub fn enabled(&self, t: AugmentationType) -> bool {
        self.0.get(&t).copied().unwrap_or(true)
    }

    pub fn set(&mut self, t: AugmentationType, on: bool) {
        self.0.insert(t, on);
    }

    /// Applies the toggles to a class: disabled colors become `None`,
    /// disabled overlays disappear.
    pub fn apply(&self, class: &AugmentationClass) -> AugmentationClass {
        let color_type = match class.color {
            Color::SavedRed => Some(AugmentationType::Saved),
            Color::VisitedGreen => Some(AugmentationType::Visited),
            Color::ReencounteredYellow => Some(AugmentationType::Reencountered),
            Color::None => None,
        };
        let color = match color_type {
            Some(t) if !self.enabled(t) => Color::None,
            _ => class.color,
        };
        let overlays = class
            .overlays
            .iter()
            .copied()
            .filter(|o| match o {
                Overlay::OwnHeart => self.enabled(AugmentationType::Own),
                Overlay::CitedQuote => self.enabled(AugmentationType::CitedByOwn),
            })
            .collect();
        AugmentationClass { color, overlays }
    }
}

/// The user's own publications and everything they cite.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub own_paper_ids: BTreeSet<PaperId>,
    pub cited_by_own: BTreeSet<PaperId>,
}

impl UserProfile {
    pub fn from_own(own: impl IntoIterator<Item = PaperId>, corpus: &Corpus) -> Self {
        let own_paper_ids: BTreeSet<PaperId> = own.into_iter().collect();
        let cited_by_own = own_paper_ids
            .iter()
            .filter_map(|id| corpus.get(id))
            .flat_map(|m| m.outgoing_refs.iter().cloned())
            .collect();
        Self { own_paper_ids, cited_by_own }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contributor {
    pub paper_id: PaperId,
    pub points: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReencounterScore {
    pub value: f64,
    pub contributors: Vec<Contributor>,
}

impl ReencounterScore {
    fn from_parts(parts: Vec<(PaperId, u32)>) -> Self {
        let total: u32 = parts.iter().map(|(_, h)| h).sum();
        Self {
            value: f64::from(total.min(CAP_HUNDREDTHS)) / 100.0,
            contributors: parts
                .into_iter()
                .map(|(paper_id, h)| Contributor { paper_id, points: f64::from(h) / 100.0 })
                .collect(),
        }
    }

    pub fn zero() -> Self {
        Self { value: 0.0, contributors: Vec::new() }
    }

    fn hundredths(&self) -> u32 {
        (self.value * 100.0).round() as u32
    }

    /// ceil(value) clamped to 1..=5.
    pub fn shade_bucket(&self) -> u8 {
        self.hundredths().div_ceil(100).clamp(1, SCORE_CAP) as u8
    }

    pub fn intensity(&self) -> f64 {
        self.value / f64::from(SCORE_CAP)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationDecoration {
    pub marker_id: String,
    pub entry_key: String,
    pub cited_paper_id: PaperId,
    pub class: AugmentationClass,
    pub score: Option<ReencounterScore>,
    pub shade_bucket: Option<u8>,
    pub intensity: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverviewStats {
    pub total_citations: usize,
    pub own: usize,
    pub cited_by_own: usize,
    pub reencountered: usize,
    pub saved: usize,
    pub visited: usize,
    pub unresolved: usize,
}

impl OverviewStats {
    /// Counts in overview-panel order.
    pub fn rows(&self) -> [(AugmentationType, usize); 5] {
        [
            (AugmentationType::Own, self.own),
            (AugmentationType::CitedByOwn, self.cited_by_own),
            (AugmentationType::Reencountered, self.reencountered),
            (AugmentationType::Saved, self.saved),
            (AugmentationType::Visited, self.visited),
        ]
    }
}

/// Facts about one cited paper that drive its classification.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CitationFacts {
    pub visited: bool,
    pub saved: bool,
    pub own: bool,
    pub cited_by_own: bool,
    pub positive_score: bool,
    pub suppressed: bool,
}

/// The precedence rules: saved beats visited beats reencountered; own and
/// cited-by-own papers, and suppressed papers, are never highlighted yellow.
pub fn classify(f: CitationFacts) -> AugmentationClass {
    let color = if f.saved {
        Color::SavedRed
    } else if f.visited {
        Color::VisitedGreen
    } else if f.positive_score && !f.own && !f.cited_by_own && !f.suppressed {
        Color::ReencounteredYellow
    } else {
        Color::None
    };
    let mut overlays = BTreeSet::new();
    if f.own {
        overlays.insert(Overlay::OwnHeart);
    }
    if f.cited_by_own {
        overlays.insert(Overlay::CitedQuote);
    }
    AugmentationClass { color, overlays }
}

/// Read-only view over the reader's state for one open document.
#[derive(Debug, Clone, Copy)]
pub struct Augmenter<'a> {
    pub state: &'a ActivityState,
    pub corpus: &'a Corpus,
    pub profile: &'a UserProfile,
    /// The paper being read; it never contributes to its own citations.
    pub current: Option<&'a PaperId>,
    pub window: usize,
}

impl<'a> Augmenter<'a> {
    /// Sum over history papers citing `cited` of 1 + progress + 2 if saved,
    /// capped at 5.
    pub fn reencounter_score(&self, cited: &PaperId) -> ReencounterScore {
        let mut parts = Vec::new();
        for h in self.state.reading_history(self.window.max(1)) {
            if Some(&h.paper_id) == self.current {
                continue;
            }
            let cites = self.corpus.get(&h.paper_id).is_some_and(|m| m.outgoing_refs.contains(cited));
            if cites {
                let points = BASE_POINTS + u32::from(h.progress.hundredths()) + if h.saved { SAVED_POINTS } else { 0 };
                parts.push((h.paper_id, points));
            }
        }
        ReencounterScore::from_parts(parts)
    }

    pub fn facts(&self, cited: &PaperId, score: &ReencounterScore) -> CitationFacts {
        CitationFacts {
            visited: self.state.is_visited(cited),
            saved: self.state.is_saved(cited),
            own: self.profile.own_paper_ids.contains(cited),
            cited_by_own: self.profile.cited_by_own.contains(cited),
            positive_score: score.value > 0.0,
            suppressed: self.state.is_suppressed(cited),
        }
    }

    pub fn classify_citation(&self, cited: &PaperId) -> (AugmentationClass, ReencounterScore) {
        let score = self.reencounter_score(cited);
        (classify(self.facts(cited, &score)), score)
    }

    /// One decoration per (marker, resolved cited paper).
    pub fn augment_document(&self, doc: &ResolvedDocument, toggles: &TypeToggles) -> Vec<AugmentationDecoration> {
        let mut cache: BTreeMap<PaperId, (AugmentationClass, ReencounterScore)> = BTreeMap::new();
        let mut out = Vec::new();
        for marker in &doc.parsed.markers {
            for (key, cited) in doc.marker_targets(marker) {
                let (class, score) =
                    cache.entry(cited.clone()).or_insert_with(|| self.classify_citation(&cited)).clone();
                let shown = toggles.apply(&class);
                let yellow = shown.color == Color::ReencounteredYellow;
                out.push(AugmentationDecoration {
                    marker_id: marker.marker_id.clone(),
                    entry_key: key.to_string(),
                    cited_paper_id: cited,
                    shade_bucket: yellow.then(|| score.shade_bucket()),
                    intensity: yellow.then(|| score.intensity()),
                    score: (!score.contributors.is_empty()).then_some(score),
                    class: shown,
                });
            }
        }
        out
    }

    /// Per-type counts over distinct resolved cited papers, ignoring toggles.
    pub fn overview(&self, doc: &ResolvedDocument) -> OverviewStats {
        let cited = doc.cited_papers();
        let mut stats = OverviewStats {
            total_citations: cited.len(),
            unresolved: doc.unresolved_keys().len(),
            ..OverviewStats::default()
        };
        for p in &cited {
            let (class, _) = self.classify_citation(p);
            if class.overlays.contains(&Overlay::OwnHeart) {
                stats.own += 1;
            }
            if class.overlays.contains(&Overlay::CitedQuote) {
                stats.cited_by_own += 1;
            }
            match class.color {
                Color::SavedRed => stats.saved += 1,
                Color::VisitedGreen => stats.visited += 1,
                Color::ReencounteredYellow => stats.reencountered += 1,
                Color::None => {}
            }
        }
        stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visited_and_saved_is_saved() {
        let c = classify(CitationFacts { visited: true, saved: true, ..Default::default() });
        assert_eq!(c.color, Color::SavedRed);
    }

    #[test]
    fn cited_by_own_is_never_yellow() {
        let c = classify(CitationFacts { cited_by_own: true, positive_score: true, ..Default::default() });
        assert_eq!(c.color, Color::None);
        assert_eq!(c.overlays, BTreeSet::from([Overlay::CitedQuote]));
        let c =
            classify(CitationFacts { cited_by_own: true, positive_score: true, visited: true, ..Default::default() });
        assert_eq!(c.color, Color::VisitedGreen);
    }

    #[test]
    fn unknown_paper_has_no_augmentation() {
        assert_eq!(classify(CitationFacts::default()), AugmentationClass::none());
        assert_eq!(AugmentationClass::none().category(), UsageCategory::NoAugmentation);
    }

    #[test]
    fn suppression_only_touches_yellow() {
        let c = classify(CitationFacts { positive_score: true, suppressed: true, ..Default::default() });
        assert_eq!(c.color, Color::None);
        let c = classify(CitationFacts { saved: true, positive_score: true, suppressed: true, ..Default::default() });
        assert_eq!(c.color, Color::SavedRed);
    }

    #[test]
    fn shade_buckets() {
        let s = |h: u32| ReencounterScore::from_parts(vec![(PaperId::new("x"), h)]);
        assert_eq!(s(100).shade_bucket(), 1);
        assert_eq!(s(101).shade_bucket(), 2);
        assert_eq!(s(350).shade_bucket(), 4);
        assert_eq!(s(800).shade_bucket(), 5);
        assert_eq!(s(800).value, 5.0);
        assert_eq!(s(250).intensity(), 0.5);
    }

    #[test]
    fn toggles_degrade_classes() {
        let class = AugmentationClass { color: Color::SavedRed, overlays: BTreeSet::from([Overlay::OwnHeart]) };
        let off = TypeToggles::all(false);
        assert_eq!(off.apply(&class), AugmentationClass::none());
        let mut t = TypeToggles::default();
        t.set(AugmentationType::Own, false);
        assert_eq!(t.apply(&class), AugmentationClass { color: Color::SavedRed, overlays: BTreeSet::new() });
    }

    #[test]
    fn class_wire_format() {
        let class = AugmentationClass { color: Color::ReencounteredYellow, overlays: BTreeSet::new() };
        assert_eq!(serde_json::to_string(&class).unwrap(), r#"{"color":"reencountered_yellow","overlays":[]}"#);
    }
}
