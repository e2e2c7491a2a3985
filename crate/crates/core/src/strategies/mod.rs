//! Citation-selection strategies and top-k pooling.
//!
//! Four rankers order the cited papers of a document:
//!
//! * linear: order of first mention;
//! * global: descending citation count;
//! * reencountered: number of peer documents that also cite the paper;
//! * embedding: cosine similarity to the mean vector of the topic documents.
//!
//! [`pool_topk`] takes the top `k` of each (shuffling tie groups with a seeded
//! generator) and unites them.

mod embedding;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use embedding::{cosine, mean_vector, tokenize, EmbeddingProvider, LexicalProvider, ProviderError};

use crate::corpus::{Corpus, PaperId, PaperMetadata};
use crate::document::ResolvedDocument;

/// Declared in alphabetical order; the tie-break generator is consumed in
/// this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Embedding,
    Global,
    Linear,
    Reencountered,
}

impl StrategyName {
    pub const ALL: [StrategyName; 4] =
        [StrategyName::Embedding, StrategyName::Global, StrategyName::Linear, StrategyName::Reencountered];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub paper_id: PaperId,
    pub score: f64,
}

/// Which sections contribute candidate citations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectionFilter {
    /// Sections whose name contains any of these (case-insensitive).
    NameContains(Vec<String>),
    All,
}

impl Default for SectionFilter {
    fn default() -> Self {
        SectionFilter::NameContains(vec!["introduction".into(), "related".into()])
    }
}

impl SectionFilter {
    pub fn accepts(&self, section_name: &str) -> bool {
        match self {
            SectionFilter::All => true,
            SectionFilter::NameContains(words) => {
                let lower = section_name.to_lowercase();
                words.iter().any(|w| lower.contains(&w.to_lowercase()))
            }
        }
    }
}

/// Resolved cited papers in filtered sections, in first-mention order.
pub fn candidates(doc: &ResolvedDocument, filter: &SectionFilter) -> Vec<PaperId> {
    let sections = doc.parsed.bundle.sections();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for m in &doc.parsed.markers {
        if !sections.get(m.section_index).is_some_and(|s| filter.accepts(&s.name)) {
            continue;
        }
        for (_, pid) in doc.marker_targets(m) {
            if seen.insert(pid.clone()) {
                out.push(pid);
            }
        }
    }
    out
}

/// Score `n - position`, so earlier mentions rank higher and nothing ties.
pub fn rank_linear(doc: &ResolvedDocument, filter: &SectionFilter) -> Vec<Ranked> {
    let c = candidates(doc, filter);
    let n = c.len();
    c.into_iter().enumerate().map(|(i, paper_id)| Ranked { paper_id, score: (n - i) as f64 }).collect()
}

fn sort_desc(mut ranked: Vec<Ranked>) -> Vec<Ranked> {
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.paper_id.cmp(&b.paper_id)));
    ranked
}

pub fn rank_global(doc: &ResolvedDocument, filter: &SectionFilter, corpus: &Corpus) -> Vec<Ranked> {
    let ranked = candidates(doc, filter)
        .into_iter()
        .filter_map(|p| {
            let stats = corpus.citation_stats(&p).ok()?;
            Some(Ranked { paper_id: p, score: stats.citation_count as f64 })
        })
        .collect();
    sort_desc(ranked)
}

/// Score = number of peer documents citing the paper; zero scores dropped.
pub fn rank_reencountered(doc: &ResolvedDocument, filter: &SectionFilter, peers: &[&ResolvedDocument]) -> Vec<Ranked> {
    let peer_sets: Vec<BTreeSet<PaperId>> =
        peers.iter().filter(|p| p.paper_id != doc.paper_id).map(|p| p.cited_papers()).collect();
    let ranked = candidates(doc, filter)
        .into_iter()
        .filter_map(|p| {
            let n = peer_sets.iter().filter(|s| s.contains(&p)).count();
            (n > 0).then_some(Ranked { paper_id: p, score: n as f64 })
        })
        .collect();
    sort_desc(ranked)
}

/// Text embedded for a paper: title and abstract.
pub fn paper_text(meta: &PaperMetadata) -> String {
    if meta.abstract_text.is_empty() {
        meta.title.clone()
    } else {
        format!("{}. {}", meta.title, meta.abstract_text)
    }
}

/// Text embedded for a topic document: its corpus record, else its title and
/// first section.
pub fn document_text(doc: &ResolvedDocument, corpus: &Corpus) -> String {
    match corpus.get(&doc.paper_id) {
        Some(m) if !m.abstract_text.is_empty() => paper_text(m),
        _ => {
            let b = &doc.parsed.bundle;
            let first = b.sections().first().map_or("", |s| s.body.as_str());
            match &b.content.abstract_text {
                Some(a) => format!("{}. {a}", b.title()),
                None => format!("{}. {first}", b.title()),
            }
        }
    }
}

pub fn rank_embedding(
    doc: &ResolvedDocument,
    filter: &SectionFilter,
    topic_texts: &[String],
    corpus: &Corpus,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<Ranked>, ProviderError> {
    let cands: Vec<PaperId> = candidates(doc, filter).into_iter().filter(|p| corpus.contains(p)).collect();
    if cands.is_empty() || topic_texts.is_empty() {
        return Ok(Vec::new());
    }
    let topic = provider.embed(topic_texts)?;
    let query = mean_vector(&topic);
    let texts: Vec<String> = cands.iter().map(|p| paper_text(corpus.get(p).expect("filtered"))).collect();
    let vectors = provider.embed(&texts)?;
    if vectors.len() != texts.len() || topic.len() != topic_texts.len() {
        return Err(ProviderError::Unavailable("provider returned a batch of the wrong size".into()));
    }
    let ranked =
        cands.into_iter().zip(vectors).map(|(paper_id, v)| Ranked { paper_id, score: cosine(&query, &v) }).collect();
    Ok(sort_desc(ranked))
}

/// Top `k` of a descending ranking. Groups of equal score are put in id
/// order, then shuffled with `rng` before being consumed.
pub fn take_top_k(ranked: &[Ranked], k: usize, rng: &mut ChaCha8Rng) -> Vec<Ranked> {
    let mut out = Vec::with_capacity(k);
    let mut i = 0;
    while i < ranked.len() && out.len() < k {
        let mut j = i + 1;
        while j < ranked.len() && ranked[j].score == ranked[i].score {
            j += 1;
        }
        let mut group: Vec<Ranked> = ranked[i..j].to_vec();
        group.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
        group.shuffle(rng);
        let need = k - out.len();
        out.extend(group.into_iter().take(need));
        i = j;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub k: usize,
    pub seed: u64,
    /// Selected top-k per strategy, in selection order.
    pub per_strategy: BTreeMap<StrategyName, Vec<Ranked>>,
    pub pooled: BTreeSet<PaperId>,
    pub attribution: BTreeMap<PaperId, BTreeSet<StrategyName>>,
    /// Number of strategies (1..=4) -> pooled papers selected by exactly that many.
    pub overlap_histogram: BTreeMap<u8, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Inputs for one pooling run.
pub struct PoolInput<'a> {
    pub doc: &'a ResolvedDocument,
    pub peers: &'a [&'a ResolvedDocument],
    pub corpus: &'a Corpus,
    pub provider: Option<&'a dyn EmbeddingProvider>,
    pub filter: SectionFilter,
}

pub fn pool_topk(input: &PoolInput<'_>, k: usize, seed: u64) -> StrategyReport {
    let k = k.max(1);
    let mut warnings = Vec::new();
    let mut rankings: BTreeMap<StrategyName, Vec<Ranked>> = BTreeMap::new();
    rankings.insert(StrategyName::Linear, rank_linear(input.doc, &input.filter));
    rankings.insert(StrategyName::Global, rank_global(input.doc, &input.filter, input.corpus));
    rankings.insert(StrategyName::Reencountered, rank_reencountered(input.doc, &input.filter, input.peers));
    let embedding = match input.provider {
        Some(provider) => {
            let mut topic = vec![document_text(input.doc, input.corpus)];
            topic.extend(input.peers.iter().map(|p| document_text(p, input.corpus)));
            rank_embedding(input.doc, &input.filter, &topic, input.corpus, provider).unwrap_or_else(|e| {
                warnings.push(e.to_string());
                Vec::new()
            })
        }
        None => {
            warnings.push(ProviderError::Unavailable("no provider configured".into()).to_string());
            Vec::new()
        }
    };
    rankings.insert(StrategyName::Embedding, embedding);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_strategy = BTreeMap::new();
    let mut attribution: BTreeMap<PaperId, BTreeSet<StrategyName>> = BTreeMap::new();
    for (name, ranking) in &rankings {
        let top = take_top_k(ranking, k, &mut rng);
        for r in &top {
            attribution.entry(r.paper_id.clone()).or_default().insert(*name);
        }
        per_strategy.insert(*name, top);
    }
    let pooled: BTreeSet<PaperId> = attribution.keys().cloned().collect();
    let mut overlap_histogram: BTreeMap<u8, usize> = (1..=4).map(|n| (n, 0)).collect();
    for names in attribution.values() {
        *overlap_histogram.entry(names.len() as u8).or_default() += 1;
    }
    StrategyReport { k, seed, per_strategy, pooled, attribution, overlap_histogram, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(id: &str, score: f64) -> Ranked {
        Ranked { paper_id: PaperId::new(id), score }
    }

    #[test]
    fn top_k_without_ties_is_prefix() {
        let ranked = vec![r("a", 3.0), r("b", 2.0), r("c", 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ids: Vec<_> = take_top_k(&ranked, 2, &mut rng).into_iter().map(|x| x.paper_id.0).collect();
        assert_eq!(ids, vec!["a", "b"]);
    }

    #[test]
    fn ties_only_reorder_within_group() {
        let ranked = vec![r("a", 500.0), r("b", 10.0), r("c", 10.0), r("d", 10.0), r("e", 1.0)];
        let mut picks = BTreeSet::new();
        for seed in 0..40 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let top = take_top_k(&ranked, 2, &mut rng);
            assert_eq!(top[0].paper_id.0, "a");
            picks.insert(top[1].paper_id.0.clone());
        }
        assert_eq!(picks, BTreeSet::from(["b".to_owned(), "c".to_owned(), "d".to_owned()]));
    }

    #[test]
    fn same_seed_same_choice() {
        let ranked: Vec<_> = (0..10).map(|i| r(&format!("p{i}"), 1.0)).collect();
        let a = take_top_k(&ranked, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let b = take_top_k(&ranked, 3, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn section_filter_matching() {
        let f = SectionFilter::default();
        assert!(f.accepts("1 Introduction"));
        assert!(f.accepts("RELATED WORK"));
        assert!(!f.accepts("Method"));
        assert!(SectionFilter::All.accepts("Method"));
    }
}
