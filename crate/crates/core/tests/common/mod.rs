#![allow(dead_code)]

use std::collections::BTreeMap;

use citelens_core::corpus::PaperId;
use citelens_core::strategies::{EmbeddingProvider, ProviderError, StrategyName};
use citelens_core::Engine;
use serde_json::json;

const TOPICS: [&str; 6] = ["graphs", "reading", "citations", "embeddings", "parsing", "interfaces"];

pub fn cited_title(n: usize) -> String {
    format!("Cited paper {n} about {}", TOPICS[n % TOPICS.len()])
}

pub fn cited_year(n: usize) -> i32 {
    2000 + (n % 20) as i32
}

/// A numeric-style document whose sections cite global papers by number.
pub struct DocSpec {
    pub id: String,
    pub title: String,
    pub year: i32,
    pub abstract_text: String,
    pub sections: Vec<(String, Vec<usize>)>,
}

pub fn doc(id: &str, title: &str) -> DocSpec {
    DocSpec {
        id: id.into(),
        title: title.into(),
        year: 2022,
        abstract_text: format!("{title} is studied here. It matters for readers."),
        sections: Vec::new(),
    }
}

impl DocSpec {
    pub fn section(mut self, name: &str, cites: &[usize]) -> Self {
        self.sections.push((name.into(), cites.to_vec()));
        self
    }

    pub fn abstract_text(mut self, text: &str) -> Self {
        self.abstract_text = text.into();
        self
    }

    /// Global cite numbers in first-mention order.
    pub fn order(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (_, cites) in &self.sections {
            for c in cites {
                if !out.contains(c) {
                    out.push(*c);
                }
            }
        }
        out
    }

    pub fn local_index(&self, cite: usize) -> usize {
        self.order().iter().position(|c| *c == cite).expect("cited") + 1
    }

    /// The sentence that carries the `k`-th marker of section `s`.
    pub fn sentence(&self, s: usize, k: usize) -> String {
        let (_, cites) = &self.sections[s];
        let c = cites[k];
        format!("Sentence {k} of {} discusses {} [{}].", self.id, TOPICS[c % TOPICS.len()], self.local_index(c))
    }

    pub fn bytes(&self) -> Vec<u8> {
        let sections: Vec<_> = self
            .sections
            .iter()
            .enumerate()
            .map(|(s, (name, cites))| {
                let body: Vec<String> = (0..cites.len()).map(|k| self.sentence(s, k)).collect();
                json!({ "name": name, "body": body.join(" ") })
            })
            .collect();
        let refs: Vec<String> = self
            .order()
            .iter()
            .enumerate()
            .map(|(i, c)| format!("[{}] J. Writer{c}. {}. Venue, {}.", i + 1, cited_title(*c), cited_year(*c)))
            .collect();
        serde_json::to_vec(&json!({
            "paper_id": self.id,
            "title": self.title,
            "year": self.year,
            "abstract": self.abstract_text,
            "sections": sections,
            "references_block": refs.join("\n"),
        }))
        .unwrap()
    }
}

/// The corpus id a global cite number resolved to.
pub fn cited_id(engine: &Engine, n: usize) -> PaperId {
    engine.corpus().lookup(&cited_title(n), Some(cited_year(n))).cloned().expect("cited paper registered")
}

pub fn pid(s: &str) -> PaperId {
    PaperId::new(s)
}

/// Maps "Cited paper N ..." to a unit vector at a fixed angle from the x
/// axis; any other text (the topic documents) maps to the x axis itself, so
/// a candidate's cosine with the topic mean is cos(angle).
pub struct AngleProvider(pub BTreeMap<usize, f64>);

impl AngleProvider {
    pub fn number(text: &str) -> Option<usize> {
        let rest = text.strip_prefix("Cited paper ")?;
        rest.split_whitespace().next()?.parse().ok()
    }
}

impl EmbeddingProvider for AngleProvider {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(texts
            .iter()
            .map(|t| match Self::number(t) {
                Some(n) => {
                    let a = self.0.get(&n).copied().unwrap_or(1.5);
                    vec![a.cos(), a.sin()]
                }
                None => vec![1.0, 0.0],
            })
            .collect())
    }
}

/// A target document T citing 1..=10 in its introduction, two peers, stored
/// citation counts and embedding angles chosen so that each strategy's top 5
/// is fixed in advance.
pub struct PlantedTopic {
    pub engine: Engine,
    pub provider: AngleProvider,
    /// Expected top-5 sets, by global cite number.
    pub expected: BTreeMap<StrategyName, Vec<usize>>,
}

pub fn planted_topic() -> PlantedTopic {
    let mut engine = Engine::in_memory();
    let specs = [
        doc("T", "Target paper on reading")
            .section("Introduction", &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10])
            .section("Method", &[11]),
        doc("P1", "First peer on reading").section("Introduction", &[1, 2, 3, 6, 12]),
        doc("P2", "Second peer on reading").section("Related Work", &[1, 2, 9, 13]),
    ];
    for s in &specs {
        engine.ingest_bytes(&s.bytes()).unwrap();
    }
    let counts =
        [(1, 900), (2, 800), (3, 700), (6, 600), (7, 500), (4, 50), (5, 40), (8, 30), (9, 20), (10, 10), (11, 5000)];
    for (n, c) in counts {
        let id = cited_id(&engine, n);
        let mut meta = engine.corpus().get(&id).unwrap().clone();
        meta.citation_count = Some(c);
        engine.upsert_paper(meta).unwrap();
    }
    let mut angles: BTreeMap<usize, f64> = (1..=13).map(|n| (n, 1.0 + 0.03 * n as f64)).collect();
    for (n, a) in [(1, 0.1), (2, 0.2), (5, 0.3), (7, 0.4), (8, 0.5), (11, 0.0)] {
        angles.insert(n, a);
    }
    let expected = BTreeMap::from([
        (StrategyName::Linear, vec![1, 2, 3, 4, 5]),
        (StrategyName::Global, vec![1, 2, 3, 6, 7]),
        (StrategyName::Reencountered, vec![1, 2, 3, 6, 9]),
        (StrategyName::Embedding, vec![1, 2, 5, 7, 8]),
    ]);
    PlantedTopic { engine, provider: AngleProvider(angles), expected }
}

pub mod parser_fixtures;
