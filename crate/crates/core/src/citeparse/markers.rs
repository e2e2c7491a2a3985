use std::sync::LazyLock;

use regex::Regex;

use super::{CitationKey, CitationMarker, Span, StyleHint};
use crate::text::{fold_surname, CharIndex};

const MAX_RANGE: u32 = 200;

static BRACKET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]\n]{1,120})\]").unwrap());
static RANGE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{1,4})\s*[-–—]\s*(\d{1,4})$").unwrap());
static INDEX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{1,4}$").unwrap());

const SURNAME: &str = r"\p{Lu}[\p{L}'’\-]+";
const YEAR: &str = r"(?:19|20)\d{2}[a-z]?";

static NARRATIVE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"(?P<author>{SURNAME})(?:\s+et\s+al\.?|\s+(?:and|&)\s+{SURNAME})?\s+\((?P<years>{YEAR}(?:\s*[,;]\s*{YEAR})*)\)"
    ))
    .unwrap()
});
static PARENS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(([^()\n]{1,400})\)").unwrap());
static HAS_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:19|20)\d{2}").unwrap());
static CLUSTER_PART: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"^(?i:(?:e\.g\.|i\.e\.|cf\.|see also|see)[,\s]*)?(?P<author>{SURNAME})(?:\s+et\s+al\.?|\s+(?:and|&)\s+{SURNAME})?,?\s+(?P<years>{YEAR}(?:\s*,\s*{YEAR})*)$"
    ))
    .unwrap()
});
static YEAR_TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(YEAR).unwrap());

/// Markers found in one section body, plus how many candidates were rejected.
#[derive(Debug, Clone, Default)]
pub struct Detection {
    pub markers: Vec<CitationMarker>,
    /// Raw text of candidates that looked like citations but did not parse.
    pub skipped: Vec<String>,
}

/// Detects inline citation markers in `body`.
///
/// `Auto` is resolved by [`super::parse_bundle`], which knows the reference
/// entries; called directly, `Auto` behaves like `Numeric`. Marker ids are
/// left empty and assigned by the caller.
pub fn detect_markers(body: &str, style: StyleHint) -> Vec<CitationMarker> {
    detect(body, 0, style).markers
}

pub(crate) fn detect(body: &str, section_index: usize, style: StyleHint) -> Detection {
    match style {
        StyleHint::AuthorYear => detect_author_year(body, section_index),
        StyleHint::Numeric | StyleHint::Auto => detect_numeric(body, section_index),
    }
}

fn detect_numeric(body: &str, section_index: usize) -> Detection {
    let index = CharIndex::new(body);
    let mut out = Detection::default();
    for cap in BRACKET.captures_iter(body) {
        let whole = cap.get(0).unwrap();
        match parse_numeric_list(&cap[1]) {
            Some(keys) => out.markers.push(CitationMarker {
                marker_id: String::new(),
                section_index,
                char_span: Span::new(index.char_offset(whole.start()), index.char_offset(whole.end())),
                raw_text: whole.as_str().to_owned(),
                keys,
            }),
            None => out.skipped.push(whole.as_str().to_owned()),
        }
    }
    out
}

/// Parses "3, 7-9" into [3, 7, 8, 9]. Rejects zero, reversed or oversized
/// ranges and anything that is not a plain list of integers.
pub(crate) fn parse_numeric_list(content: &str) -> Option<Vec<CitationKey>> {
    let mut keys: Vec<u32> = Vec::new();
    for part in content.split([',', ';']) {
        let part = part.trim();
        if INDEX.is_match(part) {
            keys.push(part.parse().ok()?);
        } else {
            let r = RANGE.captures(part)?;
            let a: u32 = r[1].parse().ok()?;
            let b: u32 = r[2].parse().ok()?;
            if a > b || b - a > MAX_RANGE {
                return None;
            }
            keys.extend(a..=b);
        }
    }
    if keys.is_empty() || keys.contains(&0) {
        return None;
    }
    let mut seen = std::collections::BTreeSet::new();
    keys.retain(|k| seen.insert(*k));
    Some(keys.into_iter().map(CitationKey::Index).collect())
}

fn year_keys(author: &str, years: &str) -> Vec<CitationKey> {
    let surname = fold_surname(author);
    let mut keys: Vec<CitationKey> = Vec::new();
    for y in YEAR_TOKEN.find_iter(years) {
        let key = CitationKey::AuthorYear(format!("{surname}{}", y.as_str()));
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys
}

fn detect_author_year(body: &str, section_index: usize) -> Detection {
    let index = CharIndex::new(body);
    let mut out = Detection::default();
    let mut taken: Vec<(usize, usize)> = Vec::new();

    for cap in NARRATIVE.captures_iter(body) {
        let whole = cap.get(0).unwrap();
        taken.push((whole.start(), whole.end()));
        out.markers.push(CitationMarker {
            marker_id: String::new(),
            section_index,
            char_span: Span::new(index.char_offset(whole.start()), index.char_offset(whole.end())),
            raw_text: whole.as_str().to_owned(),
            keys: year_keys(&cap["author"], &cap["years"]),
        });
    }

    for cap in PARENS.captures_iter(body) {
        let whole = cap.get(0).unwrap();
        if taken.iter().any(|&(s, e)| whole.start() < e && s < whole.end()) {
            continue;
        }
        let content = &cap[1];
        if !HAS_YEAR.is_match(content) {
            continue;
        }
        let mut keys = Vec::new();
        let mut ok = true;
        for part in content.split(';') {
            match CLUSTER_PART.captures(part.trim()) {
                Some(p) => {
                    for k in year_keys(&p["author"], &p["years"]) {
                        if !keys.contains(&k) {
                            keys.push(k);
                        }
                    }
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && !keys.is_empty() {
            out.markers.push(CitationMarker {
                marker_id: String::new(),
                section_index,
                char_span: Span::new(index.char_offset(whole.start()), index.char_offset(whole.end())),
                raw_text: whole.as_str().to_owned(),
                keys,
            });
        } else {
            out.skipped.push(whole.as_str().to_owned());
        }
    }
    out.markers.sort_by_key(|m| m.char_span.start);
    out
}
