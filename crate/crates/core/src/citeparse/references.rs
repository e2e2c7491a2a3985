use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use super::{CitationKey, ParseError, ReferenceEntry};
use crate::text::fold_surname;

static NUMERIC_LEAD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[ \t]*\[(\d{1,4})\]").unwrap());
static BLANK_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\n[ \t]*\n").unwrap());
static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b((?:19|20)\d{2})([a-z])?\b").unwrap());
static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"[“"]([^”"]{3,})[”"]"#).unwrap());
static PAREN_YEAR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\(\s*(?:(?:19|20)\d{2}[a-z]?|n\.d\.)\s*\)\.?").unwrap());
static BARE_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:19|20)\d{2}[a-z]?$").unwrap());
static TRAILING_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[,\s]*\(?(?:19|20)\d{2}[a-z]?\)?\s*$").unwrap());
static AUTHOR_SEP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s*(?:;|&|\band\b)\s*").unwrap());
static INITIALS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:\p{Lu}\.?[\s\-]*)+$").unwrap());
static ET_AL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i),?\s*et\s+al\.?").unwrap());
static WS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());

/// Splits a references block into entries.
///
/// Blocks with leading `[n]` tokens are numbered; anything else is read as
/// author-year, one entry per blank-line separated paragraph, per hanging
/// indent group, or per line.
pub fn parse_reference_section(block: &str) -> Result<Vec<ReferenceEntry>, ParseError> {
    if block.trim().is_empty() {
        return Err(ParseError::MalformedReferences("empty references block".into()));
    }
    if NUMERIC_LEAD.is_match(block) {
        Ok(parse_numeric(block))
    } else {
        parse_author_year(block)
    }
}

/// True when the block uses numbered `[n]` entries.
pub fn is_numeric_block(block: &str) -> bool {
    NUMERIC_LEAD.is_match(block)
}

fn collapse(s: &str) -> String {
    WS.replace_all(s.trim(), " ").into_owned()
}

fn parse_numeric(block: &str) -> Vec<ReferenceEntry> {
    let leads: Vec<_> = NUMERIC_LEAD.captures_iter(block).collect();
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for (i, cap) in leads.iter().enumerate() {
        let whole = cap.get(0).unwrap();
        let end = leads.get(i + 1).map_or(block.len(), |n| n.get(0).unwrap().start());
        let n: u32 = match cap[1].parse() {
            Ok(n) => n,
            Err(_) => continue,
        };
        if !seen.insert(n) {
            tracing::warn!(index = n, "duplicate numbered reference ignored");
            continue;
        }
        let raw = collapse(&block[whole.end()..end]);
        let fields = parse_fields(&raw);
        entries.push(ReferenceEntry {
            entry_key: CitationKey::Index(n),
            raw_text: raw,
            title_guess: fields.title,
            authors_guess: fields.authors,
            year_guess: fields.year,
        });
    }
    entries
}

fn split_author_year(block: &str) -> Vec<String> {
    let block = block.replace("\r\n", "\n");
    if BLANK_LINE.is_match(&block) {
        return BLANK_LINE.split(&block).map(collapse).filter(|s| !s.is_empty()).collect();
    }
    let lines: Vec<&str> = block.lines().filter(|l| !l.trim().is_empty()).collect();
    let hanging = lines.iter().skip(1).any(|l| l.starts_with([' ', '\t']));
    let mut chunks: Vec<String> = Vec::new();
    for line in lines {
        if hanging && line.starts_with([' ', '\t']) {
            if let Some(last) = chunks.last_mut() {
                last.push(' ');
                last.push_str(line.trim());
                continue;
            }
        }
        chunks.push(line.trim().to_owned());
    }
    chunks.into_iter().map(|c| collapse(&c)).collect()
}

fn parse_author_year(block: &str) -> Result<Vec<ReferenceEntry>, ParseError> {
    let chunks = split_author_year(block);
    if !chunks.iter().any(|c| YEAR.is_match(c)) {
        return Err(ParseError::MalformedReferences("no numbered entries and no dated author-year entries".into()));
    }
    let mut used = BTreeSet::new();
    let mut entries = Vec::new();
    for raw in chunks {
        let fields = parse_fields(&raw);
        let surname = fields
            .authors
            .first()
            .map(|a| fold_surname(&surname_of(a)))
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| "anon".to_owned());
        let date = match &fields.year_token {
            Some(t) => t.clone(),
            None => "nd".to_owned(),
        };
        let base = format!("{surname}{date}");
        let mut key = base.clone();
        let mut suffix = b'b';
        while !used.insert(key.clone()) {
            key = format!("{base}{}", suffix as char);
            suffix += 1;
        }
        entries.push(ReferenceEntry {
            entry_key: CitationKey::AuthorYear(key),
            raw_text: raw,
            title_guess: fields.title,
            authors_guess: fields.authors,
            year_guess: fields.year,
        });
    }
    Ok(entries)
}

struct Fields {
    authors: Vec<String>,
    title: String,
    year: Option<i32>,
    /// Year including any disambiguation letter, e.g. "2020a".
    year_token: Option<String>,
}

fn parse_fields(raw: &str) -> Fields {
    let (year, year_token) = match YEAR.captures(raw) {
        Some(c) => (c[1].parse().ok(), Some(format!("{}{}", &c[1], c.get(2).map_or("", |m| m.as_str())))),
        None => (None, None),
    };

    let (author_text, title) = if let Some(q) = QUOTED.captures(raw) {
        let start = q.get(0).unwrap().start();
        (raw[..start].to_owned(), clean_title(&q[1]))
    } else if let Some(p) = PAREN_YEAR.find(raw) {
        let rest = &raw[p.end()..];
        let title = segments(rest).into_iter().next().unwrap_or_default();
        (raw[..p.start()].to_owned(), clean_title(&title))
    } else {
        let segs = segments(raw);
        let mut iter = segs.iter().skip(1).skip_while(|s| BARE_YEAR.is_match(s));
        match iter.next() {
            Some(t) => (segs[0].clone(), clean_title(t)),
            None => (String::new(), clean_title(raw)),
        }
    };

    Fields { authors: split_authors(&author_text), title, year, year_token }
}

fn clean_title(t: &str) -> String {
    t.trim().trim_end_matches([',', '.', ';', ':']).trim().to_owned()
}

fn is_initial_token(tok: &str) -> bool {
    let core = tok.trim_start_matches(['(', '[']);
    let mut it = core.chars();
    matches!((it.next(), it.next()), (Some(c), None) if c.is_uppercase())
        || core.eq_ignore_ascii_case("al")
        || core.eq_ignore_ascii_case("jr")
}

/// Sentence-like segments of a reference string. A period ends a segment
/// unless it follows a name initial or "et al".
fn segments(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..chars.len() {
        let c = chars[i];
        if !matches!(c, '.' | '?' | '!') {
            continue;
        }
        let at_end = i + 1 == chars.len();
        if !at_end && !chars[i + 1].is_whitespace() {
            continue;
        }
        if c == '.' {
            let mut s = i;
            while s > start && !chars[s - 1].is_whitespace() {
                s -= 1;
            }
            let tok: String = chars[s..i].iter().collect();
            if is_initial_token(&tok) {
                continue;
            }
        }
        let end = if c == '.' { i } else { i + 1 };
        let seg: String = chars[start..end].iter().collect();
        let seg = seg.trim().to_owned();
        if !seg.is_empty() {
            out.push(seg);
        }
        start = i + 1;
    }
    let tail: String = chars[start..].iter().collect();
    let tail = tail.trim();
    if !tail.is_empty() {
        out.push(tail.to_owned());
    }
    out
}

fn split_authors(text: &str) -> Vec<String> {
    let text = ET_AL.replace_all(text, "");
    let text = TRAILING_YEAR.replace(&text, "");
    let text = text.trim().trim_end_matches([',', ';']).trim();
    if text.is_empty() {
        return Vec::new();
    }
    let mut authors = Vec::new();
    for group in AUTHOR_SEP.split(text) {
        let mut current: Option<String> = None;
        for piece in group.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match current.as_mut() {
                Some(cur) if INITIALS.is_match(piece) && !cur.contains(',') => {
                    cur.push_str(", ");
                    cur.push_str(piece);
                }
                _ => {
                    if let Some(done) = current.take() {
                        authors.push(done);
                    }
                    current = Some(piece.to_owned());
                }
            }
        }
        if let Some(done) = current {
            authors.push(done);
        }
    }
    authors.into_iter().map(|a| a.trim_end_matches([',', ';']).trim().to_owned()).filter(|a| !a.is_empty()).collect()
}

/// Surname of a single author string: "Doe, J." and "J. Doe" both give "Doe".
pub(crate) fn surname_of(author: &str) -> String {
    if let Some((before, _)) = author.split_once(',') {
        return before.trim().to_owned();
    }
    author
        .split_whitespace()
        .rev()
        .find(|t| !is_initial_token(t.trim_end_matches('.')))
        .unwrap_or(author)
        .trim_end_matches('.')
        .to_owned()
}
