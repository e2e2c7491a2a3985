use std::path::{Path, PathBuf};

use citelens_core::citeparse::{parse_bundle, BundleContent, DocumentBundle, StyleHint};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct ExpectedMarker {
    pub section: usize,
    pub raw_text: String,
    pub keys: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct ExpectedUnresolved {
    pub marker: usize,
    pub key: String,
}

#[derive(Debug, Deserialize)]
pub struct Expected {
    pub style: StyleHint,
    pub markers: Vec<ExpectedMarker>,
    pub entries: Vec<String>,
    pub unresolved: Vec<ExpectedUnresolved>,
    pub skipped: usize,
    pub warnings: usize,
}

#[derive(Debug, Deserialize)]
pub struct Fixture {
    pub bundle: BundleContent,
    pub expected: Expected,
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/parser")
}

pub fn load_all() -> Vec<(String, Fixture)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let f: Fixture =
                serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (p.file_stem().unwrap().to_string_lossy().into_owned(), f)
        })
        .collect()
}

/// Counts of (markers detected correctly, markers expected, links correct,
/// links expected) plus a list of mismatch descriptions.
#[derive(Debug, Default)]
pub struct Score {
    pub markers_ok: usize,
    pub markers_total: usize,
    pub links_ok: usize,
    pub links_total: usize,
    pub errors: Vec<String>,
}

pub fn check(name: &str, f: &Fixture, score: &mut Score) {
    let bundle = DocumentBundle::from_content(f.bundle.clone()).unwrap();
    let doc = parse_bundle(&bundle);
    let e = &f.expected;
    let err = |msg: String| score_err(name, msg);
    let mut errors = Vec::new();
    if doc.style != e.style {
        errors.push(err(format!("style {:?} != {:?}", doc.style, e.style)));
    }
    let entries: Vec<String> = doc.entries.iter().map(|x| x.entry_key.to_string()).collect();
    if entries != e.entries {
        errors.push(err(format!("entries {entries:?} != {:?}", e.entries)));
    }
    if doc.report.skipped != e.skipped {
        errors.push(err(format!("skipped {} != {}", doc.report.skipped, e.skipped)));
    }
    if doc.report.warnings.len() != e.warnings + e.skipped {
        errors.push(err(format!("warnings {:?}", doc.report.warnings)));
    }
    if doc.markers.len() != e.markers.len() {
        errors.push(err(format!("{} markers != {}", doc.markers.len(), e.markers.len())));
    }
    score.markers_total += e.markers.len();
    for (i, want) in e.markers.iter().enumerate() {
        let Some(got) = doc.markers.get(i) else { continue };
        let keys: Vec<String> = got.keys.iter().map(|k| k.to_string()).collect();
        let section_body = &f.bundle.sections[got.section_index].body;
        let span_text: String =
            section_body.chars().skip(got.char_span.start).take(got.char_span.end - got.char_span.start).collect();
        if got.section_index == want.section
            && got.raw_text == want.raw_text
            && keys == want.keys
            && span_text == got.raw_text
        {
            score.markers_ok += 1;
        } else {
            errors.push(err(format!("marker {i}: {:?} {:?} {keys:?} != {want:?}", got.section_index, got.raw_text)));
        }
        // Expected links: every key with an entry, in key order.
        let want_links: Vec<String> = want.keys.iter().filter(|k| e.entries.contains(k)).cloned().collect();
        let got_links: Vec<String> = doc.linked_keys(&got.marker_id).iter().map(|k| k.to_string()).collect();
        score.links_total += want.keys.len();
        let want_unresolved: Vec<String> =
            e.unresolved.iter().filter(|u| u.marker == i).map(|u| u.key.clone()).collect();
        let got_unresolved: Vec<String> =
            doc.unresolved.iter().filter(|u| u.marker_id == got.marker_id).map(|u| u.key.to_string()).collect();
        if got_links == want_links && got_unresolved == want_unresolved {
            score.links_ok += want.keys.len();
        } else {
            errors.push(err(format!(
                "marker {i} links {got_links:?}/{got_unresolved:?} != {want_links:?}/{want_unresolved:?}"
            )));
        }
    }
    score.errors.extend(errors);
}

fn score_err(name: &str, msg: String) -> String {
    format!("{name}: {msg}")
}
