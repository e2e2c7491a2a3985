mod common;

use common::parser_fixtures::{check, load_all, Score};

#[test]
fn corpus_has_at_least_thirty_fixtures() {
    let all = load_all();
    assert!(all.len() >= 30, "{} fixtures", all.len());
    for kind in ["numeric", "ay", "mixed", "degenerate"] {
        assert!(all.iter().any(|(n, _)| n[3..].starts_with(kind)), "no {kind} fixtures");
    }
}

#[test]
fn every_fixture_parses_as_annotated() {
    let mut score = Score::default();
    for (name, f) in load_all() {
        check(&name, &f, &mut score);
    }
    assert!(score.errors.is_empty(), "{}", score.errors.join("\n"));
    assert_eq!(score.markers_ok, score.markers_total);
    assert_eq!(score.links_ok, score.links_total);
}
