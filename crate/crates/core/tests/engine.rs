mod common;

use citelens_core::activity::{EventBody, NewEvent, Progress};
use citelens_core::augment::UsageCategory;
use citelens_core::augment::{AugmentationType, Color, TypeToggles};
use citelens_core::engine::{CardOutcome, SettingsUpdate};
use citelens_core::usage::SaveOrigin;
use citelens_core::Engine;
use common::{cited_id, doc, pid, DocSpec};

fn topic() -> [DocSpec; 3] {
    [
        doc("A", "Alpha study of readers").section("Introduction", &[1, 2, 3]),
        doc("B", "Beta study of readers").section("Introduction", &[2, 3, 4]),
        doc("C", "Gamma study of readers").section("Introduction", &[3, 4, 5]).section("Method", &[6]),
    ]
}

fn engine_with_topic() -> (Engine, [DocSpec; 3]) {
    let mut e = Engine::in_memory();
    let docs = topic();
    for d in &docs {
        e.ingest_bytes(&d.bytes()).unwrap();
    }
    (e, docs)
}

fn ev(e: &mut Engine, paper: &str, body: EventBody) {
    e.record_event(NewEvent::new(pid(paper), body)).unwrap();
}

fn read_a_half_and_save_b(e: &mut Engine) {
    ev(e, "A", EventBody::Open);
    ev(e, "A", EventBody::Scroll { fraction: Progress::from_fraction(0.5).unwrap() });
    ev(e, "B", EventBody::Open);
    ev(e, "B", EventBody::MarkRead);
    ev(e, "B", EventBody::Save { provenance: None });
}

#[test]
fn shared_references_resolve_to_one_paper() {
    let (e, _) = engine_with_topic();
    let a = e.document(&pid("A")).unwrap();
    let b = e.document(&pid("B")).unwrap();
    let c3 = cited_id(&e, 3);
    assert!(a.cited_papers().contains(&c3));
    assert!(b.cited_papers().contains(&c3));
    assert_eq!(e.corpus().in_degree(&c3), 3);
    assert_eq!(e.corpus().get(&pid("C")).unwrap().outgoing_refs.len(), 4);
}

#[test]
fn reingest_is_idempotent() {
    let (mut e, docs) = engine_with_topic();
    let before = e.corpus().len();
    let out = e.ingest_bytes(&docs[0].bytes()).unwrap();
    assert_eq!(out.paper_id, pid("A"));
    assert_eq!(out.resolution.registered, 0);
    assert_eq!(out.resolution.exact_norm, 3);
    assert_eq!(e.corpus().len(), before);
}

#[test]
fn view_scores_match_hand_computation() {
    let (mut e, _) = engine_with_topic();
    read_a_half_and_save_b(&mut e);
    let view = e.view(&pid("C"), None).unwrap();
    let c3 = cited_id(&e, 3);
    let c4 = cited_id(&e, 4);
    let c5 = cited_id(&e, 5);
    let find = |p| view.decorations.iter().find(|d| d.cited_paper_id == p).unwrap().clone();
    // A: 1 + 0.5; B: 1 + 1.0 + 2 -> 5.5, capped
    let d3 = find(c3);
    assert_eq!(d3.class.color, Color::ReencounteredYellow);
    assert_eq!(d3.score.as_ref().unwrap().value, 5.0);
    assert_eq!(d3.shade_bucket, Some(5));
    let d4 = find(c4);
    assert_eq!(d4.score.as_ref().unwrap().value, 4.0);
    assert_eq!(d4.shade_bucket, Some(4));
    assert_eq!(d4.intensity, Some(0.8));
    let d5 = find(c5);
    assert_eq!(d5.class.color, Color::None);
    assert!(d5.score.is_none());
    assert_eq!(view.decorations.len(), 4);
    assert_eq!(view.overview.total_citations, 4);
    assert_eq!(view.overview.reencountered, 2);
    assert_eq!(view.citations[0].paper_id, cited_id(&e, 3));
}

#[test]
fn deletion_removes_contribution() {
    let (mut e, _) = engine_with_topic();
    read_a_half_and_save_b(&mut e);
    ev(&mut e, "B", EventBody::DeleteHistory);
    let view = e.view(&pid("C"), None).unwrap();
    let c3 = cited_id(&e, 3);
    let c4 = cited_id(&e, 4);
    let score = |p| view.decorations.iter().find(|d| d.cited_paper_id == p).unwrap().score.clone();
    assert_eq!(score(c3).unwrap().value, 1.5);
    assert!(score(c4).is_none());
}

#[test]
fn window_limits_contributors() {
    let (mut e, _) = engine_with_topic();
    read_a_half_and_save_b(&mut e);
    let view = e.view(&pid("C"), Some(1)).unwrap();
    let d3 = view.decorations.iter().find(|d| d.cited_paper_id == cited_id(&e, 3)).unwrap();
    assert_eq!(d3.score.as_ref().unwrap().value, 4.0);
    assert!(e.view(&pid("C"), Some(0)).is_err());
    assert!(e.view(&pid("C"), Some(51)).is_err());
}

#[test]
fn card_lists_history_mentions_newest_first() {
    let (mut e, docs) = engine_with_topic();
    read_a_half_and_save_b(&mut e);
    let c = e.document(&pid("C")).unwrap();
    let c3 = cited_id(&e, 3);
    let marker = c.markers_citing(&c3).next().unwrap().marker_id.clone();
    let CardOutcome::Card(card) = e.open_card(&pid("C"), &marker, None, None).unwrap() else {
        panic!("expected a full card")
    };
    assert_eq!(card.meta.paper_id, c3);
    let ids: Vec<_> = card.history_mentions.iter().map(|m| m.paper_id.clone()).collect();
    assert_eq!(ids, vec![pid("B"), pid("A")]);
    assert_eq!(card.history_mentions[0].citing_sentence, docs[1].sentence(0, 1));
    assert_eq!(card.history_mentions[1].citing_sentence, docs[0].sentence(0, 2));
    assert_eq!(card.history_mentions[0].progress, Progress::FULL);
    assert_eq!(card.history_mentions[1].progress, Progress::from_fraction(0.5).unwrap());
    assert_eq!(card.meta.citation_count, 3);
    assert_eq!(card.class.color, Color::ReencounteredYellow);
    assert!(card.similarity.is_none());
    let last = e.events().last().unwrap();
    assert!(matches!(&last.body, EventBody::CardOpen { reading_paper_id, .. } if *reading_paper_id == pid("C")));
}

#[test]
fn save_from_card_provenance_is_consistent_across_documents() {
    let (mut e, docs) = engine_with_topic();
    let c4 = cited_id(&e, 4);
    let marker_in_c = e.document(&pid("C")).unwrap().markers_citing(&c4).next().unwrap().marker_id.clone();
    e.save_from_card(&pid("C"), &marker_in_c, None, None).unwrap();
    let view = e.view(&pid("C"), None).unwrap();
    assert_eq!(view.decorations.iter().find(|d| d.cited_paper_id == c4).unwrap().class.color, Color::SavedRed);

    let marker_in_b = e.document(&pid("B")).unwrap().markers_citing(&c4).next().unwrap().marker_id.clone();
    let CardOutcome::Card(from_b) = e.open_card(&pid("B"), &marker_in_b, None, None).unwrap() else { panic!() };
    let CardOutcome::Card(from_c) = e.open_card(&pid("C"), &marker_in_c, None, None).unwrap() else { panic!() };
    assert_eq!(from_b.meta, from_c.meta);
    assert_eq!(from_b.saved_from, from_c.saved_from);
    let prov = from_b.saved_from.clone().unwrap();
    assert_eq!(prov.source_paper_id, pid("C"));
    assert_eq!(prov.citing_sentence, docs[2].sentence(0, 1));
    assert_ne!(from_b.context, from_c.context);

    let lib = e.library();
    assert_eq!(lib.len(), 1);
    assert_eq!(lib[0].saved_from_title.as_deref(), Some("Gamma study of readers"));
    assert_eq!(e.library_card(&c4).unwrap().saved_from, Some(prov));
    assert!(e.library_card(&cited_id(&e, 5)).is_err());
}

#[test]
fn unknown_and_unresolved_markers() {
    let mut e = Engine::in_memory();
    e.set_register_unresolved(false);
    let d = doc("D", "Delta").section("Introduction", &[1]);
    e.ingest_bytes(&d.bytes()).unwrap();
    assert_eq!(e.open_card(&pid("D"), "m99", None, None).unwrap_err().code(), "not_found");
    match e.open_card(&pid("D"), "m0", None, None).unwrap() {
        CardOutcome::Degraded(dc) => {
            assert!(dc.degraded);
            assert_eq!(dc.raw_text.len(), 1);
            assert!(dc.raw_text[0].contains("Cited paper 1"));
        }
        CardOutcome::Card(_) => panic!("expected degraded card"),
    }
    assert!(e.events().is_empty());
}

#[test]
fn toggles_hide_colors_but_not_list_scores() {
    let (mut e, _) = engine_with_topic();
    read_a_half_and_save_b(&mut e);
    let update =
        SettingsUpdate { type_toggles: Some([(AugmentationType::Reencountered, false)].into()), ..Default::default() };
    let s = e.update_settings(update).unwrap();
    assert!(!s.type_toggles.enabled(AugmentationType::Reencountered));
    let view = e.view(&pid("C"), None).unwrap();
    assert!(view.decorations.iter().all(|d| d.class.color != Color::ReencounteredYellow));
    assert_eq!(view.overview.reencountered, 2);
    assert_eq!(view.citations[0].class.color, Color::ReencounteredYellow);
    let all_on = e.view_with(&pid("C"), None, Some(&TypeToggles::all(true))).unwrap();
    assert_eq!(all_on.decorations.iter().filter(|d| d.class.color == Color::ReencounteredYellow).count(), 2);
}

#[test]
fn own_papers_mark_heart_and_quote() {
    let (mut e, _) = engine_with_topic();
    let update = SettingsUpdate { own_papers: Some([pid("A")].into()), ..Default::default() };
    e.update_settings(update).unwrap();
    let view = e.view(&pid("C"), None).unwrap();
    assert_eq!(view.overview.cited_by_own, 1);
    assert_eq!(view.overview.own, 0);
}

#[test]
fn window_setting_goes_through_the_log() {
    let (mut e, _) = engine_with_topic();
    let update = SettingsUpdate { window_size: Some(5), ..Default::default() };
    assert_eq!(e.update_settings(update.clone()).unwrap().window_size, 5);
    assert_eq!(e.events().len(), 1);
    e.update_settings(update).unwrap();
    assert_eq!(e.events().len(), 1);
    let bad = SettingsUpdate { window_size: Some(60), ..Default::default() };
    assert_eq!(e.update_settings(bad).unwrap_err().code(), "invalid_input");
}

#[test]
fn events_for_unknown_papers_are_rejected() {
    let (mut e, _) = engine_with_topic();
    let err = e.record_event(NewEvent::new(pid("nope"), EventBody::Save { provenance: None })).unwrap_err();
    assert_eq!(err.code(), "not_found");
}

#[test]
fn usage_attributes_saves_to_card_class() {
    let (mut e, _) = engine_with_topic();
    read_a_half_and_save_b(&mut e);
    let c4 = cited_id(&e, 4);
    let m = e.document(&pid("C")).unwrap().markers_citing(&c4).next().unwrap().marker_id.clone();
    e.open_card(&pid("C"), &m, None, None).unwrap();
    e.save_from_card(&pid("C"), &m, None, None).unwrap();
    let u = e.usage();
    assert_eq!(u.paper_opens, 2);
    assert_eq!(u.card_opens.total, 1);
    assert_eq!(u.card_opens.count(UsageCategory::Reencountered), 1);
    assert_eq!(u.paper_saves.total, 2);
    assert_eq!(u.paper_saves.count(SaveOrigin::Reencountered), 1);
    assert_eq!(u.paper_saves.count(SaveOrigin::SearchExternal), 1);
}

#[test]
fn stub_is_promoted_to_the_bundle_id() {
    let mut e = Engine::in_memory();
    // B's reference list names A's title before A is ingested.
    let a = doc("A", &common::cited_title(7)).section("Introduction", &[1]);
    let mut a_spec = a;
    a_spec.year = common::cited_year(7);
    e.ingest_bytes(&doc("B", "Beta").section("Introduction", &[7, 1]).bytes()).unwrap();
    let stub = cited_id(&e, 7);
    assert_ne!(stub, pid("A"));
    let out = e.ingest_bytes(&a_spec.bytes()).unwrap();
    assert_eq!(out.paper_id, pid("A"));
    assert!(!e.corpus().contains(&stub));
    assert!(e.document(&pid("B")).unwrap().cited_papers().contains(&pid("A")));
    assert!(e.corpus().get(&pid("B")).unwrap().outgoing_refs.contains(&pid("A")));
}

#[test]
fn reopening_a_data_dir_restores_everything() {
    let dir = tempfile::tempdir().unwrap();
    let before = {
        let mut e = Engine::open(dir.path()).unwrap();
        for d in topic() {
            e.ingest_bytes(&d.bytes()).unwrap();
        }
        read_a_half_and_save_b(&mut e);
        e.update_settings(SettingsUpdate { own_papers: Some([pid("B")].into()), ..Default::default() }).unwrap();
        e.view(&pid("C"), None).unwrap()
    };
    let e = Engine::open(dir.path()).unwrap();
    assert!(e.recovery().is_none());
    assert_eq!(e.view(&pid("C"), None).unwrap(), before);
    assert_eq!(e.settings().own_papers.len(), 1);
    assert_eq!(e.view_from_replay(&pid("C"), None).unwrap(), before);
}

#[test]
fn overview_counts_follow_precedence() {
    let mut e = Engine::in_memory();
    e.ingest_bytes(&doc("R", "Ten references").section("Introduction", &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]).bytes())
        .unwrap();
    e.ingest_bytes(&doc("H", "History").section("Introduction", &[1, 7, 8, 9]).bytes()).unwrap();
    let c: Vec<String> = (0..=10).map(|n| if n == 0 { String::new() } else { cited_id(&e, n).0 }).collect();
    let own = pid(&c[6]);
    for n in [1, 2] {
        ev(&mut e, &c[n], EventBody::Save { provenance: None });
    }
    for n in [3, 4, 5] {
        ev(&mut e, &c[n], EventBody::Open);
    }
    ev(&mut e, "H", EventBody::Open);
    e.update_settings(SettingsUpdate { own_papers: Some([own].into()), ..Default::default() }).unwrap();
    let o = e.view(&pid("R"), Some(20)).unwrap().overview;
    assert_eq!(o.total_citations, 10);
    assert_eq!((o.saved, o.visited, o.own, o.reencountered, o.cited_by_own), (2, 3, 1, 3, 0));
    let order: Vec<AugmentationType> = o.rows().iter().map(|(t, _)| *t).collect();
    assert_eq!(
        order,
        [
            AugmentationType::Own,
            AugmentationType::CitedByOwn,
            AugmentationType::Reencountered,
            AugmentationType::Saved,
            AugmentationType::Visited
        ]
    );
}
