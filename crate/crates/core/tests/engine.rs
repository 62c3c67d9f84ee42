//! End-to-end use of the library: files in, scores, ranks, selection and elimination
//! report out.

use std::io::Write;
use std::path::Path;

use sicf_core::corpus::{
    load_candidates, load_corpus, split_corpus, write_candidates, write_corpus, CorpusSplit,
    Dialogue, LabeledDialogue, SplitKind, SummarySet,
};
use sicf_core::eval::{ElimReport, EvalSample, Metric, MetricScorer};
use sicf_core::fusion::{fuse_sicf, select_top, selection_records, Coefficients, ScoreFlag};
use sicf_core::jsonl;
use sicf_core::pipeline::{score_corpus, Providers, ScoringConfig};
use sicf_core::schema::{validate_file, FileKind};
use sicf_core::uncertainty::{BnnKind, PhiConfig, PhiMethod};
use sicf_core::Error;

const NAMES: [&str; 6] = ["Anna", "Ben", "Carla", "Dev", "Ella", "Finn"];
const THINGS: [&str; 6] = ["cake", "tickets", "keys", "gift", "report", "bike"];
const PLACES: [&str; 4] = ["party", "office", "station", "gym"];

fn corpus(n: usize) -> (CorpusSplit, Vec<SummarySet>) {
    let mut split = CorpusSplit {
        name: "fixture".into(),
        ..CorpusSplit::default()
    };
    let mut sets = Vec::new();
    for i in 0..n {
        let (a, b) = (NAMES[i % 6], NAMES[(i + 1) % 6]);
        let (thing, place) = (THINGS[i % 6], PLACES[i % 4]);
        let id = format!("f{i:02}");
        let dialogue = Dialogue::new(
            &*id,
            vec![
                format!("{a}: can you bring the {thing} to the {place}?"),
                format!("{b}: yes, I will bring the {thing}."),
            ],
        )
        .unwrap();
        let reference = format!("{b} will bring the {thing} to the {place}.");
        let mut candidates = vec![reference.clone(); 4];
        // later dialogues get increasingly inconsistent candidates
        for (j, c) in candidates.iter_mut().enumerate().take(i % 4) {
            *c = format!(
                "{} lost the {} at the {}.",
                NAMES[(i + j + 3) % 6],
                THINGS[(i + j) % 6],
                PLACES[j % 4]
            );
        }
        sets.push(SummarySet {
            dialogue_id: id,
            candidates,
            reference: None,
        });
        if i % 5 == 4 {
            split.unlabeled.push(dialogue);
        } else {
            split.labeled.push(LabeledDialogue {
                dialogue,
                reference,
            });
        }
    }
    (split, sets)
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(text.as_bytes()).unwrap();
    path
}

#[test]
fn files_round_trip_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let (split, sets) = corpus(12);
    let corpus_path = dir.path().join("corpus.jsonl");
    let candidates_path = dir.path().join("candidates.jsonl");
    write_corpus(&corpus_path, &split).unwrap();
    write_candidates(&candidates_path, &sets).unwrap();

    let loaded = load_corpus(&corpus_path, SplitKind::Mixed).unwrap();
    assert_eq!(loaded.labeled, split.labeled);
    assert_eq!(loaded.unlabeled, split.unlabeled);
    assert_eq!(load_candidates(&candidates_path).unwrap(), sets);
    assert_eq!(validate_file(FileKind::Corpus, &corpus_path).unwrap(), 12);
    assert_eq!(
        validate_file(FileKind::Candidates, &candidates_path).unwrap(),
        12
    );
    assert!(matches!(
        load_corpus(&corpus_path, SplitKind::Labeled),
        Err(Error::Schema { .. } | Error::Validation(_))
    ));
}

#[test]
fn malformed_records_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "corpus.jsonl",
        "{\"id\":\"a\",\"dialogue\":[\"hi there\"]}\n\n{\"id\":\"b\",\"dialogue\":\"not a list\"}\n",
    );
    match load_corpus(&path, SplitKind::Mixed) {
        Err(Error::Schema { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let empty = write(dir.path(), "empty.jsonl", "\n\n");
    assert!(matches!(
        load_corpus(&empty, SplitKind::Mixed),
        Err(Error::EmptyCorpus(_))
    ));
    assert!(matches!(
        load_corpus(&dir.path().join("missing.jsonl"), SplitKind::Mixed),
        Err(Error::Io { .. })
    ));
}

#[test]
fn scoring_is_independent_of_thread_count() {
    let (split, sets) = corpus(25);
    let providers = Providers::synthetic(1);
    for phi in [
        PhiConfig::default(),
        PhiConfig::new(PhiMethod::Bnn, BnnKind::Epistemic),
        PhiConfig::new(PhiMethod::MBnn, BnnKind::Aleatoric),
    ] {
        let config = ScoringConfig {
            phi,
            ..ScoringConfig::default()
        };
        let one = score_corpus(split.dialogues(), &sets, &providers, &config, 1).unwrap();
        for threads in [2, 3, 8, 64] {
            assert_eq!(
                one,
                score_corpus(split.dialogues(), &sets, &providers, &config, threads).unwrap()
            );
        }
        let ids: Vec<&str> = one.iter().map(|s| s.bundle.dialogue_id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        assert_eq!(ids, sorted);
    }
}

#[test]
fn consistent_candidates_rank_above_inconsistent_ones() {
    let (split, sets) = corpus(20);
    let scores = score_corpus(
        split.dialogues(),
        &sets,
        &Providers::synthetic(1),
        &ScoringConfig::default(),
        2,
    )
    .unwrap();
    let bundles: Vec<_> = scores.iter().map(|s| s.bundle.clone()).collect();
    // identical candidates have zero semantic variance
    for b in &bundles {
        let i: usize = b.dialogue_id[1..].parse().unwrap();
        assert_eq!(b.lambda_sein == 0.0, i.is_multiple_of(4), "{}", b.dialogue_id);
    }
    let table = fuse_sicf(&bundles, Coefficients::default()).unwrap();
    let selected = select_top(&table, 0.25);
    assert_eq!(selected.len(), 5);
    for id in &selected {
        let i: usize = id[1..].parse().unwrap();
        assert_eq!(i % 4, 0, "selected {id}");
    }
    let records = selection_records(&table, &bundles, 0.25).unwrap();
    assert_eq!(
        records.iter().map(|r| &r.id).collect::<Vec<_>>(),
        selected.iter().collect::<Vec<_>>()
    );
}

#[test]
fn noun_free_dialogue_is_flagged_not_dropped() {
    let dialogue = Dialogue::new("quiet", vec!["ok see you".into(), "sure".into()]).unwrap();
    let set = SummarySet {
        dialogue_id: "quiet".into(),
        candidates: vec!["they meet.".into(), "they part.".into()],
        reference: None,
    };
    let scores = score_corpus(
        [&dialogue],
        &[set],
        &Providers::synthetic(0),
        &ScoringConfig::default(),
        1,
    )
    .unwrap();
    assert_eq!(scores[0].bundle.flags, vec![ScoreFlag::CoverageDegenerate]);
    assert_eq!(scores[0].bundle.lambda_cov, 0.0);
    assert!(scores[0].coverage.is_none());
}

#[test]
fn elimination_report_of_the_fused_ranking() {
    let (split, sets) = corpus(30);
    let scores = score_corpus(
        split.dialogues(),
        &sets,
        &Providers::synthetic(2),
        &ScoringConfig::default(),
        4,
    )
    .unwrap();
    let bundles: Vec<_> = scores.iter().map(|s| s.bundle.clone()).collect();
    let labeled: Vec<_> = bundles
        .iter()
        .filter_map(|b| split.reference(&b.dialogue_id).map(|r| (b, r)))
        .collect();
    let samples: Vec<EvalSample> = labeled
        .iter()
        .map(|(b, r)| {
            let set = sets
                .iter()
                .find(|s| s.dialogue_id == b.dialogue_id)
                .unwrap();
            EvalSample {
                id: b.dialogue_id.clone(),
                prediction: set.candidates[b.representative_candidate_idx].clone(),
                reference: r.to_string(),
            }
        })
        .collect();
    let labeled_bundles: Vec<_> = labeled.iter().map(|(b, _)| (*b).clone()).collect();
    let table = fuse_sicf(&labeled_bundles, Coefficients::default()).unwrap();
    let report = ElimReport::build(
        &samples,
        &table.worst_first_ids(),
        &Metric::ALL,
        &MetricScorer::default(),
    )
    .unwrap();
    report.validate().unwrap();
    for metric in Metric::ALL {
        let (curve, oracle) = (&report.curve[&metric], &report.oracle_curve[&metric]);
        assert_eq!(curve.values[0], oracle.values[0]);
        assert!(oracle.mean_0_90 >= curve.mean_0_90 - 1e-12);
        assert!(
            curve.values.windows(2).all(|w| w[1] >= w[0] - 1e-12),
            "{metric}: replacing never hurts"
        );
    }

    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "elim_report.json",
        &serde_json::to_string_pretty(&report).unwrap(),
    );
    assert_eq!(validate_file(FileKind::ElimReport, &path).unwrap(), 4);
    let scores_path = dir.path().join("scores.jsonl");
    jsonl::write(&scores_path, &bundles).unwrap();
    assert_eq!(validate_file(FileKind::Scores, &scores_path).unwrap(), 30);
}

#[test]
fn seeded_splits_are_reproducible() {
    let (full, _) = corpus(30);
    let a = split_corpus(&full, 0.2, 0.5, 9).unwrap();
    assert_eq!(a, split_corpus(&full, 0.2, 0.5, 9).unwrap());
    assert_eq!((a.labeled.len(), a.unlabeled.len()), (6, 15));
    assert_ne!(a, split_corpus(&full, 0.2, 0.5, 10).unwrap());
    assert!(
        split_corpus(&full, 0.9, 0.0, 0).is_err(),
        "only 24 dialogues carry references"
    );
}
