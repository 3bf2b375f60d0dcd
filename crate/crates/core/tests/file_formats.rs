use std::collections::BTreeMap;
use std::fs;

use lsc_core::dataio::{
    load_clusters, load_embeddings, load_gold, load_judgments, load_report, load_uses, write_clusters,
    write_embedding_file, write_gold, write_report, GoldScore, Report,
};
use lsc_core::metrics::{EvalResult, Metric};
use lsc_core::{ChangeScore, EmbeddingSet, Method, UsageGraph};

#[test]
fn gold_with_and_without_periods_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gold.tsv");
    let gold = vec![
        GoldScore {
            lemma: "plane".into(),
            graded: 0.88,
            period_pair: None,
        },
        GoldScore {
            lemma: "tip".into(),
            graded: 0.125,
            period_pair: Some(("C1".into(), "C3".into())),
        },
    ];
    write_gold(&path, &gold).unwrap();
    assert_eq!(load_gold(&path).unwrap(), gold);
    write_gold(&path, &load_gold(&path).unwrap()).unwrap();
    assert_eq!(load_gold(&path).unwrap(), gold);
}

#[test]
fn cluster_names_are_numbered_by_first_appearance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clusters.tsv");
    fs::write(&path, "identifier\tcluster\nu1\tbird\nu2\tmachine\nu3\tbird\n").unwrap();
    let c = load_clusters(&path).unwrap();
    assert_eq!(c.labels(), [0, 1, 0]);
    let again = dir.path().join("again.tsv");
    write_clusters(&again, &c).unwrap();
    assert_eq!(load_clusters(&again).unwrap(), c);
}

#[test]
fn skipped_zero_judgments_leave_edges_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let uses = dir.path().join("uses.tsv");
    fs::write(
        &uses,
        "lemma\tidentifier\tcontext\tindexes_target_token\tgrouping\n\
         plane\tp1\tthe plane flew\t4:9\tC1\n\
         plane\tp2\ta plane landed\t2:7\tC2\n",
    )
    .unwrap();
    let judgments = dir.path().join("judgments.tsv");
    fs::write(
        &judgments,
        "identifier1\tidentifier2\tannotator\tjudgment\np1\tp2\ta\t4\np1\tp2\tb\t0\np2\tp1\tc\t3\n",
    )
    .unwrap();
    let loaded = load_judgments(&judgments).unwrap();
    assert_eq!(loaded.skipped_zero, 1);
    let graph = UsageGraph::build("plane", load_uses(&uses).unwrap(), &loaded.judgments).unwrap();
    assert_eq!(graph.weighted_edges(), vec![(0, 1, 3.5)]);
}

#[test]
fn embedding_rows_keep_file_order() {
    let dir = tempfile::tempdir().unwrap();
    let set = EmbeddingSet::new(
        "plane",
        "C1",
        2,
        "sum:1+2",
        vec!["z".into(), "a".into(), "m".into()],
        vec![vec![0.1, 1e-300], vec![-2.5, 3.0], vec![1.0 / 3.0, 7e10]],
    )
    .unwrap();
    write_embedding_file(dir.path().join("plane").join("C1.emb.gz"), &set, "xl").unwrap();
    let store = load_embeddings(dir.path()).unwrap();
    assert_eq!(store[&("plane".to_string(), "C1".to_string())], set);
}

#[test]
fn reports_are_stable_text() {
    let dir = tempfile::tempdir().unwrap();
    let mut report = Report::new("gcd");
    report.config.insert("method".into(), "apd".into());
    report.config.insert("distance".into(), "cosine".into());
    report
        .scores
        .push(ChangeScore::new("plane", Method::Apd, 0.25, ("C1".into(), "C2".into())).with_detail("pairs", 4.0));
    report
        .evaluations
        .push(EvalResult::new("gcd", Metric::Spearman, 1.0, 1));
    report.extra.insert("notes".into(), serde_json::json!({"b": 1, "a": 2}));
    let path = dir.path().join("r.json");
    write_report(&report, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.ends_with("}\n"));
    assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
    assert!(text.find("\"config\"").unwrap() < text.find("\"scores\"").unwrap());
    let loaded = load_report(&path).unwrap();
    assert_eq!(loaded, report);
    let again = dir.path().join("again.json");
    write_report(&loaded, &again).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());

    let value: BTreeMap<String, serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(value["target_count"], 1);
    assert_eq!(value["scores"][0]["method"], "APD");
}
