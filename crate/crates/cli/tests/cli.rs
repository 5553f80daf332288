use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/synthetic")
        .join(name)
        .display()
        .to_string()
}

fn ontogram(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ontogram"))
        .args(args)
        .env_remove("ONTOGRAM_BIND")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ontogram(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn unknown_flag_prints_usage_and_fails() {
    let out = ontogram(&["parse", "--frobnicate"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn missing_file_is_a_diagnostic() {
    let out = ontogram(&[
        "parse",
        "--corpus",
        "/nonexistent.jsonl",
        "--grammar",
        &data("seed_grammar.txt"),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent.jsonl"));
}

#[test]
fn parse_stats_table_uses_the_usual_field_names() {
    let table = ok(&[
        "parse",
        "--corpus",
        &data("corpus.jsonl"),
        "--grammar",
        &data("grammar_induced.txt"),
        "--stats",
    ]);
    let names: Vec<&str> = table
        .lines()
        .map(|l| l.split("  ").next().unwrap().trim())
        .collect();
    assert_eq!(
        names,
        [
            "sentences",
            "fully parsed sentences",
            "avg. coverage",
            "avg. tree depth",
            "avg. number of leaf nodes",
            "avg. number of null leaf nodes",
            "avg. number of operations",
            "avg parsing time",
        ]
    );
    assert!(table.starts_with("sentences") && table.lines().next().unwrap().ends_with("238"));
}

#[test]
fn zero_iteration_budget_leaves_the_grammar_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.txt");
    ok(&[
        "induce",
        "--corpus",
        &data("corpus.jsonl"),
        "--grammar",
        &data("seed_grammar.txt"),
        "--decisions",
        &data("decisions.txt"),
        "--max-iter",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    let seed = ontogram::load_grammar(data("seed_grammar.txt")).unwrap();
    assert_eq!(std::fs::read_to_string(out).unwrap(), seed.to_text());
}

#[test]
fn scripted_induction_matches_the_committed_grammar() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck");
    let grammar = ok(&[
        "induce",
        "--corpus",
        &data("corpus.jsonl"),
        "--grammar",
        &data("seed_grammar.txt"),
        "--decisions",
        &data("decisions.txt"),
        "--checkpoint",
        ck.to_str().unwrap(),
    ]);
    assert_eq!(
        grammar,
        std::fs::read_to_string(data("grammar_induced.txt")).unwrap()
    );
    assert_eq!(
        std::fs::read_to_string(ck.join("grammar.txt")).unwrap(),
        grammar
    );

    let csv = ok(&["stats", "--checkpoint", ck.to_str().unwrap()]);
    let mut lines = csv.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("iteration,rule,rules,top_frequency"));
    let first = lines.next().unwrap();
    assert!(first.starts_with("0,,"), "{first}");
    // the baseline plus one row per non-neutral decision
    let script = std::fs::read_to_string(data("decisions.txt")).unwrap();
    let parsing = script
        .lines()
        .filter(|l| l.ends_with("\tpositive") || l.ends_with("\tnon-inducible"))
        .count();
    assert_eq!(lines.count(), parsing);

    // replaying the script on the checkpoint changes nothing
    let again = ok(&[
        "induce",
        "--corpus",
        &data("corpus.jsonl"),
        "--resume",
        ck.to_str().unwrap(),
        "--decisions",
        &data("decisions.txt"),
    ]);
    assert_eq!(again, grammar);
}

#[test]
fn relex_eval_reproduces_the_committed_report() {
    let report = ok(&[
        "relex-eval",
        "--corpus",
        &data("corpus.jsonl"),
        "--relations",
        &data("relations.tsv"),
        "--grammar",
        &data("grammar_induced.txt"),
    ]);
    assert_eq!(
        report,
        std::fs::read_to_string(data("relex_report.txt")).unwrap()
    );
}

#[test]
fn tree_dump_feeds_instances_and_relation_models() {
    let dir = tempfile::tempdir().unwrap();
    let trees = dir.path().join("trees.jsonl");
    let model = dir.path().join("model.json");
    ok(&[
        "parse",
        "--corpus",
        &data("corpus.jsonl"),
        "--grammar",
        &data("grammar_induced.txt"),
        "--out",
        trees.to_str().unwrap(),
    ]);
    let isa = ok(&[
        "instances",
        "--trees",
        trees.to_str().unwrap(),
        "--corpus",
        &data("corpus.jsonl"),
    ]);
    assert!(isa.contains("isa\tBotanist\tProfession"), "{isa}");
    assert!(!isa.contains("Sculptor"), "{isa}");

    ok(&[
        "relex-train",
        "--corpus",
        &data("corpus.jsonl"),
        "--relations",
        &data("relations.tsv"),
        "--trees",
        trees.to_str().unwrap(),
        "--model-kind",
        "basic",
        "--out",
        model.to_str().unwrap(),
    ]);
    let predictions = ok(&[
        "relex-predict",
        "--corpus",
        &data("corpus.jsonl"),
        "--model",
        model.to_str().unwrap(),
        "--trees",
        trees.to_str().unwrap(),
    ]);
    // a memorized structure is found again on its own sentence
    assert!(
        predictions
            .lines()
            .any(|l| l.starts_with("birthPlace\tborn000\t")),
        "{predictions}"
    );
}

#[test]
fn ontology_reads_the_induced_grammar() {
    let triples = ok(&["ontology", "--grammar", &data("grammar_induced.txt")]);
    // every positive rule with a single class or instance reading
    for line in triples.lines() {
        let cols: Vec<&str> = line.split('\t').collect();
        assert!(cols.len() >= 4, "{line}");
        assert!(["isa", "subClassOf"].contains(&cols[0]), "{line}");
    }
    assert!(triples.contains("isa\tBorn\tEvent"), "{triples}");
}
