#![allow(dead_code)]

pub mod oracles;

use std::path::PathBuf;

use scalarprobe::dataset::{generate_entailment, AdjectivePool, Eligibility, EntailmentItem, TemplateSet};
use scalarprobe::extraction::{read_corpus, CorpusComment, ProbeItem};
use scalarprobe::{Exec, Lexicon};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture_comments() -> Vec<CorpusComment> {
    let f = std::fs::File::open(fixture("comments.jsonl")).unwrap();
    let (comments, malformed) = read_corpus(std::io::BufReader::new(f)).unwrap();
    // c41 has an empty body
    assert_eq!(malformed, 1);
    comments
}

pub fn expected_items() -> Vec<ProbeItem> {
    scalarprobe::io::read_jsonl(fixture("expected_items.jsonl")).unwrap()
}

pub fn full_items(lex: &Lexicon) -> Vec<EntailmentItem> {
    generate_entailment(
        lex,
        &TemplateSet::builtin(),
        &AdjectivePool::builtin(),
        &Eligibility::standard(lex),
        Exec::default(),
    )
    .unwrap()
}
