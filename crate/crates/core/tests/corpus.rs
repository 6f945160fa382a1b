use nact::corpus::{load_canonical, parse_corpus, CANONICAL_CORPUS_JSON, CATEGORIES};
use sha2::{Digest, Sha256};

// The shipped corpus is frozen; any edit must update this digest deliberately.
const CANONICAL_SHA256: &str = "ed6f7a1c18f7eb8d8a65cd710dd72c37072fa6e185a6f0e7d0763eb47605fa4d";

#[test]
fn canonical_corpus_is_pinned() {
    let digest = Sha256::digest(CANONICAL_CORPUS_JSON.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, CANONICAL_SHA256);
}

#[test]
fn canonical_corpus_has_two_prompts_per_category() {
    let items = load_canonical();
    assert_eq!(items.len(), 24);
    for (id, _) in CATEGORIES {
        let ids: Vec<_> = items
            .iter()
            .filter(|p| p.category == id)
            .map(|p| p.prompt_id.as_str())
            .collect();
        assert_eq!(ids, vec![format!("{id}.1"), format!("{id}.2")]);
    }
}

#[test]
fn canonical_corpus_reparses_from_disk() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/canonical_corpus.json");
    let from_disk = nact::load_corpus(std::path::Path::new(path)).unwrap();
    assert_eq!(from_disk, load_canonical());
    assert_eq!(parse_corpus(CANONICAL_CORPUS_JSON).unwrap(), from_disk);
}
