use codemodal::tokenizer::{train_bpe, Vocab, CLS, MASK, PAD, SEP};
use proptest::prelude::*;
use std::sync::OnceLock;

const CORPUS: &[&str] = &[
    "def add(a, b):\n    return a + b\n",
    "compute the sum of two numbers",
    "result = x + y",
    "x = len(\"x\")",
    "if count > 0:\n    total = total * 2",
    "return the length of a string",
];

fn kinds() -> Vec<String> {
    ["binary_operator", "assignment", "module", "call"].iter().map(|s| s.to_string()).collect()
}

fn vocab() -> &'static Vocab {
    static V: OnceLock<Vocab> = OnceLock::new();
    V.get_or_init(|| train_bpe(CORPUS, 90, &kinds()).unwrap())
}

fn alphabet() -> String {
    let mut chars: Vec<char> = CORPUS.concat().chars().collect();
    chars.sort_unstable();
    chars.dedup();
    chars.into_iter().collect()
}

proptest! {
    #[test]
    fn decode_inverts_encode(s in proptest::collection::vec(proptest::sample::select(alphabet().chars().collect::<Vec<_>>()), 0..60)) {
        let s: String = s.into_iter().collect();
        let v = vocab();
        let ids = v.encode_subwords(&s);
        prop_assert_eq!(v.decode(&ids), s.clone());
        prop_assert!(ids.len() <= s.len());
        for id in ids {
            prop_assert!(![PAD, CLS, SEP, MASK].contains(&id));
        }
    }

    #[test]
    fn arbitrary_text_never_yields_structural_specials(s in "\\PC{0,40}") {
        let ids = vocab().encode(&s);
        prop_assert!(ids.len() <= s.len());
        for id in ids {
            prop_assert!(![PAD, CLS, SEP, MASK].contains(&id));
        }
    }
}

#[test]
fn exact_size_and_byte_stable_retraining() {
    let a = train_bpe(CORPUS, 90, &kinds()).unwrap();
    let b = train_bpe(CORPUS, 90, &kinds()).unwrap();
    assert_eq!(a.len(), 90);
    assert_eq!(a.to_file_string(), b.to_file_string());
    assert_eq!(Vocab::from_file_string(&a.to_file_string()).unwrap(), a);
}

#[test]
fn most_frequent_pair_merges_first() {
    let v = train_bpe(["aaab", "aaab"], 5 + 2 + 1, &[]).unwrap();
    assert_eq!(v.merges()[0], ("a".to_string(), "a".to_string()));
}

#[test]
fn kinds_are_atomic_reserved_ids() {
    let v = vocab();
    let ids = v.encode("binary_operator");
    assert_eq!(ids.len(), 1);
    assert!(v.is_reserved(ids[0]));
    assert_eq!(Some(ids[0]), v.kind_id("binary_operator"));
    assert_eq!(v.encode(""), Vec::<u32>::new());
}

#[test]
fn undersized_targets_and_empty_corpora_fail() {
    assert!(train_bpe(CORPUS, 8, &kinds()).is_err());
    assert!(train_bpe(Vec::<String>::new(), 100, &[]).is_err());
}
