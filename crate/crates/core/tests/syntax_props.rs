use codemodal::syntax::{
    code_token_labels, export_ast, gen::random_program, ingest_ast, ingest_ast_lines, parse, serialize, AstNode,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_tree() -> impl Strategy<Value = AstNode> {
    let leaf = ("[a-z_]{1,8}", "[a-z0-9+=\"]{1,5}").prop_map(|(k, t)| AstNode::leaf(k, t));
    let empty = "[a-z_]{1,8}".prop_map(|k| AstNode::internal(k, vec![]));
    prop_oneof![leaf, empty].prop_recursive(5, 48, 4, |inner| {
        ("[a-z_]{1,10}", prop::collection::vec(inner, 1..4)).prop_map(|(k, c)| AstNode::internal(k, c))
    })
}

proptest! {
    #[test]
    fn serialization_is_a_bijection(tree in arb_tree()) {
        let seq = serialize(&tree);
        prop_assert_eq!(seq.edges.len(), seq.len() - 1);
        for &(p, c) in &seq.edges {
            prop_assert!(p < c && c < seq.len());
        }
        for (i, &flag) in seq.identifier_flags.iter().enumerate() {
            prop_assert_eq!(flag, seq.tokens[i].leaf && seq.tokens[i].kind == "identifier");
        }
        prop_assert_eq!(seq.to_tree().unwrap(), tree);
    }

    #[test]
    fn json_round_trip(tree in arb_tree()) {
        prop_assert_eq!(AstNode::from_json_str(&tree.to_json_string()).unwrap(), tree);
    }

    #[test]
    fn random_programs_parse(seed in any::<u64>()) {
        let src = random_program(&mut ChaCha8Rng::seed_from_u64(seed));
        let tree = parse(&src).unwrap();
        let seq = serialize(&tree);
        prop_assert_eq!(seq.to_tree().unwrap(), tree.clone());
        // every leaf text appears at its span in the source
        for span in code_token_labels(&tree) {
            prop_assert_eq!(&src[span.start..span.end], span.surface.as_str());
        }
    }
}

#[test]
fn export_then_ingest_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tree.json");
    let tree = parse("def f(a):\n    return len(\"a\") + a\n").unwrap();
    export_ast(&tree, &path).unwrap();
    assert_eq!(ingest_ast(&path).unwrap(), tree);

    let lines = dir.path().join("trees.jsonl");
    let other = parse("x = 1").unwrap();
    std::fs::write(&lines, format!("{}\n\n{}\n", tree.to_json_string(), other.to_json_string())).unwrap();
    assert_eq!(ingest_ast_lines(&lines).unwrap(), vec![tree, other]);
}

#[test]
fn ingest_error_names_file_and_node() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"kind":"module","children":[{"text":"x"}]}"#).unwrap();
    let err = ingest_ast(&path).unwrap_err().to_string();
    assert!(err.contains("bad.json") && err.contains("root.children[0]"), "{err}");
}
