//! Builds the multi-modal triple for one commented function and packs it as
//! `[CLS] NL [SEP] PL [SEP] AST [SEP]`, plus the two retrieval layouts.

use codemodal::assembly::{pack, pack_layout, swap_pl_ast, Budgets, Layout, ModalTriple};
use codemodal::corpus::train_vocab;
use codemodal::syntax::parse;
use codemodal::tokenizer::Vocab;

fn show(vocab: &Vocab, ids: &[u32]) -> String {
    ids.iter().map(|&i| vocab.token(i).unwrap_or("?")).collect::<Vec<_>>().join(" ")
}

fn main() -> codemodal::Result<()> {
    let comment = "add two numbers";
    let tree = parse("def add(a, b):\n    return a + b\n")?;
    let example = codemodal::corpus::Example { comment: Some(comment.into()), tree: tree.clone(), cluster_id: None };
    let vocab = train_vocab(std::slice::from_ref(&example), 50)?;
    let triple = ModalTriple::from_tree(&vocab, Some(comment), &tree)?;
    let budgets = Budgets::default();

    let packed = pack(&triple, &budgets)?;
    println!("full     : {}", show(&vocab, &packed.ids));
    println!("segments : {:?}", packed.segments);
    println!("ident    : {:?}", packed.identifier_labels);
    println!("edges    : {:?}", packed.edge_pairs);
    let swapped = pack(&swap_pl_ast(&triple), &budgets)?;
    println!("swapped  : {}", show(&vocab, &swapped.ids));
    println!("nl only  : {}", show(&vocab, &pack_layout(&triple, &budgets, Layout::NlOnly)?.ids));
    println!("code only: {}", show(&vocab, &pack_layout(&triple, &budgets, Layout::CodeOnly)?.ids));
    Ok(())
}
