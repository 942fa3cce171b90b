//! Builds contrastive batches under each pairing scheme and evaluates the
//! symmetric InfoNCE loss on hand-set projections.

use codemodal::assembly::{Budgets, ModalTriple};
use codemodal::numcore::{Graph, Tensor};
use codemodal::objectives::{build_contrastive_batch, loss_mcl, loss_mcl_terms, PairingScheme};

fn main() -> codemodal::Result<()> {
    let triples: Vec<ModalTriple> = (0..4u32)
        .map(|i| {
            let b = 10 + 10 * i;
            ModalTriple::new(
                Some(vec![b, b + 1]),
                vec![b + 2, b + 3],
                vec![true, false],
                vec![b + 4, b + 5, b + 6],
                vec![(0, 1), (0, 2)],
            )
        })
        .collect::<codemodal::Result<_>>()?;
    let refs: Vec<&ModalTriple> = triples.iter().collect();
    for scheme in [PairingScheme::NlVsPlast, PairingScheme::TripleVsSwapped] {
        let cb = build_contrastive_batch(&refs, &Budgets::default(), scheme, 60, 3)?;
        let p = &cb.pairs[0];
        println!("{scheme:?}: anchor {:?}", p.anchor.ids);
        println!("{:>w$}  positive {:?}", "", p.positive.ids, w = format!("{scheme:?}").len());
        println!("  negatives of pair 0: {:?}", cb.negatives_of(0));
    }

    let mut g = Graph::new();
    let same = g.input(Tensor::matrix(4, 2, vec![0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5])?);
    let terms = loss_mcl_terms(&mut g, same, same)?;
    println!("equal similarities: each term {:.6} (ln 7 = {:.6})", g.value(terms).data()[0], 7f64.ln());

    let a = g.input(Tensor::matrix(4, 2, vec![3.0, 0.0, 0.0, 3.0, -3.0, 0.0, 0.0, -3.0])?);
    let total = loss_mcl(&mut g, a, a)?;
    println!("well separated pairs: L = {:.6}", g.value(total).item());
    Ok(())
}
