mod common;

use codemodal::assembly::{pack, Budgets, ModalTriple, Segment, SegmentOrder};
use codemodal::numcore::{Graph, Tensor, Var};
use codemodal::objectives::{
    build_contrastive_batch, loss_ip, loss_mcl, loss_mcl_terms, loss_mmlm, loss_tep, plan_mmlm, plan_tep,
    PairingScheme, Reduction, TepPlan,
};
use codemodal::syntax::{code_token_labels, parse, serialize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(g: &mut Graph, rows: &[Vec<f64>]) -> Var {
    let data = rows.iter().flatten().copied().collect();
    g.input(Tensor::matrix(rows.len(), rows[0].len(), data).unwrap())
}

#[test]
fn mmlm_uniform_logits_give_ln_v() {
    let mut g = Graph::new();
    let x = matrix(&mut g, &vec![vec![0.7; 9]; 4]);
    let l = loss_mmlm(&mut g, x, &[0, 3, 8, 5], Reduction::Mean).unwrap();
    assert!((g.value(l).item() - 9f64.ln()).abs() < 1e-12);

    let mut sharp = vec![vec![0.0; 9]; 2];
    sharp[0][2] = 60.0;
    sharp[1][7] = 60.0;
    let x = matrix(&mut g, &sharp);
    let l = loss_mmlm(&mut g, x, &[2, 7], Reduction::Mean).unwrap();
    assert!(g.value(l).item() < 1e-20);
}

#[test]
fn mmlm_three_positions_five_classes() {
    let logits = vec![vec![0.3, -1.2, 2.0, 0.0, 0.5], vec![-0.4, 0.9, 0.1, 1.7, -2.2], vec![1.1, 1.1, -0.6, 0.2, 0.8]];
    let targets = [2usize, 0, 4];
    let mut g = Graph::new();
    let x = matrix(&mut g, &logits);
    let ids: Vec<u32> = targets.iter().map(|&t| t as u32).collect();
    let l = loss_mmlm(&mut g, x, &ids, Reduction::Sum).unwrap();
    assert!((g.value(l).item() - common::mmlm_sum(&logits, &targets)).abs() < 1e-12);
}

#[test]
fn identifier_labels_for_result_equals_x_plus_y() {
    let tree = parse("result = x + y").unwrap();
    let labels: Vec<bool> = code_token_labels(&tree).iter().map(|s| s.is_identifier).collect();
    assert_eq!(labels, [true, false, true, false, true]);

    let p = [0.9, 0.2, 0.7, 0.4, 0.6];
    let hand = -(0.9f64.ln() + 0.8f64.ln() + 0.7f64.ln() + 0.6f64.ln() + 0.6f64.ln());
    let mut g = Graph::new();
    let probs = g.input(Tensor::vector(p.to_vec()).unwrap());
    let sum = loss_ip(&mut g, probs, &labels, Reduction::Sum).unwrap();
    let mean = loss_ip(&mut g, probs, &labels, Reduction::Mean).unwrap();
    assert!((g.value(sum).item() - hand).abs() < 1e-12);
    assert!((g.value(mean).item() - hand / 5.0).abs() < 1e-12);
}

#[test]
fn ip_half_probabilities_and_domain() {
    let mut g = Graph::new();
    let half = g.input(Tensor::vector(vec![0.5; 6]).unwrap());
    let l = loss_ip(&mut g, half, &[true, false, true, true, false, false], Reduction::Mean).unwrap();
    assert!((g.value(l).item() - 2f64.ln()).abs() < 1e-12);
    for bad in [0.0, 1.0, 1.5, -0.1] {
        let p = g.input(Tensor::vector(vec![0.5, bad]).unwrap());
        assert!(loss_ip(&mut g, p, &[true, false], Reduction::Mean).is_err());
    }
}

#[test]
fn assignment_result_edge_and_sibling_non_edge() {
    let tree = parse("result = x + y").unwrap();
    let seq = serialize(&tree);
    let find = |surface: &str| seq.tokens.iter().position(|t| t.surface == surface).unwrap();
    let (assign, result, eq) = (find("assignment"), find("result"), find("="));
    let leaves = code_token_labels(&tree);
    let t = ModalTriple::new(
        None,
        vec![9; leaves.len()],
        leaves.iter().map(|l| l.is_identifier).collect(),
        vec![8; seq.len()],
        seq.edges.clone(),
    )
    .unwrap();
    let packed = pack(&t, &Budgets::default()).unwrap();
    let at = |k: usize| packed.ast_positions[k];
    let plan = plan_tep(&packed, 0, 1, true);
    let label = |a: usize, b: usize| {
        let (a, b) = (at(a).min(at(b)), at(a).max(at(b)));
        plan.pairs.iter().position(|&p| p == (a, b)).map(|i| plan.labels[i])
    };
    assert_eq!(label(assign, result), Some(true));
    assert_eq!(label(result, eq), Some(false));

    let op = find("binary_operator");
    for leaf in ["x", "+", "y"] {
        assert_eq!(label(op, find(leaf)), Some(true));
    }
    assert_eq!(label(find("x"), find("+")), Some(false));
}

#[test]
fn tep_orthogonal_and_saturated() {
    let mut g = Graph::new();
    let reps = matrix(&mut g, &[vec![1.0, 0.0], vec![0.0, 2.0], vec![10.0f64.sqrt(), 0.0]]);
    let plan = TepPlan { pairs: vec![(0, 1)], labels: vec![true] };
    let l = loss_tep(&mut g, reps, &plan, Reduction::Mean).unwrap();
    assert!((g.value(l).item() - 2f64.ln()).abs() < 1e-12);
    let reps = matrix(&mut g, &[vec![10.0f64.sqrt(), 0.0], vec![10.0f64.sqrt(), 0.0]]);
    let plan = TepPlan { pairs: vec![(0, 1)], labels: vec![true] };
    let l = loss_tep(&mut g, reps, &plan, Reduction::Mean).unwrap();
    assert!(g.value(l).item() < 1e-4);
}

#[test]
fn tep_four_nodes_matches_oracle() {
    let reps = vec![vec![0.2, -0.5, 1.0], vec![-0.3, 0.8, 0.1], vec![0.6, 0.6, -0.4], vec![-1.0, 0.0, 0.5]];
    let pairs = vec![(0, 1), (0, 2), (1, 3), (2, 3), (0, 3)];
    let labels = vec![true, true, true, false, false];
    let mut g = Graph::new();
    let r = matrix(&mut g, &reps);
    let plan = TepPlan { pairs: pairs.clone(), labels: labels.clone() };
    let l = loss_tep(&mut g, r, &plan, Reduction::Sum).unwrap();
    assert!((g.value(l).item() - common::tep_sum(&reps, &pairs, &labels)).abs() < 1e-12);
}

#[test]
fn mcl_three_pairs_brute_force() {
    let a = vec![vec![0.5, -0.1], vec![0.2, 0.9], vec![-0.7, 0.3]];
    let b = vec![vec![0.4, 0.0], vec![0.1, 1.1], vec![-0.5, 0.6]];
    let mut g = Graph::new();
    let (av, bv) = (matrix(&mut g, &a), matrix(&mut g, &b));
    let l = loss_mcl(&mut g, av, bv).unwrap();
    assert!((g.value(l).item() - common::mcl_sum(&a, &b)).abs() < 1e-12);
}

#[test]
fn mcl_two_pairs_closed_form() {
    // N = 2: each direction sees 2 negatives.
    let (x1, x2, p1, p2) = ([1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.0, -1.0]);
    let d = |u: [f64; 2], v: [f64; 2]| u[0] * v[0] + u[1] * v[1];
    let l = |v, pos, n1, n2| -(d(v, pos) - (d(v, pos).exp() + d(v, n1).exp() + d(v, n2).exp()).ln());
    let want = l(x1, p1, x2, p2) + l(x2, p2, x1, p1) + l(p1, x1, x2, p2) + l(p2, x2, x1, p1);
    let mut g = Graph::new();
    let a = matrix(&mut g, &[x1.to_vec(), x2.to_vec()]);
    let b = matrix(&mut g, &[p1.to_vec(), p2.to_vec()]);
    let got = loss_mcl(&mut g, a, b).unwrap();
    assert!((g.value(got).item() - want).abs() < 1e-12);
}

#[test]
fn mcl_dominant_positive_vanishes_and_needs_two() {
    let mut g = Graph::new();
    let a = matrix(&mut g, &[vec![10.0, 0.0], vec![0.0, 10.0]]);
    let b = matrix(&mut g, &[vec![10.0, 0.0], vec![0.0, 10.0]]);
    let terms = loss_mcl_terms(&mut g, a, b).unwrap();
    assert!(g.value(terms).data().iter().all(|&t| (0.0..1e-20).contains(&t)));
    let one = matrix(&mut g, &[vec![1.0, 0.0]]);
    assert!(loss_mcl(&mut g, one, one).is_err());
}

#[test]
fn argmax_survives_positive_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let anchor: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cands: Vec<Vec<f64>> = (0..10).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let best = |scale: f64| {
            let scores: Vec<f64> =
                cands.iter().map(|c| c.iter().zip(&anchor).map(|(x, y)| scale * x * scale * y).sum()).collect();
            (0..scores.len()).max_by(|&i, &j| scores[i].total_cmp(&scores[j])).unwrap()
        };
        let s = rng.gen_range(0.01..100.0);
        assert_eq!(best(1.0), best(s));
    }
}

fn triples(n: usize) -> Vec<ModalTriple> {
    (0..n)
        .map(|i| {
            let b = 10 + 20 * i as u32;
            ModalTriple::new(
                Some((b..b + 8).collect()),
                (b + 8..b + 14).collect(),
                vec![true, false, true, false, false, true],
                (b + 14..b + 20).collect(),
                vec![(0, 1), (0, 2), (2, 3), (2, 4), (0, 5)],
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn nl_vs_code_segments_are_disjoint() {
    let t = triples(4);
    let refs: Vec<&ModalTriple> = t.iter().collect();
    let cb = build_contrastive_batch(&refs, &Budgets::default(), PairingScheme::NlVsPlast, 200, 1).unwrap();
    for i in 0..4 {
        assert_eq!(cb.negatives_of(i).len(), 6);
        let p = &cb.pairs[i];
        assert!(p.anchor.segments.iter().all(|s| !matches!(s, Segment::Pl | Segment::Ast)));
        assert!(p.anchor.segments.contains(&Segment::Nl));
        assert!(p.positive.segments.iter().all(|s| *s != Segment::Nl));
        assert!(p.positive.segments.contains(&Segment::Pl) && p.positive.segments.contains(&Segment::Ast));
    }
}

#[test]
fn swapped_positive_differs_in_mask_and_order() {
    let t = triples(3);
    let refs: Vec<&ModalTriple> = t.iter().collect();
    let cb = build_contrastive_batch(&refs, &Budgets::default(), PairingScheme::TripleVsSwapped, 200, 5).unwrap();
    for p in &cb.pairs {
        assert_eq!(p.anchor.order, SegmentOrder::PlFirst);
        assert_eq!(p.positive.order, SegmentOrder::AstFirst);
        let back = codemodal::assembly::swap_pl_ast(&p.positive.to_triple());
        let unswapped = pack(&back, &Budgets::default()).unwrap();
        assert_eq!(unswapped.len(), p.anchor.len());
        assert_ne!(unswapped.ids, p.anchor.ids, "masks should come from different seeds");
    }
}

#[test]
fn mask_plans_skip_specials_and_are_seeded() {
    let t = triples(1).remove(0);
    let packed = pack(&t, &Budgets::default()).unwrap();
    for s in 0..200 {
        let plan = plan_mmlm(&packed, 300, s).unwrap();
        assert!(plan.positions.iter().all(|&p| matches!(packed.segments[p], Segment::Nl | Segment::Pl | Segment::Ast)));
        assert_eq!(plan.len(), 3);
        assert_eq!(plan, plan_mmlm(&packed, 300, s).unwrap());
    }
}

#[test]
fn losses_are_non_negative() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let mut g = Graph::new();
        let x = matrix(&mut g, &rows);
        let mmlm = loss_mmlm(&mut g, x, &[0, 1, 2, 0], Reduction::Mean).unwrap();
        let plan = TepPlan { pairs: vec![(0, 1), (2, 3)], labels: vec![true, false] };
        let tep = loss_tep(&mut g, x, &plan, Reduction::Mean).unwrap();
        let a = g.slice(x, 0, 2, 0, 3).unwrap();
        let b = g.slice(x, 2, 2, 0, 3).unwrap();
        let mcl = loss_mcl(&mut g, a, b).unwrap();
        for l in [mmlm, tep, mcl] {
            assert!(g.value(l).item() >= 0.0);
        }
    }
}
