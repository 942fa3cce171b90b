//! Draws MMLM mask plans and TEP edge plans for one packed input, and tallies
//! replacement fractions over many seeds.

use codemodal::assembly::{pack, Budgets, ModalTriple};
use codemodal::objectives::{plan_mmlm, plan_tep, Replacement};

fn main() -> codemodal::Result<()> {
    let triple = ModalTriple::new(
        Some((100..140).collect()),
        (200..230).collect(),
        vec![false; 30],
        (300..330).collect(),
        (1..30).map(|c| ((c - 1) / 2, c)).collect(),
    )?;
    let packed = pack(&triple, &Budgets { nl: 40, pl: 30, ast: 30 })?;
    println!("{} maskable positions", packed.maskable_positions().len());

    let plan = plan_mmlm(&packed, 500, 7)?;
    println!("seed 7 masks {:?}", plan.positions);
    println!("replacements {:?}", plan.replacements);

    let mut counts = [0usize; 3];
    for seed in 0..10_000 {
        for r in plan_mmlm(&packed, 500, seed)?.replacements {
            counts[match r {
                Replacement::Mask => 0,
                Replacement::Random(_) => 1,
                Replacement::Keep => 2,
            }] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    println!(
        "over 10000 plans: mask {:.3}, random {:.3}, keep {:.3}",
        counts[0] as f64 / total as f64,
        counts[1] as f64 / total as f64,
        counts[2] as f64 / total as f64
    );

    let tep = plan_tep(&packed, 7, 1, false);
    println!("TEP: {} pairs, {} positive", tep.len(), tep.positives());
    for (pair, label) in tep.pairs.iter().zip(&tep.labels).take(6) {
        println!("  {pair:?} -> {}", u8::from(*label));
    }
    Ok(())
}
