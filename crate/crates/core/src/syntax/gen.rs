//! Random mini-language programs, for fuzzing and property tests.

use rand::seq::SliceRandom;
use rand::Rng;

const NAMES: &[&str] = &["x", "y", "total", "count", "value", "acc", "item", "n"];
const FUNCS: &[&str] = &["len", "max", "min", "abs", "compute", "emit"];
const ARITH: &[&str] = &["+", "-", "*", "/", "%"];
const CMP: &[&str] = &["==", "!=", "<", ">", "<=", ">="];

fn expr<R: Rng>(rng: &mut R, depth: usize) -> String {
    let leaf = depth == 0 || rng.gen_bool(0.35);
    if leaf {
        return match rng.gen_range(0..4) {
            0 | 1 => NAMES.choose(rng).unwrap().to_string(),
            2 => rng.gen_range(0..100).to_string(),
            _ => format!("\"{}\"", NAMES.choose(rng).unwrap()),
        };
    }
    match rng.gen_range(0..4) {
        0 => format!("{} {} {}", expr(rng, depth - 1), ARITH.choose(rng).unwrap(), expr(rng, depth - 1)),
        1 => {
            let n = rng.gen_range(0..3);
            let args: Vec<_> = (0..n).map(|_| expr(rng, depth - 1)).collect();
            format!("{}({})", FUNCS.choose(rng).unwrap(), args.join(", "))
        }
        2 => format!("({})", expr(rng, depth - 1)),
        _ => format!("-{}", expr(rng, depth - 1)),
    }
}

fn condition<R: Rng>(rng: &mut R) -> String {
    format!("{} {} {}", expr(rng, 1), CMP.choose(rng).unwrap(), expr(rng, 1))
}

fn simple<R: Rng>(rng: &mut R, in_function: bool) -> String {
    match rng.gen_range(0..if in_function { 3 } else { 2 }) {
        0 => format!("{} = {}", NAMES.choose(rng).unwrap(), expr(rng, 3)),
        1 => format!("{}({})", FUNCS.choose(rng).unwrap(), expr(rng, 2)),
        _ => format!("return {}", expr(rng, 3)),
    }
}

fn body<R: Rng>(rng: &mut R, indent: usize, nest: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    for _ in 0..rng.gen_range(1..4) {
        if nest > 0 && rng.gen_bool(0.25) {
            out.push_str(&format!("{pad}if {}:\n", condition(rng)));
            body(rng, indent + 4, nest - 1, out);
            if rng.gen_bool(0.5) {
                out.push_str(&format!("{pad}else:\n"));
                body(rng, indent + 4, nest - 1, out);
            }
        } else {
            out.push_str(&format!("{pad}{}\n", simple(rng, true)));
        }
    }
}

/// A syntactically valid random program.
pub fn random_program<R: Rng>(rng: &mut R) -> String {
    let mut out = String::new();
    for _ in 0..rng.gen_range(1..4) {
        if rng.gen_bool(0.5) {
            let arity = rng.gen_range(0..3);
            let params: Vec<_> = NAMES.choose_multiple(rng, arity).cloned().collect();
            out.push_str(&format!("def {}({}):\n", FUNCS.choose(rng).unwrap(), params.join(", ")));
            body(rng, 4, 2, &mut out);
        } else {
            out.push_str(&simple(rng, false));
            out.push('\n');
        }
    }
    out
}
