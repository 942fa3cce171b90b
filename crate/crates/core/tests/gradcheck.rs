//! Every differentiable op checked against central finite differences.

use codemodal::numcore::{Graph, Tensor, Var};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

type Build = fn(&mut Graph, &[Var]) -> Var;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Reduces an op output to a scalar with fixed random weights so that every
/// output element contributes a distinct amount.
fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let w = random(&mut rng, g.shape(y), -1.0, 1.0);
    let shape = g.shape(y).to_vec();
    let w = g.input(Tensor::new(shape, w.into_data()).unwrap());
    let p = g.mul(y, w).unwrap();
    g.sum(p)
}

fn check(inputs: Vec<Tensor>, build: Build, seed: u64) {
    let eval = |inputs: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
        let y = build(&mut g, &vars);
        let l = weighted_sum(&mut g, y, seed);
        g.value(l).item()
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let y = build(&mut g, &vars);
    let loss = weighted_sum(&mut g, y, seed);
    g.backward(loss).unwrap();

    for (k, v) in vars.iter().enumerate() {
        let analytic = g.grad(*v).unwrap().to_vec();
        for i in 0..inputs[k].numel() {
            let mut plus = inputs.clone();
            plus[k].data_mut()[i] += STEP;
            let mut minus = inputs.clone();
            minus[k].data_mut()[i] -= STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * STEP);
            let err = rel_err(analytic[i], numeric);
            assert!(err < TOL, "input {k} element {i}: analytic {} numeric {numeric} rel {err}", analytic[i]);
        }
    }
}

fn ops() -> Vec<(&'static str, Vec<Vec<usize>>, (f64, f64), Build)> {
    vec![
        ("matmul", vec![vec![3, 4], vec![4, 2]], (-1.0, 1.0), |g, v| g.matmul(v[0], v[1]).unwrap()),
        ("matmul_t", vec![vec![3, 4], vec![2, 4]], (-1.0, 1.0), |g, v| g.matmul_t(v[0], v[1]).unwrap()),
        ("add", vec![vec![2, 3], vec![2, 3]], (-1.0, 1.0), |g, v| g.add(v[0], v[1]).unwrap()),
        ("sub", vec![vec![2, 3], vec![2, 3]], (-1.0, 1.0), |g, v| g.sub(v[0], v[1]).unwrap()),
        ("add_row", vec![vec![3, 4], vec![4]], (-1.0, 1.0), |g, v| g.add_row(v[0], v[1]).unwrap()),
        ("mul", vec![vec![2, 3], vec![2, 3]], (-1.0, 1.0), |g, v| g.mul(v[0], v[1]).unwrap()),
        ("scale", vec![vec![5]], (-1.0, 1.0), |g, v| g.scale(v[0], -1.7)),
        ("mul_const", vec![vec![4]], (-1.0, 1.0), |g, v| g.mul_const(v[0], vec![0.0, 1.5, -2.0, 1.0]).unwrap()),
        ("add_const", vec![vec![4]], (-1.0, 1.0), |g, v| g.add_const(v[0], &[0.3, -1.0, 2.0, 0.0]).unwrap()),
        ("sigmoid", vec![vec![2, 3]], (-3.0, 3.0), |g, v| g.sigmoid(v[0])),
        ("tanh", vec![vec![2, 3]], (-2.0, 2.0), |g, v| g.tanh(v[0])),
        ("gelu", vec![vec![2, 3]], (-3.0, 3.0), |g, v| g.gelu(v[0])),
        ("exp", vec![vec![2, 3]], (-2.0, 2.0), |g, v| g.exp(v[0])),
        ("ln", vec![vec![2, 3]], (0.5, 3.0), |g, v| g.ln(v[0]).unwrap()),
        ("softmax", vec![vec![3, 4]], (-2.0, 2.0), |g, v| g.softmax(v[0])),
        ("log_softmax", vec![vec![3, 4]], (-2.0, 2.0), |g, v| g.log_softmax(v[0])),
        ("layer_norm", vec![vec![3, 5], vec![5], vec![5]], (-2.0, 2.0), |g, v| {
            g.layer_norm(v[0], v[1], v[2], 1e-12).unwrap()
        }),
        ("embedding", vec![vec![5, 3]], (-1.0, 1.0), |g, v| g.embedding(v[0], &[4, 0, 4, 2]).unwrap()),
        ("gather_cols", vec![vec![2, 4]], (-1.0, 1.0), |g, v| g.gather_cols(v[0], &[3, 0, 1, 1, 2, 0], 3).unwrap()),
        ("slice", vec![vec![4, 5]], (-1.0, 1.0), |g, v| g.slice(v[0], 1, 2, 2, 3).unwrap()),
        ("concat_rows", vec![vec![2, 3], vec![1, 3]], (-1.0, 1.0), |g, v| g.concat_rows(&[v[0], v[1], v[0]]).unwrap()),
        ("concat_cols", vec![vec![2, 3], vec![2, 1]], (-1.0, 1.0), |g, v| g.concat_cols(&[v[1], v[0]]).unwrap()),
        ("reshape", vec![vec![2, 3]], (-1.0, 1.0), |g, v| g.reshape(v[0], &[3, 2]).unwrap()),
        ("sum", vec![vec![2, 3]], (-1.0, 1.0), |g, v| g.sum(v[0])),
        ("mean", vec![vec![2, 3]], (-1.0, 1.0), |g, v| g.mean(v[0])),
        ("sum_last_axis", vec![vec![3, 4]], (-1.0, 1.0), |g, v| g.sum_last_axis(v[0])),
        ("dot", vec![vec![6], vec![6]], (-1.0, 1.0), |g, v| g.dot(v[0], v[1]).unwrap()),
        ("bce_with_logits", vec![vec![4]], (-4.0, 4.0), |g, v| g.bce_with_logits(v[0], &[1.0, 0.0, 0.0, 1.0]).unwrap()),
        ("sum_squares", vec![vec![2, 2], vec![3]], (-1.0, 1.0), |g, v| g.sum_squares(&[v[0], v[1]])),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn every_op_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, shapes, (lo, hi), build) in ops() {
            let inputs = shapes.iter().map(|s| random(&mut rng, s, lo, hi)).collect();
            let result = std::panic::catch_unwind(|| check(inputs, build, seed));
            prop_assert!(result.is_ok(), "op {} failed for seed {}", name, seed);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Graph::new();
        let x = g.input(random(&mut rng, &[4, 7], -30.0, 30.0));
        let y = g.softmax(x);
        for r in 0..4 {
            let s: f64 = g.value(y).row(r).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
