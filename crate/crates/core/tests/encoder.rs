use codemodal::encoder::{Checkpoint, Encoder, EncoderConfig, Pooling};
use codemodal::numcore::{Graph, Tensor, Var};
use codemodal::tokenizer::{TokenId, PAD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy(pooling: Pooling) -> EncoderConfig {
    EncoderConfig {
        layers: 2,
        hidden_size: 8,
        heads: 2,
        ffn_size: 16,
        max_positions: 12,
        vocab_size: 20,
        dropout_rate: 0.0,
        projection_dim: 3,
        pooling,
        init_std: 0.3,
        ..EncoderConfig::default()
    }
}

fn weights(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Fixed random weighting of hidden states plus projections.
fn readout(model: &Encoder, seqs: &[&[TokenId]]) -> (Graph, Var) {
    let mut g = Graph::new();
    let out = model.forward(&mut g, seqs, None).unwrap();
    let w = g.input(weights(g.shape(out.hidden), 1));
    let hw = g.mul(out.hidden, w).unwrap();
    let a = g.sum(hw);
    let pooled = model.pool(&mut g, &out, seqs).unwrap();
    let proj = model.project(&mut g, pooled).unwrap();
    let w2 = g.input(weights(g.shape(proj), 2));
    let pw = g.mul(proj, w2).unwrap();
    let b = g.sum(pw);
    let mlm = g.gather_rows(out.hidden, &[1, 4]).unwrap();
    let logits = model.mlm_logits(&mut g, mlm).unwrap();
    let w3 = g.input(weights(g.shape(logits), 3));
    let lw = g.mul(logits, w3).unwrap();
    let c = g.sum(lw);
    let ip = model.ip_logits(&mut g, mlm).unwrap();
    let d = g.sum(ip);
    let ab = g.add(a, b).unwrap();
    let cd = g.add(c, d).unwrap();
    let total = g.add(ab, cd).unwrap();
    (g, total)
}

#[test]
fn readout_gradients_match_finite_differences() {
    let seqs: [&[TokenId]; 2] = [&[2, 7, 9, 3, 11, 3], &[2, 5, 6, 3, PAD, PAD, PAD]];
    for pooling in [Pooling::Cls, Pooling::Mean] {
        let mut model = Encoder::init(toy(pooling), 3).unwrap();
        let (mut g, loss) = readout(&model, &seqs);
        g.backward(loss).unwrap();
        model.params.zero_grad();
        model.params.accumulate_grads(&g);
        let ids: Vec<_> = model.params.ids().collect();
        for id in ids {
            let analytic = model.params.tensor(id).grad().unwrap().to_vec();
            for k in 0..analytic.len() {
                let orig = model.params.tensor(id).data()[k];
                let mut eval = |x: f64| {
                    model.params.tensor_mut(id).data_mut()[k] = x;
                    let (g, l) = readout(&model, &seqs);
                    g.value(l).item()
                };
                let numeric = (eval(orig + 1e-5) - eval(orig - 1e-5)) / 2e-5;
                model.params.tensor_mut(id).data_mut()[k] = orig;
                let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-4);
                assert!(
                    rel < 1e-4,
                    "{pooling:?} `{}`[{k}]: analytic {} numeric {numeric}",
                    model.params.name(id),
                    analytic[k]
                );
            }
        }
    }
}

#[test]
fn attention_rows_are_distributions_over_live_keys() {
    let model = Encoder::init(toy(Pooling::Cls), 4).unwrap();
    let seqs: [&[TokenId]; 2] = [&[2, 7, 9, 3, PAD, PAD], &[2, 8, 3]];
    let mut g = Graph::new();
    let out = model.forward(&mut g, &seqs, None).unwrap();
    assert_eq!(out.attention.len(), 2 * 2 * 2);
    for (k, &a) in out.attention.iter().enumerate() {
        let seq = seqs[(k / 2) % 2];
        let t = g.value(a);
        assert_eq!(t.shape(), [seq.len(), seq.len()]);
        for r in 0..seq.len() {
            let row = t.row(r);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (c, &id) in seq.iter().enumerate() {
                if id == PAD {
                    assert_eq!(row[c], 0.0);
                }
            }
        }
    }
}

#[test]
fn pad_tail_length_does_not_change_live_rows() {
    let model = Encoder::init(toy(Pooling::Mean), 5).unwrap();
    let short: &[TokenId] = &[2, 7, 9, 3, PAD];
    let long: &[TokenId] = &[2, 7, 9, 3, PAD, PAD, PAD, PAD];
    let mut g = Graph::new();
    let a = model.forward(&mut g, &[short], None).unwrap();
    let b = model.forward(&mut g, &[long], None).unwrap();
    for r in 0..4 {
        for (x, y) in g.value(a.hidden).row(r).iter().zip(g.value(b.hidden).row(r)) {
            assert!((x - y).abs() < 1e-12);
        }
    }
    let pa = model.embed_sequences(&mut g, &[short], None).unwrap();
    let pb = model.embed_sequences(&mut g, &[long], None).unwrap();
    for (x, y) in g.value(pa).data().iter().zip(g.value(pb).data()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn twelve_layers_stay_finite() {
    let cfg = EncoderConfig {
        layers: 12,
        hidden_size: 16,
        heads: 4,
        ffn_size: 32,
        max_positions: 64,
        vocab_size: 100,
        dropout_rate: 0.0,
        ..EncoderConfig::default()
    };
    let model = Encoder::init(cfg, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..5 {
        let ids: Vec<TokenId> = (0..64).map(|_| rng.gen_range(1..100)).collect();
        let mut g = Graph::new();
        let out = model.forward(&mut g, &[&ids], None).unwrap();
        let h = g.value(out.hidden);
        assert!(h.is_finite());
        let norm = h.data().iter().map(|x| x * x).sum::<f64>().sqrt();
        // post-norm rows have unit variance, so the norm is about sqrt(len * hidden)
        assert!(norm < 2.0 * (64.0f64 * 16.0).sqrt(), "norm {norm}");
    }
}

#[test]
fn forward_is_deterministic_without_dropout() {
    let model = Encoder::init(toy(Pooling::Cls), 7).unwrap();
    let ids: &[TokenId] = &[2, 4, 9, 3];
    let run = || {
        let mut g = Graph::new();
        let v = model.embed_sequences(&mut g, &[ids], None).unwrap();
        g.value(v).data().to_vec()
    };
    assert_eq!(run(), run());
}

#[test]
fn out_of_range_ids_and_positions_are_errors() {
    let model = Encoder::init(toy(Pooling::Cls), 8).unwrap();
    let mut g = Graph::new();
    assert!(model.forward(&mut g, &[&[2, 25, 3]], None).is_err());
    assert!(model.forward(&mut g, &[&[2; 13]], None).is_err());
    assert!(model.embed(&mut g, &[2, 3], &[0, 12]).is_err());
}

#[test]
fn checkpoint_round_trip_is_byte_stable() {
    let model = Encoder::init(toy(Pooling::Cls), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let ck = Checkpoint::from_encoder(&model, None, 0);
    ck.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.to_bytes().unwrap(), std::fs::read(&path).unwrap());
    assert_eq!(loaded.to_encoder().unwrap().params, model.params);
    assert_eq!(
        Checkpoint::from_encoder(&Encoder::init(toy(Pooling::Cls), 9).unwrap(), None, 0).to_bytes().unwrap(),
        ck.to_bytes().unwrap()
    );

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] ^= 0xff;
    assert!(Checkpoint::from_bytes(&bytes).is_err());
    let truncated = &std::fs::read(&path).unwrap()[..100];
    assert!(Checkpoint::from_bytes(truncated).is_err());
}
