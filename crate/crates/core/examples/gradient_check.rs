//! Compares backpropagated gradients of the full pre-training loss with
//! central finite differences on a tiny encoder.

use codemodal::assembly::{Budgets, ModalTriple};
use codemodal::corpus::{to_triples, train_vocab};
use codemodal::encoder::{Encoder, EncoderConfig};
use codemodal::evaluation::synthetic::synthetic_corpus;
use codemodal::numcore::Graph;
use codemodal::training::{plan_batch, TrainConfig};

fn main() -> codemodal::Result<()> {
    let examples = synthetic_corpus(4, 4, 11)
        .iter()
        .map(|r| r.resolve(std::path::Path::new(".")))
        .collect::<codemodal::Result<Vec<_>>>()?;
    let vocab = train_vocab(&examples, 70)?;
    let triples = to_triples(&examples, &vocab)?;
    let budgets = Budgets { nl: 6, pl: 10, ast: 12 };
    let config = EncoderConfig {
        layers: 2,
        hidden_size: 8,
        heads: 2,
        ffn_size: 16,
        max_positions: budgets.max_packed_len(),
        vocab_size: vocab.len(),
        dropout_rate: 0.0,
        projection_dim: 4,
        init_std: 0.2,
        ..EncoderConfig::default()
    };
    let train = TrainConfig { budgets, l2_lambda: 1e-2, ..TrainConfig::default() };
    let mut model = Encoder::init(config, 1)?;
    let refs: Vec<&ModalTriple> = triples.iter().collect();
    let batch = plan_batch(&refs, &train, vocab.len(), 0, 0)?;

    let mut g = Graph::new();
    let terms = batch.losses(&mut g, &model, &train, None)?;
    println!("total loss {:.6}", g.value(terms.total).item());
    g.backward(terms.total)?;
    model.params.accumulate_grads(&g);

    let ids: Vec<_> = model.params.ids().collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for id in ids {
        let analytic = model.params.tensor(id).grad().unwrap().to_vec();
        let mut param_worst: f64 = 0.0;
        for (k, &a) in analytic.iter().enumerate() {
            let orig = model.params.tensor(id).data()[k];
            let mut at = |x: f64| -> codemodal::Result<f64> {
                model.params.tensor_mut(id).data_mut()[k] = x;
                let mut g = Graph::new();
                let t = batch.losses(&mut g, &model, &train, None)?;
                Ok(g.value(t.total).item())
            };
            let numeric = (at(orig + h)? - at(orig - h)?) / (2.0 * h);
            model.params.tensor_mut(id).data_mut()[k] = orig;
            param_worst = param_worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4));
        }
        println!("{:<32} {:>5} scalars  max rel err {param_worst:.2e}", model.params.name(id), analytic.len());
        worst = worst.max(param_worst);
    }
    println!("worst relative error {worst:.2e}");
    Ok(())
}
