use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{EncoderConfig, Pooling};
use crate::error::{Error, Result};
use crate::numcore::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::seed;
use crate::tokenizer::{TokenId, PAD};

#[derive(Debug, Clone, Copy)]
enum Init {
    Normal,
    Zeros,
    Ones,
}

type Entry = (String, Vec<usize>, Init);

fn layout(c: &EncoderConfig) -> Vec<Entry> {
    let (h, f, v) = (c.hidden_size, c.ffn_size, c.vocab_size);
    let mut out: Vec<Entry> = Vec::new();
    let linear = |out: &mut Vec<Entry>, p: &str, i: usize, o: usize| {
        out.push((format!("{p}.weight"), vec![i, o], Init::Normal));
        out.push((format!("{p}.bias"), vec![o], Init::Zeros));
    };
    let norm = |out: &mut Vec<Entry>, p: &str| {
        out.push((format!("{p}.gamma"), vec![h], Init::Ones));
        out.push((format!("{p}.beta"), vec![h], Init::Zeros));
    };
    out.push(("embeddings.token".into(), vec![v, h], Init::Normal));
    out.push(("embeddings.position".into(), vec![c.max_positions, h], Init::Normal));
    norm(&mut out, "embeddings.ln");
    for l in 0..c.layers {
        for part in ["query", "key", "value", "output"] {
            linear(&mut out, &format!("layer{l}.attn.{part}"), h, h);
        }
        norm(&mut out, &format!("layer{l}.attn.ln"));
        linear(&mut out, &format!("layer{l}.ffn.in"), h, f);
        linear(&mut out, &format!("layer{l}.ffn.out"), f, h);
        norm(&mut out, &format!("layer{l}.ffn.ln"));
    }
    linear(&mut out, "mlm.transform", h, h);
    norm(&mut out, "mlm.ln");
    out.push(("mlm.bias".into(), vec![v], Init::Zeros));
    linear(&mut out, "ip", h, 1);
    linear(&mut out, "projection.hidden", h, h);
    linear(&mut out, "projection.out", h, c.projection_dim);
    out
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    gamma: ParamId,
    beta: ParamId,
}

#[derive(Debug, Clone)]
struct Layer {
    query: Linear,
    key: Linear,
    value: Linear,
    output: Linear,
    attn_ln: Norm,
    ffn_in: Linear,
    ffn_out: Linear,
    ffn_ln: Norm,
}

#[derive(Debug, Clone)]
struct Handles {
    token: ParamId,
    position: ParamId,
    embed_ln: Norm,
    layers: Vec<Layer>,
    mlm_transform: Linear,
    mlm_ln: Norm,
    mlm_bias: ParamId,
    ip: Linear,
    proj_hidden: Linear,
    proj_out: Linear,
}

/// Post-LN transformer encoder with masked-token, identifier, and
/// projection heads.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub params: ParamStore,
    h: Handles,
}

/// Hidden states of several sequences stacked row-wise.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// `[total_len, hidden_size]`.
    pub hidden: Var,
    pub offsets: Vec<usize>,
    pub lengths: Vec<usize>,
    /// Attention probabilities `[len, len]`, ordered by layer, then
    /// sequence, then head.
    pub attention: Vec<Var>,
}

impl EncoderOutput {
    /// Row of position `pos` of sequence `seq`.
    pub fn row(&self, seq: usize, pos: usize) -> usize {
        self.offsets[seq] + pos
    }

    pub fn cls_rows(&self) -> Vec<usize> {
        self.offsets.clone()
    }

    pub fn total_len(&self) -> usize {
        self.lengths.iter().sum()
    }
}

impl Encoder {
    /// Truncated-normal weights (cut at two standard deviations), zero
    /// biases, unit layer-norm gains.
    pub fn init(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed::derive(seed, &[seed::tag::INIT]));
        let normal = Normal::new(0.0, config.init_std).expect("validated std");
        let mut store = ParamStore::new();
        for (name, shape, init) in layout(&config) {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
                Init::Normal => (0..n)
                    .map(|_| loop {
                        let x: f64 = normal.sample(&mut rng);
                        if x.abs() <= 2.0 * config.init_std {
                            break x;
                        }
                    })
                    .collect(),
            };
            store.add(name, Tensor::new(shape, data)?);
        }
        Self::from_params(config, store)
    }

    /// Wraps existing parameters; names and shapes must match `config`.
    pub fn from_params(config: EncoderConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let expected = layout(&config);
        if expected.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "config expects {} parameter tensors, found {}",
                expected.len(),
                params.len()
            )));
        }
        for ((name, shape, _), (_, have, t)) in expected.iter().zip(params.iter()) {
            if name != have || shape.as_slice() != t.shape() {
                return Err(Error::Checkpoint(format!("expected `{name}` {shape:?}, found `{have}` {:?}", t.shape())));
            }
        }
        let id = |n: &str| params.find(n).expect("layout checked");
        let lin = |p: &str| Linear { weight: id(&format!("{p}.weight")), bias: id(&format!("{p}.bias")) };
        let norm = |p: &str| Norm { gamma: id(&format!("{p}.gamma")), beta: id(&format!("{p}.beta")) };
        let h = Handles {
            token: id("embeddings.token"),
            position: id("embeddings.position"),
            embed_ln: norm("embeddings.ln"),
            layers: (0..config.layers)
                .map(|l| Layer {
                    query: lin(&format!("layer{l}.attn.query")),
                    key: lin(&format!("layer{l}.attn.key")),
                    value: lin(&format!("layer{l}.attn.value")),
                    output: lin(&format!("layer{l}.attn.output")),
                    attn_ln: norm(&format!("layer{l}.attn.ln")),
                    ffn_in: lin(&format!("layer{l}.ffn.in")),
                    ffn_out: lin(&format!("layer{l}.ffn.out")),
                    ffn_ln: norm(&format!("layer{l}.ffn.ln")),
                })
                .collect(),
            mlm_transform: lin("mlm.transform"),
            mlm_ln: norm("mlm.ln"),
            mlm_bias: id("mlm.bias"),
            ip: lin("ip"),
            proj_hidden: lin("projection.hidden"),
            proj_out: lin("projection.out"),
        };
        Ok(Encoder { config, params, h })
    }

    fn linear(&self, g: &mut Graph, x: Var, l: Linear) -> Result<Var> {
        let w = g.param(&self.params, l.weight);
        let b = g.param(&self.params, l.bias);
        let y = g.matmul(x, w)?;
        g.add_row(y, b)
    }

    fn norm(&self, g: &mut Graph, x: Var, n: Norm) -> Result<Var> {
        let gamma = g.param(&self.params, n.gamma);
        let beta = g.param(&self.params, n.beta);
        g.layer_norm(x, gamma, beta, self.config.layer_norm_eps)
    }

    fn dropout(&self, g: &mut Graph, x: Var, rng: &mut Option<&mut ChaCha8Rng>) -> Result<Var> {
        let p = self.config.dropout_rate;
        match rng {
            Some(rng) if p > 0.0 => {
                let keep = 1.0 / (1.0 - p);
                let mask = (0..g.value(x).numel()).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
                g.mul_const(x, mask)
            }
            _ => Ok(x),
        }
    }

    /// Token embedding plus position embedding, one row per id.
    pub fn embed(&self, g: &mut Graph, ids: &[TokenId], positions: &[usize]) -> Result<Var> {
        if ids.len() != positions.len() {
            return Err(Error::Shape { op: "embed", left: vec![ids.len()], right: vec![positions.len()] });
        }
        let token = g.param(&self.params, self.h.token);
        let position = g.param(&self.params, self.h.position);
        let ids: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let t = g.embedding(token, &ids)?;
        let p = g.embedding(position, positions)?;
        g.add(t, p)
    }

    /// Encodes every sequence; rows of all sequences are stacked. Dropout is
    /// applied only when `rng` is given. PAD keys are masked out of attention.
    pub fn forward(
        &self,
        g: &mut Graph,
        seqs: &[&[TokenId]],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<EncoderOutput> {
        if seqs.is_empty() || seqs.iter().any(|s| s.is_empty()) {
            return Err(Error::Contract("forward needs non-empty sequences".into()));
        }
        let mut offsets = Vec::with_capacity(seqs.len());
        let mut ids = Vec::new();
        let mut positions = Vec::new();
        for s in seqs {
            if s.len() > self.config.max_positions {
                return Err(Error::Index { what: "position", index: s.len() - 1, bound: self.config.max_positions });
            }
            offsets.push(ids.len());
            ids.extend_from_slice(s);
            positions.extend(0..s.len());
        }
        let lengths: Vec<usize> = seqs.iter().map(|s| s.len()).collect();

        let e = self.embed(g, &ids, &positions)?;
        let e = self.norm(g, e, self.h.embed_ln)?;
        let mut x = self.dropout(g, e, &mut rng)?;

        let hd = self.config.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let masks: Vec<Option<Vec<f64>>> = seqs
            .iter()
            .map(|s| {
                s.contains(&PAD).then(|| {
                    let key: Vec<f64> = s.iter().map(|&t| if t == PAD { -1e30 } else { 0.0 }).collect();
                    key.repeat(s.len())
                })
            })
            .collect();

        let mut attention = Vec::with_capacity(self.h.layers.len() * seqs.len() * self.config.heads);
        for layer in &self.h.layers {
            let q = self.linear(g, x, layer.query)?;
            let k = self.linear(g, x, layer.key)?;
            let v = self.linear(g, x, layer.value)?;
            let mut per_seq = Vec::with_capacity(seqs.len());
            for (s, (&off, &len)) in offsets.iter().zip(&lengths).enumerate() {
                let mut heads = Vec::with_capacity(self.config.heads);
                for head in 0..self.config.heads {
                    let qh = g.slice(q, off, len, head * hd, hd)?;
                    let kh = g.slice(k, off, len, head * hd, hd)?;
                    let vh = g.slice(v, off, len, head * hd, hd)?;
                    let scores = g.matmul_t(qh, kh)?;
                    let mut scores = g.scale(scores, scale);
                    if let Some(m) = &masks[s] {
                        scores = g.add_const(scores, m)?;
                    }
                    let probs = g.softmax(scores);
                    attention.push(probs);
                    heads.push(g.matmul(probs, vh)?);
                }
                per_seq.push(g.concat_cols(&heads)?);
            }
            let ctx = g.concat_rows(&per_seq)?;
            let attn = self.linear(g, ctx, layer.output)?;
            let attn = self.dropout(g, attn, &mut rng)?;
            let res = g.add(x, attn)?;
            let x1 = self.norm(g, res, layer.attn_ln)?;

            let hmid = self.linear(g, x1, layer.ffn_in)?;
            let hmid = g.gelu(hmid);
            let ffn = self.linear(g, hmid, layer.ffn_out)?;
            let ffn = self.dropout(g, ffn, &mut rng)?;
            let res = g.add(x1, ffn)?;
            x = self.norm(g, res, layer.ffn_ln)?;
        }
        Ok(EncoderOutput { hidden: x, offsets, lengths, attention })
    }

    /// Vocabulary logits for hidden rows, decoding through the tied token
    /// embedding table.
    pub fn mlm_logits(&self, g: &mut Graph, rows: Var) -> Result<Var> {
        let t = self.linear(g, rows, self.h.mlm_transform)?;
        let t = g.gelu(t);
        let t = self.norm(g, t, self.h.mlm_ln)?;
        let table = g.param(&self.params, self.h.token);
        let logits = g.matmul_t(t, table)?;
        let bias = g.param(&self.params, self.h.mlm_bias);
        g.add_row(logits, bias)
    }

    /// One identifier logit per hidden row.
    pub fn ip_logits(&self, g: &mut Graph, rows: Var) -> Result<Var> {
        let z = self.linear(g, rows, self.h.ip)?;
        let n = g.shape(z)[0];
        g.reshape(z, &[n])
    }

    /// One pooled vector per sequence, `[B, hidden]`. `ids` supplies PAD
    /// positions for mean pooling.
    pub fn pool(&self, g: &mut Graph, out: &EncoderOutput, seqs: &[&[TokenId]]) -> Result<Var> {
        match self.config.pooling {
            Pooling::Cls => g.gather_rows(out.hidden, &out.cls_rows()),
            Pooling::Mean => {
                let total = out.total_len();
                let mut w = vec![0.0; seqs.len() * total];
                for (b, s) in seqs.iter().enumerate() {
                    let live = s.iter().filter(|&&t| t != PAD).count().max(1) as f64;
                    for (p, &t) in s.iter().enumerate() {
                        if t != PAD {
                            w[b * total + out.offsets[b] + p] = 1.0 / live;
                        }
                    }
                }
                let w = g.input(Tensor::matrix(seqs.len(), total, w)?);
                g.matmul(w, out.hidden)
            }
        }
    }

    /// Two-layer projection head with tanh between.
    pub fn project(&self, g: &mut Graph, pooled: Var) -> Result<Var> {
        let h = self.linear(g, pooled, self.h.proj_hidden)?;
        let h = g.tanh(h);
        self.linear(g, h, self.h.proj_out)
    }

    /// Pooled projections for a batch, `[B, projection_dim]`.
    pub fn embed_sequences(&self, g: &mut Graph, seqs: &[&[TokenId]], rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let out = self.forward(g, seqs, rng)?;
        let pooled = self.pool(g, &out, seqs)?;
        self.project(g, pooled)
    }
}
