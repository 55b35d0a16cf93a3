//! Encoder-decoder transformer on the tape, with a standard decoder for the
//! variant branches and a region-gated decoder for phrases.

use std::collections::HashMap;
use std::rc::Rc;

use motif_core::remi::VOCAB_SIZE;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::masks::PeTable;
use crate::params::ParamStore;
use crate::tape::{Graph, Var};
use crate::tensor::Mat;
use crate::MgmError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers_enc: usize,
    pub layers_dec: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub lr: f64,
    pub betas: (f64, f64),
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
}

impl ModelConfig {
    /// 6/6 layers, 8 heads, 256/2048, length 1024.
    pub fn full() -> Self {
        Self {
            layers_enc: 6,
            layers_dec: 6,
            heads: 8,
            d_model: 256,
            d_ff: 2048,
            max_len: 1024,
            lr: 2e-4,
            betas: (0.9, 0.99),
            batch: 4,
            epochs: 100,
            seed: 0,
            grad_clip: 1.0,
        }
    }

    /// Small enough to train on a laptop CPU in minutes.
    pub fn desk() -> Self {
        Self { layers_enc: 2, layers_dec: 2, heads: 2, d_model: 64, d_ff: 128, lr: 1e-3, epochs: 60, ..Self::full() }
    }

    pub fn validate(&self) -> Result<(), MgmError> {
        let fail = |m: &str| Err(MgmError::Config(m.to_string()));
        if self.d_model == 0 || self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return fail("d_model must be a positive multiple of heads");
        }
        if self.layers_dec == 0 || self.layers_enc == 0 {
            return fail("encoder and decoder need at least one layer");
        }
        if self.d_ff == 0 || self.max_len < 4 || self.batch == 0 {
            return fail("d_ff, batch must be positive and max_len at least 4");
        }
        if self.lr.is_nan() || self.lr <= 0.0 || !(0.0..1.0).contains(&self.betas.0) || !(0.0..1.0).contains(&self.betas.1) {
            return fail("lr must be positive and betas in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecoderMode {
    /// Self-attention, then cross-attention, then feed-forward.
    Standard,
    /// Per-token hard switch between cross- and self-attention.
    Gated,
}

/// Decoder side of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderInput {
    pub ids: Vec<usize>,
    /// Positions of the cross-attention stream (gated mode only).
    pub cross_positions: Vec<usize>,
    /// Region gate per token (gated mode only).
    pub gate: Vec<f64>,
}

impl DecoderInput {
    pub fn plain(ids: Vec<usize>) -> Self {
        let n = ids.len();
        Self { ids, cross_positions: (0..n).collect(), gate: vec![0.0; n] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transformer {
    pub config: ModelConfig,
    pub mode: DecoderMode,
    pub params: ParamStore,
    pe: PeTable,
}

const ATTN: [&str; 8] = ["wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo"];

impl Transformer {
    pub fn new(config: ModelConfig, mode: DecoderMode) -> Result<Self, MgmError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (d, f) = (config.d_model, config.d_ff);
        let mut p = ParamStore::new();
        p.insert("emb", ParamStore::uniform(&mut rng, VOCAB_SIZE, d, 0.5));
        let ln = |p: &mut ParamStore, name: &str| {
            p.insert(&format!("{name}.g"), ParamStore::filled(1, d, 1.0));
            p.insert(&format!("{name}.b"), Mat::zeros(1, d));
        };
        let attn = |p: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str| {
            for w in &ATTN[..4] {
                p.insert(&format!("{name}.{w}"), ParamStore::glorot(rng, d, d));
            }
            for b in &ATTN[4..] {
                p.insert(&format!("{name}.{b}"), Mat::zeros(1, d));
            }
        };
        let ffn = |p: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str| {
            p.insert(&format!("{name}.w1"), ParamStore::glorot(rng, d, f));
            p.insert(&format!("{name}.b1"), Mat::zeros(1, f));
            p.insert(&format!("{name}.w2"), ParamStore::glorot(rng, f, d));
            p.insert(&format!("{name}.b2"), Mat::zeros(1, d));
        };
        for l in 0..config.layers_enc {
            ln(&mut p, &format!("enc.{l}.ln1"));
            attn(&mut p, &mut rng, &format!("enc.{l}.attn"));
            ln(&mut p, &format!("enc.{l}.ln2"));
            ffn(&mut p, &mut rng, &format!("enc.{l}.ff"));
        }
        ln(&mut p, "enc.ln");
        for l in 0..config.layers_dec {
            ln(&mut p, &format!("dec.{l}.ln_self"));
            attn(&mut p, &mut rng, &format!("dec.{l}.self"));
            ln(&mut p, &format!("dec.{l}.ln_cross"));
            attn(&mut p, &mut rng, &format!("dec.{l}.cross"));
            ln(&mut p, &format!("dec.{l}.ln_ff"));
            ffn(&mut p, &mut rng, &format!("dec.{l}.ff"));
        }
        ln(&mut p, "dec.ln");
        p.insert("out.w", ParamStore::glorot(&mut rng, d, VOCAB_SIZE));
        p.insert("out.b", Mat::zeros(1, VOCAB_SIZE));
        let pe = PeTable::new(config.max_len, d);
        Ok(Self { config, mode, params: p, pe })
    }

    /// Rebuilds a model around loaded parameters; shapes must match.
    pub fn with_params(config: ModelConfig, mode: DecoderMode, params: ParamStore) -> Result<Self, MgmError> {
        let fresh = Self::new(config, mode)?;
        if fresh.params.len() != params.len() {
            return Err(MgmError::Checkpoint("parameter count does not match the config".into()));
        }
        for ((n1, a), (n2, b)) in fresh.params.iter().zip(params.iter()) {
            if n1 != n2 || a.shape() != b.shape() {
                return Err(MgmError::Checkpoint(format!("parameter {n2} does not match {n1} in the config")));
            }
        }
        Ok(Self { params, ..fresh })
    }

    pub fn pe(&self) -> &PeTable {
        &self.pe
    }

    pub fn session(&self) -> Session<'_> {
        Session { g: Graph::new(), model: self, cache: HashMap::new() }
    }
}

/// One forward graph over a model.
pub struct Session<'m> {
    pub g: Graph,
    model: &'m Transformer,
    cache: HashMap<usize, Var>,
}

/// Outputs of the gated attention sublayer.
#[derive(Debug, Clone, Copy)]
pub struct GatedStep {
    pub self_branch: Var,
    pub cross_branch: Var,
    pub h: Var,
}

impl<'m> Session<'m> {
    pub fn param(&mut self, name: &str) -> Var {
        let id = self.model.params.id(name);
        if let Some(&v) = self.cache.get(&id) {
            return v;
        }
        let v = self.g.param(id, self.model.params.value(id).clone());
        self.cache.insert(id, v);
        v
    }

    fn check_len(&self, n: usize) -> Result<(), MgmError> {
        let max = self.model.config.max_len;
        if n == 0 || n > max {
            return Err(MgmError::Length { len: n, max });
        }
        Ok(())
    }

    pub fn layer_norm(&mut self, x: Var, name: &str) -> Var {
        let g = self.param(&format!("{name}.g"));
        let b = self.param(&format!("{name}.b"));
        self.g.layer_norm(x, g, b)
    }

    pub fn linear(&mut self, x: Var, w: &str, b: &str) -> Var {
        let w = self.param(w);
        let b = self.param(b);
        let y = self.g.matmul(x, w);
        self.g.add_row(y, b)
    }

    /// Multi-head attention of `xq` over `xkv`.
    pub fn attention(&mut self, name: &str, xq: Var, xkv: Var, causal: bool) -> Var {
        let heads = self.model.config.heads;
        let dh = self.model.config.d_model / heads;
        let q = self.linear(xq, &format!("{name}.wq"), &format!("{name}.bq"));
        let k = self.linear(xkv, &format!("{name}.wk"), &format!("{name}.bk"));
        let v = self.linear(xkv, &format!("{name}.wv"), &format!("{name}.bv"));
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = self.g.slice_cols(q, h * dh, dh);
            let kh = self.g.slice_cols(k, h * dh, dh);
            let vh = self.g.slice_cols(v, h * dh, dh);
            let s = self.g.matmul_bt(qh, kh);
            let mut s = self.g.scale(s, 1.0 / (dh as f64).sqrt());
            if causal {
                s = self.g.causal_mask(s);
            }
            let p = self.g.softmax(s);
            outs.push(self.g.matmul(p, vh));
        }
        let o = if heads == 1 { outs[0] } else { self.g.concat_cols(&outs) };
        self.linear(o, &format!("{name}.wo"), &format!("{name}.bo"))
    }

    pub fn ffn(&mut self, name: &str, x: Var) -> Var {
        let h = self.linear(x, &format!("{name}.w1"), &format!("{name}.b1"));
        let h = self.g.gelu(h);
        self.linear(h, &format!("{name}.w2"), &format!("{name}.b2"))
    }

    /// Token embeddings plus the encodings of the given positions.
    pub fn embed(&mut self, ids: &[usize], positions: &[usize]) -> Var {
        let emb = self.param("emb");
        let e = self.g.gather(emb, Rc::new(ids.to_vec()));
        let pe = self.g.constant(self.model.pe.rows(positions));
        self.g.add(e, pe)
    }

    pub fn encode(&mut self, src: &[usize]) -> Result<Var, MgmError> {
        self.check_len(src.len())?;
        let positions: Vec<usize> = (0..src.len()).collect();
        let mut x = self.embed(src, &positions);
        for l in 0..self.model.config.layers_enc {
            let a = self.layer_norm(x, &format!("enc.{l}.ln1"));
            let a = self.attention(&format!("enc.{l}.attn"), a, a, false);
            x = self.g.add(x, a);
            let f = self.layer_norm(x, &format!("enc.{l}.ln2"));
            let f = self.ffn(&format!("enc.{l}.ff"), f);
            x = self.g.add(x, f);
        }
        Ok(self.layer_norm(x, "enc.ln"))
    }

    /// `h = r * Cross(LN(c), enc) + (1 - r) * Self(LN(s))` for decoder layer `l`.
    pub fn gated_attention_step(&mut self, l: usize, s: Var, c: Var, enc: Var, gate: Rc<Vec<f64>>) -> GatedStep {
        let a = self.layer_norm(s, &format!("dec.{l}.ln_self"));
        let self_branch = self.attention(&format!("dec.{l}.self"), a, a, true);
        let q = self.layer_norm(c, &format!("dec.{l}.ln_cross"));
        let cross_branch = self.attention(&format!("dec.{l}.cross"), q, enc, false);
        let h = self.g.gate(cross_branch, self_branch, gate);
        GatedStep { self_branch, cross_branch, h }
    }

    /// One full gated decoder layer: attention step, residual, feed-forward.
    pub fn gated_layer(&mut self, l: usize, s: Var, c: Var, enc: Var, gate: Rc<Vec<f64>>) -> Var {
        let step = self.gated_attention_step(l, s, c, enc, gate.clone());
        let base = if s == c { s } else { self.g.gate(c, s, gate) };
        let x = self.g.add(base, step.h);
        let f = self.layer_norm(x, &format!("dec.{l}.ln_ff"));
        let f = self.ffn(&format!("dec.{l}.ff"), f);
        self.g.add(x, f)
    }

    /// Final decoder states (before the output projection).
    pub fn decode_states(&mut self, enc: Var, dec: &DecoderInput) -> Result<Var, MgmError> {
        let n = dec.ids.len();
        self.check_len(n)?;
        let positions: Vec<usize> = (0..n).collect();
        let mut x = match self.model.mode {
            DecoderMode::Standard => {
                let mut x = self.embed(&dec.ids, &positions);
                for l in 0..self.model.config.layers_dec {
                    let a = self.layer_norm(x, &format!("dec.{l}.ln_self"));
                    let a = self.attention(&format!("dec.{l}.self"), a, a, true);
                    x = self.g.add(x, a);
                    let c = self.layer_norm(x, &format!("dec.{l}.ln_cross"));
                    let c = self.attention(&format!("dec.{l}.cross"), c, enc, false);
                    x = self.g.add(x, c);
                    let f = self.layer_norm(x, &format!("dec.{l}.ln_ff"));
                    let f = self.ffn(&format!("dec.{l}.ff"), f);
                    x = self.g.add(x, f);
                }
                x
            }
            DecoderMode::Gated => {
                if dec.cross_positions.len() != n || dec.gate.len() != n {
                    return Err(MgmError::Shape("gate and cross positions need one entry per token".into()));
                }
                if let Some(&p) = dec.cross_positions.iter().find(|&&p| p >= self.model.config.max_len) {
                    return Err(MgmError::Length { len: p + 1, max: self.model.config.max_len });
                }
                let gate = Rc::new(dec.gate.clone());
                let s = self.embed(&dec.ids, &positions);
                let c = self.embed(&dec.ids, &dec.cross_positions);
                let mut x = self.gated_layer(0, s, c, enc, gate.clone());
                for l in 1..self.model.config.layers_dec {
                    x = self.gated_layer(l, x, x, enc, gate.clone());
                }
                x
            }
        };
        x = self.layer_norm(x, "dec.ln");
        Ok(x)
    }

    pub fn logits(&mut self, src: &[usize], dec: &DecoderInput) -> Result<Var, MgmError> {
        let enc = self.encode(src)?;
        let x = self.decode_states(enc, dec)?;
        Ok(self.linear(x, "out.w", "out.b"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(mode: DecoderMode) -> Transformer {
        let cfg = ModelConfig { d_model: 8, d_ff: 16, heads: 2, max_len: 32, ..ModelConfig::desk() };
        Transformer::new(cfg, mode).unwrap()
    }

    #[test]
    fn logits_shape() {
        for mode in [DecoderMode::Standard, DecoderMode::Gated] {
            let m = tiny(mode);
            let mut s = m.session();
            let out = s.logits(&[0, 2, 10, 30], &DecoderInput::plain(vec![0, 2, 11])).unwrap();
            assert_eq!(s.g.value(out).shape(), (3, VOCAB_SIZE));
        }
    }

    #[test]
    fn same_seed_same_weights() {
        assert_eq!(tiny(DecoderMode::Gated).params, tiny(DecoderMode::Gated).params);
    }

    #[test]
    fn length_limit() {
        let m = tiny(DecoderMode::Standard);
        let mut s = m.session();
        assert!(matches!(s.encode(&[0; 40]), Err(MgmError::Length { len: 40, max: 32 })));
    }

    #[test]
    fn invalid_config() {
        let cfg = ModelConfig { heads: 3, ..ModelConfig::desk() };
        assert!(matches!(Transformer::new(cfg, DecoderMode::Standard), Err(MgmError::Config(_))));
    }
}
