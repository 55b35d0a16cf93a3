//! Central finite-difference check of one gated decoder layer.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{DecoderMode, ModelConfig, Transformer};
use crate::tensor::Mat;

/// Denominator floor, so a gradient that is identically zero (key biases
/// under softmax) is judged by its absolute difference.
pub const SCALE_FLOOR: f64 = 1e-6;

/// Error of one parameter tensor over the flattened analytic gradient `a`
/// and numeric gradient `n`: `|a - n| / max(|a|, |n|, SCALE_FLOOR)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub scalars: usize,
    pub abs_diff: f64,
    pub rel_err: f64,
}

/// Toy shapes: `d_model` 8, two heads, ten encoder and twelve decoder tokens.
pub fn toy_config(seed: u64) -> ModelConfig {
    ModelConfig { layers_enc: 1, layers_dec: 1, heads: 2, d_model: 8, d_ff: 16, max_len: 32, seed, ..ModelConfig::desk() }
}

struct Setup {
    src: Vec<usize>,
    dec: Vec<usize>,
    cross: Vec<usize>,
    gate: Rc<Vec<f64>>,
    weights: Rc<Mat>,
}

fn loss(model: &Transformer, x: &Setup, grads: bool) -> (f64, Vec<(usize, Mat)>) {
    let mut s = model.session();
    let enc = s.encode(&x.src).expect("toy lengths fit");
    let self_in = s.embed(&x.dec, &(0..x.dec.len()).collect::<Vec<_>>());
    let cross_in = s.embed(&x.dec, &x.cross);
    let h = s.gated_layer(0, self_in, cross_in, enc, x.gate.clone());
    let l = s.g.weighted_sum(h, x.weights.clone());
    let value = s.g.value(l).data[0];
    (value, if grads { s.g.backward(l) } else { Vec::new() })
}

/// Compares analytic and numeric gradients (step `h`) for every parameter
/// tensor of decoder layer 0, with a mixed 0/1 region gate.
pub fn check_gated_layer(seed: u64, h: f64) -> Vec<GroupError> {
    let mut model = Transformer::new(toy_config(seed), DecoderMode::Gated).expect("toy config is valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let vocab = motif_core::remi::VOCAB_SIZE;
    let (n_src, n_dec, d) = (10, 12, model.config.d_model);
    let gate: Vec<f64> = (0..n_dec).map(|i| if (3..8).contains(&i) { 1.0 } else { 0.0 }).collect();
    let x = Setup {
        src: (0..n_src).map(|_| rng.gen_range(0..vocab)).collect(),
        dec: (0..n_dec).map(|_| rng.gen_range(0..vocab)).collect(),
        cross: (0..n_dec).map(|i| if gate[i] == 1.0 { 2 + i - 3 } else { i }).collect(),
        gate: Rc::new(gate),
        weights: Rc::new(Mat::from_vec(n_dec, d, (0..n_dec * d).map(|_| rng.gen_range(-1.0..1.0)).collect())),
    };
    let (_, analytic) = loss(&model, &x, true);
    let names: Vec<(usize, String)> = model
        .params
        .iter()
        .enumerate()
        .filter(|(_, (n, _))| n.starts_with("dec.0."))
        .map(|(i, (n, _))| (i, n.to_string()))
        .collect();
    let mut out = Vec::with_capacity(names.len());
    for (id, name) in names {
        let a = analytic.iter().find(|(i, _)| *i == id).map(|(_, m)| m.data.clone());
        let len = model.params.value(id).data.len();
        let a = a.unwrap_or_else(|| vec![0.0; len]);
        let mut num = vec![0.0; len];
        for k in 0..len {
            let orig = model.params.value(id).data[k];
            model.params.value_mut(id).data[k] = orig + h;
            let up = loss(&model, &x, false).0;
            model.params.value_mut(id).data[k] = orig - h;
            let down = loss(&model, &x, false).0;
            model.params.value_mut(id).data[k] = orig;
            num[k] = (up - down) / (2.0 * h);
        }
        let diff = a.iter().zip(&num).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let scale = a.iter().map(|p| p * p).sum::<f64>().sqrt().max(num.iter().map(|q| q * q).sum::<f64>().sqrt());
        out.push(GroupError { name, scalars: len, abs_diff: diff, rel_err: diff / scale.max(SCALE_FLOOR) });
    }
    out
}
