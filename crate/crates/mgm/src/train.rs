//! Teacher-forced training and token accuracy.

use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{DecoderInput, Transformer};
use crate::params::{Adam, Grads};
use crate::tensor::Mat;
use crate::MgmError;

/// One teacher-forced sequence pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub src: Vec<usize>,
    pub dec: DecoderInput,
    /// Next-token target per decoder position.
    pub targets: Vec<Option<usize>>,
}

impl Example {
    /// Source ids and a target sequence `BOS … EOS`; the decoder reads all
    /// but the last token and predicts all but the first.
    pub fn shifted(src: Vec<usize>, target: &[usize]) -> Self {
        let dec = DecoderInput::plain(target[..target.len() - 1].to_vec());
        let targets = target[1..].iter().map(|&t| Some(t)).collect();
        Self { src, dec, targets }
    }
}

/// Mean token NLL and parameter gradients of one example.
pub fn example_grads(model: &Transformer, ex: &Example) -> Result<(f64, Vec<(usize, Mat)>), MgmError> {
    let mut s = model.session();
    let logits = s.logits(&ex.src, &ex.dec)?;
    let loss = s.g.cross_entropy(logits, Rc::new(ex.targets.clone()));
    Ok((s.g.value(loss).data[0], s.g.backward(loss)))
}

/// Argmax prediction at every decoder position.
pub fn predict(model: &Transformer, ex: &Example) -> Result<Vec<usize>, MgmError> {
    let mut s = model.session();
    let logits = s.logits(&ex.src, &ex.dec)?;
    let l = s.g.value(logits);
    Ok((0..l.rows).map(|i| argmax(l.row(i))).collect())
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Fraction of targeted positions where the argmax equals the target.
pub fn token_accuracy(model: &Transformer, examples: &[Example]) -> Result<f64, MgmError> {
    let (mut hit, mut total) = (0usize, 0usize);
    for ex in examples {
        for (p, t) in predict(model, ex)?.into_iter().zip(&ex.targets) {
            if let Some(t) = t {
                total += 1;
                hit += (p == *t) as usize;
            }
        }
    }
    if total == 0 {
        return Err(MgmError::EmptyCorpus);
    }
    Ok(hit as f64 / total as f64)
}

/// Adam over shuffled mini-batches for `config.epochs` epochs. Calls
/// `on_epoch(epoch, mean_nll)` after every epoch and returns the trace.
/// Stops early when `stop(epoch, mean_nll)` returns true.
pub fn train(
    model: &mut Transformer,
    examples: &[Example],
    mut on_epoch: impl FnMut(usize, f64),
    mut stop: impl FnMut(&Transformer, usize, f64) -> bool,
) -> Result<Vec<f64>, MgmError> {
    if examples.is_empty() {
        return Err(MgmError::EmptyCorpus);
    }
    let cfg = model.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9));
    let mut adam = Adam::new(&model.params, cfg.lr, cfg.betas);
    let mut grads = Grads::zeros_like(&model.params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch) {
            grads.clear();
            for &i in chunk {
                let (loss, g) = example_grads(model, &examples[i])?;
                if !loss.is_finite() {
                    return Err(MgmError::Diverged { epoch });
                }
                total += loss;
                grads.add(g);
            }
            grads.scale(1.0 / chunk.len() as f64);
            if cfg.grad_clip > 0.0 {
                let norm = grads.norm();
                if norm > cfg.grad_clip {
                    grads.scale(cfg.grad_clip / norm);
                }
            }
            adam.step(&mut model.params, &grads);
        }
        let mean = total / examples.len() as f64;
        trace.push(mean);
        on_epoch(epoch, mean);
        if stop(model, epoch, mean) {
            break;
        }
    }
    Ok(trace)
}

/// Plain-text loss log: `epoch branch nll` per line.
pub fn loss_log_lines(branch: &str, trace: &[f64]) -> String {
    trace.iter().enumerate().map(|(e, l)| format!("{e} {branch} {l:.6}\n")).collect()
}
