//! Named parameter tensors and the Adam optimizer.

use std::collections::HashMap;

use rand::Rng;

use crate::tensor::Mat;

pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Mat>,
    index: HashMap<String, usize>,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self { names: Vec::new(), values: Vec::new(), index: HashMap::new() }
    }

    pub fn insert(&mut self, name: &str, value: Mat) -> usize {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        self.names.push(name.to_string());
        self.values.push(value);
        self.index.insert(name.to_string(), self.values.len() - 1);
        self.values.len() - 1
    }

    pub fn id(&self, name: &str) -> usize {
        *self.index.get(name).unwrap_or_else(|| panic!("no parameter named {name}"))
    }

    pub fn get(&self, name: &str) -> &Mat {
        &self.values[self.id(name)]
    }

    pub fn value(&self, id: usize) -> &Mat {
        &self.values[id]
    }

    pub fn value_mut(&mut self, id: usize) -> &mut Mat {
        &mut self.values[id]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(name, tensor)` in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|m| m.data.len()).sum()
    }

    /// Glorot-uniform matrix.
    pub fn glorot<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect())
    }

    pub fn uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, a: f64) -> Mat {
        Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect())
    }

    pub fn filled(rows: usize, cols: usize, x: f64) -> Mat {
        Mat::from_vec(rows, cols, vec![x; rows * cols])
    }
}

/// Gradient buffers aligned with a store.
#[derive(Debug, Clone)]
pub struct Grads(pub Vec<Mat>);

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self(store.values.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect())
    }

    pub fn add(&mut self, pairs: Vec<(usize, Mat)>) {
        for (id, g) in pairs {
            self.0[id].add_assign(&g);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.0.iter_mut().for_each(|m| m.scale_assign(s));
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(Mat::sq_norm).sum::<f64>().sqrt()
    }

    pub fn clear(&mut self) {
        self.0.iter_mut().for_each(|m| m.data.iter_mut().for_each(|x| *x = 0.0));
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub betas: (f64, f64),
    step: u64,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64, betas: (f64, f64)) -> Self {
        let zeros = || store.values.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect();
        Self { lr, betas, step: 0, m: zeros(), v: zeros() }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) {
        self.step += 1;
        let (b1, b2) = self.betas;
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for (i, g) in grads.0.iter().enumerate() {
            let (m, v, p) = (&mut self.m[i], &mut self.v[i], &mut store.values[i]);
            for k in 0..g.data.len() {
                let gk = g.data[k];
                m.data[k] = b1 * m.data[k] + (1.0 - b1) * gk;
                v.data[k] = b2 * v.data[k] + (1.0 - b2) * gk * gk;
                let mh = m.data[k] / c1;
                let vh = v.data[k] / c2;
                p.data[k] -= self.lr * mh / (vh.sqrt() + ADAM_EPS);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let id = store.insert("x", Mat::from_vec(1, 2, vec![3.0, -2.0]));
        let mut adam = Adam::new(&store, 0.1, (0.9, 0.99));
        for _ in 0..500 {
            let x = store.value(id).clone();
            let g = Grads(vec![Mat::from_vec(1, 2, x.data.iter().map(|v| 2.0 * v).collect())]);
            adam.step(&mut store, &g);
        }
        assert!(store.value(id).data.iter().all(|v| v.abs() < 1e-2));
    }
}
