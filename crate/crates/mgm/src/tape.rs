//! Reverse-mode differentiation over a linear tape of matrix ops.

use std::rc::Rc;

use crate::tensor::Mat;

pub const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Const,
    Param(usize),
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    /// Row i: `r_i * a + (1 - r_i) * b`.
    Gate(Var, Var, Rc<Vec<f64>>),
    Softmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var },
    Gelu(Var),
    Gather(Var, Rc<Vec<usize>>),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    CrossEntropy(Var, Rc<Vec<Option<usize>>>, usize),
    WeightedSum(Var, Rc<Mat>),
}

struct Node {
    value: Mat,
    op: Op,
    /// Op-specific cache for the backward pass.
    aux: Option<Mat>,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Mat, op: Op, aux: Option<Mat>) -> Var {
        self.nodes.push(Node { value, op, aux });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, m: Mat) -> Var {
        self.push(m, Op::Const, None)
    }

    /// A leaf whose gradient is reported under `id`.
    pub fn param(&mut self, id: usize, value: Mat) -> Var {
        self.push(value, Op::Param(id), None)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul(a, b), None)
    }

    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = Mat::zeros(va.rows, vb.rows);
        Mat::gemm(va, false, vb, true, 0.0, &mut out);
        self.push(out, Op::MatMulBt(a, b), None)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b), None)
    }

    /// Adds a `1 x cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let mut out = self.value(a).clone();
        let r = self.value(row);
        assert_eq!((r.rows, r.cols), (1, out.cols), "bias shape");
        for i in 0..out.rows {
            for (x, b) in out.row_mut(i).iter_mut().zip(&r.data) {
                *x += b;
            }
        }
        self.push(out, Op::AddRow(a, row), None)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut out = self.value(a).clone();
        out.scale_assign(s);
        self.push(out, Op::Scale(a, s), None)
    }

    /// Per-row hard or soft gate. A row with `r = 1` is exactly `a`, with
    /// `r = 0` exactly `b`.
    pub fn gate(&mut self, a: Var, b: Var, r: Rc<Vec<f64>>) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape());
        assert_eq!(r.len(), va.rows, "one gate value per row");
        let mut out = Mat::zeros(va.rows, va.cols);
        for i in 0..va.rows {
            let (ra, rb, ro) = (va.row(i), vb.row(i), &mut out.data[i * va.cols..(i + 1) * va.cols]);
            match r[i] {
                1.0 => ro.copy_from_slice(ra),
                0.0 => ro.copy_from_slice(rb),
                x => {
                    for c in 0..ro.len() {
                        ro[c] = x * ra[c] + (1.0 - x) * rb[c];
                    }
                }
            }
        }
        self.push(out, Op::Gate(a, b, r), None)
    }

    /// Row softmax. Entries equal to `-inf` get probability zero.
    pub fn softmax(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let mut out = va.clone();
        for i in 0..out.rows {
            let row = out.row_mut(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = if *x == f64::NEG_INFINITY { 0.0 } else { (*x - max).exp() };
                sum += *x;
            }
            row.iter_mut().for_each(|x| *x /= sum);
        }
        self.push(out, Op::Softmax(a), None)
    }

    /// Sets entries above the diagonal to `-inf` (forward only; the masked
    /// entries receive no gradient through the following softmax).
    pub fn causal_mask(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for i in 0..out.rows {
            for j in (i + 1)..out.cols {
                out.data[i * out.cols + j] = f64::NEG_INFINITY;
            }
        }
        // gradient passes straight through to the unmasked entries
        self.push(out, Op::Scale(a, 1.0), None)
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let (vx, g, b) = (self.value(x), self.value(gamma), self.value(beta));
        let n = vx.cols;
        let mut out = Mat::zeros(vx.rows, n);
        // aux row i: [x_hat..., rstd]
        let mut aux = Mat::zeros(vx.rows, n + 1);
        for i in 0..vx.rows {
            let row = vx.row(i);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let rstd = 1.0 / (var + LN_EPS).sqrt();
            for c in 0..n {
                let xh = (row[c] - mean) * rstd;
                aux.data[i * (n + 1) + c] = xh;
                out.data[i * n + c] = g.data[c] * xh + b.data[c];
            }
            aux.data[i * (n + 1) + n] = rstd;
        }
        self.push(out, Op::LayerNorm { x, gamma, beta }, Some(aux))
    }

    /// tanh approximation of GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|x| *x = 0.5 * *x * (1.0 + (GELU_C * (*x + GELU_A * *x * *x * *x)).tanh()));
        self.push(out, Op::Gelu(a), None)
    }

    /// Rows of `table` picked by `ids`.
    pub fn gather(&mut self, table: Var, ids: Rc<Vec<usize>>) -> Var {
        let t = self.value(table);
        let mut out = Mat::zeros(ids.len(), t.cols);
        for (i, &id) in ids.iter().enumerate() {
            out.row_mut(i).copy_from_slice(t.row(id));
        }
        self.push(out, Op::Gather(table, ids), None)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Var {
        let va = self.value(a);
        let mut out = Mat::zeros(va.rows, width);
        for i in 0..va.rows {
            out.row_mut(i).copy_from_slice(&va.row(i)[start..start + width]);
        }
        self.push(out, Op::SliceCols(a, start), None)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let vp = self.value(p);
            assert_eq!(vp.rows, rows);
            for i in 0..rows {
                out.data[i * cols + off..i * cols + off + vp.cols].copy_from_slice(vp.row(i));
            }
            off += vp.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()), None)
    }

    /// Mean negative log-likelihood over rows with a target; `1 x 1`.
    pub fn cross_entropy(&mut self, logits: Var, targets: Rc<Vec<Option<usize>>>) -> Var {
        let vl = self.value(logits);
        assert_eq!(vl.rows, targets.len());
        let mut probs = vl.clone();
        let mut nll = 0.0;
        let mut count = 0;
        for i in 0..probs.rows {
            let row = probs.row_mut(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            row.iter_mut().for_each(|x| *x /= sum);
            if let Some(t) = targets[i] {
                nll -= row[t].max(f64::MIN_POSITIVE).ln();
                count += 1;
            }
        }
        let n = count.max(1);
        self.push(Mat::scalar(nll / n as f64), Op::CrossEntropy(logits, targets, n), Some(probs))
    }

    /// `sum(a .* w)` as a `1 x 1` value.
    pub fn weighted_sum(&mut self, a: Var, w: Rc<Mat>) -> Var {
        let va = self.value(a);
        assert_eq!(va.shape(), w.shape());
        let s = va.data.iter().zip(&w.data).map(|(x, y)| x * y).sum();
        self.push(Mat::scalar(s), Op::WeightedSum(a, w), None)
    }

    /// Back-propagates from a `1 x 1` node and returns the gradient of every
    /// parameter leaf as `(param id, grad)`, in tape order.
    pub fn backward(&self, loss: Var) -> Vec<(usize, Mat)> {
        assert_eq!(self.value(loss).shape(), (1, 1), "loss must be a scalar");
        let mut grads: Vec<Option<Mat>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Mat::scalar(1.0));
        let mut out = Vec::new();
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Const => {}
                Op::Param(id) => out.push((*id, g)),
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut ga = Mat::zeros(va.rows, va.cols);
                    Mat::gemm(&g, false, vb, true, 0.0, &mut ga);
                    let mut gb = Mat::zeros(vb.rows, vb.cols);
                    Mat::gemm(va, true, &g, false, 0.0, &mut gb);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulBt(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut ga = Mat::zeros(va.rows, va.cols);
                    Mat::gemm(&g, false, vb, false, 0.0, &mut ga);
                    let mut gb = Mat::zeros(vb.rows, vb.cols);
                    Mat::gemm(&g, true, va, false, 0.0, &mut gb);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddRow(a, row) => {
                    let mut gr = Mat::zeros(1, g.cols);
                    for i in 0..g.rows {
                        for (s, x) in gr.data.iter_mut().zip(g.row(i)) {
                            *s += x;
                        }
                    }
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *row, gr);
                }
                Op::Scale(a, s) => {
                    let mut ga = g;
                    if *s != 1.0 {
                        ga.scale_assign(*s);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Gate(a, b, r) => {
                    let mut ga = g.clone();
                    let mut gb = g;
                    for i in 0..ga.rows {
                        ga.row_mut(i).iter_mut().for_each(|x| *x *= r[i]);
                        gb.row_mut(i).iter_mut().for_each(|x| *x *= 1.0 - r[i]);
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let mut ga = Mat::zeros(y.rows, y.cols);
                    for i in 0..y.rows {
                        let (yr, gr) = (y.row(i), g.row(i));
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for (c, o) in ga.row_mut(i).iter_mut().enumerate() {
                            *o = yr[c] * (gr[c] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::LayerNorm { x, gamma, beta } => {
                    let aux = node.aux.as_ref().expect("layer norm cache");
                    let gm = self.value(*gamma);
                    let n = g.cols;
                    let mut gx = Mat::zeros(g.rows, n);
                    let mut gg = Mat::zeros(1, n);
                    let mut gbeta = Mat::zeros(1, n);
                    let mut dxh = vec![0.0; n];
                    for i in 0..g.rows {
                        let gr = g.row(i);
                        let xh = &aux.data[i * (n + 1)..i * (n + 1) + n];
                        let rstd = aux.data[i * (n + 1) + n];
                        for c in 0..n {
                            gg.data[c] += gr[c] * xh[c];
                            gbeta.data[c] += gr[c];
                            dxh[c] = gr[c] * gm.data[c];
                        }
                        let m1 = dxh.iter().sum::<f64>() / n as f64;
                        let m2 = dxh.iter().zip(xh).map(|(d, h)| d * h).sum::<f64>() / n as f64;
                        for c in 0..n {
                            gx.data[i * n + c] = rstd * (dxh[c] - m1 - xh[c] * m2);
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *gamma, gg);
                    accumulate(&mut grads, *beta, gbeta);
                }
                Op::Gelu(a) => {
                    let va = self.value(*a);
                    let mut ga = g;
                    for (d, &x) in ga.data.iter_mut().zip(&va.data) {
                        let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
                        let dt = (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x);
                        *d *= 0.5 * (1.0 + t) + 0.5 * x * dt;
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Gather(table, ids) => {
                    let vt = self.value(*table);
                    let mut gt = Mat::zeros(vt.rows, vt.cols);
                    for (i, &id) in ids.iter().enumerate() {
                        for (s, x) in gt.row_mut(id).iter_mut().zip(g.row(i)) {
                            *s += x;
                        }
                    }
                    accumulate(&mut grads, *table, gt);
                }
                Op::SliceCols(a, start) => {
                    let va = self.value(*a);
                    let mut ga = Mat::zeros(va.rows, va.cols);
                    for i in 0..g.rows {
                        ga.row_mut(i)[*start..*start + g.cols].copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).cols;
                        let mut gp = Mat::zeros(g.rows, w);
                        for i in 0..g.rows {
                            gp.row_mut(i).copy_from_slice(&g.row(i)[off..off + w]);
                        }
                        off += w;
                        accumulate(&mut grads, p, gp);
                    }
                }
                Op::CrossEntropy(logits, targets, n) => {
                    let mut gl = node.aux.clone().expect("softmax cache");
                    let scale = g.data[0] / *n as f64;
                    for i in 0..gl.rows {
                        let row = gl.row_mut(i);
                        match targets[i] {
                            Some(t) => {
                                row[t] -= 1.0;
                                row.iter_mut().for_each(|x| *x *= scale);
                            }
                            None => row.iter_mut().for_each(|x| *x = 0.0),
                        }
                    }
                    accumulate(&mut grads, *logits, gl);
                }
                Op::WeightedSum(a, w) => {
                    let mut ga = (**w).clone();
                    ga.scale_assign(g.data[0]);
                    accumulate(&mut grads, *a, ga);
                }
            }
        }
        out
    }
}

fn accumulate(grads: &mut [Option<Mat>], v: Var, g: Mat) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    /// Central differences for every entry of every parameter.
    fn check(params: &[Mat], f: impl Fn(&mut Graph, &[Var]) -> Var) {
        let run = |ps: &[Mat]| {
            let mut g = Graph::new();
            let vars: Vec<Var> = ps.iter().enumerate().map(|(i, p)| g.param(i, p.clone())).collect();
            let loss = f(&mut g, &vars);
            (g.value(loss).data[0], g.backward(loss))
        };
        let (_, analytic) = run(params);
        let mut total = vec![Mat::zeros(0, 0); params.len()];
        for (id, gm) in analytic {
            if total[id].data.is_empty() {
                total[id] = gm;
            } else {
                total[id].add_assign(&gm);
            }
        }
        let h = 1e-5;
        for (pi, p) in params.iter().enumerate() {
            for k in 0..p.data.len() {
                let mut plus = params.to_vec();
                plus[pi].data[k] += h;
                let mut minus = params.to_vec();
                minus[pi].data[k] -= h;
                let num = (run(&plus).0 - run(&minus).0) / (2.0 * h);
                let an = total[pi].data[k];
                assert!((num - an).abs() <= 1e-6 * (1.0 + num.abs()), "param {pi}[{k}]: {an} vs {num}");
            }
        }
    }

    #[test]
    fn every_op_has_a_correct_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = Rc::new(random(&mut rng, 3, 4));
        let params = vec![
            random(&mut rng, 3, 5),
            random(&mut rng, 5, 4),
            random(&mut rng, 1, 4),
            random(&mut rng, 1, 4),
            random(&mut rng, 6, 4),
        ];
        check(&params, |g, v| {
            let m = g.matmul(v[0], v[1]);
            let b = g.add_row(m, v[2]);
            let ln = g.layer_norm(b, v[3], v[2]);
            let ge = g.gelu(ln);
            let s = g.matmul_bt(ge, v[4]);
            let s = g.scale(s, 0.7);
            let s = g.causal_mask(s);
            let p = g.softmax(s);
            let t = g.gather(v[4], Rc::new(vec![0, 2, 2, 5, 1, 3]));
            let a = g.matmul(p, t);
            let left = g.slice_cols(a, 0, 2);
            let right = g.slice_cols(ge, 2, 2);
            let c = g.concat_cols(&[left, right]);
            let mixed = g.gate(c, ge, Rc::new(vec![1.0, 0.0, 0.3]));
            let sum = g.add(mixed, c);
            g.weighted_sum(sum, w.clone())
        });
        check(&params[..2], |g, v| {
            let m = g.matmul(v[0], v[1]);
            g.cross_entropy(m, Rc::new(vec![Some(1), None, Some(3)]))
        });
    }

    #[test]
    fn hard_gate_selects_rows_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = Graph::new();
        let a = g.constant(random(&mut rng, 2, 3));
        let b = g.constant(random(&mut rng, 2, 3));
        let o = g.gate(a, b, Rc::new(vec![1.0, 0.0]));
        assert_eq!(g.value(o).row(0), g.value(a).row(0));
        assert_eq!(g.value(o).row(1), g.value(b).row(1));
    }
}
