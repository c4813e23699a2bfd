use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};

use super::{DiffError, Real};

/// Stabilizer added to the variance in layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a value recorded in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<F> {
    Leaf,
    Affine {
        x: usize,
        w: usize,
        b: usize,
    },
    Add(usize, usize),
    Mul(usize, usize),
    Gelu(usize),
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        xhat: Array2<F>,
        rstd: Vec<F>,
    },
    Attention {
        q: usize,
        k: usize,
        v: usize,
        seq: usize,
        heads: usize,
        inv_scale: F,
        probs: Vec<F>,
        keys: Arc<KeyLists>,
    },
    ScaleRows {
        table: usize,
        scales: Array2<F>,
    },
    Reshape(usize),
    Bce {
        u: usize,
        targets: Array2<F>,
    },
}

struct Node<F> {
    value: Array2<F>,
    op: Op<F>,
}

/// Weights of one gated feed-forward block.
#[derive(Debug, Clone, Copy)]
pub struct GegluParams {
    pub w_gate: Var,
    pub b_gate: Var,
    pub w_lin: Var,
    pub b_lin: Var,
    pub w_out: Var,
    pub b_out: Var,
}

/// Record of a computation. Nodes are appended in evaluation order, which is
/// a topological order of the dependency graph.
pub struct Graph<F> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

fn check_shape(op: &'static str, expected: (usize, usize), found: (usize, usize)) -> Result<(), DiffError> {
    if expected != found {
        return Err(DiffError::Shape { op, expected, found });
    }
    Ok(())
}

fn sqrt_2pi_inv<F: Real>() -> F {
    F::from_f64(1.0 / (2.0 * std::f64::consts::PI).sqrt())
}

fn gelu<F: Real>(x: F) -> F {
    let half = F::from_f64(0.5);
    half * x * (F::one() + (x * F::from_f64(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

fn gelu_grad<F: Real>(x: F) -> F {
    let half = F::from_f64(0.5);
    let cdf = half * (F::one() + (x * F::from_f64(std::f64::consts::FRAC_1_SQRT_2)).erf());
    let pdf = sqrt_2pi_inv::<F>() * (-half * x * x).exp();
    cdf + x * pdf
}

/// Masked softmax attention probabilities, laid out as
/// `[batch][head][query][key]`.
///
/// `q` and `k` are `[batch * seq, heads * head_dim]`, head `h` owning columns
/// `h * head_dim .. (h + 1) * head_dim`. `mask` is the additive
/// `seq x seq` mask, added to the raw scores before scaling.
pub fn attention_probs<F: Real>(
    q: &Array2<F>,
    k: &Array2<F>,
    mask: &[F],
    seq: usize,
    heads: usize,
    inv_scale: F,
) -> Vec<F> {
    probs_with_keys(q, k, mask, &KeyLists::new(mask, seq), seq, heads, inv_scale)
}

/// Keys each query may attend to. Entries at or below half the sentinel
/// would get probability exactly zero after the softmax, so they are
/// skipped outright.
struct KeyLists {
    start: Vec<usize>,
    keys: Vec<usize>,
}

impl KeyLists {
    fn new<F: Real>(mask: &[F], seq: usize) -> Self {
        let half_sentinel = F::from_f64(crate::mask::MASK_SENTINEL / 2.0);
        let mut start = vec![0];
        let mut keys = Vec::new();
        for i in 0..seq {
            keys.extend((0..seq).filter(|&j| mask[i * seq + j] > half_sentinel));
            start.push(keys.len());
        }
        KeyLists { start, keys }
    }

    fn row(&self, i: usize) -> &[usize] {
        &self.keys[self.start[i]..self.start[i + 1]]
    }
}

fn probs_with_keys<F: Real>(
    q: &Array2<F>,
    k: &Array2<F>,
    mask: &[F],
    lists: &KeyLists,
    seq: usize,
    heads: usize,
    inv_scale: F,
) -> Vec<F> {
    let (rows, width) = q.dim();
    let batch = rows / seq;
    let dh = width / heads;
    let q = q.as_slice().expect("standard layout");
    let k = k.as_slice().expect("standard layout");
    let mut probs = vec![F::zero(); batch * heads * seq * seq];
    let mut row = vec![F::zero(); seq];
    for b in 0..batch {
        for h in 0..heads {
            let base = (b * heads + h) * seq * seq;
            for i in 0..seq {
                let keys = lists.row(i);
                let qi = &q[(b * seq + i) * width + h * dh..][..dh];
                let mut max = F::neg_infinity();
                for (r, &j) in row.iter_mut().zip(keys) {
                    let kj = &k[(b * seq + j) * width + h * dh..][..dh];
                    let dot = qi.iter().zip(kj).fold(F::zero(), |acc, (&a, &c)| acc + a * c);
                    let s = (dot + mask[i * seq + j]) * inv_scale;
                    *r = s;
                    if s > max {
                        max = s;
                    }
                }
                let mut sum = F::zero();
                for r in row[..keys.len()].iter_mut() {
                    *r = (*r - max).exp();
                    sum += *r;
                }
                let out = &mut probs[base + i * seq..][..seq];
                for (&j, &r) in keys.iter().zip(&row) {
                    out[j] = r / sum;
                }
            }
        }
    }
    probs
}

impl<F: Real> Graph<F> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<F>, op: Op<F>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<F>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Array2<F> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Cached softmax probabilities of an attention node, laid out as in
    /// [`attention_probs`].
    pub fn attention_weights(&self, v: Var) -> Option<&[F]> {
        match &self.nodes[v.0].op {
            Op::Attention { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// `x W + b` with `x: [r, d_in]`, `W: [d_in, d_out]`, `b: [1, d_out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var, DiffError> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (_, d_in) = xv.dim();
        let (w_in, d_out) = wv.dim();
        check_shape("affine", (d_in, d_out), (w_in, d_out))?;
        check_shape("affine bias", (1, d_out), bv.dim())?;
        let y = xv.dot(wv) + bv;
        Ok(self.push(y, Op::Affine { x: x.0, w: w.0, b: b.0 }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        check_shape("add", self.shape(a), self.shape(b))?;
        let y = self.value(a) + self.value(b);
        Ok(self.push(y, Op::Add(a.0, b.0)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        check_shape("mul", self.shape(a), self.shape(b))?;
        let y = self.value(a) * self.value(b);
        Ok(self.push(y, Op::Mul(a.0, b.0)))
    }

    /// Exact GELU, `x * Phi(x)`.
    pub fn gelu(&mut self, x: Var) -> Var {
        let y = self.value(x).mapv(gelu);
        self.push(y, Op::Gelu(x.0))
    }

    /// Normalizes each row to zero mean and unit variance, then applies
    /// `gain` and `bias` (both `[1, d]`).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var, DiffError> {
        let xv = self.value(x);
        let (rows, d) = xv.dim();
        check_shape("layer_norm gain", (1, d), self.shape(gain))?;
        check_shape("layer_norm bias", (1, d), self.shape(bias))?;
        let eps = F::from_f64(LAYER_NORM_EPS);
        let inv_d = F::one() / F::from_f64(d as f64);
        let mut xhat = Array2::zeros((rows, d));
        let mut rstd = Vec::with_capacity(rows);
        for (row, mut out) in xv.outer_iter().zip(xhat.outer_iter_mut()) {
            let mean = row.sum() * inv_d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() * inv_d;
            let r = F::one() / (var + eps).sqrt();
            rstd.push(r);
            Zip::from(&mut out).and(&row).for_each(|o, &v| *o = (v - mean) * r);
        }
        let y = &xhat * self.value(gain) + self.value(bias);
        Ok(self.push(
            y,
            Op::LayerNorm {
                x: x.0,
                gain: gain.0,
                bias: bias.0,
                xhat,
                rstd,
            },
        ))
    }

    /// Multi-head attention `softmax((Q Kᵀ + mask) * inv_scale) V` applied
    /// independently to each of the `rows / seq` sequences and each head.
    #[allow(clippy::too_many_arguments)]
    pub fn masked_attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        mask: &Arc<Vec<F>>,
        seq: usize,
        heads: usize,
        inv_scale: F,
    ) -> Result<Var, DiffError> {
        let (rows, width) = self.shape(q);
        check_shape("attention keys", (rows, width), self.shape(k))?;
        check_shape("attention values", (rows, width), self.shape(v))?;
        if seq == 0 || rows % seq != 0 || heads == 0 || width % heads != 0 {
            return Err(DiffError::Invalid {
                op: "attention",
                message: format!("{rows} rows, width {width} do not split into sequences of {seq} and {heads} heads"),
            });
        }
        if mask.len() != seq * seq {
            return Err(DiffError::Invalid {
                op: "attention",
                message: format!("mask has {} entries, expected {}", mask.len(), seq * seq),
            });
        }
        let half_sentinel = F::from_f64(crate::mask::MASK_SENTINEL / 2.0);
        for i in 0..seq {
            if mask[i * seq..(i + 1) * seq].iter().all(|&m| m < half_sentinel) {
                return Err(DiffError::FullyDeniedRow(i));
            }
        }
        let keys = Arc::new(KeyLists::new(mask, seq));
        let probs = probs_with_keys(self.value(q), self.value(k), mask, &keys, seq, heads, inv_scale);
        let dh = width / heads;
        let vv = self.value(v).as_slice().expect("standard layout");
        let mut out = vec![F::zero(); rows * width];
        for b in 0..rows / seq {
            for h in 0..heads {
                let p = &probs[(b * heads + h) * seq * seq..][..seq * seq];
                for i in 0..seq {
                    let o = &mut out[(b * seq + i) * width + h * dh..][..dh];
                    for &j in keys.row(i) {
                        let w = p[i * seq + j];
                        let vj = &vv[(b * seq + j) * width + h * dh..][..dh];
                        for (ot, &vt) in o.iter_mut().zip(vj) {
                            *ot += w * vt;
                        }
                    }
                }
            }
        }
        let y = Array2::from_shape_vec((rows, width), out).expect("sized above");
        Ok(self.push(
            y,
            Op::Attention {
                q: q.0,
                k: k.0,
                v: v.0,
                seq,
                heads,
                inv_scale,
                probs,
                keys,
            },
        ))
    }

    /// Row `b * seq + i` of the output is `scales[b, i] * table[i]`; the
    /// scales are constants.
    pub fn scale_rows(&mut self, table: Var, scales: Array2<F>) -> Result<Var, DiffError> {
        let (seq, d) = self.shape(table);
        let (batch, s) = scales.dim();
        check_shape("scale_rows", (batch, seq), (batch, s))?;
        let t = self.value(table);
        let mut y = Array2::zeros((batch * seq, d));
        for b in 0..batch {
            for i in 0..seq {
                let c = scales[[b, i]];
                y.row_mut(b * seq + i).zip_mut_with(&t.row(i), |o, &w| *o = c * w);
            }
        }
        Ok(self.push(y, Op::ScaleRows { table: table.0, scales }))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var, DiffError> {
        let (r, c) = self.shape(x);
        if r * c != rows * cols {
            return Err(DiffError::Shape {
                op: "reshape",
                expected: (rows, cols),
                found: (r, c),
            });
        }
        let y = self
            .value(x)
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((rows, cols))
            .expect("element count checked");
        Ok(self.push(y, Op::Reshape(x.0)))
    }

    /// Binary cross-entropy on logits, summed over each row and averaged over
    /// rows. Output is `[1, 1]`.
    pub fn bce_with_logits(&mut self, u: Var, targets: Array2<F>) -> Result<Var, DiffError> {
        check_shape("bce_with_logits", self.shape(u), targets.dim())?;
        if let Some(&t) = targets.iter().find(|&&t| t != F::zero() && t != F::one()) {
            return Err(DiffError::BadTarget(t.as_f64()));
        }
        let rows = F::from_f64(self.shape(u).0 as f64);
        let total = Zip::from(self.value(u)).and(&targets).fold(F::zero(), |acc, &x, &z| {
            // max(x, 0) - x z + ln(1 + e^{-|x|})
            acc + x.max(F::zero()) - x * z + (-x.abs()).exp().ln_1p()
        });
        let y = Array2::from_elem((1, 1), total / rows);
        Ok(self.push(y, Op::Bce { u: u.0, targets }))
    }

    /// `(GELU(x W_gate + b_gate) * (x W_lin + b_lin)) W_out + b_out`.
    pub fn geglu(&mut self, x: Var, p: &GegluParams) -> Result<Var, DiffError> {
        let gate = self.affine(x, p.w_gate, p.b_gate)?;
        let gate = self.gelu(gate);
        let lin = self.affine(x, p.w_lin, p.b_lin)?;
        let hidden = self.mul(gate, lin)?;
        self.affine(hidden, p.w_out, p.b_out)
    }

    /// Reverse pass from a `[1, 1]` output. Each node is visited once, in
    /// reverse recording order.
    pub fn backward(&self, output: Var) -> Gradients<F> {
        let mut grads: Vec<Option<Array2<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Array2::ones(self.nodes[output.0].value.dim()));
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backward_node(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn backward_node(&self, node: &Node<F>, g: &Array2<F>, grads: &mut [Option<Array2<F>>]) {
        let val = |i: usize| &self.nodes[i].value;
        match &node.op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                accumulate(grads, *x, g.dot(&val(*w).t()));
                accumulate(grads, *w, val(*x).t().dot(g));
                accumulate(grads, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g * val(*b));
                accumulate(grads, *b, g * val(*a));
            }
            Op::Gelu(x) => {
                let mut d = val(*x).mapv(gelu_grad);
                d *= g;
                accumulate(grads, *x, d);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                accumulate(grads, *bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                accumulate(grads, *gain, (g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                let gamma = val(*gain).row(0).to_owned();
                let d = xhat.ncols();
                let inv_d = F::one() / F::from_f64(d as f64);
                let mut dx = Array2::zeros(xhat.dim());
                for (r, mut out) in dx.outer_iter_mut().enumerate() {
                    let gr = g.row(r);
                    let xr = xhat.row(r);
                    let mut mean_dxhat = F::zero();
                    let mut mean_dxhat_xhat = F::zero();
                    for t in 0..d {
                        let dxh = gr[t] * gamma[t];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xr[t];
                    }
                    mean_dxhat *= inv_d;
                    mean_dxhat_xhat *= inv_d;
                    for t in 0..d {
                        let dxh = gr[t] * gamma[t];
                        out[t] = rstd[r] * (dxh - mean_dxhat - xr[t] * mean_dxhat_xhat);
                    }
                }
                accumulate(grads, *x, dx);
            }
            Op::Attention {
                q,
                k,
                v,
                seq,
                heads,
                inv_scale,
                probs,
                keys,
            } => {
                let (seq, heads, inv_scale) = (*seq, *heads, *inv_scale);
                let (rows, width) = g.dim();
                let dh = width / heads;
                let qv = val(*q).as_slice().expect("standard layout");
                let kv = val(*k).as_slice().expect("standard layout");
                let vv = val(*v).as_slice().expect("standard layout");
                let gs = g.as_standard_layout();
                let gs = gs.as_slice().expect("standard layout");
                let mut dq = vec![F::zero(); rows * width];
                let mut dk = vec![F::zero(); rows * width];
                let mut dv = vec![F::zero(); rows * width];
                let mut dp = vec![F::zero(); seq];
                for b in 0..rows / seq {
                    for h in 0..heads {
                        let p = &probs[(b * heads + h) * seq * seq..][..seq * seq];
                        let at = |r: usize| (b * seq + r) * width + h * dh;
                        for i in 0..seq {
                            let go = &gs[at(i)..][..dh];
                            // dV_j += p_ij dO_i ; dP_ij = dO_i . V_j
                            let mut dot_pdp = F::zero();
                            for &j in keys.row(i) {
                                let pij = p[i * seq + j];
                                let vj = &vv[at(j)..][..dh];
                                let dvj = &mut dv[at(j)..][..dh];
                                let mut acc = F::zero();
                                for ((d, &o), &x) in dvj.iter_mut().zip(go).zip(vj) {
                                    *d += pij * o;
                                    acc += o * x;
                                }
                                dp[j] = acc;
                                dot_pdp += pij * acc;
                            }
                            let qi = &qv[at(i)..][..dh];
                            let dqi = &mut dq[at(i)..][..dh];
                            for &j in keys.row(i) {
                                let pij = p[i * seq + j];
                                let ds = pij * (dp[j] - dot_pdp) * inv_scale;
                                let kj = &kv[at(j)..][..dh];
                                for (d, &x) in dqi.iter_mut().zip(kj) {
                                    *d += ds * x;
                                }
                                let dkj = &mut dk[at(j)..][..dh];
                                for (d, &x) in dkj.iter_mut().zip(qi) {
                                    *d += ds * x;
                                }
                            }
                        }
                    }
                }
                let shape = (rows, width);
                accumulate(grads, *q, Array2::from_shape_vec(shape, dq).expect("sized"));
                accumulate(grads, *k, Array2::from_shape_vec(shape, dk).expect("sized"));
                accumulate(grads, *v, Array2::from_shape_vec(shape, dv).expect("sized"));
            }
            Op::ScaleRows { table, scales } => {
                let t = val(*table);
                let (seq, d) = t.dim();
                let mut dt = Array2::zeros((seq, d));
                for b in 0..scales.nrows() {
                    for i in 0..seq {
                        let c = scales[[b, i]];
                        dt.row_mut(i).zip_mut_with(&g.row(b * seq + i), |o, &gv| *o += c * gv);
                    }
                }
                accumulate(grads, *table, dt);
            }
            Op::Reshape(x) => {
                let shape = val(*x).dim();
                let d = g
                    .as_standard_layout()
                    .into_owned()
                    .into_shape_with_order(shape)
                    .expect("same element count");
                accumulate(grads, *x, d);
            }
            Op::Bce { u, targets } => {
                let uv = val(*u);
                let scale = g[[0, 0]] / F::from_f64(uv.nrows() as f64);
                let mut d = Array2::zeros(uv.dim());
                Zip::from(&mut d)
                    .and(uv)
                    .and(targets)
                    .for_each(|o, &x, &z| *o = (sigmoid(x) - z) * scale);
                accumulate(grads, *u, d);
            }
        }
    }
}

fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

fn accumulate<F: Real>(grads: &mut [Option<Array2<F>>], idx: usize, delta: Array2<F>) {
    match &mut grads[idx] {
        Some(existing) => *existing += &delta,
        slot @ None => *slot = Some(delta),
    }
}

/// Gradients of one output with respect to every recorded value.
pub struct Gradients<F> {
    grads: Vec<Option<Array2<F>>>,
}

impl<F: Real> Gradients<F> {
    /// Gradient of `v`, or `None` when the output does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Array2<F>> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of `v`, zeros when the output does not depend on it.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Array2<F> {
        self.get(v).cloned().unwrap_or_else(|| Array2::zeros(shape))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    /// Central-difference check of d(sum(out * weights))/d(inputs) for a
    /// graph builder; returns the max relative error over all inputs.
    fn finite_difference_check(inputs: Vec<Array2<f64>>, build: &dyn Fn(&mut Graph<f64>, &[Var]) -> Var) -> f64 {
        let project = |inputs: &[Array2<f64>]| -> (Graph<f64>, Vec<Var>, Var) {
            let mut g = Graph::new();
            let vars: Vec<Var> = inputs.iter().map(|a| g.leaf(a.clone())).collect();
            let out = build(&mut g, &vars);
            // fixed pseudo-random projection to a scalar
            let (r, c) = g.shape(out);
            let w = Array2::from_shape_fn((r, c), |(i, j)| ((i * 7 + j * 13) % 11) as f64 / 5.0 - 1.0);
            let wv = g.leaf(w);
            let prod = g.mul(out, wv).unwrap();
            let flat = g.reshape(prod, 1, r * c).unwrap();
            let ones = g.leaf(Array2::ones((r * c, 1)));
            let zero = g.leaf(Array2::zeros((1, 1)));
            let loss = g.affine(flat, ones, zero).unwrap();
            (g, vars, loss)
        };
        let (g, vars, loss) = project(&inputs);
        let grads = g.backward(loss);
        let h = 1e-6;
        let mut worst = 0.0f64;
        for (idx, input) in inputs.iter().enumerate() {
            let analytic = grads.get_or_zeros(vars[idx], input.dim());
            for flat in 0..input.len() {
                let mut plus = inputs.clone();
                let mut minus = inputs.clone();
                plus[idx].as_slice_mut().unwrap()[flat] += h;
                minus[idx].as_slice_mut().unwrap()[flat] -= h;
                let fp = {
                    let (g, _, l) = project(&plus);
                    g.value(l)[[0, 0]]
                };
                let fm = {
                    let (g, _, l) = project(&minus);
                    g.value(l)[[0, 0]]
                };
                let numeric = (fp - fm) / (2.0 * h);
                let a = analytic.as_slice().unwrap()[flat];
                let err = (a - numeric).abs() / (a.abs().max(numeric.abs()).max(1e-3));
                worst = worst.max(err);
            }
        }
        worst
    }

    #[test]
    fn affine_identity_and_scalar() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(array![[1.0, 2.0], [3.0, 4.0]]);
        let w = g.leaf(Array2::eye(2));
        let b = g.leaf(Array2::zeros((1, 2)));
        let y = g.affine(x, w, b).unwrap();
        assert_eq!(g.value(y), g.value(x));

        let mut g = Graph::<f64>::new();
        let x = g.leaf(array![[2.0]]);
        let w = g.leaf(array![[3.0]]);
        let b = g.leaf(array![[1.0]]);
        let y = g.affine(x, w, b).unwrap();
        assert_eq!(g.value(y)[[0, 0]], 7.0);
        let grads = g.backward(y);
        assert_eq!(grads.get(x).unwrap()[[0, 0]], 3.0);
        assert_eq!(grads.get(w).unwrap()[[0, 0]], 2.0);
        assert_eq!(grads.get(b).unwrap()[[0, 0]], 1.0);
    }

    #[test]
    fn affine_rejects_bad_shapes() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Array2::zeros((2, 3)));
        let w = g.leaf(Array2::zeros((2, 3)));
        let b = g.leaf(Array2::zeros((1, 3)));
        assert!(matches!(g.affine(x, w, b), Err(DiffError::Shape { .. })));
    }

    #[test]
    fn affine_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inputs = vec![random(&mut rng, 5, 4), random(&mut rng, 4, 3), random(&mut rng, 1, 3)];
        let err = finite_difference_check(inputs, &|g, v| g.affine(v[0], v[1], v[2]).unwrap());
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn layer_norm_examples() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(array![[5.0, 5.0, 5.0], [1.0, 3.0, 0.0]]);
        let gain = g.leaf(array![[2.0, 2.0, 2.0]]);
        let bias = g.leaf(array![[0.5, -1.0, 3.0]]);
        let y = g.layer_norm(x, gain, bias).unwrap();
        for (a, b) in g.value(y).row(0).iter().zip([0.5, -1.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }

        let mut g = Graph::<f64>::new();
        let x = g.leaf(array![[1.0, 3.0]]);
        let gain = g.leaf(array![[1.0, 1.0]]);
        let bias = g.leaf(array![[0.0, 0.0]]);
        let y = g.layer_norm(x, gain, bias).unwrap();
        assert!((g.value(y)[[0, 0]] + 1.0).abs() < 1e-5);
        assert!((g.value(y)[[0, 1]] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn layer_norm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inputs = vec![random(&mut rng, 4, 6), random(&mut rng, 1, 6), random(&mut rng, 1, 6)];
        let err = finite_difference_check(inputs, &|g, v| g.layer_norm(v[0], v[1], v[2]).unwrap());
        assert!(err < 1e-5, "relative error {err}");
    }

    fn geglu_graph(g: &mut Graph<f64>, v: &[Var]) -> Var {
        let p = GegluParams {
            w_gate: v[1],
            b_gate: v[2],
            w_lin: v[3],
            b_lin: v[4],
            w_out: v[5],
            b_out: v[6],
        };
        g.geglu(v[0], &p).unwrap()
    }

    #[test]
    fn geglu_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 3;
        let mut inputs = [
            Array2::zeros((2, d)),
            random(&mut rng, d, 4 * d),
            Array2::zeros((1, 4 * d)),
            random(&mut rng, d, 4 * d),
            Array2::zeros((1, 4 * d)),
            random(&mut rng, 4 * d, d),
            Array2::zeros((1, d)),
        ];
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|a| g.leaf(a.clone())).collect();
        let y = geglu_graph(&mut g, &vars);
        assert!(g.value(y).iter().all(|&v| v == 0.0));

        // zero linear path: output is the last bias everywhere
        inputs[0] = random(&mut rng, 2, d);
        inputs[3] = Array2::zeros((d, 4 * d));
        inputs[6] = array![[0.25, -0.5, 1.5]];
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|a| g.leaf(a.clone())).collect();
        let y = geglu_graph(&mut g, &vars);
        for row in g.value(y).outer_iter() {
            assert_eq!(row.to_vec(), vec![0.25, -0.5, 1.5]);
        }
    }

    #[test]
    fn geglu_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = 3;
        let inputs = vec![
            random(&mut rng, 2, d),
            random(&mut rng, d, 4 * d),
            random(&mut rng, 1, 4 * d),
            random(&mut rng, d, 4 * d),
            random(&mut rng, 1, 4 * d),
            random(&mut rng, 4 * d, d),
            random(&mut rng, 1, d),
        ];
        let err = finite_difference_check(inputs, &geglu_graph);
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn gelu_reference_values() {
        // x * Phi(x) at x = 1: Phi(1) = 0.8413447460685429
        assert!((gelu(1.0f64) - 0.8413447460685429).abs() < 1e-12);
        assert_eq!(gelu(0.0f64), 0.0);
        assert!((gelu(-1.0f64) + (1.0 - 0.8413447460685429)).abs() < 1e-12);
    }

    #[test]
    fn bce_examples() {
        let mut g = Graph::<f64>::new();
        let u = g.leaf(Array2::zeros((1, 7)));
        let loss = g
            .bce_with_logits(u, array![[1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]])
            .unwrap();
        assert!((g.value(loss)[[0, 0]] - 7.0 * 2f64.ln()).abs() < 1e-12);

        let mut g = Graph::<f64>::new();
        let u = g.leaf(array![[40.0, -40.0]]);
        let loss = g.bce_with_logits(u, array![[1.0, 0.0]]).unwrap();
        assert!(g.value(loss)[[0, 0]] < 1e-15);

        let mut g = Graph::<f64>::new();
        let u = g.leaf(array![[0.0]]);
        assert!(matches!(
            g.bce_with_logits(u, array![[0.5]]),
            Err(DiffError::BadTarget(_))
        ));
    }

    #[test]
    fn bce_gradient_is_sigmoid_minus_target() {
        let logits = array![[0.3, -1.2, 2.5, 0.0]];
        let targets = array![[1.0, 0.0, 0.0, 1.0]];
        let mut g = Graph::<f64>::new();
        let u = g.leaf(logits.clone());
        let loss = g.bce_with_logits(u, targets.clone()).unwrap();
        let grad = g.backward(loss).get(u).unwrap().clone();
        let h = 1e-6;
        for j in 0..4 {
            let expected = sigmoid(logits[[0, j]]) - targets[[0, j]];
            assert!((grad[[0, j]] - expected).abs() < 1e-12);
            let eval = |delta: f64| {
                let mut l = logits.clone();
                l[[0, j]] += delta;
                let mut g = Graph::<f64>::new();
                let u = g.leaf(l);
                let loss = g.bce_with_logits(u, targets.clone()).unwrap();
                g.value(loss)[[0, 0]]
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            assert!((numeric - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn attention_concentrates_on_dominant_key() {
        let seq = 3;
        let mut q = Array2::<f64>::zeros((seq, 2));
        let mut k = Array2::<f64>::zeros((seq, 2));
        for i in 0..seq {
            q[[i, 0]] = 1.0;
        }
        k[[1, 0]] = 1.0;
        let mask = vec![0.0; seq * seq];
        let mut last = 0.0;
        for gap in [1.0, 5.0, 20.0, 60.0] {
            let p = attention_probs(&(&q * gap), &k, &mask, seq, 1, 1.0);
            for row in p.chunks(seq) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            assert!(p[1] > last);
            last = p[1];
        }
        assert!(last > 1.0 - 1e-12);
    }

    #[test]
    fn diagonal_mask_returns_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seq = 4;
        let mask: Vec<f64> = (0..seq * seq)
            .map(|i| {
                if i / seq == i % seq {
                    0.0
                } else {
                    crate::mask::MASK_SENTINEL
                }
            })
            .collect();
        let mask = Arc::new(mask);
        let mut g = Graph::<f64>::new();
        let q = g.leaf(random(&mut rng, 2 * seq, 4));
        let k = g.leaf(random(&mut rng, 2 * seq, 4));
        let v = g.leaf(random(&mut rng, 2 * seq, 4));
        let y = g.masked_attention(q, k, v, &mask, seq, 2, 0.5).unwrap();
        for (a, b) in g.value(y).iter().zip(g.value(v).iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        let probs = g.attention_weights(y).unwrap();
        for i in 0..seq {
            for j in 0..seq {
                if i != j {
                    assert!(probs[i * seq + j] <= 1e-15);
                }
            }
        }
    }

    #[test]
    fn attention_rejects_fully_denied_row() {
        let seq = 2;
        let mask = Arc::new(vec![0.0, 0.0, crate::mask::MASK_SENTINEL, crate::mask::MASK_SENTINEL]);
        let mut g = Graph::<f64>::new();
        let q = g.leaf(Array2::zeros((2, 2)));
        assert_eq!(
            g.masked_attention(q, q, q, &mask, seq, 1, 1.0).unwrap_err(),
            DiffError::FullyDeniedRow(1)
        );
    }

    #[test]
    fn attention_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (heads, seq, dh) = (2, 11, 4);
        let mask: Vec<f64> = (0..seq * seq)
            .map(|i| {
                let (r, c) = (i / seq, i % seq);
                if r == c || (r + c) % 3 == 0 {
                    0.0
                } else {
                    crate::mask::MASK_SENTINEL
                }
            })
            .collect();
        let mask = Arc::new(mask);
        let inputs = vec![
            random(&mut rng, seq, heads * dh),
            random(&mut rng, seq, heads * dh),
            random(&mut rng, seq, heads * dh),
        ];
        let scale = 1.0 / (dh as f64).sqrt();
        let err = finite_difference_check(inputs, &|g, v| {
            g.masked_attention(v[0], v[1], v[2], &mask, seq, heads, scale).unwrap()
        });
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn scale_rows_and_reshape_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scales = random(&mut rng, 3, 4);
        let inputs = vec![random(&mut rng, 4, 5)];
        let err = finite_difference_check(inputs, &|g, v| {
            let y = g.scale_rows(v[0], scales.clone()).unwrap();
            g.reshape(y, 6, 10).unwrap()
        });
        assert!(err < 1e-6, "relative error {err}");
    }
}
