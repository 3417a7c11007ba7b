//! Computation tape: records ops in execution order, replays them in reverse
//! for gradient propagation.

use super::Real;

/// Identity of a tensor within one tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// [m,k] x [k,n] -> [m,n]
    MatMul { a: TensorId, b: TensorId },
    /// [m,k] x [k] -> [m]
    MatVec { w: TensorId, x: TensorId },
    /// [m,k]^T x [m] -> [k]
    MatVecT { w: TensorId, x: TensorId },
    Add { a: TensorId, b: TensorId },
    Sub { a: TensorId, b: TensorId },
    Mul { a: TensorId, b: TensorId },
    /// scale*x + shift elementwise; the gradient only needs the scale.
    Affine { x: TensorId, scale: Real },
    /// [r,c] + [c] broadcast over rows (the single allowed broadcast)
    AddRowBroadcast { m: TensorId, v: TensorId },
    Sigmoid { x: TensorId },
    Tanh { x: TensorId },
    Log { x: TensorId },
    Softmax { x: TensorId },
    LogSumExp { x: TensorId },
    Dot { a: TensorId, b: TensorId },
    Sum { x: TensorId },
    /// Pick one element as a scalar.
    Index { x: TensorId, i: usize },
    /// 1-D concatenation.
    Concat { parts: Vec<TensorId> },
    /// Stack equal-length vectors into a [rows, dim] matrix.
    StackRows { rows: Vec<TensorId> },
    /// Extract row `row` of a [rows, dim] matrix (embedding lookup).
    SelectRow { m: TensorId, row: usize },
}

struct Node {
    data: Vec<Real>,
    shape: Vec<usize>,
    grad: Vec<Real>,
    op: Op,
}

/// A tape of recorded operations. Confined to one worker at a time;
/// independent examples run on independent tapes.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, data: Vec<Real>, shape: Vec<usize>, op: Op) -> TensorId {
        debug_assert_eq!(data.len(), numel(&shape));
        let id = TensorId(self.nodes.len());
        self.nodes.push(Node {
            data,
            shape,
            grad: Vec::new(),
            op,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: TensorId) -> &[Real] {
        &self.nodes[id.0].data
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    /// Gradient of the last backward pass. Empty before backward().
    pub fn grad(&self, id: TensorId) -> &[Real] {
        &self.nodes[id.0].grad
    }

    /// Scalar convenience accessor.
    pub fn scalar_value(&self, id: TensorId) -> Real {
        assert_eq!(self.nodes[id.0].data.len(), 1, "tensor is not a scalar");
        self.nodes[id.0].data[0]
    }

    // ── Leaf constructors ───────────────────────────────────────────

    pub fn leaf(&mut self, data: Vec<Real>, shape: Vec<usize>) -> TensorId {
        assert_eq!(
            data.len(),
            numel(&shape),
            "leaf data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        self.push(data, shape, Op::Leaf)
    }

    pub fn scalar(&mut self, v: Real) -> TensorId {
        self.push(vec![v], vec![1], Op::Leaf)
    }

    pub fn zeros(&mut self, shape: Vec<usize>) -> TensorId {
        let n = numel(&shape);
        self.push(vec![0.0; n], shape, Op::Leaf)
    }

    // ── Forward ops ─────────────────────────────────────────────────

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert!(
            sa.len() == 2 && sb.len() == 2 && sa[1] == sb[0],
            "shape mismatch in matmul: {:?} vs {:?}",
            sa,
            sb
        );
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &self.nodes[a.0].data[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &av) in arow.iter().enumerate() {
                let brow = &self.nodes[b.0].data[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        self.push(out, vec![m, n], Op::MatMul { a, b })
    }

    pub fn matvec(&mut self, w: TensorId, x: TensorId) -> TensorId {
        let (sw, sx) = (self.shape(w), self.shape(x));
        assert!(
            sw.len() == 2 && sx.len() == 1 && sw[1] == sx[0],
            "shape mismatch in matvec: {:?} vs {:?}",
            sw,
            sx
        );
        let (m, k) = (sw[0], sw[1]);
        let xv = &self.nodes[x.0].data;
        let out: Vec<Real> = self.nodes[w.0]
            .data
            .chunks_exact(k)
            .map(|row| row.iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        debug_assert_eq!(out.len(), m);
        self.push(out, vec![m], Op::MatVec { w, x })
    }

    /// y = W^T x for W: [m,k], x: [m].
    pub fn matvec_t(&mut self, w: TensorId, x: TensorId) -> TensorId {
        let (sw, sx) = (self.shape(w), self.shape(x));
        assert!(
            sw.len() == 2 && sx.len() == 1 && sw[0] == sx[0],
            "shape mismatch in matvec_t: {:?} vs {:?}",
            sw,
            sx
        );
        let k = sw[1];
        let mut out = vec![0.0; k];
        for (row, &xv) in self.nodes[w.0].data.chunks_exact(k).zip(&self.nodes[x.0].data) {
            for (o, &wv) in out.iter_mut().zip(row) {
                *o += wv * xv;
            }
        }
        self.push(out, vec![k], Op::MatVecT { w, x })
    }

    fn binary_elementwise(
        &mut self,
        name: &'static str,
        a: TensorId,
        b: TensorId,
        f: impl Fn(Real, Real) -> Real,
        op: Op,
    ) -> TensorId {
        assert_eq!(
            self.shape(a),
            self.shape(b),
            "shape mismatch in {}: {:?} vs {:?}",
            name,
            self.shape(a),
            self.shape(b)
        );
        let data: Vec<Real> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        self.push(data, shape, op)
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary_elementwise("add", a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary_elementwise("sub", a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary_elementwise("mul", a, b, |x, y| x * y, Op::Mul { a, b })
    }

    /// scale*x + shift elementwise.
    pub fn affine(&mut self, x: TensorId, scale: Real, shift: Real) -> TensorId {
        let data: Vec<Real> = self.nodes[x.0].data.iter().map(|&v| scale * v + shift).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push(data, shape, Op::Affine { x, scale })
    }

    pub fn scale(&mut self, x: TensorId, c: Real) -> TensorId {
        self.affine(x, c, 0.0)
    }

    pub fn add_row_broadcast(&mut self, m: TensorId, v: TensorId) -> TensorId {
        let (sm, sv) = (self.shape(m), self.shape(v));
        assert!(
            sm.len() == 2 && sv.len() == 1 && sm[1] == sv[0],
            "shape mismatch in add_row_broadcast: {:?} vs {:?}",
            sm,
            sv
        );
        let cols = sm[1];
        let vv = self.nodes[v.0].data.clone();
        let data: Vec<Real> = self.nodes[m.0]
            .data
            .chunks_exact(cols)
            .flat_map(|row| row.iter().zip(&vv).map(|(a, b)| a + b).collect::<Vec<_>>())
            .collect();
        let shape = self.nodes[m.0].shape.clone();
        self.push(data, shape, Op::AddRowBroadcast { m, v })
    }

    pub fn sigmoid(&mut self, x: TensorId) -> TensorId {
        let data: Vec<Real> = self.nodes[x.0]
            .data
            .iter()
            .map(|&v| 1.0 / (1.0 + (-v).exp()))
            .collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push(data, shape, Op::Sigmoid { x })
    }

    pub fn tanh(&mut self, x: TensorId) -> TensorId {
        let data: Vec<Real> = self.nodes[x.0].data.iter().map(|&v| v.tanh()).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push(data, shape, Op::Tanh { x })
    }

    pub fn log(&mut self, x: TensorId) -> TensorId {
        let data: Vec<Real> = self.nodes[x.0].data.iter().map(|&v| v.ln()).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push(data, shape, Op::Log { x })
    }

    /// Numerically stable softmax over a 1-D tensor.
    pub fn softmax(&mut self, x: TensorId) -> TensorId {
        assert_eq!(self.shape(x).len(), 1, "softmax expects a 1-D tensor");
        assert!(!self.nodes[x.0].data.is_empty(), "softmax requires a non-empty input");
        let max = self.nodes[x.0].data.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
        let mut data: Vec<Real> = self.nodes[x.0].data.iter().map(|&v| (v - max).exp()).collect();
        let sum: Real = data.iter().sum();
        for v in &mut data {
            *v /= sum;
        }
        let shape = self.nodes[x.0].shape.clone();
        self.push(data, shape, Op::Softmax { x })
    }

    /// log(sum(exp(x))) over a 1-D tensor, max-shifted.
    pub fn logsumexp(&mut self, x: TensorId) -> TensorId {
        assert_eq!(self.shape(x).len(), 1, "logsumexp expects a 1-D tensor");
        assert!(!self.nodes[x.0].data.is_empty(), "logsumexp requires a non-empty input");
        let max = self.nodes[x.0].data.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
        let sum: Real = self.nodes[x.0].data.iter().map(|&v| (v - max).exp()).sum();
        self.push(vec![max + sum.ln()], vec![1], Op::LogSumExp { x })
    }

    pub fn dot(&mut self, a: TensorId, b: TensorId) -> TensorId {
        assert_eq!(
            self.shape(a),
            self.shape(b),
            "shape mismatch in dot: {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
        let v: Real = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(&x, &y)| x * y)
            .sum();
        self.push(vec![v], vec![1], Op::Dot { a, b })
    }

    pub fn sum(&mut self, x: TensorId) -> TensorId {
        let v: Real = self.nodes[x.0].data.iter().sum();
        self.push(vec![v], vec![1], Op::Sum { x })
    }

    pub fn index(&mut self, x: TensorId, i: usize) -> TensorId {
        assert!(
            i < self.nodes[x.0].data.len(),
            "index {} out of bounds for tensor of length {}",
            i,
            self.nodes[x.0].data.len()
        );
        let v = self.nodes[x.0].data[i];
        self.push(vec![v], vec![1], Op::Index { x, i })
    }

    /// Concatenate 1-D tensors.
    pub fn concat(&mut self, parts: &[TensorId]) -> TensorId {
        assert!(!parts.is_empty(), "concat requires a non-empty input");
        let mut data = Vec::new();
        for &p in parts {
            assert_eq!(self.shape(p).len(), 1, "concat expects 1-D tensors");
            data.extend_from_slice(&self.nodes[p.0].data);
        }
        let n = data.len();
        self.push(data, vec![n], Op::Concat { parts: parts.to_vec() })
    }

    /// Stack equal-length 1-D tensors into a [rows, dim] matrix.
    pub fn stack_rows(&mut self, rows: &[TensorId]) -> TensorId {
        assert!(!rows.is_empty(), "stack_rows requires a non-empty input");
        let dim = self.shape(rows[0])[0];
        let mut data = Vec::with_capacity(rows.len() * dim);
        for &r in rows {
            assert_eq!(
                self.shape(r),
                &[dim],
                "shape mismatch in stack_rows: {:?} vs {:?}",
                self.shape(r),
                &[dim]
            );
            data.extend_from_slice(&self.nodes[r.0].data);
        }
        self.push(data, vec![rows.len(), dim], Op::StackRows { rows: rows.to_vec() })
    }

    /// Row lookup on a [rows, dim] matrix; the gradient scatters back into
    /// the selected row (embedding-table semantics).
    pub fn select_row(&mut self, m: TensorId, row: usize) -> TensorId {
        let sm = self.shape(m);
        assert!(sm.len() == 2 && row < sm[0], "row {} out of bounds for shape {:?}", row, sm);
        let dim = sm[1];
        let data = self.nodes[m.0].data[row * dim..(row + 1) * dim].to_vec();
        self.push(data, vec![dim], Op::SelectRow { m, row })
    }

    // ── Backward ────────────────────────────────────────────────────

    /// Reverse-mode sweep from a scalar loss. Visits nodes in reverse
    /// recorded order, which is a valid topological order because every op
    /// only references earlier nodes.
    pub fn backward(&mut self, loss: TensorId) {
        assert_eq!(self.nodes[loss.0].data.len(), 1, "backward expects a scalar loss");
        for node in &mut self.nodes {
            node.grad = vec![0.0; node.data.len()];
        }
        self.nodes[loss.0].grad[0] = 1.0;

        for i in (0..self.nodes.len()).rev() {
            let grad = std::mem::take(&mut self.nodes[i].grad);
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {}
                Op::MatMul { a, b } => {
                    let (m, k) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                    let n = self.nodes[b.0].shape[1];
                    // dA = G * B^T
                    for ii in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += grad[ii * n + j] * self.nodes[b.0].data[p * n + j];
                            }
                            self.nodes[a.0].grad[ii * k + p] += s;
                        }
                    }
                    // dB = A^T * G
                    for p in 0..k {
                        for j in 0..n {
                            let mut s = 0.0;
                            for ii in 0..m {
                                s += self.nodes[a.0].data[ii * k + p] * grad[ii * n + j];
                            }
                            self.nodes[b.0].grad[p * n + j] += s;
                        }
                    }
                }
                Op::MatVec { w, x } => {
                    let k = self.nodes[w.0].shape[1];
                    for (r, &g) in grad.iter().enumerate() {
                        let wrow = r * k;
                        for j in 0..k {
                            self.nodes[w.0].grad[wrow + j] += g * self.nodes[x.0].data[j];
                        }
                    }
                    for j in 0..k {
                        let mut s = 0.0;
                        for (r, &g) in grad.iter().enumerate() {
                            s += g * self.nodes[w.0].data[r * k + j];
                        }
                        self.nodes[x.0].grad[j] += s;
                    }
                }
                Op::MatVecT { w, x } => {
                    // y = W^T x: dW[r,j] += x[r]*g[j]; dx[r] += W[r,:].g
                    let k = self.nodes[w.0].shape[1];
                    let m = self.nodes[w.0].shape[0];
                    for r in 0..m {
                        let xv = self.nodes[x.0].data[r];
                        let mut s = 0.0;
                        for (j, &g) in grad.iter().enumerate() {
                            self.nodes[w.0].grad[r * k + j] += xv * g;
                            s += self.nodes[w.0].data[r * k + j] * g;
                        }
                        self.nodes[x.0].grad[r] += s;
                    }
                }
                Op::Add { a, b } => {
                    for (j, &g) in grad.iter().enumerate() {
                        self.nodes[a.0].grad[j] += g;
                        self.nodes[b.0].grad[j] += g;
                    }
                }
                Op::Sub { a, b } => {
                    for (j, &g) in grad.iter().enumerate() {
                        self.nodes[a.0].grad[j] += g;
                        self.nodes[b.0].grad[j] -= g;
                    }
                }
                Op::Mul { a, b } => {
                    for (j, &g) in grad.iter().enumerate() {
                        let (av, bv) = (self.nodes[a.0].data[j], self.nodes[b.0].data[j]);
                        self.nodes[a.0].grad[j] += g * bv;
                        self.nodes[b.0].grad[j] += g * av;
                    }
                }
                Op::Affine { x, scale } => {
                    for (j, &g) in grad.iter().enumerate() {
                        self.nodes[x.0].grad[j] += scale * g;
                    }
                }
                Op::AddRowBroadcast { m, v } => {
                    let cols = self.nodes[v.0].shape[0];
                    for (j, &g) in grad.iter().enumerate() {
                        self.nodes[m.0].grad[j] += g;
                        self.nodes[v.0].grad[j % cols] += g;
                    }
                }
                Op::Sigmoid { x } => {
                    for (j, &g) in grad.iter().enumerate() {
                        let s = self.nodes[i].data[j];
                        self.nodes[x.0].grad[j] += g * s * (1.0 - s);
                    }
                }
                Op::Tanh { x } => {
                    for (j, &g) in grad.iter().enumerate() {
                        let t = self.nodes[i].data[j];
                        self.nodes[x.0].grad[j] += g * (1.0 - t * t);
                    }
                }
                Op::Log { x } => {
                    for (j, &g) in grad.iter().enumerate() {
                        self.nodes[x.0].grad[j] += g / self.nodes[x.0].data[j];
                    }
                }
                Op::Softmax { x } => {
                    // dx = s .* (g - (g . s))
                    let dot: Real = grad
                        .iter()
                        .zip(&self.nodes[i].data)
                        .map(|(&g, &s)| g * s)
                        .sum();
                    for (j, &g) in grad.iter().enumerate() {
                        let s = self.nodes[i].data[j];
                        self.nodes[x.0].grad[j] += s * (g - dot);
                    }
                }
                Op::LogSumExp { x } => {
                    let y = self.nodes[i].data[0];
                    let g = grad[0];
                    for j in 0..self.nodes[x.0].data.len() {
                        let sm = (self.nodes[x.0].data[j] - y).exp();
                        self.nodes[x.0].grad[j] += g * sm;
                    }
                }
                Op::Dot { a, b } => {
                    let g = grad[0];
                    for j in 0..self.nodes[a.0].data.len() {
                        self.nodes[a.0].grad[j] += g * self.nodes[b.0].data[j];
                        self.nodes[b.0].grad[j] += g * self.nodes[a.0].data[j];
                    }
                }
                Op::Sum { x } => {
                    let g = grad[0];
                    for gj in &mut self.nodes[x.0].grad {
                        *gj += g;
                    }
                }
                Op::Index { x, i: idx } => {
                    self.nodes[x.0].grad[idx] += grad[0];
                }
                Op::Concat { parts } => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.nodes[p.0].data.len();
                        for j in 0..n {
                            self.nodes[p.0].grad[j] += grad[off + j];
                        }
                        off += n;
                    }
                }
                Op::StackRows { rows } => {
                    let dim = self.nodes[rows[0].0].data.len();
                    for (r, row) in rows.iter().enumerate() {
                        for j in 0..dim {
                            self.nodes[row.0].grad[j] += grad[r * dim + j];
                        }
                    }
                }
                Op::SelectRow { m, row } => {
                    let dim = grad.len();
                    for (j, &g) in grad.iter().enumerate() {
                        self.nodes[m.0].grad[row * dim + j] += g;
                    }
                }
            }
            self.nodes[i].grad = grad;
        }
    }

    /// True iff every gradient entry on the tape is finite.
    pub fn grads_finite(&self) -> bool {
        self.nodes.iter().all(|n| n.grad.iter().all(|g| g.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Real, b: Real, tol: Real) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn matmul_identity() {
        let mut t = Tape::new();
        let i2 = t.leaf(vec![1.0, 0.0, 0.0, 1.0], vec![2, 2]);
        let a = t.leaf(vec![1.0, 2.0, 3.0, 4.0], vec![2, 2]);
        let c = t.matmul(i2, a);
        assert_eq!(t.value(c), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matmul_zero() {
        let mut t = Tape::new();
        let z = t.zeros(vec![2, 2]);
        let a = t.leaf(vec![5.0, -2.0, 7.0, 0.5], vec![2, 2]);
        let c = t.matmul(z, a);
        assert_eq!(t.value(c), &[0.0; 4]);
    }

    #[test]
    fn matmul_hand_case() {
        // [[1,2],[3,4]] x [[5,6],[7,8]] worked out by hand.
        let mut t = Tape::new();
        let a = t.leaf(vec![1.0, 2.0, 3.0, 4.0], vec![2, 2]);
        let b = t.leaf(vec![5.0, 6.0, 7.0, 8.0], vec![2, 2]);
        let c = t.matmul(a, b);
        assert_eq!(t.value(c), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    #[should_panic(expected = "shape mismatch in matmul")]
    fn matmul_shape_mismatch_names_both_shapes() {
        let mut t = Tape::new();
        let a = t.zeros(vec![2, 3]);
        let b = t.zeros(vec![2, 2]);
        t.matmul(a, b);
    }

    #[test]
    fn sigmoid_symmetry_and_closed_form() {
        let mut t = Tape::new();
        let x = t.leaf(vec![0.0, (3.0 as Real).ln(), 0.0], vec![3]);
        let s = t.sigmoid(x);
        assert!(close(t.value(s)[0], 0.5, 1e-15));
        // sigmoid(ln 3) = 1/(1/3 + 1) = 0.75
        assert!(close(t.value(s)[1], 0.75, 1e-15));
        let y = t.tanh(x);
        assert_eq!(t.value(y)[0], 0.0);
        // strictly inside (0,1)
        for &v in t.value(s) {
            assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn softmax_uniform_closed_form_and_stability() {
        let mut t = Tape::new();
        let c = t.leaf(vec![2.5, 2.5, 2.5], vec![3]);
        let s = t.softmax(c);
        for &v in t.value(s) {
            assert!(close(v, 1.0 / 3.0, 1e-12));
        }
        // softmax([0, ln 3]) = [0.25, 0.75] in closed form
        let x = t.leaf(vec![0.0, (3.0 as Real).ln()], vec![2]);
        let s = t.softmax(x);
        assert!(close(t.value(s)[0], 0.25, 1e-12));
        assert!(close(t.value(s)[1], 0.75, 1e-12));
        // large inputs do not overflow
        let big = t.leaf(vec![1000.0, 1000.0], vec![2]);
        let s = t.softmax(big);
        assert!(close(t.value(s)[0], 0.5, 1e-12));
        assert!(close(t.value(s)[1], 0.5, 1e-12));
        let total: Real = t.value(s).iter().sum();
        assert!(close(total, 1.0, 1e-12));
    }

    #[test]
    #[should_panic(expected = "non-empty")]
    fn softmax_empty_input_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(vec![], vec![0]);
        t.softmax(x);
    }

    /// Central-difference check of a scalar-valued tape builder, entry by
    /// entry over a single leaf input.
    fn finite_diff_check(build: impl Fn(&mut Tape, &[Real]) -> TensorId, x0: &[Real], tol: Real) {
        let mut t = Tape::new();
        let loss = build(&mut t, x0);
        t.backward(loss);
        let analytic = t.grad(TensorId(0)).to_vec();

        let eps = 1e-6;
        for j in 0..x0.len() {
            let mut xp = x0.to_vec();
            xp[j] += eps;
            let mut tp = Tape::new();
            let lp = build(&mut tp, &xp);
            let mut xm = x0.to_vec();
            xm[j] -= eps;
            let mut tm = Tape::new();
            let lm = build(&mut tm, &xm);
            let num = (tp.scalar_value(lp) - tm.scalar_value(lm)) / (2.0 * eps);
            let denom = analytic[j].abs().max(num.abs()).max(1e-6);
            assert!(
                (analytic[j] - num).abs() / denom < tol,
                "entry {}: analytic {} vs numeric {}",
                j,
                analytic[j],
                num
            );
        }
    }

    #[test]
    fn op_jacobians_match_central_differences() {
        let x0 = [0.3, -0.7, 1.2, 0.05, -0.4, 0.9];

        // matvec + sigmoid + sum
        finite_diff_check(
            |t, x| {
                let v = t.leaf(x.to_vec(), vec![6]);
                let w = t.leaf(vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.1], vec![1, 6]);
                let h = t.matvec(w, v);
                let s = t.sigmoid(h);
                t.sum(s)
            },
            &x0,
            1e-5,
        );

        // softmax -> dot with weights
        finite_diff_check(
            |t, x| {
                let v = t.leaf(x.to_vec(), vec![6]);
                let s = t.softmax(v);
                let w = t.leaf(vec![1.0, 2.0, -1.0, 0.5, 0.0, 3.0], vec![6]);
                t.dot(s, w)
            },
            &x0,
            1e-5,
        );

        // tanh, mul, logsumexp chain
        finite_diff_check(
            |t, x| {
                let v = t.leaf(x.to_vec(), vec![6]);
                let u = t.tanh(v);
                let m = t.mul(u, v);
                t.logsumexp(m)
            },
            &x0,
            1e-5,
        );

        // matmul route: treat x as 2x3, multiply by 3x2, sum
        finite_diff_check(
            |t, x| {
                let a = t.leaf(x.to_vec(), vec![2, 3]);
                let b = t.leaf(vec![0.2, -0.5, 1.0, 0.7, -0.3, 0.4], vec![3, 2]);
                let c = t.matmul(a, b);
                let s = t.sigmoid(c);
                let flat = t.leaf(vec![1.0; 4], vec![2, 2]);
                let m = t.mul(s, flat);
                let row0 = t.select_row(m, 0);
                let row1 = t.select_row(m, 1);
                let cat = t.concat(&[row0, row1]);
                t.sum(cat)
            },
            &x0,
            1e-5,
        );

        // stack_rows + matvec_t + add_row_broadcast + log path
        finite_diff_check(
            |t, x| {
                let m0 = t.leaf(x.to_vec(), vec![2, 3]);
                let a = t.select_row(m0, 0);
                let b = t.select_row(m0, 1);
                let m = t.stack_rows(&[a, b]);
                let bias = t.leaf(vec![0.3, 0.6, 0.9], vec![3]);
                let mb = t.add_row_broadcast(m, bias);
                let s = t.sigmoid(mb);
                let r0 = t.select_row(s, 0);
                let r1 = t.select_row(s, 1);
                let d = t.dot(r0, r1);
                let l = t.log(d);
                let w = t.leaf(vec![0.2, -0.4, 0.1, 0.5, -0.3, 0.7], vec![3, 2]);
                let mv = t.matvec_t(w, r0);
                let sm = t.sum(mv);
                t.add(l, sm)
            },
            &x0,
            1e-5,
        );
    }

    #[test]
    fn backward_gradients_all_finite() {
        let mut t = Tape::new();
        let x = t.leaf(vec![0.5, -0.5, 2.0], vec![3]);
        let s = t.softmax(x);
        let l = t.logsumexp(s);
        t.backward(l);
        assert!(t.grads_finite());
    }
}
