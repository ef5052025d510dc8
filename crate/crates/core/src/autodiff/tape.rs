use super::{AdError, Scalar, Tensor};

/// Large negative logit offset standing in for `-inf` in masked attention.
pub const MASK_SENTINEL: f64 = -1e9;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, T),
    Sqrt(Var),
    SoftmaxWithBias(Var, Var),
    LayerNorm { x: Var, inv_std: Vec<T> },
    Gelu(Var),
    LeakyReluClip { x: Var, slope: T, lo: T, hi: T },
    Sum(Var),
    Gather { src: Var, indices: Vec<usize> },
    Slice { src: Var, offset: usize },
    SliceCols { src: Var, start: usize },
    ConcatCols(Vec<Var>),
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::MulRow(..) => "mul_row",
            Op::Scale(..) => "scale",
            Op::Sqrt(..) => "sqrt",
            Op::SoftmaxWithBias(..) => "softmax_with_bias",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Gelu(..) => "gelu",
            Op::LeakyReluClip { .. } => "leaky_relu_clip",
            Op::Sum(..) => "reduce_sum",
            Op::Gather { .. } => "gather",
            Op::Slice { .. } => "slice",
            Op::SliceCols { .. } => "slice_cols",
            Op::ConcatCols(..) => "concat_cols",
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Eager reverse-mode tape.
///
/// Every operation evaluates immediately and appends its result, so the
/// node list is always in topological order.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &'static str, detail: String) -> AdError {
    AdError::ShapeMismatch { op, detail }
}

fn dims(op: &'static str, t: &Tensor<impl Scalar>) -> Result<(usize, usize), AdError> {
    t.dims2().ok_or_else(|| mismatch(op, format!("expected rank 1 or 2, got {:?}", t.shape())))
}

fn gelu_parts<T: Scalar>(x: T) -> (T, T) {
    let c = T::from_f64_lossy((2.0 / std::f64::consts::PI).sqrt());
    let a = T::from_f64_lossy(0.044715);
    let half = T::from_f64_lossy(0.5);
    let three = T::from_f64_lossy(3.0);
    let u = c * (x + a * x * x * x);
    let th = u.tanh();
    let value = half * x * (T::one() + th);
    let deriv = half * (T::one() + th) + half * x * (T::one() - th * th) * c * (T::one() + three * a * x * x);
    (value, deriv)
}

fn leaky_clip<T: Scalar>(x: T, slope: T, lo: T, hi: T) -> (T, T) {
    let y = if x > T::zero() { x } else { slope * x };
    // Subgradient convention: left-hand limit at every kink.
    let d = if y > hi || y <= lo {
        T::zero()
    } else if x > T::zero() {
        T::one()
    } else {
        slope
    };
    (y.max(lo).min(hi), d)
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Name of the primitive that produced `v`.
    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Result<Var, AdError> {
        if !value.is_finite() {
            return Err(AdError::NonFiniteDetected { op: op.name() });
        }
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Records a differentiable input.
    pub fn param(&mut self, value: Tensor<T>) -> Result<Var, AdError> {
        self.push(value, Op::Leaf, true)
    }

    /// Records a non-differentiable input.
    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var, AdError> {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        let (m, k) = dims("matmul", self.value(a))?;
        let (k2, n) = dims("matmul", self.value(b))?;
        if k != k2 {
            return Err(mismatch("matmul", format!("[{m},{k}] x [{k2},{n}]")));
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(
            m,
            k,
            n,
            self.value(a).data(),
            (k as isize, 1),
            self.value(b).data(),
            (n as isize, 1),
            T::zero(),
            &mut out,
        );
        let rg = self.rg(&[a, b]);
        self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, AdError> {
        let (m, n) = dims("transpose", self.value(a))?;
        let src = self.value(a).data();
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = src[i * n + j];
            }
        }
        let rg = self.rg(&[a]);
        self.push(Tensor::matrix(n, m, out)?, Op::Transpose(a), rg)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), AdError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(mismatch(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Result<Var, AdError> {
        self.same_shape(op.name(), a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(&[a, b]);
        self.push(out, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    fn row_broadcast(&mut self, a: Var, r: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Result<Var, AdError> {
        let name = op.name();
        let (m, n) = dims(name, self.value(a))?;
        let (rr, rn) = dims(name, self.value(r))?;
        if rr != 1 || rn != n {
            return Err(mismatch(name, format!("[{m},{n}] with row [{rr},{rn}]")));
        }
        let row = self.value(r).data();
        let data = self
            .value(a)
            .data()
            .chunks_exact(n.max(1))
            .flat_map(|chunk| chunk.iter().zip(row).map(|(&x, &y)| f(x, y)))
            .collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(&[a, r]);
        self.push(out, op, rg)
    }

    /// `a + r` with the `[1, n]` row `r` broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, r: Var) -> Result<Var, AdError> {
        self.row_broadcast(a, r, Op::AddRow(a, r), |x, y| x + y)
    }

    /// `a ⊙ r` with the `[1, n]` row `r` broadcast over the rows of `a`.
    pub fn mul_row(&mut self, a: Var, r: Var) -> Result<Var, AdError> {
        self.row_broadcast(a, r, Op::MulRow(a, r), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Result<Var, AdError> {
        let out = self.value(a).map(|x| x * c);
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale(a, c), rg)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var, AdError> {
        let out = self.value(a).map(|x| x.sqrt());
        let rg = self.rg(&[a]);
        self.push(out, Op::Sqrt(a), rg)
    }

    /// Row-wise `softmax(logits + bias)`.
    ///
    /// Entries of `bias` at or below [`MASK_SENTINEL`] receive weight exactly
    /// zero, and so does their adjoint.
    pub fn softmax_with_bias(&mut self, logits: Var, bias: Var) -> Result<Var, AdError> {
        self.same_shape("softmax_with_bias", logits, bias)?;
        let (m, n) = dims("softmax_with_bias", self.value(logits))?;
        let masked = T::from_f64_lossy(MASK_SENTINEL);
        let l = self.value(logits).data();
        let b = self.value(bias).data();
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = i * n..(i + 1) * n;
            let mut max = T::neg_infinity();
            for j in row.clone() {
                if b[j] > masked {
                    max = max.max(l[j] + b[j]);
                }
            }
            if max == T::neg_infinity() {
                continue;
            }
            let mut total = T::zero();
            for j in row.clone() {
                if b[j] > masked {
                    let e = (l[j] + b[j] - max).exp();
                    out[j] = e;
                    total = total + e;
                }
            }
            for j in row {
                out[j] = out[j] / total;
            }
        }
        let rg = self.rg(&[logits, bias]);
        self.push(Tensor::matrix(m, n, out)?, Op::SoftmaxWithBias(logits, bias), rg)
    }

    /// Row-wise normalization to zero mean and unit variance (no affine).
    pub fn layer_norm(&mut self, x: Var, eps: T) -> Result<Var, AdError> {
        let (m, n) = dims("layer_norm", self.value(x))?;
        let src = self.value(x).data();
        let nn = T::from_usize(n).unwrap();
        let mut out = vec![T::zero(); m * n];
        let mut inv_std = Vec::with_capacity(m);
        for i in 0..m {
            let row = &src[i * n..(i + 1) * n];
            let mean = row.iter().copied().sum::<T>() / nn;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nn;
            let s = T::one() / (var + eps).sqrt();
            for j in 0..n {
                out[i * n + j] = (row[j] - mean) * s;
            }
            inv_std.push(s);
        }
        let rg = self.rg(&[x]);
        self.push(Tensor::new(self.value(x).shape().to_vec(), out)?, Op::LayerNorm { x, inv_std }, rg)
    }

    /// GeLU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Result<Var, AdError> {
        let out = self.value(x).map(|v| gelu_parts(v).0);
        let rg = self.rg(&[x]);
        self.push(out, Op::Gelu(x), rg)
    }

    /// Leaky ReLU with negative slope `slope`, then clipping to `[lo, hi]`.
    pub fn leaky_relu_clip(&mut self, x: Var, slope: T, lo: T, hi: T) -> Result<Var, AdError> {
        let out = self.value(x).map(|v| leaky_clip(v, slope, lo, hi).0);
        let rg = self.rg(&[x]);
        self.push(out, Op::LeakyReluClip { x, slope, lo, hi }, rg)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, AdError> {
        self.leaky_relu_clip(x, T::zero(), T::neg_infinity(), T::infinity())
    }

    /// Sum of all entries, as a `[1, 1]` tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var, AdError> {
        let total = self.value(x).data().iter().copied().sum::<T>();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(total), Op::Sum(x), rg)
    }

    /// `out.flat[i] = src.flat[indices[i]]`, reshaped to `shape`.
    pub fn gather(&mut self, src: Var, indices: Vec<usize>, shape: Vec<usize>) -> Result<Var, AdError> {
        let s = self.value(src).data();
        if let Some(&bad) = indices.iter().find(|&&i| i >= s.len()) {
            return Err(AdError::IndexOutOfRange { op: "gather", index: bad, len: s.len() });
        }
        let data = indices.iter().map(|&i| s[i]).collect();
        let out = Tensor::new(shape, data)?;
        let rg = self.rg(&[src]);
        self.push(out, Op::Gather { src, indices }, rg)
    }

    /// Rows `rows` of a rank-2 tensor.
    pub fn gather_rows(&mut self, src: Var, rows: &[usize]) -> Result<Var, AdError> {
        let (m, n) = dims("gather", self.value(src))?;
        if let Some(&bad) = rows.iter().find(|&&r| r >= m) {
            return Err(AdError::IndexOutOfRange { op: "gather", index: bad, len: m });
        }
        let indices = rows.iter().flat_map(|&r| (r * n)..(r + 1) * n).collect();
        self.gather(src, indices, vec![rows.len(), n])
    }

    /// Contiguous flat range of `src`, reshaped to `shape`.
    pub fn slice(&mut self, src: Var, offset: usize, shape: Vec<usize>) -> Result<Var, AdError> {
        let len: usize = shape.iter().product();
        let s = self.value(src).data();
        if offset + len > s.len() {
            return Err(AdError::IndexOutOfRange { op: "slice", index: offset + len, len: s.len() });
        }
        let out = Tensor::new(shape, s[offset..offset + len].to_vec())?;
        let rg = self.rg(&[src]);
        self.push(out, Op::Slice { src, offset }, rg)
    }

    /// Columns `start..start + width` of a rank-2 tensor.
    pub fn slice_cols(&mut self, src: Var, start: usize, width: usize) -> Result<Var, AdError> {
        let (m, n) = dims("slice_cols", self.value(src))?;
        if start + width > n {
            return Err(AdError::IndexOutOfRange { op: "slice_cols", index: start + width, len: n });
        }
        let s = self.value(src).data();
        let data = (0..m).flat_map(|i| s[i * n + start..i * n + start + width].iter().copied()).collect();
        let rg = self.rg(&[src]);
        self.push(Tensor::matrix(m, width, data)?, Op::SliceCols { src, start }, rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AdError> {
        let first = parts.first().ok_or_else(|| mismatch("concat_cols", "no inputs".into()))?;
        let (m, _) = dims("concat_cols", self.value(*first))?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (pm, pn) = dims("concat_cols", self.value(p))?;
            if pm != m {
                return Err(mismatch("concat_cols", format!("row counts {m} vs {pm}")));
            }
            widths.push(pn);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let rg = self.rg(parts);
        self.push(Tensor::matrix(m, total, data)?, Op::ConcatCols(parts.to_vec()), rg)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, AdError> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(AdError::NotScalarLoss { shape: lv.shape().to_vec() });
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape().to_vec(), T::one()));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| match self.nodes[i].op {
                Op::Leaf if self.nodes[i].requires_grad => {
                    Some(g.unwrap_or_else(|| Tensor::zeros(self.nodes[i].value.shape().to_vec())))
                }
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn grad_buf<'g>(&self, grads: &'g mut [Option<Tensor<T>>], v: Var) -> Option<&'g mut Tensor<T>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let shape = self.nodes[v.0].value.shape().to_vec();
        Some(grads[v.0].get_or_insert_with(|| Tensor::zeros(shape)))
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, f: impl FnOnce(&mut [T])) {
        if let Some(buf) = self.grad_buf(grads, v) {
            f(buf.data_mut());
        }
    }

    fn propagate(&self, i: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[i];
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2().unwrap();
                let n = self.value(*b).dims2().unwrap().1;
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |da| {
                    T::gemm(m, n, k, gd, (n as isize, 1), bd, (1, n as isize), T::one(), da)
                });
                self.accumulate(grads, *b, |db| {
                    T::gemm(k, m, n, ad, (1, k as isize), gd, (n as isize, 1), T::one(), db)
                });
            }
            Op::Transpose(a) => {
                let (m, n) = self.value(*a).dims2().unwrap();
                self.accumulate(grads, *a, |da| {
                    for r in 0..m {
                        for c in 0..n {
                            da[r * n + c] = da[r * n + c] + gd[c * m + r];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |da| add_into(da, gd));
                self.accumulate(grads, *b, |db| add_into(db, gd));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |da| add_into(da, gd));
                self.accumulate(grads, *b, |db| {
                    for (d, &v) in db.iter_mut().zip(gd) {
                        *d = *d - v;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |da| {
                    for ((d, &gv), &y) in da.iter_mut().zip(gd).zip(bv) {
                        *d = *d + gv * y;
                    }
                });
                self.accumulate(grads, *b, |db| {
                    for ((d, &gv), &x) in db.iter_mut().zip(gd).zip(av) {
                        *d = *d + gv * x;
                    }
                });
            }
            Op::AddRow(a, r) => {
                let n = self.value(*r).len();
                self.accumulate(grads, *a, |da| add_into(da, gd));
                self.accumulate(grads, *r, |dr| {
                    for chunk in gd.chunks_exact(n.max(1)) {
                        add_into(dr, chunk);
                    }
                });
            }
            Op::MulRow(a, r) => {
                let n = self.value(*r).len();
                let (av, rv) = (self.value(*a).data(), self.value(*r).data());
                self.accumulate(grads, *a, |da| {
                    for (dchunk, gchunk) in da.chunks_exact_mut(n.max(1)).zip(gd.chunks_exact(n.max(1))) {
                        for ((d, &gv), &y) in dchunk.iter_mut().zip(gchunk).zip(rv) {
                            *d = *d + gv * y;
                        }
                    }
                });
                self.accumulate(grads, *r, |dr| {
                    for (gchunk, achunk) in gd.chunks_exact(n.max(1)).zip(av.chunks_exact(n.max(1))) {
                        for ((d, &gv), &x) in dr.iter_mut().zip(gchunk).zip(achunk) {
                            *d = *d + gv * x;
                        }
                    }
                });
            }
            Op::Scale(a, c) => {
                self.accumulate(grads, *a, |da| {
                    for (d, &gv) in da.iter_mut().zip(gd) {
                        *d = *d + gv * *c;
                    }
                });
            }
            Op::Sqrt(a) => {
                let y = node.value.data();
                let two = T::from_f64_lossy(2.0);
                self.accumulate(grads, *a, |da| {
                    for ((d, &gv), &yv) in da.iter_mut().zip(gd).zip(y) {
                        // Zero subgradient at the origin.
                        if yv > T::zero() {
                            *d = *d + gv / (two * yv);
                        }
                    }
                });
            }
            Op::SoftmaxWithBias(l, b) => {
                let (m, n) = node.value.dims2().unwrap();
                let p = node.value.data();
                let mut dl = vec![T::zero(); m * n];
                for r in 0..m {
                    let row = r * n..(r + 1) * n;
                    let dot: T = row.clone().map(|j| p[j] * gd[j]).sum();
                    for j in row {
                        dl[j] = p[j] * (gd[j] - dot);
                    }
                }
                self.accumulate(grads, *l, |d| add_into(d, &dl));
                self.accumulate(grads, *b, |d| add_into(d, &dl));
            }
            Op::LayerNorm { x, inv_std } => {
                let (m, n) = node.value.dims2().unwrap();
                let y = node.value.data();
                let nn = T::from_usize(n).unwrap();
                self.accumulate(grads, *x, |dx| {
                    for r in 0..m {
                        let row = r * n..(r + 1) * n;
                        let mean_g: T = row.clone().map(|j| gd[j]).sum::<T>() / nn;
                        let mean_gy: T = row.clone().map(|j| gd[j] * y[j]).sum::<T>() / nn;
                        for j in row {
                            dx[j] = dx[j] + inv_std[r] * (gd[j] - mean_g - y[j] * mean_gy);
                        }
                    }
                });
            }
            Op::Gelu(x) => {
                let xv = self.value(*x).data();
                self.accumulate(grads, *x, |dx| {
                    for ((d, &gv), &v) in dx.iter_mut().zip(gd).zip(xv) {
                        *d = *d + gv * gelu_parts(v).1;
                    }
                });
            }
            Op::LeakyReluClip { x, slope, lo, hi } => {
                let xv = self.value(*x).data();
                self.accumulate(grads, *x, |dx| {
                    for ((d, &gv), &v) in dx.iter_mut().zip(gd).zip(xv) {
                        *d = *d + gv * leaky_clip(v, *slope, *lo, *hi).1;
                    }
                });
            }
            Op::Sum(x) => {
                let gv = gd[0];
                self.accumulate(grads, *x, |dx| {
                    for d in dx.iter_mut() {
                        *d = *d + gv;
                    }
                });
            }
            Op::Gather { src, indices } => {
                self.accumulate(grads, *src, |ds| {
                    for (&idx, &gv) in indices.iter().zip(gd) {
                        ds[idx] = ds[idx] + gv;
                    }
                });
            }
            Op::Slice { src, offset } => {
                self.accumulate(grads, *src, |ds| add_into(&mut ds[*offset..*offset + gd.len()], gd));
            }
            Op::SliceCols { src, start } => {
                let (m, w) = node.value.dims2().unwrap();
                let n = self.value(*src).dims2().unwrap().1;
                self.accumulate(grads, *src, |ds| {
                    for r in 0..m {
                        add_into(&mut ds[r * n + start..r * n + start + w], &gd[r * w..(r + 1) * w]);
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let (m, total) = node.value.dims2().unwrap();
                let mut col = 0;
                for &p in parts {
                    let w = self.value(p).dims2().unwrap().1;
                    self.accumulate(grads, p, |dp| {
                        for r in 0..m {
                            add_into(&mut dp[r * w..(r + 1) * w], &gd[r * total + col..r * total + col + w]);
                        }
                    });
                    col += w;
                }
            }
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

/// Result of [`Tape::backward`]: one gradient per differentiable leaf.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of a leaf recorded with [`Tape::param`]. Leaves the loss does
    /// not depend on get an all-zero gradient.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
