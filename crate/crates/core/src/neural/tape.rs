//! Reverse-mode differentiation over dense row-major matrices.
//!
//! Every recorded node stores its forward value and the operation that
//! produced it. [`Tape::backward`] walks the nodes in reverse insertion order
//! (a valid reverse topological order) and accumulates adjoints.

use serde::{Deserialize, Serialize};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "tensor shape mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_vec(1, 1, vec![v])
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a non-scalar tensor");
        self.data[0]
    }

    pub fn transpose(&self) -> Tensor {
        Tensor::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Tensor::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other` without materializing the transpose.
    fn t_matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.rows, other.rows, "t_matmul shape mismatch");
        let mut out = Tensor::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · otherᵀ`.
    fn matmul_t(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.cols, other.cols, "matmul_t shape mismatch");
        Tensor::from_fn(self.rows, other.rows, |i, j| {
            self.row(i).iter().zip(other.row(j)).map(|(a, b)| a * b).sum()
        })
    }

    fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }
}

/// Constant sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    row_ptr: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl SparseMatrix {
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut entries = Vec::new();
        row_ptr.push(0);
        for r in &rows {
            for &(c, v) in r {
                debug_assert!(c < cols);
                entries.push((c, v));
            }
            row_ptr.push(entries.len());
        }
        Self {
            rows: rows.len(),
            cols,
            row_ptr,
            entries,
        }
    }

    fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.entries[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn mul_dense(&self, x: &Tensor) -> Tensor {
        assert_eq!(self.cols, x.rows, "sparse matmul shape mismatch");
        let mut out = Tensor::zeros(self.rows, x.cols);
        for r in 0..self.rows {
            let orow = &mut out.data[r * x.cols..(r + 1) * x.cols];
            for &(c, v) in self.row(r) {
                for (o, xv) in orow.iter_mut().zip(x.row(c)) {
                    *o += v * xv;
                }
            }
        }
        out
    }

    /// `selfᵀ · g`.
    fn t_mul_dense(&self, g: &Tensor) -> Tensor {
        let mut out = Tensor::zeros(self.cols, g.cols);
        for r in 0..self.rows {
            let grow = g.row(r);
            for &(c, v) in self.row(r) {
                let orow = &mut out.data[c * g.cols..(c + 1) * g.cols];
                for (o, gv) in orow.iter_mut().zip(grow) {
                    *o += v * gv;
                }
            }
        }
        out
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Exp(Var),
    Ln(Var),
    Sqrt(Var),
    Square(Var),
    Sparse(std::rc::Rc<SparseMatrix>, Var),
    GatherRows(Var, Vec<usize>),
    /// Softmax over each `(start, len)` column segment; other columns pass
    /// through unchanged.
    SegmentSoftmax(Var, std::rc::Rc<Vec<(usize, usize)>>),
    RowSum(Var),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Recording of one forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    /// Adds a `1 × cols` bias row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let (x, b) = (self.value(a), self.value(bias));
        assert_eq!((1, x.cols), b.shape(), "bias shape mismatch");
        let mut v = x.clone();
        for row in v.data.chunks_mut(x.cols) {
            for (o, bv) in row.iter_mut().zip(&b.data) {
                *o += bv;
            }
        }
        self.push(v, Op::AddBias(a, bias))
    }

    fn zip_values(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "elementwise shape mismatch");
        Tensor::from_vec(
            x.rows,
            x.cols,
            x.data.iter().zip(&y.data).map(|(p, q)| f(*p, *q)).collect(),
        )
    }

    fn map_value(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let x = self.value(a);
        Tensor::from_vec(x.rows, x.cols, x.data.iter().map(|p| f(*p)).collect())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip_values(a, b, |p, q| p + q);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip_values(a, b, |p, q| p - q);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip_values(a, b, |p, q| p * q);
        self.push(v, Op::Mul(a, b))
    }

    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Var {
        let x = self.value(a);
        assert_eq!(x.shape(), c.shape(), "mul_const shape mismatch");
        let v = Tensor::from_vec(
            x.rows,
            x.cols,
            x.data.iter().zip(&c.data).map(|(p, q)| p * q).collect(),
        );
        self.push(v, Op::MulConst(a, c))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.map_value(a, |p| p * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let v = self.map_value(a, |p| p + s);
        self.push(v, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.map_value(a, |p| p.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.map_value(a, f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.map_value(a, f64::ln);
        self.push(v, Op::Ln(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.map_value(a, f64::sqrt);
        self.push(v, Op::Sqrt(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.map_value(a, |p| p * p);
        self.push(v, Op::Square(a))
    }

    pub fn sparse_matmul(&mut self, s: std::rc::Rc<SparseMatrix>, a: Var) -> Var {
        let v = s.mul_dense(self.value(a));
        self.push(v, Op::Sparse(s, a))
    }

    pub fn gather_rows(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let x = self.value(a);
        let mut data = Vec::with_capacity(idx.len() * x.cols);
        for &r in &idx {
            data.extend_from_slice(x.row(r));
        }
        let v = Tensor::from_vec(idx.len(), x.cols, data);
        self.push(v, Op::GatherRows(a, idx))
    }

    pub fn segment_softmax(&mut self, a: Var, segments: std::rc::Rc<Vec<(usize, usize)>>) -> Var {
        let mut v = self.value(a).clone();
        let cols = v.cols;
        for row in v.data.chunks_mut(cols) {
            for &(start, len) in segments.iter() {
                let seg = &mut row[start..start + len];
                let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for x in seg.iter_mut() {
                    *x = (*x - max).exp();
                    total += *x;
                }
                seg.iter_mut().for_each(|x| *x /= total);
            }
        }
        self.push(v, Op::SegmentSoftmax(a, segments))
    }

    /// Sums each row into a `rows × 1` column.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = Tensor::from_vec(
            x.rows,
            1,
            x.data.chunks(x.cols.max(1)).map(|r| r.iter().sum()).collect(),
        );
        self.push(v, Op::RowSum(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).data.iter().sum());
        self.push(v, Op::Sum(a))
    }

    /// Adjoints of every node with respect to the scalar `output`.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).data.len(), 1, "backward needs a scalar output");
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::scalar(1.0));
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            let mut acc = |v: Var, t: Tensor| match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => *slot = Some(t),
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    acc(*a, g.matmul_t(y));
                    acc(*b, x.t_matmul(&g));
                }
                Op::Transpose(a) => acc(*a, g.transpose()),
                Op::AddBias(a, b) => {
                    let mut gb = Tensor::zeros(1, g.cols);
                    for row in g.data.chunks(g.cols) {
                        for (o, v) in gb.data.iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    acc(*a, g);
                    acc(*b, gb);
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    let neg = Tensor::from_vec(g.rows, g.cols, g.data.iter().map(|v| -v).collect());
                    acc(*a, g);
                    acc(*b, neg);
                }
                Op::Mul(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    acc(*a, elementwise(&g, y, |p, q| p * q));
                    acc(*b, elementwise(&g, x, |p, q| p * q));
                }
                Op::MulConst(a, c) => acc(*a, elementwise(&g, c, |p, q| p * q)),
                Op::Scale(a, s) => acc(*a, map(&g, |p| p * s)),
                Op::AddScalar(a) => acc(*a, g),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    acc(*a, elementwise(&g, x, |p, q| if q > 0.0 { p } else { 0.0 }));
                }
                Op::Exp(a) => acc(*a, elementwise(&g, &node.value, |p, q| p * q)),
                Op::Ln(a) => {
                    let x = self.value(*a);
                    acc(*a, elementwise(&g, x, |p, q| p / q));
                }
                Op::Sqrt(a) => acc(*a, elementwise(&g, &node.value, |p, q| p / (2.0 * q))),
                Op::Square(a) => {
                    let x = self.value(*a);
                    acc(*a, elementwise(&g, x, |p, q| 2.0 * p * q));
                }
                Op::Sparse(s, a) => acc(*a, s.t_mul_dense(&g)),
                Op::GatherRows(a, idx) => {
                    let x = self.value(*a);
                    let mut ga = Tensor::zeros(x.rows, x.cols);
                    for (k, &r) in idx.iter().enumerate() {
                        let dst = &mut ga.data[r * x.cols..(r + 1) * x.cols];
                        for (o, v) in dst.iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    acc(*a, ga);
                }
                Op::SegmentSoftmax(a, segments) => {
                    let y = &node.value;
                    let mut ga = g.clone();
                    for r in 0..y.rows {
                        let yrow = y.row(r);
                        let grow = g.row(r);
                        let orow = &mut ga.data[r * y.cols..(r + 1) * y.cols];
                        for &(start, len) in segments.iter() {
                            let dot: f64 = (start..start + len).map(|c| grow[c] * yrow[c]).sum();
                            for c in start..start + len {
                                orow[c] = yrow[c] * (grow[c] - dot);
                            }
                        }
                    }
                    acc(*a, ga);
                }
                Op::RowSum(a) => {
                    let x = self.value(*a);
                    acc(*a, Tensor::from_fn(x.rows, x.cols, |r, _| g.data[r]));
                }
                Op::Sum(a) => {
                    let x = self.value(*a);
                    acc(*a, Tensor::from_vec(x.rows, x.cols, vec![g.data[0]; x.data.len()]));
                }
            }
        }
        Gradients { grads }
    }
}

fn elementwise(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::from_vec(
        a.rows,
        a.cols,
        a.data.iter().zip(&b.data).map(|(p, q)| f(*p, *q)).collect(),
    )
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_vec(a.rows, a.cols, a.data.iter().map(|p| f(*p)).collect())
}

/// Adjoints produced by [`Tape::backward`]. Only leaves keep theirs.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a leaf; `None` if the output does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}
