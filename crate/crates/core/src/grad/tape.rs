//! Reverse-mode differentiation over dense 2-d arrays.
//!
//! Operations are recorded on an append-only [`Tape`]; each node refers only
//! to earlier nodes, so the graph is acyclic by construction. Binary
//! elementwise operations require equal shapes; use [`Tape::broadcast`] to
//! expand scalars, rows or columns first.
//!
//! Kink conventions: `relu'(0) = 0`, `|.|'(0) = 0`, and `min(a, b)` routes
//! the gradient to `a` on ties.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Row-major dense matrix. Vectors are `n x 1` columns or `1 x n` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "tensor shape does not match data");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn scalar(value: f64) -> Self {
        Self::new(1, 1, vec![value])
    }

    pub fn column(data: Vec<f64>) -> Self {
        let n = data.len();
        Self::new(n, 1, data)
    }

    pub fn row(data: Vec<f64>) -> Self {
        let n = data.len();
        Self::new(1, n, data)
    }

    pub fn from_array(a: &Array2<f64>) -> Self {
        let (rows, cols) = a.dim();
        Self::new(rows, cols, a.iter().copied().collect())
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone()).expect("shape")
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// The single entry of a `1 x 1` tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.shape(), (1, 1), "item() on a non-scalar tensor");
        self.data[0]
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::new(self.rows, self.cols, self.data.iter().map(|&x| f(x)).collect())
    }

    fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(self.shape(), other.shape(), "elementwise shape mismatch");
        Tensor::new(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape(), other.shape(), "gradient shape mismatch");
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    fn matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.cols, other.rows, "matmul inner dimensions differ");
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * p];
        for i in 0..n {
            let dst = &mut out[i * p..(i + 1) * p];
            for k in 0..m {
                let a = self.data[i * m + k];
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[k * p..(k + 1) * p];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += a * s);
            }
        }
        Tensor::new(n, p, out)
    }

    /// Sums `self` down to `shape`, the adjoint of broadcasting.
    fn reduce_to(&self, shape: (usize, usize)) -> Tensor {
        if self.shape() == shape {
            return self.clone();
        }
        let mut out = Tensor::zeros(shape.0, shape.1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let (ti, tj) = (if shape.0 == 1 { 0 } else { i }, if shape.1 == 1 { 0 } else { j });
                out.data[ti * shape.1 + tj] += self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Repeats a row or column vector to `rows x cols`.
    pub fn broadcast_to(&self, rows: usize, cols: usize) -> Tensor {
        assert!(
            (self.rows == rows || self.rows == 1) && (self.cols == cols || self.cols == 1),
            "cannot broadcast {:?} to {:?}",
            self.shape(),
            (rows, cols)
        );
        Tensor::new(
            rows,
            cols,
            (0..rows * cols)
                .map(|idx| {
                    let (i, j) = (idx / cols, idx % cols);
                    let (si, sj) = (if self.rows == 1 { 0 } else { i }, if self.cols == 1 { 0 } else { j });
                    self.data[si * self.cols + sj]
                })
                .collect(),
        )
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Const,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    Offset(Var),
    Exp(Var),
    Log(Var),
    Powf(Var, f64),
    Relu(Var),
    Abs(Var),
    Min(Var, Var),
    Sum(Var),
    SumRows(Var),
    SumCols(Var),
    MatMul(Var, Var),
    Transpose(Var),
    Broadcast(Var),
    Reshape(Var),
    ConcatRows(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default, Clone)]
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

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// An input that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Const)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip(self.value(b), |x, y| x + y);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip(self.value(b), |x, y| x - y);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip(self.value(b), |x, y| x * y);
        self.push(value, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip(self.value(b), |x, y| x / y);
        self.push(value, Op::Div(a, b))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| -x);
        self.push(value, Op::Neg(a))
    }

    /// `c * a` for a constant `c`.
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| c * x);
        self.push(value, Op::Scale(a, c))
    }

    /// `a + c` for a constant `c`.
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        self.push(value, Op::Offset(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        self.push(value, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::ln);
        self.push(value, Op::Log(a))
    }

    /// `a^p` for a constant exponent.
    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        let value = self.value(a).map(|x| x.powf(p));
        self.push(value, Op::Powf(a, p))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::abs);
        self.push(value, Op::Abs(a))
    }

    /// Elementwise minimum.
    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip(self.value(b), |x, y| if x <= y { x } else { y });
        self.push(value, Op::Min(a, b))
    }

    /// Elementwise `min(a, c)` against a constant.
    pub fn min_const(&mut self, a: Var, c: f64) -> Var {
        let (r, k) = self.shape(a);
        let b = self.constant(Tensor::filled(r, k, c));
        self.min(a, b)
    }

    /// Sum of all entries, a `1 x 1` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).data.iter().sum());
        self.push(value, Op::Sum(a))
    }

    /// Sums each row: `n x m -> n x 1`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let value = Tensor::column(t.data.chunks(t.cols).map(|r| r.iter().sum()).collect());
        self.push(value, Op::SumRows(a))
    }

    /// Sums each column: `n x m -> 1 x m`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let mut out = vec![0.0; t.cols];
        for r in t.data.chunks(t.cols) {
            out.iter_mut().zip(r).for_each(|(o, x)| *o += x);
        }
        self.push(Tensor::row(out), Op::SumCols(a))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    /// Inner product of two equally shaped nodes.
    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let p = self.mul(a, b);
        self.sum(p)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    /// Expands a `1 x 1`, `1 x m` or `n x 1` node to `rows x cols`.
    pub fn broadcast(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        if self.shape(a) == (rows, cols) {
            return a;
        }
        let value = self.value(a).broadcast_to(rows, cols);
        self.push(value, Op::Broadcast(a))
    }

    /// Same data read as `rows x cols` (row-major).
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let data = self.value(a).data.clone();
        assert_eq!(data.len(), rows * cols, "reshape changes the size");
        self.push(Tensor::new(rows, cols, data), Op::Reshape(a))
    }

    /// Stacks nodes with equal column counts vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.cols, cols, "concat_rows column mismatch");
            data.extend_from_slice(&t.data);
        }
        let rows = data.len() / cols.max(1);
        self.push(Tensor::new(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    /// Gradients of the scalar `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let (rows, cols) = self.shape(output);
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarOutput { rows, cols });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::scalar(1.0));

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf | Op::Const => {}
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g.clone());
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.map(|x| -x));
                    acc(&mut grads, *a, g.clone());
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, g.zip(vb, |x, y| x * y));
                    acc(&mut grads, *b, g.zip(va, |x, y| x * y));
                }
                Op::Div(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, g.zip(vb, |x, y| x / y));
                    let gb = g.zip(&va.zip(vb, |x, y| x / (y * y)), |x, y| -x * y);
                    acc(&mut grads, *b, gb);
                }
                Op::Neg(a) => acc(&mut grads, *a, g.map(|x| -x)),
                Op::Scale(a, c) => acc(&mut grads, *a, g.map(|x| c * x)),
                Op::Offset(a) => acc(&mut grads, *a, g.clone()),
                Op::Exp(a) => acc(&mut grads, *a, g.zip(&node.value, |x, y| x * y)),
                Op::Log(a) => acc(&mut grads, *a, g.zip(self.value(*a), |x, y| x / y)),
                Op::Powf(a, p) => {
                    let ga = g.zip(self.value(*a), |x, y| x * p * y.powf(p - 1.0));
                    acc(&mut grads, *a, ga)
                }
                Op::Relu(a) => {
                    let ga = g.zip(self.value(*a), |x, y| if y > 0.0 { x } else { 0.0 });
                    acc(&mut grads, *a, ga)
                }
                Op::Abs(a) => {
                    let ga = g.zip(self.value(*a), |x, y| {
                        if y > 0.0 {
                            x
                        } else if y < 0.0 {
                            -x
                        } else {
                            0.0
                        }
                    });
                    acc(&mut grads, *a, ga)
                }
                Op::Min(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let first = va.zip(vb, |x, y| if x <= y { 1.0 } else { 0.0 });
                    acc(&mut grads, *b, g.zip(&first, |x, s| x * (1.0 - s)));
                    acc(&mut grads, *a, g.zip(&first, |x, s| x * s));
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    acc(&mut grads, *a, Tensor::filled(r, c, g.item()))
                }
                Op::SumRows(a) => {
                    let (r, c) = self.shape(*a);
                    acc(&mut grads, *a, g.broadcast_to(r, c))
                }
                Op::SumCols(a) => {
                    let (r, c) = self.shape(*a);
                    acc(&mut grads, *a, g.broadcast_to(r, c))
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, g.matmul(&vb.transpose()));
                    acc(&mut grads, *b, va.transpose().matmul(&g));
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.transpose()),
                Op::Broadcast(a) => {
                    let shape = self.shape(*a);
                    acc(&mut grads, *a, g.reduce_to(shape))
                }
                Op::Reshape(a) => {
                    let (r, c) = self.shape(*a);
                    acc(&mut grads, *a, Tensor::new(r, c, g.data.clone()))
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (r, c) = self.shape(p);
                        let slice = g.data[offset..offset + r * c].to_vec();
                        offset += r * c;
                        acc(&mut grads, p, Tensor::new(r, c, slice));
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

/// Output of [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient at `v`, or `None` when the output does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient at `v`, zero-filled when the output does not depend on it.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Tensor {
        match self.get(v) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = tape.shape(v);
                Tensor::zeros(r, c)
            }
        }
    }
}
