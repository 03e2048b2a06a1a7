//! Reverse-mode automatic differentiation over dense row-major arrays.
//!
//! A [`Graph`] is an append-only arena of nodes; a [`Tensor`] is a handle into
//! it. Node indices are topologically ordered by construction, so backward is
//! a single reverse sweep over the arena. All kernels are sequential and
//! reductions accumulate left-to-right, which keeps results bit-reproducible.

mod gradcheck;
mod kernels;

pub use gradcheck::{central_difference_gradient, grad_check, max_relative_error};

use std::fmt;

pub type TensorResult<T> = Result<T, TensorError>;

/// Errors from graph construction and backward passes.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorError {
    /// Input shapes incompatible with the op's shape rule.
    ShapeMismatch {
        op: &'static str,
        shapes: Vec<Vec<usize>>,
    },
    /// Backward called on a tensor that is not a scalar.
    NonScalarRoot { shape: Vec<usize> },
    /// Backward called on a tensor that does not track gradients.
    NoGradRoot,
    /// A scalar argument violates the op's precondition.
    InvalidScalar { op: &'static str, value: f64 },
    /// A non-finite value surfaced where the contract requires finite data.
    NonFinite { op: &'static str, index: usize },
    /// Value buffer length does not match the product of the shape.
    DataLength { expected: usize, got: usize },
    /// Row range out of bounds for slice_rows.
    BadRowRange {
        start: usize,
        end: usize,
        rows: usize,
    },
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ShapeMismatch { op, shapes } => {
                write!(f, "shape mismatch in {op}: ")?;
                for (i, s) in shapes.iter().enumerate() {
                    if i > 0 {
                        write!(f, " vs ")?;
                    }
                    write!(f, "{s:?}")?;
                }
                Ok(())
            }
            Self::NonScalarRoot { shape } => {
                write!(f, "backward root must be scalar, got shape {shape:?}")
            }
            Self::NoGradRoot => write!(f, "backward root does not require gradients"),
            Self::InvalidScalar { op, value } => {
                write!(f, "invalid scalar argument {value} for {op}")
            }
            Self::NonFinite { op, index } => {
                write!(f, "non-finite value in {op} at flat index {index}")
            }
            Self::DataLength { expected, got } => {
                write!(f, "value buffer length {got} does not match shape product {expected}")
            }
            Self::BadRowRange { start, end, rows } => {
                write!(f, "row range {start}..{end} out of bounds for {rows} rows")
            }
        }
    }
}

impl std::error::Error for TensorError {}

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tensor(pub usize);

/// The differentiable operation set. Every variant has a forward rule and a
/// vector-Jacobian backward rule.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    Matmul,
    AddBroadcast,
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
    Square,
    Sum,
    Mean,
    /// Elementwise max(x, s); the hinge max{0, x} is s = 0.
    MaxWithScalar(f64),
    Log,
    Sub,
    Mul,
    MulScalar(f64),
    DivScalar(f64),
    Recip,
    Exp,
    Abs,
    ConcatRows,
    SliceRows { start: usize, end: usize },
    Reshape(Vec<usize>),
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Matmul => "matmul",
            Self::AddBroadcast => "add_broadcast",
            Self::Relu => "relu",
            Self::LeakyRelu(_) => "leaky_relu",
            Self::Sigmoid => "sigmoid",
            Self::Tanh => "tanh",
            Self::Square => "square",
            Self::Sum => "sum",
            Self::Mean => "mean",
            Self::MaxWithScalar(_) => "max_with_scalar",
            Self::Log => "log",
            Self::Sub => "sub",
            Self::Mul => "mul",
            Self::MulScalar(_) => "mul_scalar",
            Self::DivScalar(_) => "div_scalar",
            Self::Recip => "recip",
            Self::Exp => "exp",
            Self::Abs => "abs",
            Self::ConcatRows => "concat_rows",
            Self::SliceRows { .. } => "slice_rows",
            Self::Reshape(_) => "reshape",
        }
    }
}

struct Node {
    shape: Vec<usize>,
    values: Vec<f64>,
    /// Persistent gradient accumulator; allocated only when requires_grad.
    grad: Vec<f64>,
    requires_grad: bool,
    /// Producing op and its inputs; None for leaves and for results of
    /// all-constant inputs (no edge is recorded in that case).
    parents: Option<(OpKind, Vec<Tensor>)>,
}

/// Append-only computation graph.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Create a leaf node.
    pub fn leaf(
        &mut self,
        shape: &[usize],
        values: Vec<f64>,
        requires_grad: bool,
    ) -> TensorResult<Tensor> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(TensorError::DataLength {
                expected,
                got: values.len(),
            });
        }
        let grad = if requires_grad {
            vec![0.0; values.len()]
        } else {
            Vec::new()
        };
        self.nodes.push(Node {
            shape: shape.to_vec(),
            values,
            grad,
            requires_grad,
            parents: None,
        });
        Ok(Tensor(self.nodes.len() - 1))
    }

    /// Leaf that does not track gradients.
    pub fn constant(&mut self, shape: &[usize], values: Vec<f64>) -> TensorResult<Tensor> {
        self.leaf(shape, values, false)
    }

    /// Scalar constant of shape [1].
    pub fn scalar(&mut self, value: f64) -> Tensor {
        self.leaf(&[1], vec![value], false).expect("scalar leaf")
    }

    pub fn shape(&self, t: Tensor) -> &[usize] {
        &self.nodes[t.0].shape
    }

    pub fn values(&self, t: Tensor) -> &[f64] {
        &self.nodes[t.0].values
    }

    /// Value of a single-element tensor.
    pub fn scalar_value(&self, t: Tensor) -> f64 {
        debug_assert_eq!(self.nodes[t.0].values.len(), 1);
        self.nodes[t.0].values[0]
    }

    pub fn requires_grad(&self, t: Tensor) -> bool {
        self.nodes[t.0].requires_grad
    }

    /// Accumulated gradient; empty slice when the tensor does not track one.
    pub fn grad(&self, t: Tensor) -> &[f64] {
        &self.nodes[t.0].grad
    }

    /// Reset every gradient accumulator to zero.
    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            for g in &mut node.grad {
                *g = 0.0;
            }
        }
    }

    fn rows_cols(&self, t: Tensor) -> (usize, usize) {
        let s = self.shape(t);
        match s.len() {
            1 => (s[0], 1),
            2 => (s[0], s[1]),
            _ => (s.iter().product(), 1),
        }
    }

    fn push_op(
        &mut self,
        op: OpKind,
        inputs: &[Tensor],
        shape: Vec<usize>,
        values: Vec<f64>,
    ) -> Tensor {
        let requires_grad = inputs.iter().any(|t| self.nodes[t.0].requires_grad);
        let (grad, parents) = if requires_grad {
            (vec![0.0; values.len()], Some((op, inputs.to_vec())))
        } else {
            (Vec::new(), None)
        };
        self.nodes.push(Node {
            shape,
            values,
            grad,
            requires_grad,
            parents,
        });
        Tensor(self.nodes.len() - 1)
    }

    /// Dispatch a forward op. Per-op methods below are thin wrappers.
    pub fn apply(&mut self, op: OpKind, inputs: &[Tensor]) -> TensorResult<Tensor> {
        match op {
            OpKind::Matmul => self.expect_arity(&op, inputs, 2).and_then(|_| self.matmul(inputs[0], inputs[1])),
            OpKind::AddBroadcast => self.expect_arity(&op, inputs, 2).and_then(|_| self.add_broadcast(inputs[0], inputs[1])),
            OpKind::Relu => self.expect_arity(&op, inputs, 1).map(|_| self.relu(inputs[0])),
            OpKind::LeakyRelu(slope) => self.expect_arity(&op, inputs, 1).map(|_| self.leaky_relu(inputs[0], slope)),
            OpKind::Sigmoid => self.expect_arity(&op, inputs, 1).map(|_| self.sigmoid(inputs[0])),
            OpKind::Tanh => self.expect_arity(&op, inputs, 1).map(|_| self.tanh(inputs[0])),
            OpKind::Square => self.expect_arity(&op, inputs, 1).map(|_| self.square(inputs[0])),
            OpKind::Sum => self.expect_arity(&op, inputs, 1).map(|_| self.sum(inputs[0])),
            OpKind::Mean => self.expect_arity(&op, inputs, 1).map(|_| self.mean(inputs[0])),
            OpKind::MaxWithScalar(s) => self.expect_arity(&op, inputs, 1).map(|_| self.max_with_scalar(inputs[0], s)),
            OpKind::Log => self.expect_arity(&op, inputs, 1).map(|_| self.log(inputs[0])),
            OpKind::Sub => self.expect_arity(&op, inputs, 2).and_then(|_| self.sub(inputs[0], inputs[1])),
            OpKind::Mul => self.expect_arity(&op, inputs, 2).and_then(|_| self.mul(inputs[0], inputs[1])),
            OpKind::MulScalar(s) => self.expect_arity(&op, inputs, 1).map(|_| self.mul_scalar(inputs[0], s)),
            OpKind::DivScalar(s) => self.expect_arity(&op, inputs, 1).and_then(|_| self.div_scalar(inputs[0], s)),
            OpKind::Recip => self.expect_arity(&op, inputs, 1).map(|_| self.recip(inputs[0])),
            OpKind::Exp => self.expect_arity(&op, inputs, 1).map(|_| self.exp(inputs[0])),
            OpKind::Abs => self.expect_arity(&op, inputs, 1).map(|_| self.abs(inputs[0])),
            OpKind::ConcatRows => self.concat_rows(inputs),
            OpKind::SliceRows { start, end } => self.expect_arity(&op, inputs, 1).and_then(|_| self.slice_rows(inputs[0], start, end)),
            OpKind::Reshape(shape) => self.expect_arity(&OpKind::Reshape(shape.clone()), inputs, 1).and_then(|_| self.reshape(inputs[0], &shape)),
        }
    }

    fn expect_arity(&self, op: &OpKind, inputs: &[Tensor], n: usize) -> TensorResult<()> {
        if inputs.len() != n {
            return Err(TensorError::ShapeMismatch {
                op: op.name(),
                shapes: inputs.iter().map(|t| self.shape(*t).to_vec()).collect(),
            });
        }
        Ok(())
    }

    /// Matrix product of rank-2 tensors [m,k] x [k,n] -> [m,n].
    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> TensorResult<Tensor> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                shapes: vec![sa, sb],
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let values = kernels::mm_nn(self.values(a), self.values(b), m, k, n);
        Ok(self.push_op(OpKind::Matmul, &[a, b], vec![m, n], values))
    }

    /// Elementwise add; `b` may equal `a`'s shape, or be a length-n row
    /// vector ([n] or [1,n]) broadcast over the rows of a rank-2 `a`.
    pub fn add_broadcast(&mut self, a: Tensor, b: Tensor) -> TensorResult<Tensor> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let out_shape = sa.clone();
        let av = self.values(a);
        let bv = self.values(b);
        let values = if sa == sb {
            av.iter().zip(bv).map(|(x, y)| x + y).collect()
        } else if sa.len() == 2 && bv.len() == sa[1] {
            let (rows, cols) = (sa[0], sa[1]);
            let mut out = Vec::with_capacity(rows * cols);
            for i in 0..rows {
                for j in 0..cols {
                    out.push(av[i * cols + j] + bv[j]);
                }
            }
            out
        } else {
            return Err(TensorError::ShapeMismatch {
                op: "add_broadcast",
                shapes: vec![sa, sb],
            });
        };
        Ok(self.push_op(OpKind::AddBroadcast, &[a, b], out_shape, values))
    }

    /// Elementwise subtraction of same-shape tensors.
    pub fn sub(&mut self, a: Tensor, b: Tensor) -> TensorResult<Tensor> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                op: "sub",
                shapes: vec![sa, sb],
            });
        }
        let values = self
            .values(a)
            .iter()
            .zip(self.values(b))
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push_op(OpKind::Sub, &[a, b], sa, values))
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&mut self, a: Tensor, b: Tensor) -> TensorResult<Tensor> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                shapes: vec![sa, sb],
            });
        }
        let values = self
            .values(a)
            .iter()
            .zip(self.values(b))
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push_op(OpKind::Mul, &[a, b], sa, values))
    }

    fn unary(&mut self, op: OpKind, x: Tensor, f: impl Fn(f64) -> f64) -> Tensor {
        let shape = self.shape(x).to_vec();
        let values = self.values(x).iter().map(|&v| f(v)).collect();
        self.push_op(op, &[x], shape, values)
    }

    pub fn relu(&mut self, x: Tensor) -> Tensor {
        self.unary(OpKind::Relu, x, |v| v.max(0.0))
    }

    pub fn leaky_relu(&mut self, x: Tensor, slope: f64) -> Tensor {
        self.unary(OpKind::LeakyRelu(slope), x, |v| if v > 0.0 { v } else { slope * v })
    }

    pub fn sigmoid(&mut self, x: Tensor) -> Tensor {
        self.unary(OpKind::Sigmoid, x, |v| 1.0 / (1.0 + (-v).exp()))
    }

    pub fn tanh(&mut self, x: Tensor) -> Tensor {
        self.unary(OpKind::Tanh, x, f64::tanh)
    }

    pub fn square(&mut self, x: Tensor) -> Tensor {
        self.unary(OpKind::Square, x, |v| v * v)
    }

    pub fn max_with_scalar(&mut self, x: Tensor, s: f64) -> Tensor {
        self.unary(OpKind::MaxWithScalar(s), x, |v| v.max(s))
    }

    /// Natural log; inputs must be strictly positive by precondition.
    pub fn log(&mut self, x: Tensor) -> Tensor {
        self.unary(OpKind::Log, x, f64::ln)
    }

    pub fn mul_scalar(&mut self, x: Tensor, s: f64) -> Tensor {
        self.unary(OpKind::MulScalar(s), x, |v| v * s)
    }

    pub fn div_scalar(&mut self, x: Tensor, s: f64) -> TensorResult<Tensor> {
        if s == 0.0 || !s.is_finite() {
            return Err(TensorError::InvalidScalar {
                op: "div_scalar",
                value: s,
            });
        }
        Ok(self.unary(OpKind::DivScalar(s), x, |v| v / s))
    }

    /// Elementwise reciprocal; inputs must be nonzero by precondition.
    pub fn recip(&mut self, x: Tensor) -> Tensor {
        self.unary(OpKind::Recip, x, |v| 1.0 / v)
    }

    pub fn exp(&mut self, x: Tensor) -> Tensor {
        self.unary(OpKind::Exp, x, f64::exp)
    }

    pub fn abs(&mut self, x: Tensor) -> Tensor {
        self.unary(OpKind::Abs, x, f64::abs)
    }

    /// Sum of all elements; result has shape [1].
    pub fn sum(&mut self, x: Tensor) -> Tensor {
        let mut acc = 0.0;
        for &v in self.values(x) {
            acc += v;
        }
        self.push_op(OpKind::Sum, &[x], vec![1], vec![acc])
    }

    /// Mean of all elements; result has shape [1].
    pub fn mean(&mut self, x: Tensor) -> Tensor {
        let n = self.values(x).len() as f64;
        let mut acc = 0.0;
        for &v in self.values(x) {
            acc += v;
        }
        self.push_op(OpKind::Mean, &[x], vec![1], vec![acc / n])
    }

    /// Stack tensors along the row axis. All inputs must share rank and
    /// trailing dimension.
    pub fn concat_rows(&mut self, inputs: &[Tensor]) -> TensorResult<Tensor> {
        let shapes: Vec<Vec<usize>> = inputs.iter().map(|t| self.shape(*t).to_vec()).collect();
        let mismatch = || TensorError::ShapeMismatch {
            op: "concat_rows",
            shapes: shapes.clone(),
        };
        if inputs.is_empty() {
            return Err(mismatch());
        }
        let rank = shapes[0].len();
        if rank == 0 || rank > 2 || shapes.iter().any(|s| s.len() != rank) {
            return Err(mismatch());
        }
        let cols = if rank == 2 { shapes[0][1] } else { 1 };
        if rank == 2 && shapes.iter().any(|s| s[1] != cols) {
            return Err(mismatch());
        }
        let total_rows: usize = shapes.iter().map(|s| s[0]).sum();
        let mut values = Vec::with_capacity(total_rows * cols);
        for t in inputs {
            values.extend_from_slice(self.values(*t));
        }
        let out_shape = if rank == 2 {
            vec![total_rows, cols]
        } else {
            vec![total_rows]
        };
        Ok(self.push_op(OpKind::ConcatRows, inputs, out_shape, values))
    }

    /// Rows [start, end) of a rank-1 or rank-2 tensor.
    pub fn slice_rows(&mut self, x: Tensor, start: usize, end: usize) -> TensorResult<Tensor> {
        let shape = self.shape(x).to_vec();
        let (rows, cols) = self.rows_cols(x);
        if shape.len() > 2 || start >= end || end > rows {
            return Err(TensorError::BadRowRange { start, end, rows });
        }
        let values = self.values(x)[start * cols..end * cols].to_vec();
        let out_shape = if shape.len() == 2 {
            vec![end - start, cols]
        } else {
            vec![end - start]
        };
        Ok(self.push_op(OpKind::SliceRows { start, end }, &[x], out_shape, values))
    }

    /// Same values, new shape; element count must match.
    pub fn reshape(&mut self, x: Tensor, shape: &[usize]) -> TensorResult<Tensor> {
        let expected: usize = shape.iter().product();
        if expected != self.values(x).len() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                shapes: vec![self.shape(x).to_vec(), shape.to_vec()],
            });
        }
        let values = self.values(x).to_vec();
        Ok(self.push_op(OpKind::Reshape(shape.to_vec()), &[x], shape.to_vec(), values))
    }

    /// Reverse sweep accumulating d(root)/d(node) into every grad-tracking
    /// node. Repeated calls without [`Graph::zero_grads`] accumulate.
    pub fn backward(&mut self, root: Tensor) -> TensorResult<()> {
        if self.values(root).len() != 1 {
            return Err(TensorError::NonScalarRoot {
                shape: self.shape(root).to_vec(),
            });
        }
        if !self.nodes[root.0].requires_grad {
            return Err(TensorError::NoGradRoot);
        }
        let mut adjoints: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        adjoints[root.0] = Some(vec![1.0]);

        for id in (0..=root.0).rev() {
            let adj = match adjoints[id].take() {
                Some(a) => a,
                None => continue,
            };
            if self.nodes[id].requires_grad {
                for (g, a) in self.nodes[id].grad.iter_mut().zip(&adj) {
                    *g += a;
                }
            }
            let (op, inputs) = match &self.nodes[id].parents {
                Some((op, inputs)) => (op.clone(), inputs.clone()),
                None => continue,
            };
            self.propagate(id, &op, &inputs, &adj, &mut adjoints);
        }
        Ok(())
    }

    fn adjoint_of<'a>(
        &self,
        adjoints: &'a mut [Option<Vec<f64>>],
        t: Tensor,
    ) -> Option<&'a mut Vec<f64>> {
        if !self.nodes[t.0].requires_grad {
            return None;
        }
        let len = self.nodes[t.0].values.len();
        Some(adjoints[t.0].get_or_insert_with(|| vec![0.0; len]))
    }

    fn propagate(
        &self,
        out_id: usize,
        op: &OpKind,
        inputs: &[Tensor],
        adj: &[f64],
        adjoints: &mut [Option<Vec<f64>>],
    ) {
        let out = &self.nodes[out_id];
        match op {
            OpKind::Matmul => {
                let (a, b) = (inputs[0], inputs[1]);
                let (m, k) = {
                    let s = self.shape(a);
                    (s[0], s[1])
                };
                let n = self.shape(b)[1];
                if let Some(da) = self.adjoint_of(adjoints, a) {
                    kernels::mm_nt_acc(adj, self.values(b), m, n, k, da);
                }
                if let Some(db) = self.adjoint_of(adjoints, b) {
                    kernels::mm_tn_acc(self.values(a), adj, m, k, n, db);
                }
            }
            OpKind::AddBroadcast => {
                let (a, b) = (inputs[0], inputs[1]);
                if let Some(da) = self.adjoint_of(adjoints, a) {
                    for (g, &v) in da.iter_mut().zip(adj) {
                        *g += v;
                    }
                }
                let b_len = self.values(b).len();
                if let Some(db) = self.adjoint_of(adjoints, b) {
                    if b_len == adj.len() {
                        for (g, &v) in db.iter_mut().zip(adj) {
                            *g += v;
                        }
                    } else {
                        // row-vector bias: column sums in ascending row order
                        let cols = b_len;
                        for (i, &v) in adj.iter().enumerate() {
                            db[i % cols] += v;
                        }
                    }
                }
            }
            OpKind::Sub => {
                if let Some(da) = self.adjoint_of(adjoints, inputs[0]) {
                    for (g, &v) in da.iter_mut().zip(adj) {
                        *g += v;
                    }
                }
                if let Some(db) = self.adjoint_of(adjoints, inputs[1]) {
                    for (g, &v) in db.iter_mut().zip(adj) {
                        *g -= v;
                    }
                }
            }
            OpKind::Mul => {
                let (a, b) = (inputs[0], inputs[1]);
                let av = self.values(a);
                let bv = self.values(b);
                if let Some(da) = self.adjoint_of(adjoints, a) {
                    for i in 0..adj.len() {
                        da[i] += adj[i] * bv[i];
                    }
                }
                if let Some(db) = self.adjoint_of(adjoints, b) {
                    for i in 0..adj.len() {
                        db[i] += adj[i] * av[i];
                    }
                }
            }
            OpKind::Relu => {
                let xv = self.values(inputs[0]);
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for i in 0..adj.len() {
                        if xv[i] > 0.0 {
                            dx[i] += adj[i];
                        }
                    }
                }
            }
            OpKind::LeakyRelu(slope) => {
                let xv = self.values(inputs[0]);
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for i in 0..adj.len() {
                        dx[i] += adj[i] * if xv[i] > 0.0 { 1.0 } else { *slope };
                    }
                }
            }
            OpKind::Sigmoid => {
                let yv = &out.values;
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for i in 0..adj.len() {
                        dx[i] += adj[i] * yv[i] * (1.0 - yv[i]);
                    }
                }
            }
            OpKind::Tanh => {
                let yv = &out.values;
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for i in 0..adj.len() {
                        dx[i] += adj[i] * (1.0 - yv[i] * yv[i]);
                    }
                }
            }
            OpKind::Square => {
                let xv = self.values(inputs[0]);
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for i in 0..adj.len() {
                        dx[i] += adj[i] * 2.0 * xv[i];
                    }
                }
            }
            OpKind::MaxWithScalar(s) => {
                let xv = self.values(inputs[0]);
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for i in 0..adj.len() {
                        if xv[i] > *s {
                            dx[i] += adj[i];
                        }
                    }
                }
            }
            OpKind::Log => {
                let xv = self.values(inputs[0]);
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for i in 0..adj.len() {
                        dx[i] += adj[i] / xv[i];
                    }
                }
            }
            OpKind::MulScalar(s) => {
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for i in 0..adj.len() {
                        dx[i] += adj[i] * s;
                    }
                }
            }
            OpKind::DivScalar(s) => {
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for i in 0..adj.len() {
                        dx[i] += adj[i] / s;
                    }
                }
            }
            OpKind::Recip => {
                let yv = &out.values;
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for i in 0..adj.len() {
                        dx[i] -= adj[i] * yv[i] * yv[i];
                    }
                }
            }
            OpKind::Exp => {
                let yv = &out.values;
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for i in 0..adj.len() {
                        dx[i] += adj[i] * yv[i];
                    }
                }
            }
            OpKind::Abs => {
                let xv = self.values(inputs[0]);
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for i in 0..adj.len() {
                        let sign = if xv[i] > 0.0 {
                            1.0
                        } else if xv[i] < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        dx[i] += adj[i] * sign;
                    }
                }
            }
            OpKind::Sum => {
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for g in dx.iter_mut() {
                        *g += adj[0];
                    }
                }
            }
            OpKind::Mean => {
                let n = self.values(inputs[0]).len() as f64;
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for g in dx.iter_mut() {
                        *g += adj[0] / n;
                    }
                }
            }
            OpKind::ConcatRows => {
                let mut offset = 0;
                for t in inputs {
                    let len = self.values(*t).len();
                    if let Some(dt) = self.adjoint_of(adjoints, *t) {
                        for i in 0..len {
                            dt[i] += adj[offset + i];
                        }
                    }
                    offset += len;
                }
            }
            OpKind::SliceRows { start, .. } => {
                let (_, cols) = self.rows_cols(inputs[0]);
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    let base = start * cols;
                    for (i, &v) in adj.iter().enumerate() {
                        dx[base + i] += v;
                    }
                }
            }
            OpKind::Reshape(_) => {
                if let Some(dx) = self.adjoint_of(adjoints, inputs[0]) {
                    for (g, &v) in dx.iter_mut().zip(adj) {
                        *g += v;
                    }
                }
            }
        }
    }
}
