use super::tensor::gemm;
use super::{Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Const,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulRow(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    LeakyRelu(Var, f64),
    Exp(Var),
    L2Norm(Var),
    RowNorms(Var),
    Sum(Var),
    Mean(Var),
    GatherRows(Var, Vec<usize>),
    BroadcastRows(Var),
    Reshape(Var),
    SqDist(Var, Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Reverse-mode record of tensor operations.
///
/// Nodes are appended in evaluation order, so the node vector is already a
/// topological order and the backward sweep is a single reverse pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros shaped like `v` when `v` is off the loss path.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Tensor {
        match self.get(v) {
            Some(g) => g.clone(),
            None => Tensor::zeros(tape.value(v).shape()),
        }
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = t.data().iter().map(|&v| f(v)).collect();
    Tensor::new(t.shape().to_vec(), data).expect("same shape")
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

fn mat(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
    Tensor::matrix(rows, cols, data).expect("consistent dims")
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

    /// Trainable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Const, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let op = if requires_grad { op } else { Op::Const };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFiniteValue { op: name });
        }
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(value, op, rg))
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> TensorError {
        TensorError::ShapeMismatch {
            op,
            left: self.value(a).shape().to_vec(),
            right: self.value(b).shape().to_vec(),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.rows() {
            return Err(self.mismatch("matmul", a, b));
        }
        let (m, n) = (av.rows(), bv.cols());
        let out = gemm(av.data(), m, av.cols(), false, bv.data(), bv.rows(), n, false);
        self.record("matmul", mat(m, n, out), Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if !self.value(a).same_dims(self.value(b)) {
            return Err(self.mismatch("add", a, b));
        }
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        self.record("add", out, Op::Add(a, b), &[a, b])
    }

    /// `a + bias` where `bias` is a single row added to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(bias));
        if bv.rows() != 1 || bv.cols() != av.cols() {
            return Err(self.mismatch("add_row", a, bias));
        }
        let c = av.cols();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bv.data()[i % c])
            .collect();
        let out = mat(av.rows(), c, data);
        self.record("add_row", out, Op::AddRow(a, bias), &[a, bias])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if !self.value(a).same_dims(self.value(b)) {
            return Err(self.mismatch("sub", a, b));
        }
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        self.record("sub", out, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if !self.value(a).same_dims(self.value(b)) {
            return Err(self.mismatch("mul", a, b));
        }
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        self.record("mul", out, Op::Mul(a, b), &[a, b])
    }

    /// Multiplies every row of `a` elementwise by the single row `r`.
    pub fn mul_row(&mut self, a: Var, r: Var) -> Result<Var, TensorError> {
        let (av, rv) = (self.value(a), self.value(r));
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(self.mismatch("mul_row", a, r));
        }
        let c = av.cols();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x * rv.data()[i % c])
            .collect();
        let out = mat(av.rows(), c, data);
        self.record("mul_row", out, Op::MulRow(a, r), &[a, r])
    }

    /// Multiplies row `i` of `a` by the scalar `c[i]` of the column `c`.
    pub fn mul_col(&mut self, a: Var, c: Var) -> Result<Var, TensorError> {
        let (av, cv) = (self.value(a), self.value(c));
        if cv.cols() != 1 || cv.rows() != av.rows() {
            return Err(self.mismatch("mul_col", a, c));
        }
        let n = av.cols();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x * cv.data()[i / n])
            .collect();
        let out = mat(av.rows(), n, data);
        self.record("mul_col", out, Op::MulCol(a, c), &[a, c])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var, TensorError> {
        let out = map(self.value(a), |x| x * s);
        self.record("scale", out, Op::Scale(a, s), &[a])
    }

    /// Concatenates along columns. Row counts must agree.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let Some(&first) = parts.first() else {
            return Err(TensorError::Empty("concat"));
        };
        let rows = self.value(first).rows();
        for &p in &parts[1..] {
            if self.value(p).rows() != rows {
                return Err(self.mismatch("concat", first, p));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        // 1-d inputs concatenate to a 1-d result.
        let out = if parts.iter().all(|&p| self.value(p).shape().len() == 1) {
            Tensor::vector(data)
        } else {
            mat(rows, total, data)
        };
        self.record("concat", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn leaky_relu(&mut self, a: Var, alpha: f64) -> Result<Var, TensorError> {
        let out = map(self.value(a), |x| if x > 0.0 { x } else { alpha * x });
        self.record("leaky_relu", out, Op::LeakyRelu(a, alpha), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = map(self.value(a), f64::exp);
        self.record("exp", out, Op::Exp(a), &[a])
    }

    /// Euclidean norm over all entries, as a 1×1 tensor.
    pub fn l2_norm(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = Tensor::scalar(self.value(a).norm());
        self.record("l2_norm", out, Op::L2Norm(a), &[a])
    }

    /// Euclidean norm of each row, as an r×1 column.
    pub fn row_norms(&mut self, a: Var) -> Result<Var, TensorError> {
        let av = self.value(a);
        let data: Vec<f64> = (0..av.rows())
            .map(|r| av.row(r).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let out = mat(av.rows(), 1, data);
        self.record("row_norms", out, Op::RowNorms(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = Tensor::scalar(self.value(a).data().iter().sum());
        self.record("sum", out, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, TensorError> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(TensorError::Empty("mean"));
        }
        let out = Tensor::scalar(av.data().iter().sum::<f64>() / av.len() as f64);
        self.record("mean", out, Op::Mean(a), &[a])
    }

    /// Selects rows of `a` by index; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var, TensorError> {
        let av = self.value(a);
        let c = av.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            if i >= av.rows() {
                return Err(TensorError::IndexOutOfRange { index: i, len: av.rows() });
            }
            data.extend_from_slice(av.row(i));
        }
        let out = mat(idx.len(), c, data);
        self.record("gather", out, Op::GatherRows(a, idx.to_vec()), &[a])
    }

    /// Repeats the single row `a` `rows` times.
    pub fn broadcast_rows(&mut self, a: Var, rows: usize) -> Result<Var, TensorError> {
        let av = self.value(a);
        if av.rows() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "broadcast_rows",
                left: av.shape().to_vec(),
                right: vec![rows, av.cols()],
            });
        }
        let data = av.data().repeat(rows);
        let out = mat(rows, av.cols(), data);
        self.record("broadcast_rows", out, Op::BroadcastRows(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let out = self.value(a).clone().reshaped(shape.to_vec())?;
        self.record("reshape", out, Op::Reshape(a), &[a])
    }

    /// Squared Euclidean distances between the rows of `a` (r×k) and the rows
    /// of `b` (m×k), as an r×m matrix.
    pub fn sq_dist(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.cols() {
            return Err(self.mismatch("sq_dist", a, b));
        }
        let (r, m) = (av.rows(), bv.rows());
        let mut data = Vec::with_capacity(r * m);
        for i in 0..r {
            let ai = av.row(i);
            for j in 0..m {
                let d: f64 = ai.iter().zip(bv.row(j)).map(|(x, y)| (x - y) * (x - y)).sum();
                data.push(d);
            }
        }
        self.record("sq_dist", mat(r, m, data), Op::SqDist(a, b), &[a, b])
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        if self.value(loss).len() != 1 {
            return Err(TensorError::NotScalar(self.value(loss).shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::new(self.value(loss).shape().to_vec(), vec![1.0])?);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }

        for (node, g) in self.nodes.iter().zip(&grads) {
            if let (Op::Leaf, Some(g)) = (&node.op, g) {
                if !g.is_finite() {
                    return Err(TensorError::NonFiniteGradient);
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, delta: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => {
                    let shape = self.nodes[v.0].value.shape().to_vec();
                    *slot = Some(delta.reshaped(shape).expect("gradient matches value size"));
                }
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;
        let needs = |v: Var| self.nodes[v.0].requires_grad;

        match &node.op {
            Op::Leaf | Op::Const => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (m, n) = (g.rows(), g.cols());
                if needs(*a) {
                    let da = gemm(g.data(), m, n, false, bv.data(), bv.rows(), bv.cols(), true);
                    acc(*a, mat(av.rows(), av.cols(), da));
                }
                if needs(*b) {
                    let db = gemm(av.data(), av.rows(), av.cols(), true, g.data(), m, n, false);
                    acc(*b, mat(bv.rows(), bv.cols(), db));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRow(a, bias) => {
                acc(*a, g.clone());
                if needs(*bias) {
                    acc(*bias, column_sums(g));
                }
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                if needs(*b) {
                    acc(*b, map(g, |x| -x));
                }
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    acc(*a, zip_map(g, val(*b), |x, y| x * y));
                }
                if needs(*b) {
                    acc(*b, zip_map(g, val(*a), |x, y| x * y));
                }
            }
            Op::MulRow(a, r) => {
                let (av, rv) = (val(*a), val(*r));
                let c = av.cols();
                if needs(*a) {
                    let d = g.data().iter().enumerate().map(|(i, &x)| x * rv.data()[i % c]).collect();
                    acc(*a, mat(av.rows(), c, d));
                }
                if needs(*r) {
                    acc(*r, column_sums(&zip_map(g, av, |x, y| x * y)));
                }
            }
            Op::MulCol(a, cv) => {
                let (av, colv) = (val(*a), val(*cv));
                let n = av.cols();
                if needs(*a) {
                    let d = g.data().iter().enumerate().map(|(i, &x)| x * colv.data()[i / n]).collect();
                    acc(*a, mat(av.rows(), n, d));
                }
                if needs(*cv) {
                    let d = (0..av.rows())
                        .map(|r| g.row(r).iter().zip(av.row(r)).map(|(x, y)| x * y).sum())
                        .collect();
                    acc(*cv, mat(av.rows(), 1, d));
                }
            }
            Op::Scale(a, s) => acc(*a, map(g, |x| x * s)),
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                let total = g.cols();
                for &p in parts {
                    let pc = val(p).cols();
                    if needs(p) {
                        let mut d = Vec::with_capacity(g.rows() * pc);
                        for r in 0..g.rows() {
                            d.extend_from_slice(&g.data()[r * total + offset..r * total + offset + pc]);
                        }
                        acc(p, mat(g.rows(), pc, d));
                    }
                    offset += pc;
                }
            }
            Op::LeakyRelu(a, alpha) => {
                let d = zip_map(g, val(*a), |x, y| if y > 0.0 { x } else { alpha * x });
                acc(*a, d);
            }
            Op::Exp(a) => acc(*a, zip_map(g, &node.value, |x, y| x * y)),
            Op::L2Norm(a) => {
                let n = node.value.item();
                let gs = g.item();
                let d = if n > 0.0 {
                    map(val(*a), |x| gs * x / n)
                } else {
                    Tensor::zeros(val(*a).shape())
                };
                acc(*a, d);
            }
            Op::RowNorms(a) => {
                let av = val(*a);
                let c = av.cols();
                let d = av
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let n = node.value.data()[i / c];
                        if n > 0.0 {
                            g.data()[i / c] * x / n
                        } else {
                            0.0
                        }
                    })
                    .collect();
                acc(*a, mat(av.rows(), c, d));
            }
            Op::Sum(a) => {
                let gs = g.item();
                acc(*a, map(val(*a), |_| gs));
            }
            Op::Mean(a) => {
                let gs = g.item() / val(*a).len() as f64;
                acc(*a, map(val(*a), |_| gs));
            }
            Op::GatherRows(a, idx) => {
                let av = val(*a);
                let c = av.cols();
                let mut d = vec![0.0; av.len()];
                for (r, &i) in idx.iter().enumerate() {
                    for k in 0..c {
                        d[i * c + k] += g.data()[r * c + k];
                    }
                }
                acc(*a, mat(av.rows(), c, d));
            }
            Op::BroadcastRows(a) => acc(*a, column_sums(g)),
            Op::Reshape(a) => acc(*a, g.clone()),
            Op::SqDist(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let k = av.cols();
                let (r, m) = (av.rows(), bv.rows());
                if needs(*a) {
                    let gb = gemm(g.data(), r, m, false, bv.data(), m, k, false);
                    let d = (0..r * k)
                        .map(|idx| {
                            let i = idx / k;
                            let rs: f64 = g.row(i).iter().sum();
                            2.0 * (av.data()[idx] * rs - gb[idx])
                        })
                        .collect();
                    acc(*a, mat(r, k, d));
                }
                if needs(*b) {
                    let ga = gemm(g.data(), r, m, true, av.data(), r, k, false);
                    let cs = column_sums(g);
                    let d = (0..m * k)
                        .map(|idx| {
                            let j = idx / k;
                            -2.0 * (ga[idx] - bv.data()[idx] * cs.data()[j])
                        })
                        .collect();
                    acc(*b, mat(m, k, d));
                }
            }
        }
    }
}

fn column_sums(g: &Tensor) -> Tensor {
    let c = g.cols();
    let mut out = vec![0.0; c];
    for r in 0..g.rows() {
        for (o, x) in out.iter_mut().zip(g.row(r)) {
            *o += x;
        }
    }
    mat(1, c, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let sq = t.mul(x, x).unwrap();
        let loss = t.sum(sq).unwrap();
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn l2_norm_value_and_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![3.0, 4.0]));
        let n = t.l2_norm(x).unwrap();
        assert_eq!(t.value(n).item(), 5.0);
        let g = t.backward(n).unwrap();
        let gx = g.get(x).unwrap().data();
        assert!((gx[0] - 0.6).abs() < 1e-15 && (gx[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn leaky_relu_definition() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![-1.0, 2.0]));
        let y = t.leaky_relu(x, 0.02).unwrap();
        assert_eq!(t.value(y).data(), &[-0.02, 2.0]);
    }

    #[test]
    fn concat_of_vectors_is_vector() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::vector(vec![1.0, 2.0]));
        let b = t.constant(Tensor::vector(vec![3.0, 4.0, 5.0]));
        let c = t.concat_cols(&[a, b]).unwrap();
        assert_eq!(t.value(c).shape(), &[5]);
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0]));
        let unused = t.leaf(Tensor::vector(vec![7.0]));
        let loss = t.sum(x).unwrap();
        let g = t.backward(loss).unwrap();
        assert!(g.get(unused).is_none());
        assert_eq!(g.wrt(&t, unused).data(), &[0.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(&[2, 3]));
        let b = t.constant(Tensor::zeros(&[2, 3]));
        assert!(matches!(t.matmul(a, b), Err(TensorError::ShapeMismatch { .. })));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::vector(vec![800.0]));
        assert!(matches!(t.exp(a), Err(TensorError::NonFiniteValue { .. })));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(t.backward(a), Err(TensorError::NotScalar(_))));
    }
}
