//! Define-by-run computation tape with reverse-mode differentiation.
//!
//! Every operation appends a node holding its output value and whatever it
//! needs for the backward pass. Nodes only reference earlier nodes, so the
//! tape is topologically ordered by construction and a single reverse sweep
//! computes all gradients.

use super::tensor::{check_shape, log_softmax, sigmoid, softmax, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
        m: usize,
        k: usize,
        n: usize,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Activation(Var, Activation),
    Softmax(Var),
    LogSoftmax(Var),
    Pick(Var, usize),
    Slice {
        a: Var,
        start: usize,
    },
    GatherRow {
        table: Var,
        row: usize,
    },
    Concat {
        parts: Vec<Var>,
        outer: usize,
        inners: Vec<usize>,
    },
    Reshape(Var),
    LstmCell {
        x: Var,
        h: Var,
        c: Var,
        w_input: Var,
        w_hidden: Var,
        bias: Var,
        /// Activated gates (input, forget, cell, output), `4H` values.
        gates: Vec<f64>,
    },
}

impl Op {
    fn id(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul { .. } => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Sum(_) => "sum",
            Op::Activation(..) => "activation",
            Op::Softmax(_) => "softmax",
            Op::LogSoftmax(_) => "log_softmax",
            Op::Pick(..) => "pick",
            Op::Slice { .. } => "slice",
            Op::GatherRow { .. } => "gather_row",
            Op::Concat { .. } => "concat",
            Op::Reshape(_) => "reshape",
            Op::LstmCell { .. } => "lstm_cell",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    shape: Vec<usize>,
    op: Op,
    requires_grad: bool,
}

/// The computation tape. One tape per sample; discard after `backward`.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    lens: Vec<usize>,
}

impl Gradients {
    /// Gradient with respect to `var`; zeros when `var` was not reached.
    pub fn wrt(&self, var: Var) -> Vec<f64> {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => vec![0.0; self.lens[var.0]],
        }
    }

    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads[var.0].as_deref()
    }
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

    /// Operation ids in recording order.
    pub fn op_ids(&self) -> Vec<&'static str> {
        self.nodes.iter().map(|n| n.op.id()).collect()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor {
            shape: n.shape.clone(),
            data: n.value.clone(),
            requires_grad: false,
            grad: None,
        }
    }

    fn push(&mut self, value: Vec<f64>, shape: Vec<usize>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            value,
            shape,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, shape: Vec<usize>, data: Vec<f64>, requires_grad: bool) -> Result<Var> {
        check_shape(&shape, data.len())?;
        Ok(self.push(data, shape, Op::Leaf, requires_grad))
    }

    /// Records a copy of `t`; gradient tracking follows `t.requires_grad`.
    pub fn input(&mut self, t: &Tensor) -> Var {
        self.push(t.data.clone(), t.shape.clone(), Op::Leaf, t.requires_grad)
    }

    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        self.leaf(shape, data, false)
    }

    pub fn constant_vector(&mut self, data: Vec<f64>) -> Var {
        let n = data.len().max(1);
        let data = if data.is_empty() { vec![0.0] } else { data };
        self.push(data, vec![n], Op::Leaf, false)
    }

    /// Matrix product. A rank-1 left operand is a row vector and a rank-1
    /// right operand is a column vector; the matching output axis is dropped.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let (m, k) = match sa.as_slice() {
            [k] => (1, *k),
            [m, k] => (*m, *k),
            _ => return Err(Error::Shape(format!("matmul lhs must be rank 1 or 2, got {sa:?}"))),
        };
        let (k2, n) = match sb.as_slice() {
            [k] => (*k, 1),
            [k, n] => (*k, *n),
            _ => return Err(Error::Shape(format!("matmul rhs must be rank 1 or 2, got {sb:?}"))),
        };
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dimensions disagree: {sa:?} x {sb:?}"
            )));
        }
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &av[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &x) in arow.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let brow = &bv[p * n..(p + 1) * n];
                for (o, &y) in orow.iter_mut().zip(brow) {
                    *o += x * y;
                }
            }
        }
        let shape = match (sa.len(), sb.len()) {
            (1, 1) => vec![1],
            (1, _) => vec![n],
            (_, 1) => vec![m],
            _ => vec![m, n],
        };
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, shape, Op::MatMul { a, b, m, k, n }, rg))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        self.same_shape(a, b, op.id())?;
        let out = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, shape, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// Sums any number of same-shaped values.
    pub fn add_all(&mut self, parts: &[Var]) -> Result<Var> {
        let (&first, rest) = parts
            .split_first()
            .ok_or_else(|| Error::Shape("add_all of an empty sequence".into()))?;
        rest.iter().try_fold(first, |acc, &p| self.add(acc, p))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.nodes[a.0].value.iter().map(|x| x * s).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a]);
        self.push(out, shape, Op::Scale(a, s), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().sum();
        let rg = self.rg(&[a]);
        self.push(vec![s], vec![1], Op::Sum(a), rg)
    }

    /// Squared L2 norm.
    pub fn sum_squares(&mut self, a: Var) -> Result<Var> {
        let sq = self.mul(a, a)?;
        Ok(self.sum(sq))
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        let out = self.nodes[a.0]
            .value
            .iter()
            .map(|&x| match kind {
                Activation::Sigmoid => sigmoid(x),
                Activation::Tanh => x.tanh(),
            })
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a]);
        self.push(out, shape, Op::Activation(a, kind), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Tanh)
    }

    fn require_vector(&self, a: Var, what: &str) -> Result<()> {
        if self.shape(a).len() != 1 {
            return Err(Error::Shape(format!(
                "{what} expects a rank-1 input, got {:?}",
                self.shape(a)
            )));
        }
        Ok(())
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.require_vector(a, "softmax")?;
        let out = softmax(&self.nodes[a.0].value);
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a]);
        Ok(self.push(out, shape, Op::Softmax(a), rg))
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        self.require_vector(a, "log_softmax")?;
        let out = log_softmax(&self.nodes[a.0].value);
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a]);
        Ok(self.push(out, shape, Op::LogSoftmax(a), rg))
    }

    /// Selects one element as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        let len = self.nodes[a.0].value.len();
        if index >= len {
            return Err(Error::Index {
                what: "pick",
                index,
                len,
            });
        }
        let v = self.nodes[a.0].value[index];
        let rg = self.rg(&[a]);
        Ok(self.push(vec![v], vec![1], Op::Pick(a, index), rg))
    }

    /// Contiguous range of the flattened value, as a rank-1 result.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let total = self.nodes[a.0].value.len();
        if len == 0 || start + len > total {
            return Err(Error::Shape(format!(
                "slice [{start}, {}) out of range for length {total}",
                start + len
            )));
        }
        let out = self.nodes[a.0].value[start..start + len].to_vec();
        let rg = self.rg(&[a]);
        Ok(self.push(out, vec![len], Op::Slice { a, start }, rg))
    }

    /// Row `row` of a rank-2 table.
    pub fn gather_row(&mut self, table: Var, row: usize) -> Result<Var> {
        let shape = self.shape(table).to_vec();
        if shape.len() != 2 {
            return Err(Error::Shape(format!("gather_row needs a matrix, got {shape:?}")));
        }
        if row >= shape[0] {
            return Err(Error::Index {
                what: "table rows",
                index: row,
                len: shape[0],
            });
        }
        let c = shape[1];
        let out = self.nodes[table.0].value[row * c..(row + 1) * c].to_vec();
        let rg = self.rg(&[table]);
        Ok(self.push(out, vec![c], Op::GatherRow { table, row }, rg))
    }

    /// Concatenation along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Shape("concat of an empty sequence".into()))?;
        if parts.len() == 1 {
            return Ok(first);
        }
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(Error::Shape(format!("concat axis {axis} out of range for {base:?}")));
        }
        let mut axis_total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(Error::Shape(format!(
                    "concat along axis {axis}: {base:?} incompatible with {s:?}"
                )));
            }
            axis_total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let tail: usize = base[axis + 1..].iter().product();
        let inners: Vec<usize> = parts.iter().map(|&p| self.shape(p)[axis] * tail).collect();
        let mut out = Vec::with_capacity(outer * inners.iter().sum::<usize>());
        for o in 0..outer {
            for (&p, &inner) in parts.iter().zip(&inners) {
                out.extend_from_slice(&self.nodes[p.0].value[o * inner..(o + 1) * inner]);
            }
        }
        let mut shape = base;
        shape[axis] = axis_total;
        let rg = self.rg(parts);
        Ok(self.push(
            out,
            shape,
            Op::Concat {
                parts: parts.to_vec(),
                outer,
                inners,
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        check_shape(&shape, self.nodes[a.0].value.len())?;
        let out = self.nodes[a.0].value.clone();
        let rg = self.rg(&[a]);
        Ok(self.push(out, shape, Op::Reshape(a), rg))
    }

    /// Fused LSTM step. Returns a `2H` vector holding `h ⊕ c`.
    ///
    /// Weight rows are laid out as four `H`-row gate blocks in the order
    /// input, forget, cell candidate, output.
    #[allow(clippy::too_many_arguments)]
    pub fn lstm_cell(
        &mut self,
        x: Var,
        h: Var,
        c: Var,
        w_input: Var,
        w_hidden: Var,
        bias: Var,
    ) -> Result<Var> {
        let hs = self.shape(h).to_vec();
        let hidden = match hs.as_slice() {
            [n] => *n,
            _ => return Err(Error::Shape(format!("lstm hidden state must be rank 1, got {hs:?}"))),
        };
        let d_in = self.nodes[x.0].value.len();
        let expect = |got: &[usize], want: &[usize], what: &str| -> Result<()> {
            if got != want {
                return Err(Error::Shape(format!("lstm {what}: expected {want:?}, got {got:?}")));
            }
            Ok(())
        };
        expect(self.shape(x), &[d_in], "input")?;
        expect(self.shape(c), &[hidden], "cell state")?;
        expect(self.shape(w_input), &[4 * hidden, d_in], "input weights")?;
        expect(self.shape(w_hidden), &[4 * hidden, hidden], "hidden weights")?;
        expect(self.shape(bias), &[4 * hidden], "bias")?;

        let xv = &self.nodes[x.0].value;
        let hv = &self.nodes[h.0].value;
        let cv = &self.nodes[c.0].value;
        let wi = &self.nodes[w_input.0].value;
        let wh = &self.nodes[w_hidden.0].value;
        let bv = &self.nodes[bias.0].value;
        let mut gates = vec![0.0; 4 * hidden];
        for (r, g) in gates.iter_mut().enumerate() {
            let z = bv[r]
                + super::tensor::dot(&wi[r * d_in..(r + 1) * d_in], xv)
                + super::tensor::dot(&wh[r * hidden..(r + 1) * hidden], hv);
            *g = if (2 * hidden..3 * hidden).contains(&r) {
                z.tanh()
            } else {
                sigmoid(z)
            };
        }
        let mut out = vec![0.0; 2 * hidden];
        for j in 0..hidden {
            let (i, f, g, o) = (
                gates[j],
                gates[hidden + j],
                gates[2 * hidden + j],
                gates[3 * hidden + j],
            );
            let c_new = f * cv[j] + i * g;
            out[j] = o * c_new.tanh();
            out[hidden + j] = c_new;
        }
        let rg = self.rg(&[x, h, c, w_input, w_hidden, bias]);
        Ok(self.push(
            out,
            vec![2 * hidden],
            Op::LstmCell {
                x,
                h,
                c,
                w_input,
                w_hidden,
                bias,
                gates,
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`. Consumes the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::Tape("tape already consumed"));
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Tape("loss is not a scalar"));
        }
        self.consumed = true;
        let nodes = &self.nodes;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
                continue;
            }
            let mut acc = Accumulator {
                nodes,
                grads: &mut grads,
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul { a, b, m, k, n } => {
                    let (m, k, n) = (*m, *k, *n);
                    let bv = &nodes[b.0].value;
                    let av = &nodes[a.0].value;
                    acc.with(*a, |da| {
                        for i in 0..m {
                            let gi = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                da[i * k + p] += super::tensor::dot(gi, &bv[p * n..(p + 1) * n]);
                            }
                        }
                    });
                    acc.with(*b, |db| {
                        for i in 0..m {
                            let gi = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let x = av[i * k + p];
                                if x == 0.0 {
                                    continue;
                                }
                                for (d, &gv) in db[p * n..(p + 1) * n].iter_mut().zip(gi) {
                                    *d += x * gv;
                                }
                            }
                        }
                    });
                }
                Op::Add(a, b) => {
                    acc.add(*a, &g);
                    acc.add(*b, &g);
                }
                Op::Sub(a, b) => {
                    acc.add(*a, &g);
                    acc.with(*b, |d| d.iter_mut().zip(&g).for_each(|(x, y)| *x -= y));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                    acc.with(*a, |d| {
                        for ((x, gv), y) in d.iter_mut().zip(&g).zip(bv) {
                            *x += gv * y;
                        }
                    });
                    acc.with(*b, |d| {
                        for ((x, gv), y) in d.iter_mut().zip(&g).zip(av) {
                            *x += gv * y;
                        }
                    });
                }
                Op::Scale(a, s) => {
                    acc.with(*a, |d| d.iter_mut().zip(&g).for_each(|(x, y)| *x += s * y));
                }
                Op::Sum(a) => {
                    acc.with(*a, |d| d.iter_mut().for_each(|x| *x += g[0]));
                }
                Op::Activation(a, kind) => {
                    let y = &node.value;
                    acc.with(*a, |d| {
                        for ((x, gv), yv) in d.iter_mut().zip(&g).zip(y) {
                            *x += gv
                                * match kind {
                                    Activation::Sigmoid => yv * (1.0 - yv),
                                    Activation::Tanh => 1.0 - yv * yv,
                                };
                        }
                    });
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let gy: f64 = super::tensor::dot(&g, y);
                    acc.with(*a, |d| {
                        for ((x, gv), yv) in d.iter_mut().zip(&g).zip(y) {
                            *x += yv * (gv - gy);
                        }
                    });
                }
                Op::LogSoftmax(a) => {
                    let gs: f64 = g.iter().sum();
                    acc.with(*a, |d| {
                        for ((x, gv), yv) in d.iter_mut().zip(&g).zip(&node.value) {
                            *x += gv - yv.exp() * gs;
                        }
                    });
                }
                Op::Pick(a, i) => {
                    acc.with(*a, |d| d[*i] += g[0]);
                }
                Op::Slice { a, start } => {
                    acc.with(*a, |d| {
                        for (x, gv) in d[*start..*start + g.len()].iter_mut().zip(&g) {
                            *x += gv;
                        }
                    });
                }
                Op::GatherRow { table, row } => {
                    let c = g.len();
                    acc.with(*table, |d| {
                        for (x, gv) in d[row * c..(row + 1) * c].iter_mut().zip(&g) {
                            *x += gv;
                        }
                    });
                }
                Op::Concat {
                    parts,
                    outer,
                    inners,
                } => {
                    let row: usize = inners.iter().sum();
                    let mut offset = 0;
                    for (&p, &inner) in parts.iter().zip(inners) {
                        acc.with(p, |d| {
                            for o in 0..*outer {
                                let src = &g[o * row + offset..o * row + offset + inner];
                                for (x, gv) in d[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                                    *x += gv;
                                }
                            }
                        });
                        offset += inner;
                    }
                }
                Op::Reshape(a) => acc.add(*a, &g),
                Op::LstmCell {
                    x,
                    h,
                    c,
                    w_input,
                    w_hidden,
                    bias,
                    gates,
                } => {
                    let hidden = g.len() / 2;
                    let d_in = nodes[x.0].value.len();
                    let c_prev = &nodes[c.0].value;
                    let (dh, dc_out) = g.split_at(hidden);
                    let mut dz = vec![0.0; 4 * hidden];
                    let mut dc_prev = vec![0.0; hidden];
                    for j in 0..hidden {
                        let (i, f, gg, o) = (
                            gates[j],
                            gates[hidden + j],
                            gates[2 * hidden + j],
                            gates[3 * hidden + j],
                        );
                        let tc = node.value[hidden + j].tanh();
                        let dc = dc_out[j] + dh[j] * o * (1.0 - tc * tc);
                        dz[j] = dc * gg * i * (1.0 - i);
                        dz[hidden + j] = dc * c_prev[j] * f * (1.0 - f);
                        dz[2 * hidden + j] = dc * i * (1.0 - gg * gg);
                        dz[3 * hidden + j] = dh[j] * tc * o * (1.0 - o);
                        dc_prev[j] = dc * f;
                    }
                    let xv = &nodes[x.0].value;
                    let hv = &nodes[h.0].value;
                    let wi = &nodes[w_input.0].value;
                    let wh = &nodes[w_hidden.0].value;
                    acc.add(*bias, &dz);
                    acc.add(*c, &dc_prev);
                    acc.with(*w_input, |d| outer_add(d, &dz, xv));
                    acc.with(*w_hidden, |d| outer_add(d, &dz, hv));
                    acc.with(*x, |d| transpose_matvec_add(d, wi, &dz, d_in));
                    acc.with(*h, |d| transpose_matvec_add(d, wh, &dz, hidden));
                }
            }
        }
        Ok(Gradients {
            grads,
            lens: self.nodes.iter().map(|n| n.value.len()).collect(),
        })
    }
}

struct Accumulator<'a> {
    nodes: &'a [Node],
    grads: &'a mut [Option<Vec<f64>>],
}

impl Accumulator<'_> {
    fn with(&mut self, v: Var, f: impl FnOnce(&mut [f64])) {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        let slot = self.grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]);
        f(slot);
    }

    fn add(&mut self, v: Var, delta: &[f64]) {
        self.with(v, |d| d.iter_mut().zip(delta).for_each(|(x, y)| *x += y));
    }
}

/// `d += u ⊗ v` for a row-major `[u.len() × v.len()]` buffer.
fn outer_add(d: &mut [f64], u: &[f64], v: &[f64]) {
    let n = v.len();
    for (r, &ur) in u.iter().enumerate() {
        if ur == 0.0 {
            continue;
        }
        for (x, &vc) in d[r * n..(r + 1) * n].iter_mut().zip(v) {
            *x += ur * vc;
        }
    }
}

/// `d += Wᵀ u` for a row-major `W` with `cols` columns.
fn transpose_matvec_add(d: &mut [f64], w: &[f64], u: &[f64], cols: usize) {
    for (r, &ur) in u.iter().enumerate() {
        if ur == 0.0 {
            continue;
        }
        for (x, &wv) in d.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *x += ur * wv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(t: &mut Tape, rows: usize, cols: usize, data: &[f64]) -> Var {
        t.constant(vec![rows, cols], data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_and_products() {
        let mut t = Tape::new();
        let i2 = mat(&mut t, 2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let a = mat(&mut t, 2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = mat(&mut t, 2, 2, &[5.0, 6.0, 7.0, 8.0]);
        let ia = t.matmul(i2, a).unwrap();
        assert_eq!(t.value(ia), &[1.0, 2.0, 3.0, 4.0]);
        let ab = t.matmul(a, b).unwrap();
        assert_eq!(t.value(ab), &[19.0, 22.0, 43.0, 50.0]);
        assert_eq!(t.shape(ab), &[2, 2]);
        let two = mat(&mut t, 1, 1, &[2.0]);
        let three = mat(&mut t, 1, 1, &[3.0]);
        let six = t.matmul(two, three).unwrap();
        assert_eq!(t.value(six), &[6.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut t = Tape::new();
        let a = mat(&mut t, 2, 3, &[0.0; 6]);
        let b = mat(&mut t, 2, 2, &[0.0; 4]);
        let msg = t.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn concat_last_axis_and_single_part() {
        let mut t = Tape::new();
        let a = mat(&mut t, 1, 2, &[1.0, 2.0]);
        let b = mat(&mut t, 1, 1, &[3.0]);
        let c = t.concat(&[a, b], 1).unwrap();
        assert_eq!(t.value(c), &[1.0, 2.0, 3.0]);
        assert_eq!(t.shape(c), &[1, 3]);
        assert_eq!(t.concat(&[a], 1).unwrap(), a);
        assert!(t.concat(&[], 0).is_err());
        assert!(t.concat(&[a, b], 0).is_err());
    }

    #[test]
    fn concat_embedding_widths() {
        let mut t = Tape::new();
        let l = t.constant(vec![1, 500], vec![0.1; 500]).unwrap();
        let tt = t.constant(vec![1, 10], vec![0.2; 10]).unwrap();
        let c = t.constant(vec![1, 50], vec![0.3; 50]).unwrap();
        let e = t.concat(&[l, tt, c], 1).unwrap();
        assert_eq!(t.shape(e), &[1, 560]);
    }

    #[test]
    fn concat_gradient_splits_back() {
        let mut t = Tape::new();
        let a = t.leaf(vec![2, 1], vec![1.0, 2.0], true).unwrap();
        let b = t.leaf(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0], true).unwrap();
        let c = t.concat(&[a, b], 1).unwrap();
        assert_eq!(t.value(c), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let w = t
            .constant(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
            .unwrap();
        let p = t.mul(c, w).unwrap();
        let s = t.sum(p);
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(a), vec![1.0, 4.0]);
        assert_eq!(g.wrt(b), vec![2.0, 3.0, 5.0, 6.0]);
    }

    #[test]
    fn activations_at_known_points() {
        let mut t = Tape::new();
        let x = t.constant_vector(vec![0.0, 3f64.ln()]);
        let s = t.sigmoid(x);
        assert_eq!(t.value(s)[0], 0.5);
        assert!((t.value(s)[1] - 0.75).abs() < 1e-15);
        let th = t.tanh(x);
        assert_eq!(t.value(th)[0], 0.0);
    }

    #[test]
    fn softmax_examples() {
        let mut t = Tape::new();
        let c = t.constant_vector(vec![2.5; 3]);
        let p = t.softmax(c).unwrap();
        for v in t.value(p) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let big = t.constant_vector(vec![800.0, -800.0]);
        let p = t.softmax(big).unwrap();
        assert!((t.value(p)[0] - 1.0).abs() < 1e-15 && t.value(p)[1] < 1e-300);
        let logs = t.constant_vector(vec![1f64.ln(), 2f64.ln(), 3f64.ln()]);
        let p = t.softmax(logs).unwrap();
        for (v, e) in t.value(p).iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(vec![1], vec![3.0], true).unwrap();
        let y = t.sum_squares(x).unwrap();
        assert_eq!(t.scalar(y), 9.0);
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x), vec![6.0]);
    }

    #[test]
    fn nll_gradient_is_softmax_minus_onehot() {
        let z = vec![0.3, -1.2, 2.0, 0.5];
        let k = 1;
        let mut t = Tape::new();
        let zv = t.leaf(vec![4], z.clone(), true).unwrap();
        let lp = t.log_softmax(zv).unwrap();
        let pk = t.pick(lp, k).unwrap();
        let loss = t.scale(pk, -1.0);
        let g = t.backward(loss).unwrap().wrt(zv);
        let p = softmax(&z);
        for i in 0..4 {
            let expect = p[i] - if i == k { 1.0 } else { 0.0 };
            assert!((g[i] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn backward_errors() {
        let mut t = Tape::new();
        let x = t.leaf(vec![2], vec![1.0, 2.0], true).unwrap();
        assert!(matches!(t.backward(x), Err(Error::Tape(_))));
        let s = t.sum(x);
        t.backward(s).unwrap();
        assert!(matches!(t.backward(s), Err(Error::Tape("tape already consumed"))));
    }

    #[test]
    fn unreached_leaf_gets_zero_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(vec![2], vec![1.0, 2.0], true).unwrap();
        let unused = t.leaf(vec![3], vec![1.0; 3], true).unwrap();
        let s = t.sum(x);
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(unused), vec![0.0; 3]);
        assert!(g.get(unused).is_none());
    }

    #[test]
    fn tape_is_topological() {
        let mut t = Tape::new();
        let x = t.leaf(vec![2], vec![1.0, 2.0], true).unwrap();
        let y = t.tanh(x);
        let z = t.add(x, y).unwrap();
        let s = t.sum(z);
        assert!(x.index() < y.index() && y.index() < z.index() && z.index() < s.index());
        assert_eq!(t.op_ids(), vec!["leaf", "activation", "add", "sum"]);
    }
}
