//! Dynamic computation graph with reverse-mode differentiation.
//!
//! A [`Graph`] is built fresh for every training example. Nodes are appended
//! in evaluation order, so the node list is already a topological order and
//! [`Graph::backward`] is a single reverse sweep.
//!
//! Parameters enter the graph through [`Graph::param`], which copies the
//! current values out of a [`ParamStore`]. After `backward`, the gradients of
//! those leaves are pushed back with [`Graph::accumulate_param_grads`].

use crate::error::{Error, Result};
use crate::nn::tensor::{ParamId, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    MatVec { w: NodeId, x: NodeId },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(Vec<NodeId>),
    Row { m: NodeId, index: usize },
    Sum(NodeId),
    Dot(NodeId, NodeId),
    AddN(Vec<NodeId>),
    SoftmaxCrossEntropy { logits: NodeId, target: usize },
}

#[derive(Debug, Clone)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
    // softmax probabilities for the cross-entropy node
    aux: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Vec<f64>>,
    param_nodes: Vec<Option<NodeId>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, requires_grad: bool) -> NodeId {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
            aux: Vec::new(),
        });
        id
    }

    fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[0]
    }

    /// Gradient of the last `backward` root with respect to `id`, if any
    /// gradient reached it.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.grads
            .get(id.0)
            .filter(|g| !g.is_empty())
            .map(Vec::as_slice)
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, t: &Tensor) -> NodeId {
        self.push(t.shape().to_vec(), t.values().to_vec(), Op::Leaf, t.requires_grad())
    }

    pub fn vector(&mut self, values: Vec<f64>) -> NodeId {
        self.push(vec![values.len()], values, Op::Leaf, false)
    }

    /// Differentiable leaf holding a parameter's current values. Repeated
    /// calls for the same parameter return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(Some(n)) = self.param_nodes.get(id.index()) {
            return *n;
        }
        let t = store.get(id);
        let n = self.push(t.shape().to_vec(), t.values().to_vec(), Op::Param, true);
        if self.param_nodes.len() <= id.index() {
            self.param_nodes.resize(id.index() + 1, None);
        }
        self.param_nodes[id.index()] = Some(n);
        n
    }

    fn expect_vector(&self, op: &'static str, operand: &'static str, id: NodeId) -> Result<usize> {
        let s = &self.node(id).shape;
        if s.len() != 1 {
            return Err(Error::Shape {
                op,
                operand,
                expected: vec![0],
                found: s.clone(),
            });
        }
        Ok(s[0])
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (&self.node(a).shape, &self.node(b).shape);
        if sa != sb {
            return Err(Error::Shape {
                op,
                operand: "rhs",
                expected: sa.clone(),
                found: sb.clone(),
            });
        }
        Ok(())
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|i| self.node(*i).requires_grad)
    }

    /// `w · x` for `w` of shape `[m, n]` and `x` of shape `[n]`.
    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let ws = self.node(w).shape.clone();
        if ws.len() != 2 {
            return Err(Error::Shape {
                op: "matvec",
                operand: "w",
                expected: vec![0, 0],
                found: ws,
            });
        }
        let n = self.expect_vector("matvec", "x", x)?;
        let (rows, cols) = (ws[0], ws[1]);
        if n != cols {
            return Err(Error::Shape {
                op: "matvec",
                operand: "x",
                expected: vec![cols],
                found: vec![n],
            });
        }
        let wv = &self.node(w).value;
        let xv = &self.node(x).value;
        let out: Vec<f64> = wv
            .chunks_exact(cols)
            .map(|row| row.iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        let rg = self.rg(&[w, x]);
        Ok(self.push(vec![rows], out, Op::MatVec { w, x }, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let v = self.node(a).value.iter().zip(&self.node(b).value).map(|(x, y)| x + y).collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(self.node(a).shape.clone(), v, Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let v = self.node(a).value.iter().zip(&self.node(b).value).map(|(x, y)| x * y).collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(self.node(a).shape.clone(), v, Op::Mul(a, b), rg))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.node(a).value.iter().map(|&x| sigmoid(x)).collect();
        let rg = self.rg(&[a]);
        self.push(self.node(a).shape.clone(), v, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.node(a).value.iter().map(|x| x.tanh()).collect();
        let rg = self.rg(&[a]);
        self.push(self.node(a).shape.clone(), v, Op::Tanh(a), rg)
    }

    /// Concatenation of vectors.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::invalid("concat", "no operands"));
        }
        let mut v = Vec::new();
        for &p in parts {
            self.expect_vector("concat", "part", p)?;
            v.extend_from_slice(&self.node(p).value);
        }
        let rg = self.rg(parts);
        Ok(self.push(vec![v.len()], v, Op::Concat(parts.to_vec()), rg))
    }

    /// Row `index` of a matrix, as a vector.
    pub fn row(&mut self, m: NodeId, index: usize) -> Result<NodeId> {
        let s = self.node(m).shape.clone();
        if s.len() != 2 || index >= s[0] {
            return Err(Error::invalid(
                "row",
                format!("row {index} out of range for shape {s:?}"),
            ));
        }
        let cols = s[1];
        let v = self.node(m).value[index * cols..(index + 1) * cols].to_vec();
        let rg = self.rg(&[m]);
        Ok(self.push(vec![cols], v, Op::Row { m, index }, rg))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.node(a).value.iter().sum();
        let rg = self.rg(&[a]);
        self.push(vec![1], vec![s], Op::Sum(a), rg)
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("dot", a, b)?;
        let s = self.node(a).value.iter().zip(&self.node(b).value).map(|(x, y)| x * y).sum();
        let rg = self.rg(&[a, b]);
        Ok(self.push(vec![1], vec![s], Op::Dot(a, b), rg))
    }

    /// Elementwise sum of same-shaped nodes.
    pub fn add_n(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::invalid("add_n", "no operands"))?;
        let mut v = self.node(first).value.clone();
        for &p in &parts[1..] {
            self.same_shape("add_n", first, p)?;
            for (a, b) in v.iter_mut().zip(&self.node(p).value) {
                *a += b;
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(self.node(first).shape.clone(), v, Op::AddN(parts.to_vec()), rg))
    }

    /// `-log softmax(logits)[target]`, stabilized by subtracting the max logit.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId> {
        let k = self.expect_vector("softmax_cross_entropy", "logits", logits)?;
        if target >= k {
            return Err(Error::invalid(
                "softmax_cross_entropy",
                format!("target {target} out of range for {k} classes"),
            ));
        }
        let (loss, probs) = softmax_ce(&self.node(logits).value, target);
        let rg = self.rg(&[logits]);
        let id = self.push(vec![1], vec![loss], Op::SoftmaxCrossEntropy { logits, target }, rg);
        self.nodes[id.0].aux = probs;
        Ok(id)
    }

    /// Reverse sweep from a scalar root. Gradients are then available via
    /// [`Graph::grad`] and [`Graph::accumulate_param_grads`].
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        let shape = &self.node(root).shape;
        if shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarRoot(shape.clone()));
        }
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); self.nodes.len()];
        grads[root.0] = vec![1.0];

        for i in (0..=root.0).rev() {
            if grads[i].is_empty() || !self.nodes[i].requires_grad {
                continue;
            }
            let g = std::mem::take(&mut grads[i]);
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf | Op::Param => {}
                Op::MatVec { w, x } => {
                    let cols = self.nodes[w.0].shape[1];
                    let xv = &self.nodes[x.0].value;
                    if self.nodes[w.0].requires_grad {
                        let gw = grad_buf(&mut grads, *w, self.nodes[w.0].value.len());
                        for (r, gi) in g.iter().enumerate() {
                            if *gi == 0.0 {
                                continue;
                            }
                            let row = &mut gw[r * cols..(r + 1) * cols];
                            for (a, b) in row.iter_mut().zip(xv) {
                                *a += gi * b;
                            }
                        }
                    }
                    if self.nodes[x.0].requires_grad {
                        let wv = &self.nodes[w.0].value;
                        let gx = grad_buf(&mut grads, *x, cols);
                        for (r, gi) in g.iter().enumerate() {
                            if *gi == 0.0 {
                                continue;
                            }
                            let row = &wv[r * cols..(r + 1) * cols];
                            for (a, b) in gx.iter_mut().zip(row) {
                                *a += gi * b;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for t in [*a, *b] {
                        if self.nodes[t.0].requires_grad {
                            add_into(grad_buf(&mut grads, t, g.len()), &g);
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.nodes[a.0].requires_grad {
                        let bv = &self.nodes[b.0].value;
                        let ga = grad_buf(&mut grads, a, g.len());
                        for ((s, gi), y) in ga.iter_mut().zip(&g).zip(bv) {
                            *s += gi * y;
                        }
                    }
                    if self.nodes[b.0].requires_grad {
                        let av = &self.nodes[a.0].value;
                        let gb = grad_buf(&mut grads, b, g.len());
                        for ((s, gi), x) in gb.iter_mut().zip(&g).zip(av) {
                            *s += gi * x;
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    let ga = grad_buf(&mut grads, *a, g.len());
                    for ((s, gi), y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *s += gi * y * (1.0 - y);
                    }
                }
                Op::Tanh(a) => {
                    let ga = grad_buf(&mut grads, *a, g.len());
                    for ((s, gi), y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *s += gi * (1.0 - y * y);
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        if self.nodes[p.0].requires_grad {
                            add_into(grad_buf(&mut grads, *p, n), &g[off..off + n]);
                        }
                        off += n;
                    }
                }
                Op::Row { m, index } => {
                    let total = self.nodes[m.0].value.len();
                    let cols = g.len();
                    let gm = grad_buf(&mut grads, *m, total);
                    add_into(&mut gm[index * cols..(index + 1) * cols], &g);
                }
                Op::Sum(a) => {
                    let n = self.nodes[a.0].value.len();
                    let ga = grad_buf(&mut grads, *a, n);
                    ga.iter_mut().for_each(|s| *s += g[0]);
                }
                Op::Dot(a, b) => {
                    let (a, b) = (*a, *b);
                    let n = self.nodes[a.0].value.len();
                    if self.nodes[a.0].requires_grad {
                        let bv = &self.nodes[b.0].value;
                        let ga = grad_buf(&mut grads, a, n);
                        for (s, y) in ga.iter_mut().zip(bv) {
                            *s += g[0] * y;
                        }
                    }
                    if self.nodes[b.0].requires_grad {
                        let av = &self.nodes[a.0].value;
                        let gb = grad_buf(&mut grads, b, n);
                        for (s, x) in gb.iter_mut().zip(av) {
                            *s += g[0] * x;
                        }
                    }
                }
                Op::AddN(parts) => {
                    for p in parts {
                        if self.nodes[p.0].requires_grad {
                            add_into(grad_buf(&mut grads, *p, g.len()), &g);
                        }
                    }
                }
                Op::SoftmaxCrossEntropy { logits, target } => {
                    let gl = grad_buf(&mut grads, *logits, node.aux.len());
                    for (k, (s, p)) in gl.iter_mut().zip(&node.aux).enumerate() {
                        let y = if k == *target { 1.0 } else { 0.0 };
                        *s += g[0] * (p - y);
                    }
                }
            }
            grads[i] = g;
        }
        self.grads = grads;
        Ok(())
    }

    /// Adds the gradients of every parameter leaf into the store.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore) {
        for (idx, node) in self.param_nodes.iter().enumerate() {
            if let Some(n) = node {
                if let Some(g) = self.grad(*n) {
                    store.tensors_mut()[idx].accumulate_grad(g);
                }
            }
        }
    }
}

fn grad_buf(grads: &mut [Vec<f64>], id: NodeId, len: usize) -> &mut Vec<f64> {
    let g = &mut grads[id.0];
    if g.is_empty() {
        *g = vec![0.0; len];
    }
    g
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}

/// Loss and softmax probabilities for one logit vector.
pub(crate) fn softmax_ce(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let probs = exps.iter().map(|e| e / z).collect();
    let loss = z.ln() - (logits[target] - max);
    (loss, probs)
}

/// Free-standing cross-entropy on a plain slice.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::invalid(
            "softmax_cross_entropy",
            format!("target {target} out of range for {} classes", logits.len()),
        ));
    }
    Ok(softmax_ce(logits, target).0)
}
