//! LSTM cell and bidirectional layer on top of [`Graph`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::graph::{Graph, NodeId};
use crate::nn::init::{uniform_xavier, zeros};
use crate::nn::tensor::{ParamId, ParamStore};

/// Gate order used for the `weights` and `biases` arrays.
pub const GATES: [&str; 4] = ["input", "forget", "output", "candidate"];

/// Parameters of one LSTM direction. Each gate has a weight matrix of shape
/// `[hidden, input + hidden]` acting on `[x; h_prev]` and a bias `[hidden]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub weights: [ParamId; 4],
    pub biases: [ParamId; 4],
}

impl LstmParams {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut R,
    ) -> Self {
        let cols = input_size + hidden_size;
        let weights = GATES.map(|g| {
            store.add(
                format!("{prefix}.{g}.w"),
                uniform_xavier(hidden_size, cols, rng),
            )
        });
        let biases = GATES.map(|g| store.add(format!("{prefix}.{g}.b"), zeros(hidden_size)));
        LstmParams {
            input_size,
            hidden_size,
            weights,
            biases,
        }
    }

    /// Registers this direction's parameters as leaves of `g`.
    pub fn bind(&self, g: &mut Graph, store: &ParamStore) -> LstmNodes {
        LstmNodes {
            input_size: self.input_size,
            hidden_size: self.hidden_size,
            weights: self.weights.map(|w| g.param(store, w)),
            biases: self.biases.map(|b| g.param(store, b)),
        }
    }
}

/// [`LstmParams`] bound into a particular graph.
#[derive(Debug, Clone, Copy)]
pub struct LstmNodes {
    pub input_size: usize,
    pub hidden_size: usize,
    weights: [NodeId; 4],
    biases: [NodeId; 4],
}

impl LstmNodes {
    pub fn zero_state(&self, g: &mut Graph) -> (NodeId, NodeId) {
        let h = g.vector(vec![0.0; self.hidden_size]);
        let c = g.vector(vec![0.0; self.hidden_size]);
        (h, c)
    }
}

fn check_len(g: &Graph, operand: &'static str, id: NodeId, n: usize) -> Result<()> {
    if g.shape(id) != [n] {
        return Err(Error::Shape {
            op: "lstm_cell_step",
            operand,
            expected: vec![n],
            found: g.shape(id).to_vec(),
        });
    }
    Ok(())
}

/// One LSTM step: gates `i, f, o = σ(W[x; h] + b)`, `g = tanh(W[x; h] + b)`,
/// `c = f⊙c_prev + i⊙g`, `h = o⊙tanh(c)`. Returns `(h, c)`.
pub fn lstm_cell_step(
    g: &mut Graph,
    p: &LstmNodes,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<(NodeId, NodeId)> {
    check_len(g, "x", x, p.input_size)?;
    check_len(g, "h_prev", h_prev, p.hidden_size)?;
    check_len(g, "c_prev", c_prev, p.hidden_size)?;
    let xh = g.concat(&[x, h_prev])?;
    let mut pre = [xh; 4];
    for (k, slot) in pre.iter_mut().enumerate() {
        let z = g.matvec(p.weights[k], xh)?;
        *slot = g.add(z, p.biases[k])?;
    }
    let i = g.sigmoid(pre[0]);
    let f = g.sigmoid(pre[1]);
    let o = g.sigmoid(pre[2]);
    let cand = g.tanh(pre[3]);
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok((h, c))
}

/// Runs one direction over `xs`, returning the hidden state at every step in
/// processing order.
pub fn lstm_run(g: &mut Graph, p: &LstmNodes, xs: &[NodeId]) -> Result<Vec<NodeId>> {
    let (mut h, mut c) = p.zero_state(g);
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        (h, c) = lstm_cell_step(g, p, x, h, c)?;
        out.push(h);
    }
    Ok(out)
}

/// Bidirectional layer: position `t` gets `[fwd_h_t ; bwd_h_t]` where the
/// backward direction reads the sequence right to left.
pub fn bilstm_layer(
    g: &mut Graph,
    xs: &[NodeId],
    fwd: &LstmNodes,
    bwd: &LstmNodes,
) -> Result<Vec<NodeId>> {
    if xs.is_empty() {
        return Err(Error::invalid("bilstm_layer", "empty input sequence"));
    }
    let f = lstm_run(g, fwd, xs)?;
    let rev: Vec<NodeId> = xs.iter().rev().copied().collect();
    let mut b = lstm_run(g, bwd, &rev)?;
    b.reverse();
    f.iter()
        .zip(&b)
        .map(|(&hf, &hb)| g.concat(&[hf, hb]))
        .collect()
}

/// Final states of both directions, `[fwd_h_last ; bwd_h_first]`.
pub fn bilstm_final(
    g: &mut Graph,
    xs: &[NodeId],
    fwd: &LstmNodes,
    bwd: &LstmNodes,
) -> Result<NodeId> {
    if xs.is_empty() {
        return Err(Error::invalid("bilstm_final", "empty input sequence"));
    }
    let f = lstm_run(g, fwd, xs)?;
    let rev: Vec<NodeId> = xs.iter().rev().copied().collect();
    let b = lstm_run(g, bwd, &rev)?;
    g.concat(&[*f.last().unwrap(), *b.last().unwrap()])
}
