//! Numeric core checked against independent scalar implementations.

use langvec::nn::lstm::lstm_run;
use langvec::nn::{
    bilstm_final, bilstm_layer, lstm_cell_step, AdamConfig, AdamState, Graph, LstmParams, ParamStore, Tensor,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Reference cell on plain vectors: weights `[gate][row][col]` over `[x; h]`.
struct RefLstm {
    w: Vec<Vec<Vec<f64>>>,
    b: Vec<Vec<f64>>,
}

impl RefLstm {
    fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let xh: Vec<f64> = x.iter().chain(h).copied().collect();
        let pre = |k: usize, r: usize| -> f64 {
            let mut s = self.b[k][r];
            for (j, v) in xh.iter().enumerate() {
                s += self.w[k][r][j] * v;
            }
            s
        };
        let n = h.len();
        let mut h2 = vec![0.0; n];
        let mut c2 = vec![0.0; n];
        for r in 0..n {
            let i = sig(pre(0, r));
            let f = sig(pre(1, r));
            let o = sig(pre(2, r));
            let g = pre(3, r).tanh();
            c2[r] = f * c[r] + i * g;
            h2[r] = o * c2[r].tanh();
        }
        (h2, c2)
    }

    fn run(&self, xs: &[Vec<f64>], hidden: usize) -> Vec<Vec<f64>> {
        let (mut h, mut c) = (vec![0.0; hidden], vec![0.0; hidden]);
        let mut out = Vec::new();
        for x in xs {
            (h, c) = self.step(x, &h, &c);
            out.push(h.clone());
        }
        out
    }
}

/// Random parameters written into both the store and a reference copy.
fn random_lstm(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> (LstmParams, RefLstm) {
    let p = LstmParams::new(store, name, input, hidden, rng);
    let mut w = Vec::new();
    let mut b = Vec::new();
    for k in 0..4 {
        let wt = store.get_mut(p.weights[k]);
        for v in wt.values_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let cols = input + hidden;
        w.push((0..hidden).map(|r| wt.values()[r * cols..(r + 1) * cols].to_vec()).collect());
        let bt = store.get_mut(p.biases[k]);
        for v in bt.values_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
        b.push(bt.values().to_vec());
    }
    (p, RefLstm { w, b })
}

fn assert_vec_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

#[test]
fn lstm_cell_matches_scalar_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    let (p, r) = random_lstm(&mut store, "l", 3, 2, &mut rng);
    let mut g = Graph::new();
    let nodes = p.bind(&mut g, &store);
    let x = g.vector(vec![0.3, -1.2, 0.8]);
    let h = g.vector(vec![0.1, -0.4]);
    let c = g.vector(vec![-0.7, 0.25]);
    let (h2, c2) = lstm_cell_step(&mut g, &nodes, x, h, c).unwrap();
    let (rh, rc) = r.step(&[0.3, -1.2, 0.8], &[0.1, -0.4], &[-0.7, 0.25]);
    assert_vec_close(g.value(h2), &rh, 1e-12);
    assert_vec_close(g.value(c2), &rc, 1e-12);
}

#[test]
fn lstm_sequence_matches_scalar_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut store = ParamStore::new();
    let (p, r) = random_lstm(&mut store, "l", 2, 3, &mut rng);
    let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut g = Graph::new();
    let nodes = p.bind(&mut g, &store);
    let ids: Vec<_> = xs.iter().map(|x| g.vector(x.clone())).collect();
    let hs = lstm_run(&mut g, &nodes, &ids).unwrap();
    for (id, want) in hs.iter().zip(r.run(&xs, 3)) {
        assert_vec_close(g.value(*id), &want, 1e-12);
    }
}

#[test]
fn bilstm_matches_two_reference_passes() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut store = ParamStore::new();
    let (pf, rf) = random_lstm(&mut store, "f", 2, 2, &mut rng);
    let (pb, rb) = random_lstm(&mut store, "b", 2, 2, &mut rng);
    let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let fwd = rf.run(&xs, 2);
    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let mut bwd = rb.run(&rev, 2);
    bwd.reverse();

    let mut g = Graph::new();
    let nf = pf.bind(&mut g, &store);
    let nb = pb.bind(&mut g, &store);
    let ids: Vec<_> = xs.iter().map(|x| g.vector(x.clone())).collect();
    let out = bilstm_layer(&mut g, &ids, &nf, &nb).unwrap();
    for t in 0..4 {
        let want: Vec<f64> = fwd[t].iter().chain(&bwd[t]).copied().collect();
        assert_vec_close(g.value(out[t]), &want, 1e-12);
    }
    let fin = bilstm_final(&mut g, &ids, &nf, &nb).unwrap();
    let want: Vec<f64> = fwd[3].iter().chain(&bwd[0]).copied().collect();
    assert_vec_close(g.value(fin), &want, 1e-12);
}

#[test]
fn lstm_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut store = ParamStore::new();
    let (p, _) = random_lstm(&mut store, "l", 2, 2, &mut rng);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let loss = |store: &ParamStore, grads: bool| -> (f64, Option<ParamStore>) {
        let mut g = Graph::new();
        let nodes = p.bind(&mut g, store);
        let ids: Vec<_> = xs.iter().map(|x| g.vector(x.clone())).collect();
        let hs = lstm_run(&mut g, &nodes, &ids).unwrap();
        let w = g.vector(vec![0.7, -1.3]);
        let d = g.dot(*hs.last().unwrap(), w).unwrap();
        let v = g.scalar(d);
        if !grads {
            return (v, None);
        }
        g.backward(d).unwrap();
        let mut s = store.clone();
        s.zero_grad();
        g.accumulate_param_grads(&mut s);
        (v, Some(s))
    };
    let (_, with) = loss(&store, true);
    let with = with.unwrap();
    let h = 1e-5;
    for id in store.ids() {
        for i in 0..store.get(id).len() {
            let mut plus = store.clone();
            plus.get_mut(id).values_mut()[i] += h;
            let mut minus = store.clone();
            minus.get_mut(id).values_mut()[i] -= h;
            let fd = (loss(&plus, false).0 - loss(&minus, false).0) / (2.0 * h);
            let an = with.get(id).grad().unwrap()[i];
            assert!((fd - an).abs() <= 1e-7 * (1.0 + fd.abs()), "{} [{i}]: {an} vs {fd}", store.name(id));
        }
    }
}

/// Adam on a single scalar, written from the update equations.
fn scalar_adam(cfg: AdamConfig, w0: f64, grad: impl Fn(f64) -> f64, steps: usize) -> Vec<f64> {
    let (mut w, mut m, mut v) = (w0, 0.0, 0.0);
    let mut out = Vec::new();
    for t in 1..=steps {
        let g = grad(w);
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        let mh = m / (1.0 - cfg.beta1.powi(t as i32));
        let vh = v / (1.0 - cfg.beta2.powi(t as i32));
        w -= cfg.lr * mh / (vh.sqrt() + cfg.epsilon);
        out.push(w);
    }
    out
}

#[test]
fn adam_matches_scalar_reference_on_quadratic() {
    for cfg in [
        AdamConfig::default(),
        AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        },
    ] {
        let want = scalar_adam(cfg, 0.0, |w| 2.0 * (w - 3.0), 100);
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::vector(vec![0.0]));
        let mut adam = AdamState::new(cfg, &store);
        for expected in want {
            let mut g = Graph::new();
            let w = g.param(&store, id);
            let three = g.vector(vec![-3.0]);
            let d = g.add(w, three).unwrap();
            let sq = g.dot(d, d).unwrap();
            store.zero_grad();
            g.backward(sq).unwrap();
            g.accumulate_param_grads(&mut store);
            adam.step(&mut store).unwrap();
            assert!((store.get(id).values()[0] - expected).abs() <= 1e-10);
        }
    }
}

proptest! {
    #[test]
    fn softmax_cross_entropy_is_shift_invariant_and_nonnegative(
        logits in prop::collection::vec(-50.0f64..50.0, 2..8),
        shift in -100.0f64..100.0,
        pick in 0usize..8,
    ) {
        let target = pick % logits.len();
        let a = langvec::nn::softmax_cross_entropy(&logits, target).unwrap();
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let b = langvec::nn::softmax_cross_entropy(&shifted, target).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn sigmoid_and_tanh_stay_in_range(xs in prop::collection::vec(-500.0f64..500.0, 1..10)) {
        let mut g = Graph::new();
        let x = g.vector(xs.clone());
        let s = g.sigmoid(x);
        let t = g.tanh(x);
        prop_assert!(g.value(s).iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(g.value(t).iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn sum_gradient_is_ones(xs in prop::collection::vec(-5.0f64..5.0, 1..10)) {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::vector(xs.clone()));
        let mut g = Graph::new();
        let x = g.param(&store, id);
        let s = g.sum(x);
        g.backward(s).unwrap();
        prop_assert_eq!(g.grad(x).unwrap().to_vec(), vec![1.0; xs.len()]);
    }
}
