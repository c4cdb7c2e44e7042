//! Multinomial logistic regression with an L2 penalty on the weights.
//!
//! The objective is mean cross-entropy plus `(λ/2)‖W‖²`; the bias is not
//! penalized. Optimization is full-batch gradient descent from zero with the
//! fixed step `1/L`, where `L = ½·mean‖[x; 1]‖² + λ` bounds the curvature, so
//! the objective never increases.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 1e-2;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// sorted class labels; row `k` of `weights` scores `classes[k]`
    pub classes: Vec<String>,
    /// `[classes][dim]`
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
}

impl LogRegModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b)
            .collect()
    }

    /// Highest-scoring class; ties go to the smallest label.
    pub fn predict(&self, x: &[f64]) -> &str {
        let s = self.scores(x);
        let mut best = 0;
        for (k, v) in s.iter().enumerate() {
            if *v > s[best] {
                best = k;
            }
        }
        &self.classes[best]
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[String]) -> f64 {
        let hits = x.iter().zip(y).filter(|(v, l)| self.predict(v) == l.as_str()).count();
        hits as f64 / x.len() as f64
    }

    /// Regularized objective on `(x, y)`. Labels outside `classes` are an error.
    pub fn objective(&self, x: &[Vec<f64>], y: &[String]) -> Result<f64> {
        let targets = label_indices(&self.classes, y)?;
        Ok(objective_and_gradient(&self.weights, &self.bias, x, &targets, self.lambda, false).0)
    }
}

fn label_indices(classes: &[String], y: &[String]) -> Result<Vec<usize>> {
    y.iter()
        .map(|l| {
            classes
                .binary_search(l)
                .map_err(|_| Error::invalid("logreg", format!("unknown class label `{l}`")))
        })
        .collect()
}

fn softmax_in_place(s: &mut [f64]) {
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in s.iter_mut() {
        *v = (*v - m).exp();
        z += *v;
    }
    for v in s.iter_mut() {
        *v /= z;
    }
}

type Gradient = (Vec<Vec<f64>>, Vec<f64>);

fn objective_and_gradient(
    w: &[Vec<f64>],
    b: &[f64],
    x: &[Vec<f64>],
    y: &[usize],
    lambda: f64,
    with_grad: bool,
) -> (f64, Option<Gradient>) {
    let n = x.len() as f64;
    let k = w.len();
    let d = x[0].len();
    let mut loss = 0.0;
    let mut gw = vec![vec![0.0; d]; if with_grad { k } else { 0 }];
    let mut gb = vec![0.0; if with_grad { k } else { 0 }];
    for (xi, &yi) in x.iter().zip(y) {
        let mut p: Vec<f64> = w
            .iter()
            .zip(b)
            .map(|(wk, bk)| wk.iter().zip(xi).map(|(a, c)| a * c).sum::<f64>() + bk)
            .collect();
        let m = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + p.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
        loss += lse - p[yi];
        if with_grad {
            softmax_in_place(&mut p);
            p[yi] -= 1.0;
            for c in 0..k {
                gb[c] += p[c] / n;
                for j in 0..d {
                    gw[c][j] += p[c] * xi[j] / n;
                }
            }
        }
    }
    let penalty: f64 = w.iter().flatten().map(|v| v * v).sum::<f64>() * lambda / 2.0;
    if with_grad {
        for (gk, wk) in gw.iter_mut().zip(w) {
            for (g, v) in gk.iter_mut().zip(wk) {
                *g += lambda * v;
            }
        }
    }
    (loss / n + penalty, with_grad.then_some((gw, gb)))
}

fn fit(x: &[Vec<f64>], y: &[String], lambda: f64, mut trace: Option<&mut Vec<f64>>) -> Result<LogRegModel> {
    if x.len() != y.len() {
        return Err(Error::invalid(
            "train_logreg",
            format!("{} rows but {} labels", x.len(), y.len()),
        ));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("train_logreg", format!("λ must be finite and ≥ 0, got {lambda}")));
    }
    let classes: Vec<String> = y.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::invalid(
            "train_logreg",
            format!("need at least two classes, found {}", classes.len()),
        ));
    }
    let d = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(Error::Shape {
            op: "train_logreg",
            operand: "x",
            expected: vec![d],
            found: vec![bad.len()],
        });
    }
    let targets = label_indices(&classes, y)?;
    let k = classes.len();
    let mean_sq = x.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).sum::<f64>() / x.len() as f64;
    let step = 1.0 / (0.5 * mean_sq + lambda);

    let mut w = vec![vec![0.0; d]; k];
    let mut b = vec![0.0; k];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let (obj, grad) = objective_and_gradient(&w, &b, x, &targets, lambda, true);
        if let Some(t) = trace.as_deref_mut() {
            t.push(obj);
        }
        let (gw, gb) = grad.expect("gradient requested");
        let norm = (gw.iter().flatten().chain(&gb).map(|g| g * g).sum::<f64>()).sqrt();
        if norm < GRADIENT_TOLERANCE {
            break;
        }
        for (wk, gk) in w.iter_mut().zip(&gw) {
            for (v, g) in wk.iter_mut().zip(gk) {
                *v -= step * g;
            }
        }
        for (v, g) in b.iter_mut().zip(&gb) {
            *v -= step * g;
        }
        iterations += 1;
    }
    Ok(LogRegModel {
        classes,
        weights: w,
        bias: b,
        lambda,
        iterations,
    })
}

/// Fits a multinomial logistic regression; requires at least two distinct labels.
pub fn train_logreg(x: &[Vec<f64>], y: &[String], lambda: f64) -> Result<LogRegModel> {
    fit(x, y, lambda, None)
}

/// [`train_logreg`] that also returns the objective at every iterate.
pub fn train_logreg_traced(x: &[Vec<f64>], y: &[String], lambda: f64) -> Result<(LogRegModel, Vec<f64>)> {
    let mut trace = Vec::new();
    let m = fit(x, y, lambda, Some(&mut trace))?;
    Ok((m, trace))
}
