//! Fully-connected layer, activations, loss, and dropout with hand-rolled
//! backward passes.

use rand::Rng;

use super::tensor::{matmul, matmul_a_bt, matmul_at_b, Tensor};

/// Probability floor inside the loss so an early confident mistake cannot
/// produce an infinite cross-entropy.
pub const LOG_PROB_FLOOR: f64 = 1e-12;

/// Fully-connected layer `y = x·w + b` with `w: in×out`, `b: out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Tensor,
    pub b: Tensor,
}

/// Gradients for one [`Linear`] layer, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub w: Tensor,
    pub b: Tensor,
}

impl Linear {
    pub fn new(input_dim: usize, output_dim: usize, rng: &mut impl Rng) -> Self {
        Linear {
            w: Tensor::glorot(input_dim, output_dim, rng),
            b: Tensor::zeros(&[output_dim]),
        }
    }

    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Linear {
            w: Tensor::zeros(&[input_dim, output_dim]),
            b: Tensor::zeros(&[output_dim]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn zero_grads(&self) -> LinearGrads {
        LinearGrads {
            w: Tensor::zeros(self.w.shape()),
            b: Tensor::zeros(self.b.shape()),
        }
    }

    /// `x: batch×in -> batch×out`.
    pub fn forward(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.cols(), self.input_dim(), "fc input dimension mismatch");
        let mut out = matmul(x, &self.w);
        let b = self.b.data();
        for r in 0..out.rows() {
            for (o, bv) in out.row_mut(r).iter_mut().zip(b) {
                *o += bv;
            }
        }
        out
    }

    /// Backward pass; accumulates into `grads`, returns d_input.
    pub fn backward(&self, x: &Tensor, d_out: &Tensor, grads: &mut LinearGrads) -> Tensor {
        assert_eq!(d_out.cols(), self.output_dim());
        grads.w.add_scaled(&matmul_at_b(x, d_out), 1.0);
        for r in 0..d_out.rows() {
            for (g, &d) in grads.b.data_mut().iter_mut().zip(d_out.row(r)) {
                *g += d;
            }
        }
        matmul_a_bt(d_out, &self.w)
    }
}

/// `fc_forward` free-function form of [`Linear::forward`].
pub fn fc_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let layer = Linear {
        w: w.clone(),
        b: b.clone(),
    };
    layer.forward(x)
}

pub fn relu(x: &Tensor) -> Tensor {
    Tensor::from_vec(x.shape(), x.data().iter().map(|&v| v.max(0.0)).collect())
}

pub fn relu_inplace(x: &mut Tensor) {
    x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
}

/// d_in = d_out where the forward *output* was positive, else 0.
pub fn relu_backward(out: &Tensor, d_out: &Tensor) -> Tensor {
    assert_eq!(out.shape(), d_out.shape());
    let data = out
        .data()
        .iter()
        .zip(d_out.data())
        .map(|(&o, &d)| if o > 0.0 { d } else { 0.0 })
        .collect();
    Tensor::from_vec(out.shape(), data)
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean negative log-probability of the target class per row, with the
/// probability clamped at [`LOG_PROB_FLOOR`].
pub fn cross_entropy(probs: &Tensor, targets: &[usize]) -> f64 {
    assert_eq!(probs.rows(), targets.len(), "one target per row required");
    let c = probs.cols();
    let mut total = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        assert!(t < c, "target class {t} out of range ({c} classes)");
        total += -probs.row(r)[t].max(LOG_PROB_FLOOR).ln();
    }
    total / targets.len() as f64
}

/// Gradient of mean cross-entropy with respect to the *logits* feeding the
/// softmax: `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy_backward(probs: &Tensor, targets: &[usize]) -> Tensor {
    assert_eq!(probs.rows(), targets.len());
    let n = targets.len() as f64;
    let mut d = probs.clone();
    for (r, &t) in targets.iter().enumerate() {
        let row = d.row_mut(r);
        for v in row.iter_mut() {
            *v /= n;
        }
        row[t] -= 1.0 / n;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout: in train mode each unit is zeroed with probability `p`
/// and survivors are scaled by `1/(1-p)`; eval mode is the identity.
/// Returns the keep mask (all-ones in eval mode) for the backward pass.
pub fn dropout(x: &Tensor, p: f64, mode: Mode, rng: &mut impl Rng) -> (Tensor, Vec<f64>) {
    assert!(
        (0.0..1.0).contains(&p),
        "dropout probability must be in [0,1)"
    );
    if mode == Mode::Eval || p == 0.0 {
        return (x.clone(), vec![1.0; x.len()]);
    }
    let scale = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { scale })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    (Tensor::from_vec(x.shape(), data), mask)
}

pub fn dropout_backward(d_out: &Tensor, mask: &[f64]) -> Tensor {
    let data = d_out
        .data()
        .iter()
        .zip(mask)
        .map(|(&d, &m)| d * m)
        .collect();
    Tensor::from_vec(d_out.shape(), data)
}
