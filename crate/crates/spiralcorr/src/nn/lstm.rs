//! LSTM cell with masked sequence evaluation and backpropagation through
//! time.
//!
//! One step computes, with `z = [x_t, h_{t-1}]` (input concatenated with the
//! previous hidden state):
//!
//! ```text
//! f = sigmoid(z·w_f + b_f)
//! i = sigmoid(z·w_i + b_i)
//! o = sigmoid(z·w_o + b_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ tanh(z·w_c + b_c)
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! Masked (padding) steps leave the state untouched; pad masks must be a
//! contiguous suffix of each row.

use rand::Rng;

use super::tensor::Tensor;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gate weights `w_*: (input_dim + hidden_dim) × hidden_dim` and biases
/// `b_*: hidden_dim` for the forget, input, output, and candidate gates.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_f: Tensor,
    pub w_i: Tensor,
    pub w_o: Tensor,
    pub w_c: Tensor,
    pub b_f: Tensor,
    pub b_i: Tensor,
    pub b_o: Tensor,
    pub b_c: Tensor,
    input_dim: usize,
    hidden_dim: usize,
}

/// Gradients for [`LstmParams`], same layout.
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub w_f: Tensor,
    pub w_i: Tensor,
    pub w_o: Tensor,
    pub w_c: Tensor,
    pub b_f: Tensor,
    pub b_i: Tensor,
    pub b_o: Tensor,
    pub b_c: Tensor,
}

/// Cell and hidden state for a batch of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Tensor,
    pub h: Tensor,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden_dim: usize) -> Self {
        LstmState {
            c: Tensor::zeros(&[batch, hidden_dim]),
            h: Tensor::zeros(&[batch, hidden_dim]),
        }
    }
}

/// Per-step activations cached for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub f: Tensor,
    pub i: Tensor,
    pub o: Tensor,
    pub g: Tensor,
    pub c_prev: Tensor,
    pub h_prev: Tensor,
    pub c: Tensor,
}

/// Full-sequence cache: the inputs and one step cache per time step.
#[derive(Debug, Clone)]
pub struct LstmSequenceCache {
    pub steps: Vec<LstmStepCache>,
    /// true-step count per row (pads are a suffix)
    pub lengths: Vec<usize>,
}

impl LstmParams {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let z = input_dim + hidden_dim;
        LstmParams {
            w_f: Tensor::glorot(z, hidden_dim, rng),
            w_i: Tensor::glorot(z, hidden_dim, rng),
            w_o: Tensor::glorot(z, hidden_dim, rng),
            w_c: Tensor::glorot(z, hidden_dim, rng),
            b_f: Tensor::zeros(&[hidden_dim]),
            b_i: Tensor::zeros(&[hidden_dim]),
            b_o: Tensor::zeros(&[hidden_dim]),
            b_c: Tensor::zeros(&[hidden_dim]),
            input_dim,
            hidden_dim,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let z = input_dim + hidden_dim;
        LstmParams {
            w_f: Tensor::zeros(&[z, hidden_dim]),
            w_i: Tensor::zeros(&[z, hidden_dim]),
            w_o: Tensor::zeros(&[z, hidden_dim]),
            w_c: Tensor::zeros(&[z, hidden_dim]),
            b_f: Tensor::zeros(&[hidden_dim]),
            b_i: Tensor::zeros(&[hidden_dim]),
            b_o: Tensor::zeros(&[hidden_dim]),
            b_c: Tensor::zeros(&[hidden_dim]),
            input_dim,
            hidden_dim,
        }
    }

    /// Optional forget-gate bias offset (off by default; the plain
    /// equations use an unshifted `b_f`).
    pub fn with_forget_bias(mut self, offset: f64) -> Self {
        self.b_f.data_mut().iter_mut().for_each(|v| *v += offset);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn param_count(&self) -> usize {
        4 * ((self.input_dim + self.hidden_dim) * self.hidden_dim + self.hidden_dim)
    }

    pub fn zero_grads(&self) -> LstmGrads {
        let z = self.input_dim + self.hidden_dim;
        let h = self.hidden_dim;
        LstmGrads {
            w_f: Tensor::zeros(&[z, h]),
            w_i: Tensor::zeros(&[z, h]),
            w_o: Tensor::zeros(&[z, h]),
            w_c: Tensor::zeros(&[z, h]),
            b_f: Tensor::zeros(&[h]),
            b_i: Tensor::zeros(&[h]),
            b_o: Tensor::zeros(&[h]),
            b_c: Tensor::zeros(&[h]),
        }
    }

    fn gate_preact(&self, x: &Tensor, h_prev: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
        let batch = x.rows();
        let hd = self.hidden_dim;
        let mut out = Tensor::zeros(&[batch, hd]);
        // z·w + b with z = [x, h_prev], without materializing z.
        for r in 0..batch {
            let x_row = x.row(r);
            let h_row = h_prev.row(r);
            let out_row = out.row_mut(r);
            out_row.copy_from_slice(b.data());
            for (k, &xv) in x_row.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let w_row = &w.data()[k * hd..(k + 1) * hd];
                for (o, &wv) in out_row.iter_mut().zip(w_row) {
                    *o += xv * wv;
                }
            }
            for (k, &hv) in h_row.iter().enumerate() {
                if hv == 0.0 {
                    continue;
                }
                let w_row = &w.data()[(self.input_dim + k) * hd..(self.input_dim + k + 1) * hd];
                for (o, &wv) in out_row.iter_mut().zip(w_row) {
                    *o += hv * wv;
                }
            }
        }
        out
    }

    /// Single step for a whole batch; returns the new state and the cache.
    pub fn step(&self, x: &Tensor, state: &LstmState) -> (LstmState, LstmStepCache) {
        assert_eq!(x.cols(), self.input_dim, "lstm input dimension mismatch");
        assert_eq!(
            state.h.cols(),
            self.hidden_dim,
            "lstm state dimension mismatch"
        );
        let mut f = self.gate_preact(x, &state.h, &self.w_f, &self.b_f);
        let mut i = self.gate_preact(x, &state.h, &self.w_i, &self.b_i);
        let mut o = self.gate_preact(x, &state.h, &self.w_o, &self.b_o);
        let mut g = self.gate_preact(x, &state.h, &self.w_c, &self.b_c);
        f.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
        i.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
        o.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
        g.data_mut().iter_mut().for_each(|v| *v = v.tanh());

        let mut c = Tensor::zeros(state.c.shape());
        let mut h = Tensor::zeros(state.h.shape());
        for idx in 0..c.len() {
            let cv = f.data()[idx] * state.c.data()[idx] + i.data()[idx] * g.data()[idx];
            c.data_mut()[idx] = cv;
            h.data_mut()[idx] = o.data()[idx] * cv.tanh();
        }
        let cache = LstmStepCache {
            f,
            i,
            o,
            g,
            c_prev: state.c.clone(),
            h_prev: state.h.clone(),
            c: c.clone(),
        };
        (LstmState { c, h }, cache)
    }

    /// Runs the cell over `xs` (batch × steps × input_dim, flattened per
    /// step into `steps[t]`), starting from the zero state. `mask[r*n + t]`
    /// false means step `t` of row `r` is padding: the state passes through
    /// unchanged and the step contributes no gradient.
    ///
    /// Returns every per-step hidden state (pad steps yield zero rows) and
    /// the cache.
    pub fn forward_sequence(
        &self,
        steps: &[Tensor],
        mask: &[bool],
    ) -> (Vec<Tensor>, LstmSequenceCache) {
        let n = steps.len();
        assert!(n > 0, "empty sequence");
        let batch = steps[0].rows();
        assert_eq!(mask.len(), batch * n, "mask shape mismatch");
        let lengths: Vec<usize> = (0..batch)
            .map(|r| {
                let len = (0..n).take_while(|&t| mask[r * n + t]).count();
                assert!(
                    (len..n).all(|t| !mask[r * n + t]),
                    "pad mask must be a contiguous suffix (row {r})"
                );
                len
            })
            .collect();
        assert!(
            lengths.iter().all(|&l| l > 0),
            "every row needs at least one unmasked step"
        );

        let mut state = LstmState::zeros(batch, self.hidden_dim);
        let mut hidden_seq = Vec::with_capacity(n);
        let mut caches = Vec::with_capacity(n);
        for (t, x) in steps.iter().enumerate() {
            let (next, cache) = self.step(x, &state);
            let mut h_out = Tensor::zeros(&[batch, self.hidden_dim]);
            for r in 0..batch {
                if mask[r * n + t] {
                    state.c.row_mut(r).copy_from_slice(next.c.row(r));
                    state.h.row_mut(r).copy_from_slice(next.h.row(r));
                    h_out.row_mut(r).copy_from_slice(next.h.row(r));
                }
                // masked rows: state untouched, h_out row stays zero
            }
            caches.push(cache);
            hidden_seq.push(h_out);
        }
        (
            hidden_seq,
            LstmSequenceCache {
                steps: caches,
                lengths,
            },
        )
    }

    /// Backward through time. `d_hidden_seq[t]` is the loss gradient with
    /// respect to the per-step hidden output (zero rows for steps that were
    /// not consumed downstream). Accumulates parameter gradients into
    /// `grads` and returns the gradients with respect to each input step.
    pub fn backward_sequence(
        &self,
        steps: &[Tensor],
        mask: &[bool],
        cache: &LstmSequenceCache,
        d_hidden_seq: &[Tensor],
        grads: &mut LstmGrads,
    ) -> Vec<Tensor> {
        let n = steps.len();
        let batch = steps[0].rows();
        let hd = self.hidden_dim;
        let id = self.input_dim;
        let mut d_x: Vec<Tensor> = steps.iter().map(|s| Tensor::zeros(s.shape())).collect();
        let mut d_c = Tensor::zeros(&[batch, hd]);
        let mut d_h = Tensor::zeros(&[batch, hd]);

        for t in (0..n).rev() {
            let sc = &cache.steps[t];
            for r in 0..batch {
                if !mask[r * n + t] {
                    // pad step: state passed through, gradient passes back
                    continue;
                }
                // add the downstream gradient on this step's hidden output
                for (dh, &d) in d_h.row_mut(r).iter_mut().zip(d_hidden_seq[t].row(r)) {
                    *dh += d;
                }
                let f = sc.f.row(r);
                let i = sc.i.row(r);
                let o = sc.o.row(r);
                let g = sc.g.row(r);
                let c = sc.c.row(r);
                let c_prev = sc.c_prev.row(r);

                let mut da_f = vec![0.0; hd];
                let mut da_i = vec![0.0; hd];
                let mut da_o = vec![0.0; hd];
                let mut da_g = vec![0.0; hd];
                {
                    let d_h_row = d_h.row(r);
                    let d_c_row = d_c.row_mut(r);
                    for j in 0..hd {
                        let tanh_c = c[j].tanh();
                        let dc_total = d_c_row[j] + d_h_row[j] * o[j] * (1.0 - tanh_c * tanh_c);
                        da_o[j] = d_h_row[j] * tanh_c * o[j] * (1.0 - o[j]);
                        da_f[j] = dc_total * c_prev[j] * f[j] * (1.0 - f[j]);
                        da_i[j] = dc_total * g[j] * i[j] * (1.0 - i[j]);
                        da_g[j] = dc_total * i[j] * (1.0 - g[j] * g[j]);
                        // gradient flowing to c_{t-1}
                        d_c_row[j] = dc_total * f[j];
                    }
                }

                // accumulate weight/bias gradients and the z gradient
                let x_row = steps[t].row(r);
                let h_prev = sc.h_prev.row(r);
                let mut d_h_prev = vec![0.0; hd];
                let mut d_x_row = vec![0.0; id];
                for (w, da, b_grad) in [
                    (&self.w_f, &da_f, &mut grads.b_f),
                    (&self.w_i, &da_i, &mut grads.b_i),
                    (&self.w_o, &da_o, &mut grads.b_o),
                    (&self.w_c, &da_g, &mut grads.b_c),
                ] {
                    for (bg, &da_v) in b_grad.data_mut().iter_mut().zip(da.iter()) {
                        *bg += da_v;
                    }
                    for k in 0..id {
                        let w_row = &w.data()[k * hd..(k + 1) * hd];
                        let mut acc = 0.0;
                        for j in 0..hd {
                            acc += da[j] * w_row[j];
                        }
                        d_x_row[k] += acc;
                    }
                    for k in 0..hd {
                        let w_row = &w.data()[(id + k) * hd..(id + k + 1) * hd];
                        let mut acc = 0.0;
                        for j in 0..hd {
                            acc += da[j] * w_row[j];
                        }
                        d_h_prev[k] += acc;
                    }
                }
                for (w_grad, da) in [
                    (&mut grads.w_f, &da_f),
                    (&mut grads.w_i, &da_i),
                    (&mut grads.w_o, &da_o),
                    (&mut grads.w_c, &da_g),
                ] {
                    let wd = w_grad.data_mut();
                    for (k, &xv) in x_row.iter().enumerate() {
                        if xv == 0.0 {
                            continue;
                        }
                        for j in 0..hd {
                            wd[k * hd + j] += xv * da[j];
                        }
                    }
                    for (k, &hv) in h_prev.iter().enumerate() {
                        if hv == 0.0 {
                            continue;
                        }
                        for j in 0..hd {
                            wd[(id + k) * hd + j] += hv * da[j];
                        }
                    }
                }

                d_x[t].row_mut(r).copy_from_slice(&d_x_row);
                d_h.row_mut(r).copy_from_slice(&d_h_prev);
            }
        }
        d_x
    }
}

/// Hidden state at the last unmasked step of each row.
pub fn last_hidden(hidden_seq: &[Tensor], lengths: &[usize]) -> Tensor {
    let batch = lengths.len();
    let hd = hidden_seq[0].cols();
    let mut out = Tensor::zeros(&[batch, hd]);
    for (r, &len) in lengths.iter().enumerate() {
        out.row_mut(r).copy_from_slice(hidden_seq[len - 1].row(r));
    }
    out
}

/// Convenience wrapper: run the cell over a masked sequence from the zero
/// state and return the hidden state at each row's last real step.
pub fn lstm_sequence(params: &LstmParams, steps: &[Tensor], mask: &[bool]) -> Tensor {
    let (hidden, cache) = params.forward_sequence(steps, mask);
    last_hidden(&hidden, &cache.lengths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn zero_params_give_half_gates_and_zero_state() {
        let p = LstmParams::zeros(3, 4);
        let state = LstmState::zeros(2, 4);
        let x = Tensor::from_vec(&[2, 3], vec![5.0, -1.0, 2.0, 0.3, 0.0, -9.0]);
        let (next, cache) = p.step(&x, &state);
        for v in cache
            .f
            .data()
            .iter()
            .chain(cache.i.data())
            .chain(cache.o.data())
        {
            assert_eq!(*v, 0.5);
        }
        assert!(next.c.data().iter().all(|&v| v == 0.0));
        assert!(next.h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_preserves_cell_state() {
        let p = LstmParams::zeros(2, 1).with_forget_bias(50.0);
        let state = LstmState {
            c: Tensor::from_vec(&[1, 1], vec![1.0]),
            h: Tensor::zeros(&[1, 1]),
        };
        let x = Tensor::from_vec(&[1, 2], vec![0.7, -0.2]);
        let (next, _) = p.step(&x, &state);
        assert!((next.c.data()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hidden_state_is_bounded_by_one() {
        let mut rng = derive_rng(3, &[7]);
        let p = LstmParams::new(4, 6, &mut rng);
        let mut state = LstmState::zeros(3, 6);
        for t in 0..20 {
            let x = Tensor::glorot(3, 4, &mut rng);
            let (next, _) = p.step(&x, &state);
            assert!(
                next.h.data().iter().all(|&v| v.abs() <= 1.0),
                "|h| > 1 at step {t}"
            );
            state = next;
        }
    }

    #[test]
    fn single_step_sequence_matches_step() {
        let mut rng = derive_rng(8, &[1]);
        let p = LstmParams::new(3, 5, &mut rng);
        let x = Tensor::glorot(2, 3, &mut rng);
        let out = lstm_sequence(&p, std::slice::from_ref(&x), &[true, true]);
        let (state, _) = p.step(&x, &LstmState::zeros(2, 5));
        assert_eq!(out, state.h);
    }

    #[test]
    fn padded_step_is_ignored() {
        let mut rng = derive_rng(8, &[2]);
        let p = LstmParams::new(3, 5, &mut rng);
        let x = Tensor::glorot(1, 3, &mut rng);
        let pad = Tensor::zeros(&[1, 3]);
        let with_pad = lstm_sequence(&p, &[x.clone(), pad], &[true, false]);
        let without = lstm_sequence(&p, &[x], &[true]);
        assert_eq!(with_pad, without);
    }

    #[test]
    fn sequence_composes_individual_steps() {
        let mut rng = derive_rng(8, &[3]);
        let p = LstmParams::new(4, 3, &mut rng);
        let xs: Vec<Tensor> = (0..3).map(|_| Tensor::glorot(2, 4, &mut rng)).collect();
        let out = lstm_sequence(&p, &xs, &[true; 6]);
        let mut state = LstmState::zeros(2, 3);
        for x in &xs {
            state = p.step(x, &state).0;
        }
        assert_eq!(out, state.h);
    }
}
