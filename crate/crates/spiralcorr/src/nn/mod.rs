//! Minimal dense-tensor learning core: fully-connected layers, an LSTM
//! cell with backpropagation through time, activations, dropout,
//! cross-entropy, Adam, and finite-difference gradient checking.
//!
//! Everything is 64-bit and deterministic: given the same seeds, forward,
//! backward, and update paths produce bit-identical results.

pub mod adam;
pub mod gradcheck;
pub mod lstm;
pub mod ops;
pub mod tensor;

pub use adam::{AdamConfig, AdamError, AdamState};
pub use gradcheck::{grad_check, jitter_blocks, GradCheckReport};
pub use lstm::{lstm_sequence, LstmGrads, LstmParams, LstmState};
pub use ops::{
    cross_entropy, dropout, dropout_backward, fc_forward, relu, relu_backward, softmax,
    softmax_cross_entropy_backward, Linear, LinearGrads, Mode,
};
pub use tensor::{set_threads, threads, Tensor};

/// Ordered access to a model's trainable parameter blocks. The block order
/// is part of a model's contract: Adam state, checkpoints, and gradient
/// reports all index blocks by this order.
pub trait ParamBlocks {
    fn block_names(&self) -> Vec<String>;
    fn num_blocks(&self) -> usize;
    fn block(&self, idx: usize) -> &Tensor;
    fn block_mut(&mut self, idx: usize) -> &mut Tensor;

    fn param_count(&self) -> usize {
        (0..self.num_blocks()).map(|b| self.block(b).len()).sum()
    }
}

/// One named tensor as a trivial [`ParamBlocks`] model.
pub struct SingleBlock {
    name: String,
    tensor: Tensor,
}

impl SingleBlock {
    pub fn new(name: &str, tensor: Tensor) -> Self {
        SingleBlock {
            name: name.to_string(),
            tensor,
        }
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }
}

impl ParamBlocks for SingleBlock {
    fn block_names(&self) -> Vec<String> {
        vec![self.name.clone()]
    }
    fn num_blocks(&self) -> usize {
        1
    }
    fn block(&self, idx: usize) -> &Tensor {
        assert_eq!(idx, 0);
        &self.tensor
    }
    fn block_mut(&mut self, idx: usize) -> &mut Tensor {
        assert_eq!(idx, 0);
        &mut self.tensor
    }
}

impl ParamBlocks for Linear {
    fn block_names(&self) -> Vec<String> {
        vec!["w".into(), "b".into()]
    }
    fn num_blocks(&self) -> usize {
        2
    }
    fn block(&self, idx: usize) -> &Tensor {
        match idx {
            0 => &self.w,
            1 => &self.b,
            _ => panic!("linear has 2 blocks"),
        }
    }
    fn block_mut(&mut self, idx: usize) -> &mut Tensor {
        match idx {
            0 => &mut self.w,
            1 => &mut self.b,
            _ => panic!("linear has 2 blocks"),
        }
    }
}

impl LinearGrads {
    pub fn blocks(&self) -> Vec<&Tensor> {
        vec![&self.w, &self.b]
    }
}

const LSTM_BLOCK_NAMES: [&str; 8] = ["w_f", "w_i", "w_o", "w_c", "b_f", "b_i", "b_o", "b_c"];

impl ParamBlocks for LstmParams {
    fn block_names(&self) -> Vec<String> {
        LSTM_BLOCK_NAMES.iter().map(|s| s.to_string()).collect()
    }
    fn num_blocks(&self) -> usize {
        8
    }
    fn block(&self, idx: usize) -> &Tensor {
        match idx {
            0 => &self.w_f,
            1 => &self.w_i,
            2 => &self.w_o,
            3 => &self.w_c,
            4 => &self.b_f,
            5 => &self.b_i,
            6 => &self.b_o,
            7 => &self.b_c,
            _ => panic!("lstm has 8 blocks"),
        }
    }
    fn block_mut(&mut self, idx: usize) -> &mut Tensor {
        match idx {
            0 => &mut self.w_f,
            1 => &mut self.w_i,
            2 => &mut self.w_o,
            3 => &mut self.w_c,
            4 => &mut self.b_f,
            5 => &mut self.b_i,
            6 => &mut self.b_o,
            7 => &mut self.b_c,
            _ => panic!("lstm has 8 blocks"),
        }
    }
}

impl LstmGrads {
    pub fn blocks(&self) -> Vec<&Tensor> {
        vec![
            &self.w_f, &self.w_i, &self.w_o, &self.w_c, &self.b_f, &self.b_i, &self.b_o, &self.b_c,
        ]
    }
}
