//! Central-difference gradient verification, block by block.

use super::tensor::Tensor;
use super::ParamBlocks;

/// Comparison of one parameter block against finite differences. The
/// relative error is `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)`
/// over the checked components (0 when both sides vanish).
#[derive(Debug, Clone)]
pub struct BlockCheck {
    pub name: String,
    pub checked: usize,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockCheck>,
    pub step: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().fold(0.0, |m, b| m.max(b.rel_error))
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error() < tolerance
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.blocks {
            writeln!(
                f,
                "{}\tchecked={}\t|analytic|={:.3e}\t|numeric|={:.3e}\trel_err={:.3e}",
                b.name, b.checked, b.analytic_norm, b.numeric_norm, b.rel_error
            )?;
        }
        write!(
            f,
            "max_rel_err={:.3e} (h={:.1e})",
            self.max_rel_error(),
            self.step
        )
    }
}

/// Adds uniform noise in ±amplitude to every parameter, biases included.
///
/// Useful before a finite-difference check: freshly initialized zero
/// biases park ReLU pre-activations exactly on the kink, where central
/// differences are undefined, and leave deep-layer gradients so small
/// that relative comparisons drown in rounding noise.
pub fn jitter_blocks<M: ParamBlocks>(model: &mut M, rng: &mut impl rand::Rng, amplitude: f64) {
    for b in 0..model.num_blocks() {
        for v in model.block_mut(b).data_mut() {
            *v += (rng.gen::<f64>() * 2.0 - 1.0) * amplitude;
        }
    }
}

/// Verifies analytic gradients against central differences.
///
/// `loss` must be a deterministic function of the current parameter values
/// (run dropout in eval mode). `analytic` aligns with the model's block
/// order. `max_per_block` limits the number of components probed per block
/// (evenly strided, deterministic); `None` checks every component.
pub fn grad_check<M: ParamBlocks>(
    model: &mut M,
    loss: impl Fn(&M) -> f64,
    analytic: &[&Tensor],
    h: f64,
    max_per_block: Option<usize>,
) -> GradCheckReport {
    assert_eq!(
        analytic.len(),
        model.num_blocks(),
        "gradient block count mismatch"
    );
    let names = model.block_names();
    let mut blocks = Vec::with_capacity(analytic.len());
    for b in 0..analytic.len() {
        let len = model.block(b).len();
        assert_eq!(
            analytic[b].len(),
            len,
            "block '{}' shape mismatch",
            names[b]
        );
        let stride = match max_per_block {
            Some(k) if k < len => len.div_ceil(k),
            _ => 1,
        };
        let mut diff_sq = 0.0;
        let mut a_sq = 0.0;
        let mut n_sq = 0.0;
        let mut checked = 0;
        let mut idx = 0;
        while idx < len {
            let old = model.block(b).data()[idx];
            model.block_mut(b).data_mut()[idx] = old + h;
            let plus = loss(model);
            model.block_mut(b).data_mut()[idx] = old - h;
            let minus = loss(model);
            model.block_mut(b).data_mut()[idx] = old;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[b].data()[idx];
            diff_sq += (a - numeric) * (a - numeric);
            a_sq += a * a;
            n_sq += numeric * numeric;
            checked += 1;
            idx += stride;
        }
        let denom = a_sq.sqrt().max(n_sq.sqrt());
        let rel_error = if denom == 0.0 {
            0.0
        } else {
            diff_sq.sqrt() / denom
        };
        blocks.push(BlockCheck {
            name: names[b].clone(),
            checked,
            analytic_norm: a_sq.sqrt(),
            numeric_norm: n_sq.sqrt(),
            rel_error,
        });
    }
    GradCheckReport { blocks, step: h }
}
