//! Dense row-major 64-bit tensors and the handful of matrix ops the
//! networks need. Shapes are validated with assertions: a mismatch is a
//! programming error, not a recoverable condition.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use rand::Rng;

static THREADS: AtomicUsize = AtomicUsize::new(1);
static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();

/// Sets the worker count for batched matrix products. `1` (the default)
/// keeps everything on the calling thread. The pool is created on the
/// first call with `n > 1`; later calls cannot resize it.
///
/// All parallel paths split work by output row with a fixed per-row
/// summation order, so results are bit-identical for any thread count.
pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::SeqCst);
    if n > 1 {
        let _ = POOL.get_or_init(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("failed to build worker pool")
        });
    }
}

pub fn threads() -> usize {
    THREADS.load(Ordering::SeqCst)
}

/// Dense n-dimensional array, row-major, `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    /// Uniform Glorot initialization: ±sqrt(6 / (fan_in + fan_out)).
    pub fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * bound)
            .collect();
        Tensor {
            shape: vec![rows, cols],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "rows() on non-matrix tensor");
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "cols() on non-matrix tensor");
        self.shape[1]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    /// Same data, new shape (element count must match).
    pub fn reshape(mut self, shape: &[usize]) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            self.data.len(),
            "reshape to {:?} changes element count",
            shape
        );
        self.shape = shape.to_vec();
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn has_non_finite(&self) -> bool {
        self.data.iter().any(|x| !x.is_finite())
    }

    pub fn add_scaled(&mut self, other: &Tensor, scale: f64) {
        assert_eq!(self.shape, other.shape, "add_scaled shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }
}

fn matmul_rows(out: &mut [f64], a: &[f64], b: &Tensor, k: usize, m: usize) {
    // out is a chunk of rows; a covers the same rows of the left operand.
    for (out_row, a_row) in out.chunks_mut(m).zip(a.chunks(k)) {
        out_row.iter_mut().for_each(|x| *x = 0.0);
        for (kk, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b.data[kk * m..(kk + 1) * m];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

fn par_over_rows(out: &mut Tensor, a: &Tensor, b: &Tensor, k: usize, m: usize) {
    use rayon::prelude::*;
    const CHUNK: usize = 64;
    let pool = POOL.get();
    match pool {
        Some(pool) if threads() > 1 && out.rows() >= 2 * CHUNK => pool.install(|| {
            out.data
                .par_chunks_mut(CHUNK * m)
                .zip(a.data.par_chunks(CHUNK * k))
                .for_each(|(oc, ac)| matmul_rows(oc, ac, b, k, m));
        }),
        _ => matmul_rows(&mut out.data, &a.data, b, k, m),
    }
}

/// `a (r×k) · b (k×m) -> r×m`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (r, k) = (a.rows(), a.cols());
    let (k2, m) = (b.rows(), b.cols());
    assert_eq!(k, k2, "matmul inner dimension mismatch: {k} vs {k2}");
    let mut out = Tensor::zeros(&[r, m]);
    par_over_rows(&mut out, a, b, k, m);
    out
}

/// `aᵀ (k×r) · b (r×m) -> k×m`, with `a` given as r×k. Used for weight
/// gradients (`xᵀ · d_out`).
pub fn matmul_at_b(a: &Tensor, b: &Tensor) -> Tensor {
    let (r, k) = (a.rows(), a.cols());
    let (r2, m) = (b.rows(), b.cols());
    assert_eq!(r, r2, "matmul_at_b row mismatch: {r} vs {r2}");
    let mut out = Tensor::zeros(&[k, m]);
    // Accumulate row by row of the batch; per-element summation order is
    // the batch order regardless of threading (this path stays serial).
    for i in 0..r {
        let a_row = a.row(i);
        let b_row = b.row(i);
        for (kk, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let out_row = &mut out.data[kk * m..(kk + 1) * m];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a (r×m) · bᵀ (m×k) -> r×k`, with `b` given as k×m. Used for input
/// gradients (`d_out · wᵀ`).
pub fn matmul_a_bt(a: &Tensor, b: &Tensor) -> Tensor {
    let (r, m) = (a.rows(), a.cols());
    let (k, m2) = (b.rows(), b.cols());
    assert_eq!(m, m2, "matmul_a_bt inner dimension mismatch: {m} vs {m2}");
    let mut out = Tensor::zeros(&[r, k]);
    for i in 0..r {
        let a_row = a.row(i);
        let out_row = &mut out.data[i * k..(i + 1) * k];
        for (kk, o) in out_row.iter_mut().enumerate() {
            let b_row = &b.data[kk * m..(kk + 1) * m];
            let mut acc = 0.0;
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            *o = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor::from_vec(&[3, 2], vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = matmul(&a, &b);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let a = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 5.0, -6.0]);
        let b = Tensor::from_vec(&[2, 4], (0..8).map(|i| i as f64).collect());
        // aᵀ·b via matmul_at_b vs building aᵀ by hand.
        let mut at = Tensor::zeros(&[3, 2]);
        for i in 0..2 {
            for j in 0..3 {
                at.row_mut(j)[i] = a.row(i)[j];
            }
        }
        assert_eq!(matmul_at_b(&a, &b), matmul(&at, &b));

        let w = Tensor::from_vec(&[3, 4], (0..12).map(|i| i as f64 * 0.5).collect());
        let mut wt = Tensor::zeros(&[4, 3]);
        for i in 0..3 {
            for j in 0..4 {
                wt.row_mut(j)[i] = w.row(i)[j];
            }
        }
        assert_eq!(matmul_a_bt(&b, &w), matmul(&b, &wt));
    }

    #[test]
    #[should_panic(expected = "inner dimension mismatch")]
    fn matmul_shape_mismatch_panics() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[4, 2]);
        let _ = matmul(&a, &b);
    }
}
