//! Dense ReLU networks over column-major mini-batches.
//!
//! Inputs and activations are `features x batch` matrices. All parameters
//! live in one flat vector (per layer: weight `out x in` column-major, then
//! bias), which keeps the optimizer, Polyak averaging and checkpointing
//! trivial.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DMatrixView};
use rand::Rng;

use crate::error::{Error, Result};

/// `C = op(A) op(B) + beta C` for column-major slices, where `op(A)` is
/// `m x k`, `op(B)` is `k x n` and `C` is `m x n`. A transposed operand is
/// stored untransposed (`k x m` or `n x k`).
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (k as isize, 1) } else { (1, m as isize) };
    let (rsb, csb) = if b_t { (n as isize, 1) } else { (1, k as isize) };
    // SAFETY: the asserts above bound every index the strides can reach
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), 1, m as isize,
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    offsets: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `acts[0]` is the input, `acts[l]` the output of layer `l` (post-ReLU
    /// for hidden layers, linear for the last).
    pub acts: Vec<DMatrix<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.acts.last().expect("non-empty")
    }
}

impl Mlp {
    /// Network with every parameter zero.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|w| *w == 0) {
            return Err(Error::Config(format!("invalid layer widths {widths:?}")));
        }
        let mut offsets = vec![0];
        for l in 0..widths.len() - 1 {
            let last = *offsets.last().unwrap();
            offsets.push(last + widths[l + 1] * widths[l] + widths[l + 1]);
        }
        let n = *offsets.last().unwrap();
        Ok(Self {
            widths: widths.to_vec(),
            offsets,
            params: vec![0.0; n],
        })
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        for l in 0..widths.len() - 1 {
            let bound = 1.0 / (widths[l] as f64).sqrt();
            for v in &mut net.params[net.offsets[l]..net.offsets[l + 1]] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn split(&self, l: usize) -> (usize, usize, usize) {
        let (i, o) = (self.widths[l], self.widths[l + 1]);
        (self.offsets[l], self.offsets[l] + o * i, self.offsets[l + 1])
    }

    pub fn weight(&self, l: usize) -> DMatrixView<'_, f64> {
        let (a, b, _) = self.split(l);
        DMatrixView::from_slice(&self.params[a..b], self.widths[l + 1], self.widths[l])
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let (_, b, c) = self.split(l);
        &self.params[b..c]
    }

    pub fn forward_cached(&self, x: &DMatrix<f64>) -> Result<MlpCache> {
        if x.nrows() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.nrows(),
            });
        }
        let mut acts = Vec::with_capacity(self.widths.len());
        acts.push(x.clone());
        for l in 0..self.layers() {
            let input = acts.last().unwrap();
            let (i, o) = (self.widths[l], self.widths[l + 1]);
            let mut z = DMatrix::zeros(o, input.ncols());
            let (wa, _, _) = self.split(l);
            gemm(o, i, input.ncols(), &self.params[wa..], false, input.as_slice(), false, 0.0, z.as_mut_slice());
            let b = self.bias(l);
            let hidden = l + 1 < self.layers();
            for col in z.as_mut_slice().chunks_exact_mut(b.len()) {
                for (v, bi) in col.iter_mut().zip(b) {
                    *v += bi;
                    if hidden && *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            acts.push(z);
        }
        Ok(MlpCache { acts })
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.forward_cached(x)?.acts.pop().unwrap())
    }

    /// Single-sample forward.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = DMatrix::from_column_slice(x.len(), 1, x);
        Ok(self.forward(&m)?.as_slice().to_vec())
    }

    /// Reverse pass for output cotangent `dy`. Accumulates parameter
    /// gradients into `grads` when given; returns the input cotangent.
    pub fn backward(
        &self,
        cache: &MlpCache,
        dy: &DMatrix<f64>,
        mut grads: Option<&mut [f64]>,
    ) -> DMatrix<f64> {
        let mut delta = dy.clone();
        for l in (0..self.layers()).rev() {
            if l + 1 < self.layers() {
                // ReLU mask from the stored post-activation
                for (d, a) in delta.as_mut_slice().iter_mut().zip(cache.acts[l + 1].as_slice()) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &cache.acts[l];
            if let Some(g) = grads.as_deref_mut() {
                let (a, b, c) = self.split(l);
                let (o, i) = (self.widths[l + 1], self.widths[l]);
                gemm(o, delta.ncols(), i, delta.as_slice(), false, input.as_slice(), true, 1.0, &mut g[a..b]);
                let gb = &mut g[b..c];
                for col in delta.as_slice().chunks_exact(o) {
                    for (acc, v) in gb.iter_mut().zip(col) {
                        *acc += v;
                    }
                }
            }
            let (i, o) = (self.widths[l], self.widths[l + 1]);
            let mut dx = DMatrix::zeros(i, delta.ncols());
            gemm(i, o, delta.ncols(), &self.params[self.offsets[l]..], true, delta.as_slice(), false, 0.0, dx.as_mut_slice());
            delta = dx;
        }
        delta
    }

    /// Flat checkpoint: magic `WCSEENN1`, `u32` layer count `n`, `n` `u32`
    /// widths, then every parameter as little-endian `f64` in storage order.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"WCSEENN1")?;
        w.write_all(&(self.widths.len() as u32).to_le_bytes())?;
        for width in &self.widths {
            w.write_all(&(*width as u32).to_le_bytes())?;
        }
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != b"WCSEENN1" {
            return Err(bad("bad magic"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(|_| bad("truncated header"))?;
        let n = u32::from_le_bytes(b4) as usize;
        if !(2..=64).contains(&n) {
            return Err(bad("implausible layer count"));
        }
        let mut widths = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b4).map_err(|_| bad("truncated widths"))?;
            widths.push(u32::from_le_bytes(b4) as usize);
        }
        let mut net = Self::zeros(&widths).map_err(|e| bad(&e.to_string()))?;
        let mut b8 = [0u8; 8];
        for p in net.params.iter_mut() {
            r.read_exact(&mut b8).map_err(|_| bad("truncated parameters"))?;
            *p = f64::from_le_bytes(b8);
        }
        Ok(net)
    }
}
