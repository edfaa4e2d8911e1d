//! Dense linear algebra, activations, the seeded generator and a
//! central-difference gradient oracle.
//!
//! Everything runs in `f64`. Vectors are plain `Vec<f64>` / `&[f64]`;
//! matrices are row-major [`Matrix`] values.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Activation and bias vectors.
pub type Vector = Vec<f64>;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!(
                    "{rows}x{cols} needs {} values, got {}",
                    rows * cols,
                    data.len()
                ),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += self · x`. Shapes are the caller's responsibility.
    pub(crate) fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o += dot(self.row(r), x);
        }
    }

    /// `out += selfᵀ · v`.
    pub(crate) fn matvec_t_acc(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += vr * w;
            }
        }
    }

    /// `self += a · bᵀ`.
    pub(crate) fn outer_acc(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        let cols = self.cols;
        for (r, &ar) in a.iter().enumerate() {
            if ar == 0.0 {
                continue;
            }
            for (w, bc) in self.data[r * cols..(r + 1) * cols].iter_mut().zip(b) {
                *w += ar * bc;
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `W·x + b`.
pub fn affine(w: &Matrix, x: &[f64], b: &[f64]) -> Result<Vector> {
    if w.cols != x.len() || w.rows != b.len() {
        return Err(Error::shape(
            "affine",
            format!(
                "W is {}x{}, x has dim {}, b has dim {}",
                w.rows,
                w.cols,
                x.len(),
                b.len()
            ),
        ));
    }
    let mut out = b.to_vec();
    w.matvec_acc(x, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise logistic function.
pub fn sigmoid(x: &[f64]) -> Vector {
    x.iter().map(|&v| sigmoid_scalar(v)).collect()
}

/// Elementwise hyperbolic tangent.
pub fn tanh_act(x: &[f64]) -> Vector {
    x.iter().map(|v| v.tanh()).collect()
}

/// Softmax with max-subtraction. Returns an empty vector for empty input.
pub fn softmax(v: &[f64]) -> Vector {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vector = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// Deterministic generator used on every reproducibility-sensitive path.
///
/// The stream is ChaCha with 8 rounds, seeded through `seed_from_u64`
/// (a PCG32-based key expansion fixed by `rand_core`). Floats are built
/// from the top 53 bits of one `u64` draw, and bounded integers use
/// rejection sampling, so results do not depend on any external sampling
/// code. Independent sub-streams of one seed are selected with
/// [`SeededRng::with_stream`].
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Same key as `new(seed)`, but a distinct ChaCha stream.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`. Requires `lo < hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo < hi);
        loop {
            let v = lo + (hi - lo) * self.next_f64();
            // rounding can land exactly on `hi`
            if v < hi {
                return v;
            }
        }
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let reject = (u64::MAX % n).wrapping_add(1) % n;
        let limit = u64::MAX - reject.wrapping_sub(1);
        loop {
            let x = self.next_u64();
            if reject == 0 || x < limit {
                return (x % n) as usize;
            }
        }
    }

    /// `true` with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// `rows × cols` matrix with entries uniform in `[lo, hi)`, filled in
/// row-major order.
pub fn seeded_uniform(
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
    rng: &mut SeededRng,
) -> Result<Matrix> {
    check_range(lo, hi)?;
    let data = (0..rows * cols).map(|_| rng.uniform(lo, hi)).collect();
    Ok(Matrix { rows, cols, data })
}

pub(crate) fn check_range(lo: f64, hi: f64) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::invalid(format!(
            "uniform range requires finite lo < hi, got [{lo}, {hi})"
        )));
    }
    Ok(())
}

/// Central differences `(f(θ+εe_k) − f(θ−εe_k)) / 2ε` for every coordinate.
pub fn finite_difference_grad<F>(mut f: F, theta: &[f64], eps: f64) -> Result<Vector>
where
    F: FnMut(&[f64]) -> f64,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let mut point = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        let orig = point[k];
        point[k] = orig + eps;
        let plus = f(&point);
        point[k] = orig - eps;
        let minus = f(&point);
        point[k] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective at coordinate {k}: f(+)={plus}, f(-)={minus}"
            )));
        }
        grad.push((plus - minus) / (2.0 * eps));
    }
    Ok(grad)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_affine(w: &Matrix, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.rows()];
        for r in 0..w.rows() {
            let mut acc = 0.0;
            for c in 0..w.cols() {
                acc += w.get(r, c) * x[c];
            }
            out[r] = acc + b[r];
        }
        out
    }

    #[test]
    fn affine_identity() {
        let out = affine(&Matrix::identity(2), &[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_eq!(out, vec![3.0, 4.0]);
    }

    #[test]
    fn affine_row_sum() {
        let w = Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        assert_eq!(affine(&w, &[2.0, 5.0], &[-7.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn affine_shape_error_names_shapes() {
        let err = affine(&Matrix::zeros(2, 3), &[1.0, 2.0], &[0.0, 0.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("dim 2"), "{msg}");
    }

    #[test]
    fn affine_matches_scalar_loop_4x3() {
        let mut rng = SeededRng::new(7);
        let w = seeded_uniform(4, 3, -1.0, 1.0, &mut rng).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let fast = affine(&w, &x, &b).unwrap();
        for (a, e) in fast.iter().zip(naive_affine(&w, &x, &b)) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(&[0.0]), vec![0.5]);
        let s = sigmoid(&[1.0, -1.0]);
        assert!((s[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((s[1] - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert!((s[0] + s[1] - 1.0).abs() < 1e-12);
        let big = sigmoid(&[1000.0, -1000.0]);
        assert!((big[0] - 1.0).abs() < 1e-12);
        assert!(big[1] >= 0.0 && big[1].is_finite());
    }

    #[test]
    fn tanh_values() {
        assert_eq!(tanh_act(&[0.0]), vec![0.0]);
        assert!((tanh_act(&[1.0])[0] - 0.761_594_155_955_764_9).abs() < 1e-12);
        let t = tanh_act(&[0.3, -0.3]);
        assert_eq!(t[0], -t[1]);
    }

    #[test]
    fn softmax_cases() {
        let s = softmax(&[0.0, 0.0, 0.0]);
        for v in s {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let c = 4.2;
        let s = softmax(&[c, c + 2f64.ln()]);
        assert!((s[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((s[1] - 2.0 / 3.0).abs() < 1e-12);
        let s = softmax(&[1000.0, 0.0]);
        assert!((s[0] - 1.0).abs() < 1e-12 && s[1] >= 0.0);
    }

    #[test]
    fn seeded_uniform_rejects_empty_range() {
        let mut rng = SeededRng::new(1);
        assert!(seeded_uniform(2, 2, 0.1, 0.1, &mut rng).is_err());
        assert!(seeded_uniform(2, 2, 0.2, 0.1, &mut rng).is_err());
    }

    #[test]
    fn seeded_uniform_is_bit_reproducible() {
        let a = seeded_uniform(5, 7, -0.1, 0.1, &mut SeededRng::new(99)).unwrap();
        let b = seeded_uniform(5, 7, -0.1, 0.1, &mut SeededRng::new(99)).unwrap();
        let abits: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
        let bbits: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(abits, bbits);
    }

    #[test]
    fn seeded_uniform_mean_and_range() {
        let m = seeded_uniform(100, 100, -0.1, 0.1, &mut SeededRng::new(3)).unwrap();
        assert!(m.data().iter().all(|&v| (-0.1..0.1).contains(&v)));
        let mean = m.data().iter().sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn streams_differ() {
        let mut a = SeededRng::with_stream(5, 0);
        let mut b = SeededRng::with_stream(5, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = SeededRng::new(11);
        let mut seen = [0usize; 7];
        for _ in 0..7000 {
            seen[rng.below(7)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
        assert_eq!(rng.below(1), 0);
    }

    #[test]
    fn fd_quadratic_and_constant() {
        let g = finite_difference_grad(|t| t[0] * t[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-8);
        let g = finite_difference_grad(|_| 2.5, &[1.0, -2.0, 0.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn fd_rejects_bad_input() {
        assert!(finite_difference_grad(|t| t[0], &[1.0], 0.0).is_err());
        assert!(finite_difference_grad(|_| f64::NAN, &[1.0], 1e-5).is_err());
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(v in proptest::collection::vec(-700.0f64..700.0, 1..200)) {
            let s = softmax(&v);
            let sum: f64 = s.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(s.iter().all(|&p| p >= 0.0));
        }

        #[test]
        fn sigmoid_complement(x in -800.0f64..800.0) {
            let s = sigmoid(&[x, -x]);
            prop_assert!((s[0] + s[1] - 1.0).abs() < 1e-12);
        }

        #[test]
        fn affine_agrees_with_naive(rows in 1usize..64, cols in 1usize..64, seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let w = seeded_uniform(rows, cols, -1.0, 1.0, &mut rng).unwrap();
            let x: Vec<f64> = (0..cols).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let b: Vec<f64> = (0..rows).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let fast = affine(&w, &x, &b).unwrap();
            for (a, e) in fast.iter().zip(naive_affine(&w, &x, &b)) {
                prop_assert!((a - e).abs() < 1e-12);
            }
        }
    }
}
