//! Dense tensor substrate: arbitrary-rank complex arrays with row-major flat
//! storage, pairwise contraction, and SVD splitting.
//!
//! Tensors are immutable after construction; every operation returns a new
//! value. No implicit broadcasting.

use crate::error::{Error, Result};
use ndarray::prelude::*;
use ndarray_linalg::SVDInto;
use num_complex::Complex64 as C64;

mod cblas {
    // Row-major cblas_zgemm/dgemm from the system OpenBLAS.
    pub const ROW_MAJOR: i32 = 101;
    pub const NO_TRANS: i32 = 111;
    extern "C" {
        pub fn cblas_zgemm(
            layout: i32,
            transa: i32,
            transb: i32,
            m: i32,
            n: i32,
            k: i32,
            alpha: *const f64,
            a: *const f64,
            lda: i32,
            b: *const f64,
            ldb: i32,
            beta: *const f64,
            c: *mut f64,
            ldc: i32,
        );
        pub fn cblas_dgemm(
            layout: i32,
            transa: i32,
            transb: i32,
            m: i32,
            n: i32,
            k: i32,
            alpha: f64,
            a: *const f64,
            lda: i32,
            b: *const f64,
            ldb: i32,
            beta: f64,
            c: *mut f64,
            ldc: i32,
        );
    }
}

/// C = A (m x k) * B (k x n), all row-major complex.
pub fn zgemm(m: usize, k: usize, n: usize, a: &[C64], b: &[C64], c: &mut [C64]) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    let one = [1.0f64, 0.0];
    let zero = [0.0f64, 0.0];
    unsafe {
        cblas::cblas_zgemm(
            cblas::ROW_MAJOR,
            cblas::NO_TRANS,
            cblas::NO_TRANS,
            m as i32,
            n as i32,
            k as i32,
            one.as_ptr(),
            a.as_ptr() as *const f64,
            k as i32,
            b.as_ptr() as *const f64,
            n as i32,
            zero.as_ptr(),
            c.as_mut_ptr() as *mut f64,
            n as i32,
        );
    }
}

/// C = A (m x k) * B (k x n), all row-major real.
pub fn dgemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    unsafe {
        cblas::cblas_dgemm(
            cblas::ROW_MAJOR,
            cblas::NO_TRANS,
            cblas::NO_TRANS,
            m as i32,
            n as i32,
            k as i32,
            1.0,
            a.as_ptr(),
            k as i32,
            b.as_ptr(),
            n as i32,
            0.0,
            c.as_mut_ptr(),
            n as i32,
        );
    }
}

/// Arbitrary-rank complex tensor in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("shape entries must be >= 1".into()));
        }
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match shape {:?} (product {})",
                data.len(),
                shape,
                len
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len: usize = shape.iter().product();
        Self {
            shape,
            data: vec![C64::new(0.0, 0.0); len],
        }
    }

    pub fn from_real(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn scalar(value: C64) -> Self {
        Self {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of a rank-0 tensor.
    pub fn scalar_value(&self) -> C64 {
        debug_assert_eq!(self.len(), 1);
        self.data[0]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag_abs(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Drops imaginary parts. Callers assert the imaginary dust is below
    /// tolerance first.
    pub fn realize(mut self) -> Self {
        for z in &mut self.data {
            z.im = 0.0;
        }
        self
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.shape[i + 1];
        }
        strides
    }

    /// Returns a copy with axes reordered so that new axis i is old axis
    /// `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.shape.len() {
            return Err(Error::InvalidArgument(format!(
                "permutation {:?} does not match rank {}",
                perm,
                self.shape.len()
            )));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::InvalidArgument(format!("invalid permutation {:?}", perm)));
            }
            seen[p] = true;
        }
        // identity fast path
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let old_strides = self.strides();
        let perm_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut out = vec![C64::new(0.0, 0.0); self.data.len()];
        let rank = new_shape.len();
        let mut idx = vec![0usize; rank];
        let mut src = 0usize;
        for slot in out.iter_mut() {
            *slot = self.data[src];
            // odometer increment over the new index order
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                src += perm_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                src -= perm_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self {
            shape: new_shape,
            data: out,
        })
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        let strides = self.strides();
        let flat: usize = index.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.data[flat]
    }

    pub fn set(&mut self, index: &[usize], value: C64) {
        let strides = self.strides();
        let flat: usize = index.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.data[flat] = value;
    }
}

/// Sum over paired axes of `a` and `b`. The result carries the uncontracted
/// axes of `a` followed by those of `b`.
pub fn contract(
    a: &DenseTensor,
    axes_a: &[usize],
    b: &DenseTensor,
    axes_b: &[usize],
) -> Result<DenseTensor> {
    if axes_a.len() != axes_b.len() {
        return Err(Error::InvalidArgument(
            "contract: axis lists must have equal length".into(),
        ));
    }
    for (&ia, &ib) in axes_a.iter().zip(axes_b) {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(Error::InvalidArgument("contract: axis out of range".into()));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::ShapeMismatch(format!(
                "contract: axis {} of a (dim {}) vs axis {} of b (dim {})",
                ia, a.shape[ia], ib, b.shape[ib]
            )));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|i| !axes_a.contains(i)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|i| !axes_b.contains(i)).collect();

    let perm_a: Vec<usize> = free_a.iter().chain(axes_a.iter()).copied().collect();
    let perm_b: Vec<usize> = axes_b.iter().chain(free_b.iter()).copied().collect();
    let at = a.permute(&perm_a)?;
    let bt = b.permute(&perm_b)?;

    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = axes_a.iter().map(|&i| a.shape[i]).product();
    let n: usize = free_b.iter().map(|&i| b.shape[i]).product();

    let mut out = vec![C64::new(0.0, 0.0); m * n];
    zgemm(m, k, n, at.data(), bt.data(), &mut out);

    let mut shape: Vec<usize> = free_a.iter().map(|&i| a.shape[i]).collect();
    shape.extend(free_b.iter().map(|&i| b.shape[i]));
    DenseTensor::new(shape, out)
}

/// Result of splitting a tensor across a bipartition of its axes.
pub struct SvdSplit {
    /// Left factor with shape `[left axes..., kept]`.
    pub u: DenseTensor,
    /// Kept singular values, descending.
    pub s: Vec<f64>,
    /// Right factor with shape `[kept, right axes...]`; `u . diag(s) . vt`
    /// reconstructs the input up to the discarded weight.
    pub vt: DenseTensor,
    /// Discarded singular values, descending.
    pub discarded: Vec<f64>,
}

/// Splits `t` across `left_axes | rest` by singular value decomposition,
/// keeping at most `max_bond` values and only values strictly above `cutoff`.
/// At least one value is always kept. Ties are resolved by keeping earlier
/// columns, so results are deterministic for a fixed input.
pub fn svd_split(
    t: &DenseTensor,
    left_axes: &[usize],
    max_bond: Option<usize>,
    cutoff: f64,
) -> Result<SvdSplit> {
    if left_axes.is_empty() || left_axes.len() >= t.rank() {
        return Err(Error::InvalidArgument(
            "svd_split: left axes must be a proper nonempty subset".into(),
        ));
    }
    if cutoff < 0.0 {
        return Err(Error::InvalidArgument("svd_split: cutoff must be >= 0".into()));
    }
    let right_axes: Vec<usize> = (0..t.rank()).filter(|i| !left_axes.contains(i)).collect();
    let perm: Vec<usize> = left_axes.iter().chain(right_axes.iter()).copied().collect();
    let tp = t.permute(&perm)?;
    let left_shape: Vec<usize> = left_axes.iter().map(|&i| t.shape[i]).collect();
    let right_shape: Vec<usize> = right_axes.iter().map(|&i| t.shape[i]).collect();
    let m: usize = left_shape.iter().product();
    let n: usize = right_shape.iter().product();

    let mat = Array2::from_shape_vec((m, n), tp.into_data())
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let (u, s, vt) = mat
        .svd_into(true, true)
        .map_err(|e| Error::Numerical(format!("LAPACK svd failed: {}", e)))?;
    let u = u.expect("svd with u requested");
    let vt = vt.expect("svd with vt requested");

    let kmax = s.len();
    let cap = max_bond.unwrap_or(kmax).min(kmax);
    let mut keep = 0usize;
    for (i, &sv) in s.iter().enumerate() {
        if i >= cap || sv <= cutoff {
            break;
        }
        keep += 1;
    }
    if keep == 0 {
        keep = 1.min(kmax);
    }
    let discarded: Vec<f64> = s.iter().skip(keep).copied().collect();
    let kept: Vec<f64> = s.iter().take(keep).copied().collect();

    let mut u_data = Vec::with_capacity(m * keep);
    for row in 0..m {
        for col in 0..keep {
            u_data.push(u[(row, col)]);
        }
    }
    let mut v_data = Vec::with_capacity(keep * n);
    for row in 0..keep {
        for col in 0..n {
            v_data.push(vt[(row, col)]);
        }
    }

    let mut u_shape = left_shape;
    u_shape.push(keep);
    let mut v_shape = vec![keep];
    v_shape.extend(right_shape);

    Ok(SvdSplit {
        u: DenseTensor::new(u_shape, u_data)?,
        s: kept,
        vt: DenseTensor::new(v_shape, v_data)?,
        discarded,
    })
}

/// Multiplies singular values into the rows of `vt`.
pub fn scale_rows(vt: &DenseTensor, s: &[f64]) -> DenseTensor {
    let mut out = vt.clone();
    let ncols = out.len() / s.len();
    for (i, &sv) in s.iter().enumerate() {
        for z in &mut out.data_mut()[i * ncols..(i + 1) * ncols] {
            *z *= sv;
        }
    }
    out
}

/// Multiplies singular values into the trailing axis of `u`.
pub fn scale_cols(u: &DenseTensor, s: &[f64]) -> DenseTensor {
    let mut out = u.clone();
    let k = s.len();
    for chunk in out.data_mut().chunks_mut(k) {
        for (z, &sv) in chunk.iter_mut().zip(s) {
            *z *= sv;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_tensor(shape: &[usize], rng: &mut ChaCha12Rng) -> DenseTensor {
        let len = shape.iter().product();
        let data = (0..len)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        DenseTensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn identity_contract_vector() {
        let id = DenseTensor::from_real(vec![2, 2], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let v = DenseTensor::from_real(vec![2], &[1.0, 0.0]).unwrap();
        let out = contract(&id, &[1], &v, &[0]).unwrap();
        assert_eq!(out.shape(), &[2]);
        assert_abs_diff_eq!(out.data()[0].re, 1.0);
        assert_abs_diff_eq!(out.data()[1].re, 0.0);
    }

    #[test]
    fn dot_product() {
        let a = DenseTensor::from_real(vec![2], &[1.0, 2.0]).unwrap();
        let b = DenseTensor::from_real(vec![2], &[3.0, 4.0]).unwrap();
        let out = contract(&a, &[0], &b, &[0]).unwrap();
        assert_eq!(out.rank(), 0);
        assert_abs_diff_eq!(out.scalar_value().re, 11.0, epsilon = 1e-14);
    }

    #[test]
    fn contract_matches_loop_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let a = random_tensor(&[3, 4, 5], &mut rng);
        let b = random_tensor(&[5, 4], &mut rng);
        // contract a axes (2,1) with b axes (0,1): out[i] = sum_{j,k} a[i,j,k] b[k,j]
        let out = contract(&a, &[2, 1], &b, &[0, 1]).unwrap();
        assert_eq!(out.shape(), &[3]);
        for i in 0..3 {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..4 {
                for k in 0..5 {
                    acc += a.get(&[i, j, k]) * b.get(&[k, j]);
                }
            }
            assert!((acc - out.get(&[i])).norm() < 1e-12);
        }
    }

    #[test]
    fn contract_dimension_mismatch() {
        let a = DenseTensor::zeros(vec![2, 3]);
        let b = DenseTensor::zeros(vec![2, 2]);
        assert!(contract(&a, &[1], &b, &[0]).is_err());
    }

    #[test]
    fn svd_rank_one() {
        let t = DenseTensor::from_real(vec![2, 2], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let split = svd_split(&t, &[0], None, 1e-12).unwrap();
        assert_eq!(split.s.len(), 1);
        assert_abs_diff_eq!(split.s[0], 1.0, epsilon = 1e-12);
        assert!(split.discarded.is_empty() || split.discarded.iter().all(|&d| d < 1e-12));
    }

    #[test]
    fn svd_diagonal_truncation() {
        let t = DenseTensor::from_real(vec![3, 3], &[3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0])
            .unwrap();
        let split = svd_split(&t, &[0], Some(2), 0.0).unwrap();
        assert_eq!(split.s, vec![3.0, 2.0]);
        assert_eq!(split.discarded, vec![1.0]);
    }

    #[test]
    fn svd_reconstruction_error_is_discarded_weight() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let t = random_tensor(&[8, 8], &mut rng);
        let split = svd_split(&t, &[0], Some(5), 0.0).unwrap();
        let usv = contract(&scale_cols(&split.u, &split.s), &[1], &split.vt, &[0]).unwrap();
        let mut err2 = 0.0;
        for (x, y) in t.data().iter().zip(usv.data()) {
            err2 += (x - y).norm_sqr();
        }
        let disc2: f64 = split.discarded.iter().map(|d| d * d).sum();
        assert_abs_diff_eq!(err2.sqrt(), disc2.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn permute_roundtrip() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let t = random_tensor(&[2, 3, 4], &mut rng);
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    assert_eq!(t.get(&[i, j, k]), p.get(&[k, i, j]));
                }
            }
        }
    }

    #[test]
    fn zero_tensor_split_keeps_one() {
        let t = DenseTensor::zeros(vec![2, 2]);
        let split = svd_split(&t, &[0], None, 1e-12).unwrap();
        assert_eq!(split.s.len(), 1);
        assert_abs_diff_eq!(split.s[0], 0.0, epsilon = 1e-300);
    }

    #[test]
    fn scalar_shape_checks() {
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::new(vec![2], vec![c(1.0)]).is_err());
    }
}
