//! Pauli algebra: matrices, strings, transfer matrices of channels, and a
//! dense engine for operators represented by their Pauli coefficients.
//!
//! An operator M on n qubits is written M = sum_i lambda_i sigma_i with
//! lambda_i = Tr[M sigma_i] / 2^n over index vectors i in {0,1,2,3}^n
//! (0=I, 1=X, 2=Y, 3=Z). `PauliVec` stores the lambda_i as a flat real array
//! in row-major site order (site 0 most significant). Unitary conjugation and
//! the two-qubit depolarizing channel act linearly on this array through
//! their (real) Pauli transfer matrices.

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use num_complex::Complex64 as C64;

pub const PAULI_LABELS: [char; 4] = ['I', 'X', 'Y', 'Z'];

pub fn pauli_matrix(idx: usize) -> [[C64; 2]; 2] {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match idx {
        0 => [[l, o], [o, l]],
        1 => [[o, l], [l, o]],
        2 => [[o, -i], [i, o]],
        3 => [[l, o], [o, -l]],
        _ => panic!("pauli index out of range"),
    }
}

/// Parses strings like "IIZ" into index vectors.
pub fn parse_pauli_string(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            'I' => Ok(0),
            'X' => Ok(1),
            'Y' => Ok(2),
            'Z' => Ok(3),
            other => Err(Error::Parse(format!("invalid Pauli letter '{}'", other))),
        })
        .collect()
}

pub fn pauli_string_label(idx: &[u8]) -> String {
    idx.iter().map(|&i| PAULI_LABELS[i as usize]).collect()
}

/// Dense 2^n x 2^n matrix of a Pauli string (row-major DenseTensor).
pub fn pauli_string_dense(idx: &[u8]) -> DenseTensor {
    let n = idx.len();
    let dim = 1usize << n;
    let mut out = DenseTensor::zeros(vec![dim, dim]);
    for row in 0..dim {
        let mut col = 0usize;
        let mut val = C64::new(1.0, 0.0);
        for (s, &p) in idx.iter().enumerate() {
            let bit = (row >> (n - 1 - s)) & 1;
            let m = pauli_matrix(p as usize);
            // find the unique nonzero column of row `bit`
            let (cb, v) = if m[bit][0].norm() > 0.0 {
                (0usize, m[bit][0])
            } else {
                (1usize, m[bit][1])
            };
            col |= cb << (n - 1 - s);
            val *= v;
        }
        out.set(&[row, col], val);
    }
    out
}

/// Real 4x4 Pauli transfer matrix of conjugation by a single-qubit unitary:
/// T[a][b] = Re Tr[sigma_a U sigma_b U^dag] / 2.
pub fn ptm_1q(u: &[[C64; 2]; 2]) -> [[f64; 4]; 4] {
    let mut t = [[0.0; 4]; 4];
    for a in 0..4 {
        let sa = pauli_matrix(a);
        for b in 0..4 {
            let sb = pauli_matrix(b);
            // U sigma_b U^dag
            let mut usb = [[C64::new(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            usb[i][j] += u[i][k] * sb[k][l] * u[j][l].conj();
                        }
                    }
                }
            }
            let mut tr = C64::new(0.0, 0.0);
            for i in 0..2 {
                for j in 0..2 {
                    tr += sa[i][j] * usb[j][i];
                }
            }
            t[a][b] = tr.re / 2.0;
        }
    }
    t
}

/// Real 16x16 Pauli transfer matrix of conjugation by a two-qubit unitary
/// (row-major over fused indices a1*4+a2).
pub fn ptm_2q(u: &DenseTensor) -> Vec<f64> {
    debug_assert_eq!(u.shape(), &[4, 4]);
    let mut t = vec![0.0; 256];
    for a in 0..16 {
        let sa = two_qubit_pauli(a);
        for b in 0..16 {
            let sb = two_qubit_pauli(b);
            // U sigma_b U^dag
            let mut usb = [[C64::new(0.0, 0.0); 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    for k in 0..4 {
                        for l in 0..4 {
                            usb[i][j] += u.get(&[i, k]) * sb[k][l] * u.get(&[j, l]).conj();
                        }
                    }
                }
            }
            let mut tr = C64::new(0.0, 0.0);
            for i in 0..4 {
                for j in 0..4 {
                    tr += sa[i][j] * usb[j][i];
                }
            }
            t[a * 16 + b] = tr.re / 4.0;
        }
    }
    t
}

fn two_qubit_pauli(idx: usize) -> [[C64; 4]; 4] {
    let m1 = pauli_matrix(idx / 4);
    let m2 = pauli_matrix(idx % 4);
    let mut out = [[C64::new(0.0, 0.0); 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[i * 2 + k][j * 2 + l] = m1[i][j] * m2[k][l];
                }
            }
        }
    }
    out
}

/// Dense CNOT (control on first line).
pub fn cnot_dense() -> DenseTensor {
    let mut m = DenseTensor::zeros(vec![4, 4]);
    let one = C64::new(1.0, 0.0);
    m.set(&[0, 0], one);
    m.set(&[1, 1], one);
    m.set(&[2, 3], one);
    m.set(&[3, 2], one);
    m
}

/// PTM of the two-qubit depolarizing channel at rate gamma: identity on the
/// II component, uniform (1-gamma) damping elsewhere.
pub fn depolarizing_ptm(gamma: f64) -> Vec<f64> {
    let mut t = vec![0.0; 256];
    for a in 0..16 {
        t[a * 16 + a] = if a == 0 { 1.0 } else { 1.0 - gamma };
    }
    t
}

/// 16x16 product of two PTMs (row-major), a after b.
pub fn ptm_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; 256];
    for i in 0..16 {
        for k in 0..16 {
            let av = a[i * 16 + k];
            if av == 0.0 {
                continue;
            }
            for j in 0..16 {
                c[i * 16 + j] += av * b[k * 16 + j];
            }
        }
    }
    c
}

pub fn ptm_transpose16(a: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; 256];
    for i in 0..16 {
        for j in 0..16 {
            t[j * 16 + i] = a[i * 16 + j];
        }
    }
    t
}

/// Dense real vector of Pauli coefficients over n sites.
#[derive(Clone, Debug)]
pub struct PauliVec {
    pub n: usize,
    pub data: Vec<f64>,
}

impl PauliVec {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; 1usize << (2 * n)],
        }
    }

    /// Coefficients of a single Pauli string (lambda = 1 at that index).
    pub fn from_pauli_string(idx: &[u8]) -> Self {
        let n = idx.len();
        let mut v = Self::zeros(n);
        let mut flat = 0usize;
        for &i in idx {
            flat = flat * 4 + i as usize;
        }
        v.data[flat] = 1.0;
        v
    }

    /// Product operator with per-site coefficient 4-vectors.
    pub fn from_site_factors(factors: &[[f64; 4]]) -> Self {
        let n = factors.len();
        let mut data = vec![1.0];
        for f in factors {
            let mut next = vec![0.0; data.len() * 4];
            for (i, &x) in data.iter().enumerate() {
                for j in 0..4 {
                    next[i * 4 + j] = x * f[j];
                }
            }
            data = next;
        }
        Self { n, data }
    }

    /// Coefficients of |0..0><0..0| = prod (I + Z)/2.
    pub fn zero_projector(n: usize) -> Self {
        Self::from_site_factors(&vec![[0.5, 0.0, 0.0, 0.5]; n])
    }

    pub fn entry(&self, idx: &[u8]) -> f64 {
        let mut flat = 0usize;
        for &i in idx {
            flat = flat * 4 + i as usize;
        }
        self.data[flat]
    }

    /// Applies a real 4x4 matrix to the coefficients at one site.
    pub fn apply_1q(&mut self, site: usize, m: &[[f64; 4]; 4]) {
        let stride = 1usize << (2 * (self.n - 1 - site));
        let group = stride * 4;
        let data = &mut self.data;
        let mut base = 0;
        while base < data.len() {
            for lo in 0..stride {
                let i0 = base + lo;
                let x = [
                    data[i0],
                    data[i0 + stride],
                    data[i0 + 2 * stride],
                    data[i0 + 3 * stride],
                ];
                for r in 0..4 {
                    data[i0 + r * stride] =
                        m[r][0] * x[0] + m[r][1] * x[1] + m[r][2] * x[2] + m[r][3] * x[3];
                }
            }
            base += group;
        }
    }

    /// Applies a real 16x16 matrix to adjacent sites (site, site+1).
    pub fn apply_2q(&mut self, site: usize, m: &[f64]) {
        debug_assert_eq!(m.len(), 256);
        let stride = 1usize << (2 * (self.n - 2 - site));
        let group = stride * 16;
        let data = &mut self.data;
        let mut x = [0.0f64; 16];
        let mut base = 0;
        while base < data.len() {
            for lo in 0..stride {
                let i0 = base + lo;
                for (k, slot) in x.iter_mut().enumerate() {
                    *slot = data[i0 + k * stride];
                }
                for r in 0..16 {
                    let row = &m[r * 16..(r + 1) * 16];
                    let mut acc = 0.0;
                    for k in 0..16 {
                        acc += row[k] * x[k];
                    }
                    data[i0 + r * stride] = acc;
                }
            }
            base += group;
        }
    }

    /// Applies the (sparse) permutation-with-scale form of a 16x16 map:
    /// out[r] = scale[r] * in[src[r]]. Used for CNOT and noisy-CNOT transfer
    /// matrices, which have one nonzero per row.
    pub fn apply_2q_perm(&mut self, site: usize, src: &[usize; 16], scale: &[f64; 16]) {
        let stride = 1usize << (2 * (self.n - 2 - site));
        let group = stride * 16;
        let data = &mut self.data;
        let mut x = [0.0f64; 16];
        let mut base = 0;
        while base < data.len() {
            for lo in 0..stride {
                let i0 = base + lo;
                for (k, slot) in x.iter_mut().enumerate() {
                    *slot = data[i0 + k * stride];
                }
                for r in 0..16 {
                    data[i0 + r * stride] = scale[r] * x[src[r]];
                }
            }
            base += group;
        }
    }

    /// Inner product 2^n sum_i a_i b_i = Tr[A B] for Hermitian A, B.
    pub fn trace_inner(&self, other: &PauliVec) -> f64 {
        let dot: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum();
        dot * (1u64 << self.n) as f64
    }

    /// Dense operator matrix (small n), for oracle cross-checks.
    pub fn to_dense_operator(&self) -> DenseTensor {
        let dim = 1usize << self.n;
        let mut out = DenseTensor::zeros(vec![dim, dim]);
        let count = self.data.len();
        for flat in 0..count {
            let coeff = self.data[flat];
            if coeff == 0.0 {
                continue;
            }
            let mut idx = vec![0u8; self.n];
            let mut rest = flat;
            for s in (0..self.n).rev() {
                idx[s] = (rest % 4) as u8;
                rest /= 4;
            }
            let m = pauli_string_dense(&idx);
            for i in 0..dim {
                for j in 0..dim {
                    let v = out.get(&[i, j]) + m.get(&[i, j]) * coeff;
                    out.set(&[i, j], v);
                }
            }
        }
        out
    }

    /// Pauli coefficients of a dense Hermitian operator (small n).
    pub fn from_dense_operator(op: &DenseTensor) -> Result<Self> {
        let dim = op.shape()[0];
        if op.shape() != [dim, dim] || !dim.is_power_of_two() {
            return Err(Error::ShapeMismatch("from_dense_operator: non 2^n square".into()));
        }
        let n = dim.trailing_zeros() as usize;
        // sequentially transform each site's (row, col) pair into the Pauli axis
        // state: complex array with shape [4^s, 2^(n-s), 2^(n-s)] flattened
        let mut cur: Vec<C64> = op.data().to_vec();
        let mut pauli_axes = 1usize; // 4^s
        for s in 0..n {
            let rows = 1usize << (n - s);
            let cols = rows;
            let half = rows / 2;
            let mut next = vec![C64::new(0.0, 0.0); cur.len()];
            // cur layout: [pauli_axes, rows, cols]; output: [pauli_axes, 4, half, half]
            for a in 0..pauli_axes {
                for r in 0..half {
                    for c in 0..half {
                        let m00 = cur[(a * rows + r) * cols + c];
                        let m01 = cur[(a * rows + r) * cols + half + c];
                        let m10 = cur[(a * rows + half + r) * cols + c];
                        let m11 = cur[(a * rows + half + r) * cols + half + c];
                        let li = (m00 + m11) * 0.5;
                        let lx = (m01 + m10) * 0.5;
                        let ly = (m01 - m10) * C64::new(0.0, 0.5);
                        let lz = (m00 - m11) * 0.5;
                        let out_base = ((a * 4) * half + r) * half + c;
                        let stride = half * half;
                        next[out_base] = li;
                        next[out_base + stride] = lx;
                        next[out_base + 2 * stride] = ly;
                        next[out_base + 3 * stride] = lz;
                    }
                }
            }
            cur = next;
            pauli_axes *= 4;
        }
        let mut data = Vec::with_capacity(cur.len());
        for z in &cur {
            if z.im.abs() > 1e-9 {
                return Err(Error::Numerical(format!(
                    "from_dense_operator: coefficient has imaginary part {:.3e}",
                    z.im
                )));
            }
            data.push(z.re);
        }
        Ok(Self { n, data })
    }

    /// Exact MPS over physical dimension 4 (complex container, real entries).
    pub fn to_mps(&self, rel_cutoff: f64) -> Result<crate::mps::Mps> {
        let data: Vec<C64> = self.data.iter().map(|&x| C64::new(x, 0.0)).collect();
        crate::mps::Mps::from_dense(&data, &vec![4; self.n], rel_cutoff)
    }
}

/// Coefficients of the element-wise product in the trigonometric basis.
///
/// For C = (O' hadamard rho^T) restricted to {I, X, Y} per site and scaled by
/// 2^n, the per-site combination rule is
///   out_1   = o_I r_I + o_Z r_Z
///   out_cos = o_X r_X + o_Y r_Y
///   out_sin = o_Y r_X - o_X r_Y
/// where o are coefficients of O' and r of rho. Output is a 3^n real vector in
/// row-major site order.
pub fn coefficient_zip(o: &PauliVec, r: &PauliVec) -> Vec<f64> {
    assert_eq!(o.n, r.n);
    let n = o.n;
    let mut out = vec![0.0; 3usize.pow(n as u32)];
    let scale = (1u64 << n) as f64;
    zip_rec(n, 0, 0, 0, 0, 1.0, &o.data, &r.data, &mut out);
    for v in &mut out {
        *v *= scale;
    }
    out
}

// branches: (output letter, o letter, r letter, sign)
const ZIP_BRANCHES: [(usize, usize, usize, f64); 6] = [
    (0, 0, 0, 1.0),
    (0, 3, 3, 1.0),
    (1, 1, 1, 1.0),
    (1, 2, 2, 1.0),
    (2, 2, 1, 1.0),
    (2, 1, 2, -1.0),
];

#[allow(clippy::too_many_arguments)]
fn zip_rec(
    n: usize,
    depth: usize,
    oi: usize,
    ri: usize,
    out_idx: usize,
    sign: f64,
    o: &[f64],
    r: &[f64],
    out: &mut [f64],
) {
    let stride = 1usize << (2 * (n - 1 - depth));
    let out_stride = 3usize.pow((n - 1 - depth) as u32);
    if depth == n - 1 {
        let o1 = o[oi + stride];
        let o2 = o[oi + 2 * stride];
        let r1 = r[ri + stride];
        let r2 = r[ri + 2 * stride];
        out[out_idx] += sign * (o[oi] * r[ri] + o[oi + 3 * stride] * r[ri + 3 * stride]);
        out[out_idx + 1] += sign * (o1 * r1 + o2 * r2);
        out[out_idx + 2] += sign * (o2 * r1 - o1 * r2);
        return;
    }
    for &(k, ol, rl, s) in &ZIP_BRANCHES {
        zip_rec(
            n,
            depth + 1,
            oi + ol * stride,
            ri + rl * stride,
            out_idx + k * out_stride,
            sign * s,
            o,
            r,
            out,
        );
    }
}

/// Converts a 16x16 one-nonzero-per-row transfer matrix into (src, scale).
pub fn to_perm_form(m: &[f64]) -> Option<([usize; 16], [f64; 16])> {
    let mut src = [0usize; 16];
    let mut scale = [0.0f64; 16];
    for r in 0..16 {
        let mut found = 0;
        for c in 0..16 {
            let v = m[r * 16 + c];
            if v.abs() > 1e-14 {
                src[r] = c;
                scale[r] = v;
                found += 1;
            }
        }
        if found != 1 {
            return None;
        }
    }
    Some((src, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ptm_of_identity_is_identity() {
        let u = pauli_matrix(0);
        let t = ptm_1q(&u);
        for a in 0..4 {
            for b in 0..4 {
                assert_abs_diff_eq!(t[a][b], if a == b { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn cnot_ptm_is_signed_permutation() {
        let t = ptm_2q(&cnot_dense());
        let (src, scale) = to_perm_form(&t).expect("cnot PTM has one entry per row");
        for r in 0..16 {
            assert!(scale[r].abs() > 0.99);
            let _ = src[r];
        }
        // X x I -> X x X under CNOT conjugation
        let xi = 4; // (X, I)
        let xx = 5; // (X, X)
        assert_abs_diff_eq!(t[xx * 16 + xi], 1.0, epsilon = 1e-13);
        // I x Z -> Z x Z
        let iz = 3;
        let zz = 15;
        assert_abs_diff_eq!(t[zz * 16 + iz], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn pauli_roundtrip_through_dense() {
        let idx = vec![1u8, 2, 3];
        let v = PauliVec::from_pauli_string(&idx);
        let dense = v.to_dense_operator();
        let back = PauliVec::from_dense_operator(&dense).unwrap();
        for (a, b) in v.data.iter().zip(&back.data) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_projector_matches_dense() {
        let v = PauliVec::zero_projector(2);
        let dense = v.to_dense_operator();
        assert_abs_diff_eq!(dense.get(&[0, 0]).re, 1.0, epsilon = 1e-14);
        for i in 1..4 {
            assert_abs_diff_eq!(dense.get(&[i, i]).re, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn depolarizing_damps_non_identity() {
        let gamma = 0.3;
        let t = depolarizing_ptm(gamma);
        let mut v = PauliVec::from_pauli_string(&[1, 2]); // X x Y
        v.apply_2q(0, &t);
        assert_abs_diff_eq!(v.entry(&[1, 2]), 1.0 - gamma, epsilon = 1e-14);
        let mut id = PauliVec::from_pauli_string(&[0, 0]);
        id.apply_2q(0, &t);
        assert_abs_diff_eq!(id.entry(&[0, 0]), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn coefficient_zip_scalar_case() {
        // O = X, rho = (I + X)/2 on one site: coefficient of cos should be 1
        let o = PauliVec::from_pauli_string(&[1]);
        let r = PauliVec::from_site_factors(&[[0.5, 0.5, 0.0, 0.0]]);
        let c = coefficient_zip(&o, &r);
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c[1], 1.0, epsilon = 1e-14); // cos
        assert_abs_diff_eq!(c[2], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn coefficient_zip_sin_orientation() {
        // O = Y, rho = (I + X)/2: f(phi) = sin(phi)
        let o = PauliVec::from_pauli_string(&[2]);
        let r = PauliVec::from_site_factors(&[[0.5, 0.5, 0.0, 0.0]]);
        let c = coefficient_zip(&o, &r);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c[2], 1.0, epsilon = 1e-14); // sin
    }

    #[test]
    fn apply_1q_strided_consistency() {
        // rotate site 1 of a 3-site vector and compare against dense rebuild
        let u = {
            let t = 0.7f64;
            [
                [
                    C64::new((t / 2.0).cos(), 0.0),
                    C64::new(-(t / 2.0).sin(), 0.0),
                ],
                [C64::new((t / 2.0).sin(), 0.0), C64::new((t / 2.0).cos(), 0.0)],
            ]
        };
        let ptm = ptm_1q(&u);
        let mut v = PauliVec::from_pauli_string(&[1, 2, 3]);
        let before = v.to_dense_operator();
        v.apply_1q(1, &ptm);
        let after = v.to_dense_operator();
        // conjugate the dense form directly on site 1
        let mut site_mats = Vec::new();
        for s in 0..3 {
            if s == 1 {
                site_mats.push(DenseTensor::new(
                    vec![2, 2],
                    vec![u[0][0], u[0][1], u[1][0], u[1][1]],
                ).unwrap());
            } else {
                let m = pauli_matrix(0);
                site_mats.push(DenseTensor::new(
                    vec![2, 2],
                    vec![m[0][0], m[0][1], m[1][0], m[1][1]],
                ).unwrap());
            }
        }
        let u_full = crate::mpo::Mpo::from_site_matrices(&site_mats)
            .unwrap()
            .to_dense()
            .unwrap();
        let tmp = crate::tensor::contract(&u_full, &[1], &before, &[0]).unwrap();
        let want = crate::tensor::contract(&tmp, &[1], &u_full.conj(), &[1]).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((want.get(&[i, j]) - after.get(&[i, j])).norm() < 1e-11);
            }
        }
    }
}
