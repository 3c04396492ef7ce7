//! Matrix product states over open chains: rank-3 cores indexed
//! (left bond, physical, right bond), boundary bonds of dimension 1.

use crate::error::{Error, Result};
use crate::tensor::{contract, scale_rows, svd_split, DenseTensor};
use num_complex::Complex64 as C64;
use rand::Rng;

/// Isometry tolerance used by the canonical-form invariant.
pub const CANONICAL_TOL: f64 = 1e-10;

/// Per-cut singular values of an MPS, each list descending.
#[derive(Clone, Debug)]
pub struct SingularSpectrum {
    pub per_cut: Vec<Vec<f64>>,
}

impl SingularSpectrum {
    /// Largest count of values above `rel_threshold * max` over all cuts.
    pub fn max_bond_count(&self, rel_threshold: f64) -> usize {
        self.per_cut
            .iter()
            .map(|cut| {
                let top = cut.first().copied().unwrap_or(0.0);
                cut.iter().filter(|&&s| s > rel_threshold * top).count()
            })
            .max()
            .unwrap_or(0)
    }

    /// Truncation weight left over when every cut is capped at `d` values.
    pub fn truncation_error(&self, d: usize) -> f64 {
        self.per_cut
            .iter()
            .map(|cut| cut.iter().skip(d).map(|s| s * s).sum::<f64>())
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct Mps {
    cores: Vec<DenseTensor>,
    canonical_center: Option<usize>,
}

impl Mps {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidArgument("mps: empty chain".into()));
        }
        for (i, core) in cores.iter().enumerate() {
            if core.rank() != 3 {
                return Err(Error::ShapeMismatch(format!(
                    "mps: core {} has rank {}",
                    i,
                    core.rank()
                )));
            }
        }
        if cores[0].shape()[0] != 1 || cores[cores.len() - 1].shape()[2] != 1 {
            return Err(Error::ShapeMismatch("mps: boundary bonds must be 1".into()));
        }
        for i in 0..cores.len() - 1 {
            if cores[i].shape()[2] != cores[i + 1].shape()[0] {
                return Err(Error::ShapeMismatch(format!(
                    "mps: bond mismatch between sites {} and {}",
                    i,
                    i + 1
                )));
            }
        }
        Ok(Self {
            cores,
            canonical_center: None,
        })
    }

    pub fn len(&self) -> usize {
        self.cores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cores.is_empty()
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &DenseTensor {
        &self.cores[k]
    }

    pub fn canonical_center(&self) -> Option<usize> {
        self.canonical_center
    }

    pub fn physical_dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    /// Bond dimensions including the two boundary bonds, length N+1.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut bonds = vec![self.cores[0].shape()[0]];
        bonds.extend(self.cores.iter().map(|c| c.shape()[2]));
        bonds
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Product state from per-site vectors.
    pub fn product_state(site_vectors: &[Vec<C64>]) -> Result<Self> {
        let cores = site_vectors
            .iter()
            .map(|v| DenseTensor::new(vec![1, v.len(), 1], v.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    pub fn random(n: usize, phys: usize, chi: usize, rng: &mut impl Rng) -> Self {
        let mut cores = Vec::with_capacity(n);
        for k in 0..n {
            let dl = if k == 0 { 1 } else { chi };
            let dr = if k == n - 1 { 1 } else { chi };
            let data: Vec<C64> = (0..dl * phys * dr)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            cores.push(DenseTensor::new(vec![dl, phys, dr], data).unwrap());
        }
        Self::new(cores).unwrap()
    }

    pub fn random_real(n: usize, phys: usize, chi: usize, rng: &mut impl Rng) -> Self {
        let mut m = Self::random(n, phys, chi, rng);
        for core in &mut m.cores {
            *core = core.clone().realize();
        }
        m
    }

    /// Full coefficient vector; guarded against oversized chains.
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let total: usize = self.physical_dims().iter().product();
        if total > 1 << 24 {
            return Err(Error::ResourceLimit(format!(
                "to_dense would materialize {} entries",
                total
            )));
        }
        // carry shape (phys-so-far, right bond)
        let mut carry = self.cores[0].clone();
        let (p0, r0) = (carry.shape()[1], carry.shape()[2]);
        carry = carry.reshape(vec![p0, r0])?;
        for core in &self.cores[1..] {
            let next = contract(&carry, &[1], core, &[0])?;
            let (a, p, r) = (next.shape()[0], next.shape()[1], next.shape()[2]);
            carry = next.reshape(vec![a * p, r])?;
        }
        let n = carry.shape()[0];
        Ok(carry.reshape(vec![n])?.into_data())
    }

    /// Exact MPS factorization of a dense coefficient vector with the given
    /// per-site physical dimensions. Singular values below
    /// `rel_cutoff * largest_at_cut` are dropped.
    pub fn from_dense(data: &[C64], phys_dims: &[usize], rel_cutoff: f64) -> Result<Self> {
        let total: usize = phys_dims.iter().product();
        if data.len() != total {
            return Err(Error::ShapeMismatch(format!(
                "from_dense: {} entries vs physical dims {:?}",
                data.len(),
                phys_dims
            )));
        }
        let n = phys_dims.len();
        if n == 1 {
            return Self::new(vec![DenseTensor::new(
                vec![1, phys_dims[0], 1],
                data.to_vec(),
            )?]);
        }
        let mut cores = Vec::with_capacity(n);
        let mut carry = DenseTensor::new(vec![1, total], data.to_vec())?;
        for (k, &p) in phys_dims.iter().enumerate().take(n - 1) {
            let l = carry.shape()[0];
            let rest = carry.shape()[1] / p;
            let m = carry.reshape(vec![l * p, rest])?;
            let split = svd_split(&m, &[0], None, 0.0)?;
            // relative cutoff at this cut
            let top = split.s.first().copied().unwrap_or(0.0);
            let keep = split
                .s
                .iter()
                .filter(|&&s| s > rel_cutoff * top)
                .count()
                .max(1);
            let kept_u = truncate_cols(&split.u, keep);
            let kept_vt = truncate_rows(&split.vt, keep);
            let s_kept = &split.s[..keep];
            cores.push(kept_u.reshape(vec![l, p, keep])?);
            carry = scale_rows(&kept_vt, s_kept);
            let _ = k;
        }
        let l = carry.shape()[0];
        let p = phys_dims[n - 1];
        cores.push(carry.reshape(vec![l, p, 1])?);
        let mut mps = Self::new(cores)?;
        mps.canonical_center = Some(n - 1);
        Ok(mps)
    }

    /// Inner product `<a|b>` (conjugate on `a`).
    pub fn inner(&self, other: &Mps) -> Result<C64> {
        if self.len() != other.len() || self.physical_dims() != other.physical_dims() {
            return Err(Error::Incompatible(
                "inner: lengths or physical dimensions differ".into(),
            ));
        }
        // transfer: env[a_r, b_r]
        let mut env = DenseTensor::from_real(vec![1, 1], &[1.0])?;
        for (ca, cb) in self.cores.iter().zip(&other.cores) {
            let tmp = contract(&env, &[0], &ca.conj(), &[0])?; // (b_l, p, a_r)
            env = contract(&tmp, &[0, 1], cb, &[0, 1])?; // (a_r, b_r)
        }
        Ok(env.scalar_value())
    }

    pub fn norm2(&self) -> f64 {
        self.inner(self).map(|z| z.re.max(0.0)).unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn scale(&self, factor: C64) -> Mps {
        let mut out = self.clone();
        out.cores[0] = out.cores[0].scale(factor);
        out.canonical_center = self.canonical_center;
        out
    }

    /// Contraction with a product state given by per-site vectors (no
    /// conjugation), cost O(N chi^2 d).
    pub fn eval_product(&self, site_vectors: &[Vec<C64>]) -> Result<C64> {
        if site_vectors.len() != self.len() {
            return Err(Error::Incompatible("eval_product: length mismatch".into()));
        }
        let mut env = DenseTensor::from_real(vec![1], &[1.0])?;
        for (core, v) in self.cores.iter().zip(site_vectors) {
            if v.len() != core.shape()[1] {
                return Err(Error::Incompatible(
                    "eval_product: physical dimension mismatch".into(),
                ));
            }
            let vt = DenseTensor::new(vec![v.len()], v.clone())?;
            let m = contract(core, &[1], &vt, &[0])?; // (l, r)
            env = contract(&env, &[0], &m, &[0])?; // (r)
        }
        Ok(env.scalar_value())
    }

    /// Element at the given physical multi-index.
    pub fn element(&self, index: &[usize]) -> Result<C64> {
        let dims = self.physical_dims();
        let vectors: Vec<Vec<C64>> = index
            .iter()
            .zip(&dims)
            .map(|(&i, &d)| {
                let mut v = vec![C64::new(0.0, 0.0); d];
                v[i] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        self.eval_product(&vectors)
    }

    /// Sum of two chains; bond dimensions add.
    pub fn add(&self, other: &Mps) -> Result<Mps> {
        if self.len() != other.len() || self.physical_dims() != other.physical_dims() {
            return Err(Error::Incompatible(
                "add: lengths or physical dimensions differ".into(),
            ));
        }
        let n = self.len();
        let mut cores = Vec::with_capacity(n);
        for k in 0..n {
            let a = &self.cores[k];
            let b = &other.cores[k];
            let (al, p, ar) = (a.shape()[0], a.shape()[1], a.shape()[2]);
            let (bl, br) = (b.shape()[0], b.shape()[2]);
            let (nl, nr) = if n == 1 {
                (1, 1)
            } else if k == 0 {
                (1, ar + br)
            } else if k == n - 1 {
                (al + bl, 1)
            } else {
                (al + bl, ar + br)
            };
            let mut core = DenseTensor::zeros(vec![nl, p, nr]);
            for l in 0..al {
                for pp in 0..p {
                    for r in 0..ar {
                        let dst_l = if k == 0 { 0 } else { l };
                        let dst_r = if k == n - 1 { 0 } else { r };
                        let v = core.get(&[dst_l, pp, dst_r]) + a.get(&[l, pp, r]);
                        core.set(&[dst_l, pp, dst_r], v);
                    }
                }
            }
            for l in 0..bl {
                for pp in 0..p {
                    for r in 0..br {
                        let dst_l = if k == 0 { 0 } else { al + l };
                        let dst_r = if k == n - 1 { 0 } else { ar + r };
                        let v = core.get(&[dst_l, pp, dst_r]) + b.get(&[l, pp, r]);
                        core.set(&[dst_l, pp, dst_r], v);
                    }
                }
            }
            cores.push(core);
        }
        Mps::new(cores)
    }

    /// Brings the chain to mixed-canonical form around `center`: cores left of
    /// it left-isometric, cores right of it right-isometric. The represented
    /// tensor is unchanged.
    pub fn canonicalize(&self, center: usize) -> Result<Mps> {
        if center >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "canonicalize: center {} out of range",
                center
            )));
        }
        let mut cores = self.cores.clone();
        // left-to-right sweep up to center
        for k in 0..center {
            let (l, p, r) = core_dims(&cores[k]);
            let m = cores[k].clone().reshape(vec![l * p, r])?;
            let split = svd_split(&m, &[0], None, 0.0)?;
            let keep = split.s.len();
            cores[k] = split.u.reshape(vec![l, p, keep])?;
            let carry = scale_rows(&split.vt, &split.s);
            cores[k + 1] = absorb_left(&carry, &cores[k + 1])?;
        }
        // right-to-left sweep down to center
        for k in (center + 1..self.len()).rev() {
            let (l, p, r) = core_dims(&cores[k]);
            let m = cores[k].clone().reshape(vec![l, p * r])?;
            let split = svd_split(&m, &[0], None, 0.0)?;
            let keep = split.s.len();
            cores[k] = split.vt.reshape(vec![keep, p, r])?;
            let carry = crate::tensor::scale_cols(&split.u, &split.s);
            cores[k - 1] = absorb_right(&cores[k - 1], &carry)?;
        }
        let mut out = Mps::new(cores)?;
        out.canonical_center = Some(center);
        Ok(out)
    }

    /// Singular values of every `k | rest` bipartition, descending per cut.
    pub fn singular_spectrum(&self) -> Result<SingularSpectrum> {
        let n = self.len();
        if n == 1 {
            return Ok(SingularSpectrum { per_cut: vec![] });
        }
        let right = self.canonicalize(0)?;
        let mut cores = right.cores;
        let mut per_cut = Vec::with_capacity(n - 1);
        for k in 0..n - 1 {
            let (l, p, r) = core_dims(&cores[k]);
            let m = cores[k].clone().reshape(vec![l * p, r])?;
            let split = svd_split(&m, &[0], None, 0.0)?;
            per_cut.push(split.s.clone());
            let carry = scale_rows(&split.vt, &split.s);
            cores[k + 1] = absorb_left(&carry, &cores[k + 1])?;
        }
        Ok(SingularSpectrum { per_cut })
    }

    /// Caps every bond at `max_bond`, returning the truncated chain and the
    /// total discarded squared weight collected in a single sweep.
    pub fn truncate(&self, max_bond: usize) -> Result<(Mps, f64)> {
        if max_bond == 0 {
            return Err(Error::InvalidArgument("truncate: max_bond must be >= 1".into()));
        }
        let n = self.len();
        let right = self.canonicalize(0)?;
        let mut cores = right.cores;
        let mut discarded2 = 0.0;
        for k in 0..n - 1 {
            let (l, p, r) = core_dims(&cores[k]);
            let m = cores[k].clone().reshape(vec![l * p, r])?;
            let split = svd_split(&m, &[0], Some(max_bond), 0.0)?;
            discarded2 += split.discarded.iter().map(|s| s * s).sum::<f64>();
            let keep = split.s.len();
            cores[k] = split.u.reshape(vec![l, p, keep])?;
            let carry = scale_rows(&split.vt, &split.s);
            cores[k + 1] = absorb_left(&carry, &cores[k + 1])?;
        }
        let mut out = Mps::new(cores)?;
        out.canonical_center = Some(n - 1);
        Ok((out, discarded2))
    }

    /// Exact-preserving recompression: drops singular values below
    /// `rel_cutoff` relative to the largest at each cut.
    pub fn recompress(&self, rel_cutoff: f64, max_bond: Option<usize>) -> Result<Mps> {
        let n = self.len();
        if n == 1 {
            return Ok(self.clone());
        }
        let right = self.canonicalize(0)?;
        let mut cores = right.cores;
        for k in 0..n - 1 {
            let (l, p, r) = core_dims(&cores[k]);
            let m = cores[k].clone().reshape(vec![l * p, r])?;
            let split = svd_split(&m, &[0], None, 0.0)?;
            let top = split.s.first().copied().unwrap_or(0.0);
            let mut keep = split.s.iter().filter(|&&s| s > rel_cutoff * top).count().max(1);
            if let Some(cap) = max_bond {
                keep = keep.min(cap).max(1);
            }
            let u = truncate_cols(&split.u, keep);
            let vt = truncate_rows(&split.vt, keep);
            cores[k] = u.reshape(vec![l, p, keep])?;
            let carry = scale_rows(&vt, &split.s[..keep]);
            cores[k + 1] = absorb_left(&carry, &cores[k + 1])?;
        }
        let mut out = Mps::new(cores)?;
        out.canonical_center = Some(n - 1);
        Ok(out)
    }

    /// Checks the canonical-center invariant at tolerance `CANONICAL_TOL`.
    pub fn check_canonical(&self, center: usize) -> bool {
        for (k, core) in self.cores.iter().enumerate() {
            if k < center && !is_left_isometric(core, CANONICAL_TOL) {
                return false;
            }
            if k > center && !is_right_isometric(core, CANONICAL_TOL) {
                return false;
            }
        }
        true
    }

    pub fn max_imag_abs(&self) -> f64 {
        self.cores
            .iter()
            .map(|c| c.max_imag_abs())
            .fold(0.0, f64::max)
    }

    pub fn realize(mut self) -> Self {
        for core in &mut self.cores {
            *core = core.clone().realize();
        }
        self
    }

    pub(crate) fn replace_core(&mut self, k: usize, core: DenseTensor) {
        self.cores[k] = core;
        self.canonical_center = None;
    }
}

pub(crate) fn core_dims(core: &DenseTensor) -> (usize, usize, usize) {
    (core.shape()[0], core.shape()[1], core.shape()[2])
}

/// carry (a x l) absorbed into the left bond of core (l, p, r).
pub(crate) fn absorb_left(carry: &DenseTensor, core: &DenseTensor) -> Result<DenseTensor> {
    contract(carry, &[1], core, &[0])
}

/// carry (r x b) absorbed into the right bond of core (l, p, r).
pub(crate) fn absorb_right(core: &DenseTensor, carry: &DenseTensor) -> Result<DenseTensor> {
    contract(core, &[2], carry, &[0])
}

fn truncate_cols(u: &DenseTensor, keep: usize) -> DenseTensor {
    // u shape (m, k); keep first `keep` columns
    let m = u.shape()[0];
    let k = u.shape()[1];
    let mut data = Vec::with_capacity(m * keep);
    for row in 0..m {
        for col in 0..keep {
            data.push(u.data()[row * k + col]);
        }
    }
    DenseTensor::new(vec![m, keep], data).unwrap()
}

fn truncate_rows(vt: &DenseTensor, keep: usize) -> DenseTensor {
    let k = vt.shape()[0];
    let n: usize = vt.shape()[1..].iter().product();
    let _ = k;
    let data = vt.data()[..keep * n].to_vec();
    let mut shape = vec![keep];
    shape.extend(&vt.shape()[1..]);
    DenseTensor::new(shape, data).unwrap()
}

fn is_left_isometric(core: &DenseTensor, tol: f64) -> bool {
    let (l, p, r) = core_dims(core);
    let m = core.clone().reshape(vec![l * p, r]).unwrap();
    let g = contract(&m.conj(), &[0], &m, &[0]).unwrap();
    is_identity(&g, r, tol)
}

fn is_right_isometric(core: &DenseTensor, tol: f64) -> bool {
    let (l, p, r) = core_dims(core);
    let m = core.clone().reshape(vec![l, p * r]).unwrap();
    let g = contract(&m.conj(), &[1], &m, &[1]).unwrap();
    is_identity(&g, l, tol)
}

fn is_identity(g: &DenseTensor, d: usize, tol: f64) -> bool {
    for i in 0..d {
        for j in 0..d {
            let expect = if i == j { 1.0 } else { 0.0 };
            if (g.get(&[i, j]) - C64::new(expect, 0.0)).norm() > tol {
                return false;
            }
        }
    }
    true
}
