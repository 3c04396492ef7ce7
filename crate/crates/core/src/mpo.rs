//! Matrix product operators: rank-4 cores indexed
//! (left bond, out physical, in physical, right bond).

use crate::error::{Error, Result};
use crate::mps::Mps;
use crate::tensor::{contract, DenseTensor};
use num_complex::Complex64 as C64;

#[derive(Clone, Debug)]
pub struct Mpo {
    cores: Vec<DenseTensor>,
}

impl Mpo {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidArgument("mpo: empty chain".into()));
        }
        for (i, core) in cores.iter().enumerate() {
            if core.rank() != 4 {
                return Err(Error::ShapeMismatch(format!(
                    "mpo: core {} has rank {}",
                    i,
                    core.rank()
                )));
            }
        }
        if cores[0].shape()[0] != 1 || cores[cores.len() - 1].shape()[3] != 1 {
            return Err(Error::ShapeMismatch("mpo: boundary bonds must be 1".into()));
        }
        for i in 0..cores.len() - 1 {
            if cores[i].shape()[3] != cores[i + 1].shape()[0] {
                return Err(Error::ShapeMismatch(format!(
                    "mpo: bond mismatch between sites {} and {}",
                    i,
                    i + 1
                )));
            }
        }
        Ok(Self { cores })
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

    pub fn out_dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    pub fn in_dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[2]).collect()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut bonds = vec![self.cores[0].shape()[0]];
        bonds.extend(self.cores.iter().map(|c| c.shape()[3]));
        bonds
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn identity(n: usize, d: usize) -> Self {
        let mut eye = DenseTensor::zeros(vec![1, d, d, 1]);
        for p in 0..d {
            eye.set(&[0, p, p, 0], C64::new(1.0, 0.0));
        }
        Self {
            cores: vec![eye; n],
        }
    }

    /// Product operator from per-site matrices (d x d each, row-major).
    pub fn from_site_matrices(mats: &[DenseTensor]) -> Result<Self> {
        let cores = mats
            .iter()
            .map(|m| {
                let d0 = m.shape()[0];
                let d1 = m.shape()[1];
                m.clone().reshape(vec![1, d0, d1, 1])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    /// Operator product `self . other` (apply `other` first).
    pub fn compose(&self, other: &Mpo) -> Result<Mpo> {
        if self.len() != other.len() || self.in_dims() != other.out_dims() {
            return Err(Error::Incompatible(
                "compose: lengths or physical dimensions differ".into(),
            ));
        }
        let mut cores = Vec::with_capacity(self.len());
        for (a, b) in self.cores.iter().zip(&other.cores) {
            // c[(a1 b1), po, pi, (a2 b2)] = sum_m a[a1, po, m, a2] b[b1, m, pi, b2]
            let t = contract(a, &[2], b, &[1])?; // (a1, po, a2, b1, pi, b2)
            let t = t.permute(&[0, 3, 1, 4, 2, 5])?; // (a1, b1, po, pi, a2, b2)
            let s = t.shape().to_vec();
            cores.push(t.reshape(vec![s[0] * s[1], s[2], s[3], s[4] * s[5]])?);
        }
        Mpo::new(cores)
    }

    /// Applies the operator to a state: bond dimensions multiply.
    pub fn apply(&self, mps: &Mps) -> Result<Mps> {
        if self.len() != mps.len() || self.in_dims() != mps.physical_dims() {
            return Err(Error::Incompatible(
                "apply: lengths or physical dimensions differ".into(),
            ));
        }
        let mut cores = Vec::with_capacity(self.len());
        for (o, m) in self.cores.iter().zip(mps.cores()) {
            let t = contract(o, &[2], m, &[1])?; // (a1, po, a2, l, r)
            let t = t.permute(&[0, 3, 1, 2, 4])?; // (a1, l, po, a2, r)
            let s = t.shape().to_vec();
            cores.push(t.reshape(vec![s[0] * s[1], s[2], s[3] * s[4]])?);
        }
        Mps::new(cores)
    }

    /// Element-wise (Hadamard) product of two operators; bonds multiply.
    pub fn hadamard(&self, other: &Mpo) -> Result<Mpo> {
        if self.len() != other.len()
            || self.out_dims() != other.out_dims()
            || self.in_dims() != other.in_dims()
        {
            return Err(Error::Incompatible(
                "hadamard: lengths or physical dimensions differ".into(),
            ));
        }
        let mut cores = Vec::with_capacity(self.len());
        for (a, b) in self.cores.iter().zip(&other.cores) {
            let (al, po, pi, ar) = dims4(a);
            let (bl, _, _, br) = dims4(b);
            let mut core = DenseTensor::zeros(vec![al * bl, po, pi, ar * br]);
            for x1 in 0..al {
                for y1 in 0..bl {
                    for l in 0..po {
                        for j in 0..pi {
                            for x2 in 0..ar {
                                for y2 in 0..br {
                                    let v = a.get(&[x1, l, j, x2]) * b.get(&[y1, l, j, y2]);
                                    core.set(&[x1 * bl + y1, l, j, x2 * br + y2], v);
                                }
                            }
                        }
                    }
                }
            }
            cores.push(core);
        }
        Mpo::new(cores)
    }

    /// Swap out/in physical indices (matrix transpose of the dense form).
    pub fn transpose(&self) -> Mpo {
        let cores = self
            .cores
            .iter()
            .map(|c| c.permute(&[0, 2, 1, 3]).unwrap())
            .collect();
        Mpo { cores }
    }

    pub fn dagger(&self) -> Mpo {
        let cores = self
            .cores
            .iter()
            .map(|c| c.conj().permute(&[0, 2, 1, 3]).unwrap())
            .collect();
        Mpo { cores }
    }

    pub fn scale(&self, factor: C64) -> Mpo {
        let mut cores = self.cores.clone();
        cores[0] = cores[0].scale(factor);
        Mpo { cores }
    }

    /// View with fused physical legs (out, in) -> out*in, as an MPS.
    pub fn as_fused_mps(&self) -> Result<Mps> {
        let cores = self
            .cores
            .iter()
            .map(|c| {
                let (l, po, pi, r) = dims4(c);
                c.clone().reshape(vec![l, po * pi, r])
            })
            .collect::<Result<Vec<_>>>()?;
        Mps::new(cores)
    }

    /// Inverse of `as_fused_mps` given the per-site (out, in) dimensions.
    pub fn from_fused_mps(mps: &Mps, out_dims: &[usize], in_dims: &[usize]) -> Result<Mpo> {
        let cores = mps
            .cores()
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let l = c.shape()[0];
                let r = c.shape()[2];
                c.clone().reshape(vec![l, out_dims[k], in_dims[k], r])
            })
            .collect::<Result<Vec<_>>>()?;
        Mpo::new(cores)
    }

    /// Exact-preserving recompression through the fused-MPS view.
    pub fn recompress(&self, rel_cutoff: f64, max_bond: Option<usize>) -> Result<Mpo> {
        let fused = self.as_fused_mps()?;
        let compressed = fused.recompress(rel_cutoff, max_bond)?;
        Mpo::from_fused_mps(&compressed, &self.out_dims(), &self.in_dims())
    }

    /// Dense matrix (row-major, prod(out) x prod(in)); guarded by size.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        let dout: usize = self.out_dims().iter().product();
        let din: usize = self.in_dims().iter().product();
        if dout * din > 1 << 26 {
            return Err(Error::ResourceLimit(format!(
                "mpo to_dense would materialize {} entries",
                dout * din
            )));
        }
        // accumulate with row (out...) and column (in...) groups interleaved,
        // then permute out-axes before in-axes
        let n = self.len();
        let mut acc = self.cores[0].clone(); // (1, o, i, r)
        let s = acc.shape().to_vec();
        acc = acc.reshape(vec![s[1], s[2], s[3]])?; // (o, i, r)
        for core in &self.cores[1..] {
            let t = contract(&acc, &[2], core, &[0])?; // (O, I, o, i, r)
            let sh = t.shape().to_vec();
            let t = t.permute(&[0, 2, 1, 3, 4])?; // (O, o, I, i, r)
            acc = t.reshape(vec![sh[0] * sh[2], sh[1] * sh[3], sh[4]])?;
        }
        let sh = acc.shape().to_vec();
        let mat = acc.reshape(vec![sh[0], sh[1]])?;
        let _ = n;
        Ok(mat)
    }

    /// Exact MPO factorization of a dense matrix over sites with the given
    /// out/in physical dimensions.
    pub fn from_dense(mat: &DenseTensor, out_dims: &[usize], in_dims: &[usize]) -> Result<Mpo> {
        let n = out_dims.len();
        if in_dims.len() != n {
            return Err(Error::InvalidArgument("from_dense: dims length mismatch".into()));
        }
        let dout: usize = out_dims.iter().product();
        let din: usize = in_dims.iter().product();
        if mat.shape() != [dout, din] {
            return Err(Error::ShapeMismatch(format!(
                "from_dense: matrix {:?} vs dims {} x {}",
                mat.shape(),
                dout,
                din
            )));
        }
        // reshape to (o1..on, i1..in) then interleave to (o1, i1, o2, i2, ...)
        let mut shape = out_dims.to_vec();
        shape.extend_from_slice(in_dims);
        let t = mat.clone().reshape(shape)?;
        let mut perm = Vec::with_capacity(2 * n);
        for k in 0..n {
            perm.push(k);
            perm.push(n + k);
        }
        let t = t.permute(&perm)?;
        let fused_dims: Vec<usize> = (0..n).map(|k| out_dims[k] * in_dims[k]).collect();
        let flat = t.reshape(vec![dout * din])?;
        let mps = Mps::from_dense(flat.data(), &fused_dims, 1e-14)?;
        Mpo::from_fused_mps(&mps, out_dims, in_dims)
    }

    /// Trace of the dense form, computed by a transfer contraction.
    pub fn trace(&self) -> Result<C64> {
        let mut env = DenseTensor::from_real(vec![1], &[1.0])?;
        for core in &self.cores {
            let (l, po, pi, r) = dims4(core);
            if po != pi {
                return Err(Error::Incompatible("trace: non-square site".into()));
            }
            let mut m = DenseTensor::zeros(vec![l, r]);
            for a in 0..l {
                for b in 0..r {
                    let mut acc = C64::new(0.0, 0.0);
                    for p in 0..po {
                        acc += core.get(&[a, p, p, b]);
                    }
                    m.set(&[a, b], acc);
                }
            }
            env = contract(&env, &[0], &m, &[0])?;
        }
        Ok(env.scalar_value())
    }

    pub fn max_imag_abs(&self) -> f64 {
        self.cores
            .iter()
            .map(|c| c.max_imag_abs())
            .fold(0.0, f64::max)
    }
}

fn dims4(core: &DenseTensor) -> (usize, usize, usize, usize) {
    (
        core.shape()[0],
        core.shape()[1],
        core.shape()[2],
        core.shape()[3],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_mpo(n: usize, d: usize, chi: usize, rng: &mut ChaCha12Rng) -> Mpo {
        let mut cores = Vec::new();
        for k in 0..n {
            let dl = if k == 0 { 1 } else { chi };
            let dr = if k == n - 1 { 1 } else { chi };
            let data: Vec<C64> = (0..dl * d * d * dr)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            cores.push(DenseTensor::new(vec![dl, d, d, dr], data).unwrap());
        }
        Mpo::new(cores).unwrap()
    }

    fn dense_matmul(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
        contract(a, &[1], b, &[0]).unwrap()
    }

    #[test]
    fn compose_matches_dense_product() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let a = random_mpo(4, 2, 2, &mut rng);
        let b = random_mpo(4, 2, 2, &mut rng);
        let c = a.compose(&b).unwrap();
        assert_eq!(c.max_bond(), 4);
        let want = dense_matmul(&a.to_dense().unwrap(), &b.to_dense().unwrap());
        let got = c.to_dense().unwrap();
        for (x, y) in want.data().iter().zip(got.data()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn apply_matches_dense() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let o = random_mpo(4, 2, 2, &mut rng);
        let m = Mps::random(4, 2, 3, &mut rng);
        let applied = o.apply(&m).unwrap();
        let dense_o = o.to_dense().unwrap();
        let dense_m = m.to_dense().unwrap();
        let vt = DenseTensor::new(vec![dense_m.len()], dense_m).unwrap();
        let want = contract(&dense_o, &[1], &vt, &[0]).unwrap();
        let got = applied.to_dense().unwrap();
        for (x, y) in want.data().iter().zip(&got) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn hadamard_matches_dense_elementwise() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let a = random_mpo(4, 2, 2, &mut rng);
        let b = random_mpo(4, 2, 2, &mut rng);
        let h = a.hadamard(&b).unwrap();
        let da = a.to_dense().unwrap();
        let db = b.to_dense().unwrap();
        let dh = h.to_dense().unwrap();
        for i in 0..da.len() {
            let want = da.data()[i] * db.data()[i];
            assert!((want - dh.data()[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn hadamard_with_all_ones_is_identity_map() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let a = random_mpo(3, 2, 2, &mut rng);
        let ones = {
            let mut site = DenseTensor::zeros(vec![2, 2]);
            for l in 0..2 {
                for j in 0..2 {
                    site.set(&[l, j], C64::new(1.0, 0.0));
                }
            }
            Mpo::from_site_matrices(&[site.clone(), site.clone(), site]).unwrap()
        };
        let h = a.hadamard(&ones).unwrap();
        let da = a.to_dense().unwrap();
        let dh = h.to_dense().unwrap();
        for (x, y) in da.data().iter().zip(dh.data()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn from_dense_roundtrip() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let a = random_mpo(3, 2, 2, &mut rng);
        let dense = a.to_dense().unwrap();
        let rebuilt = Mpo::from_dense(&dense, &[2, 2, 2], &[2, 2, 2]).unwrap();
        let back = rebuilt.to_dense().unwrap();
        for (x, y) in dense.data().iter().zip(back.data()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn recompress_preserves_dense_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let a = random_mpo(4, 2, 2, &mut rng);
        let b = random_mpo(4, 2, 2, &mut rng);
        let c = a.compose(&b).unwrap();
        let r = c.recompress(1e-12, None).unwrap();
        assert!(r.max_bond() <= c.max_bond());
        let want = c.to_dense().unwrap();
        let got = r.to_dense().unwrap();
        for (x, y) in want.data().iter().zip(got.data()) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn trace_matches_dense() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let a = random_mpo(4, 2, 2, &mut rng);
        let dense = a.to_dense().unwrap();
        let mut tr = C64::new(0.0, 0.0);
        let d = dense.shape()[0];
        for i in 0..d {
            tr += dense.get(&[i, i]);
        }
        assert!((tr - a.trace().unwrap()).norm() < 1e-10);
    }
}
