//! Matrix product operators on open chains.
//!
//! Site tensors are stored row-major as `[left, out, in, right]`, so the
//! operator entry `⟨o_1 … o_n| X |i_1 … i_n⟩` is the product over sites of the
//! `(o_v, i_v)` slices, with site 0 the most significant digit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::budget::{checked_space_dim, max_dense_dim};
use crate::densequantum::DenseOperator;
use crate::error::{domain, LabError, Result};

/// File signature of serialized MPOs.
pub const MPO_MAGIC: &[u8; 8] = b"GIBBSMPO";
pub const MPO_FORMAT_VERSION: u32 = 1;

/// Relative singular-value floor used where compression must not change
/// the operator beyond rounding.
pub const LOSSLESS_FLOOR: f64 = 1e-14;

/// One `[left, out, in, right]` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    left: usize,
    d: usize,
    right: usize,
    data: Vec<c64>,
}

impl SiteTensor {
    pub fn new(left: usize, d: usize, right: usize, data: Vec<c64>) -> Result<Self> {
        if left == 0 || d == 0 || right == 0 || data.len() != left * d * d * right {
            return domain(format!("site tensor {left}x{d}x{d}x{right} cannot hold {} entries", data.len()));
        }
        Ok(SiteTensor { left, d, right, data })
    }

    pub fn zeros(left: usize, d: usize, right: usize) -> Self {
        SiteTensor { left, d, right, data: vec![c64::new(0.0, 0.0); left * d * d * right] }
    }

    /// `(left, d, d, right)`.
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.left, self.d, self.d, self.right)
    }

    pub fn data(&self) -> &[c64] {
        &self.data
    }

    #[inline]
    fn index(&self, l: usize, o: usize, i: usize, r: usize) -> usize {
        ((l * self.d + o) * self.d + i) * self.right + r
    }

    pub fn get(&self, l: usize, o: usize, i: usize, r: usize) -> c64 {
        self.data[self.index(l, o, i, r)]
    }

    pub fn set(&mut self, l: usize, o: usize, i: usize, r: usize, v: c64) {
        let k = self.index(l, o, i, r);
        self.data[k] = v;
    }

    pub(crate) fn add_at(&mut self, l: usize, o: usize, i: usize, r: usize, v: c64) {
        let k = self.index(l, o, i, r);
        self.data[k] += v;
    }

    /// Rows `(left, out, in)`, columns `right`.
    fn left_matrix(&self) -> Mat<c64> {
        let cols = self.right;
        Mat::from_fn(self.data.len() / cols, cols, |r, c| self.data[r * cols + c])
    }

    /// Rows `left`, columns `(out, in, right)`.
    fn right_matrix(&self) -> Mat<c64> {
        let cols = self.data.len() / self.left;
        Mat::from_fn(self.left, cols, |r, c| self.data[r * cols + c])
    }

    fn from_left_matrix(m: &Mat<c64>, left: usize, d: usize) -> Self {
        let right = m.ncols();
        let data = (0..m.nrows()).flat_map(|r| (0..right).map(move |c| m[(r, c)])).collect();
        SiteTensor { left, d, right, data }
    }

    fn from_right_matrix(m: &Mat<c64>, d: usize) -> Self {
        let (left, cols) = (m.nrows(), m.ncols());
        let data = (0..left).flat_map(|r| (0..cols).map(move |c| m[(r, c)])).collect();
        SiteTensor { left, d, right: cols / (d * d), data }
    }
}

/// Chain of site tensors with boundary bond dimensions 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Mpo {
    sites: Vec<SiteTensor>,
}

/// Compressed operator with the root-sum-square of discarded singular values.
#[derive(Clone, Debug)]
pub struct Compression {
    pub mpo: Mpo,
    pub error: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    sites: usize,
    d: usize,
    bond_dims: Vec<usize>,
}

impl Mpo {
    pub fn new(sites: Vec<SiteTensor>) -> Result<Self> {
        let Some(first) = sites.first() else {
            return domain("an MPO needs at least one site");
        };
        let d = first.d;
        if first.left != 1 || sites.last().map(|s| s.right) != Some(1) {
            return domain("boundary bond dimensions must be 1");
        }
        for (k, w) in sites.windows(2).enumerate() {
            if w[0].right != w[1].left {
                return domain(format!("bond {} joins dimensions {} and {}", k + 1, w[0].right, w[1].left));
            }
        }
        if sites.iter().any(|s| s.d != d) {
            return domain("all sites must share one local dimension");
        }
        Ok(Mpo { sites })
    }

    pub fn identity(n: usize, d: usize) -> Result<Self> {
        let id = Mat::<c64>::identity(d, d);
        Self::product(&vec![id; n])
    }

    /// `⊗_v locals[v]`, bond dimension 1.
    pub fn product(locals: &[Mat<c64>]) -> Result<Self> {
        let d = locals.first().map_or(0, |m| m.nrows());
        let sites = locals
            .iter()
            .map(|m| {
                if m.nrows() != d || m.ncols() != d {
                    return domain("product MPO needs square local factors of one size");
                }
                SiteTensor::new(1, d, 1, (0..d).flat_map(|o| (0..d).map(move |i| m[(o, i)])).collect())
            })
            .collect::<Result<_>>()?;
        Self::new(sites)
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn local_dim(&self) -> usize {
        self.sites[0].d
    }

    pub fn sites(&self) -> &[SiteTensor] {
        &self.sites
    }

    /// `D(0), …, D(n)` with `D(0) = D(n) = 1`.
    pub fn bond_dims(&self) -> Vec<usize> {
        std::iter::once(1).chain(self.sites.iter().map(|s| s.right)).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// The full matrix, subject to the dense budget.
    pub fn contract(&self) -> Result<DenseOperator> {
        let d = self.local_dim();
        let dim = checked_space_dim(d, self.num_sites(), max_dense_dim(), "MPO contraction")?;
        // cur[(o, i, bond)] over the sites contracted so far
        let (mut p, mut bond) = (1usize, 1usize);
        let mut cur = vec![c64::new(1.0, 0.0)];
        for x in &self.sites {
            let (np, nb) = (p * d, x.right);
            let mut next = vec![c64::new(0.0, 0.0); np * np * nb];
            for o in 0..p {
                for i in 0..p {
                    for l in 0..bond {
                        let c = cur[(o * p + i) * bond + l];
                        if c == c64::new(0.0, 0.0) {
                            continue;
                        }
                        for oo in 0..d {
                            for ii in 0..d {
                                let base = ((o * d + oo) * np + i * d + ii) * nb;
                                for r in 0..nb {
                                    next[base + r] += c * x.get(l, oo, ii, r);
                                }
                            }
                        }
                    }
                }
            }
            (p, bond, cur) = (np, nb, next);
        }
        DenseOperator::new(&vec![d; self.num_sites()], Mat::from_fn(dim, dim, |o, i| cur[o * dim + i]))
    }

    pub fn trace(&self) -> c64 {
        let mut v = vec![c64::new(1.0, 0.0)];
        for x in &self.sites {
            let mut next = vec![c64::new(0.0, 0.0); x.right];
            for (l, &vl) in v.iter().enumerate() {
                for o in 0..x.d {
                    for (r, slot) in next.iter_mut().enumerate() {
                        *slot += vl * x.get(l, o, o, r);
                    }
                }
            }
            v = next;
        }
        v[0]
    }

    /// `sqrt(Tr X†X)` by transfer matrices.
    pub fn frobenius_norm(&self) -> f64 {
        let mut t = Mat::<c64>::identity(1, 1);
        for x in &self.sites {
            let mut next = Mat::<c64>::zeros(x.right, x.right);
            for o in 0..x.d {
                for i in 0..x.d {
                    let a = Mat::from_fn(x.left, x.right, |l, r| x.get(l, o, i, r));
                    next += a.adjoint() * (&t * &a);
                }
            }
            t = next;
        }
        t[(0, 0)].re.max(0.0).sqrt()
    }

    pub fn scale(&self, factor: c64) -> Mpo {
        let mut out = self.clone();
        for v in &mut out.sites[0].data {
            *v *= factor;
        }
        out
    }

    pub fn adjoint(&self) -> Mpo {
        let sites = self
            .sites
            .iter()
            .map(|x| {
                let mut y = SiteTensor::zeros(x.left, x.d, x.right);
                for l in 0..x.left {
                    for o in 0..x.d {
                        for i in 0..x.d {
                            for r in 0..x.right {
                                y.set(l, o, i, r, x.get(l, i, o, r).conj());
                            }
                        }
                    }
                }
                y
            })
            .collect();
        Mpo { sites }
    }

    fn check_compatible(&self, other: &Mpo) -> Result<()> {
        if self.num_sites() != other.num_sites() || self.local_dim() != other.local_dim() {
            return domain(format!(
                "MPOs on {}x{} and {}x{} sites/levels are incompatible",
                self.num_sites(),
                self.local_dim(),
                other.num_sites(),
                other.local_dim()
            ));
        }
        Ok(())
    }

    /// `self + other`, bond dimensions add.
    pub fn add(&self, other: &Mpo) -> Result<Mpo> {
        self.check_compatible(other)?;
        let n = self.num_sites();
        let d = self.local_dim();
        let mut sites = Vec::with_capacity(n);
        for (k, (a, b)) in self.sites.iter().zip(&other.sites).enumerate() {
            let (first, last) = (k == 0, k + 1 == n);
            let left = if first { 1 } else { a.left + b.left };
            let right = if last { 1 } else { a.right + b.right };
            let mut x = SiteTensor::zeros(left, d, right);
            for (src, (dl, dr)) in [(a, (0, 0)), (b, (if first { 0 } else { a.left }, if last { 0 } else { a.right }))] {
                for l in 0..src.left {
                    for o in 0..d {
                        for i in 0..d {
                            for r in 0..src.right {
                                x.add_at(l + dl, o, i, r + dr, src.get(l, o, i, r));
                            }
                        }
                    }
                }
            }
            sites.push(x);
        }
        Ok(Mpo { sites })
    }

    /// Operator product `self · other`, bond dimensions multiply.
    pub fn compose(&self, other: &Mpo) -> Result<Mpo> {
        self.check_compatible(other)?;
        let d = self.local_dim();
        let sites = self
            .sites
            .iter()
            .zip(&other.sites)
            .map(|(a, b)| {
                let mut x = SiteTensor::zeros(a.left * b.left, d, a.right * b.right);
                for la in 0..a.left {
                    for lb in 0..b.left {
                        for o in 0..d {
                            for k in 0..d {
                                for ra in 0..a.right {
                                    let av = a.get(la, o, k, ra);
                                    if av == c64::new(0.0, 0.0) {
                                        continue;
                                    }
                                    for i in 0..d {
                                        for rb in 0..b.right {
                                            x.add_at(la * b.left + lb, o, i, ra * b.right + rb, av * b.get(lb, k, i, rb));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                x
            })
            .collect();
        Ok(Mpo { sites })
    }

    /// Left-canonical QR sweep followed by a right-to-left SVD sweep that
    /// keeps at most `max_bond` singular values per bond and drops those
    /// below `svd_floor` times the largest. The reported error equals the
    /// Frobenius distance to `self` up to rounding.
    pub fn compress(&self, max_bond: usize, svd_floor: f64) -> Result<Compression> {
        if max_bond < 1 {
            return domain("max_bond must be at least 1");
        }
        if !(svd_floor >= 0.0 && svd_floor.is_finite()) {
            return domain("svd floor must be a finite nonnegative number");
        }
        let d = self.local_dim();
        let n = self.num_sites();
        let mut sites = self.sites.clone();
        for k in 0..n - 1 {
            let qr = sites[k].left_matrix().qr();
            let q = qr.compute_thin_Q();
            let r = qr.thin_R().to_owned();
            sites[k] = SiteTensor::from_left_matrix(&q, sites[k].left, d);
            sites[k + 1] = SiteTensor::from_right_matrix(&(&r * sites[k + 1].right_matrix()), d);
        }
        let mut discarded = 0.0;
        for k in (1..n).rev() {
            let m = sites[k].right_matrix();
            let svd = m.thin_svd().map_err(|e| LabError::Numerical(format!("SVD failed during compression: {e:?}")))?;
            let s: Vec<f64> = (0..m.nrows().min(m.ncols())).map(|i| svd.S()[i].re).collect();
            let cutoff = svd_floor * s.first().copied().unwrap_or(0.0);
            let above = if svd_floor > 0.0 { s.iter().take_while(|&&x| x > cutoff).count() } else { s.len() };
            let keep = above.min(max_bond).max(1);
            discarded += s[keep..].iter().map(|x| x * x).sum::<f64>();
            let (u, v) = (svd.U(), svd.V());
            let vh = Mat::from_fn(keep, v.nrows(), |t, c| v[(c, t)].conj());
            let us = Mat::from_fn(u.nrows(), keep, |r, t| u[(r, t)] * s[t]);
            sites[k] = SiteTensor::from_right_matrix(&vh, d);
            sites[k - 1] = SiteTensor::from_left_matrix(&(sites[k - 1].left_matrix() * &us), sites[k - 1].left, d);
        }
        Ok(Compression { mpo: Mpo { sites }, error: discarded.sqrt() })
    }

    /// Writes the signature, a little-endian `u32` header length, the JSON
    /// header and then each site's entries as little-endian `f64` pairs.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = Header { version: MPO_FORMAT_VERSION, sites: self.num_sites(), d: self.local_dim(), bond_dims: self.bond_dims() };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MPO_MAGIC)?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
        for x in &self.sites {
            for v in &x.data {
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MPO_MAGIC {
            return domain("not an MPO file (bad signature)");
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        if header.version != MPO_FORMAT_VERSION {
            return domain(format!("unsupported MPO format version {}", header.version));
        }
        if header.bond_dims.len() != header.sites + 1 || header.sites == 0 {
            return domain("MPO header bond dimensions do not match the site count");
        }
        let mut sites = Vec::with_capacity(header.sites);
        let mut buf = [0u8; 16];
        for k in 0..header.sites {
            let (left, right) = (header.bond_dims[k], header.bond_dims[k + 1]);
            let count = left * header.d * header.d * right;
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                r.read_exact(&mut buf)?;
                let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
                data.push(c64::new(re, im));
            }
            sites.push(SiteTensor::new(left, header.d, right, data)?);
        }
        if r.read(&mut buf)? != 0 {
            return domain("trailing bytes after MPO payload");
        }
        Self::new(sites)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densequantum::pauli;
    use crate::rng::lab_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_mpo(seed: u64, bonds: &[usize], d: usize) -> Mpo {
        let mut rng = lab_rng(seed, 0);
        let sites = bonds
            .windows(2)
            .map(|w| {
                let count = w[0] * d * d * w[1];
                let data = (0..count)
                    .map(|_| c64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                    .collect();
                SiteTensor::new(w[0], d, w[1], data).unwrap()
            })
            .collect();
        Mpo::new(sites).unwrap()
    }

    /// Direct sum over all bond configurations.
    fn naive_entry(m: &Mpo, o: &[usize], i: &[usize]) -> c64 {
        let mut v = vec![c64::new(1.0, 0.0)];
        for (k, x) in m.sites().iter().enumerate() {
            v = (0..x.right).map(|r| (0..x.left).map(|l| v[l] * x.get(l, o[k], i[k], r)).sum()).collect();
        }
        v[0]
    }

    #[test]
    fn contraction_matches_naive_entries() {
        let m = random_mpo(1, &[1, 3, 2, 1], 2);
        let full = m.contract().unwrap();
        for row in 0..8 {
            for col in 0..8 {
                let digits = |x: usize| vec![x >> 2 & 1, x >> 1 & 1, x & 1];
                assert!((full.mat()[(row, col)] - naive_entry(&m, &digits(row), &digits(col))).norm() < 1e-12);
            }
        }
        assert!((m.trace() - full.trace()).norm() < 1e-12);
        let fro = full.mat().norm_l2();
        assert!((m.frobenius_norm() - fro).abs() < 1e-10 * fro);
    }

    #[test]
    fn product_and_identity() {
        let m = Mpo::product(&[pauli::x(), pauli::z()]).unwrap();
        let want = DenseOperator::new(&[2, 2], pauli::kron(&pauli::x(), &pauli::z())).unwrap();
        assert_eq!(m.contract().unwrap().max_abs_diff(&want), 0.0);
        assert_eq!(Mpo::identity(3, 2).unwrap().trace(), c64::new(8.0, 0.0));
        assert_eq!(m.bond_dims(), vec![1, 1, 1]);
    }

    #[test]
    fn sum_product_and_adjoint_are_linear_algebra() {
        let a = random_mpo(2, &[1, 2, 3, 1], 2);
        let b = random_mpo(3, &[1, 3, 2, 1], 2);
        let (da, db) = (a.contract().unwrap(), b.contract().unwrap());
        assert!(a.add(&b).unwrap().contract().unwrap().max_abs_diff(&da.add(&db).unwrap()) < 1e-12);
        assert!(a.compose(&b).unwrap().contract().unwrap().max_abs_diff(&da.matmul(&db).unwrap()) < 1e-11);
        assert!(a.adjoint().contract().unwrap().max_abs_diff(&da.adjoint()) == 0.0);
        assert_eq!(a.add(&b).unwrap().bond_dims(), vec![1, 5, 5, 1]);
        let single = random_mpo(4, &[1, 1], 3);
        let sum = single.add(&single).unwrap().contract().unwrap();
        assert!(sum.max_abs_diff(&single.contract().unwrap().scale(c64::new(2.0, 0.0))) < 1e-14);
    }

    #[test]
    fn lossless_compression_keeps_the_operator() {
        let a = random_mpo(5, &[1, 4, 4, 4, 1], 2);
        let c = a.compress(64, 0.0).unwrap();
        assert!(c.error == 0.0);
        assert!(c.mpo.contract().unwrap().max_abs_diff(&a.contract().unwrap()) < 1e-11);
        // ranks are capped by the smaller side of each cut
        assert_eq!(c.mpo.bond_dims(), vec![1, 4, 4, 4, 1]);
        let p = Mpo::product(&[pauli::x(), pauli::y(), pauli::z()]).unwrap();
        let doubled = p.add(&p).unwrap();
        let c = doubled.compress(1, 0.0).unwrap();
        assert_eq!(c.mpo.bond_dims(), vec![1, 1, 1, 1]);
        assert!(c.mpo.contract().unwrap().max_abs_diff(&p.contract().unwrap().scale(c64::new(2.0, 0.0))) < 1e-12);
    }

    #[test]
    fn truncation_error_is_the_frobenius_distance() {
        let a = random_mpo(6, &[1, 4, 8, 8, 4, 1], 2);
        let c = a.compress(4, 0.0).unwrap();
        assert!(c.mpo.max_bond() <= 4);
        let dist = c.mpo.contract().unwrap().sub(&a.contract().unwrap()).unwrap().mat().norm_l2();
        assert!((dist - c.error).abs() < 1e-9, "{dist} vs {}", c.error);
        assert!(a.compress(0, 0.0).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let a = random_mpo(7, &[1, 2, 3, 1], 2);
        let mut bytes = Vec::new();
        a.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], MPO_MAGIC);
        assert_eq!(Mpo::read_from(bytes.as_slice()).unwrap(), a);
        let mut corrupt = bytes.clone();
        corrupt.push(0);
        assert!(Mpo::read_from(corrupt.as_slice()).is_err());
        assert!(Mpo::read_from(&bytes[..bytes.len() - 3]).is_err());
        corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(Mpo::read_from(corrupt.as_slice()).is_err());
    }
}
