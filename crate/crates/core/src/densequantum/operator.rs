use faer::{c64, Mat};

use crate::error::{domain, Result};

/// Digit arithmetic for a tensor product of sites with dimensions `dims`.
/// Site 0 is the most significant digit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteLayout {
    dims: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl SiteLayout {
    pub fn new(dims: &[usize]) -> Self {
        let mut strides = vec![1; dims.len()];
        for v in (0..dims.len().saturating_sub(1)).rev() {
            strides[v] = strides[v + 1] * dims[v + 1];
        }
        let total = dims.iter().product();
        SiteLayout { dims: dims.to_vec(), strides, total }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    #[inline]
    pub fn digit(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % self.dims[site]
    }

    /// Joint digit of `sites` (first site most significant).
    #[inline]
    pub fn local_index(&self, index: usize, sites: &[usize]) -> usize {
        sites.iter().fold(0, |acc, &s| acc * self.dims[s] + self.digit(index, s))
    }

    /// `index` with the digits on `sites` replaced by the joint digit `local`.
    #[inline]
    pub fn replace_local(&self, index: usize, sites: &[usize], mut local: usize) -> usize {
        let mut out = index;
        for &s in sites.iter().rev() {
            let d = self.dims[s];
            let new = local % d;
            local /= d;
            out = out - self.digit(index, s) * self.strides[s] + new * self.strides[s];
        }
        out
    }
}

/// Square complex matrix acting on `⊗_v C^{dims[v]}`.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    layout: SiteLayout,
    mat: Mat<c64>,
    hermitian: bool,
}

impl DenseOperator {
    pub fn new(dims: &[usize], mat: Mat<c64>) -> Result<Self> {
        let layout = SiteLayout::new(dims);
        if mat.nrows() != layout.total() || mat.ncols() != layout.total() {
            return domain(format!(
                "matrix is {}x{} but the site dimensions {:?} require {}",
                mat.nrows(),
                mat.ncols(),
                dims,
                layout.total()
            ));
        }
        let hermitian = is_hermitian(&mat);
        Ok(DenseOperator { layout, mat, hermitian })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let layout = SiteLayout::new(dims);
        let n = layout.total();
        DenseOperator { layout, mat: Mat::zeros(n, n), hermitian: true }
    }

    pub fn identity(dims: &[usize]) -> Self {
        let layout = SiteLayout::new(dims);
        let n = layout.total();
        DenseOperator { layout, mat: Mat::identity(n, n), hermitian: true }
    }

    /// Embeds `local` (acting on `sites`, in the given order) with identities elsewhere.
    pub fn embed(dims: &[usize], local: &Mat<c64>, sites: &[usize]) -> Result<Self> {
        let layout = SiteLayout::new(dims);
        let local_dim: usize = sites.iter().map(|&s| dims.get(s).copied().unwrap_or(0)).product();
        if sites.iter().any(|&s| s >= dims.len()) || local.nrows() != local_dim || local.ncols() != local_dim {
            return domain(format!("local operator of size {} does not fit sites {:?}", local.nrows(), sites));
        }
        let n = layout.total();
        let mut mat = Mat::<c64>::zeros(n, n);
        for row in 0..n {
            let a = layout.local_index(row, sites);
            for b in 0..local_dim {
                let v = local[(a, b)];
                if v != c64::new(0.0, 0.0) {
                    mat[(row, layout.replace_local(row, sites, b))] = v;
                }
            }
        }
        Ok(DenseOperator { layout, mat, hermitian: is_hermitian(local) })
    }

    pub fn dims(&self) -> &[usize] {
        self.layout.dims()
    }

    pub fn layout(&self) -> &SiteLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total()
    }

    pub fn num_sites(&self) -> usize {
        self.layout.dims().len()
    }

    pub fn mat(&self) -> &Mat<c64> {
        &self.mat
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.mat
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    /// `Tr(rho A)` where `self` is `A`.
    pub fn expectation(&self, rho: &DenseOperator) -> c64 {
        let n = self.dim();
        let mut acc = c64::new(0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                acc += rho.mat[(j, i)] * self.mat[(i, j)];
            }
        }
        acc
    }

    pub fn adjoint(&self) -> DenseOperator {
        DenseOperator { layout: self.layout.clone(), mat: self.mat.adjoint().to_owned(), hermitian: self.hermitian }
    }

    pub fn matmul(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        self.check_same_space(rhs)?;
        Self::new(self.dims(), &self.mat * &rhs.mat)
    }

    pub fn add(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        self.check_same_space(rhs)?;
        Self::new(self.dims(), &self.mat + &rhs.mat)
    }

    pub fn sub(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        self.check_same_space(rhs)?;
        Self::new(self.dims(), &self.mat - &rhs.mat)
    }

    pub fn scale(&self, factor: c64) -> DenseOperator {
        let mat = Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] * factor);
        let hermitian = self.hermitian && factor.im == 0.0;
        DenseOperator { layout: self.layout.clone(), mat, hermitian }
    }

    /// `A ⊗ B` with `self` on the leading sites.
    pub fn kron(&self, rhs: &DenseOperator) -> DenseOperator {
        let dims: Vec<usize> = self.dims().iter().chain(rhs.dims()).copied().collect();
        let mat = super::pauli::kron(&self.mat, &rhs.mat);
        DenseOperator { layout: SiteLayout::new(&dims), mat, hermitian: self.hermitian && rhs.hermitian }
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &DenseOperator) -> f64 {
        let n = self.dim().min(rhs.dim());
        let mut m: f64 = if self.dim() == rhs.dim() { 0.0 } else { f64::INFINITY };
        for j in 0..n {
            for i in 0..n {
                m = m.max((self.mat[(i, j)] - rhs.mat[(i, j)]).norm());
            }
        }
        m
    }

    /// Largest entrywise modulus of `A - A^†`.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.mat)
    }

    /// `self ← self · (local ⊗ 1)` with `local` acting on `sites`.
    pub fn mul_local_right(&mut self, local: &Mat<c64>, sites: &[usize]) {
        let n = self.dim();
        let k = local.nrows();
        let mut row_buf = vec![c64::new(0.0, 0.0); n];
        let mut group = vec![0usize; k];
        let mut vals = vec![c64::new(0.0, 0.0); k];
        for i in 0..n {
            for (j, slot) in row_buf.iter_mut().enumerate() {
                *slot = self.mat[(i, j)];
            }
            for j in 0..n {
                if self.layout.local_index(j, sites) != 0 {
                    continue;
                }
                for (a, g) in group.iter_mut().enumerate() {
                    *g = self.layout.replace_local(j, sites, a);
                }
                for (b, v) in vals.iter_mut().enumerate() {
                    *v = (0..k).map(|a| row_buf[group[a]] * local[(a, b)]).sum();
                }
                for b in 0..k {
                    self.mat[(i, group[b])] = vals[b];
                }
            }
        }
        self.hermitian = is_hermitian(&self.mat);
    }

    pub(crate) fn check_same_space(&self, rhs: &DenseOperator) -> Result<()> {
        if self.dims() != rhs.dims() {
            return domain(format!("operator dimensions {:?} and {:?} differ", self.dims(), rhs.dims()));
        }
        Ok(())
    }
}

pub(crate) fn hermiticity_defect(m: &Mat<c64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn is_hermitian(m: &Mat<c64>) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = (0..m.ncols())
        .flat_map(|j| (0..m.nrows()).map(move |i| (i, j)))
        .map(|(i, j)| m[(i, j)].norm())
        .fold(1.0, f64::max);
    hermiticity_defect(m) <= 1e-12 * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densequantum::pauli;

    #[test]
    fn layout_digits_follow_site_order() {
        let l = SiteLayout::new(&[2, 3, 2]);
        assert_eq!(l.total(), 12);
        // index = 6 d0 + 2 d1 + d2
        assert_eq!((l.digit(11, 0), l.digit(11, 1), l.digit(11, 2)), (1, 2, 1));
        assert_eq!(l.local_index(11, &[2, 0]), 3);
        assert_eq!(l.replace_local(11, &[1], 0), 7);
    }

    #[test]
    fn embedding_matches_kronecker() {
        let op = DenseOperator::embed(&[2, 2], &pauli::x(), &[0]).unwrap();
        let expected = pauli::kron(&pauli::x(), &pauli::identity());
        assert_eq!(op.mat(), &expected);
        let swapped = DenseOperator::embed(&[2, 2], &pauli::kron(&pauli::x(), &pauli::z()), &[1, 0]).unwrap();
        let expected = pauli::kron(&pauli::z(), &pauli::x());
        assert_eq!(swapped.mat(), &expected);
    }

    #[test]
    fn right_multiplication_by_local_operator() {
        let dims = [2, 2, 2];
        let base = DenseOperator::embed(&dims, &pauli::kron(&pauli::y(), &pauli::x()), &[0, 2]).unwrap();
        let h = pauli::kron(&pauli::z(), &pauli::x());
        let mut fast = base.clone();
        fast.mul_local_right(&h, &[1, 2]);
        let slow = base.matmul(&DenseOperator::embed(&dims, &h, &[1, 2]).unwrap()).unwrap();
        assert!(fast.max_abs_diff(&slow) < 1e-15);
    }

    #[test]
    fn hermitian_flag() {
        assert!(DenseOperator::embed(&[2], &pauli::y(), &[0]).unwrap().is_hermitian());
        let m = Mat::from_fn(2, 2, |i, j| c64::new((i + 2 * j) as f64, 0.0));
        assert!(!DenseOperator::new(&[2], m).unwrap().is_hermitian());
        assert!(DenseOperator::new(&[2, 2], Mat::zeros(3, 3)).is_err());
    }
}
