//! Sparse operator algebra on a truncated two-mode Fock space.
//!
//! Basis vectors `e_{n,m}` carry `n` quanta in the subharmonic mode `a` and
//! `m` quanta in the pump mode `b`. Operators are stored in compressed sparse
//! row form; states and density operators are dense (`ndarray`, row-major).

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type StateVector = Array1<Complex64>;
pub type DensityOperator = Array2<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Hard cutoff `n <= n_max`, `m <= m_max` on the two-mode number basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TruncatedSpace {
    n_max: usize,
    m_max: usize,
}

impl TruncatedSpace {
    pub fn new(n_max: usize, m_max: usize) -> Self {
        TruncatedSpace { n_max, m_max }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1) * (self.m_max + 1)
    }

    /// Flat index of `e_{n,m}`, `None` outside the truncation.
    pub fn index(&self, n: usize, m: usize) -> Option<usize> {
        (n <= self.n_max && m <= self.m_max).then(|| n * (self.m_max + 1) + m)
    }

    /// Inverse of [`TruncatedSpace::index`].
    pub fn levels(&self, idx: usize) -> (usize, usize) {
        debug_assert!(idx < self.dim());
        (idx / (self.m_max + 1), idx % (self.m_max + 1))
    }

    pub fn basis(&self, n: usize, m: usize) -> Result<StateVector> {
        let idx = self
            .index(n, m)
            .ok_or_else(|| Error::Index(format!("e_({n},{m}) outside truncation ({}, {})", self.n_max, self.m_max)))?;
        let mut v = Array1::zeros(self.dim());
        v[idx] = ONE;
        Ok(v)
    }

    /// True when `e_{n,m}` lies within `guard` levels of either cutoff.
    pub fn in_guard_band(&self, idx: usize, guard: usize) -> bool {
        let (n, m) = self.levels(idx);
        n + guard > self.n_max || m + guard > self.m_max
    }

    /// Flat indices of basis states with `n <= n_max - guard` and `m <= m_max - guard`.
    pub fn interior(&self, guard: usize) -> Vec<usize> {
        if guard > self.n_max || guard > self.m_max {
            return Vec::new();
        }
        let mut out = Vec::new();
        for n in 0..=self.n_max - guard {
            for m in 0..=self.m_max - guard {
                out.push(self.index(n, m).unwrap());
            }
        }
        out
    }

    fn check_same(&self, other: &TruncatedSpace) -> Result<()> {
        if self != other {
            return Err(Error::Dimension(format!(
                "operands live on different truncations ({}, {}) and ({}, {})",
                self.n_max, self.m_max, other.n_max, other.m_max
            )));
        }
        Ok(())
    }
}

impl fmt::Display for TruncatedSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n_max={} m_max={} dim={}", self.n_max, self.m_max, self.dim())
    }
}

/// Square CSR matrix. Values may contain explicit zeros; this is the raw
/// kernel type used on hot paths.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Csr {
    pub(crate) dim: usize,
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) cols: Vec<usize>,
    pub(crate) vals: Vec<Complex64>,
}

impl Csr {
    pub(crate) fn from_map(dim: usize, map: &BTreeMap<(usize, usize), Complex64>, keep_zeros: bool) -> Self {
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(map.len());
        let mut vals = Vec::with_capacity(map.len());
        for (&(r, c), &v) in map {
            if !keep_zeros && v == ZERO {
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Csr { dim, row_ptr, cols, vals }
    }

    pub(crate) fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub(crate) fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// `out += coeff * A * rho`.
    pub(crate) fn left_mul_acc(&self, rho: &DensityOperator, coeff: Complex64, out: &mut DensityOperator) {
        let n = self.dim;
        let src = rho.as_slice().expect("standard layout");
        let dst = out.as_slice_mut().expect("standard layout");
        for r in 0..n {
            let out_row = &mut dst[r * n..(r + 1) * n];
            for (c, a) in self.row(r) {
                let w = coeff * a;
                let in_row = &src[c * n..(c + 1) * n];
                for (o, x) in out_row.iter_mut().zip(in_row) {
                    *o += w * x;
                }
            }
        }
    }

    /// `out += coeff * rho * A^dagger`.
    pub(crate) fn right_mul_adjoint_acc(&self, rho: &DensityOperator, coeff: Complex64, out: &mut DensityOperator) {
        let n = self.dim;
        let src = rho.as_slice().expect("standard layout");
        let dst = out.as_slice_mut().expect("standard layout");
        for i in 0..n {
            let in_row = &src[i * n..(i + 1) * n];
            let out_row = &mut dst[i * n..(i + 1) * n];
            for k in 0..n {
                let mut acc = ZERO;
                for (j, a) in self.row(k) {
                    acc += in_row[j] * a.conj();
                }
                out_row[k] += coeff * acc;
            }
        }
    }

    /// `out += coeff * rho * A`.
    pub(crate) fn right_mul_acc(&self, rho: &DensityOperator, coeff: Complex64, out: &mut DensityOperator) {
        let n = self.dim;
        let src = rho.as_slice().expect("standard layout");
        let dst = out.as_slice_mut().expect("standard layout");
        for i in 0..n {
            let in_row = &src[i * n..(i + 1) * n];
            let out_row = &mut dst[i * n..(i + 1) * n];
            for (j, &x) in in_row.iter().enumerate() {
                if x == ZERO {
                    continue;
                }
                let w = coeff * x;
                for (k, a) in self.row(j) {
                    out_row[k] += w * a;
                }
            }
        }
    }

    /// Max absolute row sum, an upper bound for the spectral radius.
    pub(crate) fn norm_inf(&self) -> f64 {
        (0..self.dim).map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Max absolute column sum.
    pub(crate) fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.dim];
        for (_, c, v) in self.triplets() {
            sums[c] += v.norm();
        }
        sums.into_iter().fold(0.0, f64::max)
    }
}

/// Sparse complex operator on a [`TruncatedSpace`]. Only exact zeros are
/// dropped from storage.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemOperator {
    space: TruncatedSpace,
    csr: Csr,
}

impl SystemOperator {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        space: TruncatedSpace,
        triplets: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Result<Self> {
        let dim = space.dim();
        let mut map = BTreeMap::new();
        for (r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::Index(format!("entry ({r}, {c}) outside dimension {dim}")));
            }
            *map.entry((r, c)).or_insert(ZERO) += v;
        }
        Ok(Self::from_map(space, &map))
    }

    fn from_map(space: TruncatedSpace, map: &BTreeMap<(usize, usize), Complex64>) -> Self {
        SystemOperator { space, csr: Csr::from_map(space.dim(), map, false) }
    }

    pub fn zeros(space: TruncatedSpace) -> Self {
        Self::from_map(space, &BTreeMap::new())
    }

    pub fn identity(space: TruncatedSpace) -> Self {
        Self::diagonal(space, |_| ONE)
    }

    /// Diagonal operator with entries `f(flat index)`.
    pub fn diagonal(space: TruncatedSpace, f: impl Fn(usize) -> Complex64) -> Self {
        let map = (0..space.dim()).map(|i| ((i, i), f(i))).collect();
        Self::from_map(space, &map)
    }

    /// Dense to sparse, dropping exact zeros.
    pub fn from_dense(space: TruncatedSpace, dense: &Array2<Complex64>) -> Result<Self> {
        let dim = space.dim();
        if dense.dim() != (dim, dim) {
            return Err(Error::Dimension(format!("dense matrix {:?} on space of dimension {dim}", dense.dim())));
        }
        Self::from_triplets(space, dense.indexed_iter().map(|((r, c), &v)| (r, c, v)))
    }

    pub fn space(&self) -> TruncatedSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn nnz(&self) -> usize {
        self.csr.vals.len()
    }

    pub fn is_zero(&self) -> bool {
        self.nnz() == 0
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        if row >= self.dim() {
            return ZERO;
        }
        self.csr.row(row).find(|&(c, _)| c == col).map_or(ZERO, |(_, v)| v)
    }

    /// Matrix element `<e_{n,m}| X e_{n',m'}>`; zero outside the truncation.
    pub fn element(&self, (n, m): (usize, usize), (n2, m2): (usize, usize)) -> Complex64 {
        match (self.space.index(n, m), self.space.index(n2, m2)) {
            (Some(r), Some(c)) => self.get(r, c),
            _ => ZERO,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.csr.triplets()
    }

    pub(crate) fn csr(&self) -> &Csr {
        &self.csr
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        let mut out = Array2::zeros((self.dim(), self.dim()));
        for (r, c, v) in self.triplets() {
            out[[r, c]] = v;
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let map = self.triplets().map(|(r, c, v)| ((c, r), v.conj())).collect();
        Self::from_map(self.space, &map)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.space.check_same(&other.space)?;
        let mut map: BTreeMap<_, _> = self.triplets().map(|(r, c, v)| ((r, c), v)).collect();
        for (r, c, v) in other.triplets() {
            *map.entry((r, c)).or_insert(ZERO) += v;
        }
        Ok(Self::from_map(self.space, &map))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, z: Complex64) -> Self {
        let map = self.triplets().map(|(r, c, v)| ((r, c), z * v)).collect();
        Self::from_map(self.space, &map)
    }

    /// `self + z * identity`.
    pub fn shift(&self, z: Complex64) -> Self {
        self.add(&Self::identity(self.space).scale(z)).expect("same space")
    }

    /// Operator product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.space.check_same(&other.space)?;
        let mut map = BTreeMap::new();
        for r in 0..self.dim() {
            for (k, a) in self.csr.row(r) {
                for (c, b) in other.csr.row(k) {
                    *map.entry((r, c)).or_insert(ZERO) += a * b;
                }
            }
        }
        Ok(Self::from_map(self.space, &map))
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    pub fn apply_to_vector(&self, v: &StateVector) -> Result<StateVector> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!("vector of length {} on dimension {}", v.len(), self.dim())));
        }
        Ok(Array1::from_iter((0..self.dim()).map(|r| self.csr.row(r).map(|(c, a)| a * v[c]).sum())))
    }

    fn check_density(&self, rho: &DensityOperator) -> Result<()> {
        let d = self.dim();
        if rho.dim() != (d, d) {
            return Err(Error::Dimension(format!("density {:?} on dimension {d}", rho.dim())));
        }
        Ok(())
    }

    /// `X rho`, never materializing a superoperator.
    pub fn apply_to_density_left(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        self.check_density(rho)?;
        let rho = rho.as_standard_layout();
        let mut out = Array2::zeros(rho.raw_dim());
        self.csr.left_mul_acc(&rho.to_owned(), ONE, &mut out);
        Ok(out)
    }

    /// `rho X`.
    pub fn apply_to_density_right(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        self.check_density(rho)?;
        let rho = rho.as_standard_layout();
        let mut out = Array2::zeros(rho.raw_dim());
        self.csr.right_mul_acc(&rho.to_owned(), ONE, &mut out);
        Ok(out)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.triplets().map(|(_, _, v)| v.norm()).fold(0.0, f64::max))
    }

    pub fn is_real_nonnegative(&self) -> bool {
        self.triplets().all(|(_, _, v)| v.im == 0.0 && v.re >= 0.0)
    }
}

fn ladder(space: TruncatedSpace, mode_b: bool, raise: bool) -> SystemOperator {
    let mut trip = Vec::new();
    for idx in 0..space.dim() {
        let (n, m) = space.levels(idx);
        let q = if mode_b { m } else { n };
        let (target, amp) = if raise {
            (q + 1, ((q + 1) as f64).sqrt())
        } else {
            if q == 0 {
                continue;
            }
            (q - 1, (q as f64).sqrt())
        };
        let dest = if mode_b { space.index(n, target) } else { space.index(target, m) };
        // raising out of the box is dropped
        if let Some(r) = dest {
            trip.push((r, idx, Complex64::new(amp, 0.0)));
        }
    }
    SystemOperator::from_triplets(space, trip).expect("indices in range")
}

/// Subharmonic annihilator `a e_{n,m} = sqrt(n) e_{n-1,m}`.
pub fn ladder_a(space: TruncatedSpace) -> SystemOperator {
    ladder(space, false, false)
}

/// Truncated creator `a† e_{n,m} = sqrt(n+1) e_{n+1,m}` for `n < n_max`.
pub fn ladder_a_dag(space: TruncatedSpace) -> SystemOperator {
    ladder(space, false, true)
}

pub fn ladder_b(space: TruncatedSpace) -> SystemOperator {
    ladder(space, true, false)
}

pub fn ladder_b_dag(space: TruncatedSpace) -> SystemOperator {
    ladder(space, true, true)
}

pub fn number_a(space: TruncatedSpace) -> SystemOperator {
    SystemOperator::diagonal(space, |i| Complex64::new(space.levels(i).0 as f64, 0.0))
}

pub fn number_b(space: TruncatedSpace) -> SystemOperator {
    SystemOperator::diagonal(space, |i| Complex64::new(space.levels(i).1 as f64, 0.0))
}

/// `Tr(rho)`.
pub fn trace(rho: &DensityOperator) -> Complex64 {
    rho.diag().sum()
}

/// `Tr(X rho)` for a sparse `X`.
pub fn expectation(x: &SystemOperator, rho: &DensityOperator) -> Complex64 {
    x.triplets().map(|(r, c, v)| v * rho[[c, r]]).sum()
}

/// Largest entrywise modulus of `rho - rho^dagger`.
pub fn hermiticity_defect(rho: &DensityOperator) -> f64 {
    let n = rho.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((rho[[i, j]] - rho[[j, i]].conj()).norm());
        }
    }
    worst
}

/// `|psi><psi|`.
pub fn pure_density(psi: &StateVector) -> DensityOperator {
    let n = psi.len();
    Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj())
}

/// Eigenvalues of the Hermitian part of `rho`, ascending.
pub fn hermitian_eigenvalues(rho: &DensityOperator) -> Vec<f64> {
    let n = rho.nrows();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (rho[[i, j]] + rho[[j, i]].conj()));
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Sum of singular values.
pub fn trace_norm(rho: &DensityOperator) -> f64 {
    let (r, c) = rho.dim();
    let m = nalgebra::DMatrix::from_fn(r, c, |i, j| rho[[i, j]]);
    m.singular_values().sum()
}
