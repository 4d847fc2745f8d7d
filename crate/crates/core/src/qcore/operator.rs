use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use super::layout::HilbertLayout;
use super::C64;
use crate::error::{Error, Result};

/// Linear operator on a composite Hilbert space.
///
/// Entries are held in compressed-row form. Every operator the simulator
/// builds (ladder operators, dot projectors, their tensor products) has a
/// handful of entries per row, so products with state vectors and density
/// matrices cost `O(nnz)` per column rather than `O(dim^2)`. Use
/// [`Operator::to_dense`] when a dense matrix is needed.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    layout: HilbertLayout,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Operator {
    pub fn zeros(layout: HilbertLayout) -> Self {
        let n = layout.total_dim();
        Operator {
            layout,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(layout: HilbertLayout) -> Self {
        let n = layout.total_dim();
        Operator {
            layout,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![C64::new(1.0, 0.0); n],
        }
    }

    /// Builds from `(row, col, value)` entries; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        layout: HilbertLayout,
        entries: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Result<Self> {
        let n = layout.total_dim();
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
        for (r, c, v) in entries {
            if r >= n || c >= n {
                return Err(Error::Structure(format!(
                    "entry ({r}, {c}) outside a {n}x{n} operator"
                )));
            }
            rows[r].push((c, v));
        }
        Ok(Self::from_rows(layout, rows))
    }

    fn from_rows(layout: HilbertLayout, mut rows: Vec<Vec<(usize, C64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = C64::new(0.0, 0.0);
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v != C64::new(0.0, 0.0) {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Operator {
            layout,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(layout: HilbertLayout, m: &DMatrix<C64>) -> Result<Self> {
        let n = layout.total_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.nrows().max(m.ncols()),
            });
        }
        let entries = (0..n).flat_map(|r| (0..n).map(move |c| (r, c, m[(r, c)])));
        Self::from_triplets(layout, entries)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzero entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]];
        match span.binary_search(&c) {
            Ok(k) => self.vals[self.row_ptr[r] + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Same matrix, different factor structure (dimensions must agree).
    pub fn with_layout(mut self, layout: HilbertLayout) -> Result<Self> {
        if layout.total_dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: layout.total_dim(),
            });
        }
        self.layout = layout;
        Ok(self)
    }

    /// Renames the factor of a single-factor operator.
    pub fn relabel(self, label: &str) -> Result<Self> {
        let layout = self.layout.relabeled([label])?;
        self.with_layout(layout)
    }

    pub fn adjoint(&self) -> Self {
        let entries = self.iter().map(|(r, c, v)| (c, r, v.conj()));
        Self::from_triplets(self.layout.clone(), entries).expect("transpose stays in bounds")
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in out.vals.iter_mut() {
            *v *= s;
        }
        if s == C64::new(0.0, 0.0) {
            return Self::zeros(self.layout.clone());
        }
        out
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    fn check_same_dim(&self, other: &Operator) {
        assert_eq!(
            self.dim(),
            other.dim(),
            "operator dimension mismatch: {} vs {}",
            self.layout,
            other.layout
        );
    }

    fn combine(&self, other: &Operator, sign: f64) -> Self {
        self.check_same_dim(other);
        let n = self.dim();
        let rows = (0..n)
            .map(|r| {
                self.row(r)
                    .chain(other.row(r).map(|(c, v)| (c, v * sign)))
                    .collect()
            })
            .collect();
        Self::from_rows(self.layout.clone(), rows)
    }

    /// Sparse matrix product `self * other`.
    pub fn matmul(&self, other: &Operator) -> Self {
        self.check_same_dim(other);
        let n = self.dim();
        let mut acc = vec![C64::new(0.0, 0.0); n];
        let mut touched: Vec<usize> = Vec::new();
        let mut seen = vec![false; n];
        let mut rows = Vec::with_capacity(n);
        for r in 0..n {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            let row: Vec<(usize, C64)> = touched.iter().map(|&c| (c, acc[c])).collect();
            for &c in &touched {
                acc[c] = C64::new(0.0, 0.0);
                seen[c] = false;
            }
            touched.clear();
            rows.push(row);
        }
        Self::from_rows(self.layout.clone(), rows)
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    /// `out = self * x`.
    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *o = s;
        }
    }

    pub fn apply(&self, x: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.dim());
        self.apply_into(x.as_slice(), out.as_mut_slice());
        out
    }

    /// Dense product `self * m`, column by column.
    pub fn mul_dense(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.dim();
        assert_eq!(m.nrows(), n, "operator/matrix dimension mismatch");
        let mut out = DMatrix::zeros(n, m.ncols());
        for j in 0..m.ncols() {
            let src = m.column(j);
            let mut dst = out.column_mut(j);
            self.apply_into(src.as_slice(), dst.as_mut_slice());
        }
        out
    }

    /// `Tr(self * m)` without forming the product.
    pub fn trace_product(&self, m: &DMatrix<C64>) -> C64 {
        self.iter().map(|(r, c, v)| v * m[(c, r)]).sum()
    }

    /// Largest entrywise |A - A†|.
    pub fn hermiticity_defect(&self) -> f64 {
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum, an upper bound on the spectral radius.
    pub fn row_abs_sum_bound(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.iter().all(|(r, c, _)| r == c)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// Largest entrywise |A - B|.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        (self - other).iter().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.vals.is_empty()
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        self.scale(rhs)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale_re(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_re(-1.0)
    }
}

/// Kronecker product with `a`'s factors first.
pub fn tensor_product(a: &Operator, b: &Operator) -> Result<Operator> {
    let layout = a.layout().concat(b.layout())?;
    Ok(kron_raw(a, b, layout))
}

fn kron_raw(a: &Operator, b: &Operator, layout: HilbertLayout) -> Operator {
    let db = b.dim();
    let n = layout.total_dim();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(a.nnz() * b.nnz());
    let mut vals = Vec::with_capacity(a.nnz() * b.nnz());
    row_ptr.push(0);
    for ra in 0..a.dim() {
        for rb in 0..db {
            for (ca, va) in a.row(ra) {
                for (cb, vb) in b.row(rb) {
                    cols.push(ca * db + cb);
                    vals.push(va * vb);
                }
            }
            row_ptr.push(cols.len());
        }
    }
    Operator {
        layout,
        row_ptr,
        cols,
        vals,
    }
}

/// Lifts a single-factor operator onto `layout`, acting as the identity on
/// every other factor.
pub fn embed(op: &Operator, target_label: &str, layout: &HilbertLayout) -> Result<Operator> {
    let pos = layout.position(target_label)?;
    let dims = layout.dims();
    if op.dim() != dims[pos] {
        return Err(Error::DimensionMismatch {
            expected: dims[pos],
            found: op.dim(),
        });
    }
    let left: usize = dims[..pos].iter().product();
    let right: usize = dims[pos + 1..].iter().product();
    let id_left = Operator::identity(HilbertLayout::single("left", left));
    let id_right = Operator::identity(HilbertLayout::single("right", right));
    let inner = kron_raw(
        op,
        &id_right,
        HilbertLayout::single("inner", op.dim() * right),
    );
    Ok(kron_raw(&id_left, &inner, layout.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::fock::{annihilation_op, number_op};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn identity_tensor_identity() {
        let a = Operator::identity(HilbertLayout::single("a", 2));
        let b = Operator::identity(HilbertLayout::single("b", 3));
        let ab = tensor_product(&a, &b).unwrap();
        assert_eq!(ab, Operator::identity(HilbertLayout::new([("a", 2), ("b", 3)]).unwrap()));
    }

    #[test]
    fn duplicate_label_tensor_is_structural_error() {
        let a = Operator::identity(HilbertLayout::single("a", 2));
        assert!(matches!(tensor_product(&a, &a), Err(Error::Structure(_))));
    }

    #[test]
    fn kron_index_formula() {
        // row = i_A * dim_B + i_B for sigma_y (x) a with dims (2, 4)
        let sy = Operator::from_triplets(
            HilbertLayout::single("dot", 2),
            [(0, 1, c(1.0)), (1, 0, c(1.0))],
        )
        .unwrap();
        let a = annihilation_op(4).unwrap();
        let k = tensor_product(&sy, &a).unwrap();
        let (sd, ad) = (sy.to_dense(), a.to_dense());
        for ia in 0..2 {
            for ib in 0..4 {
                for ja in 0..2 {
                    for jb in 0..4 {
                        assert_eq!(k.get(ia * 4 + ib, ja * 4 + jb), sd[(ia, ja)] * ad[(ib, jb)]);
                    }
                }
            }
        }
    }

    #[test]
    fn embedded_number_operator_reads_photon_count() {
        let layout =
            HilbertLayout::new([("dot1", 2), ("dot2", 2), ("cav1", 4), ("cav2", 4)]).unwrap();
        let n1 = embed(&number_op(4).unwrap(), "cav1", &layout).unwrap();
        let idx = layout.flat_index(&[0, 0, 2, 0]);
        let mut v = DVector::zeros(layout.total_dim());
        v[idx] = c(1.0);
        let out = n1.apply(&v);
        assert!((out[idx] - c(2.0)).norm() < 1e-15);
        assert!((out.norm() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn embed_errors() {
        let layout = HilbertLayout::new([("dot", 2), ("cav", 4)]).unwrap();
        let a = annihilation_op(3).unwrap();
        assert!(matches!(embed(&a, "cav", &layout), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(embed(&a, "nope", &layout), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn distinct_factors_commute() {
        let layout = HilbertLayout::new([("cav1", 4), ("cav2", 4)]).unwrap();
        let a = annihilation_op(4).unwrap();
        let a1 = embed(&a, "cav1", &layout).unwrap();
        let a2d = embed(&a.adjoint(), "cav2", &layout).unwrap();
        assert!(a1.commutator(&a2d).is_zero());
    }

    #[test]
    fn dense_round_trip_and_matmul() {
        let a = annihilation_op(5).unwrap();
        let ad = a.adjoint();
        let prod = &ad * &a;
        let dense = ad.to_dense() * a.to_dense();
        assert_eq!(prod.to_dense(), dense);
        let back = Operator::from_dense(prod.layout().clone(), &dense).unwrap();
        assert_eq!(back, prod);
    }
}
