//! Sparse operators (CSR) and the dense/sparse operator union used by the
//! assembled systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// Coordinate-format accumulator. Duplicate coordinates are summed when the
/// operator is finalized.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols, "triplet out of bounds");
        self.entries.push((row, col, value));
    }

    /// Adds every entry of `op` shifted by `(row_off, col_off)` and scaled.
    pub fn push_operator(
        &mut self,
        op: &SparseOperator,
        row_off: usize,
        col_off: usize,
        scale: f64,
    ) {
        for (r, c, v) in op.iter() {
            self.push(row_off + r, col_off + c, scale * v);
        }
    }

    /// Adds a dense block at `(row_off, col_off)`, skipping exact zeros.
    pub fn push_dense(&mut self, m: &DMatrix<f64>, row_off: usize, col_off: usize) {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != 0.0 {
                    self.push(row_off + i, col_off + j, v);
                }
            }
        }
    }

    pub fn finalize(mut self) -> SparseOperator {
        self.entries.sort_unstable_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx,
            values,
        }
        .pruned()
    }
}

/// Compressed-row sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TripletBuilder::new(rows, cols).finalize()
    }

    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 1.0);
        }
        b.finalize()
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut b = TripletBuilder::new(m.nrows(), m.ncols());
        b.push_dense(m, 0, 0);
        b.finalize()
    }

    fn pruned(self) -> Self {
        if self.values.iter().all(|&v| v != 0.0) {
            return self;
        }
        let mut b = TripletBuilder::new(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            if v != 0.0 {
                b.entries.push((r, c, v));
            }
        }
        // entries are already sorted and unique
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::with_capacity(b.entries.len());
        let mut values = Vec::with_capacity(b.entries.len());
        for (r, c, v) in b.entries {
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..self.rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let slice = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match slice.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(invalid(format!(
                "operator has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.rows];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without shape checks.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yr = s;
        }
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut b = TripletBuilder::new(self.cols, self.rows);
        for (r, c, v) in self.iter() {
            b.push(c, r, v);
        }
        b.finalize()
    }

    pub fn scale(&self, s: f64) -> SparseOperator {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out.pruned()
    }

    pub fn add(&self, other: &SparseOperator) -> Result<SparseOperator> {
        self.check_same_shape(other.rows, other.cols)?;
        let mut b = TripletBuilder::new(self.rows, self.cols);
        b.push_operator(self, 0, 0, 1.0);
        b.push_operator(other, 0, 0, 1.0);
        Ok(b.finalize())
    }

    pub fn matmul(&self, other: &SparseOperator) -> Result<SparseOperator> {
        if self.cols != other.rows {
            return Err(invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut b = TripletBuilder::new(self.rows, other.cols);
        for (r, k, v) in self.iter() {
            for (c, w) in other.row(k) {
                b.push(r, c, v * w);
            }
        }
        Ok(b.finalize())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    /// `max |A + Aᵀ|` over all entries; 0 exactly for a skew operator.
    pub fn skew_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for (r, c, v) in self.iter() {
            worst = worst.max((v + self.get(c, r)).abs());
        }
        worst
    }

    /// Symmetrically permuted copy `P A Pᵀ` where `order[new] = old`.
    pub fn permuted(&self, order: &[usize]) -> Result<SparseOperator> {
        if self.rows != self.cols || order.len() != self.rows {
            return Err(invalid(
                "permutation needs a square operator of matching size",
            ));
        }
        let mut inv = vec![0usize; order.len()];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        let mut b = TripletBuilder::new(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            b.push(inv[r], inv[c], v);
        }
        Ok(b.finalize())
    }

    /// Lower and upper bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for (r, c, _) in self.iter() {
            if r > c {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
        (kl, ku)
    }

    fn check_same_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(invalid(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, rows, cols
            )));
        }
        Ok(())
    }
}

/// An assembled operator: sparse when every coefficient is local, dense once a
/// nonlocal coefficient is involved.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearOperator {
    Sparse(SparseOperator),
    Dense(DMatrix<f64>),
}

impl LinearOperator {
    pub fn rows(&self) -> usize {
        match self {
            LinearOperator::Sparse(s) => s.rows(),
            LinearOperator::Dense(d) => d.nrows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinearOperator::Sparse(s) => s.cols(),
            LinearOperator::Dense(d) => d.ncols(),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, LinearOperator::Dense(_))
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            LinearOperator::Sparse(s) => s.apply(x),
            LinearOperator::Dense(d) => {
                if x.len() != d.ncols() {
                    return Err(invalid(format!(
                        "operator has {} columns, vector has {} entries",
                        d.ncols(),
                        x.len()
                    )));
                }
                Ok((d * DVector::from_column_slice(x)).data.into())
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            LinearOperator::Sparse(s) => s.to_dense(),
            LinearOperator::Dense(d) => d.clone(),
        }
    }

    pub fn transpose(&self) -> LinearOperator {
        match self {
            LinearOperator::Sparse(s) => LinearOperator::Sparse(s.transpose()),
            LinearOperator::Dense(d) => LinearOperator::Dense(d.transpose()),
        }
    }

    pub fn scale(&self, s: f64) -> LinearOperator {
        match self {
            LinearOperator::Sparse(m) => LinearOperator::Sparse(m.scale(s)),
            LinearOperator::Dense(d) => LinearOperator::Dense(d * s),
        }
    }

    /// Sum; promotes to dense if either side is dense.
    pub fn add(&self, other: &LinearOperator) -> Result<LinearOperator> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(invalid("shape mismatch in operator sum"));
        }
        Ok(match (self, other) {
            (LinearOperator::Sparse(a), LinearOperator::Sparse(b)) => {
                LinearOperator::Sparse(a.add(b)?)
            }
            _ => LinearOperator::Dense(self.to_dense() + other.to_dense()),
        })
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn sym(&self) -> LinearOperator {
        match self {
            LinearOperator::Sparse(s) => {
                LinearOperator::Sparse(s.add(&s.transpose()).expect("square").scale(0.5))
            }
            LinearOperator::Dense(d) => LinearOperator::Dense(crate::linalg::sym(d)),
        }
    }

    /// `⟨A x, y⟩`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(dot(&self.apply(x)?, y))
    }

    pub fn relative_asymmetry(&self) -> f64 {
        match self {
            LinearOperator::Sparse(s) => {
                let scale = s.iter().fold(0.0_f64, |m, (_, _, v)| m.max(v.abs()));
                if scale == 0.0 {
                    return 0.0;
                }
                s.iter()
                    .fold(0.0_f64, |m, (r, c, v)| m.max((v - s.get(c, r)).abs()))
                    / scale
            }
            LinearOperator::Dense(d) => crate::linalg::relative_asymmetry(d),
        }
    }
}

impl From<SparseOperator> for LinearOperator {
    fn from(s: SparseOperator) -> Self {
        LinearOperator::Sparse(s)
    }
}

impl From<DMatrix<f64>> for LinearOperator {
    fn from(d: DMatrix<f64>) -> Self {
        LinearOperator::Dense(d)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
