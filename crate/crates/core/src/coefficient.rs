//! Coefficient blocks: linear maps between grid fields, either local
//! (one small matrix per cell) or nonlocal (one dense matrix coupling all
//! cells, e.g. a convolution).

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::linalg;
use crate::sparse::{LinearOperator, TripletBuilder};

/// Largest grid on which dense nonlocal blocks are allowed.
pub const DEFAULT_DENSE_CELL_CAP: usize = 4096;

/// Relative singular-value threshold below which a block counts as singular.
pub const SINGULARITY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    DiagonalPerCell,
    DenseNonlocal,
}

#[derive(Debug, Clone, PartialEq)]
enum Data {
    PerCell(Vec<DMatrix<f64>>),
    Nonlocal(DMatrix<f64>),
}

/// Linear operator from a `cols`-component field to a `rows`-component field.
///
/// Nonlocal data is indexed like fields: row `cell * rows + r`, column
/// `cell * cols + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBlock {
    rows: usize,
    cols: usize,
    cells: usize,
    data: Data,
}

impl CoefficientBlock {
    pub fn per_cell(rows: usize, cols: usize, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(invalid("coefficient block needs at least one cell"));
        }
        for (c, b) in blocks.iter().enumerate() {
            if b.nrows() != rows || b.ncols() != cols {
                return Err(invalid(format!(
                    "cell {c}: expected {rows}x{cols} block, got {}x{}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("cell {c}: non-finite coefficient")));
            }
        }
        Ok(Self {
            rows,
            cols,
            cells: blocks.len(),
            data: Data::PerCell(blocks),
        })
    }

    /// The same matrix in every cell.
    pub fn uniform(cells: usize, m: DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            cells,
            data: Data::PerCell(vec![m; cells]),
        }
    }

    pub fn identity(cells: usize, dim: usize) -> Self {
        Self::uniform(cells, DMatrix::identity(dim, dim))
    }

    pub fn scalar_identity(cells: usize, dim: usize, s: f64) -> Self {
        Self::uniform(cells, DMatrix::identity(dim, dim) * s)
    }

    pub fn zeros(cells: usize, rows: usize, cols: usize) -> Self {
        Self::uniform(cells, DMatrix::zeros(rows, cols))
    }

    /// 1x1 multiplication operator by a scalar field.
    pub fn from_scalar_field(values: &[f64]) -> Result<Self> {
        Self::per_cell(
            1,
            1,
            values
                .iter()
                .map(|&v| DMatrix::from_element(1, 1, v))
                .collect(),
        )
    }

    pub fn nonlocal(rows: usize, cols: usize, cells: usize, m: DMatrix<f64>) -> Result<Self> {
        Self::nonlocal_with_cap(rows, cols, cells, m, DEFAULT_DENSE_CELL_CAP)
    }

    pub fn nonlocal_with_cap(
        rows: usize,
        cols: usize,
        cells: usize,
        m: DMatrix<f64>,
        cap: usize,
    ) -> Result<Self> {
        if cells > cap {
            return Err(Error::Capacity {
                what: "dense nonlocal block".into(),
                cells,
                cap,
            });
        }
        if m.nrows() != rows * cells || m.ncols() != cols * cells {
            return Err(invalid(format!(
                "nonlocal {rows}x{cols} block on {cells} cells must be {}x{}, got {}x{}",
                rows * cells,
                cols * cells,
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite nonlocal coefficient"));
        }
        Ok(Self {
            rows,
            cols,
            cells,
            data: Data::Nonlocal(m),
        })
    }

    pub fn kind(&self) -> BlockKind {
        match self.data {
            Data::PerCell(_) => BlockKind::DiagonalPerCell,
            Data::Nonlocal(_) => BlockKind::DenseNonlocal,
        }
    }

    pub fn is_nonlocal(&self) -> bool {
        self.kind() == BlockKind::DenseNonlocal
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Per-cell matrix (local blocks only).
    pub fn cell_block(&self, cell: usize) -> Option<&DMatrix<f64>> {
        match &self.data {
            Data::PerCell(b) => b.get(cell),
            Data::Nonlocal(_) => None,
        }
    }

    /// One-cell copy of a local block.
    pub fn restrict_to_cell(&self, cell: usize) -> Result<Self> {
        let b = self
            .cell_block(cell)
            .ok_or_else(|| invalid("cannot restrict a nonlocal block to one cell"))?;
        Ok(Self::uniform(1, b.clone()))
    }

    /// Global `(rows·Nc) x (cols·Nc)` matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.data {
            Data::Nonlocal(m) => m.clone(),
            Data::PerCell(blocks) => {
                let mut m = DMatrix::zeros(self.rows * self.cells, self.cols * self.cells);
                for (c, b) in blocks.iter().enumerate() {
                    m.view_mut((c * self.rows, c * self.cols), (self.rows, self.cols))
                        .copy_from(b);
                }
                m
            }
        }
    }

    fn promoted(&self) -> Result<DMatrix<f64>> {
        if self.cells > DEFAULT_DENSE_CELL_CAP {
            return Err(Error::Capacity {
                what: "dense promotion of a coefficient block".into(),
                cells: self.cells,
                cap: DEFAULT_DENSE_CELL_CAP,
            });
        }
        Ok(self.to_dense())
    }

    /// Dense version of this block (no-op for nonlocal blocks).
    pub fn to_nonlocal(&self) -> Result<Self> {
        Self::nonlocal(self.rows, self.cols, self.cells, self.promoted()?)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols * self.cells {
            return Err(invalid(format!(
                "{}x{} block on {} cells cannot act on a field of length {}",
                self.rows,
                self.cols,
                self.cells,
                x.len()
            )));
        }
        Ok(match &self.data {
            Data::PerCell(blocks) => {
                let mut y = vec![0.0; self.rows * self.cells];
                for (c, b) in blocks.iter().enumerate() {
                    let xc = &x[c * self.cols..(c + 1) * self.cols];
                    let yc = &mut y[c * self.rows..(c + 1) * self.rows];
                    for (r, yr) in yc.iter_mut().enumerate() {
                        *yr = (0..self.cols).map(|k| b[(r, k)] * xc[k]).sum();
                    }
                }
                y
            }
            Data::Nonlocal(m) => (m * nalgebra::DVector::from_column_slice(x)).data.into(),
        })
    }

    fn map(&self, rows: usize, cols: usize, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        match &self.data {
            Data::PerCell(blocks) => Self {
                rows,
                cols,
                cells: self.cells,
                data: Data::PerCell(blocks.iter().map(f).collect()),
            },
            Data::Nonlocal(m) => Self {
                rows,
                cols,
                cells: self.cells,
                data: Data::Nonlocal(f(m)),
            },
        }
    }

    fn zip(
        &self,
        other: &Self,
        rows: usize,
        cols: usize,
        f: impl Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>,
    ) -> Result<Self> {
        if self.cells != other.cells {
            return Err(invalid(format!(
                "blocks live on different grids ({} vs {} cells)",
                self.cells, other.cells
            )));
        }
        Ok(match (&self.data, &other.data) {
            (Data::PerCell(a), Data::PerCell(b)) => Self {
                rows,
                cols,
                cells: self.cells,
                data: Data::PerCell(a.iter().zip(b).map(|(x, y)| f(x, y)).collect()),
            },
            _ => Self {
                rows,
                cols,
                cells: self.cells,
                data: Data::Nonlocal(f(&self.promoted()?, &other.promoted()?)),
            },
        })
    }

    pub fn transpose(&self) -> Self {
        self.map(self.cols, self.rows, |m| m.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(self.rows, self.cols, |m| m * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(invalid(format!(
                "cannot add {:?} and {:?} blocks",
                self.dims(),
                other.dims()
            )));
        }
        self.zip(other, self.rows, self.cols, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Composition `self ∘ other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(invalid(format!(
                "cannot compose {:?} with {:?} blocks",
                self.dims(),
                other.dims()
            )));
        }
        self.zip(other, self.rows, other.cols, |a, b| a * b)
    }

    /// Symmetric part `(A + Aᵀ)/2`, exactly symmetric.
    pub fn sym(&self) -> Self {
        self.map(self.rows, self.cols, linalg::sym)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn inverse(&self, name: &str) -> Result<Self> {
        if !self.is_square() {
            return Err(invalid(format!("`{name}` is not square")));
        }
        match &self.data {
            Data::PerCell(blocks) => {
                let mut out = Vec::with_capacity(blocks.len());
                for (c, b) in blocks.iter().enumerate() {
                    out.push(linalg::checked_inverse(b, SINGULARITY_RTOL).ok_or_else(|| {
                        Error::SingularCoefficient {
                            block: name.to_string(),
                            cell: Some(c),
                        }
                    })?);
                }
                Self::per_cell(self.rows, self.cols, out)
            }
            Data::Nonlocal(m) => {
                let inv = linalg::checked_inverse(m, SINGULARITY_RTOL).ok_or_else(|| {
                    Error::SingularCoefficient {
                        block: name.to_string(),
                        cell: None,
                    }
                })?;
                Ok(Self {
                    rows: self.rows,
                    cols: self.cols,
                    cells: self.cells,
                    data: Data::Nonlocal(inv),
                })
            }
        }
    }

    /// Worst relative asymmetry and the cell where it occurs.
    pub fn relative_asymmetry(&self) -> (f64, Option<usize>) {
        if !self.is_square() {
            return (f64::INFINITY, None);
        }
        match &self.data {
            Data::PerCell(blocks) => worst_by_cell(blocks, linalg::relative_asymmetry, true),
            Data::Nonlocal(m) => (linalg::relative_asymmetry(m), None),
        }
    }

    /// Smallest eigenvalue of the symmetric part and the cell attaining it.
    pub fn min_eig(&self) -> (f64, Option<usize>) {
        match &self.data {
            Data::PerCell(blocks) => {
                worst_by_cell(blocks, |b| -linalg::min_sym_eig(b), true).map_first(|v| -v)
            }
            Data::Nonlocal(m) => (linalg::min_sym_eig(m), None),
        }
    }

    /// Applies `f` to the eigenvalues of the symmetric part.
    pub fn sym_function(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        self.map(self.rows, self.cols, |m| linalg::sym_matrix_function(m, f))
    }

    /// Principal square root of a symmetric positive definite block.
    pub fn sqrt_spd(&self, name: &str, tol: f64) -> Result<Self> {
        let (min_eig, cell) = self.min_eig();
        if !(min_eig > tol) {
            return Err(Error::NotPositiveDefinite {
                block: name.to_string(),
                cell,
                min_eig,
            });
        }
        Ok(self.sym_function(f64::sqrt))
    }

    /// The block as an assembled operator on whole fields: sparse block
    /// diagonal for local data, dense otherwise.
    pub fn to_operator(&self) -> LinearOperator {
        match &self.data {
            Data::PerCell(blocks) => {
                let mut tb = TripletBuilder::new(self.rows * self.cells, self.cols * self.cells);
                for (c, b) in blocks.iter().enumerate() {
                    tb.push_dense(b, c * self.rows, c * self.cols);
                }
                LinearOperator::Sparse(tb.finalize())
            }
            Data::Nonlocal(m) => LinearOperator::Dense(m.clone()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.data {
            Data::PerCell(blocks) => blocks.iter().fold(0.0, |m, b| m.max(b.amax())),
            Data::Nonlocal(m) => m.amax(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() == 0.0
    }
}

trait MapFirst {
    fn map_first(self, f: impl Fn(f64) -> f64) -> Self;
}

impl MapFirst for (f64, Option<usize>) {
    fn map_first(self, f: impl Fn(f64) -> f64) -> Self {
        (f(self.0), self.1)
    }
}

/// Maximum of `f` over the cells, with the arg-max cell.
fn worst_by_cell(
    blocks: &[DMatrix<f64>],
    f: impl Fn(&DMatrix<f64>) -> f64,
    report_cell: bool,
) -> (f64, Option<usize>) {
    let mut worst = f64::NEG_INFINITY;
    let mut at = None;
    for (c, b) in blocks.iter().enumerate() {
        let v = f(b);
        if v > worst || at.is_none() {
            worst = v;
            at = Some(c);
        }
    }
    (worst, if report_cell { at } else { None })
}

/// Dense convolution with a Gaussian kernel between cell centers, times the
/// identity on components, plus a diagonal shift:
///
/// `K[i][j] = amplitude · exp(-|xᵢ - xⱼ|² / (2 width²)) · h₁h₂h₃ + shift · δᵢⱼ`.
pub fn gaussian_convolution_block(
    grid: &Grid,
    width: f64,
    amplitude: f64,
    diagonal_shift: f64,
    dims: (usize, usize),
) -> Result<CoefficientBlock> {
    if !(width > 0.0) {
        return Err(invalid(format!("kernel width must be > 0, got {width}")));
    }
    if !(diagonal_shift >= 0.0) {
        return Err(invalid(format!(
            "diagonal shift must be >= 0, got {diagonal_shift}"
        )));
    }
    if dims.0 != dims.1 || dims.0 == 0 {
        return Err(invalid(format!(
            "convolution block must be square, got {dims:?}"
        )));
    }
    let n = grid.cells();
    if n > DEFAULT_DENSE_CELL_CAP {
        return Err(Error::Capacity {
            what: "gaussian convolution block".into(),
            cells: n,
            cap: DEFAULT_DENSE_CELL_CAP,
        });
    }
    let d = dims.0;
    let vol = grid.cell_volume();
    let centers: Vec<[f64; 3]> = (0..n).map(|c| grid.center(c)).collect();
    let mut m = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for j in i..n {
            let r2: f64 = (0..3)
                .map(|a| (centers[i][a] - centers[j][a]).powi(2))
                .sum();
            let mut k = amplitude * (-r2 / (2.0 * width * width)).exp() * vol;
            if i == j {
                k += diagonal_shift;
            }
            for c in 0..d {
                m[(i * d + c, j * d + c)] = k;
                m[(j * d + c, i * d + c)] = k;
            }
        }
    }
    CoefficientBlock::nonlocal(d, d, n, m)
}
