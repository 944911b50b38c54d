//! Linear solvers: a banded LU with partial pivoting (direct path for the
//! sparse assembled systems), dense LU, and restarted GMRES (iterative path).

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{invalid, Error, Result};
use crate::sparse::{norm, LinearOperator, SparseOperator};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    /// Factorize once (banded LU for sparse, dense LU for dense operators).
    #[default]
    Direct,
    /// Restarted GMRES.
    Iterative,
}

/// LU factorization `P A = L U` of a banded matrix, row-major band storage.
///
/// Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl` columns
/// hold fill-in from row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    /// `order[new] = old`; identity when no reordering was requested.
    order: Option<Vec<usize>>,
}

impl BandedLu {
    /// Factorizes `a`, optionally after the symmetric reordering `order`
    /// (`order[new] = old`).
    pub fn factor(a: &SparseOperator, order: Option<&[usize]>) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(invalid("banded LU needs a square operator"));
        }
        let permuted;
        let a = match order {
            Some(o) => {
                permuted = a.permuted(o)?;
                &permuted
            }
            None => a,
        };
        let n = a.rows();
        let (kl, ku) = a.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut data = vec![0.0; n * width];
        for (r, c, v) in a.iter() {
            data[r * width + (c + kl - r)] = v;
        }
        let scale = a.iter().fold(0.0_f64, |m, (_, _, v)| m.max(v.abs()));
        let mut pivots = vec![0usize; n];
        let at = |i: usize, j: usize| i * width + (j + kl - i);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = data[at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = data[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > f64::EPSILON * scale * 1e-4) {
                return Err(Error::SolverFailure {
                    residual: f64::INFINITY,
                    iterations: 0,
                });
            }
            pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    data.swap(at(k, j), at(p, j));
                }
            }
            let pivot = data[at(k, k)];
            for i in k + 1..=last_row {
                let ik = at(i, k);
                if data[ik] == 0.0 {
                    continue;
                }
                let l = data[ik] / pivot;
                data[ik] = l;
                let (src, dst) = (at(k, k + 1), at(i, k + 1));
                let len = last_col - k;
                // rows k and i are disjoint slices of `data`
                let (head, tail) = data.split_at_mut(dst);
                let row_k = &head[src..src + len];
                for (d, s) in tail[..len].iter_mut().zip(row_k) {
                    *d -= l * s;
                }
            }
        }
        Ok(Self {
            n,
            kl,
            width,
            data,
            pivots,
            order: order.map(<[usize]>::to_vec),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let (kl, w) = (self.kl, self.width);
        let mut b: Vec<f64> = match &self.order {
            Some(o) => o.iter().map(|&old| rhs[old]).collect(),
            None => rhs.to_vec(),
        };
        let at = |i: usize, j: usize| i * w + (j + kl - i);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                let last = (k + kl).min(n - 1);
                for (i, bi) in b.iter_mut().enumerate().take(last + 1).skip(k + 1) {
                    *bi -= self.data[at(i, k)] * bk;
                }
            }
        }
        let ku_total = w - 1 - kl;
        for k in (0..n).rev() {
            let last_col = (k + ku_total).min(n - 1);
            let row = &self.data[at(k, k)..=at(k, last_col)];
            let mut s = b[k];
            for (off, u) in row.iter().enumerate().skip(1) {
                s -= u * b[k + off];
            }
            b[k] = s / row[0];
        }
        match &self.order {
            Some(o) => {
                let mut x = vec![0.0; n];
                for (new, &old) in o.iter().enumerate() {
                    x[old] = b[new];
                }
                x
            }
            None => b,
        }
    }
}

/// A factorized operator ready for repeated solves.
#[derive(Debug, Clone)]
pub enum Factorization {
    Banded(BandedLu),
    Dense(LU<f64, Dyn, Dyn>),
}

impl Factorization {
    pub fn new(op: &LinearOperator, order: Option<&[usize]>) -> Result<Self> {
        match op {
            LinearOperator::Sparse(s) => Ok(Factorization::Banded(BandedLu::factor(s, order)?)),
            LinearOperator::Dense(d) => {
                if d.nrows() != d.ncols() {
                    return Err(invalid("dense LU needs a square operator"));
                }
                let lu = d.clone().lu();
                if !lu.is_invertible() {
                    return Err(Error::SolverFailure {
                        residual: f64::INFINITY,
                        iterations: 0,
                    });
                }
                Ok(Factorization::Dense(lu))
            }
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            Factorization::Banded(b) => b.solve(rhs),
            Factorization::Dense(lu) => lu
                .solve(&DVector::from_column_slice(rhs))
                .map(|x| x.data.into())
                .unwrap_or_else(|| vec![f64::NAN; rhs.len()]),
        }
    }
}

pub fn relative_residual(op: &LinearOperator, x: &[f64], rhs: &[f64]) -> Result<f64> {
    let ax = op.apply(x)?;
    let r: Vec<f64> = ax.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let nb = norm(rhs);
    Ok(if nb == 0.0 { norm(&r) } else { norm(&r) / nb })
}

/// Operator plus a prepared solution strategy, checked against the residual
/// contract `‖A x − b‖ / ‖b‖ ≤ tol` on every solve.
#[derive(Debug, Clone)]
pub struct PreparedSolver {
    op: LinearOperator,
    method: SolverMethod,
    tol: f64,
    factor: Option<Factorization>,
    max_iter: usize,
}

impl PreparedSolver {
    pub fn new(
        op: LinearOperator,
        method: SolverMethod,
        tol: f64,
        order: Option<&[usize]>,
    ) -> Result<Self> {
        if op.rows() != op.cols() {
            return Err(invalid("solver needs a square operator"));
        }
        if !(tol > 0.0) {
            return Err(invalid(format!("solver tolerance must be > 0, got {tol}")));
        }
        let factor = match method {
            SolverMethod::Direct => Some(Factorization::new(&op, order)?),
            SolverMethod::Iterative => None,
        };
        Ok(Self {
            op,
            method,
            tol,
            factor,
            max_iter: 2000,
        })
    }

    pub fn operator(&self) -> &LinearOperator {
        &self.op
    }

    pub fn method(&self) -> SolverMethod {
        self.method
    }

    /// Solves and returns `(x, relative residual)`.
    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
        if rhs.len() != self.op.rows() {
            return Err(invalid("right-hand side has the wrong length"));
        }
        if rhs.iter().all(|&v| v == 0.0) {
            return Ok((vec![0.0; rhs.len()], 0.0));
        }
        match &self.factor {
            Some(f) => {
                let mut x = f.solve(rhs);
                let mut res = relative_residual(&self.op, &x, rhs)?;
                // one round of iterative refinement if the factorization alone
                // misses the contract
                if res > self.tol {
                    let ax = self.op.apply(&x)?;
                    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                    let dx = f.solve(&r);
                    for (xi, d) in x.iter_mut().zip(dx) {
                        *xi += d;
                    }
                    res = relative_residual(&self.op, &x, rhs)?;
                }
                if !(res <= self.tol) {
                    return Err(Error::SolverFailure {
                        residual: res,
                        iterations: 1,
                    });
                }
                Ok((x, res))
            }
            None => {
                let (x, res, _) = gmres(&self.op, rhs, None, self.tol, 60, self.max_iter)?;
                Ok((x, res))
            }
        }
    }
}

/// Restarted GMRES with modified Gram–Schmidt and Givens rotations.
///
/// Returns `(x, relative residual, iterations)`; fails with the best
/// residual when `max_iter` is exhausted.
pub fn gmres(
    op: &LinearOperator,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = rhs.len();
    if op.rows() != n || op.cols() != n {
        return Err(invalid(
            "GMRES needs a square operator matching the right-hand side",
        ));
    }
    let bnorm = norm(rhs);
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0.0, 0));
    }
    let m = restart.max(1).min(n.max(1));
    let mut iters = 0;
    loop {
        let ax = op.apply(&x)?;
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta / bnorm <= tol {
            return Ok((x, beta / bnorm, iters));
        }
        if iters >= max_iter {
            return Err(Error::SolverFailure {
                residual: beta / bnorm,
                iterations: iters,
            });
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            iters += 1;
            let mut w = op.apply(&basis[k])?;
            for (j, vj) in basis.iter().enumerate() {
                let hjk: f64 = w.iter().zip(vj).map(|(a, b)| a * b).sum();
                h[(j, k)] = hjk;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= hjk * vi;
                }
            }
            let wn = norm(&w);
            h[(k + 1, k)] = wn;
            for j in 0..k {
                let t = cs[j] * h[(j, k)] + sn[j] * h[(j + 1, k)];
                h[(j + 1, k)] = -sn[j] * h[(j, k)] + cs[j] * h[(j + 1, k)];
                h[(j, k)] = t;
            }
            let denom = h[(k, k)].hypot(h[(k + 1, k)]);
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[(k, k)] / denom;
            sn[k] = h[(k + 1, k)] / denom;
            h[(k, k)] = denom;
            h[(k + 1, k)] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() / bnorm <= tol * 0.1 || wn == 0.0 || iters >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution on the k_used x k_used triangle
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[(i, j)] * y[j];
            }
            y[i] = s / h[(i, i)];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
    }
}

/// Solves `op · x = rhs` to relative residual `tol`.
pub fn solve_linear(
    op: &LinearOperator,
    rhs: &[f64],
    tol: f64,
    method: SolverMethod,
) -> Result<Vec<f64>> {
    PreparedSolver::new(op.clone(), method, tol, None)?
        .solve(rhs)
        .map(|(x, _)| x)
}
