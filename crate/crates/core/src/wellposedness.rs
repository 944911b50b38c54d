//! Certification of the solvability condition `νM₀ + Re M₁ ≫ 0`.
//!
//! [`check_theorem1`] works on the constitutive blocks and reduces the coupled
//! (T, E, θ) block by two symmetric Gauss steps, so only small decoupled
//! conditions remain. [`check_abstract`] is the brute-force oracle: smallest
//! eigenvalue of the assembled `νM₀ + sym(M₁)`.

use nalgebra::DMatrix;

use crate::coefficient::CoefficientBlock;
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::material::{
    cell_matrices, invert_constitutive, AssembledOperators, InvertedLaw, MaterialConfig,
};

/// Default cap of the doubling search over `ν`.
pub const DEFAULT_NU_CAP: f64 = 1_073_741_824.0;
/// Default strictness tolerance: `≫ 0` means smallest eigenvalue `≥ tol`.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Largest dense system the oracle will eigen-decompose.
pub const ORACLE_DIM_CAP: usize = 19 * 128;

const SYMMETRY_RTOL: f64 = 1e-12;
/// Multiple of machine epsilon (times the matrix size) under which an
/// eigenvalue is indistinguishable from zero.
const NOISE_FACTOR: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Certified,
    Inconclusive,
    Falsified,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Certified => "certified",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Falsified => "falsified",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "certified" => Some(Verdict::Certified),
            "inconclusive" => Some(Verdict::Inconclusive),
            "falsified" => Some(Verdict::Falsified),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Pass,
    Fail,
    /// The `ν` search ran out before deciding.
    Undecided,
    /// Not evaluated because a prerequisite failed.
    Skipped,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Undecided => "undecided",
            Status::Skipped => "skipped",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pass" => Some(Status::Pass),
            "fail" => Some(Status::Fail),
            "undecided" => Some(Status::Undecided),
            "skipped" => Some(Status::Skipped),
            _ => None,
        }
    }
}

/// One checked condition. `witness` is the decisive quantity: smallest
/// eigenvalue for positivity conditions, relative asymmetry for symmetry
/// conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult {
    pub name: String,
    pub status: Status,
    pub witness: f64,
    pub cell: Option<usize>,
    /// `ν` at which the witness was taken, for `ν`-dependent conditions.
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellposednessReport {
    pub verdict: Verdict,
    pub nu_star: Option<f64>,
    /// Lower bound on the smallest eigenvalue of `ν*M₀ + sym(M₁)`.
    pub c0: Option<f64>,
    pub conditions: Vec<ConditionResult>,
    pub oracle_min_eig: Option<f64>,
}

impl WellposednessReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub nu_cap: f64,
    pub tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            nu_cap: DEFAULT_NU_CAP,
            tol: DEFAULT_TOL,
        }
    }
}

impl CheckOptions {
    fn validate(&self) -> Result<()> {
        if !(self.nu_cap >= 1.0 && self.nu_cap.is_finite()) {
            return Err(invalid(format!(
                "nu_cap must be a finite number >= 1, got {}",
                self.nu_cap
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// `1, 2, 4, …` up to and including `nu_cap`.
pub fn nu_ladder(nu_cap: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut nu = 1.0;
    while nu <= nu_cap {
        out.push(nu);
        nu *= 2.0;
    }
    out
}

/// Rounding floor for eigenvalues of `νX + Y`.
fn noise_floor(nu: f64, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    NOISE_FACTOR * f64::EPSILON * (nu * x.norm() + y.norm())
}

/// Outcome of the doubling search for `min-eig(νX + Y) ≥ tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Search {
    Certified {
        nu: f64,
        value: f64,
    },
    /// The smallest eigenvalue stayed at or below zero without growing.
    Falsified {
        nu: f64,
        value: f64,
    },
    Inconclusive {
        nu: f64,
        value: f64,
    },
}

impl Search {
    pub fn nu(&self) -> f64 {
        match *self {
            Search::Certified { nu, .. }
            | Search::Falsified { nu, .. }
            | Search::Inconclusive { nu, .. } => nu,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Search::Certified { value, .. }
            | Search::Falsified { value, .. }
            | Search::Inconclusive { value, .. } => value,
        }
    }

    fn status(&self) -> Status {
        match self {
            Search::Certified { .. } => Status::Pass,
            Search::Falsified { .. } => Status::Fail,
            Search::Inconclusive { .. } => Status::Undecided,
        }
    }
}

/// Doubling search on the affine pencil `νX + Y`. Relies on `X` being
/// (numerically) positive semidefinite, which makes the smallest eigenvalue
/// non-decreasing in `ν`.
pub fn affine_search(x: &DMatrix<f64>, y: &DMatrix<f64>, nus: &[f64], tol: f64) -> Search {
    let ys = linalg::sym(y);
    let xs = linalg::sym(x);
    let mut flat_nonpositive = true;
    let mut prev: Option<f64> = None;
    let mut last = (f64::NAN, f64::NAN);
    for &nu in nus {
        let m = &xs * nu + &ys;
        let value = linalg::min_sym_eig(&m);
        let floor = noise_floor(nu, &xs, &ys);
        if value >= tol + floor {
            return Search::Certified { nu, value };
        }
        if value > floor || prev.is_some_and(|p| value > p + floor) {
            flat_nonpositive = false;
        }
        prev = Some(value);
        last = (nu, value);
    }
    let (nu, value) = last;
    if flat_nonpositive {
        Search::Falsified { nu, value }
    } else {
        Search::Inconclusive { nu, value }
    }
}

/// Symmetric matrix with a block partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSymMatrix {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    data: DMatrix<f64>,
}

impl BlockSymMatrix {
    pub fn new(data: DMatrix<f64>, sizes: &[usize]) -> Result<Self> {
        let n: usize = sizes.iter().sum();
        if data.nrows() != n || data.ncols() != n {
            return Err(invalid(format!(
                "block sizes sum to {n}, matrix is {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if sizes.contains(&0) {
            return Err(invalid("empty block in partition"));
        }
        let asym = linalg::relative_asymmetry(&data);
        if asym > SYMMETRY_RTOL {
            return Err(invalid(format!(
                "matrix is not symmetric (relative asymmetry {asym:e})"
            )));
        }
        let mut offsets = vec![0];
        for s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            offsets,
            data,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.data
            .view(
                (self.offsets[i], self.offsets[j]),
                (self.sizes[i], self.sizes[j]),
            )
            .into_owned()
    }

    fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

/// One symmetric Gauss step on block `pivot`: returns `A'` with the pivot
/// couplings removed and Schur complements `Aᵢⱼ − AᵢₚAₚₚ⁻¹Aₚⱼ` elsewhere,
/// together with `L` such that `A = L A' Lᵀ`.
pub fn gauss_reduce(a: &BlockSymMatrix, pivot: usize) -> Result<(BlockSymMatrix, DMatrix<f64>)> {
    if pivot >= a.sizes.len() {
        return Err(invalid(format!(
            "pivot {pivot} out of {} blocks",
            a.sizes.len()
        )));
    }
    let app = a.block(pivot, pivot);
    let inv = linalg::checked_inverse(&app, SYMMETRY_RTOL).ok_or(Error::PivotSingular(pivot))?;
    let n = a.data.nrows();
    let pr = a.range(pivot);
    // column block of L below/above the pivot: Aᵢₚ Aₚₚ⁻¹
    let a_col = a.data.columns(pr.start, pr.len()).into_owned();
    let mut l_col = &a_col * &inv;
    for r in pr.clone() {
        l_col.row_mut(r).fill(0.0);
    }
    let mut reduced = &a.data - &l_col * &app * l_col.transpose();
    for r in 0..n {
        for c in pr.clone() {
            if !pr.contains(&r) {
                reduced[(r, c)] = 0.0;
                reduced[(c, r)] = 0.0;
            }
        }
    }
    let reduced = linalg::sym(&reduced);
    let mut l = DMatrix::identity(n, n);
    l.columns_mut(pr.start, pr.len())
        .copy_from(&(l_col + DMatrix::identity(n, n).columns(pr.start, pr.len())));
    Ok((
        BlockSymMatrix {
            sizes: a.sizes.clone(),
            offsets: a.offsets.clone(),
            data: reduced,
        },
        l,
    ))
}

/// Dense coefficient data of one checking unit: a single cell, or the whole
/// grid when any block is nonlocal.
struct Unit {
    cell: Option<usize>,
    rho: DMatrix<f64>,
    c: DMatrix<f64>,
    epsilon: DMatrix<f64>,
    mu: DMatrix<f64>,
    gamma0: DMatrix<f64>,
    p_theta0: DMatrix<f64>,
    sigma: DMatrix<f64>,
    kappa0_inv: DMatrix<f64>,
    kappa1: DMatrix<f64>,
}

fn units(m: &MaterialConfig) -> Vec<Unit> {
    let theta0 = m.theta0_op();
    let p_theta0 = m.p.mul(&theta0).expect("shapes validated");
    if m.has_nonlocal() {
        let d = |b: &CoefficientBlock| b.to_dense();
        return vec![Unit {
            cell: None,
            rho: d(&m.rho),
            c: d(&m.c),
            epsilon: d(&m.epsilon),
            mu: d(&m.mu),
            gamma0: d(m.gamma0()),
            p_theta0: d(&p_theta0),
            sigma: d(&m.sigma),
            kappa0_inv: d(&m.kappa0_inv),
            kappa1: d(&m.kappa1),
        }];
    }
    let cb = |b: &CoefficientBlock, c: usize| b.cell_block(c).expect("local block").clone();
    (0..m.cells())
        .map(|c| Unit {
            cell: Some(c),
            rho: cb(&m.rho, c),
            c: cb(&m.c, c),
            epsilon: cb(&m.epsilon, c),
            mu: cb(&m.mu, c),
            gamma0: cb(m.gamma0(), c),
            p_theta0: cb(&p_theta0, c),
            sigma: cb(&m.sigma, c),
            kappa0_inv: cb(&m.kappa0_inv, c),
            kappa1: cb(&m.kappa1, c),
        })
        .collect()
}

/// The coupled (T, E, Θ₀⁻¹θ) block of `M₀` for one unit.
fn middle_block(law: &InvertedLaw, cell: Option<usize>) -> BlockSymMatrix {
    let get = |b: &CoefficientBlock| match cell {
        Some(c) => b.cell_block(c).expect("local block").clone(),
        None => b.to_dense(),
    };
    let rows = [
        [
            get(&law.c_inv),
            get(&law.c_inv_e),
            get(&law.c_inv_lambda_theta0),
        ],
        [get(&law.e_t_c_inv()), get(&law.eps_eff), get(&law.d_theta)],
        [
            get(&law.theta0_lambda_t_c_inv()),
            get(&law.eta_e()),
            get(&law.eta_theta),
        ],
    ];
    let sizes = [rows[0][0].nrows(), rows[1][1].nrows(), rows[2][2].nrows()];
    let n: usize = sizes.iter().sum();
    let mut m = DMatrix::zeros(n, n);
    let off = [0, sizes[0], sizes[0] + sizes[1]];
    for i in 0..3 {
        for j in 0..3 {
            m.view_mut((off[i], off[j]), (sizes[i], sizes[j]))
                .copy_from(&rows[i][j]);
        }
    }
    let m = linalg::sym(&m);
    BlockSymMatrix::new(m, &sizes).expect("middle block is symmetric by construction")
}

/// Both Gauss steps of the middle block (pivot C⁻¹, then the θ block):
/// returns the block-diagonal result `diag(C⁻¹, ε − Θ₀pγ₀⁻¹p*Θ₀, γ₀)` (up to
/// rounding, scaled as the input) and the accumulated transform.
pub fn reduce_middle(a: &BlockSymMatrix) -> Result<(BlockSymMatrix, DMatrix<f64>)> {
    let (a1, l1) = gauss_reduce(a, 0)?;
    let (a2, l2) = gauss_reduce(&a1, 2)?;
    Ok((a2, l1 * l2))
}

struct Worst {
    value: f64,
    cell: Option<usize>,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: f64::INFINITY,
            cell: None,
        }
    }

    fn min(&mut self, value: f64, cell: Option<usize>) {
        if value < self.value || (self.cell.is_none() && value == self.value) {
            self.value = value;
            self.cell = cell;
        }
    }
}

fn condition(
    name: &str,
    status: Status,
    witness: f64,
    cell: Option<usize>,
    nu: Option<f64>,
) -> ConditionResult {
    ConditionResult {
        name: name.to_string(),
        status,
        witness,
        cell,
        nu,
    }
}

fn verdict_of(conditions: &[ConditionResult]) -> Verdict {
    conditions.iter().fold(Verdict::Certified, |v, c| {
        v.max(match c.status {
            Status::Pass | Status::Skipped => Verdict::Certified,
            Status::Undecided => Verdict::Inconclusive,
            Status::Fail => Verdict::Falsified,
        })
    })
}

/// Worst-over-units search result (falsified beats inconclusive beats the
/// largest certifying ν).
fn combine_search(
    acc: Option<(Search, Option<usize>)>,
    s: Search,
    cell: Option<usize>,
) -> Option<(Search, Option<usize>)> {
    let rank = |s: &Search| match s {
        Search::Certified { .. } => 0,
        Search::Inconclusive { .. } => 1,
        Search::Falsified { .. } => 2,
    };
    match acc {
        None => Some((s, cell)),
        Some((a, ac)) => {
            let better = rank(&s) > rank(&a)
                || (rank(&s) == rank(&a)
                    && match (s, a) {
                        (
                            Search::Certified { nu, value },
                            Search::Certified { nu: an, value: av },
                        ) => nu > an || (nu == an && value < av),
                        _ => s.value() < a.value(),
                    });
            Some(if better { (s, cell) } else { (a, ac) })
        }
    }
}

/// Checks the hypotheses of the well-posedness theorem for the full system:
/// `ρ*, μ, C, γ₀ ≫ 0` and, for all large `ν`,
/// `ν(ε − Θ₀pγ₀⁻¹p*Θ₀) + sym σ ≫ 0` and `νκ₁ + sym κ₀⁻¹ ≫ 0`.
///
/// Conditions are evaluated per cell for local materials and on the global
/// dense matrices otherwise. A singular or indefinite `γ₀` is reported as a
/// failed condition, not as an error.
pub fn check_theorem1(m: &MaterialConfig, opts: &CheckOptions) -> Result<WellposednessReport> {
    opts.validate()?;
    let tol = opts.tol;
    let nus = nu_ladder(opts.nu_cap);
    let units = units(m);
    let mut conditions = Vec::new();

    for (name, get) in [
        (
            "rho_symmetric",
            (|u: &Unit| &u.rho) as fn(&Unit) -> &DMatrix<f64>,
        ),
        ("C_symmetric", |u| &u.c),
        ("epsilon_symmetric", |u| &u.epsilon),
        ("mu_symmetric", |u| &u.mu),
        ("gamma0_symmetric", |u| &u.gamma0),
    ] {
        let mut w = Worst::new();
        for u in &units {
            w.min(-linalg::relative_asymmetry(get(u)), u.cell);
        }
        let asym = -w.value;
        let status = if asym <= SYMMETRY_RTOL {
            Status::Pass
        } else {
            Status::Fail
        };
        conditions.push(condition(name, status, asym, w.cell, None));
    }

    let mut pd = |name: &str, get: fn(&Unit) -> &DMatrix<f64>, bound: f64| -> bool {
        let mut w = Worst::new();
        for u in &units {
            w.min(linalg::min_sym_eig(get(u)), u.cell);
        }
        let ok = w.value >= bound;
        conditions.push(condition(
            name,
            if ok { Status::Pass } else { Status::Fail },
            w.value,
            w.cell,
            None,
        ));
        ok
    };
    let rho_ok = pd("rho_positive", |u| &u.rho, tol);
    let mu_ok = pd("mu_positive", |u| &u.mu, tol);
    let c_ok = pd("C_positive", |u| &u.c, tol);
    let gamma_ok = pd("gamma0_positive", |u| &u.gamma0, tol);
    let kappa1_ok = pd("kappa1_semidefinite", |u| &u.kappa1, -tol);

    // ε − Θ₀pγ₀⁻¹p*Θ₀ per unit (needs γ₀⁻¹)
    let mut reduced_eps = Vec::with_capacity(units.len());
    if gamma_ok {
        let mut w = Worst::new();
        for u in &units {
            let ginv = linalg::checked_inverse(&u.gamma0, SYMMETRY_RTOL).ok_or(
                Error::SingularCoefficient {
                    block: "gamma0".into(),
                    cell: u.cell,
                },
            )?;
            let x = linalg::sym(&(&u.epsilon - &u.p_theta0 * ginv * u.p_theta0.transpose()));
            w.min(linalg::min_sym_eig(&x), u.cell);
            reduced_eps.push(x);
        }
        let ok = w.value >= -tol;
        conditions.push(condition(
            "reduced_permittivity_semidefinite",
            if ok { Status::Pass } else { Status::Fail },
            w.value,
            w.cell,
            None,
        ));
    } else {
        conditions.push(condition(
            "reduced_permittivity_semidefinite",
            Status::Skipped,
            f64::NAN,
            None,
            None,
        ));
    }

    let x_ok = conditions.last().is_some_and(|c| c.status == Status::Pass);
    let electric = if x_ok {
        let mut acc = None;
        for (u, x) in units.iter().zip(&reduced_eps) {
            acc = combine_search(acc, affine_search(x, &u.sigma, &nus, tol), u.cell);
        }
        acc
    } else {
        None
    };
    let heat = if kappa1_ok {
        let mut acc = None;
        for u in &units {
            acc = combine_search(
                acc,
                affine_search(&u.kappa1, &u.kappa0_inv, &nus, tol),
                u.cell,
            );
        }
        acc
    } else {
        None
    };
    for (name, res) in [("electric", electric), ("heat_flux", heat)] {
        conditions.push(match res {
            Some((s, cell)) => condition(name, s.status(), s.value(), cell, Some(s.nu())),
            None => condition(name, Status::Skipped, f64::NAN, None, None),
        });
    }

    let mut verdict = verdict_of(&conditions);
    let mut nu_star = None;
    let mut c0 = None;
    if verdict == Verdict::Certified {
        let nu = match (electric, heat) {
            (Some((e, _)), Some((h, _))) => e.nu().max(h.nu()),
            _ => unreachable!("certified implies both searches ran"),
        };
        debug_assert!(rho_ok && mu_ok && c_ok);
        let bound = certified_bound(m, &units, nu)?;
        if bound > 0.0 {
            nu_star = Some(nu);
            c0 = Some(bound);
        } else {
            verdict = Verdict::Inconclusive;
        }
    }
    Ok(WellposednessReport {
        verdict,
        nu_star,
        c0,
        conditions,
        oracle_min_eig: None,
    })
}

/// Rigorous lower bound on `λmin(νM₀ + sym M₁)` assembled from the
/// decoupled blocks; the middle block uses `λmin(A) ≥ λmin(D)·σmin(L)²` for
/// `A = L D Lᵀ`.
fn certified_bound(m: &MaterialConfig, units: &[Unit], nu: f64) -> Result<f64> {
    let law = invert_constitutive(m)?;
    let mut c0 = f64::INFINITY;
    for u in units {
        c0 = c0.min(nu * linalg::min_sym_eig(&u.rho));
        c0 = c0.min(nu * linalg::min_sym_eig(&u.mu));
        c0 = c0.min(linalg::min_sym_eig(
            &(&u.kappa1 * nu + linalg::sym(&u.kappa0_inv)),
        ));
        let mid = middle_block(&law, u.cell);
        let mut shifted = mid.data() * nu;
        let (o, s) = (mid.sizes()[0], mid.sizes()[1]);
        let mut view = shifted.view_mut((o, o), (s, s));
        view += linalg::sym(&u.sigma);
        let shifted = BlockSymMatrix::new(linalg::sym(&shifted), mid.sizes())?;
        let (d, l) = reduce_middle(&shifted)?;
        let lam_d = (0..3)
            .map(|i| linalg::min_sym_eig(&d.block(i, i)))
            .fold(f64::INFINITY, f64::min);
        let smin = linalg::min_singular_value(&l);
        c0 = c0.min(if lam_d > 0.0 {
            lam_d * smin * smin
        } else {
            lam_d
        });
    }
    Ok(c0)
}

/// Brute-force oracle on assembled matrices: smallest eigenvalue of
/// `νM₀ + (M₁ + M₁ᵀ)/2` for each `ν` in `nus`, first certifying `ν` wins.
///
/// `M₀` must be symmetric. An `M₀` eigenvalue below `-tol` falsifies, since
/// positivity must then fail for all large `ν`.
pub fn check_abstract(
    m0: &DMatrix<f64>,
    m1: &DMatrix<f64>,
    nus: &[f64],
    tol: f64,
) -> Result<WellposednessReport> {
    if m0.shape() != m1.shape() || m0.nrows() != m0.ncols() {
        return Err(invalid(format!(
            "M0 {:?} and M1 {:?} must be square of equal size",
            m0.shape(),
            m1.shape()
        )));
    }
    if nus.is_empty() || nus.iter().any(|nu| !(*nu > 0.0)) {
        return Err(invalid("nu list must be non-empty and positive"));
    }
    let asym = linalg::relative_asymmetry(m0);
    if asym > SYMMETRY_RTOL {
        return Err(invalid(format!(
            "M0 is not selfadjoint (relative asymmetry {asym:e})"
        )));
    }
    let m0 = linalg::sym(m0);
    let mut conditions = Vec::new();
    let m0_min = linalg::min_sym_eig(&m0);
    let psd = m0_min >= -tol;
    conditions.push(condition(
        "M0_semidefinite",
        if psd { Status::Pass } else { Status::Fail },
        m0_min,
        None,
        None,
    ));
    let search = affine_search(&m0, m1, nus, tol);
    conditions.push(condition(
        "pencil_positive",
        search.status(),
        search.value(),
        None,
        Some(search.nu()),
    ));
    let verdict = verdict_of(&conditions);
    let certified = verdict == Verdict::Certified;
    Ok(WellposednessReport {
        verdict,
        nu_star: certified.then(|| search.nu()),
        c0: certified.then(|| search.value()),
        conditions,
        oracle_min_eig: Some(search.value()),
    })
}

/// Smallest eigenvalue of `νM₀ + sym M₁` (oracle value at a fixed `ν`).
pub fn pencil_min_eig(m0: &DMatrix<f64>, m1: &DMatrix<f64>, nu: f64) -> f64 {
    linalg::min_sym_eig(&(linalg::sym(m0) * nu + linalg::sym(m1)))
}

/// Comparison of [`check_theorem1`] against the eigenvalue oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Crosscheck {
    pub theorem: WellposednessReport,
    pub oracle_verdict: Verdict,
    /// Oracle smallest eigenvalue at the theorem's `ν*` (or at the oracle's
    /// own deciding `ν` if the theorem did not certify).
    pub oracle_min_eig: f64,
    pub agree: bool,
    /// Whether the sign of the smallest eigenvalue of the (T, E, θ) block
    /// survives both Gauss steps in every unit (`None` when a pivot is
    /// singular).
    pub congruence_sign_preserved: Option<bool>,
}

/// Runs [`check_theorem1`] and the oracle on the assembled per-cell 19x19
/// matrices (or the global matrices for nonlocal materials) and compares.
pub fn verdict_crosscheck(m: &MaterialConfig, opts: &CheckOptions) -> Result<Crosscheck> {
    let mut theorem = check_theorem1(m, opts)?;
    let nus = nu_ladder(opts.nu_cap);
    let mats: Vec<(DMatrix<f64>, DMatrix<f64>)> = if m.has_nonlocal() {
        let dim = 19 * m.cells();
        if dim > ORACLE_DIM_CAP {
            return Err(Error::Capacity {
                what: "dense eigenvalue oracle".into(),
                cells: m.cells(),
                cap: ORACLE_DIM_CAP / 19,
            });
        }
        let ops = AssembledOperators::new(m)?;
        vec![(ops.m0.to_dense(), ops.m1.to_dense())]
    } else {
        (0..m.cells())
            .map(|c| cell_matrices(m, c))
            .collect::<Result<_>>()?
    };

    let mut oracle_verdict = Verdict::Certified;
    let mut oracle_min = f64::INFINITY;
    for (m0, m1) in &mats {
        let rep = check_abstract(m0, m1, &nus, opts.tol)?;
        oracle_verdict = oracle_verdict.max(rep.verdict);
        let at = match theorem.nu_star {
            Some(nu) => pencil_min_eig(m0, m1, nu),
            None => rep.oracle_min_eig.unwrap_or(f64::NAN),
        };
        oracle_min = oracle_min.min(at);
    }
    theorem.oracle_min_eig = Some(oracle_min);

    let congruence_sign_preserved = match invert_constitutive(m) {
        Ok(law) => {
            let cells: Vec<Option<usize>> = if m.has_nonlocal() {
                vec![None]
            } else {
                (0..m.cells()).map(Some).collect()
            };
            let mut all = Some(true);
            for cell in cells {
                let mid = middle_block(&law, cell);
                match reduce_middle(&mid) {
                    Ok((d, _)) => {
                        let before = linalg::min_sym_eig(mid.data());
                        let after = linalg::min_sym_eig(d.data());
                        let scale = mid.data().amax().max(1.0);
                        let eps = NOISE_FACTOR * f64::EPSILON * scale;
                        let sign = |v: f64| {
                            if v > eps {
                                1
                            } else if v < -eps {
                                -1
                            } else {
                                0
                            }
                        };
                        if sign(before) != sign(after) {
                            all = all.map(|_| false);
                        }
                    }
                    Err(_) => {
                        all = None;
                        break;
                    }
                }
            }
            all
        }
        Err(_) => None,
    };
    let agree = theorem.verdict == oracle_verdict;
    Ok(Crosscheck {
        theorem,
        oracle_verdict,
        oracle_min_eig: oracle_min,
        agree,
        congruence_sign_preserved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::MaterialBlocks;

    fn mat(rows: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, v.len() / rows, v)
    }

    #[test]
    fn gauss_two_by_two() {
        let a = BlockSymMatrix::new(mat(2, &[2.0, 1.0, 1.0, 1.0]), &[1, 1]).unwrap();
        let (r, l) = gauss_reduce(&a, 0).unwrap();
        assert_eq!(r.data(), &mat(2, &[2.0, 0.0, 0.0, 0.5]));
        let back = &l * r.data() * l.transpose();
        assert!(linalg::max_abs_diff(&back, a.data()) < 1e-15);
    }

    #[test]
    fn gauss_semidefinite_boundary() {
        let a = BlockSymMatrix::new(mat(2, &[1.0, 1.0, 1.0, 1.0]), &[1, 1]).unwrap();
        let (r, _) = gauss_reduce(&a, 0).unwrap();
        assert_eq!(r.data(), &mat(2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(linalg::inertia(a.data(), 1e-12), (1, 1, 0));
    }

    #[test]
    fn gauss_block_diagonal_unchanged() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let a = BlockSymMatrix::new(d.clone(), &[1, 2]).unwrap();
        assert_eq!(gauss_reduce(&a, 1).unwrap().0.data(), &d);
    }

    #[test]
    fn gauss_singular_pivot() {
        let a = BlockSymMatrix::new(mat(2, &[0.0, 1.0, 1.0, 1.0]), &[1, 1]).unwrap();
        assert_eq!(gauss_reduce(&a, 0).unwrap_err(), Error::PivotSingular(0));
    }

    #[test]
    fn identity_material_certified() {
        let m = MaterialConfig::new(MaterialBlocks::identity(2)).unwrap();
        let r = check_theorem1(&m, &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Certified);
        assert_eq!(r.nu_star, Some(1.0));
        assert!((r.c0.unwrap() - 1.0).abs() < 1e-12, "{:?}", r.c0);
    }

    fn eddy(sigma: f64) -> MaterialConfig {
        let mut b = MaterialBlocks::identity(1);
        b.p = CoefficientBlock::uniform(1, mat(3, &[1.0, 0.0, 0.0]));
        b.sigma = CoefficientBlock::scalar_identity(1, 3, sigma);
        MaterialConfig::new(b).unwrap()
    }

    #[test]
    fn eddy_current_limit() {
        let r = check_theorem1(&eddy(1.0), &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Certified);
        let r = check_theorem1(&eddy(0.0), &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Falsified);
        let e = r.condition("electric").unwrap();
        assert_eq!((e.status, e.witness, e.cell), (Status::Fail, 0.0, Some(0)));
    }

    #[test]
    fn gamma0_zero_falsifies() {
        let mut b = MaterialBlocks::identity(1);
        b.alpha = CoefficientBlock::zeros(1, 1, 1);
        let r = check_theorem1(&MaterialConfig::new(b).unwrap(), &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Falsified);
        assert_eq!(r.condition("gamma0_positive").unwrap().status, Status::Fail);
    }

    #[test]
    fn tiny_positive_direction_is_inconclusive_below_cap() {
        let mut b = MaterialBlocks::identity(1);
        b.epsilon = CoefficientBlock::uniform(
            1,
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1e-13, 1.0, 1.0])),
        );
        let m = MaterialConfig::new(b).unwrap();
        let opts = CheckOptions {
            nu_cap: 256.0,
            ..Default::default()
        };
        assert_eq!(
            check_theorem1(&m, &opts).unwrap().verdict,
            Verdict::Inconclusive
        );
        // with enough room the direction is eventually certified
        assert_eq!(
            check_theorem1(&m, &CheckOptions::default())
                .unwrap()
                .verdict,
            Verdict::Certified
        );
    }

    #[test]
    fn abstract_examples() {
        let nus = nu_ladder(DEFAULT_NU_CAP);
        let i2 = DMatrix::identity(2, 2);
        let z = DMatrix::zeros(2, 2);
        let r = check_abstract(&i2, &z, &[1.0], 1e-10).unwrap();
        assert_eq!((r.verdict, r.c0), (Verdict::Certified, Some(1.0)));
        let r = check_abstract(&z, &i2, &nus, 1e-10).unwrap();
        assert_eq!(
            (r.verdict, r.nu_star, r.c0),
            (Verdict::Certified, Some(1.0), Some(1.0))
        );
        let r = check_abstract(&mat(2, &[1.0, 0.0, 0.0, 0.0]), &z, &nus, 1e-10).unwrap();
        assert_eq!(r.verdict, Verdict::Falsified);
        assert!(check_abstract(&mat(2, &[1.0, 1.0, 0.0, 1.0]), &z, &nus, 1e-10).is_err());
    }

    #[test]
    fn crosscheck_identity_and_eddy() {
        for m in [
            MaterialConfig::new(MaterialBlocks::identity(2)).unwrap(),
            eddy(1.0),
            eddy(0.0),
        ] {
            let x = verdict_crosscheck(&m, &CheckOptions::default()).unwrap();
            assert!(x.agree, "{x:?}");
            assert_eq!(x.congruence_sign_preserved, Some(true));
            if let Some(c0) = x.theorem.c0 {
                assert!(c0 <= x.oracle_min_eig + 1e-8);
            }
        }
    }

    #[test]
    fn ladder() {
        assert_eq!(nu_ladder(5.0), vec![1.0, 2.0, 4.0]);
        assert_eq!(nu_ladder(DEFAULT_NU_CAP).len(), 31);
    }
}
