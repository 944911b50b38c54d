//! Constitutive coefficients, the inverted (stress-based) material law and the
//! assembly of the material operators `M₀` and `M₁`.

use nalgebra::DMatrix;

use crate::coefficient::CoefficientBlock;
use crate::error::{invalid, Result};
use crate::field::{Slot, StateLayout};
use crate::linalg;
use crate::sparse::{LinearOperator, TripletBuilder};

/// Blocks closer to symmetric than this (relative) are treated as symmetric
/// and symmetrized exactly during assembly.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// All constitutive coefficients of the coupled system.
///
/// Couplings are stored once (`e`, `λ`, `p`, `β`); their adjoints are
/// transposes.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialConfig {
    /// Mass density `ρ*`, 3x3.
    pub rho: CoefficientBlock,
    /// Elasticity tensor, 6x6 weighted Voigt.
    pub c: CoefficientBlock,
    /// Piezoelectric coupling, 6x3 (electric field to stress).
    pub e: CoefficientBlock,
    /// Thermo-mechanic coupling, 6x1.
    pub lambda: CoefficientBlock,
    /// Pyroelectric coupling, 3x1.
    pub p: CoefficientBlock,
    /// Permittivity, 3x3.
    pub epsilon: CoefficientBlock,
    /// Permeability, 3x3.
    pub mu: CoefficientBlock,
    /// Mass density times specific heat, 1x1.
    pub alpha: CoefficientBlock,
    /// Reference temperature per cell.
    pub theta0: Vec<f64>,
    /// Conductivity term of the Maxwell block, 3x3.
    pub sigma: CoefficientBlock,
    /// Inverse heat conductivity `κ₀⁻¹`, 3x3.
    pub kappa0_inv: CoefficientBlock,
    /// Heat-flux relaxation `κ₁`, 3x3.
    pub kappa1: CoefficientBlock,
    /// Optional piezo-magnetic coupling, 3x3.
    pub beta: Option<CoefficientBlock>,
    gamma0: CoefficientBlock,
}

/// Builder input for [`MaterialConfig::new`].
#[derive(Debug, Clone)]
pub struct MaterialBlocks {
    pub rho: CoefficientBlock,
    pub c: CoefficientBlock,
    pub e: CoefficientBlock,
    pub lambda: CoefficientBlock,
    pub p: CoefficientBlock,
    pub epsilon: CoefficientBlock,
    pub mu: CoefficientBlock,
    pub alpha: CoefficientBlock,
    pub theta0: Vec<f64>,
    pub sigma: CoefficientBlock,
    pub kappa0_inv: CoefficientBlock,
    pub kappa1: CoefficientBlock,
    pub beta: Option<CoefficientBlock>,
}

impl MaterialBlocks {
    /// Decoupled unit material: every diagonal coefficient the identity,
    /// every coupling zero, `Θ₀ = 1`, `σ = 0`.
    pub fn identity(cells: usize) -> Self {
        Self {
            rho: CoefficientBlock::identity(cells, 3),
            c: CoefficientBlock::identity(cells, 6),
            e: CoefficientBlock::zeros(cells, 6, 3),
            lambda: CoefficientBlock::zeros(cells, 6, 1),
            p: CoefficientBlock::zeros(cells, 3, 1),
            epsilon: CoefficientBlock::identity(cells, 3),
            mu: CoefficientBlock::identity(cells, 3),
            alpha: CoefficientBlock::identity(cells, 1),
            theta0: vec![1.0; cells],
            sigma: CoefficientBlock::zeros(cells, 3, 3),
            kappa0_inv: CoefficientBlock::identity(cells, 3),
            kappa1: CoefficientBlock::identity(cells, 3),
            beta: None,
        }
    }
}

impl MaterialConfig {
    pub fn new(b: MaterialBlocks) -> Result<Self> {
        let cells = b.theta0.len();
        if cells == 0 {
            return Err(invalid("material needs at least one cell"));
        }
        let expect = |name: &str, blk: &CoefficientBlock, dims: (usize, usize)| -> Result<()> {
            if blk.dims() != dims || blk.cells() != cells {
                return Err(invalid(format!(
                    "`{name}` must be {}x{} on {cells} cells, got {}x{} on {} cells",
                    dims.0,
                    dims.1,
                    blk.rows(),
                    blk.cols(),
                    blk.cells()
                )));
            }
            Ok(())
        };
        expect("rho", &b.rho, (3, 3))?;
        expect("C", &b.c, (6, 6))?;
        expect("e", &b.e, (6, 3))?;
        expect("lambda", &b.lambda, (6, 1))?;
        expect("p", &b.p, (3, 1))?;
        expect("epsilon", &b.epsilon, (3, 3))?;
        expect("mu", &b.mu, (3, 3))?;
        expect("alpha", &b.alpha, (1, 1))?;
        expect("sigma", &b.sigma, (3, 3))?;
        expect("kappa0_inv", &b.kappa0_inv, (3, 3))?;
        expect("kappa1", &b.kappa1, (3, 3))?;
        if let Some(beta) = &b.beta {
            expect("beta", beta, (3, 3))?;
        }
        if let Some((c, t)) = b
            .theta0
            .iter()
            .enumerate()
            .find(|(_, t)| !(t.is_finite() && **t > 0.0 && (1.0 / **t).is_finite()))
        {
            return Err(invalid(format!(
                "reference temperature must be positive and finite, got {t} at cell {c}"
            )));
        }
        let theta0_op = CoefficientBlock::from_scalar_field(&b.theta0)?;
        let gamma0 = theta0_op.mul(&b.alpha)?;
        Ok(Self {
            rho: b.rho,
            c: b.c,
            e: b.e,
            lambda: b.lambda,
            p: b.p,
            epsilon: b.epsilon,
            mu: b.mu,
            alpha: b.alpha,
            theta0: b.theta0,
            sigma: b.sigma,
            kappa0_inv: b.kappa0_inv,
            kappa1: b.kappa1,
            beta: b.beta,
            gamma0,
        })
    }

    pub fn cells(&self) -> usize {
        self.theta0.len()
    }

    /// `γ₀ = Θ₀ α`.
    pub fn gamma0(&self) -> &CoefficientBlock {
        &self.gamma0
    }

    /// Multiplication by `Θ₀` as a 1x1 block.
    pub fn theta0_op(&self) -> CoefficientBlock {
        CoefficientBlock::from_scalar_field(&self.theta0).expect("validated on construction")
    }

    pub fn has_nonlocal(&self) -> bool {
        self.blocks().iter().any(|(_, b)| b.is_nonlocal())
    }

    /// Named view of every coefficient block (β included when present).
    pub fn blocks(&self) -> Vec<(&'static str, &CoefficientBlock)> {
        let mut v = vec![
            ("rho", &self.rho),
            ("C", &self.c),
            ("e", &self.e),
            ("lambda", &self.lambda),
            ("p", &self.p),
            ("epsilon", &self.epsilon),
            ("mu", &self.mu),
            ("alpha", &self.alpha),
            ("sigma", &self.sigma),
            ("kappa0_inv", &self.kappa0_inv),
            ("kappa1", &self.kappa1),
        ];
        if let Some(b) = &self.beta {
            v.push(("beta", b));
        }
        v
    }

    /// The material of a single cell (local materials only).
    pub fn restrict_to_cell(&self, cell: usize) -> Result<Self> {
        let r = |b: &CoefficientBlock| b.restrict_to_cell(cell);
        Self::new(MaterialBlocks {
            rho: r(&self.rho)?,
            c: r(&self.c)?,
            e: r(&self.e)?,
            lambda: r(&self.lambda)?,
            p: r(&self.p)?,
            epsilon: r(&self.epsilon)?,
            mu: r(&self.mu)?,
            alpha: r(&self.alpha)?,
            theta0: vec![self.theta0[cell]],
            sigma: r(&self.sigma)?,
            kappa0_inv: r(&self.kappa0_inv)?,
            kappa1: r(&self.kappa1)?,
            beta: self.beta.as_ref().map(r).transpose()?,
        })
    }

    /// All blocks promoted to dense nonlocal form.
    pub fn to_nonlocal(&self) -> Result<Self> {
        let d = |b: &CoefficientBlock| b.to_nonlocal();
        Self::new(MaterialBlocks {
            rho: d(&self.rho)?,
            c: d(&self.c)?,
            e: d(&self.e)?,
            lambda: d(&self.lambda)?,
            p: d(&self.p)?,
            epsilon: d(&self.epsilon)?,
            mu: d(&self.mu)?,
            alpha: d(&self.alpha)?,
            theta0: self.theta0.clone(),
            sigma: d(&self.sigma)?,
            kappa0_inv: d(&self.kappa0_inv)?,
            kappa1: d(&self.kappa1)?,
            beta: self.beta.as_ref().map(d).transpose()?,
        })
    }
}

/// Symmetrizes exactly when the block is symmetric up to round-off.
fn symmetrize_if_close(b: CoefficientBlock) -> CoefficientBlock {
    if b.relative_asymmetry().0 <= SYMMETRY_RTOL * 1e3 {
        b.sym()
    } else {
        b
    }
}

/// The material law solved for strain: expresses `(𝓔, D, B, Θ₀η)` in terms of
/// `(T, E, H, Θ₀⁻¹θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedLaw {
    /// `C⁻¹`
    pub c_inv: CoefficientBlock,
    /// `C⁻¹e`
    pub c_inv_e: CoefficientBlock,
    /// `C⁻¹λΘ₀`
    pub c_inv_lambda_theta0: CoefficientBlock,
    /// `ε + e*C⁻¹e`
    pub eps_eff: CoefficientBlock,
    /// `pΘ₀ + e*C⁻¹λΘ₀`
    pub d_theta: CoefficientBlock,
    /// `μ`
    pub mu: CoefficientBlock,
    /// `γ₀ + Θ₀λ*C⁻¹λΘ₀`
    pub eta_theta: CoefficientBlock,
}

impl InvertedLaw {
    /// `e*C⁻¹`, the adjoint of [`Self::c_inv_e`].
    pub fn e_t_c_inv(&self) -> CoefficientBlock {
        self.c_inv_e.transpose()
    }

    /// `Θ₀λ*C⁻¹`.
    pub fn theta0_lambda_t_c_inv(&self) -> CoefficientBlock {
        self.c_inv_lambda_theta0.transpose()
    }

    /// `Θ₀p* + Θ₀λ*C⁻¹e`.
    pub fn eta_e(&self) -> CoefficientBlock {
        self.d_theta.transpose()
    }

    /// Evaluates `(𝓔, D, B, Θ₀η)` from `(T, E, H, Θ₀⁻¹θ)` fields.
    pub fn apply(
        &self,
        t: &[f64],
        e_field: &[f64],
        h: &[f64],
        theta_rel: &[f64],
    ) -> Result<[Vec<f64>; 4]> {
        let add3 = |a: Vec<f64>, b: Vec<f64>, c: Vec<f64>| -> Vec<f64> {
            a.iter()
                .zip(&b)
                .zip(&c)
                .map(|((x, y), z)| x + y + z)
                .collect()
        };
        let strain = add3(
            self.c_inv.apply(t)?,
            self.c_inv_e.apply(e_field)?,
            self.c_inv_lambda_theta0.apply(theta_rel)?,
        );
        let d = add3(
            self.e_t_c_inv().apply(t)?,
            self.eps_eff.apply(e_field)?,
            self.d_theta.apply(theta_rel)?,
        );
        let b = self.mu.apply(h)?;
        let eta = add3(
            self.theta0_lambda_t_c_inv().apply(t)?,
            self.eta_e().apply(e_field)?,
            self.eta_theta.apply(theta_rel)?,
        );
        Ok([strain, d, b, eta])
    }
}

/// Solves the stress-form constitutive relations for the strain.
pub fn invert_constitutive(m: &MaterialConfig) -> Result<InvertedLaw> {
    let c_inv = m.c.inverse("C")?;
    let c_inv = if m.c.relative_asymmetry().0 <= SYMMETRY_RTOL {
        c_inv.sym()
    } else {
        c_inv
    };
    let theta0 = m.theta0_op();
    let lambda_theta0 = m.lambda.mul(&theta0)?;
    let c_inv_e = c_inv.mul(&m.e)?;
    let c_inv_lambda_theta0 = c_inv.mul(&lambda_theta0)?;
    let e_t = m.e.transpose();
    let eps_eff = m.epsilon.add(&e_t.mul(&c_inv_e)?)?;
    let eps_eff = if m.epsilon.relative_asymmetry().0 <= SYMMETRY_RTOL {
        symmetrize_if_close(eps_eff)
    } else {
        eps_eff
    };
    let d_theta = m.p.mul(&theta0)?.add(&e_t.mul(&c_inv_lambda_theta0)?)?;
    let eta_theta = m
        .gamma0()
        .add(&lambda_theta0.transpose().mul(&c_inv_lambda_theta0)?)?;
    let eta_theta = if m.gamma0().relative_asymmetry().0 <= SYMMETRY_RTOL {
        symmetrize_if_close(eta_theta)
    } else {
        eta_theta
    };
    Ok(InvertedLaw {
        c_inv,
        c_inv_e,
        c_inv_lambda_theta0,
        eps_eff,
        d_theta,
        mu: m.mu.clone(),
        eta_theta,
    })
}

/// One block entry of a block operator: `(row slot, column slot, block)`.
pub type BlockEntry = (Slot, Slot, CoefficientBlock);

/// Assembles a block operator on `layout` from coefficient blocks; sparse when
/// every block is local, dense otherwise.
pub fn assemble_blocks(layout: &StateLayout, entries: &[BlockEntry]) -> Result<LinearOperator> {
    let n = layout.dim();
    let cells = layout.cells();
    for (rs, cs, b) in entries {
        if b.dims() != (rs.comps(), cs.comps()) || b.cells() != cells {
            return Err(invalid(format!(
                "block at ({}, {}) has shape {:?} on {} cells",
                rs.name(),
                cs.name(),
                b.dims(),
                b.cells()
            )));
        }
    }
    let offset = |s: &Slot| {
        layout
            .offset(*s)
            .ok_or_else(|| invalid(format!("slot {} not in layout", s.name())))
    };
    if entries.iter().any(|(_, _, b)| b.is_nonlocal()) {
        let mut m = DMatrix::zeros(n, n);
        for (rs, cs, b) in entries {
            let d = b.to_dense();
            let mut view = m.view_mut((offset(rs)?, offset(cs)?), (d.nrows(), d.ncols()));
            view += d;
        }
        return Ok(LinearOperator::Dense(m));
    }
    let mut tb = TripletBuilder::new(n, n);
    for (rs, cs, b) in entries {
        let (ro, co) = (offset(rs)?, offset(cs)?);
        let (r, c) = b.dims();
        for cell in 0..cells {
            let blk = b.cell_block(cell).expect("local block");
            tb.push_dense(blk, ro + cell * r, co + cell * c);
        }
    }
    Ok(LinearOperator::Sparse(tb.finalize()))
}

/// Block entries of `M₀` (upper blocks and their transposes).
pub fn m0_entries(m: &MaterialConfig, law: &InvertedLaw) -> Vec<BlockEntry> {
    vec![
        (Slot::V, Slot::V, m.rho.clone()),
        (Slot::T, Slot::T, law.c_inv.clone()),
        (Slot::T, Slot::E, law.c_inv_e.clone()),
        (Slot::E, Slot::T, law.e_t_c_inv()),
        (Slot::T, Slot::Theta, law.c_inv_lambda_theta0.clone()),
        (Slot::Theta, Slot::T, law.theta0_lambda_t_c_inv()),
        (Slot::E, Slot::E, law.eps_eff.clone()),
        (Slot::E, Slot::Theta, law.d_theta.clone()),
        (Slot::Theta, Slot::E, law.eta_e()),
        (Slot::H, Slot::H, m.mu.clone()),
        (Slot::Theta, Slot::Theta, law.eta_theta.clone()),
        (Slot::Q, Slot::Q, m.kappa1.clone()),
    ]
}

/// The time-derivative weight `M₀` of the full system.
pub fn assemble_m0(m: &MaterialConfig) -> Result<LinearOperator> {
    let law = invert_constitutive(m)?;
    assemble_blocks(&StateLayout::full(m.cells()), &m0_entries(m, &law))
}

/// The zeroth-order material operator `M₁`: `σ` on `E`, `κ₀⁻¹` on `q`.
pub fn assemble_m1(m: &MaterialConfig) -> Result<LinearOperator> {
    assemble_blocks(
        &StateLayout::full(m.cells()),
        &[
            (Slot::E, Slot::E, m.sigma.clone()),
            (Slot::Q, Slot::Q, m.kappa0_inv.clone()),
        ],
    )
}

/// `M₀` with the piezo-magnetic coupling `β` between velocity and magnetic
/// field: `ρ* + βμβ*` on `v`, `−βμ` / `−μβ*` on the `v`/`H` couplings.
pub fn assemble_m0_piezomagnetic(m: &MaterialConfig) -> Result<LinearOperator> {
    let beta = m
        .beta
        .as_ref()
        .ok_or_else(|| invalid("piezo-magnetic assembly needs a `beta` block"))?;
    let law = invert_constitutive(m)?;
    let beta_mu = beta.mul(&m.mu)?;
    let v_block = m.rho.add(&beta_mu.mul(&beta.transpose())?.sym())?;
    let coupling = beta_mu.scale(-1.0);
    let mut entries = m0_entries(m, &law);
    entries[0] = (Slot::V, Slot::V, v_block);
    entries.push((Slot::V, Slot::H, coupling.clone()));
    entries.push((Slot::H, Slot::V, coupling.transpose()));
    assemble_blocks(&StateLayout::full(m.cells()), &entries)
}

/// Assembled material operators of the full system.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledOperators {
    pub m0: LinearOperator,
    pub m1: LinearOperator,
    pub layout: StateLayout,
}

impl AssembledOperators {
    pub fn new(m: &MaterialConfig) -> Result<Self> {
        let m0 = if m.beta.is_some() {
            assemble_m0_piezomagnetic(m)?
        } else {
            assemble_m0(m)?
        };
        Ok(Self {
            m0,
            m1: assemble_m1(m)?,
            layout: StateLayout::full(m.cells()),
        })
    }
}

/// Dense 19x19 `(M₀, M₁)` of a single cell of a local material.
pub fn cell_matrices(m: &MaterialConfig, cell: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let single = m.restrict_to_cell(cell)?;
    let ops = AssembledOperators::new(&single)?;
    Ok((ops.m0.to_dense(), ops.m1.to_dense()))
}

/// `true` when `M₀` is exactly symmetric.
pub fn is_exactly_symmetric(op: &LinearOperator) -> bool {
    match op {
        LinearOperator::Dense(d) => linalg::relative_asymmetry(d) == 0.0,
        LinearOperator::Sparse(_) => op.relative_asymmetry() == 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-cell material whose (T₁₁, E₁, θ) components behave like the scalar
    /// model C=2, e=1, λ=1, p=1, ε=1, Θ₀=1, α=1.
    fn scalar_mode() -> MaterialConfig {
        let mut b = MaterialBlocks::identity(1);
        b.c = CoefficientBlock::scalar_identity(1, 6, 2.0);
        let mut e = DMatrix::zeros(6, 3);
        e[(0, 0)] = 1.0;
        b.e = CoefficientBlock::uniform(1, e);
        let mut l = DMatrix::zeros(6, 1);
        l[(0, 0)] = 1.0;
        b.lambda = CoefficientBlock::uniform(1, l);
        let mut p = DMatrix::zeros(3, 1);
        p[(0, 0)] = 1.0;
        b.p = CoefficientBlock::uniform(1, p);
        MaterialConfig::new(b).unwrap()
    }

    #[test]
    fn decoupled_identity_gives_identity_m0() {
        let m = MaterialConfig::new(MaterialBlocks::identity(3)).unwrap();
        let m0 = assemble_m0(&m).unwrap().to_dense();
        assert_eq!(m0, DMatrix::identity(57, 57));
    }

    #[test]
    fn scalar_mode_inverted_law() {
        let law = invert_constitutive(&scalar_mode()).unwrap();
        let mut t = vec![0.0; 6];
        let mut ef = vec![0.0; 3];
        // unit T₁₁ / E₁ / θ responses
        t[0] = 1.0;
        let [s, d, _, eta] = law.apply(&t, &[0.0; 3], &[0.0; 3], &[0.0]).unwrap();
        assert_eq!((s[0], d[0], eta[0]), (0.5, 0.5, 0.5));
        t[0] = 0.0;
        ef[0] = 1.0;
        let [s, d, _, eta] = law.apply(&t, &ef, &[0.0; 3], &[0.0]).unwrap();
        assert_eq!((s[0], d[0], eta[0]), (0.5, 1.5, 1.5));
        let [s, d, _, eta] = law.apply(&[0.0; 6], &[0.0; 3], &[0.0; 3], &[1.0]).unwrap();
        assert_eq!((s[0], d[0], eta[0]), (0.5, 1.5, 1.5));
    }

    #[test]
    fn scalar_mode_middle_block() {
        let m0 = assemble_m0(&scalar_mode()).unwrap().to_dense();
        let l = StateLayout::full(1);
        let idx = [
            l.offset(Slot::T).unwrap(),
            l.offset(Slot::E).unwrap(),
            l.offset(Slot::Theta).unwrap(),
        ];
        let expected = [[0.5, 0.5, 0.5], [0.5, 1.5, 1.5], [0.5, 1.5, 1.5]];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                assert_eq!(m0[(i, j)], expected[a][b], "entry ({a},{b})");
            }
        }
        assert_eq!(linalg::relative_asymmetry(&m0), 0.0);
    }

    #[test]
    fn m1_sparsity() {
        let mut b = MaterialBlocks::identity(2);
        let m = MaterialConfig::new(b.clone()).unwrap();
        let m1 = assemble_m1(&m).unwrap().to_dense();
        let l = StateLayout::full(2);
        let q = l.range(Slot::Q).unwrap();
        let mut expected = DMatrix::zeros(38, 38);
        for i in q {
            expected[(i, i)] = 1.0;
        }
        assert_eq!(m1, expected);

        b.sigma = CoefficientBlock::identity(2, 3);
        let m1 = assemble_m1(&MaterialConfig::new(b).unwrap())
            .unwrap()
            .to_dense();
        for i in l.range(Slot::E).unwrap() {
            expected[(i, i)] = 1.0;
        }
        assert_eq!(m1, expected);
    }

    #[test]
    fn singular_c_is_reported_with_cell() {
        let mut b = MaterialBlocks::identity(2);
        b.c = CoefficientBlock::per_cell(6, 6, vec![DMatrix::identity(6, 6), DMatrix::zeros(6, 6)])
            .unwrap();
        let m = MaterialConfig::new(b).unwrap();
        assert_eq!(
            assemble_m0(&m).unwrap_err(),
            crate::error::Error::SingularCoefficient {
                block: "C".into(),
                cell: Some(1)
            }
        );
    }

    #[test]
    fn piezomagnetic_requires_beta() {
        let m = MaterialConfig::new(MaterialBlocks::identity(1)).unwrap();
        assert!(assemble_m0_piezomagnetic(&m).is_err());
    }

    #[test]
    fn piezomagnetic_scalar_subblock() {
        let mut b = MaterialBlocks::identity(1);
        b.beta = Some(CoefficientBlock::identity(1, 3));
        let m0 = assemble_m0_piezomagnetic(&MaterialConfig::new(b).unwrap())
            .unwrap()
            .to_dense();
        let l = StateLayout::full(1);
        let (v, h) = (l.offset(Slot::V).unwrap(), l.offset(Slot::H).unwrap());
        let sub = DMatrix::from_row_slice(2, 2, &[m0[(v, v)], m0[(v, h)], m0[(h, v)], m0[(h, h)]]);
        assert_eq!(sub, DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]));
        // eigenvalues (3 ± √5)/2
        assert!(linalg::min_sym_eig(&sub) > 0.38);
    }

    #[test]
    fn rejects_bad_theta0_and_shapes() {
        let mut b = MaterialBlocks::identity(2);
        b.theta0[1] = 0.0;
        assert!(MaterialConfig::new(b).is_err());
        let mut b = MaterialBlocks::identity(2);
        b.e = CoefficientBlock::zeros(2, 3, 6);
        assert!(MaterialConfig::new(b).is_err());
    }
}
