//! Property tests over randomized inputs. Matrices are drawn from a seeded
//! ChaCha stream so failures shrink to a seed and a few sizes.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector6};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evopiezo_core::operators::{
    assemble_a, assemble_a_reduced, build_div0, build_grad0, DifferenceOperators,
};
use evopiezo_core::quasistatic::build_projector;
use evopiezo_core::wellposedness::{
    affine_search, gauss_reduce, nu_ladder, BlockSymMatrix, Search,
};
use evopiezo_core::{
    assemble_m0, assemble_m0_piezomagnetic, gaussian_convolution_block, invert_constitutive,
    voigt_decode, voigt_encode, CoefficientBlock, Grid, MaterialBlocks, MaterialConfig,
};

fn spd(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
        .qr()
        .q();
    let d = DVector::from_fn(n, |_, _| rng.random_range(lo..hi));
    let m = &q * DMatrix::from_diagonal(&d) * q.transpose();
    (&m + m.transpose()) * 0.5
}

fn mat(r: usize, c: usize, s: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| s * rng.random_range(-1.0..1.0))
}

fn vecr(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn per_cell(cells: usize, f: impl FnMut(usize) -> DMatrix<f64>) -> CoefficientBlock {
    let v: Vec<_> = (0..cells).map(f).collect();
    let (r, c) = v[0].shape();
    CoefficientBlock::per_cell(r, c, v).unwrap()
}

fn random_material(cells: usize, seed: u64) -> MaterialBlocks {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    MaterialBlocks {
        rho: per_cell(cells, |_| spd(3, 0.5, 2.0, r)),
        c: per_cell(cells, |_| spd(6, 1.0, 3.0, r)),
        e: per_cell(cells, |_| mat(6, 3, 0.4, r)),
        lambda: per_cell(cells, |_| mat(6, 1, 0.4, r)),
        p: per_cell(cells, |_| mat(3, 1, 0.4, r)),
        epsilon: per_cell(cells, |_| spd(3, 0.5, 2.0, r)),
        mu: per_cell(cells, |_| spd(3, 0.5, 2.0, r)),
        alpha: per_cell(cells, |_| {
            DMatrix::from_element(1, 1, r.random_range(0.5..2.0))
        }),
        theta0: (0..cells).map(|_| r.random_range(0.5..2.0)).collect(),
        sigma: per_cell(cells, |_| spd(3, 0.1, 1.0, r)),
        kappa0_inv: per_cell(cells, |_| spd(3, 0.1, 1.0, r)),
        kappa1: per_cell(cells, |_| spd(3, 0.5, 2.0, r)),
        beta: None,
    }
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.amax()
}

fn inertia(a: &DMatrix<f64>, tol: f64) -> (usize, usize) {
    let e = SymmetricEigen::new(a.clone()).eigenvalues;
    (
        e.iter().filter(|&&x| x > tol).count(),
        e.iter().filter(|&&x| x < -tol).count(),
    )
}

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (
        [1usize..5, 1usize..5, 1usize..5],
        [0.3f64..3.0, 0.3f64..3.0, 0.3f64..3.0],
    )
        .prop_map(|(n, l)| Grid::new(n, l).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn voigt_round_trip_and_inner_product(a in prop::array::uniform6(-10.0f64..10.0), b in prop::array::uniform6(-10.0f64..10.0)) {
        let va = Vector6::from_row_slice(&a);
        let vb = Vector6::from_row_slice(&b);
        let ta = voigt_decode(&va);
        let tb = voigt_decode(&vb);
        let back = voigt_encode(&ta).unwrap();
        prop_assert!((back - va).amax() <= 1e-14 * va.amax().max(1.0));
        let frob: f64 = ta.component_mul(&tb).sum();
        prop_assert!((frob - va.dot(&vb)).abs() <= 1e-12 * (1.0 + frob.abs()));
        prop_assert_eq!(ta, ta.transpose());
    }

    #[test]
    fn voigt_rejects_asymmetric(x in 0.1f64..5.0) {
        let mut m = Matrix3::identity();
        m[(0, 1)] = x;
        prop_assert!(voigt_encode(&m).is_err());
    }

    #[test]
    fn coefficient_block_is_linear(seed in any::<u64>(), cells in 1usize..6, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blk = per_cell(cells, |_| mat(6, 3, 1.0, &mut rng));
        let x = vecr(3 * cells, &mut rng);
        let y = vecr(3 * cells, &mut rng);
        let comb: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let lhs = blk.apply(&comb).unwrap();
        let (ax, ay) = (blk.apply(&x).unwrap(), blk.apply(&y).unwrap());
        let scale = lhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a * ax[i] + b * ay[i])).abs() <= 1e-12 * scale);
        }
        // dense form agrees with the per-cell application
        let dense = blk.to_dense() * DVector::from_column_slice(&x);
        for i in 0..ax.len() {
            prop_assert!((dense[i] - ax[i]).abs() <= 1e-13);
        }
    }

    #[test]
    fn gaussian_block_is_symmetric_and_shifted(grid in grid_strategy(), width in 0.1f64..1.0, amp in 0.0f64..3.0, shift in 0.1f64..2.0) {
        let blk = gaussian_convolution_block(&grid, width, amp, shift, (3, 3)).unwrap();
        prop_assert!(blk.is_nonlocal());
        let d = blk.to_dense();
        prop_assert_eq!(&d, &d.transpose());
        // the Gaussian kernel is positive semidefinite, so the shift bounds the spectrum
        let min = SymmetricEigen::new(d.clone()).eigenvalues.min();
        prop_assert!(min >= shift - 1e-10, "min eig {} < shift {}", min, shift);
        // entry oracle: amplitude · exp(−r²/2w²) · cell volume on the diagonal of components
        let (i, j) = (0, grid.cells() - 1);
        let (xi, xj) = (grid.center(i), grid.center(j));
        let r2: f64 = (0..3).map(|a| (xi[a] - xj[a]).powi(2)).sum();
        let k = amp * (-r2 / (2.0 * width * width)).exp() * grid.cell_volume() + if i == j { shift } else { 0.0 };
        let entry = d[(3 * i, 3 * j)];
        prop_assert!((entry - k).abs() <= 1e-12 * (1.0 + k.abs()), "{} vs {}", entry, k);
    }

    #[test]
    fn inverted_law_round_trip(seed in any::<u64>(), cells in 1usize..4) {
        let b = random_material(cells, seed);
        let m = MaterialConfig::new(b.clone()).unwrap();
        let law = invert_constitutive(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let t = vecr(6 * cells, &mut rng);
        let e = vecr(3 * cells, &mut rng);
        let h = vecr(3 * cells, &mut rng);
        let th_rel = vecr(cells, &mut rng);
        let [strain, d, bfield, eta] = law.apply(&t, &e, &h, &th_rel).unwrap();
        for c in 0..cells {
            let blk = |x: &CoefficientBlock| x.cell_block(c).unwrap().clone();
            let sl = |v: &[f64], k: usize| DVector::from_column_slice(&v[k * c..k * (c + 1)]);
            let t0 = b.theta0[c];
            let theta = sl(&th_rel, 1) * t0;
            let (cc, ee, ll, pp) = (blk(&b.c), blk(&b.e), blk(&b.lambda), blk(&b.p));
            let (eps, mu, al) = (blk(&b.epsilon), blk(&b.mu), blk(&b.alpha));
            let s = sl(&strain, 6);
            let ef = sl(&e, 3);
            // T = C𝓔 − eE − λθ
            let t_back = &cc * &s - &ee * &ef - &ll * &theta;
            prop_assert!((t_back - sl(&t, 6)).amax() <= 1e-12);
            // D = eᵀ𝓔 + εE + pθ
            let d_back = ee.transpose() * &s + &eps * &ef + &pp * &theta;
            prop_assert!((d_back - sl(&d, 3)).amax() <= 1e-12);
            prop_assert!((&mu * sl(&h, 3) - sl(&bfield, 3)).amax() <= 1e-14);
            // Θ₀η = Θ₀λᵀ𝓔 + Θ₀pᵀE + γ₀Θ₀⁻¹θ
            let eta_back = ll.transpose() * &s * t0 + pp.transpose() * &ef * t0 + &al * &theta;
            prop_assert!((eta_back - sl(&eta, 1)).amax() <= 1e-12);
        }
    }

    #[test]
    fn m0_is_exactly_symmetric(seed in any::<u64>(), cells in 1usize..5) {
        let m = MaterialConfig::new(random_material(cells, seed)).unwrap();
        let m0 = assemble_m0(&m).unwrap().to_dense();
        prop_assert_eq!(&m0, &m0.transpose());
    }

    #[test]
    fn zero_beta_reproduces_m0(seed in any::<u64>(), cells in 1usize..4) {
        let mut b = random_material(cells, seed);
        let plain = assemble_m0(&MaterialConfig::new(b.clone()).unwrap()).unwrap().to_dense();
        b.beta = Some(CoefficientBlock::zeros(cells, 3, 3));
        let with = assemble_m0_piezomagnetic(&MaterialConfig::new(b).unwrap()).unwrap().to_dense();
        prop_assert_eq!(plain, with);
    }

    #[test]
    fn gauss_step_preserves_inertia(seed in any::<u64>(), s0 in 1usize..5, s1 in 1usize..5, s2 in 1usize..5, pivot in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = [s0, s1, s2];
        let n = s0 + s1 + s2;
        let a = mat(n, n, 1.0, &mut rng);
        let a = &a + a.transpose();
        let off: usize = sizes[..pivot].iter().sum();
        let pb = a.view((off, off), (sizes[pivot], sizes[pivot])).into_owned();
        prop_assume!(pb.svd(false, false).singular_values.min() > 0.05);
        let (r, l) = gauss_reduce(&BlockSymMatrix::new(a.clone(), &sizes).unwrap(), pivot).unwrap();
        prop_assert!(max_abs(&(&l * r.data() * l.transpose() - &a)) <= 1e-10);
        prop_assert_eq!(inertia(&a, 1e-9), inertia(r.data(), 1e-9));
    }

    #[test]
    fn affine_search_certificate_persists(seed in any::<u64>(), n in 1usize..6, rank in 0usize..6) {
        // X ⪰ 0 of the given rank, Y symmetric: once certified, larger ν stays certified
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = mat(n, rank.min(n), 1.0, &mut rng);
        let x = &g * g.transpose();
        let y = spd(n, 0.1, 1.0, &mut rng) - DMatrix::identity(n, n) * rng.random_range(0.0..2.0);
        let nus = nu_ladder(1024.0);
        if let Search::Certified { nu, .. } = affine_search(&x, &y, &nus, 1e-10) {
            for &v in nus.iter().filter(|&&v| v >= nu) {
                let lam = SymmetricEigen::new(&x * v + &y).eigenvalues.min();
                prop_assert!(lam >= 1e-10, "lost positivity at nu = {}: {}", v, lam);
            }
            // and ν is the first ladder value that works
            for &v in nus.iter().filter(|&&v| v < nu) {
                let lam = SymmetricEigen::new(&x * v + &y).eigenvalues.min();
                prop_assert!(lam < 1e-10 + 1e-9, "nu = {} already certifies ({})", v, lam);
            }
        }
    }

    #[test]
    fn spatial_block_is_skew_on_any_grid(grid in grid_strategy()) {
        for a in [assemble_a(&grid).a, assemble_a_reduced(&grid).a] {
            for (i, j, v) in a.iter() {
                prop_assert_eq!(v, -a.get(j, i));
            }
        }
        // adjoint pairing of the difference operators, entry by entry
        let g0 = build_grad0(&grid);
        let d0 = build_div0(&grid);
        for (i, j, v) in d0.iter() {
            prop_assert_eq!(v, -g0.get(j, i));
        }
        let ops = DifferenceOperators::new(&grid);
        let curl0 = ops.curl0.to_dense();
        let curl = ops.curl().to_dense();
        prop_assert_eq!(curl, curl0.transpose());
    }

    #[test]
    fn projector_properties(grid in grid_strategy(), seed in any::<u64>()) {
        prop_assume!(grid.cells() <= 27);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = per_cell(grid.cells(), |_| spd(3, 0.5, 2.0, &mut rng));
        let p = build_projector(&grid, &m).unwrap().to_dense().unwrap();
        prop_assert!(max_abs(&(&p * &p - &p)) <= 1e-10);
        prop_assert!(max_abs(&(&p - p.transpose())) <= 1e-10);
        prop_assert!((p.trace() - grid.cells() as f64).abs() <= 1e-8);
    }

    #[test]
    fn m12_forms_agree(seed in any::<u64>()) {
        let grid = Grid::new([2, 2, 1], [1.0, 1.0, 0.5]).unwrap();
        let mut b = random_material(4, seed);
        b.sigma = CoefficientBlock::zeros(4, 3, 3);
        let rs = evopiezo_core::quasistatic::assemble_reduced(&MaterialConfig::new(b).unwrap(), &grid).unwrap();
        prop_assert!(rs.m12_form_gap <= 1e-12, "gap {}", rs.m12_form_gap);
    }
}

#[test]
fn curl_of_grad_vanishes() {
    // discrete de Rham: curl°ᵀ-free fields include gradients of scalars vanishing outside
    let grid = Grid::new([3, 4, 2], [1.0, 2.0, 0.5]).unwrap();
    let ops = DifferenceOperators::new(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let phi = vecr(grid.cells(), &mut rng);
    let g = ops.grad0.apply(&phi).unwrap();
    let c = ops.curl0.apply(&g).unwrap();
    assert!(
        c.iter().all(|v| v.abs() < 1e-12),
        "{:?}",
        c.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    );
}
