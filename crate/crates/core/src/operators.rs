//! Boundary-conditioned difference operators on cell-centred grids and the
//! skew spatial block `A`.
//!
//! The "circle" operators `grad°`, `div°`, `curl°`, `Grad°` carry the
//! homogeneous boundary conditions through zero ghost values. Their partners
//! `grad`, `div`, `curl`, `Div` are never discretized on their own: they are
//! literal (negated) transposes, so every adjoint pairing holds entry-wise.

use std::f64::consts::SQRT_2;

use crate::field::{Slot, StateLayout};
use crate::grid::Grid;
use crate::sparse::{SparseOperator, TripletBuilder};

/// Pushes the forward difference `∂ₐ` of component `src` into output
/// component `dst` (zero ghost beyond the last cell).
fn push_forward(
    tb: &mut TripletBuilder,
    grid: &Grid,
    axis: usize,
    (dst, out_comps): (usize, usize),
    (src, in_comps): (usize, usize),
    scale: f64,
) {
    let s = scale / grid.h()[axis];
    for cell in 0..grid.cells() {
        let row = cell * out_comps + dst;
        tb.push(row, cell * in_comps + src, -s);
        if let Some(nb) = grid.forward(cell, axis) {
            tb.push(row, nb * in_comps + src, s);
        }
    }
}

/// `grad°`: scalar → vector, forward differences with `φ = 0` outside.
pub fn build_grad0(grid: &Grid) -> SparseOperator {
    let nc = grid.cells();
    let mut tb = TripletBuilder::new(3 * nc, nc);
    for axis in 0..3 {
        push_forward(&mut tb, grid, axis, (axis, 3), (0, 1), 1.0);
    }
    tb.finalize()
}

/// `div°`: vector → scalar, backward differences with zero normal component
/// outside.
pub fn build_div0(grid: &Grid) -> SparseOperator {
    let nc = grid.cells();
    let mut tb = TripletBuilder::new(nc, 3 * nc);
    for axis in 0..3 {
        let s = 1.0 / grid.h()[axis];
        for cell in 0..nc {
            tb.push(cell, cell * 3 + axis, s);
            if let Some(nb) = grid.backward(cell, axis) {
                tb.push(cell, nb * 3 + axis, -s);
            }
        }
    }
    tb.finalize()
}

/// `curl°`: vector → vector, forward differences with zero tangential ghosts.
pub fn build_curl0(grid: &Grid) -> SparseOperator {
    let nc = grid.cells();
    let mut tb = TripletBuilder::new(3 * nc, 3 * nc);
    // (curl u)_i = ∂_j u_k − ∂_k u_j for cyclic (i, j, k)
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        push_forward(&mut tb, grid, j, (i, 3), (k, 3), 1.0);
        push_forward(&mut tb, grid, k, (i, 3), (j, 3), -1.0);
    }
    tb.finalize()
}

/// `Grad°`: vector → weighted Voigt tensor, `sym ∂ⱼvᵢ` with `v = 0` outside.
pub fn build_grad0_sym(grid: &Grid) -> SparseOperator {
    let nc = grid.cells();
    let mut tb = TripletBuilder::new(6 * nc, 3 * nc);
    for a in 0..3 {
        push_forward(&mut tb, grid, a, (a, 6), (a, 3), 1.0);
    }
    // shear rows carry √2 · ½(∂ⱼvᵢ + ∂ᵢvⱼ)
    for (row, (i, j)) in [(3, (1, 2)), (4, (0, 2)), (5, (0, 1))] {
        let s = SQRT_2 * 0.5;
        push_forward(&mut tb, grid, j, (row, 6), (i, 3), s);
        push_forward(&mut tb, grid, i, (row, 6), (j, 3), s);
    }
    tb.finalize()
}

/// The four circle operators of one grid with their transposed partners.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceOperators {
    pub grad0: SparseOperator,
    pub div0: SparseOperator,
    pub curl0: SparseOperator,
    pub grad0_sym: SparseOperator,
}

impl DifferenceOperators {
    pub fn new(grid: &Grid) -> Self {
        Self {
            grad0: build_grad0(grid),
            div0: build_div0(grid),
            curl0: build_curl0(grid),
            grad0_sym: build_grad0_sym(grid),
        }
    }

    /// `grad = −(div°)ᵀ`
    pub fn grad(&self) -> SparseOperator {
        self.div0.transpose().scale(-1.0)
    }

    /// `div = −(grad°)ᵀ`
    pub fn div(&self) -> SparseOperator {
        self.grad0.transpose().scale(-1.0)
    }

    /// `curl = (curl°)ᵀ`
    pub fn curl(&self) -> SparseOperator {
        self.curl0.transpose()
    }

    /// `Div = −(Grad°)ᵀ`
    pub fn div_sym(&self) -> SparseOperator {
        self.grad0_sym.transpose().scale(-1.0)
    }
}

/// The spatial operator `A` together with the stencils it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialBlock {
    pub a: SparseOperator,
    pub layout: StateLayout,
    pub ops: DifferenceOperators,
}

impl SpatialBlock {
    /// Sub-operator at block position `(row, col)` (zero if absent).
    pub fn block(&self, row: Slot, col: Slot) -> Option<SparseOperator> {
        let rr = self.layout.range(row)?;
        let cr = self.layout.range(col)?;
        let mut tb = TripletBuilder::new(rr.len(), cr.len());
        for r in rr.clone() {
            for (c, v) in self.a.row(r) {
                if cr.contains(&c) {
                    tb.push(r - rr.start, c - cr.start, v);
                }
            }
        }
        Some(tb.finalize())
    }
}

fn place(layout: &StateLayout, entries: &[(Slot, Slot, SparseOperator, f64)]) -> SparseOperator {
    let n = layout.dim();
    let mut tb = TripletBuilder::new(n, n);
    for (r, c, op, s) in entries {
        let ro = layout.offset(*r).expect("slot in layout");
        let co = layout.offset(*c).expect("slot in layout");
        tb.push_operator(op, ro, co, *s);
    }
    tb.finalize()
}

/// `A` on the full state `(v, T, E, H, Θ₀⁻¹θ, q)`.
pub fn assemble_a(grid: &Grid) -> SpatialBlock {
    let ops = DifferenceOperators::new(grid);
    let layout = StateLayout::full(grid.cells());
    let a = place(
        &layout,
        &[
            (Slot::V, Slot::T, ops.div_sym(), -1.0),
            (Slot::T, Slot::V, ops.grad0_sym.clone(), -1.0),
            (Slot::E, Slot::H, ops.curl(), -1.0),
            (Slot::H, Slot::E, ops.curl0.clone(), 1.0),
            (Slot::Theta, Slot::Q, ops.div0.clone(), 1.0),
            (Slot::Q, Slot::Theta, ops.grad(), 1.0),
        ],
    );
    SpatialBlock { a, layout, ops }
}

/// `A` of the quasi-electrostatic system on `(v, T, Θ₀⁻¹θ, q)`.
pub fn assemble_a_reduced(grid: &Grid) -> SpatialBlock {
    let ops = DifferenceOperators::new(grid);
    let layout = StateLayout::reduced(grid.cells());
    let a = place(
        &layout,
        &[
            (Slot::V, Slot::T, ops.div_sym(), -1.0),
            (Slot::T, Slot::V, ops.grad0_sym.clone(), -1.0),
            (Slot::Theta, Slot::Q, ops.div0.clone(), 1.0),
            (Slot::Q, Slot::Theta, ops.grad(), 1.0),
        ],
    );
    SpatialBlock { a, layout, ops }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use nalgebra::DMatrix;

    fn grid(n: [usize; 3]) -> Grid {
        Grid::new(n, [n[0] as f64, n[1] as f64, n[2] as f64]).unwrap()
    }

    #[test]
    fn grad0_two_cells() {
        let g = build_grad0(&grid([2, 1, 1])).to_dense();
        let x = DMatrix::from_fn(2, 2, |r, c| g[(3 * r, c)]);
        assert_eq!(x, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]));
    }

    #[test]
    fn grad0_constant_single_cell() {
        let g = build_grad0(&grid([1, 1, 1]));
        assert_eq!(g.apply(&[2.5]).unwrap(), vec![-2.5; 3]);
    }

    #[test]
    fn div0_single_cell() {
        // zero ghost on the low side only: q/h per axis
        let d = build_div0(&Grid::new([1, 1, 1], [0.5, 0.5, 0.5]).unwrap());
        assert_eq!(d.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![12.0]);
    }

    #[test]
    fn curl0_kills_gradients() {
        let g = grid([3, 4, 3]);
        let ops = DifferenceOperators::new(&g);
        let cg = ops.curl0.matmul(&ops.grad0).unwrap();
        assert!(cg.iter().all(|(_, _, v)| v.abs() <= 1e-12));
    }

    #[test]
    fn curl0_constant_interior() {
        let g = grid([4, 4, 4]);
        let c = build_curl0(&g);
        let u: Vec<f64> = (0..g.cells()).flat_map(|_| [1.0, -2.0, 0.5]).collect();
        let out = c.apply(&u).unwrap();
        for cell in 0..g.cells() {
            if (0..3).all(|a| g.forward(cell, a).is_some()) {
                assert!(out[3 * cell..3 * cell + 3].iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn grad0_sym_single_cell_translation() {
        let g = build_grad0_sym(&grid([1, 1, 1]));
        let s = g.apply(&[1.0, 0.0, 0.0]).unwrap();
        let r = SQRT_2 * 0.5;
        assert_eq!(s, vec![-1.0, 0.0, 0.0, 0.0, -r, -r]);
    }

    #[test]
    fn a_is_exactly_skew() {
        for n in 1..=4 {
            let g = grid([n, n, n]);
            assert_eq!(assemble_a(&g).a.skew_defect(), 0.0);
            assert_eq!(assemble_a_reduced(&g).a.skew_defect(), 0.0);
        }
    }

    #[test]
    fn a_single_cell_by_hand() {
        let blk = assemble_a(&grid([1, 1, 1]));
        let a = blk.a.to_dense();
        assert_eq!((a.nrows(), a.ncols()), (19, 19));
        let r = SQRT_2 * 0.5;
        // T row of v: −Grad° = +identity on the diagonal strains, +r on shears
        let t = 3;
        assert_eq!(a[(t, 0)], 1.0);
        assert_eq!(a[(t + 4, 0)], r);
        assert_eq!(a[(t + 5, 0)], r);
        // H row of E: curl°, e.g. (curl° E)_1 = −E_3/h + E_2/h
        let (e, h) = (9, 12);
        assert_eq!(a[(h, e + 2)], -1.0);
        assert_eq!(a[(h, e + 1)], 1.0);
        // θ row of q: div°
        assert_eq!(a[(15, 16)], 1.0);
        assert_eq!(a[(16, 15)], -1.0);
        assert_eq!(linalg::max_abs_diff(&a, &(-a.transpose())), 0.0);
    }

    #[test]
    fn grad0_injective() {
        let g = grid([3, 2, 2]);
        let d = build_grad0(&g).to_dense();
        assert_eq!(linalg::rank(&d, 1e-10), g.cells());
    }

    #[test]
    fn derived_blocks_are_transposes() {
        let blk = assemble_a(&grid([2, 2, 2]));
        let vt = blk.block(Slot::V, Slot::T).unwrap();
        assert_eq!(vt, blk.ops.grad0_sym.transpose());
        let qt = blk.block(Slot::Q, Slot::Theta).unwrap();
        assert_eq!(qt, blk.ops.div0.transpose().scale(-1.0));
    }
}
