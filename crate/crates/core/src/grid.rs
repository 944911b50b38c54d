use crate::error::{invalid, Result};

/// Uniform Cartesian grid on the box `[0, L1] x [0, L2] x [0, L3]`.
///
/// Cells are numbered row-major: `index = (i * n2 + j) * n3 + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: [usize; 3],
    length: [f64; 3],
    h: [f64; 3],
}

impl Grid {
    pub fn new(n: [usize; 3], length: [f64; 3]) -> Result<Self> {
        if n.contains(&0) {
            return Err(invalid(format!("cell counts must be >= 1, got {n:?}")));
        }
        if length.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(invalid(format!(
                "lengths must be finite and > 0, got {length:?}"
            )));
        }
        let h = [
            length[0] / n[0] as f64,
            length[1] / n[1] as f64,
            length[2] / n[2] as f64,
        ];
        Ok(Self { n, length, h })
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn length(&self) -> [f64; 3] {
        self.length
    }

    pub fn h(&self) -> [f64; 3] {
        self.h
    }

    pub fn cells(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        (ijk[0] * self.n[1] + ijk[1]) * self.n[2] + ijk[2]
    }

    pub fn coords(&self, cell: usize) -> [usize; 3] {
        let k = cell % self.n[2];
        let j = (cell / self.n[2]) % self.n[1];
        let i = cell / (self.n[1] * self.n[2]);
        [i, j, k]
    }

    /// Cell center in physical coordinates.
    pub fn center(&self, cell: usize) -> [f64; 3] {
        let c = self.coords(cell);
        [
            (c[0] as f64 + 0.5) * self.h[0],
            (c[1] as f64 + 0.5) * self.h[1],
            (c[2] as f64 + 0.5) * self.h[2],
        ]
    }

    /// Next cell along `axis`, or `None` past the upper boundary.
    pub fn forward(&self, cell: usize, axis: usize) -> Option<usize> {
        let mut c = self.coords(cell);
        c[axis] += 1;
        (c[axis] < self.n[axis]).then(|| self.index(c))
    }

    /// Previous cell along `axis`, or `None` before the lower boundary.
    pub fn backward(&self, cell: usize, axis: usize) -> Option<usize> {
        let mut c = self.coords(cell);
        if c[axis] == 0 {
            return None;
        }
        c[axis] -= 1;
        Some(self.index(c))
    }

    /// Distance (in cells) from the nearest boundary face.
    pub fn boundary_distance(&self, cell: usize) -> usize {
        let c = self.coords(cell);
        (0..3)
            .map(|a| c[a].min(self.n[a] - 1 - c[a]))
            .min()
            .unwrap_or(0)
    }
}

pub fn make_grid(n: [usize; 3], length: [f64; 3]) -> Result<Grid> {
    Grid::new(n, length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn spacing_and_cell_count() {
        let g = make_grid([2, 2, 2], [1.0, 1.0, 1.0]).unwrap();
        assert_eq!(g.h(), [0.5, 0.5, 0.5]);
        assert_eq!(g.cells(), 8);

        let g = make_grid([1, 1, 1], [2.0, 2.0, 2.0]).unwrap();
        assert_eq!(g.h(), [2.0, 2.0, 2.0]);
        assert_eq!(g.cells(), 1);
    }

    #[test]
    fn rejects_empty_axis_and_bad_length() {
        assert!(matches!(
            make_grid([0, 1, 1], [1.0, 1.0, 1.0]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            make_grid([1, 1, 1], [1.0, -1.0, 1.0]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(make_grid([1, 1, 1], [1.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn index_roundtrip_and_neighbours() {
        let g = make_grid([3, 4, 5], [1.0, 1.0, 1.0]).unwrap();
        for c in 0..g.cells() {
            assert_eq!(g.index(g.coords(c)), c);
        }
        let c = g.index([1, 2, 3]);
        assert_eq!(g.forward(c, 0), Some(g.index([2, 2, 3])));
        assert_eq!(g.backward(c, 2), Some(g.index([1, 2, 2])));
        assert_eq!(g.forward(g.index([2, 0, 0]), 0), None);
        assert_eq!(g.backward(g.index([0, 0, 0]), 1), None);
    }
}
