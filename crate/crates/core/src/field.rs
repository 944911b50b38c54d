//! Grid fields and the block-structured state vector.

use crate::error::{invalid, Result};
use crate::grid::Grid;

/// Components per cell of a grid field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Scalar,
    Vector,
    /// Symmetric 3x3 tensor in weighted Voigt encoding.
    Voigt,
}

impl FieldKind {
    pub const fn comps(self) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector => 3,
            FieldKind::Voigt => 6,
        }
    }

    pub fn from_comps(comps: usize) -> Option<Self> {
        match comps {
            1 => Some(FieldKind::Scalar),
            3 => Some(FieldKind::Vector),
            6 => Some(FieldKind::Voigt),
            _ => None,
        }
    }
}

/// Values of one field on a grid: row-major over cells, component-major
/// within a cell (`values[cell * comps + c]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    kind: FieldKind,
    cells: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(kind: FieldKind, cells: usize) -> Self {
        Self {
            kind,
            cells,
            values: vec![0.0; kind.comps() * cells],
        }
    }

    pub fn from_values(kind: FieldKind, cells: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != kind.comps() * cells {
            return Err(invalid(format!(
                "{kind:?} field on {cells} cells needs {} values, got {}",
                kind.comps() * cells,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field values must be finite"));
        }
        Ok(Self {
            kind,
            cells,
            values,
        })
    }

    /// Evaluates `f(center)` at every cell center.
    pub fn from_fn(kind: FieldKind, grid: &Grid, mut f: impl FnMut([f64; 3]) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(kind.comps() * grid.cells());
        for c in 0..grid.cells() {
            let v = f(grid.center(c));
            assert_eq!(
                v.len(),
                kind.comps(),
                "closure returned wrong component count"
            );
            values.extend(v);
        }
        Self {
            kind,
            cells: grid.cells(),
            values,
        }
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn comps(&self) -> usize {
        self.kind.comps()
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        let k = self.comps();
        &self.values[c * k..(c + 1) * k]
    }
}

/// One unknown of the evolution system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    /// Velocity `v = ∂₀u`.
    V,
    /// Stress.
    T,
    /// Electric field.
    E,
    /// Magnetic field.
    H,
    /// Relative temperature `Θ₀⁻¹θ`.
    Theta,
    /// Heat flux.
    Q,
}

impl Slot {
    pub const fn kind(self) -> FieldKind {
        match self {
            Slot::T => FieldKind::Voigt,
            Slot::Theta => FieldKind::Scalar,
            _ => FieldKind::Vector,
        }
    }

    pub const fn comps(self) -> usize {
        self.kind().comps()
    }

    pub const fn name(self) -> &'static str {
        match self {
            Slot::V => "v",
            Slot::T => "T",
            Slot::E => "E",
            Slot::H => "H",
            Slot::Theta => "theta",
            Slot::Q => "q",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "v" => Some(Slot::V),
            "T" => Some(Slot::T),
            "E" => Some(Slot::E),
            "H" => Some(Slot::H),
            "theta" => Some(Slot::Theta),
            "q" => Some(Slot::Q),
            _ => None,
        }
    }
}

/// Slots of the full system `(v, T, E, H, Θ₀⁻¹θ, q)`: 19 values per cell.
pub const FULL_SLOTS: [Slot; 6] = [Slot::V, Slot::T, Slot::E, Slot::H, Slot::Theta, Slot::Q];

/// Slots of the quasi-electrostatic system `(v, T, Θ₀⁻¹θ, q)`: 13 values per cell.
pub const REDUCED_SLOTS: [Slot; 4] = [Slot::V, Slot::T, Slot::Theta, Slot::Q];

/// Block layout of a state vector: slot fields are stored one after another,
/// each field in [`Field`] order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLayout {
    slots: Vec<Slot>,
    cells: usize,
    offsets: Vec<usize>,
}

impl StateLayout {
    pub fn new(slots: &[Slot], cells: usize) -> Self {
        let mut offsets = Vec::with_capacity(slots.len() + 1);
        let mut off = 0;
        for s in slots {
            offsets.push(off);
            off += s.comps() * cells;
        }
        offsets.push(off);
        Self {
            slots: slots.to_vec(),
            cells,
            offsets,
        }
    }

    pub fn full(cells: usize) -> Self {
        Self::new(&FULL_SLOTS, cells)
    }

    pub fn reduced(cells: usize) -> Self {
        Self::new(&REDUCED_SLOTS, cells)
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn per_cell(&self) -> usize {
        self.slots.iter().map(|s| s.comps()).sum()
    }

    pub fn position(&self, slot: Slot) -> Option<usize> {
        self.slots.iter().position(|&s| s == slot)
    }

    /// Index range of `slot` in the global vector.
    pub fn range(&self, slot: Slot) -> Option<std::ops::Range<usize>> {
        self.position(slot)
            .map(|p| self.offsets[p]..self.offsets[p + 1])
    }

    pub fn offset(&self, slot: Slot) -> Option<usize> {
        self.position(slot).map(|p| self.offsets[p])
    }

    /// Cell owning each global index.
    pub fn cell_of(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dim());
        for s in &self.slots {
            for c in 0..self.cells {
                out.extend(std::iter::repeat_n(c, s.comps()));
            }
        }
        out
    }

    /// Permutation listing global indices cell by cell (slot order within a
    /// cell). Used to keep banded factorizations narrow.
    pub fn cell_interleaved_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.dim());
        for c in 0..self.cells {
            for (p, s) in self.slots.iter().enumerate() {
                let base = self.offsets[p] + c * s.comps();
                order.extend(base..base + s.comps());
            }
        }
        order
    }
}

/// The unknown `U` of the evolution system.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: StateLayout,
    values: Vec<f64>,
}

impl StateVector {
    pub fn zeros(layout: StateLayout) -> Self {
        let values = vec![0.0; layout.dim()];
        Self { layout, values }
    }

    pub fn from_values(layout: StateLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.dim() {
            return Err(invalid(format!(
                "state vector needs {} values, got {}",
                layout.dim(),
                values.len()
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn slot(&self, slot: Slot) -> Option<&[f64]> {
        self.layout.range(slot).map(|r| &self.values[r])
    }

    pub fn field(&self, slot: Slot) -> Option<Field> {
        self.slot(slot).map(|v| Field {
            kind: slot.kind(),
            cells: self.layout.cells,
            values: v.to_vec(),
        })
    }

    pub fn set_field(&mut self, slot: Slot, field: &Field) -> Result<()> {
        let r = self
            .layout
            .range(slot)
            .ok_or_else(|| invalid(format!("slot {} not in this layout", slot.name())))?;
        if field.kind != slot.kind() || field.values.len() != r.len() {
            return Err(invalid(format!(
                "field shape does not match slot {}",
                slot.name()
            )));
        }
        self.values[r].copy_from_slice(&field.values);
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}
