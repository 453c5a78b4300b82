//! Spatial discretization, the state container and boundary tagging.
//!
//! The grid is a structured rectangle with cell-centered unknowns. Boundary
//! conditions enter through ghost values obtained by reflection across the
//! wall faces. `dim = 0` is a single homogeneous material point on which all
//! spatial derivative operators vanish identically.

pub mod loads;
pub mod snapshot;
pub mod stencil;

use crate::error::{Error, Result};
use crate::tensor::{Mat2, Vec2};
use serde::{Deserialize, Serialize};

pub use loads::{LoadSample, Loads, ScalarSchedule, VectorSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub extents: [f64; 2],
    pub cells: [usize; 2],
    pub spacing: [f64; 2],
    pub pad_factor: usize,
}

/// The four wall faces of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Face {
    XLow,
    XHigh,
    YLow,
    YHigh,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::XLow, Face::XHigh, Face::YLow, Face::YHigh];

    pub fn axis(self) -> usize {
        match self {
            Face::XLow | Face::XHigh => 0,
            Face::YLow | Face::YHigh => 1,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Result of stepping from a cell to its neighbor along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Cell(usize),
    /// The neighbor is a ghost mirrored from the given boundary cell.
    Ghost(usize, Face),
}

pub fn make_grid(dim: usize, extents: &[f64], cells: &[usize], pad_factor: usize) -> Result<Grid> {
    if dim > 2 {
        return Err(Error::config(format!("dim must be 0, 1 or 2, got {dim}")));
    }
    if pad_factor < 2 {
        return Err(Error::config(format!("pad_factor must be >= 2, got {pad_factor}")));
    }
    let mut ext = [1.0, 1.0];
    let mut n = [1usize, 1];
    for a in 0..dim {
        let e = *extents
            .get(a)
            .ok_or_else(|| Error::config(format!("missing extent for axis {a}")))?;
        let c = *cells
            .get(a)
            .ok_or_else(|| Error::config(format!("missing cell count for axis {a}")))?;
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::config(format!("extent on axis {a} must be positive, got {e}")));
        }
        if c == 0 {
            return Err(Error::config(format!("cell count on axis {a} must be >= 1")));
        }
        ext[a] = e;
        n[a] = c;
    }
    // Inactive axes keep unit extent so that volumes stay per unit length/area.
    for a in dim..2 {
        if let Some(&e) = extents.get(a) {
            if dim > 0 && e > 0.0 {
                ext[a] = e;
            }
        }
    }
    let spacing = [ext[0] / n[0] as f64, ext[1] / n[1] as f64];
    Ok(Grid {
        dim,
        extents: ext,
        cells: n,
        spacing,
        pad_factor,
    })
}

impl Grid {
    pub fn material_point() -> Grid {
        make_grid(0, &[], &[], 2).expect("material point grid")
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn active(&self, axis: usize) -> bool {
        axis < self.dim
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i + self.cells[0] * j
    }

    pub fn ij(&self, c: usize) -> (usize, usize) {
        (c % self.cells[0], c / self.cells[0])
    }

    /// Measure of one cell: area in 2D, length in 1D, unity for a material point.
    pub fn cell_volume(&self) -> f64 {
        match self.dim {
            0 => 1.0,
            1 => self.spacing[0],
            _ => self.spacing[0] * self.spacing[1],
        }
    }

    pub fn volume(&self) -> f64 {
        self.cell_volume() * self.len() as f64
    }

    /// Measure of a boundary face element on `face` adjacent to one cell.
    ///
    /// A material point exchanges heat through one unit of surface per unit
    /// volume, only through the `XLow` slot.
    pub fn face_measure(&self, face: Face) -> f64 {
        match (self.dim, face.axis()) {
            (0, 0) => match face {
                Face::XLow => 1.0,
                _ => 0.0,
            },
            (0, _) => 0.0,
            (1, 0) => 1.0,
            (1, _) => 0.0,
            (_, 0) => self.spacing[1],
            _ => self.spacing[0],
        }
    }

    /// Cells adjacent to `face`.
    pub fn boundary_cells(&self, face: Face) -> Vec<usize> {
        let [nx, ny] = self.cells;
        if self.dim == 0 {
            return if face == Face::XLow { vec![0] } else { Vec::new() };
        }
        if !self.active(face.axis()) {
            return Vec::new();
        }
        match face {
            Face::XLow => (0..ny).map(|j| self.idx(0, j)).collect(),
            Face::XHigh => (0..ny).map(|j| self.idx(nx - 1, j)).collect(),
            Face::YLow => (0..nx).map(|i| self.idx(i, 0)).collect(),
            Face::YHigh => (0..nx).map(|i| self.idx(i, ny - 1)).collect(),
        }
    }

    /// Neighbor of cell `c` along `axis` in direction `dir` (+1 or -1).
    pub fn neighbor(&self, c: usize, axis: usize, dir: i32) -> Neighbor {
        let (i, j) = self.ij(c);
        let (k, n) = if axis == 0 { (i, self.cells[0]) } else { (j, self.cells[1]) };
        if dir > 0 {
            if k + 1 < n {
                Neighbor::Cell(if axis == 0 { self.idx(i + 1, j) } else { self.idx(i, j + 1) })
            } else {
                Neighbor::Ghost(c, if axis == 0 { Face::XHigh } else { Face::YHigh })
            }
        } else if k > 0 {
            Neighbor::Cell(if axis == 0 { self.idx(i - 1, j) } else { self.idx(i, j - 1) })
        } else {
            Neighbor::Ghost(c, if axis == 0 { Face::XLow } else { Face::YLow })
        }
    }

    /// Cell-center coordinates (origin at the lower-left corner).
    pub fn center(&self, c: usize) -> [f64; 2] {
        let (i, j) = self.ij(c);
        if self.dim == 0 {
            return [0.0, 0.0];
        }
        let x = (i as f64 + 0.5) * self.spacing[0];
        let y = if self.dim >= 2 { (j as f64 + 0.5) * self.spacing[1] } else { 0.0 };
        [x, y]
    }

    /// Geometric center of the domain.
    pub fn domain_center(&self) -> [f64; 2] {
        match self.dim {
            0 => [0.0, 0.0],
            1 => [0.5 * self.extents[0], 0.0],
            _ => [0.5 * self.extents[0], 0.5 * self.extents[1]],
        }
    }

    /// Cell counts of the padded grid carrying the demagnetizing potential.
    pub fn padded_cells(&self) -> [usize; 2] {
        match self.dim {
            0 => [1, 1],
            1 => [self.pad_factor * self.cells[0], 1],
            _ => [self.pad_factor * self.cells[0], self.pad_factor * self.cells[1]],
        }
    }

    pub fn padded_len(&self) -> usize {
        let p = self.padded_cells();
        p[0] * p[1]
    }

    /// Offset of the physical domain inside the padded grid (centered).
    pub fn pad_offset(&self) -> [usize; 2] {
        let p = self.padded_cells();
        let o0 = (p[0] - self.cells[0]) / 2;
        let o1 = if self.dim >= 2 { (p[1] - self.cells[1]) / 2 } else { 0 };
        [o0, o1]
    }

    /// Index in the padded grid of physical cell `c`.
    pub fn padded_index(&self, c: usize) -> usize {
        let (i, j) = self.ij(c);
        let o = self.pad_offset();
        let p = self.padded_cells();
        (i + o[0]) + p[0] * (j + o[1])
    }
}

/// Per-face boundary tags. Every wall carries the same set of conditions:
/// impermeable slip wall with natural hyperstress conditions, zero normal
/// derivative of the inelastic rate and of magnetization, and a prescribed
/// normal heat flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceConditions {
    pub impermeable: bool,
    pub traction_free_tangential: bool,
    pub hyperstress_natural: bool,
    pub inelastic_rate_neumann: bool,
    pub magnetization_neumann: bool,
    pub heat_flux: bool,
}

impl FaceConditions {
    pub const WALL: FaceConditions = FaceConditions {
        impermeable: true,
        traction_free_tangential: true,
        hyperstress_natural: true,
        inelastic_rate_neumann: true,
        magnetization_neumann: true,
        heat_flux: true,
    };

    fn complete(&self) -> bool {
        self.impermeable
            && self.traction_free_tangential
            && self.hyperstress_natural
            && self.inelastic_rate_neumann
            && self.magnetization_neumann
            && self.heat_flux
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub faces: [FaceConditions; 4],
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec {
            faces: [FaceConditions::WALL; 4],
        }
    }
}

impl BoundarySpec {
    pub fn validate(&self) -> Result<()> {
        for (f, c) in Face::ALL.iter().zip(self.faces.iter()) {
            if !c.complete() {
                return Err(Error::config(format!(
                    "face {f:?} does not carry the complete wall condition set"
                )));
            }
        }
        Ok(())
    }
}

/// All unknowns at one time level. Temperature is derived from `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub v: Vec<Vec2>,
    pub ee: Vec<Mat2>,
    pub ep: Vec<Mat2>,
    pub m: Vec<Vec2>,
    /// Demagnetizing potential on the padded grid.
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    pub fn zeros(grid: &Grid) -> FieldState {
        let n = grid.len();
        FieldState {
            v: vec![Vec2::ZERO; n],
            ee: vec![Mat2::ZERO; n],
            ep: vec![Mat2::ZERO; n],
            m: vec![Vec2::ZERO; n],
            u: vec![0.0; grid.padded_len()],
            w: vec![0.0; n],
            t: 0.0,
        }
    }

    pub fn check_invariants(&self, grid: &Grid) -> Result<()> {
        let n = grid.len();
        if self.v.len() != n || self.ee.len() != n || self.ep.len() != n
            || self.m.len() != n || self.w.len() != n || self.u.len() != grid.padded_len()
        {
            return Err(Error::config("field lengths do not match the grid"));
        }
        for c in 0..n {
            if self.ee[c].asymmetry() > 1e-12 {
                return Err(Error::Thermodynamic(format!("Ee not symmetric at cell {c}")));
            }
            if self.ep[c].asymmetry() > 1e-12 || self.ep[c].trace().abs() > 1e-10 {
                return Err(Error::Thermodynamic(format!("Ep not deviatoric at cell {c}")));
            }
            if !(self.w[c] >= 0.0) {
                return Err(Error::Thermodynamic(format!(
                    "negative enthalpy {} at cell {c}",
                    self.w[c]
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn material_point_is_single_cell() {
        let g = make_grid(0, &[3.0, 4.0], &[], 2).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.cell_volume(), 1.0);
        assert_eq!(g.padded_cells(), [1, 1]);
    }

    #[test]
    fn spacing_from_extents() {
        let g = make_grid(2, &[1.0, 1.0], &[64, 64], 4).unwrap();
        assert_eq!(g.spacing, [1.0 / 64.0, 1.0 / 64.0]);
        assert_eq!(g.padded_cells(), [256, 256]);
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(make_grid(2, &[1.0, 0.0], &[4, 4], 2).is_err());
        assert!(make_grid(2, &[1.0, 1.0], &[4, 0], 2).is_err());
        assert!(make_grid(1, &[1.0], &[4], 1).is_err());
        assert!(make_grid(3, &[1.0; 3], &[4; 3], 2).is_err());
    }

    #[test]
    fn neighbors_and_ghosts() {
        let g = make_grid(2, &[1.0, 1.0], &[3, 2], 2).unwrap();
        assert_eq!(g.neighbor(0, 0, -1), Neighbor::Ghost(0, Face::XLow));
        assert_eq!(g.neighbor(0, 0, 1), Neighbor::Cell(1));
        assert_eq!(g.neighbor(0, 1, 1), Neighbor::Cell(3));
        assert_eq!(g.neighbor(5, 1, 1), Neighbor::Ghost(5, Face::YHigh));
        assert_eq!(g.boundary_cells(Face::XHigh), vec![2, 5]);
    }

    #[test]
    fn padded_index_is_centered() {
        let g = make_grid(2, &[1.0, 1.0], &[4, 4], 2).unwrap();
        assert_eq!(g.pad_offset(), [2, 2]);
        assert_eq!(g.padded_index(0), 2 + 8 * 2);
    }

    #[test]
    fn default_boundary_is_complete() {
        BoundarySpec::default().validate().unwrap();
        let mut b = BoundarySpec::default();
        b.faces[2].heat_flux = false;
        assert!(b.validate().is_err());
    }
}
