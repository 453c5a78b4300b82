//! Strain rate, spin, and the discrete Zaremba-Jaumann transport operators.

use crate::error::{Error, Result};
use crate::grid::stencil::{flux_divergence, upwind_advection};
use crate::grid::Grid;
use crate::tensor::{Mat2, Vec2};

pub fn strain_rate(grad_v: Mat2) -> Mat2 {
    grad_v.sym()
}

pub fn spin(grad_v: Mat2) -> Mat2 {
    grad_v.skw()
}

/// Spherical part `(tr T / 2) I` of a 2x2 tensor.
pub fn sph(t: Mat2) -> Mat2 {
    Mat2::scaled_identity(0.5 * t.trace())
}

pub fn dev(t: Mat2) -> Mat2 {
    t - sph(t)
}

/// Corotational part `-W m` of the vector rate at one cell.
pub fn corotation_vector(w: Mat2, m: Vec2) -> Vec2 {
    -w.apply(m)
}

/// Corotational part `-W A + A W` of the tensor rate at one cell.
pub fn corotation_tensor(w: Mat2, a: Mat2) -> Mat2 {
    a.matmul(w) - w.matmul(a)
}

/// `(v . grad) m - W m` with upwind advection.
pub fn bzj_vector(grid: &Grid, v: &[Vec2], grad_v: &[Mat2], m: &[Vec2]) -> Vec<Vec2> {
    let adv = upwind_advection(grid, v, m);
    adv.into_iter()
        .zip(grad_v.iter().zip(m))
        .map(|(a, (g, mm))| a + corotation_vector(spin(*g), *mm))
        .collect()
}

/// `(v . grad) A - W A + A W` with upwind advection.
pub fn bzj_tensor(grid: &Grid, v: &[Vec2], grad_v: &[Mat2], a: &[Mat2]) -> Vec<Mat2> {
    let adv = upwind_advection(grid, v, a);
    adv.into_iter()
        .zip(grad_v.iter().zip(a))
        .map(|(x, (g, aa))| x + corotation_tensor(spin(*g), *aa))
        .collect()
}

/// Largest `|v_a| dt / h_a` over the grid.
pub fn cfl_number(grid: &Grid, v: &[Vec2], dt: f64) -> f64 {
    let mut c = 0.0_f64;
    for a in 0..grid.dim.min(2) {
        for x in v {
            c = c.max(x[a].abs() * dt / grid.spacing[a]);
        }
    }
    c
}

/// Conservative transport increment `-dt div(v w)`.
///
/// Fails when the advective CFL number exceeds one; the caller is expected
/// to retry with a smaller step.
pub fn advect_scalar(grid: &Grid, w: &[f64], v: &[Vec2], dt: f64) -> Result<Vec<f64>> {
    let cfl = cfl_number(grid, v, dt);
    if cfl > 1.0 {
        return Err(Error::numerical("advective CFL bound exceeded", cfl));
    }
    Ok(flux_divergence(grid, v, w).into_iter().map(|d| -dt * d).collect())
}

/// Affine velocity `v(x) = L (x - x0)` with a uniform gradient `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineVelocity {
    pub gradient: Mat2,
    pub center: [f64; 2],
}

impl AffineVelocity {
    pub fn rigid_rotation(omega: f64, center: [f64; 2]) -> Self {
        AffineVelocity { gradient: Mat2::rotation_rate(omega), center }
    }

    pub fn at(&self, x: [f64; 2]) -> Vec2 {
        self.gradient.apply(Vec2::new(x[0] - self.center[0], x[1] - self.center[1]))
    }

    pub fn sample(&self, grid: &Grid) -> Vec<Vec2> {
        (0..grid.len()).map(|c| self.at(grid.center(c))).collect()
    }
}
