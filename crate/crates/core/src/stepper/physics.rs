//! Pointwise constitutive evaluations shared by the blocks, the residuals
//! and the audit.

use crate::constitutive::MaterialParams;
use crate::error::{Error, Result};
use crate::grid::stencil::{grad_neumann, laplacian};
use crate::grid::{Face, Grid};
use crate::tensor::{Grad3, Mat2, Vec2};

/// Temperature per cell from the enthalpy.
pub fn temperature(params: &MaterialParams, w: &[f64]) -> Vec<f64> {
    w.iter().map(|w| params.thermal.gamma_inv(w.max(0.0))).collect()
}

/// `h_eff = kappa lap m + h_aniso(m, theta) + h_ext + h_dem`.
pub fn effective_field(
    grid: &Grid,
    params: &MaterialParams,
    m: &[Vec2],
    theta: &[f64],
    eps: f64,
    h_ext: &[Vec2],
    h_dem: &[Vec2],
) -> Vec<Vec2> {
    let lap = laplacian(grid, m);
    (0..grid.len())
        .map(|c| lap[c] * params.kappa + params.h_anisotropy(m[c], theta[c], eps) + h_ext[c] + h_dem[c])
        .collect()
}

/// Free energy density `psi` used as the isotropic part of the Cauchy stress.
#[allow(clippy::too_many_arguments)]
pub fn free_energy_density(
    params: &MaterialParams,
    ee: Mat2,
    m: Vec2,
    grad_m: Mat2,
    theta: f64,
    eps: f64,
    h_total: Vec2,
) -> f64 {
    params.phi_mech(ee, m) + params.omega_eps(m, theta, eps) + 0.5 * params.kappa * params.mu0 * grad_m.norm_sq()
        - params.mu0 * h_total.dot(m)
        - params.thermal.phi(theta)
}

/// Everything the stress evaluation needs at one time level.
pub struct StressInputs<'a> {
    pub ee: &'a [Mat2],
    pub m: &'a [Vec2],
    pub theta: &'a [f64],
    pub strain_rate: &'a [Mat2],
    pub h_ext: &'a [Vec2],
    pub h_dem: &'a [Vec2],
    pub h_eff: &'a [Vec2],
    pub eps: f64,
}

/// Cauchy stress without the hyperstress:
/// `S_E + nu1 E + psi I - kappa mu0 grad m^T grad m - mu0 skw(h_eff (x) m)`.
pub fn cauchy_stress(grid: &Grid, params: &MaterialParams, s: &StressInputs) -> Vec<Mat2> {
    let gm = grad_neumann(grid, s.m);
    (0..grid.len())
        .map(|c| {
            let psi = free_energy_density(params, s.ee[c], s.m[c], gm[c], s.theta[c], s.eps, s.h_ext[c] + s.h_dem[c]);
            params.stress_elastic(s.ee[c])
                + s.strain_rate[c] * params.nu1
                + Mat2::scaled_identity(psi)
                - gm[c].transpose().matmul(gm[c]) * (params.kappa * params.mu0)
                - s.h_eff[c].outer(s.m[c]).skw() * params.mu0
        })
        .collect()
}

/// Hyperstress `nu2 |grad E|^{p-2} grad E`.
pub fn hyperstress(params: &MaterialParams, grad_e: &[Grad3]) -> Vec<Grad3> {
    grad_e
        .iter()
        .map(|g| {
            let n2 = g.norm_sq();
            if params.nu2 == 0.0 || n2 == 0.0 {
                Grad3::ZERO
            } else {
                g.scale(params.nu2 * n2.powf(0.5 * (params.p - 2.0)))
            }
        })
        .collect()
}

/// Kelvin force density `mu0 (grad h)^T m` for `h = h_ext + h_dem`.
pub fn kelvin_force(grid: &Grid, params: &MaterialParams, m: &[Vec2], grad_h_ext: Mat2, h_dem: &[Vec2]) -> Vec<Vec2> {
    let gd = grad_neumann(grid, h_dem);
    (0..grid.len())
        .map(|c| (grad_h_ext + gd[c]).transpose().apply(m[c]) * params.mu0)
        .collect()
}

/// Boundary heat input per unit volume at each cell, split into the part
/// independent of temperature and the thermostat coefficient multiplying
/// `(target - theta)`.
pub fn boundary_heat_terms(grid: &Grid, j_ext: &[f64; 4], thermostat: Option<(f64, f64)>) -> (Vec<f64>, Vec<f64>, f64) {
    let vol = grid.cell_volume();
    let mut fixed = vec![0.0; grid.len()];
    let mut coef = vec![0.0; grid.len()];
    let (target, k) = thermostat.unwrap_or((0.0, 0.0));
    for face in Face::ALL {
        let a = grid.face_measure(face) / vol;
        if a == 0.0 {
            continue;
        }
        for c in grid.boundary_cells(face) {
            fixed[c] += a * j_ext[face.index()];
            coef[c] += a * k;
        }
    }
    (fixed, coef, target)
}

/// Boundary heating power `int_Gamma j` and entropy flux `int_Gamma j / theta`.
pub fn boundary_heat(grid: &Grid, j_ext: &[f64; 4], thermostat: Option<(f64, f64)>, theta: &[f64]) -> Result<(f64, f64)> {
    let (fixed, coef, target) = boundary_heat_terms(grid, j_ext, thermostat);
    let vol = grid.cell_volume();
    let mut power = 0.0;
    let mut entropy = 0.0;
    for c in 0..grid.len() {
        let q = fixed[c] + coef[c] * (target - theta[c]);
        if q == 0.0 {
            continue;
        }
        if !(theta[c] > 0.0) {
            return Err(Error::Thermodynamic(format!("boundary heat at non-positive temperature, cell {c}")));
        }
        power += q * vol;
        entropy += q / theta[c] * vol;
    }
    Ok((power, entropy))
}
