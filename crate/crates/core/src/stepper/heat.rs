//! Enthalpy block: implicit transport, conduction and heat sources, solved by
//! Newton iteration in the temperature.

use super::physics::boundary_heat_terms;
use crate::constitutive::MaterialParams;
use crate::error::{Error, Result};
use crate::grid::stencil::face_velocities;
use crate::grid::{Grid, LoadSample, Neighbor};
use crate::linalg::{bicgstab, Csr};
use crate::tensor::Vec2;

pub struct HeatInputs<'a> {
    pub grid: &'a Grid,
    pub params: &'a MaterialParams,
    pub dt: f64,
    pub eps: f64,
    pub w_prev: &'a [f64],
    pub theta_prev: &'a [f64],
    /// Initial guess.
    pub theta: &'a [f64],
    pub v: &'a [Vec2],
    pub m: &'a [Vec2],
    pub m_conv: &'a [Vec2],
    pub div_v: &'a [f64],
    /// Dissipation rate density `xi`.
    pub xi: &'a [f64],
    pub loads: &'a LoadSample,
    pub tol_abs: f64,
}

/// Assemble the residual `F(theta)` (per unit volume) and, if asked for, its Jacobian.
fn assemble(inp: &HeatInputs, theta: &[f64], jacobian: bool) -> Result<(Vec<f64>, Vec<Vec<(usize, f64)>>)> {
    let grid = inp.grid;
    let p = inp.params;
    let n = grid.len();
    let inv = 1.0 / inp.dt;
    let (fixed, coef, target) = boundary_heat_terms(grid, &inp.loads.j_ext, inp.loads.thermostat);
    let mut f = vec![0.0; n];
    let width = if jacobian { 1 + 4 * grid.dim.min(2) } else { 0 };
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|_| Vec::with_capacity(width)).collect();
    let push = |rows: &mut Vec<Vec<(usize, f64)>>, r: usize, c: usize, v: f64| {
        if jacobian {
            rows[r].push((c, v));
        }
    };
    for c in 0..n {
        let th = theta[c];
        let alpha = p.omega_eps_hat_prime(inp.m[c], inp.eps).dot(inp.m_conv[c])
            + p.omega_eps_hat(inp.m[c], inp.eps) * inp.div_v[c];
        let dv = inp.div_v[c];
        let (phi, dphi) = if dv != 0.0 { (p.thermal.phi(th), p.thermal.dphi(th)?) } else { (0.0, 0.0) };
        f[c] = (p.thermal.gamma(th) - inp.w_prev[c]) * inv - (1.0 - inp.eps) * inp.xi[c] - th * alpha + phi * dv
            - fixed[c]
            - coef[c] * (target - th);
        push(&mut rows, c, c, p.thermal.capacity(th) * inv - alpha + dphi * dv + coef[c]);
    }
    for (lo, hi, a, un) in face_velocities(grid, inp.v) {
        let up = if un > 0.0 { lo } else { hi };
        let h = grid.spacing[a];
        let flux = un * p.thermal.gamma(theta[up]) / h;
        let d = un * p.thermal.capacity(theta[up]) / h;
        f[lo] += flux;
        f[hi] -= flux;
        push(&mut rows, lo, up, d);
        push(&mut rows, hi, up, -d);
    }
    for a in 0..grid.dim.min(2) {
        let h2 = 1.0 / (grid.spacing[a] * grid.spacing[a]);
        for c in 0..n {
            if let Neighbor::Cell(k) = grid.neighbor(c, a, 1) {
                let kf = 0.5 * (p.conductivity(inp.theta_prev[c]) + p.conductivity(inp.theta_prev[k])) * h2;
                let q = kf * (theta[k] - theta[c]);
                f[c] -= q;
                f[k] += q;
                push(&mut rows, c, c, kf);
                push(&mut rows, c, k, -kf);
                push(&mut rows, k, k, kf);
                push(&mut rows, k, c, -kf);
            }
        }
    }
    Ok((f, rows))
}

/// Solve for the new temperature; returns `(theta, w)`.
pub fn solve_heat(inp: &HeatInputs) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = inp.grid.len();
    let p = inp.params;
    let mut theta = inp.theta.to_vec();
    let mut converged = false;
    let mut change = f64::NAN;
    for _ in 0..50 {
        let (f, rows) = assemble(inp, &theta, true)?;
        let mut delta = vec![0.0; n];
        if n == 1 {
            let j: f64 = rows[0].iter().map(|e| e.1).sum();
            if !(j > 0.0) {
                return Err(Error::numerical("enthalpy Jacobian is not positive", j));
            }
            delta[0] = -f[0] / j;
        } else {
            let a = Csr::from_rows(rows);
            let b: Vec<f64> = f.iter().map(|x| -x).collect();
            bicgstab(&a, &b, &mut delta, 1e-13, 20 * n.max(50))?;
        }
        change = 0.0_f64;
        for c in 0..n {
            let mut next = theta[c] + delta[c];
            // Damp steps that would cross zero; the canonical law is singular there.
            if next <= 0.0 {
                next = 0.5 * theta[c];
            }
            change = change.max((next - theta[c]).abs() / theta[c].abs().max(1e-300));
            theta[c] = next;
        }
        if change <= 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical("enthalpy Newton iteration did not converge (relative change)", change));
    }
    let w: Vec<f64> = theta.iter().map(|t| p.thermal.gamma(*t)).collect();
    for (c, x) in w.iter().enumerate() {
        if *x < -inp.tol_abs || !(theta[c] >= 0.0) {
            return Err(Error::Thermodynamic(format!("negative enthalpy {x} at cell {c}")));
        }
    }
    Ok((theta, w))
}

/// Residual of the enthalpy equation per unit volume.
pub fn heat_residual(inp: &HeatInputs, theta: &[f64]) -> Result<Vec<f64>> {
    Ok(assemble(inp, theta, false)?.0)
}
