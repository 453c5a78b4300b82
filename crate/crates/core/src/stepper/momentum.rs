//! Momentum balance: residual operator and the linearized velocity solve.

use super::physics::{cauchy_stress, hyperstress, kelvin_force, StressInputs};
use super::rates::Rates;
use crate::constitutive::MaterialParams;
use crate::error::Result;
use crate::grid::stencil::{grad_tensor, grad_tensor_adjoint, grad_velocity, grad_velocity_adjoint, laplacian_diagonal};
use crate::grid::{FieldState, Grid, LoadSample};
use crate::kinematics::dev;
use crate::linalg::conjugate_gradient;
use crate::tensor::{Grad3, Mat2, Vec2};

pub struct MomentumInputs<'a> {
    pub grid: &'a Grid,
    pub params: &'a MaterialParams,
    pub prev: &'a FieldState,
    pub new: &'a FieldState,
    pub rates: &'a Rates,
    pub theta: &'a [f64],
    pub loads: &'a LoadSample,
    pub h_dem: &'a [Vec2],
    pub h_eff: &'a [Vec2],
    pub dt: f64,
    pub eps: f64,
}

/// Skew-symmetric convection `1/2 [(grad v) v - G^T (v (x) v)]`, equal to
/// `(v . grad) v + 1/2 (div v) v` and exactly energy neutral.
pub fn convection(grid: &Grid, v: &[Vec2]) -> Vec<Vec2> {
    let gv = grad_velocity(grid, v);
    let vv: Vec<Mat2> = v.iter().map(|x| x.outer(*x)).collect();
    let adj = grad_velocity_adjoint(grid, &vv);
    (0..grid.len()).map(|c| (gv[c].apply(v[c]) - adj[c]) * 0.5).collect()
}

/// `(G_t sym G)^T` applied to a hyperstress field.
fn hyper_divergence(grid: &Grid, h: &[Grad3]) -> Vec<Vec2> {
    let t: Vec<Mat2> = grad_tensor_adjoint(grid, h).into_iter().map(|x| x.sym()).collect();
    grad_velocity_adjoint(grid, &t)
}

/// Momentum residual per unit volume. It is zero for a material point,
/// whose velocity is not an unknown.
pub fn momentum_residual(inp: &MomentumInputs) -> Vec<Vec2> {
    let grid = inp.grid;
    let p = inp.params;
    let n = grid.len();
    if grid.dim == 0 {
        return vec![Vec2::ZERO; n];
    }
    let stress = cauchy_stress(
        grid,
        p,
        &StressInputs {
            ee: &inp.new.ee,
            m: &inp.new.m,
            theta: inp.theta,
            strain_rate: &inp.rates.strain_rate,
            h_ext: &inp.loads.h_ext,
            h_dem: inp.h_dem,
            h_eff: inp.h_eff,
            eps: inp.eps,
        },
    );
    let div_s = grad_velocity_adjoint(grid, &stress);
    let hyp = hyper_divergence(grid, &hyperstress(p, &inp.rates.grad_e));
    let conv = convection(grid, &inp.new.v);
    let kelvin = kelvin_force(grid, p, &inp.new.m, inp.loads.grad_h_ext, inp.h_dem);
    (0..n)
        .map(|c| {
            let b = p.buoyancy.map_or(0.0, |b| b.b(inp.theta[c]));
            (inp.new.v[c] - inp.prev.v[c]) * (p.rho / inp.dt) + conv[c] * p.rho + div_s[c] + hyp[c]
                - kelvin[c]
                - inp.loads.g * (p.rho * (1.0 - b))
        })
        .collect()
}

fn flatten(v: &[Vec2]) -> Vec<f64> {
    v.iter().flat_map(|x| [x[0], x[1]]).collect()
}

fn unflatten(x: &[f64]) -> Vec<Vec2> {
    x.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect()
}

/// Solve the symmetric positive definite linearization
/// `rho/dt dv + G^T (C_eff + nu1) sym G dv + (G_t sym G)^T (c (G_t sym G dv)) = -res`.
///
/// `C_eff` is the elastic response of the strain block over one step: the
/// bulk part `K dt` and the shear part `2G dt / (1 + beta dt)` with the
/// Maxwell relaxation rate `beta = 2G / (M + varkappa l)`. The hyperstress
/// enters through its Newton tangent.
pub fn velocity_correction(
    grid: &Grid,
    params: &MaterialParams,
    theta_prev: &[f64],
    grad_e: &[Grad3],
    res: &[Vec2],
    dt: f64,
) -> Result<Vec<Vec2>> {
    let n = grid.len();
    let mut k_eff = vec![0.0; n];
    let mut g_eff = vec![0.0; n];
    for c in 0..n {
        let beta = 2.0 * params.g_e
            / (params.maxwell_viscosity(theta_prev[c]) + params.varkappa * laplacian_diagonal(grid, c));
        k_eff[c] = params.k_e * dt;
        g_eff[c] = params.g_e * dt / (1.0 + beta * dt);
    }
    let hyper_c: Vec<f64> = grad_e
        .iter()
        .map(|g| {
            let n2 = g.norm_sq();
            if params.nu2 > 0.0 && n2 > 0.0 { params.nu2 * n2.powf(0.5 * (params.p - 2.0)) } else { 0.0 }
        })
        .collect();
    // Newton tangent of `c(g) g`: `c (dg + (p - 2) (g : dg) g / |g|^2)`.
    let hyper_tangent = |c: usize, dg: &Grad3| -> Grad3 {
        let g = &grad_e[c];
        let n2 = g.norm_sq();
        if hyper_c[c] == 0.0 {
            return Grad3::ZERO;
        }
        let k = (params.p - 2.0) * g.ddd(dg) / n2;
        let mut out = dg.scale(hyper_c[c]);
        for a in 0..2 {
            out.0[a] += g.0[a] * (k * hyper_c[c]);
        }
        out
    };
    let use_hyper = hyper_c.iter().any(|c| *c > 0.0);
    let apply = |x: &[f64], y: &mut [f64]| {
        let dv = unflatten(x);
        let e: Vec<Mat2> = grad_velocity(grid, &dv).into_iter().map(|g| g.sym()).collect();
        let s: Vec<Mat2> = (0..n)
            .map(|c| {
                Mat2::scaled_identity(k_eff[c] * e[c].trace())
                    + dev(e[c]) * (2.0 * g_eff[c])
                    + e[c] * params.nu1
            })
            .collect();
        let mut out = grad_velocity_adjoint(grid, &s);
        if use_hyper {
            let ge = grad_tensor(grid, &e);
            let h: Vec<Grad3> = ge.iter().enumerate().map(|(c, dg)| hyper_tangent(c, dg)).collect();
            for (o, x) in out.iter_mut().zip(hyper_divergence(grid, &h)) {
                *o += x;
            }
        }
        for c in 0..n {
            let r = dv[c] * (params.rho / dt) + out[c];
            y[2 * c] = r[0];
            y[2 * c + 1] = r[1];
        }
    };
    let geo: f64 = (0..grid.dim.min(2)).map(|a| 0.5 / (grid.spacing[a] * grid.spacing[a])).sum();
    let diag: Vec<f64> = (0..n)
        .flat_map(|c| {
            let d = params.rho / dt + (k_eff[c] + 2.0 * g_eff[c] + params.nu1) * geo;
            [d, d]
        })
        .collect();
    let b: Vec<f64> = flatten(res).into_iter().map(|x| -x).collect();
    let mut x = vec![0.0; 2 * n];
    conjugate_gradient(apply, &diag, &b, &mut x, 1e-12, 20 * (2 * n).max(50))?;
    Ok(unflatten(&x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn convection_is_energy_neutral() {
        let g = make_grid(2, &[1.0, 1.0], &[9, 7], 2).unwrap();
        let v: Vec<Vec2> = (0..g.len())
            .map(|c| {
                let [x, y] = g.center(c);
                Vec2::new((3.0 * x).sin() + y * y, (2.0 * y).cos() * x - 0.3)
            })
            .collect();
        let conv = convection(&g, &v);
        let p: f64 = (0..g.len()).map(|c| conv[c].dot(v[c])).sum();
        let scale: f64 = conv.iter().map(|x| x.norm()).sum();
        assert!(p.abs() < 1e-12 * scale, "{p}");
    }

    #[test]
    fn buoyancy_reduces_effective_gravity_in_hot_region() {
        let g = make_grid(1, &[1.0], &[6], 2).unwrap();
        let mut p = MaterialParams::reference();
        p.buoyancy = Some(crate::constitutive::Buoyancy { beta: 0.5, theta_ref: 0.5 });
        let n = g.len();
        let mut s = FieldState::zeros(&g);
        s.w = vec![p.thermal.gamma(0.5); n];
        let theta: Vec<f64> = (0..n).map(|c| if c == 3 { 1.5 } else { 0.5 }).collect();
        let rates = Rates::compute(&g, &s, &s, vec![Mat2::ZERO; n], 0.1);
        let mut loads = LoadSample::zero(&g);
        loads.g = Vec2::new(0.0, -1.0);
        let zero = vec![Vec2::ZERO; n];
        let res = momentum_residual(&MomentumInputs {
            grid: &g,
            params: &p,
            prev: &s,
            new: &s,
            rates: &rates,
            theta: &theta,
            loads: &loads,
            h_dem: &zero,
            h_eff: &zero,
            dt: 0.1,
            eps: 0.0,
        });
        // The transverse component only sees inertia and gravity.
        assert!((res[0][1] - 1.0).abs() < 1e-12);
        assert!((res[3][1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn velocity_correction_inverts_operator_on_pure_inertia() {
        let g = make_grid(1, &[1.0], &[8], 2).unwrap();
        let mut p = MaterialParams::reference();
        p.k_e = 0.0;
        p.g_e = 0.0;
        p.nu1 = 0.0;
        p.nu2 = 0.0;
        p.rho = 2.0;
        let res = vec![Vec2::new(1.0, -2.0); g.len()];
        let dv = velocity_correction(&g, &p, &vec![1.0; g.len()], &vec![Grad3::ZERO; g.len()], &res, 0.5).unwrap();
        for x in dv {
            assert!((x - Vec2::new(-0.25, 0.5)).norm() < 1e-12);
        }
    }
}
