//! Discrete rates between two time levels.
//!
//! Both the residual evaluation and the energy audit need the same discrete
//! objective rates, so they are computed here from a pair of states.

use crate::grid::stencil::{divergence, grad_tensor, grad_velocity, upwind_advection};
use crate::grid::{FieldState, Grid};
use crate::kinematics::{corotation_tensor, corotation_vector, spin, strain_rate};
use crate::tensor::{Grad3, Mat2, Vec2};

/// How the velocity of a step is determined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    /// Velocity from the momentum equation. A material point stays at rest.
    Dynamic,
    /// Prescribed affine velocity `v = L (x - x0)` about the domain center.
    Affine(Mat2),
    /// Rigid rotation with rate `omega` inside radius `core` about the domain
    /// center, tapered smoothly to rest at radius `outer`.
    Vortex { omega: f64, core: f64, outer: f64 },
    /// Material point under a prescribed deviatoric Cauchy stress; the
    /// (spin-free) strain rate is part of the solution.
    Stress(Mat2),
}

impl Motion {
    pub fn is_dynamic(&self) -> bool {
        matches!(self, Motion::Dynamic)
    }
}

/// Velocity gradient per cell implied by `motion` for the new state.
pub fn velocity_gradient(grid: &Grid, prev: &FieldState, new: &FieldState, motion: &Motion, dt: f64) -> Vec<Mat2> {
    match motion {
        Motion::Dynamic | Motion::Vortex { .. } => grad_velocity(grid, &new.v),
        Motion::Affine(l) => vec![*l; grid.len()],
        Motion::Stress(_) => (0..grid.len())
            .map(|c| ((new.ee[c] + new.ep[c]) - (prev.ee[c] + prev.ep[c])).sym() * (1.0 / dt))
            .collect(),
    }
}

/// Velocity field of an affine motion sampled at the cell centers.
pub fn affine_velocity(grid: &Grid, l: Mat2) -> Vec<Vec2> {
    let x0 = grid.domain_center();
    (0..grid.len())
        .map(|c| {
            let x = grid.center(c);
            l.apply(Vec2::new(x[0] - x0[0], x[1] - x0[1]))
        })
        .collect()
}

/// Velocity of a `Motion::Vortex` at the cell centers.
pub fn vortex_velocity(grid: &Grid, omega: f64, core: f64, outer: f64) -> Vec<Vec2> {
    let x0 = grid.domain_center();
    (0..grid.len())
        .map(|c| {
            let x = grid.center(c);
            let (dx, dy) = (x[0] - x0[0], x[1] - x0[1]);
            let s = (((dx * dx + dy * dy).sqrt() - core) / (outer - core)).clamp(0.0, 1.0);
            let chi = 1.0 - s * s * (3.0 - 2.0 * s);
            Vec2::new(-dy, dx) * (omega * chi)
        })
        .collect()
}

/// Cell velocities fixed by `motion`, if any.
pub fn prescribed_velocity(grid: &Grid, motion: &Motion) -> Option<Vec<Vec2>> {
    match *motion {
        Motion::Affine(l) => Some(affine_velocity(grid, l)),
        Motion::Vortex { omega, core, outer } => Some(vortex_velocity(grid, omega, core, outer)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub grad_v: Vec<Mat2>,
    pub strain_rate: Vec<Mat2>,
    pub spin: Vec<Mat2>,
    pub div_v: Vec<f64>,
    /// Gradient of the strain rate (central differences).
    pub grad_e: Vec<Grad3>,
    /// Objective rate of the elastic strain.
    pub ee_rate: Vec<Mat2>,
    /// Objective rate `R` of the inelastic strain.
    pub r: Vec<Mat2>,
    /// Objective rate of magnetization.
    pub m_zj: Vec<Vec2>,
    /// Convective rate `(m - m_prev)/dt + (v . grad) m`, without rotation.
    pub m_conv: Vec<Vec2>,
}

impl Rates {
    pub fn compute(grid: &Grid, prev: &FieldState, new: &FieldState, grad_v: Vec<Mat2>, dt: f64) -> Rates {
        let n = grid.len();
        let inv = 1.0 / dt;
        let e: Vec<Mat2> = grad_v.iter().map(|g| strain_rate(*g)).collect();
        let w: Vec<Mat2> = grad_v.iter().map(|g| spin(*g)).collect();
        let adv_ee = upwind_advection(grid, &new.v, &new.ee);
        let adv_ep = upwind_advection(grid, &new.v, &new.ep);
        let adv_m = upwind_advection(grid, &new.v, &new.m);
        let mut ee_rate = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        let mut m_zj = Vec::with_capacity(n);
        let mut m_conv = Vec::with_capacity(n);
        for c in 0..n {
            ee_rate.push((new.ee[c] - prev.ee[c]) * inv + adv_ee[c] + corotation_tensor(w[c], new.ee[c]));
            r.push((new.ep[c] - prev.ep[c]) * inv + adv_ep[c] + corotation_tensor(w[c], new.ep[c]));
            let conv = (new.m[c] - prev.m[c]) * inv + adv_m[c];
            m_conv.push(conv);
            m_zj.push(conv + corotation_vector(w[c], new.m[c]));
        }
        Rates {
            div_v: divergence(&grad_v),
            grad_e: grad_tensor(grid, &e),
            grad_v,
            strain_rate: e,
            spin: w,
            ee_rate,
            r,
            m_zj,
            m_conv,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn stress_motion_recovers_total_strain_rate() {
        let g = Grid::material_point();
        let mut a = FieldState::zeros(&g);
        a.ee[0] = Mat2::new(0.1, 0.02, 0.02, -0.1);
        let mut b = a.clone();
        b.ee[0] = Mat2::new(0.12, 0.03, 0.03, -0.12);
        b.ep[0] = Mat2::new(0.01, 0.0, 0.0, -0.01);
        let l = velocity_gradient(&g, &a, &b, &Motion::Stress(Mat2::ZERO), 0.1);
        assert!((l[0] - Mat2::new(0.3, 0.1, 0.1, -0.3)).max_abs() < 1e-14);
        let rates = Rates::compute(&g, &a, &b, l, 0.1);
        assert!((rates.ee_rate[0] + rates.r[0] - rates.strain_rate[0]).max_abs() < 1e-14);
    }

    #[test]
    fn rigid_corotation_has_zero_objective_rate_for_uniform_fields() {
        let g = make_grid(2, &[1.0, 1.0], &[6, 6], 2).unwrap();
        let om = 0.7;
        let l = Mat2::rotation_rate(om);
        let dt = 0.01;
        let mut a = FieldState::zeros(&g);
        a.m = vec![Vec2::new(1.0, 0.0); g.len()];
        let mut b = a.clone();
        b.v = affine_velocity(&g, l);
        // One implicit corotation step m = (I - dt W)^{-1} m_prev.
        let q = (Mat2::IDENTITY - l * dt).inverse().unwrap();
        b.m = a.m.iter().map(|m| q.apply(*m)).collect();
        let rates = Rates::compute(&g, &a, &b, vec![l; g.len()], dt);
        assert!(rates.m_zj.iter().all(|r| r.norm() < 1e-12));
        assert!(rates.div_v.iter().all(|d| d.abs() < 1e-15));
    }
}
