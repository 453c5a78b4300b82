//! Magnetization block: the flow-rule inclusion `h_eff in d zeta(r)`.
//!
//! With neighbor couplings and the corotation `W m` frozen at the current
//! iterate, the inclusion at one cell is the optimality condition of
//! `G(m) = zeta(a m - b) / a + Psi(m) / mu0`, where `Psi` collects the local
//! energy. The cell problem is solved by a sticking test followed by a damped
//! Newton method with a Levenberg shift; the frozen rotation is then updated
//! by fixed-point iteration.

use crate::constitutive::{Dissipation, MaterialParams};
use crate::grid::stencil::{laplacian_diagonal, upwind_weights};
use crate::grid::{Grid, Neighbor};
use crate::kinematics::spin;
use crate::tensor::{Mat2, Vec2};

/// Local problem data at one cell.
#[derive(Debug, Clone, Copy)]
pub struct CellProblem<'a> {
    pub params: &'a MaterialParams,
    pub diss: Dissipation,
    pub theta: f64,
    pub eps: f64,
    /// `1/dt` plus the implicit upwind weight.
    pub a: f64,
    /// Field contributions independent of `m`: external, demagnetizing and
    /// the neighbor part of exchange.
    pub h_fixed: Vec2,
    /// Implicit diagonal of the exchange term, `kappa * l`.
    pub kl: f64,
}

impl CellProblem<'_> {
    pub fn h_eff(&self, m: Vec2) -> Vec2 {
        self.h_fixed - m * self.kl + self.params.h_anisotropy(m, self.theta, self.eps)
    }

    fn psi(&self, m: Vec2) -> f64 {
        let p = self.params;
        let m2 = m.norm_sq();
        (0.5 * p.b0 * m2 * m2 + p.omega_eps(m, self.theta, self.eps)) / p.mu0 + 0.5 * self.kl * m2
            - self.h_fixed.dot(m)
    }

    fn objective(&self, m: Vec2, b: Vec2) -> f64 {
        self.diss.value((m * self.a - b).norm()) / self.a + self.psi(m)
    }

    /// Hessian of `Psi / mu0`.
    fn psi_hessian(&self, m: Vec2) -> Mat2 {
        let p = self.params;
        let m2 = m.norm_sq();
        let mm = m.outer(m);
        let q = 1.0 + self.eps * m2;
        let k = 2.0 * p.a0 * (self.theta - p.theta_c);
        let quartic = (Mat2::scaled_identity(m2) + mm * 2.0) * (2.0 * p.b0);
        let omega = Mat2::scaled_identity(k / (q * q)) - mm * (4.0 * self.eps * k / (q * q * q));
        (quartic + omega) * (1.0 / p.mu0) + Mat2::scaled_identity(self.kl)
    }

    /// Gradient and Hessian of the objective away from the cone tip.
    fn derivatives(&self, m: Vec2, b: Vec2) -> (Vec2, Mat2) {
        let r = m * self.a - b;
        let s = r.norm();
        let mut g = -self.h_eff(m);
        let mut h = self.psi_hessian(m);
        if s > 0.0 {
            let e = r * (1.0 / s);
            let ee = e.outer(e);
            g += e * self.diss.slope(s);
            h += (ee * self.diss.curvature(s) + (Mat2::IDENTITY - ee) * (self.diss.slope(s) / s)) * self.a;
        }
        (g, h)
    }

    fn scale(&self, m: Vec2) -> f64 {
        1.0 + self.diss.h_c + self.h_fixed.norm() + self.params.h_anisotropy(m, self.theta, self.eps).norm()
    }

    /// Solve the cell inclusion for `r = a m - b`, starting from `guess`.
    pub fn solve(&self, b: Vec2, guess: Vec2) -> Vec2 {
        let m_stick = b * (1.0 / self.a);
        let h0 = self.h_eff(m_stick);
        if h0.norm() <= self.diss.h_c {
            return m_stick;
        }
        let mut m = if (guess * self.a - b).norm() > 1e-12 * (1.0 + b.norm()) {
            guess
        } else {
            m_stick + h0 * (1e-6 * (1.0 + m_stick.norm()) / h0.norm())
        };
        let mut f = self.objective(m, b);
        for _ in 0..200 {
            let (g, h) = self.derivatives(m, b);
            let gn = g.norm();
            if gn <= 1e-13 * self.scale(m) {
                break;
            }
            // Levenberg shift to a positive definite matrix.
            let tr = h.trace();
            let det = h.det();
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            let lmin = 0.5 * tr - disc;
            let floor = 1e-12 * (1.0 + tr.abs());
            let shift = if lmin < floor { floor - lmin } else { 0.0 };
            let hs = h + Mat2::scaled_identity(shift);
            let step = match hs.inverse() {
                Some(inv) => -inv.apply(g),
                None => -g,
            };
            let slope = g.dot(step);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial = m + step * alpha;
                let ft = self.objective(trial, b);
                if ft <= f + 1e-4 * alpha * slope {
                    m = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                // Close to the solution the objective cannot resolve the
                // decrease; accept a full step that reduces the gradient instead.
                if alpha == 1.0 && ((ft - f).abs() <= 1e-14 * f.abs().max(1.0) || gn <= 1e-6 * self.scale(m)) {
                    let (gt, _) = self.derivatives(trial, b);
                    if gt.norm() < gn {
                        m = trial;
                        f = ft;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        m
    }
}

pub struct MagnetizationInputs<'a> {
    pub grid: &'a Grid,
    pub params: &'a MaterialParams,
    pub dt: f64,
    pub eps: f64,
    pub v: &'a [Vec2],
    pub grad_v: &'a [Mat2],
    /// Temperature of the previous level, which sets the dissipation potential.
    pub theta_prev: &'a [f64],
    /// Current temperature iterate.
    pub theta: &'a [f64],
    pub m_prev: &'a [Vec2],
    pub m: &'a [Vec2],
    pub h_ext: &'a [Vec2],
    pub h_dem: &'a [Vec2],
}

/// One sweep over the cells; neighbor values come from the current iterate.
pub fn magnetization_sweep(inp: &MagnetizationInputs) -> Vec<Vec2> {
    let grid = inp.grid;
    let p = inp.params;
    (0..grid.len())
        .map(|c| {
            let (d, off) = upwind_weights(grid, inp.v, c);
            let a = 1.0 / inp.dt + d;
            let mut base = inp.m_prev[c] * (1.0 / inp.dt);
            for (k, wk) in &off {
                base -= inp.m[*k] * *wk;
            }
            let mut lap_off = Vec2::ZERO;
            for ax in 0..grid.dim.min(2) {
                let h2 = 1.0 / (grid.spacing[ax] * grid.spacing[ax]);
                for dir in [1, -1] {
                    if let Neighbor::Cell(k) = grid.neighbor(c, ax, dir) {
                        lap_off += inp.m[k] * h2;
                    }
                }
            }
            let cell = CellProblem {
                params: p,
                diss: p.dissipation(inp.theta_prev[c]),
                theta: inp.theta[c],
                eps: inp.eps,
                a,
                h_fixed: inp.h_ext[c] + inp.h_dem[c] + lap_off * p.kappa,
                kl: p.kappa * laplacian_diagonal(grid, c),
            };
            let w = spin(inp.grad_v[c]);
            let mut m = inp.m[c];
            for _ in 0..200 {
                let next = cell.solve(base + w.apply(m), m);
                let done = (next - m).norm() <= 1e-15 * (1.0 + next.norm());
                m = next;
                if done {
                    break;
                }
            }
            m
        })
        .collect()
}
