//! One fully implicit time step of the coupled system.
//!
//! The blocks are swept in the order velocity, strains, magnetization,
//! demagnetizing potential, enthalpy, and the sweep is repeated until every
//! discrete equation holds to tolerance. Temperature enters the Maxwell
//! viscosity, the conductivity and the dissipation potential at the previous
//! level; every other occurrence is implicit.

pub mod heat;
pub mod magnetization;
pub mod momentum;
pub mod physics;
pub mod rates;
pub mod strain;

pub use rates::{affine_velocity, prescribed_velocity, velocity_gradient, vortex_velocity, Motion, Rates};
pub use strain::green_naghdi_update;

use crate::constitutive::MaterialParams;
use crate::demag::{DemagSolution, DemagSolver};
use crate::energetics::{dissipation_xi, energy_ledger, EnergyLedger};
use crate::error::{Error, Result};
use crate::grid::stencil::{grad_velocity, laplacian};
use crate::grid::{FieldState, Grid, LoadSample};
use crate::kinematics::{cfl_number, dev};
use crate::linalg::solve_dense;
use crate::tensor::{Mat2, Vec2};
use heat::{heat_residual, solve_heat, HeatInputs};
use magnetization::{magnetization_sweep, MagnetizationInputs};
use momentum::{momentum_residual, velocity_correction, MomentumInputs};
use physics::{effective_field, temperature};
use serde::{Deserialize, Serialize};
use strain::{strain_cell, strain_sweep, StrainInputs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepOptions {
    pub dt: f64,
    /// Regularization of the anisotropy energy and of the heat source.
    #[serde(default)]
    pub eps: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol_rel")]
    pub tol_rel: f64,
    #[serde(default = "default_tol_abs")]
    pub tol_abs: f64,
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
    #[serde(default = "default_cfl")]
    pub cfl_max: f64,
    /// Keep the temperature fixed (debugging aid; energy audits are not meaningful).
    #[serde(default)]
    pub frozen_theta: bool,
}

fn default_max_iters() -> usize {
    60
}
fn default_tol_rel() -> f64 {
    1e-10
}
fn default_tol_abs() -> f64 {
    1e-12
}
fn default_relaxation() -> f64 {
    1.0
}
fn default_cfl() -> f64 {
    0.9
}

impl StepOptions {
    pub fn new(dt: f64) -> Self {
        StepOptions {
            dt,
            eps: 0.0,
            max_iters: default_max_iters(),
            tol_rel: default_tol_rel(),
            tol_abs: default_tol_abs(),
            relaxation: default_relaxation(),
            cfl_max: default_cfl(),
            frozen_theta: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.tol_rel > 0.0 && self.tol_abs > 0.0) {
            return Err(Error::config("solver tolerances must be positive"));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(Error::config(format!("eps must lie in [0, 1), got {}", self.eps)));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::config("relaxation must lie in (0, 1]"));
        }
        if !(self.cfl_max > 0.0) || self.max_iters == 0 {
            return Err(Error::config("cfl_max must be positive and max_iters nonzero"));
        }
        Ok(())
    }
}

/// Norms of the six discrete equations (or their scales).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Residuals {
    pub momentum: f64,
    pub strain_split: f64,
    pub ep_flow: f64,
    pub m_inclusion: f64,
    pub potential: f64,
    pub enthalpy: f64,
}

impl Residuals {
    fn as_array(&self) -> [f64; 6] {
        [self.momentum, self.strain_split, self.ep_flow, self.m_inclusion, self.potential, self.enthalpy]
    }

    const NAMES: [&'static str; 6] = ["momentum", "strain split", "Ep flow", "m inclusion", "potential", "enthalpy"];

    /// Name of the first equation above `tol_abs + tol_rel * scale`.
    pub fn first_unconverged(&self, scales: &Residuals, tol_rel: f64, tol_abs: f64) -> Option<&'static str> {
        self.first_unconverged_at(scales, tol_rel, tol_abs).map(|(name, _, _)| name)
    }

    /// Like `first_unconverged`, with the residual and its threshold.
    pub fn first_unconverged_at(&self, scales: &Residuals, tol_rel: f64, tol_abs: f64) -> Option<(&'static str, f64, f64)> {
        let r = self.as_array();
        let s = scales.as_array();
        (0..6)
            .find(|&i| !(r[i] <= tol_abs + tol_rel * s[i]))
            .map(|i| (Self::NAMES[i], r[i], tol_abs + tol_rel * s[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DissipationTotals {
    pub viscous: f64,
    pub hyper: f64,
    pub maxwell: f64,
    pub gradient: f64,
    pub magnetic: f64,
}

impl DissipationTotals {
    pub fn total(&self) -> f64 {
        self.viscous + self.hyper + self.maxwell + self.gradient + self.magnetic
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StepReport {
    pub iterations: usize,
    pub residuals: Residuals,
    pub scales: Residuals,
    pub accepted: bool,
    pub energy_ledger_before: EnergyLedger,
    pub energy_ledger_after: EnergyLedger,
    /// Energy dissipated over the step, by mechanism.
    pub dissipation: DissipationTotals,
    pub failure: Option<String>,
}

/// Solver for one simulation.
pub struct Stepper {
    pub grid: Grid,
    pub params: MaterialParams,
    pub opts: StepOptions,
    /// `None` switches the demagnetizing field off.
    pub demag: Option<DemagSolver>,
}

impl Stepper {
    pub fn new(grid: Grid, params: MaterialParams, opts: StepOptions, demag: Option<DemagSolver>) -> Result<Self> {
        params.validate(grid.dim)?;
        opts.validate()?;
        Ok(Stepper { grid, params, opts, demag })
    }

    pub fn solve_demag(&self, m: &[Vec2]) -> Result<DemagSolution> {
        match &self.demag {
            Some(s) => s.solve(&self.grid, m, self.params.mu0),
            None => Ok(DemagSolution::zero(&self.grid)),
        }
    }

    fn check_motion(&self, motion: &Motion) -> Result<()> {
        match motion {
            Motion::Stress(s) if self.grid.dim != 0 => {
                let _ = s;
                Err(Error::config("stress-driven motion is only available for a material point"))
            }
            Motion::Stress(s) if s.trace().abs() > 1e-12 * (1.0 + s.max_abs()) || s.asymmetry() > 0.0 => {
                Err(Error::config("prescribed stress must be symmetric and deviatoric"))
            }
            Motion::Vortex { core, outer, .. } if self.grid.dim != 2 || !(0.0 <= *core && core < outer) => {
                Err(Error::config("vortex motion needs a 2D grid and 0 <= core < outer"))
            }
            Motion::Affine(l) if self.grid.dim == 0 && l.trace().abs() > 1e-12 * (1.0 + l.max_abs()) => {
                Err(Error::config("prescribed velocity gradient of a material point must be isochoric"))
            }
            _ => Ok(()),
        }
    }

    /// Advance `prev` by `opts.dt`. A step that fails to converge, or that
    /// violates the CFL bound, comes back with `accepted = false`.
    pub fn step(&self, prev: &FieldState, loads: &LoadSample, motion: &Motion) -> Result<(FieldState, StepReport)> {
        self.check_motion(motion)?;
        let grid = &self.grid;
        let p = &self.params;
        let o = &self.opts;
        let dt = o.dt;
        let n = grid.len();
        let mut report = StepReport::default();

        let mut s = prev.clone();
        s.t = prev.t + dt;
        if let Some(v) = prescribed_velocity(grid, motion) {
            s.v = v;
        }
        let cfl = cfl_number(grid, &prev.v, dt).max(cfl_number(grid, &s.v, dt));
        if cfl > o.cfl_max {
            report.failure = Some(format!("CFL number {cfl:.3} exceeds {}", o.cfl_max));
            return Ok((s, report));
        }

        let theta_prev = temperature(p, &prev.w);
        let dem_prev = self.solve_demag(&prev.m)?;
        let mut dem = dem_prev.clone();
        let mut theta = theta_prev.clone();
        let mut r = vec![Mat2::ZERO; n];
        let mut grad_v = velocity_gradient(grid, prev, &s, motion, dt);
        if let Motion::Stress(_) = motion {
            grad_v = vec![Mat2::ZERO; n];
        }

        for it in 1..=o.max_iters {
            report.iterations = it;
            if motion.is_dynamic() && grid.dim > 0 {
                let rates = Rates::compute(grid, prev, &s, grad_v.clone(), dt);
                let h_eff = effective_field(grid, p, &s.m, &theta, o.eps, &loads.h_ext, &dem.h_dem);
                let res = momentum_residual(&MomentumInputs {
                    grid,
                    params: p,
                    prev,
                    new: &s,
                    rates: &rates,
                    theta: &theta,
                    loads,
                    h_dem: &dem.h_dem,
                    h_eff: &h_eff,
                    dt,
                    eps: o.eps,
                });
                let dv = velocity_correction(grid, p, &theta_prev, &rates.grad_e, &res, dt)?;
                for c in 0..n {
                    s.v[c] += dv[c] * o.relaxation;
                }
                grad_v = grad_velocity(grid, &s.v);
                let cfl = cfl_number(grid, &s.v, dt);
                if cfl > o.cfl_max {
                    report.failure = Some(format!("CFL number {cfl:.3} exceeds {} during the solve", o.cfl_max));
                    return Ok((s, report));
                }
            }

            let sin = StrainInputs {
                grid,
                params: p,
                dt,
                v: &s.v,
                grad_v: &grad_v,
                theta_prev: &theta_prev,
                ee_prev: &prev.ee,
                ep_prev: &prev.ep,
                ee: &s.ee,
                ep: &s.ep,
                r: &r,
            };
            let up = if let Motion::Stress(sigma) = motion {
                let e = self.stress_driven_rate(&sin, *sigma)?;
                let up = strain_sweep(&sin, Some(e));
                grad_v = vec![e];
                up
            } else {
                strain_sweep(&sin, None)
            };
            s.ee = up.ee;
            s.ep = up.ep;
            r = up.r;

            let m_new = magnetization_sweep(&MagnetizationInputs {
                grid,
                params: p,
                dt,
                eps: o.eps,
                v: &s.v,
                grad_v: &grad_v,
                theta_prev: &theta_prev,
                theta: &theta,
                m_prev: &prev.m,
                m: &s.m,
                h_ext: &loads.h_ext,
                h_dem: &dem.h_dem,
            });
            for c in 0..n {
                let old = s.m[c];
                s.m[c] = old + (m_new[c] - old) * o.relaxation;
            }

            if self.demag.is_some() {
                dem = self.solve_demag(&s.m)?;
                s.u = dem.u.clone();
            }

            if !o.frozen_theta {
                let rates = Rates::compute(grid, prev, &s, grad_v.clone(), dt);
                let xi = dissipation_xi(grid, p, &rates, &theta_prev)?.totals();
                let heat = solve_heat(&HeatInputs {
                    grid,
                    params: p,
                    dt,
                    eps: o.eps,
                    w_prev: &prev.w,
                    theta_prev: &theta_prev,
                    theta: &theta,
                    v: &s.v,
                    m: &s.m,
                    m_conv: &rates.m_conv,
                    div_v: &rates.div_v,
                    xi: &xi,
                    loads,
                    tol_abs: o.tol_abs,
                });
                // A diverging enthalpy Newton iteration rejects the step.
                let (th, w) = match heat {
                    Err(Error::Numerical { message, residual }) => {
                        report.failure = Some(format!("{message} ({residual:.3e})"));
                        return Ok((s, report));
                    }
                    other => other?,
                };
                theta = th;
                s.w = w;
            }

            let (res, scales) = self.residuals_with(&s, prev, loads, motion, &dem)?;
            report.residuals = res;
            report.scales = scales;
            if res.first_unconverged(&scales, o.tol_rel, o.tol_abs).is_none() {
                report.accepted = true;
                break;
            }
        }
        if !report.accepted {
            let msg = match report.residuals.first_unconverged_at(&report.scales, o.tol_rel, o.tol_abs) {
                Some((which, r, tol)) => format!("{which} residual {r:.3e} > {tol:.3e}"),
                None => "?".into(),
            };
            report.failure = Some(format!("no convergence after {} iterations ({msg})", o.max_iters));
            return Ok((s, report));
        }
        s.check_invariants(grid)?;

        let h_prev: Vec<Vec2> = (0..n).map(|c| loads.h_ext[c] - loads.dh_ext_dt[c] * dt).collect();
        report.energy_ledger_before = energy_ledger(grid, p, prev, &h_prev, &dem_prev, o.eps)?;
        report.energy_ledger_after = energy_ledger(grid, p, &s, &loads.h_ext, &dem, o.eps)?;
        let rates = Rates::compute(grid, prev, &s, velocity_gradient(grid, prev, &s, motion, dt), dt);
        let xi = dissipation_xi(grid, p, &rates, &theta_prev)?;
        let k = dt * grid.cell_volume();
        report.dissipation = DissipationTotals {
            viscous: xi.viscous.iter().sum::<f64>() * k,
            hyper: xi.hyper.iter().sum::<f64>() * k,
            maxwell: xi.maxwell.iter().sum::<f64>() * k,
            gradient: xi.gradient.iter().sum::<f64>() * k,
            magnetic: xi.magnetic.iter().sum::<f64>() * k,
        };
        report.energy_ledger_after.dissipation_rate = report.dissipation.total() / dt;
        Ok((s, report))
    }

    /// Strain rate of a stress-driven material point: `sym(S_E(Ee) + nu1 E)`
    /// equals the prescribed stress. The strain solve is affine in `E`, so
    /// the balance is assembled from probes and solved exactly.
    fn stress_driven_rate(&self, sin: &StrainInputs, sigma: Mat2) -> Result<Mat2> {
        let p = &self.params;
        let balance = |e: Mat2| {
            let (ee, _, _) = strain_cell(sin, 0, e);
            (p.stress_elastic(ee) + e * p.nu1).sym()
        };
        let f0 = balance(Mat2::ZERO);
        let basis = [Mat2::diag(1.0, 0.0), Mat2::diag(0.0, 1.0), Mat2::new(0.0, 1.0, 1.0, 0.0)];
        let comp = |m: Mat2| [m.0[0][0], m.0[1][1], m.0[0][1]];
        let cols: Vec<[f64; 3]> = basis.iter().map(|b| {
            let d = balance(*b) - f0;
            comp(d)
        }).collect();
        let mut a = [[0.0; 3]; 3];
        for (j, col) in cols.iter().enumerate() {
            for i in 0..3 {
                a[i][j] = col[i];
            }
        }
        let rhs = comp(sigma - f0);
        let x = solve_dense(a, rhs).ok_or_else(|| Error::numerical("stress-driven strain system is singular", 0.0))?;
        Ok(Mat2::new(x[0], x[2], x[2], x[1]))
    }

    /// Norms of the six discrete equations for `trial` against `prev`.
    /// Returns the norms together with per-equation scales.
    pub fn residuals(
        &self,
        trial: &FieldState,
        prev: &FieldState,
        loads: &LoadSample,
        motion: &Motion,
    ) -> Result<(Residuals, Residuals)> {
        let dem = self.solve_demag(&trial.m)?;
        self.residuals_with(trial, prev, loads, motion, &dem)
    }

    fn residuals_with(
        &self,
        trial: &FieldState,
        prev: &FieldState,
        loads: &LoadSample,
        motion: &Motion,
        dem: &DemagSolution,
    ) -> Result<(Residuals, Residuals)> {
        let grid = &self.grid;
        let p = &self.params;
        let o = &self.opts;
        let dt = o.dt;
        let n = grid.len();
        let theta_prev = temperature(p, &prev.w);
        let theta = temperature(p, &trial.w);
        let rates = Rates::compute(grid, prev, trial, velocity_gradient(grid, prev, trial, motion, dt), dt);
        let h_eff = effective_field(grid, p, &trial.m, &theta, o.eps, &loads.h_ext, &dem.h_dem);
        let mut res = Residuals::default();
        let mut sc = Residuals::default();
        let vmax = |a: f64, b: f64| a.max(b);

        match motion {
            Motion::Dynamic if grid.dim > 0 => {
                let mres = momentum_residual(&MomentumInputs {
                    grid,
                    params: p,
                    prev,
                    new: trial,
                    rates: &rates,
                    theta: &theta,
                    loads,
                    h_dem: &dem.h_dem,
                    h_eff: &h_eff,
                    dt,
                    eps: o.eps,
                });
                let hmin = grid.spacing[..grid.dim].iter().fold(f64::INFINITY, |a, h| a.min(*h));
                for c in 0..n {
                    res.momentum = vmax(res.momentum, mres[c].norm());
                    let inertia = (trial.v[c] - prev.v[c]).norm() * p.rho / dt;
                    // The free energy enters the Cauchy stress as a pressure; its
                    // thermal part dominates the round-off of the stress divergence.
                    let stress = (p.stress_elastic(trial.ee[c]).max_abs()
                        + p.nu1 * rates.strain_rate[c].max_abs()
                        + p.thermal.phi(theta[c]).abs())
                        / hmin;
                    sc.momentum = vmax(sc.momentum, inertia.max(stress).max(p.rho * loads.g.norm()));
                }
            }
            Motion::Stress(sigma) => {
                let bal = (p.stress_elastic(trial.ee[0]) + rates.strain_rate[0] * p.nu1).sym() - *sigma;
                res.momentum = bal.max_abs();
                sc.momentum = sigma.max_abs().max(p.stress_elastic(trial.ee[0]).max_abs());
            }
            _ => {}
        }

        let lap_r = laplacian(grid, &rates.r);
        for c in 0..n {
            let split = rates.ee_rate[c] + rates.r[c] - rates.strain_rate[c];
            res.strain_split = vmax(res.strain_split, split.max_abs());
            sc.strain_split = vmax(
                sc.strain_split,
                rates.ee_rate[c].max_abs().max(rates.r[c].max_abs()).max(rates.strain_rate[c].max_abs()),
            );
            let mr = rates.r[c] * p.maxwell_viscosity(theta_prev[c]);
            let ds = dev(p.stress_elastic(trial.ee[c]));
            let flow = mr - ds - lap_r[c] * p.varkappa;
            res.ep_flow = vmax(res.ep_flow, flow.max_abs());
            sc.ep_flow = vmax(sc.ep_flow, mr.max_abs().max(ds.max_abs()));

            // Natural residual of the inclusion, `r - prox_{c zeta}(r + c h)`
            // with `c = 1/dt`, reported in field units.
            let diss = p.dissipation(theta_prev[c]);
            let rz = rates.m_zj[c];
            let h = h_eff[c];
            let mres = (rz - diss.prox(rz + h * (1.0 / dt), 1.0 / dt)).norm() * dt;
            res.m_inclusion = vmax(res.m_inclusion, mres);
            sc.m_inclusion = vmax(sc.m_inclusion, h.norm().max(diss.h_c));
        }

        if self.demag.is_some() {
            for (a, b) in dem.u.iter().zip(&trial.u) {
                res.potential = vmax(res.potential, (a - b).abs());
                sc.potential = vmax(sc.potential, a.abs());
            }
        }

        if !o.frozen_theta {
            let xi = dissipation_xi(grid, p, &rates, &theta_prev)?.totals();
            let inp = HeatInputs {
                grid,
                params: p,
                dt,
                eps: o.eps,
                w_prev: &prev.w,
                theta_prev: &theta_prev,
                theta: &theta,
                v: &trial.v,
                m: &trial.m,
                m_conv: &rates.m_conv,
                div_v: &rates.div_v,
                xi: &xi,
                loads,
                tol_abs: o.tol_abs,
            };
            let hres = heat_residual(&inp, &theta)?;
            for c in 0..n {
                res.enthalpy = vmax(res.enthalpy, hres[c].abs());
                let rate = (trial.w[c] - prev.w[c]).abs() / dt;
                sc.enthalpy = vmax(sc.enthalpy, rate.max(xi[c]).max(trial.w[c].abs() * 1e-4 / dt));
            }
        }
        Ok((res, sc))
    }
}

/// Step-size control: halve on rejection, grow by at most 1.2x on acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtController {
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    #[serde(default = "default_growth")]
    pub growth: f64,
}

fn default_growth() -> f64 {
    1.2
}

impl DtController {
    pub fn fixed(dt: f64) -> Self {
        DtController { dt, dt_min: dt / 1024.0, dt_max: dt, growth: 1.2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt && self.dt <= self.dt_max) {
            return Err(Error::config("dt policy needs 0 < dt_min <= dt <= dt_max"));
        }
        if !(self.growth >= 1.0 && self.growth <= 1.2) {
            return Err(Error::config("dt growth factor must lie in [1, 1.2]"));
        }
        Ok(())
    }

    pub fn accepted(&mut self) {
        self.dt = (self.dt * self.growth).min(self.dt_max);
    }

    /// Halve the step; fails once the step would fall below `dt_min`.
    pub fn rejected(&mut self, why: &str) -> Result<()> {
        let next = 0.5 * self.dt;
        if next < self.dt_min {
            return Err(Error::Scenario(format!("step rejected at dt_min = {}: {why}", self.dt_min)));
        }
        self.dt = next;
        Ok(())
    }
}

#[cfg(test)]
mod tests;
