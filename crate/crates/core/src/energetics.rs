//! Energies, dissipation, entropy, and the per-step balance audit.
//!
//! Zeeman energy is booked as `-mu0 h_ext . m` in the balances reported as
//! `r_mech` and `r_tot`. The alternate `+mu0 h_ext . m` booking (with the
//! matching sign of the field-ramp power) is evaluated alongside as
//! `r_tot_alt` so that the two conventions can be compared on every step.

use crate::constitutive::MaterialParams;
use crate::demag::{DemagSolution, DemagSolver};
use crate::error::{Error, Result};
use crate::grid::stencil::face_gradient_energy;
use crate::grid::{FieldState, Grid, LoadSample, Neighbor};
use crate::stepper::momentum::{momentum_residual, MomentumInputs};
use crate::stepper::physics::{boundary_heat, cauchy_stress, effective_field, temperature, StressInputs};
use crate::stepper::rates::{velocity_gradient, Motion, Rates};
use crate::tensor::Vec2;
use serde::Serialize;

/// Dissipation rate density split by mechanism (per unit volume).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct XiField {
    pub viscous: Vec<f64>,
    pub hyper: Vec<f64>,
    pub maxwell: Vec<f64>,
    pub gradient: Vec<f64>,
    pub magnetic: Vec<f64>,
}

impl XiField {
    pub fn total(&self, c: usize) -> f64 {
        self.viscous[c] + self.hyper[c] + self.maxwell[c] + self.gradient[c] + self.magnetic[c]
    }

    pub fn totals(&self) -> Vec<f64> {
        (0..self.viscous.len()).map(|c| self.total(c)).collect()
    }
}

/// `xi = S_V:E + H:grad E + M |R|^2 + varkappa |grad R|^2 + mu0 dzeta(r).r`
/// evaluated with the lagged temperature `theta_prev`.
///
/// The gradient term is computed face by face with half of every face
/// contribution given to each adjacent cell, which is the exact dual of the
/// five-point Laplacian in the flow rule.
pub fn dissipation_xi(grid: &Grid, params: &MaterialParams, rates: &Rates, theta_prev: &[f64]) -> Result<XiField> {
    let n = grid.len();
    let mut xi = XiField {
        viscous: vec![0.0; n],
        hyper: vec![0.0; n],
        maxwell: vec![0.0; n],
        gradient: vec![0.0; n],
        magnetic: vec![0.0; n],
    };
    for c in 0..n {
        xi.viscous[c] = params.nu1 * rates.strain_rate[c].norm_sq();
        let g2 = rates.grad_e[c].norm_sq();
        xi.hyper[c] = if params.nu2 > 0.0 && g2 > 0.0 { params.nu2 * g2.powf(0.5 * params.p) } else { 0.0 };
        xi.maxwell[c] = params.maxwell_viscosity(theta_prev[c]) * rates.r[c].norm_sq();
        xi.magnetic[c] = params.mu0 * params.dissipation(theta_prev[c]).power(rates.m_zj[c].norm());
    }
    if params.varkappa > 0.0 {
        for a in 0..grid.dim.min(2) {
            let inv = 1.0 / (grid.spacing[a] * grid.spacing[a]);
            for c in 0..n {
                if let Neighbor::Cell(k) = grid.neighbor(c, a, 1) {
                    let e = 0.5 * params.varkappa * (rates.r[k] - rates.r[c]).norm_sq() * inv;
                    xi.gradient[c] += e;
                    xi.gradient[k] += e;
                }
            }
        }
    }
    for c in 0..n {
        let t = xi.total(c);
        if !(t >= -1e-12 * (1.0 + t.abs())) {
            return Err(Error::Audit(format!("negative dissipation {t} at cell {c}")));
        }
    }
    Ok(xi)
}

/// Entropy density `phi'(theta) - omega_hat_eps(m)`.
pub fn entropy_density(params: &MaterialParams, m: Vec2, theta: f64, eps: f64) -> Result<f64> {
    Ok(params.thermal.dphi(theta)? - params.omega_eps_hat(m, eps))
}

/// Integrated energies of one state, plus the rate quantities of the step
/// that produced it (zero for an initial state).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyLedger {
    pub kinetic: f64,
    /// `phi(Ee, m) + omega(m, 0) + (kappa mu0 / 2) |grad m|^2`.
    pub stored: f64,
    pub demag: f64,
    /// `mu0 int h_ext . m`.
    pub zeeman: f64,
    pub heat: f64,
    pub dissipation_rate: f64,
    pub external_power: f64,
    pub boundary_heat: f64,
    pub entropy: f64,
}

impl EnergyLedger {
    /// Kinetic, stored, demagnetization and Zeeman energy with `-mu0 h . m`.
    pub fn mechanical(&self) -> f64 {
        self.kinetic + self.stored + self.demag - self.zeeman
    }

    pub fn total(&self) -> f64 {
        self.mechanical() + self.heat
    }

    /// Total energy with the Zeeman term booked as `+mu0 h . m`.
    pub fn total_alt(&self) -> f64 {
        self.kinetic + self.stored + self.demag + self.zeeman + self.heat
    }
}

/// Energies of one state. `demag` must be the solution for `state.m`.
pub fn energy_ledger(
    grid: &Grid,
    params: &MaterialParams,
    state: &FieldState,
    h_ext: &[Vec2],
    demag: &DemagSolution,
    eps: f64,
) -> Result<EnergyLedger> {
    let vol = grid.cell_volume();
    let theta = temperature(params, &state.w);
    let mut l = EnergyLedger {
        demag: demag.energy,
        stored: 0.5 * params.kappa * params.mu0 * face_gradient_energy(grid, &state.m),
        ..Default::default()
    };
    for c in 0..grid.len() {
        let m = state.m[c];
        l.kinetic += 0.5 * params.rho * state.v[c].norm_sq() * vol;
        l.stored += (params.phi_mech(state.ee[c], m) + params.omega_eps(m, 0.0, eps)) * vol;
        l.zeeman += params.mu0 * h_ext[c].dot(m) * vol;
        l.heat += state.w[c] * vol;
        l.entropy += entropy_density(params, m, theta[c], eps)? * vol;
    }
    Ok(l)
}

/// Everything needed to audit one accepted step.
pub struct AuditInput<'a> {
    pub grid: &'a Grid,
    pub params: &'a MaterialParams,
    pub prev: &'a FieldState,
    pub new: &'a FieldState,
    pub loads: &'a LoadSample,
    pub dt: f64,
    pub motion: Motion,
    pub eps: f64,
    /// `None` when the demagnetizing field is switched off.
    pub demag: Option<&'a DemagSolver>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BalanceReport {
    pub t: f64,
    pub dt: f64,
    pub kinetic: f64,
    pub stored: f64,
    pub demag: f64,
    pub zeeman: f64,
    pub heat: f64,
    pub total_energy: f64,
    pub entropy: f64,
    pub dissipation: f64,
    pub external_power: f64,
    pub drive_power: f64,
    pub boundary_heat: f64,
    pub adiabatic: f64,
    /// Magneto-mechanical identity residual.
    pub r_mech: f64,
    /// Concavity defect of `omega(., 0)` over the step (always >= 0).
    pub nonconvex_correction: f64,
    /// `r_mech - nonconvex_correction`; must be <= tolerance.
    pub inequality: f64,
    pub r_tot: f64,
    pub r_tot_alt: f64,
    /// `dS - dt int_Gamma j / theta`.
    pub entropy_margin: f64,
    /// `dS + dt int_Gamma j / theta`.
    pub entropy_margin_alt: f64,
    /// Largest magnitude among the mechanical energy contributions.
    pub mech_scale: f64,
    /// Potential mismatch between the stored and recomputed demag potential.
    pub potential_mismatch: f64,
}

fn demag_for(input: &AuditInput, m: &[Vec2]) -> Result<DemagSolution> {
    match input.demag {
        Some(s) => s.solve(input.grid, m, input.params.mu0),
        None => Ok(DemagSolution::zero(input.grid)),
    }
}

pub fn audit_step(input: &AuditInput) -> Result<BalanceReport> {
    let AuditInput { grid, params, prev, new, loads, dt, eps, .. } = *input;
    let n = grid.len();
    let vol = grid.cell_volume();
    let theta_prev = temperature(params, &prev.w);
    let theta = temperature(params, &new.w);
    let dem_prev = demag_for(input, &prev.m)?;
    let dem = demag_for(input, &new.m)?;
    let h_prev: Vec<Vec2> = (0..n).map(|c| loads.h_ext[c] - loads.dh_ext_dt[c] * dt).collect();
    let before = energy_ledger(grid, params, prev, &h_prev, &dem_prev, eps)?;
    let mut after = energy_ledger(grid, params, new, &loads.h_ext, &dem, eps)?;

    let grad_v = velocity_gradient(grid, prev, new, &input.motion, dt);
    let rates = Rates::compute(grid, prev, new, grad_v, dt);
    let xi = dissipation_xi(grid, params, &rates, &theta_prev)?;
    let dissipation = xi.totals().iter().sum::<f64>() * vol;

    let mut adiabatic = 0.0;
    let mut p_grav = 0.0;
    let mut p_field = 0.0;
    for c in 0..n {
        let m = new.m[c];
        adiabatic += (theta[c] * params.omega_eps_hat_prime(m, eps).dot(rates.m_conv[c])
            + (theta[c] * params.omega_eps_hat(m, eps) - params.thermal.phi(theta[c])) * rates.div_v[c])
            * vol;
        let b = params.buoyancy.map_or(0.0, |b| b.b(theta[c]));
        p_grav += params.rho * (1.0 - b) * loads.g.dot(new.v[c]) * vol;
        p_field += params.mu0 * loads.dh_ext_dt[c].dot(prev.m[c]) * vol;
    }

    let h_eff = effective_field(grid, params, &new.m, &theta, eps, &loads.h_ext, &dem.h_dem);
    let drive_power = match input.motion {
        Motion::Dynamic => 0.0,
        Motion::Stress(sigma) => sigma.ddot(rates.strain_rate[0]) * vol,
        Motion::Affine(l) if grid.dim == 0 => {
            let s = cauchy_stress(
                grid,
                params,
                &StressInputs {
                    ee: &new.ee,
                    m: &new.m,
                    theta: &theta,
                    strain_rate: &rates.strain_rate,
                    h_ext: &loads.h_ext,
                    h_dem: &dem.h_dem,
                    h_eff: &h_eff,
                    eps,
                },
            );
            s[0].ddot(l) * vol
        }
        Motion::Affine(_) | Motion::Vortex { .. } => {
            let res = momentum_residual(&MomentumInputs {
                grid,
                params,
                prev,
                new,
                rates: &rates,
                theta: &theta,
                loads,
                h_dem: &dem.h_dem,
                h_eff: &h_eff,
                dt,
                eps,
            });
            (0..n).map(|c| res[c].dot(new.v[c])).sum::<f64>() * vol
        }
    };

    let (bheat, sflux) = boundary_heat(grid, &loads.j_ext, loads.thermostat, &theta)?;
    after.dissipation_rate = dissipation;
    after.external_power = p_grav - p_field;
    after.boundary_heat = bheat;

    let d_mech = after.mechanical() - before.mechanical();
    let r_mech = d_mech + dt * dissipation - dt * (p_grav - p_field + drive_power) + dt * adiabatic;
    let r_tot = after.total() - before.total() - dt * (p_grav - p_field + drive_power + bheat);
    let r_tot_alt = after.total_alt() - before.total_alt() - dt * (p_grav + p_field + drive_power + bheat);

    let mut correction = 0.0;
    for c in 0..n {
        let (a, b) = (new.m[c], prev.m[c]);
        let gap = params.omega_eps(a, 0.0, eps)
            - params.omega_eps(b, 0.0, eps)
            - params.omega_eps_m(a, 0.0, eps).dot(a - b);
        correction += gap.max(0.0) * vol;
    }
    let ds = after.entropy - before.entropy;
    let potential_mismatch = if input.demag.is_some() {
        dem.u.iter().zip(&new.u).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()))
    } else {
        0.0
    };
    let mech_scale = [after.kinetic, after.stored, after.demag, after.zeeman, dt * dissipation]
        .iter()
        .fold(0.0_f64, |a, x| a.max(x.abs()));

    Ok(BalanceReport {
        t: new.t,
        dt,
        kinetic: after.kinetic,
        stored: after.stored,
        demag: after.demag,
        zeeman: after.zeeman,
        heat: after.heat,
        total_energy: after.total(),
        entropy: after.entropy,
        dissipation,
        external_power: p_grav - p_field,
        drive_power,
        boundary_heat: bheat,
        adiabatic,
        r_mech,
        nonconvex_correction: correction,
        inequality: r_mech - correction,
        r_tot,
        r_tot_alt,
        entropy_margin: ds - dt * sflux,
        entropy_margin_alt: ds + dt * sflux,
        mech_scale,
        potential_mismatch,
    })
}

/// Tolerances applied to an audit report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditBounds {
    /// Bound on `|r_tot|` relative to the total energy.
    pub energy_rel: f64,
    /// Bound on the inequality residual relative to the total energy.
    pub inequality_rel: f64,
    /// Bound on the negative part of the entropy margin relative to the entropy scale.
    pub entropy_rel: f64,
    /// Bound on the stored-versus-recomputed demag potential.
    pub potential_abs: f64,
}

impl Default for AuditBounds {
    fn default() -> Self {
        AuditBounds { energy_rel: 1e-8, inequality_rel: 1e-8, entropy_rel: 1e-8, potential_abs: 1e-8 }
    }
}

impl BalanceReport {
    /// First violated bound, if any.
    pub fn violation(&self, b: &AuditBounds) -> Option<String> {
        let scale = self.total_energy.abs().max(f64::MIN_POSITIVE);
        if !(self.r_tot.abs() <= b.energy_rel * scale) {
            return Some(format!(
                "total-energy residual {:.3e} exceeds {:.1e} x total energy {:.3e} at t = {}",
                self.r_tot, b.energy_rel, self.total_energy, self.t
            ));
        }
        if !(self.inequality <= b.inequality_rel * scale) {
            return Some(format!("discrete energy inequality violated by {:.3e} at t = {}", self.inequality, self.t));
        }
        let s_scale = self.entropy.abs().max(1.0);
        if !(self.entropy_margin >= -b.entropy_rel * s_scale) {
            return Some(format!("entropy margin {:.3e} < 0 at t = {}", self.entropy_margin, self.t));
        }
        if !(self.potential_mismatch <= b.potential_abs) {
            return Some(format!(
                "stored demag potential differs from the recomputed one by {:.3e} at t = {}",
                self.potential_mismatch, self.t
            ));
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Mat2;

    fn point_rates(prev: &FieldState, new: &FieldState, l: Mat2, dt: f64) -> Rates {
        let g = Grid::material_point();
        Rates::compute(&g, prev, new, vec![l], dt)
    }

    #[test]
    fn no_motion_dissipates_nothing() {
        let g = Grid::material_point();
        let p = MaterialParams::reference();
        let s = FieldState::zeros(&g);
        let xi = dissipation_xi(&g, &p, &point_rates(&s, &s, Mat2::ZERO, 0.1), &[0.5]).unwrap();
        assert_eq!(xi.total(0), 0.0);
    }

    #[test]
    fn sticking_magnetization_dissipates_nothing_magnetically() {
        let g = Grid::material_point();
        let p = MaterialParams::reference();
        let mut s = FieldState::zeros(&g);
        s.m = vec![Vec2::new(0.3, -0.2)];
        let xi = dissipation_xi(&g, &p, &point_rates(&s, &s, Mat2::ZERO, 0.1), &[0.5]).unwrap();
        assert_eq!(xi.magnetic[0], 0.0);
    }

    #[test]
    fn pure_shear_viscous_dissipation() {
        let g = Grid::material_point();
        let mut p = MaterialParams::reference();
        p.nu1 = 0.7;
        let s = FieldState::zeros(&g);
        let shear = 0.3;
        let rates = point_rates(&s, &s, Mat2::new(0.0, shear, shear, 0.0), 0.1);
        let xi = dissipation_xi(&g, &p, &rates, &[0.5]).unwrap();
        assert!((xi.viscous[0] - 2.0 * p.nu1 * shear * shear).abs() < 1e-15);
    }

    #[test]
    fn entropy_density_examples() {
        let p = MaterialParams::reference();
        let th = 0.8;
        let s0 = entropy_density(&p, Vec2::ZERO, th, 0.0).unwrap();
        assert!((s0 - p.thermal.dphi(th).unwrap()).abs() < 1e-15);
        // Magnetic order lowers the entropy.
        let s1 = entropy_density(&p, Vec2::new(0.4, 0.0), th, 0.0).unwrap();
        assert!((s0 - s1 - p.a0 * 0.16).abs() < 1e-12);
    }

    #[test]
    fn resting_state_audit_is_exact() {
        let g = Grid::material_point();
        let p = MaterialParams::reference();
        let mut s = FieldState::zeros(&g);
        s.w = vec![p.thermal.gamma(0.5)];
        let mut next = s.clone();
        next.t = 0.1;
        let loads = LoadSample::zero(&g);
        let a = audit_step(&AuditInput {
            grid: &g,
            params: &p,
            prev: &s,
            new: &next,
            loads: &loads,
            dt: 0.1,
            motion: Motion::Affine(Mat2::ZERO),
            eps: 0.0,
            demag: None,
        })
        .unwrap();
        assert_eq!(a.r_tot, 0.0);
        assert!(a.entropy_margin.abs() < 1e-15 && a.inequality <= 0.0);
        assert!(a.violation(&AuditBounds::default()).is_none());
    }
}
