//! Named experiments built on `run_scenario`, each reducing a trajectory to
//! a small report.

use super::output::{write_csv, write_json};
use super::{initial_at, run_scenario, MotionKind, MotionPhase, ScenarioConfig, SeriesRow, Trajectory};
use crate::error::{Error, Result};
use crate::grid::loads::{sample_loads, ScalarSchedule, Thermostat, VectorSchedule};
use crate::grid::stencil::{grad_velocity, upwind_advection};
use crate::kinematics::{corotation_tensor, corotation_vector, spin};
use crate::stepper::physics::temperature;
use crate::stepper::prescribed_velocity;
use crate::tensor::{Mat2, Vec2};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// Hysteresis under `h = A sin(2 pi t / period)` along x at fixed temperature.
    Irm { theta: f64, h_amplitude: f64, period: f64, cycles: usize },
    /// Thermoremanence, read at the end of cooling and after the rotation phase.
    Trm { cooled: f64, rotated: f64 },
    /// Viscous drift at a fixed field.
    Vrm,
    /// Relaxation times on the temperature plateaus below `solid_below`
    /// and above `magma_above`.
    Melt { solid_below: f64, magma_above: f64 },
    /// Stress relaxation at fixed strain against `exp(-2G t / M)`.
    Relaxation,
    /// Creep under the prescribed stress of the first stress phase.
    Creep,
    /// Final `|m|` against the saturation magnetization.
    Saturation,
    /// Transport of `m` and `Ee` under a rigid rotation.
    Rotation,
}

impl ExperimentSpec {
    pub fn validate(&self, cfg: &ScenarioConfig) -> Result<()> {
        match *self {
            ExperimentSpec::Irm { theta, h_amplitude, period, cycles } => {
                if !(theta > 0.0 && h_amplitude >= 0.0 && period > 0.0 && cycles >= 1) {
                    return Err(Error::config("irm needs theta > 0, h_amplitude >= 0, period > 0, cycles >= 1"));
                }
                if cfg.loads.thermostat.is_none() && !cfg.frozen_theta {
                    return Err(Error::config("irm needs a thermostat or frozen_theta to hold the temperature"));
                }
            }
            ExperimentSpec::Trm { cooled, rotated } if !(cooled > 0.0 && rotated >= cooled && rotated <= cfg.duration) => {
                return Err(Error::config("trm needs 0 < cooled <= rotated <= duration"));
            }
            ExperimentSpec::Melt { solid_below, magma_above } if !(solid_below < magma_above) => {
                return Err(Error::config("melt needs solid_below < magma_above"));
            }
            ExperimentSpec::Creep if !cfg.motion.iter().any(|p| matches!(p.motion, MotionKind::Stress { .. })) => {
                return Err(Error::config("creep needs a stress-controlled motion phase"));
            }
            ExperimentSpec::Rotation
                if !matches!(cfg.motion[0].motion, MotionKind::Rotation { .. } | MotionKind::Vortex { .. }) =>
            {
                return Err(Error::config("rotation needs a rotation motion phase first"));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopPoint {
    pub t: f64,
    pub h: f64,
    pub m: f64,
}

/// Final cycle of a hysteresis run, along the field axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HysteresisLoop {
    #[serde(skip)]
    pub points: Vec<LoopPoint>,
    /// Mean `|h|` at the zero crossings of `m`; 0 for a loop without crossings.
    pub coercivity: f64,
    /// Mean `|m|` at the zero crossings of `h`.
    pub remanence: f64,
    pub m_max: f64,
    /// `mu0 * sum h . dm` over the cycle.
    pub area: f64,
    /// Magnetic dissipation over the cycle.
    pub dissipated: f64,
    /// `|m(end) - m(start)|` of the cycle.
    pub closure_error: f64,
    /// Closure within 1% of `m_max`.
    pub closed: bool,
}

fn crossings(points: &[LoopPoint], key: impl Fn(&LoopPoint) -> f64, val: impl Fn(&LoopPoint) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (key(&w[0]), key(&w[1]));
        if (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0) {
            let s = a / (a - b);
            out.push(val(&w[0]) + s * (val(&w[1]) - val(&w[0])));
        }
    }
    out
}

fn mean_abs(x: &[f64]) -> f64 {
    if x.is_empty() { 0.0 } else { x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64 }
}

/// Extract the loop of the last cycle `[t0, t1]` from a series.
pub fn extract_loop(series: &[SeriesRow], t0: f64, t1: f64, mu0: f64) -> HysteresisLoop {
    let tol = 1e-9 * t1.max(1.0);
    let rows: Vec<&SeriesRow> = series.iter().filter(|r| r.t >= t0 - tol && r.t <= t1 + tol).collect();
    let points: Vec<LoopPoint> = rows.iter().map(|r| LoopPoint { t: r.t, h: r.h_x, m: r.m_x }).collect();
    let mut area = 0.0;
    let mut dissipated = 0.0;
    for w in rows.windows(2) {
        area += mu0 * (w[1].h_x * (w[1].m_x - w[0].m_x) + w[1].h_y * (w[1].m_y - w[0].m_y));
        dissipated += w[1].diss_magnetic;
    }
    let m_max = points.iter().fold(0.0_f64, |a, p| a.max(p.m.abs()));
    let closure_error = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => ((a.m_x - b.m_x).powi(2) + (a.m_y - b.m_y).powi(2)).sqrt(),
        _ => 0.0,
    };
    HysteresisLoop {
        coercivity: mean_abs(&crossings(&points, |p| p.m, |p| p.h)),
        remanence: mean_abs(&crossings(&points, |p| p.h, |p| p.m)),
        m_max,
        area,
        dissipated,
        closure_error,
        closed: closure_error <= 0.01 * m_max + 1e-12,
        points,
    }
}

/// The scenario an IRM experiment actually runs: a sinusoidal field, rest,
/// and the thermostat target set to `theta`.
pub fn irm_config(cfg: &ScenarioConfig, theta: f64, h_amplitude: f64, period: f64, cycles: usize) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.duration = period * cycles as f64;
    c.loads.h_ext = VectorSchedule::Directed {
        angle: 0.0,
        magnitude: ScalarSchedule::Sine { offset: 0.0, amplitude: h_amplitude, period, phase: 0.0 },
    };
    if let Some(th) = &c.loads.thermostat {
        c.loads.thermostat = Some(Thermostat { target: ScalarSchedule::constant(theta), coefficient: th.coefficient });
    }
    c.initial.theta = theta;
    c.motion = vec![MotionPhase { until: c.duration, motion: MotionKind::Rest }];
    c.experiment = Some(ExperimentSpec::Irm { theta, h_amplitude, period, cycles });
    c
}

pub fn irm_loop(cfg: &ScenarioConfig, theta: f64, h_amplitude: f64, period: f64, cycles: usize) -> Result<HysteresisLoop> {
    let c = irm_config(cfg, theta, h_amplitude, period, cycles);
    let traj = run_scenario(&c, None)?;
    Ok(extract_loop(&traj.series, c.duration - period, c.duration, c.material.mu0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrmReport {
    pub m_cooled: [f64; 2],
    pub m_sat_cooled: f64,
    /// `|m| / m_sat - 1` at the end of cooling.
    pub magnitude_error: f64,
    /// Angle between `m` and the field at the end of cooling, degrees.
    pub angle_to_field_deg: f64,
    pub rotation_imposed_deg: f64,
    pub rotation_measured_deg: f64,
    /// `|m| / m_sat - 1` after the rotation.
    pub magnitude_error_rotated: f64,
    pub m_final_abs: f64,
    /// `|m_final| / m_sat` at the end of cooling.
    pub erased_ratio: f64,
}

fn angle(x: f64, y: f64) -> f64 {
    y.atan2(x)
}

fn wrap_deg(a: f64) -> f64 {
    let mut d = a.to_degrees();
    while d > 180.0 {
        d -= 360.0;
    }
    while d <= -180.0 {
        d += 360.0;
    }
    d
}

pub fn trm_report(cfg: &ScenarioConfig, traj: &Trajectory, cooled: f64, rotated: f64) -> TrmReport {
    let a = *traj.row_at(cooled);
    let b = *traj.row_at(rotated);
    let z = traj.series.last().expect("series has the initial row");
    let mut imposed = 0.0;
    for w in traj.series.windows(2) {
        if w[1].t > a.t && w[1].t <= b.t + 1e-12 {
            let dt = w[1].t - w[0].t;
            let om = cfg.phase_at(w[0].t + 0.5 * dt).motion.spin_rate();
            imposed += om * dt;
        }
    }
    let m_a = (a.m_x.powi(2) + a.m_y.powi(2)).sqrt();
    let m_b = (b.m_x.powi(2) + b.m_y.powi(2)).sqrt();
    let m_z = (z.m_x.powi(2) + z.m_y.powi(2)).sqrt();
    let sat_b = cfg.material.m_sat(b.theta_mean);
    TrmReport {
        m_cooled: [a.m_x, a.m_y],
        m_sat_cooled: a.m_sat,
        magnitude_error: m_a / a.m_sat - 1.0,
        angle_to_field_deg: wrap_deg(angle(a.m_x, a.m_y) - angle(a.h_x, a.h_y)),
        rotation_imposed_deg: imposed.to_degrees(),
        rotation_measured_deg: wrap_deg(angle(b.m_x, b.m_y) - angle(a.m_x, a.m_y)),
        magnitude_error_rotated: m_b / sat_b - 1.0,
        m_final_abs: m_z,
        erased_ratio: m_z / a.m_sat,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VrmReport {
    /// `|m_1 - m_0| / dt` of the first step.
    pub initial_rate: f64,
    /// `|d zeta^{-1}(h_eff)|` at the initial state.
    pub oracle_rate: f64,
    pub relative_error: f64,
    /// Mean rate over the second half of the run.
    pub late_rate: f64,
    pub angle_change_deg: f64,
}

pub fn vrm_report(cfg: &ScenarioConfig, traj: &Trajectory) -> Result<VrmReport> {
    let p = &cfg.material;
    let s0 = &traj.initial;
    let theta0 = temperature(p, &s0.w)[0];
    let r1 = traj.series.get(1).ok_or_else(|| Error::Scenario("vrm run has no steps".into()))?;
    let loads = sample_loads(&cfg.loads, &traj.grid, r1.dt, r1.dt)?;
    let h_eff = loads.h_ext[0] + p.h_anisotropy(s0.m[0], theta0, cfg.eps);
    let oracle_rate = p.zeta_resolvent(theta0, h_eff)?.norm();
    let r0 = &traj.series[0];
    let initial_rate = ((r1.m_x - r0.m_x).powi(2) + (r1.m_y - r0.m_y).powi(2)).sqrt() / r1.dt;
    let z = traj.series.last().expect("nonempty");
    let mid = traj.row_at(0.5 * z.t);
    let late_rate = if z.t > mid.t {
        ((z.m_x - mid.m_x).powi(2) + (z.m_y - mid.m_y).powi(2)).sqrt() / (z.t - mid.t)
    } else {
        0.0
    };
    Ok(VrmReport {
        initial_rate,
        oracle_rate,
        relative_error: if oracle_rate > 0.0 { (initial_rate - oracle_rate).abs() / oracle_rate } else { initial_rate },
        late_rate,
        angle_change_deg: wrap_deg(angle(z.m_x, z.m_y) - angle(r0.m_x, r0.m_y)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeltReport {
    /// Fitted relaxation times `-dt / ln(f)` from the per-step decay of `|dev Ee|`.
    pub tau_solid: f64,
    pub tau_magma: f64,
    pub ratio: f64,
    /// `M(theta_solid) / M(theta_magma)` at the plateau temperatures.
    pub expected_ratio: f64,
    pub theta_final: f64,
    pub m_final_abs: f64,
}

fn median(mut x: Vec<f64>) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.sort_by(|a, b| a.total_cmp(b));
    x[x.len() / 2]
}

/// Relaxation times fitted on the steps whose start temperature satisfies `keep`.
fn fitted_tau(series: &[SeriesRow], keep: impl Fn(f64) -> bool) -> (f64, f64) {
    let mut taus = Vec::new();
    let mut temps = Vec::new();
    for w in series.windows(2) {
        if keep(w[0].theta_mean) && w[0].ee_dev > 1e-12 && w[1].ee_dev > 0.0 && w[1].ee_dev < w[0].ee_dev {
            taus.push(-w[1].dt / (w[1].ee_dev / w[0].ee_dev).ln());
            temps.push(w[0].theta_mean);
        }
    }
    (median(taus), median(temps))
}

pub fn melt_report(cfg: &ScenarioConfig, traj: &Trajectory, solid_below: f64, magma_above: f64) -> MeltReport {
    let (tau_solid, th_s) = fitted_tau(&traj.series, |t| t < solid_below);
    let (tau_magma, th_m) = fitted_tau(&traj.series, |t| t > magma_above);
    let p = &cfg.material;
    let z = traj.series.last().expect("nonempty");
    MeltReport {
        tau_solid,
        tau_magma,
        ratio: tau_solid / tau_magma,
        expected_ratio: p.maxwell_viscosity(th_s) / p.maxwell_viscosity(th_m),
        theta_final: z.theta_mean,
        m_final_abs: z.m_abs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationReport {
    /// `M(theta_0) / (2 G)`.
    pub tau: f64,
    /// Largest `| |dev Ee| - |dev Ee_0| e^{-t/tau} |` relative to `|dev Ee_0|`.
    pub max_rel_error: f64,
}

pub fn relaxation_report(cfg: &ScenarioConfig, traj: &Trajectory) -> RelaxationReport {
    let p = &cfg.material;
    let r0 = traj.series[0];
    let tau = p.maxwell_viscosity(r0.theta_mean) / (2.0 * p.g_e);
    let max_rel_error = traj
        .series
        .iter()
        .map(|r| (r.ee_dev - r0.ee_dev * (-r.t / tau).exp()).abs() / r0.ee_dev.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    RelaxationReport { tau, max_rel_error }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CreepReport {
    /// `|sigma| / (2 G)`.
    pub amplitude: f64,
    /// Largest deviation of `Ee` from `sigma / (2G) (1 - e^{-2G t / nu1})`,
    /// relative to `amplitude`.
    pub max_rel_error: f64,
}

pub fn creep_report(cfg: &ScenarioConfig, traj: &Trajectory) -> CreepReport {
    let p = &cfg.material;
    let (sigma, start, end) = {
        let mut t0 = 0.0;
        let mut found = (Mat2::ZERO, 0.0, 0.0);
        for ph in &cfg.motion {
            if let MotionKind::Stress { sigma } = ph.motion {
                found = (Mat2(sigma), t0, ph.until);
                break;
            }
            t0 = ph.until;
        }
        found
    };
    let r0 = *traj.row_at(start);
    let e0 = Mat2::new(r0.ee_xx, r0.ee_xy, r0.ee_xy, r0.ee_yy);
    let target = sigma * (1.0 / (2.0 * p.g_e));
    let amplitude = target.norm();
    let rate = 2.0 * p.g_e / p.nu1;
    let mut err = 0.0_f64;
    for r in traj.series.iter().filter(|r| r.t >= start && r.t <= end + 1e-12) {
        let e = Mat2::new(r.ee_xx, r.ee_xy, r.ee_xy, r.ee_yy);
        let x = (-(r.t - start) * rate).exp();
        let exact = target + (e0 - target) * x;
        err = err.max((e - exact).norm());
    }
    CreepReport { amplitude, max_rel_error: err / amplitude.max(f64::MIN_POSITIVE) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaturationReport {
    pub theta: f64,
    pub m_abs: f64,
    pub m_sat: f64,
    /// `| |m| / m_sat - 1 |`, or `|m|` when `m_sat = 0`.
    pub error: f64,
}

pub fn saturation_report(traj: &Trajectory) -> SaturationReport {
    let z = traj.series.last().expect("nonempty");
    let error = if z.m_sat > 0.0 { (z.m_abs / z.m_sat - 1.0).abs() } else { z.m_abs };
    SaturationReport { theta: z.theta_mean, m_abs: z.m_abs, m_sat: z.m_sat, error }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationReport {
    pub angle: f64,
    pub h: f64,
    pub dt: f64,
    /// Max-norm error of the computed `m` and `Ee` against the rotated
    /// initial fields, relative to their initial max-norm. A vortex motion
    /// is only rigid inside its core, so the comparison stops there.
    pub m_error: f64,
    pub ee_error: f64,
    /// Discrete objective-rate residual of the exact rotating fields at
    /// the last step, relative to `omega` times their max-norm.
    pub m_rate_residual: f64,
    pub ee_rate_residual: f64,
    /// The same residuals in the grid L2 norm, relative to `omega` times
    /// the L2 norm of the exact fields.
    pub m_rate_residual_l2: f64,
    pub ee_rate_residual_l2: f64,
}

/// Initial fields carried by the rigid rotation `Q(omega t)` about the domain center.
fn rotated_fields(cfg: &ScenarioConfig, grid: &crate::grid::Grid, omega: f64, t: f64) -> (Vec<Vec2>, Vec<Mat2>) {
    let q = Mat2::rotation(omega * t);
    let c0 = grid.domain_center();
    let mut m = Vec::with_capacity(grid.len());
    let mut ee = Vec::with_capacity(grid.len());
    for c in 0..grid.len() {
        let x = grid.center(c);
        let back = q.transpose().apply(Vec2::new(x[0] - c0[0], x[1] - c0[1]));
        let (_, m0, e0) = initial_at(&cfg.initial, grid, [back.0[0] + c0[0], back.0[1] + c0[1]]);
        m.push(q.apply(m0));
        ee.push(q.matmul(e0).matmul(q.transpose()));
    }
    (m, ee)
}

pub fn rotation_report(cfg: &ScenarioConfig, traj: &Trajectory) -> RotationReport {
    let grid = &traj.grid;
    let omega = cfg.motion[0].motion.spin_rate();
    let z = traj.series.last().expect("nonempty");
    let t1 = z.t;
    let dt = z.dt.max(f64::MIN_POSITIVE);
    let (m1, e1) = rotated_fields(cfg, grid, omega, t1);
    let (m0, e0) = rotated_fields(cfg, grid, omega, t1 - dt);
    let mscale = traj.initial.m.iter().fold(f64::MIN_POSITIVE, |a, x| a.max(x.norm()));
    let escale = traj.initial.ee.iter().fold(f64::MIN_POSITIVE, |a, x| a.max(x.norm()));
    let s = &traj.final_state;
    let core = match cfg.motion[0].motion {
        MotionKind::Vortex { core, .. } => core,
        _ => f64::INFINITY,
    };
    let x0 = grid.domain_center();
    let rigid: Vec<usize> = (0..grid.len())
        .filter(|&c| {
            let x = grid.center(c);
            (x[0] - x0[0]).hypot(x[1] - x0[1]) <= core
        })
        .collect();
    let m_error = rigid.iter().map(|&c| (s.m[c] - m1[c]).norm()).fold(0.0, f64::max) / mscale;
    let ee_error = rigid.iter().map(|&c| (s.ee[c] - e1[c]).norm()).fold(0.0, f64::max) / escale;

    let v = prescribed_velocity(grid, &cfg.motion[0].motion.motion()).expect("prescribed motion");
    let w: Vec<Mat2> = grad_velocity(grid, &v).iter().map(|g| spin(*g)).collect();
    let adv_m = upwind_advection(grid, &v, &m1);
    let adv_e = upwind_advection(grid, &v, &e1);
    let mut rm = 0.0_f64;
    let mut re = 0.0_f64;
    let (mut rm2, mut re2, mut nm2, mut ne2) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..grid.len() {
        let zm = (m1[c] - m0[c]) * (1.0 / dt) + adv_m[c] + corotation_vector(w[c], m1[c]);
        let ze = (e1[c] - e0[c]) * (1.0 / dt) + adv_e[c] + corotation_tensor(w[c], e1[c]);
        rm = rm.max(zm.norm());
        re = re.max(ze.norm());
        rm2 += zm.norm_sq();
        re2 += ze.norm() * ze.norm();
        nm2 += m1[c].norm_sq();
        ne2 += e1[c].norm() * e1[c].norm();
    }
    let k = omega.abs().max(f64::MIN_POSITIVE);
    RotationReport {
        angle: omega * t1,
        h: grid.spacing[0],
        dt,
        m_error,
        ee_error,
        m_rate_residual: rm / (k * mscale),
        ee_rate_residual: re / (k * escale),
        m_rate_residual_l2: (rm2 / nm2.max(f64::MIN_POSITIVE)).sqrt() / k,
        ee_rate_residual_l2: (re2 / ne2.max(f64::MIN_POSITIVE)).sqrt() / k,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentReport {
    Irm(HysteresisLoop),
    Trm(TrmReport),
    Vrm(VrmReport),
    Melt(MeltReport),
    Relaxation(RelaxationReport),
    Creep(CreepReport),
    Saturation(SaturationReport),
    Rotation(RotationReport),
}

/// Run a scenario together with its experiment, if any. With `out` set,
/// the report goes to `report.json` and an IRM loop to `loop.csv`.
pub fn run_experiment(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<(Trajectory, Option<ExperimentReport>)> {
    let cfg = match cfg.experiment {
        Some(ExperimentSpec::Irm { theta, h_amplitude, period, cycles }) => {
            irm_config(cfg, theta, h_amplitude, period, cycles)
        }
        _ => cfg.clone(),
    };
    let traj = run_scenario(&cfg, out)?;
    let report = match cfg.experiment {
        None => None,
        Some(ExperimentSpec::Irm { period, .. }) => {
            let lp = extract_loop(&traj.series, cfg.duration - period, cfg.duration, cfg.material.mu0);
            if let Some(dir) = out {
                write_csv(dir, "loop.csv", &lp.points)?;
            }
            Some(ExperimentReport::Irm(lp))
        }
        Some(ExperimentSpec::Trm { cooled, rotated }) => Some(ExperimentReport::Trm(trm_report(&cfg, &traj, cooled, rotated))),
        Some(ExperimentSpec::Vrm) => Some(ExperimentReport::Vrm(vrm_report(&cfg, &traj)?)),
        Some(ExperimentSpec::Melt { solid_below, magma_above }) => {
            Some(ExperimentReport::Melt(melt_report(&cfg, &traj, solid_below, magma_above)))
        }
        Some(ExperimentSpec::Relaxation) => Some(ExperimentReport::Relaxation(relaxation_report(&cfg, &traj))),
        Some(ExperimentSpec::Creep) => Some(ExperimentReport::Creep(creep_report(&cfg, &traj))),
        Some(ExperimentSpec::Saturation) => Some(ExperimentReport::Saturation(saturation_report(&traj))),
        Some(ExperimentSpec::Rotation) => Some(ExperimentReport::Rotation(rotation_report(&cfg, &traj))),
    };
    if let (Some(dir), Some(r)) = (out, &report) {
        write_json(dir, "report.json", r)?;
    }
    Ok((traj, report))
}
