//! Scenario configuration, the time loop and run outputs.
//!
//! A scenario fixes the grid, the material, the loads, a piecewise motion
//! program, the initial state and the time-step policy. `run_scenario`
//! advances it to `duration`, audits every accepted step and optionally
//! writes the run directory.

pub mod experiments;
mod output;

pub use experiments::{irm_loop, run_experiment, ExperimentReport, ExperimentSpec, HysteresisLoop};
pub use output::{read_series, snapshot_path, write_csv, write_json, RunWriter};

use crate::constitutive::MaterialParams;
use crate::demag::DemagSolver;
use crate::energetics::{audit_step, energy_ledger, AuditBounds, AuditInput, BalanceReport, EnergyLedger};
use crate::error::{Error, Result};
use crate::grid::loads::sample_loads;
use crate::grid::{make_grid, FieldState, Grid, Loads};
use crate::kinematics::dev;
use crate::stepper::{prescribed_velocity, DissipationTotals, DtController, Motion, StepOptions, Stepper};
use crate::tensor::{Mat2, Vec2};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    #[serde(default)]
    pub extents: Vec<f64>,
    #[serde(default)]
    pub cells: Vec<usize>,
    /// Zero-padding factor of the demagnetization window.
    #[serde(default = "default_pad")]
    pub pad_factor: usize,
}

fn default_pad() -> usize {
    4
}

impl GridSpec {
    pub fn point() -> Self {
        GridSpec { dim: 0, extents: vec![], cells: vec![], pad_factor: default_pad() }
    }

    pub fn build(&self) -> Result<Grid> {
        if self.dim == 0 {
            return Ok(Grid::material_point());
        }
        make_grid(self.dim, &self.extents, &self.cells, self.pad_factor)
    }
}

/// Velocity prescription of one motion phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionKind {
    /// Momentum balance decides the velocity.
    Dynamic,
    /// Zero velocity.
    Rest,
    /// `v = L (x - x0)`.
    Affine { l: [[f64; 2]; 2] },
    /// Rigid rotation about the domain center.
    Rotation { omega: f64 },
    /// Rigid rotation inside radius `core`, at rest beyond `outer`.
    Vortex { omega: f64, core: f64, outer: f64 },
    /// Prescribed deviatoric stress on a material point.
    Stress { sigma: [[f64; 2]; 2] },
}

impl MotionKind {
    pub fn motion(&self) -> Motion {
        match *self {
            MotionKind::Dynamic => Motion::Dynamic,
            MotionKind::Rest => Motion::Affine(Mat2::ZERO),
            MotionKind::Affine { l } => Motion::Affine(Mat2(l)),
            MotionKind::Rotation { omega } => Motion::Affine(Mat2::rotation_rate(omega)),
            MotionKind::Vortex { omega, core, outer } => Motion::Vortex { omega, core, outer },
            MotionKind::Stress { sigma } => Motion::Stress(Mat2(sigma)),
        }
    }

    /// Spin rate, used to measure imposed rotation angles.
    pub fn spin_rate(&self) -> f64 {
        match *self {
            MotionKind::Rotation { omega } | MotionKind::Vortex { omega, .. } => omega,
            MotionKind::Affine { l } => 0.5 * (l[1][0] - l[0][1]),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionPhase {
    /// End time of the phase.
    pub until: f64,
    pub motion: MotionKind,
}

/// Compact perturbation with profile `(1 - (r/R)^2)^3` added to the
/// uniform initial fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    /// Defaults to the domain center.
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    pub radius: f64,
    #[serde(default)]
    pub m: [f64; 2],
    #[serde(default)]
    pub ee: [[f64; 2]; 2],
    #[serde(default)]
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub theta: f64,
    #[serde(default)]
    pub m: [f64; 2],
    #[serde(default)]
    pub ee: [[f64; 2]; 2],
    #[serde(default)]
    pub blob: Option<BlobSpec>,
}

/// Initial fields at a point: `(theta, m, ee)`.
pub fn initial_at(init: &InitialSpec, grid: &Grid, x: [f64; 2]) -> (f64, Vec2, Mat2) {
    let mut theta = init.theta;
    let mut m = Vec2(init.m);
    let mut ee = Mat2(init.ee);
    if let Some(b) = &init.blob {
        let c = b.center.unwrap_or_else(|| grid.domain_center());
        let s2 = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (b.radius * b.radius);
        let w = if s2 < 1.0 { (1.0 - s2).powi(3) } else { 0.0 };
        theta += w * b.theta;
        m += Vec2(b.m) * w;
        ee += Mat2(b.ee) * w;
    }
    (theta, m, ee)
}

/// Solver settings; defaults are the documented tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "d_iters")]
    pub max_iters: usize,
    #[serde(default = "d_tol_rel")]
    pub tol_rel: f64,
    #[serde(default = "d_tol_abs")]
    pub tol_abs: f64,
    #[serde(default = "d_one")]
    pub relaxation: f64,
    #[serde(default = "d_cfl")]
    pub cfl_max: f64,
}

fn d_iters() -> usize {
    60
}
fn d_tol_rel() -> f64 {
    1e-10
}
fn d_tol_abs() -> f64 {
    1e-12
}
fn d_one() -> f64 {
    1.0
}
fn d_cfl() -> f64 {
    0.9
}
fn d_true() -> bool {
    true
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec { max_iters: d_iters(), tol_rel: d_tol_rel(), tol_abs: d_tol_abs(), relaxation: 1.0, cfl_max: d_cfl() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Snapshot cadence in steps; each output also stores the preceding
    /// state so that the step can be re-audited.
    #[serde(default = "d_every")]
    pub every: u64,
    #[serde(default = "d_true")]
    pub snapshots: bool,
    /// Audit every accepted step.
    #[serde(default = "d_true")]
    pub audit: bool,
}

fn d_every() -> u64 {
    10
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { every: d_every(), snapshots: true, audit: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub grid: GridSpec,
    pub material: MaterialParams,
    pub loads: Loads,
    pub motion: Vec<MotionPhase>,
    pub initial: InitialSpec,
    pub duration: f64,
    pub dt: DtController,
    #[serde(default)]
    pub solver: SolverSpec,
    pub demag: bool,
    /// Blend between the `theta`-dependent and the frozen anisotropy split.
    pub eps: f64,
    #[serde(default)]
    pub frozen_theta: bool,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub audit: AuditBounds,
    #[serde(default)]
    pub experiment: Option<ExperimentSpec>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.material.validate(grid.dim)?;
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::config("duration must be a finite number >= 0"));
        }
        self.dt.validate()?;
        self.loads.validate(self.duration)?;
        if !(self.eps >= 0.0 && self.eps < 1.0) {
            return Err(Error::config("eps must lie in [0, 1)"));
        }
        if self.output.every == 0 {
            return Err(Error::config("output.every must be >= 1"));
        }
        StepOptions { dt: self.dt.dt, ..self.step_options() }.validate()?;
        if self.motion.is_empty() {
            return Err(Error::config("motion program is empty"));
        }
        let mut last = 0.0;
        for (k, ph) in self.motion.iter().enumerate() {
            if !(ph.until > last || (k == 0 && ph.until >= 0.0)) {
                return Err(Error::config(format!("motion[{k}].until must increase")));
            }
            last = ph.until;
            match ph.motion {
                MotionKind::Stress { .. } if grid.dim > 0 => {
                    return Err(Error::config(format!("motion[{k}]: stress control needs dim = 0")));
                }
                MotionKind::Vortex { core, outer, .. } if grid.dim != 2 || !(0.0 <= core && core < outer) => {
                    return Err(Error::config(format!("motion[{k}]: vortex needs dim = 2 and 0 <= core < outer")));
                }
                MotionKind::Affine { .. } | MotionKind::Rotation { .. } | MotionKind::Vortex { .. } if grid.dim > 0 => {
                    let v = prescribed_velocity(&grid, &ph.motion.motion()).expect("prescribed motion");
                    let cfl = crate::kinematics::cfl_number(&grid, &v, self.dt.dt_max);
                    if cfl > self.solver.cfl_max {
                        return Err(Error::config(format!(
                            "motion[{k}]: CFL number {cfl:.3} at dt_max exceeds cfl_max = {}",
                            self.solver.cfl_max
                        )));
                    }
                }
                _ => {}
            }
        }
        if last < self.duration {
            return Err(Error::config(format!("motion program ends at {last} before duration {}", self.duration)));
        }
        if let Some(e) = &self.experiment {
            e.validate(self)?;
        }
        Ok(())
    }

    fn step_options(&self) -> StepOptions {
        StepOptions {
            dt: self.dt.dt,
            eps: self.eps,
            max_iters: self.solver.max_iters,
            tol_rel: self.solver.tol_rel,
            tol_abs: self.solver.tol_abs,
            relaxation: self.solver.relaxation,
            cfl_max: self.solver.cfl_max,
            frozen_theta: self.frozen_theta,
        }
    }

    /// Phase active at time `t`, and the end time of that phase.
    pub fn phase_at(&self, t: f64) -> &MotionPhase {
        self.motion.iter().find(|p| t < p.until).unwrap_or_else(|| self.motion.last().expect("validated"))
    }

    /// Apply a `key=value` override at a dotted path. The value is parsed
    /// as JSON, falling back to a plain string.
    pub fn apply_override(value: &mut serde_json::Value, key: &str, raw: &str) -> Result<()> {
        let parsed: serde_json::Value =
            serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut cur = value;
        let parts: Vec<&str> = key.split('.').collect();
        for (k, part) in parts.iter().enumerate() {
            let last = k + 1 == parts.len();
            cur = match cur {
                serde_json::Value::Object(map) => {
                    if last {
                        map.insert(part.to_string(), parsed);
                        return Ok(());
                    }
                    map.get_mut(*part).ok_or_else(|| Error::config(format!("override {key}: no field {part}")))?
                }
                serde_json::Value::Array(arr) => {
                    let i: usize = part
                        .parse()
                        .map_err(|_| Error::config(format!("override {key}: {part} is not an index")))?;
                    let len = arr.len();
                    let slot = arr
                        .get_mut(i)
                        .ok_or_else(|| Error::config(format!("override {key}: index {i} out of range {len}")))?;
                    if last {
                        *slot = parsed;
                        return Ok(());
                    }
                    slot
                }
                _ => return Err(Error::config(format!("override {key}: {part} is not inside an object"))),
            };
        }
        Err(Error::config("empty override key"))
    }
}

/// Summary of one state, written as one line of `series.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesRow {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub theta_mean: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub m_x: f64,
    pub m_y: f64,
    pub m_abs: f64,
    pub m_sat: f64,
    pub ee_xx: f64,
    pub ee_xy: f64,
    pub ee_yy: f64,
    /// Norm of the deviatoric part of the mean elastic strain.
    pub ee_dev: f64,
    pub ep_xx: f64,
    pub ep_xy: f64,
    pub ep_yy: f64,
    /// Largest trace of `Ep` over the cells.
    pub ep_trace_max: f64,
    pub v_max: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub kinetic: f64,
    pub stored: f64,
    pub demag: f64,
    pub zeeman: f64,
    pub heat: f64,
    pub total_energy: f64,
    pub entropy: f64,
    /// Energy dissipated over the step that ended here, by mechanism.
    pub diss_viscous: f64,
    pub diss_hyper: f64,
    pub diss_maxwell: f64,
    pub diss_gradient: f64,
    pub diss_magnetic: f64,
    pub iterations: usize,
}

impl SeriesRow {
    fn from_state(
        grid: &Grid,
        params: &MaterialParams,
        s: &FieldState,
        step: u64,
        dt: f64,
        h_ext: &[Vec2],
        ledger: &EnergyLedger,
    ) -> Self {
        let n = grid.len() as f64;
        let theta = crate::stepper::physics::temperature(params, &s.w);
        let mean_v = |f: &dyn Fn(usize) -> f64| (0..grid.len()).map(f).sum::<f64>() / n;
        let ee = s.ee.iter().fold(Mat2::ZERO, |a, x| a + *x) * (1.0 / n);
        let ep = s.ep.iter().fold(Mat2::ZERO, |a, x| a + *x) * (1.0 / n);
        let m = s.m.iter().fold(Vec2::ZERO, |a, x| a + *x) * (1.0 / n);
        let h = h_ext.iter().fold(Vec2::ZERO, |a, x| a + *x) * (1.0 / n);
        let theta_mean = theta.iter().sum::<f64>() / n;
        SeriesRow {
            step,
            t: s.t,
            dt,
            theta_mean,
            theta_min: theta.iter().cloned().fold(f64::INFINITY, f64::min),
            theta_max: theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            m_x: m.0[0],
            m_y: m.0[1],
            m_abs: mean_v(&|c| s.m[c].norm()),
            m_sat: params.m_sat(theta_mean),
            ee_xx: ee.0[0][0],
            ee_xy: ee.0[0][1],
            ee_yy: ee.0[1][1],
            ee_dev: dev(ee).norm(),
            ep_xx: ep.0[0][0],
            ep_xy: ep.0[0][1],
            ep_yy: ep.0[1][1],
            ep_trace_max: s.ep.iter().map(|x| x.trace()).fold(f64::NEG_INFINITY, f64::max),
            v_max: s.v.iter().fold(0.0_f64, |a, v| a.max(v.norm())),
            h_x: h.0[0],
            h_y: h.0[1],
            kinetic: ledger.kinetic,
            stored: ledger.stored,
            demag: ledger.demag,
            zeeman: ledger.zeeman,
            heat: ledger.heat,
            total_energy: ledger.total(),
            entropy: ledger.entropy,
            ..Default::default()
        }
    }

    fn with_dissipation(mut self, d: &DissipationTotals, iterations: usize) -> Self {
        self.diss_viscous = d.viscous;
        self.diss_hyper = d.hyper;
        self.diss_maxwell = d.maxwell;
        self.diss_gradient = d.gradient;
        self.diss_magnetic = d.magnetic;
        self.iterations = iterations;
        self
    }

    pub fn dissipation(&self) -> f64 {
        self.diss_viscous + self.diss_hyper + self.diss_maxwell + self.diss_gradient + self.diss_magnetic
    }
}

/// Audit of one step, tagged with the step number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditRow {
    pub step: u64,
    pub report: BalanceReport,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub initial: FieldState,
    pub final_state: FieldState,
    /// One row per state, starting with the initial one.
    pub series: Vec<SeriesRow>,
    pub audits: Vec<AuditRow>,
    pub steps: u64,
    pub rejections: u64,
    /// First violated audit bound, if any.
    pub audit_violation: Option<String>,
}

impl Trajectory {
    /// Largest `|r_tot| / E` over all audited steps.
    pub fn max_energy_residual(&self) -> f64 {
        self.audits
            .iter()
            .map(|a| a.report.r_tot.abs() / a.report.total_energy.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// Series row closest to time `t`.
    pub fn row_at(&self, t: f64) -> &SeriesRow {
        let k = self.series.partition_point(|r| r.t < t);
        let k = k.min(self.series.len() - 1);
        if k > 0 && (self.series[k - 1].t - t).abs() <= (self.series[k].t - t).abs() {
            &self.series[k - 1]
        } else {
            &self.series[k]
        }
    }
}

/// Build the initial state of a scenario.
pub fn initial_state(cfg: &ScenarioConfig, grid: &Grid, stepper: &Stepper) -> Result<FieldState> {
    let mut s = FieldState::zeros(grid);
    for c in 0..grid.len() {
        let (theta, m, ee) = initial_at(&cfg.initial, grid, grid.center(c));
        if !(theta > 0.0) {
            return Err(Error::config(format!("initial temperature {theta} at cell {c} must be > 0")));
        }
        if ee.asymmetry() != 0.0 {
            return Err(Error::config("initial elastic strain must be symmetric"));
        }
        s.w[c] = cfg.material.thermal.gamma(theta);
        s.m[c] = m;
        s.ee[c] = ee;
    }
    // A prescribed motion is already under way at t = 0.
    if let Some(v) = cfg.motion.first().and_then(|ph| prescribed_velocity(grid, &ph.motion.motion())) {
        s.v = v;
    }
    if stepper.demag.is_some() {
        s.u = stepper.solve_demag(&s.m)?.u;
    }
    s.check_invariants(grid)?;
    Ok(s)
}

/// Run a scenario. With `out` set, the run directory is written as the run
/// progresses; a failed run leaves the outputs written so far.
pub fn run_scenario(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let demag = cfg.demag.then(DemagSolver::new);
    let mut stepper = Stepper::new(grid.clone(), cfg.material.clone(), cfg.step_options(), demag)?;
    let initial = initial_state(cfg, &grid, &stepper)?;
    let mut writer = match out {
        Some(dir) => Some(RunWriter::create(dir, cfg)?),
        None => None,
    };

    let mut ctrl = cfg.dt;
    let loads0 = sample_loads(&cfg.loads, &grid, 0.0, ctrl.dt)?;
    let dem0 = stepper.solve_demag(&initial.m)?;
    let ledger0 = energy_ledger(&grid, &cfg.material, &initial, &loads0.h_ext, &dem0, cfg.eps)?;
    let row0 = SeriesRow::from_state(&grid, &cfg.material, &initial, 0, 0.0, &loads0.h_ext, &ledger0);
    let mut traj = Trajectory {
        grid: grid.clone(),
        initial: initial.clone(),
        final_state: initial.clone(),
        series: vec![row0],
        audits: Vec::new(),
        steps: 0,
        rejections: 0,
        audit_violation: None,
    };
    if let Some(w) = writer.as_mut() {
        w.series(&row0)?;
        if cfg.output.snapshots {
            w.snapshot(&grid, &initial, 0)?;
        }
    }

    let mut state = initial;
    let end = cfg.duration;
    let t_eps = 1e-12 * end.max(1.0);
    let mut last_written = 0u64;
    while state.t < end - t_eps {
        let t = state.t;
        let phase = cfg.phase_at(t + t_eps);
        let mut clipped;
        let (next, report, dt, loads, motion) = loop {
            let mut dt = ctrl.dt;
            clipped = false;
            for limit in [end, phase.until] {
                if t + dt > limit - t_eps && limit > t + t_eps {
                    dt = limit - t;
                    clipped = true;
                }
            }
            stepper.opts.dt = dt;
            let loads = sample_loads(&cfg.loads, &grid, t + dt, dt)?;
            let motion = cfg.phase_at(t + 0.5 * dt).motion.motion();
            let (next, report) = stepper.step(&state, &loads, &motion)?;
            if report.accepted {
                break (next, report, dt, loads, motion);
            }
            let why = report.failure.clone().unwrap_or_default();
            ctrl.dt = dt;
            ctrl.rejected(&why)?;
            traj.rejections += 1;
        };
        let step = traj.steps + 1;

        if cfg.output.audit {
            let rep = audit_step(&AuditInput {
                grid: &grid,
                params: &cfg.material,
                prev: &state,
                new: &next,
                loads: &loads,
                dt,
                motion,
                eps: cfg.eps,
                demag: stepper.demag.as_ref(),
            })?;
            if traj.audit_violation.is_none() {
                if let Some(v) = rep.violation(&cfg.audit) {
                    traj.audit_violation = Some(format!("step {step}: {v}"));
                }
            }
            let row = AuditRow { step, report: rep };
            if let Some(w) = writer.as_mut() {
                w.audit(&row)?;
            }
            traj.audits.push(row);
        }

        let row = SeriesRow::from_state(&grid, &cfg.material, &next, step, dt, &loads.h_ext, &report.energy_ledger_after)
            .with_dissipation(&report.dissipation, report.iterations);
        if let Some(w) = writer.as_mut() {
            w.series(&row)?;
            if cfg.output.snapshots && (step % cfg.output.every == 0 || next.t >= end - t_eps) {
                if last_written != step - 1 {
                    w.snapshot(&grid, &state, step - 1)?;
                }
                w.snapshot(&grid, &next, step)?;
                last_written = step;
            }
        }
        traj.series.push(row);
        traj.steps = step;
        state = next;
        if !clipped {
            ctrl.accepted();
        }
    }
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }
    traj.final_state = state;
    Ok(traj)
}

#[cfg(test)]
mod tests;
