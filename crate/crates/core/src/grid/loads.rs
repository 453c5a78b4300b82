//! Time-dependent external data and its per-step sampling.

use super::{Face, Grid};
use crate::error::{Error, Result};
use crate::tensor::{Mat2, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarSchedule {
    Constant { value: f64 },
    Linear { start: f64, rate: f64 },
    /// Piecewise linear through `(times[i], values[i])`; undefined outside.
    Table { times: Vec<f64>, values: Vec<f64> },
    Sine { offset: f64, amplitude: f64, period: f64, phase: f64 },
}

impl ScalarSchedule {
    pub fn constant(value: f64) -> Self {
        ScalarSchedule::Constant { value }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            ScalarSchedule::Constant { value } => Ok(*value),
            ScalarSchedule::Linear { start, rate } => Ok(start + rate * t),
            ScalarSchedule::Table { times, values } => table_eval(times, values, t),
            ScalarSchedule::Sine { offset, amplitude, period, phase } => {
                Ok(offset + amplitude * (std::f64::consts::TAU * t / period + phase).sin())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarSchedule::Table { times, values } => validate_table(times, values.len()),
            ScalarSchedule::Sine { period, .. } if !(*period > 0.0) => {
                Err(Error::config("sine schedule needs a positive period"))
            }
            _ => Ok(()),
        }
    }

    /// Lower bound of the schedule over `[t0, t1]`, used for sign checks.
    pub fn min_over(&self, t0: f64, t1: f64) -> Result<f64> {
        match self {
            ScalarSchedule::Constant { value } => Ok(*value),
            ScalarSchedule::Linear { .. } => Ok(self.eval(t0)?.min(self.eval(t1)?)),
            ScalarSchedule::Table { times, values } => {
                let mut lo = self.eval(t0)?.min(self.eval(t1)?);
                for (t, v) in times.iter().zip(values) {
                    if *t >= t0 && *t <= t1 {
                        lo = lo.min(*v);
                    }
                }
                Ok(lo)
            }
            ScalarSchedule::Sine { offset, amplitude, .. } => Ok(offset - amplitude.abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorSchedule {
    Constant { value: [f64; 2] },
    Linear { start: [f64; 2], rate: [f64; 2] },
    Table { times: Vec<f64>, values: Vec<[f64; 2]> },
    /// Fixed direction (radians from the x axis) with a scalar magnitude schedule.
    Directed { angle: f64, magnitude: ScalarSchedule },
}

impl VectorSchedule {
    pub fn constant(x: f64, y: f64) -> Self {
        VectorSchedule::Constant { value: [x, y] }
    }

    pub fn zero() -> Self {
        Self::constant(0.0, 0.0)
    }

    pub fn eval(&self, t: f64) -> Result<Vec2> {
        match self {
            VectorSchedule::Constant { value } => Ok(Vec2(*value)),
            VectorSchedule::Linear { start, rate } => {
                Ok(Vec2::new(start[0] + rate[0] * t, start[1] + rate[1] * t))
            }
            VectorSchedule::Table { times, values } => {
                let xs: Vec<f64> = values.iter().map(|v| v[0]).collect();
                let ys: Vec<f64> = values.iter().map(|v| v[1]).collect();
                Ok(Vec2::new(table_eval(times, &xs, t)?, table_eval(times, &ys, t)?))
            }
            VectorSchedule::Directed { angle, magnitude } => {
                let s = magnitude.eval(t)?;
                Ok(Vec2::new(s * angle.cos(), s * angle.sin()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            VectorSchedule::Table { times, values } => validate_table(times, values.len()),
            VectorSchedule::Directed { magnitude, .. } => magnitude.validate(),
            _ => Ok(()),
        }
    }
}

fn validate_table(times: &[f64], n: usize) -> Result<()> {
    if times.is_empty() || times.len() != n {
        return Err(Error::config("table schedule needs matching, nonempty times and values"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config("table schedule times must be strictly increasing"));
    }
    Ok(())
}

fn table_eval(times: &[f64], values: &[f64], t: f64) -> Result<f64> {
    let tol = 1e-9 * (1.0 + times.last().copied().unwrap_or(0.0).abs());
    let (first, last) = match (times.first(), times.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::Scenario("empty table schedule".into())),
    };
    if t < first - tol || t > last + tol {
        return Err(Error::Scenario(format!(
            "schedule undefined at t = {t} (table covers [{first}, {last}])"
        )));
    }
    if times.len() == 1 || t <= first {
        return Ok(values[0]);
    }
    if t >= last {
        return Ok(values[values.len() - 1]);
    }
    let k = times.partition_point(|&s| s <= t).max(1) - 1;
    let s = (t - times[k]) / (times[k + 1] - times[k]);
    Ok(values[k] + s * (values[k + 1] - values[k]))
}

/// Robin-type temperature control through the boundary:
/// `j = coefficient * (target(t) - theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thermostat {
    pub target: ScalarSchedule,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Loads {
    pub g: [f64; 2],
    /// Spatially uniform part of the external field.
    pub h_ext: VectorSchedule,
    /// Constant spatial gradient of the external field, about the domain center.
    #[serde(default)]
    pub h_ext_gradient: [[f64; 2]; 2],
    /// Prescribed inward boundary heat flux per face, in `Face::ALL` order.
    #[serde(default = "zero_fluxes")]
    pub j_ext: [ScalarSchedule; 4],
    #[serde(default)]
    pub thermostat: Option<Thermostat>,
}

fn zero_fluxes() -> [ScalarSchedule; 4] {
    std::array::from_fn(|_| ScalarSchedule::constant(0.0))
}

impl Default for Loads {
    fn default() -> Self {
        Loads {
            g: [0.0, 0.0],
            h_ext: VectorSchedule::zero(),
            h_ext_gradient: [[0.0; 2]; 2],
            j_ext: zero_fluxes(),
            thermostat: None,
        }
    }
}

/// Load values frozen for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSample {
    pub g: Vec2,
    pub h_ext: Vec<Vec2>,
    pub dh_ext_dt: Vec<Vec2>,
    pub grad_h_ext: Mat2,
    pub j_ext: [f64; 4],
    /// `(target temperature, coefficient)` when a thermostat is active.
    pub thermostat: Option<(f64, f64)>,
}

impl LoadSample {
    pub fn zero(grid: &Grid) -> Self {
        LoadSample {
            g: Vec2::ZERO,
            h_ext: vec![Vec2::ZERO; grid.len()],
            dh_ext_dt: vec![Vec2::ZERO; grid.len()],
            grad_h_ext: Mat2::ZERO,
            j_ext: [0.0; 4],
            thermostat: None,
        }
    }
}

impl Loads {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        self.h_ext.validate()?;
        for (f, j) in Face::ALL.iter().zip(self.j_ext.iter()) {
            j.validate()?;
            let lo = j.min_over(0.0, horizon)?;
            if lo < 0.0 {
                return Err(Error::config(format!(
                    "boundary heat flux on {f:?} reaches {lo}; j_ext must be >= 0"
                )));
            }
        }
        if let Some(th) = &self.thermostat {
            th.target.validate()?;
            if !(th.coefficient >= 0.0) {
                return Err(Error::config("thermostat coefficient must be >= 0"));
            }
        }
        Ok(())
    }

    fn field_at(&self, grid: &Grid, t: f64) -> Result<Vec<Vec2>> {
        let base = self.h_ext.eval(t)?;
        let gmat = Mat2(self.h_ext_gradient);
        let c0 = grid.domain_center();
        Ok((0..grid.len())
            .map(|c| {
                let x = grid.center(c);
                base + gmat.apply(Vec2::new(x[0] - c0[0], x[1] - c0[1]))
            })
            .collect())
    }
}

/// Per-step load values at time `t`, with the backward difference of `h_ext`.
pub fn sample_loads(loads: &Loads, grid: &Grid, t: f64, dt: f64) -> Result<LoadSample> {
    if !(dt > 0.0) {
        return Err(Error::Scenario(format!("time step must be positive, got {dt}")));
    }
    let h = loads.field_at(grid, t)?;
    let h_prev = loads.field_at(grid, (t - dt).max(0.0))?;
    let back = t - (t - dt).max(0.0);
    let dh = h
        .iter()
        .zip(&h_prev)
        .map(|(a, b)| if back > 0.0 { (*a - *b) * (1.0 / back) } else { Vec2::ZERO })
        .collect();
    let mut j = [0.0; 4];
    for (k, s) in loads.j_ext.iter().enumerate() {
        let v = s.eval(t)?;
        if v < 0.0 {
            return Err(Error::Scenario(format!(
                "boundary heat flux {v} < 0 at t = {t}; j_ext must be >= 0"
            )));
        }
        j[k] = v;
    }
    let thermostat = match &loads.thermostat {
        Some(th) => Some((th.target.eval(t)?, th.coefficient)),
        None => None,
    };
    Ok(LoadSample {
        g: Vec2(loads.g),
        h_ext: h,
        dh_ext_dt: dh,
        grad_h_ext: Mat2(loads.h_ext_gradient),
        j_ext: j,
        thermostat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn constant_field_has_zero_rate() {
        let g = Grid::material_point();
        let loads = Loads { h_ext: VectorSchedule::constant(2.0, -1.0), ..Loads::default() };
        let s = sample_loads(&loads, &g, 1.0, 0.1).unwrap();
        assert_eq!(s.dh_ext_dt[0], Vec2::ZERO);
        assert_eq!(s.h_ext[0], Vec2::new(2.0, -1.0));
    }

    #[test]
    fn linear_ramp_rate() {
        let g = Grid::material_point();
        let loads = Loads {
            h_ext: VectorSchedule::Linear { start: [0.0, 0.0], rate: [3.0, 0.0] },
            ..Loads::default()
        };
        let s = sample_loads(&loads, &g, 2.0, 0.25).unwrap();
        assert!((s.dh_ext_dt[0].0[0] - 3.0).abs() < 1e-12);
        assert_eq!(s.dh_ext_dt[0].0[1], 0.0);
    }

    #[test]
    fn negative_flux_rejected() {
        let g = Grid::material_point();
        let mut loads = Loads::default();
        loads.j_ext[0] = ScalarSchedule::constant(-1.0);
        assert!(sample_loads(&loads, &g, 0.5, 0.1).is_err());
        assert!(loads.validate(1.0).is_err());
        loads.j_ext[0] = ScalarSchedule::Linear { start: 1.0, rate: -1.0 };
        assert!(loads.validate(0.5).is_ok());
        assert!(loads.validate(2.0).is_err());
    }

    #[test]
    fn table_outside_range_is_scenario_error() {
        let s = ScalarSchedule::Table { times: vec![0.0, 1.0], values: vec![0.0, 2.0] };
        assert!((s.eval(0.25).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(s.eval(1.5), Err(Error::Scenario(_))));
    }

    #[test]
    fn field_gradient_about_center() {
        let g = make_grid(2, &[2.0, 2.0], &[2, 2], 2).unwrap();
        let loads = Loads { h_ext_gradient: [[1.0, 0.0], [0.0, 0.0]], ..Loads::default() };
        let s = sample_loads(&loads, &g, 0.0, 0.1).unwrap();
        assert_eq!(s.h_ext[0], Vec2::new(-0.5, 0.0));
        assert_eq!(s.h_ext[1], Vec2::new(0.5, 0.0));
    }
}
