//! Material laws: stored energies, dissipation potentials, viscosities and
//! the enthalpy transform.

use crate::error::{Error, Result};
use crate::kinematics::dev;
use crate::tensor::{Mat2, Vec2};
use serde::{Deserialize, Serialize};

/// Temperature-dependent coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaProfile {
    Constant { value: f64 },
    /// Logistic step from `below` to `above` centered at `theta` with the given width.
    Step { below: f64, above: f64, theta: f64, width: f64 },
}

impl ThetaProfile {
    pub fn constant(value: f64) -> Self {
        ThetaProfile::Constant { value }
    }

    pub fn eval(&self, th: f64) -> f64 {
        match self {
            ThetaProfile::Constant { value } => *value,
            ThetaProfile::Step { below, above, theta, width } => {
                below + (above - below) * logistic(th - theta, *width)
            }
        }
    }

    fn lower_bound(&self) -> f64 {
        match self {
            ThetaProfile::Constant { value } => *value,
            ThetaProfile::Step { below, above, .. } => below.min(*above),
        }
    }
}

/// Smooth step from 0 to 1; a zero width gives the sharp Heaviside step.
fn logistic(x: f64, width: f64) -> f64 {
    if width <= 0.0 {
        return if x < 0.0 { 0.0 } else if x > 0.0 { 1.0 } else { 0.5 };
    }
    let z = x / width;
    if z > 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Buoyancy factor `b(theta) = beta (theta - theta_ref)` scaling gravity by `1 - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Buoyancy {
    pub beta: f64,
    pub theta_ref: f64,
}

impl Buoyancy {
    pub fn b(&self, theta: f64) -> f64 {
        self.beta * (theta - self.theta_ref)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThermalLaw {
    /// `phi(theta) = c_v theta (ln theta - 1)`: constant capacity, `w = c_v theta`.
    Canonical { c_v: f64 },
    /// Capacity `c(theta) = c_v theta^2 / (theta^2 + theta_d^2)`, vanishing at zero temperature.
    Saturating { c_v: f64, theta_d: f64 },
}

impl ThermalLaw {
    pub fn c_v(&self) -> f64 {
        match self {
            ThermalLaw::Canonical { c_v } | ThermalLaw::Saturating { c_v, .. } => *c_v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ThermalLaw::Canonical { c_v } if *c_v > 0.0 => Ok(()),
            ThermalLaw::Saturating { c_v, theta_d } if *c_v > 0.0 && *theta_d > 0.0 => Ok(()),
            _ => Err(Error::config("thermal law needs positive coefficients")),
        }
    }

    pub fn phi(&self, th: f64) -> f64 {
        match *self {
            ThermalLaw::Canonical { c_v } => {
                if th <= 0.0 {
                    0.0
                } else {
                    c_v * th * (th.ln() - 1.0)
                }
            }
            ThermalLaw::Saturating { c_v, theta_d: a } => {
                let th = th.max(0.0);
                0.5 * c_v * (th * ((th * th + a * a) / (a * a)).ln() - 2.0 * th + 2.0 * a * (th / a).atan())
            }
        }
    }

    /// `phi'(theta)`, the thermal part of the entropy.
    pub fn dphi(&self, th: f64) -> Result<f64> {
        match *self {
            ThermalLaw::Canonical { c_v } => {
                if th > 0.0 {
                    Ok(c_v * th.ln())
                } else {
                    Err(Error::Thermodynamic(format!(
                        "entropy undefined at temperature {th} for the canonical law"
                    )))
                }
            }
            ThermalLaw::Saturating { c_v, theta_d: a } => {
                let th = th.max(0.0);
                Ok(0.5 * c_v * ((th * th + a * a) / (a * a)).ln())
            }
        }
    }

    /// Heat capacity `theta phi''(theta)`.
    pub fn capacity(&self, th: f64) -> f64 {
        match *self {
            ThermalLaw::Canonical { c_v } => c_v,
            ThermalLaw::Saturating { c_v, theta_d: a } => c_v * th * th / (th * th + a * a),
        }
    }

    /// Enthalpy `w = gamma(theta) = theta phi'(theta) - phi(theta)`.
    pub fn gamma(&self, th: f64) -> f64 {
        let th = th.max(0.0);
        match *self {
            ThermalLaw::Canonical { c_v } => c_v * th,
            ThermalLaw::Saturating { c_v, theta_d: a } => c_v * (th - a * (th / a).atan()),
        }
    }

    pub fn gamma_inv(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        match *self {
            ThermalLaw::Canonical { c_v } => w / c_v,
            ThermalLaw::Saturating { c_v, theta_d: a } => {
                // gamma is convex and increasing: Newton from above converges monotonically.
                let mut th = w / c_v + a * std::f64::consts::FRAC_PI_2;
                for _ in 0..100 {
                    let f = self.gamma(th) - w;
                    let d = c_v * th * th / (th * th + a * a);
                    if d <= 0.0 {
                        break;
                    }
                    let next = (th - f / d).max(0.5 * th);
                    if (next - th).abs() <= 1e-15 * th {
                        th = next;
                        break;
                    }
                    th = next;
                }
                th
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    pub rho: f64,
    pub k_e: f64,
    pub g_e: f64,
    pub a0: f64,
    pub b0: f64,
    pub theta_c: f64,
    pub theta_b: f64,
    pub h_c_high: f64,
    pub h_c_low: f64,
    pub h_c_width: f64,
    pub tau_c: ThetaProfile,
    pub eps_reg: f64,
    /// Rate threshold of the quadratic branch of the dissipation potential; `None` means no cap.
    #[serde(default)]
    pub m_r: Option<f64>,
    pub rate_exponent: f64,
    pub kappa: f64,
    pub varkappa: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub p: f64,
    pub mu0: f64,
    pub m_solid: f64,
    pub m_magma: f64,
    pub theta_melt: f64,
    pub melt_width: f64,
    pub k_cond: ThetaProfile,
    pub thermal: ThermalLaw,
    #[serde(default)]
    pub buoyancy: Option<Buoyancy>,
}

impl MaterialParams {
    /// Nondimensional reference material used by the shipped scenarios.
    pub fn reference() -> Self {
        MaterialParams {
            rho: 1.0,
            k_e: 2.0,
            g_e: 1.0,
            a0: 1.0,
            b0: 1.0,
            theta_c: 1.0,
            theta_b: 0.8,
            h_c_high: 0.05,
            h_c_low: 0.0,
            h_c_width: 0.0,
            tau_c: ThetaProfile::constant(0.0),
            eps_reg: 1e-6,
            m_r: None,
            rate_exponent: 4.0,
            kappa: 0.0,
            varkappa: 0.0,
            nu1: 0.0,
            nu2: 0.0,
            p: 5.0,
            mu0: 1.0,
            m_solid: 100.0,
            m_magma: 0.01,
            theta_melt: 1.5,
            melt_width: 0.1,
            k_cond: ThetaProfile::constant(1.0),
            thermal: ThermalLaw::Canonical { c_v: 1.0e4 },
            buoyancy: None,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let pos = [("rho", self.rho), ("mu0", self.mu0), ("m_magma", self.m_magma), ("m_solid", self.m_solid)];
        for (n, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{n} must be positive and finite, got {v}")));
            }
        }
        let nonneg = [
            ("k_e", self.k_e),
            ("g_e", self.g_e),
            ("a0", self.a0),
            ("kappa", self.kappa),
            ("varkappa", self.varkappa),
            ("nu1", self.nu1),
            ("nu2", self.nu2),
            ("h_c_high", self.h_c_high),
            ("h_c_low", self.h_c_low),
            ("h_c_width", self.h_c_width),
            ("eps_reg", self.eps_reg),
            ("melt_width", self.melt_width),
            ("theta_c", self.theta_c),
        ];
        for (n, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{n} must be nonnegative and finite, got {v}")));
            }
        }
        if !(self.b0 > 0.0) {
            return Err(Error::config("b0 must be positive"));
        }
        if !(self.p > dim as f64) || !(self.p > 1.0) {
            return Err(Error::config(format!("hyperstress exponent p = {} must exceed the dimension", self.p)));
        }
        if !(self.rate_exponent > 1.0) || !(self.rate_exponent < self.p) {
            return Err(Error::config(format!(
                "rate exponent {} must lie in (1, p)",
                self.rate_exponent
            )));
        }
        if let Some(mr) = self.m_r {
            if !(mr > 0.0) {
                return Err(Error::config("m_r must be positive"));
            }
        }
        if self.tau_c.lower_bound() < 0.0 {
            return Err(Error::Constitutive("tau_c must be nonnegative".into()));
        }
        if self.k_cond.lower_bound() < 0.0 {
            return Err(Error::config("heat conductivity must be nonnegative"));
        }
        self.thermal.validate()
    }

    // ---- mechanical stored energy ----

    pub fn phi_mech(&self, ee: Mat2, m: Vec2) -> f64 {
        let tr = ee.trace();
        let d = dev(ee);
        0.5 * self.k_e * tr * tr + self.g_e * d.norm_sq() + 0.5 * self.b0 * m.norm_sq() * m.norm_sq()
    }

    pub fn stress_elastic(&self, ee: Mat2) -> Mat2 {
        Mat2::scaled_identity(self.k_e * ee.trace()) + dev(ee) * (2.0 * self.g_e)
    }

    pub fn dphi_dm(&self, m: Vec2) -> Vec2 {
        m * (2.0 * self.b0 * m.norm_sq())
    }

    pub fn omega(&self, m: Vec2, theta: f64) -> f64 {
        self.a0 * (theta - self.theta_c) * m.norm_sq()
    }

    pub fn omega_hat(&self, m: Vec2) -> f64 {
        self.a0 * m.norm_sq()
    }

    pub fn omega_hat_prime(&self, m: Vec2) -> Vec2 {
        m * (2.0 * self.a0)
    }

    pub fn omega_eps(&self, m: Vec2, theta: f64, eps: f64) -> f64 {
        self.omega(m, theta) / (1.0 + eps * m.norm_sq())
    }

    pub fn omega_eps_hat(&self, m: Vec2, eps: f64) -> f64 {
        self.omega_hat(m) / (1.0 + eps * m.norm_sq())
    }

    pub fn omega_eps_hat_prime(&self, m: Vec2, eps: f64) -> Vec2 {
        let q = 1.0 + eps * m.norm_sq();
        m * (2.0 * self.a0 / (q * q))
    }

    /// `d omega_eps / d m`.
    pub fn omega_eps_m(&self, m: Vec2, theta: f64, eps: f64) -> Vec2 {
        let q = 1.0 + eps * m.norm_sq();
        m * (2.0 * self.a0 * (theta - self.theta_c) / (q * q))
    }

    /// Anisotropy part of the driving field, `-(phi'_m + [omega_eps]'_m) / mu0`.
    pub fn h_anisotropy(&self, m: Vec2, theta: f64, eps: f64) -> Vec2 {
        (self.dphi_dm(m) + self.omega_eps_m(m, theta, eps)) * (-1.0 / self.mu0)
    }

    pub fn m_sat(&self, theta: f64) -> f64 {
        if theta >= self.theta_c {
            0.0
        } else {
            (self.a0 * (self.theta_c - theta) / self.b0).sqrt()
        }
    }

    // ---- dissipation ----

    pub fn h_c(&self, theta: f64) -> f64 {
        self.h_c_high + (self.h_c_low - self.h_c_high) * logistic(theta - self.theta_b, self.h_c_width)
    }

    pub fn tau_c_at(&self, theta: f64) -> f64 {
        self.tau_c.eval(theta)
    }

    pub fn dissipation(&self, theta: f64) -> Dissipation {
        Dissipation {
            h_c: self.h_c(theta),
            eps: self.eps_reg,
            q: self.rate_exponent,
            tau_c: self.tau_c_at(theta),
            m_r: self.m_r.unwrap_or(f64::INFINITY),
        }
    }

    pub fn zeta(&self, theta: f64, mdot: Vec2) -> f64 {
        self.dissipation(theta).value(mdot.norm())
    }

    pub fn zeta_resolvent(&self, theta: f64, h_eff: Vec2) -> Result<Vec2> {
        self.dissipation(theta).resolvent(h_eff)
    }

    pub fn maxwell_viscosity(&self, theta: f64) -> f64 {
        let lo = self.theta_melt - 0.5 * self.melt_width;
        let s = if self.melt_width <= 0.0 {
            if theta < self.theta_melt { 0.0 } else if theta > self.theta_melt { 1.0 } else { 0.5 }
        } else {
            ((theta - lo) / self.melt_width).clamp(0.0, 1.0)
        };
        if s <= 0.0 {
            self.m_solid
        } else if s >= 1.0 {
            self.m_magma
        } else {
            (self.m_solid.ln() + s * (self.m_magma.ln() - self.m_solid.ln())).exp()
        }
    }

    pub fn conductivity(&self, theta: f64) -> f64 {
        self.k_cond.eval(theta)
    }

    /// `phi'(theta) - omega_hat(m)`.
    pub fn entropy_density(&self, m: Vec2, theta: f64) -> Result<f64> {
        Ok(self.thermal.dphi(theta)? - self.omega_hat(m))
    }
}

/// Radially symmetric dissipation potential
/// `zeta(r) = h_c |r| + eps |r|^q + tau_c huber(|r|)`, where `huber(s) = s^2`
/// below the threshold `m_r` and its tangent line above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    pub h_c: f64,
    pub eps: f64,
    pub q: f64,
    pub tau_c: f64,
    pub m_r: f64,
}

impl Dissipation {
    fn huber(&self, s: f64) -> f64 {
        if s <= self.m_r {
            s * s
        } else {
            2.0 * self.m_r * s - self.m_r * self.m_r
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.h_c * s + self.eps * s.powf(self.q) + self.tau_c * self.huber(s)
    }

    /// Radial derivative for `s > 0`.
    pub fn slope(&self, s: f64) -> f64 {
        self.h_c + self.eps * self.q * s.powf(self.q - 1.0) + 2.0 * self.tau_c * s.min(self.m_r)
    }

    /// Radial second derivative for `s > 0`.
    pub fn curvature(&self, s: f64) -> f64 {
        let c = self.eps * self.q * (self.q - 1.0) * s.powf(self.q - 2.0);
        if s < self.m_r { c + 2.0 * self.tau_c } else { c }
    }

    /// `d zeta(r) . r`, single-valued even where the subdifferential is not.
    pub fn power(&self, s: f64) -> f64 {
        if s == 0.0 { 0.0 } else { self.slope(s) * s }
    }

    pub fn strictly_convex(&self) -> bool {
        self.h_c >= 0.0 && self.eps >= 0.0 && self.tau_c >= 0.0 && self.q > 1.0
            && (self.eps > 0.0 || self.tau_c > 0.0)
    }

    /// Unique `r` with `h in d zeta(r)`.
    pub fn resolvent(&self, h: Vec2) -> Result<Vec2> {
        if !self.strictly_convex() {
            return Err(Error::Constitutive(format!(
                "dissipation potential is not strictly convex ({self:?})"
            )));
        }
        let hn = h.norm();
        if hn <= self.h_c {
            return Ok(Vec2::ZERO);
        }
        let s = self.radial_root(hn)?;
        Ok(h * (s / hn))
    }

    /// Proximal map of `c zeta`: the minimizer of `c zeta(r) + |r - y|^2 / 2`.
    pub fn prox(&self, y: Vec2, c: f64) -> Vec2 {
        let yn = y.norm();
        if yn <= c * self.h_c {
            return Vec2::ZERO;
        }
        // s + c slope(s) = |y| has a unique root in (0, |y|).
        let (mut lo, mut hi) = (0.0, yn);
        let mut s = 0.5 * yn;
        for _ in 0..200 {
            let f = s + c * self.slope(s) - yn;
            if f.abs() <= 1e-16 * yn {
                break;
            }
            if f > 0.0 { hi = s } else { lo = s }
            if hi - lo <= 1e-16 * yn {
                break;
            }
            let newton = s - f / (1.0 + c * self.curvature(s));
            s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        y * (s / yn)
    }

    /// Solve `slope(s) = target` for `s > 0`, given `target > h_c`.
    fn radial_root(&self, target: f64) -> Result<f64> {
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut k = 0;
        while self.slope(hi) < target {
            hi *= 2.0;
            k += 1;
            if k > 2000 || !hi.is_finite() {
                return Err(Error::Constitutive(format!(
                    "driving field {target} exceeds the range of the dissipation subdifferential"
                )));
            }
        }
        let mut s = 0.5 * hi;
        for _ in 0..200 {
            let f = self.slope(s) - target;
            if f.abs() <= 1e-15 * target {
                break;
            }
            if f > 0.0 { hi = s } else { lo = s }
            if hi - lo <= 1e-15 * hi {
                break;
            }
            let d = self.curvature(s);
            let newton = if d > 0.0 { s - f / d } else { f64::NAN };
            s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        Ok(s)
    }
}
