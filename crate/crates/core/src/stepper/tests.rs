use super::*;
use crate::constitutive::ThetaProfile;

fn point_stepper(dt: f64) -> Stepper {
    let mut p = MaterialParams::reference();
    p.varkappa = 0.0;
    Stepper::new(Grid::material_point(), p, StepOptions::new(dt), None).unwrap()
}

fn state_at(st: &Stepper, theta: f64) -> FieldState {
    let mut s = FieldState::zeros(&st.grid);
    s.w = vec![st.params.thermal.gamma(theta)];
    s
}

#[test]
fn resting_state_is_a_fixed_point() {
    let st = point_stepper(0.1);
    let s0 = state_at(&st, 0.5);
    let loads = LoadSample::zero(&st.grid);
    let (s1, rep) = st.step(&s0, &loads, &Motion::Affine(Mat2::ZERO)).unwrap();
    assert!(rep.accepted, "{:?}", rep.failure);
    assert!((s1.w[0] - s0.w[0]).abs() < 1e-12);
    assert!(s1.ee[0].max_abs() < 1e-15 && s1.m[0].norm() < 1e-15);
}

#[test]
fn previous_state_is_not_a_solution_under_load() {
    let mut p = MaterialParams::reference();
    p.varkappa = 0.0;
    let g = crate::grid::make_grid(1, &[1.0], &[6], 2).unwrap();
    let st = Stepper::new(g, p, StepOptions::new(0.01), None).unwrap();
    let mut s0 = FieldState::zeros(&st.grid);
    s0.w = vec![st.params.thermal.gamma(0.5); st.grid.len()];
    let mut loads = LoadSample::zero(&st.grid);
    loads.g = Vec2::new(1.0, 0.0);
    let (res, _) = st.residuals(&s0, &s0, &loads, &Motion::Dynamic).unwrap();
    assert!(res.momentum > 0.1);
}

#[test]
fn stress_driven_point_balances_prescribed_stress() {
    let st = point_stepper(0.05);
    let s0 = state_at(&st, 0.5);
    let sigma = Mat2::new(0.0, 0.3, 0.3, 0.0);
    let loads = LoadSample::zero(&st.grid);
    let (s1, rep) = st.step(&s0, &loads, &Motion::Stress(sigma)).unwrap();
    assert!(rep.accepted, "{:?}", rep.failure);
    let (res, _) = st.residuals(&s1, &s0, &loads, &Motion::Stress(sigma)).unwrap();
    assert!(res.momentum < 1e-12);
    assert!(s1.ee[0].0[0][1] > 0.0);
}

#[test]
fn viscous_magnetization_converges_in_coupled_step() {
    let mut st = point_stepper(0.05);
    st.params.h_c_high = 0.0;
    st.params.h_c_low = 0.0;
    st.params.tau_c = ThetaProfile::constant(0.2);
    let s0 = state_at(&st, 0.5);
    let mut loads = LoadSample::zero(&st.grid);
    loads.h_ext = vec![Vec2::new(0.3, 0.0)];
    let (s1, rep) = st.step(&s0, &loads, &Motion::Affine(Mat2::ZERO)).unwrap();
    assert!(rep.accepted, "{:?}", rep.failure);
    assert!(s1.m[0][0] > 0.0 && rep.dissipation.magnetic > 0.0);
}

#[test]
fn dt_controller_halves_and_grows() {
    let mut c = DtController { dt: 0.1, dt_min: 0.02, dt_max: 0.1, growth: 1.2 };
    c.rejected("x").unwrap();
    assert_eq!(c.dt, 0.05);
    c.accepted();
    assert!((c.dt - 0.06).abs() < 1e-15);
    c.rejected("x").unwrap();
    assert!(c.rejected("x").is_err());
}

/// Worst per-step total-energy residual and inequality residual of a coupled
/// material-point run (shear, field ramp, thermostat cooling).
fn coupled_point_audit(dt: f64) -> (f64, f64) {
    use crate::energetics::{audit_step, AuditInput};
    let mut p = MaterialParams::reference();
    p.varkappa = 0.0;
    p.h_c_high = 0.05;
    p.h_c_low = 0.05;
    p.tau_c = ThetaProfile::constant(0.1);
    let st = Stepper::new(Grid::material_point(), p, StepOptions::new(dt), None).unwrap();
    let mut s = state_at(&st, 0.9);
    s.m = vec![Vec2::new(0.1, 0.05)];
    let motion = Motion::Affine(Mat2::new(0.0, 0.3, 0.1, 0.0));
    let (mut r_tot, mut ineq) = (0.0_f64, f64::NEG_INFINITY);
    let steps = (0.4 / dt).round() as usize;
    for k in 0..steps {
        let mut loads = LoadSample::zero(&st.grid);
        let t = (k + 1) as f64 * dt;
        loads.h_ext = vec![Vec2::new(0.5 * t, 0.1)];
        loads.dh_ext_dt = vec![Vec2::new(0.5, 0.0)];
        loads.thermostat = Some((0.7, 50.0));
        let (s1, rep) = st.step(&s, &loads, &motion).unwrap();
        assert!(rep.accepted, "{:?}", rep.failure);
        let a = audit_step(&AuditInput {
            grid: &st.grid,
            params: &st.params,
            prev: &s,
            new: &s1,
            loads: &loads,
            dt,
            motion,
            eps: 0.0,
            demag: None,
        })
        .unwrap();
        assert!((a.r_tot - a.r_mech).abs() < 1e-9 * a.total_energy, "heat equation absorbs xi exactly");
        r_tot = r_tot.max(a.r_tot.abs());
        ineq = ineq.max(a.inequality);
        s = s1;
    }
    (r_tot, ineq)
}

#[test]
fn coupled_point_balance_closes_at_second_order_per_step() {
    let (r1, i1) = coupled_point_audit(0.02);
    let (r2, i2) = coupled_point_audit(0.01);
    let ratio = r1 / r2;
    assert!((3.5..4.5).contains(&ratio), "{r1:.3e} {r2:.3e}");
    assert!(i1 <= 0.0 && i2 <= 0.0, "{i1} {i2}");
}

/// Energy residual of the first step of a gravity-driven 2D flow with a hot,
/// magnetized blob, starting from rest.
fn dynamic_first_step(dt: f64) -> (f64, f64, f64) {
    use crate::energetics::{audit_step, AuditInput};
    let mut p = MaterialParams::reference();
    p.nu1 = 0.1;
    p.nu2 = 1e-3;
    p.varkappa = 0.01;
    p.kappa = 0.01;
    p.tau_c = ThetaProfile::constant(0.1);
    p.buoyancy = Some(crate::constitutive::Buoyancy { beta: 0.5, theta_ref: 0.5 });
    p.thermal = crate::constitutive::ThermalLaw::Canonical { c_v: 1.0 };
    let g = crate::grid::make_grid(2, &[1.0, 1.0], &[10, 10], 2).unwrap();
    let st = Stepper::new(g, p, StepOptions::new(dt), Some(DemagSolver::new())).unwrap();
    let mut s = FieldState::zeros(&st.grid);
    for c in 0..st.grid.len() {
        let [x, y] = st.grid.center(c);
        let r2 = (x - 0.5).powi(2) + (y - 0.5).powi(2);
        s.w[c] = st.params.thermal.gamma(0.5 + 0.1 * (-r2 / 0.02).exp());
        s.m[c] = Vec2::new(0.3 * (-r2 / 0.05).exp(), 0.0);
    }
    s.u = st.solve_demag(&s.m).unwrap().u;
    let mut loads = LoadSample::zero(&st.grid);
    loads.g = Vec2::new(0.0, -1.0);
    let (s1, rep) = st.step(&s, &loads, &Motion::Dynamic).unwrap();
    assert!(rep.accepted, "{:?}", rep.failure);
    let a = audit_step(&AuditInput {
        grid: &st.grid,
        params: &st.params,
        prev: &s,
        new: &s1,
        loads: &loads,
        dt,
        motion: Motion::Dynamic,
        eps: 0.0,
        demag: st.demag.as_ref(),
    })
    .unwrap();
    assert!((a.r_tot - a.r_mech).abs() < 1e-12);
    (a.r_tot, a.inequality, a.kinetic)
}

#[test]
fn dynamic_step_gap_is_second_order_and_dissipative() {
    let (r1, i1, k1) = dynamic_first_step(0.01);
    let (r2, i2, _) = dynamic_first_step(0.005);
    assert!((3.5..4.5).contains(&(r1 / r2)), "{r1:.3e} {r2:.3e}");
    assert!(i1 <= 0.0 && i2 <= 0.0);
    // From rest the gap is the implicit Euler kinetic loss.
    assert!((r1 + k1).abs() < 0.05 * k1, "{r1:.3e} {k1:.3e}");
}
