//! Elastic/inelastic strain block: the additive split of the strain rate and
//! the inelastic flow rule `M R = dev S_E + varkappa lap R`.

use crate::constitutive::MaterialParams;
use crate::grid::stencil::{laplacian_diagonal, upwind_weights};
use crate::grid::{Grid, Neighbor};
use crate::kinematics::{dev, spin, strain_rate};
use crate::linalg::solve_dense;
use crate::tensor::{Mat2, Vec2};

/// Solve `a X + (X W - W X) + beta dev X = rhs` for symmetric `X`, with
/// `W = [[0, -w], [w, 0]]`.
pub fn solve_corotated(a: f64, w: f64, beta: f64, rhs: Mat2) -> Mat2 {
    // unknowns (X00, X11, X01)
    let hb = 0.5 * beta;
    let m = [
        [a + hb, -hb, 2.0 * w],
        [-hb, a + hb, -2.0 * w],
        [-w, w, a + beta],
    ];
    let s = 0.5 * (rhs.0[0][1] + rhs.0[1][0]);
    let x = solve_dense(m, [rhs.0[0][0], rhs.0[1][1], s]).expect("corotated strain system is regular for a > 0");
    Mat2::new(x[0], x[2], x[2], x[1])
}

pub struct StrainInputs<'a> {
    pub grid: &'a Grid,
    pub params: &'a MaterialParams,
    pub dt: f64,
    pub v: &'a [Vec2],
    pub grad_v: &'a [Mat2],
    pub theta_prev: &'a [f64],
    pub ee_prev: &'a [Mat2],
    pub ep_prev: &'a [Mat2],
    /// Current iterates, used for the lagged neighbor couplings.
    pub ee: &'a [Mat2],
    pub ep: &'a [Mat2],
    pub r: &'a [Mat2],
}

pub struct StrainUpdate {
    pub ee: Vec<Mat2>,
    pub ep: Vec<Mat2>,
    pub r: Vec<Mat2>,
}

/// One sweep of the cell-local strain solves, with the strain rate `e`
/// taken from the velocity gradient unless `strain_override` is given
/// (used by the stress-driven material point).
pub fn strain_sweep(inp: &StrainInputs, strain_override: Option<Mat2>) -> StrainUpdate {
    let grid = inp.grid;
    let n = grid.len();
    let mut out = StrainUpdate { ee: Vec::with_capacity(n), ep: Vec::with_capacity(n), r: Vec::with_capacity(n) };
    for c in 0..n {
        let e = strain_override.unwrap_or_else(|| strain_rate(inp.grad_v[c]));
        let (ee, ep, r) = strain_cell(inp, c, e);
        out.ee.push(ee);
        out.ep.push(ep);
        out.r.push(r);
    }
    out
}

/// Cell-local strain solve for a given strain rate `e`.
pub fn strain_cell(inp: &StrainInputs, c: usize, e: Mat2) -> (Mat2, Mat2, Mat2) {
    let grid = inp.grid;
    let p = inp.params;
    let inv = 1.0 / inp.dt;
    let (d, off) = upwind_weights(grid, inp.v, c);
    let w = spin(inp.grad_v[c]).0[1][0];
    let a = inv + d;
    let mut rhs_e = inp.ee_prev[c] * inv + e;
    let mut rhs_p = inp.ep_prev[c] * inv;
    for (k, wk) in &off {
        rhs_e -= inp.ee[*k] * *wk;
        rhs_p -= inp.ep[*k] * *wk;
    }
    let mut lap_off = Mat2::ZERO;
    for ax in 0..grid.dim.min(2) {
        let h2 = 1.0 / (grid.spacing[ax] * grid.spacing[ax]);
        for dir in [1, -1] {
            if let Neighbor::Cell(k) = grid.neighbor(c, ax, dir) {
                lap_off += inp.r[k] * h2;
            }
        }
    }
    let denom = p.maxwell_viscosity(inp.theta_prev[c]) + p.varkappa * laplacian_diagonal(grid, c);
    let beta = 2.0 * p.g_e / denom;
    let q = dev(lap_off) * (p.varkappa / denom);
    let ee = solve_corotated(a, w, beta, rhs_e - q);
    let r = dev(ee) * beta + q;
    let ep = dev(solve_corotated(a, w, 0.0, rhs_p + r));
    (ee, ep, r)
}

/// Solve the discrete split `Z(Ee) = E(v) - R` for `Ee` on the whole grid,
/// given the inelastic rate `R`. Upwind neighbor couplings are resolved by
/// Jacobi iteration, which contracts with factor `CFL / (1 + CFL)`.
pub fn green_naghdi_update(grid: &Grid, ee_prev: &[Mat2], r: &[Mat2], v: &[Vec2], grad_v: &[Mat2], dt: f64) -> Vec<Mat2> {
    let n = grid.len();
    let inv = 1.0 / dt;
    let mut ee = ee_prev.to_vec();
    for _ in 0..10_000 {
        let mut change = 0.0_f64;
        let mut next = Vec::with_capacity(n);
        for c in 0..n {
            let (d, off) = upwind_weights(grid, v, c);
            let mut rhs = ee_prev[c] * inv + strain_rate(grad_v[c]) - r[c];
            for (k, wk) in &off {
                rhs -= ee[*k] * *wk;
            }
            let x = solve_corotated(inv + d, spin(grad_v[c]).0[1][0], 0.0, rhs);
            change = change.max((x - ee[c]).max_abs());
            next.push(x);
        }
        ee = next;
        let scale = ee.iter().fold(1.0_f64, |a, x| a.max(x.max_abs()));
        if change <= 1e-15 * scale {
            break;
        }
    }
    ee
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::kinematics::corotation_tensor;
    use proptest::prelude::*;

    #[test]
    fn green_naghdi_examples() {
        let g = Grid::material_point();
        let e0 = vec![Mat2::new(0.1, 0.05, 0.05, -0.02)];
        let zero = vec![Mat2::ZERO];
        let same = green_naghdi_update(&g, &e0, &zero, &[Vec2::ZERO], &zero, 0.1);
        assert!((same[0] - e0[0]).max_abs() < 1e-15);

        let l = vec![Mat2::diag(0.3, -0.3)];
        let ext = green_naghdi_update(&g, &e0, &zero, &[Vec2::ZERO], &l, 0.1);
        assert!((ext[0] - (e0[0] + Mat2::diag(0.03, -0.03))).max_abs() < 1e-15);
    }

    #[test]
    fn rigid_rotation_preserves_eigenvalues_to_first_order() {
        let g = Grid::material_point();
        let e0 = Mat2::new(0.2, 0.0, 0.0, -0.1);
        let (dt, om) = (1e-3, 1.0);
        let l = vec![Mat2::rotation_rate(om)];
        let mut ee = vec![e0];
        for _ in 0..1000 {
            ee = green_naghdi_update(&g, &ee, &[Mat2::ZERO], &[Vec2::ZERO], &l, dt);
        }
        let x = ee[0];
        let disc = ((x.0[0][0] - x.0[1][1]).powi(2) + 4.0 * x.0[0][1].powi(2)).sqrt();
        let (l1, l2) = (0.5 * (x.trace() + disc), 0.5 * (x.trace() - disc));
        // The implicit corotation damps the deviatoric part by
        // (1 + (2 om dt)^2)^(-1/2) per step, a drift of 2 om^2 dt T |dev|.
        let bound = 3.0 * om * om * dt * 1.0 * 0.15;
        assert!((l1 - 0.2).abs() < bound && (l2 + 0.1).abs() < bound, "{l1} {l2}");
        // Rotated by one radian (the tensor rotates with the material).
        let q = Mat2::rotation(1.0);
        let exact = q.matmul(e0).matmul(q.transpose());
        assert!((x - exact).max_abs() < 5e-3, "{x:?} vs {exact:?}");
    }

    #[test]
    fn maxwell_step_is_exact_implicit_euler() {
        let g = Grid::material_point();
        let mut p = MaterialParams::reference();
        p.varkappa = 0.0;
        let m = p.maxwell_viscosity(0.5);
        let dt = 0.01;
        let ee0 = vec![Mat2::new(0.1, 0.02, 0.02, -0.1)];
        let zero = vec![Mat2::ZERO];
        let inp = StrainInputs {
            grid: &g,
            params: &p,
            dt,
            v: &[Vec2::ZERO],
            grad_v: &zero,
            theta_prev: &[0.5],
            ee_prev: &ee0,
            ep_prev: &zero,
            ee: &ee0,
            ep: &zero,
            r: &zero,
        };
        let up = strain_sweep(&inp, None);
        let factor = 1.0 / (1.0 + 2.0 * p.g_e * dt / m);
        assert!((up.ee[0] - ee0[0] * factor).max_abs() < 1e-15);
        assert!((up.ep[0] + up.ee[0] - ee0[0]).max_abs() < 1e-15);
        assert!(up.ep[0].trace().abs() < 1e-16);
    }

    #[test]
    fn corotated_solve_matches_definition() {
        let rhs = Mat2::new(0.3, -0.2, -0.2, 0.7);
        let (a, w, beta) = (5.0, 1.3, 0.8);
        let x = solve_corotated(a, w, beta, rhs);
        let back = x * a + corotation_tensor(Mat2::rotation_rate(w), x) + dev(x) * beta;
        assert!((back - rhs).max_abs() < 1e-14);
        assert!(x.asymmetry() == 0.0);
    }

    proptest! {
        #[test]
        fn strain_sweep_keeps_inelastic_strain_deviatoric(
            om in -2.0..2.0f64, sx in -1.0..1.0f64, sxy in -1.0..1.0f64, tr in -0.5..0.5f64,
            kap in 0.0..0.5f64,
        ) {
            let g = make_grid(2, &[1.0, 1.0], &[4, 4], 2).unwrap();
            let mut p = MaterialParams::reference();
            p.varkappa = kap;
            let n = g.len();
            let l = Mat2::new(sx + tr, sxy - om, sxy + om, -sx + tr);
            let grad_v = vec![l; n];
            let v = super::super::rates::affine_velocity(&g, l);
            let ee0: Vec<Mat2> = (0..n).map(|c| Mat2::new(0.01 * c as f64, 0.02, 0.02, -0.01)).collect();
            let ep0: Vec<Mat2> = (0..n).map(|c| Mat2::new(0.001 * c as f64, -0.01, -0.01, -0.001 * c as f64)).collect();
            let r0 = vec![Mat2::new(0.1, 0.0, 0.0, -0.1); n];
            let inp = StrainInputs {
                grid: &g, params: &p, dt: 0.05, v: &v, grad_v: &grad_v, theta_prev: &vec![0.5; n],
                ee_prev: &ee0, ep_prev: &ep0, ee: &ee0, ep: &ep0, r: &r0,
            };
            let up = strain_sweep(&inp, None);
            for c in 0..n {
                prop_assert!(up.ep[c].trace().abs() <= 1e-10);
                prop_assert!(up.ep[c].asymmetry() == 0.0 && up.ee[c].asymmetry() == 0.0);
                prop_assert!(up.r[c].trace().abs() <= 1e-12);
            }
        }
    }
}
