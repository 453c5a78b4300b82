//! Finite-difference kernels on the cell-centered grid.
//!
//! Two ghost conventions are used. Velocity ghosts reflect a slip wall: the
//! wall-normal component changes sign, tangential components are copied.
//! All other fields use even reflection, i.e. a zero normal derivative.
//! The divergence operators are built as exact negative adjoints of the
//! matching gradients, so discrete summation by parts holds to round-off.

use super::{Grid, Neighbor};
use crate::tensor::{Grad3, Mat2, Vec2};
use std::ops::{Add, Mul, Sub};

/// Values that can live in a cell: scalars, vectors and 2x2 tensors.
pub trait FieldValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn inner(&self, other: &Self) -> f64;
}

impl FieldValue for f64 {
    fn inner(&self, other: &f64) -> f64 {
        self * other
    }
}

impl FieldValue for Vec2 {
    fn inner(&self, other: &Vec2) -> f64 {
        self.dot(*other)
    }
}

impl FieldValue for Mat2 {
    fn inner(&self, other: &Mat2) -> f64 {
        self.ddot(*other)
    }
}

/// Neighbor value with even reflection at walls.
fn even<T: FieldValue>(f: &[T], n: Neighbor) -> T {
    match n {
        Neighbor::Cell(k) | Neighbor::Ghost(k, _) => f[k],
    }
}

/// Velocity ghost: component `a` is the wall-normal one when `n` is a ghost across axis `a`.
fn slip(v: &[Vec2], n: Neighbor, a: usize) -> Vec2 {
    match n {
        Neighbor::Cell(k) => v[k],
        Neighbor::Ghost(k, _) => {
            let mut g = v[k];
            g[a] = -g[a];
            g
        }
    }
}

/// Central-difference velocity gradient, `out[c][i][a] = d v_i / d x_a`.
pub fn grad_velocity(grid: &Grid, v: &[Vec2]) -> Vec<Mat2> {
    let mut out = vec![Mat2::ZERO; grid.len()];
    for a in 0..grid.dim.min(2) {
        let inv = 0.5 / grid.spacing[a];
        for (c, o) in out.iter_mut().enumerate() {
            let p = slip(v, grid.neighbor(c, a, 1), a);
            let m = slip(v, grid.neighbor(c, a, -1), a);
            let d = (p - m) * inv;
            o.0[0][a] = d[0];
            o.0[1][a] = d[1];
        }
    }
    out
}

/// Adjoint of [`grad_velocity`]: returns `y` with `sum_c y_c . v_c = sum_c S_c : (G v)_c`.
pub fn grad_velocity_adjoint(grid: &Grid, s: &[Mat2]) -> Vec<Vec2> {
    let mut out = vec![Vec2::ZERO; grid.len()];
    for a in 0..grid.dim.min(2) {
        let inv = 0.5 / grid.spacing[a];
        for c in 0..grid.len() {
            let col = Vec2::new(s[c].0[0][a], s[c].0[1][a]) * inv;
            for (dir, sign) in [(1, 1.0), (-1, -1.0)] {
                match grid.neighbor(c, a, dir) {
                    Neighbor::Cell(k) => out[k] += col * sign,
                    Neighbor::Ghost(k, _) => {
                        let mut g = col * sign;
                        g[a] = -g[a];
                        out[k] += g;
                    }
                }
            }
        }
    }
    out
}

/// Discrete divergence of a tensor field acting on velocities, `-G^T S`.
pub fn div_stress(grid: &Grid, s: &[Mat2]) -> Vec<Vec2> {
    grad_velocity_adjoint(grid, s).into_iter().map(|x| -x).collect()
}

/// Central-difference gradient of a tensor field with even ghosts.
pub fn grad_tensor(grid: &Grid, t: &[Mat2]) -> Vec<Grad3> {
    let mut out = vec![Grad3::ZERO; grid.len()];
    for a in 0..grid.dim.min(2) {
        let inv = 0.5 / grid.spacing[a];
        for (c, o) in out.iter_mut().enumerate() {
            let p = even(t, grid.neighbor(c, a, 1));
            let m = even(t, grid.neighbor(c, a, -1));
            o.0[a] = (p - m) * inv;
        }
    }
    out
}

/// Adjoint of [`grad_tensor`].
pub fn grad_tensor_adjoint(grid: &Grid, h: &[Grad3]) -> Vec<Mat2> {
    let mut out = vec![Mat2::ZERO; grid.len()];
    for a in 0..grid.dim.min(2) {
        let inv = 0.5 / grid.spacing[a];
        for c in 0..grid.len() {
            let x = h[c].0[a] * inv;
            for (dir, sign) in [(1, 1.0), (-1, -1.0)] {
                match grid.neighbor(c, a, dir) {
                    Neighbor::Cell(k) | Neighbor::Ghost(k, _) => out[k] += x * sign,
                }
            }
        }
    }
    out
}

/// Central-difference gradient of a vector field with even ghosts,
/// `out[c][i][a] = d m_i / d x_a`.
pub fn grad_neumann(grid: &Grid, m: &[Vec2]) -> Vec<Mat2> {
    let mut out = vec![Mat2::ZERO; grid.len()];
    for a in 0..grid.dim.min(2) {
        let inv = 0.5 / grid.spacing[a];
        for (c, o) in out.iter_mut().enumerate() {
            let d = (even(m, grid.neighbor(c, a, 1)) - even(m, grid.neighbor(c, a, -1))) * inv;
            o.0[0][a] = d[0];
            o.0[1][a] = d[1];
        }
    }
    out
}

/// Five-point Laplacian with zero normal derivative at the walls.
pub fn laplacian<T: FieldValue>(grid: &Grid, f: &[T]) -> Vec<T> {
    let mut out = vec![T::default(); grid.len()];
    for a in 0..grid.dim.min(2) {
        let inv = 1.0 / (grid.spacing[a] * grid.spacing[a]);
        for (c, o) in out.iter_mut().enumerate() {
            for dir in [1, -1] {
                if let Neighbor::Cell(k) = grid.neighbor(c, a, dir) {
                    *o = *o + (f[k] - f[c]) * inv;
                }
            }
        }
    }
    out
}

/// Diagonal weight of [`laplacian`] at cell `c` (the coefficient of `-f[c]`).
pub fn laplacian_diagonal(grid: &Grid, c: usize) -> f64 {
    let mut d = 0.0;
    for a in 0..grid.dim.min(2) {
        for dir in [1, -1] {
            if let Neighbor::Cell(_) = grid.neighbor(c, a, dir) {
                d += 1.0 / (grid.spacing[a] * grid.spacing[a]);
            }
        }
    }
    d
}

/// `sum over interior faces |f_n - f_c|^2 / h^2`, times the cell volume.
///
/// This is the quadratic form whose gradient is `-laplacian * volume`.
pub fn face_gradient_energy<T: FieldValue>(grid: &Grid, f: &[T]) -> f64 {
    let mut s = 0.0;
    for a in 0..grid.dim.min(2) {
        let inv = 1.0 / (grid.spacing[a] * grid.spacing[a]);
        for c in 0..grid.len() {
            if let Neighbor::Cell(k) = grid.neighbor(c, a, 1) {
                let d = f[k] - f[c];
                s += d.inner(&d) * inv;
            }
        }
    }
    s * grid.cell_volume()
}

/// First-order upwind `(v . grad) f` with zero-gradient ghosts.
pub fn upwind_advection<T: FieldValue>(grid: &Grid, v: &[Vec2], f: &[T]) -> Vec<T> {
    let mut out = vec![T::default(); grid.len()];
    for a in 0..grid.dim.min(2) {
        let inv = 1.0 / grid.spacing[a];
        for (c, o) in out.iter_mut().enumerate() {
            let va = v[c][a];
            if va > 0.0 {
                *o = *o + (f[c] - even(f, grid.neighbor(c, a, -1))) * (va * inv);
            } else if va < 0.0 {
                *o = *o + (even(f, grid.neighbor(c, a, 1)) - f[c]) * (va * inv);
            }
        }
    }
    out
}

/// Upwind stencil weights at one cell: `(v . grad f)_c = diag * f_c + sum (w_k * f_k)`.
pub fn upwind_weights(grid: &Grid, v: &[Vec2], c: usize) -> (f64, Vec<(usize, f64)>) {
    let mut diag = 0.0;
    let mut off = Vec::new();
    for a in 0..grid.dim.min(2) {
        let inv = 1.0 / grid.spacing[a];
        let va = v[c][a];
        if va > 0.0 {
            if let Neighbor::Cell(k) = grid.neighbor(c, a, -1) {
                diag += va * inv;
                off.push((k, -va * inv));
            }
        } else if va < 0.0 {
            if let Neighbor::Cell(k) = grid.neighbor(c, a, 1) {
                diag -= va * inv;
                off.push((k, va * inv));
            }
        }
    }
    (diag, off)
}

/// Normal velocity on each interior face, by averaging the two adjacent cells.
/// Returns `(lower cell, upper cell, axis, normal velocity)` per face; wall
/// faces carry no flux and are omitted.
pub fn face_velocities(grid: &Grid, v: &[Vec2]) -> Vec<(usize, usize, usize, f64)> {
    let mut faces = Vec::new();
    for a in 0..grid.dim.min(2) {
        for c in 0..grid.len() {
            if let Neighbor::Cell(k) = grid.neighbor(c, a, 1) {
                faces.push((c, k, a, 0.5 * (v[c][a] + v[k][a])));
            }
        }
    }
    faces
}

/// Conservative upwind `div(v w)` per unit cell volume.
pub fn flux_divergence(grid: &Grid, v: &[Vec2], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for (lo, hi, a, un) in face_velocities(grid, v) {
        let up = if un > 0.0 { w[lo] } else { w[hi] };
        let flux = un * up / grid.spacing[a];
        out[lo] += flux;
        out[hi] -= flux;
    }
    out
}

pub fn divergence(grad_v: &[Mat2]) -> Vec<f64> {
    grad_v.iter().map(|g| g.trace()).collect()
}

/// Cell-volume weighted sum of a scalar field.
pub fn integrate(grid: &Grid, f: &[f64]) -> f64 {
    f.iter().sum::<f64>() * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn pseudo(k: usize) -> f64 {
        ((k as f64 * 12.9898).sin() * 43758.5453).fract()
    }

    fn sample_vec(n: usize, seed: usize) -> Vec<Vec2> {
        (0..n).map(|c| Vec2::new(pseudo(2 * c + seed), pseudo(2 * c + 1 + seed))).collect()
    }

    fn sample_mat(n: usize, seed: usize) -> Vec<Mat2> {
        (0..n)
            .map(|c| {
                let b = 4 * c + seed;
                Mat2::new(pseudo(b), pseudo(b + 1), pseudo(b + 2), pseudo(b + 3))
            })
            .collect()
    }

    #[test]
    fn velocity_gradient_adjoint_identity() {
        let g = make_grid(2, &[1.0, 2.0], &[5, 4], 2).unwrap();
        let v = sample_vec(g.len(), 3);
        let s = sample_mat(g.len(), 7);
        let gv = grad_velocity(&g, &v);
        let lhs: f64 = s.iter().zip(&gv).map(|(a, b)| a.ddot(*b)).sum();
        let y = grad_velocity_adjoint(&g, &s);
        let rhs: f64 = y.iter().zip(&v).map(|(a, b)| a.dot(*b)).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn tensor_gradient_adjoint_identity() {
        let g = make_grid(2, &[1.0, 1.0], &[4, 3], 2).unwrap();
        let t = sample_mat(g.len(), 1);
        let h: Vec<Grad3> = (0..g.len())
            .map(|c| Grad3([sample_mat(1, 5 * c)[0], sample_mat(1, 5 * c + 2)[0]]))
            .collect();
        let gt = grad_tensor(&g, &t);
        let lhs: f64 = h.iter().zip(&gt).map(|(a, b)| a.ddd(b)).sum();
        let y = grad_tensor_adjoint(&g, &h);
        let rhs: f64 = y.iter().zip(&t).map(|(a, b)| a.ddot(*b)).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn material_point_operators_vanish() {
        let g = Grid::material_point();
        let v = vec![Vec2::new(3.0, -1.0)];
        assert_eq!(grad_velocity(&g, &v)[0], Mat2::ZERO);
        assert_eq!(grad_neumann(&g, &v)[0], Mat2::ZERO);
        assert_eq!(laplacian(&g, &v)[0], Vec2::ZERO);
        assert_eq!(upwind_advection(&g, &v, &v)[0], Vec2::ZERO);
        assert_eq!(div_stress(&g, &[Mat2::IDENTITY])[0], Vec2::ZERO);
        assert_eq!(flux_divergence(&g, &v, &[2.0])[0], 0.0);
        assert_eq!(face_gradient_energy(&g, &v), 0.0);
    }

    #[test]
    fn laplacian_is_energy_gradient() {
        let g = make_grid(2, &[1.0, 1.0], &[4, 5], 2).unwrap();
        let m = sample_vec(g.len(), 11);
        let lap = laplacian(&g, &m);
        let e0 = 0.5 * face_gradient_energy(&g, &m);
        let h = 1e-6;
        for c in [0, 7, 19] {
            let mut mp = m.clone();
            mp[c][1] += h;
            let mut mm = m.clone();
            mm[c][1] -= h;
            let fd = (0.5 * face_gradient_energy(&g, &mp) - 0.5 * face_gradient_energy(&g, &mm)) / (2.0 * h);
            assert!((fd + lap[c][1] * g.cell_volume()).abs() < 1e-6, "cell {c}");
        }
        assert!(e0 > 0.0);
    }

    #[test]
    fn flux_divergence_telescopes() {
        let g = make_grid(2, &[1.0, 1.0], &[6, 6], 2).unwrap();
        let v = sample_vec(g.len(), 2);
        let w: Vec<f64> = (0..g.len()).map(|c| 1.0 + pseudo(c + 40)).collect();
        let d = flux_divergence(&g, &v, &w);
        assert!(integrate(&g, &d).abs() < 1e-13);
    }

    #[test]
    fn upwind_exact_for_linear_profile() {
        let g = make_grid(1, &[1.0], &[8], 2).unwrap();
        let v = vec![Vec2::new(0.7, 0.0); g.len()];
        let m: Vec<Vec2> = (0..g.len()).map(|c| Vec2::new(3.0 * g.center(c)[0], 1.0)).collect();
        let a = upwind_advection(&g, &v, &m);
        for c in 1..g.len() {
            assert!((a[c][0] - 2.1).abs() < 1e-12);
            assert_eq!(a[c][1], 0.0);
        }
    }

    #[test]
    fn upwind_weights_match_operator() {
        let g = make_grid(2, &[1.0, 1.0], &[4, 4], 2).unwrap();
        let v = sample_vec(g.len(), 9).into_iter().map(|x| x - Vec2::new(0.5, 0.5)).collect::<Vec<_>>();
        let f: Vec<f64> = (0..g.len()).map(|c| pseudo(c + 77)).collect();
        let a = upwind_advection(&g, &v, &f);
        for c in 0..g.len() {
            let (d, off) = upwind_weights(&g, &v, c);
            let val = d * f[c] + off.iter().map(|(k, w)| w * f[*k]).sum::<f64>();
            assert!((val - a[c]).abs() < 1e-12);
        }
    }
}
