//! Demagnetizing field from the whole-space potential problem
//! `Δu = div(χ_Ω m)`.
//!
//! In 2D the potential is discretized with face differences `D` and the
//! face-averaged magnetization `A m`, so the discrete problem reads
//! `D^T D u = D^T A m` on the infinite lattice. It is solved exactly, up to
//! quadrature of the kernel, by convolution with the lattice Green function of
//! the five-point Laplacian, evaluated on the padded window by FFT. The
//! stray-field energy `(μ0/2) <Du, Du>` then equals `(μ0/2) <Du, Am>`, which only
//! involves faces adjacent to Ω and is evaluated without truncation.
//!
//! A 1D strip is an infinite slab, for which `h = -m_x` exactly. A material
//! point uses an optional demagnetizing-factor tensor.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tensor::{Mat2, Vec2};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, PartialEq)]
pub struct DemagSolution {
    /// Potential on the padded grid.
    pub u: Vec<f64>,
    /// `-grad u` on the physical cells.
    pub h_dem: Vec<Vec2>,
    pub energy: f64,
    /// Relative residual of the discrete Poisson equation on the padded window.
    pub residual: f64,
}

impl DemagSolution {
    pub fn zero(grid: &Grid) -> Self {
        DemagSolution {
            u: vec![0.0; grid.padded_len()],
            h_dem: vec![Vec2::ZERO; grid.len()],
            energy: 0.0,
            residual: 0.0,
        }
    }
}

struct Kernel {
    nx: usize,
    ny: usize,
    spectrum: Vec<Complex<f64>>,
    fwd_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

/// Demagnetization solver with cached convolution kernels.
#[derive(Default)]
pub struct DemagSolver {
    /// Demagnetizing-factor tensor for a material point; `None` disables it.
    pub point_factor: Option<Mat2>,
    kernels: Mutex<HashMap<(usize, usize, u64, u64), Arc<Kernel>>>,
    /// Relative residual above which a solve is reported as failed.
    pub tolerance: f64,
}

impl std::fmt::Debug for DemagSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DemagSolver").field("point_factor", &self.point_factor).finish()
    }
}

impl DemagSolver {
    pub fn new() -> Self {
        DemagSolver { point_factor: None, kernels: Mutex::new(HashMap::new()), tolerance: 1e-8 }
    }

    pub fn with_point_factor(n: Mat2) -> Self {
        DemagSolver { point_factor: Some(n), ..Self::new() }
    }

    pub fn solve(&self, grid: &Grid, m: &[Vec2], mu0: f64) -> Result<DemagSolution> {
        match grid.dim {
            0 => Ok(self.solve_point(grid, m, mu0)),
            1 => Ok(solve_slab(grid, m, mu0)),
            _ => self.solve_plane(grid, m, mu0),
        }
    }

    fn solve_point(&self, grid: &Grid, m: &[Vec2], mu0: f64) -> DemagSolution {
        let mut s = DemagSolution::zero(grid);
        if let Some(n) = self.point_factor {
            let h = -n.apply(m[0]);
            s.h_dem[0] = h;
            s.energy = -0.5 * mu0 * m[0].dot(h);
        }
        s
    }

    fn kernel(&self, grid: &Grid) -> Arc<Kernel> {
        let [px, py] = grid.padded_cells();
        let key = (px, py, grid.spacing[0].to_bits(), grid.spacing[1].to_bits());
        let mut cache = self.kernels.lock().expect("kernel cache poisoned");
        if let Some(k) = cache.get(&key) {
            return k.clone();
        }
        let (nx, ny) = (2 * px, 2 * py);
        let ax = 1.0 / (grid.spacing[0] * grid.spacing[0]);
        let ay = 1.0 / (grid.spacing[1] * grid.spacing[1]);
        let mut table = HashMap::new();
        let mut data = vec![Complex::new(0.0, 0.0); nx * ny];
        for oy in -(py as i64 - 1)..(py as i64) {
            for ox in -(px as i64 - 1)..(px as i64) {
                let (a, b) = (ox.unsigned_abs(), oy.unsigned_abs());
                // The isotropic kernel is symmetric under swapping the axes.
                let key = if ax == ay { (a.min(b), a.max(b)) } else { (a, b) };
                let g = *table.entry(key).or_insert_with(|| lattice_green(key.0, key.1, ax, ay));
                let ix = ox.rem_euclid(nx as i64) as usize;
                let iy = oy.rem_euclid(ny as i64) as usize;
                data[ix + nx * iy] = Complex::new(g, 0.0);
            }
        }
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(nx);
        let fwd_y = planner.plan_fft_forward(ny);
        let inv_x = planner.plan_fft_inverse(nx);
        let inv_y = planner.plan_fft_inverse(ny);
        fft2(&mut data, nx, ny, &fwd_x, &fwd_y);
        let k = Arc::new(Kernel { nx, ny, spectrum: data, fwd_x, fwd_y, inv_x, inv_y });
        cache.insert(key, k.clone());
        k
    }

    fn solve_plane(&self, grid: &Grid, m: &[Vec2], mu0: f64) -> Result<DemagSolution> {
        let [px, py] = grid.padded_cells();
        let off = grid.pad_offset();
        if off[0] < 1 || off[1] < 1 {
            return Err(Error::config("padded demag window needs at least one cell of margin"));
        }
        if m.iter().all(|x| *x == Vec2::ZERO) {
            return Ok(DemagSolution::zero(grid));
        }
        let [hx, hy] = grid.spacing;
        // χ_Ω m on the padded window.
        let mut mp = vec![Vec2::ZERO; px * py];
        for (c, mm) in m.iter().enumerate() {
            mp[grid.padded_index(c)] = *mm;
        }
        // Face magnetization: x faces at (i + 1/2, j), y faces at (i, j + 1/2).
        let fx = |i: usize, j: usize| 0.5 * (mp[i + px * j][0] + mp[i + 1 + px * j][0]);
        let fy = |i: usize, j: usize| 0.5 * (mp[i + px * j][1] + mp[i + px * (j + 1)][1]);
        // Right-hand side of -Δ_h u = f with f = -div_h(A m).
        let mut f = vec![0.0; px * py];
        for j in 1..py - 1 {
            for i in 1..px - 1 {
                let div = (fx(i, j) - fx(i - 1, j)) / hx + (fy(i, j) - fy(i, j - 1)) / hy;
                f[i + px * j] = -div;
            }
        }
        let k = self.kernel(grid);
        let (nx, ny) = (k.nx, k.ny);
        let mut buf = vec![Complex::new(0.0, 0.0); nx * ny];
        for j in 0..py {
            for i in 0..px {
                buf[i + nx * j] = Complex::new(f[i + px * j], 0.0);
            }
        }
        fft2(&mut buf, nx, ny, &k.fwd_x, &k.fwd_y);
        for (b, s) in buf.iter_mut().zip(&k.spectrum) {
            *b *= *s;
        }
        fft2(&mut buf, nx, ny, &k.inv_x, &k.inv_y);
        let scale = 1.0 / (nx * ny) as f64;
        let mut u = vec![0.0; px * py];
        for j in 0..py {
            for i in 0..px {
                u[i + px * j] = buf[i + nx * j].re * scale;
            }
        }
        // Residual of the five-point equation away from the window edge.
        let (ax, ay) = (1.0 / (hx * hx), 1.0 / (hy * hy));
        let mut rmax = 0.0_f64;
        let fmax = f.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        for j in 1..py - 1 {
            for i in 1..px - 1 {
                let c = i + px * j;
                let lap = ax * (u[c + 1] - 2.0 * u[c] + u[c - 1]) + ay * (u[c + px] - 2.0 * u[c] + u[c - px]);
                rmax = rmax.max((-lap - f[c]).abs());
            }
        }
        let residual = if fmax > 0.0 { rmax / fmax } else { 0.0 };
        if residual > self.tolerance {
            return Err(Error::numerical("demag Poisson solve did not reach tolerance", residual));
        }
        let mut h_dem = vec![Vec2::ZERO; grid.len()];
        let vol = grid.cell_volume();
        let mut energy = 0.0;
        for (c, h) in h_dem.iter_mut().enumerate() {
            let q = grid.padded_index(c);
            let gx = (u[q + 1] - u[q - 1]) / (2.0 * hx);
            let gy = (u[q + px] - u[q - px]) / (2.0 * hy);
            *h = Vec2::new(-gx, -gy);
            energy += m[c].dot(Vec2::new(gx, gy));
        }
        energy *= 0.5 * mu0 * vol;
        Ok(DemagSolution { u, h_dem, energy, residual })
    }
}

/// Infinite slab across the x axis: `h = -m_x e_x`, and `u` is the antiderivative
/// of `χ m_x`, centered so that it is odd about the slab midpoint.
fn solve_slab(grid: &Grid, m: &[Vec2], mu0: f64) -> DemagSolution {
    let px = grid.padded_cells()[0];
    let hx = grid.spacing[0];
    let mut mx = vec![0.0; px];
    for (c, mm) in m.iter().enumerate() {
        mx[grid.padded_index(c)] = mm[0];
    }
    let mut u = vec![0.0; px];
    let mut acc = 0.0;
    for i in 0..px {
        acc += mx[i] * hx;
        u[i] = acc - 0.5 * mx[i] * hx;
    }
    let total = acc;
    u.iter_mut().for_each(|x| *x -= 0.5 * total);
    let h_dem: Vec<Vec2> = m.iter().map(|mm| Vec2::new(-mm[0], 0.0)).collect();
    let energy = 0.5 * mu0 * m.iter().map(|mm| mm[0] * mm[0]).sum::<f64>() * grid.cell_volume();
    DemagSolution { u, h_dem, energy, residual: 0.0 }
}

/// `(u_new - u_old) / dt`.
pub fn demag_update_rate(u_new: &[f64], u_old: &[f64], dt: f64) -> Vec<f64> {
    u_new.iter().zip(u_old).map(|(a, b)| (a - b) / dt).collect()
}

fn fft2(data: &mut [Complex<f64>], nx: usize, ny: usize, fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
    for row in data.chunks_exact_mut(nx) {
        fx.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = data[i + nx * j];
        }
        fy.process(&mut col);
        for j in 0..ny {
            data[i + nx * j] = col[j];
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] (16 points).
const GL16: [(f64, f64); 8] = [
    (0.0950125098376374, 0.1894506104550685),
    (0.2816035507792589, 0.1826034150449236),
    (0.4580167776572274, 0.1691565193950025),
    (0.6178762444026438, 0.1495959888165767),
    (0.7554044083550030, 0.1246289712555339),
    (0.8656312023878318, 0.0951585116824928),
    (0.9445750230732326, 0.0622535239386479),
    (0.9894009349916499, 0.0271524594117541),
];

/// Regularized lattice Green function `G(m, n) - G(0, 0)` of the operator
/// `ax (2u - u_{i+1} - u_{i-1}) + ay (2u - u_{j+1} - u_{j-1})`.
///
/// One of the two Fourier integrals is done in closed form, leaving
/// `(1/π) ∫_0^π (cos(mθ) t^n - 1) / (2 ay sqrt(c² - 1)) dθ` with
/// `c = 1 + (ax/ay)(1 - cos θ)` and `t = c - sqrt(c² - 1)`. The axes are
/// swapped when needed so the decaying power carries the larger index.
pub fn lattice_green(m: u64, n: u64, ax: f64, ay: f64) -> f64 {
    if m == 0 && n == 0 {
        return 0.0;
    }
    if m > n {
        return lattice_green(n, m, ay, ax);
    }
    let r = ax / ay;
    let (mf, nf) = (m as f64, n as f64);
    let integrand = |th: f64| {
        let s = (0.5 * th).sin();
        let cm1 = 2.0 * r * s * s;
        let root = (cm1 * (cm1 + 2.0)).sqrt();
        if root == 0.0 {
            return -nf / (2.0 * ay * r.sqrt());
        }
        let t = 1.0 / (1.0 + cm1 + root);
        ((mf * th).cos() * t.powi(n as i32) - 1.0) / (2.0 * ay * root)
    };
    // Geometrically graded panels resolve the boundary layer of t^n near θ = 0.
    let pi = std::f64::consts::PI;
    let mut edges = vec![0.0];
    // Below θ ~ 1e-4 / (n + 1) the integrand is constant to working precision.
    let levels = ((pi * 1e4 * (nf + 1.0)).log2().ceil() as i32).max(4);
    for k in (0..levels).rev() {
        edges.push(pi / 2f64.powi(k));
    }
    let mut sum = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        // Subdivide only where cos(mθ) t^n is not negligible; beyond that the
        // integrand is smooth and one panel suffices.
        let s = (0.5 * a).sin();
        let cm1 = 2.0 * r * s * s;
        let ta = 1.0 / (1.0 + cm1 + (cm1 * (cm1 + 2.0)).sqrt());
        let live = ta.powi(n as i32) > 1e-18;
        let sub = if live { (mf * (b - a) / 6.0).ceil() as usize + 1 } else { 1 };
        let h = (b - a) / sub as f64;
        for k in 0..sub {
            let lo = a + k as f64 * h;
            let mid = lo + 0.5 * h;
            for (x, wt) in GL16 {
                sum += wt * 0.5 * h * (integrand(mid + 0.5 * h * x) + integrand(mid - 0.5 * h * x));
            }
        }
    }
    sum / pi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    /// Continuous field of a uniformly magnetized union of grid cells, from the
    /// surface charges `m.n` on its exterior faces.
    pub(crate) fn staircase_field(grid: &Grid, inside: &[bool], m: Vec2, x: [f64; 2]) -> Vec2 {
        let [hx, hy] = grid.spacing;
        let mut h = Vec2::ZERO;
        let seg = |a: f64, t1: f64, t2: f64| {
            // Field at the origin-relative point of a unit line charge on x = a, y in [t1, t2]:
            // (component along the face normal, component along the face).
            let n = (a * (t2 - t1)).atan2(a * a + t1 * t2) / std::f64::consts::TAU;
            let t = 0.5 * ((a * a + t2 * t2) / (a * a + t1 * t1)).ln() / std::f64::consts::TAU;
            (n, t)
        };
        for c in 0..grid.len() {
            if !inside[c] {
                continue;
            }
            let (i, j) = grid.ij(c);
            let x0 = i as f64 * hx;
            let y0 = j as f64 * hy;
            let outside = |di: i64, dj: i64| {
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                ii < 0 || jj < 0 || ii >= grid.cells[0] as i64 || jj >= grid.cells[1] as i64
                    || !inside[grid.idx(ii as usize, jj as usize)]
            };
            // x faces: charge m_x * (+1 on the high face, -1 on the low face).
            for (di, xf, sgn) in [(1, x0 + hx, 1.0), (-1, x0, -1.0)] {
                if outside(di, 0) {
                    let q = sgn * m[0];
                    let a = x[0] - xf;
                    let (n, t) = seg(a, y0 - x[1], y0 + hy - x[1]);
                    h += Vec2::new(q * n, -q * t);
                }
            }
            for (dj, yf, sgn) in [(1, y0 + hy, 1.0), (-1, y0, -1.0)] {
                if outside(0, dj) {
                    let q = sgn * m[1];
                    let a = x[1] - yf;
                    let (n, t) = seg(a, x0 - x[0], x0 + hx - x[0]);
                    h += Vec2::new(-q * t, q * n);
                }
            }
        }
        h
    }

    fn disk(n: usize) -> (Grid, Vec<bool>) {
        let g = make_grid(2, &[1.0, 1.0], &[n, n], 4).unwrap();
        let inside = (0..g.len())
            .map(|c| {
                let [x, y] = g.center(c);
                (x - 0.5).powi(2) + (y - 0.5).powi(2) < 0.45f64.powi(2)
            })
            .collect();
        (g, inside)
    }

    fn interior_mean(g: &Grid, h: &[Vec2]) -> Vec2 {
        let mut s = Vec2::ZERO;
        let mut k = 0.0;
        for c in 0..g.len() {
            let [x, y] = g.center(c);
            if (x - 0.5).powi(2) + (y - 0.5).powi(2) < 0.2f64.powi(2) {
                s += h[c];
                k += 1.0;
            }
        }
        s * (1.0 / k)
    }

    #[test]
    fn green_function_known_values() {
        assert!((lattice_green(1, 0, 1.0, 1.0) + 0.25).abs() < 1e-13);
        assert!((lattice_green(1, 1, 1.0, 1.0) + 1.0 / std::f64::consts::PI).abs() < 1e-13);
        // Discrete Laplacian of the kernel vanishes away from the origin.
        for (m, n) in [(3u64, 5u64), (0, 40), (17, 17), (120, 3)] {
            let g = |a: i64, b: i64| lattice_green(a.unsigned_abs(), b.unsigned_abs(), 1.0, 1.0);
            let (a, b) = (m as i64, n as i64);
            let lap = g(a + 1, b) + g(a - 1, b) + g(a, b + 1) + g(a, b - 1) - 4.0 * g(a, b);
            assert!(lap.abs() < 1e-13, "({m},{n}): {lap}");
        }
    }

    #[test]
    fn anisotropic_green_function_is_fundamental() {
        let (ax, ay) = (4.0, 0.7);
        let g = |a: i64, b: i64| lattice_green(a.unsigned_abs(), b.unsigned_abs(), ax, ay);
        let at = |a: i64, b: i64| {
            ax * (2.0 * g(a, b) - g(a + 1, b) - g(a - 1, b)) + ay * (2.0 * g(a, b) - g(a, b + 1) - g(a, b - 1))
        };
        assert!((at(0, 0) - 1.0).abs() < 1e-12);
        for (a, b) in [(1, 0), (0, 1), (5, 2), (2, 9), (30, 1)] {
            assert!(at(a, b).abs() < 1e-12, "({a},{b})");
        }
    }

    #[test]
    fn zero_magnetization() {
        let g = make_grid(2, &[1.0, 1.0], &[8, 8], 4).unwrap();
        let s = DemagSolver::new().solve(&g, &vec![Vec2::ZERO; g.len()], 1.0).unwrap();
        assert_eq!(s.energy, 0.0);
        assert!(s.u.iter().all(|x| *x == 0.0));
        assert!(s.h_dem.iter().all(|x| *x == Vec2::ZERO));
    }

    #[test]
    fn disk_matches_staircase_quadrature() {
        let (g, inside) = disk(32);
        let m0 = Vec2::new(1.0, 0.0);
        let m: Vec<Vec2> = inside.iter().map(|&b| if b { m0 } else { Vec2::ZERO }).collect();
        let s = DemagSolver::new().solve(&g, &m, 1.0).unwrap();
        assert!(s.residual < 1e-10);
        for c in 0..g.len() {
            let [x, y] = g.center(c);
            if (x - 0.5).powi(2) + (y - 0.5).powi(2) < 0.3f64.powi(2) {
                let o = staircase_field(&g, &inside, m0, g.center(c));
                assert!((s.h_dem[c] - o).norm() < 0.02, "cell {c}: {:?} vs {:?}", s.h_dem[c], o);
            }
        }
    }

    #[test]
    fn disk_factor_converges() {
        let mut prev = f64::INFINITY;
        for n in [16, 32, 64] {
            let (g, inside) = disk(n);
            let m: Vec<Vec2> = inside.iter().map(|&b| if b { Vec2::new(0.0, 1.0) } else { Vec2::ZERO }).collect();
            let s = DemagSolver::new().solve(&g, &m, 1.0).unwrap();
            let h = interior_mean(&g, &s.h_dem);
            let err = (h - Vec2::new(0.0, -0.5)).norm() / 0.5;
            assert!(err < prev, "n = {n}: {err}");
            prev = err;
        }
        assert!(prev < 0.02);
    }

    #[test]
    fn energy_identity_and_linearity() {
        let g = make_grid(2, &[1.0, 0.6], &[12, 9], 2).unwrap();
        let solver = DemagSolver::new();
        let m1: Vec<Vec2> = (0..g.len()).map(|c| Vec2::new((c as f64).sin(), (c as f64 * 0.3).cos())).collect();
        let m2: Vec<Vec2> = (0..g.len()).map(|c| Vec2::new(1.0, -(c as f64 * 0.7).sin())).collect();
        let s1 = solver.solve(&g, &m1, 2.0).unwrap();
        let s2 = solver.solve(&g, &m2, 2.0).unwrap();
        let mix: Vec<Vec2> = m1.iter().zip(&m2).map(|(a, b)| *a * 0.3 + *b * (-1.7)).collect();
        let s = solver.solve(&g, &mix, 2.0).unwrap();
        for c in 0..g.len() {
            let lin = s1.h_dem[c] * 0.3 + s2.h_dem[c] * (-1.7);
            assert!((s.h_dem[c] - lin).norm() < 1e-10);
        }
        // mu0 <Du, Du> over the whole lattice equals mu0 sum m . grad u, and the
        // window sum approaches it from below.
        let [px, py] = g.padded_cells();
        let [hx, hy] = g.spacing;
        let u = &s1.u;
        let mut window = 0.0;
        for j in 0..py {
            for i in 0..px {
                let c = i + px * j;
                if i + 1 < px {
                    window += ((u[c + 1] - u[c]) / hx).powi(2);
                }
                if j + 1 < py {
                    window += ((u[c + px] - u[c]) / hy).powi(2);
                }
            }
        }
        window *= 0.5 * 2.0 * g.cell_volume();
        assert!(s1.energy > 0.0);
        assert!(window <= s1.energy * (1.0 + 1e-12));
        assert!(window > 0.9 * s1.energy);
    }

    #[test]
    fn energy_is_quadratic_form_of_field() {
        // d E / d m_c = -mu0 h_dem_c vol, checked by finite differences.
        let g = make_grid(2, &[1.0, 1.0], &[6, 6], 2).unwrap();
        let solver = DemagSolver::new();
        let m: Vec<Vec2> = (0..g.len()).map(|c| Vec2::new(0.2 * c as f64 % 1.0, 0.5)).collect();
        let s = solver.solve(&g, &m, 1.0).unwrap();
        let d = 1e-6;
        for c in [0, 14, 35] {
            for k in 0..2 {
                let mut mp = m.clone();
                mp[c][k] += d;
                let mut mm = m.clone();
                mm[c][k] -= d;
                let fd = (solver.solve(&g, &mp, 1.0).unwrap().energy - solver.solve(&g, &mm, 1.0).unwrap().energy) / (2.0 * d);
                assert!((fd + s.h_dem[c][k] * g.cell_volume()).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn tangential_strip_is_nearly_field_free() {
        // Long strip magnetized along its axis: only the far ends carry charge.
        let g = make_grid(2, &[4.0, 0.25], &[128, 8], 2).unwrap();
        let inside = vec![true; g.len()];
        let m0 = Vec2::new(1.0, 0.0);
        let s = DemagSolver::new().solve(&g, &vec![m0; g.len()], 1.0).unwrap();
        let mut worst = 0.0_f64;
        for c in 0..g.len() {
            let [x, _] = g.center(c);
            if (x - 2.0).abs() < 1.0 {
                let o = staircase_field(&g, &inside, m0, g.center(c));
                assert!((s.h_dem[c] - o).norm() < 5e-3);
                worst = worst.max(s.h_dem[c].norm());
            }
        }
        // A transversely magnetized strip would see |h| close to |m| here.
        assert!(worst < 0.1, "{worst}");
    }

    #[test]
    fn slab_and_point() {
        let g = make_grid(1, &[1.0], &[10], 2).unwrap();
        let m: Vec<Vec2> = (0..10).map(|c| Vec2::new(0.1 * c as f64, 1.0)).collect();
        let s = DemagSolver::new().solve(&g, &m, 3.0).unwrap();
        for c in 0..10 {
            assert_eq!(s.h_dem[c], Vec2::new(-m[c][0], 0.0));
        }
        let want = 1.5 * m.iter().map(|x| x[0] * x[0]).sum::<f64>() * 0.1;
        assert!((s.energy - want).abs() < 1e-14);
        let p = Grid::material_point();
        let off = DemagSolver::new().solve(&p, &[Vec2::new(1.0, 0.0)], 1.0).unwrap();
        assert_eq!(off.h_dem[0], Vec2::ZERO);
        let on = DemagSolver::with_point_factor(Mat2::scaled_identity(0.5))
            .solve(&p, &[Vec2::new(1.0, 0.0)], 1.0)
            .unwrap();
        assert_eq!(on.h_dem[0], Vec2::new(-0.5, 0.0));
        assert!((on.energy - 0.25).abs() < 1e-15);
    }

    #[test]
    fn update_rate() {
        assert_eq!(demag_update_rate(&[1.0, 2.0], &[1.0, 2.0], 0.1), vec![0.0, 0.0]);
        let r = demag_update_rate(&[3.0], &[1.0], 0.5);
        assert_eq!(r, vec![4.0]);
    }
}
