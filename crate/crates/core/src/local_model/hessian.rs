use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{GridFunction, KahlerCoefficient};
use super::wirtinger::Neighborhood;
use crate::error::{Error, Result};

/// The 2×2 Hermitian matrix `[[a, b], [b̄, c]]` of `ω + i∂∂̄u` in the
/// coordinates `(s, z)` for `u` depending on `(Im s, z)` only:
/// `a = u_tt/4`, `b = u_{sz̄} = −(i/2)∂_z̄u_t`, `c = ω₁₁ + u_{zz̄}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedHessian {
    pub a: f64,
    pub b: Complex64,
    pub c: f64,
}

impl ReducedHessian {
    pub fn det(&self) -> f64 {
        self.a * self.c - self.b.norm_sqr()
    }

    pub fn trace(&self) -> f64 {
        self.a + self.c
    }

    /// Eigenvalues, smallest first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a + self.c);
        let half_gap = (0.25 * (self.a - self.c).powi(2) + self.b.norm_sqr()).sqrt();
        (mean - half_gap, mean + half_gap)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().0
    }

    /// `d* H d` for `d = (d_s, d_z)`.
    pub fn quadratic_form(&self, ds: Complex64, dz: Complex64) -> f64 {
        self.a * ds.norm_sqr() + self.c * dz.norm_sqr() + 2.0 * (ds.conj() * self.b * dz).re
    }
}

/// Reduced Hessian field on every time slice and every spatial node where
/// centred differences exist. Time derivatives are centred on interior
/// slices and one-sided second order at `t = 0, 1`.
#[derive(Debug, Clone)]
pub struct HessianField {
    pub nt: usize,
    pub grid: super::Grid,
    pub entries: Vec<Option<ReducedHessian>>,
}

impl HessianField {
    pub fn get(&self, k: usize, i: usize, j: usize) -> Option<ReducedHessian> {
        self.entries[k * self.grid.len() + self.grid.index(i, j)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, ReducedHessian)> + '_ {
        let len = self.grid.len();
        let n = self.grid.nodes();
        self.entries
            .iter()
            .enumerate()
            .filter_map(move |(idx, h)| h.map(|h| (idx / len, (idx % len) / n, idx % n, h)))
    }

    pub fn max_abs_det(&self) -> f64 {
        self.iter().fold(0.0, |m, (_, _, _, h)| m.max(h.det().abs()))
    }

    /// Max `|det|` over slices `k` with `t_k` in the closed range.
    pub fn max_abs_det_where<F: Fn(usize, usize, usize) -> bool>(&self, keep: F) -> f64 {
        self.iter()
            .filter(|(k, i, j, _)| keep(*k, *i, *j))
            .fold(0.0, |m, (_, _, _, h)| m.max(h.det().abs()))
    }
}

fn time_weights(k: usize, nt: usize) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
    // (first derivative, second derivative) weights in units of 1/dt, 1/dt²
    if k > 0 && k + 1 < nt {
        (
            vec![(k - 1, -0.5), (k + 1, 0.5)],
            vec![(k - 1, 1.0), (k, -2.0), (k + 1, 1.0)],
        )
    } else if k == 0 {
        let d1 = vec![(0, -1.5), (1, 2.0), (2, -0.5)];
        let d2 = if nt >= 4 {
            vec![(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
        } else {
            vec![(0, 1.0), (1, -2.0), (2, 1.0)]
        };
        (d1, d2)
    } else {
        let m = nt - 1;
        let d1 = vec![(m, 1.5), (m - 1, -2.0), (m - 2, 0.5)];
        let d2 = if nt >= 4 {
            vec![(m, 2.0), (m - 1, -5.0), (m - 2, 4.0), (m - 3, -1.0)]
        } else {
            vec![(m, 1.0), (m - 1, -2.0), (m - 2, 1.0)]
        };
        (d1, d2)
    }
}

/// Reduced Hessian at one node, `None` on patch boundary nodes.
pub fn hessian_at(u: &GridFunction, omega: KahlerCoefficient, k: usize, i: usize, j: usize) -> Option<ReducedHessian> {
    let grid = u.grid;
    if !grid.is_interior(i, j) || u.nt() < 3 {
        return None;
    }
    let dt = u.dt();
    let (w1, w2) = time_weights(k, u.nt());
    let center = grid.index(i, j);
    let len = grid.len();
    let utt: f64 = w2.iter().map(|&(kk, w)| w * u.values()[kk * len + center]).sum::<f64>() / (dt * dt);
    // u_t on the 3×3 block, then ∂_z̄ of it
    let mut ut = [[0.0; 3]; 3];
    for (a, di) in (-1isize..=1).enumerate() {
        let ii = grid.shift(i, di)?;
        for (bb, dj) in (-1isize..=1).enumerate() {
            let jj = grid.shift(j, dj)?;
            let idx = grid.index(ii, jj);
            ut[a][bb] = w1.iter().map(|&(kk, w)| w * u.values()[kk * len + idx]).sum::<f64>() / dt;
        }
    }
    let dzbar_ut = Neighborhood { v: ut, h: grid.h() }.d_zbar();
    let slice = Neighborhood::gather(u.slice_values(k), &grid, i, j)?;
    Some(ReducedHessian {
        a: 0.25 * utt,
        b: Complex64::new(0.0, -0.5) * dzbar_ut,
        c: omega.value() + slice.d_zzbar(),
    })
}

pub fn reduced_hessian(u: &GridFunction, omega: KahlerCoefficient) -> Result<HessianField> {
    if u.nt() < 3 {
        return Err(Error::InsufficientResolution(format!(
            "reduced Hessian needs at least 3 time slices, got {}",
            u.nt()
        )));
    }
    let grid = u.grid;
    let n = grid.nodes();
    let mut entries = Vec::with_capacity(u.nt() * grid.len());
    for k in 0..u.nt() {
        for i in 0..n {
            for j in 0..n {
                entries.push(hessian_at(u, omega, k, i, j));
            }
        }
    }
    Ok(HessianField {
        nt: u.nt(),
        grid,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PshReport {
    pub pass: bool,
    pub min_eigenvalue: f64,
    /// `(k, i, j)` of the smallest eigenvalue.
    pub worst_node: (usize, usize, usize),
    pub tol: f64,
}

/// ω-plurisubharmonicity of `u`: smallest eigenvalue of the reduced Hessian
/// over all nodes must be `≥ −tol`.
pub fn is_omega_psh(u: &GridFunction, omega: KahlerCoefficient, tol: f64) -> Result<PshReport> {
    let field = reduced_hessian(u, omega)?;
    let mut min_eigenvalue = f64::INFINITY;
    let mut worst_node = (0, 0, 0);
    for (k, i, j, h) in field.iter() {
        let e = h.min_eigenvalue();
        if e < min_eigenvalue {
            min_eigenvalue = e;
            worst_node = (k, i, j);
        }
    }
    Ok(PshReport {
        pass: min_eigenvalue >= -tol,
        min_eigenvalue,
        worst_node,
        tol,
    })
}
