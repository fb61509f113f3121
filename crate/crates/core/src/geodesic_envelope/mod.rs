//! Discrete Perron envelope for `(ω + i∂∂̄u)² = 0` on `[0,1] × X`, `X` the
//! flat torus (or a square patch with Dirichlet data), for `u` depending on
//! `t = Im s` and `z`.
//!
//! Two node updates are available. [`Scheme::DirectionSweep`] enforces the
//! sub-mean-value inequality along a fixed list of complex lines and is
//! monotone. [`Scheme::HessianProjection`] sets each node to the largest value
//! for which the centred reduced Hessian is still semipositive, which makes
//! its determinant vanish.

mod stencil;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_model::{is_omega_psh, Grid, GridFunction, GridSlice, KahlerCoefficient, Neighborhood, Topology};

use stencil::Stencil;
pub use stencil::{default_directions, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    DirectionSweep,
    #[default]
    HessianProjection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// In place, lexicographic in `(t, x, y)`. Single threaded.
    #[default]
    GaussSeidel,
    /// All nodes from the previous sweep, in parallel.
    Jacobi,
    /// Whole time columns at once, lexicographic in `(x, y)`; projection
    /// scheme only.
    TimeLines,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeProblem {
    pub grid: Grid,
    pub nt: usize,
    pub omega: KahlerCoefficient,
    /// Boundary potential at `t = 1`; the data at `t = 0` is zero.
    pub v: GridSlice,
    /// Full Dirichlet data for patch problems (its values on the boundary of
    /// `[0,1] × patch` are used).
    pub dirichlet: Option<GridFunction>,
    pub directions: Vec<Direction>,
    pub scheme: Scheme,
    pub mode: SweepMode,
    pub tol_sweep: f64,
    pub max_sweeps: usize,
    /// Over-relaxation factor in `(0, 2)` for Gauss–Seidel sweeps; `1`
    /// makes the direction sweep monotone.
    pub relaxation: f64,
    /// Start the projection scheme from the prolonged solution of the
    /// half-resolution problem when the grid allows it.
    pub nested: bool,
}

/// `2/(1 + sin(π/(nt−1)))`, the optimal SOR factor for the time Laplacian.
pub fn default_relaxation(nt: usize) -> f64 {
    let m = nt.saturating_sub(1).max(2) as f64;
    2.0 / (1.0 + (std::f64::consts::PI / m).sin())
}

impl EnvelopeProblem {
    /// Torus problem with default directions and tolerances.
    pub fn torus(v: GridSlice, omega: KahlerCoefficient, nt: usize) -> Result<Self> {
        let tol_sweep = 1e-10 * (1.0 + v.max_abs());
        let p = EnvelopeProblem {
            grid: v.grid,
            nt,
            omega,
            v,
            dirichlet: None,
            directions: default_directions(),
            scheme: Scheme::default(),
            mode: SweepMode::default(),
            tol_sweep,
            max_sweeps: 100_000,
            relaxation: default_relaxation(nt),
            nested: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// Patch problem with Dirichlet data taken from `data`.
    pub fn patch(data: GridFunction, omega: KahlerCoefficient) -> Result<Self> {
        let nt = data.nt();
        let v = data.slice(nt - 1);
        let tol_sweep = 1e-10 * (1.0 + data.values().iter().fold(0.0f64, |m, x| m.max(x.abs())));
        let p = EnvelopeProblem {
            grid: data.grid,
            nt,
            omega,
            v,
            dirichlet: Some(data),
            directions: default_directions(),
            scheme: Scheme::default(),
            mode: SweepMode::default(),
            tol_sweep,
            max_sweeps: 100_000,
            relaxation: default_relaxation(nt),
            nested: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_mode(mut self, mode: SweepMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_relaxation(mut self, relaxation: f64) -> Self {
        self.relaxation = relaxation;
        self
    }

    pub fn with_nested(mut self, nested: bool) -> Self {
        self.nested = nested;
        self
    }

    pub fn with_tolerance(mut self, tol_sweep: f64) -> Self {
        self.tol_sweep = tol_sweep;
        self
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.nt - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.nt < 3 {
            return Err(Error::InsufficientResolution(format!(
                "need at least 3 time slices, got {}",
                self.nt
            )));
        }
        if self.v.grid != self.grid {
            return Err(Error::InvalidInput(
                "boundary potential lives on a different grid".into(),
            ));
        }
        match (self.grid.topology(), &self.dirichlet) {
            (Topology::Torus, None) => {}
            (Topology::Patch, Some(d)) if d.grid == self.grid && d.nt() == self.nt => {}
            (Topology::Patch, _) => {
                return Err(Error::InvalidInput(
                    "patch problems need Dirichlet data on the same grid".into(),
                ))
            }
            (Topology::Torus, Some(_)) => {
                return Err(Error::InvalidInput("torus problems take no lateral data".into()))
            }
        }
        if !(self.tol_sweep > 0.0) || !self.tol_sweep.is_finite() {
            return Err(Error::InvalidInput(format!(
                "tol_sweep must be positive, got {}",
                self.tol_sweep
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidInput("max_sweeps must be positive".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::InvalidInput(format!(
                "relaxation must lie in (0, 2), got {}",
                self.relaxation
            )));
        }
        if self.mode == SweepMode::TimeLines && self.scheme != Scheme::HessianProjection {
            return Err(Error::InvalidInput(
                "time-line sweeps need the projection scheme".into(),
            ));
        }
        if self.scheme == Scheme::DirectionSweep {
            let has = |ds: bool, dz: bool| {
                self.directions
                    .iter()
                    .any(|d| (d.ds.norm() > 0.0) == ds && (d.dz.norm() > 0.0) == dz)
            };
            let mixed = self
                .directions
                .iter()
                .filter(|d| d.ds.norm() > 0.0 && d.dz.norm() > 0.0)
                .count();
            if !has(true, false) || !has(false, true) || mixed < 2 {
                return Err(Error::InvalidInput(
                    "directions must contain a pure time, a pure space and two mixed directions".into(),
                ));
            }
        }
        if self.grid.topology() == Topology::Torus {
            let delta = levi_floor(&self.v, self.omega);
            if !(delta > 0.0) {
                return Err(Error::InvalidPotential(format!(
                    "omega11 + v_zzbar must be positive on the grid, minimum is {delta}"
                )));
            }
        }
        Ok(())
    }
}

/// `min(ω₁₁, min ω₁₁ + v_{zz̄})`: the smallest value of `ω₁₁ + t v_{zz̄}`
/// over the grid and `t ∈ [0, 1]`.
fn levi_floor(v: &GridSlice, omega: KahlerCoefficient) -> f64 {
    let grid = v.grid;
    let n = grid.nodes();
    let mut lo = omega.value();
    for i in 0..n {
        for j in 0..n {
            if let Some(nb) = Neighborhood::gather(v.values(), &grid, i, j) {
                lo = lo.min(omega.value() + nb.d_zzbar());
            }
        }
    }
    lo
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub u: GridFunction,
    pub sweeps_used: usize,
    pub final_update: f64,
    /// `max(u − t v, L − u, 0)` over nodes (torus problems; 0 on patches).
    pub barrier_violation: f64,
    /// Smallest eigenvalue of the discrete reduced Hessian of `u`.
    pub hessian_min_eig: f64,
    /// Largest `|det|` of the reduced Hessian over nodes with `0 < t < 1`.
    pub max_abs_det: f64,
    /// Constant `C` of the lower barrier (torus problems).
    pub barrier_constant: f64,
    /// Relaxation in effect at the end (lowered after a divergent stretch).
    pub relaxation_used: f64,
}

/// `t · v(x)`.
pub fn upper_barrier(problem: &EnvelopeProblem) -> GridFunction {
    let grid = problem.grid;
    let len = grid.len();
    let mut values = Vec::with_capacity(problem.nt * len);
    for k in 0..problem.nt {
        let t = k as f64 / (problem.nt - 1) as f64;
        values.extend(problem.v.values().iter().map(|&v| t * v));
    }
    GridFunction::new(grid, problem.nt, values, false).expect("finite boundary data")
}

/// `t v(x) − C t(1−t)` with `C` large enough that the barrier is a discrete
/// subsolution of the chosen scheme (and ω-psh). Starts from
/// `C = 1.5 max|v_z|²/(2δ)`, `δ = min(ω₁₁ + t v_{zz̄})`, and doubles it until
/// the discrete check passes.
pub fn lower_barrier(problem: &EnvelopeProblem) -> Result<(GridFunction, f64)> {
    if problem.grid.topology() != Topology::Torus {
        return Err(Error::InvalidInput(
            "lower barrier is defined for torus problems".into(),
        ));
    }
    let delta = levi_floor(&problem.v, problem.omega);
    if !(delta > 0.0) {
        return Err(Error::InvalidPotential(format!(
            "omega11 + t v_zzbar has minimum {delta}"
        )));
    }
    let grid = problem.grid;
    let n = grid.nodes();
    let mut grad2 = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let nb = Neighborhood::gather(problem.v.values(), &grid, i, j).expect("torus");
            grad2 = grad2.max(nb.d_z().norm_sqr());
        }
    }
    let solver = Solver::new(problem)?;
    let upper = upper_barrier(problem);
    let scale = 1.0 + problem.v.max_abs();
    let build = |c: f64| {
        let mut vals = upper.values().to_vec();
        for k in 0..problem.nt {
            let t = k as f64 / (problem.nt - 1) as f64;
            for x in &mut vals[k * grid.len()..(k + 1) * grid.len()] {
                *x -= c * t * (1.0 - t);
            }
        }
        vals
    };
    let mut c = 1.5 * grad2 / (2.0 * delta);
    for _ in 0..64 {
        let vals = build(c);
        let excess = solver.subsolution_excess(&vals);
        if excess <= 1e-12 * scale {
            let l = GridFunction::new(grid, problem.nt, vals, false)?;
            return Ok((l, c));
        }
        c = if c == 0.0 { 1e-6 * scale } else { 2.0 * c };
    }
    Err(Error::InternalConsistency("no lower barrier constant found".into()))
}

struct Solver {
    n: usize,
    nt: usize,
    len: usize,
    torus: bool,
    scheme: Scheme,
    stencils: Vec<Stencil>,
    omega: f64,
    h: f64,
    next: Vec<usize>,
    prev: Vec<usize>,
    tol_hint: f64,
}

impl Solver {
    fn new(problem: &EnvelopeProblem) -> Result<Self> {
        let h = problem.grid.h();
        let dt = problem.dt();
        let stencils = if problem.scheme == Scheme::DirectionSweep {
            problem
                .directions
                .iter()
                .map(|&d| Stencil::new(d, h, dt, problem.omega.value()))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let n = problem.grid.nodes();
        Ok(Solver {
            n,
            nt: problem.nt,
            len: problem.grid.len(),
            torus: problem.grid.topology() == Topology::Torus,
            scheme: problem.scheme,
            stencils,
            omega: problem.omega.value(),
            h,
            next: (0..n).map(|i| (i + 1) % n).collect(),
            prev: (0..n).map(|i| (i + n - 1) % n).collect(),
            tol_hint: problem.tol_sweep,
        })
    }

    fn is_free(&self, k: usize, i: usize, j: usize) -> bool {
        k > 0 && k + 1 < self.nt && (self.torus || (i > 0 && j > 0 && i + 1 < self.n && j + 1 < self.n))
    }

    #[inline]
    fn wrap(&self, i: usize, d: isize) -> Option<usize> {
        let k = i as isize + d;
        let n = self.n as isize;
        if self.torus {
            Some(k.rem_euclid(n) as usize)
        } else if (0..n).contains(&k) {
            Some(k as usize)
        } else {
            None
        }
    }

    #[inline]
    fn at(&self, u: &[f64], k: usize, i: usize, j: usize, dk: isize, di: isize, dj: isize) -> Option<f64> {
        let kk = k as isize + dk;
        if kk < 0 || kk >= self.nt as isize {
            return None;
        }
        let ii = self.wrap(i, di)?;
        let jj = self.wrap(j, dj)?;
        Some(u[kk as usize * self.len + ii * self.n + jj])
    }

    /// Value the scheme assigns to a free node given its neighbours.
    fn target(&self, u: &[f64], k: usize, i: usize, j: usize) -> f64 {
        match self.scheme {
            Scheme::DirectionSweep => self.direction_target(u, k, i, j),
            Scheme::HessianProjection => self.projection_target(u, k, i, j),
        }
    }

    fn direction_target(&self, u: &[f64], k: usize, i: usize, j: usize) -> f64 {
        let mut best = f64::INFINITY;
        'dirs: for s in &self.stencils {
            let kk = k as isize;
            if kk + s.reach.0 < 0 || kk + s.reach.1 >= self.nt as isize {
                continue;
            }
            let mut sum = s.forcing;
            for &(dk, di, dj, w) in &s.taps {
                match self.at(u, k, i, j, dk, di, dj) {
                    Some(x) => sum += w * x,
                    None => continue 'dirs,
                }
            }
            best = best.min(s.scale * sum);
        }
        if best.is_finite() {
            best
        } else {
            u[k * self.len + i * self.n + j]
        }
    }

    /// `(A, C, β)` with the node value `X` solving `(A − X)(C − X) = β`:
    /// `a = (A − X)/(2dt²)`, `c = (C − X)/h²` and `2 dt² h² |b|² = β`.
    fn projection_parts(&self, u: &[f64], k: usize, i: usize, j: usize) -> (f64, f64, f64) {
        // free nodes always have all neighbours; on the torus they wrap
        let (n, len) = (self.n, self.len);
        let (ip, im) = (self.next[i] * n, self.prev[i] * n);
        let (jp, jm) = (self.next[j], self.prev[j]);
        let row = i * n;
        let (up, mid, dn) = (
            &u[(k + 1) * len..(k + 2) * len],
            &u[k * len..(k + 1) * len],
            &u[(k - 1) * len..k * len],
        );
        let a_mean = 0.5 * (up[row + j] + dn[row + j]);
        let c_mean = 0.25 * (mid[ip + j] + mid[im + j] + mid[row + jp] + mid[row + jm]) + self.omega * self.h * self.h;
        // centred u_tx, u_ty times 4 dt h; |b|² = (u_tx² + u_ty²)/16
        let utx = (up[ip + j] - dn[ip + j]) - (up[im + j] - dn[im + j]);
        let uty = (up[row + jp] - dn[row + jp]) - (up[row + jm] - dn[row + jm]);
        (a_mean, c_mean, (utx * utx + uty * uty) / 128.0)
    }

    fn projection_target(&self, u: &[f64], k: usize, i: usize, j: usize) -> f64 {
        let (a, c, beta) = self.projection_parts(u, k, i, j);
        projection_root(a, c, beta).0
    }

    /// Solves the whole time column through `(i, j)` for the projection
    /// scheme with the neighbouring columns frozen: a few Newton steps on the
    /// tridiagonal system `u_k = X(A_k)`, `A_k = (u_{k−1} + u_{k+1})/2`.
    fn relax_column(&self, u: &mut [f64], i: usize, j: usize, relax: f64, scratch: &mut ColumnScratch) -> f64 {
        let m = self.nt - 2;
        let col = i * self.n + j;
        let at = |k: usize| k * self.len + col;
        for k in 1..=m {
            let (_, c, beta) = self.projection_parts(u, k, i, j);
            scratch.c[k] = c;
            scratch.beta[k] = beta;
            scratch.x[k] = u[at(k)];
        }
        scratch.x[0] = u[at(0)];
        scratch.x[m + 1] = u[at(m + 1)];
        for _ in 0..COLUMN_NEWTON_STEPS {
            // linearise X about the current column and solve the tridiagonal system
            for k in 1..=m {
                let a = 0.5 * (scratch.x[k - 1] + scratch.x[k + 1]);
                let (val, slope) = projection_root(a, scratch.c[k], scratch.beta[k]);
                scratch.off[k] = -0.5 * slope;
                scratch.rhs[k] = val - slope * a;
            }
            scratch.rhs[1] -= scratch.off[1] * scratch.x[0];
            scratch.rhs[m] -= scratch.off[m] * scratch.x[m + 1];
            // Thomas algorithm, unit diagonal
            let mut diag_prev = 1.0;
            scratch.gamma[1] = 0.0;
            scratch.y[1] = scratch.rhs[1];
            for k in 2..=m {
                let w = scratch.off[k] / diag_prev;
                let d = 1.0 - w * scratch.off[k - 1];
                scratch.gamma[k] = d;
                scratch.y[k] = scratch.rhs[k] - w * scratch.y[k - 1];
                diag_prev = d;
            }
            let mut change = 0.0f64;
            let mut next = scratch.x[m + 1];
            let mut k = m;
            while k >= 1 {
                let d = if k == 1 { 1.0 } else { scratch.gamma[k] };
                let sup = if k < m { scratch.off[k] * next } else { 0.0 };
                let val = (scratch.y[k] - sup) / d;
                change = change.max((val - scratch.x[k]).abs());
                scratch.x[k] = val;
                next = val;
                k -= 1;
            }
            if change <= 1e-3 * self.tol_hint {
                break;
            }
        }
        let mut upd = 0.0f64;
        for k in 1..=m {
            let old = u[at(k)];
            let new = old + relax * (scratch.x[k] - old);
            upd = upd.max((new - old).abs());
            u[at(k)] = new;
        }
        upd
    }

    fn sweep_columns(&self, u: &mut [f64], relax: f64) -> f64 {
        let mut scratch = ColumnScratch::new(self.nt);
        let mut upd = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                if self.is_free(1, i, j) {
                    upd = upd.max(self.relax_column(u, i, j, relax, &mut scratch));
                }
            }
        }
        upd
    }

    /// Max over free nodes of `u_p − target(u)` (clipped at 0).
    fn subsolution_excess(&self, u: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for k in 1..self.nt - 1 {
            for i in 0..self.n {
                for j in 0..self.n {
                    if self.is_free(k, i, j) {
                        worst = worst.max(u[k * self.len + i * self.n + j] - self.target(u, k, i, j));
                    }
                }
            }
        }
        worst
    }

    fn sweep_gauss_seidel(&self, u: &mut [f64], relax: f64) -> f64 {
        if self.scheme == Scheme::HessianProjection {
            return self.sweep_projection(u, relax);
        }
        let mut upd = 0.0f64;
        for k in 1..self.nt - 1 {
            for i in 0..self.n {
                for j in 0..self.n {
                    if !self.is_free(k, i, j) {
                        continue;
                    }
                    let idx = k * self.len + i * self.n + j;
                    let old = u[idx];
                    let new = old + relax * (self.target(u, k, i, j) - old);
                    upd = upd.max((new - old).abs());
                    u[idx] = new;
                }
            }
        }
        upd
    }

    /// Gauss–Seidel sweep of the projection scheme, same ordering and
    /// arithmetic as the generic sweep with the slices borrowed once per `t`.
    fn sweep_projection(&self, u: &mut [f64], relax: f64) -> f64 {
        let (n, len) = (self.n, self.len);
        let hh = self.omega * self.h * self.h;
        let (lo, hi) = if self.torus { (0, n) } else { (1, n - 1) };
        let mut upd = 0.0f64;
        for k in 1..self.nt - 1 {
            let (below, rest) = u.split_at_mut(k * len);
            let (mid, above) = rest.split_at_mut(len);
            let dn = &below[(k - 1) * len..];
            let up = &above[..len];
            for i in lo..hi {
                let (row, ip, im) = (i * n, self.next[i] * n, self.prev[i] * n);
                for j in lo..hi {
                    let (jp, jm) = (self.next[j], self.prev[j]);
                    let a = 0.5 * (up[row + j] + dn[row + j]);
                    let c = 0.25 * (mid[ip + j] + mid[im + j] + mid[row + jp] + mid[row + jm]) + hh;
                    let utx = (up[ip + j] - dn[ip + j]) - (up[im + j] - dn[im + j]);
                    let uty = (up[row + jp] - dn[row + jp]) - (up[row + jm] - dn[row + jm]);
                    let target = projection_root(a, c, (utx * utx + uty * uty) / 128.0).0;
                    let old = mid[row + j];
                    let new = old + relax * (target - old);
                    upd = upd.max((new - old).abs());
                    mid[row + j] = new;
                }
            }
        }
        upd
    }

    fn sweep_jacobi(&self, u: &mut Vec<f64>) -> f64 {
        let old = &*u;
        let mut next = old.clone();
        let upd = next
            .par_chunks_mut(self.len)
            .enumerate()
            .map(|(k, slice)| {
                let mut upd = 0.0f64;
                if k == 0 || k + 1 == self.nt {
                    return upd;
                }
                for i in 0..self.n {
                    for j in 0..self.n {
                        if self.is_free(k, i, j) {
                            let t = self.target(old, k, i, j);
                            let cell = &mut slice[i * self.n + j];
                            upd = upd.max((t - *cell).abs());
                            *cell = t;
                        }
                    }
                }
                upd
            })
            .reduce(|| 0.0, f64::max);
        *u = next;
        upd
    }
}

/// Growth of the sweep update over its best value that counts as divergence.
const DIVERGENCE_FACTOR: f64 = 1e3;

const COLUMN_NEWTON_STEPS: usize = 4;

/// Smaller root `X` of `(A − X)(C − X) = β` and `dX/dA`.
fn projection_root(a: f64, c: f64, beta: f64) -> (f64, f64) {
    let gap = a - c;
    let root = (gap * gap + 4.0 * beta).sqrt();
    let slope = if root > 0.0 { 0.5 * (1.0 - gap / root) } else { 0.5 };
    (0.5 * ((a + c) - root), slope)
}

struct ColumnScratch {
    c: Vec<f64>,
    beta: Vec<f64>,
    x: Vec<f64>,
    off: Vec<f64>,
    rhs: Vec<f64>,
    gamma: Vec<f64>,
    y: Vec<f64>,
}

impl ColumnScratch {
    fn new(nt: usize) -> Self {
        let z = || vec![0.0; nt];
        ColumnScratch {
            c: z(),
            beta: z(),
            x: z(),
            off: z(),
            rhs: z(),
            gamma: z(),
            y: z(),
        }
    }
}

fn boundary_fill(problem: &EnvelopeProblem, u: &mut [f64]) {
    let len = problem.grid.len();
    let last = (problem.nt - 1) * len;
    match &problem.dirichlet {
        None => {
            u[..len].iter_mut().for_each(|x| *x = 0.0);
            u[last..].copy_from_slice(problem.v.values());
        }
        Some(data) => {
            let n = problem.grid.nodes();
            for k in 0..problem.nt {
                for i in 0..n {
                    for j in 0..n {
                        let on_boundary = k == 0 || k + 1 == problem.nt || i == 0 || j == 0 || i + 1 == n || j + 1 == n;
                        if on_boundary {
                            let idx = data.index(k, i, j);
                            u[idx] = data.values()[idx];
                        }
                    }
                }
            }
        }
    }
}

/// Default starting point: `t v` on the torus, linear interpolation in `t`
/// of the Dirichlet data on a patch.
pub fn initial_guess(problem: &EnvelopeProblem) -> GridFunction {
    match &problem.dirichlet {
        None => upper_barrier(problem),
        Some(data) => {
            let len = problem.grid.len();
            let first = data.slice_values(0);
            let last = data.slice_values(problem.nt - 1);
            let mut vals = Vec::with_capacity(problem.nt * len);
            for k in 0..problem.nt {
                let t = k as f64 / (problem.nt - 1) as f64;
                vals.extend(first.iter().zip(last).map(|(a, b)| (1.0 - t) * a + t * b));
            }
            boundary_fill(problem, &mut vals);
            GridFunction::new(problem.grid, problem.nt, vals, false).expect("finite data")
        }
    }
}

/// Smallest coarse level worth solving first.
const NESTED_MIN_INTERVALS: usize = 8;

/// Same problem on the grid with every other node in `t`, `x` and `y`, when
/// that grid exists and is large enough.
fn coarse_problem(problem: &EnvelopeProblem) -> Option<EnvelopeProblem> {
    let n = problem.grid.nodes();
    let intervals = match problem.grid.topology() {
        Topology::Torus => n,
        Topology::Patch => n - 1,
    };
    let steps = problem.nt - 1;
    if intervals % 2 != 0
        || !steps.is_multiple_of(2)
        || intervals / 2 < NESTED_MIN_INTERVALS
        || steps / 2 < NESTED_MIN_INTERVALS
    {
        return None;
    }
    if problem.grid.topology() == Topology::Torus && !(n / 2).is_multiple_of(2) {
        return None;
    }
    let grid = match problem.grid.topology() {
        Topology::Torus => Grid::torus(n / 2).ok()?,
        Topology::Patch => {
            let side = problem.grid.h() * intervals as f64;
            let (x, y) = problem.grid.position(0, 0);
            Grid::patch(
                num_complex::Complex64::new(x + 0.5 * side, y + 0.5 * side),
                side,
                intervals / 2,
            )
            .ok()?
        }
    };
    let nc = grid.nodes();
    let v = GridSlice::new(
        grid,
        (0..nc * nc)
            .map(|c| problem.v.get(2 * (c / nc), 2 * (c % nc)))
            .collect(),
    )
    .ok()?;
    let nt = steps / 2 + 1;
    let dirichlet = match &problem.dirichlet {
        None => None,
        Some(d) => {
            let vals = (0..nt * nc * nc)
                .map(|c| {
                    let (k, r) = (c / (nc * nc), c % (nc * nc));
                    d.get(2 * k, 2 * (r / nc), 2 * (r % nc))
                })
                .collect();
            Some(GridFunction::new(grid, nt, vals, d.symmetric).ok()?)
        }
    };
    let relaxation = if problem.relaxation == default_relaxation(problem.nt) {
        default_relaxation(nt)
    } else {
        problem.relaxation
    };
    let coarse = EnvelopeProblem {
        grid,
        nt,
        v,
        dirichlet,
        relaxation,
        directions: problem.directions.clone(),
        ..*problem
    };
    coarse.validate().ok()?;
    Some(coarse)
}

/// Multilinear interpolation of a coarse solution onto `problem`'s grid,
/// which has twice the resolution in every direction.
fn prolong(coarse: &GridFunction, problem: &EnvelopeProblem) -> GridFunction {
    let grid = problem.grid;
    let (n, nc) = (grid.nodes(), coarse.grid.nodes());
    let torus = grid.topology() == Topology::Torus;
    let pair = |i: usize, m: usize| -> [usize; 2] {
        let lo = i / 2;
        let hi = if i.is_multiple_of(2) {
            lo
        } else if torus {
            (lo + 1) % m
        } else {
            lo + 1
        };
        [lo, hi]
    };
    let mut vals = Vec::with_capacity(problem.nt * grid.len());
    for k in 0..problem.nt {
        let ks = pair(k, coarse.nt());
        for i in 0..n {
            let is = pair(i, nc);
            for j in 0..n {
                let js = pair(j, nc);
                let mut sum = 0.0;
                for &a in &ks {
                    for &b in &is {
                        for &c in &js {
                            sum += coarse.get(a, b, c);
                        }
                    }
                }
                vals.push(0.125 * sum);
            }
        }
    }
    boundary_fill(problem, &mut vals);
    GridFunction::new(grid, problem.nt, vals, coarse.symmetric).expect("finite interpolant")
}

/// Solves from [`initial_guess`], or, for the projection scheme with
/// `nested` set, from the prolonged solution of the coarse problem (solved
/// the same way, recursively).
pub fn solve_envelope(problem: &EnvelopeProblem) -> Result<EnvelopeResult> {
    if problem.nested && problem.scheme == Scheme::HessianProjection {
        if let Some(coarse) = coarse_problem(problem) {
            if let Ok(res) = solve_envelope(&coarse) {
                return solve_envelope_from(problem, prolong(&res.u, problem));
            }
        }
    }
    solve_envelope_from(problem, initial_guess(problem))
}

/// Iterates `u_p ← target(u)` over free nodes from `start` (boundary values
/// are overwritten by the data). Stops once the last update and the
/// geometric estimate `update · ρ/(1−ρ)` of the remaining distance to the
/// fixed point are both below `tol_sweep`, where `ρ` is the largest update
/// ratio over the last few sweeps.
pub fn solve_envelope_from(problem: &EnvelopeProblem, start: GridFunction) -> Result<EnvelopeResult> {
    problem.validate()?;
    if start.grid != problem.grid || start.nt() != problem.nt {
        return Err(Error::InvalidInput(
            "starting function does not match the problem grid".into(),
        ));
    }
    let solver = Solver::new(problem)?;
    let mut u = start.into_values();
    boundary_fill(problem, &mut u);
    let tol = problem.tol_sweep;
    let mut relax = problem.relaxation;
    let mut ratios = [0.0f64; 5];
    let mut prev = f64::INFINITY;
    let mut sweeps_used = 0;
    let mut final_update = f64::INFINITY;
    let mut converged = false;
    // iterate with the smallest update so far, restored if over-relaxation
    // sends the updates off
    let mut checkpoint: Option<(Vec<f64>, f64)> = None;
    let rounding_floor = 64.0 * f64::EPSILON * u.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    for sweep in 1..=problem.max_sweeps {
        let upd = match problem.mode {
            SweepMode::GaussSeidel => solver.sweep_gauss_seidel(&mut u, relax),
            SweepMode::TimeLines => solver.sweep_columns(&mut u, relax),
            SweepMode::Jacobi => solver.sweep_jacobi(&mut u),
        };
        sweeps_used = sweep;
        let best = checkpoint.as_ref().map_or(f64::INFINITY, |c| c.1);
        if relax > 1.0 && (!upd.is_finite() || upd > DIVERGENCE_FACTOR * best) {
            let (saved, _) = checkpoint.as_ref().expect("finite best implies a checkpoint");
            u.copy_from_slice(saved);
            relax = 1.0 + 0.5 * (relax - 1.0);
            ratios = [0.0; 5];
            prev = f64::INFINITY;
            continue;
        }
        if !upd.is_finite() {
            return Err(Error::NonFinite {
                location: format!("sweep {sweep}"),
            });
        }
        if relax > 1.0 && upd < 0.5 * best {
            match &mut checkpoint {
                Some((saved, b)) => {
                    saved.copy_from_slice(&u);
                    *b = upd;
                }
                None => checkpoint = Some((u.clone(), upd)),
            }
        }
        final_update = upd;
        ratios[sweep % ratios.len()] = if prev.is_finite() && prev > 0.0 {
            upd / prev
        } else {
            1.0
        };
        prev = upd;
        // at the rounding floor the ratio estimate is noise
        if upd <= rounding_floor {
            converged = true;
            break;
        }
        let rho = ratios.iter().copied().fold(0.0, f64::max);
        if sweep > ratios.len() && upd <= tol && rho < 1.0 && upd * rho / (1.0 - rho) <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            sweeps: sweeps_used,
            final_update,
        });
    }
    let u = GridFunction::new(problem.grid, problem.nt, u, problem.v.symmetry_defect() == 0.0)?;
    let (barrier_violation, barrier_constant) = if problem.dirichlet.is_none() {
        let (lower, c) = lower_barrier(problem)?;
        let upper = upper_barrier(problem);
        let violation = u
            .values()
            .iter()
            .zip(upper.values().iter().zip(lower.values()))
            .fold(0.0f64, |m, (&x, (&hi, &lo))| m.max(x - hi).max(lo - x));
        (violation, c)
    } else {
        (0.0, 0.0)
    };
    if problem.scheme == Scheme::DirectionSweep && barrier_violation > 10.0 * tol {
        return Err(Error::InternalConsistency(format!(
            "solution leaves the barrier sandwich by {barrier_violation:e}"
        )));
    }
    let psh = is_omega_psh(&u, problem.omega, 0.0)?;
    let field = crate::local_model::reduced_hessian(&u, problem.omega)?;
    let nt = problem.nt;
    let max_abs_det = field.max_abs_det_where(|k, _, _| k > 0 && k + 1 < nt);
    Ok(EnvelopeResult {
        u,
        sweeps_used,
        final_update,
        barrier_violation,
        hessian_min_eig: psh.min_eigenvalue,
        max_abs_det,
        barrier_constant,
        relaxation_used: relax,
    })
}

/// Max `|u(t, z) − u(t, −z)|` over nodes.
pub fn symmetrize_check(result: &EnvelopeResult, _problem: &EnvelopeProblem) -> f64 {
    result.u.symmetry_defect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessProbe {
    pub from_above: EnvelopeResult,
    pub from_below: EnvelopeResult,
    /// Max node-wise difference of the two fixed points.
    pub difference: f64,
}

/// Solves from `t v` and from `t v − κ t(1−t)` with `κ = 1 + max|v|`.
pub fn uniqueness_probe(problem: &EnvelopeProblem) -> Result<UniquenessProbe> {
    let from_above = solve_envelope(problem)?;
    let kappa = 1.0 + problem.v.max_abs();
    let start = initial_guess(problem);
    let len = problem.grid.len();
    let mut vals = start.into_values();
    for k in 0..problem.nt {
        let t = k as f64 / (problem.nt - 1) as f64;
        for x in &mut vals[k * len..(k + 1) * len] {
            *x -= kappa * t * (1.0 - t);
        }
    }
    let start = GridFunction::new(problem.grid, problem.nt, vals, false)?;
    let from_below = solve_envelope_from(problem, start)?;
    let difference = from_above.u.max_abs_diff(&from_below.u);
    Ok(UniquenessProbe {
        from_above,
        from_below,
        difference,
    })
}
