//! Second-order obstruction at an isolated fixed point of the involution,
//!
//! `|Σ v_{z_j z_k} ξ_j ξ_k| ≤ Σ (2ω_{jk} + v_{z_j z̄_k}) ξ_j ξ̄_k`  for all ξ,
//!
//! and a builder for g-invariant torus potentials with prescribed second
//! order jet at the origin.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_model::{Grid, GridSlice, KahlerCoefficient, Neighborhood, Topology};

/// Complex matrix type of obstruction instances.
pub type CMat = DMatrix<Complex64>;

/// Hessian data of a boundary potential at the fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstructionInstance {
    omega: CMat,
    p: CMat,
    q: CMat,
}

impl ObstructionInstance {
    /// `omega = ω_{jk}(x₀)`, `p = v_{z_j z̄_k}(x₀)`, `q = v_{z_j z_k}(x₀)`.
    pub fn new(omega: CMat, p: CMat, q: CMat) -> Result<Self> {
        let m = omega.nrows();
        if m == 0 {
            return Err(Error::InvalidInput("obstruction instance needs m >= 1".into()));
        }
        for (name, mat) in [("omega", &omega), ("p", &p), ("q", &q)] {
            if mat.nrows() != m || mat.ncols() != m {
                return Err(Error::InvalidInput(format!(
                    "{name} must be {m}x{m}, got {}x{}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite {
                    location: format!("obstruction matrix {name}"),
                });
            }
        }
        let scale = |a: &CMat| 1.0 + a.iter().fold(0.0f64, |s, z| s.max(z.norm()));
        let tol = 1e-12;
        if (&omega - omega.adjoint())
            .iter()
            .any(|z| z.norm() > tol * scale(&omega))
        {
            return Err(Error::InvalidInput("omega must be Hermitian".into()));
        }
        if (&p - p.adjoint()).iter().any(|z| z.norm() > tol * scale(&p)) {
            return Err(Error::InvalidInput("p must be Hermitian".into()));
        }
        if (&q - q.transpose()).iter().any(|z| z.norm() > tol * scale(&q)) {
            return Err(Error::InvalidInput("q must be complex symmetric".into()));
        }
        if real_embedding(&omega).cholesky().is_none() {
            return Err(Error::InvalidInput("omega must be positive definite".into()));
        }
        if real_embedding(&(&omega + &p)).cholesky().is_none() {
            return Err(Error::InvalidPotential(
                "omega + p is not positive definite at the fixed point".into(),
            ));
        }
        Ok(ObstructionInstance { omega, p, q })
    }

    /// One-variable instance `(ω₁₁, v_{zz̄}, v_{zz})`.
    pub fn scalar(omega: f64, p: f64, q: Complex64) -> Result<Self> {
        let one = |z: Complex64| CMat::from_element(1, 1, z);
        Self::new(one(omega.into()), one(p.into()), one(q))
    }

    pub fn m(&self) -> usize {
        self.omega.nrows()
    }

    pub fn omega(&self) -> &CMat {
        &self.omega
    }

    pub fn p(&self) -> &CMat {
        &self.p
    }

    pub fn q(&self) -> &CMat {
        &self.q
    }

    /// `A = 2Ω + P`.
    pub fn levi_form(&self) -> CMat {
        &self.omega * Complex64::from(2.0) + &self.p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionVerdict {
    pub satisfied: bool,
    /// `inf_{|ξ|=1} ξ*(2Ω+P)ξ − |ξᵀQξ|`.
    pub margin: f64,
    /// Unit vector attaining the margin.
    pub witness: Vec<Complex64>,
    /// Largest singular value of `A^{−1/2ᵀ} Q A^{−1/2}`; absent for the sampler.
    pub sigma_max: Option<f64>,
}

/// Value of `ξ*Aξ − |ξᵀQξ|` at an arbitrary (not necessarily unit) vector,
/// divided by `|ξ|²`.
pub fn obstruction_form(inst: &ObstructionInstance, xi: &[Complex64]) -> f64 {
    let v = DVector::from_column_slice(xi);
    let norm2 = v.norm_squared();
    let a = inst.levi_form();
    let hermitian = (v.adjoint() * &a * &v)[(0, 0)].re;
    let bilinear = (v.transpose() * &inst.q * &v)[(0, 0)].norm();
    (hermitian - bilinear) / norm2
}

/// Real `2m×2m` form `M` with `wᵀMw = ξ*Aξ − Re ξᵀQξ` for `ξ = x + iy`,
/// `w = (x, y)`. The phase of `ξᵀQξ` can always be rotated to be real and
/// non-negative, so the margin is the smallest eigenvalue of `M`.
fn real_form(a: &CMat, q: &CMat) -> DMatrix<f64> {
    let m = a.nrows();
    DMatrix::from_fn(2 * m, 2 * m, |r, c| {
        let (i, j) = (r % m, c % m);
        let (ar, ai) = (a[(i, j)].re, a[(i, j)].im);
        let (qr, qi) = (q[(i, j)].re, q[(i, j)].im);
        match (r < m, c < m) {
            (true, true) => ar - qr,
            (true, false) => -ai + qi,
            (false, true) => ai + qi,
            (false, false) => ar + qr,
        }
    })
}

/// `[[Re H, −Im H], [Im H, Re H]]`; symmetric for Hermitian `H`, with the
/// eigenvalues of `H` each repeated twice.
fn real_embedding(h: &CMat) -> DMatrix<f64> {
    let m = h.nrows();
    DMatrix::from_fn(2 * m, 2 * m, |r, c| {
        let z = h[(r % m, c % m)];
        match (r < m, c < m) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse square root of a Hermitian positive definite matrix, computed on
/// the real embedding (the complex eigensolver is not used).
fn hermitian_inverse_sqrt(a: &CMat) -> CMat {
    let m = a.nrows();
    let eig = real_embedding(a).symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let r = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    CMat::from_fn(m, m, |i, j| Complex64::new(r[(i, j)], r[(i + m, j)]))
}

/// Largest singular value of a complex matrix, from the real embedding of
/// `B*B`.
fn largest_singular_value(b: &CMat) -> f64 {
    let gram = b.adjoint() * b;
    let lmax = real_embedding(&gram).symmetric_eigen().eigenvalues.max();
    lmax.max(0.0).sqrt()
}

/// Exact verdict. For `m = 1` the margin is `2ω₁₁ + p − |q|`.
pub fn check_obstruction(inst: &ObstructionInstance) -> Result<ObstructionVerdict> {
    let a = inst.levi_form();
    let m = inst.m();
    let root = hermitian_inverse_sqrt(&a);
    let b = root.transpose() * &inst.q * &root;
    let sigma_max = largest_singular_value(&b);
    if m == 1 {
        let margin = a[(0, 0)].re - inst.q[(0, 0)].norm();
        return Ok(ObstructionVerdict {
            satisfied: margin >= 0.0,
            margin,
            witness: vec![Complex64::from(1.0)],
            sigma_max: Some(sigma_max),
        });
    }
    let eig = real_form(&a, &inst.q).symmetric_eigen();
    let (imin, margin) =
        eig.eigenvalues.iter().copied().enumerate().fold(
            (0, f64::INFINITY),
            |best, (i, l)| if l < best.1 { (i, l) } else { best },
        );
    let w = eig.eigenvectors.column(imin);
    let mut witness: Vec<Complex64> = (0..m).map(|k| Complex64::new(w[k], w[k + m])).collect();
    let norm = witness.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    witness.iter_mut().for_each(|z| *z /= norm);
    // σ_max ≤ 1 decides; near the boundary both tests agree up to rounding
    let satisfied = sigma_max <= 1.0 + 64.0 * f64::EPSILON;
    if satisfied != (margin >= 0.0) && margin.abs() > 1e-10 * (1.0 + a.norm()) {
        return Err(Error::InternalConsistency(format!(
            "singular value test ({sigma_max}) and margin ({margin}) disagree"
        )));
    }
    Ok(ObstructionVerdict {
        satisfied,
        margin,
        witness,
        sigma_max: Some(sigma_max),
    })
}

/// Real-coordinate evaluation used by the sampler: value and Riemannian
/// gradient on the unit sphere of `ℝ^{2m}`.
struct RealProblem {
    s: DMatrix<f64>,
    q_re: DMatrix<f64>,
    q_im: DMatrix<f64>,
}

impl RealProblem {
    fn new(inst: &ObstructionInstance) -> Self {
        let a = inst.levi_form();
        let zero = CMat::zeros(inst.m(), inst.m());
        let s = real_form(&a, &zero);
        // wᵀ q_re w = Re ξᵀQξ,  wᵀ q_im w = Im ξᵀQξ
        let q_re = s.clone() - real_form(&a, &inst.q);
        let iq = inst.q.map(|z| z * Complex64::new(0.0, -1.0));
        let q_im = s.clone() - real_form(&a, &iq);
        RealProblem { s, q_re, q_im }
    }

    fn value(&self, w: &DVector<f64>) -> f64 {
        let c = Complex64::new(w.dot(&(&self.q_re * w)), w.dot(&(&self.q_im * w)));
        w.dot(&(&self.s * w)) - c.norm()
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        let qr = &self.q_re * w;
        let qi = &self.q_im * w;
        let c = Complex64::new(w.dot(&qr), w.dot(&qi));
        let mut g = &self.s * w * 2.0;
        if c.norm() > 0.0 {
            g -= (qr * c.re + qi * c.im) * (2.0 / c.norm());
        }
        let radial = g.dot(w);
        g - w * radial
    }

    fn refine(&self, mut w: DVector<f64>) -> (f64, DVector<f64>) {
        let mut f = self.value(&w);
        let mut step = 0.1;
        for _ in 0..2000 {
            let g = self.gradient(&w);
            let gn = g.norm_squared();
            if gn < 1e-26 {
                break;
            }
            let mut accepted = false;
            while step > 1e-16 {
                let trial = (&w - &g * step).normalize();
                let ft = self.value(&trial);
                if ft <= f - 1e-4 * step * gn {
                    w = trial;
                    f = ft;
                    accepted = true;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (f, w)
    }
}

const SAMPLER_SHARDS: u64 = 8;
const REFINED_CANDIDATES: usize = 4;

/// Margin estimated by sampling unit vectors and descending from the best
/// samples. Deterministic for a fixed seed: each shard derives its own seed
/// from the master seed and results are merged in shard order.
pub fn check_obstruction_sampled(inst: &ObstructionInstance, samples: usize, seed: u64) -> Result<ObstructionVerdict> {
    if samples < 10_000 {
        return Err(Error::InvalidInput(format!(
            "sampler needs >= 10000 samples, got {samples}"
        )));
    }
    let m = inst.m();
    let problem = RealProblem::new(inst);
    let per_shard = samples.div_ceil(SAMPLER_SHARDS as usize);
    let shard_best: Vec<(f64, DVector<f64>)> = (0..SAMPLER_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ shard.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut best: Vec<(f64, DVector<f64>)> = Vec::with_capacity(REFINED_CANDIDATES + 1);
            for _ in 0..per_shard {
                let w = DVector::from_fn(2 * m, |_, _| {
                    // Box–Muller: isotropic direction
                    let u1: f64 = 1.0 - rng.gen::<f64>();
                    let u2: f64 = rng.gen();
                    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                });
                if w.norm() == 0.0 {
                    continue;
                }
                let w = w.normalize();
                let f = problem.value(&w);
                if best.len() < REFINED_CANDIDATES || f < best[best.len() - 1].0 {
                    best.push((f, w));
                    best.sort_by(|a, b| a.0.total_cmp(&b.0));
                    best.truncate(REFINED_CANDIDATES);
                }
            }
            best.into_iter()
                .map(|(_, w)| problem.refine(w))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("shard has samples")
        })
        .collect();
    let (margin, w) = shard_best
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one shard");
    let witness = (0..m).map(|k| Complex64::new(w[k], w[k + m])).collect();
    Ok(ObstructionVerdict {
        satisfied: margin >= 0.0,
        margin,
        witness,
        sigma_max: None,
    })
}

/// Search lattice for the radial cutoff of [`build_symmetric_potential`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    /// Outer radius `ρ` of the cutoff `χ` (support of the quadratic jet).
    pub radii: Vec<f64>,
    /// Plateau radius as a fraction of `ρ` (`χ = 1` inside).
    pub plateau_fractions: Vec<f64>,
    /// Radius beyond which the potential vanishes; below `1/2`.
    pub outer_radius: f64,
    /// Lower bound for `ω₁₁ + v_{zz̄}` as a fraction of `min(ω₁₁, ω₁₁ + p)`.
    pub floor_fraction: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        CutoffSpec {
            radii: vec![0.08, 0.1, 0.12, 0.15, 0.18, 0.22, 0.26, 0.3],
            plateau_fractions: vec![0.2, 0.35, 0.5],
            outer_radius: 0.49,
            floor_fraction: 0.25,
        }
    }
}

impl CutoffSpec {
    fn validate(&self) -> Result<()> {
        let ok = !self.radii.is_empty()
            && !self.plateau_fractions.is_empty()
            && self.outer_radius > 0.0
            && self.outer_radius < 0.5
            && self.radii.iter().all(|&r| r > 0.0 && r < self.outer_radius)
            && self.plateau_fractions.iter().all(|&f| (0.0..1.0).contains(&f))
            && self.floor_fraction > 0.0
            && self.floor_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid cutoff search space {self:?}")))
        }
    }
}

/// A g-invariant potential together with the profile that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricPotential {
    pub v: GridSlice,
    pub radius: f64,
    pub plateau: f64,
    /// `min ω₁₁ + v_{zz̄}` over the grid (discrete).
    pub min_levi: f64,
    /// Discrete `v_{zz̄}(0)` and `v_{zz}(0)`.
    pub p_discrete: f64,
    pub q_discrete: Complex64,
}

/// Quintic smoothstep cutoff: 1 on `[0, r0]`, 0 beyond `rho`, with
/// `(χ, χ', χ'')`.
fn cutoff(r: f64, r0: f64, rho: f64) -> (f64, f64, f64) {
    if r <= r0 {
        return (1.0, 0.0, 0.0);
    }
    if r >= rho {
        return (0.0, 0.0, 0.0);
    }
    let w = rho - r0;
    let s = (r - r0) / w;
    let s2 = s * s;
    let step = s2 * s * (10.0 - 15.0 * s + 6.0 * s2);
    let d1 = 30.0 * s2 * (1.0 - s) * (1.0 - s);
    let d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
    (1.0 - step, -d1 / w, -d2 / (w * w))
}

/// Tabulated radial correction `ψ` with `Δψ = F'/r`, `F = rψ'`.
struct RadialCorrection {
    dr: f64,
    psi: Vec<f64>,
    dpsi: Vec<f64>,
}

impl RadialCorrection {
    fn eval(&self, r: f64) -> f64 {
        let x = r / self.dr;
        let k = x.floor() as usize;
        if k + 1 >= self.psi.len() {
            return 0.0;
        }
        let s = x - k as f64;
        let (p0, p1) = (self.psi[k], self.psi[k + 1]);
        let (m0, m1) = (self.dpsi[k] * self.dr, self.dpsi[k + 1] * self.dr);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
    }
}

const RADIAL_STEPS: usize = 20_000;

/// Builds `ψ` so that `ω + v_{zz̄} ≥ δ` in the worst angular direction while
/// the cutoff bends the quadratic jet, then returns the Levi slack to zero
/// flux before `outer`. `None` if the return leg would push the Levi form
/// below `δ`.
fn radial_correction(
    omega: f64,
    p: f64,
    q_abs: f64,
    r0: f64,
    rho: f64,
    outer: f64,
    delta: f64,
) -> Option<RadialCorrection> {
    let dr = outer / RADIAL_STEPS as f64;
    let rs: Vec<f64> = (0..=RADIAL_STEPS).map(|k| k as f64 * dr).collect();
    let bump = |r: f64| {
        if r <= rho || r >= outer {
            0.0
        } else {
            // flat-topped: sin² ramps over the first and last quarter
            let s = (r - rho) / (outer - rho);
            let edge = s.min(1.0 - s);
            if edge >= 0.25 {
                1.0
            } else {
                (2.0 * std::f64::consts::PI * edge).sin().powi(2)
            }
        }
    };
    let rising = |r: f64| {
        let (chi, d1, d2) = cutoff(r, r0, rho);
        let a = r * r * d2 + 5.0 * r * d1;
        let b = a + 4.0 * chi;
        (r * (4.0 * delta - 4.0 * omega - p * b + q_abs * a.abs())).max(0.0)
    };
    // cumulative trapezoid of F' on the rising leg
    let mut flux = vec![0.0; rs.len()];
    let mut prev = rising(0.0);
    for k in 1..rs.len() {
        let cur = if rs[k] <= rho { rising(rs[k]) } else { 0.0 };
        flux[k] = flux[k - 1] + 0.5 * dr * (prev + cur);
        prev = cur;
    }
    let peak = flux[rs.iter().position(|&r| r > rho).unwrap_or(rs.len() - 1)];
    let mut weight = 0.0;
    let mut prev_w = 0.0;
    let mut weights = vec![0.0; rs.len()];
    for k in 1..rs.len() {
        let cur = rs[k] * bump(rs[k]);
        weight += 0.5 * dr * (prev_w + cur);
        weights[k] = weight;
        prev_w = cur;
    }
    let mu = if weight > 0.0 { peak / weight } else { 0.0 };
    if omega - 0.25 * mu > delta {
        for k in 0..rs.len() {
            if rs[k] > rho {
                flux[k] = peak - mu * weights[k];
            }
        }
        if let Some(last) = flux.last_mut() {
            *last = 0.0;
        }
    } else {
        return None;
    }
    let dpsi: Vec<f64> = rs
        .iter()
        .zip(&flux)
        .map(|(&r, &f)| if r > 0.0 { f / r } else { 0.0 })
        .collect();
    // ψ(outer) = 0, integrate inward
    let mut psi = vec![0.0; rs.len()];
    for k in (0..rs.len() - 1).rev() {
        psi[k] = psi[k + 1] - 0.5 * dr * (dpsi[k] + dpsi[k + 1]);
    }
    Some(RadialCorrection { dr, psi, dpsi })
}

/// Discrete `min ω + v_{zz̄}` and the jet at the origin node.
fn discrete_levi(v: &GridSlice, omega: f64) -> (f64, f64, Complex64) {
    let grid = v.grid;
    let n = grid.nodes();
    let mut min_levi = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if let Some(nb) = Neighborhood::gather(v.values(), &grid, i, j) {
                min_levi = min_levi.min(omega + nb.d_zzbar());
            }
        }
    }
    let nb = Neighborhood::gather(v.values(), &grid, 0, 0).expect("torus origin is interior");
    (min_levi, nb.d_zzbar(), nb.d_zz())
}

/// g-invariant torus potential with `v_{zz̄}(0) = p`, `v_{zz}(0) = q`:
/// `v = χ(|z|)(p|z|² + Re(q z²)) + ψ(|z|)`, where `ψ` is a radial term that
/// is constant near the origin and keeps `ω₁₁ + v_{zz̄} > 0` where the
/// cutoff bends the jet. Searches the cutoff lattice and keeps the profile
/// with the largest discrete Levi minimum.
pub fn build_symmetric_potential(
    grid: Grid,
    omega: KahlerCoefficient,
    p: f64,
    q: Complex64,
    profile: &CutoffSpec,
) -> Result<SymmetricPotential> {
    if grid.topology() != Topology::Torus {
        return Err(Error::InvalidInput(
            "symmetric potentials are built on the torus".into(),
        ));
    }
    profile.validate()?;
    let w = omega.value();
    if !(w + p > 0.0) || !q.re.is_finite() || !q.im.is_finite() {
        return Err(Error::InvalidPotential(format!(
            "omega11 + p must be positive, got {}",
            w + p
        )));
    }
    if p == 0.0 && q == Complex64::from(0.0) {
        let v = GridSlice::zeros(grid);
        return Ok(SymmetricPotential {
            v,
            radius: 0.0,
            plateau: 0.0,
            min_levi: w,
            p_discrete: 0.0,
            q_discrete: q,
        });
    }
    let delta = profile.floor_fraction * w.min(w + p);
    let h = grid.h();
    let mut best: Option<SymmetricPotential> = None;
    let mut best_margin = f64::NEG_INFINITY;
    let mut fitted = 0;
    for &rho in &profile.radii {
        for &frac in &profile.plateau_fractions {
            let r0 = frac * rho;
            // the plateau must hold the origin stencil, the ramp needs a few cells
            if r0 < 1.5 * h || rho - r0 < 3.0 * h {
                continue;
            }
            fitted += 1;
            // without a feasible correction the bare cutoff is still scored,
            // so an exhausted search reports a finite best margin
            let corr = radial_correction(w, p, q.norm(), r0, rho, profile.outer_radius, delta);
            let v = GridSlice::from_fn(grid, |z| {
                let r = z.norm();
                let (chi, _, _) = cutoff(r, r0, rho);
                chi * (p * z.norm_sqr() + (q * z * z).re) + corr.as_ref().map_or(0.0, |c| c.eval(r))
            })?;
            let (min_levi, p_discrete, q_discrete) = discrete_levi(&v, w);
            if min_levi > best_margin {
                best_margin = min_levi;
                if min_levi > 0.0 {
                    best = Some(SymmetricPotential {
                        v,
                        radius: rho,
                        plateau: frac,
                        min_levi,
                        p_discrete,
                        q_discrete,
                    });
                }
            }
        }
    }
    if fitted == 0 {
        return Err(Error::InsufficientResolution(format!(
            "no cutoff profile fits a grid with h = {h}: the plateau needs at least 1.5 h and the ramp 3 h"
        )));
    }
    best.ok_or(Error::ConstructiveFailure { best_margin })
}
