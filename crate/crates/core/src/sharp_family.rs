//! The family `u(s, z) = −(2 Im s/(ε + Im s)) (Re z)²` on the unit disc with
//! `ω = i dz∧dz̄`: a weak geodesic whose boundary potential meets the
//! obstruction inequality with margin `2 − 2/(1+ε)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_model::{reduced_hessian, Grid, GridFunction, KahlerCoefficient, ReducedHessian};
use crate::obstruction::{check_obstruction, ObstructionInstance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpFamilyParams {
    pub epsilon: f64,
}

impl SharpFamilyParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(SharpFamilyParams { epsilon })
        } else {
            Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")))
        }
    }

    /// `g(t) = 2t/(ε+t)` and its first two derivatives.
    pub fn profile(&self, t: f64) -> (f64, f64, f64) {
        let e = self.epsilon;
        let d = e + t;
        (2.0 * t / d, 2.0 * e / (d * d), -4.0 * e / (d * d * d))
    }
}

pub fn eval_family(params: SharpFamilyParams, t: f64, z: Complex64) -> f64 {
    let x = z.re;
    -params.profile(t).0 * x * x
}

/// Exact reduced Hessian (`ω₁₁ = 1`).
pub fn family_hessian_closed_form(params: SharpFamilyParams, t: f64, z: Complex64) -> ReducedHessian {
    let (g, g1, g2) = params.profile(t);
    let x = z.re;
    ReducedHessian {
        a: -0.25 * g2 * x * x,
        b: Complex64::new(0.0, 0.5 * g1 * x),
        c: 1.0 - 0.5 * g,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    pub epsilon: f64,
    /// `2 + v_{zz̄}(0)` with `v = u(1, ·)`.
    pub levi: f64,
    /// `|v_{zz}(0)|`.
    pub bilinear: f64,
    pub margin: f64,
}

/// Jet of the boundary potential at the origin for each ε, with the
/// obstruction margin `2 + v_{zz̄}(0) − |v_{zz}(0)|`.
pub fn sharpness_limit(eps_sequence: &[f64]) -> Result<Vec<SharpnessRow>> {
    eps_sequence
        .iter()
        .map(|&eps| {
            let params = SharpFamilyParams::new(eps)?;
            // v = −g(1) x², so v_{zz̄} = v_{zz} = −g(1)/2
            let jet = -0.5 * params.profile(1.0).0;
            let verdict = check_obstruction(&ObstructionInstance::scalar(1.0, jet, jet.into())?)?;
            Ok(SharpnessRow {
                epsilon: eps,
                levi: 2.0 + jet,
                bilinear: jet.abs(),
                margin: verdict.margin,
            })
        })
        .collect()
}

/// The unit square `[−1/2, 1/2]²` split into `intervals` cells per axis.
pub fn family_patch(intervals: usize) -> Result<Grid> {
    Grid::patch(Complex64::new(0.0, 0.0), 1.0, intervals)
}

/// The family sampled on `family_patch(intervals)` with `dt = h`.
pub fn sample_family(params: SharpFamilyParams, intervals: usize) -> Result<GridFunction> {
    GridFunction::from_fn(family_patch(intervals)?, intervals + 1, true, |t, z| {
        eval_family(params, t, z)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyCheck {
    pub intervals: usize,
    pub h: f64,
    /// Max `|det|` of the discrete reduced Hessian over interior nodes.
    pub max_abs_det: f64,
    /// Max deviation of the discrete from the closed-form Hessian entries.
    pub max_entry_error: f64,
    /// `min (1 + u_{zz̄})` over the grid and its exact value `ε/(ε+1)`.
    pub min_levi: f64,
    pub min_levi_exact: f64,
    /// Max `|u|` on the slice `t = 0` and on the line `Re z = 0`.
    pub boundary_t0: f64,
    pub boundary_axis: f64,
}

/// Discrete checks of the family on one patch resolution.
pub fn check_family_grid(params: SharpFamilyParams, intervals: usize) -> Result<FamilyCheck> {
    let u = sample_family(params, intervals)?;
    let grid = u.grid;
    let omega = KahlerCoefficient::new(1.0)?;
    let field = reduced_hessian(&u, omega)?;
    let mut max_abs_det = 0.0f64;
    let mut max_entry_error = 0.0f64;
    let mut min_levi = f64::INFINITY;
    for (k, i, j, h) in field.iter() {
        max_abs_det = max_abs_det.max(h.det().abs());
        min_levi = min_levi.min(h.c);
        let exact = family_hessian_closed_form(params, u.t(k), grid.coord(i, j));
        max_entry_error = max_entry_error
            .max((h.a - exact.a).abs())
            .max((h.b - exact.b).norm())
            .max((h.c - exact.c).abs());
    }
    let n = grid.nodes();
    let mut boundary_t0 = 0.0f64;
    let mut boundary_axis = 0.0f64;
    let mid = (n - 1) / 2;
    for i in 0..n {
        for j in 0..n {
            boundary_t0 = boundary_t0.max(u.get(0, i, j).abs());
        }
    }
    if (n - 1) % 2 == 0 {
        for k in 0..u.nt() {
            for j in 0..n {
                boundary_axis = boundary_axis.max(u.get(k, mid, j).abs());
            }
        }
    }
    let e = params.epsilon;
    Ok(FamilyCheck {
        intervals,
        h: grid.h(),
        max_abs_det,
        max_entry_error,
        min_levi,
        min_levi_exact: e / (e + 1.0),
        boundary_t0,
        boundary_axis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(e: f64) -> SharpFamilyParams {
        SharpFamilyParams::new(e).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(eval_family(params(1.0), 0.0, Complex64::new(0.7, -0.2)), 0.0);
        assert_eq!(eval_family(params(0.3), 0.6, Complex64::new(0.0, 0.9)), 0.0);
        assert_eq!(eval_family(params(1.0), 1.0, Complex64::new(0.5, 0.0)), -0.25);
    }

    #[test]
    fn closed_form_determinant_vanishes() {
        let h = family_hessian_closed_form(params(1.0), 0.5, Complex64::new(0.3, 0.0));
        assert!(h.det().abs() < 1e-16);
        let h = family_hessian_closed_form(params(0.2), 0.7, Complex64::new(0.0, 0.4));
        assert_eq!((h.a, h.b.norm(), h.det()), (0.0, 0.0, 0.0));
        assert!((h.c - 0.2 / 0.9).abs() < 1e-15);
    }

    #[test]
    fn sharpness_rows() {
        let rows = sharpness_limit(&[1.0, 0.01]).unwrap();
        assert!((rows[0].levi - 1.5).abs() < 1e-15 && (rows[0].bilinear - 0.5).abs() < 1e-15);
        assert!((rows[0].margin - 1.0).abs() < 1e-15);
        assert!((rows[1].levi - (2.0 - 1.0 / 1.01)).abs() < 1e-15);
        assert!((rows[1].margin - 0.02 / 1.01).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        assert!(SharpFamilyParams::new(0.0).is_err());
    }
}
