use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureSpec};

/// A function `U(z₁, z₂)` together with its `∂_{z₂}∂_{z̄₂}` derivative.
pub trait DiscTestField {
    fn value(&self, z1: Complex64, z2: Complex64) -> f64;
    fn d_z2_z2bar(&self, z1: Complex64, z2: Complex64) -> f64;
}

/// Test field built from a pair of closures.
pub struct ClosureField<F, G> {
    pub value: F,
    pub d_z2_z2bar: G,
}

impl<F, G> DiscTestField for ClosureField<F, G>
where
    F: Fn(Complex64, Complex64) -> f64,
    G: Fn(Complex64, Complex64) -> f64,
{
    fn value(&self, z1: Complex64, z2: Complex64) -> f64 {
        (self.value)(z1, z2)
    }

    fn d_z2_z2bar(&self, z1: Complex64, z2: Complex64) -> f64 {
        (self.d_z2_z2bar)(z1, z2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_error: f64,
    pub rhs_error: f64,
}

impl GreenIdentity {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Both sides of the disc mean-value identity in the `z₂` variable at
/// fixed `z₁`:
///
/// `(1/r²) ∫₀¹ (U(z₁, r e^{2πit}) − U(z₁, 0)) dt
///   = (2/(πr²)) ∫_{|z₂|≤r} (log r − log|z₂|) U_{z₂z̄₂} dx dy`,
///
/// the right side being `(i/πr²) ∫ … dz₂∧dz̄₂` written with
/// `dz∧dz̄ = −2i dx dy`.
pub fn green_disc_identity<U: DiscTestField>(
    field: &U,
    z1: Complex64,
    r: f64,
    quad: &QuadratureSpec,
) -> Result<GreenIdentity> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("disc radius must be positive, got {r}")));
    }
    let zero = Complex64::new(0.0, 0.0);
    let u0 = field.value(z1, zero);
    let lhs_q = integrate(
        |t| field.value(z1, Complex64::from_polar(r, 2.0 * PI * t)) - u0,
        0.0,
        1.0,
        8,
        quad,
    )?;

    // inner angular integrals get a tighter budget so the outer estimate dominates
    let inner_spec = QuadratureSpec {
        tolerance: quad.tolerance * 1e-2,
        ..*quad
    };
    let log_r = r.ln();
    let inner_failure = RefCell::new(None);
    let radial = |rho: f64| {
        if rho == 0.0 {
            return 0.0;
        }
        let ring = integrate(
            |theta| field.d_z2_z2bar(z1, Complex64::from_polar(rho, theta)),
            0.0,
            2.0 * PI,
            4,
            &inner_spec,
        );
        match ring {
            Ok(q) => (log_r - rho.ln()) * rho * q.value,
            Err(e) => {
                inner_failure.borrow_mut().get_or_insert(e);
                // NaN aborts the outer integral
                f64::NAN
            }
        }
    };
    let rhs_q = integrate(radial, 0.0, r, 4, quad);
    if let Some(e) = inner_failure.into_inner() {
        return Err(e);
    }
    let rhs_q = rhs_q?;
    let scale = 2.0 / (PI * r * r);
    Ok(GreenIdentity {
        lhs: lhs_q.value / (r * r),
        rhs: scale * rhs_q.value,
        lhs_error: lhs_q.error_estimate / (r * r),
        rhs_error: scale * rhs_q.error_estimate,
    })
}
