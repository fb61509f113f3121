//! Harmonic analysis on the strip `S = {0 < Im s < 1}`: the Poisson kernel,
//! harmonic extension of bounded boundary data, the truncated test family
//! `f_λ`, and the functionals `I`, `J`, `K` that drive the Hessian bound.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_real_window, QuadratureResult, QuadratureSpec};

/// A point `xi + i eta` of the closed strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripPoint {
    pub xi: f64,
    pub eta: f64,
}

impl StripPoint {
    pub fn new(xi: f64, eta: f64) -> Result<Self> {
        if !xi.is_finite() || !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain(format!("({xi}, {eta}) is not in the closed strip")));
        }
        Ok(StripPoint { xi, eta })
    }

    pub fn is_interior(&self) -> bool {
        self.eta > 0.0 && self.eta < 1.0
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.xi, self.eta)
    }
}

type LineFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Boundary values on `Im s = 0` (`lower`) and `Im s = 1` (`upper`).
///
/// `decay_hint` is the half-width of the window outside of which the data is
/// bounded, so the kernel decay controls the tail.
pub struct StripBoundaryData {
    lower: LineFn,
    upper: LineFn,
    pub decay_hint: f64,
}

impl std::fmt::Debug for StripBoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StripBoundaryData")
            .field("decay_hint", &self.decay_hint)
            .finish_non_exhaustive()
    }
}

impl StripBoundaryData {
    pub fn new<L, U>(lower: L, upper: U, decay_hint: f64) -> Self
    where
        L: Fn(f64) -> f64 + Send + Sync + 'static,
        U: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        StripBoundaryData {
            lower: Box::new(lower),
            upper: Box::new(upper),
            decay_hint: decay_hint.abs(),
        }
    }

    pub fn constant(lower: f64, upper: f64) -> Self {
        Self::new(move |_| lower, move |_| upper, 0.0)
    }

    /// `(|f_λ(t)|², |f_λ(t+i)|²)`, the data of the first comparison function.
    pub fn f_lambda_modulus(lambda: f64) -> Self {
        Self::new(
            move |t| f_lambda_unchecked(Complex64::new(t, 0.0), lambda).norm_sqr(),
            move |t| f_lambda_unchecked(Complex64::new(t, 1.0), lambda).norm_sqr(),
            lambda,
        )
    }

    pub fn lower(&self, t: f64) -> f64 {
        (self.lower)(t)
    }

    pub fn upper(&self, t: f64) -> f64 {
        (self.upper)(t)
    }

    /// `a·self + b·other`, evaluated pointwise.
    pub fn combine(self, a: f64, other: StripBoundaryData, b: f64) -> StripBoundaryData {
        let decay_hint = self.decay_hint.max(other.decay_hint);
        let (l1, u1, l2, u2) = (self.lower, self.upper, other.lower, other.upper);
        StripBoundaryData {
            lower: Box::new(move |t| a * l1(t) + b * l2(t)),
            upper: Box::new(move |t| a * u1(t) + b * u2(t)),
            decay_hint,
        }
    }
}

/// Poisson kernel of the strip,
/// `P(ξ, η) = sin πη / (2 (cosh πξ − cos πη))`, for `0 < η < 1`.
pub fn poisson_kernel(xi: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) || !xi.is_finite() {
        return Err(Error::Domain(format!(
            "Poisson kernel needs 0 < eta < 1 and finite xi, got ({xi}, {eta})"
        )));
    }
    Ok(poisson_kernel_unchecked(xi, eta))
}

// Near the midline cos πη is taken as sin(π(1/2 − η)), which vanishes exactly at
// η = 1/2. Towards the boundary the form
// sin πη e^{-x} / ((1 − e^{-x})² + 4 e^{-x} sin²(πη/2)), x = π|ξ|,
// avoids the cancellation in cosh πξ − cos πη.
#[inline]
pub(crate) fn poisson_kernel_unchecked(xi: f64, eta: f64) -> f64 {
    let x = PI * xi.abs();
    let offset = 0.5 - eta;
    if offset.abs() <= 0.25 {
        return (PI * eta).sin() / (2.0 * (x.cosh() - (PI * offset).sin()));
    }
    let e = (-x).exp();
    let em1 = (-x).exp_m1();
    let s = (0.5 * PI * eta).sin();
    (PI * eta).sin() * e / (em1 * em1 + 4.0 * e * s * s)
}

/// `1 / cosh(πt)` without overflow.
#[inline]
pub fn sech_pi(t: f64) -> f64 {
    let e = (-PI * t.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

/// Harmonic extension of `data` to the interior point `p` by the two-term
/// Poisson integral.
pub fn harmonic_extend(data: &StripBoundaryData, p: StripPoint, quad: &QuadratureSpec) -> Result<QuadratureResult> {
    if !p.is_interior() {
        return Err(Error::Domain(format!(
            "harmonic extension needs an interior point, got eta = {}",
            p.eta
        )));
    }
    let StripPoint { xi, eta } = p;
    let integrand = |t: f64| {
        let lower_weight = poisson_kernel_unchecked(t - xi, eta);
        let upper_weight = poisson_kernel_unchecked(t - xi, 1.0 - eta);
        let mut acc = 0.0;
        // skip evaluating data where the weight has underflowed; the data may be large there
        if lower_weight != 0.0 {
            acc += lower_weight * data.lower(t);
        }
        if upper_weight != 0.0 {
            acc += upper_weight * data.upper(t);
        }
        acc
    };
    let lo = xi.min(-data.decay_hint);
    let hi = xi.max(data.decay_hint);
    integrate_real_window(integrand, lo, hi, PI, quad)
}

/// The truncated comparison function
/// `f_λ(s) = (e^{πs/2} − e^{πi/4}) / (1 + e^{π(s−λ)/2})` on the closed strip.
pub fn f_lambda(s: Complex64, lambda: f64) -> Result<Complex64> {
    if !(0.0..=1.0).contains(&s.im) || !s.re.is_finite() || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "f_lambda needs s in the closed strip and finite lambda, got s = {s}, lambda = {lambda}"
        )));
    }
    Ok(f_lambda_unchecked(s, lambda))
}

#[inline]
pub(crate) fn f_lambda_unchecked(s: Complex64, lambda: f64) -> Complex64 {
    let c = Complex64::from_polar(1.0, PI / 4.0);
    if s.re <= lambda {
        let num = (s * (PI / 2.0)).exp() - c;
        let den = 1.0 + ((s - lambda) * (PI / 2.0)).exp();
        num / den
    } else {
        // divide through by e^{π(s−λ)/2} past the cutoff
        let w = (-(s - lambda) * (PI / 2.0)).exp();
        let num = Complex64::new((PI * lambda / 2.0).exp(), 0.0) - c * w;
        num / (w + 1.0)
    }
}

/// `I`, `J`, `K` for `f_λ`, each with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IjkValues {
    pub lambda: f64,
    pub i: f64,
    pub j: f64,
    pub k: f64,
    pub error_i: f64,
    pub error_j: f64,
    pub error_k: f64,
}

impl IjkValues {
    /// `(I/(2λ), J/(2λ), K/(−2λ))`, each tending to 1.
    pub fn normalized(&self) -> (f64, f64, f64) {
        let two_lambda = 2.0 * self.lambda;
        (self.i / two_lambda, self.j / two_lambda, -self.k / two_lambda)
    }

    /// `|K| ≤ J` up to the quadrature error.
    pub fn k_bounded_by_j(&self) -> bool {
        self.k.abs() <= self.j + self.error_j + self.error_k
    }
}

pub fn ijk_functionals(lambda: f64, quad: &QuadratureSpec) -> Result<IjkValues> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let window = |g: &dyn Fn(f64) -> f64| integrate_real_window(g, 0.0, lambda, PI, quad);
    let i = window(&|t| f_lambda_unchecked(Complex64::new(t, 0.0), lambda).norm_sqr() * sech_pi(t))?;
    let j = window(&|t| f_lambda_unchecked(Complex64::new(t, 1.0), lambda).norm_sqr() * sech_pi(t))?;
    let k = window(&|t| {
        let f = f_lambda_unchecked(Complex64::new(t, 1.0), lambda);
        (f * f).re * sech_pi(t)
    })?;
    Ok(IjkValues {
        lambda,
        i: i.value,
        j: j.value,
        k: k.value,
        error_i: i.error_estimate,
        error_j: j.error_estimate,
        error_k: k.error_estimate,
    })
}

/// `r(I+J) + pJ + |q|K` for the given functionals.
///
/// This is twice the harmonic majorant `r ψ₁ + p ψ₂ + |q| ψ₃` at `i/2`
/// (with `|ζ| = 1`); divided by `2λ` it tends to `p + 2r − |q|`.
pub fn majorant_combination_from(ijk: &IjkValues, p: f64, q_abs: f64, r: f64) -> f64 {
    r * (ijk.i + ijk.j) + p * ijk.j + q_abs * ijk.k
}

pub fn majorant_combination(p: f64, q_abs: f64, r: f64, lambda: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(r > 0.0) || !(p > -r) || !(q_abs >= 0.0) {
        return Err(Error::Domain(format!(
            "need r > 0, p > -r and |q| >= 0, got p = {p}, |q| = {q_abs}, r = {r}"
        )));
    }
    let ijk = ijk_functionals(lambda, quad)?;
    Ok(majorant_combination_from(&ijk, p, q_abs, r))
}

/// One row of the `λ → ∞` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRow {
    #[serde(flatten)]
    pub values: IjkValues,
    pub i_ratio: f64,
    pub j_ratio: f64,
    pub k_ratio: f64,
}

pub fn strip_asymptotics(lambdas: &[f64], quad: &QuadratureSpec) -> Result<Vec<AsymptoticRow>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let values = ijk_functionals(lambda, quad)?;
            let (i_ratio, j_ratio, k_ratio) = values.normalized();
            Ok(AsymptoticRow {
                values,
                i_ratio,
                j_ratio,
                k_ratio,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_at_center_of_midline() {
        assert_eq!(poisson_kernel(0.0, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn kernel_rejects_boundary() {
        assert!(poisson_kernel(0.3, 0.0).is_err());
        assert!(poisson_kernel(0.3, 1.0).is_err());
        assert!(poisson_kernel(0.3, -0.2).is_err());
        assert!(poisson_kernel(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn kernel_far_out_does_not_overflow() {
        let v = poisson_kernel(400.0, 0.3).unwrap();
        assert!((0.0..1e-300).contains(&v));
    }

    #[test]
    fn f_lambda_vanishes_at_midpoint() {
        for lambda in [0.5, 5.0, 40.0] {
            let v = f_lambda(Complex64::new(0.0, 0.5), lambda).unwrap();
            assert!(v.norm() < 1e-15);
        }
    }

    #[test]
    fn f_lambda_branches_agree_at_cutoff() {
        let lambda = 7.0;
        for im in [0.0, 0.4, 1.0] {
            let s = Complex64::new(lambda, im);
            let below = {
                let num = (s * (PI / 2.0)).exp() - Complex64::from_polar(1.0, PI / 4.0);
                num / (1.0 + ((s - lambda) * (PI / 2.0)).exp())
            };
            let v = f_lambda_unchecked(s, lambda);
            assert!((v - below).norm() <= 1e-12 * below.norm());
        }
    }

    #[test]
    fn f_lambda_rejects_points_off_strip() {
        assert!(f_lambda(Complex64::new(0.0, 1.5), 3.0).is_err());
        assert!(f_lambda(Complex64::new(0.0, -0.1), 3.0).is_err());
    }

    #[test]
    fn combination_requires_headroom() {
        let q = QuadratureSpec::default();
        assert!(majorant_combination(-2.0, 0.0, 1.0, 5.0, &q).is_err());
        assert!(majorant_combination(0.0, 0.0, 0.0, 5.0, &q).is_err());
    }

    #[test]
    fn harmonic_extend_rejects_boundary_point() {
        let data = StripBoundaryData::constant(1.0, 1.0);
        let p = StripPoint::new(0.0, 1.0).unwrap();
        assert!(harmonic_extend(&data, p, &QuadratureSpec::default()).is_err());
    }
}
