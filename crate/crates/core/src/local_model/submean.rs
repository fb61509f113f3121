use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples of a real function on a uniform rectangular grid in the complex
/// plane: `values[i * ny + j] = φ(origin + i h + i·j h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSamples {
    pub origin: Complex64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl PlaneSamples {
    pub fn from_fn<F: Fn(Complex64) -> f64>(origin: Complex64, h: f64, nx: usize, ny: usize, f: F) -> Self {
        let mut values = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                values.push(f(origin + Complex64::new(i as f64 * h, j as f64 * h)));
            }
        }
        PlaneSamples {
            origin,
            h,
            nx,
            ny,
            values,
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ny + j]
    }

    /// Bilinear interpolation; `None` outside the sampled rectangle.
    pub fn interpolate(&self, z: Complex64) -> Option<f64> {
        let u = (z.re - self.origin.re) / self.h;
        let v = (z.im - self.origin.im) / self.h;
        let (mx, my) = ((self.nx - 1) as f64, (self.ny - 1) as f64);
        if !(0.0..=mx).contains(&u) || !(0.0..=my).contains(&v) {
            return None;
        }
        let i = (u.floor() as usize).min(self.nx - 2);
        let j = (v.floor() as usize).min(self.ny - 2);
        let (fu, fv) = (u - i as f64, v - j as f64);
        Some(
            (1.0 - fu) * (1.0 - fv) * self.at(i, j)
                + fu * (1.0 - fv) * self.at(i + 1, j)
                + (1.0 - fu) * fv * self.at(i, j + 1)
                + fu * fv * self.at(i + 1, j + 1),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubmeanReport {
    pub pass: bool,
    /// Largest `φ(c) − mean_{|z−c|=r} φ` seen.
    pub worst_excess: f64,
    pub checks: usize,
    pub failures: usize,
}

/// Sub-mean-value test: at every sample node whose discs of the given radii
/// fit inside the sampled rectangle, compare `φ(c)` with the circle average
/// (trapezoidal rule on the circle, bilinear interpolation between nodes).
pub fn submeanvalue_test(phi: &PlaneSamples, radii: &[f64], tol: f64) -> Result<SubmeanReport> {
    if phi.nx < 2 || phi.ny < 2 || phi.values.len() != phi.nx * phi.ny {
        return Err(Error::InvalidInput(
            "sample grid must be at least 2×2 and consistent".into(),
        ));
    }
    if let Some(pos) = phi.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            location: format!("sample {pos}"),
        });
    }
    let r_max = radii.iter().cloned().fold(0.0f64, f64::max);
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Domain("radii must be positive".into()));
    }
    let margin = (r_max / phi.h).ceil() as usize;
    if 2 * margin >= phi.nx.min(phi.ny) {
        return Err(Error::Domain(format!("radius {r_max} exceeds the sampled patch")));
    }
    let mut report = SubmeanReport {
        pass: true,
        worst_excess: f64::NEG_INFINITY,
        checks: 0,
        failures: 0,
    };
    for i in margin..phi.nx - margin {
        for j in margin..phi.ny - margin {
            let center = phi.origin + Complex64::new(i as f64 * phi.h, j as f64 * phi.h);
            for &r in radii {
                let m = (8.0 * PI * r / phi.h).ceil().max(16.0) as usize;
                let mut sum = 0.0;
                for l in 0..m {
                    let z = center + Complex64::from_polar(r, 2.0 * PI * l as f64 / m as f64);
                    sum += phi
                        .interpolate(z)
                        .ok_or_else(|| Error::Domain(format!("circle of radius {r} leaves the patch")))?;
                }
                let excess = phi.at(i, j) - sum / m as f64;
                report.checks += 1;
                report.worst_excess = report.worst_excess.max(excess);
                if excess > tol {
                    report.failures += 1;
                    report.pass = false;
                }
            }
        }
    }
    Ok(report)
}
