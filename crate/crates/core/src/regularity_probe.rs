//! Diagnostics on computed geodesics at the fixed point `x₀` of the
//! involution: linearity of `t ↦ u(t, x₀)`, convexity of
//! `t ↦ log(ω₁₁ + u_{zz̄}(t, x₀))`, and the behaviour of `u_{zz̄}` near `x₀`
//! under grid refinement.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic_envelope::{solve_envelope, EnvelopeProblem, EnvelopeResult, Scheme};
use crate::local_model::{Grid, GridFunction, GridSlice, KahlerCoefficient, Neighborhood};
use crate::obstruction::{build_symmetric_potential, CutoffSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDiagnostics {
    pub x0: (usize, usize),
    /// Slope of the line through `(0, 0)` and `(1, u(1, x₀))`.
    pub a_fit: f64,
    /// `max_k |u(t_k, x₀) − a_fit t_k|`.
    pub linear_residual: f64,
    /// `log(ω₁₁ + u_{zz̄})(t_k, x₀)`; `None` where the argument is `≤ 0`.
    pub lambda_trace: Vec<Option<f64>>,
}

fn check_node(u: &GridFunction, x0: (usize, usize)) -> Result<()> {
    let n = u.grid.nodes();
    if x0.0 >= n || x0.1 >= n || !u.grid.is_interior(x0.0, x0.1) {
        return Err(Error::InvalidInput(format!("x0 = {x0:?} is not an interior node")));
    }
    Ok(())
}

fn lambda_values(u: &GridFunction, omega: KahlerCoefficient, x0: (usize, usize)) -> Vec<Option<f64>> {
    (0..u.nt())
        .map(|k| {
            let nb = Neighborhood::gather(u.slice_values(k), &u.grid, x0.0, x0.1).expect("interior node");
            let arg = omega.value() + nb.d_zzbar();
            (arg > 0.0).then(|| arg.ln())
        })
        .collect()
}

/// Endpoint-pinned linear fit of `u(·, x₀)`.
pub fn linear_trace_test(
    result: &EnvelopeResult,
    omega: KahlerCoefficient,
    x0: (usize, usize),
) -> Result<TraceDiagnostics> {
    let u = &result.u;
    check_node(u, x0)?;
    let last = u.nt() - 1;
    let a_fit = u.get(last, x0.0, x0.1) - u.get(0, x0.0, x0.1);
    let linear_residual = (0..u.nt())
        .map(|k| (u.get(k, x0.0, x0.1) - u.get(0, x0.0, x0.1) - a_fit * u.t(k)).abs())
        .fold(0.0, f64::max);
    Ok(TraceDiagnostics {
        x0,
        a_fit,
        linear_residual,
        lambda_trace: lambda_values(u, omega, x0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub lambda: Vec<Option<f64>>,
    /// `(λ_{k+1} − 2λ_k + λ_{k−1})/dt²` where all three are finite.
    pub second_differences: Vec<Option<f64>>,
    /// Minimum over the finite second differences (`+∞` if none).
    pub min_second_difference: f64,
    /// Number of slices flagged as `−∞`.
    pub flagged: usize,
}

/// Discrete convexity of `λ(t) = log(ω₁₁ + u_{zz̄}(t, x₀))`.
pub fn lambda_subharmonicity_probe(
    result: &EnvelopeResult,
    omega: KahlerCoefficient,
    x0: (usize, usize),
) -> Result<LambdaReport> {
    let u = &result.u;
    check_node(u, x0)?;
    let lambda = lambda_values(u, omega, x0);
    let dt2 = u.dt() * u.dt();
    let mut second_differences = vec![None; lambda.len()];
    for k in 1..lambda.len().saturating_sub(1) {
        if let (Some(a), Some(b), Some(c)) = (lambda[k - 1], lambda[k], lambda[k + 1]) {
            second_differences[k] = Some((a - 2.0 * b + c) / dt2);
        }
    }
    let min_second_difference = second_differences
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let flagged = lambda.iter().filter(|l| l.is_none()).count();
    Ok(LambdaReport {
        lambda,
        second_differences,
        min_second_difference,
        flagged,
    })
}

/// Boundary potential sampled afresh at every grid level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialTemplate {
    Constant {
        value: f64,
    },
    /// Symmetric builder potential with a fixed cutoff profile.
    Symmetric {
        p: f64,
        q: Complex64,
        radius: f64,
        plateau: f64,
    },
}

impl PotentialTemplate {
    pub fn sample(&self, grid: Grid, omega: KahlerCoefficient) -> Result<GridSlice> {
        match *self {
            PotentialTemplate::Constant { value } => GridSlice::from_fn(grid, |_| value),
            PotentialTemplate::Symmetric { p, q, radius, plateau } => {
                let spec = CutoffSpec {
                    radii: vec![radius],
                    plateau_fractions: vec![plateau],
                    ..CutoffSpec::default()
                };
                Ok(build_symmetric_potential(grid, omega, p, q, &spec)?.v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupTemplate {
    pub omega: KahlerCoefficient,
    pub potential: PotentialTemplate,
    #[serde(default)]
    pub scheme: Scheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupRow {
    pub level: usize,
    pub h: f64,
    pub radius: f64,
    /// Max `|u_{zz̄}|` over `{(t, z) : |z − x₀| ≤ r}`.
    pub max_abs: f64,
    /// `max − min` of `u_{zz̄}` over the same set.
    pub oscillation: f64,
    pub sweeps: usize,
}

/// `u_{zz̄}` statistics near `x₀ = 0` on the torus for each level and radius.
pub fn blowup_rows(result: &EnvelopeResult, radii: &[f64]) -> Vec<BlowupRow> {
    let u = &result.u;
    let grid = u.grid;
    let n = grid.nodes();
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let (mut lo, mut hi, mut max_abs) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for k in 0..u.nt() {
            let slice = u.slice_values(k);
            for i in 0..n {
                for j in 0..n {
                    if grid.coord(i, j).norm() > r {
                        continue;
                    }
                    if let Some(nb) = Neighborhood::gather(slice, &grid, i, j) {
                        let w = nb.d_zzbar();
                        lo = lo.min(w);
                        hi = hi.max(w);
                        max_abs = max_abs.max(w.abs());
                    }
                }
            }
        }
        rows.push(BlowupRow {
            level: n,
            h: grid.h(),
            radius: r,
            max_abs,
            oscillation: if hi >= lo { hi - lo } else { 0.0 },
            sweeps: result.sweeps_used,
        });
    }
    rows
}

/// Solves the template on `Grid::torus(level)` with `nt = level + 1` for each
/// level and tabulates [`blowup_rows`].
pub fn blowup_scan(template: &BlowupTemplate, levels: &[usize], radii: &[f64]) -> Result<Vec<BlowupRow>> {
    if radii.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
        return Err(Error::InvalidInput("radii must be finite and non-negative".into()));
    }
    let mut rows = Vec::new();
    for &level in levels {
        let grid = Grid::torus(level)?;
        let v = template.potential.sample(grid, template.omega)?;
        let problem = EnvelopeProblem::torus(v, template.omega, level + 1)?.with_scheme(template.scheme);
        let result = solve_envelope(&problem)?;
        rows.extend(blowup_rows(&result, radii));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_potential_has_flat_diagnostics() {
        let omega = KahlerCoefficient::new(2.0).unwrap();
        let template = BlowupTemplate {
            omega,
            potential: PotentialTemplate::Constant { value: 0.75 },
            scheme: Scheme::default(),
        };
        let rows = blowup_scan(&template, &[8], &[0.1, 0.3]).unwrap();
        assert!(rows.iter().all(|r| r.oscillation == 0.0 && r.max_abs == 0.0));
        let grid = Grid::torus(8).unwrap();
        let v = template.potential.sample(grid, omega).unwrap();
        let res = solve_envelope(&EnvelopeProblem::torus(v, omega, 9).unwrap()).unwrap();
        let d = linear_trace_test(&res, omega, (0, 0)).unwrap();
        assert_eq!(d.a_fit, 0.75);
        assert!(d.linear_residual < 1e-15);
        let l = lambda_subharmonicity_probe(&res, omega, (0, 0)).unwrap();
        assert_eq!(l.flagged, 0);
        assert!(l.min_second_difference.abs() < 1e-9);
        assert!(l.lambda.iter().all(|x| (x.unwrap() - 2f64.ln()).abs() < 1e-12));
    }
}
