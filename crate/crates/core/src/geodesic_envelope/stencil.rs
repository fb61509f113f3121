use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A complex direction `d = (d_s, d_z)` in `ℂ_s × ℂ_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Direction {
    pub ds: Complex64,
    pub dz: Complex64,
}

impl Direction {
    pub fn new(ds: Complex64, dz: Complex64) -> Self {
        Direction { ds, dz }
    }

    fn real(ds: (f64, f64), dz: (f64, f64)) -> Self {
        Direction::new(Complex64::new(ds.0, ds.1), Complex64::new(dz.0, dz.1))
    }
}

/// `(1,0), (0,1), (1,1), (1,i), (1,−1), (1,−i)`, unnormalised so that every
/// stencil point lands on a node when `dt = h`.
pub fn default_directions() -> Vec<Direction> {
    vec![
        Direction::real((1.0, 0.0), (0.0, 0.0)),
        Direction::real((0.0, 0.0), (1.0, 0.0)),
        Direction::real((1.0, 0.0), (1.0, 0.0)),
        Direction::real((1.0, 0.0), (0.0, 1.0)),
        Direction::real((1.0, 0.0), (-1.0, 0.0)),
        Direction::real((1.0, 0.0), (0.0, -1.0)),
    ]
}

/// The discrete sub-mean-value bound along one complex line, as taps
/// relative to the centre node:
/// `u_p ≤ scale · (Σ w u(p + offset) + forcing)`.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    /// `(dk, di, dj, weight)`, centre excluded.
    pub taps: Vec<(isize, isize, isize, f64)>,
    /// `1/(1 − w_centre)`.
    pub scale: f64,
    /// `h² ω₁₁ |d_z|²`.
    pub forcing: f64,
    /// Time and space reach: `(min dk, max dk, max |di|, max |dj|)`.
    pub reach: (isize, isize, isize, isize),
}

const SNAP: f64 = 1e-9;

fn split(x: f64) -> [(isize, f64); 2] {
    let r = x.round();
    if (x - r).abs() < SNAP {
        return [(r as isize, 1.0), (r as isize, 0.0)];
    }
    let f = x.floor();
    let frac = x - f;
    [(f as isize, 1.0 - frac), (f as isize + 1, frac)]
}

impl Stencil {
    /// Points `p + (Im(ζ d_s), ζ d_z)` for `ζ ∈ {±h, ±ih}`, each with
    /// weight 1/4, spread to nodes by trilinear interpolation.
    pub fn new(d: Direction, h: f64, dt: f64, omega11: f64) -> Result<Self> {
        if d.ds.norm() == 0.0 && d.dz.norm() == 0.0 {
            return Err(Error::InvalidInput("direction must be nonzero".into()));
        }
        if [d.ds.re, d.ds.im, d.dz.re, d.dz.im].iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                location: "direction".into(),
            });
        }
        let mut acc: BTreeMap<(isize, isize, isize), f64> = BTreeMap::new();
        for zeta in [
            Complex64::new(h, 0.0),
            Complex64::new(-h, 0.0),
            Complex64::new(0.0, h),
            Complex64::new(0.0, -h),
        ] {
            let shift_t = (zeta * d.ds).im / dt;
            let shift_z = zeta * d.dz / h;
            for (dk, wk) in split(shift_t) {
                for (di, wi) in split(shift_z.re) {
                    for (dj, wj) in split(shift_z.im) {
                        let w = 0.25 * wk * wi * wj;
                        if w > 0.0 {
                            *acc.entry((dk, di, dj)).or_insert(0.0) += w;
                        }
                    }
                }
            }
        }
        let centre = acc.remove(&(0, 0, 0)).unwrap_or(0.0);
        if centre >= 1.0 - 1e-12 {
            return Err(Error::InvalidInput(format!("direction {d:?} has a degenerate stencil")));
        }
        let taps: Vec<_> = acc.into_iter().map(|((dk, di, dj), w)| (dk, di, dj, w)).collect();
        let reach = taps.iter().fold((0, 0, 0, 0), |r, &(dk, di, dj, _)| {
            (r.0.min(dk), r.1.max(dk), r.2.max(di.abs()), r.3.max(dj.abs()))
        });
        Ok(Stencil {
            taps,
            scale: 1.0 / (1.0 - centre),
            forcing: h * h * omega11 * d.dz.norm_sqr(),
            reach,
        })
    }
}
