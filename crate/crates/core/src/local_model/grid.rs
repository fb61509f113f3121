use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The Kähler form `ω₁₁ i dz∧dz̄` with constant coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct KahlerCoefficient(f64);

impl KahlerCoefficient {
    pub fn new(omega11: f64) -> Result<Self> {
        if omega11 > 0.0 && omega11.is_finite() {
            Ok(KahlerCoefficient(omega11))
        } else {
            Err(Error::InvalidInput(format!(
                "omega11 must be positive and finite, got {omega11}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for KahlerCoefficient {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        KahlerCoefficient::new(v)
    }
}

impl From<KahlerCoefficient> for f64 {
    fn from(k: KahlerCoefficient) -> f64 {
        k.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// `ℝ²/ℤ²` with `n` nodes per axis, periodic.
    Torus,
    /// Closed square with Dirichlet boundary nodes.
    Patch,
}

/// Uniform spatial grid, either the flat torus or a square patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    topology: Topology,
    nodes: usize,
    h: f64,
    origin: [f64; 2],
}

impl Grid {
    /// Torus with `n` nodes per axis at `0, h, …, 1−h`. `n` must be even so
    /// the four fixed points of `z ↦ −z` are nodes.
    pub fn torus(n: usize) -> Result<Grid> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "torus size must be even and >= 4, got {n}"
            )));
        }
        Ok(Grid {
            topology: Topology::Torus,
            nodes: n,
            h: 1.0 / n as f64,
            origin: [0.0, 0.0],
        })
    }

    /// Square of side `side` centred at `center`, split into `intervals`
    /// cells per axis (`intervals + 1` nodes, boundary included).
    pub fn patch(center: Complex64, side: f64, intervals: usize) -> Result<Grid> {
        if intervals < 2 || !(side > 0.0) || !side.is_finite() {
            return Err(Error::InvalidInput(format!(
                "patch needs >= 2 intervals and positive side, got {intervals}, {side}"
            )));
        }
        Ok(Grid {
            topology: Topology::Patch,
            nodes: intervals + 1,
            h: side / intervals as f64,
            origin: [center.re - 0.5 * side, center.im - 0.5 * side],
        })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Nodes per axis.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes * self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nodes + j
    }

    /// Raw node position (`i h, j h` on the torus).
    pub fn position(&self, i: usize, j: usize) -> (f64, f64) {
        (self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h)
    }

    /// Node coordinate as a complex number. On the torus this is the
    /// representative in `[−1/2, 1/2)²`, which is exactly negated by the
    /// involution (away from the seam).
    pub fn coord(&self, i: usize, j: usize) -> Complex64 {
        match self.topology {
            Topology::Patch => {
                let (x, y) = self.position(i, j);
                Complex64::new(x, y)
            }
            Topology::Torus => {
                let c = |k: usize| {
                    if 2 * k < self.nodes {
                        k as f64 * self.h
                    } else {
                        -((self.nodes - k) as f64) * self.h
                    }
                };
                Complex64::new(c(i), c(j))
            }
        }
    }

    /// Index shifted by `d`; wraps on the torus, `None` off a patch.
    pub fn shift(&self, i: usize, d: isize) -> Option<usize> {
        let n = self.nodes as isize;
        let k = i as isize + d;
        match self.topology {
            Topology::Torus => Some(k.rem_euclid(n) as usize),
            Topology::Patch => (0..n).contains(&k).then_some(k as usize),
        }
    }

    /// Nodes where centred spatial differences are available.
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        match self.topology {
            Topology::Torus => true,
            Topology::Patch => i > 0 && j > 0 && i + 1 < self.nodes && j + 1 < self.nodes,
        }
    }

    /// Image of a node under `z ↦ −z` (about the patch centre for patches).
    pub fn mirror(&self, i: usize, j: usize) -> (usize, usize) {
        match self.topology {
            Topology::Torus => ((self.nodes - i) % self.nodes, (self.nodes - j) % self.nodes),
            Topology::Patch => (self.nodes - 1 - i, self.nodes - 1 - j),
        }
    }

    /// Grid nodes fixed by the involution.
    pub fn fixed_points(&self) -> Vec<(usize, usize)> {
        match self.topology {
            Topology::Torus => {
                let m = self.nodes / 2;
                vec![(0, 0), (m, 0), (0, m), (m, m)]
            }
            Topology::Patch if (self.nodes - 1).is_multiple_of(2) => {
                let m = (self.nodes - 1) / 2;
                vec![(m, m)]
            }
            Topology::Patch => Vec::new(),
        }
    }

    /// The node representing `x₀ = 0` (torus) or the patch centre.
    pub fn origin_node(&self) -> Option<(usize, usize)> {
        self.fixed_points().first().copied()
    }
}

/// A real function on one spatial grid (a single time slice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSlice {
    pub grid: Grid,
    values: Vec<f64>,
}

impl GridSlice {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "slice has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("slice node {pos}"),
            });
        }
        Ok(GridSlice { grid, values })
    }

    pub fn from_fn<F: Fn(Complex64) -> f64>(grid: Grid, f: F) -> Result<Self> {
        let n = grid.nodes();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                values.push(f(grid.coord(i, j)));
            }
        }
        GridSlice::new(grid, values)
    }

    pub fn zeros(grid: Grid) -> Self {
        GridSlice {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max `|v(z) − v(−z)|` over nodes.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.grid.nodes();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let (mi, mj) = self.grid.mirror(i, j);
                worst = worst.max((self.get(i, j) - self.get(mi, mj)).abs());
            }
        }
        worst
    }
}

/// Real function on `nt` equally spaced time slices `t_k = k/(nt−1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Grid,
    nt: usize,
    values: Vec<f64>,
    /// Declares `u(t, −z) = u(t, z)`.
    pub symmetric: bool,
}

impl GridFunction {
    pub fn new(grid: Grid, nt: usize, values: Vec<f64>, symmetric: bool) -> Result<Self> {
        if nt < 2 {
            return Err(Error::InsufficientResolution(format!(
                "need at least 2 time slices, got {nt}"
            )));
        }
        if values.len() != nt * grid.len() {
            return Err(Error::InvalidInput(format!(
                "grid function has {} values, expected {}",
                values.len(),
                nt * grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("node {pos}"),
            });
        }
        Ok(GridFunction {
            grid,
            nt,
            values,
            symmetric,
        })
    }

    pub fn from_fn<F: Fn(f64, Complex64) -> f64>(grid: Grid, nt: usize, symmetric: bool, f: F) -> Result<Self> {
        if nt < 2 {
            return Err(Error::InsufficientResolution(format!(
                "need at least 2 time slices, got {nt}"
            )));
        }
        let n = grid.nodes();
        let mut values = Vec::with_capacity(nt * grid.len());
        for k in 0..nt {
            let t = k as f64 / (nt - 1) as f64;
            for i in 0..n {
                for j in 0..n {
                    values.push(f(t, grid.coord(i, j)));
                }
            }
        }
        GridFunction::new(grid, nt, values, symmetric)
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.nt - 1) as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 / (self.nt - 1) as f64
    }

    pub fn index(&self, k: usize, i: usize, j: usize) -> usize {
        k * self.grid.len() + self.grid.index(i, j)
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.values[self.index(k, i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn slice(&self, k: usize) -> GridSlice {
        let len = self.grid.len();
        GridSlice {
            grid: self.grid,
            values: self.values[k * len..(k + 1) * len].to_vec(),
        }
    }

    pub fn slice_values(&self, k: usize) -> &[f64] {
        let len = self.grid.len();
        &self.values[k * len..(k + 1) * len]
    }

    /// Max `|u(t, z) − u(t, −z)|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.grid.nodes();
        let mut worst = 0.0f64;
        for k in 0..self.nt {
            for i in 0..n {
                for j in 0..n {
                    let (mi, mj) = self.grid.mirror(i, j);
                    worst = worst.max((self.get(k, i, j) - self.get(k, mi, mj)).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Per-node values, `None` where a stencil is unavailable.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeField<T> {
    pub grid: Grid,
    pub values: Vec<Option<T>>,
}

impl<T: Copy> NodeField<T> {
    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        self.values[self.grid.index(i, j)]
    }

    pub fn defined(&self) -> impl Iterator<Item = T> + '_ {
        self.values.iter().filter_map(|v| *v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_requires_even_size() {
        assert!(Grid::torus(7).is_err());
        assert!(Grid::torus(2).is_err());
        assert!(Grid::torus(8).is_ok());
    }

    #[test]
    fn torus_coordinates_negate_under_mirror() {
        let g = Grid::torus(8).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let (mi, mj) = g.mirror(i, j);
                let z = g.coord(i, j);
                let w = g.coord(mi, mj);
                if 2 * i != 8 && 2 * j != 8 {
                    assert_eq!(w, -z);
                }
                assert_eq!(g.mirror(mi, mj), (i, j));
            }
        }
        assert_eq!(g.fixed_points().len(), 4);
    }

    #[test]
    fn patch_shift_stops_at_boundary() {
        let g = Grid::patch(Complex64::new(0.0, 0.0), 1.0, 4).unwrap();
        assert_eq!(g.nodes(), 5);
        assert_eq!(g.shift(0, -1), None);
        assert_eq!(g.shift(4, 1), None);
        assert_eq!(g.coord(2, 2), Complex64::new(0.0, 0.0));
        assert_eq!(g.origin_node(), Some((2, 2)));
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = Grid::torus(4).unwrap();
        let mut v = vec![0.0; 16 * 3];
        v[5] = f64::NAN;
        assert!(matches!(
            GridFunction::new(g, 3, v, false),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn kahler_coefficient_must_be_positive() {
        assert!(KahlerCoefficient::new(0.0).is_err());
        assert!(KahlerCoefficient::new(-1.0).is_err());
        assert!(KahlerCoefficient::new(f64::INFINITY).is_err());
    }
}
