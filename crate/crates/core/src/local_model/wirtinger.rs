use num_complex::Complex64;

use super::grid::{GridSlice, NodeField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wirtinger {
    /// `∂_z = (∂_x − i∂_y)/2`
    Z,
    /// `∂_z̄ = (∂_x + i∂_y)/2`
    Zbar,
    /// `∂_z∂_z̄ = Δ/4`, real for real input
    ZZbar,
    /// `∂_z² = (∂_xx − ∂_yy − 2i∂_xy)/4`
    ZZ,
}

/// The 3×3 block of values around a node, `v[di+1][dj+1] = u(i+di, j+dj)`.
#[derive(Debug, Clone, Copy)]
pub struct Neighborhood {
    pub v: [[f64; 3]; 3],
    pub h: f64,
}

impl Neighborhood {
    pub fn gather(values: &[f64], grid: &super::Grid, i: usize, j: usize) -> Option<Neighborhood> {
        if !grid.is_interior(i, j) {
            return None;
        }
        let mut v = [[0.0; 3]; 3];
        for (a, di) in (-1isize..=1).enumerate() {
            let ii = grid.shift(i, di)?;
            for (b, dj) in (-1isize..=1).enumerate() {
                let jj = grid.shift(j, dj)?;
                v[a][b] = values[grid.index(ii, jj)];
            }
        }
        Some(Neighborhood { v, h: grid.h() })
    }

    pub fn center(&self) -> f64 {
        self.v[1][1]
    }

    pub fn dx(&self) -> f64 {
        (self.v[2][1] - self.v[0][1]) / (2.0 * self.h)
    }

    pub fn dy(&self) -> f64 {
        (self.v[1][2] - self.v[1][0]) / (2.0 * self.h)
    }

    pub fn dxx(&self) -> f64 {
        (self.v[2][1] - 2.0 * self.v[1][1] + self.v[0][1]) / (self.h * self.h)
    }

    pub fn dyy(&self) -> f64 {
        (self.v[1][2] - 2.0 * self.v[1][1] + self.v[1][0]) / (self.h * self.h)
    }

    pub fn dxy(&self) -> f64 {
        (self.v[2][2] - self.v[2][0] - self.v[0][2] + self.v[0][0]) / (4.0 * self.h * self.h)
    }

    /// Sum of the four edge neighbours.
    pub fn cross_sum(&self) -> f64 {
        self.v[2][1] + self.v[0][1] + self.v[1][2] + self.v[1][0]
    }

    pub fn d_z(&self) -> Complex64 {
        Complex64::new(self.dx(), -self.dy()) * 0.5
    }

    pub fn d_zbar(&self) -> Complex64 {
        Complex64::new(self.dx(), self.dy()) * 0.5
    }

    pub fn d_zzbar(&self) -> f64 {
        (self.cross_sum() - 4.0 * self.center()) / (4.0 * self.h * self.h)
    }

    pub fn d_zz(&self) -> Complex64 {
        Complex64::new(self.dxx() - self.dyy(), -2.0 * self.dxy()) * 0.25
    }

    pub fn apply(&self, which: Wirtinger) -> Complex64 {
        match which {
            Wirtinger::Z => self.d_z(),
            Wirtinger::Zbar => self.d_zbar(),
            Wirtinger::ZZbar => Complex64::new(self.d_zzbar(), 0.0),
            Wirtinger::ZZ => self.d_zz(),
        }
    }
}

/// Second-order central Wirtinger derivative of a slice. Undefined
/// (`None`) on patch boundary nodes; defined everywhere on the torus.
pub fn wirtinger(f: &GridSlice, which: Wirtinger) -> NodeField<Complex64> {
    let grid = f.grid;
    let n = grid.nodes();
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..n {
        for j in 0..n {
            values.push(Neighborhood::gather(f.values(), &grid, i, j).map(|nb| nb.apply(which)));
        }
    }
    NodeField { grid, values }
}
