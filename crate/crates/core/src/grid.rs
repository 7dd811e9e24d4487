//! Uniform cell-centred grid on `(0, L)` with homogeneous Neumann conditions.
//!
//! Nodes sit at cell centres `x_i = (i + 1/2) h`. Boundary conditions enter
//! through mirror ghosts `f_{-1} = f_0`, `f_n = f_{n-1}`, which makes the
//! cosine modes `cos(j pi x / L)` exact eigenvectors of the discrete Laplacian
//! and the midpoint rule an exact annihilator of its range.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::Index;

use crate::error::{Error, Result};

pub const MIN_CELLS: usize = 8;
pub const DEFAULT_CELLS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_cells: usize,
    length: f64,
}

impl Grid {
    pub fn new(n_cells: usize, length: f64) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(Error::InvalidParam {
                name: "n_cells",
                reason: format!("need at least {MIN_CELLS} cells, got {n_cells}"),
            });
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParam {
                name: "length",
                reason: format!("must be positive, got {length}"),
            });
        }
        Ok(Self { n_cells, length })
    }

    /// `n_cells` cells on `(0, 1)`.
    pub fn unit(n_cells: usize) -> Result<Self> {
        Self::new(n_cells, 1.0)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(|i| self.x(i))
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> GridFn {
        GridFn {
            grid: *self,
            values: self.nodes().map(f).collect(),
        }
    }

    pub fn constant(&self, c: f64) -> GridFn {
        GridFn {
            grid: *self,
            values: vec![c; self.n_cells],
        }
    }

    /// Discrete eigenvalue `(2/h^2)(1 - cos(j pi h / L))` of `-Δ_h`.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let h = self.h();
        2.0 / (h * h) * (1.0 - (j as f64 * PI * h / self.length).cos())
    }

    /// `(λ_j^h, Φ_j^h)` with `Φ_j^h ∝ cos(jπx/L)`, unit `L²` norm and `Φ_j^h(x_0) > 0`.
    pub fn neumann_eigenpair(&self, j: usize) -> Result<(f64, GridFn)> {
        if j >= self.n_cells {
            return Err(Error::Index {
                index: j,
                limit: self.n_cells,
            });
        }
        let k = j as f64 * PI / self.length;
        let mut phi = self.sample(|x| (k * x).cos());
        let norm = phi.dot(&phi).sqrt();
        phi.scale(1.0 / norm);
        Ok((self.eigenvalue(j), phi))
    }
}

/// A real value per node of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFn {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells {
            return Err(Error::InvalidParam {
                name: "values",
                reason: format!("expected {} values, got {}", grid.n_cells, values.len()),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFn {
        GridFn {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &GridFn, f: impl Fn(f64, f64) -> f64) -> GridFn {
        debug_assert_eq!(self.grid, other.grid);
        GridFn {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_dist(&self, other: &GridFn) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Midpoint rule `h Σ f_i`.
    pub fn integrate(&self) -> f64 {
        self.grid.h() * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.integrate() / self.grid.length
    }

    /// Discrete `L²` inner product `h Σ f_i g_i`.
    pub fn dot(&self, other: &GridFn) -> f64 {
        self.grid.h()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// Second-order Neumann Laplacian with mirror ghosts.
    pub fn neumann_laplacian(&self) -> GridFn {
        let n = self.values.len();
        let h2 = self.grid.h().powi(2);
        let f = &self.values;
        let values = (0..n)
            .map(|i| {
                let left = if i == 0 { f[0] } else { f[i - 1] };
                let right = if i + 1 == n { f[n - 1] } else { f[i + 1] };
                (left - 2.0 * f[i] + right) / h2
            })
            .collect();
        GridFn {
            grid: self.grid,
            values,
        }
    }

    /// Central differences with mirror ghosts.
    pub fn gradient(&self) -> GridFn {
        let n = self.values.len();
        let h = self.grid.h();
        let f = &self.values;
        let values = (0..n)
            .map(|i| {
                let left = if i == 0 { f[0] } else { f[i - 1] };
                let right = if i + 1 == n { f[n - 1] } else { f[i + 1] };
                (right - left) / (2.0 * h)
            })
            .collect();
        GridFn {
            grid: self.grid,
            values,
        }
    }

    /// Number of strict sign changes between consecutive nodes; exact zeros are skipped.
    pub fn sign_changes(&self) -> usize {
        let mut count = 0;
        let mut last = 0.0f64;
        for &v in &self.values {
            if v == 0.0 {
                continue;
            }
            if last != 0.0 && (v > 0.0) != (last > 0.0) {
                count += 1;
            }
            last = v;
        }
        count
    }

    /// CSV with header `x,value`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{:.16e}", self.grid.x(i), v);
        }
        out
    }

    /// Parses [`GridFn::to_csv`] output back onto `grid`.
    pub fn from_csv(grid: Grid, text: &str) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.n_cells);
        let mut header_seen = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != "x,value" {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected header `x,value`, got `{line}`"),
                    });
                }
                header_seen = true;
                continue;
            }
            let (_, v) = line.split_once(',').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: "expected two columns".into(),
            })?;
            let v: f64 = v.trim().parse().map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: format!("{e}"),
            })?;
            values.push(v);
        }
        Self::from_values(grid, values)
    }
}

impl Index<usize> for GridFn {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}
