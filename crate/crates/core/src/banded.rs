//! Direct solver for banded systems: LU with partial pivoting in compact
//! storage. Row `i` keeps columns `i - kl ..= i + ku`; pivoting fills up to
//! `kl + ku` superdiagonals, so each row is stored `kl + ku + 1` wide after the
//! initial left shift.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(
            j + self.kl >= i && j <= i + self.ku,
            "({i},{j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let w = self.width;
        let a = &mut self.data;

        // Left-justify the first kl rows so column k always sits in slot 0 of row k
        // at elimination step k.
        for i in 0..kl.min(n) {
            let shift = kl - i;
            let row = &mut a[i * w..(i + 1) * w];
            row.copy_within(shift.., 0);
            row[w - shift..].fill(0.0);
        }

        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let end = (k + kl + 1).min(n);
            let mut p = k;
            let mut best = a[k * w].abs();
            for j in k + 1..end {
                if a[j * w].abs() > best {
                    best = a[j * w].abs();
                    p = j;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(k));
            }
            pivots[k] = p;
            if p != k {
                for j in 0..w {
                    a.swap(k * w + j, p * w + j);
                }
            }
            let piv = a[k * w];
            for i in k + 1..end {
                let m = a[i * w] / piv;
                lower[k * kl + (i - k - 1)] = m;
                for j in 1..w {
                    a[i * w + j - 1] = a[i * w + j] - m * a[k * w + j];
                }
                a[i * w + w - 1] = 0.0;
            }
        }
        Ok(BandLu {
            n,
            kl,
            width: w,
            upper: self.data,
            lower,
            pivots,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Overwrites `b` with the solution.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, w) = (self.n, self.kl, self.width);
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let end = (k + kl + 1).min(n);
            for i in k + 1..end {
                b[i] -= self.lower[k * kl + (i - k - 1)] * b[k];
            }
        }
        let mut len = 1;
        for i in (0..n).rev() {
            let row = &self.upper[i * w..(i + 1) * w];
            let mut acc = b[i];
            for k in 1..len {
                acc -= row[k] * b[i + k];
            }
            b[i] = acc / row[0];
            if len < w {
                len += 1;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solves the bordered system `[A b; c^T d] [x; y] = [r; s]` by block
/// elimination on the factored `A`.
pub fn solve_bordered(
    a: &BandLu,
    col: &[f64],
    row: &[f64],
    corner: f64,
    rhs: &[f64],
    rhs_scalar: f64,
) -> Result<(Vec<f64>, f64)> {
    let z = a.solve(col);
    let y = a.solve(rhs);
    let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
    let schur = corner - dot(row, &z);
    if schur == 0.0 || !schur.is_finite() {
        return Err(Error::Singular(a.dim()));
    }
    let t = (rhs_scalar - dot(row, &y)) / schur;
    let x = y.iter().zip(&z).map(|(yi, zi)| yi - zi * t).collect();
    Ok((x, t))
}
