//! Sign-changing solutions of the complete-segregation system on `(0, 1)`
//! built from one matched pair of lobes.
//!
//! On `[0, θ]` the `u`-lobe solves `d1 u'' + u(a1 - b1 u) = 0` with `u'(0) = 0`,
//! `u(θ) = 0`; on `[θ, 1/n]` the `v`-lobe solves `d2 v'' + v(a2 - c2 v) = 0` with
//! `v(θ) = 0`, `v'(1/n) = 0`. `θ` is fixed by `d1 u'(θ) = -γ d2 v'(θ)`, and the
//! unit `d1 u - γ d2 v` is tiled over `[0, 1]` by reflection.
//!
//! Each lobe is a quarter orbit of a conservative oscillator. Writing
//! `u = A sin ϑ` turns the orbit into the smooth first-order equation
//! `ϑ' = sqrt(q(A sin ϑ)/d)` with
//! `q(u) = a - (2b/3)(A² + A u + u²)/(A + u)`, which stays positive for
//! `0 < A < a/b`. The half-length of the lobe is the quadrature of `1/ϑ'` over
//! `[0, π/2]` and the end flux follows from the first integral.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::limit::{cs_residual, LimitParams};

/// `sqrt(d1/a1) + sqrt(d2/a2) < 2/(nπ)`.
pub fn existence_check(lp: &LimitParams, n: usize) -> bool {
    n >= 1 && (lp.d1 / lp.kin.a1).sqrt() + (lp.d2 / lp.kin.a2).sqrt() < 2.0 / (n as f64 * PI)
}

/// One lobe shape `d y'' + y(a - b y) = 0`, `y'(0) = 0`, `y(0) = amp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lobe {
    pub d: f64,
    pub a: f64,
    pub b: f64,
    pub amp: f64,
}

const QUAD_PANELS: usize = 4096;

impl Lobe {
    fn q(&self, y: f64) -> f64 {
        let a = self.amp;
        self.a - (2.0 * self.b / 3.0) * (a * a + a * y + y * y) / (a + y)
    }

    fn rate(&self, theta: f64) -> f64 {
        (self.q(self.amp * theta.sin()) / self.d).sqrt()
    }

    /// Linear limit `(π/2) sqrt(d/a)` of the half-length as `amp -> 0`.
    pub fn min_length(d: f64, a: f64) -> f64 {
        FRAC_PI_2 * (d / a).sqrt()
    }

    /// Distance from the top to the first zero (composite Simpson in `ϑ`).
    pub fn half_length(&self) -> f64 {
        if self.amp == 0.0 {
            return Self::min_length(self.d, self.a);
        }
        let m = QUAD_PANELS;
        let step = FRAC_PI_2 / m as f64;
        let f = |t: f64| 1.0 / self.rate(t);
        let mut acc = f(0.0) + f(FRAC_PI_2);
        for k in 1..m {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * step);
        }
        acc * step / 3.0
    }

    /// `|d y'|` at the zero: `sqrt(d (a amp² - 2 b amp³/3))`.
    pub fn end_flux(&self) -> f64 {
        let a = self.amp;
        (self.d * (self.a * a * a - 2.0 * self.b * a * a * a / 3.0)).max(0.0).sqrt()
    }

    /// The lobe whose half-length is `length`; the zero lobe when `length` is
    /// below the linear limit.
    pub fn with_half_length(d: f64, a: f64, b: f64, length: f64) -> Self {
        let zero = Self { d, a, b, amp: 0.0 };
        if length <= Self::min_length(d, a) {
            return zero;
        }
        let (mut lo, mut hi) = (0.0, a / b);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let z = Self { amp: mid, ..zero }.half_length();
            if z < length {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self {
            amp: 0.5 * (lo + hi),
            ..zero
        }
    }

    /// Values at the given distances from the zero (sorted ascending),
    /// by RK4 on the angle equation started at the zero.
    pub fn profile_from_zero(&self, dists: &[f64]) -> Vec<f64> {
        if self.amp == 0.0 {
            return vec![0.0; dists.len()];
        }
        let hmax = Self::min_length(self.d, self.a) / 4000.0;
        let mut x = 0.0;
        let mut t = 0.0;
        let mut out = Vec::with_capacity(dists.len());
        for &target in dists {
            let span = target - x;
            if span > 0.0 {
                let k = (span / hmax).ceil() as usize;
                let h = span / k as f64;
                for _ in 0..k {
                    let k1 = self.rate(t);
                    let k2 = self.rate(t + 0.5 * h * k1);
                    let k3 = self.rate(t + 0.5 * h * k2);
                    let k4 = self.rate(t + h * k3);
                    t += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
                }
                x = target;
            }
            out.push(self.amp * t.sin());
        }
        out
    }
}

/// A matched pair of lobes on `[0, 1/n]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitLobe {
    pub n: usize,
    pub theta: f64,
    pub u_lobe: Lobe,
    pub v_lobe: Lobe,
    /// `d1 u'(θ)`, negative.
    pub flux: f64,
    /// `|d1 u'(θ) + γ d2 v'(θ)|`.
    pub mismatch: f64,
    pub gamma: f64,
}

impl UnitLobe {
    /// `φ` on `[0, 1/n]`: `d1 u` left of `θ`, `-γ d2 v` right of it.
    pub fn unit_values(&self, xs: &[f64]) -> Vec<f64> {
        let mut left: Vec<(usize, f64)> = Vec::new();
        let mut right: Vec<(usize, f64)> = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            if x < self.theta {
                left.push((i, self.theta - x));
            } else {
                right.push((i, x - self.theta));
            }
        }
        let mut out = vec![0.0; xs.len()];
        for (side, lobe, sign) in [
            (&mut left, &self.u_lobe, 1.0),
            (&mut right, &self.v_lobe, -self.gamma),
        ] {
            side.sort_by(|a, b| a.1.total_cmp(&b.1));
            let dists: Vec<f64> = side.iter().map(|p| p.1).collect();
            for (&(i, _), y) in side.iter().zip(lobe.profile_from_zero(&dists)) {
                out[i] = sign * lobe.d * y;
            }
        }
        out
    }
}

fn lobes_at(lp: &LimitParams, n: usize, theta: f64) -> (Lobe, Lobe, f64) {
    let k = &lp.kin;
    let u = Lobe::with_half_length(lp.d1, k.a1, k.b1, theta);
    let v = Lobe::with_half_length(lp.d2, k.a2, k.c2, 1.0 / n as f64 - theta);
    // d1 u'(θ) + γ d2 v'(θ)
    let m = -u.end_flux() + lp.gamma * v.end_flux();
    (u, v, m)
}

/// Matches the fluxes: bisection on `θ ∈ [0.02/n, 0.98/n]`, then secant
/// steps kept inside the final bracket.
pub fn solve_unit(lp: &LimitParams, n: usize) -> Result<UnitLobe> {
    let len = 1.0 / n.max(1) as f64;
    let (mut lo, mut hi) = (0.02 * len, 0.98 * len);
    if n == 0 || !existence_check(lp, n) {
        return Err(Error::NoBracket { lo, hi });
    }
    let mut mlo = lobes_at(lp, n, lo).2;
    let mut mhi = lobes_at(lp, n, hi).2;
    if mlo == 0.0 || mhi == 0.0 || mlo.signum() == mhi.signum() {
        return Err(Error::NoBracket { lo, hi });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let m = lobes_at(lp, n, mid).2;
        if m == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if m.signum() == mlo.signum() {
            lo = mid;
            mlo = m;
        } else {
            hi = mid;
            mhi = m;
        }
        if hi - lo < 1e-9 * len {
            break;
        }
    }
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..8 {
        if hi <= lo || mhi == mlo {
            break;
        }
        let cand = lo - mlo * (hi - lo) / (mhi - mlo);
        if !(cand > lo && cand < hi) {
            break;
        }
        let m = lobes_at(lp, n, cand).2;
        theta = cand;
        if m == 0.0 {
            break;
        }
        if m.signum() == mlo.signum() {
            lo = cand;
            mlo = m;
        } else {
            hi = cand;
            mhi = m;
        }
    }
    let (u, v, m) = lobes_at(lp, n, theta);
    if u.amp == 0.0 || v.amp == 0.0 {
        return Err(Error::NoBracket { lo, hi });
    }
    Ok(UnitLobe {
        n,
        theta,
        u_lobe: u,
        v_lobe: v,
        flux: -u.end_flux(),
        mismatch: m.abs(),
        gamma: lp.gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Starts with the `u`-lobe at `x = 0`.
    Fg,
    /// Starts with the `v`-lobe at `x = 0`.
    Gf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DhmpSolution {
    pub n: usize,
    pub w: GridFn,
    pub zero_count: usize,
    pub cs_residual: f64,
    /// Flux mismatch at the internal zeros (all copies of the unit's).
    pub mismatch: f64,
}

impl DhmpSolution {
    /// Wraps an arbitrary field, e.g. a constant, for [`validate`].
    pub fn from_field(lp: &LimitParams, w: GridFn) -> Self {
        Self {
            n: 0,
            zero_count: w.sign_changes(),
            cs_residual: cs_residual(lp, &w).sup_norm(),
            mismatch: 0.0,
            w,
        }
    }

    pub fn to_csv(&self, lp: &LimitParams) -> String {
        crate::limit::CSState { w: self.w.clone() }.to_csv(lp)
    }
}

/// Tiles `[0, 1]` with `n` unit cells: cell `k` carries `φ(x - k/n)` or its
/// mirror `φ((k+1)/n - x)`, alternating so that neighbouring cells meet
/// lobe-to-lobe of the same sign. The grid must be on `(0, 1)`.
pub fn assemble(lp: &LimitParams, lobe: &UnitLobe, variant: Variant, grid: &Grid) -> Result<DhmpSolution> {
    if (grid.length() - 1.0).abs() > 1e-12 {
        return Err(Error::Assembly(format!(
            "the construction lives on (0, 1), grid length is {}",
            grid.length()
        )));
    }
    let n = lobe.n;
    let len = 1.0 / n as f64;
    let mut local = Vec::with_capacity(grid.n_cells());
    for x in grid.nodes() {
        let k = ((x * n as f64).floor() as usize).min(n - 1);
        let xi = x - k as f64 * len;
        let mirrored = match variant {
            Variant::Fg => !k.is_multiple_of(2),
            Variant::Gf => k.is_multiple_of(2),
        };
        local.push(if mirrored { len - xi } else { xi });
    }
    let values = lobe.unit_values(&local);
    let w = GridFn::from_values(*grid, values)?;
    let (u, v) = crate::limit::CSState { w: w.clone() }.densities(lp);
    if u.values().iter().zip(v.values()).any(|(a, b)| a * b != 0.0) {
        return Err(Error::Assembly("u and v supports overlap".into()));
    }
    let zero_count = w.sign_changes();
    if zero_count != n {
        return Err(Error::Assembly(format!("expected {n} zeros, found {zero_count}")));
    }
    Ok(DhmpSolution {
        n,
        zero_count,
        cs_residual: cs_residual(lp, &w).sup_norm(),
        mismatch: lobe.mismatch,
        w,
    })
}

/// `(zero count, sup of the discrete CS residual, flux mismatch)`.
pub fn validate(sol: &DhmpSolution, lp: &LimitParams) -> (usize, f64, f64) {
    (
        sol.w.sign_changes(),
        cs_residual(lp, &sol.w).sup_norm(),
        sol.mismatch,
    )
}
