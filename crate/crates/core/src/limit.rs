//! The two limiting systems of the full cross-diffusion limit and the
//! changes of variables that lead to them.
//!
//! With `w = d1 u - γ d2 v` and `τ = u v`, the incomplete-segregation system
//! is `Δw + f - γ g = 0` with `∫ f = 0`, the densities being recovered from
//! `(w, τ)` in closed form. At `τ = 0` the densities become `w₊/d1` and
//! `w₋/(γ d2)` and the constraint drops out (complete segregation).

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::banded::{solve_bordered, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::model::{ConstantState, Kinetics, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitParams {
    pub kin: Kinetics,
    pub d1: f64,
    pub d2: f64,
    pub gamma: f64,
}

impl LimitParams {
    pub fn new(kin: Kinetics, d1: f64, d2: f64, gamma: f64) -> Result<Self> {
        for (name, x) in [("d1", d1), ("d2", d2), ("gamma", gamma)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidParam {
                    name,
                    reason: format!("must be a positive finite number, got {x}"),
                });
            }
        }
        Ok(Self { kin, d1, d2, gamma })
    }

    /// Drops the rates of `p`, keeping `gamma` as the limit of their ratio.
    pub fn from_model(p: &ModelParams, gamma: f64) -> Result<Self> {
        Self::new(p.kin, p.d1, p.d2, gamma)
    }

    pub fn with_d1(&self, d1: f64) -> Result<Self> {
        Self::new(self.kin, d1, self.d2, self.gamma)
    }

    pub fn constant_state(&self) -> Result<ConstantState> {
        self.kin.constant_state()
    }

    fn phi(&self, u: f64, v: f64) -> f64 {
        self.kin.f(u, v) - self.gamma * self.kin.g(u, v)
    }
}

/// Densities and their partial derivatives at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvPoint {
    pub u: f64,
    pub v: f64,
    pub u_w: f64,
    pub v_w: f64,
    pub u_tau: f64,
    pub v_tau: f64,
    pub u_d1: f64,
    pub v_d1: f64,
}

/// `u = (r + w)/(2 d1)`, `v = (r - w)/(2 γ d2)` with `r = sqrt(w² + 4 γ d1 d2 τ)`,
/// written so that neither branch subtracts nearly equal numbers.
pub fn uv_point(lp: &LimitParams, w: f64, tau: f64) -> UvPoint {
    let (d1, gd2) = (lp.d1, lp.gamma * lp.d2);
    let r = (w * w + 4.0 * gd2 * d1 * tau).sqrt();
    if r == 0.0 {
        // w = 0 and τ = 0: one-sided convention, derivative of w₊ is 1
        return UvPoint {
            u: 0.0,
            v: 0.0,
            u_w: 1.0 / d1,
            v_w: 0.0,
            u_tau: f64::INFINITY,
            v_tau: f64::INFINITY,
            u_d1: 0.0,
            v_d1: 0.0,
        };
    }
    let (u, v) = if w >= 0.0 {
        let u = (r + w) / (2.0 * d1);
        (u, 2.0 * d1 * tau / (r + w))
    } else {
        let v = (r - w) / (2.0 * gd2);
        (2.0 * gd2 * tau / (r - w), v)
    };
    UvPoint {
        u,
        v,
        u_w: u / r,
        v_w: -v / r,
        u_tau: gd2 / r,
        v_tau: d1 / r,
        u_d1: gd2 * tau / (d1 * r) - u / d1,
        v_d1: tau / r,
    }
}

pub fn uv_from_w_tau(lp: &LimitParams, w: f64, tau: f64) -> (f64, f64) {
    if tau == 0.0 {
        return (w.max(0.0) / lp.d1, (-w).max(0.0) / (lp.gamma * lp.d2));
    }
    let pt = uv_point(lp, w, tau);
    (pt.u, pt.v)
}

fn rates(p: &ModelParams) -> Result<(f64, f64)> {
    if p.alpha > 0.0 && p.beta > 0.0 {
        Ok((p.alpha, p.beta))
    } else {
        Err(Error::InvalidParam {
            name: "alpha",
            reason: "the (w, z) variables need alpha, beta > 0".into(),
        })
    }
}

/// `w = d1 u - (α/β) d2 v`, `z = (d1/α) u + u v`.
pub fn w_z_from_uv(p: &ModelParams, u: &GridFn, v: &GridFn) -> Result<(GridFn, GridFn)> {
    let (alpha, beta) = rates(p)?;
    let gamma = alpha / beta;
    Ok((
        u.zip_map(v, |u, v| p.d1 * u - gamma * p.d2 * v),
        u.zip_map(v, |u, v| p.d1 / alpha * u + u * v),
    ))
}

/// Nonnegative root of `a x² + b x + c` with `a > 0`, `c ≤ 0`.
fn nonneg_root(a: f64, b: f64, c: f64, what: &'static str) -> Result<f64> {
    let mut disc = b * b - 4.0 * a * c;
    let slack = 1e-14 * (b * b + (4.0 * a * c).abs());
    if disc < -slack {
        return Err(Error::Domain {
            what,
            value: disc,
            bound: "nonnegative discriminant".into(),
        });
    }
    disc = disc.max(0.0);
    let s = disc.sqrt();
    Ok(if b >= 0.0 {
        if b + s == 0.0 {
            0.0
        } else {
            -2.0 * c / (b + s)
        }
    } else {
        (s - b) / (2.0 * a)
    })
}

/// Inverts [`w_z_from_uv`]: `u` and `v` are the nonnegative roots of
/// `d1 u² + (d1 d2/β - w) u - γ d2 z = 0` and
/// `γ d2 v² + (w + d1 d2/β) v + d1 (w/α - z) = 0`.
pub fn uv_from_w_z(p: &ModelParams, w: &GridFn, z: &GridFn) -> Result<(GridFn, GridFn)> {
    let (alpha, beta) = rates(p)?;
    let gamma = alpha / beta;
    let k = p.d1 * p.d2 / beta;
    let mut u = Vec::with_capacity(w.len());
    let mut v = Vec::with_capacity(w.len());
    for (&wi, &zi) in w.values().iter().zip(z.values()) {
        u.push(nonneg_root(p.d1, k - wi, -gamma * p.d2 * zi, "u(w, z)")?);
        v.push(nonneg_root(gamma * p.d2, wi + k, p.d1 * (wi / alpha - zi), "v(w, z)")?);
    }
    Ok((
        GridFn::from_values(*w.grid(), u)?,
        GridFn::from_values(*w.grid(), v)?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ISState {
    pub w: GridFn,
    pub tau: f64,
}

impl ISState {
    pub fn densities(&self, lp: &LimitParams) -> (GridFn, GridFn) {
        let u = self.w.map(|w| uv_from_w_tau(lp, w, self.tau).0);
        let v = self.w.map(|w| uv_from_w_tau(lp, w, self.tau).1);
        (u, v)
    }

    /// The constant solution `(w*, τ*)`.
    pub fn constant(lp: &LimitParams, grid: &Grid) -> Result<Self> {
        let cs = lp.constant_state()?;
        Ok(Self {
            w: grid.constant(lp.d1 * cs.u_star - lp.gamma * lp.d2 * cs.v_star),
            tau: cs.tau_star,
        })
    }

    pub fn to_csv(&self, lp: &LimitParams) -> String {
        let (u, v) = self.densities(lp);
        wuv_csv(&self.w, &u, &v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CSState {
    pub w: GridFn,
}

impl CSState {
    pub fn densities(&self, lp: &LimitParams) -> (GridFn, GridFn) {
        (
            self.w.map(|w| w.max(0.0) / lp.d1),
            self.w.map(|w| (-w).max(0.0) / (lp.gamma * lp.d2)),
        )
    }

    pub fn to_csv(&self, lp: &LimitParams) -> String {
        let (u, v) = self.densities(lp);
        wuv_csv(&self.w, &u, &v)
    }
}

fn wuv_csv(w: &GridFn, u: &GridFn, v: &GridFn) -> String {
    let mut out = String::from("x,w,u,v\n");
    for i in 0..w.len() {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            w.grid().x(i),
            w[i],
            u[i],
            v[i]
        );
    }
    out
}

/// Field part `Δw + f - γ g` and constraint `∫ f`.
pub fn is_residual(lp: &LimitParams, s: &ISState) -> (GridFn, f64) {
    let (u, v) = s.densities(lp);
    let field = s
        .w
        .neumann_laplacian()
        .zip_map(&u.zip_map(&v, |u, v| lp.phi(u, v)), |a, b| a + b);
    let constraint = u.zip_map(&v, |u, v| lp.kin.f(u, v)).integrate();
    (field, constraint)
}

/// Derivatives of the discrete IS system at `(w, τ)`: the field block is the
/// Laplacian plus `diag`, `col` is `∂field/∂τ`, `row`/`corner` differentiate
/// the constraint, and the `*_d1` entries differentiate in `d1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsLinearization {
    pub diag: Vec<f64>,
    pub col: Vec<f64>,
    pub row: Vec<f64>,
    pub corner: f64,
    pub field_d1: Vec<f64>,
    pub constraint_d1: f64,
}

pub fn is_linearize(lp: &LimitParams, w: &GridFn, tau: f64) -> IsLinearization {
    let h = w.grid().h();
    let n = w.len();
    let mut out = IsLinearization {
        diag: Vec::with_capacity(n),
        col: Vec::with_capacity(n),
        row: Vec::with_capacity(n),
        corner: 0.0,
        field_d1: Vec::with_capacity(n),
        constraint_d1: 0.0,
    };
    let g = lp.gamma;
    for &wi in w.values() {
        let pt = uv_point(lp, wi, tau);
        let [[fu, fv], [gu, gv]] = lp.kin.jacobian(pt.u, pt.v);
        let (pu, pv) = (fu - g * gu, fv - g * gv);
        out.diag.push(pu * pt.u_w + pv * pt.v_w);
        out.col.push(pu * pt.u_tau + pv * pt.v_tau);
        out.field_d1.push(pu * pt.u_d1 + pv * pt.v_d1);
        out.row.push(h * (fu * pt.u_w + fv * pt.v_w));
        out.corner += h * (fu * pt.u_tau + fv * pt.v_tau);
        out.constraint_d1 += h * (fu * pt.u_d1 + fv * pt.v_d1);
    }
    out
}

/// Tridiagonal `Δ_h + diag(d)`.
pub(crate) fn laplacian_plus_diag(grid: &Grid, diag: &[f64]) -> BandMatrix {
    let n = diag.len();
    let c = 1.0 / grid.h().powi(2);
    let mut a = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        let (lo, hi) = (i > 0, i + 1 < n);
        let mut centre = 0.0;
        if lo {
            a.set(i, i - 1, c);
            centre -= c;
        }
        if hi {
            a.set(i, i + 1, c);
            centre -= c;
        }
        a.set(i, i, centre + diag[i]);
    }
    a
}

/// Same matrix densely, for singular or nearly singular fallbacks.
pub(crate) fn dense_laplacian_plus_diag(grid: &Grid, diag: &[f64]) -> DMatrix<f64> {
    let n = diag.len();
    let c = 1.0 / grid.h().powi(2);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        if i > 0 {
            a[(i, i - 1)] = c;
            a[(i, i)] -= c;
        }
        if i + 1 < n {
            a[(i, i + 1)] = c;
            a[(i, i)] -= c;
        }
        a[(i, i)] += diag[i];
    }
    a
}

/// Residual scale for equations led by `Δw`: rounding in the stencil is of size
/// `eps * 4/h² * max|w|`.
pub(crate) fn field_scale(w: &GridFn) -> f64 {
    1.0 + 4.0 / w.grid().h().powi(2) * w.sup_norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStats {
    pub iters: usize,
    /// Sup norm of the field residual, unscaled.
    pub residual: f64,
    /// Absolute constraint residual (IS only).
    pub constraint: f64,
    /// Scaled residual before each step.
    pub history: Vec<f64>,
}

pub const TAU_FLOOR: f64 = 1e-10;

fn is_merit(lp: &LimitParams, s: &ISState) -> (GridFn, f64, f64) {
    let (field, c) = is_residual(lp, s);
    let m = field.values().iter().map(|a| a * a).sum::<f64>() + c * c;
    (field, c, m.sqrt())
}

fn is_step(lp: &LimitParams, s: &ISState, field: &GridFn, c: f64) -> Result<(Vec<f64>, f64)> {
    let lin = is_linearize(lp, &s.w, s.tau);
    let rhs: Vec<f64> = field.values().iter().map(|a| -a).collect();
    let banded = laplacian_plus_diag(s.w.grid(), &lin.diag)
        .factor()
        .and_then(|lu| solve_bordered(&lu, &lin.col, &lin.row, lin.corner, &rhs, -c));
    match banded {
        Ok(step) if step.0.iter().all(|x| x.is_finite()) && step.1.is_finite() => Ok(step),
        _ => {
            let n = rhs.len();
            let mut a = DMatrix::zeros(n + 1, n + 1);
            a.view_mut((0, 0), (n, n))
                .copy_from(&dense_laplacian_plus_diag(s.w.grid(), &lin.diag));
            for i in 0..n {
                a[(i, n)] = lin.col[i];
                a[(n, i)] = lin.row[i];
            }
            a[(n, n)] = lin.corner;
            let mut b = DVector::from_vec(rhs);
            b = b.push(-c);
            let x = a.lu().solve(&b).ok_or(Error::Singular(n))?;
            Ok((x.rows(0, n).iter().copied().collect(), x[n]))
        }
    }
}

/// Bordered Newton for the IS system; the constraint row is eliminated
/// through the Schur complement of the tridiagonal field block.
pub fn is_newton(
    lp: &LimitParams,
    w0: &GridFn,
    tau0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(ISState, NewtonStats)> {
    if !(tau0 > 0.0) {
        return Err(Error::InvalidParam {
            name: "tau0",
            reason: format!("must be positive, got {tau0}"),
        });
    }
    let mut s = ISState {
        w: w0.clone(),
        tau: tau0,
    };
    let mut history = Vec::new();
    let (mut field, mut c, mut merit) = is_merit(lp, &s);
    for iter in 0..=max_iter {
        let scaled = (field.sup_norm() / field_scale(&s.w)).max(c.abs());
        history.push(scaled);
        if scaled <= tol {
            // one more full step when it lowers the residual
            if let Ok((dw, dt)) = is_step(lp, &s, &field, c) {
                let cand = ISState {
                    w: s.w.zip_map(&GridFn::from_values(*s.w.grid(), dw)?, |a, b| a + b),
                    tau: s.tau + dt,
                };
                if cand.tau > 0.0 {
                    let (f2, c2, m2) = is_merit(lp, &cand);
                    if m2 < merit {
                        s = cand;
                        field = f2;
                        c = c2;
                        history.push((field.sup_norm() / field_scale(&s.w)).max(c.abs()));
                    }
                }
            }
            let stats = NewtonStats {
                iters: iter,
                residual: field.sup_norm(),
                constraint: c.abs(),
                history,
            };
            return Ok((s, stats));
        }
        if iter == max_iter {
            break;
        }
        let (dw, dt) = is_step(lp, &s, &field, c)?;
        let mut lambda: f64 = 1.0;
        if dt < 0.0 {
            lambda = lambda.min(0.9 * s.tau / -dt);
        }
        loop {
            let cand = ISState {
                w: GridFn::from_values(
                    *s.w.grid(),
                    s.w.values().iter().zip(&dw).map(|(a, d)| a + lambda * d).collect(),
                )?,
                tau: s.tau + lambda * dt,
            };
            let (f2, c2, m2) = is_merit(lp, &cand);
            if m2 <= (1.0 - 1e-4 * lambda) * merit {
                s = cand;
                field = f2;
                c = c2;
                merit = m2;
                break;
            }
            lambda *= 0.5;
            if lambda < MIN_STEP {
                return Err(Error::NoConvergence {
                    iters: iter + 1,
                    residual: scaled,
                });
            }
        }
        if s.tau < TAU_FLOOR {
            return Err(Error::TauCollapse { tau: s.tau });
        }
    }
    Err(Error::NoConvergence {
        iters: max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
    })
}

const MIN_STEP: f64 = 1.0 / 1048576.0;

/// `(u, v, u_w, v_w)` for the ε-smoothed positive and negative parts; at
/// `ε = 0` the subgradient takes `(w₊)' = 1` and `(w₋)' = 0` at `w = 0`.
fn cs_point(lp: &LimitParams, w: f64, eps: f64) -> (f64, f64, f64, f64) {
    let gd2 = lp.gamma * lp.d2;
    if eps == 0.0 {
        if w >= 0.0 {
            (w / lp.d1, 0.0, 1.0 / lp.d1, 0.0)
        } else {
            (0.0, -w / gd2, 0.0, -1.0 / gd2)
        }
    } else {
        let pt = uv_point(lp, w, eps * eps / (4.0 * gd2 * lp.d1));
        (pt.u, pt.v, pt.u_w, pt.v_w)
    }
}

fn cs_residual_eps(lp: &LimitParams, w: &GridFn, eps: f64) -> GridFn {
    let react = w.map(|w| {
        let (u, v, _, _) = cs_point(lp, w, eps);
        lp.phi(u, v)
    });
    w.neumann_laplacian().zip_map(&react, |a, b| a + b)
}

/// `Δw + f(w₊/d1, w₋/(γd2)) - γ g(w₊/d1, w₋/(γd2))`.
pub fn cs_residual(lp: &LimitParams, w: &GridFn) -> GridFn {
    cs_residual_eps(lp, w, 0.0)
}

fn cs_newton_eps(
    lp: &LimitParams,
    w0: &GridFn,
    eps: f64,
    tol: f64,
    max_iter: usize,
    history: &mut Vec<f64>,
) -> Result<(GridFn, usize)> {
    let grid = *w0.grid();
    let mut w = w0.clone();
    let mut r = cs_residual_eps(lp, &w, eps);
    let norm2 = |g: &GridFn| g.values().iter().map(|a| a * a).sum::<f64>().sqrt();
    for iter in 0..=max_iter {
        let scaled = r.sup_norm() / field_scale(&w);
        history.push(scaled);
        if scaled <= tol {
            return Ok((w, iter));
        }
        if iter == max_iter {
            break;
        }
        let diag: Vec<f64> = w
            .values()
            .iter()
            .map(|&wi| {
                let (u, v, uw, vw) = cs_point(lp, wi, eps);
                let [[fu, fv], [gu, gv]] = lp.kin.jacobian(u, v);
                (fu - lp.gamma * gu) * uw + (fv - lp.gamma * gv) * vw
            })
            .collect();
        let mut dw: Vec<f64> = r.values().iter().map(|a| -a).collect();
        match laplacian_plus_diag(&grid, &diag).factor() {
            Ok(lu) => lu.solve_in_place(&mut dw),
            Err(_) => {
                let a = dense_laplacian_plus_diag(&grid, &diag);
                let x = a
                    .lu()
                    .solve(&DVector::from_vec(dw))
                    .ok_or(Error::Singular(grid.n_cells()))?;
                dw = x.iter().copied().collect();
            }
        }
        let r0 = norm2(&r);
        let mut lambda = 1.0;
        loop {
            let cand = GridFn::from_values(
                grid,
                w.values().iter().zip(&dw).map(|(a, d)| a + lambda * d).collect(),
            )?;
            let rc = cs_residual_eps(lp, &cand, eps);
            if norm2(&rc) <= (1.0 - 1e-4 * lambda) * r0 {
                w = cand;
                r = rc;
                break;
            }
            lambda *= 0.5;
            if lambda < MIN_STEP {
                return Err(Error::NoConvergence {
                    iters: iter + 1,
                    residual: scaled,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iters: max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
    })
}

/// Newton on the ε-smoothed CS equation for `ε = ε0, ε0/4, ...` down to `eps`,
/// with `ε0 = 1e-2 * max(1, sup|w0|)`. `eps = 0` ends with semismooth steps
/// on the exact equation.
pub fn cs_solve(
    lp: &LimitParams,
    w0: &GridFn,
    tol: f64,
    eps: f64,
    max_iter: usize,
) -> Result<(CSState, NewtonStats)> {
    if !(eps >= 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidParam {
            name: "eps",
            reason: format!("need eps >= 0 and tol > 0, got eps={eps}, tol={tol}"),
        });
    }
    let scale = w0.sup_norm().max(1.0);
    let mut e = 1e-2 * scale;
    let mut w = w0.clone();
    let mut history = Vec::new();
    let mut iters = 0;
    let loose = tol.max(1e-8);
    while e > eps && e > 1e-8 * scale {
        let (next, k) = cs_newton_eps(lp, &w, e, loose, max_iter, &mut history)?;
        w = next;
        iters += k;
        e *= 0.25;
    }
    let (w, k) = cs_newton_eps(lp, &w, eps, tol, max_iter, &mut history)?;
    iters += k;
    let residual = cs_residual_eps(lp, &w, eps).sup_norm();
    Ok((
        CSState { w },
        NewtonStats {
            iters,
            residual,
            constraint: 0.0,
            history,
        },
    ))
}
