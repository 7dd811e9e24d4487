//! Steady states of the full SKT system on a Neumann grid.
//!
//! Unknowns are interleaved `u_0, v_0, u_1, v_1, ...`, so the Jacobian of the
//! discrete system is block tridiagonal with 2x2 blocks and fits a band of
//! half-width 3.

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::levelset::{natural_eta, sup_bound, BoundCertificate};
use crate::model::ModelParams;

/// Entries `(k, c_ik)` of row `i` of the mirror-ghost Laplacian, without the `1/h^2`.
fn stencil(i: usize, n: usize) -> [(usize, f64); 3] {
    if i == 0 {
        [(0, -1.0), (1, 1.0), (1, 0.0)]
    } else if i + 1 == n {
        [(n - 2, 1.0), (n - 1, -1.0), (n - 1, 0.0)]
    } else {
        [(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)]
    }
}

fn same_grid(u: &GridFn, v: &GridFn) -> Result<()> {
    if u.grid() == v.grid() {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name: "v",
            reason: "u and v live on different grids".into(),
        })
    }
}

/// `(Δ[(d1+αv)u] + f, Δ[(d2+βu)v] + g)` nodewise.
pub fn residual_skt(p: &ModelParams, u: &GridFn, v: &GridFn) -> (GridFn, GridFn) {
    let m1 = u.zip_map(v, |u, v| (p.d1 + p.alpha * v) * u);
    let m2 = u.zip_map(v, |u, v| (p.d2 + p.beta * u) * v);
    let f = u.zip_map(v, |u, v| p.reaction_f(u, v));
    let g = u.zip_map(v, |u, v| p.reaction_g(u, v));
    (
        m1.neumann_laplacian().zip_map(&f, |a, b| a + b),
        m2.neumann_laplacian().zip_map(&g, |a, b| a + b),
    )
}

/// Divisor that turns the raw residual into a relative one: the diffusion
/// operator applied to the largest flux potential is of size `4/h^2 * max m`.
/// At `alpha = 1e4` rounding alone leaves a raw residual near `1e-7`.
pub fn residual_scale(p: &ModelParams, u: &GridFn, v: &GridFn) -> f64 {
    let h = u.grid().h();
    let mut m = 0.0f64;
    for (&a, &b) in u.values().iter().zip(v.values()) {
        m = m.max(((p.d1 + p.alpha * b) * a).abs());
        m = m.max(((p.d2 + p.beta * a) * b).abs());
    }
    1.0 + 4.0 / (h * h) * m
}

fn interleave(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).flat_map(|(&a, &b)| [a, b]).collect()
}

fn split(grid: Grid, x: &[f64]) -> (GridFn, GridFn) {
    let u = x.iter().step_by(2).copied().collect();
    let v = x.iter().skip(1).step_by(2).copied().collect();
    (
        GridFn::from_values(grid, u).expect("length matches grid"),
        GridFn::from_values(grid, v).expect("length matches grid"),
    )
}

fn stacked_residual(p: &ModelParams, grid: Grid, x: &[f64]) -> Vec<f64> {
    let (u, v) = split(grid, x);
    let (r1, r2) = residual_skt(p, &u, &v);
    interleave(r1.values(), r2.values())
}

/// Analytic Jacobian of the interleaved residual.
pub fn jacobian(p: &ModelParams, u: &GridFn, v: &GridFn) -> BandMatrix {
    let n = u.len();
    let h2 = u.grid().h().powi(2);
    let (u, v) = (u.values(), v.values());
    let mut j = BandMatrix::zeros(2 * n, 3, 3);
    for i in 0..n {
        for &(k, c) in &stencil(i, n) {
            if c == 0.0 {
                continue;
            }
            let c = c / h2;
            j.add(2 * i, 2 * k, c * (p.d1 + p.alpha * v[k]));
            j.add(2 * i, 2 * k + 1, c * p.alpha * u[k]);
            j.add(2 * i + 1, 2 * k, c * p.beta * v[k]);
            j.add(2 * i + 1, 2 * k + 1, c * (p.d2 + p.beta * u[k]));
        }
        let [[fu, fv], [gu, gv]] = p.kin.jacobian(u[i], v[i]);
        j.add(2 * i, 2 * i, fu);
        j.add(2 * i, 2 * i + 1, fv);
        j.add(2 * i + 1, 2 * i, gu);
        j.add(2 * i + 1, 2 * i + 1, gv);
    }
    j
}

/// A converged steady state with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub params: ModelParams,
    pub u: GridFn,
    pub v: GridFn,
    /// Sup norm of the residual divided by [`residual_scale`].
    pub residual_inf: f64,
    pub residual_raw: f64,
    pub newton_iters: usize,
    /// Scaled residual before each Newton step and at convergence.
    pub history: Vec<f64>,
    /// `None` when no explicit certificate applies to the rates.
    pub certificate_ok: Option<bool>,
}

impl SteadyState {
    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// The explicit certificate for the widest band containing the rates, if any.
    pub fn certificate(&self) -> Option<BoundCertificate> {
        let eta = natural_eta(&self.params)?;
        sup_bound(&self.params, eta)
            .ok()
            .filter(|c| c.bounds().is_some())
    }

    /// CSV `x,u,v`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("x,u,v\n");
        for i in 0..self.u.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                self.grid().x(i),
                self.u[i],
                self.v[i]
            );
        }
        out
    }
}

fn certify(p: &ModelParams, u: &GridFn, v: &GridFn) -> Option<bool> {
    let eta = natural_eta(p)?;
    let cert = sup_bound(p, eta).ok()?;
    cert.dominates(u.max(), v.max())
}

const MIN_STEP: f64 = 1.0 / 1048576.0;
const NEG_SLACK: f64 = 1e-12;

/// Damped Newton with Armijo backtracking on the Euclidean residual norm.
pub fn newton_solve(
    p: &ModelParams,
    u0: &GridFn,
    v0: &GridFn,
    tol: f64,
    max_iter: usize,
) -> Result<SteadyState> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParam {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    same_grid(u0, v0)?;
    let grid = *u0.grid();
    let mut x = interleave(u0.values(), v0.values());
    let norm2 = |r: &[f64]| r.iter().map(|a| a * a).sum::<f64>().sqrt();
    let sup = |r: &[f64]| r.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut history = Vec::new();

    let mut r = stacked_residual(p, grid, &x);
    for iter in 0..=max_iter {
        let (u, v) = split(grid, &x);
        let scale = residual_scale(p, &u, &v);
        let scaled = sup(&r) / scale;
        history.push(scaled);
        if scaled <= tol {
            // The scaled test can stop while smooth modes still carry an error
            // of order tol * scale; one more full step removes it when it helps.
            let lu = jacobian(p, &u, &v).factor()?;
            let mut dx: Vec<f64> = r.iter().map(|a| -a).collect();
            lu.solve_in_place(&mut dx);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let rc = stacked_residual(p, grid, &cand);
            let (u, v, r) = if sup(&rc) < sup(&r) && cand.iter().all(|&a| a >= -NEG_SLACK) {
                let (u, v) = split(grid, &cand);
                history.push(sup(&rc) / residual_scale(p, &u, &v));
                (u, v, rc)
            } else {
                (u, v, r)
            };
            let scaled = *history.last().expect("nonempty");
            let certificate_ok = certify(p, &u, &v);
            return Ok(SteadyState {
                params: *p,
                residual_raw: sup(&r),
                residual_inf: scaled,
                newton_iters: iter,
                history,
                certificate_ok,
                u,
                v,
            });
        }
        if iter == max_iter {
            break;
        }
        let lu = jacobian(p, &u, &v).factor()?;
        let mut dx: Vec<f64> = r.iter().map(|a| -a).collect();
        lu.solve_in_place(&mut dx);

        let r0 = norm2(&r);
        let mut lambda = 1.0;
        loop {
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            let min = cand.iter().copied().fold(f64::INFINITY, f64::min);
            if min >= -NEG_SLACK {
                let clipped: Vec<f64> = cand.iter().map(|a| a.max(0.0)).collect();
                let rt = stacked_residual(p, grid, &clipped);
                if norm2(&rt) <= (1.0 - 1e-4 * lambda) * r0 {
                    x = cand;
                    r = stacked_residual(p, grid, &x);
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < MIN_STEP {
                if min < -NEG_SLACK {
                    return Err(Error::NegativeState { min });
                }
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

/// Largest step for which one semi-implicit step maps nonnegative data to
/// nonnegative data: `1 / max(b1 u + c1 v - a1, b2 u + c2 v - a2)`.
pub fn positivity_dt(p: &ModelParams, u: &GridFn, v: &GridFn) -> f64 {
    let k = &p.kin;
    let mut worst = 0.0f64;
    for (&a, &b) in u.values().iter().zip(v.values()) {
        worst = worst
            .max(k.b1 * a + k.c1 * b - k.a1)
            .max(k.b2 * a + k.c2 * b - k.a2);
    }
    if worst > 0.0 {
        1.0 / worst
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct March {
    pub u: GridFn,
    pub v: GridFn,
    pub steps: usize,
    /// Smallest [`positivity_dt`] met along the run; nonnegativity is
    /// guaranteed when it stays above the step used.
    pub dt_bound: f64,
}

fn march_ceiling(p: &ModelParams, u0: &GridFn, v0: &GridFn) -> f64 {
    let explicit = natural_eta(p)
        .and_then(|eta| sup_bound(p, eta).ok())
        .and_then(|c| c.bounds());
    let base = match explicit {
        Some((ub, vb)) => ub.max(vb),
        None => (p.kin.a1 / p.kin.b1).max(p.kin.a2 / p.kin.c2),
    };
    10.0 * base.max(u0.max()).max(v0.max())
}

/// Solves `(I - dt Δ∘diag(m)) next = current + dt * reaction` with the
/// diffusion coefficient `m` lagged at the current state.
fn implicit_step(grid: &Grid, coef: &[f64], rhs: &mut [f64], dt: f64) -> Result<()> {
    let n = rhs.len();
    let s = dt / grid.h().powi(2);
    let mut a = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        a.add(i, i, 1.0);
        for &(k, c) in &stencil(i, n) {
            if c != 0.0 {
                a.add(i, k, -s * c * coef[k]);
            }
        }
    }
    a.factor()?.solve_in_place(rhs);
    Ok(())
}

/// Semi-implicit time march from `(u0, v0)` to `t_end`.
pub fn time_march(p: &ModelParams, u0: &GridFn, v0: &GridFn, dt: f64, t_end: f64) -> Result<March> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidParam {
            name: "dt",
            reason: format!("need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}"),
        });
    }
    same_grid(u0, v0)?;
    let grid = *u0.grid();
    let ceiling = march_ceiling(p, u0, v0);
    let steps = (t_end / dt).ceil() as usize;
    let mut u = u0.values().to_vec();
    let mut v = v0.values().to_vec();
    let mut dt_bound = f64::INFINITY;
    for step in 0..steps {
        let h = dt.min(t_end - step as f64 * dt);
        let uf = GridFn::from_values(grid, u.clone())?;
        let vf = GridFn::from_values(grid, v.clone())?;
        dt_bound = dt_bound.min(positivity_dt(p, &uf, &vf));
        let cu: Vec<f64> = v.iter().map(|&b| p.d1 + p.alpha * b).collect();
        let cv: Vec<f64> = u.iter().map(|&a| p.d2 + p.beta * a).collect();
        let mut ru: Vec<f64> = u.iter().zip(&v).map(|(&a, &b)| a + h * p.reaction_f(a, b)).collect();
        let mut rv: Vec<f64> = u.iter().zip(&v).map(|(&a, &b)| b + h * p.reaction_g(a, b)).collect();
        implicit_step(&grid, &cu, &mut ru, h)?;
        implicit_step(&grid, &cv, &mut rv, h)?;
        u = ru;
        v = rv;
        let top = u.iter().chain(&v).fold(0.0f64, |m, a| m.max(a.abs()));
        if !(top <= ceiling) {
            return Err(Error::BlowUp {
                t: (step + 1) as f64 * dt,
                value: top,
                ceiling,
            });
        }
    }
    Ok(March {
        u: GridFn::from_values(grid, u)?,
        v: GridFn::from_values(grid, v)?,
        steps,
        dt_bound,
    })
}

/// `(F at argmax u, G at argmax v)`. Only meaningful on converged states.
pub fn check_max_principle(s: &SteadyState) -> (f64, f64) {
    let p = &s.params;
    let iu = s.u.argmax();
    let iv = s.v.argmax();
    (
        p.big_f(s.u[iu], s.v[iu]),
        p.big_g(s.u[iv], s.v[iv]),
    )
}

/// Tolerance for [`check_max_principle`]: `1e-6 (1 + |F|, |G| scale)` where the scale
/// is the largest of `|F|`, `|G|` over the nodes.
pub fn max_principle_tol(s: &SteadyState) -> f64 {
    let p = &s.params;
    let scale = s
        .u
        .values()
        .iter()
        .zip(s.v.values())
        .fold(0.0f64, |m, (&a, &b)| m.max(p.big_f(a, b).abs()).max(p.big_g(a, b).abs()));
    1e-6 * (1.0 + scale)
}

/// A cosine polynomial `c0 + Σ c_k cos(k π x / L)` with exact derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct CosSeries {
    pub length: f64,
    pub coeffs: Vec<f64>,
}

impl CosSeries {
    pub fn new(length: f64, coeffs: Vec<f64>) -> Self {
        Self { length, coeffs }
    }

    /// `(f, f', f'')` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let mut out = (0.0, 0.0, 0.0);
        for (k, &c) in self.coeffs.iter().enumerate() {
            let w = k as f64 * std::f64::consts::PI / self.length;
            let (s, co) = (w * x).sin_cos();
            out.0 += c * co;
            out.1 -= c * w * s;
            out.2 -= c * w * w * co;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityDefect {
    pub defect: f64,
    /// Largest magnitude among the terms being combined.
    pub scale: f64,
}

/// Compares the reduced residuals `Ẽ1`, `Ẽ2` (in terms of `F`, `G`) with
/// `(d2+βu)E1 − αu E2` and `(d1+αv)E2 − βv E1` at `samples` points.
pub fn reduction_identity_defect(
    p: &ModelParams,
    u: &CosSeries,
    v: &CosSeries,
    samples: usize,
) -> IdentityDefect {
    let (al, be, d1, d2) = (p.alpha, p.beta, p.d1, p.d2);
    let mut defect = 0.0f64;
    let mut scale = 0.0f64;
    for s in 0..samples {
        let x = u.length * (s as f64 + 0.5) / samples as f64;
        let (uu, u1, u2) = u.eval(x);
        let (vv, v1, v2) = v.eval(x);
        let f = p.reaction_f(uu, vv);
        let g = p.reaction_g(uu, vv);
        let e1 = (d1 + al * vv) * u2 + 2.0 * al * u1 * v1 + al * uu * v2 + f;
        let e2 = (d2 + be * uu) * v2 + 2.0 * be * u1 * v1 + be * vv * u2 + g;
        let det = d1 * d2 + d1 * be * uu + d2 * al * vv;
        let t1 = det * u2 + 2.0 * d2 * al * u1 * v1 + uu * p.big_f(uu, vv);
        let t2 = det * v2 + 2.0 * d1 * be * u1 * v1 + vv * p.big_g(uu, vv);
        let c1 = (d2 + be * uu) * e1 - al * uu * e2;
        let c2 = (d1 + al * vv) * e2 - be * vv * e1;
        defect = defect.max((t1 - c1).abs()).max((t2 - c2).abs());
        for t in [
            det * u2,
            det * v2,
            uu * p.big_f(uu, vv),
            vv * p.big_g(uu, vv),
            (d2 + be * uu) * e1,
            al * uu * e2,
            (d1 + al * vv) * e2,
            be * vv * e1,
            2.0 * d2 * al * u1 * v1,
            2.0 * d1 * be * u1 * v1,
        ] {
            scale = scale.max(t.abs());
        }
    }
    IdentityDefect { defect, scale }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Kinetics;
    use std::f64::consts::PI;

    fn p0(alpha: f64, beta: f64) -> ModelParams {
        let kin = Kinetics::new(5.0, 3.0, 3.0, 1.0, 1.0, 2.0).unwrap();
        ModelParams::new(kin, 1.0, 1.0, alpha, beta).unwrap()
    }

    fn p1(rate: f64) -> ModelParams {
        let kin = Kinetics::new(5.0, 3.0, 0.1, 1.0, 1.0, 0.1).unwrap();
        ModelParams::new(kin, 1.0, 0.1, rate, rate).unwrap()
    }

    #[test]
    fn residual_vanishes_on_constant_and_semi_trivial_states() {
        let g = Grid::unit(32).unwrap();
        let p = p0(2.0, 3.0);
        let (r1, r2) = residual_skt(&p, &g.constant(1.4), &g.constant(0.8));
        assert!(r1.sup_norm() < 1e-14 && r2.sup_norm() < 1e-14);
        let (r1, r2) = residual_skt(&p, &g.constant(5.0 / 3.0), &g.constant(0.0));
        assert_eq!(r1.sup_norm(), 0.0);
        assert_eq!(r2.sup_norm(), 0.0);
    }

    fn mms_defect(n: usize) -> f64 {
        let p = p0(2.0, 3.0);
        let g = Grid::unit(n).unwrap();
        let u = g.sample(|x| 2.0 + (PI * x).cos());
        let v = g.sample(|x| 1.0 + 0.5 * (2.0 * PI * x).cos());
        let (r1, _) = residual_skt(&p, &u, &v);
        let exact = g.sample(|x| {
            let (uu, u1, u2) = (2.0 + (PI * x).cos(), -PI * (PI * x).sin(), -PI * PI * (PI * x).cos());
            let (vv, v1, v2) = (
                1.0 + 0.5 * (2.0 * PI * x).cos(),
                -PI * (2.0 * PI * x).sin(),
                -2.0 * PI * PI * (2.0 * PI * x).cos(),
            );
            (p.d1 + p.alpha * vv) * u2 + 2.0 * p.alpha * u1 * v1 + p.alpha * uu * v2 + p.reaction_f(uu, vv)
        });
        r1.sup_dist(&exact)
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let e1 = mms_defect(64);
        let e2 = mms_defect(128);
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = p0(2.0, 3.0);
        let g = Grid::unit(10).unwrap();
        let u = g.sample(|x| 1.5 + 0.3 * (PI * x).cos());
        let v = g.sample(|x| 0.7 + 0.2 * (3.0 * x).sin());
        let jac = jacobian(&p, &u, &v);
        let x0 = interleave(u.values(), v.values());
        let base = stacked_residual(&p, g, &x0);
        for k in 0..x0.len() {
            let eps = 1e-6;
            let mut x = x0.clone();
            x[k] += eps;
            let r = stacked_residual(&p, g, &x);
            for i in 0..x0.len() {
                let fd = (r[i] - base[i]) / eps;
                assert!((fd - jac.get(i, k)).abs() < 1e-4 * (1.0 + fd.abs()), "({i},{k})");
            }
        }
    }

    #[test]
    fn newton_at_constant_state() {
        let g = Grid::unit(64).unwrap();
        let p = p0(2.0, 3.0);
        let s = newton_solve(&p, &g.constant(1.4), &g.constant(0.8), 1e-12, 20).unwrap();
        assert!(s.newton_iters <= 1);
        assert_eq!(s.certificate_ok, Some(true));
    }

    #[test]
    fn newton_weak_regime_returns_to_constant() {
        let g = Grid::unit(64).unwrap();
        let p = p0(0.0, 0.0);
        let u0 = g.sample(|x| 1.4 * (1.0 + 0.01 * (PI * x).cos()));
        let v0 = g.sample(|x| 0.8 * (1.0 - 0.01 * (PI * x).cos()));
        let s = newton_solve(&p, &u0, &v0, 1e-12, 30).unwrap();
        assert!(s.u.sup_dist(&g.constant(1.4)) < 1e-10);
        assert!(s.v.sup_dist(&g.constant(0.8)) < 1e-10);
        assert_eq!(s.certificate_ok, None);
    }

    #[test]
    fn newton_reports_failure() {
        let g = Grid::unit(16).unwrap();
        let p = p0(2.0, 3.0);
        let u0 = g.sample(|x| 1.0 + (PI * x).cos());
        let err = newton_solve(&p, &u0, &g.constant(0.5), 1e-12, 0).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
        assert!(newton_solve(&p, &u0, &u0, 0.0, 5).is_err());
    }

    #[test]
    fn march_fixed_point_and_weak_convergence() {
        let g = Grid::unit(32).unwrap();
        let p = p0(2.0, 3.0);
        let m = time_march(&p, &g.constant(1.4), &g.constant(0.8), 0.01, 1.0).unwrap();
        assert!(m.u.sup_dist(&g.constant(1.4)) < 1e-13);
        assert!(m.v.sup_dist(&g.constant(0.8)) < 1e-13);

        let mut u = g.sample(|x| 1.0 + 0.5 * (2.0 * PI * x).cos());
        let mut v = g.sample(|x| 0.5 + 0.4 * (5.0 * x).sin().abs());
        let mut dist = Vec::new();
        for _ in 0..20 {
            let m = time_march(&p, &u, &v, 0.02, 0.5).unwrap();
            assert!(m.dt_bound > 0.02);
            assert!(m.u.min() >= 0.0 && m.v.min() >= 0.0);
            u = m.u;
            v = m.v;
            dist.push(u.sup_dist(&g.constant(1.4)).max(v.sup_dist(&g.constant(0.8))));
        }
        for w in dist[10..].windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn strong_regime_departs_constant_state() {
        let g = Grid::new(64, 2.0).unwrap();
        let p = p1(100.0);
        let cs = p.constant_state().unwrap();
        let u0 = g.sample(|x| cs.u_star + 0.05 * (PI * x / 2.0).cos());
        let v0 = g.sample(|x| cs.v_star - 0.05 * (PI * x / 2.0).cos());
        let d0 = u0.sup_dist(&g.constant(cs.u_star));
        let m = time_march(&p, &u0, &v0, 1e-3, 0.5).unwrap();
        assert!(m.u.sup_dist(&g.constant(cs.u_star)) > d0);
    }

    #[test]
    fn reduction_identity_holds() {
        let p = p0(2.0, 3.0);
        let u = CosSeries::new(1.0, vec![2.0, 1.0]);
        let v = CosSeries::new(1.0, vec![1.0, 0.0, 0.5]);
        let d = reduction_identity_defect(&p, &u, &v, 200);
        assert!(d.defect <= 1e-12 * d.scale, "{d:?}");
        let c = reduction_identity_defect(&p, &CosSeries::new(1.0, vec![1.4]), &CosSeries::new(1.0, vec![0.8]), 10);
        assert!(c.defect <= 1e-15 * (1.0 + c.scale));
    }

    #[test]
    fn max_principle_on_constant() {
        let g = Grid::unit(16).unwrap();
        let p = p0(2.0, 3.0);
        let s = newton_solve(&p, &g.constant(1.4), &g.constant(0.8), 1e-12, 5).unwrap();
        let (f, gg) = check_max_principle(&s);
        assert!(f.abs() < 1e-12 && gg.abs() < 1e-12);
        assert!(f >= -max_principle_tol(&s));
    }
}
