//! Bifurcation of nonconstant solutions of the incomplete-segregation system
//! from the constant branch `(w*(d1), τ*)`, with `d1` as parameter.
//!
//! Linearizing at the constant state gives a field block `Δ + P(d1)` with the
//! potential `P(d1) = K/(d1 u* + γ d2 v*)`; mode `j` goes critical where
//! `P(d1) = λ_j`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::limit::{field_scale, is_linearize, is_residual, laplacian_plus_diag, ISState, LimitParams};

/// `d1 u* - γ d2 v*`.
pub fn w_star(lp: &LimitParams, d1: f64) -> Result<f64> {
    let cs = lp.constant_state()?;
    Ok(d1 * cs.u_star - lp.gamma * lp.d2 * cs.v_star)
}

/// `K = (c1 + γ b2) τ* - b1 u*² - γ c2 v*²`.
pub fn potential_numerator(lp: &LimitParams) -> Result<f64> {
    let cs = lp.constant_state()?;
    let k = &lp.kin;
    Ok((k.c1 + lp.gamma * k.b2) * cs.tau_star
        - k.b1 * cs.u_star * cs.u_star
        - lp.gamma * k.c2 * cs.v_star * cs.v_star)
}

/// `K / (d1 u* + γ d2 v*)`.
pub fn potential(lp: &LimitParams, d1: f64) -> Result<f64> {
    let cs = lp.constant_state()?;
    Ok(potential_numerator(lp)? / (d1 * cs.u_star + lp.gamma * lp.d2 * cs.v_star))
}

/// `∂/∂τ ∫ f` at the constant state on a domain of length `length`:
/// `-|Ω| u* (γ d2 b1 + d1 c1) / (d1 u* + γ d2 v*)`.
pub fn l22_value(lp: &LimitParams, d1: f64, length: f64) -> Result<f64> {
    let cs = lp.constant_state()?;
    let k = &lp.kin;
    let gd2 = lp.gamma * lp.d2;
    Ok(-length * cs.u_star * (gd2 * k.b1 + d1 * k.c1) / (d1 * cs.u_star + gd2 * cs.v_star))
}

/// Closed-form threshold `δ_j = (K/λ_j - γ d2 v*)/u*` with `λ_j = (jπ/L)²`.
pub fn delta_j(lp: &LimitParams, j: usize, length: f64) -> Result<f64> {
    if j == 0 {
        return Err(Error::NoThreshold("mode 0 is excluded (mean-zero fields only)".into()));
    }
    let lambda = (j as f64 * std::f64::consts::PI / length).powi(2);
    delta_for_eigenvalue(lp, lambda)
}

fn delta_for_eigenvalue(lp: &LimitParams, lambda: f64) -> Result<f64> {
    let cs = lp.constant_state()?;
    let k = potential_numerator(lp)?;
    if k <= 0.0 {
        return Err(Error::NoThreshold(format!("K = {k:.6e} is not positive")));
    }
    let d = (k / lambda - lp.gamma * lp.d2 * cs.v_star) / cs.u_star;
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::NoThreshold(format!(
            "potential never reaches eigenvalue {lambda:.6e} for d1 > 0"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationPoint {
    pub j: usize,
    /// Discrete eigenvalue `λ_j^h`.
    pub lambda_j: f64,
    /// Crossing of the potential with `λ_j^h`.
    pub delta_j: f64,
    /// Closed form with the continuum eigenvalue.
    pub delta_closed: f64,
    pub phi_j: GridFn,
}

/// Bisection on `P(d1) - λ_j^h` inside `bracket`.
pub fn detect_crossing(
    lp: &LimitParams,
    j: usize,
    grid: &Grid,
    bracket: (f64, f64),
) -> Result<BifurcationPoint> {
    if j == 0 {
        return Err(Error::Index { index: 0, limit: 1 });
    }
    let (lambda, phi) = grid.neumann_eigenpair(j)?;
    let gap = |d1: f64| potential(lp, d1).map(|p| p - lambda);
    let (mut lo, mut hi) = bracket;
    let bad = Error::Bracket { lo, hi };
    if !(lo > 0.0 && hi > lo) {
        return Err(bad);
    }
    let mut glo = gap(lo)?;
    let ghi = gap(hi)?;
    if glo.signum() == ghi.signum() {
        return Err(bad);
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = gap(mid)?;
        if gm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(BifurcationPoint {
        j,
        lambda_j: lambda,
        delta_j: 0.5 * (lo + hi),
        delta_closed: delta_j(lp, j, grid.length())?,
        phi_j: phi,
    })
}

/// Closed-form threshold used to build a bracket for [`detect_crossing`].
pub fn bifurcation_point(lp: &LimitParams, j: usize, grid: &Grid) -> Result<BifurcationPoint> {
    let d = delta_j(lp, j, grid.length())?;
    let exact = delta_for_eigenvalue(lp, grid.eigenvalue(j))?;
    let lo = d.min(exact);
    let hi = d.max(exact);
    detect_crossing(lp, j, grid, (0.5 * lo, 2.0 * hi))
}

fn project_mean_zero(y: &mut [f64]) {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter_mut().for_each(|a| *a -= m);
}

/// Eigenvalue of the discrete IS field linearization at the constant state,
/// restricted to mean-zero fields, closest to `shift`; returned with its
/// eigenvector. The estimate uses the summation-by-parts form of the Rayleigh
/// quotient, so it carries no `1/h²` cancellation.
pub fn critical_eigenvalue(lp: &LimitParams, d1: f64, grid: &Grid, shift: f64) -> Result<(f64, GridFn)> {
    let lpd = lp.with_d1(d1)?;
    let c = ISState::constant(&lpd, grid)?;
    let lin = is_linearize(&lpd, &c.w, c.tau);
    let diag: Vec<f64> = lin.diag.iter().map(|d| d - shift).collect();
    let lu = laplacian_plus_diag(grid, &diag).factor()?;
    let n = grid.n_cells();
    // deterministic start with every mode present
    let mut y: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 97) as f64 / 97.0).collect();
    project_mean_zero(&mut y);
    let h = grid.h();
    let mut theta = f64::NAN;
    for _ in 0..200 {
        let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        y.iter_mut().for_each(|a| *a /= norm);
        let mut next = y.clone();
        lu.solve_in_place(&mut next);
        project_mean_zero(&mut next);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            num += lin.diag[i] * next[i] * next[i];
            den += next[i] * next[i];
        }
        for i in 0..n - 1 {
            num -= (next[i + 1] - next[i]).powi(2) / (h * h);
        }
        let t = num / den;
        let done = (t - theta).abs() <= 1e-15 * (1.0 + t.abs());
        theta = t;
        y = next;
        if done {
            break;
        }
    }
    let mut v = GridFn::from_values(*grid, y)?;
    let norm = v.dot(&v).sqrt();
    if v[0] < 0.0 {
        v.scale(-1.0 / norm);
    } else {
        v.scale(1.0 / norm);
    }
    Ok((theta, v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub s: f64,
    pub d1: f64,
    pub tau: f64,
    pub w: GridFn,
    /// Distance travelled from the bifurcation point along this half-branch.
    pub arclength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub origin: BifurcationPoint,
    /// `s` increasing from 0; the first point is the bifurcation point.
    pub forward: Vec<BranchPoint>,
    /// `s` decreasing from 0; the first point is the bifurcation point.
    pub backward: Vec<BranchPoint>,
    /// Why a half-branch stopped before `|s| = s_max`, if it did.
    pub truncated: Vec<String>,
}

impl Branch {
    /// Points ordered by `s`, the bifurcation point once.
    pub fn ordered(&self) -> Vec<&BranchPoint> {
        self.backward
            .iter()
            .skip(1)
            .rev()
            .chain(self.forward.iter())
            .collect()
    }

    /// CSV `s,d1,tau,w_min,w_max,arclength`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,d1,tau,w_min,w_max,arclength\n");
        for p in self.ordered() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.s,
                p.d1,
                p.tau,
                p.w.min(),
                p.w.max(),
                p.arclength
            );
        }
        out
    }

    /// Full `w` profiles of every `stride`-th point as CSV `s,x,w`.
    pub fn snapshots_csv(&self, stride: usize) -> String {
        let mut out = String::from("s,x,w\n");
        for p in self.ordered().into_iter().step_by(stride.max(1)) {
            for i in 0..p.w.len() {
                let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", p.s, p.w.grid().x(i), p.w[i]);
            }
        }
        out
    }
}

/// Unknowns `(w, τ, d1, s)` flattened, with the weighted inner product
/// `h Σ w w' + τ τ' + d1 d1' + s s'`.
#[derive(Debug, Clone)]
struct State {
    x: Vec<f64>,
}

impl State {
    fn from_point(p: &BranchPoint) -> Self {
        let mut x = p.w.values().to_vec();
        x.extend([p.tau, p.d1, p.s]);
        Self { x }
    }

    fn n(&self) -> usize {
        self.x.len() - 3
    }

    fn tau(&self) -> f64 {
        self.x[self.n()]
    }

    fn d1(&self) -> f64 {
        self.x[self.n() + 1]
    }

    fn s(&self) -> f64 {
        self.x[self.n() + 2]
    }
}

fn wdot(h: f64, n: usize, a: &[f64], b: &[f64]) -> f64 {
    let w: f64 = a[..n].iter().zip(&b[..n]).map(|(p, q)| p * q).sum();
    h * w + a[n..].iter().zip(&b[n..]).map(|(p, q)| p * q).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    /// Nominal arclength step.
    pub ds: f64,
    pub tol: f64,
    pub max_newton: usize,
    pub max_steps: usize,
}

impl ContinuationOptions {
    pub fn new(ds: f64) -> Self {
        Self {
            ds,
            tol: 1e-11,
            max_newton: 12,
            max_steps: 2000,
        }
    }
}

struct Corrector<'a> {
    lp: &'a LimitParams,
    grid: Grid,
    phi: &'a GridFn,
    u_star: f64,
}

impl Corrector<'_> {
    fn residual(&self, z: &State, anchor: &State, t: &[f64], ds: f64) -> Result<(Vec<f64>, f64)> {
        let n = z.n();
        let h = self.grid.h();
        let lp = self.lp.with_d1(z.d1())?;
        let w = GridFn::from_values(self.grid, z.x[..n].to_vec())?;
        let (field, c) = is_residual(&lp, &ISState { w: w.clone(), tau: z.tau() });
        let ws = w_star(&lp, z.d1())?;
        let phase = h * (0..n).map(|i| self.phi[i] * (w[i] - ws)).sum::<f64>() - z.s();
        let diff: Vec<f64> = z.x.iter().zip(&anchor.x).map(|(a, b)| a - b).collect();
        let arc = wdot(h, n, t, &diff) - ds;
        let scaled = (field.sup_norm() / field_scale(&w))
            .max(c.abs())
            .max(phase.abs())
            .max(arc.abs());
        let mut r = field.into_values();
        r.extend([c, phase, arc]);
        Ok((r, scaled))
    }

    fn jacobian(&self, z: &State, t: &[f64]) -> Result<DMatrix<f64>> {
        let n = z.n();
        let h = self.grid.h();
        let lp = self.lp.with_d1(z.d1())?;
        let w = GridFn::from_values(self.grid, z.x[..n].to_vec())?;
        let lin = is_linearize(&lp, &w, z.tau());
        let c = 1.0 / (h * h);
        let mut a = DMatrix::zeros(n + 3, n + 3);
        for i in 0..n {
            if i > 0 {
                a[(i, i - 1)] = c;
                a[(i, i)] -= c;
            }
            if i + 1 < n {
                a[(i, i + 1)] = c;
                a[(i, i)] -= c;
            }
            a[(i, i)] += lin.diag[i];
            a[(i, n)] = lin.col[i];
            a[(i, n + 1)] = lin.field_d1[i];
            a[(n, i)] = lin.row[i];
            a[(n + 1, i)] = h * self.phi[i];
            a[(n + 2, i)] = h * t[i];
        }
        a[(n, n)] = lin.corner;
        a[(n, n + 1)] = lin.constraint_d1;
        let phi_sum: f64 = h * self.phi.values().iter().sum::<f64>();
        a[(n + 1, n + 1)] = -self.u_star * phi_sum;
        a[(n + 1, n + 2)] = -1.0;
        for k in 0..3 {
            a[(n + 2, n + k)] = t[n + k];
        }
        Ok(a)
    }

    /// Newton from `pred` on the augmented system; returns the corrected state
    /// and the number of iterations.
    fn correct(
        &self,
        pred: State,
        anchor: &State,
        t: &[f64],
        ds: f64,
        opts: &ContinuationOptions,
    ) -> Result<(State, usize)> {
        let mut z = pred;
        let mut last = f64::NAN;
        for it in 0..=opts.max_newton {
            let (r, scaled) = self.residual(&z, anchor, t, ds)?;
            last = scaled;
            if !scaled.is_finite() {
                break;
            }
            if scaled <= opts.tol {
                return Ok((z, it));
            }
            if it == opts.max_newton {
                break;
            }
            let a = self.jacobian(&z, t)?;
            let dx = a
                .lu()
                .solve(&DVector::from_vec(r))
                .ok_or(Error::Singular(z.x.len()))?;
            z.x.iter_mut().zip(dx.iter()).for_each(|(a, d)| *a -= d);
            if !(z.tau() > 0.0 && z.d1() > 0.0) {
                break;
            }
        }
        Err(Error::NoConvergence {
            iters: opts.max_newton,
            residual: last,
        })
    }
}

fn normalized(h: f64, n: usize, mut v: Vec<f64>) -> Vec<f64> {
    let norm = wdot(h, n, &v, &v).sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

fn to_point(grid: Grid, z: &State, arclength: f64) -> Result<BranchPoint> {
    let n = z.n();
    Ok(BranchPoint {
        s: z.s(),
        d1: z.d1(),
        tau: z.tau(),
        w: GridFn::from_values(grid, z.x[..n].to_vec())?,
        arclength,
    })
}

/// Outcome of one half-branch: its points and, if it stopped early, why.
pub type HalfBranch = (Vec<BranchPoint>, Option<String>);

/// Pseudo-arclength continuation of one half-branch leaving `bp` in the
/// direction `sign * Φ_j`, until `stop` accepts a point or a step fails.
/// The step grows by 1.5 after at most 3 Newton iterations and halves after 7
/// or more, staying within `[0.25, 4]` times the nominal step.
pub fn continue_half(
    lp: &LimitParams,
    bp: &BifurcationPoint,
    sign: f64,
    opts: &ContinuationOptions,
    mut stop: impl FnMut(&BranchPoint) -> bool,
) -> Result<HalfBranch> {
    let grid = *bp.phi_j.grid();
    let n = grid.n_cells();
    let h = grid.h();
    let lpd = lp.with_d1(bp.delta_j)?;
    let cs = lpd.constant_state()?;
    let origin = BranchPoint {
        s: 0.0,
        d1: bp.delta_j,
        tau: cs.tau_star,
        w: grid.constant(w_star(&lpd, bp.delta_j)?),
        arclength: 0.0,
    };
    let corr = Corrector {
        lp,
        grid,
        phi: &bp.phi_j,
        u_star: cs.u_star,
    };

    let mut t = bp.phi_j.values().iter().map(|p| sign * p).collect::<Vec<_>>();
    t.extend([0.0, 0.0, sign]);
    let mut t = normalized(h, n, t);

    let (ds_min, ds_max) = (0.25 * opts.ds, 4.0 * opts.ds);
    let mut ds = opts.ds;
    let mut points = vec![origin.clone()];
    let mut prev = State::from_point(&origin);
    let mut arclength = 0.0;
    for _ in 0..opts.max_steps {
        let pred = State {
            x: prev.x.iter().zip(&t).map(|(a, b)| a + ds * b).collect(),
        };
        match corr.correct(pred, &prev, &t, ds, opts) {
            Ok((z, iters)) => {
                let step: Vec<f64> = z.x.iter().zip(&prev.x).map(|(a, b)| a - b).collect();
                let len = wdot(h, n, &step, &step).sqrt();
                arclength += len;
                let p = to_point(grid, &z, arclength)?;
                let done = stop(&p);
                points.push(p);
                if done {
                    return Ok((points, None));
                }
                t = normalized(h, n, step);
                prev = z;
                if iters <= 3 {
                    ds = (ds * 1.5).min(ds_max);
                } else if iters >= 7 {
                    ds = (ds * 0.5).max(ds_min);
                }
            }
            Err(e) => {
                if ds > ds_min {
                    ds = (ds * 0.5).max(ds_min);
                } else if prev.d1() + ds * t[n + 1] <= 0.0 {
                    return Ok((points, Some(format!("d1 reaches 0 near s={:.6}", prev.s()))));
                } else {
                    return Ok((points, Some(format!("corrector failed at s={}: {e}", prev.s()))));
                }
            }
        }
    }
    Ok((points, Some(format!("step limit {} reached", opts.max_steps))))
}

/// Both half-branches from `bp` out to `|s| = s_max`.
pub fn switch_and_continue(
    lp: &LimitParams,
    bp: &BifurcationPoint,
    s_max: f64,
    ds: f64,
) -> Result<Branch> {
    switch_and_continue_with(lp, bp, s_max, &ContinuationOptions::new(ds))
}

pub fn switch_and_continue_with(
    lp: &LimitParams,
    bp: &BifurcationPoint,
    s_max: f64,
    opts: &ContinuationOptions,
) -> Result<Branch> {
    if !(s_max > 0.0 && opts.ds > 0.0) {
        return Err(Error::InvalidParam {
            name: "ds",
            reason: format!("need s_max > 0 and ds > 0, got {s_max}, {}", opts.ds),
        });
    }
    let (forward, f_trunc) = continue_half(lp, bp, 1.0, opts, |p| p.s >= s_max)?;
    let (backward, b_trunc) = continue_half(lp, bp, -1.0, opts, |p| p.s <= -s_max)?;
    Ok(Branch {
        origin: bp.clone(),
        forward,
        backward,
        truncated: f_trunc.into_iter().chain(b_trunc).collect(),
    })
}

/// Components of `w - w*(d1) - s Φ_j` along `Φ_j` and along constants
/// (`∫` of each); the first vanishes by the phase condition.
pub fn decomposition_defect(lp: &LimitParams, bp: &BifurcationPoint, p: &BranchPoint) -> Result<(f64, f64)> {
    let ws = w_star(&lp.with_d1(p.d1)?, p.d1)?;
    let psi = p.w.zip_map(&bp.phi_j, |w, phi| w - ws - p.s * phi);
    Ok((psi.dot(&bp.phi_j), psi.integrate()))
}

/// Least-squares slope of `log|τ - τ*|` against `log|s|` for points with
/// `|s|` in `[lo, hi]`.
pub fn tangency_exponent(points: &[BranchPoint], tau_star: f64, lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.s.abs() >= lo && p.s.abs() <= hi && p.tau != tau_star)
        .map(|p| (p.s.abs().ln(), (p.tau - tau_star).abs().ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Follows the forward half-branch from `bp` until `d1` first passes `target`,
/// then solves the IS system at exactly `d1 = target` from the interpolated
/// point.
pub fn branch_state_at(
    lp: &LimitParams,
    bp: &BifurcationPoint,
    target: f64,
    opts: &ContinuationOptions,
) -> Result<ISState> {
    let above = bp.delta_j > target;
    let (points, trunc) = continue_half(lp, bp, 1.0, opts, |p| (p.d1 > target) != above)?;
    let k = points.len();
    if k < 2 || (points[k - 1].d1 > target) == above {
        return Err(Error::NoConvergence {
            iters: k,
            residual: trunc.map_or(f64::NAN, |_| f64::INFINITY),
        });
    }
    let (a, b) = (&points[k - 2], &points[k - 1]);
    let th = (target - a.d1) / (b.d1 - a.d1);
    let w = a.w.zip_map(&b.w, |p, q| p + th * (q - p));
    let tau = a.tau + th * (b.tau - a.tau);
    let (s, _) = crate::limit::is_newton(&lp.with_d1(target)?, &w, tau, 1e-12, 50)?;
    Ok(s)
}
