//! Full cross-diffusion limit: SKT steady states along `α_n, β_n -> ∞` with
//! `α_n/β_n -> γ`, the transformed sequences `w_n`, `z_n`, and the comparison
//! with the matching limiting system.

use std::fmt::Write as _;

use crate::bifurcation::{bifurcation_point, branch_state_at, ContinuationOptions};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::limit::{cs_solve, is_newton, w_z_from_uv, LimitParams};
use crate::model::ModelParams;
use crate::skt::{newton_solve, SteadyState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Incomplete,
    Complete,
    Undetermined,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Incomplete => "incomplete",
            Self::Complete => "complete",
            Self::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Mean of `z_n`.
    pub tau_hat: f64,
    /// `sup |u_n v_n - τ̂_n|`.
    pub uv_defect: f64,
    /// `sup |z_n - τ̂_n|`.
    pub z_spread: f64,
    /// `sup |w_n - w_{n-1}|`; absent at the first step.
    pub w_drift: Option<f64>,
    /// `∫ f(u_n, v_n)`.
    pub int_f: f64,
    pub newton_iters: usize,
    pub residual: f64,
    pub certificate_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRunReport {
    pub gamma_target: f64,
    pub tau_star: f64,
    pub complete_tol: f64,
    pub steps: Vec<StepRecord>,
    pub classification: Classification,
    pub limit_comparison: Option<f64>,
}

impl LimitRunReport {
    /// One row per step; classification and thresholds as leading comments.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# classification={}", self.classification.as_str());
        let _ = writeln!(out, "# gamma_target={:.16e}", self.gamma_target);
        let _ = writeln!(out, "# tau_star={:.16e}", self.tau_star);
        let _ = writeln!(out, "# complete_tol={:.16e}", self.complete_tol);
        if let Some(d) = self.limit_comparison {
            let _ = writeln!(out, "# limit_comparison={d:.16e}");
        }
        out.push_str("alpha,beta,gamma,tau_hat,uv_defect,z_spread,w_drift,int_f,newton_iters,residual,certificate_ok\n");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{},{:.16e},{}",
                s.alpha,
                s.beta,
                s.gamma,
                s.tau_hat,
                s.uv_defect,
                s.z_spread,
                s.w_drift.map_or("".into(), |d| format!("{d:.16e}")),
                s.int_f,
                s.newton_iters,
                s.residual,
                s.certificate_ok.map_or("na", |b| if b { "true" } else { "false" }),
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// `γ_n` must lie in `[eta γ, γ/eta]`.
    pub eta: f64,
    /// Complete segregation below `complete_factor * τ*`.
    pub complete_factor: f64,
    /// Relative change of `τ̂` over the last step counted as stabilized.
    pub stable_rel: f64,
    /// Most geometric sub-steps inserted when a direct warm start fails.
    pub max_split: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 60,
            eta: 0.5,
            complete_factor: 1e-3,
            stable_rel: 0.1,
            max_split: 16,
        }
    }
}

/// Newton at `p` from `from`, retrying through `2, 4, ...` geometric
/// intermediate rate pairs when the direct start fails.
fn continue_rates(
    from: &SteadyState,
    p: &ModelParams,
    opts: &StudyOptions,
) -> Result<SteadyState> {
    let direct = newton_solve(p, &from.u, &from.v, opts.tol, opts.max_iter);
    let mut err = match direct {
        Ok(s) => return Ok(s),
        Err(e) => e,
    };
    let (a0, b0) = (from.params.alpha.max(1e-300), from.params.beta.max(1e-300));
    let mut parts = 2;
    while parts <= opts.max_split {
        let mut cur = from.clone();
        let mut ok = true;
        for k in 1..=parts {
            let t = k as f64 / parts as f64;
            let q = p.with_rates(
                a0 * (p.alpha / a0).powf(t),
                b0 * (p.beta / b0).powf(t),
            )?;
            let q = if k == parts { *p } else { q };
            match newton_solve(&q, &cur.u, &cur.v, opts.tol, opts.max_iter) {
                Ok(s) => cur = s,
                Err(e) => {
                    err = e;
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(cur);
        }
        parts *= 2;
    }
    Err(err)
}

fn validate_schedule(gamma: f64, schedule: &[(f64, f64)], eta: f64) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidParam {
            name: "schedule",
            reason: "empty".into(),
        });
    }
    for (i, &(a, b)) in schedule.iter().enumerate() {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidParam {
                name: "schedule",
                reason: format!("step {i}: rates must be positive"),
            });
        }
        let g = a / b;
        if g < eta * gamma || g > gamma / eta {
            return Err(Error::Band { eta, alpha: a, beta: b });
        }
        if i > 0 && !(a > schedule[i - 1].0 && b > schedule[i - 1].1) {
            return Err(Error::InvalidParam {
                name: "schedule",
                reason: format!("step {i}: rates must increase strictly"),
            });
        }
    }
    Ok(())
}

fn sup_dev(f: &GridFn, c: f64) -> f64 {
    f.values().iter().fold(0.0f64, |m, x| m.max((x - c).abs()))
}

/// Warm-started SKT solves along `schedule`; returns the report and the
/// last converged state. Failures carry the failing step index.
pub fn run_sequence(
    base: &LimitParams,
    schedule: &[(f64, f64)],
    seed: &SteadyState,
    opts: &StudyOptions,
) -> Result<(LimitRunReport, SteadyState)> {
    validate_schedule(base.gamma, schedule, opts.eta)?;
    let tau_star = base.constant_state()?.tau_star;
    let mut steps = Vec::with_capacity(schedule.len());
    let mut prev = seed.clone();
    let mut prev_w: Option<GridFn> = None;
    for (i, &(alpha, beta)) in schedule.iter().enumerate() {
        let wrap = |e: Error| Error::Step {
            step: i,
            source: Box::new(e),
        };
        let p = ModelParams::new(base.kin, base.d1, base.d2, alpha, beta).map_err(wrap)?;
        let s = continue_rates(&prev, &p, opts).map_err(wrap)?;
        let (w, z) = w_z_from_uv(&p, &s.u, &s.v).map_err(wrap)?;
        let tau_hat = z.mean();
        let uv = s.u.zip_map(&s.v, |a, b| a * b);
        steps.push(StepRecord {
            alpha,
            beta,
            gamma: alpha / beta,
            tau_hat,
            uv_defect: sup_dev(&uv, tau_hat),
            z_spread: sup_dev(&z, tau_hat),
            w_drift: prev_w.as_ref().map(|pw| w.sup_dist(pw)),
            int_f: s.u.zip_map(&s.v, |a, b| p.reaction_f(a, b)).integrate(),
            newton_iters: s.newton_iters,
            residual: s.residual_inf,
            certificate_ok: s.certificate_ok,
        });
        prev_w = Some(w);
        prev = s;
    }
    let complete_tol = opts.complete_factor * tau_star;
    let classification = classify(&steps, &prev_w, complete_tol, opts.stable_rel);
    Ok((
        LimitRunReport {
            gamma_target: base.gamma,
            tau_star,
            complete_tol,
            steps,
            classification,
            limit_comparison: None,
        },
        prev,
    ))
}

fn classify(steps: &[StepRecord], last_w: &Option<GridFn>, complete_tol: f64, stable_rel: f64) -> Classification {
    let Some(last) = steps.last() else {
        return Classification::Undetermined;
    };
    let sign_changing = last_w.as_ref().is_some_and(|w| w.sign_changes() > 0);
    if last.tau_hat < complete_tol && sign_changing {
        return Classification::Complete;
    }
    if steps.len() >= 2 && last.tau_hat >= complete_tol {
        let before = steps[steps.len() - 2].tau_hat;
        if (last.tau_hat - before).abs() <= stable_rel * last.tau_hat {
            return Classification::Incomplete;
        }
    }
    Classification::Undetermined
}

/// Solves the limiting system selected by the classification from the last
/// state and returns `sup |w_N - w_limit|`; also stored in the report.
pub fn match_limit(report: &mut LimitRunReport, final_state: &SteadyState) -> Result<f64> {
    let p = &final_state.params;
    let lp = LimitParams::from_model(p, report.gamma_target)?;
    let (w, _) = w_z_from_uv(p, &final_state.u, &final_state.v)?;
    let tau_hat = report.steps.last().map(|s| s.tau_hat).unwrap_or(f64::NAN);
    let d = match report.classification {
        Classification::Incomplete => {
            let (s, _) = is_newton(&lp, &w, tau_hat, 1e-12, 60)?;
            w.sup_dist(&s.w)
        }
        Classification::Complete => {
            let (s, _) = cs_solve(&lp, &w, 1e-10, 0.0, 60)?;
            w.sup_dist(&s.w)
        }
        Classification::Undetermined => {
            return Err(Error::InvalidParam {
                name: "classification",
                reason: "no limiting system matches an undetermined run".into(),
            })
        }
    };
    report.limit_comparison = Some(d);
    Ok(d)
}

/// `(min u v, max u v, whether u and v are each constant to 1e-6)`.
pub fn segregation_diagnostics(s: &SteadyState) -> (f64, f64, bool) {
    let uv = s.u.zip_map(&s.v, |a, b| a * b);
    let flat = |f: &GridFn| f.max() - f.min() <= 1e-6;
    (uv.min(), uv.max(), flat(&s.u) && flat(&s.v))
}

/// Builds a nonconstant SKT steady state at rates `(γ β_end, β_end)`: the
/// mode-1 incomplete-segregation branch is continued to the model's `d1`,
/// mapped to densities, and followed down the descending `rates` ladder
/// (values of `β`, largest first) by warm-started Newton.
pub fn patterned_seed(
    p: &ModelParams,
    gamma: f64,
    grid: &Grid,
    rates: &[f64],
    opts: &StudyOptions,
) -> Result<SteadyState> {
    let lp = LimitParams::from_model(p, gamma)?;
    let bp = bifurcation_point(&lp, 1, grid)?;
    let is = branch_state_at(&lp, &bp, p.d1, &ContinuationOptions::new(0.05))?;
    let (u, v) = is.densities(&lp);
    let mut cur: Option<SteadyState> = None;
    for &beta in rates {
        let q = p.with_rates(gamma * beta, beta)?;
        let next = match &cur {
            None => newton_solve(&q, &u, &v, opts.tol, opts.max_iter)?,
            Some(s) => continue_rates(s, &q, opts)?,
        };
        cur = Some(next);
    }
    cur.ok_or(Error::InvalidParam {
        name: "rates",
        reason: "empty ladder".into(),
    })
}

/// The rate ladder used for the seed: `10⁴` down to `10` in half-decades.
pub const SEED_LADDER: [f64; 7] = [1e4, 3e3, 1e3, 3e2, 1e2, 3e1, 1e1];
