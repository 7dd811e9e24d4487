//! Browser bindings for three interactive views: the zero level set of `F`
//! with the sup-bound box, the first bifurcating branch of the
//! incomplete-segregation system, and multi-lobe complete-segregation
//! profiles.
//!
//! Each operation returns a JSON string; the `*_json` functions are the
//! native entry points and the exported wrappers only convert errors.

use serde_json::{json, Value};
use skt_core::bifurcation::{bifurcation_point, switch_and_continue};
use skt_core::dhmp::{assemble, existence_check, solve_unit, Variant};
use skt_core::levelset::{sup_bound, u_of_v, v_of_u, v_tilde0};
use skt_core::limit::LimitParams;
use skt_core::{Error, Grid, Kinetics, ModelParams};
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, Error>;

fn pairs(xs: &[f64], ys: &[f64]) -> Value {
    Value::from(xs.iter().zip(ys).map(|(x, y)| vec![*x, *y]).collect::<Vec<_>>())
}

/// The curves `v = V(u)` and `u = U(v)`, the line `F + G = 0`, and the
/// certificate box for the band `eta`.
#[allow(clippy::too_many_arguments)]
pub fn level_sets_json(kin: [f64; 6], d1: f64, d2: f64, alpha: f64, beta: f64, eta: f64, samples: usize) -> Result<String> {
    let [a1, a2, b1, b2, c1, c2] = kin;
    let p = ModelParams::new(Kinetics::new(a1, a2, b1, b2, c1, c2)?, d1, d2, alpha, beta)?;
    let cert = sup_bound(&p, eta)?;
    let (ub, vb) = cert.bounds().unwrap_or((f64::NAN, f64::NAN));
    let samples = samples.max(2);

    let u0 = a1 / b1;
    let u_hi = if ub.is_finite() { ub.max(u0) * 1.2 } else { 4.0 * u0 };
    let us: Vec<f64> = (1..=samples).map(|i| u0 + (u_hi - u0) * i as f64 / samples as f64).collect();
    let vs: Vec<f64> = us.iter().map(|&u| v_of_u(&p, u)).collect::<Result<_>>()?;

    let v0 = v_tilde0(&p);
    let v_hi = if vb.is_finite() { vb.max(v0 + 1.0) * 1.2 } else { 4.0 * (v0 + 1.0) };
    let vs2: Vec<f64> = (1..=samples).map(|i| v0 + (v_hi - v0) * i as f64 / samples as f64).collect();
    let us2: Vec<f64> = vs2.iter().map(|&v| u_of_v(&p, v)).collect::<Result<_>>()?;

    // F + G = s0 - su u - sv v
    let s0 = d2 * a1 + d1 * a2;
    let (su, sv) = (d2 * b1 + d1 * b2, d2 * c1 + d1 * c2);
    let out = json!({
        "v_of_u": pairs(&us, &vs),
        "u_of_v": pairs(&us2, &vs2),
        "sigma_line": [[s0 / su, 0.0], [0.0, s0 / sv]],
        "u_bound": if ub.is_finite() { json!(ub) } else { Value::Null },
        "v_bound": if vb.is_finite() { json!(vb) } else { Value::Null },
        "v_tilde0": v0,
    });
    Ok(out.to_string())
}

/// Threshold for mode `j` and the continued branch `(d1, tau)`, with the
/// `w` profile at both ends.
#[allow(clippy::too_many_arguments)]
pub fn is_branch_json(kin: [f64; 6], d2: f64, gamma: f64, length: f64, n_cells: usize, j: usize, s_max: f64, ds: f64) -> Result<String> {
    let [a1, a2, b1, b2, c1, c2] = kin;
    let grid = Grid::new(n_cells, length)?;
    // d1 is replaced by the threshold; any positive value works here
    let lp = LimitParams::new(Kinetics::new(a1, a2, b1, b2, c1, c2)?, 1.0, d2, gamma)?;
    let bp = bifurcation_point(&lp, j, &grid)?;
    let branch = switch_and_continue(&lp, &bp, s_max, ds)?;
    let pts = branch.ordered();
    let d1: Vec<f64> = pts.iter().map(|p| p.d1).collect();
    let tau: Vec<f64> = pts.iter().map(|p| p.tau).collect();
    let x: Vec<f64> = grid.nodes().collect();
    let ends = [pts.first(), pts.last()].map(|p| p.map(|p| p.w.values().to_vec()));
    let out = json!({
        "delta": bp.delta_j,
        "delta_closed": bp.delta_closed,
        "tau_star": lp.constant_state()?.tau_star,
        "d1": d1,
        "tau": tau,
        "s": pts.iter().map(|p| p.s).collect::<Vec<_>>(),
        "x": x,
        "w_first": ends[0],
        "w_last": ends[1],
        "truncated": branch.truncated,
    });
    Ok(out.to_string())
}

/// The `n`-lobe solution on `(0, 1)` for `d1 = d2 = d`, `a1 = a2 = a`,
/// `b1 = c2 = b`.
pub fn dhmp_json(d: f64, a: f64, b: f64, n: usize, gf: bool, n_cells: usize) -> Result<String> {
    let lp = LimitParams::new(Kinetics::new(a, a, b, 1.0, 1.0, b)?, d, d, 1.0)?;
    let max_n = (1..=64).take_while(|&k| existence_check(&lp, k)).last().unwrap_or(0);
    if !existence_check(&lp, n) {
        return Err(Error::NoThreshold(format!("{n} lobes do not fit; at most {max_n}")));
    }
    let lobe = solve_unit(&lp, n)?;
    let grid = Grid::unit(n_cells)?;
    let sol = assemble(&lp, &lobe, if gf { Variant::Gf } else { Variant::Fg }, &grid)?;
    let out = json!({
        "theta": lobe.theta,
        "max_n": max_n,
        "zeros": sol.zero_count,
        "residual": sol.cs_residual,
        "x": grid.nodes().collect::<Vec<_>>(),
        "w": sol.w.values(),
    });
    Ok(out.to_string())
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn level_sets(a1: f64, a2: f64, b1: f64, b2: f64, c1: f64, c2: f64, d1: f64, d2: f64, alpha: f64, beta: f64, eta: f64) -> std::result::Result<String, JsError> {
    js(level_sets_json([a1, a2, b1, b2, c1, c2], d1, d2, alpha, beta, eta, 200))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn is_branch(a1: f64, a2: f64, b1: f64, b2: f64, c1: f64, c2: f64, d2: f64, gamma: f64, length: f64, n_cells: usize, mode: usize, s_max: f64) -> std::result::Result<String, JsError> {
    js(is_branch_json([a1, a2, b1, b2, c1, c2], d2, gamma, length, n_cells, mode, s_max, s_max / 50.0))
}

#[wasm_bindgen]
pub fn dhmp(d: f64, a: f64, b: f64, n: usize, gf: bool) -> std::result::Result<String, JsError> {
    js(dhmp_json(d, a, b, n, gf, 512))
}
