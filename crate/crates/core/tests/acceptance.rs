//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails the
//! test target if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skt_core::bifurcation::{bifurcation_point, critical_eigenvalue, switch_and_continue, tangency_exponent};
use skt_core::dhmp::{assemble, existence_check, solve_unit, validate, Variant};
use skt_core::levelset::{sup_bound, u_of_v, v_of_u, v_tilde0};
use skt_core::limit::{is_residual, uv_from_w_tau, uv_from_w_z, w_z_from_uv, ISState, LimitParams};
use skt_core::skt::{check_max_principle, max_principle_tol, newton_solve, reduction_identity_defect, CosSeries, SteadyState};
use skt_core::study::{match_limit, patterned_seed, run_sequence, StudyOptions, SEED_LADDER};
use skt_core::{CompetitionRegime, Grid, GridFn, Kinetics, ModelParams};

const SEED: u64 = 20240611;
const RATES: [f64; 4] = [10.0, 1e2, 1e3, 1e4];

fn p1_kin() -> Kinetics {
    Kinetics::new(5.0, 3.0, 0.1, 1.0, 1.0, 0.1).unwrap()
}

fn p1(rate: f64) -> ModelParams {
    ModelParams::new(p1_kin(), 1.0, 0.1, rate, rate).unwrap()
}

fn p0(alpha: f64, beta: f64) -> ModelParams {
    let kin = Kinetics::new(5.0, 3.0, 3.0, 1.0, 1.0, 2.0).unwrap();
    ModelParams::new(kin, 1.0, 1.0, alpha, beta).unwrap()
}

fn random_kin(rng: &mut ChaCha8Rng) -> Kinetics {
    loop {
        let mut r = || rng.gen_range(0.1..5.0);
        if let Ok(k) = Kinetics::new(r(), r(), r(), r(), r(), r()) {
            return k;
        }
    }
}

fn random_model(rng: &mut ChaCha8Rng) -> ModelParams {
    let kin = random_kin(rng);
    let rates = [0.1, 10.0, 1e3];
    let (d1, d2) = (rng.gen_range(0.05..2.0), rng.gen_range(0.05..2.0));
    let alpha = rates[rng.gen_range(0..3)] * rng.gen_range(0.5..2.0);
    let beta = rates[rng.gen_range(0..3)] * rng.gen_range(0.5..2.0);
    ModelParams::new(kin, d1, d2, alpha, beta).unwrap()
}

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c1_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = random_model(&mut rng);
        let len = rng.gen_range(0.5..3.0);
        let mut series = || {
            let mut c = vec![rng.gen_range(1.0..4.0)];
            c.extend((1..6).map(|k| rng.gen_range(-0.3..0.3) / k as f64));
            CosSeries::new(len, c)
        };
        let (u, v) = (series(), series());
        let d = reduction_identity_defect(&p, &u, &v, 64);
        worst = worst.max(d.defect / d.scale);
    }
    ensure(worst <= 1e-12, format!("worst defect/scale {worst:.2e}"))
}

fn c2_affine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst = 0.0f64;
    let mut bad = 0;
    let mut in_sigma_with_f = 0;
    for _ in 0..1000 {
        let p = random_model(&mut rng);
        let (u, v) = (rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
        let (f, g, s) = (p.big_f(u, v), p.big_g(u, v), p.sigma_affine(u, v));
        worst = worst.max((f + g - s).abs() / f.abs().max(g.abs()).max(s.abs()).max(1.0));
        if f >= 0.0 && s < 0.0 {
            in_sigma_with_f += 1;
            if g >= 0.0 {
                bad += 1;
            }
        }
    }
    ensure(
        worst <= 1e-13 && bad == 0,
        format!("relative defect {worst:.2e}; {bad} violations among {in_sigma_with_f} points with F >= 0 in Σ"),
    )
}

fn c3_level_sets() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut worst = 0.0f64;
    let mut signs = 0;
    for _ in 0..100 {
        let kin = random_kin(&mut rng);
        let rates = [1.0, 10.0, 100.0];
        let p = ModelParams::new(
            kin,
            rng.gen_range(0.05..2.0),
            rng.gen_range(0.05..2.0),
            rates[rng.gen_range(0..3)],
            rates[rng.gen_range(0..3)],
        )
        .unwrap();
        let scale = |u: f64, v: f64| {
            (p.d2 + p.beta * u) * (kin.a1 + kin.b1 * u + kin.c1 * v) + p.alpha * v * (kin.a2 + kin.b2 * u + kin.c2 * v)
        };
        let u = kin.a1 / kin.b1 * rng.gen_range(1.01..4.0);
        let v = v_of_u(&p, u).unwrap();
        worst = worst.max(p.big_f(u, v).abs() / scale(u, v));
        if !(p.big_f(u, 0.99 * v) < 0.0 && p.big_f(u, 1.01 * v + 1e-9) > 0.0) {
            signs += 1;
        }
        let v = (v_tilde0(&p) + 0.1) * rng.gen_range(1.01..4.0);
        let u = u_of_v(&p, v).unwrap();
        worst = worst.max(p.big_f(u, v).abs() / scale(u, v));
        if !(p.big_f(0.99 * u, v) > 0.0 && p.big_f(1.01 * u + 1e-9, v) < 0.0) {
            signs += 1;
        }
    }
    ensure(
        worst <= 1e-10 && signs == 0,
        format!("worst relative |F| at roots {worst:.2e}; {signs} sign-pattern failures"),
    )
}

/// Converged steady states reused by the certificate and max-principle checks.
fn golden_states() -> Vec<SteadyState> {
    let mut out = Vec::new();
    let g = Grid::unit(128).unwrap();
    for &r in &RATES {
        let p = p1(r);
        let cs = p.constant_state().unwrap();
        let bump = |c: f64| g.sample(|x| c * (1.0 + 0.05 * (std::f64::consts::PI * x).cos()));
        out.push(newton_solve(&p, &bump(cs.u_star), &bump(cs.v_star), 1e-10, 60).unwrap());
    }
    for (a, b) in [(10.0, 10.0), (10.0, 20.0), (100.0, 60.0)] {
        let p = p0(a, b);
        let cs = p.constant_state().unwrap();
        out.push(newton_solve(&p, &g.constant(cs.u_star), &g.constant(cs.v_star), 1e-10, 60).unwrap());
    }
    out
}

fn c4_certificate(golden: &[SteadyState], patterned: &[SteadyState]) -> Outcome {
    let eta = 0.5;
    let mut checked = 0;
    for s in golden.iter().chain(patterned) {
        let r = s.params.alpha / s.params.beta;
        if r < eta || r > 1.0 / eta {
            continue;
        }
        let c = sup_bound(&s.params, eta).map_err(|e| e.to_string())?;
        match c.dominates(s.u.max(), s.v.max()) {
            Some(true) => checked += 1,
            Some(false) => {
                return Err(format!(
                    "state at alpha={}, beta={} exceeds the bound: max u {}, max v {}, bounds {:?}",
                    s.params.alpha,
                    s.params.beta,
                    s.u.max(),
                    s.v.max(),
                    c.bounds()
                ))
            }
            None => {}
        }
    }
    let bounds: Vec<(f64, f64)> = RATES
        .iter()
        .map(|&r| sup_bound(&p1(r), eta).unwrap().bounds().unwrap())
        .collect();
    let (a, b) = (bounds[2], bounds[3]);
    let var = ((a.0 - b.0).abs() / b.0).max((a.1 - b.1).abs() / b.1);
    ensure(
        checked > 0 && var < 0.05,
        format!("{checked} states dominated; last-two sweep variation {:.3}% (bounds at 1e4: {:.4}, {:.4})", 100.0 * var, b.0, b.1),
    )
}

fn c5_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let g = Grid::unit(64).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..40 {
        let kin = random_kin(&mut rng);
        let rates = [10.0, 1e3];
        let p = ModelParams::new(
            kin,
            rng.gen_range(0.05..2.0),
            rng.gen_range(0.05..2.0),
            rates[rng.gen_range(0..2)],
            rates[rng.gen_range(0..2)],
        )
        .unwrap();
        let mut field = || GridFn::from_values(g, (0..64).map(|_| rng.gen_range(0.0..5.0)).collect()).unwrap();
        let (u, v) = (field(), field());
        let (w, z) = w_z_from_uv(&p, &u, &v).unwrap();
        let (u2, v2) = uv_from_w_z(&p, &w, &z).unwrap();
        worst = worst.max(u.sup_dist(&u2)).max(v.sup_dist(&v2));
    }
    ensure(worst <= 1e-11, format!("sup round-trip error {worst:.2e}"))
}

fn c6_is_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let coexisting = |rng: &mut ChaCha8Rng| loop {
        let kin = random_kin(rng);
        if kin.regime() != CompetitionRegime::Neither {
            let lp = LimitParams::new(kin, rng.gen_range(0.05..2.0), rng.gen_range(0.05..2.0), rng.gen_range(0.2..5.0)).unwrap();
            if lp.constant_state().is_ok() {
                return lp;
            }
        }
    };
    let mut prod = 0.0f64;
    for _ in 0..1000 {
        let lp = coexisting(&mut rng);
        let w = rng.gen_range(-20.0..20.0);
        let tau = 10f64.powf(rng.gen_range(-6.0..2.0));
        let (u, v) = uv_from_w_tau(&lp, w, tau);
        prod = prod.max((u * v - tau).abs() / tau);
    }
    let g = Grid::unit(64).unwrap();
    let mut res = 0.0f64;
    for _ in 0..10 {
        let lp = coexisting(&mut rng);
        let s = ISState::constant(&lp, &g).unwrap();
        let (r, c) = is_residual(&lp, &s);
        res = res.max(r.sup_norm()).max(c.abs());
    }
    ensure(
        prod <= 1e-12 && res <= 1e-12,
        format!("relative |uv - τ| {prod:.2e}; constant-state residual {res:.2e}"),
    )
}

fn c7_full_limit(states: &mut Vec<SteadyState>) -> Outcome {
    let p = p1(10.0);
    let grid = Grid::new(256, 2.0).unwrap();
    let opts = StudyOptions::default();
    let seed = patterned_seed(&p, 1.0, &grid, &SEED_LADDER, &opts).map_err(|e| e.to_string())?;
    let lp = LimitParams::from_model(&p, 1.0).unwrap();
    let schedule: Vec<(f64, f64)> = RATES.iter().map(|&r| (r, r)).collect();
    let (mut rep, last) = run_sequence(&lp, &schedule, &seed, &opts).map_err(|e| e.to_string())?;
    let dist = match_limit(&mut rep, &last).map_err(|e| e.to_string())?;
    states.push(seed);
    states.push(last);
    let defects: Vec<f64> = rep.steps.iter().map(|s| s.uv_defect).collect();
    let drifts: Vec<f64> = rep.steps.iter().filter_map(|s| s.w_drift).collect();
    let dec = |xs: &[f64]| xs.windows(2).all(|w| w[1] < w[0]);
    let last_drift = *drifts.last().unwrap();
    ensure(
        dec(&defects) && dec(&drifts) && dist < last_drift,
        format!(
            "uv defects {:?}; w drifts {:?}; limit distance {dist:.2e} vs last drift {last_drift:.2e} ({})",
            defects.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>(),
            drifts.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>(),
            rep.classification.as_str()
        ),
    )
}

fn c8_threshold() -> Outcome {
    let lp = LimitParams::new(p1_kin(), 1.0, 0.1, 1.0).unwrap();
    let b256 = bifurcation_point(&lp, 1, &Grid::unit(256).unwrap()).map_err(|e| e.to_string())?;
    let g512 = Grid::unit(512).unwrap();
    let b512 = bifurcation_point(&lp, 1, &g512).map_err(|e| e.to_string())?;
    let e256 = (b256.delta_j - b256.delta_closed).abs();
    let e512 = (b512.delta_j - b512.delta_closed).abs();
    let ratio = e256 / e512;
    let (theta, _) = critical_eigenvalue(&lp, b512.delta_j, &g512, 0.0).map_err(|e| e.to_string())?;
    ensure(
        (ratio - 4.0).abs() <= 1.0 && theta.abs() <= 1e-10,
        format!(
            "δ1 = {:.8}; errors {e256:.3e} (256), {e512:.3e} (512), ratio {ratio:.3}; eigenvalue at δ1^h {theta:.2e}",
            b512.delta_closed
        ),
    )
}

fn c9_tangency() -> Outcome {
    let lp = LimitParams::new(p1_kin(), 1.0, 0.1, 1.0).unwrap();
    let grid = Grid::unit(128).unwrap();
    let bp = bifurcation_point(&lp, 1, &grid).map_err(|e| e.to_string())?;
    let br = switch_and_continue(&lp, &bp, 0.1, 2e-3).map_err(|e| e.to_string())?;
    let tau_star = lp.constant_state().unwrap().tau_star;
    let mut exps = Vec::new();
    for half in [&br.forward, &br.backward] {
        exps.push(tangency_exponent(&half[1..], tau_star, 1e-3, 1e-1).ok_or("too few branch points")?);
    }
    let d0 = (br.forward[0].d1 - bp.delta_j).abs();
    ensure(
        exps.iter().all(|&e| e >= 1.9) && d0 <= 1e-8,
        format!("exponents {:.4} (s > 0), {:.4} (s < 0); |d1(0) - δ1| = {d0:.1e}", exps[0], exps[1]),
    )
}

fn c10_dhmp(bin: &Path, tmp: &Path) -> Outcome {
    let lp = LimitParams::new(Kinetics::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 0.01, 0.01, 1.0).unwrap();
    let exists: Vec<usize> = (1..=8).filter(|&n| existence_check(&lp, n)).collect();
    let unit = solve_unit(&lp, 1).map_err(|e| e.to_string())?;
    let mut zeros_ok = true;
    let mut mismatch = 0.0f64;
    for n in 1..=3 {
        let lobe = solve_unit(&lp, n).map_err(|e| e.to_string())?;
        for variant in [Variant::Fg, Variant::Gf] {
            let sol = assemble(&lp, &lobe, variant, &Grid::unit(480).unwrap()).map_err(|e| e.to_string())?;
            let (z, _, m) = validate(&sol, &lp);
            zeros_ok &= z == n;
            mismatch = mismatch.max(m);
        }
    }
    let res: Vec<f64> = [128, 256, 512]
        .iter()
        .map(|&n| validate(&assemble(&lp, &unit, Variant::Fg, &Grid::unit(n).unwrap()).unwrap(), &lp).1)
        .collect();
    let ratios = [res[0] / res[1], res[1] / res[2]];
    let cfg = tmp.join("dhmp.cfg");
    std::fs::write(
        &cfg,
        "model.a1 = 1\nmodel.a2 = 1\nmodel.b1 = 1\nmodel.b2 = 1\nmodel.c1 = 1\nmodel.c2 = 1\nmodel.d1 = 0.01\nmodel.d2 = 0.01\n",
    )
    .unwrap();
    let code = Command::new(bin)
        .args(["dhmp", "--n", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.join("dhmp4"))
        .output()
        .unwrap()
        .status
        .code();
    ensure(
        exists == [1, 2, 3]
            && (unit.theta - 0.5).abs() <= 1e-8
            && zeros_ok
            && ratios.iter().all(|r| (r - 4.0).abs() <= 1.0)
            && mismatch <= 1e-8
            && code == Some(4),
        format!(
            "exists for {exists:?}; θ1 = {:.10}; zero counts ok {zeros_ok}; residual ratios {:.3}, {:.3}; mismatch {mismatch:.1e}; `dhmp --n 4` exit {code:?}",
            unit.theta, ratios[0], ratios[1]
        ),
    )
}

fn c11_max_principle(states: &[SteadyState]) -> Outcome {
    let mut worst = f64::INFINITY;
    for s in states {
        let (f, g) = check_max_principle(s);
        let tol = max_principle_tol(s);
        worst = worst.min(f.min(g) / tol);
        if f < -tol || g < -tol {
            return Err(format!(
                "state at alpha={}: F at argmax u {f:.3e}, G at argmax v {g:.3e}, tolerance {tol:.1e}",
                s.params.alpha
            ));
        }
    }
    Ok(format!("{} states; smallest value/tolerance {worst:.3e}", states.len()))
}

fn c12_determinism(bin: &Path, tmp: &Path) -> Outcome {
    let runs: [&[&str]; 7] = [
        &["selftest"],
        &["solve", "--alpha", "100", "--beta", "100"],
        &["bounds"],
        &["is-solve"],
        &["bifurcate", "--grid", "128"],
        &["limit-study", "--grid", "128"],
        &["dhmp", "--n", "1", "--grid", "512"],
    ];
    let dhmp_cfg = tmp.join("dhmp.cfg");
    let mut files = 0;
    for args in runs {
        let mut outs = Vec::new();
        for k in 0..2 {
            let dir = tmp.join(format!("det-{}-{k}", args[0]));
            let mut cmd = Command::new(bin);
            cmd.args(args).arg("--out").arg(&dir);
            if args[0] == "dhmp" {
                cmd.arg("--config").arg(&dhmp_cfg);
            }
            let st = cmd.output().unwrap();
            if !st.status.success() {
                return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&st.stderr)));
            }
            outs.push(dir);
        }
        let mut names: Vec<_> = std::fs::read_dir(&outs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for name in names {
            let a = std::fs::read(outs[0].join(&name)).unwrap();
            let b = std::fs::read(outs[1].join(&name)).unwrap_or_default();
            if a != b {
                return Err(format!("{args:?}: {name:?} differs between runs"));
            }
            files += 1;
        }
    }
    Ok(format!("{} commands, {files} files bit-identical across two runs", runs.len()))
}

fn main() {
    let bin = Path::new(env!("CARGO_BIN_EXE_skt"));
    let tmp = tempfile::tempdir().unwrap();
    let golden = golden_states();
    let mut patterned = Vec::new();

    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let r = f();
        results.push((id, name, r, t.elapsed().as_secs_f64()));
    };
    run(1, "reduction identity", &mut c1_reduction);
    run(2, "F+G affine identity", &mut c2_affine);
    run(3, "level-set roots", &mut c3_level_sets);
    run(5, "transform round trip", &mut c5_round_trip);
    run(6, "IS identities", &mut c6_is_identities);
    run(7, "full-limit convergence", &mut || c7_full_limit(&mut patterned));
    run(4, "a priori bound certificate", &mut || c4_certificate(&golden, &patterned));
    run(8, "bifurcation threshold", &mut c8_threshold);
    run(9, "branch tangency", &mut c9_tangency);
    run(10, "DHMP construction", &mut || c10_dhmp(bin, tmp.path()));
    let all: Vec<SteadyState> = golden.iter().chain(&patterned).cloned().collect();
    run(11, "maximum-principle diagnostic", &mut || c11_max_principle(&all));
    run(12, "determinism", &mut || c12_determinism(bin, tmp.path()));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, r, secs) in &results {
        let (tag, msg) = match r {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("[{tag}] criterion {id:>2}: {name} ({secs:.2}s): {msg}");
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
