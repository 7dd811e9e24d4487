//! Embedded invariant suite: algebraic identities that must hold to rounding
//! error for randomly drawn parameters and fields. Deterministic for a seed.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, GridFn};
use crate::levelset::{u_of_v, v_of_u, v_tilde0};
use crate::limit::{is_residual, uv_from_w_tau, uv_from_w_z, w_z_from_uv, ISState, LimitParams};
use crate::model::{CompetitionRegime, Kinetics, ModelParams};
use crate::skt::{reduction_identity_defect, CosSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub samples: usize,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, samples: usize, value: f64, tol: f64) -> Self {
        Self {
            name,
            samples,
            value,
            tol,
            pass: value <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,samples,value,tol,pass\n");
        for c in &self.checks {
            let _ = writeln!(out, "{},{},{:.6e},{:.1e},{}", c.name, c.samples, c.value, c.tol, c.pass);
        }
        out
    }
}

fn kinetics(rng: &mut ChaCha8Rng) -> Kinetics {
    loop {
        let mut r = || rng.gen_range(0.1..5.0);
        if let Ok(k) = Kinetics::new(r(), r(), r(), r(), r(), r()) {
            return k;
        }
    }
}

fn model(rng: &mut ChaCha8Rng, rates: &[f64]) -> ModelParams {
    let kin = kinetics(rng);
    let d1 = rng.gen_range(0.05..2.0);
    let d2 = rng.gen_range(0.05..2.0);
    let alpha = rates[rng.gen_range(0..rates.len())] * rng.gen_range(0.5..2.0);
    let beta = rates[rng.gen_range(0..rates.len())] * rng.gen_range(0.5..2.0);
    ModelParams::new(kin, d1, d2, alpha, beta).expect("positive draws")
}

/// Competition parameters with a positive constant state.
fn coexisting(rng: &mut ChaCha8Rng) -> LimitParams {
    loop {
        let kin = kinetics(rng);
        if matches!(kin.regime(), CompetitionRegime::Weak | CompetitionRegime::Strong) {
            let lp = LimitParams::new(
                kin,
                rng.gen_range(0.05..2.0),
                rng.gen_range(0.05..2.0),
                rng.gen_range(0.2..5.0),
            )
            .expect("positive draws");
            if lp.constant_state().is_ok() {
                return lp;
            }
        }
    }
}

fn series(rng: &mut ChaCha8Rng, length: f64) -> CosSeries {
    let mut c = vec![rng.gen_range(1.0..4.0)];
    for k in 1..6 {
        c.push(rng.gen_range(-0.3..0.3) / k as f64);
    }
    CosSeries::new(length, c)
}

fn reduction(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = model(rng, &[0.1, 10.0, 1e3]);
        let len = rng.gen_range(0.5..3.0);
        let (u, v) = (series(rng, len), series(rng, len));
        let d = reduction_identity_defect(&p, &u, &v, 64);
        worst = worst.max(d.defect / d.scale.max(f64::MIN_POSITIVE));
    }
    Check::new("reduction_identity", 100, worst, 1e-12)
}

fn affine(rng: &mut ChaCha8Rng) -> (Check, Check) {
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    for _ in 0..1000 {
        let p = model(rng, &[0.1, 10.0, 1e3]);
        let (u, v) = (rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
        let (f, g) = (p.big_f(u, v), p.big_g(u, v));
        let s = p.sigma_affine(u, v);
        let scale = f.abs().max(g.abs()).max(s.abs()).max(1.0);
        worst = worst.max((f + g - s).abs() / scale);
        if f >= 0.0 && s < 0.0 && g >= 0.0 {
            violations += 1;
        }
    }
    (
        Check::new("affine_identity", 1000, worst, 1e-13),
        Check::new("sigma_implication", 1000, violations as f64, 0.0),
    )
}

fn level_sets(rng: &mut ChaCha8Rng) -> (Check, Check) {
    let mut worst = 0.0f64;
    let mut wrong_signs = 0usize;
    for _ in 0..100 {
        let p = model(rng, &[1.0, 10.0, 1e2]);
        let k = p.kin;
        let u = k.a1 / k.b1 * rng.gen_range(1.01..4.0);
        let v = v_of_u(&p, u).expect("u above a1/b1");
        let scale = (p.d2 + p.beta * u) * (k.a1 + k.b1 * u + k.c1 * v) + p.alpha * v * (k.a2 + k.b2 * u + k.c2 * v);
        worst = worst.max(p.big_f(u, v).abs() / scale);
        // increasing in v through the root
        if !(p.big_f(u, 0.99 * v) < 0.0 && p.big_f(u, 1.01 * v + 1e-9) > 0.0) {
            wrong_signs += 1;
        }

        let v0 = v_tilde0(&p);
        let v = (v0 + 0.1) * rng.gen_range(1.01..4.0);
        let u = u_of_v(&p, v).expect("v above ṽ0");
        let scale = (p.d2 + p.beta * u) * (k.a1 + k.b1 * u + k.c1 * v) + p.alpha * v * (k.a2 + k.b2 * u + k.c2 * v);
        worst = worst.max(p.big_f(u, v).abs() / scale);
        // decreasing in u through the root
        if !(p.big_f(0.99 * u, v) > 0.0 && p.big_f(1.01 * u + 1e-9, v) < 0.0) {
            wrong_signs += 1;
        }
    }
    (
        Check::new("levelset_roots", 200, worst, 1e-10),
        Check::new("levelset_signs", 200, wrong_signs as f64, 0.0),
    )
}

fn round_trip(rng: &mut ChaCha8Rng) -> Check {
    let grid = Grid::unit(64).expect("valid grid");
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let kin = kinetics(rng);
        let rates = [10.0, 1e3];
        let p = ModelParams::new(
            kin,
            rng.gen_range(0.05..2.0),
            rng.gen_range(0.05..2.0),
            rates[rng.gen_range(0..2)],
            rates[rng.gen_range(0..2)],
        )
        .expect("positive draws");
        let mut field = || {
            GridFn::from_values(grid, (0..64).map(|_| rng.gen_range(0.0..5.0)).collect()).expect("length matches")
        };
        let (u, v) = (field(), field());
        let (w, z) = w_z_from_uv(&p, &u, &v).expect("nonnegative fields");
        let (u2, v2) = uv_from_w_z(&p, &w, &z).expect("image of the forward map");
        let scale = 1.0f64.max(u.max()).max(v.max());
        worst = worst.max(u.sup_dist(&u2).max(v.sup_dist(&v2)) / scale);
    }
    Check::new("transform_round_trip", 20, worst, 1e-11)
}

fn is_identities(rng: &mut ChaCha8Rng) -> (Check, Check) {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let lp = coexisting(rng);
        let w = rng.gen_range(-20.0..20.0);
        let tau = 10f64.powf(rng.gen_range(-6.0..2.0));
        let (u, v) = uv_from_w_tau(&lp, w, tau);
        worst = worst.max((u * v - tau).abs() / tau);
    }
    let grid = Grid::unit(32).expect("valid grid");
    let mut res = 0.0f64;
    for _ in 0..10 {
        let lp = coexisting(rng);
        let s = ISState::constant(&lp, &grid).expect("constant state exists");
        let (r, c) = is_residual(&lp, &s);
        res = res.max(r.sup_norm()).max(c.abs());
    }
    (
        Check::new("is_product", 1000, worst, 1e-12),
        Check::new("is_constant_residual", 10, res, 1e-12),
    )
}

/// Runs every check with a ChaCha stream seeded by `seed`.
pub fn run(seed: u64) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = vec![reduction(&mut rng)];
    let (a, s) = affine(&mut rng);
    checks.extend([a, s]);
    let (r, s) = level_sets(&mut rng);
    checks.extend([r, s]);
    checks.push(round_trip(&mut rng));
    let (p, c) = is_identities(&mut rng);
    checks.extend([p, c]);
    SelftestReport { seed, checks }
}
