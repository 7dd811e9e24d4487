//! The `skt` batch tool: subcommands, flag overrides, provenance headers and
//! atomic CSV output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::bifurcation::{bifurcation_point, switch_and_continue, tangency_exponent};
use crate::config::ExperimentConfig;
use crate::dhmp::{assemble, existence_check, solve_unit, validate, Variant};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::levelset::sup_bound;
use crate::limit::{cs_solve, is_newton, LimitParams};
use crate::skt::newton_solve;
use crate::study::{match_limit, patterned_seed, run_sequence, segregation_diagnostics, Classification, StudyOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "skt", version, about = "Steady states and cross-diffusion limits of the SKT competition model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `section.key = value` file; missing keys use the documented defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Number of grid cells (default 256).
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
    /// Seed for randomized starts (default 42).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Neumann mode index for IS/CS starts and bifurcation.
    #[arg(long, value_name = "J")]
    mode: Option<usize>,
    /// Number of DHMP lobes.
    #[arg(long, value_name = "N")]
    n: Option<usize>,
    /// Band half-width for the bound certificate and the rate schedule.
    #[arg(long, value_name = "R")]
    eta: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Newton solve of the SKT steady-state problem.
    Solve(Common),
    /// A priori sup bound certificate.
    Bounds(Common),
    /// Steady states along an increasing rate schedule and the matching limit.
    LimitStudy(Common),
    /// Incomplete-segregation limiting system.
    IsSolve(Common),
    /// Complete-segregation limiting system.
    CsSolve(Common),
    /// Bifurcation threshold and continued branch of the IS system.
    Bifurcate(Common),
    /// Multi-lobe sign-changing CS solution.
    Dhmp(Common),
    /// Embedded invariant suite.
    Selftest(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Bounds(_) => "bounds",
            Command::LimitStudy(_) => "limit-study",
            Command::IsSolve(_) => "is-solve",
            Command::CsSolve(_) => "cs-solve",
            Command::Bifurcate(_) => "bifurcate",
            Command::Dhmp(_) => "dhmp",
            Command::Selftest(_) => "selftest",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Solve(c)
            | Command::Bounds(c)
            | Command::LimitStudy(c)
            | Command::IsSolve(c)
            | Command::CsSolve(c)
            | Command::Bifurcate(c)
            | Command::Dhmp(c)
            | Command::Selftest(c) => c,
        }
    }
}

/// Exit code for an error: 2 no convergence, 3 configuration, 4 regime or
/// threshold, 1 anything else.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::NoConvergence { .. } => 2,
        Error::Parse { .. } | Error::Validation { .. } => 3,
        Error::Regime | Error::NoThreshold(_) | Error::NoBracket { .. } => 4,
        _ => 1,
    }
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Validation {
                key: "--config".into(),
                msg: format!("{}: {e}", path.display()),
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let set = |cfg: &mut ExperimentConfig, key: &str, v: Option<String>| match v {
        Some(v) => cfg.set(key, &v),
        None => Ok(()),
    };
    set(&mut cfg, "grid.n_cells", c.grid.map(|x| x.to_string()))?;
    set(&mut cfg, "seed", c.seed.map(|x| x.to_string()))?;
    set(&mut cfg, "model.alpha", c.alpha.map(|x| format!("{x:e}")))?;
    set(&mut cfg, "model.beta", c.beta.map(|x| format!("{x:e}")))?;
    set(&mut cfg, "model.gamma", c.gamma.map(|x| format!("{x:e}")))?;
    set(&mut cfg, "limit.mode", c.mode.map(|x| x.to_string()))?;
    set(&mut cfg, "dhmp.n", c.n.map(|x| x.to_string()))?;
    if let Some(eta) = c.eta {
        cfg.set("bounds.eta", &format!("{eta:e}"))?;
        cfg.set("study.eta", &format!("{eta:e}"))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Output sink: every file gets the same provenance header and is written
/// through a temporary file and a rename.
struct Sink {
    dir: PathBuf,
    header: String,
}

impl Sink {
    fn new(dir: &Path, command: &str, cfg: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let hash = hex::encode(Sha256::digest(cfg.to_text().as_bytes()));
        Ok(Self {
            dir: dir.to_path_buf(),
            header: format!("# skt-lab {VERSION} command={command} config_hash={hash}\n"),
        })
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, format!("{}{body}", self.header))?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

fn meta(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// `base + a Σ_k c_k cos(kπx/L)` with seeded coefficients in `[-1, 1]`.
fn perturbed(grid: &Grid, base: f64, amp: f64, rng: &mut ChaCha8Rng) -> GridFn {
    let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let len = grid.length();
    grid.sample(|x| {
        let s: f64 = c
            .iter()
            .enumerate()
            .map(|(k, ck)| ck * ((k + 1) as f64 * std::f64::consts::PI * x / len).cos())
            .sum();
        base * (1.0 + amp * s / 4.0)
    })
}

fn mode_start(lp: &LimitParams, cfg: &ExperimentConfig, grid: &Grid) -> Result<(GridFn, f64)> {
    let cs = lp.constant_state()?;
    let ws = crate::bifurcation::w_star(lp, lp.d1)?;
    let j = cfg.limit_mode as f64;
    let len = grid.length();
    let amp = cfg.limit_amplitude;
    let w0 = grid.sample(|x| ws + amp * (j * std::f64::consts::PI * x / len).cos());
    Ok((w0, cs.tau_star))
}

fn cmd_solve(cfg: &ExperimentConfig, sink: &Sink) -> Result<String> {
    let p = cfg.model()?;
    let grid = cfg.grid()?;
    let (u0, v0) = match p.constant_state() {
        Ok(cs) => (cs.u_star, cs.v_star),
        Err(_) => (0.5 * p.kin.a1 / p.kin.b1, 0.5 * p.kin.a2 / p.kin.c2),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u = perturbed(&grid, u0, cfg.solve_perturb, &mut rng);
    let v = perturbed(&grid, v0, cfg.solve_perturb, &mut rng);
    let s = newton_solve(&p, &u, &v, cfg.solve_tol, cfg.solve_max_iter)?;
    sink.write("solve.csv", &s.to_csv())?;
    let (ub, vb) = s
        .certificate()
        .and_then(|c| c.bounds())
        .map_or(("na".to_string(), "na".to_string()), |(a, b)| (format!("{a:.16e}"), format!("{b:.16e}")));
    sink.write(
        "solve.meta",
        &meta(&[
            ("residual", format!("{:.6e}", s.residual_inf)),
            ("residual_raw", format!("{:.6e}", s.residual_raw)),
            ("iters", s.newton_iters.to_string()),
            ("u_bound", ub),
            ("v_bound", vb),
            ("certificate_ok", s.certificate_ok.map_or("na".into(), |b| b.to_string())),
            ("regime", format!("{:?}", p.regime()).to_lowercase()),
            ("max_u", format!("{:.16e}", s.u.max())),
            ("max_v", format!("{:.16e}", s.v.max())),
        ]),
    )?;
    Ok(format!(
        "converged in {} iterations, residual {:.3e}, max u {:.6}, max v {:.6}\n",
        s.newton_iters,
        s.residual_inf,
        s.u.max(),
        s.v.max()
    ))
}

fn cmd_bounds(cfg: &ExperimentConfig, sink: &Sink) -> Result<String> {
    let p = cfg.model()?;
    let c = sup_bound(&p, cfg.bounds_eta)?;
    let mut out = String::from("eta,alpha,beta,u_bound,v_bound\n");
    match c.bounds() {
        Some((ub, vb)) => writeln!(out, "{:e},{:e},{:e},{ub:.16e},{vb:.16e}", c.eta, c.alpha, c.beta),
        None => writeln!(out, "{:e},{:e},{:e},na,na", c.eta, c.alpha, c.beta),
    }
    .expect("string write");
    sink.write("bounds.csv", &out)?;
    Ok(out)
}

fn cmd_limit_study(cfg: &ExperimentConfig, sink: &Sink) -> Result<String> {
    let p = cfg.model()?;
    let lp = cfg.limit()?;
    let opts = StudyOptions {
        tol: cfg.solve_tol,
        max_iter: cfg.solve_max_iter,
        eta: cfg.study_eta,
        ..StudyOptions::default()
    };
    let grid = Grid::new(cfg.n_cells, cfg.study_length)?;
    let seed = patterned_seed(&p, cfg.gamma, &grid, &cfg.study_ladder, &opts)?;
    let (mut report, last) = run_sequence(&lp, &cfg.schedule(), &seed, &opts)?;
    if report.classification != Classification::Undetermined {
        match_limit(&mut report, &last)?;
    }
    sink.write("limit_study.csv", &report.to_csv())?;
    sink.write("limit_final.csv", &last.to_csv())?;
    let (lo, hi, flat) = segregation_diagnostics(&last);
    Ok(format!(
        "classification {}, uv in [{lo:.6e}, {hi:.6e}], constant {flat}, limit distance {}\n",
        report.classification.as_str(),
        report.limit_comparison.map_or("na".into(), |d| format!("{d:.3e}"))
    ))
}

fn cmd_is(cfg: &ExperimentConfig, sink: &Sink) -> Result<String> {
    let lp = cfg.limit()?;
    let grid = cfg.grid()?;
    let (w0, tau0) = mode_start(&lp, cfg, &grid)?;
    let (s, st) = is_newton(&lp, &w0, tau0, cfg.limit_tol, cfg.limit_max_iter)?;
    sink.write("is.csv", &s.to_csv(&lp))?;
    sink.write(
        "is.meta",
        &meta(&[
            ("tau", format!("{:.16e}", s.tau)),
            ("residual", format!("{:.6e}", st.residual)),
            ("iters", st.iters.to_string()),
        ]),
    )?;
    Ok(format!("tau {:.10}, {} iterations, residual {:.3e}\n", s.tau, st.iters, st.residual))
}

fn cmd_cs(cfg: &ExperimentConfig, sink: &Sink) -> Result<String> {
    let lp = cfg.limit()?;
    let grid = cfg.grid()?;
    let (w0, _) = mode_start(&lp, cfg, &grid)?;
    let (s, st) = cs_solve(&lp, &w0, cfg.limit_tol, cfg.cs_eps, cfg.limit_max_iter)?;
    sink.write("cs.csv", &s.to_csv(&lp))?;
    sink.write(
        "cs.meta",
        &meta(&[
            ("eps", format!("{:e}", cfg.cs_eps)),
            ("residual", format!("{:.6e}", st.residual)),
            ("iters", st.iters.to_string()),
            ("zeros", s.w.sign_changes().to_string()),
        ]),
    )?;
    Ok(format!(
        "{} iterations, residual {:.3e}, {} sign changes\n",
        st.iters,
        st.residual,
        s.w.sign_changes()
    ))
}

fn cmd_bifurcate(cfg: &ExperimentConfig, sink: &Sink) -> Result<String> {
    let lp = cfg.limit()?;
    let grid = cfg.grid()?;
    let bp = bifurcation_point(&lp, cfg.limit_mode, &grid)?;
    let branch = switch_and_continue(&lp, &bp, cfg.bifurcate_s_max, cfg.bifurcate_ds)?;
    let tau_star = lp.constant_state()?.tau_star;
    let pts: Vec<_> = branch.forward.iter().skip(1).cloned().collect();
    let exponent = tangency_exponent(&pts, tau_star, 1e-3, 1e-1);
    sink.write("branch.csv", &branch.to_csv())?;
    sink.write(
        "bifurcation.meta",
        &meta(&[
            ("mode", bp.j.to_string()),
            ("lambda", format!("{:.16e}", bp.lambda_j)),
            ("delta_discrete", format!("{:.16e}", bp.delta_j)),
            ("delta_closed", format!("{:.16e}", bp.delta_closed)),
            ("tangency_exponent", exponent.map_or("na".into(), |e| format!("{e:.6}"))),
            ("truncated", branch.truncated.join("; ")),
        ]),
    )?;
    Ok(format!(
        "delta {:.10} (closed form {:.10}), {} branch points\n",
        bp.delta_j,
        bp.delta_closed,
        branch.ordered().len()
    ))
}

fn cmd_dhmp(cfg: &ExperimentConfig, sink: &Sink) -> Result<String> {
    let lp = cfg.limit()?;
    let n = cfg.dhmp_n;
    if !existence_check(&lp, n) {
        return Err(Error::NoThreshold(format!(
            "no {n}-lobe solution: the lobe half-length does not fit 1/(2n)"
        )));
    }
    let lobe = solve_unit(&lp, n)?;
    let variant = if cfg.dhmp_variant == "gf" { Variant::Gf } else { Variant::Fg };
    let grid = Grid::unit(cfg.n_cells)?;
    let sol = assemble(&lp, &lobe, variant, &grid)?;
    let (zeros, res, mismatch) = validate(&sol, &lp);
    sink.write("dhmp.csv", &sol.to_csv(&lp))?;
    sink.write(
        "dhmp.meta",
        &meta(&[
            ("n", n.to_string()),
            ("variant", cfg.dhmp_variant.clone()),
            ("theta", format!("{:.16e}", lobe.theta)),
            ("zeros", zeros.to_string()),
            ("cs_residual", format!("{res:.6e}")),
            ("mismatch", format!("{mismatch:.6e}")),
        ]),
    )?;
    Ok(format!("theta {:.10}, {zeros} zeros, residual {res:.3e}\n", lobe.theta))
}

fn cmd_selftest(cfg: &ExperimentConfig, sink: &Sink) -> Result<String> {
    let report = crate::selftest::run(cfg.seed);
    let csv = report.to_csv();
    sink.write("selftest.csv", &csv)?;
    if !report.passed() {
        return Err(Error::InvalidParam {
            name: "selftest",
            reason: format!("failing checks:\n{csv}"),
        });
    }
    Ok(csv)
}

fn run(cmd: &Command) -> Result<String> {
    let c = cmd.common();
    let cfg = load(c)?;
    let sink = Sink::new(&c.out, cmd.name(), &cfg)?;
    match cmd {
        Command::Solve(_) => cmd_solve(&cfg, &sink),
        Command::Bounds(_) => cmd_bounds(&cfg, &sink),
        Command::LimitStudy(_) => cmd_limit_study(&cfg, &sink),
        Command::IsSolve(_) => cmd_is(&cfg, &sink),
        Command::CsSolve(_) => cmd_cs(&cfg, &sink),
        Command::Bifurcate(_) => cmd_bifurcate(&cfg, &sink),
        Command::Dhmp(_) => cmd_dhmp(&cfg, &sink),
        Command::Selftest(_) => cmd_selftest(&cfg, &sink),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(msg) => {
            print!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("skt {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::NoConvergence { iters: 1, residual: 1.0 }), 2);
        assert_eq!(
            exit_code(&Error::Step {
                step: 3,
                source: Box::new(Error::NoConvergence { iters: 1, residual: 1.0 })
            }),
            2
        );
        assert_eq!(exit_code(&Error::Parse { line: 1, msg: String::new() }), 3);
        assert_eq!(exit_code(&Error::Regime), 4);
        assert_eq!(exit_code(&Error::NoBracket { lo: 0.0, hi: 1.0 }), 4);
        assert_eq!(exit_code(&Error::Singular(0)), 1);
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from(["skt", "dhmp", "--n", "3", "--grid", "64"]).unwrap();
        assert_eq!(cli.command.name(), "dhmp");
        assert_eq!(cli.command.common().n, Some(3));
        assert!(Cli::try_parse_from(["skt", "solve", "--grid", "x"]).is_err());
    }
}
