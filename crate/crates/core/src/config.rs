//! Flat `section.key = value` experiment configuration.
//!
//! Missing keys take the defaults below (strong-competition parameters,
//! 256 cells on the unit interval, seed 42). Unknown keys are rejected.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::limit::LimitParams;
use crate::model::{Kinetics, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n_cells: usize,
    pub length: f64,
    pub seed: u64,
    pub solve_tol: f64,
    pub solve_max_iter: usize,
    /// Relative amplitude of the seeded random cosine perturbation.
    pub solve_perturb: f64,
    pub bounds_eta: f64,
    /// `(alpha, beta)` pairs; `None` means `(gamma r, r)` for `r = 10, ..., 10^4`.
    pub study_schedule: Option<Vec<(f64, f64)>>,
    /// Descending `beta` values used to bring the patterned seed down.
    pub study_ladder: Vec<f64>,
    pub study_eta: f64,
    /// Grid length for the patterned seed; longer intervals put the first
    /// mode's threshold above `d1`.
    pub study_length: f64,
    pub limit_tol: f64,
    pub limit_max_iter: usize,
    pub limit_mode: usize,
    pub limit_amplitude: f64,
    pub cs_eps: f64,
    pub bifurcate_ds: f64,
    pub bifurcate_s_max: f64,
    pub dhmp_n: usize,
    pub dhmp_variant: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            a1: 5.0,
            a2: 3.0,
            b1: 0.1,
            b2: 1.0,
            c1: 1.0,
            c2: 0.1,
            d1: 1.0,
            d2: 0.1,
            alpha: 100.0,
            beta: 100.0,
            gamma: 1.0,
            n_cells: 256,
            length: 1.0,
            seed: 42,
            solve_tol: 1e-10,
            solve_max_iter: 60,
            solve_perturb: 0.1,
            bounds_eta: 0.5,
            study_schedule: None,
            study_ladder: crate::study::SEED_LADDER.to_vec(),
            study_eta: 0.5,
            study_length: 2.0,
            limit_tol: 1e-10,
            limit_max_iter: 60,
            limit_mode: 1,
            limit_amplitude: 2.0,
            cs_eps: 0.0,
            bifurcate_ds: 0.01,
            bifurcate_s_max: 1.0,
            dhmp_n: 1,
            dhmp_variant: "fg".into(),
        }
    }
}

/// Every accepted key, in the order written by [`ExperimentConfig::to_text`].
pub const KEYS: &[&str] = &[
    "model.a1",
    "model.a2",
    "model.b1",
    "model.b2",
    "model.c1",
    "model.c2",
    "model.d1",
    "model.d2",
    "model.alpha",
    "model.beta",
    "model.gamma",
    "grid.n_cells",
    "grid.length",
    "seed",
    "solve.tol",
    "solve.max_iter",
    "solve.perturb",
    "bounds.eta",
    "study.schedule",
    "study.ladder",
    "study.eta",
    "study.length",
    "limit.tol",
    "limit.max_iter",
    "limit.mode",
    "limit.amplitude",
    "cs.eps",
    "bifurcate.ds",
    "bifurcate.s_max",
    "dhmp.n",
    "dhmp.variant",
];

fn bad(key: &str, msg: impl Into<String>) -> Error {
    Error::Validation {
        key: key.into(),
        msg: msg.into(),
    }
}

fn real(key: &str, s: &str) -> Result<f64> {
    let x: f64 = s.parse().map_err(|_| bad(key, format!("`{s}` is not a number")))?;
    if !x.is_finite() {
        return Err(bad(key, "must be finite"));
    }
    Ok(x)
}

fn positive(key: &str, s: &str) -> Result<f64> {
    let x = real(key, s)?;
    if x <= 0.0 {
        return Err(bad(key, format!("must be positive, got {x}")));
    }
    Ok(x)
}

fn count(key: &str, s: &str, min: usize) -> Result<usize> {
    let n: usize = s.parse().map_err(|_| bad(key, format!("`{s}` is not a whole number")))?;
    if n < min {
        return Err(bad(key, format!("must be at least {min}")));
    }
    Ok(n)
}

fn list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| positive(key, t.trim())).collect()
}

/// `a:b` entries, or a bare `r` meaning `(gamma r, r)`.
fn schedule(key: &str, s: &str, gamma: f64) -> Result<Vec<(f64, f64)>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t.split_once(':') {
                Some((a, b)) => Ok((positive(key, a.trim())?, positive(key, b.trim())?)),
                None => {
                    let r = positive(key, t)?;
                    Ok((gamma * r, r))
                }
            }
        })
        .collect()
}

impl ExperimentConfig {
    /// Parses `text`; see the module docs for the format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(Error::Parse {
                line: lineno,
                msg: "expected `key = value`".into(),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unknown key `{k}`"),
                });
            }
            if v.is_empty() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("empty value for `{k}`"),
                });
            }
            if raw.insert(k, (lineno, v)).is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("duplicate key `{k}`"),
                });
            }
        }
        let mut c = Self::default();
        // gamma first: bare schedule entries depend on it
        if let Some(&(_, v)) = raw.get("model.gamma") {
            c.gamma = positive("model.gamma", v)?;
        }
        for (&k, &(_, v)) in &raw {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "model.a1" => self.a1 = positive(key, v)?,
            "model.a2" => self.a2 = positive(key, v)?,
            "model.b1" => self.b1 = positive(key, v)?,
            "model.b2" => self.b2 = positive(key, v)?,
            "model.c1" => self.c1 = positive(key, v)?,
            "model.c2" => self.c2 = positive(key, v)?,
            "model.d1" => self.d1 = positive(key, v)?,
            "model.d2" => self.d2 = positive(key, v)?,
            "model.alpha" => {
                self.alpha = real(key, v)?;
                if self.alpha < 0.0 {
                    return Err(bad(key, "must be nonnegative"));
                }
            }
            "model.beta" => {
                self.beta = real(key, v)?;
                if self.beta < 0.0 {
                    return Err(bad(key, "must be nonnegative"));
                }
            }
            "model.gamma" => self.gamma = positive(key, v)?,
            "grid.n_cells" => self.n_cells = count(key, v, 4)?,
            "grid.length" => self.length = positive(key, v)?,
            "seed" => self.seed = v.parse().map_err(|_| bad(key, format!("`{v}` is not a u64")))?,
            "solve.tol" => self.solve_tol = positive(key, v)?,
            "solve.max_iter" => self.solve_max_iter = count(key, v, 1)?,
            "solve.perturb" => {
                self.solve_perturb = real(key, v)?;
                if !(0.0..1.0).contains(&self.solve_perturb) {
                    return Err(bad(key, "must lie in [0, 1)"));
                }
            }
            "bounds.eta" => self.bounds_eta = positive(key, v)?,
            "study.schedule" => self.study_schedule = Some(schedule(key, v, self.gamma)?),
            "study.ladder" => self.study_ladder = list(key, v)?,
            "study.eta" => self.study_eta = positive(key, v)?,
            "study.length" => self.study_length = positive(key, v)?,
            "limit.tol" => self.limit_tol = positive(key, v)?,
            "limit.max_iter" => self.limit_max_iter = count(key, v, 1)?,
            "limit.mode" => self.limit_mode = count(key, v, 1)?,
            "limit.amplitude" => self.limit_amplitude = real(key, v)?,
            "cs.eps" => {
                self.cs_eps = real(key, v)?;
                if self.cs_eps < 0.0 {
                    return Err(bad(key, "must be nonnegative"));
                }
            }
            "bifurcate.ds" => self.bifurcate_ds = positive(key, v)?,
            "bifurcate.s_max" => self.bifurcate_s_max = positive(key, v)?,
            "dhmp.n" => self.dhmp_n = count(key, v, 1)?,
            "dhmp.variant" => {
                if v != "fg" && v != "gf" {
                    return Err(bad(key, "must be `fg` or `gf`"));
                }
                self.dhmp_variant = v.into();
            }
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    /// Cross-key checks.
    pub fn validate(&self) -> Result<()> {
        for (k, x) in [("bounds.eta", self.bounds_eta), ("study.eta", self.study_eta)] {
            if x > 1.0 {
                return Err(bad(k, "must lie in (0, 1]"));
            }
        }
        if self.study_ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(bad("study.ladder", "must decrease strictly"));
        }
        Ok(())
    }

    /// The rate schedule for `limit-study`.
    pub fn schedule(&self) -> Vec<(f64, f64)> {
        self.study_schedule
            .clone()
            .unwrap_or_else(|| [10.0, 1e2, 1e3, 1e4].iter().map(|&r| (self.gamma * r, r)).collect())
    }

    pub fn kinetics(&self) -> Result<Kinetics> {
        Kinetics::new(self.a1, self.a2, self.b1, self.b2, self.c1, self.c2)
    }

    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::new(self.kinetics()?, self.d1, self.d2, self.alpha, self.beta)
    }

    pub fn limit(&self) -> Result<LimitParams> {
        LimitParams::new(self.kinetics()?, self.d1, self.d2, self.gamma)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_cells, self.length)
    }

    /// Canonical text form; parsing it yields `self`.
    pub fn to_text(&self) -> String {
        let f = |x: f64| format!("{x:e}");
        // an implicit schedule stays implicit so it keeps following gamma
        let sched = self.study_schedule.as_ref().map_or(String::new(), |s| {
            s.iter()
                .map(|&(a, b)| format!("{a:e}:{b:e}"))
                .collect::<Vec<_>>()
                .join(",")
        });
        let ladder = self.study_ladder.iter().map(|&x| f(x)).collect::<Vec<_>>().join(",");
        let vals = [
            f(self.a1),
            f(self.a2),
            f(self.b1),
            f(self.b2),
            f(self.c1),
            f(self.c2),
            f(self.d1),
            f(self.d2),
            f(self.alpha),
            f(self.beta),
            f(self.gamma),
            self.n_cells.to_string(),
            f(self.length),
            self.seed.to_string(),
            f(self.solve_tol),
            self.solve_max_iter.to_string(),
            f(self.solve_perturb),
            f(self.bounds_eta),
            sched,
            ladder,
            f(self.study_eta),
            f(self.study_length),
            f(self.limit_tol),
            self.limit_max_iter.to_string(),
            self.limit_mode.to_string(),
            f(self.limit_amplitude),
            f(self.cs_eps),
            f(self.bifurcate_ds),
            f(self.bifurcate_s_max),
            self.dhmp_n.to_string(),
            self.dhmp_variant.clone(),
        ];
        KEYS.iter()
            .zip(vals)
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
