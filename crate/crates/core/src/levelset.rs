//! Zero level set of `F(u, v; alpha, beta)` and the uniform a priori bound
//! certificate built from it.
//!
//! For `u > a1/b1` the map `v -> F(u, v)` is a convex quadratic that is
//! negative at `v = 0`, so it has a single positive root `V(u)`. For
//! `v > ṽ0(alpha)` the map `u -> F(u, v)` is a concave quadratic positive at
//! `u = 0`, with a single positive root `U(v)`. Above
//! `max{a1/b1, U(ṽ0)}` the two are increasing mutual inverses.

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Larger root of `a x^2 + b x + c = 0`, using the cancellation-free form.
fn larger_root(a: f64, b: f64, c: f64) -> f64 {
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return 0.0;
    }
    let r1 = q / a;
    let r2 = c / q;
    r1.max(r2)
}

fn require_rates(p: &ModelParams) -> Result<()> {
    if p.alpha > 0.0 && p.beta > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "level-set functions",
            value: p.alpha.min(p.beta),
            bound: "alpha > 0 and beta > 0".into(),
        })
    }
}

/// `V(u; alpha, beta)`: the positive root in `v` of `F(u, v) = 0`, for `u > a1/b1`.
pub fn v_of_u(p: &ModelParams, u: f64) -> Result<f64> {
    require_rates(p)?;
    let k = &p.kin;
    let threshold = k.a1 / k.b1;
    if !(u > threshold) {
        return Err(Error::Domain {
            what: "V(u)",
            value: u,
            bound: format!("u > a1/b1 = {threshold}"),
        });
    }
    let e = p.d2 + p.beta * u;
    let a = p.alpha * k.c2;
    let b = -(k.c1 * e + p.alpha * (k.a2 - k.b2 * u));
    let c = e * (k.a1 - k.b1 * u);
    Ok(larger_root(a, b, c))
}

/// Lower and upper roots `α̲ ≤ ᾱ` of the discriminant of `F(0, v)` as a polynomial
/// in `alpha`; only real when `c1/c2 < a1/a2`.
pub fn alpha_window(p: &ModelParams) -> Option<(f64, f64)> {
    let k = &p.kin;
    let excess = k.a1 * k.c2 - k.a2 * k.c1;
    if excess <= 0.0 {
        return None;
    }
    let mid = p.d2 * (2.0 * k.a1 * k.c2 - k.a2 * k.c1);
    let half = 2.0 * p.d2 * (k.a1 * k.c2 * excess).sqrt();
    let a22 = k.a2 * k.a2;
    Some(((mid - half) / a22, (mid + half) / a22))
}

/// `ṽ0(alpha)`: above it `F(0, v) > 0`.
pub fn v_tilde0(p: &ModelParams) -> f64 {
    let k = &p.kin;
    if let Some((lo, hi)) = alpha_window(p) {
        if lo < p.alpha && p.alpha < hi {
            return 0.0;
        }
    }
    let s = p.alpha * k.a2 + p.d2 * k.c1;
    let disc = (s * s - 4.0 * p.alpha * p.d2 * k.a1 * k.c2).max(0.0);
    (s + disc.sqrt()) / (2.0 * p.alpha * k.c2)
}

/// Root formula for `U(v)` without the domain check; at `v = ṽ0` it is the
/// one-sided limit used by the certificate.
fn u_formula(p: &ModelParams, v: f64) -> f64 {
    let k = &p.kin;
    let lin = (p.alpha * k.b2 - p.beta * k.c1) * v + p.beta * k.a1 - p.d2 * k.b1;
    let cst = p.alpha * k.c2 * v * v - (p.alpha * k.a2 + p.d2 * k.c1) * v + p.d2 * k.a1;
    // F(u, v) = -beta b1 u^2 + lin u + cst
    larger_root(p.beta * k.b1, -lin, -cst).max(0.0)
}

/// `U(v; alpha, beta)`: the positive root in `u` of `F(u, v) = 0`, for `v > ṽ0`.
pub fn u_of_v(p: &ModelParams, v: f64) -> Result<f64> {
    require_rates(p)?;
    let v0 = v_tilde0(p);
    if !(v > v0) {
        return Err(Error::Domain {
            what: "U(v)",
            value: v,
            bound: format!("v > ṽ0 = {v0}"),
        });
    }
    Ok(u_formula(p, v))
}

/// `true` iff `(u, v)` lies in the half-plane where `F + G < 0`.
pub fn in_sigma(p: &ModelParams, u: f64, v: f64) -> bool {
    p.sigma_affine(u, v) < 0.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundKind {
    /// Explicit sup bounds from the level-set argument (`alpha, beta > eta`).
    Explicit { u_bound: f64, v_bound: f64 },
    /// Small-rate branch: `|u| ≤ C1 (1 + alpha/d1)`, `|v| ≤ C1 (1 + beta/d2)` with an
    /// unspecified constant `C1(a_i, b_i, c_i)`; only the factors are known.
    SmallRate { u_factor: f64, v_factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCertificate {
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kind: BoundKind,
}

impl BoundCertificate {
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self.kind {
            BoundKind::Explicit { u_bound, v_bound } => Some((u_bound, v_bound)),
            BoundKind::SmallRate { .. } => None,
        }
    }

    /// Whether `max u ≤ u_bound` and `max v ≤ v_bound`; `None` for the small-rate kind.
    pub fn dominates(&self, max_u: f64, max_v: f64) -> Option<bool> {
        self.bounds().map(|(ub, vb)| max_u <= ub && max_v <= vb)
    }
}

/// `max{a1/b1, U(max{(d2a1+d1a2)/(d2b1+d1b2), ṽ0}; alpha, beta)}`.
fn u_bound(p: &ModelParams) -> f64 {
    let k = &p.kin;
    let knee = (p.d2 * k.a1 + p.d1 * k.a2) / (p.d2 * k.b1 + p.d1 * k.b2);
    let v = knee.max(v_tilde0(p));
    (k.a1 / k.b1).max(u_formula(p, v))
}

/// A priori sup bound for every steady state with `eta ≤ alpha/beta ≤ 1/eta`.
pub fn sup_bound(p: &ModelParams, eta: f64) -> Result<BoundCertificate> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParam {
            name: "eta",
            reason: format!("must lie in (0, 1], got {eta}"),
        });
    }
    let band = Error::Band {
        eta,
        alpha: p.alpha,
        beta: p.beta,
    };
    if !(p.alpha > 0.0 && p.beta > 0.0) {
        return Err(band);
    }
    let r = p.alpha / p.beta;
    if r < eta || r > 1.0 / eta {
        return Err(band);
    }
    let kind = if p.alpha <= eta || p.beta <= eta {
        BoundKind::SmallRate {
            u_factor: 1.0 + p.alpha / p.d1,
            v_factor: 1.0 + p.beta / p.d2,
        }
    } else {
        BoundKind::Explicit {
            u_bound: u_bound(p),
            v_bound: u_bound(&p.swapped()),
        }
    };
    Ok(BoundCertificate {
        eta,
        alpha: p.alpha,
        beta: p.beta,
        kind,
    })
}

/// The widest band containing the given rates: `min(alpha/beta, beta/alpha)`.
pub fn natural_eta(p: &ModelParams) -> Option<f64> {
    (p.alpha > 0.0 && p.beta > 0.0).then(|| (p.alpha / p.beta).min(p.beta / p.alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Kinetics;

    fn p0(alpha: f64, beta: f64) -> ModelParams {
        let kin = Kinetics::new(5.0, 3.0, 3.0, 1.0, 1.0, 2.0).unwrap();
        ModelParams::new(kin, 1.0, 1.0, alpha, beta).unwrap()
    }

    fn p1(alpha: f64, beta: f64) -> ModelParams {
        let kin = Kinetics::new(5.0, 3.0, 0.1, 1.0, 1.0, 0.1).unwrap();
        ModelParams::new(kin, 1.0, 0.1, alpha, beta).unwrap()
    }

    #[test]
    fn v_of_u_hand_value() {
        let v = v_of_u(&p0(2.0, 3.0), 2.0).unwrap();
        assert!((v - (9.0 + 193f64.sqrt()) / 8.0).abs() < 1e-14);
        assert!(v_of_u(&p0(2.0, 3.0), 5.0 / 3.0).is_err());
        assert!(v_of_u(&p0(0.0, 3.0), 2.0).is_err());
    }

    #[test]
    fn v_of_u_sign_pattern_near_threshold() {
        let p = p0(2.0, 3.0);
        let u = 5.0 / 3.0 + 1e-6;
        let v = v_of_u(&p, u).unwrap();
        assert!(v > 0.0);
        assert!(p.big_f(u, 0.5 * v) < 0.0);
        assert!(p.big_f(u, 2.0 * v) > 0.0);
    }

    #[test]
    fn v_tilde0_values() {
        let (lo, hi) = alpha_window(&p0(2.0, 1.0)).unwrap();
        assert!((lo - (17.0 - 2.0 * 70f64.sqrt()) / 9.0).abs() < 1e-14);
        assert!((hi - (17.0 + 2.0 * 70f64.sqrt()) / 9.0).abs() < 1e-14);
        assert!((lo - 0.0296).abs() < 1e-4 && (hi - 3.748).abs() < 1e-3);
        assert_eq!(v_tilde0(&p0(2.0, 1.0)), 0.0);
        let v = v_tilde0(&p0(10.0, 1.0));
        assert!((v - (31.0 + 561f64.sqrt()) / 40.0).abs() < 1e-14);
        // c1/c2 >= a1/a2: never zero
        let kin = Kinetics::new(1.0, 3.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let p = ModelParams::new(kin, 1.0, 1.0, 0.5, 1.0).unwrap();
        assert!(alpha_window(&p).is_none());
        assert!(v_tilde0(&p) > 0.0);
    }

    #[test]
    fn u_of_v_is_root() {
        let p = p0(10.0, 5.0);
        let u = u_of_v(&p, 2.0).unwrap();
        assert!(u > 0.0);
        assert!(p.big_f(u, 2.0).abs() < 1e-10 * (1.0 + p.big_f(0.0, 2.0).abs()));
        assert!(p.big_f(0.5 * u, 2.0) > 0.0);
        assert!(p.big_f(2.0 * u, 2.0) < 0.0);
        assert!(p.big_f(0.0, 2.0) > 0.0);
        assert!(u_of_v(&p, v_tilde0(&p)).is_err());
    }

    #[test]
    fn mutual_inverses() {
        let p = p0(10.0, 5.0);
        let lo = (p.kin.a1 / p.kin.b1).max(u_formula(&p, v_tilde0(&p)));
        for i in 1..=40 {
            let u = lo + 0.25 * i as f64;
            let v = v_of_u(&p, u).unwrap();
            let back = u_of_v(&p, v).unwrap();
            assert!((back - u).abs() < 1e-9 * u, "u={u} back={back}");
        }
    }

    #[test]
    fn monotone_u_of_v() {
        let p = p1(100.0, 100.0);
        let v0 = v_tilde0(&p);
        let mut prev = 0.0;
        for i in 1..200 {
            let v = v0 + 0.05 * i as f64;
            let u = u_of_v(&p, v).unwrap();
            if u > p.kin.a1 / p.kin.b1 {
                assert!(u > prev);
            }
            prev = u;
        }
    }

    #[test]
    fn sigma_membership() {
        let p = p0(1.0, 1.0);
        assert!(!in_sigma(&p, 0.0, 0.0));
        let k = &p.kin;
        let u = 2.0 * (p.d2 * k.a1 + p.d1 * k.a2) / (p.d2 * k.b1 + p.d1 * k.b2);
        assert!(in_sigma(&p, u, 0.0));
        let edge = (p.d2 * k.a1 + p.d1 * k.a2) / (p.d2 * k.b1 + p.d1 * k.b2);
        // 8/4 = 2 exactly: the affine form vanishes
        assert_eq!(p.sigma_affine(edge, 0.0), 0.0);
        assert!(!in_sigma(&p, edge, 0.0));
    }

    #[test]
    fn certificate_shapes() {
        let c = sup_bound(&p0(3.0, 3.0), 1.0).unwrap();
        let (ub, vb) = c.bounds().unwrap();
        assert!(ub >= 5.0 / 3.0 && vb >= 1.5);

        let c = sup_bound(&p0(0.5, 0.6), 0.8).unwrap();
        assert!(matches!(c.kind, BoundKind::SmallRate { .. }));
        assert!(c.dominates(1.0, 1.0).is_none());

        assert!(matches!(sup_bound(&p0(10.0, 1.0), 0.5), Err(Error::Band { .. })));
        assert!(sup_bound(&p0(1.0, 1.0), 0.0).is_err());
        assert!(sup_bound(&p0(0.0, 1.0), 0.5).is_err());
    }

    #[test]
    fn p1_certificate_golden() {
        let c = sup_bound(&p1(100.0, 100.0), 0.5).unwrap();
        let (ub, vb) = c.bounds().unwrap();
        assert!(ub.is_finite() && vb.is_finite());
        assert!(ub >= 50.0 && vb >= 30.0);
    }
}
