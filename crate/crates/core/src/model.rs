//! Coefficients of the stationary SKT system and the closed-form algebra built
//! on them: the Lotka-Volterra reactions `f`, `g`, the reduced reaction terms
//! `F`, `G`, the constant coexistence state and the competition regime.

use crate::error::{Error, Result};

/// Lotka-Volterra kinetics `f = u(a1 - b1 u - c1 v)`, `g = v(a2 - b2 u - c2 v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinetics {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompetitionRegime {
    Weak,
    Strong,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantState {
    pub u_star: f64,
    pub v_star: f64,
    pub tau_star: f64,
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            reason: format!("must be a positive finite number, got {x}"),
        })
    }
}

fn nonnegative(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            reason: format!("must be a nonnegative finite number, got {x}"),
        })
    }
}

impl Kinetics {
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64, c1: f64, c2: f64) -> Result<Self> {
        positive("a1", a1)?;
        positive("a2", a2)?;
        positive("b1", b1)?;
        positive("b2", b2)?;
        positive("c1", c1)?;
        positive("c2", c2)?;
        Ok(Self {
            a1,
            a2,
            b1,
            b2,
            c1,
            c2,
        })
    }

    #[inline]
    pub fn f(&self, u: f64, v: f64) -> f64 {
        u * (self.a1 - self.b1 * u - self.c1 * v)
    }

    #[inline]
    pub fn g(&self, u: f64, v: f64) -> f64 {
        v * (self.a2 - self.b2 * u - self.c2 * v)
    }

    /// Partial derivatives `[[f_u, f_v], [g_u, g_v]]`.
    #[inline]
    pub fn jacobian(&self, u: f64, v: f64) -> [[f64; 2]; 2] {
        [
            [self.a1 - 2.0 * self.b1 * u - self.c1 * v, -self.c1 * u],
            [-self.b2 * v, self.a2 - self.b2 * u - 2.0 * self.c2 * v],
        ]
    }

    /// Classifies by the strict ratio chains, compared by cross-multiplication.
    pub fn regime(&self) -> CompetitionRegime {
        // c1/c2 < a1/a2 < b1/b2
        let c_lt_a = self.c1 * self.a2 < self.a1 * self.c2;
        let a_lt_b = self.a1 * self.b2 < self.b1 * self.a2;
        // b1/b2 < a1/a2 < c1/c2
        let b_lt_a = self.b1 * self.a2 < self.a1 * self.b2;
        let a_lt_c = self.a1 * self.c2 < self.c1 * self.a2;
        if c_lt_a && a_lt_b {
            CompetitionRegime::Weak
        } else if b_lt_a && a_lt_c {
            CompetitionRegime::Strong
        } else {
            CompetitionRegime::Neither
        }
    }

    pub fn constant_state(&self) -> Result<ConstantState> {
        if self.regime() == CompetitionRegime::Neither {
            return Err(Error::Regime);
        }
        let bc = self.b2 * self.c1;
        let cb = self.b1 * self.c2;
        let det = bc - cb;
        if det.abs() < 1e-14 * bc.max(cb) {
            return Err(Error::Degenerate(det));
        }
        let u_star = (self.a2 * self.c1 - self.a1 * self.c2) / det;
        let v_star = (self.a1 * self.b2 - self.a2 * self.b1) / det;
        Ok(ConstantState {
            u_star,
            v_star,
            tau_star: u_star * v_star,
        })
    }

    /// The kinetics seen from the second species: `f <-> g` under `u <-> v`.
    pub fn swapped(&self) -> Self {
        Self {
            a1: self.a2,
            a2: self.a1,
            b1: self.c2,
            b2: self.c1,
            c1: self.b2,
            c2: self.b1,
        }
    }
}

/// All coefficients of the stationary SKT system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub kin: Kinetics,
    pub d1: f64,
    pub d2: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(kin: Kinetics, d1: f64, d2: f64, alpha: f64, beta: f64) -> Result<Self> {
        positive("d1", d1)?;
        positive("d2", d2)?;
        nonnegative("alpha", alpha)?;
        nonnegative("beta", beta)?;
        Ok(Self {
            kin,
            d1,
            d2,
            alpha,
            beta,
        })
    }

    pub fn with_rates(&self, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(self.kin, self.d1, self.d2, alpha, beta)
    }

    /// `alpha / beta`; undefined at `beta = 0`.
    pub fn gamma(&self) -> Result<f64> {
        if self.beta > 0.0 {
            Ok(self.alpha / self.beta)
        } else {
            Err(Error::InvalidParam {
                name: "beta",
                reason: "gamma = alpha/beta is undefined at beta = 0".into(),
            })
        }
    }

    #[inline]
    pub fn reaction_f(&self, u: f64, v: f64) -> f64 {
        self.kin.f(u, v)
    }

    #[inline]
    pub fn reaction_g(&self, u: f64, v: f64) -> f64 {
        self.kin.g(u, v)
    }

    /// `F = (d2 + beta u)(a1 - b1 u - c1 v) - alpha v (a2 - b2 u - c2 v)`.
    pub fn big_f(&self, u: f64, v: f64) -> f64 {
        let k = &self.kin;
        (self.d2 + self.beta * u) * (k.a1 - k.b1 * u - k.c1 * v)
            - self.alpha * v * (k.a2 - k.b2 * u - k.c2 * v)
    }

    /// `G = -beta u (a1 - b1 u - c1 v) + (d1 + alpha v)(a2 - b2 u - c2 v)`.
    pub fn big_g(&self, u: f64, v: f64) -> f64 {
        let k = &self.kin;
        -self.beta * u * (k.a1 - k.b1 * u - k.c1 * v)
            + (self.d1 + self.alpha * v) * (k.a2 - k.b2 * u - k.c2 * v)
    }

    /// The rate-independent affine function equal to `F + G`; negative exactly on Σ.
    pub fn sigma_affine(&self, u: f64, v: f64) -> f64 {
        let k = &self.kin;
        self.d2 * k.a1 + self.d1 * k.a2
            - (self.d2 * k.b1 + self.d1 * k.b2) * u
            - (self.d2 * k.c1 + self.d1 * k.c2) * v
    }

    pub fn regime(&self) -> CompetitionRegime {
        self.kin.regime()
    }

    pub fn constant_state(&self) -> Result<ConstantState> {
        self.kin.constant_state()
    }

    /// Exchanges the roles of the two species (and of the two equations).
    pub fn swapped(&self) -> Self {
        Self {
            kin: self.kin.swapped(),
            d1: self.d2,
            d2: self.d1,
            alpha: self.beta,
            beta: self.alpha,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p0() -> ModelParams {
        let kin = Kinetics::new(5.0, 3.0, 3.0, 1.0, 1.0, 2.0).unwrap();
        ModelParams::new(kin, 1.0, 1.0, 2.0, 3.0).unwrap()
    }

    fn p1_kin() -> Kinetics {
        Kinetics::new(5.0, 3.0, 0.1, 1.0, 1.0, 0.1).unwrap()
    }

    #[test]
    fn reaction_values() {
        let p = p0();
        assert_eq!(p.reaction_f(0.0, 7.0), 0.0);
        assert!(p.reaction_f(1.4, 0.8).abs() < 1e-14);
        assert_eq!(p.reaction_f(1.0, 1.0), 1.0);
        assert_eq!(p.reaction_g(3.0, 0.0), 0.0);
        assert!(p.reaction_g(1.4, 0.8).abs() < 1e-14);
        assert_eq!(p.reaction_g(1.0, 1.0), 0.0);
    }

    #[test]
    fn reduced_terms() {
        let p = p0();
        assert_eq!(p.big_f(1.0, 1.0), 4.0);
        assert_eq!(p.big_g(1.0, 1.0), -3.0);
        assert_eq!(p.big_f(1.0, 1.0) + p.big_g(1.0, 1.0), p.sigma_affine(1.0, 1.0));
        assert_eq!(p.big_f(p.kin.a1 / p.kin.b1, 0.0), 0.0);
        let cs = p.constant_state().unwrap();
        assert!(p.big_g(cs.u_star, cs.v_star).abs() < 1e-14);
    }

    #[test]
    fn constant_states() {
        let cs = p0().constant_state().unwrap();
        assert!((cs.u_star - 1.4).abs() < 1e-14);
        assert!((cs.v_star - 0.8).abs() < 1e-14);
        assert!((cs.tau_star - 1.12).abs() < 1e-14);

        let cs = p1_kin().constant_state().unwrap();
        assert!((cs.u_star - 2.5 / 0.99).abs() < 1e-13);
        assert!((cs.v_star - 4.7 / 0.99).abs() < 1e-13);
        assert!((cs.tau_star - 11.989).abs() < 1e-3);
        assert_eq!(cs.tau_star, cs.u_star * cs.v_star);

        let sym = Kinetics::new(2.0, 2.0, 3.0, 1.0, 1.0, 3.0).unwrap();
        let cs = sym.constant_state().unwrap();
        assert!((cs.u_star - cs.v_star).abs() < 1e-15);
    }

    #[test]
    fn regimes() {
        assert_eq!(p0().regime(), CompetitionRegime::Weak);
        assert_eq!(p1_kin().regime(), CompetitionRegime::Strong);
        // a1/a2 = b1/b2
        let tie = Kinetics::new(2.0, 1.0, 2.0, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(tie.regime(), CompetitionRegime::Neither);
        assert_eq!(tie.constant_state(), Err(Error::Regime));
    }

    #[test]
    fn degenerate_kinetics() {
        // b2 c1 = b1 c2 but the ratio chains are not met either way
        let k = Kinetics::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(k.constant_state().is_err());
    }

    #[test]
    fn gamma_needs_beta() {
        let p = p0();
        assert_eq!(p.gamma().unwrap(), 2.0 / 3.0);
        assert!(p.with_rates(1.0, 0.0).unwrap().gamma().is_err());
        assert!(ModelParams::new(p.kin, -1.0, 1.0, 0.0, 0.0).is_err());
        assert!(Kinetics::new(0.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn swap_exchanges_equations() {
        let p = p0();
        let q = p.swapped();
        for &(u, v) in &[(0.3, 1.7), (2.0, 0.1), (1.0, 1.0)] {
            assert!((q.reaction_f(v, u) - p.reaction_g(u, v)).abs() < 1e-14);
            assert!((q.big_f(v, u) - p.big_g(u, v)).abs() < 1e-12);
        }
        assert_eq!(q.swapped(), p);
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (
            prop::array::uniform6(0.05f64..10.0),
            0.01f64..5.0,
            0.01f64..5.0,
            0.0f64..1e3,
            0.0f64..1e3,
        )
            .prop_map(|(k, d1, d2, al, be)| {
                let kin = Kinetics::new(k[0], k[1], k[2], k[3], k[4], k[5]).unwrap();
                ModelParams::new(kin, d1, d2, al, be).unwrap()
            })
    }

    proptest! {
        #[test]
        fn f_plus_g_is_affine(p in arb_params(), u in 0.0f64..50.0, v in 0.0f64..50.0) {
            let lhs = p.big_f(u, v) + p.big_g(u, v);
            let rhs = p.sigma_affine(u, v);
            let scale = 1.0 + p.big_f(u, v).abs() + p.big_g(u, v).abs();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * scale);
        }

        #[test]
        fn regime_scale_invariant(p in arb_params(), s1 in 0.1f64..10.0, s2 in 0.1f64..10.0) {
            let k = p.kin;
            let scaled = Kinetics::new(s1 * k.a1, s2 * k.a2, s1 * k.b1, s2 * k.b2, s1 * k.c1, s2 * k.c2).unwrap();
            // cross-multiplication of rescaled ratios can round differently on exact ties only
            let r = k.regime();
            let rs = scaled.regime();
            if r != rs {
                let tie = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
                prop_assert!(tie(k.a1 * k.b2, k.b1 * k.a2) || tie(k.a1 * k.c2, k.c1 * k.a2));
            }
        }

        #[test]
        fn constant_state_is_kinetic_root(p in arb_params()) {
            if let Ok(cs) = p.constant_state() {
                prop_assert!(cs.u_star > 0.0 && cs.v_star > 0.0);
                let scale = p.kin.a1 * cs.u_star + p.kin.a2 * cs.v_star;
                prop_assert!(p.reaction_f(cs.u_star, cs.v_star).abs() <= 1e-10 * scale);
                prop_assert!(p.reaction_g(cs.u_star, cs.v_star).abs() <= 1e-10 * scale);
            }
        }
    }
}
