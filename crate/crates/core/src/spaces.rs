//! Choquet `L_{p,mu}` norms and the Hölder and Minkowski checks.
//!
//! `|f|^p` and `|f g|` are integrated as exact monotone-piece integrands, so
//! the norms carry only the quadrature error of the engine.

use serde::Serialize;

use crate::capacities::Capacity;
use crate::choquet::{choquet_integral_of, QuadratureConfig};
use crate::error::{Error, Result};
use crate::functions::{Function, Integrand};
use crate::intervals::IntervalUnion;

/// Exponent `p >= 1` with its conjugate `q` (`None` for `q = inf`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpConfig {
    p: f64,
    q: Option<f64>,
}

impl LpConfig {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::domain(format!(
                "exponent p must be finite and >= 1, got {p}"
            )));
        }
        let q = if p == 1.0 { None } else { Some(p / (p - 1.0)) };
        Ok(LpConfig { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> Option<f64> {
        self.q
    }

    /// `1 / q`, zero for `q = inf`.
    pub fn inv_q(&self) -> f64 {
        self.q.map_or(0.0, |q| 1.0 / q)
    }
}

/// `((C)∫ |f|^p dmu)^(1/p)` over `[0, 1]`.
pub fn lp_norm(f: &Function, cfg: &LpConfig, mu: &Capacity) -> Result<f64> {
    lp_norm_with(f, cfg, mu, &QuadratureConfig::default())
}

pub fn lp_norm_with(
    f: &Function,
    cfg: &LpConfig,
    mu: &Capacity,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let intg = Integrand::abs_power(f, cfg.p)?;
    let r = choquet_integral_of(&intg, &IntervalUnion::full(), mu, quad)?;
    Ok(r.value.max(0.0).powf(1.0 / cfg.p))
}

/// `max |f|`.
pub fn uniform_norm(f: &Function) -> f64 {
    f.uniform_norm()
}

/// `(C)∫ |f g| dmu` over `[0, 1]`.
pub fn abs_product_integral(f: &Function, g: &Function, mu: &Capacity) -> Result<f64> {
    let intg = Integrand::abs_product(f, g);
    Ok(choquet_integral_of(
        &intg,
        &IntervalUnion::full(),
        mu,
        &QuadratureConfig::default(),
    )?
    .value)
}

/// `||f||_p ||g||_q - (C)∫ |f g| dmu`, with `||g||_inf` when `p = 1`.
pub fn holder_margin(f: &Function, g: &Function, cfg: &LpConfig, mu: &Capacity) -> Result<f64> {
    if !mu.claims_submodular() {
        return Err(Error::precondition(format!(
            "Hölder inequality needs a submodular capacity, {} is not",
            mu.name()
        )));
    }
    let nf = lp_norm(f, cfg, mu)?;
    let ng = match cfg.q {
        Some(q) => lp_norm(g, &LpConfig::new(q)?, mu)?,
        None => uniform_norm(g),
    };
    Ok(nf * ng - abs_product_integral(f, g, mu)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacities::DistortionFunction;
    use crate::functions::PiecewiseLinear;

    fn exp_mu() -> Capacity {
        Capacity::distorted(DistortionFunction::ExpSaturation)
    }

    #[test]
    fn conjugates() {
        let c = LpConfig::new(3.0).unwrap();
        assert!((1.0 / c.p() + 1.0 / c.q().unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(LpConfig::new(1.0).unwrap().q(), None);
        assert!(LpConfig::new(0.5).is_err());
    }

    #[test]
    fn norm_examples() {
        let one = Function::Pwl(PiecewiseLinear::constant(1.0));
        let total = 1.0 - (-1.0f64).exp();
        for p in [1.0, 2.0, 3.5] {
            let n = lp_norm(&one, &LpConfig::new(p).unwrap(), &exp_mu()).unwrap();
            assert!((n - total.powf(1.0 / p)).abs() < 1e-12);
        }
        let zero = Function::Pwl(PiecewiseLinear::constant(0.0));
        assert_eq!(
            lp_norm(&zero, &LpConfig::new(2.0).unwrap(), &exp_mu()).unwrap(),
            0.0
        );
        let ramp = Function::Pwl(PiecewiseLinear::identity());
        let n = lp_norm(&ramp, &LpConfig::new(2.0).unwrap(), &Capacity::lebesgue()).unwrap();
        assert!((n - (1.0f64 / 3.0).sqrt()).abs() < 1e-9, "{n}");
    }

    #[test]
    fn uniform_norm_examples() {
        let f = Function::Pwl(PiecewiseLinear::identity()).shift(-0.5);
        assert_eq!(uniform_norm(&f), 0.5);
        let g =
            Function::Pwl(PiecewiseLinear::new(vec![0.0, 0.5, 1.0], vec![0.0, -2.0, 1.0]).unwrap());
        assert_eq!(uniform_norm(&g), 2.0);
    }

    #[test]
    fn holder_examples() {
        let f =
            Function::Pwl(PiecewiseLinear::new(vec![0.0, 0.3, 1.0], vec![0.2, -0.9, 0.5]).unwrap());
        let one = Function::Pwl(PiecewiseLinear::constant(1.0));
        let cfg = LpConfig::new(2.0).unwrap();
        let mu = exp_mu();
        let m = holder_margin(&f, &one, &cfg, &mu).unwrap();
        assert!(m >= -1e-12);
        let zero = Function::Pwl(PiecewiseLinear::constant(0.0));
        assert_eq!(holder_margin(&zero, &zero, &cfg, &mu).unwrap(), 0.0);
        let ramp = Function::Pwl(PiecewiseLinear::identity());
        let cs = holder_margin(&ramp, &ramp, &cfg, &Capacity::lebesgue()).unwrap();
        assert!(cs.abs() < 1e-12);
    }

    #[test]
    fn holder_rejects_convex_distortion() {
        let one = Function::Pwl(PiecewiseLinear::constant(1.0));
        let mu = Capacity::distorted(DistortionFunction::square());
        assert!(matches!(
            holder_margin(&one, &one, &LpConfig::new(2.0).unwrap(), &mu),
            Err(Error::Precondition(_))
        ));
    }
}
