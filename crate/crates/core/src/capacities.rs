//! Capacities on interval unions: distorted Lebesgue measures `gamma(m(A))`,
//! user-supplied set functions, and a randomized checker for the capacity laws.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::derive_seed;
use crate::intervals::IntervalUnion;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type SetFn = Arc<dyn Fn(&IntervalUnion) -> f64 + Send + Sync>;

/// A user-defined distortion.
#[derive(Clone)]
pub struct CustomDistortion {
    name: String,
    value: RealFn,
    derivative: Option<RealFn>,
    concave: bool,
}

/// Distortion `gamma: [0, 1] -> [0, inf)` with `gamma(0) = 0`, nondecreasing.
#[derive(Clone)]
pub enum DistortionFunction {
    Identity,
    /// `t^p`, `0 < p < 1`.
    Power(f64),
    /// `2t / (1 + t)`.
    Moebius,
    /// `1 - e^{-t}`.
    ExpSaturation,
    /// `ln(1 + t)`.
    Log,
    /// `sin(t / 2)`.
    Sine,
    Custom(CustomDistortion),
}

impl DistortionFunction {
    pub fn power(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(DistortionFunction::Power(p))
        } else {
            Err(Error::domain(format!(
                "power distortion needs 0 < p < 1, got {p}"
            )))
        }
    }

    /// A custom distortion; `value(0)` must be `0`.
    pub fn custom(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: Option<RealFn>,
        concave: bool,
    ) -> Result<Self> {
        let name = name.into();
        let at_zero = value(0.0);
        if at_zero.abs() > 1e-15 {
            return Err(Error::domain(format!(
                "distortion {name} has gamma(0) = {at_zero}, expected 0"
            )));
        }
        Ok(DistortionFunction::Custom(CustomDistortion {
            name,
            value: Arc::new(value),
            derivative,
            concave,
        }))
    }

    /// The convex distortion `t^2`. It is not submodular and serves as a
    /// negative control for the law checks.
    pub fn square() -> Self {
        Self::custom("square", |t| t * t, Some(Arc::new(|t| 2.0 * t)), false)
            .expect("square vanishes at 0")
    }

    /// The built-in concave distortions.
    pub fn catalog() -> Vec<DistortionFunction> {
        vec![
            DistortionFunction::Identity,
            DistortionFunction::Power(0.5),
            DistortionFunction::Moebius,
            DistortionFunction::ExpSaturation,
            DistortionFunction::Log,
            DistortionFunction::Sine,
        ]
    }

    pub fn name(&self) -> String {
        match self {
            DistortionFunction::Identity => "identity".into(),
            DistortionFunction::Power(p) => format!("power:{p}"),
            DistortionFunction::Moebius => "moebius".into(),
            DistortionFunction::ExpSaturation => "exp-saturation".into(),
            DistortionFunction::Log => "log".into(),
            DistortionFunction::Sine => "sine".into(),
            DistortionFunction::Custom(c) => c.name.clone(),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            DistortionFunction::Identity => t,
            DistortionFunction::Power(p) => t.powf(*p),
            DistortionFunction::Moebius => 2.0 * t / (1.0 + t),
            DistortionFunction::ExpSaturation => -(-t).exp_m1(),
            DistortionFunction::Log => t.ln_1p(),
            DistortionFunction::Sine => (0.5 * t).sin(),
            DistortionFunction::Custom(c) => (c.value)(t),
        }
    }

    /// `gamma'(t)`; `None` for a custom distortion given without derivative.
    /// For `t^p` the value at `0` is `+inf`.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        Some(match self {
            DistortionFunction::Identity => 1.0,
            DistortionFunction::Power(p) => p * t.powf(p - 1.0),
            DistortionFunction::Moebius => 2.0 / ((1.0 + t) * (1.0 + t)),
            DistortionFunction::ExpSaturation => (-t).exp(),
            DistortionFunction::Log => 1.0 / (1.0 + t),
            DistortionFunction::Sine => 0.5 * (0.5 * t).cos(),
            DistortionFunction::Custom(c) => return c.derivative.as_ref().map(|d| d(t)),
        })
    }

    pub fn has_derivative(&self) -> bool {
        !matches!(self, DistortionFunction::Custom(c) if c.derivative.is_none())
    }

    /// Exponent `p` when `gamma'` blows up like `t^(p-1)` at `0`.
    pub fn endpoint_exponent(&self) -> Option<f64> {
        match self {
            DistortionFunction::Power(p) => Some(*p),
            _ => None,
        }
    }

    pub fn is_concave(&self) -> bool {
        match self {
            DistortionFunction::Custom(c) => c.concave,
            _ => true,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, DistortionFunction::Identity)
    }
}

impl fmt::Debug for DistortionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DistortionFunction({})", self.name())
    }
}

/// A set function given by a closure.
#[derive(Clone)]
pub struct GeneralCapacity {
    name: String,
    set_fn: SetFn,
    claims_submodular: bool,
    claims_continuous: bool,
}

#[derive(Clone)]
pub enum Capacity {
    Distorted(DistortionFunction),
    General(GeneralCapacity),
}

impl Capacity {
    pub fn distorted(gamma: DistortionFunction) -> Self {
        Capacity::Distorted(gamma)
    }

    pub fn lebesgue() -> Self {
        Capacity::Distorted(DistortionFunction::Identity)
    }

    pub fn general(
        name: impl Into<String>,
        set_fn: impl Fn(&IntervalUnion) -> f64 + Send + Sync + 'static,
        claims_submodular: bool,
        claims_continuous: bool,
    ) -> Self {
        Capacity::General(GeneralCapacity {
            name: name.into(),
            set_fn: Arc::new(set_fn),
            claims_submodular,
            claims_continuous,
        })
    }

    pub fn name(&self) -> String {
        match self {
            Capacity::Distorted(g) => g.name(),
            Capacity::General(c) => c.name.clone(),
        }
    }

    pub fn distortion(&self) -> Option<&DistortionFunction> {
        match self {
            Capacity::Distorted(g) => Some(g),
            Capacity::General(_) => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Capacity::Distorted(g) if g.is_identity())
    }

    pub fn claims_submodular(&self) -> bool {
        match self {
            Capacity::Distorted(g) => g.is_concave(),
            Capacity::General(c) => c.claims_submodular,
        }
    }

    pub fn claims_continuous(&self) -> bool {
        match self {
            Capacity::Distorted(_) => true,
            Capacity::General(c) => c.claims_continuous,
        }
    }

    /// `mu(u)`. A general capacity returning a negative or non-finite value,
    /// or a nonzero value on the empty set, is a contract violation.
    pub fn measure(&self, u: &IntervalUnion) -> Result<f64> {
        match self {
            Capacity::Distorted(g) => Ok(if u.is_empty() {
                0.0
            } else {
                g.value(u.length().clamp(0.0, 1.0))
            }),
            Capacity::General(c) => {
                let v = (c.set_fn)(u);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Contract(format!(
                        "capacity {} returned {v} on {:?}",
                        c.name,
                        u.parts()
                    )));
                }
                if u.is_empty() && v != 0.0 {
                    return Err(Error::Contract(format!(
                        "capacity {} is {v} on the empty set",
                        c.name
                    )));
                }
                Ok(v)
            }
        }
    }

    /// `mu(u)` for a set built by the engine itself.
    pub(crate) fn measure_length(&self, length: f64) -> f64 {
        match self {
            Capacity::Distorted(g) => g.value(length.clamp(0.0, 1.0)),
            Capacity::General(_) => {
                unreachable!("only distorted capacities depend on length alone")
            }
        }
    }

    /// `mu([0, 1])`.
    pub fn total(&self) -> Result<f64> {
        self.measure(&IntervalUnion::full())
    }
}

impl fmt::Debug for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Capacity({})", self.name())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CapacitySpecJson {
    distortion: String,
    #[serde(default)]
    p: Option<f64>,
}

/// Distortion by name: `identity`, `power` (with `p`), `moebius`,
/// `exp-saturation`, `log`, `sine`, `square`.
pub fn distortion_by_name(name: &str, p: Option<f64>) -> Result<DistortionFunction> {
    let name = name.trim();
    if let Some(rest) = name.strip_prefix("power:") {
        let p: f64 = rest
            .trim()
            .parse()
            .map_err(|_| Error::Spec(format!("bad exponent in {name:?}")))?;
        return DistortionFunction::power(p);
    }
    Ok(match name {
        "identity" | "lebesgue" => DistortionFunction::Identity,
        "power" => {
            let p = p.ok_or_else(|| Error::Spec("power distortion needs \"p\"".into()))?;
            DistortionFunction::power(p)?
        }
        "moebius" => DistortionFunction::Moebius,
        "exp-saturation" => DistortionFunction::ExpSaturation,
        "log" => DistortionFunction::Log,
        "sine" => DistortionFunction::Sine,
        "square" | "t^2" | "t²" | "γ=t²" | "gamma=t^2" => DistortionFunction::square(),
        other => return Err(Error::Spec(format!("unknown distortion {other:?}"))),
    })
}

/// Parses `{"distortion": "exp-saturation"}`, `{"distortion": "power", "p": 0.5}`
/// or a bare name such as `exp-saturation` or `power:0.5`.
pub fn parse_capacity_spec(text: &str) -> Result<Capacity> {
    let text = text.trim();
    if text.starts_with('{') {
        let spec: CapacitySpecJson = serde_json::from_str(text).map_err(|e| {
            Error::Spec(format!(
                "capacity spec at line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })?;
        return Ok(Capacity::Distorted(distortion_by_name(
            &spec.distortion,
            spec.p,
        )?));
    }
    Ok(Capacity::Distorted(distortion_by_name(text, None)?))
}

/// Margin below which a law check counts as violated.
pub const LAW_TOLERANCE: f64 = 1e-12;
/// Required closeness at the end of a continuity chain.
pub const CONTINUITY_TOLERANCE: f64 = 1e-9;
/// Number of gap-halving steps in a continuity chain.
pub const CONTINUITY_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    Monotonicity,
    Submodularity,
    Subadditivity,
    ContinuityFromBelow,
    ContinuityFromAbove,
}

#[derive(Debug, Clone, Serialize)]
pub struct LawViolation {
    pub index: usize,
    pub law: Law,
    pub a: IntervalUnion,
    pub b: IntervalUnion,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LawReport {
    pub samples: usize,
    pub violations: Vec<LawViolation>,
    /// Smallest margin seen per law.
    pub worst_monotonicity: f64,
    pub worst_submodularity: f64,
    pub worst_subadditivity: f64,
    pub worst_continuity: f64,
    /// Largest `|mu(A) + mu(B) - mu(A u B) - mu(A n B)|`; zero for additive measures.
    pub max_modularity_gap: f64,
}

impl LawReport {
    pub fn count(&self, law: Law) -> usize {
        self.violations.iter().filter(|v| v.law == law).count()
    }
}

/// Random union of one to three parts; occasionally empty or with a
/// degenerate part.
pub(crate) fn random_union(rng: &mut impl Rng) -> IntervalUnion {
    let roll: f64 = rng.gen();
    if roll < 0.05 {
        return IntervalUnion::empty();
    }
    let k = rng.gen_range(1..=3);
    let mut pts: Vec<f64> = (0..2 * k).map(|_| rng.gen()).collect();
    pts.sort_by(f64::total_cmp);
    let mut parts: Vec<(f64, f64)> = pts.chunks(2).map(|c| (c[0], c[1])).collect();
    if roll > 0.95 {
        let x = parts[0].0;
        parts[0] = (x, x);
    }
    IntervalUnion::from_valid_parts(parts)
}

fn shrink(u: &IntervalUnion, gap: f64) -> IntervalUnion {
    let parts = u
        .parts()
        .iter()
        .filter(|(lo, hi)| hi - lo > 2.0 * gap)
        .map(|&(lo, hi)| (lo + gap, hi - gap))
        .collect();
    IntervalUnion::from_valid_parts(parts)
}

fn expand(u: &IntervalUnion, gap: f64) -> IntervalUnion {
    let parts = u
        .parts()
        .iter()
        .map(|&(lo, hi)| ((lo - gap).max(0.0), (hi + gap).min(1.0)))
        .collect();
    IntervalUnion::from_valid_parts(parts)
}

/// Final gap of the chain `mu(A_k) -> mu(A)`, or a negative margin when the
/// chain is not monotone.
fn chain_margin(
    mu: &Capacity,
    a: &IntervalUnion,
    target: f64,
    step: impl Fn(&IntervalUnion, f64) -> IntervalUnion,
    increasing: bool,
) -> Result<f64> {
    let mut gap = 0.05;
    let mut prev = None;
    let mut worst_order = f64::INFINITY;
    let mut last = 0.0;
    for _ in 0..CONTINUITY_STEPS {
        let v = mu.measure(&step(a, gap))?;
        if let Some(p) = prev {
            let order = if increasing { v - p } else { p - v };
            worst_order = worst_order.min(order);
        }
        prev = Some(v);
        last = v;
        gap *= 0.5;
    }
    let closeness = CONTINUITY_TOLERANCE - (last - target).abs();
    Ok(closeness.min(worst_order + LAW_TOLERANCE))
}

/// Samples random pairs `(A, B)` and checks monotonicity, submodularity,
/// finite subadditivity and continuity from below and above.
pub fn check_capacity_laws(mu: &Capacity, seed: u64, n_samples: usize) -> Result<LawReport> {
    if n_samples == 0 {
        return Err(Error::usage(
            "check_capacity_laws needs at least one sample",
        ));
    }
    let mut report = LawReport {
        samples: n_samples,
        violations: Vec::new(),
        worst_monotonicity: f64::INFINITY,
        worst_submodularity: f64::INFINITY,
        worst_subadditivity: f64::INFINITY,
        worst_continuity: f64::INFINITY,
        max_modularity_gap: 0.0,
    };
    for index in 0..n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index as u64));
        let a = random_union(&mut rng);
        let b = random_union(&mut rng);
        let (ma, mb) = (mu.measure(&a)?, mu.measure(&b)?);
        let m_union = mu.measure(&a.union(&b))?;
        let m_inter = mu.measure(&a.intersect(&b))?;

        let mono = (ma - m_inter)
            .min(mb - m_inter)
            .min(m_union - ma)
            .min(m_union - mb);
        let submod = ma + mb - m_union - m_inter;
        let subadd = ma + mb - m_union;
        report.max_modularity_gap = report.max_modularity_gap.max(submod.abs());

        let mut checks = vec![
            (Law::Monotonicity, mono),
            (Law::Submodularity, submod),
            (Law::Subadditivity, subadd),
        ];
        if mu.claims_continuous() {
            let below = chain_margin(mu, &a, ma, shrink, true)?;
            let above = chain_margin(mu, &a, ma, expand, false)?;
            checks.push((Law::ContinuityFromBelow, below));
            checks.push((Law::ContinuityFromAbove, above));
        }
        for (law, margin) in checks {
            let worst = match law {
                Law::Monotonicity => &mut report.worst_monotonicity,
                Law::Submodularity => &mut report.worst_submodularity,
                Law::Subadditivity => &mut report.worst_subadditivity,
                _ => &mut report.worst_continuity,
            };
            *worst = worst.min(margin);
            if margin < -LAW_TOLERANCE {
                report.violations.push(LawViolation {
                    index,
                    law,
                    a: a.clone(),
                    b: b.clone(),
                    margin,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_examples() {
        let mu = Capacity::distorted(DistortionFunction::ExpSaturation);
        let x = IntervalUnion::interval(0.0, 1.0).unwrap();
        assert!((mu.measure(&x).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        for g in DistortionFunction::catalog() {
            assert_eq!(
                Capacity::distorted(g)
                    .measure(&IntervalUnion::empty())
                    .unwrap(),
                0.0
            );
        }
        let two = IntervalUnion::new([(0.0, 0.25), (0.5, 0.75)]).unwrap();
        assert_eq!(Capacity::lebesgue().measure(&two).unwrap(), 0.5);
    }

    #[test]
    fn general_capacity_contract() {
        let bad = Capacity::general("negative", |u| -u.length(), false, false);
        assert!(matches!(
            bad.measure(&IntervalUnion::full()),
            Err(Error::Contract(_))
        ));
        let on_empty = Capacity::general("shifted", |u| u.length() + 0.1, false, false);
        assert!(matches!(
            on_empty.measure(&IntervalUnion::empty()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn catalog_values_at_zero_and_one() {
        for g in DistortionFunction::catalog() {
            assert_eq!(g.value(0.0), 0.0, "{g:?}");
            assert!(g.value(1.0) > 0.0);
            assert!(g.is_concave());
        }
        assert!((DistortionFunction::Moebius.value(1.0) - 1.0).abs() < 1e-15);
        assert!((DistortionFunction::Sine.value(1.0) - 0.5f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_centered_differences() {
        for g in DistortionFunction::catalog()
            .into_iter()
            .chain([DistortionFunction::Power(0.3), DistortionFunction::square()])
        {
            for k in 1..1000 {
                let t = k as f64 / 1000.0;
                let h = 1e-5 * t.min(1.0 - t);
                let fd = (g.value(t + h) - g.value(t - h)) / (2.0 * h);
                let d = g.derivative(t).unwrap();
                assert!((d - fd).abs() <= 1e-6, "{g:?} t={t} d={d} fd={fd}");
            }
        }
    }

    #[test]
    fn power_range_is_checked() {
        assert!(DistortionFunction::power(0.5).is_ok());
        assert!(DistortionFunction::power(1.5).is_err());
        assert!(DistortionFunction::power(0.0).is_err());
    }

    #[test]
    fn custom_must_vanish_at_zero() {
        assert!(DistortionFunction::custom("bad", |t| t + 1.0, None, true).is_err());
        let g = DistortionFunction::custom("cbrt", f64::cbrt, None, true).unwrap();
        assert!(!g.has_derivative());
        assert_eq!(g.derivative(0.5), None);
    }

    #[test]
    fn parse_specs() {
        let mu = parse_capacity_spec(r#"{"distortion": "power", "p": 0.5}"#).unwrap();
        assert!((mu.total().unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            parse_capacity_spec("exp-saturation").unwrap().name(),
            "exp-saturation"
        );
        assert_eq!(
            parse_capacity_spec("power:0.25").unwrap().name(),
            "power:0.25"
        );
        assert!(matches!(parse_capacity_spec("cubic"), Err(Error::Spec(_))));
        assert!(matches!(
            parse_capacity_spec(r#"{"distortion": "power"}"#),
            Err(Error::Spec(_))
        ));
        assert!(parse_capacity_spec(r#"{"distortion": 3"#).is_err());
    }

    #[test]
    fn sqrt_distortion_obeys_laws() {
        let mu = Capacity::distorted(DistortionFunction::Power(0.5));
        let r = check_capacity_laws(&mu, 7, 1000).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations.first());
    }

    #[test]
    fn identity_is_modular() {
        let r = check_capacity_laws(&Capacity::lebesgue(), 3, 1000).unwrap();
        assert!(r.violations.is_empty());
        assert!(r.max_modularity_gap <= 1e-12);
    }

    #[test]
    fn square_distortion_breaks_submodularity() {
        let mu = Capacity::distorted(DistortionFunction::square());
        let r = check_capacity_laws(&mu, 7, 10_000).unwrap();
        assert!(r.count(Law::Submodularity) >= 1);
        assert_eq!(r.count(Law::Monotonicity), 0);
    }

    #[test]
    fn zero_samples_is_usage_error() {
        assert!(matches!(
            check_capacity_laws(&Capacity::lebesgue(), 1, 0),
            Err(Error::Usage(_))
        ));
    }
}
