//! Choquet integrals by level-set quadrature, the convolution form for
//! monotone integrands, and two brute-force oracles.
//!
//! For `beta` in a panel between consecutive piece end values, the
//! superlevel length is a fixed sum of full pieces plus the closed-form
//! crossing lengths of the pieces active in that panel. Each panel is smooth
//! in `beta` and is handed to the adaptive Gauss integrator.

use serde::Serialize;

use crate::capacities::{Capacity, DistortionFunction};
use crate::error::{Error, Result};
use crate::functions::{integrand_superlevel, Function, Integrand, Piece, StepFunction};
use crate::intervals::IntervalUnion;
use crate::quadrature::{integrate_adaptive, GaussRule};

/// Environment variable overriding the default quadrature tolerance.
pub const TOLERANCE_ENV: &str = "CHOQUET_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureConfig {
    /// Gauss points per segment.
    pub order: usize,
    /// Maximum bisection depth of a single panel.
    pub max_depth: usize,
    /// Target absolute error of the whole integral.
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            order: 8,
            max_depth: 48,
            tolerance: 1e-9,
        }
    }
}

impl QuadratureConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        QuadratureConfig {
            tolerance,
            ..Self::default()
        }
    }

    /// Defaults, with the tolerance taken from `CHOQUET_TOL` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(TOLERANCE_ENV) {
            Ok(s) => {
                let tol: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::usage(format!("{TOLERANCE_ENV}={s:?} is not a number")))?;
                let cfg = Self::with_tolerance(tol);
                cfg.validate()?;
                Ok(cfg)
            }
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::usage(format!(
                "Gauss order must be at least 2, got {}",
                self.order
            )));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::usage(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }

    fn rule(&self) -> Result<GaussRule> {
        self.validate()?;
        GaussRule::new(self.order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub panels_used: usize,
    /// False when the error estimate is above the requested tolerance.
    pub converged: bool,
}

impl IntegralResult {
    fn exact(value: f64) -> Self {
        IntegralResult {
            value,
            error_estimate: 0.0,
            panels_used: 0,
            converged: true,
        }
    }
}

/// Panel structure of the superlevel length over the `beta` axis.
struct LevelPanels {
    /// Panel edges, sorted and distinct.
    edges: Vec<f64>,
    /// Total width of the pieces lying entirely above each panel.
    full_width: Vec<f64>,
    /// Active pieces per panel, as ranges into `active`.
    offsets: Vec<usize>,
    active: Vec<Piece>,
}

impl LevelPanels {
    fn new(pieces: &[Piece], extra_edge: f64) -> Self {
        let mut edges: Vec<f64> = pieces.iter().flat_map(|p| [p.v0, p.v1]).collect();
        edges.push(extra_edge);
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let n_panels = edges.len().saturating_sub(1);
        let index = |v: f64| edges.partition_point(|&e| e < v);

        let mut width_at = vec![0.0; edges.len()];
        let mut counts = vec![0usize; n_panels + 1];
        let mut spans = Vec::with_capacity(pieces.len());
        for p in pieces {
            let (klo, khi) = (index(p.lo()), index(p.hi()));
            width_at[klo] += p.width();
            for k in klo..khi {
                counts[k] += 1;
            }
            spans.push((klo, khi));
        }
        // suffix sums: a piece with lower end at edge klo is full below it
        let mut full_width = vec![0.0; n_panels];
        let mut acc = 0.0;
        for k in (0..n_panels).rev() {
            acc += width_at[k + 1];
            full_width[k] = acc;
        }
        let mut offsets = vec![0usize; n_panels + 1];
        for k in 0..n_panels {
            offsets[k + 1] = offsets[k] + counts[k];
        }
        let mut entries: Vec<(usize, Piece)> = pieces
            .iter()
            .zip(&spans)
            .flat_map(|(p, &(klo, khi))| (klo..khi).map(move |k| (k, *p)))
            .collect();
        entries.sort_by_key(|e| e.0);
        let active = entries.into_iter().map(|e| e.1).collect();
        LevelPanels {
            edges,
            full_width,
            offsets,
            active,
        }
    }

    fn intervals(&self) -> Vec<(f64, f64)> {
        self.edges.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Superlevel length at `beta` inside panel `k`.
    fn length(&self, k: usize, beta: f64) -> f64 {
        let active = &self.active[self.offsets[k]..self.offsets[k + 1]];
        self.full_width[k] + active.iter().map(|p| p.length_above(beta)).sum::<f64>()
    }
}

/// `mu(F_beta ∩ A)` for `beta` in panel `k`.
fn level_measure(
    panels: &LevelPanels,
    pieces: &[Piece],
    mu: &Capacity,
    k: usize,
    beta: f64,
) -> Result<f64> {
    match mu {
        Capacity::Distorted(_) => Ok(mu.measure_length(panels.length(k, beta))),
        Capacity::General(_) => mu.measure(&integrand_superlevel(pieces, beta)),
    }
}

fn integrate_levels(
    pieces: &[Piece],
    mu: &Capacity,
    mu_a: f64,
    cfg: &QuadratureConfig,
    subtract_below_zero: bool,
) -> Result<(IntegralResult, f64)> {
    let rule = cfg.rule()?;
    let panels = LevelPanels::new(pieces, 0.0);
    let intervals = panels.intervals();
    let lowest = panels.edges.first().copied().unwrap_or(0.0);
    let failure = std::cell::RefCell::new(None);
    let out = integrate_adaptive(
        &intervals,
        &rule,
        cfg.tolerance,
        cfg.max_depth,
        |k, beta| match level_measure(&panels, pieces, mu, k, beta) {
            Ok(m) if subtract_below_zero && intervals[k].1 <= 0.0 => m - mu_a,
            Ok(m) => m,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok((
        IntegralResult {
            value: out.value,
            error_estimate: out.error,
            panels_used: out.leaves,
            converged: out.converged,
        },
        lowest,
    ))
}

/// `(C)∫_A f dmu` over the two finite `beta` ranges.
pub fn choquet_integral(
    f: &Function,
    a: &IntervalUnion,
    mu: &Capacity,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    choquet_integral_of(&Integrand::from_function(f), a, mu, cfg)
}

/// Same as [`choquet_integral`] for an integrand given as monotone pieces.
pub fn choquet_integral_of(
    f: &Integrand,
    a: &IntervalUnion,
    mu: &Capacity,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    let (lo, hi) = f.range();
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain("integrand is unbounded"));
    }
    let pieces = f.restrict(a);
    if pieces.is_empty() {
        cfg.validate()?;
        return Ok(IntegralResult::exact(0.0));
    }
    let mu_a = mu.measure(a)?;
    Ok(integrate_levels(&pieces, mu, mu_a, cfg, true)?.0)
}

/// Translated form `∫_{M'}^{M} mu(F_beta ∩ A) dbeta + M' mu(A)` with
/// `M' = min(inf f, 0)`. Independent of the sign split; used as a cross-check.
pub fn choquet_integral_translated(
    f: &Integrand,
    a: &IntervalUnion,
    mu: &Capacity,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    let pieces = f.restrict(a);
    if pieces.is_empty() {
        return Ok(IntegralResult::exact(0.0));
    }
    let mu_a = mu.measure(a)?;
    let (mut res, lowest) = integrate_levels(&pieces, mu, mu_a, cfg, false)?;
    res.value += lowest.min(0.0) * mu_a;
    Ok(res)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Nondecreasing,
    Nonincreasing,
}

/// Slack allowed when validating sign and monotonicity.
const MONOTONE_SLACK: f64 = 1e-12;

/// `(C)∫_0^x f dmu` for `mu = gamma(m)` and monotone `f >= 0` by the
/// convolution forms `∫ gamma'(x - s) f(s) ds` (nondecreasing) and
/// `∫ gamma'(s) f(s) ds` (nonincreasing).
///
/// Both are computed as `∫_0^x gamma'(t) g(t) dt` with `g(t) = f(x - t)` or
/// `f(t)`. On the cell touching `t = 0`, a distortion behaving like `t^p`
/// is integrated after substituting `t = w u^(1/p)`, which removes the
/// singularity of `gamma'`.
pub fn choquet_monotone(
    f: &Function,
    x: f64,
    gamma: &DistortionFunction,
    direction: Direction,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("upper limit {x} is outside [0, 1]")));
    }
    if !gamma.has_derivative() {
        return Err(Error::usage(format!(
            "distortion {} has no derivative; use the level-set engine",
            gamma.name()
        )));
    }
    let (lo, _) = f.range();
    if lo < -MONOTONE_SLACK {
        return Err(Error::precondition(format!(
            "integrand has negative values (min {lo})"
        )));
    }
    let monotone = match f {
        Function::Pwl(p) => match direction {
            Direction::Nondecreasing => p.is_nondecreasing(MONOTONE_SLACK),
            Direction::Nonincreasing => p.is_nonincreasing(MONOTONE_SLACK),
        },
        Function::Step(s) => s.values().windows(2).all(|w| match direction {
            Direction::Nondecreasing => w[1] >= w[0] - MONOTONE_SLACK,
            Direction::Nonincreasing => w[1] <= w[0] + MONOTONE_SLACK,
        }),
    };
    if !monotone {
        return Err(Error::precondition(format!(
            "integrand is not {direction:?}"
        )));
    }
    let rule = cfg.rule()?;
    if x == 0.0 {
        return Ok(IntegralResult::exact(0.0));
    }

    let mut cuts: Vec<f64> = f
        .grid()
        .iter()
        .filter(|&&s| s > 0.0 && s < x)
        .map(|&s| match direction {
            Direction::Nondecreasing => x - s,
            Direction::Nonincreasing => s,
        })
        .collect();
    cuts.push(0.0);
    cuts.push(x);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let cells: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let g = |t: f64| match direction {
        Direction::Nondecreasing => f.eval(x - t),
        Direction::Nonincreasing => f.eval(t),
    };
    let first_width = cells[0].1;
    let exponent = gamma.endpoint_exponent();

    // the first cell is mapped to u in [0, 1] when gamma' is singular at 0
    let intervals: Vec<(f64, f64)> = cells
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if i == 0 && exponent.is_some() {
                (0.0, 1.0)
            } else {
                c
            }
        })
        .collect();
    let out = integrate_adaptive(
        &intervals,
        &rule,
        cfg.tolerance,
        cfg.max_depth,
        |i, s| match (i, exponent) {
            (0, Some(p)) => {
                let t = first_width * s.powf(1.0 / p);
                let jac = first_width / p * s.powf(1.0 / p - 1.0);
                gamma.derivative(t).unwrap_or(0.0) * jac * g(t)
            }
            _ => gamma.derivative(s).unwrap_or(0.0) * g(s),
        },
    );
    Ok(IntegralResult {
        value: out.value,
        error_estimate: out.error,
        panels_used: out.leaves,
        converged: out.converged,
    })
}

/// Midpoint Riemann sum of the defining formula with `n_beta` uniform cells
/// over `[min(M', 0), max(M, 0)]`, split between the negative and positive
/// ranges in proportion to their lengths.
pub fn oracle_beta_riemann(
    f: &Function,
    a: &IntervalUnion,
    mu: &Capacity,
    n_beta: usize,
) -> Result<f64> {
    if n_beta == 0 {
        return Err(Error::usage("oracle_beta_riemann needs at least one cell"));
    }
    let (m_lo, m_hi) = f.range();
    let (lo, hi) = (m_lo.min(0.0), m_hi.max(0.0));
    if hi == lo {
        return Ok(0.0);
    }
    let mu_a = mu.measure(a)?;
    let mut n_pos = ((n_beta as f64) * hi / (hi - lo)).round() as usize;
    if hi > 0.0 && lo < 0.0 && n_beta >= 2 {
        n_pos = n_pos.clamp(1, n_beta - 1);
    }
    let n_neg = n_beta - n_pos;
    let mut total = 0.0;
    if n_pos > 0 {
        let h = hi / n_pos as f64;
        for k in 0..n_pos {
            let beta = (k as f64 + 0.5) * h;
            total += h * mu.measure(&f.superlevel(beta).intersect(a))?;
        }
    }
    if n_neg > 0 {
        let h = -lo / n_neg as f64;
        for k in 0..n_neg {
            let beta = lo + (k as f64 + 0.5) * h;
            total += h * (mu.measure(&f.superlevel(beta).intersect(a))? - mu_a);
        }
    }
    Ok(total)
}

/// Exact integral of a step function over `[0, 1]` by the sorted sum
/// `v_(0) mu([0,1]) + sum_j (v_(j) - v_(j-1)) mu({f >= v_(j)})` with
/// `v_(0) = min(v_(1), 0)`.
pub fn discrete_choquet_sorted(f: &StepFunction, mu: &Capacity) -> Result<f64> {
    let mut levels = f.values().to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut prev = levels[0].min(0.0);
    let mut total = prev * mu.total()?;
    let s = f.boundaries();
    for &v in &levels {
        let parts = f
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c >= v)
            .map(|(i, _)| (s[i], s[i + 1]));
        total += (v - prev) * mu.measure(&IntervalUnion::new(parts)?)?;
        prev = v;
    }
    Ok(total)
}

/// Exact Lebesgue integral over `[0, 1]`.
pub fn lebesgue_integral(f: &Function) -> f64 {
    match f {
        Function::Pwl(p) => p.lebesgue_integral(0.0, 1.0),
        Function::Step(s) => s
            .values()
            .iter()
            .zip(s.boundaries().windows(2))
            .map(|(c, w)| c * (w[1] - w[0]))
            .sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::PiecewiseLinear;

    fn thirds() -> StepFunction {
        StepFunction::new(vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], vec![3.0, 1.0, 2.0]).unwrap()
    }

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn sqrt_mu() -> Capacity {
        Capacity::distorted(DistortionFunction::Power(0.5))
    }

    #[test]
    fn constant_one_gives_capacity_of_domain() {
        let one = Function::Pwl(PiecewiseLinear::constant(1.0));
        let mu = Capacity::distorted(DistortionFunction::ExpSaturation);
        let r = choquet_integral(&one, &IntervalUnion::full(), &mu, &cfg()).unwrap();
        assert!((r.value - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(r.converged);
    }

    #[test]
    fn zero_function_gives_zero() {
        let zero = Function::Pwl(PiecewiseLinear::constant(0.0));
        let a = IntervalUnion::interval(0.2, 0.7).unwrap();
        let r = choquet_integral(&zero, &a, &sqrt_mu(), &cfg()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn thirds_step_under_sqrt() {
        let exact = (1.0f64 / 3.0).sqrt() + (2.0f64 / 3.0).sqrt() + 1.0;
        let f = Function::Step(thirds());
        let r = choquet_integral(&f, &IntervalUnion::full(), &sqrt_mu(), &cfg()).unwrap();
        assert!((r.value - exact).abs() < 1e-9, "{}", r.value);
        let sorted = discrete_choquet_sorted(&thirds(), &sqrt_mu()).unwrap();
        assert!((sorted - exact).abs() < 1e-14);
        let lebesgue =
            choquet_integral(&f, &IntervalUnion::full(), &Capacity::lebesgue(), &cfg()).unwrap();
        assert!((lebesgue.value - 2.0).abs() < 1e-14);
    }

    #[test]
    fn riemann_oracle_aligned_with_steps() {
        let exact = (1.0f64 / 3.0).sqrt() + (2.0f64 / 3.0).sqrt() + 1.0;
        for k in 0..6 {
            let n = 3 << k;
            let v = oracle_beta_riemann(
                &Function::Step(thirds()),
                &IntervalUnion::full(),
                &sqrt_mu(),
                n,
            )
            .unwrap();
            assert!((v - exact).abs() < 1e-13, "k={k}");
        }
        let one = Function::Pwl(PiecewiseLinear::constant(1.0));
        let mu = Capacity::distorted(DistortionFunction::ExpSaturation);
        let v = oracle_beta_riemann(&one, &IntervalUnion::full(), &mu, 10).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn sorted_sum_special_cases() {
        let c = StepFunction::constant(2.5);
        let mu = sqrt_mu();
        assert_eq!(discrete_choquet_sorted(&c, &mu).unwrap(), 2.5);
        let neg = StepFunction::new(vec![0.0, 0.5, 1.0], vec![-1.0, -1.0]).unwrap();
        let mu = Capacity::distorted(DistortionFunction::ExpSaturation);
        assert_eq!(
            discrete_choquet_sorted(&neg, &mu).unwrap(),
            -mu.total().unwrap()
        );
    }

    #[test]
    fn signed_step_matches_sorted_sum() {
        let f =
            StepFunction::new(vec![0.0, 0.2, 0.5, 0.9, 1.0], vec![-0.7, 0.4, -0.1, 0.9]).unwrap();
        for g in DistortionFunction::catalog() {
            let mu = Capacity::distorted(g);
            let engine = choquet_integral(
                &Function::Step(f.clone()),
                &IntervalUnion::full(),
                &mu,
                &cfg(),
            )
            .unwrap();
            let sorted = discrete_choquet_sorted(&f, &mu).unwrap();
            assert!((engine.value - sorted).abs() < 1e-10, "{mu:?}");
        }
    }

    #[test]
    fn translated_form_agrees() {
        let f = Function::Pwl(
            PiecewiseLinear::new(vec![0.0, 0.3, 0.8, 1.0], vec![-0.5, 0.9, -0.2, 0.4]).unwrap(),
        );
        let a = IntervalUnion::new([(0.1, 0.5), (0.6, 0.95)]).unwrap();
        for g in DistortionFunction::catalog() {
            let mu = Capacity::distorted(g);
            let direct = choquet_integral(&f, &a, &mu, &cfg()).unwrap();
            let shifted =
                choquet_integral_translated(&Integrand::from_function(&f), &a, &mu, &cfg())
                    .unwrap();
            assert!((direct.value - shifted.value).abs() < 1e-9, "{mu:?}");
        }
    }

    #[test]
    fn general_capacity_path_matches_distorted() {
        let f =
            Function::Pwl(PiecewiseLinear::new(vec![0.0, 0.4, 1.0], vec![0.2, 1.0, -0.3]).unwrap());
        let general = Capacity::general("sqrt-length", |u| u.length().sqrt(), true, true);
        let a = IntervalUnion::full();
        let x = choquet_integral(&f, &a, &general, &cfg()).unwrap();
        let y = choquet_integral(&f, &a, &sqrt_mu(), &cfg()).unwrap();
        assert!((x.value - y.value).abs() < 1e-10);
    }

    #[test]
    fn ramp_lebesgue() {
        let ramp = Function::Pwl(PiecewiseLinear::identity());
        let r =
            choquet_integral(&ramp, &IntervalUnion::full(), &Capacity::lebesgue(), &cfg()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
        let v = oracle_beta_riemann(
            &ramp,
            &IntervalUnion::full(),
            &Capacity::lebesgue(),
            1_000_000,
        )
        .unwrap();
        assert!((v - 0.5).abs() < 1e-6);
    }

    #[test]
    fn monotone_fast_path_examples() {
        let mu = DistortionFunction::ExpSaturation;
        let one = Function::Pwl(PiecewiseLinear::constant(1.0));
        for g in DistortionFunction::catalog() {
            let r = choquet_monotone(&one, 0.7, &g, Direction::Nondecreasing, &cfg()).unwrap();
            assert!((r.value - g.value(0.7)).abs() < 1e-10, "{g:?}");
        }
        let grid = PiecewiseLinear::uniform_grid(2049);
        let decay =
            Function::Pwl(PiecewiseLinear::interpolate(grid.clone(), |s| (-s).exp()).unwrap());
        let r = choquet_monotone(
            &decay,
            1.0,
            &DistortionFunction::Identity,
            Direction::Nonincreasing,
            &cfg(),
        )
        .unwrap();
        assert!((r.value - (1.0 - (-1.0f64).exp())).abs() < 1e-7);
        let rise = Function::Pwl(PiecewiseLinear::interpolate(grid, |s| -(-s).exp_m1()).unwrap());
        for x in [0.25, 0.5, 1.0] {
            let r = choquet_monotone(&rise, x, &mu, Direction::Nondecreasing, &cfg()).unwrap();
            let exact = 1.0 - (-x).exp() - x * (-x).exp();
            assert!((r.value - exact).abs() < 1e-7, "x={x}");
        }
    }

    #[test]
    fn monotone_fast_path_validates() {
        let ramp = Function::Pwl(PiecewiseLinear::identity());
        let g = DistortionFunction::Identity;
        assert!(matches!(
            choquet_monotone(&ramp, 0.5, &g, Direction::Nonincreasing, &cfg()),
            Err(Error::Precondition(_))
        ));
        let neg = ramp.shift(-0.5);
        assert!(matches!(
            choquet_monotone(&neg, 0.5, &g, Direction::Nondecreasing, &cfg()),
            Err(Error::Precondition(_))
        ));
        let custom = DistortionFunction::custom("cbrt", f64::cbrt, None, true).unwrap();
        assert!(matches!(
            choquet_monotone(&ramp, 0.5, &custom, Direction::Nondecreasing, &cfg()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn env_tolerance_override_is_validated() {
        assert!(QuadratureConfig::with_tolerance(-1.0).validate().is_err());
        assert!(QuadratureConfig { order: 1, ..cfg() }.validate().is_err());
    }
}
