//! Seeded property suites with structured reports, and the orbit-span
//! residual study.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::capacities::{
    check_capacity_laws, distortion_by_name, random_union, Capacity, DistortionFunction,
};
use crate::choquet::{
    choquet_integral, choquet_integral_translated, choquet_monotone, discrete_choquet_sorted,
    lebesgue_integral, oracle_beta_riemann, Direction, QuadratureConfig,
};
use crate::error::{Error, Result};
use crate::functions::{
    comonotone_pair, derive_seed, random_function, Function, FunctionClass, Integrand,
    PiecewiseLinear, StepFunction,
};
use crate::intervals::IntervalUnion;
use crate::spaces::{holder_margin, lp_norm, uniform_norm, LpConfig};
use crate::volterra::{
    apply_volterra, identity_plus_v, iterate_volterra, lipschitz_ratio, orbit_closed_form,
    random_distinct_pair, volterra_at, DEFAULT_GRID,
};

/// Grid for operator images inside suites.
pub const SUITE_GRID: usize = 129;
/// Beta cells of the Riemann oracle.
pub const RIEMANN_CELLS: usize = 1 << 20;
/// Every this many samples of the oracle suite also runs the Riemann oracle.
pub const RIEMANN_EVERY: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub index: usize,
    pub witness: Value,
    pub margin: f64,
}

/// Outcome of a suite. Every checked quantity is a margin that should be
/// nonnegative; a margin below `-tolerance` is a violation.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub samples: usize,
    pub violations: Vec<Violation>,
    /// Smallest margin seen; `None` when the suite only emits data.
    pub worst_margin: Option<f64>,
    pub tolerance: f64,
    /// True for suites run on inputs that break the law being checked.
    pub expect_violations: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
    pub runtime_ms: u64,
}

impl SuiteReport {
    /// Clean for ordinary suites; at least one violation for expected failures.
    pub fn passed(&self) -> bool {
        self.violations.is_empty() != self.expect_violations
    }
}

/// Suite ids. The `aliases` are alternative names accepted on input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Homogeneity,
    Translation,
    Monotonicity,
    Subadditivity,
    Comonotone,
    SetMonotonicity,
    CapacityLaws,
    Holder,
    Minkowski,
    Embedding,
    HolderModulus,
    Equicontinuity,
    LipschitzL1,
    LipschitzUniform,
    LipschitzLp,
    LipschitzNorm,
    OrbitClosedForm,
    OracleEquivalence,
    LebesgueReduction,
    FastPath,
    SignedDecomposition,
    LipschitzKernel,
    MonotoneOutput,
    VHomogeneity,
    SpikeDemo,
}

const SUITES: &[(Suite, &str, &[&str])] = &[
    (Suite::Homogeneity, "homogeneity", &[]),
    (Suite::Translation, "translation", &[]),
    (Suite::Monotonicity, "monotonicity", &[]),
    (Suite::Subadditivity, "subadditivity", &[]),
    (Suite::Comonotone, "comonotone", &["comonotone-additivity"]),
    (Suite::SetMonotonicity, "set-monotonicity", &[]),
    (Suite::CapacityLaws, "capacity-laws", &[]),
    (Suite::Holder, "holder", &[]),
    (Suite::Minkowski, "minkowski", &[]),
    (Suite::Embedding, "embedding", &[]),
    (Suite::HolderModulus, "holder-modulus", &["thm-4.1"]),
    (Suite::Equicontinuity, "equicontinuity", &["cor-4.2"]),
    (Suite::LipschitzL1, "lipschitz-l1", &["thm-5.1-i"]),
    (
        Suite::LipschitzUniform,
        "lipschitz-uniform",
        &["thm-5.1-ii"],
    ),
    (Suite::LipschitzLp, "lipschitz-lp", &["thm-5.1-iii"]),
    (Suite::LipschitzNorm, "lipschitz-norm", &["remark-5.3"]),
    (Suite::OrbitClosedForm, "orbit-closed-form", &["thm-6.2"]),
    (Suite::OracleEquivalence, "oracle-equivalence", &[]),
    (Suite::LebesgueReduction, "lebesgue-reduction", &[]),
    (Suite::FastPath, "fast-path", &[]),
    (
        Suite::SignedDecomposition,
        "signed-decomposition",
        &["eq3-decomposition"],
    ),
    (Suite::LipschitzKernel, "lipschitz-kernel", &[]),
    (Suite::MonotoneOutput, "monotone-output", &[]),
    (Suite::VHomogeneity, "v-homogeneity", &[]),
    (Suite::SpikeDemo, "spike-demo", &[]),
];

impl Suite {
    pub fn all() -> impl Iterator<Item = Suite> {
        SUITES.iter().map(|s| s.0)
    }

    pub fn name(&self) -> &'static str {
        SUITES
            .iter()
            .find(|s| s.0 == *self)
            .map(|s| s.1)
            .expect("every suite is listed")
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        SUITES
            .iter()
            .find(|(_, n, aliases)| *n == name || aliases.contains(&name))
            .map(|s| s.0)
    }

    /// Slack added to every margin of the suite.
    pub fn tolerance(&self) -> f64 {
        match self {
            Suite::Homogeneity | Suite::Translation | Suite::Subadditivity => 1e-8,
            Suite::Comonotone => 1e-7,
            Suite::Monotonicity | Suite::SetMonotonicity => 1e-9,
            Suite::CapacityLaws => crate::capacities::LAW_TOLERANCE,
            Suite::Holder | Suite::Minkowski | Suite::Embedding => 1e-8,
            Suite::HolderModulus | Suite::Equicontinuity => 1e-7,
            Suite::LipschitzL1 | Suite::LipschitzUniform | Suite::LipschitzLp => 1e-7,
            Suite::LipschitzNorm => 1e-6,
            Suite::OrbitClosedForm => 0.0,
            Suite::OracleEquivalence => 1e-10,
            Suite::LebesgueReduction => 1e-10,
            Suite::FastPath => 1e-7,
            Suite::SignedDecomposition => 1e-9,
            Suite::LipschitzKernel => 1e-8,
            Suite::MonotoneOutput | Suite::VHomogeneity => 1e-9,
            Suite::SpikeDemo => 0.0,
        }
    }
}

/// Splits `capacity-laws[spec]` into the suite and the bracketed capacity.
fn parse_suite_id(id: &str) -> Result<(Suite, Option<Capacity>)> {
    let id = id.trim();
    if let Some(rest) = id.strip_prefix("capacity-laws[") {
        let spec = rest
            .strip_suffix(']')
            .ok_or_else(|| Error::usage(format!("unterminated capacity in suite id {id:?}")))?;
        let gamma = distortion_by_name(spec, None).map_err(|e| Error::usage(e.to_string()))?;
        return Ok((Suite::CapacityLaws, Some(Capacity::distorted(gamma))));
    }
    Suite::from_name(id)
        .map(|s| (s, None))
        .ok_or_else(|| Error::usage(format!("unknown suite {id:?}")))
}

struct Collector {
    tolerance: f64,
    worst: Option<f64>,
    violations: Vec<Violation>,
}

impl Collector {
    fn new(tolerance: f64) -> Self {
        Collector {
            tolerance,
            worst: None,
            violations: Vec::new(),
        }
    }

    fn check(&mut self, index: usize, margin: f64, witness: impl FnOnce() -> Value) {
        let margin = if margin.is_nan() {
            f64::NEG_INFINITY
        } else {
            margin
        };
        self.worst = Some(self.worst.map_or(margin, |w| w.min(margin)));
        if margin < -self.tolerance {
            self.violations.push(Violation {
                index,
                witness: witness(),
                margin,
            });
        }
    }

    /// Equality check: the margin is `-|a - b|`.
    fn equal(&mut self, index: usize, a: f64, b: f64, witness: impl FnOnce() -> Value) {
        self.check(index, -(a - b).abs(), witness);
    }
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index as u64))
}

fn catalog_capacity(index: usize) -> Capacity {
    let cat = DistortionFunction::catalog();
    Capacity::distorted(cat[index % cat.len()].clone())
}

fn random_signed(rng: &mut impl Rng, step: bool) -> Result<Function> {
    let class = if step {
        FunctionClass::SignedStep
    } else {
        FunctionClass::SignedPwl
    };
    random_function(rng.gen(), &class, rng.gen_range(2..=9))
}

fn random_nonneg(rng: &mut impl Rng, step: bool) -> Result<Function> {
    let class = if step {
        FunctionClass::Step
    } else {
        FunctionClass::NonnegPwl
    };
    random_function(rng.gen(), &class, rng.gen_range(2..=9))
}

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn integral(f: &Function, a: &IntervalUnion, mu: &Capacity) -> Result<f64> {
    Ok(choquet_integral(f, a, mu, &cfg())?.value)
}

const EXPONENTS: [f64; 4] = [1.0, 1.5, 2.0, 3.0];
const EXPONENTS_ABOVE_ONE: [f64; 3] = [1.5, 2.0, 3.0];
const SCALES: [f64; 4] = [0.0, 0.5, 2.0, 10.0];

/// Runs a suite by id. `capacity-laws[NAME]` checks a single distortion,
/// for example `capacity-laws[square]`.
pub fn run_suite(id: &str, seed: u64, n_samples: usize) -> Result<SuiteReport> {
    let (suite, capacity) = parse_suite_id(id)?;
    if n_samples == 0 {
        return Err(Error::usage("a suite needs at least one sample"));
    }
    let start = Instant::now();
    let mut col = Collector::new(suite.tolerance());
    let mut expect_violations = false;
    let mut data = None;
    match suite {
        Suite::CapacityLaws => {
            let capacities = match capacity {
                Some(c) => vec![c],
                None => DistortionFunction::catalog()
                    .into_iter()
                    .map(Capacity::distorted)
                    .collect(),
            };
            expect_violations = capacities.iter().any(|c| !c.claims_submodular());
            capacity_laws(&mut col, &capacities, seed, n_samples)?;
        }
        Suite::SpikeDemo => data = Some(spike_demo(n_samples)?),
        _ => {
            for index in 0..n_samples {
                run_sample(suite, &mut col, seed, index, n_samples)?;
            }
        }
    }
    col.violations.sort_by_key(|v| v.index);
    Ok(SuiteReport {
        suite: id.trim().to_string(),
        seed,
        samples: n_samples,
        violations: col.violations,
        worst_margin: col.worst,
        tolerance: suite.tolerance(),
        expect_violations,
        data,
        runtime_ms: start.elapsed().as_millis() as u64,
    })
}

fn capacity_laws(col: &mut Collector, capacities: &[Capacity], seed: u64, n: usize) -> Result<()> {
    for (k, mu) in capacities.iter().enumerate() {
        let report = check_capacity_laws(mu, derive_seed(seed, k as u64), n)?;
        let base = k * n;
        // margins are already in the law report; recover the worst per law
        for margin in [
            report.worst_monotonicity,
            report.worst_submodularity,
            report.worst_subadditivity,
            report.worst_continuity,
        ] {
            if margin.is_finite() {
                col.worst = Some(col.worst.map_or(margin, |w| w.min(margin)));
            }
        }
        for v in report.violations {
            col.violations.push(Violation {
                index: base + v.index,
                witness: json!({
                    "capacity": mu.name(),
                    "law": v.law,
                    "a": v.a,
                    "b": v.b,
                }),
                margin: v.margin,
            });
        }
    }
    Ok(())
}

fn run_sample(
    suite: Suite,
    col: &mut Collector,
    seed: u64,
    index: usize,
    n_samples: usize,
) -> Result<()> {
    let mut rng = sample_rng(seed, index);
    let mu = catalog_capacity(index);
    let step = index % 2 == 1;
    let name = mu.name();
    match suite {
        Suite::Homogeneity => {
            let f = random_signed(&mut rng, step)?;
            let a = random_union(&mut rng);
            let base = integral(&f, &a, &mu)?;
            for s in SCALES {
                let scaled = integral(&f.scale(s), &a, &mu)?;
                col.equal(
                    index,
                    scaled,
                    s * base,
                    || json!({"capacity": name, "f": f, "a": a, "scale": s}),
                );
            }
        }
        Suite::Translation => {
            let f = random_signed(&mut rng, step)?;
            let a = random_union(&mut rng);
            let base = integral(&f, &a, &mu)?;
            let mu_a = mu.measure(&a)?;
            for c in [-1.0, 1.0] {
                let shifted = integral(&f.shift(c), &a, &mu)?;
                col.equal(
                    index,
                    shifted,
                    base + c * mu_a,
                    || json!({"capacity": name, "f": f, "a": a, "shift": c}),
                );
            }
        }
        Suite::Monotonicity => {
            let f = random_signed(&mut rng, step)?;
            let bump = random_nonneg(&mut rng, step)?;
            let g = f.add(&bump)?;
            let a = random_union(&mut rng);
            let m = integral(&g, &a, &mu)? - integral(&f, &a, &mu)?;
            col.check(
                index,
                m,
                || json!({"capacity": name, "f": f, "g": g, "a": a}),
            );
        }
        Suite::Subadditivity => {
            let f = random_signed(&mut rng, step)?;
            let g = random_signed(&mut rng, step)?;
            let a = random_union(&mut rng);
            let m =
                integral(&f, &a, &mu)? + integral(&g, &a, &mu)? - integral(&f.add(&g)?, &a, &mu)?;
            col.check(
                index,
                m,
                || json!({"capacity": name, "f": f, "g": g, "a": a}),
            );
        }
        Suite::Comonotone => {
            let (f, g) = comonotone_pair(rng.gen(), rng.gen_range(2..=9), step)?;
            let a = random_union(&mut rng);
            let lhs = integral(&f.add(&g)?, &a, &mu)?;
            let rhs = integral(&f, &a, &mu)? + integral(&g, &a, &mu)?;
            col.equal(
                index,
                lhs,
                rhs,
                || json!({"capacity": name, "f": f, "g": g, "a": a}),
            );
        }
        Suite::SetMonotonicity => {
            let f = random_nonneg(&mut rng, step)?;
            let b = random_union(&mut rng);
            let a = b.intersect(&random_union(&mut rng));
            let m = integral(&f, &b, &mu)? - integral(&f, &a, &mu)?;
            col.check(
                index,
                m,
                || json!({"capacity": name, "f": f, "a": a, "b": b}),
            );
        }
        Suite::Holder => {
            let f = random_signed(&mut rng, false)?;
            let g = random_signed(&mut rng, false)?;
            let p = EXPONENTS[index % EXPONENTS.len()];
            let m = holder_margin(&f, &g, &LpConfig::new(p)?, &mu)?;
            col.check(
                index,
                m,
                || json!({"capacity": name, "f": f, "g": g, "p": p}),
            );
        }
        Suite::Minkowski => {
            let f = random_signed(&mut rng, step)?;
            let g = random_signed(&mut rng, step)?;
            let p = EXPONENTS[index % EXPONENTS.len()];
            let lp = LpConfig::new(p)?;
            let m =
                lp_norm(&f, &lp, &mu)? + lp_norm(&g, &lp, &mu)? - lp_norm(&f.add(&g)?, &lp, &mu)?;
            col.check(
                index,
                m,
                || json!({"capacity": name, "f": f, "g": g, "p": p}),
            );
        }
        Suite::Embedding => {
            let f = random_signed(&mut rng, step)?;
            let p = EXPONENTS_ABOVE_ONE[index % EXPONENTS_ABOVE_ONE.len()];
            let lp = LpConfig::new(p)?;
            let bound = lp_norm(&f, &lp, &mu)? * mu.total()?.powf(lp.inv_q());
            let m = bound - lp_norm(&f, &LpConfig::new(1.0)?, &mu)?;
            col.check(index, m, || json!({"capacity": name, "f": f, "p": p}));
        }
        Suite::HolderModulus | Suite::Equicontinuity => {
            let p = EXPONENTS_ABOVE_ONE[index % EXPONENTS_ABOVE_ONE.len()];
            let lp = LpConfig::new(p)?;
            let class = FunctionClass::UnitBall {
                p,
                capacity: mu.clone(),
            };
            let f = random_function(rng.gen(), &class, rng.gen_range(2..=9))?;
            let norm = lp_norm(&f, &lp, &mu)?;
            let gamma = mu
                .distortion()
                .expect("catalog capacities are distorted")
                .clone();
            let v_one = volterra_at(&f, 1.0, &mu, &cfg())?.value;
            if suite == Suite::Equicontinuity {
                let m = gamma.value(1.0).powf(lp.inv_q()) - v_one.abs();
                col.check(
                    index,
                    m,
                    || json!({"capacity": name, "f": f, "p": p, "x": 1.0}),
                );
            }
            for _ in 0..50 {
                let (x, y): (f64, f64) = (rng.gen(), rng.gen());
                let (lo, hi) = (x.min(y), x.max(y));
                let vx = volterra_at(&f, x, &mu, &cfg())?.value;
                let vy = volterra_at(&f, y, &mu, &cfg())?.value;
                let bound = if suite == Suite::HolderModulus {
                    norm * mu
                        .measure(&IntervalUnion::interval(lo, hi)?)?
                        .powf(lp.inv_q())
                } else {
                    gamma.value(hi - lo).powf(lp.inv_q())
                };
                let m = bound - (vx - vy).abs();
                col.check(
                    index,
                    m,
                    || json!({"capacity": name, "f": f, "p": p, "x": x, "y": y}),
                );
                if suite == Suite::Equicontinuity {
                    let m = gamma.value(1.0).powf(lp.inv_q()) - vx.abs();
                    col.check(
                        index,
                        m,
                        || json!({"capacity": name, "f": f, "p": p, "x": x}),
                    );
                }
            }
        }
        Suite::LipschitzL1 | Suite::LipschitzUniform | Suite::LipschitzLp => {
            let step = step && suite != Suite::LipschitzUniform;
            let f = random_signed(&mut rng, step)?;
            let g = random_signed(&mut rng, step)?;
            let vf = apply_volterra(&f, &mu, SUITE_GRID, &cfg())?;
            let vg = apply_volterra(&g, &mu, SUITE_GRID, &cfg())?;
            let dv = Function::Pwl(vf.sub(&vg));
            let df = f.sub(&g)?;
            let total = mu.total()?;
            let (lhs, rhs, p) = match suite {
                Suite::LipschitzUniform => (uniform_norm(&dv), uniform_norm(&df), None),
                _ => {
                    let p = if suite == Suite::LipschitzL1 {
                        1.0
                    } else {
                        EXPONENTS_ABOVE_ONE[index % EXPONENTS_ABOVE_ONE.len()]
                    };
                    let lp = LpConfig::new(p)?;
                    (lp_norm(&dv, &lp, &mu)?, lp_norm(&df, &lp, &mu)?, Some(p))
                }
            };
            col.check(
                index,
                total * rhs - lhs,
                || json!({"capacity": name, "f": f, "g": g, "p": p}),
            );
        }
        Suite::LipschitzNorm => {
            let (f, g) = random_distinct_pair(rng.gen())?;
            let p = EXPONENTS[index % EXPONENTS.len()];
            let ratio = lipschitz_ratio(&f, &g, &mu, &LpConfig::new(p)?, SUITE_GRID)?;
            col.check(
                index,
                mu.total()? - ratio,
                || json!({"capacity": name, "f": f, "g": g, "p": p}),
            );
        }
        Suite::OrbitClosedForm => {
            // one pass computes every iterate; later indices are covered by it
            if index == 0 {
                orbit_suite(col, n_samples)?;
            }
        }
        Suite::OracleEquivalence => {
            let cells = rng.gen_range(1..=64);
            let f = random_function(rng.gen(), &FunctionClass::SignedStep, cells + 1)?;
            let full = IntervalUnion::full();
            let engine = integral(&f, &full, &mu)?;
            let Function::Step(s) = &f else {
                unreachable!()
            };
            let sorted = discrete_choquet_sorted(s, &mu)?;
            col.equal(
                index,
                engine,
                sorted,
                || json!({"capacity": name, "f": f, "oracle": "sorted-sum"}),
            );
            if index.is_multiple_of(RIEMANN_EVERY) {
                let g = random_signed(&mut rng, false)?;
                let engine = integral(&g, &full, &mu)?;
                let riemann = oracle_beta_riemann(&g, &full, &mu, RIEMANN_CELLS)?;
                // the Riemann oracle carries its own O(h) error
                let m = 1e-5 - (engine - riemann).abs();
                col.check(
                    index,
                    m + col.tolerance,
                    || json!({"capacity": name, "f": g, "oracle": "beta-riemann"}),
                );
            }
        }
        Suite::LebesgueReduction => {
            let f = random_signed(&mut rng, step)?;
            let lebesgue = Capacity::lebesgue();
            let v = integral(&f, &IntervalUnion::full(), &lebesgue)?;
            col.equal(index, v, lebesgue_integral(&f), || json!({"f": f}));
        }
        Suite::FastPath => {
            let direction = if index.is_multiple_of(2) {
                Direction::Nondecreasing
            } else {
                Direction::Nonincreasing
            };
            let class = match direction {
                Direction::Nondecreasing => FunctionClass::Nondecreasing,
                Direction::Nonincreasing => FunctionClass::Nonincreasing,
            };
            let f = random_function(rng.gen(), &class, rng.gen_range(2..=9))?;
            let x: f64 = 1.0 - rng.gen::<f64>();
            let gamma = mu.distortion().expect("catalog capacities are distorted");
            let engine = integral(&f, &IntervalUnion::interval(0.0, x)?, &mu)?;
            let fast = choquet_monotone(&f, x, gamma, direction, &cfg())?.value;
            col.equal(
                index,
                engine,
                fast,
                || json!({"capacity": name, "f": f, "x": x, "direction": direction}),
            );
        }
        Suite::SignedDecomposition => {
            let f = random_signed(&mut rng, step)?;
            let a = random_union(&mut rng);
            let direct = integral(&f, &a, &mu)?;
            let shifted =
                choquet_integral_translated(&Integrand::from_function(&f), &a, &mu, &cfg())?.value;
            col.equal(
                index,
                direct,
                shifted,
                || json!({"capacity": name, "f": f, "a": a}),
            );
        }
        Suite::LipschitzKernel => {
            let f = random_signed(&mut rng, step)?;
            let g = random_signed(&mut rng, step)?;
            let d = f.abs_diff(&g)?;
            let l1 = integral(&d, &IntervalUnion::full(), &mu)?;
            for _ in 0..5 {
                let t: f64 = rng.gen();
                let gap = (volterra_at(&f, t, &mu, &cfg())?.value
                    - volterra_at(&g, t, &mu, &cfg())?.value)
                    .abs();
                let kernel = volterra_at(&d, t, &mu, &cfg())?.value;
                col.check(
                    index,
                    kernel - gap,
                    || json!({"capacity": name, "f": f, "g": g, "t": t}),
                );
                col.check(
                    index,
                    l1 - kernel,
                    || json!({"capacity": name, "f": f, "g": g, "t": t}),
                );
            }
        }
        Suite::MonotoneOutput => {
            let f = random_nonneg(&mut rng, step)?;
            let v = apply_volterra(&f, &mu, 65, &cfg())?;
            let m = v
                .values()
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            col.check(index, m, || json!({"capacity": name, "f": f}));
        }
        Suite::VHomogeneity => {
            let f = random_nonneg(&mut rng, step)?;
            let v = apply_volterra(&f, &mu, 33, &cfg())?;
            for s in SCALES {
                let vs = apply_volterra(&f.scale(s), &mu, 33, &cfg())?;
                let diff = vs
                    .values()
                    .iter()
                    .zip(v.values())
                    .map(|(a, b)| (a - s * b).abs())
                    .fold(0.0, f64::max);
                col.check(
                    index,
                    -diff,
                    || json!({"capacity": name, "f": f, "scale": s}),
                );
            }
        }
        Suite::CapacityLaws | Suite::SpikeDemo => unreachable!("handled by run_suite"),
    }
    Ok(())
}

/// Iterates `f0 = 1` under `1 - e^{-t}` up to `n` and compares every
/// iterate with the closed form against its error budget.
fn orbit_suite(col: &mut Collector, n: usize) -> Result<()> {
    let mu = Capacity::distorted(DistortionFunction::ExpSaturation);
    let one = Function::Pwl(PiecewiseLinear::constant(1.0));
    let orbit = iterate_volterra(&one, n, &mu, DEFAULT_GRID, &cfg())?;
    for k in 1..=n {
        let it = &orbit.iterates[k];
        let mut worst: f64 = 0.0;
        for (&x, &y) in it.nodes().iter().zip(it.values()) {
            worst = worst.max((y - orbit_closed_form(k, x)?).abs());
        }
        let budget = orbit.budgets[k];
        col.check(
            k - 1,
            budget - worst,
            || json!({"iterate": k, "deviation": worst, "budget": budget}),
        );
    }
    Ok(())
}

/// Unit-norm spikes `f_e = 1_[0,e] / gamma(e)` in `L_{1,mu}` for
/// `e = 2^-1 ... 2^-n`: `V f_e` rises by `1` over `[0, e]`, so the images
/// share no modulus of continuity.
fn spike_demo(n: usize) -> Result<Value> {
    let mut rows = Vec::new();
    for gamma in DistortionFunction::catalog() {
        let mu = Capacity::distorted(gamma.clone());
        for k in 1..=n.min(40) {
            let e = 0.5f64.powi(k as i32);
            let c = 1.0 / gamma.value(e);
            let f = Function::Step(StepFunction::new(vec![0.0, e, 1.0], vec![c, 0.0])?);
            let norm = lp_norm(&f, &LpConfig::new(1.0)?, &mu)?;
            let rise = volterra_at(&f, e, &mu, &cfg())?.value;
            rows.push(json!({"capacity": mu.name(), "width": e, "l1_norm": norm, "rise": rise}));
        }
    }
    Ok(Value::Array(rows))
}

/// Operator whose orbit spans the approximation spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitOperator {
    Volterra,
    IdentityPlusVolterra,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpanRow {
    pub n: usize,
    pub target: usize,
    /// Smallest uniform error among the least-squares fits with `0..=n`
    /// orbit elements; nonincreasing in `n`.
    pub residual: f64,
    /// Root mean square least-squares residual on the grid.
    pub rms: f64,
    /// Uniform error of the least-squares fit with `0..=n` orbit elements.
    pub ls_uniform: f64,
    /// Columns kept after dropping numerically dependent ones.
    pub rank: usize,
}

/// Orbit of `f0 = 1` on a uniform grid, as node-value columns.
pub fn orbit_columns(
    operator: OrbitOperator,
    n_max: usize,
    mu: &Capacity,
    grid_size: usize,
) -> Result<Vec<Vec<f64>>> {
    let one = Function::Pwl(PiecewiseLinear::constant(1.0));
    match operator {
        OrbitOperator::Volterra => {
            let orbit = iterate_volterra(&one, n_max, mu, grid_size, &cfg())?;
            Ok(orbit.iterates.iter().map(|f| f.values().to_vec()).collect())
        }
        OrbitOperator::IdentityPlusVolterra => {
            let grid = PiecewiseLinear::uniform_grid(grid_size);
            let mut current = one.sample_on(grid)?;
            let mut cols = vec![current.values().to_vec()];
            for _ in 0..n_max {
                current = identity_plus_v(&Function::Pwl(current), mu, grid_size, &cfg())?;
                cols.push(current.values().to_vec());
            }
            Ok(cols)
        }
    }
}

/// Relative norm below which a new column counts as dependent.
const DEPENDENCE: f64 = 1e-12;

/// Least-squares residuals of each target against `span{orbit_0..orbit_n}`
/// for `n = 0..=n_max`, by modified Gram–Schmidt with reorthogonalization.
pub fn span_residual(
    targets: &[Function],
    n_max: usize,
    mu: &Capacity,
    grid_size: usize,
    operator: OrbitOperator,
) -> Result<Vec<SpanRow>> {
    if n_max == 0 {
        return Err(Error::usage("n_max must be at least 1"));
    }
    let cols = orbit_columns(operator, n_max, mu, grid_size)?;
    let grid = PiecewiseLinear::uniform_grid(grid_size);
    let m = grid.len() as f64;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept_after = Vec::with_capacity(cols.len());
    for col in &cols {
        let norm0 = dot(col, col).sqrt();
        let mut v = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let nv = dot(&v, &v).sqrt();
        if nv > DEPENDENCE * norm0 && nv > 0.0 {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
        kept_after.push(basis.len());
    }
    let mut rows = Vec::new();
    for (ti, target) in targets.iter().enumerate() {
        let y: Vec<f64> = grid.iter().map(|&t| target.eval(t)).collect();
        let mut r = y.clone();
        let mut used = 0;
        let mut best = f64::INFINITY;
        for n in 0..=n_max {
            while used < kept_after[n] {
                let q = &basis[used];
                for _ in 0..2 {
                    let c = dot(q, &r);
                    r.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
                }
                used += 1;
            }
            let ls_uniform = r.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            best = best.min(ls_uniform);
            rows.push(SpanRow {
                n,
                target: ti,
                residual: best,
                rms: (dot(&r, &r) / m).sqrt(),
                ls_uniform,
                rank: used,
            });
        }
    }
    Ok(rows)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
