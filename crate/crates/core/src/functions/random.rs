//! Seeded generators for property suites.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::capacities::{parse_capacity_spec, Capacity};
use crate::error::{Error, Result};
use crate::spaces::{lp_norm, LpConfig};

use super::{Function, PiecewiseLinear, StepFunction};

#[derive(Debug, Clone)]
pub enum FunctionClass {
    NonnegPwl,
    SignedPwl,
    Nondecreasing,
    Nonincreasing,
    Step,
    SignedStep,
    /// Nonnegative piecewise linear, rescaled into the unit ball of `L_{p,mu}`.
    UnitBall {
        p: f64,
        capacity: Capacity,
    },
}

impl FromStr for FunctionClass {
    type Err = Error;

    /// Names as used on the command line; the unit ball is written
    /// `unit-ball(2, exp-saturation)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "nonneg-pwl" => FunctionClass::NonnegPwl,
            "signed-pwl" => FunctionClass::SignedPwl,
            "nondecreasing" => FunctionClass::Nondecreasing,
            "nonincreasing" => FunctionClass::Nonincreasing,
            "step" => FunctionClass::Step,
            "signed-step" => FunctionClass::SignedStep,
            _ => {
                let inner = s
                    .strip_prefix("unit-ball(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::usage(format!("unknown function class {s:?}")))?;
                let (p, cap) = inner
                    .split_once(',')
                    .ok_or_else(|| Error::usage(format!("unit-ball needs (p, capacity): {s:?}")))?;
                let p: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::usage(format!("bad exponent in {s:?}")))?;
                FunctionClass::UnitBall {
                    p,
                    capacity: parse_capacity_spec(cap)?,
                }
            }
        })
    }
}

/// Per-sample seed derived from a suite seed and a sample index (splitmix64).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` strictly increasing grid points from `0` to `1` with random gaps.
fn random_grid(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let gaps: Vec<f64> = (0..n - 1).map(|_| 0.2 + rng.gen::<f64>()).collect();
    let total: f64 = gaps.iter().sum();
    let mut grid = Vec::with_capacity(n);
    let mut acc = 0.0;
    grid.push(0.0);
    for g in &gaps[..n - 2] {
        acc += g;
        grid.push(acc / total);
    }
    grid.push(1.0);
    grid
}

fn random_values(rng: &mut impl Rng, n: usize, signed: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            if signed {
                2.0 * u - 1.0
            } else {
                u
            }
        })
        .collect()
}

/// Deterministic function of `(seed, class, n_nodes)`. For step classes
/// `n_nodes` counts cell boundaries.
pub fn random_function(seed: u64, class: &FunctionClass, n_nodes: usize) -> Result<Function> {
    if n_nodes < 2 {
        return Err(Error::usage(format!(
            "n_nodes must be at least 2, got {n_nodes}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = random_grid(&mut rng, n_nodes);
    let pwl = |values: Vec<f64>| -> Result<Function> {
        Ok(Function::Pwl(PiecewiseLinear::new(grid.clone(), values)?))
    };
    match class {
        FunctionClass::NonnegPwl => pwl(random_values(&mut rng, n_nodes, false)),
        FunctionClass::SignedPwl => pwl(random_values(&mut rng, n_nodes, true)),
        FunctionClass::Nondecreasing => {
            let mut v = random_values(&mut rng, n_nodes, false);
            v.sort_by(f64::total_cmp);
            pwl(v)
        }
        FunctionClass::Nonincreasing => {
            let mut v = random_values(&mut rng, n_nodes, false);
            v.sort_by(|a, b| b.total_cmp(a));
            pwl(v)
        }
        FunctionClass::Step | FunctionClass::SignedStep => {
            let signed = matches!(class, FunctionClass::SignedStep);
            let v = random_values(&mut rng, n_nodes - 1, signed);
            Ok(Function::Step(StepFunction::new(grid, v)?))
        }
        FunctionClass::UnitBall { p, capacity } => {
            let f = pwl(random_values(&mut rng, n_nodes, false))?;
            let norm = lp_norm(&f, &LpConfig::new(*p)?, capacity)?;
            Ok(if norm > 0.0 { f.scale(1.0 / norm) } else { f })
        }
    }
}

/// `phi ∘ f` for a nondecreasing piecewise linear `phi` given by sorted
/// breakpoints `xs` (covering the range of `f`) and values `ys`.
fn compose(f: &Function, xs: &[f64], ys: &[f64]) -> Result<Function> {
    let phi = |v: f64| {
        let i = xs.partition_point(|&x| x <= v).clamp(1, xs.len() - 1) - 1;
        let s = ((v - xs[i]) / (xs[i + 1] - xs[i])).clamp(0.0, 1.0);
        (1.0 - s) * ys[i] + s * ys[i + 1]
    };
    match f {
        Function::Step(s) => Ok(Function::Step(StepFunction::new(
            s.boundaries().to_vec(),
            s.values().iter().map(|&v| phi(v)).collect(),
        )?)),
        Function::Pwl(p) => {
            let (n, v) = (p.nodes(), p.values());
            let mut nodes = vec![n[0]];
            for i in 0..n.len() - 1 {
                let (lo, hi) = (v[i].min(v[i + 1]), v[i].max(v[i + 1]));
                let mut crossings: Vec<f64> = xs
                    .iter()
                    .filter(|&&x| x > lo && x < hi)
                    .map(|&x| n[i] + (x - v[i]) / (v[i + 1] - v[i]) * (n[i + 1] - n[i]))
                    .filter(|&t| t > n[i] && t < n[i + 1])
                    .collect();
                crossings.sort_by(f64::total_cmp);
                nodes.extend(crossings);
                nodes.push(n[i + 1]);
            }
            nodes.dedup();
            Ok(Function::Pwl(PiecewiseLinear::interpolate(nodes, |t| {
                phi(p.eval(t))
            })?))
        }
    }
}

/// A comonotone pair `(f, phi ∘ f)` with `phi` a random nondecreasing map.
/// `step` selects signed step functions instead of signed piecewise linear ones.
pub fn comonotone_pair(seed: u64, n_nodes: usize, step: bool) -> Result<(Function, Function)> {
    let class = if step {
        FunctionClass::SignedStep
    } else {
        FunctionClass::SignedPwl
    };
    let f = random_function(seed, &class, n_nodes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    let (lo, hi) = f.range();
    if !(hi > lo) {
        return Ok((f.clone(), f));
    }
    let k = rng.gen_range(1..=4);
    let mut xs: Vec<f64> = (0..k).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect();
    xs.push(lo);
    xs.push(hi);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut ys = random_values(&mut rng, xs.len(), true);
    ys.sort_by(f64::total_cmp);
    let g = compose(&f, &xs, &ys)?;
    Ok((f, g))
}
