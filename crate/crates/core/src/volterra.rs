//! The operator `V(f)(x) = (C)∫_0^x f dmu`, its orbits, `I + V`, and norm
//! estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::capacities::Capacity;
use crate::choquet::{choquet_integral_of, IntegralResult, QuadratureConfig};
use crate::error::{Error, Result};
use crate::functions::{
    derive_seed, random_function, Function, FunctionClass, Integrand, PiecewiseLinear,
};
use crate::intervals::IntervalUnion;
use crate::spaces::{lp_norm, LpConfig};

/// Grid used when iterating the operator.
pub const DEFAULT_GRID: usize = 1025;

/// `V f` on a grid together with the quadrature diagnostics.
#[derive(Debug, Clone)]
pub struct VolterraImage {
    pub function: PiecewiseLinear,
    /// Largest error estimate over the grid nodes.
    pub max_error: f64,
    pub converged: bool,
}

/// `V(f)(x)` for a single `x`.
pub fn volterra_at(
    f: &Function,
    x: f64,
    mu: &Capacity,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    volterra_at_integrand(&Integrand::from_function(f), x, mu, cfg)
}

fn volterra_at_integrand(
    intg: &Integrand,
    x: f64,
    mu: &Capacity,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    let a = IntervalUnion::interval(0.0, x)?;
    choquet_integral_of(intg, &a, mu, cfg)
}

/// `V f` at the given nodes, each value an independent integral over `[0, x]`.
fn volterra_on_nodes(
    f: &Function,
    nodes: Vec<f64>,
    mu: &Capacity,
    cfg: &QuadratureConfig,
) -> Result<VolterraImage> {
    let intg = Integrand::from_function(f);
    let mut values = Vec::with_capacity(nodes.len());
    let mut max_error: f64 = 0.0;
    let mut converged = true;
    for &x in &nodes {
        if x == 0.0 {
            values.push(0.0);
            continue;
        }
        let r = volterra_at_integrand(&intg, x, mu, cfg)?;
        max_error = max_error.max(r.error_estimate);
        converged &= r.converged;
        values.push(r.value);
    }
    Ok(VolterraImage {
        function: PiecewiseLinear::new(nodes, values)?,
        max_error,
        converged,
    })
}

fn check_grid_size(grid_size: usize) -> Result<()> {
    if grid_size < 2 {
        return Err(Error::usage(format!(
            "grid size must be at least 2, got {grid_size}"
        )));
    }
    Ok(())
}

/// Interpolant of `V f` on a uniform grid of `grid_size` nodes.
pub fn apply_volterra(
    f: &Function,
    mu: &Capacity,
    grid_size: usize,
    cfg: &QuadratureConfig,
) -> Result<PiecewiseLinear> {
    Ok(apply_volterra_detailed(f, mu, grid_size, cfg)?.function)
}

pub fn apply_volterra_detailed(
    f: &Function,
    mu: &Capacity,
    grid_size: usize,
    cfg: &QuadratureConfig,
) -> Result<VolterraImage> {
    check_grid_size(grid_size)?;
    volterra_on_nodes(f, PiecewiseLinear::uniform_grid(grid_size), mu, cfg)
}

/// `f + V f` for piecewise linear `f`, on the union of the uniform grid and
/// the nodes of `f`.
pub fn identity_plus_v(
    f: &Function,
    mu: &Capacity,
    grid_size: usize,
    cfg: &QuadratureConfig,
) -> Result<PiecewiseLinear> {
    check_grid_size(grid_size)?;
    let pwl = f.as_pwl().ok_or_else(|| {
        Error::domain("I + V of a step function is not piecewise linear; sample it first")
    })?;
    let mut nodes = PiecewiseLinear::uniform_grid(grid_size);
    nodes.extend_from_slice(pwl.nodes());
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let vf = volterra_on_nodes(f, nodes, mu, cfg)?.function;
    Ok(vf.add(pwl))
}

/// `[f0, V f0, ..., V^n f0]` on a shared uniform grid.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitRecord {
    pub grid_size: usize,
    /// Iterates sampled on the grid; element `0` is `f0` itself sampled there.
    pub iterates: Vec<PiecewiseLinear>,
    /// Bound on `max |iterate_k - V^k f0|` from quadrature, interpolation
    /// and the Lipschitz constant `mu([0,1])`.
    pub budgets: Vec<f64>,
    pub converged: bool,
}

/// Interpolation error estimate `h^2 max|g''| / 8` from second differences,
/// doubled for safety.
fn interpolation_error(g: &PiecewiseLinear) -> f64 {
    g.values()
        .windows(3)
        .map(|w| (w[0] - 2.0 * w[1] + w[2]).abs())
        .fold(0.0, f64::max)
        / 4.0
}

/// Iterates `V` `n` times starting from `f0`. The first application uses
/// `f0` exactly; later ones use the previous grid interpolant.
pub fn iterate_volterra(
    f0: &Function,
    n: usize,
    mu: &Capacity,
    grid_size: usize,
    cfg: &QuadratureConfig,
) -> Result<OrbitRecord> {
    check_grid_size(grid_size)?;
    let grid = PiecewiseLinear::uniform_grid(grid_size);
    let lipschitz = mu.total()?;
    let mut iterates = vec![f0.sample_on(grid.clone())?];
    let mut budgets = vec![0.0];
    let mut converged = true;
    let mut current = f0.clone();
    for _ in 0..n {
        let image = volterra_on_nodes(&current, grid.clone(), mu, cfg)?;
        let prev_budget = *budgets.last().unwrap();
        let budget =
            lipschitz * prev_budget + interpolation_error(&image.function) + image.max_error;
        converged &= image.converged;
        budgets.push(budget);
        current = Function::Pwl(image.function.clone());
        iterates.push(image.function);
    }
    Ok(OrbitRecord {
        grid_size,
        iterates,
        budgets,
        converged,
    })
}

/// `1 - e^{-x} sum_{k<n} x^k / k!`, the `n`-th iterate of `f0 = 1` under
/// `gamma(t) = 1 - e^{-t}`. Evaluated as the tail `e^{-x} sum_{k>=n} x^k/k!`.
pub fn orbit_closed_form(n: usize, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("closed form is defined for n >= 1"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x = {x} is outside [0, 1]")));
    }
    let mut term = 1.0;
    for k in 1..=n {
        term *= x / k as f64;
    }
    // term = x^n / n!
    let mut tail = 0.0;
    let mut k = n;
    while term > 0.0 && term > tail * 1e-18 {
        tail += term;
        k += 1;
        term *= x / k as f64;
    }
    Ok((-x).exp() * tail)
}

/// Largest singular value of the midpoint discretization of the classical
/// operator `∫_0^x f`, by power iteration on `A^T A`.
///
/// `A = h T` with `T` lower triangular ones and `1/2` on the diagonal, one
/// row per grid cell.
pub fn classical_opnorm(mu: &Capacity, grid_size: usize, power_iters: usize) -> Result<f64> {
    if !mu.is_identity() {
        return Err(Error::usage(format!(
            "the adjoint exists only for the linear case; {} is not the identity distortion",
            mu.name()
        )));
    }
    if grid_size < 64 {
        return Err(Error::usage(format!(
            "grid size must be at least 64, got {grid_size}"
        )));
    }
    if power_iters == 0 {
        return Err(Error::usage("power iteration needs at least one step"));
    }
    let n = grid_size - 1;
    let h = 1.0 / n as f64;
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        v.iter()
            .map(|&x| {
                let out = h * (acc + 0.5 * x);
                acc += x;
                out
            })
            .collect()
    };
    let apply_t = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        let mut acc = 0.0;
        for i in (0..v.len()).rev() {
            out[i] = h * (acc + 0.5 * v[i]);
            acc += v[i];
        }
        out
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..power_iters {
        let w = apply_t(&apply(&v));
        let nw = norm(&w);
        v = w.into_iter().map(|x| x / nw).collect();
    }
    Ok(norm(&apply(&v)))
}

/// Grid used for the operator images in Lipschitz ratios.
pub const LIPSCHITZ_GRID: usize = 257;

/// `||V f - V g||_{p,mu} / ||f - g||_{p,mu}` with the images taken on a
/// uniform grid of `grid_size` nodes.
pub fn lipschitz_ratio(
    f: &Function,
    g: &Function,
    mu: &Capacity,
    cfg: &LpConfig,
    grid_size: usize,
) -> Result<f64> {
    let quad = QuadratureConfig::default();
    let diff = f.sub(g)?;
    let den = lp_norm(&diff, cfg, mu)?;
    if den == 0.0 {
        return Err(Error::usage("Lipschitz ratio needs f != g"));
    }
    let vf = apply_volterra(f, mu, grid_size, &quad)?;
    let vg = apply_volterra(g, mu, grid_size, &quad)?;
    let num = lp_norm(&Function::Pwl(vf.sub(&vg)), cfg, mu)?;
    Ok(num / den)
}

/// Largest sampled Lipschitz ratio over random signed pairs; a lower bound
/// on the Lipschitz norm of `V` in `L_{p,mu}`.
pub fn lipschitz_norm_estimate(
    mu: &Capacity,
    cfg: &LpConfig,
    seed: u64,
    n_samples: usize,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::usage("need at least one pair of distinct functions"));
    }
    let mut best: f64 = 0.0;
    for i in 0..n_samples {
        let (f, g) = random_distinct_pair(derive_seed(seed, i as u64))?;
        best = best.max(lipschitz_ratio(&f, &g, mu, cfg, LIPSCHITZ_GRID)?);
    }
    Ok(best)
}

/// Two different signed piecewise linear functions.
pub(crate) fn random_distinct_pair(seed: u64) -> Result<(Function, Function)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = rng.gen_range(2..=9);
    let ng = rng.gen_range(2..=9);
    let f = random_function(rng.gen(), &FunctionClass::SignedPwl, nf)?;
    let mut g = random_function(rng.gen(), &FunctionClass::SignedPwl, ng)?;
    if f.abs_diff(&g)?.uniform_norm() == 0.0 {
        g = g.shift(1.0);
    }
    Ok((f, g))
}
