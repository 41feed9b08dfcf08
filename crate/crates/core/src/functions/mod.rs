//! Integrands on `[0, 1]`: piecewise linear and step functions.
//!
//! Both representations carry exact range bounds, exact superlevel sets, and
//! an exact pointwise algebra on merged grids. [`Integrand`] generalizes them
//! to cellwise monotone pieces so that `|f|^p` and `|f g|` can be integrated
//! without resampling.

mod integrand;
mod random;
mod spec;

pub(crate) use integrand::superlevel_of_pieces as integrand_superlevel;
pub use integrand::{Integrand, Piece, PieceShape};
pub use random::{comonotone_pair, derive_seed, random_function, FunctionClass};
pub use spec::{parse_function_spec, FunctionSpec, Preset};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::intervals::IntervalUnion;

/// Nodes closer than this are treated as one node when grids are merged.
const NODE_MERGE: f64 = 1e-15;

/// Subcells per grid cell used when resampling `f^p`.
pub const POWER_REFINEMENT: usize = 8;

/// Continuous piecewise linear function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinear {
    nodes: Vec<f64>,
    values: Vec<f64>,
    #[serde(skip)]
    min: f64,
    #[serde(skip)]
    max: f64,
}

/// Step function constant on the right-open cells `[s_{i-1}, s_i)`; the last
/// cell also contains `1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFunction {
    #[serde(rename = "nodes")]
    boundaries: Vec<f64>,
    values: Vec<f64>,
    #[serde(skip)]
    min: f64,
    #[serde(skip)]
    max: f64,
}

/// Either supported representation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Function {
    Pwl(PiecewiseLinear),
    Step(StepFunction),
}

/// Pointwise operations of [`Function::pointwise_map`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointwiseOp {
    AbsDiff,
    Sum,
    Scale(f64),
    Shift(f64),
    Power(f64),
}

fn check_grid(nodes: &[f64], what: &str) -> Result<()> {
    if nodes.len() < 2 {
        return Err(Error::domain(format!(
            "{what} needs at least two grid points"
        )));
    }
    if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
        return Err(Error::domain(format!(
            "{what} grid must start at 0 and end at 1"
        )));
    }
    if nodes.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain(format!(
            "{what} grid must be strictly increasing"
        )));
    }
    Ok(())
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

fn check_point(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "evaluation point {t} is outside [0, 1]"
        )))
    }
}

/// Sorted union of two grids; near-coincident nodes collapse to one.
fn merge_grids(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for t in all {
        match out.last() {
            Some(&last) if t - last < NODE_MERGE => {}
            _ => out.push(t),
        }
    }
    // keep the exact endpoint 1
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

impl PiecewiseLinear {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&nodes, "piecewise linear function")?;
        if nodes.len() != values.len() {
            return Err(Error::domain(format!(
                "{} nodes but {} values",
                nodes.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("function values must be finite"));
        }
        let (min, max) = min_max(&values);
        Ok(PiecewiseLinear {
            nodes,
            values,
            min,
            max,
        })
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![0.0, 1.0], vec![c, c]).expect("valid constant")
    }

    /// The ramp `f(t) = t`.
    pub fn identity() -> Self {
        Self::new(vec![0.0, 1.0], vec![0.0, 1.0]).expect("valid ramp")
    }

    /// Uniform grid with `n_nodes` nodes, `k / (n_nodes - 1)`.
    pub fn uniform_grid(n_nodes: usize) -> Vec<f64> {
        let last = (n_nodes - 1) as f64;
        (0..n_nodes).map(|k| k as f64 / last).collect()
    }

    /// Interpolant of `g` on the given grid.
    pub fn interpolate(nodes: Vec<f64>, g: impl Fn(f64) -> f64) -> Result<Self> {
        let values = nodes.iter().map(|&t| g(t)).collect();
        Self::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(M', M)`: minimum and maximum value.
    pub fn range(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    fn segment(&self, t: f64) -> usize {
        let i = self.nodes.partition_point(|&x| x <= t);
        i.saturating_sub(1).min(self.nodes.len() - 2)
    }

    /// Value at `t`, without the domain check; `t` is clamped into `[0, 1]`.
    pub(crate) fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        let i = self.segment(t);
        let (t0, t1) = (self.nodes[i], self.nodes[i + 1]);
        let s = (t - t0) / (t1 - t0);
        (1.0 - s) * self.values[i] + s * self.values[i + 1]
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        check_point(t)?;
        Ok(self.eval(t))
    }

    /// `{t : f(t) >= beta}`, solved exactly on each linear piece.
    pub fn superlevel(&self, beta: f64) -> IntervalUnion {
        if beta <= self.min {
            return IntervalUnion::full();
        }
        if beta > self.max {
            return IntervalUnion::empty();
        }
        let mut parts = Vec::new();
        for i in 0..self.nodes.len() - 1 {
            let (t0, t1) = (self.nodes[i], self.nodes[i + 1]);
            let (v0, v1) = (self.values[i], self.values[i + 1]);
            match (v0 >= beta, v1 >= beta) {
                (true, true) => parts.push((t0, t1)),
                (false, false) => {}
                (false, true) => {
                    let cut = t0 + (beta - v0) / (v1 - v0) * (t1 - t0);
                    parts.push((cut.clamp(t0, t1), t1));
                }
                (true, false) => {
                    let cut = t0 + (v0 - beta) / (v0 - v1) * (t1 - t0);
                    parts.push((t0, cut.clamp(t0, t1)));
                }
            }
        }
        IntervalUnion::from_valid_parts(parts)
    }

    /// Exact Lebesgue integral over `[a, b]`.
    pub fn lebesgue_integral(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.nodes.len() - 1 {
            let lo = self.nodes[i].max(a);
            let hi = self.nodes[i + 1].min(b);
            if lo < hi {
                total += 0.5 * (hi - lo) * (self.eval(lo) + self.eval(hi));
            }
        }
        total
    }

    fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Self {
        let nodes = merge_grids(&self.nodes, &other.nodes);
        let values = nodes
            .iter()
            .map(|&t| op(self.eval(t), other.eval(t)))
            .collect();
        Self::new(nodes, values).expect("merged grid is valid")
    }

    fn map_values(&self, op: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| op(v)).collect();
        Self::new(self.nodes.clone(), values).expect("same grid")
    }

    /// `|f|` with every interior root inserted as a node, so the result is exact.
    pub fn abs(&self) -> Self {
        let mut nodes = vec![self.nodes[0]];
        let mut values = vec![self.values[0].abs()];
        for i in 0..self.nodes.len() - 1 {
            let (t0, t1) = (self.nodes[i], self.nodes[i + 1]);
            let (v0, v1) = (self.values[i], self.values[i + 1]);
            if (v0 < 0.0 && v1 > 0.0) || (v0 > 0.0 && v1 < 0.0) {
                let root = t0 + v0 / (v0 - v1) * (t1 - t0);
                if root > t0 && root < t1 {
                    nodes.push(root);
                    values.push(0.0);
                }
            }
            nodes.push(t1);
            values.push(v1.abs());
        }
        Self::new(nodes, values).expect("refined grid is valid")
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn abs_diff(&self, other: &Self) -> Self {
        self.sub(other).abs()
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map_values(|v| a * v)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map_values(|v| v + c)
    }

    /// Interpolant of `f^p` after splitting each cell into
    /// [`POWER_REFINEMENT`] subcells. Needs `f >= 0`.
    pub fn power(&self, p: f64) -> Result<Self> {
        if self.min < 0.0 {
            return Err(Error::domain(format!(
                "power({p}) needs a nonnegative function, minimum is {}",
                self.min
            )));
        }
        let mut nodes = Vec::with_capacity((self.nodes.len() - 1) * POWER_REFINEMENT + 1);
        nodes.push(0.0);
        for w in self.nodes.windows(2) {
            for k in 1..POWER_REFINEMENT {
                nodes.push(w[0] + (w[1] - w[0]) * k as f64 / POWER_REFINEMENT as f64);
            }
            nodes.push(w[1]);
        }
        Self::interpolate(nodes, |t| self.eval(t).max(0.0).powf(p))
    }

    pub fn is_nondecreasing(&self, slack: f64) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - slack)
    }

    pub fn is_nonincreasing(&self, slack: f64) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

impl StepFunction {
    pub fn new(boundaries: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&boundaries, "step function")?;
        if values.len() + 1 != boundaries.len() {
            return Err(Error::domain(format!(
                "{} cell boundaries need {} values, got {}",
                boundaries.len(),
                boundaries.len() - 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("function values must be finite"));
        }
        let (min, max) = min_max(&values);
        Ok(StepFunction {
            boundaries,
            values,
            min,
            max,
        })
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![0.0, 1.0], vec![c]).expect("valid constant")
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn range(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    fn cell(&self, t: f64) -> usize {
        let i = self.boundaries.partition_point(|&s| s <= t);
        i.saturating_sub(1).min(self.values.len() - 1)
    }

    pub(crate) fn eval(&self, t: f64) -> f64 {
        self.values[self.cell(t.clamp(0.0, 1.0))]
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        check_point(t)?;
        Ok(self.eval(t))
    }

    /// Union of the closed cells whose value is at least `beta`.
    pub fn superlevel(&self, beta: f64) -> IntervalUnion {
        let parts = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, &c)| c >= beta)
            .map(|(i, _)| (self.boundaries[i], self.boundaries[i + 1]))
            .collect();
        IntervalUnion::from_valid_parts(parts)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Self {
        let boundaries = merge_grids(&self.boundaries, &other.boundaries);
        let values = boundaries
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                op(self.eval(mid), other.eval(mid))
            })
            .collect();
        Self::new(boundaries, values).expect("merged grid is valid")
    }

    fn map_values(&self, op: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| op(v)).collect();
        Self::new(self.boundaries.clone(), values).expect("same grid")
    }
}

impl Function {
    pub fn range(&self) -> (f64, f64) {
        match self {
            Function::Pwl(f) => f.range(),
            Function::Step(f) => f.range(),
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        match self {
            Function::Pwl(f) => f.evaluate(t),
            Function::Step(f) => f.evaluate(t),
        }
    }

    pub(crate) fn eval(&self, t: f64) -> f64 {
        match self {
            Function::Pwl(f) => f.eval(t),
            Function::Step(f) => f.eval(t),
        }
    }

    pub fn superlevel(&self, beta: f64) -> IntervalUnion {
        match self {
            Function::Pwl(f) => f.superlevel(beta),
            Function::Step(f) => f.superlevel(beta),
        }
    }

    /// Grid points: nodes of a piecewise linear function, cell boundaries of
    /// a step function.
    pub fn grid(&self) -> &[f64] {
        match self {
            Function::Pwl(f) => f.nodes(),
            Function::Step(f) => f.boundaries(),
        }
    }

    /// `max |f|`, attained at a node or on a cell.
    pub fn uniform_norm(&self) -> f64 {
        let (lo, hi) = self.range();
        lo.abs().max(hi.abs())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.range().0 >= 0.0
    }

    pub fn as_pwl(&self) -> Option<&PiecewiseLinear> {
        match self {
            Function::Pwl(f) => Some(f),
            Function::Step(_) => None,
        }
    }

    /// Applies a unary or binary pointwise operation.
    ///
    /// Binary operations (`AbsDiff`, `Sum`) need `other` of the same
    /// representation; the grids are merged first.
    pub fn pointwise_map(&self, other: Option<&Function>, op: PointwiseOp) -> Result<Function> {
        use PointwiseOp::*;
        match op {
            AbsDiff | Sum => {
                let other = other.ok_or_else(|| {
                    Error::usage(format!(
                        "{op:?} is a binary operation and needs a second function"
                    ))
                })?;
                match (self, other) {
                    (Function::Pwl(f), Function::Pwl(g)) => Ok(Function::Pwl(if op == Sum {
                        f.add(g)
                    } else {
                        f.abs_diff(g)
                    })),
                    (Function::Step(f), Function::Step(g)) => Ok(Function::Step(if op == Sum {
                        f.zip_with(g, |a, b| a + b)
                    } else {
                        f.zip_with(g, |a, b| (a - b).abs())
                    })),
                    _ => Err(Error::usage(
                        "binary pointwise operations need two functions of the same representation",
                    )),
                }
            }
            Scale(a) => Ok(match self {
                Function::Pwl(f) => Function::Pwl(f.scale(a)),
                Function::Step(f) => Function::Step(f.map_values(|v| a * v)),
            }),
            Shift(c) => Ok(match self {
                Function::Pwl(f) => Function::Pwl(f.shift(c)),
                Function::Step(f) => Function::Step(f.map_values(|v| v + c)),
            }),
            Power(p) => match self {
                Function::Pwl(f) => Ok(Function::Pwl(f.power(p)?)),
                Function::Step(f) => {
                    if f.min < 0.0 {
                        return Err(Error::domain(format!(
                            "power({p}) needs a nonnegative function, minimum is {}",
                            f.min
                        )));
                    }
                    Ok(Function::Step(f.map_values(|v| v.powf(p))))
                }
            },
        }
    }

    pub fn scale(&self, a: f64) -> Function {
        self.pointwise_map(None, PointwiseOp::Scale(a))
            .expect("unary")
    }

    pub fn shift(&self, c: f64) -> Function {
        self.pointwise_map(None, PointwiseOp::Shift(c))
            .expect("unary")
    }

    pub fn add(&self, other: &Function) -> Result<Function> {
        self.pointwise_map(Some(other), PointwiseOp::Sum)
    }

    pub fn sub(&self, other: &Function) -> Result<Function> {
        self.add(&other.scale(-1.0))
    }

    pub fn abs_diff(&self, other: &Function) -> Result<Function> {
        self.pointwise_map(Some(other), PointwiseOp::AbsDiff)
    }

    /// Piecewise linear interpolant at the given grid nodes.
    pub fn sample_on(&self, nodes: Vec<f64>) -> Result<PiecewiseLinear> {
        PiecewiseLinear::interpolate(nodes, |t| self.eval(t))
    }
}

impl From<PiecewiseLinear> for Function {
    fn from(f: PiecewiseLinear) -> Self {
        Function::Pwl(f)
    }
}

impl From<StepFunction> for Function {
    fn from(f: StepFunction) -> Self {
        Function::Step(f)
    }
}
