//! Gauss–Legendre rules and a globally adaptive bisection integrator.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Upper bound on leaf segments per call, whatever the tolerance.
pub const MAX_LEAVES: usize = 200_000;

/// `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    /// Nodes by Newton iteration on `P_n` from Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::usage(format!(
                "Gauss order must be at least 2, got {n}"
            )));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(GaussRule { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Rule mapped onto `[a, b]`. Nodes are strictly inside the interval.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOutcome {
    pub value: f64,
    pub error: f64,
    pub leaves: usize,
    pub converged: bool,
}

#[derive(Debug)]
struct Segment {
    owner: usize,
    a: f64,
    b: f64,
    depth: usize,
    left: f64,
    right: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.owner.cmp(&self.owner))
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Integrates `f(owner, x)` over every `(a, b)` of `intervals` and sums the
/// results.
///
/// Each segment is estimated by the rule on its two halves; the difference
/// to the rule on the whole segment is its error. The segment with the
/// largest error is bisected until the summed error is at most `tolerance`,
/// a segment hits `max_depth`, or [`MAX_LEAVES`] is reached.
pub fn integrate_adaptive(
    intervals: &[(f64, f64)],
    rule: &GaussRule,
    tolerance: f64,
    max_depth: usize,
    f: impl Fn(usize, f64) -> f64,
) -> AdaptiveOutcome {
    let make = |owner: usize, a: f64, b: f64, depth: usize, whole: f64| {
        let m = 0.5 * (a + b);
        let left = rule.integrate(a, m, |x| f(owner, x));
        let right = rule.integrate(m, b, |x| f(owner, x));
        Segment {
            owner,
            a,
            b,
            depth,
            left,
            right,
            error: (left + right - whole).abs(),
        }
    };

    let mut heap = BinaryHeap::with_capacity(intervals.len());
    let mut frozen = Vec::new();
    let mut total_error = 0.0;
    for (owner, &(a, b)) in intervals.iter().enumerate() {
        if !(b > a) {
            continue;
        }
        let whole = rule.integrate(a, b, |x| f(owner, x));
        let seg = make(owner, a, b, 0, whole);
        total_error += seg.error;
        heap.push(seg);
    }

    while total_error > tolerance {
        let Some(seg) = heap.pop() else { break };
        if heap.len() + frozen.len() + 1 >= MAX_LEAVES {
            heap.push(seg);
            break;
        }
        if seg.depth >= max_depth {
            frozen.push(seg);
            continue;
        }
        let m = 0.5 * (seg.a + seg.b);
        if !(m > seg.a && m < seg.b) {
            frozen.push(seg);
            continue;
        }
        let l = make(seg.owner, seg.a, m, seg.depth + 1, seg.left);
        let r = make(seg.owner, m, seg.b, seg.depth + 1, seg.right);
        total_error += l.error + r.error - seg.error;
        heap.push(l);
        heap.push(r);
    }

    let mut leaves: Vec<Segment> = heap.into_vec();
    leaves.extend(frozen);
    leaves.sort_by(|x, y| x.owner.cmp(&y.owner).then(x.a.total_cmp(&y.a)));
    let value = leaves.iter().map(|s| s.left + s.right).sum();
    let error: f64 = leaves.iter().map(|s| s.error).sum();
    AdaptiveOutcome {
        value,
        error,
        leaves: leaves.len(),
        converged: error <= tolerance,
    }
}
