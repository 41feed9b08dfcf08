//! Integrands as lists of monotone pieces.
//!
//! A piece covers `[t0, t1]` and moves monotonically from `v0` to `v1`. Its
//! shape fixes how the value varies in between, so the length of the part
//! above a level `beta` can be solved in closed form. Piecewise linear and
//! step functions give affine pieces; `|f|^p` and `|f g|` give power and
//! quadratic pieces without any resampling.

use crate::error::{Error, Result};
use crate::intervals::IntervalUnion;

use super::Function;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PieceShape {
    /// Linear in `t` between `v0` and `v1` (constant when they agree).
    Affine,
    /// `l(t)^p` where `l` is linear from `l0` to `l1`, both nonnegative.
    AbsPower { l0: f64, l1: f64, p: f64 },
    /// `c0 + c1 u + c2 u^2` with `u = (t - t0) / (t1 - t0)`, monotone on `[0, 1]`.
    Quadratic { c0: f64, c1: f64, c2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub t0: f64,
    pub t1: f64,
    pub v0: f64,
    pub v1: f64,
    pub shape: PieceShape,
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    (1.0 - s) * a + s * b
}

impl Piece {
    fn affine(t0: f64, t1: f64, v0: f64, v1: f64) -> Self {
        Piece {
            t0,
            t1,
            v0,
            v1,
            shape: PieceShape::Affine,
        }
    }

    fn abs_power(t0: f64, t1: f64, l0: f64, l1: f64, p: f64) -> Self {
        if p == 1.0 {
            return Self::affine(t0, t1, l0, l1);
        }
        Piece {
            t0,
            t1,
            v0: l0.powf(p),
            v1: l1.powf(p),
            shape: PieceShape::AbsPower { l0, l1, p },
        }
    }

    fn quadratic(t0: f64, t1: f64, c0: f64, c1: f64, c2: f64) -> Self {
        if c2 == 0.0 {
            return Self::affine(t0, t1, c0, c0 + c1);
        }
        Piece {
            t0,
            t1,
            v0: c0,
            v1: (c0 + c1 + c2).max(0.0),
            shape: PieceShape::Quadratic { c0, c1, c2 },
        }
    }

    pub fn width(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn lo(&self) -> f64 {
        self.v0.min(self.v1)
    }

    pub fn hi(&self) -> f64 {
        self.v0.max(self.v1)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let w = self.width();
        let u = if w > 0.0 {
            ((t - self.t0) / w).clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.value_at_fraction(u)
    }

    fn value_at_fraction(&self, u: f64) -> f64 {
        match self.shape {
            PieceShape::Affine => lerp(self.v0, self.v1, u),
            PieceShape::AbsPower { l0, l1, p } => lerp(l0, l1, u).max(0.0).powf(p),
            PieceShape::Quadratic { c0, c1, c2 } => (c0 + u * (c1 + u * c2)).max(0.0),
        }
    }

    /// Fraction `u` in `[0, 1]` where the piece crosses `beta`, for
    /// `lo < beta < hi`.
    fn crossing(&self, beta: f64) -> f64 {
        let u = match self.shape {
            PieceShape::Affine => (beta - self.v0) / (self.v1 - self.v0),
            PieceShape::AbsPower { l0, l1, p } => (beta.powf(1.0 / p) - l0) / (l1 - l0),
            PieceShape::Quadratic { c0, c1, c2 } => quadratic_crossing(c0, c1, c2, beta),
        };
        u.clamp(0.0, 1.0)
    }

    /// Length of `{t in [t0, t1] : value(t) >= beta}`.
    pub fn length_above(&self, beta: f64) -> f64 {
        if beta <= self.lo() {
            return self.width();
        }
        if beta > self.hi() {
            return 0.0;
        }
        let w = self.width();
        let rising = self.v1 > self.v0;
        let frac = match self.shape {
            PieceShape::Affine => {
                if rising {
                    (self.v1 - beta) / (self.v1 - self.v0)
                } else {
                    (self.v0 - beta) / (self.v0 - self.v1)
                }
            }
            PieceShape::AbsPower { l0, l1, p } => {
                let level = beta.powf(1.0 / p);
                if rising {
                    (l1 - level) / (l1 - l0)
                } else {
                    (l0 - level) / (l0 - l1)
                }
            }
            PieceShape::Quadratic { .. } => {
                let u = self.crossing(beta);
                if rising {
                    1.0 - u
                } else {
                    u
                }
            }
        };
        w * frac.clamp(0.0, 1.0)
    }

    /// The part of the piece at or above `beta`, as a closed interval.
    pub fn superlevel_part(&self, beta: f64) -> Option<(f64, f64)> {
        if beta > self.hi() {
            return None;
        }
        let len = self.length_above(beta);
        if self.v1 >= self.v0 {
            Some(((self.t1 - len).max(self.t0), self.t1))
        } else {
            Some((self.t0, (self.t0 + len).min(self.t1)))
        }
    }

    /// Restriction to `[a, b]`; `None` when the overlap has no interior.
    pub fn clip(&self, a: f64, b: f64) -> Option<Piece> {
        let lo = self.t0.max(a);
        let hi = self.t1.min(b);
        if !(lo < hi) {
            return None;
        }
        if lo == self.t0 && hi == self.t1 {
            return Some(*self);
        }
        let w = self.width();
        let (ua, ub) = ((lo - self.t0) / w, (hi - self.t0) / w);
        Some(match self.shape {
            PieceShape::Affine => Piece::affine(
                lo,
                hi,
                self.value_at_fraction(ua),
                self.value_at_fraction(ub),
            ),
            PieceShape::AbsPower { l0, l1, p } => Piece::abs_power(
                lo,
                hi,
                lerp(l0, l1, ua).max(0.0),
                lerp(l0, l1, ub).max(0.0),
                p,
            ),
            PieceShape::Quadratic { c0, c1, c2 } => {
                let s = ub - ua;
                let n0 = (c0 + ua * (c1 + ua * c2)).max(0.0);
                let n1 = (c1 + 2.0 * c2 * ua) * s;
                let n2 = c2 * s * s;
                Piece::quadratic(lo, hi, n0, n1, n2)
            }
        })
    }
}

/// Solves `c0 + c1 u + c2 u^2 = beta` for the root in `[0, 1]` of a
/// quadratic that is monotone there.
fn quadratic_crossing(c0: f64, c1: f64, c2: f64, beta: f64) -> f64 {
    let q = |u: f64| c0 + u * (c1 + u * c2);
    let c = c0 - beta;
    let mut candidates = Vec::with_capacity(2);
    if c2.abs() <= 1e-14 * (c1.abs() + c0.abs()) {
        if c1 != 0.0 {
            candidates.push(-c / c1);
        }
    } else {
        let disc = (c1 * c1 - 4.0 * c2 * c).max(0.0);
        let qq = -0.5 * (c1 + c1.signum() * disc.sqrt());
        if qq != 0.0 {
            candidates.push(qq / c2);
            candidates.push(c / qq);
        } else {
            candidates.push(0.0);
        }
    }
    let best = candidates
        .into_iter()
        .filter(|u| u.is_finite())
        .map(|u| u.clamp(0.0, 1.0))
        .min_by(|a, b| (q(*a) - beta).abs().total_cmp(&(q(*b) - beta).abs()));
    match best {
        Some(u) if (q(u) - beta).abs() <= 1e-12 * (1.0 + beta.abs()) => u,
        _ => bisect_monotone(q, beta),
    }
}

fn bisect_monotone(q: impl Fn(f64) -> f64, beta: f64) -> f64 {
    let rising = q(1.0) >= q(0.0);
    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (q(m) < beta) == rising {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Cells on which `f` is affine, as `(t0, t1, value at t0+, value at t1-)`.
fn affine_cells(f: &Function) -> Vec<(f64, f64, f64, f64)> {
    match f {
        Function::Pwl(f) => {
            let (n, v) = (f.nodes(), f.values());
            (0..n.len() - 1)
                .map(|i| (n[i], n[i + 1], v[i], v[i + 1]))
                .collect()
        }
        Function::Step(f) => {
            let (s, v) = (f.boundaries(), f.values());
            (0..v.len()).map(|i| (s[i], s[i + 1], v[i], v[i])).collect()
        }
    }
}

fn strict_sign_change(a: f64, b: f64) -> bool {
    (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0)
}

/// Ordered list of monotone pieces covering `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrand {
    pieces: Vec<Piece>,
}

impl Integrand {
    pub fn from_pieces(pieces: Vec<Piece>) -> Self {
        Integrand { pieces }
    }

    pub fn from_function(f: &Function) -> Self {
        let pieces = affine_cells(f)
            .into_iter()
            .map(|(t0, t1, v0, v1)| Piece::affine(t0, t1, v0, v1))
            .collect();
        Integrand { pieces }
    }

    /// Exact `|f|^p`: each cell is split at the root of `f`, then `|f|` is
    /// linear on every part.
    pub fn abs_power(f: &Function, p: f64) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::domain(format!(
                "exponent {p} must be positive and finite"
            )));
        }
        let mut pieces = Vec::new();
        for (t0, t1, v0, v1) in affine_cells(f) {
            if strict_sign_change(v0, v1) {
                let root = (t0 + v0 / (v0 - v1) * (t1 - t0)).clamp(t0, t1);
                if root > t0 {
                    pieces.push(Piece::abs_power(t0, root, v0.abs(), 0.0, p));
                }
                if root < t1 {
                    pieces.push(Piece::abs_power(root, t1, 0.0, v1.abs(), p));
                }
            } else {
                pieces.push(Piece::abs_power(t0, t1, v0.abs(), v1.abs(), p));
            }
        }
        Ok(Integrand { pieces })
    }

    /// Exact `|f g|` as quadratic pieces on the merged grid, split at the
    /// roots of both factors and at each vertex.
    pub fn abs_product(f: &Function, g: &Function) -> Self {
        let fc = affine_cells(f);
        let gc = affine_cells(g);
        let mut pieces = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < fc.len() && j < gc.len() {
            let a = fc[i].0.max(gc[j].0);
            let b = fc[i].1.min(gc[j].1);
            if a < b {
                let at = |c: (f64, f64, f64, f64), t: f64| lerp(c.2, c.3, (t - c.0) / (c.1 - c.0));
                let (f_a, f_b) = (at(fc[i], a), at(fc[i], b));
                let (g_a, g_b) = (at(gc[j], a), at(gc[j], b));
                let mut cuts = vec![a, b];
                for (x, y) in [(f_a, f_b), (g_a, g_b)] {
                    if strict_sign_change(x, y) {
                        let r = a + x / (x - y) * (b - a);
                        if r > a && r < b {
                            cuts.push(r);
                        }
                    }
                }
                cuts.sort_by(f64::total_cmp);
                for w in cuts.windows(2) {
                    let (s0, s1) = (w[0], w[1]);
                    if !(s0 < s1) {
                        continue;
                    }
                    let frac = |t: f64| (t - a) / (b - a);
                    let (u0, u1) = (frac(s0), frac(s1));
                    let big_f = (lerp(f_a, f_b, u0).abs(), lerp(f_a, f_b, u1).abs());
                    let big_g = (lerp(g_a, g_b, u0).abs(), lerp(g_a, g_b, u1).abs());
                    push_product(&mut pieces, s0, s1, big_f, big_g);
                }
            }
            if fc[i].1 < gc[j].1 {
                i += 1;
            } else if gc[j].1 < fc[i].1 {
                j += 1;
            } else {
                i += 1;
                j += 1;
            }
        }
        Integrand { pieces }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// `(min, max)` over all pieces.
    pub fn range(&self) -> (f64, f64) {
        self.pieces
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.lo()), hi.max(p.hi()))
            })
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let i = self
            .pieces
            .partition_point(|p| p.t1 < t)
            .min(self.pieces.len() - 1);
        self.pieces[i].value_at(t)
    }

    /// The pieces restricted to the parts of `a`; zero-width overlaps are dropped.
    pub fn restrict(&self, a: &IntervalUnion) -> Vec<Piece> {
        let mut out = Vec::new();
        for &(lo, hi) in a.parts() {
            let start = self.pieces.partition_point(|p| p.t1 <= lo);
            for piece in &self.pieces[start..] {
                if piece.t0 >= hi {
                    break;
                }
                if let Some(c) = piece.clip(lo, hi) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// `{t : value(t) >= beta}` as an interval union.
    pub fn superlevel(&self, beta: f64) -> IntervalUnion {
        superlevel_of_pieces(&self.pieces, beta)
    }
}

pub(crate) fn superlevel_of_pieces(pieces: &[Piece], beta: f64) -> IntervalUnion {
    let parts = pieces
        .iter()
        .filter_map(|p| p.superlevel_part(beta))
        .collect();
    IntervalUnion::from_valid_parts(parts)
}

/// Pushes `F(u) G(u)` for linear nonnegative `F`, `G` on `[s0, s1]`, split at
/// the vertex when it falls inside.
fn push_product(out: &mut Vec<Piece>, s0: f64, s1: f64, f: (f64, f64), g: (f64, f64)) {
    let (df, dg) = (f.1 - f.0, g.1 - g.0);
    let c0 = f.0 * g.0;
    let c1 = f.0 * dg + g.0 * df;
    let c2 = df * dg;
    if c2 != 0.0 {
        let vertex = -c1 / (2.0 * c2);
        if vertex > 0.0 && vertex < 1.0 {
            let whole = Piece::quadratic(s0, s1, c0, c1, c2);
            let mid = s0 + vertex * (s1 - s0);
            if mid > s0 && mid < s1 {
                // clip reparametrizes each half onto its own [0, 1]
                out.extend(whole.clip(s0, mid));
                out.extend(whole.clip(mid, s1));
                return;
            }
        }
    }
    out.push(Piece::quadratic(s0, s1, c0, c1, c2));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{PiecewiseLinear, StepFunction};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn length_above_by_sampling(intg: &Integrand, beta: f64, n: usize) -> f64 {
        (0..n)
            .filter(|&k| intg.value_at((k as f64 + 0.5) / n as f64) >= beta)
            .count() as f64
            / n as f64
    }

    fn total_length_above(intg: &Integrand, beta: f64) -> f64 {
        intg.pieces().iter().map(|p| p.length_above(beta)).sum()
    }

    #[test]
    fn affine_length_above() {
        let ramp = Integrand::from_function(&PiecewiseLinear::identity().into());
        assert_eq!(total_length_above(&ramp, 0.25), 0.75);
        assert_eq!(total_length_above(&ramp, -1.0), 1.0);
        assert_eq!(total_length_above(&ramp, 1.5), 0.0);
    }

    #[test]
    fn step_pieces_are_constant() {
        let f = StepFunction::new(vec![0.0, 0.5, 1.0], vec![2.0, -1.0]).unwrap();
        let intg = Integrand::from_function(&f.into());
        assert_eq!(intg.pieces().len(), 2);
        assert_eq!(total_length_above(&intg, 0.0), 0.5);
        assert_eq!(intg.range(), (-1.0, 2.0));
    }

    #[test]
    fn abs_power_matches_pointwise_values() {
        let f: Function = PiecewiseLinear::new(vec![0.0, 0.4, 1.0], vec![-1.0, 0.6, 0.2])
            .unwrap()
            .into();
        let intg = Integrand::abs_power(&f, 2.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let t: f64 = rng.gen();
            let exact = f.eval(t).abs().powf(2.5);
            assert!((intg.value_at(t) - exact).abs() < 1e-14);
        }
        for beta in [0.01, 0.1, 0.3, 0.7] {
            let sampled = length_above_by_sampling(&intg, beta, 200_000);
            assert!((total_length_above(&intg, beta) - sampled).abs() < 1e-4);
        }
    }

    #[test]
    fn abs_product_matches_pointwise_values() {
        let f: Function = PiecewiseLinear::new(vec![0.0, 0.3, 1.0], vec![0.5, -0.8, 1.0])
            .unwrap()
            .into();
        let g: Function = PiecewiseLinear::new(vec![0.0, 0.6, 1.0], vec![-0.2, 1.0, 0.1])
            .unwrap()
            .into();
        let intg = Integrand::abs_product(&f, &g);
        for p in intg.pieces() {
            let mid = p.value_at(0.5 * (p.t0 + p.t1));
            assert!(mid >= p.lo() - 1e-15 && mid <= p.hi() + 1e-15, "{p:?}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let t: f64 = rng.gen();
            let exact = (f.eval(t) * g.eval(t)).abs();
            assert!((intg.value_at(t) - exact).abs() < 1e-14, "t={t}");
        }
        for beta in [0.01, 0.1, 0.3, 0.7] {
            let sampled = length_above_by_sampling(&intg, beta, 200_000);
            assert!((total_length_above(&intg, beta) - sampled).abs() < 1e-4);
        }
    }

    #[test]
    fn quadratic_crossing_is_accurate() {
        // u^2 on [0, 1]
        let u = quadratic_crossing(0.0, 0.0, 1.0, 0.25);
        assert!((u - 0.5).abs() < 1e-15);
        // 1 - u^2 falling
        let u = quadratic_crossing(1.0, 0.0, -1.0, 0.75);
        assert!((u - 0.5).abs() < 1e-15);
        // nearly linear
        let u = quadratic_crossing(0.1, 1.0, 1e-17, 0.6);
        assert!((u - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clip_keeps_values() {
        let p = Piece::quadratic(0.2, 0.6, 0.1, 0.3, 0.2);
        let c = p.clip(0.3, 0.5).unwrap();
        for t in [0.3, 0.35, 0.4, 0.5] {
            assert!((c.value_at(t) - p.value_at(t)).abs() < 1e-15);
        }
        assert!(p.clip(0.6, 0.9).is_none());
    }

    #[test]
    fn restrict_to_union() {
        let ramp = Integrand::from_function(&PiecewiseLinear::identity().into());
        let a = IntervalUnion::new([(0.1, 0.2), (0.5, 0.5), (0.7, 0.9)]).unwrap();
        let r = ramp.restrict(&a);
        assert_eq!(r.len(), 2);
        assert!((r[1].v0 - 0.7).abs() < 1e-15 && (r[1].v1 - 0.9).abs() < 1e-15);
    }
}
